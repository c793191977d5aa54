//! Short mesh refinement study with observed rates (two cycles by default,
//! pass the count as an argument).

use thermoporo::experiments::example1::RefinementStudy;
use thermoporo::experiments::{ExperimentConfig, ExperimentId};

fn sci(v: &[f64; 3]) -> String {
    v.map(|x| format!("{x:.2e}")).join(" ")
}

fn main() -> thermoporo::Result<()> {
    let cycles = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let cfg = ExperimentConfig { cycles, ranks: vec![], ..ExperimentConfig::defaults(ExperimentId::Refinement) };
    let study = RefinementStudy::run(&cfg)?;
    for scheme in ["M-HF", "FS-HF"] {
        println!("{scheme}");
        for (c, e) in study.cycles.iter().zip(study.errors(scheme, 0)) {
            println!("  h = {:.4}: L2 {}  H1 {}", c.h, sci(&e.l2), sci(&e.h1));
        }
        for (k, r) in study.rates(scheme, 0).iter().enumerate() {
            println!("  rates {k}->{}: L2 {:.2?}  H1 {:.2?}", k + 1, r.l2, r.h1);
        }
    }
    Ok(())
}
