use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thermoporo::experiments::{run_experiment, ExperimentConfig, ExperimentId, Outcome, Setup};
use thermoporo::hf::{check_assumptions, HfScheme, StoppingCriterion};
use thermoporo::io;
use thermoporo::rom::{project_operators, RomScheme};
use thermoporo::{Error, Result};

/// Thermo-poroelasticity solvers and reduced order models.
#[derive(Parser)]
#[command(name = "thermoporo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV bundle.
    Run(Common),
    /// Mesh refinement study (experiment 1a).
    Convergence(Common),
    /// FS-HF training run and POD basis.
    Pod(PodArgs),
    /// Project operators onto a basis and run both ROM schemes.
    Rom(RomArgs),
    /// Print the resolved configuration and problem sizes.
    Info(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment id: 1a, 1b, 1c, 1d, 2 or custom.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    cycles: Option<usize>,
    #[arg(long)]
    mesh_n: Option<usize>,
    /// Comma-separated ROM sizes.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    /// Output directory (overrides THERMOPORO_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// -v logs progress, -vv one line per time step.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args)]
struct PodArgs {
    #[command(flatten)]
    common: Common,
    /// POD an existing trajectory file instead of running FS-HF.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct RomArgs {
    #[command(flatten)]
    common: Common,
    /// Basis file (default: `basis.bin` in the output directory).
    #[arg(long)]
    basis: Option<PathBuf>,
}

impl Common {
    fn config(&self, forced: Option<ExperimentId>) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.experiment) {
            (Some(path), _) => ExperimentConfig::from_file(path)?,
            (None, Some(id)) => ExperimentConfig::defaults(id.parse()?),
            (None, None) => match forced {
                Some(id) => ExperimentConfig::defaults(id),
                None => {
                    return Err(Error::Config {
                        path: "--config".into(),
                        reason: "pass a config file or --experiment".into(),
                    })
                }
            },
        };
        if let (Some(_), Some(id)) = (&self.config, &self.experiment) {
            let id: ExperimentId = id.parse()?;
            if id != cfg.experiment {
                return Err(Error::Config {
                    path: "--experiment".into(),
                    reason: format!("config file is for experiment {}, not {id}", cfg.experiment),
                });
            }
        }
        if let Some(id) = forced {
            if cfg.experiment != id {
                return Err(Error::Config {
                    path: "experiment".into(),
                    reason: format!("this subcommand runs experiment {id}, config names {}", cfg.experiment),
                });
            }
        }
        if let Some(c) = self.cycles {
            cfg.cycles = c;
        }
        if let Some(n) = self.mesh_n {
            cfg.mesh_n = n;
        }
        if let Some(r) = &self.ranks {
            cfg.ranks = r.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("THERMOPORO_OUT").filter(|v| !v.is_empty()).map(PathBuf::from))
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.tag()))
    }

    fn init(&self) -> Result<()> {
        let level = match self.verbose {
            0 => "warn",
            1 => "info",
            _ => "debug",
        };
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
            .format_timestamp(None)
            .try_init()
            .ok();
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(Error::Config { path: "--jobs".into(), reason: "must be positive".into() });
            }
            rayon::ThreadPoolBuilder::new().num_threads(j).build_global().ok();
        }
        Ok(())
    }
}

fn save_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
    Ok(())
}

fn run(common: &Common, forced: Option<ExperimentId>) -> Result<()> {
    common.init()?;
    let cfg = common.config(forced)?;
    let dir = common.out_dir(&cfg);
    save_config(&dir, &cfg)?;
    let outcome = run_experiment(&cfg)?;
    let files = outcome.bundle().write(&dir)?;
    if let Outcome::Custom(run) = &outcome {
        for (scheme, traj, rep) in &run.trajectories {
            let tag = scheme.label().to_lowercase();
            io::write_trajectory(&dir.join(format!("trajectory_{tag}.bin")), traj)?;
            io::write_report_csv(&dir.join(format!("report_{tag}.csv")), rep)?;
        }
        if let (Some(b), Some(o)) = (&run.basis, &run.operators) {
            io::write_basis(&dir.join("basis.bin"), b)?;
            io::write_rom_operators(&dir.join("rom_operators.bin"), o)?;
        }
    }
    if let Outcome::Refinement(study) = &outcome {
        for (scheme, r) in [("M-HF", 0), ("FS-HF", 0)] {
            if let Some(rate) = study.rates(scheme, r).last() {
                println!("{scheme} finest-pair rates: L2 {:?}  H1 {:?}", rate.l2.map(round3), rate.h1.map(round3));
            }
        }
    }
    println!("wrote {} files to {}", files.len(), dir.display());
    Ok(())
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn pod(args: &PodArgs) -> Result<()> {
    let common = &args.common;
    common.init()?;
    let cfg = common.config(None)?;
    let dir = common.out_dir(&cfg);
    save_config(&dir, &cfg)?;
    let setup = Setup::from_config(&cfg, cfg.dt_train)?;
    let opts = thermoporo::pod::PodOptions { eig_floor: cfg.eig_floor, ..thermoporo::pod::PodOptions::new(cfg.max_rank()) };
    let (traj, basis) = match &args.trajectory {
        Some(path) => {
            let traj = io::read_trajectory(path)?;
            let ops = &setup.disc.ops;
            let basis = thermoporo::pod::ReducedBasis::from_states(&traj.states, [&ops.gram_u, &ops.gram_p, &ops.gram_t], &opts)
                .map_err(|e| match e {
                    Error::DimensionMismatch { .. } => Error::Config {
                        path: "--trajectory".into(),
                        reason: format!("does not match the configured mesh: {e}"),
                    },
                    other => other,
                })?;
            (traj, basis)
        }
        None => {
            let (traj, rep, model) = setup.train(&cfg)?;
            io::write_trajectory(&dir.join("trajectory_fs-hf.bin"), &traj)?;
            io::write_report_csv(&dir.join("report_fs-hf.csv"), &rep)?;
            (traj, model.basis)
        }
    };
    io::write_basis(&dir.join("basis.bin"), &basis)?;
    let mut bundle = thermoporo::experiments::Bundle::default();
    for f in thermoporo::mesh::Field::ALL {
        for (k, v) in basis.field(f).normalized_spectrum().into_iter().enumerate() {
            bundle.eigenvalues.push(thermoporo::experiments::bundle::EigenvalueRow { field: f.name().into(), k, nu_normalized: v });
        }
    }
    bundle.write(&dir)?;
    let (ru, rp, rt) = basis.ranks();
    println!("{} snapshots, retained modes u={ru} p={rp} theta={rt}; wrote {}", traj.states.len(), dir.display());
    Ok(())
}

fn rom(args: &RomArgs) -> Result<()> {
    let common = &args.common;
    common.init()?;
    let cfg = common.config(None)?;
    let dir = common.out_dir(&cfg);
    let basis_path = args.basis.clone().unwrap_or_else(|| dir.join("basis.bin"));
    let basis = if basis_path.exists() {
        io::read_basis(&basis_path)?
    } else if args.basis.is_some() {
        return Err(Error::Config { path: "--basis".into(), reason: format!("{} does not exist", basis_path.display()) });
    } else {
        log::info!("no basis at {}, training one", basis_path.display());
        Setup::from_config(&cfg, cfg.dt_train)?.train(&cfg)?.2.basis
    };
    save_config(&dir, &cfg)?;
    let setup = Setup::from_config(&cfg, cfg.dt_online)?;
    let ops = &setup.disc.ops;
    if basis.u.n_dofs() != ops.gram_u.nrows() || basis.p.n_dofs() != ops.gram_p.nrows() {
        return Err(Error::Config { path: "--basis".into(), reason: "basis does not match the configured mesh".into() });
    }
    let projected = project_operators(&basis, ops)?;
    io::write_rom_operators(&dir.join("rom_operators.bin"), &projected)?;
    let model = thermoporo::experiments::example1::RomModel { basis, operators: projected, offline_seconds: 0.0 };
    let steps = cfg.online_steps();
    let loads = model.loads(&setup.disc.spaces, setup.forcing.as_ref(), cfg.dt_online, steps);
    let stop = StoppingCriterion::euclidean(cfg.eps, cfg.max_iter);
    let (hf, _) = setup.run(HfScheme::FixedStress, steps, &StoppingCriterion::h1(cfg.eps, cfg.max_iter))?;
    let mut bundle = thermoporo::experiments::Bundle::default();
    let exp = cfg.experiment.tag();
    for &r in &cfg.ranks {
        for scheme in [RomScheme::Monolithic, RomScheme::FixedStress] {
            let run = model.run(r, scheme, cfg.dt_online, &loads, ops, &setup.disc.spaces, setup.initial.as_ref(), &stop)?;
            let d = thermoporo::experiments::example1::rom_vs_hf(ops, &run, &hf.states);
            for (k, f) in thermoporo::mesh::Field::ALL.into_iter().enumerate() {
                bundle.errors.push(thermoporo::experiments::bundle::ErrorRow {
                    experiment: exp.into(),
                    scheme: scheme.label().into(),
                    field: f.name().into(),
                    norm: "rel_h1_vs_hf".into(),
                    cycle_or_r: r,
                    value: d[k],
                });
            }
            bundle.iterations.extend(run.report.steps.iter().enumerate().map(|(k, s)| {
                thermoporo::experiments::bundle::IterationRow {
                    experiment: exp.into(),
                    scheme: scheme.label().into(),
                    r,
                    time_index: k + 1,
                    iterations: s.iterations,
                }
            }));
            bundle.timings.push(thermoporo::experiments::bundle::TimingRow {
                experiment: exp.into(),
                scheme: thermoporo::experiments::example1::scheme_tag(scheme.label(), r),
                phase: "online".into(),
                seconds: run.report.solve_seconds(),
            });
            println!(
                "{}: max rel H1 vs FS-HF u={:.3e} p={:.3e} theta={:.3e}, avg iterations {:.2}",
                thermoporo::experiments::example1::scheme_tag(scheme.label(), r),
                d[0],
                d[1],
                d[2],
                run.report.average_iterations()
            );
        }
    }
    bundle.write(&dir)?;
    Ok(())
}

fn info(common: &Common) -> Result<()> {
    common.init()?;
    let cfg = common.config(None)?;
    println!("# resolved configuration (output directory: {})", common.out_dir(&cfg).display());
    print!("{}", cfg.to_toml_string());
    let sizes = match cfg.experiment {
        ExperimentId::Parametric => {
            let m = thermoporo::experiments::example2::ParametricModel::new(cfg.mesh_n, cfg.pattern, &cfg.physics, cfg.dt_train)?;
            m.disc.spaces.free_counts()
        }
        _ => Setup::from_config(&cfg, cfg.dt_train)?.disc.spaces.free_counts(),
    };
    println!("# free dofs: u={} p={} theta={}", sizes.0, sizes.1, sizes.2);
    let a = check_assumptions(&cfg.physics, 0.5);
    println!(
        "# assumptions: storage {} (c_d margin {:.3e}), stabilization {} (L margin {:.3e})",
        if a.storage_ok { "ok" } else { "violated" },
        a.c_d_margin,
        if a.stabilization_ok { "ok" } else { "violated" },
        a.l_margin
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(c) => run(c, None),
        Command::Convergence(c) => run(c, Some(ExperimentId::Refinement)),
        Command::Pod(a) => pod(a),
        Command::Rom(a) => rom(a),
        Command::Info(c) => info(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
