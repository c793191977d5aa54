//! Declarative experiment configuration, read from TOML.
//!
//! A file names an experiment and overrides any subset of its defaults:
//!
//! ```toml
//! experiment = "1b"
//! mesh_n = 8
//! ranks = [1, 2, 3]
//!
//! [physics]
//! lambda = 50.0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::norms::ErrorMode;
use crate::assembly::PhysicalParams;
use crate::error::{Error, Result};
use crate::mesh::MeshPattern;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    /// Mesh refinement study against the manufactured solution.
    #[serde(rename = "1a")]
    Refinement,
    /// HF vs ROM over the training interval.
    #[serde(rename = "1b")]
    SameInterval,
    /// ROM evaluated beyond the training interval.
    #[serde(rename = "1c")]
    LongerInterval,
    /// ROM with a larger time step than the training run.
    #[serde(rename = "1d")]
    LargerStep,
    /// Parametric heterogeneous domain with a pair of wells.
    #[serde(rename = "2")]
    Parametric,
    /// User-defined single run.
    #[serde(rename = "custom")]
    Custom,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::Refinement,
        ExperimentId::SameInterval,
        ExperimentId::LongerInterval,
        ExperimentId::LargerStep,
        ExperimentId::Parametric,
        ExperimentId::Custom,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ExperimentId::Refinement => "1a",
            ExperimentId::SameInterval => "1b",
            ExperimentId::LongerInterval => "1c",
            ExperimentId::LargerStep => "1d",
            ExperimentId::Parametric => "2",
            ExperimentId::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config {
                path: "experiment".into(),
                reason: format!("unknown experiment `{s}` (expected one of 1a, 1b, 1c, 1d, 2, custom)"),
            })
    }
}

/// Source terms of a custom run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    Zero,
    Manufactured,
    Wells,
}

/// Initial data of a custom run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Zero,
    Manufactured,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSetup {
    pub forcing: ForcingKind,
    pub initial: InitialKind,
    pub permeability: f64,
    pub conductivity: f64,
    /// Dirichlet for all fields when true; otherwise p and theta are insulated.
    pub all_dirichlet: bool,
}

impl Default for CustomSetup {
    fn default() -> Self {
        CustomSetup {
            forcing: ForcingKind::Zero,
            initial: InitialKind::Zero,
            permeability: 1e-5,
            conductivity: 1e-5,
            all_dirichlet: true,
        }
    }
}

/// Parameter rectangles and grid resolutions of the parametric experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamGrid {
    /// `[[w1_min, w1_max], [w2_min, w2_max]]`.
    pub train: [[f64; 2]; 2],
    pub test: [[f64; 2]; 2],
    /// Points per direction of the training grid.
    pub train_points: usize,
    /// Points per direction of the evaluation grids.
    pub eval_points: usize,
}

impl Default for ParamGrid {
    fn default() -> Self {
        ParamGrid { train: [[-3.0, 0.0], [-1.0, 1.0]], test: [[-4.0, 1.0], [-2.0, 2.0]], train_points: 3, eval_points: 7 }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn tensor(rect: [[f64; 2]; 2], n: usize) -> Vec<[f64; 2]> {
    let xs = linspace(rect[0][0], rect[0][1], n);
    let ys = linspace(rect[1][0], rect[1][1], n);
    xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, y])).collect()
}

fn inside(rect: [[f64; 2]; 2], w: [f64; 2]) -> bool {
    let tol = 1e-12;
    (0..2).all(|k| w[k] >= rect[k][0] - tol && w[k] <= rect[k][1] + tol)
}

fn same(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12
}

impl ParamGrid {
    pub fn training_points(&self) -> Vec<[f64; 2]> {
        tensor(self.train, self.train_points)
    }

    /// Finer grid on the training rectangle, without the training points.
    pub fn interpolation_points(&self) -> Vec<[f64; 2]> {
        let train = self.training_points();
        tensor(self.train, self.eval_points)
            .into_iter()
            .filter(|w| !train.iter().any(|t| same(*t, *w)))
            .collect()
    }

    /// Grid on the testing rectangle, without points inside the training rectangle.
    pub fn extrapolation_points(&self) -> Vec<[f64; 2]> {
        tensor(self.test, self.eval_points).into_iter().filter(|w| !inside(self.train, *w)).collect()
    }

    fn validate(&self) -> Result<()> {
        let bad = |path: &str, reason: &str| Err(Error::Config { path: path.into(), reason: reason.into() });
        for (name, r) in [("grid.train", self.train), ("grid.test", self.test)] {
            if r.iter().flatten().any(|v| !v.is_finite()) || r.iter().any(|iv| iv[0] > iv[1]) {
                return bad(name, "intervals must be finite with min <= max");
            }
        }
        if !(0..2).all(|k| self.test[k][0] <= self.train[k][0] && self.train[k][1] <= self.test[k][1]) {
            return bad("grid.test", "must contain the training rectangle");
        }
        if self.train_points == 0 || self.eval_points == 0 {
            return bad("grid", "grid resolutions must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    /// Cells per side of the (coarsest) grid.
    pub mesh_n: usize,
    pub pattern: MeshPattern,
    /// Refinement cycles (study `1a` only): `h` halves and `dt` quarters per cycle.
    pub cycles: usize,
    pub dt_train: f64,
    pub t_train: f64,
    pub dt_online: f64,
    pub t_online: f64,
    pub eps: f64,
    pub max_iter: usize,
    /// ROM sizes to evaluate.
    pub ranks: Vec<usize>,
    /// Relative POD eigenvalue floor; 0 keeps every positive eigenvalue.
    pub eig_floor: f64,
    pub error_mode: ErrorMode,
    /// Material parameters. For experiment 2, `lambda` and `mu` are replaced by `10^w2`.
    pub physics: PhysicalParams,
    pub custom: CustomSetup,
    pub grid: ParamGrid,
    /// Keep per-level relative error histories in `error_history.csv`.
    pub history: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn example1_physics() -> PhysicalParams {
    super::example1_params()
}

fn example2_physics() -> PhysicalParams {
    PhysicalParams {
        lambda: 1.0,
        mu: 1.0,
        c0: 1e-2,
        alpha: 1.0,
        alpha_t: 1e-4,
        alpha_m: 1e-6,
        c_d: 1.0,
        theta0: 1.0,
        l_stab: 1.0,
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults of each experiment.
    pub fn defaults(id: ExperimentId) -> Self {
        let base = ExperimentConfig {
            experiment: id,
            mesh_n: 16,
            pattern: MeshPattern::Crossed,
            cycles: 1,
            dt_train: 1e-3,
            t_train: 1.0,
            dt_online: 1e-3,
            t_online: 1.0,
            eps: 1e-10,
            max_iter: 20,
            ranks: (1..=10).collect(),
            eig_floor: 1e-12,
            error_mode: ErrorMode::Quadrature,
            physics: example1_physics(),
            custom: CustomSetup::default(),
            grid: ParamGrid::default(),
            history: false,
            output_dir: None,
        };
        match id {
            ExperimentId::Refinement => ExperimentConfig {
                mesh_n: 4,
                cycles: 3,
                dt_train: 0.0025,
                dt_online: 0.0025,
                ranks: (1..=5).collect(),
                ..base
            },
            ExperimentId::SameInterval => base,
            ExperimentId::LongerInterval => ExperimentConfig { t_train: 0.1, ..base },
            ExperimentId::LargerStep => ExperimentConfig { dt_online: 0.01, ..base },
            ExperimentId::Parametric => ExperimentConfig {
                mesh_n: 20,
                dt_train: 0.1,
                t_train: 2.0,
                dt_online: 0.1,
                t_online: 2.0,
                eps: 1e-3,
                ranks: vec![1, 2, 3, 5, 10, 20, 30, 40],
                physics: example2_physics(),
                ..base
            },
            ExperimentId::Custom => ExperimentConfig {
                mesh_n: 8,
                dt_train: 0.01,
                t_train: 0.1,
                dt_online: 0.01,
                t_online: 0.1,
                ranks: vec![1, 2, 3],
                ..base
            },
        }
    }

    /// Parses TOML text: the `experiment` key selects the defaults, every
    /// other key overrides them.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            path: "<toml>".into(),
            reason: e.to_string(),
        })?;
        let id = match user.get("experiment") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::Config { path: "experiment".into(), reason: "must be a string".into() }),
            None => return Err(Error::Config { path: "experiment".into(), reason: "missing".into() }),
        };
        let defaults = ExperimentConfig::defaults(id);
        let mut merged = toml::Table::try_from(&defaults).map_err(|e| Error::Config {
            path: "<defaults>".into(),
            reason: e.to_string(),
        })?;
        merge(&mut merged, user, "")?;
        let cfg: ExperimentConfig = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| Error::Config {
            path: "<toml>".into(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { path: p, reason } => Error::Config { path: format!("{}: {p}", path.display()), reason },
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Number of steps of `dt` that span `t`.
    pub fn steps(dt: f64, t: f64) -> usize {
        (t / dt).round() as usize
    }

    pub fn train_steps(&self) -> usize {
        Self::steps(self.dt_train, self.t_train)
    }

    pub fn online_steps(&self) -> usize {
        Self::steps(self.dt_online, self.t_online)
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, reason: String| Err(Error::Config { path: path.into(), reason });
        if self.mesh_n == 0 {
            return bad("mesh_n", "must be positive".into());
        }
        if self.experiment == ExperimentId::Refinement && self.cycles < 2 {
            return bad("cycles", "a refinement study needs at least 2 cycles".into());
        }
        if self.cycles == 0 {
            return bad("cycles", "must be positive".into());
        }
        for (name, dt, t) in [("dt_train", self.dt_train, self.t_train), ("dt_online", self.dt_online, self.t_online)] {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(name, format!("must be positive, got {dt}"));
            }
            if !(t > 0.0 && t.is_finite()) {
                return bad(name, format!("final time must be positive, got {t}"));
            }
            let n = Self::steps(dt, t);
            if n == 0 || (n as f64 * dt - t).abs() > 1e-12 * t.max(1.0) {
                return bad(name, format!("final time {t} is not a multiple of {dt}"));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", format!("must be positive, got {}", self.eps));
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be positive".into());
        }
        if self.ranks.contains(&0) {
            return bad("ranks", "ranks must be positive".into());
        }
        if !(self.eig_floor >= 0.0 && self.eig_floor < 1.0) {
            return bad("eig_floor", format!("must lie in [0, 1), got {}", self.eig_floor));
        }
        if self.experiment == ExperimentId::Custom
            && !(self.custom.permeability > 0.0 && self.custom.conductivity > 0.0)
        {
            return bad("custom", "permeability and conductivity must be positive".into());
        }
        // physical invariants (mu > 0, ...) are a numerical failure raised at assembly
        let pr = &self.physics;
        for (name, v) in [
            ("lambda", pr.lambda),
            ("mu", pr.mu),
            ("c0", pr.c0),
            ("alpha", pr.alpha),
            ("alpha_t", pr.alpha_t),
            ("alpha_m", pr.alpha_m),
            ("c_d", pr.c_d),
            ("theta0", pr.theta0),
            ("l_stab", pr.l_stab),
        ] {
            if !v.is_finite() {
                return bad(&format!("physics.{name}"), format!("{v} is not finite"));
            }
        }
        self.grid.validate()
    }
}

/// Overlays `user` on `base`, recursing into tables; unknown keys are kept so
/// that deserialization reports them.
fn merge(base: &mut toml::Table, user: toml::Table, prefix: &str) -> Result<()> {
    for (k, v) in user {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u, &path)?,
            (Some(toml::Value::Table(_)), _) => {
                return Err(Error::Config { path, reason: "expected a table".into() });
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    Ok(())
}
