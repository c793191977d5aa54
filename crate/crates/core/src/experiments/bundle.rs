//! CSV artifact bundle written by every experiment.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub experiment: String,
    pub scheme: String,
    pub field: String,
    /// `l2`, `h1`, `rel_l2`, `rel_h1` against the exact solution, or
    /// `rel_h1_vs_hf` against the high-fidelity run of the same scheme family.
    pub norm: String,
    /// Cycle index for refinement studies, ROM size otherwise (0 for HF rows).
    pub cycle_or_r: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub experiment: String,
    pub scheme: String,
    pub field: String,
    pub norm: String,
    pub from_cycle: usize,
    pub to_cycle: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRow {
    pub experiment: String,
    pub scheme: String,
    pub r: usize,
    pub time_index: usize,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub experiment: String,
    pub scheme: String,
    pub phase: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenvalueRow {
    pub field: String,
    pub k: usize,
    pub nu_normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionRow {
    pub experiment: String,
    /// Which basis produced the operators (e.g. `floor` or `no_floor`).
    pub variant: String,
    pub r: usize,
    /// `flow`, `heat` or `mechanics`.
    pub matrix: String,
    pub condition: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamErrorRow {
    /// `i` (training points), `ii` (interpolation) or `iii` (extrapolation).
    pub case: String,
    pub omega1: f64,
    pub omega2: f64,
    pub r: usize,
    pub field: String,
    pub max_rel_h1: f64,
    pub final_rel_h1: f64,
    pub avg_iterations: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistoryRow {
    pub experiment: String,
    pub scheme: String,
    pub r: usize,
    pub time: f64,
    pub field: String,
    pub norm: String,
    pub value: f64,
}

/// Every table an experiment can emit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bundle {
    pub errors: Vec<ErrorRow>,
    pub rates: Vec<RateRow>,
    pub iterations: Vec<IterationRow>,
    pub timings: Vec<TimingRow>,
    pub eigenvalues: Vec<EigenvalueRow>,
    pub condition_numbers: Vec<ConditionRow>,
    pub param_errors: Vec<ParamErrorRow>,
    pub history: Vec<HistoryRow>,
}

fn write_table<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl Bundle {
    pub fn extend(&mut self, other: Bundle) {
        self.errors.extend(other.errors);
        self.rates.extend(other.rates);
        self.iterations.extend(other.iterations);
        self.timings.extend(other.timings);
        self.eigenvalues.extend(other.eigenvalues);
        self.condition_numbers.extend(other.condition_numbers);
        self.param_errors.extend(other.param_errors);
        self.history.extend(other.history);
    }

    /// Writes the six standard tables (header only when empty) and the
    /// optional ones when they have rows. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let mut emit = |name: &str, written: Result<()>| -> Result<()> {
            written?;
            out.push(dir.join(name));
            Ok(())
        };
        emit(
            "errors.csv",
            write_table(&dir.join("errors.csv"), &["experiment", "scheme", "field", "norm", "cycle_or_r", "value"], &self.errors),
        )?;
        emit(
            "rates.csv",
            write_table(
                &dir.join("rates.csv"),
                &["experiment", "scheme", "field", "norm", "from_cycle", "to_cycle", "rate"],
                &self.rates,
            ),
        )?;
        emit(
            "iterations.csv",
            write_table(&dir.join("iterations.csv"), &["experiment", "scheme", "r", "time_index", "iterations"], &self.iterations),
        )?;
        emit(
            "timings.csv",
            write_table(&dir.join("timings.csv"), &["experiment", "scheme", "phase", "seconds"], &self.timings),
        )?;
        emit(
            "eigenvalues.csv",
            write_table(&dir.join("eigenvalues.csv"), &["field", "k", "nu_normalized"], &self.eigenvalues),
        )?;
        emit(
            "condition_numbers.csv",
            write_table(
                &dir.join("condition_numbers.csv"),
                &["experiment", "variant", "r", "matrix", "condition"],
                &self.condition_numbers,
            ),
        )?;
        if !self.param_errors.is_empty() {
            emit(
                "param_errors.csv",
                write_table(
                    &dir.join("param_errors.csv"),
                    &["case", "omega1", "omega2", "r", "field", "max_rel_h1", "final_rel_h1", "avg_iterations"],
                    &self.param_errors,
                ),
            )?;
        }
        if !self.history.is_empty() {
            emit(
                "error_history.csv",
                write_table(
                    &dir.join("error_history.csv"),
                    &["experiment", "scheme", "r", "time", "field", "norm", "value"],
                    &self.history,
                ),
            )?;
        }
        Ok(out)
    }
}
