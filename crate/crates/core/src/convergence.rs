//! Per-sweep convergence records and their CSV serialization.

use crate::Scalar;
use serde::Serialize;
use std::io::Write;

/// State of the interpolation after one sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRecord {
    /// 1-based sweep number.
    pub sweep: usize,
    /// Largest TT rank after the sweep.
    pub max_rank: usize,
    /// Cumulative number of oracle evaluations.
    pub n_eval: u64,
    /// Current value of the tracked functional (integral estimate).
    pub estimate: Scalar,
    /// Base-10 exponent offset of the estimate; 0 outside log-scaled mode.
    pub exponent_offset: Scalar,
    /// Relative change of the functional against the previous sweep.
    pub internal_rel_change: Scalar,
    /// Wall-clock seconds elapsed since the start of the run.
    pub wall_s: f64,
}

/// Ordered sweep records of one interpolation run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ConvergenceLog {
    pub records: Vec<SweepRecord>,
}

impl ConvergenceLog {
    pub fn new() -> Self {
        ConvergenceLog::default()
    }

    pub fn push(&mut self, record: SweepRecord) {
        self.records.push(record);
    }

    pub fn last(&self) -> Option<&SweepRecord> {
        self.records.last()
    }

    /// Writes the log as CSV with the header
    /// `sweep,max_rank,n_eval,estimate,exponent_offset,internal_rel_change,wall_s`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "sweep,max_rank,n_eval,estimate,exponent_offset,internal_rel_change,wall_s"
        )?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{:.17e},{},{:.6e},{:.6}",
                r.sweep,
                r.max_rank,
                r.n_eval,
                r.estimate,
                r.exponent_offset,
                r.internal_rel_change,
                r.wall_s
            )?;
        }
        Ok(())
    }
}
