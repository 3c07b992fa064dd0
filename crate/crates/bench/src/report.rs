//! Benchmark report: text table and JSON.
//!
//! Everything that depends on wall-clock time lives under `timings`, so two
//! runs with the same configuration produce identical reports once that
//! object is removed.

use std::fmt;

use matchmg::amg::LevelInfo;
use matchmg::runtime::CommStats;
use serde::{Deserialize, Serialize};

use crate::config::Problem;

/// Messages and bytes attributed to one setup phase, summed over ranks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Traffic {
    pub messages: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTraffic {
    pub matching: Traffic,
    pub spmm: Traffic,
    pub spmm_comm: Traffic,
    pub other: Traffic,
}

/// Seconds per setup phase, maximum over ranks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeconds {
    pub matching: f64,
    pub spmm: f64,
    pub spmm_comm: f64,
    pub other: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup: f64,
    pub solve: f64,
    /// `solve / iterations`, zero when no iteration ran.
    pub per_iteration: f64,
    pub setup_breakdown: PhaseSeconds,
}

/// Communication counters summed over ranks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommTotals {
    pub setup: CommStats,
    pub solve: CommStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: Problem,
    pub ranks: usize,
    pub precflag: bool,
    pub unknowns: usize,
    pub nnz: usize,
    /// Absent for plain CG.
    pub coarse_size_target: Option<usize>,
    pub levels: Vec<LevelInfo>,
    pub nl: usize,
    pub opc: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub initial_residual: f64,
    pub final_relative_residual: f64,
    pub history: Vec<f64>,
    pub setup_phases: PhaseTraffic,
    pub comm: CommTotals,
    pub timings: Timings,
}

impl RunReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// The report as a JSON value without the `timings` object.
    pub fn without_timings(&self) -> serde_json::Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timings");
        }
        Ok(v)
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.problem {
            Problem::Poisson { nd } => writeln!(f, "problem      poisson nd={nd}")?,
            Problem::File { path } => writeln!(f, "problem      {}", path.display())?,
        }
        writeln!(f, "unknowns     {}", self.unknowns)?;
        writeln!(f, "nonzeros     {}", self.nnz)?;
        writeln!(f, "ranks        {}", self.ranks)?;
        writeln!(f, "precflag     {}", u8::from(self.precflag))?;
        if self.precflag {
            writeln!(f)?;
            writeln!(f, "{:>5} {:>12} {:>14} {:>8} {:>6}", "level", "rows", "nnz", "nnz/row", "steps")?;
            for (k, l) in self.levels.iter().enumerate() {
                let per_row = l.global_nnz as f64 / l.global_rows.max(1) as f64;
                writeln!(
                    f,
                    "{:>5} {:>12} {:>14} {:>8.2} {:>6}",
                    k, l.global_rows, l.global_nnz, per_row, l.pairwise_steps
                )?;
            }
            writeln!(f, "nl           {}", self.nl)?;
            if let Some(opc) = self.opc {
                writeln!(f, "opc          {opc:.4}")?;
            }
        }
        writeln!(f)?;
        writeln!(
            f,
            "iterations   {} ({})",
            self.iterations,
            if self.converged { "converged" } else { "NOT converged" }
        )?;
        writeln!(f, "rel residual {:.3e}", self.final_relative_residual)?;
        writeln!(f, "tsetup       {:.4} s", self.timings.setup)?;
        writeln!(f, "tsolve       {:.4} s", self.timings.solve)?;
        writeln!(f, "titer        {:.6} s", self.timings.per_iteration)?;
        if self.precflag {
            writeln!(f)?;
            writeln!(f, "{:<10} {:>10} {:>10} {:>12}", "phase", "seconds", "messages", "bytes")?;
            let t = &self.timings.setup_breakdown;
            let c = &self.setup_phases;
            for (name, secs, tr) in [
                ("matching", t.matching, c.matching),
                ("spmm", t.spmm, c.spmm),
                ("spmm_comm", t.spmm_comm, c.spmm_comm),
                ("other", t.other, c.other),
            ] {
                writeln!(f, "{name:<10} {secs:>10.4} {:>10} {:>12}", tr.messages, tr.bytes)?;
            }
        }
        writeln!(f)?;
        writeln!(
            f,
            "solve comm   {} messages, {} bytes, {} allreduces",
            self.comm.solve.messages, self.comm.solve.bytes, self.comm.solve.allreduces
        )
    }
}
