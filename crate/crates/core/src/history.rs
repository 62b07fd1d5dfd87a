//! Convergence records shared by all solvers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::counters::Counts;

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    /// Iteration or cycle budget exhausted.
    MaxIterations,
    /// CG met `⟨p, Ap⟩ ≤ 0`.
    Indefinite,
    /// The projected system was singular; the linear iterate was frozen.
    Stagnated,
    /// The Krylov space became invariant (lucky breakdown).
    InvariantSubspace,
    /// Block Gram matrix lost rank.
    Unstable,
}

impl Status {
    pub fn is_converged(self) -> bool {
        self == Status::Converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    /// Restart cycle (1-based), 0 for unrestarted methods.
    pub cycle: usize,
    pub iteration: usize,
    pub matvecs: u64,
    pub vecops: u64,
    pub resid_rel: f64,
    pub orthodefect: Option<f64>,
}

/// One retained (harmonic) Ritz pair at the end of a cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigRow {
    pub cycle: usize,
    pub matvecs: u64,
    pub index: usize,
    pub value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceHistory {
    pub rows: Vec<HistoryRow>,
    pub eig: Vec<EigRow>,
    pub totals: Counts,
}

impl ConvergenceHistory {
    pub fn push(&mut self, cycle: usize, iteration: usize, used: Counts, resid_rel: f64, orthodefect: Option<f64>) {
        self.rows.push(HistoryRow {
            cycle,
            iteration,
            matvecs: used.matvecs,
            vecops: used.vecops,
            resid_rel,
            orthodefect,
        });
    }

    /// Like `push`, but a row already recorded at the same cycle and
    /// iteration is replaced.
    pub fn push_cycle_end(&mut self, cycle: usize, iteration: usize, used: Counts, resid_rel: f64, orthodefect: Option<f64>) {
        if self.rows.last().is_some_and(|r| r.cycle == cycle && r.iteration == iteration) {
            self.rows.pop();
        }
        self.push(cycle, iteration, used, resid_rel, orthodefect);
    }

    pub fn final_resid(&self) -> Option<f64> {
        self.rows.last().map(|r| r.resid_rel)
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iteration)
    }

    /// Matvec count at the first row whose residual is at or below `tol`.
    pub fn matvecs_to_reach(&self, tol: f64) -> Option<u64> {
        self.rows.iter().find(|r| r.resid_rel <= tol).map(|r| r.matvecs)
    }

    /// Residual of eigenpair `index` at each recorded cycle.
    pub fn eig_trace(&self, index: usize) -> Vec<(usize, u64, f64)> {
        self.eig
            .iter()
            .filter(|e| e.index == index)
            .map(|e| (e.cycle, e.matvecs, e.residual))
            .collect()
    }

    pub fn last_orthodefect(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.orthodefect)
    }

    /// Write the rows under the header
    /// `solver,rhs_index,cycle,iteration,matvecs,vecops,resid_rel,orthodefect`.
    pub fn write_csv<W: Write>(&self, solver: &str, rhs_index: usize, mut w: W) -> std::io::Result<()> {
        writeln!(w, "solver,rhs_index,cycle,iteration,matvecs,vecops,resid_rel,orthodefect")?;
        for r in &self.rows {
            let od = r.orthodefect.map(|x| format!("{x:e}")).unwrap_or_default();
            writeln!(
                w,
                "{solver},{rhs_index},{},{},{},{},{:e},{od}",
                r.cycle, r.iteration, r.matvecs, r.vecops, r.resid_rel
            )?;
        }
        Ok(())
    }

    pub fn write_eig_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "cycle,matvecs,index,value,residual")?;
        for e in &self.eig {
            writeln!(w, "{},{},{},{:e},{:e}", e.cycle, e.matvecs, e.index, e.value, e.residual)?;
        }
        Ok(())
    }
}

/// Result of a single-vector iterative solve (CG, Minres and their deflated
/// forms).
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput<S> {
    pub x: Vec<S>,
    pub status: Status,
    /// Iterations after any projection step.
    pub iterations: usize,
    pub history: ConvergenceHistory,
}
