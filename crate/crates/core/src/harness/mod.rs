//! Experiment orchestration: test matrices, right-hand sides, solver chains
//! and structured output.
//!
//! An [`ExperimentSpec`] names a matrix recipe, how to draw right-hand sides
//! and a chain of [`Step`]s. Deflated steps use the deflation space left by
//! the most recent Lan-DR or Minres-DR step. [`run`] executes the chain and
//! returns a [`ResultBundle`]; [`emit`] writes one CSV per solve, eigenvalue
//! CSVs, `summary.json` and a gnuplot script.

pub mod baseline;
pub mod experiments;
pub mod recipes;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::blockcg::{block_cg, BlockCgOptions};
use crate::counters::{self, Counts};
use crate::dcg::{cg, d_cg_related, CgOptions, SolutionSpace};
use crate::error::{Error, Result};
use crate::history::{ConvergenceHistory, SolveOutput, Status};
use crate::kernels::Block;
use crate::landr::{lan_dr, DeflationSpace, LanDrConfig};
use crate::minresdr::{d_minres, minres, minres_dr};
use crate::operator::LinearOperator;
use crate::rng;
use crate::scalar::Scalar;

pub use recipes::MatrixRecipe;

fn one() -> usize {
    1
}

fn default_seed() -> u64 {
    1
}

fn default_scale() -> f64 {
    1e-3
}

/// How right-hand sides are drawn. Right-hand side `i` uses RNG stream `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RhsSpec {
    /// Independent Normal(0,1) vectors.
    RandomNormal {
        #[serde(default = "one")]
        count: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    /// `b_0` random and `b_i = b_0 + scale · ran_i`.
    Related {
        #[serde(default = "one")]
        count: usize,
        #[serde(default = "default_seed")]
        seed: u64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
}

impl Default for RhsSpec {
    fn default() -> Self {
        RhsSpec::RandomNormal { count: 1, seed: 1 }
    }
}

impl RhsSpec {
    pub fn count(&self) -> usize {
        match self {
            RhsSpec::RandomNormal { count, .. } | RhsSpec::Related { count, .. } => *count,
        }
    }

    pub fn generate<S: Scalar>(&self, n: usize) -> Vec<Vec<S>> {
        match *self {
            RhsSpec::RandomNormal { count, seed } => {
                (0..count).map(|i| rng::normal_vector(n, &mut rng::stream(seed, i as u64))).collect()
            }
            RhsSpec::Related { count, seed, scale } => {
                let b0: Vec<S> = rng::normal_vector(n, &mut rng::stream(seed, 0));
                (0..count)
                    .map(|i| {
                        if i == 0 {
                            return b0.clone();
                        }
                        let ran: Vec<S> = rng::normal_vector(n, &mut rng::stream(seed, i as u64));
                        b0.iter().zip(ran).map(|(&a, r)| a + r.scale(scale)).collect()
                    })
                    .collect()
            }
        }
    }
}

fn first_rhs() -> Vec<usize> {
    vec![0]
}

fn default_rtol() -> f64 {
    1e-8
}

fn default_maxit() -> usize {
    10_000
}

/// One solver invocation in a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "kebab-case")]
pub enum Step {
    LanDr {
        #[serde(default)]
        rhs: usize,
        #[serde(default)]
        config: LanDrConfig,
        /// Continue with deflated CG from the Lan-DR iterate if the linear
        /// tolerance was not reached.
        #[serde(default)]
        then_dcg: Option<CgOptions>,
        #[serde(default)]
        label: Option<String>,
    },
    MinresDr {
        #[serde(default)]
        rhs: usize,
        #[serde(default)]
        config: LanDrConfig,
        #[serde(default)]
        label: Option<String>,
    },
    Cg {
        #[serde(default = "first_rhs")]
        rhs: Vec<usize>,
        #[serde(default)]
        options: CgOptions,
        #[serde(default)]
        label: Option<String>,
    },
    Minres {
        #[serde(default = "first_rhs")]
        rhs: Vec<usize>,
        #[serde(default = "default_rtol")]
        rtol: f64,
        #[serde(default = "default_maxit")]
        maxit: usize,
        #[serde(default)]
        label: Option<String>,
    },
    DCg {
        #[serde(default = "first_rhs")]
        rhs: Vec<usize>,
        #[serde(default)]
        options: CgOptions,
        /// Project over the solutions of earlier right-hand sides first.
        #[serde(default)]
        project_solutions: bool,
        #[serde(default)]
        label: Option<String>,
    },
    DMinres {
        #[serde(default = "first_rhs")]
        rhs: Vec<usize>,
        #[serde(default = "default_rtol")]
        rtol: f64,
        #[serde(default = "default_maxit")]
        maxit: usize,
        #[serde(default)]
        label: Option<String>,
    },
    BlockCg {
        /// Empty means every right-hand side.
        #[serde(default)]
        rhs: Vec<usize>,
        #[serde(default = "default_rtol")]
        rtol: f64,
        #[serde(default = "default_maxit")]
        maxit: usize,
        #[serde(default)]
        label: Option<String>,
    },
    /// Unrestarted Lanczos eigenvalue baseline.
    Lanczos {
        #[serde(default)]
        rhs: usize,
        max_steps: usize,
        n_eig: usize,
        #[serde(default = "default_rtol")]
        eig_tol: f64,
        #[serde(default = "default_check")]
        check_every: usize,
        #[serde(default)]
        label: Option<String>,
    },
}

fn default_check() -> usize {
    10
}

impl Step {
    fn rhs_indices(&self, count: usize) -> Vec<usize> {
        match self {
            Step::LanDr { rhs, .. } | Step::MinresDr { rhs, .. } | Step::Lanczos { rhs, .. } => vec![*rhs],
            Step::Cg { rhs, .. } | Step::Minres { rhs, .. } | Step::DCg { rhs, .. } | Step::DMinres { rhs, .. } => {
                rhs.clone()
            }
            Step::BlockCg { rhs, .. } => {
                if rhs.is_empty() {
                    (0..count).collect()
                } else {
                    rhs.clone()
                }
            }
        }
    }

    fn label(&self) -> Option<&str> {
        match self {
            Step::LanDr { label, .. }
            | Step::MinresDr { label, .. }
            | Step::Cg { label, .. }
            | Step::Minres { label, .. }
            | Step::DCg { label, .. }
            | Step::DMinres { label, .. }
            | Step::BlockCg { label, .. }
            | Step::Lanczos { label, .. } => label.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub matrix: MatrixRecipe,
    /// Run in complex arithmetic even for a real matrix.
    #[serde(default)]
    pub complex: bool,
    #[serde(default)]
    pub rhs: RhsSpec,
    #[serde(default)]
    pub steps: Vec<Step>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let count = self.rhs.count();
        for step in &self.steps {
            for i in step.rhs_indices(count) {
                if i >= count {
                    return Err(Error::Spec(format!(
                        "step refers to right-hand side {i} but only {count} are generated"
                    )));
                }
            }
            match step {
                Step::LanDr { config, .. } | Step::MinresDr { config, .. } => config.validate(n)?,
                Step::Lanczos { n_eig, check_every, .. } if *n_eig == 0 || *check_every == 0 => {
                    return Err(Error::Spec("lanczos needs n_eig and check_every >= 1".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Summary of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub solver: String,
    pub label: String,
    pub rhs_index: usize,
    pub status: Status,
    pub iterations: usize,
    pub cycles: Option<usize>,
    pub matvecs: u64,
    pub vecops: u64,
    pub final_resid: Option<f64>,
    pub orthodefect: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub eig_values: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub eig_residuals: Vec<f64>,
    /// Vectors reorthogonalized after the first cycle (Lan-DR only).
    pub reorthogonalized: Option<usize>,
    /// Block size when the costs are shared by a block solve.
    pub block: Option<usize>,
    #[serde(skip)]
    pub history: ConvergenceHistory,
}

impl SolveRecord {
    fn new(solver: &str, label: &str, rhs_index: usize, status: Status, iterations: usize, history: ConvergenceHistory) -> Self {
        SolveRecord {
            solver: solver.into(),
            label: label.into(),
            rhs_index,
            status,
            iterations,
            cycles: None,
            matvecs: history.totals.matvecs,
            vecops: history.totals.vecops,
            final_resid: history.final_resid(),
            orthodefect: history.last_orthodefect(),
            eig_values: vec![],
            eig_residuals: vec![],
            reorthogonalized: None,
            block: None,
            history,
        }
    }

    fn from_solve<S>(solver: &str, label: &str, rhs_index: usize, out: SolveOutput<S>) -> Self {
        SolveRecord::new(solver, label, rhs_index, out.status, out.iterations, out.history)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub name: String,
    pub records: Vec<SolveRecord>,
    pub totals: Counts,
    /// Set when a step failed; records up to that point are kept.
    pub error: Option<String>,
}

impl ResultBundle {
    pub fn all_converged(&self) -> bool {
        self.error.is_none()
            && self
                .records
                .iter()
                .filter(|r| r.solver != "lanczos")
                .all(|r| r.status.is_converged())
    }

    pub fn by_label(&self, label: &str) -> Vec<&SolveRecord> {
        self.records.iter().filter(|r| r.label == label).collect()
    }

    /// Matvecs over the records whose label starts with `prefix`, counting
    /// each block solve once.
    pub fn matvecs_with_prefix(&self, prefix: &str) -> u64 {
        self.sum_with_prefix(prefix, |r| r.matvecs)
    }

    pub fn vecops_with_prefix(&self, prefix: &str) -> u64 {
        self.sum_with_prefix(prefix, |r| r.vecops)
    }

    fn sum_with_prefix(&self, prefix: &str, f: impl Fn(&SolveRecord) -> u64) -> u64 {
        let mut seen_block = std::collections::HashSet::new();
        self.records
            .iter()
            .filter(|r| r.label.starts_with(prefix))
            .filter(|r| r.block.is_none() || seen_block.insert(r.label.clone()))
            .map(f)
            .sum()
    }
}

/// Generate the matrix and run the chain. Invalid specs are errors; a
/// failing solver stops the chain and is reported in the bundle.
pub fn run(spec: &ExperimentSpec) -> Result<ResultBundle> {
    let g = spec.matrix.generate()?;
    spec.validate(g.dim())?;
    if spec.complex || g.is_complex() {
        let g = g.into_complex();
        Ok(run_with::<Complex64>(spec, g.complex().unwrap()))
    } else {
        Ok(run_with::<f64>(spec, g.real().unwrap()))
    }
}

struct State<S> {
    rhs: Vec<Vec<S>>,
    solutions: Vec<Option<Vec<S>>>,
    deflation: Option<DeflationSpace<S>>,
    space: SolutionSpace<S>,
    in_space: Vec<bool>,
}

/// Run the chain on an operator already at hand.
pub fn run_with<S: Scalar>(spec: &ExperimentSpec, op: &dyn LinearOperator<S>) -> ResultBundle {
    let n = op.dim();
    let start = counters::snapshot();
    let rhs = spec.rhs.generate::<S>(n);
    let count = rhs.len();
    let mut st = State {
        rhs,
        solutions: vec![None; count],
        deflation: None,
        space: SolutionSpace::new(n),
        in_space: vec![false; count],
    };
    let mut bundle = ResultBundle {
        name: spec.name.clone(),
        ..Default::default()
    };
    for (i, step) in spec.steps.iter().enumerate() {
        if let Err(e) = run_step(step, i, op, &mut st, &mut bundle.records) {
            bundle.error = Some(format!("step {i}: {e}"));
            break;
        }
    }
    bundle.totals = counters::since(start);
    bundle
}

fn default_label(step: &Step, i: usize) -> String {
    step.label().map(str::to_owned).unwrap_or_else(|| format!("step{i}"))
}

fn run_step<S: Scalar>(
    step: &Step,
    index: usize,
    op: &dyn LinearOperator<S>,
    st: &mut State<S>,
    records: &mut Vec<SolveRecord>,
) -> Result<()> {
    let label = default_label(step, index);
    let n = op.dim();
    match step {
        Step::LanDr {
            rhs, config, then_dcg, ..
        } => {
            let b = &st.rhs[*rhs];
            let out = lan_dr(op, b, None, config)?;
            let mut rec = SolveRecord::new("lan-dr", &label, *rhs, out.status, out.history.iterations(), out.history.clone());
            rec.cycles = Some(out.cycles);
            rec.eig_values = out.ritz.values.clone();
            rec.eig_residuals = out.ritz.residuals.clone();
            rec.reorthogonalized = Some(out.reorthogonalized_vectors());
            records.push(rec);
            st.solutions[*rhs] = Some(out.x.clone());
            if let (Some(opts), false) = (then_dcg, out.linear_converged) {
                let fin = d_cg_related(op, b, Some(&out.x), &out.deflation, None, opts)?;
                st.solutions[*rhs] = Some(fin.x.clone());
                records.push(SolveRecord::from_solve("d-cg", &label, *rhs, fin));
            }
            st.deflation = Some(out.deflation);
        }
        Step::MinresDr { rhs, config, .. } => {
            let out = minres_dr(op, &st.rhs[*rhs], None, config)?;
            let mut rec = SolveRecord::new("minres-dr", &label, *rhs, out.status, out.history.iterations(), out.history);
            rec.cycles = Some(out.cycles);
            rec.eig_values = out.harmonic.values.clone();
            rec.eig_residuals = out.harmonic.residuals.clone();
            records.push(rec);
            st.solutions[*rhs] = Some(out.x);
            st.deflation = Some(out.deflation);
        }
        Step::Cg { rhs, options, .. } => {
            for &i in rhs {
                let out = cg(op, &st.rhs[i], None, options)?;
                st.solutions[i] = Some(out.x.clone());
                records.push(SolveRecord::from_solve("cg", &label, i, out));
            }
        }
        Step::Minres { rhs, rtol, maxit, .. } => {
            for &i in rhs {
                let out = minres(op, &st.rhs[i], None, *rtol, *maxit)?;
                st.solutions[i] = Some(out.x.clone());
                records.push(SolveRecord::from_solve("minres", &label, i, out));
            }
        }
        Step::DCg {
            rhs,
            options,
            project_solutions,
            ..
        } => {
            let empty = DeflationSpace::empty(n);
            for &i in rhs {
                let before = counters::snapshot();
                if *project_solutions {
                    for j in 0..st.solutions.len() {
                        if j != i && !st.in_space[j] {
                            if let Some(x) = st.solutions[j].as_ref() {
                                st.space.push(op, x);
                                st.in_space[j] = true;
                            }
                        }
                    }
                }
                let space_cost = counters::since(before);
                let ds = st.deflation.as_ref().unwrap_or(&empty);
                let sols = project_solutions.then_some(&st.space);
                let out = d_cg_related(op, &st.rhs[i], None, ds, sols, options)?;
                st.solutions[i] = Some(out.x.clone());
                let mut rec = SolveRecord::from_solve("d-cg", &label, i, out);
                rec.matvecs += space_cost.matvecs;
                rec.vecops += space_cost.vecops;
                records.push(rec);
            }
        }
        Step::DMinres { rhs, rtol, maxit, .. } => {
            let empty = DeflationSpace::empty(n);
            for &i in rhs {
                let ds = st.deflation.as_ref().unwrap_or(&empty);
                let out = d_minres(op, &st.rhs[i], None, ds, *rtol, *maxit)?;
                st.solutions[i] = Some(out.x.clone());
                records.push(SolveRecord::from_solve("d-minres", &label, i, out));
            }
        }
        Step::BlockCg { rtol, maxit, .. } => {
            let idx = step.rhs_indices(st.rhs.len());
            let b = Block::from_columns(n, idx.iter().map(|&i| st.rhs[i].clone()).collect());
            let opts = BlockCgOptions {
                rtol: *rtol,
                maxit: *maxit,
                ..Default::default()
            };
            let out = block_cg(op, &b, &opts)?;
            let cols = out.x.clone().into_columns();
            for ((&i, h), x) in idx.iter().zip(out.histories).zip(cols) {
                let mut rec = SolveRecord::new("block-cg", &label, i, out.status, out.iterations, h);
                rec.block = Some(idx.len());
                records.push(rec);
                st.solutions[i] = Some(x);
            }
        }
        Step::Lanczos {
            rhs,
            max_steps,
            n_eig,
            eig_tol,
            check_every,
            ..
        } => {
            let out = baseline::lanczos_eig(op, &st.rhs[*rhs], *max_steps, *n_eig, *eig_tol, *check_every)?;
            let converged = out.residuals.len() == *n_eig && out.residuals.iter().all(|r| r <= eig_tol);
            let status = if converged { Status::Converged } else { Status::MaxIterations };
            let mut rec = SolveRecord::new("lanczos", &label, *rhs, status, out.steps, out.history);
            rec.eig_values = out.values;
            rec.eig_residuals = out.residuals;
            records.push(rec);
        }
    }
    Ok(())
}

fn file_stem(i: usize, rec: &SolveRecord) -> String {
    let label: String = rec
        .label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{i:03}-{label}-{}-rhs{}", rec.solver, rec.rhs_index)
}

/// Write the bundle into `dir`: a history CSV per record, an eigenvalue CSV
/// per record that has one, `summary.json` and `plot.gp`. Returns the
/// written paths.
pub fn emit(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut curves = Vec::new();
    for (i, rec) in bundle.records.iter().enumerate() {
        let stem = file_stem(i, rec);
        let path = dir.join(format!("{stem}.csv"));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        rec.history.write_csv(&rec.solver, rec.rhs_index, &mut w)?;
        w.flush()?;
        curves.push((format!("{stem}.csv"), format!("{} {} rhs {}", rec.label, rec.solver, rec.rhs_index)));
        written.push(path);
        if !rec.history.eig.is_empty() {
            let path = dir.join(format!("{stem}-eig.csv"));
            let mut w = BufWriter::new(fs::File::create(&path)?);
            rec.history.write_eig_csv(&mut w)?;
            w.flush()?;
            written.push(path);
        }
    }
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(bundle)? + "\n")?;
    written.push(path);

    let path = dir.join("plot.gp");
    let mut gp = String::new();
    gp.push_str("set datafile separator ','\nset logscale y\nset key outside\n");
    gp.push_str("set xlabel 'matrix-vector products'\nset ylabel 'relative residual norm'\n");
    gp.push_str(&format!("set title '{}'\n", bundle.name.replace('\'', "")));
    if curves.is_empty() {
        gp.push_str("# no curves\n");
    } else {
        let plots: Vec<String> = curves
            .iter()
            .map(|(f, t)| format!("'{f}' using 5:7 skip 1 with lines title '{}'", t.replace('\'', "")))
            .collect();
        gp.push_str("plot ");
        gp.push_str(&plots.join(", \\\n     "));
        gp.push('\n');
    }
    fs::write(&path, gp)?;
    written.push(path);
    Ok(written)
}
