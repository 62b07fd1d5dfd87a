//! Lanczos with deflated restarting, Lan-DR(m, k).
//!
//! Each cycle builds an `m`-dimensional space
//! `span{y_1, …, y_k, r, Ar, …, A^{m-k-1} r}` from the `k` Ritz vectors kept at
//! the previous restart and the current residual direction, with the relation
//! `A V_m = V_{m+1} T̄_m`. `T̄_m` is tridiagonal except for its leading
//! `(k+1) × (k+1)` block, which holds the Ritz values on the diagonal and the
//! couplings `t_{m+1,m} g_{m,i}` in row and column `k+1`.
//!
//! A cycle runs in four steps, each exposed as a function so tests and the
//! Minres variant can use them piecewise:
//!
//! 1. [`first_cycle`] / [`continue_cycle`] grow the basis to `m + 1` columns;
//! 2. [`compute_ritz`] extracts `k` Ritz pairs of `T_m`;
//! 3. [`galerkin_update`] solves `T_m d = V_mᴴ r_0` and updates the iterate;
//! 4. [`restart`] keeps `[V_m G, v_{m+1}]` and the diagonal-plus-arrow `T̄_k`.
//!
//! [`lan_dr`] drives the loop. Complex Hermitian operators use conjugate
//! transposes throughout while `T̄` stays real.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::counters::{self, Counts};
use crate::error::{Error, Result};
use crate::history::{ConvergenceHistory, EigRow, Status};
use crate::kernels::{axpy, dot, norm2, scal_real, Block};
use crate::operator::LinearOperator;
use crate::reorth::{
    policy_step, reorthogonalize, Directive, OmegaState, ReorthEvent, ReorthPolicy, Span,
    BREAKDOWN_TOL,
};
use crate::scalar::Scalar;
use crate::small::{self, sym_eigen, LsqTracker};

pub use crate::small::Target;

/// Relative threshold below which `T_m` is treated as singular.
const SINGULAR_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanDrConfig {
    /// Maximum subspace dimension.
    pub m: usize,
    /// Ritz vectors kept at each restart.
    pub k: usize,
    pub max_cycles: usize,
    /// Relative residual target `‖b − Ax‖ / ‖b‖`.
    pub lin_rtol: f64,
    /// Absolute residual target `‖A y − θ y‖` for unit Ritz vectors.
    pub eig_tol: f64,
    /// Leading pairs (in target order) that must meet `eig_tol`.
    pub n_eig_wanted: usize,
    pub target: Target,
    /// Largest-algebraic pairs kept in addition to the targeted ones (counted
    /// in `k`). Keeps fast-converging outliers in the reorthogonalized set.
    pub extra_largest: usize,
    pub policy: ReorthPolicy,
    /// Fully reorthogonalize the first cycle regardless of `policy`.
    pub full_first_cycle: bool,
    /// `false` runs the eigenvalue part only.
    pub solve_linear: bool,
    /// Ignore convergence and run exactly `max_cycles` cycles.
    pub run_all_cycles: bool,
    /// Record `‖V_mᴴ V_m − I‖` at every cycle end.
    pub track_orthodefect: bool,
    /// Compare PRO estimates with true inner products whenever PRO fires
    /// (expensive, for validation).
    pub audit_omega: bool,
}

impl Default for LanDrConfig {
    fn default() -> Self {
        LanDrConfig {
            m: 100,
            k: 40,
            max_cycles: 100,
            lin_rtol: 1e-8,
            eig_tol: 1e-8,
            n_eig_wanted: 0,
            target: Target::SmallestMagnitude,
            extra_largest: 0,
            policy: ReorthPolicy::KSelective,
            full_first_cycle: true,
            solve_linear: true,
            run_all_cycles: false,
            track_orthodefect: true,
            audit_omega: false,
        }
    }
}

impl LanDrConfig {
    pub fn new(m: usize, k: usize) -> Self {
        LanDrConfig {
            m,
            k,
            ..Default::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 || self.k >= self.m {
            return bad(format!("need 1 <= k < m, got k = {}, m = {}", self.k, self.m));
        }
        if self.m > n {
            return bad(format!("m = {} exceeds the problem dimension {n}", self.m));
        }
        if self.solve_linear && !(self.lin_rtol > 0.0 && self.lin_rtol < 1.0) {
            return bad(format!("lin_rtol must lie in (0, 1), got {}", self.lin_rtol));
        }
        if !(self.eig_tol > 0.0 && self.eig_tol < 1.0) {
            return bad(format!("eig_tol must lie in (0, 1), got {}", self.eig_tol));
        }
        if self.n_eig_wanted > self.k {
            return bad(format!(
                "n_eig_wanted = {} exceeds k = {}",
                self.n_eig_wanted, self.k
            ));
        }
        if self.extra_largest >= self.k {
            return bad("extra_largest must be smaller than k".into());
        }
        if self.max_cycles == 0 {
            return bad("max_cycles must be positive".into());
        }
        self.policy.validate()
    }
}

/// The basis `V_{m+1}` of the current cycle.
#[derive(Debug, Clone)]
pub struct KrylovBasis<S> {
    pub v: Block<S>,
    pub m: usize,
    /// Retained columns at the start of the cycle (0 in the first cycle).
    pub k: usize,
}

impl<S: Scalar> KrylovBasis<S> {
    pub fn n(&self) -> usize {
        self.v.n()
    }

    pub fn filled(&self) -> usize {
        self.v.ncols()
    }
}

/// `T̄`, stored as a full `(m+1) × m` array with both triangles of `T_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedMatrix {
    pub t: DMatrix<f64>,
    /// Size of the leading block carried over from the restart.
    pub k: usize,
    /// Columns filled so far.
    pub cols: usize,
}

impl ProjectedMatrix {
    pub fn new(m: usize) -> Self {
        ProjectedMatrix {
            t: DMatrix::zeros(m + 1, m),
            k: 0,
            cols: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.t.ncols()
    }

    /// The square `cols × cols` block `T_m`.
    pub fn tm(&self) -> DMatrix<f64> {
        self.t.view((0, 0), (self.cols, self.cols)).clone_owned()
    }

    /// The `(cols+1) × cols` block `T̄_m`.
    pub fn tbar(&self) -> DMatrix<f64> {
        self.t.view((0, 0), (self.cols + 1, self.cols)).clone_owned()
    }

    /// `t_{m+1,m}`, zero after a breakdown.
    pub fn beta_last(&self) -> f64 {
        if self.cols == 0 {
            0.0
        } else {
            self.t[(self.cols, self.cols - 1)]
        }
    }
}

/// `k` Ritz pairs of `T_m` in the order the restart keeps them.
#[derive(Debug, Clone, PartialEq)]
pub struct RitzSet {
    pub values: Vec<f64>,
    /// Coefficient vectors `g_i` as columns (`cols × k`, orthonormal).
    pub vectors: DMatrix<f64>,
    /// Shortcut residual norms `|t_{m+1,m} g_{m,i}|`.
    pub residuals: Vec<f64>,
    /// Signed couplings `t_{m+1,m} g_{m,i}`, the new row `k+1` of `T̄_k`.
    pub couplings: Vec<f64>,
    /// Every eigenvalue of `T_m`.
    pub spectrum: Vec<f64>,
}

impl RitzSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Leading `count` pairs all have residual at most `tol`.
    pub fn converged(&self, count: usize, tol: f64) -> bool {
        count <= self.len() && self.residuals[..count].iter().all(|&r| r <= tol)
    }

    /// `y_i = V_m g_i`.
    pub fn vector<S: Scalar>(&self, basis: &KrylovBasis<S>, i: usize) -> Vec<S> {
        basis.v.combine_vec(self.vectors.column(i).as_slice())
    }
}

/// `(V_{k+1}, T̄_k)` with `A V_k = V_{k+1} T̄_k`: the eigen-information handed
/// to deflated solves for later right-hand sides.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflationSpace<S> {
    pub v: Block<S>,
    /// `(k+1) × k`. Diagonal top block from Lan-DR, dense from Minres-DR.
    pub t: DMatrix<f64>,
}

impl<S: Scalar> DeflationSpace<S> {
    pub fn empty(n: usize) -> Self {
        DeflationSpace {
            v: Block::from_columns(n, vec![vec![S::zero(); n]]),
            t: DMatrix::zeros(1, 0),
        }
    }

    pub fn k(&self) -> usize {
        self.t.ncols()
    }

    pub fn n(&self) -> usize {
        self.v.n()
    }

    pub fn is_empty(&self) -> bool {
        self.k() == 0
    }

    /// Top `k × k` block `T_k`.
    pub fn tk(&self) -> DMatrix<f64> {
        let k = self.k();
        self.t.view((0, 0), (k, k)).clone_owned()
    }

    /// Extract from a freshly restarted basis.
    pub fn from_restart(basis: &KrylovBasis<S>, proj: &ProjectedMatrix) -> Self {
        let k = proj.k;
        DeflationSpace {
            v: Block::from_columns(basis.n(), basis.v.columns()[..=k].to_vec()),
            t: proj.t.view((0, 0), (k + 1, k)).clone_owned(),
        }
    }
}

/// Per-cycle state shared by the basis-building steps.
#[derive(Debug, Clone)]
pub struct CycleCtx {
    pub cycle: usize,
    /// Running estimate of `‖A‖`.
    pub anorm: f64,
    pub omega: OmegaState,
    pub log: Vec<ReorthEvent>,
    /// Worst ratio of true inner product to PRO estimate at each PRO trigger.
    pub audit: Option<Vec<f64>>,
}

impl CycleCtx {
    pub fn new(n: usize, m: usize) -> Self {
        CycleCtx {
            cycle: 1,
            anorm: 0.0,
            omega: OmegaState::new(n, m + 1),
            log: Vec::new(),
            audit: None,
        }
    }
}

/// How the basis-building loop reorthogonalizes.
#[derive(Debug, Clone, Copy)]
pub(crate) enum ReorthMode {
    FullFirst,
    Policy(ReorthPolicy),
}

fn stronger(a: Option<(Span, bool)>, b: Option<(Span, bool)>) -> Option<(Span, bool)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some((sa, pa)), Some((sb, pb))) => {
            let span = if sa == Span::All || sb == Span::All {
                Span::All
            } else {
                Span::FirstK
            };
            Some((span, pa || pb))
        }
    }
}

/// Lanczos steps from column `proj.cols` until `T̄` has `m` columns. Column
/// `j` of `T̄` is completed by `w = A v_j − Σ_{l<j} t_{l,j} v_l`, which is the
/// arrow step for `j = k` and the three-term recurrence otherwise. Returns
/// `true` on breakdown, in which case the cycle is truncated and `T̄` has a
/// zero last row.
pub(crate) fn extend<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    basis: &mut KrylovBasis<S>,
    proj: &mut ProjectedMatrix,
    mode: ReorthMode,
    ctx: &mut CycleCtx,
    on_step: &mut dyn FnMut(&ProjectedMatrix),
) -> bool {
    let m = proj.m();
    let k0 = proj.k;
    let start = proj.cols;
    let policy = match mode {
        ReorthMode::FullFirst => None,
        ReorthMode::Policy(p) => Some(p),
    };
    let track_omega = ctx.audit.is_some() || matches!(policy, Some(p) if p.eta().is_some());
    if track_omega {
        ctx.omega.reset_all(start);
    }
    let mut pending: Option<Span> = None;

    for j in start..m {
        let mut w = op.apply(basis.v.col(j));
        for l in 0..j {
            let t = proj.t[(l, j)];
            if t != 0.0 {
                axpy(S::from_real(-t), basis.v.col(l), &mut w);
            }
        }
        let alpha = dot(basis.v.col(j), &w).re();
        axpy(S::from_real(-alpha), basis.v.col(j), &mut w);
        proj.t[(j, j)] = alpha;
        let mut beta = norm2(&w);

        if track_omega {
            proj.t[(j + 1, j)] = beta;
            ctx.omega.update(&proj.t, j);
        }

        let (todo, pro_fired) = match policy {
            None => (Some((Span::All, false)), false),
            Some(p) => {
                let step = j + 1 - k0;
                let d = match policy_step(&p, step, &ctx.omega, k0) {
                    Directive::None => None,
                    Directive::Current(s) => Some((s, false)),
                    Directive::Pair(s) => Some((s, true)),
                };
                let fired = d.is_some() && p.eta().is_some();
                let mut todo = d;
                if step == 1 && k0 > 0 {
                    todo = stronger(todo, Some((p.span(), false)));
                }
                if let Some(s) = pending.take() {
                    todo = stronger(todo, Some((s, false)));
                }
                (todo, fired)
            }
        };

        if let Some((span, pair)) = todo {
            let range = match span {
                Span::All => 0..j + 1,
                Span::FirstK => 0..k0,
            };
            if !range.is_empty() {
                if pro_fired && beta > 0.0 {
                    if let Some(audit) = ctx.audit.as_mut() {
                        let mut worst = 0.0f64;
                        for i in range.clone() {
                            let truth = dot(basis.v.col(i), &w).modulus() / beta;
                            let est = ctx.omega.get(j + 1, i).abs();
                            worst = worst.max(truth / est);
                        }
                        audit.push(worst);
                    }
                }
                beta = reorthogonalize(&mut w, &basis.v.columns()[range.clone()]).unwrap_or(0.0);
                if track_omega {
                    ctx.omega.reset_row(j + 1, range.clone());
                }
                ctx.log.push(ReorthEvent {
                    cycle: ctx.cycle,
                    column: j + 1,
                    span,
                    against: range.len(),
                    forced: policy.is_none() || !pro_fired && !pair && (j + 1 - k0 == 1),
                });
            }
            if pair {
                pending = Some(span);
            }
        }

        proj.t[(j + 1, j)] = beta;
        let colsum: f64 = (0..=j + 1).map(|l| proj.t[(l, j)].abs()).sum::<f64>() + beta;
        ctx.anorm = ctx.anorm.max(colsum);
        if beta <= BREAKDOWN_TOL * ctx.anorm {
            proj.t[(j + 1, j)] = 0.0;
            proj.cols = j + 1;
            on_step(proj);
            return true;
        }
        if j + 1 < m {
            proj.t[(j, j + 1)] = beta;
        }
        scal_real(1.0 / beta, &mut w);
        basis.v.push(w);
        proj.cols = j + 1;
        on_step(proj);
    }
    false
}

/// First cycle: `m` steps of symmetric Lanczos from `r0 / ‖r0‖` with full
/// reorthogonalization. Returns `(basis, T̄, breakdown)`.
pub fn first_cycle<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    r0: &[S],
    m: usize,
    ctx: &mut CycleCtx,
) -> Result<(KrylovBasis<S>, ProjectedMatrix, bool)> {
    first_cycle_with(op, r0, m, ReorthMode::FullFirst, ctx, &mut |_| {})
}

pub(crate) fn first_cycle_with<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    r0: &[S],
    m: usize,
    mode: ReorthMode,
    ctx: &mut CycleCtx,
    on_step: &mut dyn FnMut(&ProjectedMatrix),
) -> Result<(KrylovBasis<S>, ProjectedMatrix, bool)> {
    let n = op.dim();
    if r0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: r0.len(),
        });
    }
    let beta0 = norm2(r0);
    if beta0 == 0.0 {
        return Err(Error::InvalidConfig("starting vector is zero".into()));
    }
    let mut v1 = r0.to_vec();
    scal_real(1.0 / beta0, &mut v1);
    let mut basis = KrylovBasis {
        v: Block::from_columns(n, vec![v1]),
        m,
        k: 0,
    };
    let mut proj = ProjectedMatrix::new(m);
    let broke = extend(op, &mut basis, &mut proj, mode, ctx, on_step);
    Ok((basis, proj, broke))
}

/// Grow a restarted basis (`k + 1` columns) back to `m + 1` columns.
/// Returns `true` on breakdown.
pub fn continue_cycle<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    basis: &mut KrylovBasis<S>,
    proj: &mut ProjectedMatrix,
    policy: ReorthPolicy,
    ctx: &mut CycleCtx,
) -> bool {
    extend(op, basis, proj, ReorthMode::Policy(policy), ctx, &mut |_| {})
}

/// The `k` eigenpairs of `T_m` selected by `target` (plus `extra_largest`
/// largest-algebraic ones), with shortcut residual norms.
pub fn compute_ritz(proj: &ProjectedMatrix, k: usize, target: Target, extra_largest: usize) -> Result<RitzSet> {
    let cols = proj.cols;
    let (vals, vecs) = sym_eigen(&proj.tm())?;
    let idx = small::select(vals.as_slice(), k, target, extra_largest);
    let beta = proj.beta_last();
    let mut g = DMatrix::zeros(cols, idx.len());
    let mut values = Vec::with_capacity(idx.len());
    let mut residuals = Vec::with_capacity(idx.len());
    let mut couplings = Vec::with_capacity(idx.len());
    for (c, &i) in idx.iter().enumerate() {
        g.set_column(c, &vecs.column(i));
        values.push(vals[i]);
        let coupling = beta * vecs[(cols - 1, i)];
        couplings.push(coupling);
        residuals.push(coupling.abs());
    }
    Ok(RitzSet {
        values,
        vectors: g,
        residuals,
        couplings,
        spectrum: vals.iter().copied().collect(),
    })
}

/// Result of the Galerkin step.
#[derive(Debug, Clone)]
pub struct GalerkinStep<S> {
    pub r: Vec<S>,
    pub resid_norm: f64,
    /// `T_m` was numerically singular; the iterate was left unchanged.
    pub stagnated: bool,
}

fn split_parts<S: Scalar>(c: &[S]) -> (DVector<f64>, Option<DVector<f64>>) {
    let re = DVector::from_iterator(c.len(), c.iter().map(|x| x.re()));
    if S::IS_COMPLEX && c.iter().any(|x| x.imaginary() != 0.0) {
        (re, Some(DVector::from_iterator(c.len(), c.iter().map(|x| x.imaginary()))))
    } else {
        (re, None)
    }
}

fn join_parts<S: Scalar>(re: &DVector<f64>, im: Option<&DVector<f64>>) -> Vec<S> {
    match im {
        None => re.iter().map(|&x| S::from_real(x)).collect(),
        Some(im) => re.iter().zip(im.iter()).map(|(&a, &b)| S::from_parts(a, b)).collect(),
    }
}

/// `V_mᴴ r0` restricted to the positions where it can be nonzero: the first
/// entry in the first cycle, the leading `k + 1` entries afterwards (only
/// entry `k + 1` in exact arithmetic). `full` computes every entry.
pub fn projected_rhs<S: Scalar>(basis: &KrylovBasis<S>, proj: &ProjectedMatrix, r0: &[S], full: bool) -> Vec<S> {
    let upto = if full {
        proj.cols
    } else {
        proj.k + 1
    };
    basis.v.adjoint_times(0..upto.min(basis.filled()), r0)
}

/// Step 4 of the cycle: solve `T_m d = c`, update `x += V_m d` and return
/// `r = r0 − V_{m+1} T̄_m d` (no matvec). `c` holds the leading entries of
/// `V_mᴴ r0`, the rest being zero.
pub fn galerkin_update<S: Scalar>(
    basis: &KrylovBasis<S>,
    proj: &ProjectedMatrix,
    x: &mut [S],
    r0: &[S],
    c: &[S],
) -> Result<GalerkinStep<S>> {
    let cols = proj.cols;
    if c.iter().all(|v| *v == S::zero()) {
        return Ok(GalerkinStep {
            r: r0.to_vec(),
            resid_norm: norm2(r0),
            stagnated: false,
        });
    }
    let (vals, vecs) = sym_eigen(&proj.tm())?;
    let lmax = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let lmin = vals.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if !(lmin > SINGULAR_TOL * lmax) {
        warn!("projected matrix is numerically singular (|θ|min = {lmin:e}); keeping the iterate");
        return Ok(GalerkinStep {
            r: r0.to_vec(),
            resid_norm: norm2(r0),
            stagnated: true,
        });
    }
    let mut full_c = c.to_vec();
    full_c.resize(cols, S::zero());
    let (cre, cim) = split_parts(&full_c);
    let solve = |rhs: &DVector<f64>| -> DVector<f64> {
        let mut z = vecs.transpose() * rhs;
        for (zi, l) in z.iter_mut().zip(vals.iter()) {
            *zi /= *l;
        }
        &vecs * z
    };
    let dre = solve(&cre);
    let dim = cim.as_ref().map(solve);
    let tbar = proj.tbar();
    let ure = &tbar * &dre;
    let uim = dim.as_ref().map(|d| &tbar * d);
    let d: Vec<S> = join_parts(&dre, dim.as_ref());
    let u: Vec<S> = join_parts(&ure, uim.as_ref());

    basis.v.add_combination(&d, x, 1.0);
    let mut r = r0.to_vec();
    let live = basis.filled().min(cols + 1);
    basis.v.add_combination(&u[..live], &mut r, -1.0);
    let resid_norm = norm2(&r);
    Ok(GalerkinStep {
        r,
        resid_norm,
        stagnated: false,
    })
}

/// Tracker for per-iteration residual estimates of the cycle about to be
/// extended: `c` padded to `m + 1` rows, with the columns already in `T̄`.
pub(crate) fn residual_tracker<S: Scalar>(proj: Option<&ProjectedMatrix>, m: usize, c: &[S]) -> LsqTracker {
    let mut full_c = c.to_vec();
    full_c.resize(m + 1, S::zero());
    let (re, im) = split_parts(&full_c);
    let mut parts = vec![re];
    parts.extend(im);
    let mut tracker = LsqTracker::new(parts);
    if let Some(p) = proj {
        for j in 0..p.cols {
            tracker.push(&p.t.column(j).clone_owned());
        }
    }
    tracker
}

/// Step 5: keep `y_i = V_m g_i`, move `v_{m+1}` to position `k + 1`
/// (reorthogonalized against the `y_i`), and set `T̄_k` to the Ritz values
/// plus the coupling row. Fails if the previous cycle broke down.
pub fn restart<S: Scalar>(
    basis: &KrylovBasis<S>,
    proj: &ProjectedMatrix,
    ritz: &RitzSet,
    ctx: &mut CycleCtx,
) -> Result<(KrylovBasis<S>, ProjectedMatrix)> {
    let m = proj.m();
    let cols = proj.cols;
    if basis.filled() <= cols {
        return Err(Error::InvalidConfig(
            "cannot restart after a breakdown: v_{m+1} is missing".into(),
        ));
    }
    let k = ritz.len();
    let mut new_cols = basis.v.combine(&ritz.vectors);
    let mut vk1 = basis.v.col(cols).to_vec();
    let nrm = reorthogonalize(&mut vk1, &new_cols).map_err(|_| {
        Error::InvalidConfig("v_{m+1} lies in the span of the retained Ritz vectors".into())
    })?;
    scal_real(1.0 / nrm, &mut vk1);
    ctx.log.push(ReorthEvent {
        cycle: ctx.cycle + 1,
        column: k,
        span: Span::FirstK,
        against: k,
        forced: true,
    });
    new_cols.push(vk1);

    let mut t = DMatrix::zeros(m + 1, m);
    for i in 0..k {
        t[(i, i)] = ritz.values[i];
        t[(k, i)] = ritz.couplings[i];
        t[(i, k)] = ritz.couplings[i];
    }
    Ok((
        KrylovBasis {
            v: Block::from_columns(basis.n(), new_cols),
            m,
            k,
        },
        ProjectedMatrix { t, k, cols: k },
    ))
}

/// Everything a Lan-DR run produces.
#[derive(Debug, Clone)]
pub struct LanDrOutput<S> {
    pub x: Vec<S>,
    /// Residual as carried by the recurrence (`b − Ax` up to roundoff).
    pub r: Vec<S>,
    pub status: Status,
    pub cycles: usize,
    pub ritz: RitzSet,
    pub deflation: DeflationSpace<S>,
    pub history: ConvergenceHistory,
    pub reorth_log: Vec<ReorthEvent>,
    pub omega_audit: Vec<f64>,
    pub anorm: f64,
    pub linear_converged: bool,
    pub eigen_converged: bool,
}

impl<S: Scalar> LanDrOutput<S> {
    /// Ritz vectors `y_1 … y_k` (the first `k` columns of the deflation space).
    pub fn ritz_vectors(&self) -> &[Vec<S>] {
        &self.deflation.v.columns()[..self.deflation.k()]
    }

    /// Vectors reorthogonalized by the policy or at restarts, first cycle
    /// excluded.
    pub fn reorthogonalized_vectors(&self) -> usize {
        self.reorth_log.iter().filter(|e| e.cycle > 1).count()
    }
}

/// Cycle-by-cycle Lan-DR driver.
pub struct LanDr<'a, S: Scalar, A: LinearOperator<S> + ?Sized> {
    op: &'a A,
    cfg: LanDrConfig,
    bnorm: f64,
    x: Vec<S>,
    r: Vec<S>,
    basis: Option<KrylovBasis<S>>,
    proj: ProjectedMatrix,
    ctx: CycleCtx,
    ritz: Option<RitzSet>,
    history: ConvergenceHistory,
    start: Counts,
    lin_done: bool,
    eig_done: bool,
    stagnated: bool,
    need_full_rhs: bool,
    breakdown: bool,
    steps: usize,
}

impl<'a, S: Scalar, A: LinearOperator<S> + ?Sized> LanDr<'a, S, A> {
    pub fn new(op: &'a A, b: &[S], x0: Option<&[S]>, cfg: LanDrConfig) -> Result<Self> {
        let n = op.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        cfg.validate(n)?;
        let start = counters::snapshot();
        let (x, r) = match x0 {
            Some(x0) => {
                if x0.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: x0.len(),
                    });
                }
                let ax = op.apply(x0);
                (x0.to_vec(), crate::kernels::sub(b, &ax))
            }
            None => (vec![S::zero(); n], b.to_vec()),
        };
        let bnorm = norm2(b);
        let mut ctx = CycleCtx::new(n, cfg.m);
        if cfg.audit_omega {
            ctx.audit = Some(Vec::new());
        }
        let mut history = ConvergenceHistory::default();
        let r0n = norm2(&r);
        let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
        history.push(0, 0, counters::since(start), r0n / scale, None);
        Ok(LanDr {
            op,
            lin_done: !cfg.solve_linear || r0n <= cfg.lin_rtol * scale,
            cfg,
            bnorm: scale,
            x,
            r,
            basis: None,
            proj: ProjectedMatrix::new(0),
            ctx,
            ritz: None,
            history,
            start,
            eig_done: false,
            stagnated: false,
            need_full_rhs: false,
            breakdown: false,
            steps: 0,
        })
    }

    pub fn cycle(&self) -> usize {
        if self.basis.is_none() {
            0
        } else {
            self.ctx.cycle
        }
    }

    pub fn basis(&self) -> Option<&KrylovBasis<S>> {
        self.basis.as_ref()
    }

    pub fn projected(&self) -> &ProjectedMatrix {
        &self.proj
    }

    pub fn ritz(&self) -> Option<&RitzSet> {
        self.ritz.as_ref()
    }

    pub fn x(&self) -> &[S] {
        &self.x
    }

    pub fn residual(&self) -> &[S] {
        &self.r
    }

    pub fn anorm(&self) -> f64 {
        self.ctx.anorm
    }

    pub fn done(&self) -> bool {
        if self.breakdown {
            return true;
        }
        if self.basis.is_some() && self.ctx.cycle >= self.cfg.max_cycles {
            return true;
        }
        !self.cfg.run_all_cycles && self.lin_done && self.eig_done
    }

    /// Build the basis for the next cycle, extract Ritz pairs and apply the
    /// Galerkin update. The basis is left unrestarted so it can be inspected;
    /// [`restart_basis`](Self::restart_basis) moves to the next cycle.
    pub fn run_cycle(&mut self) -> Result<()> {
        let first = self.basis.is_none();
        let start = self.start;
        let bnorm = self.bnorm;
        let linear_active = !self.lin_done;
        let c_rhs: Vec<S> = if first {
            vec![S::from_real(norm2(&self.r))]
        } else if linear_active {
            let basis = self.basis.as_ref().unwrap();
            projected_rhs(basis, &self.proj, &self.r, false)
        } else {
            Vec::new()
        };
        let track_inner = linear_active && !self.need_full_rhs;
        let cycle = self.ctx.cycle;
        let mut steps = self.steps;
        let history = &mut self.history;
        let mut tracker = track_inner
            .then(|| residual_tracker(self.basis.as_ref().map(|_| &self.proj), self.cfg.m, &c_rhs));
        let mut on_step = |p: &ProjectedMatrix| {
            steps += 1;
            if let Some(tr) = tracker.as_mut() {
                let (_, est) = tr.push(&p.t.column(p.cols - 1).clone_owned());
                if est.is_finite() {
                    history.push(cycle, steps, counters::since(start), est / bnorm, None);
                }
            }
        };

        let broke = if first {
            let mode = if self.cfg.full_first_cycle {
                ReorthMode::FullFirst
            } else {
                ReorthMode::Policy(self.cfg.policy)
            };
            let (basis, proj, broke) =
                first_cycle_with(self.op, &self.r, self.cfg.m, mode, &mut self.ctx, &mut on_step)?;
            self.basis = Some(basis);
            self.proj = proj;
            broke
        } else {
            let basis = self.basis.as_mut().unwrap();
            extend(
                self.op,
                basis,
                &mut self.proj,
                ReorthMode::Policy(self.cfg.policy),
                &mut self.ctx,
                &mut on_step,
            )
        };
        self.steps = steps;
        self.breakdown = broke;
        let basis = self.basis.as_ref().unwrap();

        let ritz = compute_ritz(&self.proj, self.cfg.k, self.cfg.target, self.cfg.extra_largest)?;
        let spec_max = ritz.spectrum.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.ctx.anorm = self.ctx.anorm.max(spec_max);

        if linear_active {
            let c = if self.need_full_rhs {
                projected_rhs(basis, &self.proj, &self.r, true)
            } else {
                c_rhs
            };
            let step = galerkin_update(basis, &self.proj, &mut self.x, &self.r, &c)?;
            if step.stagnated {
                self.stagnated = true;
                self.need_full_rhs = true;
            } else {
                self.need_full_rhs = false;
                self.r = step.r;
                if step.resid_norm <= self.cfg.lin_rtol * self.bnorm {
                    self.lin_done = true;
                }
            }
        }

        let od = self.cfg.track_orthodefect.then(|| basis.v.orthodefect_leading(self.proj.cols));
        let used = counters::since(self.start);
        let rel = norm2_uncounted(&self.r) / self.bnorm;
        self.history.push_cycle_end(cycle, self.steps, used, rel, od);
        for (i, (&val, &res)) in ritz.values.iter().zip(&ritz.residuals).enumerate() {
            self.history.eig.push(EigRow {
                cycle,
                matvecs: used.matvecs,
                index: i,
                value: val,
                residual: res,
            });
        }
        self.eig_done = ritz.converged(self.cfg.n_eig_wanted, self.cfg.eig_tol);
        self.ritz = Some(ritz);
        Ok(())
    }

    /// Restart the current basis from the Ritz pairs of the last cycle.
    pub fn restart_basis(&mut self) -> Result<()> {
        let basis = self
            .basis
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("no cycle has run yet".into()))?;
        let ritz = self.ritz.as_ref().unwrap();
        let (nb, np) = restart(basis, &self.proj, ritz, &mut self.ctx)?;
        self.basis = Some(nb);
        self.proj = np;
        self.ctx.cycle += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<LanDrOutput<S>> {
        let n = self.op.dim();
        let ritz = self.ritz.clone().unwrap_or(RitzSet {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
            residuals: vec![],
            couplings: vec![],
            spectrum: vec![],
        });
        let deflation = match self.basis.as_ref() {
            None => DeflationSpace::empty(n),
            Some(basis) if self.breakdown => {
                let mut cols = basis.v.combine(&ritz.vectors);
                cols.push(vec![S::zero(); n]);
                let k = ritz.len();
                let mut t = DMatrix::zeros(k + 1, k);
                for i in 0..k {
                    t[(i, i)] = ritz.values[i];
                }
                DeflationSpace {
                    v: Block::from_columns(n, cols),
                    t,
                }
            }
            Some(basis) => {
                let (nb, np) = restart(basis, &self.proj, &ritz, &mut self.ctx)?;
                DeflationSpace::from_restart(&nb, &np)
            }
        };
        let status = if self.lin_done && self.eig_done {
            Status::Converged
        } else if self.breakdown {
            Status::InvariantSubspace
        } else if self.stagnated && !self.lin_done {
            Status::Stagnated
        } else {
            Status::MaxIterations
        };
        self.history.totals = counters::since(self.start);
        Ok(LanDrOutput {
            x: self.x,
            r: self.r,
            status,
            cycles: if self.basis.is_some() { self.ctx.cycle } else { 0 },
            ritz,
            deflation,
            history: self.history,
            reorth_log: self.ctx.log,
            omega_audit: self.ctx.audit.unwrap_or_default(),
            anorm: self.ctx.anorm,
            linear_converged: self.lin_done,
            eigen_converged: self.eig_done,
        })
    }
}

fn norm2_uncounted<S: Scalar>(v: &[S]) -> f64 {
    crate::kernels::dot_raw(v, v).re().max(0.0).sqrt()
}

/// Solve `Ax = b` with Lan-DR(m, k) while computing `k` Ritz pairs.
///
/// Runs until the relative residual reaches `lin_rtol` and the leading
/// `n_eig_wanted` Ritz pairs reach `eig_tol`, or for `max_cycles` cycles.
/// Always returns the deflation space of the final cycle.
pub fn lan_dr<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    x0: Option<&[S]>,
    cfg: &LanDrConfig,
) -> Result<LanDrOutput<S>> {
    let mut solver = LanDr::new(op, b, x0, cfg.clone())?;
    if norm2_uncounted(solver.residual()) == 0.0 {
        solver.lin_done = true;
        solver.eig_done = cfg.n_eig_wanted == 0;
        return solver.finish();
    }
    loop {
        solver.run_cycle()?;
        if solver.done() {
            break;
        }
        solver.restart_basis()?;
    }
    solver.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::recipes;
    use crate::operator::Diagonal;
    use crate::rng;

    fn unit(n: usize, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    }

    #[test]
    fn eigenvector_start_breaks_down_immediately() {
        let a = Diagonal::new(vec![1.0, 2.0, 3.0]);
        let mut ctx = CycleCtx::new(3, 3);
        let (basis, proj, broke) = first_cycle(&a, &unit(3, 0), 3, &mut ctx).unwrap();
        assert!(broke);
        assert_eq!(proj.cols, 1);
        assert_eq!(proj.t[(0, 0)], 1.0);
        assert_eq!(proj.beta_last(), 0.0);
        assert_eq!(basis.filled(), 1);
    }

    #[test]
    fn one_step_is_rayleigh_quotient() {
        let a = Diagonal::new(vec![1.0, 3.0]);
        let r0 = vec![1.0, 1.0];
        let mut ctx = CycleCtx::new(2, 1);
        let (basis, proj, broke) = first_cycle(&a, &r0, 1, &mut ctx).unwrap();
        assert!(!broke);
        assert!((proj.t[(0, 0)] - 2.0).abs() < 1e-15);
        // A v1 - 2 v1 = (-1, 1)/√2, norm 1
        assert!((proj.t[(1, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(basis.filled(), 2);
    }

    #[test]
    fn zero_residual_leaves_iterate() {
        let a = Diagonal::new(vec![1.0, 3.0]);
        let mut ctx = CycleCtx::new(2, 1);
        let (basis, proj, _) = first_cycle(&a, &[1.0, 1.0], 1, &mut ctx).unwrap();
        let mut x = vec![5.0, 6.0];
        let step = galerkin_update(&basis, &proj, &mut x, &[0.0, 0.0], &[0.0]).unwrap();
        assert_eq!(x, vec![5.0, 6.0]);
        assert_eq!(step.r, vec![0.0, 0.0]);
    }

    #[test]
    fn single_step_exact_solve() {
        let a = Diagonal::new(vec![2.0]);
        let b = vec![1.0];
        let mut ctx = CycleCtx::new(1, 1);
        let (basis, proj, broke) = first_cycle(&a, &b, 1, &mut ctx).unwrap();
        assert!(broke);
        let mut x = vec![0.0];
        let c = projected_rhs(&basis, &proj, &b, false);
        let step = galerkin_update(&basis, &proj, &mut x, &b, &c).unwrap();
        assert_eq!(x, vec![0.5]);
        assert_eq!(step.resid_norm, 0.0);
    }

    #[test]
    fn ritz_of_diagonal_projection() {
        let mut proj = ProjectedMatrix::new(3);
        proj.cols = 3;
        proj.t[(0, 0)] = 3.0;
        proj.t[(1, 1)] = 1.0;
        proj.t[(2, 2)] = 2.0;
        let ritz = compute_ritz(&proj, 2, Target::SmallestAlgebraic, 0).unwrap();
        assert_eq!(ritz.values, vec![1.0, 2.0]);
        assert_eq!(ritz.vectors.column(0).iter().map(|x| x.abs()).collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
        assert_eq!(ritz.residuals, vec![0.0, 0.0]);
    }

    #[test]
    fn ritz_two_by_two() {
        let mut proj = ProjectedMatrix::new(2);
        proj.cols = 2;
        proj.t[(0, 0)] = 2.0;
        proj.t[(1, 1)] = 2.0;
        proj.t[(0, 1)] = 1.0;
        proj.t[(1, 0)] = 1.0;
        proj.t[(2, 1)] = 0.5;
        let ritz = compute_ritz(&proj, 2, Target::SmallestAlgebraic, 0).unwrap();
        assert!((ritz.values[0] - 1.0).abs() < 1e-14 && (ritz.values[1] - 3.0).abs() < 1e-14);
        let g = ritz.vectors.column(0);
        assert!((g[0] + g[1]).abs() < 1e-14);
        assert!((ritz.residuals[0] - 0.5 * 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn converged_pair_decouples_after_restart() {
        // b has no component along e_1..e_3 except through the eigenvector e_1
        let a = Diagonal::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        let mut ctx = CycleCtx::new(6, 4);
        let (basis, proj, broke) = first_cycle(&a, &b, 4, &mut ctx).unwrap();
        assert!(broke, "invariant subspace of dimension 3");
        let ritz = compute_ritz(&proj, 1, Target::SmallestAlgebraic, 0).unwrap();
        assert!((ritz.values[0] - 1.0).abs() < 1e-12);
        assert!(ritz.couplings[0].abs() < 1e-12);
        let _ = basis;
    }

    #[test]
    fn restart_structure() {
        let a = recipes::example3(400);
        let b: Vec<f64> = rng::normal_vector(400, &mut rng::stream(5, 0));
        let mut ctx = CycleCtx::new(400, 30);
        let (basis, proj, _) = first_cycle(&a, &b, 30, &mut ctx).unwrap();
        let ritz = compute_ritz(&proj, 8, Target::SmallestMagnitude, 0).unwrap();
        let (nb, np) = restart(&basis, &proj, &ritz, &mut ctx).unwrap();
        assert_eq!(nb.filled(), 9);
        assert!(nb.v.orthodefect() <= 1e-12);
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert_eq!(np.t[(i, j)], 0.0);
                }
            }
            assert_eq!(np.t[(8, i)], np.t[(i, 8)]);
            // ‖A y_i − θ_i y_i‖ equals the stored coupling
            let y = nb.v.col(i);
            let mut res = LinearOperator::<f64>::apply(&a, y);
            axpy(-np.t[(i, i)], y, &mut res);
            assert!((norm2(&res) - np.t[(8, i)].abs()).abs() <= 1e-10 * a.norm());
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let a = Diagonal::new(vec![1.0; 50]);
        let b = vec![1.0; 50];
        assert!(lan_dr(&a, &b, None, &LanDrConfig::new(10, 10)).is_err());
        assert!(lan_dr(&a, &b, None, &LanDrConfig::new(100, 10)).is_err());
        assert!(lan_dr(&a, &b[..3], None, &LanDrConfig::new(10, 3)).is_err());
        let cfg = LanDrConfig {
            n_eig_wanted: 5,
            ..LanDrConfig::new(10, 3)
        };
        assert!(lan_dr(&a, &b, None, &cfg).is_err());
    }

    #[test]
    fn eigenvector_rhs_converges_in_one_step() {
        let a = Diagonal::new((1..=20).map(f64::from).collect());
        let mut b = vec![0.0; 20];
        b[4] = 2.0;
        let cfg = LanDrConfig {
            n_eig_wanted: 1,
            ..LanDrConfig::new(6, 2)
        };
        let out = lan_dr(&a, &b, None, &cfg).unwrap();
        assert_eq!(out.history.totals.matvecs, 1);
        assert!((out.x[4] - 0.4).abs() < 1e-15);
        assert!((out.ritz.values[0] - 5.0).abs() < 1e-14);
        assert_eq!(out.ritz.residuals[0], 0.0);
        assert_eq!(out.status, Status::Converged);
    }

    #[test]
    fn zero_rhs_returns_immediately() {
        let a = Diagonal::new(vec![1.0; 10]);
        let out = lan_dr(&a, &[0.0; 10], None, &LanDrConfig::new(4, 2)).unwrap();
        assert_eq!(out.x, vec![0.0; 10]);
        assert_eq!(out.history.totals.matvecs, 0);
        assert!(out.deflation.is_empty());
    }

    #[test]
    fn complex_hermitian_small_solve() {
        use num_complex::Complex64;
        let d = recipes::example3(300);
        let b: Vec<Complex64> = rng::normal_vector(300, &mut rng::stream(8, 0));
        let cfg = LanDrConfig {
            lin_rtol: 1e-10,
            n_eig_wanted: 5,
            eig_tol: 1e-8,
            ..LanDrConfig::new(40, 10)
        };
        let out = lan_dr(&d, &b, None, &cfg).unwrap();
        assert!(out.status.is_converged(), "{:?}", out.status);
        let ax = LinearOperator::<Complex64>::apply(&d, &out.x);
        let r = crate::kernels::sub(&b, &ax);
        assert!(norm2(&r) <= 1.01e-10 * norm2(&b));
        for (i, v) in out.ritz.values.iter().take(5).enumerate() {
            assert!((v - (i + 1) as f64).abs() < 1e-8);
        }
    }
}
