//! Minimum-residual solvers for Hermitian indefinite problems.
//!
//! [`minres`] is the Paige–Saunders method (Lanczos plus a Givens QR of the
//! tridiagonal). [`minres_dr`] restarts it with deflation: each cycle solves
//! `min ‖c − T̄_m d‖` and keeps `k` harmonic Ritz vectors, which approximate
//! interior eigenvalues better than ordinary Ritz vectors. [`d_minres`]
//! projects over a [`DeflationSpace`] and then runs Minres.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::counters::{self, Counts};
use crate::dcg::{deflation_project, initial_residual};
use crate::error::{Error, Result};
use crate::history::{ConvergenceHistory, EigRow, SolveOutput, Status};
use crate::kernels::{axpy, dot, norm2, scal_real, sub, Block};
use crate::landr::{
    extend, first_cycle_with, projected_rhs, residual_tracker, CycleCtx, DeflationSpace, KrylovBasis,
    LanDrConfig, ProjectedMatrix, ReorthMode,
};
use crate::operator::LinearOperator;
use crate::reorth::{reorthogonalize, ReorthEvent, Span};
use crate::scalar::Scalar;
use crate::small::{self, left_null_vector, lstsq, orthonormalize_columns, sym_eigen, Target};

/// Minres-DR takes the same settings as Lan-DR; `extra_largest` and
/// `target` refer to harmonic Ritz values.
pub type MinresDrConfig = LanDrConfig;

/// `k` harmonic Ritz pairs of `T̄_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicRitzSet {
    /// Harmonic Ritz values θ (infinite when `T_m g = 0`).
    pub values: Vec<f64>,
    /// Unit coefficient vectors `g_i` as columns (`cols × k`).
    pub vectors: DMatrix<f64>,
    /// `‖T̄ g_i − θ_i [g_i; 0]‖`, equal to `‖A y_i − θ_i y_i‖` for `y_i = V_m g_i`.
    pub residuals: Vec<f64>,
}

impl HarmonicRitzSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn converged(&self, count: usize, tol: f64) -> bool {
        count <= self.len() && self.residuals[..count].iter().all(|&r| r <= tol)
    }
}

/// Harmonic Ritz pairs from `T̄ᵀT̄ g = θ T g`.
///
/// With `T̄ᵀT̄ = L Lᵀ` the pencil becomes the symmetric problem
/// `L⁻¹ T L⁻ᵀ z = μ z` with `μ = 1/θ` and `g = L⁻ᵀ z`, which needs no inverse
/// of `T` and so tolerates a singular `T_m`. Values nearest the origin are
/// the largest `|μ|`.
pub fn harmonic_ritz(proj: &ProjectedMatrix, k: usize, target: Target, extra_largest: usize) -> Result<HarmonicRitzSet> {
    let cols = proj.cols;
    let tbar = proj.tbar();
    let t = proj.tm();
    let mut b = tbar.transpose() * &tbar;
    let chol = match b.clone().cholesky() {
        Some(c) => c,
        None => {
            let shift = 1e-12 * t.amax().max(f64::MIN_POSITIVE);
            warn!("T̄ᵀT̄ is not positive definite; shifting by {shift:e}");
            for i in 0..cols {
                b[(i, i)] += shift * shift;
            }
            b.cholesky()
                .ok_or_else(|| Error::EigenFailure("harmonic Ritz factorization failed".into()))?
        }
    };
    let l = chol.l();
    let m1 = l
        .solve_lower_triangular(&t)
        .ok_or_else(|| Error::EigenFailure("singular Cholesky factor".into()))?;
    let m2 = l
        .solve_lower_triangular(&m1.transpose())
        .ok_or_else(|| Error::EigenFailure("singular Cholesky factor".into()))?;
    let sym = (&m2 + m2.transpose()) * 0.5;
    let (mu, z) = sym_eigen(&sym)?;
    let theta: Vec<f64> = mu.iter().map(|&u| if u == 0.0 { f64::INFINITY } else { 1.0 / u }).collect();
    let idx = small::select(&theta, k, target, extra_largest);
    let lt = l.transpose();
    let mut vectors = DMatrix::zeros(cols, idx.len());
    let mut values = Vec::with_capacity(idx.len());
    let mut residuals = Vec::with_capacity(idx.len());
    for (c, &i) in idx.iter().enumerate() {
        let mut g = lt
            .solve_upper_triangular(&z.column(i).clone_owned())
            .ok_or_else(|| Error::EigenFailure("singular Cholesky factor".into()))?;
        let nrm = g.norm();
        g /= nrm;
        let th = theta[i];
        let mut res = &tbar * &g;
        if th.is_finite() {
            for p in 0..cols {
                res[p] -= th * g[p];
            }
        }
        residuals.push(if th.is_finite() { res.norm() } else { f64::INFINITY });
        values.push(th);
        vectors.set_column(c, &g);
    }
    Ok(HarmonicRitzSet {
        values,
        vectors,
        residuals,
    })
}

/// Result of the least-squares step.
#[derive(Debug, Clone)]
pub struct MinresStep<S> {
    pub r: Vec<S>,
    pub resid_norm: f64,
    /// Residual of the small least-squares problem.
    pub ls_resid: f64,
}

/// Step 4: `d = argmin ‖c − T̄_m d‖`, `x += V_m d`, `r = r0 − V_{m+1} T̄_m d`.
/// `c` holds the leading entries of `V_{m+1}ᴴ r0`.
pub fn minres_update<S: Scalar>(
    basis: &KrylovBasis<S>,
    proj: &ProjectedMatrix,
    x: &mut [S],
    r0: &[S],
    c: &[S],
) -> MinresStep<S> {
    let cols = proj.cols;
    let tbar = proj.tbar();
    let pad = |f: &dyn Fn(&S) -> f64| {
        let mut v = DVector::zeros(cols + 1);
        for (i, ci) in c.iter().enumerate().take(cols + 1) {
            v[i] = f(ci);
        }
        v
    };
    let (dre, rre) = lstsq(&tbar, &pad(&|v| v.re()));
    let (d, u, ls_resid) = if S::IS_COMPLEX {
        let (dim, rim) = lstsq(&tbar, &pad(&|v| v.imaginary()));
        let ure = &tbar * &dre;
        let uim = &tbar * &dim;
        let d: Vec<S> = dre.iter().zip(dim.iter()).map(|(&a, &b)| S::from_parts(a, b)).collect();
        let u: Vec<S> = ure.iter().zip(uim.iter()).map(|(&a, &b)| S::from_parts(a, b)).collect();
        (d, u, rre.hypot(rim))
    } else {
        let u = &tbar * &dre;
        (
            dre.iter().map(|&a| S::from_real(a)).collect(),
            u.iter().map(|&a| S::from_real(a)).collect::<Vec<S>>(),
            rre,
        )
    };
    basis.v.add_combination(&d, x, 1.0);
    let mut r = r0.to_vec();
    let live = basis.filled().min(cols + 1);
    basis.v.add_combination(&u[..live], &mut r, -1.0);
    let resid_norm = norm2(&r);
    MinresStep { r, resid_norm, ls_resid }
}

/// The `(m+1) × (k+1)` matrix `P` of a Minres-DR restart: orthonormalized
/// `[g_i; 0]` followed by the left null vector of `T̄_m` (proportional to
/// `[−t_{m+1,m} T_m⁻ᵀ e_m; 1]`), orthonormalized against them.
pub fn restart_map(proj: &ProjectedMatrix, h: &HarmonicRitzSet) -> DMatrix<f64> {
    let cols = proj.cols;
    let k = h.len();
    let mut m = DMatrix::zeros(cols + 1, k + 1);
    m.view_mut((0, 0), (cols, k)).copy_from(&h.vectors);
    m.set_column(k, &left_null_vector(&proj.tbar()));
    orthonormalize_columns(&m)
}

/// Step 5: `V_{k+1} = V_{m+1} P` and `T̄_k = Pᵀ T̄_m P_{m,k}`. The new
/// `v_{k+1}` is reorthogonalized against the first `k` columns. Returns the
/// new basis, projection and `P`.
pub fn minres_restart<S: Scalar>(
    basis: &KrylovBasis<S>,
    proj: &ProjectedMatrix,
    h: &HarmonicRitzSet,
    ctx: &mut CycleCtx,
) -> Result<(KrylovBasis<S>, ProjectedMatrix, DMatrix<f64>)> {
    let m = proj.m();
    let cols = proj.cols;
    if basis.filled() <= cols {
        return Err(Error::InvalidConfig(
            "cannot restart after a breakdown: v_{m+1} is missing".into(),
        ));
    }
    let k = h.len();
    let p = restart_map(proj, h);
    let mut new_cols = basis.v.combine(&p);
    let mut last = new_cols.pop().unwrap();
    let nrm = reorthogonalize(&mut last, &new_cols)
        .map_err(|_| Error::InvalidConfig("restart vector lies in the span of the retained vectors".into()))?;
    scal_real(1.0 / nrm, &mut last);
    ctx.log.push(ReorthEvent {
        cycle: ctx.cycle + 1,
        column: k,
        span: Span::FirstK,
        against: k,
        forced: true,
    });
    new_cols.push(last);

    let pmk = p.view((0, 0), (cols, k)).clone_owned();
    let tk = p.transpose() * proj.tbar() * pmk;
    let mut t = DMatrix::zeros(m + 1, m);
    for j in 0..k {
        for i in 0..k {
            t[(i, j)] = 0.5 * (tk[(i, j)] + tk[(j, i)]);
        }
        t[(k, j)] = tk[(k, j)];
        t[(j, k)] = tk[(k, j)];
    }
    Ok((
        KrylovBasis {
            v: Block::from_columns(basis.n(), new_cols),
            m,
            k,
        },
        ProjectedMatrix { t, k, cols: k },
        p,
    ))
}

/// Everything a Minres-DR run produces.
#[derive(Debug, Clone)]
pub struct MinresDrOutput<S> {
    pub x: Vec<S>,
    pub r: Vec<S>,
    pub status: Status,
    pub cycles: usize,
    pub harmonic: HarmonicRitzSet,
    pub deflation: DeflationSpace<S>,
    pub history: ConvergenceHistory,
    pub reorth_log: Vec<ReorthEvent>,
    /// `‖PᵀP − I‖₂` at every restart.
    pub restart_defects: Vec<f64>,
    pub linear_converged: bool,
    pub eigen_converged: bool,
}

fn gram_defect(p: &DMatrix<f64>) -> f64 {
    let mut g = p.transpose() * p;
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    g.singular_values().amax()
}

/// Minres-DR(m, k).
pub fn minres_dr<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    x0: Option<&[S]>,
    cfg: &MinresDrConfig,
) -> Result<MinresDrOutput<S>> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
        }
    }
    cfg.validate(n)?;
    let start = counters::snapshot();
    let (mut x, mut r) = initial_residual(op, b, x0);
    let bnorm = {
        let nb = norm2(b);
        if nb > 0.0 {
            nb
        } else {
            1.0
        }
    };
    let mut history = ConvergenceHistory::default();
    let mut ctx = CycleCtx::new(n, cfg.m);
    let r0n = norm2(&r);
    history.push(0, 0, counters::since(start), r0n / bnorm, None);
    let mut lin_done = !cfg.solve_linear || r0n <= cfg.lin_rtol * bnorm;
    if r0n == 0.0 {
        history.totals = counters::since(start);
        return Ok(MinresDrOutput {
            x,
            r,
            status: Status::Converged,
            cycles: 0,
            harmonic: HarmonicRitzSet {
                values: vec![],
                vectors: DMatrix::zeros(0, 0),
                residuals: vec![],
            },
            deflation: DeflationSpace::empty(n),
            history,
            reorth_log: vec![],
            restart_defects: vec![],
            linear_converged: true,
            eigen_converged: cfg.n_eig_wanted == 0,
        });
    }

    let mut basis: Option<KrylovBasis<S>> = None;
    let mut proj = ProjectedMatrix::new(cfg.m);
    let mut steps = 0usize;
    let mut restart_defects = Vec::new();
    let mut eig_done;
    let mut broke;
    let mut harmonic;
    loop {
        let cycle = ctx.cycle;
        let c: Vec<S> = match basis.as_ref() {
            None => vec![S::from_real(norm2(&r))],
            Some(bs) if !lin_done => projected_rhs(bs, &proj, &r, false),
            Some(_) => Vec::new(),
        };
        let mut tracker = (!lin_done).then(|| residual_tracker(basis.as_ref().map(|_| &proj), cfg.m, &c));
        let hist = &mut history;
        let mut on_step = |p: &ProjectedMatrix| {
            steps += 1;
            if let Some(tr) = tracker.as_mut() {
                let (mr, _) = tr.push(&p.t.column(p.cols - 1).clone_owned());
                hist.push(cycle, steps, counters::since(start), mr / bnorm, None);
            }
        };
        broke = match basis.as_mut() {
            None => {
                let mode = if cfg.full_first_cycle {
                    ReorthMode::FullFirst
                } else {
                    ReorthMode::Policy(cfg.policy)
                };
                let (bs, pj, brk) = first_cycle_with(op, &r, cfg.m, mode, &mut ctx, &mut on_step)?;
                basis = Some(bs);
                proj = pj;
                brk
            }
            Some(bs) => extend(op, bs, &mut proj, ReorthMode::Policy(cfg.policy), &mut ctx, &mut on_step),
        };
        let bs = basis.as_ref().unwrap();
        harmonic = harmonic_ritz(&proj, cfg.k, cfg.target, cfg.extra_largest)?;
        if !lin_done {
            let step = minres_update(bs, &proj, &mut x, &r, &c);
            r = step.r;
            if step.resid_norm <= cfg.lin_rtol * bnorm {
                lin_done = true;
            }
        }
        let od = cfg.track_orthodefect.then(|| bs.v.orthodefect_leading(proj.cols));
        let used = counters::since(start);
        history.push_cycle_end(cycle, steps, used, norm2_uncounted(&r) / bnorm, od);
        for (i, (&val, &res)) in harmonic.values.iter().zip(&harmonic.residuals).enumerate() {
            history.eig.push(EigRow {
                cycle,
                matvecs: used.matvecs,
                index: i,
                value: val,
                residual: res,
            });
        }
        eig_done = harmonic.converged(cfg.n_eig_wanted, cfg.eig_tol);
        let done = broke || cycle >= cfg.max_cycles || (!cfg.run_all_cycles && lin_done && eig_done);
        if done {
            break;
        }
        let (nb, np, p) = minres_restart(bs, &proj, &harmonic, &mut ctx)?;
        restart_defects.push(gram_defect(&p));
        basis = Some(nb);
        proj = np;
        ctx.cycle += 1;
    }

    let bs = basis.as_ref().unwrap();
    let deflation = if broke {
        let mut cols = bs.v.combine(&orthonormalize_columns(&harmonic.vectors));
        cols.push(vec![S::zero(); n]);
        let q = orthonormalize_columns(&harmonic.vectors);
        let tk = q.transpose() * proj.tm() * &q;
        let k = harmonic.len();
        let mut t = DMatrix::zeros(k + 1, k);
        t.view_mut((0, 0), (k, k)).copy_from(&tk);
        DeflationSpace {
            v: Block::from_columns(n, cols),
            t,
        }
    } else {
        let (nb, np, _) = minres_restart(bs, &proj, &harmonic, &mut ctx)?;
        DeflationSpace::from_restart(&nb, &np)
    };
    let status = if lin_done && eig_done {
        Status::Converged
    } else if broke {
        Status::InvariantSubspace
    } else {
        Status::MaxIterations
    };
    history.totals = counters::since(start);
    Ok(MinresDrOutput {
        x,
        r,
        status,
        cycles: ctx.cycle,
        harmonic,
        deflation,
        history,
        reorth_log: ctx.log,
        restart_defects,
        linear_converged: lin_done,
        eigen_converged: eig_done,
    })
}

fn norm2_uncounted<S: Scalar>(v: &[S]) -> f64 {
    crate::kernels::dot_raw(v, v).re().max(0.0).sqrt()
}

/// Minres from iterate `x` with residual `r0`; history rows are appended.
fn minres_iterate<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    x: &mut [S],
    r0: &[S],
    rtol: f64,
    maxit: usize,
    history: &mut ConvergenceHistory,
    start: Counts,
) -> (Status, usize) {
    let n = op.dim();
    let bnorm = {
        let nb = norm2(b);
        if nb > 0.0 {
            nb
        } else {
            1.0
        }
    };
    let target = rtol * bnorm;
    let beta1 = norm2(r0);
    if beta1 <= target {
        return (Status::Converged, 0);
    }
    let mut v_old = vec![S::zero(); n];
    let mut v = r0.to_vec();
    scal_real(1.0 / beta1, &mut v);
    let mut beta = beta1;
    let mut phibar = beta1;
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let (mut dbar, mut epsln) = (0.0f64, 0.0f64);
    let mut w = vec![S::zero(); n];
    let mut w2 = vec![S::zero(); n];
    for it in 1..=maxit {
        let mut q = op.apply(&v);
        if it > 1 {
            axpy(S::from_real(-beta), &v_old, &mut q);
        }
        let alpha = dot(&v, &q).re();
        axpy(S::from_real(-alpha), &v, &mut q);
        let beta_next = norm2(&q);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alpha;
        let gbar = sn * dbar - cs * alpha;
        epsln = sn * beta_next;
        dbar = -cs * beta_next;
        let gamma = gbar.hypot(beta_next);
        if gamma == 0.0 {
            warn!("Minres: singular projected system at iteration {it}");
            return (Status::Stagnated, it);
        }
        cs = gbar / gamma;
        sn = beta_next / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        // w_new = (v − ε w1 − δ w2) / γ with w1 = old w2, w2 = old w
        let mut w_new = v.clone();
        if oldeps != 0.0 {
            axpy(S::from_real(-oldeps), &w2, &mut w_new);
        }
        axpy(S::from_real(-delta), &w, &mut w_new);
        scal_real(1.0 / gamma, &mut w_new);
        w2 = std::mem::replace(&mut w, w_new);
        axpy(S::from_real(phi), &w, x);

        history.push(0, it, counters::since(start), phibar.abs() / bnorm, None);
        if phibar.abs() <= target {
            return (Status::Converged, it);
        }
        if beta_next == 0.0 {
            return (Status::InvariantSubspace, it);
        }
        scal_real(1.0 / beta_next, &mut q);
        v_old = std::mem::replace(&mut v, q);
        beta = beta_next;
    }
    (Status::MaxIterations, maxit)
}

fn run_minres<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    mut x: Vec<S>,
    r: Vec<S>,
    rtol: f64,
    maxit: usize,
    start: Counts,
) -> SolveOutput<S> {
    let mut history = ConvergenceHistory::default();
    let nb = norm2(b);
    let scale = if nb > 0.0 { nb } else { 1.0 };
    history.push(0, 0, counters::since(start), norm2(&r) / scale, None);
    let (status, iterations) = minres_iterate(op, b, &mut x, &r, rtol, maxit, &mut history, start);
    history.totals = counters::since(start);
    SolveOutput {
        x,
        status,
        iterations,
        history,
    }
}

fn check<S: Scalar>(n: usize, b: &[S], x0: Option<&[S]>, rtol: f64) -> Result<()> {
    for len in std::iter::once(b.len()).chain(x0.map(|x| x.len())) {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    if !(rtol > 0.0 && rtol < 1.0) {
        return Err(Error::InvalidConfig(format!("rtol must lie in (0, 1), got {rtol}")));
    }
    Ok(())
}

/// Minres (Paige–Saunders).
pub fn minres<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    x0: Option<&[S]>,
    rtol: f64,
    maxit: usize,
) -> Result<SolveOutput<S>> {
    check(op.dim(), b, x0, rtol)?;
    let start = counters::snapshot();
    let (x, r) = initial_residual(op, b, x0);
    Ok(run_minres(op, b, x, r, rtol, maxit, start))
}

/// Deflated Minres: Galerkin projection over `ds`, then Minres from the
/// projected iterate with its residual recomputed.
pub fn d_minres<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    x0: Option<&[S]>,
    ds: &DeflationSpace<S>,
    rtol: f64,
    maxit: usize,
) -> Result<SolveOutput<S>> {
    check(op.dim(), b, x0, rtol)?;
    if !ds.is_empty() && ds.n() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: ds.n(),
        });
    }
    let start = counters::snapshot();
    let (mut x, mut r) = initial_residual(op, b, x0);
    if !ds.is_empty() {
        deflation_project(ds, &mut x, &mut r)?;
        r = sub(b, &op.apply(&x));
    }
    Ok(run_minres(op, b, x, r, rtol, maxit, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landr::{first_cycle, CycleCtx};
    use crate::operator::Diagonal;
    use crate::rng;

    #[test]
    fn identity_one_iteration() {
        let a = Diagonal::new(vec![1.0; 5]);
        let b = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let out = minres(&a, &b, None, 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 1);
        for (u, v) in out.x.iter().zip(&b) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_two_by_two() {
        let a = Diagonal::new(vec![-1.0, 2.0]);
        let out = minres(&a, &[1.0, 1.0], None, 1e-14, 10).unwrap();
        assert_eq!(out.iterations, 2);
        assert!((out.x[0] + 1.0).abs() < 1e-14 && (out.x[1] - 0.5).abs() < 1e-14);
        let res: Vec<f64> = out.history.rows.iter().map(|r| r.resid_rel).collect();
        assert!(res.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn harmonic_equals_ritz_for_invariant_space() {
        let mut proj = ProjectedMatrix::new(3);
        proj.cols = 3;
        proj.t[(0, 0)] = 3.0;
        proj.t[(1, 1)] = -1.0;
        proj.t[(2, 2)] = 2.0;
        let h = harmonic_ritz(&proj, 3, Target::SmallestMagnitude, 0).unwrap();
        assert_eq!(h.values.len(), 3);
        for (v, e) in h.values.iter().zip([-1.0, 2.0, 3.0]) {
            assert!((v - e).abs() < 1e-14);
        }
        assert!(h.residuals.iter().all(|r| *r < 1e-14));
    }

    #[test]
    fn one_column_least_squares_closed_form() {
        let a = Diagonal::new(vec![1.0, 3.0]);
        let r0 = vec![1.0, 1.0];
        let mut ctx = CycleCtx::new(2, 1);
        let (basis, proj, _) = first_cycle(&a, &r0, 1, &mut ctx).unwrap();
        let c = vec![norm2(&r0)];
        let mut x = vec![0.0; 2];
        let step = minres_update(&basis, &proj, &mut x, &r0, &c);
        let tcol = [proj.t[(0, 0)], proj.t[(1, 0)]];
        let d = tcol[0] * c[0] / (tcol[0] * tcol[0] + tcol[1] * tcol[1]);
        let v1 = basis.v.col(0);
        assert!((x[0] - d * v1[0]).abs() < 1e-15 && (x[1] - d * v1[1]).abs() < 1e-15);
        assert!((step.resid_norm - step.ls_resid).abs() < 1e-14);
    }

    #[test]
    fn restart_map_is_orthonormal_and_relation_holds() {
        let entries: Vec<f64> = (0..200).map(|i| (i as f64) * 0.05 - 1.03).collect();
        let a = Diagonal::new(entries);
        let b: Vec<f64> = rng::normal_vector(200, &mut rng::stream(3, 0));
        let mut ctx = CycleCtx::new(200, 25);
        let (basis, proj, _) = first_cycle(&a, &b, 25, &mut ctx).unwrap();
        let h = harmonic_ritz(&proj, 6, Target::SmallestMagnitude, 0).unwrap();
        let (nb, np, p) = minres_restart(&basis, &proj, &h, &mut ctx).unwrap();
        assert!(gram_defect(&p) < 1e-13);
        let k = 6;
        for j in 0..k {
            let mut res = LinearOperator::<f64>::apply(&a, nb.v.col(j));
            for i in 0..=k {
                axpy(-np.t[(i, j)], nb.v.col(i), &mut res);
            }
            assert!(norm2(&res) < 1e-10 * a.norm(), "column {j}: {}", norm2(&res));
        }
    }
}
