//! Conjugate gradients, plain and deflated.
//!
//! [`d_cg`] handles a later right-hand side once Lan-DR has produced a
//! [`DeflationSpace`]: a Galerkin projection over `V_k` removes the
//! eigencomponents it represents and CG takes over from the projected
//! iterate. When the right-hand sides are related, [`d_cg_related`] first
//! projects over the solutions already computed ([`SolutionSpace`]).

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::counters::{self, Counts};
use crate::error::{Error, Result};
use crate::history::{ConvergenceHistory, SolveOutput, Status};
use crate::kernels::{axpy, dot, norm2, sub, xpby, Block};
use crate::landr::DeflationSpace;
use crate::operator::LinearOperator;
use crate::reorth::reorthogonalize;
use crate::scalar::Scalar;
use crate::small::sym_eigen;

/// Eigenvalues of `T_k` at or below this fraction of the largest are left
/// out of the projection.
const EXCLUDE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CgOptions {
    pub rtol: f64,
    pub maxit: usize,
    /// Recompute `r = b − Ax` every this many iterations (0 disables).
    pub replace_every: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            rtol: 1e-8,
            maxit: 10_000,
            replace_every: 100,
        }
    }
}

impl CgOptions {
    pub fn new(rtol: f64, maxit: usize) -> Self {
        CgOptions {
            rtol,
            maxit,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::InvalidConfig(format!("rtol must lie in (0, 1), got {}", self.rtol)));
        }
        Ok(())
    }
}

fn check_dims<S: Scalar>(n: usize, b: &[S], x0: Option<&[S]>) -> Result<()> {
    for len in std::iter::once(b.len()).chain(x0.map(|x| x.len())) {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    Ok(())
}

pub(crate) fn initial_residual<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    x0: Option<&[S]>,
) -> (Vec<S>, Vec<S>) {
    match x0 {
        Some(x0) => (x0.to_vec(), sub(b, &op.apply(x0))),
        None => (vec![S::zero(); b.len()], b.to_vec()),
    }
}

/// Apply `T⁻¹` (symmetric, eigendecomposed) to a possibly complex vector,
/// dropping eigendirections with `|λ| ≤ EXCLUDE_TOL · max|λ|`.
fn sym_solve<S: Scalar>(vals: &DVector<f64>, vecs: &DMatrix<f64>, c: &[S]) -> (Vec<S>, usize) {
    let lmax = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let keep: Vec<bool> = vals.iter().map(|l| l.abs() > EXCLUDE_TOL * lmax).collect();
    let solve = |rhs: DVector<f64>| -> DVector<f64> {
        let mut z = vecs.transpose() * rhs;
        for i in 0..z.len() {
            z[i] = if keep[i] { z[i] / vals[i] } else { 0.0 };
        }
        vecs * z
    };
    let re = solve(DVector::from_iterator(c.len(), c.iter().map(|v| v.re())));
    let d = if S::IS_COMPLEX {
        let im = solve(DVector::from_iterator(c.len(), c.iter().map(|v| v.imaginary())));
        re.iter().zip(im.iter()).map(|(&a, &b)| S::from_parts(a, b)).collect()
    } else {
        re.iter().map(|&a| S::from_real(a)).collect()
    };
    (d, keep.iter().filter(|k| !**k).count())
}

/// Galerkin projection over `V_k`: solve `T_k d = V_kᴴ r0`, then
/// `x += V_k d` and `r = r0 − V_{k+1} T̄_k d`. No matvecs. `T_k` may be the
/// diagonal one from Lan-DR or the dense one from Minres-DR.
pub fn deflation_project<S: Scalar>(ds: &DeflationSpace<S>, x: &mut [S], r: &mut [S]) -> Result<()> {
    let k = ds.k();
    if k == 0 {
        return Ok(());
    }
    if x.len() != ds.n() || r.len() != ds.n() {
        return Err(Error::DimensionMismatch {
            expected: ds.n(),
            got: x.len().min(r.len()),
        });
    }
    let c = ds.v.adjoint_times(0..k, r);
    let (vals, vecs) = sym_eigen(&ds.tk())?;
    let (d, dropped) = sym_solve(&vals, &vecs, &c);
    if dropped > 0 {
        warn!("{dropped} near-zero eigenvalue(s) of T_k excluded from the deflation projection");
    }
    // u = T̄_k d, length k+1
    let u: Vec<S> = (0..=k)
        .map(|i| {
            (0..k).fold(S::zero(), |acc, j| {
                let t = ds.t[(i, j)];
                if t == 0.0 {
                    acc
                } else {
                    acc + d[j].scale(t)
                }
            })
        })
        .collect();
    ds.v.add_combination(&d, x, 1.0);
    ds.v.add_combination(&u, r, -1.0);
    Ok(())
}

/// Orthonormal basis `W` of earlier solution vectors together with `AW` and
/// `WᴴAW`, for projecting a related right-hand side before deflated CG.
#[derive(Debug, Clone)]
pub struct SolutionSpace<S> {
    w: Block<S>,
    aw: Block<S>,
    h: DMatrix<S>,
}

impl<S: Scalar> SolutionSpace<S> {
    pub fn new(n: usize) -> Self {
        SolutionSpace {
            w: Block::new(n),
            aw: Block::new(n),
            h: DMatrix::zeros(0, 0),
        }
    }

    pub fn len(&self) -> usize {
        self.w.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Add a solution vector (one matvec). Vectors already in the span are
    /// skipped; returns whether the space grew.
    pub fn push<A: LinearOperator<S> + ?Sized>(&mut self, op: &A, x: &[S]) -> bool {
        let mut v = x.to_vec();
        let nv = match reorthogonalize(&mut v, self.w.columns()) {
            Ok(nv) if nv > 0.0 => nv,
            _ => return false,
        };
        crate::kernels::scal_real(1.0 / nv, &mut v);
        let av = op.apply(&v);
        let p = self.len();
        let mut h = DMatrix::zeros(p + 1, p + 1);
        h.view_mut((0, 0), (p, p)).copy_from(&self.h);
        for i in 0..p {
            let hij = dot(self.w.col(i), &av);
            h[(i, p)] = hij;
            h[(p, i)] = hij.conjugate();
        }
        h[(p, p)] = S::from_real(dot(&v, &av).re());
        self.h = h;
        self.w.push(v);
        self.aw.push(av);
        true
    }

    /// Galerkin projection: `x += W d`, `r −= AW d` with `(WᴴAW) d = Wᴴ r`.
    pub fn project(&self, x: &mut [S], r: &mut [S]) -> Result<()> {
        if self.is_empty() {
            return Ok(());
        }
        let p = self.len();
        let c = DVector::from_vec(self.w.adjoint_times(0..p, r));
        let d = self
            .h
            .clone()
            .lu()
            .solve(&c)
            .ok_or_else(|| Error::EigenFailure("solution-space Gram matrix is singular".into()))?;
        let d: Vec<S> = d.iter().copied().collect();
        self.w.add_combination(&d, x, 1.0);
        self.aw.add_combination(&d, r, -1.0);
        Ok(())
    }
}

/// CG from an iterate `x` with residual `r`, appending one history row per
/// iteration. `observer` sees the residual after every iteration.
#[allow(clippy::too_many_arguments)]
pub fn cg_iterate<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    x: &mut [S],
    r: &mut Vec<S>,
    opts: &CgOptions,
    history: &mut ConvergenceHistory,
    start: Counts,
    observer: &mut dyn FnMut(usize, &[S]),
) -> (Status, usize) {
    let bnorm = {
        let nb = norm2(b);
        if nb > 0.0 {
            nb
        } else {
            1.0
        }
    };
    let target = opts.rtol * bnorm;
    let mut rho = dot(r, r).re();
    if rho.sqrt() <= target {
        return (Status::Converged, 0);
    }
    let mut p = r.clone();
    for it in 1..=opts.maxit {
        let q = op.apply(&p);
        let pq = dot(&p, &q).re();
        if !(pq > 0.0) {
            warn!("CG found <p, Ap> = {pq:e} <= 0 at iteration {it}; the operator is not positive definite");
            return (Status::Indefinite, it - 1);
        }
        let alpha = rho / pq;
        axpy(S::from_real(alpha), &p, x);
        axpy(S::from_real(-alpha), &q, r);
        if opts.replace_every > 0 && it % opts.replace_every == 0 {
            *r = sub(b, &op.apply(x));
        }
        let rho_new = dot(r, r).re();
        history.push(0, it, counters::since(start), rho_new.sqrt() / bnorm, None);
        observer(it, r);
        if rho_new.sqrt() <= target {
            return (Status::Converged, it);
        }
        xpby(r, S::from_real(rho_new / rho), &mut p);
        rho = rho_new;
    }
    (Status::MaxIterations, opts.maxit)
}

fn finish_cg<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    mut x: Vec<S>,
    mut r: Vec<S>,
    opts: &CgOptions,
    start: Counts,
) -> SolveOutput<S> {
    let mut history = ConvergenceHistory::default();
    let bnorm = norm2(b);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    history.push(0, 0, counters::since(start), norm2(&r) / scale, None);
    let (status, iterations) = cg_iterate(op, b, &mut x, &mut r, opts, &mut history, start, &mut |_, _| {});
    history.totals = counters::since(start);
    SolveOutput {
        x,
        status,
        iterations,
        history,
    }
}

/// Conjugate gradients.
pub fn cg<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    x0: Option<&[S]>,
    opts: &CgOptions,
) -> Result<SolveOutput<S>> {
    check_dims(op.dim(), b, x0)?;
    opts.validate()?;
    let start = counters::snapshot();
    let (x, r) = initial_residual(op, b, x0);
    Ok(finish_cg(op, b, x, r, opts, start))
}

/// Deflated CG: projection over `ds`, then CG from the projected iterate
/// with its residual `b − Ax` recomputed (one matvec).
pub fn d_cg<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    x0: Option<&[S]>,
    ds: &DeflationSpace<S>,
    opts: &CgOptions,
) -> Result<SolveOutput<S>> {
    d_cg_related(op, b, x0, ds, None, opts)
}

/// Deflated CG for related right-hand sides: projection over the earlier
/// solutions in `solutions` (if any), then over `ds`, then CG as in [`d_cg`].
pub fn d_cg_related<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    x0: Option<&[S]>,
    ds: &DeflationSpace<S>,
    solutions: Option<&SolutionSpace<S>>,
    opts: &CgOptions,
) -> Result<SolveOutput<S>> {
    check_dims(op.dim(), b, x0)?;
    opts.validate()?;
    if !ds.is_empty() && ds.n() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: ds.n(),
        });
    }
    let start = counters::snapshot();
    let (mut x, mut r) = initial_residual(op, b, x0);
    if let Some(sols) = solutions {
        sols.project(&mut x, &mut r)?;
    }
    if !ds.is_empty() {
        deflation_project(ds, &mut x, &mut r)?;
        r = sub(b, &op.apply(&x));
    }
    Ok(finish_cg(op, b, x, r, opts, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Diagonal;

    #[test]
    fn identity_one_iteration() {
        let a = Diagonal::new(vec![1.0; 7]);
        let b: Vec<f64> = (1..=7).map(f64::from).collect();
        let out = cg(&a, &b, None, &CgOptions::new(1e-12, 10)).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn two_by_two_finite_termination() {
        let a = Diagonal::new(vec![1.0, 2.0]);
        let out = cg(&a, &[1.0, 1.0], None, &CgOptions::new(1e-14, 10)).unwrap();
        assert_eq!(out.iterations, 2);
        assert!((out.x[0] - 1.0).abs() < 1e-15 && (out.x[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn indefinite_is_flagged() {
        let a = Diagonal::new(vec![-1.0, 2.0, 3.0]);
        let out = cg(&a, &[1.0, 0.0, 0.0], None, &CgOptions::default()).unwrap();
        assert_eq!(out.status, Status::Indefinite);
    }

    #[test]
    fn max_iterations_status() {
        let a = Diagonal::new((1..=50).map(f64::from).collect());
        let out = cg(&a, &[1.0; 50], None, &CgOptions::new(1e-12, 3)).unwrap();
        assert_eq!(out.status, Status::MaxIterations);
        assert_eq!(out.iterations, 3);
    }

    #[test]
    fn empty_space_matches_cg() {
        let a = Diagonal::new((1..=30).map(f64::from).collect());
        let b: Vec<f64> = (0..30).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let opts = CgOptions::new(1e-10, 100);
        let plain = cg(&a, &b, None, &opts).unwrap();
        let defl = d_cg(&a, &b, None, &DeflationSpace::empty(30), &opts).unwrap();
        assert_eq!(plain.x, defl.x);
        assert_eq!(plain.history.rows, defl.history.rows);
    }

    #[test]
    fn exact_eigenvector_projection() {
        // V = [e1, e2, e3], T̄ with θ = (2, 5) and zero couplings
        let n = 4;
        let cols = (0..3)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        let mut t = DMatrix::zeros(3, 2);
        t[(0, 0)] = 2.0;
        t[(1, 1)] = 5.0;
        let ds = DeflationSpace {
            v: Block::from_columns(n, cols),
            t,
        };
        let mut x = vec![0.0; n];
        let mut r = vec![4.0, 10.0, 1.0, 1.0];
        deflation_project(&ds, &mut x, &mut r).unwrap();
        assert_eq!(x, vec![2.0, 2.0, 0.0, 0.0]);
        assert_eq!(r, vec![0.0, 0.0, 1.0, 1.0]);

        let mut x = vec![0.0; n];
        let mut r = vec![0.0, 0.0, 3.0, 1.0];
        deflation_project(&ds, &mut x, &mut r).unwrap();
        assert_eq!(x, vec![0.0; n]);
        assert_eq!(r, vec![0.0, 0.0, 3.0, 1.0]);
    }

    #[test]
    fn zero_eigenvalue_direction_is_skipped() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let mut t = DMatrix::zeros(2, 1);
        t[(0, 0)] = 0.0;
        let ds = DeflationSpace {
            v: Block::from_columns(2, cols),
            t,
        };
        let mut x = vec![0.0; 2];
        let mut r = vec![1.0, 1.0];
        deflation_project(&ds, &mut x, &mut r).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert!(r.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn solution_space_reproduces_known_solution() {
        let a = Diagonal::new((1..=20).map(f64::from).collect());
        let xs: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let b = LinearOperator::<f64>::apply(&a, &xs);
        let mut space = SolutionSpace::new(20);
        assert!(space.push(&a, &xs));
        assert!(!space.push(&a, &xs));
        let mut x = vec![0.0; 20];
        let mut r = b.clone();
        space.project(&mut x, &mut r).unwrap();
        assert!(norm2(&r) < 1e-13 * norm2(&b));
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}
