//! Block conjugate gradients (O'Leary) for `s` right-hand sides at once.
//!
//! Each block iteration costs `s` matvecs and a handful of `s × s` solves.
//! There is no removal of converged or dependent right-hand sides: when the
//! search block loses rank the solve stops with [`Status::Unstable`].

use log::warn;
use nalgebra::DMatrix;

use crate::counters::{self, Counts};
use crate::error::{Error, Result};
use crate::history::{ConvergenceHistory, Status};
use crate::kernels::{axpy, dot, norm2, sub, Block};
use crate::operator::LinearOperator;
use crate::scalar::Scalar;

/// Smallest acceptable eigenvalue ratio of the diagonally scaled `PᴴAP`.
const RANK_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockCgOptions {
    pub rtol: f64,
    pub maxit: usize,
    /// Recompute `R = B − AX` every this many block iterations (0 disables).
    pub replace_every: usize,
}

impl Default for BlockCgOptions {
    fn default() -> Self {
        BlockCgOptions {
            rtol: 1e-8,
            maxit: 5_000,
            replace_every: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockCgOutput<S> {
    pub x: Block<S>,
    pub status: Status,
    pub iterations: usize,
    /// One history per right-hand side; matvec and vector-op columns are
    /// totals for the whole block.
    pub histories: Vec<ConvergenceHistory>,
    pub totals: Counts,
}

/// `XᴴY` with one counted dot per entry (Hermitian when `X = Y`, in which
/// case only the upper triangle is computed).
fn gram<S: Scalar>(x: &[Vec<S>], y: &[Vec<S>], hermitian: bool) -> DMatrix<S> {
    let s = x.len();
    let mut g = DMatrix::zeros(s, y.len());
    for i in 0..s {
        let j0 = if hermitian { i } else { 0 };
        for j in j0..y.len() {
            g[(i, j)] = dot(&x[i], &y[j]);
            if hermitian && j != i {
                g[(j, i)] = g[(i, j)].conjugate();
            }
        }
    }
    g
}

/// `out_j = base_j + sign · Σ_i Y_i c_{ij}`.
fn add_block<S: Scalar>(base: &mut [Vec<S>], y: &[Vec<S>], c: &DMatrix<S>, sign: f64) {
    for (j, out) in base.iter_mut().enumerate() {
        for (i, yi) in y.iter().enumerate() {
            let cij = c[(i, j)];
            if cij != S::zero() {
                axpy(cij.scale(sign), yi, out);
            }
        }
    }
}

/// Rank check on a Hermitian Gram matrix, insensitive to column scaling.
fn well_conditioned<S: Scalar>(g: &DMatrix<S>) -> bool {
    let s = g.nrows();
    let d: Vec<f64> = (0..s).map(|i| g[(i, i)].re()).collect();
    if d.iter().any(|&x| !(x > 0.0)) {
        return false;
    }
    let scaled = DMatrix::from_fn(s, s, |i, j| g[(i, j)].scale(1.0 / (d[i] * d[j]).sqrt()));
    let eig = scaled.symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    min > RANK_TOL * max
}

/// Block CG on the columns of `b` from a zero initial guess.
pub fn block_cg<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &Block<S>,
    opts: &BlockCgOptions,
) -> Result<BlockCgOutput<S>> {
    let n = op.dim();
    if b.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.n() });
    }
    if b.is_empty() {
        return Err(Error::InvalidConfig("block CG needs at least one right-hand side".into()));
    }
    if !(opts.rtol > 0.0 && opts.rtol < 1.0) {
        return Err(Error::InvalidConfig(format!("rtol must lie in (0, 1), got {}", opts.rtol)));
    }
    let start = counters::snapshot();
    let s = b.ncols();
    let bnorms: Vec<f64> = b
        .columns()
        .iter()
        .map(|c| {
            let nb = norm2(c);
            if nb > 0.0 {
                nb
            } else {
                1.0
            }
        })
        .collect();
    let mut x: Vec<Vec<S>> = vec![vec![S::zero(); n]; s];
    let mut r: Vec<Vec<S>> = b.columns().to_vec();
    let mut histories = vec![ConvergenceHistory::default(); s];
    let mut rr = gram(&r, &r, true);
    let record = |histories: &mut Vec<ConvergenceHistory>, it: usize, rr: &DMatrix<S>| -> bool {
        let used = counters::since(start);
        let mut all = true;
        for (j, h) in histories.iter_mut().enumerate() {
            let rel = rr[(j, j)].re().max(0.0).sqrt() / bnorms[j];
            h.push(0, it, used, rel, None);
            all &= rel <= opts.rtol;
        }
        all
    };
    if record(&mut histories, 0, &rr) {
        return Ok(finish(b, x, Status::Converged, 0, histories, start));
    }
    let mut p = r.clone();
    let mut status = Status::MaxIterations;
    let mut iterations = opts.maxit;
    for it in 1..=opts.maxit {
        let q: Vec<Vec<S>> = p.iter().map(|pj| op.apply(pj)).collect();
        let pq = gram(&p, &q, true);
        if !well_conditioned(&pq) {
            warn!("block CG: search block lost rank at iteration {it}");
            status = Status::Unstable;
            iterations = it - 1;
            break;
        }
        let lu = pq.lu();
        let alpha = match lu.solve(&rr) {
            Some(a) => a,
            None => {
                status = Status::Unstable;
                iterations = it - 1;
                break;
            }
        };
        add_block(&mut x, &p, &alpha, 1.0);
        add_block(&mut r, &q, &alpha, -1.0);
        if opts.replace_every > 0 && it % opts.replace_every == 0 {
            for (rj, (bj, xj)) in r.iter_mut().zip(b.columns().iter().zip(&x)) {
                *rj = sub(bj, &op.apply(xj));
            }
        }
        let rr_new = gram(&r, &r, true);
        if record(&mut histories, it, &rr_new) {
            status = Status::Converged;
            iterations = it;
            break;
        }
        let beta = match rr.clone().lu().solve(&rr_new) {
            Some(bt) => bt,
            None => {
                status = Status::Unstable;
                iterations = it;
                break;
            }
        };
        let mut new_p = r.clone();
        add_block(&mut new_p, &p, &beta, 1.0);
        p = new_p;
        rr = rr_new;
    }
    Ok(finish(b, x, status, iterations, histories, start))
}

fn finish<S: Scalar>(
    b: &Block<S>,
    x: Vec<Vec<S>>,
    status: Status,
    iterations: usize,
    mut histories: Vec<ConvergenceHistory>,
    start: Counts,
) -> BlockCgOutput<S> {
    let totals = counters::since(start);
    for h in &mut histories {
        h.totals = totals;
    }
    BlockCgOutput {
        x: Block::from_columns(b.n(), x),
        status,
        iterations,
        histories,
        totals,
    }
}
