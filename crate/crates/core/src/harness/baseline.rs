//! Unrestarted Lanczos with full reorthogonalization, the reference curve
//! for restarted eigenvalue convergence.

use nalgebra::DMatrix;

use crate::counters;
use crate::error::{Error, Result};
use crate::history::{ConvergenceHistory, EigRow};
use crate::kernels::{axpy, dot, norm2, scal_real, Block};
use crate::operator::LinearOperator;
use crate::reorth::reorthogonalize;
use crate::scalar::Scalar;
use crate::small::{self, sym_eigen, Target};

#[derive(Debug, Clone)]
pub struct LanczosBaseline {
    pub steps: usize,
    /// Eigen rows use `cycle` for the Lanczos step at which they were taken.
    pub history: ConvergenceHistory,
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Run up to `max_steps` Lanczos steps from `b`, checking the `n_eig`
/// targeted Ritz pairs every `check_every` steps, and stop once they all
/// reach `eig_tol`.
pub fn lanczos_eig<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    b: &[S],
    max_steps: usize,
    n_eig: usize,
    eig_tol: f64,
    check_every: usize,
) -> Result<LanczosBaseline> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if check_every == 0 || n_eig == 0 {
        return Err(Error::InvalidConfig("check_every and n_eig must be positive".into()));
    }
    let start = counters::snapshot();
    let max_steps = max_steps.min(n);
    let mut v = Block::new(n);
    let mut v1 = b.to_vec();
    let b0 = norm2(&v1);
    if b0 == 0.0 {
        return Err(Error::InvalidConfig("starting vector is zero".into()));
    }
    scal_real(1.0 / b0, &mut v1);
    v.push(v1);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut history = ConvergenceHistory::default();
    let mut values = Vec::new();
    let mut residuals = Vec::new();
    let mut steps = 0;
    for j in 0..max_steps {
        let mut w = op.apply(v.col(j));
        if j > 0 {
            axpy(S::from_real(-beta[j - 1]), v.col(j - 1), &mut w);
        }
        let a = dot(v.col(j), &w).re();
        axpy(S::from_real(-a), v.col(j), &mut w);
        let bn = reorthogonalize(&mut w, v.columns()).unwrap_or(0.0);
        alpha.push(a);
        beta.push(bn);
        steps = j + 1;
        let last = steps == max_steps || bn == 0.0;
        if steps % check_every == 0 || last {
            let t = DMatrix::from_fn(steps, steps, |p, q| {
                if p == q {
                    alpha[p]
                } else if p == q + 1 {
                    beta[q]
                } else if q == p + 1 {
                    beta[p]
                } else {
                    0.0
                }
            });
            let (vals, vecs) = sym_eigen(&t)?;
            let idx = small::select(vals.as_slice(), n_eig, Target::SmallestMagnitude, 0);
            values = idx.iter().map(|&i| vals[i]).collect();
            residuals = idx.iter().map(|&i| (bn * vecs[(steps - 1, i)]).abs()).collect();
            let used = counters::since(start);
            for (i, (&val, &res)) in values.iter().zip(&residuals).enumerate() {
                history.eig.push(EigRow {
                    cycle: steps,
                    matvecs: used.matvecs,
                    index: i,
                    value: val,
                    residual: res,
                });
            }
            if residuals.len() == n_eig && residuals.iter().all(|&r| r <= eig_tol) {
                break;
            }
        }
        if bn == 0.0 {
            break;
        }
        scal_real(1.0 / bn, &mut w);
        v.push(w);
    }
    history.totals = counters::since(start);
    Ok(LanczosBaseline {
        steps,
        history,
        values,
        residuals,
    })
}
