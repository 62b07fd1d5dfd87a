//! Dense helpers for the small projected problems (size at most m+1).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which end of the spectrum a restart keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Nearest the origin.
    #[default]
    SmallestMagnitude,
    SmallestAlgebraic,
    LargestAlgebraic,
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smallest-magnitude" | "sm" => Ok(Target::SmallestMagnitude),
            "smallest-algebraic" | "sa" => Ok(Target::SmallestAlgebraic),
            "largest-algebraic" | "la" => Ok(Target::LargestAlgebraic),
            _ => Err(Error::InvalidConfig(format!("unknown target `{s}`"))),
        }
    }
}

/// Eigen-decomposition of a symmetric matrix. Only the lower triangle is
/// trusted; it is mirrored before the solve.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let mut s = a.clone();
    for j in 0..n {
        for i in 0..j {
            s[(i, j)] = s[(j, i)];
        }
    }
    if !s.iter().all(|x| x.is_finite()) {
        return Err(Error::EigenFailure("non-finite entry in projected matrix".into()));
    }
    let eig = SymmetricEigen::try_new(s, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigenFailure(format!("no convergence for n = {n}")))?;
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// Indices of `k` values in the order a restart keeps them. The `extra_largest`
/// largest algebraic values are set aside first and appended after the `k -
/// extra_largest` values picked by `target`. Ties fall back to the original
/// index.
pub fn select(values: &[f64], k: usize, target: Target, extra_largest: usize) -> Vec<usize> {
    let n = values.len();
    let k = k.min(n);
    let extra = extra_largest.min(k);
    let mut by_value: Vec<usize> = (0..n).collect();
    by_value.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let extras: Vec<usize> = by_value[..extra].to_vec();
    let mut pool: Vec<usize> = (0..n).filter(|i| !extras.contains(i)).collect();
    match target {
        Target::SmallestMagnitude => {
            pool.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()).then(a.cmp(&b)))
        }
        Target::SmallestAlgebraic => {
            pool.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        }
        Target::LargestAlgebraic => {
            pool.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)))
        }
    }
    let mut out: Vec<usize> = pool.into_iter().take(k - extra).collect();
    out.extend(extras);
    out
}

/// Least-squares solution of `min ‖c − A d‖` for a tall matrix of full
/// column rank, with the attained residual norm. Falls back to an SVD
/// pseudo-inverse when the triangular factor is numerically singular.
pub fn lstsq(a: &DMatrix<f64>, c: &DVector<f64>) -> (DVector<f64>, f64) {
    let qr = a.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let rmax = r.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let rmin = r.diagonal().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let d = if rmin > 1e-14 * rmax {
        let rhs = q.transpose() * c;
        r.solve_upper_triangular(&rhs)
            .unwrap_or_else(|| DVector::zeros(a.ncols()))
    } else {
        let svd = a.clone().svd(true, true);
        svd.solve(c, 1e-14 * rmax.max(f64::MIN_POSITIVE))
            .unwrap_or_else(|_| DVector::zeros(a.ncols()))
    };
    let res = (c - a * &d).norm();
    (d, res)
}

/// Unit vector spanning the orthogonal complement of the range of a tall
/// `(p+1) × p` matrix of full column rank.
pub fn left_null_vector(a: &DMatrix<f64>) -> DVector<f64> {
    let rows = a.nrows();
    let q = a.clone().qr().q();
    let mut best = DVector::zeros(rows);
    let mut best_norm = -1.0;
    // e_last first; other coordinates only if it is (nearly) in the range
    for j in (0..rows).rev() {
        let mut e = DVector::zeros(rows);
        e[j] = 1.0;
        let mut z = &e - &q * (q.transpose() * &e);
        // second pass keeps the complement clean
        z -= &q * (q.transpose() * &z);
        let nz = z.norm();
        if nz > best_norm {
            best_norm = nz;
            best = z / nz;
        }
        if best_norm > 0.5 {
            break;
        }
    }
    if best[rows - 1] < 0.0 {
        best = -best;
    }
    best
}

/// Column-orthonormalize `g` with two passes of Gram–Schmidt.
pub fn orthonormalize_columns(g: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = g.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let h = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-h, &qi, 1.0);
            }
        }
        let nrm = q.column(j).norm();
        if nrm > 0.0 {
            q.column_mut(j).scale_mut(1.0 / nrm);
        }
    }
    q
}

/// Residual norms of `min ‖c − H_j d‖` as columns are appended to `H`, for
/// per-iteration convergence curves. The columns are orthonormalized by
/// Gram–Schmidt (two passes) and the residual vector is kept explicitly, so
/// small residuals are not lost to cancellation.
///
/// When each new column brings a row whose only nonzero is on that column
/// (true for every Lanczos step), the Galerkin residual of the square system
/// follows from consecutive minimum residuals: `ρ_G = ρ_j / √(1 − (ρ_j/ρ_{j−1})²)`.
#[derive(Debug, Clone)]
pub struct LsqTracker {
    q: Vec<DVector<f64>>,
    res: Vec<DVector<f64>>,
    prev: f64,
}

impl LsqTracker {
    /// `parts` are the real (and imaginary) parts of `c`, padded to the
    /// final row count.
    pub fn new(parts: Vec<DVector<f64>>) -> Self {
        let prev = parts.iter().map(|p| p.norm_squared()).sum::<f64>().sqrt();
        LsqTracker {
            q: Vec::new(),
            res: parts,
            prev,
        }
    }

    pub fn residual(&self) -> f64 {
        self.prev
    }

    /// Append a column; returns `(minimum residual, Galerkin residual)`.
    pub fn push(&mut self, col: &DVector<f64>) -> (f64, f64) {
        let mut v = col.clone();
        for _ in 0..2 {
            for q in &self.q {
                let h = q.dot(&v);
                v.axpy(-h, q, 1.0);
            }
        }
        let nv = v.norm();
        if nv > 0.0 {
            v /= nv;
            for r in &mut self.res {
                let h = v.dot(r);
                r.axpy(-h, &v, 1.0);
            }
            self.q.push(v);
        }
        let rho = self.res.iter().map(|p| p.norm_squared()).sum::<f64>().sqrt();
        let ratio = if self.prev > 0.0 { (rho / self.prev).min(1.0) } else { 0.0 };
        let galerkin = rho / (1.0 - ratio * ratio).sqrt();
        self.prev = rho;
        (rho, galerkin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_smallest_magnitude_with_ties() {
        let v = [3.0, -1.0, 1.0, 0.5, 10.0];
        assert_eq!(select(&v, 3, Target::SmallestMagnitude, 0), vec![3, 1, 2]);
        assert_eq!(select(&v, 2, Target::SmallestAlgebraic, 0), vec![1, 3]);
        assert_eq!(select(&v, 2, Target::LargestAlgebraic, 0), vec![4, 0]);
        assert_eq!(select(&v, 3, Target::SmallestMagnitude, 1), vec![3, 1, 4]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let t = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = sym_eigen(&t).unwrap();
        let idx = select(vals.as_slice(), 2, Target::SmallestAlgebraic, 0);
        assert!((vals[idx[0]] - 1.0).abs() < 1e-14);
        assert!((vals[idx[1]] - 3.0).abs() < 1e-14);
        let g = vecs.column(idx[0]);
        assert!((g[0].abs() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((g[0] + g[1]).abs() < 1e-14);
    }

    #[test]
    fn lstsq_matches_normal_equations() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        let c = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (d, res) = lstsq(&a, &c);
        let ata = a.transpose() * &a;
        let d2 = ata.lu().solve(&(a.transpose() * &c)).unwrap();
        assert!((&d - &d2).norm() < 1e-13);
        assert!((res - (&c - &a * &d2).norm()).abs() < 1e-13);
    }

    #[test]
    fn null_vector_is_orthogonal_to_range() {
        let a = DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 1.0, 3.0, 0.0, 0.5]);
        let z = left_null_vector(&a);
        assert!((a.transpose() * &z).norm() < 1e-14);
        assert!((z.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tracker_matches_direct_solves() {
        let h = DMatrix::from_row_slice(
            4,
            3,
            &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 4.0, 0.0, 0.0, 0.7],
        );
        let mut c = DVector::zeros(4);
        c[0] = 1.5;
        let mut tr = LsqTracker::new(vec![c.clone()]);
        for j in 1..=3 {
            let (mr, g) = tr.push(&h.column(j - 1).clone_owned());
            let hj = h.view((0, 0), (j + 1, j)).clone_owned();
            let cj = c.rows(0, j + 1).clone_owned();
            let (_, direct) = lstsq(&hj, &cj);
            assert!((mr - direct).abs() < 1e-14, "{mr} vs {direct}");
            let d = h.view((0, 0), (j, j)).clone_owned().lu().solve(&c.rows(0, j).clone_owned()).unwrap();
            let fom = (h[(j, j - 1)] * d[j - 1]).abs();
            assert!((g - fom).abs() < 1e-12 * fom.max(1.0), "{g} vs {fom}");
        }
    }
}
