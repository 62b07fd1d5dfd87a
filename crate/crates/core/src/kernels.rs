//! Length-n vector kernels and the dense column block that holds Krylov bases.
//!
//! Every public kernel bumps the vector-operation counter by one per length-n
//! pass. Length mismatches panic: they are programming errors, and solver
//! entry points validate dimensions before any kernel runs.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::counters;
use crate::scalar::Scalar;

#[inline]
fn check_len(a: usize, b: usize) {
    assert_eq!(a, b, "vector length mismatch: {a} vs {b}");
}

/// `⟨u, v⟩ = Σ conj(u_i) v_i`, uncounted.
#[inline]
pub(crate) fn dot_raw<S: Scalar>(u: &[S], v: &[S]) -> S {
    check_len(u.len(), v.len());
    let mut acc = [S::zero(); 4];
    let uc = u.chunks_exact(4);
    let vc = v.chunks_exact(4);
    let (ur, vr) = (uc.remainder(), vc.remainder());
    for (a, b) in uc.zip(vc) {
        acc[0] += a[0].conjugate() * b[0];
        acc[1] += a[1].conjugate() * b[1];
        acc[2] += a[2].conjugate() * b[2];
        acc[3] += a[3].conjugate() * b[3];
    }
    let mut tail = S::zero();
    for (a, b) in ur.iter().zip(vr) {
        tail += a.conjugate() * *b;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn dot<S: Scalar>(u: &[S], v: &[S]) -> S {
    counters::add_vecops(1);
    dot_raw(u, v)
}

pub fn norm2<S: Scalar>(v: &[S]) -> f64 {
    counters::add_vecops(1);
    dot_raw(v, v).re().max(0.0).sqrt()
}

/// `y += alpha * x`
pub fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    check_len(x.len(), y.len());
    counters::add_vecops(1);
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// `x *= alpha`
pub fn scal<S: Scalar>(alpha: S, x: &mut [S]) {
    counters::add_vecops(1);
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// `x *= alpha` for a real factor.
pub fn scal_real<S: Scalar>(alpha: f64, x: &mut [S]) {
    counters::add_vecops(1);
    for xi in x.iter_mut() {
        *xi = xi.scale(alpha);
    }
}

/// `y = x + beta * y`, the CG direction update.
pub fn xpby<S: Scalar>(x: &[S], beta: S, y: &mut [S]) {
    check_len(x.len(), y.len());
    counters::add_vecops(1);
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *xi + beta * *yi;
    }
}

/// `a - b`, counted as one operation.
pub fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    check_len(a.len(), b.len());
    counters::add_vecops(1);
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

pub fn all_finite<S: Scalar>(v: &[S]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Column block of length-n vectors, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Block<S> {
    n: usize,
    cols: Vec<Vec<S>>,
}

impl<S: Scalar> Block<S> {
    pub fn new(n: usize) -> Self {
        Block { n, cols: Vec::new() }
    }

    pub fn from_columns(n: usize, cols: Vec<Vec<S>>) -> Self {
        for c in &cols {
            check_len(n, c.len());
        }
        Block { n, cols }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn col(&self, j: usize) -> &[S] {
        &self.cols[j]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [S] {
        &mut self.cols[j]
    }

    pub fn columns(&self) -> &[Vec<S>] {
        &self.cols
    }

    pub fn push(&mut self, v: Vec<S>) {
        check_len(self.n, v.len());
        self.cols.push(v);
    }

    pub fn truncate(&mut self, ncols: usize) {
        self.cols.truncate(ncols);
    }

    pub fn into_columns(self) -> Vec<Vec<S>> {
        self.cols
    }

    /// `V[:, ..coeffs.nrows()] * coeffs` with real coefficients. One counted
    /// axpy per nonzero coefficient.
    pub fn combine(&self, coeffs: &DMatrix<f64>) -> Vec<Vec<S>> {
        assert!(coeffs.nrows() <= self.ncols());
        (0..coeffs.ncols())
            .map(|j| self.combine_vec(coeffs.column(j).as_slice()))
            .collect()
    }

    /// `V[:, ..c.len()] * c` for real coefficients.
    pub fn combine_vec(&self, c: &[f64]) -> Vec<S> {
        let cs: Vec<S> = c.iter().map(|&x| S::from_real(x)).collect();
        let mut out = vec![S::zero(); self.n];
        self.add_combination(&cs, &mut out, 1.0);
        out
    }

    /// `y += sign · V[:, ..c.len()] * c`. Zero coefficients are skipped.
    pub fn add_combination(&self, c: &[S], y: &mut [S], sign: f64) {
        assert!(c.len() <= self.ncols());
        for (i, &ci) in c.iter().enumerate() {
            if ci != S::zero() {
                axpy(ci.scale(sign), &self.cols[i], y);
            }
        }
    }

    /// `V[:, range]ᴴ v`.
    pub fn adjoint_times(&self, range: std::ops::Range<usize>, v: &[S]) -> Vec<S> {
        range.map(|j| dot(&self.cols[j], v)).collect()
    }

    /// Orthogonality defect of the leading `ncols` columns.
    pub fn orthodefect_leading(&self, ncols: usize) -> f64 {
        orthodefect(&self.cols[..ncols])
    }

    pub fn orthodefect(&self) -> f64 {
        orthodefect(&self.cols)
    }
}

/// `‖VᴴV − I‖₂` for a set of columns. Diagnostic only, so it does not touch
/// the vector-op counter.
pub fn orthodefect<S: Scalar>(cols: &[Vec<S>]) -> f64 {
    let c = cols.len();
    if c == 0 {
        return 0.0;
    }
    let rows: Vec<Vec<S>> = (0..c)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| dot_raw(&cols[i], &cols[j])).collect())
        .collect();
    let mut g = DMatrix::<S>::zeros(c, c);
    for i in 0..c {
        for j in 0..=i {
            let mut e = rows[i][j];
            if i == j {
                e -= S::one();
            }
            g[(i, j)] = e;
            g[(j, i)] = e.conjugate();
        }
    }
    if c == 1 {
        return g[(0, 0)].modulus();
    }
    let eig = SymmetricEigen::new(g);
    eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use num_complex::Complex64;

    fn unit(n: usize, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    }

    #[test]
    fn dot_of_orthogonal_units_is_zero() {
        assert_eq!(dot(&unit(5, 0), &unit(5, 1)), 0.0);
    }

    #[test]
    fn norm_of_four_halves() {
        assert_eq!(norm2(&[0.5f64; 4]), 1.0);
    }

    #[test]
    fn dot_matches_naive_loop() {
        let mut g = rng::stream(7, 0);
        let u: Vec<f64> = rng::normal_vector(1003, &mut g);
        let v: Vec<f64> = rng::normal_vector(1003, &mut g);
        let mut naive = 0.0;
        for i in 0..u.len() {
            naive += u[i] * v[i];
        }
        let d = dot(&u, &v);
        assert!((d - naive).abs() <= 1e-14 * naive.abs().max(1.0));
    }

    #[test]
    fn complex_dot_conjugates_left() {
        let u = vec![Complex64::new(0.0, 1.0)];
        let v = vec![Complex64::new(0.0, 1.0)];
        assert_eq!(dot(&u, &v), Complex64::new(1.0, 0.0));
        let w = vec![Complex64::new(1.0, 0.0)];
        assert_eq!(dot(&u, &w), Complex64::new(0.0, -1.0));
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn dot_rejects_mismatched_lengths() {
        dot(&[1.0f64, 2.0], &[1.0]);
    }

    #[test]
    fn axpy_and_counter() {
        let before = counters::snapshot();
        let mut y = vec![1.0, 1.0];
        axpy(2.0, &[1.0, -1.0], &mut y);
        assert_eq!(y, vec![3.0, -1.0]);
        assert_eq!(counters::since(before).vecops, 1);
    }

    #[test]
    fn orthodefect_identity_block() {
        let b = Block::from_columns(4, (0..4).map(|i| unit(4, i)).collect());
        assert_eq!(b.orthodefect(), 0.0);
    }

    #[test]
    fn orthodefect_duplicated_column() {
        let b = Block::from_columns(3, vec![unit(3, 0), unit(3, 0)]);
        assert!((b.orthodefect() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthodefect_after_gram_schmidt() {
        let mut g = rng::stream(11, 0);
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for _ in 0..10 {
            let mut v: Vec<f64> = rng::normal_vector(200, &mut g);
            for _ in 0..2 {
                for q in &cols {
                    let h = dot(q, &v);
                    axpy(-h, q, &mut v);
                }
            }
            let nv = norm2(&v);
            scal_real(1.0 / nv, &mut v);
            cols.push(v);
        }
        assert!(orthodefect(&cols) <= 1e-14);
    }

    #[test]
    fn combine_applies_coefficients() {
        let b = Block::from_columns(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let c = DMatrix::from_row_slice(2, 1, &[2.0, 3.0]);
        assert_eq!(b.combine(&c), vec![vec![2.0, 3.0]]);
    }
}
