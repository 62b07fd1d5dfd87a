//! Apply-only operators.

use rayon::prelude::*;

use crate::counters;
use crate::kernels::{dot_raw, norm2};
use crate::rng;
use crate::scalar::Scalar;

/// A Hermitian matrix seen only through its action on vectors.
///
/// Implementors provide [`apply_into`](LinearOperator::apply_into); callers
/// go through [`apply`](LinearOperator::apply), which checks the length and
/// counts the product.
pub trait LinearOperator<S: Scalar>: Sync {
    fn dim(&self) -> usize;

    /// `y = A x` without bookkeeping. `x` and `y` have length `dim()`.
    fn apply_into(&self, x: &[S], y: &mut [S]);

    fn apply(&self, x: &[S]) -> Vec<S> {
        assert_eq!(
            x.len(),
            self.dim(),
            "operator dimension mismatch: {} vs {}",
            self.dim(),
            x.len()
        );
        counters::add_matvecs(1);
        let mut y = vec![S::zero(); x.len()];
        self.apply_into(x, &mut y);
        y
    }
}

impl<S: Scalar, T: LinearOperator<S> + ?Sized> LinearOperator<S> for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, x: &[S], y: &mut [S]) {
        (**self).apply_into(x, y)
    }
}

impl<S: Scalar, T: LinearOperator<S> + ?Sized + Send> LinearOperator<S> for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, x: &[S], y: &mut [S]) {
        (**self).apply_into(x, y)
    }
}

/// Real diagonal matrix. Acts on real or complex vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagonal {
    pub entries: Vec<f64>,
}

impl Diagonal {
    pub fn new(entries: Vec<f64>) -> Self {
        Diagonal { entries }
    }

    pub fn to_csr<S: Scalar>(&self) -> CsrMatrix<S> {
        let n = self.entries.len();
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: self.entries.iter().map(|&d| S::from_real(d)).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }
}

impl<S: Scalar> LinearOperator<S> for Diagonal {
    fn dim(&self) -> usize {
        self.entries.len()
    }

    fn apply_into(&self, x: &[S], y: &mut [S]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.entries) {
            *yi = xi.scale(*d);
        }
    }
}

/// Square compressed-sparse-row matrix holding every stored entry (both
/// triangles for symmetric input).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<S> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<S>,
}

const PAR_ROWS: usize = 4096;

impl<S: Scalar> CsrMatrix<S> {
    /// Build from coordinate triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, S)]) -> Self {
        let mut sorted: Vec<(usize, usize, S)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<S> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            assert!(i < n && j < n, "triplet ({i},{j}) out of range for n = {n}");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn row_dot(&self, i: usize, x: &[S]) -> S {
        let mut acc = S::zero();
        for p in self.row_ptr[i]..self.row_ptr[i + 1] {
            acc += self.values[p] * x[self.col_idx[p]];
        }
        acc
    }
}

impl<S: Scalar> LinearOperator<S> for CsrMatrix<S> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[S], y: &mut [S]) {
        if self.n >= PAR_ROWS && rayon::current_num_threads() > 1 {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }
}

/// Largest `|⟨Au, v⟩ − ⟨u, Av⟩| / (‖u‖‖v‖)` over `pairs` seeded random
/// probes. Callers compare it against `tol · ‖A‖`.
pub fn symmetry_defect<S: Scalar, A: LinearOperator<S> + ?Sized>(
    op: &A,
    pairs: usize,
    seed: u64,
) -> f64 {
    let n = op.dim();
    let mut g = rng::stream(seed, 0xa11ce);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let u: Vec<S> = rng::normal_vector(n, &mut g);
        let v: Vec<S> = rng::normal_vector(n, &mut g);
        let au = op.apply(&u);
        let av = op.apply(&v);
        let lhs = dot_raw(&au, &v);
        let rhs = dot_raw(&u, &av);
        let d = (lhs - rhs).modulus() / (norm2(&u) * norm2(&v));
        worst = worst.max(d);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::recipes;
    use num_complex::Complex64;

    #[test]
    fn diagonal_scales_unit_vector() {
        let d = Diagonal::new((1..=5).map(|i| i as f64 / 10.0).collect());
        let mut e = vec![0.0f64; 5];
        e[0] = 1.0;
        let y = d.apply(&e);
        assert_eq!(y, vec![0.1, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_maps_to_zero() {
        let d = recipes::example1(50);
        assert!(LinearOperator::<f64>::apply(&d, &[0.0; 50]).iter().all(|&v| v == 0.0));
        let csr: CsrMatrix<Complex64> = d.to_csr();
        assert!(csr
            .apply(&vec![Complex64::new(0.0, 0.0); 50])
            .iter()
            .all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn csr_matches_diagonal_on_ones() {
        let d = recipes::example1(5000);
        let csr: CsrMatrix<f64> = d.to_csr();
        let ones = vec![1.0f64; 5000];
        let a = csr.apply(&ones);
        let b = LinearOperator::<f64>::apply(&d, &ones);
        assert_eq!(a, b);
        assert_eq!(a, d.entries);
    }

    #[test]
    fn csr_and_diagonal_agree_on_random_vectors() {
        let d = recipes::example3(700);
        let csr: CsrMatrix<f64> = d.to_csr();
        let mut g = rng::stream(3, 0);
        for _ in 0..50 {
            let v: Vec<f64> = rng::normal_vector(700, &mut g);
            let a = csr.apply(&v);
            let b = LinearOperator::<f64>::apply(&d, &v);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-15 * y.abs());
            }
        }
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn apply_rejects_wrong_length() {
        let d = Diagonal::new(vec![1.0, 2.0]);
        LinearOperator::<f64>::apply(&d, &[1.0]);
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, 2.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.apply(&[1.0, 1.0]), vec![6.0, 2.0]);
    }

    #[test]
    fn hermitian_csr_passes_symmetry_probe() {
        let z = Complex64::new;
        let a = CsrMatrix::from_triplets(
            3,
            &[
                (0, 0, z(2.0, 0.0)),
                (0, 1, z(1.0, 2.0)),
                (1, 0, z(1.0, -2.0)),
                (1, 1, z(-1.0, 0.0)),
                (2, 2, z(4.0, 0.0)),
                (1, 2, z(0.0, 0.5)),
                (2, 1, z(0.0, -0.5)),
            ],
        );
        let norm_est = 6.0;
        assert!(symmetry_defect(&a, 20, 1) <= 1e-13 * norm_est);
    }

    #[test]
    fn diagonal_passes_symmetry_probe() {
        let d = recipes::example1(5000);
        assert!(symmetry_defect::<f64, _>(&d, 20, 2) <= 1e-13 * d.norm());
    }
}
