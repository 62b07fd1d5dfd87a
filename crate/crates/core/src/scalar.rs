use nalgebra::ComplexField;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Field the solvers run over: `f64` for real symmetric problems and
/// `Complex64` for complex Hermitian ones.
///
/// Inner products conjugate their left argument, so `⟨v, v⟩` is real and
/// non-negative in both cases.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync + 'static {
    const IS_COMPLEX: bool;

    /// Normal(0,1) sample. Complex values get independent real and
    /// imaginary parts.
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn from_parts(re: f64, im: f64) -> Self;

    fn re(self) -> f64 {
        self.real()
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
}
