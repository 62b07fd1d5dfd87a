//! Reorthogonalization policies for the Lanczos cycles.
//!
//! Seven policies decide when a new Lanczos vector is reorthogonalized and
//! against which columns: every step (`Full`, `KSelective`), at a fixed
//! within-cycle period (`Periodic`, `KPeriodic`), when the estimated loss of
//! orthogonality crosses a threshold (`Partial`, `KPartial`), or never beyond
//! the restart (`RestartOnly`). The `K*` variants and `RestartOnly` only
//! reorthogonalize against the `k` retained Ritz vectors.
//!
//! Independently of the policy, the Lan-DR driver always reorthogonalizes
//! `v_{k+1}` and `v_{k+2}` after a restart and fully reorthogonalizes the
//! first cycle.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernels::{axpy, dot, norm2};
use crate::scalar::Scalar;

/// Breakdown threshold for [`reorthogonalize`], relative to the input norm.
pub const BREAKDOWN_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ReorthPolicy {
    Full,
    KSelective,
    Periodic(usize),
    KPeriodic(usize),
    /// Partial reorthogonalization with threshold `η = ε^exponent`.
    Partial(f64),
    KPartial(f64),
    RestartOnly,
}

/// Columns a reorthogonalization runs against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Span {
    /// The `k` retained Ritz vectors.
    FirstK,
    /// Every column already in the basis.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directive {
    None,
    /// Reorthogonalize the vector just produced.
    Current(Span),
    /// Reorthogonalize the vector just produced and the next one.
    Pair(Span),
}

impl ReorthPolicy {
    pub const NAMES: &'static str =
        "full, k-so, periodic:<freq>, k-periodic:<freq>, pro:<exp>, k-pro:<exp>, restart-only";

    pub fn span(&self) -> Span {
        match self {
            ReorthPolicy::Full | ReorthPolicy::Periodic(_) | ReorthPolicy::Partial(_) => Span::All,
            _ => Span::FirstK,
        }
    }

    /// PRO threshold η, if this is a partial policy.
    pub fn eta(&self) -> Option<f64> {
        match self {
            ReorthPolicy::Partial(e) | ReorthPolicy::KPartial(e) => Some(f64::EPSILON.powf(*e)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            ReorthPolicy::Periodic(0) | ReorthPolicy::KPeriodic(0) => {
                Err(Error::InvalidConfig("reorthogonalization frequency must be >= 1".into()))
            }
            ReorthPolicy::Partial(e) | ReorthPolicy::KPartial(e) if !(e > 0.0 && e < 1.0) => Err(
                Error::InvalidConfig(format!("PRO exponent must lie in (0, 1), got {e}")),
            ),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ReorthPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReorthPolicy::Full => write!(f, "full"),
            ReorthPolicy::KSelective => write!(f, "k-so"),
            ReorthPolicy::Periodic(q) => write!(f, "periodic:{q}"),
            ReorthPolicy::KPeriodic(q) => write!(f, "k-periodic:{q}"),
            ReorthPolicy::Partial(e) => write!(f, "pro:{e}"),
            ReorthPolicy::KPartial(e) => write!(f, "k-pro:{e}"),
            ReorthPolicy::RestartOnly => write!(f, "restart-only"),
        }
    }
}

impl FromStr for ReorthPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (name, param) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let freq = |p: Option<&str>| -> Result<usize, Error> {
            p.ok_or_else(|| Error::InvalidConfig(format!("`{name}` needs a frequency, e.g. {name}:40")))?
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad frequency in `{s}`")))
        };
        let expo = |p: Option<&str>| -> Result<f64, Error> {
            p.map_or(Ok(0.5), |v| {
                v.parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad exponent in `{s}`")))
            })
        };
        let policy = match name {
            "full" => ReorthPolicy::Full,
            "k-so" | "kso" => ReorthPolicy::KSelective,
            "periodic" => ReorthPolicy::Periodic(freq(param)?),
            "k-periodic" => ReorthPolicy::KPeriodic(freq(param)?),
            "pro" => ReorthPolicy::Partial(expo(param)?),
            "k-pro" => ReorthPolicy::KPartial(expo(param)?),
            "restart-only" | "restart" => ReorthPolicy::RestartOnly,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown policy `{s}`; expected one of {}",
                    ReorthPolicy::NAMES
                )))
            }
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl TryFrom<String> for ReorthPolicy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<ReorthPolicy> for String {
    fn from(p: ReorthPolicy) -> String {
        p.to_string()
    }
}

/// Breakdown: the vector lies (numerically) in the span it was
/// orthogonalized against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakdown {
    pub residual_norm: f64,
}

/// Classical Gram–Schmidt against `cols`, with a second pass when the first
/// one removes more than `1 − 1/√2` of the norm. Returns the new norm; the
/// vector is left unnormalized.
pub fn reorthogonalize<S: Scalar>(v: &mut [S], cols: &[Vec<S>]) -> Result<f64, Breakdown> {
    let n0 = norm2(v);
    if cols.is_empty() {
        return Ok(n0);
    }
    let mut before = n0;
    let mut after = n0;
    for _pass in 0..2 {
        let h: Vec<S> = cols.iter().map(|c| dot(c, v)).collect();
        for (c, hj) in cols.iter().zip(h) {
            axpy(-hj, c, v);
        }
        after = norm2(v);
        if after >= before * std::f64::consts::FRAC_1_SQRT_2 {
            break;
        }
        before = after;
    }
    if !(after > BREAKDOWN_TOL * n0) {
        return Err(Breakdown { residual_norm: after });
    }
    Ok(after)
}

/// Reorthogonalize and rescale to unit norm.
pub fn reorthonormalize<S: Scalar>(v: &mut [S], cols: &[Vec<S>]) -> Result<(), Breakdown> {
    let nv = reorthogonalize(v, cols)?;
    crate::kernels::scal_real(1.0 / nv, v);
    Ok(())
}

/// What the policy asks for after within-cycle step `step`, where step 1
/// produced `v_{k+2}`. Periodic counters restart every cycle.
pub fn policy_step(policy: &ReorthPolicy, step: usize, omega: &OmegaState, k: usize) -> Directive {
    match *policy {
        ReorthPolicy::Full => Directive::Current(Span::All),
        ReorthPolicy::KSelective => Directive::Current(Span::FirstK),
        ReorthPolicy::Periodic(f) if step % f == 0 => Directive::Pair(Span::All),
        ReorthPolicy::KPeriodic(f) if step % f == 0 => Directive::Pair(Span::FirstK),
        ReorthPolicy::Partial(_) | ReorthPolicy::KPartial(_) => {
            let eta = policy.eta().unwrap();
            let range = match policy.span() {
                Span::All => 0..omega.latest,
                Span::FirstK => 0..k.min(omega.latest),
            };
            if omega.max_in_row(omega.latest, range) >= eta {
                Directive::Pair(policy.span())
            } else {
                Directive::None
            }
        }
        _ => Directive::None,
    }
}

/// Running estimates of `|⟨v_i, v_j⟩|` for the current cycle's basis,
/// propagated by the partial-reorthogonalization recurrence.
///
/// Entry `(i, j)` estimates the inner product of two distinct basis columns;
/// the diagonal is held at zero because the recurrence tracks deviation from
/// the identity. The update for a new column `j+1` follows from taking the
/// inner product of
/// `β_j v_{j+1} = A v_j − Σ_{l≤j} t_{l,j} v_l`
/// with `v_i` and substituting `A v_i = Σ_p t_{p,i} v_p`:
///
/// `ω_{j+1,i} = (Σ_p t_{p,i} ω_{j,p} − Σ_{l≤j} t_{l,j} ω_{l,i} ± δ) / β_j`
///
/// which covers the tridiagonal tail as well as the arrow (Lan-DR) or dense
/// (Minres-DR) leading block. Roundoff is modeled by
/// `δ = ε√n (‖t_{:,i}‖ + ‖t_{:,j}‖)` added with the sign of the sum, and
/// `ω_{j+1,j} = ε√n ‖t_{:,j}‖ / β_j`. Entries never drop below `ε`.
#[derive(Debug, Clone)]
pub struct OmegaState {
    pub eps: f64,
    noise: f64,
    w: DMatrix<f64>,
    /// Index of the most recent column with estimates.
    pub latest: usize,
}

impl OmegaState {
    pub fn new(n: usize, size: usize) -> Self {
        let eps = f64::EPSILON;
        let mut w = DMatrix::from_element(size, size, eps);
        w.fill_diagonal(0.0);
        OmegaState {
            eps,
            noise: eps * (n as f64).sqrt(),
            w,
            latest: 0,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    /// Every pair among columns `0..=upto` back to the floor.
    pub fn reset_all(&mut self, upto: usize) {
        for i in 0..=upto {
            for j in 0..=upto {
                self.w[(i, j)] = if i == j { 0.0 } else { self.eps };
            }
        }
        self.latest = upto;
    }

    /// Column `row` was reorthogonalized against `range`.
    pub fn reset_row(&mut self, row: usize, range: Range<usize>) {
        for i in range {
            if i != row {
                self.w[(row, i)] = self.eps;
                self.w[(i, row)] = self.eps;
            }
        }
    }

    pub fn max_in_row(&self, row: usize, range: Range<usize>) -> f64 {
        range
            .filter(|&i| i != row)
            .fold(0.0f64, |m, i| m.max(self.w[(row, i)].abs()))
    }

    /// Estimates for column `j + 1` from the filled columns `0..=j` of `t`.
    pub fn update(&mut self, t: &DMatrix<f64>, j: usize) {
        let beta = t[(j + 1, j)];
        let new = j + 1;
        if beta == 0.0 {
            for i in 0..=j {
                self.w[(new, i)] = self.eps;
                self.w[(i, new)] = self.eps;
            }
            self.latest = new;
            return;
        }
        let col_norm = |c: usize| -> f64 { (0..=j + 1).map(|p| t[(p, c)] * t[(p, c)]).sum::<f64>().sqrt() };
        let norm_j = col_norm(j);
        for i in 0..j {
            let mut s = 0.0;
            for p in 0..=j {
                let tp = t[(p, i)];
                if tp != 0.0 {
                    s += tp * self.w[(j, p)];
                }
            }
            for l in 0..=j {
                let tl = t[(l, j)];
                if tl != 0.0 {
                    s -= tl * self.w[(l, i)];
                }
            }
            let delta = self.noise * (col_norm(i) + norm_j);
            let est = (s + delta.copysign(s)) / beta;
            let est = if est.abs() < self.eps { self.eps.copysign(est) } else { est };
            self.w[(new, i)] = est;
            self.w[(i, new)] = est;
        }
        let local = (self.noise * norm_j / beta).max(self.eps);
        self.w[(new, j)] = local;
        self.w[(j, new)] = local;
        self.latest = new;
    }
}

/// One reorthogonalization performed inside a cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReorthEvent {
    pub cycle: usize,
    /// Basis column (0-based) that was reorthogonalized.
    pub column: usize,
    pub span: Span,
    /// Number of columns it was orthogonalized against.
    pub against: usize,
    /// Restart-mandated rather than policy-driven.
    pub forced: bool,
}
