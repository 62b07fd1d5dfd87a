//! Test matrices. Every generator is a pure function of its parameters.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mm::{self, MmMatrix};
use crate::operator::{CsrMatrix, Diagonal, LinearOperator};
use crate::rng;

/// Seed for the indefinite example unless another is given.
pub const EXAMPLE10_SEED: u64 = 2008;

pub const NAMES: &str = "example1, example3, example5, example7, example10, file";

/// `0.1, 0.2, …, 9.9, 10, 11, 12, …`: 100 clustered small eigenvalues
/// followed by unit spacing (`4910` at `n = 5000`).
pub fn example1(n: usize) -> Diagonal {
    Diagonal::new(
        (1..=n)
            .map(|i| {
                if i <= 100 {
                    i as f64 / 10.0
                } else {
                    10.0 + (i - 100) as f64
                }
            })
            .collect(),
    )
}

/// `1, 2, …, 10, 100, 101, …`: ten well separated small eigenvalues
/// (`5089` at `n = 5000`).
pub fn example3(n: usize) -> Diagonal {
    Diagonal::new((1..=n).map(|i| if i <= 10 { i as f64 } else { 89.0 + i as f64 }).collect())
}

/// [`example3`] with the largest entry replaced by `largest`.
pub fn example5(n: usize, largest: f64) -> Diagonal {
    let mut d = example3(n);
    if let Some(last) = d.entries.last_mut() {
        *last = largest;
    }
    d
}

/// [`example3`] at `n = 10000`.
pub fn example7() -> Diagonal {
    example3(10_000)
}

/// Normal(0,1) entries shifted by `shift`: indefinite with a few negative
/// eigenvalues near the origin.
pub fn example10(n: usize, seed: u64, shift: f64) -> Diagonal {
    let z: Vec<f64> = rng::normal_vector(n, &mut rng::stream(seed, 0));
    Diagonal::new(z.into_iter().map(|v| v + shift).collect())
}

fn default_n() -> usize {
    5000
}

fn default_n7() -> usize {
    10_000
}

fn default_n10() -> usize {
    1000
}

fn default_largest() -> f64 {
    5400.0
}

fn default_seed10() -> u64 {
    EXAMPLE10_SEED
}

fn default_shift() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum MatrixRecipe {
    Example1 {
        #[serde(default = "default_n")]
        n: usize,
    },
    Example3 {
        #[serde(default = "default_n")]
        n: usize,
    },
    Example5 {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_largest")]
        largest: f64,
    },
    Example7 {
        #[serde(default = "default_n7")]
        n: usize,
    },
    Example10 {
        #[serde(default = "default_n10")]
        n: usize,
        #[serde(default = "default_seed10")]
        seed: u64,
        #[serde(default = "default_shift")]
        shift: f64,
    },
    /// Matrix Market file.
    File { path: PathBuf },
}

/// A generated operator, real or complex.
#[derive(Debug, Clone)]
pub enum Generated {
    Diagonal(Diagonal),
    Real(CsrMatrix<f64>),
    Complex(CsrMatrix<Complex64>),
}

impl Generated {
    pub fn dim(&self) -> usize {
        match self {
            Generated::Diagonal(d) => d.entries.len(),
            Generated::Real(a) => a.n,
            Generated::Complex(a) => a.n,
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, Generated::Complex(_))
    }

    /// Real view, unless the entries are complex.
    pub fn real(&self) -> Option<&dyn LinearOperator<f64>> {
        match self {
            Generated::Diagonal(d) => Some(d),
            Generated::Real(a) => Some(a),
            Generated::Complex(_) => None,
        }
    }

    /// Complex view (real sparse matrices are converted).
    pub fn into_complex(self) -> Generated {
        match self {
            Generated::Real(a) => Generated::Complex(CsrMatrix {
                n: a.n,
                row_ptr: a.row_ptr,
                col_idx: a.col_idx,
                values: a.values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            }),
            other => other,
        }
    }

    pub fn complex(&self) -> Option<&dyn LinearOperator<Complex64>> {
        match self {
            Generated::Diagonal(d) => Some(d),
            Generated::Complex(a) => Some(a),
            Generated::Real(_) => None,
        }
    }
}

impl MatrixRecipe {
    /// Recipe from a command-line name with optional size and seed.
    pub fn from_name(name: &str, n: Option<usize>, seed: Option<u64>) -> Result<Self> {
        Ok(match name {
            "example1" => MatrixRecipe::Example1 { n: n.unwrap_or(5000) },
            "example3" => MatrixRecipe::Example3 { n: n.unwrap_or(5000) },
            "example5" => MatrixRecipe::Example5 {
                n: n.unwrap_or(5000),
                largest: default_largest(),
            },
            "example7" => MatrixRecipe::Example7 { n: n.unwrap_or(10_000) },
            "example10" => MatrixRecipe::Example10 {
                n: n.unwrap_or(1000),
                seed: seed.unwrap_or(EXAMPLE10_SEED),
                shift: default_shift(),
            },
            other => {
                if let Some(path) = other.strip_prefix("file:") {
                    MatrixRecipe::File { path: path.into() }
                } else {
                    return Err(Error::UnknownRecipe(format!("{other} (known: {NAMES})")));
                }
            }
        })
    }

    /// Dimension without generating the matrix (`None` for files).
    pub fn dim(&self) -> Option<usize> {
        match self {
            MatrixRecipe::Example1 { n }
            | MatrixRecipe::Example3 { n }
            | MatrixRecipe::Example5 { n, .. }
            | MatrixRecipe::Example7 { n }
            | MatrixRecipe::Example10 { n, .. } => Some(*n),
            MatrixRecipe::File { .. } => None,
        }
    }

    pub fn generate(&self) -> Result<Generated> {
        let check = |n: usize| {
            if n == 0 {
                Err(Error::InvalidConfig("matrix dimension must be positive".into()))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            MatrixRecipe::Example1 { n } => {
                check(*n)?;
                Generated::Diagonal(example1(*n))
            }
            MatrixRecipe::Example3 { n } | MatrixRecipe::Example7 { n } => {
                check(*n)?;
                Generated::Diagonal(example3(*n))
            }
            MatrixRecipe::Example5 { n, largest } => {
                check(*n)?;
                Generated::Diagonal(example5(*n, *largest))
            }
            MatrixRecipe::Example10 { n, seed, shift } => {
                check(*n)?;
                Generated::Diagonal(example10(*n, *seed, *shift))
            }
            MatrixRecipe::File { path } => match mm::read_path(path)? {
                MmMatrix::Real(a) => Generated::Real(a),
                MmMatrix::Complex(a) => Generated::Complex(a),
            },
        })
    }
}
