//! Even-tempered exponential basis `u_n(x) = x e^{-β_n x}`.
//!
//! The decay rates form a geometric progression `β_n = 10^{p_n}` with the
//! exponents `p_n` spaced uniformly between `d_s` and `d_e`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size and exponent range of a basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub n_basis: usize,
    /// Smallest decimal exponent.
    pub d_s: f64,
    /// Largest decimal exponent.
    pub d_e: f64,
}

impl BasisSpec {
    pub fn new(n_basis: usize, d_s: f64, d_e: f64) -> Self {
        Self { n_basis, d_s, d_e }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_basis < 2 {
            return Err(Error::InvalidBasis(format!(
                "n_basis must be at least 2, got {}",
                self.n_basis
            )));
        }
        if !(self.d_s.is_finite() && self.d_e.is_finite()) {
            return Err(Error::InvalidBasis("exponent range must be finite".into()));
        }
        if self.d_s >= self.d_e {
            return Err(Error::InvalidBasis(format!(
                "d_s ({}) must be smaller than d_e ({})",
                self.d_s, self.d_e
            )));
        }
        Ok(())
    }
}

/// Ascending decay rates of one basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayRateGrid {
    rates: Vec<f64>,
}

impl DecayRateGrid {
    /// Wraps explicit rates, e.g. for small hand-built test pencils.
    pub fn from_rates(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::InvalidBasis("empty rate list".into()));
        }
        if rates.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidBasis("decay rates must be positive and finite".into()));
        }
        if rates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidBasis("decay rates must be strictly increasing".into()));
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// 1-based access, matching the usual `β_1 .. β_N` labelling.
    pub fn rate(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.rates.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.rates.len(),
            });
        }
        Ok(self.rates[n - 1])
    }
}

/// `β_n = 10^{d_s + (n-1)(d_e - d_s)/(N-1)}` for `n = 1..N`.
pub fn build_decay_rates(spec: &BasisSpec) -> Result<DecayRateGrid> {
    spec.validate()?;
    let n = spec.n_basis;
    let span = spec.d_e - spec.d_s;
    let rates = (0..n)
        .map(|k| {
            // Exponent first, then a single power: no compounded products.
            let p = if k + 1 == n {
                spec.d_e
            } else {
                spec.d_s + (k as f64) * span / ((n - 1) as f64)
            };
            10f64.powf(p)
        })
        .collect();
    Ok(DecayRateGrid { rates })
}

/// `x e^{-β_n x}` with 1-based `n`.
pub fn eval_basis_function(grid: &DecayRateGrid, n: usize, x: f64) -> Result<f64> {
    let beta = grid.rate(n)?;
    if x < 0.0 {
        return Err(Error::InvalidArgument(format!("x must be nonnegative, got {x}")));
    }
    Ok(x * (-beta * x).exp())
}

/// `Σ_n c_n x e^{-β_n x}`.
pub fn eval_expansion(grid: &DecayRateGrid, coeffs: &[f64], x: f64) -> Result<f64> {
    if coeffs.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: coeffs.len(),
        });
    }
    if x < 0.0 {
        return Err(Error::InvalidArgument(format!("x must be nonnegative, got {x}")));
    }
    Ok(grid
        .rates
        .iter()
        .zip(coeffs)
        .map(|(&b, &c)| c * x * (-b * x).exp())
        .sum())
}
