//! Closed-form Hulthén bound states (s-wave), used as the reference for the
//! spectral solver.
//!
//! In `x = r/a` the reduced radial equation is
//! `-½ψ'' - λ e^{-x}/(1 - e^{-x}) ψ = a²E ψ` with levels
//! `E_n = -(2λ - n²)² / (8 n² a²)`.

use serde::{Deserialize, Serialize};

use crate::eigensolver::pi;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HulthenParams {
    pub lambda: f64,
    /// Screening length.
    pub a: f64,
    /// Level index, starting at 1.
    pub n: u32,
}

impl HulthenParams {
    pub fn new(lambda: f64, a: f64, n: u32) -> Self {
        Self { lambda, a, n }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("λ must be positive, got {}", self.lambda)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidArgument(format!("a must be positive, got {}", self.a)));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("level index starts at 1".into()));
        }
        Ok(())
    }

    fn n2(&self) -> f64 {
        let n = self.n as f64;
        n * n
    }
}

/// `E_n = -(2λ - n²)² / (8 n² a²)`; zero exactly at threshold.
pub fn energy_level(params: &HulthenParams) -> Result<f64> {
    params.validate()?;
    let n2 = params.n2();
    let d = 2.0 * params.lambda - n2;
    if d < 0.0 {
        return Err(Error::NoBoundState { lowest: 0.0 });
    }
    Ok(-(d * d) / (8.0 * n2 * params.a * params.a))
}

/// `λ_c(n) = n²/2`, below which level `n` is unbound.
pub fn critical_coupling(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("level index starts at 1".into()));
    }
    let n = n as f64;
    Ok(n * n / 2.0)
}

/// Number of bound levels: the largest `n` with `n² < 2λ`.
pub fn n_max(lambda: f64) -> Result<u32> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
    }
    let mut n = (2.0 * lambda).sqrt().floor() as u32;
    while n > 0 && ((n as f64) * (n as f64)) >= 2.0 * lambda {
        n -= 1;
    }
    while (((n + 1) as f64) * ((n + 1) as f64)) < 2.0 * lambda {
        n += 1;
    }
    Ok(n)
}

/// Decay constant of level `n` in units of `1/a`: `ā = a√(-2E) = (2λ - n²)/(2n)`.
pub fn decay_parameter(params: &HulthenParams) -> Result<f64> {
    energy_level(params)?;
    let n = params.n as f64;
    Ok((2.0 * params.lambda - params.n2()) / (2.0 * n))
}

/// Exact level-`n` state `ψ(x) = N e^{-āx}(1 - e^{-x}) ₂F₁(2ā+1+n, 1-n; 2ā+1; e^{-x})`.
///
/// The hypergeometric series terminates after `n` terms. `N` is fixed
/// numerically so that `4π ∫ ψ² dx = 1` (ψ is the reduced radial function);
/// the textbook prefactor is kept alongside for comparison.
#[derive(Clone, Debug)]
pub struct ExactState<T> {
    pub params: HulthenParams,
    pub abar: T,
    /// Terminating series coefficients `t_k`, `k = 0..n-1`.
    pub series: Vec<T>,
    pub norm: T,
    /// `√(ā(ā+n)(2ā+n)) Γ(2ā+n) / (Γ(2ā+1) Γ(n))`.
    pub printed_norm: T,
}

impl<T: Scalar> ExactState<T> {
    pub fn new(params: &HulthenParams) -> Result<Self> {
        let abar_f = decay_parameter(params)?;
        if abar_f <= 0.0 {
            return Err(Error::NoBoundState { lowest: 0.0 });
        }
        let n = params.n as usize;
        let nt = T::from_usize(n);
        let two_a = T::from_f64(2.0 * params.lambda) - nt * nt;
        let abar = two_a / (T::from_f64(2.0) * nt);
        let c = T::from_f64(2.0) * abar + T::one();

        let mut series = Vec::with_capacity(n);
        let mut t = T::one();
        for k in 0..n {
            series.push(t);
            let kt = T::from_usize(k);
            // (1 - n + k) vanishes at k = n - 1, terminating the series.
            t = t * (c + nt + kt) * (T::one() - nt + kt) / ((c + kt) * (kt + T::one()));
        }

        // 4π ∫ e^{-sx}(1 - e^{-x})² dx = 4π · 2 / (s(s+1)(s+2)).
        let mut s_norm = T::zero();
        for (j, &tj) in series.iter().enumerate() {
            for (k, &tk) in series.iter().enumerate() {
                let s = T::from_f64(2.0) * abar + T::from_usize(j + k);
                s_norm += tj * tk * T::from_f64(2.0) / (s * (s + T::one()) * (s + T::from_f64(2.0)));
            }
        }
        let norm = (T::from_f64(4.0) * pi::<T>() * s_norm).sqrt().recip();

        let mut poch = T::one();
        for k in 0..n.saturating_sub(1) {
            poch *= c + T::from_usize(k);
        }
        let fact: T = (1..n).fold(T::one(), |acc, k| acc * T::from_usize(k));
        let printed_norm = (abar * (abar + nt) * (T::from_f64(2.0) * abar + nt)).sqrt() * poch / fact;

        Ok(Self {
            params: *params,
            abar,
            series,
            norm,
            printed_norm,
        })
    }

    /// Textbook prefactor divided by the numerical one.
    pub fn norm_ratio(&self) -> T {
        self.printed_norm / self.norm
    }

    pub fn eval(&self, x: T) -> Result<T> {
        if x < T::zero() {
            return Err(Error::InvalidArgument(format!("x must be nonnegative, got {x}")));
        }
        let z = (-x).exp();
        let mut poly = T::zero();
        for &t in self.series.iter().rev() {
            poly = poly * z + t;
        }
        Ok(self.norm * (-(self.abar * x)).exp() * (T::one() - z) * poly)
    }
}

/// Numerically normalized exact state at one point.
pub fn exact_wavefunction(params: &HulthenParams, x: f64) -> Result<f64> {
    ExactState::<f64>::new(params)?.eval(x)
}

/// Central second-difference weights of order 8 for offsets `0..=4`, as exact
/// ratios so they sum to zero at any working precision.
const D2_WEIGHTS: [(f64, f64); 5] = [(-205.0, 72.0), (8.0, 5.0), (-1.0, 5.0), (8.0, 315.0), (-1.0, 560.0)];

/// Maximum over `xs` of `|-½ψ'' - λψ/(eˣ - 1) - a²E ψ|`, divided by `max |ψ(xs)|`.
///
/// `ψ''` uses an eighth-order central difference with spacing `step`;
/// evaluating in [`DoubleDouble`](crate::DoubleDouble) keeps the roundoff of the
/// difference quotient negligible even for small steps.
pub fn validate_ode_residual<T: Scalar>(
    psi: impl Fn(T) -> Result<T>,
    scaled_energy: f64,
    lambda: f64,
    xs: &[f64],
    step: f64,
) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("no sample points".into()));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let h = T::from_f64(step);
    let e = T::from_f64(scaled_energy);
    let lam = T::from_f64(lambda);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for &x in xs {
        if x - 4.0 * step <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "stencil at x = {x} with step {step} reaches the origin"
            )));
        }
        if x + step == x {
            return Err(Error::InvalidArgument(format!("step {step} underflows at x = {x}")));
        }
        let xt = T::from_f64(x);
        let f0 = psi(xt)?;
        let weight = |k: usize| T::from_f64(D2_WEIGHTS[k].0) / T::from_f64(D2_WEIGHTS[k].1);
        let mut d2 = weight(0) * f0;
        for k in 1..D2_WEIGHTS.len() {
            let off = h * T::from_usize(k);
            d2 += weight(k) * (psi(xt + off)? + psi(xt - off)?);
        }
        d2 /= h * h;
        let pot = lam / (xt.exp() - T::one());
        let r = -(T::from_f64(0.5) * d2) - pot * f0 - e * f0;
        worst = worst.max(r.abs().to_f64());
        scale = scale.max(f0.abs().to_f64());
    }
    if scale == 0.0 {
        return Err(Error::InvalidArgument("ψ vanishes at every sample".into()));
    }
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_semi_infinite, QuadratureRule};
    use crate::scalar::DoubleDouble;

    type Dd = DoubleDouble;

    fn samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn energy_levels() {
        assert_eq!(energy_level(&HulthenParams::new(1.0, 1.0, 1)).unwrap(), -0.125);
        assert_eq!(energy_level(&HulthenParams::new(0.5, 1.0, 1)).unwrap(), 0.0);
        assert_eq!(energy_level(&HulthenParams::new(5.0, 1.0, 2)).unwrap(), -1.125);
        assert_eq!(energy_level(&HulthenParams::new(1.0, 2.0, 1)).unwrap(), -0.125 / 4.0);
        assert!(matches!(
            energy_level(&HulthenParams::new(0.4, 1.0, 1)),
            Err(Error::NoBoundState { .. })
        ));
    }

    #[test]
    fn quadratic_onset() {
        for eps in [1e-1, 1e-3, 1e-6] {
            for n in 1..=3u32 {
                let lc = critical_coupling(n).unwrap();
                let e = energy_level(&HulthenParams::new(lc + eps, 1.0, n)).unwrap();
                let want = -eps * eps / (2.0 * (n * n) as f64);
                assert!(((e - want) / want).abs() < 1e-9, "n={n} eps={eps}");
            }
        }
    }

    #[test]
    fn couplings_and_counts() {
        assert_eq!(critical_coupling(1).unwrap(), 0.5);
        assert_eq!(critical_coupling(2).unwrap(), 2.0);
        assert_eq!(critical_coupling(3).unwrap(), 4.5);
        assert_eq!(n_max(1.0).unwrap(), 1);
        assert_eq!(n_max(5.0).unwrap(), 3);
        assert_eq!(n_max(0.4).unwrap(), 0);
        assert_eq!(n_max(0.5).unwrap(), 0);
        assert_eq!(n_max(2.0).unwrap(), 1);
    }

    #[test]
    fn wavefunction_boundary_and_shape() {
        let p = HulthenParams::new(1.0, 1.0, 1);
        assert_eq!(exact_wavefunction(&p, 0.0).unwrap(), 0.0);
        let s = ExactState::<f64>::new(&p).unwrap();
        assert_eq!(s.series, vec![1.0]);
        let x: f64 = 1.7;
        let want = s.norm * (-0.5 * x).exp() * (1.0 - (-x).exp());
        assert!((s.eval(x).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn ground_state_satisfies_ode() {
        let p = HulthenParams::new(1.0, 1.0, 1);
        let s = ExactState::<Dd>::new(&p).unwrap();
        let e = energy_level(&p).unwrap();
        let xs = samples(0.1, 20.0, 200);
        let r = validate_ode_residual(|x| s.eval(x), e, 1.0, &xs, 1e-4).unwrap();
        assert!(r < 1e-10, "{r:e}");
        let r = validate_ode_residual(|x| s.eval(x), e + 0.01, 1.0, &xs, 1e-4).unwrap();
        assert!(r > 1e-3, "{r:e}");
    }

    #[test]
    fn excited_states_satisfy_ode() {
        for (lambda, n) in [(5.0, 2), (5.0, 3), (12.0, 4)] {
            let p = HulthenParams::new(lambda, 1.0, n);
            let s = ExactState::<Dd>::new(&p).unwrap();
            let e = energy_level(&p).unwrap();
            let r = validate_ode_residual(|x| s.eval(x), e, lambda, &samples(0.2, 15.0, 60), 1e-3).unwrap();
            assert!(r < 1e-10, "λ={lambda} n={n}: {r:e}");
        }
    }

    #[test]
    fn double_precision_residual_with_coarse_step() {
        let p = HulthenParams::new(1.0, 1.0, 1);
        let s = ExactState::<f64>::new(&p).unwrap();
        let r = validate_ode_residual(|x| s.eval(x), -0.125, 1.0, &samples(0.1, 20.0, 100), 1e-2).unwrap();
        assert!(r < 1e-8, "{r:e}");
    }

    #[test]
    fn residual_rejects_degenerate_input() {
        let xs = samples(0.5, 2.0, 5);
        assert!(validate_ode_residual(|_: f64| Ok(0.0), -0.1, 1.0, &xs, 1e-3).is_err());
        assert!(validate_ode_residual(|x: f64| Ok(x), -0.1, 1.0, &xs, 0.0).is_err());
        assert!(validate_ode_residual(|x: f64| Ok(x), -0.1, 1.0, &[], 1e-3).is_err());
    }

    #[test]
    fn normalized_under_radial_measure() {
        for (lambda, n) in [(1.0, 1), (0.6, 1), (5.0, 2)] {
            let s = ExactState::<f64>::new(&HulthenParams::new(lambda, 1.0, n)).unwrap();
            let decay = 2.0 * s.abar;
            let rule = QuadratureRule::for_decay_range(decay, decay + 2.0);
            let q = integrate_semi_infinite(|x| s.eval(x).unwrap().powi(2), &rule).unwrap();
            assert!((4.0 * std::f64::consts::PI * q - 1.0).abs() < 1e-8, "λ={lambda} n={n}: {q}");
        }
    }

    #[test]
    fn printed_prefactor_ratio_for_ground_state() {
        // For n = 1 the printed prefactor gives ∫ψ² dx = 1/2, i.e. 4π∫ψ² dx = 2π.
        let s = ExactState::<f64>::new(&HulthenParams::new(1.0, 1.0, 1)).unwrap();
        let ratio = s.norm_ratio();
        assert!((ratio * ratio - 2.0 * std::f64::consts::PI).abs() < 1e-12, "{ratio}");
    }

    #[test]
    fn asymptotic_decay() {
        let p = HulthenParams::new(1.0, 1.0, 1);
        let s = ExactState::<f64>::new(&p).unwrap();
        let slope = (s.eval(25.0).unwrap().ln() - s.eval(15.0).unwrap().ln()) / 10.0;
        assert!((slope + 0.5).abs() < 1e-4, "{slope}");
    }
}
