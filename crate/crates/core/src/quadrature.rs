//! Integration on `[0, ∞)` plus closed forms for the exponential moments.
//!
//! Two independent routes exist for every integral the pencil needs: a
//! composite Gauss–Legendre rule (the oracle) and closed forms / series (the
//! production path). The potential integrals
//! `∫ x^p e^{-γ'x} / (1 - e^{-x}) dx` expand as `p! Σ_k (γ'+k)^{-(p+1)}`,
//! a Hurwitz zeta value that is summed directly with an Euler–Maclaurin tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre_nodes(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be positive".into()));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureScheme {
    #[default]
    CompositeGaussLegendre,
}

/// Composite Gauss–Legendre rule on `[0, x_max]`.
///
/// Panel widths grow geometrically by `grading` from the origin outwards
/// (`grading = 1` gives uniform panels), so integrands decaying on very
/// different length scales are resolved by the same rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureRule {
    #[serde(default)]
    pub scheme: QuadratureScheme,
    pub panels: usize,
    pub points_per_panel: usize,
    pub x_max: f64,
    #[serde(default = "default_grading")]
    pub grading: f64,
}

fn default_grading() -> f64 {
    1.0
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self {
            scheme: QuadratureScheme::CompositeGaussLegendre,
            panels: 24,
            points_per_panel: 64,
            x_max: 50.0,
            grading: 1.0,
        }
    }
}

impl QuadratureRule {
    pub fn validate(&self) -> Result<()> {
        if self.panels < 1 {
            return Err(Error::InvalidArgument("panels must be at least 1".into()));
        }
        if self.points_per_panel < 2 {
            return Err(Error::InvalidArgument("points_per_panel must be at least 2".into()));
        }
        if !(self.x_max > 0.0 && self.x_max.is_finite()) {
            return Err(Error::InvalidArgument("x_max must be positive".into()));
        }
        if !(self.grading >= 1.0 && self.grading.is_finite()) {
            return Err(Error::InvalidArgument("grading must be >= 1".into()));
        }
        Ok(())
    }

    /// Rule adequate for integrands whose exponential decay rates lie in
    /// `[gamma_min, gamma_max]`: truncation at `max(50, 40/γ_min)` and a first
    /// panel no wider than `1/(4 γ_max)`.
    pub fn for_decay_range(gamma_min: f64, gamma_max: f64) -> Self {
        let x_max = (40.0 / gamma_min).max(50.0);
        let first = 0.25 / gamma_max.max(1.0);
        let grading: f64 = 1.5;
        // Smallest panel count whose first panel is narrow enough.
        let mut panels = 8;
        while x_max * (grading - 1.0) / (grading.powi(panels as i32) - 1.0) > first && panels < 200 {
            panels += 1;
        }
        Self {
            scheme: QuadratureScheme::CompositeGaussLegendre,
            panels,
            points_per_panel: 64,
            x_max,
            grading,
        }
    }

    /// Panel boundaries `0 = x_0 < ... < x_P = x_max`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let p = self.panels;
        let mut b = Vec::with_capacity(p + 1);
        b.push(0.0);
        if self.grading == 1.0 {
            for k in 1..p {
                b.push(self.x_max * k as f64 / p as f64);
            }
        } else {
            let q = self.grading;
            let total = q.powi(p as i32) - 1.0;
            for k in 1..p {
                b.push(self.x_max * (q.powi(k as i32) - 1.0) / total);
            }
        }
        b.push(self.x_max);
        b
    }
}

/// Composite Gauss–Legendre estimate of `∫_0^{x_max} f(x) dx`.
pub fn integrate_semi_infinite(f: impl Fn(f64) -> f64, rule: &QuadratureRule) -> Result<f64> {
    rule.validate()?;
    let (nodes, weights) = gauss_legendre_nodes(rule.points_per_panel)?;
    let bp = rule.breakpoints();
    let mut total = 0.0;
    for w in bp.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut panel = 0.0;
        for (&t, &wt) in nodes.iter().zip(&weights) {
            let x = mid + half * t;
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand { x, value: v });
            }
            panel += wt * v;
        }
        total += half * panel;
    }
    Ok(total)
}

/// `∫_0^∞ x^p e^{-γx} dx = p! / γ^{p+1}`.
pub fn exp_moment<T: Scalar>(p: u32, gamma: T) -> Result<T> {
    if !(gamma > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "moment decay rate must be positive, got {gamma}"
        )));
    }
    Ok(factorial::<T>(p) / gamma.powi(p + 1))
}

fn factorial<T: Scalar>(p: u32) -> T {
    (1..=p).fold(T::one(), |acc, k| acc * T::from_f64(k as f64))
}

/// Bernoulli numbers `B_2 .. B_14` as exact ratios.
const BERNOULLI: [(f64, f64); 7] = [
    (1.0, 6.0),
    (-1.0, 30.0),
    (1.0, 42.0),
    (-1.0, 30.0),
    (5.0, 66.0),
    (-691.0, 2730.0),
    (7.0, 6.0),
];

/// Correction terms kept in the Euler–Maclaurin tail; the next one bounds the remainder.
const EM_TERMS: usize = 6;

/// Result of a Hurwitz series evaluation.
#[derive(Clone, Copy, Debug)]
pub struct SeriesValue<T> {
    pub value: T,
    /// Bound on the truncation error.
    pub tail_bound: T,
    /// Number of terms summed explicitly.
    pub terms: usize,
}

/// `p! Σ_{k≥0} (γ'+k)^{-(p+1)}` for `p ≥ 1`, i.e.
/// `∫_0^∞ x^p e^{-γ'x} / (1 - e^{-x}) dx`.
///
/// The first `K` terms are summed explicitly; the remainder is the
/// Euler–Maclaurin tail `∫_K^∞ f + f(K)/2 - Σ_j B_{2j}/(2j)! f^{(2j-1)}(K)`.
/// For this completely monotone summand the truncation error is bounded by the
/// first omitted correction, and `K` is chosen so that bound is below `tol`.
pub fn hurwitz_series<T: Scalar>(p: u32, gamma: T, tol: T) -> Result<SeriesValue<T>> {
    if p == 0 {
        return Err(Error::InvalidArgument("series power must be at least 1".into()));
    }
    if !(gamma > T::zero()) {
        return Err(Error::InvalidArgument(format!("γ' must be positive, got {gamma}")));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let pf = factorial::<T>(p);
    // |f^{(m)}(t)| = p! (p+1)...(p+m) / (γ'+t)^{p+1+m}
    let remainder_at = |z: T| -> T {
        let m = 2 * EM_TERMS as u32 + 1;
        let (num, den) = BERNOULLI[EM_TERMS];
        let rising = (1..=m).fold(T::one(), |acc, j| acc * T::from_f64((p + j) as f64));
        let fact = factorial::<T>(m + 1);
        (T::from_f64(num) / T::from_f64(den)).abs() / fact * pf * rising / z.powi(p + 1 + m)
    };

    let mut k = 0usize;
    while remainder_at(gamma + T::from_usize(k)) > tol {
        k = if k == 0 { 1 } else { k * 2 };
        if k > 1 << 24 {
            return Err(Error::InvalidArgument("series tolerance unreachable".into()));
        }
    }
    // Bisect down to the smallest K that meets tol.
    if k > 1 {
        let (mut lo, mut hi) = (k / 2, k);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if remainder_at(gamma + T::from_usize(mid)) > tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        k = hi;
    }

    // Explicit part, smallest terms first.
    let mut head = T::zero();
    for j in (0..k).rev() {
        head += T::one() / (gamma + T::from_usize(j)).powi(p + 1);
    }
    let z = gamma + T::from_usize(k);
    let zp = z.powi(p);
    let mut tail = T::one() / (T::from_usize(p as usize) * zp) + T::from_f64(0.5) / (zp * z);
    // -B_{2j}/(2j)! f^{(2j-1)}(K), with f^{(2j-1)} = -(p+1)...(p+2j-1) z^{-(p+2j)}.
    for (j, &(num, den)) in BERNOULLI.iter().take(EM_TERMS).enumerate() {
        let order = 2 * (j as u32 + 1) - 1;
        let rising = (1..=order).fold(T::one(), |acc, i| acc * T::from_f64((p + i) as f64));
        let b = T::from_f64(num) / T::from_f64(den);
        tail += b / factorial::<T>(order + 1) * rising / z.powi(p + 1 + order);
    }
    Ok(SeriesValue {
        value: pf * (head + tail),
        tail_bound: remainder_at(z),
        terms: k,
    })
}

/// `∫_0^∞ x^4 e^{-γ'x} / (1 - e^{-x}) dx = 24 ζ(5, γ')`.
pub fn hurwitz_series_x4(gamma: f64, tol: f64) -> Result<f64> {
    Ok(hurwitz_series(4, gamma, tol)?.value)
}

/// `x^p e^{-γ'x} / (1 - e^{-x})`, continuous at the origin.
pub fn hurwitz_integrand(p: u32, gamma: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        if x == 0.0 {
            // Behaves as x^{p-1} near 0.
            return if p == 1 { 1.0 } else { 0.0 };
        }
        x.powi(p as i32) * (-gamma * x).exp() / -(-x).exp_m1()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::DoubleDouble;

    #[test]
    fn low_orders() {
        let (x, w) = gauss_legendre_nodes(1).unwrap();
        assert_eq!((x, w), (vec![0.0], vec![2.0]));
        let (x, w) = gauss_legendre_nodes(2).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
        assert!(gauss_legendre_nodes(0).is_err());
    }

    #[test]
    fn polynomial_exactness() {
        let (x, w) = gauss_legendre_nodes(5).unwrap();
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-15);
        for order in 1..40 {
            let (x, w) = gauss_legendre_nodes(order).unwrap();
            let deg = 2 * order - 1;
            for d in 0..=deg {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "order {order} degree {d}: {s}");
            }
        }
    }

    #[test]
    fn weights_positive_symmetric_and_sum_to_two() {
        for order in 1..=128 {
            let (x, w) = gauss_legendre_nodes(order).unwrap();
            assert!(w.iter().all(|&w| w > 0.0));
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "order {order}: {s}");
            for i in 0..order {
                assert!((x[i] + x[order - 1 - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn known_integrals() {
        let rule = QuadratureRule::for_decay_range(1.0, 1.0);
        let v = integrate_semi_infinite(|x| (-x).exp(), &rule).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = integrate_semi_infinite(|x| x.powi(4) * (-2.0 * x).exp(), &rule).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
        let v = integrate_semi_infinite(hurwitz_integrand(4, 3.0), &rule).unwrap();
        assert!((v - 0.136_266_123_440_878_23).abs() < 1e-10, "{v}");
    }

    #[test]
    fn non_finite_sample_reports_node() {
        let rule = QuadratureRule::default();
        let err = integrate_semi_infinite(|x| if x > 10.0 { f64::NAN } else { 1.0 }, &rule).unwrap_err();
        match err {
            Error::NonFiniteIntegrand { x, .. } => assert!(x > 10.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rule_validation() {
        let mut r = QuadratureRule::default();
        r.points_per_panel = 1;
        assert!(r.validate().is_err());
        r = QuadratureRule::default();
        r.panels = 0;
        assert!(r.validate().is_err());
        r = QuadratureRule::default();
        r.x_max = 0.0;
        assert!(r.validate().is_err());
    }

    #[test]
    fn moments() {
        assert_eq!(exp_moment(0, 1.0).unwrap(), 1.0);
        assert_eq!(exp_moment(4, 2.0).unwrap(), 0.75);
        assert!((exp_moment(1, 3.0).unwrap() - 1.0 / 9.0).abs() < 1e-16);
        assert!(exp_moment(2, 0.0).is_err());
        assert!(exp_moment(2, -1.0).is_err());
    }

    #[test]
    fn moments_match_quadrature() {
        for &g in &[0.1, 1.0, 10.0] {
            let rule = QuadratureRule::for_decay_range(g, g);
            for p in 0..=4u32 {
                let q = integrate_semi_infinite(|x| x.powi(p as i32) * (-g * x).exp(), &rule).unwrap();
                let c = exp_moment(p, g).unwrap();
                assert!(((q - c) / c).abs() < 1e-12, "p={p} g={g}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn series_reference_values() {
        // 24 ζ(5) and 24 (ζ(5) - 1 - 2^-5), 30-digit references.
        let v = hurwitz_series_x4(1.0, 1e-15).unwrap();
        assert!((v - 24.886_266_123_440_878).abs() < 1e-13, "{v}");
        let v = hurwitz_series_x4(3.0, 1e-15).unwrap();
        assert!((v - 0.136_266_123_440_878_23).abs() < 1e-15, "{v}");
        let v = hurwitz_series_x4(21.0, 1e-22).unwrap();
        assert!((v / 3.390_597_772_639_666_8e-5 - 1.0).abs() < 1e-14, "{v}");
        let v = hurwitz_series_x4(1e4, 1e-32).unwrap();
        assert!((v / 6.001_200_100e-16 - 1.0).abs() < 1e-14, "{v}");
    }

    #[test]
    fn series_rejects_bad_input() {
        assert!(hurwitz_series_x4(1.0, 0.0).is_err());
        assert!(hurwitz_series_x4(0.0, 1e-10).is_err());
        assert!(hurwitz_series::<f64>(0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn series_extended_precision() {
        type Dd = DoubleDouble;
        let s = hurwitz_series(4, Dd::from_f64(1.0), Dd::from_f64(1e-32)).unwrap();
        // 24 ζ(5) = 24.886266123440878231952771675...
        let reference = Dd::new(24.886_266_123_440_88, 0.0);
        let diff = (s.value - reference).to_f64();
        assert!((diff + 1.506_429_364_890_664_3e-15).abs() < 1e-28, "{diff:e}");
        assert!(s.tail_bound.to_f64() < 1e-32);
    }

    #[test]
    fn quadrature_matches_series_for_x2() {
        for &g in &[1.0, 2.5, 40.0] {
            let rule = QuadratureRule::for_decay_range(g.min(1.0), g);
            let q = integrate_semi_infinite(hurwitz_integrand(2, g), &rule).unwrap();
            let s = hurwitz_series(2, g, 1e-18).unwrap().value;
            assert!(((q - s) / s).abs() < 1e-12, "{g}: {q} vs {s}");
        }
    }

    #[test]
    fn integrand_is_continuous_at_origin() {
        let f = hurwitz_integrand(4, 2.0);
        assert_eq!(f(0.0), 0.0);
        assert!(f(1e-8) < 1e-20);
    }
}
