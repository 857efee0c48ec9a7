//! Oracle suite behind the `validate` command.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{energy_level, validate_ode_residual, ExactState, HulthenParams};
use crate::basis::{build_decay_rates, BasisSpec};
use crate::config::RunConfig;
use crate::eigensolver::{normalization_sum, ReducedPencil};
use crate::error::Result;
use crate::pencil::{assemble, element_a, element_b, element_o, oracle_element, BConvention, ElementKind};
use crate::quadrature::{hurwitz_integrand, hurwitz_series_x4, integrate_semi_infinite, QuadratureRule};
use crate::scalar::{DoubleDouble, Scalar};
use crate::sweep::{run_sweep, EnergySurface, Precision, SweepConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Largest observed deviation, in the check's own units.
    pub deviation: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<22} max_dev={:.3e} tol={:.3e}  {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.deviation,
            self.tolerance,
            self.detail
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        write!(
            f,
            "{}/{} checks passed",
            self.checks.iter().filter(|c| c.passed()).count(),
            self.checks.len()
        )
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

/// Log-uniform rate pairs in `[1e-4, 1e4]`.
pub fn random_rate_pairs(count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a: f64 = rng.random_range(-4.0..=4.0);
            let b: f64 = rng.random_range(-4.0..=4.0);
            (10f64.powf(a), 10f64.powf(b))
        })
        .collect()
}

/// Largest relative deviation of the closed forms from quadrature, per kind.
pub fn element_deviation(
    pairs: &[(f64, f64)],
    convention: BConvention,
    rule: Option<&QuadratureRule>,
) -> Result<[f64; 3]> {
    let mut worst = [0.0f64; 3];
    for &(bm, bn) in pairs {
        let closed = [element_a(bm, bn)?, element_b(bm, bn, convention)?, element_o(bm, bn)?];
        let kinds = [ElementKind::A, ElementKind::B, ElementKind::O];
        for (k, kind) in kinds.into_iter().enumerate() {
            let q = oracle_element(kind, bm, bn, rule)?;
            worst[k] = worst[k].max(rel(closed[k], q));
        }
    }
    Ok(worst)
}

/// Largest relative deviation of the series from quadrature for log-spaced
/// `γ'` in `[1, 2·10⁴ + 1]`.
pub fn series_deviation(points: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    let top = (2e4f64 + 1.0).ln();
    for i in 0..points {
        let g = (top * i as f64 / (points - 1).max(1) as f64).exp();
        let lead = 24.0 / g.powi(5);
        let s = hurwitz_series_x4(g, 1e-3 * f64::EPSILON * lead)?;
        let rule = QuadratureRule::for_decay_range(g, g);
        let q = integrate_semi_infinite(hurwitz_integrand(4, g), &rule)?;
        worst = worst.max(rel(s, q));
    }
    Ok(worst)
}

/// Largest `|λ ΔE/Δλ - V|` over interior points of one basis size, with the
/// allowed deviation `max(1e-6, 3h²)` at spacing `h`.
pub fn hellmann_feynman_deviation(surface: &EnergySurface, n_basis: usize) -> (f64, f64) {
    let s = surface.series(n_basis);
    let mut worst = 0.0f64;
    let mut allowed = 1e-6f64;
    for i in 1..s.lambda.len().saturating_sub(1) {
        let h = 0.5 * (s.lambda[i + 1] - s.lambda[i - 1]);
        let de = (s.e0[i + 1] - s.e0[i - 1]) / (s.lambda[i + 1] - s.lambda[i - 1]);
        worst = worst.max((s.lambda[i] * de - s.v[i]).abs());
        allowed = allowed.max(3.0 * h * h);
    }
    (worst, allowed)
}

/// Largest relative error of the sweep's `E0` against the exact level.
pub fn analytic_deviation(surface: &EnergySurface, a: f64) -> Result<(f64, usize)> {
    let mut worst = 0.0f64;
    let mut missing = 0;
    for r in &surface.rows {
        let exact = energy_level(&HulthenParams::new(r.lambda, a, 1))?;
        match r.e0 {
            Some(e) if r.has_values() => worst = worst.max(rel(e, exact)),
            _ => missing += 1,
        }
    }
    if missing > 0 {
        worst = f64::INFINITY;
    }
    Ok((worst, missing))
}

fn regression_config(cfg: &RunConfig, lo: f64, hi: f64) -> SweepConfig {
    SweepConfig {
        lambda_min: lo,
        lambda_max: hi,
        lambda_steps: cfg.validate.lambda_points,
        n_list: vec![cfg.validate.n_basis],
        ..cfg.sweep.clone()
    }
}

pub fn run_validation(cfg: &RunConfig) -> Result<Report> {
    let scale = cfg.validate.tolerance_scale;
    let options = cfg.numerics.solver_options();
    let mut checks = Vec::new();

    let pairs = random_rate_pairs(cfg.validate.random_pairs, cfg.validate.seed);
    let [da, db, dv] = element_deviation(&pairs, BConvention::Derived, cfg.numerics.quadrature.as_ref())?;
    checks.push(Check {
        name: "matrix_elements",
        deviation: da.max(db).max(dv),
        tolerance: 1e-10 * scale,
        detail: format!("{} pairs: A {da:.1e}, B {db:.1e}, O {dv:.1e}", pairs.len()),
    });

    checks.push(Check {
        name: "series_vs_quadrature",
        deviation: series_deviation(41)?,
        tolerance: 1e-10 * scale,
        detail: "41 log-spaced γ' in [1, 20001]".into(),
    });

    let spectrum = run_sweep(&regression_config(cfg, 0.55, 5.0), &options)?;
    let (dev, missing) = analytic_deviation(&spectrum, cfg.sweep.a)?;
    checks.push(Check {
        name: "analytic_spectrum",
        deviation: dev,
        tolerance: 1e-8 * scale,
        detail: format!(
            "N = {}, λ in [0.55, 5], B convention {:?}, {missing} unusable rows",
            cfg.validate.n_basis, options.pencil.b_convention
        ),
    });

    checks.push(residual_check(cfg, &spectrum, scale)?);

    checks.push(normalization_check(cfg, scale)?);

    let hf = run_sweep(&regression_config(cfg, 0.55, 2.0), &options)?;
    let (dev, allowed) = hellmann_feynman_deviation(&hf, cfg.validate.n_basis);
    checks.push(Check {
        name: "hellmann_feynman",
        deviation: dev,
        tolerance: allowed * scale,
        detail: format!("N = {}, λ in [0.55, 2]", cfg.validate.n_basis),
    });

    checks.push(ode_check(scale)?);

    Ok(Report { checks })
}

/// Row residuals relative to `‖A + λB‖_∞`.
fn residual_check(cfg: &RunConfig, surface: &EnergySurface, scale: f64) -> Result<Check> {
    let n = cfg.validate.n_basis;
    let options = cfg.numerics.solver_options();
    let grid = build_decay_rates(&BasisSpec::new(n, cfg.sweep.d_s, cfg.sweep.d_e))?;
    let pencil = assemble::<f64>(&grid, &options.pencil)?;
    let mut worst = 0.0f64;
    for r in surface.rows.iter().filter(|r| r.n_basis == n) {
        let norm = pencil.hamiltonian(r.lambda).norm_inf();
        worst = worst.max(r.residual.unwrap_or(f64::INFINITY) / norm);
    }
    Ok(Check {
        name: "eigen_residuals",
        deviation: worst,
        tolerance: options.residual_tol * scale,
        detail: format!("‖(A+λB-μO)c‖ / (‖c‖ ‖A+λB‖), N = {n}, spectrum sweep rows"),
    })
}

fn normalization_check(cfg: &RunConfig, scale: f64) -> Result<Check> {
    let n = cfg.validate.n_basis;
    let grid = build_decay_rates(&BasisSpec::new(n, cfg.sweep.d_s, cfg.sweep.d_e))?;
    let options = cfg.numerics.solver_options();
    let measure = options.pencil.measure;
    let mut worst = 0.0f64;
    let lambdas = [0.6, 1.0, 2.0];
    match options.precision {
        Precision::Double => {
            let p = assemble::<f64>(&grid, &options.pencil)?;
            let r = ReducedPencil::new(&p);
            for l in lambdas {
                let s = r.lowest_state(l)?;
                worst = worst.max((normalization_sum(&s.coeffs, &grid, measure)? - 1.0).abs());
            }
        }
        Precision::Extended => {
            let p = assemble::<DoubleDouble>(&grid, &options.pencil)?;
            let r = ReducedPencil::new(&p);
            for l in lambdas {
                let s = r.lowest_state(DoubleDouble::from_f64(l))?;
                let sum = normalization_sum(&s.coeffs, &grid, measure)?;
                worst = worst.max((sum - DoubleDouble::one()).to_f64().abs());
            }
        }
    }
    Ok(Check {
        name: "normalization",
        deviation: worst,
        tolerance: 1e-10 * scale,
        detail: format!("N = {n}, λ ∈ {{0.6, 1, 2}}, {measure:?} measure"),
    })
}

fn ode_check(scale: f64) -> Result<Check> {
    let xs: Vec<f64> = (0..200).map(|i| 0.1 + 19.9 * i as f64 / 199.0).collect();
    let mut worst = 0.0f64;
    for (lambda, n) in [(1.0, 1), (5.0, 2), (5.0, 3)] {
        let p = HulthenParams::new(lambda, 1.0, n);
        let state = ExactState::<DoubleDouble>::new(&p)?;
        let e = energy_level(&p)?;
        worst = worst.max(validate_ode_residual(|x| state.eval(x), e, lambda, &xs, 1e-4)?);
    }
    Ok(Check {
        name: "analytic_ode",
        deviation: worst,
        tolerance: 1e-8 * scale,
        detail: "exact ψ for (λ, n) = (1, 1), (5, 2), (5, 3), step 1e-4".into(),
    })
}
