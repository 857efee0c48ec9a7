//! Finite-size scaling in the basis size `N`.
//!
//! Three-point shifted Δ functions of `E0` and `V = λ ∂E/∂λ`, the
//! phenomenological exponent `Γ_α = Δ_E / (Δ_E - Δ_V)`, crossings of adjacent
//! Γ curves, `1/N` extrapolation and data collapse.
//!
//! The threshold energy is `E_th = 0`: the exact ground level vanishes at
//! `λ_c`, so no shift is subtracted from `E0`.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sweep::EnergySurface;

/// Basis sizes `N < N' < N''` feeding one three-point Δ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub n: [usize; 3],
}

impl Triple {
    pub fn new(n0: usize, n1: usize, n2: usize) -> Result<Self> {
        if !(0 < n0 && n0 < n1 && n1 < n2) {
            return Err(Error::InvalidArgument(format!(
                "triple must be strictly ascending, got ({n0}, {n1}, {n2})"
            )));
        }
        Ok(Self { n: [n0, n1, n2] })
    }

    pub fn label(&self) -> String {
        format!("{}-{}-{}", self.n[0], self.n[1], self.n[2])
    }
}

/// `(N_i, N_{i+1}, N_{i+2})` for every window of the list.
pub fn consecutive_triples(n_list: &[usize]) -> Vec<Triple> {
    n_list
        .windows(3)
        .filter_map(|w| Triple::new(w[0], w[1], w[2]).ok())
        .collect()
}

/// `ln((f'' - f')/(f' - f)) / ln(N'/N)`.
pub fn shifted_delta(values: [f64; 3], triple: &Triple) -> Result<f64> {
    let [f0, f1, f2] = values;
    let num = f2 - f1;
    let den = f1 - f0;
    if den == 0.0 || num == 0.0 {
        return Err(Error::Undefined(format!("zero difference for triple {}", triple.label())));
    }
    let ratio = num / den;
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Undefined(format!(
            "difference ratio {ratio:e} is not positive for triple {}",
            triple.label()
        )));
    }
    let [n0, n1, _] = triple.n;
    Ok(ratio.ln() / (n1 as f64 / n0 as f64).ln())
}

/// `Δ_E / (Δ_E - Δ_V)`.
pub fn gamma_from_deltas(delta_e: f64, delta_v: f64) -> Result<f64> {
    let den = delta_e - delta_v;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Undefined("Γ denominator vanishes".into()));
    }
    Ok(delta_e / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    Energy,
    Potential,
}

fn grid_values(surface: &EnergySurface, lambda: f64, triple: &Triple, column: Column) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (slot, &n) in out.iter_mut().zip(&triple.n) {
        let row = surface
            .get(lambda, n)
            .filter(|r| r.has_values())
            .ok_or_else(|| Error::Undefined(format!("no usable row for λ = {lambda}, N = {n}")))?;
        let v = match column {
            Column::Energy => row.e0,
            Column::Potential => row.v,
        };
        *slot = v.unwrap_or(f64::NAN);
    }
    Ok(out)
}

/// Δ_E at a λ grid point of the surface.
pub fn delta_e(surface: &EnergySurface, lambda: f64, triple: &Triple) -> Result<f64> {
    shifted_delta(grid_values(surface, lambda, triple, Column::Energy)?, triple)
}

/// Δ_V at a λ grid point of the surface.
pub fn delta_v(surface: &EnergySurface, lambda: f64, triple: &Triple) -> Result<f64> {
    shifted_delta(grid_values(surface, lambda, triple, Column::Potential)?, triple)
}

/// Γ_α at a λ grid point of the surface.
pub fn gamma_alpha(surface: &EnergySurface, lambda: f64, triple: &Triple) -> Result<f64> {
    gamma_from_deltas(delta_e(surface, lambda, triple)?, delta_v(surface, lambda, triple)?)
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson
/// slopes with the Fritsch–Butland harmonic mean).
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::LengthMismatch { expected: n, got: y.len() });
        }
        if n < 2 {
            return Err(Error::InvalidArgument("interpolation needs at least two points".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("abscissas must be strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = s[0];
            d[1] = s[0];
            return Ok(Self { x, y, d });
        }
        for i in 1..n - 1 {
            if s[i - 1] * s[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
            }
        }
        d[0] = end_slope(h[0], h[1], s[0], s[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
        Ok(Self { x, y, d })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return Err(Error::InvalidArgument(format!("{t} outside interpolation range [{lo}, {hi}]")));
        }
        let i = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            k => (k - 1).min(self.x.len() - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        Ok(h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1])
    }
}

/// Three-point end slope, limited to keep the end interval monotone.
fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 <= 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

/// Per-N interpolants of `E0(λ)` and `V(λ)` for evaluation between grid points.
#[derive(Clone, Debug)]
pub struct SurfaceInterpolant {
    ns: Vec<usize>,
    energy: Vec<MonotoneCubic>,
    potential: Vec<MonotoneCubic>,
}

impl SurfaceInterpolant {
    pub fn new(surface: &EnergySurface) -> Result<Self> {
        let ns = surface.n_values();
        let mut energy = Vec::with_capacity(ns.len());
        let mut potential = Vec::with_capacity(ns.len());
        for &n in &ns {
            let s = surface.series(n);
            energy.push(MonotoneCubic::new(s.lambda.clone(), s.e0)?);
            potential.push(MonotoneCubic::new(s.lambda, s.v)?);
        }
        Ok(Self { ns, energy, potential })
    }

    fn index(&self, n: usize) -> Result<usize> {
        self.ns
            .binary_search(&n)
            .map_err(|_| Error::Undefined(format!("basis size {n} missing from the surface")))
    }

    pub fn value(&self, column: Column, n: usize, lambda: f64) -> Result<f64> {
        let i = self.index(n)?;
        match column {
            Column::Energy => self.energy[i].eval(lambda),
            Column::Potential => self.potential[i].eval(lambda),
        }
    }

    pub fn delta(&self, column: Column, lambda: f64, triple: &Triple) -> Result<f64> {
        let mut f = [0.0; 3];
        for (slot, &n) in f.iter_mut().zip(&triple.n) {
            *slot = self.value(column, n, lambda)?;
        }
        shifted_delta(f, triple)
    }

    pub fn gamma(&self, lambda: f64, triple: &Triple) -> Result<f64> {
        gamma_from_deltas(
            self.delta(Column::Energy, lambda, triple)?,
            self.delta(Column::Potential, lambda, triple)?,
        )
    }
}

/// Search interval and tolerance for crossings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl Default for Bracket {
    fn default() -> Self {
        Self {
            lo: 0.49,
            hi: 0.55,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    pub lambda: f64,
    pub alpha: f64,
    /// Number of sign changes seen while scanning the bracket.
    pub sign_changes: usize,
}

/// Bisection on a sign change of `g`, which may be undefined at some points.
fn bisect(g: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut ga: f64, tol: f64) -> Result<f64> {
    while b - a > tol {
        let m = 0.5 * (a + b);
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Crossing of `f` and `h` inside `bracket`, scanning at `samples` and then
/// bisecting. With several sign changes the one nearest `target` wins.
pub fn find_crossing_fn(
    f: &dyn Fn(f64) -> Result<f64>,
    h: &dyn Fn(f64) -> Result<f64>,
    samples: &[f64],
    bracket: &Bracket,
    target: f64,
) -> Result<Crossing> {
    let g = |x: f64| -> Result<f64> { Ok(f(x)? - h(x)?) };
    let mut pts: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|&x| x >= bracket.lo && x <= bracket.hi)
        .collect();
    if pts.first() != Some(&bracket.lo) {
        pts.insert(0, bracket.lo);
    }
    if pts.last() != Some(&bracket.hi) {
        pts.push(bracket.hi);
    }
    let values: Vec<Option<f64>> = pts.iter().map(|&x| g(x).ok().filter(|v| v.is_finite())).collect();
    let defined: Vec<(f64, f64)> = pts
        .iter()
        .zip(&values)
        .filter_map(|(&x, v)| v.map(|v| (x, v)))
        .collect();
    let mut roots = Vec::new();
    let degenerate = defined.iter().all(|&(_, v)| v == 0.0);
    for w in defined.windows(2).filter(|_| !degenerate) {
        let ((a, ga), (b, gb)) = (w[0], w[1]);
        if ga == 0.0 {
            roots.push(a);
        } else if ga * gb < 0.0 {
            if let Ok(r) = bisect(&g, a, b, ga, bracket.tol) {
                roots.push(r);
            }
        }
    }
    if let Some(&(x, gx)) = defined.last() {
        if gx == 0.0 && !degenerate {
            roots.push(x);
        }
    }
    roots.dedup();
    if roots.is_empty() {
        let at = |x: f64| g(x).unwrap_or(f64::NAN);
        return Err(Error::Bracket {
            lo: bracket.lo,
            hi: bracket.hi,
            g_lo: at(bracket.lo),
            g_hi: at(bracket.hi),
        });
    }
    let lambda = roots
        .iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .unwrap_or(roots[0]);
    if roots.len() > 1 {
        warn!(
            "{} crossings in [{}, {}]; keeping λ = {lambda:.10}",
            roots.len(),
            bracket.lo,
            bracket.hi
        );
    }
    let alpha = 0.5 * (f(lambda)? + h(lambda)?);
    Ok(Crossing {
        lambda,
        alpha,
        sign_changes: roots.len(),
    })
}

/// Crossing of the Γ curves of two triples.
pub fn find_crossing(
    interp: &SurfaceInterpolant,
    samples: &[f64],
    a: &Triple,
    b: &Triple,
    bracket: &Bracket,
) -> Result<Crossing> {
    find_crossing_fn(
        &|x| interp.gamma(x, a),
        &|x| interp.gamma(x, b),
        samples,
        bracket,
        0.5,
    )
}

/// `ν_N = -α_N / Δ_E(λ_N)`, from `E(λ_c, N) ∼ N^{-α/ν}`.
pub fn nu_from(alpha: f64, delta_e: f64) -> Result<f64> {
    if delta_e == 0.0 || !delta_e.is_finite() {
        return Err(Error::Undefined("Δ_E vanishes at the crossing".into()));
    }
    Ok(-alpha / delta_e)
}

pub fn estimate_nu(interp: &SurfaceInterpolant, crossing: &Crossing, triple: &Triple) -> Result<f64> {
    nu_from(crossing.alpha, interp.delta(Column::Energy, crossing.lambda, triple)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    /// `v∞`, the intercept at `1/N = 0`.
    pub value: f64,
    pub slope: f64,
    /// Root-mean-square fit residual.
    pub residual: f64,
}

/// Least-squares line `v = v∞ + s / N`.
pub fn extrapolate(points: &[(f64, f64)]) -> Result<Extrapolation> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "extrapolation needs at least 2 points, got {}",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(n, _)| 1.0 / n).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all points share one N".into()));
    }
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let value = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(points)
        .map(|(x, p)| (p.1 - value - slope * x).powi(2))
        .sum();
    Ok(Extrapolation {
        value,
        slope,
        residual: (ss / m).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossingRecord {
    pub pair: String,
    /// Effective size used for extrapolation: the smallest `N` of the first triple.
    pub n_eff: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub nu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalEstimate {
    pub crossings: Vec<CrossingRecord>,
    /// Pairs whose crossing could not be located, with the reason.
    pub failures: Vec<(String, String)>,
    pub lambda_c: Option<Extrapolation>,
    pub alpha: Option<Extrapolation>,
    pub nu: Option<Extrapolation>,
}

/// Pair label, effective size, and the crossing with its ν estimate.
type PairOutcome = (String, usize, Result<(Crossing, Result<f64>)>);

/// Crosses each pair of adjacent triples and extrapolates the sequences in `1/N`.
pub fn analyze(surface: &EnergySurface, bracket: &Bracket) -> Result<CriticalEstimate> {
    let interp = SurfaceInterpolant::new(surface)?;
    let ns = surface.n_values();
    let triples = consecutive_triples(&ns);
    let mut samples: Vec<f64> = surface.rows.iter().map(|r| r.lambda).collect();
    samples.sort_by(f64::total_cmp);
    samples.dedup();
    let results: Vec<PairOutcome> = triples
        .par_windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let pair = format!("{}|{}", a.label(), b.label());
            let r = find_crossing(&interp, &samples, a, b, bracket).map(|c| {
                let nu = estimate_nu(&interp, &c, a);
                (c, nu)
            });
            (pair, a.n[0], r)
        })
        .collect();
    let mut crossings = Vec::new();
    let mut failures = Vec::new();
    for (pair, n_eff, r) in results {
        match r {
            Ok((c, nu)) => crossings.push(CrossingRecord {
                pair,
                n_eff,
                lambda: c.lambda,
                alpha: c.alpha,
                nu: nu.ok(),
            }),
            Err(e) => failures.push((pair, e.to_string())),
        }
    }
    let fit = |pts: Vec<(f64, f64)>| extrapolate(&pts).ok();
    let lambda_c = fit(crossings.iter().map(|c| (c.n_eff as f64, c.lambda)).collect());
    let alpha = fit(crossings.iter().map(|c| (c.n_eff as f64, c.alpha)).collect());
    let nu = fit(
        crossings
            .iter()
            .filter_map(|c| c.nu.map(|v| (c.n_eff as f64, v)))
            .collect(),
    );
    Ok(CriticalEstimate {
        crossings,
        failures,
        lambda_c,
        alpha,
        nu,
    })
}

/// Sign of the exponents in the collapse variables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseSign {
    /// `x = (λ-λ_c) N^{-1/ν}`, `y = E N^{-α/ν}`.
    #[default]
    Printed,
    /// `x = (λ-λ_c) N^{1/ν}`, `y = E N^{α/ν}`.
    Standard,
}

impl CollapseSign {
    fn factor(self) -> f64 {
        match self {
            CollapseSign::Printed => -1.0,
            CollapseSign::Standard => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapsePoint {
    pub n_basis: usize,
    pub lambda: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Collapse {
    pub points: Vec<CollapsePoint>,
    /// RMS spread across N at matched `x`, divided by the `y` range.
    pub spread: f64,
}

/// Number of abscissas at which the curves are compared.
const SPREAD_SAMPLES: usize = 256;

/// Scaled curves for every usable row with `λ` in `window`.
pub fn data_collapse(
    surface: &EnergySurface,
    lambda_c: f64,
    alpha: f64,
    nu: f64,
    window: (f64, f64),
    sign: CollapseSign,
) -> Result<Collapse> {
    if !(nu != 0.0 && nu.is_finite() && alpha.is_finite() && lambda_c.is_finite()) {
        return Err(Error::InvalidArgument("collapse exponents must be finite with ν ≠ 0".into()));
    }
    let s = sign.factor();
    let mut points = Vec::new();
    let mut curves: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for n in surface.n_values() {
        let series = surface.series(n);
        let nf = n as f64;
        let sx = nf.powf(s / nu);
        let sy = nf.powf(s * alpha / nu);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (i, &l) in series.lambda.iter().enumerate() {
            if l < window.0 || l > window.1 {
                continue;
            }
            let p = CollapsePoint {
                n_basis: n,
                lambda: l,
                x: (l - lambda_c) * sx,
                y: series.e0[i] * sy,
            };
            xs.push(p.x);
            ys.push(p.y);
            points.push(p);
        }
        if !xs.is_empty() {
            curves.push((xs, ys));
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "collapse window [{}, {}] contains no usable rows",
            window.0, window.1
        )));
    }
    Ok(Collapse {
        spread: collapse_spread(&curves)?,
        points,
    })
}

fn collapse_spread(curves: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    if curves.len() < 2 {
        return Ok(0.0);
    }
    let ymin = curves.iter().flat_map(|c| c.1.iter()).copied().fold(f64::INFINITY, f64::min);
    let ymax = curves.iter().flat_map(|c| c.1.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
    let range = ymax - ymin;
    if range == 0.0 {
        return Ok(0.0);
    }
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut interps = Vec::with_capacity(curves.len());
    for (xs, ys) in curves {
        if xs.len() < 2 {
            return Err(Error::InvalidArgument("each collapse curve needs two points".into()));
        }
        let m = MonotoneCubic::new(xs.clone(), ys.clone())?;
        let (a, b) = m.range();
        lo = lo.max(a);
        hi = hi.min(b);
        interps.push(m);
    }
    if !(hi > lo) {
        return Err(Error::InvalidArgument("collapse curves share no x range".into()));
    }
    let mut acc = 0.0;
    for k in 0..SPREAD_SAMPLES {
        let x = if k + 1 == SPREAD_SAMPLES {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (SPREAD_SAMPLES - 1) as f64
        };
        let ys: Vec<f64> = interps.iter().map(|m| m.eval(x)).collect::<Result<_>>()?;
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        acc += ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64;
    }
    Ok((acc / SPREAD_SAMPLES as f64).sqrt() / range)
}
