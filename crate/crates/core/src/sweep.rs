//! `(λ, N)` sweeps of the ground state and the persisted energy surface.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{build_decay_rates, BasisSpec};
use crate::eigensolver::{pi, GroundState, ReducedPencil, DEFAULT_RESIDUAL_TOL};
use crate::error::{Error, Result};
use crate::pencil::{assemble, PencilOptions, SpectralPencil};
use crate::scalar::{DoubleDouble, Scalar};

/// Arithmetic used for assembly and the eigensolve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    Double,
    /// Double-double, about 32 significant digits.
    Extended,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(Precision::Double),
            "extended" => Ok(Precision::Extended),
            other => Err(Error::Config(format!("unknown precision `{other}` (expected double or extended)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_steps: usize,
    pub n_list: Vec<usize>,
    pub d_s: f64,
    pub d_e: f64,
    pub a: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambda_min: 0.49,
            lambda_max: 0.56,
            lambda_steps: 2001,
            n_list: (32..=48).step_by(2).collect(),
            d_s: -4.0,
            d_e: 4.0,
            a: 1.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = self.lambda_min.is_finite() && self.lambda_max.is_finite();
        if !finite || self.lambda_min <= 0.0 {
            return Err(Error::Config("λ range must be finite and positive".into()));
        }
        if self.lambda_steps == 0 {
            return Err(Error::Config("lambda_steps must be at least 1".into()));
        }
        if self.lambda_steps == 1 && self.lambda_min != self.lambda_max {
            return Err(Error::Config("a single λ step needs lambda_min = lambda_max".into()));
        }
        if self.lambda_steps > 1 && self.lambda_min >= self.lambda_max {
            return Err(Error::Config(format!(
                "lambda_min ({}) must be smaller than lambda_max ({})",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list is empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("n_list must be strictly ascending".into()));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Config(format!("a must be positive, got {}", self.a)));
        }
        for &n in &self.n_list {
            BasisSpec::new(n, self.d_s, self.d_e)
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Uniform λ grid, endpoints included.
    pub fn lambdas(&self) -> Vec<f64> {
        if self.lambda_steps == 1 {
            return vec![self.lambda_min];
        }
        let last = self.lambda_steps - 1;
        let h = (self.lambda_max - self.lambda_min) / last as f64;
        (0..self.lambda_steps)
            .map(|i| {
                if i == last {
                    self.lambda_max
                } else {
                    self.lambda_min + i as f64 * h
                }
            })
            .collect()
    }
}

/// Solver settings shared by every point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub precision: Precision,
    pub pencil: PencilOptions,
    /// Tolerance on `residual / ‖A + λB‖`.
    pub residual_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            precision: Precision::Double,
            pencil: PencilOptions::default(),
            residual_tol: DEFAULT_RESIDUAL_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Lowest eigenvalue below the threshold.
    Bound,
    /// Lowest eigenvalue at or above the threshold; the row still carries the
    /// lowest discretized state, which finite-size scaling needs below λ_c.
    Unbound,
    /// The solve failed; numeric fields are absent.
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Bound => "bound",
            Status::Unbound => "unbound",
            Status::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "bound" => Some(Status::Bound),
            "unbound" => Some(Status::Unbound),
            "failed" => Some(Status::Failed),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceRow {
    pub lambda: f64,
    pub n_basis: usize,
    pub e0: Option<f64>,
    pub v: Option<f64>,
    pub residual: Option<f64>,
    pub status: Status,
}

impl SurfaceRow {
    fn failed(lambda: f64, n_basis: usize) -> Self {
        Self {
            lambda,
            n_basis,
            e0: None,
            v: None,
            residual: None,
            status: Status::Failed,
        }
    }

    /// True when `E0` and `V` are present.
    pub fn has_values(&self) -> bool {
        self.status != Status::Failed && self.e0.is_some() && self.v.is_some()
    }
}

/// `E0(λ, N)` and `V(λ, N)`, ordered by `N` then `λ`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergySurface {
    pub rows: Vec<SurfaceRow>,
}

/// One basis size of a surface as parallel arrays of usable points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub lambda: Vec<f64>,
    pub e0: Vec<f64>,
    pub v: Vec<f64>,
}

impl EnergySurface {
    pub fn n_values(&self) -> Vec<usize> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n_basis).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    pub fn get(&self, lambda: f64, n_basis: usize) -> Option<&SurfaceRow> {
        self.rows.iter().find(|r| r.n_basis == n_basis && r.lambda == lambda)
    }

    /// Rows of basis size `n` that carry values, in ascending λ.
    pub fn series(&self, n_basis: usize) -> Series {
        let mut rows: Vec<&SurfaceRow> = self
            .rows
            .iter()
            .filter(|r| r.n_basis == n_basis && r.has_values())
            .collect();
        rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        Series {
            lambda: rows.iter().map(|r| r.lambda).collect(),
            e0: rows.iter().map(|r| r.e0.unwrap_or(f64::NAN)).collect(),
            v: rows.iter().map(|r| r.v.unwrap_or(f64::NAN)).collect(),
        }
    }
}

/// `V = -4πλ Σ c_m c_n I_pot[m][n]` for a normalized state, in units of `1/a²`.
pub fn potential_expectation<T: Scalar>(state: &GroundState<T>, pencil: &SpectralPencil<T>, lambda: T) -> Result<T> {
    let c = &state.coeffs;
    if c.len() != pencil.n_basis() {
        return Err(Error::LengthMismatch {
            expected: pencil.n_basis(),
            got: c.len(),
        });
    }
    let four_pi = T::from_f64(4.0) * pi::<T>();
    let norm = four_pi * pencil.gram.bilinear(c, c);
    if (norm - T::one()).abs().to_f64() > 1e-8 {
        return Err(Error::NotNormalized(norm.to_f64()));
    }
    Ok(-(four_pi * lambda * pencil.i_pot.bilinear(c, c)))
}

fn solve_point<T: Scalar>(
    reduced: &ReducedPencil<'_, T>,
    lambda: f64,
    a: f64,
    residual_tol: f64,
) -> Result<(f64, f64, f64, bool)> {
    let lam = T::from_f64(lambda);
    let state = reduced.lowest_state(lam)?;
    if !(state.residual <= residual_tol * state.operator_norm) {
        return Err(Error::ResidualTooLarge {
            residual: state.residual,
            tolerance: residual_tol * state.operator_norm,
        });
    }
    let v = potential_expectation(&state, reduced.pencil(), lam)?;
    let a2 = T::from_f64(a * a);
    let e = (state.energy / a2).to_f64();
    Ok((e, (v / a2).to_f64(), state.residual, state.energy < T::zero()))
}

fn sweep_one_n<T: Scalar>(
    n: usize,
    config: &SweepConfig,
    options: &SolverOptions,
    lambdas: &[f64],
) -> Result<Vec<SurfaceRow>> {
    let grid = build_decay_rates(&BasisSpec::new(n, config.d_s, config.d_e))?;
    let pencil = assemble::<T>(&grid, &options.pencil)?;
    let reduced = ReducedPencil::new(&pencil);
    Ok(lambdas
        .par_iter()
        .map(|&lambda| match solve_point(&reduced, lambda, config.a, options.residual_tol) {
            Ok((e0, v, residual, bound)) => SurfaceRow {
                lambda,
                n_basis: n,
                e0: Some(e0),
                v: Some(v),
                residual: Some(residual),
                status: if bound { Status::Bound } else { Status::Unbound },
            },
            Err(err) => {
                debug!("N={n} λ={lambda}: {err}");
                SurfaceRow::failed(lambda, n)
            }
        })
        .collect())
}

/// Solves every `(λ, N)` point. Each pencil is assembled once; λ points are
/// solved in parallel and gathered in `(N, λ)` order, so the result does not
/// depend on scheduling. Point failures become `failed` rows. Assembly
/// failures (e.g. the conditioning guard) abort.
pub fn run_sweep(config: &SweepConfig, options: &SolverOptions) -> Result<EnergySurface> {
    config.validate()?;
    let lambdas = config.lambdas();
    let mut rows = Vec::with_capacity(lambdas.len() * config.n_list.len());
    for &n in &config.n_list {
        info!("N = {n}: {} λ points ({:?} precision)", lambdas.len(), options.precision);
        let part = match options.precision {
            Precision::Double => sweep_one_n::<f64>(n, config, options, &lambdas)?,
            Precision::Extended => sweep_one_n::<DoubleDouble>(n, config, options, &lambdas)?,
        };
        rows.extend(part);
    }
    Ok(EnergySurface { rows })
}

pub const SURFACE_HEADER: &str = "lambda,n_basis,E0,V,residual,status";

/// Float formatting shared by all output tables: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Writes a table: header, one `#` metadata line, then rows.
pub fn write_table(path: &Path, header: &str, metadata: &str, rows: &[String]) -> Result<()> {
    let mut out = String::with_capacity(64 * (rows.len() + 2));
    out.push_str(header);
    out.push('\n');
    for line in metadata.lines() {
        let _ = writeln!(out, "# {line}");
    }
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn save_surface(surface: &EnergySurface, path: &Path, metadata: &str) -> Result<()> {
    let rows: Vec<String> = surface
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                fmt_float(r.lambda),
                r.n_basis,
                fmt_opt(r.e0),
                fmt_opt(r.v),
                fmt_opt(r.residual),
                r.status.as_str()
            )
        })
        .collect();
    write_table(path, SURFACE_HEADER, metadata, &rows)
}

pub fn load_surface(path: &Path) -> Result<EnergySurface> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SURFACE_HEADER => {}
        Some((_, h)) => return Err(err(1, format!("unexpected header `{h}`"))),
        None => return Err(err(1, "empty file".into())),
    }
    let columns: Vec<&str> = SURFACE_HEADER.split(',').collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(err(
                lineno,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        let number = |col: usize| -> Result<Option<f64>> {
            let s = fields[col];
            if s.is_empty() {
                return Ok(None);
            }
            match s.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(err(lineno, format!("column {}: invalid number `{s}`", columns[col]))),
            }
        };
        let lambda = number(0)?.ok_or_else(|| err(lineno, "column lambda: missing value".into()))?;
        let n_basis = fields[1]
            .parse::<usize>()
            .map_err(|_| err(lineno, format!("column n_basis: invalid integer `{}`", fields[1])))?;
        let e0 = number(2)?;
        let v = number(3)?;
        let residual = number(4)?;
        let status = Status::parse(fields[5])
            .ok_or_else(|| err(lineno, format!("column status: unknown value `{}`", fields[5])))?;
        if status != Status::Failed && (e0.is_none() || v.is_none()) {
            return Err(err(lineno, format!("column E0/V: missing value for a {} row", status.as_str())));
        }
        rows.push(SurfaceRow {
            lambda,
            n_basis,
            e0,
            v,
            residual,
            status,
        });
    }
    Ok(EnergySurface { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(lambda: f64, n: usize) -> SweepConfig {
        SweepConfig {
            lambda_min: lambda,
            lambda_max: lambda,
            lambda_steps: 1,
            n_list: vec![n],
            ..SweepConfig::default()
        }
    }

    #[test]
    fn default_grid() {
        let c = SweepConfig::default();
        c.validate().unwrap();
        let l = c.lambdas();
        assert_eq!(l.len(), 2001);
        assert_eq!(l[0], 0.49);
        assert_eq!(l[2000], 0.56);
        assert_eq!(c.n_list, vec![32, 34, 36, 38, 40, 42, 44, 46, 48]);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = SweepConfig::default();
        c.n_list = vec![40, 32];
        assert!(c.validate().is_err());
        c.n_list = vec![];
        assert!(c.validate().is_err());
        let mut c = SweepConfig::default();
        c.lambda_max = 0.3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_point_at_unit_coupling() {
        let s = run_sweep(&single(1.0, 32), &SolverOptions::default()).unwrap();
        assert_eq!(s.rows.len(), 1);
        let r = s.rows[0];
        assert_eq!(r.status, Status::Bound);
        assert!(((r.e0.unwrap() + 0.125) / 0.125).abs() < 1e-5);
    }

    #[test]
    fn below_threshold_is_unbound() {
        let options = SolverOptions {
            precision: Precision::Extended,
            ..SolverOptions::default()
        };
        let s = run_sweep(&single(0.3, 32), &options).unwrap();
        assert_eq!(s.rows[0].status, Status::Unbound);
        assert!(s.rows[0].e0.unwrap() >= 0.0);
    }

    #[test]
    fn potential_parity() {
        let grid = build_decay_rates(&BasisSpec::new(16, -3.0, 3.0)).unwrap();
        let pencil = assemble::<f64>(&grid, &PencilOptions::default()).unwrap();
        let reduced = ReducedPencil::new(&pencil);
        let mut state = reduced.lowest_state(1.0).unwrap();
        let v1 = potential_expectation(&state, &pencil, 1.0).unwrap();
        for c in state.coeffs.iter_mut() {
            *c = -*c;
        }
        let v2 = potential_expectation(&state, &pencil, 1.0).unwrap();
        assert_eq!(v1, v2);
        for c in state.coeffs.iter_mut() {
            *c *= 2.0;
        }
        assert!(matches!(
            potential_expectation(&state, &pencil, 1.0),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn scaling_parameter_rescales_energy() {
        let mut c = single(1.0, 24);
        let e1 = run_sweep(&c, &SolverOptions::default()).unwrap().rows[0];
        c.a = 2.0;
        let e2 = run_sweep(&c, &SolverOptions::default()).unwrap().rows[0];
        assert!((e2.e0.unwrap() * 4.0 - e1.e0.unwrap()).abs() < 1e-15);
        assert!((e2.v.unwrap() * 4.0 - e1.v.unwrap()).abs() < 1e-15);
    }

    #[test]
    fn precision_names() {
        assert_eq!("double".parse::<Precision>().unwrap(), Precision::Double);
        assert_eq!("extended".parse::<Precision>().unwrap(), Precision::Extended);
        assert!("quad".parse::<Precision>().is_err());
    }
}
