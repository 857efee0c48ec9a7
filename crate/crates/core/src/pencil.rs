//! Weak-form pencil `(A + λB) c = a²E O c` for the Hulthén radial equation.
//!
//! The radial equation is multiplied through by `1 - e^{-x}` to make every
//! matrix element an elementary integral. Test functions are `e^{-β_m x}`,
//! trial functions `x e^{-β_n x}`, so with `γ = β_m + β_n`:
//!
//! ```text
//! A_mn = ∫ e^{-β_m x} (-½)(1 - e^{-x}) (β_n² x - 2β_n) e^{-β_n x} dx
//!      = β_n (2β_m(γ+1) + β_n) / (2 γ² (γ+1)²)
//! B_mn = ∫ e^{-β_m x} (-e^{-x}) x e^{-β_n x} dx = -1 / (γ+1)²
//! O_mn = ∫ e^{-β_m x} (1 - e^{-x}) x e^{-β_n x} dx = (2γ+1) / (γ² (γ+1)²)
//! ```
//!
//! `A` is not symmetric; `B` and `O` depend on `γ` only. The forms above are
//! algebraically equal to the textbook differences `1/γ² - 1/(γ+1)²` etc. but
//! free of cancellation at large `γ`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::basis::DecayRateGrid;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::quadrature::{self, integrate_semi_infinite, QuadratureRule};
use crate::scalar::Scalar;

/// Closed form used for the potential matrix `B`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BConvention {
    /// `-1/(β_m+β_n+1)²`, the value of the weak-form integral.
    #[default]
    Derived,
    /// `-1/(β_m+β_n)²` as commonly printed; kept for comparison runs.
    PaperPrinted,
}

/// Radial weight used for normalization and the potential expectation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// The expansion is the reduced radial function `u = rR`, so the 3D
    /// measure `4π r² |R|² dr` becomes `4π u² dx` and moments carry `x²`.
    #[default]
    Radial,
    /// Normalization weight `2/γ⁵` with an `x⁴` potential kernel, as commonly
    /// printed. The pair is not self-consistent and the resulting `V` does not
    /// satisfy the Hellmann–Feynman relation; kept for comparison runs.
    PaperPrinted,
}

impl Measure {
    /// Power `p` in the potential kernel `x^p e^{-γ'x} / (1 - e^{-x})`.
    pub fn potential_power(self) -> u32 {
        match self {
            Measure::Radial => 2,
            Measure::PaperPrinted => 4,
        }
    }

    /// Normalization weight for one pair, `γ = β_m + β_n`.
    pub fn norm_weight<T: Scalar>(self, gamma: T) -> T {
        let two = T::from_f64(2.0);
        match self {
            Measure::Radial => two / gamma.powi(3),
            Measure::PaperPrinted => two / gamma.powi(5),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    A,
    B,
    O,
}

fn check_rates(bm: f64, bn: f64) -> Result<()> {
    if bm > 0.0 && bn > 0.0 && bm.is_finite() && bn.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "decay rates must be positive, got ({bm}, {bn})"
        )))
    }
}

#[inline]
fn kernel_a<T: Scalar>(bm: T, bn: T) -> T {
    let g = bm + bn;
    let g1 = g + T::one();
    let two = T::from_f64(2.0);
    bn * (two * bm * g1 + bn) / (two * g * g * g1 * g1)
}

#[inline]
fn kernel_b<T: Scalar>(bm: T, bn: T, convention: BConvention) -> T {
    let g = bm + bn;
    match convention {
        BConvention::Derived => {
            let g1 = g + T::one();
            -(g1 * g1).recip()
        }
        BConvention::PaperPrinted => -(g * g).recip(),
    }
}

#[inline]
fn kernel_o<T: Scalar>(bm: T, bn: T) -> T {
    let g = bm + bn;
    let g1 = g + T::one();
    (T::from_f64(2.0) * g + T::one()) / (g * g * g1 * g1)
}

/// Kinetic element `A_mn` (row `β_m`, column `β_n`).
pub fn element_a(bm: f64, bn: f64) -> Result<f64> {
    check_rates(bm, bn)?;
    Ok(kernel_a(bm, bn))
}

pub fn element_b(bm: f64, bn: f64, convention: BConvention) -> Result<f64> {
    check_rates(bm, bn)?;
    Ok(kernel_b(bm, bn, convention))
}

pub fn element_o(bm: f64, bn: f64) -> Result<f64> {
    check_rates(bm, bn)?;
    Ok(kernel_o(bm, bn))
}

/// Weak-form integral for one element computed by quadrature.
///
/// Independent of the closed forms; used for validation only. When `rule` is
/// `None` a rule resolving both `γ` and `γ + 1` is chosen.
pub fn oracle_element(
    kind: ElementKind,
    bm: f64,
    bn: f64,
    rule: Option<&QuadratureRule>,
) -> Result<f64> {
    check_rates(bm, bn)?;
    let g = bm + bn;
    let default_rule = QuadratureRule::for_decay_range(g, g + 1.0);
    let rule = rule.unwrap_or(&default_rule);
    // 1 - e^{-x} via expm1 so the small-x region keeps full precision.
    let screen = |x: f64| -(-x).exp_m1();
    match kind {
        ElementKind::A => integrate_semi_infinite(
            |x| -0.5 * screen(x) * (bn * bn * x - 2.0 * bn) * (-g * x).exp(),
            rule,
        ),
        ElementKind::B => integrate_semi_infinite(|x| -x * (-(g + 1.0) * x).exp(), rule),
        ElementKind::O => integrate_semi_infinite(|x| screen(x) * x * (-g * x).exp(), rule),
    }
}

/// Knobs for [`assemble`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PencilOptions {
    pub b_convention: BConvention,
    pub measure: Measure,
    /// Warn when the equilibrated overlap condition number exceeds this.
    pub condition_warn: f64,
    /// Refuse to assemble above this condition number...
    pub condition_limit: f64,
    /// ...unless this is set.
    pub allow_ill_conditioned: bool,
}

impl Default for PencilOptions {
    fn default() -> Self {
        Self {
            b_convention: BConvention::Derived,
            measure: Measure::Radial,
            condition_warn: 1e12,
            condition_limit: 1e15,
            allow_ill_conditioned: false,
        }
    }
}

/// Diagonally equilibrated Cholesky factor of the overlap matrix.
///
/// `O = D⁻¹ L Lᵀ D⁻¹` with `D = diag(O)^{-1/2}`. Rescaling the basis does not
/// move the eigenvalues, and it removes the enormous spread in `O_nn` that an
/// eight-decade rate grid produces.
#[derive(Clone, Debug)]
pub struct OverlapFactor<T> {
    pub scale: Vec<T>,
    pub chol: Matrix<T>,
    /// Ratio of extreme eigenvalues of `D O D`.
    pub condition: f64,
}

/// Assembled pencil for one basis plus its λ-independent integrals.
#[derive(Clone, Debug)]
pub struct SpectralPencil<T> {
    pub grid: DecayRateGrid,
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub o: Matrix<T>,
    /// `∫ x^p e^{-(γ+1)x} / (1 - e^{-x}) dx`, `p` from the measure.
    pub i_pot: Matrix<T>,
    /// Normalization weights, see [`Measure::norm_weight`].
    pub gram: Matrix<T>,
    pub factor: OverlapFactor<T>,
    pub options: PencilOptions,
}

impl<T: Scalar> SpectralPencil<T> {
    pub fn n_basis(&self) -> usize {
        self.grid.len()
    }

    /// `A + λB`.
    pub fn hamiltonian(&self, lambda: T) -> Matrix<T> {
        self.a.add_scaled(lambda, &self.b)
    }
}

/// Potential integral for `γ' = β_m + β_n + 1` to full working precision.
pub fn potential_integral<T: Scalar>(p: u32, gamma_prime: T) -> Result<T> {
    let lead = quadrature::exp_moment(p, gamma_prime)?;
    let tol = lead * T::from_f64(0.01 * T::EPSILON);
    Ok(quadrature::hurwitz_series(p, gamma_prime, tol)?.value)
}

pub fn assemble<T: Scalar>(grid: &DecayRateGrid, options: &PencilOptions) -> Result<SpectralPencil<T>> {
    let n = grid.len();
    let rates: Vec<T> = grid.rates().iter().map(|&b| T::from_f64(b)).collect();
    let p = options.measure.potential_power();
    let mut a = Matrix::zeros(n, n);
    let mut b = Matrix::zeros(n, n);
    let mut o = Matrix::zeros(n, n);
    let mut i_pot = Matrix::zeros(n, n);
    let mut gram = Matrix::zeros(n, n);
    for m in 0..n {
        for k in m..n {
            let (bm, bk) = (rates[m], rates[k]);
            let g = bm + bk;
            a[(m, k)] = kernel_a(bm, bk);
            a[(k, m)] = kernel_a(bk, bm);
            let bv = kernel_b(bm, bk, options.b_convention);
            b[(m, k)] = bv;
            b[(k, m)] = bv;
            let ov = kernel_o(bm, bk);
            o[(m, k)] = ov;
            o[(k, m)] = ov;
            let iv = potential_integral(p, g + T::one())?;
            i_pot[(m, k)] = iv;
            i_pot[(k, m)] = iv;
            let gv = options.measure.norm_weight(g);
            gram[(m, k)] = gv;
            gram[(k, m)] = gv;
        }
    }
    let factor = factor_overlap(&o, options)?;
    Ok(SpectralPencil {
        grid: grid.clone(),
        a,
        b,
        o,
        i_pot,
        gram,
        factor,
        options: *options,
    })
}

fn factor_overlap<T: Scalar>(o: &Matrix<T>, options: &PencilOptions) -> Result<OverlapFactor<T>> {
    let n = o.rows();
    let scale: Vec<T> = (0..n).map(|i| o[(i, i)].sqrt().recip()).collect();
    let equilibrated = Matrix::from_fn(n, n, |i, j| scale[i] * o[(i, j)] * scale[j]);
    let condition = condition_estimate(&equilibrated)?;
    if condition > options.condition_limit && !options.allow_ill_conditioned {
        return Err(Error::IllConditioned {
            condition,
            limit: options.condition_limit,
        });
    }
    if condition > options.condition_warn {
        warn!("overlap condition estimate {condition:.3e} exceeds {:.1e}", options.condition_warn);
    }
    let chol = linalg::cholesky(&equilibrated)?;
    Ok(OverlapFactor {
        scale,
        chol,
        condition,
    })
}

/// Extreme-eigenvalue ratio of a symmetric matrix, computed in double precision.
fn condition_estimate<T: Scalar>(s: &Matrix<T>) -> Result<f64> {
    let s64 = s.map(|x| x.to_f64());
    let ev = linalg::eigenvalues(&s64)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for e in ev {
        lo = lo.min(e.re);
        hi = hi.max(e.re.abs());
    }
    if lo <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(hi / lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_decay_rates, BasisSpec};
    use crate::scalar::DoubleDouble;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn closed_form_values() {
        assert!(rel(element_a(1.0, 1.0).unwrap(), 7.0 / 72.0) < 1e-15);
        assert!(rel(element_a(2.0, 1.0).unwrap(), 17.0 / 288.0) < 1e-15);
        assert!(element_a(1.0, 2.0).unwrap() != element_a(2.0, 1.0).unwrap());
        assert_eq!(element_b(0.5, 0.5, BConvention::Derived).unwrap(), -0.25);
        assert_eq!(element_b(0.5, 0.5, BConvention::PaperPrinted).unwrap(), -1.0);
        assert!(rel(element_b(1.0, 1.0, BConvention::Derived).unwrap(), -1.0 / 9.0) < 1e-15);
        assert!(rel(element_o(0.5, 0.5).unwrap(), 0.75) < 1e-15);
        assert!(rel(element_o(1.0, 2.0).unwrap(), 7.0 / 144.0) < 1e-15);
        assert!(rel(element_o(1.0, 1.0).unwrap(), 5.0 / 36.0) < 1e-15);
    }

    #[test]
    fn textbook_differences_agree() {
        for &(bm, bn) in &[(0.3, 0.7), (1.0, 5.0), (12.0, 0.01)] {
            let g: f64 = bm + bn;
            let o = 1.0 / (g * g) - 1.0 / ((g + 1.0) * (g + 1.0));
            let a = -(bn * bn) / 2.0 * o + bn * (1.0 / g - 1.0 / (g + 1.0));
            assert!(rel(element_o(bm, bn).unwrap(), o) < 1e-13);
            assert!(rel(element_a(bm, bn).unwrap(), a) < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_rates() {
        assert!(element_a(0.0, 1.0).is_err());
        assert!(element_b(1.0, -1.0, BConvention::Derived).is_err());
        assert!(element_o(f64::NAN, 1.0).is_err());
        assert!(oracle_element(ElementKind::O, -1.0, 1.0, None).is_err());
    }

    #[test]
    fn oracle_unit_rates() {
        let o = oracle_element(ElementKind::O, 1.0, 1.0, None).unwrap();
        let b = oracle_element(ElementKind::B, 1.0, 1.0, None).unwrap();
        let a = oracle_element(ElementKind::A, 1.0, 1.0, None).unwrap();
        assert!((o - 5.0 / 36.0).abs() < 1e-12);
        assert!((b + 1.0 / 9.0).abs() < 1e-12);
        assert!((a - 7.0 / 72.0).abs() < 1e-12);
        let b = oracle_element(ElementKind::B, 0.5, 0.5, None).unwrap();
        assert!((b + 0.25).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_overlap() {
        let grid = DecayRateGrid::from_rates(vec![1.0, 2.0]).unwrap();
        let p: SpectralPencil<f64> = assemble(&grid, &PencilOptions::default()).unwrap();
        let want = [[5.0 / 36.0, 7.0 / 144.0], [7.0 / 144.0, 1.0 / 16.0 - 1.0 / 25.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(rel(p.o[(i, j)], want[i][j]) < 1e-15);
            }
        }
    }

    #[test]
    fn structure_of_production_pencil() {
        let grid = build_decay_rates(&BasisSpec::new(16, -4.0, 4.0)).unwrap();
        let p: SpectralPencil<f64> = assemble(&grid, &PencilOptions::default()).unwrap();
        assert!(p.b.is_symmetric() && p.o.is_symmetric() && p.i_pot.is_symmetric());
        assert!(!p.a.is_symmetric());
        for i in 0..16 {
            for j in 0..16 {
                assert!(p.b[(i, j)] < 0.0);
                assert!(p.o[(i, j)] > 0.0);
                assert!(p.i_pot[(i, j)] > 0.0);
            }
        }
        linalg::cholesky(&p.o).unwrap();
    }

    #[test]
    fn potential_integrals_match_series() {
        let grid = build_decay_rates(&BasisSpec::new(6, -1.0, 1.0)).unwrap();
        let opts = PencilOptions {
            measure: Measure::PaperPrinted,
            ..PencilOptions::default()
        };
        let p: SpectralPencil<f64> = assemble(&grid, &opts).unwrap();
        let r = grid.rates();
        for i in 0..6 {
            for j in 0..6 {
                let g = r[i] + r[j] + 1.0;
                let s = quadrature::hurwitz_series_x4(g, 1e-3 * f64::EPSILON * 24.0 / g.powi(5)).unwrap();
                assert!(rel(p.i_pot[(i, j)], s) < 1e-14, "{} {}", p.i_pot[(i, j)], s);
            }
        }
    }

    #[test]
    fn condition_guard() {
        let grid = build_decay_rates(&BasisSpec::new(48, -4.0, 4.0)).unwrap();
        let strict = PencilOptions {
            condition_limit: 1e3,
            ..PencilOptions::default()
        };
        assert!(matches!(
            assemble::<f64>(&grid, &strict),
            Err(Error::IllConditioned { .. })
        ));
        let overridden = PencilOptions {
            allow_ill_conditioned: true,
            ..strict
        };
        let p = assemble::<f64>(&grid, &overridden).unwrap();
        assert!(p.factor.condition > 1e3);
    }

    #[test]
    fn extended_assembly_matches_double() {
        let grid = build_decay_rates(&BasisSpec::new(8, -4.0, 4.0)).unwrap();
        let pd: SpectralPencil<f64> = assemble(&grid, &PencilOptions::default()).unwrap();
        let pe: SpectralPencil<DoubleDouble> = assemble(&grid, &PencilOptions::default()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!(rel(pe.a[(i, j)].to_f64(), pd.a[(i, j)]) < 1e-15);
                assert!(rel(pe.i_pot[(i, j)].to_f64(), pd.i_pot[(i, j)]) < 1e-14);
            }
        }
    }
}
