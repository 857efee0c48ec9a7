//! Generalized eigenproblem `(A + λB) c = μ O c` with symmetric positive
//! definite `O` and non-symmetric `A`.
//!
//! The pencil is reduced to a standard problem `M z = μ z` through the
//! equilibrated Cholesky factor of `O`:
//! `M = L⁻¹ D (A + λB) D L⁻ᵀ`, `c = D L⁻ᵀ z`. `M` is not symmetric, so the
//! eigenvalues come from the general Hessenberg/QR routine and the selected
//! eigenvector from inverse iteration. Because the scheme is Petrov–Galerkin
//! (test space ≠ trial space) the computed energies carry no variational
//! bound.

use std::f64::consts::PI;

use crate::basis::DecayRateGrid;
use crate::error::{Error, Result};
use crate::linalg::{self, Eigenvalue, Matrix};
use crate::pencil::{Measure, SpectralPencil};
use crate::scalar::Scalar;

/// Relative size below which an imaginary part is treated as roundoff.
pub const IMAG_TOLERANCE: f64 = 1e-10;

/// Default eigenpair residual tolerance relative to `‖A + λB‖`.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Eigenpair<T> {
    pub value: Eigenvalue<T>,
    /// Right eigenvector in the original basis; present for real eigenvalues.
    pub vector: Option<Vec<T>>,
    /// `‖(K - μO)c‖ / ‖c‖`, for real eigenvalues.
    pub residual: Option<f64>,
}

impl<T: Scalar> Eigenpair<T> {
    pub fn is_admissible(&self) -> bool {
        is_admissible(&self.value)
    }
}

pub fn is_admissible<T: Scalar>(e: &Eigenvalue<T>) -> bool {
    e.im.abs().to_f64() <= IMAG_TOLERANCE * e.re.abs().to_f64().max(1.0)
}

/// Normalized lowest state of one `(λ, N)` pencil.
#[derive(Clone, Debug)]
pub struct GroundState<T> {
    /// Eigenvalue `a²E` (equal to `E` for `a = 1`).
    pub energy: T,
    /// Coefficients scaled so that the normalization sum is one.
    pub coeffs: Vec<T>,
    /// `‖(A + λB - a²E O)c‖ / ‖c‖`.
    pub residual: f64,
    /// `‖A + λB‖_∞`, the natural scale for `residual`.
    pub operator_norm: f64,
    /// Normalization factor of the raw eigenvector.
    pub norm_factor: T,
}

/// Pencil reduction with the λ-independent halves cached.
#[derive(Clone, Debug)]
pub struct ReducedPencil<'a, T> {
    pencil: &'a SpectralPencil<T>,
    ma: Matrix<T>,
    mb: Matrix<T>,
}

fn equilibrate<T: Scalar>(k: &Matrix<T>, scale: &[T]) -> Matrix<T> {
    Matrix::from_fn(k.rows(), k.cols(), |i, j| scale[i] * k[(i, j)] * scale[j])
}

fn back_transform<T: Scalar>(chol: &Matrix<T>, scale: &[T], z: &[T]) -> Vec<T> {
    let mut c = z.to_vec();
    linalg::back_substitute_transposed(chol, &mut c);
    for (ci, &s) in c.iter_mut().zip(scale) {
        *ci *= s;
    }
    c
}

fn residual_norm<T: Scalar>(k: &Matrix<T>, o: &Matrix<T>, mu: T, c: &[T]) -> f64 {
    let kc = k.mul_vec(c);
    let oc = o.mul_vec(c);
    let r: Vec<T> = kc.iter().zip(&oc).map(|(&x, &y)| x - mu * y).collect();
    (linalg::norm2(&r) / linalg::norm2(c)).to_f64()
}

impl<'a, T: Scalar> ReducedPencil<'a, T> {
    pub fn new(pencil: &'a SpectralPencil<T>) -> Self {
        let f = &pencil.factor;
        let ma = linalg::congruence_inverse(&f.chol, &equilibrate(&pencil.a, &f.scale));
        let mb = linalg::congruence_inverse(&f.chol, &equilibrate(&pencil.b, &f.scale));
        Self { pencil, ma, mb }
    }

    pub fn pencil(&self) -> &SpectralPencil<T> {
        self.pencil
    }

    /// Standard-form matrix at coupling `lambda`.
    pub fn matrix(&self, lambda: T) -> Matrix<T> {
        self.ma.add_scaled(lambda, &self.mb)
    }

    pub fn eigenvalues(&self, lambda: T) -> Result<Vec<Eigenvalue<T>>> {
        linalg::eigenvalues(&self.matrix(lambda))
    }

    /// Eigenvector for a real eigenvalue, in the original (unscaled) basis.
    pub fn eigenvector(&self, lambda: T, mu: T) -> Vec<T> {
        let z = linalg::inverse_iteration(&self.matrix(lambda), mu, 3);
        let f = &self.pencil.factor;
        let mut c = back_transform(&f.chol, &f.scale, &z);
        linalg::orient(&mut c);
        c
    }

    /// Lowest admissible eigenpair, normalized, regardless of sign.
    pub fn lowest_state(&self, lambda: T) -> Result<GroundState<T>> {
        let ev = self.eigenvalues(lambda)?;
        let mu = lowest_admissible(&ev)?;
        self.state_for(lambda, mu)
    }

    /// Lowest admissible eigenpair, required to lie below the threshold `0`.
    pub fn ground_state(&self, lambda: T) -> Result<GroundState<T>> {
        let ev = self.eigenvalues(lambda)?;
        let mu = select_ground(&ev)?;
        self.state_for(lambda, mu)
    }

    fn state_for(&self, lambda: T, mu: T) -> Result<GroundState<T>> {
        let c = self.eigenvector(lambda, mu);
        let k = self.pencil.hamiltonian(lambda);
        let residual = residual_norm(&k, &self.pencil.o, mu, &c);
        let (coeffs, norm_factor) = normalize_with_gram(&c, &self.pencil.gram)?;
        Ok(GroundState {
            energy: mu,
            coeffs,
            residual,
            operator_norm: k.norm_inf().to_f64(),
            norm_factor,
        })
    }
}

/// All eigenpairs of `(A + λB, O)`; eigenvectors are computed for real
/// eigenvalues only.
pub fn solve_generalized<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    o: &Matrix<T>,
    lambda: T,
) -> Result<Vec<Eigenpair<T>>> {
    let n = a.rows();
    if !(a.is_square() && b.rows() == n && b.cols() == n && o.rows() == n && o.cols() == n) {
        return Err(Error::InvalidArgument("pencil matrices must be square and of equal size".into()));
    }
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let d = o[(i, i)];
        if !(d > T::zero()) {
            return Err(Error::NotPositiveDefinite {
                pivot: i,
                value: d.to_f64(),
            });
        }
        scale.push(d.sqrt().recip());
    }
    let chol = linalg::cholesky(&equilibrate(o, &scale))?;
    let k = a.add_scaled(lambda, b);
    let m = linalg::congruence_inverse(&chol, &equilibrate(&k, &scale));
    let values = linalg::eigenvalues(&m)?;
    Ok(values
        .into_iter()
        .map(|value| {
            if is_admissible(&value) {
                let z = linalg::inverse_iteration(&m, value.re, 3);
                let mut c = back_transform(&chol, &scale, &z);
                linalg::orient(&mut c);
                let residual = residual_norm(&k, o, value.re, &c);
                Eigenpair {
                    value,
                    vector: Some(c),
                    residual: Some(residual),
                }
            } else {
                Eigenpair {
                    value,
                    vector: None,
                    residual: None,
                }
            }
        })
        .collect())
}

/// Smallest eigenvalue with negligible imaginary part.
pub fn lowest_admissible<T: Scalar>(values: &[Eigenvalue<T>]) -> Result<T> {
    values
        .iter()
        .filter(|e| is_admissible(e))
        .map(|e| e.re)
        .fold(None, |acc: Option<T>, x| match acc {
            Some(a) if a <= x => Some(a),
            _ => Some(x),
        })
        .ok_or(Error::NoAdmissibleEigenvalue)
}

/// Ground-state energy: the lowest admissible eigenvalue, which must be
/// negative (the continuum threshold is zero).
pub fn select_ground<T: Scalar>(values: &[Eigenvalue<T>]) -> Result<T> {
    let lowest = lowest_admissible(values)?;
    if lowest < T::zero() {
        Ok(lowest)
    } else {
        Err(Error::NoBoundState {
            lowest: lowest.to_f64(),
        })
    }
}

fn normalize_with_gram<T: Scalar>(coeffs: &[T], gram: &Matrix<T>) -> Result<(Vec<T>, T)> {
    if coeffs.len() != gram.rows() {
        return Err(Error::LengthMismatch {
            expected: gram.rows(),
            got: coeffs.len(),
        });
    }
    if coeffs.iter().all(|&c| c == T::zero()) {
        return Err(Error::ZeroVector);
    }
    let sq = T::from_f64(4.0) * pi::<T>() * gram.bilinear(coeffs, coeffs);
    if !(sq > T::zero()) {
        return Err(Error::ZeroVector);
    }
    let nf = sq.sqrt();
    Ok((coeffs.iter().map(|&c| c / nf).collect(), nf))
}

/// π to the working precision.
pub fn pi<T: Scalar>() -> T {
    // Second word of π in double-double form.
    T::from_f64(PI) + T::from_f64(1.224_646_799_147_353_2e-16)
}

/// Normalization weights `w(β_m + β_n)` for a grid.
pub fn gram_matrix<T: Scalar>(grid: &DecayRateGrid, measure: Measure) -> Matrix<T> {
    let r = grid.rates();
    let n = r.len();
    Matrix::from_fn(n, n, |i, j| measure.norm_weight(T::from_f64(r[i]) + T::from_f64(r[j])))
}

/// Divides `coeffs` by `N_f`, `N_f² = 4π Σ c_m c_n w(β_m+β_n)`.
pub fn normalize<T: Scalar>(coeffs: &[T], grid: &DecayRateGrid, measure: Measure) -> Result<(Vec<T>, T)> {
    if coeffs.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: coeffs.len(),
        });
    }
    normalize_with_gram(coeffs, &gram_matrix(grid, measure))
}

/// Normalization sum for already-scaled coefficients (one for normalized states).
pub fn normalization_sum<T: Scalar>(coeffs: &[T], grid: &DecayRateGrid, measure: Measure) -> Result<T> {
    let g = gram_matrix::<T>(grid, measure);
    Ok(T::from_f64(4.0) * pi::<T>() * g.bilinear(coeffs, coeffs))
}
