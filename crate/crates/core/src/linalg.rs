//! Small dense linear algebra over any [`Scalar`].
//!
//! Only what the pencil reduction needs: Cholesky, triangular solves, LU with
//! partial pivoting, and eigenvalues of a general real matrix via Hessenberg
//! reduction followed by the Francis double-shift QR iteration.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: T, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `vᵀ M w`.
    pub fn bilinear(&self, v: &[T], w: &[T]) -> T {
        let mw = self.mul_vec(w);
        v.iter().zip(&mw).map(|(&a, &b)| a * b).sum()
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Lower-triangular Cholesky factor `L` with `S = L Lᵀ`.
///
/// Fails with [`Error::NotPositiveDefinite`] at the first non-positive pivot.
pub fn cholesky<T: Scalar>(s: &Matrix<T>) -> Result<Matrix<T>> {
    assert!(s.is_square());
    let n = s.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: d.to_f64(),
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut acc = s[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / djj;
        }
    }
    Ok(l)
}

/// Solves `L X = B` in place for lower-triangular `L`.
pub fn forward_substitute<T: Scalar>(l: &Matrix<T>, b: &mut Matrix<T>) {
    let n = l.rows();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut acc = b[(i, c)];
            for k in 0..i {
                acc -= l[(i, k)] * b[(k, c)];
            }
            b[(i, c)] = acc / l[(i, i)];
        }
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
pub fn back_substitute_transposed<T: Scalar>(l: &Matrix<T>, x: &mut [T]) {
    let n = l.rows();
    for i in (0..n).rev() {
        let mut acc = x[i];
        for k in i + 1..n {
            acc -= l[(k, i)] * x[k];
        }
        x[i] = acc / l[(i, i)];
    }
}

/// `L⁻¹ K L⁻ᵀ` for lower-triangular `L`.
pub fn congruence_inverse<T: Scalar>(l: &Matrix<T>, k: &Matrix<T>) -> Matrix<T> {
    let mut y = k.clone();
    forward_substitute(l, &mut y);
    let mut z = y.transpose();
    forward_substitute(l, &mut z);
    z.transpose()
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    /// Factors `a`. Exactly zero pivots are replaced by `floor`, which keeps
    /// inverse iteration at a converged shift well defined.
    pub fn new(a: &Matrix<T>, floor: T) -> Self {
        assert!(a.is_square());
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            if lu[(k, k)] == T::zero() {
                lu[(k, k)] = floor;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Self { lu, perm }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= self.lu[(i, k)] * x[k];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in i + 1..n {
                acc -= self.lu[(i, k)] * x[k];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }
}

/// Eigenvalue as a (real, imaginary) pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenvalue<T> {
    pub re: T,
    pub im: T,
}

/// Parlett–Reinsch balancing by powers of two. Eigenvalues are unchanged.
fn balance<T: Scalar>(a: &mut Matrix<T>) {
    let n = a.rows();
    let radix = T::from_f64(2.0);
    let radix2 = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let mut g = r / radix;
            let mut f = T::one();
            let s = c + r;
            while c < g {
                f *= radix;
                c *= radix2;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix2;
            }
            if (c + r) / f < T::from_f64(0.95) * s {
                done = false;
                let g = f.recip();
                for j in 0..n {
                    a[(i, j)] *= g;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form (in place).
fn hessenberg<T: Scalar>(h: &mut Matrix<T>) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let mut ort = vec![T::zero(); n];
    let high = n - 1;
    for m in 1..high {
        let scale: T = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == T::zero() {
            continue;
        }
        let mut hh = T::zero();
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > T::zero() {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = T::zero();
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                let o = ort[i];
                h[(i, j)] -= f * o;
            }
        }
        for i in 0..=high {
            let mut f = T::zero();
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                let o = ort[j];
                h[(i, j)] -= f * o;
            }
        }
        ort[m] = scale * ort[m];
        h[(m, m - 1)] = scale * g;
    }
    for i in 2..n {
        for j in 0..i - 1 {
            h[(i, j)] = T::zero();
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift QR
/// iteration (EISPACK `hqr` lineage). The input is destroyed.
fn hqr<T: Scalar>(h: &mut Matrix<T>, max_iter_per_value: usize) -> Result<Vec<Eigenvalue<T>>> {
    let nn = h.rows();
    let mut d = vec![T::zero(); nn];
    let mut e = vec![T::zero(); nn];
    if nn == 0 {
        return Ok(Vec::new());
    }
    let eps = T::from_f64(T::EPSILON);
    let zero = T::zero();
    let mut exshift = zero;
    let mut norm = zero;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut n = nn as isize - 1;
    let low: isize = 0;
    let mut iter = 0usize;
    let mut total_iter = 0usize;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);
    let at = |h: &Matrix<T>, i: isize, j: isize| h[(i as usize, j as usize)];

    while n >= low {
        let mut l = n;
        while l > low {
            s = at(h, l - 1, l - 1).abs() + at(h, l, l).abs();
            if s == zero {
                s = norm;
            }
            if at(h, l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            let nu = n as usize;
            h[(nu, nu)] += exshift;
            d[nu] = h[(nu, nu)];
            e[nu] = zero;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            let nu = n as usize;
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / T::from_f64(2.0);
            q = p * p + w;
            z = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(nu - 1, nu - 1)] += exshift;
            x = h[(nu, nu)];
            if q >= zero {
                z = if p >= zero { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != zero {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = zero;
                e[nu] = zero;
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            let nu = n as usize;
            x = h[(nu, nu)];
            y = zero;
            w = zero;
            if l < n {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }
            // Exceptional shifts.
            if iter == 10 {
                exshift += x;
                for i in low as usize..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = T::from_f64(0.75) * s;
                y = x;
                w = T::from_f64(-0.4375) * s * s;
            }
            if iter == 30 {
                s = (y - x) / T::from_f64(2.0);
                s = s * s + w;
                if s > zero {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / T::from_f64(2.0) + s);
                    for i in low as usize..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = T::from_f64(0.964);
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total_iter += 1;
            if total_iter > max_iter_per_value * nn {
                return Err(Error::EigenNoConvergence {
                    iterations: total_iter,
                });
            }

            let mut m = n - 2;
            loop {
                z = at(h, m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / at(h, m + 1, m) + at(h, m, m + 1);
                q = at(h, m + 1, m + 1) - z - r - s;
                r = at(h, m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if at(h, m, m - 1).abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (at(h, m - 1, m - 1).abs() + z.abs() + at(h, m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            let mu = m as usize;
            for i in mu + 2..=nu {
                h[(i, i - 2)] = zero;
                if i > mu + 2 {
                    h[(i, i - 3)] = zero;
                }
            }

            let lu = l as usize;
            for k in mu..nu {
                let notlast = k != nu - 1;
                if k != mu {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { zero };
                    x = p.abs() + q.abs() + r.abs();
                    if x == zero {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < zero {
                    s = -s;
                }
                if s != zero {
                    if k != mu {
                        h[(k, k - 1)] = -s * x;
                    } else if lu != mu {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    // Row modification, restricted to the active block.
                    for j in k..=nu {
                        let mut pp = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            pp += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= pp * z;
                        }
                        h[(k, j)] -= pp * x;
                        h[(k + 1, j)] -= pp * y;
                    }
                    // Column modification.
                    let top = nu.min(k + 3);
                    for i in lu..=top {
                        let mut pp = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            pp += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= pp * r;
                        }
                        h[(i, k)] -= pp;
                        h[(i, k + 1)] -= pp * q;
                    }
                }
            }
        }
    }

    Ok(d.into_iter()
        .zip(e)
        .map(|(re, im)| Eigenvalue { re, im })
        .collect())
}

/// All eigenvalues of a general real square matrix.
pub fn eigenvalues<T: Scalar>(a: &Matrix<T>) -> Result<Vec<Eigenvalue<T>>> {
    assert!(a.is_square());
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    hqr(&mut h, 60)
}

/// Right eigenvector for a real eigenvalue `mu` by inverse iteration.
///
/// Returns a unit-2-norm vector whose largest component is positive.
pub fn inverse_iteration<T: Scalar>(a: &Matrix<T>, mu: T, sweeps: usize) -> Vec<T> {
    let n = a.rows();
    let scale = a.norm_inf().max(mu.abs()).max(T::one());
    let shifted = Matrix::from_fn(n, n, |i, j| if i == j { a[(i, j)] - mu } else { a[(i, j)] });
    let lu = Lu::new(&shifted, T::from_f64(T::EPSILON) * scale);
    let mut v: Vec<T> = (0..n)
        .map(|i| T::one() + T::from_f64(i as f64 / n as f64 * 0.5))
        .collect();
    for _ in 0..sweeps.max(1) {
        let mut next = lu.solve(&v);
        let nrm = norm2(&next);
        for x in &mut next {
            *x /= nrm;
        }
        v = next;
    }
    orient(&mut v);
    v
}

/// Flips sign so that the component of largest magnitude is positive.
pub fn orient<T: Scalar>(v: &mut [T]) {
    let mut big = T::zero();
    let mut sign_neg = false;
    for &x in v.iter() {
        if x.abs() > big {
            big = x.abs();
            sign_neg = x < T::zero();
        }
    }
    if sign_neg {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::DoubleDouble;

    fn sorted_real(ev: &[Eigenvalue<f64>]) -> Vec<f64> {
        let mut v: Vec<f64> = ev.iter().map(|e| e.re).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn diagonal_eigenvalues() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let ev = eigenvalues(&a).unwrap();
        assert_eq!(sorted_real(&ev), vec![1.0, 2.0]);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let a = Matrix::from_rows(&[
            vec![6.0, -11.0, 6.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ]);
        let ev = sorted_real(&eigenvalues(&a).unwrap());
        for (got, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn rotation_has_complex_pair() {
        let a = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let ev = eigenvalues(&a).unwrap();
        let mut im: Vec<f64> = ev.iter().map(|e| e.im).collect();
        im.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((im[0] + 1.0).abs() < 1e-14 && (im[1] - 1.0).abs() < 1e-14);
        assert!(ev.iter().all(|e| e.re.abs() < 1e-14));
    }

    #[test]
    fn trace_and_determinant_preserved() {
        let n = 9;
        let a = Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 - 4.5 + if i == j { 3.0 } else { 0.0 });
        let ev = eigenvalues(&a).unwrap();
        let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
        let sum_re: f64 = ev.iter().map(|e| e.re).sum();
        assert!((trace - sum_re).abs() < 1e-10 * trace.abs().max(1.0));
        assert!(ev.iter().map(|e| e.im).sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        match cholesky(&a) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = Matrix::from_rows(&[
            vec![4.0, 2.0, 0.4],
            vec![2.0, 5.0, 1.0],
            vec![0.4, 1.0, 3.0],
        ]);
        let l = cholesky(&a).unwrap();
        let back: Matrix<f64> = Matrix::from_fn(3, 3, |i, j| (0..3).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>());
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lu_solves_system() {
        let a = Matrix::from_rows(&[
            vec![0.0, 2.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![3.0, 0.0, 1.0],
        ]);
        let x = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x);
        let got = Lu::new(&a, 0.0).solve(&b);
        for (g, w) in got.iter().zip(x) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_iteration_finds_vector() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 3.0]]);
        let v = inverse_iteration(&a, 3.0, 3);
        let r = a.mul_vec(&v);
        assert!((r[0] - 3.0 * v[0]).abs() < 1e-12 && (r[1] - 3.0 * v[1]).abs() < 1e-12);
    }

    #[test]
    fn extended_precision_eigenvalues() {
        type Dd = DoubleDouble;
        let a = Matrix::from_rows(&[
            vec![6.0, -11.0, 6.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .map(Dd::from_f64);
        let mut ev: Vec<Dd> = eigenvalues(&a).unwrap().into_iter().map(|e| e.re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((*got - Dd::from_f64(want)).abs().to_f64() < 1e-28);
        }
    }
}
