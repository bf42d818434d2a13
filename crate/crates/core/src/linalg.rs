//! Small dense matrices and tensors for pointwise geometry.
//!
//! Dimensions are tiny (2 to 4), so everything is row-major `Vec` storage
//! with straightforward algorithms: Gauss-Jordan inversion, Cholesky and
//! cyclic Jacobi for symmetric eigenvalues.

use std::ops::{Index, IndexMut};

use crate::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { T::zero() })
    }

    /// Row-major construction; `rows.len()` must be a perfect square.
    pub fn from_row_slice(n: usize, rows: &[T]) -> Self {
        assert_eq!(rows.len(), n * n, "matrix data length");
        Matrix { n, data: rows.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: T) -> Self {
        Matrix { n: self.n, data: self.data.iter().map(|&v| v * s).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Matrix { n: self.n, data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::from_fn(self.n, |i, j| (0..self.n).map(|k| self[(i, k)] * other[(k, j)]).sum())
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n).map(|i| (0..self.n).map(|k| self[(i, k)] * v[k]).sum()).collect()
    }

    /// `uᵀ A v`.
    pub fn bilinear(&self, u: &[T], v: &[T]) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                s += u[i] * self[(i, j)] * v[j];
            }
        }
        s
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.n, |i, j| half * (self[(i, j)] + self[(j, i)]))
    }

    /// Gauss-Jordan with partial pivoting. `None` for (numerically) singular input.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs();
        if scale == T::zero() {
            return None;
        }
        for col in 0..n {
            let pivot = (col..n).max_by(|&r, &s| a[(r, col)].abs().partial_cmp(&a[(s, col)].abs()).unwrap()).unwrap();
            if a[(pivot, col)].abs() <= T::epsilon() * scale {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                    inv.data.swap(pivot * n + j, col * n + j);
                }
            }
            let p = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = a[(r, col)];
                    if f != T::zero() {
                        for j in 0..n {
                            let (ac, ic) = (a[(col, j)], inv[(col, j)]);
                            a[(r, j)] -= f * ac;
                            inv[(r, j)] -= f * ic;
                        }
                    }
                }
            }
        }
        Some(inv)
    }

    pub fn determinant(&self) -> T {
        let n = self.n;
        let mut a = self.clone();
        let mut det = T::one();
        for col in 0..n {
            let pivot = (col..n).max_by(|&r, &s| a[(r, col)].abs().partial_cmp(&a[(s, col)].abs()).unwrap()).unwrap();
            if a[(pivot, col)] == T::zero() {
                return T::zero();
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                }
                det = -det;
            }
            let p = a[(col, col)];
            det *= p;
            for r in col + 1..n {
                let f = a[(r, col)] / p;
                for j in col..n {
                    let v = a[(col, j)];
                    a[(r, j)] -= f * v;
                }
            }
        }
        det
    }

    /// Lower-triangular `L` with `L Lᵀ = self`, or `None` if not positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.n;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= T::zero() {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Some(l)
    }

    /// Eigenvalues of the symmetric part, ascending (cyclic Jacobi).
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        let mut a = self.symmetrized();
        let tol = T::epsilon() * a.max_abs().max(T::min_positive_value());
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..i {
                    off = off.max(a[(i, j)].abs());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= tol * T::lit(1e-3) {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }

    pub fn min_eigenvalue(&self) -> T {
        self.symmetric_eigenvalues()[0]
    }

    /// Eigenvalues of the pencil `(self, b)` for symmetric `self` and SPD `b`, ascending.
    pub fn generalized_eigenvalues(&self, b: &Self) -> Option<Vec<T>> {
        let l = b.cholesky()?;
        let linv = lower_triangular_inverse(&l)?;
        let c = linv.mul(&self.symmetrized()).mul(&linv.transpose());
        Some(c.symmetric_eigenvalues())
    }
}

fn lower_triangular_inverse<T: Real>(l: &Matrix<T>) -> Option<Matrix<T>> {
    let n = l.dim();
    let mut inv = Matrix::zeros(n);
    for j in 0..n {
        if l[(j, j)] == T::zero() {
            return None;
        }
        inv[(j, j)] = T::one() / l[(j, j)];
        for i in j + 1..n {
            let mut s = T::zero();
            for k in j..i {
                s += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    Some(inv)
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Dense third-order array indexed `[(a, b, c)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(n: usize) -> Self {
        Tensor3 { n, data: vec![T::zero(); n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

impl<T> Index<(usize, usize, usize)> for Tensor3<T> {
    type Output = T;
    fn index(&self, (a, b, c): (usize, usize, usize)) -> &T {
        &self.data[(a * self.n + b) * self.n + c]
    }
}

impl<T> IndexMut<(usize, usize, usize)> for Tensor3<T> {
    fn index_mut(&mut self, (a, b, c): (usize, usize, usize)) -> &mut T {
        &mut self.data[(a * self.n + b) * self.n + c]
    }
}

/// Dense fourth-order array indexed `[(a, b, c, d)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor4<T> {
    pub fn zeros(n: usize) -> Self {
        Tensor4 { n, data: vec![T::zero(); n * n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

impl<T> Index<(usize, usize, usize, usize)> for Tensor4<T> {
    type Output = T;
    fn index(&self, (a, b, c, d): (usize, usize, usize, usize)) -> &T {
        &self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }
}

impl<T> IndexMut<(usize, usize, usize, usize)> for Tensor4<T> {
    fn index_mut(&mut self, (a, b, c, d): (usize, usize, usize, usize)) -> &mut T {
        &mut self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }
}
