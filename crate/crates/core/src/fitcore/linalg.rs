//! Householder QR with column pivoting for small dense least-squares problems,
//! real or complex.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    const ZERO: Self;
    const ONE: Self;
    fn conj(self) -> Self;
    fn norm_sqr(self) -> f64;
    fn from_real(x: f64) -> Self;
    fn scale(self, s: f64) -> Self;
    fn is_finite(self) -> bool;

    fn modulus(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Unit-modulus value with the phase of `self` (1 for zero).
    fn phase(self) -> Self {
        let m = self.modulus();
        if m == 0.0 {
            Self::ONE
        } else {
            self.scale(1.0 / m)
        }
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn conj(self) -> Self {
        self
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const ONE: Self = Complex64::new(1.0, 0.0);
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

/// Dense column-major matrix.
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
            data: vec![T::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds from row-major nested slices.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn column_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::ZERO; self.rows];
        for (j, &xj) in x.iter().enumerate().take(self.cols) {
            for (o, &a) in out.iter_mut().zip(self.column(j)) {
                *o += a * xj;
            }
        }
        out
    }

    /// `A^H y`.
    pub fn adjoint_mul_vec(&self, y: &[T]) -> Vec<T> {
        (0..self.cols)
            .map(|j| {
                self.column(j)
                    .iter()
                    .zip(y)
                    .fold(T::ZERO, |acc, (&a, &v)| acc + a.conj() * v)
            })
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[j * self.rows + i]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[j * self.rows + i]
    }
}

pub fn norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Householder reflector `H = I - beta v v^H` with `v[0] = 1`, stored below the
/// diagonal of the factored matrix.
#[derive(Clone, Debug)]
pub struct Qr<T> {
    factors: Matrix<T>,
    beta: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

/// Least-squares solution with its residual norm.
#[derive(Clone, Debug, PartialEq)]
pub struct LsqSolution<T> {
    pub x: Vec<T>,
    pub residual_norm: f64,
    /// Numerical rank below the column count; `x` is then the minimum-norm solution.
    pub rank_deficient: bool,
}

impl<T: Scalar> Qr<T> {
    /// Factors `A P = Q R` with greedy column pivoting.
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        let (m, n) = (a.rows, a.cols);
        if n == 0 || m < n {
            return Err(Error::InvalidArgument(format!(
                "least squares needs rows >= cols >= 1, got {m}x{n}"
            )));
        }
        if a.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        let mut f = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut beta = vec![0.0; n];
        for k in 0..n {
            // pivot: largest remaining column norm
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..n {
                let s: f64 = f.column(j)[k..].iter().map(|v| v.norm_sqr()).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                for i in 0..m {
                    let tmp = f[(i, k)];
                    f[(i, k)] = f[(i, best)];
                    f[(i, best)] = tmp;
                }
                perm.swap(k, best);
            }
            let col = &f.column(k)[k..];
            let xnorm = norm(col);
            if xnorm == 0.0 {
                beta[k] = 0.0;
                continue;
            }
            let x0 = col[0];
            let alpha = -(x0.phase().scale(xnorm));
            let v0 = x0 - alpha;
            let v0_abs2 = v0.norm_sqr();
            // v = (x - alpha e1) / v0, so v[0] = 1
            let tail: f64 = col[1..].iter().map(|v| v.norm_sqr()).sum();
            let vnorm2 = 1.0 + tail / v0_abs2;
            beta[k] = 2.0 / vnorm2;
            {
                let colm = f.column_mut(k);
                colm[k] = alpha;
                for v in colm[k + 1..].iter_mut() {
                    *v = *v / v0;
                }
            }
            for j in k + 1..n {
                let (vk, rest) = split_columns(&mut f, k, j);
                apply_reflector(&vk[k..], beta[k], &mut rest[k..]);
            }
        }
        let r00 = f[(0, 0)].modulus();
        let tol = (m.max(n) as f64) * f64::EPSILON * r00;
        let rank = if r00 == 0.0 {
            0
        } else {
            (0..n).take_while(|&k| f[(k, k)].modulus() > tol).count()
        };
        Ok(Self {
            factors: f,
            beta,
            perm,
            rank,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.factors.cols
    }

    /// Overwrites `b` with `Q^H b`.
    pub fn apply_qh(&self, b: &mut [T]) {
        for k in 0..self.factors.cols {
            if self.beta[k] != 0.0 {
                apply_reflector(&self.factors.column(k)[k..], self.beta[k], &mut b[k..]);
            }
        }
    }

    /// Squared residual of the least-squares problem for `b`; `b` is used as scratch.
    pub fn residual_sq_in_place(&self, b: &mut [T]) -> f64 {
        self.apply_qh(b);
        b[self.rank..].iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn solve(&self, b: &[T]) -> Result<LsqSolution<T>> {
        let (m, n) = (self.factors.rows, self.factors.cols);
        if b.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} entries, matrix has {m} rows",
                b.len()
            )));
        }
        let mut c = b.to_vec();
        self.apply_qh(&mut c);
        let residual_norm = norm(&c[self.rank..]);
        let r = self.rank;
        let mut y = vec![T::ZERO; n];
        if r == n {
            for i in (0..n).rev() {
                let mut s = c[i];
                for j in i + 1..n {
                    s -= self.factors[(i, j)] * y[j];
                }
                y[i] = s / self.factors[(i, i)];
            }
        } else if r > 0 {
            // complete orthogonal decomposition: R1^H = Z [S; 0]
            let r1h = Matrix::from_fn(n, r, |i, j| {
                if i >= j {
                    self.factors[(j, i)].conj()
                } else {
                    T::ZERO
                }
            });
            let z = Qr::new_unpivoted(&r1h);
            // S^H w = c[..r], S^H lower triangular
            let mut w = vec![T::ZERO; n];
            for i in 0..r {
                let mut s = c[i];
                for j in 0..i {
                    s -= z.factors[(j, i)].conj() * w[j];
                }
                w[i] = s / z.factors[(i, i)].conj();
            }
            // y = Z w = H_1 ... H_r w
            for k in (0..r).rev() {
                if z.beta[k] != 0.0 {
                    apply_reflector(&z.factors.column(k)[k..], z.beta[k], &mut w[k..]);
                }
            }
            y = w;
        }
        let mut x = vec![T::ZERO; n];
        for (j, &p) in self.perm.iter().enumerate() {
            x[p] = y[j];
        }
        Ok(LsqSolution {
            x,
            residual_norm,
            rank_deficient: r < n,
        })
    }

    fn new_unpivoted(a: &Matrix<T>) -> Self {
        let (m, n) = (a.rows, a.cols);
        let mut f = a.clone();
        let mut beta = vec![0.0; n];
        for k in 0..n {
            let col = &f.column(k)[k..];
            let xnorm = norm(col);
            if xnorm == 0.0 {
                continue;
            }
            let x0 = col[0];
            let alpha = -(x0.phase().scale(xnorm));
            let v0 = x0 - alpha;
            let tail: f64 = col[1..].iter().map(|v| v.norm_sqr()).sum();
            beta[k] = 2.0 / (1.0 + tail / v0.norm_sqr());
            {
                let colm = f.column_mut(k);
                colm[k] = alpha;
                for v in colm[k + 1..].iter_mut() {
                    *v = *v / v0;
                }
            }
            for j in k + 1..n {
                let (vk, rest) = split_columns(&mut f, k, j);
                apply_reflector(&vk[k..], beta[k], &mut rest[k..]);
            }
        }
        let _ = m;
        Self {
            factors: f,
            beta,
            perm: (0..n).collect(),
            rank: n,
        }
    }
}

fn split_columns<T>(m: &mut Matrix<T>, k: usize, j: usize) -> (&[T], &mut [T]) {
    debug_assert!(k < j);
    let rows = m.rows;
    let (left, right) = m.data.split_at_mut(j * rows);
    (&left[k * rows..(k + 1) * rows], &mut right[..rows])
}

/// `x <- (I - beta v v^H) x` with implicit `v[0] = 1`.
#[inline]
fn apply_reflector<T: Scalar>(v: &[T], beta: f64, x: &mut [T]) {
    let mut dot = x[0];
    for (vi, xi) in v[1..].iter().zip(&x[1..]) {
        dot += vi.conj() * *xi;
    }
    let s = dot.scale(beta);
    x[0] -= s;
    for (vi, xi) in v[1..].iter().zip(x[1..].iter_mut()) {
        *xi -= *vi * s;
    }
}

/// Minimizes `||a x - b||_2` through a pivoted Householder QR.
pub fn lsq_solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<LsqSolution<T>> {
    Qr::new(a)?.solve(b)
}
