//! Complex vector/matrix primitives, circularly symmetric Gaussian sampling and
//! seeded random streams.
//!
//! Matrices are dense and column-major: the simulation mostly walks channel
//! vectors, which are the columns of an `M x K` matrix.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, Gamma, Open01, StandardNormal};

use crate::{Error, Result};

pub type C64 = num_complex::Complex64;

const HALF_SQRT2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Hermitian inner product `u^H v`.
#[inline]
pub fn dot_h(u: &[C64], v: &[C64]) -> C64 {
    debug_assert_eq!(u.len(), v.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in u.iter().zip(v) {
        // conj(a) * b
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    C64::new(re, im)
}

#[inline]
pub fn norm_sqr(u: &[C64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CVec(Vec<C64>);

impl CVec {
    pub fn from_vec(data: Vec<C64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidDimension("vector length must be positive".into()));
        }
        Ok(CVec(data))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn dot_h(&self, other: &CVec) -> C64 {
        dot_h(&self.0, &other.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }
}

impl Index<usize> for CVec {
    type Output = C64;

    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

/// Dense complex matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        check_dims(rows, cols)?;
        Ok(CMat {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        Ok(m)
    }

    /// Builds a matrix from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::InvalidDimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(CMat { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        check_dims(rows, cols)?;
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Ok(CMat { rows, cols, data })
    }

    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        check_dims(rows, cols)?;
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidDimension("ragged columns".into()));
        }
        Ok(CMat {
            rows,
            cols,
            data: columns.concat(),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn col(&self, c: usize) -> &[C64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [C64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    /// `self^H * other`.
    pub fn h_mul(&self, other: &CMat) -> Result<CMat> {
        if self.rows != other.rows {
            return Err(Error::InvalidDimension(format!(
                "cannot form A^H B with A {}x{} and B {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Vec::with_capacity(self.cols * other.cols);
        for j in 0..other.cols {
            let b = other.col(j);
            for i in 0..self.cols {
                out.push(dot_h(self.col(i), b));
            }
        }
        CMat::from_col_major(self.cols, other.cols, out)
    }

    /// `self * other`.
    pub fn mul(&self, other: &CMat) -> Result<CMat> {
        if self.cols != other.rows {
            return Err(Error::InvalidDimension(format!(
                "cannot form A B with A {}x{} and B {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMat::zeros(self.rows, other.cols)?;
        for j in 0..other.cols {
            for l in 0..self.cols {
                let w = other[(l, j)];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = &self.data[l * self.rows..(l + 1) * self.rows];
                let dst = out.col_mut(j);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * w;
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix `self^H self`, exactly Hermitian.
    pub fn gram(&self) -> CMat {
        let n = self.cols;
        let mut g = vec![C64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for i in 0..=j {
                let v = dot_h(self.col(i), self.col(j));
                g[j * n + i] = v;
                g[i * n + j] = v.conj();
            }
            g[j * n + j].im = 0.0;
        }
        CMat {
            rows: n,
            cols: n,
            data: g,
        }
    }

    pub fn sub(&self, other: &CMat) -> Result<CMat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::InvalidDimension("shape mismatch".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn frobenius(&self) -> f64 {
        libm::sqrt(norm_sqr(&self.data))
    }

    /// Largest `|A - A^H|` entry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.cols {
            for i in 0..self.rows {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[c * self.rows + r]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[c * self.rows + r]
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDimension(format!("{rows}x{cols}")));
    }
    Ok(())
}

/// Square-root-free Cholesky factorization `A = L D L^H` with unit lower
/// triangular `L` and positive diagonal `D`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: CMat,
    d: Vec<f64>,
}

impl Cholesky {
    pub fn new(a: &CMat) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::InvalidDimension("Cholesky needs a square matrix".into()));
        }
        let mut l = CMat::identity(n)?;
        let mut d = vec![0.0; n];
        for j in 0..n {
            let mut dj = a[(j, j)].re;
            for p in 0..j {
                dj -= l[(j, p)].norm_sqr() * d[p];
            }
            if !(dj > 0.0) || !dj.is_finite() {
                return Err(Error::SingularMatrix);
            }
            d[j] = dj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)].conj() * d[p];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(Cholesky { l, d })
    }

    /// Lower bound on the 2-norm condition number of `A` (ratio of the
    /// extreme pivots).
    pub fn condition_estimate(&self) -> f64 {
        let lo = self.d.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.d.iter().copied().fold(0.0, f64::max);
        hi / lo
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &CMat) -> Result<CMat> {
        let n = self.l.rows();
        if b.rows() != n {
            return Err(Error::InvalidDimension("right-hand side rows".into()));
        }
        let mut x = b.clone();
        for c in 0..x.cols() {
            let col = x.col_mut(c);
            for i in 0..n {
                let mut s = col[i];
                for p in 0..i {
                    s -= self.l[(i, p)] * col[p];
                }
                col[i] = s;
            }
            for (z, d) in col.iter_mut().zip(&self.d) {
                *z /= *d;
            }
            for i in (0..n).rev() {
                let mut s = col[i];
                for p in i + 1..n {
                    s -= self.l[(p, i)].conj() * col[p];
                }
                col[i] = s;
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<CMat> {
        self.solve(&CMat::identity(self.l.rows())?)
    }
}

/// Solves `A X = B` for Hermitian positive-definite `A` via Cholesky.
pub fn hermitian_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.rows() != a.cols() {
        return Err(Error::InvalidDimension("A must be square".into()));
    }
    let scale = a.as_slice().iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    let defect = a.hermitian_defect();
    if defect > 1e-10 * scale {
        return Err(Error::NotHermitian(defect));
    }
    Cholesky::new(a)?.solve(b)
}

/// Deterministic random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped onto the cipher's stream
/// counter, so distinct ids are independent sequences and any trial can be
/// replayed on any worker.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RandomStream { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Standard real Gaussian N(0, 1).
    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        Open01.sample(&mut self.rng)
    }

    /// One CN(0, 1) draw: real and imaginary parts each N(0, 1/2).
    #[inline]
    pub fn cn(&mut self) -> C64 {
        let re: f64 = StandardNormal.sample(&mut self.rng);
        let im: f64 = StandardNormal.sample(&mut self.rng);
        C64::new(re * HALF_SQRT2, im * HALF_SQRT2)
    }

    pub fn fill_cn(&mut self, out: &mut [C64]) {
        for z in out {
            *z = self.cn();
        }
    }

    pub fn gamma(&mut self, dist: &Gamma<f64>) -> f64 {
        dist.sample(&mut self.rng)
    }
}

/// Draws a CN(0, I) vector of length `dim`.
pub fn sample_cn(dim: usize, stream: &mut RandomStream) -> Result<CVec> {
    if dim == 0 {
        return Err(Error::InvalidDimension("sample_cn needs dim >= 1".into()));
    }
    let mut v = vec![C64::new(0.0, 0.0); dim];
    stream.fill_cn(&mut v);
    CVec::from_vec(v)
}

/// Packs a structured trial key into a stream id.
///
/// `point` indexes a sweep point (24 bits), `trial` a Monte Carlo task within
/// it (32 bits) and `purpose` the consumer inside that task (8 bits). The
/// packing is injective, so no two tasks ever share a stream.
pub fn stream_id(point: u32, trial: u32, purpose: u8) -> u64 {
    assert!(point < (1 << 24), "sweep point index out of range");
    ((point as u64) << 40) | ((trial as u64) << 8) | purpose as u64
}
