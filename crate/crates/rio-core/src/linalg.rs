//! Dense complex matrices.
//!
//! Everything in this crate runs on registers of at most 20 qubits and
//! matrices of at most 2^8 × 2^8 (larger transforms are applied as index
//! permutations, never materialised), so a plain row-major `Vec` with
//! straightforward O(n³) multiply is all that is needed.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type C64 = Complex64;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    /// Build from real entries (row major), convenience for gate constants.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count mismatch");
        Self { rows, cols, data: entries.iter().map(|&re| C64::new(re, 0.0)).collect() }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "matrix product shape mismatch");
        let mut out = CMat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn kron(&self, other: &CMat) -> CMat {
        let mut out = CMat::zeros(self.rows * other.rows, self.cols * other.cols);
        for r1 in 0..self.rows {
            for c1 in 0..self.cols {
                let a = self.get(r1, c1);
                for r2 in 0..other.rows {
                    for c2 in 0..other.cols {
                        out.set(r1 * other.rows + r2, c1 * other.cols + c2, a * other.get(r2, c2));
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "matrix sum shape mismatch");
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn dagger(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "matrix shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &CMat, tol: f64) -> bool {
        (self.rows, self.cols) == (other.rows, other.cols) && self.max_abs_diff(other) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.rows == self.cols && self.mul(&self.dagger()).approx_eq(&CMat::identity(self.rows), tol)
    }
}

/// Kronecker product of a nonempty list, left factor most significant.
pub fn kron_all(mats: &[CMat]) -> CMat {
    assert!(!mats.is_empty(), "kron_all of empty list");
    let mut acc = mats[0].clone();
    for m in &mats[1..] {
        acc = acc.kron(m);
    }
    acc
}

/// Deterministic pseudo-random unitary: complex Gaussian matrix followed by
/// modified Gram–Schmidt. Used by property tests that need generic operators.
pub fn random_unitary(dim: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<C64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im)
                })
                .collect()
        })
        .collect();
    for j in 0..dim {
        for k in 0..j {
            let proj: C64 = (0..dim).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            for i in 0..dim {
                let v = cols[k][i];
                cols[j][i] -= proj * v;
            }
        }
        let norm: f64 = cols[j].iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "degenerate random matrix");
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }
    CMat::from_fn(dim, dim, |r, c| cols[c][r])
}
