//! Swapping-transform algebra.
//!
//! Register reshuffles are represented as qubit permutations and applied by
//! index remapping; the protocol engine treats them as label-reorder views
//! and never materialises them. Matrices (via [`w_n`]) exist for test-time
//! verification on registers of at most 8 qubits.
//!
//! All positions are 1-based. `dest[i]` is the new position of the qubit at
//! old position `i`, so a permutation moves *contents*, not slots.

use thiserror::Error;

use crate::linalg::{C64, CMat};
use crate::qstate::StateVector;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("position {pos} out of range for {n} qubits")]
    OutOfRange { pos: usize, n: usize },
    #[error("positions must satisfy {left} < {right}")]
    BadOrder { left: usize, right: usize },
    #[error("dest is not a bijection on 1..={0}")]
    NotBijection(usize),
    #[error("invalid block sizes: N={n_blocks}, n={controllers}")]
    InvalidSize { n_blocks: usize, controllers: usize },
}

/// A permutation of qubit positions: the qubit at old position `i` moves to
/// `dest[i]` (1-based).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QubitPermutation {
    n: usize,
    dest: Vec<usize>,
}

impl QubitPermutation {
    pub fn new(dest: Vec<usize>) -> Result<Self, Error> {
        let n = dest.len();
        let mut seen = vec![false; n];
        for &d in &dest {
            if d < 1 || d > n || seen[d - 1] {
                return Err(Error::NotBijection(n));
            }
            seen[d - 1] = true;
        }
        Ok(Self { n, dest })
    }

    pub fn identity(n: usize) -> Self {
        Self { n, dest: (1..=n).collect() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// New position of the qubit at old position `i` (1-based).
    pub fn dest(&self, i: usize) -> usize {
        self.dest[i - 1]
    }

    pub fn inverse(&self) -> Self {
        let mut dest = vec![0; self.n];
        for (i, &d) in self.dest.iter().enumerate() {
            dest[d - 1] = i + 1;
        }
        Self { n: self.n, dest }
    }

    /// Apply `self` first, then `next` (matrix order: W(next)·W(self)).
    pub fn then(&self, next: &QubitPermutation) -> Self {
        assert_eq!(self.n, next.n, "permutation size mismatch");
        let dest = self.dest.iter().map(|&d| next.dest[d - 1]).collect();
        Self { n: self.n, dest }
    }

    /// Same permutation acting on positions offset+1..offset+n of a larger
    /// register, identity elsewhere.
    pub fn embedded(&self, offset: usize, total: usize) -> Self {
        assert!(offset + self.n <= total, "embedding exceeds register");
        let mut dest: Vec<usize> = (1..=total).collect();
        for i in 0..self.n {
            dest[offset + i] = offset + self.dest[i];
        }
        Self { n: total, dest }
    }

    /// Permute any list of per-qubit items: output slot `dest[i]` receives
    /// the item at old position `i`.
    pub fn permute_slice<T: Copy>(&self, items: &[T]) -> Vec<T> {
        assert_eq!(items.len(), self.n, "item count mismatch");
        let mut out = items.to_vec();
        for (i, &d) in self.dest.iter().enumerate() {
            out[d - 1] = items[i];
        }
        out
    }

    /// Permute a state vector's amplitudes by moving each bit of the global
    /// index from position i to `dest[i]` (positions count from the most
    /// significant end). The structure's labels are permuted in step so the
    /// state refers to the same physical system.
    pub fn apply_to_state(&self, state: &StateVector) -> StateVector {
        assert_eq!(state.structure.n_qubits(), self.n, "state size mismatch");
        let n = self.n;
        let mut amps = vec![C64::new(0.0, 0.0); state.dim()];
        for (idx, &a) in state.amps.iter().enumerate() {
            let mut out = 0usize;
            for i in 1..=n {
                let bit = (idx >> (n - i)) & 1;
                out |= bit << (n - self.dest[i - 1]);
            }
            amps[out] = a;
        }
        let labels = self.permute_slice(state.structure.labels());
        StateVector {
            structure: crate::qstate::SpaceStructure::new(labels).expect("labels stay distinct"),
            amps,
            normalized: state.normalized,
        }
    }
}

fn check_pos(pos: usize, n: usize) -> Result<(), Error> {
    if pos < 1 || pos > n {
        return Err(Error::OutOfRange { pos, n });
    }
    Ok(())
}

/// The 4×4 two-qubit swap matrix S_W: |αβ⟩ → |βα⟩.
pub fn swap_adjacent_matrix() -> CMat {
    CMat::from_real(4, 4, &[
        1., 0., 0., 0., //
        0., 0., 1., 0., //
        0., 1., 0., 0., //
        0., 0., 0., 1.,
    ])
}

/// Adjacent swap of positions i, i+1 on an n-qubit register.
pub fn s_n(i: usize, n: usize) -> Result<QubitPermutation, Error> {
    check_pos(i, n)?;
    check_pos(i + 1, n)?;
    let mut dest: Vec<usize> = (1..=n).collect();
    dest.swap(i - 1, i);
    Ok(QubitPermutation { n, dest })
}

/// Forward rearrangement: the qubit at position j moves to position i;
/// qubits i..j-1 shift right by one.
pub fn f_n(i: usize, j: usize, n: usize) -> Result<QubitPermutation, Error> {
    if i >= j {
        return Err(Error::BadOrder { left: i, right: j });
    }
    check_pos(i, n)?;
    check_pos(j, n)?;
    let mut dest: Vec<usize> = (1..=n).collect();
    dest[j - 1] = i;
    for q in i..j {
        dest[q - 1] = q + 1;
    }
    Ok(QubitPermutation { n, dest })
}

/// Backward rearrangement: the qubit at position j moves to position k;
/// qubits j+1..k shift left by one. Inverse of [`f_n`] with the same pair.
pub fn p_n(j: usize, k: usize, n: usize) -> Result<QubitPermutation, Error> {
    if j >= k {
        return Err(Error::BadOrder { left: j, right: k });
    }
    check_pos(j, n)?;
    check_pos(k, n)?;
    let mut dest: Vec<usize> = (1..=n).collect();
    dest[j - 1] = k;
    for q in j + 1..=k {
        dest[q - 1] = q - 1;
    }
    Ok(QubitPermutation { n, dest })
}

/// [`f_n`] written as its defining product of adjacent swaps (the swap of
/// (j-1, j) applied first). Test companion for the direct constructor.
pub fn f_n_product(i: usize, j: usize, n: usize) -> Result<QubitPermutation, Error> {
    if i >= j {
        return Err(Error::BadOrder { left: i, right: j });
    }
    let mut acc = QubitPermutation::identity(n);
    for alpha in 1..=j - i {
        acc = acc.then(&s_n(j - alpha, n)?);
    }
    Ok(acc)
}

/// [`p_n`] written as its defining product of adjacent swaps (the swap of
/// (j, j+1) applied first). Test companion for the direct constructor.
pub fn p_n_product(j: usize, k: usize, n: usize) -> Result<QubitPermutation, Error> {
    if j >= k {
        return Err(Error::BadOrder { left: j, right: k });
    }
    let mut acc = QubitPermutation::identity(n);
    for beta in j..k {
        acc = acc.then(&s_n(beta, n)?);
    }
    Ok(acc)
}

/// The named block interleavers. `n_blocks` is the block count N;
/// `controllers` is the controller count n (used by the Theta/Xi family
/// only, which acts on 3N+n qubits).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum InterleaverKind {
    /// a1 b1 … aN bN → a-block, b-block (2N qubits).
    Lambda2,
    /// Half-block swap (2N qubits).
    Omega2,
    /// pair-block (2N) + tail block (N) → tail block first (3N qubits).
    Omega3,
    /// a1 b1 … aN bN, k1…kN → a1 b1 k1, … (3N qubits).
    Upsilon3,
    /// triples + k-block → quadruples (4N qubits).
    Upsilon4,
    /// a1 b1 … aN bN, k1…kN → a-block, k-block, b-block (3N qubits).
    Gamma3,
    /// triples a_s b_s c_s → c-block, then a_s b_s pairs (3N qubits).
    ThetaN,
    /// mixed triples/pairs + Y-block → c-block, A-block, B-block, Y-block
    /// (3N+n qubits).
    ThetaA,
    /// mixed triples/pairs + Y-block → c-block, then A_s B_s Y_s triples
    /// (3N+n qubits).
    ThetaB,
    /// ThetaN on the first 3n qubits, identity on the rest (3N+n qubits).
    ThetaC,
    /// Inverse of ThetaB: c-block + A_s B_s Y_s triples → the initial mixed
    /// structure (3N+n qubits).
    Xi,
}

pub fn interleavers(
    kind: InterleaverKind,
    n_blocks: usize,
    controllers: usize,
) -> Result<QubitPermutation, Error> {
    use InterleaverKind::*;
    let nb = n_blocks;
    let nc = controllers;
    if nb == 0 {
        return Err(Error::InvalidSize { n_blocks: nb, controllers: nc });
    }
    let theta_family = matches!(kind, ThetaA | ThetaB | ThetaC | Xi);
    if theta_family && nc > nb {
        return Err(Error::InvalidSize { n_blocks: nb, controllers: nc });
    }
    let perm = match kind {
        Lambda2 => {
            let mut dest = vec![0; 2 * nb];
            for i in 1..=nb {
                dest[2 * i - 2] = i;
                dest[2 * i - 1] = nb + i;
            }
            QubitPermutation::new(dest).expect("bijective by construction")
        }
        Omega2 => {
            let dest = (1..=2 * nb).map(|q| if q <= nb { q + nb } else { q - nb }).collect();
            QubitPermutation::new(dest).expect("bijective by construction")
        }
        Omega3 => {
            let dest = (1..=3 * nb).map(|q| if q <= 2 * nb { q + nb } else { q - 2 * nb }).collect();
            QubitPermutation::new(dest).expect("bijective by construction")
        }
        Upsilon3 => {
            let mut dest = vec![0; 3 * nb];
            for i in 1..=nb {
                dest[2 * i - 2] = 3 * i - 2;
                dest[2 * i - 1] = 3 * i - 1;
                dest[2 * nb + i - 1] = 3 * i;
            }
            QubitPermutation::new(dest).expect("bijective by construction")
        }
        Upsilon4 => {
            let mut dest = vec![0; 4 * nb];
            for i in 1..=nb {
                dest[3 * i - 3] = 4 * i - 3;
                dest[3 * i - 2] = 4 * i - 2;
                dest[3 * i - 1] = 4 * i - 1;
                dest[3 * nb + i - 1] = 4 * i;
            }
            QubitPermutation::new(dest).expect("bijective by construction")
        }
        Gamma3 => {
            let mut dest = vec![0; 3 * nb];
            for i in 1..=nb {
                dest[2 * i - 2] = i;
                dest[2 * i - 1] = 2 * nb + i;
                dest[2 * nb + i - 1] = nb + i;
            }
            QubitPermutation::new(dest).expect("bijective by construction")
        }
        ThetaN => {
            let mut dest = vec![0; 3 * nb];
            for s in 1..=nb {
                dest[3 * s - 3] = nb + 2 * s - 1;
                dest[3 * s - 2] = nb + 2 * s;
                dest[3 * s - 1] = s;
            }
            QubitPermutation::new(dest).expect("bijective by construction")
        }
        ThetaC => {
            let total = 3 * nb + nc;
            if nc == 0 {
                QubitPermutation::identity(total)
            } else {
                interleavers(ThetaN, nc, 0)?.embedded(0, total)
            }
        }
        ThetaB => {
            let total = 3 * nb + nc;
            let mut dest = vec![0; total];
            for m in 1..=nc {
                dest[3 * m - 3] = nc + 3 * m - 2;
                dest[3 * m - 2] = nc + 3 * m - 1;
                dest[3 * m - 1] = m;
            }
            for s in nc + 1..=nb {
                dest[3 * nc + 2 * (s - nc) - 2] = nc + 3 * s - 2;
                dest[3 * nc + 2 * (s - nc) - 1] = nc + 3 * s - 1;
            }
            for s in 1..=nb {
                dest[2 * nb + nc + s - 1] = nc + 3 * s;
            }
            QubitPermutation::new(dest).expect("bijective by construction")
        }
        ThetaA => {
            let total = 3 * nb + nc;
            let mut dest = vec![0; total];
            for m in 1..=nc {
                dest[3 * m - 3] = nc + m;
                dest[3 * m - 2] = nc + nb + m;
                dest[3 * m - 1] = m;
            }
            for s in nc + 1..=nb {
                dest[3 * nc + 2 * (s - nc) - 2] = nc + s;
                dest[3 * nc + 2 * (s - nc) - 1] = nc + nb + s;
            }
            for s in 1..=nb {
                dest[2 * nb + nc + s - 1] = nc + 2 * nb + s;
            }
            QubitPermutation::new(dest).expect("bijective by construction")
        }
        Xi => interleavers(ThetaB, nb, nc)?.inverse(),
    };
    Ok(perm)
}

/// 2^n × 2^n 0/1 matrix realising the qubit permutation on basis states.
/// Test-time only; capped at 8 qubits.
pub fn w_n(perm: &QubitPermutation) -> CMat {
    let n = perm.n();
    assert!(n <= 8, "w_n matrices are capped at 8 qubits (test-time use only)");
    let dim = 1usize << n;
    let mut m = CMat::zeros(dim, dim);
    for old in 0..dim {
        let mut new = 0usize;
        for i in 1..=n {
            let bit = (old >> (n - i)) & 1;
            new |= bit << (n - perm.dest(i));
        }
        m.set(new, old, C64::new(1.0, 0.0));
    }
    m
}

/// Conjugation action on a tensor list of single-qubit operators:
/// W·(⊗ M_i)·W⁻¹ carries the factor at old position i to position dest[i].
pub fn conjugate_factors(perm: &QubitPermutation, factors: &[CMat]) -> Vec<CMat> {
    assert_eq!(factors.len(), perm.n(), "factor count mismatch");
    let mut out = factors.to_vec();
    for i in 1..=perm.n() {
        out[perm.dest(i) - 1] = factors[i - 1].clone();
    }
    out
}
