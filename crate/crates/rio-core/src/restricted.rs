//! Restricted operator sets and shared gate constants.
//!
//! A restricted set over N qubits is indexed by a permutation p of
//! {1..2^N}: its generic member T(x,t) carries phase t_m at row m, column
//! p_m(x), and is zero elsewhere (one nonzero per row and per column). The
//! phase-free fixed form R(x) is the corresponding permutation matrix, and
//! every member factors as the diagonal T(1,t) times R(x) — the identity the
//! receiver-side recovery relies on.
//!
//! Set indices x are 1-based positions in the lexicographic order of the
//! permutations of {1..2^N}, ranked and unranked through the factorial
//! number system so the mapping is reproducible without a stored table.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{C64, CMat};

/// Entrywise tolerance for the diagonal-times-permutation factorization.
pub const DECOMPOSE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("set index {x} out of range 1..={count}")]
    IndexOutOfRange { x: u64, count: u64 },
    #[error("(2^{0})! does not fit in 64 bits; qubit counts above 4 are not indexable")]
    SetCountOverflow(usize),
    #[error("expected {want} phases, got {got}")]
    WrongPhaseCount { want: usize, got: usize },
    #[error("phase at position {0} is zero")]
    ZeroPhase(usize),
    #[error("sequence is not a permutation of 1..={0}")]
    NotAPermutation(usize),
    #[error("permutation length {0} is not a power of two")]
    BadLength(usize),
    #[error("bits must be 0 or 1, got {0}")]
    BadBit(u8),
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// (2^N)! — the number of restricted sets over N qubits. Errors once the
/// count no longer fits in 64 bits (N ≥ 5).
pub fn set_count(n_qubits: usize) -> Result<u64, Error> {
    if n_qubits == 0 || n_qubits > 20 {
        return Err(Error::SetCountOverflow(n_qubits));
    }
    let dim = 1u64 << n_qubits;
    let mut acc: u64 = 1;
    for k in 2..=dim {
        acc = acc.checked_mul(k).ok_or(Error::SetCountOverflow(n_qubits))?;
    }
    Ok(acc)
}

/// Bit width of an encoded set index: floor(log2((2^N)!)) + 1.
pub fn encoded_width(n_qubits: usize) -> Result<usize, Error> {
    Ok(64 - set_count(n_qubits)?.leading_zeros() as usize)
}

/// A validated 1-based index into the lexicographic permutation order.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SetIndex {
    x: u64,
    n_qubits: usize,
}

impl SetIndex {
    pub fn new(x: u64, n_qubits: usize) -> Result<Self, Error> {
        let count = set_count(n_qubits)?;
        if x < 1 || x > count {
            return Err(Error::IndexOutOfRange { x, count });
        }
        Ok(Self { x, n_qubits })
    }

    pub fn x(&self) -> u64 {
        self.x
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Width in bits when the index travels over the classical channel.
    pub fn encoded_width(&self) -> usize {
        encoded_width(self.n_qubits).expect("validated at construction")
    }
}

/// The x-th permutation of {1..2^N} in lexicographic order; entry m-1 holds
/// p_m(x) (1-based values).
pub fn perm_from_index(x: &SetIndex) -> Vec<usize> {
    let size = x.dim();
    let mut rank = x.x() - 1;
    let mut avail: Vec<usize> = (1..=size).collect();
    let mut perm = Vec::with_capacity(size);
    for pos in 0..size {
        let f = factorial(size - 1 - pos);
        let idx = (rank / f) as usize;
        rank %= f;
        perm.push(avail.remove(idx));
    }
    perm
}

/// Lexicographic rank of a permutation of {1..2^N}, as a 1-based [`SetIndex`].
pub fn index_from_perm(perm: &[usize]) -> Result<SetIndex, Error> {
    let size = perm.len();
    if !size.is_power_of_two() || size < 2 {
        return Err(Error::BadLength(size));
    }
    let n_qubits = size.trailing_zeros() as usize;
    set_count(n_qubits)?;
    let mut avail: Vec<usize> = (1..=size).collect();
    let mut rank: u64 = 0;
    for (pos, &v) in perm.iter().enumerate() {
        let idx = avail.iter().position(|&w| w == v).ok_or(Error::NotAPermutation(size))?;
        rank += idx as u64 * factorial(size - 1 - pos);
        avail.remove(idx);
    }
    SetIndex::new(rank + 1, n_qubits)
}

/// A member of a restricted set: permutation structure plus per-row phases.
#[derive(Clone, Debug)]
pub struct RestrictedOp {
    pub n_qubits: usize,
    /// perm[m-1] = column (1-based) of the nonzero entry in row m.
    pub perm: Vec<usize>,
    pub phases: Vec<C64>,
    /// Set when every phase has unit modulus, making the matrix unitary.
    pub unitary: bool,
}

impl RestrictedOp {
    pub fn matrix(&self) -> CMat {
        let dim = self.perm.len();
        let mut m = CMat::zeros(dim, dim);
        for (row, (&col, &t)) in self.perm.iter().zip(&self.phases).enumerate() {
            m.set(row, col - 1, t);
        }
        m
    }
}

/// T(x,t): phase t_m at (row m, column p_m(x)).
pub fn build_t(x: &SetIndex, t: &[C64]) -> Result<RestrictedOp, Error> {
    let dim = x.dim();
    if t.len() != dim {
        return Err(Error::WrongPhaseCount { want: dim, got: t.len() });
    }
    let mut unitary = true;
    for (i, p) in t.iter().enumerate() {
        if p.norm_sqr() == 0.0 {
            return Err(Error::ZeroPhase(i));
        }
        if (p.norm() - 1.0).abs() > 1e-12 {
            unitary = false;
        }
    }
    Ok(RestrictedOp {
        n_qubits: x.n_qubits(),
        perm: perm_from_index(x),
        phases: t.to_vec(),
        unitary,
    })
}

/// R(x): the fixed form of the x-th set — T(x,t) with all phases 1, a 0/1
/// permutation matrix.
pub fn build_r(x: &SetIndex) -> CMat {
    let ones = vec![C64::new(1.0, 0.0); x.dim()];
    build_t(x, &ones).expect("unit phases are valid").matrix()
}

/// Checks the factorization T(1,t)·R(x) = T(x,t): the x-th member is the
/// diagonal phase operator followed by the fixed form.
pub fn decompose_identity_check(x: &SetIndex, t: &[C64]) -> Result<bool, Error> {
    let one = SetIndex::new(1, x.n_qubits())?;
    let lhs = build_t(&one, t)?.matrix().mul(&build_r(x));
    let rhs = build_t(x, t)?.matrix();
    Ok(lhs.approx_eq(&rhs, DECOMPOSE_TOL))
}

/// The one-qubit specialization: U(0,u) = diag(u0,u1), U(1,u) antidiagonal
/// with u0 in the top-right.
pub fn one_qubit_u(d: u8, u: [C64; 2]) -> Result<CMat, Error> {
    for (i, p) in u.iter().enumerate() {
        if p.norm_sqr() == 0.0 {
            return Err(Error::ZeroPhase(i));
        }
    }
    let z = C64::new(0.0, 0.0);
    let m = match d {
        0 => CMat { rows: 2, cols: 2, data: vec![u[0], z, z, u[1]] },
        1 => CMat { rows: 2, cols: 2, data: vec![z, u[0], u[1], z] },
        other => return Err(Error::BadBit(other)),
    };
    Ok(m)
}

/// Conditional phase flip 𝔯(z) = diag(1, (−1)^z).
pub fn phase_r(z: u8) -> CMat {
    assert!(z <= 1, "phase_r takes a bit");
    let sign = if z == 1 { -1.0 } else { 1.0 };
    CMat::from_real(2, 2, &[1., 0., 0., sign])
}

/// Pauli matrices σ0..σ3.
pub fn sigma(i: usize) -> CMat {
    match i {
        0 => CMat::identity(2),
        1 => CMat::from_real(2, 2, &[0., 1., 1., 0.]),
        2 => {
            let mut m = CMat::zeros(2, 2);
            m.set(0, 1, Complex64::new(0.0, -1.0));
            m.set(1, 0, Complex64::new(0.0, 1.0));
            m
        }
        3 => CMat::from_real(2, 2, &[1., 0., 0., -1.]),
        other => panic!("sigma index {other} out of range 0..=3"),
    }
}

/// σ_b for a measured bit: σ0 or σ1.
pub fn sigma_bit(b: u8) -> CMat {
    assert!(b <= 1, "sigma_bit takes a bit");
    sigma(b as usize)
}

/// The Hadamard transformation.
pub fn hadamard() -> CMat {
    let h = 1.0 / 2.0_f64.sqrt();
    CMat::from_real(2, 2, &[h, h, h, -h])
}

/// Two-qubit controlled-NOT with the *second* qubit as control and the
/// first as target: |t,c⟩ → |t⊕c,c⟩.
pub fn cnot_target_first() -> CMat {
    CMat::from_real(4, 4, &[
        1., 0., 0., 0., //
        0., 0., 0., 1., //
        0., 0., 1., 0., //
        0., 1., 0., 0.,
    ])
}

/// Two-qubit controlled-NOT with the *first* qubit as control and the
/// second as target: |c,t⟩ → |c,t⊕c⟩.
pub fn cnot_control_first() -> CMat {
    CMat::from_real(4, 4, &[
        1., 0., 0., 0., //
        0., 1., 0., 0., //
        0., 0., 0., 1., //
        0., 0., 1., 0.,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn unit_phase(angle: f64) -> C64 {
        C64::new(angle.cos(), angle.sin())
    }

    fn random_unit_phases(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..dim).map(|_| unit_phase(rng.gen_range(0.0..std::f64::consts::TAU))).collect()
    }

    #[test]
    fn set_counts_and_widths() {
        assert_eq!(set_count(1), Ok(2));
        assert_eq!(set_count(2), Ok(24));
        assert_eq!(set_count(3), Ok(40320));
        assert_eq!(set_count(4), Ok(20_922_789_888_000));
        assert_eq!(set_count(5), Err(Error::SetCountOverflow(5)));

        assert_eq!(encoded_width(1), Ok(2));
        assert_eq!(encoded_width(2), Ok(5));
        assert_eq!(encoded_width(3), Ok(16));
        assert_eq!(encoded_width(4), Ok(45));
    }

    #[test]
    fn index_bounds() {
        assert!(SetIndex::new(0, 2).is_err());
        assert!(SetIndex::new(25, 2).is_err());
        assert!(SetIndex::new(24, 2).is_ok());
        assert_eq!(SetIndex::new(5, 2).unwrap().encoded_width(), 5);
    }

    #[test]
    fn lexicographic_order_examples() {
        let p = |x, n| perm_from_index(&SetIndex::new(x, n).unwrap());
        assert_eq!(p(1, 1), vec![1, 2]);
        assert_eq!(p(2, 1), vec![2, 1]);
        assert_eq!(p(1, 2), vec![1, 2, 3, 4]);
        assert_eq!(p(2, 2), vec![1, 2, 4, 3]);
        assert_eq!(p(24, 2), vec![4, 3, 2, 1]);
    }

    #[test]
    fn rank_unrank_roundtrip() {
        for n in 1..=2usize {
            for x in 1..=set_count(n).unwrap() {
                let idx = SetIndex::new(x, n).unwrap();
                let perm = perm_from_index(&idx);
                assert_eq!(index_from_perm(&perm).unwrap(), idx);
            }
        }
        // Lexicographic order is strictly increasing in the sequence order.
        let mut prev = perm_from_index(&SetIndex::new(1, 2).unwrap());
        for x in 2..=24 {
            let cur = perm_from_index(&SetIndex::new(x, 2).unwrap());
            assert!(cur > prev, "order violated at x={x}");
            prev = cur;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10_000 {
            let x = rng.gen_range(1..=40320u64);
            let idx = SetIndex::new(x, 3).unwrap();
            assert_eq!(index_from_perm(&perm_from_index(&idx)).unwrap(), idx);
        }
    }

    #[test]
    fn index_from_perm_rejects_bad_input() {
        assert_eq!(index_from_perm(&[1, 2, 3]), Err(Error::BadLength(3)));
        assert_eq!(index_from_perm(&[1, 1]), Err(Error::NotAPermutation(2)));
        assert_eq!(index_from_perm(&[0, 1]), Err(Error::NotAPermutation(2)));
    }

    #[test]
    fn build_t_one_qubit_matches_u() {
        let u = [unit_phase(0.3), unit_phase(-1.1)];
        let diag = build_t(&SetIndex::new(1, 1).unwrap(), &u).unwrap();
        assert!(diag.matrix().approx_eq(&one_qubit_u(0, u).unwrap(), 0.0));
        assert!(diag.unitary);

        let anti = build_t(&SetIndex::new(2, 1).unwrap(), &u).unwrap();
        assert!(anti.matrix().approx_eq(&one_qubit_u(1, u).unwrap(), 0.0));
        // u0 sits in the top-right.
        assert_eq!(anti.matrix().get(0, 1), u[0]);
        assert_eq!(anti.matrix().get(1, 0), u[1]);
    }

    #[test]
    fn build_t_structure_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=3usize {
            let count = set_count(n).unwrap();
            for _ in 0..8 {
                let x = SetIndex::new(rng.gen_range(1..=count), n).unwrap();
                let t = random_unit_phases(x.dim(), &mut rng);
                let m = build_t(&x, &t).unwrap().matrix();
                assert!(m.is_unitary(1e-12));
                // Exactly one nonzero per row and per column.
                for r in 0..m.rows {
                    let nz = (0..m.cols).filter(|&c| m.get(r, c).norm_sqr() > 0.0).count();
                    assert_eq!(nz, 1);
                }
                for c in 0..m.cols {
                    let nz = (0..m.rows).filter(|&r| m.get(r, c).norm_sqr() > 0.0).count();
                    assert_eq!(nz, 1);
                }
            }
        }

        let x = SetIndex::new(1, 1).unwrap();
        assert_eq!(
            build_t(&x, &[re(1.0)]).unwrap_err(),
            Error::WrongPhaseCount { want: 2, got: 1 }
        );
        assert_eq!(build_t(&x, &[re(1.0), re(0.0)]).unwrap_err(), Error::ZeroPhase(1));
        // Non-unit but nonzero phases are allowed, flagged non-unitary.
        let skew = build_t(&x, &[re(2.0), re(1.0)]).unwrap();
        assert!(!skew.unitary);
    }

    #[test]
    fn fixed_forms() {
        assert!(build_r(&SetIndex::new(1, 1).unwrap()).approx_eq(&sigma(0), 0.0));
        assert!(build_r(&SetIndex::new(2, 1).unwrap()).approx_eq(&sigma(1), 0.0));
        assert!(build_r(&SetIndex::new(1, 2).unwrap()).approx_eq(&CMat::identity(4), 0.0));
        for x in 1..=24u64 {
            let r = build_r(&SetIndex::new(x, 2).unwrap());
            assert!(r.mul(&r.dagger()).approx_eq(&CMat::identity(4), 0.0), "x={x}");
        }
    }

    #[test]
    fn factorization_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for x in 1..=24u64 {
            let idx = SetIndex::new(x, 2).unwrap();
            let t = random_unit_phases(4, &mut rng);
            assert!(decompose_identity_check(&idx, &t).unwrap(), "x={x}");
        }

        // One-qubit antidiagonal case: diag(u0,u1)·σ1 = U(1,u).
        let u = [unit_phase(0.9), unit_phase(2.2)];
        let lhs = one_qubit_u(0, u).unwrap().mul(&sigma(1));
        assert!(lhs.approx_eq(&one_qubit_u(1, u).unwrap(), 1e-15));
        assert!(decompose_identity_check(&SetIndex::new(2, 1).unwrap(), &u).unwrap());

        // x = 1 is trivially true: R(1) = I.
        let t = random_unit_phases(8, &mut rng);
        assert!(decompose_identity_check(&SetIndex::new(1, 3).unwrap(), &t).unwrap());
    }

    #[test]
    fn diagonal_first_member() {
        // T(1,t) is diagonal for every N.
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for n in 1..=3usize {
            let x = SetIndex::new(1, n).unwrap();
            let t = random_unit_phases(x.dim(), &mut rng);
            let m = build_t(&x, &t).unwrap().matrix();
            for r in 0..m.rows {
                for c in 0..m.cols {
                    if r != c {
                        assert_eq!(m.get(r, c).norm_sqr(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn one_qubit_u_examples() {
        let one = re(1.0);
        assert!(one_qubit_u(0, [one, one]).unwrap().approx_eq(&CMat::identity(2), 0.0));
        assert!(one_qubit_u(1, [one, one]).unwrap().approx_eq(&sigma(1), 0.0));
        let i = C64::new(0.0, 1.0);
        assert!(one_qubit_u(0, [one, i]).unwrap().is_unitary(1e-15));
        assert!(one_qubit_u(0, [one, C64::new(0.0, 0.0)]).is_err());
        assert!(one_qubit_u(2, [one, one]).is_err());
    }

    #[test]
    fn row_orthogonality_of_fixed_forms() {
        // ⟨j|R|k⟩·⟨l|R|k⟩ = δ_jl·⟨j|R|k⟩ for the 0/1 fixed forms.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=3usize {
            let count = set_count(n).unwrap();
            let x = SetIndex::new(rng.gen_range(1..=count), n).unwrap();
            let r = build_r(&x);
            for k in 0..r.cols {
                for j in 0..r.rows {
                    for l in 0..r.rows {
                        let lhs = r.get(j, k) * r.get(l, k);
                        let rhs = if j == l { r.get(j, k) } else { C64::new(0.0, 0.0) };
                        assert_eq!(lhs, rhs);
                    }
                }
            }
        }
    }

    #[test]
    fn hadamard_phase_lemma() {
        // (−1)^{a·j}·⟨a|H|j⟩ = 1/√2 for every a, j.
        let h = hadamard();
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        for a in 0..2usize {
            for j in 0..2usize {
                let sign = if a * j % 2 == 1 { -1.0 } else { 1.0 };
                let val = h.get(a, j) * re(sign);
                assert!((val - re(inv_sqrt2)).norm() < 1e-15);
            }
        }
        assert!(h.mul(&h).approx_eq(&CMat::identity(2), 1e-15));
    }

    #[test]
    fn phase_flip_properties() {
        assert!(phase_r(0).approx_eq(&CMat::identity(2), 0.0));
        assert!(phase_r(1).approx_eq(&sigma(3), 0.0));
        for z in 0..2u8 {
            let r = phase_r(z);
            assert!(r.mul(&r).approx_eq(&CMat::identity(2), 0.0));
        }
    }

    #[test]
    fn projector_cnot_commutation() {
        // On a (target, control) pair: applying the phase flip on both
        // qubits after the projected CNOT equals applying it on the target
        // alone beforehand.
        let c = cnot_target_first();
        for beta in 0..2usize {
            for gamma in 0..2u8 {
                let mut proj = CMat::zeros(2, 2);
                proj.set(beta, beta, C64::new(1.0, 0.0));
                let proj_c = proj.kron(&sigma(0)).mul(&c);
                let lhs = phase_r(gamma).kron(&phase_r(gamma)).mul(&proj_c);
                let rhs = proj_c.mul(&phase_r(gamma).kron(&sigma(0)));
                assert!(lhs.approx_eq(&rhs, 1e-15), "beta={beta} gamma={gamma}");
            }
        }
    }

    #[test]
    fn cnot_orientations() {
        let tf = cnot_target_first();
        let cf = cnot_control_first();
        // |01⟩ (target 0, control 1) flips the first qubit.
        let mut v = vec![C64::new(0.0, 0.0); 4];
        v[0b01] = re(1.0);
        let out: Vec<C64> = (0..4)
            .map(|r| (0..4).map(|ci| tf.get(r, ci) * v[ci]).sum())
            .collect();
        assert_eq!(out[0b11], re(1.0));
        // Control-first flips the second qubit on |10⟩.
        let mut w = vec![C64::new(0.0, 0.0); 4];
        w[0b10] = re(1.0);
        let out: Vec<C64> = (0..4)
            .map(|r| (0..4).map(|ci| cf.get(r, ci) * w[ci]).sum())
            .collect();
        assert_eq!(out[0b11], re(1.0));
        // The two orientations are swap-conjugates.
        let sw = crate::permops::swap_adjacent_matrix();
        assert!(sw.mul(&tf).mul(&sw).approx_eq(&cf, 0.0));
    }
}
