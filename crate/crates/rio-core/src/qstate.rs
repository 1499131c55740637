//! Labeled-register state vectors.
//!
//! A register is an ordered sequence of labeled qubits (the "space
//! structure"); the first label owns the most significant bit of the global
//! amplitude index. Post-selection keeps branches unnormalized so that
//! protocol prefactors are directly assertable; renormalization happens only
//! in [`extract_factor`] and in the protocol engine's sampling mode.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{C64, CMat};

/// Residual weight allowed outside the selected outcome slice before
/// [`extract_factor`] refuses to treat the state as a product.
pub const FACTOR_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("bit count {got} does not match register size {want}")]
    LengthMismatch { want: usize, got: usize },
    #[error("duplicate qubit label {0}")]
    DuplicateLabel(String),
    #[error("label {0} is not in the register")]
    UnknownLabel(String),
    #[error("operator is {rows}x{cols} but {targets} target qubit(s) require {want}x{want}")]
    DimensionMismatch { rows: usize, cols: usize, targets: usize, want: usize },
    #[error("structures differ")]
    StructureMismatch,
    #[error("zero-norm state")]
    ZeroNorm,
    #[error("state does not factor over the kept labels (residual weight {residual:.3e})")]
    NonProduct { residual: f64 },
    #[error("keep and fixed labels must partition the register")]
    BadPartition,
    #[error("register size {0} exceeds the 20-qubit cap")]
    TooManyQubits(usize),
    #[error("outcome bits must be 0 or 1, got {0}")]
    BadBit(u8),
}

/// Which party-role family a qubit belongs to. `Y` is the unknown-state
/// register class regardless of which party holds it.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum RoleClass {
    A,
    B,
    C,
    Y,
}

impl fmt::Display for RoleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RoleClass::A => "A",
            RoleClass::B => "B",
            RoleClass::C => "C",
            RoleClass::Y => "Y",
        };
        f.write_str(s)
    }
}

/// A labeled qubit, e.g. `A1`, `B2`, `Y3`. Unique within a structure.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct QubitLabel {
    pub class: RoleClass,
    pub index: u8,
}

impl QubitLabel {
    pub const fn new(class: RoleClass, index: u8) -> Self {
        Self { class, index }
    }
    pub const fn a(index: u8) -> Self {
        Self::new(RoleClass::A, index)
    }
    pub const fn b(index: u8) -> Self {
        Self::new(RoleClass::B, index)
    }
    pub const fn c(index: u8) -> Self {
        Self::new(RoleClass::C, index)
    }
    pub const fn y(index: u8) -> Self {
        Self::new(RoleClass::Y, index)
    }
}

impl fmt::Display for QubitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.class, self.index)
    }
}

/// Ordered qubit labels; order defines tensor index significance.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SpaceStructure {
    labels: Vec<QubitLabel>,
}

impl SpaceStructure {
    pub fn new(labels: Vec<QubitLabel>) -> Result<Self, Error> {
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
        }
        if labels.len() > 20 {
            return Err(Error::TooManyQubits(labels.len()));
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[QubitLabel] {
        &self.labels
    }

    pub fn n_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: QubitLabel) -> Result<usize, Error> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Shift of a label's bit within the global index (first label = MSB).
    fn bit_shift(&self, label: QubitLabel) -> Result<usize, Error> {
        Ok(self.n_qubits() - 1 - self.index_of(label)?)
    }
}

/// Complex amplitudes over a labeled register.
#[derive(Clone, Debug)]
pub struct StateVector {
    pub structure: SpaceStructure,
    pub amps: Vec<C64>,
    /// Set when the amplitudes are known to have unit norm; post-selection
    /// branches clear it.
    pub normalized: bool,
}

impl StateVector {
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Same state multiplied by a global scalar (clears the normalized flag
    /// unless the scalar has unit modulus).
    pub fn scaled(&self, s: C64) -> StateVector {
        StateVector {
            structure: self.structure.clone(),
            amps: self.amps.iter().map(|a| a * s).collect(),
            normalized: self.normalized && (s.norm() - 1.0).abs() < 1e-15,
        }
    }
}

fn check_bit(b: u8) -> Result<u64, Error> {
    match b {
        0 | 1 => Ok(b as u64),
        other => Err(Error::BadBit(other)),
    }
}

/// Basis state |bits⟩ over the given structure.
pub fn make_basis(structure: &SpaceStructure, bits: &[u8]) -> Result<StateVector, Error> {
    let n = structure.n_qubits();
    if bits.len() != n {
        return Err(Error::LengthMismatch { want: n, got: bits.len() });
    }
    let mut index: u64 = 0;
    for &b in bits {
        index = (index << 1) | check_bit(b)?;
    }
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    amps[index as usize] = C64::new(1.0, 0.0);
    Ok(StateVector { structure: structure.clone(), amps, normalized: true })
}

/// (|000⟩ + |111⟩)/√2 over three distinct labels.
pub fn make_ghz(labels: [QubitLabel; 3]) -> Result<StateVector, Error> {
    let structure = SpaceStructure::new(labels.to_vec())?;
    let h = C64::new(1.0 / 2.0_f64.sqrt(), 0.0);
    let mut amps = vec![C64::new(0.0, 0.0); 8];
    amps[0] = h;
    amps[7] = h;
    Ok(StateVector { structure, amps, normalized: true })
}

/// (|00⟩ + |11⟩)/√2 over two distinct labels.
pub fn make_bell(labels: [QubitLabel; 2]) -> Result<StateVector, Error> {
    let structure = SpaceStructure::new(labels.to_vec())?;
    let h = C64::new(1.0 / 2.0_f64.sqrt(), 0.0);
    let mut amps = vec![C64::new(0.0, 0.0); 4];
    amps[0] = h;
    amps[3] = h;
    Ok(StateVector { structure, amps, normalized: true })
}

/// Deterministic pseudo-random normalized state: complex Gaussian
/// components from a ChaCha8 stream, then normalized.
pub fn make_random_state(labels: &[QubitLabel], seed: u64) -> Result<StateVector, Error> {
    let structure = SpaceStructure::new(labels.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amps: Vec<C64> = (0..1usize << structure.n_qubits())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        })
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    assert!(norm > 1e-12, "degenerate Gaussian sample");
    for a in amps.iter_mut() {
        *a /= norm;
    }
    Ok(StateVector { structure, amps, normalized: true })
}

/// Tensor product; structures are concatenated (left factor more
/// significant).
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector, Error> {
    let mut labels = a.structure.labels().to_vec();
    labels.extend_from_slice(b.structure.labels());
    let structure = SpaceStructure::new(labels)?;
    let mut amps = Vec::with_capacity(a.dim() * b.dim());
    for &x in &a.amps {
        for &y in &b.amps {
            amps.push(x * y);
        }
    }
    Ok(StateVector { structure, amps, normalized: a.normalized && b.normalized })
}

/// Apply `op` to the ordered `targets` (first target = most significant bit
/// of the operator's own index), identity elsewhere.
pub fn apply_local(op: &CMat, targets: &[QubitLabel], state: &StateVector) -> Result<StateVector, Error> {
    let k = targets.len();
    let want = 1usize << k;
    if op.rows != want || op.cols != want {
        return Err(Error::DimensionMismatch { rows: op.rows, cols: op.cols, targets: k, want });
    }
    let mut shifts = Vec::with_capacity(k);
    for (i, &t) in targets.iter().enumerate() {
        if targets[..i].contains(&t) {
            return Err(Error::DuplicateLabel(t.to_string()));
        }
        shifts.push(state.structure.bit_shift(t)?);
    }
    let target_mask: usize = shifts.iter().map(|&s| 1usize << s).sum();
    // Index of the operator row/column contributed by sub-index j: bit
    // (k-1-i) of j lands on targets[i].
    let pattern = |j: usize| -> usize {
        let mut p = 0usize;
        for (i, &s) in shifts.iter().enumerate() {
            p |= ((j >> (k - 1 - i)) & 1) << s;
        }
        p
    };
    let patterns: Vec<usize> = (0..want).map(pattern).collect();

    let mut out = vec![C64::new(0.0, 0.0); state.dim()];
    let mut sub = vec![C64::new(0.0, 0.0); want];
    for base in 0..state.dim() {
        if base & target_mask != 0 {
            continue;
        }
        for j in 0..want {
            sub[j] = state.amps[base | patterns[j]];
        }
        for r in 0..want {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..want {
                acc += op.get(r, c) * sub[c];
            }
            out[base | patterns[r]] = acc;
        }
    }
    Ok(StateVector { structure: state.structure.clone(), amps: out, normalized: false })
}

/// Project one qubit onto |outcome⟩ without renormalizing. The measured
/// qubit stays in the register, collapsed. Returns the branch and its
/// probability (squared norm of the projected branch, relative to the
/// input's squared norm being the total).
pub fn project(label: QubitLabel, outcome: u8, state: &StateVector) -> Result<(StateVector, f64), Error> {
    let shift = state.structure.bit_shift(label)?;
    let want = check_bit(outcome)? as usize;
    let mut amps = state.amps.clone();
    let mut prob = 0.0;
    for (i, a) in amps.iter_mut().enumerate() {
        if (i >> shift) & 1 == want {
            prob += a.norm_sqr();
        } else {
            *a = C64::new(0.0, 0.0);
        }
    }
    Ok((StateVector { structure: state.structure.clone(), amps, normalized: false }, prob))
}

/// |⟨a|b⟩|² / (⟨a|a⟩⟨b|b⟩): 1 iff the states are equal up to a global
/// complex scalar.
pub fn fidelity_up_to_phase(a: &StateVector, b: &StateVector) -> Result<f64, Error> {
    if a.structure != b.structure {
        return Err(Error::StructureMismatch);
    }
    let na = a.norm_sqr();
    let nb = b.norm_sqr();
    if na <= 0.0 || nb <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let ip: C64 = a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum();
    Ok(ip.norm_sqr() / (na * nb))
}

/// Read off the factor on `keep` given that every other label is collapsed
/// at its `fixed_outcomes` bit. Renormalized. Errors if weight outside the
/// selected slice exceeds [`FACTOR_RESIDUAL_TOL`] (the state must factor).
pub fn extract_factor(
    state: &StateVector,
    keep: &[QubitLabel],
    fixed_outcomes: &[(QubitLabel, u8)],
) -> Result<StateVector, Error> {
    let n = state.structure.n_qubits();
    if keep.len() + fixed_outcomes.len() != n {
        return Err(Error::BadPartition);
    }
    let mut seen: Vec<QubitLabel> = Vec::with_capacity(n);
    for &l in keep.iter().chain(fixed_outcomes.iter().map(|(l, _)| l)) {
        if seen.contains(&l) {
            return Err(Error::BadPartition);
        }
        state.structure.index_of(l)?;
        seen.push(l);
    }

    let mut base = 0usize;
    for &(l, bit) in fixed_outcomes {
        base |= (check_bit(bit)? as usize) << state.structure.bit_shift(l)?;
    }
    let keep_shifts: Vec<usize> =
        keep.iter().map(|&l| state.structure.bit_shift(l)).collect::<Result<_, _>>()?;

    let k = keep.len();
    let mut sub = Vec::with_capacity(1 << k);
    for j in 0..1usize << k {
        let mut idx = base;
        for (i, &s) in keep_shifts.iter().enumerate() {
            idx |= ((j >> (k - 1 - i)) & 1) << s;
        }
        sub.push(state.amps[idx]);
    }

    let slice_norm_sqr: f64 = sub.iter().map(|a| a.norm_sqr()).sum();
    let residual = state.norm_sqr() - slice_norm_sqr;
    if residual > FACTOR_RESIDUAL_TOL {
        return Err(Error::NonProduct { residual });
    }
    if slice_norm_sqr <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let norm = slice_norm_sqr.sqrt();
    for a in sub.iter_mut() {
        *a /= norm;
    }
    Ok(StateVector { structure: SpaceStructure::new(keep.to_vec())?, amps: sub, normalized: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn l(s: &str) -> QubitLabel {
        let class = match &s[..1] {
            "A" => RoleClass::A,
            "B" => RoleClass::B,
            "C" => RoleClass::C,
            "Y" => RoleClass::Y,
            _ => panic!("bad label {s}"),
        };
        QubitLabel::new(class, s[1..].parse().unwrap())
    }

    fn structure(names: &[&str]) -> SpaceStructure {
        SpaceStructure::new(names.iter().map(|s| l(s)).collect()).unwrap()
    }

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn basis_states_index_big_endian() {
        let s1 = make_basis(&structure(&["A1"]), &[0]).unwrap();
        assert_eq!(s1.amps, vec![re(1.0), re(0.0)]);

        let s2 = make_basis(&structure(&["A1", "B1"]), &[1, 0]).unwrap();
        assert_eq!(s2.amps, vec![re(0.0), re(0.0), re(1.0), re(0.0)]);

        let s3 = make_basis(&structure(&["A1", "B1", "C1"]), &[1, 1, 1]).unwrap();
        assert_eq!(s3.amps[7], re(1.0));
        assert_eq!(s3.amps.iter().map(|a| a.norm_sqr()).sum::<f64>(), 1.0);

        assert_eq!(
            make_basis(&structure(&["A1"]), &[0, 1]).unwrap_err(),
            Error::LengthMismatch { want: 1, got: 2 }
        );
    }

    #[test]
    fn ghz_amplitudes_and_collapse() {
        let g = make_ghz([l("A1"), l("B1"), l("C1")]).unwrap();
        let h = 1.0 / 2.0_f64.sqrt();
        assert!((g.amps[0] - re(h)).norm() < TOL);
        assert!((g.amps[7] - re(h)).norm() < TOL);
        assert!((g.norm_sqr() - 1.0).abs() < TOL);

        let (branch, p) = project(l("A1"), 0, &g).unwrap();
        assert!((p - 0.5).abs() < TOL);
        // Collapsed branch is |000⟩ with amplitude 1/√2.
        assert!((branch.amps[0] - re(h)).norm() < TOL);
        assert!(branch.amps[7].norm() < TOL);

        assert!(make_ghz([l("A1"), l("A1"), l("C1")]).is_err());
    }

    #[test]
    fn bell_amplitudes_and_gate_composition() {
        let b = make_bell([l("A2"), l("B2")]).unwrap();
        let h = 1.0 / 2.0_f64.sqrt();
        assert!((b.amps[0] - re(h)).norm() < TOL);
        assert!((b.amps[3] - re(h)).norm() < TOL);

        let two = tensor(&b, &make_bell([l("A3"), l("B3")]).unwrap()).unwrap();
        assert!((two.norm_sqr() - 1.0).abs() < TOL);

        // Bell = CNOT(control first qubit) · (H ⊗ I) |00⟩.
        let hadamard = CMat::from_real(2, 2, &[h, h, h, -h]);
        let cnot_control_first =
            CMat::from_real(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.]);
        let zz = make_basis(&b.structure, &[0, 0]).unwrap();
        let step = apply_local(&hadamard, &[l("A2")], &zz).unwrap();
        let built = apply_local(&cnot_control_first, &[l("A2"), l("B2")], &step).unwrap();
        assert!((fidelity_up_to_phase(&built, &b).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn random_states_are_deterministic_and_normalized() {
        let labels = [l("Y1"), l("Y2")];
        let s1 = make_random_state(&labels, 7).unwrap();
        let s2 = make_random_state(&labels, 7).unwrap();
        assert_eq!(s1.amps, s2.amps);
        assert!((s1.norm_sqr() - 1.0).abs() < TOL);
        let s3 = make_random_state(&labels, 8).unwrap();
        assert!(fidelity_up_to_phase(&s1, &s3).unwrap() < 1.0 - 1e-6);
    }

    #[test]
    fn apply_local_single_qubit_examples() {
        let ab = structure(&["A1", "B1"]);
        let zz = make_basis(&ab, &[0, 0]).unwrap();
        let sigma1 = CMat::from_real(2, 2, &[0., 1., 1., 0.]);
        let flipped = apply_local(&sigma1, &[l("B1")], &zz).unwrap();
        let want = make_basis(&ab, &[0, 1]).unwrap();
        assert!((fidelity_up_to_phase(&flipped, &want).unwrap() - 1.0).abs() < TOL);

        let h = 1.0 / 2.0_f64.sqrt();
        let hadamard = CMat::from_real(2, 2, &[h, h, h, -h]);
        let a = structure(&["A1"]);
        let plus = apply_local(&hadamard, &[l("A1")], &make_basis(&a, &[0]).unwrap()).unwrap();
        assert!((plus.amps[0] - re(h)).norm() < TOL);
        assert!((plus.amps[1] - re(h)).norm() < TOL);
    }

    #[test]
    fn apply_local_second_qubit_control() {
        // Target-first CNOT: the second qubit of the pair is the control.
        let cnot_target_first =
            CMat::from_real(4, 4, &[1., 0., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 1., 0., 0.]);
        let by = structure(&["B1", "Y1"]);
        let s = make_basis(&by, &[1, 1]).unwrap();
        let out = apply_local(&cnot_target_first, &[l("B1"), l("Y1")], &s).unwrap();
        let want = make_basis(&by, &[0, 1]).unwrap();
        assert!((fidelity_up_to_phase(&out, &want).unwrap() - 1.0).abs() < TOL);

        let bad = apply_local(&cnot_target_first, &[l("B1")], &s);
        assert!(matches!(bad, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn projection_probabilities() {
        let a = structure(&["A1"]);
        let h = 1.0 / 2.0_f64.sqrt();
        let plus = StateVector {
            structure: a.clone(),
            amps: vec![re(h), re(h)],
            normalized: true,
        };
        let (_, p0) = project(l("A1"), 0, &plus).unwrap();
        assert!((p0 - 0.5).abs() < TOL);

        let g = make_ghz([l("A1"), l("B1"), l("C1")]).unwrap();
        let (branch, p1) = project(l("A1"), 1, &g).unwrap();
        assert!((p1 - 0.5).abs() < TOL);
        // Remaining qubits are correlated: only |111⟩ survives.
        assert!(branch.amps[7].norm() > 0.0);
        assert_eq!(branch.amps.iter().filter(|a| a.norm() > 0.0).count(), 1);
    }

    #[test]
    fn fidelity_examples() {
        let s = make_random_state(&[l("A1"), l("B1")], 3).unwrap();
        assert!((fidelity_up_to_phase(&s, &s).unwrap() - 1.0).abs() < TOL);
        let phased = s.scaled(C64::new(0.0, 1.0));
        assert!((fidelity_up_to_phase(&s, &phased).unwrap() - 1.0).abs() < TOL);

        let a = structure(&["A1"]);
        let zero = make_basis(&a, &[0]).unwrap();
        let one = make_basis(&a, &[1]).unwrap();
        assert!(fidelity_up_to_phase(&zero, &one).unwrap() < TOL);

        let null = StateVector { structure: a, amps: vec![re(0.0); 2], normalized: false };
        assert_eq!(fidelity_up_to_phase(&null, &zero), Err(Error::ZeroNorm));
    }

    #[test]
    fn extract_factor_product_and_entangled() {
        let psi = make_random_state(&[l("Y1")], 11).unwrap();
        let a0 = make_basis(&structure(&["A1"]), &[0]).unwrap();
        let joint = tensor(&a0, &psi).unwrap();
        let got = extract_factor(&joint, &[l("Y1")], &[(l("A1"), 0)]).unwrap();
        assert!((fidelity_up_to_phase(&got, &psi).unwrap() - 1.0).abs() < TOL);

        let bell = make_bell([l("A1"), l("B1")]).unwrap();
        let err = extract_factor(&bell, &[l("B1")], &[(l("A1"), 0)]);
        assert!(matches!(err, Err(Error::NonProduct { .. })));

        let bad = extract_factor(&joint, &[l("Y1")], &[]);
        assert_eq!(bad.unwrap_err(), Error::BadPartition);
    }
}
