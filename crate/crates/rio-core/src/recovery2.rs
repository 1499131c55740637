//! Two-qubit recovery catalog.
//!
//! All 24 two-qubit fixed-form operators R_2(x) written as short gate
//! sequences over CNOT and σ1, together with an evaluator and a verifier
//! that checks every sequence against the permutation-indexed fixed form
//! from [`crate::restricted`]. The verifier never assumes the catalog order
//! matches the lexicographic index order: it discovers the correspondence
//! and exports it as JSON.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{C64, CMat};
use crate::restricted::{build_r, index_from_perm, SetIndex};

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("catalog index {0} out of range 1..=24")]
    IndexOutOfRange(u64),
    #[error("CNOT control and target must differ")]
    SameControlTarget,
}

/// The two receiver-held qubits. `Y1` owns the most significant bit of the
/// 4-dimensional index.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum YQubit {
    Y1,
    Y2,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum GateKind {
    Cnot,
    Not,
    Identity,
}

/// One gate in a recovery sequence.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct GateStep {
    pub kind: GateKind,
    pub control: Option<YQubit>,
    pub target: YQubit,
}

impl GateStep {
    pub fn cnot(control: YQubit, target: YQubit) -> Result<Self, Error> {
        if control == target {
            return Err(Error::SameControlTarget);
        }
        Ok(Self { kind: GateKind::Cnot, control: Some(control), target })
    }

    pub fn not(target: YQubit) -> Self {
        Self { kind: GateKind::Not, control: None, target }
    }

    pub fn identity(target: YQubit) -> Self {
        Self { kind: GateKind::Identity, control: None, target }
    }

    /// 4×4 matrix over (Y1, Y2).
    pub fn matrix(&self) -> CMat {
        use crate::restricted::{cnot_control_first, cnot_target_first, sigma};
        match (self.kind, self.target) {
            (GateKind::Identity, _) => CMat::identity(4),
            (GateKind::Not, YQubit::Y1) => sigma(1).kron(&sigma(0)),
            (GateKind::Not, YQubit::Y2) => sigma(0).kron(&sigma(1)),
            // Control Y1 = first qubit; control Y2 = second qubit.
            (GateKind::Cnot, YQubit::Y2) => cnot_control_first(),
            (GateKind::Cnot, YQubit::Y1) => cnot_target_first(),
        }
    }
}

/// Gates in written product order; the rightmost entry acts first.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct GateSequence {
    pub steps: Vec<GateStep>,
}

/// The printed sequence for R_2(x), x in 1..=24.
pub fn catalog(x: u64) -> Result<GateSequence, Error> {
    use YQubit::{Y1, Y2};
    let c12 = || GateStep::cnot(Y1, Y2).expect("distinct");
    let c21 = || GateStep::cnot(Y2, Y1).expect("distinct");
    let x1 = || GateStep::not(Y1);
    let x2 = || GateStep::not(Y2);
    let steps = match x {
        1 => vec![GateStep::identity(Y1), GateStep::identity(Y2)],
        2 => vec![c12()],
        3 => vec![c21(), c12(), c21()],
        4 => vec![c21(), c12()],
        5 => vec![c12(), c21()],
        6 => vec![c21()],
        7 => vec![c12(), x2()],
        8 => vec![x2()],
        9 => vec![x1(), c12(), c21()],
        10 => vec![c21(), x2()],
        11 => vec![c21(), x1(), c12(), c21()],
        12 => vec![c21(), c12(), x2()],
        13 => vec![c21(), c12(), x1()],
        14 => vec![c21(), c12(), x1(), c21()],
        15 => vec![c21(), x1()],
        16 => vec![c12(), x1(), c21()],
        17 => vec![x1()],
        18 => vec![c12(), x1()],
        19 => vec![x2(), c21()],
        20 => vec![c12(), x2(), c21()],
        21 => vec![c21(), x1(), c12()],
        22 => vec![c21(), c12(), x2(), c21()],
        23 => vec![x1(), c12()],
        24 => vec![x1(), x2()],
        other => return Err(Error::IndexOutOfRange(other)),
    };
    Ok(GateSequence { steps })
}

/// Ordered product of the steps: written order left to right, so the last
/// listed gate multiplies from the right and acts first.
pub fn eval_sequence(seq: &GateSequence) -> CMat {
    seq.steps.iter().fold(CMat::identity(4), |acc, s| acc.mul(&s.matrix()))
}

/// Reads a 4×4 exact 0/1 permutation matrix back into 1-based row→column
/// form; `None` if any entry is not exactly 0 or 1 or the pattern is not a
/// permutation.
fn matrix_to_perm(m: &CMat) -> Option<Vec<usize>> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut perm = vec![0usize; m.rows];
    let mut col_used = vec![false; m.cols];
    for r in 0..m.rows {
        for c in 0..m.cols {
            let v = m.get(r, c);
            if v == one {
                if perm[r] != 0 || col_used[c] {
                    return None;
                }
                perm[r] = c + 1;
                col_used[c] = true;
            } else if v != zero {
                return None;
            }
        }
        if perm[r] == 0 {
            return None;
        }
    }
    Some(perm)
}

fn grid(m: &CMat) -> Vec<Vec<u8>> {
    (0..m.rows)
        .map(|r| (0..m.cols).map(|c| if m.get(r, c) == C64::new(1.0, 0.0) { 1 } else { 0 }).collect())
        .collect()
}

/// One catalog index checked against the fixed forms.
#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub catalog_x: u64,
    /// Lexicographic index whose fixed form equals this catalog matrix.
    pub lex_x: Option<u64>,
    /// Entrywise 0/1 equality with the fixed form at the *same* index.
    pub exact_match: bool,
    /// Both matrices, included only when the same-index comparison fails.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catalog_matrix: Option<Vec<Vec<u8>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_form_matrix: Option<Vec<Vec<u8>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogReport {
    pub entries: Vec<CatalogEntry>,
    /// Every catalog(x) equals the fixed form at the same x.
    pub all_exact: bool,
    /// The discovered correspondence is the identity map.
    pub identity_correspondence: bool,
    /// The 24 catalog matrices and the 24 fixed forms are the same set.
    pub set_equal: bool,
    pub correspondence: BTreeMap<u64, u64>,
}

impl CatalogReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The small catalog_x → lex_x table on its own.
    pub fn correspondence_json(&self) -> String {
        serde_json::to_string_pretty(&self.correspondence).expect("table serializes")
    }
}

/// Evaluates all 24 sequences, compares each against the fixed form at the
/// same index (exact 0/1), discovers the index correspondence, and checks
/// set equality of the two collections.
pub fn verify_catalog() -> CatalogReport {
    let mut entries = Vec::with_capacity(24);
    let mut correspondence = BTreeMap::new();
    let mut catalog_perms: Vec<Vec<usize>> = Vec::with_capacity(24);
    let mut fixed_perms: Vec<Vec<usize>> = Vec::with_capacity(24);

    for x in 1..=24u64 {
        let seq = catalog(x).expect("in range");
        let got = eval_sequence(&seq);
        let want = build_r(&SetIndex::new(x, 2).expect("in range"));
        let exact_match = matrix_equal_01(&got, &want);
        let lex_x = matrix_to_perm(&got)
            .and_then(|p| index_from_perm(&p).ok())
            .map(|idx| idx.x());
        if let Some(l) = lex_x {
            correspondence.insert(x, l);
        }
        if let Some(p) = matrix_to_perm(&got) {
            catalog_perms.push(p);
        }
        if let Some(p) = matrix_to_perm(&want) {
            fixed_perms.push(p);
        }
        entries.push(CatalogEntry {
            catalog_x: x,
            lex_x,
            exact_match,
            catalog_matrix: if exact_match { None } else { Some(grid(&got)) },
            fixed_form_matrix: if exact_match { None } else { Some(grid(&want)) },
        });
    }

    let all_exact = entries.iter().all(|e| e.exact_match);
    let identity_correspondence =
        entries.iter().all(|e| e.lex_x == Some(e.catalog_x));
    catalog_perms.sort();
    fixed_perms.sort();
    let set_equal = catalog_perms.len() == 24 && catalog_perms == fixed_perms;

    CatalogReport { entries, all_exact, identity_correspondence, set_equal, correspondence }
}

fn matrix_equal_01(a: &CMat, b: &CMat) -> bool {
    if a.rows != b.rows || a.cols != b.cols {
        return false;
    }
    (0..a.rows).all(|r| (0..a.cols).all(|c| a.get(r, c) == b.get(r, c)))
}
