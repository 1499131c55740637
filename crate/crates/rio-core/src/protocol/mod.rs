//! Protocol engine for remote implementation of restricted operation sets
//! over shared entanglement.
//!
//! Four families are provided, all driven by the same step interpreter:
//!
//! * [`run_controlled_1q`]: one controller, one sender, one receiver share a
//!   GHZ triple; the sender holds a one-qubit operation U(d, u) and the
//!   receiver ends up with U applied to an unknown qubit, gated on the
//!   controller's password bit.
//! * [`run_combined_1q`]: two senders and one receiver share a GHZ triple;
//!   the receiver ends up with U(d2, v) U(d1, u) applied to the unknown
//!   qubit without either sender learning the other's operation data.
//! * [`run_controlled_nq`]: the N-qubit generalization with n controllers
//!   (n GHZ triples plus N - n Bell pairs); the sender holds a restricted
//!   operation T(x, u) on N qubits.
//! * [`run_combined_nq`]: the N-qubit two-sender generalization composing
//!   T(y, v) T(x, u) on the receiver's N unknown qubits.
//!
//! Every run yields one [`ProtocolResult`] per measurement branch with a
//! full classical transcript, the receiver's extracted state, the oracle
//! state computed by applying the operations directly, and the fidelity
//! between the two. Post-selection is unnormalized, so the squared norm of
//! a branch equals its probability and can be asserted exactly.

mod engine;
mod families;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::linalg::{CMat, C64};
use crate::qstate::{self, QubitLabel, StateVector};
use crate::restricted::{self, build_t, encoded_width, set_count, SetIndex};


/// Fidelity threshold below which a branch is considered to have failed the
/// product contract (used by the two-sender fallback logic).
pub const FIDELITY_TOL: f64 = 1e-9;

/// Errors raised while validating or executing a protocol run.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Error bubbled up from state-vector bookkeeping.
    #[error(transparent)]
    State(#[from] qstate::Error),
    /// Error bubbled up from restricted-set construction.
    #[error(transparent)]
    Restricted(#[from] restricted::Error),
    /// Variant outside the supported range for the family.
    #[error("variant {0} is not valid for this family")]
    BadVariant(u8),
    /// Register size outside 1..=4.
    #[error("n_qubits {0} outside the supported range 1..=4")]
    SizeCap(usize),
    /// Controller count incompatible with the family or register size.
    #[error("controller count {controllers} invalid for this family at n_qubits {n_qubits}")]
    BadControllers { controllers: usize, n_qubits: usize },
    /// A second operation was required but missing, or given but unused.
    #[error("second operation {0}")]
    SecondOp(&'static str),
    /// Wrong number of phases for the register size.
    #[error("operation phase count {got} does not match 2^N = {want}")]
    PhaseCount { want: usize, got: usize },
    /// Phases must have unit modulus unless non-unitary mode is enabled.
    #[error("phase {index} has modulus {modulus} but unitary mode is active")]
    NonUnitPhase { index: usize, modulus: f64 },
    /// The unknown-state amplitudes have the wrong length or zero norm.
    #[error("unknown state: {0}")]
    BadUnknownState(String),
    /// Fixed outcome mode received the wrong number of bits.
    #[error("fixed outcomes need {want} bits, got {got}")]
    OutcomeBits { want: usize, got: usize },
    /// Fixed outcome mode requested a branch of probability zero.
    #[error("outcome {outcome} for {label} has probability zero")]
    ImpossibleOutcome { label: String, outcome: u8 },
    /// A party needed classical data it never received.
    #[error("causality violation: {party} needs {what} but never received it")]
    Causality { party: String, what: String },
    /// Role assignment does not match the family.
    #[error("role assignment: {0}")]
    Roles(String),
}

/// The three parties of every protocol instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Party {
    Alice,
    Bob,
    Charlie,
}

impl Party {
    /// The qubit class this party owns in the shared register.
    pub fn class(self) -> qstate::RoleClass {
        match self {
            Party::Alice => qstate::RoleClass::A,
            Party::Bob => qstate::RoleClass::B,
            Party::Charlie => qstate::RoleClass::C,
        }
    }

    /// Canonical display name.
    pub fn name(self) -> &'static str {
        match self {
            Party::Alice => "Alice",
            Party::Bob => "Bob",
            Party::Charlie => "Charlie",
        }
    }
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Protocol family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    /// One-qubit controlled remote implementation (GHZ triple, password).
    Controlled1q,
    /// One-qubit combined remote implementation (GHZ triple, two senders).
    Combined1q,
    /// N-qubit controlled remote implementation with n controllers.
    ControlledNq,
    /// N-qubit combined remote implementation with two senders.
    CombinedNq,
}

impl Family {
    /// Stable string used in JSON output and on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Controlled1q => "controlled1q",
            Family::Combined1q => "combined1q",
            Family::ControlledNq => "controlled-nq",
            Family::CombinedNq => "combined-nq",
        }
    }
}

/// How measurement outcomes are chosen during a run.
#[derive(Debug, Clone)]
pub enum OutcomeMode {
    /// Depth-first enumeration of every branch with nonzero probability.
    EnumerateAll,
    /// Follow one branch given by explicit bits in measurement order.
    Fixed(Vec<u8>),
    /// Sample one branch with a seeded deterministic generator.
    Sample(u64),
}

/// The receiver's unknown input state.
#[derive(Debug, Clone)]
pub enum UnknownState {
    /// Haar-like random state from a deterministic seed.
    Seed(u64),
    /// Explicit amplitudes (length 2^N, normalized internally).
    Amplitudes(Vec<C64>),
}

/// One operation held by a sender: a restricted-set index and its phases.
#[derive(Debug, Clone)]
pub struct OpSpec {
    /// One-based index into the lexicographically ordered restricted set.
    pub x: u64,
    /// Phase vector (length 2^N); row m of the operation carries `phases[m]`.
    pub phases: Vec<C64>,
}

impl OpSpec {
    /// One-qubit convenience: selector bit d and two phases, so x = d + 1.
    pub fn one_qubit(d: u8, phases: [C64; 2]) -> Self {
        OpSpec { x: u64::from(d) + 1, phases: phases.to_vec() }
    }
}

/// Deliberate protocol damage used by verification tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sabotage {
    /// Run the protocol faithfully.
    None,
    /// Controllers skip their startup basis rotation before measuring.
    OmitStartup,
    /// The password message is never delivered; gates that depend on it
    /// are skipped and the run proceeds without them.
    WithholdPassword,
}

/// Who plays which role. Only the one-qubit families support rotation;
/// the N-qubit families fix Alice as sender, Bob as receiver, and Charlie
/// as controller bank or second sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleAssignment {
    /// Family defaults: controlled uses Charlie/Alice/Bob as
    /// controller/sender/receiver; combined-1q uses Alice/Bob/Charlie as
    /// first sender/second sender/receiver.
    Default,
    /// Explicit roles for the one-qubit controlled family.
    Controlled1q { controller: Party, sender: Party, receiver: Party },
    /// Explicit roles for the one-qubit combined family.
    Combined1q { sender_first: Party, sender_second: Party, receiver: Party },
}

/// Full description of one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    /// Which protocol family to execute.
    pub family: Family,
    /// Register size N (1..=4). Must be 1 for the one-qubit families.
    pub n_qubits: usize,
    /// Controller count n. Fixed to 1 for controlled-1q and 0 for the
    /// combined families; 0..=N for controlled-nq.
    pub controllers: usize,
    /// Password routing variant (1..=4) for the controlled families;
    /// must be 1 for the combined families.
    pub variant: u8,
    /// The (first) sender's operation.
    pub op1: OpSpec,
    /// The second sender's operation (combined families only).
    pub op2: Option<OpSpec>,
    /// The receiver's unknown input state.
    pub unknown: UnknownState,
    /// Measurement outcome selection.
    pub outcomes: OutcomeMode,
    /// Optional protocol damage for verification runs.
    pub sabotage: Sabotage,
    /// Role rotation (one-qubit families only).
    pub roles: RoleAssignment,
    /// Accept phases of non-unit modulus (the comparison against the
    /// oracle is then done up to normalization). Off by default.
    pub allow_non_unitary: bool,
}

impl ProtocolConfig {
    /// A minimal valid configuration for the given family, useful as a
    /// starting point in tests and the command-line tool.
    pub fn template(family: Family) -> Self {
        let one = C64::new(1.0, 0.0);
        let (n_qubits, controllers, op2) = match family {
            Family::Controlled1q => (1, 1, None),
            Family::Combined1q => (1, 0, Some(OpSpec { x: 1, phases: vec![one; 2] })),
            Family::ControlledNq => (2, 1, None),
            Family::CombinedNq => (2, 0, Some(OpSpec { x: 1, phases: vec![one; 4] })),
        };
        let dim = 1usize << n_qubits;
        ProtocolConfig {
            family,
            n_qubits,
            controllers,
            variant: 1,
            op1: OpSpec { x: 1, phases: vec![one; dim] },
            op2,
            unknown: UnknownState::Seed(7),
            outcomes: OutcomeMode::EnumerateAll,
            sabotage: Sabotage::None,
            roles: RoleAssignment::Default,
            allow_non_unitary: false,
        }
    }

    /// Number of measured bits in measurement order, as consumed by
    /// [`OutcomeMode::Fixed`].
    pub fn measured_bits(&self) -> usize {
        match self.family {
            Family::Controlled1q | Family::Combined1q => 3,
            Family::ControlledNq => self.controllers + 2 * self.n_qubits,
            Family::CombinedNq => 3 * self.n_qubits,
        }
    }

    fn check_op(&self, op: &OpSpec) -> Result<(), Error> {
        let dim = 1usize << self.n_qubits;
        if op.phases.len() != dim {
            return Err(Error::PhaseCount { want: dim, got: op.phases.len() });
        }
        let count = set_count(self.n_qubits)?;
        if op.x < 1 || op.x > count {
            return Err(Error::Restricted(restricted::Error::IndexOutOfRange {
                x: op.x,
                count,
            }));
        }
        if !self.allow_non_unitary {
            for (index, p) in op.phases.iter().enumerate() {
                let modulus = p.norm();
                if (modulus - 1.0).abs() > 1e-12 {
                    return Err(Error::NonUnitPhase { index, modulus });
                }
            }
        }
        Ok(())
    }

    /// Validate the configuration against the family's constraints.
    pub fn validate(&self) -> Result<(), Error> {
        if self.n_qubits < 1 || self.n_qubits > 4 {
            return Err(Error::SizeCap(self.n_qubits));
        }
        match self.family {
            Family::Controlled1q => {
                if self.n_qubits != 1 {
                    return Err(Error::SizeCap(self.n_qubits));
                }
                if self.controllers != 1 {
                    return Err(Error::BadControllers {
                        controllers: self.controllers,
                        n_qubits: self.n_qubits,
                    });
                }
                if !(1..=4).contains(&self.variant) {
                    return Err(Error::BadVariant(self.variant));
                }
                if self.op2.is_some() {
                    return Err(Error::SecondOp("given but this family has one sender"));
                }
                if let RoleAssignment::Combined1q { .. } = self.roles {
                    return Err(Error::Roles("combined role set on a controlled family".into()));
                }
                if let RoleAssignment::Controlled1q { controller, sender, receiver } = self.roles {
                    if controller == sender || sender == receiver || controller == receiver {
                        return Err(Error::Roles("roles must be three distinct parties".into()));
                    }
                }
            }
            Family::Combined1q => {
                if self.n_qubits != 1 {
                    return Err(Error::SizeCap(self.n_qubits));
                }
                if self.controllers != 0 {
                    return Err(Error::BadControllers {
                        controllers: self.controllers,
                        n_qubits: self.n_qubits,
                    });
                }
                if self.variant != 1 {
                    return Err(Error::BadVariant(self.variant));
                }
                if self.op2.is_none() {
                    return Err(Error::SecondOp("required for a two-sender family"));
                }
                if let RoleAssignment::Controlled1q { .. } = self.roles {
                    return Err(Error::Roles("controlled role set on a combined family".into()));
                }
                if let RoleAssignment::Combined1q { sender_first, sender_second, receiver } =
                    self.roles
                {
                    if sender_first == sender_second
                        || sender_second == receiver
                        || sender_first == receiver
                    {
                        return Err(Error::Roles("roles must be three distinct parties".into()));
                    }
                }
            }
            Family::ControlledNq => {
                if self.controllers > self.n_qubits {
                    return Err(Error::BadControllers {
                        controllers: self.controllers,
                        n_qubits: self.n_qubits,
                    });
                }
                if !(1..=4).contains(&self.variant) {
                    return Err(Error::BadVariant(self.variant));
                }
                if self.op2.is_some() {
                    return Err(Error::SecondOp("given but this family has one sender"));
                }
                if self.roles != RoleAssignment::Default {
                    return Err(Error::Roles("N-qubit families use fixed roles".into()));
                }
            }
            Family::CombinedNq => {
                if self.controllers != 0 {
                    return Err(Error::BadControllers {
                        controllers: self.controllers,
                        n_qubits: self.n_qubits,
                    });
                }
                if self.variant != 1 {
                    return Err(Error::BadVariant(self.variant));
                }
                if self.op2.is_none() {
                    return Err(Error::SecondOp("required for a two-sender family"));
                }
                if self.roles != RoleAssignment::Default {
                    return Err(Error::Roles("N-qubit families use fixed roles".into()));
                }
            }
        }
        self.check_op(&self.op1)?;
        if let Some(op2) = &self.op2 {
            self.check_op(op2)?;
        }
        if let OutcomeMode::Fixed(bits) = &self.outcomes {
            let want = self.measured_bits();
            if bits.len() != want {
                return Err(Error::OutcomeBits { want, got: bits.len() });
            }
            for &b in bits {
                if b > 1 {
                    return Err(Error::State(qstate::Error::BadBit(b)));
                }
            }
        }
        if let UnknownState::Amplitudes(amps) = &self.unknown {
            let dim = 1usize << self.n_qubits;
            if amps.len() != dim {
                return Err(Error::BadUnknownState(format!(
                    "need {dim} amplitudes, got {}",
                    amps.len()
                )));
            }
            let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            if norm <= 0.0 {
                return Err(Error::BadUnknownState("zero norm".into()));
            }
        }
        Ok(())
    }
}

/// One classical message from the transcript.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ClassicalMessage {
    /// Sending party.
    pub from: String,
    /// Receiving party.
    pub to: String,
    /// Human-readable purpose of the message.
    pub tag: String,
    /// Payload as a big-endian bit string.
    pub bits: String,
    /// Payload width in bits.
    pub width: usize,
}

/// One entry of a run transcript.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// A party applied a gate to qubits it owns.
    GateApplied { party: String, name: String, targets: Vec<String> },
    /// A party measured one of its qubits in the computational basis.
    Measurement {
        party: String,
        label: String,
        outcome: u8,
        /// Probability of this outcome given everything measured so far.
        conditional_probability: f64,
        /// Joint probability of the branch up to and including this outcome.
        branch_probability: f64,
    },
    /// A classical message was delivered.
    Message(ClassicalMessage),
    /// Free-form note (sabotage markers, fallback markers).
    Note { text: String },
}

/// Result of one measurement branch of a protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolResult {
    /// Family that produced this branch.
    pub family: Family,
    /// Register size N.
    pub n_qubits: usize,
    /// Controller count n.
    pub controllers: usize,
    /// Password routing variant.
    pub variant: u8,
    /// First sender's set index.
    pub x: u64,
    /// Second sender's set index, if any.
    pub y: Option<u64>,
    /// Measured bits in measurement order.
    pub outcomes: Vec<(String, u8)>,
    /// Full event transcript for this branch.
    pub transcript: Vec<Event>,
    /// Joint register state at the end of the branch (unnormalized in
    /// enumerate and fixed modes, normalized in sample mode).
    pub final_state: StateVector,
    /// The receiver's extracted state on the unknown-qubit block.
    pub receiver_state: StateVector,
    /// Oracle state: the operations applied directly to the unknown input.
    pub oracle_state: StateVector,
    /// Fidelity between receiver and oracle states, in [0, 1].
    pub fidelity: f64,
    /// Joint probability of this branch.
    pub branch_probability: f64,
    /// Operator substitutions applied by the fallback logic, empty when the
    /// primary operator placement satisfied the product contract.
    pub substitutions: Vec<String>,
}

impl ProtocolResult {
    /// Classical messages of the transcript in delivery order.
    pub fn messages(&self) -> Vec<&ClassicalMessage> {
        self.transcript
            .iter()
            .filter_map(|e| match e {
                Event::Message(m) => Some(m),
                _ => None,
            })
            .collect()
    }

    /// Serialize the branch summary to a JSON value.
    pub fn to_json(&self) -> serde_json::Value {
        let outcomes: Vec<serde_json::Value> = self
            .outcomes
            .iter()
            .map(|(label, bit)| serde_json::json!({ "label": label, "bit": bit }))
            .collect();
        let messages: Vec<serde_json::Value> = self
            .messages()
            .iter()
            .map(|m| {
                serde_json::json!({
                    "from": m.from,
                    "to": m.to,
                    "tag": m.tag,
                    "bits": m.bits,
                })
            })
            .collect();
        serde_json::json!({
            "family": self.family.as_str(),
            "N": self.n_qubits,
            "n": self.controllers,
            "variant": self.variant,
            "x": self.x,
            "y": self.y,
            "outcomes": outcomes,
            "branch_probability": self.branch_probability,
            "fidelity": self.fidelity,
            "messages": messages,
            "substitutions": self.substitutions,
        })
    }
}

/// Expected classical message schedule entry: sender, recipient, width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpectedMessage {
    pub from: String,
    pub to: String,
    pub width: usize,
}

/// Comparison of one transcript message against the expected schedule.
#[derive(Debug, Clone, Serialize)]
pub struct AuditEntry {
    /// Position in the delivered-message order.
    pub index: usize,
    pub from: String,
    pub to: String,
    pub tag: String,
    pub width: usize,
    pub expected_from: String,
    pub expected_to: String,
    pub expected_width: usize,
    /// Whether sender, recipient, and width all match.
    pub pass: bool,
}

/// Result of auditing a transcript's classical communication.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    /// Per-message comparisons in delivery order.
    pub entries: Vec<AuditEntry>,
    /// Expected messages that never appeared.
    pub missing: Vec<ExpectedMessage>,
    /// Delivered messages beyond the expected schedule.
    pub unexpected: Vec<ClassicalMessage>,
    /// True when every message matches and nothing is missing or extra.
    pub pass: bool,
}

/// Expected message schedule for a configuration, in delivery order.
///
/// Widths follow the protocol definitions: the one-qubit families encode a
/// selector bit directly, the N-qubit families encode the one-based set
/// index on w = bit-length of (2^N)! bits.
pub fn expected_schedule(config: &ProtocolConfig) -> Result<Vec<ExpectedMessage>, Error> {
    let n = config.n_qubits;
    let w = encoded_width(n)?;
    let msg = |from: Party, to: Party, width: usize| ExpectedMessage {
        from: from.name().to_string(),
        to: to.name().to_string(),
        width,
    };
    Ok(match config.family {
        Family::Controlled1q => {
            let (controller, sender, receiver) = families::controlled_1q_roles(&config.roles);
            let password_to = if config.variant == 1 { sender } else { receiver };
            let password = msg(controller, password_to, 1);
            let prep = msg(receiver, sender, 1);
            let send = msg(sender, receiver, 2);
            if config.variant == 4 {
                vec![prep, send, password]
            } else {
                vec![password, prep, send]
            }
        }
        Family::Combined1q => {
            let (s1, s2, receiver) = families::combined_1q_roles(&config.roles);
            vec![
                msg(receiver, s1, 1),
                msg(receiver, s2, 1),
                msg(s1, s2, 1),
                msg(s1, receiver, 2),
                msg(s2, receiver, 2),
            ]
        }
        Family::ControlledNq => {
            let prep = msg(Party::Bob, Party::Alice, n);
            let send = msg(Party::Alice, Party::Bob, n + w);
            if config.controllers == 0 {
                vec![prep, send]
            } else {
                let password_to = if config.variant == 1 { Party::Alice } else { Party::Bob };
                let password = msg(Party::Charlie, password_to, config.controllers);
                if config.variant == 4 {
                    vec![prep, send, password]
                } else {
                    vec![password, prep, send]
                }
            }
        }
        Family::CombinedNq => vec![
            msg(Party::Bob, Party::Alice, n),
            msg(Party::Bob, Party::Charlie, n),
            msg(Party::Alice, Party::Bob, n + w),
            msg(Party::Alice, Party::Charlie, w),
            msg(Party::Charlie, Party::Bob, n + w),
        ],
    })
}

/// Audit a transcript's classical messages against the expected schedule
/// for the configuration that produced it.
pub fn audit_bits(transcript: &[Event], config: &ProtocolConfig) -> Result<AuditReport, Error> {
    let delivered: Vec<ClassicalMessage> = transcript
        .iter()
        .filter_map(|e| match e {
            Event::Message(m) => Some(m.clone()),
            _ => None,
        })
        .collect();
    audit_messages(&delivered, config)
}

/// Audit a delivered message list against the expected schedule; useful when
/// only the messages of a stored run report are available.
pub fn audit_messages(
    messages: &[ClassicalMessage],
    config: &ProtocolConfig,
) -> Result<AuditReport, Error> {
    let expected = expected_schedule(config)?;
    let delivered: Vec<&ClassicalMessage> = messages.iter().collect();
    let mut entries = Vec::new();
    let mut pass = true;
    for (index, (msg, exp)) in delivered.iter().zip(expected.iter()).enumerate() {
        let ok = msg.from == exp.from && msg.to == exp.to && msg.width == exp.width;
        pass &= ok;
        entries.push(AuditEntry {
            index,
            from: msg.from.clone(),
            to: msg.to.clone(),
            tag: msg.tag.clone(),
            width: msg.width,
            expected_from: exp.from.clone(),
            expected_to: exp.to.clone(),
            expected_width: exp.width,
            pass: ok,
        });
    }
    let missing: Vec<ExpectedMessage> = expected.iter().skip(delivered.len()).cloned().collect();
    let unexpected: Vec<ClassicalMessage> =
        delivered.iter().skip(expected.len()).map(|m| (*m).clone()).collect();
    pass &= missing.is_empty() && unexpected.is_empty();
    Ok(AuditReport { entries, missing, unexpected, pass })
}

/// Labels of the receiver's unknown-qubit block, Y1..YN.
pub fn unknown_labels(n_qubits: usize) -> Vec<QubitLabel> {
    (1..=n_qubits).map(|m| QubitLabel::y(m as u8)).collect()
}

/// Build the unknown input state on its own Y-block register, normalized.
pub fn unknown_state(config: &ProtocolConfig) -> Result<StateVector, Error> {
    let labels = unknown_labels(config.n_qubits);
    match &config.unknown {
        UnknownState::Seed(seed) => Ok(qstate::make_random_state(&labels, *seed)?),
        UnknownState::Amplitudes(amps) => {
            let structure = qstate::SpaceStructure::new(labels)?;
            let dim = 1usize << structure.n_qubits();
            if amps.len() != dim {
                return Err(Error::BadUnknownState(format!(
                    "need {dim} amplitudes, got {}",
                    amps.len()
                )));
            }
            let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            if norm <= 0.0 {
                return Err(Error::BadUnknownState("zero norm".into()));
            }
            let scale = C64::new(1.0 / norm.sqrt(), 0.0);
            Ok(StateVector {
                structure,
                amps: amps.iter().map(|a| a * scale).collect(),
                normalized: true,
            })
        }
    }
}

/// The operation matrix for an [`OpSpec`] at the given register size.
pub fn op_matrix(n_qubits: usize, op: &OpSpec) -> Result<CMat, Error> {
    let index = SetIndex::new(op.x, n_qubits)?;
    Ok(build_t(&index, &op.phases)?.matrix())
}

/// Oracle state: the configured operations applied directly to the unknown
/// input on its own register, normalized.
pub fn oracle(config: &ProtocolConfig) -> Result<StateVector, Error> {
    let labels = unknown_labels(config.n_qubits);
    let input = unknown_state(config)?;
    let t1 = op_matrix(config.n_qubits, &config.op1)?;
    let mut state = qstate::apply_local(&t1, &labels, &input)?;
    if let Some(op2) = &config.op2 {
        let t2 = op_matrix(config.n_qubits, op2)?;
        state = qstate::apply_local(&t2, &labels, &state)?;
    }
    let norm = state.norm_sqr().sqrt();
    if norm > 0.0 {
        state = state.scaled(C64::new(1.0 / norm, 0.0));
    }
    state.normalized = true;
    Ok(state)
}

/// Run the one-qubit controlled family.
pub fn run_controlled_1q(config: &ProtocolConfig) -> Result<Vec<ProtocolResult>, Error> {
    if config.family != Family::Controlled1q {
        return Err(Error::Roles("config family is not controlled1q".into()));
    }
    config.validate()?;
    run_family(config)
}

/// Run the one-qubit combined (two-sender) family.
pub fn run_combined_1q(config: &ProtocolConfig) -> Result<Vec<ProtocolResult>, Error> {
    if config.family != Family::Combined1q {
        return Err(Error::Roles("config family is not combined1q".into()));
    }
    config.validate()?;
    run_family(config)
}

/// Run the N-qubit controlled family.
pub fn run_controlled_nq(config: &ProtocolConfig) -> Result<Vec<ProtocolResult>, Error> {
    if config.family != Family::ControlledNq {
        return Err(Error::Roles("config family is not controlled-nq".into()));
    }
    config.validate()?;
    run_family(config)
}

/// Run the N-qubit combined (two-sender) family.
pub fn run_combined_nq(config: &ProtocolConfig) -> Result<Vec<ProtocolResult>, Error> {
    if config.family != Family::CombinedNq {
        return Err(Error::Roles("config family is not combined-nq".into()));
    }
    config.validate()?;
    run_family(config)
}

/// Run any family after validation; dispatches on `config.family`.
pub fn run(config: &ProtocolConfig) -> Result<Vec<ProtocolResult>, Error> {
    config.validate()?;
    run_family(config)
}

fn run_family(config: &ProtocolConfig) -> Result<Vec<ProtocolResult>, Error> {
    let oracle_state = oracle(config)?;
    match config.family {
        Family::CombinedNq => {
            // Primary operator placement first; on any branch failing the
            // product contract, rerun with the derived placement and record
            // the substitutions.
            let program = families::build_program(config, false)?;
            let results = finish(config, &program, &oracle_state, &[])?;
            let worst = results.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min);
            if worst >= 1.0 - FIDELITY_TOL {
                return Ok(results);
            }
            let substitutions = vec![
                "second-sender sending: flip correction sigma_b applied to the C block \
                 before the fixed form R(x); the primary placement failed the product \
                 contract on at least one branch"
                    .to_string(),
                "receiver recovery: flip correction sigma_b removed from the Y-block recovery"
                    .to_string(),
            ];
            let program = families::build_program(config, true)?;
            finish(config, &program, &oracle_state, &substitutions)
        }
        _ => {
            let program = families::build_program(config, false)?;
            finish(config, &program, &oracle_state, &[])
        }
    }
}

fn finish(
    config: &ProtocolConfig,
    program: &engine::Program,
    oracle_state: &StateVector,
    substitutions: &[String],
) -> Result<Vec<ProtocolResult>, Error> {
    let branches = engine::execute(program, &config.outcomes)?;
    let keep = unknown_labels(config.n_qubits);
    let mut results = Vec::with_capacity(branches.len());
    for branch in branches {
        let fixed: Vec<(QubitLabel, u8)> = branch.outcomes.clone();
        let receiver_state = qstate::extract_factor(&branch.state, &keep, &fixed)?;
        let fidelity =
            qstate::fidelity_up_to_phase(&receiver_state, oracle_state)?.clamp(0.0, 1.0);
        let mut transcript = branch.events;
        if !substitutions.is_empty() {
            transcript.push(Event::Note {
                text: "operator placement substituted after primary-placement contract failure"
                    .to_string(),
            });
        }
        results.push(ProtocolResult {
            family: config.family,
            n_qubits: config.n_qubits,
            controllers: config.controllers,
            variant: config.variant,
            x: config.op1.x,
            y: config.op2.as_ref().map(|op| op.x),
            outcomes: branch
                .outcomes
                .iter()
                .map(|(label, bit)| (label.to_string(), *bit))
                .collect(),
            transcript,
            final_state: branch.state,
            receiver_state,
            oracle_state: oracle_state.clone(),
            fidelity,
            branch_probability: branch.branch_probability,
            substitutions: substitutions.to_vec(),
        });
    }
    Ok(results)
}

/// Group branch results by their outcome bit strings; convenience for
/// cross-family comparisons in tests.
pub fn by_outcomes(results: &[ProtocolResult]) -> BTreeMap<Vec<u8>, &ProtocolResult> {
    results
        .iter()
        .map(|r| (r.outcomes.iter().map(|(_, b)| *b).collect::<Vec<u8>>(), r))
        .collect()
}
