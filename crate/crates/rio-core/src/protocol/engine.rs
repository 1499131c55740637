//! Step interpreter shared by all protocol families.
//!
//! A [`Program`] is a labeled register with an initial joint state, a list
//! of [`Step`]s, a qubit ownership map, and per-party classical knowledge.
//! The interpreter enforces locality (parties touch only qubits they own)
//! and causality (gates parametrized on classical data run only after that
//! data was measured locally or delivered by a message). Measurements fork
//! the run in enumerate mode, follow a given bit string in fixed mode, or
//! draw from a seeded deterministic generator in sample mode.
//!
//! Projections never renormalize in enumerate and fixed modes, so the
//! squared norm of a branch state equals the joint probability of its
//! outcomes; sample mode renormalizes after each measurement and tracks
//! the joint probability explicitly.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{CMat, C64};
use crate::qstate::{self, QubitLabel, StateVector};
use crate::restricted::encoded_width;

use super::{ClassicalMessage, Error, Event, OutcomeMode, Party};

/// A piece of classical data a party may hold: a measured bit or a
/// sender's operation selector (one-based set index, or the selector bit
/// for the one-qubit families).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum VarId {
    /// The outcome of measuring the given qubit.
    Bit(QubitLabel),
    /// The first sender's operation selector.
    X1,
    /// The second sender's operation selector.
    X2,
}

impl std::fmt::Display for VarId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarId::Bit(label) => write!(f, "the outcome of {label}"),
            VarId::X1 => f.write_str("the first operation selector"),
            VarId::X2 => f.write_str("the second operation selector"),
        }
    }
}

/// What one party currently knows.
pub(crate) type Knowledge = HashMap<VarId, u64>;

/// One payload item of a classical message.
#[derive(Debug, Clone)]
pub(crate) enum MsgItem {
    /// A single bit (the value's low bit).
    Bit(VarId),
    /// A one-based set index, big-endian on the encoded width for the
    /// given register size.
    Index { var: VarId, n_qubits: usize },
}

/// A gate a party applies to qubits it owns.
pub(crate) enum StepGate {
    /// Matrix known when the program is built.
    Fixed { name: String, matrix: CMat, targets: Vec<QubitLabel> },
    /// Matrix depending on classical data known only at run time.
    Dependent {
        name: String,
        needs: Vec<VarId>,
        targets: Vec<QubitLabel>,
        build: Rc<dyn Fn(&Knowledge) -> CMat>,
    },
}

/// One protocol step.
pub(crate) enum Step {
    /// A party applies a gate.
    Gate { party: Party, gate: StepGate },
    /// A party measures one of its qubits in the computational basis.
    Measure { party: Party, label: QubitLabel },
    /// A party sends classical data to another; `withheld` marks a message
    /// that is deliberately never delivered (sabotage runs).
    Send { from: Party, to: Party, tag: String, items: Vec<MsgItem>, withheld: bool },
    /// Free-form transcript note.
    Note(String),
}

/// A complete executable protocol description.
pub(crate) struct Program {
    /// Initial joint state of the shared register.
    pub initial: StateVector,
    /// Steps in chronological order.
    pub steps: Vec<Step>,
    /// Which party owns each qubit.
    pub owners: HashMap<QubitLabel, Party>,
    /// Classical data each party holds before the protocol starts.
    pub knowledge: HashMap<Party, Knowledge>,
}

/// One completed measurement branch.
pub(crate) struct Branch {
    /// Joint register state at the end of the branch.
    pub state: StateVector,
    /// Transcript of everything that happened on this branch.
    pub events: Vec<Event>,
    /// Measured bits in measurement order.
    pub outcomes: Vec<(QubitLabel, u8)>,
    /// Joint probability of the branch.
    pub branch_probability: f64,
}

#[derive(Clone)]
struct Ctx {
    state: StateVector,
    knowledge: HashMap<Party, Knowledge>,
    events: Vec<Event>,
    outcomes: Vec<(QubitLabel, u8)>,
    cum: f64,
    rng: Option<ChaCha8Rng>,
    fixed: Vec<u8>,
    fixed_pos: usize,
}

/// Run a program in the given outcome mode.
pub(crate) fn execute(program: &Program, mode: &OutcomeMode) -> Result<Vec<Branch>, Error> {
    let withheld = withheld_vars(program);
    let mut knowledge = program.knowledge.clone();
    for party in [Party::Alice, Party::Bob, Party::Charlie] {
        knowledge.entry(party).or_default();
    }
    let base = Ctx {
        state: program.initial.clone(),
        knowledge,
        events: Vec::new(),
        outcomes: Vec::new(),
        cum: 1.0,
        rng: match mode {
            OutcomeMode::Sample(seed) => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        },
        fixed: match mode {
            OutcomeMode::Fixed(bits) => bits.clone(),
            _ => Vec::new(),
        },
        fixed_pos: 0,
    };
    let enumerate = matches!(mode, OutcomeMode::EnumerateAll);
    let mut done = Vec::new();
    let mut work = vec![(0usize, base)];
    while let Some((start, mut ctx)) = work.pop() {
        let mut forked = false;
        let mut i = start;
        while i < program.steps.len() {
            match &program.steps[i] {
                Step::Note(text) => ctx.events.push(Event::Note { text: text.clone() }),
                Step::Gate { party, gate } => run_gate(program, *party, gate, &withheld, &mut ctx)?,
                Step::Send { from, to, tag, items, withheld: w } => {
                    run_send(*from, *to, tag, items, *w, &mut ctx)?
                }
                Step::Measure { party, label } => {
                    if enumerate {
                        fork_measurement(*party, *label, &ctx, i + 1, &mut work)?;
                        forked = true;
                        break;
                    }
                    measure_single(*party, *label, &mut ctx)?;
                }
            }
            i += 1;
        }
        if !forked {
            done.push(Branch {
                state: ctx.state,
                events: ctx.events,
                outcomes: ctx.outcomes,
                branch_probability: ctx.cum,
            });
        }
    }
    Ok(done)
}

fn withheld_vars(program: &Program) -> HashSet<VarId> {
    let mut set = HashSet::new();
    for step in &program.steps {
        if let Step::Send { items, withheld: true, .. } = step {
            for item in items {
                set.insert(match item {
                    MsgItem::Bit(var) => *var,
                    MsgItem::Index { var, .. } => *var,
                });
            }
        }
    }
    set
}

fn run_gate(
    program: &Program,
    party: Party,
    gate: &StepGate,
    withheld: &HashSet<VarId>,
    ctx: &mut Ctx,
) -> Result<(), Error> {
    let (name, targets, matrix) = match gate {
        StepGate::Fixed { name, matrix, targets } => (name, targets, matrix.clone()),
        StepGate::Dependent { name, needs, targets, build } => {
            let known = ctx.knowledge.get(&party).expect("all parties initialized");
            let missing: Vec<VarId> =
                needs.iter().filter(|v| !known.contains_key(v)).copied().collect();
            if missing.is_empty() {
                (name, targets, build(known))
            } else if missing.iter().all(|v| withheld.contains(v)) {
                ctx.events.push(Event::Note {
                    text: format!(
                        "{party} skipped gate {name}: {} was withheld",
                        missing[0]
                    ),
                });
                return Ok(());
            } else {
                return Err(Error::Causality {
                    party: party.name().to_string(),
                    what: missing[0].to_string(),
                });
            }
        }
    };
    for target in targets {
        if program.owners.get(target) != Some(&party) {
            return Err(Error::Roles(format!("{party} acted on {target} which it does not own")));
        }
    }
    ctx.state = qstate::apply_local(&matrix, targets, &ctx.state)?;
    ctx.events.push(Event::GateApplied {
        party: party.name().to_string(),
        name: name.clone(),
        targets: targets.iter().map(|t| t.to_string()).collect(),
    });
    Ok(())
}

fn run_send(
    from: Party,
    to: Party,
    tag: &str,
    items: &[MsgItem],
    withheld: bool,
    ctx: &mut Ctx,
) -> Result<(), Error> {
    if withheld {
        ctx.events.push(Event::Note {
            text: format!("sabotage: {from} withheld message '{tag}' from {to}"),
        });
        return Ok(());
    }
    let sender = ctx.knowledge.get(&from).expect("all parties initialized").clone();
    let mut bits = String::new();
    let mut delivered: Vec<(VarId, u64)> = Vec::new();
    for item in items {
        let (var, value) = match item {
            MsgItem::Bit(var) => {
                let value = *sender.get(var).ok_or_else(|| Error::Causality {
                    party: from.name().to_string(),
                    what: var.to_string(),
                })?;
                bits.push(if value & 1 == 1 { '1' } else { '0' });
                (*var, value)
            }
            MsgItem::Index { var, n_qubits } => {
                let value = *sender.get(var).ok_or_else(|| Error::Causality {
                    party: from.name().to_string(),
                    what: var.to_string(),
                })?;
                let width = encoded_width(*n_qubits)?;
                for pos in (0..width).rev() {
                    bits.push(if (value >> pos) & 1 == 1 { '1' } else { '0' });
                }
                (*var, value)
            }
        };
        delivered.push((var, value));
    }
    let width = bits.len();
    let recipient = ctx.knowledge.get_mut(&to).expect("all parties initialized");
    for (var, value) in delivered {
        recipient.insert(var, value);
    }
    ctx.events.push(Event::Message(ClassicalMessage {
        from: from.name().to_string(),
        to: to.name().to_string(),
        tag: tag.to_string(),
        bits,
        width,
    }));
    Ok(())
}

fn fork_measurement(
    party: Party,
    label: QubitLabel,
    ctx: &Ctx,
    next_step: usize,
    work: &mut Vec<(usize, Ctx)>,
) -> Result<(), Error> {
    let norm_before = ctx.state.norm_sqr();
    let (s0, p0) = qstate::project(label, 0, &ctx.state)?;
    let (s1, p1) = qstate::project(label, 1, &ctx.state)?;
    // Push outcome 1 first so the LIFO worklist explores outcome 0 first,
    // which yields branches in lexicographic outcome order.
    for (outcome, state, prob) in [(1u8, s1, p1), (0u8, s0, p0)] {
        if prob > 0.0 {
            let mut child = ctx.clone();
            child.state = state;
            child.cum = prob;
            record_measurement(party, label, outcome, prob / norm_before, &mut child);
            work.push((next_step, child));
        }
    }
    Ok(())
}

fn measure_single(party: Party, label: QubitLabel, ctx: &mut Ctx) -> Result<(), Error> {
    let norm_before = ctx.state.norm_sqr();
    let (s0, p0) = qstate::project(label, 0, &ctx.state)?;
    let (s1, p1) = qstate::project(label, 1, &ctx.state)?;
    let sampling = ctx.rng.is_some();
    let outcome: u8 = if let Some(rng) = &mut ctx.rng {
        let r: f64 = rng.gen();
        if r < p0 / (p0 + p1) {
            0
        } else {
            1
        }
    } else {
        let bit = ctx.fixed[ctx.fixed_pos];
        ctx.fixed_pos += 1;
        bit
    };
    let (state, prob) = if outcome == 0 { (s0, p0) } else { (s1, p1) };
    if prob <= 0.0 {
        return Err(Error::ImpossibleOutcome { label: label.to_string(), outcome });
    }
    let conditional = prob / norm_before;
    if sampling {
        let mut normalized = state.scaled(C64::new(1.0 / prob.sqrt(), 0.0));
        normalized.normalized = true;
        ctx.state = normalized;
        ctx.cum *= conditional;
    } else {
        ctx.state = state;
        ctx.cum = prob;
    }
    record_measurement(party, label, outcome, conditional, ctx);
    Ok(())
}

fn record_measurement(party: Party, label: QubitLabel, outcome: u8, conditional: f64, ctx: &mut Ctx) {
    ctx.outcomes.push((label, outcome));
    ctx.knowledge
        .get_mut(&party)
        .expect("all parties initialized")
        .insert(VarId::Bit(label), u64::from(outcome));
    ctx.events.push(Event::Measurement {
        party: party.name().to_string(),
        label: label.to_string(),
        outcome,
        conditional_probability: conditional,
        branch_probability: ctx.cum,
    });
}
