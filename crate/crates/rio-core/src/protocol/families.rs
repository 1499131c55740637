//! Step programs for the four protocol families.
//!
//! Each builder assembles the shared register (GHZ triples, Bell pairs,
//! and the receiver's unknown block), the qubit ownership map, the
//! senders' private knowledge, and the chronological step list consumed
//! by the interpreter in `engine`.

use std::collections::HashMap;
use std::rc::Rc;

use crate::linalg::{kron_all, CMat};
use crate::qstate::{self, QubitLabel, StateVector};
use crate::restricted::{
    build_r, build_t, cnot_target_first, hadamard, one_qubit_u, phase_r, sigma_bit, SetIndex,
};

use super::engine::{Knowledge, MsgItem, Program, Step, StepGate, VarId};
use super::{Error, Family, Party, ProtocolConfig, RoleAssignment, Sabotage};

/// Controller, sender, receiver for the one-qubit controlled family.
pub(super) fn controlled_1q_roles(roles: &RoleAssignment) -> (Party, Party, Party) {
    match roles {
        RoleAssignment::Controlled1q { controller, sender, receiver } => {
            (*controller, *sender, *receiver)
        }
        _ => (Party::Charlie, Party::Alice, Party::Bob),
    }
}

/// First sender, second sender, receiver for the one-qubit combined family.
pub(super) fn combined_1q_roles(roles: &RoleAssignment) -> (Party, Party, Party) {
    match roles {
        RoleAssignment::Combined1q { sender_first, sender_second, receiver } => {
            (*sender_first, *sender_second, *receiver)
        }
        _ => (Party::Alice, Party::Bob, Party::Charlie),
    }
}

fn own_label(party: Party) -> QubitLabel {
    QubitLabel::new(party.class(), 1)
}

fn gate_fixed(party: Party, name: &str, matrix: CMat, targets: Vec<QubitLabel>) -> Step {
    Step::Gate { party, gate: StepGate::Fixed { name: name.to_string(), matrix, targets } }
}

/// Single-qubit phase flip (-1)^z whose exponent is classical data.
fn phase_dep(party: Party, target: QubitLabel, var: VarId, name: &str) -> Step {
    Step::Gate {
        party,
        gate: StepGate::Dependent {
            name: name.to_string(),
            needs: vec![var],
            targets: vec![target],
            build: Rc::new(move |k: &Knowledge| phase_r(k[&var] as u8)),
        },
    }
}

/// Single-qubit bit flip applied only when the classical bit is one.
fn sigma_dep(party: Party, target: QubitLabel, var: VarId, name: &str) -> Step {
    Step::Gate {
        party,
        gate: StepGate::Dependent {
            name: name.to_string(),
            needs: vec![var],
            targets: vec![target],
            build: Rc::new(move |k: &Knowledge| sigma_bit(k[&var] as u8)),
        },
    }
}

/// Fixed-form R for a set index received at run time.
fn r_gate(party: Party, name: &str, var: VarId, targets: Vec<QubitLabel>, n_qubits: usize) -> Step {
    Step::Gate {
        party,
        gate: StepGate::Dependent {
            name: name.to_string(),
            needs: vec![var],
            targets,
            build: Rc::new(move |k: &Knowledge| {
                let x = k[&var];
                build_r(&SetIndex::new(x, n_qubits).expect("selector validated before delivery"))
            }),
        },
    }
}

fn chain(parts: Vec<StateVector>) -> Result<StateVector, Error> {
    let mut iter = parts.into_iter();
    let mut acc = iter.next().expect("at least one register part");
    for part in iter {
        acc = qstate::tensor(&acc, &part)?;
    }
    Ok(acc)
}

/// Build the executable program for a validated configuration. `fallback`
/// selects the derived operator placement in the two-sender N-qubit family
/// and is ignored by the others.
pub(super) fn build_program(config: &ProtocolConfig, fallback: bool) -> Result<Program, Error> {
    match config.family {
        Family::Controlled1q => controlled_1q(config),
        Family::Combined1q => combined_1q(config),
        Family::ControlledNq => controlled_nq(config),
        Family::CombinedNq => combined_nq(config, fallback),
    }
}

fn controlled_1q(config: &ProtocolConfig) -> Result<Program, Error> {
    let (ctrl, sender, recv) = controlled_1q_roles(&config.roles);
    let lc = own_label(ctrl);
    let ls = own_label(sender);
    let lr = own_label(recv);
    let y = QubitLabel::y(1);
    let d = (config.op1.x - 1) as u8;
    let u = [config.op1.phases[0], config.op1.phases[1]];
    let variant = config.variant;

    let ghz = qstate::make_ghz([QubitLabel::a(1), QubitLabel::b(1), QubitLabel::c(1)])?;
    let xi = super::unknown_state(config)?;
    let initial = chain(vec![ghz, xi])?;

    let mut owners = HashMap::new();
    owners.insert(QubitLabel::a(1), Party::Alice);
    owners.insert(QubitLabel::b(1), Party::Bob);
    owners.insert(QubitLabel::c(1), Party::Charlie);
    owners.insert(y, recv);

    let mut knowledge: HashMap<Party, Knowledge> = HashMap::new();
    knowledge.entry(sender).or_default().insert(VarId::X1, u64::from(d));

    let c_var = VarId::Bit(lc);
    let password_to = if variant == 1 { sender } else { recv };
    let password_step = || Step::Send {
        from: ctrl,
        to: password_to,
        tag: "password".to_string(),
        items: vec![MsgItem::Bit(c_var)],
        withheld: config.sabotage == Sabotage::WithholdPassword,
    };

    let mut steps = Vec::new();
    // Startup: the controller rotates its share and measures the password bit.
    if config.sabotage == Sabotage::OmitStartup {
        steps.push(Step::Note("sabotage: startup basis rotation omitted".to_string()));
    } else {
        steps.push(gate_fixed(ctrl, "H", hadamard(), vec![lc]));
    }
    steps.push(Step::Measure { party: ctrl, label: lc });
    if variant != 4 {
        steps.push(password_step());
    }
    if variant == 2 {
        steps.push(phase_dep(recv, lr, c_var, "r(c)"));
    }
    // Preparation: the receiver entangles its share with the unknown qubit.
    steps.push(gate_fixed(recv, "cnot", cnot_target_first(), vec![lr, y]));
    steps.push(Step::Measure { party: recv, label: lr });
    steps.push(Step::Send {
        from: recv,
        to: sender,
        tag: "preparation outcome".to_string(),
        items: vec![MsgItem::Bit(VarId::Bit(lr))],
        withheld: false,
    });
    if variant == 1 {
        steps.push(phase_dep(sender, ls, c_var, "r(c)"));
    }
    // Sending: flip correction, the operation itself, basis rotation.
    steps.push(sigma_dep(sender, ls, VarId::Bit(lr), "sigma(b)"));
    steps.push(gate_fixed(sender, "U(d,u)", one_qubit_u(d, u)?, vec![ls]));
    steps.push(gate_fixed(sender, "H", hadamard(), vec![ls]));
    steps.push(Step::Measure { party: sender, label: ls });
    steps.push(Step::Send {
        from: sender,
        to: recv,
        tag: "sending outcome and selector".to_string(),
        items: vec![MsgItem::Bit(VarId::Bit(ls)), MsgItem::Bit(VarId::X1)],
        withheld: false,
    });
    if variant == 3 {
        steps.push(phase_dep(recv, lr, c_var, "r(c)"));
        steps.push(phase_dep(recv, y, c_var, "r(c)"));
    }
    // Recovery on the unknown qubit.
    steps.push(sigma_dep(recv, y, VarId::X1, "sigma(d)"));
    steps.push(phase_dep(recv, y, VarId::Bit(ls), "r(a)"));
    if variant == 4 {
        steps.push(password_step());
        steps.push(phase_dep(recv, lr, c_var, "r(c)"));
        steps.push(Step::Gate {
            party: recv,
            gate: StepGate::Dependent {
                name: "R(x) r(c) R(x)+".to_string(),
                needs: vec![c_var, VarId::X1],
                targets: vec![y],
                build: Rc::new(move |k: &Knowledge| {
                    let flip = sigma_bit(k[&VarId::X1] as u8);
                    flip.mul(&phase_r(k[&c_var] as u8)).mul(&flip.dagger())
                }),
            },
        });
    }
    Ok(Program { initial, steps, owners, knowledge })
}

fn combined_1q(config: &ProtocolConfig) -> Result<Program, Error> {
    let (s1, s2, recv) = combined_1q_roles(&config.roles);
    let l1 = own_label(s1);
    let l2 = own_label(s2);
    let lr = own_label(recv);
    let y = QubitLabel::y(1);
    let op2 = config.op2.as_ref().expect("validated: two-sender family");
    let d1 = (config.op1.x - 1) as u8;
    let d2 = (op2.x - 1) as u8;
    let u = [config.op1.phases[0], config.op1.phases[1]];
    let v = [op2.phases[0], op2.phases[1]];

    let ghz = qstate::make_ghz([QubitLabel::a(1), QubitLabel::b(1), QubitLabel::c(1)])?;
    let xi = super::unknown_state(config)?;
    let initial = chain(vec![ghz, xi])?;

    let mut owners = HashMap::new();
    owners.insert(QubitLabel::a(1), Party::Alice);
    owners.insert(QubitLabel::b(1), Party::Bob);
    owners.insert(QubitLabel::c(1), Party::Charlie);
    owners.insert(y, recv);

    let mut knowledge: HashMap<Party, Knowledge> = HashMap::new();
    knowledge.entry(s1).or_default().insert(VarId::X1, u64::from(d1));
    knowledge.entry(s2).or_default().insert(VarId::X2, u64::from(d2));

    let mut steps = Vec::new();
    // Preparation by the receiver.
    steps.push(gate_fixed(recv, "cnot", cnot_target_first(), vec![lr, y]));
    steps.push(Step::Measure { party: recv, label: lr });
    for to in [s1, s2] {
        steps.push(Step::Send {
            from: recv,
            to,
            tag: "preparation outcome".to_string(),
            items: vec![MsgItem::Bit(VarId::Bit(lr))],
            withheld: false,
        });
    }
    // First sender.
    steps.push(sigma_dep(s1, l1, VarId::Bit(lr), "sigma(c)"));
    steps.push(gate_fixed(s1, "U(d1,u)", one_qubit_u(d1, u)?, vec![l1]));
    steps.push(gate_fixed(s1, "H", hadamard(), vec![l1]));
    steps.push(Step::Measure { party: s1, label: l1 });
    steps.push(Step::Send {
        from: s1,
        to: s2,
        tag: "selector handoff".to_string(),
        items: vec![MsgItem::Bit(VarId::X1)],
        withheld: false,
    });
    steps.push(Step::Send {
        from: s1,
        to: recv,
        tag: "sending outcome and selector".to_string(),
        items: vec![MsgItem::Bit(VarId::Bit(l1)), MsgItem::Bit(VarId::X1)],
        withheld: false,
    });
    // Second sender; the flip corrections compose right to left.
    steps.push(sigma_dep(s2, l2, VarId::Bit(lr), "sigma(c)"));
    steps.push(sigma_dep(s2, l2, VarId::X1, "sigma(d1)"));
    steps.push(gate_fixed(s2, "U(d2,v)", one_qubit_u(d2, v)?, vec![l2]));
    steps.push(gate_fixed(s2, "H", hadamard(), vec![l2]));
    steps.push(Step::Measure { party: s2, label: l2 });
    steps.push(Step::Send {
        from: s2,
        to: recv,
        tag: "sending outcome and selector".to_string(),
        items: vec![MsgItem::Bit(VarId::Bit(l2)), MsgItem::Bit(VarId::X2)],
        withheld: false,
    });
    // Recovery on the unknown qubit, first sender's pair first.
    steps.push(sigma_dep(recv, y, VarId::X1, "sigma(d1)"));
    steps.push(phase_dep(recv, y, VarId::Bit(l1), "r(a)"));
    steps.push(sigma_dep(recv, y, VarId::X2, "sigma(d2)"));
    steps.push(phase_dep(recv, y, VarId::Bit(l2), "r(b)"));
    Ok(Program { initial, steps, owners, knowledge })
}

fn controlled_nq(config: &ProtocolConfig) -> Result<Program, Error> {
    let n_q = config.n_qubits;
    let n_c = config.controllers;
    let index = SetIndex::new(config.op1.x, n_q)?;
    let t_matrix = build_t(&index, &config.op1.phases)?.matrix();
    let variant = config.variant;

    let a_l: Vec<QubitLabel> = (1..=n_q).map(|m| QubitLabel::a(m as u8)).collect();
    let b_l: Vec<QubitLabel> = (1..=n_q).map(|m| QubitLabel::b(m as u8)).collect();
    let c_l: Vec<QubitLabel> = (1..=n_c).map(|m| QubitLabel::c(m as u8)).collect();
    let y_l: Vec<QubitLabel> = (1..=n_q).map(|m| QubitLabel::y(m as u8)).collect();

    let mut parts = Vec::new();
    for m in 0..n_c {
        parts.push(qstate::make_ghz([a_l[m], b_l[m], c_l[m]])?);
    }
    for s in n_c..n_q {
        parts.push(qstate::make_bell([a_l[s], b_l[s]])?);
    }
    parts.push(super::unknown_state(config)?);
    let initial = chain(parts)?;

    let mut owners = HashMap::new();
    for &l in &a_l {
        owners.insert(l, Party::Alice);
    }
    for &l in &b_l {
        owners.insert(l, Party::Bob);
    }
    for &l in &c_l {
        owners.insert(l, Party::Charlie);
    }
    for &l in &y_l {
        owners.insert(l, Party::Bob);
    }

    let mut knowledge: HashMap<Party, Knowledge> = HashMap::new();
    knowledge.entry(Party::Alice).or_default().insert(VarId::X1, config.op1.x);

    let password_to = if variant == 1 { Party::Alice } else { Party::Bob };
    let password_items: Vec<MsgItem> =
        c_l.iter().map(|&l| MsgItem::Bit(VarId::Bit(l))).collect();
    let password_step = || Step::Send {
        from: Party::Charlie,
        to: password_to,
        tag: "password".to_string(),
        items: password_items.clone(),
        withheld: config.sabotage == Sabotage::WithholdPassword,
    };

    let mut steps = Vec::new();
    // Startup across the controller bank.
    if n_c > 0 {
        if config.sabotage == Sabotage::OmitStartup {
            steps.push(Step::Note("sabotage: startup basis rotation omitted".to_string()));
        } else {
            for &l in &c_l {
                steps.push(gate_fixed(Party::Charlie, "H", hadamard(), vec![l]));
            }
        }
        for &l in &c_l {
            steps.push(Step::Measure { party: Party::Charlie, label: l });
        }
        if variant != 4 {
            steps.push(password_step());
        }
    }
    if variant == 2 {
        for m in 0..n_c {
            steps.push(phase_dep(Party::Bob, b_l[m], VarId::Bit(c_l[m]), "r(c)"));
        }
    }
    // Preparation: entangle each pair qubit with its unknown qubit.
    for m in 0..n_q {
        steps.push(gate_fixed(Party::Bob, "cnot", cnot_target_first(), vec![b_l[m], y_l[m]]));
        steps.push(Step::Measure { party: Party::Bob, label: b_l[m] });
    }
    steps.push(Step::Send {
        from: Party::Bob,
        to: Party::Alice,
        tag: "preparation outcomes".to_string(),
        items: b_l.iter().map(|&l| MsgItem::Bit(VarId::Bit(l))).collect(),
        withheld: false,
    });
    if variant == 1 {
        for m in 0..n_c {
            steps.push(phase_dep(Party::Alice, a_l[m], VarId::Bit(c_l[m]), "r(c)"));
        }
    }
    // Sending: flip corrections, the operation, basis rotations.
    for m in 0..n_q {
        steps.push(sigma_dep(Party::Alice, a_l[m], VarId::Bit(b_l[m]), "sigma(b)"));
    }
    steps.push(gate_fixed(Party::Alice, "T(x,u)", t_matrix, a_l.clone()));
    for &l in &a_l {
        steps.push(gate_fixed(Party::Alice, "H", hadamard(), vec![l]));
    }
    for &l in &a_l {
        steps.push(Step::Measure { party: Party::Alice, label: l });
    }
    let mut send_items: Vec<MsgItem> = a_l.iter().map(|&l| MsgItem::Bit(VarId::Bit(l))).collect();
    send_items.push(MsgItem::Index { var: VarId::X1, n_qubits: n_q });
    steps.push(Step::Send {
        from: Party::Alice,
        to: Party::Bob,
        tag: "sending outcomes and set index".to_string(),
        items: send_items,
        withheld: false,
    });
    if variant == 3 {
        for m in 0..n_c {
            steps.push(phase_dep(Party::Bob, b_l[m], VarId::Bit(c_l[m]), "r(c)"));
            steps.push(phase_dep(Party::Bob, y_l[m], VarId::Bit(c_l[m]), "r(c)"));
        }
    }
    // Recovery on the unknown block.
    steps.push(r_gate(Party::Bob, "R(x)", VarId::X1, y_l.clone(), n_q));
    for m in 0..n_q {
        steps.push(phase_dep(Party::Bob, y_l[m], VarId::Bit(a_l[m]), "r(a)"));
    }
    if variant == 4 && n_c > 0 {
        steps.push(password_step());
        for m in 0..n_c {
            steps.push(phase_dep(Party::Bob, b_l[m], VarId::Bit(c_l[m]), "r(c)"));
        }
        let mut needs = vec![VarId::X1];
        needs.extend(c_l.iter().map(|&l| VarId::Bit(l)));
        let c_vars: Vec<VarId> = c_l.iter().map(|&l| VarId::Bit(l)).collect();
        steps.push(Step::Gate {
            party: Party::Bob,
            gate: StepGate::Dependent {
                name: "R(x) password phases R(x)+".to_string(),
                needs,
                targets: y_l.clone(),
                build: Rc::new(move |k: &Knowledge| {
                    let x = k[&VarId::X1];
                    let r = build_r(
                        &SetIndex::new(x, n_q).expect("selector validated before delivery"),
                    );
                    let factors: Vec<CMat> = (0..n_q)
                        .map(|m| {
                            if m < c_vars.len() {
                                phase_r(k[&c_vars[m]] as u8)
                            } else {
                                CMat::identity(2)
                            }
                        })
                        .collect();
                    r.mul(&kron_all(&factors)).mul(&r.dagger())
                }),
            },
        });
    }
    Ok(Program { initial, steps, owners, knowledge })
}

fn combined_nq(config: &ProtocolConfig, fallback: bool) -> Result<Program, Error> {
    let n_q = config.n_qubits;
    let op2 = config.op2.as_ref().expect("validated: two-sender family");
    let t1 = build_t(&SetIndex::new(config.op1.x, n_q)?, &config.op1.phases)?.matrix();
    let t2 = build_t(&SetIndex::new(op2.x, n_q)?, &op2.phases)?.matrix();

    let a_l: Vec<QubitLabel> = (1..=n_q).map(|m| QubitLabel::a(m as u8)).collect();
    let b_l: Vec<QubitLabel> = (1..=n_q).map(|m| QubitLabel::b(m as u8)).collect();
    let c_l: Vec<QubitLabel> = (1..=n_q).map(|m| QubitLabel::c(m as u8)).collect();
    let y_l: Vec<QubitLabel> = (1..=n_q).map(|m| QubitLabel::y(m as u8)).collect();

    let mut parts = Vec::new();
    for m in 0..n_q {
        parts.push(qstate::make_ghz([a_l[m], b_l[m], c_l[m]])?);
    }
    parts.push(super::unknown_state(config)?);
    let initial = chain(parts)?;

    let mut owners = HashMap::new();
    for &l in &a_l {
        owners.insert(l, Party::Alice);
    }
    for &l in &b_l {
        owners.insert(l, Party::Bob);
    }
    for &l in &c_l {
        owners.insert(l, Party::Charlie);
    }
    for &l in &y_l {
        owners.insert(l, Party::Bob);
    }

    let mut knowledge: HashMap<Party, Knowledge> = HashMap::new();
    knowledge.entry(Party::Alice).or_default().insert(VarId::X1, config.op1.x);
    knowledge.entry(Party::Charlie).or_default().insert(VarId::X2, op2.x);

    let mut steps = Vec::new();
    // Preparation by the receiver.
    for m in 0..n_q {
        steps.push(gate_fixed(Party::Bob, "cnot", cnot_target_first(), vec![b_l[m], y_l[m]]));
        steps.push(Step::Measure { party: Party::Bob, label: b_l[m] });
    }
    for to in [Party::Alice, Party::Charlie] {
        steps.push(Step::Send {
            from: Party::Bob,
            to,
            tag: "preparation outcomes".to_string(),
            items: b_l.iter().map(|&l| MsgItem::Bit(VarId::Bit(l))).collect(),
            withheld: false,
        });
    }
    // First sender.
    for m in 0..n_q {
        steps.push(sigma_dep(Party::Alice, a_l[m], VarId::Bit(b_l[m]), "sigma(b)"));
    }
    steps.push(gate_fixed(Party::Alice, "T(x,u)", t1, a_l.clone()));
    for &l in &a_l {
        steps.push(gate_fixed(Party::Alice, "H", hadamard(), vec![l]));
    }
    for &l in &a_l {
        steps.push(Step::Measure { party: Party::Alice, label: l });
    }
    let mut to_bob: Vec<MsgItem> = a_l.iter().map(|&l| MsgItem::Bit(VarId::Bit(l))).collect();
    to_bob.push(MsgItem::Index { var: VarId::X1, n_qubits: n_q });
    steps.push(Step::Send {
        from: Party::Alice,
        to: Party::Bob,
        tag: "sending outcomes and set index".to_string(),
        items: to_bob,
        withheld: false,
    });
    steps.push(Step::Send {
        from: Party::Alice,
        to: Party::Charlie,
        tag: "set index".to_string(),
        items: vec![MsgItem::Index { var: VarId::X1, n_qubits: n_q }],
        withheld: false,
    });
    // Second sender; with the derived placement the flip corrections move
    // here from the receiver's recovery.
    if fallback {
        for m in 0..n_q {
            steps.push(sigma_dep(Party::Charlie, c_l[m], VarId::Bit(b_l[m]), "sigma(b)"));
        }
    }
    steps.push(r_gate(Party::Charlie, "R(x)", VarId::X1, c_l.clone(), n_q));
    steps.push(gate_fixed(Party::Charlie, "T(y,v)", t2, c_l.clone()));
    for &l in &c_l {
        steps.push(gate_fixed(Party::Charlie, "H", hadamard(), vec![l]));
    }
    for &l in &c_l {
        steps.push(Step::Measure { party: Party::Charlie, label: l });
    }
    let mut charlie_to_bob: Vec<MsgItem> =
        c_l.iter().map(|&l| MsgItem::Bit(VarId::Bit(l))).collect();
    charlie_to_bob.push(MsgItem::Index { var: VarId::X2, n_qubits: n_q });
    steps.push(Step::Send {
        from: Party::Charlie,
        to: Party::Bob,
        tag: "sending outcomes and set index".to_string(),
        items: charlie_to_bob,
        withheld: false,
    });
    // Recovery on the unknown block.
    if !fallback {
        for m in 0..n_q {
            steps.push(sigma_dep(Party::Bob, y_l[m], VarId::Bit(b_l[m]), "sigma(b)"));
        }
    }
    steps.push(r_gate(Party::Bob, "R(x)", VarId::X1, y_l.clone(), n_q));
    for m in 0..n_q {
        steps.push(phase_dep(Party::Bob, y_l[m], VarId::Bit(a_l[m]), "r(a)"));
    }
    steps.push(r_gate(Party::Bob, "R(y)", VarId::X2, y_l.clone(), n_q));
    for m in 0..n_q {
        steps.push(phase_dep(Party::Bob, y_l[m], VarId::Bit(c_l[m]), "r(c)"));
    }
    Ok(Program { initial, steps, owners, knowledge })
}
