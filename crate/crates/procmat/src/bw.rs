//! The explicit realisation of the Araújo–Feix process via its
//! Baumeler–Wolf unitary extension: the four circuit operations of the
//! temporal circuit (with the γ ancilla wire carried from the first to the
//! last operation), the exact no-influence factorization with respect to
//! the third party, and the quantum-controlled-order components of the
//! reduced process.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::circuit::{
    wires, CircuitError, FragmentSplit, Gate, QcqcComponents, QcqcDecomposer, TemporalCircuit,
};
use crate::delocal::{DelocalError, Factorization};
use crate::causality::{Correlation, Q};
use crate::process::catalog;
use crate::tensor::{
    identity_dket, pure_choi, LabeledTensor, SystemLabel, TensorError, UnitaryBlock, C64,
};

#[derive(Debug, Error)]
pub enum BwError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Delocal(#[from] DelocalError),
    #[error("party systems must be qubits; `{0}` has dimension {1}")]
    NonQubitSystem(String, usize),
    #[error("the third party's ancillas must have equal dimensions, got {0} and {1}")]
    AncillaMismatch(usize, usize),
    #[error("classical route failed: {0}")]
    NotClassicalCircuit(String),
}

type Result<T> = std::result::Result<T, BwError>;

fn q(name: &str) -> SystemLabel {
    SystemLabel::qubit(name)
}

/// γ carries the third party's incoming ancilla; its dimension.
fn gamma_dim(u_c: &UnitaryBlock) -> Result<usize> {
    let d_in: usize = u_c
        .in_labels
        .iter()
        .filter(|l| l.name != "C_I")
        .map(|l| l.dim)
        .product();
    let d_out: usize = u_c
        .out_labels
        .iter()
        .filter(|l| l.name != "C_O")
        .map(|l| l.dim)
        .product();
    if d_in != d_out {
        return Err(BwError::AncillaMismatch(d_in, d_out));
    }
    for l in u_c.in_labels.iter().chain(u_c.out_labels.iter()) {
        if (l.name == "C_I" || l.name == "C_O") && l.dim != 2 {
            return Err(BwError::NonQubitSystem(l.name.clone(), l.dim));
        }
    }
    Ok(d_in)
}

/// Pure Choi of U_C with canonical leg names (C_I, C_I') → (C_O, C_O'),
/// adjoining a trivial ancilla when absent.
fn uc_choi(u_c: &UnitaryBlock) -> Result<(LabeledTensor, usize)> {
    let dg = gamma_dim(u_c)?;
    let mut block = u_c.clone();
    if block.in_labels.len() == 1 {
        block = block.kron(&UnitaryBlock::wire(
            vec![SystemLabel::new("C_I'", 1)],
            vec![SystemLabel::new("C_O'", 1)],
        )?)?;
    }
    let anc_in = block
        .in_labels
        .iter()
        .find(|l| l.name != "C_I")
        .expect("ancilla input")
        .name
        .clone();
    let anc_out = block
        .out_labels
        .iter()
        .find(|l| l.name != "C_O")
        .expect("ancilla output")
        .name
        .clone();
    let block = block.relabel(&[(anc_in.as_str(), "C_I'"), (anc_out.as_str(), "C_O'")])?;
    Ok((pure_choi(&block)?, dg.max(1)))
}

/// Choi of the reversal-and-reapplication map
/// U_C · (X^{C_I} ⊗ 𝟙^{C_I'}) · U_C† : (C_O, C_O') → (C_O#, C_O'#).
fn reversal_choi(uc: &LabeledTensor, dg: usize) -> Result<LabeledTensor> {
    let ucd = crate::tensor::dagger_choi(uc, &["C_I", "C_I'"], &["C_O", "C_O'"])?;
    let x_mid = UnitaryBlock::basis_map(vec![q("C_I")], vec![q("C_I#m")], |i| vec![1 - i[0]])?;
    let wire_anc = identity_dket(
        &SystemLabel::new("C_I'", dg),
        &SystemLabel::new("C_I'#m", dg),
    )?;
    let uc_final = uc.relabel(&[
        ("C_I", "C_I#m"),
        ("C_I'", "C_I'#m"),
        ("C_O", "C_O#"),
        ("C_O'", "C_O'#"),
    ])?;
    Ok(ucd
        .link(&pure_choi(&x_mid)?)?
        .link(&wire_anc)?
        .link(&uc_final)?)
}

/// The four circuit operations of the explicit realisation.
#[derive(Clone, Debug)]
pub struct BwComponents {
    pub omega1: UnitaryBlock,
    pub omega2_circ: UnitaryBlock,
    pub omega2_bullet: UnitaryBlock,
    pub omega3: UnitaryBlock,
    pub gamma: SystemLabel,
}

/// ω₁(U_C): (P₁,P₂,P₃,C_I') → (T̄₁,E₁,Q̄₁,γ). A time-local instance of U_C
/// acts on P₃ and the ancilla; its output qubit becomes the order control,
/// and P₁/P₂ are routed to the target or the circuit ancilla depending on
/// the branch.
pub fn bw_omega1(u_c: &UnitaryBlock) -> Result<UnitaryBlock> {
    let (uc, dg) = uc_choi(u_c)?;
    let gam = SystemLabel::new("gam", dg);
    let mut total: Option<LabeledTensor> = None;
    for branch in 0..2usize {
        let charlie = uc
            .link(&identity_dket(&q("P3"), &q("C_I"))?)?
            .link(&LabeledTensor::basis_ket(q("C_O"), branch)?)?
            .link(&identity_dket(&SystemLabel::new("C_O'", dg), &gam)?)?;
        let (p1_dst, p2_dst) = if branch == 0 {
            (wires::BT1, wires::E1)
        } else {
            (wires::E1, wires::BT1)
        };
        let term = identity_dket(&q("P1"), &q(p1_dst))?
            .tensor(&identity_dket(&q("P2"), &q(p2_dst))?)?
            .tensor(&charlie)?
            .tensor(&LabeledTensor::basis_ket(q(wires::BQ1), branch)?)?;
        total = Some(match total {
            None => term,
            Some(acc) => acc.add(&term)?,
        });
    }
    let t = total.expect("two branches");
    Ok(crate::tensor::choi_to_matrix(
        &t,
        &["P1", "P2", "P3", "C_I'"],
        &[wires::BT1, wires::E1, wires::BQ1, "gam"],
    )?)
}

/// ω₂° : (T̄₁', E₁) → (T̄₂, E₂); independent of U_C for this process.
pub fn bw_omega2_circ() -> UnitaryBlock {
    UnitaryBlock::basis_map(
        vec![q(wires::BT1P), q(wires::E1)],
        vec![q(wires::BT2), q(wires::E2)],
        |i| vec![i[1] ^ i[0], i[0]],
    )
    .expect("shape consistent")
}

/// ω₂• : (T̄₁', E₁) → (T̄₂, E₂).
pub fn bw_omega2_bullet() -> UnitaryBlock {
    UnitaryBlock::basis_map(
        vec![q(wires::BT1P), q(wires::E1)],
        vec![q(wires::BT2), q(wires::E2)],
        |i| vec![i[1] ^ i[0] ^ 1, i[0]],
    )
    .expect("shape consistent")
}

/// ω₃(U_C): (T̄₂',E₂,Q̄₂',γ) → (F₁,F₂,F₃,C_O'). Six input patterns are
/// wired straight to the future with γ released as the party's outgoing
/// ancilla; on the two remaining patterns a reversal and reapplication of
/// U_C occurs, with a NOT in between.
pub fn bw_omega3(u_c: &UnitaryBlock) -> Result<UnitaryBlock> {
    let (uc, dg) = uc_choi(u_c)?;
    let gam = SystemLabel::new("gam", dg);
    let rev = reversal_choi(&uc, dg)?;
    let mut total: Option<LabeledTensor> = None;
    let add = |t: LabeledTensor, total: &mut Option<LabeledTensor>| -> Result<()> {
        *total = Some(match total.take() {
            None => t,
            Some(acc) => acc.add(&t)?,
        });
        Ok(())
    };
    // wired patterns (T̄₂', E₂, Q̄₂') → (F₁,F₂,F₃)
    for (t2, e2, q2, f) in [
        (0, 0, 0, [0, 0, 0]),
        (0, 0, 1, [0, 0, 1]),
        (0, 1, 0, [1, 0, 0]),
        (1, 0, 1, [1, 0, 1]),
        (1, 1, 0, [1, 1, 0]),
        (1, 1, 1, [1, 1, 1]),
    ] {
        let term = LabeledTensor::basis_ket(q(wires::BT2P), t2)?
            .tensor(&LabeledTensor::basis_ket(q(wires::E2), e2)?)?
            .tensor(&LabeledTensor::basis_ket(q(wires::BQ2P), q2)?)?
            .tensor(&LabeledTensor::basis_ket(q("F1"), f[0])?)?
            .tensor(&LabeledTensor::basis_ket(q("F2"), f[1])?)?
            .tensor(&LabeledTensor::basis_ket(q("F3"), f[2])?)?
            .tensor(&identity_dket(&gam, &SystemLabel::new("C_O'", dg))?)?;
        add(term, &mut total)?;
    }
    // reversal patterns: ⟨(1,0,0)| with C_O closed on |0⟩ and ⟨(0,1,1)|
    // with C_O closed on |1⟩, both emitting F₁F₂ = 01
    for (t2, e2, q2, c_in) in [(1, 0, 0, 0), (0, 1, 1, 1)] {
        let reapplied = rev
            .link(&LabeledTensor::basis_ket(q("C_O"), c_in)?)?
            .relabel(&[("C_O'", "gam_in"), ("C_O#", "F3"), ("C_O'#", "C_O'")])?
            .relabel(&[("gam_in", "gam")])?;
        let term = LabeledTensor::basis_ket(q(wires::BT2P), t2)?
            .tensor(&LabeledTensor::basis_ket(q(wires::E2), e2)?)?
            .tensor(&LabeledTensor::basis_ket(q(wires::BQ2P), q2)?)?
            .tensor(&LabeledTensor::basis_ket(q("F1"), 0)?)?
            .tensor(&LabeledTensor::basis_ket(q("F2"), 1)?)?
            .tensor(&reapplied)?;
        add(term, &mut total)?;
    }
    let t = total.expect("eight patterns");
    Ok(crate::tensor::choi_to_matrix(
        &t,
        &[wires::BT2P, wires::E2, wires::BQ2P, "gam"],
        &["F1", "F2", "F3", "C_O'"],
    )?)
}

pub fn bw_components(u_c: &UnitaryBlock) -> Result<BwComponents> {
    let (_, dg) = uc_choi(u_c)?;
    Ok(BwComponents {
        omega1: bw_omega1(u_c)?,
        omega2_circ: bw_omega2_circ(),
        omega2_bullet: bw_omega2_bullet(),
        omega3: bw_omega3(u_c)?,
        gamma: SystemLabel::new("gam", dg),
    })
}

/// The explicit temporal circuit realising the process with local unitaries
/// `u_a`, `u_b`, `u_c` (each on its qubit system plus an optional ancilla).
/// Returns the circuit together with its red/blue fragment split; the blue
/// fragment consists of the six identity channels relating barred and
/// unbarred wires.
pub fn build_bw_circuit(
    u_a: &UnitaryBlock,
    u_b: &UnitaryBlock,
    u_c: &UnitaryBlock,
) -> Result<(TemporalCircuit, FragmentSplit)> {
    for (u, sys) in [(u_a, "A"), (u_b, "B")] {
        for l in u.in_labels.iter().chain(u.out_labels.iter()) {
            if (l.name == format!("{sys}_I") || l.name == format!("{sys}_O")) && l.dim != 2 {
                return Err(BwError::NonQubitSystem(l.name.clone(), l.dim));
            }
        }
    }
    let comp = bw_components(u_c)?;
    let u_a = ensure_ancilla(u_a, "A")?;
    let u_b = ensure_ancilla(u_b, "B")?;
    let (a_anc_in, a_anc_out) = anc_names(&u_a, "A");
    let (b_anc_in, b_anc_out) = anc_names(&u_b, "B");
    let d_alpha = u_a.in_dim() / 2;
    let d_beta = u_b.in_dim() / 2;
    let lab = |n: &str, d: usize| SystemLabel::new(n, d);

    let branch_a1 = u_a
        .relabel(&[
            ("A_I", wires::T1),
            ("A_O", wires::T1P),
            (a_anc_out.as_str(), wires::ALPHA),
        ])?
        .kron(&UnitaryBlock::wire(
            vec![lab(b_anc_in.as_str(), d_beta)],
            vec![lab(wires::BETA, d_beta)],
        )?)?;
    let branch_b1 = u_b
        .relabel(&[
            ("B_I", wires::T1),
            ("B_O", wires::T1P),
            (b_anc_out.as_str(), wires::BETA),
        ])?
        .kron(&UnitaryBlock::wire(
            vec![lab(a_anc_in.as_str(), d_alpha)],
            vec![lab(wires::ALPHA, d_alpha)],
        )?)?;
    let branch_b2 = u_b
        .relabel(&[
            ("B_I", wires::T2),
            ("B_O", wires::T2P),
            (b_anc_in.as_str(), wires::BETA),
        ])?
        .kron(&UnitaryBlock::wire(
            vec![lab(wires::ALPHA, d_alpha)],
            vec![lab(a_anc_out.as_str(), d_alpha)],
        )?)?;
    let branch_a2 = u_a
        .relabel(&[
            ("A_I", wires::T2),
            ("A_O", wires::T2P),
            (a_anc_in.as_str(), wires::ALPHA),
        ])?
        .kron(&UnitaryBlock::wire(
            vec![lab(wires::BETA, d_beta)],
            vec![lab(b_anc_out.as_str(), d_beta)],
        )?)?;

    let gates = vec![
        Gate::Unitary(comp.omega1.clone()),                               // red
        Gate::Unitary(UnitaryBlock::wire(vec![q(wires::BT1)], vec![q(wires::T1)])?), // blue
        Gate::Unitary(UnitaryBlock::wire(vec![q(wires::BQ1)], vec![q(wires::Q1)])?), // blue
        Gate::ControlledPair {
            branch0: branch_a1,
            branch1: branch_b1,
            control_in: q(wires::Q1),
            control_out: q(wires::Q1P),
        }, // red
        Gate::Unitary(UnitaryBlock::wire(vec![q(wires::T1P)], vec![q(wires::BT1P)])?), // blue
        Gate::ControlledPair {
            branch0: comp.omega2_circ.clone(),
            branch1: comp.omega2_bullet.clone(),
            control_in: q(wires::Q1P),
            control_out: q(wires::Q2),
        }, // red
        Gate::Unitary(UnitaryBlock::wire(vec![q(wires::BT2)], vec![q(wires::T2)])?), // blue
        Gate::ControlledPair {
            branch0: branch_b2,
            branch1: branch_a2,
            control_in: q(wires::Q2),
            control_out: q(wires::Q2P),
        }, // red
        Gate::Unitary(UnitaryBlock::wire(vec![q(wires::T2P)], vec![q(wires::BT2P)])?), // blue
        Gate::Unitary(UnitaryBlock::wire(vec![q(wires::Q2P)], vec![q(wires::BQ2P)])?), // blue
        Gate::Unitary(comp.omega3.clone()),                               // red
    ];
    let blue = vec![1, 2, 4, 6, 8, 9];
    let circuit = TemporalCircuit::infer(gates)?;
    let split = FragmentSplit::from_blue(circuit.gates.len(), &blue);
    Ok((circuit, split))
}

fn ensure_ancilla(u: &UnitaryBlock, party: &str) -> Result<UnitaryBlock> {
    let sys_in = format!("{party}_I");
    if u.in_labels.iter().any(|l| l.name != sys_in) {
        return Ok(u.clone());
    }
    Ok(u.kron(&UnitaryBlock::wire(
        vec![SystemLabel::new(format!("{party}_I'"), 1)],
        vec![SystemLabel::new(format!("{party}_O'"), 1)],
    )?)?)
}

fn anc_names(u: &UnitaryBlock, party: &str) -> (String, String) {
    let sys_in = format!("{party}_I");
    let sys_out = format!("{party}_O");
    let a_in = u
        .in_labels
        .iter()
        .find(|l| l.name != sys_in)
        .expect("ancilla in")
        .name
        .clone();
    let a_out = u
        .out_labels
        .iter()
        .find(|l| l.name != sys_out)
        .expect("ancilla out")
        .name
        .clone();
    (a_in, a_out)
}

/// The exact factorization of the process unitary with respect to the
/// third party: U₁ routes (P₁,P₂,A_O,B_O) to the 16-dimensional complement
/// Z and computes C_I = P₃ ⊕ ¬A_O∧B_O, and U₂ reads C_O together with Z̄
/// back into the remaining inputs and the future.
pub fn bw_factorization() -> Factorization {
    let z = SystemLabel::new("Z", 16);
    let zbar = SystemLabel::new("bZ", 16);
    let u1 = UnitaryBlock::basis_map(
        vec![q("P1"), q("P2"), q("P3"), q("A_O"), q("B_O")],
        vec![q("C_I"), z.clone()],
        |idx| {
            let (p1, p2, p3, a, b) = (idx[0], idx[1], idx[2], idx[3], idx[4]);
            vec![p3 ^ ((1 - a) & b), ((p1 * 2 + p2) * 2 + a) * 2 + b]
        },
    )
    .expect("shape consistent");
    let u2 = UnitaryBlock::basis_map(
        vec![q("C_O"), zbar.clone()],
        vec![q("A_I"), q("B_I"), q("F1"), q("F2"), q("F3")],
        |idx| {
            let c = idx[0];
            let (p1, p2, a, b) = (idx[1] >> 3 & 1, idx[1] >> 2 & 1, idx[1] >> 1 & 1, idx[1] & 1);
            vec![p1 ^ ((1 - b) & c), p2 ^ ((1 - c) & a), a, b, c]
        },
    )
    .expect("shape consistent");
    Factorization {
        party: "C".into(),
        u1,
        u2,
        z,
        zbar,
        reconstruction_residual: 0.0,
    }
}

/// Quantum-controlled-order components of the reduced process
/// |U⟩⟩ ∗ |U_C⟩⟩: the order-side combs are plain wire permutations, with
/// all U_C dependence absorbed into the past and future sector embeddings.
pub struct BwDecomposer;

impl QcqcDecomposer for BwDecomposer {
    fn components(
        &self,
        u_c: &UnitaryBlock,
    ) -> std::result::Result<QcqcComponents, CircuitError> {
        bw_qcqc_components(u_c)
            .map_err(|e| CircuitError::ComponentShape(format!("{e}")))
    }
}

pub fn bw_qcqc_components(u_c: &UnitaryBlock) -> Result<QcqcComponents> {
    let (uc, dg) = uc_choi(u_c)?;
    let d_l = 2 * dg; // ancilla carries one qubit plus γ
    let sec = 4 * dg; // per-sector dimension d·d_λ
    let lab = |n: &str, d: usize| SystemLabel::new(n, d);

    // past embedding: (P₁,P₂,P₃,C_I') → C_O-major sectors of (C_O,P₁,P₂,C_O')
    let uc_block = crate::tensor::choi_to_matrix(&uc, &["C_I", "C_I'"], &["C_O", "C_O'"])?;
    let n_uc = uc_block.in_dim();
    let mut pe = vec![C64::zero(); (8 * dg) * (8 * dg)];
    for p1 in 0..2usize {
        for p2 in 0..2usize {
            for p3 in 0..2usize {
                for ci in 0..dg {
                    let col = ((p1 * 2 + p2) * 2 + p3) * dg + ci;
                    for co in 0..2usize {
                        for cop in 0..dg {
                            let v = uc_block.matrix[(co * dg + cop) * n_uc + (p3 * dg + ci)];
                            if v.is_zero() {
                                continue;
                            }
                            let row = co * sec + ((p1 * 2 + p2) * dg + cop);
                            pe[row * (8 * dg) + col] = v;
                        }
                    }
                }
            }
        }
    }
    let past_embed = UnitaryBlock::new_raw(
        vec![q("P1"), q("P2"), q("P3"), lab("C_I'", dg)],
        vec![lab("Psec", 8 * dg)],
        pe,
    )?;

    // future embedding: sector-canonical (a_O, b_O, γ) per branch to the
    // physical (F₁,F₂,F₃,C_O'); the (a,b) = (0,1) cell passes through the
    // reversal-and-reapplication block
    let rev = reversal_choi(&uc, dg)?;
    let mut fe = vec![C64::zero(); (8 * dg) * (8 * dg)];
    for branch in 0..2usize {
        let reapplied = rev
            .link(&LabeledTensor::basis_ket(q("C_O"), branch)?)?
            .permute(&["C_O'", "C_O#", "C_O'#"])?;
        for a in 0..2usize {
            for b in 0..2usize {
                for g in 0..dg {
                    let col = branch * sec + ((a * 2 + b) * dg + g);
                    if (a, b) != (0, 1) {
                        let row = (((a * 2 + b) * 2 + branch) * dg) + g;
                        fe[row * (8 * dg) + col] = C64::one();
                    } else {
                        // F₁F₂ = 01, (F₃, C_O') from the reapplication of γ
                        for f3 in 0..2usize {
                            for cop in 0..dg {
                                let v = reapplied.amps()
                                    [(g * 2 + f3) * dg + cop];
                                if v.is_zero() {
                                    continue;
                                }
                                let row = ((2 + f3) * dg) + cop;
                                fe[row * (8 * dg) + col] = v;
                            }
                        }
                    }
                }
            }
        }
    }
    let future_embed = UnitaryBlock::new_raw(
        vec![lab("Fsec", 8 * dg)],
        vec![q("F1"), q("F2"), q("F3"), lab("C_O'", dg)],
        fe,
    )?;

    // branch combs: wire permutations on (system qubit, ancilla qubit, γ)
    let pack = |x: usize, e: usize, g: usize| (x * 2 + e) * dg + g;
    let nu1_ab = UnitaryBlock::basis_map(
        vec![lab("Pl", sec)],
        vec![q("A_I"), lab("l1", d_l)],
        move |i| {
            let (p1, p2, g) = unpack3(i[0], dg);
            vec![p1, p2 * dg + g]
        },
    )?;
    let nu2_ab = UnitaryBlock::basis_map(
        vec![q("A_O"), lab("l1", d_l)],
        vec![q("B_I"), lab("l2", d_l)],
        move |i| {
            let (a, (e, g)) = (i[0], (i[1] / dg, i[1] % dg));
            vec![e ^ a, a * dg + g]
        },
    )?;
    let nu3_ab = UnitaryBlock::basis_map(
        vec![q("B_O"), lab("l2", d_l)],
        vec![lab("Fl", sec)],
        move |i| {
            let (b, (a, g)) = (i[0], (i[1] / dg, i[1] % dg));
            vec![pack(a, b, g)]
        },
    )?;
    let nu1_ba = UnitaryBlock::basis_map(
        vec![lab("Pr", sec)],
        vec![q("B_I"), lab("r1", d_l)],
        move |i| {
            let (p1, p2, g) = unpack3(i[0], dg);
            vec![p2, p1 * dg + g]
        },
    )?;
    let nu2_ba = UnitaryBlock::basis_map(
        vec![q("B_O"), lab("r1", d_l)],
        vec![q("A_I"), lab("r2", d_l)],
        move |i| {
            let (b, (e, g)) = (i[0], (i[1] / dg, i[1] % dg));
            vec![e ^ b ^ 1, b * dg + g]
        },
    )?;
    let nu3_ba = UnitaryBlock::basis_map(
        vec![q("A_O"), lab("r2", d_l)],
        vec![lab("Fr", sec)],
        move |i| {
            let (a, (b, g)) = (i[0], (i[1] / dg, i[1] % dg));
            vec![pack(a, b, g)]
        },
    )?;

    QcqcComponents::new(
        2,
        d_l,
        d_l,
        "A",
        "B",
        (nu1_ab, nu2_ab, nu3_ab),
        (nu1_ba, nu2_ba, nu3_ba),
        None,
        past_embed,
        future_embed,
    )
    .map_err(BwError::Circuit)
}

fn unpack3(idx: usize, dg: usize) -> (usize, usize, usize) {
    let g = idx % dg;
    let rest = idx / dg;
    (rest / 2, rest % 2, g)
}

/// |U_BW⟩⟩ ∗ |U_C⟩⟩ computed directly from the catalog process.
pub fn bw_reduced_process(u_c: &UnitaryBlock) -> Result<LabeledTensor> {
    let (uc, _) = uc_choi(u_c)?;
    let u = catalog::make_u_bw().map_err(DelocalError::Process)?;
    Ok(u.tensor().link(&uc)?)
}


/// One nonzero row of a correlation table.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CorrelationRow {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub probability: String,
}

/// Result of the causal-inequality demonstration: the deterministic
/// correlation computed over three independent routes, the inequality
/// value, and the exact polytope-membership verdict.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BwDemoReport {
    pub rows: Vec<CorrelationRow>,
    pub i1_value: String,
    pub i1_violated: bool,
    pub routes_agree: bool,
    pub causal: bool,
    pub nonzero_rows: usize,
    /// worst deviation of the Born-rule route from exact {0,1}
    pub born_route_deviation: f64,
    /// worst deviation of the circuit route from exact {0,1}
    pub circuit_route_deviation: f64,
}

fn exact_bit(p: f64, worst: &mut f64) -> Q {
    let rounded = if p >= 0.5 { 1.0 } else { 0.0 };
    *worst = worst.max((p - rounded).abs());
    if rounded == 1.0 {
        Q::one()
    } else {
        Q::zero()
    }
}

/// The correlation via the generalised Born rule on the process matrix
/// with measure-and-reprepare instruments. All probabilities come out as
/// exact 0/1 floats; the worst deviation is reported.
pub fn born_route_correlation() -> Result<(Correlation, f64)> {
    let w = catalog::make_w_af().map_err(DelocalError::Process)?;
    let mut worst = 0.0f64;
    let mut probs = vec![Q::zero(); 64];
    for i in 0..8usize {
        let digits = [(i >> 2) & 1, (i >> 1) & 1, i & 1];
        let instruments: Vec<crate::process::Instrument> = w
            .parties
            .iter()
            .zip(digits)
            .map(|(p, ix)| crate::process::measure_prepare_instrument(p, ix))
            .collect::<std::result::Result<_, _>>()
            .map_err(DelocalError::Process)?;
        let table = crate::process::born_rule(&w, &instruments, 1e-10)
            .map_err(DelocalError::Process)?;
        for o in 0..8usize {
            let p = table.prob(&[(o >> 2) & 1, (o >> 1) & 1, o & 1]);
            probs[i * 8 + o] = exact_bit(p, &mut worst);
        }
    }
    let c = Correlation::binary(3, probs)
        .map_err(|e| BwError::NotClassicalCircuit(e.to_string()))?;
    Ok((c, worst))
}

/// The correlation from simulating the temporal circuit with the strategy
/// unitaries, preparing |000⟩ on the past and |0⟩ on every incoming
/// ancilla, and reading the outcomes off the outgoing ancillas.
pub fn circuit_route_correlation() -> Result<(Correlation, f64)> {
    let mut worst = 0.0f64;
    let mut probs = vec![Q::zero(); 64];
    for i in 0..8usize {
        let (ia, ib, ic) = ((i >> 2) & 1, (i >> 1) & 1, i & 1);
        let ua = catalog::ci_strategy("A", ia as u8);
        let ub = catalog::ci_strategy("B", ib as u8);
        let uc = catalog::ci_strategy("C", ic as u8);
        let (circuit, _) = build_bw_circuit(&ua, &ub, &uc)?;
        let sim = circuit
            .simulate_choi()
            .map_err(BwError::Circuit)?;
        let mut t = sim.choi;
        for name in ["P1", "P2", "P3"] {
            t = t.link(&LabeledTensor::basis_ket(q(name), 0)?)?;
        }
        for name in ["A_I'", "B_I'", "C_I'"] {
            t = t.link(&LabeledTensor::basis_ket(q(name), 0)?)?;
        }
        // amplitudes over (F₁,F₂,F₃, A_O',B_O',C_O'); outcome marginals
        let t = t.permute(&["F1", "F2", "F3", "A_O'", "B_O'", "C_O'"])?;
        for o in 0..8usize {
            let mut p = 0.0f64;
            for f in 0..8usize {
                p += t.amps()[f * 8 + o].norm_sqr();
            }
            probs[i * 8 + o] = exact_bit(p, &mut worst);
        }
    }
    let c = Correlation::binary(3, probs)
        .map_err(|e| BwError::NotClassicalCircuit(e.to_string()))?;
    Ok((c, worst))
}

/// The correlation from the all-classical route: the circuit is
/// classicalized gate by gate and the exact tables are composed.
pub fn classical_route_correlation() -> Result<Correlation> {
    let mut probs = vec![Q::zero(); 64];
    for i in 0..8usize {
        let (ia, ib, ic) = ((i >> 2) & 1, (i >> 1) & 1, i & 1);
        let ua = catalog::ci_strategy("A", ia as u8);
        let ub = catalog::ci_strategy("B", ib as u8);
        let uc = catalog::ci_strategy("C", ic as u8);
        let (circuit, _) = build_bw_circuit(&ua, &ub, &uc)?;
        let instruments = crate::classical::classicalize(&circuit, 1e-10)
            .map_err(|e| BwError::NotClassicalCircuit(e.to_string()))?;
        let mut composed = crate::classical::compose_circuit(&instruments)
            .map_err(|e| BwError::NotClassicalCircuit(e.to_string()))?;
        // feed the fixed inputs
        for name in ["P1", "P2", "P3", "A_I'", "B_I'", "C_I'"] {
            let point = crate::classical::ClassicalInstrument::deterministic(
                vec![],
                vec![crate::classical::RandomVar::bit(name)],
                |_| vec![0],
            )
            .map_err(|e| BwError::NotClassicalCircuit(e.to_string()))?;
            composed = point
                .link(&composed)
                .map_err(|e| BwError::NotClassicalCircuit(e.to_string()))?;
        }
        for name in ["F1", "F2", "F3"] {
            composed.table = composed
                .table
                .marginalize(name)
                .map_err(|e| BwError::NotClassicalCircuit(e.to_string()))?;
            composed.out_vars.retain(|v| v != name);
        }
        for (assignment, v) in &composed.table.entries {
            // variables remaining: A_O', B_O', C_O' in table order
            let ai = composed.table.var_index("A_O'").expect("outcome var");
            let bi = composed.table.var_index("B_O'").expect("outcome var");
            let ci_ = composed.table.var_index("C_O'").expect("outcome var");
            let o = ((assignment[ai] as usize) * 2 + assignment[bi] as usize) * 2
                + assignment[ci_] as usize;
            probs[i * 8 + o] += v.clone();
        }
    }
    Correlation::binary(3, probs).map_err(|e| BwError::NotClassicalCircuit(e.to_string()))
}

/// The correlation from the displayed classical sum formula with the
/// deterministic channel and per-party strategy tables.
pub fn classical_formula_correlation() -> Result<Correlation> {
    let strategies = [
        crate::classical::ci_strategy_classical("A"),
        crate::classical::ci_strategy_classical("B"),
        crate::classical::ci_strategy_classical("C"),
    ];
    crate::classical::bw_classical_correlation(&strategies)
        .map_err(|e| BwError::NotClassicalCircuit(e.to_string()))
}

/// Compute the correlation over the three routes, assert exact agreement,
/// evaluate the causal inequality and test polytope membership.
pub fn bw_inequality_demo() -> Result<BwDemoReport> {
    let (born, born_dev) = born_route_correlation()?;
    let (circuit, circuit_dev) = circuit_route_correlation()?;
    let classical = classical_route_correlation()?;
    let formula = classical_formula_correlation()?;
    let routes_agree = born == circuit && circuit == classical && classical == formula;
    let i1 = crate::causality::make_i1();
    let value = crate::causality::eval_inequality(&born, &i1)
        .map_err(|e| BwError::NotClassicalCircuit(e.to_string()))?;
    let cert = crate::causality::is_causal(&born)
        .map_err(|e| BwError::NotClassicalCircuit(e.to_string()))?;
    let mut rows = Vec::new();
    for i in 0..8usize {
        for o in 0..8usize {
            let digits_i = vec![(i >> 2) & 1, (i >> 1) & 1, i & 1];
            let digits_o = vec![(o >> 2) & 1, (o >> 1) & 1, o & 1];
            let p = born.prob(&digits_i, &digits_o);
            if !p.is_zero() {
                rows.push(CorrelationRow {
                    inputs: digits_i,
                    outputs: digits_o,
                    probability: p.to_string(),
                });
            }
        }
    }
    let nonzero_rows = rows.len();
    Ok(BwDemoReport {
        rows,
        i1_value: value.to_string(),
        i1_violated: value.is_negative(),
        routes_agree,
        causal: cert.feasible,
        nonzero_rows,
        born_route_deviation: born_dev,
        circuit_route_deviation: circuit_dev,
    })
}
