//! Reference processes: the Araújo–Feix classical noncausal process matrix,
//! its Baumeler–Wolf unitary extension, quantum-switch variants, and the
//! measure-and-reprepare strategies that violate the causal inequality.

use num_traits::{One, Zero};

use super::{PartySpec, ProcessError, ProcessMatrix, ProcessVector};
use crate::tensor::{
    pure_choi, LabeledOperator, LabeledTensor, SystemLabel, UnitaryBlock, C64, DEFAULT_TOL,
};

type Result<T> = std::result::Result<T, ProcessError>;

fn q(name: &str) -> SystemLabel {
    SystemLabel::qubit(name)
}

/// The three parties of the AF/BW process, single qubits each.
pub fn bw_parties() -> Vec<PartySpec> {
    vec![PartySpec::qubit("A"), PartySpec::qubit("B"), PartySpec::qubit("C")]
}

/// W_AF = Σ_{a,b,c} |¬b∧c, ¬c∧a, ¬a∧b⟩⟨…|^{A_I B_I C_I} ⊗ |a,b,c⟩⟨a,b,c|^{A_O B_O C_O};
/// diagonal in the computational basis with eight unit entries.
pub fn make_w_af() -> Result<ProcessMatrix> {
    let labels = vec![
        q("A_I"),
        q("B_I"),
        q("C_I"),
        q("A_O"),
        q("B_O"),
        q("C_O"),
    ];
    let n = 64usize;
    let mut entries = vec![C64::zero(); n * n];
    for a in 0..2usize {
        for b in 0..2usize {
            for c in 0..2usize {
                let a_i = (1 - b) & c;
                let b_i = (1 - c) & a;
                let c_i = (1 - a) & b;
                let idx = ((((a_i * 2 + b_i) * 2 + c_i) * 2 + a) * 2 + b) * 2 + c;
                entries[idx * n + idx] = C64::one();
            }
        }
    }
    let op = LabeledOperator::new(labels.clone(), labels, entries)?;
    ProcessMatrix::new(op, bw_parties())
}

/// The unitary extension of W_AF: the basis-preserving map
/// (p₁,p₂,p₃,a,b,c) ↦ (a,b,c, p₁⊕¬b∧c, p₂⊕¬c∧a, p₃⊕¬a∧b)
/// from P₁P₂P₃ A_O B_O C_O to F₁F₂F₃ A_I B_I C_I.
pub fn bw_block() -> UnitaryBlock {
    UnitaryBlock::basis_map(
        vec![q("P1"), q("P2"), q("P3"), q("A_O"), q("B_O"), q("C_O")],
        vec![q("F1"), q("F2"), q("F3"), q("A_I"), q("B_I"), q("C_I")],
        |idx| {
            let (p1, p2, p3, a, b, c) = (idx[0], idx[1], idx[2], idx[3], idx[4], idx[5]);
            vec![
                a,
                b,
                c,
                p1 ^ ((1 - b) & c),
                p2 ^ ((1 - c) & a),
                p3 ^ ((1 - a) & b),
            ]
        },
    )
    .expect("shape consistent")
}

pub fn make_u_bw() -> Result<ProcessVector> {
    let t = pure_choi(&bw_block())?;
    ProcessVector::new(
        t,
        bw_parties(),
        vec![q("P1"), q("P2"), q("P3")],
        vec![q("F1"), q("F2"), q("F3")],
        DEFAULT_TOL,
    )
}

/// Bipartite quantum switch: past = control ⊗ target, the control selects
/// A≺B or B≺A wiring and is released to the future unchanged.
pub fn make_switch() -> Result<ProcessVector> {
    let block = UnitaryBlock::basis_map(
        vec![q("Pc"), q("Pt"), q("A_O"), q("B_O")],
        vec![q("Fc"), q("Ft"), q("A_I"), q("B_I")],
        |idx| {
            let (ctrl, t, a, b) = (idx[0], idx[1], idx[2], idx[3]);
            if ctrl == 0 {
                vec![0, b, t, a]
            } else {
                vec![1, a, b, t]
            }
        },
    )
    .expect("shape consistent");
    ProcessVector::new(
        pure_choi(&block)?,
        vec![PartySpec::qubit("A"), PartySpec::qubit("B")],
        vec![q("Pc"), q("Pt")],
        vec![q("Fc"), q("Ft")],
        DEFAULT_TOL,
    )
}

/// Tripartite switch variant: the target passes through C first, and C's
/// output qubit coherently controls the order of A and B.
pub fn make_tripartite_switch() -> Result<ProcessVector> {
    let block = UnitaryBlock::basis_map(
        vec![q("Pc"), q("Pt"), q("A_O"), q("B_O"), q("C_O")],
        vec![q("Fc"), q("Ft"), q("A_I"), q("B_I"), q("C_I")],
        |idx| {
            let (pc, pt, a, b, c) = (idx[0], idx[1], idx[2], idx[3], idx[4]);
            if c == 0 {
                vec![0, b, pt, a, pc]
            } else {
                vec![1, a, b, pt, pc]
            }
        },
    )
    .expect("shape consistent");
    ProcessVector::new(
        pure_choi(&block)?,
        vec![
            PartySpec::qubit("A"),
            PartySpec::qubit("B"),
            PartySpec::qubit("C"),
        ],
        vec![q("Pc"), q("Pt")],
        vec![q("Fc"), q("Ft")],
        DEFAULT_TOL,
    )
}

/// Local strategy for the causal-inequality demo, as a unitary on the
/// party system plus one qubit ancilla: the incoming system is forwarded to
/// the outgoing ancilla (the record), and the incoming ancilla—carrying
/// |0⟩—is forwarded to the outgoing system through 𝟙 (i_X = 0) or NOT
/// (i_X = 1).
pub fn ci_strategy(party: &str, i_x: u8) -> UnitaryBlock {
    UnitaryBlock::basis_map(
        vec![q(&format!("{party}_I")), q(&format!("{party}_I'"))],
        vec![q(&format!("{party}_O")), q(&format!("{party}_O'"))],
        move |idx| vec![idx[1] ^ (i_x as usize), idx[0]],
    )
    .expect("shape consistent")
}


/// Quantum-controlled-order components for the tripartite switch composed
/// with a fixed third-party operation: all branch combs are plain wirings,
/// the past embedding applies U_C to (P_c, C_I') and sorts by the control
/// value, and the future embedding is the computational reordering.
pub struct TripartiteSwitchDecomposer;

impl crate::circuit::QcqcDecomposer for TripartiteSwitchDecomposer {
    fn components(
        &self,
        u_c: &UnitaryBlock,
    ) -> std::result::Result<crate::circuit::QcqcComponents, crate::circuit::CircuitError> {
        use crate::circuit::CircuitError;
        let shape_err = |m: &str| CircuitError::ComponentShape(m.to_string());
        let anc_in: Vec<&SystemLabel> = u_c
            .in_labels
            .iter()
            .filter(|l| l.name != "C_I")
            .collect();
        let anc_out: Vec<&SystemLabel> = u_c
            .out_labels
            .iter()
            .filter(|l| l.name != "C_O")
            .collect();
        if anc_in.len() > 1 || anc_out.len() > 1 {
            return Err(shape_err("third-party operation carries too many ancillas"));
        }
        let dg_in: usize = anc_in.iter().map(|l| l.dim).product();
        let dg_out: usize = anc_out.iter().map(|l| l.dim).product();
        if dg_in != dg_out {
            return Err(shape_err("third-party ancilla dimensions differ"));
        }
        let dg = dg_in.max(1);
        let mut u_c = u_c.clone();
        if anc_in.is_empty() {
            let triv = UnitaryBlock::wire(
                vec![SystemLabel::new("C_I'", 1)],
                vec![SystemLabel::new("C_O'", 1)],
            )
            .map_err(CircuitError::Tensor)?;
            u_c = u_c.kron(&triv).map_err(CircuitError::Tensor)?;
        }
        let anc_in_label = u_c
            .in_labels
            .iter()
            .find(|l| l.name != "C_I")
            .cloned()
            .expect("ancilla input present");
        let anc_out_label = u_c
            .out_labels
            .iter()
            .find(|l| l.name != "C_O")
            .cloned()
            .expect("ancilla output present");
        let sec = 2 * dg;

        // past embedding: (Pc, Pt, C_I') → C_O-major sectors of (C_O, Pt, C_O')
        let uc = crate::tensor::choi_to_matrix(
            &pure_choi(&u_c).map_err(CircuitError::Tensor)?,
            &["C_I", anc_in_label.name.as_str()],
            &["C_O", anc_out_label.name.as_str()],
        )
        .map_err(CircuitError::Tensor)?;
        let n_uc = uc.in_dim();
        let total = 4 * dg;
        let mut pe = vec![C64::zero(); total * total];
        for pc in 0..2usize {
            for pt in 0..2usize {
                for ci in 0..dg {
                    let col = (pc * 2 + pt) * dg + ci;
                    for co in 0..2usize {
                        for cop in 0..dg {
                            let v = uc.matrix[(co * dg + cop) * n_uc + (pc * dg + ci)];
                            if num_traits::Zero::is_zero(&v) {
                                continue;
                            }
                            let row = co * sec + pt * dg + cop;
                            pe[row * total + col] = v;
                        }
                    }
                }
            }
        }
        let past_embed = UnitaryBlock::new_raw(
            vec![q("Pc"), q("Pt"), anc_in_label],
            vec![SystemLabel::new("Psec", total)],
            pe,
        )
        .map_err(CircuitError::Tensor)?;
        // future embedding: sector-major is already (Fc, Ft, C_O') order
        let future_embed = UnitaryBlock::wire(
            vec![SystemLabel::new("Fsec", total)],
            vec![q("Fc"), q("Ft"), anc_out_label],
        )
        .map_err(CircuitError::Tensor)?;

        let lab = |n: &str, d: usize| SystemLabel::new(n, d);
        let wire2 = |a: Vec<SystemLabel>, b: Vec<SystemLabel>| {
            UnitaryBlock::wire(a, b).map_err(CircuitError::Tensor)
        };
        let nu1_ab = wire2(vec![lab("Pl", sec)], vec![q("A_I"), lab("l1", dg)])?;
        let nu2_ab = wire2(vec![q("A_O"), lab("l1", dg)], vec![q("B_I"), lab("l2", dg)])?;
        let nu3_ab = wire2(vec![q("B_O"), lab("l2", dg)], vec![lab("Fl", sec)])?;
        let nu1_ba = wire2(vec![lab("Pr", sec)], vec![q("B_I"), lab("r1", dg)])?;
        let nu2_ba = wire2(vec![q("B_O"), lab("r1", dg)], vec![q("A_I"), lab("r2", dg)])?;
        let nu3_ba = wire2(vec![q("A_O"), lab("r2", dg)], vec![lab("Fr", sec)])?;
        crate::circuit::QcqcComponents::new(
            2,
            dg,
            dg,
            "A",
            "B",
            (nu1_ab, nu2_ab, nu3_ab),
            (nu1_ba, nu2_ba, nu3_ba),
            None,
            past_embed,
            future_embed,
        )
    }
}
/// Test oracle: |U_BW⟩⟩ with every party's input wired straight back to its
/// output, enumerated directly from the arrow-function fixed points.
#[doc(hidden)]
pub fn bw_closed_loop_oracle() -> LabeledTensor {
    let labels = vec![q("P1"), q("P2"), q("P3"), q("F1"), q("F2"), q("F3")];
    LabeledTensor::from_fn(labels, |idx| {
        let (p1, p2, p3, f1, f2, f3) = (idx[0], idx[1], idx[2], idx[3], idx[4], idx[5]);
        let mut amp = C64::zero();
        for a in 0..2usize {
            for b in 0..2usize {
                for c in 0..2usize {
                    let fixed = a == p1 ^ ((1 - b) & c)
                        && b == p2 ^ ((1 - c) & a)
                        && c == p3 ^ ((1 - a) & b);
                    if fixed && (a, b, c) == (f1, f2, f3) {
                        amp += C64::one();
                    }
                }
            }
        }
        amp
    })
    .expect("shape consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u_bw_is_unitary_with_64_unit_amplitudes() {
        let u = make_u_bw().unwrap();
        assert!(u.unitarity_residual().unwrap() < 1e-12);
        assert_eq!(u.tensor().nonzero_count(1e-12), 64);
    }

    #[test]
    fn u_bw_choi_matches_direct_enumeration() {
        // independent oracle: enumerate the displayed amplitudes
        let oracle = LabeledTensor::from_fn(
            vec![
                q("P1"),
                q("P2"),
                q("P3"),
                q("A_O"),
                q("B_O"),
                q("C_O"),
                q("F1"),
                q("F2"),
                q("F3"),
                q("A_I"),
                q("B_I"),
                q("C_I"),
            ],
            |idx| {
                let (p1, p2, p3, a, b, c) = (idx[0], idx[1], idx[2], idx[3], idx[4], idx[5]);
                let (f1, f2, f3, ai, bi, ci) = (idx[6], idx[7], idx[8], idx[9], idx[10], idx[11]);
                let ok = f1 == a
                    && f2 == b
                    && f3 == c
                    && ai == p1 ^ ((1 - b) & c)
                    && bi == p2 ^ ((1 - c) & a)
                    && ci == p3 ^ ((1 - a) & b);
                if ok {
                    C64::one()
                } else {
                    C64::zero()
                }
            },
        )
        .unwrap();
        let u = make_u_bw().unwrap();
        assert!(u.tensor().max_diff(&oracle).unwrap() == 0.0);
    }

    #[test]
    fn w_af_is_diagonal() {
        let w = make_w_af().unwrap();
        let n = 64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert!(w.operator.entries[i * n + j].is_zero());
                }
            }
        }
    }

    #[test]
    fn ci_strategies_are_unitary_and_flip_inputs() {
        for i_x in 0..2u8 {
            let u = ci_strategy("A", i_x);
            assert!(u.is_unitary(1e-12));
            // forwarding: A_I ↦ A_O', A_I' ⊕ i ↦ A_O
            let v = u.apply(&[C64::one(), C64::zero(), C64::zero(), C64::zero()]);
            // input |A_I=0, A_I'=0⟩ → |A_O = i, A_O' = 0⟩
            let expect_idx = (i_x as usize) * 2;
            assert_eq!(v[expect_idx], C64::one());
        }
    }

    #[test]
    fn tripartite_switch_is_unitary() {
        let u = make_tripartite_switch().unwrap();
        assert!(u.unitarity_residual().unwrap() < 1e-12);
    }
}
