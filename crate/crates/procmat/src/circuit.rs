//! Acyclic temporal circuits over named wires and their pure-Choi
//! simulation, plus the two circuit families used throughout:
//! the one-party comb (an operation sandwiched between two memory-carrying
//! unitaries) and the quantum-controlled-order circuit in which two
//! operations act on a target system at one of two times, coherently
//! conditioned on a control qubit.

use std::collections::{HashMap, HashSet};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::tensor::{
    pure_choi, total_dim, LabeledTensor, SystemLabel, TensorError, UnitaryBlock, C64, DEFAULT_TOL,
};

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("wire `{0}` consumed more than once")]
    WireReused(String),
    #[error("wire `{0}` produced more than once")]
    WireDuplicated(String),
    #[error("gate {gate} consumes wire `{wire}` before it is produced")]
    DanglingWire { gate: usize, wire: String },
    #[error("wire `{0}` has inconsistent dimensions")]
    WireDimMismatch(String),
    #[error("external output `{0}` is not produced by the circuit")]
    MissingOutput(String),
    #[error("wire `{0}` is neither consumed nor an external output")]
    UnconsumedWire(String),
    #[error("controlled gate branches act on different wires")]
    BranchMismatch,
    #[error("control wire `{0}` must be two-dimensional")]
    BadControl(String),
    #[error("traced wire `{wire}` is not in a computational basis state (support {support})")]
    NonDeterministicTrace { wire: String, support: usize },
    #[error("wire `{0}` not found")]
    WireNotFound(String),
    #[error("component shapes do not chain: {0}")]
    ComponentShape(String),
    #[error(transparent)]
    Process(#[from] Box<crate::process::ProcessError>),
}

type Result<T> = std::result::Result<T, CircuitError>;

/// One gate of a temporal circuit. Wires are identified with the label
/// names carried by the underlying blocks; each wire is produced exactly
/// once and consumed at most once in a circuit.
#[derive(Clone, Debug)]
pub enum Gate {
    /// A unitary (or isometric) block; its label names are the wire names.
    Unitary(UnitaryBlock),
    /// Apply `branch0` or `branch1` (same wire sets) coherently conditioned
    /// on a two-dimensional control.
    ControlledPair {
        branch0: UnitaryBlock,
        branch1: UnitaryBlock,
        control_in: SystemLabel,
        control_out: SystemLabel,
    },
    /// Emit a fresh wire in the given state.
    Prepare {
        wire: SystemLabel,
        state: Vec<C64>,
    },
    /// Close a wire on ⟨state|; the simulated map may become subnormalised.
    Project {
        wire: SystemLabel,
        state: Vec<C64>,
    },
    /// Discard a wire; the simulator only accepts this when the wire ends
    /// up in a definite computational basis state.
    TraceOut { wire: SystemLabel },
}

impl Gate {
    pub fn in_wires(&self) -> Vec<SystemLabel> {
        match self {
            Gate::Unitary(b) => b.in_labels.clone(),
            Gate::ControlledPair {
                branch0,
                control_in,
                ..
            } => {
                let mut v = branch0.in_labels.clone();
                v.push(control_in.clone());
                v
            }
            Gate::Prepare { .. } => vec![],
            Gate::Project { wire, .. } | Gate::TraceOut { wire } => vec![wire.clone()],
        }
    }

    pub fn out_wires(&self) -> Vec<SystemLabel> {
        match self {
            Gate::Unitary(b) => b.out_labels.clone(),
            Gate::ControlledPair {
                branch0,
                control_out,
                ..
            } => {
                let mut v = branch0.out_labels.clone();
                v.push(control_out.clone());
                v
            }
            Gate::Prepare { wire, .. } => vec![wire.clone()],
            Gate::Project { .. } | Gate::TraceOut { .. } => vec![],
        }
    }

    /// Pure Choi tensor of the gate over its in/out wires. `TraceOut` has
    /// no pure Choi; the simulator resolves it at the end.
    pub fn choi(&self) -> Result<Option<LabeledTensor>> {
        Ok(match self {
            Gate::Unitary(b) => Some(pure_choi(b)?),
            Gate::ControlledPair {
                branch0,
                branch1,
                control_in,
                control_out,
            } => {
                if control_in.dim != 2 {
                    return Err(CircuitError::BadControl(control_in.name.clone()));
                }
                let wires0: HashSet<&str> = branch0
                    .in_labels
                    .iter()
                    .chain(branch0.out_labels.iter())
                    .map(|l| l.name.as_str())
                    .collect();
                let wires1: HashSet<&str> = branch1
                    .in_labels
                    .iter()
                    .chain(branch1.out_labels.iter())
                    .map(|l| l.name.as_str())
                    .collect();
                if wires0 != wires1
                    || total_dim(&branch0.in_labels) != total_dim(&branch1.in_labels)
                    || total_dim(&branch0.out_labels) != total_dim(&branch1.out_labels)
                {
                    return Err(CircuitError::BranchMismatch);
                }
                let t0 = pure_choi(branch0)?
                    .tensor(&LabeledTensor::basis_ket(control_in.clone(), 0)?)?
                    .tensor(&LabeledTensor::basis_ket(control_out.clone(), 0)?)?;
                let t1 = pure_choi(branch1)?
                    .tensor(&LabeledTensor::basis_ket(control_in.clone(), 1)?)?
                    .tensor(&LabeledTensor::basis_ket(control_out.clone(), 1)?)?;
                Some(t0.add(&t1)?)
            }
            Gate::Prepare { wire, state } => {
                Some(LabeledTensor::ket(wire.clone(), state.clone())?)
            }
            Gate::Project { wire, state } => {
                // ⟨ψ| on an input leg appears as the conjugate ket in the Choi
                let conj: Vec<C64> = state.iter().map(|a| a.conj()).collect();
                Some(LabeledTensor::ket(wire.clone(), conj)?)
            }
            Gate::TraceOut { .. } => None,
        })
    }

    /// Rename a wire everywhere it appears on this gate.
    pub fn rename_wire(&self, old: &str, new: &str) -> Result<Gate> {
        let fix_label = |l: &SystemLabel| -> SystemLabel {
            if l.name == old {
                SystemLabel::new(new, l.dim)
            } else {
                l.clone()
            }
        };
        Ok(match self {
            Gate::Unitary(b) => Gate::Unitary(b.relabel(&[(old, new)])?),
            Gate::ControlledPair {
                branch0,
                branch1,
                control_in,
                control_out,
            } => Gate::ControlledPair {
                branch0: branch0.relabel(&[(old, new)])?,
                branch1: branch1.relabel(&[(old, new)])?,
                control_in: fix_label(control_in),
                control_out: fix_label(control_out),
            },
            Gate::Prepare { wire, state } => Gate::Prepare {
                wire: fix_label(wire),
                state: state.clone(),
            },
            Gate::Project { wire, state } => Gate::Project {
                wire: fix_label(wire),
                state: state.clone(),
            },
            Gate::TraceOut { wire } => Gate::TraceOut { wire: fix_label(wire) },
        })
    }
}

/// An acyclic circuit: gates in topological order over named wires.
#[derive(Clone, Debug)]
pub struct TemporalCircuit {
    pub gates: Vec<Gate>,
    pub external_in: Vec<SystemLabel>,
    pub external_out: Vec<SystemLabel>,
}

/// Result of simulating a circuit: the pure Choi tensor over
/// external in ∪ out wires, with flags describing non-unitary steps.
#[derive(Clone, Debug)]
pub struct SimResult {
    pub choi: LabeledTensor,
    /// A `Project` gate was present; the map may be subnormalised.
    pub projective: bool,
    /// Wires removed by deterministic `TraceOut`.
    pub traced: Vec<String>,
}

impl TemporalCircuit {
    pub fn new(
        gates: Vec<Gate>,
        external_in: Vec<SystemLabel>,
        external_out: Vec<SystemLabel>,
    ) -> Result<Self> {
        let c = TemporalCircuit {
            gates,
            external_in,
            external_out,
        };
        c.validate()?;
        Ok(c)
    }

    /// Build a circuit inferring the external wires: inputs are consumed
    /// but never produced, outputs produced but never consumed.
    pub fn infer(gates: Vec<Gate>) -> Result<Self> {
        let mut produced: HashMap<String, SystemLabel> = HashMap::new();
        let mut consumed: HashMap<String, SystemLabel> = HashMap::new();
        for g in &gates {
            for w in g.in_wires() {
                if consumed.insert(w.name.clone(), w.clone()).is_some() {
                    return Err(CircuitError::WireReused(w.name));
                }
            }
            for w in g.out_wires() {
                if produced.insert(w.name.clone(), w.clone()).is_some() {
                    return Err(CircuitError::WireDuplicated(w.name));
                }
            }
        }
        let mut external_in: Vec<SystemLabel> = consumed
            .values()
            .filter(|w| !produced.contains_key(&w.name))
            .cloned()
            .collect();
        external_in.sort_by(|a, b| a.name.cmp(&b.name));
        let mut external_out: Vec<SystemLabel> = produced
            .values()
            .filter(|w| !consumed.contains_key(&w.name))
            .cloned()
            .collect();
        external_out.sort_by(|a, b| a.name.cmp(&b.name));
        TemporalCircuit::new(gates, external_in, external_out)
    }

    fn validate(&self) -> Result<()> {
        let mut available: HashMap<String, usize> = HashMap::new();
        for w in &self.external_in {
            if available.insert(w.name.clone(), w.dim).is_some() {
                return Err(CircuitError::WireDuplicated(w.name.clone()));
            }
        }
        let mut consumed: HashSet<String> = HashSet::new();
        for (gi, g) in self.gates.iter().enumerate() {
            for w in g.in_wires() {
                match available.get(&w.name) {
                    None => {
                        if consumed.contains(&w.name) {
                            return Err(CircuitError::WireReused(w.name));
                        }
                        return Err(CircuitError::DanglingWire {
                            gate: gi,
                            wire: w.name,
                        });
                    }
                    Some(&dim) if dim != w.dim => {
                        return Err(CircuitError::WireDimMismatch(w.name));
                    }
                    Some(_) => {
                        available.remove(&w.name);
                        consumed.insert(w.name);
                    }
                }
            }
            for w in g.out_wires() {
                if available.contains_key(&w.name) || consumed.contains(&w.name) {
                    return Err(CircuitError::WireDuplicated(w.name));
                }
                available.insert(w.name.clone(), w.dim);
            }
        }
        for w in &self.external_out {
            match available.remove(&w.name) {
                None => return Err(CircuitError::MissingOutput(w.name.clone())),
                Some(dim) if dim != w.dim => {
                    return Err(CircuitError::WireDimMismatch(w.name.clone()))
                }
                Some(_) => {}
            }
        }
        if let Some(name) = available.keys().next() {
            return Err(CircuitError::UnconsumedWire(name.clone()));
        }
        Ok(())
    }

    /// Link all gate Chois in list order and resolve traced wires.
    pub fn simulate_choi(&self) -> Result<SimResult> {
        let order: Vec<usize> = (0..self.gates.len()).collect();
        self.simulate_choi_ordered(&order)
    }

    /// Same contraction with an explicit gate order (a contraction plan).
    /// Any order yields the same tensor since every wire name appears at
    /// most twice across the gate Chois.
    pub fn simulate_choi_ordered(&self, order: &[usize]) -> Result<SimResult> {
        assert_eq!(order.len(), self.gates.len(), "plan must cover all gates");
        let mut acc = LabeledTensor::scalar(C64::one());
        let mut projective = false;
        let mut traced = Vec::new();
        for &gi in order {
            let g = &self.gates[gi];
            match g.choi()? {
                Some(t) => acc = acc.link(&t)?,
                None => {
                    if let Gate::TraceOut { wire } = g {
                        traced.push(wire.name.clone());
                    }
                }
            }
            if matches!(g, Gate::Project { .. }) {
                projective = true;
            }
        }
        for name in &traced {
            acc = resolve_deterministic_trace(&acc, name)?;
        }
        Ok(SimResult {
            choi: acc,
            projective,
            traced,
        })
    }
}

/// A traced wire is accepted only when the tensor has support on exactly
/// one basis value of it, i.e. the discarded system is in a definite
/// computational basis state and no coherence is lost.
fn resolve_deterministic_trace(t: &LabeledTensor, wire: &str) -> Result<LabeledTensor> {
    let dim = t
        .dim_of(wire)
        .ok_or_else(|| CircuitError::WireNotFound(wire.to_string()))?;
    let mut keep: Option<LabeledTensor> = None;
    let mut support = 0usize;
    for k in 0..dim {
        let s = t.slice(wire, k)?;
        if s.max_abs() > 1e-12 {
            support += 1;
            keep = Some(s);
        }
    }
    if support != 1 {
        return Err(CircuitError::NonDeterministicTrace {
            wire: wire.to_string(),
            support,
        });
    }
    Ok(keep.expect("support == 1"))
}

/// Fixed-order circuit for a one-party process: `omega1`, the party slot
/// `u_a`, then `omega2`, connected by the memory wire(s) shared between the
/// omegas.
pub fn build_bipartite_comb(
    omega1: &UnitaryBlock,
    omega2: &UnitaryBlock,
    u_a: &UnitaryBlock,
) -> Result<TemporalCircuit> {
    TemporalCircuit::infer(vec![
        Gate::Unitary(omega1.clone()),
        Gate::Unitary(u_a.clone()),
        Gate::Unitary(omega2.clone()),
    ])
}

/// Unitary components of a quantum circuit with quantum control of causal
/// order, on canonical sector spaces.
///
/// The past embedding maps the physical global-past space onto the direct
/// sum ℓ ⊕ r (ℓ block first); `nu1_ab .. nu3_ab` form the comb acting in
/// the A≺B branch (`P^ℓ → A_I⊗λ₁ → B_I⊗λ₂ → F^ℓ`) and `nu1_ba .. nu3_ba`
/// the comb of the B≺A branch over the ρ ancillas. The tilde components
/// complete the circuit operations to unitaries on the full spaces; when
/// absent, identity-shaped defaults are synthesized.
#[derive(Clone, Debug)]
pub struct QcqcComponents {
    pub d: usize,
    pub d_lambda: usize,
    pub d_rho: usize,
    pub a_in: String,
    pub a_out: String,
    pub b_in: String,
    pub b_out: String,
    pub nu1_ab: UnitaryBlock,
    pub nu2_ab: UnitaryBlock,
    pub nu3_ab: UnitaryBlock,
    pub nu1_ba: UnitaryBlock,
    pub nu2_ba: UnitaryBlock,
    pub nu3_ba: UnitaryBlock,
    pub tilde: Option<TildeComponents>,
    pub past_embed: UnitaryBlock,
    pub future_embed: UnitaryBlock,
}

/// Complementary components with the sector roles exchanged:
/// `t1_ab..t3_ab` run A≺B over the ρ ancillas (`P^r → … → F^r`) and
/// `t1_ba..t3_ba` run B≺A over the λ ancillas.
#[derive(Clone, Debug)]
pub struct TildeComponents {
    pub t1_ab: UnitaryBlock,
    pub t2_ab: UnitaryBlock,
    pub t3_ab: UnitaryBlock,
    pub t1_ba: UnitaryBlock,
    pub t2_ba: UnitaryBlock,
    pub t3_ba: UnitaryBlock,
}

fn expect_dims(b: &UnitaryBlock, d_in: usize, d_out: usize, what: &str) -> Result<()> {
    if b.in_dim() != d_in || b.out_dim() != d_out {
        return Err(CircuitError::ComponentShape(format!(
            "{what}: got {}x{}, expected {}x{}",
            b.out_dim(),
            b.in_dim(),
            d_out,
            d_in
        )));
    }
    if b.unitarity_residual() > DEFAULT_TOL {
        return Err(CircuitError::ComponentShape(format!("{what} is not unitary")));
    }
    Ok(())
}

impl QcqcComponents {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        d_lambda: usize,
        d_rho: usize,
        party_a: &str,
        party_b: &str,
        nus_ab: (UnitaryBlock, UnitaryBlock, UnitaryBlock),
        nus_ba: (UnitaryBlock, UnitaryBlock, UnitaryBlock),
        tilde: Option<TildeComponents>,
        past_embed: UnitaryBlock,
        future_embed: UnitaryBlock,
    ) -> Result<Self> {
        let comp = QcqcComponents {
            d,
            d_lambda,
            d_rho,
            a_in: format!("{party_a}_I"),
            a_out: format!("{party_a}_O"),
            b_in: format!("{party_b}_I"),
            b_out: format!("{party_b}_O"),
            nu1_ab: nus_ab.0,
            nu2_ab: nus_ab.1,
            nu3_ab: nus_ab.2,
            nu1_ba: nus_ba.0,
            nu2_ba: nus_ba.1,
            nu3_ba: nus_ba.2,
            tilde,
            past_embed,
            future_embed,
        };
        comp.validate()?;
        Ok(comp)
    }

    pub fn d_past_l(&self) -> usize {
        self.d * self.d_lambda
    }

    pub fn d_past_r(&self) -> usize {
        self.d * self.d_rho
    }

    pub fn d_sector(&self) -> usize {
        self.d_past_l() + self.d_past_r()
    }

    fn validate(&self) -> Result<()> {
        let (d, dl, dr) = (self.d, self.d_lambda, self.d_rho);
        expect_dims(&self.nu1_ab, d * dl, d * dl, "nu1_ab")?;
        expect_dims(&self.nu2_ab, d * dl, d * dl, "nu2_ab")?;
        expect_dims(&self.nu3_ab, d * dl, d * dl, "nu3_ab")?;
        expect_dims(&self.nu1_ba, d * dr, d * dr, "nu1_ba")?;
        expect_dims(&self.nu2_ba, d * dr, d * dr, "nu2_ba")?;
        expect_dims(&self.nu3_ba, d * dr, d * dr, "nu3_ba")?;
        if let Some(t) = &self.tilde {
            expect_dims(&t.t1_ab, d * dr, d * dr, "t1_ab")?;
            expect_dims(&t.t2_ab, d * dr, d * dr, "t2_ab")?;
            expect_dims(&t.t3_ab, d * dr, d * dr, "t3_ab")?;
            expect_dims(&t.t1_ba, d * dl, d * dl, "t1_ba")?;
            expect_dims(&t.t2_ba, d * dl, d * dl, "t2_ba")?;
            expect_dims(&t.t3_ba, d * dl, d * dl, "t3_ba")?;
        }
        expect_dims(&self.past_embed, self.d_sector(), self.d_sector(), "past_embed")?;
        expect_dims(
            &self.future_embed,
            self.d_sector(),
            self.d_sector(),
            "future_embed",
        )?;
        Ok(())
    }

    /// Identity-shaped complements on the swapped sectors.
    pub fn tilde_or_default(&self) -> TildeComponents {
        if let Some(t) = &self.tilde {
            return t.clone();
        }
        let (d, dl, dr) = (self.d, self.d_lambda, self.d_rho);
        let idq = |n: usize| -> UnitaryBlock {
            let mut m = vec![C64::zero(); n * n];
            for i in 0..n {
                m[i * n + i] = C64::one();
            }
            UnitaryBlock::new_raw(
                vec![SystemLabel::new("x", n)],
                vec![SystemLabel::new("y", n)],
                m,
            )
            .expect("identity block")
        };
        TildeComponents {
            t1_ab: idq(d * dr),
            t2_ab: idq(d * dr),
            t3_ab: idq(d * dr),
            t1_ba: idq(d * dl),
            t2_ba: idq(d * dl),
            t3_ba: idq(d * dl),
        }
    }

    /// The process vector the components define, over the physical past and
    /// future labels and the four party legs: the sum of the two branch
    /// combs embedded through the sector isomorphisms.
    pub fn process_tensor(&self) -> Result<LabeledTensor> {
        let dket = |m: &UnitaryBlock,
                    ins: Vec<SystemLabel>,
                    outs: Vec<SystemLabel>|
         -> Result<LabeledTensor> {
            Ok(pure_choi(&UnitaryBlock::new_raw(ins, outs, m.matrix.clone())?)?)
        };
        let d = self.d;
        let (dl, dr) = (self.d_lambda, self.d_rho);
        let psec = SystemLabel::new("Psec", self.d_sector());
        let fsec = SystemLabel::new("Fsec", self.d_sector());
        let lab = |n: &str, dim: usize| SystemLabel::new(n, dim);

        // A≺B branch: embed ν₁ columns into the ℓ block of Psec and ν₃ rows
        // into the ℓ block of Fsec.
        let nu1_l = embed_cols(&self.nu1_ab, 0, self.d_sector());
        let nu3_l = embed_rows(&self.nu3_ab, 0, self.d_sector());
        let ab = dket(
            &nu1_l,
            vec![psec.clone()],
            vec![lab(&self.a_in, d), lab("l1", dl)],
        )?
        .link(&dket(
            &self.nu2_ab,
            vec![lab(&self.a_out, d), lab("l1", dl)],
            vec![lab(&self.b_in, d), lab("l2", dl)],
        )?)?
        .link(&dket(
            &nu3_l,
            vec![lab(&self.b_out, d), lab("l2", dl)],
            vec![fsec.clone()],
        )?)?;

        let nu1_r = embed_cols(&self.nu1_ba, self.d_past_l(), self.d_sector());
        let nu3_r = embed_rows(&self.nu3_ba, self.d_past_l(), self.d_sector());
        let ba = dket(
            &nu1_r,
            vec![psec.clone()],
            vec![lab(&self.b_in, d), lab("r1", dr)],
        )?
        .link(&dket(
            &self.nu2_ba,
            vec![lab(&self.b_out, d), lab("r1", dr)],
            vec![lab(&self.a_in, d), lab("r2", dr)],
        )?)?
        .link(&dket(
            &nu3_r,
            vec![lab(&self.a_out, d), lab("r2", dr)],
            vec![fsec.clone()],
        )?)?;

        let sec = ab.add(&ba)?;
        let past = dket(
            &self.past_embed,
            self.past_embed.in_labels.clone(),
            vec![psec],
        )?;
        let future = dket(
            &self.future_embed,
            vec![fsec],
            self.future_embed.out_labels.clone(),
        )?;
        Ok(past.link(&sec)?.link(&future)?)
    }
}

/// Zero-pad columns: the block's input space becomes a `total`-dimensional
/// space with the original inputs at `offset`.
fn embed_cols(b: &UnitaryBlock, offset: usize, total: usize) -> UnitaryBlock {
    let n = b.in_dim();
    let m = b.out_dim();
    let mut matrix = vec![C64::zero(); m * total];
    for r in 0..m {
        for c in 0..n {
            matrix[r * total + offset + c] = b.matrix[r * n + c];
        }
    }
    UnitaryBlock::new_raw(
        vec![SystemLabel::new("in", total)],
        vec![SystemLabel::new("out", m)],
        matrix,
    )
    .expect("embedding shape")
}

/// Zero-pad rows: the output space becomes `total`-dimensional with the
/// original outputs at `offset`.
fn embed_rows(b: &UnitaryBlock, offset: usize, total: usize) -> UnitaryBlock {
    let n = b.in_dim();
    let m = b.out_dim();
    let mut matrix = vec![C64::zero(); total * n];
    for r in 0..m {
        for c in 0..n {
            matrix[(offset + r) * n + c] = b.matrix[r * n + c];
        }
    }
    UnitaryBlock::new_raw(
        vec![SystemLabel::new("in", n)],
        vec![SystemLabel::new("out", total)],
        matrix,
    )
    .expect("embedding shape")
}

/// Direct sum of two blocks (block-diagonal on both sides).
fn direct_sum(a: &UnitaryBlock, b: &UnitaryBlock) -> UnitaryBlock {
    let (na, ma) = (a.in_dim(), a.out_dim());
    let (nb, mb) = (b.in_dim(), b.out_dim());
    let n = na + nb;
    let m = ma + mb;
    let mut matrix = vec![C64::zero(); n * m];
    for r in 0..ma {
        for c in 0..na {
            matrix[r * n + c] = a.matrix[r * na + c];
        }
    }
    for r in 0..mb {
        for c in 0..nb {
            matrix[(ma + r) * n + na + c] = b.matrix[r * nb + c];
        }
    }
    UnitaryBlock::new_raw(
        vec![SystemLabel::new("in", n)],
        vec![SystemLabel::new("out", m)],
        matrix,
    )
    .expect("direct sum shape")
}

/// Wire names used by the assembled circuits.
pub mod wires {
    pub const P_ANC: &str = "p";
    pub const F_ANC: &str = "f";
    pub const T1: &str = "T1";
    pub const T1P: &str = "T1'";
    pub const T2: &str = "T2";
    pub const T2P: &str = "T2'";
    pub const BT1: &str = "bT1";
    pub const BT1P: &str = "bT1'";
    pub const BT2: &str = "bT2";
    pub const BT2P: &str = "bT2'";
    pub const Q1: &str = "Q1";
    pub const Q1P: &str = "Q1'";
    pub const Q2: &str = "Q2";
    pub const Q2P: &str = "Q2'";
    pub const BQ1: &str = "bQ1";
    pub const BQ2P: &str = "bQ2'";
    pub const E1: &str = "E1";
    pub const E2: &str = "E2";
    pub const ALPHA: &str = "alpha";
    pub const BETA: &str = "beta";
}

/// Interleaving of target/ancilla indices used by the first and last
/// circuit operations: (t, e, q) over T ⊗ E ⊗ Q with E = λ ⊕ ρ.
struct OmegaShapes {
    d: usize,
    dl: usize,
    dr: usize,
}

impl OmegaShapes {
    fn de(&self) -> usize {
        self.dl + self.dr
    }

    /// ω₁: (P_phys ⊗ p) → (T₁ ⊗ E₁ ⊗ Q₁), branching on p (real vs tilde
    /// comb) and emitting the control matching the branch order.
    fn omega1(
        &self,
        past_embed: &UnitaryBlock,
        nu1_ab: &UnitaryBlock,
        nu1_ba: &UnitaryBlock,
        t1_ab: &UnitaryBlock,
        t1_ba: &UnitaryBlock,
    ) -> UnitaryBlock {
        let (d, dl, dr) = (self.d, self.dl, self.dr);
        let d_sec = past_embed.out_dim();
        let dpl = d * dl;
        let n_in = d_sec * 2;
        let n_out = d * self.de() * 2;
        let mut matrix = vec![C64::zero(); n_in * n_out];
        let mut set = |t: usize, e: usize, q: usize, col: usize, v: C64| {
            let row = (t * self.de() + e) * 2 + q;
            matrix[row * n_in + col] += v;
        };
        for x in 0..d_sec {
            for pi in 0..2usize {
                let col = x * 2 + pi;
                // y = past_embed |x⟩, split into ℓ ⊕ r
                for (y, amp) in past_embed_column(past_embed, x) {
                    let (is_l, y_loc) = if y < dpl { (true, y) } else { (false, y - dpl) };
                    match (pi, is_l) {
                        // p=0: real combs — ℓ feeds A-first, r feeds B-first
                        (0, true) => apply_nu1(nu1_ab, y_loc, dl, 0, 0, amp, &mut set, col),
                        (0, false) => apply_nu1(nu1_ba, y_loc, dr, dl, 1, amp, &mut set, col),
                        // p=1: tilde combs — r feeds A-first, ℓ feeds B-first
                        (1, false) => apply_nu1(t1_ab, y_loc, dr, dl, 0, amp, &mut set, col),
                        (1, true) => apply_nu1(t1_ba, y_loc, dl, 0, 1, amp, &mut set, col),
                        _ => unreachable!("p is a qubit"),
                    }
                }
            }
        }
        UnitaryBlock::new_raw(
            vec![
                SystemLabel::new("in", n_in),
            ],
            vec![SystemLabel::new("out", n_out)],
            matrix,
        )
        .expect("omega1 shape")
    }

    /// ω₃: (T₂′ ⊗ E₂ ⊗ Q₂′) → (F_phys ⊗ f).
    fn omega3(
        &self,
        future_embed: &UnitaryBlock,
        nu3_ab: &UnitaryBlock,
        nu3_ba: &UnitaryBlock,
        t3_ab: &UnitaryBlock,
        t3_ba: &UnitaryBlock,
    ) -> UnitaryBlock {
        let (d, dl, dr) = (self.d, self.dl, self.dr);
        let dpl = d * dl;
        let d_sec = future_embed.in_dim();
        let n_in = d * self.de() * 2;
        let n_out = d_sec * 2;
        let mut matrix = vec![C64::zero(); n_in * n_out];
        for t in 0..d {
            for e in 0..self.de() {
                for q in 0..2usize {
                    let col = (t * self.de() + e) * 2 + q;
                    let (block, sec_off, f_anc): (&UnitaryBlock, usize, usize) = match (q, e < dl)
                    {
                        (0, true) => (nu3_ab, 0, 0),
                        (0, false) => (t3_ab, dpl, 1),
                        (1, false) => (nu3_ba, dpl, 0),
                        (1, true) => (t3_ba, 0, 1),
                        _ => unreachable!("control is a qubit"),
                    };
                    let e_loc = if e < dl { e } else { e - dl };
                    let d_anc = if e < dl { dl } else { dr };
                    let in_loc = t * d_anc + e_loc;
                    let m = block.out_dim();
                    for r in 0..m {
                        let v = block.matrix[r * block.in_dim() + in_loc];
                        if v.is_zero() {
                            continue;
                        }
                        // embed into Fsec, then through future_embed
                        for (y, amp) in future_embed_row(future_embed, sec_off + r) {
                            let row = y * 2 + f_anc;
                            matrix[row * n_in + col] += v * amp;
                        }
                    }
                }
            }
        }
        UnitaryBlock::new_raw(
            vec![SystemLabel::new("in", n_in)],
            vec![SystemLabel::new("out", n_out)],
            matrix,
        )
        .expect("omega3 shape")
    }
}

/// Nonzero amplitudes of `past_embed`'s column `x` in the sector space.
fn past_embed_column(b: &UnitaryBlock, x: usize) -> Vec<(usize, C64)> {
    let n = b.in_dim();
    (0..b.out_dim())
        .filter_map(|r| {
            let v = b.matrix[r * n + x];
            if v.is_zero() {
                None
            } else {
                Some((r, v))
            }
        })
        .collect()
}

/// Nonzero amplitudes of the physical future state `future_embed`|sec⟩.
fn future_embed_row(b: &UnitaryBlock, sec: usize) -> Vec<(usize, C64)> {
    let n = b.in_dim();
    (0..b.out_dim())
        .filter_map(|r| {
            let v = b.matrix[r * n + sec];
            if v.is_zero() {
                None
            } else {
                Some((r, v))
            }
        })
        .collect()
}

/// Scatter ν₁|y_loc⟩ into the (T₁, E₁, Q₁) rows. The ancilla block sits at
/// `e_offset` inside E₁ and the control value is `q`.
#[allow(clippy::too_many_arguments)]
fn apply_nu1(
    nu1: &UnitaryBlock,
    y_loc: usize,
    d_anc: usize,
    e_offset: usize,
    q: usize,
    amp: C64,
    set: &mut impl FnMut(usize, usize, usize, usize, C64),
    col: usize,
) {
    let n = nu1.in_dim();
    for r in 0..nu1.out_dim() {
        let v = nu1.matrix[r * n + y_loc];
        if v.is_zero() {
            continue;
        }
        let t = r / d_anc;
        let e = e_offset + (r % d_anc);
        set(t, e, q, col, v * amp);
    }
}

/// The assembled quantum-controlled-order circuit for local unitaries
/// `u_a`, `u_b` (party system plus an equal-dimension ancilla; a trivial
/// ancilla is synthesized when absent). With `with_bars` the identity
/// channels relating the barred and unbarred target/control copies are
/// inserted; their gate indices (the blue fragment) are returned alongside.
pub fn assemble_qcqc(
    comp: &QcqcComponents,
    u_a: &UnitaryBlock,
    u_b: &UnitaryBlock,
    with_bars: bool,
) -> Result<(TemporalCircuit, Vec<usize>)> {
    use wires::*;
    let d = comp.d;
    let de = comp.d_lambda + comp.d_rho;
    let tilde = comp.tilde_or_default();
    let shapes = OmegaShapes {
        d,
        dl: comp.d_lambda,
        dr: comp.d_rho,
    };
    let lab = SystemLabel::new;
    let q = SystemLabel::qubit;

    let u_a = with_ancilla(u_a, &comp.a_in, &comp.a_out, "A")?;
    let u_b = with_ancilla(u_b, &comp.b_in, &comp.b_out, "B")?;
    let (a_anc_in, a_anc_out) = ancilla_names(&u_a, &comp.a_in, &comp.a_out)?;
    let (b_anc_in, b_anc_out) = ancilla_names(&u_b, &comp.b_in, &comp.b_out)?;
    let d_alpha = u_a.in_dim() / d;
    let d_beta = u_b.in_dim() / d;

    let t1_first = if with_bars { BT1 } else { T1 };
    let q1_first = if with_bars { BQ1 } else { Q1 };
    let omega1 = {
        let raw = shapes.omega1(
            &comp.past_embed,
            &comp.nu1_ab,
            &comp.nu1_ba,
            &tilde.t1_ab,
            &tilde.t1_ba,
        );
        let mut ins = comp.past_embed.in_labels.clone();
        ins.push(q(P_ANC));
        UnitaryBlock::new_raw(
            ins,
            vec![lab(t1_first, d), lab(E1, de), q(q1_first)],
            raw.matrix,
        )?
    };

    // first controlled application: U_A on T1 with B's ancilla parked, or
    // U_B on T1 with A's ancilla parked
    let branch_a1 = u_a
        .relabel(&[
            (comp.a_in.as_str(), T1),
            (comp.a_out.as_str(), T1P),
            (a_anc_out.as_str(), ALPHA),
        ])?
        .kron(&UnitaryBlock::wire(
            vec![lab(&b_anc_in, d_beta)],
            vec![lab(BETA, d_beta)],
        )?)?;
    let branch_b1 = u_b
        .relabel(&[
            (comp.b_in.as_str(), T1),
            (comp.b_out.as_str(), T1P),
            (b_anc_out.as_str(), BETA),
        ])?
        .kron(&UnitaryBlock::wire(
            vec![lab(&a_anc_in, d_alpha)],
            vec![lab(ALPHA, d_alpha)],
        )?)?;

    // controlled middle operations, block diagonal over E = λ ⊕ ρ
    let t1p_in = if with_bars { BT1P } else { T1P };
    let t2_out = if with_bars { BT2 } else { T2 };
    let omega2_circ = direct_sum(&comp.nu2_ab, &tilde.t2_ab);
    let omega2_bullet = direct_sum(&tilde.t2_ba, &comp.nu2_ba);
    let w2c = UnitaryBlock::new_raw(
        vec![lab(t1p_in, d), lab(E1, de)],
        vec![lab(t2_out, d), lab(E2, de)],
        interleave_te(&omega2_circ, d, comp.d_lambda, comp.d_rho),
    )?;
    let w2b = UnitaryBlock::new_raw(
        vec![lab(t1p_in, d), lab(E1, de)],
        vec![lab(t2_out, d), lab(E2, de)],
        interleave_te(&omega2_bullet, d, comp.d_lambda, comp.d_rho),
    )?;

    // second controlled application: U_B on T2 (A≺B branch) or U_A on T2
    let branch_b2 = u_b
        .relabel(&[
            (comp.b_in.as_str(), T2),
            (comp.b_out.as_str(), T2P),
            (b_anc_in.as_str(), BETA),
        ])?
        .kron(&UnitaryBlock::wire(
            vec![lab(ALPHA, d_alpha)],
            vec![lab(&a_anc_out, d_alpha)],
        )?)?;
    let branch_a2 = u_a
        .relabel(&[
            (comp.a_in.as_str(), T2),
            (comp.a_out.as_str(), T2P),
            (a_anc_in.as_str(), ALPHA),
        ])?
        .kron(&UnitaryBlock::wire(
            vec![lab(BETA, d_beta)],
            vec![lab(&b_anc_out, d_beta)],
        )?)?;

    let t2p_last = if with_bars { BT2P } else { T2P };
    let q2p_last = if with_bars { BQ2P } else { Q2P };
    let omega3 = {
        let raw = shapes.omega3(
            &comp.future_embed,
            &comp.nu3_ab,
            &comp.nu3_ba,
            &tilde.t3_ab,
            &tilde.t3_ba,
        );
        let mut outs = comp.future_embed.out_labels.clone();
        outs.push(q(F_ANC));
        UnitaryBlock::new_raw(
            vec![lab(t2p_last, d), lab(E2, de), q(q2p_last)],
            outs,
            raw.matrix,
        )?
    };

    let mut gates = vec![
        Gate::Prepare {
            wire: q(P_ANC),
            state: vec![C64::one(), C64::zero()],
        },
        Gate::Unitary(omega1),
    ];
    let mut blue = Vec::new();
    let push_bar =
        |gates: &mut Vec<Gate>, blue: &mut Vec<usize>, from: &str, to: &str, dim: usize| {
            gates.push(Gate::Unitary(
                UnitaryBlock::wire(vec![SystemLabel::new(from, dim)], vec![SystemLabel::new(
                    to, dim,
                )])
                .expect("bar wire"),
            ));
            blue.push(gates.len() - 1);
        };
    if with_bars {
        push_bar(&mut gates, &mut blue, BT1, T1, d);
        push_bar(&mut gates, &mut blue, BQ1, Q1, 2);
    }
    gates.push(Gate::ControlledPair {
        branch0: branch_a1,
        branch1: branch_b1,
        control_in: q(Q1),
        control_out: q(Q1P),
    });
    if with_bars {
        push_bar(&mut gates, &mut blue, T1P, BT1P, d);
    }
    gates.push(Gate::ControlledPair {
        branch0: w2c,
        branch1: w2b,
        control_in: q(Q1P),
        control_out: q(Q2),
    });
    if with_bars {
        push_bar(&mut gates, &mut blue, BT2, T2, d);
    }
    gates.push(Gate::ControlledPair {
        branch0: branch_b2,
        branch1: branch_a2,
        control_in: q(Q2),
        control_out: q(Q2P),
    });
    if with_bars {
        push_bar(&mut gates, &mut blue, T2P, BT2P, d);
        push_bar(&mut gates, &mut blue, Q2P, BQ2P, 2);
    }
    gates.push(Gate::Unitary(omega3));
    gates.push(Gate::Project {
        wire: q(F_ANC),
        state: vec![C64::one(), C64::zero()],
    });
    Ok((TemporalCircuit::infer(gates)?, blue))
}

/// Ensure the local operation carries exactly one ancilla input and output;
/// a trivial one-dimensional ancilla is adjoined when missing.
fn with_ancilla(
    u: &UnitaryBlock,
    sys_in: &str,
    sys_out: &str,
    party: &str,
) -> Result<UnitaryBlock> {
    let anc_ins = u.in_labels.iter().filter(|l| l.name != sys_in).count();
    let anc_outs = u.out_labels.iter().filter(|l| l.name != sys_out).count();
    if anc_ins > 1 || anc_outs > 1 {
        return Err(CircuitError::ComponentShape(format!(
            "local operation for {party} must carry at most one ancilla leg per side"
        )));
    }
    if !u.in_labels.iter().any(|l| l.name == sys_in)
        || !u.out_labels.iter().any(|l| l.name == sys_out)
    {
        return Err(CircuitError::ComponentShape(format!(
            "local operation for {party} must act on {sys_in} → {sys_out}"
        )));
    }
    let mut out = u.clone();
    if anc_ins == 0 || anc_outs == 0 {
        if anc_ins != anc_outs {
            return Err(CircuitError::ComponentShape(format!(
                "local operation for {party} has mismatched ancilla legs"
            )));
        }
        let triv = UnitaryBlock::wire(
            vec![SystemLabel::new(format!("{party}_I'"), 1)],
            vec![SystemLabel::new(format!("{party}_O'"), 1)],
        )?;
        out = out.kron(&triv)?;
    }
    if out.in_dim() != out.out_dim() {
        return Err(CircuitError::ComponentShape(format!(
            "local operation for {party} must be square"
        )));
    }
    Ok(out)
}

fn ancilla_names(u: &UnitaryBlock, sys_in: &str, sys_out: &str) -> Result<(String, String)> {
    let a_in = u
        .in_labels
        .iter()
        .find(|l| l.name != sys_in)
        .map(|l| l.name.clone())
        .ok_or_else(|| CircuitError::ComponentShape("missing ancilla input".into()))?;
    let a_out = u
        .out_labels
        .iter()
        .find(|l| l.name != sys_out)
        .map(|l| l.name.clone())
        .ok_or_else(|| CircuitError::ComponentShape("missing ancilla output".into()))?;
    Ok((a_in, a_out))
}

/// Reindex a packed block-diagonal operator on (T⊗λ) ⊕ (T⊗ρ) to the
/// (T, E) leg order with E = λ ⊕ ρ.
fn interleave_te(block_sum: &UnitaryBlock, d: usize, dl: usize, dr: usize) -> Vec<C64> {
    let de = dl + dr;
    let n = d * de;
    assert_eq!(block_sum.in_dim(), n);
    let unpack = |u: usize| -> (usize, usize) {
        if u < d * dl {
            (u / dl, u % dl)
        } else {
            let v = u - d * dl;
            (v / dr, dl + v % dr)
        }
    };
    let mut matrix = vec![C64::zero(); n * n];
    for row in 0..n {
        let (t_o, e_o) = unpack(row);
        for col in 0..n {
            let v = block_sum.matrix[row * n + col];
            if v.is_zero() {
                continue;
            }
            let (t_i, e_i) = unpack(col);
            matrix[(t_o * de + e_o) * n + (t_i * de + e_i)] = v;
        }
    }
    matrix
}

/// Supplies quantum-controlled-order components for a tripartite process
/// composed with a fixed operation for the third party.
pub trait QcqcDecomposer {
    /// Components of the reduced bipartite process |U⟩⟩ ∗ |U_C⟩⟩, with the
    /// third party's ancilla legs folded into the past/future embeddings.
    fn components(&self, u_c: &UnitaryBlock) -> Result<QcqcComponents>;
}

/// Red/blue split of a circuit: `red` carries the circuit operations,
/// `blue` the identity channels that relate barred and unbarred wires.
/// Re-linking the cut wires reproduces the circuit.
#[derive(Clone, Debug)]
pub struct FragmentSplit {
    pub red: Vec<usize>,
    pub blue: Vec<usize>,
}

impl FragmentSplit {
    pub fn from_blue(total: usize, blue: &[usize]) -> Self {
        let blue_set: HashSet<usize> = blue.iter().copied().collect();
        FragmentSplit {
            red: (0..total).filter(|i| !blue_set.contains(i)).collect(),
            blue: blue.to_vec(),
        }
    }

    /// Choi of the gates of one side, contracted in list order.
    pub fn fragment_choi(&self, c: &TemporalCircuit, side: &[usize]) -> Result<SimResult> {
        let mut acc = LabeledTensor::scalar(C64::one());
        let mut projective = false;
        let mut traced = Vec::new();
        for &gi in side {
            let g = &c.gates[gi];
            match g.choi()? {
                Some(t) => acc = acc.link(&t)?,
                None => {
                    if let Gate::TraceOut { wire } = g {
                        traced.push(wire.name.clone());
                    }
                }
            }
            if matches!(g, Gate::Project { .. }) {
                projective = true;
            }
        }
        for name in &traced {
            acc = resolve_deterministic_trace(&acc, name)?;
        }
        Ok(SimResult {
            choi: acc,
            projective,
            traced,
        })
    }
}

/// The temporal circuit realising a tripartite unitary process with the
/// third party's operation fixed: the quantum-controlled-order circuit of
/// the reduced process, with the barred identity channels inserted so that
/// the red/blue fragment split exists.
pub fn tripartite_circuit(
    decomposer: &dyn QcqcDecomposer,
    u_c: &UnitaryBlock,
    u_a: &UnitaryBlock,
    u_b: &UnitaryBlock,
) -> Result<(TemporalCircuit, FragmentSplit)> {
    let comp = decomposer.components(u_c)?;
    let (circuit, blue) = assemble_qcqc(&comp, u_a, u_b, true)?;
    let split = FragmentSplit::from_blue(circuit.gates.len(), &blue);
    Ok((circuit, split))
}

/// Amplitude weight on the discard ancilla being |1⟩ when the preparation
/// ancilla is |0⟩; zero means the final projection is lossless.
pub fn qcqc_f_leak(comp: &QcqcComponents, u_a: &UnitaryBlock, u_b: &UnitaryBlock) -> Result<f64> {
    use wires::*;
    let (circuit, _) = assemble_qcqc(comp, u_a, u_b, false)?;
    // re-simulate with the projection removed
    let gates: Vec<Gate> = circuit
        .gates
        .iter()
        .filter(|g| !matches!(g, Gate::Project { .. }))
        .cloned()
        .collect();
    let open = TemporalCircuit::infer(gates)?;
    let sim = open.simulate_choi()?;
    let leak = sim.choi.slice(F_ANC, 1)?;
    Ok(leak.max_abs())
}

/// Modified circuit in which the named wires are cut: a SWAP routes a fresh
/// ancilla τ_w into the consumer while the original wire leaves on τ̃_w.
/// Re-linking τ̃_w to τ_w (an identity channel) restores the original
/// circuit's Choi exactly.
pub fn disconnect_fragment(
    c: &TemporalCircuit,
    wire_names: &[&str],
) -> Result<TemporalCircuit> {
    let mut gates = c.gates.clone();
    let mut external_in = c.external_in.clone();
    let mut external_out = c.external_out.clone();
    for &w in wire_names {
        // locate the producer position (external inputs produce at -1)
        let dim = gates
            .iter()
            .flat_map(|g| g.out_wires())
            .chain(external_in.iter().cloned())
            .find(|l| l.name == w)
            .map(|l| l.dim)
            .ok_or_else(|| CircuitError::WireNotFound(w.to_string()))?;
        let producer = gates
            .iter()
            .position(|g| g.out_wires().iter().any(|l| l.name == w));
        let insert_at = producer.map(|p| p + 1).unwrap_or(0);
        let cont = format!("{w}#cut");
        let tau = SystemLabel::new(format!("tau_{w}"), dim);
        let tau_tilde = SystemLabel::new(format!("~tau_{w}"), dim);
        // SWAP: (w, τ) → (τ̃ = w, cont = τ)
        let swap = UnitaryBlock::basis_map(
            vec![SystemLabel::new(w, dim), tau.clone()],
            vec![tau_tilde.clone(), SystemLabel::new(&cont, dim)],
            |idx| vec![idx[0], idx[1]],
        )?;
        // downstream consumers read the continuation wire
        for g in gates.iter_mut().skip(insert_at) {
            if g.in_wires().iter().any(|l| l.name == w) {
                *g = g.rename_wire(w, &cont)?;
            }
        }
        for l in external_out.iter_mut() {
            if l.name == w {
                l.name = cont.clone();
            }
        }
        gates.insert(insert_at, Gate::Unitary(swap));
        external_in.push(tau);
        external_out.push(tau_tilde);
    }
    TemporalCircuit::new(gates, external_in, external_out)
}
