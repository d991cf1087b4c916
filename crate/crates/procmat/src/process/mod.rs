//! Process vectors and matrices, the generalised Born rule, unitary
//! extensions, dimension padding and process-matrix validation.
//!
//! A *process vector* |U⟩⟩ is the pure Choi representation of the unitary
//! that defines a unitarily extended process, with a global-past output
//! space and a global-future input space. Closing the past on a fixed state
//! and tracing the future recovers the ordinary process matrix W, which
//! yields outcome probabilities through W ∗ (⊗ₓ Mₓ).

pub mod catalog;

use std::collections::HashMap;

use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

use crate::rng::haar_unitary;
use crate::tensor::{
    mixed_choi, pure_choi, total_dim, LabeledOperator, LabeledTensor, SystemLabel,
    TensorError, UnitaryBlock, C64, DEFAULT_TOL,
};

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("party `{0}` is missing from the process")]
    UnknownParty(String),
    #[error("duplicate party `{0}`")]
    DuplicateParty(String),
    #[error("process vector does not encode a unitary: residual {residual:.3e} > tol {tol:.1e}")]
    NotUnitaryProcess { residual: f64, tol: f64 },
    #[error("instrument for party `{party}` is invalid: {why}")]
    InvalidInstrument { party: String, why: String },
    #[error("labels `{0}` do not match between process and instruments")]
    LabelMismatch(String),
    #[error("past state has dimension {got}, expected {expected}")]
    PastStateShape { got: usize, expected: usize },
    #[error("probability {value:.3e} outside [0,1] beyond tolerance")]
    BadProbability { value: f64 },
}

type Result<T> = std::result::Result<T, ProcessError>;

/// One party of a process: its incoming/outgoing system labels, plus the
/// default ancilla labels used when local operations carry ancillas.
/// After padding, composite in/out spaces are lists of labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PartySpec {
    pub name: String,
    pub in_labels: Vec<SystemLabel>,
    pub out_labels: Vec<SystemLabel>,
    pub anc_in: Option<SystemLabel>,
    pub anc_out: Option<SystemLabel>,
}

impl PartySpec {
    pub fn new(
        name: impl Into<String>,
        in_labels: Vec<SystemLabel>,
        out_labels: Vec<SystemLabel>,
    ) -> Self {
        PartySpec {
            name: name.into(),
            in_labels,
            out_labels,
            anc_in: None,
            anc_out: None,
        }
    }

    /// Party with single qubit in/out labels named `X_I` / `X_O` and qubit
    /// ancilla labels `X_I'` / `X_O'`.
    pub fn qubit(name: &str) -> Self {
        PartySpec {
            name: name.to_string(),
            in_labels: vec![SystemLabel::qubit(format!("{name}_I"))],
            out_labels: vec![SystemLabel::qubit(format!("{name}_O"))],
            anc_in: Some(SystemLabel::qubit(format!("{name}_I'"))),
            anc_out: Some(SystemLabel::qubit(format!("{name}_O'"))),
        }
    }

    pub fn in_dim(&self) -> usize {
        total_dim(&self.in_labels)
    }

    pub fn out_dim(&self) -> usize {
        total_dim(&self.out_labels)
    }

    fn label_names(&self) -> Vec<String> {
        self.in_labels
            .iter()
            .chain(self.out_labels.iter())
            .map(|l| l.name.clone())
            .collect()
    }
}

/// Pure Choi vector of the unitary defining a unitarily extended process,
/// over past ∪ party in/out ∪ future labels. Parties are kept sorted by
/// name; construction verifies the encoded map is unitary.
#[derive(Clone, Debug)]
pub struct ProcessVector {
    tensor: LabeledTensor,
    parties: Vec<PartySpec>,
    past: Vec<SystemLabel>,
    future: Vec<SystemLabel>,
}

impl ProcessVector {
    pub fn new(
        tensor: LabeledTensor,
        mut parties: Vec<PartySpec>,
        past: Vec<SystemLabel>,
        future: Vec<SystemLabel>,
        tol: f64,
    ) -> Result<Self> {
        parties.sort_by(|a, b| a.name.cmp(&b.name));
        for w in parties.windows(2) {
            if w[0].name == w[1].name {
                return Err(ProcessError::DuplicateParty(w[0].name.clone()));
            }
        }
        let pv = ProcessVector {
            tensor,
            parties,
            past,
            future,
        };
        let mut expected: Vec<String> = pv.in_names();
        expected.extend(pv.out_names());
        for name in &expected {
            if !pv.tensor.has_label(name) {
                return Err(ProcessError::LabelMismatch(name.clone()));
            }
        }
        if expected.len() != pv.tensor.rank() {
            return Err(ProcessError::LabelMismatch(String::from("<rank>")));
        }
        let residual = pv.unitarity_residual()?;
        if residual > tol {
            return Err(ProcessError::NotUnitaryProcess { residual, tol });
        }
        Ok(pv)
    }

    pub fn tensor(&self) -> &LabeledTensor {
        &self.tensor
    }

    pub fn parties(&self) -> &[PartySpec] {
        &self.parties
    }

    pub fn party(&self, name: &str) -> Result<&PartySpec> {
        self.parties
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| ProcessError::UnknownParty(name.to_string()))
    }

    pub fn past(&self) -> &[SystemLabel] {
        &self.past
    }

    pub fn future(&self) -> &[SystemLabel] {
        &self.future
    }

    /// Input legs of the encoded unitary: past output ∪ party outputs.
    pub fn in_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.past.iter().map(|l| l.name.clone()).collect();
        for p in &self.parties {
            v.extend(p.out_labels.iter().map(|l| l.name.clone()));
        }
        v
    }

    /// Output legs of the encoded unitary: future input ∪ party inputs.
    pub fn out_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.future.iter().map(|l| l.name.clone()).collect();
        for p in &self.parties {
            v.extend(p.in_labels.iter().map(|l| l.name.clone()));
        }
        v
    }

    pub fn unitarity_residual(&self) -> Result<f64> {
        let ins = self.in_names();
        let outs = self.out_names();
        let in_refs: Vec<&str> = ins.iter().map(|s| s.as_str()).collect();
        let out_refs: Vec<&str> = outs.iter().map(|s| s.as_str()).collect();
        Ok(crate::tensor::encodes_unitary_residual(
            &self.tensor,
            &in_refs,
            &out_refs,
        )?)
    }

    /// The encoded unitary as a matrix block.
    pub fn as_block(&self) -> Result<UnitaryBlock> {
        let ins = self.in_names();
        let outs = self.out_names();
        let in_refs: Vec<&str> = ins.iter().map(|s| s.as_str()).collect();
        let out_refs: Vec<&str> = outs.iter().map(|s| s.as_str()).collect();
        Ok(crate::tensor::choi_to_matrix(
            &self.tensor,
            &in_refs,
            &out_refs,
        )?)
    }
}

/// Process matrix over the parties' in/out spaces; W ⪰ 0 with
/// Tr W = ∏ d_{X_O}.
#[derive(Clone, Debug)]
pub struct ProcessMatrix {
    pub operator: LabeledOperator,
    pub parties: Vec<PartySpec>,
}

impl ProcessMatrix {
    pub fn new(operator: LabeledOperator, mut parties: Vec<PartySpec>) -> Result<Self> {
        parties.sort_by(|a, b| a.name.cmp(&b.name));
        for p in &parties {
            for name in p.label_names() {
                if operator.row_labels.iter().all(|l| l.name != name)
                    || operator.col_labels.iter().all(|l| l.name != name)
                {
                    return Err(ProcessError::LabelMismatch(name));
                }
            }
        }
        Ok(ProcessMatrix { operator, parties })
    }

    pub fn expected_trace(&self) -> f64 {
        self.parties
            .iter()
            .map(|p| p.out_dim() as f64)
            .product()
    }
}

/// A quantum instrument for one party: per-outcome CP-map Chois on
/// X_I ⊗ X_O whose sum is CPTP.
#[derive(Clone, Debug)]
pub struct Instrument {
    pub party: String,
    pub outcomes: Vec<LabeledOperator>,
}

impl Instrument {
    pub fn new(party: impl Into<String>, outcomes: Vec<LabeledOperator>) -> Self {
        Instrument {
            party: party.into(),
            outcomes,
        }
    }

    /// Checks each outcome PSD and the summed Choi trace-preserving:
    /// Tr_{X_O} ΣM = 𝟙^{X_I}.
    pub fn validate(&self, spec: &PartySpec, tol: f64) -> Result<()> {
        let mut sum: Option<LabeledOperator> = None;
        for m in &self.outcomes {
            let lambda_min = m.min_eigenvalue()?;
            if lambda_min < -tol {
                return Err(ProcessError::InvalidInstrument {
                    party: self.party.clone(),
                    why: format!("outcome Choi has eigenvalue {lambda_min:.3e} < 0"),
                });
            }
            sum = Some(match sum {
                None => m.clone(),
                Some(s) => s.add(m)?,
            });
        }
        let sum = sum.ok_or_else(|| ProcessError::InvalidInstrument {
            party: self.party.clone(),
            why: "no outcomes".into(),
        })?;
        let out_names: Vec<&str> = spec.out_labels.iter().map(|l| l.name.as_str()).collect();
        let reduced = sum.partial_trace(&out_names)?;
        let id = LabeledOperator::identity(spec.in_labels.clone())?;
        let residual = reduced.max_diff(&id)?;
        if residual > tol {
            return Err(ProcessError::InvalidInstrument {
                party: self.party.clone(),
                why: format!("sum of CP maps is not trace-preserving (residual {residual:.3e})"),
            });
        }
        Ok(())
    }
}

/// Dense joint-outcome probability table, mixed-radix indexed in party
/// order (parties sorted by name).
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeTable {
    pub parties: Vec<String>,
    pub cardinalities: Vec<usize>,
    pub probs: Vec<f64>,
}

impl OutcomeTable {
    pub fn prob(&self, outcome: &[usize]) -> f64 {
        let mut lin = 0usize;
        for (k, &o) in outcome.iter().enumerate() {
            lin = lin * self.cardinalities[k] + o;
        }
        self.probs[lin]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Generalised Born rule: P(o_A, o_B, …) = W ∗ (⊗ₓ M\[o_X\]).
///
/// Instruments are matched to parties by name; probabilities are checked
/// real, within [−tol, 1+tol], and the table is checked normalised.
pub fn born_rule(
    w: &ProcessMatrix,
    instruments: &[Instrument],
    tol: f64,
) -> Result<OutcomeTable> {
    let mut by_party: HashMap<&str, &Instrument> = HashMap::new();
    for ins in instruments {
        by_party.insert(ins.party.as_str(), ins);
    }
    let mut ordered = Vec::new();
    for p in &w.parties {
        let ins = by_party
            .remove(p.name.as_str())
            .ok_or_else(|| ProcessError::UnknownParty(p.name.clone()))?;
        ins.validate(p, tol.max(1e-8))?;
        ordered.push(ins);
    }
    if let Some((name, _)) = by_party.into_iter().next() {
        return Err(ProcessError::UnknownParty(name.to_string()));
    }

    let cards: Vec<usize> = ordered.iter().map(|i| i.outcomes.len()).collect();
    let total: usize = cards.iter().product();
    let mut probs = Vec::with_capacity(total);
    let mut idx = vec![0usize; cards.len()];
    for _ in 0..total {
        let mut joint: Option<LabeledOperator> = None;
        for (k, ins) in ordered.iter().enumerate() {
            let m = &ins.outcomes[idx[k]];
            joint = Some(match joint {
                None => m.clone(),
                Some(j) => j.tensor(m)?,
            });
        }
        let p = w.operator.link_scalar(&joint.expect("≥1 party"))?;
        if p.im.abs() > tol.max(1e-8) {
            return Err(ProcessError::BadProbability { value: p.im });
        }
        if p.re < -tol || p.re > 1.0 + tol {
            return Err(ProcessError::BadProbability { value: p.re });
        }
        probs.push(p.re);
        for ax in (0..cards.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < cards[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    let table = OutcomeTable {
        parties: w.parties.iter().map(|p| p.name.clone()).collect(),
        cardinalities: cards,
        probs,
    };
    let norm = table.total();
    if (norm - 1.0).abs() > tol.max(1e-8) {
        return Err(ProcessError::BadProbability { value: norm });
    }
    Ok(table)
}

/// Outcome of one validation check.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Report from [`validate_process_matrix`]; `all_passed` is the conjunction.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

impl ValidationReport {
    fn from_checks(checks: Vec<CheckResult>) -> Self {
        let all_passed = checks.iter().all(|c| c.passed);
        ValidationReport { checks, all_passed }
    }
}

/// Positivity, trace = ∏ d_{X_O}, and Born-rule normalisation against
/// `n_samples` random CPTP instruments. The full linear characterisation of
/// valid process matrices is replaced by this sampled normalisation test.
pub fn validate_process_matrix(
    w: &ProcessMatrix,
    n_samples: usize,
    rng: &mut impl Rng,
    tol: f64,
) -> Result<ValidationReport> {
    let mut checks = Vec::new();

    let lambda_min = w.operator.min_eigenvalue()?;
    checks.push(CheckResult {
        name: "positivity".into(),
        passed: lambda_min >= -tol,
        detail: format!("min eigenvalue {lambda_min:.3e}"),
    });

    let trace = w.operator.trace()?;
    let expected = w.expected_trace();
    let trace_ok = (trace.re - expected).abs() <= tol.max(1e-9) && trace.im.abs() <= tol.max(1e-9);
    checks.push(CheckResult {
        name: "trace".into(),
        passed: trace_ok,
        detail: format!("Tr W = {:.6} (expected {expected})", trace.re),
    });

    let mut worst = 0.0f64;
    let mut norm_ok = true;
    for _ in 0..n_samples {
        let mut joint: Option<LabeledOperator> = None;
        for p in &w.parties {
            let m = random_cptp_choi(rng, p)?;
            joint = Some(match joint {
                None => m,
                Some(j) => j.tensor(&m)?,
            });
        }
        let total = w.operator.link_scalar(&joint.expect("≥1 party"))?;
        let dev = (total - C64::one()).norm();
        worst = worst.max(dev);
        if dev > tol.max(1e-8) {
            norm_ok = false;
        }
    }
    checks.push(CheckResult {
        name: "sampled_normalization".into(),
        passed: norm_ok,
        detail: format!("{n_samples} random CPTP instruments, worst |P−1| = {worst:.3e}"),
    });

    Ok(ValidationReport::from_checks(checks))
}

/// Choi of a Haar-random CPTP channel X_I → X_O via a random isometry into
/// an environment of dimension d_{X_I}.
pub fn random_cptp_choi(rng: &mut impl Rng, p: &PartySpec) -> Result<LabeledOperator> {
    let d_in = p.in_dim();
    let d_out = p.out_dim();
    let d_env = d_in;
    let u = haar_unitary(rng, d_out * d_env);
    // isometry = first d_in columns; Kraus K_e = (𝟙⊗⟨e|) V
    let mut kraus = Vec::with_capacity(d_env);
    for e in 0..d_env {
        let mut m = vec![C64::zero(); d_out * d_in];
        for o in 0..d_out {
            for i in 0..d_in {
                m[o * d_in + i] = u[(o * d_env + e, i)];
            }
        }
        kraus.push(UnitaryBlock::new_raw(
            p.in_labels.clone(),
            p.out_labels.clone(),
            m,
        )?);
    }
    Ok(mixed_choi(&kraus)?)
}

/// Fixed state prepared by the global past party.
#[derive(Clone, Debug)]
pub enum PastState {
    /// Pure vector over the past space (promoted internally).
    Pure(Vec<C64>),
    /// Density operator over the past space.
    Mixed(LabeledOperator),
}

impl PastState {
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = vec![C64::zero(); dim];
        v[k] = C64::one();
        PastState::Pure(v)
    }

    /// Decompose into weighted pure components over the past labels.
    fn pure_components(
        &self,
        past: &[SystemLabel],
        tol: f64,
    ) -> Result<Vec<(f64, LabeledTensor)>> {
        let dim = total_dim(past);
        match self {
            PastState::Pure(v) => {
                if v.len() != dim {
                    return Err(ProcessError::PastStateShape {
                        got: v.len(),
                        expected: dim,
                    });
                }
                Ok(vec![(
                    1.0,
                    LabeledTensor::new(past.to_vec(), v.clone())?,
                )])
            }
            PastState::Mixed(rho) => {
                let m = rho.to_dmatrix()?;
                if m.nrows() != dim {
                    return Err(ProcessError::PastStateShape {
                        got: m.nrows(),
                        expected: dim,
                    });
                }
                let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
                let eig = nalgebra::SymmetricEigen::new(herm);
                let mut comps = Vec::new();
                for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
                    if lambda > tol {
                        let col: Vec<C64> = eig.eigenvectors.column(k).iter().copied().collect();
                        comps.push((lambda, LabeledTensor::new(past.to_vec(), col)?));
                    }
                }
                Ok(comps)
            }
        }
    }
}

/// Recover the process matrix from a unitary extension:
/// W = |U⟩⟩⟨⟨U| ∗ (ρ^{P_O} ⊗ 𝟙^{F_I}).
///
/// With `trace_future` unset the future input legs stay open in the
/// operator (the future party keeps a trivial output).
pub fn reduce_unitary_extension(
    u: &ProcessVector,
    past_state: &PastState,
    trace_future: bool,
) -> Result<ProcessMatrix> {
    let comps = past_state.pure_components(u.past(), 1e-12)?;
    let future_names: Vec<String> = u.future().iter().map(|l| l.name.clone()).collect();
    let mut acc: Option<LabeledOperator> = None;
    for (weight, phi) in comps {
        let psi = u.tensor().link(&phi)?;
        let terms: Vec<LabeledTensor> = if trace_future && !future_names.is_empty() {
            slice_all(&psi, &future_names)?
        } else {
            vec![psi]
        };
        for t in terms {
            let term = LabeledOperator::outer(&t).scale(C64::new(weight, 0.0));
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term)?,
            });
        }
    }
    ProcessMatrix::new(acc.expect("≥1 component"), u.parties().to_vec())
}

/// All slices of `t` over every joint assignment of the named legs.
fn slice_all(t: &LabeledTensor, names: &[String]) -> Result<Vec<LabeledTensor>> {
    let mut order: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    for l in t.labels() {
        if !names.contains(&l.name) {
            order.push(l.name.as_str());
        }
    }
    let p = t.permute(&order)?;
    let sliced_dim: usize = names
        .iter()
        .map(|n| t.dim_of(n).expect("label present"))
        .product();
    let rest_labels = p.labels()[names.len()..].to_vec();
    let block = p.len() / sliced_dim;
    let mut out = Vec::with_capacity(sliced_dim);
    for k in 0..sliced_dim {
        out.push(LabeledTensor::new(
            rest_labels.clone(),
            p.amps()[k * block..(k + 1) * block].to_vec(),
        )?);
    }
    Ok(out)
}

/// Compose the process vector with per-party local unitaries
/// (the vector link product): |U_G⟩⟩ = |U⟩⟩ ∗ ⊗ₓ |U_X⟩⟩.
pub fn global_unitary(u: &ProcessVector, locals: &[UnitaryBlock]) -> Result<LabeledTensor> {
    let mut acc = u.tensor().clone();
    for block in locals {
        acc = acc.link(&pure_choi(block)?)?;
    }
    Ok(acc)
}

/// Residual of the defining property of unitary extensions: the global
/// operation (past ⊗ ancilla-ins → future ⊗ ancilla-outs) is unitary.
pub fn global_unitarity_residual(
    u: &ProcessVector,
    locals: &[UnitaryBlock],
) -> Result<f64> {
    let g = global_unitary(u, locals)?;
    let mut ins: Vec<String> = u.past().iter().map(|l| l.name.clone()).collect();
    let mut outs: Vec<String> = u.future().iter().map(|l| l.name.clone()).collect();
    let party_names: Vec<String> = u
        .parties()
        .iter()
        .flat_map(|p| p.label_names())
        .collect();
    for block in locals {
        for l in &block.in_labels {
            if !party_names.contains(&l.name) {
                ins.push(l.name.clone());
            }
        }
        for l in &block.out_labels {
            if !party_names.contains(&l.name) {
                outs.push(l.name.clone());
            }
        }
    }
    let in_refs: Vec<&str> = ins.iter().map(|s| s.as_str()).collect();
    let out_refs: Vec<&str> = outs.iter().map(|s| s.as_str()).collect();
    Ok(crate::tensor::encodes_unitary_residual(
        &g, &in_refs, &out_refs,
    )?)
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(mut a: usize, mut b: usize) -> usize {
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    }
    a / gcd(a, b) * b
}

/// Append identity channels P_X → X̃_I and X̃_O → F_X so that every party
/// ends up with equal total in/out dimension d (the least common multiple
/// of all party dimensions). Already-equal processes are returned unchanged.
pub fn pad_to_equal_dims(u: &ProcessVector) -> Result<ProcessVector> {
    let d = u
        .parties()
        .iter()
        .fold(1usize, |acc, p| lcm(acc, lcm(p.in_dim(), p.out_dim())));
    if u.parties().iter().all(|p| p.in_dim() == d && p.out_dim() == d) {
        return Ok(u.clone());
    }
    let mut tensor = u.tensor().clone();
    let mut parties = u.parties().to_vec();
    let mut past = u.past().to_vec();
    let mut future = u.future().to_vec();
    for p in &mut parties {
        let pad_in = d / p.in_dim();
        let pad_out = d / p.out_dim();
        if pad_in > 1 {
            let tilde = SystemLabel::new(format!("{}~I", p.name), pad_in);
            let past_leg = SystemLabel::new(format!("P_{}", p.name), pad_in);
            tensor = tensor.tensor(&crate::tensor::identity_dket(&past_leg, &tilde)?)?;
            past.push(past_leg);
            p.in_labels.push(tilde);
        }
        if pad_out > 1 {
            let tilde = SystemLabel::new(format!("{}~O", p.name), pad_out);
            let future_leg = SystemLabel::new(format!("F_{}", p.name), pad_out);
            tensor = tensor.tensor(&crate::tensor::identity_dket(&tilde, &future_leg)?)?;
            future.push(future_leg);
            p.out_labels.push(tilde);
        }
    }
    ProcessVector::new(tensor, parties, past, future, DEFAULT_TOL)
}

/// Instrument for a computational-basis measure-and-reprepare strategy:
/// outcome o_X projects the input, and the fixed state |prep⟩ is sent out.
pub fn measure_prepare_instrument(p: &PartySpec, prep: usize) -> Result<Instrument> {
    let d_in = p.in_dim();
    let mut outcomes = Vec::with_capacity(d_in);
    for o in 0..d_in {
        let mut labels = p.in_labels.clone();
        labels.extend(p.out_labels.iter().cloned());
        let mut t = LabeledTensor::zeros(labels)?;
        // |o⟩⟨o| ⊗ |prep⟩⟨prep| as the outer of a basis tensor
        let d_out = p.out_dim();
        let idx = o * d_out + prep;
        let mut amps = vec![C64::zero(); t.len()];
        amps[idx] = C64::one();
        t = LabeledTensor::new(t.labels().to_vec(), amps)?;
        outcomes.push(LabeledOperator::outer(&t));
    }
    Ok(Instrument::new(p.name.clone(), outcomes))
}

/// Single-outcome instrument that discards the input and reprepares |0⟩.
pub fn discard_reprepare_instrument(p: &PartySpec) -> Result<Instrument> {
    let id_in = LabeledOperator::identity(p.in_labels.clone())?;
    let zero = LabeledTensor::new(p.out_labels.clone(), {
        let mut v = vec![C64::zero(); p.out_dim()];
        v[0] = C64::one();
        v
    })?;
    let choi = id_in.tensor(&LabeledOperator::outer(&zero))?;
    Ok(Instrument::new(p.name.clone(), vec![choi]))
}
