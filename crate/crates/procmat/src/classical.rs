//! Classical instruments over named random variables in exact rational
//! arithmetic, the classical counterpart of the link product,
//! classicalization of basis-preserving circuits, and time-delocalised
//! classical variables defined by bijections.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::causality::{Correlation, Q};
use crate::circuit::{Gate, TemporalCircuit};
use crate::tensor::{SystemLabel, UnitaryBlock, C64};

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("variable `{0}` appears more than once")]
    DuplicateVar(String),
    #[error("cardinality mismatch on `{name}`: {left} vs {right}")]
    CardMismatch {
        name: String,
        left: usize,
        right: usize,
    },
    #[error("shared variable `{0}` must be an output of one operand and an input of the other")]
    BadComposition(String),
    #[error("gate {gate} ({what}) is not classical")]
    NotClassical { gate: usize, what: String },
    #[error("table for inputs {0:?} sums to {1}, not 1")]
    NotStochastic(Vec<usize>, String),
    #[error("bijection tables must have equal cardinality products ({0} vs {1})")]
    NotBijective(usize, usize),
    #[error("unknown variable `{0}`")]
    UnknownVar(String),
}

type Result<T> = std::result::Result<T, ClassicalError>;

/// A named random variable with values 0..card.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomVar {
    pub name: String,
    pub card: usize,
}

impl RandomVar {
    pub fn new(name: impl Into<String>, card: usize) -> Self {
        RandomVar {
            name: name.into(),
            card,
        }
    }

    pub fn bit(name: impl Into<String>) -> Self {
        RandomVar::new(name, 2)
    }
}

fn from_label(l: &SystemLabel) -> RandomVar {
    RandomVar::new(l.name.clone(), l.dim)
}

/// Sparse exact-rational table over named variables; the classical
/// counterpart of a labeled tensor. Entries are keyed by one value per
/// variable in declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassicalTable {
    pub vars: Vec<RandomVar>,
    pub entries: BTreeMap<Vec<u16>, Q>,
}

impl ClassicalTable {
    pub fn new(vars: Vec<RandomVar>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for v in &vars {
            if !seen.insert(v.name.clone()) {
                return Err(ClassicalError::DuplicateVar(v.name.clone()));
            }
        }
        Ok(ClassicalTable {
            vars,
            entries: BTreeMap::new(),
        })
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| ClassicalError::UnknownVar(name.to_string()))
    }

    pub fn insert(&mut self, assignment: Vec<u16>, value: Q) {
        if value.is_zero() {
            return;
        }
        debug_assert_eq!(assignment.len(), self.vars.len());
        *self
            .entries
            .entry(assignment)
            .or_insert_with(Q::zero) += value;
    }

    pub fn value(&self, assignment: &[u16]) -> Q {
        self.entries
            .get(assignment)
            .cloned()
            .unwrap_or_else(Q::zero)
    }

    /// Classical link: sum over shared variable names of the product table.
    pub fn link(&self, other: &ClassicalTable) -> Result<ClassicalTable> {
        let shared: Vec<String> = self
            .vars
            .iter()
            .filter(|v| other.vars.iter().any(|w| w.name == v.name))
            .map(|v| v.name.clone())
            .collect();
        for name in &shared {
            let a = &self.vars[self.var_index(name)?];
            let b = &other.vars[other.var_index(name)?];
            if a.card != b.card {
                return Err(ClassicalError::CardMismatch {
                    name: name.clone(),
                    left: a.card,
                    right: b.card,
                });
            }
        }
        let open_self: Vec<usize> = (0..self.vars.len())
            .filter(|&k| !shared.contains(&self.vars[k].name))
            .collect();
        let open_other: Vec<usize> = (0..other.vars.len())
            .filter(|&k| !shared.contains(&other.vars[k].name))
            .collect();
        let shared_self: Vec<usize> = shared
            .iter()
            .map(|n| self.var_index(n).expect("shared var"))
            .collect();
        let shared_other: Vec<usize> = shared
            .iter()
            .map(|n| other.var_index(n).expect("shared var"))
            .collect();

        let mut vars: Vec<RandomVar> = open_self.iter().map(|&k| self.vars[k].clone()).collect();
        vars.extend(open_other.iter().map(|&k| other.vars[k].clone()));
        let mut out = ClassicalTable::new(vars)?;

        // index other's entries by the shared assignment
        let mut buckets: BTreeMap<Vec<u16>, Vec<(&Vec<u16>, &Q)>> = BTreeMap::new();
        for (a, v) in &other.entries {
            let key: Vec<u16> = shared_other.iter().map(|&k| a[k]).collect();
            buckets.entry(key).or_default().push((a, v));
        }
        for (a, v) in &self.entries {
            let key: Vec<u16> = shared_self.iter().map(|&k| a[k]).collect();
            if let Some(matches) = buckets.get(&key) {
                for (b, w) in matches {
                    let mut assignment: Vec<u16> =
                        open_self.iter().map(|&k| a[k]).collect();
                    assignment.extend(open_other.iter().map(|&k| b[k]));
                    out.insert(assignment, v * *w);
                }
            }
        }
        Ok(out)
    }

    /// Sum a variable out.
    pub fn marginalize(&self, name: &str) -> Result<ClassicalTable> {
        let k = self.var_index(name)?;
        let vars: Vec<RandomVar> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, v)| v.clone())
            .collect();
        let mut out = ClassicalTable::new(vars)?;
        for (a, v) in &self.entries {
            let mut b = a.clone();
            b.remove(k);
            out.insert(b, v.clone());
        }
        Ok(out)
    }

    pub fn rename(&self, map: &[(&str, &str)]) -> Result<ClassicalTable> {
        let mut vars = self.vars.clone();
        for &(old, new) in map {
            let k = self.var_index(old)?;
            vars[k].name = new.to_string();
        }
        let mut out = ClassicalTable::new(vars)?;
        for (a, v) in &self.entries {
            out.insert(a.clone(), v.clone());
        }
        Ok(out)
    }
}

/// A classical instrument: a conditional probability table P(out | in)
/// over named input and output variables (classical outcomes are output
/// variables like any other).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassicalInstrument {
    pub table: ClassicalTable,
    pub in_vars: Vec<String>,
    pub out_vars: Vec<String>,
}

impl ClassicalInstrument {
    pub fn new(
        table: ClassicalTable,
        in_vars: Vec<String>,
        out_vars: Vec<String>,
    ) -> Result<Self> {
        for name in in_vars.iter().chain(out_vars.iter()) {
            table.var_index(name)?;
        }
        Ok(ClassicalInstrument {
            table,
            in_vars,
            out_vars,
        })
    }

    /// Every entry nonnegative and every input row summing to one.
    pub fn check_stochastic(&self) -> Result<()> {
        let idx: Vec<usize> = self
            .in_vars
            .iter()
            .map(|n| self.table.var_index(n).expect("validated"))
            .collect();
        let mut rows: BTreeMap<Vec<u16>, Q> = BTreeMap::new();
        for (a, v) in &self.table.entries {
            let key: Vec<u16> = idx.iter().map(|&k| a[k]).collect();
            *rows.entry(key).or_insert_with(Q::zero) += v;
        }
        let n_rows: usize = self
            .in_vars
            .iter()
            .map(|n| self.table.vars[self.table.var_index(n).unwrap()].card)
            .product();
        if rows.len() != n_rows || rows.values().any(|v| !v.is_one()) {
            let bad = rows
                .iter()
                .find(|(_, v)| !v.is_one())
                .map(|(k, v)| (k.clone(), v.to_string()))
                .unwrap_or((vec![], "<missing row>".into()));
            return Err(ClassicalError::NotStochastic(
                bad.0.iter().map(|&x| x as usize).collect(),
                bad.1,
            ));
        }
        Ok(())
    }

    /// Deterministic instrument from a function of the input assignment.
    pub fn deterministic(
        in_vars: Vec<RandomVar>,
        out_vars: Vec<RandomVar>,
        f: impl Fn(&[u16]) -> Vec<u16>,
    ) -> Result<Self> {
        let in_names: Vec<String> = in_vars.iter().map(|v| v.name.clone()).collect();
        let out_names: Vec<String> = out_vars.iter().map(|v| v.name.clone()).collect();
        let mut vars = in_vars.clone();
        vars.extend(out_vars.iter().cloned());
        let mut table = ClassicalTable::new(vars)?;
        let cards: Vec<usize> = in_vars.iter().map(|v| v.card).collect();
        let n: usize = cards.iter().product();
        let mut digits = vec![0u16; in_vars.len()];
        for _ in 0..n.max(1) {
            let out = f(&digits);
            debug_assert_eq!(out.len(), out_vars.len());
            let mut assignment = digits.clone();
            assignment.extend(out);
            table.insert(assignment, Q::one());
            for ax in (0..digits.len()).rev() {
                digits[ax] += 1;
                if (digits[ax] as usize) < cards[ax] {
                    break;
                }
                digits[ax] = 0;
            }
        }
        ClassicalInstrument::new(table, in_names, out_names)
    }

    /// Compose with another instrument over the shared variables (the
    /// classical counterpart of the link product): shared names must flow
    /// out of one operand and into the other.
    pub fn link(&self, other: &ClassicalInstrument) -> Result<ClassicalInstrument> {
        for v in &self.table.vars {
            if other.table.vars.iter().any(|w| w.name == v.name) {
                let fwd = self.out_vars.contains(&v.name) && other.in_vars.contains(&v.name);
                let bwd = self.in_vars.contains(&v.name) && other.out_vars.contains(&v.name);
                if !fwd && !bwd {
                    return Err(ClassicalError::BadComposition(v.name.clone()));
                }
            }
        }
        let table = self.table.link(&other.table)?;
        let shared: Vec<String> = self
            .table
            .vars
            .iter()
            .filter(|v| other.table.vars.iter().any(|w| w.name == v.name))
            .map(|v| v.name.clone())
            .collect();
        let mut in_vars: Vec<String> = self
            .in_vars
            .iter()
            .chain(other.in_vars.iter())
            .filter(|n| !shared.contains(n))
            .cloned()
            .collect();
        in_vars.dedup();
        let out_vars: Vec<String> = self
            .out_vars
            .iter()
            .chain(other.out_vars.iter())
            .filter(|n| !shared.contains(n))
            .cloned()
            .collect();
        ClassicalInstrument::new(table, in_vars, out_vars)
    }
}

/// Returns the permutation carried by a basis-preserving block: column i is
/// the computational basis vector `|perm[i]⟩`. Unitaries with phases or
/// superpositions return `None`.
pub fn is_basis_preserving(u: &UnitaryBlock, tol: f64) -> Option<Vec<usize>> {
    let n = u.in_dim();
    let m = u.out_dim();
    if n != m {
        return None;
    }
    let one = C64::new(1.0, 0.0);
    let mut perm = vec![0usize; n];
    for col in 0..n {
        let mut hit = None;
        for row in 0..m {
            let v = u.matrix[row * n + col];
            if (v - one).norm() <= tol {
                if hit.is_some() {
                    return None;
                }
                hit = Some(row);
            } else if v.norm() > tol {
                return None;
            }
        }
        perm[col] = hit?;
    }
    Some(perm)
}

/// A bijection between assignment sets of two variable lists, stored as
/// the forward map on linear indices (domain order → codomain order).
#[derive(Clone, Debug)]
pub struct Bijection {
    pub domain: Vec<RandomVar>,
    pub codomain: Vec<RandomVar>,
    pub map: Vec<usize>,
}

impl Bijection {
    pub fn new(
        domain: Vec<RandomVar>,
        codomain: Vec<RandomVar>,
        map: Vec<usize>,
    ) -> Result<Self> {
        let nd: usize = domain.iter().map(|v| v.card).product();
        let nc: usize = codomain.iter().map(|v| v.card).product();
        if nd != nc || map.len() != nd {
            return Err(ClassicalError::NotBijective(nd, nc));
        }
        let mut seen = vec![false; nd];
        for &t in &map {
            if t >= nd || seen[t] {
                return Err(ClassicalError::NotBijective(nd, nc));
            }
            seen[t] = true;
        }
        Ok(Bijection {
            domain,
            codomain,
            map,
        })
    }

    /// From a basis-preserving block: domain variables are the block's
    /// inputs, codomain its outputs.
    pub fn from_block(u: &UnitaryBlock, tol: f64) -> Option<Self> {
        let perm = is_basis_preserving(u, tol)?;
        Bijection::new(
            u.in_labels.iter().map(from_label).collect(),
            u.out_labels.iter().map(from_label).collect(),
            perm,
        )
        .ok()
    }

    pub fn inverse(&self) -> Bijection {
        let mut inv = vec![0usize; self.map.len()];
        for (s, &t) in self.map.iter().enumerate() {
            inv[t] = s;
        }
        Bijection {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            map: inv,
        }
    }

    fn lin(vars: &[RandomVar], digits: &[u16]) -> usize {
        vars.iter()
            .zip(digits)
            .fold(0usize, |acc, (v, &d)| acc * v.card + d as usize)
    }

    fn digits(vars: &[RandomVar], mut lin: usize) -> Vec<u16> {
        let mut out = vec![0u16; vars.len()];
        for k in (0..vars.len()).rev() {
            out[k] = (lin % vars[k].card) as u16;
            lin /= vars[k].card;
        }
        out
    }

    pub fn apply(&self, digits: &[u16]) -> Vec<u16> {
        let lin = Self::lin(&self.domain, digits);
        Self::digits(&self.codomain, self.map[lin])
    }
}

/// Gate-wise classicalization of a basis-preserving circuit into
/// deterministic instruments; the offending gate is named otherwise.
pub fn classicalize(c: &TemporalCircuit, tol: f64) -> Result<Vec<ClassicalInstrument>> {
    let mut out = Vec::new();
    for (gi, g) in c.gates.iter().enumerate() {
        let inst = match g {
            Gate::Unitary(b) => {
                let bij =
                    Bijection::from_block(b, tol).ok_or_else(|| ClassicalError::NotClassical {
                        gate: gi,
                        what: format!("{b:?}"),
                    })?;
                ClassicalInstrument::deterministic(
                    bij.domain.clone(),
                    bij.codomain.clone(),
                    |digits| bij.apply(digits),
                )?
            }
            Gate::ControlledPair {
                branch0,
                branch1,
                control_in,
                control_out,
            } => {
                let b0 = Bijection::from_block(branch0, tol);
                let b1 = Bijection::from_block(branch1, tol);
                let (Some(b0), Some(b1)) = (b0, b1) else {
                    return Err(ClassicalError::NotClassical {
                        gate: gi,
                        what: "controlled pair with non-basis-preserving branch".into(),
                    });
                };
                // wire order of branch1 may differ; align on names
                let order: Vec<usize> = b0
                    .domain
                    .iter()
                    .map(|v| {
                        b1.domain
                            .iter()
                            .position(|w| w.name == v.name)
                            .expect("same wires")
                    })
                    .collect();
                let out_order: Vec<usize> = b0
                    .codomain
                    .iter()
                    .map(|v| {
                        b1.codomain
                            .iter()
                            .position(|w| w.name == v.name)
                            .expect("same wires")
                    })
                    .collect();
                let mut in_vars = b0.domain.clone();
                in_vars.push(from_label(control_in));
                let mut out_vars = b0.codomain.clone();
                out_vars.push(from_label(control_out));
                let b1c = b1.clone();
                ClassicalInstrument::deterministic(in_vars, out_vars, move |digits| {
                    let ctrl = digits[digits.len() - 1];
                    let data = &digits[..digits.len() - 1];
                    let mut res = if ctrl == 0 {
                        b0.apply(data)
                    } else {
                        let permuted: Vec<u16> = order.iter().map(|&k| data[k]).collect();
                        let raw = b1c.apply(&permuted);
                        // raw is in b1's codomain order; restore b0's
                        out_order.iter().map(|&k| raw[k]).collect()
                    };
                    res.push(ctrl);
                    res
                })?
            }
            Gate::Prepare { wire, state } => {
                let k = basis_index(state, tol).ok_or(ClassicalError::NotClassical {
                    gate: gi,
                    what: "non-basis preparation".into(),
                })?;
                ClassicalInstrument::deterministic(vec![], vec![from_label(wire)], move |_| {
                    vec![k as u16]
                })?
            }
            Gate::Project { wire, state } => {
                let k = basis_index(state, tol).ok_or(ClassicalError::NotClassical {
                    gate: gi,
                    what: "non-basis projection".into(),
                })?;
                // 0/1 filter: keeps only assignments matching the projector
                let mut table = ClassicalTable::new(vec![from_label(wire)])?;
                table.insert(vec![k as u16], Q::one());
                ClassicalInstrument::new(table, vec![wire.name.clone()], vec![])?
            }
            Gate::TraceOut { wire } => ClassicalInstrument::deterministic(
                vec![from_label(wire)],
                vec![],
                |_| vec![],
            )?,
        };
        out.push(inst);
    }
    Ok(out)
}

fn basis_index(state: &[C64], tol: f64) -> Option<usize> {
    let mut hit = None;
    for (k, v) in state.iter().enumerate() {
        if (v - C64::new(1.0, 0.0)).norm() <= tol {
            if hit.is_some() {
                return None;
            }
            hit = Some(k);
        } else if v.norm() > tol {
            return None;
        }
    }
    hit
}

/// Compose a classicalized circuit into one instrument.
pub fn compose_circuit(instruments: &[ClassicalInstrument]) -> Result<ClassicalInstrument> {
    let mut acc: Option<ClassicalInstrument> = None;
    for inst in instruments {
        acc = Some(match acc {
            None => inst.clone(),
            Some(a) => a.link(inst)?,
        });
    }
    acc.ok_or(ClassicalError::NotClassical {
        gate: 0,
        what: "empty circuit".into(),
    })
}

/// Change a fragment's description to time-delocalised variables: inputs
/// are re-expressed through `j_in` (new variables → old inputs) and outputs
/// through `j_out` (old outputs → new variables), by Kronecker-δ
/// composition. Variables outside the bijections pass through.
pub fn delocalized_rewrite_classical(
    red: &ClassicalInstrument,
    j_in: &Bijection,
    j_out: &Bijection,
) -> Result<ClassicalInstrument> {
    // validate signatures
    for v in &j_in.codomain {
        let k = red.table.var_index(&v.name)?;
        if red.table.vars[k].card != v.card {
            return Err(ClassicalError::CardMismatch {
                name: v.name.clone(),
                left: red.table.vars[k].card,
                right: v.card,
            });
        }
        if !red.in_vars.contains(&v.name) {
            return Err(ClassicalError::BadComposition(v.name.clone()));
        }
    }
    for v in &j_out.domain {
        red.table.var_index(&v.name)?;
        if !red.out_vars.contains(&v.name) {
            return Err(ClassicalError::BadComposition(v.name.clone()));
        }
    }
    let j_in_inv = j_in.inverse();
    let in_cod_idx: Vec<usize> = j_in
        .codomain
        .iter()
        .map(|v| red.table.var_index(&v.name).expect("validated"))
        .collect();
    let out_dom_idx: Vec<usize> = j_out
        .domain
        .iter()
        .map(|v| red.table.var_index(&v.name).expect("validated"))
        .collect();

    let mut vars: Vec<RandomVar> = Vec::new();
    let mut passthrough: Vec<usize> = Vec::new();
    for (k, v) in red.table.vars.iter().enumerate() {
        if !in_cod_idx.contains(&k) && !out_dom_idx.contains(&k) {
            vars.push(v.clone());
            passthrough.push(k);
        }
    }
    let base_len = vars.len();
    vars.extend(j_in.domain.iter().cloned());
    vars.extend(j_out.codomain.iter().cloned());
    let mut table = ClassicalTable::new(vars)?;
    for (a, v) in &red.table.entries {
        let old_in: Vec<u16> = in_cod_idx.iter().map(|&k| a[k]).collect();
        let new_in = j_in_inv.apply(&old_in);
        let old_out: Vec<u16> = out_dom_idx.iter().map(|&k| a[k]).collect();
        let new_out = j_out.apply(&old_out);
        let mut assignment: Vec<u16> = passthrough.iter().map(|&k| a[k]).collect();
        assignment.extend(new_in);
        assignment.extend(new_out);
        debug_assert_eq!(assignment.len(), base_len + j_in.domain.len() + j_out.codomain.len());
        table.insert(assignment, v.clone());
    }
    let mut in_vars: Vec<String> = red
        .in_vars
        .iter()
        .filter(|n| !j_in.codomain.iter().any(|v| &v.name == *n))
        .cloned()
        .collect();
    in_vars.extend(j_in.domain.iter().map(|v| v.name.clone()));
    let mut out_vars: Vec<String> = red
        .out_vars
        .iter()
        .filter(|n| !j_out.domain.iter().any(|v| &v.name == *n))
        .cloned()
        .collect();
    out_vars.extend(j_out.codomain.iter().map(|v| v.name.clone()));
    ClassicalInstrument::new(table, in_vars, out_vars)
}

/// The deterministic channel of the classical noncausal process:
/// P(a_I,b_I,c_I|a_O,b_O,c_O) = δ_{a_I,¬b_O∧c_O} δ_{b_I,¬c_O∧a_O} δ_{c_I,¬a_O∧b_O}.
pub fn af_channel() -> ClassicalInstrument {
    ClassicalInstrument::deterministic(
        vec![
            RandomVar::bit("A_O"),
            RandomVar::bit("B_O"),
            RandomVar::bit("C_O"),
        ],
        vec![
            RandomVar::bit("A_I"),
            RandomVar::bit("B_I"),
            RandomVar::bit("C_I"),
        ],
        |d| {
            let (a, b, c) = (d[0], d[1], d[2]);
            vec![(1 - b) & c, (1 - c) & a, (1 - a) & b]
        },
    )
    .expect("delta table")
}

/// The measure-and-reprepare strategy as a classical instrument with the
/// setting as an explicit input variable:
/// P(x_O, o_X | x_I, i_X) = δ_{o_X, x_I} δ_{x_O, i_X}.
pub fn ci_strategy_classical(party: &str) -> ClassicalInstrument {
    ClassicalInstrument::deterministic(
        vec![
            RandomVar::bit(format!("{party}_I")),
            RandomVar::bit(format!("i_{party}")),
        ],
        vec![
            RandomVar::bit(format!("{party}_O")),
            RandomVar::bit(format!("o_{party}")),
        ],
        |d| vec![d[1], d[0]],
    )
    .expect("delta table")
}

/// P(o_A,o_B,o_C | i_A,i_B,i_C) from composing the deterministic channel
/// with per-party classical strategies, summed over the process variables.
pub fn bw_classical_correlation(
    strategies: &[ClassicalInstrument; 3],
) -> Result<Correlation> {
    let mut acc = af_channel();
    for s in strategies.iter() {
        acc = acc.link(s)?;
    }
    instrument_to_correlation(
        &acc,
        &["i_A", "i_B", "i_C"],
        &["o_A", "o_B", "o_C"],
    )
}

/// Read a correlation table off an instrument over binary setting/outcome
/// variables in the given order.
pub fn instrument_to_correlation(
    inst: &ClassicalInstrument,
    inputs: &[&str],
    outputs: &[&str],
) -> Result<Correlation> {
    let in_idx: Vec<usize> = inputs
        .iter()
        .map(|n| inst.table.var_index(n))
        .collect::<Result<_>>()?;
    let out_idx: Vec<usize> = outputs
        .iter()
        .map(|n| inst.table.var_index(n))
        .collect::<Result<_>>()?;
    let in_cards: Vec<usize> = in_idx.iter().map(|&k| inst.table.vars[k].card).collect();
    let out_cards: Vec<usize> = out_idx.iter().map(|&k| inst.table.vars[k].card).collect();
    let n_in: usize = in_cards.iter().product();
    let n_out: usize = out_cards.iter().product();
    let mut probs = vec![Q::zero(); n_in * n_out];
    for (a, v) in &inst.table.entries {
        let i = in_idx
            .iter()
            .zip(&in_cards)
            .fold(0usize, |acc, (&k, &c)| acc * c + a[k] as usize);
        let o = out_idx
            .iter()
            .zip(&out_cards)
            .fold(0usize, |acc, (&k, &c)| acc * c + a[k] as usize);
        probs[i * n_out + o] += v;
    }
    Correlation::new(in_cards, out_cards, probs)
        .map_err(|e| ClassicalError::NotStochastic(vec![], e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causality::{q_int, q_ratio};

    fn bit(name: &str) -> RandomVar {
        RandomVar::bit(name)
    }

    #[test]
    fn identity_composition_is_identity() {
        let id1 = ClassicalInstrument::deterministic(
            vec![bit("x")],
            vec![bit("y")],
            |d| d.to_vec(),
        )
        .unwrap();
        let id2 = ClassicalInstrument::deterministic(
            vec![bit("y")],
            vec![bit("z")],
            |d| d.to_vec(),
        )
        .unwrap();
        let comp = id1.link(&id2).unwrap();
        let expect = ClassicalInstrument::deterministic(
            vec![bit("x")],
            vec![bit("z")],
            |d| d.to_vec(),
        )
        .unwrap();
        assert_eq!(comp.table.entries, expect.table.entries);
    }

    #[test]
    fn not_after_not_is_identity() {
        let n1 = ClassicalInstrument::deterministic(vec![bit("x")], vec![bit("y")], |d| {
            vec![1 - d[0]]
        })
        .unwrap();
        let n2 = ClassicalInstrument::deterministic(vec![bit("y")], vec![bit("z")], |d| {
            vec![1 - d[0]]
        })
        .unwrap();
        let comp = n1.link(&n2).unwrap();
        for x in 0..2u16 {
            assert!(comp.table.value(&[x, x]).is_one());
        }
    }

    #[test]
    fn af_channel_with_ci_strategies_gives_delta_correlation() {
        let strategies = [
            ci_strategy_classical("A"),
            ci_strategy_classical("B"),
            ci_strategy_classical("C"),
        ];
        let c = bw_classical_correlation(&strategies).unwrap();
        let expect = Correlation::deterministic(3, |i| {
            vec![(1 - i[1]) & i[2], (1 - i[2]) & i[0], (1 - i[0]) & i[1]]
        });
        assert_eq!(c, expect);
    }

    #[test]
    fn constant_strategies_give_product_correlation() {
        let constant = |p: &str| {
            ClassicalInstrument::deterministic(
                vec![bit(&format!("{p}_I")), bit(&format!("i_{p}"))],
                vec![bit(&format!("{p}_O")), bit(&format!("o_{p}"))],
                |_| vec![0, 1],
            )
            .unwrap()
        };
        let c = bw_classical_correlation(&[constant("A"), constant("B"), constant("C")])
            .unwrap();
        for i in 0..8usize {
            let digits = [(i >> 2) & 1, (i >> 1) & 1, i & 1];
            assert!(c.prob(&digits, &[1, 1, 1]).is_one());
        }
    }

    #[test]
    fn uniformly_random_outputs_give_uniform_correlation() {
        let coin = |p: &str| {
            let mut table = ClassicalTable::new(vec![
                bit(&format!("{p}_I")),
                bit(&format!("i_{p}")),
                bit(&format!("{p}_O")),
                bit(&format!("o_{p}")),
            ])
            .unwrap();
            for x_i in 0..2u16 {
                for i in 0..2u16 {
                    for o in 0..2u16 {
                        // output to the process fixed, outcome uniform
                        table.insert(vec![x_i, i, i, o], q_ratio(1, 2));
                    }
                }
            }
            ClassicalInstrument::new(
                table,
                vec![format!("{p}_I"), format!("i_{p}")],
                vec![format!("{p}_O"), format!("o_{p}")],
            )
            .unwrap()
        };
        let c = bw_classical_correlation(&[coin("A"), coin("B"), coin("C")]).unwrap();
        for p in &c.probs {
            assert_eq!(p.clone(), q_ratio(1, 8));
        }
    }

    #[test]
    fn basis_preserving_detection() {
        let not = UnitaryBlock::basis_map(
            vec![SystemLabel::qubit("a")],
            vec![SystemLabel::qubit("b")],
            |i| vec![1 - i[0]],
        )
        .unwrap();
        assert_eq!(is_basis_preserving(&not, 1e-12), Some(vec![1, 0]));
        let h = UnitaryBlock::new_raw(
            vec![SystemLabel::qubit("a")],
            vec![SystemLabel::qubit("b")],
            vec![
                C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                C64::new(-std::f64::consts::FRAC_1_SQRT_2, 0.0),
            ],
        )
        .unwrap();
        assert!(is_basis_preserving(&h, 1e-12).is_none());
    }

    #[test]
    fn deterministic_tables_are_zero_one_and_stochastic() {
        let inst = ClassicalInstrument::deterministic(
            vec![bit("x"), bit("y")],
            vec![bit("z")],
            |d| vec![d[0] ^ d[1]],
        )
        .unwrap();
        inst.check_stochastic().unwrap();
        for v in inst.table.entries.values() {
            assert!(v.is_one());
        }
    }

    #[test]
    fn classicalize_rejects_hadamard() {
        let h = UnitaryBlock::new_raw(
            vec![SystemLabel::qubit("a")],
            vec![SystemLabel::qubit("b")],
            vec![
                C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                C64::new(-std::f64::consts::FRAC_1_SQRT_2, 0.0),
            ],
        )
        .unwrap();
        let c = TemporalCircuit::infer(vec![Gate::Unitary(h)]).unwrap();
        assert!(matches!(
            classicalize(&c, 1e-10),
            Err(ClassicalError::NotClassical { gate: 0, .. })
        ));
    }

    #[test]
    fn rewrite_with_identity_bijections_is_unchanged() {
        let inst = ClassicalInstrument::deterministic(
            vec![bit("x")],
            vec![bit("z")],
            |d| vec![1 - d[0]],
        )
        .unwrap();
        let j_in = Bijection::new(vec![bit("x'")], vec![bit("x")], vec![0, 1]).unwrap();
        let j_out = Bijection::new(vec![bit("z")], vec![bit("z'")], vec![0, 1]).unwrap();
        let rewritten = delocalized_rewrite_classical(&inst, &j_in, &j_out).unwrap();
        assert_eq!(rewritten.table.value(&[0, 1]), q_int(1));
        assert_eq!(rewritten.table.value(&[1, 0]), q_int(1));
    }

    #[test]
    fn rewrite_round_trip_with_inverse_bijections() {
        let inst = ClassicalInstrument::deterministic(
            vec![bit("a"), bit("b")],
            vec![bit("c")],
            |d| vec![d[0] & d[1]],
        )
        .unwrap();
        // a random-ish bijection on the inputs
        let j_in_inv = Bijection::new(
            vec![bit("a"), bit("b")],
            vec![bit("u"), bit("v")],
            vec![2, 0, 3, 1],
        )
        .unwrap();
        let j_in = j_in_inv.inverse();
        let j_out = Bijection::new(vec![bit("c")], vec![bit("w")], vec![1, 0]).unwrap();
        let rewritten = delocalized_rewrite_classical(&inst, &j_in, &j_out).unwrap();
        let back = delocalized_rewrite_classical(&rewritten, &j_in.inverse(), &j_out.inverse())
            .unwrap();
        assert_eq!(back.table.entries, inst.table.entries);
    }

    #[test]
    fn classical_link_matches_diagonal_choi_link() {
        // encode deterministic instruments as diagonal Chois and compare
        use crate::tensor::{LabeledOperator, LabeledTensor};
        let f1 = |x: u16| -> u16 { 1 - x };
        let f2 = |x: u16| -> u16 { x };
        let i1 = ClassicalInstrument::deterministic(vec![bit("x")], vec![bit("y")], |d| {
            vec![f1(d[0])]
        })
        .unwrap();
        let i2 = ClassicalInstrument::deterministic(vec![bit("y")], vec![bit("z")], |d| {
            vec![f2(d[0])]
        })
        .unwrap();
        let classical = i1.link(&i2).unwrap();

        let choi = |f: &dyn Fn(u16) -> u16, a: &str, b: &str| -> LabeledOperator {
            let mut acc: Option<LabeledOperator> = None;
            for x in 0..2u16 {
                let t = LabeledTensor::basis_ket(SystemLabel::qubit(a), x as usize)
                    .unwrap()
                    .tensor(
                        &LabeledTensor::basis_ket(SystemLabel::qubit(b), f(x) as usize).unwrap(),
                    )
                    .unwrap();
                let term = LabeledOperator::outer(&t);
                acc = Some(match acc {
                    None => term,
                    Some(s) => s.add(&term).unwrap(),
                });
            }
            acc.unwrap()
        };
        let m = choi(&f1, "x", "y").link(&choi(&f2, "y", "z")).unwrap();
        for x in 0..2usize {
            for z in 0..2usize {
                let idx = (x * 2 + z) * 4 + (x * 2 + z);
                let quantum = m.entries[idx].re;
                let classical_p = classical.table.value(&[x as u16, z as u16]);
                assert_eq!(quantum, if classical_p.is_one() { 1.0 } else { 0.0 });
            }
        }
    }
}
