//! Correlations in exact rational arithmetic, causal inequalities, the
//! causal polytope (deterministic vertex enumeration and exact membership),
//! and strict-partial-order utilities for causal-structure bookkeeping.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Q = BigRational;

pub fn q_int(v: i64) -> Q {
    BigRational::from_integer(BigInt::from(v))
}

pub fn q_ratio(num: i64, den: i64) -> Q {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Error)]
pub enum CausalityError {
    #[error("correlation shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("probabilities must be nonnegative (entry {0})")]
    NegativeProbability(usize),
    #[error("probabilities for input {0} sum to {1}, not 1")]
    NotNormalized(usize, String),
    #[error("party count {0} unsupported here (need 1..=3, binary)")]
    UnsupportedArity(usize),
    #[error("relation is not irreflexive at `{0}`")]
    NotIrreflexive(String),
    #[error("relation is not transitive at `{0}` ≺ `{1}` ≺ `{2}`")]
    NotTransitive(String, String, String),
    #[error("element `{0}` missing from the ground set")]
    MissingElement(String),
}

type Result<T> = std::result::Result<T, CausalityError>;

/// Conditional probability table P(o⃗ | i⃗) in exact rationals, stored
/// row-major as [joint input][joint output].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Correlation {
    pub in_cards: Vec<usize>,
    pub out_cards: Vec<usize>,
    pub probs: Vec<Q>,
}

impl Correlation {
    pub fn new(in_cards: Vec<usize>, out_cards: Vec<usize>, probs: Vec<Q>) -> Result<Self> {
        let n_in: usize = in_cards.iter().product();
        let n_out: usize = out_cards.iter().product();
        if probs.len() != n_in * n_out {
            return Err(CausalityError::ShapeMismatch(format!(
                "{} entries for {}x{}",
                probs.len(),
                n_in,
                n_out
            )));
        }
        for (k, p) in probs.iter().enumerate() {
            if p.is_negative() {
                return Err(CausalityError::NegativeProbability(k));
            }
        }
        let c = Correlation {
            in_cards,
            out_cards,
            probs,
        };
        for i in 0..n_in {
            let total: Q = (0..n_out).map(|o| c.probs[i * n_out + o].clone()).sum();
            if !total.is_one() {
                return Err(CausalityError::NotNormalized(i, total.to_string()));
            }
        }
        Ok(c)
    }

    pub fn parties(&self) -> usize {
        self.in_cards.len()
    }

    pub fn n_in(&self) -> usize {
        self.in_cards.iter().product()
    }

    pub fn n_out(&self) -> usize {
        self.out_cards.iter().product()
    }

    pub fn binary(parties: usize, probs: Vec<Q>) -> Result<Self> {
        Correlation::new(vec![2; parties], vec![2; parties], probs)
    }

    pub fn uniform(parties: usize) -> Self {
        let n = 1usize << parties;
        let p = Q::new(BigInt::one(), BigInt::from(n as i64));
        Correlation {
            in_cards: vec![2; parties],
            out_cards: vec![2; parties],
            probs: vec![p; n * n],
        }
    }

    /// Deterministic correlation o⃗ = f(i⃗) for binary settings/outcomes.
    pub fn deterministic(parties: usize, f: impl Fn(&[usize]) -> Vec<usize>) -> Self {
        let n = 1usize << parties;
        let mut probs = vec![Q::zero(); n * n];
        for i in 0..n {
            let digits: Vec<usize> = (0..parties).map(|k| (i >> (parties - 1 - k)) & 1).collect();
            let o = f(&digits);
            let o_lin = o.iter().fold(0usize, |acc, &b| acc * 2 + b);
            probs[i * n + o_lin] = Q::one();
        }
        Correlation {
            in_cards: vec![2; parties],
            out_cards: vec![2; parties],
            probs,
        }
    }

    pub fn prob(&self, inputs: &[usize], outputs: &[usize]) -> &Q {
        let i = inputs
            .iter()
            .zip(&self.in_cards)
            .fold(0usize, |acc, (&v, &c)| acc * c + v);
        let o = outputs
            .iter()
            .zip(&self.out_cards)
            .fold(0usize, |acc, (&v, &c)| acc * c + v);
        &self.probs[i * self.n_out() + o]
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().all(|p| p.is_zero() || p.is_one())
    }

    /// Support bitmask for deterministic binary tables up to 3 parties
    /// (≤64 cells): bit `i·2ᵏ + o` marks P(o⃗|i⃗) = 1.
    pub fn bitmask(&self) -> Option<u64> {
        if self.probs.len() > 64 || !self.is_deterministic() {
            return None;
        }
        let mut mask = 0u64;
        for (k, p) in self.probs.iter().enumerate() {
            if p.is_one() {
                mask |= 1 << k;
            }
        }
        Some(mask)
    }

    /// Convex combination with exact weights.
    pub fn mix(parts: &[(Q, &Correlation)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| CausalityError::ShapeMismatch("empty mixture".into()))?
            .1;
        let mut probs = vec![Q::zero(); first.probs.len()];
        for (w, c) in parts {
            if c.probs.len() != probs.len() {
                return Err(CausalityError::ShapeMismatch("mixture arity".into()));
            }
            for (acc, p) in probs.iter_mut().zip(&c.probs) {
                *acc += w * p;
            }
        }
        Correlation::new(first.in_cards.clone(), first.out_cards.clone(), probs)
    }
}

/// Linear functional Σ coeff · P(o⃗|i⃗) ≥ bound over a correlation table.
#[derive(Clone, Debug)]
pub struct CausalInequality {
    pub parties: usize,
    /// (inputs, outputs, coefficient)
    pub terms: Vec<(Vec<usize>, Vec<usize>, Q)>,
    pub bound: Q,
}

/// Σ coeff·P − bound, exact.
pub fn eval_inequality(c: &Correlation, q: &CausalInequality) -> Result<Q> {
    if c.parties() != q.parties {
        return Err(CausalityError::ShapeMismatch(format!(
            "{} parties vs {}",
            c.parties(),
            q.parties
        )));
    }
    let mut acc = -q.bound.clone();
    for (i, o, w) in &q.terms {
        acc += w * c.prob(i, o);
    }
    Ok(acc)
}

/// The seven-term tripartite causal inequality used as the violation
/// witness: P(000|001) + P(001|001) + P(000|100) + P(100|100) + P(000|010)
/// + P(010|010) − P(000|000) ≥ 0.
pub fn make_i1() -> CausalInequality {
    let t = |i: [usize; 3], o: [usize; 3], w: i64| (i.to_vec(), o.to_vec(), q_int(w));
    CausalInequality {
        parties: 3,
        terms: vec![
            t([0, 0, 1], [0, 0, 0], 1),
            t([0, 0, 1], [0, 0, 1], 1),
            t([1, 0, 0], [0, 0, 0], 1),
            t([1, 0, 0], [1, 0, 0], 1),
            t([0, 1, 0], [0, 0, 0], 1),
            t([0, 1, 0], [0, 1, 0], 1),
            t([0, 0, 0], [0, 0, 0], -1),
        ],
        bound: Q::zero(),
    }
}

/// Deterministic causal strategy: one party goes first with a deterministic
/// response, and for each of its input values the remaining parties follow
/// with a deterministic causal strategy of their own.
#[derive(Clone, Debug)]
pub enum DeterministicStrategy {
    /// Single party: `outputs[i]` is the response to input i.
    Single { party: usize, outputs: Vec<usize> },
    First {
        party: usize,
        outputs: Vec<usize>,
        /// Sub-strategy for the remaining parties, per input value of the
        /// first party (its output is a function of the input, so one
        /// branch per input suffices).
        rest: Vec<DeterministicStrategy>,
    },
}

impl DeterministicStrategy {
    /// Expand to the deterministic correlation on the given party subset
    /// (indices into the global party list, ascending).
    fn fill(&self, subset: &[usize], inputs: &[usize], out: &mut Vec<usize>) {
        match self {
            DeterministicStrategy::Single { party, outputs } => {
                debug_assert_eq!(subset, &[*party]);
                out[*party] = outputs[inputs[*party]];
            }
            DeterministicStrategy::First {
                party,
                outputs,
                rest,
            } => {
                let i = inputs[*party];
                out[*party] = outputs[i];
                let sub: Vec<usize> = subset.iter().copied().filter(|p| p != party).collect();
                rest[i].fill(&sub, inputs, out);
            }
        }
    }

    pub fn expand(&self, parties: usize) -> Correlation {
        let subset: Vec<usize> = (0..parties).collect();
        Correlation::deterministic(parties, |inputs| {
            let mut out = vec![0usize; parties];
            self.fill(&subset, inputs, &mut out);
            out
        })
    }
}

/// Every deterministic causal strategy tree over the given party subset
/// (global indices). Distinct trees may expand to the same correlation;
/// [`enumerate_causal_vertices`] gives the deduplicated tables.
pub fn strategies_for(subset: &[usize]) -> Vec<DeterministicStrategy> {
    if subset.len() == 1 {
        return (0..4)
            .map(|f| DeterministicStrategy::Single {
                party: subset[0],
                outputs: vec![f & 1, (f >> 1) & 1],
            })
            .collect();
    }
    let mut out = Vec::new();
    for &first in subset {
        let rest_set: Vec<usize> = subset.iter().copied().filter(|&p| p != first).collect();
        let rest_strats = strategies_for(&rest_set);
        for f in 0..4usize {
            let outputs = vec![f & 1, (f >> 1) & 1];
            for s0 in &rest_strats {
                for s1 in &rest_strats {
                    out.push(DeterministicStrategy::First {
                        party: first,
                        outputs: outputs.clone(),
                        rest: vec![s0.clone(), s1.clone()],
                    });
                }
            }
        }
    }
    out
}

/// Insert `bit` into the big-endian `k`-bit word built from the
/// (k−1)-bit word `x`, at digit position `pos` from the left.
fn insert_bit(x: usize, pos: usize, bit: usize, k: usize) -> usize {
    let low_bits = k - 1 - pos;
    let high = x >> low_bits;
    let low = x & ((1usize << low_bits) - 1);
    ((high << 1 | bit) << low_bits) | low
}

/// Deduplicated support masks of the deterministic causal correlations for
/// a party subset (ascending global indices): bit `i·2^k + o` marks
/// P(o⃗|i⃗) = 1 in the subset's own table layout. This is the recursive
/// unravelling — one party first, a causal sub-strategy per setting —
/// carried out on bitmasks.
fn vertex_masks(subset: &[usize]) -> Vec<u64> {
    let k = subset.len();
    if k == 1 {
        return (0..4usize)
            .map(|f| {
                let o0 = f & 1;
                let o1 = (f >> 1) & 1;
                (1u64 << o0) | (1u64 << (2 + o1))
            })
            .collect();
    }
    let mut seen: HashSet<u64> = HashSet::new();
    for (pos, &first) in subset.iter().enumerate() {
        let rest: Vec<usize> = subset.iter().copied().filter(|&p| p != first).collect();
        let sub = vertex_masks(&rest);
        let kr = k - 1;
        for f in 0..4usize {
            let outs = [f & 1, (f >> 1) & 1];
            for &v0 in &sub {
                for &v1 in &sub {
                    let mut mask = 0u64;
                    for (i_first, v) in [(0usize, v0), (1usize, v1)] {
                        let o_first = outs[i_first];
                        let mut bits = v;
                        while bits != 0 {
                            let cell = bits.trailing_zeros() as usize;
                            bits &= bits - 1;
                            let (i_r, o_r) = (cell >> kr, cell & ((1 << kr) - 1));
                            let i = insert_bit(i_r, pos, i_first, k);
                            let o = insert_bit(o_r, pos, o_first, k);
                            mask |= 1u64 << ((i << k) | o);
                        }
                    }
                    seen.insert(mask);
                }
            }
        }
    }
    let mut out: Vec<u64> = seen.into_iter().collect();
    out.sort_unstable();
    out
}

/// Support masks of all deterministic causal correlations for
/// `parties` ∈ {1,2,3} with binary settings and outcomes, deduplicated and
/// sorted: bit `i·2ᵏ + o` of a mask marks P(o⃗|i⃗) = 1. The compact
/// representation of the causal polytope's vertices.
pub fn enumerate_causal_vertex_masks(parties: usize) -> Result<Vec<u64>> {
    if !(1..=3).contains(&parties) {
        return Err(CausalityError::UnsupportedArity(parties));
    }
    let subset: Vec<usize> = (0..parties).collect();
    Ok(vertex_masks(&subset))
}

/// The correlation table of one support mask.
pub fn vertex_correlation(parties: usize, mask: u64) -> Correlation {
    let n_out = 1usize << parties;
    let mut probs = vec![Q::zero(); n_out * n_out];
    let mut bits = mask;
    while bits != 0 {
        let cell = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        probs[cell] = Q::one();
    }
    // one set cell per input row by construction
    Correlation {
        in_cards: vec![2; parties],
        out_cards: vec![2; parties],
        probs,
    }
}

/// All deterministic causal correlations for `parties` ∈ {1,2,3} with
/// binary settings and outcomes, deduplicated as tables. These are the
/// vertices of the causal polytope. For the tripartite case this
/// materialises over a hundred thousand rational tables; prefer the mask
/// form for bulk scans.
pub fn enumerate_causal_vertices(parties: usize) -> Result<Vec<Correlation>> {
    Ok(enumerate_causal_vertex_masks(parties)?
        .into_iter()
        .map(|mask| vertex_correlation(parties, mask))
        .collect())
}

/// Result of the exact membership test for the causal polytope.
#[derive(Clone, Debug)]
pub struct CausalityCertificate {
    pub feasible: bool,
    /// Convex weights over the vertex list (indices into the enumerated
    /// vertices) when feasible.
    pub weights: Option<Vec<(usize, Q)>>,
    /// A separating functional y (one entry per table cell plus a constant)
    /// with y·v ≤ 0 for every vertex and y·c > 0, when infeasible.
    pub witness: Option<Vec<Q>>,
}

/// Exact feasibility of c = Σ λ_v v, λ ≥ 0, Σλ = 1 over the enumerated
/// causal vertices, by rational phase-I simplex. Floating-point pricing is
/// used only to pick candidate columns; every pivot and the final verdict
/// are exact.
pub fn is_causal(c: &Correlation) -> Result<CausalityCertificate> {
    let parties = c.parties();
    if !(1..=3).contains(&parties)
        || c.in_cards.iter().any(|&k| k != 2)
        || c.out_cards.iter().any(|&k| k != 2)
    {
        return Err(CausalityError::UnsupportedArity(parties));
    }
    let vertices = enumerate_causal_vertex_masks(parties)?;
    // only vertices supported inside supp(c) can take positive weight
    let n_cells = c.probs.len();
    let zero_mask: Vec<bool> = c.probs.iter().map(|p| p.is_zero()).collect();
    let mut forbidden = 0u64;
    for (cell, is_zero) in zero_mask.iter().enumerate() {
        if *is_zero {
            forbidden |= 1 << cell;
        }
    }
    let cols: Vec<(usize, u64)> = vertices
        .iter()
        .enumerate()
        .filter(|(_, &mask)| mask & forbidden == 0)
        .map(|(vi, &mask)| (vi, mask))
        .collect();

    // rows: one per table cell plus the normalization row
    let m = n_cells + 1;
    let mut b: Vec<Q> = c.probs.clone();
    b.push(Q::one());
    let feas = phase_one_simplex(&cols, n_cells, &b);
    match feas {
        SimplexOutcome::Feasible(weights) => Ok(CausalityCertificate {
            feasible: true,
            weights: Some(
                weights
                    .into_iter()
                    .filter(|(_, w)| !w.is_zero())
                    .map(|(j, w)| (cols[j].0, w))
                    .collect(),
            ),
            witness: None,
        }),
        SimplexOutcome::Infeasible(y) => {
            debug_assert_eq!(y.len(), m);
            // The restricted dual separates only the support-compatible
            // vertices. Penalising the cells where c vanishes extends it to
            // a global certificate: every excluded vertex hits ≥ 1 such
            // cell, and c itself carries no weight there.
            let mut worst = Q::zero();
            for &mask in &vertices {
                let dot = column_dot(&y, mask, n_cells);
                if dot > worst {
                    worst = dot;
                }
            }
            let mut witness = y;
            if worst.is_positive() {
                let m_pen = worst + Q::one();
                for (cell, is_zero) in zero_mask.iter().enumerate() {
                    if *is_zero {
                        witness[cell] -= &m_pen;
                    }
                }
            }
            Ok(CausalityCertificate {
                feasible: false,
                weights: None,
                witness: Some(witness),
            })
        }
    }
}

enum SimplexOutcome {
    Feasible(Vec<(usize, Q)>),
    Infeasible(Vec<Q>),
}

/// Column entries of vertex j: the set bits of its mask plus the final
/// normalization row (always 1).
fn column_dot(y: &[Q], mask: u64, n_cells: usize) -> Q {
    let mut acc = y[n_cells].clone();
    let mut bits = mask;
    while bits != 0 {
        let cell = bits.trailing_zeros() as usize;
        acc += &y[cell];
        bits &= bits - 1;
    }
    acc
}

fn column_dot_f64(y: &[f64], mask: u64, n_cells: usize) -> f64 {
    let mut acc = y[n_cells];
    let mut bits = mask;
    while bits != 0 {
        let cell = bits.trailing_zeros() as usize;
        acc += y[cell];
        bits &= bits - 1;
    }
    acc
}

/// Phase-I simplex for Vλ + s = b, λ, s ≥ 0, minimising Σs, with V the 0/1
/// columns described by `cols`. Returns the weights on feasibility or the
/// dual vector (Farkas certificate) on infeasibility.
fn phase_one_simplex(cols: &[(usize, u64)], n_cells: usize, b: &[Q]) -> SimplexOutcome {
    let m = n_cells + 1;
    let nv = cols.len();
    // basis starts as the artificial columns (identity)
    let mut basis: Vec<usize> = (nv..nv + m).collect();
    // dense basis matrix inverse is maintained implicitly by re-solving;
    // with m ≤ 65 a rational LU per iteration is affordable
    let col_entries = |j: usize| -> Vec<(usize, Q)> {
        if j < nv {
            let mut v: Vec<(usize, Q)> = Vec::new();
            let mut bits = cols[j].1;
            while bits != 0 {
                let cell = bits.trailing_zeros() as usize;
                v.push((cell, Q::one()));
                bits &= bits - 1;
            }
            v.push((n_cells, Q::one()));
            v
        } else {
            vec![(j - nv, Q::one())]
        }
    };
    let cost = |j: usize| -> Q {
        if j < nv {
            Q::zero()
        } else {
            Q::one()
        }
    };

    let mut stall = 0usize;
    let mut last_obj: Option<Q> = None;
    loop {
        // solve B x_B = b and Bᵀ y = c_B
        let bmat: Vec<Vec<(usize, Q)>> = basis.iter().map(|&j| col_entries(j)).collect();
        let x_b = solve_sparse(&bmat, b, m, false);
        let c_b: Vec<Q> = basis.iter().map(|&j| cost(j)).collect();
        let y = solve_sparse(&bmat, &c_b, m, true);
        let obj: Q = basis
            .iter()
            .zip(&x_b)
            .filter(|(&j, _)| j >= nv)
            .map(|(_, x)| x.clone())
            .sum();
        if obj.is_zero() {
            let weights: Vec<(usize, Q)> = basis
                .iter()
                .zip(&x_b)
                .filter(|(&j, _)| j < nv)
                .map(|(&j, x)| (j, x.clone()))
                .collect();
            return SimplexOutcome::Feasible(weights);
        }
        let bland = match &last_obj {
            Some(prev) if *prev == obj => {
                stall += 1;
                stall > 12
            }
            _ => {
                stall = 0;
                false
            }
        };
        last_obj = Some(obj);

        // pricing: find a column with negative reduced cost
        let entering = find_entering(cols, n_cells, nv, &basis, &y, bland, &cost);
        let Some(enter) = entering else {
            // optimal with positive objective: infeasible, y is the witness
            // (y·A_j ≥ −c_j ⇒ for λ columns y·V_j ≤ 0; y·b = obj > 0)
            let witness: Vec<Q> = y.iter().map(|v| -v.clone()).collect();
            // flip sign so that witness·v ≤ 0 for vertices, witness·b > 0
            let witness: Vec<Q> = witness.iter().map(|v| -v.clone()).collect();
            return SimplexOutcome::Infeasible(witness);
        };

        // ratio test: B w = A_enter
        let a_enter = col_entries(enter);
        let mut rhs = vec![Q::zero(); m];
        for (r, v) in &a_enter {
            rhs[*r] = v.clone();
        }
        let w = solve_sparse(&bmat, &rhs, m, false);
        let mut leave: Option<(usize, Q)> = None;
        for (k, wk) in w.iter().enumerate() {
            if wk.is_positive() {
                let ratio = &x_b[k] / wk;
                let better = match &leave {
                    None => true,
                    Some((lk, lr)) => {
                        ratio < *lr || (ratio == *lr && basis[k] < basis[*lk])
                    }
                };
                if better {
                    leave = Some((k, ratio));
                }
            }
        }
        let Some((leave_k, _)) = leave else {
            // phase-I with artificial columns cannot be unbounded
            let witness: Vec<Q> = y.to_vec();
            return SimplexOutcome::Infeasible(witness);
        };
        basis[leave_k] = enter;
    }
}

fn find_entering(
    cols: &[(usize, u64)],
    n_cells: usize,
    nv: usize,
    basis: &[usize],
    y: &[Q],
    bland: bool,
    cost: &impl Fn(usize) -> Q,
) -> Option<usize> {
    let in_basis: HashSet<usize> = basis.iter().copied().collect();
    if !bland {
        // float pre-scan, exact confirmation
        let yf: Vec<f64> = y
            .iter()
            .map(|v| v.numer().to_string().parse::<f64>().unwrap_or(0.0)
                / v.denom().to_string().parse::<f64>().unwrap_or(1.0))
            .collect();
        let mut candidates: Vec<(f64, usize)> = Vec::new();
        for (j, (_, mask)) in cols.iter().enumerate() {
            if in_basis.contains(&j) {
                continue;
            }
            let d = -column_dot_f64(&yf, *mask, n_cells);
            if d < -1e-9 {
                candidates.push((d, j));
            }
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (_, j) in candidates.into_iter().take(16) {
            let d = cost(j) - column_dot(y, cols[j].1, n_cells);
            if d.is_negative() {
                return Some(j);
            }
        }
    }
    // exact scan (also proves optimality when nothing is found)
    for j in 0..nv {
        if in_basis.contains(&j) {
            continue;
        }
        let d = cost(j) - column_dot(y, cols[j].1, n_cells);
        if d.is_negative() {
            return Some(j);
        }
    }
    // artificial columns never re-enter (cost 1, y_k ≤ 1 at all times is
    // not guaranteed, so check them too for correctness)
    for j in nv..nv + y.len() {
        if in_basis.contains(&j) {
            continue;
        }
        let d = Q::one() - y[j - nv].clone();
        if d.is_negative() {
            return Some(j);
        }
    }
    None
}

/// Solve the sparse m×m system Bx = rhs (or Bᵀx = rhs) by rational
/// Gaussian elimination; B is given column-wise.
fn solve_sparse(
    bcols: &[Vec<(usize, Q)>],
    rhs: &[Q],
    m: usize,
    transpose: bool,
) -> Vec<Q> {
    // densify (m ≤ 65)
    let mut a = vec![Q::zero(); m * m];
    for (j, col) in bcols.iter().enumerate() {
        for (r, v) in col {
            if transpose {
                a[j * m + *r] = v.clone();
            } else {
                a[*r * m + j] = v.clone();
            }
        }
    }
    let mut x: Vec<Q> = rhs.to_vec();
    // forward elimination with partial (first nonzero) pivoting
    let mut perm: Vec<usize> = (0..m).collect();
    for col in 0..m {
        let pivot_row = (col..m)
            .find(|&r| !a[perm[r] * m + col].is_zero())
            .expect("basis matrix is nonsingular");
        perm.swap(col, pivot_row);
        let p = a[perm[col] * m + col].clone();
        for r in (col + 1)..m {
            let factor = &a[perm[r] * m + col] / &p;
            if factor.is_zero() {
                continue;
            }
            for cc in col..m {
                let v = &a[perm[col] * m + cc] * &factor;
                a[perm[r] * m + cc] -= v;
            }
            let v = &x[perm[col]] * &factor;
            x[perm[r]] -= v;
        }
    }
    // back substitution
    let mut out = vec![Q::zero(); m];
    for col in (0..m).rev() {
        let mut acc = x[perm[col]].clone();
        for cc in (col + 1)..m {
            acc -= &a[perm[col] * m + cc] * &out[cc];
        }
        out[col] = acc / &a[perm[col] * m + col];
    }
    out
}

/// Strict partial order over a named ground set.
#[derive(Clone, Debug)]
pub struct Spo {
    pub elements: Vec<String>,
    /// rel[a·n + b] ⇔ a ≺ b
    pub rel: Vec<bool>,
}

impl Spo {
    pub fn new(elements: Vec<String>, rel: Vec<bool>) -> Result<Self> {
        let s = Spo { elements, rel };
        s.validate()?;
        Ok(s)
    }

    /// Build from a list of edges, closing transitively.
    pub fn from_edges(elements: Vec<String>, edges: &[(&str, &str)]) -> Result<Self> {
        let n = elements.len();
        let index = |name: &str| -> Result<usize> {
            elements
                .iter()
                .position(|e| e == name)
                .ok_or_else(|| CausalityError::MissingElement(name.to_string()))
        };
        let mut rel = vec![false; n * n];
        for (a, b) in edges {
            rel[index(a)? * n + index(b)?] = true;
        }
        transitive_close(&mut rel, n);
        Spo::new(elements, rel)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.elements
            .iter()
            .position(|e| e == name)
            .ok_or_else(|| CausalityError::MissingElement(name.to_string()))
    }

    pub fn precedes(&self, a: &str, b: &str) -> Result<bool> {
        Ok(self.rel[self.index(a)? * self.len() + self.index(b)?])
    }

    /// Irreflexivity and transitivity; both are checked, not assumed.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for a in 0..n {
            if self.rel[a * n + a] {
                return Err(CausalityError::NotIrreflexive(self.elements[a].clone()));
            }
        }
        for a in 0..n {
            for b in 0..n {
                if !self.rel[a * n + b] {
                    continue;
                }
                for c in 0..n {
                    if self.rel[b * n + c] && !self.rel[a * n + c] {
                        return Err(CausalityError::NotTransitive(
                            self.elements[a].clone(),
                            self.elements[b].clone(),
                            self.elements[c].clone(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn transitive_close(rel: &mut [bool], n: usize) {
    for k in 0..n {
        for i in 0..n {
            if rel[i * n + k] {
                for j in 0..n {
                    if rel[k * n + j] {
                        rel[i * n + j] = true;
                    }
                }
            }
        }
    }
}

/// The causal past, future and elsewhere of an element.
pub fn causal_sets(s: &Spo, x: &str) -> Result<(Vec<String>, Vec<String>, Vec<String>)> {
    let xi = s.index(x)?;
    let n = s.len();
    let mut past = Vec::new();
    let mut future = Vec::new();
    let mut elsewhere = Vec::new();
    for e in 0..n {
        if e == xi {
            continue;
        }
        if s.rel[e * n + xi] {
            past.push(s.elements[e].clone());
        } else if s.rel[xi * n + e] {
            future.push(s.elements[e].clone());
        } else {
            elsewhere.push(s.elements[e].clone());
        }
    }
    Ok((past, future, elsewhere))
}

/// Coarse-grained relation between parties: X is a cause of Y when a chain
/// X_O ≺ Λ_I^{(1)}, Λ_O^{(1)} ≺ Λ_I^{(2)}, …, Λ_O^{(M)} ≺ Y_I exists
/// (M = 0 being the direct case X_O ≺ Y_I). Transitive by construction;
/// the returned flag says whether it is also irreflexive, i.e. an SPO.
pub struct CoarseGraining {
    pub parties: Vec<String>,
    pub rel: Vec<bool>,
    pub is_spo: bool,
}

pub fn coarse_grain(s: &Spo, parties: &[&str]) -> Result<CoarseGraining> {
    let n = parties.len();
    let mut direct = vec![false; n * n];
    for (xi, x) in parties.iter().enumerate() {
        for (yi, y) in parties.iter().enumerate() {
            direct[xi * n + yi] = s.precedes(&format!("{x}_O"), &format!("{y}_I"))?;
        }
    }
    transitive_close(&mut direct, n);
    let is_spo = (0..n).all(|i| !direct[i * n + i]);
    Ok(CoarseGraining {
        parties: parties.iter().map(|p| p.to_string()).collect(),
        rel: direct,
        is_spo,
    })
}

/// Closed-laboratory conditions for one party over the fine-grained
/// variable set {X_I, X_O, I_X, O_X}: (i) the setting influences exactly
/// the outcome, the party output and whatever the output influences;
/// (ii) the outcome is influenced exactly by the setting, the party input
/// and whatever influences the input.
pub fn check_closed_lab(s: &Spo, party: &str) -> Result<bool> {
    let x_i = format!("{party}_I");
    let x_o = format!("{party}_O");
    let i_x = format!("I_{party}");
    let o_x = format!("O_{party}");
    for v in [&x_i, &x_o, &i_x, &o_x] {
        s.index(v)?;
    }
    for y in &s.elements {
        if *y == i_x {
            continue;
        }
        let lhs = s.precedes(&i_x, y)?;
        let rhs = *y == o_x || *y == x_o || s.precedes(&x_o, y)?;
        if lhs != rhs {
            return Ok(false);
        }
    }
    for y in &s.elements {
        if *y == o_x {
            continue;
        }
        let lhs = s.precedes(y, &o_x)?;
        let rhs = *y == i_x || *y == x_i || s.precedes(y, &x_i)?;
        if lhs != rhs {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The deterministic correlation produced by the noncausal process.
    pub fn af_correlation() -> Correlation {
        Correlation::deterministic(3, |i| {
            vec![(1 - i[1]) & i[2], (1 - i[2]) & i[0], (1 - i[0]) & i[1]]
        })
    }

    #[test]
    fn i1_on_af_correlation_is_minus_one() {
        let c = af_correlation();
        let v = eval_inequality(&c, &make_i1()).unwrap();
        assert_eq!(v, q_int(-1));
    }

    #[test]
    fn i1_on_uniform_is_five_eighths() {
        let v = eval_inequality(&Correlation::uniform(3), &make_i1()).unwrap();
        assert_eq!(v, q_ratio(5, 8));
    }

    #[test]
    fn i1_on_constant_zero_strategy_is_two() {
        let c = Correlation::deterministic(3, |_| vec![0, 0, 0]);
        let v = eval_inequality(&c, &make_i1()).unwrap();
        assert_eq!(v, q_int(2));
    }

    #[test]
    fn i1_has_seven_terms() {
        assert_eq!(make_i1().terms.len(), 7);
    }

    #[test]
    fn inequality_evaluation_is_linear() {
        let a = af_correlation();
        let b = Correlation::uniform(3);
        let w = q_ratio(1, 3);
        let mixed = Correlation::mix(&[(w.clone(), &a), (Q::one() - &w, &b)]).unwrap();
        let i1 = make_i1();
        let lhs = eval_inequality(&mixed, &i1).unwrap();
        let rhs = w.clone() * eval_inequality(&a, &i1).unwrap()
            + (Q::one() - &w) * eval_inequality(&b, &i1).unwrap();
        assert_eq!(lhs, rhs);
    }


    #[test]
    fn strategy_tree_expansion_matches_mask_enumeration() {
        // the explicit recursive strategies and the bitmask unravelling
        // describe the same vertex set
        let subset = vec![0usize, 1];
        let mut from_trees = HashSet::new();
        for s in strategies_for(&subset) {
            from_trees.insert(s.expand(2).bitmask().unwrap());
        }
        let from_masks: HashSet<u64> = enumerate_causal_vertices(2)
            .unwrap()
            .iter()
            .map(|c| c.bitmask().unwrap())
            .collect();
        assert_eq!(from_trees, from_masks);
    }

    #[test]
    fn single_party_has_four_vertices() {
        let v = enumerate_causal_vertices(1).unwrap();
        assert_eq!(v.len(), 4);
        for c in &v {
            assert!(c.is_deterministic());
        }
    }

    /// Brute-force oracle for two parties: a deterministic binary
    /// correlation is causal iff o_A ignores i_B or o_B ignores i_A.
    fn two_party_oracle() -> HashSet<u64> {
        let mut set = HashSet::new();
        for alpha in 0..16usize {
            for beta in 0..16usize {
                // o_A = alpha(i_A, i_B), o_B = beta(i_A, i_B)
                let oa = |ia: usize, ib: usize| (alpha >> (ia * 2 + ib)) & 1;
                let ob = |ia: usize, ib: usize| (beta >> (ia * 2 + ib)) & 1;
                let a_first = (0..2).all(|ia| oa(ia, 0) == oa(ia, 1));
                let b_first = (0..2).all(|ib| ob(0, ib) == ob(1, ib));
                if a_first || b_first {
                    let c = Correlation::deterministic(2, |i| {
                        vec![oa(i[0], i[1]), ob(i[0], i[1])]
                    });
                    set.insert(c.bitmask().unwrap());
                }
            }
        }
        set
    }

    #[test]
    fn two_party_enumeration_matches_brute_force_oracle() {
        let enumerated: HashSet<u64> = enumerate_causal_vertices(2)
            .unwrap()
            .iter()
            .map(|c| c.bitmask().unwrap())
            .collect();
        let oracle = two_party_oracle();
        assert_eq!(enumerated, oracle);
        assert_eq!(enumerated.len(), 112);
    }

    #[test]
    fn vertices_are_causal_with_unit_weight() {
        let v = enumerate_causal_vertices(2).unwrap();
        let cert = is_causal(&v[17]).unwrap();
        assert!(cert.feasible);
        let weights = cert.weights.unwrap();
        assert_eq!(weights.len(), 1);
        assert!(weights[0].1.is_one());
    }


    #[test]
    fn every_two_party_vertex_is_feasible_with_unit_weight() {
        let masks = enumerate_causal_vertex_masks(2).unwrap();
        for &mask in &masks {
            let v = vertex_correlation(2, mask);
            let cert = is_causal(&v).unwrap();
            assert!(cert.feasible);
            let weights = cert.weights.unwrap();
            assert_eq!(weights.len(), 1);
            assert!(weights[0].1.is_one());
        }
    }

    #[test]
    fn sampled_three_party_vertices_are_feasible() {
        let masks = enumerate_causal_vertex_masks(3).unwrap();
        for k in (0..masks.len()).step_by(masks.len() / 37) {
            let v = vertex_correlation(3, masks[k]);
            let cert = is_causal(&v).unwrap();
            assert!(cert.feasible, "vertex {k}");
        }
    }

    #[test]
    fn af_correlation_is_not_causal() {
        let cert = is_causal(&af_correlation()).unwrap();
        assert!(!cert.feasible);
        assert!(cert.witness.is_some());
    }

    #[test]
    fn uniform_two_party_is_causal_with_explicit_weights() {
        let c = Correlation::uniform(2);
        let cert = is_causal(&c).unwrap();
        assert!(cert.feasible);
        let weights = cert.weights.unwrap();
        // verify the decomposition exactly
        let vertices = enumerate_causal_vertices(2).unwrap();
        let parts: Vec<(Q, &Correlation)> = weights
            .iter()
            .map(|(vi, w)| (w.clone(), &vertices[*vi]))
            .collect();
        let mixed = Correlation::mix(&parts).unwrap();
        assert_eq!(mixed, c);
    }

    #[test]
    fn random_rational_mixtures_are_causal() {
        let vertices = enumerate_causal_vertices(2).unwrap();
        let parts: Vec<(Q, &Correlation)> = vec![
            (q_ratio(1, 3), &vertices[5]),
            (q_ratio(1, 6), &vertices[40]),
            (q_ratio(1, 2), &vertices[99]),
        ];
        let c = Correlation::mix(&parts).unwrap();
        let cert = is_causal(&c).unwrap();
        assert!(cert.feasible);
        let weights = cert.weights.unwrap();
        let rebuilt: Vec<(Q, &Correlation)> = weights
            .iter()
            .map(|(vi, w)| (w.clone(), &vertices[*vi]))
            .collect();
        assert_eq!(Correlation::mix(&rebuilt).unwrap(), c);
    }

    #[test]
    fn infeasibility_witness_separates() {
        let c = af_correlation();
        let cert = is_causal(&c).unwrap();
        let y = cert.witness.unwrap();
        let n_cells = c.probs.len();
        // y·v ≤ 0 for every vertex column, y·(c,1) > 0
        let vertices = enumerate_causal_vertices(3).unwrap();
        for v in &vertices {
            let dot = column_dot(&y, v.bitmask().unwrap(), n_cells);
            assert!(!dot.is_positive(), "witness fails on a vertex: {dot}");
        }
        let mut target = y[n_cells].clone();
        for (cell, p) in c.probs.iter().enumerate() {
            target += &y[cell] * p;
        }
        assert!(target.is_positive());
    }

    #[test]
    fn spo_validation_rejects_cycles() {
        let r = Spo::from_edges(
            vec!["a".into(), "b".into()],
            &[("a", "b"), ("b", "a")],
        );
        assert!(r.is_err());
    }

    #[test]
    fn causal_sets_partition() {
        let s = Spo::from_edges(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            &[("a", "b"), ("b", "c")],
        )
        .unwrap();
        let (past, future, elsewhere) = causal_sets(&s, "b").unwrap();
        assert_eq!(past, vec!["a"]);
        assert_eq!(future, vec!["c"]);
        assert_eq!(elsewhere, vec!["d"]);
    }

    #[test]
    fn coarse_grain_single_edge_is_spo() {
        let elems: Vec<String> = ["A_I", "A_O", "B_I", "B_O"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let s = Spo::from_edges(elems, &[("A_O", "B_I")]).unwrap();
        let cg = coarse_grain(&s, &["A", "B"]).unwrap();
        assert!(cg.is_spo);
        assert!(cg.rel[0 * 2 + 1]);
        assert!(!cg.rel[1 * 2 + 0]);
    }

    #[test]
    fn coarse_grain_two_cycle_is_flagged() {
        let elems: Vec<String> = ["A_I", "A_O", "B_I", "B_O"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let s = Spo::from_edges(elems, &[("A_O", "B_I"), ("B_O", "A_I")]).unwrap();
        let cg = coarse_grain(&s, &["A", "B"]).unwrap();
        assert!(!cg.is_spo);
    }

    #[test]
    fn coarse_grain_empty_relation_is_empty_spo() {
        let elems: Vec<String> = ["A_I", "A_O", "B_I", "B_O"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let s = Spo::from_edges(elems, &[]).unwrap();
        let cg = coarse_grain(&s, &["A", "B"]).unwrap();
        assert!(cg.is_spo);
        assert!(cg.rel.iter().all(|&x| !x));
    }

    #[test]
    fn closed_lab_holds_for_minimal_party_order() {
        let elems: Vec<String> = ["A_I", "A_O", "I_A", "O_A"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let s = Spo::from_edges(
            elems,
            &[("I_A", "A_O"), ("I_A", "O_A"), ("A_I", "O_A")],
        )
        .unwrap();
        assert!(check_closed_lab(&s, "A").unwrap());
    }

    #[test]
    fn closed_lab_fails_on_leaky_setting() {
        // I_A influences B_I without passing through A_O
        let elems: Vec<String> = ["A_I", "A_O", "I_A", "O_A", "B_I"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let s = Spo::from_edges(
            elems,
            &[
                ("I_A", "A_O"),
                ("I_A", "O_A"),
                ("A_I", "O_A"),
                ("I_A", "B_I"),
            ],
        )
        .unwrap();
        assert!(!check_closed_lab(&s, "A").unwrap());
    }

    #[test]
    fn closed_lab_holds_for_sequential_circuit_order() {
        // wiring reachability of a fixed-order A≺B circuit
        let elems: Vec<String> = [
            "A_I", "A_O", "I_A", "O_A", "B_I", "B_O", "I_B", "O_B",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let s = Spo::from_edges(
            elems,
            &[
                ("I_A", "A_O"),
                ("I_A", "O_A"),
                ("A_I", "O_A"),
                ("A_I", "A_O"),
                ("A_O", "B_I"),
                ("I_B", "B_O"),
                ("I_B", "O_B"),
                ("B_I", "O_B"),
                ("B_I", "B_O"),
            ],
        )
        .unwrap();
        assert!(check_closed_lab(&s, "A").unwrap());
        assert!(check_closed_lab(&s, "B").unwrap());
    }

    #[test]
    fn random_dag_coarse_grainings_are_spos() {
        // Orders with X_I ≺ X_O for every party always coarse-grain to an
        // SPO: a party-level cycle would chain into a fine-grained cycle.
        use rand::Rng;
        let mut rng = crate::rng::seeded(51);
        for _ in 0..20 {
            let parties = ["A", "B", "C"];
            let mut elems = Vec::new();
            for p in parties {
                elems.push(format!("{p}_I"));
                elems.push(format!("{p}_O"));
                elems.push(format!("I_{p}"));
                elems.push(format!("O_{p}"));
            }
            let n = elems.len();
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            // each party's input must come before its output in the
            // generating topological order
            for p in 0..parties.len() {
                let (pi, po) = (4 * p, 4 * p + 1);
                let pos_i = order.iter().position(|&x| x == pi).unwrap();
                let pos_o = order.iter().position(|&x| x == po).unwrap();
                if pos_i > pos_o {
                    order.swap(pos_i, pos_o);
                }
            }
            let mut rel = vec![false; n * n];
            for a in 0..n {
                for b in (a + 1)..n {
                    if rng.gen_bool(0.3) {
                        rel[order[a] * n + order[b]] = true;
                    }
                }
            }
            for p in 0..parties.len() {
                rel[(4 * p) * n + (4 * p + 1)] = true;
            }
            transitive_close(&mut rel, n);
            let s = Spo::new(elems, rel).unwrap();
            let cg = coarse_grain(&s, &parties).unwrap();
            assert!(cg.is_spo);
        }
    }

    #[test]
    fn cyclic_coarse_grainings_exist_without_party_order() {
        // without X_I ≺ X_O the alternating two-cycle survives coarse
        // graining and is flagged
        let elems: Vec<String> = [
            "A_I", "A_O", "I_A", "O_A", "B_I", "B_O", "I_B", "O_B",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let s = Spo::from_edges(elems, &[("A_O", "B_I"), ("B_O", "A_I")]).unwrap();
        let cg = coarse_grain(&s, &["A", "B"]).unwrap();
        assert!(!cg.is_spo);
    }
}
