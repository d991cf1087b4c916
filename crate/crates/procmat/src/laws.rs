//! Randomized verification of the link-product algebra: commutativity,
//! associativity, unitary cancellation (pure and mixed), and the
//! composition law. Shared between the test suite and the command line.

use rand::Rng;
use serde::Serialize;

use crate::rng::{random_tensor, random_unitary_block, seeded};
use crate::tensor::{pure_choi, LabeledOperator, SystemLabel, UnitaryBlock, C64};

/// One law's tally over the requested trials.
#[derive(Clone, Debug, Serialize)]
pub struct LawResult {
    pub law: String,
    pub trials: usize,
    pub failures: usize,
    pub worst_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LawReport {
    pub seed: u64,
    pub tolerance: f64,
    pub results: Vec<LawResult>,
    pub all_passed: bool,
}

fn random_dims(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(2..=3)).collect()
}

fn labels(names: &[&str], dims: &[usize]) -> Vec<SystemLabel> {
    names
        .iter()
        .zip(dims)
        .map(|(n, &d)| SystemLabel::new(*n, d))
        .collect()
}

/// Commutativity: a ∗ b = b ∗ a up to leg reordering.
fn trial_commutativity(rng: &mut impl Rng) -> f64 {
    let dims = random_dims(rng, 3);
    let dz = rng.gen_range(2..=3);
    let a = random_tensor(rng, labels(&["X", "Y", "S"], &dims));
    let b = random_tensor(rng, labels(&["S", "Z"], &[dims[2], dz]));
    let ab = a.link(&b).expect("link");
    let ba = b.link(&a).expect("link");
    ab.max_diff(&ba).expect("aligned")
}

/// Associativity when every label occurs at most twice across the operands.
fn trial_associativity(rng: &mut impl Rng) -> f64 {
    let d_s = rng.gen_range(2..=3);
    let d_t = rng.gen_range(2..=3);
    let d_x = rng.gen_range(2..=3);
    let d_z = rng.gen_range(2..=3);
    let a = random_tensor(rng, labels(&["X", "S"], &[d_x, d_s]));
    let b = random_tensor(rng, labels(&["S", "T"], &[d_s, d_t]));
    let c = random_tensor(rng, labels(&["T", "Z"], &[d_t, d_z]));
    let left = a.link(&b).expect("link").link(&c).expect("link");
    let right = a.link(&b.link(&c).expect("link")).expect("link");
    left.max_diff(&right).expect("aligned")
}

/// (a ∗ |U⟩⟩) ∗ (|U†⟩⟩ ∗ b) = a ∗ b for a unitary U on the shared system.
fn trial_cancellation_pure(rng: &mut impl Rng) -> f64 {
    let d_y = rng.gen_range(2..=4);
    let d_x = rng.gen_range(2..=3);
    let d_z = rng.gen_range(2..=3);
    let a = random_tensor(rng, labels(&["X", "Y"], &[d_x, d_y]));
    let b = random_tensor(rng, labels(&["Y", "Z"], &[d_y, d_z]));
    let u = random_unitary_block(
        rng,
        vec![SystemLabel::new("Y", d_y)],
        vec![SystemLabel::new("Y'", d_y)],
    );
    let u_choi = pure_choi(&u).expect("choi");
    let ud_choi = pure_choi(&u.dagger()).expect("choi");
    let lhs = a
        .link(&u_choi)
        .expect("link")
        .link(&ud_choi.link(&b).expect("link"))
        .expect("link");
    let rhs = a.link(&b).expect("link");
    lhs.max_diff(&rhs).expect("aligned")
}

/// The mixed version with rank-one projectors |U⟩⟩⟨⟨U|.
fn trial_cancellation_mixed(rng: &mut impl Rng) -> f64 {
    let d_y = rng.gen_range(2..=3);
    let a = LabeledOperator::outer(&random_tensor(
        rng,
        labels(&["X", "Y"], &[2, d_y]),
    ));
    let b = LabeledOperator::outer(&random_tensor(
        rng,
        labels(&["Y", "Z"], &[d_y, 2]),
    ));
    let u = random_unitary_block(
        rng,
        vec![SystemLabel::new("Y", d_y)],
        vec![SystemLabel::new("Y'", d_y)],
    );
    let u_proj = LabeledOperator::outer(&pure_choi(&u).expect("choi"));
    let ud_proj = LabeledOperator::outer(&pure_choi(&u.dagger()).expect("choi"));
    let lhs = a
        .link(&u_proj)
        .expect("link")
        .link(&ud_proj.link(&b).expect("link"))
        .expect("link");
    let rhs = a.link(&b).expect("link");
    lhs.max_diff(&rhs).expect("aligned")
}

/// Composition law: the pure Choi of a wire-composed pair equals the link
/// of the individual Chois. The composite is built by independent matrix
/// algebra (kron and matmul) as the oracle.
fn trial_composition(rng: &mut impl Rng) -> f64 {
    let (dx, dxp, dy, dz) = (
        rng.gen_range(2..=3),
        rng.gen_range(2..=3),
        rng.gen_range(2..=3),
        rng.gen_range(2..=3),
    );
    // V₁: X → X'⊗Y and V₂: Y⊗Z → Z' with matching total dims
    let v1 = random_unitary_block(
        rng,
        vec![SystemLabel::new("X", dx), SystemLabel::new("Xpad", dxp * dy)],
        vec![SystemLabel::new("X'", dxp * dx), SystemLabel::new("Y", dy)],
    );
    let v2 = random_unitary_block(
        rng,
        vec![SystemLabel::new("Y", dy), SystemLabel::new("Z", dz)],
        vec![SystemLabel::new("Z'", dy * dz)],
    );
    let linked = pure_choi(&v1)
        .expect("choi")
        .link(&pure_choi(&v2).expect("choi"))
        .expect("link");

    // oracle: (𝟙^{X'} ⊗ V₂) · (V₁ ⊗ 𝟙^{Z}) by direct matrix algebra
    let dxi = v1.in_dim();
    let dxo = dxp * dx; // X'
    let dzi = dz;
    let dzo = v2.out_dim();
    let mut composite = vec![C64::new(0.0, 0.0); (dxo * dzo) * (dxi * dzi)];
    for xi in 0..dxi {
        for zi in 0..dzi {
            for xo in 0..dxo {
                for zo in 0..dzo {
                    let mut acc = C64::new(0.0, 0.0);
                    for y in 0..dy {
                        let a = v1.matrix[(xo * dy + y) * dxi + xi];
                        if a == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let b = v2.matrix[zo * (dy * dz) + (y * dz + zi)];
                        acc += a * b;
                    }
                    composite[(xo * dzo + zo) * (dxi * dzi) + (xi * dzi + zi)] = acc;
                }
            }
        }
    }
    let oracle_block = UnitaryBlock::new_raw(
        vec![
            SystemLabel::new("X", dx),
            SystemLabel::new("Xpad", dxp * dy),
            SystemLabel::new("Z", dz),
        ],
        vec![SystemLabel::new("X'", dxo), SystemLabel::new("Z'", dzo)],
        composite,
    )
    .expect("shape");
    let oracle = pure_choi(&oracle_block).expect("choi");
    linked.max_diff(&oracle).expect("aligned")
}

/// Run the full law suite. Failures are residuals exceeding `tol`.
pub fn run_law_suite(seed: u64, trials: usize, tol: f64) -> LawReport {
    let mut rng = seeded(seed);
    let mut results = Vec::new();
    let laws: Vec<(&str, Box<dyn FnMut(&mut crate::rng::Seeded) -> f64>)> = vec![
        ("commutativity", Box::new(trial_commutativity)),
        ("associativity", Box::new(trial_associativity)),
        ("unitary_cancellation_pure", Box::new(trial_cancellation_pure)),
        (
            "unitary_cancellation_mixed",
            Box::new(trial_cancellation_mixed),
        ),
        ("composition_law", Box::new(trial_composition)),
    ];
    for (name, mut f) in laws {
        let mut failures = 0usize;
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let residual = f(&mut rng);
            worst = worst.max(residual);
            if residual > tol {
                failures += 1;
            }
        }
        results.push(LawResult {
            law: name.into(),
            trials,
            failures,
            worst_residual: worst,
        });
    }
    let all_passed = results.iter().all(|r| r.failures == 0);
    LawReport {
        seed,
        tolerance: tol,
        results,
        all_passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn law_suite_passes_at_default_tolerance() {
        let report = run_law_suite(7, 25, 1e-10);
        assert!(report.all_passed, "{report:?}");
    }

    #[test]
    fn law_suite_is_reproducible() {
        let a = run_law_suite(99, 5, 1e-10);
        let b = run_law_suite(99, 5, 1e-10);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn impossible_tolerance_reports_failures() {
        let report = run_law_suite(7, 5, 1e-30);
        assert!(!report.all_passed);
    }
}
