//! Time-delocalised classical variables: the circuit of the noncausal
//! process with the basis strategies is classicalized gate by gate, the
//! red fragment is rewritten through the bijections induced by the
//! basis-preserving isomorphisms, and the rewritten table factorizes into
//! the two local deterministic operations times an R-table. Composition of
//! red and blue is unchanged by the rewriting, element-wise exact.

use std::collections::BTreeMap;

use procmat::classical::{
    classicalize, compose_circuit, delocalized_rewrite_classical, Bijection,
    ClassicalInstrument, RandomVar,
};
use procmat::delocal::make_tripartite_decomposition;
use procmat::process::catalog;

fn bit(name: &str) -> RandomVar {
    RandomVar::bit(name)
}

/// Deterministic function table of an instrument: input assignment (over
/// `ins` order) → output assignment (over `outs` order).
fn function_table(
    inst: &ClassicalInstrument,
    ins: &[&str],
    outs: &[&str],
) -> BTreeMap<Vec<u16>, Vec<u16>> {
    let in_idx: Vec<usize> = ins
        .iter()
        .map(|n| inst.table.var_index(n).expect("var"))
        .collect();
    let out_idx: Vec<usize> = outs
        .iter()
        .map(|n| inst.table.var_index(n).expect("var"))
        .collect();
    let mut map = BTreeMap::new();
    for (assignment, p) in &inst.table.entries {
        assert!(p == &procmat::causality::q_int(1), "must be deterministic");
        let key: Vec<u16> = in_idx.iter().map(|&k| assignment[k]).collect();
        let val: Vec<u16> = out_idx.iter().map(|&k| assignment[k]).collect();
        let prev = map.insert(key, val.clone());
        if let Some(prev) = prev {
            assert_eq!(prev, val, "outputs must be a function of the chosen inputs");
        }
    }
    map
}

#[test]
fn rewritten_red_fragment_factorizes_classically() {
    let (i_a, i_b, i_c) = (0u8, 1u8, 1u8);
    let u_a = catalog::ci_strategy("A", i_a);
    let u_b = catalog::ci_strategy("B", i_b);
    let u_c = catalog::ci_strategy("C", i_c);
    let (circuit, split) = procmat::bw::build_bw_circuit(&u_a, &u_b, &u_c).unwrap();
    let instruments = classicalize(&circuit, 1e-10).unwrap();

    let red: Vec<ClassicalInstrument> = split
        .red
        .iter()
        .map(|&gi| instruments[gi].clone())
        .collect();
    let red = compose_circuit(&red).unwrap();

    // bijections from the basis-preserving isomorphisms
    let u = catalog::make_u_bw().unwrap();
    let decomp = make_tripartite_decomposition(&u, &procmat::bw::bw_factorization()).unwrap();
    let j_in = Bijection::from_block(&decomp.j_in, 1e-12).expect("basis-preserving");
    let j_out = Bijection::from_block(&decomp.j_out, 1e-12).expect("basis-preserving");
    let rewritten = delocalized_rewrite_classical(&red, &j_in, &j_out).unwrap();

    // the A-block acts alone: (A_I, A_I') → (A_O, A_O') as the strategy
    let a_block = function_table(&rewritten, &["A_I", "A_I'"], &["A_O", "A_O'"]);
    for ((key, val), _) in a_block.iter().zip(0..) {
        assert_eq!(val[0], key[1] ^ (i_a as u16), "A_O = ancilla ⊕ setting");
        assert_eq!(val[1], key[0], "record = A_I");
    }
    let b_block = function_table(&rewritten, &["B_I", "B_I'"], &["B_O", "B_O'"]);
    for (key, val) in &b_block {
        assert_eq!(val[0], key[1] ^ (i_b as u16));
        assert_eq!(val[1], key[0]);
    }
    // the rest is the R-table: outputs depend only on the non-A/B inputs
    let r_block = function_table(
        &rewritten,
        &["C_I", "C_I'", "Y", "Z", "bQ2'"],
        &["C_O", "C_O'", "bY", "bZ", "bQ1"],
    );
    assert_eq!(r_block.len(), 2 * 2 * 2 * 16 * 2);
}

#[test]
fn rewriting_preserves_red_blue_composition() {
    // a fully cyclic red/blue pair with outcome variables: the composed
    // outcome table is identical before and after changing to delocalised
    // variables, element-wise exact
    let red = ClassicalInstrument::deterministic(
        vec![bit("a"), bit("f")],
        vec![bit("d"), bit("h"), bit("k")],
        |v| vec![v[0] ^ v[1], v[0] & v[1], v[0]],
    )
    .unwrap();
    let blue = ClassicalInstrument::deterministic(
        vec![bit("d"), bit("h")],
        vec![bit("a"), bit("f"), bit("j")],
        |v| vec![v[0] | v[1], v[0], v[0] ^ v[1]],
    )
    .unwrap();
    let before = red.link(&blue).unwrap();

    let j_in = Bijection::new(
        vec![bit("v"), bit("w")],
        vec![bit("a"), bit("f")],
        vec![0, 3, 2, 1],
    )
    .unwrap();
    let j_out = Bijection::new(
        vec![bit("d"), bit("h")],
        vec![bit("x"), bit("y")],
        vec![2, 1, 3, 0],
    )
    .unwrap();
    let red_new = delocalized_rewrite_classical(&red, &j_in, &j_out).unwrap();
    let blue_new =
        delocalized_rewrite_classical(&blue, &j_out.inverse(), &j_in.inverse()).unwrap();
    let after = red_new.link(&blue_new).unwrap();

    // both compositions close every wire and leave the outcomes (k, j)
    let before_tbl = before.table.rename(&[]).unwrap();
    let mut after_aligned = after.table.clone();
    // align variable order to (k, j)
    let order: Vec<RandomVar> = before_tbl.vars.clone();
    let mut sorted = procmat::classical::ClassicalTable::new(order).unwrap();
    for (assignment, v) in &after_aligned.entries {
        let k_idx = after_aligned.var_index("k").unwrap();
        let j_idx = after_aligned.var_index("j").unwrap();
        let before_k = before_tbl.var_index("k").unwrap();
        let mut mapped = vec![0u16; 2];
        mapped[before_k] = assignment[k_idx];
        mapped[1 - before_k] = assignment[j_idx];
        sorted.insert(mapped, v.clone());
    }
    after_aligned = sorted;
    assert_eq!(before_tbl.entries, after_aligned.entries);
}
