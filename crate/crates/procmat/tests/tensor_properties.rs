//! Property tests for the tensor core: relabeling and permutation
//! round-trips, link-product commutativity and associativity on arbitrary
//! small tensors, and the Choi round-trip.

use proptest::prelude::*;

use procmat::tensor::{choi_to_matrix, dagger_choi, pure_choi, LabeledTensor, SystemLabel, C64};

fn small_tensor(
    names: &'static [&'static str],
) -> impl Strategy<Value = LabeledTensor> {
    let dims = proptest::collection::vec(2usize..=3, names.len());
    dims.prop_flat_map(move |dims| {
        let total: usize = dims.iter().product();
        let labels: Vec<SystemLabel> = names
            .iter()
            .zip(&dims)
            .map(|(n, &d)| SystemLabel::new(*n, d))
            .collect();
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), total).prop_map(move |amps| {
            LabeledTensor::new(
                labels.clone(),
                amps.into_iter().map(|(re, im)| C64::new(re, im)).collect(),
            )
            .expect("shape consistent")
        })
    })
}

proptest! {
    #[test]
    fn permute_then_inverse_is_identity(t in small_tensor(&["A", "B", "C"])) {
        let p = t.permute(&["C", "A", "B"]).unwrap();
        let back = p.permute(&["A", "B", "C"]).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn relabel_round_trips_and_preserves_norm(t in small_tensor(&["A", "B"])) {
        let r = t.relabel(&[("A", "X"), ("B", "Y")]).unwrap();
        prop_assert_eq!(r.norm_sq(), t.norm_sq());
        let back = r.relabel(&[("X", "A"), ("Y", "B")]).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn link_is_commutative_up_to_reordering(
        seed in 0u64..1000,
    ) {
        let mut rng = procmat::rng::seeded(seed);
        let d = 2 + (seed % 2) as usize;
        let a = procmat::rng::random_tensor(&mut rng, vec![
            SystemLabel::new("X", 2),
            SystemLabel::new("S", d),
        ]);
        let b = procmat::rng::random_tensor(&mut rng, vec![
            SystemLabel::new("S", d),
            SystemLabel::new("Z", 3),
        ]);
        let ab = a.link(&b).unwrap();
        let ba = b.link(&a).unwrap();
        prop_assert!(ab.max_diff(&ba).unwrap() < 1e-12);
    }

    #[test]
    fn link_is_associative_with_two_occurrences(seed in 0u64..1000) {
        let mut rng = procmat::rng::seeded(seed.wrapping_add(7777));
        let a = procmat::rng::random_tensor(&mut rng, vec![
            SystemLabel::new("X", 2),
            SystemLabel::new("S", 3),
        ]);
        let b = procmat::rng::random_tensor(&mut rng, vec![
            SystemLabel::new("S", 3),
            SystemLabel::new("T", 2),
        ]);
        let c = procmat::rng::random_tensor(&mut rng, vec![
            SystemLabel::new("T", 2),
            SystemLabel::new("Y", 2),
        ]);
        let left = a.link(&b).unwrap().link(&c).unwrap();
        let right = a.link(&b.link(&c).unwrap()).unwrap();
        prop_assert!(left.max_diff(&right).unwrap() < 1e-12);
    }

    #[test]
    fn choi_round_trip_is_exact(seed in 0u64..1000) {
        let mut rng = procmat::rng::seeded(seed.wrapping_add(31337));
        let u = procmat::rng::random_unitary_block(
            &mut rng,
            vec![SystemLabel::new("in", 3)],
            vec![SystemLabel::new("out", 3)],
        );
        let t = pure_choi(&u).unwrap();
        let back = choi_to_matrix(&t, &["in"], &["out"]).unwrap();
        prop_assert_eq!(back.matrix, u.matrix);
    }

    #[test]
    fn dagger_choi_is_involutive(seed in 0u64..1000) {
        let mut rng = procmat::rng::seeded(seed.wrapping_add(99));
        let u = procmat::rng::random_unitary_block(
            &mut rng,
            vec![SystemLabel::new("in", 2)],
            vec![SystemLabel::new("out", 2)],
        );
        let t = pure_choi(&u).unwrap();
        let dd = dagger_choi(
            &dagger_choi(&t, &["in"], &["out"]).unwrap(),
            &["out"],
            &["in"],
        )
        .unwrap();
        prop_assert!(dd.max_diff(&t).unwrap() < 1e-15);
    }
}
