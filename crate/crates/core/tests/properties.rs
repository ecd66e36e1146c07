use blochtopo::homotopy::{connectivity_with, random_hoppings, ConnectivityConfig};
use blochtopo::invariants::representatives;
use blochtopo::multiband::{embed, projector_from_hoppings, real_class};
use blochtopo::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gapped_class() -> impl Strategy<Value = SymmetryClass> {
    prop::sample::select(SymmetryClass::gapped().collect::<Vec<_>>())
}

fn any_class() -> impl Strategy<Value = SymmetryClass> {
    prop::sample::select(SymmetryClass::ALL.to_vec())
}

fn random_member(cls: SymmetryClass, seed: u64, range: u32) -> Hoppings {
    symmetrize(&random_hoppings(&mut ChaCha8Rng::seed_from_u64(seed), range), cls)
}

/// A well-gapped member of `cls`, or `None` if this seed gives a near-gapless one.
fn gapped_member(cls: SymmetryClass, seed: u64, range: u32) -> Option<(Hoppings, SampledLoop)> {
    let h = random_member(cls, seed, range);
    let lp = sample_loop(&h, KGrid::new(128).unwrap()).ok()?;
    (gap(&lp).relative >= 0.1).then_some((h, lp))
}

fn total_norm(h: &Hoppings) -> f64 {
    h.terms().iter().map(|(&j, m)| if j == 0 { m.op_norm() } else { 2.0 * m.op_norm() }).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pauli_decomposition_round_trips(a in -5.0..5.0f64, d in -5.0..5.0f64, re in -5.0..5.0f64, im in -5.0..5.0f64) {
        let m = Matrix2::new(Complex64::new(a, 0.0), Complex64::new(re, -im), Complex64::new(re, im), Complex64::new(d, 0.0));
        let p = pauli_decompose(&m).unwrap();
        prop_assert!((p.to_matrix() - m).max_abs() < 1e-12);
        prop_assert!((p.norm() - ((a - d) / 2.0).hypot(re.hypot(im))).abs() < 1e-12);
    }

    #[test]
    fn symmetrize_is_a_projection(cls in any_class(), seed in any::<u64>(), range in 0u32..4) {
        let once = random_member(cls, seed, range);
        let twice = symmetrize(&once, cls);
        prop_assert!(once.max_difference(&twice) < 1e-12);
        if let Ok(lp) = sample_loop(&once, KGrid::new(64).unwrap()) {
            prop_assert!(residual(&lp, cls).max() < 1e-9);
        }
    }

    #[test]
    fn gauge_change_preserves_every_gap(seed in any::<u64>(), range in 0u32..3, l in -3i64..=3) {
        let h = random_hoppings(&mut ChaCha8Rng::seed_from_u64(seed), range);
        let g = gauge_transform(&h, l);
        for m in 0..32 {
            let k = -std::f64::consts::PI + m as f64 * std::f64::consts::PI / 16.0;
            let a = pauli_decompose(&eval_bloch(&h, k)).unwrap().norm();
            let b = pauli_decompose(&eval_bloch(&g, k)).unwrap().norm();
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + a));
        }
    }

    #[test]
    fn gauge_relabeling_composes(n in -3i64..=3, sign in any::<bool>(), a in -3i64..=3, b in -3i64..=3) {
        let s = if sign { Sign::Plus } else { Sign::Minus };
        for kind in [LabelKind::SigmaZ, LabelKind::R(n)] {
            let label = ClassLabel::new(s, kind);
            prop_assert_eq!(relabel_under_gauge(relabel_under_gauge(label, a), b), relabel_under_gauge(label, a + b));
        }
    }

    #[test]
    fn labels_survive_radial_rescaling(cls in gapped_class(), seed in any::<u64>(), scale in 0.01..100.0f64) {
        if let Some((h, lp)) = gapped_member(cls, seed, 2) {
            let scaled = BlochSeries::from_hoppings(&h).scale(scale).to_hoppings("scaled");
            let lq = sample_loop(&scaled, lp.grid).unwrap();
            prop_assert_eq!(classify(&lp, cls).ok(), classify(&lq, cls).ok());
            prop_assert!(classify(&lp.normalized(), cls).ok() == classify(&lp, cls).ok());
        }
    }

    #[test]
    fn small_symmetric_perturbations_keep_the_label(cls in gapped_class(), seed in any::<u64>(), eps in 0.0..1.0f64) {
        if let Some((h, lp)) = gapped_member(cls, seed, 2) {
            let Ok(label) = classify(&lp, cls) else { return Ok(()) };
            let d = random_member(cls, seed ^ 0x9e37_79b9_7f4a_7c15, 2);
            let size = eps * gap(&lp).min / (4.0 * total_norm(&d).max(1e-12));
            let p = BlochSeries::from_hoppings(&h).add(&BlochSeries::from_hoppings(&d).scale(size)).to_hoppings("perturbed");
            let lq = sample_loop(&p, lp.grid).unwrap();
            match classify(&lq, cls) {
                Err(Error::TangentialCrossing { .. }) => {}
                other => prop_assert_eq!(other.ok(), Some(label)),
            }
        }
    }

    #[test]
    fn witnesses_verify_and_end_on_the_label(cls in gapped_class(), seed in 0u64..10_000) {
        if let Some((_, lp)) = gapped_member(cls, seed, 1) {
            let Ok(label) = classify(&lp, cls) else { return Ok(()) };
            let path = witness_to_representative(&lp, cls).unwrap();
            let report = verify_path(&path, GAP_TOL, SYM_TOL);
            prop_assert!(report.pass, "{}", report);
            let end = fixtures::representative_loop(label, path.grid());
            prop_assert!(path.end().max_distance(&end) < 1e-9);
        }
    }

    #[test]
    fn representatives_classify_to_themselves(cls in gapped_class(), max_n in 0i64..4) {
        for label in representatives(cls, max_n) {
            let lp = sample_loop(&fixtures::representative(label), KGrid::new(64).unwrap()).unwrap();
            prop_assert_eq!(classify(&lp, cls).unwrap(), label);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn embedding_keeps_the_endpoint_sign(w in 1u32..5, extra in 1usize..3) {
        let p = projector_from_hoppings(&fixtures::real_rotor(w), KGrid::new(64).unwrap()).unwrap();
        let bare = real_class(&p).unwrap();
        let embedded = real_class(&embed(&p, extra)).unwrap();
        prop_assert_eq!(bare.endpoint_sign, embedded.endpoint_sign);
        prop_assert_eq!(bare.endpoint_sign, if w % 2 == 1 { -1 } else { 1 });
    }

    #[test]
    fn connectivity_ignores_thread_count(seed in any::<u64>(), jobs in 2usize..5) {
        let base = ConnectivityConfig::new(SymmetryClass::Bond, 1, 12, seed);
        let serial = connectivity_with(&ConnectivityConfig { jobs: 1, ..base }).unwrap();
        let parallel = connectivity_with(&ConnectivityConfig { jobs, ..base }).unwrap();
        prop_assert_eq!(serial.to_string(), parallel.to_string());
    }
}
