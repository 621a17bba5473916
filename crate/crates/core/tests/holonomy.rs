mod common;

use std::f64::consts::PI;

use common::*;
use lorroll::holonomy::rolling_holonomy_element;
use lorroll::{
    classify_subgroup, controllability_verdict, fixed_point_embedding, geodesic, holonomy_algebra_estimate,
    loop_holonomy, so_log, Classification, ConfigState, ControllabilityOptions, HolonomyMethod, LoopSpec, ManifoldSpec,
    Point, SearchOptions, Signature, Vector, Verdict,
};

#[test]
fn rank_table() {
    let cases = [
        (ManifoldSpec::flat(2, 1), 0),
        (ManifoldSpec::pseudo_sphere(2, 1, 1.0).unwrap(), 3),
        (ManifoldSpec::pseudo_hyperbolic(2, 1, 1.0).unwrap(), 3),
        (ManifoldSpec::pseudo_sphere(3, 1, 1.0).unwrap(), 6),
        (ManifoldSpec::pseudo_hyperbolic(2, 2, 1.0).unwrap(), 6),
    ];
    for (m, rank) in &cases {
        let x = m.default_point();
        let curv = holonomy_algebra_estimate(m, &x, 12, 0, HolonomyMethod::Curvature).unwrap();
        assert_eq!(curv.rank, *rank, "{m}");
        if m.signature().is_lorentzian() {
            let loops = holonomy_algebra_estimate(m, &x, 12, 0, HolonomyMethod::Loops).unwrap();
            assert_eq!(loops.rank, *rank, "{m}");
        }
    }
}

#[test]
fn loop_holonomy_stays_in_the_identity_component() {
    for (name, m) in catalog() {
        let mut r = rng(1);
        let x = random_point(&m, &mut r);
        let frame = m.random_orthonormal_frame(&x, 4).unwrap();
        let p = loop_holonomy(&m, &LoopSpec::rectangle(x, 0, 1, 0.1), &frame, 40).unwrap();
        let last = m.signature().dim() - 1;
        assert!(p.residual() < 1e-7, "{name}");
        assert!(p.matrix()[(last, last)] >= 1.0 - 1e-7, "{name}");
    }
}

#[test]
fn shrinking_loops_approach_the_curvature() {
    let m = ManifoldSpec::pseudo_hyperbolic(2, 1, 1.0).unwrap();
    let x = m.default_point();
    let frame = m.canonical_frame(&x).unwrap();
    let r = m
        .curvature_endomorphism(&frame, &frame.vectors[0], &frame.vectors[2])
        .unwrap();
    let errors: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|s| {
            let p = loop_holonomy(&m, &LoopSpec::rectangle(x.clone(), 0, 2, *s), &frame, 64).unwrap();
            (so_log(&p).unwrap().matrix() / (s * s) - &r).amax()
        })
        .collect();
    assert!(errors[1] < errors[0] * 0.6 && errors[2] < errors[1] * 0.6, "{errors:?}");
}

#[test]
fn closed_geodesic_gives_a_pure_translation_at_two_resolutions() {
    let m = ManifoldSpec::pseudo_sphere(2, 1, 1.0).unwrap();
    let x = Point::from_slice(&[1.0, 0.0, 0.0, 0.0]);
    let q = ConfigState::at_origin(&m, m.canonical_frame(&x).unwrap()).unwrap();
    let v = Vector::from_column_slice(&[0.0, 1.0, 0.0, 0.0]);
    let norms: Vec<f64> = [2e-3, 1e-3]
        .iter()
        .map(|h| {
            let c = geodesic(&m, &x, &v, 2.0 * PI, *h).unwrap();
            let b = rolling_holonomy_element(&m, &q, &c).unwrap();
            assert!(b.linear_part().distance_from_identity() < 1e-6);
            let y = b.translation_part();
            m.signature().inner(y, y).unwrap().sqrt()
        })
        .collect();
    for n in &norms {
        assert!((n - 2.0 * PI).abs() < 1e-4, "{norms:?}");
    }
    assert!((norms[0] - norms[1]).abs() < 1e-4);
}

#[test]
fn controllability_verdicts() {
    let opts = ControllabilityOptions::default();
    let flat = ManifoldSpec::flat(2, 1);
    let r = controllability_verdict(&flat, &flat.default_point(), opts).unwrap();
    assert_eq!(r.verdict, Verdict::NotControllable);
    for m in [
        ManifoldSpec::pseudo_sphere(2, 1, 1.0).unwrap(),
        ManifoldSpec::pseudo_hyperbolic(2, 1, 1.0).unwrap(),
    ] {
        let r = controllability_verdict(&m, &m.default_point(), opts).unwrap();
        assert_eq!(r.verdict, Verdict::ControllableWitnessed, "{m}");
    }
    let h22 = ManifoldSpec::pseudo_hyperbolic(2, 2, 1.0).unwrap();
    let r = controllability_verdict(&h22, &h22.default_point(), opts).unwrap();
    assert_eq!(r.estimate.rank, 6);
    assert_ne!(r.verdict, Verdict::NotControllable);
}

#[test]
fn larger_budgets_keep_a_witnessed_verdict() {
    let m = ManifoldSpec::pseudo_hyperbolic(2, 1, 1.0).unwrap();
    for budget in [1, 4, 16, 32] {
        let opts = ControllabilityOptions {
            budget,
            ..ControllabilityOptions::default()
        };
        let r = controllability_verdict(&m, &m.default_point(), opts).unwrap();
        assert_eq!(r.verdict, Verdict::ControllableWitnessed, "budget {budget}");
    }
}

#[test]
fn fixed_point_groups_show_no_translation() {
    let sig = Signature::lorentzian(2);
    let mut r = rng(21);
    let x0 = gaussian(&mut r, 3);
    let gens: Vec<_> = (0..3)
        .map(|_| fixed_point_embedding(&x0, &random_lorentz(sig, &mut r)).unwrap())
        .collect();
    let opts = SearchOptions {
        budget: 10_000,
        max_word_len: 16,
        ..SearchOptions::default()
    };
    match classify_subgroup(&gens, opts).unwrap() {
        Classification::NoTranslationDetected { products_checked, .. } => assert_eq!(products_checked, 10_000),
        other => panic!("unexpected {other:?}"),
    }
}
