mod common;

use common::*;
use lorroll::transport::{develop_in, transport_along, ProbeOptions};
use lorroll::{antidevelop, completeness_probe, geodesic, parallel_transport, DevelopmentCurve, ManifoldSpec, Point};
use rand::Rng;

#[test]
fn transport_is_an_isometry_across_the_catalog() {
    let mut worst: f64 = 0.0;
    for (name, m) in catalog() {
        for seed in 0..6 {
            let mut r = rng(seed);
            let x = random_point(&m, &mut r);
            let c = random_curve(&m, &x, &mut r, 1e-3);
            let (v, w) = (random_tangent(&m, &x, &mut r), random_tangent(&m, &x, &mut r));
            let moved = transport_along(&m, &c, &[v.clone(), w.clone()]).unwrap();
            let end = moved.last().unwrap();
            let y = c.end_point();
            for (a, b, pa, pb) in [
                (&v, &w, &end[0], &end[1]),
                (&v, &v, &end[0], &end[0]),
                (&w, &w, &end[1], &end[1]),
            ] {
                let before = m.inner_at(&x, a, b).unwrap();
                let after = m.inner_at(&y, pa, pb).unwrap();
                worst = worst.max((before - after).abs());
                assert!((before - after).abs() < 1e-8, "{name} seed {seed}: {before} vs {after}");
            }
        }
    }
    assert!(worst < 1e-8);
}

#[test]
fn transport_back_along_the_reversed_curve_is_the_identity() {
    for (name, m) in catalog() {
        let mut r = rng(11);
        let x = random_point(&m, &mut r);
        let c = random_curve(&m, &x, &mut r, 1e-3);
        let v = random_tangent(&m, &x, &mut r);
        let (pv, _) = parallel_transport(&m, &c, &v).unwrap();
        let (back, _) = parallel_transport(&m, &c.reversed(), &pv).unwrap();
        assert!((&back - &v).amax() < 1e-9 * v.amax().max(1.0), "{name}");
    }
}

#[test]
fn geodesic_integrator_is_fourth_order() {
    let quadrics = [
        ManifoldSpec::pseudo_sphere(2, 1, 1.0).unwrap(),
        ManifoldSpec::pseudo_hyperbolic(2, 1, 1.0).unwrap(),
    ];
    for m in &quadrics {
        for seed in 0..5 {
            let mut r = rng(100 + seed);
            let x = random_point(m, &mut r);
            let v = random_non_null(m, &x, 1.0, &mut r);
            let t_end = 2.0;
            let exact = m.exact_geodesic(&x.coords, &v, t_end).unwrap().0;
            let err = |h: f64| (geodesic(m, &x, &v, t_end, h).unwrap().end() - &exact).amax();
            let ratio = err(0.1) / err(0.05);
            assert!((8.0..=32.0).contains(&ratio), "seed {seed}: ratio {ratio}");
        }
    }
}

#[test]
fn development_round_trips() {
    for (name, m) in catalog() {
        for seed in 0..4 {
            let mut r = rng(200 + seed);
            let x = random_point(&m, &mut r);
            let frame = m.random_orthonormal_frame(&x, r.random()).unwrap();

            let c = random_curve(&m, &x, &mut r, 1e-3);
            let dev = develop_in(&m, &c, &frame).unwrap();
            let back = antidevelop(&m, &frame, &dev).unwrap();
            assert!(back.is_complete(), "{name}");
            let err = c
                .points
                .iter()
                .zip(&back.curve.points)
                .map(|(a, b)| (a - b).amax())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "{name} seed {seed}: antidevelop(develop) error {err}");

            let v = random_tangent(&m, &x, &mut r);
            let comps = frame.components(&m, &v).unwrap();
            let line = DevelopmentCurve::line(&(comps / v.norm().max(1e-9) * 0.6), 1.0, 1000);
            let anti = antidevelop(&m, &frame, &line).unwrap();
            assert!(anti.is_complete(), "{name}");
            let again = develop_in(&m, &anti.curve, &frame).unwrap();
            let err = line
                .points
                .iter()
                .zip(&again.points)
                .map(|(a, b)| (a - b).amax())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "{name} seed {seed}: develop(antidevelop) error {err}");
        }
    }
}

#[test]
fn clifton_pohl_blow_up_is_stable_under_step_halving() {
    let m = ManifoldSpec::clifton_pohl();
    let x = Point::from_slice(&[1.0, 0.0]);
    let v = lorroll::Vector::from_column_slice(&[0.0, 1.0]);
    let coarse = completeness_probe(&m, &x, &v, 4.0).unwrap();
    let opts = ProbeOptions::default();
    let fine = lorroll::transport::completeness_probe_with(
        &m,
        &x,
        &v,
        4.0,
        ProbeOptions {
            initial_step: opts.initial_step / 2.0,
            max_step: opts.max_step / 2.0,
            ..opts
        },
    )
    .unwrap();
    assert!(!coarse.reached && !fine.reached);
    assert!((coarse.t_final - fine.t_final).abs() < 0.01 * fine.t_final);
    // u = 1, v = tan(t): the geodesic leaves at t = pi/2
    assert!((fine.t_final - std::f64::consts::FRAC_PI_2).abs() < 1e-2);
}
