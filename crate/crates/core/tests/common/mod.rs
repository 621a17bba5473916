//! Seeded random fixtures shared by the integration tests.
#![allow(dead_code)]

use lorroll::manifold::CustomMetric;
use lorroll::{
    geodesic, so_exp, ConfigState, Curve, LieAlgebraElement, LorentzMatrix, ManifoldSpec, Point, SEElement, Signature,
    Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut TestRng, d: usize) -> Vector {
    Vector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

/// A warped Lorentzian chart on `R^3`.
pub fn warped() -> ManifoldSpec {
    let sig = Signature::new(2, 1).unwrap();
    let metric = CustomMetric::from_json(r#"{"g11": "1", "g22": "1 + 0.1*x1^2", "g33": "-exp(0.2*x1)"}"#, sig).unwrap();
    ManifoldSpec::custom(metric)
}

pub fn catalog() -> Vec<(&'static str, ManifoldSpec)> {
    vec![
        ("flat(2,1)", ManifoldSpec::flat(2, 1)),
        ("S(2,1)", ManifoldSpec::pseudo_sphere(2, 1, 1.0).unwrap()),
        ("H(2,1)", ManifoldSpec::pseudo_hyperbolic(2, 1, 1.0).unwrap()),
        ("S(3,1)", ManifoldSpec::pseudo_sphere(3, 1, 1.0).unwrap()),
        ("H(2,2)", ManifoldSpec::pseudo_hyperbolic(2, 2, 1.0).unwrap()),
        ("clifton-pohl", ManifoldSpec::clifton_pohl()),
        ("warped", warped()),
    ]
}

pub fn random_tangent(m: &ManifoldSpec, x: &Point, rng: &mut TestRng) -> Vector {
    let w = gaussian(rng, m.coord_dim());
    m.tangent_project(x, &w).unwrap().vec
}

/// Tangent vector of Euclidean length `len`, drawn away from the light cone.
pub fn random_non_null(m: &ManifoldSpec, x: &Point, len: f64, rng: &mut TestRng) -> Vector {
    loop {
        let v = random_tangent(m, x, rng);
        let n = v.norm();
        if n < 1e-3 {
            continue;
        }
        let v = v * (len / n);
        let q = m.inner_at(x, &v, &v).unwrap();
        if q.abs() > 0.2 * len * len {
            return v;
        }
    }
}

/// A point near the default one.
pub fn random_point(m: &ManifoldSpec, rng: &mut TestRng) -> Point {
    let x0 = m.default_point();
    match m.quadric() {
        Some(_) => {
            let v = random_tangent(m, &x0, rng);
            let v = &v * (0.5 / v.norm().max(1e-9));
            Point::new(m.exact_geodesic(&x0.coords, &v, 1.0).unwrap().0)
        }
        None => {
            let d = gaussian(rng, m.coord_dim()) * 0.2;
            Point::new(&x0.coords + d)
        }
    }
}

/// Two geodesic segments of unit Euclidean speed meeting at a corner,
/// sampled every `step`.
pub fn random_curve(m: &ManifoldSpec, x: &Point, rng: &mut TestRng, step: f64) -> Curve {
    let l1 = rng.random_range(0.2..0.5);
    let v1 = random_tangent(m, x, rng);
    let v1 = &v1 * (1.0 / v1.norm().max(1e-9));
    let a = geodesic(m, x, &v1, l1, step).unwrap();
    let y = a.end_point();
    let v2 = random_tangent(m, &y, rng);
    let v2 = &v2 * (1.0 / v2.norm().max(1e-9));
    let l2 = rng.random_range(0.2..0.5);
    let b = geodesic(m, &y, &v2, l2, step).unwrap();
    a.concat(&b).unwrap()
}

pub fn random_algebra(sig: Signature, scale: f64, rng: &mut TestRng) -> LieAlgebraElement {
    LieAlgebraElement::basis(sig)
        .iter()
        .fold(LieAlgebraElement::zero(sig), |acc, e| {
            acc.add(&e.scale(scale * rng.sample::<f64, _>(StandardNormal)))
        })
}

pub fn random_lorentz(sig: Signature, rng: &mut TestRng) -> LorentzMatrix {
    so_exp(&random_algebra(sig, 0.5, rng))
}

pub fn random_se(sig: Signature, rng: &mut TestRng) -> SEElement {
    SEElement::new(gaussian(rng, sig.dim()), random_lorentz(sig, rng)).unwrap()
}

/// Random configuration over `m` with the flat target.
pub fn random_state(m: &ManifoldSpec, rng: &mut TestRng) -> ConfigState {
    let x = random_point(m, rng);
    let frame = m.random_orthonormal_frame(&x, rng.random()).unwrap();
    let q = ConfigState::at_origin(m, frame).unwrap();
    lorroll::se_act(&random_se(m.signature(), rng), &q).unwrap()
}
