use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use lorroll::{
    geodesic, holonomy_algebra_estimate, parallel_transport, roll_flat, translation_closure_word, ConfigState,
    HolonomyMethod, ManifoldSpec, Point, SEElement, Signature, Vector,
};

fn ds() -> ManifoldSpec {
    ManifoldSpec::pseudo_sphere(2, 1, 1.0).unwrap()
}

fn base() -> (Point, Vector) {
    (
        Point::from_slice(&[1.0, 0.0, 0.0, 0.0]),
        Vector::from_column_slice(&[0.0, 1.0, 0.0, 0.0]),
    )
}

fn geodesics(c: &mut Criterion) {
    let m = ds();
    let (x, v) = base();
    c.bench_function("geodesic S(2,1) 2pi step 1e-3", |b| {
        b.iter(|| geodesic(&m, &x, &v, black_box(2.0 * PI), 1e-3).unwrap())
    });
    let cp = ManifoldSpec::clifton_pohl();
    let y = Point::from_slice(&[1.0, 0.5]);
    let w = Vector::from_column_slice(&[0.3, 0.2]);
    c.bench_function("geodesic clifton-pohl T=1 step 1e-3", |b| {
        b.iter(|| geodesic(&cp, &y, &w, black_box(1.0), 1e-3).unwrap())
    });
}

fn transport_and_rolling(c: &mut Criterion) {
    let m = ds();
    let (x, v) = base();
    let curve = geodesic(&m, &x, &v, 2.0 * PI, 1e-3).unwrap();
    let w = Vector::from_column_slice(&[0.0, 0.0, 1.0, 0.5]);
    c.bench_function("parallel transport along closed geodesic", |b| {
        b.iter(|| parallel_transport(&m, &curve, black_box(&w)).unwrap())
    });
    let q = ConfigState::at_origin(&m, m.canonical_frame(&x).unwrap()).unwrap();
    c.bench_function("roll S(2,1) on flat along closed geodesic", |b| {
        b.iter(|| roll_flat(&m, black_box(&q), &curve).unwrap())
    });
}

fn holonomy(c: &mut Criterion) {
    let m = ManifoldSpec::pseudo_sphere(3, 1, 1.0).unwrap();
    let x = m.default_point();
    c.bench_function("holonomy S(3,1) curvature", |b| {
        b.iter(|| holonomy_algebra_estimate(&m, &x, 12, 0, HolonomyMethod::Curvature).unwrap())
    });
    c.bench_function("holonomy S(3,1) loops budget 12", |b| {
        b.iter(|| holonomy_algebra_estimate(&m, &x, 12, 0, HolonomyMethod::Loops).unwrap())
    });
}

fn closure(c: &mut Criterion) {
    let sig = Signature::lorentzian(3);
    let v = Vector::from_column_slice(&[1.0, 0.0, 0.0, 1.0]);
    let u = Vector::from_column_slice(&[0.3, -2.0, 0.7, 1.1]);
    c.bench_function("closure word lightlike seed to spacelike target", |b| {
        b.iter(|| {
            let w = translation_closure_word(black_box(&v), &u, |a| Ok(SEElement::linear(a.clone()))).unwrap();
            w.compose(sig)
        })
    });
}

criterion_group!(benches, geodesics, transport_and_rolling, holonomy, closure);
criterion_main!(benches);
