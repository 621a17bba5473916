mod common;

use common::*;
use lorroll::rolling::flat_target;
use lorroll::{
    constraint_residuals, fiber_transporter, roll_flat, roll_general, se_act, ConfigState, ManifoldSpec, SEElement,
};

fn ds() -> ManifoldSpec {
    ManifoldSpec::pseudo_sphere(2, 1, 1.0).unwrap()
}

#[test]
fn rolling_commutes_with_the_group_action() {
    let m = ds();
    for seed in 0..10 {
        let mut r = rng(seed);
        let q0 = random_state(&m, &mut r);
        let b = random_se(m.signature(), &mut r);
        let c = random_curve(&m, &q0.x, &mut r, 1e-2);
        let rolled_then_moved: Vec<ConfigState> = roll_flat(&m, &q0, &c)
            .unwrap()
            .states
            .iter()
            .map(|q| se_act(&b, q).unwrap())
            .collect();
        let moved_then_rolled = roll_flat(&m, &se_act(&b, &q0).unwrap(), &c).unwrap();
        let sup = rolled_then_moved
            .iter()
            .zip(&moved_then_rolled.states)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max);
        assert!(sup < 1e-9, "seed {seed}: {sup}");
    }
}

#[test]
fn rolling_along_a_concatenation_continues_the_first_roll() {
    for (name, m) in catalog() {
        let mut r = rng(7);
        let q0 = random_state(&m, &mut r);
        let c1 = random_curve(&m, &q0.x, &mut r, 1e-2);
        let c2 = random_curve(&m, &c1.end_point(), &mut r, 1e-2);
        let first = roll_flat(&m, &q0, &c1).unwrap();
        let second = roll_flat(&m, first.end(), &c2).unwrap();
        let whole = roll_flat(&m, &q0, &c1.concat(&c2).unwrap()).unwrap();
        assert!(whole.end().distance(second.end()) < 1e-9, "{name}");
    }
}

#[test]
fn rolled_states_satisfy_the_constraints() {
    for (name, m) in catalog() {
        let mut r = rng(3);
        let q0 = random_state(&m, &mut r);
        let c = random_curve(&m, &q0.x, &mut r, 1e-3);
        let rc = roll_flat(&m, &q0, &c).unwrap();
        let res = constraint_residuals(&m, &flat_target(m.signature()), &rc).unwrap();
        assert!(res.slip < 1e-4 && res.twist < 1e-4, "{name}: {res:?}");
    }
}

#[test]
fn rolling_de_sitter_on_anti_de_sitter() {
    let m = ds();
    let target = ManifoldSpec::pseudo_hyperbolic(2, 1, 1.0).unwrap();
    let x = m.default_point();
    let x_hat = target.default_point();
    let q0 = ConfigState::new(
        &m,
        &target,
        m.canonical_frame(&x).unwrap(),
        x_hat.coords.clone(),
        target.canonical_frame(&x_hat).unwrap().vectors,
    )
    .unwrap();
    let mut r = rng(5);
    let c = random_curve(&m, &x, &mut r, 1e-3);
    let rc = roll_general(&m, &target, &q0, &c).unwrap();
    assert!(rc.is_complete());
    let res = constraint_residuals(&m, &target, &rc).unwrap();
    assert!(res.slip < 1e-3 && res.twist < 1e-3, "{res:?}");
}

#[test]
fn fiber_action_is_free_and_transitive() {
    for (name, m) in catalog() {
        for seed in 0..5 {
            let mut r = rng(50 + seed);
            let q = random_state(&m, &mut r);
            let b = random_se(m.signature(), &mut r);
            let q_bar = se_act(&b, &q).unwrap();
            let found = fiber_transporter(&m, &q, &q_bar).unwrap();
            assert!(found.distance(&b) < 1e-10, "{name}: {}", found.distance(&b));
            assert!(se_act(&found, &q).unwrap().distance(&q_bar) < 1e-10);
            let id = fiber_transporter(&m, &q, &q).unwrap();
            assert!(id.distance(&SEElement::identity(m.signature())) < 1e-10);
        }
    }
}
