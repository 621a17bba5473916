//! Rolling of a manifold `M` on a model space `M^` without slipping or
//! twisting.
//!
//! A configuration `(x, x^; A)` is stored as a pair of frames: `A` maps the
//! frame `frame_m` at `x` to the frame `frame_hat` at `x^`. Both frames are
//! positively oriented and future directed where the catalog knows a time
//! orientation, so `A` always lies in the identity component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Frame, ManifoldSpec, Point};
use crate::minkowski::{LorentzMatrix, Matrix, SEElement, Signature, Vector};
use crate::transport::{
    antidevelop, fd_derivative, fmt_num, frame_along, transport_along, trapezoid, Curve, DevelopmentCurve, Escape,
};

/// Tolerance used when validating configuration frames.
pub const STATE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigState {
    pub x: Point,
    pub frame_m: Frame,
    pub x_hat: Vector,
    /// Images `A E_i` of the frame vectors.
    pub frame_hat: Vec<Vector>,
}

fn check_orientation(manifold: &ManifoldSpec, x: &Vector, vectors: &[Vector], what: &str) -> Result<()> {
    if manifold.orientation_sign(x, vectors) <= 0.0 {
        return Err(Error::InvalidState(format!("{what} is negatively oriented")));
    }
    if let Some(hint) = manifold.future_hint(x) {
        let g = manifold.inner_form(x)?;
        if g.apply(vectors.last().expect("nonempty"), &hint) >= 0.0 {
            return Err(Error::InvalidState(format!("{what} is past directed")));
        }
    }
    Ok(())
}

impl ConfigState {
    /// Validates both frames against `manifold` and `target`.
    pub fn new(
        manifold: &ManifoldSpec,
        target: &ManifoldSpec,
        frame_m: Frame,
        x_hat: Vector,
        frame_hat: Vec<Vector>,
    ) -> Result<Self> {
        let q = Self {
            x: frame_m.base.clone(),
            frame_m,
            x_hat,
            frame_hat,
        };
        q.validate(manifold, target, STATE_TOL)?;
        Ok(q)
    }

    /// `x^ = 0` and `A` mapping `frame` to the standard basis of the flat
    /// model space.
    pub fn at_origin(manifold: &ManifoldSpec, frame: Frame) -> Result<Self> {
        let sig = manifold.signature();
        let m = sig.dim();
        let basis = (0..m).map(|i| Matrix::identity(m, m).column(i).into_owned()).collect();
        Self::new(manifold, &flat_target(sig), frame, Vector::zeros(m), basis)
    }

    pub fn validate(&self, manifold: &ManifoldSpec, target: &ManifoldSpec, tol: f64) -> Result<()> {
        if manifold.signature() != target.signature() {
            return Err(Error::InvalidState(format!(
                "signatures differ: {} and {}",
                manifold.signature(),
                target.signature()
            )));
        }
        self.frame_m.validate(manifold, tol)?;
        let hat = Frame {
            base: Point::new(self.x_hat.clone()),
            vectors: self.frame_hat.clone(),
        };
        target.validate_point(&hat.base)?;
        hat.validate(target, tol)?;
        check_orientation(manifold, &self.x.coords, &self.frame_m.vectors, "frame on M")?;
        check_orientation(target, &self.x_hat, &self.frame_hat, "frame on the model space")?;
        Ok(())
    }

    pub fn hat_frame(&self) -> Frame {
        Frame {
            base: Point::new(self.x_hat.clone()),
            vectors: self.frame_hat.clone(),
        }
    }

    /// `A v` for a tangent vector `v` at `x`.
    pub fn apply(&self, manifold: &ManifoldSpec, v: &Vector) -> Result<Vector> {
        let c = self.frame_m.components(manifold, v)?;
        Ok(self.hat_frame().combine(&c))
    }

    /// Largest coordinate difference over all slots.
    pub fn distance(&self, other: &ConfigState) -> f64 {
        let mut d = (&self.x.coords - &other.x.coords).amax();
        d = d.max((&self.x_hat - &other.x_hat).amax());
        for (a, b) in self.frame_m.vectors.iter().zip(&other.frame_m.vectors) {
            d = d.max((a - b).amax());
        }
        for (a, b) in self.frame_hat.iter().zip(&other.frame_hat) {
            d = d.max((a - b).amax());
        }
        d
    }

    pub fn to_record(&self) -> ConfigRecord {
        let rows = |vs: &[Vector]| vs.iter().map(|v| v.iter().copied().collect()).collect();
        ConfigRecord {
            x: self.x.coords.iter().copied().collect(),
            frame_m: rows(&self.frame_m.vectors),
            x_hat: self.x_hat.iter().copied().collect(),
            frame_hat: rows(&self.frame_hat),
        }
    }
}

/// JSON shape of a configuration; frames are lists of vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConfigRecord {
    pub x: Vec<f64>,
    pub frame_m: Vec<Vec<f64>>,
    pub x_hat: Vec<f64>,
    pub frame_hat: Vec<Vec<f64>>,
}

impl ConfigRecord {
    pub fn to_state(&self, manifold: &ManifoldSpec, target: &ManifoldSpec) -> Result<ConfigState> {
        let vecs = |rows: &[Vec<f64>]| rows.iter().map(|r| Vector::from_column_slice(r)).collect::<Vec<_>>();
        let frame_m = Frame {
            base: Point::from_slice(&self.x),
            vectors: vecs(&self.frame_m),
        };
        ConfigState::new(
            manifold,
            target,
            frame_m,
            Vector::from_column_slice(&self.x_hat),
            vecs(&self.frame_hat),
        )
    }
}

/// The flat model space `R^{n,nu}`.
pub fn flat_target(sig: Signature) -> ManifoldSpec {
    ManifoldSpec::flat(sig.n, sig.nu)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RollingCurve {
    pub grid: Vec<f64>,
    pub states: Vec<ConfigState>,
    pub base: Curve,
    /// Set when the model-space curve left its domain before the end.
    pub escape: Option<Escape>,
}

impl RollingCurve {
    pub fn end(&self) -> &ConfigState {
        self.states.last().expect("nonempty")
    }

    pub fn is_complete(&self) -> bool {
        self.escape.is_none()
    }

    /// CSV columns: `t`, `x*`, `xhat*`, then `a{i}_{j}`, the j-th coordinate
    /// of the i-th model-space frame vector.
    pub fn to_csv(&self) -> String {
        let s0 = &self.states[0];
        let mut header = vec!["t".to_string()];
        header.extend((1..=s0.x.coords.len()).map(|i| format!("x{i}")));
        header.extend((1..=s0.x_hat.len()).map(|i| format!("xhat{i}")));
        for (i, v) in s0.frame_hat.iter().enumerate() {
            header.extend((1..=v.len()).map(|j| format!("a{}_{j}", i + 1)));
        }
        let mut out = header.join(",");
        out.push('\n');
        for (t, s) in self.grid.iter().zip(&self.states) {
            let mut row = vec![fmt_num(*t)];
            row.extend(s.x.coords.iter().map(|v| fmt_num(*v)));
            row.extend(s.x_hat.iter().map(|v| fmt_num(*v)));
            for v in &s.frame_hat {
                row.extend(v.iter().map(|c| fmt_num(*c)));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn check_start(q0: &ConfigState, curve: &Curve) -> Result<()> {
    let gap = (curve.start() - &q0.x.coords).amax();
    if gap > 1e-9 * curve.start().amax().max(1.0) {
        return Err(Error::InvalidCurve(format!(
            "curve starts {gap:e} away from the contact point"
        )));
    }
    Ok(())
}

/// Rolling on the flat model space: `x^(t) = x^_0 + A_0 (development of the
/// curve)`, and `A(t)` maps the transported frame to the constant frame.
pub fn roll_flat(manifold: &ManifoldSpec, q0: &ConfigState, curve: &Curve) -> Result<RollingCurve> {
    check_start(q0, curve)?;
    let along = frame_along(manifold, curve, &q0.frame_m)?;
    let dev = trapezoid(&curve.grid, &along.components);
    let hat = q0.hat_frame();
    let states = (0..curve.len())
        .map(|k| ConfigState {
            x: Point::new(curve.points[k].clone()),
            frame_m: Frame {
                base: Point::new(curve.points[k].clone()),
                vectors: along.frames[k].clone(),
            },
            x_hat: &q0.x_hat + hat.combine(&dev[k]),
            frame_hat: q0.frame_hat.clone(),
        })
        .collect();
    Ok(RollingCurve {
        grid: curve.grid.clone(),
        states,
        base: curve.clone(),
        escape: None,
    })
}

/// Rolling on a catalog model space: the model-space curve is the
/// anti-development of the development of the base curve, read in the
/// frames of `q0`. Stops early, with `escape` set, if it leaves the domain.
pub fn roll_general(
    manifold: &ManifoldSpec,
    target: &ManifoldSpec,
    q0: &ConfigState,
    curve: &Curve,
) -> Result<RollingCurve> {
    check_start(q0, curve)?;
    if manifold.signature() != target.signature() {
        return Err(Error::InvalidState("signatures of M and the model space differ".into()));
    }
    let along = frame_along(manifold, curve, &q0.frame_m)?;
    let dev = DevelopmentCurve {
        grid: curve.grid.clone(),
        points: trapezoid(&curve.grid, &along.components),
        velocities: along.components,
    };
    let anti = antidevelop(target, &q0.hat_frame(), &dev)?;
    let n = anti.curve.len();
    let states = (0..n)
        .map(|k| ConfigState {
            x: Point::new(curve.points[k].clone()),
            frame_m: Frame {
                base: Point::new(curve.points[k].clone()),
                vectors: along.frames[k].clone(),
            },
            x_hat: anti.curve.points[k].clone(),
            frame_hat: anti.frames[k].clone(),
        })
        .collect();
    Ok(RollingCurve {
        grid: curve.grid[..n].to_vec(),
        states,
        base: curve.clone(),
        escape: anti.escape,
    })
}

/// `(y, C) . (x, x^; A) = (x, C x^ + y; C A)`.
pub fn se_act(b: &SEElement, q: &ConfigState) -> Result<ConfigState> {
    b.signature().check_dim(&q.x_hat)?;
    Ok(ConfigState {
        x: q.x.clone(),
        frame_m: q.frame_m.clone(),
        x_hat: b.apply(&q.x_hat),
        frame_hat: q.frame_hat.iter().map(|v| b.linear_part().apply(v)).collect(),
    })
}

/// The unique `B` with `se_act(B, q) = q_bar`, for configurations over the
/// same point of `M`.
pub fn fiber_transporter(manifold: &ManifoldSpec, q: &ConfigState, q_bar: &ConfigState) -> Result<SEElement> {
    let gap = (&q.x.coords - &q_bar.x.coords).amax();
    if gap > 1e-9 * q.x.coords.amax().max(1.0) {
        return Err(Error::DifferentFibers);
    }
    let sig = manifold.signature();
    let m = sig.dim();
    if q.x_hat.len() != m || q_bar.x_hat.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: q.x_hat.len().max(q_bar.x_hat.len()),
        });
    }
    // E_j = sum_i L_ij Ebar_i, so C (A E_j) = sum_i L_ij (Abar Ebar_i)
    let l = crate::transport::frame_matrix(manifold, &q_bar.frame_m, &q.frame_m.vectors)?;
    let f = Matrix::from_columns(&q.frame_hat);
    let f_bar = Matrix::from_columns(&q_bar.frame_hat);
    let j = sig.form();
    let f_inv = &j * f.transpose() * &j;
    let c = LorentzMatrix::with_tolerance(sig, f_bar * l * f_inv, 1e-7)?;
    let y = &q_bar.x_hat - c.apply(&q.x_hat);
    SEElement::new(y, c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    /// Largest `|dx^/dt - A gamma'|`.
    pub slip: f64,
    /// Largest covariant derivative of `A V` for parallel fields `V` along the base.
    pub twist: f64,
}

/// Measures how far `rc` is from a no-slip, no-twist rolling, using finite
/// differences on its grid.
pub fn constraint_residuals(
    manifold: &ManifoldSpec,
    target: &ManifoldSpec,
    rc: &RollingCurve,
) -> Result<ConstraintResiduals> {
    let n = rc.states.len();
    let base = Curve {
        grid: rc.base.grid[..n].to_vec(),
        points: rc.base.points[..n].to_vec(),
        velocities: rc.base.velocities[..n].to_vec(),
    };
    let x_hat: Vec<Vector> = rc.states.iter().map(|s| s.x_hat.clone()).collect();
    let x_hat_dot = fd_derivative(&rc.grid, &x_hat);
    let mut slip: f64 = 0.0;
    for k in 0..n {
        let a_gamma = rc.states[k].apply(manifold, &base.velocities[k])?;
        let mut d = &x_hat_dot[k] - a_gamma;
        if target.quadric().is_some() {
            d = target.tangent_project(&Point::new(x_hat[k].clone()), &d)?.vec;
        }
        slip = slip.max(d.norm());
    }
    let parallel = transport_along(manifold, &base, &rc.states[0].frame_m.vectors)?;
    let mut twist: f64 = 0.0;
    for j in 0..parallel[0].len() {
        let w: Vec<Vector> = (0..n)
            .map(|k| rc.states[k].apply(manifold, &parallel[k][j]))
            .collect::<Result<_>>()?;
        let w_dot = fd_derivative(&rc.grid, &w);
        for k in 0..n {
            let conn = target.connection_at(&x_hat[k])?;
            let cov = &w_dot[k] + conn.apply(&x_hat_dot[k], &w[k]);
            twist = twist.max(cov.norm());
        }
    }
    Ok(ConstraintResiduals { slip, twist })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::geodesic;
    use std::f64::consts::PI;

    fn v(c: &[f64]) -> Vector {
        Vector::from_column_slice(c)
    }

    fn ds() -> ManifoldSpec {
        ManifoldSpec::pseudo_sphere(2, 1, 1.0).unwrap()
    }

    #[test]
    fn flat_rolling_translates() {
        let m = ManifoldSpec::flat(2, 1);
        let frame = m.canonical_frame(&Point::from_slice(&[0.0; 3])).unwrap();
        let q0 = ConfigState::at_origin(&m, frame).unwrap();
        let c = Curve::sample(&m, 0.0, 1.0, 100, |t| {
            (v(&[t.sin(), t * t, 0.3 * t]), v(&[t.cos(), 2.0 * t, 0.3]))
        })
        .unwrap();
        let rc = roll_flat(&m, &q0, &c).unwrap();
        for (s, p) in rc.states.iter().zip(&c.points) {
            assert!((&s.x_hat - p).amax() < 1e-4);
            assert_eq!(s.frame_hat, q0.frame_hat);
        }
        let r = constraint_residuals(&m, &flat_target(m.signature()), &rc).unwrap();
        assert!(r.slip < 1e-3 && r.twist < 1e-12, "{r:?}");
    }

    #[test]
    fn closed_geodesic_rolls_to_a_translation() {
        let m = ds();
        let x = Point::from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let frame = m.canonical_frame(&x).unwrap();
        let q0 = ConfigState::at_origin(&m, frame).unwrap();
        let c = geodesic(&m, &x, &v(&[0.0, 1.0, 0.0, 0.0]), 2.0 * PI, 1e-3).unwrap();
        let rc = roll_flat(&m, &q0, &c).unwrap();
        let b = fiber_transporter(&m, &q0, rc.end()).unwrap();
        assert!(b.linear_part().distance_from_identity() < 1e-6);
        assert!((b.translation_part().norm() - 2.0 * PI).abs() < 1e-4);
        let r = constraint_residuals(&m, &flat_target(m.signature()), &rc).unwrap();
        assert!(r.slip < 1e-5 && r.twist < 1e-5, "{r:?}");
    }

    #[test]
    fn constructed_violations_are_detected() {
        let m = ManifoldSpec::flat(1, 1);
        let frame = m.canonical_frame(&Point::from_slice(&[0.0, 0.0])).unwrap();
        let q0 = ConfigState::at_origin(&m, frame).unwrap();
        let c = Curve::sample(&m, 0.0, 1.0, 100, |t| (v(&[2.0 * t, 0.0]), v(&[2.0, 0.0]))).unwrap();
        let rc = roll_flat(&m, &q0, &c).unwrap();
        let target = flat_target(m.signature());

        let mut frozen = rc.clone();
        for s in &mut frozen.states {
            s.x_hat = q0.x_hat.clone();
        }
        let r = constraint_residuals(&m, &target, &frozen).unwrap();
        assert!((r.slip - 2.0).abs() < 1e-9);

        let mut twisted = rc.clone();
        for (t, s) in twisted.grid.iter().zip(&mut twisted.states) {
            let b = LorentzMatrix::boost(m.signature(), 0, 1, 0.5 * t).unwrap();
            s.frame_hat = s.frame_hat.iter().map(|w| b.apply(w)).collect();
        }
        let r = constraint_residuals(&m, &target, &twisted).unwrap();
        assert!(r.twist > 0.4, "{r:?}");
    }

    #[test]
    fn fiber_transporter_inverts_the_action() {
        let m = ds();
        let x = Point::from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let q = ConfigState::at_origin(&m, m.random_orthonormal_frame(&x, 1).unwrap()).unwrap();
        let sig = m.signature();
        let c = LorentzMatrix::boost(sig, 1, 2, 0.7)
            .unwrap()
            .compose(&LorentzMatrix::rotation(sig, 0, 1, 1.1).unwrap());
        let b = SEElement::new(v(&[0.5, -1.0, 2.0]), c).unwrap();
        let q_bar = se_act(&b, &q).unwrap();
        let found = fiber_transporter(&m, &q, &q_bar).unwrap();
        assert!(found.distance(&b) < 1e-10);
        let id = fiber_transporter(&m, &q, &q).unwrap();
        assert!(id.distance(&SEElement::identity(sig)) < 1e-12);

        let other = ConfigState::at_origin(
            &m,
            m.canonical_frame(&Point::from_slice(&[-1.0, 0.0, 0.0, 0.0])).unwrap(),
        )
        .unwrap();
        assert_eq!(fiber_transporter(&m, &q, &other), Err(Error::DifferentFibers));
    }

    #[test]
    fn general_rolling_on_flat_target_matches_flat_rolling() {
        let m = ds();
        let x = Point::from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let q0 = ConfigState::at_origin(&m, m.canonical_frame(&x).unwrap()).unwrap();
        let c = geodesic(&m, &x, &v(&[0.0, 0.6, 0.3, 0.2]), 1.0, 1e-2).unwrap();
        let a = roll_flat(&m, &q0, &c).unwrap();
        let b = roll_general(&m, &flat_target(m.signature()), &q0, &c).unwrap();
        for (s, t) in a.states.iter().zip(&b.states) {
            assert!(s.distance(t) < 1e-12);
        }
    }

    #[test]
    fn invalid_states_are_rejected() {
        let m = ManifoldSpec::flat(2, 1);
        let mut frame = m.canonical_frame(&Point::from_slice(&[0.0; 3])).unwrap();
        frame.vectors[2] = -&frame.vectors[2];
        assert!(ConfigState::at_origin(&m, frame.clone()).is_err());
        frame.vectors.swap(0, 1);
        frame.vectors[2] = -&frame.vectors[2];
        assert!(ConfigState::at_origin(&m, frame).is_err());
    }
}
