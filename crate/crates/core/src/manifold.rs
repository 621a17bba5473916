//! Catalog of pseudo-Riemannian manifolds.
//!
//! Flat spaces, the Clifton-Pohl chart and user metrics live in a single
//! chart. The hyperquadrics `S^{n,nu}(r) = {<p,p> = r^2} in R^{n+1,nu}` and
//! `H^{n,nu}(r) = {<p,p> = -r^2} in R^{n,nu+1}` are kept in ambient
//! coordinates; their Levi-Civita connection is the tangential projection of
//! the flat ambient one.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::minkowski::{pseudo_gram_schmidt, Matrix, Signature, Vector};

/// Central-difference step for metric derivatives.
pub const FD_STEP: f64 = 1e-5;
/// Step for the second metric derivatives used by chart curvature.
pub const FD_STEP_SECOND: f64 = 1e-4;

/// Tolerance for points on a quadric and for tangency.
pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub coords: Vector,
}

impl Point {
    pub fn new(coords: Vector) -> Self {
        Self { coords }
    }

    pub fn from_slice(c: &[f64]) -> Self {
        Self {
            coords: Vector::from_column_slice(c),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    pub base: Point,
    pub vec: Vector,
}

/// Pseudo-orthonormal frame; spacelike vectors first, timelike last.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub base: Point,
    pub vectors: Vec<Vector>,
}

impl Frame {
    /// Frame vectors as columns.
    pub fn matrix(&self) -> Matrix {
        Matrix::from_columns(&self.vectors)
    }

    pub fn gram(&self, manifold: &ManifoldSpec) -> Result<Matrix> {
        let g = manifold.inner_form(&self.base.coords)?;
        let m = self.vectors.len();
        Ok(Matrix::from_fn(m, m, |i, j| {
            g.apply(&self.vectors[i], &self.vectors[j])
        }))
    }

    /// Coordinates of `v` in this frame: `c_i = eps_i <E_i, v>`.
    pub fn components(&self, manifold: &ManifoldSpec, v: &Vector) -> Result<Vector> {
        let g = manifold.inner_form(&self.base.coords)?;
        let sig = manifold.signature();
        Ok(Vector::from_fn(self.vectors.len(), |i, _| {
            sig.sign(i) * g.apply(&self.vectors[i], v)
        }))
    }

    /// `sum_i c_i E_i`.
    pub fn combine(&self, c: &Vector) -> Vector {
        let mut out = Vector::zeros(self.vectors[0].len());
        for (ci, e) in c.iter().zip(&self.vectors) {
            out.axpy(*ci, e, 1.0);
        }
        out
    }

    pub fn validate(&self, manifold: &ManifoldSpec, tol: f64) -> Result<()> {
        let sig = manifold.signature();
        if self.vectors.len() != sig.dim() {
            return Err(Error::DimensionMismatch {
                expected: sig.dim(),
                found: self.vectors.len(),
            });
        }
        for v in &self.vectors {
            manifold.validate_tangent(&self.base, v)?;
        }
        let gram = self.gram(manifold)?;
        let err = (gram - sig.form()).amax();
        if err > tol {
            return Err(Error::InvalidState(format!("frame is not pseudo-orthonormal: {err:e}")));
        }
        Ok(())
    }
}

/// Metric given by one expression per entry `g_ij` of a chart.
#[derive(Clone, Debug)]
pub struct CustomMetric {
    sig: Signature,
    entries: Vec<Vec<Option<Expr>>>,
    source: BTreeMap<String, String>,
}

impl PartialEq for CustomMetric {
    fn eq(&self, other: &Self) -> bool {
        self.sig == other.sig && self.source == other.source
    }
}

impl CustomMetric {
    /// Parses a JSON object mapping `"gij"` to expression strings.
    pub fn from_json(text: &str, sig: Signature) -> Result<Self> {
        let map: BTreeMap<String, String> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidMetric(format!("metric must be a JSON object of strings: {e}")))?;
        Self::from_map(&map, sig)
    }

    /// Unspecified entries are zero; `gij` and `gji` are mirrored, and must
    /// agree when both are given.
    pub fn from_map(map: &BTreeMap<String, String>, sig: Signature) -> Result<Self> {
        let m = sig.dim();
        if m > 9 {
            return Err(Error::InvalidMetric("at most 9 coordinates are supported".into()));
        }
        let mut entries: Vec<Vec<Option<Expr>>> = vec![vec![None; m]; m];
        for (key, text) in map {
            let b = key.as_bytes();
            let valid = b.len() == 3 && b[0] == b'g' && (b'1'..=b'9').contains(&b[1]) && (b'1'..=b'9').contains(&b[2]);
            if !valid {
                return Err(Error::InvalidMetric(format!("unknown key '{key}'")));
            }
            let (i, j) = ((b[1] - b'1') as usize, (b[2] - b'1') as usize);
            if i >= m || j >= m {
                return Err(Error::InvalidMetric(format!("key '{key}' outside dimension {m}")));
            }
            let e = Expr::parse(text)?;
            if e.arity() > m {
                return Err(Error::InvalidMetric(format!(
                    "'{key}' uses coordinate x{} beyond dimension {m}",
                    e.arity()
                )));
            }
            if let Some(prev) = &entries[i][j] {
                if !agree(prev, &e, m) {
                    return Err(Error::InvalidMetric(format!("'{key}' disagrees with its mirror entry")));
                }
            }
            entries[i][j] = Some(e.clone());
            if entries[j][i].is_none() || i == j {
                entries[j][i] = Some(e);
            } else if let Some(other) = &entries[j][i] {
                if !agree(other, &e, m) {
                    return Err(Error::InvalidMetric(format!("'{key}' disagrees with its mirror entry")));
                }
            }
        }
        Ok(Self {
            sig,
            entries,
            source: map.clone(),
        })
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn source(&self) -> &BTreeMap<String, String> {
        &self.source
    }

    pub fn eval(&self, x: &[f64]) -> Matrix {
        let m = self.sig.dim();
        Matrix::from_fn(m, m, |i, j| self.entries[i][j].as_ref().map_or(0.0, |e| e.eval(x)))
    }
}

fn agree(a: &Expr, b: &Expr, m: usize) -> bool {
    if a == b {
        return true;
    }
    (0..5).all(|k| {
        let x: Vec<f64> = (0..m).map(|i| 0.37 + 0.29 * k as f64 + 0.113 * i as f64).collect();
        let (va, vb) = (a.eval(&x), b.eval(&x));
        (va.is_nan() && vb.is_nan()) || (va - vb).abs() <= 1e-12 * va.abs().max(vb.abs()).max(1.0)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum ManifoldKind {
    Flat {
        n: usize,
        nu: usize,
    },
    /// `S^{n,nu}(r)` in `R^{n+1,nu}`.
    PseudoSphere {
        n: usize,
        nu: usize,
        r: f64,
    },
    /// `H^{n,nu}(r)` in `R^{n,nu+1}`.
    PseudoHyperbolic {
        n: usize,
        nu: usize,
        r: f64,
    },
    /// `R^2 \ {0}` with `g_12 = 2 / (u^2 + v^2)`.
    CliftonPohl,
    CustomChart(CustomMetric),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Representation {
    Chart,
    Embedded(Signature),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldSpec {
    kind: ManifoldKind,
}

/// The bilinear form on tangent vectors at one point.
pub enum InnerForm {
    Chart(Matrix),
    Ambient(Signature),
}

impl InnerForm {
    pub fn apply(&self, u: &Vector, v: &Vector) -> f64 {
        match self {
            InnerForm::Chart(g) => (u.transpose() * g * v)[(0, 0)],
            InnerForm::Ambient(sig) => sig.dot(u, v),
        }
    }
}

/// Christoffel symbols `Gamma^k_ij` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    m: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; m * m * m],
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.m + i) * self.m + j]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let m = self.m;
        self.data[(k * m + i) * m + j] = v;
    }

    /// `Gamma^k_ij a^i b^j`.
    pub fn contract(&self, a: &Vector, b: &Vector) -> Vector {
        let m = self.m;
        Vector::from_fn(m, |k, _| {
            let mut s = 0.0;
            for i in 0..m {
                if a[i] == 0.0 {
                    continue;
                }
                for j in 0..m {
                    s += self.get(k, i, j) * a[i] * b[j];
                }
            }
            s
        })
    }
}

/// Levi-Civita connection at a point: parallel fields solve
/// `V' = -apply(x', V)`.
pub enum Connection {
    Chart(Christoffel),
    Embedded { p: Vector, kappa: f64, ambient: Signature },
}

impl Connection {
    pub fn apply(&self, a: &Vector, b: &Vector) -> Vector {
        match self {
            Connection::Chart(g) => g.contract(a, b),
            Connection::Embedded { p, kappa, ambient } => p * (ambient.dot(a, b) / kappa),
        }
    }
}

impl ManifoldSpec {
    pub fn new(kind: ManifoldKind) -> Result<Self> {
        match &kind {
            ManifoldKind::Flat { n, nu } => {
                Signature::new(*n, *nu)?;
            }
            ManifoldKind::PseudoSphere { n, nu, r } | ManifoldKind::PseudoHyperbolic { n, nu, r } => {
                Signature::new(*n, *nu)?;
                if !(*r > 0.0 && r.is_finite()) {
                    return Err(Error::InvalidMetric(format!("radius must be positive, got {r}")));
                }
            }
            ManifoldKind::CliftonPohl | ManifoldKind::CustomChart(_) => {}
        }
        Ok(Self { kind })
    }

    pub fn flat(n: usize, nu: usize) -> Self {
        Self::new(ManifoldKind::Flat { n, nu }).expect("valid flat signature")
    }

    pub fn pseudo_sphere(n: usize, nu: usize, r: f64) -> Result<Self> {
        Self::new(ManifoldKind::PseudoSphere { n, nu, r })
    }

    pub fn pseudo_hyperbolic(n: usize, nu: usize, r: f64) -> Result<Self> {
        Self::new(ManifoldKind::PseudoHyperbolic { n, nu, r })
    }

    pub fn clifton_pohl() -> Self {
        Self {
            kind: ManifoldKind::CliftonPohl,
        }
    }

    pub fn custom(metric: CustomMetric) -> Self {
        Self {
            kind: ManifoldKind::CustomChart(metric),
        }
    }

    pub fn kind(&self) -> &ManifoldKind {
        &self.kind
    }

    /// Signature `(n, nu)` of the tangent spaces.
    pub fn signature(&self) -> Signature {
        match &self.kind {
            ManifoldKind::Flat { n, nu }
            | ManifoldKind::PseudoSphere { n, nu, .. }
            | ManifoldKind::PseudoHyperbolic { n, nu, .. } => Signature { n: *n, nu: *nu },
            ManifoldKind::CliftonPohl => Signature { n: 1, nu: 1 },
            ManifoldKind::CustomChart(c) => c.sig,
        }
    }

    pub fn dim(&self) -> usize {
        self.signature().dim()
    }

    pub fn representation(&self) -> Representation {
        match &self.kind {
            ManifoldKind::PseudoSphere { n, nu, .. } => Representation::Embedded(Signature { n: n + 1, nu: *nu }),
            ManifoldKind::PseudoHyperbolic { n, nu, .. } => Representation::Embedded(Signature { n: *n, nu: nu + 1 }),
            _ => Representation::Chart,
        }
    }

    pub fn is_embedded(&self) -> bool {
        matches!(self.representation(), Representation::Embedded(_))
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, ManifoldKind::Flat { .. })
    }

    /// Length of point and tangent coordinate vectors.
    pub fn coord_dim(&self) -> usize {
        match self.representation() {
            Representation::Chart => self.dim(),
            Representation::Embedded(a) => a.dim(),
        }
    }

    /// Ambient signature and `<p,p>` for the quadrics.
    pub fn quadric(&self) -> Option<(Signature, f64)> {
        match (&self.kind, self.representation()) {
            (ManifoldKind::PseudoSphere { r, .. }, Representation::Embedded(a)) => Some((a, r * r)),
            (ManifoldKind::PseudoHyperbolic { r, .. }, Representation::Embedded(a)) => Some((a, -r * r)),
            _ => None,
        }
    }

    fn check_len(&self, v: &Vector) -> Result<()> {
        if v.len() != self.coord_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.coord_dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    pub fn validate_point(&self, x: &Point) -> Result<()> {
        self.check_len(&x.coords)?;
        if x.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        if let Some((amb, kappa)) = self.quadric() {
            let q = amb.quad(&x.coords);
            if (q - kappa).abs() > CONSTRAINT_TOL * kappa.abs().max(x.coords.norm_squared()) {
                return Err(Error::InvalidPoint(format!("<p,p> = {q}, expected {kappa}")));
            }
        }
        if matches!(self.kind, ManifoldKind::CliftonPohl) && x.coords.norm() == 0.0 {
            return Err(Error::InvalidPoint("Clifton-Pohl chart excludes the origin".into()));
        }
        Ok(())
    }

    pub fn validate_tangent(&self, base: &Point, v: &Vector) -> Result<()> {
        self.check_len(v)?;
        if let Some((amb, _)) = self.quadric() {
            let d = amb.dot(v, &base.coords);
            if d.abs() > CONSTRAINT_TOL * (v.norm() * base.coords.norm()).max(1.0) {
                return Err(Error::NotTangent(format!("<v,p> = {d:e}")));
            }
        }
        Ok(())
    }

    fn chart_metric_raw(&self, x: &[f64]) -> Matrix {
        match &self.kind {
            ManifoldKind::Flat { n, nu } => Signature { n: *n, nu: *nu }.form(),
            ManifoldKind::CliftonPohl => {
                let f = 2.0 / (x[0] * x[0] + x[1] * x[1]);
                Matrix::from_row_slice(2, 2, &[0.0, f, f, 0.0])
            }
            ManifoldKind::CustomChart(c) => c.eval(x),
            _ => unreachable!("chart metric on an embedded manifold"),
        }
    }

    fn check_index(&self, x: &Vector, g: &Matrix) -> Result<()> {
        let fail = |reason: String| Error::SingularMetric {
            at: x.iter().copied().collect(),
            reason,
        };
        if g.iter().any(|v| !v.is_finite()) {
            return Err(fail("non-finite metric entry".into()));
        }
        let eig = SymmetricEigen::new(g.clone());
        let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        if eig.eigenvalues.iter().any(|l| l.abs() <= 1e-12 * scale) {
            return Err(fail("degenerate metric".into()));
        }
        let neg = eig.eigenvalues.iter().filter(|l| **l < 0.0).count();
        if neg != self.signature().nu {
            return Err(fail(format!("index {neg}, declared {}", self.signature().nu)));
        }
        Ok(())
    }

    /// Metric matrix at `x`. Chart kinds give `g_ij`; embedded kinds give the
    /// ambient form restricted to the tangent space,
    /// `J - J p p^T J / <p,p>`, whose kernel is the normal line.
    pub fn metric_at(&self, x: &Point) -> Result<Matrix> {
        self.validate_point(x)?;
        match self.quadric() {
            Some((amb, kappa)) => {
                let jp = Vector::from_fn(amb.dim(), |i, _| amb.sign(i) * x.coords[i]);
                Ok(amb.form() - &jp * jp.transpose() / kappa)
            }
            None => {
                let g = self.chart_metric_raw(x.coords.as_slice());
                self.check_index(&x.coords, &g)?;
                Ok(g)
            }
        }
    }

    /// Number of negative eigenvalues of [`Self::metric_at`].
    pub fn index_at(&self, x: &Point) -> Result<usize> {
        let g = self.metric_at(x)?;
        let eig = SymmetricEigen::new(g);
        let scale = eig.eigenvalues.amax();
        Ok(eig.eigenvalues.iter().filter(|l| **l < -1e-12 * scale).count())
    }

    pub(crate) fn inner_form(&self, x: &Vector) -> Result<InnerForm> {
        match self.quadric() {
            Some((amb, _)) => Ok(InnerForm::Ambient(amb)),
            None => Ok(InnerForm::Chart(self.chart_metric_raw(x.as_slice()))),
        }
    }

    /// `g_x(u, v)`.
    pub fn inner_at(&self, x: &Point, u: &Vector, v: &Vector) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(v)?;
        Ok(self.inner_form(&x.coords)?.apply(u, v))
    }

    fn metric_derivative(&self, x: &Vector) -> Vec<Matrix> {
        let m = self.dim();
        (0..m)
            .map(|i| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += FD_STEP;
                xm[i] -= FD_STEP;
                (self.chart_metric_raw(xp.as_slice()) - self.chart_metric_raw(xm.as_slice())) / (2.0 * FD_STEP)
            })
            .collect()
    }

    fn metric_second_derivative(&self, x: &Vector) -> Vec<Vec<Matrix>> {
        let m = self.dim();
        let h = FD_STEP_SECOND;
        let g = |dx: &[(usize, f64)]| {
            let mut y = x.clone();
            for (i, d) in dx {
                y[*i] += d;
            }
            self.chart_metric_raw(y.as_slice())
        };
        let mut out = vec![vec![Matrix::zeros(m, m); m]; m];
        for i in 0..m {
            for j in i..m {
                let d = if i == j {
                    (g(&[(i, h)]) - g(&[]) * 2.0 + g(&[(i, -h)])) / (h * h)
                } else {
                    (g(&[(i, h), (j, h)]) - g(&[(i, h), (j, -h)]) - g(&[(i, -h), (j, h)]) + g(&[(i, -h), (j, -h)]))
                        / (4.0 * h * h)
                };
                out[i][j] = d.clone();
                out[j][i] = d;
            }
        }
        out
    }

    fn inverse_metric(&self, x: &Vector, g: Matrix) -> Result<Matrix> {
        g.try_inverse().ok_or_else(|| Error::SingularMetric {
            at: x.iter().copied().collect(),
            reason: "metric is not invertible".into(),
        })
    }

    /// `Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)`; closed form for
    /// the flat and Clifton-Pohl charts, central differences otherwise.
    pub fn christoffel_at(&self, x: &Point) -> Result<Christoffel> {
        if self.is_embedded() {
            return Err(Error::Unsupported("Christoffel symbols need a chart manifold".into()));
        }
        let m = self.dim();
        self.check_len(&x.coords)?;
        match &self.kind {
            ManifoldKind::Flat { .. } => Ok(Christoffel::zeros(m)),
            ManifoldKind::CliftonPohl => {
                let (u, v) = (x.coords[0], x.coords[1]);
                let s = u * u + v * v;
                if s == 0.0 {
                    return Err(Error::InvalidPoint("Clifton-Pohl chart excludes the origin".into()));
                }
                let mut c = Christoffel::zeros(2);
                c.set(0, 0, 0, -2.0 * u / s);
                c.set(1, 1, 1, -2.0 * v / s);
                Ok(c)
            }
            _ => {
                let g = self.chart_metric_raw(x.coords.as_slice());
                let ginv = self.inverse_metric(&x.coords, g)?;
                let dg = self.metric_derivative(&x.coords);
                let first = first_kind(&dg, m);
                let mut c = Christoffel::zeros(m);
                for k in 0..m {
                    for i in 0..m {
                        for j in i..m {
                            let s: f64 = (0..m).map(|l| ginv[(k, l)] * first[l][i][j]).sum();
                            c.set(k, i, j, s);
                            c.set(k, j, i, s);
                        }
                    }
                }
                Ok(c)
            }
        }
    }

    pub fn connection_at(&self, x: &Vector) -> Result<Connection> {
        match self.quadric() {
            Some((ambient, kappa)) => Ok(Connection::Embedded {
                p: x.clone(),
                kappa,
                ambient,
            }),
            None => Ok(Connection::Chart(self.christoffel_at(&Point::new(x.clone()))?)),
        }
    }

    /// Tangential part `w - (<w,p>/<p,p>) p` for the quadrics; the identity
    /// on charts.
    pub fn tangent_project(&self, p: &Point, w: &Vector) -> Result<Tangent> {
        self.check_len(w)?;
        let Some((amb, _)) = self.quadric() else {
            return Ok(Tangent {
                base: p.clone(),
                vec: w.clone(),
            });
        };
        let pp = amb.quad(&p.coords);
        if pp == 0.0 {
            return Err(Error::Degenerate("<p,p> = 0".into()));
        }
        let vec = w - &p.coords * (amb.dot(w, &p.coords) / pp);
        Ok(Tangent { base: p.clone(), vec })
    }

    /// Pushes an ambient point back onto the quadric along its position ray.
    pub fn project_point(&self, x: &Vector) -> Vector {
        match self.quadric() {
            Some((amb, kappa)) => {
                let q = amb.quad(x);
                if q * kappa > 0.0 {
                    x * (kappa / q).sqrt()
                } else {
                    x.clone()
                }
            }
            None => x.clone(),
        }
    }

    /// Maps a path `q(t)` with velocity `q'(t)` in chart or ambient
    /// coordinates onto the manifold: identity for charts, radial projection
    /// (with its derivative) for the quadrics.
    pub fn retract(&self, q: &Vector, qdot: &Vector) -> Result<(Vector, Vector)> {
        match self.quadric() {
            None => Ok((q.clone(), qdot.clone())),
            Some((amb, kappa)) => {
                let qq = amb.quad(q);
                if qq * kappa <= 0.0 {
                    return Err(Error::InvalidPoint("radial projection undefined".into()));
                }
                let f = (kappa / qq).sqrt();
                let fdot = -f * amb.dot(q, qdot) / qq;
                Ok((q * f, qdot * f + q * fdot))
            }
        }
    }

    /// Curvature operator `R(X, Y)` as a matrix acting on chart (or ambient)
    /// coordinates, `R(X,Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y]`.
    pub fn curvature_operator(&self, x: &Point, a: &Vector, b: &Vector) -> Result<Matrix> {
        self.validate_point(x)?;
        self.validate_tangent(x, a)?;
        self.validate_tangent(x, b)?;
        let d = self.coord_dim();
        if let Some((amb, kappa)) = self.quadric() {
            // R(X,Y)Z = (1/kappa) (<Y,Z> X - <X,Z> Y)
            let ja = Vector::from_fn(d, |i, _| amb.sign(i) * a[i]);
            let jb = Vector::from_fn(d, |i, _| amb.sign(i) * b[i]);
            return Ok((a * jb.transpose() - b * ja.transpose()) / kappa);
        }
        if self.is_flat() {
            return Ok(Matrix::zeros(d, d));
        }
        let riem = self.riemann_chart(&x.coords)?;
        let m = d;
        Ok(Matrix::from_fn(m, m, |l, k| {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += riem[l][k][i][j] * a[i] * b[j];
                }
            }
            s
        }))
    }

    /// `R^l_{kij}` with `R(d_i, d_j) d_k = R^l_{kij} d_l`.
    fn riemann_chart(&self, x: &Vector) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
        let m = self.dim();
        let g = self.chart_metric_raw(x.as_slice());
        let ginv = self.inverse_metric(x, g)?;
        let dg = self.metric_derivative(x);
        let ddg = self.metric_second_derivative(x);
        let first = first_kind(&dg, m);
        // Gamma^l_jk
        let gamma = |l: usize, j: usize, k: usize| -> f64 { (0..m).map(|p| ginv[(l, p)] * first[p][j][k]).sum() };
        // d_i Gamma^l_jk = (d_i g^lp) Gamma_pjk + g^lp d_i Gamma_pjk
        let dginv: Vec<Matrix> = dg.iter().map(|d| -(&ginv * d * &ginv)).collect();
        let dfirst = |i: usize, p: usize, j: usize, k: usize| -> f64 {
            0.5 * (ddg[i][j][(p, k)] + ddg[i][k][(p, j)] - ddg[i][p][(j, k)])
        };
        let dgamma = |i: usize, l: usize, j: usize, k: usize| -> f64 {
            (0..m)
                .map(|p| dginv[i][(l, p)] * first[p][j][k] + ginv[(l, p)] * dfirst(i, p, j, k))
                .sum()
        };
        let mut out = vec![vec![vec![vec![0.0; m]; m]; m]; m];
        for l in 0..m {
            for k in 0..m {
                for i in 0..m {
                    for j in 0..m {
                        let mut s = dgamma(i, l, j, k) - dgamma(j, l, i, k);
                        for p in 0..m {
                            s += gamma(l, i, p) * gamma(p, j, k) - gamma(l, j, p) * gamma(p, i, k);
                        }
                        out[l][k][i][j] = s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `R(X, Y)` in the coordinates of `frame`: entry `(k, l)` is
    /// `eps_k <E_k, R(X,Y) E_l>`. The result is `J`-skew.
    pub fn curvature_endomorphism(&self, frame: &Frame, a: &Vector, b: &Vector) -> Result<Matrix> {
        let op = self.curvature_operator(&frame.base, a, b)?;
        let m = frame.vectors.len();
        let sig = self.signature();
        let g = self.inner_form(&frame.base.coords)?;
        let images: Vec<Vector> = frame.vectors.iter().map(|e| &op * e).collect();
        Ok(Matrix::from_fn(m, m, |k, l| {
            sig.sign(k) * g.apply(&frame.vectors[k], &images[l])
        }))
    }

    /// A future-pointing timelike vector field, when the manifold is
    /// Lorentzian and time-orientable in a way this catalog knows.
    pub fn future_hint(&self, x: &Vector) -> Option<Vector> {
        let sig = self.signature();
        if sig.nu != 1 {
            return None;
        }
        let d = self.coord_dim();
        match &self.kind {
            ManifoldKind::Flat { .. } => Some(unit(d, d - 1)),
            ManifoldKind::PseudoSphere { .. } => {
                let p = Point::new(x.clone());
                self.tangent_project(&p, &unit(d, d - 1)).ok().map(|t| t.vec)
            }
            ManifoldKind::PseudoHyperbolic { .. } => {
                let mut v = Vector::zeros(d);
                v[d - 2] = -x[d - 1];
                v[d - 1] = x[d - 2];
                Some(v)
            }
            ManifoldKind::CliftonPohl => Some(Vector::from_vec(vec![-1.0, 1.0])),
            ManifoldKind::CustomChart(c) => {
                let g = c.eval(x.as_slice());
                (g[(d - 1, d - 1)] < 0.0).then(|| unit(d, d - 1))
            }
        }
    }

    /// Sign of the orientation of `vectors` at `x`: `det[E]` in a chart,
    /// `det[E | p]` on a quadric.
    pub fn orientation_sign(&self, x: &Vector, vectors: &[Vector]) -> f64 {
        // the normal takes the slot of the extra ambient axis
        let mut cols = vectors.to_vec();
        match &self.kind {
            ManifoldKind::PseudoSphere { .. } => cols.insert(0, x.clone()),
            ManifoldKind::PseudoHyperbolic { .. } => cols.push(x.clone()),
            _ => {}
        }
        Matrix::from_columns(&cols).determinant().signum()
    }

    fn finish_frame(&self, x: &Point, mut vectors: Vec<Vector>) -> Frame {
        let sig = self.signature();
        let g = self.inner_form(&x.coords).expect("chart metric");
        if let Some(hint) = self.future_hint(&x.coords) {
            let t = sig.dim() - 1;
            if g.apply(&vectors[t], &hint) > 0.0 {
                vectors[t].neg_mut();
            }
        }
        if self.orientation_sign(&x.coords, &vectors) < 0.0 {
            vectors[0].neg_mut();
        }
        for v in &mut vectors {
            v.apply(|c| *c += 0.0);
        }
        Frame {
            base: x.clone(),
            vectors,
        }
    }

    fn frame_from_candidates(&self, x: &Point, candidates: &[Vector]) -> Result<Frame> {
        let g = self.inner_form(&x.coords)?;
        let vectors = pseudo_gram_schmidt(|a, b| g.apply(a, b), self.signature(), Vec::new(), candidates, 1e-6)?;
        Ok(self.finish_frame(x, vectors))
    }

    /// Deterministic frame from the coordinate (or projected ambient) axes.
    pub fn canonical_frame(&self, x: &Point) -> Result<Frame> {
        self.metric_at(x)?;
        let d = self.coord_dim();
        let candidates: Vec<Vector> = (0..d)
            .map(|i| {
                let e = unit(d, i);
                match self.quadric() {
                    Some(_) => self.tangent_project(x, &e).map(|t| t.vec),
                    None => Ok(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        self.frame_from_candidates(x, &candidates).or_else(|_| {
            // null coordinate axes: also try their sums and differences
            let mut more = candidates.clone();
            for i in 0..d {
                for j in i + 1..d {
                    more.push(&candidates[i] + &candidates[j]);
                    more.push(&candidates[i] - &candidates[j]);
                }
            }
            self.frame_from_candidates(x, &more)
        })
    }

    /// Pseudo-Gram-Schmidt on a seeded random basis; resamples on breakdown.
    pub fn random_orthonormal_frame(&self, x: &Point, seed: u64) -> Result<Frame> {
        self.metric_at(x)?;
        let d = self.coord_dim();
        const ATTEMPTS: usize = 16;
        for attempt in 0..ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64 * 0x9e37_79b9));
            let candidates: Vec<Vector> = (0..d)
                .map(|_| {
                    let w = Vector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                    match self.quadric() {
                        Some(_) => self.tangent_project(x, &w).map(|t| t.vec),
                        None => Ok(w),
                    }
                })
                .collect::<Result<_>>()?;
            if let Ok(frame) = self.frame_from_candidates(x, &candidates) {
                return Ok(frame);
            }
        }
        Err(Error::FrameBreakdown { attempts: ATTEMPTS })
    }

    /// A point on the manifold to use when none is given: the origin of a
    /// flat chart, `r e_0` on `S`, `r e_last` on `H`, `(1, 0)` for
    /// Clifton-Pohl and `(1, ..., 1)` for custom charts.
    pub fn default_point(&self) -> Point {
        let d = self.coord_dim();
        match &self.kind {
            ManifoldKind::Flat { .. } => Point::new(Vector::zeros(d)),
            ManifoldKind::PseudoSphere { r, .. } => Point::new(unit(d, 0) * *r),
            ManifoldKind::PseudoHyperbolic { r, .. } => Point::new(unit(d, d - 1) * *r),
            ManifoldKind::CliftonPohl => Point::from_slice(&[1.0, 0.0]),
            ManifoldKind::CustomChart(_) => Point::new(Vector::from_element(d, 1.0)),
        }
    }

    /// Closed-form geodesic for flat spaces and the quadrics.
    pub fn exact_geodesic(&self, x: &Vector, v: &Vector, t: f64) -> Option<(Vector, Vector)> {
        if self.is_flat() {
            return Some((x + v * t, v.clone()));
        }
        let (amb, kappa) = self.quadric()?;
        // x'' = -lambda x with lambda = <v,v>/<p,p>
        let lambda = amb.quad(v) / kappa;
        if lambda.abs() < 1e-15 {
            return Some((x + v * t, v.clone()));
        }
        let w = lambda.abs().sqrt();
        if lambda > 0.0 {
            let (s, c) = (w * t).sin_cos();
            Some((x * c + v * (s / w), -x * (w * s) + v * c))
        } else {
            let (s, c) = ((w * t).sinh(), (w * t).cosh());
            Some((x * c + v * (s / w), x * (w * s) + v * c))
        }
    }

    pub fn to_record(&self) -> ManifoldRecord {
        let (kind, n, nu, r, metric) = match &self.kind {
            ManifoldKind::Flat { n, nu } => ("flat", Some(*n), Some(*nu), None, None),
            ManifoldKind::PseudoSphere { n, nu, r } => ("pseudo-sphere", Some(*n), Some(*nu), Some(*r), None),
            ManifoldKind::PseudoHyperbolic { n, nu, r } => ("pseudo-hyperbolic", Some(*n), Some(*nu), Some(*r), None),
            ManifoldKind::CliftonPohl => ("clifton-pohl", None, None, None, None),
            ManifoldKind::CustomChart(c) => ("custom", Some(c.sig.n), Some(c.sig.nu), None, Some(c.source.clone())),
        };
        ManifoldRecord {
            kind: kind.to_string(),
            n,
            nu,
            r,
            metric,
        }
    }
}

fn unit(d: usize, i: usize) -> Vector {
    Vector::from_fn(d, |k, _| if k == i { 1.0 } else { 0.0 })
}

/// `Gamma_{l i j} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)`.
fn first_kind(dg: &[Matrix], m: usize) -> Vec<Vec<Vec<f64>>> {
    let mut out = vec![vec![vec![0.0; m]; m]; m];
    for l in 0..m {
        for i in 0..m {
            for j in 0..m {
                out[l][i][j] = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
            }
        }
    }
    out
}

/// JSON form: `{"kind": ..., "n": ..., "nu": ..., "r": ..., "metric": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldRecord {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<BTreeMap<String, String>>,
}

impl TryFrom<&ManifoldRecord> for ManifoldSpec {
    type Error = Error;

    fn try_from(rec: &ManifoldRecord) -> Result<Self> {
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| Error::InvalidMetric(format!("'{}' requires field '{name}'", rec.kind)))
        };
        let radius = rec.r.unwrap_or(1.0);
        let kind = rec.kind.as_str();
        let unused = |name: &str| Error::InvalidMetric(format!("field '{name}' does not apply to '{kind}'"));
        if rec.r.is_some() && !matches!(kind, "pseudo-sphere" | "s" | "pseudo-hyperbolic" | "h") {
            return Err(unused("r"));
        }
        if rec.metric.is_some() && kind != "custom" {
            return Err(unused("metric"));
        }
        if kind == "clifton-pohl" && (rec.n.is_some() || rec.nu.is_some()) {
            return Err(unused(if rec.n.is_some() { "n" } else { "nu" }));
        }
        match kind {
            "flat" => Self::new(ManifoldKind::Flat {
                n: need(rec.n, "n")?,
                nu: need(rec.nu, "nu")?,
            }),
            "pseudo-sphere" | "s" => Self::pseudo_sphere(need(rec.n, "n")?, need(rec.nu, "nu")?, radius),
            "pseudo-hyperbolic" | "h" => Self::pseudo_hyperbolic(need(rec.n, "n")?, need(rec.nu, "nu")?, radius),
            "clifton-pohl" => Ok(Self::clifton_pohl()),
            "custom" => {
                let sig = Signature::new(need(rec.n, "n")?, need(rec.nu, "nu")?)?;
                let metric = rec
                    .metric
                    .as_ref()
                    .ok_or_else(|| Error::InvalidMetric("'custom' requires field 'metric'".into()))?;
                Ok(Self::custom(CustomMetric::from_map(metric, sig)?))
            }
            other => Err(Error::InvalidMetric(format!("unknown manifold kind '{other}'"))),
        }
    }
}

/// Shorthand `kind:params`: `flat:n,nu`, `s:n,nu,r`, `h:n,nu,r`,
/// `clifton-pohl`; anything starting with `{` is parsed as a JSON record.
impl FromStr for ManifoldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let rec: ManifoldRecord =
                serde_json::from_str(s).map_err(|e| Error::InvalidMetric(format!("manifold JSON: {e}")))?;
            return ManifoldSpec::try_from(&rec);
        }
        let (kind, params) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if params.is_empty() {
            Vec::new()
        } else {
            params
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidMetric(format!("bad parameter '{p}' in '{s}'")))
                })
                .collect::<Result<_>>()?
        };
        let int = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidMetric(format!("expected a nonnegative integer, got {v}")))
            }
        };
        let arity = |k: usize| -> Result<()> {
            if nums.len() != k {
                return Err(Error::InvalidMetric(format!(
                    "'{kind}' takes {k} parameters, got {}",
                    nums.len()
                )));
            }
            Ok(())
        };
        match kind {
            "flat" => {
                arity(2)?;
                Self::new(ManifoldKind::Flat {
                    n: int(nums[0])?,
                    nu: int(nums[1])?,
                })
            }
            "s" | "pseudo-sphere" => {
                arity(3)?;
                Self::pseudo_sphere(int(nums[0])?, int(nums[1])?, nums[2])
            }
            "h" | "pseudo-hyperbolic" => {
                arity(3)?;
                Self::pseudo_hyperbolic(int(nums[0])?, int(nums[1])?, nums[2])
            }
            "clifton-pohl" | "cp" => {
                arity(0)?;
                Ok(Self::clifton_pohl())
            }
            other => Err(Error::InvalidMetric(format!("unknown manifold shorthand '{other}'"))),
        }
    }
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ManifoldKind::Flat { n, nu } => write!(f, "flat:{n},{nu}"),
            ManifoldKind::PseudoSphere { n, nu, r } => write!(f, "s:{n},{nu},{r}"),
            ManifoldKind::PseudoHyperbolic { n, nu, r } => write!(f, "h:{n},{nu},{r}"),
            ManifoldKind::CliftonPohl => write!(f, "clifton-pohl"),
            ManifoldKind::CustomChart(c) => write!(f, "custom:{},{}", c.sig.n, c.sig.nu),
        }
    }
}
