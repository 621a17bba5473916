//! Geodesics, parallel transport, development and its inverse.
//!
//! All ODEs use a fixed-step classical Runge-Kutta scheme on the curve grid.
//! Curve values between grid points come from cubic Hermite interpolation
//! of the sampled points and velocities; on the quadrics the interpolant is
//! pushed back onto the manifold along the position ray.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Frame, ManifoldSpec, Point};
use crate::minkowski::{Matrix, Vector};

/// Relative drift from the quadric that aborts an integration.
pub const DRIFT_ABORT: f64 = 1e-3;
/// Relative per-step change of the state that counts as escape.
pub const ESCAPE_JUMP: f64 = 0.5;
/// State norm that counts as blow-up.
pub const BLOW_UP_NORM: f64 = 1e12;

/// Piecewise-C1 sampled curve. A repeated grid value marks a corner: the two
/// samples share the point and carry the incoming and outgoing velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub grid: Vec<f64>,
    pub points: Vec<Vector>,
    pub velocities: Vec<Vector>,
}

impl Curve {
    /// Validates the samples; missing velocities are estimated by
    /// second-order finite differences on each smooth piece.
    pub fn new(
        manifold: &ManifoldSpec,
        grid: Vec<f64>,
        points: Vec<Vector>,
        velocities: Option<Vec<Vector>>,
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidCurve("empty curve".into()));
        }
        if grid.len() != points.len() {
            return Err(Error::InvalidCurve(format!(
                "{} grid values but {} points",
                grid.len(),
                points.len()
            )));
        }
        if grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidCurve("non-finite grid value".into()));
        }
        for k in 1..grid.len() {
            if grid[k] < grid[k - 1] {
                return Err(Error::InvalidCurve(format!("grid decreases at index {k}")));
            }
            if k >= 2 && grid[k] == grid[k - 2] {
                return Err(Error::InvalidCurve(format!(
                    "grid value repeated three times at index {k}"
                )));
            }
        }
        for (k, p) in points.iter().enumerate() {
            manifold
                .validate_point(&Point::new(p.clone()))
                .map_err(|e| Error::InvalidCurve(format!("sample {k}: {e}")))?;
            if k > 0 && grid[k] == grid[k - 1] {
                let gap = (p - &points[k - 1]).amax();
                if gap > 1e-9 * p.amax().max(1.0) {
                    return Err(Error::InvalidCurve(format!("curve jumps at corner t = {}", grid[k])));
                }
            }
        }
        let velocities = match velocities {
            Some(v) => {
                if v.len() != grid.len() {
                    return Err(Error::InvalidCurve(format!(
                        "{} velocities for {} samples",
                        v.len(),
                        grid.len()
                    )));
                }
                for (k, (x, w)) in points.iter().zip(&v).enumerate() {
                    manifold
                        .validate_tangent(&Point::new(x.clone()), w)
                        .map_err(|e| Error::InvalidCurve(format!("velocity {k}: {e}")))?;
                }
                v
            }
            None => finite_difference_velocities(manifold, &grid, &points)?,
        };
        Ok(Self {
            grid,
            points,
            velocities,
        })
    }

    /// Samples `f(t) = (point, velocity)` on `n` uniform steps of `[t0, t1]`.
    pub fn sample<F>(manifold: &ManifoldSpec, t0: f64, t1: f64, n: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> (Vector, Vector),
    {
        let n = n.max(1);
        let grid: Vec<f64> = (0..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect();
        let (points, velocities) = grid.iter().map(|t| f(*t)).unzip();
        Self::new(manifold, grid, points, Some(velocities))
    }

    /// A curve that stays at `x` for `t in [0, 1]`.
    pub fn constant(manifold: &ManifoldSpec, x: &Vector) -> Result<Self> {
        let z = Vector::zeros(x.len());
        Self::new(
            manifold,
            vec![0.0, 1.0],
            vec![x.clone(), x.clone()],
            Some(vec![z.clone(), z]),
        )
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn start(&self) -> &Vector {
        &self.points[0]
    }

    pub fn end(&self) -> &Vector {
        self.points.last().expect("nonempty curve")
    }

    pub fn start_point(&self) -> Point {
        Point::new(self.start().clone())
    }

    pub fn end_point(&self) -> Point {
        Point::new(self.end().clone())
    }

    /// `self` followed by `other`, reparametrized to continue at the end of
    /// `self`; the junction becomes a corner.
    pub fn concat(&self, other: &Curve) -> Result<Curve> {
        let gap = (self.end() - other.start()).amax();
        if gap > 1e-9 * self.end().amax().max(1.0) {
            return Err(Error::InvalidCurve(format!("curves do not meet: gap {gap:e}")));
        }
        let shift = self.grid.last().expect("nonempty") - other.grid[0];
        let mut out = self.clone();
        out.grid.extend(other.grid.iter().map(|t| t + shift));
        out.points.extend(other.points.iter().cloned());
        out.velocities.extend(other.velocities.iter().cloned());
        Ok(out)
    }

    /// The same path traversed backwards on the same parameter interval.
    pub fn reversed(&self) -> Curve {
        let (a, b) = (self.grid[0], *self.grid.last().expect("nonempty"));
        Curve {
            grid: self.grid.iter().rev().map(|t| a + b - t).collect(),
            points: self.points.iter().rev().cloned().collect(),
            velocities: self.velocities.iter().rev().map(|v| -v).collect(),
        }
    }

    /// Point and velocity at the midpoint of segment `k`.
    fn midpoint(&self, manifold: &ManifoldSpec, k: usize) -> Result<(Vector, Vector)> {
        let h = self.grid[k + 1] - self.grid[k];
        let (p0, p1) = (&self.points[k], &self.points[k + 1]);
        let (v0, v1) = (&self.velocities[k], &self.velocities[k + 1]);
        let q = (p0 + p1) * 0.5 + (v0 - v1) * (h / 8.0);
        let qdot = (p1 - p0) * (1.5 / h) - (v0 + v1) * 0.25;
        check_resolution(manifold, &q, self.grid[k])?;
        manifold.retract(&q, &qdot)
    }

    pub fn to_record(&self) -> CurveRecord {
        CurveRecord {
            grid: self.grid.clone(),
            points: self.points.iter().map(|p| p.iter().copied().collect()).collect(),
            velocities: self.velocities.iter().map(|p| p.iter().copied().collect()).collect(),
        }
    }

    pub fn from_record(manifold: &ManifoldSpec, rec: &CurveRecord) -> Result<Self> {
        let to_vecs = |rows: &[Vec<f64>]| rows.iter().map(|r| Vector::from_column_slice(r)).collect::<Vec<_>>();
        let velocities = (!rec.velocities.is_empty()).then(|| to_vecs(&rec.velocities));
        Self::new(manifold, rec.grid.clone(), to_vecs(&rec.points), velocities)
    }

    /// CSV with header `t,x1..xd,v1..vd`.
    pub fn to_csv(&self) -> String {
        let d = self.points[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x{i}")));
        header.extend((1..=d).map(|i| format!("v{i}")));
        let mut out = header.join(",");
        out.push('\n');
        for k in 0..self.len() {
            let mut row = vec![fmt_num(self.grid[k])];
            row.extend(self.points[k].iter().map(|v| fmt_num(*v)));
            row.extend(self.velocities[k].iter().map(|v| fmt_num(*v)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Reads `t,x1..xd[,v1..vd]`; velocity columns are optional.
    pub fn from_csv(manifold: &ManifoldSpec, text: &str) -> Result<Self> {
        let d = manifold.coord_dim();
        let mut grid = Vec::new();
        let mut points = Vec::new();
        let mut velocities = Vec::new();
        let mut with_velocity = None;
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (line_no == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidCurve(format!("line {}: bad number '{f}'", line_no + 1)))
                })
                .collect::<Result<_>>()?;
            let has_v = match vals.len() {
                n if n == 1 + d => false,
                n if n == 1 + 2 * d => true,
                n => {
                    return Err(Error::InvalidCurve(format!(
                        "line {}: expected {} or {} columns, got {n}",
                        line_no + 1,
                        1 + d,
                        1 + 2 * d
                    )))
                }
            };
            if *with_velocity.get_or_insert(has_v) != has_v {
                return Err(Error::InvalidCurve(format!(
                    "line {}: inconsistent columns",
                    line_no + 1
                )));
            }
            grid.push(vals[0]);
            points.push(Vector::from_column_slice(&vals[1..1 + d]));
            if has_v {
                velocities.push(Vector::from_column_slice(&vals[1 + d..]));
            }
        }
        let velocities = (with_velocity == Some(true)).then_some(velocities);
        Self::new(manifold, grid, points, velocities)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRecord {
    pub grid: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub velocities: Vec<Vec<f64>>,
}

/// Shortest round-trip decimal form.
pub(crate) fn fmt_num(v: f64) -> String {
    let v = v + 0.0;
    format!("{v:?}")
}

fn check_resolution(manifold: &ManifoldSpec, q: &Vector, t: f64) -> Result<()> {
    if let Some((amb, kappa)) = manifold.quadric() {
        let rel = (amb.quad(q) - kappa).abs() / kappa.abs();
        if rel > 0.1 {
            return Err(Error::InvalidCurve(format!("curve under-resolved near t = {t}")));
        }
    }
    Ok(())
}

fn finite_difference_velocities(manifold: &ManifoldSpec, grid: &[f64], points: &[Vector]) -> Result<Vec<Vector>> {
    let mut out = fd_derivative(grid, points);
    if manifold.is_embedded() {
        for (v, p) in out.iter_mut().zip(points) {
            *v = manifold.tangent_project(&Point::new(p.clone()), v)?.vec;
        }
    }
    Ok(out)
}

/// Second-order finite-difference derivative of sampled values, computed
/// separately on each smooth piece of the grid.
pub(crate) fn fd_derivative(grid: &[f64], points: &[Vector]) -> Vec<Vector> {
    let d = points[0].len();
    let mut out = vec![Vector::zeros(d); grid.len()];
    let mut a = 0;
    while a < grid.len() {
        let mut b = a;
        while b + 1 < grid.len() && grid[b + 1] > grid[b] {
            b += 1;
        }
        let t = &grid[a..=b];
        let p = &points[a..=b];
        let n = t.len();
        if n == 2 {
            let v = (&p[1] - &p[0]) / (t[1] - t[0]);
            out[a] = v.clone();
            out[a + 1] = v;
        } else if n >= 3 {
            for i in 0..n {
                let v = if i == 0 {
                    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
                    &p[0] * (-(2.0 * h1 + h2) / (h1 * (h1 + h2))) + &p[1] * ((h1 + h2) / (h1 * h2))
                        - &p[2] * (h1 / (h2 * (h1 + h2)))
                } else if i == n - 1 {
                    let (h1, h2) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
                    &p[n - 1] * ((2.0 * h2 + h1) / (h2 * (h1 + h2))) - &p[n - 2] * ((h1 + h2) / (h1 * h2))
                        + &p[n - 3] * (h2 / (h1 * (h1 + h2)))
                } else {
                    let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
                    &p[i - 1] * (-h2 / (h1 * (h1 + h2)))
                        + &p[i] * ((h2 - h1) / (h1 * h2))
                        + &p[i + 1] * (h1 / (h2 * (h1 + h2)))
                };
                out[a + i] = v;
            }
        }
        a = b + 1;
    }
    out
}

fn check_state(t: f64, x: &Vector) -> Result<()> {
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::Integration {
            t,
            reason: "non-finite state".into(),
        });
    }
    if x.norm() > BLOW_UP_NORM {
        return Err(Error::Integration {
            t,
            reason: format!("state norm exceeds {BLOW_UP_NORM:e}"),
        });
    }
    Ok(())
}

/// Pushes `(x, v)` back onto the quadric; fails on drift beyond
/// [`DRIFT_ABORT`].
fn renormalize(manifold: &ManifoldSpec, t: f64, x: &mut Vector, v: &mut Vector) -> Result<()> {
    if let Some((amb, kappa)) = manifold.quadric() {
        let drift = (amb.quad(x) - kappa).abs() / kappa.abs();
        if drift > DRIFT_ABORT {
            return Err(Error::Integration {
                t,
                reason: format!("drifted off the manifold by {drift:e}"),
            });
        }
        *x = manifold.project_point(x);
        *v = manifold.tangent_project(&Point::new(x.clone()), v)?.vec;
    }
    Ok(())
}

fn geodesic_rhs(manifold: &ManifoldSpec, t: f64, x: &Vector, v: &Vector) -> Result<Vector> {
    check_state(t, x)?;
    let conn = manifold.connection_at(x).map_err(|e| Error::Integration {
        t,
        reason: e.to_string(),
    })?;
    Ok(-conn.apply(v, v))
}

fn geodesic_step(manifold: &ManifoldSpec, t: f64, x: &Vector, v: &Vector, h: f64) -> Result<(Vector, Vector)> {
    let a1 = geodesic_rhs(manifold, t, x, v)?;
    let (x2, v2) = (x + v * (h / 2.0), v + &a1 * (h / 2.0));
    let a2 = geodesic_rhs(manifold, t + h / 2.0, &x2, &v2)?;
    let (x3, v3) = (x + &v2 * (h / 2.0), v + &a2 * (h / 2.0));
    let a3 = geodesic_rhs(manifold, t + h / 2.0, &x3, &v3)?;
    let (x4, v4) = (x + &v3 * h, v + &a3 * h);
    let a4 = geodesic_rhs(manifold, t + h, &x4, &v4)?;
    let xn = x + (v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
    let vn = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
    Ok((xn, vn))
}

/// Geodesic from `x` with initial velocity `v` on `[0, T]`, using the
/// largest uniform step not exceeding `step`.
pub fn geodesic(manifold: &ManifoldSpec, x: &Point, v: &Vector, t_end: f64, step: f64) -> Result<Curve> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidCurve(format!("step must be positive, got {step}")));
    }
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidCurve(format!("T must be nonnegative, got {t_end}")));
    }
    manifold.validate_point(x)?;
    manifold.validate_tangent(x, v)?;
    let n = ((t_end / step).ceil() as usize).max(1);
    let h = t_end / n as f64;
    let mut grid = Vec::with_capacity(n + 1);
    let mut points = Vec::with_capacity(n + 1);
    let mut velocities = Vec::with_capacity(n + 1);
    let (mut xc, mut vc) = (x.coords.clone(), v.clone());
    grid.push(0.0);
    points.push(xc.clone());
    velocities.push(vc.clone());
    if t_end > 0.0 {
        for k in 0..n {
            let t = k as f64 * h;
            let (mut xn, mut vn) = geodesic_step(manifold, t, &xc, &vc, h)?;
            check_state(t + h, &xn)?;
            renormalize(manifold, t + h, &mut xn, &mut vn)?;
            xc = xn;
            vc = vn;
            grid.push(if k + 1 == n { t_end } else { (k + 1) as f64 * h });
            points.push(xc.clone());
            velocities.push(vc.clone());
        }
    }
    Ok(Curve {
        grid,
        points,
        velocities,
    })
}

/// One classical Runge-Kutta step of `V' = -conn(gamma', V)` for a set of
/// vectors, given the curve at the start, middle and end of the step.
#[allow(clippy::too_many_arguments)]
fn transport_step(
    manifold: &ManifoldSpec,
    stages: [(&Vector, &Vector); 3],
    cols: &[Vector],
    h: f64,
    t: f64,
) -> Result<Vec<Vector>> {
    let conns = stages
        .iter()
        .map(|(x, _)| manifold.connection_at(x))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Integration {
            t,
            reason: e.to_string(),
        })?;
    let f = |s: usize, v: &Vector| -conns[s].apply(stages[s].1, v);
    cols.iter()
        .map(|v| {
            let k1 = f(0, v);
            let k2 = f(1, &(v + &k1 * (h / 2.0)));
            let k3 = f(1, &(v + &k2 * (h / 2.0)));
            let k4 = f(2, &(v + &k3 * h));
            let out = v + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            check_state(t + h, &out)?;
            Ok(out)
        })
        .collect()
}

fn project_all(manifold: &ManifoldSpec, x: &Vector, cols: Vec<Vector>) -> Result<Vec<Vector>> {
    if !manifold.is_embedded() {
        return Ok(cols);
    }
    let p = Point::new(x.clone());
    cols.into_iter()
        .map(|v| manifold.tangent_project(&p, &v).map(|t| t.vec))
        .collect()
}

/// Parallel transports `vectors` (tangent at the start of `curve`) along it;
/// returns the transported vectors at every sample.
pub fn transport_along(manifold: &ManifoldSpec, curve: &Curve, vectors: &[Vector]) -> Result<Vec<Vec<Vector>>> {
    let start = curve.start_point();
    for v in vectors {
        manifold.validate_tangent(&start, v)?;
    }
    let mut out = Vec::with_capacity(curve.len());
    out.push(vectors.to_vec());
    for k in 0..curve.len() - 1 {
        let prev = out[k].clone();
        let h = curve.grid[k + 1] - curve.grid[k];
        if h == 0.0 {
            out.push(prev);
            continue;
        }
        let (xm, vm) = curve.midpoint(manifold, k)?;
        let stages = [
            (&curve.points[k], &curve.velocities[k]),
            (&xm, &vm),
            (&curve.points[k + 1], &curve.velocities[k + 1]),
        ];
        let next = transport_step(manifold, stages, &prev, h, curve.grid[k])?;
        out.push(project_all(manifold, &curve.points[k + 1], next)?);
    }
    Ok(out)
}

/// Parallel transport of a frame, with the operator expressed in a frame
/// at each end.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportResult {
    /// `K` with `P E_j = sum_i K_ij F_i` for the start frame `E` and end frame `F`.
    pub operator: Matrix,
    pub start_frame: Frame,
    pub end_frame: Frame,
    /// Image of the start frame at the end of the curve.
    pub transported: Vec<Vector>,
}

/// Matrix of the map `E_j -> images_j` in the frame `target`:
/// `K_ij = eps_i <F_i, images_j>`.
pub fn frame_matrix(manifold: &ManifoldSpec, target: &Frame, images: &[Vector]) -> Result<Matrix> {
    let m = images.len();
    let mut k = Matrix::zeros(target.vectors.len(), m);
    for (j, v) in images.iter().enumerate() {
        k.set_column(j, &target.components(manifold, v)?);
    }
    Ok(k)
}

/// Transports `start_frame` along `curve`. The operator is expressed in
/// `end_frame`, or in `start_frame` itself for closed curves when no end
/// frame is given, or in the canonical frame at the end point otherwise.
pub fn transport_frame(
    manifold: &ManifoldSpec,
    curve: &Curve,
    start_frame: &Frame,
    end_frame: Option<&Frame>,
) -> Result<TransportResult> {
    let all = transport_along(manifold, curve, &start_frame.vectors)?;
    let transported = all.into_iter().last().expect("nonempty");
    let closed = (curve.end() - curve.start()).amax() <= 1e-9 * curve.start().amax().max(1.0);
    let end_frame = match end_frame {
        Some(f) => f.clone(),
        None if closed => Frame {
            base: curve.end_point(),
            vectors: start_frame.vectors.clone(),
        },
        None => manifold.canonical_frame(&curve.end_point())?,
    };
    let operator = frame_matrix(manifold, &end_frame, &transported)?;
    Ok(TransportResult {
        operator,
        start_frame: start_frame.clone(),
        end_frame,
        transported,
    })
}

/// Transports `v` along `curve`; the operator uses canonical frames.
pub fn parallel_transport(manifold: &ManifoldSpec, curve: &Curve, v: &Vector) -> Result<(Vector, TransportResult)> {
    let start = manifold.canonical_frame(&curve.start_point())?;
    let result = transport_frame(manifold, curve, &start, None)?;
    let c = start.components(manifold, v)?;
    let mut end = Vector::zeros(v.len());
    for (ci, e) in c.iter().zip(&result.transported) {
        end.axpy(*ci, e, 1.0);
    }
    Ok((end, result))
}

/// Development in the coordinates of a frame at the start point.
#[derive(Clone, Debug, PartialEq)]
pub struct DevelopmentCurve {
    pub grid: Vec<f64>,
    pub points: Vec<Vector>,
    /// Frame components of the velocity, i.e. the transported-back velocity.
    pub velocities: Vec<Vector>,
}

impl DevelopmentCurve {
    /// Straight line `t v` on `[0, t_end]`.
    pub fn line(v: &Vector, t_end: f64, n: usize) -> Self {
        let n = n.max(1);
        let grid: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
        Self {
            points: grid.iter().map(|t| v * *t).collect(),
            velocities: vec![v.clone(); n + 1],
            grid,
        }
    }

    pub fn end(&self) -> &Vector {
        self.points.last().expect("nonempty")
    }

    /// Applies a linear map to positions and velocities.
    pub fn map_linear(&self, a: &Matrix) -> Self {
        Self {
            grid: self.grid.clone(),
            points: self.points.iter().map(|p| a * p).collect(),
            velocities: self.velocities.iter().map(|p| a * p).collect(),
        }
    }

    fn segment_velocity_mid(&self, k: usize) -> Vector {
        let h = self.grid[k + 1] - self.grid[k];
        (&self.points[k + 1] - &self.points[k]) * (1.5 / h) - (&self.velocities[k] + &self.velocities[k + 1]) * 0.25
    }

    pub fn to_csv(&self) -> String {
        let m = self.points[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|i| format!("c{i}")));
        header.extend((1..=m).map(|i| format!("dc{i}")));
        let mut out = header.join(",");
        out.push('\n');
        for k in 0..self.grid.len() {
            let mut row = vec![fmt_num(self.grid[k])];
            row.extend(self.points[k].iter().map(|v| fmt_num(*v)));
            row.extend(self.velocities[k].iter().map(|v| fmt_num(*v)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Frame-transport of the curve plus frame components of its velocity.
pub(crate) struct FrameAlong {
    pub frames: Vec<Vec<Vector>>,
    pub components: Vec<Vector>,
}

pub(crate) fn frame_along(manifold: &ManifoldSpec, curve: &Curve, frame: &Frame) -> Result<FrameAlong> {
    let frames = transport_along(manifold, curve, &frame.vectors)?;
    let sig = manifold.signature();
    let mut components = Vec::with_capacity(curve.len());
    for k in 0..curve.len() {
        let g = manifold.inner_form(&curve.points[k])?;
        let e = &frames[k];
        components.push(Vector::from_fn(e.len(), |i, _| {
            sig.sign(i) * g.apply(&e[i], &curve.velocities[k])
        }));
    }
    Ok(FrameAlong { frames, components })
}

/// Cumulative trapezoid rule; repeated grid values contribute nothing.
pub(crate) fn trapezoid(grid: &[f64], values: &[Vector]) -> Vec<Vector> {
    let mut out = Vec::with_capacity(grid.len());
    out.push(Vector::zeros(values[0].len()));
    for k in 1..grid.len() {
        let h = grid[k] - grid[k - 1];
        let next = &out[k - 1] + (&values[k - 1] + &values[k]) * (h / 2.0);
        out.push(next);
    }
    out
}

/// Development of `curve` in the coordinates of `frame` (a frame at the
/// start point).
pub fn develop_in(manifold: &ManifoldSpec, curve: &Curve, frame: &Frame) -> Result<DevelopmentCurve> {
    let along = frame_along(manifold, curve, frame)?;
    Ok(DevelopmentCurve {
        grid: curve.grid.clone(),
        points: trapezoid(&curve.grid, &along.components),
        velocities: along.components,
    })
}

/// Development in the canonical frame at the start point.
pub fn develop(manifold: &ManifoldSpec, curve: &Curve) -> Result<DevelopmentCurve> {
    let frame = manifold.canonical_frame(&curve.start_point())?;
    develop_in(manifold, curve, &frame)
}

/// Why an anti-development stopped early.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Escape {
    pub t: f64,
    pub reason: String,
}

impl Escape {
    pub fn diagnostic(&self) -> String {
        format!("escaped at t* = {} ({})", self.t, self.reason)
    }
}

/// Result of anti-development: the curve (possibly only up to the escape
/// time) and the transported frame along it.
#[derive(Clone, Debug, PartialEq)]
pub struct Antidevelopment {
    pub curve: Curve,
    pub frames: Vec<Vec<Vector>>,
    pub escape: Option<Escape>,
}

impl Antidevelopment {
    pub fn is_complete(&self) -> bool {
        self.escape.is_none()
    }
}

fn combine(frame: &[Vector], c: &Vector) -> Vector {
    let mut out = Vector::zeros(frame[0].len());
    for (ci, e) in c.iter().zip(frame) {
        out.axpy(*ci, e, 1.0);
    }
    out
}

/// Right-hand side of the coupled system `x' = E c'`, `E_j' = -conn(x', E_j)`.
fn antidevelop_rhs(
    manifold: &ManifoldSpec,
    t: f64,
    x: &Vector,
    e: &[Vector],
    cdot: &Vector,
) -> Result<(Vector, Vec<Vector>)> {
    check_state(t, x)?;
    let conn = manifold.connection_at(x).map_err(|err| Error::Integration {
        t,
        reason: err.to_string(),
    })?;
    let xdot = combine(e, cdot);
    let edot = e.iter().map(|v| -conn.apply(&xdot, v)).collect();
    Ok((xdot, edot))
}

fn antidevelop_step(
    manifold: &ManifoldSpec,
    t: f64,
    h: f64,
    x: &Vector,
    e: &[Vector],
    cd: [&Vector; 3],
) -> Result<(Vector, Vec<Vector>)> {
    let add = |x: &Vector, e: &[Vector], dx: &Vector, de: &[Vector], s: f64| -> (Vector, Vec<Vector>) {
        (x + dx * s, e.iter().zip(de).map(|(a, b)| a + b * s).collect())
    };
    let (k1x, k1e) = antidevelop_rhs(manifold, t, x, e, cd[0])?;
    let (x2, e2) = add(x, e, &k1x, &k1e, h / 2.0);
    let (k2x, k2e) = antidevelop_rhs(manifold, t + h / 2.0, &x2, &e2, cd[1])?;
    let (x3, e3) = add(x, e, &k2x, &k2e, h / 2.0);
    let (k3x, k3e) = antidevelop_rhs(manifold, t + h / 2.0, &x3, &e3, cd[1])?;
    let (x4, e4) = add(x, e, &k3x, &k3e, h);
    let (k4x, k4e) = antidevelop_rhs(manifold, t + h, &x4, &e4, cd[2])?;
    let xn = x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
    let en = (0..e.len())
        .map(|j| &e[j] + (&k1e[j] + &k2e[j] * 2.0 + &k3e[j] * 2.0 + &k4e[j]) * (h / 6.0))
        .collect();
    Ok((xn, en))
}

/// Inverse of development: the curve starting at `frame.base` whose
/// development in `frame` is `dev`. Escape from the domain (blow-up,
/// singular metric, runaway steps) ends the curve early with a diagnostic.
pub fn antidevelop(manifold: &ManifoldSpec, frame: &Frame, dev: &DevelopmentCurve) -> Result<Antidevelopment> {
    if dev.grid.is_empty() || dev.points.len() != dev.grid.len() || dev.velocities.len() != dev.grid.len() {
        return Err(Error::InvalidCurve("malformed development curve".into()));
    }
    if dev.points[0].amax() > 1e-12 {
        return Err(Error::InvalidCurve("development curve must start at 0".into()));
    }
    if dev.points[0].len() != manifold.dim() {
        return Err(Error::DimensionMismatch {
            expected: manifold.dim(),
            found: dev.points[0].len(),
        });
    }
    manifold.validate_point(&frame.base)?;
    let mut x = frame.base.coords.clone();
    let mut e = frame.vectors.clone();
    let mut grid = vec![dev.grid[0]];
    let mut points = vec![x.clone()];
    let mut velocities = vec![combine(&e, &dev.velocities[0])];
    let mut frames = vec![e.clone()];
    let mut escape = None;
    for k in 0..dev.grid.len() - 1 {
        let (t, h) = (dev.grid[k], dev.grid[k + 1] - dev.grid[k]);
        if h < 0.0 {
            return Err(Error::InvalidCurve(format!("grid decreases at index {}", k + 1)));
        }
        if h > 0.0 {
            let mid = dev.segment_velocity_mid(k);
            let step = antidevelop_step(
                manifold,
                t,
                h,
                &x,
                &e,
                [&dev.velocities[k], &mid, &dev.velocities[k + 1]],
            )
            .and_then(|(mut xn, en)| {
                check_state(t + h, &xn)?;
                let jump = (&xn - &x).norm() / x.norm().max(1.0);
                if jump > ESCAPE_JUMP {
                    return Err(Error::Integration {
                        t,
                        reason: format!("runaway step, relative change {jump:.3}"),
                    });
                }
                let mut dummy = Vector::zeros(xn.len());
                renormalize(manifold, t + h, &mut xn, &mut dummy)?;
                let en = project_all(manifold, &xn, en)?;
                manifold
                    .inner_form(&xn)
                    .and_then(|_| manifold.validate_point(&Point::new(xn.clone())))
                    .map_err(|err| Error::Integration {
                        t: t + h,
                        reason: err.to_string(),
                    })?;
                Ok((xn, en))
            });
            match step {
                Ok((xn, en)) => {
                    x = xn;
                    e = en;
                }
                Err(Error::Integration { t, reason }) => {
                    escape = Some(Escape { t, reason });
                    break;
                }
                Err(other) => return Err(other),
            }
        }
        grid.push(dev.grid[k + 1]);
        points.push(x.clone());
        velocities.push(combine(&e, &dev.velocities[k + 1]));
        frames.push(e.clone());
    }
    Ok(Antidevelopment {
        curve: Curve {
            grid,
            points,
            velocities,
        },
        frames,
        escape,
    })
}

/// Settings for [`completeness_probe_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeOptions {
    pub initial_step: f64,
    pub max_step: f64,
    /// Local error target per step (step-doubling estimate).
    pub tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            initial_step: 1e-2,
            max_step: 0.1,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeReport {
    pub reached: bool,
    pub t_max: f64,
    /// Last accepted parameter; the blow-up time when `reached` is false.
    pub t_final: f64,
    pub steps: usize,
    pub reason: Option<String>,
    pub witness_point: Vec<f64>,
    pub witness_velocity: Vec<f64>,
    /// Always set: a run that reaches `t_max` does not prove completeness.
    pub note: String,
}

pub fn completeness_probe(manifold: &ManifoldSpec, x: &Point, v: &Vector, t_max: f64) -> Result<ProbeReport> {
    completeness_probe_with(manifold, x, v, t_max, ProbeOptions::default())
}

/// Adaptive geodesic integration up to `t_max`; blow-up is declared when the
/// step falls below `1e-12` or the state norm exceeds `1e12`.
pub fn completeness_probe_with(
    manifold: &ManifoldSpec,
    x: &Point,
    v: &Vector,
    t_max: f64,
    opts: ProbeOptions,
) -> Result<ProbeReport> {
    manifold.validate_point(x)?;
    manifold.validate_tangent(x, v)?;
    const MIN_STEP: f64 = 1e-12;
    let (mut xc, mut vc) = (x.coords.clone(), v.clone());
    let mut t = 0.0;
    let mut h = opts.initial_step.min(t_max.max(MIN_STEP));
    let mut steps = 0;
    let mut reason = None;
    while t < t_max {
        h = h.min(t_max - t);
        if h < MIN_STEP && t_max - t >= MIN_STEP {
            reason = Some(format!("step fell below {MIN_STEP:e}"));
            break;
        }
        let attempt = (|| -> Result<(Vector, Vector, f64)> {
            let (xf, vf) = geodesic_step(manifold, t, &xc, &vc, h)?;
            let (xa, va) = geodesic_step(manifold, t, &xc, &vc, h / 2.0)?;
            let (xb, vb) = geodesic_step(manifold, t + h / 2.0, &xa, &va, h / 2.0)?;
            let scale = xb.norm() + vb.norm() + 1.0;
            let err = ((&xb - xf).norm() + (&vb - vf).norm()) / scale;
            if !err.is_finite() {
                return Err(Error::Integration {
                    t,
                    reason: "non-finite state".into(),
                });
            }
            Ok((xb, vb, err))
        })();
        match attempt {
            Ok((mut xn, mut vn, err)) if err <= opts.tol => {
                if xn.norm() + vn.norm() > BLOW_UP_NORM {
                    t += h;
                    xc = xn;
                    vc = vn;
                    steps += 1;
                    reason = Some(format!("state norm exceeds {BLOW_UP_NORM:e}"));
                    break;
                }
                if renormalize(manifold, t + h, &mut xn, &mut vn).is_err() {
                    h /= 2.0;
                    continue;
                }
                t += h;
                xc = xn;
                vc = vn;
                steps += 1;
                let grow = if err == 0.0 {
                    2.0
                } else {
                    (0.9 * (opts.tol / err).powf(0.2)).clamp(0.2, 2.0)
                };
                h = (h * grow).min(opts.max_step);
            }
            Ok(_) | Err(_) => h /= 2.0,
        }
    }
    let reached = reason.is_none();
    Ok(ProbeReport {
        reached,
        t_max,
        t_final: t,
        steps,
        reason,
        witness_point: xc.iter().copied().collect(),
        witness_velocity: vc.iter().copied().collect(),
        note: if reached {
            "no blow-up detected up to tMax; this does not prove completeness".into()
        } else {
            "geodesic leaves every compact set at finite parameter (numerical evidence)".into()
        },
    })
}
