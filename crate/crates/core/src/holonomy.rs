//! Holonomy of the Levi-Civita connection and of rolling.
//!
//! The linear holonomy algebra is estimated either from small loops or from
//! the curvature operators at the base point; its rank decides whether the
//! holonomy group can be all of `SO0(n, nu)`. Rolling holonomy elements are
//! `SE0` elements read off from rolling along loops, and a pure translation
//! among them (or their short products) witnesses complete controllability.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Frame, ManifoldSpec, Point};
use crate::minkowski::{
    algebra_singular_values, lie_closure_rank, rank_from_singular_values, so_log, so_log_unbounded, span_basis,
    translation_closure_word, LetterKind, LieAlgebraElement, LorentzMatrix, SEElement, SEElementRecord, Signature,
    Vector,
};
use crate::rolling::{fiber_transporter, roll_flat, ConfigState};
use crate::transport::{geodesic, transport_frame, Curve};

/// Relative singular-value cutoff for ranks.
pub const RANK_REL_CUTOFF: f64 = 1e-6;
/// Absolute floor under which a singular value is zero.
pub const RANK_ABS_FLOOR: f64 = 1e-9;
/// Side of the loops used by the loop method, relative to the curvature radius.
pub const LOOP_SIDE: f64 = 0.05;
/// Samples per loop side.
pub const LOOP_SEGMENTS: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub enum LoopKind {
    /// Rectangle `(0,0) -> (0,s) -> (s,s) -> (s,0) -> (0,0)` in the `(i, j)`
    /// coordinate plane; on the quadrics the directions are the canonical
    /// frame vectors and the sides are projected onto the quadric.
    CoordinateRectangle {
        i: usize,
        j: usize,
        side: f64,
    },
    /// Triangle with vertices `x`, `exp(s v1)`, `exp(s v2)`; the sides are
    /// geodesics on flat spaces and quadrics and coordinate segments in
    /// other charts.
    GeodesicTriangle {
        v1: Vector,
        v2: Vector,
        scale: f64,
    },
    Explicit(Curve),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopSpec {
    pub base: Point,
    pub kind: LoopKind,
}

impl LoopSpec {
    pub fn rectangle(base: Point, i: usize, j: usize, side: f64) -> Self {
        Self {
            base,
            kind: LoopKind::CoordinateRectangle { i, j, side },
        }
    }

    /// Samples the loop with `per_side` steps per side.
    pub fn curve(&self, manifold: &ManifoldSpec, per_side: usize) -> Result<Curve> {
        manifold.validate_point(&self.base)?;
        let x = &self.base.coords;
        let curve = match &self.kind {
            LoopKind::Explicit(c) => c.clone(),
            LoopKind::CoordinateRectangle { i, j, side } => {
                let m = manifold.dim();
                if *i >= m || *j >= m || i == j {
                    return Err(Error::InvalidCurve(format!(
                        "bad rectangle plane ({i}, {j}) in dimension {m}"
                    )));
                }
                let (a, b) = if manifold.is_embedded() {
                    let f = manifold.canonical_frame(&self.base)?;
                    (f.vectors[*i].clone(), f.vectors[*j].clone())
                } else {
                    let e = |k: usize| Vector::from_fn(m, |r, _| if r == k { 1.0 } else { 0.0 });
                    (e(*i), e(*j))
                };
                let (a, b) = (a * *side, b * *side);
                polygon(manifold, &[x.clone(), x + &b, x + &a + &b, x + &a, x.clone()], per_side)?
            }
            LoopKind::GeodesicTriangle { v1, v2, scale } => {
                manifold.validate_tangent(&self.base, v1)?;
                manifold.validate_tangent(&self.base, v2)?;
                let vertex = |v: &Vector| -> Vector {
                    manifold
                        .exact_geodesic(x, v, *scale)
                        .map(|(p, _)| p)
                        .unwrap_or_else(|| x + v * *scale)
                };
                polygon(manifold, &[x.clone(), vertex(v1), vertex(v2), x.clone()], per_side)?
            }
        };
        let gap = (curve.end() - x).amax().max((curve.start() - x).amax());
        if gap > 1e-9 * x.amax().max(1.0) {
            return Err(Error::InvalidCurve(format!(
                "loop does not close at its base: gap {gap:e}"
            )));
        }
        Ok(curve)
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            LoopKind::CoordinateRectangle { i, j, side } => format!("rect:{i},{j},{side}"),
            LoopKind::GeodesicTriangle { scale, .. } => format!("triangle:{scale}"),
            LoopKind::Explicit(c) => format!("explicit:{}", c.len()),
        }
    }
}

/// Closed polygon through `vertices` (chart or ambient coordinates), each
/// side a straight segment pushed onto the manifold; corners are repeated
/// grid values.
fn polygon(manifold: &ManifoldSpec, vertices: &[Vector], per_side: usize) -> Result<Curve> {
    let n = per_side.max(1);
    let mut grid = Vec::new();
    let mut points = Vec::new();
    let mut velocities = Vec::new();
    for (s, w) in vertices.windows(2).enumerate() {
        let d = &w[1] - &w[0];
        for k in 0..=n {
            let tau = k as f64 / n as f64;
            let (p, v) = manifold.retract(&(&w[0] + &d * tau), &d)?;
            grid.push(s as f64 + tau);
            points.push(p);
            velocities.push(v);
        }
    }
    Curve::new(manifold, grid, points, Some(velocities))
}

/// Transports `frame` around the loop; the result is the holonomy in that frame.
pub fn loop_holonomy(manifold: &ManifoldSpec, lp: &LoopSpec, frame: &Frame, per_side: usize) -> Result<LorentzMatrix> {
    let curve = lp.curve(manifold, per_side)?;
    holonomy_of_curve(manifold, &curve, frame)
}

pub fn holonomy_of_curve(manifold: &ManifoldSpec, curve: &Curve, frame: &Frame) -> Result<LorentzMatrix> {
    let res = transport_frame(manifold, curve, frame, Some(frame))?;
    LorentzMatrix::with_tolerance(manifold.signature(), res.operator, 1e-7)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HolonomyMethod {
    Loops,
    Curvature,
}

impl std::str::FromStr for HolonomyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loops" => Ok(Self::Loops),
            "curvature" => Ok(Self::Curvature),
            other => Err(Error::Unsupported(format!("unknown holonomy method '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolonomyEstimate {
    pub base: Point,
    pub frame: Frame,
    /// Loop holonomies (loop method only).
    pub samples: Vec<LorentzMatrix>,
    pub basis: Vec<LieAlgebraElement>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub dim_full: usize,
    pub method: HolonomyMethod,
}

impl HolonomyEstimate {
    pub fn verdict(&self) -> &'static str {
        if self.rank == 0 {
            "trivial"
        } else if self.rank == self.dim_full {
            "full"
        } else {
            "partial"
        }
    }

    pub fn is_full(&self) -> bool {
        self.rank == self.dim_full
    }
}

fn length_scale(manifold: &ManifoldSpec) -> f64 {
    manifold.quadric().map_or(1.0, |(_, kappa)| kappa.abs().sqrt())
}

/// Rank of the holonomy algebra at `x`.
///
/// `Loops`: `budget` parallelograms in seeded random 2-planes, each giving
/// `log(P) / s^2`. `Curvature`: span of `R(E_i, E_j)` over frame pairs, a
/// lower bound that is exact for spaces of constant curvature.
pub fn holonomy_algebra_estimate(
    manifold: &ManifoldSpec,
    x: &Point,
    budget: usize,
    seed: u64,
    method: HolonomyMethod,
) -> Result<HolonomyEstimate> {
    if budget == 0 {
        return Err(Error::Unsupported("budget must be at least 1".into()));
    }
    let sig = manifold.signature();
    let m = sig.dim();
    let frame = manifold.canonical_frame(x)?;
    let mut samples = Vec::new();
    let mut elements = Vec::new();
    match method {
        HolonomyMethod::Curvature => {
            for i in 0..m {
                for j in i + 1..m {
                    let r = manifold.curvature_endomorphism(&frame, &frame.vectors[i], &frame.vectors[j])?;
                    elements.push(LieAlgebraElement::project(sig, &r));
                }
            }
        }
        HolonomyMethod::Loops => {
            let side = LOOP_SIDE * length_scale(manifold);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..budget {
                let mut draw = || {
                    let c = Vector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
                    let c = &c / c.norm();
                    frame.combine(&c) * side
                };
                let (a, b) = (draw(), draw());
                let xc = &x.coords;
                let curve = polygon(
                    manifold,
                    &[xc.clone(), xc + &a, xc + &a + &b, xc + &b, xc.clone()],
                    LOOP_SEGMENTS,
                )?;
                let p = holonomy_of_curve(manifold, &curve, &frame)?;
                let log = so_log(&p)?;
                elements.push(log.scale(1.0 / (side * side)));
                samples.push(p);
            }
        }
    }
    let singular_values = algebra_singular_values(&elements);
    let rank = rank_from_singular_values(&singular_values, RANK_REL_CUTOFF, RANK_ABS_FLOOR);
    let basis = if rank == 0 {
        Vec::new()
    } else {
        span_basis(&elements, RANK_REL_CUTOFF, RANK_ABS_FLOOR)
    };
    Ok(HolonomyEstimate {
        base: x.clone(),
        frame,
        samples,
        basis,
        singular_values,
        rank,
        dim_full: sig.algebra_dim(),
        method,
    })
}

/// Rolling holonomy elements `B` with `se_act(B, q) = end of rolling q
/// around a loop`.
#[derive(Clone, Debug, PartialEq)]
pub struct RollingHolonomyEstimate {
    pub base: ConfigState,
    pub elements: Vec<SEElement>,
    pub labels: Vec<String>,
}

pub fn rolling_holonomy_sample(
    manifold: &ManifoldSpec,
    q: &ConfigState,
    loops: &[LoopSpec],
    per_side: usize,
) -> Result<RollingHolonomyEstimate> {
    let mut elements = Vec::with_capacity(loops.len());
    let mut labels = Vec::with_capacity(loops.len());
    for lp in loops {
        let gap = (&lp.base.coords - &q.x.coords).amax();
        if gap > 1e-9 * q.x.coords.amax().max(1.0) {
            return Err(Error::InvalidCurve("loop is not based at the contact point".into()));
        }
        let curve = lp.curve(manifold, per_side)?;
        elements.push(rolling_holonomy_element(manifold, q, &curve)?);
        labels.push(lp.describe());
    }
    Ok(RollingHolonomyEstimate {
        base: q.clone(),
        elements,
        labels,
    })
}

/// `B` for rolling `q` along a closed curve.
pub fn rolling_holonomy_element(manifold: &ManifoldSpec, q: &ConfigState, closed: &Curve) -> Result<SEElement> {
    let rc = roll_flat(manifold, q, closed)?;
    fiber_transporter(manifold, q, rc.end())
}

/// Limits for product searches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    pub tol: f64,
    pub max_word_len: usize,
    /// Maximum number of products examined.
    pub budget: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_word_len: 4,
            budget: 10_000,
        }
    }
}

/// An element together with how it was obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub element: SEElement,
    /// Letters `g{k}` or `g{k}^-1` over the generator list, left to right.
    pub word: Vec<String>,
    pub source: Option<String>,
}

impl Witness {
    pub fn to_record(&self) -> WitnessRecord {
        let rec = SEElementRecord::from(&self.element);
        WitnessRecord {
            y: rec.y,
            c: rec.c,
            word: self.word.clone(),
            source: self.source.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessRecord {
    pub y: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub word: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

type Word = Vec<(usize, bool)>;

fn word_labels(w: &Word) -> Vec<String> {
    w.iter()
        .map(|(k, inv)| if *inv { format!("g{k}^-1") } else { format!("g{k}") })
        .collect()
}

/// Products of the generators and their inverses, shortest words first,
/// skipping immediate cancellations; at most `budget` products.
fn products(gens: &[SEElement], max_len: usize, budget: usize) -> Vec<(Word, SEElement)> {
    let letters: Vec<(usize, bool, SEElement)> = gens
        .iter()
        .enumerate()
        .flat_map(|(k, g)| [(k, false, g.clone()), (k, true, g.inverse())])
        .collect();
    let mut out: Vec<(Word, SEElement)> = Vec::new();
    let mut level: Vec<(Word, SEElement)> = vec![(Vec::new(), SEElement::identity(gens[0].signature()))];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (w, e) in &level {
            for (k, inv, g) in &letters {
                if let Some((lk, linv)) = w.last() {
                    if lk == k && linv != inv {
                        continue;
                    }
                }
                if out.len() >= budget {
                    return out;
                }
                let mut w2 = w.clone();
                w2.push((*k, *inv));
                let prod = e.compose(g);
                out.push((w2.clone(), prod.clone()));
                next.push((w2, prod));
            }
        }
        level = next;
    }
    out
}

/// Pure translation among `elements` or their products; also combines two
/// products with equal linear part and different translation part.
fn find_translation(elements: &[SEElement], opts: SearchOptions) -> (Option<Witness>, usize) {
    if elements.is_empty() {
        return (None, 0);
    }
    let prods = products(elements, opts.max_word_len, opts.budget);
    for (w, e) in &prods {
        if e.is_pure_translation(opts.tol) {
            return (
                Some(Witness {
                    element: e.clone(),
                    word: word_labels(w),
                    source: None,
                }),
                prods.len(),
            );
        }
    }
    let mut order: Vec<usize> = (0..prods.len()).collect();
    let key = |i: usize| prods[i].1.linear_part().matrix()[(0, 0)];
    order.sort_by(|a, b| key(*a).total_cmp(&key(*b)));
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if key(j) - key(i) > opts.tol {
                break;
            }
            let (wi, ei) = &prods[i];
            let (wj, ej) = &prods[j];
            let dc = (ei.linear_part().matrix() - ej.linear_part().matrix()).norm();
            let dy = (ei.translation_part() - ej.translation_part()).norm();
            if dc <= opts.tol && dy >= 10.0 * opts.tol {
                let element = ei.compose(&ej.inverse());
                let mut word = wi.clone();
                word.extend(wj.iter().rev().map(|(k, inv)| (*k, !inv)));
                return (
                    Some(Witness {
                        element,
                        word: word_labels(&word),
                        source: Some("two products with equal linear part".into()),
                    }),
                    prods.len(),
                );
            }
        }
    }
    (None, prods.len())
}

/// Scans the sampled elements and their short products for a pure
/// translation. `None` only means nothing was found within the budget.
pub fn detect_pure_translation(est: &RollingHolonomyEstimate, opts: SearchOptions) -> Option<Witness> {
    find_translation(&est.elements, opts).0
}

/// Composition of a translation word checked against its target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Demonstration {
    pub target: Vec<f64>,
    pub causal_class: String,
    pub word: Vec<LetterKind>,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Classification {
    /// The group contains a translation and therefore all of them.
    FullSE {
        witness: Witness,
        demonstrations: Vec<Demonstration>,
    },
    NoTranslationDetected {
        products_checked: usize,
        max_word_len: usize,
        budget: usize,
    },
}

/// Decides between "the generated group is all of `SE0(n,1)`" (a pure
/// translation was found) and "no translation found within budget". The
/// linear parts must generate a full-rank subalgebra.
pub fn classify_subgroup(generators: &[SEElement], opts: SearchOptions) -> Result<Classification> {
    let first = generators
        .first()
        .ok_or_else(|| Error::Unsupported("no generators".into()))?;
    let sig = first.signature();
    let logs = generators
        .iter()
        .map(|g| so_log_unbounded(g.linear_part()))
        .collect::<Result<Vec<_>>>()?;
    let rank = lie_closure_rank(&logs, RANK_REL_CUTOFF, RANK_ABS_FLOOR);
    if rank < sig.algebra_dim() {
        return Err(Error::Unsupported(format!(
            "linear parts generate a subalgebra of rank {rank} < {}; the dichotomy does not apply",
            sig.algebra_dim()
        )));
    }
    match find_translation(generators, opts) {
        (Some(witness), _) => {
            let demonstrations = demonstrate_closure(sig, witness.element.translation_part())?;
            Ok(Classification::FullSE {
                witness,
                demonstrations,
            })
        }
        (None, checked) => Ok(Classification::NoTranslationDetected {
            products_checked: checked,
            max_word_len: opts.max_word_len,
            budget: opts.budget,
        }),
    }
}

/// Translation words from the seed `v` to `e_0`, `e_last` and `e_0 + e_last`,
/// using the linear section `A -> (0, A)`.
pub fn demonstrate_closure(sig: Signature, v: &Vector) -> Result<Vec<Demonstration>> {
    if !sig.is_lorentzian() || sig.n < 2 {
        return Ok(Vec::new());
    }
    let m = sig.dim();
    let e = |k: usize| Vector::from_fn(m, |r, _| if r == k { 1.0 } else { 0.0 });
    let targets = [
        ("spacelike", e(0)),
        ("timelike", e(m - 1)),
        ("lightlike", e(0) + e(m - 1)),
    ];
    targets
        .iter()
        .map(|(class, u)| {
            let word = translation_closure_word(v, u, |a| Ok(SEElement::linear(a.clone())))?;
            let error = word.compose(sig).distance(&SEElement::translation(sig, u.clone())?);
            Ok(Demonstration {
                target: u.iter().copied().collect(),
                causal_class: class.to_string(),
                word: word.kinds(),
                error,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    NotControllable,
    ControllableWitnessed,
    FullHolonomyNoTranslationWitness,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllabilityReport {
    pub verdict: Verdict,
    pub estimate: HolonomyEstimate,
    pub witness: Option<Witness>,
    pub note: String,
}

/// A smoothly closed geodesic through the base point.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedGeodesic {
    pub velocity: Vector,
    pub period: f64,
}

/// Candidate initial directions: the frame vectors, then seeded random
/// unit vectors. The list for a larger budget extends the smaller one.
fn direction_candidates(manifold: &ManifoldSpec, frame: &Frame, count: usize, seed: u64) -> Vec<Vector> {
    let m = frame.vectors.len();
    let g = manifold.inner_form(&frame.base.coords).expect("validated frame");
    let mut out: Vec<Vector> = frame.vectors.iter().take(count).cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fc1);
    while out.len() < count {
        let c = Vector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let v = frame.combine(&c);
        let q = g.apply(&v, &v);
        if q.abs() > 1e-3 * c.norm_squared() {
            out.push(v / q.abs().sqrt());
        }
    }
    out
}

fn return_gap(x0: &Vector, curve: &Curve) -> (f64, f64) {
    let p = curve.end();
    let v = curve.velocities.last().expect("nonempty");
    let d = p - x0;
    (d.norm(), d.dot(v) / v.norm_squared())
}

/// Integrates geodesics from `x0` in candidate directions and returns the
/// first one that comes back to `x0` with its initial velocity.
pub fn find_closed_geodesic(
    manifold: &ManifoldSpec,
    frame: &Frame,
    candidates: usize,
    seed: u64,
    t_max: f64,
) -> Option<ClosedGeodesic> {
    direction_candidates(manifold, frame, candidates, seed)
        .into_iter()
        .find_map(|v| closed_geodesic_from(manifold, &frame.base, v, t_max))
}

/// The geodesic from `x0` with velocity `v`, if it closes up smoothly
/// before `t_max`; the period is refined by Newton steps on
/// `<x(t) - x0, x'(t)> = 0`.
pub fn closed_geodesic_from(manifold: &ManifoldSpec, x0: &Point, v: Vector, t_max: f64) -> Option<ClosedGeodesic> {
    const COARSE: f64 = 1e-2;
    const FINE: f64 = 1e-3;
    let scale = x0.coords.norm().max(1.0);
    let path = geodesic(manifold, x0, &v, t_max, COARSE).ok()?;
    let dist: Vec<f64> = path.points.iter().map(|p| (p - &x0.coords).norm()).collect();
    let mut left = false;
    let mut t = None;
    for k in 1..dist.len().saturating_sub(1) {
        left |= dist[k] > 0.1 * scale;
        if left && dist[k] <= dist[k - 1] && dist[k] <= dist[k + 1] && dist[k] < 0.05 * scale {
            t = Some(path.grid[k]);
            break;
        }
    }
    let mut t = t?;
    for _ in 0..6 {
        let c = geodesic(manifold, x0, &v, t, FINE).ok()?;
        let (gap, dt) = return_gap(&x0.coords, &c);
        if gap <= 1e-10 * scale {
            let closes = (c.velocities.last().expect("nonempty") - &v).norm() <= 1e-6 * v.norm().max(1.0);
            return closes.then_some(ClosedGeodesic { velocity: v, period: t });
        }
        t -= dt;
    }
    None
}

/// Settings for [`controllability_verdict`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllabilityOptions {
    /// Loops for the loop method and geodesic directions for the witness search.
    pub budget: usize,
    pub seed: u64,
    pub method: HolonomyMethod,
    pub step: f64,
    pub tol: f64,
    /// Longest geodesic tried, in units of the curvature radius.
    pub t_max: f64,
}

impl Default for ControllabilityOptions {
    fn default() -> Self {
        Self {
            budget: 16,
            seed: 0,
            method: HolonomyMethod::Curvature,
            step: 1e-3,
            tol: 1e-6,
            t_max: 8.0,
        }
    }
}

/// Three-valued controllability verdict at `x0`: rank-deficient holonomy
/// rules out complete controllability; full holonomy plus a pure
/// translation in the rolling holonomy (found by rolling along a closed
/// geodesic) proves it; anything else is inconclusive.
pub fn controllability_verdict(
    manifold: &ManifoldSpec,
    x0: &Point,
    opts: ControllabilityOptions,
) -> Result<ControllabilityReport> {
    let estimate = holonomy_algebra_estimate(manifold, x0, opts.budget, opts.seed, opts.method)?;
    if !estimate.is_full() {
        return Ok(ControllabilityReport {
            verdict: Verdict::NotControllable,
            note: format!(
                "holonomy rank {} < {}: not completely controllable, provided the estimate is exact",
                estimate.rank, estimate.dim_full
            ),
            estimate,
            witness: None,
        });
    }
    let sig = manifold.signature();
    if sig.nu != 1 {
        return Ok(ControllabilityReport {
            verdict: Verdict::FullHolonomyNoTranslationWitness,
            note: "full holonomy; the translation criterion needs index 1".into(),
            estimate,
            witness: None,
        });
    }
    let frame = estimate.frame.clone();
    let q = ConfigState::at_origin(manifold, frame.clone())?;
    let t_max = opts.t_max * length_scale(manifold);
    let mut witness = None;
    for v in direction_candidates(manifold, &frame, opts.budget.max(sig.dim()), opts.seed) {
        let Some(closed) = closed_geodesic_from(manifold, x0, v, t_max) else {
            continue;
        };
        let curve = geodesic(manifold, x0, &closed.velocity, closed.period, opts.step)?;
        let b = rolling_holonomy_element(manifold, &q, &curve)?;
        if b.is_pure_translation(opts.tol) {
            witness = Some(Witness {
                element: b,
                word: vec!["g0".into()],
                source: Some(format!(
                    "rolling along the closed geodesic with initial velocity {:?} and period {}",
                    closed.velocity.iter().copied().collect::<Vec<_>>(),
                    closed.period
                )),
            });
            break;
        }
    }
    let (verdict, note) = match &witness {
        Some(_) => (
            Verdict::ControllableWitnessed,
            "full holonomy and a pure translation in the rolling holonomy".to_string(),
        ),
        None => (
            Verdict::FullHolonomyNoTranslationWitness,
            "full holonomy, no pure translation found within budget; inconclusive".to_string(),
        ),
    };
    Ok(ControllabilityReport {
        verdict,
        estimate,
        witness,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::{fixed_point_embedding, so_exp};
    use std::f64::consts::PI;

    fn ds() -> ManifoldSpec {
        ManifoldSpec::pseudo_sphere(2, 1, 1.0).unwrap()
    }

    fn north() -> Point {
        Point::from_slice(&[1.0, 0.0, 0.0, 0.0])
    }

    #[test]
    fn flat_and_constant_loops_have_trivial_holonomy() {
        let m = ManifoldSpec::flat(2, 1);
        let x = Point::from_slice(&[0.0; 3]);
        let f = m.canonical_frame(&x).unwrap();
        let p = loop_holonomy(&m, &LoopSpec::rectangle(x.clone(), 0, 2, 0.5), &f, 16).unwrap();
        assert!(p.distance_from_identity() < 1e-14);

        let s = ds();
        let f = s.canonical_frame(&north()).unwrap();
        let c = Curve::constant(&s, &north().coords).unwrap();
        let lp = LoopSpec {
            base: north(),
            kind: LoopKind::Explicit(c),
        };
        assert_eq!(loop_holonomy(&s, &lp, &f, 8).unwrap().distance_from_identity(), 0.0);
    }

    #[test]
    fn small_rectangle_holonomy_matches_curvature() {
        let m = ds();
        let f = m.canonical_frame(&north()).unwrap();
        let r = m.curvature_endomorphism(&f, &f.vectors[0], &f.vectors[1]).unwrap();
        let mut errs = Vec::new();
        for s in [0.1, 0.05] {
            let p = loop_holonomy(&m, &LoopSpec::rectangle(north(), 0, 1, s), &f, 64).unwrap();
            let log = so_log(&p).unwrap();
            errs.push((log.matrix() / (s * s) - &r).norm());
        }
        assert!(errs[0] < 0.2, "{errs:?}");
        assert!(errs[1] < errs[0] * 0.75, "{errs:?}");
    }

    #[test]
    fn rank_table() {
        let cases = [
            (ManifoldSpec::flat(2, 1), Point::from_slice(&[0.0; 3]), 0),
            (ds(), north(), 3),
            (
                ManifoldSpec::pseudo_hyperbolic(2, 1, 1.0).unwrap(),
                Point::from_slice(&[0.0, 0.0, 0.0, 1.0]),
                3,
            ),
        ];
        for (m, x, want) in cases {
            for method in [HolonomyMethod::Curvature, HolonomyMethod::Loops] {
                let est = holonomy_algebra_estimate(&m, &x, 8, 3, method).unwrap();
                assert_eq!(est.rank, want, "{m} {method:?} {:?}", est.singular_values);
                for p in &est.samples {
                    assert!(p.residual() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn closed_geodesic_gives_translation_witness() {
        let m = ds();
        let f = m.canonical_frame(&north()).unwrap();
        let g = find_closed_geodesic(&m, &f, 3, 0, 8.0).unwrap();
        assert!((g.period - 2.0 * PI).abs() < 1e-8, "{g:?}");
        let q = ConfigState::at_origin(&m, f).unwrap();
        let curve = geodesic(&m, &north(), &g.velocity, g.period, 1e-3).unwrap();
        let b = rolling_holonomy_element(&m, &q, &curve).unwrap();
        let est = RollingHolonomyEstimate {
            base: q,
            elements: vec![b],
            labels: vec!["geodesic".into()],
        };
        let w = detect_pure_translation(&est, SearchOptions::default()).unwrap();
        assert!((w.element.translation_part().norm() - 2.0 * PI).abs() < 1e-4);
    }

    #[test]
    fn classification_examples() {
        let sig = Signature::lorentzian(2);
        let rot = LorentzMatrix::rotation(sig, 0, 1, 0.7).unwrap();
        let boost = LorentzMatrix::boost(sig, 0, 2, 0.4).unwrap();
        let boost2 = LorentzMatrix::boost(sig, 1, 2, -0.3).unwrap();
        let phi = SEElement::translation(sig, Vector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        let gens = vec![
            phi,
            SEElement::linear(rot.clone()),
            SEElement::linear(boost.clone()),
            SEElement::linear(boost2.clone()),
        ];
        match classify_subgroup(&gens, SearchOptions::default()).unwrap() {
            Classification::FullSE { demonstrations, .. } => {
                assert_eq!(demonstrations.len(), 3);
                for d in demonstrations {
                    assert!(d.error < 1e-8, "{d:?}");
                }
            }
            other => panic!("{other:?}"),
        }

        let x0 = Vector::from_vec(vec![0.3, -0.2, 1.5]);
        let fixed: Vec<SEElement> = [rot, boost, boost2]
            .iter()
            .map(|a| fixed_point_embedding(&x0, a).unwrap())
            .collect();
        let opts = SearchOptions {
            budget: 2000,
            ..SearchOptions::default()
        };
        assert!(matches!(
            classify_subgroup(&fixed, opts).unwrap(),
            Classification::NoTranslationDetected { .. }
        ));

        assert!(classify_subgroup(&[SEElement::identity(sig)], opts).is_err());
    }

    #[test]
    fn equal_linear_parts_force_a_translation() {
        let sig = Signature::lorentzian(2);
        let a = so_exp(&LieAlgebraElement::boost_generator(sig, 0, 2).unwrap().scale(0.3));
        let g1 = fixed_point_embedding(&Vector::from_vec(vec![1.0, 0.0, 0.0]), &a).unwrap();
        let g2 = fixed_point_embedding(&Vector::from_vec(vec![0.0, 1.0, 0.0]), &a).unwrap();
        let est = RollingHolonomyEstimate {
            base: ConfigState::at_origin(
                &ManifoldSpec::flat(2, 1),
                ManifoldSpec::flat(2, 1)
                    .canonical_frame(&Point::from_slice(&[0.0; 3]))
                    .unwrap(),
            )
            .unwrap(),
            elements: vec![g1, g2],
            labels: vec![],
        };
        let w = detect_pure_translation(&est, SearchOptions::default()).unwrap();
        assert!(w.element.is_pure_translation(1e-6));
    }

    #[test]
    fn verdicts() {
        let flat = ManifoldSpec::flat(2, 1);
        let r =
            controllability_verdict(&flat, &Point::from_slice(&[0.0; 3]), ControllabilityOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotControllable);
        let r = controllability_verdict(&ds(), &north(), ControllabilityOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::ControllableWitnessed);
        let h = ManifoldSpec::pseudo_hyperbolic(2, 1, 1.0).unwrap();
        let r = controllability_verdict(
            &h,
            &Point::from_slice(&[0.0, 0.0, 0.0, 1.0]),
            ControllabilityOptions::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::ControllableWitnessed);
        let y = r.witness.unwrap().element.translation_part().clone();
        let norm = Signature::lorentzian(2).inner(&y, &y).unwrap().abs().sqrt();
        assert!((norm - 2.0 * PI).abs() < 1e-4);
    }
}
