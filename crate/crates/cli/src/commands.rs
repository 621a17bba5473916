//! The subcommands. Each returns the report text and an exit code.

use std::error::Error as StdError;
use std::path::Path;

use serde::Serialize;

use lorroll::holonomy::{Demonstration, WitnessRecord};
use lorroll::manifold::ManifoldKind;
use lorroll::rolling::{flat_target, ConfigRecord, ConstraintResiduals};
use lorroll::transport::{CurveRecord, Escape};
use lorroll::{
    classify_subgroup, completeness_probe, constraint_residuals, controllability_verdict, fiber_transporter,
    fixed_point_embedding, geodesic, holonomy_algebra_estimate, loop_holonomy, roll_flat, roll_general, so_log,
    Classification, ConfigState, ControllabilityOptions, Curve, LoopSpec, LorentzMatrix, ManifoldRecord, ManifoldSpec,
    Point, ProbeReport, SEElement, SEElementRecord, SearchOptions, Signature, Vector, Verdict,
};

use crate::config::{ConfigError, OutFormat, RunConfig};

pub const SCHEMA: &str = "lorroll/v1";

pub type CmdResult = Result<Report, Box<dyn StdError>>;

pub struct Report {
    pub text: String,
    pub exit: u8,
}

impl Report {
    fn json<T: Serialize>(value: &T, exit: u8) -> CmdResult {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        Ok(Report { text, exit })
    }

    fn csv(text: String) -> CmdResult {
        Ok(Report { text, exit: 0 })
    }
}

fn vec_of(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn rows_of(vs: &[Vector]) -> Vec<Vec<f64>> {
    vs.iter().map(vec_of).collect()
}

fn format_of(cfg: &RunConfig, default: OutFormat) -> OutFormat {
    cfg.out.unwrap_or(default)
}

fn json_only(cfg: &RunConfig) -> Result<(), ConfigError> {
    if cfg.out == Some(OutFormat::Csv) {
        return Err(ConfigError::at("out", "this command only writes JSON"));
    }
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct GeodesicOut {
    schema: &'static str,
    command: &'static str,
    manifold: ManifoldRecord,
    step: f64,
    curve: CurveRecord,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ProbeOut {
    schema: &'static str,
    command: &'static str,
    manifold: ManifoldRecord,
    probe: ProbeReport,
}

pub fn geodesic_cmd(cfg: &RunConfig) -> CmdResult {
    let m = cfg.manifold()?;
    let x = cfg.point(&m)?;
    let v = cfg.velocity(&m, &x)?;
    let t_end = cfg.t.unwrap_or(1.0);
    if cfg.probe.unwrap_or(false) {
        json_only(cfg)?;
        let probe = completeness_probe(&m, &x, &v, t_end)?;
        return Report::json(
            &ProbeOut {
                schema: SCHEMA,
                command: "geodesic",
                manifold: m.to_record(),
                probe,
            },
            0,
        );
    }
    let step = cfg.step()?;
    let curve = geodesic(&m, &x, &v, t_end, step)?;
    match format_of(cfg, OutFormat::Csv) {
        OutFormat::Csv => Report::csv(curve.to_csv()),
        OutFormat::Json => Report::json(
            &GeodesicOut {
                schema: SCHEMA,
                command: "geodesic",
                manifold: m.to_record(),
                step,
                curve: curve.to_record(),
            },
            0,
        ),
    }
}

/// `--loop rect:i,j,s`, `--curve geodesic[:T]`, or `--curve <file>`.
fn resolve_curve(cfg: &RunConfig, m: &ManifoldSpec, x: &Point) -> Result<Curve, Box<dyn StdError>> {
    let step = cfg.step()?;
    if let Some(spec) = &cfg.loop_spec {
        let lp = parse_loop(spec, x)?;
        let per_side = (1.0 / step).ceil().max(4.0) as usize;
        return Ok(lp.curve(m, per_side)?);
    }
    let spec = cfg.curve.as_deref().unwrap_or("geodesic");
    if let Some(rest) = spec.strip_prefix("geodesic") {
        let t_end = match rest.strip_prefix(':') {
            Some(t) => t
                .parse::<f64>()
                .map_err(|_| ConfigError::at("curve", format!("bad geodesic length '{t}'")))?,
            None if rest.is_empty() => cfg.t.unwrap_or(1.0),
            None => return Err(ConfigError::at("curve", format!("unknown curve '{spec}'")).into()),
        };
        let v = cfg.velocity(m, x)?;
        return Ok(geodesic(m, x, &v, t_end, step)?);
    }
    let path = Path::new(spec);
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::at("curve", format!("cannot read {spec}: {e}")))?;
    let curve = if path.extension().is_some_and(|e| e == "json") {
        let rec: CurveRecord = serde_json::from_str(&text).map_err(|e| ConfigError::at("curve", e))?;
        Curve::from_record(m, &rec)?
    } else {
        Curve::from_csv(m, &text)?
    };
    Ok(curve)
}

fn parse_loop(spec: &str, x: &Point) -> Result<LoopSpec, ConfigError> {
    let bad = || ConfigError::at("loop", format!("expected rect:i,j,s, got '{spec}'"));
    let params = spec.strip_prefix("rect:").ok_or_else(bad)?;
    let parts: Vec<&str> = params.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let i = parts[0].parse::<usize>().map_err(|_| bad())?;
    let j = parts[1].parse::<usize>().map_err(|_| bad())?;
    let s = parts[2].parse::<f64>().map_err(|_| bad())?;
    Ok(LoopSpec::rectangle(x.clone(), i, j, s))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DevelopOut {
    schema: &'static str,
    command: &'static str,
    manifold: ManifoldRecord,
    frame: Vec<Vec<f64>>,
    grid: Vec<f64>,
    points: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
}

pub fn develop_cmd(cfg: &RunConfig) -> CmdResult {
    let m = cfg.manifold()?;
    let x = cfg.point(&m)?;
    let curve = resolve_curve(cfg, &m, &x)?;
    let frame = m.canonical_frame(&curve.start_point())?;
    let dev = lorroll::transport::develop_in(&m, &curve, &frame)?;
    match format_of(cfg, OutFormat::Csv) {
        OutFormat::Csv => Report::csv(dev.to_csv()),
        OutFormat::Json => Report::json(
            &DevelopOut {
                schema: SCHEMA,
                command: "develop",
                manifold: m.to_record(),
                frame: rows_of(&frame.vectors),
                grid: dev.grid.clone(),
                points: rows_of(&dev.points),
                velocities: rows_of(&dev.velocities),
            },
            0,
        ),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RollOut {
    schema: &'static str,
    command: &'static str,
    manifold: ManifoldRecord,
    target: ManifoldRecord,
    complete: bool,
    escape: Option<Escape>,
    residuals: ConstraintResiduals,
    /// Fiber element taking the initial to the final state, for closed curves.
    holonomy: Option<SEElementRecord>,
    grid: Vec<f64>,
    states: Vec<ConfigRecord>,
}

pub fn roll_cmd(cfg: &RunConfig) -> CmdResult {
    let m = cfg.manifold()?;
    let x = cfg.point(&m)?;
    let curve = resolve_curve(cfg, &m, &x)?;
    let frame = m.canonical_frame(&curve.start_point())?;
    let target = cfg.target()?.unwrap_or_else(|| flat_target(m.signature()));
    let flat = target.is_flat();
    let rc = if flat {
        let q0 = ConfigState::at_origin(&m, frame)?;
        roll_flat(&m, &q0, &curve)?
    } else {
        let x_hat = target.default_point();
        let hat = target.canonical_frame(&x_hat)?;
        let q0 = ConfigState::new(&m, &target, frame, x_hat.coords, hat.vectors)?;
        roll_general(&m, &target, &q0, &curve)?
    };
    if format_of(cfg, OutFormat::Csv) == OutFormat::Csv {
        return Report::csv(rc.to_csv());
    }
    let residuals = constraint_residuals(&m, &target, &rc)?;
    let closed = (curve.end() - curve.start()).amax() <= 1e-9 * curve.start().amax().max(1.0);
    let holonomy = if flat && closed && rc.is_complete() {
        Some(SEElementRecord::from(&fiber_transporter(&m, &rc.states[0], rc.end())?))
    } else {
        None
    };
    Report::json(
        &RollOut {
            schema: SCHEMA,
            command: "roll",
            manifold: m.to_record(),
            target: target.to_record(),
            complete: rc.is_complete(),
            escape: rc.escape.clone(),
            residuals,
            holonomy,
            grid: rc.grid.clone(),
            states: rc.states.iter().map(ConfigState::to_record).collect(),
        },
        0,
    )
}

/// Flat spaces and the quadrics have constant curvature, where the
/// curvature span at one point is the whole holonomy algebra.
fn curvature_is_exact(m: &ManifoldSpec) -> bool {
    matches!(
        m.kind(),
        ManifoldKind::Flat { .. } | ManifoldKind::PseudoSphere { .. } | ManifoldKind::PseudoHyperbolic { .. }
    )
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct HolonomyOut {
    schema: &'static str,
    command: &'static str,
    manifold: ManifoldRecord,
    base: Vec<f64>,
    method: lorroll::HolonomyMethod,
    rank: usize,
    dim_full: usize,
    verdict: &'static str,
    singular_values: Vec<f64>,
    budget: usize,
    seed: u64,
    /// The rank is a lower bound for the holonomy algebra.
    lower_bound: bool,
    exact_for_manifold: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LoopHolonomyOut {
    schema: &'static str,
    command: &'static str,
    manifold: ManifoldRecord,
    base: Vec<f64>,
    #[serde(rename = "loop")]
    loop_spec: String,
    frame: Vec<Vec<f64>>,
    matrix: Vec<Vec<f64>>,
    log: Option<Vec<Vec<f64>>>,
    distance_from_identity: f64,
}

fn matrix_rows(m: &lorroll::Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn holonomy_cmd(cfg: &RunConfig) -> CmdResult {
    json_only(cfg)?;
    let m = cfg.manifold()?;
    let x = cfg.point(&m)?;
    if let Some(spec) = &cfg.loop_spec {
        let lp = parse_loop(spec, &x)?;
        let frame = m.canonical_frame(&x)?;
        let per_side = (1.0 / cfg.step()?).ceil().max(4.0) as usize;
        let p = loop_holonomy(&m, &lp, &frame, per_side)?;
        return Report::json(
            &LoopHolonomyOut {
                schema: SCHEMA,
                command: "holonomy",
                manifold: m.to_record(),
                base: vec_of(&x.coords),
                loop_spec: spec.clone(),
                frame: rows_of(&frame.vectors),
                matrix: p.rows(),
                log: so_log(&p).ok().map(|l| matrix_rows(l.matrix())),
                distance_from_identity: p.distance_from_identity(),
            },
            0,
        );
    }
    let budget = cfg.budget(12)?;
    let seed = cfg.seed()?;
    let method = cfg.method()?;
    let est = holonomy_algebra_estimate(&m, &x, budget, seed, method)?;
    let lower_bound = method == lorroll::HolonomyMethod::Curvature;
    Report::json(
        &HolonomyOut {
            schema: SCHEMA,
            command: "holonomy",
            manifold: m.to_record(),
            base: vec_of(&x.coords),
            method,
            rank: est.rank,
            dim_full: est.dim_full,
            verdict: est.verdict(),
            singular_values: est.singular_values.clone(),
            budget,
            seed,
            lower_bound,
            exact_for_manifold: lower_bound && curvature_is_exact(&m),
        },
        0,
    )
}

/// Built-in generator sets: `family:full:n` (a spacelike translation with
/// rotations and boosts) and `family:fixed-point:n` (rotations and boosts
/// fixing a common point).
fn generator_family(spec: &str) -> Result<Vec<SEElement>, Box<dyn StdError>> {
    let bad = || ConfigError::at("generators", format!("unknown generator family '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 || parts[0] != "family" {
        return Err(bad().into());
    }
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n < 1 {
        return Err(bad().into());
    }
    let sig = Signature::lorentzian(n);
    let mut linear: Vec<LorentzMatrix> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            linear.push(LorentzMatrix::rotation(sig, i, j, 0.7 + 0.1 * (i + j) as f64)?);
        }
        linear.push(LorentzMatrix::boost(sig, i, n, 0.4 - 0.05 * i as f64)?);
    }
    match parts[1] {
        "full" => {
            let mut e0 = Vector::zeros(n + 1);
            e0[0] = 1.0;
            let mut gens = vec![SEElement::translation(sig, e0)?];
            gens.extend(linear.into_iter().map(SEElement::linear));
            Ok(gens)
        }
        "fixed-point" => {
            let x0 = Vector::from_fn(n + 1, |i, _| if i == n { 1.5 } else { 0.3 - 0.5 * i as f64 });
            Ok(linear
                .iter()
                .map(|a| fixed_point_embedding(&x0, a))
                .collect::<lorroll::Result<_>>()?)
        }
        _ => Err(bad().into()),
    }
}

fn resolve_generators(cfg: &RunConfig) -> Result<Vec<SEElement>, Box<dyn StdError>> {
    let value = cfg
        .generators
        .as_ref()
        .ok_or_else(|| ConfigError::at("generators", "generators are required (--generators)"))?;
    let value = match value {
        serde_json::Value::String(s) if s.starts_with("family:") => return generator_family(s),
        serde_json::Value::String(s) if s.trim_start().starts_with('[') => serde_json::from_str(s)?,
        serde_json::Value::String(s) => {
            let text = std::fs::read_to_string(s)
                .map_err(|e| ConfigError::at("generators", format!("cannot read {s}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| ConfigError::at("generators", e))?
        }
        other => other.clone(),
    };
    let records: Vec<SEElementRecord> = serde_json::from_value(value).map_err(|e| ConfigError::at("generators", e))?;
    let first = records
        .first()
        .ok_or_else(|| ConfigError::at("generators", "empty generator list"))?;
    if first.y.len() < 2 {
        return Err(ConfigError::at("generators", "elements must act on R^{n,1} with n >= 1").into());
    }
    let sig = Signature::lorentzian(first.y.len() - 1);
    Ok(records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            r.to_element(sig)
                .map_err(|e| ConfigError::at(&format!("generators/{k}"), e))
        })
        .collect::<Result<_, _>>()?)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ClassifyOut {
    schema: &'static str,
    command: &'static str,
    verdict: &'static str,
    witnesses: Vec<WitnessRecord>,
    demonstrations: Vec<Demonstration>,
    products_checked: Option<usize>,
    max_word_len: usize,
    budget: usize,
    tol: f64,
}

pub fn classify_cmd(cfg: &RunConfig) -> CmdResult {
    json_only(cfg)?;
    let gens = resolve_generators(cfg)?;
    let opts = SearchOptions {
        tol: cfg.tol()?,
        max_word_len: cfg.word_len.unwrap_or(4),
        budget: cfg.budget(10_000)?,
    };
    let out = match classify_subgroup(&gens, opts)? {
        Classification::FullSE {
            witness,
            demonstrations,
        } => ClassifyOut {
            schema: SCHEMA,
            command: "classify-group",
            verdict: "FullSE",
            witnesses: vec![witness.to_record()],
            demonstrations,
            products_checked: None,
            max_word_len: opts.max_word_len,
            budget: opts.budget,
            tol: opts.tol,
        },
        Classification::NoTranslationDetected { products_checked, .. } => ClassifyOut {
            schema: SCHEMA,
            command: "classify-group",
            verdict: "NoTranslationDetected",
            witnesses: Vec::new(),
            demonstrations: Vec::new(),
            products_checked: Some(products_checked),
            max_word_len: opts.max_word_len,
            budget: opts.budget,
            tol: opts.tol,
        },
    };
    let exit = if out.witnesses.is_empty() { 2 } else { 0 };
    Report::json(&out, exit)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ControllabilityOut {
    schema: &'static str,
    command: &'static str,
    manifold: ManifoldRecord,
    base: Vec<f64>,
    verdict: Verdict,
    rank: usize,
    dim_full: usize,
    method: lorroll::HolonomyMethod,
    witnesses: Vec<WitnessRecord>,
    /// `sqrt |<y, y>|` of the witness translation.
    witness_norm: Option<f64>,
    budget: usize,
    seed: u64,
    note: String,
}

pub fn controllability_cmd(cfg: &RunConfig) -> CmdResult {
    json_only(cfg)?;
    let m = cfg.manifold()?;
    let x = cfg.point(&m)?;
    let opts = ControllabilityOptions {
        budget: cfg.budget(16)?,
        seed: cfg.seed()?,
        method: cfg.method()?,
        step: cfg.step()?,
        tol: cfg.tol()?,
        ..ControllabilityOptions::default()
    };
    let report = controllability_verdict(&m, &x, opts)?;
    let sig = m.signature();
    let witness_norm = report.witness.as_ref().map(|w| {
        let y = w.element.translation_part();
        sig.inner(y, y).map(|q| q.abs().sqrt()).unwrap_or(f64::NAN)
    });
    let exit = match report.verdict {
        Verdict::FullHolonomyNoTranslationWitness => 2,
        _ => 0,
    };
    Report::json(
        &ControllabilityOut {
            schema: SCHEMA,
            command: "controllability",
            manifold: m.to_record(),
            base: vec_of(&x.coords),
            verdict: report.verdict,
            rank: report.estimate.rank,
            dim_full: report.estimate.dim_full,
            method: report.estimate.method,
            witnesses: report.witness.iter().map(|w| w.to_record()).collect(),
            witness_norm,
            budget: opts.budget,
            seed: opts.seed,
            note: report.note,
        },
        exit,
    )
}
