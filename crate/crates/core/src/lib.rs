//! Rolling of Lorentzian manifolds on their flat model space: Minkowski
//! algebra, a catalog of pseudo-Riemannian manifolds, parallel transport and
//! development, rolling curves, and holonomy-based controllability tests.

// index loops read closer to the tensor formulas
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod expr;
pub mod holonomy;
pub mod manifold;
pub mod minkowski;
pub mod rolling;
pub mod transport;

pub use error::{Error, Result};
pub use holonomy::{
    classify_subgroup, controllability_verdict, detect_pure_translation, holonomy_algebra_estimate, loop_holonomy,
    rolling_holonomy_sample, Classification, ControllabilityOptions, ControllabilityReport, HolonomyEstimate,
    HolonomyMethod, LoopKind, LoopSpec, RollingHolonomyEstimate, SearchOptions, Verdict, Witness,
};
pub use manifold::{CustomMetric, Frame, ManifoldKind, ManifoldRecord, ManifoldSpec, Point, Tangent};
pub use minkowski::{
    causal_character, fixed_point_embedding, inner, orbit_transporter, so_exp, so_log, translation_closure_word,
    CausalClass, LieAlgebraElement, LorentzMatrix, Matrix, SEElement, SEElementRecord, Signature, TimeComponent,
    TranslationWord, Vector,
};
pub use rolling::{
    constraint_residuals, fiber_transporter, roll_flat, roll_general, se_act, ConfigState, ConstraintResiduals,
    RollingCurve,
};
pub use transport::{
    antidevelop, completeness_probe, develop, geodesic, parallel_transport, Antidevelopment, Curve, DevelopmentCurve,
    ProbeReport, TransportResult,
};
