//! SIR-type epidemic model with saturated incidence `beta*S*I/(1+gamma*S)`
//! and saturated recovery `alpha*I/(1+rho*I)`.
//!
//! The crate provides:
//!
//! * [`model`] — parameters, state, vector fields, and the invariant domain;
//! * [`analysis`] — closed-form results: the basic reproduction number,
//!   endemic equilibria via a cubic in `I`, stability classification,
//!   bifurcation direction, the Dulac curve, and sensitivity indices;
//! * [`solver`] — adaptive Dormand–Prince 5(4) integration, piecewise-constant
//!   parameter schedules, and Poincaré-section limit-cycle detection;
//! * [`continuation`] — equilibrium-branch tracing parametrised by `I`,
//!   analytic locators for the transcritical/saddle-node/Hopf points,
//!   shooting-based locators for the homoclinic and fold-of-cycles points,
//!   and regime classification over the cautiousness level `gamma`;
//! * [`scenario`] — the built-in piecewise-constant `gamma(t)` schedule and
//!   the hysteresis demonstration.

pub mod analysis;
pub mod continuation;
pub mod model;
pub mod scenario;
pub mod solver;

pub use analysis::{
    basic_reproduction_number, classify_equilibrium, cubic_coefficients, descartes_degenerate,
    descartes_possible_counts, disease_free_equilibrium, dulac_curve, dulac_value, endemic_r,
    endemic_s, endemic_equilibria, jacobian_reduced, positive_cubic_roots, pq_values,
    sensitivity_indices, transcritical_direction, BifurcationDirection, CubicCoeffs, DulacCurve,
    Eigenvalue, EquilibriumKind, EquilibriumReport, SensitivityIndices, StabilityClass,
    TranscriticalDirection,
};
pub use continuation::{
    admissible_i_sup, branch_to_csv, classify_regime, cycles_to_csv, equilibrium_branch,
    gamma_of_I, locate_cycle_fold, locate_homoclinic, locate_hopf, locate_saddle_node,
    locate_transcritical, trace_cycle_branch, BifurcationKind, BifurcationPoint, BifurcationSet,
    BranchPoint, CycleBranchPoint, RegimeCase, RegimeCounts,
};
pub use model::{in_domain, rhs_full, rhs_reduced, ModelParams, State, StateDerivative};
pub use scenario::{
    builtin_schedule, run_hysteresis_demo, run_scenario, Checkpoint, ScenarioReport,
};
pub use solver::{
    detect_limit_cycle, integrate, integrate_schedule, CycleOptions, GammaSchedule,
    IntegrateOptions, LimitCycle, ScheduleSegment, TimeDirection, Trajectory,
};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate case: {0}")]
    Degenerate(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("stiffness: {0}")]
    Stiffness(String),
    #[error("domain escape: {0}")]
    DomainEscape(String),
    #[error("detection failure: {0}")]
    Detection(String),
    #[error("structure: {0}")]
    Structure(String),
    #[error("no Hopf point: {0}")]
    AbsentHopf(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
