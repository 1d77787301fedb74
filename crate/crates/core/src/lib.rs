//! Spatial two-photon interference as a deflection sensor.
//!
//! A transverse tilt `Δθ` on one photon of a pair writes a fringe onto the
//! coincidence probability as a function of the momentum difference `Δk`.
//! This crate models the outcome probabilities with loss and imperfect
//! visibility, computes Fisher information and Cramér–Rao bounds, generates
//! seeded synthetic data, and estimates `Δθ` back from it.
//!
//! Units are SI throughout: radians, metres, and m⁻¹ for momenta.
//! [`units`] converts from the laboratory units used on the command line.

pub mod error;
pub mod estimator;
pub mod fisher;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod quadrature;
pub mod sampler;
pub mod units;

pub use error::{Error, Result};
pub use estimator::{
    fit_pattern, fit_rates, log_likelihood, mle_deflection, variance_study, DeflectionEstimate, FitGuess, FitOptions,
    MleOptions, PatternFit, VarianceStudy,
};
pub use fisher::{
    classical_fisher_information, cramer_rao_bounds, cramer_rao_std, fisher_scan, fisher_surface,
    optimal_working_point, quantum_fisher_information, BoundConvention, CramerRaoBounds, FisherResult, FisherSurface,
    WorkingPoint,
};
pub use model::{
    conditional_outcome_probabilities, coincidence_density, envelope, loss_map, outcome_densities, BeamGeometry,
    Deflection, ExchangeSymmetry, NoiseModel, OutcomeTriple,
};
pub use quadrature::{QuadratureRule, QuadratureSpec};
pub use sampler::{
    sample_event, scan_pattern, simulate_run, Acquisition, BinSpec, EventRecord, InterferencePattern, Outcome, RngSeed,
    ScanSpec,
};
