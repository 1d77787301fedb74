//! Deflection estimation: maximum likelihood from event records,
//! least-squares fringe fits of slit-scan patterns, and Monte Carlo
//! variance studies against the Cramér–Rao bound.
//!
//! The likelihood is even in `Δθ`, so only the magnitude is estimable and
//! every estimate here is reported as `|Δθ|`.

mod fit;
mod mle;
mod study;

pub use fit::{fit_pattern, fit_rates, FitGuess, FitOptions, PatternFit};
pub use mle::{log_likelihood, mle_deflection, DeflectionEstimate, MleOptions};
pub use study::{variance_study, VarianceStudy, MIN_TRIALS};
