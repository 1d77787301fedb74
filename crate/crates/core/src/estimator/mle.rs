use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fisher::classical_fisher_information;
use crate::model::{conditional_at_phase, BeamGeometry, Deflection, NoiseModel};
use crate::optimize::golden_section_max;
use crate::quadrature::QuadratureSpec;
use crate::sampler::{EventRecord, Outcome};

/// Events summed per parallel task; fixed so reductions are reproducible.
const SUM_CHUNK: usize = 4096;
/// Running products are folded into the log once they drop below this.
const PRODUCT_FLUSH: f64 = 1e-200;
/// Probabilities below this go straight to the log accumulator.
const TINY_PROBABILITY: f64 = 1e-100;

/// Settings of [`mle_deflection`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Search interval for `|Δθ|` (radians).
    pub bracket: (f64, f64),
    pub grid_points: usize,
    /// Golden-section bracket width at which refinement stops (radians).
    pub tolerance: f64,
    /// Quadrature used for the Fisher information behind `std`.
    pub quadrature: QuadratureSpec,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { bracket: (0.0, 5e-3), grid_points: 1024, tolerance: 1e-9, quadrature: QuadratureSpec::default() }
    }
}

impl MleOptions {
    pub fn with_bracket(mut self, lo: f64, hi: f64) -> Self {
        self.bracket = (lo, hi);
        self
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bracket;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
            return Err(Error::domain(format!("bracket [{lo}, {hi}] rad must satisfy 0 <= lo < hi")));
        }
        if self.grid_points < 2 {
            return Err(Error::domain("likelihood grid needs at least two points"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::domain("refinement tolerance must be positive"));
        }
        self.quadrature.validate()
    }
}

/// Maximum-likelihood estimate of the deflection magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeflectionEstimate {
    /// Estimated `|Δθ|` (radians).
    pub value: f64,
    /// Plug-in Cramér–Rao standard deviation `1/√(N_eff F(value))`, where
    /// `N_eff` is the number of events with at least one click divided by
    /// `1 - γ²`. Infinite when the Fisher information vanishes at `value`.
    pub std: f64,
    pub log_likelihood_at_max: f64,
    pub bracket: (f64, f64),
    /// The maximum lies on the bracket edge.
    pub at_boundary: bool,
}

/// Log-likelihood `Σ log p(outcome_i | Δk_i; Δθ)`.
///
/// Returns `-∞` when some event is impossible under the model.
pub fn log_likelihood(
    events: &[EventRecord],
    deflection: Deflection,
    geometry: &BeamGeometry,
    noise: &NoiseModel,
) -> Result<f64> {
    if events.is_empty() {
        return Err(Error::Empty("event list"));
    }
    let d = geometry.distance();
    let t = deflection.radians();
    let partial: Vec<f64> = events
        .par_chunks(SUM_CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|e| {
                    let q = conditional_at_phase(e.delta_k * t * d, noise);
                    let p = match e.outcome {
                        Outcome::ZeroDetectors => q.p0,
                        Outcome::OneDetector => q.p1,
                        Outcome::TwoDetectors => q.p2,
                    };
                    p.ln()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(partial.iter().sum())
}

/// Log-likelihood on an even grid `lo + j·step` without the constant
/// zero-detector term, using a rotation recurrence for the fringe phase
/// and running products in place of per-event logarithms.
fn grid_log_likelihood(kd: &[(f64, bool)], noise: &NoiseModel, lo: f64, step: f64, points: usize) -> Vec<f64> {
    let g = noise.gamma();
    let tr = 1.0 - g;
    let t2 = tr * tr;
    let v = noise.signed_visibility();
    let cross = 2.0 * g * tr;
    let partial: Vec<Vec<f64>> = kd
        .par_chunks(SUM_CHUNK)
        .map(|chunk| {
            let mut prod = vec![1.0f64; points];
            let mut acc = vec![0.0f64; points];
            for &(k, two) in chunk {
                let (mut s, mut c) = (k * lo).sin_cos();
                let (ds, dc) = (k * step).sin_cos();
                for j in 0..points {
                    let anti = 0.5 * (1.0 - v * c);
                    let p = if two { t2 * anti } else { cross + t2 * (1.0 - anti) };
                    if p < TINY_PROBABILITY {
                        acc[j] += p.max(0.0).ln();
                    } else {
                        prod[j] *= p;
                        if prod[j] < PRODUCT_FLUSH {
                            acc[j] += prod[j].ln();
                            prod[j] = 1.0;
                        }
                    }
                    let cn = c * dc - s * ds;
                    s = s * dc + c * ds;
                    c = cn;
                }
            }
            acc.iter().zip(&prod).map(|(a, p)| a + p.ln()).collect()
        })
        .collect();
    let mut total = vec![0.0; points];
    for part in &partial {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

/// Maximum-likelihood `|Δθ|` inside `options.bracket`: a dense grid scan
/// of the log-likelihood followed by golden-section refinement in the
/// grid cells around the best node.
pub fn mle_deflection(
    events: &[EventRecord],
    geometry: &BeamGeometry,
    noise: &NoiseModel,
    options: &MleOptions,
) -> Result<DeflectionEstimate> {
    options.validate()?;
    if events.is_empty() {
        return Err(Error::Empty("event list"));
    }
    if noise.signed_visibility() == 0.0 || noise.gamma() >= 1.0 {
        return Err(Error::NonIdentifiable(format!(
            "outcome probabilities do not depend on the deflection (gamma = {}, nu = {})",
            noise.gamma(),
            noise.nu()
        )));
    }
    let d = geometry.distance();
    let clicked: Vec<(f64, bool)> = events
        .iter()
        .filter(|e| e.outcome != Outcome::ZeroDetectors)
        .map(|e| (e.delta_k * d, e.outcome == Outcome::TwoDetectors))
        .collect();
    let n_zero = events.len() - clicked.len();
    let constant = if n_zero == 0 { 0.0 } else { n_zero as f64 * (noise.gamma() * noise.gamma()).ln() };
    if clicked.is_empty() || constant == f64::NEG_INFINITY {
        return Err(Error::NonIdentifiable("no event depends on the deflection".into()));
    }

    let (lo, hi) = options.bracket;
    let points = options.grid_points;
    let step = (hi - lo) / (points - 1) as f64;
    let grid = grid_log_likelihood(&clicked, noise, lo, step, points);
    let best = grid.iter().enumerate().fold(0, |b, (i, &v)| if v > grid[b] { i } else { b });
    let top = grid[best];
    if top == f64::NEG_INFINITY {
        return Err(Error::NonIdentifiable("every deflection in the bracket has zero likelihood".into()));
    }
    let bottom = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    if top - bottom <= 1e-12 * top.abs().max(1.0) {
        return Err(Error::NonIdentifiable("log-likelihood is flat over the bracket".into()));
    }

    let ll = |t: f64| log_likelihood(events, Deflection(t), geometry, noise).unwrap_or(f64::NEG_INFINITY);
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = if best + 1 >= points { hi } else { lo + step * (best + 1) as f64 };
    let (mut x, mut value) = golden_section_max(&ll, a, b, options.tolerance);
    let node = if best + 1 == points { hi } else { lo + step * best as f64 };
    let node_value = ll(node);
    if node_value >= value {
        x = node;
        value = node_value;
    }
    let at_boundary = (x - lo).abs() <= options.tolerance || (hi - x).abs() <= options.tolerance;

    let fisher = classical_fisher_information(Deflection(x), geometry, noise, &options.quadrature)?.value;
    let n_eff = clicked.len() as f64 / (1.0 - noise.gamma() * noise.gamma());
    let std = if fisher > 0.0 { 1.0 / (n_eff * fisher).sqrt() } else { f64::INFINITY };
    Ok(DeflectionEstimate { value: x, std, log_likelihood_at_max: value, bracket: options.bracket, at_boundary })
}
