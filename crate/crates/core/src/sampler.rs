//! Seeded Monte Carlo generation of detection events and slit-scan
//! interference patterns.
//!
//! Randomness is organized in independent ChaCha20 streams. A [`RngSeed`]
//! keys the generator with `(master_seed, stream_index)`; within a key,
//! each chunk of [`CHUNK_EVENTS`] events (or each pattern bin) draws from
//! its own stream, so results never depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    conditional_outcome_probabilities, outcome_densities, BeamGeometry, Deflection, ExchangeSymmetry, NoiseModel,
};
use crate::quadrature::{adaptive_simpson, QuadratureSpec};

/// Events generated per independent random stream.
pub const CHUNK_EVENTS: usize = 1 << 16;

/// Number of detectors that fired for one photon pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    ZeroDetectors,
    OneDetector,
    TwoDetectors,
}

impl Outcome {
    pub fn detectors(self) -> u8 {
        match self {
            Outcome::ZeroDetectors => 0,
            Outcome::OneDetector => 1,
            Outcome::TwoDetectors => 2,
        }
    }

    pub fn from_detectors(n: u8) -> Option<Self> {
        match n {
            0 => Some(Outcome::ZeroDetectors),
            1 => Some(Outcome::OneDetector),
            2 => Some(Outcome::TwoDetectors),
            _ => None,
        }
    }
}

/// One detection: the momentum difference (m⁻¹) and the outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub delta_k: f64,
    pub outcome: Outcome,
}

/// Key of a reproducible family of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngSeed {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self { master_seed, stream_index }
    }

    /// Generator for sub-stream `chunk` of this key.
    pub fn chunk_rng(&self, chunk: u64) -> ChaCha20Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream_index.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(chunk);
        rng
    }

    pub fn rng(&self) -> ChaCha20Rng {
        self.chunk_rng(0)
    }
}

/// Draws one event: `Δk` from the envelope (zero mean, standard deviation
/// `√2 σ_k`), then the outcome by inverse transform over the conditional
/// probabilities in the order zero, one, two.
pub fn sample_event<R: Rng + ?Sized>(
    deflection: Deflection,
    geometry: &BeamGeometry,
    noise: &NoiseModel,
    rng: &mut R,
) -> EventRecord {
    let z: f64 = rng.sample(StandardNormal);
    let delta_k = z * geometry.delta_k_std();
    let q = conditional_outcome_probabilities(delta_k, deflection, geometry, noise);
    let u: f64 = rng.gen();
    let outcome = if u < q.p0 {
        Outcome::ZeroDetectors
    } else if u < q.p0 + q.p1 {
        Outcome::OneDetector
    } else {
        Outcome::TwoDetectors
    };
    EventRecord { delta_k, outcome }
}

/// `n_events` independent events; chunk `i` uses stream `i` of `seed`.
pub fn simulate_run(
    n_events: usize,
    deflection: Deflection,
    geometry: &BeamGeometry,
    noise: &NoiseModel,
    seed: RngSeed,
) -> Result<Vec<EventRecord>> {
    if n_events == 0 {
        return Err(Error::domain("a run needs at least one event"));
    }
    let n_chunks = n_events.div_ceil(CHUNK_EVENTS);
    let chunks: Vec<Vec<EventRecord>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_EVENTS.min(n_events - c * CHUNK_EVENTS);
            let mut rng = seed.chunk_rng(c as u64);
            (0..len).map(|_| sample_event(deflection, geometry, noise, &mut rng)).collect()
        })
        .collect();
    Ok(chunks.concat())
}

/// Evenly spaced bins over `[lo, hi]` in Δk (m⁻¹).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub n_bins: usize,
}

impl BinSpec {
    pub fn new(lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) || n_bins == 0 {
            return Err(Error::domain(format!("invalid bins [{lo}, {hi}] x {n_bins}")));
        }
        Ok(Self { lo, hi, n_bins })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.n_bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.n_bins).map(|i| self.lo + w * (i as f64 + 0.5)).collect()
    }
}

/// Counting statistics of a scan point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Acquisition {
    /// Fixed number of pairs per point; counts are binomial.
    #[default]
    Binomial,
    /// Fixed dwell time; counts are Poisson with mean `exposure · p`.
    Poisson,
}

/// A slit scan over Δk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    pub bins: BinSpec,
    /// Photon pairs sent per scan point.
    pub exposure_per_bin: u64,
    /// Physical slit width (m); maps to a momentum window `k0 w / d`.
    pub slit_width: Option<f64>,
    pub acquisition: Acquisition,
}

/// Coincidence counts against Δk with the noiseless model alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferencePattern {
    /// Δk at each scan point (m⁻¹), strictly increasing.
    pub bin_centers: Vec<f64>,
    pub counts: Vec<u64>,
    pub exposure: Vec<u64>,
    /// Momentum window accepted at each point (m⁻¹); a coincidence is
    /// recorded with probability `model density × acceptance_width`.
    pub acceptance_width: f64,
    /// Source-to-detector distance (m) the fringe phase refers to.
    pub distance: f64,
    pub exchange: ExchangeSymmetry,
    /// Two-detector density (m) averaged over the acceptance window.
    pub model_overlay: Option<Vec<f64>>,
}

impl InterferencePattern {
    pub fn new(
        bin_centers: Vec<f64>,
        counts: Vec<u64>,
        exposure: Vec<u64>,
        acceptance_width: f64,
        distance: f64,
    ) -> Result<Self> {
        let p = Self {
            bin_centers,
            counts,
            exposure,
            acceptance_width,
            distance,
            exchange: ExchangeSymmetry::Symmetric,
            model_overlay: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.bin_centers.len();
        if self.counts.len() != n || self.exposure.len() != n {
            return Err(Error::domain("pattern columns have different lengths"));
        }
        if let Some(o) = &self.model_overlay {
            if o.len() != n {
                return Err(Error::domain("model overlay length differs from bin count"));
            }
        }
        if self.bin_centers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("bin centers must be strictly increasing"));
        }
        if let Some(i) = self.counts.iter().zip(&self.exposure).position(|(c, e)| c > e) {
            return Err(Error::domain(format!("bin {i}: counts exceed exposure")));
        }
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(Error::domain("pattern distance must be positive"));
        }
        if !(self.acceptance_width > 0.0 && self.acceptance_width.is_finite()) {
            return Err(Error::domain("acceptance width must be positive"));
        }
        Ok(())
    }

    /// `counts / exposure` per bin (zero where exposure is zero).
    pub fn rates(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.exposure)
            .map(|(&c, &e)| if e == 0 { 0.0 } else { c as f64 / e as f64 })
            .collect()
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Two-detector density averaged over `[center - w/2, center + w/2]`.
fn window_average(center: f64, window: f64, deflection: Deflection, geometry: &BeamGeometry, noise: &NoiseModel) -> Result<f64> {
    let (a, b) = (center - 0.5 * window, center + 0.5 * window);
    let r = adaptive_simpson(|k| [outcome_densities(k, deflection, geometry, noise).p2], a, b, 1e-10, 1 << 16)?;
    Ok(r.total() / window)
}

/// Simulated slit scan: at each bin center the recorded coincidences are
/// binomial (or Poisson) with success probability equal to the
/// two-detector density integrated over the acceptance window (the slit's
/// momentum window when a slit is given, otherwise the bin width).
pub fn scan_pattern(
    scan: &ScanSpec,
    deflection: Deflection,
    geometry: &BeamGeometry,
    noise: &NoiseModel,
    seed: RngSeed,
) -> Result<InterferencePattern> {
    if scan.exposure_per_bin == 0 {
        return Err(Error::domain("exposure per bin must be at least 1"));
    }
    let reach = QuadratureSpec::default().half_range * geometry.delta_k_std();
    if scan.bins.lo < -reach || scan.bins.hi > reach {
        return Err(Error::domain(format!(
            "bins [{:.4e}, {:.4e}] m^-1 extend beyond the quadrature range +/-{reach:.4e} m^-1",
            scan.bins.lo, scan.bins.hi
        )));
    }
    let slit_window = match scan.slit_width {
        Some(w) => {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::domain(format!("slit width must be positive, got {w}")));
            }
            Some(geometry.require_k0()? * w / geometry.distance())
        }
        None => None,
    };
    let centers = scan.bins.centers();
    let acceptance = slit_window.unwrap_or_else(|| scan.bins.width());
    let overlay = centers
        .iter()
        .map(|&c| match slit_window {
            Some(w) => window_average(c, w, deflection, geometry, noise),
            None => Ok(outcome_densities(c, deflection, geometry, noise).p2),
        })
        .collect::<Result<Vec<f64>>>()?;
    let exposure = scan.exposure_per_bin;
    let counts = overlay
        .iter()
        .enumerate()
        .map(|(i, &density)| {
            let p = (density * acceptance).clamp(0.0, 1.0);
            let mut rng = seed.chunk_rng(i as u64);
            match scan.acquisition {
                Acquisition::Binomial => Binomial::new(exposure, p).expect("p lies in [0, 1]").sample(&mut rng),
                Acquisition::Poisson => {
                    let mean = exposure as f64 * p;
                    if mean > 0.0 {
                        (Poisson::new(mean).expect("positive mean").sample(&mut rng) as u64).min(exposure)
                    } else {
                        0
                    }
                }
            }
        })
        .collect();
    Ok(InterferencePattern {
        bin_centers: centers,
        counts,
        exposure: vec![exposure; scan.bins.n_bins],
        acceptance_width: acceptance,
        distance: geometry.distance(),
        exchange: noise.exchange(),
        model_overlay: Some(overlay),
    })
}
