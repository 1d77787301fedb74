use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::mle::{mle_deflection, MleOptions};
use crate::fisher::classical_fisher_information;
use crate::model::{BeamGeometry, Deflection, NoiseModel};
use crate::sampler::{simulate_run, RngSeed};

pub const MIN_TRIALS: usize = 30;

/// Monte Carlo spread of the MLE compared with the Cramér–Rao variance.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceStudy {
    pub n_trials: usize,
    pub n_events: usize,
    /// Sample variance of the estimates (denominator `M - 1`).
    pub empirical_variance: f64,
    /// `1 / (N F(|Δθ|))`.
    pub crb_variance: f64,
    pub ratio: f64,
    /// Mean estimate minus `|Δθ|`.
    pub bias: f64,
    /// `|bias|` exceeds the Cramér–Rao standard deviation.
    pub bias_flag: bool,
    /// Per-trial estimates (radians), in trial order.
    pub estimates: Vec<f64>,
}

/// Runs `m_trials` independent simulate-and-estimate trials. Trial `i`
/// draws from `RngSeed { master_seed, stream_index: (seed.stream_index << 32) | i }`.
pub fn variance_study(
    m_trials: usize,
    n_events: usize,
    deflection: Deflection,
    geometry: &BeamGeometry,
    noise: &NoiseModel,
    seed: RngSeed,
    options: &MleOptions,
) -> Result<VarianceStudy> {
    if m_trials < MIN_TRIALS {
        return Err(Error::domain(format!("a variance study needs at least {MIN_TRIALS} trials, got {m_trials}")));
    }
    if n_events == 0 {
        return Err(Error::domain("trials need at least one event"));
    }
    let truth = deflection.radians().abs();
    let fisher = classical_fisher_information(Deflection(truth), geometry, noise, &options.quadrature)?.value;
    if !(fisher > 0.0) {
        return Err(Error::NonIdentifiable("zero Fisher information at the true deflection".into()));
    }
    let estimates = (0..m_trials)
        .into_par_iter()
        .map(|i| {
            let s = RngSeed::new(seed.master_seed, (seed.stream_index << 32) | i as u64);
            let events = simulate_run(n_events, deflection, geometry, noise, s)?;
            Ok(mle_deflection(&events, geometry, noise, options)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let m = m_trials as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let empirical_variance = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let crb_variance = 1.0 / (n_events as f64 * fisher);
    let bias = mean - truth;
    Ok(VarianceStudy {
        n_trials: m_trials,
        n_events,
        empirical_variance,
        crb_variance,
        ratio: empirical_variance / crb_variance,
        bias,
        bias_flag: bias.abs() > crb_variance.sqrt(),
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab() -> BeamGeometry {
        BeamGeometry::laboratory()
    }

    #[test]
    fn lossy_study_respects_bound() {
        let noise = NoiseModel::new(0.2, 0.85).unwrap();
        let m = 60;
        let st = variance_study(m, 5_000, Deflection::from_mrad(1.01).unwrap(), &lab(), &noise, RngSeed::new(4, 0), &MleOptions::default())
            .unwrap();
        assert!(st.ratio >= 1.0 - 3.0 / (2.0 * m as f64).sqrt(), "{}", st.ratio);
        assert_eq!(st.estimates.len(), m);
        assert!((st.ratio - st.empirical_variance / st.crb_variance).abs() < 1e-15 * st.ratio);
    }

    #[test]
    fn tiny_runs_flag_bias() {
        let st = variance_study(30, 10, Deflection::from_mrad(1.01).unwrap(), &lab(), &NoiseModel::ideal(), RngSeed::new(5, 0), &MleOptions::default())
            .unwrap();
        assert!(st.empirical_variance >= 0.0);
        assert_eq!(st.bias_flag, st.bias.abs() > st.crb_variance.sqrt());
    }

    #[test]
    fn study_is_deterministic() {
        let run = || {
            variance_study(30, 500, Deflection::from_mrad(0.8).unwrap(), &lab(), &NoiseModel::ideal(), RngSeed::new(6, 1), &MleOptions::default())
                .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn error_shrinks_with_more_events() {
        let truth = 1.01e-3;
        let opts = MleOptions::default();
        let mse = |n: usize| {
            (0..10u64)
                .map(|i| {
                    let ev = simulate_run(n, Deflection(truth), &lab(), &NoiseModel::ideal(), RngSeed::new(8, i)).unwrap();
                    (mle_deflection(&ev, &lab(), &NoiseModel::ideal(), &opts).unwrap().value - truth).powi(2)
                })
                .sum::<f64>()
                / 10.0
        };
        assert!(mse(100_000) < mse(1_000));
    }

    #[test]
    fn preconditions() {
        let geo = lab();
        let d = Deflection::from_mrad(1.0).unwrap();
        assert!(variance_study(29, 100, d, &geo, &NoiseModel::ideal(), RngSeed::default(), &MleOptions::default()).is_err());
        let flat = NoiseModel::new(0.0, 0.0).unwrap();
        assert!(matches!(
            variance_study(30, 100, d, &geo, &flat, RngSeed::default(), &MleOptions::default()),
            Err(Error::NonIdentifiable(_))
        ));
    }
}
