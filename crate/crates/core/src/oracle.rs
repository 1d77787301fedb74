//! Mode-level numerical model of the coincidence probability.
//!
//! Instead of the closed form, this module builds the two-photon amplitude
//! step by step: a Gaussian transverse wave packet sampled on a position
//! grid, far-field detection as a discrete Fourier sum, the tilt as a
//! momentum-dependent phase on the first photon, and a balanced beam
//! splitter whose two routing paths to a (port 3, port 4) coincidence
//! interfere. It is kept independent of [`crate::model`] and serves as a
//! cross-check of the closed-form densities.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{envelope_unchecked, BeamGeometry, Deflection, ExchangeSymmetry};

/// Edge-to-peak intensity ratio above which the grid truncates the packet.
const EDGE_THRESHOLD: f64 = 1e-10;

/// Uniform transverse-position grid `x_j = -extent + j·(2 extent / n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeGrid {
    extent: f64,
    n_points: usize,
}

impl ModeGrid {
    pub fn new(extent: f64, n_points: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::domain(format!("grid extent must be positive, got {extent}")));
        }
        if n_points < 64 || n_points % 2 != 0 {
            return Err(Error::domain(format!("grid needs an even number of at least 64 points, got {n_points}")));
        }
        Ok(Self { extent, n_points })
    }

    /// Grid whose half-width is `position_sds` position-space standard
    /// deviations `1/(2σ_k)` of the single-photon intensity.
    pub fn scaled(geometry: &BeamGeometry, position_sds: f64, n_points: usize) -> Result<Self> {
        Self::new(position_sds / (2.0 * geometry.sigma_k()), n_points)
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.n_points as f64
    }
}

/// Two-photon amplitude model sampled on a [`ModeGrid`].
#[derive(Debug, Clone)]
pub struct CoincidenceOracle {
    positions: Vec<f64>,
    packet: Vec<f64>,
    spacing: f64,
    distance: f64,
    exchange: ExchangeSymmetry,
}

impl CoincidenceOracle {
    pub fn new(geometry: &BeamGeometry, grid: &ModeGrid) -> Result<Self> {
        let sigma_x = 1.0 / (2.0 * geometry.sigma_k());
        if grid.extent < 6.0 * sigma_x {
            return Err(Error::domain(format!(
                "grid extent {:.3e} m is below six position standard deviations ({:.3e} m)",
                grid.extent,
                6.0 * sigma_x
            )));
        }
        let edge_ratio = (-grid.extent * grid.extent / (2.0 * sigma_x * sigma_x)).exp();
        if edge_ratio > EDGE_THRESHOLD {
            return Err(Error::Resolution { edge_ratio });
        }
        let dx = grid.spacing();
        let norm = (2.0 * PI * sigma_x * sigma_x).powf(-0.25);
        let positions: Vec<f64> = (0..grid.n_points).map(|j| -grid.extent + j as f64 * dx).collect();
        let packet = positions.iter().map(|x| norm * (-x * x / (4.0 * sigma_x * sigma_x)).exp()).collect();
        Ok(Self {
            positions,
            packet,
            spacing: dx,
            distance: geometry.distance(),
            exchange: ExchangeSymmetry::Symmetric,
        })
    }

    pub fn with_exchange(mut self, exchange: ExchangeSymmetry) -> Self {
        self.exchange = exchange;
        self
    }

    /// Far-field amplitude `φ(k) = (2π)^{-1/2} Σ_j ψ(x_j) e^{-i k x_j} Δx`.
    pub fn far_field(&self, k: f64) -> Complex64 {
        let sum: Complex64 = self
            .positions
            .iter()
            .zip(&self.packet)
            .map(|(&x, &psi)| Complex64::from_polar(psi, -k * x))
            .sum();
        sum * (self.spacing / (2.0 * PI).sqrt())
    }

    /// Probability density of a coincidence with momentum `k1` at the
    /// port-3 detector and `k2` at the port-4 detector.
    pub fn joint_density(&self, deflection: Deflection, k1: f64, k2: f64) -> f64 {
        let shift = deflection.radians() * self.distance;
        let phi1 = self.far_field(k1);
        let phi2 = self.far_field(k2);
        // Photon 1 (deflected) and photon 2 amplitudes at each detector.
        let tilted = |k: f64, phi: Complex64| phi * Complex64::from_polar(1.0, -k * shift);
        let photon1 = [tilted(k1, phi1), tilted(k2, phi2)];
        let photon2 = [phi1, phi2];
        // Beam splitter: input 1 -> (3, 4) with (+1, +1)/√2, input 2 -> (3, 4) with (+1, -1)/√2.
        let bs = [[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]];
        let direct = photon1[0] * photon2[1] * (bs[0][0] * bs[1][1]);
        let exchanged = photon2[0] * photon1[1] * (bs[1][0] * bs[0][1]) * self.exchange.fringe_sign();
        (direct + exchanged).norm_sqr()
    }
}

/// Coincidence density at detector momenta `(k1, k2)` from the mode-level
/// model on `grid`.
pub fn coincidence_oracle(
    deflection: Deflection,
    k1: f64,
    k2: f64,
    geometry: &BeamGeometry,
    grid: &ModeGrid,
) -> Result<f64> {
    Ok(CoincidenceOracle::new(geometry, grid)?.joint_density(deflection, k1, k2))
}

/// Closed-form joint density `½|φ(k1)|²|φ(k2)|²[1 - cos((k1-k2)Δθd)]`.
///
/// The product of single-photon momentum densities factorizes into
/// `2 C(k1 - k2) C(k1 + k2)`, so this equals the difference-variable
/// coincidence density times the total-momentum density `2 C(k1 + k2)`;
/// integrating out `k1 + k2` recovers [`crate::model::coincidence_density`].
pub fn closed_form_joint(deflection: Deflection, k1: f64, k2: f64, geometry: &BeamGeometry) -> f64 {
    let sk = geometry.sigma_k();
    let total = 2.0 * envelope_unchecked(k1 + k2, sk);
    crate::model::coincidence_density(k1 - k2, deflection, geometry) * total
}

/// Largest absolute deviation between oracle and closed form over the
/// `(k1, k2)` product grid, relative to the largest closed-form value.
pub fn oracle_deviation(
    deflection: Deflection,
    momenta: &[f64],
    geometry: &BeamGeometry,
    grid: &ModeGrid,
) -> Result<f64> {
    let oracle = CoincidenceOracle::new(geometry, grid)?;
    let mut max_dev: f64 = 0.0;
    let mut max_val: f64 = 0.0;
    for &k1 in momenta {
        for &k2 in momenta {
            let exact = closed_form_joint(deflection, k1, k2, geometry);
            let approx = oracle.joint_density(deflection, k1, k2);
            max_dev = max_dev.max((approx - exact).abs());
            max_val = max_val.max(exact.abs());
        }
    }
    if max_val == 0.0 {
        return Ok(max_dev);
    }
    Ok(max_dev / max_val)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab() -> BeamGeometry {
        BeamGeometry::laboratory()
    }

    #[test]
    fn grid_invariants() {
        assert!(ModeGrid::new(1e-4, 63).is_err());
        assert!(ModeGrid::new(1e-4, 65).is_err());
        assert!(ModeGrid::new(0.0, 128).is_err());
        let g = ModeGrid::scaled(&lab(), 8.0, 4096).unwrap();
        assert!((g.extent() - 8.0 / (2.0 * 0.029e6)).abs() < 1e-18);
    }

    #[test]
    fn truncating_grid_is_rejected() {
        let g = ModeGrid::scaled(&lab(), 6.5, 256).unwrap();
        assert!(matches!(CoincidenceOracle::new(&lab(), &g), Err(Error::Resolution { .. })));
        let g = ModeGrid::scaled(&lab(), 5.0, 256).unwrap();
        assert!(matches!(CoincidenceOracle::new(&lab(), &g), Err(Error::Domain(_))));
    }

    #[test]
    fn far_field_is_normalized_gaussian() {
        let geo = lab();
        let oracle = CoincidenceOracle::new(&geo, &ModeGrid::scaled(&geo, 8.0, 1024).unwrap()).unwrap();
        let sk = geo.sigma_k();
        for k in [0.0, 1.3e4, -4.0e4] {
            let expect = (-k * k / (2.0 * sk * sk)).exp() / ((2.0 * PI).sqrt() * sk);
            let got = oracle.far_field(k).norm_sqr();
            assert!((got - expect).abs() < 1e-7 * expect.max(1e-6 / sk), "{got} vs {expect}");
        }
    }

    #[test]
    fn dip_survives_discretization() {
        let geo = lab();
        let grid = ModeGrid::scaled(&geo, 8.0, 512).unwrap();
        for k1 in [-3e4, 0.0, 2e4] {
            for k2 in [-1e4, 5e4] {
                let p = coincidence_oracle(Deflection::default(), k1, k2, &geo, &grid).unwrap();
                assert!(p.abs() < 1e-25, "{p}");
            }
            let p = coincidence_oracle(Deflection::from_mrad(0.9).unwrap(), k1, k1, &geo, &grid).unwrap();
            assert!(p.abs() < 1e-25, "{p}");
        }
    }

    #[test]
    fn antisymmetric_pair_peaks() {
        let geo = lab();
        let grid = ModeGrid::scaled(&geo, 8.0, 512).unwrap();
        let oracle = CoincidenceOracle::new(&geo, &grid).unwrap().with_exchange(ExchangeSymmetry::Antisymmetric);
        let (k1, k2) = (1.0e4, -2.0e4);
        let p = oracle.joint_density(Deflection::default(), k1, k2);
        let both = oracle.far_field(k1).norm_sqr() * oracle.far_field(k2).norm_sqr();
        assert!((p - both).abs() < 1e-12 * both);
    }

    #[test]
    fn matches_closed_form_on_fine_grid() {
        let geo = lab();
        let grid = ModeGrid::scaled(&geo, 8.0, 4096).unwrap();
        let ks: Vec<f64> = (0..10).map(|i| -6e4 + 1.2e5 * i as f64 / 9.0).collect();
        let dev = oracle_deviation(Deflection::from_mrad(1.01).unwrap(), &ks, &geo, &grid).unwrap();
        assert!(dev < 1e-6, "{dev}");
    }
}
