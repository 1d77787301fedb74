//! Closed-form probability model of the spatial two-photon interferometer.
//!
//! A photon pair with single-photon transverse-momentum spread `sigma_k`
//! meets at a balanced beam splitter after one beam has been tilted by
//! `Δθ`. Detected far from the source at distance `d`, the pair's momentum
//! difference `Δk` is Gaussian with density
//!
//! ```text
//! C(Δk) = exp(-Δk² / 4σ_k²) / sqrt(4π σ_k²)
//! ```
//!
//! and the tilt writes a fringe `cos(Δk Δθ d)` onto the probability of a
//! coincidence (one photon in each output port). Loss `γ` and visibility
//! `ν` turn the two-outcome experiment into a three-outcome one: zero, one
//! or two detectors click.
//!
//! All conditional probabilities are evaluated in half-angle form,
//! `½(1 - cos x) = sin²(x/2)`, so that outcomes with vanishing probability
//! are computed without cancellation.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Wavelength of the degenerate down-converted photons of a 405 nm pump.
pub const DEFAULT_WAVELENGTH: f64 = 810e-9;

/// Source and detection geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    sigma_k: f64,
    distance: f64,
    k0: Option<f64>,
}

impl BeamGeometry {
    /// `sigma_k` in inverse meters, `distance` in meters.
    pub fn new(sigma_k: f64, distance: f64) -> Result<Self> {
        if !(sigma_k.is_finite() && sigma_k > 0.0) {
            return Err(Error::domain(format!("sigma_k must be positive, got {sigma_k}")));
        }
        if !(distance.is_finite() && distance > 0.0) {
            return Err(Error::domain(format!("distance must be positive, got {distance}")));
        }
        Ok(Self { sigma_k, distance, k0: None })
    }

    /// Sets the carrier wave number (inverse meters).
    pub fn with_k0(mut self, k0: f64) -> Result<Self> {
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(Error::domain(format!("k0 must be positive, got {k0}")));
        }
        self.k0 = Some(k0);
        Ok(self)
    }

    /// Sets the carrier wave number from a vacuum wavelength in meters.
    pub fn with_wavelength(self, wavelength: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::domain(format!("wavelength must be positive, got {wavelength}")));
        }
        self.with_k0(2.0 * PI / wavelength)
    }

    /// σ_k = 0.029 µm⁻¹, d = 335 mm, 810 nm photons.
    pub fn laboratory() -> Self {
        Self { sigma_k: 0.029e6, distance: 0.335, k0: Some(2.0 * PI / DEFAULT_WAVELENGTH) }
    }

    pub fn sigma_k(&self) -> f64 {
        self.sigma_k
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn k0(&self) -> Option<f64> {
        self.k0
    }

    /// Standard deviation of the momentum difference, `√2 σ_k`.
    pub fn delta_k_std(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.sigma_k
    }

    pub(crate) fn require_k0(&self) -> Result<f64> {
        self.k0.ok_or(Error::Config {
            field: "k0",
            message: "carrier wave number (or wavelength) is required for position/momentum conversion".into(),
        })
    }
}

/// Port statistics of the injected pair.
///
/// `Symmetric` gives a coincidence dip, `½C[1 - cos]`; `Antisymmetric`
/// (a polarization singlet) flips the fringe to a peak, `½C[1 + cos]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExchangeSymmetry {
    #[default]
    Symmetric,
    Antisymmetric,
}

impl ExchangeSymmetry {
    /// Sign multiplying the visibility in the coincidence fringe `1 - s ν cos`.
    pub fn fringe_sign(self) -> f64 {
        match self {
            ExchangeSymmetry::Symmetric => 1.0,
            ExchangeSymmetry::Antisymmetric => -1.0,
        }
    }
}

/// Photon loss and interference visibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    gamma: f64,
    nu: f64,
    exchange: ExchangeSymmetry,
}

impl NoiseModel {
    pub fn new(gamma: f64, nu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::domain(format!("loss gamma must lie in [0, 1], got {gamma}")));
        }
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::domain(format!("visibility nu must lie in [0, 1], got {nu}")));
        }
        Ok(Self { gamma, nu, exchange: ExchangeSymmetry::Symmetric })
    }

    /// No loss, unit visibility.
    pub fn ideal() -> Self {
        Self { gamma: 0.0, nu: 1.0, exchange: ExchangeSymmetry::Symmetric }
    }

    pub fn with_exchange(mut self, exchange: ExchangeSymmetry) -> Self {
        self.exchange = exchange;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn exchange(&self) -> ExchangeSymmetry {
        self.exchange
    }

    pub fn is_ideal(&self) -> bool {
        self.gamma == 0.0 && self.nu == 1.0
    }

    /// `ν` times the fringe sign of the exchange symmetry.
    pub fn signed_visibility(&self) -> f64 {
        self.exchange.fringe_sign() * self.nu
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Transverse deflection angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Deflection(pub(crate) f64);

impl Deflection {
    pub fn new(radians: f64) -> Result<Self> {
        if !radians.is_finite() {
            return Err(Error::domain(format!("deflection must be finite, got {radians}")));
        }
        Ok(Self(radians))
    }

    pub fn from_mrad(mrad: f64) -> Result<Self> {
        Self::new(mrad * 1e-3)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn mrad(self) -> f64 {
        self.0 * 1e3
    }
}

/// Probabilities (or densities) of zero, one and two detectors firing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeTriple {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

impl OutcomeTriple {
    pub fn sum(&self) -> f64 {
        self.p0 + self.p1 + self.p2
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p0, self.p1, self.p2]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { p0: self.p0 * factor, p1: self.p1 * factor, p2: self.p2 * factor }
    }
}

/// Detector-plane position `y` (m) to transverse momentum `k0 y / d`.
pub fn position_to_momentum(y: f64, geometry: &BeamGeometry) -> Result<f64> {
    let k0 = geometry.require_k0()?;
    Ok(k0 * y / geometry.distance())
}

/// Gaussian density of the momentum difference, variance `2σ_k²`.
pub fn envelope(delta_k: f64, sigma_k: f64) -> Result<f64> {
    if !(sigma_k.is_finite() && sigma_k > 0.0) {
        return Err(Error::domain(format!("sigma_k must be positive, got {sigma_k}")));
    }
    Ok(envelope_unchecked(delta_k, sigma_k))
}

#[inline]
pub(crate) fn envelope_unchecked(delta_k: f64, sigma_k: f64) -> f64 {
    let var4 = 4.0 * sigma_k * sigma_k;
    (-delta_k * delta_k / var4).exp() / (PI * var4).sqrt()
}

/// Fringe phase `Δk Δθ d`.
#[inline]
pub fn fringe_phase(delta_k: f64, deflection: Deflection, geometry: &BeamGeometry) -> f64 {
    delta_k * deflection.radians() * geometry.distance()
}

/// Ideal coincidence density `½ C(Δk) [1 - cos(Δk Δθ d)]`.
pub fn coincidence_density(delta_k: f64, deflection: Deflection, geometry: &BeamGeometry) -> f64 {
    let half = 0.5 * fringe_phase(delta_k, deflection, geometry);
    let s = half.sin();
    envelope_unchecked(delta_k, geometry.sigma_k()) * s * s
}

/// Ideal (lossless) anti-bunching and bunching probabilities at phase `x`
/// for signed visibility `v`: `(½(1 - v cos x), ½(1 + v cos x))`.
#[inline]
pub(crate) fn ideal_pair(phase: f64, signed_nu: f64) -> (f64, f64) {
    let u = signed_nu.abs();
    let h = 0.5 * phase;
    let (sh, ch) = h.sin_cos();
    let (s2, c2) = (sh * sh, ch * ch);
    let base = 0.5 * (1.0 - u);
    if signed_nu >= 0.0 {
        (base + u * s2, base + u * c2)
    } else {
        (base + u * c2, base + u * s2)
    }
}

/// Conditional outcome probabilities at phase `x` (sum to one).
#[inline]
pub(crate) fn conditional_at_phase(phase: f64, noise: &NoiseModel) -> OutcomeTriple {
    let g = noise.gamma();
    let t = 1.0 - g;
    let (anti, bunch) = ideal_pair(phase, noise.signed_visibility());
    // p1 = ½(1-γ)(1+3γ) + ½(1-γ)²ν cos x, regrouped as 2γ(1-γ) + (1-γ)²·½(1+ν cos x).
    OutcomeTriple { p0: g * g, p1: 2.0 * g * t + t * t * bunch, p2: t * t * anti }
}

/// Outcome probabilities conditional on the measured `Δk`.
pub fn conditional_outcome_probabilities(
    delta_k: f64,
    deflection: Deflection,
    geometry: &BeamGeometry,
    noise: &NoiseModel,
) -> OutcomeTriple {
    conditional_at_phase(fringe_phase(delta_k, deflection, geometry), noise)
}

/// Joint densities over `Δk` of the three outcomes; they sum to `C(Δk)`.
pub fn outcome_densities(
    delta_k: f64,
    deflection: Deflection,
    geometry: &BeamGeometry,
    noise: &NoiseModel,
) -> OutcomeTriple {
    let c = envelope_unchecked(delta_k, geometry.sigma_k());
    conditional_outcome_probabilities(delta_k, deflection, geometry, noise).scaled(c)
}

/// Routes ideal coincidence/bunching probabilities through independent
/// single-photon loss with probability `gamma`.
///
/// ```text
/// [p0]   [ γ²                 γ²   ] [p_c]
/// [p1] = [ 2γ(1-γ)            1-γ² ] [p_b]
/// [p2]   [ 1-2γ(1-γ)-γ²       0    ]
/// ```
pub fn loss_map(p_c: f64, p_b: f64, gamma: f64) -> Result<OutcomeTriple> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::domain(format!("loss gamma must lie in [0, 1], got {gamma}")));
    }
    let deviation = p_c + p_b - 1.0;
    if deviation.abs() > 1e-9 || p_c < 0.0 || p_b < 0.0 {
        return Err(Error::NotNormalized { deviation });
    }
    let g2 = gamma * gamma;
    let cross = 2.0 * gamma * (1.0 - gamma);
    Ok(OutcomeTriple {
        p0: g2 * p_c + g2 * p_b,
        p1: cross * p_c + (1.0 - g2) * p_b,
        p2: (1.0 - cross - g2) * p_c,
    })
}
