//! Quantum and classical Fisher information for the deflection, the
//! corresponding Cramér–Rao bounds, working-point search and Fisher
//! surfaces over the source/detector geometry.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{conditional_at_phase, envelope_unchecked, BeamGeometry, Deflection, NoiseModel};
use crate::optimize::grid_then_golden;
use crate::quadrature::QuadratureSpec;

/// Probability floor used in `(∂P)²/P` away from the exactly cancelled ideal case.
const DENOMINATOR_FLOOR: f64 = 1e-300;

/// Maximum Fisher information over all measurements, `2 σ_k² d²` (rad⁻²).
///
/// Independent of the deflection and of loss or visibility.
pub fn quantum_fisher_information(geometry: &BeamGeometry) -> f64 {
    let s = geometry.sigma_k() * geometry.distance();
    2.0 * s * s
}

/// Quantum Fisher information from the moments of a transverse spectral
/// density: `(⟨Ω²⟩ - ⟨Ω⟩²) d²`.
///
/// The density must integrate to one (within `quad.rel_tol`) over the
/// quadrature window centered at zero; its variance plays the role of
/// `2 σ_k²`.
pub fn qfi_moment_oracle<F>(spectral_density: F, geometry: &BeamGeometry, quad: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let std = geometry.delta_k_std();
    let mass = quad.integrate(std, |w| [spectral_density(w)])?.total();
    let deviation = mass - 1.0;
    if !(deviation.abs() <= quad.rel_tol) {
        return Err(Error::NotNormalized { deviation });
    }
    let first = quad.integrate(std, |w| [w * spectral_density(w)])?.total() / mass;
    let second = quad.integrate(std, |w| [w * w * spectral_density(w)])?.total() / mass;
    let d = geometry.distance();
    Ok((second - first * first).max(0.0) * d * d)
}

/// Classical Fisher information of the three-outcome measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherResult {
    /// Fisher information (rad⁻²).
    pub value: f64,
    /// Contributions of the zero-, one- and two-detector outcomes. The
    /// zero-detector probability does not depend on the deflection, so
    /// its entry is always zero.
    pub per_outcome: [f64; 3],
    pub quadrature_error: f64,
}

/// Integrand `Σ_i (∂_Δθ P_i)² / P_i` at one `Δk`, split into the one- and
/// two-detector terms.
fn fisher_integrand(delta_k: f64, deflection: f64, geometry: &BeamGeometry, noise: &NoiseModel) -> [f64; 2] {
    let c = envelope_unchecked(delta_k, geometry.sigma_k());
    let kd = delta_k * geometry.distance();
    let half = 0.5 * kd * deflection;
    let (sh, ch) = half.sin_cos();
    if noise.is_ideal() {
        // (½ sin x)² / (½(1 ± cos x)) collapses to sin² or cos² of x/2; the two terms sum to C (Δk d)².
        let base = c * kd * kd;
        let (bunch_term, anti_term) = if noise.signed_visibility() > 0.0 {
            (base * sh * sh, base * ch * ch)
        } else {
            (base * ch * ch, base * sh * sh)
        };
        return [bunch_term, anti_term];
    }
    let q = conditional_at_phase(2.0 * half, noise);
    let t = 1.0 - noise.gamma();
    // ∂p2/∂Δθ = -∂p1/∂Δθ = (1-γ)² ν ½ sin(x) Δk d
    let slope = t * t * noise.signed_visibility() * sh * ch * kd;
    let s2 = slope * slope;
    [c * s2 / q.p1.max(DENOMINATOR_FLOOR), c * s2 / q.p2.max(DENOMINATOR_FLOOR)]
}

/// Fisher information `∫ dΔk Σ_i (∂_Δθ P_i)² / P_i` of the outcome
/// densities at the given deflection.
pub fn classical_fisher_information(
    deflection: Deflection,
    geometry: &BeamGeometry,
    noise: &NoiseModel,
    quad: &QuadratureSpec,
) -> Result<FisherResult> {
    let dth = deflection.radians();
    let r = quad.integrate(geometry.delta_k_std(), |dk| fisher_integrand(dk, dth, geometry, noise))?;
    Ok(FisherResult {
        value: r.total(),
        per_outcome: [0.0, r.values[0], r.values[1]],
        quadrature_error: r.error,
    })
}

/// Fisher information at each deflection (radians), in input order.
pub fn fisher_scan(
    deflections: &[f64],
    geometry: &BeamGeometry,
    noise: &NoiseModel,
    quad: &QuadratureSpec,
) -> Result<Vec<FisherResult>> {
    deflections
        .par_iter()
        .map(|&t| classical_fisher_information(Deflection::new(t)?, geometry, noise, quad))
        .collect()
}

/// Which form of the Cramér–Rao standard-deviation bound to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundConvention {
    /// `Var ≥ 1/(N F)`, i.e. `δθ ≥ 1/√(N F)`.
    Variance,
    /// `δθ ≥ 1/(2√(N F))`, the half-width form used for pure-state bounds.
    HalfWidth,
}

/// Lower bound on the standard deviation of an unbiased estimator after
/// `n` independent detections with per-detection Fisher information
/// `fisher`.
pub fn cramer_rao_std(fisher: f64, n: u64, convention: BoundConvention) -> Result<f64> {
    if !(fisher > 0.0 && fisher.is_finite()) {
        return Err(Error::NonIdentifiable(format!("Fisher information {fisher} gives no bound")));
    }
    if n == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let root = (n as f64 * fisher).sqrt();
    Ok(match convention {
        BoundConvention::Variance => 1.0 / root,
        BoundConvention::HalfWidth => 0.5 / root,
    })
}

/// Both standard-deviation bounds for one `(F, N)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CramerRaoBounds {
    pub variance_form: f64,
    pub half_width_form: f64,
}

pub fn cramer_rao_bounds(fisher: f64, n: u64) -> Result<CramerRaoBounds> {
    Ok(CramerRaoBounds {
        variance_form: cramer_rao_std(fisher, n, BoundConvention::Variance)?,
        half_width_form: cramer_rao_std(fisher, n, BoundConvention::HalfWidth)?,
    })
}

/// Deflection maximizing the classical Fisher information.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingPoint {
    pub delta_theta: f64,
    pub fisher: f64,
    /// F varies by less than [`FLAT_TOLERANCE`] over the range; `delta_theta`
    /// is then the range midpoint.
    pub flat: bool,
    pub at_boundary: bool,
    /// `(Δθ, F)` values of the scan stage.
    pub scan: Vec<(f64, f64)>,
}

/// Relative spread of F below which the working-point scan reports a flat curve.
pub const FLAT_TOLERANCE: f64 = 1e-6;
/// Absolute tolerance (rad) of the golden-section refinement.
pub const WORKING_POINT_TOL: f64 = 1e-7;

/// Grid scan of the classical Fisher information over `search_range`
/// (radians) followed by golden-section refinement. Ties go to the
/// smaller deflection.
pub fn optimal_working_point(
    geometry: &BeamGeometry,
    noise: &NoiseModel,
    search_range: (f64, f64),
    grid_points: usize,
    quad: &QuadratureSpec,
) -> Result<WorkingPoint> {
    let (lo, hi) = search_range;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::domain(format!("search range [{lo}, {hi}] must have positive length")));
    }
    if grid_points < 16 {
        return Err(Error::domain(format!("need at least 16 grid points, got {grid_points}")));
    }
    quad.validate()?;
    let eval = |t: f64| classical_fisher_information(Deflection::new(t)?, geometry, noise, quad).map(|r| r.value);
    let m = grid_then_golden(|t| eval(t).unwrap_or(f64::NAN), lo, hi, grid_points, WORKING_POINT_TOL);
    if let Some(&(t, _)) = m.grid.iter().find(|(_, v)| !v.is_finite()) {
        eval(t)?;
    }
    let qfi = quantum_fisher_information(geometry);
    let (min, max) = m.grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, v)| (a.min(v), b.max(v)));
    if max < 1e-12 * qfi {
        return Err(Error::NonIdentifiable(format!(
            "Fisher information vanishes over the search range (max {max:.3e} rad^-2)"
        )));
    }
    if (max - min) <= FLAT_TOLERANCE * max {
        let mid = 0.5 * (lo + hi);
        return Ok(WorkingPoint { delta_theta: mid, fisher: eval(mid)?, flat: true, at_boundary: false, scan: m.grid });
    }
    Ok(WorkingPoint { delta_theta: m.x, fisher: m.value, flat: false, at_boundary: m.at_boundary, scan: m.grid })
}

/// Classical Fisher information on a `(σ_k, d)` product grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherSurface {
    pub sigma_k: Vec<f64>,
    pub distance: Vec<f64>,
    /// Row-major: `values[i * distance.len() + j]` is at `(sigma_k[i], distance[j])`.
    pub values: Vec<f64>,
}

impl FisherSurface {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.distance.len() + j]
    }

    /// `(σ_k, d, F)` triples in row-major order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.sigma_k
            .iter()
            .flat_map(move |&s| self.distance.iter().map(move |&d| (s, d)))
            .zip(&self.values)
            .map(|((s, d), &v)| (s, d, v))
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::domain(format!("{name} grid must be positive")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

pub fn fisher_surface(
    sigma_k_grid: &[f64],
    d_grid: &[f64],
    deflection: Deflection,
    noise: &NoiseModel,
    quad: &QuadratureSpec,
) -> Result<FisherSurface> {
    check_grid("sigma_k", sigma_k_grid)?;
    check_grid("distance", d_grid)?;
    let nodes: Vec<(f64, f64)> =
        sigma_k_grid.iter().flat_map(|&s| d_grid.iter().map(move |&d| (s, d))).collect();
    let values = nodes
        .par_iter()
        .map(|&(s, d)| {
            let g = BeamGeometry::new(s, d)?;
            classical_fisher_information(deflection, &g, noise, quad).map(|r| r.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(FisherSurface { sigma_k: sigma_k_grid.to_vec(), distance: d_grid.to_vec(), values })
}
