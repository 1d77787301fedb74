//! Optional TOML run configuration, merged under command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;
use spatial_hom::units::{mm_to_m, mrad_to_rad, nm_to_m, per_um_to_per_m};
use spatial_hom::{BeamGeometry, ExchangeSymmetry, NoiseModel, QuadratureRule, QuadratureSpec};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub sigma_k_per_um: Option<f64>,
    pub d_mm: Option<f64>,
    pub wavelength_nm: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Exchange {
    Symmetric,
    Antisymmetric,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub gamma: Option<f64>,
    pub nu: Option<f64>,
    pub exchange: Option<Exchange>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub deflection_mrad: Option<f64>,
    pub seed: Option<u64>,
    pub n_events: Option<usize>,
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    AdaptiveSimpson,
    GaussHermite,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub rule: Option<Rule>,
    pub nodes: Option<usize>,
    pub rel_tol: Option<f64>,
    pub half_range: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Model flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Single-photon transverse momentum spread (µm⁻¹) [default: 0.029]
    #[arg(long = "sigma-k", global = true)]
    pub sigma_k: Option<f64>,
    /// Source-to-detector distance (mm) [default: 335]
    #[arg(long = "d", global = true)]
    pub distance: Option<f64>,
    /// Photon wavelength (nm) [default: 810]
    #[arg(long, global = true)]
    pub wavelength: Option<f64>,
    /// Per-photon loss probability [default: 0]
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Fringe visibility [default: 1]
    #[arg(long, global = true)]
    pub nu: Option<f64>,
    /// Antisymmetric pair state (coincidence peak instead of dip)
    #[arg(long, global = true)]
    pub antisymmetric: bool,
    /// Quadrature relative tolerance [default: 1e-9]
    #[arg(long = "rel-tol", global = true)]
    pub rel_tol: Option<f64>,
    /// Use Gauss–Hermite quadrature with this many nodes
    #[arg(long = "gauss-hermite", global = true)]
    pub gauss_hermite: Option<usize>,
}

/// Model and run settings after merging file values and flags.
#[derive(Debug, Clone)]
pub struct Settings {
    pub geometry: BeamGeometry,
    pub noise: NoiseModel,
    pub quadrature: QuadratureSpec,
    pub run: RunSection,
    pub output: Option<PathBuf>,
}

impl Settings {
    /// Deflection in radians: the flag, else the file's `run.deflection_mrad`.
    pub fn deflection(&self, flag_mrad: Option<f64>) -> Result<f64, CliError> {
        flag_mrad
            .or(self.run.deflection_mrad)
            .map(mrad_to_rad)
            .ok_or_else(|| CliError::Config("missing deflection: pass --delta-theta or set run.deflection_mrad".into()))
    }

    pub fn output(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone().or_else(|| self.output.clone())
    }
}

pub fn resolve(args: &ModelArgs) -> Result<Settings, CliError> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let sigma_k = args.sigma_k.or(file.geometry.sigma_k_per_um).unwrap_or(0.029);
    let d = args.distance.or(file.geometry.d_mm).unwrap_or(335.0);
    let wavelength = args.wavelength.or(file.geometry.wavelength_nm).unwrap_or(810.0);
    let geometry = BeamGeometry::new(per_um_to_per_m(sigma_k), mm_to_m(d))?.with_wavelength(nm_to_m(wavelength))?;

    let exchange = if args.antisymmetric {
        Exchange::Antisymmetric
    } else {
        file.noise.exchange.unwrap_or(Exchange::Symmetric)
    };
    let noise = NoiseModel::new(args.gamma.or(file.noise.gamma).unwrap_or(0.0), args.nu.or(file.noise.nu).unwrap_or(1.0))?
        .with_exchange(match exchange {
            Exchange::Symmetric => ExchangeSymmetry::Symmetric,
            Exchange::Antisymmetric => ExchangeSymmetry::Antisymmetric,
        });

    let q = &file.quadrature;
    let mut quadrature = match (args.gauss_hermite, q.rule) {
        (Some(n), _) => QuadratureSpec::gauss_hermite(n),
        (None, Some(Rule::GaussHermite)) => QuadratureSpec::gauss_hermite(q.nodes.unwrap_or(64)),
        (None, Some(Rule::AdaptiveSimpson)) | (None, None) => QuadratureSpec::default(),
    };
    if matches!(quadrature.rule, QuadratureRule::AdaptiveSimpson) && q.nodes.is_some() {
        return Err(CliError::Config("quadrature.nodes only applies to the gauss-hermite rule".into()));
    }
    if let Some(t) = args.rel_tol.or(q.rel_tol) {
        quadrature = quadrature.with_rel_tol(t);
    }
    if let Some(h) = q.half_range {
        quadrature.half_range = h;
    }
    quadrature.validate()?;

    Ok(Settings { geometry, noise, quadrature, run: file.run, output: file.output.path })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[geometry]\nsigma = 1.0\n").is_err());
        assert!(toml::from_str::<FileConfig>("[extra]\n").is_err());
    }

    #[test]
    fn sections_parse() {
        let c: FileConfig = toml::from_str(
            "[geometry]\nsigma_k_per_um = 0.03\nd_mm = 300\n[noise]\ngamma = 0.1\nexchange = \"antisymmetric\"\n\
             [run]\nseed = 4\n[quadrature]\nrule = \"gauss-hermite\"\nnodes = 80\n[output]\npath = \"x.csv\"\n",
        )
        .unwrap();
        assert_eq!(c.geometry.d_mm, Some(300.0));
        assert_eq!(c.noise.exchange, Some(Exchange::Antisymmetric));
        assert_eq!(c.quadrature.rule, Some(Rule::GaussHermite));
        assert_eq!(c.run.seed, Some(4));
    }
}
