mod config;
mod csvio;

use std::fmt;
use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spatial_hom::fisher::quantum_fisher_information;
use spatial_hom::units::{m_to_mm, mm_to_m, mrad_to_rad, per_m_to_per_um, per_um_to_per_m, rad_to_mrad, rad_to_urad, um_to_m};
use spatial_hom::{
    cramer_rao_bounds, fisher_scan, fisher_surface, fit_pattern, mle_deflection, optimal_working_point, scan_pattern,
    simulate_run, variance_study, Acquisition, BinSpec, Deflection, FitOptions, InterferencePattern, MleOptions,
    RngSeed, ScanSpec,
};

use config::{ModelArgs, Settings};
use csvio::Table;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, or input files (exit 2).
    Config(String),
    /// Numerical failure such as non-convergence (exit 3).
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<spatial_hom::Error> for CliError {
    fn from(e: spatial_hom::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

/// Spatial two-photon interference deflection metrology.
///
/// Inputs use laboratory units: µm⁻¹ for momenta, mm for distances,
/// mrad for deflections and nm for wavelengths.
#[derive(Parser)]
#[command(name = "spatial-hom", version)]
struct Cli {
    #[command(flatten)]
    model: ModelArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum Fisher information and both Cramér–Rao bounds for N detections
    Qfi {
        #[arg(long, default_value_t = 10_000)]
        n: u64,
    },
    /// Classical Fisher information against deflection (CSV)
    Fisher {
        /// First deflection (mrad)
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        from: f64,
        /// Last deflection (mrad)
        #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 301)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulated slit-scan coincidence pattern (CSV)
    Pattern {
        /// Deflection (mrad)
        #[arg(long = "delta-theta")]
        delta_theta: Option<f64>,
        /// Lower scan edge (µm⁻¹)
        #[arg(long, default_value_t = -0.12, allow_negative_numbers = true)]
        k_min: f64,
        /// Upper scan edge (µm⁻¹)
        #[arg(long, default_value_t = 0.12, allow_negative_numbers = true)]
        k_max: f64,
        #[arg(long, default_value_t = 241)]
        bins: usize,
        /// Photon pairs per scan point
        #[arg(long, conflicts_with = "total_counts")]
        exposure: Option<u64>,
        /// Choose the exposure so about this many coincidences are expected
        #[arg(long, default_value_t = 5e4)]
        total_counts: f64,
        /// Slit width (µm)
        #[arg(long)]
        slit_width: Option<f64>,
        /// Poisson counts (fixed dwell time) instead of binomial
        #[arg(long)]
        poisson: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulated detection events (CSV)
    Simulate {
        /// Deflection (mrad)
        #[arg(long = "delta-theta")]
        delta_theta: Option<f64>,
        #[arg(long)]
        n_events: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the deflection from an events or pattern CSV
    Estimate {
        input: PathBuf,
        /// Lower edge of the search bracket (mrad)
        #[arg(long)]
        bracket_min: Option<f64>,
        /// Upper edge of the search bracket (mrad)
        #[arg(long)]
        bracket_max: Option<f64>,
    },
    /// Monte Carlo variance of the maximum-likelihood estimate against the bound
    Study {
        /// Deflection (mrad)
        #[arg(long = "delta-theta")]
        delta_theta: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        n_events: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-trial estimates (CSV)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deflection of maximum Fisher information
    WorkingPoint {
        /// Search range start (mrad)
        #[arg(long, default_value_t = 0.1)]
        from: f64,
        /// Search range end (mrad)
        #[arg(long, default_value_t = 2.0)]
        to: f64,
        #[arg(long, default_value_t = 256)]
        points: usize,
    },
    /// Fisher information over a (sigma_k, d) grid (CSV)
    Surface {
        /// Deflection (mrad)
        #[arg(long = "delta-theta")]
        delta_theta: Option<f64>,
        #[arg(long, default_value_t = 0.015)]
        sigma_k_min: f64,
        #[arg(long, default_value_t = 0.045)]
        sigma_k_max: f64,
        #[arg(long, default_value_t = 7)]
        sigma_k_steps: usize,
        /// Shortest distance (mm)
        #[arg(long, default_value_t = 100.0)]
        d_min: f64,
        /// Longest distance (mm)
        #[arg(long, default_value_t = 600.0)]
        d_max: f64,
        #[arg(long, default_value_t = 6)]
        d_steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
    if n < 2 || !(hi > lo) {
        return Err(CliError::Config(format!("need at least two points on a non-empty range, got [{lo}, {hi}] x {n}")));
    }
    Ok((0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect())
}

fn print_record(fields: &[(&str, String)]) {
    for (k, v) in fields {
        println!("{k} = {v}");
    }
}

fn seed_of(flag: Option<u64>, s: &Settings) -> u64 {
    flag.or(s.run.seed).unwrap_or(0)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let s = config::resolve(&cli.model)?;
    let geo = &s.geometry;
    let noise = &s.noise;
    match cli.command {
        Command::Qfi { n } => {
            let h = quantum_fisher_information(geo);
            let b = cramer_rao_bounds(h, n)?;
            print_record(&[
                ("qfi_rad2", h.to_string()),
                ("n", n.to_string()),
                ("crb_variance_form_urad", rad_to_urad(b.variance_form).to_string()),
                ("crb_half_width_form_urad", rad_to_urad(b.half_width_form).to_string()),
            ]);
        }
        Command::Fisher { from, to, points, out } => {
            let grid = linspace(from, to, points)?;
            let rad: Vec<f64> = grid.iter().map(|&t| mrad_to_rad(t)).collect();
            let f = fisher_scan(&rad, geo, noise, &s.quadrature)?;
            let rows = grid.iter().zip(&f).map(|(t, r)| vec![t.to_string(), r.value.to_string()]);
            csvio::write_csv(s.output(&out).as_deref(), &csvio::FISHER_HEADER, rows)?;
        }
        Command::Pattern { delta_theta, k_min, k_max, bins, exposure, total_counts, slit_width, poisson, seed, out } => {
            let theta = Deflection::new(s.deflection(delta_theta)?)?;
            let mut spec = ScanSpec {
                bins: BinSpec::new(per_um_to_per_m(k_min), per_um_to_per_m(k_max), bins)?,
                exposure_per_bin: 1,
                slit_width: slit_width.map(um_to_m),
                acquisition: if poisson { Acquisition::Poisson } else { Acquisition::Binomial },
            };
            spec.exposure_per_bin = match exposure {
                Some(e) => e,
                None => {
                    if !(total_counts > 0.0) {
                        return Err(CliError::Config("--total-counts must be positive".into()));
                    }
                    let probe = scan_pattern(&spec, theta, geo, noise, RngSeed::default())?;
                    let per_pair: f64 =
                        probe.model_overlay.iter().flatten().map(|v| v * probe.acceptance_width).sum();
                    if !(per_pair > 0.0) {
                        return Err(CliError::Config(
                            "the model predicts no coincidences in the scan; pass --exposure".into(),
                        ));
                    }
                    (total_counts / per_pair).round().max(1.0) as u64
                }
            };
            let p = scan_pattern(&spec, theta, geo, noise, RngSeed::new(seed_of(seed, &s), 0))?;
            csvio::write_csv(s.output(&out).as_deref(), &csvio::PATTERN_HEADER, csvio::pattern_rows(&p))?;
        }
        Command::Simulate { delta_theta, n_events, seed, stream, out } => {
            let theta = Deflection::new(s.deflection(delta_theta)?)?;
            let n = n_events.or(s.run.n_events).unwrap_or(10_000);
            let events = simulate_run(n, theta, geo, noise, RngSeed::new(seed_of(seed, &s), stream))?;
            csvio::write_csv(s.output(&out).as_deref(), &csvio::EVENTS_HEADER, csvio::event_rows(&events))?;
        }
        Command::Estimate { input, bracket_min, bracket_max } => {
            let file =
                File::open(&input).map_err(|e| CliError::Config(format!("cannot open {}: {e}", input.display())))?;
            match csvio::read_table(file, &input.display().to_string())? {
                Table::Events(events) => {
                    let opts = MleOptions {
                        bracket: (mrad_to_rad(bracket_min.unwrap_or(0.0)), mrad_to_rad(bracket_max.unwrap_or(5.0))),
                        quadrature: s.quadrature,
                        ..MleOptions::default()
                    };
                    let e = mle_deflection(&events, geo, noise, &opts)?;
                    print_record(&[
                        ("kind", "events".into()),
                        ("n_events", events.len().to_string()),
                        ("delta_theta_mrad", rad_to_mrad(e.value).to_string()),
                        ("std_urad", rad_to_urad(e.std).to_string()),
                        ("log_likelihood", e.log_likelihood_at_max.to_string()),
                        ("bracket_mrad", format!("{},{}", rad_to_mrad(e.bracket.0), rad_to_mrad(e.bracket.1))),
                        ("at_boundary", e.at_boundary.to_string()),
                    ]);
                }
                Table::Pattern { centers, counts, exposure, density } => {
                    let spacing = centers.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
                    let width = if spacing.is_finite() && spacing > 0.0 { spacing } else { 1.0 };
                    let mut p = InterferencePattern::new(centers, counts, exposure, width, geo.distance())?;
                    p.exchange = noise.exchange();
                    p.model_overlay = density;
                    p.validate()?;
                    let bracket = match (bracket_min, bracket_max) {
                        (None, None) => None,
                        (lo, hi) => Some((mrad_to_rad(lo.unwrap_or(0.0)), mrad_to_rad(hi.unwrap_or(5.0)))),
                    };
                    let f = fit_pattern(&p, &FitOptions { guess: None, bracket })?;
                    print_record(&[
                        ("kind", "pattern".into()),
                        ("delta_theta_mrad", rad_to_mrad(f.delta_theta).to_string()),
                        ("sigma_k_per_um", per_m_to_per_um(f.sigma_k).to_string()),
                        ("visibility", f.visibility.to_string()),
                        ("amplitude", f.amplitude.to_string()),
                        ("residual_rms", f.residual_rms.to_string()),
                        ("converged", f.converged.to_string()),
                        ("clamped", f.clamped.to_string()),
                        ("non_identifiable", f.non_identifiable.to_string()),
                    ]);
                }
            }
        }
        Command::Study { delta_theta, trials, n_events, seed, out } => {
            let theta = Deflection::new(s.deflection(delta_theta)?)?;
            let m = trials.or(s.run.trials).unwrap_or(500);
            let n = n_events.or(s.run.n_events).unwrap_or(10_000);
            let opts = MleOptions { quadrature: s.quadrature, ..MleOptions::default() };
            let st = variance_study(m, n, theta, geo, noise, RngSeed::new(seed_of(seed, &s), 0), &opts)?;
            if let Some(path) = s.output(&out) {
                let rows = st.estimates.iter().enumerate().map(|(i, e)| vec![i.to_string(), rad_to_mrad(*e).to_string()]);
                csvio::write_csv(Some(&path), &csvio::STUDY_HEADER, rows)?;
            }
            print_record(&[
                ("n_trials", st.n_trials.to_string()),
                ("n_events", st.n_events.to_string()),
                ("empirical_var", st.empirical_variance.to_string()),
                ("crb_var", st.crb_variance.to_string()),
                ("ratio", st.ratio.to_string()),
                ("bias", st.bias.to_string()),
                ("bias_flag", st.bias_flag.to_string()),
            ]);
        }
        Command::WorkingPoint { from, to, points } => {
            let wp = optimal_working_point(geo, noise, (mrad_to_rad(from), mrad_to_rad(to)), points, &s.quadrature)?;
            let h = quantum_fisher_information(geo);
            print_record(&[
                ("delta_theta_mrad", rad_to_mrad(wp.delta_theta).to_string()),
                ("fisher_rad2", wp.fisher.to_string()),
                ("fisher_over_qfi", (wp.fisher / h).to_string()),
                ("at_boundary", wp.at_boundary.to_string()),
                ("flat", wp.flat.to_string()),
            ]);
        }
        Command::Surface {
            delta_theta,
            sigma_k_min,
            sigma_k_max,
            sigma_k_steps,
            d_min,
            d_max,
            d_steps,
            out,
        } => {
            let theta = Deflection::new(s.deflection(delta_theta)?)?;
            let sk: Vec<f64> = linspace(sigma_k_min, sigma_k_max, sigma_k_steps)?.into_iter().map(per_um_to_per_m).collect();
            let dd: Vec<f64> = linspace(d_min, d_max, d_steps)?.into_iter().map(mm_to_m).collect();
            let surf = fisher_surface(&sk, &dd, theta, noise, &s.quadrature)?;
            let rows = surf
                .nodes()
                .map(|(a, b, f)| vec![per_m_to_per_um(a).to_string(), m_to_mm(b).to_string(), f.to_string()]);
            csvio::write_csv(s.output(&out).as_deref(), &csvio::SURFACE_HEADER, rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Numerical(_) => ExitCode::from(3),
            }
        }
    }
}
