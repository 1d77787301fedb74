use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ExchangeSymmetry;
use crate::sampler::InterferencePattern;

const MAX_ITERATIONS: usize = 500;
const STEP_TOLERANCE: f64 = 1e-10;
const PROFILE_POINTS: usize = 1024;
const PROFILE_SIGMAS: usize = 16;
const STARTS: usize = 8;
const MIN_BINS: usize = 8;

/// Starting point for a single-start fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitGuess {
    pub amplitude: f64,
    pub sigma_k: f64,
    pub visibility: f64,
    pub delta_theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    /// Single start instead of the profile-scan multi-start.
    pub guess: Option<FitGuess>,
    /// Admissible `Δθ` interval (radians). Defaults to
    /// `[0, min(5 mrad, π/(h d))]` with `h` the smallest bin spacing.
    pub bracket: Option<(f64, f64)>,
}

/// Least-squares fringe parameters of
/// `rate(Δk) = A · C(Δk; σ_k) · [1 - ν cos(Δk Δθ d)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternFit {
    /// `|Δθ|` (radians).
    pub delta_theta: f64,
    /// Single-photon momentum spread (m⁻¹).
    pub sigma_k: f64,
    pub visibility: f64,
    pub amplitude: f64,
    pub residual_rms: f64,
    pub converged: bool,
    /// A parameter finished on its box constraint.
    pub clamped: bool,
    /// The data carry no fringe (`ν Δθ` unresolvable); the other
    /// parameters are then placeholders.
    pub non_identifiable: bool,
    pub iterations: usize,
}

impl PatternFit {
    /// Model rate at `delta_k`.
    pub fn rate(&self, delta_k: f64, distance: f64, exchange: ExchangeSymmetry) -> f64 {
        Params([self.amplitude, self.sigma_k, self.visibility, self.delta_theta]).rate(
            delta_k,
            distance,
            exchange.fringe_sign(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Params([f64; 4]);

impl Params {
    fn envelope(delta_k: f64, sigma: f64) -> f64 {
        (-delta_k * delta_k / (4.0 * sigma * sigma)).exp() / (4.0 * PI * sigma * sigma).sqrt()
    }

    fn rate(&self, k: f64, distance: f64, sign: f64) -> f64 {
        let [a, s, v, t] = self.0;
        a * Self::envelope(k, s) * (1.0 - sign * v * (k * t * distance).cos())
    }

    /// Rate and its gradient in `(A, σ, ν, Δθ)`.
    fn rate_and_gradient(&self, k: f64, distance: f64, sign: f64) -> (f64, [f64; 4]) {
        let [a, s, v, t] = self.0;
        let c = Self::envelope(k, s);
        let (sn, cs) = (k * t * distance).sin_cos();
        let g = 1.0 - sign * v * cs;
        let dc_ds = c * (k * k / (2.0 * s * s * s) - 1.0 / s);
        let f = a * c * g;
        (f, [c * g, a * g * dc_ds, -a * c * sign * cs, a * c * sign * v * sn * k * distance])
    }
}

struct Problem<'a> {
    k: &'a [f64],
    y: &'a [f64],
    distance: f64,
    sign: f64,
    lower: [f64; 4],
    upper: [f64; 4],
    floor: [f64; 4],
}

struct Run {
    params: Params,
    cost: f64,
    converged: bool,
    iterations: usize,
}

impl Problem<'_> {
    fn cost(&self, p: &Params) -> f64 {
        self.k
            .iter()
            .zip(self.y)
            .map(|(&k, &y)| {
                let r = p.rate(k, self.distance, self.sign) - y;
                r * r
            })
            .sum::<f64>()
            * 0.5
    }

    fn normal_equations(&self, p: &Params) -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&k, &y) in self.k.iter().zip(self.y) {
            let (f, g) = p.rate_and_gradient(k, self.distance, self.sign);
            let j = Vector4::from(g);
            jtj += j * j.transpose();
            jtr += j * (f - y);
        }
        (jtj, jtr)
    }

    fn project(&self, mut p: [f64; 4]) -> Params {
        for i in 0..4 {
            p[i] = p[i].clamp(self.lower[i], self.upper[i]);
        }
        Params(p)
    }

    /// Levenberg–Marquardt with Marquardt's diagonal scaling; trial points
    /// are projected onto the box.
    fn levenberg_marquardt(&self, start: Params) -> Run {
        let mut p = self.project(start.0);
        let mut cost = self.cost(&p);
        let mut lambda = 1e-3;
        let (mut jtj, mut jtr) = self.normal_equations(&p);
        for it in 1..=MAX_ITERATIONS {
            let diag_max = (0..4).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
            let mut a = jtj;
            for i in 0..4 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * diag_max).max(f64::MIN_POSITIVE);
            }
            let Some(delta) = a.cholesky().map(|ch| ch.solve(&(-jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = self.project([p.0[0] + delta[0], p.0[1] + delta[1], p.0[2] + delta[2], p.0[3] + delta[3]]);
            let rel = (0..4)
                .map(|i| (trial.0[i] - p.0[i]).abs() / p.0[i].abs().max(self.floor[i]))
                .fold(0.0, f64::max);
            let trial_cost = self.cost(&trial);
            if trial_cost < cost {
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                (jtj, jtr) = self.normal_equations(&p);
            } else {
                lambda *= 10.0;
            }
            if rel < STEP_TOLERANCE {
                return Run { params: p, cost, converged: true, iterations: it };
            }
        }
        Run { params: p, cost, converged: false, iterations: MAX_ITERATIONS }
    }
}

/// Best `(A, ν)` for fixed `σ_k, Δθ`: a 2×2 linear least-squares problem in
/// `(A, Aν)`, with `ν` then clamped to `[0, 1]`.
fn linear_profile(y: &[f64], env: &[f64], fringe: &[f64]) -> (f64, f64, f64) {
    let (mut uu, mut uv, mut vv, mut yu, mut yv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&yi, &u), &f) in y.iter().zip(env).zip(fringe) {
        let v = -u * f;
        uu += u * u;
        uv += u * v;
        vv += v * v;
        yu += yi * u;
        yv += yi * v;
    }
    let det = uu * vv - uv * uv;
    let (a, b) = if det > 1e-14 * uu * vv {
        ((yu * vv - yv * uv) / det, (yv * uu - yu * uv) / det)
    } else {
        (yu / uu, 0.0)
    };
    let nu = if a > 0.0 { (b / a).clamp(0.0, 1.0) } else { 0.0 };
    // Re-solve the amplitude with ν fixed.
    let (mut ww, mut yw) = (0.0, 0.0);
    for ((&yi, &u), &f) in y.iter().zip(env).zip(fringe) {
        let w = u * (1.0 - nu * f);
        ww += w * w;
        yw += yi * w;
    }
    let amp = if ww > 0.0 { (yw / ww).max(0.0) } else { 0.0 };
    let sse: f64 = y
        .iter()
        .zip(env)
        .zip(fringe)
        .map(|((&yi, &u), &f)| {
            let r = yi - amp * u * (1.0 - nu * f);
            r * r
        })
        .sum();
    (amp, nu, sse)
}

/// Starting points from a profile scan over `(σ_k, Δθ)`: the best node in
/// each of [`STARTS`] equal sub-intervals of the `Δθ` bracket.
fn profile_starts(pb: &Problem, sigma0: f64, bracket: (f64, f64)) -> Vec<Params> {
    let sigmas: Vec<f64> = (0..PROFILE_SIGMAS)
        .map(|i| sigma0 * 2f64.powf(-1.0 + 2.0 * i as f64 / (PROFILE_SIGMAS - 1) as f64))
        .collect();
    let envs: Vec<Vec<f64>> = sigmas.iter().map(|&s| pb.k.iter().map(|&k| Params::envelope(k, s)).collect()).collect();
    let step = (bracket.1 - bracket.0) / (PROFILE_POINTS - 1) as f64;
    let nodes: Vec<(f64, Params)> = (0..PROFILE_POINTS)
        .into_par_iter()
        .map(|j| {
            let t = bracket.0 + step * j as f64;
            let fringe: Vec<f64> = pb.k.iter().map(|&k| pb.sign * (k * t * pb.distance).cos()).collect();
            sigmas
                .iter()
                .zip(&envs)
                .map(|(&s, env)| {
                    let (a, nu, sse) = linear_profile(pb.y, env, &fringe);
                    (sse, Params([a, s, nu, t]))
                })
                .fold((f64::INFINITY, Params([0.0; 4])), |b, c| if c.0 < b.0 { c } else { b })
        })
        .collect();
    nodes
        .chunks(PROFILE_POINTS.div_ceil(STARTS))
        .map(|c| c.iter().fold(c[0], |b, &n| if n.0 < b.0 { n } else { b }).1)
        .collect()
}

/// Fits `rates` measured at `centers` (m⁻¹).
pub fn fit_rates(
    centers: &[f64],
    rates: &[f64],
    distance: f64,
    exchange: ExchangeSymmetry,
    options: &FitOptions,
) -> Result<PatternFit> {
    if centers.len() != rates.len() {
        return Err(Error::domain("centers and rates differ in length"));
    }
    if centers.len() < MIN_BINS {
        return Err(Error::domain(format!("a fit needs at least {MIN_BINS} bins, got {}", centers.len())));
    }
    if centers.iter().chain(rates).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite bin center or rate"));
    }
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::domain("distance must be positive"));
    }
    let spacing = centers.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min);
    let bracket = match options.bracket {
        Some((lo, hi)) if lo >= 0.0 && hi > lo && hi.is_finite() => (lo, hi),
        Some((lo, hi)) => return Err(Error::domain(format!("invalid deflection bracket [{lo}, {hi}]"))),
        None => (0.0, 5e-3f64.min(PI / (spacing * distance))),
    };

    let mass: f64 = rates.iter().sum();
    let second: f64 = rates.iter().zip(centers).map(|(r, k)| r * k * k).sum();
    let sigma0 = if mass > 0.0 && second > 0.0 {
        (0.5 * second / mass).sqrt()
    } else {
        let n = centers.len() as f64;
        (centers.iter().map(|k| k * k).sum::<f64>() / (2.0 * n)).sqrt()
    };
    if !(mass > 0.0) {
        return Ok(PatternFit {
            delta_theta: 0.0,
            sigma_k: sigma0,
            visibility: 0.0,
            amplitude: 0.0,
            residual_rms: (rates.iter().map(|r| r * r).sum::<f64>() / rates.len() as f64).sqrt(),
            converged: true,
            clamped: false,
            non_identifiable: true,
            iterations: 0,
        });
    }

    let amp_scale = rates.iter().cloned().fold(0.0, f64::max) * sigma0;
    let pb = Problem {
        k: centers,
        y: rates,
        distance,
        sign: exchange.fringe_sign(),
        lower: [0.0, 1e-3 * sigma0, 0.0, bracket.0],
        upper: [f64::INFINITY, 1e3 * sigma0, 1.0, bracket.1],
        floor: [1e-12 * amp_scale.max(f64::MIN_POSITIVE), 1e-6 * sigma0, 1e-6, 1e-6 * bracket.1],
    };
    let starts = match options.guess {
        Some(g) => vec![Params([g.amplitude, g.sigma_k, g.visibility, g.delta_theta])],
        None => profile_starts(&pb, sigma0, bracket),
    };
    let runs: Vec<Run> = starts.par_iter().map(|&s| pb.levenberg_marquardt(s)).collect();
    let best = runs
        .iter()
        .filter(|r| r.converged)
        .fold(None::<&Run>, |b, r| match b {
            Some(b) if b.cost <= r.cost => Some(b),
            _ => Some(r),
        });
    let Some(best) = best else {
        let cost = runs.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min);
        return Err(Error::FitFailed { best_residual: (2.0 * cost / rates.len() as f64).sqrt() });
    };
    let [a, s, v, t] = best.params.0;
    // Δθ = 0 is the physical edge, not a constraint.
    let clamped = (0..4).any(|i| {
        let p = best.params.0[i];
        p == pb.upper[i] || (p == pb.lower[i] && !(i == 3 && bracket.0 == 0.0))
    });
    Ok(PatternFit {
        delta_theta: t,
        sigma_k: s,
        visibility: v,
        amplitude: a,
        residual_rms: (2.0 * best.cost / rates.len() as f64).sqrt(),
        converged: true,
        clamped,
        non_identifiable: v * t * distance * sigma0 < 1e-9 || a == 0.0,
        iterations: best.iterations,
    })
}

/// Fits a pattern's rates `counts / exposure` over the bins that were
/// exposed.
pub fn fit_pattern(pattern: &InterferencePattern, options: &FitOptions) -> Result<PatternFit> {
    pattern.validate()?;
    let (centers, rates): (Vec<f64>, Vec<f64>) = pattern
        .bin_centers
        .iter()
        .zip(&pattern.counts)
        .zip(&pattern.exposure)
        .filter(|(_, &e)| e > 0)
        .map(|((&k, &c), &e)| (k, c as f64 / e as f64))
        .unzip();
    if centers.len() < MIN_BINS {
        return Err(Error::domain(format!("a fit needs at least {MIN_BINS} exposed bins, got {}", centers.len())));
    }
    fit_rates(&centers, &rates, pattern.distance, pattern.exchange, options)
}
