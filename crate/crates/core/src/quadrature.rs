//! Quadrature for Gaussian-weighted integrals over the momentum difference.
//!
//! Every `∫ dΔk` in this crate has an integrand carrying the envelope
//! `C(Δk)`, so the infinite range is truncated at a fixed number of
//! envelope standard deviations. Two rules are provided: a globally
//! error-controlled adaptive Simpson rule, and Gauss–Hermite, which is
//! exact for the polynomial-times-Gaussian integrands of the lossless,
//! perfect-visibility case.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Panels the interval is split into before adaptive refinement starts;
/// keeps the first Simpson estimate from sampling an oscillatory integrand
/// only at its nodes.
const INITIAL_PANELS: usize = 64;
const MAX_DEPTH: u32 = 60;
const MAX_HERMITE_NODES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    AdaptiveSimpson,
    GaussHermite { nodes: usize },
}

/// Integration range, rule and tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rule: QuadratureRule,
    /// Half-width of the truncated range in envelope standard deviations
    /// (`√2 σ_k` for the momentum difference).
    pub half_range: f64,
    pub rel_tol: f64,
    /// Cap on the number of panels the adaptive rule may split.
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::AdaptiveSimpson,
            half_range: 8.0,
            rel_tol: 1e-9,
            max_subdivisions: 1 << 20,
        }
    }
}

impl QuadratureSpec {
    pub fn gauss_hermite(nodes: usize) -> Self {
        Self { rule: QuadratureRule::GaussHermite { nodes }, ..Self::default() }
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_range >= 6.0) {
            return Err(Error::domain(format!("quadrature half_range must be >= 6, got {}", self.half_range)));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::domain(format!("quadrature rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_subdivisions < INITIAL_PANELS {
            return Err(Error::domain(format!(
                "quadrature max_subdivisions must be at least {INITIAL_PANELS}"
            )));
        }
        if let QuadratureRule::GaussHermite { nodes } = self.rule {
            if !(2..=MAX_HERMITE_NODES).contains(&nodes) {
                return Err(Error::domain(format!(
                    "Gauss-Hermite node count must lie in [2, {MAX_HERMITE_NODES}], got {nodes}"
                )));
            }
        }
        Ok(())
    }

    /// Integrates `f` over the real line, where `f` decays like a centered
    /// Gaussian of standard deviation `std`.
    pub fn integrate<const N: usize, F>(&self, std: f64, f: F) -> Result<Integral<N>>
    where
        F: Fn(f64) -> [f64; N],
    {
        self.validate()?;
        match self.rule {
            QuadratureRule::AdaptiveSimpson => {
                let h = self.half_range * std;
                adaptive_simpson(f, -h, h, self.rel_tol, self.max_subdivisions)
            }
            QuadratureRule::GaussHermite { nodes } => gauss_hermite(f, std, nodes, self.rel_tol),
        }
    }
}

/// Integral value(s) with an estimate of the absolute error of their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<const N: usize> {
    pub values: [f64; N],
    pub error: f64,
}

impl<const N: usize> Integral<N> {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[inline]
fn axpy<const N: usize>(a: f64, x: &[f64; N], y: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| a * x[i] + y[i])
}

#[inline]
fn simpson<const N: usize>(w: f64, fa: &[f64; N], fm: &[f64; N], fb: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| w / 6.0 * (fa[i] + 4.0 * fm[i] + fb[i]))
}

fn l1<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    fa: [f64; N],
    fm: [f64; N],
    fb: [f64; N],
    whole: [f64; N],
    depth: u32,
}

/// Adaptive Simpson on `[a, b]` with a global relative tolerance on the
/// sum of the integrand's components.
///
/// Each panel is accepted once its Richardson error estimate falls below
/// its width-proportional share of `rel_tol · ∫|f|`; accepted panels carry
/// the extrapolated value. Exceeding `max_subdivisions` with unmet
/// tolerance is an error.
pub fn adaptive_simpson<const N: usize, F>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<Integral<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if !(b > a) {
        return Err(Error::domain(format!("integration interval [{a}, {b}] is empty")));
    }
    let width = b - a;
    let mut stack: Vec<Panel<N>> = Vec::with_capacity(INITIAL_PANELS * 2);
    let mut magnitude = 0.0;
    let mut fa = f(a);
    for i in 0..INITIAL_PANELS {
        let pa = a + width * i as f64 / INITIAL_PANELS as f64;
        let pb = if i + 1 == INITIAL_PANELS { b } else { a + width * (i + 1) as f64 / INITIAL_PANELS as f64 };
        let fm = f(0.5 * (pa + pb));
        let fb = f(pb);
        let whole = simpson(pb - pa, &fa, &fm, &fb);
        magnitude += (pb - pa) / 6.0 * (l1(&fa) + 4.0 * l1(&fm) + l1(&fb));
        stack.push(Panel { a: pa, b: pb, fa, fm, fb, whole, depth: 0 });
        fa = fb;
    }
    stack.reverse();

    // Tolerance is relative to a coarse estimate of ∫|f|, so oscillating or
    // cancelling integrands are not held to an unreachable target.
    let scale = magnitude;
    let eps = rel_tol * scale;

    let mut total = [0.0; N];
    let mut error = 0.0;
    let mut processed = INITIAL_PANELS;
    let mut exhausted = false;
    let mut forced = false;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let fl = f(0.5 * (p.a + m));
        let fr = f(0.5 * (m + p.b));
        let left = simpson(m - p.a, &p.fa, &fl, &p.fm);
        let right = simpson(p.b - m, &p.fm, &fr, &p.fb);
        let halves = axpy(1.0, &left, &right);
        let diff = axpy(-1.0, &p.whole, &halves);
        let err = l1(&diff) / 15.0;
        let share = eps * (p.b - p.a) / width;
        if err <= share || p.depth >= MAX_DEPTH || exhausted {
            forced |= err > share;
            total = std::array::from_fn(|i| total[i] + halves[i] + diff[i] / 15.0);
            error += err;
            continue;
        }
        processed += 1;
        if processed >= max_subdivisions {
            exhausted = true;
        }
        stack.push(Panel { a: m, b: p.b, fa: p.fm, fm: fr, fb: p.fb, whole: right, depth: p.depth + 1 });
        stack.push(Panel { a: p.a, b: m, fa: p.fa, fm: fl, fb: p.fm, whole: left, depth: p.depth + 1 });
    }
    if forced && error > eps {
        return Err(Error::Quadrature { achieved: error / scale.max(f64::MIN_POSITIVE), requested: rel_tol });
    }
    Ok(Integral { values: total, error })
}

/// Gauss–Hermite nodes `t_i` and weights `w_i` for `∫ e^{-t²} g(t) dt`,
/// from the eigen-decomposition of the Jacobi matrix.
pub fn hermite_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn hermite_sum<const N: usize, F>(f: &F, std: f64, n: usize) -> [f64; N]
where
    F: Fn(f64) -> [f64; N],
{
    let (nodes, weights) = hermite_rule(n);
    let scale = std::f64::consts::SQRT_2 * std;
    let mut acc = [0.0; N];
    for (t, w) in nodes.iter().zip(&weights) {
        let v = f(scale * t);
        let factor = w * (t * t).exp() * scale;
        acc = axpy(factor, &v, &acc);
    }
    acc
}

/// Gauss–Hermite with `n` nodes; the error estimate is the change in the
/// summed integral from the rule with `n / 2` nodes.
fn gauss_hermite<const N: usize, F>(f: F, std: f64, n: usize, rel_tol: f64) -> Result<Integral<N>>
where
    F: Fn(f64) -> [f64; N],
{
    let fine = hermite_sum(&f, std, n);
    let coarse = hermite_sum(&f, std, (n / 2).max(1));
    // Only the sum is checked: in the ideal case the total is polynomial times
    // Gaussian while its per-outcome parts are not.
    let error = (fine.iter().sum::<f64>() - coarse.iter().sum::<f64>()).abs();
    let scale = l1(&fine);
    if error > rel_tol * scale && error > f64::MIN_POSITIVE {
        return Err(Error::Quadrature { achieved: error / scale.max(f64::MIN_POSITIVE), requested: rel_tol });
    }
    Ok(Integral { values: fine, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::envelope_unchecked;

    /// Composite midpoint rule, independent of both production rules.
    fn midpoint(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        (0..n).map(|i| f(a + h * (i as f64 + 0.5))).sum::<f64>() * h
    }

    #[test]
    fn envelope_has_unit_mass() {
        let sk = 0.029e6;
        let q = QuadratureSpec::default();
        let r = q.integrate(std::f64::consts::SQRT_2 * sk, |x| [envelope_unchecked(x, sk)]).unwrap();
        assert!((r.total() - 1.0).abs() < 1e-9, "{}", r.total());
        let h = 8.0 * std::f64::consts::SQRT_2 * sk;
        let m = midpoint(|x| envelope_unchecked(x, sk), -h, h, 200_000);
        assert!((m - 1.0).abs() < 1e-9, "{m}");
    }

    #[test]
    fn hermite_rule_moments() {
        let (t, w) = hermite_rule(20);
        let pi = std::f64::consts::PI;
        let m0: f64 = w.iter().sum();
        let m2: f64 = t.iter().zip(&w).map(|(t, w)| w * t * t).sum();
        let m4: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(4)).sum();
        assert!((m0 - pi.sqrt()).abs() < 1e-13);
        assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-13);
        assert!((m4 - 3.0 * pi.sqrt() / 4.0).abs() < 1e-12);
        assert!(t.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn gauss_hermite_second_moment_exact() {
        let sk = 0.029e6;
        let std = std::f64::consts::SQRT_2 * sk;
        let r = QuadratureSpec::gauss_hermite(16).integrate(std, |x| [x * x * envelope_unchecked(x, sk)]).unwrap();
        assert!((r.total() / (2.0 * sk * sk) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integrand_matches_closed_form() {
        // ∫ C(x) cos(a x) dx = exp(-σ² a²) for C with variance 2σ²
        let sk = 0.029e6;
        let a = 1.06e-3 * 0.335;
        let q = QuadratureSpec::default();
        let r = q
            .integrate(std::f64::consts::SQRT_2 * sk, |x| [envelope_unchecked(x, sk) * (a * x).cos()])
            .unwrap();
        let exact = (-(sk * a).powi(2)).exp();
        assert!((r.total() - exact).abs() < 1e-9, "{} vs {exact}", r.total());
    }

    #[test]
    fn vector_components_integrate_independently() {
        let r = adaptive_simpson(|x: f64| [x.sin().powi(2), x.cos().powi(2)], 0.0, 10.0, 1e-10, 1 << 16).unwrap();
        assert!((r.values[0] - (5.0 - 20f64.sin() / 4.0)).abs() < 1e-8);
        assert!((r.values[1] - (5.0 + 20f64.sin() / 4.0)).abs() < 1e-8);
        assert!((r.total() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn zero_integrand_is_fine() {
        let r = adaptive_simpson(|_| [0.0, 0.0], -1.0, 1.0, 1e-9, 1 << 10).unwrap();
        assert_eq!(r.total(), 0.0);
    }

    #[test]
    fn subdivision_budget_is_enforced() {
        let err = adaptive_simpson(|x: f64| [(1e4 * x * x).sin() * x.abs().sqrt()], -10.0, 10.0, 1e-14, 100).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }), "{err:?}");
    }

    #[test]
    fn hermite_rejects_rough_integrands() {
        let err = QuadratureSpec::gauss_hermite(8)
            .integrate(1.0, |x: f64| [(-x * x / 4.0).exp() * (7.0 * x).cos().abs()])
            .unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec { half_range: 5.0, ..Default::default() }.validate().is_err());
        assert!(QuadratureSpec { rel_tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(QuadratureSpec::gauss_hermite(1).validate().is_err());
        assert!(QuadratureSpec::default().validate().is_ok());
    }
}
