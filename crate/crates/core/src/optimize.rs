//! One-dimensional maximization: a uniform grid scan localizes the global
//! maximum, then golden-section search refines it inside the neighbouring
//! grid cells.

use rayon::prelude::*;

/// 1/φ, the golden-section shrink factor.
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    /// The refined maximizer sits on the scan interval's edge.
    pub at_boundary: bool,
    /// Grid abscissae and values of the scan stage.
    pub grid: Vec<(f64, f64)>,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`.
///
/// `NaN` is treated as `-∞`. On exact ties the left point wins, so flat
/// stretches resolve toward smaller `x`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let g = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = g(c);
    let mut fd = g(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = g(d);
        }
    }
    // The ends are candidates too: a maximum on the boundary is never bracketed.
    let mid = 0.5 * (a + b);
    let mut best = (mid, g(mid));
    for x in [a, b] {
        let v = g(x);
        if v > best.1 || (v == best.1 && x < best.0) {
            best = (x, v);
        }
    }
    best
}

/// Scans `f` on `points` evenly spaced abscissae over `[lo, hi]` (in
/// parallel, results ordered by index), then refines with golden-section
/// search inside the cells adjacent to the best grid point.
pub fn grid_then_golden<F>(f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Maximum
where
    F: Fn(f64) -> f64 + Sync,
{
    assert!(points >= 2 && hi > lo, "grid scan needs at least two points on a non-empty interval");
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..points)
        .into_par_iter()
        .map(|i| {
            let x = if i + 1 == points { hi } else { lo + step * i as f64 };
            let v = f(x);
            (x, if v.is_nan() { f64::NEG_INFINITY } else { v })
        })
        .collect();
    let best = grid
        .iter()
        .enumerate()
        .fold(0, |best, (i, &(_, v))| if v > grid[best].1 { i } else { best });
    let a = grid[best.saturating_sub(1)].0;
    let b = grid[(best + 1).min(points - 1)].0;
    let (mut x, mut value) = golden_section_max(&f, a, b, tol);
    if grid[best].1 >= value {
        x = grid[best].0;
        value = grid[best].1;
    }
    let at_boundary = (x - lo).abs() <= tol || (hi - x).abs() <= tol;
    Maximum { x, value, at_boundary, grid }
}
