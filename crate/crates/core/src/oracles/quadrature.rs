use crate::error::{Error, Result};
use crate::metric::MetricField;
use std::cell::Cell;

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

const MAX_DEPTH: u32 = 48;

fn gl5<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS)
        .map(|(t, w)| w * f(mid + half * t))
        .sum::<f64>()
        * half
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let (left, right) = (gl5(f, a, mid), gl5(f, mid, b));
    let split = left + right;
    if depth >= MAX_DEPTH || (split - whole).abs() <= tol {
        return split;
    }
    refine(f, a, mid, left, 0.5 * tol, depth + 1) + refine(f, mid, b, right, 0.5 * tol, depth + 1)
}

/// Adaptive 5-point Gauss–Legendre quadrature of `f` over `[a, b]` to an
/// absolute tolerance.
pub fn adaptive_gauss<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = gl5(&f, a, b);
    refine(&f, a, b, whole, tol, 0)
}

/// `d(x, y) = |∫_y^x a₁₁(s)^{-1/2} ds|` for a one-dimensional metric.
pub fn exact_1d_distance(metric: &MetricField, x: f64, y: f64) -> Result<f64> {
    if metric.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: metric.dim(),
        });
    }
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    let a = metric.entry(0, 0);
    for s in [lo, hi] {
        let v = a.eval(&[s]);
        if !(v > 0.0) {
            return Err(Error::NonPositiveCoefficient { x: s });
        }
    }
    let bad = Cell::new(None);
    let d = adaptive_gauss(
        |s| {
            let v = a.eval(&[s]);
            if !(v > 0.0) {
                bad.set(Some(s));
                return 0.0;
            }
            1.0 / v.sqrt()
        },
        lo,
        hi,
        1e-12,
    );
    match bad.get() {
        Some(s) => Err(Error::NonPositiveCoefficient { x: s }),
        None => Ok(d),
    }
}
