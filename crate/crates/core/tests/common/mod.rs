//! Test-side oracles shared by the integration suites. They avoid the library
//! code paths they are used to check.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqdist::domain::DomainBox;
use sqdist::eikonal::Approximant;
use sqdist::interpolate::{build_hsp, build_lp, BuildSpec, NodePolicy, NodeSet};
use sqdist::metric::MetricField;
use sqdist::multiindex::MultiIndex;
use sqdist::poly::MPoly;
use std::sync::Arc;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `⟨Δ, A⁻¹Δ⟩` with `A⁻¹` from nalgebra.
pub fn flat_quadratic(a: &[Vec<f64>], x: &[f64], y: &[f64]) -> f64 {
    let n = a.len();
    let inv = DMatrix::from_fn(n, n, |i, j| a[i][j]).try_inverse().unwrap();
    let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += d[i] * inv[(i, j)] * d[j];
        }
    }
    s
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ_{γ≤α} binom(α,γ) ∂^γp ∂^{α−γ}q` at `x`.
pub fn leibniz_sum(p: &MPoly, q: &MPoly, alpha: &MultiIndex, x: &[f64]) -> f64 {
    let n = alpha.dim();
    let mut total = 0.0;
    let mut gamma = vec![0u32; n];
    loop {
        let g = MultiIndex::new(gamma.clone());
        let rest = MultiIndex::new((0..n).map(|i| alpha.get(i) - gamma[i]).collect());
        let w: f64 = (0..n).map(|i| binom(alpha.get(i), gamma[i])).product();
        total += w * p.eval_derivative(&g, x) * q.eval_derivative(&rest, x);
        let mut i = 0;
        loop {
            if i == n {
                return total;
            }
            if gamma[i] < alpha.get(i) {
                gamma[i] += 1;
                break;
            }
            gamma[i] = 0;
            i += 1;
        }
    }
}

/// Random sparse polynomial with up to `terms` monomials of degree ≤ `deg`.
pub fn random_poly(r: &mut ChaCha8Rng, n: usize, deg: u32, terms: usize) -> MPoly {
    let count = r.gen_range(1..=terms);
    let t: Vec<(MultiIndex, f64)> = (0..count)
        .map(|_| {
            let mut e = vec![0u32; n];
            let mut budget = r.gen_range(0..=deg);
            for slot in e.iter_mut() {
                let k = r.gen_range(0..=budget);
                *slot = k;
                budget -= k;
            }
            (MultiIndex::new(e), r.gen_range(-2.0..2.0))
        })
        .collect();
    MPoly::from_terms(n, t)
}

/// Christoffel symbols from central differences (step `h`) of `g = A⁻¹`,
/// indexed `[k][mu][nu]`.
pub fn fd_christoffel(metric: &MetricField, x: &[f64], h: f64) -> Vec<Vec<Vec<f64>>> {
    let n = metric.dim();
    let g_at = |p: &[f64]| metric.a_matrix(p).try_inverse().unwrap();
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|m| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[m] += h;
            xm[m] -= h;
            (g_at(&xp) - g_at(&xm)) / (2.0 * h)
        })
        .collect();
    let a = metric.a_matrix(x);
    (0..n)
        .map(|k| {
            (0..n)
                .map(|mu| {
                    (0..n)
                        .map(|nu| {
                            0.5 * (0..n)
                                .map(|l| {
                                    a[(k, l)] * (dg[mu][(l, nu)] + dg[nu][(l, mu)] - dg[l][(mu, nu)])
                                })
                                .sum::<f64>()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `∂^α r` by central differences of the residual (`|α| ≤ 2`) with one
/// Richardson step, so the oracle error is `O(h⁴)`.
pub fn fd_residual(q: &Approximant, x: &[f64], alpha: &MultiIndex) -> f64 {
    let r = |p: &[f64]| q.residual(p).unwrap();
    let at = |moves: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for (i, s) in moves {
            p[*i] += s;
        }
        r(&p)
    };
    let ones: Vec<usize> = (0..alpha.dim())
        .flat_map(|i| std::iter::repeat(i).take(alpha.get(i) as usize))
        .collect();
    let stencil = |h: f64| match ones.as_slice() {
        [] => r(x),
        [i] => (at(&[(*i, h)]) - at(&[(*i, -h)])) / (2.0 * h),
        [i, j] if i == j => (at(&[(*i, h)]) - 2.0 * r(x) + at(&[(*i, -h)])) / (h * h),
        [i, j] => {
            (at(&[(*i, h), (*j, h)]) - at(&[(*i, h), (*j, -h)]) - at(&[(*i, -h), (*j, h)])
                + at(&[(*i, -h), (*j, -h)]))
                / (4.0 * h * h)
        }
        _ => panic!("finite differences only up to order 2"),
    };
    let h = if ones.len() == 1 { 1e-5 } else { 1e-4 };
    (4.0 * stencil(0.5 * h) - stencil(h)) / 3.0
}

/// Power series of `d²(y+s, y)` for a 1D metric: the series of `a^{-1/2}`
/// from the polynomial coefficients, integrated termwise and squared.
/// Returns coefficients of `s^0 … s^order`.
pub fn series_1d_distance_sq(metric: &MetricField, y: f64, order: usize) -> Vec<f64> {
    let len = order + 1;
    // a(y+s) coefficients by Taylor expansion of the polynomial entry
    let entry = metric.entry(0, 0);
    let mut a = vec![0.0; len];
    let mut fact = 1.0;
    for (k, ak) in a.iter_mut().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        *ak = entry.eval_derivative(&MultiIndex::new(vec![k as u32]), &[y]) / fact;
    }
    // b = a^p with p = −½: b_k = (1/(k a_0)) Σ_{j=1}^k ((p+1)j − k) a_j b_{k−j}
    let p = -0.5;
    let mut b = vec![0.0; len];
    b[0] = a[0].powf(p);
    for k in 1..len {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += ((p + 1.0) * j as f64 - k as f64) * a[j] * b[k - j];
        }
        b[k] = acc / (k as f64 * a[0]);
    }
    let mut d = vec![0.0; len];
    for k in 1..len {
        d[k] = b[k - 1] / k as f64;
    }
    (0..len)
        .map(|k| (0..=k).map(|j| d[j] * d[k - j]).sum())
        .collect()
}

/// Which builder to use.
#[derive(Clone, Copy, Debug)]
pub enum Mode {
    Lp,
    Hsp(usize),
}

pub fn build(metric: Arc<MetricField>, y: &[f64], policy: &NodePolicy, mode: Mode) -> Option<Approximant> {
    let nodes = NodeSet::generate(y, metric.domain().clone(), policy).ok()?;
    match mode {
        Mode::Lp => build_lp(metric, &nodes).ok(),
        Mode::Hsp(m) => build_hsp(metric, &nodes, &BuildSpec::new(m)).ok(),
    }
}

pub fn perturbed(eps: f64) -> Arc<MetricField> {
    Arc::new(MetricField::perturbed(eps, DomainBox::new(vec![-1.0, -1.0], vec![1.0, 1.0])).unwrap())
}

pub fn random_point(r: &mut ChaCha8Rng, b: &DomainBox, margin: f64) -> Vec<f64> {
    b.lower
        .iter()
        .zip(&b.upper)
        .map(|(lo, hi)| {
            let w = hi - lo;
            r.gen_range(lo + margin * w..hi - margin * w)
        })
        .collect()
}

/// A successful build on a randomly chosen catalog metric, with one jittered
/// cell (the 2D catalog rarely builds beyond that) or up to three 1D
/// intervals.
pub fn random_build(r: &mut ChaCha8Rng) -> Approximant {
    for _ in 0..200 {
        let metric = match r.gen_range(0..3) {
            0 => Arc::new(MetricField::log1d()),
            1 => perturbed(r.gen_range(0.0..0.5)),
            _ => Arc::new(MetricField::hyperbolic_default()),
        };
        let y = random_point(r, metric.domain(), 0.1);
        let intervals = if metric.dim() == 1 { r.gen_range(1..=3) } else { 1 };
        let policy = NodePolicy::Jittered {
            intervals,
            seed: r.gen(),
        };
        let mode = match r.gen_range(0..3) {
            0 => Mode::Lp,
            k => Mode::Hsp(k),
        };
        if let Some(q) = build(metric, &y, &policy, mode) {
            return q;
        }
    }
    panic!("no random build succeeded");
}

/// Largest `|∂^α r(x^k)|` over the enforced set.
pub fn enforced_residual(q: &Approximant) -> f64 {
    q.enforced_set()
        .iter()
        .map(|(k, a)| q.residual_derivative(&q.nodes()[*k], a).unwrap().abs())
        .fold(0.0, f64::max)
}
