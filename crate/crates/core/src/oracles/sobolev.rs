use crate::domain::{axis_points, tensor, DomainBox};
use crate::eikonal::Approximant;
use crate::jet::{series_powf, Jet};
use crate::metric::{MetricField, SpdMatrix};
use crate::multiindex::{binomial, enumerate_up_to, MultiIndex};
use serde::{Deserialize, Serialize};

use super::quadrature::exact_1d_distance;

/// A scalar field whose partial derivatives can be sampled.
pub trait Field {
    fn dim(&self) -> usize;

    /// `∂^α f(x)` for every `|α| ≤ order`, ordered as
    /// [`enumerate_up_to`]. Entries are NaN where the derivative is undefined.
    fn derivatives(&self, x: &[f64], order: usize) -> Vec<f64>;

    fn value(&self, x: &[f64]) -> f64 {
        self.derivatives(x, 0)[0]
    }
}

fn sqrt_jet_values(j: &Jet, order: usize) -> Vec<f64> {
    let idx = enumerate_up_to(j.layout().dim(), order);
    let v = j.value();
    if v > 0.0 {
        let r = j.sqrt();
        idx.iter().map(|a| r.derivative(a)).collect()
    } else {
        // √ is not differentiable where q² vanishes.
        idx.iter()
            .map(|a| if a.order() == 0 { 0.0 } else { f64::NAN })
            .collect()
    }
}

/// `q²` itself.
pub struct SquaredApproximant<'a>(pub &'a Approximant);

impl Field for SquaredApproximant<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn derivatives(&self, x: &[f64], order: usize) -> Vec<f64> {
        let j = self.0.jet(x, order);
        enumerate_up_to(self.dim(), order)
            .iter()
            .map(|a| j.derivative(a))
            .collect()
    }
}

/// `d_≈ = √(q²)`, clamped to 0 where `q² ≤ 0`.
pub struct SqrtApproximant<'a>(pub &'a Approximant);

impl Field for SqrtApproximant<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn derivatives(&self, x: &[f64], order: usize) -> Vec<f64> {
        sqrt_jet_values(&self.0.jet(x, order), order)
    }
}

/// `√(Δᵀ A⁻¹ Δ)` with exact derivatives.
pub struct FlatDistance {
    g: SpdMatrix,
    y: Vec<f64>,
}

impl FlatDistance {
    pub fn new(a: &SpdMatrix, y: &[f64]) -> Self {
        FlatDistance {
            g: a.inverse(),
            y: y.to_vec(),
        }
    }
}

impl Field for FlatDistance {
    fn dim(&self) -> usize {
        self.y.len()
    }

    fn derivatives(&self, x: &[f64], order: usize) -> Vec<f64> {
        sqrt_jet_values(&crate::eikonal::quadratic_jet(&self.g, x, &self.y, order), order)
    }
}

/// One-dimensional distance by quadrature; derivatives from the series of
/// `a(x)^{-1/2}`.
pub struct Exact1dDistance<'a> {
    metric: &'a MetricField,
    y: f64,
}

impl<'a> Exact1dDistance<'a> {
    pub fn new(metric: &'a MetricField, y: f64) -> Self {
        Exact1dDistance { metric, y }
    }
}

impl Field for Exact1dDistance<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn derivatives(&self, x: &[f64], order: usize) -> Vec<f64> {
        let mut out = vec![exact_1d_distance(self.metric, x[0], self.y).unwrap_or(f64::NAN)];
        if order == 0 {
            return out;
        }
        let sign = (x[0] - self.y).signum();
        let a = self.metric.entry(0, 0);
        let taylor: Vec<f64> = (0..order)
            .map(|k| {
                a.eval_derivative(&MultiIndex::new(vec![k as u32]), x)
                    / crate::multiindex::factorial(k as u32) as f64
            })
            .collect();
        if !(taylor[0] > 0.0) || x[0] == self.y {
            out.extend(std::iter::repeat(f64::NAN).take(order));
            return out;
        }
        let inv_sqrt = series_powf(&taylor, -0.5, order - 1);
        for k in 1..=order {
            let fact = crate::multiindex::factorial(k as u32 - 1) as f64;
            out.push(sign * fact * inv_sqrt[k - 1]);
        }
        out
    }
}

/// A closure-backed field; derivatives by central differences with one
/// Richardson step.
pub struct FdField<F: Fn(&[f64]) -> f64> {
    n: usize,
    f: F,
    step: f64,
}

pub const FD_STEP: f64 = 1e-4;

impl<F: Fn(&[f64]) -> f64> FdField<F> {
    pub fn new(n: usize, f: F) -> Self {
        FdField { n, f, step: FD_STEP }
    }

    pub fn with_step(n: usize, f: F, step: f64) -> Self {
        FdField { n, f, step }
    }

    /// Tensor-product central difference; order-k factors sample at
    /// `x_i + (k/2 − j) h`, which is second-order accurate.
    fn difference(&self, x: &[f64], alpha: &MultiIndex, h: f64) -> f64 {
        let mut stencil: Vec<(Vec<f64>, f64)> = vec![(x.to_vec(), 1.0)];
        for i in 0..self.n {
            let k = alpha.get(i);
            if k == 0 {
                continue;
            }
            let mut next = Vec::with_capacity(stencil.len() * (k as usize + 1));
            for (p, w) in &stencil {
                for j in 0..=k {
                    let mut q = p.clone();
                    q[i] += (k as f64 / 2.0 - j as f64) * h;
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    next.push((q, w * sign * binomial(k, j) as f64 / h.powi(k as i32)));
                }
            }
            stencil = next;
        }
        stencil.iter().map(|(p, w)| w * (self.f)(p)).sum()
    }
}

impl<F: Fn(&[f64]) -> f64> Field for FdField<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn derivatives(&self, x: &[f64], order: usize) -> Vec<f64> {
        enumerate_up_to(self.n, order)
            .iter()
            .map(|a| {
                if a.is_zero() {
                    (self.f)(x)
                } else {
                    let coarse = self.difference(x, a, self.step);
                    let fine = self.difference(x, a, 0.5 * self.step);
                    (4.0 * fine - coarse) / 3.0
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevSpec {
    pub s: usize,
    pub p: f64,
    #[serde(default = "default_points")]
    pub points_per_axis: usize,
}

fn default_points() -> usize {
    201
}

impl SobolevSpec {
    pub fn new(s: usize, p: f64) -> Self {
        SobolevSpec {
            s,
            p,
            points_per_axis: default_points(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SobolevMeasurement {
    pub error: f64,
    /// Grid samples skipped because a derivative was undefined.
    pub excluded: usize,
}

/// `(Σ_{|α|≤s} ∫ |∂^α(f − g)|^p)^{1/p}` by the tensor trapezoid rule.
pub fn sobolev_error(f: &dyn Field, g: &dyn Field, spec: &SobolevSpec, region: &DomainBox) -> f64 {
    sobolev_measure(f, g, spec, region).error
}

pub fn sobolev_measure(
    f: &dyn Field,
    g: &dyn Field,
    spec: &SobolevSpec,
    region: &DomainBox,
) -> SobolevMeasurement {
    assert!(spec.p >= 1.0, "Sobolev exponent must be at least 1");
    let n = region.dim();
    let k = spec.points_per_axis.max(2);
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|i| axis_points(region.lower[i], region.upper[i], k))
        .collect();
    let weights: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let h = (region.upper[i] - region.lower[i]) / (k - 1) as f64;
            (0..k)
                .map(|j| if j == 0 || j == k - 1 { 0.5 * h } else { h })
                .collect()
        })
        .collect();
    let index_axes: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|j| j as f64).collect()).collect();
    let mut acc = 0.0;
    let mut excluded = 0;
    for idx in tensor(&index_axes) {
        let x: Vec<f64> = (0..n).map(|i| axes[i][idx[i] as usize]).collect();
        let w: f64 = (0..n).map(|i| weights[i][idx[i] as usize]).product();
        let (df, dg) = (f.derivatives(&x, spec.s), g.derivatives(&x, spec.s));
        let mut skipped = false;
        for (a, b) in df.iter().zip(&dg) {
            let d = a - b;
            if d.is_finite() {
                acc += w * d.abs().powf(spec.p);
            } else {
                skipped = true;
            }
        }
        if skipped {
            excluded += 1;
        }
    }
    SobolevMeasurement {
        error: acc.powf(1.0 / spec.p),
        excluded,
    }
}
