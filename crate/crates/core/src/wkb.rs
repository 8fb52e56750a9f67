//! Small-time expansion of the fundamental solution of
//! `∂_t p = ½ Σ a_ij ∂_ij p + Σ b_i ∂_i p`:
//!
//! ```text
//! p(t, x, y) ≈ (2πt)^{-n/2} exp(−q²(x, y)/(2t) + Σ_k c_k(x, y) t^k)
//! ```
//!
//! Matching powers of `t` with `L = ½ Σ a_ij ∂_ij + Σ b_i ∂_i` gives
//!
//! ```text
//! ½⟨A∇q², ∇c₀⟩ = n/2 − ½ L q²
//! (k+1) c_{k+1} + ½⟨A∇q², ∇c_{k+1}⟩ = R_k = L c_k + ½ Σ_{l+m=k} ⟨∇c_l, A∇c_m⟩
//! ```
//!
//! Both are transport equations along `ẋ = ½A∇q²`, which flows away from `y`.
//! They are integrated backwards from each target until the curve is within
//! `r₀` of `y`, where a first-order Taylor value closes the integral.

use crate::domain::{axis_points, tensor, DomainBox};
use crate::eikonal::Approximant;
use crate::error::{Error, Result};
use crate::metric::{MetricField, SpdMatrix};
use crate::multiindex::MultiIndex;
use crate::poly::MPoly;
use crate::report::fmt_f64;
use serde::{Deserialize, Serialize};

/// Boundary value of `c₀` at `x = y`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum C0Boundary {
    /// `−½ ln det A(y)`, which reproduces the constant-coefficient Gaussian.
    #[default]
    GaussianConsistent,
    /// `−½ ln √det(A(y)⁻¹)`.
    RootInverseDet,
}

impl C0Boundary {
    pub fn value(&self, a: &SpdMatrix) -> f64 {
        let det = a.determinant();
        match self {
            C0Boundary::GaussianConsistent => -0.5 * det.ln(),
            C0Boundary::RootInverseDet => -0.5 * (1.0 / det).sqrt().ln(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    /// Radius around `y` where integration stops.
    pub r0: f64,
    /// Fixed RK4 step in the characteristic parameter.
    pub step: f64,
    /// Largest parameter length before reporting a stall.
    pub max_length: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions {
            r0: 1e-5,
            step: 0.01,
            max_length: 60.0,
        }
    }
}

/// Uniform tensor grid, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorGrid {
    axes: Vec<Vec<f64>>,
    steps: Vec<f64>,
}

impl TensorGrid {
    pub fn new(region: &DomainBox, per_axis: usize) -> Self {
        let axes: Vec<Vec<f64>> = (0..region.dim())
            .map(|i| axis_points(region.lower[i], region.upper[i], per_axis))
            .collect();
        let steps = axes.iter().map(|a| a[1] - a[0]).collect();
        TensorGrid { axes, steps }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn per_axis(&self) -> usize {
        self.axes[0].len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        tensor(&self.axes)
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (i, a)| acc * a.len() + i)
    }

    fn multi(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            let len = self.axes[d].len();
            idx[d] = k % len;
            k /= len;
        }
        idx
    }

    fn neighbour(&self, k: usize, axis: usize, offset: isize) -> Option<usize> {
        let mut idx = self.multi(k);
        let j = idx[axis] as isize + offset;
        if j < 0 || j >= self.axes[axis].len() as isize {
            return None;
        }
        idx[axis] = j as usize;
        Some(self.flat(&idx))
    }

    /// Central-difference gradient at grid point `k`; NaN on the boundary.
    pub fn gradient(&self, values: &[f64], k: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|i| match (self.neighbour(k, i, 1), self.neighbour(k, i, -1)) {
                (Some(p), Some(m)) => (values[p] - values[m]) / (2.0 * self.steps[i]),
                _ => f64::NAN,
            })
            .collect()
    }

    /// Central-difference Hessian at grid point `k`; NaN on the boundary.
    pub fn hessian(&self, values: &[f64], k: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut h = vec![vec![f64::NAN; n]; n];
        for i in 0..n {
            let hi = self.steps[i];
            if let (Some(p), Some(m)) = (self.neighbour(k, i, 1), self.neighbour(k, i, -1)) {
                h[i][i] = (values[p] - 2.0 * values[k] + values[m]) / (hi * hi);
            }
            for j in 0..i {
                let hj = self.steps[j];
                let corner = |si: isize, sj: isize| -> Option<f64> {
                    let a = self.neighbour(k, i, si)?;
                    let b = self.neighbour(a, j, sj)?;
                    Some(values[b])
                };
                let v = match (corner(1, 1), corner(1, -1), corner(-1, 1), corner(-1, -1)) {
                    (Some(pp), Some(pm), Some(mp), Some(mm)) => {
                        (pp - pm - mp + mm) / (4.0 * hi * hj)
                    }
                    _ => f64::NAN,
                };
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        h
    }

    /// Tensor Catmull–Rom interpolation (linear in boundary cells). NaN
    /// outside the grid or where a contributing sample is NaN.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let n = self.dim();
        let mut per_axis: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for i in 0..n {
            let a = &self.axes[i];
            let len = a.len();
            let u = (x[i] - a[0]) / self.steps[i];
            if !(u >= -1e-12 && u <= (len - 1) as f64 + 1e-12) {
                return f64::NAN;
            }
            let cell = (u.floor().max(0.0) as usize).min(len - 2);
            let t = (u - cell as f64).clamp(0.0, 1.0);
            let mut w = Vec::with_capacity(4);
            if cell >= 1 && cell + 2 < len {
                let (t2, t3) = (t * t, t * t * t);
                w.push((cell - 1, 0.5 * (-t + 2.0 * t2 - t3)));
                w.push((cell, 0.5 * (2.0 - 5.0 * t2 + 3.0 * t3)));
                w.push((cell + 1, 0.5 * (t + 4.0 * t2 - 3.0 * t3)));
                w.push((cell + 2, 0.5 * (-t2 + t3)));
            } else {
                w.push((cell, 1.0 - t));
                w.push((cell + 1, t));
            }
            w.retain(|(_, wt)| *wt != 0.0);
            per_axis.push(w);
        }
        let mut acc = 0.0;
        let mut idx = vec![0usize; n];
        let mut counters = vec![0usize; n];
        loop {
            let mut wt = 1.0;
            for d in 0..n {
                let (j, w) = per_axis[d][counters[d]];
                idx[d] = j;
                wt *= w;
            }
            acc += wt * values[self.flat(&idx)];
            let mut d = n;
            loop {
                if d == 0 {
                    return acc;
                }
                d -= 1;
                counters[d] += 1;
                if counters[d] < per_axis[d].len() {
                    break;
                }
                counters[d] = 0;
            }
        }
    }
}

fn check_drift(metric: &MetricField, drift: &[MPoly]) -> Result<()> {
    if drift.len() != metric.dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.dim(),
            got: drift.len(),
        });
    }
    Ok(())
}

/// `½ A ∇q²` and the Hessian-trace data needed for `L q²`.
struct Flow<'a> {
    metric: &'a MetricField,
    drift: &'a [MPoly],
    q: &'a Approximant,
    y: Vec<f64>,
    opts: TransportOptions,
}

impl Flow<'_> {
    fn velocity(&self, x: &[f64]) -> Result<Vec<f64>> {
        let a = self.metric.a_spd(x)?;
        let g = self.q.gradient(x);
        Ok(a.apply(&g).into_iter().map(|v| 0.5 * v).collect())
    }

    /// `n/2 − ½ L q²`.
    fn c0_source(&self, x: &[f64]) -> f64 {
        let n = self.metric.dim();
        let j = self.q.jet(x, 2);
        let a = self.metric.a_matrix(x);
        let mut lq = 0.0;
        for i in 0..n {
            let ei = MultiIndex::unit(n, i);
            lq += self.drift[i].eval(x) * j.derivative(&ei);
            for k in 0..n {
                lq += 0.5 * a[(i, k)] * j.derivative(&ei.add(&MultiIndex::unit(n, k)));
            }
        }
        0.5 * n as f64 - 0.5 * lq
    }

    fn distance(&self, x: &[f64]) -> f64 {
        crate::domain::dist(x, &self.y)
    }

    /// Solves `dc/dτ = F − κ c` along the characteristic through `target`,
    /// with `c(y) = c_y` and `∇c(y) = ∇F(y)/(1+κ)`.
    fn solve(
        &self,
        target: &[f64],
        kappa: f64,
        c_y: f64,
        grad_f_y: &[f64],
        source: &dyn Fn(&[f64]) -> f64,
    ) -> Result<f64> {
        let taylor = |x: &[f64]| -> f64 {
            c_y + x
                .iter()
                .zip(&self.y)
                .zip(grad_f_y)
                .map(|((a, b), g)| g * (a - b))
                .sum::<f64>()
                / (1.0 + kappa)
        };
        if self.distance(target) <= self.opts.r0 {
            return Ok(taylor(target));
        }
        let domain = self.metric.domain();
        let h = self.opts.step;
        let mut x = target.to_vec();
        let mut integral = 0.0;
        let mut s = 0.0;
        // backward flow ẋ = −½A∇q² augmented with dI/ds = e^{−κs} F(x)
        let deriv = |x: &[f64], s: f64| -> Result<(Vec<f64>, f64)> {
            if !domain.contains(x) {
                return Err(Error::CharacteristicEscape { point: x.to_vec() });
            }
            let v = self.velocity(x)?;
            Ok((v.into_iter().map(|c| -c).collect(), (-kappa * s).exp() * source(x)))
        };
        while self.distance(&x) > self.opts.r0 {
            if s > self.opts.max_length {
                return Err(Error::StallNearBasePoint {
                    distance: self.distance(&x),
                });
            }
            let shift = |d: &[f64], f: f64| -> Vec<f64> {
                x.iter().zip(d).map(|(a, b)| a + f * b).collect()
            };
            let (k1, i1) = deriv(&x, s)?;
            let (k2, i2) = deriv(&shift(&k1, 0.5 * h), s + 0.5 * h)?;
            let (k3, i3) = deriv(&shift(&k2, 0.5 * h), s + 0.5 * h)?;
            let (k4, i4) = deriv(&shift(&k3, h), s + h)?;
            for d in 0..x.len() {
                x[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
            integral += h / 6.0 * (i1 + 2.0 * i2 + 2.0 * i3 + i4);
            s += h;
            if x.iter().any(|c| !c.is_finite()) {
                return Err(Error::CharacteristicEscape { point: x });
            }
        }
        Ok(integral + (-kappa * s).exp() * taylor(&x))
    }
}

fn central_gradient(f: &dyn Fn(&[f64]) -> f64, y: &[f64], h: f64) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let (mut p, mut m) = (y.to_vec(), y.to_vec());
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn require_order(q: &Approximant, needed: usize, what: &str) -> Result<()> {
    if q.enforced_order() < needed {
        return Err(Error::Precondition(format!(
            "{what} needs q² built with m >= {needed}, got m = {}",
            q.enforced_order()
        )));
    }
    Ok(())
}

/// `c₀` at each target.
pub fn wkb_c0(
    metric: &MetricField,
    drift: &[MPoly],
    q: &Approximant,
    targets: &[Vec<f64>],
    boundary: C0Boundary,
    opts: &TransportOptions,
) -> Result<Vec<f64>> {
    check_drift(metric, drift)?;
    require_order(q, 1, "wkb_c0")?;
    let y = q.base_point().to_vec();
    let flow = Flow {
        metric,
        drift,
        q,
        y: y.clone(),
        opts: opts.clone(),
    };
    let c_y = boundary.value(&metric.a_spd(&y)?);
    let source = |x: &[f64]| flow.c0_source(x);
    let grad = central_gradient(&source, &y, opts.r0);
    targets
        .iter()
        .map(|t| flow.solve(t, 0.0, c_y, &grad, &source))
        .collect()
}

/// `R_k` at every grid point from the grids `c₀ … c_k`; NaN where a
/// stencil leaves the grid.
pub fn transport_source(
    metric: &MetricField,
    drift: &[MPoly],
    grid: &TensorGrid,
    prev: &[Vec<f64>],
) -> Vec<f64> {
    let n = grid.dim();
    let k = prev.len() - 1;
    let points = grid.points();
    (0..grid.len())
        .map(|p| {
            let x = &points[p];
            let a = metric.a_matrix(x);
            let grads: Vec<Vec<f64>> = prev.iter().map(|c| grid.gradient(c, p)).collect();
            let hess = grid.hessian(&prev[k], p);
            let mut r = 0.0;
            for i in 0..n {
                r += drift[i].eval(x) * grads[k][i];
                for j in 0..n {
                    r += 0.5 * a[(i, j)] * hess[i][j];
                }
            }
            for l in 0..=k {
                let m = k - l;
                for i in 0..n {
                    for j in 0..n {
                        r += 0.5 * grads[l][i] * a[(i, j)] * grads[m][j];
                    }
                }
            }
            r
        })
        .collect()
}

/// `c_{k+1}` on the grid from `prev = [c₀, …, c_k]`. Grid points whose
/// characteristic needs `R_k` where its stencils leave the grid (the outer
/// `2(k+1)` layers) are NaN.
#[allow(clippy::too_many_arguments)]
pub fn wkb_next(
    metric: &MetricField,
    drift: &[MPoly],
    q: &Approximant,
    grid: &TensorGrid,
    prev: &[Vec<f64>],
    k: usize,
    opts: &TransportOptions,
) -> Result<Vec<f64>> {
    check_drift(metric, drift)?;
    require_order(q, 2 * (k + 1), "wkb_next")?;
    if prev.len() != k + 1 {
        return Err(Error::Precondition(format!(
            "wkb_next at order {k} needs {} previous grids, got {}",
            k + 1,
            prev.len()
        )));
    }
    if grid.per_axis() < 5 {
        return Err(Error::GridTooCoarse(format!(
            "{} points per axis; at least 5 are needed",
            grid.per_axis()
        )));
    }
    let rk = transport_source(metric, drift, grid, prev);
    let y = q.base_point().to_vec();
    let source = |x: &[f64]| grid.interpolate(&rk, x);
    let kappa = (k + 1) as f64;
    let r_y = source(&y);
    let grad = central_gradient(&source, &y, opts.r0);
    if !r_y.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::GridTooCoarse(
            "difference stencils around the base point leave the grid".into(),
        ));
    }
    let flow = Flow {
        metric,
        drift,
        q,
        y,
        opts: opts.clone(),
    };
    grid.points()
        .iter()
        .map(|t| flow.solve(t, kappa, r_y / kappa, &grad, &source))
        .collect()
}

/// Discrete residual `(k+1)c + ½⟨A∇q², ∇c⟩ − R_k` at interior grid points.
pub fn transport_residual(
    metric: &MetricField,
    q: &Approximant,
    grid: &TensorGrid,
    next: &[f64],
    source: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    let points = grid.points();
    (0..grid.len())
        .map(|p| {
            let x = &points[p];
            let v = metric.a_spd(x)?.apply(&q.gradient(x));
            let g = grid.gradient(next, p);
            let adv: f64 = v.iter().zip(&g).map(|(a, b)| 0.5 * a * b).sum();
            Ok((k + 1) as f64 * next[p] + adv - source[p])
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct WkbSet {
    y: Vec<f64>,
    q: Approximant,
    drift: Vec<MPoly>,
    grid: TensorGrid,
    boundary: C0Boundary,
    values: Vec<Vec<f64>>,
}

impl WkbSet {
    /// Fills `c₀ … c_K` on a `per_axis`-point grid over `region`.
    #[allow(clippy::too_many_arguments)]
    pub fn compute(
        q: Approximant,
        drift: Vec<MPoly>,
        region: &DomainBox,
        per_axis: usize,
        k_max: usize,
        boundary: C0Boundary,
        opts: &TransportOptions,
    ) -> Result<WkbSet> {
        let metric = q.metric_arc().clone();
        if region.dim() != metric.dim() {
            return Err(Error::DimensionMismatch {
                expected: metric.dim(),
                got: region.dim(),
            });
        }
        if k_max > 0 {
            require_order(&q, 2 * k_max, "WKB order K")?;
        }
        let grid = TensorGrid::new(region, per_axis);
        let mut values = vec![wkb_c0(&metric, &drift, &q, &grid.points(), boundary, opts)?];
        for k in 0..k_max {
            let next = wkb_next(&metric, &drift, &q, &grid, &values, k, opts)?;
            values.push(next);
        }
        Ok(WkbSet {
            y: q.base_point().to_vec(),
            q,
            drift,
            grid,
            boundary,
            values,
        })
    }

    pub fn base_point(&self) -> &[f64] {
        &self.y
    }

    pub fn approximant(&self) -> &Approximant {
        &self.q
    }

    pub fn drift(&self) -> &[MPoly] {
        &self.drift
    }

    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }

    pub fn boundary(&self) -> C0Boundary {
        self.boundary
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn grid_values(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// `c_k(x)` interpolated from the grid.
    pub fn coefficient(&self, k: usize, x: &[f64]) -> f64 {
        self.grid.interpolate(&self.values[k], x)
    }

    /// Rows `x1,…,xn,k,value`.
    pub fn to_csv(&self) -> String {
        let n = self.grid.dim();
        let mut out: String = (1..=n).map(|i| format!("x{i},")).collect();
        out.push_str("k,value\n");
        let points = self.grid.points();
        for (k, vals) in self.values.iter().enumerate() {
            for (p, v) in points.iter().zip(vals) {
                for c in p {
                    out.push_str(&fmt_f64(*c));
                    out.push(',');
                }
                out.push_str(&format!("{k},{}\n", fmt_f64(*v)));
            }
        }
        out
    }
}

/// `(2πt)^{-n/2} exp(−q²(x, y)/(2t) + Σ_k c_k(x) t^k)`; NaN if `y` is not
/// the base point of `set` or `x` is off the grid.
pub fn assemble_kernel(t: f64, x: &[f64], y: &[f64], set: &WkbSet) -> f64 {
    if y != set.base_point() {
        return f64::NAN;
    }
    let n = x.len() as f64;
    let mut exponent = -set.q.value(x) / (2.0 * t);
    let mut tk = 1.0;
    for k in 0..=set.order() {
        exponent += set.coefficient(k, x) * tk;
        tk *= t;
    }
    (2.0 * std::f64::consts::PI * t).powf(-0.5 * n) * exponent.exp()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelProbe {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VaradhanReport {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub limit: f64,
    pub q2: f64,
    pub abs_diff: f64,
}

/// Neville extrapolation of `v(t) = −2t ln(p (2πt)^{n/2})` to `t = 0`.
pub fn varadhan_check(set: &WkbSet, x: &[f64], y: &[f64], t_seq: &[f64]) -> Result<VaradhanReport> {
    if t_seq.len() < 4 {
        return Err(Error::Precondition("varadhan_check needs at least 4 times".into()));
    }
    if t_seq.windows(2).any(|w| !(w[1] < w[0])) || t_seq.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Precondition("times must be positive and decreasing".into()));
    }
    let n = x.len() as f64;
    let v: Vec<f64> = t_seq
        .iter()
        .map(|&t| {
            let p = assemble_kernel(t, x, y, set);
            -2.0 * t * (p * (2.0 * std::f64::consts::PI * t).powf(0.5 * n)).ln()
        })
        .collect();
    let mut table = v.clone();
    let m = t_seq.len();
    for level in 1..m {
        for i in 0..m - level {
            let (ti, tj) = (t_seq[i], t_seq[i + level]);
            table[i] = (tj * table[i] - ti * table[i + 1]) / (tj - ti);
        }
    }
    let limit = table[0];
    let q2 = set.q.value(x);
    Ok(VaradhanReport {
        t: t_seq.to_vec(),
        v,
        limit,
        q2,
        abs_diff: (limit - q2).abs(),
    })
}
