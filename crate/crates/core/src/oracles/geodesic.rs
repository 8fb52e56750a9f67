use crate::error::{Error, Result};
use crate::metric::{MetricField, SpdMatrix};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicCurve {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// `T·√g(γ̇(0), γ̇(0))`.
    pub length: f64,
}

impl GeodesicCurve {
    pub fn endpoint(&self) -> &[f64] {
        self.points.last().expect("curve has at least one point")
    }

    /// Speeds `√g(γ̇, γ̇)` at the sample times.
    pub fn speeds(&self, metric: &MetricField) -> Result<Vec<f64>> {
        self.points
            .iter()
            .zip(&self.velocities)
            .map(|(x, v)| Ok(metric.invert_at(x)?.quadratic(v).sqrt()))
            .collect()
    }

    /// Largest relative deviation of the speed from its initial value.
    pub fn speed_drift(&self, metric: &MetricField) -> Result<f64> {
        let s = self.speeds(metric)?;
        let s0 = s[0];
        if s0 == 0.0 {
            return Ok(0.0);
        }
        Ok(s.iter().map(|v| (v - s0).abs() / s0).fold(0.0, f64::max))
    }

    /// Trapezoid rule for `∫ √g(γ̇, γ̇) dt`.
    pub fn trapezoid_length(&self, metric: &MetricField) -> Result<f64> {
        let s = self.speeds(metric)?;
        Ok(self
            .times
            .windows(2)
            .zip(s.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
            .sum())
    }
}

fn rhs(metric: &MetricField, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    Ok(metric.christoffel(x)?.acceleration(v))
}

fn axpy(x: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

/// Integrates `ẍ^κ = −Γ^κ_{μν} ẋ^μ ẋ^ν` on `[0, T]` by classical RK4.
pub fn geodesic_shoot(
    metric: &MetricField,
    x: &[f64],
    v: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<GeodesicCurve> {
    let n = metric.dim();
    if x.len() != n || v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if x.len() != n { x.len() } else { v.len() },
        });
    }
    if steps == 0 {
        return Err(Error::Precondition("geodesic_shoot needs at least one step".into()));
    }
    let domain = metric.domain();
    if !domain.contains(x) {
        return Err(Error::LeftDomain { t: 0.0 });
    }
    let dt = t_end / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    let (mut p, mut u) = (x.to_vec(), v.to_vec());
    times.push(0.0);
    points.push(p.clone());
    velocities.push(u.clone());
    for k in 0..steps {
        let k1x = u.clone();
        let k1v = rhs(metric, &p, &u)?;
        let (p2, u2) = (axpy(&p, 0.5 * dt, &k1x), axpy(&u, 0.5 * dt, &k1v));
        let k2v = rhs(metric, &p2, &u2)?;
        let (p3, u3) = (axpy(&p, 0.5 * dt, &u2), axpy(&u, 0.5 * dt, &k2v));
        let k3v = rhs(metric, &p3, &u3)?;
        let (p4, u4) = (axpy(&p, dt, &u3), axpy(&u, dt, &k3v));
        let k4v = rhs(metric, &p4, &u4)?;
        for i in 0..n {
            p[i] += dt / 6.0 * (k1x[i] + 2.0 * u2[i] + 2.0 * u3[i] + u4[i]);
            u[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        let t = (k + 1) as f64 * dt;
        if !domain.contains(&p) || p.iter().chain(&u).any(|c| !c.is_finite()) {
            return Err(Error::LeftDomain { t });
        }
        times.push(t);
        points.push(p.clone());
        velocities.push(u.clone());
    }
    let length = t_end.abs() * metric.invert_at(x)?.quadratic(v).sqrt();
    Ok(GeodesicCurve {
        times,
        points,
        velocities,
        length,
    })
}

#[derive(Clone, Debug)]
pub struct ShootingOptions {
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub starts: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            steps: 1000,
            tol: 1e-9,
            max_iter: 60,
            starts: 8,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Deterministic initial velocities: the chord, then the chord tilted along
/// ±e_i and rescaled.
fn initial_guesses(delta: &[f64], count: usize) -> Vec<Vec<f64>> {
    let n = delta.len();
    let len = norm(delta);
    let mut out = vec![delta.to_vec()];
    let mut k = 0usize;
    while out.len() < count {
        let i = (k / 2) % n;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let round = (k / (2 * n)) as f64;
        let tilt = 0.5 * sign * len / (1.0 + round);
        let stretch = 1.0 + 0.25 * round;
        let mut v: Vec<f64> = delta.iter().map(|d| stretch * d).collect();
        v[i] += tilt;
        out.push(v);
        k += 1;
    }
    out.truncate(count);
    out
}

fn endpoint_miss(metric: &MetricField, x: &[f64], y: &[f64], v: &[f64], steps: usize) -> Option<Vec<f64>> {
    let c = geodesic_shoot(metric, x, v, 1.0, steps).ok()?;
    Some(c.endpoint().iter().zip(y).map(|(a, b)| a - b).collect())
}

fn newton(metric: &MetricField, x: &[f64], y: &[f64], v0: Vec<f64>, opts: &ShootingOptions) -> Option<Vec<f64>> {
    let n = x.len();
    let mut v = v0;
    let mut f = endpoint_miss(metric, x, y, &v, opts.steps)?;
    for _ in 0..opts.max_iter {
        let res = norm(&f);
        if res < opts.tol {
            return Some(v);
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * v[j].abs().max(1.0);
            let mut vp = v.clone();
            vp[j] += h;
            let fp = endpoint_miss(metric, x, y, &vp, opts.steps)?;
            for i in 0..n {
                jac[(i, j)] = (fp[i] - f[i]) / h;
            }
        }
        let step = jac.lu().solve(&-DVector::from_column_slice(&f))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = axpy(&v, lambda, step.as_slice());
            if let Some(ft) = endpoint_miss(metric, x, y, &trial, opts.steps) {
                if norm(&ft) < res {
                    v = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (norm(&f) < opts.tol).then_some(v)
}

/// Riemannian distance by shooting with damped Newton on the initial velocity;
/// the minimum length over converged starts.
pub fn geodesic_distance(metric: &MetricField, x: &[f64], y: &[f64]) -> Result<f64> {
    geodesic_distance_with(metric, x, y, &ShootingOptions::default())
}

pub fn geodesic_distance_with(
    metric: &MetricField,
    x: &[f64],
    y: &[f64],
    opts: &ShootingOptions,
) -> Result<f64> {
    let n = metric.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if x.len() != n { x.len() } else { y.len() },
        });
    }
    let delta: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    if norm(&delta) == 0.0 {
        return Ok(0.0);
    }
    let g0 = metric.invert_at(x)?;
    let mut best: Option<f64> = None;
    for v0 in initial_guesses(&delta, opts.starts.max(1)) {
        if let Some(v) = newton(metric, x, y, v0, opts) {
            let len = g0.quadratic(&v).sqrt();
            best = Some(best.map_or(len, |b| b.min(len)));
        }
    }
    best.ok_or(Error::NoConvergence)
}

/// `√(Δᵀ A⁻¹ Δ)` for a constant diffusion matrix `A`.
pub fn flat_distance(a: &SpdMatrix, x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
    a.inverse().quadratic(&d).max(0.0).sqrt()
}

/// Half-plane distance for `A = diag(x₂², x₂²)`.
pub fn hyperbolic_distance(x: &[f64], y: &[f64]) -> f64 {
    let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
    (1.0 + d2 / (2.0 * x[1] * y[1])).acosh()
}
