use crate::eikonal::Approximant;
use crate::error::Result;
use crate::multiindex::MultiIndex;
use serde::Serialize;

/// Points where `q²` is below this are skipped (the ratio divides by `q²`).
pub const BOUND_EXCLUSION: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub lambda_min: f64,
    /// Largest `(∂_i q²)² λ_min / (4 q²)` over the grid; `1` is the bound.
    pub max_ratio: f64,
    pub argmax: Option<Vec<f64>>,
    pub checked: usize,
    pub excluded: usize,
}

impl BoundReport {
    pub fn respects(&self, tol: f64) -> bool {
        self.max_ratio <= 1.0 + tol
    }
}

/// Checks the a priori derivative bound `(∂_i d²)² ≤ 4 d² / λ_min`, which
/// follows from `⟨∇d, A∇d⟩ = 1`, on the given points.
pub fn gradient_bound_check(q: &Approximant, grid: &[Vec<f64>]) -> Result<BoundReport> {
    let metric = q.metric();
    let mut lambda_min = f64::INFINITY;
    for x in grid {
        lambda_min = lambda_min.min(metric.lambda_min(x)?);
    }
    let n = q.dim();
    let mut report = BoundReport {
        lambda_min,
        max_ratio: 0.0,
        argmax: None,
        checked: 0,
        excluded: 0,
    };
    for x in grid {
        let j = q.jet(x, 1);
        let q2 = j.value();
        if q2 < BOUND_EXCLUSION {
            report.excluded += 1;
            continue;
        }
        report.checked += 1;
        for i in 0..n {
            let g = j.derivative(&MultiIndex::unit(n, i));
            let ratio = g * g * lambda_min / (4.0 * q2);
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.argmax = Some(x.clone());
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainBox;
    use crate::metric::MetricField;
    use std::sync::Arc;

    #[test]
    fn identity_quadratic_reaches_the_bound_on_axes() {
        let b = DomainBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]);
        let m = Arc::new(MetricField::constant(vec![vec![1.0, 0.0], vec![0.0, 1.0]], b.clone()).unwrap());
        let q = Approximant::base(m, vec![vec![0.0, 0.0]]).unwrap();
        let r = gradient_bound_check(&q, &b.grid(11)).unwrap();
        assert_eq!(r.excluded, 1);
        assert_eq!(r.checked, 120);
        assert!((r.max_ratio - 1.0).abs() < 1e-15);
        assert!(r.respects(0.0));
    }

    #[test]
    fn anisotropic_quadratic_stays_below() {
        let b = DomainBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]);
        let m = Arc::new(MetricField::constant(vec![vec![2.0, 1.0], vec![1.0, 2.0]], b.clone()).unwrap());
        let q = Approximant::base(m, vec![vec![0.0, 0.0]]).unwrap();
        let r = gradient_bound_check(&q, &b.grid(21)).unwrap();
        assert!(r.respects(1e-12), "{r:?}");
        assert!(r.max_ratio > 0.5);
    }
}
