use crate::domain::DomainBox;
use crate::error::Result;
use crate::interpolate::{build_hsp, build_lp, BuildSpec, NodePolicy, NodeSet};
use crate::metric::MetricField;
use crate::report::fmt_f64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::sobolev::{sobolev_error, Field, SobolevSpec, SqrtApproximant};

/// Errors below this are treated as exact reproduction.
pub const EXACT_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    /// Intervals per axis.
    pub n: usize,
    pub h: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub s: usize,
    pub p: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln error` against `ln h`; absent when exact.
    pub fitted_order: Option<f64>,
    /// RMS deviation of the log-log fit.
    pub fit_residual: Option<f64>,
    pub exact: bool,
}

impl ConvergenceTable {
    pub fn from_rows(mut rows: Vec<ConvergenceRow>, s: usize, p: f64) -> Self {
        rows.sort_by(|a, b| b.h.total_cmp(&a.h).then(a.n.cmp(&b.n)));
        let exact = rows.iter().all(|r| r.error < EXACT_THRESHOLD);
        let usable: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.error > 0.0 && r.h > 0.0)
            .map(|r| (r.h.ln(), r.error.ln()))
            .collect();
        let (fitted_order, fit_residual) = if exact || usable.len() < 2 {
            (None, None)
        } else {
            let k = usable.len() as f64;
            let mx = usable.iter().map(|u| u.0).sum::<f64>() / k;
            let my = usable.iter().map(|u| u.1).sum::<f64>() / k;
            let sxx: f64 = usable.iter().map(|u| (u.0 - mx).powi(2)).sum();
            let sxy: f64 = usable.iter().map(|u| (u.0 - mx) * (u.1 - my)).sum();
            let slope = sxy / sxx;
            let rms = (usable
                .iter()
                .map(|u| (u.1 - (my + slope * (u.0 - mx))).powi(2))
                .sum::<f64>()
                / k)
                .sqrt();
            (Some(slope), Some(rms))
        };
        ConvergenceTable {
            s,
            p,
            rows,
            fitted_order,
            fit_residual,
            exact,
        }
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    /// `log₂(e_k / e_{k+1})` between consecutive rows.
    pub fn log2_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (w[0].error / w[1].error).log2())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,h,error\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.n, fmt_f64(r.h), fmt_f64(r.error)));
        }
        let order = match (self.exact, self.fitted_order) {
            (true, _) => "exact".to_string(),
            (false, Some(o)) => fmt_f64(o),
            (false, None) => "undefined".to_string(),
        };
        let resid = self.fit_residual.map(fmt_f64).unwrap_or_else(|| "none".into());
        out.push_str(&format!(
            "# s={} p={} fitted_order={} fit_residual={}\n",
            self.s, self.p, order, resid
        ));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// Samples per axis for the mesh size; they contain the cell midpoints of
/// every nested level up to 32 intervals (1D: up to 800).
fn mesh_samples(n: usize) -> usize {
    if n == 1 {
        1601
    } else {
        65
    }
}

/// Node layout per level with `N` intervals per axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelNodes {
    /// Nested equispaced grids; in n ≥ 2 these share coordinates and only
    /// suit metrics whose construction needs no corrections.
    #[default]
    Equispaced,
    Jittered { seed: u64 },
}

impl LevelNodes {
    pub fn policy(&self, intervals: usize) -> NodePolicy {
        match *self {
            LevelNodes::Equispaced => NodePolicy::Equispaced { intervals },
            LevelNodes::Jittered { seed } => NodePolicy::Jittered { intervals, seed },
        }
    }
}

/// Builds one approximant per level over `region` and measures `√q²` against
/// `oracle`. `spec.m == 0` selects `build_lp`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_table(
    metric: Arc<MetricField>,
    oracle: &dyn Field,
    y: &[f64],
    region: &DomainBox,
    levels: &[usize],
    layout: LevelNodes,
    spec: &BuildSpec,
    norm: &SobolevSpec,
) -> Result<ConvergenceTable> {
    let mut rows = Vec::with_capacity(levels.len());
    for &n in levels {
        let nodes = NodeSet::generate(y, region.clone(), &layout.policy(n))?;
        let q = if spec.m == 0 {
            build_lp(metric.clone(), &nodes)?
        } else {
            build_hsp(metric.clone(), &nodes, spec)?
        };
        let error = sobolev_error(&SqrtApproximant(&q), oracle, norm, region);
        rows.push(ConvergenceRow {
            n,
            h: nodes.mesh_size(mesh_samples(region.dim())),
            error,
        });
    }
    Ok(ConvergenceTable::from_rows(rows, norm.s, norm.p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::sobolev::FlatDistance;

    #[test]
    fn fitted_order_of_power_law() {
        let rows = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| ConvergenceRow {
                n: (1.0 / h) as usize,
                h,
                error: 3.0 * h * h,
            })
            .collect();
        let t = ConvergenceTable::from_rows(rows, 0, 2.0);
        assert!((t.fitted_order.unwrap() - 2.0).abs() < 1e-12);
        assert!(t.fit_residual.unwrap() < 1e-12);
        assert!(t.log2_ratios().iter().all(|r| (r - 2.0).abs() < 1e-12));
        assert!(t.to_csv().lines().last().unwrap().starts_with("# s=0"));
    }

    #[test]
    fn constant_metric_is_flagged_exact() {
        let region = DomainBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]);
        let m = Arc::new(
            MetricField::constant(vec![vec![2.0, 1.0], vec![1.0, 2.0]], region.clone()).unwrap(),
        );
        let y = [0.0, 0.0];
        let oracle = FlatDistance::new(&m.a_spd(&y).unwrap(), &y);
        let mut norm = SobolevSpec::new(0, 2.0);
        norm.points_per_axis = 21;
        let t = convergence_table(m, &oracle, &y, &region, &[1, 2],
            LevelNodes::Jittered { seed: 3 },
            &BuildSpec::new(0),
            &norm,
        )
            .unwrap();
        assert!(t.exact);
        assert!(t.fitted_order.is_none());
        assert!(t.to_csv().contains("fitted_order=exact"));
    }
}
