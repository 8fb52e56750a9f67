//! JSON run configuration for the command-line front end.

use crate::domain::DomainBox;
use crate::interpolate::{BuildSpec, NodePolicy};
use crate::metric::{Catalog, MetricField};
use crate::multiindex::MultiIndex;
use crate::oracles::{LevelNodes, SobolevSpec};
use crate::poly::MPoly;
use crate::wkb::{C0Boundary, TransportOptions};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Invalid configuration, with the offending field path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config at `{}`: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// One monomial `coefficient · x^exponents`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpec {
    Catalog(Catalog),
    /// Entries `a_ij` as lists of terms; the matrix is symmetrised.
    Explicit { entries: Vec<Vec<Vec<Term>>> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuildMode {
    #[default]
    Lp,
    Hsp { m: usize },
}

impl BuildMode {
    pub fn order(&self) -> usize {
        match self {
            BuildMode::Lp => 0,
            BuildMode::Hsp { m } => *m,
        }
    }
}

fn default_residual_points() -> usize {
    11
}

fn default_wkb_points() -> usize {
    41
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Study {
    /// Residual derivatives up to the enforced order on a tensor grid.
    Residual {
        #[serde(default = "default_residual_points")]
        points_per_axis: usize,
    },
    /// Sobolev error of `√q²` against the reference distance.
    Error,
    Convergence {
        levels: Vec<usize>,
        #[serde(default)]
        layout: LevelNodes,
    },
    Wkb {
        k: usize,
        t_seq: Vec<f64>,
        #[serde(default)]
        probes: Vec<Vec<f64>>,
        #[serde(default = "default_wkb_points")]
        grid_points: usize,
        #[serde(default)]
        boundary: C0Boundary,
        /// Drift components as term lists; empty means zero drift.
        #[serde(default)]
        drift: Vec<Vec<Term>>,
        #[serde(default)]
        transport: TransportOptions,
    },
    LocalSeries { order: usize },
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Residual { .. } => "residual",
            Study::Error => "error",
            Study::Convergence { .. } => "convergence",
            Study::Wkb { .. } => "wkb",
            Study::LocalSeries { .. } => "local_series",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Report directory; `--out-dir` overrides it. Defaults to `out`.
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub metric: MetricSpec,
    /// Required unless the catalog metric has a default box.
    #[serde(default)]
    pub domain: Option<DomainBox>,
    pub base_point: Vec<f64>,
    #[serde(default)]
    pub nodes: NodePolicy,
    #[serde(default)]
    pub build: BuildMode,
    #[serde(default)]
    pub norm: Option<SobolevSpec>,
    /// Evaluation region for errors and WKB grids; defaults to the domain.
    #[serde(default)]
    pub region: Option<DomainBox>,
    pub study: Study,
    #[serde(default)]
    pub outputs: Outputs,
}

/// A validated configuration with the metric constructed.
pub struct Resolved {
    pub metric: MetricField,
    pub domain: DomainBox,
    pub region: DomainBox,
    pub norm: SobolevSpec,
    pub drift: Vec<MPoly>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(path, e.into_inner().to_string())
        })
    }

    pub fn build_spec(&self) -> BuildSpec {
        BuildSpec::new(self.build.order())
    }

    /// Checks every field and constructs the metric.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        if let Some(d) = &self.domain {
            check_box(d, "domain")?;
        }
        let metric = self.metric()?;
        let n = metric.dim();
        let domain = metric.domain().clone();

        if self.base_point.len() != n {
            return Err(ConfigError::new(
                "base_point",
                format!("expected {n} coordinates, got {}", self.base_point.len()),
            ));
        }
        if !domain.contains(&self.base_point) {
            return Err(ConfigError::new("base_point", "base point lies outside the domain box"));
        }

        let region = match &self.region {
            Some(r) => {
                check_box(r, "region")?;
                if r.dim() != n {
                    return Err(ConfigError::new("region", "dimension differs from the metric"));
                }
                if !domain.contains(&r.lower) || !domain.contains(&r.upper) {
                    return Err(ConfigError::new("region", "region must lie inside the domain box"));
                }
                r.clone()
            }
            None => domain.clone(),
        };

        if matches!(self.study, Study::Convergence { .. }) && !region.contains(&self.base_point) {
            return Err(ConfigError::new(
                "base_point",
                "convergence levels place nodes in the region, which must contain the base point",
            ));
        }
        self.check_nodes(&domain)?;

        let norm = self.norm.clone().unwrap_or_else(|| SobolevSpec::new(0, 2.0));
        if !(norm.p >= 1.0) || !norm.p.is_finite() {
            return Err(ConfigError::new("norm.p", "exponent must be finite and at least 1"));
        }
        if norm.points_per_axis < 2 {
            return Err(ConfigError::new("norm.points_per_axis", "need at least 2 points"));
        }
        if let BuildMode::Hsp { m } = self.build {
            if m < 1 {
                return Err(ConfigError::new("build.m", "hsp needs m >= 1"));
            }
            if matches!(self.study, Study::Error | Study::Convergence { .. }) && norm.s > m {
                return Err(ConfigError::new(
                    "norm.s",
                    format!("Sobolev order {} exceeds the enforced order m = {m}", norm.s),
                ));
            }
        }

        let drift = self.check_study(n, &region)?;

        Ok(Resolved {
            metric,
            domain,
            region,
            norm,
            drift,
        })
    }

    fn metric(&self) -> Result<MetricField, ConfigError> {
        let need_domain = || {
            self.domain
                .clone()
                .ok_or_else(|| ConfigError::new("domain", "this metric needs an explicit domain box"))
        };
        let built = match &self.metric {
            MetricSpec::Catalog(Catalog::Log1d) => match &self.domain {
                Some(d) => MetricField::log1d_on(d.clone()),
                None => Ok(MetricField::log1d()),
            },
            MetricSpec::Catalog(Catalog::HyperbolicHalfPlane) => match &self.domain {
                Some(d) => MetricField::hyperbolic(d.clone()),
                None => Ok(MetricField::hyperbolic_default()),
            },
            MetricSpec::Catalog(Catalog::Constant { matrix }) => {
                let n = matrix.len();
                if n == 0 || matrix.iter().any(|r| r.len() != n) {
                    return Err(ConfigError::new("metric.catalog.matrix", "matrix must be square and nonempty"));
                }
                MetricField::constant(matrix.clone(), need_domain()?)
            }
            MetricSpec::Catalog(Catalog::Perturbed { epsilon }) => {
                if !(*epsilon >= 0.0) {
                    return Err(ConfigError::new("metric.catalog.epsilon", "epsilon must be non-negative"));
                }
                MetricField::perturbed(*epsilon, need_domain()?)
            }
            MetricSpec::Explicit { entries } => {
                let n = entries.len();
                if n == 0 {
                    return Err(ConfigError::new("metric.explicit.entries", "no entries"));
                }
                let mut raw = Vec::with_capacity(n);
                for (i, row) in entries.iter().enumerate() {
                    if row.len() != n {
                        return Err(ConfigError::new(
                            format!("metric.explicit.entries[{i}]"),
                            format!("expected {n} entries in the row"),
                        ));
                    }
                    let mut polys = Vec::with_capacity(n);
                    for (j, terms) in row.iter().enumerate() {
                        polys.push(poly(n, terms, &format!("metric.explicit.entries[{i}][{j}]"))?);
                    }
                    raw.push(polys);
                }
                MetricField::new(raw, need_domain()?, None, &[])
            }
        };
        built.map_err(|e| ConfigError::new("metric", e.to_string()))
    }

    fn check_nodes(&self, domain: &DomainBox) -> Result<(), ConfigError> {
        match &self.nodes {
            NodePolicy::Equispaced { intervals } | NodePolicy::Jittered { intervals, .. } => {
                if *intervals < 1 {
                    return Err(ConfigError::new("nodes.intervals", "need at least one interval"));
                }
            }
            NodePolicy::Explicit { nodes } => {
                for (k, x) in nodes.iter().enumerate() {
                    if !domain.contains(x) {
                        return Err(ConfigError::new(
                            format!("nodes.nodes[{k}]"),
                            "node has the wrong dimension or lies outside the domain box",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_study(&self, n: usize, region: &DomainBox) -> Result<Vec<MPoly>, ConfigError> {
        match &self.study {
            Study::Residual { points_per_axis } => {
                if *points_per_axis < 2 {
                    return Err(ConfigError::new("study.points_per_axis", "need at least 2 points"));
                }
            }
            Study::Error => {}
            Study::Convergence { levels, .. } => {
                if levels.is_empty() || levels.contains(&0) {
                    return Err(ConfigError::new("study.levels", "levels must be nonempty and positive"));
                }
            }
            Study::Wkb {
                k,
                t_seq,
                probes,
                grid_points,
                drift,
                transport,
                ..
            } => {
                let m = self.build.order();
                if m < 1 || m < 2 * k {
                    return Err(ConfigError::new(
                        "build.m",
                        format!("WKB order K = {k} needs an hsp build with m >= max(1, 2K)"),
                    ));
                }
                if t_seq.len() < 4
                    || t_seq.iter().any(|t| !(*t > 0.0) || !t.is_finite())
                    || t_seq.windows(2).any(|w| !(w[1] < w[0]))
                {
                    return Err(ConfigError::new(
                        "study.t_seq",
                        "need at least 4 positive, strictly decreasing times",
                    ));
                }
                if *grid_points < 5 {
                    return Err(ConfigError::new("study.grid_points", "need at least 5 points per axis"));
                }
                for (i, x) in probes.iter().enumerate() {
                    if !region.contains(x) {
                        return Err(ConfigError::new(
                            format!("study.probes[{i}]"),
                            "probe has the wrong dimension or lies outside the region",
                        ));
                    }
                }
                if !(transport.r0 > 0.0 && transport.step > 0.0 && transport.max_length > 0.0) {
                    return Err(ConfigError::new("study.transport", "r0, step and max_length must be positive"));
                }
                if drift.is_empty() {
                    return Ok(vec![MPoly::zero(n); n]);
                }
                if drift.len() != n {
                    return Err(ConfigError::new("study.drift", format!("expected {n} components")));
                }
                return drift
                    .iter()
                    .enumerate()
                    .map(|(i, t)| poly(n, t, &format!("study.drift[{i}]")))
                    .collect();
            }
            Study::LocalSeries { order } => {
                if !(2..=crate::local_series::DEFAULT_MAX_SERIES_ORDER).contains(order) {
                    return Err(ConfigError::new(
                        "study.order",
                        format!(
                            "order must be in 2..={}",
                            crate::local_series::DEFAULT_MAX_SERIES_ORDER
                        ),
                    ));
                }
            }
        }
        Ok(Vec::new())
    }
}

fn check_box(b: &DomainBox, path: &str) -> Result<(), ConfigError> {
    if b.lower.is_empty() || b.lower.len() != b.upper.len() {
        return Err(ConfigError::new(path, "lower and upper bounds must be nonempty and equally long"));
    }
    let ok = b
        .lower
        .iter()
        .zip(&b.upper)
        .all(|(a, c)| a.is_finite() && c.is_finite() && a < c);
    if !ok {
        return Err(ConfigError::new(path, "every axis needs finite bounds with lower < upper"));
    }
    Ok(())
}

fn poly(n: usize, terms: &[Term], path: &str) -> Result<MPoly, ConfigError> {
    for (t, term) in terms.iter().enumerate() {
        if term.exponents.len() != n {
            return Err(ConfigError::new(
                format!("{path}[{t}].exponents"),
                format!("expected {n} exponents"),
            ));
        }
        if !term.coefficient.is_finite() {
            return Err(ConfigError::new(format!("{path}[{t}].coefficient"), "not finite"));
        }
    }
    Ok(MPoly::from_terms(
        n,
        terms
            .iter()
            .map(|t| (MultiIndex::new(t.exponents.clone()), t.coefficient)),
    ))
}
