//! Study dispatch behind the `sqdist run` command.

use crate::config::{BuildMode, ConfigError, Resolved, RunConfig, Study};
use crate::eikonal::{Approximant, ResidualReport};
use crate::error::Error;
use crate::interpolate::{build_hsp_traced, build_lp_traced, trace_csv, Build, NodeSet};
use crate::local_series::taylor_coeffs;
use crate::metric::MetricField;
use crate::multiindex::enumerate_up_to;
use crate::oracles::{
    convergence_table, gradient_bound_check, reference_distance, sobolev_measure, SqrtApproximant,
};
use crate::report::{emit_report, json, IoFailure};
use crate::wkb::{assemble_kernel, varadhan_check, KernelProbe, WkbSet};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub trace: bool,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical { context: &'static str, source: Error },
    Io(IoFailure),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Numerical { .. } | RunError::Io(_) => EXIT_NUMERICAL,
        }
    }

    /// Machine-readable record for stderr.
    pub fn record(&self) -> Value {
        match self {
            RunError::Config(e) => json!({
                "error": "config_invalid",
                "path": e.path,
                "message": e.message,
            }),
            RunError::Numerical { context, source } => json!({
                "error": variant_name(source),
                "context": context,
                "message": source.to_string(),
            }),
            RunError::Io(e) => json!({
                "error": "io_failure",
                "path": e.path.display().to_string(),
                "message": e.message,
            }),
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Numerical { context, source } => write!(f, "{context}: {source}"),
            RunError::Io(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<IoFailure> for RunError {
    fn from(e: IoFailure) -> Self {
        RunError::Io(e)
    }
}

/// `NoRealRoot { .. }` → `no_real_root`.
fn variant_name(e: &Error) -> String {
    let dbg = format!("{e:?}");
    let name = dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("");
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_uppercase() {
            if i > 0 {
                out.push('_');
            }
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

fn numerical<T>(context: &'static str, r: crate::Result<T>) -> Result<T, RunError> {
    r.map_err(|source| RunError::Numerical { context, source })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ConfigError::new("", format!("cannot read {}: {e}", path.display()))
    })?;
    run(&RunConfig::from_json(&text)?, opts)
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn put(&mut self, name: &str, contents: &str) -> Result<(), IoFailure> {
        let path = self.dir.join(name);
        emit_report(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let res = cfg.resolve()?;
    let dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.outputs.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut w = Writer {
        dir,
        files: Vec::new(),
    };
    let y = cfg.base_point.as_slice();
    let mut summary = json!({
        "study": cfg.study.name(),
        "dim": res.metric.dim(),
        "base_point": y,
    });

    if let Study::LocalSeries { order } = cfg.study {
        let series = numerical("local series", taylor_coeffs(&res.metric, y, order))?;
        w.put("local_series.csv", &series.to_csv())?;
        summary["coefficients"] = json!(series.iter().count());
        w.put("summary.json", &json(&summary))?;
        return Ok(RunOutcome {
            out_dir: w.dir,
            files: w.files,
        });
    }

    let metric = Arc::new(res.metric.clone());
    if let Study::Convergence { levels, layout } = &cfg.study {
        let oracle = numerical("reference distance", reference_distance(&res.metric, y))?;
        let table = numerical(
            "convergence study",
            convergence_table(
                metric,
                oracle.as_ref(),
                y,
                &res.region,
                levels,
                *layout,
                &cfg.build_spec(),
                &res.norm,
            ),
        )?;
        w.put("convergence.csv", &table.to_csv())?;
        w.put("convergence.json", &json(&table))?;
        summary["fitted_order"] = json!(table.fitted_order);
        summary["exact"] = json!(table.exact);
        w.put("summary.json", &json(&summary))?;
        return Ok(RunOutcome {
            out_dir: w.dir,
            files: w.files,
        });
    }

    let Build { approximant: q, trace } = build(cfg, &res, metric)?;
    if opts.trace {
        w.put("trace.csv", &trace_csv(&trace))?;
    }
    summary["nodes"] = json!(q.nodes().len());
    summary["terms"] = json!(q.terms().len());
    summary["enforced_order"] = json!(q.enforced_order());

    match &cfg.study {
        Study::Residual { points_per_axis } => {
            let n = q.dim();
            let alphas = enumerate_up_to(n, q.enforced_order());
            let grid = res.region.grid(*points_per_axis);
            let report = numerical("residual study", ResidualReport::collect(&q, &grid, &alphas))?;
            w.put("residual.csv", &report.to_csv(n))?;
            summary["max_abs_residual"] = json!(report.max_abs());
            summary["max_abs_enforced_residual"] = json!(enforced_max(&q)?);
        }
        Study::Error => {
            let oracle = numerical("reference distance", reference_distance(&res.metric, y))?;
            let m = sobolev_measure(&SqrtApproximant(&q), oracle.as_ref(), &res.norm, &res.region);
            let bound = numerical(
                "gradient bound",
                gradient_bound_check(&q, &res.region.grid(res.norm.points_per_axis.min(101))),
            )?;
            let record = json!({
                "s": res.norm.s,
                "p": res.norm.p,
                "points_per_axis": res.norm.points_per_axis,
                "error": m.error,
                "excluded": m.excluded,
                "gradient_bound": bound,
            });
            w.put("error.json", &json(&record))?;
            summary["error"] = json!(m.error);
        }
        Study::Wkb {
            k,
            t_seq,
            probes,
            grid_points,
            boundary,
            transport,
            ..
        } => {
            let set = numerical(
                "WKB coefficients",
                WkbSet::compute(q, res.drift.clone(), &res.region, *grid_points, *k, *boundary, transport),
            )?;
            w.put("wkb_coefficients.csv", &set.to_csv())?;
            let mut kernel = Vec::new();
            let mut checks = Vec::new();
            for x in probes {
                for &t in t_seq {
                    kernel.push(KernelProbe {
                        t,
                        x: x.clone(),
                        y: y.to_vec(),
                        p: assemble_kernel(t, x, y, &set),
                    });
                }
                checks.push(numerical("Varadhan check", varadhan_check(&set, x, y, t_seq))?);
            }
            w.put("kernel.json", &json(&kernel))?;
            w.put("varadhan.json", &json(&checks))?;
            let worst = checks.iter().map(|c| c.abs_diff).fold(0.0, f64::max);
            summary["max_varadhan_abs_diff"] = json!(worst);
        }
        Study::Convergence { .. } | Study::LocalSeries { .. } => unreachable!("handled above"),
    }
    w.put("summary.json", &json(&summary))?;
    Ok(RunOutcome {
        out_dir: w.dir,
        files: w.files,
    })
}

fn build(cfg: &RunConfig, res: &Resolved, metric: Arc<MetricField>) -> Result<Build, RunError> {
    let nodes = numerical(
        "node generation",
        NodeSet::generate(&cfg.base_point, res.domain.clone(), &cfg.nodes),
    )?;
    let spec = cfg.build_spec();
    match cfg.build {
        BuildMode::Lp => numerical("L-stage build", build_lp_traced(metric, &nodes, &spec)),
        BuildMode::Hsp { .. } => numerical("hsp build", build_hsp_traced(metric, &nodes, &spec)),
    }
}

/// Largest `|∂^α r|` over the enforced `(node, α)` pairs.
fn enforced_max(q: &Approximant) -> Result<f64, RunError> {
    let mut worst: f64 = 0.0;
    for (k, alpha) in q.enforced_set() {
        let r = numerical("residual study", q.residual_derivative(&q.nodes()[*k], alpha))?;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_are_snake_case() {
        assert_eq!(variant_name(&Error::NoRealRoot { node: 3 }), "no_real_root");
        assert_eq!(variant_name(&Error::NoConvergence), "no_convergence");
        assert_eq!(variant_name(&Error::GridTooCoarse("x".into())), "grid_too_coarse");
    }
}
