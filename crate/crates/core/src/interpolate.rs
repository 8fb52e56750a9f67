//! Node-wise construction of squared-distance approximants.
//!
//! [`build_lp`] appends one term per node and solves the (quadratic) eikonal
//! equation there for its coefficient. [`build_hsp`] then appends terms
//! `c · Π_{l≠k}(x−x^l)^{β+𝟏}(x−x^k)^β/β!` stage by stage and solves the
//! differentiated eikonal equations, each linear in its new coefficient.
//!
//! Every term vanishes to high order at all nodes other than its own, and at
//! its own node only touches derivatives `∂^γ` with `γ ≥ β`. Together with
//! the enforcement order below this makes each enforced equation final: no
//! later step changes it.

use crate::domain::{dist, DomainBox};
use crate::eikonal::{residual_derivative_from_jet, Approximant, CorrectionTerm, TermKind};
use crate::error::{Error, Result};
use crate::metric::MetricField;
use crate::multiindex::{enumerate, enumerate_up_to, MultiIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// How interpolation nodes are laid out in a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodePolicy {
    /// Tensor grid with `intervals + 1` points per axis, endpoints included.
    Equispaced { intervals: usize },
    /// One node per tensor cell (`intervals` cells per axis), placed at the
    /// cell centre plus a seeded uniform offset of up to a quarter cell.
    Jittered { intervals: usize, seed: u64 },
    /// User-supplied nodes (the base point is prepended).
    Explicit { nodes: Vec<Vec<f64>> },
}

impl Default for NodePolicy {
    fn default() -> Self {
        NodePolicy::Jittered {
            intervals: 4,
            seed: 7,
        }
    }
}

/// Ordered interpolation points `x⁰ = y, x¹, …, x^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet {
    nodes: Vec<Vec<f64>>,
    domain: DomainBox,
}

impl NodeSet {
    /// `nodes[0]` must be the base point. Nodes must be pairwise distinct and
    /// lie in `domain`.
    pub fn new(nodes: Vec<Vec<f64>>, domain: DomainBox) -> Result<NodeSet> {
        if nodes.is_empty() {
            return Err(Error::InvalidNodes("no base point".into()));
        }
        for (k, x) in nodes.iter().enumerate() {
            if x.len() != domain.dim() {
                return Err(Error::DimensionMismatch {
                    expected: domain.dim(),
                    got: x.len(),
                });
            }
            if !domain.contains(x) {
                return Err(Error::InvalidNodes(format!("node {k} lies outside the box")));
            }
            if nodes[..k].iter().any(|p| p == x) {
                return Err(Error::InvalidNodes(format!("node {k} is repeated")));
            }
        }
        Ok(NodeSet { nodes, domain })
    }

    /// Generates nodes by `policy` in `domain`, drops any coinciding with the
    /// base point, and orders the rest by distance from it.
    pub fn generate(y: &[f64], domain: DomainBox, policy: &NodePolicy) -> Result<NodeSet> {
        let n = domain.dim();
        let mut pts: Vec<Vec<f64>> = match policy {
            NodePolicy::Equispaced { intervals } => {
                if *intervals == 0 {
                    return Err(Error::InvalidNodes("intervals must be positive".into()));
                }
                domain.grid(intervals + 1)
            }
            NodePolicy::Jittered { intervals, seed } => {
                if *intervals == 0 {
                    return Err(Error::InvalidNodes("intervals must be positive".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let widths = domain.widths();
                let cells = crate::domain::tensor(
                    &(0..n)
                        .map(|_| (0..*intervals).map(|c| c as f64).collect())
                        .collect::<Vec<_>>(),
                );
                cells
                    .into_iter()
                    .map(|cell| {
                        (0..n)
                            .map(|i| {
                                let w = widths[i] / *intervals as f64;
                                let jitter: f64 = rng.gen_range(-0.25..0.25);
                                domain.lower[i] + w * (cell[i] + 0.5 + jitter)
                            })
                            .collect()
                    })
                    .collect()
            }
            NodePolicy::Explicit { nodes } => nodes.clone(),
        };
        pts.retain(|p| p.as_slice() != y);
        let mut keyed: Vec<(f64, usize, Vec<f64>)> = pts
            .into_iter()
            .enumerate()
            .map(|(k, p)| (dist(&p, y), k, p))
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut nodes = vec![y.to_vec()];
        nodes.extend(keyed.into_iter().map(|(_, _, p)| p));
        NodeSet::new(nodes, domain)
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn base_point(&self) -> &[f64] {
        &self.nodes[0]
    }

    /// Number of nodes besides the base point.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    /// Largest distance from a sample of the box to its nearest node.
    pub fn mesh_size(&self, per_axis: usize) -> f64 {
        self.domain
            .grid(per_axis)
            .iter()
            .map(|p| {
                self.nodes
                    .iter()
                    .map(|x| dist(p, x))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

/// Which root of the per-node quadratic to keep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootPolicy {
    /// Smallest magnitude; ties go to the non-negative root.
    #[default]
    SmallestMagnitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildSpec {
    /// Highest derivative order of the eikonal equation enforced at nodes.
    pub m: usize,
    #[serde(default)]
    pub root_policy: RootPolicy,
    /// Defects at or below `skip_tol · max(1, |q²|)` are treated as solved
    /// and get a zero coefficient.
    #[serde(default = "default_skip_tol")]
    pub skip_tol: f64,
    /// Minimum magnitude of the coefficient multiplier (with the node
    /// product factored out) before an enforcement counts as singular.
    #[serde(default = "default_singular_tol")]
    pub singular_tol: f64,
}

fn default_skip_tol() -> f64 {
    1e-14
}

fn default_singular_tol() -> f64 {
    1e-12
}

impl BuildSpec {
    pub fn new(m: usize) -> Self {
        BuildSpec {
            m,
            root_policy: RootPolicy::default(),
            skip_tol: default_skip_tol(),
            singular_tol: default_singular_tol(),
        }
    }
}

/// One row of the construction trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub stage: String,
    pub beta: Option<MultiIndex>,
    pub node: usize,
    pub coefficient: f64,
    pub residual_after: f64,
}

/// Builder output with the per-coefficient trace.
#[derive(Clone, Debug)]
pub struct Build {
    pub approximant: Approximant,
    pub trace: Vec<TraceRow>,
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("stage,beta,node,coefficient,residual_after\n");
    for r in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.stage,
            r.beta.as_ref().map(|b| b.dashed()).unwrap_or_default(),
            r.node,
            crate::report::fmt_f64(r.coefficient),
            crate::report::fmt_f64(r.residual_after)
        ));
    }
    out
}

/// Roots of `a2 c² + a1 c + a0 = 0`, selected per policy.
fn select_root(a2: f64, a1: f64, a0: f64, node: usize) -> Result<f64> {
    if a2 == 0.0 {
        if a1 == 0.0 {
            return Err(Error::NoRealRoot { node });
        }
        return Ok(-a0 / a1);
    }
    let disc = a1 * a1 - 4.0 * a2 * a0;
    if disc < 0.0 {
        return Err(Error::NoRealRoot { node });
    }
    let s = disc.sqrt();
    let qq = -0.5 * (a1 + if a1 >= 0.0 { s } else { -s });
    let r1 = qq / a2;
    let r2 = if qq != 0.0 { a0 / qq } else { r1 };
    let pick = match r1.abs().total_cmp(&r2.abs()) {
        std::cmp::Ordering::Less => r1,
        std::cmp::Ordering::Greater => r2,
        std::cmp::Ordering::Equal => r1.max(r2),
    };
    Ok(pick)
}

pub fn build_lp(metric: Arc<MetricField>, nodes: &NodeSet) -> Result<Approximant> {
    build_lp_traced(metric, nodes, &BuildSpec::new(0)).map(|b| b.approximant)
}

pub fn build_lp_traced(
    metric: Arc<MetricField>,
    nodes: &NodeSet,
    spec: &BuildSpec,
) -> Result<Build> {
    if nodes.domain().dim() != metric.dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.dim(),
            got: nodes.domain().dim(),
        });
    }
    for x in nodes.nodes() {
        metric.a_spd(x)?;
    }
    let n = metric.dim();
    let pts = nodes.nodes().to_vec();
    let mut q = Approximant::base(metric.clone(), pts.clone())?;
    let mut trace = Vec::with_capacity(pts.len());
    for j in 1..pts.len() {
        let xj = &pts[j];
        let product: f64 = pts[..j]
            .iter()
            .map(|r| (0..n).map(|l| (xj[l] - r[l]).powi(2)).product::<f64>())
            .product();
        if product == 0.0 {
            return Err(Error::DegenerateBasis { node: j });
        }
        let kind = TermKind::LStage {
            node: j,
            inverse: metric.invert_at(xj)?,
        };
        let a = metric.a_spd(xj)?;
        let jq = q.jet(xj, 1);
        let jb = q.basis_jet(&kind, xj, 1);
        let grad = |jet: &crate::jet::Jet| -> Vec<f64> {
            (0..n)
                .map(|i| jet.derivative(&MultiIndex::unit(n, i)))
                .collect()
        };
        let (gq, gb) = (grad(&jq), grad(&jb));
        let agb = a.apply(&gb);
        let a2 = 0.25 * gb.iter().zip(&agb).map(|(u, v)| u * v).sum::<f64>();
        let a1 = 0.5 * gq.iter().zip(&agb).map(|(u, v)| u * v).sum::<f64>() - jb.value();
        let a0 = residual_derivative_from_jet(&metric, &jq, xj, &MultiIndex::zero(n))?;
        let c = if a0.abs() <= spec.skip_tol * jq.value().abs().max(1.0) {
            0.0
        } else {
            select_root(a2, a1, a0, j)?
        };
        q.push_term(CorrectionTerm {
            coefficient: c,
            kind,
        });
        q.record_enforced(j, MultiIndex::zero(n));
        trace.push(TraceRow {
            stage: "lp".into(),
            beta: None,
            node: j,
            coefficient: c,
            residual_after: q.residual(xj)?,
        });
    }
    Ok(Build {
        approximant: q,
        trace,
    })
}

pub fn build_hsp(metric: Arc<MetricField>, nodes: &NodeSet, spec: &BuildSpec) -> Result<Approximant> {
    build_hsp_traced(metric, nodes, spec).map(|b| b.approximant)
}

/// Derivative equation enforced by the term `(β, k)`: `β` itself at the base
/// point, `β − 1_i` with `i` the last nonzero component elsewhere.
pub fn enforced_alpha(beta: &MultiIndex, node: usize) -> MultiIndex {
    if node == 0 {
        beta.clone()
    } else {
        let i = beta.last_nonzero().expect("stage multiindices are nonzero");
        beta.decrement(i, 1)
    }
}

pub fn build_hsp_traced(
    metric: Arc<MetricField>,
    nodes: &NodeSet,
    spec: &BuildSpec,
) -> Result<Build> {
    if spec.m < 1 {
        return Err(Error::Precondition("build_hsp needs m >= 1".into()));
    }
    let Build {
        approximant: mut q,
        mut trace,
    } = build_lp_traced(metric.clone(), nodes, spec)?;
    let n = metric.dim();
    let pts = nodes.nodes().to_vec();
    for stage in 2..=spec.m + 1 {
        for beta in enumerate(n, stage) {
            for k in 0..pts.len() {
                if k == 0 && stage == 2 {
                    continue;
                }
                let alpha = enforced_alpha(&beta, k);
                let c = enforce_one(&mut q, &metric, &pts, &beta, k, &alpha, spec)?;
                let residual_after = q.residual_derivative(&pts[k], &alpha)?;
                trace.push(TraceRow {
                    stage: format!("h{stage}"),
                    beta: Some(beta.clone()),
                    node: k,
                    coefficient: c,
                    residual_after,
                });
            }
        }
        if stage == 2 {
            // orders 1 and 2 hold identically at the base point because the
            // gradient vanishes there and the Hessian is exactly 2A⁻¹(y)
            for alpha in enumerate_up_to(n, 2).into_iter().filter(|a| !a.is_zero()) {
                q.record_enforced(0, alpha);
            }
        }
    }
    q.set_enforced_order(spec.m);
    Ok(Build {
        approximant: q,
        trace,
    })
}

/// Appends the term `(β, k)` and solves the `∂^α` equation at `x^k` for its
/// coefficient. Returns the coefficient.
fn enforce_one(
    q: &mut Approximant,
    metric: &MetricField,
    pts: &[Vec<f64>],
    beta: &MultiIndex,
    k: usize,
    alpha: &MultiIndex,
    spec: &BuildSpec,
) -> Result<f64> {
    let n = metric.dim();
    let xk = &pts[k];
    let node_product: f64 = pts
        .iter()
        .enumerate()
        .filter(|(l, _)| *l != k)
        .map(|(_, xl)| {
            (0..n)
                .map(|i| (xk[i] - xl[i]).powi(beta.get(i) as i32 + 1))
                .product::<f64>()
        })
        .product();
    let singular = || Error::SingularEnforcement {
        beta: beta.clone(),
        node: k,
    };
    if node_product == 0.0 || !node_product.is_finite() {
        return Err(singular());
    }
    let jet = q.jet(xk, alpha.order() + 1);
    let a = metric.a_spd(xk)?;
    let multiplier = if k == 0 {
        // ∂^β eikonal at y: (½ Σ_m β_m (A·∇²q)_mm − 1) · ∂^β T
        let mut s = 0.0;
        for m in 0..n {
            if beta.get(m) == 0 {
                continue;
            }
            let mut amm = 0.0;
            for j in 0..n {
                let h = jet.derivative(&MultiIndex::unit(n, m).with_increment(j));
                amm += a.get(m, j) * h;
            }
            s += beta.get(m) as f64 * amm;
        }
        0.5 * s - 1.0
    } else {
        // ½ (A ∇q)_i with β = α + 1_i
        let i = beta.last_nonzero().expect("nonzero beta");
        let grad: Vec<f64> = (0..n)
            .map(|j| jet.derivative(&MultiIndex::unit(n, j)))
            .collect();
        0.5 * a.apply(&grad)[i]
    };
    if multiplier.abs() < spec.singular_tol || !multiplier.is_finite() {
        return Err(singular());
    }
    let defect = residual_derivative_from_jet(metric, &jet, xk, alpha)?;
    let c = if defect.abs() <= spec.skip_tol * jet.value().abs().max(1.0) {
        0.0
    } else {
        -defect / (multiplier * node_product)
    };
    q.push_term(CorrectionTerm {
        coefficient: c,
        kind: TermKind::HStage {
            beta: beta.clone(),
            node: k,
        },
    });
    q.record_enforced(k, alpha.clone());
    Ok(c)
}
