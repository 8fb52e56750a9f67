//! Squared-distance approximants and their eikonal defects.
//!
//! An approximant `q²(·, y)` is a quadratic base `⟨x−y, A⁻¹(y)(x−y)⟩` plus a
//! list of structured correction terms. Terms are never expanded into
//! monomials; derivatives are taken factor by factor through [`Jet`]s.

use crate::error::{Error, Result};
use crate::jet::{root_product_series, Jet};
use crate::metric::{MetricField, SpdMatrix};
use crate::multiindex::{MultiIndex, DEFAULT_MAX_ORDER};
use std::fmt::Write as _;
use std::sync::Arc;

/// Structured basis attached to one scalar coefficient.
#[derive(Clone, Debug, PartialEq)]
pub enum TermKind {
    /// `Π_{r<j} Π_l (x_l − x^r_l)² · ⟨x−y, A⁻¹(x^j)(x−y)⟩`.
    LStage { node: usize, inverse: SpdMatrix },
    /// `Π_{l≠k} (x − x^l)^{β+𝟏} · (x − x^k)^β / β!`.
    HStage { beta: MultiIndex, node: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionTerm {
    pub coefficient: f64,
    pub kind: TermKind,
}

/// `⟨x−y, G(x−y)⟩`.
pub fn quadratic_leading(g: &SpdMatrix, x: &[f64], y: &[f64]) -> f64 {
    let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    g.quadratic(&dx)
}

/// Jet of `⟨x−y, G(x−y)⟩` at `x`.
pub(crate) fn quadratic_jet(g: &SpdMatrix, x: &[f64], y: &[f64], order: usize) -> Jet {
    let n = x.len();
    let mut j = Jet::zero(n, order);
    let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    j.set_derivative(&MultiIndex::zero(n), g.quadratic(&dx));
    if order == 0 {
        return j;
    }
    let grad = g.apply(&dx);
    for i in 0..n {
        j.set_derivative(&MultiIndex::unit(n, i), 2.0 * grad[i]);
    }
    if order == 1 {
        return j;
    }
    for i in 0..n {
        for k in i..n {
            let m = MultiIndex::unit(n, i).with_increment(k);
            j.set_derivative(&m, 2.0 * g.get(i, k));
        }
    }
    j
}

#[derive(Clone, Debug)]
pub struct Approximant {
    metric: Arc<MetricField>,
    nodes: Vec<Vec<f64>>,
    base: SpdMatrix,
    terms: Vec<CorrectionTerm>,
    enforced: Vec<(usize, MultiIndex)>,
    order: usize,
}

impl Approximant {
    /// Base quadratic only. `nodes[0]` is the base point `y`.
    pub fn base(metric: Arc<MetricField>, nodes: Vec<Vec<f64>>) -> Result<Approximant> {
        let y = nodes
            .first()
            .ok_or_else(|| Error::InvalidNodes("node list is empty".into()))?;
        if y.len() != metric.dim() {
            return Err(Error::DimensionMismatch {
                expected: metric.dim(),
                got: y.len(),
            });
        }
        let base = metric.invert_at(y)?;
        let n = metric.dim();
        Ok(Approximant {
            metric,
            nodes,
            base,
            terms: Vec::new(),
            enforced: vec![(0, MultiIndex::zero(n))],
            order: 0,
        })
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn metric_arc(&self) -> &Arc<MetricField> {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn base_point(&self) -> &[f64] {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn base_matrix(&self) -> &SpdMatrix {
        &self.base
    }

    pub fn terms(&self) -> &[CorrectionTerm] {
        &self.terms
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient).collect()
    }

    /// Every `(node, α)` whose derivative equation was enforced, in
    /// construction order.
    pub fn enforced_set(&self) -> &[(usize, MultiIndex)] {
        &self.enforced
    }

    /// Highest derivative order of the eikonal equation enforced at every
    /// node (`m` of the build; 0 for the L-stage alone).
    pub fn enforced_order(&self) -> usize {
        self.order
    }

    /// The first `len` correction terms only, for inspecting the construction
    /// one term at a time. The enforced set is reset to the base condition.
    pub fn truncated(&self, len: usize) -> Approximant {
        let n = self.dim();
        Approximant {
            metric: self.metric.clone(),
            nodes: self.nodes.clone(),
            base: self.base.clone(),
            terms: self.terms[..len.min(self.terms.len())].to_vec(),
            enforced: vec![(0, MultiIndex::zero(n))],
            order: 0,
        }
    }

    pub(crate) fn set_enforced_order(&mut self, m: usize) {
        self.order = m;
    }

    pub(crate) fn push_term(&mut self, term: CorrectionTerm) {
        self.terms.push(term);
    }

    pub(crate) fn record_enforced(&mut self, node: usize, alpha: MultiIndex) {
        self.enforced.push((node, alpha));
    }

    /// Jet of a single basis function (without its coefficient).
    pub fn basis_jet(&self, kind: &TermKind, x: &[f64], order: usize) -> Jet {
        let n = self.dim();
        match kind {
            TermKind::LStage { node, inverse } => {
                let series: Vec<Vec<f64>> = (0..n)
                    .map(|i| {
                        root_product_series(
                            x[i],
                            self.nodes[..*node].iter().map(|r| (r[i], 2)),
                            order,
                        )
                    })
                    .collect();
                let sep = Jet::separable(&series, order);
                sep.mul(&quadratic_jet(inverse, x, self.base_point(), order))
            }
            TermKind::HStage { beta, node } => {
                let scale = 1.0 / beta.factorial() as f64;
                let series: Vec<Vec<f64>> = (0..n)
                    .map(|i| {
                        let b = beta.get(i);
                        let factors = self.nodes.iter().enumerate().map(|(l, xl)| {
                            if l == *node {
                                (xl[i], b)
                            } else {
                                (xl[i], b + 1)
                            }
                        });
                        let mut s = root_product_series(x[i], factors, order);
                        if i == 0 {
                            s.iter_mut().for_each(|v| *v *= scale);
                        }
                        s
                    })
                    .collect();
                Jet::separable(&series, order)
            }
        }
    }

    /// Jet of `q²` at `x`, truncated at `order`.
    pub fn jet(&self, x: &[f64], order: usize) -> Jet {
        let mut j = quadratic_jet(&self.base, x, self.base_point(), order);
        for t in &self.terms {
            if t.coefficient != 0.0 {
                j.add_scaled(&self.basis_jet(&t.kind, x, order), t.coefficient);
            }
        }
        j
    }

    /// `∂^α q²(x)`.
    pub fn evaluate(&self, x: &[f64], alpha: &MultiIndex) -> f64 {
        assert!(
            alpha.order() <= DEFAULT_MAX_ORDER,
            "derivative order exceeds the supported maximum"
        );
        self.jet(x, alpha.order()).derivative(alpha)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x, &MultiIndex::zero(self.dim()))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let j = self.jet(x, 1);
        (0..self.dim())
            .map(|i| j.derivative(&MultiIndex::unit(self.dim(), i)))
            .collect()
    }

    /// Eikonal defect `¼⟨∇q², A∇q²⟩ − q²` at `x`.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        self.residual_derivative(x, &MultiIndex::zero(self.dim()))
    }

    /// Defect of the `∂^α`-differentiated eikonal equation at `x`.
    pub fn residual_derivative(&self, x: &[f64], alpha: &MultiIndex) -> Result<f64> {
        let jet = self.jet(x, alpha.order() + 1);
        residual_derivative_from_jet(&self.metric, &jet, x, alpha)
    }
}

/// `∂^α(¼ Σ a_ij ∂_i q ∂_j q) − ∂^α q` from a jet of `q` of order `≥ |α|+1`,
/// expanded by the trinomial Leibniz rule over `(a_ij, ∂_i q, ∂_j q)`.
pub fn residual_derivative_from_jet(
    metric: &MetricField,
    jet: &Jet,
    x: &[f64],
    alpha: &MultiIndex,
) -> Result<f64> {
    let n = metric.dim();
    if alpha.order() == 0 {
        metric.a_spd(x)?;
    }
    let mut acc = 0.0;
    let subs = alpha.sub_indices();
    for i in 0..n {
        for j in 0..n {
            let a = metric.entry(i, j);
            if a.is_zero() {
                continue;
            }
            for a1 in &subs {
                if a1.order() > a.degree() {
                    continue;
                }
                let da = a.eval_derivative(a1, x);
                if da == 0.0 {
                    continue;
                }
                let rest = alpha.checked_sub(a1).expect("sub-index");
                let c1 = alpha.binomial(a1) as f64;
                for a2 in rest.sub_indices() {
                    let a3 = rest.checked_sub(&a2).expect("sub-index");
                    let c2 = rest.binomial(&a2) as f64;
                    acc += c1
                        * c2
                        * da
                        * jet.derivative(&a2.with_increment(i))
                        * jet.derivative(&a3.with_increment(j));
                }
            }
        }
    }
    Ok(0.25 * acc - jet.derivative(alpha))
}

/// Residual records over a set of `(point, α)` pairs.
#[derive(Clone, Debug, Default)]
pub struct ResidualReport {
    pub records: Vec<(Vec<f64>, MultiIndex, f64)>,
}

impl ResidualReport {
    pub fn collect(q: &Approximant, points: &[Vec<f64>], alphas: &[MultiIndex]) -> Result<Self> {
        let mut records = Vec::with_capacity(points.len() * alphas.len());
        for x in points {
            for a in alphas {
                records.push((x.clone(), a.clone(), q.residual_derivative(x, a)?));
            }
        }
        Ok(ResidualReport { records })
    }

    pub fn max_abs(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.2.abs())
            .fold(0.0, f64::max)
    }

    /// Discrete `L^p` mean over the records (equal weights).
    pub fn lp_mean(&self, p: f64) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let s: f64 = self.records.iter().map(|r| r.2.abs().powf(p)).sum();
        (s / self.records.len() as f64).powf(1.0 / p)
    }

    /// CSV with columns `x1..xn,alpha,residual`.
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let _ = writeln!(out, "{},alpha,residual", header.join(","));
        for (x, a, r) in &self.records {
            let xs: Vec<String> = x.iter().map(|v| crate::report::fmt_f64(*v)).collect();
            let _ = writeln!(
                out,
                "{},{},{}",
                xs.join(","),
                a.dashed(),
                crate::report::fmt_f64(*r)
            );
        }
        out
    }
}
