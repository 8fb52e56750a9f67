//! Local Taylor coefficients of `d²(·, y)` at the base point for diagonal
//! diffusion matrices.
//!
//! Coefficients are undivided: `d²(x, y) ≈ Σ_{2≤|β|≤M} d_β (x − y)^β`. The
//! recursion runs in coordinates where `A(y) = I`, where the eikonal equation
//! `d² = ¼ Σ_i λ_i (∂_i d²)²` gives, for `|β| ≥ 3`,
//!
//! ```text
//! (1 − |β|) d_β = Σ_i ℓ_i^{β−2e_i}
//!              + Σ_i Σ_{α+γ=β, |α|≥1} ℓ_i^α γ_i d_γ
//!              + ¼ Σ_i Σ_{α+γ+δ−2e_i=β} ℓ_i^α γ_i δ_i d_γ d_δ
//! ```
//!
//! with `ℓ_i^α = ∂^α λ_i(0)/α!` and `|γ|, |δ| ≥ 3`.

use crate::error::{Error, Result};
use crate::metric::MetricField;
use crate::multiindex::{enumerate, MultiIndex};
use std::collections::BTreeMap;

pub const DEFAULT_MAX_SERIES_ORDER: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesCoeffs {
    y: Vec<f64>,
    order: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl SeriesCoeffs {
    pub fn base_point(&self) -> &[f64] {
        &self.y
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `d_β`; zero for indices outside `2 ≤ |β| ≤ M`.
    pub fn get(&self, beta: &MultiIndex) -> f64 {
        self.coeffs.get(beta).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.coeffs.iter().map(|(b, c)| (b, *c))
    }

    /// Rows ordered by total degree, then grlex within a degree.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta,coefficient\n");
        let n = self.y.len();
        for k in 2..=self.order {
            for beta in enumerate(n, k) {
                out.push_str(&format!(
                    "{},{}\n",
                    beta.dashed(),
                    crate::report::fmt_f64(self.get(&beta))
                ));
            }
        }
        out
    }
}

/// Series of `d²(·, y)` up to total order `order`, with the default order cap.
pub fn taylor_coeffs(metric: &MetricField, y: &[f64], order: usize) -> Result<SeriesCoeffs> {
    taylor_coeffs_capped(metric, y, order, DEFAULT_MAX_SERIES_ORDER)
}

pub fn taylor_coeffs_capped(
    metric: &MetricField,
    y: &[f64],
    order: usize,
    max_order: usize,
) -> Result<SeriesCoeffs> {
    let n = metric.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if let Some((i, j)) = metric.is_diagonal() {
        return Err(Error::NotDiagonal { i, j });
    }
    if order < 2 || order > max_order {
        return Err(Error::Precondition(format!(
            "series order {order} outside 2..={max_order}"
        )));
    }
    let diag: Vec<f64> = (0..n).map(|i| metric.entry(i, i).eval(y)).collect();
    if diag.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::NotPositiveDefinite { point: y.to_vec() });
    }
    let s: Vec<f64> = diag.iter().map(|a| a.sqrt()).collect();
    let scale = |m: &MultiIndex| -> f64 { (0..n).map(|i| s[i].powi(m.get(i) as i32)).product() };

    // ℓ_i^α for 1 ≤ |α| ≤ order − 2 in normalized coordinates.
    let mut ell: Vec<BTreeMap<MultiIndex, f64>> = vec![BTreeMap::new(); n];
    for (i, li) in ell.iter_mut().enumerate() {
        li.insert(MultiIndex::zero(n), 1.0);
        for k in 1..=order.saturating_sub(2) {
            for alpha in enumerate(n, k) {
                let v = metric.entry(i, i).eval_derivative(&alpha, y) * scale(&alpha)
                    / alpha.factorial() as f64
                    / diag[i];
                if v != 0.0 {
                    li.insert(alpha, v);
                }
            }
        }
    }
    let l = |i: usize, a: &MultiIndex| ell[i].get(a).copied().unwrap_or(0.0);

    let mut dn: BTreeMap<MultiIndex, f64> = BTreeMap::new();
    for i in 0..n {
        dn.insert(MultiIndex::unit(n, i).add(&MultiIndex::unit(n, i)), 1.0);
    }
    for k in 3..=order {
        for beta in enumerate(n, k) {
            let mut acc = 0.0;
            for i in 0..n {
                let two_i = MultiIndex::unit(n, i).add(&MultiIndex::unit(n, i));
                if let Some(a) = beta.checked_sub(&two_i) {
                    acc += l(i, &a);
                }
                for alpha in beta.sub_indices() {
                    if alpha.order() == 0 {
                        continue;
                    }
                    let gamma = beta.checked_sub(&alpha).expect("alpha ≤ beta");
                    if gamma.order() < 3 || gamma.get(i) == 0 {
                        continue;
                    }
                    acc += l(i, &alpha) * gamma.get(i) as f64 * dn[&gamma];
                }
                let target = beta.add(&two_i);
                let mut quad = 0.0;
                for alpha in target.sub_indices() {
                    let la = l(i, &alpha);
                    if la == 0.0 {
                        continue;
                    }
                    let rest = target.checked_sub(&alpha).expect("alpha ≤ target");
                    if rest.order() < 6 {
                        continue;
                    }
                    for gamma in rest.sub_indices() {
                        let delta = rest.checked_sub(&gamma).expect("gamma ≤ rest");
                        if gamma.order() < 3
                            || delta.order() < 3
                            || gamma.get(i) == 0
                            || delta.get(i) == 0
                        {
                            continue;
                        }
                        quad += la
                            * (gamma.get(i) * delta.get(i)) as f64
                            * dn[&gamma]
                            * dn[&delta];
                    }
                }
                acc += 0.25 * quad;
            }
            dn.insert(beta.clone(), acc / (1.0 - k as f64));
        }
    }

    let mut coeffs = BTreeMap::new();
    for k in 2..=order {
        for beta in enumerate(n, k) {
            let v = dn.get(&beta).copied().unwrap_or(0.0) / scale(&beta);
            coeffs.insert(beta, v);
        }
    }
    Ok(SeriesCoeffs {
        y: y.to_vec(),
        order,
        coeffs,
    })
}

/// Truncated local representation; the remainder is not estimated, so the
/// value is only meaningful close to the base point.
pub fn series_eval(series: &SeriesCoeffs, x: &[f64]) -> f64 {
    let dx: Vec<f64> = x.iter().zip(&series.y).map(|(a, b)| a - b).collect();
    series.coeffs.iter().map(|(b, c)| c * b.monomial(&dx)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainBox;

    #[test]
    fn log1d_low_orders() {
        let m = MetricField::log1d();
        let s = taylor_coeffs(&m, &[0.0], 5).unwrap();
        let c = |k: u32| s.get(&MultiIndex::new(vec![k]));
        assert!((c(2) - 1.0).abs() < 1e-15);
        assert!((c(3) + 1.0).abs() < 1e-14);
        assert!((c(4) - 11.0 / 12.0).abs() < 1e-14);
        assert!((c(5) + 5.0 / 6.0).abs() < 1e-14);
        let v = series_eval(&taylor_coeffs(&m, &[0.0], 4).unwrap(), &[0.1]);
        assert!((v - (0.01 - 0.001 + 11.0 / 12.0 * 1e-4)).abs() < 1e-15);
        assert!((v - 1.1f64.ln().powi(2)).abs() < 1e-5);
    }

    #[test]
    fn shifted_base_point_matches_log_ratio() {
        // d = ln((1+x)/(1+y)); at y = 0.3 the quadratic part is Δx²/1.69.
        let m = MetricField::log1d();
        let s = taylor_coeffs(&m, &[0.3], 8).unwrap();
        let x = 0.33;
        let exact = (1.33f64 / 1.3).ln().powi(2);
        assert!((series_eval(&s, &[x]) - exact).abs() < 1e-13);
        assert!((s.get(&MultiIndex::new(vec![2])) - 1.0 / 1.69).abs() < 1e-15);
    }

    #[test]
    fn constant_diagonal_has_no_higher_terms() {
        let m = MetricField::constant(
            vec![vec![2.0, 0.0], vec![0.0, 4.0]],
            DomainBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]),
        )
        .unwrap();
        let s = taylor_coeffs(&m, &[0.2, -0.1], 6).unwrap();
        for (b, c) in s.iter() {
            if b.order() >= 3 {
                assert_eq!(c, 0.0);
            }
        }
        let x = [0.5, 0.4];
        let q = 0.3f64.powi(2) / 2.0 + 0.5f64.powi(2) / 4.0;
        assert!((series_eval(&s, &x) - q).abs() < 1e-15);
        assert_eq!(series_eval(&s, &[0.2, -0.1]), 0.0);
    }

    #[test]
    fn hyperbolic_series_matches_closed_form() {
        let m = MetricField::hyperbolic_default();
        let y = [0.0, 1.0];
        let s = taylor_coeffs(&m, &y, 8).unwrap();
        let x = [0.03, 1.02];
        let dx2 = 0.03f64.powi(2) + 0.02f64.powi(2);
        let exact = (1.0 + dx2 / (2.0 * 1.02)).acosh().powi(2);
        assert!((series_eval(&s, &x) - exact).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_diagonal() {
        let m = MetricField::constant(
            vec![vec![2.0, 1.0], vec![1.0, 2.0]],
            DomainBox::unit(2),
        )
        .unwrap();
        assert_eq!(
            taylor_coeffs(&m, &[0.5, 0.5], 4).unwrap_err(),
            Error::NotDiagonal { i: 0, j: 1 }
        );
        let m = MetricField::log1d();
        assert!(matches!(
            taylor_coeffs(&m, &[0.0], 9),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let s = taylor_coeffs(&MetricField::log1d(), &[0.0], 3).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "beta,coefficient");
        assert!(lines[2].starts_with("3,"));
    }
}
