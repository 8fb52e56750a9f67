//! Diffusion matrix fields `A(x) = (a_ij(x))` and the geometry derived from
//! them. The metric tensor is `g = A⁻¹`; its derivatives are obtained from
//! `∂g = −A⁻¹ (∂A) A⁻¹` with exact polynomial derivatives of `A`.

use crate::domain::DomainBox;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::multiindex::MultiIndex;
use crate::poly::MPoly;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default number of SPD samples per axis over the domain box.
pub const SPD_SAMPLES_PER_AXIS: usize = 9;

/// Built-in metrics with an independent reference distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Catalog {
    /// Constant SPD matrix.
    Constant { matrix: Vec<Vec<f64>> },
    /// `A(x) = (1+x)²` on `[0, 0.9]`; `d(x, y) = |ln((1+x)/(1+y))|`.
    Log1d,
    /// `A = diag(x₂², x₂²)` on a box with `x₂ ≥ 0.5`.
    HyperbolicHalfPlane,
    /// `A = I + ε·v vᵀ` with `v = (x₁, x₂)`.
    Perturbed { epsilon: f64 },
}

/// Symmetric positive definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates by Cholesky factorisation.
    pub fn new(m: DMatrix<f64>) -> Option<SpdMatrix> {
        if !m.is_square() || (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return None;
        }
        nalgebra::Cholesky::new(m.clone()).map(|_| SpdMatrix(m))
    }

    pub fn identity(n: usize) -> SpdMatrix {
        SpdMatrix(DMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// `⟨v, M v⟩`.
    pub fn quadratic(&self, v: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.0[(i, j)] * v[j];
            }
            acc += v[i] * row;
        }
        acc
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn inverse(&self) -> SpdMatrix {
        let chol = nalgebra::Cholesky::new(self.0.clone()).expect("validated SPD");
        let inv = chol.inverse();
        SpdMatrix((&inv + inv.transpose()) * 0.5)
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

/// Christoffel symbols `Γ^κ_{μν}` at a point.
#[derive(Clone, Debug)]
pub struct Christoffel {
    n: usize,
    values: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, k: usize, mu: usize, nu: usize) -> f64 {
        self.values[(k * self.n + mu) * self.n + nu]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `−Γ^κ_{μν} v^μ v^ν` for each `κ`.
    pub fn acceleration(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut acc = 0.0;
                for mu in 0..n {
                    for nu in 0..n {
                        acc += self.get(k, mu, nu) * v[mu] * v[nu];
                    }
                }
                -acc
            })
            .collect()
    }
}

/// The diffusion matrix field with polynomial entries.
#[derive(Clone, Debug)]
pub struct MetricField {
    n: usize,
    entries: Vec<MPoly>,
    domain: DomainBox,
    catalog: Option<Catalog>,
}

/// `(A + Aᵀ)/2` entry-wise.
pub fn symmetrize(raw: &[Vec<MPoly>]) -> Vec<Vec<MPoly>> {
    let n = raw.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        raw[i][i].clone()
                    } else {
                        (&raw[i][j] + &raw[j][i]).scale(0.5)
                    }
                })
                .collect()
        })
        .collect()
}

impl MetricField {
    /// Symmetrises `raw` and checks SPD on a tensor sample of the domain box
    /// plus `extra_points`.
    pub fn new(
        raw: Vec<Vec<MPoly>>,
        domain: DomainBox,
        catalog: Option<Catalog>,
        extra_points: &[Vec<f64>],
    ) -> Result<MetricField> {
        let n = raw.len();
        if domain.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: domain.dim(),
            });
        }
        for row in &raw {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            if let Some(p) = row.iter().find(|p| p.dim() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.dim(),
                });
            }
        }
        let sym = symmetrize(&raw);
        let field = MetricField {
            n,
            entries: sym.into_iter().flatten().collect(),
            domain,
            catalog,
        };
        field.validate_spd(SPD_SAMPLES_PER_AXIS, extra_points)?;
        Ok(field)
    }

    pub fn constant(matrix: Vec<Vec<f64>>, domain: DomainBox) -> Result<MetricField> {
        let n = matrix.len();
        let raw = matrix
            .iter()
            .map(|row| row.iter().map(|&c| MPoly::constant(n, c)).collect())
            .collect();
        MetricField::new(raw, domain, Some(Catalog::Constant { matrix }), &[])
    }

    /// `A(x) = (1+x)²` on `[0, 0.9]`.
    pub fn log1d() -> MetricField {
        MetricField::log1d_on(DomainBox::new(vec![0.0], vec![0.9])).expect("catalog metric is SPD")
    }

    /// `A(x) = (1+x)²` on a box with `x > −1`.
    pub fn log1d_on(domain: DomainBox) -> Result<MetricField> {
        let x = MPoly::var(1, 0);
        let one_plus = &x + &MPoly::constant(1, 1.0);
        MetricField::new(vec![vec![&one_plus * &one_plus]], domain, Some(Catalog::Log1d), &[])
    }

    /// Poincaré half-plane: `A = diag(x₂², x₂²)`. The box must keep `x₂ > 0`.
    pub fn hyperbolic(domain: DomainBox) -> Result<MetricField> {
        if domain.dim() != 2 || domain.lower[1] <= 0.0 {
            return Err(Error::Precondition(
                "half-plane metric needs a 2D box with x2 > 0".into(),
            ));
        }
        let y = MPoly::var(2, 1);
        let ysq = &y * &y;
        let zero = MPoly::zero(2);
        MetricField::new(
            vec![vec![ysq.clone(), zero.clone()], vec![zero, ysq]],
            domain,
            Some(Catalog::HyperbolicHalfPlane),
            &[],
        )
    }

    pub fn hyperbolic_default() -> MetricField {
        MetricField::hyperbolic(DomainBox::new(vec![-1.5, 0.5], vec![1.5, 3.0]))
            .expect("catalog metric is SPD")
    }

    /// `A = I + ε·v vᵀ` with `v = (x₁, x₂)`; SPD for `ε ≥ 0`.
    pub fn perturbed(epsilon: f64, domain: DomainBox) -> Result<MetricField> {
        let x = MPoly::var(2, 0);
        let y = MPoly::var(2, 1);
        let one = MPoly::constant(2, 1.0);
        let xx = (&x * &x).scale(epsilon);
        let xy = (&x * &y).scale(epsilon);
        let yy = (&y * &y).scale(epsilon);
        MetricField::new(
            vec![vec![&one + &xx, xy.clone()], vec![xy, &one + &yy]],
            domain,
            Some(Catalog::Perturbed { epsilon }),
            &[],
        )
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn catalog(&self) -> Option<&Catalog> {
        self.catalog.as_ref()
    }

    pub fn entry(&self, i: usize, j: usize) -> &MPoly {
        &self.entries[i * self.n + j]
    }

    /// Largest polynomial degree among the entries.
    pub fn degree(&self) -> usize {
        self.entries.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn is_diagonal(&self) -> Option<(usize, usize)> {
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && !self.entry(i, j).is_zero() {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Checks SPD at `per_axis^n` box samples and at `extra_points`.
    pub fn validate_spd(&self, per_axis: usize, extra_points: &[Vec<f64>]) -> Result<()> {
        for x in self.domain.grid(per_axis).iter().chain(extra_points) {
            self.a_spd(x)?;
        }
        Ok(())
    }

    pub fn a_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j).eval(x))
    }

    pub fn a_spd(&self, x: &[f64]) -> Result<SpdMatrix> {
        SpdMatrix::new(self.a_matrix(x)).ok_or_else(|| Error::NotPositiveDefinite {
            point: x.to_vec(),
        })
    }

    /// `A(x)⁻¹`, the metric tensor `g(x)`.
    pub fn invert_at(&self, x: &[f64]) -> Result<SpdMatrix> {
        Ok(self.a_spd(x)?.inverse())
    }

    /// `∂^α a_ij(x)`.
    pub fn entry_derivative(&self, i: usize, j: usize, alpha: &MultiIndex, x: &[f64]) -> f64 {
        self.entry(i, j).eval_derivative(alpha, x)
    }

    /// Jets of all entries at `x`, row-major.
    pub fn entry_jets(&self, x: &[f64], order: usize) -> Vec<Jet> {
        self.entries
            .iter()
            .map(|p| Jet::from_poly(p, x, order))
            .collect()
    }

    /// Eigenvalues `λ₁ ≥ λ₂` of `A(x)` for `n = 2`.
    pub fn eigenvalues_2d(&self, x: &[f64]) -> Result<(f64, f64)> {
        if self.n != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: self.n,
            });
        }
        let a = self.a_spd(x)?;
        Ok(eigenvalues_2x2(a.matrix()))
    }

    /// Smallest eigenvalue of `A(x)`.
    pub fn lambda_min(&self, x: &[f64]) -> Result<f64> {
        let a = self.a_spd(x)?;
        Ok(match self.n {
            1 => a.get(0, 0),
            2 => eigenvalues_2x2(a.matrix()).1,
            _ => smallest_eigenvalue_inverse_iteration(a.matrix()),
        })
    }

    /// `Γ^κ_{μν}(x) = ½ A^{κλ}(∂_μ g_{λν} + ∂_ν g_{λμ} − ∂_λ g_{μν})`.
    pub fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        let n = self.n;
        let a = self.a_spd(x)?;
        let g = a.inverse();
        let g = g.matrix();
        // dg[m] = ∂_m g = −g (∂_m A) g
        let dg: Vec<DMatrix<f64>> = (0..n)
            .map(|m| {
                let e = MultiIndex::unit(n, m);
                let da = DMatrix::from_fn(n, n, |i, j| self.entry(i, j).eval_derivative(&e, x));
                -(g * da * g)
            })
            .collect();
        let am = a.matrix();
        let mut values = vec![0.0; n * n * n];
        for k in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += am[(k, l)]
                            * (dg[mu][(l, nu)] + dg[nu][(l, mu)] - dg[l][(mu, nu)]);
                    }
                    values[(k * n + mu) * n + nu] = 0.5 * acc;
                }
            }
        }
        Ok(Christoffel { n, values })
    }
}

/// Eigenvalues of a symmetric 2×2 matrix, `λ₁ ≥ λ₂`.
pub fn eigenvalues_2x2(m: &DMatrix<f64>) -> (f64, f64) {
    let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (half_tr * half_tr - det).max(0.0);
    let root = disc.sqrt();
    let l1 = half_tr + root;
    // half_tr - root cancels when det is small against half_tr²
    let l2 = if l1 != 0.0 && root > 0.5 * half_tr.abs() {
        det / l1
    } else {
        half_tr - root
    };
    (l1, l2)
}

/// Smallest eigenvalue of an SPD matrix: minimum Rayleigh quotient over
/// deterministic random probes, each refined by inverse iteration.
pub fn smallest_eigenvalue_inverse_iteration(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let chol = nalgebra::Cholesky::new(m.clone()).expect("SPD matrix");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best = f64::INFINITY;
    for _ in 0..4 {
        let mut v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        v /= v.norm();
        for _ in 0..60 {
            let w = chol.solve(&v);
            let norm = w.norm();
            if norm == 0.0 {
                break;
            }
            v = w / norm;
        }
        let rq = (v.transpose() * m * &v)[(0, 0)];
        best = best.min(rq);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const2(m: [[f64; 2]; 2]) -> MetricField {
        MetricField::constant(
            m.iter().map(|r| r.to_vec()).collect(),
            DomainBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn symmetrize_examples() {
        let c = |v: f64| MPoly::constant(2, v);
        let s = symmetrize(&[vec![c(1.0), c(2.0)], vec![c(0.0), c(1.0)]]);
        for row in &s {
            for p in row {
                assert_eq!(p.eval(&[0.3, 0.4]), 1.0);
            }
        }
        let x1 = MPoly::var(2, 0);
        let x2 = MPoly::var(2, 1);
        let s = symmetrize(&[vec![x1.clone(), x2.clone()], vec![MPoly::zero(2), c(1.0)]]);
        assert_eq!(s[0][0], x1);
        assert_eq!(s[0][1], x2.scale(0.5));
        assert_eq!(s[1][0], x2.scale(0.5));
        assert_eq!(symmetrize(&s), s);
    }

    #[test]
    fn invert_examples() {
        let m = const2([[2.0, 0.0], [0.0, 4.0]]);
        let g = m.invert_at(&[0.0, 0.0]).unwrap();
        assert!((g.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((g.get(1, 1) - 0.25).abs() < 1e-15);
        let m = const2([[2.0, 1.0], [1.0, 2.0]]);
        let g = m.invert_at(&[0.2, 0.1]).unwrap();
        let expect = [[2.0 / 3.0, -1.0 / 3.0], [-1.0 / 3.0, 2.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.get(i, j) - expect[i][j]).abs() < 1e-14);
            }
        }
        let prod = m.a_matrix(&[0.0, 0.0]) * g.matrix();
        assert!((prod - DMatrix::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let r = MetricField::constant(
            vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            DomainBox::unit(2),
        );
        assert!(matches!(r, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn eigenvalue_examples() {
        let (l1, l2) = const2([[2.0, 1.0], [1.0, 2.0]]).eigenvalues_2d(&[0.0, 0.0]).unwrap();
        assert!((l1 - 3.0).abs() < 1e-14 && (l2 - 1.0).abs() < 1e-14);
        let (l1, l2) = const2([[5.0, 0.0], [0.0, 2.0]]).eigenvalues_2d(&[0.0, 0.0]).unwrap();
        assert_eq!((l1, l2), (5.0, 2.0));
        let (l1, l2) = const2([[1.0, 0.0], [0.0, 1.0]]).eigenvalues_2d(&[0.0, 0.0]).unwrap();
        assert_eq!((l1, l2), (1.0, 1.0));
        let one_d = MetricField::log1d();
        assert!(matches!(
            one_d.eigenvalues_2d(&[0.1]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn christoffel_examples() {
        let flat = const2([[2.0, 1.0], [1.0, 2.0]]);
        let g = flat.christoffel(&[0.3, 0.3]).unwrap();
        assert!(g.values.iter().all(|v| *v == 0.0));

        let h = MetricField::hyperbolic_default();
        let g = h.christoffel(&[0.0, 1.0]).unwrap();
        let expected = |k: usize, mu: usize, nu: usize| match (k, mu, nu) {
            (0, 0, 1) | (0, 1, 0) => -1.0,
            (1, 0, 0) => 1.0,
            (1, 1, 1) => -1.0,
            _ => 0.0,
        };
        for k in 0..2 {
            for mu in 0..2 {
                for nu in 0..2 {
                    assert!((g.get(k, mu, nu) - expected(k, mu, nu)).abs() < 1e-14);
                }
            }
        }

        let g = MetricField::log1d().christoffel(&[0.0]).unwrap();
        assert!((g.get(0, 0, 0) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn lambda_min_routes_agree() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let lmin = smallest_eigenvalue_inverse_iteration(&m);
        let eig = m.clone().symmetric_eigen();
        let expected = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((lmin - expected).abs() < 1e-10);
        let two = DMatrix::from_row_slice(2, 2, &[1.0, 1e-9, 1e-9, 1e-8]);
        let (l1, l2) = eigenvalues_2x2(&two);
        assert!(((l1 * l2) / (1e-8 - 1e-18) - 1.0).abs() < 1e-12);
    }
}
