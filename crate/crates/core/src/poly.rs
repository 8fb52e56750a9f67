//! Sparse multivariate polynomials with real coefficients.

use crate::multiindex::{falling_factorial, MultiIndex};
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

/// Sparse polynomial in `n` variables. Exact zeros are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct MPoly {
    n: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl MPoly {
    pub fn zero(n: usize) -> Self {
        MPoly {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = MPoly::zero(n);
        p.add_term(MultiIndex::zero(n), c);
        p
    }

    /// The coordinate polynomial `x_i` (0-based).
    pub fn var(n: usize, i: usize) -> Self {
        let mut p = MPoly::zero(n);
        p.add_term(MultiIndex::unit(n, i), 1.0);
        p
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut p = MPoly::zero(n);
        for (m, c) in terms {
            assert_eq!(m.dim(), n, "exponent vector has wrong dimension");
            p.add_term(m, c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: &MultiIndex) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.order()).max().unwrap_or(0)
    }

    fn add_term(&mut self, m: MultiIndex, c: f64) {
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if c != 0.0 {
                    v.insert(c);
                }
            }
        }
    }

    pub fn scale(&self, s: f64) -> MPoly {
        MPoly::from_terms(self.n, self.terms.iter().map(|(m, &c)| (m.clone(), c * s)))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        self.terms.iter().map(|(m, &c)| c * m.monomial(x)).sum()
    }

    /// `(∂^α p)(x)` with exact falling-factorial factors.
    pub fn eval_derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        debug_assert_eq!(alpha.dim(), self.n);
        debug_assert_eq!(x.len(), self.n);
        let mut acc = 0.0;
        for (m, &c) in &self.terms {
            let mut factor: u128 = 1;
            let mut mono = 1.0;
            let mut vanishes = false;
            for i in 0..self.n {
                let (e, a) = (m.get(i), alpha.get(i));
                if a > e {
                    vanishes = true;
                    break;
                }
                factor *= falling_factorial(e, a);
                mono *= x[i].powi((e - a) as i32);
            }
            if !vanishes {
                acc += c * factor as f64 * mono;
            }
        }
        acc
    }

    /// `∂p/∂x_i` as a polynomial.
    pub fn derivative(&self, i: usize) -> MPoly {
        MPoly::from_terms(
            self.n,
            self.terms.iter().filter(|(m, _)| m.get(i) > 0).map(|(m, &c)| {
                let e = m.get(i);
                (m.decrement(i, 1), c * e as f64)
            }),
        )
    }

    /// `∂^α p` as a polynomial, by repeated single-variable derivatives.
    pub fn derivative_multi(&self, alpha: &MultiIndex) -> MPoly {
        let mut p = self.clone();
        for i in 0..self.n {
            for _ in 0..alpha.get(i) {
                p = p.derivative(i);
            }
        }
        p
    }
}

impl Add for &MPoly {
    type Output = MPoly;
    fn add(self, rhs: &MPoly) -> MPoly {
        assert_eq!(self.n, rhs.n);
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), c);
        }
        out
    }
}

impl Sub for &MPoly {
    type Output = MPoly;
    fn sub(self, rhs: &MPoly) -> MPoly {
        self + &(-rhs)
    }
}

impl Neg for &MPoly {
    type Output = MPoly;
    fn neg(self) -> MPoly {
        self.scale(-1.0)
    }
}

impl Mul for &MPoly {
    type Output = MPoly;
    fn mul(self, rhs: &MPoly) -> MPoly {
        assert_eq!(self.n, rhs.n);
        let mut out = MPoly::zero(self.n);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &rhs.terms {
                out.add_term(a.add(b), ca * cb);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x1sq_x2() -> MPoly {
        MPoly::from_terms(2, [(MultiIndex::new(vec![2, 1]), 1.0)])
    }

    #[test]
    fn derivative_examples() {
        let p = x1sq_x2();
        let d = |a: &[u32], x: &[f64]| p.eval_derivative(&MultiIndex::new(a.to_vec()), x);
        assert_eq!(d(&[1, 0], &[2.0, 3.0]), 12.0);
        assert_eq!(d(&[2, 1], &[0.7, -1.3]), 2.0);
        assert_eq!(d(&[3, 0], &[0.7, -1.3]), 0.0);
        assert_eq!(d(&[0, 0], &[2.0, 3.0]), 12.0);
    }

    #[test]
    fn zero_coefficients_are_pruned() {
        let p = x1sq_x2();
        let z = &p - &p;
        assert!(z.is_zero());
        let q = &MPoly::var(2, 0) + &MPoly::constant(2, 0.0);
        assert_eq!(q.terms().count(), 1);
    }

    #[test]
    fn product_and_degree() {
        let x = MPoly::var(2, 0);
        let y = MPoly::var(2, 1);
        let s = &x + &y;
        let sq = &s * &s;
        assert_eq!(sq.degree(), 2);
        assert_eq!(sq.coefficient(&MultiIndex::new(vec![1, 1])), 2.0);
        assert_eq!(sq.eval(&[1.0, 2.0]), 9.0);
    }
}
