//! Truncated multivariate Taylor expansions at a point.
//!
//! A [`Jet`] of order `D` at `x` stores the Taylor coefficients
//! `∂^γ f(x) / γ!` for every `|γ| ≤ D`. Products are exact truncated
//! Cauchy products, which is the Leibniz rule written in coefficient form.

use crate::multiindex::{enumerate_up_to, MultiIndex};
use crate::poly::MPoly;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Index bookkeeping shared by all jets of one `(n, D)`.
#[derive(Debug)]
pub struct Layout {
    n: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    factorials: Vec<f64>,
    position: HashMap<MultiIndex, usize>,
    products: Vec<(usize, usize, usize)>,
}

impl Layout {
    fn build(n: usize, order: usize) -> Layout {
        let indices = enumerate_up_to(n, order);
        let position: HashMap<_, _> = indices
            .iter()
            .enumerate()
            .map(|(k, m)| (m.clone(), k))
            .collect();
        let factorials = indices.iter().map(|m| m.factorial() as f64).collect();
        let mut products = Vec::new();
        for (a, ma) in indices.iter().enumerate() {
            for (b, mb) in indices.iter().enumerate() {
                if ma.order() + mb.order() <= order {
                    products.push((a, b, position[&ma.add(mb)]));
                }
            }
        }
        Layout {
            n,
            order,
            indices,
            factorials,
            position,
            products,
        }
    }

    /// Shared layout for dimension `n` and order `order`.
    pub fn get(n: usize, order: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("layout cache poisoned");
        guard
            .entry((n, order))
            .or_insert_with(|| Arc::new(Layout::build(n, order)))
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, m: &MultiIndex) -> Option<usize> {
        self.position.get(m).copied()
    }
}

#[derive(Clone, Debug)]
pub struct Jet {
    layout: Arc<Layout>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn zero(n: usize, order: usize) -> Jet {
        let layout = Layout::get(n, order);
        let len = layout.indices.len();
        Jet {
            layout,
            coeffs: vec![0.0; len],
        }
    }

    pub fn constant(n: usize, order: usize, c: f64) -> Jet {
        let mut j = Jet::zero(n, order);
        j.coeffs[0] = c;
        j
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient `∂^γ f(x)/γ!`; zero beyond the truncation order.
    pub fn coeff(&self, gamma: &MultiIndex) -> f64 {
        self.layout
            .position(gamma)
            .map(|k| self.coeffs[k])
            .unwrap_or(0.0)
    }

    /// Derivative value `∂^γ f(x)`; zero beyond the truncation order.
    pub fn derivative(&self, gamma: &MultiIndex) -> f64 {
        self.layout
            .position(gamma)
            .map(|k| self.coeffs[k] * self.layout.factorials[k])
            .unwrap_or(0.0)
    }

    pub fn set_derivative(&mut self, gamma: &MultiIndex, value: f64) {
        let k = self
            .layout
            .position(gamma)
            .expect("multiindex beyond jet order");
        self.coeffs[k] = value / self.layout.factorials[k];
    }

    /// Jet of a polynomial at `x`.
    pub fn from_poly(p: &MPoly, x: &[f64], order: usize) -> Jet {
        let mut j = Jet::zero(p.dim(), order);
        if p.is_zero() {
            return j;
        }
        for k in 0..j.coeffs.len() {
            let m = &j.layout.indices[k];
            if m.order() > p.degree() {
                continue;
            }
            j.coeffs[k] = p.eval_derivative(m, x) / j.layout.factorials[k];
        }
        j
    }

    /// Jet of a separable function `Π_i f_i(x_i)` from the univariate Taylor
    /// series of each factor (each of length at least `order + 1`).
    pub fn separable(series: &[Vec<f64>], order: usize) -> Jet {
        let n = series.len();
        let mut j = Jet::zero(n, order);
        for k in 0..j.coeffs.len() {
            let m = &j.layout.indices[k];
            j.coeffs[k] = (0..n).map(|i| series[i][m.get(i) as usize]).product();
        }
        j
    }

    pub fn add_scaled(&mut self, other: &Jet, s: f64) {
        debug_assert!(Arc::ptr_eq(&self.layout, &other.layout));
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.layout, &other.layout));
        let mut out = Jet {
            layout: self.layout.clone(),
            coeffs: vec![0.0; self.coeffs.len()],
        };
        for &(a, b, c) in &self.layout.products {
            out.coeffs[c] += self.coeffs[a] * other.coeffs[b];
        }
        out
    }

    /// `g ∘ f` where `g_series[k] = g^{(k)}(f(x))/k!` for `k ≤ order`.
    pub fn compose(&self, g_series: &[f64]) -> Jet {
        let order = self.order();
        let mut u = self.clone();
        u.coeffs[0] = 0.0;
        let mut out = Jet::constant(self.layout.n, order, g_series[0]);
        let mut power = Jet::constant(self.layout.n, order, 1.0);
        for g in g_series.iter().take(order + 1).skip(1) {
            power = power.mul(&u);
            out.add_scaled(&power, *g);
        }
        out
    }

    /// `√f`; requires `f(x) > 0`.
    pub fn sqrt(&self) -> Jet {
        let f0 = self.value();
        self.compose(&powf_series_at(f0, 0.5, self.order()))
    }
}

/// Taylor coefficients of `t ↦ t^r` at `t0 > 0`, up to `order`.
pub fn powf_series_at(t0: f64, r: f64, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    let mut binom = 1.0;
    for k in 0..=order {
        if k > 0 {
            binom *= (r - (k as f64 - 1.0)) / k as f64;
        }
        out.push(binom * t0.powf(r - k as f64));
    }
    out
}

/// Truncated product of two univariate Taylor series.
pub fn series_mul(a: &[f64], b: &[f64], order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    for (i, &ai) in a.iter().enumerate().take(order + 1) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `a^r` for a univariate series with `a[0] > 0`.
pub fn series_powf(a: &[f64], r: f64, order: usize) -> Vec<f64> {
    let a0 = a[0];
    let mut b = vec![0.0; order + 1];
    b[0] = a0.powf(r);
    for k in 1..=order {
        let mut acc = 0.0;
        for j in 1..=k.min(a.len() - 1) {
            acc += ((r + 1.0) * j as f64 - k as f64) * a[j] * b[k - j];
        }
        b[k] = acc / (k as f64 * a0);
    }
    b
}

/// Taylor series at `t0` of `Π_r (t − a_r)^{p_r}`, truncated at `order`.
pub fn root_product_series<I>(t0: f64, factors: I, order: usize) -> Vec<f64>
where
    I: IntoIterator<Item = (f64, u32)>,
{
    let mut acc = vec![0.0; order + 1];
    acc[0] = 1.0;
    let mut factor = vec![0.0; order + 1];
    for (a, p) in factors {
        if p == 0 {
            continue;
        }
        let d = t0 - a;
        for (j, slot) in factor.iter_mut().enumerate() {
            *slot = if j as u32 <= p {
                crate::multiindex::binomial(p, j as u32) as f64 * d.powi((p - j as u32) as i32)
            } else {
                0.0
            };
        }
        acc = series_mul(&acc, &factor, order);
    }
    acc
}
