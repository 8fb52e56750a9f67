//! Multiindices and the exact integer combinatorics attached to them.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Largest derivative order for which combinatorial tables are guaranteed
/// exact.
pub const DEFAULT_MAX_ORDER: usize = 12;

/// Exponent vector `(α₁, …, α_n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// The unit multiindex `1_i` (0-based `i`).
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    /// The all-ones multiindex `𝟏`.
    pub fn ones(n: usize) -> Self {
        MultiIndex(vec![1; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Truncated decrement `β ∸ k_i`: component `i` (0-based) is lowered by
    /// `k` when `β_i ≥ k` and set to zero otherwise.
    pub fn decrement(&self, i: usize, k: u32) -> MultiIndex {
        let mut e = self.0.clone();
        e[i] = e[i].saturating_sub(k);
        MultiIndex(e)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Component-wise difference; `None` unless `other ≤ self`.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    pub fn with_increment(&self, i: usize) -> MultiIndex {
        let mut e = self.0.clone();
        e[i] += 1;
        MultiIndex(e)
    }

    /// Component-wise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `α! = Π α_i!`, exact.
    pub fn factorial(&self) -> u128 {
        self.0.iter().map(|&e| factorial(e)).product()
    }

    /// `binom(α, γ) = Π binom(α_i, γ_i)`, exact. Zero unless `γ ≤ α`.
    pub fn binomial(&self, gamma: &MultiIndex) -> u128 {
        self.0
            .iter()
            .zip(&gamma.0)
            .map(|(&a, &g)| binomial(a, g))
            .product()
    }

    /// Smallest index with a nonzero component.
    pub fn first_nonzero(&self) -> Option<usize> {
        self.0.iter().position(|&e| e > 0)
    }

    /// Largest index with a nonzero component.
    pub fn last_nonzero(&self) -> Option<usize> {
        self.0.iter().rposition(|&e| e > 0)
    }

    /// `x^α` for a point `x`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }

    /// All `γ ≤ self` component-wise, in graded-lexicographic order.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for m in 0..=self.order() {
            for g in enumerate(self.dim(), m) {
                if g.le(self) {
                    out.push(g);
                }
            }
        }
        out
    }

    /// Dash-joined exponents, e.g. `2-0-1`.
    pub fn dashed(&self) -> String {
        self.0
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn parse_dashed(s: &str) -> Option<MultiIndex> {
        s.split('-')
            .map(|t| t.trim().parse::<u32>().ok())
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.dashed().replace('-', ","))
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

pub fn factorial(k: u32) -> u128 {
    (1..=k as u128).product()
}

/// Falling factorial `e (e-1) ⋯ (e-k+1)`; zero when `k > e`.
pub fn falling_factorial(e: u32, k: u32) -> u128 {
    if k > e {
        return 0;
    }
    ((e - k + 1) as u128..=e as u128).product()
}

pub fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc
}

/// All multiindices of dimension `n` and order exactly `m`, graded
/// lexicographic with the first component descending.
pub fn enumerate(n: usize, m: usize) -> Vec<MultiIndex> {
    assert!(n >= 1, "dimension must be positive");
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fill(&mut out, &mut cur, 0, m);
    out
}

fn fill(out: &mut Vec<MultiIndex>, cur: &mut Vec<u32>, pos: usize, remaining: usize) {
    let n = cur.len();
    if pos == n - 1 {
        cur[pos] = remaining as u32;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e as u32;
        fill(out, cur, pos + 1, remaining - e);
    }
    cur[pos] = 0;
}

/// All multiindices of order `0..=m`, grade by grade.
pub fn enumerate_up_to(n: usize, m: usize) -> Vec<MultiIndex> {
    (0..=m).flat_map(|k| enumerate(n, k)).collect()
}
