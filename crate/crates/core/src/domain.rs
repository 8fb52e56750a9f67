use serde::{Deserialize, Serialize};

/// Axis-aligned box `[lower_i, upper_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "box bounds differ in dimension");
        assert!(
            lower.iter().zip(&upper).all(|(a, b)| a < b),
            "box must have positive extent on every axis"
        );
        DomainBox { lower, upper }
    }

    pub fn unit(n: usize) -> Self {
        DomainBox::new(vec![0.0; n], vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Tensor grid with `per_axis` equispaced points per axis (including both
    /// endpoints), in row-major order with the last axis fastest.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        assert!(per_axis >= 2, "grid needs at least two points per axis");
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| axis_points(self.lower[i], self.upper[i], per_axis))
            .collect();
        tensor(&axes)
    }
}

pub fn axis_points(a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| a + (b - a) * k as f64 / (count - 1) as f64)
        .collect()
}

/// Cartesian product of per-axis coordinate lists, last axis fastest.
pub fn tensor(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &v in axis {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
