//! Independent reference solutions and error measurement.

pub mod bound;
pub mod convergence;
pub mod geodesic;
pub mod quadrature;
pub mod sobolev;

pub use bound::{gradient_bound_check, BoundReport};
pub use convergence::{convergence_table, ConvergenceRow, ConvergenceTable, LevelNodes};
pub use geodesic::{
    flat_distance, geodesic_distance, geodesic_distance_with, geodesic_shoot, hyperbolic_distance,
    GeodesicCurve, ShootingOptions,
};
pub use quadrature::{adaptive_gauss, exact_1d_distance};
pub use sobolev::{
    sobolev_error, sobolev_measure, Exact1dDistance, FdField, Field, FlatDistance, SobolevSpec,
    SqrtApproximant, SquaredApproximant,
};

use crate::metric::{Catalog, MetricField};

/// The best available reference distance `d(·, y)` for a metric: closed
/// forms for catalog entries, quadrature in 1D, shooting otherwise.
pub fn reference_distance<'a>(metric: &'a MetricField, y: &[f64]) -> crate::Result<Box<dyn Field + 'a>> {
    let y = y.to_vec();
    Ok(match metric.catalog() {
        Some(Catalog::Constant { .. }) => Box::new(FlatDistance::new(&metric.a_spd(&y)?, &y)),
        Some(Catalog::HyperbolicHalfPlane) => {
            Box::new(FdField::new(2, move |x: &[f64]| hyperbolic_distance(x, &y)))
        }
        _ if metric.dim() == 1 => Box::new(Exact1dDistance::new(metric, y[0])),
        _ => Box::new(FdField::new(metric.dim(), move |x: &[f64]| {
            geodesic_distance(metric, x, &y).unwrap_or(f64::NAN)
        })),
    })
}
