//! Benchmark fixtures shared by the criterion targets.

use cmcfol::hyperbolic::{Isometry, MetricField};
use cmcfol::sphere::SphereGrid;
use cmcfol::surface::GraphSurface;

/// AdS-Schwarzschild (m = 1) and its coordinate sphere of radius σ at degree `l`.
pub fn ads_sphere(l: usize, sigma: f64) -> (MetricField, GraphSurface) {
    let grid = SphereGrid::shared(l).expect("valid degree");
    let metric = MetricField::ads_schwarzschild(1.0).expect("valid mass");
    let surface = GraphSurface::geodesic_sphere(&grid, Isometry::identity(), sigma).expect("valid radius");
    (metric, surface)
}
