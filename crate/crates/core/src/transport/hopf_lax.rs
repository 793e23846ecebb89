use std::sync::Arc;

use crate::field::GridFunction;
use crate::grid::Grid;

/// Penalty in the infimal convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HopfLaxCost {
    /// `d(x, y)² / (2s)`, the generator of `W₂` duality.
    #[default]
    Quadratic,
    /// `d(x, y) / (2s)`.
    Linear,
}

/// `Q_s φ(x) = min_y φ(y) + cost(x, y, s)` over grid nodes.
#[derive(Debug, Clone)]
pub struct HopfLax {
    grid: Arc<Grid>,
    dist: Vec<f64>,
    cost: HopfLaxCost,
}

impl HopfLax {
    pub fn new(grid: Arc<Grid>, cost: HopfLaxCost) -> Self {
        let dist = grid.distance_matrix();
        Self { grid, dist, cost }
    }

    pub fn apply(&self, phi: &GridFunction, s: f64) -> GridFunction {
        assert!(s > 0.0, "Hopf-Lax time must be positive");
        let n = self.grid.len();
        let values = (0..n)
            .map(|i| {
                let row = &self.dist[i * n..(i + 1) * n];
                row.iter()
                    .zip(&phi.values)
                    .map(|(&d, &p)| match self.cost {
                        HopfLaxCost::Quadratic => p + d * d / (2.0 * s),
                        HopfLaxCost::Linear => p + d / (2.0 * s),
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        GridFunction::new(phi.grid.clone(), values)
    }
}
