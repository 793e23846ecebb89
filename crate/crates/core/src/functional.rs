//! Edge gradients, Dirichlet/Cheeger energy, the Γ-operator, entropy,
//! Fisher information and Lipschitz constants.

use std::sync::Arc;

use crate::error::FunctionalError;
use crate::field::{DiscreteMeasure, GridFunction};
use crate::grid::Grid;

/// Density below which the Fisher integrand switches to its degenerate branches.
pub const FISHER_F_TOL: f64 = 1e-12;
/// Gradient magnitude above which a vanishing density makes the Fisher integrand infinite.
pub const FISHER_G_TOL: f64 = 1e-8;

/// Per-edge nodal samples (tail to head). Vertex nodes appear once per
/// incident edge, so these live on the disjoint union of edges.
#[derive(Debug, Clone)]
pub struct EdgeField {
    pub grid: Arc<Grid>,
    pub per_edge: Vec<Vec<f64>>,
}

pub type EdgeGradient = EdgeField;

impl EdgeField {
    pub fn max_abs(&self) -> f64 {
        self.per_edge
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let per_edge = self
            .per_edge
            .iter()
            .zip(&other.per_edge)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Self {
            grid: self.grid.clone(),
            per_edge,
        }
    }

    /// Collapses to a grid function; a vertex receives the average of its
    /// incident edge samples weighted by the adjacent half-cells.
    pub fn to_grid_function(&self) -> GridFunction {
        let grid = &self.grid;
        let mut sum = vec![0.0; grid.len()];
        let mut weight = vec![0.0; grid.len()];
        for (e, vals) in self.per_edge.iter().enumerate() {
            let h = grid.spacing(e);
            for (k, &v) in vals.iter().enumerate() {
                let i = grid.index(e, k);
                let w = if grid.is_vertex(i) { 0.5 * h } else { 1.0 };
                sum[i] += w * v;
                weight[i] += w;
            }
        }
        let values = sum.iter().zip(&weight).map(|(s, w)| s / w).collect();
        GridFunction::new(grid.clone(), values)
    }
}

/// Centered differences at interior nodes, one-sided at the edge ends.
pub fn gradient(f: &GridFunction) -> EdgeGradient {
    let grid = &f.grid;
    let per_edge = (0..grid.graph().num_edges())
        .map(|e| {
            let v: Vec<f64> = grid.edge_indices(e).map(|i| f.values[i]).collect();
            let h = grid.spacing(e);
            let n = v.len();
            (0..n)
                .map(|k| {
                    if k == 0 {
                        (v[1] - v[0]) / h
                    } else if k == n - 1 {
                        (v[n - 1] - v[n - 2]) / h
                    } else {
                        (v[k + 1] - v[k - 1]) / (2.0 * h)
                    }
                })
                .collect()
        })
        .collect();
    EdgeField {
        grid: grid.clone(),
        per_edge,
    }
}

/// Slope of the piecewise-linear interpolant on every cell.
pub fn cell_slopes(f: &GridFunction) -> Vec<f64> {
    f.grid
        .cells()
        .map(|(i, j, h, _)| (f.values[j] - f.values[i]) / h)
        .collect()
}

/// `ℰ(f) = ∫ |∇f|²`, exact for the piecewise-linear interpolant.
pub fn dirichlet_energy(f: &GridFunction) -> f64 {
    f.grid
        .cells()
        .map(|(i, j, h, _)| {
            let d = f.values[j] - f.values[i];
            d * d / h
        })
        .sum()
}

/// `Ch(f) = ℰ(f)/2`.
pub fn cheeger_energy(f: &GridFunction) -> f64 {
    0.5 * dirichlet_energy(f)
}

/// `Γ(f, g) = ∇f · ∇g` on the edges.
pub fn gamma(f: &GridFunction, g: &GridFunction) -> Result<EdgeField, FunctionalError> {
    if !f.grid.same_as(&g.grid) {
        return Err(FunctionalError::GridMismatch);
    }
    Ok(gradient(f).zip_with(&gradient(g), |a, b| a * b))
}

pub fn gamma_sq(f: &GridFunction) -> EdgeField {
    let g = gradient(f);
    g.zip_with(&g, |a, _| a * a)
}

fn eta(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r * r.ln()
    }
}

/// `∫ η(f)` with `η(r) = r log r`; `+∞` when the measure has atoms.
/// Negative nodal values (rounding in spectral synthesis) count as zero.
pub fn entropy(mu: &DiscreteMeasure) -> f64 {
    if mu.has_atoms() {
        return f64::INFINITY;
    }
    mu.density
        .iter()
        .zip(mu.grid.mass())
        .map(|(&f, w)| w * eta(f))
        .sum()
}

/// `∫ f log(f + δ)`.
pub fn entropy_delta(mu: &DiscreteMeasure, delta: f64) -> Result<f64, FunctionalError> {
    assert!(delta > 0.0);
    if mu.has_atoms() {
        return Err(FunctionalError::AtomicMeasure);
    }
    Ok(mu
        .density
        .iter()
        .zip(mu.grid.mass())
        .map(|(&f, w)| {
            let f = f.max(0.0);
            w * f * (f + delta).ln()
        })
        .sum())
}

/// The three-branch Fisher integrand `ψ(u, v)`.
pub fn psi(u: f64, v: f64) -> f64 {
    if u > FISHER_F_TOL {
        v * v / u
    } else if v.abs() <= FISHER_G_TOL {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `I(μ) = ∫ ψ(f, ∇f)` by the midpoint rule on every cell; `+∞` for atoms.
///
/// A cell whose density vanishes at an end while the slope does not has a
/// divergent exact integral, so `ψ` is also probed at both cell ends.
pub fn fisher_information(mu: &DiscreteMeasure) -> f64 {
    if mu.has_atoms() {
        return f64::INFINITY;
    }
    let f = &mu.density;
    mu.grid
        .cells()
        .map(|(i, j, h, _)| {
            let (fi, fj) = (f[i].max(0.0), f[j].max(0.0));
            let slope = (fj - fi) / h;
            if psi(fi.min(fj), slope).is_infinite() {
                return f64::INFINITY;
            }
            h * psi(0.5 * (fi + fj), slope)
        })
        .sum()
}

/// Local Lipschitz constants per node and the global constant over node pairs.
#[derive(Debug, Clone)]
pub struct LipschitzConstants {
    pub local: Vec<f64>,
    pub global: f64,
}

impl LipschitzConstants {
    pub fn max_local(&self) -> f64 {
        self.local.iter().cloned().fold(0.0, f64::max)
    }
}

/// `lip f` at a node is the largest adjacent difference quotient (all incident
/// cells at a vertex); `Lip f` maximizes `|f(x) - f(y)| / d(x, y)` over node pairs.
pub fn lipschitz_constants(f: &GridFunction) -> LipschitzConstants {
    let grid = &f.grid;
    let mut local = vec![0.0f64; grid.len()];
    for (i, j, h, _) in grid.cells() {
        let q = (f.values[j] - f.values[i]).abs() / h;
        local[i] = local[i].max(q);
        local[j] = local[j].max(q);
    }
    let d = grid.distance_matrix();
    let n = grid.len();
    let mut global = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let dij = d[i * n + j];
            if dij > 0.0 {
                global = global.max((f.values[i] - f.values[j]).abs() / dij);
            }
        }
    }
    LipschitzConstants { local, global }
}
