use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::TransportError;
use crate::field::DiscreteMeasure;

/// Speed of the step `a → b` over `dt` read off the continuity equation:
/// `|μ̇|² = ∫ ρ |∇φ|²` where `-(ρφ')' = (b - a)/dt` weakly, with `ρ` the
/// midpoint density averaged on each cell.
///
/// On grids that are not segments this replaces the discrete transport
/// distance between nodal atoms, which does not resolve small motions.
pub fn tangent_speed(a: &DiscreteMeasure, b: &DiscreteMeasure, dt: f64) -> Result<f64, TransportError> {
    if !a.grid.same_as(&b.grid) {
        return Err(TransportError::GridMismatch);
    }
    if a.has_atoms() || b.has_atoms() {
        return Err(TransportError::AtomicMeasure);
    }
    let grid = &a.grid;
    let n = grid.len();
    let nv = grid.graph().num_vertices();
    let mass = grid.mass();
    if (0..n).all(|i| a.density[i] == b.density[i]) {
        return Ok(0.0);
    }
    // Edge interiors first and vertices last keeps the fill-in among vertex
    // nodes; vertex 0 is pinned.
    let slot = |i: usize| -> Option<usize> {
        if i >= nv {
            Some(i - nv)
        } else if i > 0 {
            Some(n - nv + i - 1)
        } else {
            None
        }
    };
    let m = n - 1;
    let mut coo = CooMatrix::new(m, m);
    let mut weights = Vec::new();
    for (i, j, h, _) in grid.cells() {
        if i == j {
            continue;
        }
        let rho = 0.25 * (a.density[i] + b.density[i] + a.density[j] + b.density[j]);
        let w = rho.max(0.0) / h;
        weights.push((i, j, w));
        for (p, q) in [(i, j), (j, i)] {
            if let Some(sp) = slot(p) {
                coo.push(sp, sp, w);
                if let Some(sq) = slot(q) {
                    coo.push(sp, sq, -w);
                }
            }
        }
    }
    let mut rhs = DMatrix::<f64>::zeros(m, 1);
    for (i, &m_i) in mass.iter().enumerate().take(n) {
        if let Some(si) = slot(i) {
            rhs[(si, 0)] = m_i * (b.density[i] - a.density[i]) / dt;
        }
    }
    let k = CscMatrix::from(&coo);
    let chol = CscCholesky::factor(&k).map_err(|_| TransportError::DegenerateWeights)?;
    let sol = chol.solve(&rhs);
    let phi = |i: usize| slot(i).map_or(0.0, |s| sol[(s, 0)]);
    let energy: f64 = weights
        .iter()
        .map(|&(i, j, w)| w * (phi(i) - phi(j)).powi(2))
        .sum();
    Ok(energy.max(0.0).sqrt())
}
