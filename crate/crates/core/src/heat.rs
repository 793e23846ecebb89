//! Kirchhoff Laplacian, its spectrum, the heat kernel, and the heat
//! semigroup on functions (`P_t`) and on measures (`H_t`).
//!
//! The Laplacian is the lumped-mass P1 discretization: on each cell of
//! width `h` the flux is `(f_i - f_j)/h`, and a vertex row collects the
//! fluxes of all incident cells. That row is the discrete balance
//! `Σ_e ∂f^e(v)·n^e(v) = 0`, continuity is built into the shared node.
// Negated comparisons reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use parking_lot::Mutex;

use crate::error::HeatError;
use crate::field::{DiscreteMeasure, GridFunction};
use crate::graph::GraphPoint;
use crate::grid::Grid;

pub const DEFAULT_EIG_TOL: f64 = 1e-10;

/// Above this many nodes the spectrum is truncated.
const FULL_SPECTRUM_LIMIT: usize = 5_000;

#[derive(Debug, Clone)]
pub struct KirchhoffLaplacian {
    grid: Arc<Grid>,
    /// Stiffness rows `(column, value)`, symmetric, zero row sums.
    rows: Vec<Vec<(usize, f64)>>,
}

impl KirchhoffLaplacian {
    pub fn assemble(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        let mut acc: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
        for (i, j, h, _) in grid.cells() {
            if i == j {
                continue;
            }
            let w = 1.0 / h;
            *acc[i].entry(i).or_default() += w;
            *acc[j].entry(j).or_default() += w;
            *acc[i].entry(j).or_default() -= w;
            *acc[j].entry(i).or_default() -= w;
        }
        let rows = acc
            .into_iter()
            .map(|r| {
                let mut r: Vec<_> = r.into_iter().collect();
                r.sort_by_key(|(c, _)| *c);
                r
            })
            .collect();
        Self { grid, rows }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        self.grid.mass()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `S f`, evaluated as a sum of cell fluxes so constants map to exact zeros.
    pub fn stiffness_apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for (i, j, h, _) in self.grid.cells() {
            let flux = (f[i] - f[j]) / h;
            out[i] += flux;
            out[j] -= flux;
        }
        out
    }

    /// `-Δf ≈ M⁻¹ S f` (positive semidefinite sign convention).
    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        let sf = self.stiffness_apply(&f.values);
        let values = sf.iter().zip(self.mass()).map(|(v, m)| v / m).collect();
        GridFunction::new(self.grid.clone(), values)
    }

    /// Symmetrized dense operator `M^{-1/2} S M^{-1/2}`.
    fn symmetrized(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        let sq: Vec<f64> = self.mass().iter().map(|m| m.sqrt()).collect();
        let mut b = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                b[(i, j)] = v / (sq[i] * sq[j]);
            }
        }
        b
    }

    pub fn eigendecompose(&self, m: usize, eig_tol: f64) -> Result<SpectralDecomposition, HeatError> {
        let n = self.grid.len();
        if m > n {
            return Err(HeatError::TooManyEigenpairs {
                requested: m,
                available: n,
            });
        }
        let b = self.symmetrized();
        let scale = b
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            .max(1.0);
        let eig = SymmetricEigen::new(b.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]));

        let mut worst = 0.0f64;
        for &k in order.iter().take(m) {
            let v = eig.eigenvectors.column(k);
            let r = (&b * v - v * eig.eigenvalues[k]).norm();
            worst = worst.max(r);
        }
        let tol = eig_tol * scale;
        if !(worst <= tol) {
            return Err(HeatError::SolverFailure {
                residual: worst,
                tol,
            });
        }

        let mass = self.mass();
        let total: f64 = mass.iter().sum();
        let mut values = Vec::with_capacity(m);
        let mut vectors = DMatrix::zeros(n, m);
        for (col, &k) in order.iter().take(m).enumerate() {
            if col == 0 {
                // kernel of a connected graph: the normalized constant
                values.push(0.0);
                vectors.column_mut(0).fill(1.0 / total.sqrt());
                continue;
            }
            values.push(eig.eigenvalues[k].max(0.0));
            let v = eig.eigenvectors.column(k);
            for i in 0..n {
                vectors[(i, col)] = v[i] / mass[i].sqrt();
            }
        }
        Ok(SpectralDecomposition {
            grid: self.grid.clone(),
            values,
            vectors,
        })
    }

    /// Default eigenpair count: full spectrum on desk-size grids, otherwise
    /// enough pairs that `e^{-λ_m t_min} < 1e-12`.
    pub fn default_count(&self, t_min: f64) -> usize {
        let n = self.grid.len();
        if n < FULL_SPECTRUM_LIMIT || t_min <= 0.0 {
            return n;
        }
        // λ_k grows like (πk/|G|)² for large k
        let lam_needed = 12.0 * std::f64::consts::LN_10 / t_min;
        let len = self.grid.graph().total_length();
        let k = (lam_needed.sqrt() * len / std::f64::consts::PI).ceil() as usize
            + 2 * self.grid.graph().num_edges();
        k.min(n)
    }
}

/// Eigenpairs of `S u = λ M u`, mass-orthonormal, ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    grid: Arc<Grid>,
    values: Vec<f64>,
    /// Column `k` holds `φ_k` at every node.
    vectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest non-zero eigenvalue.
    pub fn lambda1(&self) -> f64 {
        self.values.get(1).copied().unwrap_or(f64::NAN)
    }

    /// Mass-weighted coefficients `<φ_k, f>_M`.
    fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let mf: Vec<f64> = f.iter().zip(self.grid.mass()).map(|(a, m)| a * m).collect();
        (0..self.len())
            .map(|k| self.vectors.column(k).iter().zip(&mf).map(|(p, v)| p * v).sum())
            .collect()
    }

    fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.vectors.column(k).iter()) {
                *o += c * p;
            }
        }
        out
    }

    fn eigvec_at(&self, k: usize, p: &GraphPoint) -> f64 {
        let c = self.grid.locate(p);
        (1.0 - c.theta) * self.vectors[(c.left, k)] + c.theta * self.vectors[(c.right, k)]
    }
}

/// Heat kernel and semigroup evaluation with a per-time cache of
/// `e^{-λ_k t}` factors.
#[derive(Debug)]
pub struct HeatSemigroup {
    spectrum: Arc<SpectralDecomposition>,
    cache: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl HeatSemigroup {
    pub fn new(spectrum: Arc<SpectralDecomposition>) -> Self {
        Self {
            spectrum,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Assembles, decomposes (full spectrum) and wraps in one go.
    pub fn for_grid(grid: Arc<Grid>) -> Result<Self, HeatError> {
        let lap = KirchhoffLaplacian::assemble(grid);
        let n = lap.default_count(0.0);
        let spec = lap.eigendecompose(n, DEFAULT_EIG_TOL)?;
        Ok(Self::new(Arc::new(spec)))
    }

    pub fn spectrum(&self) -> &Arc<SpectralDecomposition> {
        &self.spectrum
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.spectrum.grid()
    }

    fn decay(&self, t: f64) -> Arc<Vec<f64>> {
        let key = t.to_bits();
        if let Some(d) = self.cache.lock().get(&key) {
            return d.clone();
        }
        let d = Arc::new(
            self.spectrum
                .values
                .iter()
                .map(|l| (-l * t).exp())
                .collect::<Vec<_>>(),
        );
        self.cache.lock().insert(key, d.clone());
        d
    }

    /// `p_t(x, y)` with eigenvectors interpolated linearly off the nodes.
    pub fn kernel(&self, t: f64, x: &GraphPoint, y: &GraphPoint) -> Result<f64, HeatError> {
        if !(t > 0.0) {
            return Err(HeatError::NonpositiveTime(t));
        }
        let d = self.decay(t);
        Ok((0..self.spectrum.len())
            .map(|k| d[k] * self.spectrum.eigvec_at(k, x) * self.spectrum.eigvec_at(k, y))
            .sum())
    }

    /// `y ↦ p_t(x, y)` at every node.
    pub fn kernel_row(&self, t: f64, x: &GraphPoint) -> Result<Vec<f64>, HeatError> {
        if !(t > 0.0) {
            return Err(HeatError::NonpositiveTime(t));
        }
        let d = self.decay(t);
        let coeffs: Vec<f64> = (0..self.spectrum.len())
            .map(|k| d[k] * self.spectrum.eigvec_at(k, x))
            .collect();
        Ok(self.spectrum.synthesize(&coeffs))
    }

    pub fn apply_values(&self, f: &[f64], t: f64) -> Vec<f64> {
        assert!(t >= 0.0, "heat semigroup needs t >= 0");
        if t == 0.0 {
            return f.to_vec();
        }
        let d = self.decay(t);
        let mut c = self.spectrum.coefficients(f);
        c.iter_mut().zip(d.iter()).for_each(|(c, d)| *c *= d);
        self.spectrum.synthesize(&c)
    }

    /// `P_t f`.
    pub fn apply_pt(&self, f: &GridFunction, t: f64) -> GridFunction {
        GridFunction::new(f.grid.clone(), self.apply_values(&f.values, t))
    }

    /// `H_t μ`: the density part flows under `P_t`, each atom spreads along
    /// the kernel column of its location.
    pub fn apply_ht(&self, mu: &DiscreteMeasure, t: f64) -> DiscreteMeasure {
        if t == 0.0 {
            return mu.clone();
        }
        let rho = mu.lumped_density();
        let density = self.apply_values(&rho, t);
        DiscreteMeasure::from_density(mu.grid.clone(), density)
    }
}
