//! Grid functions and discrete measures.

use std::sync::Arc;

use crate::graph::GraphPoint;
use crate::grid::Grid;

/// Nodal values on a [`Grid`], read as the continuous piecewise-linear
/// interpolant. Vertex values are single-valued by construction.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len(), "value count must match the grid");
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        Self::new(grid, vec![c; n])
    }

    /// Samples `f(edge, s)` at every node; vertex nodes use their representative edge.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(usize, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.node_point(i);
                f(p.edge, p.s)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn eval(&self, p: &GraphPoint) -> f64 {
        self.grid.interpolate(&self.values, p)
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.grid.same_as(&other.grid));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub point: GraphPoint,
    pub mass: f64,
}

/// A finite measure: a nodal density (piecewise linear, trapezoidal masses)
/// plus point atoms.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    pub grid: Arc<Grid>,
    pub density: Vec<f64>,
    pub atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn from_density(grid: Arc<Grid>, density: Vec<f64>) -> Self {
        assert_eq!(grid.len(), density.len());
        Self {
            grid,
            density,
            atoms: Vec::new(),
        }
    }

    /// Density normalized to unit mass.
    pub fn probability_density(grid: Arc<Grid>, density: Vec<f64>) -> Self {
        let mut m = Self::from_density(grid, density);
        let total = m.total_mass();
        m.density.iter_mut().for_each(|v| *v /= total);
        m
    }

    pub fn uniform(grid: Arc<Grid>) -> Self {
        let c = 1.0 / grid.graph().total_length();
        let n = grid.len();
        Self::from_density(grid, vec![c; n])
    }

    pub fn dirac(grid: Arc<Grid>, point: GraphPoint) -> Self {
        Self::atoms(grid, vec![Atom { point, mass: 1.0 }])
    }

    pub fn atoms(grid: Arc<Grid>, atoms: Vec<Atom>) -> Self {
        let n = grid.len();
        Self {
            grid,
            density: vec![0.0; n],
            atoms,
        }
    }

    pub fn has_atoms(&self) -> bool {
        self.atoms.iter().any(|a| a.mass > 0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.grid.integrate(&self.density) + self.atoms.iter().map(|a| a.mass).sum::<f64>()
    }

    /// Mass per flat node after splitting atoms linearly onto their cell ends.
    pub fn node_masses(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self
            .density
            .iter()
            .zip(self.grid.mass())
            .map(|(f, w)| f * w)
            .collect();
        for a in &self.atoms {
            let c = self.grid.locate(&a.point);
            m[c.left] += (1.0 - c.theta) * a.mass;
            m[c.right] += c.theta * a.mass;
        }
        m
    }

    /// Nodal density whose trapezoidal masses equal [`Self::node_masses`].
    pub fn lumped_density(&self) -> Vec<f64> {
        self.node_masses()
            .iter()
            .zip(self.grid.mass())
            .map(|(m, w)| m / w)
            .collect()
    }

    /// Support points with masses: one per node with positive mass, then atoms.
    pub fn support(&self) -> Vec<(GraphPoint, f64)> {
        let mut out: Vec<(GraphPoint, f64)> = self
            .density
            .iter()
            .zip(self.grid.mass())
            .enumerate()
            .filter(|(_, (f, _))| **f != 0.0)
            .map(|(i, (f, w))| (self.grid.node_point(i), f * w))
            .collect();
        out.extend(self.atoms.iter().filter(|a| a.mass != 0.0).map(|a| (a.point, a.mass)));
        out
    }

    /// `∫ φ dμ` for a nodal function `φ`.
    pub fn integrate(&self, phi: &[f64]) -> f64 {
        self.grid
            .integrate(&self.density.iter().zip(phi).map(|(f, p)| f * p).collect::<Vec<_>>())
            + self
                .atoms
                .iter()
                .map(|a| a.mass * self.grid.interpolate(phi, &a.point))
                .sum::<f64>()
    }

    /// `Σ w_i μ_i` over measures on the same grid.
    pub fn mixture(parts: &[(f64, &DiscreteMeasure)]) -> Self {
        let grid = parts[0].1.grid.clone();
        let mut density = vec![0.0; grid.len()];
        let mut atoms = Vec::new();
        for (w, m) in parts {
            assert!(m.grid.same_as(&grid));
            for (d, f) in density.iter_mut().zip(&m.density) {
                *d += w * f;
            }
            atoms.extend(m.atoms.iter().map(|a| Atom {
                point: a.point,
                mass: w * a.mass,
            }));
        }
        Self {
            grid,
            density,
            atoms,
        }
    }

    pub fn scaled(&self, w: f64) -> Self {
        Self::mixture(&[(w, self)])
    }
}
