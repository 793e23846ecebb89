//! Wasserstein-2 transport with graph-distance cost, displacement
//! interpolation, curve actions, and the Hopf-Lax semigroup.

mod hopf_lax;
mod path;
mod simplex;
mod tangent;

pub use hopf_lax::{HopfLax, HopfLaxCost};
pub use path::{w2_path, w2_path_with, PathChart};
pub use simplex::{solve_transport, TransportSolution};
pub use tangent::tangent_speed;

use crate::error::TransportError;
use crate::field::{Atom, DiscreteMeasure};
use crate::graph::GraphPoint;

/// Masses this small relative to the total are treated as rounding noise.
const NOISE: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub sources: Vec<(GraphPoint, f64)>,
    pub targets: Vec<(GraphPoint, f64)>,
    /// Sparse coupling `(source, target, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Kantorovich potentials from the simplex basis.
    pub potentials: (Vec<f64>, Vec<f64>),
}

impl TransportPlan {
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.targets.len()]; self.sources.len()];
        for &(i, j, f) in &self.entries {
            m[i][j] += f;
        }
        m
    }

    pub fn duality_gap(&self) -> f64 {
        let a: Vec<f64> = self.sources.iter().map(|s| s.1).collect();
        let b: Vec<f64> = self.targets.iter().map(|s| s.1).collect();
        let dual = a.iter().zip(&self.potentials.0).map(|(x, u)| x * u).sum::<f64>()
            + b.iter().zip(&self.potentials.1).map(|(x, v)| x * v).sum::<f64>();
        (self.cost - dual).abs()
    }
}

fn clean_support(mu: &DiscreteMeasure) -> Result<Vec<(GraphPoint, f64)>, TransportError> {
    let raw = mu.support();
    let total: f64 = raw.iter().map(|s| s.1).sum();
    let floor = NOISE * total.abs().max(1.0);
    let mut out = Vec::with_capacity(raw.len());
    for (p, m) in raw {
        if m < -floor {
            return Err(TransportError::NegativeMass(m));
        }
        if m > floor {
            out.push((p, m));
        }
    }
    Ok(out)
}

/// Exact `W₂(μ, ν)` of the discrete problem on the two supports (nodal
/// masses and atoms), with squared graph distance as cost.
pub fn w2(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, TransportPlan), TransportError> {
    if !std::sync::Arc::ptr_eq(mu.grid.graph(), nu.grid.graph()) {
        return Err(TransportError::GridMismatch);
    }
    let (ma, mb) = (mu.total_mass(), nu.total_mass());
    if (ma - mb).abs() > 1e-12 * ma.abs().max(1.0) {
        return Err(TransportError::MassMismatch(ma, mb));
    }
    let sources = clean_support(mu)?;
    let targets = clean_support(nu)?;
    let g = mu.grid.graph();
    let cost: Vec<f64> = sources
        .iter()
        .flat_map(|(x, _)| {
            targets.iter().map(move |(y, _)| {
                let d = g.distance(x, y);
                d * d
            })
        })
        .collect();
    let a: Vec<f64> = sources.iter().map(|s| s.1).collect();
    let b: Vec<f64> = targets.iter().map(|s| s.1).collect();
    let sol = solve_transport(&a, &b, &cost);
    let plan = TransportPlan {
        sources,
        targets,
        entries: sol.flows,
        cost: sol.cost,
        potentials: (sol.u, sol.v),
    };
    Ok((plan.cost.max(0.0).sqrt(), plan))
}

pub fn w2_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64, TransportError> {
    w2(mu, nu).map(|r| r.0)
}

/// Displacement interpolation: every coupled pair `(x, y)` moves its mass
/// to `geodesic_point(x, y, s)`.
pub fn wasserstein_geodesic(mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, s: f64) -> Result<DiscreteMeasure, TransportError> {
    let (_, plan) = w2(mu0, mu1)?;
    Ok(interpolate_plan(mu0, mu1, &plan, s))
}

pub fn interpolate_plan(mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, plan: &TransportPlan, s: f64) -> DiscreteMeasure {
    if s <= 0.0 {
        return mu0.clone();
    }
    if s >= 1.0 {
        return mu1.clone();
    }
    let g = mu0.grid.graph();
    let atoms = plan
        .entries
        .iter()
        .map(|&(i, j, m)| Atom {
            point: g.geodesic_point(&plan.sources[i].0, &plan.targets[j].0, s),
            mass: m,
        })
        .collect();
    DiscreteMeasure::atoms(mu0.grid.clone(), atoms)
}

/// Measures sampled at increasing times.
#[derive(Debug, Clone)]
pub struct MeasureCurve {
    pub times: Vec<f64>,
    pub measures: Vec<DiscreteMeasure>,
}

impl MeasureCurve {
    pub fn new(times: Vec<f64>, measures: Vec<DiscreteMeasure>) -> Self {
        assert_eq!(times.len(), measures.len());
        assert!(times.windows(2).all(|w| w[1] > w[0]), "times must increase");
        Self { times, measures }
    }

    pub fn uniform_times(n: usize, f: impl Fn(f64) -> DiscreteMeasure) -> Self {
        let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let measures = times.iter().map(|&t| f(t)).collect();
        Self::new(times, measures)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Forward-difference speeds `W(μ_i, μ_{i+1}) / Δs_i` under a chosen metric.
    pub fn speeds_with<F>(&self, metric: F) -> Result<Vec<f64>, TransportError>
    where
        F: Fn(&DiscreteMeasure, &DiscreteMeasure) -> Result<f64, TransportError>,
    {
        (0..self.len() - 1)
            .map(|i| {
                let d = metric(&self.measures[i], &self.measures[i + 1])?;
                Ok(d / (self.times[i + 1] - self.times[i]))
            })
            .collect()
    }

    /// `|μ̇_{s_i}|` by a forward difference (backward at the last sample).
    pub fn metric_derivative(&self, i: usize) -> Result<f64, TransportError> {
        let j = if i + 1 < self.len() { i } else { i - 1 };
        let d = w2_distance(&self.measures[j], &self.measures[j + 1])?;
        Ok(d / (self.times[j + 1] - self.times[j]))
    }

    /// Forward-difference speeds from the continuity equation.
    pub fn tangent_speeds(&self) -> Result<Vec<f64>, TransportError> {
        (0..self.len() - 1)
            .map(|i| tangent_speed(&self.measures[i], &self.measures[i + 1], self.times[i + 1] - self.times[i]))
            .collect()
    }

    /// `∫ |μ̇|² ds` as a Riemann sum of forward-difference speeds.
    pub fn action(&self) -> Result<f64, TransportError> {
        self.action_with(w2_distance)
    }

    pub fn action_with<F>(&self, metric: F) -> Result<f64, TransportError>
    where
        F: Fn(&DiscreteMeasure, &DiscreteMeasure) -> Result<f64, TransportError>,
    {
        let speeds = self.speeds_with(metric)?;
        Ok(speeds
            .iter()
            .zip(self.times.windows(2))
            .map(|(v, w)| v * v * (w[1] - w[0]))
            .sum())
    }

    /// `∫ |μ̇| ds`.
    pub fn length_with<F>(&self, metric: F) -> Result<f64, TransportError>
    where
        F: Fn(&DiscreteMeasure, &DiscreteMeasure) -> Result<f64, TransportError>,
    {
        let speeds = self.speeds_with(metric)?;
        Ok(speeds
            .iter()
            .zip(self.times.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MetricGraph;
    use crate::grid::Grid;
    use std::sync::Arc;

    fn unit() -> Arc<Grid> {
        Arc::new(Grid::discretize(Arc::new(MetricGraph::interval(1.0).unwrap()), 0.25))
    }

    fn atoms(gr: &Arc<Grid>, pts: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::atoms(
            gr.clone(),
            pts.iter()
                .map(|&(s, m)| Atom {
                    point: GraphPoint::new(0, s - 0.5),
                    mass: m,
                })
                .collect(),
        )
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let gr = unit();
        let mu = DiscreteMeasure::uniform(gr);
        let (d, plan) = w2(&mu, &mu).unwrap();
        assert!(d < 1e-12);
        for &(i, j, _) in &plan.entries {
            assert_eq!(i, j);
        }
    }

    #[test]
    fn two_point_examples() {
        let gr = unit();
        let (d, plan) = w2(&atoms(&gr, &[(0.1, 1.0)]), &atoms(&gr, &[(0.8, 1.0)])).unwrap();
        assert!((d - 0.7).abs() < 1e-14);
        assert_eq!(plan.entries.len(), 1);
        let mu = atoms(&gr, &[(0.0, 0.5), (1.0, 0.5)]);
        let nu = atoms(&gr, &[(0.25, 0.5), (0.75, 0.5)]);
        let (d, plan) = w2(&mu, &nu).unwrap();
        assert!((plan.cost - 1.0 / 16.0).abs() < 1e-15);
        assert!((d - 0.25).abs() < 1e-15);
        assert!(plan.duality_gap() < 1e-12);
    }

    #[test]
    fn mass_mismatch_is_reported() {
        let gr = unit();
        let r = w2(&atoms(&gr, &[(0.1, 1.0)]), &atoms(&gr, &[(0.8, 0.5)]));
        assert!(matches!(r, Err(TransportError::MassMismatch(..))));
    }

    #[test]
    fn dirac_geodesic_midpoint() {
        let gr = unit();
        let a = atoms(&gr, &[(0.0, 1.0)]);
        let b = atoms(&gr, &[(1.0, 1.0)]);
        let mid = wasserstein_geodesic(&a, &b, 0.5).unwrap();
        assert_eq!(mid.atoms.len(), 1);
        assert!(mid.atoms[0].point.s.abs() < 1e-15);
        let start = wasserstein_geodesic(&a, &b, 0.0).unwrap();
        assert_eq!(start.atoms, a.atoms);
    }

    #[test]
    fn actions() {
        let gr = unit();
        let a = atoms(&gr, &[(0.0, 1.0)]);
        let b = atoms(&gr, &[(1.0, 1.0)]);
        let (_, plan) = w2(&a, &b).unwrap();
        let curve = MeasureCurve::uniform_times(8, |s| interpolate_plan(&a, &b, &plan, s));
        assert!((curve.action().unwrap() - 1.0).abs() < 1e-12);
        assert!((curve.metric_derivative(8).unwrap() - 1.0).abs() < 1e-12);
        let still = MeasureCurve::uniform_times(4, |_| a.clone());
        assert_eq!(still.action().unwrap(), 0.0);
    }
}
