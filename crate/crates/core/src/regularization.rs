//! Regularization between `G` and the extended graph `G^{2ε}`.
//!
//! Functions on `G^{2ε}` are averaged over windows of width `2ε` along the
//! extended line of each edge; measures on `G` are pushed to `G^{2ε}` by
//! duality. Measures on the extended grid are stored through their hat
//! moments `m_i = ∫ H_i dμ^ε`, which keeps the total mass and the density
//! cap `1/(2ε)` exact: a lumped nodal density is a weighted average of the
//! true density.

use std::sync::Arc;

use crate::error::{GraphError, TransportError};
use crate::extension::{extend_graph, Extension};
use crate::field::{DiscreteMeasure, GridFunction};
use crate::functional::{entropy, EdgeField};
use crate::graph::{GraphPoint, MetricGraph};
use crate::grid::Grid;
use crate::quadrature::gauss;
use crate::transport::{w2_distance, w2_path_with, MeasureCurve, PathChart};

/// Nodes of the extended grid met along the extended line of one edge,
/// in increasing coordinate order.
#[derive(Debug, Clone)]
struct Line {
    ys: Vec<f64>,
    nodes: Vec<usize>,
}

impl Line {
    fn build(ext: &Extension, grid: &Grid, e: usize) -> Self {
        let g = grid.graph();
        let edge = g.edge(e);
        let half = edge.half();
        let tail_p = ext.pendant_edge(edge.tail);
        let head_p = ext.pendant_edge(edge.head);
        let hp_t = grid.spacing(tail_p);
        let hp_h = grid.spacing(head_p);
        let mut ys = Vec::new();
        let mut nodes = Vec::new();
        for j in (1..grid.nodes_on_edge(tail_p)).rev() {
            ys.push(-half - j as f64 * hp_t);
            nodes.push(grid.index(tail_p, j));
        }
        for k in 0..grid.nodes_on_edge(e) {
            ys.push(grid.coord(e, k));
            nodes.push(grid.index(e, k));
        }
        for j in 1..grid.nodes_on_edge(head_p) {
            ys.push(half + j as f64 * hp_h);
            nodes.push(grid.index(head_p, j));
        }
        Self { ys, nodes }
    }

    fn cell(&self, y: f64) -> usize {
        self.ys
            .partition_point(|&t| t <= y)
            .saturating_sub(1)
            .min(self.ys.len() - 2)
    }

    /// `∫_{-∞}^{y} H_k` for the hat of line node `k`.
    fn hat_primitive(&self, k: usize, y: f64) -> f64 {
        let n = self.ys.len();
        let yk = self.ys[k];
        let left = if k > 0 { yk - self.ys[k - 1] } else { 0.0 };
        let right = if k + 1 < n { self.ys[k + 1] - yk } else { 0.0 };
        if y <= yk - left {
            0.0
        } else if y <= yk {
            let d = y - (yk - left);
            0.5 * d * d / left
        } else if y < yk + right {
            let d = yk + right - y;
            0.5 * left + 0.5 * right - 0.5 * d * d / right
        } else {
            0.5 * (left + right)
        }
    }

    fn hat_window(&self, k: usize, a: f64, b: f64) -> f64 {
        self.hat_primitive(k, b) - self.hat_primitive(k, a)
    }

    /// Prefix integrals of a nodal function along the line.
    fn primitive_table(&self, values: &[f64]) -> Vec<f64> {
        let mut cum = Vec::with_capacity(self.ys.len());
        cum.push(0.0);
        for c in 0..self.ys.len() - 1 {
            let h = self.ys[c + 1] - self.ys[c];
            let avg = 0.5 * (values[self.nodes[c]] + values[self.nodes[c + 1]]);
            cum.push(cum[c] + h * avg);
        }
        cum
    }

    fn primitive(&self, values: &[f64], cum: &[f64], y: f64) -> f64 {
        let y = y.clamp(self.ys[0], self.ys[self.ys.len() - 1]);
        let c = self.cell(y);
        let h = self.ys[c + 1] - self.ys[c];
        let (v0, v1) = (values[self.nodes[c]], values[self.nodes[c + 1]]);
        let d = y - self.ys[c];
        cum[c] + d * (v0 + 0.5 * (v1 - v0) * d / h)
    }

    fn eval(&self, values: &[f64], y: f64) -> f64 {
        let y = y.clamp(self.ys[0], self.ys[self.ys.len() - 1]);
        let c = self.cell(y);
        let t = (y - self.ys[c]) / (self.ys[c + 1] - self.ys[c]);
        (1.0 - t) * values[self.nodes[c]] + t * values[self.nodes[c + 1]]
    }
}

/// The `ε`-regularization between a grid on `G` and a grid on `G^{2ε}`.
#[derive(Debug, Clone)]
pub struct RegularizationMap {
    eps: f64,
    source: Arc<Grid>,
    extended: Arc<Grid>,
    ext: Extension,
    lines: Vec<Line>,
}

impl RegularizationMap {
    /// Original edges keep their node counts; pendant edges are resolved at
    /// the finest source spacing.
    pub fn new(source: Arc<Grid>, eps: f64) -> Result<Self, GraphError> {
        let g = source.graph();
        let (xg, ext) = extend_graph(g, eps)?;
        let h = (0..g.num_edges()).map(|e| source.spacing(e)).fold(f64::INFINITY, f64::min);
        let mut counts: Vec<usize> = (0..g.num_edges()).map(|e| source.nodes_on_edge(e)).collect();
        let pendant = ((2.0 * eps / h * (1.0 - 1e-12)).ceil() as usize).max(1) + 1;
        counts.extend(std::iter::repeat_n(pendant, g.num_vertices()));
        let extended = Arc::new(Grid::with_counts(xg, counts));
        let lines = (0..g.num_edges()).map(|e| Line::build(&ext, &extended, e)).collect();
        Ok(Self {
            eps,
            source,
            extended,
            ext,
            lines,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn source(&self) -> &Arc<Grid> {
        &self.source
    }

    pub fn extended(&self) -> &Arc<Grid> {
        &self.extended
    }

    pub fn extension(&self) -> &Extension {
        &self.ext
    }

    pub fn alpha(&self, e: usize) -> f64 {
        self.ext.alpha(e)
    }

    /// `1 + 2ε/ℓ_min`, the speed amplification bound.
    pub fn action_bound(&self) -> f64 {
        1.0 + 2.0 * self.eps / self.source.graph().min_edge_length()
    }

    fn window(&self, e: usize, x: f64) -> (f64, f64) {
        let c = self.alpha(e) * x;
        (c - self.eps, c + self.eps)
    }

    /// `φ^ε(x) = (1/2ε) ∫_{αx-ε}^{αx+ε} φ`, exact for piecewise-linear `φ`.
    pub fn regularize_function(&self, phi: &GridFunction) -> GridFunction {
        assert!(phi.grid.same_as(&self.extended), "function must live on the extended grid");
        let tables: Vec<Vec<f64>> = self.lines.iter().map(|l| l.primitive_table(&phi.values)).collect();
        let values = (0..self.source.len())
            .map(|i| {
                let p = self.source.node_point(i);
                let (a, b) = self.window(p.edge, p.s);
                let line = &self.lines[p.edge];
                let cum = &tables[p.edge];
                (line.primitive(&phi.values, cum, b) - line.primitive(&phi.values, cum, a)) / (2.0 * self.eps)
            })
            .collect();
        GridFunction::new(self.source.clone(), values)
    }

    /// `φ^ε` at an arbitrary point of the source graph.
    pub fn regularize_at(&self, phi: &GridFunction, p: &GraphPoint) -> f64 {
        assert!(phi.grid.same_as(&self.extended), "function must live on the extended grid");
        let line = &self.lines[p.edge];
        let cum = line.primitive_table(&phi.values);
        let (a, b) = self.window(p.edge, p.s);
        (line.primitive(&phi.values, &cum, b) - line.primitive(&phi.values, &cum, a)) / (2.0 * self.eps)
    }

    /// `∇φ^ε(x) = (α/2ε)(φ(αx+ε) - φ(αx-ε))`, per edge at the source nodes.
    pub fn regularized_gradient(&self, phi: &GridFunction) -> EdgeField {
        assert!(phi.grid.same_as(&self.extended));
        let per_edge = (0..self.source.graph().num_edges())
            .map(|e| {
                let scale = self.alpha(e) / (2.0 * self.eps);
                (0..self.source.nodes_on_edge(e))
                    .map(|k| {
                        let (a, b) = self.window(e, self.source.coord(e, k));
                        let line = &self.lines[e];
                        scale * (line.eval(&phi.values, b) - line.eval(&phi.values, a))
                    })
                    .collect()
            })
            .collect();
        EdgeField {
            grid: self.source.clone(),
            per_edge,
        }
    }

    /// Hat moments `∫ H_i dμ^ε = ∫ H_i^ε dμ` on the extended grid.
    pub fn hat_moments(&self, mu: &DiscreteMeasure) -> Vec<f64> {
        assert!(mu.grid.same_as(&self.source), "measure must live on the source grid");
        let mut m = vec![0.0; self.extended.len()];
        let two_eps = 2.0 * self.eps;
        for (e, line) in self.lines.iter().enumerate() {
            let alpha = self.alpha(e);
            let half = self.source.graph().edge(e).half();
            let h = self.source.spacing(e);
            let n_src = self.source.nodes_on_edge(e);
            let f: Vec<f64> = self.source.edge_indices(e).map(|i| mu.density[i]).collect();
            if f.iter().all(|&v| v == 0.0) {
                continue;
            }
            for k in 0..line.ys.len() {
                let lo_y = if k > 0 { line.ys[k - 1] } else { line.ys[0] };
                let hi_y = line.ys[(k + 1).min(line.ys.len() - 1)];
                let xa = ((lo_y - self.eps) / alpha).max(-half);
                let xb = ((hi_y + self.eps) / alpha).min(half);
                if xb <= xa {
                    continue;
                }
                let mut cuts = vec![xa, xb];
                for j in k.saturating_sub(1)..=(k + 1).min(line.ys.len() - 1) {
                    for y in [line.ys[j] - self.eps, line.ys[j] + self.eps] {
                        let x = y / alpha;
                        if x > xa && x < xb {
                            cuts.push(x);
                        }
                    }
                }
                let first = ((xa + half) / h).ceil() as usize;
                let last = (((xb + half) / h).floor() as usize).min(n_src - 1);
                for c in first..=last {
                    let x = -half + c as f64 * h;
                    if x > xa && x < xb {
                        cuts.push(x);
                    }
                }
                cuts.sort_by(f64::total_cmp);
                let mut acc = 0.0;
                for w in cuts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if b <= a {
                        continue;
                    }
                    let c = (((0.5 * (a + b) + half) / h).floor() as usize).min(n_src - 2);
                    let (f0, f1) = (f[c], f[c + 1]);
                    if f0 == 0.0 && f1 == 0.0 {
                        continue;
                    }
                    let x0 = -half + c as f64 * h;
                    acc += gauss(a, b, |x| {
                        let t = (x - x0) / h;
                        let dens = (1.0 - t) * f0 + t * f1;
                        dens * line.hat_window(k, alpha * x - self.eps, alpha * x + self.eps)
                    });
                }
                m[line.nodes[k]] += acc / two_eps;
            }
        }
        for a in &mu.atoms {
            let e = a.point.edge;
            let line = &self.lines[e];
            let (lo, hi) = self.window(e, a.point.s);
            let k0 = line.cell(lo);
            let k1 = (line.cell(hi) + 1).min(line.ys.len() - 1);
            for k in k0..=k1 {
                m[line.nodes[k]] += a.mass * line.hat_window(k, lo, hi) / two_eps;
            }
        }
        m
    }

    /// `μ^ε` on the extended grid as a lumped nodal density.
    ///
    /// A window average never exceeds `1/(2ε)`; rounding in the hat
    /// integrals can overshoot by a few ulps, so values are clipped there.
    pub fn regularize_measure(&self, mu: &DiscreteMeasure) -> DiscreteMeasure {
        let m = self.hat_moments(mu);
        let cap = 1.0 / (2.0 * self.eps);
        let density = m
            .iter()
            .zip(self.extended.mass())
            .map(|(x, w)| (x / w).min(cap * mu.total_mass().max(0.0)))
            .collect();
        DiscreteMeasure::from_density(self.extended.clone(), density)
    }
}

/// W₂ on a grid: the quantile formula on segments, the discrete solver otherwise.
pub fn grid_w2(grid: &Grid) -> impl Fn(&DiscreteMeasure, &DiscreteMeasure) -> Result<f64, TransportError> {
    let chart = PathChart::new(grid.graph()).ok();
    move |a, b| match &chart {
        Some(c) => w2_path_with(c, a, b),
        None => w2_distance(a, b),
    }
}

/// Forward-difference speeds with the most faithful rule available: the
/// quantile `W₂` on segments, the continuity equation for positive
/// densities elsewhere, and the discrete solver for anything else (atoms,
/// densities with holes), which is accurate for steps much longer than `h`.
pub fn curve_speeds(curve: &MeasureCurve, grid: &Grid) -> Result<Vec<f64>, TransportError> {
    let positive = |m: &DiscreteMeasure| !m.has_atoms() && m.density.iter().all(|&f| f > 0.0);
    if PathChart::new(grid.graph()).is_ok() {
        curve.speeds_with(grid_w2(grid))
    } else if curve.measures.iter().all(positive) {
        curve.tangent_speeds()
    } else {
        curve.speeds_with(w2_distance)
    }
}

#[derive(Debug, Clone)]
pub struct ActionTransferReport {
    pub eps: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub speeds: Vec<f64>,
    pub regularized_speeds: Vec<f64>,
    /// `|μ̇^ε| / |μ̇|` per sample; a resting sample counts as 0.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Compares forward-difference speeds before and after regularization.
pub fn action_transfer_check(
    curve: &MeasureCurve,
    map: &RegularizationMap,
    tolerance: f64,
) -> Result<ActionTransferReport, TransportError> {
    let reg = MeasureCurve::new(
        curve.times.clone(),
        curve.measures.iter().map(|m| map.regularize_measure(m)).collect(),
    );
    let speeds = curve_speeds(curve, map.source())?;
    let regularized_speeds = curve_speeds(&reg, map.extended())?;
    let bound = map.action_bound();
    let mut pass = true;
    let ratios: Vec<f64> = speeds
        .iter()
        .zip(&regularized_speeds)
        .map(|(&v, &r)| {
            pass &= r <= bound * v + tolerance;
            if v > 0.0 {
                r / v
            } else {
                0.0
            }
        })
        .collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ActionTransferReport {
        eps: map.eps(),
        bound,
        tolerance,
        speeds,
        regularized_speeds,
        ratios,
        max_ratio,
        pass,
    })
}

/// Standard bump `exp(-1/(1-τ²))` on `(-1, 1)`, unnormalized.
pub fn bump(tau: f64) -> f64 {
    if tau.abs() < 1.0 {
        (-1.0 / (1.0 - tau * tau)).exp()
    } else {
        0.0
    }
}

/// Discrete time convolution with `ζ_k(τ) = k ζ(kτ)` on a uniform sample
/// lattice, the curve extended constantly outside `[0, 1]`.
///
/// Weights are normalized to sum to one, so every mollified sample is a
/// convex combination of original samples and the Jensen-type bounds hold
/// exactly.
#[derive(Debug, Clone)]
pub struct TimeMollifier {
    pub k: f64,
    /// Weights for lattice offsets `-reach..=reach`.
    pub weights: Vec<f64>,
    pub reach: usize,
}

impl TimeMollifier {
    pub fn new(k: f64, spacing: f64) -> Self {
        assert!(k > 0.0 && spacing > 0.0);
        let reach = (1.0 / (k * spacing)).ceil() as usize;
        let mut weights: Vec<f64> = (0..=2 * reach)
            .map(|j| bump(k * (j as f64 - reach as f64) * spacing))
            .collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        } else {
            weights[reach] = 1.0;
        }
        Self { k, weights, reach }
    }

    /// `(ζ_k ∗ g)(s_i)` for samples `g` on the lattice.
    pub fn convolve(&self, values: &[f64], i: usize) -> f64 {
        self.terms(values.len(), i).map(|(j, w)| w * values[j]).sum()
    }

    /// `(sample index, weight)` pairs for output sample `i`, indices clamped.
    pub fn terms(&self, n: usize, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(move |(o, &w)| {
            let j = i as i64 + o as i64 - self.reach as i64;
            (j.clamp(0, n as i64 - 1) as usize, w)
        })
    }

    pub fn apply(&self, curve: &MeasureCurve) -> MeasureCurve {
        let n = curve.len();
        let measures = (0..n)
            .map(|i| {
                let parts: Vec<(f64, &DiscreteMeasure)> =
                    self.terms(n, i).map(|(j, w)| (w, &curve.measures[j])).collect();
                DiscreteMeasure::mixture(&parts)
            })
            .collect();
        MeasureCurve::new(curve.times.clone(), measures)
    }
}

fn lattice_spacing(curve: &MeasureCurve) -> f64 {
    let n = curve.len();
    assert!(n >= 2, "a curve needs at least two samples");
    let ds = (curve.times[n - 1] - curve.times[0]) / (n - 1) as f64;
    for w in curve.times.windows(2) {
        assert!(((w[1] - w[0]) - ds).abs() <= 1e-9 * ds, "time samples must be uniform");
    }
    ds
}

pub fn mollify_in_time(curve: &MeasureCurve, k: f64) -> MeasureCurve {
    TimeMollifier::new(k, lattice_spacing(curve)).apply(curve)
}

/// Output of the extend / regularize / mollify pipeline at level `n`.
#[derive(Debug, Clone)]
pub struct StronglyRegularCurve {
    pub n: usize,
    pub map: RegularizationMap,
    pub curve: MeasureCurve,
    /// Forward differences `(f_{i+1} - f_i) / Δs` of the nodal densities.
    pub derivatives: Vec<Vec<f64>>,
}

impl StronglyRegularCurve {
    pub fn max_density(&self) -> f64 {
        self.curve
            .measures
            .iter()
            .flat_map(|m| m.density.iter())
            .cloned()
            .fold(0.0, f64::max)
    }

    /// Largest second difference quotient of the densities in time.
    pub fn max_second_difference(&self) -> f64 {
        let t = &self.curve.times;
        self.derivatives
            .windows(2)
            .enumerate()
            .flat_map(|(i, w)| {
                let dt = t[i + 1] - t[i];
                w[0].iter().zip(&w[1]).map(move |(a, b)| ((b - a) / dt).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.curve.measures.iter().map(entropy).collect()
    }
}

/// Regularizes in space with `ε = 1/n`, then mollifies in time with `k = n`.
pub fn strongly_regular_approx(curve: &MeasureCurve, n: usize) -> Result<StronglyRegularCurve, GraphError> {
    assert!(n > 0);
    let grid = curve.measures[0].grid.clone();
    let map = RegularizationMap::new(grid, 1.0 / n as f64)?;
    let spaced = MeasureCurve::new(
        curve.times.clone(),
        curve.measures.iter().map(|m| map.regularize_measure(m)).collect(),
    );
    let smooth = mollify_in_time(&spaced, n as f64);
    let derivatives = smooth
        .measures
        .windows(2)
        .zip(smooth.times.windows(2))
        .map(|(m, t)| {
            m[0].density
                .iter()
                .zip(&m[1].density)
                .map(|(a, b)| (b - a) / (t[1] - t[0]))
                .collect()
        })
        .collect();
    Ok(StronglyRegularCurve {
        n,
        map,
        curve: smooth,
        derivatives,
    })
}

/// Convenience for a graph without a prebuilt grid.
pub fn regularization_for(graph: Arc<MetricGraph>, h: f64, eps: f64) -> Result<RegularizationMap, GraphError> {
    RegularizationMap::new(Arc::new(Grid::discretize(graph, h)), eps)
}
