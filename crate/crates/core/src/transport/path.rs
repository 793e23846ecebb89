//! Wasserstein-2 distance on graphs isometric to a segment, computed from
//! quantile functions of the piecewise-linear densities (plus atoms).
//!
//! On a segment `W₂²(μ, ν) = ∫₀¹ |Q_μ(u) - Q_ν(u)|² du`. This treats nodal
//! densities as genuinely continuous, so it resolves displacements far
//! below the grid spacing, which the discrete solver cannot.

use crate::error::TransportError;
use crate::field::DiscreteMeasure;
use crate::graph::{GraphPoint, MetricGraph};
use crate::grid::Grid;
use crate::quadrature::gauss;

/// Arc-length chart of a path graph.
#[derive(Debug, Clone)]
pub struct PathChart {
    /// Per edge: offset of its first-traversed end and whether it is
    /// traversed tail to head.
    offset: Vec<f64>,
    forward: Vec<bool>,
    order: Vec<usize>,
}

impl PathChart {
    pub fn new(g: &MetricGraph) -> Result<Self, TransportError> {
        let nv = g.num_vertices();
        if g.num_edges() + 1 != nv || g.edges().iter().any(|e| e.is_loop()) {
            return Err(TransportError::NotAPath);
        }
        if (0..nv).any(|v| g.degree(v) > 2) {
            return Err(TransportError::NotAPath);
        }
        let start = (0..nv).find(|&v| g.degree(v) == 1).ok_or(TransportError::NotAPath)?;
        let mut offset = vec![0.0; g.num_edges()];
        let mut forward = vec![true; g.num_edges()];
        let mut order = Vec::with_capacity(g.num_edges());
        let mut used = vec![false; g.num_edges()];
        let (mut v, mut pos) = (start, 0.0);
        while let Some(&e) = g.incident(v).iter().find(|&&e| !used[e]) {
            used[e] = true;
            let edge = g.edge(e);
            offset[e] = pos;
            forward[e] = edge.tail == v;
            order.push(e);
            pos += edge.length;
            v = if forward[e] { edge.head } else { edge.tail };
        }
        Ok(Self {
            offset,
            forward,
            order,
        })
    }

    pub fn position(&self, g: &MetricGraph, p: &GraphPoint) -> f64 {
        let half = g.edge(p.edge).half();
        let along = if self.forward[p.edge] {
            p.s + half
        } else {
            half - p.s
        };
        self.offset[p.edge] + along
    }

    /// Flat node indices in order along the segment.
    fn node_order(&self, grid: &Grid) -> Vec<usize> {
        let mut out = Vec::new();
        for &e in &self.order {
            let mut idx: Vec<usize> = grid.edge_indices(e).collect();
            if !self.forward[e] {
                idx.reverse();
            }
            if !out.is_empty() {
                idx.remove(0);
            }
            out.extend(idx);
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Atom { at: f64 },
    /// Linear density `f0 + slope (t - t0)` on `[t0, t0 + h]`.
    Linear { t0: f64, h: f64, f0: f64, slope: f64 },
}

/// Quantile function as consecutive pieces on `[0, total]`.
struct Quantile {
    starts: Vec<f64>,
    pieces: Vec<Piece>,
    total: f64,
}

impl Quantile {
    fn build(mu: &DiscreteMeasure, chart: &PathChart) -> Self {
        let grid = &mu.grid;
        let g = grid.graph();
        let nodes = chart.node_order(grid);
        let pos: Vec<f64> = nodes
            .iter()
            .map(|&i| chart.position(g, &grid.node_point(i)))
            .collect();
        // (position, sort key, mass, piece)
        let mut items: Vec<(f64, u8, f64, Piece)> = Vec::new();
        for w in 0..nodes.len() - 1 {
            let (t0, t1) = (pos[w], pos[w + 1]);
            let (f0, f1) = (mu.density[nodes[w]].max(0.0), mu.density[nodes[w + 1]].max(0.0));
            let h = t1 - t0;
            let mass = 0.5 * h * (f0 + f1);
            if mass > 0.0 {
                items.push((t0, 1, mass, Piece::Linear { t0, h, f0, slope: (f1 - f0) / h }));
            }
        }
        for a in &mu.atoms {
            if a.mass > 0.0 {
                let at = chart.position(g, &a.point);
                items.push((at, 0, a.mass, Piece::Atom { at }));
            }
        }
        // an atom at the left end of a cell precedes the cell's mass
        items.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut starts = Vec::with_capacity(items.len());
        let mut pieces = Vec::with_capacity(items.len());
        let mut acc = 0.0;
        for (_, _, m, p) in items {
            starts.push(acc);
            pieces.push(p);
            acc += m;
        }
        Self {
            starts,
            pieces,
            total: acc,
        }
    }

    fn piece_at(&self, u: f64) -> usize {
        self.starts.partition_point(|&s| s <= u).saturating_sub(1)
    }

    fn eval(&self, u: f64, k: usize) -> f64 {
        let du = (u - self.starts[k]).max(0.0);
        match self.pieces[k] {
            Piece::Atom { at } => at,
            Piece::Linear { t0, h, f0, slope } => {
                // solve f0 x + slope x²/2 = du for x ≥ 0
                let disc = (f0 * f0 + 2.0 * slope * du).max(0.0);
                let x = if slope.abs() * du <= 1e-14 * f0 * f0 {
                    du / f0
                } else {
                    2.0 * du / (f0 + disc.sqrt())
                };
                // rounding-level pieces must not leave their cell
                t0 + x.clamp(0.0, h)
            }
        }
    }
}

/// `W₂(μ, ν)` for measures on the same path graph.
pub fn w2_path(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64, TransportError> {
    if !mu.grid.same_as(&nu.grid) {
        return Err(TransportError::GridMismatch);
    }
    let chart = PathChart::new(mu.grid.graph())?;
    w2_path_with(&chart, mu, nu)
}

pub fn w2_path_with(chart: &PathChart, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64, TransportError> {
    let qa = Quantile::build(mu, chart);
    let qb = Quantile::build(nu, chart);
    if (qa.total - qb.total).abs() > 1e-12 * qa.total.max(1.0) {
        return Err(TransportError::MassMismatch(qa.total, qb.total));
    }
    // common breakpoints in normalized u; rescale b to a's total
    let scale = qb.total / qa.total;
    let mut breaks: Vec<f64> = qa.starts.clone();
    breaks.extend(qb.starts.iter().map(|s| s / scale));
    breaks.push(qa.total);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-16 * qa.total);

    let mut sum = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let ka = qa.piece_at(mid);
        let kb = qb.piece_at(mid * scale);
        sum += gauss(lo, hi, |u| {
            let d = qa.eval(u, ka) - qb.eval(u * scale, kb);
            d * d
        });
    }
    Ok(sum.max(0.0).sqrt())
}
