//! The extended graph `G^{2ε}`: one pendant edge of length `2ε` glued to
//! every vertex.
//!
//! Original vertices and edges keep their ids. The new degree-one vertex
//! attached to `v` has id `|V| + v` and the pendant edge `|E| + v` runs from
//! `v` (tail) to it (head).
//!
//! For an original edge `e = (v, w)` the pendant edges of `v` and `w` are
//! parametrized as continuations of `e`: `[-ℓ_e/2 - 2ε, -ℓ_e/2]` and
//! `[ℓ_e/2, ℓ_e/2 + 2ε]`. [`Extension::line_point`] resolves such an
//! extended coordinate to a point of `G^{2ε}`.

use std::sync::Arc;

use crate::error::GraphError;
use crate::graph::{Edge, GraphPoint, MetricGraph};

#[derive(Debug, Clone)]
pub struct Extension {
    pub eps: f64,
    original_vertices: usize,
    original_edges: usize,
    /// `α_e = (ℓ_e + 2ε) / ℓ_e` per original edge.
    alpha: Vec<f64>,
    lengths: Vec<f64>,
    tails: Vec<usize>,
    heads: Vec<usize>,
}

impl Extension {
    pub fn alpha(&self, e: usize) -> f64 {
        self.alpha[e]
    }

    pub fn original_vertices(&self) -> usize {
        self.original_vertices
    }

    pub fn original_edges(&self) -> usize {
        self.original_edges
    }

    pub fn pendant_edge(&self, v: usize) -> usize {
        self.original_edges + v
    }

    pub fn pendant_vertex(&self, v: usize) -> usize {
        self.original_vertices + v
    }

    /// Original points keep their coordinates.
    pub fn embed(&self, p: &GraphPoint) -> GraphPoint {
        debug_assert!(p.edge < self.original_edges);
        *p
    }

    /// Resolves coordinate `y ∈ [-ℓ_e/2 - 2ε, ℓ_e/2 + 2ε]` on the extended
    /// line of original edge `e` to a point of `G^{2ε}`.
    pub fn line_point(&self, e: usize, y: f64) -> GraphPoint {
        let half = 0.5 * self.lengths[e];
        if y < -half {
            // distance from the tail vertex, pendant coordinate = dist - ε
            let dist = (-half - y).min(2.0 * self.eps);
            GraphPoint::new(self.pendant_edge(self.tails[e]), dist - self.eps)
        } else if y > half {
            let dist = (y - half).min(2.0 * self.eps);
            GraphPoint::new(self.pendant_edge(self.heads[e]), dist - self.eps)
        } else {
            GraphPoint::new(e, y)
        }
    }

    /// Where a point of a pendant edge sits on the extended line of `e`,
    /// if that pendant belongs to an end of `e`. Self-loops touch the same
    /// pendant at both ends; the tail side is reported first.
    pub fn line_coords(&self, e: usize, p: &GraphPoint) -> Vec<f64> {
        let half = 0.5 * self.lengths[e];
        if p.edge == e {
            return vec![p.s];
        }
        let mut out = Vec::new();
        if p.edge >= self.original_edges {
            let v = p.edge - self.original_edges;
            let dist = p.s + self.eps;
            if self.tails[e] == v {
                out.push(-half - dist);
            }
            if self.heads[e] == v {
                out.push(half + dist);
            }
        }
        out
    }
}

/// Builds `G^{2ε}` and the bookkeeping relating it to `G`.
pub fn extend_graph(g: &MetricGraph, eps: f64) -> Result<(Arc<MetricGraph>, Extension), GraphError> {
    assert!(eps > 0.0, "extension width must be positive");
    let nv = g.num_vertices();
    let ne = g.num_edges();
    let mut labels: Vec<String> = g.labels().to_vec();
    labels.extend(g.labels().iter().map(|l| format!("{l}^ext")));
    let mut edges: Vec<Edge> = g.edges().to_vec();
    edges.extend((0..nv).map(|v| Edge {
        tail: v,
        head: nv + v,
        length: 2.0 * eps,
    }));
    let extended = MetricGraph::new(labels, edges)?;
    let ext = Extension {
        eps,
        original_vertices: nv,
        original_edges: ne,
        alpha: g
            .edges()
            .iter()
            .map(|e| (e.length + 2.0 * eps) / e.length)
            .collect(),
        lengths: g.edges().iter().map(|e| e.length).collect(),
        tails: g.edges().iter().map(|e| e.tail).collect(),
        heads: g.edges().iter().map(|e| e.head).collect(),
    };
    Ok((Arc::new(extended), ext))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pendant_counts_and_length() {
        let g = MetricGraph::interval(1.0).unwrap();
        let (x, ext) = extend_graph(&g, 0.1).unwrap();
        assert_eq!(x.num_edges(), 3);
        assert!((x.total_length() - 1.4).abs() < 1e-15);
        assert_eq!(x.num_vertices(), 4);
        assert!(ext.alpha(0) > 1.0);

        let s = MetricGraph::star(&[1.0, 1.0, 1.0]).unwrap();
        let (xs, _) = extend_graph(&s, 0.5).unwrap();
        assert_eq!(xs.num_edges(), 3 + 4);
        assert!((xs.total_length() - 7.0).abs() < 1e-15);
        assert_eq!(xs.num_vertices(), 8);
        for v in 4..8 {
            assert_eq!(xs.degree(v), 1);
        }
    }

    #[test]
    fn line_coordinates_resolve() {
        let g = MetricGraph::interval(1.0).unwrap();
        let (x, ext) = extend_graph(&g, 0.1).unwrap();
        let p = ext.line_point(0, -0.65);
        assert_eq!(p.edge, ext.pendant_edge(0));
        // 0.15 beyond the tail vertex
        assert!((x.distance(&p, &x.vertex_point(0)) - 0.15).abs() < 1e-14);
        assert_eq!(ext.line_coords(0, &p), vec![-0.65]);
        let q = ext.line_point(0, 0.7);
        assert_eq!(x.vertex_of(&q), Some(ext.pendant_vertex(1)));
    }
}
