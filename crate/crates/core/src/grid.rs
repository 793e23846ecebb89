//! Uniform per-edge spatial discretization with shared vertex nodes.

use std::sync::Arc;

use crate::graph::{GraphPoint, MetricGraph};

/// Flat layout: vertex nodes first (index = vertex id), then the interior
/// nodes of each edge in edge order.
#[derive(Debug, Clone)]
pub struct Grid {
    graph: Arc<MetricGraph>,
    nodes_per_edge: Vec<usize>,
    spacing: Vec<f64>,
    /// Flat index of the first interior node of each edge.
    interior_offset: Vec<usize>,
    mass: Vec<f64>,
    len: usize,
}

/// Location of a point relative to the grid: it lies in the cell between
/// flat nodes `left` and `right` with weight `theta` on `right`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellLocation {
    pub left: usize,
    pub right: usize,
    pub theta: f64,
}

impl Grid {
    /// `n_e = max(2, ceil(ℓ_e / target_h) + 1)` nodes per edge.
    pub fn discretize(graph: Arc<MetricGraph>, target_h: f64) -> Self {
        assert!(target_h > 0.0, "target_h must be positive");
        let counts = graph
            .edges()
            .iter()
            .map(|e| {
                // guard against ceil(3.0000000000000004) = 4
                let cells = (e.length / target_h * (1.0 - 1e-12)).ceil() as usize;
                cells.max(1) + 1
            })
            .collect();
        Self::with_counts(graph, counts)
    }

    pub fn with_counts(graph: Arc<MetricGraph>, nodes_per_edge: Vec<usize>) -> Self {
        assert_eq!(nodes_per_edge.len(), graph.num_edges());
        let nv = graph.num_vertices();
        let mut interior_offset = Vec::with_capacity(graph.num_edges());
        let mut spacing = Vec::with_capacity(graph.num_edges());
        let mut next = nv;
        for (e, &n) in graph.edges().iter().zip(&nodes_per_edge) {
            assert!(n >= 2, "every edge needs at least its two end nodes");
            interior_offset.push(next);
            next += n - 2;
            spacing.push(e.length / (n - 1) as f64);
        }
        let mut mass = vec![0.0; next];
        for (id, e) in graph.edges().iter().enumerate() {
            let h = spacing[id];
            mass[e.tail] += 0.5 * h;
            mass[e.head] += 0.5 * h;
            let off = interior_offset[id];
            for k in 0..nodes_per_edge[id] - 2 {
                mass[off + k] = h;
            }
        }
        Self {
            graph,
            nodes_per_edge,
            spacing,
            interior_offset,
            mass,
            len: next,
        }
    }

    pub fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn nodes_on_edge(&self, e: usize) -> usize {
        self.nodes_per_edge[e]
    }

    pub fn spacing(&self, e: usize) -> f64 {
        self.spacing[e]
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    /// Lumped mass (trapezoidal weight) of each flat node.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Flat index of node `k` on edge `e`.
    pub fn index(&self, e: usize, k: usize) -> usize {
        let n = self.nodes_per_edge[e];
        let edge = self.graph.edge(e);
        if k == 0 {
            edge.tail
        } else if k == n - 1 {
            edge.head
        } else {
            self.interior_offset[e] + k - 1
        }
    }

    /// Flat indices of the nodes along edge `e`, tail to head.
    pub fn edge_indices(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes_per_edge[e]).map(move |k| self.index(e, k))
    }

    pub fn coord(&self, e: usize, k: usize) -> f64 {
        -self.graph.edge(e).half() + k as f64 * self.spacing[e]
    }

    /// A representative point for flat node `i`.
    pub fn node_point(&self, i: usize) -> GraphPoint {
        let nv = self.graph.num_vertices();
        if i < nv {
            return self.graph.vertex_point(i);
        }
        let e = self
            .interior_offset
            .partition_point(|&off| off <= i)
            .saturating_sub(1);
        let k = i - self.interior_offset[e] + 1;
        GraphPoint::new(e, self.coord(e, k))
    }

    /// Whether flat node `i` is a vertex node.
    pub fn is_vertex(&self, i: usize) -> bool {
        i < self.graph.num_vertices()
    }

    pub fn locate(&self, p: &GraphPoint) -> CellLocation {
        let e = p.edge;
        let n = self.nodes_per_edge[e];
        let h = self.spacing[e];
        let r = ((p.s + self.graph.edge(e).half()) / h).clamp(0.0, (n - 1) as f64);
        let k = (r.floor() as usize).min(n - 2);
        let theta = (r - k as f64).clamp(0.0, 1.0);
        CellLocation {
            left: self.index(e, k),
            right: self.index(e, k + 1),
            theta,
        }
    }

    /// Piecewise-linear interpolation of nodal values at `p`.
    pub fn interpolate(&self, values: &[f64], p: &GraphPoint) -> f64 {
        let c = self.locate(p);
        (1.0 - c.theta) * values[c.left] + c.theta * values[c.right]
    }

    /// Row-major matrix of graph distances between all flat nodes.
    pub fn distance_matrix(&self) -> Vec<f64> {
        let pts: Vec<GraphPoint> = (0..self.len).map(|i| self.node_point(i)).collect();
        let n = self.len;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = self.graph.distance(&pts[i], &pts[j]);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        d
    }

    /// Trapezoidal integral of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.mass).map(|(v, m)| v * m).sum()
    }

    /// Cells as `(left, right, h, edge)`, tail to head along each edge.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64, usize)> + '_ {
        (0..self.graph.num_edges()).flat_map(move |e| {
            (0..self.nodes_per_edge[e] - 1)
                .map(move |k| (self.index(e, k), self.index(e, k + 1), self.spacing[e], e))
        })
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other)
            || (Arc::ptr_eq(&self.graph, &other.graph) && self.nodes_per_edge == other.nodes_per_edge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        let g = Arc::new(MetricGraph::interval(1.0).unwrap());
        assert_eq!(Grid::discretize(g.clone(), 0.25).len(), 5);
        assert_eq!(Grid::discretize(g, 10.0).len(), 2);

        let s = Arc::new(MetricGraph::star(&[1.0, 1.0, 1.0]).unwrap());
        let grid = Grid::discretize(s, 0.5);
        assert_eq!(grid.len(), 7);
        for e in 0..3 {
            assert_eq!(grid.nodes_on_edge(e), 3);
            assert_eq!(grid.index(e, 0), 0);
        }
    }

    #[test]
    fn lengths_and_mass_add_up() {
        let g = Arc::new(MetricGraph::from_edges(3, &[(0, 1, 0.7), (1, 2, 1.3), (2, 2, 0.9)]).unwrap());
        let grid = Grid::discretize(g.clone(), 0.1);
        let covered: f64 = (0..3)
            .map(|e| (grid.nodes_on_edge(e) - 1) as f64 * grid.spacing(e))
            .sum();
        assert!((covered - g.total_length()).abs() < 1e-14);
        let m: f64 = grid.mass().iter().sum();
        assert!((m - g.total_length()).abs() < 1e-14);
    }

    #[test]
    fn node_points_round_trip() {
        let s = Arc::new(MetricGraph::star(&[1.0, 0.5, 2.0]).unwrap());
        let grid = Grid::discretize(s, 0.1);
        for i in 0..grid.len() {
            let p = grid.node_point(i);
            let c = grid.locate(&p);
            let hit = if c.theta < 0.5 { c.left } else { c.right };
            assert_eq!(hit, i);
        }
    }
}
