//! Compact metric graphs.
//!
//! Every edge `e = (tail, head)` of length `ℓ_e` is identified with the
//! interval `[-ℓ_e/2, ℓ_e/2]`; the tail sits at `-ℓ_e/2` (outer normal `-1`)
//! and the head at `+ℓ_e/2` (outer normal `+1`). Multi-edges and self-loops
//! are allowed.

use std::cmp::Ordering;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// Relative slack used when comparing path lengths for ties.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub length: f64,
}

impl Edge {
    pub fn half(&self) -> f64 {
        0.5 * self.length
    }

    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }

    /// Coordinate of `vertex` on this edge when entering/leaving through the
    /// given end. `at_head` selects the end for self-loops.
    fn end_coord(&self, at_head: bool) -> f64 {
        if at_head {
            self.half()
        } else {
            -self.half()
        }
    }
}

/// A location on the graph: an edge and a coordinate in `[-ℓ_e/2, ℓ_e/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphPoint {
    pub edge: usize,
    pub s: f64,
}

impl GraphPoint {
    pub fn new(edge: usize, s: f64) -> Self {
        Self { edge, s }
    }
}

#[derive(Debug, Clone)]
pub struct MetricGraph {
    labels: Vec<String>,
    edges: Vec<Edge>,
    incident: Vec<Vec<usize>>,
    deg_max: usize,
    /// Row-major `|V| x |V|` shortest-path distances between vertices.
    vertex_dist: Vec<f64>,
}

/// One step of a route: traverse `edge` from coordinate `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Leg {
    edge: usize,
    from: f64,
    to: f64,
}

impl Leg {
    fn len(&self) -> f64 {
        (self.to - self.from).abs()
    }
}

impl MetricGraph {
    /// Builds and validates a graph from vertex labels and `(tail, head, length)`
    /// triples indexing into `labels`.
    pub fn new(labels: Vec<String>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if edges.is_empty() {
            return Err(GraphError::Empty);
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(GraphError::DuplicateVertex(a.clone()));
            }
        }
        let nv = labels.len();
        let mut incident = vec![Vec::new(); nv];
        for (id, e) in edges.iter().enumerate() {
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(GraphError::NonpositiveLength {
                    edge: id,
                    length: e.length,
                });
            }
            for v in [e.tail, e.head] {
                if v >= nv {
                    return Err(GraphError::DanglingVertexReference {
                        edge: id,
                        vertex: v.to_string(),
                    });
                }
            }
            incident[e.tail].push(id);
            if !e.is_loop() {
                incident[e.head].push(id);
            }
        }
        // a self-loop contributes two edge ends at its vertex
        let deg_max = (0..nv)
            .map(|v| {
                incident[v]
                    .iter()
                    .map(|&e| if edges[e].is_loop() { 2 } else { 1 })
                    .sum::<usize>()
            })
            .max()
            .unwrap_or(0);

        let mut pg: UnGraph<(), f64> = UnGraph::with_capacity(nv, edges.len());
        for _ in 0..nv {
            pg.add_node(());
        }
        for e in &edges {
            if !e.is_loop() {
                pg.add_edge(NodeIndex::new(e.tail), NodeIndex::new(e.head), e.length);
            }
        }
        let mut vertex_dist = vec![f64::INFINITY; nv * nv];
        for a in 0..nv {
            let row = dijkstra(&pg, NodeIndex::new(a), None, |e| *e.weight());
            for (node, d) in row {
                vertex_dist[a * nv + node.index()] = d;
            }
        }
        if let Some(b) = (0..nv).find(|&b| vertex_dist[b].is_infinite()) {
            return Err(GraphError::DisconnectedGraph(
                labels[b].clone(),
                labels[0].clone(),
            ));
        }
        Ok(Self {
            labels,
            edges,
            incident,
            deg_max,
            vertex_dist,
        })
    }

    /// Convenience constructor with vertices labelled `0..n`.
    pub fn from_edges(n_vertices: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let labels = (0..n_vertices).map(|v| v.to_string()).collect();
        let edges = edges
            .iter()
            .map(|&(tail, head, length)| Edge { tail, head, length })
            .collect();
        Self::new(labels, edges)
    }

    /// Single edge of the given length.
    pub fn interval(length: f64) -> Result<Self, GraphError> {
        Self::from_edges(2, &[(0, 1, length)])
    }

    /// Star with hub `0` and leaves `1..=arms`; every edge points hub -> leaf.
    pub fn star(lengths: &[f64]) -> Result<Self, GraphError> {
        let edges: Vec<_> = lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| (0, i + 1, l))
            .collect();
        Self::from_edges(lengths.len() + 1, &edges)
    }

    /// One vertex with a single self-loop.
    pub fn circle(length: f64) -> Result<Self, GraphError> {
        Self::from_edges(1, &[(0, 0, length)])
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident[v]
            .iter()
            .map(|&e| if self.edges[e].is_loop() { 2 } else { 1 })
            .sum()
    }

    pub fn deg_max(&self) -> usize {
        self.deg_max
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }

    pub fn vertex_distance(&self, a: usize, b: usize) -> f64 {
        self.vertex_dist[a * self.num_vertices() + b]
    }

    /// A point representing vertex `v` (on its first incident edge).
    pub fn vertex_point(&self, v: usize) -> GraphPoint {
        let e = self.incident[v][0];
        let edge = &self.edges[e];
        let s = if edge.tail == v { -edge.half() } else { edge.half() };
        GraphPoint::new(e, s)
    }

    pub fn validate_point(&self, p: &GraphPoint) -> Result<(), GraphError> {
        let half = self
            .edges
            .get(p.edge)
            .map(Edge::half)
            .ok_or(GraphError::InvalidPoint {
                edge: p.edge,
                s: p.s,
                half: f64::NAN,
            })?;
        if !(p.s.is_finite() && p.s.abs() <= half * (1.0 + 1e-14)) {
            return Err(GraphError::InvalidPoint {
                edge: p.edge,
                s: p.s,
                half,
            });
        }
        Ok(())
    }

    /// The vertex a point coincides with, if any.
    pub fn vertex_of(&self, p: &GraphPoint) -> Option<usize> {
        let e = &self.edges[p.edge];
        let tol = TIE_TOL * e.length;
        if (p.s + e.half()).abs() <= tol {
            Some(e.tail)
        } else if (p.s - e.half()).abs() <= tol {
            Some(e.head)
        } else {
            None
        }
    }

    /// Point equality modulo the identification of edge ends at vertices.
    pub fn same_point(&self, x: &GraphPoint, y: &GraphPoint) -> bool {
        match (self.vertex_of(x), self.vertex_of(y)) {
            (Some(a), Some(b)) => a == b,
            (None, None) => x.edge == y.edge && x.s == y.s,
            _ => false,
        }
    }

    /// Shortest-path distance between two on-edge points.
    pub fn distance(&self, x: &GraphPoint, y: &GraphPoint) -> f64 {
        let ex = &self.edges[x.edge];
        let ey = &self.edges[y.edge];
        let mut best = if x.edge == y.edge {
            (x.s - y.s).abs()
        } else {
            f64::INFINITY
        };
        let x_ends = [(ex.tail, x.s + ex.half()), (ex.head, ex.half() - x.s)];
        let y_ends = [(ey.tail, y.s + ey.half()), (ey.head, ey.half() - y.s)];
        for &(a, da) in &x_ends {
            for &(b, db) in &y_ends {
                best = best.min(da + self.vertex_distance(a, b) + db);
            }
        }
        best
    }

    /// Point at fraction `frac` of the way from `x` to `y` along a shortest
    /// path. Among equal-length paths the one with the lexicographically
    /// smallest sequence of traversed edge ids wins.
    pub fn geodesic_point(&self, x: &GraphPoint, y: &GraphPoint, frac: f64) -> GraphPoint {
        let frac = frac.clamp(0.0, 1.0);
        if frac == 0.0 {
            return *x;
        }
        if frac == 1.0 {
            return *y;
        }
        let route = self.shortest_route(x, y);
        let total: f64 = route.iter().map(Leg::len).sum();
        let mut remaining = frac * total;
        for leg in &route {
            let len = leg.len();
            if remaining <= len {
                let dir = (leg.to - leg.from).signum();
                return GraphPoint::new(leg.edge, leg.from + dir * remaining);
            }
            remaining -= len;
        }
        *y
    }

    fn shortest_route(&self, x: &GraphPoint, y: &GraphPoint) -> Vec<Leg> {
        let ex = &self.edges[x.edge];
        let ey = &self.edges[y.edge];
        let mut candidates: Vec<Vec<Leg>> = Vec::new();
        if x.edge == y.edge {
            candidates.push(vec![Leg {
                edge: x.edge,
                from: x.s,
                to: y.s,
            }]);
        }
        for x_at_head in [false, true] {
            let a = if x_at_head { ex.head } else { ex.tail };
            for y_at_head in [false, true] {
                let b = if y_at_head { ey.head } else { ey.tail };
                let mut legs = vec![Leg {
                    edge: x.edge,
                    from: x.s,
                    to: ex.end_coord(x_at_head),
                }];
                legs.extend(self.vertex_route(a, b));
                legs.push(Leg {
                    edge: y.edge,
                    from: ey.end_coord(y_at_head),
                    to: y.s,
                });
                candidates.push(legs);
            }
        }
        let lengths: Vec<f64> = candidates
            .iter()
            .map(|c| c.iter().map(Leg::len).sum())
            .collect();
        let best = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        let tol = TIE_TOL * best.max(1.0);
        let key = |legs: &Vec<Leg>| -> Vec<usize> {
            legs.iter()
                .filter(|l| l.len() > 0.0)
                .map(|l| l.edge)
                .collect()
        };
        candidates
            .into_iter()
            .zip(lengths)
            .filter(|(_, l)| *l <= best + tol)
            .map(|(c, _)| c)
            .min_by(|a, b| key(a).cmp(&key(b)).then(Ordering::Equal))
            .expect("at least one route")
    }

    /// Lexicographically smallest shortest vertex-to-vertex route.
    fn vertex_route(&self, a: usize, b: usize) -> Vec<Leg> {
        let mut legs = Vec::new();
        let mut u = a;
        while u != b {
            let target = self.vertex_distance(u, b);
            let tol = TIE_TOL * target.max(1.0);
            let mut next = None;
            for &e in &self.incident[u] {
                let edge = &self.edges[e];
                if edge.is_loop() {
                    continue;
                }
                let w = if edge.tail == u { edge.head } else { edge.tail };
                if (edge.length + self.vertex_distance(w, b) - target).abs() <= tol {
                    // incident lists are sorted by edge id, so the first hit is minimal
                    let (from, to) = if edge.tail == u {
                        (-edge.half(), edge.half())
                    } else {
                        (edge.half(), -edge.half())
                    };
                    next = Some((w, Leg { edge: e, from, to }));
                    break;
                }
            }
            let (w, leg) = next.expect("shortest-path successor exists in a connected graph");
            legs.push(leg);
            u = w;
        }
        legs
    }
}

/// Graph-description record as read from disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDescription {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeDescription>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VertexId {
    Int(i64),
    Name(String),
}

impl std::fmt::Display for VertexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VertexId::Int(i) => write!(f, "{i}"),
            VertexId::Name(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDescription {
    pub tail: VertexId,
    pub head: VertexId,
    pub length: f64,
}

impl GraphDescription {
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))
    }
}

/// Validates a description and builds the graph.
pub fn build_graph(desc: &GraphDescription) -> Result<MetricGraph, GraphError> {
    let labels: Vec<String> = desc.vertices.iter().map(|v| v.to_string()).collect();
    let lookup = |edge: usize, v: &VertexId| -> Result<usize, GraphError> {
        let name = v.to_string();
        labels
            .iter()
            .position(|l| *l == name)
            .ok_or(GraphError::DanglingVertexReference { edge, vertex: name })
    };
    let mut edges = Vec::with_capacity(desc.edges.len());
    for (i, e) in desc.edges.iter().enumerate() {
        edges.push(Edge {
            tail: lookup(i, &e.tail)?,
            head: lookup(i, &e.head)?,
            length: e.length,
        });
    }
    MetricGraph::new(labels, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star3() -> MetricGraph {
        MetricGraph::star(&[1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn small_graphs_validate() {
        let g = MetricGraph::interval(1.0).unwrap();
        assert_eq!(g.deg_max(), 1);
        assert_eq!(star3().deg_max(), 3);
        assert_eq!(MetricGraph::circle(1.0).unwrap().deg_max(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            MetricGraph::from_edges(2, &[(0, 1, 0.0)]),
            Err(GraphError::NonpositiveLength { .. })
        ));
        assert!(matches!(
            MetricGraph::from_edges(3, &[(0, 1, 1.0)]),
            Err(GraphError::DisconnectedGraph(..))
        ));
        assert!(matches!(
            MetricGraph::from_edges(2, &[(0, 2, 1.0)]),
            Err(GraphError::DanglingVertexReference { .. })
        ));
    }

    #[test]
    fn description_parsing() {
        let desc = GraphDescription::parse(
            r#"{"vertices": ["hub", "a", 2], "edges": [
                {"tail": "hub", "head": "a", "length": 1.0},
                {"tail": "hub", "head": 2, "length": 0.5}]}"#,
        )
        .unwrap();
        let g = build_graph(&desc).unwrap();
        assert_eq!(g.num_vertices(), 3);
        assert_eq!(g.total_length(), 1.5);

        let unknown = GraphDescription::parse(r#"{"vertices": [0], "edges": [], "weights": []}"#);
        assert!(matches!(unknown, Err(GraphError::Parse(_))));
        let dangling = GraphDescription::parse(
            r#"{"vertices": [0, 1], "edges": [{"tail": 0, "head": 7, "length": 1}]}"#,
        )
        .unwrap();
        assert!(matches!(
            build_graph(&dangling),
            Err(GraphError::DanglingVertexReference { .. })
        ));
    }

    #[test]
    fn distances() {
        let g = MetricGraph::interval(1.0).unwrap();
        let a = GraphPoint::new(0, -0.5);
        let b = GraphPoint::new(0, 0.5);
        assert_eq!(g.distance(&a, &a), 0.0);
        assert_eq!(g.distance(&a, &b), 1.0);

        let s = star3();
        let tip1 = GraphPoint::new(0, 0.5);
        let tip2 = GraphPoint::new(1, 0.5);
        assert!((s.distance(&tip1, &tip2) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn loop_distance_goes_both_ways() {
        let c = MetricGraph::circle(1.0).unwrap();
        let x = GraphPoint::new(0, -0.4);
        let y = GraphPoint::new(0, 0.4);
        assert!((c.distance(&x, &y) - 0.2).abs() < 1e-15);
        let z = GraphPoint::new(0, 0.05);
        assert!((c.distance(&x, &z) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn vertex_identification() {
        let s = star3();
        let hub_a = GraphPoint::new(0, -0.5);
        let hub_b = GraphPoint::new(2, -0.5);
        assert!(s.same_point(&hub_a, &hub_b));
        assert_eq!(s.distance(&hub_a, &hub_b), 0.0);
        assert!(!s.same_point(&hub_a, &GraphPoint::new(0, 0.5)));
    }

    #[test]
    fn geodesic_points() {
        let g = MetricGraph::interval(1.0).unwrap();
        let a = GraphPoint::new(0, -0.5);
        let b = GraphPoint::new(0, 0.5);
        assert_eq!(g.geodesic_point(&a, &b, 0.0), a);
        assert_eq!(g.geodesic_point(&a, &b, 1.0), b);
        let q = g.geodesic_point(&a, &b, 0.25);
        assert!((q.s - (-0.25)).abs() < 1e-15);

        let s = star3();
        let mid = s.geodesic_point(&GraphPoint::new(0, 0.5), &GraphPoint::new(1, 0.5), 0.5);
        assert_eq!(s.vertex_of(&mid), Some(0));
    }

    #[test]
    fn geodesic_tie_break_prefers_small_edge_ids() {
        // two parallel unit edges between the same vertices
        let g = MetricGraph::from_edges(3, &[(0, 1, 1.0), (0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let x = g.vertex_point(0);
        let y = GraphPoint::new(2, 0.5);
        let z = g.geodesic_point(&x, &y, 0.25);
        assert_eq!(z.edge, 0);
        // antipodal points on a circle: both arcs have length 1/2
        let c = MetricGraph::circle(1.0).unwrap();
        let p = GraphPoint::new(0, -0.25);
        let q = GraphPoint::new(0, 0.25);
        let m = c.geodesic_point(&p, &q, 0.5);
        assert!((c.distance(&p, &m) - 0.25).abs() < 1e-14);
        assert!((m.s - 0.0).abs() < 1e-14);
    }
}
