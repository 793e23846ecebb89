//! Exact solver for the balanced transportation problem
//!
//! ```text
//! min Σ c_ij π_ij   s.t.  Σ_j π_ij = a_i,  Σ_i π_ij = b_j,  π ≥ 0
//! ```
//!
//! by the primal network simplex on the bipartite supply/demand graph. The
//! basis is kept as a spanning tree with exactly `m + n - 1` arcs (zero-flow
//! arcs included), potentials are recomputed from the tree each pivot, and
//! the solver falls back to Bland's rule after a run of degenerate pivots.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// `(i, j, π_ij)` for every basic arc with positive flow.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Row potentials `u` and column potentials `v` with `u_i + v_j ≤ c_ij`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

impl TransportSolution {
    /// `Σ a_i u_i + Σ b_j v_j`.
    pub fn dual_objective(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(&self.u).map(|(x, y)| x * y).sum::<f64>()
            + b.iter().zip(&self.v).map(|(x, y)| x * y).sum::<f64>()
    }
}

struct Basis {
    m: usize,
    n: usize,
    /// Basic arcs as `(row, col, flow)`.
    arcs: Vec<(usize, usize, f64)>,
}

impl Basis {
    /// Northwest-corner start; degenerate steps keep a zero arc so the
    /// basis always spans.
    fn northwest(a: &[f64], b: &[f64]) -> Self {
        let (m, n) = (a.len(), b.len());
        let mut ra = a.to_vec();
        let mut rb = b.to_vec();
        let mut arcs = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        while i < m && j < n {
            let x = ra[i].min(rb[j]);
            arcs.push((i, j, x));
            ra[i] -= x;
            rb[j] -= x;
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(arcs.len(), m + n - 1);
        Self { m, n, arcs }
    }

    /// Tree adjacency over nodes `0..m` (rows) and `m..m+n` (columns),
    /// storing the arc index per neighbor.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j, _)) in self.arcs.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, cost: &[f64], adj: &[Vec<(usize, usize)>]) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let mut pot = vec![f64::NAN; m + n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            for &(y, k) in &adj[x] {
                if pot[y].is_nan() {
                    let (i, j, _) = self.arcs[k];
                    let c = cost[i * n + j];
                    // u_i + v_j = c_ij
                    pot[y] = c - pot[x];
                    queue.push_back(y);
                }
            }
        }
        (pot[..m].to_vec(), pot[m..].to_vec())
    }

    /// Arc indices on the tree path from `from` to `to`, in order.
    fn tree_path(&self, adj: &[Vec<(usize, usize)>], from: usize, to: usize) -> Vec<usize> {
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(x) = queue.pop_front() {
            if x == to {
                break;
            }
            for &(y, k) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some((x, k));
                    queue.push_back(y);
                }
            }
        }
        let mut path = Vec::new();
        let mut x = to;
        while x != from {
            let (p, k) = parent[x].expect("basis is a spanning tree");
            path.push(k);
            x = p;
        }
        path.reverse();
        path
    }
}

/// Solves the transportation problem exactly (up to floating-point pivots).
/// `cost` is row-major `a.len() x b.len()`. Masses must be nonnegative and
/// balanced; the last demand absorbs any rounding imbalance.
pub fn solve_transport(a: &[f64], b: &[f64], cost: &[f64]) -> TransportSolution {
    let (m, n) = (a.len(), b.len());
    assert!(m > 0 && n > 0, "empty marginals");
    assert_eq!(cost.len(), m * n);
    let mut b = b.to_vec();
    let imbalance = a.iter().sum::<f64>() - b.iter().sum::<f64>();
    b[n - 1] = (b[n - 1] + imbalance).max(0.0);

    let cmax = cost.iter().fold(0.0f64, |x, c| x.max(c.abs())).max(1e-300);
    let tol = 1e-12 * cmax;
    let mut basis = Basis::northwest(a, &b);
    let mut pivots = 0;
    let mut degenerate_run = 0;
    let max_pivots = 50 * (m + n) * (m + n) + 1000;

    loop {
        let adj = basis.adjacency();
        let (u, v) = basis.potentials(cost, &adj);
        let bland = degenerate_run > m + n;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -tol;
        'scan: for i in 0..m {
            for j in 0..n {
                let r = cost[i * n + j] - u[i] - v[j];
                if r < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            return finish(basis, u, v, cost, pivots);
        };
        if pivots >= max_pivots {
            // unreachable in practice; return the current feasible plan
            return finish(basis, u, v, cost, pivots);
        }
        pivots += 1;

        // cycle: entering arc (+), then the tree path from column ej back to row ei
        let path = basis.tree_path(&adj, m + ej, ei);
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let f = basis.arcs[k].2.max(0.0);
                let better = f < theta || (f == theta && bland && k < leave);
                if better {
                    theta = f;
                    leave = k;
                }
            }
        }
        for (pos, &k) in path.iter().enumerate() {
            let f = &mut basis.arcs[k].2;
            if pos % 2 == 0 {
                *f = (*f - theta).max(0.0);
            } else {
                *f += theta;
            }
        }
        basis.arcs[leave] = (ei, ej, theta);
        if theta == 0.0 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }
}

fn finish(basis: Basis, u: Vec<f64>, v: Vec<f64>, cost: &[f64], pivots: usize) -> TransportSolution {
    let n = basis.n;
    let flows: Vec<_> = basis.arcs.into_iter().filter(|a| a.2 > 0.0).collect();
    let total = flows.iter().map(|&(i, j, f)| f * cost[i * n + j]).sum();
    TransportSolution {
        flows,
        cost: total,
        u,
        v,
        pivots,
    }
}
