use std::sync::Arc;

use clap::ValueEnum;
use mgcurv_core::curvature::{check_gradient_flow, Speed};
use mgcurv_core::regularization::grid_w2;
use mgcurv_core::suite::Series;
use mgcurv_core::transport::PathChart;
use mgcurv_core::{Atom, DiscreteMeasure, Grid, HeatSemigroup, MetricGraph};

use crate::error::CliError;
use crate::{create_dir, load_graph, output, FlowArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Constant density; every series stays flat.
    Uniform,
    /// `1 + ½ φ₁ / ‖φ₁‖∞` with `φ₁` the first eigenfunction.
    Cosine,
    /// A unit atom at a vertex, started from its heat kernel at `t_min`.
    Dirac,
}

fn parse_poly(text: &str, edges: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let polys = text
        .split(';')
        .map(|edge| {
            edge.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Config(format!("bad coefficient `{}`", c.trim())))
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    if polys.len() != edges {
        return Err(CliError::Config(format!(
            "--poly lists {} edges but the graph has {edges}",
            polys.len()
        )));
    }
    Ok(polys)
}

fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * s + a)
}

/// Nodal values of per-edge polynomials; a vertex takes the mean of the
/// incident edge ends.
fn poly_density(grid: &Arc<Grid>, polys: &[Vec<f64>]) -> Result<DiscreteMeasure, CliError> {
    let g = grid.graph();
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let v = if grid.is_vertex(i) {
            let ends: Vec<f64> = g
                .edges()
                .iter()
                .enumerate()
                .flat_map(|(e, edge)| {
                    let half = edge.half();
                    let tail = (edge.tail == i).then(|| horner(&polys[e], -half));
                    let head = (edge.head == i).then(|| horner(&polys[e], half));
                    tail.into_iter().chain(head)
                })
                .collect();
            ends.iter().sum::<f64>() / ends.len() as f64
        } else {
            let p = grid.node_point(i);
            horner(&polys[p.edge], p.s)
        };
        if !v.is_finite() || v < 0.0 {
            return Err(CliError::Config(format!("initial density is negative or not finite ({v})")));
        }
        values.push(v);
    }
    if grid.integrate(&values) <= 0.0 {
        return Err(CliError::Config("initial density has zero mass".into()));
    }
    Ok(DiscreteMeasure::probability_density(grid.clone(), values))
}

fn vertex_index(g: &MetricGraph, label: &Option<String>) -> Result<usize, CliError> {
    match label {
        None => Ok(0),
        Some(l) => g
            .labels()
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| CliError::Config(format!("no vertex labelled `{l}`"))),
    }
}

pub fn run(a: &FlowArgs) -> Result<(), CliError> {
    let graph = Arc::new(load_graph(&a.graph)?);
    for (name, v) in [("h", a.h), ("t-end", a.t_end), ("t-min", a.t_min)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Config(format!("{name} must be positive, got {v}")));
        }
    }
    if a.steps == Some(0) {
        return Err(CliError::Config("steps must be positive".into()));
    }
    let grid = Arc::new(Grid::discretize(graph.clone(), a.h));
    let heat = HeatSemigroup::for_grid(grid.clone()).map_err(mgcurv_core::CurvatureError::from)?;

    let mut t0 = 0.0;
    let mu0 = match (&a.poly, a.preset) {
        (Some(text), _) => poly_density(&grid, &parse_poly(text, graph.num_edges())?)?,
        (None, Preset::Uniform) => DiscreteMeasure::uniform(grid.clone()),
        (None, Preset::Cosine) => {
            let phi = heat.spectrum().eigenvector(1);
            let m = phi.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            DiscreteMeasure::probability_density(grid.clone(), phi.iter().map(|v| 1.0 + 0.5 * v / m).collect())
        }
        (None, Preset::Dirac) => {
            let v = vertex_index(&graph, &a.at)?;
            let atom = DiscreteMeasure::atoms(
                grid.clone(),
                vec![Atom {
                    point: graph.vertex_point(v),
                    mass: 1.0,
                }],
            );
            t0 = a.t_min;
            heat.apply_ht(&atom, a.t_min)
        }
    };

    let h = grid.max_spacing();
    let steps = a.steps.unwrap_or_else(|| (10.0 * a.t_end / h).ceil() as usize);
    let metric = grid_w2(&grid);
    let speed = if PathChart::new(&graph).is_ok() {
        Speed::Metric(&metric)
    } else {
        Speed::Continuity
    };
    let r = check_gradient_flow(&heat, &mu0, a.t_end, steps, speed)?;

    create_dir(&a.out)?;
    let series = Series {
        columns: ["t", "entropy", "fisher", "half_action", "d_partial"].map(String::from).to_vec(),
        rows: (0..r.times.len())
            .map(|j| vec![t0 + r.times[j], r.entropy[j], r.fisher[j], r.action[j], r.d_partial[j]])
            .collect(),
    };
    output::write_series(&a.out, "flow.csv", &series)?;
    println!(
        "t in [{t0:.6}, {:.6}], {steps} steps: Ent {:.6e} -> {:.6e}, half action {:.6e}, half Fisher {:.6e}, D {:.3e}",
        t0 + a.t_end,
        r.entropy_start,
        r.entropy_end,
        r.half_action,
        r.half_fisher,
        r.d
    );
    Ok(())
}
