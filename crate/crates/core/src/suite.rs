//! Verification suites over one graph at one resolution.
//!
//! A [`Session`] discretizes the graph, builds the heat semigroup, settles
//! the curvature function (forced or fitted) and then runs any of the six
//! suites. Cases run in parallel and are collected in a fixed order, so a
//! given configuration always yields the same reports.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{
    check_be, check_evi, check_gradient_flow, check_kw, check_rcd, estimate_c, lambda1, test_basis, CEstimate,
    CaseResult, CurvatureFunction, EviResult, Geodesic, Lambda1Estimate, Speed, TestFunction, ToleranceModel,
    VerificationReport,
};
use crate::error::{CurvatureError, SuiteError};
use crate::field::{Atom, DiscreteMeasure, GridFunction};
use crate::graph::{GraphPoint, MetricGraph};
use crate::grid::Grid;
use crate::heat::HeatSemigroup;
use crate::regularization::{action_transfer_check, grid_w2, RegularizationMap};
use crate::transport::{MeasureCurve, PathChart};

/// Function-based Bakry-Émery residuals, calibrated on the interval where
/// the discrete residual is exactly zero.
pub const BE_TOLERANCE: ToleranceModel = ToleranceModel::new(1.0, 0.0, 1e-9);
/// Transport suites on segments, where `W₂` is the exact quantile formula.
pub const PATH_TRANSPORT_TOLERANCE: ToleranceModel = ToleranceModel::new(1.0, 0.0, 1e-9);
/// Transport suites elsewhere. The discrete solver moves mass between
/// nodes, which is a first-order error in `h`; the constant is the worst
/// `residual / h` seen on the interval with the same solver.
pub const GRAPH_TRANSPORT_TOLERANCE: ToleranceModel = ToleranceModel::new(0.25, 0.0, 1e-9).with_h_order(1);
pub const GF_TOLERANCE: ToleranceModel = ToleranceModel::new(0.1, 0.1, 1e-9);
/// Regularization residuals against the window resolution `h/ε`.
pub const REG_TOLERANCE: ToleranceModel = ToleranceModel::new(0.04, 0.0, 1e-9);

/// Each `ε` of a regularization sweep gets a grid with `h ≤ ε / REG_RESOLUTION`.
pub const REG_RESOLUTION: f64 = 4.0;
/// Dirac pairs are compared along one long chord: the discrete solver is
/// accurate for displacements much larger than `h`, and the kernel
/// `x ↦ box_x` is `α`-Lipschitz, so the chord obeys the same bound.
const DIRAC_CURVE_STEPS: usize = 1;

/// Limit for the largest speed ratio at the smallest `ε` of a sweep.
pub const ACTION_TREND_LIMIT: f64 = 1.02;

/// Times for the EVI grid `(t₀, t₁)`, `t₀ ≤ t₁`.
pub const EVI_TIMES: [f64; 4] = [0.0, 0.05, 0.1, 0.2];
pub const RCD_S: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const RCD_T: [f64; 2] = [0.0, 0.1];
pub const RCD_H: [f64; 2] = [0.05, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    Be,
    Kw,
    Evi,
    Rcd,
    Gf,
    Reg,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 6] = [
        SuiteKind::Be,
        SuiteKind::Kw,
        SuiteKind::Evi,
        SuiteKind::Rcd,
        SuiteKind::Gf,
        SuiteKind::Reg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuiteKind::Be => "be",
            SuiteKind::Kw => "kw",
            SuiteKind::Evi => "evi",
            SuiteKind::Rcd => "rcd",
            SuiteKind::Gf => "gf",
            SuiteKind::Reg => "reg",
        }
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SuiteKind {
    type Err = SuiteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SuiteKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SuiteError::Config(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub h: f64,
    pub t_grid: Vec<f64>,
    pub eps_sweep: Vec<f64>,
    pub seed: u64,
    #[serde(rename = "force_C")]
    pub force_c: Option<f64>,
    #[serde(rename = "force_K")]
    pub force_k: Option<f64>,
    /// Measure pairs for the Kuwada suite.
    pub pairs: usize,
    /// Density pairs for EVI and bump pairs for RCD.
    pub evi_pairs: usize,
    pub rcd_pairs: usize,
    pub n_eigen: usize,
    pub n_random: usize,
    /// Horizon of the gradient-flow suite.
    pub flow_time: f64,
    /// `Δt = h / flow_ratio` in the gradient-flow suite.
    pub flow_ratio: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            h: 0.05,
            t_grid: vec![0.01, 0.05, 0.1, 0.5, 1.0],
            eps_sweep: vec![0.1, 0.05, 0.02, 0.01, 0.005],
            seed: 0,
            force_c: None,
            force_k: None,
            pairs: 100,
            evi_pairs: 12,
            rcd_pairs: 6,
            n_eigen: 10,
            n_random: 20,
            flow_time: 0.2,
            flow_ratio: 10.0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), SuiteError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(SuiteError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), SuiteError> {
        positive("h", self.h)?;
        positive("flow time", self.flow_time)?;
        positive("flow ratio", self.flow_ratio)?;
        if self.t_grid.is_empty() {
            return Err(SuiteError::Config("t-grid is empty".into()));
        }
        for &t in &self.t_grid {
            positive("every t in the t-grid", t)?;
        }
        if self.eps_sweep.is_empty() {
            return Err(SuiteError::Config("eps sweep is empty".into()));
        }
        for &e in &self.eps_sweep {
            positive("every eps in the sweep", e)?;
        }
        if let Some(c) = self.force_c {
            if !(c.is_finite() && c >= 1.0) {
                return Err(SuiteError::Config(format!("forced C must be finite and at least 1, got {c}")));
            }
        }
        if let Some(k) = self.force_k {
            if !k.is_finite() || k < 0.0 {
                return Err(SuiteError::Config(format!("forced K must be finite and non-negative, got {k}")));
            }
        }
        if self.pairs == 0 || self.evi_pairs == 0 || self.rcd_pairs == 0 {
            return Err(SuiteError::Config("pair counts must be positive".into()));
        }
        Ok(())
    }
}

struct RegSweep<'a> {
    dirac_at: GraphPoint,
    densities: &'a [DiscreteMeasure; 2],
    path: (GraphPoint, GraphPoint),
}

struct RegEps {
    cases: Vec<CaseResult>,
    h: f64,
    bound: f64,
    max_ratio: f64,
}

/// Extra per-suite data for plotting.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub suite: SuiteKind,
    pub report: VerificationReport,
    /// Suite-specific series (flow trajectories, sweep tables).
    pub series: Option<Series>,
}

/// Everything shared by the suites of one run.
pub struct Session {
    pub config: SuiteConfig,
    pub graph: Arc<MetricGraph>,
    pub grid: Arc<Grid>,
    pub heat: HeatSemigroup,
    pub lambda1: Lambda1Estimate,
    pub curvature: CurvatureFunction,
    pub c_estimate: Option<CEstimate>,
    pub basis: Vec<TestFunction>,
    path: bool,
}

impl Session {
    pub fn new(graph: Arc<MetricGraph>, config: SuiteConfig) -> Result<Self, SuiteError> {
        config.validate()?;
        let grid = Arc::new(Grid::discretize(graph.clone(), config.h));
        let heat = HeatSemigroup::for_grid(grid.clone())?;
        let lambda1 = lambda1(&graph, config.h)?;
        let k = config.force_k.unwrap_or(lambda1.extrapolated);
        let basis = test_basis(&heat, config.seed, config.n_eigen, config.n_random);
        let (c, c_estimate) = match config.force_c {
            Some(c) => (c, None),
            None => {
                let est = estimate_c(&heat, k, &basis, &config.t_grid)?;
                (est.c_est, Some(est))
            }
        };
        let path = PathChart::new(&graph).is_ok();
        Ok(Self {
            config,
            graph,
            grid,
            heat,
            lambda1,
            curvature: CurvatureFunction::new(c, k),
            c_estimate,
            basis,
            path,
        })
    }

    /// Whether `W₂` is the exact quantile formula on this graph.
    pub fn is_path(&self) -> bool {
        self.path
    }

    fn rng(&self, kind: SuiteKind) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(kind.stream());
        rng
    }

    fn transport_tolerance(&self) -> ToleranceModel {
        if self.path {
            PATH_TRANSPORT_TOLERANCE
        } else {
            GRAPH_TRANSPORT_TOLERANCE
        }
    }

    fn metric_note(&self) -> &'static str {
        if self.path {
            "W2 by the quantile formula"
        } else {
            "W2 by the discrete solver on nodal masses and atoms"
        }
    }

    pub fn run(&self, kind: SuiteKind) -> Result<SuiteOutcome, SuiteError> {
        match kind {
            SuiteKind::Be => self.run_be(),
            SuiteKind::Kw => self.run_kw(),
            SuiteKind::Evi => self.run_evi(),
            SuiteKind::Rcd => self.run_rcd(),
            SuiteKind::Gf => self.run_gf(),
            SuiteKind::Reg => self.run_reg(),
        }
    }

    fn h(&self) -> f64 {
        self.grid.max_spacing()
    }

    fn run_be(&self) -> Result<SuiteOutcome, SuiteError> {
        let ts = &self.config.t_grid;
        let cases: Vec<CaseResult> = self
            .basis
            .par_iter()
            .flat_map_iter(|f| ts.iter().map(move |&t| check_be(&self.heat, &self.curvature, f, t)))
            .collect();
        let report = VerificationReport::from_cases("BE_w", Some(self.curvature), BE_TOLERANCE.budget(self.h(), 0.0), cases)
            .with_note(format!("{} test functions, normalized to |grad f|_inf = 1", self.basis.len()));
        Ok(self.finish(SuiteKind::Be, report, None))
    }

    fn run_kw(&self) -> Result<SuiteOutcome, SuiteError> {
        let mut rng = self.rng(SuiteKind::Kw);
        let pairs: Vec<(String, DiscreteMeasure, DiscreteMeasure)> = (0..self.config.pairs)
            .map(|i| {
                let (kind, mu, nu) = match i % 3 {
                    0 => ("dirac", self.random_dirac(&mut rng), self.random_dirac(&mut rng)),
                    1 => ("density", self.random_density(&mut rng), self.random_density(&mut rng)),
                    _ => ("mixed", self.random_dirac(&mut rng), self.random_density(&mut rng)),
                };
                (format!("{kind}{i}"), mu, nu)
            })
            .collect();
        let metric = grid_w2(&self.grid);
        let jobs: Vec<(usize, f64)> = (0..pairs.len())
            .flat_map(|p| self.config.t_grid.iter().map(move |&t| (p, t)))
            .collect();
        let cases = jobs
            .par_iter()
            .map(|&(p, t)| {
                let (label, mu, nu) = &pairs[p];
                let r = check_kw(&self.heat, &self.curvature, mu, nu, t, &metric)?;
                Ok(CaseResult::new(label.clone(), &[("pair", p as f64), ("t", t), ("w2", r.initial)], r.residual))
            })
            .collect::<Result<Vec<_>, CurvatureError>>()?;
        let report = VerificationReport::from_cases(
            "K_w",
            Some(self.curvature),
            self.transport_tolerance().budget(self.h(), 0.0),
            cases,
        )
        .with_note(self.metric_note());
        Ok(self.finish(SuiteKind::Kw, report, None))
    }

    fn run_evi(&self) -> Result<SuiteOutcome, SuiteError> {
        let mut rng = self.rng(SuiteKind::Evi);
        let pairs: Vec<(DiscreteMeasure, DiscreteMeasure)> = (0..self.config.evi_pairs)
            .map(|_| (self.random_density(&mut rng), self.random_density(&mut rng)))
            .collect();
        let metric = grid_w2(&self.grid);
        let mut jobs = Vec::new();
        for p in 0..pairs.len() {
            for (a, &t0) in EVI_TIMES.iter().enumerate() {
                for &t1 in &EVI_TIMES[a..] {
                    jobs.push((p, t0, t1));
                }
            }
        }
        let cases = jobs
            .par_iter()
            .map(|&(p, t0, t1)| {
                let (mu0, mu1) = &pairs[p];
                let r = check_evi(&self.heat, &self.curvature, mu0, mu1, t0, t1, &metric)?;
                Ok(CaseResult::new(format!("pair{p}"), &[("pair", p as f64), ("t0", t0), ("t1", t1)], r.residual))
            })
            .collect::<Result<Vec<_>, CurvatureError>>()?;
        // diagonal consistency with the Kuwada residual
        let diag = pairs
            .par_iter()
            .map(|(mu0, mu1)| {
                let mut worst: f64 = 0.0;
                for &t in &self.config.t_grid {
                    let k = check_kw(&self.heat, &self.curvature, mu1, mu0, t, &metric)?;
                    let e = check_evi(&self.heat, &self.curvature, mu0, mu1, t, t, &metric)?;
                    worst = worst.max((e.residual - EviResult::from_kuwada(&k)).abs());
                }
                Ok(worst)
            })
            .collect::<Result<Vec<f64>, CurvatureError>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let report = VerificationReport::from_cases(
            "EVI_w",
            Some(self.curvature),
            self.transport_tolerance().budget(self.h(), 0.0),
            cases,
        )
        .with_note(self.metric_note())
        .with_note(format!("diagonal t0 = t1 mismatch against K_w: {diag:e}"));
        Ok(self.finish(SuiteKind::Evi, report, None))
    }

    fn run_rcd(&self) -> Result<SuiteOutcome, SuiteError> {
        let mut rng = self.rng(SuiteKind::Rcd);
        let radius = 0.5 * self.graph.min_edge_length();
        let geos = (0..self.config.rcd_pairs)
            .map(|_| {
                let a = self.bump(&self.random_point(&mut rng), radius);
                let b = self.bump(&self.random_point(&mut rng), radius);
                Geodesic::new(&a, &b)
            })
            .collect::<Result<Vec<_>, CurvatureError>>()?;
        let metric = grid_w2(&self.grid);
        let mut jobs = Vec::new();
        for p in 0..geos.len() {
            for &t in &RCD_T {
                for &hh in &RCD_H {
                    for &s in &RCD_S {
                        jobs.push((p, s, t, hh));
                    }
                }
            }
        }
        let cases = jobs
            .par_iter()
            .map(|&(p, s, t, hh)| {
                let r = check_rcd(&self.heat, &self.curvature, &geos[p], s, t, hh, &metric)?;
                Ok(CaseResult::new(
                    format!("bumps{p}"),
                    &[("pair", p as f64), ("s", s), ("t", t), ("step", hh)],
                    r.residual,
                ))
            })
            .collect::<Result<Vec<_>, CurvatureError>>()?;
        let report = VerificationReport::from_cases(
            "RCD_w",
            Some(self.curvature),
            self.transport_tolerance().budget(self.h(), 0.0),
            cases,
        )
        .with_note(self.metric_note())
        .with_note("geodesics by plan-based displacement interpolation");
        Ok(self.finish(SuiteKind::Rcd, report, None))
    }

    /// Initial density `1 + ½ φ₁/‖φ₁‖_∞`; on the unit interval this is the
    /// cosine bump `1 + ½cos(πx)` up to orientation.
    pub fn flow_start(&self) -> DiscreteMeasure {
        let phi = self.heat.spectrum().eigenvector(1);
        let m = phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        DiscreteMeasure::probability_density(self.grid.clone(), phi.iter().map(|v| 1.0 + 0.5 * v / m).collect())
    }

    fn run_gf(&self) -> Result<SuiteOutcome, SuiteError> {
        let h = self.h();
        let steps = (self.config.flow_time * self.config.flow_ratio / h).ceil() as usize;
        let metric = grid_w2(&self.grid);
        let speed = if self.path {
            Speed::Metric(&metric)
        } else {
            Speed::Continuity
        };
        let r = check_gradient_flow(&self.heat, &self.flow_start(), self.config.flow_time, steps, speed)?;
        let cases = r
            .times
            .iter()
            .zip(&r.d_partial)
            .skip(1)
            .map(|(&t, &d)| CaseResult::new("D", &[("t", t)], d.abs()))
            .collect();
        let series = Series {
            columns: ["t", "entropy", "fisher", "half_action", "d_partial"].map(String::from).to_vec(),
            rows: (0..r.times.len())
                .map(|j| vec![r.times[j], r.entropy[j], r.fisher[j], r.action[j], r.d_partial[j]])
                .collect(),
        };
        let report = VerificationReport::from_cases("gradient_flow", None, GF_TOLERANCE.budget(h, r.dt), cases)
            .with_note(format!(
                "D = {:e}, half action {:e}, half Fisher {:e}, entropy drop {:e}",
                r.d,
                r.half_action,
                r.half_fisher,
                r.entropy_start - r.entropy_end
            ))
            .with_note(if self.path {
                "speeds by the quantile W2"
            } else {
                "speeds by the continuity equation"
            });
        Ok(self.finish(SuiteKind::Gf, report, Some(series)))
    }

    fn run_reg(&self) -> Result<SuiteOutcome, SuiteError> {
        let mut rng = self.rng(SuiteKind::Reg);
        let dirac_at = self.random_point(&mut rng);
        let densities = [self.random_density(&mut rng), self.random_density(&mut rng)];
        let (x, y) = self.far_pair(&mut rng);
        let probes: Vec<(GraphPoint, f64)> = self
            .config
            .eps_sweep
            .iter()
            .map(|_| (self.random_point(&mut rng), rng.gen_range(2.0..6.0)))
            .collect();
        let sweep = RegSweep {
            dirac_at,
            densities: &densities,
            path: (x, y),
        };
        let per_eps = self
            .config
            .eps_sweep
            .par_iter()
            .zip(&probes)
            .map(|(&eps, probe)| self.reg_cases(eps, probe, &sweep))
            .collect::<Result<Vec<_>, SuiteError>>()?;

        let mut cases = Vec::new();
        let mut rows = Vec::new();
        let mut resolution: f64 = 0.0;
        for (eps, r) in self.config.eps_sweep.iter().zip(per_eps) {
            cases.extend(r.cases);
            rows.push(vec![*eps, r.h, r.bound, r.max_ratio]);
            resolution = resolution.max(r.h / eps);
        }
        let (smallest, trend) = rows
            .iter()
            .min_by(|a, b| a[0].total_cmp(&b[0]))
            .map(|r| (r[0], r[3]))
            .expect("sweep is not empty");
        cases.push(CaseResult::new("trend", &[("eps", smallest)], trend - ACTION_TREND_LIMIT));
        let report = VerificationReport::from_cases("regularization", None, REG_TOLERANCE.budget(resolution, 0.0), cases)
            .with_note("tolerance h is the window resolution h/eps; each eps gets a grid with h <= eps/4")
            .with_note(format!("largest speed ratio at eps = {smallest}: {trend}"));
        let series = Series {
            columns: ["eps", "h", "bound", "max_ratio"].map(String::from).to_vec(),
            rows,
        };
        Ok(self.finish(SuiteKind::Reg, report, Some(series)))
    }

    /// Cases for one `ε` on a grid that resolves the window.
    fn reg_cases(&self, eps: f64, probe: &(GraphPoint, f64), sweep: &RegSweep) -> Result<RegEps, SuiteError> {
        let fine = Arc::new(Grid::discretize(self.graph.clone(), self.config.h.min(eps / REG_RESOLUTION)));
        let map = RegularizationMap::new(fine.clone(), eps)?;
        let carry = |mu: &DiscreteMeasure| {
            let vals = (0..fine.len())
                .map(|i| self.grid.interpolate(&mu.density, &fine.node_point(i)))
                .collect();
            DiscreteMeasure::probability_density(fine.clone(), vals)
        };
        let mut measures: Vec<(String, DiscreteMeasure)> = (0..self.graph.num_vertices())
            .map(|v| (format!("vertex{v}"), DiscreteMeasure::dirac(fine.clone(), self.graph.vertex_point(v))))
            .collect();
        measures.push(("dirac".into(), DiscreteMeasure::dirac(fine.clone(), sweep.dirac_at)));
        let (da, db) = (carry(&sweep.densities[0]), carry(&sweep.densities[1]));
        measures.push(("density".into(), da.clone()));

        // a smooth test function on the extended graph
        let ext = map.extended().clone();
        let xg = ext.graph().clone();
        let centre = map.extension().embed(&probe.0);
        let phi = GridFunction::new(
            ext.clone(),
            (0..ext.len())
                .map(|i| (probe.1 * xg.distance(&centre, &ext.node_point(i))).cos())
                .collect(),
        );
        let phi_eps = map.regularize_function(&phi);
        let cap = 1.0 / (2.0 * eps);
        let params = [("eps", eps)];
        let mut cases = Vec::new();
        for (name, mu) in &measures {
            let r = map.regularize_measure(mu);
            cases.push(CaseResult::new(format!("mass/{name}"), &params, (r.total_mass() - 1.0).abs()));
            let top = r.density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            cases.push(CaseResult::new(format!("cap/{name}"), &params, top - cap));
            let lhs = r.integrate(&phi.values);
            let weighted: Vec<f64> = phi_eps.values.iter().zip(&mu.density).map(|(p, f)| p * f).collect();
            let rhs = mu.atoms.iter().map(|a| a.mass * map.regularize_at(&phi, &a.point)).sum::<f64>()
                + fine.integrate(&weighted);
            cases.push(CaseResult::new(format!("adjoint/{name}"), &params, (lhs - rhs).abs()));
        }

        let (x, y) = sweep.path;
        let dirac_curve = MeasureCurve::uniform_times(DIRAC_CURVE_STEPS, |s| {
            DiscreteMeasure::dirac(fine.clone(), self.graph.geodesic_point(&x, &y, s))
        });
        let density_curve = MeasureCurve::uniform_times(8, |s| DiscreteMeasure::mixture(&[(1.0 - s, &da), (s, &db)]));
        let bound = map.action_bound();
        let mut max_ratio: f64 = 0.0;
        for (name, curve) in [("dirac_chord", &dirac_curve), ("density_curve", &density_curve)] {
            let rep = action_transfer_check(curve, &map, 0.0)?;
            max_ratio = max_ratio.max(rep.max_ratio);
            cases.push(CaseResult::new(format!("action/{name}"), &[("eps", eps), ("bound", bound)], rep.max_ratio - bound));
        }
        Ok(RegEps {
            cases,
            h: fine.max_spacing(),
            bound,
            max_ratio,
        })
    }

    fn finish(&self, suite: SuiteKind, report: VerificationReport, series: Option<Series>) -> SuiteOutcome {
        SuiteOutcome { suite, report, series }
    }

    /// A point drawn uniformly with respect to length.
    pub fn random_point(&self, rng: &mut ChaCha8Rng) -> GraphPoint {
        let total = self.graph.total_length();
        let mut u = rng.gen_range(0.0..total);
        for (e, edge) in self.graph.edges().iter().enumerate() {
            if u < edge.length || e + 1 == self.graph.num_edges() {
                let s = (u.min(edge.length) - edge.half()).clamp(-edge.half(), edge.half());
                return GraphPoint::new(e, s);
            }
            u -= edge.length;
        }
        unreachable!("graph has edges")
    }

    pub fn random_dirac(&self, rng: &mut ChaCha8Rng) -> DiscreteMeasure {
        DiscreteMeasure::atoms(
            self.grid.clone(),
            vec![Atom {
                point: self.random_point(rng),
                mass: 1.0,
            }],
        )
    }

    /// `1 + g` with `g` a random low-pass eigenfunction combination scaled
    /// to `‖g‖_∞ = 0.9`, normalized to a probability density.
    pub fn random_density(&self, rng: &mut ChaCha8Rng) -> DiscreteMeasure {
        let spec = self.heat.spectrum();
        let modes = 5.min(spec.len() - 1).max(1);
        let mut g = vec![0.0; self.grid.len()];
        for k in 1..=modes {
            let a: f64 = rng.gen_range(-1.0..1.0) / k as f64;
            for (v, p) in g.iter_mut().zip(spec.eigenvector(k)) {
                *v += a * p;
            }
        }
        let m = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale = if m > 0.0 { 0.9 / m } else { 0.0 };
        DiscreteMeasure::probability_density(self.grid.clone(), g.iter().map(|v| 1.0 + scale * v).collect())
    }

    /// A positive bump of the given radius around `center` on a small floor.
    pub fn bump(&self, center: &GraphPoint, radius: f64) -> DiscreteMeasure {
        let vals = (0..self.grid.len())
            .map(|i| {
                let d = self.graph.distance(center, &self.grid.node_point(i));
                0.05 + (1.0 - d / radius).max(0.0).powi(2)
            })
            .collect();
        DiscreteMeasure::probability_density(self.grid.clone(), vals)
    }

    /// Two random points at least half the shortest edge span apart when
    /// possible, so the connecting geodesic usually crosses a vertex. A
    /// loop spans only half its length.
    fn far_pair(&self, rng: &mut ChaCha8Rng) -> (GraphPoint, GraphPoint) {
        let x = self.random_point(rng);
        let span = self
            .graph
            .edges()
            .iter()
            .map(|e| if e.is_loop() { 0.5 * e.length } else { e.length })
            .fold(f64::INFINITY, f64::min);
        let target = 0.5 * span;
        for _ in 0..64 {
            let y = self.random_point(rng);
            if self.graph.distance(&x, &y) >= target {
                return (x, y);
            }
        }
        let y = self.random_point(rng);
        (x, y)
    }
}
