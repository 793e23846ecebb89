//! The curvature function `c(t) = C e^{-Kt}` and numerical checks of the
//! weak Bakry-Émery, Kuwada, EVI and RCD inequalities, plus the
//! gradient-flow identity for the heat flow.
//!
//! Residuals are signed: `≤ 0` means the inequality holds. Function-based
//! checks normalize test functions to `‖∇f‖_∞ = 1` so that one tolerance
//! scale fits every case.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CurvatureError, TransportError};
use crate::field::{DiscreteMeasure, GridFunction};
use crate::functional::{entropy, fisher_information, gamma_sq, gradient};
use crate::graph::MetricGraph;
use crate::grid::Grid;
use crate::heat::{HeatSemigroup, KirchhoffLaplacian, DEFAULT_EIG_TOL};
use crate::transport::{interpolate_plan, w2, MeasureCurve};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureFunction {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

impl CurvatureFunction {
    pub fn new(c: f64, k: f64) -> Self {
        Self { c, k }
    }

    /// `c(t) = C e^{-Kt}`.
    pub fn at(&self, t: f64) -> f64 {
        self.c * (-self.k * t).exp()
    }

    /// `R(t₀, t₁) = ∫₀¹ c^{-2}((1-s)t₀ + s t₁) ds` in closed form.
    pub fn r(&self, t0: f64, t1: f64) -> f64 {
        assert!(t0 <= t1, "R needs t0 <= t1");
        let x = 2.0 * self.k * (t1 - t0);
        let ratio = if x == 0.0 { 1.0 } else { x.exp_m1() / x };
        (2.0 * self.k * t0).exp() * ratio / (self.c * self.c)
    }
}

/// `tol = a·h^p + b·Δt + c_solver`, usually with `p = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToleranceModel {
    pub a: f64,
    pub h_order: i32,
    pub b: f64,
    pub c_solver: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub h: f64,
    pub dt: f64,
    pub h_term: f64,
    pub dt_term: f64,
    pub solver_term: f64,
    pub total: f64,
}

impl ToleranceModel {
    pub const fn new(a: f64, b: f64, c_solver: f64) -> Self {
        Self { a, h_order: 2, b, c_solver }
    }

    pub const fn with_h_order(mut self, p: i32) -> Self {
        self.h_order = p;
        self
    }

    pub fn budget(&self, h: f64, dt: f64) -> Tolerance {
        let h_term = self.a * h.powi(self.h_order);
        let dt_term = self.b * dt;
        Tolerance {
            h,
            dt,
            h_term,
            dt_term,
            solver_term: self.c_solver,
            total: h_term + dt_term + self.c_solver,
        }
    }
}

/// One evaluated inequality.
#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub label: String,
    pub params: Vec<(String, f64)>,
    pub residual: f64,
    /// Where the residual was attained, when meaningful.
    pub location: Option<String>,
}

impl CaseResult {
    pub fn new(label: impl Into<String>, params: &[(&str, f64)], residual: f64) -> Self {
        Self {
            label: label.into(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            residual,
            location: None,
        }
    }

    pub fn at(mut self, location: impl Into<String>) -> Self {
        self.location = Some(location.into());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub curvature: Option<CurvatureFunction>,
    pub tolerance: Tolerance,
    pub worst_residual: f64,
    pub violations: usize,
    pub pass: bool,
    pub witness: Option<CaseResult>,
    pub cases: Vec<CaseResult>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn from_cases(
        name: impl Into<String>,
        curvature: Option<CurvatureFunction>,
        tolerance: Tolerance,
        cases: Vec<CaseResult>,
    ) -> Self {
        let worst = cases
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.residual.is_nan())
            .max_by(|a, b| a.1.residual.total_cmp(&b.1.residual));
        let worst_residual = worst.map(|w| w.1.residual).unwrap_or(f64::NEG_INFINITY);
        let violations = cases
            .iter()
            .filter(|c| c.residual.is_nan() || c.residual > tolerance.total)
            .count();
        Self {
            name: name.into(),
            curvature,
            tolerance,
            worst_residual,
            violations,
            pass: violations == 0,
            witness: worst.map(|w| w.1.clone()),
            cases,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// `λ₁` on grids of spacing `h` and `h/2`, Richardson-extrapolated for a
/// second-order scheme.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Lambda1Estimate {
    pub coarse: f64,
    pub fine: f64,
    pub extrapolated: f64,
}

pub fn lambda1(graph: &Arc<MetricGraph>, h: f64) -> Result<Lambda1Estimate, CurvatureError> {
    let at = |h: f64| -> Result<f64, CurvatureError> {
        let lap = KirchhoffLaplacian::assemble(Arc::new(Grid::discretize(graph.clone(), h)));
        Ok(lap.eigendecompose(2, DEFAULT_EIG_TOL)?.lambda1())
    };
    let coarse = at(h)?;
    let fine = at(0.5 * h)?;
    Ok(Lambda1Estimate {
        coarse,
        fine,
        extrapolated: (4.0 * fine - coarse) / 3.0,
    })
}

/// Named test function.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub name: String,
    pub f: GridFunction,
}

/// Rescales so that `‖∇f‖_∞ = 1`; constants are left alone.
pub fn normalize_gradient(f: &GridFunction) -> GridFunction {
    let g = gradient(f).max_abs();
    if g > 0.0 {
        f.map(|v| v / g)
    } else {
        f.clone()
    }
}

/// Low eigenfunctions, distance functions to every vertex, and seeded
/// random low-pass combinations of eigenfunctions.
pub fn test_basis(heat: &HeatSemigroup, seed: u64, n_eigen: usize, n_random: usize) -> Vec<TestFunction> {
    let spec = heat.spectrum();
    let grid = heat.grid().clone();
    let g = grid.graph().clone();
    let mut out = Vec::new();
    let top = n_eigen.min(spec.len().saturating_sub(1));
    for k in 1..=top {
        out.push(TestFunction {
            name: format!("eig{k}"),
            f: GridFunction::new(grid.clone(), spec.eigenvector(k)),
        });
    }
    for v in 0..g.num_vertices() {
        let vp = g.vertex_point(v);
        out.push(TestFunction {
            name: format!("dist{v}"),
            f: GridFunction::new(
                grid.clone(),
                (0..grid.len()).map(|i| g.distance(&vp, &grid.node_point(i))).collect(),
            ),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = top.max(1);
    for r in 0..n_random {
        let mut vals = vec![0.0; grid.len()];
        for k in 1..=modes {
            let a: f64 = rng.gen_range(-1.0..1.0) / k as f64;
            for (v, p) in vals.iter_mut().zip(spec.eigenvector(k)) {
                *v += a * p;
            }
        }
        out.push(TestFunction {
            name: format!("rand{r}"),
            f: GridFunction::new(grid.clone(), vals),
        });
    }
    for t in &mut out {
        t.f = normalize_gradient(&t.f);
    }
    out
}

/// Nodes where `Γ` is single-valued: interior edge nodes with their edge.
fn interior_nodes(grid: &Grid) -> Vec<(usize, usize, usize)> {
    (0..grid.graph().num_edges())
        .flat_map(|e| (1..grid.nodes_on_edge(e) - 1).map(move |k| (e, k)))
        .map(|(e, k)| (e, k, grid.index(e, k)))
        .collect()
}

fn describe(grid: &Grid, e: usize, k: usize) -> String {
    format!("edge {e} s={:.6}", grid.coord(e, k))
}

#[derive(Debug, Clone, Serialize)]
pub struct CEstimate {
    pub c_est: f64,
    /// Largest ratio seen, which may fall below one.
    pub raw_max: f64,
    /// The guarantee threshold `deg_max - 1`, reported alongside.
    pub degree_floor: f64,
    pub k: f64,
    pub witness: Option<CaseResult>,
}

/// `max √Γ(P_t f) / (e^{-Kt} P_t √Γ(f))` over basis, times and interior
/// nodes, skipping nodes where the denominator is negligible.
pub fn estimate_c(
    heat: &HeatSemigroup,
    k: f64,
    basis: &[TestFunction],
    t_grid: &[f64],
) -> Result<CEstimate, CurvatureError> {
    let grid = heat.grid();
    let nodes = interior_nodes(grid);
    let mut best: Option<(f64, CaseResult)> = None;
    for tf in basis {
        let root = gamma_sq(&tf.f).to_grid_function().map(|v| v.max(0.0).sqrt());
        let floor = 1e-10 * root.max_abs();
        for &t in t_grid {
            let pf = heat.apply_pt(&tf.f, t);
            let lhs = gamma_sq(&pf);
            let rhs = heat.apply_pt(&root, t);
            let decay = (-k * t).exp();
            for &(e, kk, i) in &nodes {
                if rhs.values[i] < floor || rhs.values[i] <= 0.0 {
                    continue;
                }
                let ratio = lhs.per_edge[e][kk].max(0.0).sqrt() / (decay * rhs.values[i]);
                if best.as_ref().is_none_or(|b| ratio > b.0) {
                    let case = CaseResult::new(tf.name.clone(), &[("t", t)], ratio).at(describe(grid, e, kk));
                    best = Some((ratio, case));
                }
            }
        }
    }
    let (raw, witness) = best.ok_or(CurvatureError::DegenerateDenominator)?;
    Ok(CEstimate {
        c_est: raw.max(1.0),
        raw_max: raw,
        degree_floor: grid.graph().deg_max().saturating_sub(1) as f64,
        k,
        witness: Some(witness),
    })
}

/// `max_x Γ(P_t f)(x) - c²(t) P_t Γ(f)(x)` over interior nodes.
pub fn check_be(heat: &HeatSemigroup, c: &CurvatureFunction, f: &TestFunction, t: f64) -> CaseResult {
    let grid = heat.grid();
    let pf = heat.apply_pt(&f.f, t);
    let lhs = gamma_sq(&pf);
    let rhs = heat.apply_pt(&gamma_sq(&f.f).to_grid_function(), t);
    let c2 = c.at(t).powi(2);
    let mut worst = (f64::NEG_INFINITY, String::new());
    for (e, k, i) in interior_nodes(grid) {
        let r = lhs.per_edge[e][k] - c2 * rhs.values[i];
        if r > worst.0 {
            worst = (r, describe(grid, e, k));
        }
    }
    CaseResult::new(f.name.clone(), &[("t", t)], worst.0).at(worst.1)
}

/// Which `W₂` a check should use.
pub type Metric<'a> = &'a (dyn Fn(&DiscreteMeasure, &DiscreteMeasure) -> Result<f64, TransportError> + Sync);

/// `W₂(H_t μ, H_t ν) - c(t) W₂(μ, ν)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KuwadaResult {
    pub flowed: f64,
    pub initial: f64,
    pub bound: f64,
    pub residual: f64,
}

pub fn check_kw(
    heat: &HeatSemigroup,
    c: &CurvatureFunction,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    t: f64,
    metric: Metric,
) -> Result<KuwadaResult, CurvatureError> {
    let initial = metric(mu, nu)?;
    let flowed = metric(&heat.apply_ht(mu, t), &heat.apply_ht(nu, t))?;
    let bound = c.at(t) * initial;
    Ok(KuwadaResult {
        flowed,
        initial,
        bound,
        residual: flowed - bound,
    })
}

/// The EVI residual `½A² - B²/(2R) - (t₁-t₀)(Ent₀ - Ent₁)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EviResult {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `W₂(H_{t₁}μ₁, H_{t₀}μ₀)`
    pub flowed: f64,
    /// `W₂(μ₁, μ₀)`
    pub initial: f64,
}

impl EviResult {
    /// At `t₀ = t₁ = t` the EVI residual is `½ r (r + 2B)` in terms of the
    /// Kuwada residual `r = A - B`, `B = c(t) W₂(μ₀, μ₁)`.
    pub fn from_kuwada(k: &KuwadaResult) -> f64 {
        0.5 * k.residual * (k.residual + 2.0 * k.bound)
    }
}

fn finite_entropy(mu: &DiscreteMeasure, what: &'static str) -> Result<f64, CurvatureError> {
    let e = entropy(mu);
    if e.is_finite() {
        Ok(e)
    } else {
        Err(CurvatureError::EntropyInfinite(what))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn check_evi(
    heat: &HeatSemigroup,
    c: &CurvatureFunction,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    t0: f64,
    t1: f64,
    metric: Metric,
) -> Result<EviResult, CurvatureError> {
    assert!(0.0 <= t0 && t0 <= t1);
    let h0 = heat.apply_ht(mu0, t0);
    let h1 = heat.apply_ht(mu1, t1);
    let flowed = metric(&h1, &h0)?;
    let initial = metric(mu1, mu0)?;
    let lhs = 0.5 * flowed * flowed - initial * initial / (2.0 * c.r(t0, t1));
    let rhs = if t1 > t0 {
        (t1 - t0) * (finite_entropy(&h0, "H_t0 mu0")? - finite_entropy(&h1, "H_t1 mu1")?)
    } else {
        0.0
    };
    Ok(EviResult {
        lhs,
        rhs,
        residual: lhs - rhs,
        flowed,
        initial,
    })
}

/// Plan-based displacement interpolation with the plan's own `W₂`.
pub struct Geodesic {
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    plan: crate::transport::TransportPlan,
    pub length: f64,
}

impl Geodesic {
    pub fn new(mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<Self, CurvatureError> {
        let (length, plan) = w2(mu0, mu1)?;
        Ok(Self {
            mu0: mu0.clone(),
            mu1: mu1.clone(),
            plan,
            length,
        })
    }

    pub fn at(&self, s: f64) -> DiscreteMeasure {
        interpolate_plan(&self.mu0, &self.mu1, &self.plan, s)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RcdResult {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// `Ent(H_{t+h}μ_s) - [(1-s)Ent(H_tμ₀) + s Ent(H_tμ₁)
///   + s(1-s)/(2h) (W₂²(μ₀,μ₁)/R(t,t+h) - W₂²(H_tμ₀, H_tμ₁))]`.
#[allow(clippy::too_many_arguments)]
pub fn check_rcd(
    heat: &HeatSemigroup,
    c: &CurvatureFunction,
    geo: &Geodesic,
    s: f64,
    t: f64,
    h: f64,
    metric: Metric,
) -> Result<RcdResult, CurvatureError> {
    assert!(h > 0.0 && (0.0..=1.0).contains(&s));
    let ms = heat.apply_ht(&geo.at(s), t + h);
    let lhs = finite_entropy(&ms, "H_(t+h) mu_s")?;
    let a = heat.apply_ht(&geo.mu0, t);
    let b = heat.apply_ht(&geo.mu1, t);
    let e0 = finite_entropy(&a, "H_t mu0")?;
    let e1 = finite_entropy(&b, "H_t mu1")?;
    let flowed = metric(&a, &b)?;
    let bracket = geo.length.powi(2) / c.r(t, t + h) - flowed * flowed;
    let rhs = (1.0 - s) * e0 + s * e1 + s * (1.0 - s) / (2.0 * h) * bracket;
    Ok(RcdResult {
        lhs,
        rhs,
        residual: lhs - rhs,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OmegaResult {
    pub omega: f64,
    pub distortion: f64,
    pub dissipation: f64,
    /// `Ent(μ_s) - (1-s)Ent(μ₀) - s Ent(μ₁) - ω(s)`; `None` when `Ent(μ_s) = ∞`
    /// makes the inequality vacuous.
    pub corollary_residual: Option<f64>,
}

/// `(1/R(0,h) - 1)/h`; with `C = 1` it tends to `-K` as `h → 0`.
pub fn omega_rate(c: &CurvatureFunction, h: f64) -> f64 {
    (1.0 / c.r(0.0, h) - 1.0) / h
}

/// `ω(s) = s(1-s)/(2h) (1/R(0,h) - 1) W₂²(μ₀,μ₁) + ∫₀^h I(H_τ μ_s) dτ`,
/// the dissipation integral by the composite midpoint rule.
#[allow(clippy::too_many_arguments)]
pub fn omega(
    heat: &HeatSemigroup,
    c: &CurvatureFunction,
    geo: &Geodesic,
    s: f64,
    h: f64,
    steps: usize,
) -> Result<OmegaResult, CurvatureError> {
    let ms = geo.at(s);
    let distortion = s * (1.0 - s) / (2.0 * h) * (1.0 / c.r(0.0, h) - 1.0) * geo.length.powi(2);
    let dtau = h / steps as f64;
    let dissipation: f64 = (0..steps)
        .map(|j| fisher_information(&heat.apply_ht(&ms, (j as f64 + 0.5) * dtau)) * dtau)
        .sum();
    let omega = distortion + dissipation;
    let es = entropy(&ms);
    let corollary_residual = if es.is_finite() {
        let e0 = finite_entropy(&geo.mu0, "mu0")?;
        let e1 = finite_entropy(&geo.mu1, "mu1")?;
        Some(es - (1.0 - s) * e0 - s * e1 - omega)
    } else {
        None
    };
    Ok(OmegaResult {
        omega,
        distortion,
        dissipation,
        corollary_residual,
    })
}

/// The De Giorgi functional along `t ↦ H_t μ₀` sampled every `dt`.
#[derive(Debug, Clone, Serialize)]
pub struct GradientFlowResult {
    pub h: f64,
    pub dt: f64,
    pub entropy_start: f64,
    pub entropy_end: f64,
    pub half_action: f64,
    pub half_fisher: f64,
    /// `D = Ent(μ_T) - Ent(μ₀) + ½∫|μ̇|² + ½∫I`.
    pub d: f64,
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub fisher: Vec<f64>,
    /// Running `½∫₀^t |μ̇|²`.
    pub action: Vec<f64>,
    /// Running value of `D` on `[0, t]`.
    pub d_partial: Vec<f64>,
}

/// How `|μ̇|` is measured between samples.
#[derive(Clone, Copy)]
pub enum Speed<'a> {
    /// `W(μ_i, μ_{i+1}) / Δt` for a distance.
    Metric(Metric<'a>),
    /// The continuity-equation norm, see [`crate::transport::tangent_speed`].
    Continuity,
}

/// Speeds are forward differences, so each one sits at a step midpoint;
/// the Fisher integral uses the trapezoid rule on the same nodes. Both
/// quadratures are second order in `dt`.
pub fn check_gradient_flow(
    heat: &HeatSemigroup,
    mu0: &DiscreteMeasure,
    t_end: f64,
    steps: usize,
    speed: Speed,
) -> Result<GradientFlowResult, CurvatureError> {
    let dt = t_end / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
    let curve = MeasureCurve::new(times.clone(), times.iter().map(|&t| heat.apply_ht(mu0, t)).collect());
    let entropy_series: Vec<f64> = curve.measures.iter().map(entropy).collect();
    let fisher: Vec<f64> = curve.measures.iter().map(fisher_information).collect();
    let speeds = match speed {
        Speed::Metric(m) => curve.speeds_with(m)?,
        Speed::Continuity => curve.tangent_speeds()?,
    };
    let mut action = vec![0.0];
    let mut fisher_acc = vec![0.0];
    for j in 0..steps {
        action.push(action[j] + 0.5 * speeds[j].powi(2) * dt);
        fisher_acc.push(fisher_acc[j] + 0.25 * (fisher[j] + fisher[j + 1]) * dt);
    }
    let d_partial: Vec<f64> = (0..=steps)
        .map(|j| entropy_series[j] - entropy_series[0] + action[j] + fisher_acc[j])
        .collect();
    Ok(GradientFlowResult {
        h: heat.grid().max_spacing(),
        dt,
        entropy_start: entropy_series[0],
        entropy_end: entropy_series[steps],
        half_action: action[steps],
        half_fisher: fisher_acc[steps],
        d: d_partial[steps],
        times,
        entropy: entropy_series,
        fisher,
        action,
        d_partial,
    })
}
