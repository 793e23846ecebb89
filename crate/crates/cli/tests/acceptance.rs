//! End-to-end acceptance checks. Each criterion prints one line; the test
//! fails if any line is a FAIL. Thresholds are fixed here and never tuned
//! per run.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mgcurv_core::curvature::{
    check_evi, check_gradient_flow, check_kw, lambda1, omega_rate, CurvatureFunction, EviResult, Speed,
};
use mgcurv_core::functional::{cheeger_energy, dirichlet_energy, entropy, entropy_delta};
use mgcurv_core::regularization::grid_w2;
use mgcurv_core::suite::{Session, SuiteConfig, SuiteKind};
use mgcurv_core::transport::w2;
use mgcurv_core::{Atom, DiscreteMeasure, GraphPoint, Grid, GridFunction, HeatSemigroup, MetricGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KERNEL_MASS_TOL: f64 = 1e-8;
const KERNEL_TIME_LIMIT: Duration = Duration::from_secs(10);
const LAMBDA_REL_TOL: f64 = 1e-3;
const STAR_LAMBDA_REL_TOL: f64 = 1e-4;
const PARALLELOGRAM_TOL: f64 = 1e-12;
const REG_MASS_TOL: f64 = 1e-12;
const BE_TIME_LIMIT: Duration = Duration::from_secs(120);
const DIAGONAL_TOL: f64 = 1e-10;
const GF_H_ORDER: f64 = 1.8;
const GF_DT_ORDER: f64 = 1.0;
const GF_FINEST: f64 = 1e-3;
const ENT_DELTA: f64 = 1e-6;
const ENT_DELTA_TOL: f64 = 1e-3;
const OMEGA_H: f64 = 1e-3;
const OMEGA_REL_TOL: f64 = 0.05;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn interval() -> Arc<MetricGraph> {
    Arc::new(MetricGraph::interval(1.0).unwrap())
}

fn star() -> Arc<MetricGraph> {
    Arc::new(MetricGraph::star(&[1.0, 1.0, 1.0]).unwrap())
}

fn circle() -> Arc<MetricGraph> {
    Arc::new(MetricGraph::circle(1.0).unwrap())
}

fn graphs() -> [(&'static str, Arc<MetricGraph>); 3] {
    [("interval", interval()), ("star", star()), ("circle", circle())]
}

fn session(g: Arc<MetricGraph>, config: SuiteConfig) -> Session {
    Session::new(g, config).expect("session builds")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn kernel_mass() -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for (name, g) in graphs() {
        let start = Instant::now();
        let grid = Arc::new(Grid::discretize(g.clone(), 1.0 / 200.0));
        let heat = HeatSemigroup::for_grid(grid.clone()).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..8 {
            let e = rng.gen_range(0..g.num_edges());
            let half = g.edge(e).half();
            let x = GraphPoint::new(e, rng.gen_range(-half..=half));
            for t in [1e-4, 1e-3, 1e-2, 0.1, 1.0] {
                let row = heat.kernel_row(t, &x).map_err(|e| e.to_string())?;
                let err = (grid.integrate(&row) - 1.0).abs();
                ensure(err <= KERNEL_MASS_TOL, || format!("{name}: mass error {err:e} at t={t}"))?;
                worst = worst.max(err);
            }
        }
        slowest = slowest.max(start.elapsed());
        ensure(slowest < KERNEL_TIME_LIMIT, || format!("{name} took {slowest:?}"))?;
    }
    Ok(format!("max |mass - 1| = {worst:.2e}, slowest graph {:.1}s", slowest.as_secs_f64()))
}

/// Solution of `u'' = -λ u` from a Neumann leaf to the hub by RK4:
/// `(u, u')` at the hub.
fn shoot(lambda: f64, length: f64) -> (f64, f64) {
    let n = 4000;
    let dx = length / n as f64;
    let f = |y: [f64; 2]| [y[1], -lambda * y[0]];
    let mut y = [1.0, 0.0];
    for _ in 0..n {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * dx * k1[0], y[1] + 0.5 * dx * k1[1]]);
        let k3 = f([y[0] + 0.5 * dx * k2[0], y[1] + 0.5 * dx * k2[1]]);
        let k4 = f([y[0] + dx * k3[0], y[1] + dx * k3[1]]);
        for i in 0..2 {
            y[i] += dx / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    (y[0], y[1])
}

/// Determinant of the hub matching conditions (continuity and Kirchhoff)
/// for leaf solutions `A_i u_i`: `Σ_i u_i' Π_{j≠i} u_j`.
fn star_secular(lambda: f64, lengths: &[f64]) -> f64 {
    let ends: Vec<(f64, f64)> = lengths.iter().map(|&l| shoot(lambda, l)).collect();
    (0..ends.len())
        .map(|i| ends[i].1 * (0..ends.len()).filter(|&j| j != i).map(|j| ends[j].0).product::<f64>())
        .sum()
}

/// Smallest positive zero of the secular function; double zeros (equal
/// legs) are found as minima of its modulus.
fn star_lambda1_oracle(lengths: &[f64]) -> f64 {
    let f = |l: f64| star_secular(l, lengths).abs();
    let step = 0.01;
    let mut l = step;
    let (mut prev, mut cur) = (f(l), f(l + step));
    loop {
        let next = f(l + 2.0 * step);
        let signed = star_secular(l, lengths) * star_secular(l + step, lengths);
        if signed < 0.0 || (cur <= prev && cur <= next) {
            break;
        }
        prev = cur;
        cur = next;
        l += step;
    }
    // golden section on |F| over [l, l + 2 step]
    let (mut a, mut b) = (l, l + 2.0 * step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn spectrum() -> Outcome {
    let li = lambda1(&interval(), 0.01).map_err(|e| e.to_string())?.extrapolated;
    let lc = lambda1(&circle(), 0.01).map_err(|e| e.to_string())?.extrapolated;
    let (ei, ec) = ((li - PI * PI).abs() / (PI * PI), (lc - 4.0 * PI * PI).abs() / (4.0 * PI * PI));
    ensure(ei <= LAMBDA_REL_TOL, || format!("interval λ₁ = {li}, rel err {ei:e}"))?;
    ensure(ec <= LAMBDA_REL_TOL, || format!("circle λ₁ = {lc}, rel err {ec:e}"))?;
    let mut star_err = 0.0f64;
    for lengths in [vec![1.0, 1.0, 1.0], vec![1.0, 0.7, 0.5]] {
        let g = Arc::new(MetricGraph::star(&lengths).unwrap());
        let got = lambda1(&g, 0.01).map_err(|e| e.to_string())?.extrapolated;
        let oracle = star_lambda1_oracle(&lengths);
        let err = (got - oracle).abs() / oracle;
        ensure(err <= STAR_LAMBDA_REL_TOL, || format!("star {lengths:?}: λ₁ = {got}, shooting {oracle}"))?;
        star_err = star_err.max(err);
    }
    Ok(format!("rel err interval {ei:.1e}, circle {ec:.1e}, stars vs shooting {star_err:.1e}"))
}

fn cheeger() -> Outcome {
    let grid = Arc::new(Grid::discretize(star(), 0.05));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut random = || GridFunction::new(grid.clone(), (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let (f, g) = (random(), random());
        ensure(dirichlet_energy(&f) == 2.0 * cheeger_energy(&f), || "E(f) != 2Ch(f)".into())?;
        let lhs = cheeger_energy(&f.zip_with(&g, |a, b| a + b)) + cheeger_energy(&f.zip_with(&g, |a, b| a - b));
        let rhs = 2.0 * cheeger_energy(&f) + 2.0 * cheeger_energy(&g);
        let rel = (lhs - rhs).abs() / rhs;
        ensure(rel <= PARALLELOGRAM_TOL, || format!("parallelogram rel err {rel:e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("E = 2Ch exactly, parallelogram rel err {worst:.1e} over 30 pairs"))
}

fn regularization() -> Outcome {
    let mut trend = 0.0f64;
    for (name, g) in graphs() {
        let s = session(g, SuiteConfig::default());
        let out = s.run(SuiteKind::Reg).map_err(|e| e.to_string())?;
        let r = &out.report;
        let tol = r.tolerance.total;
        for c in &r.cases {
            let ok = match c.label.split('/').next().unwrap() {
                "mass" => c.residual <= REG_MASS_TOL,
                "cap" => c.residual <= 0.0,
                "adjoint" | "action" => c.residual <= tol,
                "trend" => c.residual <= 0.0,
                other => return Err(format!("unexpected case {other}")),
            };
            ensure(ok, || format!("{name}: {} {:?} residual {:e} (tol {tol:e})", c.label, c.params, c.residual))?;
        }
        let series = out.series.as_ref().unwrap();
        let last = series.rows.iter().min_by(|a, b| a[0].total_cmp(&b[0])).unwrap();
        trend = trend.max(last[3]);
    }
    Ok(format!("mass, cap, adjoint, action all within bounds; ratio at smallest ε ≤ {trend:.4}"))
}

fn bakry_emery() -> Outcome {
    let start = Instant::now();
    let flat = session(
        interval(),
        SuiteConfig {
            force_c: Some(1.0),
            force_k: Some(0.0),
            ..SuiteConfig::default()
        },
    );
    let r = flat.run(SuiteKind::Be).map_err(|e| e.to_string())?.report;
    ensure(r.violations == 0, || format!("interval (1, 0): {} violations", r.violations))?;
    let unit = session(
        star(),
        SuiteConfig {
            force_c: Some(1.0),
            ..SuiteConfig::default()
        },
    );
    let w = unit.run(SuiteKind::Be).map_err(|e| e.to_string())?.report;
    ensure(w.violations > 0, || "star with C = 1 found no witness".into())?;
    let fitted = session(star(), SuiteConfig::default());
    let f = fitted.run(SuiteKind::Be).map_err(|e| e.to_string())?.report;
    ensure(f.violations == 0, || format!("star fitted: {} violations", f.violations))?;
    let took = start.elapsed();
    ensure(took < BE_TIME_LIMIT, || format!("took {took:?}"))?;
    let witness = w.witness.map(|c| format!("{} {:?}", c.label, c.params)).unwrap_or_default();
    Ok(format!(
        "interval clean; star C=1 witness {witness} ({} violations); fitted C = {:.3} clean; {:.1}s",
        w.violations,
        fitted.curvature.c,
        took.as_secs_f64()
    ))
}

fn kuwada() -> Outcome {
    let mut line = Vec::new();
    for (name, g) in graphs() {
        let s = session(g, SuiteConfig::default());
        let be = s.run(SuiteKind::Be).map_err(|e| e.to_string())?.report;
        if !be.pass {
            line.push(format!("{name}: BE fails, skipped"));
            continue;
        }
        let kw = s.run(SuiteKind::Kw).map_err(|e| e.to_string())?.report;
        ensure(kw.cases.len() == 500, || format!("{name}: {} cases", kw.cases.len()))?;
        ensure(kw.pass, || format!("{name}: {} violations, worst {:e}", kw.violations, kw.worst_residual))?;
        line.push(format!("{name} worst {:.1e}/{:.1e}", kw.worst_residual, kw.tolerance.total));
    }
    Ok(line.join(", "))
}

fn evi_rcd() -> Outcome {
    let mut line = Vec::new();
    for (name, g) in [("interval", interval()), ("star", star())] {
        let s = session(g, SuiteConfig::default());
        for kind in [SuiteKind::Evi, SuiteKind::Rcd] {
            let r = s.run(kind).map_err(|e| e.to_string())?.report;
            ensure(r.pass, || format!("{name} {kind}: {} violations", r.violations))?;
        }
        let metric = grid_w2(&s.grid);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut diag = 0.0f64;
        for _ in 0..5 {
            let (a, b) = (s.random_density(&mut rng), s.random_density(&mut rng));
            for t in [0.0, 0.05, 0.2] {
                let evi = check_evi(&s.heat, &s.curvature, &a, &b, t, t, &metric).map_err(|e| e.to_string())?;
                let kw = check_kw(&s.heat, &s.curvature, &b, &a, t, &metric).map_err(|e| e.to_string())?;
                diag = diag.max((evi.residual - EviResult::from_kuwada(&kw)).abs());
            }
        }
        ensure(diag <= DIAGONAL_TOL, || format!("{name}: diagonal mismatch {diag:e}"))?;
        line.push(format!("{name} clean, diagonal {diag:.1e}"));
    }
    Ok(line.join("; "))
}

fn gradient_flow() -> Outcome {
    let levels = [0.05, 0.025, 0.0125, 0.00625];
    let mut d = Vec::new();
    for &h in &levels {
        let grid = Arc::new(Grid::discretize(interval(), h));
        let heat = HeatSemigroup::for_grid(grid.clone()).map_err(|e| e.to_string())?;
        let phi = heat.spectrum().eigenvector(1);
        let m = phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mu0 = DiscreteMeasure::probability_density(grid.clone(), phi.iter().map(|v| 1.0 + 0.5 * v / m).collect());
        let dt = h / 10.0;
        let t_end = 0.2;
        let metric = grid_w2(&grid);
        let r = check_gradient_flow(&heat, &mu0, t_end, (t_end / dt).round() as usize, Speed::Metric(&metric))
            .map_err(|e| e.to_string())?;
        d.push((h, r.dt, r.d.abs()));
    }
    // least-squares slopes of log|D| against log h and log Δt
    let slope = |x: &dyn Fn(&(f64, f64, f64)) -> f64| {
        let pts: Vec<(f64, f64)> = d.iter().map(|p| (x(p).ln(), p.2.ln())).collect();
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
    };
    let (ph, pdt) = (slope(&|p| p.0), slope(&|p| p.1));
    ensure(d.windows(2).all(|w| w[1].2 < w[0].2), || format!("|D| not decreasing: {d:?}"))?;
    ensure(ph >= GF_H_ORDER, || format!("h order {ph:.2}: {d:?}"))?;
    ensure(pdt >= GF_DT_ORDER, || format!("Δt order {pdt:.2}: {d:?}"))?;
    let finest = d.last().unwrap().2;
    ensure(finest <= GF_FINEST, || format!("finest |D| = {finest:e}"))?;
    Ok(format!("order {ph:.2} in h, {pdt:.2} in Δt (Δt = h/10), finest |D| = {finest:.1e}"))
}

fn entropy_limit() -> Outcome {
    let mut worst = 0.0f64;
    for (name, g) in graphs() {
        let s = session(
            g,
            SuiteConfig {
                force_c: Some(1.0),
                ..SuiteConfig::default()
            },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mu = s.random_density(&mut rng);
            let gap = (entropy_delta(&mu, ENT_DELTA).map_err(|e| e.to_string())? - entropy(&mu)).abs();
            ensure(gap <= ENT_DELTA_TOL, || format!("{name}: gap {gap:e}"))?;
            worst = worst.max(gap);
        }
    }
    Ok(format!("max |Ent_δ - Ent| = {worst:.1e} at δ = {ENT_DELTA:e}"))
}

fn omega() -> Outcome {
    let mut worst = 0.0f64;
    for (name, g) in graphs() {
        let k = lambda1(&g, 0.01).map_err(|e| e.to_string())?.extrapolated;
        let rate = omega_rate(&CurvatureFunction::new(1.0, k), OMEGA_H);
        let rel = (rate + k).abs() / k;
        ensure(rel <= OMEGA_REL_TOL, || format!("{name}: rate {rate} vs -K = {}", -k))?;
        worst = worst.max(rel);
    }
    Ok(format!("max |rate + K| / K = {worst:.2e} at h = {OMEGA_H:e}"))
}

/// Minimum cost over all basic feasible solutions of the transport
/// polytope: every `(m + n - 1)`-cell subset whose cells form a spanning
/// tree is solved by leaf peeling.
fn brute_force_ot(a: &[f64], b: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let cells = m * n;
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << cells) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let mut open: Vec<usize> = (0..cells).filter(|c| mask & (1 << c) != 0).collect();
        let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
        let mut flow = vec![0.0; cells];
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; n];
        let mut ok = true;
        while !open.is_empty() {
            let leaf = (0..m)
                .filter(|&i| !row_done[i])
                .find_map(|i| {
                    let mine: Vec<usize> = open.iter().copied().filter(|c| c / n == i).collect();
                    (mine.len() == 1).then(|| (mine[0], true))
                })
                .or_else(|| {
                    (0..n).filter(|&j| !col_done[j]).find_map(|j| {
                        let mine: Vec<usize> = open.iter().copied().filter(|c| c % n == j).collect();
                        (mine.len() == 1).then(|| (mine[0], false))
                    })
                });
            let Some((c, by_row)) = leaf else {
                ok = false;
                break;
            };
            let (i, j) = (c / n, c % n);
            let x = if by_row { ra[i] } else { rb[j] };
            flow[c] = x;
            ra[i] -= x;
            rb[j] -= x;
            if by_row {
                row_done[i] = true;
            } else {
                col_done[j] = true;
            }
            open.retain(|&o| o != c);
        }
        if !ok || flow.iter().any(|&x| x < 0.0) || ra.iter().chain(&rb).any(|&r| r != 0.0) {
            continue;
        }
        best = best.min(flow.iter().zip(cost).map(|(x, c)| x * c).sum());
    }
    best
}

fn ot_oracle() -> Outcome {
    // dyadic lengths, positions and masses keep every sum exact
    let corpus = [
        Arc::new(MetricGraph::interval(1.0).unwrap()),
        Arc::new(MetricGraph::star(&[1.0, 0.5, 0.75]).unwrap()),
        Arc::new(MetricGraph::circle(1.0).unwrap()),
        Arc::new(MetricGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 0.5), (2, 1, 0.75)]).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut instances = 0;
    for g in &corpus {
        let grid = Arc::new(Grid::discretize(g.clone(), 0.25));
        for _ in 0..50 {
            let side = |rng: &mut ChaCha8Rng, size: usize| -> Vec<Atom> {
                let mut units = vec![1u32; size];
                for _ in size..16 {
                    units[rng.gen_range(0..size)] += 1;
                }
                let mut points: Vec<GraphPoint> = Vec::new();
                while points.len() < size {
                    let e = rng.gen_range(0..g.num_edges());
                    let half = g.edge(e).half();
                    let steps = (2.0 * half * 16.0) as u32;
                    let p = GraphPoint::new(e, -half + rng.gen_range(1..steps) as f64 / 16.0);
                    if !points.iter().any(|q| g.same_point(q, &p)) {
                        points.push(p);
                    }
                }
                points
                    .into_iter()
                    .zip(units)
                    .map(|(point, u)| Atom { point, mass: u as f64 / 16.0 })
                    .collect()
            };
            let (m, n) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            let (sa, sb) = (side(&mut rng, m), side(&mut rng, n));
            let mu = DiscreteMeasure::atoms(grid.clone(), sa);
            let nu = DiscreteMeasure::atoms(grid.clone(), sb);
            let (_, plan) = w2(&mu, &nu).map_err(|e| e.to_string())?;
            let a: Vec<f64> = plan.sources.iter().map(|s| s.1).collect();
            let b: Vec<f64> = plan.targets.iter().map(|t| t.1).collect();
            let cost: Vec<f64> = plan
                .sources
                .iter()
                .flat_map(|(x, _)| plan.targets.iter().map(move |(y, _)| g.distance(x, y).powi(2)))
                .collect();
            let oracle = brute_force_ot(&a, &b, &cost);
            ensure(plan.cost == oracle, || format!("simplex {} vs enumeration {oracle}", plan.cost))?;
            instances += 1;
        }
    }
    Ok(format!("{instances} instances with support ≤ 4 agree exactly"))
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("mgcurv-acceptance-{}", std::process::id()));
    let graph = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("graphs/star3.json");
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_mgcurv"))
            .args(["verify", "--graph", graph.to_str().unwrap(), "--suite", "all", "--seed", "3", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?
            .status;
        ensure(status.code().is_some_and(|c| c <= 1), || format!("exit {status}"))?;
        fs::read(out.join("summary.csv")).map_err(|e| e.to_string())
    };
    let (a, b) = (run("a")?, run("b")?);
    let _ = fs::remove_dir_all(&dir);
    ensure(a == b, || "summary.csv differs between runs".into())?;
    Ok(format!("summary.csv identical across runs ({} bytes)", a.len()))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 12] = [
        ("heat-kernel mass", kernel_mass),
        ("spectrum", spectrum),
        ("Cheeger identification", cheeger),
        ("regularization", regularization),
        ("Bakry-Emery", bakry_emery),
        ("Kuwada", kuwada),
        ("EVI and RCD", evi_rcd),
        ("gradient flow", gradient_flow),
        ("entropy limit", entropy_limit),
        ("omega rate", omega),
        ("transport oracle", ot_oracle),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                println!("[FAIL] {:>2} {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
