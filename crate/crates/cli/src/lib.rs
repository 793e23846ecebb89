//! The `mgcurv` command line: `verify`, `spectrum` and `flow`.
//!
//! Every command loads a graph description, validates its whole
//! configuration and only then touches the output directory, so a bad
//! invocation leaves no files behind.

mod error;
mod flow;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mgcurv_core::suite::{Session, SuiteConfig, SuiteKind};
use mgcurv_core::{build_graph, GraphDescription, MetricGraph};
use rayon::prelude::*;

pub use error::CliError;
pub use flow::Preset;

#[derive(Debug, Parser)]
#[command(name = "mgcurv", version, about = "Weak curvature bounds on compact metric graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run verification suites and write report files.
    Verify(VerifyArgs),
    /// Print the low Kirchhoff spectrum and the fitted c(t).
    Spectrum(SpectrumArgs),
    /// Follow the heat flow from an initial density and write its functionals.
    Flow(FlowArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Be,
    Kw,
    Evi,
    Rcd,
    Gf,
    Reg,
    All,
}

impl SuiteArg {
    fn kinds(self) -> Vec<SuiteKind> {
        match self {
            SuiteArg::Be => vec![SuiteKind::Be],
            SuiteArg::Kw => vec![SuiteKind::Kw],
            SuiteArg::Evi => vec![SuiteKind::Evi],
            SuiteArg::Rcd => vec![SuiteKind::Rcd],
            SuiteArg::Gf => vec![SuiteKind::Gf],
            SuiteArg::Reg => vec![SuiteKind::Reg],
            SuiteArg::All => SuiteKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct VerifyArgs {
    /// Graph description (JSON).
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub suite: SuiteArg,
    /// Target grid spacing.
    #[arg(long)]
    pub h: Option<f64>,
    /// Comma-separated times for the Bakry-Émery and Kuwada suites.
    #[arg(long = "t-grid", value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    /// Comma-separated ε values for the regularization suite.
    #[arg(long = "eps-sweep", value_delimiter = ',')]
    pub eps_sweep: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use this C instead of the fitted one.
    #[arg(long = "force-C")]
    pub force_c: Option<f64>,
    /// Use this K instead of λ₁.
    #[arg(long = "force-K")]
    pub force_k: Option<f64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "mgcurv-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SpectrumArgs {
    /// Graph description (JSON).
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub h: f64,
    /// Number of eigenvalues after λ₀.
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    /// Times used to fit C.
    #[arg(long = "t-grid", value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use this K instead of λ₁.
    #[arg(long = "force-K")]
    pub force_k: Option<f64>,
    /// Also write `spectrum.csv` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct FlowArgs {
    /// Graph description (JSON).
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub h: f64,
    #[arg(long, value_enum, default_value = "cosine", conflicts_with = "poly")]
    pub preset: Preset,
    /// Per-edge polynomial coefficients in the edge coordinate, lowest
    /// degree first: edges separated by `;`, coefficients by `,`.
    #[arg(long)]
    pub poly: Option<String>,
    /// Vertex label carrying the Dirac preset.
    #[arg(long)]
    pub at: Option<String>,
    /// The Dirac preset starts from its heat kernel at this time.
    #[arg(long = "t-min", default_value_t = 0.01)]
    pub t_min: f64,
    #[arg(long = "t-end", default_value_t = 0.2)]
    pub t_end: f64,
    /// Number of time steps; defaults to `10 t_end / h`.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value = "mgcurv-out")]
    pub out: PathBuf,
}

/// Runs one command; `Ok(false)` means a suite failed.
pub fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Verify(a) => verify(&a),
        Command::Spectrum(a) => spectrum(&a).map(|_| true),
        Command::Flow(a) => flow::run(&a).map(|_| true),
    }
}

pub fn load_graph(path: &Path) -> Result<MetricGraph, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    Ok(build_graph(&GraphDescription::parse(&text)?)?)
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_owned(),
        source,
    })
}

fn verify(a: &VerifyArgs) -> Result<bool, CliError> {
    let graph = Arc::new(load_graph(&a.graph)?);
    let mut config = SuiteConfig {
        seed: a.seed,
        force_c: a.force_c,
        force_k: a.force_k,
        ..SuiteConfig::default()
    };
    if let Some(h) = a.h {
        config.h = h;
    }
    if let Some(t) = &a.t_grid {
        config.t_grid = t.clone();
    }
    if let Some(e) = &a.eps_sweep {
        config.eps_sweep = e.clone();
    }
    let session = Session::new(graph, config)?;
    let kinds = a.suite.kinds();
    let outcomes: Vec<_> = kinds.par_iter().map(|&k| (k, session.run(k))).collect();

    create_dir(&a.out)?;
    let pass = output::write_verify(&a.out, &session, &outcomes)?;
    for (kind, o) in &outcomes {
        match o {
            Ok(o) => {
                let r = &o.report;
                let status = if r.pass { "pass" } else { "FAIL" };
                println!(
                    "{kind:<4} {status}  cases {:>5}  violations {:>4}  worst {:.3e}  tol {:.3e}",
                    r.cases.len(),
                    r.violations,
                    r.worst_residual,
                    r.tolerance.total
                );
                if !r.pass {
                    if let Some(w) = &r.witness {
                        println!("     witness {} {}", w.label, output::params_text(&w.params));
                    }
                }
            }
            Err(e) => println!("{kind:<4} ERROR {e}"),
        }
    }
    Ok(pass)
}

fn spectrum(a: &SpectrumArgs) -> Result<(), CliError> {
    let graph = Arc::new(load_graph(&a.graph)?);
    let mut config = SuiteConfig {
        h: a.h,
        seed: a.seed,
        force_k: a.force_k,
        ..SuiteConfig::default()
    };
    if let Some(t) = &a.t_grid {
        config.t_grid = t.clone();
    }
    let session = Session::new(graph, config)?;
    let all = session.heat.spectrum().eigenvalues();
    let shown = &all[..(a.count + 1).min(all.len())];
    let groups = output::multiplicities(shown);

    println!("k\tlambda_k");
    for (k, l) in shown.iter().enumerate() {
        println!("{k}\t{l:.10}");
    }
    let l1 = &session.lambda1;
    println!(
        "lambda_1: grid {:.10}, half grid {:.10}, extrapolated {:.10}",
        l1.coarse, l1.fine, l1.extrapolated
    );
    for &(start, m) in &groups {
        if m > 1 && start > 0 {
            println!("note: lambda_{start} = {:.10} has multiplicity {m}", shown[start]);
        }
    }
    let c = session.curvature;
    println!("c(t) = C exp(-K t) with C = {:.6}, K = {:.6}", c.c, c.k);
    if let Some(est) = &session.c_estimate {
        println!(
            "C fitted over {} test functions (raw max {:.6}); deg_max - 1 = {}",
            session.basis.len(),
            est.raw_max,
            est.degree_floor
        );
    }
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        output::write_spectrum(dir, shown, &groups)?;
    }
    Ok(())
}
