//! `specmeasure classify|solve|convergence`

pub mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{cantor_approximant, Atom, DiscreteMeasure, FredholmSystem};
use crate::model::MaxComponent;
use crate::spectral::{classify_regime, Eigenobject, EigenobjectKind, Regime, SpectralReport};
use crate::verify::{
    default_alpha, recip_integral_on_grid, refinement_study, residual_report, StudyOptions, StudyQuantity,
};

pub use config::{KernelConfig, ProblemConfig, RunConfig, RunOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "specmeasure",
    version,
    about = "Principal eigenvalues and measure eigenfunctions of nonlocal operators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate lambda_p and classify the principal eigen-object.
    Classify(RunArgs),
    /// Classify, then build and verify a measure solution.
    Solve(RunArgs),
    /// Refinement study of one quantity, as CSV.
    Convergence(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    Ball,
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuantityArg {
    LambdaP,
    Lambda1,
    Residual,
    RecipIntegral,
}

impl From<QuantityArg> for StudyQuantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::LambdaP => StudyQuantity::LambdaP,
            QuantityArg::Lambda1 => StudyQuantity::Lambda1,
            QuantityArg::Residual => StudyQuantity::Residual,
            QuantityArg::RecipIntegral => StudyQuantity::RecipIntegral,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
#[command(group(ArgGroup::new("source").required(true).args(["config", "example"])))]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in example instead of a config file.
    #[arg(long, value_enum)]
    pub example: Option<Example>,
    /// Constant kernel value.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Fraction along a segment of the argmax set.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Argmax component index.
    #[arg(long)]
    pub component: Option<usize>,
    /// Atom weight (default 1/rho - I_h for constant kernels).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Replace the atom by a Cantor approximant of this level.
    #[arg(long)]
    pub cantor_level: Option<u32>,
    /// Equal-weight atoms at these segment fractions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub atoms: Option<Vec<f64>>,
    /// Base grid level.
    #[arg(long)]
    pub level: Option<usize>,
    /// Number of refinement levels.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, value_enum)]
    pub quantity: Option<QuantityArg>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Grading depth.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub measure: Option<PathBuf>,
    #[arg(long)]
    pub density_csv: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

impl RunArgs {
    /// The config file or preset with command-line overrides applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, self.example) {
            (Some(path), _) => {
                let text =
                    fs::read_to_string(path).map_err(|e| Error::config(format!("reading {}: {e}", path.display())))?;
                RunConfig::from_json(&text)?
            }
            (None, Some(example)) => RunConfig {
                problem: match example {
                    Example::Ball => ProblemConfig::ball(0.05),
                    Example::Cylinder => ProblemConfig::cylinder(0.1),
                },
                options: RunOptions::default(),
                output: Default::default(),
            },
            (None, None) => return Err(Error::config("either --config or --example is required")),
        };
        if let Some(rho) = self.rho {
            match &mut cfg.problem.kernel {
                KernelConfig::Constant { rho: r } => *r = rho,
                _ => return Err(Error::config("--rho applies to constant kernels only")),
            }
        }
        let o = &mut cfg.options;
        o.x0 = self.x0.unwrap_or(o.x0);
        o.component = self.component.unwrap_or(o.component);
        o.alpha = self.alpha.or(o.alpha);
        o.cantor_level = self.cantor_level.or(o.cantor_level);
        o.atoms = self.atoms.clone().or(o.atoms.take());
        o.level = self.level.unwrap_or(o.level);
        o.levels = self.levels.unwrap_or(o.levels);
        o.quantity = self.quantity.map(Into::into).unwrap_or(o.quantity);
        if let Some(r) = self.resolution {
            cfg.problem.grid.resolution = r;
        }
        if let Some(depth) = self.depth {
            let g = cfg.problem.grid.grading.get_or_insert(config::GradingConfig {
                ratio: 0.5,
                depth,
                target: None,
            });
            g.depth = depth;
        }
        let out = &mut cfg.output;
        out.report = self.report.clone().or(out.report.take());
        out.measure = self.measure.clone().or(out.measure.take());
        out.density_csv = self.density_csv.clone().or(out.density_csv.take());
        out.csv = self.csv.clone().or(out.csv.take());
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
}

fn provenance<'a>(command: &'static str, config: &'a RunConfig) -> Provenance<'a> {
    Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
    }
}

#[derive(Debug, Serialize)]
struct ClassifyOutput<'a> {
    provenance: Provenance<'a>,
    report: &'a SpectralReport,
}

/// Measure construction summary written next to the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub source: &'static str,
    pub alpha: f64,
    /// `sum_j w_j / (sup a - a(x_j))`
    pub recip_integral: f64,
    pub lambda1: f64,
    pub solver_residual: f64,
    pub total_mass: f64,
    pub atom_mass: f64,
    /// Atom mass after normalizing to unit total mass.
    pub atom_fraction: f64,
}

#[derive(Debug, Serialize)]
struct SolveOutput<'a> {
    provenance: Provenance<'a>,
    report: &'a SpectralReport,
    solution: Option<&'a SolveSummary>,
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::config(format!("writing {}: {e}", p.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::config(format!("writing stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::config(format!("serializing: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Classification report of `cfg`.
pub fn classify(cfg: &RunConfig) -> Result<SpectralReport> {
    let spec = cfg.problem.build()?;
    let problem = spec.build(cfg.options.level)?;
    let x0 = problem.select_x0(cfg.options.component, cfg.options.x0)?;
    classify_regime(&problem, &x0)
}

/// Classification plus the measure solution on the confirming level.
pub fn solve(cfg: &RunConfig) -> Result<(SpectralReport, Option<SolveSummary>)> {
    let mut report = classify(cfg)?;
    if report.regime != Regime::SingularMeasure {
        return Ok((report, None));
    }
    let spec = cfg.problem.build()?;
    let problem = spec.build(report.level)?;
    let o = &cfg.options;
    let alpha = o.alpha.unwrap_or_else(|| default_alpha(&problem));
    let component = problem
        .max_set()
        .components
        .get(o.component)
        .ok_or_else(|| Error::config(format!("no argmax component {}", o.component)))?
        .clone();
    let segment = match &component {
        MaxComponent::Segment { from, to } => Some((from.clone(), to.clone())),
        _ => None,
    };
    let (source, mu0) = if let Some(level) = o.cantor_level {
        let (from, to) = segment.ok_or_else(|| {
            Error::UnsupportedMeasure("a Cantor source needs a segment component of the argmax set".into())
        })?;
        ("cantor", cantor_approximant(&from, &to, level)?.scaled(alpha)?)
    } else if let Some(fractions) = &o.atoms {
        if fractions.is_empty() {
            return Err(Error::config("--atoms needs at least one fraction"));
        }
        let weight = alpha / fractions.len() as f64;
        let atoms = fractions
            .iter()
            .map(|t| {
                Ok(Atom {
                    point: problem.select_x0(o.component, *t)?,
                    weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ("atoms", DiscreteMeasure::new(atoms, None, None)?)
    } else {
        ("atom", DiscreteMeasure::dirac(report.x0.clone(), alpha))
    };
    let system = FredholmSystem::new(&problem)?;
    let solution = system.solve_measure(&mu0)?;
    let mu = system.measure(&solution)?;
    let residuals = residual_report(&problem, &mu, -problem.sup_a())?;
    let summary = SolveSummary {
        source,
        alpha,
        recip_integral: recip_integral_on_grid(&problem),
        lambda1: solution.lambda1,
        solver_residual: solution.solver_residual,
        total_mass: mu.total_mass(),
        atom_mass: mu.atom_mass(),
        atom_fraction: mu.atom_mass() / mu.total_mass(),
    };
    report.eigenobject = Some(Eigenobject {
        kind: EigenobjectKind::Measure,
        measure: mu,
    });
    report.residuals = Some(residuals);
    Ok((report, Some(summary)))
}

fn study_options(cfg: &RunConfig) -> StudyOptions {
    StudyOptions {
        x0_fraction: cfg.options.x0,
        alpha: cfg.options.alpha,
    }
}

fn run_command(command: &Command) -> Result<()> {
    match command {
        Command::Classify(args) => {
            let cfg = args.resolve()?;
            let report = classify(&cfg)?;
            let out = ClassifyOutput {
                provenance: provenance("classify", &cfg),
                report: &report,
            };
            write_out(cfg.output.report.as_deref(), &to_json(&out)?)
        }
        Command::Solve(args) => {
            let cfg = args.resolve()?;
            let (report, summary) = solve(&cfg)?;
            if let Some(object) = &report.eigenobject {
                if let Some(path) = &cfg.output.measure {
                    write_out(Some(path), &to_json(&object.measure)?)?;
                }
                if let Some(path) = &cfg.output.density_csv {
                    let mut bytes = Vec::new();
                    object.measure.write_density_csv(&mut bytes)?;
                    write_out(Some(path), &bytes)?;
                }
            }
            let out = SolveOutput {
                provenance: provenance("solve", &cfg),
                report: &report,
                solution: summary.as_ref(),
            };
            write_out(cfg.output.report.as_deref(), &to_json(&out)?)
        }
        Command::Convergence(args) => {
            let cfg = args.resolve()?;
            let spec = cfg.problem.build()?;
            let study = refinement_study(&spec, cfg.options.levels, cfg.options.quantity, study_options(&cfg))?;
            let mut bytes = Vec::new();
            study.write_csv(&mut bytes)?;
            write_out(cfg.output.csv.as_deref(), &bytes)
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run_command(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
