use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mutual_energy::bounds::EpsRule;
use mutual_energy::critpoly::IterationSpec;
use mutual_energy::pipeline::{self, ModeSelection, PipelineConfig, PipelineError};
use mutual_energy::report;
use mutual_energy::rootsolve::SolverConfig;

#[derive(Parser)]
#[command(name = "mebound", version, about = "Degree bounds for common preperiodic parameters of z^2 + c")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    PaperBound,
    ExactQuadrature,
    Both,
}

impl From<Mode> for ModeSelection {
    fn from(m: Mode) -> Self {
        match m {
            Mode::PaperBound => ModeSelection::PaperBound,
            Mode::ExactQuadrature => ModeSelection::ExactQuadrature,
            Mode::Both => ModeSelection::Both,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Args)]
struct EpsArg {
    /// Regularization radius, or `auto` for 1/d^2.
    #[arg(long = "eps", default_value = "auto", value_parser = parse_eps)]
    value: Eps,
}

#[derive(Clone, Copy)]
struct Eps(Option<f64>);

impl EpsArg {
    fn get(&self) -> Option<f64> {
        self.value.0
    }
}

fn parse_eps(s: &str) -> Result<Eps, String> {
    if s == "auto" {
        return Ok(Eps(None));
    }
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(Eps(Some(v)))
    } else {
        Err(format!("eps must be positive, got {s}"))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write report.json.
    Run {
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        a: i64,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        b: i64,
        #[arg(long, default_value_t = 11)]
        n: u32,
        #[command(flatten)]
        eps: EpsArg,
        #[arg(long, value_enum, default_value = "both")]
        mode: Mode,
        #[arg(long, default_value_t = 1e-10)]
        residual_tol: f64,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
    },
    /// Write the deflated periodicity polynomial f_c^n(a) - a.
    BuildPoly {
        #[arg(long, allow_hyphen_values = true)]
        a: i64,
        #[arg(long)]
        n: u32,
    },
    /// Solve a polynomial file and write its roots CSV.
    SolveRoots {
        /// Polynomial file written by build-poly.
        #[arg(long)]
        poly: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        residual_tol: f64,
    },
    /// Self energy of one root set, or cross energy of two.
    Energy {
        #[arg(long = "self", conflicts_with = "cross", required_unless_present = "cross")]
        self_roots: Option<PathBuf>,
        #[arg(long, num_args = 2, value_names = ["ALPHA", "BETA"])]
        cross: Option<Vec<PathBuf>>,
        #[command(flatten)]
        eps: EpsArg,
        #[arg(long, value_enum, default_value = "both")]
        mode: Mode,
    },
    /// Assemble the lower bound from three energy files and solve for the degree.
    Bound {
        #[arg(long)]
        alpha: PathBuf,
        #[arg(long)]
        beta: PathBuf,
        #[arg(long)]
        cross: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
    },
}

fn ensure_out(out: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out).map_err(|source| PipelineError {
        stage: pipeline::Stage::Config,
        source: pipeline::StageFailure::Io { path: out.to_path_buf(), source },
    })
}

fn execute(cli: Cli) -> Result<bool, PipelineError> {
    let out = cli.out;
    match cli.command {
        Command::Run { a, b, n, eps, mode, residual_tol, report: fmt } => {
            let cfg = PipelineConfig {
                a,
                b,
                n,
                eps: eps.get(),
                mode: mode.into(),
                threads: cli.threads,
                out_dir: out,
                solver: SolverConfig { residual_tol, ..SolverConfig::default() },
                ub_rule: EpsRule::InverseSquare,
            };
            let run = pipeline::run_pipeline(&cfg)?;
            match fmt {
                ReportFormat::Json => print!("{}", report::to_json(&run.report)),
                ReportFormat::Text => {
                    print!("{}", run.report.to_text());
                    println!("report written to {}", run.report_path.display());
                }
            }
            Ok(run.report.all_certified)
        }
        command => {
            ensure_out(&out)?;
            let pool = pipeline::thread_pool(cli.threads)?;
            pool.install(|| stage(command, &out))
        }
    }
}

fn stage(command: Command, out: &Path) -> Result<bool, PipelineError> {
    match command {
        Command::Run { .. } => unreachable!("handled by execute"),
        Command::BuildPoly { a, n } => {
            let w = pipeline::build_poly(IterationSpec::periodic(a, n))?;
            let path = pipeline::write_poly_file(&w, out)?;
            println!("{} (degree {}, removed {:?})", path.display(), w.poly.degree(), w.removed_roots);
            Ok(true)
        }
        Command::SolveRoots { poly, residual_tol } => {
            let w = pipeline::read_poly_file(&poly)?;
            let cfg = SolverConfig { residual_tol, ..SolverConfig::default() };
            let set = pipeline::solve_roots(&w, &cfg)?;
            let path = pipeline::write_roots_file(&set, out)?;
            let summary = pipeline::summarize_witness("witness", &w, &set, residual_tol);
            println!(
                "{} ({} roots, {} sweeps, max residual {:.3e})",
                path.display(),
                set.degree(),
                set.sweeps,
                summary.certification.max_residual
            );
            Ok(summary.certified)
        }
        Command::Energy { self_roots, cross, eps, mode } => {
            let stage = if let Some(p) = self_roots {
                let set = pipeline::read_roots_file(&p)?;
                let e = eps.get().unwrap_or_else(|| pipeline::auto_epsilon(&[set.degree()]));
                pipeline::energy_self(&set, e, mode.into())?
            } else {
                let paths = cross.expect("clap enforces --self or --cross");
                let alpha = pipeline::read_roots_file(&paths[0])?;
                let beta = pipeline::read_roots_file(&paths[1])?;
                let e = eps.get().unwrap_or_else(|| pipeline::auto_epsilon(&[alpha.degree(), beta.degree()]));
                pipeline::energy_cross(&alpha, &beta, e, mode.into())?
            };
            let path = pipeline::write_energy_file(&stage, out)?;
            println!("{}", path.display());
            Ok(true)
        }
        Command::Bound { alpha, beta, cross, report: fmt } => {
            let a = pipeline::read_energy_file(&alpha)?;
            let b = pipeline::read_energy_file(&beta)?;
            let c = pipeline::read_energy_file(&cross)?;
            let bound = pipeline::bound_stage(&a, &b, &c, EpsRule::InverseSquare)?;
            let path = pipeline::write_bound_file(&bound, out)?;
            match fmt {
                ReportFormat::Json => print!("{}", report::to_json(&bound)),
                ReportFormat::Text => {
                    print!("{}", pipeline::render_bound_text(&bound));
                    println!("bound written to {}", path.display());
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("certification failed; see the report");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
