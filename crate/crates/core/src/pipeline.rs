//! End-to-end run: polynomials, roots, energies, bound.
//!
//! Each stage is a function on in-memory values plus a file reader/writer
//! pair. [`run_pipeline`] writes every intermediate file under the output
//! directory with the same names the standalone subcommands use, so a run is
//! reproducible stage by stage.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{
    assemble_lower_bound, BoundError, BoundReport, EpsRule, LowerBoundAssembly, WitnessEnergies,
};
use crate::critpoly::{deflate_integer_roots, iterate_orbit_poly, CritPolyError, IntPoly, IterationSpec};
use crate::energy::{
    discrete_energy, regularized_cross_energy, regularized_self_energy, DiscreteMeasure, EnergyBreakdown,
    EnergyError, EnergyMode, RegularizedMeasure,
};
use crate::mandel::{summarize_membership, MembershipSummary};
use crate::report;
use crate::rootsolve::{certify, solve_all_roots, CertReport, ConjugateSet, OrbitEvaluator, SolveError, SolverConfig};

pub const SCHEMA: u32 = 1;
/// Iteration budget of the membership check on certified roots.
pub const MEMBERSHIP_ITERS: u32 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    BuildPoly,
    SolveRoots,
    Energy,
    Bound,
    Report,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::BuildPoly => "build-poly",
            Stage::SolveRoots => "solve-roots",
            Stage::Energy => "energy",
            Stage::Bound => "bound",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum StageFailure {
    #[error(transparent)]
    Poly(#[from] CritPolyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

/// A stage-tagged error.
#[derive(Debug, Error)]
#[error("[{stage}] {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageFailure,
}

trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<StageFailure>> StageExt<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError { stage, source: e.into() })
    }
}

fn invalid(stage: Stage, msg: impl Into<String>) -> PipelineError {
    PipelineError { stage, source: StageFailure::Invalid(msg.into()) }
}

fn io_err(stage: Stage, path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError { stage, source: StageFailure::Io { path: path.to_path_buf(), source } }
}

/// Which energy modes to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSelection {
    PaperBound,
    ExactQuadrature,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<EnergyMode> {
        match self {
            ModeSelection::PaperBound => vec![EnergyMode::PaperBound],
            ModeSelection::ExactQuadrature => vec![EnergyMode::ExactQuadrature],
            ModeSelection::Both => vec![EnergyMode::PaperBound, EnergyMode::ExactQuadrature],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Initial value of the β witness.
    pub a: i64,
    /// Initial value of the α witness.
    pub b: i64,
    pub n: u32,
    /// Witness regularization radius; `None` means `1/d²` for the larger
    /// witness degree.
    pub eps: Option<f64>,
    pub mode: ModeSelection,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    pub out_dir: PathBuf,
    pub solver: SolverConfig,
    pub ub_rule: EpsRule,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            a: 0,
            b: 1,
            n: 11,
            eps: None,
            mode: ModeSelection::Both,
            threads: 0,
            out_dir: PathBuf::from("out"),
            solver: SolverConfig::default(),
            ub_rule: EpsRule::InverseSquare,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.a == self.b {
            return Err(invalid(Stage::Config, "initial values a and b must differ"));
        }
        IterationSpec::periodic(self.a, self.n).validate().at(Stage::Config)?;
        if let Some(e) = self.eps {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid(Stage::Config, format!("eps must be positive (got {e})")));
            }
        }
        if !(self.solver.residual_tol > 0.0) {
            return Err(invalid(Stage::Config, "residual tolerance must be positive"));
        }
        Ok(())
    }
}

/// Builds a rayon pool with `threads` workers (0 for the default).
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(Stage::Config, format!("thread pool: {e}")))
}

// ---------------------------------------------------------------- build-poly

/// Deflated periodicity polynomial with the integer roots removed from it.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessPoly {
    pub spec: IterationSpec,
    pub poly: IntPoly,
    pub removed_roots: Vec<i64>,
}

impl WitnessPoly {
    pub fn evaluator(&self) -> OrbitEvaluator {
        OrbitEvaluator::new(self.spec, self.removed_roots.clone())
    }

    pub fn label(&self) -> String {
        self.spec.label()
    }

    pub fn to_text(&self) -> String {
        let removed = if self.removed_roots.is_empty() {
            "none".to_string()
        } else {
            self.removed_roots.iter().map(i64::to_string).collect::<Vec<_>>().join(",")
        };
        self.poly.to_text(&[
            ("a", self.spec.a.to_string()),
            ("b", self.spec.b.to_string()),
            ("n", self.spec.n.to_string()),
            ("removed", removed),
        ])
    }
}

pub fn build_poly(spec: IterationSpec) -> Result<WitnessPoly, PipelineError> {
    let full = iterate_orbit_poly(spec).at(Stage::BuildPoly)?;
    let (poly, roots) = deflate_integer_roots(&full).at(Stage::BuildPoly)?;
    let removed_roots = roots
        .iter()
        .map(|r| r.to_i64().ok_or_else(|| invalid(Stage::BuildPoly, format!("integer root {r} out of range"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WitnessPoly { spec, poly, removed_roots })
}

pub fn poly_file_name(spec: &IterationSpec) -> String {
    format!("poly_{}.txt", spec.label())
}

pub fn write_poly_file(w: &WitnessPoly, dir: &Path) -> Result<PathBuf, PipelineError> {
    let path = dir.join(poly_file_name(&w.spec));
    fs::write(&path, w.to_text()).map_err(io_err(Stage::BuildPoly, &path))?;
    Ok(path)
}

pub fn read_poly_file(path: &Path) -> Result<WitnessPoly, PipelineError> {
    let f = fs::File::open(path).map_err(io_err(Stage::SolveRoots, path))?;
    let (poly, meta) = IntPoly::from_text(BufReader::new(f)).at(Stage::SolveRoots)?;
    let get = |k: &str| {
        meta.iter()
            .find(|(key, _)| key == k)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| invalid(Stage::SolveRoots, format!("{}: header lacks `{k}`", path.display())))
    };
    let parse_i64 = |k: &str| -> Result<i64, PipelineError> {
        get(k)?
            .parse()
            .map_err(|e| invalid(Stage::SolveRoots, format!("{}: bad `{k}`: {e}", path.display())))
    };
    let spec = IterationSpec {
        a: parse_i64("a")?,
        b: parse_i64("b")?,
        n: parse_i64("n")?
            .try_into()
            .map_err(|_| invalid(Stage::SolveRoots, format!("{}: bad `n`", path.display())))?,
    };
    spec.validate().at(Stage::SolveRoots)?;
    let removed = get("removed")?;
    let removed_roots = if removed == "none" {
        Vec::new()
    } else {
        removed
            .split(',')
            .map(|s| s.parse::<i64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid(Stage::SolveRoots, format!("{}: bad `removed`: {e}", path.display())))?
    };
    let w = WitnessPoly { spec, poly, removed_roots };
    if w.poly.degree() + w.removed_roots.len() != spec.degree() {
        return Err(invalid(
            Stage::SolveRoots,
            format!(
                "{}: degree {} plus {} removed roots does not match 2^(n-1) = {}",
                path.display(),
                w.poly.degree(),
                w.removed_roots.len(),
                spec.degree()
            ),
        ));
    }
    Ok(w)
}

// --------------------------------------------------------------- solve-roots

pub fn solve_roots(w: &WitnessPoly, cfg: &SolverConfig) -> Result<ConjugateSet, PipelineError> {
    solve_all_roots(&w.evaluator(), w.poly.degree(), cfg).at(Stage::SolveRoots)
}

pub fn roots_file_name(label: &str) -> String {
    format!("roots_{label}.csv")
}

pub fn write_roots_file(set: &ConjugateSet, dir: &Path) -> Result<PathBuf, PipelineError> {
    let path = dir.join(roots_file_name(&set.label));
    let f = fs::File::create(&path).map_err(io_err(Stage::SolveRoots, &path))?;
    let mut bw = std::io::BufWriter::new(f);
    set.write_csv(&mut bw).map_err(io_err(Stage::SolveRoots, &path))?;
    std::io::Write::flush(&mut bw).map_err(io_err(Stage::SolveRoots, &path))?;
    Ok(path)
}

/// Reads a roots CSV; the label is the file stem without any `roots_` prefix.
pub fn read_roots_file(path: &Path) -> Result<ConjugateSet, PipelineError> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("roots");
    let label = stem.strip_prefix("roots_").unwrap_or(stem).to_string();
    let f = fs::File::open(path).map_err(io_err(Stage::Energy, path))?;
    ConjugateSet::read_csv(label, BufReader::new(f)).map_err(|e| match e {
        SolveError::Parse { line, msg } => invalid(Stage::Energy, format!("{}: line {line}: {msg}", path.display())),
        other => PipelineError { stage: Stage::Energy, source: other.into() },
    })
}

// -------------------------------------------------------------------- energy

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyKind {
    SelfEnergy,
    Cross,
}

/// Output of the energy stage for one measure or one pair of measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyStage {
    pub schema: u32,
    pub kind: EnergyKind,
    pub labels: Vec<String>,
    pub degrees: Vec<usize>,
    #[serde(with = "report::real17")]
    pub epsilon: f64,
    /// Unregularized self-pairing with the diagonal excluded (self only).
    #[serde(with = "report::real17_opt")]
    pub discrete: Option<f64>,
    pub paper_bound: Option<EnergyBreakdown>,
    pub exact_quadrature: Option<EnergyBreakdown>,
}

impl EnergyStage {
    pub fn breakdown(&self, mode: EnergyMode) -> Option<&EnergyBreakdown> {
        match mode {
            EnergyMode::PaperBound => self.paper_bound.as_ref(),
            EnergyMode::ExactQuadrature => self.exact_quadrature.as_ref(),
        }
    }
}

/// `1/d²` for the larger of the given degrees.
pub fn auto_epsilon(degrees: &[usize]) -> f64 {
    let d = degrees.iter().copied().max().unwrap_or(1).max(1) as f64;
    1.0 / (d * d)
}

fn measure(set: &ConjugateSet, eps: f64) -> Result<RegularizedMeasure, PipelineError> {
    if set.points.is_empty() {
        return Err(invalid(Stage::Energy, format!("root set {} is empty", set.label)));
    }
    RegularizedMeasure::uniform(set.points.clone(), eps).at(Stage::Energy)
}

pub fn energy_self(set: &ConjugateSet, eps: f64, modes: ModeSelection) -> Result<EnergyStage, PipelineError> {
    let mu = measure(set, eps)?;
    let discrete = discrete_energy(&DiscreteMeasure::uniform(set.points.clone()), &DiscreteMeasure::uniform(set.points.clone()));
    let mut out = EnergyStage {
        schema: SCHEMA,
        kind: EnergyKind::SelfEnergy,
        labels: vec![set.label.clone()],
        degrees: vec![set.degree()],
        epsilon: eps,
        discrete: (!discrete.all_excluded).then_some(discrete.value),
        paper_bound: None,
        exact_quadrature: None,
    };
    for mode in modes.modes() {
        let b = regularized_self_energy(&mu, mode);
        match mode {
            EnergyMode::PaperBound => out.paper_bound = Some(b),
            EnergyMode::ExactQuadrature => out.exact_quadrature = Some(b),
        }
    }
    Ok(out)
}

pub fn energy_cross(
    alpha: &ConjugateSet,
    beta: &ConjugateSet,
    eps: f64,
    modes: ModeSelection,
) -> Result<EnergyStage, PipelineError> {
    let mu = measure(alpha, eps)?;
    let nu = measure(beta, eps)?;
    let mut out = EnergyStage {
        schema: SCHEMA,
        kind: EnergyKind::Cross,
        labels: vec![alpha.label.clone(), beta.label.clone()],
        degrees: vec![alpha.degree(), beta.degree()],
        epsilon: eps,
        discrete: None,
        paper_bound: None,
        exact_quadrature: None,
    };
    for mode in modes.modes() {
        let b = regularized_cross_energy(&mu, &nu, mode).at(Stage::Energy)?;
        match mode {
            EnergyMode::PaperBound => out.paper_bound = Some(b),
            EnergyMode::ExactQuadrature => out.exact_quadrature = Some(b),
        }
    }
    Ok(out)
}

pub fn self_energy_file_name(label: &str) -> String {
    format!("energy_{label}.json")
}

pub fn cross_energy_file_name(alpha: &str, beta: &str) -> String {
    format!("energy_{alpha}__{beta}.json")
}

fn write_json<T: Serialize>(value: &T, path: &Path, stage: Stage) -> Result<(), PipelineError> {
    fs::write(path, report::to_json(value)).map_err(io_err(stage, path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, stage: Stage) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(stage, path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError {
        stage,
        source: StageFailure::Json { path: path.to_path_buf(), source },
    })
}

pub fn write_energy_file(e: &EnergyStage, dir: &Path) -> Result<PathBuf, PipelineError> {
    let name = match e.kind {
        EnergyKind::SelfEnergy => self_energy_file_name(&e.labels[0]),
        EnergyKind::Cross => cross_energy_file_name(&e.labels[0], &e.labels[1]),
    };
    let path = dir.join(name);
    write_json(e, &path, Stage::Energy)?;
    Ok(path)
}

pub fn read_energy_file(path: &Path) -> Result<EnergyStage, PipelineError> {
    read_json(path, Stage::Bound)
}

// --------------------------------------------------------------------- bound

fn witness_energies(e: &EnergyStage, mode: EnergyMode) -> Result<WitnessEnergies, PipelineError> {
    if e.kind != EnergyKind::SelfEnergy || e.labels.len() != 1 || e.degrees.len() != 1 {
        return Err(invalid(Stage::Bound, "expected a self-energy stage"));
    }
    let discrete_self = e
        .discrete
        .ok_or_else(|| invalid(Stage::Bound, format!("{}: no discrete self-energy", e.labels[0])))?;
    let reg = e
        .breakdown(mode)
        .ok_or_else(|| invalid(Stage::Bound, format!("{}: no {mode:?} energies", e.labels[0])))?;
    Ok(WitnessEnergies {
        label: e.labels[0].clone(),
        degree: e.degrees[0] as u64,
        discrete_self,
        regularized_self: reg.total,
    })
}

fn assemble(
    alpha: &EnergyStage,
    beta: &EnergyStage,
    cross: &EnergyStage,
    mode: EnergyMode,
) -> Result<Option<(WitnessEnergies, WitnessEnergies, LowerBoundAssembly)>, PipelineError> {
    let (Some(_), Some(_), Some(c)) = (alpha.breakdown(mode), beta.breakdown(mode), cross.breakdown(mode)) else {
        return Ok(None);
    };
    let wa = witness_energies(alpha, mode)?;
    let wb = witness_energies(beta, mode)?;
    let lb = assemble_lower_bound(&wa, &wb, c.total, alpha.epsilon).at(Stage::Bound)?;
    Ok(Some((wa, wb, lb)))
}

/// Lower bound from the three energy stages and the resulting degree bound.
///
/// The bound-mode assembly is reported as the lower bound when present; the
/// quadrature assembly is carried alongside.
pub fn bound_stage(
    alpha: &EnergyStage,
    beta: &EnergyStage,
    cross: &EnergyStage,
    rule: EpsRule,
) -> Result<BoundReport, PipelineError> {
    if cross.kind != EnergyKind::Cross
        || cross.labels.len() != 2
        || cross.labels[0] != alpha.labels.first().cloned().unwrap_or_default()
        || cross.labels[1] != beta.labels.first().cloned().unwrap_or_default()
    {
        return Err(invalid(
            Stage::Bound,
            format!(
                "cross energy labels {:?} do not match witnesses {:?} and {:?}",
                cross.labels, alpha.labels, beta.labels
            ),
        ));
    }
    for e in [beta, cross] {
        if e.epsilon != alpha.epsilon {
            return Err(PipelineError {
                stage: Stage::Bound,
                source: EnergyError::EpsilonMismatch(alpha.epsilon, e.epsilon).into(),
            });
        }
    }
    let bound = assemble(alpha, beta, cross, EnergyMode::PaperBound)?;
    let quad = assemble(alpha, beta, cross, EnergyMode::ExactQuadrature)?;
    let (mode, (wa, wb, terms), quad_terms) = match (bound, quad) {
        (Some(b), q) => (EnergyMode::PaperBound, b, q.map(|q| q.2)),
        (None, Some(q)) => (EnergyMode::ExactQuadrature, q, None),
        (None, None) => return Err(invalid(Stage::Bound, "energy stages share no mode")),
    };
    Ok(BoundReport::build(wa, wb, mode, terms, quad_terms, rule))
}

pub const BOUND_FILE: &str = "bound.json";
pub const REPORT_FILE: &str = "report.json";

pub fn write_bound_file(b: &BoundReport, dir: &Path) -> Result<PathBuf, PipelineError> {
    let path = dir.join(BOUND_FILE);
    write_json(b, &path, Stage::Bound)?;
    Ok(path)
}

pub fn read_bound_file(path: &Path) -> Result<BoundReport, PipelineError> {
    read_json(path, Stage::Report)
}

// -------------------------------------------------------------------- report

/// Certification and shape summary of one witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessSummary {
    pub role: String,
    pub label: String,
    pub spec: IterationSpec,
    pub degree: usize,
    pub removed_integer_roots: Vec<i64>,
    /// Lowest-order coefficients, decimal.
    pub leading_coefficients: Vec<String>,
    /// Highest-order coefficients, decimal, lowest order first.
    pub trailing_coefficients: Vec<String>,
    pub max_coefficient_bits: u64,
    pub sweeps: usize,
    pub certification: CertReport,
    #[serde(with = "report::real17")]
    pub conjugation_defect: f64,
    #[serde(with = "report::real17")]
    pub max_modulus: f64,
    pub membership: MembershipSummary,
    /// Count, residual, distinctness and conjugation closure all hold.
    pub certified: bool,
}

/// Conjugation closure tolerance of the certification.
pub const CONJUGATION_TOL: f64 = 1e-10;
const COEFF_HEAD: usize = 6;
const COEFF_TAIL: usize = 3;

pub fn summarize_witness(role: &str, w: &WitnessPoly, set: &ConjugateSet, tol: f64) -> WitnessSummary {
    let ev = w.evaluator();
    let certification = certify(set, &ev, tol);
    let conjugation_defect = set.conjugation_defect();
    let coeffs = w.poly.coeffs();
    let head: Vec<String> = coeffs.iter().take(COEFF_HEAD).map(BigInt::to_string).collect();
    let tail: Vec<String> = coeffs[coeffs.len().saturating_sub(COEFF_TAIL)..].iter().map(BigInt::to_string).collect();
    let membership = summarize_membership(&set.points, Complex64::new(w.spec.a as f64, 0.0), MEMBERSHIP_ITERS);
    WitnessSummary {
        role: role.to_string(),
        label: w.label(),
        spec: w.spec,
        degree: w.poly.degree(),
        removed_integer_roots: w.removed_roots.clone(),
        leading_coefficients: head,
        trailing_coefficients: tail,
        max_coefficient_bits: w.poly.max_coeff_bits(),
        sweeps: set.sweeps,
        certified: certification.pass && conjugation_defect <= CONJUGATION_TOL,
        certification,
        conjugation_defect,
        max_modulus: set.max_modulus(),
        membership,
    }
}

/// Computed value of a reference energy constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConstant {
    pub name: String,
    #[serde(with = "report::real17")]
    pub reference: f64,
    #[serde(with = "report::real17_opt")]
    pub computed: Option<f64>,
    /// `computed - reference`.
    #[serde(with = "report::real17_opt")]
    pub delta: Option<f64>,
}

/// `([α],[α])`, `([β],[β])`, `([α]_ε,[α]_ε)`, `([β]_ε,[β]_ε)`, `-2([α]_ε,[β]_ε)`
/// for the default witnesses at `ε = 1/1023²`, bound mode.
pub const REFERENCE_ENERGIES: [(&str, f64); 5] = [
    ("alpha_discrete_self", -0.00839974),
    ("beta_discrete_self", -0.00677444),
    ("alpha_regularized_self", 0.00514961),
    ("beta_regularized_self", 0.00677490),
    ("minus_twice_cross", 0.630005),
];

pub fn reference_constants(alpha: &EnergyStage, beta: &EnergyStage, cross: &EnergyStage) -> Vec<ReferenceConstant> {
    let mode = EnergyMode::PaperBound;
    let computed = [
        alpha.discrete,
        beta.discrete,
        alpha.breakdown(mode).map(|b| b.total),
        beta.breakdown(mode).map(|b| b.total),
        cross.breakdown(mode).map(|b| -2.0 * b.total),
    ];
    REFERENCE_ENERGIES
        .iter()
        .zip(computed)
        .map(|(&(name, reference), computed)| ReferenceConstant {
            name: name.to_string(),
            reference,
            computed,
            delta: computed.map(|c| c - reference),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunParameters {
    pub a: i64,
    pub b: i64,
    pub n: u32,
    #[serde(with = "report::real17")]
    pub epsilon: f64,
    pub mode: ModeSelection,
    #[serde(with = "report::real17")]
    pub residual_tol: f64,
    pub ub_rule: EpsRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema: u32,
    pub parameters: RunParameters,
    /// α (initial value `b`) then β (initial value `a`).
    pub witnesses: Vec<WitnessSummary>,
    pub energies: Vec<EnergyStage>,
    pub reference_constants: Vec<ReferenceConstant>,
    pub bound: BoundReport,
    pub all_certified: bool,
}

impl PipelineReport {
    pub fn to_text(&self) -> String {
        render_text(self)
    }
}

/// Outputs of [`run_pipeline`] kept in memory.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub report_path: PathBuf,
    pub alpha_roots: ConjugateSet,
    pub beta_roots: ConjugateSet,
}

/// Runs every stage inside a pool of `cfg.threads` workers, writing the
/// intermediate files and `report.json` under `cfg.out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    cfg.validate()?;
    let pool = thread_pool(cfg.threads)?;
    pool.install(|| run_stages(cfg))
}

fn run_stages(cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(io_err(Stage::Config, dir))?;

    let alpha_poly = build_poly(IterationSpec::periodic(cfg.b, cfg.n))?;
    let beta_poly = build_poly(IterationSpec::periodic(cfg.a, cfg.n))?;
    write_poly_file(&alpha_poly, dir)?;
    write_poly_file(&beta_poly, dir)?;

    let alpha_roots = solve_roots(&alpha_poly, &cfg.solver)?;
    let beta_roots = solve_roots(&beta_poly, &cfg.solver)?;
    write_roots_file(&alpha_roots, dir)?;
    write_roots_file(&beta_roots, dir)?;

    let eps = cfg.eps.unwrap_or_else(|| auto_epsilon(&[alpha_roots.degree(), beta_roots.degree()]));
    let e_alpha = energy_self(&alpha_roots, eps, cfg.mode)?;
    let e_beta = energy_self(&beta_roots, eps, cfg.mode)?;
    let e_cross = energy_cross(&alpha_roots, &beta_roots, eps, cfg.mode)?;
    for e in [&e_alpha, &e_beta, &e_cross] {
        write_energy_file(e, dir)?;
    }

    let bound = bound_stage(&e_alpha, &e_beta, &e_cross, cfg.ub_rule)?;
    write_bound_file(&bound, dir)?;

    let tol = cfg.solver.residual_tol;
    let witnesses = vec![
        summarize_witness("alpha", &alpha_poly, &alpha_roots, tol),
        summarize_witness("beta", &beta_poly, &beta_roots, tol),
    ];
    let all_certified = witnesses.iter().all(|w| w.certified);
    let report = PipelineReport {
        schema: SCHEMA,
        parameters: RunParameters {
            a: cfg.a,
            b: cfg.b,
            n: cfg.n,
            epsilon: eps,
            mode: cfg.mode,
            residual_tol: tol,
            ub_rule: cfg.ub_rule,
        },
        witnesses,
        reference_constants: reference_constants(&e_alpha, &e_beta, &e_cross),
        energies: vec![e_alpha, e_beta, e_cross],
        bound,
        all_certified,
    };
    let report_path = dir.join(REPORT_FILE);
    write_json(&report, &report_path, Stage::Report)?;
    Ok(PipelineRun { report, report_path, alpha_roots, beta_roots })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.9}"))
}

/// Human-readable table of a bound report.
pub fn render_bound_text(b: &BoundReport) -> String {
    let t = &b.component_terms;
    let mut s = String::new();
    s.push_str(&format!("witnesses        {} / {} ({:?})\n", b.witness_labels.0, b.witness_labels.1, b.component_mode));
    s.push_str(&format!("epsilon          {:e}\n", t.epsilon));
    s.push_str(&format!("witness distance {:.9}\n", t.witness_distance));
    s.push_str(&format!("alpha penalty    {:.9}\n", t.alpha_penalty));
    s.push_str(&format!("beta penalty     {:.9}\n", t.beta_penalty));
    s.push_str(&format!("-2 cross         {:.9}\n", t.minus_twice_cross));
    s.push_str(&format!("lower bound      {:.9}{}\n", t.lower_bound, if t.informative { "" } else { " (not informative)" }));
    if let Some(q) = &b.quadrature_terms {
        s.push_str(&format!("quadrature LB    {:.9}\n", q.lower_bound));
    }
    s.push_str("degree  upper bound\n");
    for (d, u) in &b.ub_curve.0 {
        s.push_str(&format!("{d:>6}  {u:.9}\n"));
    }
    for r in &b.reference_checks {
        s.push_str(&format!(
            "against {:<16} {:.6}: delta {:+.6}, max degree {}\n",
            r.name,
            r.lower_bound,
            r.delta,
            r.max_degree.map_or("-".into(), |d| d.to_string())
        ));
    }
    match (b.max_degree, &b.max_degree_note) {
        (Some(d), _) => s.push_str(&format!("max degree       {d}\n")),
        (None, Some(n)) => s.push_str(&format!("max degree       none ({n})\n")),
        (None, None) => s.push_str("max degree       none\n"),
    }
    s
}

fn render_text(r: &PipelineReport) -> String {
    let mut s = String::new();
    for w in &r.witnesses {
        s.push_str(&format!(
            "{} {}: degree {}, residual {:.2e}, min sep {:.2e}, conj {:.2e}, |c|max {:.4}, escaped {}/{}, {}\n",
            w.role,
            w.label,
            w.degree,
            w.certification.max_residual,
            w.certification.min_separation,
            w.conjugation_defect,
            w.max_modulus,
            w.membership.escaped,
            w.membership.total,
            if w.certified { "certified" } else { "NOT certified" }
        ));
    }
    s.push_str("constant                  reference     computed      delta\n");
    for c in &r.reference_constants {
        s.push_str(&format!(
            "{:<25} {:<13.8} {:<13} {}\n",
            c.name,
            c.reference,
            opt(c.computed),
            c.delta.map_or("-".into(), |d| format!("{d:+.2e}"))
        ));
    }
    s.push_str(&render_bound_text(&r.bound));
    s
}
