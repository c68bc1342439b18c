//! Simultaneous root finding for deflated periodicity polynomials.
//!
//! The polynomial is never expanded: [`OrbitEvaluator`] runs the `n` squaring
//! steps of the orbit together with their forward-mode derivative, and
//! divides out the integer roots analytically. Roots are located with Jacobi
//! style Aberth–Ehrlich sweeps in double precision, then polished and
//! certified in double-double.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::critpoly::IterationSpec;
use crate::dd::DdComplex;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("requested {requested} roots but the deflated polynomial has degree {actual}")]
    DegreeMismatch { requested: usize, actual: usize },
    #[error("no convergence after {sweeps} sweeps (worst step {worst_step:.3e}, worst residual {worst_residual:.3e})")]
    NonConvergence {
        sweeps: usize,
        worst_step: f64,
        worst_residual: f64,
    },
    #[error("approximations {i} and {j} collided (distance {distance:.3e})")]
    CollisionDetected { i: usize, j: usize, distance: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Orbit magnitude past which the evaluator switches to tracking `1/P`.
const ESCAPE_SWITCH: f64 = 1e100;

/// `c -> (f_c^n(a) - b) / prod (c - r)` over the removed integer roots `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitEvaluator {
    pub spec: IterationSpec,
    pub deflated_roots: Vec<i64>,
}

impl OrbitEvaluator {
    pub fn new(spec: IterationSpec, deflated_roots: Vec<i64>) -> Self {
        OrbitEvaluator { spec, deflated_roots }
    }

    /// Degree of the deflated polynomial.
    pub fn degree(&self) -> usize {
        self.spec.degree().saturating_sub(self.deflated_roots.len())
    }

    /// Radius of a disc guaranteed to contain every root.
    ///
    /// If `|c| > R_a = a^2 + 1 + sqrt(2a^2 + 1)` then `|f_c^2(a)| > |c| > 2`
    /// and the orbit increases from there on, so it can only reach `b` when
    /// `|b| > |c|`.
    pub fn root_radius(&self) -> f64 {
        let a = self.spec.a as f64;
        let b = self.spec.b as f64;
        if self.spec.n == 1 {
            return (b - a * a).abs();
        }
        let r_a = a * a + 1.0 + (2.0 * a * a + 1.0).sqrt();
        r_a.max(b.abs())
    }

    /// Logarithmic derivative `q'(c) / q(c)` of the deflated polynomial.
    ///
    /// Stays finite for escaping parameters where the value itself overflows.
    /// Returns an infinite value when `q(c)` is exactly zero.
    pub fn log_derivative(&self, c: Complex64) -> Complex64 {
        let mut p = Complex64::new(self.spec.a as f64, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        let mut inv: Option<Complex64> = None;
        let mut ld = Complex64::new(0.0, 0.0);
        for _ in 0..self.spec.n {
            match inv {
                None => {
                    dp = 2.0 * p * dp + 1.0;
                    p = p * p + c;
                    let m = p.norm();
                    if m > ESCAPE_SWITCH {
                        // |p| can reach 1e200 here, so scale before squaring.
                        let unit = p / m;
                        inv = Some(unit.conj() / m);
                        ld = (dp / m) / unit;
                    }
                }
                Some(v) => {
                    let v2 = v * v;
                    let den = 1.0 + c * v2;
                    ld = (2.0 * ld + v2) / den;
                    inv = Some(v2 / den);
                }
            }
        }
        let b = self.spec.b as f64;
        let mut ld = match inv {
            None => {
                let q = p - b;
                if q.norm_sqr() == 0.0 {
                    return Complex64::new(f64::INFINITY, 0.0);
                }
                dp / q
            }
            Some(v) => ld / (1.0 - b * v),
        };
        for &r in &self.deflated_roots {
            ld -= (c - r as f64).inv();
        }
        ld
    }

    /// Value and derivative of the deflated polynomial in double precision.
    pub fn eval(&self, c: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(self.spec.a as f64, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for _ in 0..self.spec.n {
            dp = 2.0 * p * dp + 1.0;
            p = p * p + c;
        }
        p -= self.spec.b as f64;
        let mut q = p;
        let mut dq = dp;
        for &r in &self.deflated_roots {
            // q = (c - r) * q_new  =>  q_new' = (q' - q_new) / (c - r)
            let lin = c - r as f64;
            let qn = q / lin;
            dq = (dq - qn) / lin;
            q = qn;
        }
        (q, dq)
    }

    /// Value and derivative of the deflated polynomial in double-double.
    pub fn eval_dd(&self, c: DdComplex) -> (DdComplex, DdComplex) {
        let mut p = DdComplex::from_real(self.spec.a as f64);
        let mut dp = DdComplex::ZERO;
        for _ in 0..self.spec.n {
            dp = (p * dp).scale(2.0) + DdComplex::ONE;
            p = p.sqr() + c;
        }
        p = p - DdComplex::from_real(self.spec.b as f64);
        let mut q = p;
        let mut dq = dp;
        for &r in &self.deflated_roots {
            let lin = c - DdComplex::from_real(r as f64);
            let qn = q / lin;
            dq = (dq - qn) / lin;
            q = qn;
        }
        (q, dq)
    }
}

/// Tuning for [`solve_all_roots`].
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Maximum `|q|` at a certified root (double-double evaluation).
    pub residual_tol: f64,
    /// Sweep stops once every update satisfies `|w| <= step_tol * max(1, |z|)`.
    pub step_tol: f64,
    /// Approximations closer than this are reported as a collision.
    pub min_separation: f64,
    pub max_sweeps: usize,
    /// Starting circle radius; defaults to 1.1 times [`OrbitEvaluator::root_radius`].
    pub initial_radius: Option<f64>,
    /// Rotation of the starting points, in radians.
    pub angle_offset: f64,
    /// Double-double Newton steps applied to each root after the sweep.
    pub polish_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            residual_tol: 1e-10,
            step_tol: 1e-12,
            min_separation: 1e-8,
            max_sweeps: 2000,
            initial_radius: None,
            angle_offset: std::f64::consts::SQRT_2 - 1.0,
            polish_steps: 3,
        }
    }
}

/// The full set of roots of one deflated periodicity polynomial.
///
/// Each root is stored as a double-double `points[i] + corrections[i]`;
/// `points` alone is accurate to double precision and is what the energy
/// computations use.
#[derive(Clone, Debug, PartialEq)]
pub struct ConjugateSet {
    pub label: String,
    pub points: Vec<Complex64>,
    pub corrections: Vec<Complex64>,
    pub residuals: Vec<f64>,
    /// Sweeps used by the solver (0 when read from a file).
    pub sweeps: usize,
}

impl ConjugateSet {
    pub fn from_points(label: impl Into<String>, points: Vec<Complex64>) -> Self {
        let n = points.len();
        ConjugateSet {
            label: label.into(),
            points,
            corrections: vec![Complex64::new(0.0, 0.0); n],
            residuals: vec![f64::NAN; n],
            sweeps: 0,
        }
    }

    pub fn degree(&self) -> usize {
        self.points.len()
    }

    pub fn dd_point(&self, i: usize) -> DdComplex {
        DdComplex::from_parts(self.points[i], self.corrections[i])
    }

    pub fn max_modulus(&self) -> f64 {
        self.points.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest pairwise distance, with the indices attaining it.
    pub fn min_separation(&self) -> Option<(f64, usize, usize)> {
        let pts = &self.points;
        (0..pts.len())
            .into_par_iter()
            .filter_map(|i| {
                ((i + 1)..pts.len())
                    .map(|j| ((pts[i] - pts[j]).norm(), i, j))
                    .min_by(|x, y| x.0.total_cmp(&y.0))
            })
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
    }

    /// Largest distance from a conjugated point to its nearest point in the set.
    pub fn conjugation_defect(&self) -> f64 {
        let pts = &self.points;
        pts.par_iter()
            .map(|z| {
                let zc = z.conj();
                pts.iter().map(|w| (zc - w).norm()).fold(f64::INFINITY, f64::min)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// CSV with columns `index,re,im,residual,re_lo,im_lo`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,re,im,residual,re_lo,im_lo")?;
        for i in 0..self.points.len() {
            let z = self.points[i];
            let lo = self.corrections[i];
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                i, z.re, z.im, self.residuals[i], lo.re, lo.im
            )?;
        }
        Ok(())
    }

    /// Reads [`ConjugateSet::write_csv`] output. Only `re` and `im` are
    /// required; missing residual and correction columns default to NaN and 0.
    pub fn read_csv<R: BufRead>(label: impl Into<String>, r: R) -> Result<Self, SolveError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(SolveError::Parse {
            line: 1,
            msg: "empty file".into(),
        })??;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let find = |name: &str| cols.iter().position(|c| *c == name);
        let (re_i, im_i) = match (find("re"), find("im")) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(SolveError::Parse {
                    line: 1,
                    msg: format!("header must contain `re` and `im`: {header:?}"),
                })
            }
        };
        let res_i = find("residual");
        let re_lo_i = find("re_lo");
        let im_lo_i = find("im_lo");

        let mut set = ConjugateSet::from_points(label, Vec::new());
        for (k, line) in lines.enumerate() {
            let line = line?;
            let lineno = k + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let get = |idx: Option<usize>, default: f64| -> Result<f64, SolveError> {
                match idx {
                    None => Ok(default),
                    Some(i) => fields
                        .get(i)
                        .ok_or_else(|| SolveError::Parse {
                            line: lineno,
                            msg: format!("missing column {}", cols[i]),
                        })?
                        .parse::<f64>()
                        .map_err(|e| SolveError::Parse {
                            line: lineno,
                            msg: format!("column {}: {e}", cols[i]),
                        }),
                }
            };
            let z = Complex64::new(get(Some(re_i), 0.0)?, get(Some(im_i), 0.0)?);
            set.points.push(z);
            set.residuals.push(get(res_i, f64::NAN)?);
            set.corrections
                .push(Complex64::new(get(re_lo_i, 0.0)?, get(im_lo_i, 0.0)?));
        }
        Ok(set)
    }
}

fn aberth_update(ev: &OrbitEvaluator, z: &[Complex64], k: usize, max_step: f64) -> Complex64 {
    let zk = z[k];
    let ld = ev.log_derivative(zk);
    if !ld.re.is_finite() || !ld.im.is_finite() {
        return Complex64::new(0.0, 0.0);
    }
    let newton = ld.inv();
    let mut s = Complex64::new(0.0, 0.0);
    for (j, zj) in z.iter().enumerate() {
        if j != k {
            let d = zk - zj;
            let n2 = d.norm_sqr();
            if n2 > 0.0 {
                s += d.conj() / n2;
            }
        }
    }
    let mut w = newton / (1.0 - newton * s);
    if !(w.re.is_finite() && w.im.is_finite()) {
        w = newton;
    }
    let m = w.norm();
    if m > max_step {
        w *= max_step / m;
    }
    w
}

/// All `d` roots of the deflated polynomial behind `ev`.
pub fn solve_all_roots(ev: &OrbitEvaluator, d: usize, cfg: &SolverConfig) -> Result<ConjugateSet, SolveError> {
    let actual = ev.degree();
    if d != actual {
        return Err(SolveError::DegreeMismatch { requested: d, actual });
    }
    let label = ev.spec.label();
    if d == 0 {
        return Ok(ConjugateSet::from_points(label, Vec::new()));
    }

    let radius = cfg.initial_radius.unwrap_or(1.1 * ev.root_radius());
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / d as f64 + cfg.angle_offset;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    let mut sweeps = 0;
    let mut worst_step = f64::INFINITY;
    while sweeps < cfg.max_sweeps {
        let snapshot = &z;
        let steps: Vec<Complex64> = (0..d)
            .into_par_iter()
            .map(|k| aberth_update(ev, snapshot, k, radius))
            .collect();
        worst_step = 0.0;
        for (zk, w) in z.iter_mut().zip(&steps) {
            *zk -= w;
            worst_step = f64::max(worst_step, w.norm() / zk.norm().max(1.0));
        }
        sweeps += 1;
        if worst_step <= cfg.step_tol {
            break;
        }
    }

    let polished: Vec<(DdComplex, f64)> = z
        .par_iter()
        .map(|&z0| {
            let mut c = DdComplex::from_c64(z0);
            for _ in 0..cfg.polish_steps {
                let (q, dq) = ev.eval_dd(c);
                let step = q / dq;
                if !step.is_finite() {
                    break;
                }
                c = c - step;
            }
            let (q, _) = ev.eval_dd(c);
            let res = q.norm();
            (c, if res.is_finite() { res } else { f64::INFINITY })
        })
        .collect();

    let mut set = ConjugateSet::from_points(label, Vec::with_capacity(d));
    set.sweeps = sweeps;
    set.corrections.clear();
    set.residuals.clear();
    for (c, r) in polished {
        set.points.push(c.hi());
        set.corrections.push(c.lo());
        set.residuals.push(r);
    }

    let worst_residual = set.residuals.iter().copied().fold(0.0, f64::max);
    if worst_step > cfg.step_tol {
        return Err(SolveError::NonConvergence {
            sweeps,
            worst_step,
            worst_residual,
        });
    }
    if let Some((dist, i, j)) = set.min_separation() {
        if dist < cfg.min_separation {
            return Err(SolveError::CollisionDetected { i, j, distance: dist });
        }
    }
    if !(worst_residual <= cfg.residual_tol) {
        return Err(SolveError::NonConvergence {
            sweeps,
            worst_step,
            worst_residual,
        });
    }
    Ok(set)
}

/// Outcome of [`certify`].
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CertReport {
    pub count: usize,
    pub expected_count: usize,
    #[serde(with = "crate::report::real17")]
    pub max_residual: f64,
    /// Largest double-double Newton correction `|q / q'|` over the roots.
    #[serde(with = "crate::report::real17")]
    pub max_newton_step: f64,
    #[serde(with = "crate::report::real17")]
    pub min_separation: f64,
    #[serde(with = "crate::report::real17")]
    pub tolerance: f64,
    pub pass: bool,
}

/// Re-evaluates every root in double-double and checks residuals, count and
/// distinctness.
pub fn certify(roots: &ConjugateSet, ev: &OrbitEvaluator, tol: f64) -> CertReport {
    let (max_residual, max_newton_step) = (0..roots.degree())
        .into_par_iter()
        .map(|i| {
            let (q, dq) = ev.eval_dd(roots.dd_point(i));
            let res = q.norm();
            let step = (q / dq).norm();
            (
                if res.is_finite() { res } else { f64::INFINITY },
                if step.is_finite() { step } else { f64::INFINITY },
            )
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    let min_separation = roots.min_separation().map_or(f64::INFINITY, |m| m.0);
    let expected_count = ev.degree();
    let pass = roots.degree() == expected_count && max_residual <= tol && min_separation > 0.0;
    CertReport {
        count: roots.degree(),
        expected_count,
        max_residual,
        max_newton_step,
        min_separation,
        tolerance: tol,
        pass,
    }
}
