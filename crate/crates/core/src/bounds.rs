//! Degree bound for parameters at which two initial values are both preperiodic.
//!
//! Two estimates of the archimedean distance between the equilibrium
//! measures of the generalized Mandelbrot sets are compared:
//!
//! * an upper bound that holds whenever an algebraic integer `c` of degree
//!   `d` has both orbits finite, built from the triangle inequality through
//!   `[c]_ε` and the Minkowski lower bound on `|disc(c)|`;
//! * a lower bound from two witness root clouds that approximate the two
//!   equilibrium measures.
//!
//! The largest `d` for which the upper bound still reaches the lower bound
//! bounds the degree of every such `c`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::energy::{distance_from_energies, EnergyError, EnergyMode};

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("negative radicand {radicand:.3e} at degree {degree}")]
    NegativeRadicand { degree: u64, radicand: f64 },
    #[error("lower bound must be positive to bound the degree (got {0})")]
    NonPositiveLowerBound(f64),
    #[error("upper bound still reaches {lower_bound} at the scan cap {cap}")]
    NoBound { lower_bound: f64, cap: u64 },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Degrees scanned by [`solve_max_degree`] before giving up.
pub const SCAN_CAP: u64 = 1_000_000;
/// Consecutive strictly decreasing sub-threshold values that end the scan.
const MONOTONE_TAIL: u64 = 1000;

/// `log(d^d / d! · (π/4)^{d/2})`, the log of the Minkowski lower bound on the
/// discriminant of a degree-`d` algebraic integer.
pub fn minkowski_log_disc(d: u64) -> f64 {
    assert!(d >= 1, "degree must be positive");
    let df = d as f64;
    df * df.ln() - ln_gamma(df + 1.0) + 0.5 * df * std::f64::consts::FRAC_PI_4.ln()
}

/// Radicand of the distance-to-equilibrium bound:
/// `energy + 2√ε + log(1/ε)/d`.
fn penalty_radicand(energy: f64, d: u64, eps: f64) -> f64 {
    energy + 2.0 * eps.sqrt() + (1.0 / eps).ln() / d as f64
}

/// Upper bound on `d_∞(μ, [c]_ε)` for a degree-`d` algebraic integer `c` whose
/// conjugates lie in the capacity-one set carrying `μ`, given `([c],[c])`.
pub fn distance_to_equilibrium_bound(self_energy_discrete: f64, d: u64, eps: f64) -> Result<f64, BoundError> {
    let radicand = penalty_radicand(self_energy_discrete, d, eps);
    if !(radicand >= 0.0) {
        return Err(BoundError::NegativeRadicand { degree: d, radicand });
    }
    Ok(radicand.sqrt())
}

/// Upper bound on `d_∞(μ_a, μ_b)` implied by a degree-`d` common preperiodic
/// parameter, regularized at radius `eps`.
pub fn upper_bound(d: u64, eps: f64) -> Result<f64, BoundError> {
    let energy_bound = -minkowski_log_disc(d) / (d as f64 * d as f64);
    Ok(2.0 * distance_to_equilibrium_bound(energy_bound, d, eps)?)
}

/// Regularization radius as a function of the candidate degree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum EpsRule {
    /// `ε = 1/d²`
    InverseSquare,
    Fixed { epsilon: f64 },
}

impl EpsRule {
    pub fn eps(&self, d: u64) -> f64 {
        match *self {
            EpsRule::InverseSquare => 1.0 / (d as f64 * d as f64),
            EpsRule::Fixed { epsilon } => epsilon,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            EpsRule::InverseSquare => "eps(d) = 1/d^2".to_string(),
            EpsRule::Fixed { epsilon } => format!("eps(d) = {epsilon:e}"),
        }
    }
}

/// Largest `d` with `upper_bound(d, rule(d)) >= lower_bound`, or 0 if none.
///
/// Degrees whose radicand is negative are infeasible and count as below the
/// bound. The scan stops early once the bound has stayed below
/// `lower_bound` while strictly decreasing for a long run of degrees.
pub fn solve_max_degree(lower_bound: f64, rule: EpsRule) -> Result<u64, BoundError> {
    if !(lower_bound > 0.0) {
        return Err(BoundError::NonPositiveLowerBound(lower_bound));
    }
    let mut best = 0;
    let mut prev = f64::INFINITY;
    let mut run = 0;
    for d in 1..=SCAN_CAP {
        let ub = upper_bound(d, rule.eps(d)).unwrap_or(f64::NEG_INFINITY);
        if ub >= lower_bound {
            best = d;
            run = 0;
        } else if ub < prev {
            run += 1;
            if run >= MONOTONE_TAIL {
                return Ok(best);
            }
        } else {
            run = 0;
        }
        prev = ub;
    }
    if best == SCAN_CAP {
        return Err(BoundError::NoBound { lower_bound, cap: SCAN_CAP });
    }
    Ok(best)
}

/// Upper bound values over an inclusive degree range, skipping infeasible degrees.
pub fn upper_bound_curve(degrees: impl IntoIterator<Item = u64>, rule: EpsRule) -> BTreeMap<u64, f64> {
    degrees
        .into_iter()
        .filter(|&d| d >= 1)
        .filter_map(|d| upper_bound(d, rule.eps(d)).ok().map(|u| (d, u)))
        .collect()
}

/// Energies of one witness root cloud needed by the lower bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessEnergies {
    pub label: String,
    pub degree: u64,
    /// `([α], [α])`, diagonal excluded.
    #[serde(with = "crate::report::real17")]
    pub discrete_self: f64,
    /// `([α]_ε, [α]_ε)`.
    #[serde(with = "crate::report::real17")]
    pub regularized_self: f64,
}

/// The three terms of the witness lower bound and their combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundAssembly {
    #[serde(with = "crate::report::real17")]
    pub epsilon: f64,
    /// `d_∞([α]_ε, [β]_ε)`.
    #[serde(with = "crate::report::real17")]
    pub witness_distance: f64,
    /// Bound on `d_∞(μ, [α]_ε)` for the α cloud's own equilibrium measure.
    #[serde(with = "crate::report::real17")]
    pub alpha_penalty: f64,
    #[serde(with = "crate::report::real17")]
    pub beta_penalty: f64,
    /// `-2([α]_ε, [β]_ε)`.
    #[serde(with = "crate::report::real17")]
    pub minus_twice_cross: f64,
    #[serde(with = "crate::report::real17")]
    pub lower_bound: f64,
    /// False when the bound is not positive and so says nothing.
    pub informative: bool,
}

/// `d_∞([α]_ε, [β]_ε) - d_∞(μ_α, [α]_ε) - d_∞(μ_β, [β]_ε)` with both
/// penalties bounded through the discrete self-energies.
pub fn assemble_lower_bound(
    alpha: &WitnessEnergies,
    beta: &WitnessEnergies,
    cross: f64,
    eps: f64,
) -> Result<LowerBoundAssembly, BoundError> {
    let witness_distance = distance_from_energies(alpha.regularized_self, cross, beta.regularized_self)?;
    let alpha_penalty = distance_to_equilibrium_bound(alpha.discrete_self, alpha.degree, eps)?;
    let beta_penalty = distance_to_equilibrium_bound(beta.discrete_self, beta.degree, eps)?;
    let lower_bound = witness_distance - alpha_penalty - beta_penalty;
    Ok(LowerBoundAssembly {
        epsilon: eps,
        witness_distance,
        alpha_penalty,
        beta_penalty,
        minus_twice_cross: -2.0 * cross,
        lower_bound,
        informative: lower_bound > 0.0,
    })
}

/// Upper-bound values over a window, serialized as a `{"degree": value}` map.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UbCurve(pub BTreeMap<u64, f64>);

impl Serialize for UbCurve {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (d, v) in &self.0 {
            m.serialize_entry(&d.to_string(), &serde_json::value::RawValue::from_string(crate::report::fmt17(*v)).expect("valid number"))?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for UbCurve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, Option<f64>>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                k.parse::<u64>()
                    .map(|d| (d, v.unwrap_or(f64::NAN)))
                    .map_err(serde::de::Error::custom)
            })
            .collect::<Result<_, _>>()
            .map(UbCurve)
    }
}

/// Max degree implied by one reference lower-bound constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub name: String,
    #[serde(with = "crate::report::real17")]
    pub lower_bound: f64,
    /// `computed - reference`.
    #[serde(with = "crate::report::real17")]
    pub delta: f64,
    pub max_degree: Option<u64>,
}

/// Reference lower-bound constants. They disagree with
/// each other; both are reported and neither is preferred.
pub const REFERENCE_LOWER_BOUNDS: [(&str, f64); 2] = [("witness_assembly", 0.623482), ("degree_statement", 0.566325)];

/// Combined result of the degree-bound computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema: u32,
    #[serde(with = "crate::report::real17")]
    pub lower_bound: f64,
    pub witness_labels: (String, String),
    /// Energy mode behind `component_terms` and `lower_bound`.
    pub component_mode: EnergyMode,
    pub component_terms: LowerBoundAssembly,
    pub alpha: WitnessEnergies,
    pub beta: WitnessEnergies,
    /// Same assembly with exact circle energies, when computed.
    pub quadrature_terms: Option<LowerBoundAssembly>,
    pub epsilon_rule: String,
    pub ub_rule: EpsRule,
    pub max_degree: Option<u64>,
    /// Why `max_degree` is absent, if it is.
    pub max_degree_note: Option<String>,
    pub ub_curve: UbCurve,
    pub reference_checks: Vec<ReferenceCheck>,
}

impl BoundReport {
    /// Solves for the degree and fills in the curve and reference checks.
    pub fn build(
        alpha: WitnessEnergies,
        beta: WitnessEnergies,
        component_mode: EnergyMode,
        terms: LowerBoundAssembly,
        quadrature_terms: Option<LowerBoundAssembly>,
        rule: EpsRule,
    ) -> BoundReport {
        let lb = terms.lower_bound;
        let (max_degree, note) = match solve_max_degree(lb, rule) {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let centre = max_degree.unwrap_or(1);
        let mut degrees: Vec<u64> = (centre.saturating_sub(5).max(1)..=centre + 5).collect();
        let reference_checks: Vec<ReferenceCheck> = REFERENCE_LOWER_BOUNDS
            .iter()
            .map(|&(name, value)| {
                let md = solve_max_degree(value, rule).ok();
                if let Some(d) = md {
                    degrees.extend([d, d + 1]);
                }
                ReferenceCheck {
                    name: name.to_string(),
                    lower_bound: value,
                    delta: lb - value,
                    max_degree: md,
                }
            })
            .collect();
        let epsilon_rule = format!("witness eps = {:e}; upper bound {}", terms.epsilon, rule.describe());
        BoundReport {
            schema: 1,
            lower_bound: lb,
            witness_labels: (alpha.label.clone(), beta.label.clone()),
            component_mode,
            component_terms: terms,
            alpha,
            beta,
            quadrature_terms,
            epsilon_rule,
            ub_rule: rule,
            max_degree,
            max_degree_note: note,
            ub_curve: UbCurve(upper_bound_curve(degrees, rule)),
            reference_checks,
        }
    }
}
