//! Logarithmic mutual energies of discrete and circle-regularized measures.
//!
//! The pairing of two probability measures is the double integral of
//! `-log|x - y|`. A point mass `δ_z` is regularized to the normalized arc
//! length measure `δ_{z,ε}` on the circle `|x - z| = ε`. For two such circles
//! at centre distance `t`:
//!
//! * same centre: `(δ_{z,ε}, δ_{z,ε}) = -log ε`;
//! * `t > 2ε` (disjoint discs): the pairing equals `-log t` exactly;
//! * `t <= 2ε` (near pair): `-(δ_{z,ε}, δ_{z',ε}) = ∫_0^1 max(log|w - ε e^{2πis}|, log ε) ds`
//!   with `|w| = t`, evaluated by quadrature in [`EnergyMode::ExactQuadrature`]
//!   and replaced by the one-sided estimates used for the witness bounds in
//!   [`EnergyMode::PaperBound`].
//!
//! All energies are in nats. Pair loops run in parallel by rows; row totals
//! are combined with [`pairwise_sum`] so results are thread-count independent.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad;
use crate::sum::{pairwise_sum, CompensatedSum};

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("regularization radius must be positive (got {0})")]
    InvalidEpsilon(f64),
    #[error("regularization radii differ: {0} vs {1}")]
    EpsilonMismatch(f64, f64),
    #[error("weights must be positive and sum to 1 (sum {sum}, {count} points)")]
    InvalidWeights { sum: f64, count: usize },
    #[error("negative radicand {0:.3e} in mutual energy distance")]
    NegativeRadicand(f64),
}

/// Radicands in `(-RADICAND_SLACK, 0)` are treated as rounding noise.
pub const RADICAND_SLACK: f64 = 1e-12;

const WEIGHT_SUM_TOL: f64 = 1e-15;
const QUAD_TOL: f64 = 1e-14;

/// How near pairs of regularized point masses are valued.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyMode {
    /// True circle-circle energies by quadrature.
    ExactQuadrature,
    /// One-sided near-pair estimates: `-log(4ε)` for self
    /// energies (a lower estimate) and `-log ε` for cross energies (an upper
    /// estimate), so the assembled distance is a lower bound.
    PaperBound,
}

/// Weighted point masses.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Complex64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Complex64>, weights: Vec<f64>) -> Result<Self, EnergyError> {
        let sum = weights.iter().copied().collect::<CompensatedSum>().value();
        if points.len() != weights.len()
            || points.is_empty()
            || weights.iter().any(|&w| !(w > 0.0))
            || (sum - 1.0).abs() > WEIGHT_SUM_TOL
        {
            return Err(EnergyError::InvalidWeights { sum, count: points.len() });
        }
        Ok(DiscreteMeasure { points, weights })
    }

    /// `[α]`: mass `1/d` on each of `d` points.
    pub fn uniform(points: Vec<Complex64>) -> Self {
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        DiscreteMeasure { points, weights }
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn regularize(&self, epsilon: f64) -> Result<RegularizedMeasure, EnergyError> {
        RegularizedMeasure::new(self.clone(), epsilon)
    }
}

/// Each point mass smeared uniformly over a circle of radius `epsilon`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedMeasure {
    base: DiscreteMeasure,
    epsilon: f64,
}

impl RegularizedMeasure {
    pub fn new(base: DiscreteMeasure, epsilon: f64) -> Result<Self, EnergyError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(EnergyError::InvalidEpsilon(epsilon));
        }
        Ok(RegularizedMeasure { base, epsilon })
    }

    pub fn uniform(centers: Vec<Complex64>, epsilon: f64) -> Result<Self, EnergyError> {
        Self::new(DiscreteMeasure::uniform(centers), epsilon)
    }

    pub fn centers(&self) -> &[Complex64] {
        self.base.points()
    }

    pub fn weights(&self) -> &[f64] {
        self.base.weights()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn base(&self) -> &DiscreteMeasure {
        &self.base
    }
}

/// Itemized regularized energy.
///
/// `total = self_terms + disjoint_pair_terms + near_pair_terms`. For self
/// energies pairs are unordered (each contributes twice its weight product);
/// for cross energies every `(i, j)` is a pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    #[serde(with = "crate::report::real17")]
    pub total: f64,
    #[serde(with = "crate::report::real17")]
    pub self_terms: f64,
    #[serde(with = "crate::report::real17")]
    pub disjoint_pair_terms: f64,
    #[serde(with = "crate::report::real17")]
    pub near_pair_terms: f64,
    pub near_pair_count: u64,
    pub mode: EnergyMode,
    /// Near-pair total if every near pair took the kernel's lowest
    /// (`-log 4ε`) or highest (`-log ε`) possible value.
    #[serde(with = "crate::report::real17_pair")]
    pub near_pair_bracket: (f64, f64),
}

/// Unregularized pairing with coincident points excluded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscreteEnergy {
    pub value: f64,
    pub excluded_pairs: u64,
    /// Every pair was excluded; `value` is 0 and carries no information.
    pub all_excluded: bool,
}

/// `h(r) = (1/2π) ∫ max(log|r - e^{iθ}|, 0) dθ`, the unit-radius part of the
/// circle-circle kernel at centre distance `r` (in units of the radius).
fn clamped_circle_mean(r: f64) -> f64 {
    if r >= 2.0 {
        return r.ln();
    }
    // |r - e^{iθ}| < 1 exactly on |θ| < acos(r/2); elsewhere the log is
    // smooth, so integrate [acos(r/2), π] and use the θ -> -θ symmetry.
    let start = (0.5 * r).acos();
    let (v, _) = quad::integrate(
        |t| 0.5 * (r * r + 1.0 - 2.0 * r * t.cos()).ln(),
        start,
        std::f64::consts::PI,
        QUAD_TOL,
    );
    v / std::f64::consts::PI
}

/// Exact pairing `(δ_{z,ε}, δ_{z',ε})` of two radius-`eps` circles whose
/// centres are `dist` apart.
pub fn circle_pair_energy(dist: f64, eps: f64) -> f64 {
    if dist > 2.0 * eps {
        return -dist.ln();
    }
    -eps.ln() - clamped_circle_mean(dist / eps)
}

#[derive(Clone, Copy, Default)]
struct RowAcc {
    disjoint: CompensatedSum,
    near: CompensatedSum,
    near_lo: CompensatedSum,
    near_hi: CompensatedSum,
    near_count: u64,
}

struct Totals {
    disjoint: f64,
    near: f64,
    near_lo: f64,
    near_hi: f64,
    near_count: u64,
}

fn reduce_rows(rows: &[RowAcc]) -> Totals {
    let col = |f: fn(&RowAcc) -> f64| pairwise_sum(&rows.iter().map(f).collect::<Vec<_>>());
    Totals {
        disjoint: col(|r| r.disjoint.value()),
        near: col(|r| r.near.value()),
        near_lo: col(|r| r.near_lo.value()),
        near_hi: col(|r| r.near_hi.value()),
        near_count: rows.iter().map(|r| r.near_count).sum(),
    }
}

/// `Σ_{x_i ≠ y_j} w_i v_j (-log|x_i - y_j|)`.
pub fn discrete_energy(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> DiscreteEnergy {
    let rows: Vec<(f64, u64)> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let x = mu.points[i];
            let mut acc = CompensatedSum::new();
            let mut excluded = 0;
            for (y, v) in nu.points.iter().zip(&nu.weights) {
                if x == *y {
                    excluded += 1;
                } else {
                    acc.add(v * -(x - y).norm().ln());
                }
            }
            (mu.weights[i] * acc.value(), excluded)
        })
        .collect();
    let value = pairwise_sum(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let excluded_pairs: u64 = rows.iter().map(|r| r.1).sum();
    let all_excluded = excluded_pairs == (mu.len() * nu.len()) as u64;
    DiscreteEnergy {
        value: if all_excluded { 0.0 } else { value },
        excluded_pairs,
        all_excluded,
    }
}

/// `([F]_ε, [F]_ε)` itemized into self, disjoint-pair and near-pair terms.
pub fn regularized_self_energy(mu: &RegularizedMeasure, mode: EnergyMode) -> EnergyBreakdown {
    let eps = mu.epsilon;
    let near_cut = 2.0 * eps;
    let log_eps = -eps.ln();
    let log_4eps = -(4.0 * eps).ln();
    let pts = mu.centers();
    let ws = mu.weights();

    let rows: Vec<RowAcc> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut row = RowAcc::default();
            for j in (i + 1)..pts.len() {
                let t = (pts[i] - pts[j]).norm();
                let w2 = 2.0 * ws[i] * ws[j];
                if t > near_cut {
                    row.disjoint.add(w2 * -t.ln());
                } else {
                    let k = match mode {
                        EnergyMode::ExactQuadrature => circle_pair_energy(t, eps),
                        EnergyMode::PaperBound => log_4eps,
                    };
                    row.near.add(w2 * k);
                    row.near_lo.add(w2 * log_4eps);
                    row.near_hi.add(w2 * log_eps);
                    row.near_count += 1;
                }
            }
            row
        })
        .collect();
    let t = reduce_rows(&rows);
    let self_terms = pairwise_sum(&ws.iter().map(|w| w * w * log_eps).collect::<Vec<_>>());
    EnergyBreakdown {
        total: self_terms + t.disjoint + t.near,
        self_terms,
        disjoint_pair_terms: t.disjoint,
        near_pair_terms: t.near,
        near_pair_count: t.near_count,
        mode,
        near_pair_bracket: (t.near_lo, t.near_hi),
    }
}

/// `([α]_ε, [β]_ε)`; callers form `-2×` this for the distance.
pub fn regularized_cross_energy(
    mu: &RegularizedMeasure,
    nu: &RegularizedMeasure,
    mode: EnergyMode,
) -> Result<EnergyBreakdown, EnergyError> {
    if mu.epsilon != nu.epsilon {
        return Err(EnergyError::EpsilonMismatch(mu.epsilon, nu.epsilon));
    }
    let eps = mu.epsilon;
    let near_cut = 2.0 * eps;
    let log_eps = -eps.ln();
    let log_4eps = -(4.0 * eps).ln();

    let rows: Vec<RowAcc> = (0..mu.centers().len())
        .into_par_iter()
        .map(|i| {
            let x = mu.centers()[i];
            let wi = mu.weights()[i];
            let mut row = RowAcc::default();
            for (y, v) in nu.centers().iter().zip(nu.weights()) {
                let t = (x - y).norm();
                let w = wi * v;
                if t > near_cut {
                    row.disjoint.add(w * -t.ln());
                } else {
                    let k = match mode {
                        EnergyMode::ExactQuadrature => circle_pair_energy(t, eps),
                        EnergyMode::PaperBound => log_eps,
                    };
                    row.near.add(w * k);
                    row.near_lo.add(w * log_4eps);
                    row.near_hi.add(w * log_eps);
                    row.near_count += 1;
                }
            }
            row
        })
        .collect();
    let t = reduce_rows(&rows);
    Ok(EnergyBreakdown {
        total: t.disjoint + t.near,
        self_terms: 0.0,
        disjoint_pair_terms: t.disjoint,
        near_pair_terms: t.near,
        near_pair_count: t.near_count,
        mode,
        near_pair_bracket: (t.near_lo, t.near_hi),
    })
}

/// `sqrt(self_mu - 2 cross + self_nu)`, with rounding-level negatives clamped.
pub fn distance_from_energies(self_mu: f64, cross: f64, self_nu: f64) -> Result<f64, EnergyError> {
    let radicand = self_mu - 2.0 * cross + self_nu;
    if radicand < -RADICAND_SLACK || radicand.is_nan() {
        return Err(EnergyError::NegativeRadicand(radicand));
    }
    Ok(radicand.max(0.0).sqrt())
}

/// Mutual energy distance `d_∞(μ, ν) = (μ - ν, μ - ν)^{1/2}` of two
/// regularized measures with the same radius.
pub fn mutual_energy_distance(
    mu: &RegularizedMeasure,
    nu: &RegularizedMeasure,
    mode: EnergyMode,
) -> Result<f64, EnergyError> {
    let cross = regularized_cross_energy(mu, nu, mode)?;
    let (s_mu, s_nu) = match mode {
        // Same summation order as the cross term, so d(μ, μ) is exactly 0.
        EnergyMode::ExactQuadrature => (
            regularized_cross_energy(mu, mu, mode)?.total,
            regularized_cross_energy(nu, nu, mode)?.total,
        ),
        EnergyMode::PaperBound => (regularized_self_energy(mu, mode).total, regularized_self_energy(nu, mode).total),
    };
    distance_from_energies(s_mu, cross.total, s_nu)
}

/// Modulus-of-continuity bound `g(z) <= dist(z, K)^{1/2}` for the Green's
/// function of a capacity-one compact set with connected complement.
pub fn green_modulus_bound(dist: f64) -> f64 {
    debug_assert!(dist >= 0.0, "distance must be nonnegative");
    dist.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Brute-force double integral over both circles (midpoint rule with many
    /// nodes); independent of the max-formula reduction.
    fn brute_circle_pair(t: f64, eps: f64, m: usize) -> f64 {
        let mut acc = 0.0;
        for a in 0..m {
            let x = c(0.0, 0.0) + Complex64::from_polar(eps, std::f64::consts::TAU * (a as f64 + 0.5) / m as f64);
            for b in 0..m {
                let y = c(t, 0.0) + Complex64::from_polar(eps, std::f64::consts::TAU * (b as f64 + 0.37) / m as f64);
                acc += -(x - y).norm().ln();
            }
        }
        acc / (m * m) as f64
    }

    #[test]
    fn kernel_matches_brute_force() {
        let eps = 0.01;
        for &t in &[0.0, 0.002, 0.007, 0.01, 0.0155, 0.019, 0.02, 0.05] {
            let k = circle_pair_energy(t, eps);
            let brute = brute_circle_pair(t, eps, 1500);
            assert!((k - brute).abs() < 2e-3, "t={t}: {k} vs {brute}");
        }
    }

    #[test]
    fn kernel_is_continuous_at_the_near_threshold() {
        let eps = 1e-3;
        let below = circle_pair_energy(2.0 * eps * (1.0 - 1e-12), eps);
        let above = circle_pair_energy(2.0 * eps * (1.0 + 1e-12), eps);
        assert!((below - above).abs() < 1e-9);
        assert!((circle_pair_energy(0.0, eps) + eps.ln()).abs() < 1e-14);
    }

    #[test]
    fn kernel_between_one_sided_estimates() {
        let eps = 1e-4;
        for k in 0..=200 {
            let t = 2.0 * eps * k as f64 / 200.0;
            let e = circle_pair_energy(t, eps);
            // -(pairing) >= max(log t, log eps)  and pairing >= -log(4 eps)
            assert!(-e >= t.ln().max(eps.ln()) - 1e-13, "t={t}");
            assert!(e >= -(4.0 * eps).ln());
            assert!(e <= -eps.ln() + 1e-13);
        }
    }

    #[test]
    fn unit_separation_has_zero_energy() {
        let mu = DiscreteMeasure::uniform(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let e = discrete_energy(&mu, &mu);
        assert_eq!(e.value, 0.0);
        assert_eq!(e.excluded_pairs, 2);
        assert!(!e.all_excluded);
    }

    #[test]
    fn all_shared_points_flagged() {
        let mu = DiscreteMeasure::uniform(vec![c(0.5, 0.5)]);
        let e = discrete_energy(&mu, &mu);
        assert!(e.all_excluded);
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn single_point_self_energy() {
        for &eps in &[1e-6, 0.1, 3.0] {
            let mu = RegularizedMeasure::uniform(vec![c(0.2, -1.0)], eps).unwrap();
            for mode in [EnergyMode::ExactQuadrature, EnergyMode::PaperBound] {
                let b = regularized_self_energy(&mu, mode);
                assert_eq!(b.total, -eps.ln());
                assert_eq!(b.near_pair_count, 0);
            }
        }
    }

    #[test]
    fn far_cross_pair_is_log_distance() {
        let mu = RegularizedMeasure::uniform(vec![c(0.0, 0.0)], 1.0).unwrap();
        let nu = RegularizedMeasure::uniform(vec![c(10.0, 0.0)], 1.0).unwrap();
        for mode in [EnergyMode::ExactQuadrature, EnergyMode::PaperBound] {
            let b = regularized_cross_energy(&mu, &nu, mode).unwrap();
            assert!((b.total + 10f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn near_cross_pair_directions() {
        let eps = 1e-3;
        let mu = RegularizedMeasure::uniform(vec![c(0.0, 0.0)], eps).unwrap();
        let nu = RegularizedMeasure::uniform(vec![c(eps, 0.0)], eps).unwrap();
        let bound = regularized_cross_energy(&mu, &nu, EnergyMode::PaperBound).unwrap();
        let exact = regularized_cross_energy(&mu, &nu, EnergyMode::ExactQuadrature).unwrap();
        // ∫ log|x - y| is log ε in bound mode and strictly larger exactly.
        assert_eq!(-bound.total, eps.ln());
        assert!(-exact.total > eps.ln() + 1e-3);
        assert_eq!(bound.near_pair_count, 1);
    }

    #[test]
    fn mismatched_radii_rejected() {
        let mu = RegularizedMeasure::uniform(vec![c(0.0, 0.0)], 1e-3).unwrap();
        let nu = RegularizedMeasure::uniform(vec![c(1.0, 0.0)], 2e-3).unwrap();
        assert_eq!(
            regularized_cross_energy(&mu, &nu, EnergyMode::PaperBound),
            Err(EnergyError::EpsilonMismatch(1e-3, 2e-3))
        );
    }

    #[test]
    fn invalid_inputs() {
        assert_eq!(
            RegularizedMeasure::uniform(vec![c(0.0, 0.0)], 0.0),
            Err(EnergyError::InvalidEpsilon(0.0))
        );
        assert!(DiscreteMeasure::new(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(vec![c(0.0, 0.0)], vec![1.0]).is_ok());
        assert!(matches!(
            distance_from_energies(0.0, 1.0, 0.0),
            Err(EnergyError::NegativeRadicand(_))
        ));
        assert_eq!(distance_from_energies(1.0, 1.0 + 1e-13, 1.0), Ok(0.0));
    }

    #[test]
    fn identical_measures_have_zero_distance() {
        let pts = vec![c(0.1, 0.2), c(-0.3, 0.05), c(0.4, -0.4), c(0.4, -0.3999)];
        let mu = RegularizedMeasure::uniform(pts.clone(), 1e-4).unwrap();
        assert_eq!(mutual_energy_distance(&mu, &mu, EnergyMode::ExactQuadrature).unwrap(), 0.0);
        // The bound mode prices self near pairs lower than cross near pairs,
        // so it is only a metric when no pair is near.
        assert!(matches!(
            mutual_energy_distance(&mu, &mu, EnergyMode::PaperBound),
            Err(EnergyError::NegativeRadicand(_))
        ));
        let far = RegularizedMeasure::uniform(pts[..3].to_vec(), 1e-4).unwrap();
        assert_eq!(mutual_energy_distance(&far, &far, EnergyMode::PaperBound).unwrap(), 0.0);
    }

    #[test]
    fn breakdown_sums_to_total() {
        let pts: Vec<_> = (0..40).map(|k| Complex64::from_polar(1.0, k as f64 * 0.05)).collect();
        let mu = RegularizedMeasure::uniform(pts, 0.03).unwrap();
        for mode in [EnergyMode::ExactQuadrature, EnergyMode::PaperBound] {
            let b = regularized_self_energy(&mu, mode);
            assert!(b.near_pair_count > 0);
            assert!((b.total - (b.self_terms + b.disjoint_pair_terms + b.near_pair_terms)).abs() < 1e-12);
            assert!(b.near_pair_bracket.0 <= b.near_pair_terms + 1e-12);
            assert!(b.near_pair_terms <= b.near_pair_bracket.1 + 1e-12);
        }
    }

    #[test]
    fn green_bound_values() {
        assert_eq!(green_modulus_bound(0.0), 0.0);
        assert_eq!(green_modulus_bound(1.0), 1.0);
        let eps = 1.0 / (1023.0f64 * 1023.0);
        assert!((green_modulus_bound(eps) - 1.0 / 1023.0).abs() < 1e-18);
    }
}
