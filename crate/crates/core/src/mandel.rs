//! Orbit membership checks for the generalized Mandelbrot sets
//! `M_a = {c : orbit of a under z^2 + c stays bounded}`.

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MandelError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Outcome of iterating `a` under `z^2 + c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum OrbitCheck {
    /// No iterate exceeded the escape radius within the budget.
    Bounded { iterations: u32 },
    /// `|f^k(a)|` exceeded `max(|c|, 2)` at step `k`, proving `c ∉ M_a`.
    Escaped { step: u32 },
}

impl OrbitCheck {
    pub fn is_bounded(&self) -> bool {
        matches!(self, OrbitCheck::Bounded { .. })
    }
}

/// Once `|z| > max(|c|, 2)` the orbit grows monotonically to infinity.
pub fn escape_radius(c: Complex64) -> f64 {
    c.norm().max(2.0)
}

pub fn membership(c: Complex64, a: Complex64, max_iter: u32) -> OrbitCheck {
    let r = escape_radius(c);
    let mut z = a;
    for k in 0..=max_iter {
        if z.norm() > r {
            return OrbitCheck::Escaped { step: k };
        }
        if k < max_iter {
            z = z * z + c;
        }
    }
    OrbitCheck::Bounded { iterations: max_iter }
}

/// Membership tallies over a point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipSummary {
    pub total: usize,
    pub bounded: usize,
    pub escaped: usize,
    pub max_iter: u32,
    /// Earliest escape step seen, if any point escaped.
    pub first_escape_step: Option<u32>,
    /// Points with `|c| > 2`.
    pub outside_disc: usize,
}

pub fn summarize_membership(points: &[Complex64], a: Complex64, max_iter: u32) -> MembershipSummary {
    use rayon::prelude::*;
    let checks: Vec<OrbitCheck> = points.par_iter().map(|&c| membership(c, a, max_iter)).collect();
    let escaped_steps: Vec<u32> = checks
        .iter()
        .filter_map(|c| match c {
            OrbitCheck::Escaped { step } => Some(*step),
            OrbitCheck::Bounded { .. } => None,
        })
        .collect();
    MembershipSummary {
        total: points.len(),
        bounded: points.len() - escaped_steps.len(),
        escaped: escaped_steps.len(),
        max_iter,
        first_escape_step: escaped_steps.iter().copied().min(),
        outside_disc: points.iter().filter(|c| c.norm() > 2.0).count(),
    }
}

/// Writes `re,im` rows with 17 significant digits.
pub fn emit_point_cloud(points: &[Complex64], path: &Path) -> Result<(), MandelError> {
    let io = |source| MandelError::Io { path: path.to_path_buf(), source };
    let f = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(f);
    writeln!(w, "re,im").map_err(io)?;
    for z in points {
        writeln!(w, "{:.16e},{:.16e}", z.re, z.im).map_err(io)?;
    }
    w.flush().map_err(io)
}
