//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;

use mutual_energy::energy::{DiscreteMeasure, RegularizedMeasure};

// ------------------------------------------------------------ polynomials

/// Coefficients lowest order first, highest nonzero last.
pub type Coeffs = Vec<BigInt>;

fn trim(mut p: Coeffs) -> Coeffs {
    while p.len() > 1 && p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    p
}

fn mul(p: &Coeffs, q: &Coeffs) -> Coeffs {
    let mut out = vec![BigInt::zero(); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    trim(out)
}

/// Synthetic division by `(c - r)`; `None` when the remainder is nonzero.
fn divide_root(p: &Coeffs, r: i64) -> Option<Coeffs> {
    let r = BigInt::from(r);
    let mut out = vec![BigInt::zero(); p.len() - 1];
    let mut carry = BigInt::zero();
    for k in (0..p.len()).rev() {
        let v = &p[k] + &carry * &r;
        if k == 0 {
            return v.is_zero().then_some(out);
        }
        out[k - 1] = v.clone();
        carry = v;
    }
    unreachable!()
}

/// `f_c^n(a) - a` expanded by plain multiplication, then divided by every
/// `(c - r)` with `|r| <= 16` that divides it exactly.
pub fn oracle_poly(a: i64, n: u32) -> (Coeffs, Vec<i64>) {
    let mut p: Coeffs = vec![BigInt::from(a)];
    for _ in 0..n {
        let mut sq = mul(&p, &p);
        if sq.len() < 2 {
            sq.resize(2, BigInt::zero());
        }
        sq[1] += 1;
        p = trim(sq);
    }
    p[0] -= a;
    let mut p = trim(p);
    let mut removed = Vec::new();
    for r in (0..=16).flat_map(|k: i64| if k == 0 { vec![0] } else { vec![k, -k] }) {
        while p.len() > 1 {
            match divide_root(&p, r) {
                Some(q) => {
                    p = q;
                    removed.push(r);
                }
                None => break,
            }
        }
    }
    (p, removed)
}

pub fn derivative(p: &Coeffs) -> Coeffs {
    if p.len() == 1 {
        return vec![BigInt::zero()];
    }
    trim(p.iter().enumerate().skip(1).map(|(k, c)| c * BigInt::from(k)).collect())
}

/// Bareiss fraction-free determinant.
pub fn determinant(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(swap) = (k + 1..n).find(|&i| !m[i][k].is_zero()) else {
                return BigInt::zero();
            };
            m.swap(k, swap);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                let (q, r) = v.div_rem(&prev);
                assert!(r.is_zero(), "Bareiss division is exact");
                m[i][j] = q;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

/// Resultant via the Sylvester matrix.
pub fn resultant(p: &Coeffs, q: &Coeffs) -> BigInt {
    let (dp, dq) = (p.len() - 1, q.len() - 1);
    let size = dp + dq;
    let mut m = vec![vec![BigInt::zero(); size]; size];
    for row in 0..dq {
        for (k, c) in p.iter().rev().enumerate() {
            m[row][row + k] = c.clone();
        }
    }
    for row in 0..dp {
        for (k, c) in q.iter().rev().enumerate() {
            m[dq + row][row + k] = c.clone();
        }
    }
    determinant(m)
}

/// `prod_{i != j} |r_i - r_j|` for monic `p`, as `|disc(p)|`.
pub fn abs_discriminant(p: &Coeffs) -> BigInt {
    assert!(p.last().unwrap().is_one(), "monic input");
    resultant(p, &derivative(p)).abs()
}

pub fn ln_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        return x.to_f64().unwrap().abs().ln();
    }
    let shift = bits - 60;
    let top: BigInt = x.abs() >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// `([F],[F]) = -log|disc(F)| / d²` for the roots of monic `F`.
pub fn oracle_discrete_self(p: &Coeffs) -> f64 {
    let d = (p.len() - 1) as f64;
    -ln_big(&abs_discriminant(p)) / (d * d)
}

/// `([F],[G]) = -log|Res(F, G)| / (deg F · deg G)` for monic `F`, `G`.
pub fn oracle_discrete_cross(p: &Coeffs, q: &Coeffs) -> f64 {
    let (dp, dq) = ((p.len() - 1) as f64, (q.len() - 1) as f64);
    -ln_big(&resultant(p, q).abs()) / (dp * dq)
}

// ------------------------------------------------------------------ roots

fn horner(p: &[Complex64], z: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Weierstrass iteration on the expanded monic coefficients, then Newton.
pub fn oracle_roots(p: &Coeffs) -> Vec<Complex64> {
    let c: Vec<Complex64> = p.iter().map(|x| Complex64::new(x.to_f64().unwrap(), 0.0)).collect();
    let d = c.len() - 1;
    let dc: Vec<Complex64> = (1..=d).map(|k| c[k] * k as f64).collect();
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..d).map(|k| seed.powu(k as u32 + 1) * 1.5).collect();
    for _ in 0..5000 {
        let mut moved = 0.0f64;
        for i in 0..d {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..d {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let w = horner(&c, z[i]) / den;
            z[i] -= w;
            moved = moved.max(w.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let step = horner(&c, *zi) / horner(&dc, *zi);
            if step.is_finite() {
                *zi -= step;
            }
        }
    }
    z
}

/// Largest distance from a point of `a` to its nearest point of `b`.
pub fn hausdorff_half(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

// ------------------------------------------------------------- generators

/// Up to `max_points` points in `[-2, 2]²`, some placed within `3ε` of an
/// earlier point so that near pairs occur.
pub fn arb_points(max_points: usize, eps: f64) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, 0u8..4, 0.0f64..3.0, 0.0f64..std::f64::consts::TAU), 1..=max_points)
        .prop_map(move |raw| {
            let mut pts: Vec<Complex64> = Vec::with_capacity(raw.len());
            for (x, y, kind, r, t) in raw {
                let p = if kind == 0 && !pts.is_empty() {
                    pts[pts.len() - 1] + Complex64::from_polar((r * eps).max(1e-3 * eps), t)
                } else {
                    Complex64::new(x, y)
                };
                if pts.iter().all(|q| *q != p) {
                    pts.push(p);
                }
            }
            pts
        })
}

/// Positive weights summing to one, sized to `n`.
pub fn weights_for(raw: &[f64], n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|i| raw[i % raw.len()]).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - head;
    w
}

pub fn arb_eps() -> impl Strategy<Value = f64> {
    (-6.0f64..-2.0).prop_map(|e| 10f64.powf(e))
}

/// A regularized measure with random weights on up to `max_points` points.
pub fn arb_measure_at(eps: f64, max_points: usize) -> impl Strategy<Value = RegularizedMeasure> {
    (arb_points(max_points, eps), prop::collection::vec(0.1f64..1.0, 1..=max_points)).prop_filter_map(
        "weights",
        move |(pts, raw)| {
            let w = weights_for(&raw, pts.len());
            if w.iter().any(|x| *x <= 0.0) {
                return None;
            }
            let base = DiscreteMeasure::new(pts, w).ok()?;
            RegularizedMeasure::new(base, eps).ok()
        },
    )
}

pub fn arb_triple() -> impl Strategy<Value = (f64, RegularizedMeasure, RegularizedMeasure, RegularizedMeasure)> {
    arb_eps().prop_flat_map(|eps| {
        (Just(eps), arb_measure_at(eps, 10), arb_measure_at(eps, 10), arb_measure_at(eps, 10))
    })
}

/// A uniform point set and radius, for the self-energy inequality.
pub fn arb_uniform_set() -> impl Strategy<Value = (f64, Vec<Complex64>)> {
    arb_eps().prop_flat_map(|eps| (Just(eps), arb_points(10, eps)))
}

/// `(a, (a + c)/2, c)`: the triangle inequality holds with equality.
pub fn arb_mixture_triple() -> impl Strategy<Value = (f64, RegularizedMeasure, RegularizedMeasure, RegularizedMeasure)> {
    arb_eps()
        .prop_flat_map(|eps| (Just(eps), arb_measure_at(eps, 5), arb_measure_at(eps, 5)))
        .prop_filter_map("shared support", |(eps, a, c)| {
            if a.centers().iter().any(|z| c.centers().contains(z)) {
                return None;
            }
            let pts: Vec<Complex64> = a.centers().iter().chain(c.centers()).copied().collect();
            let w: Vec<f64> = a.weights().iter().chain(c.weights()).map(|x| 0.5 * x).collect();
            let mid = RegularizedMeasure::new(DiscreteMeasure::new(pts, w).ok()?, eps).ok()?;
            Some((eps, a, mid, c))
        })
}

/// `a` and two successive perturbations of its points by up to `3ε`.
pub fn arb_close_triple() -> impl Strategy<Value = (f64, RegularizedMeasure, RegularizedMeasure, RegularizedMeasure)> {
    arb_eps()
        .prop_flat_map(|eps| {
            (
                Just(eps),
                arb_measure_at(eps, 10),
                prop::collection::vec((0.0f64..3.0, 0.0f64..std::f64::consts::TAU), 10),
                prop::collection::vec((0.0f64..3.0, 0.0f64..std::f64::consts::TAU), 10),
            )
        })
        .prop_filter_map("coincident points", |(eps, a, s1, s2)| {
            let shift = |m: &RegularizedMeasure, s: &[(f64, f64)]| -> Option<RegularizedMeasure> {
                let pts: Vec<Complex64> =
                    m.centers().iter().zip(s).map(|(z, (r, t))| z + Complex64::from_polar(r * eps, *t)).collect();
                for i in 0..pts.len() {
                    if pts[..i].contains(&pts[i]) {
                        return None;
                    }
                }
                RegularizedMeasure::new(DiscreteMeasure::new(pts, m.weights().to_vec()).ok()?, eps).ok()
            };
            let b = shift(&a, &s1)?;
            let c = shift(&b, &s2)?;
            Some((eps, a, b, c))
        })
}

/// Random, mixture and perturbation triples in equal proportion.
pub fn arb_metric_triple() -> impl Strategy<Value = (f64, RegularizedMeasure, RegularizedMeasure, RegularizedMeasure)> {
    prop_oneof![arb_triple(), arb_mixture_triple(), arb_close_triple()]
}
