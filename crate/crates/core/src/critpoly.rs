//! Exact periodicity polynomials `f_c^n(a) - b` in `Z[c]` for `f_c(z) = z^2 + c`.
//!
//! Coefficients grow to thousands of bits by depth 11, so everything here is
//! done over arbitrary-precision integers. The floating-point side of the
//! pipeline never sees these coefficients; it evaluates the orbit directly
//! (see [`crate::rootsolve::OrbitEvaluator`]).

use std::fmt::Write as _;
use std::io::BufRead;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CritPolyError {
    #[error("iteration depth must be at least 1 (got {0})")]
    InvalidDepth(u32),
    #[error("iteration depth {0} is beyond the supported range (max {MAX_DEPTH})")]
    DepthTooLarge(u32),
    #[error("cannot deflate the zero polynomial")]
    ZeroPolynomial,
    #[error("internal error: exact division by (c - {root}) left a nonzero remainder")]
    InexactDivision { root: BigInt },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Orbit depths beyond this would need more than ~10^5 coefficients.
pub const MAX_DEPTH: u32 = 16;

/// Univariate polynomial with arbitrary-precision integer coefficients.
///
/// `coeffs[k]` is the coefficient of `c^k`. The vector is kept trimmed, so the
/// leading coefficient is nonzero unless the polynomial is zero (empty vector).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct IntPoly {
    coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    pub fn from_i64s(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero() -> Self {
        IntPoly { coeffs: Vec::new() }
    }

    pub fn constant(value: BigInt) -> Self {
        Self::new(vec![value])
    }

    /// The monomial `c`.
    pub fn identity() -> Self {
        Self::new(vec![BigInt::zero(), BigInt::one()])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> BigInt {
        self.coeffs.get(k).cloned().unwrap_or_default()
    }

    pub fn leading(&self) -> Option<&BigInt> {
        self.coeffs.last()
    }

    /// Bit length of the largest coefficient.
    pub fn max_coeff_bits(&self) -> u64 {
        self.coeffs.iter().map(|c| c.bits()).max().unwrap_or(0)
    }

    /// Schoolbook product.
    pub fn mul(&self, other: &IntPoly) -> IntPoly {
        if self.is_zero() || other.is_zero() {
            return IntPoly::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, x) in self.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in other.coeffs.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        IntPoly::new(out)
    }

    /// Square using the symmetry of the product: each cross term is formed once.
    pub fn square(&self) -> IntPoly {
        let m = self.coeffs.len();
        if m == 0 {
            return IntPoly::zero();
        }
        let mut out = vec![BigInt::zero(); 2 * m - 1];
        for i in 0..m {
            let x = &self.coeffs[i];
            if x.is_zero() {
                continue;
            }
            for j in (i + 1)..m {
                out[i + j] += x * &self.coeffs[j];
            }
        }
        for c in out.iter_mut() {
            *c <<= 1;
        }
        for (i, x) in self.coeffs.iter().enumerate() {
            out[2 * i] += x * x;
        }
        IntPoly::new(out)
    }

    pub fn add(&self, other: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let out = (0..n).map(|k| self.coeff(k) + other.coeff(k)).collect();
        IntPoly::new(out)
    }

    pub fn add_constant(&self, value: &BigInt) -> IntPoly {
        let mut coeffs = self.coeffs.clone();
        if coeffs.is_empty() {
            coeffs.push(BigInt::zero());
        }
        coeffs[0] += value;
        IntPoly::new(coeffs)
    }

    /// Synthetic division by `(c - root)`, returning quotient and remainder.
    pub fn div_linear(&self, root: &BigInt) -> (IntPoly, BigInt) {
        if self.coeffs.len() <= 1 {
            return (IntPoly::zero(), self.coeff(0));
        }
        let d = self.degree();
        let mut quot = vec![BigInt::zero(); d];
        let mut carry = BigInt::zero();
        for k in (0..=d).rev() {
            let v = &self.coeffs[k] + &carry * root;
            if k == 0 {
                return (IntPoly::new(quot), v);
            }
            quot[k - 1] = v.clone();
            carry = v;
        }
        unreachable!()
    }

    pub fn eval_int(&self, x: &BigInt) -> BigInt {
        self.coeffs
            .iter()
            .rev()
            .fold(BigInt::zero(), |acc, c| acc * x + c)
    }

    /// Upper bound on the modulus of every complex root (Fujiwara-type bound,
    /// evaluated on coefficient bit lengths so it is always an overestimate).
    pub fn root_modulus_bound(&self) -> f64 {
        let d = self.degree();
        if d == 0 {
            return 0.0;
        }
        let lead_bits = self.coeffs[d].bits() as f64 - 1.0;
        let mut best = f64::NEG_INFINITY;
        for k in 0..d {
            let c = &self.coeffs[k];
            if c.is_zero() {
                continue;
            }
            let mut log2 = c.bits() as f64 - lead_bits;
            if k == 0 {
                log2 -= 1.0;
            }
            best = best.max(log2 / (d - k) as f64);
        }
        if best == f64::NEG_INFINITY {
            0.0
        } else {
            2.0 * best.exp2()
        }
    }

    /// Text format: a header line `degree <d>` (optionally followed by
    /// `key value` metadata pairs), then one decimal coefficient per line,
    /// lowest order first.
    pub fn to_text(&self, meta: &[(&str, String)]) -> String {
        let mut out = String::new();
        let _ = write!(out, "degree {}", self.degree());
        for (k, v) in meta {
            let _ = write!(out, " {k} {v}");
        }
        out.push('\n');
        if self.is_zero() {
            out.push_str("0\n");
        }
        for c in &self.coeffs {
            let _ = writeln!(out, "{c}");
        }
        out
    }

    /// Parses [`IntPoly::to_text`] output, returning the polynomial and the
    /// header metadata pairs.
    pub fn from_text<R: BufRead>(reader: R) -> Result<(IntPoly, Vec<(String, String)>), CritPolyError> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or(CritPolyError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let header = header?;
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some("degree") {
            return Err(CritPolyError::Parse {
                line: 1,
                msg: format!("expected `degree <d>` header, found {header:?}"),
            });
        }
        let degree: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(CritPolyError::Parse {
                line: 1,
                msg: "header degree is not a nonnegative integer".into(),
            })?;
        let rest: Vec<&str> = tokens.collect();
        if !rest.len().is_multiple_of(2) {
            return Err(CritPolyError::Parse {
                line: 1,
                msg: "header metadata must be key/value pairs".into(),
            });
        }
        let meta = rest
            .chunks(2)
            .map(|kv| (kv[0].to_string(), kv[1].to_string()))
            .collect();

        let mut coeffs = Vec::with_capacity(degree + 1);
        for (idx, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let c: BigInt = t.parse().map_err(|_| CritPolyError::Parse {
                line: idx + 1,
                msg: format!("not an integer: {t:?}"),
            })?;
            coeffs.push(c);
        }
        let poly = IntPoly::new(coeffs);
        if poly.degree() != degree {
            return Err(CritPolyError::Parse {
                line: 1,
                msg: format!("header says degree {degree} but {} coefficients follow", poly.coeffs.len()),
            });
        }
        Ok((poly, meta))
    }
}

/// Orbit equation `f_c^n(a) = b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct IterationSpec {
    pub a: i64,
    pub b: i64,
    pub n: u32,
}

impl IterationSpec {
    /// Periodicity equation `f_c^n(a) = a`.
    pub fn periodic(a: i64, n: u32) -> Self {
        IterationSpec { a, b: a, n }
    }

    pub fn validate(&self) -> Result<(), CritPolyError> {
        if self.n == 0 {
            return Err(CritPolyError::InvalidDepth(self.n));
        }
        if self.n > MAX_DEPTH {
            return Err(CritPolyError::DepthTooLarge(self.n));
        }
        Ok(())
    }

    /// Degree in `c` of `f_c^n(a) - b`.
    pub fn degree(&self) -> usize {
        1usize << (self.n - 1)
    }

    pub fn label(&self) -> String {
        if self.a == self.b {
            format!("a{}_n{}", self.a, self.n)
        } else {
            format!("a{}_b{}_n{}", self.a, self.b, self.n)
        }
    }
}

/// Builds `f_c^n(a) - b` by the recurrence `P_0 = a`, `P_{k+1} = P_k^2 + c`.
pub fn iterate_orbit_poly(spec: IterationSpec) -> Result<IntPoly, CritPolyError> {
    spec.validate()?;
    let c = IntPoly::identity();
    let mut p = IntPoly::constant(BigInt::from(spec.a));
    for _ in 0..spec.n {
        p = p.square().add(&c);
    }
    Ok(p.add_constant(&-BigInt::from(spec.b)))
}

/// Removes every integer root (with multiplicity) by exact division.
///
/// Candidates are the divisors of the constant term no larger in modulus than
/// [`IntPoly::root_modulus_bound`]; the constant term itself is never factored.
/// Returns the deflated polynomial and the removed roots in the order found.
pub fn deflate_integer_roots(p: &IntPoly) -> Result<(IntPoly, Vec<BigInt>), CritPolyError> {
    if p.is_zero() {
        return Err(CritPolyError::ZeroPolynomial);
    }
    let mut q = p.clone();
    let mut roots = Vec::new();

    let zero = BigInt::zero();
    while q.degree() > 0 && q.coeff(0).is_zero() {
        q = exact_div(&q, &zero)?;
        roots.push(zero.clone());
    }

    let bound = q.root_modulus_bound().floor().min(i64::MAX as f64) as i64;
    let mut r: i64 = 1;
    while r <= bound && q.degree() > 0 {
        for cand in [BigInt::from(r), BigInt::from(-r)] {
            while q.degree() > 0 && q.coeff(0).is_multiple_of(&cand) && q.eval_int(&cand).is_zero() {
                q = exact_div(&q, &cand)?;
                roots.push(cand.clone());
            }
        }
        r += 1;
    }
    Ok((q, roots))
}

fn exact_div(p: &IntPoly, root: &BigInt) -> Result<IntPoly, CritPolyError> {
    let (quot, rem) = p.div_linear(root);
    if !rem.is_zero() {
        return Err(CritPolyError::InexactDivision { root: root.clone() });
    }
    Ok(quot)
}

/// Horner evaluation over the rationals.
pub fn eval_exact(p: &IntPoly, x: &BigRational) -> BigRational {
    p.coeffs()
        .iter()
        .rev()
        .fold(BigRational::zero(), |acc, c| acc * x + BigRational::from_integer(c.clone()))
}

/// Natural log of `|x|` for an arbitrary-size integer, accurate to double precision.
pub fn ln_abs(x: &BigInt) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top = (x.abs() >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `sign(x) * |x|` converted to f64 (saturating to infinity).
pub fn to_f64_saturating(x: &BigInt) -> f64 {
    match x.to_f64() {
        Some(v) => v,
        None => match x.sign() {
            Sign::Minus => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        },
    }
}
