//! Trigonometric polynomials on the torus `R²/Z²` and their Poisson algebra.
//!
//! A [`TrigPoly`] is a finite sum `Σ c_{m,n} e^{2πi(mx+ny)}` stored sparsely.
//! The Poisson bracket is the one induced by the symplectic form `N dx∧dy`:
//!
//! ```text
//! {f, g} = (1/N) (∂f/∂x ∂g/∂y − ∂f/∂y ∂g/∂x)
//! ```
//!
//! which on monomials reads `{e_{m,n}, e_{p,q}} = −(4π²/N)(mq − np) e_{m+p,n+q}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer frequency pair `(m, n)` of the monomial `e^{2πi(mx+ny)}`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FourierMode {
    pub m: i64,
    pub n: i64,
}

impl FourierMode {
    pub const CONSTANT: FourierMode = FourierMode { m: 0, n: 0 };

    pub const fn new(m: i64, n: i64) -> Self {
        FourierMode { m, n }
    }

    pub fn degree(self) -> u64 {
        self.m.unsigned_abs().max(self.n.unsigned_abs())
    }
}

impl Neg for FourierMode {
    type Output = FourierMode;
    fn neg(self) -> FourierMode {
        FourierMode::new(-self.m, -self.n)
    }
}

impl Add for FourierMode {
    type Output = FourierMode;
    fn add(self, rhs: FourierMode) -> FourierMode {
        FourierMode::new(self.m + rhs.m, self.n + rhs.n)
    }
}

impl fmt::Display for FourierMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e({},{})", self.m, self.n)
    }
}

/// The Chern class `N` of the prequantum line bundle; always nonzero.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct ChernLevel(i64);

impl ChernLevel {
    pub fn new(n: i64) -> Result<Self> {
        if n == 0 {
            Err(Error::ZeroLevel)
        } else {
            Ok(ChernLevel(n))
        }
    }

    pub fn get(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Number of Zak components, `|N|`.
    pub fn components(self) -> usize {
        self.0.unsigned_abs() as usize
    }
}

impl TryFrom<i64> for ChernLevel {
    type Error = Error;
    fn try_from(n: i64) -> Result<Self> {
        ChernLevel::new(n)
    }
}

impl From<ChernLevel> for i64 {
    fn from(level: ChernLevel) -> i64 {
        level.0
    }
}

impl fmt::Display for ChernLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Sparse trigonometric polynomial. Zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrigPoly {
    coeffs: BTreeMap<FourierMode, Complex64>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        TrigPoly::default()
    }

    pub fn constant(c: impl Into<Complex64>) -> Self {
        TrigPoly::from_terms([(FourierMode::CONSTANT, c.into())])
    }

    pub fn one() -> Self {
        TrigPoly::constant(1.0)
    }

    /// `e^{2πi(mx+ny)}`.
    pub fn monomial(m: i64, n: i64) -> Self {
        TrigPoly::from_terms([(FourierMode::new(m, n), Complex64::new(1.0, 0.0))])
    }

    /// Every mode with `|m|, |n| <= max_freq`, coefficients uniform in `[-1, 1]²`.
    pub fn random(max_freq: i64, rng: &mut impl Rng) -> Self {
        let mut terms = Vec::new();
        for m in -max_freq..=max_freq {
            for n in -max_freq..=max_freq {
                terms.push((FourierMode::new(m, n), Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
            }
        }
        TrigPoly::from_terms(terms)
    }

    /// `cos 2π(mx+ny)`.
    pub fn cos(m: i64, n: i64) -> Self {
        let half = Complex64::new(0.5, 0.0);
        TrigPoly::from_terms([(FourierMode::new(m, n), half), (FourierMode::new(-m, -n), half)])
    }

    /// `sin 2π(mx+ny)`.
    pub fn sin(m: i64, n: i64) -> Self {
        TrigPoly::from_terms([
            (FourierMode::new(m, n), Complex64::new(0.0, -0.5)),
            (FourierMode::new(-m, -n), Complex64::new(0.0, 0.5)),
        ])
    }

    /// Sums repeated modes and drops exact zeros.
    pub fn from_terms(terms: impl IntoIterator<Item = (FourierMode, Complex64)>) -> Self {
        let mut coeffs = BTreeMap::new();
        for (mode, c) in terms {
            *coeffs.entry(mode).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        TrigPoly { coeffs }
    }

    pub fn coeff(&self, mode: FourierMode) -> Complex64 {
        self.coeffs.get(&mode).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (FourierMode, Complex64)> + '_ {
        self.coeffs.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    /// `max(|m|, |n|)` over stored modes; 0 for the zero polynomial.
    pub fn degree(&self) -> u64 {
        self.coeffs.keys().map(|k| k.degree()).max().unwrap_or(0)
    }

    pub fn scale(&self, s: impl Into<Complex64>) -> Self {
        let s = s.into();
        TrigPoly::from_terms(self.terms().map(|(k, c)| (k, c * s)))
    }

    /// Complex conjugate function: `c_{m,n} ↦ conj(c_{−m,−n})`.
    pub fn conj(&self) -> Self {
        TrigPoly::from_terms(self.terms().map(|(k, c)| (-k, c.conj())))
    }

    /// Largest violation of `c_{−m,−n} = conj(c_{m,n})`; zero iff the polynomial is real.
    pub fn reality_defect(&self) -> f64 {
        self.terms()
            .map(|(k, c)| (self.coeff(-k) - c.conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.reality_defect() == 0.0
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn dx(&self) -> Self {
        TrigPoly::from_terms(
            self.terms()
                .map(|(k, c)| (k, c * Complex64::new(0.0, 2.0 * PI * k.m as f64))),
        )
    }

    pub fn dy(&self) -> Self {
        TrigPoly::from_terms(
            self.terms()
                .map(|(k, c)| (k, c * Complex64::new(0.0, 2.0 * PI * k.n as f64))),
        )
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Complex64 {
        self.terms()
            .map(|(k, c)| c * Complex64::cis(2.0 * PI * (k.m as f64 * x + k.n as f64 * y)))
            .sum()
    }

    /// Pointwise product.
    pub fn multiply(&self, other: &TrigPoly) -> TrigPoly {
        let mut out: BTreeMap<FourierMode, Complex64> = BTreeMap::new();
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                *out.entry(a + b).or_default() += ca * cb;
            }
        }
        out.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        TrigPoly { coeffs: out }
    }

    /// Poisson bracket for the symplectic form `N dx∧dy`, computed mode by mode.
    pub fn poisson_bracket(&self, other: &TrigPoly, level: ChernLevel) -> TrigPoly {
        let scale = -4.0 * PI * PI / level.as_f64();
        let mut out: BTreeMap<FourierMode, Complex64> = BTreeMap::new();
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                let cross = a.m * b.n - a.n * b.m;
                if cross == 0 {
                    continue;
                }
                *out.entry(a + b).or_default() += ca * cb * (scale * cross as f64);
            }
        }
        out.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        TrigPoly { coeffs: out }
    }

    /// Text form: one `m n re im` line per stored mode.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, c) in self.terms() {
            s.push_str(&format!("{} {} {:?} {:?}\n", k.m, k.n, c.re, c.im));
        }
        s
    }

    /// Parses the `m n re im` text form. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 4 fields `m n re im`, found {}", fields.len()),
                });
            }
            let int = |s: &str| {
                s.parse::<i64>().map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("bad integer {s:?}: {e}"),
                })
            };
            let real = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("bad number {s:?}: {e}"),
                })
            };
            let mode = FourierMode::new(int(fields[0])?, int(fields[1])?);
            let c = Complex64::new(real(fields[2])?, real(fields[3])?);
            if coeffs.insert(mode, c).is_some() {
                return Err(Error::DuplicateMode {
                    m: mode.m,
                    n: mode.n,
                    line: line_no,
                });
            }
        }
        coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Ok(TrigPoly { coeffs })
    }
}

impl FromStr for TrigPoly {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TrigPoly::parse(s)
    }
}

impl fmt::Display for TrigPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}{:+}i){}", c.re, c.im, k)?;
        }
        Ok(())
    }
}

impl Add for &TrigPoly {
    type Output = TrigPoly;
    fn add(self, rhs: &TrigPoly) -> TrigPoly {
        TrigPoly::from_terms(self.terms().chain(rhs.terms()))
    }
}

impl Sub for &TrigPoly {
    type Output = TrigPoly;
    fn sub(self, rhs: &TrigPoly) -> TrigPoly {
        TrigPoly::from_terms(self.terms().chain(rhs.terms().map(|(k, c)| (k, -c))))
    }
}

impl Neg for &TrigPoly {
    type Output = TrigPoly;
    fn neg(self) -> TrigPoly {
        self.scale(-1.0)
    }
}

impl Mul for &TrigPoly {
    type Output = TrigPoly;
    fn mul(self, rhs: &TrigPoly) -> TrigPoly {
        self.multiply(rhs)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for TrigPoly {
            type Output = TrigPoly;
            fn $method(self, rhs: TrigPoly) -> TrigPoly {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
