//! Sparse multivariate polynomials and rational functions with non-negative
//! exact rational coefficients.
//!
//! The operations here are exactly the closure steps that keep the class
//! "positive ratio of non-negative-coefficient polynomials with equal degree"
//! stable: sums, products, positive scaling, `χ(f) = 2p²/(p²+q²)` and
//! `γ(f) = 4p²/(p+q)²`. Because every coefficient is non-negative, no
//! cancellation can happen, so degrees add under products and take the
//! maximum under sums. All arithmetic is exact.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::order::GridFunction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RationalError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("negative coefficient {0}")]
    NegativeCoefficient(String),
    #[error("scale factor must be non-negative, got {0}")]
    NegativeScale(String),
    #[error("scale factor must be strictly positive, got {0}")]
    NonPositiveScale(String),
    #[error("mode mismatch: cannot combine degree-matched and free rational functions")]
    ModeMismatch,
    #[error("degree-matched rational function needs deg(num) = deg(den), got {num:?} and {den:?}")]
    DegreeMismatch { num: Option<u32>, den: Option<u32> },
    #[error("denominator must have a strictly positive constant term")]
    DenominatorConstantTerm,
    #[error("coordinate index {k} out of range for dimension {dim}")]
    InvalidCoordinate { k: usize, dim: usize },
    #[error("coordinate {0} is negative; positivity is only guaranteed on [0, inf)^d")]
    NegativeCoordinate(usize),
    #[error("malformed coefficient {0:?}")]
    BadCoefficient(String),
    #[error("exponent vector has length {actual}, expected {expected}")]
    ExponentLength { expected: usize, actual: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, RationalError>;

/// Exponent multi-index, one entry per variable.
pub type Monomial = Vec<u32>;

/// Polynomial in `dim` variables with strictly positive stored coefficients.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PolyRepr", into = "PolyRepr")]
pub struct NonNegPoly {
    dim: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

impl fmt::Debug for NonNegPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for NonNegPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let vars = ["x", "y", "z"];
        for (i, (exp, c)) in self.terms.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            let is_const = exp.iter().all(|&e| e == 0);
            if !c.is_one() || is_const {
                write!(f, "{c}")?;
            }
            for (j, &e) in exp.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                match vars.get(j).filter(|_| self.dim <= 3) {
                    Some(v) => f.write_str(v)?,
                    None => write!(f, "x{}", j + 1)?,
                }
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

fn degree_of(exp: &[u32]) -> u32 {
    exp.iter().sum()
}

impl NonNegPoly {
    pub fn zero(dim: usize) -> Self {
        NonNegPoly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: BigRational) -> Result<Self> {
        Self::from_terms(dim, [(vec![0; dim], c)])
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, BigRational::one()).expect("one is non-negative")
    }

    /// The coordinate function `z_k` (`k` counted from zero).
    pub fn variable(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(RationalError::InvalidCoordinate { k, dim });
        }
        let mut exp = vec![0; dim];
        exp[k] = 1;
        Self::from_terms(dim, [(exp, BigRational::one())])
    }

    /// Builds a polynomial from `(exponent, coefficient)` pairs, summing
    /// repeated monomials and dropping zeros.
    pub fn from_terms(
        dim: usize,
        terms: impl IntoIterator<Item = (Monomial, BigRational)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (exp, c) in terms {
            if exp.len() != dim {
                return Err(RationalError::ExponentLength {
                    expected: dim,
                    actual: exp.len(),
                });
            }
            if c.is_negative() {
                return Err(RationalError::NegativeCoefficient(c.to_string()));
            }
            if c.is_zero() {
                continue;
            }
            *map.entry(exp).or_insert_with(BigRational::zero) += c;
        }
        Ok(NonNegPoly { dim, terms: map })
    }

    /// Univariate convenience: `coeffs[i]` multiplies `x^i`.
    pub fn univariate(coeffs: &[i64]) -> Result<Self> {
        Self::from_terms(
            1,
            coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| (vec![i as u32], BigRational::from_integer(c.into()))),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, BigRational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| degree_of(e)).max()
    }

    pub fn constant_term(&self) -> BigRational {
        self.terms
            .get(&vec![0; self.dim])
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Every stored coefficient strictly positive.
    pub fn coefficients_positive(&self) -> bool {
        self.terms.values().all(|c| c.is_positive())
    }

    fn check_dim(&self, other: &NonNegPoly) -> Result<()> {
        if self.dim != other.dim {
            return Err(RationalError::DimensionMismatch(self.dim, other.dim));
        }
        Ok(())
    }

    pub fn add(&self, other: &NonNegPoly) -> Result<Self> {
        self.check_dim(other)?;
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            *terms.entry(e.clone()).or_insert_with(BigRational::zero) += c;
        }
        Ok(NonNegPoly {
            dim: self.dim,
            terms,
        })
    }

    pub fn mul(&self, other: &NonNegPoly) -> Result<Self> {
        self.check_dim(other)?;
        let mut terms: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Monomial = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *terms.entry(e).or_insert_with(BigRational::zero) += ca * cb;
            }
        }
        Ok(NonNegPoly {
            dim: self.dim,
            terms,
        })
    }

    pub fn square(&self) -> Self {
        self.mul(self).expect("same dimension")
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = NonNegPoly::one(self.dim);
        for _ in 0..n {
            acc = acc.mul(self).expect("same dimension");
        }
        acc
    }

    /// `λ·p` for `λ ≥ 0`; `λ = 0` yields the zero polynomial.
    pub fn scale(&self, lambda: &BigRational) -> Result<Self> {
        if lambda.is_negative() {
            return Err(RationalError::NegativeScale(lambda.to_string()));
        }
        if lambda.is_zero() {
            return Ok(NonNegPoly::zero(self.dim));
        }
        Ok(NonNegPoly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), c * lambda))
                .collect(),
        })
    }

    /// Floating-point evaluation at `point`.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim {
            return Err(RationalError::DimensionMismatch(self.dim, point.len()));
        }
        Ok(self
            .terms
            .iter()
            .map(|(e, c)| {
                let mono: f64 = e
                    .iter()
                    .zip(point)
                    .map(|(&k, &x)| x.powi(k as i32))
                    .product();
                c.to_f64().unwrap_or(f64::NAN) * mono
            })
            .sum())
    }

    /// Exact evaluation at a rational point.
    pub fn eval_exact(&self, point: &[BigRational]) -> Result<BigRational> {
        if point.len() != self.dim {
            return Err(RationalError::DimensionMismatch(self.dim, point.len()));
        }
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (&k, x) in e.iter().zip(point) {
                t *= num_traits::pow(x.clone(), k as usize);
            }
            acc += t;
        }
        Ok(acc)
    }
}

pub fn poly_add(p: &NonNegPoly, q: &NonNegPoly) -> Result<NonNegPoly> {
    p.add(q)
}

pub fn poly_mul(p: &NonNegPoly, q: &NonNegPoly) -> Result<NonNegPoly> {
    p.mul(q)
}

pub fn poly_scale(lambda: &BigRational, p: &NonNegPoly) -> Result<NonNegPoly> {
    p.scale(lambda)
}

/// Whether `deg(num) = deg(den)` is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "matched")]
    DegreeMatched,
    #[serde(rename = "free")]
    Free,
}

/// `num / den` with non-negative coefficients and `den(0) > 0`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RationalRepr", into = "RationalRepr")]
pub struct NonNegRationalFn {
    num: NonNegPoly,
    den: NonNegPoly,
    mode: Mode,
}

impl fmt::Debug for NonNegRationalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({}) [{:?}]", self.num, self.den, self.mode)
    }
}

/// Joint content of both polynomials: gcd of coefficient numerators over
/// lcm of coefficient denominators.
fn joint_content(a: &NonNegPoly, b: &NonNegPoly) -> BigRational {
    let mut g = BigInt::zero();
    let mut l = BigInt::one();
    for c in a.terms.values().chain(b.terms.values()) {
        g = g.gcd(c.numer());
        l = l.lcm(c.denom());
    }
    if g.is_zero() {
        BigRational::one()
    } else {
        BigRational::new(g, l)
    }
}

impl NonNegRationalFn {
    /// Validates the invariants and reduces by the joint integer content.
    pub fn new(num: NonNegPoly, den: NonNegPoly, mode: Mode) -> Result<Self> {
        num.check_dim(&den)?;
        if !den.constant_term().is_positive() {
            return Err(RationalError::DenominatorConstantTerm);
        }
        if mode == Mode::DegreeMatched && (num.is_zero() || num.degree() != den.degree()) {
            return Err(RationalError::DegreeMismatch {
                num: num.degree(),
                den: den.degree(),
            });
        }
        let content = joint_content(&num, &den).recip();
        Ok(NonNegRationalFn {
            num: num.scale(&content)?,
            den: den.scale(&content)?,
            mode,
        })
    }

    pub fn polynomial(p: NonNegPoly) -> Result<Self> {
        let dim = p.dim;
        Self::new(p, NonNegPoly::one(dim), Mode::Free)
    }

    pub fn one(dim: usize, mode: Mode) -> Self {
        Self::new(NonNegPoly::one(dim), NonNegPoly::one(dim), mode).expect("1/1 is valid")
    }

    pub fn num(&self) -> &NonNegPoly {
        &self.num
    }

    pub fn den(&self) -> &NonNegPoly {
        &self.den
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.num.dim
    }

    pub fn with_mode(self, mode: Mode) -> Result<Self> {
        Self::new(self.num, self.den, mode)
    }

    /// Re-checks every invariant from scratch.
    pub fn check_invariants(&self) -> Result<()> {
        for p in [&self.num, &self.den] {
            if let Some(c) = p.terms.values().find(|c| !c.is_positive()) {
                return Err(RationalError::NegativeCoefficient(c.to_string()));
            }
        }
        if !self.den.constant_term().is_positive() {
            return Err(RationalError::DenominatorConstantTerm);
        }
        if self.mode == Mode::DegreeMatched
            && (self.num.is_zero() || self.num.degree() != self.den.degree())
        {
            return Err(RationalError::DegreeMismatch {
                num: self.num.degree(),
                den: self.den.degree(),
            });
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        self.num.check_dim(&other.num)?;
        if self.mode != other.mode {
            return Err(RationalError::ModeMismatch);
        }
        Ok(())
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if let Some(i) = point.iter().position(|&x| !(x >= 0.0)) {
            return Err(RationalError::NegativeCoordinate(i));
        }
        Ok(self.num.eval(point)? / self.den.eval(point)?)
    }

    pub fn eval_exact(&self, point: &[BigRational]) -> Result<BigRational> {
        if let Some(i) = point.iter().position(|x| x.is_negative()) {
            return Err(RationalError::NegativeCoordinate(i));
        }
        Ok(self.num.eval_exact(point)? / self.den.eval_exact(point)?)
    }
}

/// `p₁/q₁ + p₂/q₂ = (p₁q₂ + q₁p₂)/(q₁q₂)`.
pub fn rat_add(f: &NonNegRationalFn, g: &NonNegRationalFn) -> Result<NonNegRationalFn> {
    f.check_compatible(g)?;
    let num = f.num.mul(&g.den)?.add(&f.den.mul(&g.num)?)?;
    let den = f.den.mul(&g.den)?;
    NonNegRationalFn::new(num, den, f.mode)
}

pub fn rat_mul(f: &NonNegRationalFn, g: &NonNegRationalFn) -> Result<NonNegRationalFn> {
    f.check_compatible(g)?;
    NonNegRationalFn::new(f.num.mul(&g.num)?, f.den.mul(&g.den)?, f.mode)
}

pub fn rat_scale(lambda: &BigRational, f: &NonNegRationalFn) -> Result<NonNegRationalFn> {
    if !lambda.is_positive() {
        return Err(RationalError::NonPositiveScale(lambda.to_string()));
    }
    NonNegRationalFn::new(f.num.scale(lambda)?, f.den.clone(), f.mode)
}

/// `χ(p/q) = 2p²/(p² + q²)`.
pub fn chi_rat(f: &NonNegRationalFn) -> Result<NonNegRationalFn> {
    let p2 = f.num.square();
    let q2 = f.den.square();
    let two = BigRational::from_integer(2.into());
    NonNegRationalFn::new(p2.scale(&two)?, p2.add(&q2)?, f.mode)
}

/// `γ(p/q) = 4p²/(p + q)²`.
pub fn gamma_rat(f: &NonNegRationalFn) -> Result<NonNegRationalFn> {
    let four = BigRational::from_integer(4.into());
    let num = f.num.square().scale(&four)?;
    let den = f.num.add(&f.den)?.square();
    NonNegRationalFn::new(num, den, f.mode)
}

/// `g(z) = (z_k + c)/(z_k + c + 1)`, `k` counted from zero.
pub fn coordinate_separator(dim: usize, k: usize, c: &BigRational) -> Result<NonNegRationalFn> {
    if !c.is_positive() {
        return Err(RationalError::InvalidParameter(format!("c must be positive, got {c}")));
    }
    let z = NonNegPoly::variable(dim, k)?;
    let num = z.add(&NonNegPoly::constant(dim, c.clone())?)?;
    let den = z.add(&NonNegPoly::constant(dim, c + BigRational::one())?)?;
    NonNegRationalFn::new(num, den, Mode::DegreeMatched)
}

pub fn rat_eval(f: &NonNegRationalFn, point: &[f64]) -> Result<f64> {
    f.eval(point)
}

/// Values of `f` on a list of points, as a function on the finite space they span.
pub fn restrict_to_grid(f: &NonNegRationalFn, points: &[Vec<f64>]) -> Result<GridFunction> {
    let values = points
        .iter()
        .map(|p| f.eval(p))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(values)
        .map_err(|e| RationalError::InvalidParameter(format!("non-finite value: {e}")))
}

// ---- JSON schema ----

#[derive(Serialize, Deserialize)]
struct TermRepr {
    exp: Vec<u32>,
    coef: String,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    dim: usize,
    terms: Vec<TermRepr>,
}

fn parse_coef(s: &str) -> Result<BigRational> {
    let bad = || RationalError::BadCoefficient(s.to_string());
    let parse_int = |t: &str| t.trim().parse::<BigInt>().map_err(|_| bad());
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse_int(d)?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(parse_int(n)?, d))
        }
        None => Ok(BigRational::from_integer(parse_int(s)?)),
    }
}

impl TryFrom<PolyRepr> for NonNegPoly {
    type Error = RationalError;

    fn try_from(r: PolyRepr) -> Result<Self> {
        let terms = r
            .terms
            .into_iter()
            .map(|t| Ok((t.exp, parse_coef(&t.coef)?)))
            .collect::<Result<Vec<_>>>()?;
        NonNegPoly::from_terms(r.dim, terms)
    }
}

impl From<NonNegPoly> for PolyRepr {
    fn from(p: NonNegPoly) -> Self {
        PolyRepr {
            dim: p.dim,
            terms: p
                .terms
                .into_iter()
                .map(|(exp, c)| TermRepr {
                    exp,
                    coef: format!("{}/{}", c.numer(), c.denom()),
                })
                .collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RationalRepr {
    num: NonNegPoly,
    den: NonNegPoly,
    mode: Mode,
}

impl TryFrom<RationalRepr> for NonNegRationalFn {
    type Error = RationalError;

    fn try_from(r: RationalRepr) -> Result<Self> {
        NonNegRationalFn::new(r.num, r.den, r.mode)
    }
}

impl From<NonNegRationalFn> for RationalRepr {
    fn from(f: NonNegRationalFn) -> Self {
        RationalRepr {
            num: f.num,
            den: f.den,
            mode: f.mode,
        }
    }
}

// ---- randomized closure suite ----

fn random_poly(rng: &mut ChaCha8Rng, dim: usize, degree: u32, need_const: bool) -> NonNegPoly {
    let mut terms = Vec::new();
    // one monomial of exactly `degree`, spread across the coordinates
    let mut top = vec![0u32; dim];
    for _ in 0..degree {
        top[rng.random_range(0..dim)] += 1;
    }
    terms.push(top);
    if need_const {
        terms.push(vec![0; dim]);
    }
    for _ in 0..rng.random_range(0..6) {
        let d = rng.random_range(0..=degree);
        let mut e = vec![0u32; dim];
        for _ in 0..d {
            e[rng.random_range(0..dim)] += 1;
        }
        terms.push(e);
    }
    let coefs = terms.into_iter().map(|e| {
        let n: i64 = rng.random_range(1..=9);
        let d: i64 = rng.random_range(1..=5);
        (e, BigRational::new(n.into(), d.into()))
    });
    NonNegPoly::from_terms(dim, coefs.collect::<Vec<_>>()).expect("positive coefficients")
}

/// A random degree-matched rational function in `1..=max_dim` variables of
/// common degree `0..=max_degree`.
pub fn random_matched(rng: &mut ChaCha8Rng, max_dim: usize, max_degree: u32) -> NonNegRationalFn {
    let dim = rng.random_range(1..=max_dim);
    let degree = rng.random_range(0..=max_degree);
    let num = random_poly(rng, dim, degree, false);
    let den = random_poly(rng, dim, degree, true);
    NonNegRationalFn::new(num, den, Mode::DegreeMatched).expect("degrees match by construction")
}

/// Outcome of the closure checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub seed: u64,
    pub trials: usize,
    pub passed: usize,
    pub failures: Vec<String>,
}

impl ClosureReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.trials
    }
}

impl fmt::Display for ClosureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} closure checks passed", self.passed, self.trials)
    }
}

/// Runs `trials` seeded checks: for random degree-matched `f` and `g` of
/// the same dimension, `f + g`, `f·g`, `χ(f)` and `γ(f)` must all satisfy
/// the non-negative-coefficient and equal-degree invariants.
pub fn closure_suite(seed: u64, trials: usize, max_dim: usize, max_degree: u32) -> Result<ClosureReport> {
    if trials == 0 {
        return Err(RationalError::InvalidParameter("trials must be positive".into()));
    }
    if max_dim == 0 {
        return Err(RationalError::InvalidParameter("dim must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passed = 0;
    let mut failures = Vec::new();
    for trial in 0..trials {
        let f = random_matched(&mut rng, max_dim, max_degree);
        let g = loop {
            let g = random_matched(&mut rng, max_dim, max_degree);
            if g.dim() == f.dim() {
                break g;
            }
        };
        let outcomes = [
            ("add", rat_add(&f, &g)),
            ("mul", rat_mul(&f, &g)),
            ("chi", chi_rat(&f)),
            ("gamma", gamma_rat(&f)),
        ];
        let mut ok = true;
        for (name, out) in outcomes {
            let verdict = out.and_then(|h| h.check_invariants().map(|_| h));
            if let Err(e) = verdict {
                ok = false;
                failures.push(format!("trial {trial} {name}: {e}"));
            }
        }
        if ok {
            passed += 1;
        }
    }
    Ok(ClosureReport {
        seed,
        trials,
        passed,
        failures,
    })
}
