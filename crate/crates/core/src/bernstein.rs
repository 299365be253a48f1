//! Bernstein-type rational operator on `[0, b]`.
//!
//! `R_n(f; x) = Σ_k f(g_n(k)) C(n,k) b^{n−k} x^k / (b+x)^n` with nodes
//! `g_n(k) = b·k/(n+1−k)`. Writing `p = x/(b+x)`, the weights are the
//! binomial pmf of `Bin(n, p)`, so `R_n(f; x) = E[f(g_n(X))]`. The operator
//! preserves monotonicity and converges uniformly for continuous
//! non-decreasing `f`, extended by `f(b)` beyond `b`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::rational::{Mode, NonNegPoly, NonNegRationalFn, RationalError};

/// Above this degree weights are computed in log space.
pub const LOG_SPACE_THRESHOLD: usize = 1000;

/// Default number of points in the uniform error grid.
pub const DEFAULT_GRID: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BernsteinError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("NotMonotoneSamples: sample {index} exceeds sample {next}", next = index + 1)]
    NotMonotoneSamples { index: usize },
    #[error("NegativeSample: sample {index} is {value}")]
    NegativeSample { index: usize, value: f64 },
    #[error("x = {x} lies outside [0, {b}]")]
    XOutOfRange { x: f64, b: f64 },
    #[error("bound not applicable: shift bound 2b/n = {shift} is not below delta/2 = {half_delta}")]
    BoundNotApplicable { shift: f64, half_delta: f64 },
    #[error(transparent)]
    Rational(#[from] RationalError),
}

pub type Result<T> = std::result::Result<T, BernsteinError>;

fn check_nb(n: usize, b: f64) -> Result<()> {
    if n == 0 {
        return Err(BernsteinError::InvalidParameters("n must be at least 1".into()));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(BernsteinError::InvalidParameters(format!("b must be positive, got {b}")));
    }
    Ok(())
}

/// `b·k/(n+1−k)` for `k = 0..=n`.
pub fn nodes(n: usize, b: f64) -> Result<Vec<f64>> {
    check_nb(n, b)?;
    Ok((0..=n).map(|k| b * k as f64 / (n + 1 - k) as f64).collect())
}

/// Binomial weights `C(n,k) p^k (1−p)^{n−k}` with `p = x/(b+x)`.
pub fn weights(n: usize, b: f64, x: f64) -> Result<Vec<f64>> {
    check_nb(n, b)?;
    if !(0.0..=b).contains(&x) {
        return Err(BernsteinError::XOutOfRange { x, b });
    }
    let mut w = vec![0.0; n + 1];
    if x == 0.0 {
        w[0] = 1.0;
        return Ok(w);
    }
    if n > LOG_SPACE_THRESHOLD {
        let ln_p = (x / (b + x)).ln();
        let ln_q = (b / (b + x)).ln();
        let ln_nf = ln_gamma(n as f64 + 1.0);
        for (k, wk) in w.iter_mut().enumerate() {
            let ln_c = ln_nf - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0);
            *wk = (ln_c + k as f64 * ln_p + (n - k) as f64 * ln_q).exp();
        }
        return Ok(w);
    }
    // p/(1−p) = x/b
    let odds = x / b;
    w[0] = (b / (b + x)).powi(n as i32);
    for k in 0..n {
        w[k + 1] = w[k] * (n - k) as f64 / (k + 1) as f64 * odds;
    }
    Ok(w)
}

/// `R_n` for fixed node samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinOperator {
    n: usize,
    b: f64,
    samples: Vec<f64>,
}

impl BernsteinOperator {
    /// Samples `f(min(g_n(k), b))`, so `f` is never called beyond `b`.
    pub fn build(f: impl Fn(f64) -> f64, n: usize, b: f64) -> Result<Self> {
        let samples = nodes(n, b)?.into_iter().map(|t| f(t.min(b))).collect();
        Self::from_samples(n, b, samples)
    }

    /// Uses the given node samples; they must be finite, non-negative and non-decreasing.
    pub fn from_samples(n: usize, b: f64, samples: Vec<f64>) -> Result<Self> {
        check_nb(n, b)?;
        if samples.len() != n + 1 {
            return Err(BernsteinError::InvalidParameters(format!(
                "expected {} samples, got {}",
                n + 1,
                samples.len()
            )));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= 0.0) || !v.is_finite())
        {
            return Err(BernsteinError::NegativeSample { index, value });
        }
        if let Some(index) = samples.windows(2).position(|w| w[1] < w[0]) {
            return Err(BernsteinError::NotMonotoneSamples { index });
        }
        Ok(BernsteinOperator { n, b, samples })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let w = weights(self.n, self.b, x)?;
        Ok(w.iter().zip(&self.samples).map(|(w, s)| w * s).sum())
    }

    /// Values on the uniform grid of `grid_size` points.
    pub fn eval_grid(&self, grid_size: usize) -> Result<Vec<(f64, f64)>> {
        uniform_grid(self.b, grid_size)?
            .into_iter()
            .map(|x| Ok((x, self.eval(x)?)))
            .collect()
    }

    /// `max |R_n(f; x) − f(x)|` over the uniform grid.
    pub fn sup_error(&self, f: impl Fn(f64) -> f64, grid_size: usize) -> Result<f64> {
        Ok(self
            .eval_grid(grid_size)?
            .into_iter()
            .map(|(x, r)| (r - f(x)).abs())
            .fold(0.0, f64::max))
    }

    /// Smallest increment between consecutive grid values.
    pub fn monotonicity_gap(&self, grid_size: usize) -> Result<f64> {
        let values = self.eval_grid(grid_size)?;
        Ok(values
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::INFINITY, f64::min))
    }

    /// The operator as an exact ratio of polynomials in `x`:
    /// `Σ s_k C(n,k) b^{n−k} x^k` over `(b+x)^n`.
    pub fn to_rational(&self) -> Result<NonNegRationalFn> {
        let exact = |v: f64| {
            BigRational::from_float(v)
                .ok_or_else(|| BernsteinError::InvalidParameters(format!("non-finite value {v}")))
        };
        let b = exact(self.b)?;
        let n = self.n;
        let mut binom = BigInt::one();
        let mut terms = Vec::with_capacity(n + 1);
        for (k, &s) in self.samples.iter().enumerate() {
            if k > 0 {
                binom = binom * BigInt::from(n - k + 1) / BigInt::from(k);
            }
            let c = exact(s)? * BigRational::from_integer(binom.clone()) * num_traits::pow(b.clone(), n - k);
            terms.push((vec![k as u32], c));
        }
        let num = NonNegPoly::from_terms(1, terms)?;
        let base = NonNegPoly::from_terms(1, [(vec![0], b), (vec![1], BigRational::one())])?;
        let den = base.pow(n as u32);
        debug_assert!(!den.constant_term().is_zero());
        Ok(NonNegRationalFn::new(num, den, Mode::Free)?)
    }
}

/// `size` equally spaced points from `0` to `b`, both included.
pub fn uniform_grid(b: f64, size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(BernsteinError::InvalidParameters(format!("grid needs at least 2 points, got {size}")));
    }
    let last = (size - 1) as f64;
    Ok((0..size).map(|i| b * i as f64 / last).collect())
}

/// Bound on the shift between the node mean and `x`: `2b/n`.
pub fn shift_bound(n: usize, b: f64) -> f64 {
    2.0 * b / n as f64
}

/// Chebyshev bound on `P(|X/n − p| ≥ η)`: `1/(4nη²)`.
pub fn tail_bound(n: usize, eta: f64) -> f64 {
    1.0 / (4.0 * n as f64 * eta * eta)
}

/// Lipschitz constant of the node map on the region that matters: `32b`.
pub fn lipschitz_constant(b: f64) -> f64 {
    32.0 * b
}

/// Tail width `η = min(1/4, δ/(2K))`.
pub fn tail_width(delta: f64, b: f64) -> f64 {
    (delta / (2.0 * lipschitz_constant(b))).min(0.25)
}

/// Data for the uniform error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundInputs {
    /// Radius with `|f(u) − f(v)| < eps_half` whenever `|u − v| < delta`.
    pub delta: f64,
    pub eps_half: f64,
    /// `sup |f| = f(b)`.
    pub sup_f: f64,
    pub n: usize,
}

/// `eps_half + 2M/(4nη²)`, valid once `2b/n < δ/2`.
pub fn total_error_bound(inputs: &ErrorBoundInputs, b: f64) -> Result<f64> {
    let ErrorBoundInputs {
        delta,
        eps_half,
        sup_f,
        n,
    } = *inputs;
    check_nb(n, b)?;
    if !(delta > 0.0 && eps_half > 0.0 && sup_f >= 0.0) {
        return Err(BernsteinError::InvalidParameters(
            "delta and eps_half must be positive, sup_f non-negative".into(),
        ));
    }
    let shift = shift_bound(n, b);
    if !(shift < delta / 2.0) {
        return Err(BernsteinError::BoundNotApplicable {
            shift,
            half_delta: delta / 2.0,
        });
    }
    Ok(eps_half + 2.0 * sup_f * tail_bound(n, tail_width(delta, b)))
}

/// Piecewise-linear interpolation through sorted points, constant outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolant {
    points: Vec<(f64, f64)>,
}

impl Interpolant {
    /// Requires strictly increasing x, non-decreasing non-negative y.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(BernsteinError::InvalidParameters("no data points".into()));
        }
        if points.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(BernsteinError::InvalidParameters("data must be finite".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(BernsteinError::InvalidParameters(
                "x values must be strictly increasing".into(),
            ));
        }
        if let Some((index, &(_, value))) = points.iter().enumerate().find(|(_, p)| p.1 < 0.0) {
            return Err(BernsteinError::NegativeSample { index, value });
        }
        if let Some(index) = points.windows(2).position(|w| w[1].1 < w[0].1) {
            return Err(BernsteinError::NotMonotoneSamples { index });
        }
        Ok(Interpolant { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.points;
        if x <= p[0].0 {
            return p[0].1;
        }
        let last = p[p.len() - 1];
        if x >= last.0 {
            return last.1;
        }
        let i = p.partition_point(|q| q.0 <= x);
        let (x0, y0) = p[i - 1];
        let (x1, y1) = p[i];
        y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
    }
}

/// Built-in non-decreasing test functions on `[0, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TargetFunction {
    Identity,
    Sqrt,
    /// Logistic step centred at `b/2` with slope `20/b`.
    StepSmoothed,
    Constant(f64),
    Linear(Interpolant),
}

impl TargetFunction {
    pub fn eval(&self, x: f64, b: f64) -> f64 {
        match self {
            TargetFunction::Identity => x,
            TargetFunction::Sqrt => x.sqrt(),
            TargetFunction::StepSmoothed => 1.0 / (1.0 + (-(20.0 / b) * (x - b / 2.0)).exp()),
            TargetFunction::Constant(c) => *c,
            TargetFunction::Linear(p) => p.eval(x),
        }
    }

    /// A Lipschitz constant on `[0, b]`, when one is known in closed form.
    pub fn lipschitz(&self, b: f64) -> Option<f64> {
        match self {
            TargetFunction::Identity => Some(1.0),
            TargetFunction::Sqrt => None,
            TargetFunction::StepSmoothed => Some(5.0 / b),
            TargetFunction::Constant(_) => Some(0.0),
            TargetFunction::Linear(p) => Some(
                p.points()
                    .windows(2)
                    .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                    .fold(0.0, f64::max),
            ),
        }
    }
}

impl fmt::Display for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetFunction::Identity => f.write_str("identity"),
            TargetFunction::Sqrt => f.write_str("sqrt"),
            TargetFunction::StepSmoothed => f.write_str("step-smoothed"),
            TargetFunction::Constant(c) => write!(f, "const:{c}"),
            TargetFunction::Linear(p) => {
                f.write_str("pwl:")?;
                for (i, (x, y)) in p.points().iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}:{y}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for TargetFunction {
    type Err = BernsteinError;

    /// `identity`, `sqrt`, `step-smoothed`, `const:<c>` or `pwl:x1:y1,x2:y2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| BernsteinError::InvalidParameters(msg);
        match s {
            "identity" => return Ok(TargetFunction::Identity),
            "sqrt" => return Ok(TargetFunction::Sqrt),
            "step-smoothed" => return Ok(TargetFunction::StepSmoothed),
            _ => {}
        }
        if let Some(c) = s.strip_prefix("const:") {
            let c: f64 = c.parse().map_err(|_| bad(format!("bad constant {c:?}")))?;
            if !(c >= 0.0) || !c.is_finite() {
                return Err(BernsteinError::NegativeSample { index: 0, value: c });
            }
            return Ok(TargetFunction::Constant(c));
        }
        if let Some(rest) = s.strip_prefix("pwl:") {
            let points = rest
                .split(',')
                .map(|pair| {
                    let (x, y) = pair
                        .split_once(':')
                        .ok_or_else(|| bad(format!("expected x:y, got {pair:?}")))?;
                    let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(format!("bad number {t:?}")));
                    Ok((parse(x)?, parse(y)?))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(TargetFunction::Linear(Interpolant::new(points)?));
        }
        Err(bad(format!("unknown function {s:?}")))
    }
}
