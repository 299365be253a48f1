//! Contraction maps `φ: [0,∞) → [0,∞)` with fixed points exactly `{0, 1}`.
//!
//! Every variant is non-decreasing with `φ(x) ≤ x`, so iterating it drives
//! values in `(0,1)` down to `0` and values above `1` down to `1`. The engine
//! uses those iterates to sharpen cone elements into near-indicator functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::order::GridFunction;

/// Default cap on φ iterations for any search.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhiError {
    #[error("phi argument must be a finite non-negative number, got {0}")]
    NegativeInput(f64),
    #[error("invalid phi parameter: {0}")]
    InvalidParameter(String),
    #[error("iteration cap of {0} exceeded")]
    IterationCapExceeded(usize),
}

pub type Result<T> = std::result::Result<T, PhiError>;

/// Choice of contraction map.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum PhiSpec {
    /// `x·sech(a·ln x) = 2x^{1+a}/(1+x^{2a})`, `0 < a ≤ 1`.
    Alpha { a: f64 },
    /// `x(1+2x+5x²)/(1+x)³`.
    Beta,
    /// `(2x/(1+x))²`.
    #[default]
    Gamma,
    /// `2x²/(1+x²)`.
    Chi,
    /// Linear interpolation through breakpoints.
    #[serde(rename = "pwl")]
    PiecewiseLinear { points: Vec<[f64; 2]> },
}

impl std::fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhiSpec::Alpha { a } => write!(f, "alpha(a={a})"),
            PhiSpec::Beta => f.write_str("beta"),
            PhiSpec::Gamma => f.write_str("gamma"),
            PhiSpec::Chi => f.write_str("chi"),
            PhiSpec::PiecewiseLinear { points } => write!(f, "pwl({} points)", points.len()),
        }
    }
}

fn check_alpha(a: f64) -> Result<()> {
    if a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(PhiError::InvalidParameter(format!(
            "alpha parameter a must lie in (0, 1], got {a}"
        )))
    }
}

fn check_sorted(points: &[[f64; 2]]) -> Result<()> {
    if points.len() < 2 {
        return Err(PhiError::InvalidParameter(
            "piecewise-linear phi needs at least two breakpoints".into(),
        ));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(PhiError::InvalidParameter("breakpoints must be finite".into()));
    }
    if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(PhiError::InvalidParameter(
            "breakpoint x values must be strictly increasing".into(),
        ));
    }
    if points[0][0] != 0.0 {
        return Err(PhiError::InvalidParameter("first breakpoint must be at x = 0".into()));
    }
    Ok(())
}

impl PhiSpec {
    pub fn alpha(a: f64) -> Result<Self> {
        check_alpha(a)?;
        Ok(PhiSpec::Alpha { a })
    }

    pub fn piecewise_linear(points: Vec<[f64; 2]>) -> Result<Self> {
        let spec = PhiSpec::PiecewiseLinear { points };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the full hypothesis set: parameter ranges and, for breakpoint
    /// data, monotonicity, the fixed points and strict contraction elsewhere.
    pub fn validate(&self) -> Result<()> {
        match self {
            PhiSpec::Alpha { a } => check_alpha(*a),
            PhiSpec::Beta | PhiSpec::Gamma | PhiSpec::Chi => Ok(()),
            PhiSpec::PiecewiseLinear { points } => {
                check_sorted(points)?;
                let bad = |msg: &str| Err(PhiError::InvalidParameter(msg.into()));
                if points[0] != [0.0, 0.0] || !points.contains(&[1.0, 1.0]) {
                    return bad("breakpoints must contain (0,0) and (1,1)");
                }
                if points.windows(2).any(|w| w[1][1] < w[0][1]) {
                    return bad("breakpoint y values must be non-decreasing");
                }
                for &[x, y] in points {
                    if y > x || (y == x && x != 0.0 && x != 1.0) {
                        return bad("breakpoints must satisfy y < x away from 0 and 1");
                    }
                }
                if points.windows(2).any(|w| w[0] == [0.0, 0.0] && w[1] == [1.0, 1.0]) {
                    return bad("segment from (0,0) to (1,1) would fix every point between");
                }
                let n = points.len();
                if points[n - 1] == [1.0, 1.0] && last_slope(points) >= 1.0 {
                    return bad("extension beyond (1,1) must have slope < 1");
                }
                Ok(())
            }
        }
    }

    /// The formula value without any post-processing.
    ///
    /// Only the argument and the alpha range are checked; breakpoint data
    /// is evaluated even when it violates the contraction hypotheses, which
    /// is what [`verify_phi_properties`] needs.
    pub fn eval_raw(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(PhiError::NegativeInput(x));
        }
        Ok(match self {
            PhiSpec::Alpha { a } => {
                check_alpha(*a)?;
                if x == 0.0 {
                    0.0
                } else {
                    2.0 * x / (x.powf(-a) + x.powf(*a))
                }
            }
            PhiSpec::Beta => x * (1.0 + 2.0 * x + 5.0 * x * x) / (1.0 + x).powi(3),
            PhiSpec::Gamma => {
                let r = 2.0 * x / (1.0 + x);
                r * r
            }
            PhiSpec::Chi => {
                let s = x * x;
                2.0 * s / (1.0 + s)
            }
            PhiSpec::PiecewiseLinear { points } => {
                check_sorted(points)?;
                eval_pwl(points, x)
            }
        })
    }

    /// `φ(x)`, enclosed in the interval the exact value is known to lie in.
    ///
    /// For `x < 1` the result is kept in `[0, x]`; for `x ≥ 1` in `[1, x]`.
    /// The clamp only moves results by rounding error, and it keeps `1`
    /// exactly fixed and `[1, ∞)` invariant in floating point.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let raw = self.eval_raw(x)?;
        Ok(if x < 1.0 {
            raw.clamp(0.0, x)
        } else {
            raw.clamp(1.0, x)
        })
    }

    /// `φ⁽ⁿ⁾(x)`; `n = 0` returns `x`.
    pub fn iterate(&self, x: f64, n: usize) -> Result<f64> {
        let mut v = x;
        for _ in 0..n {
            let next = self.eval(v)?;
            if next == v {
                // floating-point fixed point: further steps change nothing
                break;
            }
            v = next;
        }
        // still validate the argument when n == 0
        if n == 0 {
            self.eval(x)?;
        }
        Ok(v)
    }

    /// Applies `φ` once to every entry.
    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        values.iter().map(|&v| self.eval(v)).collect()
    }

    /// Applies `φ⁽ⁿ⁾` to every entry.
    pub fn apply_n(&self, values: &[f64], n: usize) -> Result<Vec<f64>> {
        values.iter().map(|&v| self.iterate(v, n)).collect()
    }
}

fn last_slope(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    let [x0, y0] = points[n - 2];
    let [x1, y1] = points[n - 1];
    (y1 - y0) / (x1 - x0)
}

fn eval_pwl(points: &[[f64; 2]], x: f64) -> f64 {
    let n = points.len();
    let last = points[n - 1];
    if x >= last[0] {
        let slope = last_slope(points).min(1.0);
        return last[1] + slope * (x - last[0]);
    }
    // first breakpoint with x_i > x; x ≥ 0 = x_0 so i ≥ 1
    let i = points.partition_point(|p| p[0] <= x);
    let [x0, y0] = points[i - 1];
    let [x1, y1] = points[i];
    if x == x0 {
        return y0;
    }
    y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
}

/// Searches the least `n ≤ max_iter` for which `w = φ⁽ⁿ⁾(v)` satisfies
/// `max(w) ≤ hi_cap` and `w[i] < low_cap` for every `i` in `low_indices`.
pub fn iterate_vector_until(
    spec: &PhiSpec,
    v: &GridFunction,
    hi_cap: f64,
    low_indices: &[usize],
    low_cap: f64,
    max_iter: usize,
) -> Result<(usize, GridFunction)> {
    if !v.is_non_negative() {
        return Err(PhiError::NegativeInput(v.min()));
    }
    if !(hi_cap > 1.0) {
        return Err(PhiError::InvalidParameter(format!("hi_cap must exceed 1, got {hi_cap}")));
    }
    if !(low_cap > 0.0) {
        return Err(PhiError::InvalidParameter(format!("low_cap must be positive, got {low_cap}")));
    }
    if let Some(&i) = low_indices.iter().find(|&&i| i >= v.len()) {
        return Err(PhiError::InvalidParameter(format!("low index {i} out of range")));
    }
    let done = |w: &[f64]| {
        w.iter().all(|&x| x <= hi_cap) && low_indices.iter().all(|&i| w[i] < low_cap)
    };
    let (n, w) = iterate_until(spec, v.values().to_vec(), max_iter, done)?;
    Ok((n, GridFunction::new(w).expect("phi preserves finiteness")))
}

/// Least `n ≤ max_iter` with `done(φ⁽ⁿ⁾(values))`.
///
/// Gives up early with [`PhiError::IterationCapExceeded`] once the vector
/// stops changing, since the outcome can no longer change either.
pub(crate) fn iterate_until(
    spec: &PhiSpec,
    mut values: Vec<f64>,
    max_iter: usize,
    done: impl Fn(&[f64]) -> bool,
) -> Result<(usize, Vec<f64>)> {
    for n in 0..=max_iter {
        if done(&values) {
            return Ok((n, values));
        }
        if n == max_iter || !step_in_place(spec, &mut values)? {
            break;
        }
    }
    Err(PhiError::IterationCapExceeded(max_iter))
}

/// Same search over several vectors iterated in lockstep.
pub(crate) fn iterate_many_until(
    spec: &PhiSpec,
    mut vectors: Vec<Vec<f64>>,
    max_iter: usize,
    done: impl Fn(&[Vec<f64>]) -> bool,
) -> Result<(usize, Vec<Vec<f64>>)> {
    for n in 0..=max_iter {
        if done(&vectors) {
            return Ok((n, vectors));
        }
        if n == max_iter {
            break;
        }
        let mut changed = false;
        for v in vectors.iter_mut() {
            changed |= step_in_place(spec, v)?;
        }
        if !changed {
            break;
        }
    }
    Err(PhiError::IterationCapExceeded(max_iter))
}

/// Applies `φ` to every entry; reports whether any entry moved.
fn step_in_place(spec: &PhiSpec, values: &mut [f64]) -> Result<bool> {
    let mut changed = false;
    for v in values.iter_mut() {
        let next = spec.eval(*v)?;
        changed |= next != *v;
        *v = next;
    }
    Ok(changed)
}

/// Least `N ≤ max_iter` with `|φ⁽ᴺ⁾(x0) − target| < tol`, or `None`.
pub fn basin_probe(spec: &PhiSpec, x0: f64, target: f64, tol: f64, max_iter: usize) -> Result<Option<usize>> {
    let mut v = x0;
    for n in 0..=max_iter {
        if (v - target).abs() < tol {
            return Ok(Some(n));
        }
        if n == max_iter {
            break;
        }
        let next = spec.eval(v)?;
        if next == v {
            break;
        }
        v = next;
    }
    Ok(None)
}

/// Sample-based diagnostic of the contraction hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiReport {
    /// Samples with `φ(x) > x + 1e-12`.
    pub above_diagonal: Vec<f64>,
    /// Consecutive samples `(x_i, x_{i+1})` with `φ(x_{i+1}) < φ(x_i)`.
    pub monotonicity: Vec<(f64, f64)>,
    /// Smallest `x − φ(x)` over samples in `(0, 0.5]`.
    pub min_gap_near_zero: Option<f64>,
    /// Smallest `x − φ(x)` over samples in `[0.5, 2]` other than `1`.
    pub min_gap_near_one: Option<f64>,
}

impl PhiReport {
    pub fn is_clean(&self) -> bool {
        self.above_diagonal.is_empty() && self.monotonicity.is_empty()
    }
}

/// Checks `φ(x) ≤ x` and monotonicity on sorted samples, using raw formula values.
pub fn verify_phi_properties(spec: &PhiSpec, grid: &[f64]) -> Result<PhiReport> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(PhiError::InvalidParameter("grid must be sorted".into()));
    }
    let values = grid
        .iter()
        .map(|&x| spec.eval_raw(x))
        .collect::<Result<Vec<_>>>()?;
    let above_diagonal = grid
        .iter()
        .zip(&values)
        .filter(|(&x, &y)| y > x + 1e-12)
        .map(|(&x, _)| x)
        .collect();
    let monotonicity = grid
        .windows(2)
        .zip(values.windows(2))
        .filter(|(_, y)| y[1] < y[0])
        .map(|(x, _)| (x[0], x[1]))
        .collect();
    let min_gap = |lo: f64, hi: f64| {
        grid.iter()
            .zip(&values)
            .filter(|(&x, _)| x > 0.0 && x != 1.0 && (lo..=hi).contains(&x))
            .map(|(&x, &y)| x - y)
            .reduce(f64::min)
    };
    Ok(PhiReport {
        above_diagonal,
        monotonicity,
        min_gap_near_zero: min_gap(0.0, 0.5),
        min_gap_near_one: min_gap(0.5, 2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn variants() -> Vec<PhiSpec> {
        vec![
            PhiSpec::Alpha { a: 0.25 },
            PhiSpec::Alpha { a: 0.5 },
            PhiSpec::Alpha { a: 1.0 },
            PhiSpec::Beta,
            PhiSpec::Gamma,
            PhiSpec::Chi,
            PhiSpec::piecewise_linear(vec![[0.0, 0.0], [0.5, 0.1], [1.0, 1.0], [2.0, 1.5]]).unwrap(),
        ]
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(PhiSpec::Gamma.eval(1.0).unwrap(), 1.0);
        assert!((PhiSpec::Gamma.eval(3.0).unwrap() - 2.25).abs() < 1e-15);
        assert!((PhiSpec::Chi.eval(2.0).unwrap() - 1.6).abs() < 1e-15);
        assert_eq!(PhiSpec::Beta.eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn argument_and_parameter_errors() {
        assert_eq!(PhiSpec::Gamma.eval(-1.0), Err(PhiError::NegativeInput(-1.0)));
        assert!(matches!(
            PhiSpec::Alpha { a: 2.0 }.eval(0.5),
            Err(PhiError::InvalidParameter(_))
        ));
        assert!(PhiSpec::alpha(0.0).is_err());
        assert!(PhiSpec::Gamma.eval(f64::NAN).is_err());
    }

    #[test]
    fn fixed_points() {
        for spec in variants() {
            assert!(spec.eval(0.0).unwrap().abs() <= 1e-15, "{spec}");
            assert!((spec.eval(1.0).unwrap() - 1.0).abs() <= 1e-15, "{spec}");
        }
    }

    #[test]
    fn strict_contraction_off_fixed_points() {
        for spec in variants() {
            for x in grid(0.0, 10.0, 10_001) {
                if x.abs() <= 1e-6 || (x - 1.0).abs() <= 1e-6 {
                    continue;
                }
                let y = spec.eval(x).unwrap();
                assert!(y < x, "{spec}: phi({x}) = {y}");
            }
        }
    }

    #[test]
    fn monotone_on_samples() {
        for spec in variants() {
            let xs = grid(0.0, 10.0, 5001);
            let ys: Vec<f64> = xs.iter().map(|&x| spec.eval(x).unwrap()).collect();
            assert!(ys.windows(2).all(|w| w[0] <= w[1]), "{spec}");
        }
    }

    #[test]
    fn alpha_two_formulas_agree() {
        for a in [0.25, 0.5, 0.75, 1.0] {
            let spec = PhiSpec::Alpha { a };
            for x in grid(1e-3, 10.0, 2000) {
                let sech = x / (a * x.ln()).cosh();
                let algebraic = 2.0 * x.powf(1.0 + a) / (1.0 + x.powf(2.0 * a));
                let y = spec.eval(x).unwrap();
                assert!((y - sech).abs() <= 1e-12, "a={a} x={x}");
                assert!((y - algebraic).abs() <= 1e-12, "a={a} x={x}");
            }
        }
        // alpha_1 is the rational map 2x²/(1+x²)
        for x in grid(0.0, 5.0, 101) {
            let y = PhiSpec::Alpha { a: 1.0 }.eval(x).unwrap();
            assert!((y - 2.0 * x * x / (1.0 + x * x)).abs() <= 1e-14);
        }
    }

    #[test]
    fn gamma_matches_squared_ratio_and_difference_form() {
        for x in grid(0.0, 10.0, 1001) {
            let y = PhiSpec::Gamma.eval(x).unwrap();
            let r = 2.0 * x / (1.0 + x);
            assert!((y - r * r).abs() <= 1e-15);
            let diff = x - x * (1.0 - x).powi(2) / (1.0 + x).powi(2);
            assert!((y - diff).abs() <= 1e-14 * y.max(1.0));
        }
        for x in grid(0.0, 10.0, 1001) {
            let y = PhiSpec::Beta.eval(x).unwrap();
            let diff = x - x * x * (1.0 - x).powi(2) / (1.0 + x).powi(3);
            assert!((y - diff).abs() <= 1e-14 * y.max(1.0));
        }
    }

    #[test]
    fn iterate_examples() {
        assert_eq!(PhiSpec::Gamma.iterate(0.7, 0).unwrap(), 0.7);
        assert!(PhiSpec::Gamma.iterate(0.5, 50).unwrap() < 1e-12);
        let n = basin_probe(&PhiSpec::Gamma, 2.0, 1.0, 1e-6, DEFAULT_MAX_ITER * 10)
            .unwrap()
            .expect("gamma iterates from 2 reach 1");
        let v = PhiSpec::Gamma.iterate(2.0, n).unwrap();
        assert!(v > 1.0 && v - 1.0 < 1e-6);
    }

    #[test]
    fn basin_dichotomy() {
        for spec in variants() {
            let low = spec.iterate(0.9, DEFAULT_MAX_ITER).unwrap();
            let high = spec.iterate(1.1, DEFAULT_MAX_ITER).unwrap();
            assert!(low < 1e-5, "{spec}: {low}");
            assert!(high >= 1.0 && high - 1.0 < 1e-4, "{spec}: {high}");
        }
    }

    #[test]
    fn iterate_vector_examples() {
        // Direct loop for the expected step count.
        let mut x = 0.5_f64;
        let mut steps = 0;
        while x >= 0.1 {
            let r = 2.0 * x / (1.0 + x);
            x = r * r;
            steps += 1;
        }
        let v = GridFunction::new(vec![0.5, 1.0]).unwrap();
        let (n, w) = iterate_vector_until(&PhiSpec::Gamma, &v, 1.5, &[0], 0.1, 1000).unwrap();
        assert_eq!(n, steps);
        assert!(w[0] < 0.1);
        assert_eq!(w[1], 1.0);

        let v = GridFunction::new(vec![1.0]).unwrap();
        let (n, _) = iterate_vector_until(&PhiSpec::Gamma, &v, 1.01, &[], 0.5, 10).unwrap();
        assert_eq!(n, 0);

        let v = GridFunction::new(vec![0.999999999]).unwrap();
        assert_eq!(
            iterate_vector_until(&PhiSpec::Gamma, &v, 1.5, &[0], 0.5, 5),
            Err(PhiError::IterationCapExceeded(5))
        );
    }

    #[test]
    fn iterate_vector_keeps_ones_and_upper_values() {
        let v = GridFunction::new(vec![1.0, 3.0, 1.0 + 1e-9, 0.2]).unwrap();
        for spec in variants() {
            let (_, w) = iterate_vector_until(&spec, &v, 1.001, &[3], 1e-3, 100_000).unwrap();
            assert_eq!(w[0], 1.0);
            assert!(w[1] >= 1.0 && w[2] >= 1.0);
        }
    }

    #[test]
    fn verify_reports() {
        let xs = grid(0.0, 10.0, 10_001);
        assert!(verify_phi_properties(&PhiSpec::Alpha { a: 1.0 }, &xs).unwrap().is_clean());
        assert!(verify_phi_properties(&PhiSpec::Beta, &xs).unwrap().is_clean());
        let bad = PhiSpec::PiecewiseLinear {
            points: vec![[0.0, 0.0], [0.5, 0.7], [1.0, 1.0], [2.0, 1.5]],
        };
        assert!(bad.validate().is_err());
        let report = verify_phi_properties(&bad, &xs).unwrap();
        assert!(!report.above_diagonal.is_empty());
        assert!(report.above_diagonal.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn pwl_validation() {
        let ok = |p: Vec<[f64; 2]>| PhiSpec::piecewise_linear(p).is_ok();
        assert!(ok(vec![[0.0, 0.0], [0.5, 0.2], [1.0, 1.0], [3.0, 2.0]]));
        assert!(!ok(vec![[0.0, 0.0], [0.5, 0.2], [1.0, 1.0]]));
        assert!(!ok(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 1.5]]));
        assert!(!ok(vec![[0.0, 0.0], [0.5, 0.2], [2.0, 1.5]]));
        assert!(!ok(vec![[0.0, 0.0], [0.5, 0.3], [0.4, 0.2], [1.0, 1.0], [2.0, 1.5]]));
        // extension beyond the last breakpoint keeps y < x
        let spec = PhiSpec::piecewise_linear(vec![[0.0, 0.0], [0.5, 0.2], [1.0, 1.0], [2.0, 1.9]]).unwrap();
        for x in grid(2.0, 50.0, 200) {
            assert!(spec.eval_raw(x).unwrap() < x);
        }
    }

    #[test]
    fn json_forms() {
        let cases = [
            (r#"{"variant":"alpha","a":0.5}"#, PhiSpec::Alpha { a: 0.5 }),
            (r#"{"variant":"beta"}"#, PhiSpec::Beta),
            (r#"{"variant":"gamma"}"#, PhiSpec::Gamma),
            (r#"{"variant":"chi"}"#, PhiSpec::Chi),
            (
                r#"{"variant":"pwl","points":[[0,0],[0.5,0.2],[1,1],[2,1.5]]}"#,
                PhiSpec::PiecewiseLinear {
                    points: vec![[0.0, 0.0], [0.5, 0.2], [1.0, 1.0], [2.0, 1.5]],
                },
            ),
        ];
        for (json, spec) in cases {
            let parsed: PhiSpec = serde_json::from_str(json).unwrap();
            assert_eq!(parsed, spec);
            let back: PhiSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
            assert_eq!(back, spec);
        }
    }
}
