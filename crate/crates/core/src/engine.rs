//! Constructive density on finite preordered spaces.
//!
//! Given a family `S` of non-negative isotone functions that generates the
//! preorder, every non-negative isotone target vanishing on the common zero
//! set of `S` can be approximated uniformly by elements of the smallest set
//! containing `S` that is closed under sums, positive scaling and `φ`. This
//! module carries out that construction explicitly: point separation, set
//! separation, constant approximation and the level-set assembly, each
//! returning the function together with a [`ConeExpr`] that rebuilds it from
//! the generators.

use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::order::{
    common_zero_set, generates, is_isotone, sup_norm_distance, FinitePreorder, FunctionFamily,
    GridFunction, OrderError,
};
use crate::phi::{iterate_many_until, iterate_until, PhiError, PhiSpec, DEFAULT_MAX_ITER};

/// Tolerance for replaying a trace against its recorded values.
pub const TRACE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("invalid phi: {0}")]
    Phi(PhiError),
    #[error("iteration cap of {0} exceeded")]
    IterationCapExceeded(usize),
    #[error("no generator separates point {a} from point {b}")]
    NotSeparable { a: usize, b: usize },
    #[error("point {b} lies below point {a}, so they cannot be separated upward")]
    PairwiseOrderViolation { a: usize, b: usize },
    #[error("the {0} set is empty")]
    EmptySet(&'static str),
    #[error("point {0} belongs to both sets")]
    SetsOverlap(usize),
    #[error("point index {0} is out of range")]
    IndexOutOfRange(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("a positive constant cannot be approximated: the generators share zeros {0:?}")]
    ConstantNotApproximable(Vec<usize>),
    #[error("value {value} at point {index} lies outside [{lo}, {hi}]")]
    RangeViolation {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("TargetNegative: target is negative at point {0}")]
    TargetNegative(usize),
    #[error("TargetNotIsotone: {x} <= {y} but target({x}) > target({y})")]
    TargetNotIsotone { x: usize, y: usize },
    #[error("TargetNonzeroOnNS: target is nonzero at common zero {0}")]
    TargetNonzeroOnNS(usize),
    #[error("NotGenerating: the family does not generate the preorder")]
    NotGenerating,
    #[error("generator {0} has a negative value")]
    GeneratorNegative(usize),
    #[error("generator {0} is not isotone")]
    GeneratorNotIsotone(usize),
    #[error("target range {0} needs more than {1} levels")]
    TooManyLevels(f64, usize),
    #[error("postcondition failed: {0}")]
    PostconditionFailed(String),
    #[error("trace replay differs from the constructed values by {0}")]
    TraceMismatch(f64),
    #[error("sup error {sup_error} is not below the bound {bound}")]
    BoundViolated { sup_error: f64, bound: f64 },
}

impl EngineError {
    /// Whether the error signals a broken internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            EngineError::PostconditionFailed(_)
                | EngineError::TraceMismatch(_)
                | EngineError::BoundViolated { .. }
        )
    }
}

impl From<PhiError> for EngineError {
    fn from(e: PhiError) -> Self {
        match e {
            PhiError::IterationCapExceeded(n) => EngineError::IterationCapExceeded(n),
            other => EngineError::Phi(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, EngineError>;

/// Expression over the generators built from sums, positive scalings and
/// `φ` iterates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum ConeExpr {
    Gen { index: usize },
    Sum { terms: Vec<ConeExpr> },
    Scale { factor: f64, child: Box<ConeExpr> },
    Phi { n: usize, child: Box<ConeExpr> },
}

impl ConeExpr {
    /// Evaluates the expression against the generator values.
    ///
    /// Identical `φ` subtrees are evaluated once.
    pub fn eval(&self, family: &FunctionFamily, phi: &PhiSpec) -> Result<GridFunction> {
        let mut memo = HashMap::new();
        Ok(GridFunction::new(self.eval_vec(family, phi, &mut memo)?)?)
    }

    fn eval_vec<'a>(
        &'a self,
        family: &FunctionFamily,
        phi: &PhiSpec,
        memo: &mut HashMap<&'a ConeExpr, Vec<f64>>,
    ) -> Result<Vec<f64>> {
        match self {
            ConeExpr::Gen { index } => {
                if *index >= family.len() {
                    return Err(EngineError::IndexOutOfRange(*index));
                }
                Ok(family.get(*index).values().to_vec())
            }
            ConeExpr::Sum { terms } => {
                let mut iter = terms.iter();
                let first = iter
                    .next()
                    .ok_or_else(|| EngineError::InvalidParameter("empty sum".into()))?;
                let mut acc = first.eval_vec(family, phi, memo)?;
                for t in iter {
                    for (a, v) in acc.iter_mut().zip(t.eval_vec(family, phi, memo)?) {
                        *a += v;
                    }
                }
                Ok(acc)
            }
            ConeExpr::Scale { factor, child } => {
                if !(*factor > 0.0) || !factor.is_finite() {
                    return Err(EngineError::InvalidParameter(format!("scale factor {factor}")));
                }
                let mut v = child.eval_vec(family, phi, memo)?;
                v.iter_mut().for_each(|x| *x *= factor);
                Ok(v)
            }
            ConeExpr::Phi { n, child } => {
                if let Some(v) = memo.get(self) {
                    return Ok(v.clone());
                }
                let v = phi.apply_n(&child.eval_vec(family, phi, memo)?, *n)?;
                memo.insert(self, v.clone());
                Ok(v)
            }
        }
    }

    /// Total number of `φ` applications, counting repeated subtrees each time.
    pub fn phi_count(&self) -> usize {
        match self {
            ConeExpr::Gen { .. } => 0,
            ConeExpr::Sum { terms } => terms.iter().map(ConeExpr::phi_count).sum(),
            ConeExpr::Scale { child, .. } => child.phi_count(),
            ConeExpr::Phi { n, child } => n + child.phi_count(),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + match self {
            ConeExpr::Gen { .. } => 0,
            ConeExpr::Sum { terms } => terms.iter().map(ConeExpr::node_count).sum(),
            ConeExpr::Scale { child, .. } | ConeExpr::Phi { child, .. } => child.node_count(),
        }
    }

    /// Structural validity: positive finite factors, non-empty sums,
    /// positive iterate counts and generator indices below `generators`.
    pub fn is_well_formed(&self, generators: usize) -> bool {
        match self {
            ConeExpr::Gen { index } => *index < generators,
            ConeExpr::Sum { terms } => {
                !terms.is_empty() && terms.iter().all(|t| t.is_well_formed(generators))
            }
            ConeExpr::Scale { factor, child } => {
                *factor > 0.0 && factor.is_finite() && child.is_well_formed(generators)
            }
            ConeExpr::Phi { n, child } => *n >= 1 && child.is_well_formed(generators),
        }
    }
}

// Factors are finite, so bitwise hashing agrees with `==` except for the sign of zero, which never occurs.
impl Eq for ConeExpr {}

impl Hash for ConeExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            ConeExpr::Gen { index } => index.hash(state),
            ConeExpr::Sum { terms } => terms.hash(state),
            ConeExpr::Scale { factor, child } => {
                factor.to_bits().hash(state);
                child.hash(state);
            }
            ConeExpr::Phi { n, child } => {
                n.hash(state);
                child.hash(state);
            }
        }
    }
}

/// A function on the space with the expression that produces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub function: GridFunction,
    pub trace: ConeExpr,
}

/// Result of [`Engine::approximate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxResult {
    pub approximant: GridFunction,
    pub sup_error: f64,
    pub bound: f64,
    pub iterations_used: usize,
    pub levels: usize,
    pub phi: PhiSpec,
    pub trace: ConeExpr,
}

/// Level sets of a function normalized to `[m, m+1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSets {
    pub lower: Vec<BTreeSet<usize>>,
    pub upper: Vec<BTreeSet<usize>>,
}

/// `lower[i] = {f ≤ m + i/n}` and `upper[i] = {f ≥ m + (i+1)/n}` for `i < n`.
pub fn level_sets(f: &GridFunction, m: f64, n: usize) -> Result<LevelSets> {
    if n < 2 {
        return Err(EngineError::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    if !m.is_finite() {
        return Err(EngineError::InvalidParameter(format!("offset {m}")));
    }
    let slack = 1e-12;
    if let Some((index, &value)) = f
        .values()
        .iter()
        .enumerate()
        .find(|(_, &v)| v < m - slack || v > m + 1.0 + slack)
    {
        return Err(EngineError::RangeViolation {
            index,
            value,
            lo: m,
            hi: m + 1.0,
        });
    }
    let step = |i: usize| m + i as f64 / n as f64;
    let select = |keep: &dyn Fn(f64) -> bool| -> BTreeSet<usize> {
        f.values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| keep(v))
            .map(|(i, _)| i)
            .collect()
    };
    Ok(LevelSets {
        lower: (0..n).map(|i| select(&|v| v <= step(i))).collect(),
        upper: (0..n).map(|i| select(&|v| v >= step(i + 1))).collect(),
    })
}

type SeparatorCache = HashMap<(usize, usize), Built>;

#[derive(Debug, Clone)]
struct Built {
    values: Vec<f64>,
    expr: ConeExpr,
}

impl Built {
    fn generator(family: &FunctionFamily, index: usize) -> Self {
        Built {
            values: family.get(index).values().to_vec(),
            expr: ConeExpr::Gen { index },
        }
    }

    fn scaled(self, factor: f64) -> Self {
        Built {
            values: self.values.iter().map(|v| v * factor).collect(),
            expr: ConeExpr::Scale {
                factor,
                child: Box::new(self.expr),
            },
        }
    }

    /// Divides by `d`; the expression records the factor `1/d`.
    fn divided(self, d: f64) -> Self {
        Built {
            values: self.values.iter().map(|v| v / d).collect(),
            expr: ConeExpr::Scale {
                factor: 1.0 / d,
                child: Box::new(self.expr),
            },
        }
    }

    /// Values already iterated `n` times elsewhere; only the expression is wrapped.
    fn iterated(expr: ConeExpr, n: usize, values: Vec<f64>) -> Self {
        let expr = if n == 0 {
            expr
        } else {
            ConeExpr::Phi {
                n,
                child: Box::new(expr),
            }
        };
        Built { values, expr }
    }

    fn sum(mut parts: Vec<Built>) -> Self {
        if parts.len() == 1 {
            return parts.pop().expect("one part");
        }
        let mut values = parts[0].values.clone();
        for p in &parts[1..] {
            for (a, v) in values.iter_mut().zip(&p.values) {
                *a += v;
            }
        }
        Built {
            values,
            expr: ConeExpr::Sum {
                terms: parts.into_iter().map(|p| p.expr).collect(),
            },
        }
    }

    fn into_construction(self) -> Construction {
        Construction {
            function: GridFunction::new(self.values).expect("constructed values are finite"),
            trace: self.expr,
        }
    }
}

fn max_over(values: &[f64], idx: impl IntoIterator<Item = usize>) -> f64 {
    idx.into_iter().map(|i| values[i]).fold(f64::NEG_INFINITY, f64::max)
}

fn min_over(values: &[f64], idx: impl IntoIterator<Item = usize>) -> f64 {
    idx.into_iter().map(|i| values[i]).fold(f64::INFINITY, f64::min)
}

fn max_all(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// A validated preorder, generating family and `φ`.
#[derive(Debug, Clone)]
pub struct Engine {
    order: FinitePreorder,
    family: FunctionFamily,
    phi: PhiSpec,
    max_iter: usize,
    zeros: BTreeSet<usize>,
    // Point separators depend only on the pair, so they are kept across calls.
    separators: Arc<Mutex<SeparatorCache>>,
}

impl Engine {
    /// Checks that `family` consists of non-negative isotone functions that
    /// generate `order`, and that `phi` satisfies its hypotheses.
    pub fn new(order: FinitePreorder, family: FunctionFamily, phi: PhiSpec) -> Result<Self> {
        phi.validate()?;
        if family.point_count() != order.size() {
            return Err(OrderError::SizeMismatch {
                expected: order.size(),
                actual: family.point_count(),
            }
            .into());
        }
        for (i, g) in family.generators().iter().enumerate() {
            if !g.is_non_negative() {
                return Err(EngineError::GeneratorNegative(i));
            }
            if !is_isotone(&order, g)? {
                return Err(EngineError::GeneratorNotIsotone(i));
            }
        }
        if !generates(&order, &family)? {
            return Err(EngineError::NotGenerating);
        }
        let zeros = common_zero_set(&family);
        Ok(Engine {
            order,
            family,
            phi,
            max_iter: DEFAULT_MAX_ITER,
            zeros,
            separators: Arc::default(),
        })
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self.separators = Arc::default();
        self
    }

    pub fn order(&self) -> &FinitePreorder {
        &self.order
    }

    pub fn family(&self) -> &FunctionFamily {
        &self.family
    }

    pub fn phi(&self) -> &PhiSpec {
        &self.phi
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn zero_set(&self) -> &BTreeSet<usize> {
        &self.zeros
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.order.size() {
            return Err(EngineError::IndexOutOfRange(i));
        }
        Ok(())
    }

    fn check_unit(name: &str, eps: f64) -> Result<()> {
        if eps > 0.0 && eps < 1.0 {
            Ok(())
        } else {
            Err(EngineError::InvalidParameter(format!("{name} must lie in (0, 1), got {eps}")))
        }
    }

    /// A cone element `f` with `0 ≤ f ≤ 1+ε`, `f(a) < ε` and `f(b) = 1`.
    ///
    /// Requires `b ≰ a`.
    pub fn separate_points(&self, a: usize, b: usize, eps: f64) -> Result<Construction> {
        Ok(self.point_separator(a, b, eps)?.into_construction())
    }

    fn point_separator(&self, a: usize, b: usize, eps: f64) -> Result<Built> {
        self.check_index(a)?;
        self.check_index(b)?;
        Self::check_unit("epsilon", eps)?;
        if self.order.leq(b, a) {
            return Err(EngineError::PairwiseOrderViolation { a, b });
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, g) in self.family.generators().iter().enumerate() {
            if g[a] < g[b] {
                let ratio = g[a] / g[b];
                if best.is_none_or(|(r, _)| ratio < r) {
                    best = Some((ratio, i));
                }
            }
        }
        let (_, index) = best.ok_or(EngineError::NotSeparable { a, b })?;
        // division keeps the value at b exactly 1
        let normalized = Built::generator(&self.family, index).divided(self.family.get(index)[b]);
        let hi = 1.0 + eps;
        let (n, w) = iterate_until(&self.phi, normalized.values, self.max_iter, |w| {
            w[a] < eps && max_all(w) <= hi
        })?;
        let built = Built::iterated(normalized.expr, n, w);
        let v = &built.values;
        if !((v[b] - 1.0).abs() <= 1e-12 && v[a] < eps && max_all(v) <= hi && v.iter().all(|&x| x >= 0.0)) {
            return Err(EngineError::PostconditionFailed(format!(
                "point separator for ({a}, {b}) misses its bounds"
            )));
        }
        Ok(built)
    }

    /// A cone element `f` with `f < δ` on `lower`, `1 < f < 1+δ` on `upper`
    /// and `0 ≤ f < 1+δ` everywhere.
    ///
    /// Requires disjoint non-empty sets with no point of `upper` below a
    /// point of `lower`.
    pub fn separate_sets(&self, lower: &[usize], upper: &[usize], delta: f64) -> Result<Construction> {
        let mut cache = self.separator_cache();
        Ok(self.set_separator(lower, upper, delta, &mut cache)?.into_construction())
    }

    /// Tolerance of the point separators averaged inside set separation.
    ///
    /// Below `1/(2k−1)` for every `k ≤ |X|`, so their average already stays
    /// below `1 − (1−ε)/(2k)` on the lower set; it does not depend on δ, so
    /// one separator per pair serves every level.
    fn separator_cache(&self) -> MutexGuard<'_, SeparatorCache> {
        self.separators.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn inner_eps(&self) -> f64 {
        0.5 / self.order.size() as f64
    }

    fn set_separator(
        &self,
        lower: &[usize],
        upper: &[usize],
        delta: f64,
        cache: &mut SeparatorCache,
    ) -> Result<Built> {
        Self::check_unit("delta", delta)?;
        let lower: BTreeSet<usize> = lower.iter().copied().collect();
        let upper: BTreeSet<usize> = upper.iter().copied().collect();
        if lower.is_empty() {
            return Err(EngineError::EmptySet("lower"));
        }
        if upper.is_empty() {
            return Err(EngineError::EmptySet("upper"));
        }
        for &i in lower.iter().chain(&upper) {
            self.check_index(i)?;
        }
        if let Some(&x) = lower.intersection(&upper).next() {
            return Err(EngineError::SetsOverlap(x));
        }
        for &a in &lower {
            for &b in &upper {
                if self.order.leq(b, a) {
                    return Err(EngineError::PairwiseOrderViolation { a, b });
                }
            }
        }

        // One separator per greedily chosen point of `upper`, each exceeding 1
        // on the points it covers.
        let mut uncovered = upper.clone();
        let mut pieces = Vec::new();
        while let Some(&b) = uncovered.iter().next() {
            let piece = self.cover_piece(&lower, b, delta, cache)?;
            uncovered.retain(|&x| !(piece.values[x] > 1.0));
            pieces.push(piece);
        }

        // Push every piece far enough below δ/l on `lower` that their sum stays below δ.
        let l = pieces.len();
        let share = delta / l as f64;
        let (exprs, vectors): (Vec<_>, Vec<_>) = pieces.into_iter().map(|p| (p.expr, p.values)).unzip();
        let (r, vectors) = iterate_many_until(&self.phi, vectors, self.max_iter, |vs| {
            vs.iter().all(|v| max_over(v, lower.iter().copied()) < share)
        })?;
        let sum = Built::sum(
            exprs
                .into_iter()
                .zip(vectors)
                .map(|(e, v)| Built::iterated(e, r, v))
                .collect(),
        );

        let hi = 1.0 + delta;
        let (s, w) = iterate_until(&self.phi, sum.values, self.max_iter, |w| max_all(w) < hi)?;
        let built = Built::iterated(sum.expr, s, w);
        let v = &built.values;
        if !(max_over(v, lower.iter().copied()) < delta
            && min_over(v, upper.iter().copied()) > 1.0
            && max_all(v) < hi
            && v.iter().all(|&x| x >= 0.0))
        {
            return Err(EngineError::PostconditionFailed(
                "set separator misses its bounds".into(),
            ));
        }
        Ok(built)
    }

    /// Separator of all of `lower` from `b`: below δ on `lower`, above 1 at
    /// `b`, below 1+δ everywhere.
    fn cover_piece(
        &self,
        lower: &BTreeSet<usize>,
        b: usize,
        delta: f64,
        cache: &mut SeparatorCache,
    ) -> Result<Built> {
        let k = lower.len();
        let eps = self.inner_eps();
        let mut seps = Vec::with_capacity(k);
        for &a in lower {
            let sep = match cache.get(&(a, b)) {
                Some(s) => s.clone(),
                None => {
                    let s = self.point_separator(a, b, eps)?;
                    cache.insert((a, b), s.clone());
                    s
                }
            };
            seps.push(sep);
        }

        // Average of iterated point separators, bounded away from 1 on `lower`.
        let joint = if k == 1 {
            seps.into_iter().next().expect("one separator")
        } else {
            let target = 1.0 - (1.0 - eps) / (2.0 * k as f64);
            let (exprs, vectors): (Vec<_>, Vec<_>) = seps.into_iter().map(|p| (p.expr, p.values)).unzip();
            let mean = |vs: &[Vec<f64>], x: usize| vs.iter().map(|v| v[x]).sum::<f64>() / k as f64;
            let (n, vectors) = iterate_many_until(&self.phi, vectors, self.max_iter, |vs| {
                lower.iter().all(|&a| mean(vs, a) <= target)
            })?;
            let sum = Built::sum(
                exprs
                    .into_iter()
                    .zip(vectors)
                    .map(|(e, v)| Built::iterated(e, n, v))
                    .collect(),
            );
            sum.divided(k as f64)
        };

        let top = max_over(&joint.values, lower.iter().copied());
        if !(top < 1.0) {
            return Err(EngineError::PostconditionFailed(format!(
                "averaged separator reaches {top} on the lower set"
            )));
        }
        let alpha = (top + 1.0) / 2.0;
        let lifted = joint.divided(alpha);
        let hi = 1.0 + delta;
        let (m, w) = iterate_until(&self.phi, lifted.values, self.max_iter, |w| {
            max_over(w, lower.iter().copied()) < delta && max_all(w) < hi && w[b] > 1.0
        })?;
        Ok(Built::iterated(lifted.expr, m, w))
    }

    /// A cone element `g` with `λ ≤ g < λ + ε` everywhere.
    ///
    /// A positive `λ` needs the generators to have no common zero.
    pub fn approximate_constant(&self, lambda: f64, eps: f64) -> Result<Construction> {
        Ok(self.constant(lambda, eps)?.into_construction())
    }

    fn constant(&self, lambda: f64, eps: f64) -> Result<Built> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(EngineError::InvalidParameter(format!("constant {lambda}")));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(EngineError::InvalidParameter(format!("epsilon {eps}")));
        }
        if lambda == 0.0 {
            let g = Built::generator(&self.family, 0);
            let top = max_all(&g.values);
            let mut j = (top / eps).floor().max(0.0) as u64 + 1;
            loop {
                let scaled = g.clone().scaled(1.0 / j as f64);
                if max_all(&scaled.values) < eps {
                    return Ok(scaled);
                }
                j += 1;
            }
        }
        if !self.zeros.is_empty() {
            return Err(EngineError::ConstantNotApproximable(self.zeros.iter().copied().collect()));
        }
        // Sum just enough generators to be positive everywhere.
        let size = self.order.size();
        let mut covered = vec![false; size];
        let mut parts = Vec::new();
        for i in 0..self.family.len() {
            let g = self.family.get(i);
            if (0..size).any(|x| !covered[x] && g[x] > 0.0) {
                (0..size).filter(|&x| g[x] > 0.0).for_each(|x| covered[x] = true);
                parts.push(Built::generator(&self.family, i));
            }
            if covered.iter().all(|&c| c) {
                break;
            }
        }
        let sum = Built::sum(parts);
        let low = sum.values.iter().copied().fold(f64::INFINITY, f64::min);
        // division keeps the minimum exactly 1
        let lifted = sum.divided(low);
        let top = lambda + eps;
        let (n, w) = iterate_until(&self.phi, lifted.values, self.max_iter, |w| {
            w.iter().all(|&v| v >= 1.0 && lambda * v < top)
        })?;
        let built = Built::iterated(lifted.expr, n, w).scaled(lambda);
        if !built.values.iter().all(|&v| v >= lambda && v < top) {
            return Err(EngineError::PostconditionFailed(format!(
                "constant approximant leaves [{lambda}, {top})"
            )));
        }
        Ok(built)
    }

    fn check_target(&self, f: &GridFunction) -> Result<()> {
        if f.len() != self.order.size() {
            return Err(OrderError::SizeMismatch {
                expected: self.order.size(),
                actual: f.len(),
            }
            .into());
        }
        if let Some(i) = f.values().iter().position(|&v| v < 0.0) {
            return Err(EngineError::TargetNegative(i));
        }
        if let Some((x, y)) = self.order.pairs().find(|&(x, y)| f[x] > f[y]) {
            return Err(EngineError::TargetNotIsotone { x, y });
        }
        if let Some(&i) = self.zeros.iter().find(|&&i| f[i] != 0.0) {
            return Err(EngineError::TargetNonzeroOnNS(i));
        }
        Ok(())
    }

    /// A cone element within `3/n` of `f` in the sup norm.
    ///
    /// Targets whose range `M − m` exceeds 1 are split into
    /// `⌈n(M − m)⌉` levels, so the bound holds in the target's own units.
    pub fn approximate(&self, f: &GridFunction, n: usize) -> Result<ApproxResult> {
        if n < 2 {
            return Err(EngineError::InvalidParameter(format!("need n >= 2, got {n}")));
        }
        self.check_target(f)?;
        let (m, big_m) = (f.min(), f.max());
        let (built, levels) = if m == big_m {
            (self.constant(m, 1.0 / n as f64)?, 0)
        } else {
            self.assemble(f, n, big_m - m)?
        };
        let phi_steps = built.expr.phi_count();
        let Construction { function, trace } = built.into_construction();
        let replay = trace.eval(&self.family, &self.phi)?;
        let drift = sup_norm_distance(&replay, &function)?;
        if !(drift <= TRACE_TOLERANCE) {
            return Err(EngineError::TraceMismatch(drift));
        }
        let sup_error = sup_norm_distance(f, &function)?;
        let bound = 3.0 / n as f64;
        if !(sup_error < bound) {
            return Err(EngineError::BoundViolated { sup_error, bound });
        }
        Ok(ApproxResult {
            approximant: function,
            sup_error,
            bound,
            iterations_used: phi_steps,
            levels,
            phi: self.phi.clone(),
            trace,
        })
    }

    fn assemble(&self, f: &GridFunction, n: usize, range: f64) -> Result<(Built, usize)> {
        const MAX_LEVELS: usize = 1 << 16;
        let wanted = (n as f64 * range).ceil();
        if !(wanted <= MAX_LEVELS as f64) {
            return Err(EngineError::TooManyLevels(range, MAX_LEVELS));
        }
        let levels = n.max(wanted as usize);
        let delta = 1.0 / levels as f64;
        let normalized = GridFunction::new(f.values().iter().map(|v| v / range).collect())?;
        let base = normalized.min();
        let sets = level_sets(&normalized, base, levels)?;

        let mut cache = self.separator_cache();
        let mut steps = Vec::with_capacity(levels);
        for (lower, upper) in sets.lower.iter().zip(&sets.upper) {
            let lower: Vec<usize> = lower.iter().copied().collect();
            let upper: Vec<usize> = upper.iter().copied().collect();
            let step = if upper.is_empty() {
                self.constant(0.0, delta)?
            } else {
                self.set_separator(&lower, &upper, delta, &mut cache)?
            };
            steps.push(step);
        }
        let offset = self.constant(base, delta)?;
        let stairs = Built::sum(steps).scaled(delta);
        Ok((Built::sum(vec![offset, stairs]).scaled(range), levels))
    }
}
