//! Finite preordered spaces and the functions that live on them.
//!
//! A [`FinitePreorder`] is a reflexive, transitive relation on the points
//! `0..size`, stored as a dense boolean matrix. Antisymmetry is never
//! required; [`FinitePreorder::is_order`] reports it separately.
//!
//! Functions on a space are plain value vectors ([`GridFunction`]), and a
//! [`FunctionFamily`] is a non-empty list of them sharing one length. The
//! family induces the preorder `≤_S` ([`order_from_family`]) and the common
//! zero set `N_S` ([`common_zero_set`]).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrderError {
    #[error("relation is not square: row {row} has length {len}, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("relation is empty")]
    Empty,
    #[error("relation is not reflexive at point {0}")]
    NotReflexive(usize),
    #[error("relation is not transitive: {0} <= {1} and {1} <= {2} but not {0} <= {2}")]
    NotTransitive(usize, usize, usize),
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("dimension mismatch: point {index} has dimension {actual}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("scale factor must be strictly positive, got {0}")]
    NonPositiveScale(f64),
    #[error("function value at index {0} is not finite")]
    NonFinite(usize),
    #[error("function family must contain at least one generator")]
    EmptyFamily,
}

pub type Result<T> = std::result::Result<T, OrderError>;

/// A reflexive, transitive relation on a finite point set.
#[derive(Clone, PartialEq, Eq)]
pub struct FinitePreorder {
    size: usize,
    leq: Vec<bool>,
}

impl fmt::Debug for FinitePreorder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FinitePreorder")
            .field("size", &self.size)
            .field("pairs", &self.pairs().collect::<Vec<_>>())
            .finish()
    }
}

fn flatten(relation: &[Vec<bool>]) -> Result<(usize, Vec<bool>)> {
    let size = relation.len();
    if size == 0 {
        return Err(OrderError::Empty);
    }
    let mut flat = Vec::with_capacity(size * size);
    for (row, r) in relation.iter().enumerate() {
        if r.len() != size {
            return Err(OrderError::NotSquare {
                row,
                len: r.len(),
                expected: size,
            });
        }
        flat.extend_from_slice(r);
    }
    Ok((size, flat))
}

impl FinitePreorder {
    /// Checks that `relation` is a preorder and wraps it.
    ///
    /// Reflexivity is checked first; the first transitivity violation in
    /// lexicographic `(x, y, z)` order is reported.
    pub fn validate(relation: &[Vec<bool>]) -> Result<Self> {
        let (size, leq) = flatten(relation)?;
        let p = FinitePreorder { size, leq };
        for x in 0..size {
            if !p.leq(x, x) {
                return Err(OrderError::NotReflexive(x));
            }
        }
        for x in 0..size {
            for y in 0..size {
                if !p.leq(x, y) {
                    continue;
                }
                for z in 0..size {
                    if p.leq(y, z) && !p.leq(x, z) {
                        return Err(OrderError::NotTransitive(x, y, z));
                    }
                }
            }
        }
        Ok(p)
    }

    /// Smallest preorder containing `relation` (Warshall's algorithm plus the diagonal).
    pub fn closure(relation: &[Vec<bool>]) -> Result<Self> {
        let (size, mut leq) = flatten(relation)?;
        for x in 0..size {
            leq[x * size + x] = true;
        }
        for k in 0..size {
            for i in 0..size {
                if !leq[i * size + k] {
                    continue;
                }
                for j in 0..size {
                    if leq[k * size + j] {
                        leq[i * size + j] = true;
                    }
                }
            }
        }
        Ok(FinitePreorder { size, leq })
    }

    /// The discrete order `Δ`: every point related only to itself.
    pub fn discrete(size: usize) -> Self {
        let mut leq = vec![false; size * size];
        for x in 0..size {
            leq[x * size + x] = true;
        }
        FinitePreorder { size, leq }
    }

    /// The indiscrete preorder: every pair related.
    pub fn full(size: usize) -> Self {
        FinitePreorder {
            size,
            leq: vec![true; size * size],
        }
    }

    /// Total order `0 ≤ 1 ≤ … ≤ size-1`.
    pub fn chain(size: usize) -> Self {
        let mut leq = vec![false; size * size];
        for x in 0..size {
            for y in x..size {
                leq[x * size + y] = true;
            }
        }
        FinitePreorder { size, leq }
    }

    /// Componentwise order on a list of points in `ℝ^d`.
    pub fn product_order(points: &[Vec<f64>]) -> Result<Self> {
        let size = points.len();
        if size == 0 {
            return Err(OrderError::Empty);
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(OrderError::DimensionMismatch {
                index: 0,
                expected: 1,
                actual: 0,
            });
        }
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(OrderError::DimensionMismatch {
                    index,
                    expected: dim,
                    actual: p.len(),
                });
            }
        }
        let mut leq = vec![false; size * size];
        for (x, px) in points.iter().enumerate() {
            for (y, py) in points.iter().enumerate() {
                leq[x * size + y] = px.iter().zip(py).all(|(a, b)| a <= b);
            }
        }
        Ok(FinitePreorder { size, leq })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `x ≤ y`.
    #[inline]
    pub fn leq(&self, x: usize, y: usize) -> bool {
        self.leq[x * self.size + y]
    }

    /// All related pairs `(x, y)` with `x ≤ y`, row-major.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.size;
        (0..n * n)
            .filter(move |&i| self.leq[i])
            .map(move |i| (i / n, i % n))
    }

    /// True when the preorder is also antisymmetric.
    pub fn is_order(&self) -> bool {
        (0..self.size).all(|x| (x + 1..self.size).all(|y| !(self.leq(x, y) && self.leq(y, x))))
    }

    /// True when every pair related here is related in `other`.
    pub fn is_subrelation_of(&self, other: &FinitePreorder) -> bool {
        self.size == other.size && self.leq.iter().zip(&other.leq).all(|(&a, &b)| !a || b)
    }

    pub fn to_matrix(&self) -> Vec<Vec<bool>> {
        self.leq.chunks(self.size).map(|r| r.to_vec()).collect()
    }

    fn check_len(&self, actual: usize) -> Result<()> {
        if actual != self.size {
            return Err(OrderError::SizeMismatch {
                expected: self.size,
                actual,
            });
        }
        Ok(())
    }
}

/// A real-valued function on a finite space, stored by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GridFunction(Vec<f64>);

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(OrderError::NonFinite(i));
        }
        Ok(GridFunction(values))
    }

    pub fn constant(len: usize, c: f64) -> Self {
        GridFunction(vec![c; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_non_negative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0)
    }
}

impl TryFrom<Vec<f64>> for GridFunction {
    type Error = OrderError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        GridFunction::new(values)
    }
}

impl From<GridFunction> for Vec<f64> {
    fn from(f: GridFunction) -> Self {
        f.0
    }
}

impl std::ops::Index<usize> for GridFunction {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The generating set `S`: a non-empty list of functions of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyRepr", into = "FamilyRepr")]
pub struct FunctionFamily {
    generators: Vec<GridFunction>,
}

#[derive(Serialize, Deserialize)]
struct FamilyRepr {
    generators: Vec<GridFunction>,
}

impl TryFrom<FamilyRepr> for FunctionFamily {
    type Error = OrderError;

    fn try_from(r: FamilyRepr) -> Result<Self> {
        FunctionFamily::new(r.generators)
    }
}

impl From<FunctionFamily> for FamilyRepr {
    fn from(f: FunctionFamily) -> Self {
        FamilyRepr {
            generators: f.generators,
        }
    }
}

impl FunctionFamily {
    pub fn new(generators: Vec<GridFunction>) -> Result<Self> {
        let first = generators.first().ok_or(OrderError::EmptyFamily)?;
        let len = first.len();
        for g in &generators {
            if g.len() != len {
                return Err(OrderError::SizeMismatch {
                    expected: len,
                    actual: g.len(),
                });
            }
        }
        Ok(FunctionFamily { generators })
    }

    pub fn from_vecs(generators: Vec<Vec<f64>>) -> Result<Self> {
        let gens = generators
            .into_iter()
            .map(GridFunction::new)
            .collect::<Result<Vec<_>>>()?;
        FunctionFamily::new(gens)
    }

    pub fn generators(&self) -> &[GridFunction] {
        &self.generators
    }

    pub fn get(&self, i: usize) -> &GridFunction {
        &self.generators[i]
    }

    /// Number of generators.
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of every generator, i.e. the number of points of the space.
    pub fn point_count(&self) -> usize {
        self.generators[0].len()
    }
}

/// `x ≤ y ⇒ f(x) ≤ f(y)` for every related pair.
pub fn is_isotone(p: &FinitePreorder, f: &GridFunction) -> Result<bool> {
    p.check_len(f.len())?;
    Ok(p.pairs().all(|(x, y)| f[x] <= f[y]))
}

/// The preorder `≤_S` induced by a family: `x ≤_S y` iff `f(x) ≤ f(y)` for all `f ∈ S`.
pub fn order_from_family(size: usize, family: &FunctionFamily) -> Result<FinitePreorder> {
    if family.point_count() != size {
        return Err(OrderError::SizeMismatch {
            expected: size,
            actual: family.point_count(),
        });
    }
    if size == 0 {
        return Err(OrderError::Empty);
    }
    let mut leq = vec![true; size * size];
    for g in family.generators() {
        let v = g.values();
        for x in 0..size {
            for y in 0..size {
                if v[x] > v[y] {
                    leq[x * size + y] = false;
                }
            }
        }
    }
    Ok(FinitePreorder { size, leq })
}

/// `N_S`: indices where every generator is exactly zero.
pub fn common_zero_set(family: &FunctionFamily) -> BTreeSet<usize> {
    (0..family.point_count())
        .filter(|&x| family.generators().iter().all(|g| g[x] == 0.0))
        .collect()
}

/// True iff `p` coincides with `≤_S`.
pub fn generates(p: &FinitePreorder, family: &FunctionFamily) -> Result<bool> {
    p.check_len(family.point_count())?;
    Ok(order_from_family(p.size(), family)? == *p)
}

fn check_same_len(f: &GridFunction, g: &GridFunction) -> Result<()> {
    if f.len() != g.len() {
        return Err(OrderError::SizeMismatch {
            expected: f.len(),
            actual: g.len(),
        });
    }
    Ok(())
}

pub fn add(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    check_same_len(f, g)?;
    GridFunction::new(f.0.iter().zip(&g.0).map(|(a, b)| a + b).collect())
}

pub fn mul(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    check_same_len(f, g)?;
    GridFunction::new(f.0.iter().zip(&g.0).map(|(a, b)| a * b).collect())
}

pub fn scale(lambda: f64, f: &GridFunction) -> Result<GridFunction> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(OrderError::NonPositiveScale(lambda));
    }
    GridFunction::new(f.0.iter().map(|v| lambda * v).collect())
}

/// `max |f − g|`.
pub fn sup_norm_distance(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    check_same_len(f, g)?;
    Ok(f.0
        .iter()
        .zip(&g.0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Schema for a space file: either an explicit relation or a point cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceSpec {
    Relation {
        size: usize,
        leq: Vec<Vec<bool>>,
    },
    Points {
        points: Vec<Vec<f64>>,
        order: PointOrder,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointOrder {
    Product,
    Discrete,
}

impl SpaceSpec {
    /// Builds the preorder; explicit relations must already be reflexive and transitive.
    pub fn build(&self) -> Result<FinitePreorder> {
        match self {
            SpaceSpec::Relation { size, leq } => {
                if leq.len() != *size {
                    return Err(OrderError::SizeMismatch {
                        expected: *size,
                        actual: leq.len(),
                    });
                }
                FinitePreorder::validate(leq)
            }
            SpaceSpec::Points { points, order } => match order {
                PointOrder::Product => FinitePreorder::product_order(points),
                PointOrder::Discrete => {
                    if points.is_empty() {
                        return Err(OrderError::Empty);
                    }
                    Ok(FinitePreorder::discrete(points.len()))
                }
            },
        }
    }
}
