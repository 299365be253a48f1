//! Monotone approximation on preordered spaces.
//!
//! - [`order`]: finite preorders, isotone functions, the order and zero set
//!   induced by a function family.
//! - [`phi`]: contraction maps with fixed points `{0, 1}` and their iterates.
//! - [`engine`]: explicit construction of cone approximants with replayable traces.
//! - [`rational`]: exact non-negative-coefficient polynomials and rational functions.
//! - [`bernstein`]: the monotone Bernstein-type rational operator on `[0, b]`.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bernstein;
pub mod engine;
pub mod order;
pub mod phi;
pub mod rational;

pub use bernstein::{BernsteinOperator, ErrorBoundInputs, TargetFunction};
pub use engine::{ApproxResult, ConeExpr, Construction, Engine, EngineError};
pub use order::{FinitePreorder, FunctionFamily, GridFunction, OrderError};
pub use phi::{PhiError, PhiSpec};
pub use rational::{Mode, NonNegPoly, NonNegRationalFn, RationalError};
