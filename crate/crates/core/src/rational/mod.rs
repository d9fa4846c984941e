//! Exact multivariate rational functions over the Gaussian rationals,
//! divisor bookkeeping and pole orders.

mod chart;
mod gaussian;
pub mod gcd;
pub mod linear;
mod matrix;
pub mod numeric;
pub mod parse;
mod poly;
mod ratfn;

pub use chart::{Chart, ComponentLabel, DivisorComponent, GraphForm, Straightening};
pub use gaussian::GaussianRational;
pub use matrix::RatMatrix;
pub use numeric::{CompiledMatrix, CompiledRational};
pub use parse::{parse_constant, parse_rational, ExprError};
pub use poly::{Monomial, MultiPoly};
pub use ratfn::{order_along, partial, poly_order, vanishes_on, Order, RationalFn, DEFAULT_EVAL_FLOOR};
