// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod approximation;
pub mod distance;
pub mod cli;
pub mod domain;
pub mod flow;
pub mod geometry;
pub mod good_directions;
pub mod mesh;
pub mod ode;
pub mod quadrature;
pub mod regularity;
pub mod roots;
pub mod spatial;
pub mod topology;

pub use error::{Error, Result};
pub use domain::{C0Domain, FixtureId, Side};
pub use geometry::Point;
