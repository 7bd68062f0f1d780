//! Numerics for the upward Loewner equation: hitting times, conformal
//! weldings, traced curves and Loewner energy.
//!
//! Every routine takes an upward driver ξ and evolves real points with
//! ẋ = −2/(x − ξ(t)) until they are welded to the driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driver;
pub mod energy;
pub mod error;
pub mod flow;
pub mod hitting;
pub mod identities;
pub mod par;
mod roots;
pub mod tracer;
pub mod welding;

pub use driver::{Driver, Orientation, PartitionWeldingProblem, Segment};
pub use error::{Error, Result};
pub use flow::{Side, StepPolicy};
