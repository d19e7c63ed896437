//! Scoring rule markets, cost-function market makers, and checkers for the
//! market axioms they may or may not satisfy.

pub mod axioms;
pub mod belief;
pub mod contract;
pub mod convex;
pub mod costmarket;
pub mod engine;
pub mod error;
pub mod ext;
mod numeric;
pub mod outcome;
pub mod scoring;
pub mod transform;
pub mod verdict;

pub use belief::{Belief, PiecewiseCdf};
pub use contract::{Contract, RealContract};
pub use error::{Error, Result};
pub use ext::ExtReal;
pub use outcome::{Outcome, OutcomeSpace};
pub use transform::Transform;
