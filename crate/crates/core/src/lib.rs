//! Positive extensions of linear functionals, representing measures on
//! finite measurable spaces, and 1-D truncated moment problems.
//!
//! Every constructed object is checked numerically: extensions by an LP
//! over the normalized cone slice, measures by their integration residuals,
//! atomic measures by moment matching.

pub mod cli;
pub mod error;
pub mod extend;
pub mod funcspace;
pub mod linalg;
pub mod lp;
pub mod measure;
pub mod moments;

pub use error::{Error, Result};
pub use extend::{Functional, Rule};
pub use funcspace::{FunctionVec, GroundSet, Subspace};
pub use measure::{Measure, SigmaAlgebra};
pub use moments::{AtomicMeasure, MomentSequence, Poly, Support};
