//! Numerical verification of positive intermediate Ricci curvature for
//! doubly warped necks, docking stations, connected sums and plumbings.

pub mod assembly;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod jet;
pub mod kchain;
pub mod neck;
pub mod quadrature;
pub mod report;
pub mod spline;
pub mod topology;

pub use error::{LabError, Result};
