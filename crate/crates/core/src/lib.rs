//! Local dimension exponents on finite samples of compact metric spaces.
//!
//! The crate generates variable-dimensional fractal samples, builds
//! epsilon-nets and walk graphs on them, solves exit-time equations for
//! discrete and measure-driven random walks, estimates the local Hausdorff
//! dimension and walk exponent, and analyses the killed walk operators.

pub mod chain;
pub mod error;
pub mod exponents;
pub mod fractal;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod nets;
pub mod spectral;
pub mod walks;

pub use error::{Error, Result};
pub use geometry::{BallSpec, MeasureWeights, Point, PointCloud};
