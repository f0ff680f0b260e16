//! Fractional Lévy–Chentsov stable fields and set-indexed Karlin stable
//! processes on ℝⁿ (n ≤ 3), the sphere 𝕊² and the Poincaré disc.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: metric spaces, geodesic distances and isometry groups.
//! * [`mdk`]: separating-set families realising each metric as
//!   `d(x, y) = μ(A_x Δ A_y)`, and the partition-cell masses of finitely
//!   many such sets.
//! * [`parity`]: Poisson parity probabilities over a cell partition and the
//!   `μ_β` masses they induce.
//! * [`sampling`]: symmetric stable generators and exact finite-dimensional
//!   samplers for the Lévy–Chentsov, fractional and sub-stable fields.
//! * [`karlin`]: the Poissonised infinite urn scheme and its scaling limit.
//! * [`verify`]: empirical characteristic functions, covariance checks and
//!   experiment reports.

pub mod error;
pub mod geometry;
pub mod karlin;
pub mod mdk;
pub mod parity;
pub mod quad;
pub mod rng;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{GroupElement, SpaceKind, SpacePoint};
pub use karlin::{KarlinConfig, SignLaw, UrnRealization};
pub use mdk::{Budget, CellMeasureTable, Method, SetFamily};
pub use parity::{FractionalParams, MassMode, ParityVector};
pub use sampling::{FddSample, FieldKind, StableScaleTable};
pub use verify::{CfEstimate, ExperimentReport};
