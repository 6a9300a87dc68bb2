//! Domain walls in notched nanowires.
//!
//! The wire cross-section `s(x)` dips below 1 on `[-a, a]`. A planar wall is
//! described by its lifting angle `theta(x)`, which runs from `-pi/2` to `pi/2`
//! and minimizes the weighted energy
//! `E_s(theta) = 1/2 int theta'^2 s + 1/2 int cos^2(theta) s`.
//!
//! Modules, bottom up:
//! - [`profile`]: notch profiles, classification and the change of variable `y(x) = int_0^x 1/s`.
//! - [`field`]: grids, angle and magnetization fields, lifting and separatrix tails.
//! - [`energy`]: discrete energy, gradient, weighted inner product, first-integral defect.
//! - [`transforms`]: energy nonincreasing rearrangements and localization.
//! - [`solver`]: minimization, shooting, multi-start uniqueness and decay checks.
//! - [`spectral`]: linearized operators and coercivity.
//! - [`dynamics`]: Landau-Lifshitz-Gilbert relaxation.
//! - [`paths`]: convex paths in cos-space and the composite path.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod energy;
mod error;
pub mod field;
pub mod linalg;
pub mod paths;
pub mod profile;
pub mod solver;
pub mod spectral;
pub mod transforms;

pub use error::{Error, Result};
pub use field::{separatrix, AngleField, Grid, MagnetizationField, RotationAngle};
pub use profile::{NotchProfile, ProfileSpec};
