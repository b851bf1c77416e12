//! Stability analysis of modified-gradient systems `x' = P(t)∇f(x)`.
//!
//! The crate finds and classifies critical points of `f`, checks the
//! hypotheses under which a strict local maximum is a uniformly (asymptotically)
//! stable equilibrium, and extracts sublevel-component estimates of its basin of
//! attraction. `P(t)` is a symmetric positive semi-definite matrix path; the
//! eigenvalue condition `∫₀^∞ λ₁(P(t)) dt = ∞` is checked numerically.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basin;
pub mod equilibria;
pub mod expr;
pub mod field;
pub mod gallery;
pub mod linalg;
pub mod ode;
pub mod stability;

pub use basin::{check_hypotheses, extract_component, verify_basin, BasinError, BasinVerification, GridComponent};
pub use equilibria::{find_critical_points, Classification, CriticalPoint, EquilibriaError, Isolation};
pub use expr::{ExprError, Expression};
pub use field::{BoxDomain, FieldError, MatrixPath, ScalarField, System};
pub use gallery::{GalleryEntry, GalleryError, GalleryId};
pub use linalg::{LinalgError, SymMatrix};
pub use ode::{simulate, OdeError, SimulateOptions, Status, Trajectory};
pub use stability::{certify, ec_check, Conclusion, EcKind, EcVerdict, StabilityError, StabilityReport};
