//! Spectral analysis of two-interval Sturm-Liouville transmission problems
//!
//! ```text
//! p(x) u'' + A u = lambda u   on [-1, 0) U (0, 1]
//! ```
//!
//! with piecewise constant nonzero stiffness `p`, separated conditions at the
//! outer ends, two transmission conditions at the interior point, and a
//! bounded perturbation `A` (multiplication, first-order or integral).
//!
//! The crate offers two independent engines:
//!
//! * [`shooting`]: characteristic determinant, real scans, argument-principle
//!   counting, eigenfunctions.
//! * [`discrete`]: a second-order finite-difference discretization and its
//!   dense spectrum, plus nonhomogeneous solves.
//!
//! On top of these sit asymptotic checks ([`analysis`]), spectral projectors
//! and Abel-Lidskii summation ([`abel`]), and numeric verification of the
//! structural estimates ([`verify`]).

// `!(x > 0.0)` guards are deliberate: they reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abel;
pub mod analysis;
pub mod discrete;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod shooting;
pub mod verify;

pub use abel::{AbelExpansion, AbelSettings, ProjectorRecord};
pub use analysis::{
    AsymptoticFit, BranchedSpectrum, CountingLawTable, LeadingCoefficients, Sector,
};
pub use discrete::{BrokenGrid, DiscreteOperator, ReducedOperator};
pub use error::{Error, Result};
pub use linalg::C64;
pub use problem::{
    condition_values, project_to_domain, symmetry_defect, validate_problem, BrokenFunction,
    Coefficients, ConditionValues, InterfaceTraces, PerturbationSpec, Seed, SeedPiece,
    StiffnessCase, TransmissionProblem,
};
pub use shooting::{Branch, EigenvalueRecord, Source};
pub use verify::{Status, VerificationReport};
