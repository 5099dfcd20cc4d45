//! Numerical p-modulus of curve families and modulus inequalities for
//! winding mappings.
//!
//! The crate is organised bottom-up:
//!
//! * [`curves`]: sampled polyline curves, arc length, normal and
//!   f-representations, line integrals against grid densities.
//! * [`grid`]: rectangular grids and piecewise-constant density fields.
//! * [`family`]: curve families and their generators.
//! * [`modulus`]: the constraint-generation dual-ascent p-modulus solver
//!   and closed-form annulus oracles.
//! * [`mappings`]: the mapping catalog, singular values, inner dilatation,
//!   branch inverses and the winding test.
//! * [`vaisala`]: pushforward densities and the modulus inequality
//!   verification engine.
//!
//! Data-parallel loops go through [`exec::Execution`]; with the default
//! `parallel` feature they run on rayon, otherwise everything is sequential.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod error;
pub mod exec;
pub mod family;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod mappings;
pub mod modulus;
pub mod vaisala;

pub use curves::{Curve, LengthFunction, NormalCurve};
pub use error::{Error, Result};
pub use exec::Execution;
pub use family::{CurveFamily, FamilyKind};
pub use grid::{DensityField, Grid};
pub use mappings::MappingSpec;
pub use modulus::{p_modulus, ModulusReport, SolverOptions};
pub use vaisala::{VerificationReport, VerifyOptions};
