//! Scenario runner for the `modulus` command-line tool.
//!
//! A scenario is a TOML file naming a curve family, an optional mapping,
//! grids and solver settings. [`run::execute`] runs it and writes a JSON
//! report plus any requested CSV, SVG heatmap or grid dump.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod reference;
pub mod render;
pub mod report;
pub mod run;
pub mod scenario;

pub use run::{execute, Outcome, Overrides};
pub use scenario::Scenario;
