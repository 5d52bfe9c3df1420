//! Grid-based tools for quasiequilibrium problems on convex compact sets.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: convex bodies, projection, lattice grids and relative
//!   interior/boundary classification of node sets.
//! * [`bifunction`]: expression parsing and evaluation of `f(x, y)`.
//! * [`floats`]: serde codecs that keep infinite values in reports.
//! * [`setmap`]: set-valued maps with membership, distance and sampling.
//! * [`analysis`]: falsifiers for semicontinuity and openness properties.
//! * [`selection`]: approximate continuous selections and fixed points.
//! * [`solver`]: fixed-point sets, equilibrium and quasiequilibrium solvers,
//!   hypothesis reports.
//! * [`problem`] and [`report`]: problem descriptors, builtins and the JSON
//!   report consumed by the `qep` binary.

pub mod analysis;
pub mod bifunction;
pub mod floats;
pub mod geometry;
pub mod problem;
pub mod report;
pub mod selection;
pub mod setmap;
pub mod solver;

pub use geometry::{make_grid, ConvexBody, Grid, NodeSet, Point};
