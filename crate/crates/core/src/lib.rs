//! Fractional s-perimeters on uniform grids.
//!
//! The crate discretizes sets as unions of grid cells (a cell belongs to a set
//! iff its center does) and evaluates the nonlocal interaction
//! `L_s(A, B) = ∫_A ∫_B |x - y|^{-n-s} dx dy` exactly for such unions, up to
//! the quadrature error of the precomputed cell-pair weights. On top of that it
//! provides the s-perimeter and its local/nonlocal split, the relaxed
//! functional used by the generalized coarea formula, mollification and
//! thresholding pipelines, a convex-relaxation solver for s-minimal sets with
//! a brute-force oracle, and the cylinder/subgraph experiments.
//!
//! Module map:
//!
//! * [`grid`]: grid geometry, sets, fields, windows, signed distance.
//! * [`kernel`]: cell-pair weights, closed forms and analytic tails.
//! * [`functional`]: `L_s`, `P_s`, the relaxed functional, identity checks.
//! * [`approx`]: mollification, superlevel sets, approximation pipelines.
//! * [`minimize`]: relaxation + thresholding solver and oracles.
//! * [`cylinder`]: subgraphs in `Ω × ℝ`, divergence scans, asymptotics.
//! * [`io`]: grid files, the shape DSL and the weight-table cache.

pub mod approx;
pub mod cylinder;
mod error;
mod exterior;
pub mod functional;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod minimize;
mod quad;
pub mod sum;

pub use error::{Error, Result};
