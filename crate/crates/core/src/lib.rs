//! Numerical laboratory for harmonic mean curvature flow of convex surfaces
//! with a flat side.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod charts;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod interface;
pub mod model_pde;
pub mod oracle;
