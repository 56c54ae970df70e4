//! Normalized bound states of the nonlinear Schrödinger equation on
//! noncompact metric graphs with a localized nonlinearity.

// `!(x > 0.0)` rejects NaN as well; that is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod functionals;
pub mod graph;
pub mod linalg;
pub mod mesh;
pub mod minmax;
pub mod quadrature;
pub mod ps;
pub mod report;
pub mod solver;
pub mod soliton;

pub use error::{Error, GraphError, Result};
pub use graph::{parse_graph, MetricGraph};
pub use mesh::{build_mesh, GraphFunction, Mesh};
