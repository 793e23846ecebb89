//! Numerical toolkit for heat flow, optimal transport and weak curvature
//! bounds on compact metric graphs.
//!
//! The pipeline is: describe a [`graph::MetricGraph`], discretize it into a
//! [`grid::Grid`], build the [`heat::HeatSemigroup`] from the Kirchhoff
//! Laplacian, and run the checks in [`curvature`] on functions and
//! measures living on that grid.

pub mod curvature;
pub mod error;
pub mod extension;
pub mod field;
pub mod functional;
pub mod graph;
pub mod grid;
pub mod heat;
mod quadrature;
pub mod regularization;
pub mod suite;
pub mod transport;

pub use error::{CurvatureError, FunctionalError, GraphError, HeatError, SuiteError, TransportError};
pub use field::{Atom, DiscreteMeasure, GridFunction};
pub use graph::{build_graph, GraphDescription, GraphPoint, MetricGraph};
pub use grid::Grid;
pub use heat::{HeatSemigroup, KirchhoffLaplacian, SpectralDecomposition};
