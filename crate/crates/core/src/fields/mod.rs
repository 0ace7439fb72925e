//! Grids, axisymmetric field storage, cylindrical difference operators and
//! quadrature over cylinders.

mod field;
mod grid;
pub mod quadrature;
pub mod snapshot;
pub mod stencil;

pub use field::{decompose, recombine, AxiField, ScalarField2D};
pub use grid::Grid2D;
pub use quadrature::{integrate_over_cylinder, CylinderSection, CylinderWeights, ParabolicCylinder};
pub use snapshot::{SnapshotRecord, ZoomProvenance};
pub use stencil::{swirl_operator, Parity, ZEnds};
