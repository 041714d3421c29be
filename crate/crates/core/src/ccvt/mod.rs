//! Disk distribution on the wall by capacity-constrained Voronoi tessellation.

mod chebyshev;
mod density;
mod layout;
mod polygon;
mod power;
mod solver;

pub use chebyshev::chebyshev_center;
pub use density::DensityGrid;
pub use layout::*;
pub use polygon::{polygon_moments, Cell, Moments};
pub use power::power_diagram;
pub use solver::{
    ccvt, ccvt_from_sites, sample_sites, CcvtOptions, Tessellation, INIT_STREAM, REMOVAL_STREAM,
};
