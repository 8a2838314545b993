//! Escape classification, Green functions and slice rasters.

pub mod green;
pub mod orbit;
pub mod raster;

pub use green::{green_from_entry, green_minus, green_plus, green_trace, GreenConstants, GreenEstimate};
pub use orbit::{classify_orbit, Direction, OrbitStatus, OrbitVerdict};
pub use raster::{boundary_extract, hausdorff_pixels, raster_slice, Cell, CellVerdict, Raster, SliceSpec};
