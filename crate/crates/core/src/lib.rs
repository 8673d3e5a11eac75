//! Allocation-only core of the palmforge toolkit.
//!
//! Everything in this crate is a pure function over in-memory data: pixel
//! rasters and sprite transforms, the YOLO label text format, seeded object
//! placement, and the detection metric stack (IoU, greedy matching, PR curves,
//! AP, mAP and thresholded counting). File systems, image codecs and the CLI
//! live in the `palmforge` crate.
//!
//! The crate is `no_std` and only requires `alloc`. Floating point functions
//! come from `libm`, so results are identical with or without `std`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

mod error;

pub mod bbox;
pub mod label;
pub mod metrics;
pub mod placement;
pub mod raster;
pub mod seed;
pub mod summary;
pub mod transform;

pub use bbox::BBox;
pub use error::{Error, Result};
pub use label::{Detection, GroundTruthAnnotation};
pub use raster::{composite, opaque_extent, PixelBox, Raster, Sprite};
pub use transform::{apply_transform, Transform};
