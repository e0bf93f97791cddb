//! Cameras, view configurations, the shared grid lattice and analytic SDF
//! shapes.

mod camera;
mod lattice;
mod sdf;
mod vec;
mod views;

pub use camera::{bounding_sphere_min_depth, Camera, Intrinsics, Projection};
pub use lattice::Lattice;
pub use sdf::{Combine, Placed, Primitive, ShapeSdf, NORMALIZED_BOUND};
pub use vec::{Mat3, Vec3};
pub use views::{
    make_ring_views, spherical_position, uniform_view_sphere, View, ViewSet, DEFAULT_CAMERA_RADIUS, RING_ELEVATIONS,
    RING_AZIMUTHS, REFERENCE_ELEVATION,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("camera at distance {distance} lies inside the bounding sphere of radius {radius}")]
    InsideBoundingSphere { distance: f64, radius: f64 },
    #[error("invalid view configuration: {0}")]
    InvalidViews(String),
    #[error("malformed view manifest line {line}: {detail}")]
    Manifest { line: usize, detail: String },
}
