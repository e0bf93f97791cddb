//! Sparse-view mesh reconstruction from multiview images with inconsistent
//! details.
//!
//! The pipeline lifts per-view 2D features into a coarse 3D feature volume,
//! decodes a fine signed-distance + deformation grid, extracts a mesh with
//! differentiable marching cubes, and trains against geometric maps with a
//! view-dependent loss: pixelwise terms at the reference view and structural
//! similarity everywhere else. Texturing and evaluation tooling round out the
//! crate.
//!
//! Module map:
//!
//! | module | role |
//! |---|---|
//! | [`diffcore`] | reverse-mode autodiff over dense arrays |
//! | [`geometry`] | cameras, view sets, analytic SDF primitives |
//! | [`liftnet`] | 2D encoder, feature lifting, 3D refinement, grid decoding |
//! | [`isoext`] | differentiable marching cubes and mesh regularizers |
//! | [`render`] | differentiable rasterizer and sphere tracer |
//! | [`losses`] | depth/normal/mask/structural losses and their dispatch |
//! | [`synthdata`] | procedural shapes, renders, inconsistency simulator |
//! | [`trainer`] | optimization loop and ablation modes |
//! | [`texmap`] | multiview texture mapping |
//! | [`evalkit`] | point-set and map metrics |

pub mod arrayio;
pub mod diffcore;
pub mod evalkit;
pub mod exec;
pub mod geometry;
pub mod isoext;
pub mod kvconfig;
pub mod liftnet;
pub mod losses;
pub mod render;
pub mod synthdata;
pub mod texmap;
pub mod trainer;

/// Scalar type used by every array in the crate.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
/// Scalar type used by every array in the crate.
#[cfg(feature = "f32")]
pub type Real = f32;

pub use diffcore::{Array, Tape, Var};
