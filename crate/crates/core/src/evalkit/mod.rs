//! Evaluation: point-set distances between surfaces and image metrics on
//! rendered depth and normal maps.
//!
//! Report convention: CD, EMD, SSIM and the structural distance
//! (`SDIST = 1 - MS-SSIM`) are multiplied by 100; PSNR is in dB.

mod emd;
mod evaluate;
mod maps;
mod points;

pub use emd::{emd, emd_auction, emd_hungarian, hungarian, HUNGARIAN_MAX};
pub use evaluate::{evaluate, mesh_shape, EvalConfig, EvalReport, GroundTruth, MapScores, CSV_HEADER};
pub use maps::{normalize_depth, normalize_normals, psnr, psnr_map, ssim_map, structural_distance, BACKGROUND_VALUE, PSNR_CAP};
pub use points::{chamfer, chamfer_brute_force, sample_surface};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot sample an empty mesh")]
    EmptyMesh,
    #[error("point sets differ in size: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("point set is empty")]
    EmptyPoints,
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Render(#[from] crate::render::RenderError),
    #[error(transparent)]
    Iso(#[from] crate::isoext::IsoError),
}
