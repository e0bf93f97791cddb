//! Procedural training data: random shapes, shaded renders with ground-truth
//! maps, a simulator for the view inconsistencies of generated multiview
//! images, and the on-disk dataset format.

mod dataset;
mod perturb;
mod sample;
mod shapes;

pub use dataset::{
    dataset_stats, format_stats, generate_dataset, generate_to_disk, make_sample, psnr_by_view, shape_id, shape_seed,
    write_dataset, Dataset, DatasetConfig, PsnrRow, ShapeEntry, Split, MANIFEST,
};
pub use perturb::{
    angle_gain, apply_warp, perturb_views, view_warp, InconsistencyProfile, ViewWarp, MAX_GAIN, MAX_ROTATION_DEG, MAX_SCALE,
    MAX_TRANSLATION_PX, MEAN_DISPLACEMENT_PX, REFERENCE_WIDTH,
};
pub use sample::{input_views, lights, render_sample, shade, TrainingSample, AMBIENT};
pub use shapes::{generate_family, generate_shape, GeneratedShape, ShapeFamily, SPHERE_RADIUS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid dataset configuration: {0}")]
    Config(String),
    #[error("invalid inconsistency profile: {0}")]
    Profile(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt dataset file {path}: {detail}")]
    Corrupt { path: String, detail: String },
    #[error("malformed manifest line {line}: {detail}")]
    Manifest { line: usize, detail: String },
    #[error("refusing to overwrite non-empty directory {0}")]
    Exists(String),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Render(#[from] crate::render::RenderError),
}
