//! Optimization loop, checkpoints, inference and the ablation modes.
//!
//! A step lifts the sample's input images, decodes and extracts a mesh,
//! renders it at every supervised view and backpropagates the dispatched
//! loss. Mode A5 (the default) supervises the reference view pixelwise and
//! the generated views structurally.

mod ablate;
mod checkpoint;
mod config;
mod data;
mod optim;
mod reconstruct;
mod step;
mod train;

pub use ablate::{eval_cd, loss_trend, run_ablation, AblationConfig, AblationReport, AblationRow, EvalSet};
pub use checkpoint::{Checkpoint, CONFIG_FILE, OPTIM_FILE, PARAMS_FILE, STATE_FILE};
pub use config::{Mode, ModeSpec, TrainConfig};
pub use data::{extra_views, ShapeData, TrainData, ViewTarget};
pub use optim::{clip_global_norm, cosine_lr, Adam};
pub use reconstruct::{reconstruct, reconstruct_views};
pub use step::{compute_step, jitter_camera, plan_for, supervised, StepOutput};
pub use train::{initial_checkpoint, train, train_until, LossRecord, TrainRun, LOG_FILE, LOG_HEADER, NAN_DUMP_FILE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite loss or gradient at step {step} on sample {sample}")]
    NonFinite { step: usize, sample: String },
    #[error("input mismatch: {0}")]
    Mismatch(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Net(#[from] crate::liftnet::NetError),
    #[error(transparent)]
    Iso(#[from] crate::isoext::IsoError),
    #[error(transparent)]
    Render(#[from] crate::render::RenderError),
    #[error(transparent)]
    Loss(#[from] crate::losses::LossError),
    #[error(transparent)]
    Diff(#[from] crate::diffcore::DiffError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Synth(#[from] crate::synthdata::SynthError),
    #[error(transparent)]
    Eval(#[from] crate::evalkit::EvalError),
}
