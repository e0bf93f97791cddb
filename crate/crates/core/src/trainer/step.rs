//! Loss and gradients for one training sample.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::data::{ShapeData, ViewTarget};
use super::{Mode, TrainConfig, TrainError};
use crate::geometry::{Camera, Mat3, Vec3};
use crate::isoext::{extract_mesh_op, reg_loss};
use crate::liftnet::Model;
use crate::losses::{total_loss, LossReport, Supervision, Target};
use crate::render::render_op;
use crate::{Array, Real, Tape, Var};

pub struct StepOutput {
    pub report: LossReport,
    pub grads: Vec<Array>,
    /// The decoded surface was empty; only the prior-pull loss applied.
    pub empty_mesh: bool,
}

/// Camera rotated about the object centre by up to `deg` degrees and moved
/// radially by up to `radius` (relative).
pub fn jitter_camera(cam: &Camera, rng: &mut ChaCha8Rng, deg: Real, radius: Real) -> Result<Camera, TrainError> {
    let axis = loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() > 1e-3 && v.norm() <= 1.0 {
            break v.normalized();
        }
    };
    let angle = rng.gen_range(-1.0..=1.0) * deg.to_radians();
    let scale = 1.0 + rng.gen_range(-1.0..=1.0) * radius;
    let eye = Mat3::rotation(axis, angle).mul_vec(cam.center()) * scale;
    Ok(Camera::look_at(cam.intrinsics, eye, Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0))?)
}

/// The supervised views for `mode`, reference first when it is included.
pub fn supervised<'a>(data: &'a ShapeData, mode: Mode) -> Vec<&'a ViewTarget> {
    let spec = mode.spec();
    let mut v: Vec<&ViewTarget> = Vec::new();
    if spec.reference_view {
        v.push(&data.targets[0]);
    }
    v.extend(data.targets[1..].iter());
    if spec.extra_views {
        if let Some(e) = &data.extra {
            v.extend(e.iter());
        }
    }
    v
}

pub fn plan_for(mode: Mode, n: usize) -> Supervision {
    if mode.spec().view_dependent {
        Supervision::view_dependent(n)
    } else {
        Supervision::all_views(n)
    }
}

/// Forward, loss and backward for one sample. `jitter` supplies randomness
/// for viewpoint jitter when the mode uses it.
pub fn compute_step(model: &Model, data: &ShapeData, cfg: &TrainConfig, jitter: Option<&mut ChaCha8Rng>) -> Result<StepOutput, TrainError> {
    let spec = cfg.mode.spec();
    let mut tape = Tape::new();
    let p = model.params.bind(&mut tape);
    let images = if spec.clean_inputs {
        data.clean.as_ref().ok_or_else(|| TrainError::Config(format!("clean inputs for {} were not prepared", data.id)))?
    } else {
        &data.inputs
    };
    let mut cams = data.input_cameras();
    if spec.jitter && (cfg.jitter_deg > 0.0 || cfg.jitter_radius > 0.0) {
        if let Some(rng) = jitter {
            for c in cams.iter_mut() {
                *c = jitter_camera(c, rng, cfg.jitter_deg, cfg.jitter_radius)?;
            }
        }
    }
    let inputs: Vec<(Camera, Var)> = cams.iter().zip(images).map(|(c, img)| (*c, tape.constant(img.clone()))).collect();
    let grid = model.forward(&mut tape, &p, &inputs)?;
    let (verts, ex) = extract_mesh_op(&mut tape, grid.sdf, grid.deform, grid.res)?;

    if ex.mesh.is_empty() {
        // Nothing to render: pull the field back towards the prior sphere.
        let prior = model.prior_field().map(|x| -x);
        let diff = tape.add_const(grid.sdf, &prior)?;
        let sq = tape.mul(diff, diff)?;
        let s = tape.sum(sq);
        let loss = tape.scale(s, 1.0 / prior.len() as Real);
        let total = tape.value(loss).item();
        tape.backward(loss)?;
        let report = LossReport { reg: total, total, ..LossReport::default() };
        return Ok(StepOutput { report, grads: p.grads(&tape), empty_mesh: true });
    }

    let views = supervised(data, cfg.mode);
    let res = data.resolution();
    let mut preds = Vec::with_capacity(views.len());
    let mut targets = Vec::with_capacity(views.len());
    for v in &views {
        preds.push(render_op(&mut tape, verts, &ex.mesh.triangles, &v.camera, res, cfg.band)?);
        targets.push(Target {
            depth: tape.constant(v.depth.clone()),
            normal: tape.constant(v.normal.clone()),
            mask: tape.constant(v.mask.clone()),
            d_min: v.d_min,
        });
    }
    let reg = reg_loss(&mut tape, grid.sdf, grid.deform, grid.res, verts, &ex.mesh.triangles, cfg.weights.reg)?;
    let out = total_loss(&mut tape, &preds, &targets, &plan_for(cfg.mode, views.len()), &cfg.weights, Some(reg.total))?;
    if out.report.is_finite() {
        tape.backward(out.total)?;
    }
    Ok(StepOutput { report: out.report, grads: p.grads(&tape), empty_mesh: false })
}
