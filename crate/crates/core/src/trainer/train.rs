//! The optimization loop.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::Checkpoint;
use super::data::TrainData;
use super::optim::{clip_global_norm, cosine_lr, Adam};
use super::step::compute_step;
use super::{TrainConfig, TrainError};
use crate::isoext::IsoError;
use crate::liftnet::Model;
use crate::losses::LossReport;
use crate::Real;

pub const LOG_HEADER: &str = "step,sample,lr,depth,normal,mask,structural,reg,total,grad_norm,empty";
pub const LOG_FILE: &str = "loss.csv";
pub const NAN_DUMP_FILE: &str = "nan_dump.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub sample: String,
    pub lr: Real,
    pub report: LossReport,
    pub grad_norm: Real,
    pub empty_mesh: bool,
}

impl LossRecord {
    pub fn csv_row(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.step, self.sample, self.lr, r.depth, r.normal, r.mask, r.structural, r.reg, r.total, self.grad_norm, self.empty_mesh as u8
        )
    }
}

/// Fresh training state for a configuration.
pub fn initial_checkpoint(cfg: &TrainConfig) -> Result<Checkpoint, TrainError> {
    cfg.validate()?;
    let model = Model::new(cfg.net.clone(), cfg.seed)?;
    let shapes: Vec<&[usize]> = model.params.entries.iter().map(|(_, a)| a.shape()).collect();
    let adam = Adam::new(&shapes, cfg.beta1, cfg.beta2, cfg.eps);
    let rng_seed = cfg.seed ^ 0x7a11_0c47_5eed_0001;
    Ok(Checkpoint { config: cfg.clone(), params: model.params, adam, step: 0, rng_seed, rng_word_pos: 0 })
}

/// Randomness for viewpoint jitter at `step`, independent of sample order.
fn jitter_rng(seed: u64, step: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x1177_e500_0000_0002);
    r.set_stream(step as u64);
    r
}

#[derive(Debug)]
pub struct TrainRun {
    pub checkpoint: Checkpoint,
    pub log: Vec<LossRecord>,
}

/// Runs from `start` until `until` steps are complete (capped at
/// `config.steps`). With `out`, the loss log is appended to `out/loss.csv`,
/// checkpoints go to `out/ckpt` and a failure dump to `out/nan_dump.txt`.
pub fn train_until(data: &mut TrainData, start: Checkpoint, until: usize, out: Option<&Path>) -> Result<TrainRun, TrainError> {
    let cfg = start.config.clone();
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::Config("training set is empty".into()));
    }
    if data.resolution() != cfg.resolution {
        return Err(TrainError::Config(format!(
            "dataset resolution {} differs from resolution = {}; set `resolution = {}` or regenerate the data",
            data.resolution(),
            cfg.resolution,
            data.resolution()
        )));
    }
    let spec = cfg.mode.spec();
    data.prepare(spec.clean_inputs, if spec.extra_views { cfg.extra_views } else { 0 })?;

    let mut model = start.model()?;
    let mut adam = start.adam.clone();
    let mut rng = start.rng();
    let mut log = Vec::new();
    let mut log_file = match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| TrainError::Io { path: dir.display().to_string(), source })?;
            let path = dir.join(LOG_FILE);
            let fresh = start.step == 0 || !path.exists();
            let mut f = fs::OpenOptions::new()
                .create(true)
                .append(!fresh)
                .write(true)
                .truncate(fresh)
                .open(&path)
                .map_err(|source| TrainError::Io { path: path.display().to_string(), source })?;
            if fresh {
                writeln!(f, "{LOG_HEADER}").map_err(|source| TrainError::Io { path: path.display().to_string(), source })?;
            }
            Some((f, path))
        }
        None => None,
    };
    let until = until.min(cfg.steps);
    let mut step = start.step;
    while step < until {
        let mut grads: Option<Vec<crate::Array>> = None;
        let mut report = LossReport::default();
        let mut ids = Vec::new();
        let mut empty = false;
        let mut jr = jitter_rng(cfg.seed, step);
        for _ in 0..cfg.batch {
            let idx = rng.gen_range(0..data.len());
            let sample = &data.shapes[idx];
            ids.push(sample.id.clone());
            let abort = |detail: String| {
                if let Some(dir) = out {
                    let _ = fs::write(dir.join(NAN_DUMP_FILE), format!("step = {step}\nsample = {}\n{detail}\n", sample.id));
                }
                TrainError::NonFinite { step, sample: sample.id.clone() }
            };
            let o = match compute_step(&model, sample, &cfg, Some(&mut jr)) {
                Ok(o) => o,
                // The decoded grid itself went non-finite.
                Err(TrainError::Iso(e @ IsoError::NonFinite(_))) => return Err(abort(format!("error = {e}"))),
                Err(e) => return Err(e),
            };
            if !o.report.is_finite() || o.grads.iter().any(|g| !g.all_finite()) {
                return Err(abort(format!("loss = {:?}", o.report)));
            }
            empty |= o.empty_mesh;
            let k = 1.0 / cfg.batch as Real;
            add_scaled(&mut report, &o.report, k);
            match &mut grads {
                None => grads = Some(o.grads.into_iter().map(|g| g.map(|x| x * k)).collect()),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&o.grads) {
                        a.data_mut().iter_mut().zip(g.data()).for_each(|(x, y)| *x += k * y);
                    }
                }
            }
        }
        let mut grads = grads.expect("batch >= 1");
        let grad_norm = clip_global_norm(&mut grads, cfg.clip_norm);
        let lr = cosine_lr(cfg.lr, step, cfg.steps);
        {
            let mut ps: Vec<&mut crate::Array> = model.params.entries.iter_mut().map(|(_, a)| a).collect();
            adam.step(&mut ps, &grads, lr);
        }
        let rec = LossRecord { step, sample: ids.join("+"), lr, report, grad_norm, empty_mesh: empty };
        if let Some((f, path)) = &mut log_file {
            writeln!(f, "{}", rec.csv_row()).map_err(|source| TrainError::Io { path: path.display().to_string(), source })?;
        }
        log.push(rec);
        step += 1;
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step < until {
            if let Some(dir) = out {
                snapshot(&cfg, &model, &adam, step, &start, &rng).save(&dir.join(format!("ckpt-{step:06}")))?;
            }
        }
    }
    let checkpoint = snapshot(&cfg, &model, &adam, step, &start, &rng);
    if let Some(dir) = out {
        checkpoint.save(&dir.join("ckpt"))?;
    }
    Ok(TrainRun { checkpoint, log })
}

fn snapshot(cfg: &TrainConfig, model: &Model, adam: &Adam, step: usize, start: &Checkpoint, rng: &ChaCha8Rng) -> Checkpoint {
    Checkpoint {
        config: cfg.clone(),
        params: model.params.clone(),
        adam: adam.clone(),
        step,
        rng_seed: start.rng_seed,
        rng_word_pos: rng.get_word_pos(),
    }
}

fn add_scaled(acc: &mut LossReport, r: &LossReport, k: Real) {
    acc.depth += k * r.depth;
    acc.normal += k * r.normal;
    acc.mask += k * r.mask;
    acc.structural += k * r.structural;
    acc.reg += k * r.reg;
    acc.total += k * r.total;
    acc.empty_views.extend(r.empty_views.iter().copied());
}

/// Trains from scratch for `config.steps` steps.
pub fn train(data: &mut TrainData, cfg: &TrainConfig, out: Option<&Path>) -> Result<TrainRun, TrainError> {
    let start = initial_checkpoint(cfg)?;
    train_until(data, start, cfg.steps, out)
}
