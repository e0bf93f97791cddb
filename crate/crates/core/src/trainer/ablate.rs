//! Mode comparison: train every requested mode over several seeds and score
//! held-out reconstructions by Chamfer distance.

use std::fmt::Write;

use super::data::TrainData;
use super::reconstruct::reconstruct;
use super::train::{train, LossRecord};
use super::{Mode, TrainConfig, TrainError};
use crate::evalkit::{chamfer, mesh_shape, sample_surface};
use crate::geometry::{Camera, Vec3};
use crate::liftnet::Model;
use crate::{exec, Array, Real};

/// Held-out shapes with cached ground-truth surface samples.
pub struct EvalSet {
    pub inputs: Vec<Vec<(Camera, Array)>>,
    pub gt_points: Vec<Vec<Vec3>>,
    pub points: usize,
    pub seed: u64,
}

impl EvalSet {
    /// Uses the simulated (perturbed) inputs of `data`, as at test time.
    pub fn new(data: &TrainData, points: usize, gt_mesh_res: usize, seed: u64) -> Result<Self, TrainError> {
        let inputs = data
            .shapes
            .iter()
            .map(|s| s.input_cameras().into_iter().zip(s.inputs.iter().cloned()).collect())
            .collect();
        let gt_points = exec::map_indexed(data.len(), |i| -> Result<Vec<Vec3>, TrainError> {
            let m = mesh_shape(&data.shapes[i].shape.sdf, gt_mesh_res)?;
            Ok(sample_surface(&m, points, seed)?)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { inputs, gt_points, points, seed })
    }
}

/// Mean Chamfer distance (x100) of the model's reconstructions over the set.
/// Empty reconstructions count as infinite.
pub fn eval_cd(model: &Model, resolution: usize, set: &EvalSet) -> Result<Real, TrainError> {
    let mut total = 0.0;
    for (inputs, gt) in set.inputs.iter().zip(&set.gt_points) {
        let mesh = reconstruct(model, resolution, inputs)?;
        if mesh.is_empty() {
            return Ok(Real::INFINITY);
        }
        let p = sample_surface(&mesh, set.points, set.seed)?;
        total += 100.0 * chamfer(&p, gt)?;
    }
    Ok(total / set.inputs.len().max(1) as Real)
}

#[derive(Clone, Debug)]
pub struct AblationConfig {
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    /// Shared settings; mode and seed are overridden per run.
    pub base: TrainConfig,
    pub eval_points: usize,
    pub gt_mesh_res: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            modes: vec![Mode::A1, Mode::A2, Mode::A3, Mode::A5],
            seeds: vec![0, 1, 2],
            base: TrainConfig::default(),
            eval_points: 2048,
            gt_mesh_res: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub mode: Mode,
    pub seed: u64,
    pub cd: Real,
    pub first_loss: Real,
    pub last_loss: Real,
}

#[derive(Clone, Debug, Default)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Seed-mean eval CD of `mode`, if it was run.
    pub fn mean_cd(&self, mode: Mode) -> Option<Real> {
        let v: Vec<Real> = self.rows.iter().filter(|r| r.mode == mode).map(|r| r.cd).collect();
        (!v.is_empty()).then(|| v.iter().sum::<Real>() / v.len() as Real)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("mode,seed,cd,first_loss,last_loss\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.mode, r.seed, r.cd, r.first_loss, r.last_loss);
        }
        s
    }

    /// Sample standard deviation of the eval CD of `mode` over seeds.
    pub fn sd_cd(&self, mode: Mode) -> Option<Real> {
        let v: Vec<Real> = self.rows.iter().filter(|r| r.mode == mode).map(|r| r.cd).collect();
        let m = self.mean_cd(mode)?;
        Some(if v.len() < 2 { 0.0 } else { (v.iter().map(|x| (x - m).powi(2)).sum::<Real>() / (v.len() - 1) as Real).sqrt() })
    }

    fn modes(&self) -> Vec<Mode> {
        let mut modes: Vec<Mode> = Vec::new();
        for r in &self.rows {
            if !modes.contains(&r.mode) {
                modes.push(r.mode);
            }
        }
        modes
    }

    /// Whether seed-mean CD satisfies A5 < A3 < A1, or `None` when one of
    /// the three modes was not run.
    pub fn ordering_holds(&self) -> Option<bool> {
        let (a5, a3, a1) = (self.mean_cd(Mode::A5)?, self.mean_cd(Mode::A3)?, self.mean_cd(Mode::A1)?);
        Some(a5 < a3 && a3 < a1)
    }

    pub fn verdict(&self) -> String {
        match self.ordering_holds() {
            Some(true) => "ordering A5 < A3 < A1: held".into(),
            Some(false) => "ordering A5 < A3 < A1: violated".into(),
            None => "ordering A5 < A3 < A1: not tested (needs A1, A3 and A5)".into(),
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<6} {:>5} {:>10} {:>10}\n", "mode", "runs", "mean CD", "sd");
        for m in self.modes() {
            let n = self.rows.iter().filter(|r| r.mode == m).count();
            let _ = writeln!(
                s,
                "{:<6} {:>5} {:>10.4} {:>10.4}",
                m.to_string(),
                n,
                self.mean_cd(m).unwrap_or(Real::NAN),
                self.sd_cd(m).unwrap_or(Real::NAN)
            );
        }
        s.push_str(&self.verdict());
        s.push('\n');
        s
    }
}

fn median(mut v: Vec<Real>) -> Real {
    if v.is_empty() {
        return Real::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Medians of the total loss over the first and last tenth of a log.
pub fn loss_trend(log: &[LossRecord]) -> (Real, Real) {
    let k = (log.len() / 10).max(1).min(log.len());
    let first = median(log[..k].iter().map(|r| r.report.total).collect());
    let last = median(log[log.len() - k..].iter().map(|r| r.report.total).collect());
    (first, last)
}

/// Runs every (mode, seed) pair, mode-major, reporting each finished run to
/// `progress`.
pub fn run_ablation(
    train_data: &mut TrainData,
    eval: &EvalSet,
    cfg: &AblationConfig,
    mut progress: impl FnMut(&AblationRow),
) -> Result<AblationReport, TrainError> {
    let mut report = AblationReport::default();
    for &mode in &cfg.modes {
        for &seed in &cfg.seeds {
            let tc = TrainConfig { mode, seed, ..cfg.base.clone() };
            let run = train(train_data, &tc, None)?;
            let model = run.checkpoint.model()?;
            let cd = eval_cd(&model, tc.resolution, eval)?;
            let (first_loss, last_loss) = if run.log.is_empty() { (Real::NAN, Real::NAN) } else { loss_trend(&run.log) };
            let row = AblationRow { mode, seed, cd, first_loss, last_loss };
            progress(&row);
            report.rows.push(row);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mode: Mode, seed: u64, cd: Real) -> AblationRow {
        AblationRow { mode, seed, cd, first_loss: 1.0, last_loss: 0.5 }
    }

    #[test]
    fn summary_statistics_and_verdict() {
        let mut r = AblationReport::default();
        for (m, cds) in [(Mode::A1, [3.0, 5.0, 4.0]), (Mode::A3, [2.0, 2.5, 1.5]), (Mode::A5, [1.0, 1.2, 0.8])] {
            for (k, cd) in cds.into_iter().enumerate() {
                r.rows.push(row(m, k as u64, cd));
            }
        }
        assert_eq!(r.mean_cd(Mode::A1), Some(4.0));
        assert!((r.sd_cd(Mode::A3).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(r.ordering_holds(), Some(true));
        let t = r.to_table();
        assert_eq!(t.lines().count(), 5);
        assert!(t.ends_with("held\n"));
        r.rows.push(row(Mode::A5, 9, 100.0));
        assert_eq!(r.ordering_holds(), Some(false));
        assert_eq!(r.to_csv().lines().count(), 11);
        assert_eq!(AblationReport::default().ordering_holds(), None);
    }

    #[test]
    fn trend_uses_tenths() {
        let log: Vec<LossRecord> = (0..20)
            .map(|i| LossRecord {
                step: i,
                sample: String::new(),
                lr: 0.0,
                report: crate::losses::LossReport { total: 20.0 - i as Real, ..Default::default() },
                grad_norm: 0.0,
                empty_mesh: false,
            })
            .collect();
        assert_eq!(loss_trend(&log), (19.5, 1.5));
    }
}
