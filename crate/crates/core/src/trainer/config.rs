use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::TrainError;
use crate::kvconfig::{ConfigError, KvConfig};
use crate::liftnet::NetConfig;
use crate::losses::LossWeights;
use crate::Real;

/// Ablation modes. `A5` is the default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Mode {
    A1,
    A2,
    A3,
    A4,
    #[default]
    A5,
}

/// What a mode changes about training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeSpec {
    /// Inputs are unperturbed renders instead of the simulated generations.
    pub clean_inputs: bool,
    /// Extra random supervision views per shape, beyond the input views.
    pub extra_views: bool,
    /// The reference view is supervised.
    pub reference_view: bool,
    /// Pixel terms only at the reference view, structural terms elsewhere.
    pub view_dependent: bool,
    /// Cameras used for feature fetching are jittered.
    pub jitter: bool,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::A1, Mode::A2, Mode::A3, Mode::A4, Mode::A5];

    pub fn spec(self) -> ModeSpec {
        let base = ModeSpec { clean_inputs: false, extra_views: false, reference_view: false, view_dependent: false, jitter: false };
        match self {
            Mode::A1 => ModeSpec { clean_inputs: true, extra_views: true, ..base },
            Mode::A2 => ModeSpec { clean_inputs: true, extra_views: true, jitter: true, ..base },
            Mode::A3 => ModeSpec { extra_views: true, ..base },
            Mode::A4 => ModeSpec { reference_view: true, ..base },
            Mode::A5 => ModeSpec { reference_view: true, view_dependent: true, ..base },
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Mode {
    type Err = TrainError;
    fn from_str(s: &str) -> Result<Self, TrainError> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A1" => Ok(Mode::A1),
            "A2" => Ok(Mode::A2),
            "A3" => Ok(Mode::A3),
            "A4" => Ok(Mode::A4),
            "A5" => Ok(Mode::A5),
            _ => Err(TrainError::Config(format!("unknown mode `{s}`, expected A1..A5"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub weights: LossWeights,
    pub lr: Real,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub resolution: usize,
    pub dataset: Option<PathBuf>,
    pub net: NetConfig,
    /// Supervision views added in A1-A3.
    pub extra_views: usize,
    /// A2 viewpoint jitter: rotation about the object centre, in degrees.
    pub jitter_deg: Real,
    /// A2 viewpoint jitter: relative camera distance change.
    pub jitter_radius: Real,
    pub beta1: Real,
    pub beta2: Real,
    pub eps: Real,
    pub clip_norm: Real,
    /// Write a checkpoint every this many steps; 0 only at the end.
    pub checkpoint_every: usize,
    /// Silhouette band of the differentiable renderer, in pixels.
    pub band: Real,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::A5,
            weights: LossWeights::default(),
            lr: 1e-3,
            steps: 2000,
            batch: 1,
            seed: 0,
            resolution: 64,
            dataset: None,
            net: NetConfig::desk(),
            extra_views: 16,
            jitter_deg: 2.0,
            jitter_radius: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 1.0,
            checkpoint_every: 0,
            band: 2.0,
        }
    }
}

const TRAIN_KEYS: [&str; 16] = [
    "mode",
    "lr",
    "steps",
    "batch",
    "seed",
    "resolution",
    "dataset",
    "extra_views",
    "jitter.rotation_deg",
    "jitter.radius",
    "adam.beta1",
    "adam.beta2",
    "adam.eps",
    "clip_norm",
    "checkpoint_every",
    "render.band",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch == 0 || self.resolution < 16 {
            return bad("batch must be >= 1 and resolution >= 16".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return bad("adam parameters out of range".into());
        }
        if !(self.clip_norm > 0.0) || self.jitter_deg < 0.0 || self.jitter_radius < 0.0 || self.band < 1.0 {
            return bad("clip_norm must be positive, jitter nonnegative, band >= 1".into());
        }
        self.weights.validate()?;
        self.net.validate()?;
        Ok(())
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = self.net.to_kv();
        kv.set("mode", self.mode);
        kv.set("lr", self.lr);
        kv.set("steps", self.steps);
        kv.set("batch", self.batch);
        kv.set("seed", self.seed);
        kv.set("resolution", self.resolution);
        if let Some(d) = &self.dataset {
            kv.set("dataset", d.display());
        }
        kv.set("extra_views", self.extra_views);
        kv.set("jitter.rotation_deg", self.jitter_deg);
        kv.set("jitter.radius", self.jitter_radius);
        kv.set("adam.beta1", self.beta1);
        kv.set("adam.beta2", self.beta2);
        kv.set("adam.eps", self.eps);
        kv.set("clip_norm", self.clip_norm);
        kv.set("checkpoint_every", self.checkpoint_every);
        kv.set("render.band", self.band);
        self.weights.to_kv(&mut kv);
        kv
    }

    /// Overrides defaults with the keys present in `kv`; unknown keys fail.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, TrainError> {
        let known: Vec<&str> = TRAIN_KEYS
            .iter()
            .copied()
            .chain([
                "loss.depth",
                "loss.normal",
                "loss.mask",
                "loss.structural",
                "reg.sdf_smooth",
                "reg.deform",
                "reg.laplacian",
                "net.preset",
                "net.encoder",
                "net.conv2d",
                "net.conv3d",
                "net.mlp",
                "net.d2d",
                "net.kernel",
                "net.feature_res",
                "net.grid_res",
                "net.fine_res",
                "net.prior_radius",
            ])
            .collect();
        kv.check_known(&known)?;
        let mut c = Self::default();
        if let Some(m) = kv.get("mode") {
            c.mode = m.parse()?;
        }
        kv.read_into("lr", &mut c.lr)?;
        kv.read_into("steps", &mut c.steps)?;
        kv.read_into("batch", &mut c.batch)?;
        kv.read_into("seed", &mut c.seed)?;
        kv.read_into("resolution", &mut c.resolution)?;
        if let Some(d) = kv.get("dataset") {
            c.dataset = Some(PathBuf::from(d));
        }
        kv.read_into("extra_views", &mut c.extra_views)?;
        kv.read_into("jitter.rotation_deg", &mut c.jitter_deg)?;
        kv.read_into("jitter.radius", &mut c.jitter_radius)?;
        kv.read_into("adam.beta1", &mut c.beta1)?;
        kv.read_into("adam.beta2", &mut c.beta2)?;
        kv.read_into("adam.eps", &mut c.eps)?;
        kv.read_into("clip_norm", &mut c.clip_norm)?;
        kv.read_into("checkpoint_every", &mut c.checkpoint_every)?;
        kv.read_into("render.band", &mut c.band)?;
        c.weights = LossWeights::from_kv(kv)?;
        c.net = NetConfig::from_kv(kv)?;
        c.validate()?;
        Ok(c)
    }
}

impl From<ConfigError> for TrainError {
    fn from(e: ConfigError) -> Self {
        TrainError::Config(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_a5() {
        assert_eq!(TrainConfig::default().mode, Mode::A5);
        assert_eq!(Mode::default(), Mode::A5);
    }

    #[test]
    fn mode_table() {
        let s = |m: Mode| m.spec();
        assert!(s(Mode::A1).clean_inputs && s(Mode::A2).clean_inputs && !s(Mode::A3).clean_inputs);
        assert!(s(Mode::A2).jitter && Mode::ALL.iter().filter(|m| m.spec().jitter).count() == 1);
        assert!(s(Mode::A5).view_dependent && !s(Mode::A4).view_dependent);
        // A3 and A4 differ only in which views are supervised.
        let (a3, a4) = (s(Mode::A3), s(Mode::A4));
        assert_eq!((a3.clean_inputs, a3.jitter, a3.view_dependent), (a4.clean_inputs, a4.jitter, a4.view_dependent));
        assert_ne!((a3.extra_views, a3.reference_view), (a4.extra_views, a4.reference_view));
        assert!("a6".parse::<Mode>().is_err());
        assert_eq!("a2".parse::<Mode>().unwrap(), Mode::A2);
    }

    #[test]
    fn kv_round_trip_and_unknown_keys() {
        let mut c = TrainConfig { mode: Mode::A3, lr: 5e-4, steps: 77, seed: 9, dataset: Some("x/y".into()), ..TrainConfig::default() };
        c.weights.structural = 0.3;
        assert_eq!(TrainConfig::from_kv(&c.to_kv()).unwrap(), c);
        let kv = KvConfig::parse("lrr = 1").unwrap();
        assert!(TrainConfig::from_kv(&kv).is_err());
        let kv = KvConfig::parse("mode = A9").unwrap();
        assert!(TrainConfig::from_kv(&kv).is_err());
    }
}
