//! Training checkpoints: a directory holding the parameters, optimizer
//! moments, the configuration and the loop state.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::optim::Adam;
use super::{TrainConfig, TrainError};
use crate::arrayio::{read_arrays, write_arrays};
use crate::kvconfig::KvConfig;
use crate::liftnet::{Model, Params};

pub const PARAMS_FILE: &str = "params.arr";
pub const OPTIM_FILE: &str = "optim.arr";
pub const CONFIG_FILE: &str = "train.cfg";
pub const STATE_FILE: &str = "state.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub params: Params,
    pub adam: Adam,
    /// Steps completed.
    pub step: usize,
    pub rng_seed: u64,
    pub rng_word_pos: u128,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.display().to_string(), source }
}

impl Checkpoint {
    pub fn model(&self) -> Result<Model, TrainError> {
        Ok(Model::from_parts(self.config.net.clone(), self.params.clone())?)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.rng_seed);
        r.set_word_pos(self.rng_word_pos);
        r
    }

    pub fn save(&self, dir: &Path) -> Result<(), TrainError> {
        fs::create_dir_all(dir).map_err(io(dir))?;
        self.params.save(&dir.join(PARAMS_FILE))?;
        let mut moments = Vec::new();
        for ((name, _), (m, v)) in self.params.entries.iter().zip(self.adam.m.iter().zip(&self.adam.v)) {
            moments.push((format!("m.{name}"), m.clone()));
            moments.push((format!("v.{name}"), v.clone()));
        }
        let opath = dir.join(OPTIM_FILE);
        write_arrays(&opath, &moments).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", opath.display())))?;
        let cpath = dir.join(CONFIG_FILE);
        fs::write(&cpath, self.config.to_kv().to_text()).map_err(io(&cpath))?;
        let mut st = KvConfig::default();
        st.set("step", self.step);
        st.set("adam.t", self.adam.t);
        st.set("rng.seed", self.rng_seed);
        st.set("rng.word_pos", self.rng_word_pos);
        let spath = dir.join(STATE_FILE);
        fs::write(&spath, st.to_text()).map_err(io(&spath))
    }

    pub fn load(dir: &Path) -> Result<Self, TrainError> {
        let cpath = dir.join(CONFIG_FILE);
        let text = fs::read_to_string(&cpath).map_err(io(&cpath))?;
        let config = TrainConfig::from_kv(&KvConfig::parse(&text)?)?;
        let params = Params::load(&dir.join(PARAMS_FILE))?;
        params.check(&config.net)?;
        let opath = dir.join(OPTIM_FILE);
        let moments = read_arrays(&opath).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", opath.display())))?;
        let find = |key: String| {
            moments
                .iter()
                .find(|(n, _)| *n == key)
                .map(|(_, a)| a.clone())
                .ok_or_else(|| TrainError::Checkpoint(format!("{} lacks `{key}`", opath.display())))
        };
        let mut m = Vec::new();
        let mut v = Vec::new();
        for (name, _) in &params.entries {
            m.push(find(format!("m.{name}"))?);
            v.push(find(format!("v.{name}"))?);
        }
        let spath = dir.join(STATE_FILE);
        let st = KvConfig::parse(&fs::read_to_string(&spath).map_err(io(&spath))?)?;
        let get = |k: &str| st.get(k).ok_or_else(|| TrainError::Checkpoint(format!("{} lacks `{k}`", spath.display())));
        let parse_err = |k: &str| TrainError::Checkpoint(format!("bad `{k}` in {}", spath.display()));
        let step = get("step")?.parse().map_err(|_| parse_err("step"))?;
        let t = get("adam.t")?.parse().map_err(|_| parse_err("adam.t"))?;
        let rng_seed = get("rng.seed")?.parse().map_err(|_| parse_err("rng.seed"))?;
        let rng_word_pos = get("rng.word_pos")?.parse().map_err(|_| parse_err("rng.word_pos"))?;
        let adam = Adam { beta1: config.beta1, beta2: config.beta2, eps: config.eps, m, v, t };
        Ok(Self { config, params, adam, step, rng_seed, rng_word_pos })
    }
}
