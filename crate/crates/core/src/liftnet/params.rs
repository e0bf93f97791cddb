use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{NetConfig, NetError};
use crate::arrayio;
use crate::diffcore::{Array, Tape, Var};
use crate::Real;

/// Named parameter arrays in the order given by
/// [`NetConfig::parameter_shapes`].
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub entries: Vec<(String, Array)>,
}

impl Params {
    /// Uniform He-style initialisation. The second convolution of every
    /// residual block and the last MLP layer start small so the untrained
    /// network stays close to the identity / the prior shape.
    pub fn init(config: &NetConfig, rng: &mut ChaCha8Rng) -> Self {
        let shapes = config.parameter_shapes();
        let n_mlp = config.mlp.len() - 1;
        let last_mlp = format!("mlp.{}.w", n_mlp - 1);
        let entries = shapes
            .into_iter()
            .map(|(name, shape)| {
                let n: usize = shape.iter().product();
                let data = if name.ends_with(".b") {
                    vec![0.0; n]
                } else {
                    let fan_in: usize = shape[1..].iter().product();
                    let mut bound = (6.0 / fan_in as Real).sqrt();
                    if name.ends_with("res2.w") || name == last_mlp {
                        bound *= 0.1;
                    }
                    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
                };
                (name, Array::new(shape, data).expect("shape product"))
            })
            .collect();
        Self { entries }
    }

    pub fn get(&self, name: &str) -> Option<&Array> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    pub fn count(&self) -> usize {
        self.entries.iter().map(|(_, a)| a.len()).sum()
    }

    /// Checks names and shapes against a configuration.
    pub fn check(&self, config: &NetConfig) -> Result<(), NetError> {
        for (name, shape) in config.parameter_shapes() {
            let a = self.get(&name).ok_or_else(|| NetError::MissingParam(name.clone()))?;
            if a.shape() != shape.as_slice() {
                return Err(NetError::ParamShape {
                    name,
                    expected: shape,
                    found: a.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Places every array on the tape as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let mut index = HashMap::new();
        let vars = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, (name, a))| {
                index.insert(name.clone(), i);
                tape.param(a.clone())
            })
            .collect();
        BoundParams { vars, index }
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        arrayio::write_arrays(path, &self.entries)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        Ok(Self { entries: arrayio::read_arrays(path)? })
    }
}

/// Tape handles of a [`Params`] set, in the same order.
pub struct BoundParams {
    pub vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl BoundParams {
    /// Pairs existing tape variables with the names of `params`, in order.
    pub fn from_vars(params: &Params, vars: &[Var]) -> Self {
        assert_eq!(params.entries.len(), vars.len());
        let index = params.entries.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
        Self { vars: vars.to_vec(), index }
    }

    pub fn var(&self, name: &str) -> Result<Var, NetError> {
        self.index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| NetError::MissingParam(name.to_string()))
    }

    pub fn maybe(&self, name: &str) -> Option<Var> {
        self.index.get(name).map(|&i| self.vars[i])
    }

    /// Gradients of every parameter after a backward pass, in order.
    pub fn grads(&self, tape: &Tape) -> Vec<Array> {
        self.vars.iter().map(|&v| tape.grad_array(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn init_matches_config_and_round_trips() {
        let cfg = NetConfig::desk();
        let p = Params::init(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
        p.check(&cfg).unwrap();
        assert_eq!(p.count(), cfg.parameter_count());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        p.save(&path).unwrap();
        assert_eq!(Params::load(&path).unwrap(), p);
        let q = Params::init(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(p, q);
    }

    #[test]
    fn check_reports_missing() {
        let cfg = NetConfig::desk();
        let mut p = Params::init(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
        p.entries.pop();
        assert!(matches!(p.check(&cfg), Err(NetError::MissingParam(_))));
    }
}
