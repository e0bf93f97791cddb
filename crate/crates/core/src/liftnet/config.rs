use super::NetError;
use crate::kvconfig::{ConfigError, KvConfig};
use crate::Real;

/// Layer widths and grid sizes.
///
/// `encoder` lists the channels of the strided image encoder starting with the
/// image channels (empty when features arrive from an external backbone).
/// `conv2d`, `conv3d` and `mlp` are channel lists: each consecutive pair is
/// one layer. The lifted feature dimension is the last `conv2d` width.
#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub encoder: Vec<usize>,
    pub conv2d: Vec<usize>,
    pub conv3d: Vec<usize>,
    pub mlp: Vec<usize>,
    pub d2d: usize,
    pub kernel: usize,
    pub feature_res: usize,
    pub grid_res: usize,
    pub fine_res: usize,
    /// Radius of the sphere whose distance field is added to the decoded SDF.
    pub prior_radius: Real,
}

impl NetConfig {
    /// Full-size layer widths. The encoder is empty: inputs are 768-channel
    /// backbone features.
    pub fn full() -> Self {
        Self {
            encoder: Vec::new(),
            conv2d: vec![768, 512, 256, 128, 32],
            conv3d: vec![32; 5],
            mlp: vec![32, 64, 64, 4],
            d2d: 128,
            kernel: 3,
            feature_res: 64,
            grid_res: 32,
            fine_res: 80,
            prior_radius: 0.5,
        }
    }

    /// Small configuration trainable on a single CPU core.
    pub fn desk() -> Self {
        Self {
            encoder: vec![3, 8, 8],
            conv2d: vec![8, 8],
            conv3d: vec![8, 8, 8],
            mlp: vec![8, 16, 16, 4],
            d2d: 8,
            kernel: 3,
            feature_res: 64,
            grid_res: 12,
            fine_res: 23,
            prior_radius: 0.5,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "full" => Some(Self::full()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }

    pub fn input_channels(&self) -> usize {
        self.encoder.first().copied().unwrap_or(self.conv2d[0])
    }

    pub fn feature_channels(&self) -> usize {
        *self.conv2d.last().expect("validated")
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Config(m));
        if self.conv2d.is_empty() || self.conv3d.is_empty() || self.mlp.len() < 2 {
            return bad("conv2d, conv3d and mlp lists must be non-empty".into());
        }
        if let Some(&last) = self.encoder.last() {
            if self.encoder.len() < 2 || last != self.conv2d[0] {
                return bad(format!(
                    "encoder output {last} must feed conv2d input {}",
                    self.conv2d[0]
                ));
            }
        }
        if self.conv3d[0] != self.feature_channels() {
            return bad(format!(
                "conv3d input {} must equal lifted feature width {}",
                self.conv3d[0],
                self.feature_channels()
            ));
        }
        if self.mlp[0] != *self.conv3d.last().unwrap() {
            return bad(format!("mlp input {} must equal conv3d output", self.mlp[0]));
        }
        if *self.mlp.last().unwrap() != 4 {
            return bad("mlp must output 4 channels (sdf + 3 deformation)".into());
        }
        if self.kernel % 2 == 0 {
            return bad(format!("kernel {} must be odd", self.kernel));
        }
        if self.grid_res < 2 || self.fine_res < self.grid_res {
            return bad(format!(
                "need 2 <= grid_res ({}) <= fine_res ({})",
                self.grid_res, self.fine_res
            ));
        }
        if self.feature_res == 0 {
            return bad("feature_res must be positive".into());
        }
        Ok(())
    }

    /// Shapes of every parameter array in a fixed order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let k = self.kernel;
        let mut out = Vec::new();
        let conv2 = |name: String, cin: usize, cout: usize, out: &mut Vec<_>| {
            out.push((format!("{name}.w"), vec![cout, cin, k, k]));
            out.push((format!("{name}.b"), vec![cout]));
        };
        for (i, w) in self.encoder.windows(2).enumerate() {
            conv2(format!("enc.{i}"), w[0], w[1], &mut out);
        }
        for (i, w) in self.conv2d.windows(2).enumerate() {
            conv2(format!("c2d.{i}.res1"), w[0], w[0], &mut out);
            conv2(format!("c2d.{i}.res2"), w[0], w[0], &mut out);
            if w[0] != w[1] {
                conv2(format!("c2d.{i}.proj"), w[0], w[1], &mut out);
            }
        }
        let conv3 = |name: String, cin: usize, cout: usize, out: &mut Vec<(String, Vec<usize>)>| {
            out.push((format!("{name}.w"), vec![cout, cin, k, k, k]));
            out.push((format!("{name}.b"), vec![cout]));
        };
        for (i, w) in self.conv3d.windows(2).enumerate() {
            conv3(format!("c3d.{i}.res1"), w[0], w[0], &mut out);
            conv3(format!("c3d.{i}.res2"), w[0], w[0], &mut out);
            if w[0] != w[1] {
                conv3(format!("c3d.{i}.proj"), w[0], w[1], &mut out);
            }
        }
        for (i, w) in self.mlp.windows(2).enumerate() {
            out.push((format!("mlp.{i}.w"), vec![w[1], w[0]]));
            out.push((format!("mlp.{i}.b"), vec![w[1]]));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }

    pub fn to_kv(&self) -> KvConfig {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut kv = KvConfig::default();
        kv.set("net.encoder", list(&self.encoder));
        kv.set("net.conv2d", list(&self.conv2d));
        kv.set("net.conv3d", list(&self.conv3d));
        kv.set("net.mlp", list(&self.mlp));
        kv.set("net.d2d", self.d2d);
        kv.set("net.kernel", self.kernel);
        kv.set("net.feature_res", self.feature_res);
        kv.set("net.grid_res", self.grid_res);
        kv.set("net.fine_res", self.fine_res);
        kv.set("net.prior_radius", self.prior_radius);
        kv
    }

    /// Overrides fields present in `kv`; a `net.preset` key selects the base.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let mut c = match kv.get("net.preset") {
            Some(p) => Self::preset(p).ok_or_else(|| ConfigError::Value {
                key: "net.preset".into(),
                value: p.into(),
                detail: "expected `full` or `desk`".into(),
            })?,
            None => Self::desk(),
        };
        kv.read_list("net.encoder", &mut c.encoder)?;
        kv.read_list("net.conv2d", &mut c.conv2d)?;
        kv.read_list("net.conv3d", &mut c.conv3d)?;
        kv.read_list("net.mlp", &mut c.mlp)?;
        kv.read_into("net.d2d", &mut c.d2d)?;
        kv.read_into("net.kernel", &mut c.kernel)?;
        kv.read_into("net.feature_res", &mut c.feature_res)?;
        kv.read_into("net.grid_res", &mut c.grid_res)?;
        kv.read_into("net.fine_res", &mut c.fine_res)?;
        kv.read_into("net.prior_radius", &mut c.prior_radius)?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_preset_matches_reference_widths() {
        let p = NetConfig::full();
        assert_eq!(p.conv2d, vec![768, 512, 256, 128, 32]);
        assert_eq!(p.conv3d, vec![32, 32, 32, 32, 32]);
        assert_eq!(p.mlp, vec![32, 64, 64, 4]);
        assert_eq!((p.d2d, p.grid_res, p.fine_res), (128, 32, 80));
        p.validate().unwrap();
    }

    #[test]
    fn full_parameter_count_near_twenty_million() {
        let n = NetConfig::full().parameter_count() as f64;
        assert!((n - 20e6).abs() / 20e6 < 0.15, "{n}");
    }

    #[test]
    fn desk_is_small() {
        let d = NetConfig::desk();
        d.validate().unwrap();
        assert!(d.parameter_count() <= 200_000);
    }

    #[test]
    fn kv_round_trip() {
        let d = NetConfig::desk();
        assert_eq!(NetConfig::from_kv(&d.to_kv()).unwrap(), d);
        let p = NetConfig::full();
        assert_eq!(NetConfig::from_kv(&p.to_kv()).unwrap(), p);
    }

    #[test]
    fn rejects_mismatched_widths() {
        let mut c = NetConfig::desk();
        c.mlp = vec![8, 16, 3];
        assert!(c.validate().is_err());
        let mut c = NetConfig::desk();
        c.conv3d = vec![4, 4];
        assert!(c.validate().is_err());
    }
}
