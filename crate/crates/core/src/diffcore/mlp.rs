use super::{gemm, shape_err, Array, DiffError, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

/// One affine layer of an MLP as tape variables: `weight: [out, in]`,
/// `bias: [out]`.
#[derive(Clone, Copy, Debug)]
pub struct DenseLayer {
    pub weight: Var,
    pub bias: Var,
    pub activation: Activation,
}

impl Tape {
    /// `x: [N, in]` times `w: [out, in]` transposed plus `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, DiffError> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        let bs = self.shape(b).to_vec();
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] || bs != [ws[0]] {
            return Err(shape_err(
                "linear",
                format!("x {xs:?}, weight {ws:?}, bias {bs:?}"),
            ));
        }
        let (n, din, dout) = (xs[0], xs[1], ws[0]);
        let xv = self.shared(x);
        let wv = self.shared(w);
        let bv = self.value(b).data();
        let mut out = Vec::with_capacity(n * dout);
        for _ in 0..n {
            out.extend_from_slice(bv);
        }
        gemm(n, din, dout, 1.0, xv.data(), false, wv.data(), true, 1.0, &mut out);
        let out = Array::new(vec![n, dout], out)?;
        Ok(self.custom(&[x, w, b], out, move |g| {
            let mut gx = vec![0.0; n * din];
            gemm(n, dout, din, 1.0, g, false, wv.data(), false, 0.0, &mut gx);
            let mut gw = vec![0.0; dout * din];
            gemm(dout, n, din, 1.0, g, true, xv.data(), false, 0.0, &mut gw);
            let mut gb = vec![0.0; dout];
            for row in g.chunks(dout) {
                gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
            vec![Some(gx), Some(gw), Some(gb)]
        }))
    }

    pub fn activate(&mut self, x: Var, act: Activation) -> Var {
        match act {
            Activation::Identity => x,
            Activation::Relu => self.relu(x),
            Activation::Tanh => self.tanh(x),
        }
    }

    /// Affine + activation composition over `x: [N, in]`.
    pub fn mlp_forward(&mut self, x: Var, layers: &[DenseLayer]) -> Result<Var, DiffError> {
        let mut h = x;
        for layer in layers {
            h = self.linear(h, layer.weight, layer.bias)?;
            h = self.activate(h, layer.activation);
        }
        Ok(h)
    }
}
