//! Elementwise, reduction and layout ops.

use super::{shape_err, Array, DiffError, Tape, Var};
use crate::Real;

impl Tape {
    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), DiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("add", a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let out = Array::new(va.shape().to_vec(), data)?;
        Ok(self.custom(&[a, b], out, |g| vec![Some(g.to_vec()), Some(g.to_vec())]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("sub", a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x - y).collect();
        let out = Array::new(va.shape().to_vec(), data)?;
        Ok(self.custom(&[a, b], out, |g| {
            vec![Some(g.to_vec()), Some(g.iter().map(|x| -x).collect())]
        }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("mul", a, b)?;
        let va = self.shared(a);
        let vb = self.shared(b);
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let out = Array::new(va.shape().to_vec(), data)?;
        Ok(self.custom(&[a, b], out, move |g| {
            let ga = g.iter().zip(vb.data()).map(|(g, y)| g * y).collect();
            let gb = g.iter().zip(va.data()).map(|(g, x)| g * x).collect();
            vec![Some(ga), Some(gb)]
        }))
    }

    /// Multiplies by a constant.
    pub fn scale(&mut self, a: Var, c: Real) -> Var {
        let out = self.value(a).map(|x| x * c);
        self.custom(&[a], out, move |g| vec![Some(g.iter().map(|x| x * c).collect())])
    }

    /// Adds a constant array of the same shape.
    pub fn add_const(&mut self, a: Var, c: &Array) -> Result<Var, DiffError> {
        if self.shape(a) != c.shape() {
            return Err(shape_err(
                "add_const",
                format!("{:?} vs {:?}", self.shape(a), c.shape()),
            ));
        }
        let va = self.value(a);
        let data = va.data().iter().zip(c.data()).map(|(x, y)| x + y).collect();
        let out = Array::new(va.shape().to_vec(), data)?;
        Ok(self.custom(&[a], out, |g| vec![Some(g.to_vec())]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let s: Real = self.value(a).data().iter().sum();
        self.custom(&[a], Array::scalar(s), move |g| vec![Some(vec![g[0]; n])])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let s: Real = self.value(a).data().iter().sum();
        let inv = 1.0 / n.max(1) as Real;
        self.custom(&[a], Array::scalar(s * inv), move |g| {
            vec![Some(vec![g[0] * inv; n])]
        })
    }

    /// Weighted sum of scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, Real)]) -> Result<Var, DiffError> {
        let mut total = 0.0;
        for &(v, w) in terms {
            if !self.value(v).is_scalar() {
                return Err(shape_err("weighted_sum", "terms must be scalar"));
            }
            total += w * self.value(v).item();
        }
        let parents: Vec<Var> = terms.iter().map(|t| t.0).collect();
        let weights: Vec<Real> = terms.iter().map(|t| t.1).collect();
        Ok(self.custom(&parents, Array::scalar(total), move |g| {
            weights.iter().map(|w| Some(vec![g[0] * w])).collect()
        }))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let va = self.shared(a);
        let out = va.map(|x| x.max(0.0));
        self.custom(&[a], out, move |g| {
            let ga = g
                .iter()
                .zip(va.data())
                .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                .collect();
            vec![Some(ga)]
        })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.scaled_tanh(a, 1.0)
    }

    /// `c * tanh(a)`, output bounded in the open interval `(-c, c)` for
    /// moderate inputs.
    pub fn scaled_tanh(&mut self, a: Var, c: Real) -> Var {
        let out = self.value(a).map(|x| c * x.tanh());
        let y = out.clone();
        self.custom(&[a], out, move |g| {
            let ga = g
                .iter()
                .zip(y.data())
                .map(|(g, &y)| {
                    let t = y / c;
                    g * c * (1.0 - t * t)
                })
                .collect();
            vec![Some(ga)]
        })
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, DiffError> {
        let out = self.value(a).clone().reshape(shape)?;
        Ok(self.custom(&[a], out, |g| vec![Some(g.to_vec())]))
    }

    /// Contiguous slice `[start, start + prod(shape))` of the flat data.
    pub fn slice_flat(&mut self, a: Var, start: usize, shape: &[usize]) -> Result<Var, DiffError> {
        let len: usize = shape.iter().product();
        let total = self.value(a).len();
        if start + len > total {
            return Err(shape_err(
                "slice_flat",
                format!("[{start}, {}) out of {total}", start + len),
            ));
        }
        let out = Array::new(shape.to_vec(), self.value(a).data()[start..start + len].to_vec())?;
        Ok(self.custom(&[a], out, move |g| {
            let mut ga = vec![0.0; total];
            ga[start..start + len].copy_from_slice(g);
            vec![Some(ga)]
        }))
    }

    /// Columns `[c0, c1)` of a 2-D array `[n, m]`, giving `[n, c1 - c0]`.
    pub fn columns(&mut self, a: Var, c0: usize, c1: usize) -> Result<Var, DiffError> {
        let shape = self.shape(a).to_vec();
        if shape.len() != 2 || c0 >= c1 || c1 > shape[1] {
            return Err(shape_err("columns", format!("{shape:?} cols {c0}..{c1}")));
        }
        let (n, m) = (shape[0], shape[1]);
        let k = c1 - c0;
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(n * k);
        for r in 0..n {
            data.extend_from_slice(&src[r * m + c0..r * m + c1]);
        }
        let out = Array::new(vec![n, k], data)?;
        Ok(self.custom(&[a], out, move |g| {
            let mut ga = vec![0.0; n * m];
            for r in 0..n {
                ga[r * m + c0..r * m + c1].copy_from_slice(&g[r * k..(r + 1) * k]);
            }
            vec![Some(ga)]
        }))
    }

    /// Transpose of a 2-D array.
    pub fn transpose(&mut self, a: Var) -> Result<Var, DiffError> {
        let shape = self.shape(a).to_vec();
        if shape.len() != 2 {
            return Err(shape_err("transpose", format!("{shape:?} is not 2-D")));
        }
        let (n, m) = (shape[0], shape[1]);
        let out = Array::new(vec![m, n], transpose_data(self.value(a).data(), n, m))?;
        Ok(self.custom(&[a], out, move |g| vec![Some(transpose_data(g, m, n))]))
    }
}

fn transpose_data(src: &[Real], n: usize, m: usize) -> Vec<Real> {
    let mut out = vec![0.0; n * m];
    for r in 0..n {
        for c in 0..m {
            out[c * n + r] = src[r * m + c];
        }
    }
    out
}
