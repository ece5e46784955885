use super::simd::{axpy, dot};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Fully connected layer, `out = x W + b` with `W` stored `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[inputs, outputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn batch(&self, input: &Tensor<T>) -> Result<usize> {
        match input.dims() {
            [n, f] if *f == self.inputs() => Ok(*n),
            other => Err(Error::ShapeMismatch {
                op: "dense",
                expected: vec![self.inputs()],
                got: other.to_vec(),
            }),
        }
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.batch(input)?;
        let (fin, fout) = (self.inputs(), self.outputs());
        let w = self.weight.data();
        let mut out = Vec::with_capacity(n * fout);
        for x in input.data().chunks_exact(fin) {
            let mut row = self.bias.data().to_vec();
            for (i, &xi) in x.iter().enumerate() {
                if xi != T::zero() {
                    axpy(&mut row, xi, &w[i * fout..(i + 1) * fout]);
                }
            }
            out.extend(row);
        }
        Tensor::new(vec![n, fout], out)
    }

    pub fn backward(&self, input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<DenseGrads<T>> {
        let n = self.batch(input)?;
        let (fin, fout) = (self.inputs(), self.outputs());
        grad_out.expect_dims("dense backward", &[n, fout])?;
        let w = self.weight.data();
        let mut gw = vec![T::zero(); w.len()];
        let mut gb = vec![T::zero(); fout];
        let mut gx = Vec::with_capacity(n * fin);
        for (x, g) in input.data().chunks_exact(fin).zip(grad_out.data().chunks_exact(fout)) {
            axpy(&mut gb, T::one(), g);
            for (i, &xi) in x.iter().enumerate() {
                if xi != T::zero() {
                    axpy(&mut gw[i * fout..(i + 1) * fout], xi, g);
                }
                gx.push(dot(&w[i * fout..(i + 1) * fout], g));
            }
        }
        Ok(DenseGrads {
            input: Tensor::new(vec![n, fin], gx)?,
            weight: Tensor::new(vec![fin, fout], gw)?,
            bias: Tensor::new(vec![fout], gb)?,
        })
    }
}
