use rayon::prelude::*;

use super::simd::{axpy, dot};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Valid (unpadded) stride-1 2-D convolution.
///
/// Weights are laid out `[out_channels, kh, kw, in_channels]`, which is the
/// same order an NHWC patch is read in, so a patch row dotted with one
/// filter gives one output value.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

struct Geometry {
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn patch_len(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kh: usize, kw: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[out_channels, kh, kw, in_channels]),
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weight.dims()[1], self.weight.dims()[2])
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims()[3]
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Output `[h, w, c]` for a single-sample input `[h, w, c]`.
    pub fn output_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        let (kh, kw) = self.kernel();
        if input[0] < kh || input[1] < kw || input[2] != self.in_channels() {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                expected: vec![kh, kw, self.in_channels()],
                got: input.to_vec(),
            });
        }
        Ok([input[0] - kh + 1, input[1] - kw + 1, self.out_channels()])
    }

    fn geometry(&self, input: &Tensor<T>) -> Result<(usize, Geometry)> {
        let [n, h, w, cin] = input.nhwc("conv2d")?;
        let [oh, ow, cout] = self.output_shape([h, w, cin])?;
        let (kh, kw) = self.kernel();
        Ok((
            n,
            Geometry {
                h,
                w,
                cin,
                kh,
                kw,
                cout,
                oh,
                ow,
            },
        ))
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, g) = self.geometry(input)?;
        let in_len = g.h * g.w * g.cin;
        let out_len = g.positions() * g.cout;
        let k = g.patch_len();
        let weight = self.weight.data();
        let bias = self.bias.data();
        let mut out = vec![T::zero(); n * out_len];
        out.par_chunks_mut(out_len)
            .zip(input.data().par_chunks(in_len))
            .for_each(|(y, x)| {
                let patches = im2col(x, &g);
                for (p, patch) in patches.chunks_exact(k).enumerate() {
                    let row = &mut y[p * g.cout..(p + 1) * g.cout];
                    for (co, filt) in weight.chunks_exact(k).enumerate() {
                        row[co] = bias[co] + dot(patch, filt);
                    }
                }
            });
        Tensor::new(vec![n, g.oh, g.ow, g.cout], out)
    }

    /// Gradients for the loss given `grad_out = dL/d(output)`.
    ///
    /// Per-sample partial sums are reduced in sample order, so the result does
    /// not depend on the thread count.
    pub fn backward(
        &self,
        input: &Tensor<T>,
        grad_out: &Tensor<T>,
        need_input_grad: bool,
    ) -> Result<ConvGrads<T>> {
        let (n, g) = self.geometry(input)?;
        grad_out.expect_dims("conv2d backward", &[n, g.oh, g.ow, g.cout])?;
        let in_len = g.h * g.w * g.cin;
        let out_len = g.positions() * g.cout;
        let k = g.patch_len();
        let weight = self.weight.data();

        let partials: Vec<(Vec<T>, Vec<T>, Option<Vec<T>>)> = input
            .data()
            .par_chunks(in_len)
            .zip(grad_out.data().par_chunks(out_len))
            .map(|(x, gy)| {
                let patches = im2col(x, &g);
                let mut gw = vec![T::zero(); weight.len()];
                let mut gb = vec![T::zero(); g.cout];
                let mut gpatches = need_input_grad.then(|| vec![T::zero(); patches.len()]);
                for (p, patch) in patches.chunks_exact(k).enumerate() {
                    let grow = &gy[p * g.cout..(p + 1) * g.cout];
                    for (co, &go) in grow.iter().enumerate() {
                        if go == T::zero() {
                            continue;
                        }
                        gb[co] = gb[co] + go;
                        axpy(&mut gw[co * k..(co + 1) * k], go, patch);
                        if let Some(gp) = gpatches.as_mut() {
                            axpy(&mut gp[p * k..(p + 1) * k], go, &weight[co * k..(co + 1) * k]);
                        }
                    }
                }
                let gx = gpatches.map(|gp| col2im(&gp, &g));
                (gw, gb, gx)
            })
            .collect();

        let mut gw = vec![T::zero(); weight.len()];
        let mut gb = vec![T::zero(); g.cout];
        let mut gx = need_input_grad.then(|| Vec::with_capacity(n * in_len));
        for (pw, pb, px) in partials {
            axpy(&mut gw, T::one(), &pw);
            axpy(&mut gb, T::one(), &pb);
            if let (Some(all), Some(px)) = (gx.as_mut(), px) {
                all.extend(px);
            }
        }
        Ok(ConvGrads {
            input: gx
                .map(|d| Tensor::new(input.dims().to_vec(), d))
                .transpose()?,
            weight: Tensor::new(self.weight.dims().to_vec(), gw)?,
            bias: Tensor::new(vec![g.cout], gb)?,
        })
    }
}

/// One patch row per output position, each `kh * kw * cin` long.
fn im2col<T: Real>(x: &[T], g: &Geometry) -> Vec<T> {
    let k = g.patch_len();
    let span = g.kw * g.cin;
    let mut out = vec![T::zero(); g.positions() * k];
    for i in 0..g.oh {
        for j in 0..g.ow {
            let row = &mut out[(i * g.ow + j) * k..][..k];
            for di in 0..g.kh {
                let src = &x[((i + di) * g.w + j) * g.cin..][..span];
                row[di * span..(di + 1) * span].copy_from_slice(src);
            }
        }
    }
    out
}

fn col2im<T: Real>(patches: &[T], g: &Geometry) -> Vec<T> {
    let k = g.patch_len();
    let span = g.kw * g.cin;
    let mut x = vec![T::zero(); g.h * g.w * g.cin];
    for i in 0..g.oh {
        for j in 0..g.ow {
            let row = &patches[(i * g.ow + j) * k..][..k];
            for di in 0..g.kh {
                let dst = &mut x[((i + di) * g.w + j) * g.cin..][..span];
                axpy(dst, T::one(), &row[di * span..(di + 1) * span]);
            }
        }
    }
    x
}
