use super::{Real, Tensor};
use crate::error::{Error, Result};

/// 2-D max pooling without padding; trailing rows/columns that do not fill a
/// window are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool2d {
    pub pool_h: usize,
    pub pool_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
}

/// Flat input index of the winning element for every output element.
#[derive(Debug, Clone)]
pub struct PoolIndices {
    input_dims: Vec<usize>,
    argmax: Vec<usize>,
}

impl MaxPool2d {
    pub fn new(pool_h: usize, pool_w: usize, stride_h: usize, stride_w: usize) -> Self {
        Self {
            pool_h,
            pool_w,
            stride_h,
            stride_w,
        }
    }

    pub fn output_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        if input[0] < self.pool_h || input[1] < self.pool_w || self.stride_h == 0 || self.stride_w == 0 {
            return Err(Error::ShapeMismatch {
                op: "maxpool2d",
                expected: vec![self.pool_h, self.pool_w],
                got: input.to_vec(),
            });
        }
        Ok([
            (input[0] - self.pool_h) / self.stride_h + 1,
            (input[1] - self.pool_w) / self.stride_w + 1,
            input[2],
        ])
    }

    pub fn forward<T: Real>(&self, input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
        let [n, h, w, c] = input.nhwc("maxpool2d")?;
        let [oh, ow, _] = self.output_shape([h, w, c])?;
        let x = input.data();
        let mut out = Vec::with_capacity(n * oh * ow * c);
        let mut argmax = Vec::with_capacity(out.capacity());
        for b in 0..n {
            for i in 0..oh {
                for j in 0..ow {
                    for ch in 0..c {
                        let mut best_idx = usize::MAX;
                        let mut best = T::neg_infinity();
                        // row-major scan, strict > keeps the first maximum
                        for di in 0..self.pool_h {
                            for dj in 0..self.pool_w {
                                let r = i * self.stride_h + di;
                                let col = j * self.stride_w + dj;
                                let idx = ((b * h + r) * w + col) * c + ch;
                                if best_idx == usize::MAX || x[idx] > best {
                                    best = x[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        out.push(best);
                        argmax.push(best_idx);
                    }
                }
            }
        }
        Ok((
            Tensor::new(vec![n, oh, ow, c], out)?,
            PoolIndices {
                input_dims: input.dims().to_vec(),
                argmax,
            },
        ))
    }

    /// Routes each output gradient to its window's first maximal input.
    pub fn backward<T: Real>(&self, indices: &PoolIndices, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        if grad_out.len() != indices.argmax.len() {
            return Err(Error::ShapeMismatch {
                op: "maxpool2d backward",
                expected: vec![indices.argmax.len()],
                got: grad_out.dims().to_vec(),
            });
        }
        let mut gx = Tensor::zeros(&indices.input_dims);
        let d = gx.data_mut();
        for (&idx, &g) in indices.argmax.iter().zip(grad_out.data()) {
            d[idx] = d[idx] + g;
        }
        Ok(gx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_shapes() {
        let p1 = MaxPool2d::new(7, 5, 7, 5);
        let (y, _) = p1.forward(&Tensor::<f32>::zeros(&[1, 120, 65, 8])).unwrap();
        assert_eq!(y.dims(), &[1, 17, 13, 8]);
        let p2 = MaxPool2d::new(5, 3, 5, 3);
        let (y, _) = p2.forward(&Tensor::<f32>::zeros(&[1, 11, 9, 256])).unwrap();
        assert_eq!(y.dims(), &[1, 2, 3, 256]);
    }

    #[test]
    fn constant_input_gives_constant_output() {
        let p = MaxPool2d::new(2, 2, 2, 2);
        let (y, _) = p.forward(&Tensor::<f32>::full(&[2, 5, 4, 3], 1.5)).unwrap();
        assert!(y.data().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn ties_route_to_first_maximum() {
        let p = MaxPool2d::new(2, 2, 2, 2);
        let x = Tensor::<f32>::new(vec![1, 2, 2, 1], vec![3.0, 3.0, 1.0, 3.0]).unwrap();
        let (y, idx) = p.forward(&x).unwrap();
        assert_eq!(y.data(), &[3.0]);
        let gx = p.backward(&idx, &Tensor::full(&[1, 1, 1, 1], 1.0)).unwrap();
        assert_eq!(gx.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn picks_window_max() {
        let p = MaxPool2d::new(2, 3, 2, 3);
        let x: Vec<f32> = vec![1.0, 5.0, 2.0, 9.0, -1.0, 0.0, 4.0, 3.0, 8.0, 7.0, 6.0, 2.0, 0.0];
        let t = Tensor::new(vec![1, 2, 6, 1], x[..12].to_vec()).unwrap();
        let (y, _) = p.forward(&t).unwrap();
        assert_eq!(y.data(), &[8.0, 9.0]);
    }

    #[test]
    fn too_small_input_errors() {
        let p = MaxPool2d::new(5, 3, 5, 3);
        assert!(p.forward(&Tensor::<f32>::zeros(&[1, 4, 9, 1])).is_err());
    }
}
