use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::mm::{mm_nn_acc, mm_nt_acc, mm_tn_acc};
use super::{NnError, Param, Tensor};

/// Per-channel batch normalization over [B,C,H,W].
///
/// Normalization uses the biased batch variance; the running variance
/// keeps the unbiased estimate, matching the convention trained
/// checkpoints elsewhere assume.
#[derive(Debug, Clone)]
pub struct BatchNorm<F> {
    pub channels: usize,
    pub momentum: F,
    pub eps: F,
    pub gamma: Param<F>,
    pub beta: Param<F>,
    pub running_mean: Tensor<F>,
    pub running_var: Tensor<F>,
    cache: Option<BnCache<F>>,
}

#[derive(Debug, Clone)]
struct BnCache<F> {
    xhat: Tensor<F>,
    inv_std: Vec<F>,
}

impl<F: Float> BatchNorm<F> {
    pub fn new(channels: usize) -> Self {
        let mut gamma = Tensor::zeros(&[channels]);
        gamma.fill(F::one());
        let mut running_var = Tensor::zeros(&[channels]);
        running_var.fill(F::one());
        BatchNorm {
            channels,
            momentum: F::from(0.1).unwrap(),
            eps: F::from(1e-5).unwrap(),
            gamma: Param::new(gamma),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var,
            cache: None,
        }
    }

    fn check_input(&self, x: &Tensor<F>) -> Result<(), NnError> {
        if x.shape.len() != 4 || x.shape[1] != self.channels {
            return Err(NnError::ShapeMismatch {
                what: "batchnorm input",
                expected: vec![0, self.channels, 0, 0],
                got: x.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn forward_train(&mut self, x: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        self.check_input(x)?;
        let (b, c, h, w) = x.dims4();
        let n = b * h * w;
        let nf = F::from(n).unwrap();
        let mut y = Tensor::zeros(&x.shape[..]);
        let mut xhat = Tensor::zeros(&x.shape[..]);
        let mut inv_std = vec![F::zero(); c];
        for ci in 0..c {
            let mut sum = F::zero();
            let mut sum_sq = F::zero();
            for bi in 0..b {
                let plane = &x.data[(bi * c + ci) * h * w..][..h * w];
                for v in plane {
                    sum = sum + *v;
                    sum_sq = sum_sq + *v * *v;
                }
            }
            let mean = sum / nf;
            let var_biased = sum_sq / nf - mean * mean;
            let var_biased = if var_biased < F::zero() { F::zero() } else { var_biased };
            let istd = F::one() / (var_biased + self.eps).sqrt();
            inv_std[ci] = istd;

            // Running stats track the unbiased variance.
            let var_unbiased = if n > 1 {
                var_biased * nf / F::from(n - 1).unwrap()
            } else {
                var_biased
            };
            let keep = F::one() - self.momentum;
            self.running_mean.data[ci] = keep * self.running_mean.data[ci] + self.momentum * mean;
            self.running_var.data[ci] = keep * self.running_var.data[ci] + self.momentum * var_unbiased;

            let (g, bta) = (self.gamma.value.data[ci], self.beta.value.data[ci]);
            for bi in 0..b {
                let base = (bi * c + ci) * h * w;
                for i in 0..h * w {
                    let xh = (x.data[base + i] - mean) * istd;
                    xhat.data[base + i] = xh;
                    y.data[base + i] = g * xh + bta;
                }
            }
        }
        self.cache = Some(BnCache { xhat, inv_std });
        Ok(y)
    }

    pub fn forward_eval(&self, x: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        self.check_input(x)?;
        let (b, c, h, w) = x.dims4();
        let mut y = Tensor::zeros(&x.shape[..]);
        for ci in 0..c {
            let istd = F::one() / (self.running_var.data[ci] + self.eps).sqrt();
            let mean = self.running_mean.data[ci];
            let (g, bta) = (self.gamma.value.data[ci], self.beta.value.data[ci]);
            for bi in 0..b {
                let base = (bi * c + ci) * h * w;
                for i in 0..h * w {
                    y.data[base + i] = g * (x.data[base + i] - mean) * istd + bta;
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let BnCache { xhat, inv_std } = self.cache.take().expect("bn backward without forward_train");
        let (b, c, h, w) = dy.dims4();
        let n = b * h * w;
        let nf = F::from(n).unwrap();
        let mut dx = Tensor::zeros(&dy.shape[..]);
        for ci in 0..c {
            // Channel-wise reductions feed the standard batchnorm gradient:
            // dx = gamma*istd/n * (n*dy - sum(dy) - xhat*sum(dy*xhat))
            let mut sum_dy = F::zero();
            let mut sum_dy_xhat = F::zero();
            for bi in 0..b {
                let base = (bi * c + ci) * h * w;
                for i in 0..h * w {
                    let g = dy.data[base + i];
                    sum_dy = sum_dy + g;
                    sum_dy_xhat = sum_dy_xhat + g * xhat.data[base + i];
                }
            }
            self.gamma.grad.data[ci] = self.gamma.grad.data[ci] + sum_dy_xhat;
            self.beta.grad.data[ci] = self.beta.grad.data[ci] + sum_dy;

            let scale = self.gamma.value.data[ci] * inv_std[ci] / nf;
            for bi in 0..b {
                let base = (bi * c + ci) * h * w;
                for i in 0..h * w {
                    let term = nf * dy.data[base + i] - sum_dy - xhat.data[base + i] * sum_dy_xhat;
                    dx.data[base + i] = scale * term;
                }
            }
        }
        dx
    }

    pub fn for_each_param(&mut self, f: &mut dyn FnMut(&mut Param<F>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}

/// Elementwise min(max(x, 0), 6).
#[derive(Debug, Clone, Default)]
pub struct Relu6<F> {
    cache: Option<Tensor<F>>,
}

impl<F: Float> Relu6<F> {
    pub fn new() -> Self {
        Relu6 { cache: None }
    }

    pub fn forward_eval(&self, x: &Tensor<F>) -> Tensor<F> {
        let six = F::from(6.0).unwrap();
        let mut y = x.clone();
        for v in y.data.iter_mut() {
            *v = if *v < F::zero() {
                F::zero()
            } else if *v > six {
                six
            } else {
                *v
            };
        }
        y
    }

    pub fn forward_train(&mut self, x: &Tensor<F>) -> Tensor<F> {
        let y = self.forward_eval(x);
        self.cache = Some(x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let x = self.cache.take().expect("relu6 backward without forward_train");
        let six = F::from(6.0).unwrap();
        let mut dx = dy.clone();
        for (d, v) in dx.data.iter_mut().zip(x.data.iter()) {
            // Kink points pass zero gradient, matching the subgradient choice
            // the finite-difference checker nudges inputs away from.
            if !(*v > F::zero() && *v < six) {
                *d = F::zero();
            }
        }
        dx
    }
}

/// Fully connected y = xW^T + b over [B, in] inputs.
#[derive(Debug, Clone)]
pub struct Linear<F> {
    pub in_features: usize,
    pub out_features: usize,
    /// [out, in]
    pub weight: Param<F>,
    pub bias: Param<F>,
    cache: Option<Tensor<F>>,
}

impl<F: Float> Linear<F> {
    pub fn new(in_features: usize, out_features: usize) -> Self {
        Linear {
            in_features,
            out_features,
            weight: Param::new(Tensor::zeros(&[out_features, in_features])),
            bias: Param::new(Tensor::zeros(&[out_features])),
            cache: None,
        }
    }

    pub fn init(&mut self, rng: &mut rand_chacha::ChaCha12Rng) {
        use rand::Rng;
        let bound = num_traits::Float::sqrt(6.0f64 / self.in_features as f64);
        for w in self.weight.value.data.iter_mut() {
            *w = F::from(rng.gen_range(-bound..bound)).unwrap();
        }
    }

    fn check_input(&self, x: &Tensor<F>) -> Result<(usize, usize), NnError> {
        let (b, d) = x.dims2();
        if d != self.in_features {
            return Err(NnError::ShapeMismatch {
                what: "linear input",
                expected: vec![0, self.in_features],
                got: x.shape.clone(),
            });
        }
        Ok((b, d))
    }

    fn run_forward(&self, x: &Tensor<F>, b: usize) -> Tensor<F> {
        let (o, d) = (self.out_features, self.in_features);
        let mut y = Tensor::zeros(&[b, o]);
        // y[b,o] = sum_d x[b,d] * w[o,d]
        mm_nt_acc(&mut y.data, &x.data, &self.weight.value.data, b, o, d);
        for bi in 0..b {
            for oi in 0..o {
                y.data[bi * o + oi] = y.data[bi * o + oi] + self.bias.value.data[oi];
            }
        }
        y
    }

    pub fn forward_eval(&self, x: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let (b, _) = self.check_input(x)?;
        Ok(self.run_forward(x, b))
    }

    pub fn forward_train(&mut self, x: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let (b, _) = self.check_input(x)?;
        let y = self.run_forward(x, b);
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let x = self.cache.take().expect("linear backward without forward_train");
        let (b, d) = x.dims2();
        let o = self.out_features;
        // dW[o,d] += dy^T x ; dx[b,d] += dy W
        mm_tn_acc(&mut self.weight.grad.data, &dy.data, &x.data, b, o, d);
        for bi in 0..b {
            for oi in 0..o {
                self.bias.grad.data[oi] = self.bias.grad.data[oi] + dy.data[bi * o + oi];
            }
        }
        let mut dx = Tensor::zeros(&[b, d]);
        mm_nn_acc(&mut dx.data, &dy.data, &self.weight.value.data, b, o, d);
        dx
    }

    pub fn for_each_param(&mut self, f: &mut dyn FnMut(&mut Param<F>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Mean over the spatial dims: [B,C,H,W] -> [B,C].
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    in_hw: Option<(usize, usize)>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        GlobalAvgPool { in_hw: None }
    }

    pub fn forward_eval<F: Float>(&self, x: &Tensor<F>) -> Tensor<F> {
        let (b, c, h, w) = x.dims4();
        let nf = F::from(h * w).unwrap();
        let mut y = Tensor::zeros(&[b, c]);
        for bi in 0..b {
            for ci in 0..c {
                let plane = &x.data[(bi * c + ci) * h * w..][..h * w];
                let mut acc = F::zero();
                for v in plane {
                    acc = acc + *v;
                }
                y.data[bi * c + ci] = acc / nf;
            }
        }
        y
    }

    pub fn forward_train<F: Float>(&mut self, x: &Tensor<F>) -> Tensor<F> {
        let (_, _, h, w) = x.dims4();
        self.in_hw = Some((h, w));
        self.forward_eval(x)
    }

    pub fn backward<F: Float>(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let (h, w) = self.in_hw.take().expect("pool backward without forward_train");
        let (b, c) = dy.dims2();
        let nf = F::from(h * w).unwrap();
        let mut dx = Tensor::zeros(&[b, c, h, w]);
        for bi in 0..b {
            for ci in 0..c {
                let g = dy.data[bi * c + ci] / nf;
                let plane = &mut dx.data[(bi * c + ci) * h * w..][..h * w];
                for v in plane.iter_mut() {
                    *v = g;
                }
            }
        }
        dx
    }
}
