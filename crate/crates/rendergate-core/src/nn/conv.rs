use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::mm::{mm_nn_acc, mm_nt_acc, mm_tn_acc};
use super::{NnError, Param, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvKind {
    Pointwise1x1,
    Depthwise3x3,
    Standard3x3,
}

impl ConvKind {
    pub fn kernel_extent(self) -> usize {
        match self {
            ConvKind::Pointwise1x1 => 1,
            _ => 3,
        }
    }
}

/// 2D cross-correlation in one of three fixed flavors. 3x3 kernels use
/// "same" zero padding with ceil(H / stride) output; 1x1 kernels subsample.
#[derive(Debug, Clone)]
pub struct Conv2d<F> {
    pub kind: ConvKind,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Pointwise [O,I]; depthwise [C,3,3]; standard [O,I,3,3].
    pub weight: Param<F>,
    pub bias: Param<F>,
    cache: Option<Tensor<F>>,
}

impl<F: Float> Conv2d<F> {
    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        Conv2d {
            kind: ConvKind::Pointwise1x1,
            stride: 1,
            in_channels,
            out_channels,
            weight: Param::new(Tensor::zeros(&[out_channels, in_channels])),
            bias: Param::new(Tensor::zeros(&[out_channels])),
            cache: None,
        }
    }

    pub fn depthwise(channels: usize, stride: usize) -> Self {
        assert!(stride == 1 || stride == 2);
        Conv2d {
            kind: ConvKind::Depthwise3x3,
            stride,
            in_channels: channels,
            out_channels: channels,
            weight: Param::new(Tensor::zeros(&[channels, 3, 3])),
            bias: Param::new(Tensor::zeros(&[channels])),
            cache: None,
        }
    }

    pub fn standard(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        assert!(stride == 1 || stride == 2);
        Conv2d {
            kind: ConvKind::Standard3x3,
            stride,
            in_channels,
            out_channels,
            weight: Param::new(Tensor::zeros(&[out_channels, in_channels, 3, 3])),
            bias: Param::new(Tensor::zeros(&[out_channels])),
            cache: None,
        }
    }

    /// Kaiming-uniform weights, zero bias.
    pub fn init(&mut self, rng: &mut ChaCha12Rng) {
        let fan_in = match self.kind {
            ConvKind::Pointwise1x1 => self.in_channels,
            ConvKind::Depthwise3x3 => 9,
            ConvKind::Standard3x3 => self.in_channels * 9,
        };
        let bound = num_traits::Float::sqrt(6.0f64 / fan_in as f64);
        for w in self.weight.value.data.iter_mut() {
            *w = F::from(rng.gen_range(-bound..bound)).unwrap();
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        ((h + self.stride - 1) / self.stride, (w + self.stride - 1) / self.stride)
    }

    fn pad_before(&self, dim: usize) -> usize {
        if self.kind == ConvKind::Pointwise1x1 {
            return 0;
        }
        let out = (dim + self.stride - 1) / self.stride;
        let total = ((out - 1) * self.stride + 3).saturating_sub(dim);
        total / 2
    }

    fn check_input(&self, x: &Tensor<F>) -> Result<(usize, usize, usize, usize), NnError> {
        if x.shape.len() != 4 || x.shape[1] != self.in_channels {
            return Err(NnError::ShapeMismatch {
                what: "conv input",
                expected: vec![0, self.in_channels, 0, 0],
                got: x.shape.clone(),
            });
        }
        Ok(x.dims4())
    }

    pub fn forward_eval(&self, x: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let dims = self.check_input(x)?;
        Ok(self.run_forward(x, dims))
    }

    pub fn forward_train(&mut self, x: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let dims = self.check_input(x)?;
        let y = self.run_forward(x, dims);
        self.cache = Some(x.clone());
        Ok(y)
    }

    fn run_forward(&self, x: &Tensor<F>, dims: (usize, usize, usize, usize)) -> Tensor<F> {
        let (b, _, h, w) = dims;
        let (oh, ow) = self.out_hw(h, w);
        let mut y = Tensor::zeros(&[b, self.out_channels, oh, ow]);
        match self.kind {
            ConvKind::Pointwise1x1 => self.fwd_pointwise(x, &mut y),
            ConvKind::Depthwise3x3 => self.fwd_depthwise(x, &mut y),
            ConvKind::Standard3x3 => self.fwd_standard(x, &mut y),
        }
        let (oh, ow) = (y.shape[2], y.shape[3]);
        for bi in 0..b {
            for o in 0..self.out_channels {
                let bv = self.bias.value.data[o];
                let plane = &mut y.data[(bi * self.out_channels + o) * oh * ow..][..oh * ow];
                for v in plane.iter_mut() {
                    *v = *v + bv;
                }
            }
        }
        y
    }

    fn fwd_pointwise(&self, x: &Tensor<F>, y: &mut Tensor<F>) {
        let (b, c, h, w) = x.dims4();
        let (oh, ow) = (y.shape[2], y.shape[3]);
        let (o, p) = (self.out_channels, oh * ow);
        if self.stride == 1 {
            for bi in 0..b {
                mm_nn_acc(
                    &mut y.data[bi * o * p..][..o * p],
                    &self.weight.value.data,
                    &x.data[bi * c * h * w..][..c * h * w],
                    o,
                    c,
                    p,
                );
            }
        } else {
            let sub = self.subsample(x, oh, ow);
            for bi in 0..b {
                mm_nn_acc(
                    &mut y.data[bi * o * p..][..o * p],
                    &self.weight.value.data,
                    &sub[bi * c * p..][..c * p],
                    o,
                    c,
                    p,
                );
            }
        }
    }

    fn subsample(&self, x: &Tensor<F>, oh: usize, ow: usize) -> Vec<F> {
        let (b, c, h, w) = x.dims4();
        let mut out = vec![F::zero(); b * c * oh * ow];
        for bi in 0..b {
            for ci in 0..c {
                let src = &x.data[(bi * c + ci) * h * w..][..h * w];
                let dst = &mut out[(bi * c + ci) * oh * ow..][..oh * ow];
                for oy in 0..oh {
                    for ox in 0..ow {
                        dst[oy * ow + ox] = src[oy * self.stride * w + ox * self.stride];
                    }
                }
            }
        }
        out
    }

    fn fwd_depthwise(&self, x: &Tensor<F>, y: &mut Tensor<F>) {
        let (b, c, h, w) = x.dims4();
        let (oh, ow) = (y.shape[2], y.shape[3]);
        let (pt, pl) = (self.pad_before(h), self.pad_before(w));
        for bi in 0..b {
            for ci in 0..c {
                let src = &x.data[(bi * c + ci) * h * w..][..h * w];
                let dst = &mut y.data[(bi * c + ci) * oh * ow..][..oh * ow];
                let k = &self.weight.value.data[ci * 9..][..9];
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = F::zero();
                        for ky in 0..3 {
                            let iy = (oy * self.stride + ky) as isize - pt as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..3 {
                                let ix = (ox * self.stride + kx) as isize - pl as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc = acc + k[ky * 3 + kx] * src[iy as usize * w + ix as usize];
                            }
                        }
                        dst[oy * ow + ox] = acc;
                    }
                }
            }
        }
    }

    fn fwd_standard(&self, x: &Tensor<F>, y: &mut Tensor<F>) {
        let (b, c, h, w) = x.dims4();
        let (oh, ow) = (y.shape[2], y.shape[3]);
        let (pt, pl) = (self.pad_before(h), self.pad_before(w));
        for bi in 0..b {
            for o in 0..self.out_channels {
                let dst = &mut y.data[(bi * self.out_channels + o) * oh * ow..][..oh * ow];
                for ci in 0..c {
                    let src = &x.data[(bi * c + ci) * h * w..][..h * w];
                    let k = &self.weight.value.data[(o * c + ci) * 9..][..9];
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = F::zero();
                            for ky in 0..3 {
                                let iy = (oy * self.stride + ky) as isize - pt as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..3 {
                                    let ix = (ox * self.stride + kx) as isize - pl as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    acc = acc + k[ky * 3 + kx] * src[iy as usize * w + ix as usize];
                                }
                            }
                            dst[oy * ow + ox] = dst[oy * ow + ox] + acc;
                        }
                    }
                }
            }
        }
    }

    /// Input gradient; accumulates weight and bias gradients along the way.
    /// Requires a prior `forward_train`.
    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let x = self.cache.take().expect("conv backward without forward_train");
        let (b, c, h, w) = x.dims4();
        let (oh, ow) = (dy.shape[2], dy.shape[3]);
        debug_assert_eq!(dy.shape[1], self.out_channels);
        let mut dx = Tensor::zeros(&[b, c, h, w]);

        // Bias gradient is the spatial sum of dy per output channel.
        for bi in 0..b {
            for o in 0..self.out_channels {
                let plane = &dy.data[(bi * self.out_channels + o) * oh * ow..][..oh * ow];
                let mut acc = F::zero();
                for v in plane {
                    acc = acc + *v;
                }
                self.bias.grad.data[o] = self.bias.grad.data[o] + acc;
            }
        }

        match self.kind {
            ConvKind::Pointwise1x1 => self.bwd_pointwise(&x, dy, &mut dx),
            ConvKind::Depthwise3x3 => self.bwd_depthwise(&x, dy, &mut dx),
            ConvKind::Standard3x3 => self.bwd_standard(&x, dy, &mut dx),
        }
        dx
    }

    fn bwd_pointwise(&mut self, x: &Tensor<F>, dy: &Tensor<F>, dx: &mut Tensor<F>) {
        let (b, c, h, w) = x.dims4();
        let (oh, ow) = (dy.shape[2], dy.shape[3]);
        let (o, p) = (self.out_channels, oh * ow);
        if self.stride == 1 {
            for bi in 0..b {
                let xb = &x.data[bi * c * p..][..c * p];
                let dyb = &dy.data[bi * o * p..][..o * p];
                mm_nt_acc(&mut self.weight.grad.data, dyb, xb, o, c, p);
                mm_tn_acc(&mut dx.data[bi * c * p..][..c * p], &self.weight.value.data, dyb, o, c, p);
            }
        } else {
            let sub = self.subsample(x, oh, ow);
            let mut dsub = vec![F::zero(); b * c * p];
            for bi in 0..b {
                let xb = &sub[bi * c * p..][..c * p];
                let dyb = &dy.data[bi * o * p..][..o * p];
                mm_nt_acc(&mut self.weight.grad.data, dyb, xb, o, c, p);
                mm_tn_acc(&mut dsub[bi * c * p..][..c * p], &self.weight.value.data, dyb, o, c, p);
            }
            // Scatter the subsampled gradient back onto the strided grid.
            for bi in 0..b {
                for ci in 0..c {
                    let src = &dsub[(bi * c + ci) * p..][..p];
                    let dst = &mut dx.data[(bi * c + ci) * h * w..][..h * w];
                    for oy in 0..oh {
                        for ox in 0..ow {
                            dst[oy * self.stride * w + ox * self.stride] = src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }

    fn bwd_depthwise(&mut self, x: &Tensor<F>, dy: &Tensor<F>, dx: &mut Tensor<F>) {
        let (b, c, h, w) = x.dims4();
        let (oh, ow) = (dy.shape[2], dy.shape[3]);
        let (pt, pl) = (self.pad_before(h), self.pad_before(w));
        for bi in 0..b {
            for ci in 0..c {
                let src = &x.data[(bi * c + ci) * h * w..][..h * w];
                let dyp = &dy.data[(bi * c + ci) * oh * ow..][..oh * ow];
                let dxp = &mut dx.data[(bi * c + ci) * h * w..][..h * w];
                let k = &self.weight.value.data[ci * 9..][..9];
                let gk = &mut self.weight.grad.data[ci * 9..][..9];
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = dyp[oy * ow + ox];
                        for ky in 0..3 {
                            let iy = (oy * self.stride + ky) as isize - pt as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..3 {
                                let ix = (ox * self.stride + kx) as isize - pl as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let si = iy as usize * w + ix as usize;
                                gk[ky * 3 + kx] = gk[ky * 3 + kx] + g * src[si];
                                dxp[si] = dxp[si] + g * k[ky * 3 + kx];
                            }
                        }
                    }
                }
            }
        }
    }

    fn bwd_standard(&mut self, x: &Tensor<F>, dy: &Tensor<F>, dx: &mut Tensor<F>) {
        let (b, c, h, w) = x.dims4();
        let (oh, ow) = (dy.shape[2], dy.shape[3]);
        let (pt, pl) = (self.pad_before(h), self.pad_before(w));
        for bi in 0..b {
            for o in 0..self.out_channels {
                let dyp = &dy.data[(bi * self.out_channels + o) * oh * ow..][..oh * ow];
                for ci in 0..c {
                    let src = &x.data[(bi * c + ci) * h * w..][..h * w];
                    let dxp = &mut dx.data[(bi * c + ci) * h * w..][..h * w];
                    let k = &self.weight.value.data[(o * c + ci) * 9..][..9];
                    let gk = &mut self.weight.grad.data[(o * c + ci) * 9..][..9];
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let g = dyp[oy * ow + ox];
                            for ky in 0..3 {
                                let iy = (oy * self.stride + ky) as isize - pt as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..3 {
                                    let ix = (ox * self.stride + kx) as isize - pl as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    let si = iy as usize * w + ix as usize;
                                    gk[ky * 3 + kx] = gk[ky * 3 + kx] + g * src[si];
                                    dxp[si] = dxp[si] + g * k[ky * 3 + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn for_each_param(&mut self, f: &mut dyn FnMut(&mut Param<F>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_identity_passes_input_through() {
        let mut conv = Conv2d::<f32>::pointwise(3, 3);
        for i in 0..3 {
            conv.weight.value.data[i * 3 + i] = 1.0;
        }
        let x = Tensor::from_vec(&[1, 3, 2, 2], (0..12).map(|v| v as f32).collect());
        let y = conv.forward_eval(&x).unwrap();
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn depthwise_all_ones_sums_the_neighborhood() {
        let mut conv = Conv2d::<f32>::depthwise(1, 1);
        conv.weight.value.fill(1.0);
        let x = Tensor::from_vec(&[1, 1, 4, 4], vec![2.0; 16]);
        let y = conv.forward_eval(&x).unwrap();
        assert_eq!(y.shape, vec![1, 1, 4, 4]);
        // interior windows see all nine taps
        assert_eq!(y.data[1 * 4 + 1], 18.0);
        assert_eq!(y.data[2 * 4 + 2], 18.0);
        // corner sees four
        assert_eq!(y.data[0], 8.0);
    }

    #[test]
    fn stride_two_halves_spatial_dims() {
        let conv = Conv2d::<f32>::depthwise(2, 2);
        let x = Tensor::zeros(&[1, 2, 8, 8]);
        let y = conv.forward_eval(&x).unwrap();
        assert_eq!(y.shape, vec![1, 2, 4, 4]);
        let conv = Conv2d::<f32>::standard(2, 5, 2);
        let x = Tensor::zeros(&[2, 2, 7, 5]);
        let y = conv.forward_eval(&x).unwrap();
        assert_eq!(y.shape, vec![2, 5, 4, 3]);
    }

    #[test]
    fn rejects_wrong_channel_count() {
        let conv = Conv2d::<f32>::pointwise(3, 8);
        let x = Tensor::zeros(&[1, 4, 6, 6]);
        assert!(matches!(conv.forward_eval(&x), Err(NnError::ShapeMismatch { .. })));
    }
}
