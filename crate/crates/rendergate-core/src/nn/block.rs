use num_traits::Float;
use rand_chacha::ChaCha12Rng;

use super::conv::Conv2d;
use super::layers::{BatchNorm, Relu6};
use super::{NnError, Param, Tensor};

/// MobileNetV2-style bottleneck: expand 1x1, depthwise 3x3, project 1x1,
/// each followed by batchnorm, ReLU6 after the first two. The skip
/// connection is taken exactly when the block preserves shape.
#[derive(Debug, Clone)]
pub struct InvertedResidual<F> {
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub expand: Conv2d<F>,
    pub bn_expand: BatchNorm<F>,
    act_expand: Relu6<F>,
    pub depthwise: Conv2d<F>,
    pub bn_depthwise: BatchNorm<F>,
    act_depthwise: Relu6<F>,
    pub project: Conv2d<F>,
    pub bn_project: BatchNorm<F>,
}

impl<F: Float> InvertedResidual<F> {
    pub fn new(in_channels: usize, out_channels: usize, stride: usize, expansion: usize) -> Self {
        assert!(stride == 1 || stride == 2);
        let hidden = in_channels * expansion;
        InvertedResidual {
            stride,
            in_channels,
            out_channels,
            expand: Conv2d::pointwise(in_channels, hidden),
            bn_expand: BatchNorm::new(hidden),
            act_expand: Relu6::new(),
            depthwise: Conv2d::depthwise(hidden, stride),
            bn_depthwise: BatchNorm::new(hidden),
            act_depthwise: Relu6::new(),
            project: Conv2d::pointwise(hidden, out_channels),
            bn_project: BatchNorm::new(out_channels),
        }
    }

    pub fn uses_residual(&self) -> bool {
        self.stride == 1 && self.in_channels == self.out_channels
    }

    pub fn init(&mut self, rng: &mut ChaCha12Rng) {
        self.expand.init(rng);
        self.depthwise.init(rng);
        self.project.init(rng);
    }

    pub fn forward_eval(&self, x: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let t = self.expand.forward_eval(x)?;
        let t = self.bn_expand.forward_eval(&t)?;
        let t = self.act_expand.forward_eval(&t);
        let t = self.depthwise.forward_eval(&t)?;
        let t = self.bn_depthwise.forward_eval(&t)?;
        let t = self.act_depthwise.forward_eval(&t);
        let t = self.project.forward_eval(&t)?;
        let mut y = self.bn_project.forward_eval(&t)?;
        if self.uses_residual() {
            for (o, i) in y.data.iter_mut().zip(x.data.iter()) {
                *o = *o + *i;
            }
        }
        Ok(y)
    }

    pub fn forward_train(&mut self, x: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let t = self.expand.forward_train(x)?;
        let t = self.bn_expand.forward_train(&t)?;
        let t = self.act_expand.forward_train(&t);
        let t = self.depthwise.forward_train(&t)?;
        let t = self.bn_depthwise.forward_train(&t)?;
        let t = self.act_depthwise.forward_train(&t);
        let t = self.project.forward_train(&t)?;
        let mut y = self.bn_project.forward_train(&t)?;
        if self.uses_residual() {
            for (o, i) in y.data.iter_mut().zip(x.data.iter()) {
                *o = *o + *i;
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let g = self.bn_project.backward(dy);
        let g = self.project.backward(&g);
        let g = self.act_depthwise.backward(&g);
        let g = self.bn_depthwise.backward(&g);
        let g = self.depthwise.backward(&g);
        let g = self.act_expand.backward(&g);
        let g = self.bn_expand.backward(&g);
        let mut dx = self.expand.backward(&g);
        if self.uses_residual() {
            for (o, i) in dx.data.iter_mut().zip(dy.data.iter()) {
                *o = *o + *i;
            }
        }
        dx
    }

    pub fn for_each_param(&mut self, f: &mut dyn FnMut(&mut Param<F>)) {
        self.expand.for_each_param(f);
        self.bn_expand.for_each_param(f);
        self.depthwise.for_each_param(f);
        self.bn_depthwise.for_each_param(f);
        self.project.for_each_param(f);
        self.bn_project.for_each_param(f);
    }
}
