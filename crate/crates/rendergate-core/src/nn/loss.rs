use num_traits::Float;

use super::Tensor;

pub fn sigmoid<F: Float>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// Numerically stable binary cross-entropy on a raw logit:
/// max(z,0) - z*y + ln(1 + exp(-|z|)).
pub fn bce_single<F: Float>(logit: F, target: F) -> F {
    let pos = if logit > F::zero() { logit } else { F::zero() };
    pos - logit * target + (F::one() + (-logit.abs()).exp()).ln()
}

/// Mean-reduced BCE over [B,1] logits. Returns (loss, dloss/dlogits),
/// the gradient being (sigmoid(z) - y) / B per element.
pub fn bce_with_logits<F: Float>(logits: &Tensor<F>, targets: &[F]) -> (F, Tensor<F>) {
    assert_eq!(logits.numel(), targets.len());
    let nf = F::from(targets.len()).unwrap();
    let mut loss = F::zero();
    let mut grad = Tensor::zeros(&logits.shape[..]);
    for (i, (&z, &y)) in logits.data.iter().zip(targets.iter()).enumerate() {
        loss = loss + bce_single(z, y);
        grad.data[i] = (sigmoid(z) - y) / nf;
    }
    (loss / nf, grad)
}
