//! Accumulating matrix kernels behind the convolutions. Written as
//! axpy-over-rows loops with the reduction dimension unrolled by four, which
//! is the shape LLVM vectorizes well here.

use num_traits::Float;

/// c[M,N] += a[M,K] * b[K,N]
pub(crate) fn mm_nn_acc<F: Float>(c: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(c.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    for i in 0..m {
        let crow = &mut c[i * n..][..n];
        let arow = &a[i * k..][..k];
        let mut l = 0;
        while l + 4 <= k {
            let (a0, a1, a2, a3) = (arow[l], arow[l + 1], arow[l + 2], arow[l + 3]);
            let b0 = &b[l * n..][..n];
            let b1 = &b[(l + 1) * n..][..n];
            let b2 = &b[(l + 2) * n..][..n];
            let b3 = &b[(l + 3) * n..][..n];
            for j in 0..n {
                crow[j] = crow[j] + a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
            l += 4;
        }
        while l < k {
            let al = arow[l];
            let brow = &b[l * n..][..n];
            for j in 0..n {
                crow[j] = crow[j] + al * brow[j];
            }
            l += 1;
        }
    }
}

/// c[K,N] += transpose(a)[K,M] * b[M,N], with a stored as [M,K]
pub(crate) fn mm_tn_acc<F: Float>(c: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(c.len(), k * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..][..k];
        let brow = &b[i * n..][..n];
        for l in 0..k {
            let al = arow[l];
            let crow = &mut c[l * n..][..n];
            for j in 0..n {
                crow[j] = crow[j] + al * brow[j];
            }
        }
    }
}

/// c[M,K] += a[M,N] * transpose(b)[N,K], with b stored as [K,N]
pub(crate) fn mm_nt_acc<F: Float>(c: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(c.len(), m * k);
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    for i in 0..m {
        let arow = &a[i * n..][..n];
        let crow = &mut c[i * k..][..k];
        for l in 0..k {
            let brow = &b[l * n..][..n];
            let mut acc = F::zero();
            for j in 0..n {
                acc = acc + arow[j] * brow[j];
            }
            crow[l] = crow[l] + acc;
        }
    }
}
