//! Pixel primitives: RGB frames, BT.601 luminance, and the windowed
//! structural-similarity score used to compare consecutive frames.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Side length of the Gaussian window used by [`ssim`].
///
/// Both input dimensions must be at least this large.
pub const SSIM_WINDOW: usize = 11;

const SSIM_SIGMA: f64 = 1.5;
// Stabilizers from the reference SSIM constants (K1 = 0.01, K2 = 0.03) at
// 8-bit dynamic range L = 255.
const C1: f32 = (0.01 * 255.0 * 0.01 * 255.0) as f32;
const C2: f32 = (0.03 * 255.0 * 0.03 * 255.0) as f32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImagingError {
    EmptyFrame,
    BadPixelLength { expected: usize, got: usize },
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    TooSmall { width: usize, height: usize, min: usize },
}

impl fmt::Display for ImagingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImagingError::EmptyFrame => write!(f, "frame dimensions must be nonzero"),
            ImagingError::BadPixelLength { expected, got } => {
                write!(f, "pixel buffer holds {got} bytes, dimensions require {expected}")
            }
            ImagingError::DimensionMismatch { a, b } => {
                write!(f, "dimension mismatch: {}x{} vs {}x{}", a.0, a.1, b.0, b.1)
            }
            ImagingError::TooSmall { width, height, min } => {
                write!(f, "{width}x{height} is smaller than the {min}x{min} window")
            }
        }
    }
}

impl core::error::Error for ImagingError {}

/// One screenshot: row-major 8-bit RGB triples plus a capture timestamp.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub timestamp_ms: u64,
}

impl Frame {
    pub fn new(
        width: usize,
        height: usize,
        pixels: Vec<u8>,
        timestamp_ms: u64,
    ) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyFrame);
        }
        let expected = width * height * 3;
        if pixels.len() != expected {
            return Err(ImagingError::BadPixelLength { expected, got: pixels.len() });
        }
        Ok(Frame { width, height, pixels, timestamp_ms })
    }

    /// Constant-color frame (tests and rasterizer starting point).
    pub fn filled(width: usize, height: usize, rgb: [u8; 3], timestamp_ms: u64) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        Frame { width, height, pixels, timestamp_ms }
    }

    pub fn rgb_at(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Frame({}x{} @ {}ms)", self.width, self.height, self.timestamp_ms)
    }
}

/// Per-pixel 8-bit luminance (the Y plane of a frame).
#[derive(Clone, PartialEq, Eq)]
pub struct LuminanceMap {
    pub width: usize,
    pub height: usize,
    pub luma: Vec<u8>,
}

impl fmt::Debug for LuminanceMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LuminanceMap({}x{})", self.width, self.height)
    }
}

/// BT.601 luma: Y = 0.299 R + 0.587 G + 0.114 B, rounded half-up.
///
/// Integer arithmetic; the weights are exact thousandths, so (sum·1000 + 500)
/// / 1000 is the exact rounding with no float in sight.
pub fn rgb_to_luminance(frame: &Frame) -> LuminanceMap {
    let luma = frame
        .pixels
        .chunks_exact(3)
        .map(|p| {
            let y = 299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2]);
            ((y + 500) / 1000) as u8
        })
        .collect();
    LuminanceMap { width: frame.width, height: frame.height, luma }
}

/// Mean structural similarity between two equally sized luminance maps.
///
/// 11x11 Gaussian window (sigma 1.5), valid placements only, mean-pooled to a
/// scalar and clamped to [0, 1]. Scores at or above ~0.99 indicate the two
/// frames show the same settled screen.
pub fn ssim(a: &LuminanceMap, b: &LuminanceMap) -> Result<f64, ImagingError> {
    check_pair(a, b)?;
    let sa = FrameStats::of(a);
    let sb = FrameStats::of(b);
    Ok(ssim_from_stats(&sa, &sb))
}

fn check_pair(a: &LuminanceMap, b: &LuminanceMap) -> Result<(), ImagingError> {
    if a.width != b.width || a.height != b.height {
        return Err(ImagingError::DimensionMismatch {
            a: (a.width, a.height),
            b: (b.width, b.height),
        });
    }
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(ImagingError::TooSmall { width: a.width, height: a.height, min: SSIM_WINDOW });
    }
    Ok(())
}

/// Per-frame blur products, cached so a screencast pass blurs each frame once
/// instead of once per neighboring pair.
pub(crate) struct FrameStats {
    width: usize,
    height: usize,
    plane: Vec<f32>,
    mean: Vec<f32>,
    mean_sq: Vec<f32>,
}

impl FrameStats {
    pub(crate) fn of(map: &LuminanceMap) -> FrameStats {
        debug_assert!(map.width >= SSIM_WINDOW && map.height >= SSIM_WINDOW);
        let plane: Vec<f32> = map.luma.iter().map(|&v| f32::from(v)).collect();
        let sq: Vec<f32> = plane.iter().map(|v| v * v).collect();
        let kernel = gaussian_kernel();
        let mean = blur_valid(&plane, map.width, map.height, &kernel);
        let mean_sq = blur_valid(&sq, map.width, map.height, &kernel);
        FrameStats { width: map.width, height: map.height, plane, mean, mean_sq }
    }

    pub(crate) fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// SSIM from precomputed per-frame stats; the only pairwise work left is the
/// cross-product blur.
pub(crate) fn ssim_from_stats(a: &FrameStats, b: &FrameStats) -> f64 {
    debug_assert_eq!((a.width, a.height), (b.width, b.height));
    let cross: Vec<f32> = a.plane.iter().zip(&b.plane).map(|(x, y)| x * y).collect();
    let kernel = gaussian_kernel();
    let mean_xy = blur_valid(&cross, a.width, a.height, &kernel);

    let mut sum = 0.0f64;
    for i in 0..mean_xy.len() {
        let mx = a.mean[i];
        let my = b.mean[i];
        let vx = a.mean_sq[i] - mx * mx;
        let vy = b.mean_sq[i] - my * my;
        let cov = mean_xy[i] - mx * my;
        let num = (2.0 * mx * my + C1) * (2.0 * cov + C2);
        let den = (mx * mx + my * my + C1) * (vx + vy + C2);
        sum += f64::from(num / den);
    }
    let mean = sum / mean_xy.len() as f64;
    mean.clamp(0.0, 1.0)
}

fn gaussian_kernel() -> [f32; SSIM_WINDOW] {
    let mut k = [0.0f64; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut total = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = num_traits::Float::exp(-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
        total += *v;
    }
    let mut out = [0.0f32; SSIM_WINDOW];
    for i in 0..SSIM_WINDOW {
        out[i] = (k[i] / total) as f32;
    }
    out
}

/// Separable valid-mode blur: output is (w - 10) x (h - 10).
fn blur_valid(src: &[f32], w: usize, h: usize, kernel: &[f32; SSIM_WINDOW]) -> Vec<f32> {
    let ow = w - (SSIM_WINDOW - 1);
    let oh = h - (SSIM_WINDOW - 1);
    let mut tmp = vec![0.0f32; ow * h];
    for r in 0..h {
        let row = &src[r * w..][..w];
        let out = &mut tmp[r * ow..][..ow];
        for j in 0..ow {
            let mut acc = 0.0f32;
            for k in 0..SSIM_WINDOW {
                acc += kernel[k] * row[j + k];
            }
            out[j] = acc;
        }
    }
    let mut dst = vec![0.0f32; ow * oh];
    for i in 0..oh {
        let out = &mut dst[i * ow..][..ow];
        for k in 0..SSIM_WINDOW {
            let c = kernel[k];
            let srow = &tmp[(i + k) * ow..][..ow];
            for j in 0..ow {
                out[j] += c * srow[j];
            }
        }
    }
    dst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn map_from(w: usize, h: usize, mut f: impl FnMut(usize, usize) -> u8) -> LuminanceMap {
        let mut luma = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                luma.push(f(x, y));
            }
        }
        LuminanceMap { width: w, height: h, luma }
    }

    fn random_map(w: usize, h: usize, seed: u64) -> LuminanceMap {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        map_from(w, h, |_, _| rng.gen())
    }

    /// Direct per-window SSIM, no separable tricks. The oracle for `ssim`.
    fn naive_ssim(a: &LuminanceMap, b: &LuminanceMap) -> f64 {
        let kernel = gaussian_kernel();
        let mut w2 = [[0.0f64; SSIM_WINDOW]; SSIM_WINDOW];
        for i in 0..SSIM_WINDOW {
            for j in 0..SSIM_WINDOW {
                w2[i][j] = f64::from(kernel[i]) * f64::from(kernel[j]);
            }
        }
        let (c1, c2) = (f64::from(C1), f64::from(C2));
        let ow = a.width - SSIM_WINDOW + 1;
        let oh = a.height - SSIM_WINDOW + 1;
        let mut sum = 0.0;
        for wy in 0..oh {
            for wx in 0..ow {
                let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..SSIM_WINDOW {
                    for j in 0..SSIM_WINDOW {
                        let x = f64::from(a.luma[(wy + i) * a.width + wx + j]);
                        let y = f64::from(b.luma[(wy + i) * b.width + wx + j]);
                        let w = w2[i][j];
                        mx += w * x;
                        my += w * y;
                        mxx += w * x * x;
                        myy += w * y * y;
                        mxy += w * x * y;
                    }
                }
                let (vx, vy, cov) = (mxx - mx * mx, myy - my * my, mxy - mx * my);
                sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
        (sum / (ow * oh) as f64).clamp(0.0, 1.0)
    }

    #[test]
    fn luma_weights_sum_to_identity_on_gray() {
        let white = Frame::filled(4, 3, [255, 255, 255], 0);
        assert!(rgb_to_luminance(&white).luma.iter().all(|&v| v == 255));
        let black = Frame::filled(4, 3, [0, 0, 0], 0);
        assert!(rgb_to_luminance(&black).luma.iter().all(|&v| v == 0));
    }

    #[test]
    fn luma_pure_red_rounds_to_76() {
        // 0.299 * 255 = 76.245
        let red = Frame::filled(2, 2, [255, 0, 0], 0);
        assert!(rgb_to_luminance(&red).luma.iter().all(|&v| v == 76));
    }

    #[test]
    fn luma_rounds_half_up() {
        // G = 250: 0.587 * 250 = 146.75 -> 147; R = 5 alone: 1.495 -> 1
        let f = Frame::new(1, 1, vec![0, 250, 0], 0).unwrap();
        assert_eq!(rgb_to_luminance(&f).luma[0], 147);
        let f = Frame::new(1, 1, vec![5, 0, 0], 0).unwrap();
        assert_eq!(rgb_to_luminance(&f).luma[0], 1);
    }

    #[test]
    fn self_similarity_is_exactly_one() {
        for seed in 0..5 {
            let a = random_map(19, 23, seed);
            let s = ssim(&a, &a).unwrap();
            assert!((s - 1.0).abs() <= 1e-9, "self-ssim {s}");
        }
    }

    #[test]
    fn constant_extremes_match_analytic_value() {
        // Zero variances collapse the formula to C1 / (255^2 + C1).
        let a = map_from(16, 16, |_, _| 0);
        let b = map_from(16, 16, |_, _| 255);
        let expected = 6.5025 / (255.0f64 * 255.0 + 6.5025);
        let s = ssim(&a, &b).unwrap();
        assert!((s - expected).abs() <= 1e-6, "got {s}, want {expected}");
    }

    #[test]
    fn matches_naive_oracle_on_random_maps() {
        for seed in 0..8 {
            let a = random_map(17, 13, 100 + seed);
            let b = random_map(17, 13, 200 + seed);
            let fast = ssim(&a, &b).unwrap();
            let slow = naive_ssim(&a, &b);
            assert!((fast - slow).abs() <= 2e-5, "fast {fast} vs naive {slow}");
        }
    }

    #[test]
    fn rejects_mismatched_and_tiny_inputs() {
        let a = random_map(12, 12, 1);
        let b = random_map(12, 13, 2);
        assert!(matches!(ssim(&a, &b), Err(ImagingError::DimensionMismatch { .. })));
        let c = random_map(10, 12, 3);
        assert!(matches!(ssim(&c, &c), Err(ImagingError::TooSmall { .. })));
    }

    #[test]
    fn frame_validation() {
        assert!(matches!(Frame::new(0, 4, vec![], 0), Err(ImagingError::EmptyFrame)));
        assert!(matches!(
            Frame::new(2, 2, vec![0; 11], 0),
            Err(ImagingError::BadPixelLength { expected: 12, got: 11 })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ssim_is_symmetric(seed_a in 0u64..500, seed_b in 500u64..1000) {
            let a = random_map(14, 12, seed_a);
            let b = random_map(14, 12, seed_b);
            let ab = ssim(&a, &b).unwrap();
            let ba = ssim(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
        }

        #[test]
        fn ssim_stays_in_unit_range(seed_a in 0u64..1000, seed_b in 0u64..1000) {
            let a = random_map(13, 15, seed_a);
            let b = random_map(13, 15, seed_b);
            let s = ssim(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn luminance_is_monotone_per_channel(r in 0u8..255, g in 0u8..255, b in 0u8..255, ch in 0usize..3) {
            let base = Frame::new(1, 1, vec![r, g, b], 0).unwrap();
            let mut raised = vec![r, g, b];
            raised[ch] += 1;
            let bumped = Frame::new(1, 1, raised, 0).unwrap();
            prop_assert!(rgb_to_luminance(&bumped).luma[0] >= rgb_to_luminance(&base).luma[0]);
        }
    }
}
