//! Rendering-state inference for GUI test automation.
//!
//! The pipeline: compare consecutive screencast frames with [`imaging::ssim`],
//! segment the screencast into stable and transitional groups
//! ([`segmenter`]), train a small CNN to recognize fully rendered screens
//! ([`classifier`]), and drive test events as soon as the screen settles
//! ([`scheduler`]). A deterministic device simulator ([`sim`]) provides
//! ground truth for all of it.
//!
//! Everything here is `no_std` + `alloc`; IO lives in the companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod classifier;
pub mod eval;
pub mod imaging;
pub mod nn;
pub mod protocol;
pub mod scheduler;
pub mod segmenter;
pub mod sim;

/// Rendering state of a single frame or frame group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RenderLabel {
    /// The screen has settled; every widget is drawn and interactive.
    FullyRendered,
    /// Something is still loading, animating, or fading in.
    PartiallyRendered,
}

impl RenderLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RenderLabel::FullyRendered => "full",
            RenderLabel::PartiallyRendered => "partial",
        }
    }
}

/// Derives an independent RNG seed from a run seed and a component name.
///
/// FNV-1a over the name, mixed with the base seed, so per-screencast and
/// per-component streams stay decoupled no matter the iteration order.
pub fn subseed(base: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // splitmix-style finalizer keeps nearby base seeds uncorrelated
    let mut z = base ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
