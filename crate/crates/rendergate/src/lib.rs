//! IO and orchestration around rendergate-core: screencasts and models on
//! disk, a live frame stream over TCP, the training/benchmark pipelines,
//! and the command-line surface.

pub mod appconfig;
pub mod cli;
pub mod clock;
pub mod fsio;
pub mod pipelines;
pub mod stream;
