//! CSI-based indoor positioning for massive MIMO systems.
//!
//! The crate covers the full pipeline at desk scale: synthetic line-of-sight
//! channel generation for three antenna topologies, construction of the
//! 6-plane real feature tensor from complex CSI, a compact convolutional
//! position-regression network with reverse-mode autodiff, the
//! transfer-learning protocol between topologies, and the evaluation kit
//! (mean error, error CDFs, antenna ablation, letter-path overlays).
//!
//! File formats and the command-line driver live in the companion
//! `csipos-cli` crate.

pub mod channel;
pub mod evalkit;
pub mod features;
pub mod numerics;
pub mod posnet;
pub mod rng;
pub mod trainer;
