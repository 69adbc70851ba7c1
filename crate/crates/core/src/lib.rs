//! Numerical laboratory for causal variational principles on non-locally
//! compact spaces, realized at finite resolution: discrete measures on a
//! finite-dimensional exhaustion, per-level action minimization, the
//! diagonal measure construction, and verification of every checkable
//! condition (EL residuals, set-function laws, conditions (B)/(iv),
//! minimality under finite-volume variations, spectral-signature closure,
//! support dimension).

pub mod action;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod exhaustion;
pub mod kernels;
pub mod linalg;
pub mod measure;
pub mod report;
pub mod solver;
pub mod space;

pub use error::{Error, Result};

/// Derives a per-stream seed from a base seed and a stream name (FNV-1a over
/// the name, mixed with the base). Keeps the random draws of one check
/// independent of whether another check is enabled.
pub fn named_seed(base: u64, stream: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= base;
    h = h.wrapping_mul(0x0000_0100_0000_01b3);
    h
}
