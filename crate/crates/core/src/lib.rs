//! Secrecy capacity of the multi-antenna Gaussian wiretap channel.
//!
//! The channel is `yr = Hr x + zr`, `ye = He x + ze` with `tr E[x x^H] <= P`.
//! The crate computes the secrecy capacity through its min-max characterization
//! `C = min_Phi max_K I(x; yr | ye)`, together with the generalized singular value
//! decomposition of `(Hr, He)`, high-SNR formulas, the masked-MIMO rate and the
//! many-antenna scaling laws.
//!
//! Rates are reported in bits; internal entropies are in nats.

pub mod error;
pub mod gsvd;
pub mod matrix_core;
pub mod regimes;
pub mod scaling;
pub mod secrecy_capacity;

pub use error::{Error, Result};
pub use gsvd::{ChannelPair, GsvdResult, SubspaceDims};
pub use matrix_core::{CMatrix, Tolerance, C64};
pub use secrecy_capacity::{KktReport, NoiseCrossCov, Power, SaddlePoint, SolveOptions};
