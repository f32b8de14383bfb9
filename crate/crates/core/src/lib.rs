//! Geometry-consistent one-sided unpaired image translation.
//!
//! This crate is the allocation-only core: a small reverse-mode autodiff
//! engine over dense `(N, C, H, W)` tensors, the ResNet generator and patch
//! discriminator, the exact geometric transformation group used as the
//! co-regularizer, every training objective, the alternating optimization
//! step, and the evaluation metrics. File formats, image decoding and the
//! command line live in the `gcgan` companion crate.
//!
//! Everything here is `no_std` + `alloc`; the default `std` feature only
//! switches on runtime SIMD dispatch in the matrix kernels.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autograd;
pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod models;
pub mod optim;
pub mod scalar;
pub mod tensor;
pub mod training;
pub mod transforms;

mod kernels;

pub use error::{Error, Result};
pub use scalar::Real;
pub use tensor::{Shape, Tensor};
pub use transforms::GeoTransform;
