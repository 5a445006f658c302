//! A small laboratory for adversarial and variational generative models on
//! low-dimensional toy distributions, built on a from-scratch reverse-mode
//! autodiff engine.

pub mod autodiff;
pub mod distributions;
pub mod divergences;
pub mod error;
pub mod nn;
pub mod oracle;
pub mod rng;
pub mod tensor;
pub mod trainers;
pub mod vae;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::Tensor;

// The guide's code samples run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/divergences.md")]
    mod divergences {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
