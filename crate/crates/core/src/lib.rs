//! Bilinear control of the linear KdV–Schrödinger equation
//!
//! ```text
//! ∂t ψ + ∂x³ ψ − iα ∂x² ψ = i (u(t)·Q(x)) ψ,   x ∈ 𝕋
//! ```
//!
//! The crate is `no_std` (with `alloc`). It contains the exact trigonometric
//! algebra behind the saturation method, a split-step spectral solver, flows
//! of circle diffeomorphisms, a compiler from target operators to
//! piecewise-constant control programs, and the oracles used to verify it.
#![no_std]

extern crate alloc;

mod error;
pub mod fft;
pub mod flows;
pub mod spectral;
pub mod synthesis;
pub mod trig;
pub mod verification;

pub use error::Error;
pub use num_complex::Complex64;

pub type Result<T> = core::result::Result<T, Error>;
