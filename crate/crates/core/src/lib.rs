//! Homogeneous quantum walks on (1+1)-dimensional conformal spacetimes.
//!
//! The conformal factor `Ω(t, x)` enters only through a site-local unitary
//! encoding of the initial doubled state and a decoding of the final one;
//! every operator applied in between is the same flat walk step. The crate
//! also carries the oracles used to check this: exact transport, a spectral
//! flat Dirac solver, a conformal-weight solution and a Crank–Nicolson
//! integrator, plus a convergence harness.
//!
//! Numerical code is generic over [`Real`] (`f32`/`f64`); the aliases below
//! fix the double-precision types used by the harness and the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curved;
pub mod encoder;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod metric;
pub mod real;
pub mod reference;
pub mod walk;

pub use error::{Error, Result};
pub use real::Real;

pub type Grid64 = lattice::Grid<f64>;
pub type SpinorField64 = lattice::SpinorField<f64>;
pub type DoubledField64 = lattice::DoubledField<f64>;
pub type Matrix2x64 = lattice::Matrix2<f64>;
pub type PacketParams64 = lattice::PacketParams<f64>;
pub type CoinParams64 = walk::CoinParams<f64>;
pub type ConformalField64 = metric::ConformalField<f64>;
pub type EncoderParams64 = encoder::EncoderParams<f64>;
pub type EncodingOperator64 = encoder::EncodingOperator<f64>;
pub type PipelineConfig64 = curved::PipelineConfig<f64>;
pub type Pipeline64 = curved::Pipeline<f64>;

pub type Grid32 = lattice::Grid<f32>;
pub type SpinorField32 = lattice::SpinorField<f32>;
pub type DoubledField32 = lattice::DoubledField<f32>;
pub type ConformalField32 = metric::ConformalField<f32>;
pub type PipelineConfig32 = curved::PipelineConfig<f32>;
