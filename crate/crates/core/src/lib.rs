//! Temporal video compressive sensing toolkit.
//!
//! A coded-exposure camera multiplexes `t` consecutive frames into a single
//! coded frame through per-pixel binary shutters. This crate simulates that
//! acquisition, learns the binary shutter pattern jointly with an MLP decoder
//! ([`encoder`], [`decoder`], [`trainer`]), and reconstructs video from coded
//! frames either with the learned decoder or with classical solvers
//! ([`solvers`]). [`metrics`] scores reconstructions and [`storage`] holds the
//! on-disk formats shared with the command-line driver.

pub mod analysis;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod sensing;
pub mod solvers;
pub mod storage;
pub mod synth;
pub mod trainer;
pub mod volume;

pub use error::{Error, Result};
