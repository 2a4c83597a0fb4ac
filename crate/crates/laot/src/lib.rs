//! File formats, synthetic tasks and the experiment runner built on
//! [`laot_core`].

pub use laot_core as core;

pub mod checkpoint;
pub mod error;
pub mod experiments;
pub mod io;
pub mod manifest;
pub mod output;
pub mod synthetic;
