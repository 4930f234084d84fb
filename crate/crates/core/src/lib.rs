//! Core algorithms for raw-byte malware traffic detection.
//!
//! Everything in this crate operates on in-memory bytes and tensors: packet
//! captures are parsed from byte slices, flows are assembled from packet
//! streams, raw-byte representations are built as dense tensors, and the
//! neural-network engine, shallow baselines and evaluation metrics are all
//! self-contained. File IO, serialization formats and the command-line front
//! end live in the companion `deepmal-tools` crate.
//!
//! The crate is `no_std` (with `alloc`) so the pipeline can run anywhere a
//! heap exists; all float math goes through `num_traits::Float`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod eval;
pub mod expert;
pub mod flow;
pub mod ingest;
pub mod models;
pub mod nn;
pub mod pcap;
pub mod repr;
pub mod rng;
pub mod shallow;
pub mod synth;
pub mod tensor;

pub use tensor::Tensor;
