//! Link-level simulator for uplink non-orthogonal multiple access (NoMA).
//!
//! Several user equipments (UEs) share the same resource elements, either by
//! full overlap (contention-based OFDMA), non-sparse linear spreading (NLS),
//! or sparse codebooks (SCMA). The receiver is a turbo-like loop between a
//! multi-user detector and a per-UE LDPC decoder: detector soft outputs feed
//! the decoders, decoder extrinsic LLRs feed back as symbol priors, and an
//! interference-cancellation policy decides what gets subtracted from the
//! received grid along the way.
//!
//! Four detectors are provided — MPA (sum-product on the collision factor
//! graph), EPA (expectation propagation with Gaussian moment matching), ESE
//! (scalar matched-filter Gaussian approximation), and soft-PIC MMSE (chip
//! or block-wise) — crossed with four cancellation schedules: hard SIC,
//! enhanced SIC, soft PIC, and hybrid PIC. A Monte Carlo harness sweeps
//! SNR and outer-loop iteration counts and writes BLER records as CSV.
//!
//! Entry points: [`harness::run_sweep`] for experiments,
//! [`receiver::run_receiver`] for a single transmission, and the `nomalink`
//! binary for the command line.

pub mod channel;
pub mod coding;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod messages;
pub mod receiver;
pub mod rng;
pub mod transmitter;

pub use error::{Error, Result};
