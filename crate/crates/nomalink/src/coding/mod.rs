//! Transport-block coding: CRC framing and the LDPC code.
//!
//! A transport block is `payload | CRC-16 | zero padding` in the systematic
//! part of a (3,6)-regular rate-1/2 LDPC codeword. The decoder is flooding
//! sum-product; CRC status gates the interference-cancellation decisions in
//! the outer receiver loop.

pub mod alist;
pub mod crc;
pub mod ldpc;

pub use crc::{crc_attach, crc_check, CRC_WIDTH};
pub use ldpc::{CodeConfig, DecodeResult, SparseParity, PAD_LLR};
