//! CRC-16/CCITT-FALSE over bit vectors.
//!
//! Polynomial 0x1021, initial register 0xFFFF, no reflection, no final xor.
//! Payloads are bit slices (`0`/`1` values, most significant bit first), so
//! transport blocks of any bit length are supported.

/// Width of the CRC word in bits.
pub const CRC_WIDTH: usize = 16;

const POLY: u16 = 0x1021;
const INIT: u16 = 0xFFFF;

/// CRC register value over a bit sequence.
pub fn crc16(bits: &[u8]) -> u16 {
    let mut reg = INIT;
    for &bit in bits {
        debug_assert!(bit <= 1);
        let top = (reg >> 15) as u8 & 1;
        reg <<= 1;
        if top ^ bit == 1 {
            reg ^= POLY;
        }
    }
    reg
}

/// Appends the 16-bit CRC (MSB first) to a payload.
pub fn crc_attach(payload: &[u8]) -> Vec<u8> {
    assert!(!payload.is_empty(), "payload must be nonempty");
    let crc = crc16(payload);
    let mut out = Vec::with_capacity(payload.len() + CRC_WIDTH);
    out.extend_from_slice(payload);
    for i in (0..CRC_WIDTH).rev() {
        out.push(((crc >> i) & 1) as u8);
    }
    out
}

/// Verifies a payload-plus-CRC bit vector.
pub fn crc_check(bits: &[u8]) -> bool {
    if bits.len() <= CRC_WIDTH {
        return false;
    }
    let (payload, tail) = bits.split_at(bits.len() - CRC_WIDTH);
    let crc = crc16(payload);
    tail.iter()
        .enumerate()
        .all(|(i, &b)| b == ((crc >> (CRC_WIDTH - 1 - i)) & 1) as u8)
}

/// Converts bytes to bits, MSB first. Used by tests and the demo harness.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for &byte in bytes {
        for i in (0..8).rev() {
            bits.push((byte >> i) & 1);
        }
    }
    bits
}
