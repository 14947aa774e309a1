//! Deterministic pseudorandom number generation for reproducible simulations.
//!
//! Every random quantity in the simulator (payload bits, channel coefficients,
//! noise) is drawn from a [`SimRng`] seeded through [`SimRng::from_path`].
//! A path is the master seed followed by integer coordinates (for example
//! `(master, snr_index, trial_index)`), so each Monte Carlo trial owns an
//! independent stream and results never depend on execution order or thread
//! scheduling.
//!
//! The generator is xoshiro256** with SplitMix64 state expansion; the output
//! sequence is fixed for all time and identical on every platform.

use num_complex::Complex64;

/// One SplitMix64 step: advances the state and returns the mixed output.
#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic simulation RNG (xoshiro256**).
#[derive(Debug, Clone)]
pub struct SimRng {
    s: [u64; 4],
}

impl SimRng {
    /// Seed from a single 64-bit value.
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let mut s = [0u64; 4];
        for word in s.iter_mut() {
            *word = splitmix64(&mut sm);
        }
        // xoshiro must not start from the all-zero state.
        if s == [0, 0, 0, 0] {
            s[0] = 0x9e37_79b9_7f4a_7c15;
        }
        Self { s }
    }

    /// Seed from a master seed plus a stream path.
    ///
    /// Each path coordinate is folded into the state through SplitMix64, so
    /// `from_path(m, &[a, b])` and `from_path(m, &[a', b'])` are independent
    /// streams whenever `(a, b) != (a', b')`.
    pub fn from_path(master: u64, path: &[u64]) -> Self {
        let mut sm = master;
        let mut acc = splitmix64(&mut sm);
        for &coord in path {
            sm ^= coord.wrapping_mul(0xd134_2543_de82_ef95);
            acc ^= splitmix64(&mut sm);
        }
        Self::new(acc)
    }

    /// Next raw 64-bit output.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n).
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Modulo bias is < 2^-50 for every n used here (all far below 2^32).
        (self.next_u64() % n as u64) as usize
    }

    /// One random bit.
    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }

    /// Standard normal sample (Box-Muller).
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_f64().max(1e-300);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Circularly symmetric complex Gaussian with E|z|^2 = `var`.
    pub fn next_complex_gaussian(&mut self, var: f64) -> Complex64 {
        let sigma = (var * 0.5).sqrt();
        Complex64::new(sigma * self.next_gaussian(), sigma * self.next_gaussian())
    }
}
