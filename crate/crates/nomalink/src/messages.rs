//! Core message types shared by all multi-user detectors.
//!
//! Two currencies circulate in the iterative receiver:
//!
//! - [`GaussianMessage`] — a complex mean / real variance pair, exchanged on
//!   the factor-graph edges of the EPA detector and used internally by the
//!   MMSE and ESE detectors as the soft-symbol statistic.
//! - [`DiscretePrior`] — a probability vector over a symbol-block alphabet,
//!   derived from decoder LLR feedback and consumed by every detector.
//!
//! LLR sign convention, used everywhere in this crate: **positive LLR means
//! bit 0 is more likely**. Bit labels are the binary expansion of the
//! alphabet index, most significant bit first, so LLR segment entry 0
//! corresponds to the top bit of the symbol index.

use std::sync::Arc;

use num_complex::Complex64;

/// Variance floor applied after moment matching, in symbol-energy units.
/// Keeps Gaussian divisions finite when a prior collapses to one point.
pub const V_MIN: f64 = 1e-8;

/// Cap on posterior bit LLR magnitudes emitted by detectors.
pub const LLR_CAP: f64 = 60.0;

// ---------------------------------------------------------------------------
// Gaussian messages
// ---------------------------------------------------------------------------

/// A scalar complex Gaussian belief N(mean, var).
///
/// `var = +inf` encodes the uninformative message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMessage {
    pub mean: Complex64,
    pub var: f64,
}

impl GaussianMessage {
    pub fn new(mean: Complex64, var: f64) -> Self {
        debug_assert!(var >= 0.0, "variance must be non-negative, got {var}");
        Self { mean, var }
    }

    /// The uninformative message (infinite variance, zero precision).
    pub fn uninformative() -> Self {
        Self {
            mean: Complex64::new(0.0, 0.0),
            var: f64::INFINITY,
        }
    }

    pub fn is_uninformative(&self) -> bool {
        self.var.is_infinite()
    }

    /// Precision 1/var (0 for the uninformative message).
    #[inline]
    pub fn precision(&self) -> f64 {
        if self.var.is_infinite() {
            0.0
        } else {
            1.0 / self.var
        }
    }

    /// Precision-weighted mean, mean/var (0 for the uninformative message).
    #[inline]
    pub fn weighted_mean(&self) -> Complex64 {
        if self.var.is_infinite() {
            Complex64::new(0.0, 0.0)
        } else {
            self.mean / self.var
        }
    }

    /// Build from natural parameters (precision, precision-weighted mean).
    pub fn from_natural(precision: f64, weighted_mean: Complex64) -> Self {
        if precision <= 0.0 {
            Self::uninformative()
        } else {
            Self {
                mean: weighted_mean / precision,
                var: 1.0 / precision,
            }
        }
    }

    /// Product of two Gaussian beliefs (precisions add).
    pub fn multiply(&self, other: &Self) -> Self {
        Self::from_natural(
            self.precision() + other.precision(),
            self.weighted_mean() + other.weighted_mean(),
        )
    }

    /// Gaussian division: removes `other` from `self` in natural parameters.
    ///
    /// Returns `None` when the resulting precision is not positive; per the
    /// negative-variance policy the caller then keeps its previous message.
    pub fn divide(&self, other: &Self) -> Option<Self> {
        let precision = self.precision() - other.precision();
        if precision <= 0.0 {
            return None;
        }
        Some(Self::from_natural(
            precision,
            self.weighted_mean() - other.weighted_mean(),
        ))
    }
}

// ---------------------------------------------------------------------------
// Block alphabets and discrete priors
// ---------------------------------------------------------------------------

/// The symbol alphabet of one layer's resource block.
///
/// `symbols[m]` lists the complex values the block places on its occupied
/// resource elements when the `bits`-bit label equals `m`. All blocks of a
/// layer share one alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockAlphabet {
    pub symbols: Vec<Vec<Complex64>>,
    pub bits: usize,
}

impl BlockAlphabet {
    pub fn new(symbols: Vec<Vec<Complex64>>) -> Self {
        let m = symbols.len();
        assert!(
            m >= 2 && m.is_power_of_two(),
            "alphabet size must be a power of two >= 2"
        );
        let bits = m.trailing_zeros() as usize;
        let width = symbols[0].len();
        assert!(symbols.iter().all(|s| s.len() == width));
        Self { symbols, bits }
    }

    /// Alphabet size M.
    #[inline]
    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    /// Number of occupied resource elements per block.
    #[inline]
    pub fn width(&self) -> usize {
        self.symbols[0].len()
    }

    /// Average symbol energy per occupied resource element.
    pub fn energy_per_re(&self) -> f64 {
        let total: f64 = self
            .symbols
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x.norm_sqr())
            .sum();
        total / (self.size() * self.width()) as f64
    }

    /// Distinct values this alphabet projects onto occupied position `offset`,
    /// with the map from symbol index to projected-point index.
    ///
    /// Values closer than 1e-9 are merged, so rotated constellations with
    /// repeated points report their true projected size.
    pub fn projection(&self, offset: usize) -> (Vec<Complex64>, Vec<usize>) {
        let mut points: Vec<Complex64> = Vec::new();
        let mut map = Vec::with_capacity(self.size());
        for sym in &self.symbols {
            let v = sym[offset];
            let idx = points
                .iter()
                .position(|p| (p - v).norm() < 1e-9)
                .unwrap_or_else(|| {
                    points.push(v);
                    points.len() - 1
                });
            map.push(idx);
        }
        (points, map)
    }

    /// Largest projected alphabet size over the occupied positions.
    pub fn max_projected_size(&self) -> usize {
        (0..self.width())
            .map(|o| self.projection(o).0.len())
            .max()
            .unwrap_or(0)
    }
}

/// Probability vector over one block alphabet.
#[derive(Debug, Clone)]
pub struct DiscretePrior {
    pub alphabet: Arc<BlockAlphabet>,
    pub probs: Vec<f64>,
}

impl DiscretePrior {
    /// Uniform prior over the alphabet.
    pub fn uniform(alphabet: Arc<BlockAlphabet>) -> Self {
        let m = alphabet.size();
        Self {
            alphabet,
            probs: vec![1.0 / m as f64; m],
        }
    }

    /// Validates normalization and non-negativity.
    pub fn is_normalized(&self) -> bool {
        self.probs.iter().all(|&p| p >= 0.0) && (self.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12
    }

    /// Prior bit LLRs (marginal over the alphabet), one per label bit.
    pub fn bit_llrs(&self) -> Vec<f64> {
        bit_llrs_from_probs(&self.probs, self.alphabet.bits)
    }
}

// ---------------------------------------------------------------------------
// LLR <-> prior conversions
// ---------------------------------------------------------------------------

/// Probability that a bit with the given LLR equals 0.
#[inline]
pub fn prob_bit_zero(llr: f64) -> f64 {
    debug_assert!(!llr.is_nan());
    1.0 / (1.0 + (-llr).exp())
}

/// Converts a decoder LLR segment into a symbol prior.
///
/// `llrs` holds one entry per label bit (`log2(M)` of them, MSB first);
/// `probs[m]` is the product of the per-bit probabilities under symbol `m`'s
/// label, normalized.
pub fn llr_to_prior(alphabet: Arc<BlockAlphabet>, llrs: &[f64]) -> DiscretePrior {
    let bits = alphabet.bits;
    assert_eq!(
        llrs.len(),
        bits,
        "LLR segment length {} does not match log2(M) = {}",
        llrs.len(),
        bits
    );
    let m = alphabet.size();
    let mut probs = vec![0.0; m];
    let p0: Vec<f64> = llrs.iter().map(|&l| prob_bit_zero(l)).collect();
    for (idx, prob) in probs.iter_mut().enumerate() {
        let mut p = 1.0;
        for (b, &pb0) in p0.iter().enumerate() {
            let bit = (idx >> (bits - 1 - b)) & 1;
            p *= if bit == 0 { pb0 } else { 1.0 - pb0 };
        }
        *prob = p;
    }
    let sum: f64 = probs.iter().sum();
    if sum > 0.0 {
        for p in probs.iter_mut() {
            *p /= sum;
        }
    } else {
        probs.fill(1.0 / m as f64);
    }
    DiscretePrior { alphabet, probs }
}

/// Marginal bit LLRs of a probability vector over `bits`-bit labels.
pub fn bit_llrs_from_probs(probs: &[f64], bits: usize) -> Vec<f64> {
    let mut llrs = Vec::with_capacity(bits);
    for b in 0..bits {
        let mut p0 = 0.0;
        let mut p1 = 0.0;
        for (idx, &p) in probs.iter().enumerate() {
            if (idx >> (bits - 1 - b)) & 1 == 0 {
                p0 += p;
            } else {
                p1 += p;
            }
        }
        llrs.push(p0.ln() - p1.ln());
    }
    llrs
}

/// Marginal bit LLRs from unnormalized log-masses over `bits`-bit labels,
/// capped at +-[`LLR_CAP`].
pub fn bit_llrs_from_log_masses(log_masses: &[f64], bits: usize) -> Vec<f64> {
    let mut llrs = Vec::with_capacity(bits);
    for b in 0..bits {
        let mut zero = Vec::new();
        let mut one = Vec::new();
        for (idx, &lm) in log_masses.iter().enumerate() {
            if (idx >> (bits - 1 - b)) & 1 == 0 {
                zero.push(lm);
            } else {
                one.push(lm);
            }
        }
        let llr = log_sum_exp(&zero) - log_sum_exp(&one);
        llrs.push(llr.clamp(-LLR_CAP, LLR_CAP));
    }
    llrs
}

/// log(sum(exp(x))) with the max factored out; -inf for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

// ---------------------------------------------------------------------------
// Moment matching
// ---------------------------------------------------------------------------

/// Mean and raw (unclipped) variance of the prior's projection onto occupied
/// position `offset`.
pub fn moment_match_raw(prior: &DiscretePrior, offset: usize) -> (Complex64, f64) {
    let mut mean = Complex64::new(0.0, 0.0);
    let mut energy = 0.0;
    for (sym, &p) in prior.alphabet.symbols.iter().zip(prior.probs.iter()) {
        mean += p * sym[offset];
        energy += p * sym[offset].norm_sqr();
    }
    (mean, energy - mean.norm_sqr())
}

/// Gaussian projection of a discrete prior at one occupied position, with the
/// variance floored at [`V_MIN`].
pub fn moment_match(prior: &DiscretePrior, offset: usize) -> GaussianMessage {
    let (mean, var) = moment_match_raw(prior, offset);
    GaussianMessage::new(mean, var.max(V_MIN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn qpsk_alphabet() -> Arc<BlockAlphabet> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Arc::new(BlockAlphabet::new(vec![
            vec![Complex64::new(s, s)],
            vec![Complex64::new(s, -s)],
            vec![Complex64::new(-s, s)],
            vec![Complex64::new(-s, -s)],
        ]))
    }

    #[test]
    fn zero_llrs_give_uniform_prior() {
        let prior = llr_to_prior(qpsk_alphabet(), &[0.0, 0.0]);
        for &p in &prior.probs {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn infinite_llrs_pin_symbol_zero() {
        let prior = llr_to_prior(qpsk_alphabet(), &[f64::INFINITY, f64::INFINITY]);
        assert_eq!(prior.probs[0], 1.0);
        assert_eq!(&prior.probs[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn ln3_llr_prior_matches_direct_evaluation() {
        // sigma(ln 3) = 0.75 on the first bit, 0.5 on the second.
        let prior = llr_to_prior(qpsk_alphabet(), &[3.0f64.ln(), 0.0]);
        let expected = [0.375, 0.375, 0.125, 0.125];
        for (p, e) in prior.probs.iter().zip(expected.iter()) {
            assert!((p - e).abs() < 1e-12, "{p} vs {e}");
        }
    }

    #[test]
    fn llr_prior_round_trip() {
        let mut rng = SimRng::new(11);
        for _ in 0..200 {
            let llrs: Vec<f64> = (0..2).map(|_| 8.0 * (rng.next_f64() - 0.5)).collect();
            let prior = llr_to_prior(qpsk_alphabet(), &llrs);
            let back = prior.bit_llrs();
            for (a, b) in llrs.iter().zip(back.iter()) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn moment_match_uniform_qpsk_is_unit_variance() {
        let prior = DiscretePrior::uniform(qpsk_alphabet());
        let msg = moment_match(&prior, 0);
        assert!(msg.mean.norm() < 1e-15);
        assert!((msg.var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moment_match_point_prior_has_zero_raw_variance() {
        let alphabet = qpsk_alphabet();
        let mut prior = DiscretePrior::uniform(alphabet.clone());
        prior.probs = vec![1.0, 0.0, 0.0, 0.0];
        let (mean, raw_var) = moment_match_raw(&prior, 0);
        assert_eq!(mean, alphabet.symbols[0][0]);
        assert_eq!(raw_var, 0.0);
        assert_eq!(moment_match(&prior, 0).var, V_MIN);
    }

    #[test]
    fn moment_match_bpsk_symmetry() {
        let alphabet = Arc::new(BlockAlphabet::new(vec![
            vec![Complex64::new(1.0, 0.0)],
            vec![Complex64::new(-1.0, 0.0)],
        ]));
        let prior = DiscretePrior::uniform(alphabet);
        let msg = moment_match(&prior, 0);
        assert!(msg.mean.norm() < 1e-15);
        assert!((msg.var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moment_match_variance_nonnegative_for_random_priors() {
        let mut rng = SimRng::new(5);
        let alphabet = qpsk_alphabet();
        for _ in 0..500 {
            let raw: Vec<f64> = (0..4).map(|_| rng.next_f64()).collect();
            let sum: f64 = raw.iter().sum();
            let prior = DiscretePrior {
                alphabet: alphabet.clone(),
                probs: raw.iter().map(|r| r / sum).collect(),
            };
            let (_, var) = moment_match_raw(&prior, 0);
            assert!(var >= -1e-15, "raw variance {var} negative");
        }
    }

    #[test]
    fn divide_removes_a_factor() {
        let num = GaussianMessage::new(Complex64::new(0.0, 0.0), 0.5);
        let den = GaussianMessage::new(Complex64::new(0.0, 0.0), 1.0);
        let out = num.divide(&den).unwrap();
        assert!((out.var - 1.0).abs() < 1e-12);
        assert!(out.mean.norm() < 1e-15);
    }

    #[test]
    fn divide_by_uninformative_is_identity() {
        let msg = GaussianMessage::new(Complex64::new(0.3, -0.7), 0.8);
        let out = msg.divide(&GaussianMessage::uninformative()).unwrap();
        assert!((out.var - msg.var).abs() < 1e-12);
        assert!((out.mean - msg.mean).norm() < 1e-12);
    }

    #[test]
    fn divide_reports_nonpositive_precision() {
        let num = GaussianMessage::new(Complex64::new(0.0, 0.0), 1.0);
        let den = GaussianMessage::new(Complex64::new(0.0, 0.0), 0.5);
        assert!(num.divide(&den).is_none());
    }

    #[test]
    fn multiply_divide_round_trip() {
        let mut rng = SimRng::new(17);
        for _ in 0..300 {
            let a = GaussianMessage::new(
                Complex64::new(rng.next_gaussian(), rng.next_gaussian()),
                0.1 + rng.next_f64(),
            );
            let b = GaussianMessage::new(
                Complex64::new(rng.next_gaussian(), rng.next_gaussian()),
                0.1 + rng.next_f64(),
            );
            let back = a.multiply(&b).divide(&b).unwrap();
            assert!((back.var - a.var).abs() / a.var < 1e-9);
            assert!((back.mean - a.mean).norm() < 1e-9);
        }
    }

    #[test]
    fn projection_merges_repeated_points() {
        // Two-position alphabet that repeats each value on both positions.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let alphabet = BlockAlphabet::new(vec![
            vec![Complex64::new(s, s), Complex64::new(s, s)],
            vec![Complex64::new(s, -s), Complex64::new(s, -s)],
            vec![Complex64::new(-s, s), Complex64::new(-s, s)],
            vec![Complex64::new(-s, -s), Complex64::new(-s, -s)],
        ]);
        let (points, map) = alphabet.projection(1);
        assert_eq!(points.len(), 4);
        assert_eq!(map, vec![0, 1, 2, 3]);
    }
}
