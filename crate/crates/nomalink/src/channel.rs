//! Block-fading multi-antenna channel with AWGN, ideal CSI at the receiver.
//!
//! Coefficients are i.i.d. CN(0,1) per coherence block per (layer, antenna):
//! constant across the REs of a block, independent across blocks, layers and
//! antennas. Per-UE transmit amplitudes are set so that the average received
//! SNR per occupied RE per antenna equals the configured value; the SNR axis
//! everywhere in this crate is that per-UE per-antenna Es/N0.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// One fading realization: per (layer, RE, antenna) complex coefficients.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub n_layers: usize,
    pub n_re: usize,
    pub n_rx: usize,
    pub coherence_re: usize,
    coeffs: Vec<Complex64>,
}

impl ChannelRealization {
    /// The coefficient vector across antennas for (layer, re).
    #[inline]
    pub fn h(&self, layer: usize, re: usize) -> &[Complex64] {
        let base = (layer * self.n_re + re) * self.n_rx;
        &self.coeffs[base..base + self.n_rx]
    }

    /// Builds a realization from explicit coefficients, laid out as
    /// `coeffs[(layer * n_re + re) * n_rx + rx]`.
    pub fn from_coeffs(
        n_layers: usize,
        n_re: usize,
        n_rx: usize,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        if coeffs.len() != n_layers * n_re * n_rx {
            return Err(Error::Contract(format!(
                "expected {} coefficients, got {}",
                n_layers * n_re * n_rx,
                coeffs.len()
            )));
        }
        Ok(Self {
            n_layers,
            n_re,
            n_rx,
            coherence_re: n_re.max(1),
            coeffs,
        })
    }
}

/// Draws a block-fading realization.
pub fn generate_channel(
    n_layers: usize,
    n_re: usize,
    n_rx: usize,
    coherence_re: usize,
    rng: &mut SimRng,
) -> Result<ChannelRealization> {
    if coherence_re == 0 || n_re % coherence_re != 0 {
        return Err(Error::Config(format!(
            "coherence length {coherence_re} does not divide n_re {n_re}"
        )));
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n_layers * n_re * n_rx];
    for layer in 0..n_layers {
        for block in 0..n_re / coherence_re {
            for rx in 0..n_rx {
                let h = rng.next_complex_gaussian(1.0);
                for re in block * coherence_re..(block + 1) * coherence_re {
                    coeffs[(layer * n_re + re) * n_rx + rx] = h;
                }
            }
        }
    }
    Ok(ChannelRealization {
        n_layers,
        n_re,
        n_rx,
        coherence_re,
        coeffs,
    })
}

/// Received signal plus everything the receiver is allowed to know:
/// observations, total complex noise variance, the channel (ideal CSI), and
/// the per-layer transmit amplitudes.
#[derive(Debug, Clone)]
pub struct ReceivedGrid {
    /// Observations, `y[re]` holding one value per antenna.
    pub y: Vec<Vec<Complex64>>,
    /// Total complex noise variance per RE per antenna.
    pub noise_var: f64,
    pub channel: ChannelRealization,
    /// Per-layer amplitude sqrt(p_j) applied at the transmitter.
    pub amplitudes: Vec<f64>,
}

impl ReceivedGrid {
    #[inline]
    pub fn n_re(&self) -> usize {
        self.channel.n_re
    }

    #[inline]
    pub fn n_rx(&self) -> usize {
        self.channel.n_rx
    }

    /// Effective channel column (amplitude folded in) for (layer, re),
    /// written into `out`.
    #[inline]
    pub fn eff_channel_into(&self, layer: usize, re: usize, out: &mut [Complex64]) {
        let amp = self.amplitudes[layer];
        for (o, h) in out.iter_mut().zip(self.channel.h(layer, re).iter()) {
            *o = amp * h;
        }
    }

    /// Subtracts one layer's reconstructed contribution from `y` in place,
    /// using exactly the arithmetic of [`apply_channel`].
    pub fn cancel_layer(&mut self, layer: usize, row: &[Complex64]) {
        let amp = self.amplitudes[layer];
        let ReceivedGrid { y, channel, .. } = self;
        for (re, x) in row.iter().enumerate() {
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            let h = channel.h(layer, re);
            for (rx, &hr) in h.iter().enumerate() {
                y[re][rx] -= amp * hr * x;
            }
        }
    }
}

/// Amplitude that yields the requested per-antenna received SNR at unit
/// channel gain and unit symbol energy.
pub fn amplitude_for_snr(snr_db: f64, noise_var: f64) -> f64 {
    (noise_var * 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Superposes all layers over the channel and adds AWGN.
///
/// `tx_rows[j]` is layer j's mapped grid row; `snr_db[j]` its target per-UE
/// per-antenna received SNR on occupied REs.
pub fn apply_channel(
    tx_rows: &[Vec<Complex64>],
    channel: ChannelRealization,
    snr_db: &[f64],
    noise_var: f64,
    rng: &mut SimRng,
) -> Result<ReceivedGrid> {
    let n_layers = channel.n_layers;
    let n_re = channel.n_re;
    let n_rx = channel.n_rx;
    if tx_rows.len() != n_layers || snr_db.len() != n_layers {
        return Err(Error::Contract(format!(
            "expected {n_layers} tx rows and SNR entries, got {} and {}",
            tx_rows.len(),
            snr_db.len()
        )));
    }
    if tx_rows.iter().any(|r| r.len() != n_re) {
        return Err(Error::Contract("tx row length does not match n_re".into()));
    }
    let amplitudes: Vec<f64> = snr_db
        .iter()
        .map(|&s| amplitude_for_snr(s, noise_var))
        .collect();

    let mut y = vec![vec![Complex64::new(0.0, 0.0); n_rx]; n_re];
    for (layer, row) in tx_rows.iter().enumerate() {
        let amp = amplitudes[layer];
        for (re, x) in row.iter().enumerate() {
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            let h = channel.h(layer, re);
            for rx in 0..n_rx {
                y[re][rx] += amp * h[rx] * x;
            }
        }
    }
    for samples in y.iter_mut() {
        for v in samples.iter_mut() {
            *v += rng.next_complex_gaussian(noise_var);
        }
    }

    Ok(ReceivedGrid {
        y,
        noise_var,
        channel,
        amplitudes,
    })
}
