//! Dominant-frequency estimation from uniformly sampled signals.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const MIN_SIGNAL_LEN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    /// Hz
    pub frequency: f64,
    /// Single-sided amplitude estimate in signal units.
    pub magnitude: f64,
}

/// Single-sided magnitude spectrum of the mean-removed signal, scaled so a
/// unit-amplitude tone on a bin centre reads 1. Index `k` is `k·fs/N` Hz.
pub fn magnitude_spectrum(signal: &[f64]) -> Result<Vec<f64>> {
    if signal.len() < MIN_SIGNAL_LEN {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            min: MIN_SIGNAL_LEN,
        });
    }
    if let Some(i) = signal.iter().position(|x| !x.is_finite()) {
        return Err(Error::NoSpectralPeak(format!("sample {i} is not finite")));
    }
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let spread = signal.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * mean.abs() || spread == 0.0 {
        return Err(Error::NoSpectralPeak("signal is constant".into()));
    }
    let mut buf: Vec<Complex64> = signal.iter().map(|x| Complex64::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(buf[..n / 2 + 1].iter().map(|c| 2.0 * c.norm() / n as f64).collect())
}

/// Strongest spectral line, refined by a parabola through the peak bin and
/// its two neighbours.
pub fn fft_peak(signal: &[f64], fs: f64) -> Result<SpectralPeak> {
    fft_peak_in_band(signal, fs, 0.0, f64::INFINITY)
}

/// Strongest spectral line whose bin lies in `[f_lo, f_hi]` Hz.
pub fn fft_peak_in_band(signal: &[f64], fs: f64, f_lo: f64, f_hi: f64) -> Result<SpectralPeak> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::invalid("fs", format!("sampling rate must be positive, got {fs}")));
    }
    let spectrum = magnitude_spectrum(signal)?;
    let df = fs / signal.len() as f64;
    let last = spectrum.len() - 1;
    let (k, &peak) = spectrum
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(k, _)| {
            let f = *k as f64 * df;
            f >= f_lo && f <= f_hi
        })
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::NoSpectralPeak(format!("no bins in [{f_lo}, {f_hi}] Hz")))?;

    if peak == 0.0 {
        return Err(Error::NoSpectralPeak("signal is constant".into()));
    }
    if k == last {
        return Ok(SpectralPeak {
            frequency: k as f64 * df,
            magnitude: peak,
        });
    }
    let (a, b, c) = (spectrum[k - 1], peak, spectrum[k + 1]);
    let denom = a - 2.0 * b + c;
    let delta = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Ok(SpectralPeak {
        frequency: (k as f64 + delta) * df,
        magnitude: b - 0.25 * (a - c) * delta,
    })
}
