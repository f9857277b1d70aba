use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-sided power spectral density, channel × frequency, in units²/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub freqs_hz: Vec<f64>,
    pub power: Array2<f64>,
}

impl Psd {
    /// Index of the grid bin closest to `freq_hz`.
    pub fn bin(&self, freq_hz: f64) -> usize {
        self.freqs_hz
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - freq_hz).abs().total_cmp(&(b.1 - freq_hz).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Hann-windowed periodogram with a fixed segment length and zero-padded
/// transform size.
///
/// The frequency grid spacing is `sample_rate / nfft`; a 0.5 s segment at
/// 512 Hz (256 samples) padded to 512 points gives a 1 Hz grid.
#[derive(Clone)]
pub struct WelchEstimator {
    segment: usize,
    nfft: usize,
    sample_rate: f64,
    window: Vec<f64>,
    scale: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for WelchEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WelchEstimator")
            .field("segment", &self.segment)
            .field("nfft", &self.nfft)
            .field("sample_rate", &self.sample_rate)
            .finish()
    }
}

impl WelchEstimator {
    pub fn new(window_s: f64, sample_rate_hz: f64, resolution_hz: f64) -> Result<Self> {
        if !(window_s > 0.0 && sample_rate_hz > 0.0 && resolution_hz > 0.0) {
            return Err(Error::InvalidArgument(
                "window, sample rate and resolution must be positive".into(),
            ));
        }
        let segment = (window_s * sample_rate_hz).round() as usize;
        let nfft_f = sample_rate_hz / resolution_hz;
        let nfft = nfft_f.round() as usize;
        if (nfft_f - nfft as f64).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "resolution {resolution_hz} Hz does not divide sample rate {sample_rate_hz} Hz"
            )));
        }
        if nfft < segment || segment < 2 {
            return Err(Error::InvalidArgument(format!(
                "transform size {nfft} shorter than segment {segment}; use a coarser resolution"
            )));
        }
        // periodic Hann
        let window: Vec<f64> = (0..segment)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment as f64).cos())
            .collect();
        let scale = 1.0 / (sample_rate_hz * window.iter().map(|w| w * w).sum::<f64>());
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        Ok(Self {
            segment,
            nfft,
            sample_rate: sample_rate_hz,
            window,
            scale,
            fft,
        })
    }

    pub fn segment_len(&self) -> usize {
        self.segment
    }

    pub fn n_bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.n_bins())
            .map(|k| k as f64 * self.sample_rate / self.nfft as f64)
            .collect()
    }

    /// Bin indices whose frequency lies in `[low, high]`.
    pub fn band_bins(&self, low_hz: f64, high_hz: f64) -> Vec<usize> {
        let df = self.sample_rate / self.nfft as f64;
        (0..self.n_bins())
            .filter(|&k| {
                let f = k as f64 * df;
                f >= low_hz - 1e-9 && f <= high_hz + 1e-9
            })
            .collect()
    }

    /// Single-segment one-sided periodogram of `x` (length = segment),
    /// written for every bin in `bins` into `out`.
    pub fn segment_into(&self, x: &[f64], bins: &[usize], buf: &mut Vec<Complex64>, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.segment);
        buf.clear();
        buf.extend(x.iter().zip(&self.window).map(|(v, w)| Complex64::new(v * w, 0.0)));
        buf.resize(self.nfft, Complex64::new(0.0, 0.0));
        self.fft.process(buf);
        let nyq = self.nfft / 2;
        for (o, &k) in out.iter_mut().zip(bins) {
            let p = buf[k].norm_sqr() * self.scale;
            *o = if k == 0 || (self.nfft % 2 == 0 && k == nyq) { p } else { 2.0 * p };
        }
    }

    /// Average of 50 %-overlapping segment periodograms over all of `x`.
    pub fn estimate(&self, x: &[f64], bins: &[usize]) -> Result<Vec<f64>> {
        if x.len() < self.segment {
            return Err(Error::SignalTooShort {
                needed: self.segment - 1,
                got: x.len(),
            });
        }
        let hop = (self.segment / 2).max(1);
        let n_seg = (x.len() - self.segment) / hop + 1;
        let mut acc = vec![0.0; bins.len()];
        let mut one = vec![0.0; bins.len()];
        let mut buf = Vec::with_capacity(self.nfft);
        for s in 0..n_seg {
            self.segment_into(&x[s * hop..s * hop + self.segment], bins, &mut buf, &mut one);
            acc.iter_mut().zip(&one).for_each(|(a, o)| *a += o);
        }
        acc.iter_mut().for_each(|a| *a /= n_seg as f64);
        Ok(acc)
    }
}

/// Welch PSD of each row of `signal` on a `resolution_hz` grid spanning
/// `[0, sample_rate / 2]`.
pub fn welch_psd(signal: ArrayView2<f64>, window_s: f64, sample_rate_hz: f64, resolution_hz: f64) -> Result<Psd> {
    let est = WelchEstimator::new(window_s, sample_rate_hz, resolution_hz)?;
    let bins: Vec<usize> = (0..est.n_bins()).collect();
    let mut power = Array2::zeros((signal.nrows(), bins.len()));
    for (c, row) in signal.rows().into_iter().enumerate() {
        let x = row.to_vec();
        let p = est.estimate(&x, &bins)?;
        power.row_mut(c).assign(&ndarray::Array1::from(p));
    }
    Ok(Psd {
        freqs_hz: est.freqs(),
        power,
    })
}
