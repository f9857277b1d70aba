use ndarray::{Array2, ArrayView2};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Lowpass,
    Highpass,
    Bandpass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMeta {
    pub order: usize,
    pub kind: FilterKind,
    pub cutoffs_hz: Vec<f64>,
    pub sample_rate_hz: f64,
}

/// Second-order section `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Section {
    #[inline]
    fn step(&self, z: &mut [f64; 2], x: f64) -> f64 {
        let y = self.b[0] * x + z[0];
        z[0] = self.b[1] * x - self.a[0] * y + z[1];
        z[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    /// Poles strictly inside the unit circle (Jury conditions).
    pub fn is_stable(&self) -> bool {
        let [a1, a2] = self.a;
        a2.abs() < 1.0 && a1.abs() < 1.0 + a2
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (1.0 + z_inv * self.a[0] + z2 * self.a[1])
    }

    /// Delay-line values reached after a long run of constant unit input.
    fn steady_state(&self) -> ([f64; 2], f64) {
        let g = self.b.iter().sum::<f64>() / (1.0 + self.a[0] + self.a[1]);
        let z1 = self.b[2] - self.a[1] * g;
        let z0 = self.b[1] - self.a[0] * g + z1;
        ([z0, z1], g)
    }
}

/// Cascade of second-order sections with its design parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    pub sections: Vec<Section>,
    pub design: DesignMeta,
}

impl IirFilter {
    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Section::is_stable)
    }

    /// Complex frequency response of the cascade at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / self.design.sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    /// Filter one channel in place, starting from `state` (one entry per section).
    fn run(&self, state: &mut [[f64; 2]], x: &mut [f64]) {
        for (sec, z) in self.sections.iter().zip(state.iter_mut()) {
            for v in x.iter_mut() {
                *v = sec.step(z, *v);
            }
        }
    }

    fn steady_state_for(&self, level: f64) -> Vec<[f64; 2]> {
        let mut gain = level;
        self.sections
            .iter()
            .map(|s| {
                let (zi, g) = s.steady_state();
                let out = [zi[0] * gain, zi[1] * gain];
                gain *= g;
                out
            })
            .collect()
    }

    /// Edge padding used by [`filter_zero_phase`].
    pub fn zero_phase_padding(&self) -> usize {
        3 * self.design.order
    }
}

/// Per-channel, per-section delay lines for streaming application.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    n_sections: usize,
    n_channels: usize,
    z: Vec<[f64; 2]>,
}

impl FilterState {
    pub fn new(filter: &IirFilter, n_channels: usize) -> Self {
        Self {
            n_sections: filter.sections.len(),
            n_channels,
            z: vec![[0.0; 2]; filter.sections.len() * n_channels],
        }
    }

    pub fn reset(&mut self) {
        self.z.iter_mut().for_each(|z| *z = [0.0; 2]);
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    /// Number of stored delay values: `2 * sections * channels`.
    pub fn dimension(&self) -> usize {
        2 * self.z.len()
    }
}

/// Causal filtering of a channel × sample block, continuing from `state`.
///
/// Feeding a signal in any block partition gives bit-identical output to a
/// single call on the whole signal.
pub fn filter_causal(filter: &IirFilter, state: &mut FilterState, block: ArrayView2<f64>) -> Result<Array2<f64>> {
    if block.nrows() != state.n_channels || state.n_sections != filter.sections.len() {
        return Err(Error::Dimension(format!(
            "block has {} channels, state holds {} channels x {} sections",
            block.nrows(),
            state.n_channels,
            state.n_sections
        )));
    }
    let mut out = block.to_owned();
    let ns = state.n_sections;
    for (mut row, z) in out.rows_mut().into_iter().zip(state.z.chunks_mut(ns.max(1))) {
        match row.as_slice_mut() {
            Some(x) => filter.run(z, x),
            None => {
                let mut x = row.to_vec();
                filter.run(z, &mut x);
                row.assign(&ndarray::ArrayView1::from(&x));
            }
        }
    }
    Ok(out)
}

/// Forward-backward filtering with odd-reflection padding of
/// `3 * order` samples and steady-state initial conditions on each pass.
pub fn filter_zero_phase(filter: &IirFilter, signal: ArrayView2<f64>) -> Result<Array2<f64>> {
    let pad = filter.zero_phase_padding();
    let n = signal.ncols();
    if n <= pad {
        return Err(Error::SignalTooShort { needed: pad, got: n });
    }
    let rows = par::map_range(signal.nrows(), |c| {
        let x = signal.row(c);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend(x.iter());
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let mut z = filter.steady_state_for(ext[0]);
        filter.run(&mut z, &mut ext);
        ext.reverse();
        let mut z = filter.steady_state_for(ext[0]);
        filter.run(&mut z, &mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    });
    let mut out = Array2::zeros(signal.dim());
    for (mut dst, src) in out.rows_mut().into_iter().zip(rows) {
        dst.assign(&ndarray::Array1::from(src));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use ndarray::{s, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::dsp::design_butterworth;

    fn mu_band() -> IirFilter {
        design_butterworth(2, FilterKind::Bandpass, &[8.0, 30.0], 512.0).unwrap()
    }

    fn noise(ch: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((ch, n), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn block_partition_is_bit_identical() {
        let f = mu_band();
        let x = noise(2, 5120, 1);
        let mut st = FilterState::new(&f, 2);
        let whole = filter_causal(&f, &mut st, x.view()).unwrap();

        let mut st = FilterState::new(&f, 2);
        let mut pieces = Vec::new();
        for t in 0..x.ncols() {
            pieces.push(filter_causal(&f, &mut st, x.slice(s![.., t..t + 1])).unwrap());
        }
        let views: Vec<_> = pieces.iter().map(|p| p.view()).collect();
        let joined = ndarray::concatenate(ndarray::Axis(1), &views).unwrap();
        assert!(whole.iter().zip(joined.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));

        let mut st = FilterState::new(&f, 2);
        let mut uneven = Vec::new();
        let mut t = 0;
        let mut len = 1;
        while t < x.ncols() {
            let end = (t + len).min(x.ncols());
            uneven.push(filter_causal(&f, &mut st, x.slice(s![.., t..end])).unwrap());
            t = end;
            len = len * 3 % 97 + 1;
        }
        let views: Vec<_> = uneven.iter().map(|p| p.view()).collect();
        let joined = ndarray::concatenate(ndarray::Axis(1), &views).unwrap();
        assert!(whole.iter().zip(joined.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn output_depends_only_on_past_input() {
        let f = mu_band();
        let mut x = noise(1, 2048, 2);
        let mut st = FilterState::new(&f, 1);
        let a = filter_causal(&f, &mut st, x.view()).unwrap();
        x.slice_mut(s![.., 1000..]).fill(5.0);
        st.reset();
        let b = filter_causal(&f, &mut st, x.view()).unwrap();
        assert_eq!(a.slice(s![.., ..1000]), b.slice(s![.., ..1000]));
    }

    #[test]
    fn dc_is_rejected_by_bandpass() {
        let f = mu_band();
        let x = Array2::from_elem((1, 512 * 10), 1.0);
        let mut st = FilterState::new(&f, 1);
        let y = filter_causal(&f, &mut st, x.view()).unwrap();
        let tail = y.slice(s![0, 512 * 8..]).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(tail < 1e-3, "steady-state DC leak {tail}");
    }

    #[test]
    fn zero_in_zero_out() {
        let f = mu_band();
        let mut st = FilterState::new(&f, 3);
        let y = filter_causal(&f, &mut st, Array2::zeros((3, 100)).view()).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
        assert_eq!(st.dimension(), 2 * 2 * 3);
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let f = mu_band();
        let mut st = FilterState::new(&f, 2);
        assert!(matches!(
            filter_causal(&f, &mut st, Array2::zeros((3, 10)).view()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn causal_filter_is_linear() {
        let f = mu_band();
        let x = noise(1, 4096, 3);
        let y = noise(1, 4096, 4);
        let (alpha, beta) = (0.7, -2.3);
        let run = |v: &Array2<f64>| {
            let mut st = FilterState::new(&f, 1);
            filter_causal(&f, &mut st, v.view()).unwrap()
        };
        let lhs = run(&(&x * alpha + &y * beta));
        let rhs = run(&x) * alpha + run(&y) * beta;
        let scale = lhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    fn gaussian_pulse(n: usize, centre: f64, width: f64, freq: f64) -> Array1<f64> {
        Array1::from_shape_fn(n, |i| {
            let t = i as f64 - centre;
            (-(t * t) / (2.0 * width * width)).exp() * (2.0 * std::f64::consts::PI * freq * t / 512.0).cos()
        })
    }

    #[test]
    fn zero_phase_keeps_symmetric_pulse_peak() {
        let f = mu_band();
        let n = 8193;
        let x = gaussian_pulse(n, 4096.0, 40.0, 10.0).insert_axis(ndarray::Axis(0));
        let y = filter_zero_phase(&f, x.view()).unwrap();
        let argmax = |v: ndarray::ArrayView1<f64>| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        assert_eq!(argmax(y.row(0)), argmax(x.row(0)));
        // symmetric input gives symmetric output
        for i in 0..n / 2 {
            assert!((y[[0, i]] - y[[0, n - 1 - i]]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_phase_commutes_with_time_reversal() {
        let f = mu_band();
        let n = 16384;
        let x = gaussian_pulse(n, 5000.0, 30.0, 12.0) + gaussian_pulse(n, 9000.0, 80.0, 20.0) * 0.5;
        let x = x.insert_axis(ndarray::Axis(0));
        let rev = x.slice(s![.., ..;-1]).to_owned();
        let a = filter_zero_phase(&f, rev.view()).unwrap();
        let b = filter_zero_phase(&f, x.view()).unwrap();
        let b_rev = b.slice(s![.., ..;-1]);
        for (p, q) in a.iter().zip(b_rev.iter()) {
            assert!((p - q).abs() < 1e-9, "{p} vs {q}");
        }
    }

    #[test]
    fn zero_phase_squares_the_magnitude() {
        let f = mu_band();
        let fs = 512.0;
        let freq = (8.0f64 * 30.0).sqrt();
        let n = 512 * 40;
        let x = Array2::from_shape_fn((1, n), |(_, i)| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin());
        let y = filter_zero_phase(&f, x.view()).unwrap();
        let mid = y.slice(s![0, n / 4..3 * n / 4]);
        let amp = mid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = f.magnitude(freq);
        assert!((amp - h * h).abs() < 1e-3, "amp {amp} expected {}", h * h);

        let off = 40.0;
        let x = Array2::from_shape_fn((1, n), |(_, i)| (2.0 * std::f64::consts::PI * off * i as f64 / fs).sin());
        let y = filter_zero_phase(&f, x.view()).unwrap();
        let amp = y.slice(s![0, n / 4..3 * n / 4]).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = f.magnitude(off);
        assert!((amp - h * h).abs() < 2e-3, "amp {amp} expected {}", h * h);
    }

    #[test]
    fn zero_phase_rejects_short_signal() {
        let f = design_butterworth(4, FilterKind::Bandpass, &[0.1, 45.0], 512.0).unwrap();
        let x = Array2::zeros((1, 3));
        assert!(matches!(filter_zero_phase(&f, x.view()), Err(Error::SignalTooShort { .. })));
    }

    #[test]
    fn zero_phase_constant_offset_vanishes() {
        let f = design_butterworth(4, FilterKind::Bandpass, &[0.1, 45.0], 512.0).unwrap();
        let x = Array2::from_elem((1, 2000), 37.5);
        let y = filter_zero_phase(&f, x.view()).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-8), "{}", y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }

    #[test]
    fn many_channels_match_single_channel_runs() {
        let f = mu_band();
        let x = noise(4, 3000, 9);
        let all = filter_zero_phase(&f, x.view()).unwrap();
        let one = filter_zero_phase(&f, x.slice(s![2..3, ..])).unwrap();
        assert_eq!(all.slice(s![2..3, ..]), one);
    }
}
