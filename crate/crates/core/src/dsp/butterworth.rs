use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::filter::{DesignMeta, FilterKind, IirFilter, Section};
use crate::error::{Error, Result};

/// Design a digital Butterworth filter as cascaded second-order sections.
///
/// `order` is the order of the analog low-pass prototype; a band-pass
/// design therefore has `2 * order` poles. Band edges are prewarped so the
/// digital magnitude at every cutoff is exactly `1/sqrt(2)`.
pub fn design_butterworth(order: usize, kind: FilterKind, cutoffs_hz: &[f64], sample_rate_hz: f64) -> Result<IirFilter> {
    if order == 0 {
        return Err(Error::FilterDesign("order must be positive".into()));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::FilterDesign("sample rate must be positive".into()));
    }
    let expected = if kind == FilterKind::Bandpass { 2 } else { 1 };
    if cutoffs_hz.len() != expected {
        return Err(Error::FilterDesign(format!(
            "{kind:?} needs {expected} cutoff(s), got {}",
            cutoffs_hz.len()
        )));
    }
    let nyquist = sample_rate_hz / 2.0;
    for &c in cutoffs_hz {
        if !(c > 0.0 && c < nyquist) {
            return Err(Error::FilterDesign(format!(
                "cutoff {c} Hz outside (0, {nyquist}) Hz"
            )));
        }
    }
    if kind == FilterKind::Bandpass && cutoffs_hz[0] >= cutoffs_hz[1] {
        return Err(Error::FilterDesign("band edges must be increasing".into()));
    }

    let fs2 = 2.0 * sample_rate_hz;
    let warp = |f: f64| fs2 * (PI * f / sample_rate_hz).tan();
    let prototype: Vec<Complex64> = (0..order)
        .map(|k| Complex64::from_polar(1.0, PI * (2 * k + 1 + order) as f64 / (2 * order) as f64))
        .collect();

    let (analog_poles, reference_hz): (Vec<Complex64>, f64) = match kind {
        FilterKind::Lowpass => {
            let wc = warp(cutoffs_hz[0]);
            (prototype.iter().map(|p| p * wc).collect(), 0.0)
        }
        FilterKind::Highpass => {
            let wc = warp(cutoffs_hz[0]);
            (prototype.iter().map(|p| wc / p).collect(), nyquist)
        }
        FilterKind::Bandpass => {
            let (w1, w2) = (warp(cutoffs_hz[0]), warp(cutoffs_hz[1]));
            let bw = w2 - w1;
            let w0sq = w1 * w2;
            let poles = prototype
                .iter()
                .flat_map(|p| {
                    let half = p * (bw / 2.0);
                    let root = (half * half - w0sq).sqrt();
                    [half + root, half - root]
                })
                .collect();
            // analog centre sqrt(w1 w2) maps back through the inverse warp
            let centre = sample_rate_hz / PI * (w0sq.sqrt() / fs2).atan();
            (poles, centre)
        }
    };

    let poles: Vec<Complex64> = analog_poles.iter().map(|s| (fs2 + s) / (fs2 - s)).collect();
    let mut sections: Vec<Section> = pair_poles(&poles)
        .into_iter()
        .map(|(a1, a2, second_order)| {
            let b = match (kind, second_order) {
                (FilterKind::Lowpass, true) => [1.0, 2.0, 1.0],
                (FilterKind::Lowpass, false) => [1.0, 1.0, 0.0],
                (FilterKind::Highpass, true) => [1.0, -2.0, 1.0],
                (FilterKind::Highpass, false) => [1.0, -1.0, 0.0],
                (FilterKind::Bandpass, _) => [1.0, 0.0, -1.0],
            };
            Section { b, a: [a1, a2] }
        })
        .collect();

    let mut filter = IirFilter {
        sections: Vec::new(),
        design: DesignMeta {
            order,
            kind,
            cutoffs_hz: cutoffs_hz.to_vec(),
            sample_rate_hz,
        },
    };
    filter.sections = sections.clone();
    let gain = filter.magnitude(reference_hz);
    let per_section = gain.powf(-1.0 / sections.len() as f64);
    for s in &mut sections {
        s.b.iter_mut().for_each(|b| *b *= per_section);
    }
    filter.sections = sections;

    if !filter.is_stable() {
        return Err(Error::FilterDesign(format!(
            "unstable section for {kind:?} {cutoffs_hz:?} Hz at {sample_rate_hz} Hz"
        )));
    }
    Ok(filter)
}

/// Group digital poles into denominator sections `(a1, a2, is_second_order)`.
///
/// Complex poles pair with their conjugates; real poles pair with each
/// other, leaving at most one first-order section. Sections are ordered by
/// increasing pole radius.
fn pair_poles(poles: &[Complex64]) -> Vec<(f64, f64, bool)> {
    const TOL: f64 = 1e-12;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > TOL).collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= TOL).map(|p| p.re).collect();
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    let mut out: Vec<(f64, f64, bool, f64)> = complex
        .iter()
        .map(|p| (-2.0 * p.re, p.norm_sqr(), true, p.norm()))
        .collect();
    let mut chunks = real.chunks_exact(2);
    for pair in &mut chunks {
        out.push((-(pair[0] + pair[1]), pair[0] * pair[1], true, pair[1].abs()));
    }
    if let [r] = chunks.remainder() {
        out.push((-r, 0.0, false, r.abs()));
    }
    out.sort_by(|a, b| a.3.total_cmp(&b.3));
    out.into_iter().map(|(a1, a2, so, _)| (a1, a2, so)).collect()
}
