//! Linear-phase FIR band-pass filter designed with the Kaiser window method.
//!
//! Filtering is applied per frame in "same" mode: output sample `i` is the
//! centred convolution at input position `i`, with zeros assumed outside the
//! frame. The group delay of `(taps - 1) / 2` samples is therefore fully
//! compensated, at the cost of a start-up transient of half the filter length
//! at each frame edge. Frames are filtered independently so that a frame's
//! features never depend on its neighbours.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::BandSpec;
use crate::error::{Error, Result};
use crate::signal::Frame;

/// Design targets for [`BandpassFilter::design`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Width of each transition band (Hz), ending at the band edge.
    pub transition: f64,
    /// Design stopband attenuation (dB).
    pub attenuation_db: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            transition: 500.0,
            attenuation_db: 65.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandpassFilter {
    taps: Vec<f64>,
    sample_rate: f64,
}

impl BandpassFilter {
    pub fn design(band: &BandSpec, sample_rate: f64, spec: &FilterSpec) -> Result<Self> {
        let nyquist = sample_rate / 2.0;
        if !(sample_rate > 0.0) {
            return Err(Error::param("sample_rate", "must be positive"));
        }
        if band.f_h() >= nyquist {
            return Err(Error::AboveNyquist {
                f0: band.f_h(),
                nyquist,
            });
        }
        if !(spec.transition > 0.0 && spec.attenuation_db > 21.0) {
            return Err(Error::param(
                "filter",
                "transition must be positive and attenuation above 21 dB",
            ));
        }
        let low_cut = band.f_l() - spec.transition / 2.0;
        let high_cut = band.f_h() + spec.transition / 2.0;
        if low_cut <= 0.0 || high_cut >= nyquist {
            return Err(Error::param("filter", "transition bands leave [0, fs/2]"));
        }

        let a = spec.attenuation_db;
        let beta = if a > 50.0 {
            0.1102 * (a - 8.7)
        } else {
            0.5842 * (a - 21.0).powf(0.4) + 0.07886 * (a - 21.0)
        };
        let dw = 2.0 * PI * spec.transition / sample_rate;
        let mut order = ((a - 7.95) / (2.285 * dw)).ceil() as usize;
        order += order % 2;
        let m = order as f64 / 2.0;
        let i0_beta = bessel_i0(beta);
        let (c1, c2) = (low_cut / sample_rate, high_cut / sample_rate);
        let taps = (0..=order)
            .map(|k| {
                let t = k as f64 - m;
                let ideal = 2.0 * c2 * sinc(2.0 * c2 * t) - 2.0 * c1 * sinc(2.0 * c1 * t);
                let r = t / m;
                let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                ideal * w
            })
            .collect();
        Ok(Self { taps, sample_rate })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Centred, zero-extended convolution at output position `i`.
    pub fn output_at(&self, x: &[f64], i: usize) -> f64 {
        let half = self.taps.len() / 2;
        // y[i] = sum_k h[k] x[i + half - k]
        let k_lo = (i + half + 1).saturating_sub(x.len());
        let k_hi = (i + half).min(self.taps.len() - 1);
        if k_lo > k_hi {
            return 0.0;
        }
        let taps = &self.taps[k_lo..=k_hi];
        let xs = &x[i + half - k_hi..=i + half - k_lo];
        taps.iter().zip(xs.iter().rev()).map(|(h, v)| h * v).sum()
    }

    /// Filter `x` keeping every `step`-th output, starting at index 0.
    pub fn apply_strided(&self, x: &[f64], step: usize) -> Vec<f64> {
        (0..x.len())
            .step_by(step.max(1))
            .map(|i| self.output_at(x, i))
            .collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_strided(x, 1)
    }

    /// Complex frequency response magnitude at `f` Hz.
    pub fn magnitude_at(&self, f: f64) -> f64 {
        let w = 2.0 * PI * f / self.sample_rate;
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (k, &h)| {
                let phi = w * k as f64;
                (re + h * phi.cos(), im - h * phi.sin())
            });
        re.hypot(im)
    }
}

/// Band-pass a frame with the default filter design.
pub fn bandpass(frame: &Frame, band: &BandSpec) -> Result<Frame> {
    let filter = BandpassFilter::design(band, frame.sample_rate, &FilterSpec::default())?;
    Ok(Frame {
        samples: filter.apply(&frame.samples),
        sample_rate: frame.sample_rate,
        index: frame.index,
        start_time: frame.start_time,
    })
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::generate_tone;

    fn default_filter() -> BandpassFilter {
        BandpassFilter::design(&BandSpec::default(), 44_100.0, &FilterSpec::default()).unwrap()
    }

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn bessel_matches_reference_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        approx::assert_relative_eq!(bessel_i0(1.0), 1.266_065_877_752_008_4, epsilon = 1e-14);
        approx::assert_relative_eq!(bessel_i0(5.0), 27.239_871_823_604_45, max_relative = 1e-13);
    }

    #[test]
    fn linear_phase_symmetry() {
        let f = default_filter();
        let t = f.taps();
        assert_eq!(t.len() % 2, 1);
        assert!(t.iter().zip(t.iter().rev()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn stopband_and_passband_response() {
        let f = default_filter();
        assert!(db(f.magnitude_at(19_300.0)) <= -60.0);
        assert!(db(f.magnitude_at(20_700.0)) <= -60.0);
        for x in [0.0, 5000.0, 10_000.0, 15_000.0, 19_000.0, 21_000.0, 22_000.0] {
            assert!(db(f.magnitude_at(x)) <= -60.0, "{x} Hz");
        }
        let ripple = (0..=400)
            .map(|i| db(f.magnitude_at(19_800.0 + i as f64)).abs())
            .fold(0.0, f64::max);
        assert!(ripple <= 1.0, "ripple {ripple} dB");
    }

    #[test]
    fn tone_attenuation_measured_on_frame_interior() {
        let f = default_filter();
        let guard = f.taps().len();
        let gain = |freq: f64| {
            let tone = generate_tone(freq, 44_100.0, 0.25, 0.8).unwrap();
            let x = tone.samples();
            let y = f.apply(x);
            assert_eq!(y.len(), x.len());
            rms(&y[guard..y.len() - guard]) / rms(&x[guard..x.len() - guard])
        };
        let stop = gain(10_000.0);
        assert!(stop <= 1e-3, "10 kHz ratio {stop}");
        let pass = gain(20_000.0);
        assert!(db(pass).abs() <= 1.0, "20 kHz ratio {pass}");
    }

    #[test]
    fn zero_in_zero_out_and_strided_matches_full() {
        let f = default_filter();
        assert!(f.apply(&vec![0.0; 1000]).iter().all(|&y| y == 0.0));
        let x: Vec<f64> = (0..2000).map(|i| ((i * 37 % 101) as f64 - 50.0) / 50.0).collect();
        let full = f.apply(&x);
        let strided = f.apply_strided(&x, 8);
        assert_eq!(strided.len(), 250);
        for (i, &y) in strided.iter().enumerate() {
            assert_eq!(y.to_bits(), full[8 * i].to_bits());
        }
        // Shorter than the filter: still same length.
        assert_eq!(f.apply(&[1.0, 2.0, 3.0]).len(), 3);
    }

    #[test]
    fn direct_convolution_oracle() {
        let f = default_filter();
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = f.taps();
        let half = h.len() / 2;
        for i in [0, 1, 100, 250, 499] {
            let mut want = 0.0;
            for (k, hk) in h.iter().enumerate() {
                let j = i as isize + half as isize - k as isize;
                if j >= 0 && (j as usize) < x.len() {
                    want += hk * x[j as usize];
                }
            }
            assert!((f.output_at(&x, i) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_band_above_nyquist() {
        let frame = Frame {
            samples: vec![0.0; 100],
            sample_rate: 32_000.0,
            index: 0,
            start_time: 0.0,
        };
        assert!(matches!(
            bandpass(&frame, &BandSpec::default()),
            Err(Error::AboveNyquist { .. })
        ));
    }
}
