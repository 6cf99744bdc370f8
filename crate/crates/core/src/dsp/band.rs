use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Frame;

/// Target frequency band `[f_l, f_h]` around the carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    f_l: f64,
    f_h: f64,
}

impl Default for BandSpec {
    fn default() -> Self {
        Self {
            f_l: 19_800.0,
            f_h: 20_200.0,
        }
    }
}

impl BandSpec {
    pub fn new(f_l: f64, f_h: f64) -> Result<Self> {
        if !(f_l > 0.0 && f_h > f_l && f_h.is_finite()) {
            return Err(Error::param("band", format!("need 0 < f_l < f_h, got [{f_l}, {f_h}]")));
        }
        Ok(Self { f_l, f_h })
    }

    pub fn f_l(&self) -> f64 {
        self.f_l
    }

    pub fn f_h(&self) -> f64 {
        self.f_h
    }

    pub fn width(&self) -> f64 {
        self.f_h - self.f_l
    }

    /// Largest factor for which a non-overlapping fold can exist.
    pub fn max_factor(&self) -> usize {
        (self.f_h / self.width()).floor() as usize
    }
}

/// Admissible sampling-rate interval `[2 f_h / n, 2 f_l / (n - 1)]`.
///
/// For `n = 1` the upper bound is infinite. Returns `None` when the bounds
/// cross, and an error when `n` is outside `[1, floor(f_h / B)]`.
pub fn valid_undersampling_rates(f_l: f64, f_h: f64, n: usize) -> Result<Option<(f64, f64)>> {
    let band = BandSpec::new(f_l, f_h)?;
    let max = band.max_factor();
    if n < 1 || n > max {
        return Err(Error::FactorOutOfRange { n, max });
    }
    let low = 2.0 * f_h / n as f64;
    let high = if n == 1 {
        f64::INFINITY
    } else {
        2.0 * f_l / (n - 1) as f64
    };
    Ok((low <= high).then_some((low, high)))
}

/// Fold `f` into the first Nyquist zone `[0, fs_star / 2]` of rate `fs_star`.
pub fn alias_frequency(f: f64, fs_star: f64) -> f64 {
    let r = f.rem_euclid(fs_star);
    if r <= fs_star / 2.0 {
        r
    } else {
        fs_star - r
    }
}

/// Decimation by an integer factor whose resulting rate satisfies the
/// band-pass sampling bounds for `band`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UndersamplePlan {
    n: usize,
    fs: f64,
    fs_star: f64,
    admissible: (f64, f64),
}

impl UndersamplePlan {
    pub fn new(fs: f64, n: usize, band: &BandSpec) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::param("fs", format!("must be positive, got {fs}")));
        }
        if band.f_h() >= fs / 2.0 {
            return Err(Error::AboveNyquist {
                f0: band.f_h(),
                nyquist: fs / 2.0,
            });
        }
        let fs_star = fs / n.max(1) as f64;
        let (low, high) = valid_undersampling_rates(band.f_l(), band.f_h(), n)?.ok_or(
            Error::InvalidUndersampling {
                fs_star,
                low: 2.0 * band.f_h() / n as f64,
                high: 2.0 * band.f_l() / (n as f64 - 1.0),
            },
        )?;
        if !(low <= fs_star && fs_star <= high) {
            return Err(Error::InvalidUndersampling { fs_star, low, high });
        }
        Ok(Self {
            n,
            fs,
            fs_star,
            admissible: (low, high),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn fs_star(&self) -> f64 {
        self.fs_star
    }

    pub fn admissible(&self) -> (f64, f64) {
        self.admissible
    }

    /// Number of samples kept from an input of `len` samples.
    pub fn output_len(&self, len: usize) -> usize {
        len.div_ceil(self.n)
    }

    /// Folded image of `band`, as `(low, high)` in Hz.
    pub fn aliased_band(&self, band: &BandSpec) -> (f64, f64) {
        let a = alias_frequency(band.f_l(), self.fs_star);
        let b = alias_frequency(band.f_h(), self.fs_star);
        (a.min(b), a.max(b))
    }
}

/// Keep samples `0, n, 2n, ...`.
pub fn undersample(frame: &Frame, plan: &UndersamplePlan) -> Result<Frame> {
    if frame.sample_rate != plan.fs {
        return Err(Error::RateMismatch {
            expected: plan.fs,
            actual: frame.sample_rate,
        });
    }
    Ok(Frame {
        samples: frame.samples.iter().step_by(plan.n).copied().collect(),
        sample_rate: plan.fs_star,
        index: frame.index,
        start_time: frame.start_time,
    })
}
