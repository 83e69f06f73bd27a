//! Dual-polarization sampled waveforms and the FFT plumbing shared by every stage.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Forward DFT in place, `X_k = Σ x_n e^{-2πi kn/N}`.
pub fn fft(buf: &mut [Complex64]) {
    forward_plan(buf.len()).process(buf);
}

/// Inverse DFT in place, normalized by 1/N so that `ifft(fft(x)) == x`.
pub fn ifft(buf: &mut [Complex64]) {
    inverse_plan(buf.len()).process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
}

/// Frequency (in units of the sample rate) of every DFT bin, in FFT order.
pub fn bin_frequencies(len: usize, sample_rate: f64) -> Vec<f64> {
    let df = sample_rate / len as f64;
    (0..len)
        .map(|k| {
            let signed = if k < len.div_ceil(2) { k as i64 } else { k as i64 - len as i64 };
            signed as f64 * df
        })
        .collect()
}

/// A periodic dual-polarization complex baseband waveform.
///
/// Samples carry W^0.5 units: `|x|² + |y|²` is the instantaneous power in W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledField {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    /// GHz.
    pub sample_rate: f64,
    /// Frequency of the grid center relative to the reference carrier, GHz.
    pub center_frequency_offset: f64,
    /// Dispersion accumulated by the waveform so far, ps/nm.
    pub accumulated_dispersion: f64,
}

impl SampledField {
    pub fn new(x: Vec<Complex64>, y: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::config(format!(
                "polarization lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if !x.len().is_power_of_two() {
            return Err(Error::config(format!(
                "sample count {} is not a power of two",
                x.len()
            )));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::config(format!("invalid sample rate {sample_rate} GHz")));
        }
        Ok(Self {
            x,
            y,
            sample_rate,
            center_frequency_offset: 0.0,
            accumulated_dispersion: 0.0,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(
            vec![Complex64::new(0.0, 0.0); len],
            vec![Complex64::new(0.0, 0.0); len],
            sample_rate,
        )
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Window duration in ns.
    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    /// DFT bin spacing in GHz.
    pub fn frequency_resolution(&self) -> f64 {
        self.sample_rate / self.len() as f64
    }

    /// Mean total power over both polarizations, W.
    pub fn power(&self) -> f64 {
        let sum: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .sum();
        sum / self.len() as f64
    }

    /// Per-bin power (W) summed over polarizations, in FFT order. Sums to [`power`](Self::power).
    pub fn power_spectrum(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let (sx, sy) = self.spectra();
        sx.iter()
            .zip(&sy)
            .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()) / (n * n))
            .collect()
    }

    /// Integrated power in the band `[lo, hi]` GHz (grid-relative frequencies).
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        let freqs = bin_frequencies(self.len(), self.sample_rate);
        self.power_spectrum()
            .into_iter()
            .zip(freqs)
            .filter(|(_, f)| *f >= lo && *f <= hi)
            .map(|(p, _)| p)
            .sum()
    }

    pub(crate) fn spectra(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut sx = self.x.clone();
        let mut sy = self.y.clone();
        fft(&mut sx);
        fft(&mut sy);
        (sx, sy)
    }

    /// Multiplies both polarizations' spectra by `response(f)`, f in GHz relative to the grid center.
    pub fn apply_spectral<F>(&mut self, response: F)
    where
        F: Fn(f64) -> Complex64,
    {
        let freqs = bin_frequencies(self.len(), self.sample_rate);
        let gains: Vec<Complex64> = freqs.iter().map(|&f| response(f)).collect();
        for pol in [&mut self.x, &mut self.y] {
            fft(pol);
            pol.iter_mut().zip(&gains).for_each(|(v, g)| *v *= g);
            ifft(pol);
        }
    }

    /// Applies the all-pass spectral phase of `acc` ps/nm of dispersion and
    /// advances the metadata accordingly. Absolute optical frequency is used,
    /// so channels away from the carrier also pick up their group delay.
    pub fn apply_dispersion(&mut self, acc_ps_per_nm: f64) {
        if acc_ps_per_nm == 0.0 {
            return;
        }
        let k = crate::units::dispersion_phase_per_ghz2(acc_ps_per_nm);
        let fc = self.center_frequency_offset;
        self.apply_spectral(|f| Complex64::from_polar(1.0, k * (f + fc) * (f + fc)));
        self.accumulated_dispersion += acc_ps_per_nm;
    }

    /// Multiplies by `exp(2πi·shift·t)`, moving spectral content up by `shift` GHz.
    ///
    /// The grid-center metadata moves the opposite way so that absolute
    /// frequencies stay consistent. Shifts that are a whole number of DFT bins
    /// use exact integer phase arithmetic and keep the waveform periodic.
    pub fn frequency_shift(&mut self, shift: f64) {
        if shift == 0.0 {
            return;
        }
        let n = self.len();
        let bins = shift / self.frequency_resolution();
        let rotor: Vec<Complex64> = if (bins - bins.round()).abs() < 1e-9 {
            let m = (bins.round() as i64).rem_euclid(n as i64) as u128;
            (0..n)
                .map(|i| {
                    let r = (m * i as u128 % n as u128) as f64;
                    Complex64::from_polar(1.0, 2.0 * PI * r / n as f64)
                })
                .collect()
        } else {
            let step = shift / self.sample_rate;
            (0..n)
                .map(|i| Complex64::from_polar(1.0, 2.0 * PI * (step * i as f64).fract()))
                .collect()
        };
        for pol in [&mut self.x, &mut self.y] {
            pol.iter_mut().zip(&rotor).for_each(|(v, r)| *v *= r);
        }
        self.center_frequency_offset -= shift;
    }

    /// Multiplies every sample by a real amplitude factor.
    pub fn scale(&mut self, amplitude: f64) {
        for pol in [&mut self.x, &mut self.y] {
            pol.iter_mut().for_each(|v| *v *= amplitude);
        }
    }

    /// `‖self − other‖₂ / ‖other‖₂` over both polarizations.
    pub fn relative_l2_distance(&self, other: &SampledField) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in self.x.iter().chain(&self.y).zip(other.x.iter().chain(&other.y)) {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
        (num / den).sqrt()
    }

    pub(crate) fn same_grid(&self, other: &SampledField) -> bool {
        self.len() == other.len()
            && self.sample_rate == other.sample_rate
            && self.center_frequency_offset == other.center_frequency_offset
    }
}
