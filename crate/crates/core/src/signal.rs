//! Transmit-side waveform synthesis: symbols, root-raised-cosine shaping,
//! predistortion and frequency multiplexing onto a shared periodic grid.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{fft, ifft, SampledField};
use crate::units::dbm_to_watt;

pub const DEFAULT_ROLLOFF: f64 = 0.1;

/// Default lower bound on the simulation bandwidth, GHz.
pub const DEFAULT_MIN_SAMPLE_RATE: f64 = 512.0;

/// Fraction of the window duration that the worst inter-channel walk-off may use.
pub const MAX_WALK_OFF_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "pm-qpsk")]
    PmQpsk,
    #[serde(rename = "gaussian")]
    Gaussian,
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pm-qpsk" | "pmqpsk" | "qpsk" => Ok(Modulation::PmQpsk),
            "gaussian" => Ok(Modulation::Gaussian),
            other => Err(Error::config(format!(
                "unknown modulation `{other}` (expected pm-qpsk or gaussian)"
            ))),
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::PmQpsk => "pm-qpsk",
            Modulation::Gaussian => "gaussian",
        })
    }
}

/// One symbol stream per polarization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPolSymbols {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

impl DualPolSymbols {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Draws `n_symbols` per polarization.
///
/// PM-QPSK symbols are uniform over `{±1±i}/√2`; Gaussian symbols are
/// circularly-symmetric complex normal with unit variance. The stream is a
/// pure function of `seed`.
pub fn generate_symbols(modulation: Modulation, n_symbols: usize, seed: u64) -> Result<DualPolSymbols> {
    if n_symbols == 0 {
        return Err(Error::config("n_symbols must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| match modulation {
        Modulation::PmQpsk => {
            let a = std::f64::consts::FRAC_1_SQRT_2;
            let re = if rng.gen::<bool>() { a } else { -a };
            let im = if rng.gen::<bool>() { a } else { -a };
            Complex64::new(re, im)
        }
        Modulation::Gaussian => {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        }
    };
    let x = (0..n_symbols).map(|_| draw(&mut rng)).collect();
    let y = (0..n_symbols).map(|_| draw(&mut rng)).collect();
    Ok(DualPolSymbols { x, y })
}

/// Per-channel seed derived from a campaign seed (splitmix64 finalizer).
///
/// A channel keeps its seed across full-spectrum and pump-and-probe runs.
pub fn channel_seed(base: u64, index: i32) -> u64 {
    let mut z = base ^ (index as i64 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One WDM channel. Index 0 is the channel under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub index: i32,
    /// GHz, equal to `index × spacing` on a regular grid.
    pub center_offset: f64,
    /// GBaud.
    pub symbol_rate: f64,
    /// dBm.
    pub power: f64,
    pub modulation: Modulation,
    pub rolloff: f64,
    /// ps/nm of dispersion applied before launch.
    pub predistortion: f64,
    pub seed: u64,
}

impl ChannelSpec {
    pub fn power_watt(&self) -> f64 {
        dbm_to_watt(self.power)
    }

    /// Occupied bandwidth `Rs (1 + rolloff)`, GHz.
    pub fn occupied_bandwidth(&self) -> f64 {
        self.symbol_rate * (1.0 + self.rolloff)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_rate > 0.0 && self.symbol_rate.is_finite()) {
            return Err(Error::config(format!(
                "channel {}: symbol_rate must be positive, got {}",
                self.index, self.symbol_rate
            )));
        }
        if !self.power.is_finite() {
            return Err(Error::config(format!("channel {}: power must be finite", self.index)));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::config(format!(
                "channel {}: rolloff must lie in [0, 1], got {}",
                self.index, self.rolloff
            )));
        }
        if !self.center_offset.is_finite() || !self.predistortion.is_finite() {
            return Err(Error::config(format!(
                "channel {}: center_offset and predistortion must be finite",
                self.index
            )));
        }
        Ok(())
    }

    /// Integer samples-per-symbol at `sample_rate`, if there is one.
    pub fn samples_per_symbol(&self, sample_rate: f64) -> Result<usize> {
        let ratio = sample_rate / self.symbol_rate;
        let sps = ratio.round();
        if (ratio - sps).abs() > 1e-9 * ratio || sps < 1.0 {
            return Err(Error::config(format!(
                "channel {}: sample rate {sample_rate} GHz is not an integer multiple of {} GBaud",
                self.index, self.symbol_rate
            )));
        }
        let sps = sps as usize;
        if (sps as f64) < 2.0 * (1.0 + self.rolloff) {
            return Err(Error::config(format!(
                "channel {}: {sps} samples per symbol is below 2(1+rolloff)",
                self.index
            )));
        }
        Ok(sps)
    }
}

/// Raised-cosine spectrum normalized to a peak of 1.
///
/// At `rolloff == 0` the band edge takes the value ½ so that folded copies
/// still sum to one on a discrete grid.
pub fn raised_cosine(f: f64, symbol_rate: f64, rolloff: f64) -> f64 {
    let af = f.abs();
    let lo = (1.0 - rolloff) * symbol_rate / 2.0;
    let hi = (1.0 + rolloff) * symbol_rate / 2.0;
    let edge_tol = 1e-12 * symbol_rate;
    if rolloff == 0.0 {
        if (af - lo).abs() <= edge_tol {
            0.5
        } else if af < lo {
            1.0
        } else {
            0.0
        }
    } else if af <= lo {
        1.0
    } else if af < hi {
        0.5 * (1.0 + (std::f64::consts::PI / (rolloff * symbol_rate) * (af - lo)).cos())
    } else {
        0.0
    }
}

/// Root-raised-cosine filter applied circularly in the frequency domain.
///
/// The response is scaled by `√sps` so that shaping followed by the matched
/// filter and decimation returns the original symbols exactly.
pub(crate) fn rrc_filter(buf: &mut [Complex64], sample_rate: f64, symbol_rate: f64, rolloff: f64) {
    let sps = sample_rate / symbol_rate;
    let freqs = crate::field::bin_frequencies(buf.len(), sample_rate);
    fft(buf);
    for (v, f) in buf.iter_mut().zip(freqs) {
        *v *= (sps * raised_cosine(f, symbol_rate, rolloff)).sqrt();
    }
    ifft(buf);
}

/// Pulse-shapes `symbols` for `spec`, scales to the channel power, shifts it
/// to its grid slot and applies the configured predistortion.
pub fn shape_and_modulate(
    symbols: &DualPolSymbols,
    spec: &ChannelSpec,
    sample_rate: f64,
    n_samples: usize,
) -> Result<SampledField> {
    spec.validate()?;
    let sps = spec.samples_per_symbol(sample_rate)?;
    if symbols.x.len() != symbols.y.len() {
        return Err(Error::config("symbol streams of unequal length"));
    }
    if n_samples != symbols.len() * sps {
        return Err(Error::config(format!(
            "n_samples {n_samples} != n_symbols {} × samples-per-symbol {sps}",
            symbols.len()
        )));
    }
    if spec.center_offset.abs() + spec.occupied_bandwidth() / 2.0 > sample_rate / 2.0 {
        return Err(Error::config(format!(
            "channel {} at {} GHz overflows the ±{} GHz simulation bandwidth",
            spec.index,
            spec.center_offset,
            sample_rate / 2.0
        )));
    }
    let df = sample_rate / n_samples as f64;
    let bins = spec.center_offset / df;
    if (bins - bins.round()).abs() > 1e-6 {
        return Err(Error::config(format!(
            "channel {} offset {} GHz is not a multiple of the {df} GHz frequency resolution",
            spec.index, spec.center_offset
        )));
    }

    let upsample = |s: &[Complex64]| {
        let mut out = vec![Complex64::new(0.0, 0.0); n_samples];
        for (i, v) in s.iter().enumerate() {
            out[i * sps] = *v;
        }
        rrc_filter(&mut out, sample_rate, spec.symbol_rate, spec.rolloff);
        out
    };
    let mut field = SampledField::new(upsample(&symbols.x), upsample(&symbols.y), sample_rate)?;
    let p = field.power();
    if p > 0.0 {
        field.scale((spec.power_watt() / p).sqrt());
    }
    field.frequency_shift(spec.center_offset);
    // The grid stays centered on the carrier; the shift only moves the channel.
    field.center_frequency_offset = 0.0;
    field.apply_dispersion(spec.predistortion);
    Ok(field)
}

/// Pointwise sum of fields sharing one grid.
///
/// The result inherits the dispersion metadata of the first field, which by
/// convention is the channel under test.
pub fn multiplex(fields: &[SampledField]) -> Result<SampledField> {
    let first = fields
        .first()
        .ok_or_else(|| Error::config("multiplex needs at least one field"))?;
    let mut out = first.clone();
    for f in &fields[1..] {
        if !f.same_grid(first) {
            return Err(Error::config(
                "cannot multiplex fields with different sample rate, length or grid center",
            ));
        }
        out.x.iter_mut().zip(&f.x).for_each(|(a, b)| *a += b);
        out.y.iter_mut().zip(&f.y).for_each(|(a, b)| *a += b);
    }
    Ok(out)
}

/// Shared sampling grid for a channel plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPlan {
    pub sample_rate: f64,
    pub samples_per_symbol: usize,
    pub n_symbols: usize,
    pub n_samples: usize,
}

impl GridPlan {
    /// Window duration, ns.
    pub fn duration(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate
    }
}

/// Picks the smallest power-of-two samples-per-symbol whose sample rate covers
/// the whole comb plus a 20% guard and is at least `min_sample_rate`.
///
/// All channels must share one symbol rate.
pub fn plan_grid(channels: &[ChannelSpec], n_symbols: usize, min_sample_rate: f64) -> Result<GridPlan> {
    let first = channels
        .first()
        .ok_or_else(|| Error::config("channel plan is empty"))?;
    if !n_symbols.is_power_of_two() {
        return Err(Error::config(format!("n_symbols {n_symbols} must be a power of two")));
    }
    let rs = first.symbol_rate;
    if channels.iter().any(|c| c.symbol_rate != rs) {
        return Err(Error::config("all channels must share one symbol rate"));
    }
    let edge = channels
        .iter()
        .map(|c| c.center_offset.abs() + c.occupied_bandwidth() / 2.0)
        .fold(0.0, f64::max);
    let required = (2.0 * edge * 1.2).max(min_sample_rate);
    let mut sps = 2usize;
    while (sps as f64) * rs < required || (sps as f64) < 2.0 * (1.0 + first.rolloff) {
        sps *= 2;
        if sps > 1 << 12 {
            return Err(Error::config("no feasible samples-per-symbol for the channel plan"));
        }
    }
    Ok(GridPlan {
        sample_rate: sps as f64 * rs,
        samples_per_symbol: sps,
        n_symbols,
        n_samples: n_symbols * sps,
    })
}

/// Worst-case inter-channel walk-off (ns) must stay under a quarter of the window,
/// otherwise periodic wrap-around makes pumps revisit the same probe symbols.
pub fn check_walk_off(beta2_ps2_per_km: f64, max_offset_ghz: f64, total_length_km: f64, window_ns: f64) -> Result<()> {
    // |β2| ps²/km · 2π·f (1/ps) · L km → ps.
    let walk_off_ps =
        beta2_ps2_per_km.abs() * 2.0 * std::f64::consts::PI * max_offset_ghz * 1e-3 * total_length_km;
    let walk_off_ns = walk_off_ps * 1e-3;
    if walk_off_ns >= MAX_WALK_OFF_FRACTION * window_ns {
        return Err(Error::config(format!(
            "walk-off {walk_off_ns:.3} ns exceeds {:.0}% of the {window_ns:.3} ns window; increase n_symbols",
            MAX_WALK_OFF_FRACTION * 100.0
        )));
    }
    Ok(())
}
