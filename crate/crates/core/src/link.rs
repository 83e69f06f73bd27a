//! Multi-span optical line system: span cascade, noiseless lumped amplifiers,
//! per-span taps, and the inverse-additive GSNR cascade.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::ssfm::{propagate_span_checked, SpanConfig};
use crate::units::db_to_linear;

/// Largest accepted mismatch between a fixed amplifier gain and the span loss, dB.
pub const MAX_GAIN_MISMATCH_DB: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AmplifierPolicy {
    /// Gain equals the measured total-power loss of the preceding span.
    ExactPowerRestore,
    FixedGain { gain_db: f64 },
}

impl Default for AmplifierPolicy {
    fn default() -> Self {
        AmplifierPolicy::ExactPowerRestore
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub spans: Vec<SpanConfig>,
    #[serde(default)]
    pub amplifier: AmplifierPolicy,
    #[serde(default = "default_true")]
    pub tap_every_span: bool,
    /// Step-halving verification on every span.
    #[serde(default)]
    pub strict: bool,
}

fn default_true() -> bool {
    true
}

impl LinkConfig {
    /// `n_spans` copies of `span`.
    pub fn uniform(span: SpanConfig, n_spans: usize) -> Self {
        LinkConfig {
            spans: vec![span; n_spans],
            amplifier: AmplifierPolicy::ExactPowerRestore,
            tap_every_span: true,
            strict: false,
        }
    }

    pub fn n_spans(&self) -> usize {
        self.spans.len()
    }

    pub fn total_length_km(&self) -> f64 {
        self.spans.iter().map(|s| s.length_km).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.spans.is_empty() {
            return Err(Error::config("link must contain at least one span"));
        }
        for (i, span) in self.spans.iter().enumerate() {
            span.validate().map_err(|e| e.context(format!("span {}", i + 1)))?;
            if let AmplifierPolicy::FixedGain { gain_db } = self.amplifier {
                let mismatch = (gain_db - span.loss_db()).abs();
                if !gain_db.is_finite() || mismatch > MAX_GAIN_MISMATCH_DB {
                    return Err(Error::config(format!(
                        "span {}: fixed gain {gain_db} dB mismatches the {:.2} dB span loss by more than {MAX_GAIN_MISMATCH_DB} dB",
                        i + 1,
                        span.loss_db()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Field after every span (post-amplifier) plus the link output.
#[derive(Debug, Clone)]
pub struct LinkOutput {
    pub taps: Vec<SampledField>,
    pub output: SampledField,
}

/// Propagates through the whole link, returning a copy of the field after each
/// span's amplifier when `tap_every_span` is set.
pub fn propagate_link(field: &SampledField, link: &LinkConfig) -> Result<LinkOutput> {
    let mut taps = Vec::new();
    let output = propagate_link_with(field, link, |_, f| {
        if link.tap_every_span {
            taps.push(f.clone());
        }
        Ok(())
    })?;
    Ok(LinkOutput { taps, output })
}

/// Streaming variant of [`propagate_link`]: `observe(i, field)` sees the
/// amplified field after span `i` (1-based) without storing it.
pub fn propagate_link_with<F>(field: &SampledField, link: &LinkConfig, mut observe: F) -> Result<SampledField>
where
    F: FnMut(usize, &SampledField) -> Result<()>,
{
    link.validate()?;
    let mut current = field.clone();
    for (i, span) in link.spans.iter().enumerate() {
        let p_in = current.power();
        current = propagate_span_checked(&current, span, link.strict).map_err(|e| e.context(format!("span {}", i + 1)))?;
        let gain = match link.amplifier {
            AmplifierPolicy::ExactPowerRestore => {
                let p_out = current.power();
                if p_out > 0.0 {
                    p_in / p_out
                } else {
                    1.0
                }
            }
            AmplifierPolicy::FixedGain { gain_db } => db_to_linear(gain_db),
        };
        current.scale(gain.sqrt());
        observe(i + 1, &current)?;
    }
    Ok(current)
}

/// Per-domain inverse GSNR values (linear).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsnrRecord {
    pub labels: Vec<String>,
    pub inverse: Vec<f64>,
}

impl GsnrRecord {
    /// Builds a record from per-domain GSNR values in dB.
    pub fn from_gsnr_db<S: Into<String>>(domains: impl IntoIterator<Item = (S, f64)>) -> Self {
        let (labels, inverse) = domains
            .into_iter()
            .map(|(l, db)| (l.into(), 10f64.powf(-db / 10.0)))
            .unzip();
        GsnrRecord { labels, inverse }
    }
}

/// Cascade of optical domains: `(Σ GSNR_i⁻¹)⁻¹`, linear.
pub fn cascade_gsnr(record: &GsnrRecord) -> Result<f64> {
    if record.inverse.is_empty() {
        return Err(Error::domain("GSNR cascade needs at least one domain"));
    }
    if let Some((i, v)) = record.inverse.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        let label = record.labels.get(i).map(String::as_str).unwrap_or("?");
        return Err(Error::domain(format!("domain `{label}` has invalid inverse GSNR {v}")));
    }
    Ok(1.0 / record.inverse.iter().sum::<f64>())
}
