//! JSON run configuration, built-in presets, and the run manifest.
//!
//! A configuration file describes one channel comb on one link and the list
//! of pump-statistics cases to run on it. Every field is optional; omitted
//! fields take the defaults below and the resolved values are written back
//! into the manifest. Unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::campaign::CampaignConfig;
use crate::error::{Error, Result};
use crate::link::{AmplifierPolicy, LinkConfig};
use crate::signal::{channel_seed, ChannelSpec, Modulation, DEFAULT_MIN_SAMPLE_RATE, DEFAULT_ROLLOFF};
use crate::ssfm::{SpanConfig, StepPolicy};

pub const PRESET_NAMES: [&str; 2] = ["widespread-32g", "highrate-64g"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelPlanConfig {
    /// Number of channels including the channel under test. Indices run
    /// symmetrically around 0; an even count puts the extra channel above.
    pub count: usize,
    pub symbol_rate_gbaud: f64,
    pub spacing_ghz: f64,
    pub power_dbm: f64,
    pub rolloff: f64,
    pub cut_modulation: Modulation,
    /// One campaign per entry: the modulation statistics of every pump.
    pub pump_cases: Vec<Modulation>,
    /// Explicit pre-dispersion applied to the pumps, ps/nm.
    pub pump_predistortion_ps_nm: f64,
}

impl Default for ChannelPlanConfig {
    fn default() -> Self {
        ChannelPlanConfig {
            count: 5,
            symbol_rate_gbaud: 32.0,
            spacing_ghz: 37.5,
            power_dbm: 0.0,
            rolloff: DEFAULT_ROLLOFF,
            cut_modulation: Modulation::PmQpsk,
            pump_cases: vec![Modulation::PmQpsk, Modulation::Gaussian],
            pump_predistortion_ps_nm: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpanSettings {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub gamma: f64,
    pub step_policy: StepPolicy,
}

impl Default for SpanSettings {
    fn default() -> Self {
        let s = SpanConfig::smf(80.0);
        SpanSettings {
            length_km: s.length_km,
            attenuation_db_per_km: s.attenuation_db_per_km,
            dispersion_ps_nm_km: s.dispersion_ps_nm_km,
            gamma: s.gamma,
            step_policy: s.step_policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSettings {
    pub n_spans: usize,
    pub span: SpanSettings,
    pub amplifier: AmplifierPolicy,
}

impl Default for LinkSettings {
    fn default() -> Self {
        LinkSettings {
            n_spans: 10,
            span: SpanSettings::default(),
            amplifier: AmplifierPolicy::ExactPowerRestore,
        }
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub label: String,
    pub channels: ChannelPlanConfig,
    pub link: LinkSettings,
    /// Symbols per polarization; a power of two.
    pub n_symbols: usize,
    pub seed: u64,
    pub min_sample_rate_ghz: f64,
    /// Step-halving verification on every span.
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            label: "custom".into(),
            channels: ChannelPlanConfig::default(),
            link: LinkSettings::default(),
            n_symbols: 1 << 13,
            seed: 1,
            min_sample_rate_ghz: DEFAULT_MIN_SAMPLE_RATE,
            strict: false,
        }
    }
}

/// Log-distributed steps with no step longer than 200 m. Longer steps alias
/// the dispersive phase mismatch across a 5-channel comb.
pub fn preset_step_policy() -> StepPolicy {
    StepPolicy::LogDistributed {
        n_steps: crate::ssfm::DEFAULT_STEPS_PER_SPAN,
        max_step_km: Some(0.2),
    }
}

/// Command-line overrides applied on top of a file or preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spans: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbols: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub strict: bool,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        *self == Overrides::default()
    }
}

impl RunConfig {
    /// Built-in scenario presets.
    pub fn preset(name: &str) -> Result<RunConfig> {
        let base = RunConfig::default();
        match name {
            "widespread-32g" => Ok(RunConfig {
                label: name.into(),
                link: LinkSettings {
                    span: SpanSettings {
                        step_policy: preset_step_policy(),
                        ..base.link.span.clone()
                    },
                    ..base.link.clone()
                },
                ..base
            }),
            "highrate-64g" => Ok(RunConfig {
                label: name.into(),
                channels: ChannelPlanConfig {
                    symbol_rate_gbaud: 64.0,
                    spacing_ghz: 75.0,
                    // Same power spectral density as the 32 GBaud preset.
                    power_dbm: 3.0,
                    ..base.channels.clone()
                },
                link: LinkSettings {
                    span: SpanSettings {
                        step_policy: preset_step_policy(),
                        ..base.link.span.clone()
                    },
                    ..base.link.clone()
                },
                ..base
            }),
            other => Err(Error::config(format!(
                "unknown preset `{other}` (available: {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.spans {
            self.link.n_spans = n;
        }
        if let Some(k) = o.channels {
            self.channels.count = k;
        }
        if let Some(m) = o.symbols {
            self.n_symbols = m;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.strict {
            self.strict = true;
        }
    }

    /// Field-level constraint checks. Errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let c = &self.channels;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be a positive number, got {v}")))
            }
        };
        if c.count == 0 {
            return Err(Error::config("channels.count must be at least 1"));
        }
        positive("channels.symbol_rate_gbaud", c.symbol_rate_gbaud)?;
        if c.count > 1 {
            positive("channels.spacing_ghz", c.spacing_ghz)?;
            if c.spacing_ghz < c.symbol_rate_gbaud {
                return Err(Error::config(format!(
                    "channels.spacing_ghz ({}) must be >= channels.symbol_rate_gbaud ({})",
                    c.spacing_ghz, c.symbol_rate_gbaud
                )));
            }
        }
        if !c.power_dbm.is_finite() {
            return Err(Error::config("channels.power_dbm must be finite"));
        }
        if !(0.0..=1.0).contains(&c.rolloff) {
            return Err(Error::config(format!("channels.rolloff must lie in [0, 1], got {}", c.rolloff)));
        }
        if c.pump_cases.is_empty() {
            return Err(Error::config("channels.pump_cases must list at least one modulation"));
        }
        let mut seen = c.pump_cases.clone();
        seen.sort_by_key(|m| m.to_string());
        seen.dedup();
        if seen.len() != c.pump_cases.len() {
            return Err(Error::config("channels.pump_cases lists a modulation twice"));
        }
        if !c.pump_predistortion_ps_nm.is_finite() {
            return Err(Error::config("channels.pump_predistortion_ps_nm must be finite"));
        }
        if self.link.n_spans == 0 {
            return Err(Error::config("link.n_spans must be at least 1"));
        }
        let s = &self.link.span;
        positive("link.span.length_km", s.length_km)?;
        if !(s.attenuation_db_per_km >= 0.0 && s.attenuation_db_per_km.is_finite()) {
            return Err(Error::config("link.span.attenuation_db_per_km must be >= 0"));
        }
        if !(s.gamma >= 0.0 && s.gamma.is_finite()) {
            return Err(Error::config("link.span.gamma must be >= 0"));
        }
        if !s.dispersion_ps_nm_km.is_finite() {
            return Err(Error::config("link.span.dispersion_ps_nm_km must be finite"));
        }
        match s.step_policy {
            StepPolicy::Fixed { dz_km } => positive("link.span.step_policy.dz_km", dz_km)?,
            StepPolicy::LogDistributed { n_steps: 0, .. } => {
                return Err(Error::config("link.span.step_policy.n_steps must be at least 1"))
            }
            StepPolicy::LogDistributed {
                max_step_km: Some(m), ..
            } => positive("link.span.step_policy.max_step_km", m)?,
            _ => {}
        }
        if self.n_symbols < crate::rx::MIN_ESTIMATOR_SYMBOLS || !self.n_symbols.is_power_of_two() {
            return Err(Error::config(format!(
                "n_symbols must be a power of two >= {}, got {}",
                crate::rx::MIN_ESTIMATOR_SYMBOLS,
                self.n_symbols
            )));
        }
        positive("min_sample_rate_ghz", self.min_sample_rate_ghz)?;
        Ok(())
    }

    /// Channel indices in launch order.
    pub fn channel_indices(&self) -> Vec<i32> {
        let k = self.channels.count as i32;
        let lo = -((k - 1) / 2);
        (lo..lo + k).collect()
    }

    pub fn case_label(&self, case: Modulation) -> String {
        format!("{}:{}", self.label, case)
    }

    /// One campaign per pump case, with grid and walk-off checks already passed.
    pub fn campaigns(&self) -> Result<Vec<CampaignConfig>> {
        self.validate()?;
        let c = &self.channels;
        let s = &self.link.span;
        let span = SpanConfig {
            length_km: s.length_km,
            attenuation_db_per_km: s.attenuation_db_per_km,
            dispersion_ps_nm_km: s.dispersion_ps_nm_km,
            gamma: s.gamma,
            step_policy: s.step_policy,
        };
        let mut link = LinkConfig::uniform(span, self.link.n_spans);
        link.amplifier = self.link.amplifier;
        link.strict = self.strict;
        c.pump_cases
            .iter()
            .map(|&case| {
                let channels = self
                    .channel_indices()
                    .into_iter()
                    .map(|index| ChannelSpec {
                        index,
                        center_offset: index as f64 * c.spacing_ghz,
                        symbol_rate: c.symbol_rate_gbaud,
                        power: c.power_dbm,
                        modulation: if index == 0 { c.cut_modulation } else { case },
                        rolloff: c.rolloff,
                        predistortion: if index == 0 { 0.0 } else { c.pump_predistortion_ps_nm },
                        seed: channel_seed(self.seed, index),
                    })
                    .collect();
                let cfg = CampaignConfig {
                    label: self.case_label(case),
                    channels,
                    link: link.clone(),
                    n_symbols: self.n_symbols,
                    min_sample_rate: self.min_sample_rate_ghz,
                };
                cfg.validate().map_err(|e| e.context(cfg.label.clone()))?;
                Ok(cfg)
            })
            .collect()
    }
}

/// Parses a configuration document. A run manifest (or a campaign JSON that
/// embeds one) is also accepted, in which case its resolved configuration is used.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let config = if let Some(m) = value.get("manifest") {
        m.get("config").cloned()
    } else if value.get("manifest_version").is_some() {
        value.get("config").cloned()
    } else {
        Some(value)
    }
    .ok_or_else(|| Error::config("manifest has no `config` object"))?;
    let config: RunConfig = serde_json::from_value(config).map_err(|e| Error::config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Reads and resolves a configuration file; all grid checks run before returning.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read configuration {}: {e}", path.display())))?;
    let config = parse_config(&text).map_err(|e| e.context(path.display().to_string()))?;
    config.campaigns()?;
    Ok(config)
}

/// Numerical policies recorded alongside every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericalPolicy {
    pub step_policy: StepPolicy,
    pub n_symbols: usize,
    pub samples_per_symbol: usize,
    pub sample_rate_ghz: f64,
    pub rolloff: f64,
    pub pulse_shape: String,
    pub estimator: String,
    pub strict: bool,
}

/// Seeds of one campaign, by channel index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSeeds {
    pub campaign: String,
    pub channel_seeds: Vec<(i32, u64)>,
}

/// Everything needed to reproduce a run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub software_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub overrides: Overrides,
    pub config: RunConfig,
    pub seeds: Vec<CaseSeeds>,
    pub numerics: NumericalPolicy,
    pub jobs: usize,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    pub status: String,
}

impl RunManifest {
    pub fn new(config: &RunConfig, preset: Option<String>, overrides: Overrides, jobs: usize) -> Result<Self> {
        let campaigns = config.campaigns()?;
        let grid = campaigns[0].grid()?;
        Ok(RunManifest {
            manifest_version: 1,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            preset,
            overrides,
            config: config.clone(),
            seeds: campaigns
                .iter()
                .map(|c| CaseSeeds {
                    campaign: c.label.clone(),
                    channel_seeds: c.channels.iter().map(|ch| (ch.index, ch.seed)).collect(),
                })
                .collect(),
            numerics: NumericalPolicy {
                step_policy: config.link.span.step_policy,
                n_symbols: config.n_symbols,
                samples_per_symbol: grid.samples_per_symbol,
                sample_rate_ghz: grid.sample_rate,
                rolloff: config.channels.rolloff,
                pulse_shape: "root-raised-cosine, circular".into(),
                estimator: "data-aided, least-squares complex scale per polarization".into(),
                strict: config.strict,
            },
            jobs,
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
            status: "running".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_defaults() {
        let cfg = parse_config(r#"{"channels": {"count": 2}, "link": {"n_spans": 1}}"#).unwrap();
        assert_eq!(cfg.channels.count, 2);
        assert_eq!(cfg.link.n_spans, 1);
        assert_eq!(cfg.channels.rolloff, 0.1);
        assert_eq!(cfg.link.span.gamma, 1.27);
        assert_eq!(cfg.n_symbols, 8192);
        assert_eq!(cfg.channel_indices(), vec![0, 1]);
        let resolved = serde_json::to_value(&cfg).unwrap();
        for key in ["label", "channels", "link", "n_symbols", "seed", "min_sample_rate_ghz", "strict"] {
            assert!(resolved.get(key).is_some(), "{key} missing from resolved config");
        }
        let campaigns = cfg.campaigns().unwrap();
        assert_eq!(campaigns.len(), 2);
        assert_eq!(campaigns[0].channels.len(), 2);
    }

    #[test]
    fn unknown_field_is_named() {
        let err = parse_config(r#"{"channels": {"cout": 3}}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("cout"), "{err}");
    }

    #[test]
    fn spacing_below_symbol_rate_rejected() {
        let err = parse_config(r#"{"channels": {"symbol_rate_gbaud": 64, "spacing_ghz": 50}}"#).unwrap_err();
        assert!(err.to_string().contains("channels.spacing_ghz"), "{err}");
    }

    #[test]
    fn grid_capacity_checked_before_compute() {
        // 41 channels at 37.5 GHz cannot fit a 512 GHz grid at 16 samples per symbol,
        // so the planner doubles it; the walk-off then outgrows a 1024-symbol window.
        let cfg = parse_config(r#"{"channels": {"count": 41}, "n_symbols": 1024, "link": {"n_spans": 20}}"#).unwrap();
        assert_eq!(cfg.campaigns().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn presets() {
        let a = RunConfig::preset("widespread-32g").unwrap();
        assert_eq!((a.channels.symbol_rate_gbaud, a.channels.spacing_ghz), (32.0, 37.5));
        let b = RunConfig::preset("highrate-64g").unwrap();
        assert_eq!((b.channels.symbol_rate_gbaud, b.channels.spacing_ghz), (64.0, 75.0));
        assert_eq!(b.link.span.dispersion_ps_nm_km, 16.7);
        assert!(RunConfig::preset("nope").is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let mut cfg = RunConfig::preset("highrate-64g").unwrap();
        let o = Overrides {
            spans: Some(10),
            channels: Some(5),
            ..Default::default()
        };
        cfg.apply(&o);
        let m = RunManifest::new(&cfg, Some("highrate-64g".into()), o.clone(), 1).unwrap();
        let text = serde_json::to_string_pretty(&m).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
        let wrapped = serde_json::json!({ "manifest": m, "results": [] }).to_string();
        assert_eq!(parse_config(&wrapped).unwrap(), cfg);
        assert_eq!(m.overrides, o);
        assert_eq!(m.numerics.samples_per_symbol, 8);
    }
}
