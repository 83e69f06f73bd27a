#![allow(dead_code)]

use nlilab::campaign::CampaignConfig;
use nlilab::config::RunConfig;
use nlilab::signal::Modulation;

/// A preset scaled down to the given size, with a single pump case.
pub fn scaled(preset: &str, channels: usize, spans: usize, symbols: usize, pumps: Modulation) -> RunConfig {
    let mut cfg = RunConfig::preset(preset).unwrap();
    cfg.channels.count = channels;
    cfg.channels.pump_cases = vec![pumps];
    cfg.link.n_spans = spans;
    cfg.n_symbols = symbols;
    cfg
}

pub fn campaign(cfg: &RunConfig) -> CampaignConfig {
    cfg.campaigns().unwrap().remove(0)
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}
