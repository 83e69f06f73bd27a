//! Full-spectrum and pump-and-probe orchestration, and the SPM/XPM decomposition.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{xpm_inverse_snr_per_span, XpmModelParams};
use crate::error::{Error, Result};
use crate::ledger::{
    dominance_crossing, extract_xpm, fit_coherence_exponent, increments, sum_ledgers, superpose, AccumulationLedger,
    Contributor, MIN_FIT_SPANS,
};
use crate::link::{propagate_link_with, LinkConfig};
use crate::rx::measure_channel;
use crate::signal::{check_walk_off, generate_symbols, multiplex, plan_grid, shape_and_modulate, ChannelSpec, GridPlan};

/// Which channels a run launches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "pump")]
pub enum ScenarioKind {
    FullSpectrum,
    PumpProbe(i32),
    ProbeOnly,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioKind::FullSpectrum => f.write_str("full-spectrum"),
            ScenarioKind::PumpProbe(k) => write!(f, "pump-probe({k})"),
            ScenarioKind::ProbeOnly => f.write_str("probe-only"),
        }
    }
}

impl ScenarioKind {
    fn contributor(self) -> Contributor {
        match self {
            ScenarioKind::FullSpectrum => Contributor::Total,
            ScenarioKind::PumpProbe(k) => Contributor::PumpProbe(k),
            ScenarioKind::ProbeOnly => Contributor::Spm,
        }
    }
}

/// A resolved WDM campaign: one channel plan on one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub label: String,
    /// Channel 0 is the channel under test.
    pub channels: Vec<ChannelSpec>,
    pub link: LinkConfig,
    pub n_symbols: usize,
    /// GHz. The grid is planned once from the full plan and shared by every scenario.
    pub min_sample_rate: f64,
}

impl CampaignConfig {
    pub fn cut(&self) -> Result<&ChannelSpec> {
        let mut cuts = self.channels.iter().filter(|c| c.index == 0);
        match (cuts.next(), cuts.next()) {
            (Some(c), None) => Ok(c),
            (None, _) => Err(Error::config("channel plan has no channel under test (index 0)")),
            _ => Err(Error::config("channel plan lists index 0 more than once")),
        }
    }

    pub fn pumps(&self) -> impl Iterator<Item = &ChannelSpec> {
        self.channels.iter().filter(|c| c.index != 0)
    }

    pub fn grid(&self) -> Result<GridPlan> {
        plan_grid(&self.channels, self.n_symbols, self.min_sample_rate)
    }

    /// Every check that can be made before compute starts.
    pub fn validate(&self) -> Result<GridPlan> {
        self.cut()?;
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.channels {
            c.validate()?;
            if !seen.insert(c.index) {
                return Err(Error::config(format!("channel index {} appears twice", c.index)));
            }
        }
        let mut sorted: Vec<_> = self.channels.iter().collect();
        sorted.sort_by(|a, b| a.center_offset.total_cmp(&b.center_offset));
        for w in sorted.windows(2) {
            let spacing = w[1].center_offset - w[0].center_offset;
            if spacing < w[0].symbol_rate.max(w[1].symbol_rate) {
                return Err(Error::config(format!(
                    "channels {} and {} are {spacing} GHz apart, less than the symbol rate",
                    w[0].index, w[1].index
                )));
            }
        }
        self.link.validate()?;
        let grid = self.grid()?;
        for c in &self.channels {
            c.samples_per_symbol(grid.sample_rate)?;
            if c.center_offset.abs() + c.occupied_bandwidth() / 2.0 > grid.sample_rate / 2.0 {
                return Err(Error::config(format!("channel {} does not fit the simulation bandwidth", c.index)));
            }
        }
        let max_offset = self.channels.iter().map(|c| c.center_offset.abs()).fold(0.0, f64::max);
        let max_beta2 = self.link.spans.iter().map(|s| s.beta2().abs()).fold(0.0, f64::max);
        check_walk_off(max_beta2, max_offset, self.link.total_length_km(), grid.duration())?;
        Ok(grid)
    }

    /// Probe-only, then each pump-and-probe run by ascending pump index, then full spectrum.
    pub fn scenario_kinds(&self) -> Vec<ScenarioKind> {
        let mut pumps: Vec<i32> = self.pumps().map(|c| c.index).collect();
        pumps.sort_unstable();
        std::iter::once(ScenarioKind::ProbeOnly)
            .chain(pumps.into_iter().map(ScenarioKind::PumpProbe))
            .chain(std::iter::once(ScenarioKind::FullSpectrum))
            .collect()
    }

    pub fn scenario(&self, kind: ScenarioKind) -> Result<ScenarioConfig> {
        let grid = self.validate()?;
        let channels: Vec<ChannelSpec> = match kind {
            ScenarioKind::FullSpectrum => self.channels.clone(),
            ScenarioKind::ProbeOnly => vec![self.cut()?.clone()],
            ScenarioKind::PumpProbe(k) => {
                let pump = self
                    .channels
                    .iter()
                    .find(|c| c.index == k && k != 0)
                    .ok_or_else(|| Error::config(format!("no pump with index {k}")))?;
                vec![self.cut()?.clone(), pump.clone()]
            }
        };
        Ok(ScenarioConfig {
            kind,
            channels,
            link: self.link.clone(),
            grid,
        })
    }
}

/// One propagation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub channels: Vec<ChannelSpec>,
    pub link: LinkConfig,
    pub grid: GridPlan,
}

impl ScenarioConfig {
    fn validate(&self) -> Result<()> {
        let cuts = self.channels.iter().filter(|c| c.index == 0).count();
        if cuts != 1 {
            return Err(Error::config(format!("scenario needs exactly one channel under test, found {cuts}")));
        }
        match self.kind {
            ScenarioKind::ProbeOnly if self.channels.len() != 1 => {
                Err(Error::config("probe-only scenario must contain only the channel under test"))
            }
            ScenarioKind::PumpProbe(k) if self.channels.len() != 2 || !self.channels.iter().any(|c| c.index == k) || k == 0 => {
                Err(Error::config(format!("pump-probe({k}) must contain exactly channels 0 and {k}")))
            }
            _ => Ok(()),
        }
    }
}

/// Synthesizes, propagates and measures the channel under test after every span.
pub fn run_scenario(config: &ScenarioConfig) -> Result<AccumulationLedger> {
    let run = || -> Result<AccumulationLedger> {
        config.validate()?;
        let grid = config.grid;
        let mut ordered: Vec<&ChannelSpec> = config.channels.iter().collect();
        // CuT first so that the multiplexed field carries its dispersion metadata.
        ordered.sort_by_key(|c| (c.index != 0, c.index));
        let mut fields = Vec::with_capacity(ordered.len());
        let mut cut_symbols = None;
        for c in &ordered {
            let symbols = generate_symbols(c.modulation, grid.n_symbols, c.seed)?;
            fields.push(shape_and_modulate(&symbols, c, grid.sample_rate, grid.n_samples)?);
            if c.index == 0 {
                cut_symbols = Some(symbols);
            }
        }
        let cut = ordered[0];
        let tx = cut_symbols.expect("validated: channel under test present");
        let launch = multiplex(&fields)?;
        drop(fields);

        let mut values = Vec::with_capacity(config.link.n_spans());
        propagate_link_with(&launch, &config.link, |i, field| {
            values.push(measure_channel(field, cut, &tx, i)?.inverse_snr);
            Ok(())
        })?;
        Ok(AccumulationLedger::new(config.kind.contributor(), values))
    };
    run().map_err(|e| e.context(config.kind.to_string()))
}

/// Everything a campaign produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub label: String,
    pub full_spectrum: AccumulationLedger,
    pub probe_only: AccumulationLedger,
    pub pump_probe: Vec<AccumulationLedger>,
    pub xpm: Vec<AccumulationLedger>,
    pub xpm_total: AccumulationLedger,
    pub superposition: AccumulationLedger,
    pub analytic_xpm: Vec<AccumulationLedger>,
    pub analytic_total: AccumulationLedger,
    /// Per-span increments of every ledger above, keyed by contributor label.
    pub increments: BTreeMap<String, Vec<f64>>,
    /// First span where SPM exceeds the aggregate XPM.
    pub dominance_crossing: Option<usize>,
    /// Coherence exponent of the SPM ledger (needs at least 8 spans).
    pub coherence_exponent: Option<f64>,
    pub coherence_exponent_xpm: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl CampaignResult {
    /// All ledgers in presentation order.
    pub fn ledgers(&self) -> Vec<&AccumulationLedger> {
        let mut out = vec![&self.full_spectrum, &self.superposition, &self.probe_only];
        out.push(&self.xpm_total);
        out.push(&self.analytic_total);
        out.extend(&self.pump_probe);
        out.extend(&self.xpm);
        out.extend(&self.analytic_xpm);
        out
    }
}

/// Closed-form incoherent XPM ledger for one pump, summed span by span.
pub fn analytic_ledger(config: &CampaignConfig, pump: &ChannelSpec) -> Result<AccumulationLedger> {
    let cut = config.cut()?;
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(config.link.n_spans());
    for span in &config.link.spans {
        let params = XpmModelParams {
            gamma: span.gamma,
            beta2: span.beta2(),
            alpha_lin: span.alpha_linear(),
            length_km: span.length_km,
            pump_power: pump.power_watt(),
            pump_symbol_rate: pump.symbol_rate,
            spacing: pump.center_offset - cut.center_offset,
            cut_power: cut.power_watt(),
        };
        acc += xpm_inverse_snr_per_span(&params)?;
        values.push(acc);
    }
    Ok(AccumulationLedger::new(Contributor::AnalyticXpm(pump.index), values))
}

/// Assembles a [`CampaignResult`] from the ledgers of every scenario run.
pub fn assemble(config: &CampaignConfig, runs: Vec<(ScenarioKind, AccumulationLedger)>) -> Result<CampaignResult> {
    let mut full = None;
    let mut spm = None;
    let mut pump_probe = Vec::new();
    for (kind, ledger) in runs {
        match kind {
            ScenarioKind::FullSpectrum => full = Some(ledger),
            ScenarioKind::ProbeOnly => spm = Some(ledger),
            ScenarioKind::PumpProbe(_) => pump_probe.push(ledger),
        }
    }
    let full = full.ok_or_else(|| Error::domain("missing full-spectrum run"))?;
    let spm = spm.ok_or_else(|| Error::domain("missing probe-only run"))?;
    pump_probe.sort_by_key(|l| l.contributor);

    let mut diagnostics = Vec::new();
    let mut xpm = Vec::with_capacity(pump_probe.len());
    for pp in &pump_probe {
        let ex = extract_xpm(pp, &spm)?;
        diagnostics.extend(ex.warnings);
        xpm.push(ex.ledger);
    }
    let zeros = AccumulationLedger::new(Contributor::XpmTotal, vec![0.0; spm.n_spans()]);
    let xpm_total = sum_ledgers(Contributor::XpmTotal, &zeros, &xpm)?;
    let superposition = superpose(&spm, &xpm)?;

    let mut pumps: Vec<&ChannelSpec> = config.pumps().collect();
    pumps.sort_by_key(|c| c.index);
    let analytic_xpm = pumps
        .iter()
        .map(|p| analytic_ledger(config, p))
        .collect::<Result<Vec<_>>>()?;
    let zeros = AccumulationLedger::new(Contributor::AnalyticXpmTotal, vec![0.0; spm.n_spans()]);
    let analytic_total = sum_ledgers(Contributor::AnalyticXpmTotal, &zeros, &analytic_xpm)?;

    let dominance = dominance_crossing(&spm, &xpm_total)?;
    let mut fit = |l: &AccumulationLedger| {
        if l.n_spans() < MIN_FIT_SPANS {
            return None;
        }
        match fit_coherence_exponent(l) {
            Ok(e) => Some(e),
            Err(e) => {
                diagnostics.push(format!("coherence fit skipped for {}: {e}", l.contributor));
                None
            }
        }
    };
    let coherence_exponent = fit(&spm);
    let coherence_exponent_xpm = if xpm.is_empty() { None } else { fit(&xpm_total) };

    let mut result = CampaignResult {
        label: config.label.clone(),
        full_spectrum: full,
        probe_only: spm,
        pump_probe,
        xpm,
        xpm_total,
        superposition,
        analytic_xpm,
        analytic_total,
        increments: BTreeMap::new(),
        dominance_crossing: dominance,
        coherence_exponent,
        coherence_exponent_xpm,
        diagnostics,
    };
    result.increments = result
        .ledgers()
        .into_iter()
        .map(|l| (l.contributor.to_string(), increments(l)))
        .collect();
    Ok(result)
}

/// Runs every scenario of every campaign on a pool of `jobs` workers.
///
/// Each scenario is sequential internally, and results are merged by
/// position, so the output does not depend on `jobs`.
pub fn run_campaigns(configs: &[CampaignConfig], jobs: usize) -> Result<Vec<CampaignResult>> {
    run_campaigns_each(configs, jobs)?.into_iter().collect()
}

/// Like [`run_campaigns`] but reports each campaign separately, so that one
/// failing campaign does not discard the others. The outer error covers
/// configuration problems found before any compute starts.
pub fn run_campaigns_each(configs: &[CampaignConfig], jobs: usize) -> Result<Vec<Result<CampaignResult>>> {
    let mut work = Vec::new();
    for (ci, cfg) in configs.iter().enumerate() {
        cfg.validate().map_err(|e| e.context(cfg.label.clone()))?;
        for kind in cfg.scenario_kinds() {
            work.push((ci, cfg.scenario(kind)?));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let ledgers: Vec<Result<AccumulationLedger>> = pool.install(|| {
        work.par_iter()
            .map(|(ci, sc)| {
                log::info!("{}: running {}", configs[*ci].label, sc.kind);
                run_scenario(sc).map_err(|e| e.context(configs[*ci].label.clone()))
            })
            .collect()
    });
    let mut per_campaign: Vec<Result<Vec<(ScenarioKind, AccumulationLedger)>>> =
        (0..configs.len()).map(|_| Ok(Vec::new())).collect();
    for ((ci, sc), ledger) in work.iter().zip(ledgers) {
        let slot = &mut per_campaign[*ci];
        match (slot.as_mut(), ledger) {
            (Ok(runs), Ok(l)) => runs.push((sc.kind, l)),
            (Ok(_), Err(e)) => *slot = Err(e),
            (Err(_), _) => {}
        }
    }
    Ok(configs
        .iter()
        .zip(per_campaign)
        .map(|(cfg, runs)| runs.and_then(|r| assemble(cfg, r).map_err(|e| e.context(cfg.label.clone()))))
        .collect())
}

/// Single-campaign convenience wrapper around [`run_campaigns`].
pub fn run_campaign(config: &CampaignConfig, jobs: usize) -> Result<CampaignResult> {
    Ok(run_campaigns(std::slice::from_ref(config), jobs)?.remove(0))
}
