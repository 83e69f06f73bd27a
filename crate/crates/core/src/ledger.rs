//! Per-span inverse-SNR ledgers and the algebra on them: XPM extraction,
//! superposition, increments, coherence exponent and dominance crossing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// dB-equivalent threshold beyond which a clamped XPM value is reported as a warning.
pub const XPM_CLAMP_WARN_DB: f64 = 0.02;

/// Fewest spans for a meaningful coherence-exponent fit.
pub const MIN_FIT_SPANS: usize = 8;

/// What a ledger accounts for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Contributor {
    /// Full-spectrum propagation.
    Total,
    /// Probe-only propagation: self-channel interference.
    Spm,
    /// Raw pump-and-probe run with pump `k` (contains the probe's SPM).
    PumpProbe(i32),
    /// Pump `k`'s cross-channel share, pump-and-probe minus SPM.
    Xpm(i32),
    /// Sum of all extracted XPM ledgers.
    XpmTotal,
    /// SPM plus all XPM ledgers.
    Superposition,
    /// Closed-form incoherent estimate for pump `k`.
    AnalyticXpm(i32),
    /// Sum of all closed-form pump estimates.
    AnalyticXpmTotal,
}

impl fmt::Display for Contributor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Contributor::Total => f.write_str("total"),
            Contributor::Spm => f.write_str("SPM"),
            Contributor::PumpProbe(k) => write!(f, "PP({k})"),
            Contributor::Xpm(k) => write!(f, "XPM({k})"),
            Contributor::XpmTotal => f.write_str("XPM-total"),
            Contributor::Superposition => f.write_str("superposition"),
            Contributor::AnalyticXpm(k) => write!(f, "analytic-XPM({k})"),
            Contributor::AnalyticXpmTotal => f.write_str("analytic-XPM-total"),
        }
    }
}

impl FromStr for Contributor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let indexed = |prefix: &str| -> Option<i32> {
            s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?.parse().ok()
        };
        Ok(match s {
            "total" => Contributor::Total,
            "SPM" => Contributor::Spm,
            "XPM-total" => Contributor::XpmTotal,
            "superposition" => Contributor::Superposition,
            "analytic-XPM-total" => Contributor::AnalyticXpmTotal,
            _ => {
                if let Some(k) = indexed("PP") {
                    Contributor::PumpProbe(k)
                } else if let Some(k) = indexed("XPM") {
                    Contributor::Xpm(k)
                } else if let Some(k) = indexed("analytic-XPM") {
                    Contributor::AnalyticXpm(k)
                } else {
                    return Err(Error::config(format!("unknown contributor label `{s}`")));
                }
            }
        })
    }
}

impl Serialize for Contributor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Contributor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inverse nonlinear SNR after each span: `values[i-1] = q_i`, with `q_0 = 0` implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulationLedger {
    pub contributor: Contributor,
    pub values: Vec<f64>,
}

impl AccumulationLedger {
    pub fn new(contributor: Contributor, values: Vec<f64>) -> Self {
        Self { contributor, values }
    }

    pub fn n_spans(&self) -> usize {
        self.values.len()
    }

    /// `q_i` for 1-based span `i`; `q_0 = 0`.
    pub fn at(&self, span: usize) -> f64 {
        if span == 0 {
            0.0
        } else {
            self.values[span - 1]
        }
    }

    pub fn values_db(&self) -> Vec<f64> {
        self.values.iter().map(|v| 10.0 * v.log10()).collect()
    }

    /// True when no span is lower than its predecessor by more than `slack_db`.
    pub fn is_non_decreasing(&self, slack_db: f64) -> bool {
        let factor = 10f64.powf(-slack_db / 10.0);
        self.values.windows(2).all(|w| w[1] >= w[0] * factor)
    }
}

fn check_spans(a: &AccumulationLedger, b: &AccumulationLedger) -> Result<()> {
    if a.n_spans() != b.n_spans() {
        return Err(Error::domain(format!(
            "ledger {} has {} spans but {} has {}",
            a.contributor,
            a.n_spans(),
            b.contributor,
            b.n_spans()
        )));
    }
    Ok(())
}

/// An extracted XPM ledger and any clamping diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct XpmExtraction {
    pub ledger: AccumulationLedger,
    pub warnings: Vec<String>,
}

/// `q_i^XPM(k) = q_i^PP(k) − q_i^SPM`, clamped at zero.
pub fn extract_xpm(pump_probe: &AccumulationLedger, probe_only: &AccumulationLedger) -> Result<XpmExtraction> {
    check_spans(pump_probe, probe_only)?;
    let k = match pump_probe.contributor {
        Contributor::PumpProbe(k) | Contributor::Xpm(k) => k,
        other => return Err(Error::domain(format!("{other} is not a pump-and-probe ledger"))),
    };
    let mut warnings = Vec::new();
    let values = pump_probe
        .values
        .iter()
        .zip(&probe_only.values)
        .enumerate()
        .map(|(i, (pp, spm))| {
            let diff = pp - spm;
            if diff < 0.0 {
                let shortfall_db = 10.0 * (spm / pp).log10();
                let msg = format!(
                    "XPM({k}) span {}: pump-and-probe below probe-only by {diff:.3e} ({shortfall_db:.4} dB), clamped to 0",
                    i + 1
                );
                if !(shortfall_db <= XPM_CLAMP_WARN_DB) {
                    log::warn!("{msg}");
                } else {
                    log::debug!("{msg}");
                }
                warnings.push(msg);
                0.0
            } else {
                diff
            }
        })
        .collect();
    Ok(XpmExtraction {
        ledger: AccumulationLedger::new(Contributor::Xpm(k), values),
        warnings,
    })
}

/// Pointwise sum of ledgers under a new label.
pub fn sum_ledgers(contributor: Contributor, base: &AccumulationLedger, others: &[AccumulationLedger]) -> Result<AccumulationLedger> {
    let mut values = base.values.clone();
    for l in others {
        check_spans(base, l)?;
        values.iter_mut().zip(&l.values).for_each(|(a, b)| *a += b);
    }
    Ok(AccumulationLedger::new(contributor, values))
}

/// `q_i^sup = q_i^SPM + Σ_k q_i^XPM(k)`.
pub fn superpose(spm: &AccumulationLedger, xpm: &[AccumulationLedger]) -> Result<AccumulationLedger> {
    sum_ledgers(Contributor::Superposition, spm, xpm)
}

/// Per-span increments `q_i − q_{i−1}`, `i = 1..N`.
pub fn increments(ledger: &AccumulationLedger) -> Vec<f64> {
    (1..=ledger.n_spans()).map(|i| ledger.at(i) - ledger.at(i - 1)).collect()
}

/// Fits `ln q_i = ln c + (1 + ε) ln i` over spans `2..=N` by least squares and returns ε.
pub fn fit_coherence_exponent(ledger: &AccumulationLedger) -> Result<f64> {
    let n = ledger.n_spans();
    if n < MIN_FIT_SPANS {
        return Err(Error::domain(format!(
            "coherence fit needs at least {MIN_FIT_SPANS} spans, ledger {} has {n}",
            ledger.contributor
        )));
    }
    let points: Vec<(f64, f64)> = (2..=n)
        .map(|i| {
            let q = ledger.at(i);
            if q > 0.0 && q.is_finite() {
                Ok(((i as f64).ln(), q.ln()))
            } else {
                Err(Error::domain(format!(
                    "ledger {} has non-positive value {q} at span {i}",
                    ledger.contributor
                )))
            }
        })
        .collect::<Result<_>>()?;
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx - 1.0)
}

/// First 1-based span where SPM exceeds the aggregate XPM, if any.
pub fn dominance_crossing(spm: &AccumulationLedger, xpm_total: &AccumulationLedger) -> Result<Option<usize>> {
    check_spans(spm, xpm_total)?;
    Ok(spm
        .values
        .iter()
        .zip(&xpm_total.values)
        .position(|(s, x)| s > x)
        .map(|i| i + 1))
}
