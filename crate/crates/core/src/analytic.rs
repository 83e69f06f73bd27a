//! Closed-form incoherent XPM reference.
//!
//! Per span and per pump, the cross-channel inverse SNR of the incoherent
//! Gaussian-noise model with the logarithmic closed form:
//!
//! ```text
//! q = (8/27) γ² L_eff² P_k² · ln((Δf + B/2)/(Δf − B/2)) / (π |β2| L_eff,a B²)
//! ```
//!
//! with `L_eff,a = 1/α`. The prefactor is the self-channel `8/27` times the
//! XPM degeneracy of 2, divided by the 2 that separates the cross-channel
//! `1/(4π|β2|L_eff,a)` kernel from the self-channel `1/(2π|β2|L_eff,a)` one.
//! The result does not depend on the probe power.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{AccumulationLedger, Contributor};

/// Leading constant of the closed form.
pub const XPM_PREFACTOR: f64 = 8.0 / 27.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XpmModelParams {
    /// 1/(W·km).
    pub gamma: f64,
    /// ps²/km.
    pub beta2: f64,
    /// Field-power attenuation, 1/km.
    pub alpha_lin: f64,
    pub length_km: f64,
    /// W.
    pub pump_power: f64,
    /// GHz.
    pub pump_symbol_rate: f64,
    /// Pump-to-probe spacing, GHz.
    pub spacing: f64,
    /// W. Carried for completeness.
    pub cut_power: f64,
}

impl XpmModelParams {
    fn validate(&self) -> Result<()> {
        let spacing = self.spacing.abs();
        if !(spacing > self.pump_symbol_rate / 2.0) {
            return Err(Error::domain(format!(
                "spacing {} GHz must exceed half the pump symbol rate {} GHz",
                self.spacing, self.pump_symbol_rate
            )));
        }
        if !(self.alpha_lin > 0.0) || !(self.length_km > 0.0) || self.beta2 == 0.0 || !(self.pump_symbol_rate > 0.0) {
            return Err(Error::domain("XPM model needs α > 0, L > 0, β2 ≠ 0 and B > 0"));
        }
        if self.gamma < 0.0 || self.pump_power < 0.0 {
            return Err(Error::domain("XPM model needs γ ≥ 0 and P_k ≥ 0"));
        }
        Ok(())
    }
}

/// Inverse-SNR contribution of one pump over one span.
pub fn xpm_inverse_snr_per_span(p: &XpmModelParams) -> Result<f64> {
    p.validate()?;
    let l_eff = -(-p.alpha_lin * p.length_km).exp_m1() / p.alpha_lin;
    let l_eff_a = 1.0 / p.alpha_lin;
    let spacing = p.spacing.abs();
    let b = p.pump_symbol_rate;
    let log_term = ((spacing + b / 2.0) / (spacing - b / 2.0)).ln();
    // β2 in ps²/km with B in THz makes the denominator dimensionless.
    let b_thz = b * 1e-3;
    let denom = std::f64::consts::PI * p.beta2.abs() * l_eff_a * b_thz * b_thz;
    Ok(XPM_PREFACTOR * (p.gamma * l_eff * p.pump_power).powi(2) * log_term / denom)
}

/// Strictly linear accumulation of the per-span value over `n_spans` spans.
pub fn xpm_incoherent_ledger(pump_index: i32, p: &XpmModelParams, n_spans: usize) -> Result<AccumulationLedger> {
    if n_spans == 0 {
        return Err(Error::domain("ledger needs at least one span"));
    }
    let q1 = xpm_inverse_snr_per_span(p)?;
    Ok(AccumulationLedger::new(
        Contributor::AnalyticXpm(pump_index),
        (1..=n_spans).map(|i| i as f64 * q1).collect(),
    ))
}
