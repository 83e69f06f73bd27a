//! Symmetrized split-step Fourier propagation of the Manakov equation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{bin_frequencies, fft, forward_plan, ifft, inverse_plan, SampledField};
use crate::units::{alpha_linear, beta2_from_dispersion, CARRIER_WAVELENGTH_NM, SPEED_OF_LIGHT_NM_PER_PS};

/// Manakov polarization-averaged Kerr factor.
pub const MANAKOV_FACTOR: f64 = 8.0 / 9.0;

/// Default steps per span under [`StepPolicy::LogDistributed`].
pub const DEFAULT_STEPS_PER_SPAN: usize = 200;

/// Largest tolerated step-halving deviation in strict mode, dB.
pub const STRICT_TOLERANCE_DB: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StepPolicy {
    /// Uniform steps of `dz_km`; the last step absorbs the remainder.
    Fixed { dz_km: f64 },
    /// `n_steps` steps of equal effective length, short where the power is high.
    ///
    /// With `max_step_km` set, any step longer than the cap is split evenly.
    /// Late steps in a long span otherwise grow to several km, which is
    /// coarse compared with the walk-off between widely spaced channels.
    LogDistributed {
        n_steps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_step_km: Option<f64>,
    },
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::LogDistributed {
            n_steps: DEFAULT_STEPS_PER_SPAN,
            max_step_km: None,
        }
    }
}

impl StepPolicy {
    /// Same policy at twice the resolution.
    pub fn refined(&self) -> StepPolicy {
        match *self {
            StepPolicy::Fixed { dz_km } => StepPolicy::Fixed { dz_km: dz_km / 2.0 },
            StepPolicy::LogDistributed { n_steps, max_step_km } => StepPolicy::LogDistributed {
                n_steps: 2 * n_steps,
                max_step_km: max_step_km.map(|m| m / 2.0),
            },
        }
    }
}

/// One fiber span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanConfig {
    pub length_km: f64,
    /// dB/km.
    pub attenuation_db_per_km: f64,
    /// ps/(nm·km).
    pub dispersion_ps_nm_km: f64,
    /// 1/(W·km).
    pub gamma: f64,
    #[serde(default)]
    pub step_policy: StepPolicy,
}

impl SpanConfig {
    /// Standard single-mode fiber span with the crate defaults.
    pub fn smf(length_km: f64) -> Self {
        SpanConfig {
            length_km,
            attenuation_db_per_km: 0.2,
            dispersion_ps_nm_km: 16.7,
            gamma: 1.27,
            step_policy: StepPolicy::default(),
        }
    }

    /// ps²/km at 1550 nm.
    pub fn beta2(&self) -> f64 {
        beta2_from_dispersion(self.dispersion_ps_nm_km)
    }

    /// Field-power attenuation coefficient, 1/km.
    pub fn alpha_linear(&self) -> f64 {
        alpha_linear(self.attenuation_db_per_km)
    }

    pub fn loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.length_km
    }

    pub fn effective_length(&self) -> f64 {
        effective_length(self.attenuation_db_per_km, self.length_km)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.length_km,
            self.attenuation_db_per_km,
            self.dispersion_ps_nm_km,
            self.gamma,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("span parameters must be finite"));
        }
        if self.length_km <= 0.0 {
            return Err(Error::config(format!("span length_km must be > 0, got {}", self.length_km)));
        }
        if self.attenuation_db_per_km < 0.0 {
            return Err(Error::config("span attenuation_db_per_km must be >= 0"));
        }
        if self.gamma < 0.0 {
            return Err(Error::config("span gamma must be >= 0"));
        }
        match self.step_policy {
            StepPolicy::Fixed { dz_km } if !(dz_km > 0.0 && dz_km.is_finite()) => {
                Err(Error::config("step_policy.dz_km must be > 0"))
            }
            StepPolicy::LogDistributed { n_steps: 0, .. } => Err(Error::config("step_policy.n_steps must be >= 1")),
            StepPolicy::LogDistributed {
                max_step_km: Some(m), ..
            } if !(m > 0.0 && m.is_finite()) => Err(Error::config("step_policy.max_step_km must be > 0")),
            _ => Ok(()),
        }
    }

    /// Step lengths (km) the policy prescribes over this span.
    pub fn step_lengths(&self) -> Vec<f64> {
        let l = self.length_km;
        match self.step_policy {
            StepPolicy::Fixed { dz_km } => {
                let full = ((l / dz_km) * (1.0 + 1e-12)).floor() as usize;
                let mut steps = vec![dz_km; full];
                let rest = l - full as f64 * dz_km;
                if rest > 1e-9 * l {
                    steps.push(rest);
                }
                steps
            }
            StepPolicy::LogDistributed { n_steps, max_step_km } => {
                let a = self.alpha_linear();
                let base = if a == 0.0 {
                    vec![l / n_steps as f64; n_steps]
                } else {
                    let delta = (1.0 - (-a * l).exp()) / n_steps as f64;
                    let z = |j: usize| {
                        if j == n_steps {
                            l
                        } else {
                            -(1.0 - j as f64 * delta).ln() / a
                        }
                    };
                    (0..n_steps).map(|j| z(j + 1) - z(j)).collect()
                };
                match max_step_km {
                    None => base,
                    Some(cap) => base
                        .into_iter()
                        .flat_map(|h| {
                            let pieces = (h / cap * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                            std::iter::repeat(h / pieces as f64).take(pieces)
                        })
                        .collect(),
                }
            }
        }
    }
}

/// `(1 − e^{−αL}) / α` in km, with α given in dB/km; the lossless limit is `L`.
pub fn effective_length(alpha_db_per_km: f64, length_km: f64) -> f64 {
    let a = alpha_linear(alpha_db_per_km);
    if a == 0.0 {
        length_km
    } else {
        -(-a * length_km).exp_m1() / a
    }
}

/// Dispersion parameter D (ps/(nm·km)) for a β2 in ps²/km.
pub fn dispersion_from_beta2(beta2_ps2_per_km: f64) -> f64 {
    -beta2_ps2_per_km * 2.0 * PI * SPEED_OF_LIGHT_NM_PER_PS / (CARRIER_WAVELENGTH_NM * CARRIER_WAVELENGTH_NM)
}

/// Spectral transfer function of dispersion plus loss, `exp(i(β2/2)ω²dz − αdz/2)`.
struct DispersionKernel {
    /// `(β2/2)(2π df)²`, rad/km; bin `k` sees `k²` times this on a carrier-centered grid.
    unit_phase: f64,
    /// Per-bin `(β2/2)ω²` for grids not centered on the carrier.
    phase_per_km: Option<Vec<f64>>,
    factors: Vec<Complex64>,
}

/// Exact `sin_cos` resynchronization interval for the quadratic-phase recurrence.
const RESYNC_BINS: usize = 16;

impl DispersionKernel {
    fn new(field: &SampledField, beta2_ps2_per_km: f64) -> Self {
        // ω in rad/ns, β2 in ns²/km.
        let b = beta2_ps2_per_km * 1e-6 / 2.0;
        let n = field.len();
        let fc = field.center_frequency_offset;
        let phase_per_km = (fc != 0.0).then(|| {
            bin_frequencies(n, field.sample_rate)
                .into_iter()
                .map(|f| {
                    let w = 2.0 * PI * (f + fc);
                    b * w * w
                })
                .collect()
        });
        let dw = 2.0 * PI * field.frequency_resolution();
        Self {
            unit_phase: b * dw * dw,
            phase_per_km,
            factors: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Fills `factors` for a step of `dz` km with amplitude scaling `amplitude`.
    fn prepare(&mut self, dz: f64, amplitude: f64) {
        let n = self.factors.len();
        if let Some(phase) = &self.phase_per_km {
            for (out, k) in self.factors.iter_mut().zip(phase) {
                *out = Complex64::from_polar(amplitude, k * dz);
            }
            return;
        }
        // Phase is θk² with θ = unit_phase·dz; bins k and n−k share it. Between
        // exact resyncs, z_{k+1} = z_k·r_k and r_{k+1} = r_k·e^{2iθ}.
        let theta = self.unit_phase * dz;
        let half = n / 2;
        let step2 = Complex64::from_polar(1.0, 2.0 * theta);
        let mut z = Complex64::new(1.0, 0.0);
        let mut r = Complex64::new(1.0, 0.0);
        for k in 0..=half {
            if k % RESYNC_BINS == 0 {
                let kf = k as f64;
                z = Complex64::from_polar(1.0, theta * kf * kf);
                r = Complex64::from_polar(1.0, theta * (2.0 * kf + 1.0));
            }
            let v = z * amplitude;
            self.factors[k] = v;
            if k != 0 && k != half {
                self.factors[n - k] = v;
            }
            z *= r;
            r *= step2;
        }
    }

    fn apply(&self, spectrum: &mut [Complex64]) {
        spectrum.iter_mut().zip(&self.factors).for_each(|(v, g)| *v *= g);
    }
}

/// `(sin φ, cos φ)`, by truncated series for the small rotations a split step produces.
#[inline]
fn small_angle_sin_cos(phi: f64) -> (f64, f64) {
    if phi.abs() <= 0.1 {
        let p2 = phi * phi;
        let s = phi * (1.0 - p2 / 6.0 * (1.0 - p2 / 20.0 * (1.0 - p2 / 42.0 * (1.0 - p2 / 72.0))));
        let c = 1.0 - p2 / 2.0 * (1.0 - p2 / 12.0 * (1.0 - p2 / 30.0 * (1.0 - p2 / 56.0)));
        (s, c)
    } else {
        phi.sin_cos()
    }
}

fn kerr_rotate(x: &mut [Complex64], y: &mut [Complex64], coefficient: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let phi = coefficient * (a.norm_sqr() + b.norm_sqr());
        let (s, c) = small_angle_sin_cos(phi);
        let r = Complex64::new(c, s);
        *a *= r;
        *b *= r;
    }
}

/// Dispersion and loss over `dz` km, applied in the spectral domain.
pub fn linear_step(field: &SampledField, beta2_ps2_per_km: f64, alpha_db_per_km: f64, dz: f64) -> Result<SampledField> {
    if !(dz > 0.0) {
        return Err(Error::domain(format!("linear step length must be > 0, got {dz}")));
    }
    let mut out = field.clone();
    let mut kernel = DispersionKernel::new(field, beta2_ps2_per_km);
    kernel.prepare(dz, (-alpha_linear(alpha_db_per_km) * dz / 2.0).exp());
    for pol in [&mut out.x, &mut out.y] {
        fft(pol);
        kernel.apply(pol);
        ifft(pol);
    }
    out.accumulated_dispersion += dispersion_from_beta2(beta2_ps2_per_km) * dz;
    Ok(out)
}

/// Manakov Kerr rotation `exp(i·8/9·γ·(|x|²+|y|²)·dz_eff)` on both polarizations.
pub fn nonlinear_step(field: &SampledField, gamma: f64, dz_eff: f64) -> Result<SampledField> {
    if !(dz_eff >= 0.0) {
        return Err(Error::domain(format!("effective step length must be >= 0, got {dz_eff}")));
    }
    let mut out = field.clone();
    if gamma != 0.0 && dz_eff != 0.0 {
        kerr_rotate(&mut out.x, &mut out.y, MANAKOV_FACTOR * gamma * dz_eff);
    }
    Ok(out)
}

/// Effective length of a step of `h` km whose Kerr rotation is evaluated at the
/// step midpoint: `∫ e^{−αz} dz / e^{−αh/2} = 2 sinh(αh/2) / α`.
fn midpoint_effective_length(alpha: f64, h: f64) -> f64 {
    if alpha == 0.0 {
        h
    } else {
        2.0 * (alpha * h / 2.0).sinh() / alpha
    }
}

/// Propagates through one span with the symmetrized split-step scheme.
///
/// Adjacent linear half-steps are merged, so each step costs one forward and
/// one inverse transform per polarization.
pub fn propagate_span(field: &SampledField, span: &SpanConfig) -> Result<SampledField> {
    let mut out = field.clone();
    propagate_span_in_place(&mut out, span)?;
    Ok(out)
}

/// [`propagate_span`] with optional step-halving verification.
///
/// In strict mode the span is re-run at doubled resolution; the run fails if
/// the resulting bound on the inverse-SNR deviation exceeds
/// [`STRICT_TOLERANCE_DB`].
pub fn propagate_span_checked(field: &SampledField, span: &SpanConfig, strict: bool) -> Result<SampledField> {
    let coarse = propagate_span(field, span)?;
    if strict && span.gamma > 0.0 {
        let fine_span = SpanConfig {
            step_policy: span.step_policy.refined(),
            ..span.clone()
        };
        let fine = propagate_span(field, &fine_span)?;
        let deviation = step_deviation_db(field, span, &coarse, &fine)?;
        if deviation > STRICT_TOLERANCE_DB {
            return Err(Error::Numerical(format!(
                "step-halving changed the span output by up to {deviation:.3} dB (limit {STRICT_TOLERANCE_DB} dB)"
            )));
        }
    }
    Ok(coarse)
}

/// Upper bound on the inverse-SNR change caused by the difference between two
/// runs: `20·log10(1 + ‖coarse − fine‖ / ‖NLI‖)`, with the NLI taken as the
/// part of `fine` not explained by a scaled linear propagation.
pub fn step_deviation_db(input: &SampledField, span: &SpanConfig, coarse: &SampledField, fine: &SampledField) -> Result<f64> {
    let linear = propagate_span(input, &SpanConfig { gamma: 0.0, ..span.clone() })?;
    let mut num = 0.0;
    let mut den = Complex64::new(0.0, 0.0);
    for (l, f) in linear.x.iter().chain(&linear.y).zip(fine.x.iter().chain(&fine.y)) {
        num += l.norm_sqr();
        den += l.conj() * f;
    }
    let h = if num > 0.0 { den / num } else { Complex64::new(0.0, 0.0) };
    let mut nli = 0.0;
    let mut diff = 0.0;
    let pairs = linear
        .x
        .iter()
        .chain(&linear.y)
        .zip(fine.x.iter().chain(&fine.y))
        .zip(coarse.x.iter().chain(&coarse.y));
    for ((l, f), c) in pairs {
        nli += (f - h * l).norm_sqr();
        diff += (c - f).norm_sqr();
    }
    if nli == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(20.0 * (1.0 + (diff / nli).sqrt()).log10())
}

pub(crate) fn propagate_span_in_place(field: &mut SampledField, span: &SpanConfig) -> Result<()> {
    span.validate()?;
    let steps = span.step_lengths();
    let alpha = span.alpha_linear();
    let mut kernel = DispersionKernel::new(field, span.beta2());
    let n = field.len();
    let forward = forward_plan(n);
    let inverse = inverse_plan(n);
    let mut scratch = vec![
        Complex64::new(0.0, 0.0);
        forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len())
    ];
    let norm = 1.0 / n as f64;
    let SampledField { x, y, .. } = field;

    forward.process_with_scratch(x, &mut scratch);
    forward.process_with_scratch(y, &mut scratch);
    if span.gamma == 0.0 {
        kernel.prepare(span.length_km, (-alpha * span.length_km / 2.0).exp() * norm);
        kernel.apply(x);
        kernel.apply(y);
    } else {
        // The 1/N of each inverse transform is folded into the linear factors.
        let mut pending = steps[0] / 2.0;
        for (j, &h) in steps.iter().enumerate() {
            kernel.prepare(pending, (-alpha * pending / 2.0).exp() * norm);
            kernel.apply(x);
            kernel.apply(y);
            inverse.process_with_scratch(x, &mut scratch);
            inverse.process_with_scratch(y, &mut scratch);
            let coefficient = MANAKOV_FACTOR * span.gamma * midpoint_effective_length(alpha, h);
            kerr_rotate(x, y, coefficient);
            forward.process_with_scratch(x, &mut scratch);
            forward.process_with_scratch(y, &mut scratch);
            pending = h / 2.0 + steps.get(j + 1).map_or(0.0, |next| next / 2.0);
        }
        kernel.prepare(pending, (-alpha * pending / 2.0).exp() * norm);
        kernel.apply(x);
        kernel.apply(y);
    }
    inverse.process_with_scratch(x, &mut scratch);
    inverse.process_with_scratch(y, &mut scratch);
    field.accumulated_dispersion += span.dispersion_ps_nm_km * span.length_km;
    Ok(())
}
