//! Propagation engine against closed-form oracles.

use std::f64::consts::PI;

use nlilab::config::preset_step_policy;
use nlilab::field::{bin_frequencies, SampledField};
use nlilab::link::{propagate_link, AmplifierPolicy, LinkConfig};
use nlilab::rx::{compensate_dispersion, demultiplex};
use nlilab::signal::{generate_symbols, multiplex, shape_and_modulate, ChannelSpec, Modulation};
use nlilab::ssfm::{effective_length, linear_step, propagate_span, SpanConfig, StepPolicy};
use nlilab::units::{beta2_from_dispersion, dbm_to_watt};
use num_complex::Complex64;

fn lossless(span: SpanConfig) -> SpanConfig {
    SpanConfig {
        attenuation_db_per_km: 0.0,
        ..span
    }
}

fn channel(index: i32, rs: f64, spacing: f64, power: f64) -> ChannelSpec {
    ChannelSpec {
        index,
        center_offset: index as f64 * spacing,
        symbol_rate: rs,
        power,
        modulation: Modulation::PmQpsk,
        rolloff: 0.1,
        predistortion: 0.0,
        seed: 1000 + (index + 50) as u64,
    }
}

fn comb(n_ch: i32, rs: f64, spacing: f64, power: f64, n_symbols: usize, fs: f64) -> SampledField {
    let sps = (fs / rs) as usize;
    let fields: Vec<SampledField> = (-(n_ch / 2)..=n_ch / 2)
        .map(|k| {
            let ch = channel(k, rs, spacing, power);
            let s = generate_symbols(ch.modulation, n_symbols, ch.seed).unwrap();
            shape_and_modulate(&s, &ch, fs, n_symbols * sps).unwrap()
        })
        .collect();
    multiplex(&fields).unwrap()
}

/// Rms width of |a|², with time measured from the window center.
fn rms_width(a: &[Complex64], dt: f64) -> f64 {
    let n = a.len();
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (i, v) in a.iter().enumerate() {
        let t = (i as f64 - (n / 2) as f64) * dt;
        let w = v.norm_sqr();
        m0 += w;
        m1 += w * t;
        m2 += w * t * t;
    }
    (m2 / m0 - (m1 / m0).powi(2)).sqrt()
}

#[test]
fn gaussian_pulse_follows_dispersion_law() {
    let (n, fs) = (8192, 1024.0); // dt ≈ 0.98 ps, window 8 ns
    let dt_ps = 1000.0 / fs;
    let t0 = 10.0;
    let x: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = (i as f64 - (n / 2) as f64) * dt_ps;
            Complex64::new((-t * t / (2.0 * t0 * t0)).exp(), 0.0)
        })
        .collect();
    let field = SampledField::new(x, vec![Complex64::new(0.0, 0.0); n], fs).unwrap();
    let beta2 = beta2_from_dispersion(16.7);
    let w0 = rms_width(&field.x, dt_ps);
    for dz in [1.0, 5.0, 20.0] {
        let out = linear_step(&field, beta2, 0.0, dz).unwrap();
        let expected = w0 * (1.0 + (beta2 * dz / (t0 * t0)).powi(2)).sqrt();
        let got = rms_width(&out.x, dt_ps);
        assert!(((got - expected) / expected).abs() < 1e-6, "dz {dz}: {got} vs {expected}");
    }
    // The sampled input itself matches the continuous rms width T0/√2.
    assert!((w0 - t0 / 2f64.sqrt()).abs() / w0 < 1e-9);
}

#[test]
fn cw_nonlinear_phase_with_loss() {
    let n = 1024;
    let p = dbm_to_watt(10.0);
    let amp = (p / 2.0).sqrt();
    let x = vec![Complex64::new(amp, 0.0); n];
    let field = SampledField::new(x.clone(), x, 256.0).unwrap();
    let span = SpanConfig {
        dispersion_ps_nm_km: 0.0,
        ..SpanConfig::smf(80.0)
    };
    let out = propagate_span(&field, &span).unwrap();
    let leff = effective_length(0.2, 80.0);
    let expected = 8.0 / 9.0 * span.gamma * p * leff;
    for v in out.x.iter().chain(&out.y) {
        let phase = v.arg();
        assert!(((phase - expected) / expected).abs() < 1e-6, "{phase} vs {expected}");
    }
    assert!((out.power() / p - 10f64.powf(-1.6)).abs() < 1e-12);
}

#[test]
fn lossless_propagation_conserves_energy() {
    let field = comb(5, 32.0, 37.5, 5.0, 1024, 512.0);
    let span = lossless(SpanConfig::smf(80.0));
    let out = propagate_span(&field, &span).unwrap();
    let rel = (out.power() - field.power()).abs() / field.power();
    assert!(rel < 1e-10, "relative energy drift {rel:e}");
}

#[test]
fn four_wave_mixing_sidebands_grow_cubically() {
    let (n, fs) = (2048, 256.0);
    let df = fs / n as f64;
    let delta = 10.0;
    let freqs = bin_frequencies(n, fs);
    let sideband = freqs.iter().position(|&f| (f - 3.0 * delta).abs() < df / 2.0).unwrap();
    let span = SpanConfig {
        dispersion_ps_nm_km: 2.0,
        ..SpanConfig::smf(20.0)
    };
    let mut pts = Vec::new();
    for p_dbm in [-6.0, -3.0, 0.0] {
        let a = (dbm_to_watt(p_dbm)).sqrt();
        let x: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                let w = 2.0 * PI * delta * t;
                Complex64::new(0.0, w).exp() * a + Complex64::new(0.0, -w).exp() * a
            })
            .collect();
        let field = SampledField::new(x, vec![Complex64::new(0.0, 0.0); n], fs).unwrap();
        let out = propagate_span(&field, &span).unwrap();
        let spec = out.power_spectrum();
        pts.push((p_dbm / 10.0, spec[sideband].log10()));
    }
    let slope_lo = (pts[1].1 - pts[0].1) / (pts[1].0 - pts[0].0);
    let slope_hi = (pts[2].1 - pts[1].1) / (pts[2].0 - pts[1].0);
    for s in [slope_lo, slope_hi] {
        assert!((s - 3.0).abs() < 0.1, "log-log slope {s}");
    }
}

#[test]
fn linear_span_matches_single_linear_step() {
    let field = comb(3, 32.0, 37.5, 0.0, 1024, 512.0);
    let span = SpanConfig {
        gamma: 0.0,
        ..SpanConfig::smf(80.0)
    };
    let out = propagate_span(&field, &span).unwrap();
    let direct = linear_step(&field, span.beta2(), 0.2, 80.0).unwrap();
    assert!(out.relative_l2_distance(&direct) < 1e-12);
    // Order of linear sub-steps does not matter either.
    let fixed = SpanConfig {
        step_policy: StepPolicy::Fixed { dz_km: 7.0 },
        ..span.clone()
    };
    assert!(propagate_span(&field, &fixed).unwrap().relative_l2_distance(&out) < 1e-12);
}

#[test]
fn halving_step_count_barely_moves_the_field() {
    let field = comb(5, 32.0, 37.5, 0.0, 2048, 512.0);
    let policy = preset_step_policy();
    let coarse = SpanConfig {
        step_policy: policy,
        ..SpanConfig::smf(80.0)
    };
    let fine = SpanConfig {
        step_policy: policy.refined(),
        ..SpanConfig::smf(80.0)
    };
    let coarse = propagate_span(&field, &coarse).unwrap();
    let fine = propagate_span(&field, &fine).unwrap();
    let d = coarse.relative_l2_distance(&fine);
    assert!(d < 1e-4, "relative L2 change {d:e}");
}

#[test]
fn predistortion_is_undone_by_matching_span() {
    let span = SpanConfig {
        gamma: 0.0,
        attenuation_db_per_km: 0.0,
        ..SpanConfig::smf(80.0)
    };
    let mut ch = channel(1, 32.0, 37.5, 0.0);
    let s = generate_symbols(ch.modulation, 1024, 5).unwrap();
    let plain = shape_and_modulate(&s, &ch, 512.0, 1024 * 16).unwrap();
    ch.predistortion = -span.dispersion_ps_nm_km * span.length_km;
    let pre = shape_and_modulate(&s, &ch, 512.0, 1024 * 16).unwrap();
    // Unitary: the magnitude spectrum is untouched.
    let (a, b) = (plain.power_spectrum(), pre.power_spectrum());
    let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    assert!(diff / norm < 1e-12);
    let out = propagate_span(&pre, &span).unwrap();
    assert!(out.relative_l2_distance(&plain) < 1e-9);
    assert!(out.accumulated_dispersion.abs() < 1e-9);
}

#[test]
fn comb_spectral_peaks_sit_on_the_grid() {
    let field = comb(5, 32.0, 37.5, 0.0, 2048, 512.0);
    let freqs = bin_frequencies(field.len(), field.sample_rate);
    let psd = field.power_spectrum();
    for k in -2..=2 {
        let center = k as f64 * 37.5;
        let (lo, hi) = (center - 16.0, center + 16.0);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for (f, p) in freqs.iter().zip(&psd) {
            if *f > lo && *f < hi && *p > best.0 {
                best = (*p, *f);
            }
        }
        // RRC passband is flat, so locate the band by its power-weighted centroid.
        let (mut w, mut m) = (0.0, 0.0);
        for (f, p) in freqs.iter().zip(&psd) {
            if *f > center - 18.75 && *f < center + 18.75 {
                w += p;
                m += p * f;
            }
        }
        assert!((best.1 - center).abs() < 16.0, "argmax {} for channel {k}", best.1);
        assert!((m / w - center).abs() < 0.5, "centroid {} for channel {k}", m / w);
    }
    let pump = demultiplex(&field, &channel(1, 32.0, 37.5, 0.0));
    let psd = pump.power_spectrum();
    let (mut w, mut m) = (0.0, 0.0);
    for (f, p) in freqs.iter().zip(&psd) {
        if f.abs() < 18.75 {
            w += p;
            m += p * f;
        }
    }
    assert!((m / w).abs() < 0.5);
}

#[test]
fn linear_link_is_invertible_and_taps_track_dispersion() {
    let field = comb(3, 32.0, 37.5, 0.0, 1024, 512.0);
    let span = SpanConfig {
        gamma: 0.0,
        ..SpanConfig::smf(80.0)
    };
    let link = LinkConfig::uniform(span.clone(), 10);
    let out = propagate_link(&field, &link).unwrap();
    assert_eq!(out.taps.len(), 10);
    for (i, tap) in out.taps.iter().enumerate() {
        let expected = (i + 1) as f64 * span.dispersion_ps_nm_km * span.length_km;
        assert!((tap.accumulated_dispersion - expected).abs() < 1e-9 * expected);
        assert!((10.0 * (tap.power() / field.power()).log10()).abs() < 0.001);
    }
    let recovered = compensate_dispersion(&out.output);
    assert!(recovered.relative_l2_distance(&field) < 1e-9);
}

#[test]
fn per_channel_power_is_restored_at_every_tap() {
    let field = comb(5, 32.0, 37.5, 3.0, 1024, 512.0);
    let link = LinkConfig::uniform(SpanConfig::smf(80.0), 4);
    assert_eq!(link.amplifier, AmplifierPolicy::ExactPowerRestore);
    let out = propagate_link(&field, &link).unwrap();
    for tap in &out.taps {
        for k in -2..=2 {
            let c = k as f64 * 37.5;
            let launch = field.band_power(c - 18.75, c + 18.75);
            let now = tap.band_power(c - 18.75, c + 18.75);
            let ddb = 10.0 * (now / launch).log10();
            assert!(ddb.abs() < 0.05, "channel {k}: {ddb} dB");
        }
    }
}
