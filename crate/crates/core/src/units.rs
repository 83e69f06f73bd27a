//! Unit conventions and conversions.
//!
//! Internally the crate works in: GHz for frequency, ns for time, km for
//! distance, W for power, ps/nm for accumulated dispersion, ps²/km for β2 and
//! 1/(W·km) for γ. Conversions to other units happen only at the edges.

/// Speed of light in vacuum, nm/ps.
pub const SPEED_OF_LIGHT_NM_PER_PS: f64 = 299_792.458;

/// Reference carrier wavelength for dispersion conversions, nm.
pub const CARRIER_WAVELENGTH_NM: f64 = 1550.0;

/// Group-velocity dispersion β2 (ps²/km) for a dispersion parameter D (ps/(nm·km)),
/// evaluated at the 1550 nm carrier: β2 = −D λ² / (2π c).
pub fn beta2_from_dispersion(d_ps_nm_km: f64) -> f64 {
    -d_ps_nm_km * CARRIER_WAVELENGTH_NM * CARRIER_WAVELENGTH_NM
        / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_NM_PER_PS)
}

/// Attenuation in dB/km to the natural-units field-power coefficient α (1/km).
pub fn alpha_linear(alpha_db_per_km: f64) -> f64 {
    alpha_db_per_km * std::f64::consts::LN_10 / 10.0
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * (watt / 1e-3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Spectral phase coefficient (rad per GHz²) of an accumulated dispersion in ps/nm.
///
/// A field that has accumulated `acc` ps/nm carries the spectral phase
/// `-π λ² acc f² / c`, which is the same operator the fiber applies through
/// β2: `(β2 z / 2) ω²` with `β2 z = -acc λ² / (2π c)`.
pub(crate) fn dispersion_phase_per_ghz2(acc_ps_per_nm: f64) -> f64 {
    // λ²/c in ps·nm, f in GHz = 1e-3 THz = 1e-3 / ps.
    -std::f64::consts::PI * CARRIER_WAVELENGTH_NM * CARRIER_WAVELENGTH_NM * acc_ps_per_nm
        / SPEED_OF_LIGHT_NM_PER_PS
        * 1e-6
}
