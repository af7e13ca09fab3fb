//! Physical constants and unit conversions.
//!
//! Internal conventions: energies in eV, intensities in mW/mm², crystal
//! lengths in µm, transverse lengths in µm, wavelengths in nm.

use crate::scalar::{lit, Real};

/// ħc in eV·µm.
pub const HBAR_C_EV_UM: f64 = 0.197_326_980_4;
/// ħc in eV·nm.
pub const HBAR_C_EV_NM: f64 = 197.326_980_4;
/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity in F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// 1 mW/mm² expressed in W/m².
pub const W_PER_M2_PER_MW_PER_MM2: f64 = 1.0e3;
/// 1 m²/W expressed in mm²/mW.
pub const MM2_PER_MW_PER_M2_PER_W: f64 = 1.0e3;

/// Vacuum wavenumber ω/c in 1/µm for a photon energy in eV.
#[inline]
pub fn wavenumber_per_um<T: Real>(energy_ev: T) -> T {
    energy_ev / lit(HBAR_C_EV_UM)
}

/// Vacuum wavelength in nm for a photon energy in eV.
#[inline]
pub fn wavelength_nm<T: Real>(energy_ev: T) -> T {
    lit::<T>(2.0 * std::f64::consts::PI * HBAR_C_EV_NM) / energy_ev
}
