//! Closed-form linear and third-order optical response of the P exciton series.
//!
//! Intensities are in mW/mm², energies in eV, lengths in µm. The third-order
//! susceptibility is in m²/V² and the propagating field in V²/m².

use std::fmt::Write as _;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::blockade::{apply_blockade, BlockadeMode, Chi3Modifier};
use crate::config::{exciton_energy, ExcitonSeriesConfig, SpectralGrid};
use crate::error::{Error, Result};
use crate::scalar::{lit, one_minus_exp_over, Real};
use crate::units;

/// f_{n1} = 32(n²−1)/(3n⁵)·[n(r₀+2a*)/(2(r₀+na*))]⁶.
pub fn oscillator_strength<T: Real>(n: u32, cfg: &ExcitonSeriesConfig<T>) -> Result<T> {
    if n < 1 {
        return Err(Error::Domain("principal quantum number must be >= 1".into()));
    }
    let nn = T::from_u32(n).unwrap();
    let r0 = cfg.coherence_radius;
    let a = cfg.bohr_radius;
    let prefactor = lit::<T>(32.0) * (nn * nn - T::one()) / (lit::<T>(3.0) * nn.powi(5));
    let ratio = nn * (r0 + lit::<T>(2.0) * a) / (lit::<T>(2.0) * (r0 + nn * a));
    Ok(prefactor * ratio.powi(6))
}

/// Linear susceptibility ε_b Σₙ f_{n1}Δ_LT/(E_Tn − E − iΓ_n).
pub fn chi1<T: Real>(energy_ev: T, cfg: &ExcitonSeriesConfig<T>) -> Result<Complex<T>> {
    chi1_modified(energy_ev, cfg, &Chi3Modifier::identity())
}

/// χ⁽¹⁾ with the linewidths seen through a blockade modifier.
pub fn chi1_modified<T: Real>(
    energy_ev: T,
    cfg: &ExcitonSeriesConfig<T>,
    modifier: &Chi3Modifier<'_, T>,
) -> Result<Complex<T>> {
    let mut sum = Complex::new(T::zero(), T::zero());
    for n in cfg.principal_numbers() {
        let f = oscillator_strength(n, cfg)?;
        let et = exciton_energy(n, cfg)?;
        let gamma = modifier.linewidth(n, cfg)?;
        sum += Complex::new(f * cfg.delta_lt, T::zero()) / Complex::new(et - energy_ev, -gamma);
    }
    Ok(sum * cfg.epsilon_b)
}

/// F_{nn′} = (n′²−1)(n²−1)/n′⁵ · (A/n^γ + B/n^β).
///
/// `n` labels the level in the refractive denominator E_Tn² − E² − 2iEΓ_n,
/// `n_prime` the level in the absorptive denominator (E_Tn′ − E)² + Γ_n′².
pub fn coupling_strength<T: Real>(n: u32, n_prime: u32, cfg: &ExcitonSeriesConfig<T>) -> T {
    coupling_outer::<T>(n_prime) * coupling_inner(n, cfg)
}

fn coupling_outer<T: Real>(n_prime: u32) -> T {
    let m = T::from_u32(n_prime).unwrap();
    (m * m - T::one()) / m.powi(5)
}

fn coupling_inner<T: Real>(n: u32, cfg: &ExcitonSeriesConfig<T>) -> T {
    let nn = T::from_u32(n).unwrap();
    (nn * nn - T::one()) * (cfg.a_t / nn.powf(cfg.gamma_exp) + cfg.b_t / nn.powf(cfg.beta_exp))
}

/// Third-order susceptibility [m²/V²]:
/// −χ₀ Σ_{n,n′} F_{nn′}Γ_n′E_Tn / ([(E_Tn′ − E)² + Γ_n′²][E_Tn² − E² − 2iEΓ_n]).
pub fn chi3<T: Real>(energy_ev: T, cfg: &ExcitonSeriesConfig<T>) -> Result<Complex<T>> {
    chi3_modified(energy_ev, cfg, &Chi3Modifier::identity())
}

/// χ⁽³⁾ with blockade modifications applied.
///
/// F factorises into a function of n′ times a function of n, so the double
/// sum is evaluated as a product of two single sums.
pub fn chi3_modified<T: Real>(
    energy_ev: T,
    cfg: &ExcitonSeriesConfig<T>,
    modifier: &Chi3Modifier<'_, T>,
) -> Result<Complex<T>> {
    let e = energy_ev;
    let mut absorptive = T::zero();
    let mut refractive = Complex::new(T::zero(), T::zero());
    for n in cfg.principal_numbers() {
        let et = exciton_energy(n, cfg)?;
        let gamma = modifier.linewidth(n, cfg)?;
        let det = et - e;
        absorptive += coupling_outer::<T>(n) * gamma / (det * det + gamma * gamma);
        let denom = Complex::new(et * et - e * e, -lit::<T>(2.0) * e * gamma);
        let weight = coupling_inner(n, cfg) * et * modifier.term_scale(n, cfg)?;
        refractive += Complex::new(weight, T::zero()) / denom;
    }
    let prefactor = -cfg.chi3_0 * modifier.prefactor_scale(e, cfg)?;
    Ok(refractive * (absorptive * prefactor))
}

/// |2/(1 + √ε_b)|², the amplitude transmission into the crystal squared.
pub fn field_transmission<T: Real>(cfg: &ExcitonSeriesConfig<T>) -> T {
    let t = lit::<T>(2.0) / (T::one() + cfg.epsilon_b.sqrt());
    t * t
}

/// |E_prop|² = 2·|2/(1+√ε_b)|²·ζ·P for a raw drive value P.
pub fn propagating_field_squared<T: Real>(p: T, cfg: &ExcitonSeriesConfig<T>) -> T {
    lit::<T>(2.0) * field_transmission(cfg) * cfg.vacuum_impedance * p
}

/// |E_prop|² [V²/m²] for an intensity in mW/mm², through `field_intensity_scale`.
pub fn field_squared_from_intensity<T: Real>(intensity: T, cfg: &ExcitonSeriesConfig<T>) -> T {
    propagating_field_squared(intensity * cfg.field_intensity_scale, cfg)
}

/// α = (E/ħc)(1/√ε_b)(Im χ⁽¹⁾ + |E_prop|² Im χ⁽³⁾) [1/µm].
pub fn nonlinear_absorption<T: Real>(
    energy_ev: T,
    intensity: T,
    cfg: &ExcitonSeriesConfig<T>,
) -> Result<T> {
    nonlinear_absorption_modified(energy_ev, intensity, cfg, &Chi3Modifier::identity())
}

pub fn nonlinear_absorption_modified<T: Real>(
    energy_ev: T,
    intensity: T,
    cfg: &ExcitonSeriesConfig<T>,
    modifier: &Chi3Modifier<'_, T>,
) -> Result<T> {
    check_intensity(intensity)?;
    let c1 = chi1_modified(energy_ev, cfg, modifier)?;
    let c3 = if intensity > T::zero() {
        chi3_modified(energy_ev, cfg, modifier)?
    } else {
        Complex::new(T::zero(), T::zero())
    };
    let field = field_squared_from_intensity(intensity, cfg);
    Ok(units::wavenumber_per_um(energy_ev) / cfg.epsilon_b.sqrt() * (c1.im + field * c3.im))
}

/// Linear absorption coefficient [1/µm].
pub fn linear_absorption<T: Real>(energy_ev: T, cfg: &ExcitonSeriesConfig<T>) -> Result<T> {
    nonlinear_absorption(energy_ev, T::zero(), cfg)
}

/// Optical density α·L at zero intensity.
pub fn optical_density<T: Real>(energy_ev: T, cfg: &ExcitonSeriesConfig<T>) -> Result<T> {
    Ok(linear_absorption(energy_ev, cfg)? * cfg.crystal_length)
}

/// Average intensity inside the crystal, I·(1 − e^{−L/z₀})·z₀/L with z₀ the
/// linear absorption length.
pub fn average_intensity<T: Real>(
    energy_ev: T,
    input_intensity: T,
    cfg: &ExcitonSeriesConfig<T>,
) -> Result<T> {
    check_intensity(input_intensity)?;
    let od = optical_density(energy_ev, cfg)?;
    Ok(input_intensity * one_minus_exp_over(od))
}

/// n = sqrt(ε_b + χ⁽¹⁾ + |E_prop|²χ⁽³⁾), principal branch, at an average intensity.
pub fn total_index<T: Real>(
    energy_ev: T,
    intensity: T,
    cfg: &ExcitonSeriesConfig<T>,
    modifier: &Chi3Modifier<'_, T>,
) -> Result<Complex<T>> {
    check_intensity(intensity)?;
    let c1 = chi1_modified(energy_ev, cfg, modifier)?;
    let mut eps = c1 + cfg.epsilon_b;
    if intensity > T::zero() {
        let c3 = chi3_modified(energy_ev, cfg, modifier)?;
        eps += c3 * field_squared_from_intensity(intensity, cfg);
    }
    Ok(eps.sqrt())
}

/// Δφ = (E/ħc)·L·Re[n(I) − n(0)] at an average intensity [rad].
///
/// n(0) is the unmodified linear index, so line broadening contributes
/// through χ⁽¹⁾ as well as χ⁽³⁾.
pub fn phase_shift<T: Real>(
    energy_ev: T,
    intensity: T,
    cfg: &ExcitonSeriesConfig<T>,
    modifier: &Chi3Modifier<'_, T>,
) -> Result<T> {
    check_intensity(intensity)?;
    if intensity == T::zero() {
        return Ok(T::zero());
    }
    let n_i = total_index(energy_ev, intensity, cfg, modifier)?;
    let n_0 = total_index(energy_ev, T::zero(), cfg, &Chi3Modifier::identity())?;
    Ok(units::wavenumber_per_um(energy_ev) * cfg.crystal_length * (n_i.re - n_0.re))
}

/// Δφ for an input intensity: the blockade is driven by the input intensity
/// and the field term uses the average intensity inside the crystal.
pub fn kerr_phase_shift<T: Real>(
    energy_ev: T,
    input_intensity: T,
    cfg: &ExcitonSeriesConfig<T>,
    mode: &BlockadeMode<T>,
) -> Result<T> {
    let modifier = apply_blockade(mode, input_intensity)?;
    let avg = average_intensity(energy_ev, input_intensity, cfg)?;
    phase_shift(energy_ev, avg, cfg, &modifier)
}

/// Nonlinear index [mm²/mW] per unit average intensity: the first-order
/// change Re[|E_prop|²χ⁽³⁾/(2n₀)] of the total index, with n₀ = sqrt(ε_b + χ⁽¹⁾).
pub fn n2<T: Real>(energy_ev: T, cfg: &ExcitonSeriesConfig<T>) -> Result<T> {
    let c1 = chi1(energy_ev, cfg)?;
    let c3 = chi3(energy_ev, cfg)?;
    Ok(n2_from(c1, c3, cfg))
}

fn n2_from<T: Real>(c1: Complex<T>, c3: Complex<T>, cfg: &ExcitonSeriesConfig<T>) -> T {
    let n0 = (c1 + cfg.epsilon_b).sqrt();
    let per_intensity = field_squared_from_intensity(T::one(), cfg) / lit::<T>(2.0);
    (c3 * per_intensity / n0).re
}

/// Re χ⁽³⁾/(c ε₀ Re(1 + χ⁽¹⁾)) converted from m²/W to mm²/mW.
pub fn n2_literal<T: Real>(energy_ev: T, cfg: &ExcitonSeriesConfig<T>) -> Result<T> {
    let c1 = chi1(energy_ev, cfg)?;
    let c3 = chi3(energy_ev, cfg)?;
    let denom = lit::<T>(units::SPEED_OF_LIGHT * units::VACUUM_PERMITTIVITY) * (T::one() + c1.re);
    Ok(c3.re / denom * lit(units::MM2_PER_MW_PER_M2_PER_W))
}

fn check_intensity<T: Real>(intensity: T) -> Result<()> {
    if intensity >= T::zero() && intensity.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("intensity must be finite and >= 0, got {intensity}")))
    }
}

/// χ⁽¹⁾ and χ⁽³⁾ sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SusceptibilitySpectrum<T> {
    pub grid: SpectralGrid<T>,
    pub chi1: Vec<Complex<T>>,
    pub chi3: Vec<Complex<T>>,
}

impl<T: Real> SusceptibilitySpectrum<T> {
    pub fn compute(grid: &SpectralGrid<T>, cfg: &ExcitonSeriesConfig<T>) -> Result<Self> {
        let chi1 = grid
            .energies()
            .iter()
            .map(|&e| chi1(e, cfg))
            .collect::<Result<Vec<_>>>()?;
        let chi3 = grid
            .energies()
            .iter()
            .map(|&e| chi3(e, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.clone(),
            chi1,
            chi3,
        })
    }
}

/// Kerr observables sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KerrResponse<T> {
    pub grid: SpectralGrid<T>,
    /// [mm²/mW]
    pub n2: Vec<T>,
    /// Absorption at `probe_intensity` [1/µm].
    pub alpha3: Vec<T>,
    /// Input intensity at which `alpha3` was evaluated [mW/mm²].
    pub probe_intensity: T,
    /// Input intensities of the `phase_shift` columns [mW/mm²].
    pub intensities: Vec<T>,
    /// `phase_shift[i][j]` at grid point i and input intensity j [rad].
    pub phase_shift: Vec<Vec<T>>,
}

/// n₂ and α over a grid, without intensity-resolved phase shifts.
pub fn n2_spectrum<T: Real>(
    grid: &SpectralGrid<T>,
    cfg: &ExcitonSeriesConfig<T>,
) -> Result<KerrResponse<T>> {
    let spec = SusceptibilitySpectrum::compute(grid, cfg)?;
    kerr_response(&spec, cfg, &BlockadeMode::default(), T::zero(), &[])
}

/// n₂, α at `probe_intensity` and Δφ at each input intensity, for every grid point.
pub fn kerr_response<T: Real>(
    spec: &SusceptibilitySpectrum<T>,
    cfg: &ExcitonSeriesConfig<T>,
    mode: &BlockadeMode<T>,
    probe_intensity: T,
    intensities: &[T],
) -> Result<KerrResponse<T>> {
    check_intensity(probe_intensity)?;
    let probe = apply_blockade(mode, probe_intensity)?;
    let energies = spec.grid.energies();
    let mut n2 = Vec::with_capacity(energies.len());
    let mut alpha3 = Vec::with_capacity(energies.len());
    let mut phase = Vec::with_capacity(energies.len());
    for (i, &e) in energies.iter().enumerate() {
        n2.push(n2_from(spec.chi1[i], spec.chi3[i], cfg));
        alpha3.push(if probe_intensity == T::zero() {
            units::wavenumber_per_um(e) / cfg.epsilon_b.sqrt() * spec.chi1[i].im
        } else {
            nonlinear_absorption_modified(e, probe_intensity, cfg, &probe)?
        });
        phase.push(
            intensities
                .iter()
                .map(|&inten| kerr_phase_shift(e, inten, cfg, mode))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(KerrResponse {
        grid: spec.grid.clone(),
        n2,
        alpha3,
        probe_intensity,
        intensities: intensities.to_vec(),
        phase_shift: phase,
    })
}

pub const SPECTRUM_CSV_HEADER: &str =
    "energy_eV,re_chi1,im_chi1,re_chi3,im_chi3,n2_mm2_per_mW,alpha3_per_um";
pub const CHI3_CSV_HEADER: &str = "energy_eV,re_chi3,im_chi3";

/// Spectrum CSV with one row per grid point, LF line endings.
pub fn spectrum_csv<T: Real>(spec: &SusceptibilitySpectrum<T>, kerr: &KerrResponse<T>) -> Result<String> {
    if kerr.grid != spec.grid {
        return Err(Error::GridMismatch("susceptibility and Kerr spectra differ".into()));
    }
    let mut out = String::with_capacity(spec.grid.len() * 120);
    out.push_str(SPECTRUM_CSV_HEADER);
    out.push('\n');
    for (i, e) in spec.grid.energies().iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            e.as_f64(),
            cell(spec.chi1[i].re),
            cell(spec.chi1[i].im),
            cell(spec.chi3[i].re),
            cell(spec.chi3[i].im),
            cell(kerr.n2[i]),
            cell(kerr.alpha3[i]),
        );
    }
    Ok(out)
}

/// CSV value with negative zero written as 0.
fn cell<T: Real>(v: T) -> f64 {
    v.as_f64() + 0.0
}

/// χ⁽³⁾-only CSV.
pub fn chi3_csv<T: Real>(spec: &SusceptibilitySpectrum<T>) -> String {
    let mut out = String::with_capacity(spec.grid.len() * 60);
    out.push_str(CHI3_CSV_HEADER);
    out.push('\n');
    for (i, e) in spec.grid.energies().iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{:e},{:e}",
            e.as_f64(),
            cell(spec.chi3[i].re),
            cell(spec.chi3[i].im)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockade::BlockadeKind;
    use crate::config::{default_config, ConfigFile};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn cfg() -> ExcitonSeriesConfig<f64> {
        default_config(&ConfigFile {
            rydberg_energy: Some(0.092),
            coherence_radius: Some(0.2),
            epsilon_b: Some(7.5),
            delta_lt: Some(1.25e-6),
            linewidth_scale: Some(4e-3),
            ..Default::default()
        })
        .unwrap()
    }

    /// Single resonance at `et` with linewidth `gamma` (extra broadening folded in).
    fn single(n: u32, et: f64, gamma: f64) -> ExcitonSeriesConfig<f64> {
        let mut c = cfg();
        c.n_min = n;
        c.n_max = n;
        c.extra_broadening = 1e-300;
        c.base_linewidths = BTreeMap::from([(n, gamma)]);
        // Ry* such that E_Tn = et.
        let eff = n as f64 - c.quantum_defect;
        c.rydberg_energy = (c.gap_energy - et) * eff * eff;
        c
    }

    #[test]
    fn oscillator_strength_examples() {
        let mut c = cfg();
        assert_eq!(oscillator_strength(1, &c).unwrap(), 0.0);
        c.coherence_radius = 0.0;
        assert!((oscillator_strength(2, &c).unwrap() - 1.0).abs() < 1e-15);
        assert!((oscillator_strength(3, &c).unwrap() - 256.0 / 729.0).abs() < 1e-12);
    }

    #[test]
    fn chi1_single_lorentzian_hand_value() {
        let mut c = single(2, 2.17, 1e-4);
        c.delta_lt = 1e-3;
        c.coherence_radius = 0.0;
        let v = chi1(2.1699, &c).unwrap();
        assert!((v.re - 37.5).abs() < 1e-6 && (v.im - 37.5).abs() < 1e-6, "{v}");
        let on = chi1(2.17, &c).unwrap();
        assert!(on.re.abs() < 1e-9 * on.im);
        assert!((on.im - 7.5 * 1e-3 / 1e-4).abs() < 1e-9);
    }

    #[test]
    fn chi1_tails_vanish() {
        let c = cfg();
        assert!(chi1(1e4, &c).unwrap().norm() < 1e-8);
        assert!(chi1(1e6, &c).unwrap().norm() < 1e-10);
        assert!(chi1(1e-3, &c).unwrap().norm() < 1e-4);
    }

    #[test]
    fn coupling_strength_examples() {
        let c = cfg();
        assert_eq!(coupling_strength(1, 5, &c), 0.0);
        assert_eq!(coupling_strength(5, 1, &c), 0.0);
        let expected = 9.0 / 32.0 * (4.53 / 2f64.powf(1.8) + 3.41 / 2f64.powf(1.62));
        let f22 = coupling_strength(2, 2, &c);
        assert!((f22 - expected).abs() < 1e-14);
        assert!((f22 - 0.678).abs() < 1e-3, "{f22}");
    }

    fn chi3_double_sum(e: f64, c: &ExcitonSeriesConfig<f64>) -> Complex<f64> {
        let mut s = Complex::new(0.0, 0.0);
        for n in c.principal_numbers() {
            for m in c.principal_numbers() {
                let (nf, mf) = (n as f64, m as f64);
                let f = (mf * mf - 1.0) * (nf * nf - 1.0) / mf.powi(5)
                    * (c.a_t / nf.powf(c.gamma_exp) + c.b_t / nf.powf(c.beta_exp));
                let etn = exciton_energy(n, c).unwrap();
                let etm = exciton_energy(m, c).unwrap();
                let gn = c.linewidth(n).unwrap();
                let gm = c.linewidth(m).unwrap();
                s += f * gm * etn
                    / (((etm - e).powi(2) + gm * gm)
                        * Complex::new(etn * etn - e * e, -2.0 * e * gn));
            }
        }
        -s * c.chi3_0
    }

    #[test]
    fn chi3_matches_explicit_double_sum() {
        let c = cfg();
        for &e in &[2.10, 2.1525, 2.16786, 2.1702, 2.1718] {
            let fast = chi3(e, &c).unwrap();
            let slow = chi3_double_sum(e, &c);
            assert!((fast - slow).norm() <= 1e-12 * slow.norm(), "{e}: {fast} vs {slow}");
        }
    }

    #[test]
    fn chi3_single_pair_against_scalar_evaluation() {
        let c = single(2, 2.15, 2e-4);
        let e = 2.1503;
        let f = coupling_strength(2, 2, &c);
        let (et, g) = (2.15_f64, 2e-4_f64);
        // Real and imaginary parts of 1/(a − ib) written out by hand.
        let a = et * et - e * e;
        let b = 2.0 * e * g;
        let lorentz = g / ((et - e).powi(2) + g * g);
        let scale = -c.chi3_0 * f * et * lorentz / (a * a + b * b);
        let v = chi3(e, &c).unwrap();
        assert!((v.re - scale * a).abs() < 1e-10 * scale.abs() * a.abs());
        assert!((v.im - scale * b).abs() < 1e-10 * (scale * b).abs());
    }

    #[test]
    fn chi3_trivial_limits() {
        let mut c = cfg();
        c.chi3_0 = 0.0;
        assert_eq!(chi3(2.16, &c).unwrap(), Complex::new(0.0, -0.0) * 0.0);
        let mut c = single(3, 2.16, 1e-4);
        let v1 = chi3(2.1601, &c).unwrap().norm();
        c.base_linewidths.insert(3, 1e6);
        let v2 = chi3(2.1601, &c).unwrap().norm();
        assert!(v2 < 1e-12 * v1);
    }

    #[test]
    fn propagating_field_examples() {
        let mut c = cfg();
        assert_eq!(propagating_field_squared(0.0, &c), 0.0);
        c.epsilon_b = 1.0;
        assert!((propagating_field_squared(1.0, &c) - 2.0 * 376.73).abs() < 1e-12);
        c.epsilon_b = 9.0;
        assert!((propagating_field_squared(1.0, &c) - 188.365).abs() < 1e-9);
    }

    #[test]
    fn absorption_reduces_to_linear_and_bleaches() {
        let c = cfg();
        let e10 = exciton_energy(10, &c).unwrap();
        let lin = nonlinear_absorption(e10, 0.0, &c).unwrap();
        let expect = units::wavenumber_per_um(e10) / 7.5f64.sqrt() * chi1(e10, &c).unwrap().im;
        assert!((lin - expect).abs() < 1e-15);
        assert!(chi3(e10, &c).unwrap().im < 0.0);
        let sat = BlockadeMode::default().with_kind(BlockadeKind::Saturable);
        let mut prev = lin;
        for p in [0.1, 0.3, 1.0] {
            let m = apply_blockade(&sat, p).unwrap();
            let a = nonlinear_absorption_modified(e10, p, &c, &m).unwrap();
            assert!(a < prev);
            prev = a;
        }
        let mut c0 = cfg();
        c0.delta_lt = 1e-300;
        c0.chi3_0 = 0.0;
        assert!(nonlinear_absorption(e10, 1.0, &c0).unwrap().abs() < 1e-200);
    }

    #[test]
    fn total_index_limits() {
        let mut c = cfg();
        let id = Chi3Modifier::identity();
        let e = 2.16;
        let n0 = total_index(e, 0.0, &c, &id).unwrap();
        assert!((n0 - (chi1(e, &c).unwrap() + 7.5).sqrt()).norm() < 1e-15);
        assert!(n0.re > 0.0);
        c.chi3_0 *= 1e3;
        assert_eq!(total_index(e, 0.0, &c, &id).unwrap(), n0);
        c.delta_lt = 1e-300;
        c.chi3_0 = 0.0;
        assert!((total_index(e, 3.0, &c, &id).unwrap().re - 7.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn total_index_first_order_taylor() {
        let c = cfg();
        let id = Chi3Modifier::identity();
        let e = exciton_energy(8, &c).unwrap() + 1e-5;
        let i = 1e-4;
        let n0 = total_index(e, 0.0, &c, &id).unwrap();
        let dn = total_index(e, i, &c, &id).unwrap() - n0;
        let approx = field_squared_from_intensity(i, &c) * chi3(e, &c).unwrap() / (2.0 * n0);
        assert!((dn.re - approx.re).abs() < 1e-3 * approx.re.abs());
    }

    #[test]
    fn phase_shift_slope_matches_n2() {
        let c = cfg();
        let id = Chi3Modifier::identity();
        for n in [5u32, 8, 10] {
            let et = exciton_energy(n, &c).unwrap();
            let g = c.linewidth(n).unwrap();
            for det in [-0.7, 0.6] {
                let e = et + det * g;
                let i = 1e-5;
                let slope = phase_shift(e, i, &c, &id).unwrap() / i;
                let lin = units::wavenumber_per_um(e) * c.crystal_length * n2(e, &c).unwrap();
                assert!((slope / lin - 1.0).abs() < 0.01, "n={n} det={det}: {slope} vs {lin}");
            }
        }
    }

    #[test]
    fn phase_shift_changes_sign_across_resonance() {
        let c = cfg();
        let id = Chi3Modifier::identity();
        assert_eq!(phase_shift(2.16, 0.0, &c, &id).unwrap(), 0.0);
        let et = exciton_energy(6, &c).unwrap();
        let g = c.linewidth(6).unwrap();
        let red = phase_shift(et - 2.0 * g, 0.01, &c, &id).unwrap();
        let blue = phase_shift(et + 2.0 * g, 0.01, &c, &id).unwrap();
        assert!(red * blue < 0.0, "{red} {blue}");
    }

    #[test]
    fn n2_literal_is_finite_and_tracks_chi3_sign() {
        let c = cfg();
        for &e in &[2.15, 2.16, 2.17] {
            let lit = n2_literal(e, &c).unwrap();
            assert!(lit.is_finite());
            assert_eq!(lit.signum(), chi3(e, &c).unwrap().re.signum());
        }
    }

    #[test]
    fn n2_vanishes_without_chi3() {
        let mut c = cfg();
        c.chi3_0 = 0.0;
        let g = SpectralGrid::linspace(2.15, 2.17, 11).unwrap();
        assert!(n2_spectrum(&g, &c).unwrap().n2.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn csv_layout() {
        let c = cfg();
        let g = SpectralGrid::linspace(2.15, 2.17, 5).unwrap();
        let s = SusceptibilitySpectrum::compute(&g, &c).unwrap();
        let k = n2_spectrum(&g, &c).unwrap();
        let csv = spectrum_csv(&s, &k).unwrap();
        let lines: Vec<_> = csv.split('\n').collect();
        assert_eq!(lines[0], SPECTRUM_CSV_HEADER);
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[6], "");
        assert!(lines[1..6].iter().all(|l| l.split(',').count() == 7));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn generic_over_f32() {
        let c64 = cfg();
        let text = c64.to_json_string().unwrap();
        let c32 = ExcitonSeriesConfig::<f32>::from_json_str(&text).unwrap().config;
        let e = exciton_energy(4, &c64).unwrap();
        let v64 = chi1(e, &c64).unwrap();
        let v32 = chi1(e as f32, &c32).unwrap();
        assert!(((v32.im as f64) / v64.im - 1.0).abs() < 1e-2);
    }

    proptest! {
        #[test]
        fn chi1_passive(e in 2.0f64..2.2) {
            prop_assert!(chi1(e, &cfg()).unwrap().im > 0.0);
        }

        #[test]
        fn chi1_linear_over_disjoint_ranges(e in 2.10f64..2.18, split in 3u32..14) {
            let full = cfg();
            let mut lo = full.clone();
            lo.n_max = split - 1;
            let mut hi = full.clone();
            hi.n_min = split;
            let sum = chi1(e, &lo).unwrap() + chi1(e, &hi).unwrap();
            let whole = chi1(e, &full).unwrap();
            prop_assert!((sum - whole).norm() <= 1e-12 * whole.norm());
        }

        #[test]
        fn single_lorentzian_symmetry(d in 1e-7f64..1e-2) {
            let c = single(4, 2.16, 3e-5);
            let p = chi1(2.16 + d, &c).unwrap();
            let m = chi1(2.16 - d, &c).unwrap();
            let scale = chi1(2.16, &c).unwrap().im;
            prop_assert!((p.re + m.re).abs() <= 1e-12 * scale);
            prop_assert!((p.im - m.im).abs() <= 1e-12 * scale);
        }

        #[test]
        fn phase_shift_monotone_at_fixed_detuning(det in -3.0f64..3.0, n in 4u32..12) {
            let c = cfg();
            let et = exciton_energy(n, &c).unwrap();
            let e = et + det * c.linewidth(n).unwrap();
            let sat = BlockadeMode::default().with_kind(BlockadeKind::Saturable);
            let isat = sat.isat(n, c.quantum_defect).unwrap();
            // Below saturation, and away from the zero crossing of n₂ where the
            // second-order term −x²/(8n₀³) of the index expansion takes over.
            let n0 = total_index(e, 0.0, &c, &Chi3Modifier::identity()).unwrap();
            let x = chi3(e, &c).unwrap() * field_squared_from_intensity(isat / 10.0, &c);
            let first = (x / (2.0 * n0)).re.abs();
            let second = (x * x / (8.0 * n0 * n0 * n0)).norm();
            prop_assume!(first > 10.0 * second);
            let mut prev = 0.0f64;
            for k in 1..=20 {
                let i = isat * k as f64 / 200.0;
                let v = kerr_phase_shift(e, i, &c, &sat).unwrap();
                prop_assert!(v.abs() >= prev.abs() * (1.0 - 1e-12));
                if k > 1 { prop_assert!(v * prev >= 0.0); }
                prev = v;
            }
        }
    }

    #[test]
    fn kramers_kronig_single_lorentzian() {
        // Re χ(E) = (1/π) P∫ Im χ(E')/(E' − E) dE' for one Lorentzian line.
        let c = single(3, 2.16, 1e-4);
        let (lo, hi, m) = (2.16 - 0.5, 2.16 + 0.5, 400_001);
        let h = (hi - lo) / (m - 1) as f64;
        let im: Vec<f64> = (0..m).map(|k| chi1(lo + h * k as f64, &c).unwrap().im).collect();
        for &det in &[-3e-4, -1e-4, 5e-5, 2e-4] {
            let e = 2.16 + det + h / 2.0;
            let mut acc = 0.0;
            for (k, v) in im.iter().enumerate() {
                let ep = lo + h * k as f64;
                acc += v / (ep - e);
            }
            let hilbert = acc * h / std::f64::consts::PI;
            let re = chi1(e, &c).unwrap().re;
            let peak = chi1(2.16, &c).unwrap().im;
            assert!((hilbert - re).abs() <= 1e-3 * peak, "{det}: {hilbert} vs {re}");
        }
    }
}
