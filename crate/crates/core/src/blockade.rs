//! Rydberg-blockade saturation of the Kerr response.
//!
//! Two mechanisms are modelled: blockade-induced line broadening
//! Γ' = Γ + c·n⁴·P, and saturation of the exciton density, which scales the
//! third-order response by 1/(1 + I/I_sat) with I_sat(n) = A·(n − δ)^b.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{effective_quantum_number, published, ExcitonSeriesConfig};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Default broadening constant, µeV per mW/mm² per n⁴.
pub const DEFAULT_BROADENING_CONSTANT: f64 = 2.1e-2;
/// Energy of one unit of the broadening constant times n⁴·P [eV].
pub const BROADENING_UNIT_EV: f64 = 1e-6;
/// Default exponent of the saturation-intensity power law.
pub const DEFAULT_ISAT_EXPONENT: f64 = -7.0;
/// I_sat at n = 5 used to fix the default power-law amplitude [mW/mm²].
pub const DEFAULT_ISAT_AT_N5: f64 = 100.0;

pub(crate) const KNOWN_FIELDS: &[&str] = &[
    "mode",
    "broadening_constant",
    "isat_amplitude",
    "isat_exponent",
    "isat_per_level",
    "saturation_target",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockadeKind {
    #[default]
    None,
    Broadening,
    Saturable,
    /// Broadening and saturation applied together. Experimental.
    Combined,
}

impl BlockadeKind {
    pub fn broadens(self) -> bool {
        matches!(self, Self::Broadening | Self::Combined)
    }

    pub fn saturates(self) -> bool {
        matches!(self, Self::Saturable | Self::Combined)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Broadening => "broadening",
            Self::Saturable => "saturable",
            Self::Combined => "combined",
        }
    }
}

impl FromStr for BlockadeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "broadening" => Ok(Self::Broadening),
            "saturable" => Ok(Self::Saturable),
            "combined" => Ok(Self::Combined),
            _ => Err(Error::UnknownBlockadeMode(s.to_string())),
        }
    }
}

impl fmt::Display for BlockadeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the saturation factor enters the third-order susceptibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaturationTarget {
    /// Scale χ₀⁽³⁾ by 1/(1 + I/I_sat(E)), with I_sat evaluated at the
    /// effective principal number of the photon energy.
    #[default]
    Chi3Prefactor,
    /// Scale each coupling term F_{nn′} by 1/(1 + I/I_sat(n)).
    OscillatorStrengths,
}

/// Source of the per-level saturation intensity.
#[derive(Debug, Clone, PartialEq)]
pub enum SaturationScale<T> {
    /// I_sat(n) = amplitude·(n − δ)^exponent [mW/mm²].
    PowerLaw { amplitude: T, exponent: T },
    /// Explicit I_sat per n [mW/mm²]; levels in between use the nearest entry.
    PerLevel(BTreeMap<u32, T>),
}

/// Validated blockade settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "BlockadeFile<T>", try_from = "BlockadeFile<T>")]
#[serde(bound = "T: Real")]
pub struct BlockadeMode<T> {
    pub kind: BlockadeKind,
    /// c in Γ' = Γ + c·n⁴·P, in µeV per mW/mm².
    pub broadening_constant: T,
    pub saturation: SaturationScale<T>,
    pub target: SaturationTarget,
}

/// Blockade section of the configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct BlockadeFile<T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub broadening_constant: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isat_amplitude: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isat_exponent: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isat_per_level: Option<BTreeMap<u32, T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saturation_target: Option<SaturationTarget>,
}

impl<T: Real> BlockadeFile<T> {
    /// Fills defaults. The default amplitude puts I_sat(5) at 100 mW/mm² for
    /// the given quantum defect.
    pub fn resolve(&self, quantum_defect: T) -> Result<BlockadeMode<T>> {
        let kind = match &self.mode {
            Some(m) => m.parse()?,
            None => BlockadeKind::None,
        };
        let exponent = self.isat_exponent.unwrap_or_else(|| lit(DEFAULT_ISAT_EXPONENT));
        let saturation = match &self.isat_per_level {
            Some(map) => SaturationScale::PerLevel(map.clone()),
            None => SaturationScale::PowerLaw {
                amplitude: self.isat_amplitude.unwrap_or_else(|| {
                    lit::<T>(DEFAULT_ISAT_AT_N5) / (lit::<T>(5.0) - quantum_defect).powf(exponent)
                }),
                exponent,
            },
        };
        let mode = BlockadeMode {
            kind,
            broadening_constant: self
                .broadening_constant
                .unwrap_or_else(|| lit(DEFAULT_BROADENING_CONSTANT)),
            saturation,
            target: self.saturation_target.unwrap_or_default(),
        };
        mode.validate()?;
        Ok(mode)
    }
}

impl<T: Real> From<BlockadeMode<T>> for BlockadeFile<T> {
    fn from(m: BlockadeMode<T>) -> Self {
        let (isat_amplitude, isat_exponent, isat_per_level) = match m.saturation {
            SaturationScale::PowerLaw {
                amplitude,
                exponent,
            } => (Some(amplitude), Some(exponent), None),
            SaturationScale::PerLevel(map) => (None, None, Some(map)),
        };
        BlockadeFile {
            mode: Some(m.kind.as_str().to_string()),
            broadening_constant: Some(m.broadening_constant),
            isat_amplitude,
            isat_exponent,
            isat_per_level,
            saturation_target: Some(m.target),
        }
    }
}

impl<T: Real> TryFrom<BlockadeFile<T>> for BlockadeMode<T> {
    type Error = Error;

    fn try_from(f: BlockadeFile<T>) -> Result<Self> {
        f.resolve(lit(published::QUANTUM_DEFECT_P))
    }
}

impl<T: Real> Default for BlockadeMode<T> {
    fn default() -> Self {
        BlockadeFile::default()
            .resolve(lit(published::QUANTUM_DEFECT_P))
            .expect("default blockade settings are valid")
    }
}

impl<T: Real> BlockadeMode<T> {
    pub fn with_kind(&self, kind: BlockadeKind) -> Self {
        Self {
            kind,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.broadening_constant >= T::zero() && self.broadening_constant.is_finite()) {
            return Err(Error::invalid(
                "blockade.broadening_constant",
                "must be finite and >= 0",
            ));
        }
        match &self.saturation {
            SaturationScale::PowerLaw {
                amplitude,
                exponent,
            } => {
                if !(*amplitude > T::zero() && amplitude.is_finite()) {
                    return Err(Error::invalid("blockade.isat_amplitude", "must be finite and > 0"));
                }
                if !exponent.is_finite() {
                    return Err(Error::invalid("blockade.isat_exponent", "must be finite"));
                }
            }
            SaturationScale::PerLevel(map) => {
                if map.is_empty() {
                    return Err(Error::invalid("blockade.isat_per_level", "must not be empty"));
                }
                if map.values().any(|v| !(*v > T::zero() && v.is_finite())) {
                    return Err(Error::invalid(
                        "blockade.isat_per_level",
                        "every saturation intensity must be finite and > 0",
                    ));
                }
            }
        }
        Ok(())
    }

    /// I_sat for level n [mW/mm²].
    pub fn isat(&self, n: u32, quantum_defect: T) -> Result<T> {
        self.isat_continuous(T::from_u32(n).unwrap(), quantum_defect)
    }

    fn isat_continuous(&self, n: T, quantum_defect: T) -> Result<T> {
        match &self.saturation {
            SaturationScale::PowerLaw {
                amplitude,
                exponent,
            } => powerlaw_isat(n, *amplitude, *exponent, quantum_defect),
            SaturationScale::PerLevel(map) => {
                let target = n.round().to_u32().unwrap_or(0);
                map.iter()
                    .min_by_key(|(k, _)| k.abs_diff(target))
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Error::Domain("no saturation intensities configured".into()))
            }
        }
    }
}

fn powerlaw_isat<T: Real>(n: T, amplitude: T, exponent: T, delta: T) -> Result<T> {
    let eff = n - delta;
    if !(eff > T::zero()) {
        return Err(Error::Domain(format!("n − δ must be positive, got {eff}")));
    }
    Ok(amplitude * eff.powf(exponent))
}

/// Γ_n + c·n⁴·P [eV], with c in µeV per mW/mm² and P in mW/mm².
pub fn broadened_linewidth<T: Real>(
    n: u32,
    intensity: T,
    cfg: &ExcitonSeriesConfig<T>,
    mode: &BlockadeMode<T>,
) -> Result<T> {
    if intensity < T::zero() {
        return Err(Error::Domain("intensity must be >= 0".into()));
    }
    Ok(cfg.linewidth(n)? + broadening_increment(n, intensity, mode.broadening_constant))
}

fn broadening_increment<T: Real>(n: u32, intensity: T, constant: T) -> T {
    let n = T::from_u32(n).unwrap();
    constant * n.powi(4) * intensity * lit(BROADENING_UNIT_EV)
}

/// 1/(1 + I/I_sat).
pub fn saturable_scale<T: Real>(intensity: T, isat: T) -> Result<T> {
    if !(isat > T::zero()) {
        return Err(Error::Domain(format!("saturation intensity must be > 0, got {isat}")));
    }
    if intensity < T::zero() {
        return Err(Error::Domain("intensity must be >= 0".into()));
    }
    Ok(T::one() / (T::one() + intensity / isat))
}

/// I_sat(n) = A·(n − δ)⁻⁷.
pub fn predict_isat<T: Real>(n: u32, amplitude: T, quantum_defect: T) -> Result<T> {
    powerlaw_isat(
        T::from_u32(n).unwrap(),
        amplitude,
        lit(DEFAULT_ISAT_EXPONENT),
        quantum_defect,
    )
}

/// I_sat at photon energy E, using the effective principal number of E
/// clamped to the configured series.
pub fn isat_at_energy<T: Real>(
    energy_ev: T,
    cfg: &ExcitonSeriesConfig<T>,
    mode: &BlockadeMode<T>,
) -> Result<T> {
    let lo = T::from_u32(cfg.n_min).unwrap();
    let hi = T::from_u32(cfg.n_max).unwrap();
    let n = effective_quantum_number(energy_ev, cfg).max(lo).min(hi);
    mode.isat_continuous(n, cfg.quantum_defect)
}

/// Intensity-dependent modification of the susceptibilities for one drive intensity.
#[derive(Debug, Clone, Copy)]
pub struct Chi3Modifier<'a, T> {
    mode: Option<&'a BlockadeMode<T>>,
    drive: T,
}

impl<'a, T: Real> Chi3Modifier<'a, T> {
    /// No modification.
    pub fn identity() -> Self {
        Self {
            mode: None,
            drive: T::zero(),
        }
    }

    pub fn drive_intensity(&self) -> T {
        self.drive
    }

    fn active(&self) -> Option<&'a BlockadeMode<T>> {
        self.mode.filter(|m| m.kind != BlockadeKind::None)
    }

    /// Γ_n seen by the susceptibilities [eV].
    pub fn linewidth(&self, n: u32, cfg: &ExcitonSeriesConfig<T>) -> Result<T> {
        let base = cfg.linewidth(n)?;
        Ok(match self.active() {
            Some(m) if m.kind.broadens() => {
                base + broadening_increment(n, self.drive, m.broadening_constant)
            }
            _ => base,
        })
    }

    /// Factor applied to χ₀⁽³⁾ at photon energy E.
    pub fn prefactor_scale(&self, energy_ev: T, cfg: &ExcitonSeriesConfig<T>) -> Result<T> {
        match self.active() {
            Some(m) if m.kind.saturates() && m.target == SaturationTarget::Chi3Prefactor => {
                saturable_scale(self.drive, isat_at_energy(energy_ev, cfg, m)?)
            }
            _ => Ok(T::one()),
        }
    }

    /// Factor applied to every coupling term whose refractive denominator belongs to level n.
    pub fn term_scale(&self, n: u32, cfg: &ExcitonSeriesConfig<T>) -> Result<T> {
        match self.active() {
            Some(m) if m.kind.saturates() && m.target == SaturationTarget::OscillatorStrengths => {
                saturable_scale(self.drive, m.isat(n, cfg.quantum_defect)?)
            }
            _ => Ok(T::one()),
        }
    }
}

/// Builds the susceptibility modifier for `mode` at the given drive intensity [mW/mm²].
pub fn apply_blockade<T: Real>(mode: &BlockadeMode<T>, drive_intensity: T) -> Result<Chi3Modifier<'_, T>> {
    if !(drive_intensity >= T::zero()) {
        return Err(Error::Domain("drive intensity must be >= 0".into()));
    }
    mode.validate()?;
    Ok(Chi3Modifier {
        mode: Some(mode),
        drive: drive_intensity,
    })
}
