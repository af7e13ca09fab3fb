//! Exciton-series parameters, spectral grids and the JSON configuration file.
//!
//! The published values (gap energy, quantum defect, Bohr radius, χ⁽³⁾
//! prefactor and its temperature coefficients, crystal length, extra line
//! broadening) are built in. The Rydberg energy, coherence radius, background
//! dielectric constant, longitudinal-transverse splitting and the linewidths
//! have no published values and must come from the configuration file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::blockade::{BlockadeFile, BlockadeMode};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::units;

/// Built-in values for every parameter that has a published number.
pub mod published {
    pub const GAP_ENERGY_EV: f64 = 2.1721;
    pub const QUANTUM_DEFECT_P: f64 = 0.34;
    pub const BOHR_RADIUS_NM: f64 = 1.1;
    pub const EXTRA_BROADENING_EV: f64 = 21e-6;
    pub const CHI3_0_M2_PER_V2: f64 = 0.6e-11;
    pub const A_4K: f64 = 4.53;
    pub const B_4K: f64 = 3.41;
    pub const GAMMA_EXP: f64 = 1.8;
    pub const BETA_EXP: f64 = 1.62;
    pub const CRYSTAL_LENGTH_UM: f64 = 50.0;
    pub const VACUUM_IMPEDANCE_OHM: f64 = 376.73;
    pub const N_MIN: u32 = 2;
    pub const N_MAX: u32 = 14;
}

/// Fully validated parameter set of the yellow P exciton series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct ExcitonSeriesConfig<T> {
    /// Band gap [eV].
    pub gap_energy: T,
    /// Effective Rydberg energy of the series [eV].
    pub rydberg_energy: T,
    pub quantum_defect: T,
    /// Exciton Bohr radius [nm].
    pub bohr_radius: T,
    /// Coherence radius r₀ [nm].
    pub coherence_radius: T,
    pub epsilon_b: T,
    /// Longitudinal-transverse splitting [eV].
    pub delta_lt: T,
    /// Γ₀ of the default Γ_n = Γ₀ n⁻³ law [eV]; absent when every Γ_n was given explicitly.
    #[serde(default)]
    pub linewidth_scale: Option<T>,
    /// Γ_n before the extra broadening [eV], for every n in `n_min..=n_max`.
    pub base_linewidths: BTreeMap<u32, T>,
    /// Constant added to every Γ_n [eV].
    pub extra_broadening: T,
    pub n_min: u32,
    pub n_max: u32,
    /// χ₀⁽³⁾ [m²/V²].
    pub chi3_0: T,
    #[serde(rename = "A_T")]
    pub a_t: T,
    #[serde(rename = "B_T")]
    pub b_t: T,
    pub gamma_exp: T,
    pub beta_exp: T,
    /// Crystal thickness L [µm].
    pub crystal_length: T,
    /// Probe vacuum wavelength [nm]; derived from the photon energy when absent.
    #[serde(default)]
    pub wavelength: Option<T>,
    /// ζ [Ω].
    pub vacuum_impedance: T,
    /// Numeric factor converting an intensity in mW/mm² into the `P` of the
    /// propagating-field relation. 1.0 reads P numerically in mW/mm²; 1e3
    /// converts it to W/m².
    pub field_intensity_scale: T,
    pub blockade: BlockadeMode<T>,
}

/// Partial configuration as read from JSON; every field optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct ConfigFile<T> {
    pub gap_energy: Option<T>,
    pub rydberg_energy: Option<T>,
    pub quantum_defect: Option<T>,
    pub bohr_radius: Option<T>,
    pub coherence_radius: Option<T>,
    pub epsilon_b: Option<T>,
    pub delta_lt: Option<T>,
    pub linewidth_scale: Option<T>,
    pub base_linewidths: Option<BTreeMap<u32, T>>,
    pub extra_broadening: Option<T>,
    pub n_min: Option<u32>,
    pub n_max: Option<u32>,
    pub chi3_0: Option<T>,
    #[serde(rename = "A_T")]
    pub a_t: Option<T>,
    #[serde(rename = "B_T")]
    pub b_t: Option<T>,
    pub gamma_exp: Option<T>,
    pub beta_exp: Option<T>,
    pub crystal_length: Option<T>,
    pub wavelength: Option<T>,
    pub vacuum_impedance: Option<T>,
    pub field_intensity_scale: Option<T>,
    pub blockade: Option<BlockadeFile<T>>,
}

const KNOWN_FIELDS: &[&str] = &[
    "gap_energy",
    "rydberg_energy",
    "quantum_defect",
    "bohr_radius",
    "coherence_radius",
    "epsilon_b",
    "delta_lt",
    "linewidth_scale",
    "base_linewidths",
    "extra_broadening",
    "n_min",
    "n_max",
    "chi3_0",
    "A_T",
    "B_T",
    "gamma_exp",
    "beta_exp",
    "crystal_length",
    "wavelength",
    "vacuum_impedance",
    "field_intensity_scale",
    "blockade",
];

/// A configuration together with the non-fatal diagnostics produced while loading it.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub config: ExcitonSeriesConfig<T>,
    pub warnings: Vec<String>,
}

/// Fills every published value the file leaves out and validates the result.
pub fn default_config<T: Real>(file: &ConfigFile<T>) -> Result<ExcitonSeriesConfig<T>> {
    let or = |v: Option<T>, d: f64| v.unwrap_or_else(|| lit(d));
    let n_min = file.n_min.unwrap_or(published::N_MIN);
    let n_max = file.n_max.unwrap_or(published::N_MAX);
    let quantum_defect = or(file.quantum_defect, published::QUANTUM_DEFECT_P);

    let rydberg_energy = file.rydberg_energy.ok_or(Error::MissingField("rydberg_energy"))?;
    let coherence_radius = file
        .coherence_radius
        .ok_or(Error::MissingField("coherence_radius"))?;
    let epsilon_b = file.epsilon_b.ok_or(Error::MissingField("epsilon_b"))?;
    let delta_lt = file.delta_lt.ok_or(Error::MissingField("delta_lt"))?;

    let mut base_linewidths = file.base_linewidths.clone().unwrap_or_default();
    if n_max >= n_min {
        for n in n_min..=n_max {
            if base_linewidths.contains_key(&n) {
                continue;
            }
            let scale = file
                .linewidth_scale
                .ok_or(Error::MissingField("linewidth_scale"))?;
            let nn = T::from_u32(n).unwrap();
            base_linewidths.insert(n, scale / (nn * nn * nn));
        }
    }

    let blockade = match &file.blockade {
        Some(b) => b.resolve(quantum_defect)?,
        None => BlockadeFile::default().resolve(quantum_defect)?,
    };

    let cfg = ExcitonSeriesConfig {
        gap_energy: or(file.gap_energy, published::GAP_ENERGY_EV),
        rydberg_energy,
        quantum_defect,
        bohr_radius: or(file.bohr_radius, published::BOHR_RADIUS_NM),
        coherence_radius,
        epsilon_b,
        delta_lt,
        linewidth_scale: file.linewidth_scale,
        base_linewidths,
        extra_broadening: or(file.extra_broadening, published::EXTRA_BROADENING_EV),
        n_min,
        n_max,
        chi3_0: or(file.chi3_0, published::CHI3_0_M2_PER_V2),
        a_t: or(file.a_t, published::A_4K),
        b_t: or(file.b_t, published::B_4K),
        gamma_exp: or(file.gamma_exp, published::GAMMA_EXP),
        beta_exp: or(file.beta_exp, published::BETA_EXP),
        crystal_length: or(file.crystal_length, published::CRYSTAL_LENGTH_UM),
        wavelength: file.wavelength,
        vacuum_impedance: or(file.vacuum_impedance, published::VACUUM_IMPEDANCE_OHM),
        field_intensity_scale: or(file.field_intensity_scale, 1.0),
        blockade,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl<T: Real> ExcitonSeriesConfig<T> {
    /// Parses a JSON document. Unknown top-level or `blockade` keys are ignored
    /// and listed in the returned warnings.
    pub fn from_json_str(text: &str) -> Result<Loaded<T>> {
        let mut value: Value = serde_json::from_str(text)?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::Parse("configuration must be a JSON object".into()))?;
        let mut unknown = BTreeSet::new();
        obj.retain(|k, _| {
            let known = KNOWN_FIELDS.contains(&k.as_str());
            if !known {
                unknown.insert(k.clone());
            }
            known
        });
        if let Some(Value::Object(b)) = obj.get_mut("blockade") {
            b.retain(|k, _| {
                let known = crate::blockade::KNOWN_FIELDS.contains(&k.as_str());
                if !known {
                    unknown.insert(format!("blockade.{k}"));
                }
                known
            });
        }
        let file: ConfigFile<T> = serde_json::from_value(value)?;
        let config = default_config(&file)?;
        let mut warnings = Vec::new();
        if !unknown.is_empty() {
            let list: Vec<_> = unknown.into_iter().collect();
            warnings.push(format!("ignored unknown configuration fields: {}", list.join(", ")));
        }
        Ok(Loaded { config, warnings })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Loaded<T>> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gap_energy", self.gap_energy),
            ("rydberg_energy", self.rydberg_energy),
            ("bohr_radius", self.bohr_radius),
            ("coherence_radius", self.coherence_radius),
            ("epsilon_b", self.epsilon_b),
            ("delta_lt", self.delta_lt),
            ("extra_broadening", self.extra_broadening),
            ("crystal_length", self.crystal_length),
            ("vacuum_impedance", self.vacuum_impedance),
            ("field_intensity_scale", self.field_intensity_scale),
        ];
        for (name, v) in positive {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if let Some(w) = self.wavelength {
            if !(w > T::zero() && w.is_finite()) {
                return Err(Error::invalid("wavelength", "must be finite and > 0"));
            }
        }
        for (name, v) in [
            ("chi3_0", self.chi3_0),
            ("A_T", self.a_t),
            ("B_T", self.b_t),
            ("gamma_exp", self.gamma_exp),
            ("beta_exp", self.beta_exp),
        ] {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.quantum_defect >= T::zero() && self.quantum_defect < T::one()) {
            return Err(Error::invalid("quantum_defect", "must lie in [0, 1)"));
        }
        if self.n_min < 2 {
            return Err(Error::invalid("n_min", "the P series starts at n = 2"));
        }
        if self.n_max < self.n_min {
            return Err(Error::invalid("n_max", "must be >= n_min"));
        }
        for n in self.n_min..=self.n_max {
            match self.base_linewidths.get(&n) {
                Some(g) if *g > T::zero() && g.is_finite() => {}
                Some(_) => {
                    return Err(Error::invalid(
                        format!("base_linewidths.{n}"),
                        "must be finite and > 0",
                    ))
                }
                None => {
                    return Err(Error::invalid(
                        "base_linewidths",
                        format!("no linewidth for n = {n}"),
                    ))
                }
            }
        }
        self.blockade.validate()
    }

    pub fn principal_numbers(&self) -> std::ops::RangeInclusive<u32> {
        self.n_min..=self.n_max
    }

    /// Γ_n including the extra broadening [eV].
    pub fn linewidth(&self, n: u32) -> Result<T> {
        self.base_linewidths
            .get(&n)
            .map(|g| *g + self.extra_broadening)
            .ok_or_else(|| Error::Domain(format!("no linewidth for n = {n}")))
    }

    /// Probe wavelength [nm] at the given photon energy, honouring an explicit override.
    pub fn wavelength_at(&self, energy_ev: T) -> T {
        self.wavelength.unwrap_or_else(|| units::wavelength_nm(energy_ev))
    }
}

/// Transverse exciton energy E_Tn = E_gap − Ry*/(n − δ)² [eV].
pub fn exciton_energy<T: Real>(n: u32, cfg: &ExcitonSeriesConfig<T>) -> Result<T> {
    if n < cfg.n_min {
        return Err(Error::Domain(format!("n = {n} is below n_min = {}", cfg.n_min)));
    }
    let eff = T::from_u32(n).unwrap() - cfg.quantum_defect;
    if eff <= T::zero() {
        return Err(Error::Domain(format!("n − δ must be positive for n = {n}")));
    }
    Ok(cfg.gap_energy - cfg.rydberg_energy / (eff * eff))
}

/// Continuous effective principal number n(E) = δ + sqrt(Ry*/(E_gap − E)).
///
/// Equals n exactly at E = E_Tn; infinite at and above the gap.
pub fn effective_quantum_number<T: Real>(energy_ev: T, cfg: &ExcitonSeriesConfig<T>) -> T {
    let binding = cfg.gap_energy - energy_ev;
    if binding <= T::zero() {
        return T::infinity();
    }
    cfg.quantum_defect + (cfg.rydberg_energy / binding).sqrt()
}

/// Strictly increasing list of photon energies [eV].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid<T> {
    energies: Vec<T>,
}

impl<T: Real> SpectralGrid<T> {
    pub fn new(energies: Vec<T>) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::Domain("spectral grid must not be empty".into()));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::Domain("spectral grid contains non-finite energies".into()));
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("spectral grid must be strictly increasing".into()));
        }
        Ok(Self { energies })
    }

    /// `count` evenly spaced energies from `start` to `stop` inclusive.
    pub fn linspace(start: T, stop: T, count: usize) -> Result<Self> {
        if count == 1 {
            return Self::new(vec![start]);
        }
        let step = (stop - start) / T::from_usize_lossy(count - 1);
        Self::new(
            (0..count)
                .map(|i| start + step * T::from_usize_lossy(i))
                .collect(),
        )
    }

    /// Grid over binding energies E_b = E_gap − E from `eb_max_mev` down to
    /// `eb_min_mev` (both inclusive when commensurate), in steps of `step_uev`.
    pub fn from_binding_energy(
        cfg: &ExcitonSeriesConfig<T>,
        eb_min_mev: T,
        eb_max_mev: T,
        step_uev: T,
    ) -> Result<Self> {
        if !(step_uev > T::zero()) || eb_max_mev <= eb_min_mev {
            return Err(Error::Domain(
                "binding-energy range must be increasing with a positive step".into(),
            ));
        }
        let step = step_uev * lit(1e-6);
        let start = cfg.gap_energy - eb_max_mev * lit(1e-3);
        let stop = cfg.gap_energy - eb_min_mev * lit(1e-3);
        let count = ((stop - start) / step + lit(1e-9)).floor().to_usize().unwrap_or(0) + 1;
        Self::new(
            (0..count)
                .map(|i| start + step * T::from_usize_lossy(i))
                .collect(),
        )
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn minimal_file() -> ConfigFile<f64> {
        ConfigFile {
            rydberg_energy: Some(0.092),
            coherence_radius: Some(0.2),
            epsilon_b: Some(7.5),
            delta_lt: Some(1.25e-6),
            linewidth_scale: Some(4e-3),
            ..Default::default()
        }
    }

    #[test]
    fn published_defaults_are_applied() {
        let cfg = default_config(&minimal_file()).unwrap();
        assert_eq!(cfg.gap_energy, 2.1721);
        assert_eq!(cfg.quantum_defect, 0.34);
        assert_eq!(cfg.extra_broadening, 21e-6);
        assert_eq!(cfg.bohr_radius, 1.1);
        assert_eq!(cfg.chi3_0, 0.6e-11);
        assert_eq!((cfg.a_t, cfg.b_t), (4.53, 3.41));
        assert_eq!((cfg.gamma_exp, cfg.beta_exp), (1.8, 1.62));
        assert_eq!(cfg.crystal_length, 50.0);
        assert_eq!(cfg.vacuum_impedance, 376.73);
        assert_eq!((cfg.n_min, cfg.n_max), (2, 14));
    }

    #[test]
    fn missing_required_fields_are_named() {
        for field in ["rydberg_energy", "coherence_radius", "epsilon_b", "delta_lt"] {
            let mut f = minimal_file();
            match field {
                "rydberg_energy" => f.rydberg_energy = None,
                "coherence_radius" => f.coherence_radius = None,
                "epsilon_b" => f.epsilon_b = None,
                _ => f.delta_lt = None,
            }
            let err = default_config(&f).unwrap_err();
            assert!(err.to_string().contains(field), "{err}");
        }
        let mut f = minimal_file();
        f.linewidth_scale = None;
        assert!(matches!(
            default_config(&f),
            Err(Error::MissingField("linewidth_scale"))
        ));
    }

    #[test]
    fn linewidths_follow_inverse_cube_plus_extra() {
        let cfg = default_config(&minimal_file()).unwrap();
        let g5 = cfg.linewidth(5).unwrap();
        assert!((g5 - (4e-3 / 125.0 + 21e-6)).abs() < 1e-18);
        assert!(cfg.linewidth(15).is_err());
    }

    #[test]
    fn explicit_linewidths_take_precedence() {
        let mut f = minimal_file();
        f.linewidth_scale = None;
        f.n_max = Some(3);
        f.base_linewidths = Some(BTreeMap::from([(2, 1e-3), (3, 5e-4)]));
        let cfg = default_config(&f).unwrap();
        assert_eq!(cfg.linewidth(3).unwrap(), 5e-4 + 21e-6);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut f = minimal_file();
        f.n_min = Some(1);
        assert!(default_config(&f).is_err());
        let mut f = minimal_file();
        f.quantum_defect = Some(1.0);
        assert!(default_config(&f).is_err());
        let mut f = minimal_file();
        f.epsilon_b = Some(-1.0);
        assert!(default_config(&f).is_err());
    }

    #[test]
    fn unknown_fields_are_reported_not_applied() {
        let text = r#"{"rydberg_energy": 0.092, "coherence_radius": 0.2, "epsilon_b": 7.5,
            "delta_lt": 1.25e-6, "linewidth_scale": 4e-3, "colour": "yellow",
            "blockade": {"mode": "saturable", "bogus": 1}}"#;
        let loaded = ExcitonSeriesConfig::<f64>::from_json_str(text).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].contains("colour"));
        assert!(loaded.warnings[0].contains("blockade.bogus"));
    }

    #[test]
    fn exciton_energy_examples() {
        let mut cfg = default_config(&minimal_file()).unwrap();
        // Ry* = 92 meV, δ = 0.34, n = 5 → 2.1721 − 0.092/4.66².
        let e5 = exciton_energy(5, &cfg).unwrap();
        assert!((e5 - 2.167_863_4).abs() < 1e-6, "{e5}");
        assert!(exciton_energy(1, &cfg).is_err());

        cfg.quantum_defect = 0.0;
        let b = |n| cfg.gap_energy - exciton_energy(n, &cfg).unwrap();
        for n in 2..=7 {
            assert!((b(2 * n) - b(n) / 4.0).abs() < 1e-15);
        }

        cfg.rydberg_energy = 1e-300;
        assert!((exciton_energy(3, &cfg).unwrap() - cfg.gap_energy).abs() < 1e-15);
    }

    #[test]
    fn effective_quantum_number_hits_integers_on_resonance() {
        let cfg = default_config(&minimal_file()).unwrap();
        for n in 2..=14 {
            let e = exciton_energy(n, &cfg).unwrap();
            assert!((effective_quantum_number(e, &cfg) - n as f64).abs() < 1e-9);
        }
        assert!(effective_quantum_number(2.2, &cfg).is_infinite());
    }

    #[test]
    fn grid_validation() {
        assert!(SpectralGrid::<f64>::new(vec![]).is_err());
        assert!(SpectralGrid::new(vec![1.0, 1.0]).is_err());
        assert!(SpectralGrid::new(vec![2.0, 1.0]).is_err());
        let cfg = default_config(&minimal_file()).unwrap();
        let g = SpectralGrid::from_binding_energy(&cfg, -2.0, 35.0, 1.0).unwrap();
        assert_eq!(g.len(), 37_001);
        assert!((g.energies()[0] - (2.1721 - 0.035)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn config_json_round_trip_is_bit_exact(
            ry in 0.01f64..0.2, r0 in 1e-3f64..5.0, eb in 1.0f64..12.0,
            dlt in 1e-7f64..1e-4, g0 in 1e-4f64..1e-2, delta in 0.0f64..0.99,
        ) {
            let f = ConfigFile {
                rydberg_energy: Some(ry), coherence_radius: Some(r0), epsilon_b: Some(eb),
                delta_lt: Some(dlt), linewidth_scale: Some(g0), quantum_defect: Some(delta),
                ..Default::default()
            };
            let cfg = default_config(&f).unwrap();
            let text = cfg.to_json_string().unwrap();
            let back = ExcitonSeriesConfig::<f64>::from_json_str(&text).unwrap();
            prop_assert!(back.warnings.is_empty());
            prop_assert_eq!(&back.config, &cfg);
            for (a, b) in cfg.base_linewidths.values().zip(back.config.base_linewidths.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn exciton_energy_monotone_and_below_gap(ry in 0.01f64..0.2, delta in 0.0f64..0.99) {
            let f = ConfigFile {
                rydberg_energy: Some(ry), quantum_defect: Some(delta), n_max: Some(60),
                ..minimal_file()
            };
            let cfg = default_config(&f).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for n in 2..=60 {
                let e = exciton_energy(n, &cfg).unwrap();
                prop_assert!(e < cfg.gap_energy);
                prop_assert!(e > prev);
                prev = e;
            }
            prop_assert!(cfg.gap_energy - prev < ry / 3000.0);
        }
    }
}
