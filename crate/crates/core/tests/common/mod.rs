#![allow(dead_code)]

use std::path::PathBuf;

use rydkerr::interferometry::{
    add_noise, gaussian_beam, synthesize_interferogram, ComplexFieldMap, NoiseModel,
};
use rydkerr::{Config, FieldMap};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// The illustrative configuration shipped in `configs/`.
pub fn illustrative() -> Config {
    Config::from_path(config_path("cu2o_illustrative.json")).unwrap().config
}

/// Interferogram geometry shared by the round-trip tests.
#[derive(Debug, Clone, Copy)]
pub struct Rig {
    pub size: usize,
    pub pitch_um: f64,
    pub sigma_um: f64,
    pub power_mw: f64,
    pub low_fraction: f64,
    pub fringe_period: f64,
    pub fringe_angle_deg: f64,
    pub ref_curvature: f64,
}

impl Default for Rig {
    fn default() -> Self {
        Self {
            size: 512,
            pitch_um: 2.5,
            sigma_um: 200.0,
            power_mw: 1.0,
            low_fraction: 0.01,
            fringe_period: 10.0,
            fringe_angle_deg: 0.0,
            ref_curvature: 2e-5,
        }
    }
}

pub struct Shots {
    pub high: FieldMap,
    pub low: FieldMap,
    pub intensity: FieldMap,
    /// Injected high-minus-low phase.
    pub truth: FieldMap,
}

impl Rig {
    pub fn carrier(&self) -> [f64; 2] {
        let k = std::f64::consts::TAU / self.fringe_period;
        let t = self.fringe_angle_deg.to_radians();
        [k * t.cos(), k * t.sin()]
    }

    /// High- and low-power interferograms for a phase profile Δφ(I), each
    /// normalised to unit peak amplitude.
    pub fn shoot(
        &self,
        profile: impl Fn(f64) -> f64,
        noise: Option<(&NoiseModel<f64>, u64)>,
    ) -> Shots {
        let beam = gaussian_beam(self.power_mw, self.sigma_um, self.size, self.size, self.pitch_um).unwrap();
        let intensity = beam.intensity;
        let peak = intensity.max();
        let rel = intensity.map(|i| i / peak).unwrap();
        let high_phase = intensity.map(&profile).unwrap();
        let low_phase = intensity.map(|i| profile(i * self.low_fraction)).unwrap();
        let make = |phase: &FieldMap, stream: &str| {
            let field = ComplexFieldMap::from_intensity_phase(&rel, phase).unwrap();
            let img = synthesize_interferogram(&field, 1.0, self.carrier(), self.ref_curvature).unwrap();
            match noise {
                Some((n, seed)) => {
                    add_noise(&img, n, &mut rydkerr::seeding::substream(seed, stream)).unwrap()
                }
                None => img,
            }
        };
        let truth = FieldMap::new(
            self.size,
            self.size,
            self.pitch_um,
            high_phase
                .values()
                .iter()
                .zip(low_phase.values())
                .map(|(h, l)| h - l)
                .collect(),
        )
        .unwrap();
        Shots {
            high: make(&high_phase, "high"),
            low: make(&low_phase, "low"),
            intensity,
            truth,
        }
    }

    pub fn peak_intensity(&self) -> f64 {
        self.power_mw / (std::f64::consts::TAU * (self.sigma_um * 1e-3).powi(2))
    }
}
