use std::path::PathBuf;

use rydkerr::config::exciton_energy;
use rydkerr::interferometry::{
    add_noise, carrier_bins, gaussian_beam, synthesize_interferogram, ComplexFieldMap, NoiseModel,
    ScalarFieldMap,
};
use rydkerr::rdma::{kerr_phase_shift, n2, optical_density};
use rydkerr::seeding::substream;
use serde_json::json;

use crate::cli::{Globals, Profile, SynthArgs};
use crate::output::{finite_or_null, require_config, write_atomic, write_json};
use crate::{coded, EXIT_CONFIG};

/// Phase shift as a function of input intensity [mW/mm²].
enum PhaseProfile {
    Linear { slope: f64 },
    Saturable { alpha: f64, isat: f64 },
    Model { energy: f64, cfg: Box<rydkerr::Config> },
}

impl PhaseProfile {
    fn eval(&self, intensity: f64) -> rydkerr::Result<f64> {
        match self {
            PhaseProfile::Linear { slope } => Ok(slope * intensity),
            PhaseProfile::Saturable { alpha, isat } => {
                Ok(rydkerr::fitting::saturable(intensity, *alpha, *isat))
            }
            PhaseProfile::Model { energy, cfg } => kerr_phase_shift(*energy, intensity, cfg, &cfg.blockade),
        }
    }
}

pub fn run(globals: &Globals, args: &SynthArgs) -> anyhow::Result<Vec<PathBuf>> {
    if !(args.low_fraction >= 0.0 && args.low_fraction < 1.0) {
        return Err(coded(EXIT_CONFIG, "--low-fraction must lie in [0, 1)"));
    }
    if !(args.fringe_period > 0.0) || !(args.ref_ratio > 0.0) {
        return Err(coded(EXIT_CONFIG, "--fringe-period and --ref-ratio must be > 0"));
    }
    let beam = gaussian_beam(args.power, args.sigma, args.size, args.size, args.pitch)?;
    if beam.undersized {
        eprintln!("warning: the grid spans less than 2σ of the beam");
    }
    let peak = beam.intensity.max();
    if !(peak > 0.0) {
        return Err(coded(EXIT_CONFIG, "beam power must be > 0 to form an interferogram"));
    }

    let mut meta = json!({
        "command": "synth",
        "seed": globals.seed,
        "size": args.size,
        "pixel_pitch_um": args.pitch,
        "power_mW": args.power,
        "sigma_um": args.sigma,
        "peak_intensity_mW_mm2": peak,
        "low_fraction": args.low_fraction,
        "fringe_period_px": args.fringe_period,
        "fringe_angle_deg": args.fringe_angle,
        "ref_curvature_rad_px2": args.ref_curvature,
        "photons_per_unit": args.photons,
        "jitter": args.jitter,
    });
    let profile = match args.profile {
        Profile::Linear => {
            meta["profile"] = json!({"kind": "linear", "peak_phase_rad": args.peak_phase});
            PhaseProfile::Linear {
                slope: args.peak_phase / peak,
            }
        }
        Profile::Saturable => {
            let (Some(alpha), Some(isat)) = (args.alpha, args.isat) else {
                return Err(coded(EXIT_CONFIG, "--profile saturable needs --alpha and --isat"));
            };
            if !(isat > 0.0) {
                return Err(coded(EXIT_CONFIG, "--isat must be > 0"));
            }
            meta["profile"] = json!({"kind": "saturable", "alpha": alpha, "isat": isat});
            PhaseProfile::Saturable { alpha, isat }
        }
        Profile::Model => {
            let cfg = require_config(globals, "for --profile model")?;
            let energy = match (args.energy, args.level) {
                (Some(e), None) => e,
                (None, Some(n)) => exciton_energy(n, &cfg)? + args.detuning * cfg.linewidth(n)?,
                _ => {
                    return Err(coded(
                        EXIT_CONFIG,
                        "--profile model needs exactly one of --energy or --level",
                    ))
                }
            };
            let od = optical_density(energy, &cfg)?;
            meta["profile"] = json!({
                "kind": "model",
                "blockade": cfg.blockade.kind.as_str(),
                "detuning_linewidths": args.level.map(|_| args.detuning),
            });
            meta["energy_eV"] = json!(energy);
            meta["level"] = json!(args.level);
            meta["transmission"] = finite_or_null((-od).exp());
            meta["model_n2_mm2_per_mW"] = finite_or_null(n2(energy, &cfg)?);
            PhaseProfile::Model {
                energy,
                cfg: Box::new(cfg),
            }
        }
    };

    let theta = args.fringe_angle.to_radians();
    let k = std::f64::consts::TAU / args.fringe_period;
    let carrier = [k * theta.cos(), k * theta.sin()];
    meta["carrier_bins"] = json!(carrier_bins(carrier, args.size, args.size));

    let phase_map = |scale: f64| -> anyhow::Result<ScalarFieldMap<f64>> {
        let values = beam
            .intensity
            .values()
            .iter()
            .map(|&i| profile.eval(i * scale))
            .collect::<rydkerr::Result<Vec<_>>>()?;
        Ok(ScalarFieldMap::new(args.size, args.size, args.pitch, values)?)
    };
    let high_phase = phase_map(1.0)?;
    let low_phase = phase_map(args.low_fraction)?;
    // Each shot is normalised to unit peak amplitude, as for an exposure-matched camera.
    let relative = beam.intensity.map(|i| i / peak)?;
    let noise = NoiseModel {
        photons_per_unit: args.photons,
        intensity_jitter: args.jitter,
    };
    let shoot = |phase: &ScalarFieldMap<f64>, stream: &str| -> anyhow::Result<ScalarFieldMap<f64>> {
        let field = ComplexFieldMap::from_intensity_phase(&relative, phase)?;
        let img = synthesize_interferogram(&field, args.ref_ratio, carrier, args.ref_curvature)?;
        if noise.is_noiseless() {
            Ok(img)
        } else {
            Ok(add_noise(&img, &noise, &mut substream(globals.seed, stream))?)
        }
    };
    let high = shoot(&high_phase, "synth/high")?;
    let low = shoot(&low_phase, "synth/low")?;
    let truth = ScalarFieldMap::new(
        args.size,
        args.size,
        args.pitch,
        high_phase.values().iter().zip(low_phase.values()).map(|(h, l)| h - l).collect(),
    )?;

    let dir = &globals.out;
    let seed = Some(globals.seed);
    Ok(vec![
        write_atomic(&dir.join("high.rkf"), &high.to_rkf1_bytes(seed))?,
        write_atomic(&dir.join("low.rkf"), &low.to_rkf1_bytes(seed))?,
        write_atomic(&dir.join("intensity.rkf"), &beam.intensity.to_rkf1_bytes(seed))?,
        write_atomic(&dir.join("truth.rkf"), &truth.to_rkf1_bytes(seed))?,
        write_json(&dir.join("synth.meta.json"), &meta)?,
    ])
}
