use std::path::{Path, PathBuf};

use anyhow::Context;
use rydkerr::interferometry::{
    extract_phase_shift, BinningOptions, DemodulationOptions, ExtractOptions, PairMember, Sideband,
};
use rydkerr::FieldMap;
use serde_json::{json, Value};

use crate::cli::{ExtractArgs, Globals, SidebandArg};
use crate::output::{read_meta, write_atomic, write_json};
use crate::{coded, EXIT_CONFIG, EXIT_SIGNAL};

fn load(path: &Path) -> anyhow::Result<(FieldMap, Option<u64>)> {
    FieldMap::load(path).with_context(|| format!("loading {}", path.display()))
}

pub fn run(globals: &Globals, args: &ExtractArgs) -> anyhow::Result<Vec<PathBuf>> {
    if !(args.intensity_scale > 0.0) {
        return Err(coded(EXIT_CONFIG, "--intensity-scale must be > 0"));
    }
    let (high, high_seed) = load(&args.high)?;
    let (low, _) = load(&args.low)?;
    let (intensity, _) = load(&args.intensity)?;
    let intensity = intensity.map(|v| v * args.intensity_scale)?;

    let options = ExtractOptions {
        demodulation: DemodulationOptions {
            window_radius: args.window_radius,
            sideband: match args.sideband {
                SidebandArg::Plus => Sideband::Plus,
                SidebandArg::Minus => Sideband::Minus,
            },
        },
        binning: BinningOptions {
            n_bins: args.bins,
            tolerance: args.tolerance,
            border: args.border,
        },
    };
    let result = extract_phase_shift(&high, &low, &intensity, &options).map_err(|e| {
        let file = match e.member {
            Some(PairMember::HighPower) => Some(&args.high),
            Some(PairMember::LowPower) => Some(&args.low),
            None => None,
        };
        match file {
            Some(f) => coded(EXIT_SIGNAL, format!("{}: {}", f.display(), e.source)),
            None => anyhow::Error::new(e),
        }
    })?;
    if result.residual_jumps > 0 {
        eprintln!(
            "warning: {} adjacent-pixel phase jumps above π remain after unwrapping",
            result.residual_jumps
        );
    }

    // Measurement labels: explicit flags win over the synthesis sidecar.
    let synth_meta = args
        .high
        .parent()
        .map(|d| d.join("synth.meta.json"))
        .map(|p| read_meta(&p))
        .transpose()?
        .flatten()
        .unwrap_or(Value::Null);
    let label = |flag: Option<Value>, key: &str| flag.unwrap_or_else(|| synth_meta.get(key).cloned().unwrap_or(Value::Null));
    let seed = high_seed.unwrap_or(globals.seed);

    let peaks = |p: &rydkerr::interferometry::CarrierPeaks| {
        json!({"dc": [p.dc.0, p.dc.1], "plus": [p.plus.0, p.plus.1], "minus": [p.minus.0, p.minus.1], "threshold_steps": p.steps})
    };
    let meta = json!({
        "command": "extract",
        "seed": seed,
        "high": args.high.display().to_string(),
        "low": args.low.display().to_string(),
        "intensity": args.intensity.display().to_string(),
        "bins": args.bins,
        "tolerance": args.tolerance,
        "border": args.border,
        "high_peaks": peaks(&result.high_peaks),
        "low_peaks": peaks(&result.low_peaks),
        "residual_jumps": result.residual_jumps,
        "energy_eV": label(args.energy.map(|v| json!(v)), "energy_eV"),
        "level": label(args.level.map(|v| json!(v)), "level"),
        "transmission": label(args.transmission.map(|v| json!(v)), "transmission"),
    });

    let dir = &globals.out;
    Ok(vec![
        write_atomic(&dir.join(format!("{}.csv", args.name)), result.curve.to_csv().as_bytes())?,
        write_json(&dir.join(format!("{}.meta.json", args.name)), &meta)?,
        write_atomic(
            &dir.join(format!("{}_phase.rkf", args.name)),
            &result.phase_shift.to_rkf1_bytes(Some(seed)),
        )?,
    ])
}
