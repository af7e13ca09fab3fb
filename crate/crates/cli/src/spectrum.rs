use std::fmt::Write as _;
use std::path::PathBuf;

use rydkerr::rdma::{self, SusceptibilitySpectrum};
use rydkerr::Grid;
use serde_json::json;

use crate::cli::{Globals, SpectrumArgs};
use crate::output::{require_config, write_atomic, write_json};
use crate::{coded, EXIT_CONFIG, EXIT_NUMERIC};

/// Highest photon energy accepted above the gap [meV].
const MAX_ABOVE_GAP_MEV: f64 = 10.0;

pub fn run(globals: &Globals, args: &SpectrumArgs) -> anyhow::Result<Vec<PathBuf>> {
    let mut cfg = require_config(globals, "for spectra")?;
    if let Some(n) = args.nmin {
        cfg.n_min = n;
    }
    if let Some(n) = args.nmax {
        cfg.n_max = n;
    }
    if args.nmin.is_some() || args.nmax.is_some() {
        fill_linewidths(&mut cfg)?;
    }
    cfg.validate()?;
    if args.eb_min < -MAX_ABOVE_GAP_MEV {
        return Err(coded(
            EXIT_CONFIG,
            format!("--eb-min must be >= -{MAX_ABOVE_GAP_MEV} meV (at most 10 meV above the gap)"),
        ));
    }
    if args.eb_max * 1e-3 >= cfg.gap_energy {
        return Err(coded(EXIT_CONFIG, "--eb-max reaches zero photon energy"));
    }
    let grid = Grid::from_binding_energy(&cfg, args.eb_min, args.eb_max, args.step)?;
    let spec = SusceptibilitySpectrum::compute(&grid, &cfg)?;

    let dir = &globals.out;
    let mut written = Vec::new();
    let csv = if args.chi3_only {
        rdma::chi3_csv(&spec)
    } else {
        let kerr = rdma::kerr_response(&spec, &cfg, &cfg.blockade, args.probe_intensity, &args.intensities)?;
        if kerr.n2.iter().chain(&kerr.alpha3).any(|v| !v.is_finite()) {
            return Err(coded(EXIT_NUMERIC, "non-finite n₂ or absorption in the spectrum"));
        }
        if !args.intensities.is_empty() {
            let table = phase_table(&kerr);
            written.push(write_atomic(&dir.join(format!("{}_dphi.csv", args.name)), table.as_bytes())?);
        }
        rdma::spectrum_csv(&spec, &kerr)?
    };
    if spec.chi1.iter().chain(&spec.chi3).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(coded(EXIT_NUMERIC, "non-finite susceptibility in the spectrum"));
    }
    written.insert(0, write_atomic(&dir.join(format!("{}.csv", args.name)), csv.as_bytes())?);
    let meta = json!({
        "command": "spectrum",
        "seed": globals.seed,
        "points": grid.len(),
        "binding_energy_meV": [args.eb_min, args.eb_max],
        "step_ueV": args.step,
        "n_min": cfg.n_min,
        "n_max": cfg.n_max,
        "chi3_only": args.chi3_only,
        "probe_intensity_mW_mm2": args.probe_intensity,
        "blockade": cfg.blockade.kind.as_str(),
    });
    written.push(write_json(&dir.join(format!("{}.meta.json", args.name)), &meta)?);
    Ok(written)
}

/// Γ_n for levels added by --nmin/--nmax, from the configured n⁻³ law.
fn fill_linewidths(cfg: &mut rydkerr::Config) -> anyhow::Result<()> {
    for n in cfg.n_min..=cfg.n_max {
        if cfg.base_linewidths.contains_key(&n) {
            continue;
        }
        let scale = cfg.linewidth_scale.ok_or_else(|| {
            coded(
                EXIT_CONFIG,
                format!("no linewidth for n = {n}: set linewidth_scale or base_linewidths"),
            )
        })?;
        cfg.base_linewidths.insert(n, scale / f64::from(n).powi(3));
    }
    cfg.base_linewidths.retain(|n, _| (cfg.n_min..=cfg.n_max).contains(n));
    Ok(())
}

fn phase_table(kerr: &rydkerr::Kerr) -> String {
    let mut out = String::from("energy_eV");
    for i in &kerr.intensities {
        let _ = write!(out, ",dphi_rad_at_{i}");
    }
    out.push('\n');
    for (e, row) in kerr.grid.energies().iter().zip(&kerr.phase_shift) {
        let _ = write!(out, "{e}");
        for v in row {
            let _ = write!(out, ",{v:e}");
        }
        out.push('\n');
    }
    out
}
