use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rydkerr::config::published;
use rydkerr::fitting::{extract_n2, fit_powerlaw, fit_saturable, Weighting};
use rydkerr::interferometry::CURVE_CSV_HEADER;
use rydkerr::units::wavelength_nm;
use rydkerr::Curve;
use serde_json::{json, Value};

use crate::cli::{FitArgs, Globals};
use crate::output::{finite_or_null, load_config, meta_path, read_meta, write_atomic, write_json};
use crate::{coded, exit_code, EXIT_CONFIG};

struct CurveFit {
    file: PathBuf,
    level: Option<u32>,
    energy: Option<f64>,
    alpha: f64,
    isat: f64,
    isat_sigma: f64,
    n2: Option<f64>,
    report: Value,
}

/// Curve files named on the command line, expanding directories to the
/// curve CSVs they contain.
fn collect_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found = Vec::new();
            for entry in fs::read_dir(input).with_context(|| format!("listing {}", input.display()))? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "csv") && is_curve_file(&path) {
                    found.push(path);
                }
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(coded(EXIT_CONFIG, "no phase-shift curve files found"));
    }
    Ok(files)
}

fn is_curve_file(path: &Path) -> bool {
    fs::read_to_string(path)
        .map(|t| t.lines().next() == Some(CURVE_CSV_HEADER))
        .unwrap_or(false)
}

/// Level encoded in a name such as `n07` or `curve_n7`.
fn level_from_name(path: &Path) -> Option<u32> {
    let names = [path.file_stem(), path.parent().and_then(|p| p.file_name())];
    names.into_iter().flatten().find_map(|os| {
        let s = os.to_string_lossy();
        s.split(|c: char| !c.is_ascii_alphanumeric())
            .filter_map(|tok| tok.strip_prefix('n'))
            .find_map(|digits| digits.parse().ok())
    })
}

pub fn run(globals: &Globals, args: &FitArgs) -> anyhow::Result<Vec<PathBuf>> {
    let cfg = load_config(globals)?;
    let weighting = if args.unweighted {
        Weighting::Unweighted
    } else {
        Weighting::InverseVariance
    };
    let length = args
        .length
        .or(cfg.as_ref().map(|c| c.crystal_length))
        .unwrap_or(published::CRYSTAL_LENGTH_UM);
    let delta = args
        .quantum_defect
        .or(cfg.as_ref().map(|c| c.quantum_defect))
        .unwrap_or(published::QUANTUM_DEFECT_P);

    let files = collect_inputs(&args.inputs)?;
    let mut fits = Vec::new();
    let mut failures: Vec<(PathBuf, anyhow::Error)> = Vec::new();
    for file in &files {
        match fit_one(file, weighting, args, cfg.as_ref(), length) {
            Ok(f) => fits.push(f),
            Err(e) => failures.push((file.clone(), e)),
        }
    }

    let mut report = json!({
        "command": "fit",
        "seed": globals.seed,
        "weighting": if args.unweighted { "unweighted" } else { "inverse_variance" },
        "curves": fits.iter().map(|f| f.report.clone()).collect::<Vec<_>>(),
        "failures": failures
            .iter()
            .map(|(p, e)| json!({"file": p.display().to_string(), "error": format!("{e:#}")}))
            .collect::<Vec<_>>(),
    });

    let mut scaling_error = None;
    if args.scaling {
        match scaling_fit(&fits, delta) {
            Ok(v) => report["scaling"] = v,
            Err(e) => {
                report["scaling"] = json!({"error": format!("{e:#}")});
                scaling_error = Some(e);
            }
        }
    }

    let dir = &globals.out;
    let mut written = vec![write_json(&dir.join(format!("{}.json", args.name)), &report)?];
    if fits.iter().any(|f| f.energy.is_some()) {
        written.push(write_atomic(
            &dir.join(format!("{}_spectrum.csv", args.name)),
            spectrum_csv(&fits).as_bytes(),
        )?);
    }

    if let Some((file, e)) = failures.into_iter().next() {
        let code = exit_code(&e);
        return Err(coded(code, format!("{}: {e:#}", file.display())));
    }
    if let Some(e) = scaling_error {
        return Err(e.context("scaling fit"));
    }
    Ok(written)
}

fn fit_one(
    file: &Path,
    weighting: Weighting,
    args: &FitArgs,
    cfg: Option<&rydkerr::Config>,
    length: f64,
) -> anyhow::Result<CurveFit> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let curve = Curve::from_csv(&text)?;
    let fit = fit_saturable(&curve, weighting)?;
    let meta = read_meta(&meta_path(file))?.unwrap_or(Value::Null);
    let level = meta
        .get("level")
        .and_then(Value::as_u64)
        .map(|v| v as u32)
        .or_else(|| level_from_name(file));
    let energy = meta.get("energy_eV").and_then(Value::as_f64);
    let transmission = args
        .transmission
        .or_else(|| meta.get("transmission").and_then(Value::as_f64));
    let wavelength = args
        .wavelength
        .or(cfg.and_then(|c| c.wavelength))
        .or(energy.map(wavelength_nm));

    let alpha = fit.param("alpha").unwrap_or(f64::NAN);
    let isat = fit.param("isat").unwrap_or(f64::NAN);
    let n2 = match (transmission, wavelength) {
        (Some(t), Some(l)) => Some(extract_n2(alpha, t, length, l)?),
        _ => None,
    };
    let mut warnings: Vec<String> = fit.warnings.clone();
    if let Some(est) = &n2 {
        warnings.extend(est.warnings.iter().cloned());
    }
    let report = json!({
        "file": file.display().to_string(),
        "level": level,
        "energy_eV": energy,
        "fit": fit.to_json(),
        "n2": n2.as_ref().map(|e| json!({
            "n2_mm2_per_mW": finite_or_null(e.n2),
            "effective_length_um": finite_or_null(e.effective_length),
            "clamped": e.clamped,
            "transmission": transmission,
            "wavelength_nm": wavelength,
        })),
        "warnings": warnings,
    });
    Ok(CurveFit {
        file: file.to_path_buf(),
        level,
        energy,
        alpha,
        isat,
        isat_sigma: fit.sigma("isat").unwrap_or(f64::INFINITY),
        n2: n2.map(|e| e.n2),
        report,
    })
}

/// I_sat(n) as the mean over all curves of level n, then the log-log power law.
fn scaling_fit(fits: &[CurveFit], delta: f64) -> anyhow::Result<Value> {
    let mut by_level: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for f in fits {
        match f.level {
            Some(n) if f.isat.is_finite() && f.isat > 0.0 && f.isat_sigma.is_finite() => {
                by_level.entry(n).or_default().push(f.isat)
            }
            Some(_) => eprintln!("warning: {}: unidentified I_sat left out of the scaling fit", f.file.display()),
            None => eprintln!("warning: {}: no level recorded, left out of the scaling fit", f.file.display()),
        }
    }
    let ns: Vec<u32> = by_level.keys().copied().collect();
    let isats: Vec<f64> = by_level.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let fit = fit_powerlaw(&ns, &isats, delta)?;
    Ok(json!({
        "quantum_defect": delta,
        "levels": ns,
        "isat_mW_mm2": isats,
        "fit": fit.to_json(),
    }))
}

fn spectrum_csv(fits: &[CurveFit]) -> String {
    let mut rows: Vec<&CurveFit> = fits.iter().filter(|f| f.energy.is_some()).collect();
    rows.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = String::from("energy_eV,alpha_rad_mm2_per_mW,isat_mW_mm2,n2_mm2_per_mW\n");
    for f in rows {
        let n2 = f.n2.map(|v| format!("{v:e}")).unwrap_or_default();
        let _ = writeln!(out, "{},{:e},{:e},{}", f.energy.unwrap(), f.alpha, f.isat, n2);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_from_names() {
        assert_eq!(level_from_name(Path::new("run/n07/curve.csv")), Some(7));
        assert_eq!(level_from_name(Path::new("curve_n10.csv")), Some(10));
        assert_eq!(level_from_name(Path::new("run/curve.csv")), None);
    }
}
