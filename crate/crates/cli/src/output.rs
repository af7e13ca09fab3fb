use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};

use crate::cli::Globals;
use crate::{coded, EXIT_CONFIG};

/// Writes via a temporary sibling and a rename so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<PathBuf> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path
        .file_name()
        .with_context(|| format!("{} has no file name", path.display()))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(path.to_path_buf())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Loads the configuration named by `--config` and applies `--blockade`.
/// Warnings about ignored fields go to stderr.
pub fn load_config(globals: &Globals) -> anyhow::Result<Option<rydkerr::Config>> {
    let Some(path) = &globals.config else {
        return Ok(None);
    };
    let loaded = rydkerr::Config::from_path(path).map_err(|e| match e {
        rydkerr::Error::Io { .. } => coded(EXIT_CONFIG, format!("cannot read configuration: {e}")),
        other => anyhow::Error::new(other).context(format!("loading {}", path.display())),
    })?;
    for w in &loaded.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    let mut cfg = loaded.config;
    if let Some(kind) = globals.blockade {
        cfg.blockade = cfg.blockade.with_kind(kind);
    }
    Ok(Some(cfg))
}

pub fn require_config(globals: &Globals, why: &str) -> anyhow::Result<rydkerr::Config> {
    load_config(globals)?.ok_or_else(|| coded(EXIT_CONFIG, format!("--config is required {why}")))
}

/// Reads a sidecar `*.meta.json` if present.
pub fn read_meta(path: &Path) -> anyhow::Result<Option<serde_json::Value>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?))
}

/// Path of the sidecar metadata file that accompanies `data`.
pub fn meta_path(data: &Path) -> PathBuf {
    let stem = data.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    data.with_file_name(format!("{stem}.meta.json"))
}

pub fn finite_or_null(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let leftovers: Vec<_> = fs::read_dir(dir.path().join("sub")).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(meta_path(Path::new("x/curve.csv")), PathBuf::from("x/curve.meta.json"));
    }
}
