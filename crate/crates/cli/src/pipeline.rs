//! Manifest runner. A manifest lists steps, each an ordinary subcommand
//! invocation with declared input and output files; steps run in dependency
//! order and are skipped when their fingerprint and outputs are unchanged.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Parser;
use rand::RngCore;
use rydkerr::seeding::substream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::cli::{Cli, Globals, PipelineArgs};
use crate::output::{sha256_file, write_json};
use crate::{coded, EXIT_CONFIG};

pub const STATE_FILE: &str = "pipeline.state.json";
pub const RESOLVED_FILE: &str = "pipeline.manifest.json";
const RUNNABLE: &[&str] = &["spectrum", "synth", "extract", "fit"];
const GLOBAL_FLAGS: &[&str] = &["--config", "--out", "--seed", "--blockade"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Configuration file, relative to the manifest.
    #[serde(default)]
    pub config: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Output root, relative to `--out`.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub blockade: Option<String>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub id: String,
    /// Subcommand and its arguments; `{out}` expands to the output root.
    pub args: Vec<String>,
    /// Output directory of the step relative to the root; defaults to the id.
    #[serde(default)]
    pub dir: Option<String>,
    /// Files read by the step, relative to the root.
    #[serde(default)]
    pub inputs: Vec<String>,
    /// Files written by the step, relative to the root.
    #[serde(default)]
    pub outputs: Vec<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct State {
    steps: BTreeMap<String, StepState>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepState {
    fingerprint: String,
    outputs: BTreeMap<String, String>,
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    coded(EXIT_CONFIG, msg)
}

/// Dependency order of the steps; ties keep manifest order.
pub fn order_steps(steps: &[Step]) -> anyhow::Result<Vec<usize>> {
    let mut producer: HashMap<&str, usize> = HashMap::new();
    let mut ids = HashMap::new();
    for (i, s) in steps.iter().enumerate() {
        if s.id.is_empty() || s.id.contains(['/', '\\']) {
            return Err(config_error(format!("step id `{}` must be a plain non-empty name", s.id)));
        }
        if ids.insert(s.id.as_str(), i).is_some() {
            return Err(config_error(format!("duplicate step id `{}`", s.id)));
        }
        for o in &s.outputs {
            if let Some(prev) = producer.insert(o.as_str(), i) {
                return Err(config_error(format!(
                    "`{o}` is an output of both `{}` and `{}`",
                    steps[prev].id, s.id
                )));
            }
        }
    }
    let mut indegree = vec![0usize; steps.len()];
    let mut edges = vec![Vec::new(); steps.len()];
    for (i, s) in steps.iter().enumerate() {
        for input in &s.inputs {
            if let Some(&p) = producer.get(input.as_str()) {
                if p == i {
                    return Err(config_error(format!("step `{}` consumes its own output `{input}`", s.id)));
                }
                edges[p].push(i);
                indegree[i] += 1;
            }
        }
    }
    let mut ready: VecDeque<usize> = (0..steps.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(steps.len());
    while let Some(i) = ready.pop_front() {
        order.push(i);
        let mut next = Vec::new();
        for &j in &edges[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                next.push(j);
            }
        }
        next.sort_unstable();
        ready.extend(next);
        ready.make_contiguous().sort_unstable();
    }
    if order.len() != steps.len() {
        let stuck: Vec<&str> = (0..steps.len())
            .filter(|i| !order.contains(i))
            .map(|i| steps[i].id.as_str())
            .collect();
        return Err(config_error(format!("dependency cycle among steps: {}", stuck.join(", "))));
    }
    Ok(order)
}

fn validate_step(step: &Step) -> anyhow::Result<()> {
    match step.args.first() {
        Some(cmd) if RUNNABLE.contains(&cmd.as_str()) => {}
        Some(cmd) => {
            return Err(config_error(format!(
                "step `{}`: `{cmd}` is not one of {}",
                step.id,
                RUNNABLE.join(", ")
            )))
        }
        None => return Err(config_error(format!("step `{}` has no command", step.id))),
    }
    if let Some(flag) = step
        .args
        .iter()
        .find(|a| GLOBAL_FLAGS.iter().any(|g| a.as_str() == *g || a.starts_with(&format!("{g}="))))
    {
        return Err(config_error(format!(
            "step `{}`: {flag} is set by the manifest, not per step",
            step.id
        )));
    }
    Ok(())
}

pub fn run(globals: &Globals, args: &PipelineArgs) -> anyhow::Result<Vec<PathBuf>> {
    let text = fs::read_to_string(&args.manifest)
        .map_err(|e| config_error(format!("cannot read manifest {}: {e}", args.manifest.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("{}: {e}", args.manifest.display())))?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let config = manifest.config.as_ref().map(|c| base.join(c)).or_else(|| globals.config.clone());
    let seed = manifest.seed.unwrap_or(globals.seed);
    let blockade = match &manifest.blockade {
        Some(b) => Some(b.parse::<rydkerr::BlockadeKind>()?),
        None => globals.blockade,
    };
    let root = match &manifest.out {
        Some(o) => globals.out.join(o),
        None => globals.out.clone(),
    };
    for s in &manifest.steps {
        validate_step(s)?;
    }
    let order = order_steps(&manifest.steps)?;
    fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;

    let config_hash = match &config {
        Some(c) => sha256_file(c).map_err(|e| config_error(format!("{e:#}")))?,
        None => String::new(),
    };
    let state_path = root.join(STATE_FILE);
    let mut state: State = match fs::read_to_string(&state_path) {
        Ok(t) => serde_json::from_str(&t).unwrap_or_default(),
        Err(_) => State::default(),
    };

    let root_str = root.display().to_string();
    let mut resolved = Vec::new();
    let mut written = Vec::new();
    for &i in &order {
        let step = &manifest.steps[i];
        let step_seed = substream(seed, &format!("pipeline/{}", step.id)).next_u64();
        let step_out = root.join(step.dir.as_deref().unwrap_or(&step.id));
        let step_args: Vec<String> = step.args.iter().map(|a| a.replace("{out}", &root_str)).collect();

        let mut hasher = Sha256::new();
        for a in &step_args {
            hasher.update(a.as_bytes());
            hasher.update([0]);
        }
        hasher.update(step_seed.to_le_bytes());
        hasher.update(config_hash.as_bytes());
        hasher.update(blockade.map(|b| b.as_str()).unwrap_or("").as_bytes());
        hasher.update(step_out.display().to_string().as_bytes());
        for input in &step.inputs {
            let path = root.join(input);
            let h = sha256_file(&path)
                .with_context(|| format!("step `{}`: missing input `{input}`", step.id))?;
            hasher.update(input.as_bytes());
            hasher.update(h.as_bytes());
        }
        let fingerprint = format!("{:x}", hasher.finalize());

        resolved.push(json!({
            "id": step.id,
            "args": step_args,
            "out": step_out.display().to_string(),
            "seed": step_seed,
            "inputs": step.inputs,
            "outputs": step.outputs,
        }));

        let up_to_date = !args.force
            && state.steps.get(&step.id).is_some_and(|s| {
                s.fingerprint == fingerprint
                    && s.outputs
                        .iter()
                        .all(|(p, h)| sha256_file(&root.join(p)).ok().as_deref() == Some(h.as_str()))
            });
        if up_to_date {
            eprintln!("skip {} (up to date)", step.id);
            continue;
        }
        eprintln!("run  {}", step.id);

        let mut argv = vec!["rydkerr".to_string()];
        if let Some(c) = &config {
            argv.extend(["--config".into(), c.display().to_string()]);
        }
        if let Some(b) = blockade {
            argv.extend(["--blockade".into(), b.as_str().into()]);
        }
        argv.extend([
            "--seed".into(),
            step_seed.to_string(),
            "--out".into(),
            step_out.display().to_string(),
        ]);
        argv.extend(step_args.iter().cloned());
        let cli = Cli::try_parse_from(&argv)
            .map_err(|e| config_error(format!("step `{}`: {e}", step.id)))?;
        let files = crate::run(&cli).with_context(|| format!("step `{}`", step.id))?;

        let mut outputs = BTreeMap::new();
        for o in &step.outputs {
            let path = root.join(o);
            if !path.exists() {
                return Err(anyhow::anyhow!("step `{}` did not produce declared output `{o}`", step.id));
            }
            outputs.insert(o.clone(), sha256_file(&path)?);
        }
        for f in &files {
            if let Ok(rel) = f.strip_prefix(&root) {
                let key = rel.to_string_lossy().replace('\\', "/");
                if let std::collections::btree_map::Entry::Vacant(slot) = outputs.entry(key) {
                    slot.insert(sha256_file(f)?);
                }
            }
        }
        written.extend(files);
        state.steps.insert(step.id.clone(), StepState { fingerprint, outputs });
        write_json(&state_path, &serde_json::to_value(&state)?)?;
    }

    let record = json!({
        "manifest": args.manifest.display().to_string(),
        "config": config.as_ref().map(|c| c.display().to_string()),
        "seed": seed,
        "blockade": blockade.map(|b| b.as_str()),
        "out": root_str,
        "steps": resolved,
    });
    written.push(write_json(&root.join(RESOLVED_FILE), &record)?);
    written.push(write_json(&state_path, &serde_json::to_value(&state)?)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(id: &str, inputs: &[&str], outputs: &[&str]) -> Step {
        Step {
            id: id.into(),
            args: vec!["fit".into()],
            dir: None,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn orders_by_dependency() {
        let steps = vec![
            step("fit", &["b/curve.csv"], &["fit/fits.json"]),
            step("synth", &[], &["a/high.rkf"]),
            step("extract", &["a/high.rkf"], &["b/curve.csv"]),
        ];
        let order = order_steps(&steps).unwrap();
        let ids: Vec<&str> = order.iter().map(|&i| steps[i].id.as_str()).collect();
        assert_eq!(ids, ["synth", "extract", "fit"]);
    }

    #[test]
    fn rejects_cycles_and_duplicates() {
        let cyc = vec![step("a", &["y"], &["x"]), step("b", &["x"], &["y"])];
        assert!(order_steps(&cyc).is_err());
        let dup = vec![step("a", &[], &["x"]), step("b", &[], &["x"])];
        assert!(order_steps(&dup).is_err());
        let same = vec![step("a", &[], &[]), step("a", &[], &[])];
        assert!(order_steps(&same).is_err());
    }

    #[test]
    fn global_flags_are_rejected_per_step() {
        let mut s = step("a", &[], &[]);
        s.args = vec!["synth".into(), "--seed=3".into()];
        assert!(validate_step(&s).is_err());
        s.args = vec!["pipeline".into()];
        assert!(validate_step(&s).is_err());
    }
}
