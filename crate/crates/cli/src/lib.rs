//! Batch front-end of `becsim-core`: validated JSON run configs, figure
//! presets, parallel parameter scans and deterministic CSV/JSON output.

pub mod config;
pub mod presets;
pub mod run;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{validate, ConfigError, Mode, Resolved, RunConfig, Violation};
pub use presets::{preset, UnknownPreset, PRESETS};

pub const DEFAULT_OUT: &str = "becsim_out";

/// What to run, before validation.
#[derive(Debug, Clone, Default)]
pub struct Request {
    pub config: Option<RunConfig>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
}

/// Expand and validate a request. Violations of all runs are reported
/// together, prefixed with the run label when there is more than one run.
pub fn plan(mode: Mode, request: &Request) -> Result<Vec<Resolved>> {
    let mut configs = match (&request.preset, &request.config) {
        (Some(_), Some(_)) => anyhow::bail!("give either --preset or --config, not both"),
        (Some(name), None) => {
            let runs = preset(name)?;
            if mode == Mode::Preset {
                runs
            } else {
                let kept: Vec<RunConfig> = runs.into_iter().filter(|r| r.mode == Some(mode)).collect();
                if kept.is_empty() {
                    anyhow::bail!("preset {name} has no {mode} runs");
                }
                kept
            }
        }
        (None, Some(c)) if mode != Mode::Preset => vec![c.clone()],
        (None, _) => match mode {
            Mode::Preset => anyhow::bail!("mode preset needs --preset NAME (one of {})", PRESETS.join(", ")),
            _ => anyhow::bail!("mode {mode} needs --config FILE or --preset NAME"),
        },
    };
    if let Some(seed) = request.seed {
        for c in &mut configs {
            c.seed = Some(seed);
        }
    }
    let many = configs.len() > 1;
    let mut violations = Vec::new();
    let mut resolved = Vec::new();
    for c in &configs {
        let run_mode = if mode == Mode::Preset { c.mode.expect("presets set the mode") } else { mode };
        match validate(c, run_mode) {
            Ok(r) => resolved.push(r),
            Err(e) => violations.extend(e.violations.into_iter().map(|v| {
                if many {
                    let label = c.label.clone().unwrap_or_else(|| run_mode.name().into());
                    Violation::new(format!("{label}.{}", v.field), v.message)
                } else {
                    v
                }
            })),
        }
    }
    if !violations.is_empty() {
        return Err(ConfigError { violations }.into());
    }
    let mut labels: Vec<&str> = resolved.iter().map(|r| r.label.as_str()).collect();
    labels.sort_unstable();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        anyhow::bail!("duplicate run label {}", w[0]);
    }
    Ok(resolved)
}

/// Comment lines starting every data file.
pub fn header(r: &Resolved) -> String {
    let echo = serde_json::to_string(&r.config).expect("config serializes");
    format!(
        "# becsim {} run={} mode={} config_hash={}\n# config: {}\n",
        env!("CARGO_PKG_VERSION"),
        r.label,
        r.mode,
        r.hash,
        echo
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub label: String,
    pub mode: Mode,
    pub config_hash: String,
    pub files: Vec<String>,
    pub headline: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub versions: Value,
    pub wall_time_s: f64,
    pub headline: Value,
    pub runs: Vec<RunRecord>,
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Execute the runs in order and write their files plus `summary.json`
/// into `out`. Computation is parallel inside each run; files are written
/// by this single caller.
pub fn execute(mode: Mode, preset_name: Option<&str>, runs: &[Resolved], out: &Path) -> Result<Summary> {
    let start = Instant::now();
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
    let mut records = Vec::new();
    for r in runs {
        let output = run::execute(r).with_context(|| format!("run {}", r.label))?;
        let mut files = Vec::new();
        for a in &output.artifacts {
            let name = format!("{}_{}.csv", r.label, a.name);
            let path = out.join(&name);
            let mut f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            f.write_all(header(r).as_bytes())?;
            f.write_all(&a.body)?;
            files.push(name);
        }
        records.push(RunRecord {
            label: r.label.clone(),
            mode: r.mode,
            config_hash: r.hash.clone(),
            files,
            headline: output.headline,
        });
    }
    let config_hash = match runs {
        [single] => single.hash.clone(),
        _ => config::config_hash(&runs.iter().map(|r| &r.config).collect::<Vec<_>>()),
    };
    let headline = match records.as_slice() {
        [single] => single.headline.clone(),
        _ => Value::Object(records.iter().map(|r| (r.label.clone(), r.headline.clone())).collect()),
    };
    let summary = Summary {
        config_hash,
        mode,
        preset: preset_name.map(str::to_string),
        versions: json!({"becsim": env!("CARGO_PKG_VERSION"), "becsim-core": becsim_core::VERSION}),
        wall_time_s: start.elapsed().as_secs_f64(),
        headline,
        runs: records,
    };
    let path = out.join(SUMMARY_FILE);
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(summary)
}

/// Output directory: command line, then config, then the default.
pub fn output_dir(cli: Option<&Path>, config: Option<&RunConfig>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| config.and_then(|c| c.out.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}
