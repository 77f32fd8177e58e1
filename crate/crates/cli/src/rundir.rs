//! Run directories: everything `simulate` writes and the analysis commands
//! read back.
//!
//! ```text
//! <run>/manifest.toml          outcome and the snapshot index
//! <run>/scenario.toml          the resolved scenario
//! <run>/steps.csv              step,t,l2,sup for every step
//! <run>/gamma.csv              Gamma-norm rows of every snapshot
//! <run>/snapshots/state-NNNNN.bin
//! <run>/snapshots/duhamel-NNNNN.bin   Duhamel part of the profile
//! ```
//!
//! Nothing time-dependent is recorded, so reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qdnls::solver::{read_state_file, write_state_file, Outcome, Sample, SolverConfig, StepRecord, Trajectory};
use qdnls::spectral::{Field, Spectrum, StateTriple};
use qdnls::vectorfield::{gamma_norm, GammaNormReport};
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::CliError;

const MANIFEST_FORMAT: u32 = 1;
const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: u32,
    pub name: String,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_t: Option<f64>,
    pub steps: usize,
    pub samples: Vec<SampleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub t: f64,
    pub state: String,
    pub duhamel: String,
}

fn outcome_time(o: &Outcome) -> Option<f64> {
    match *o {
        Outcome::Completed => None,
        Outcome::BlowUpSuspected { t } | Outcome::BoundaryContaminated { t } | Outcome::Stopped { t } => Some(t),
    }
}

fn outcome_from(label: &str, t: Option<f64>) -> Result<Outcome, CliError> {
    let t = || t.ok_or_else(|| CliError::Config(format!("manifest outcome {label:?} needs outcome_t")));
    Ok(match label {
        "completed" => Outcome::Completed,
        "blow-up-suspected" => Outcome::BlowUpSuspected { t: t()? },
        "boundary-contaminated" => Outcome::BoundaryContaminated { t: t()? },
        "stopped" => Outcome::Stopped { t: t()? },
        other => return Err(CliError::Config(format!("unknown outcome {other:?} in manifest"))),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn spectra_to_state(s: &[Spectrum; 3], t: f64) -> Result<StateTriple, CliError> {
    let fields: [Field; 3] = [s[0].to_field(), s[1].to_field(), s[2].to_field()];
    StateTriple::new(fields, t).map_err(|e| CliError::Config(e.to_string()))
}

/// Write a finished trajectory. Stale snapshot files from an earlier run in
/// the same directory are removed first.
pub fn write_run(dir: &Path, scenario: &Scenario, traj: &Trajectory) -> Result<Manifest, CliError> {
    let snaps = dir.join(SNAPSHOT_DIR);
    fs::create_dir_all(&snaps).map_err(|e| CliError::io(&snaps, e))?;
    for entry in fs::read_dir(&snaps).map_err(|e| CliError::io(&snaps, e))? {
        let path = entry.map_err(|e| CliError::io(&snaps, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if (name.starts_with("state-") || name.starts_with("duhamel-")) && name.ends_with(".bin") {
            fs::remove_file(&path).map_err(|e| CliError::io(&path, e))?;
        }
    }

    let mut samples = Vec::with_capacity(traj.samples.len());
    let mut gamma = format!("{}\n", GammaNormReport::CSV_HEADER);
    for (i, s) in traj.samples.iter().enumerate() {
        let state = format!("{SNAPSHOT_DIR}/state-{i:05}.bin");
        let duhamel = format!("{SNAPSHOT_DIR}/duhamel-{i:05}.bin");
        write_state_file(&dir.join(&state), &s.state).map_err(|e| CliError::io(&dir.join(&state), e))?;
        let d = spectra_to_state(&s.duhamel, s.state.t)?;
        write_state_file(&dir.join(&duhamel), &d).map_err(|e| CliError::io(&dir.join(&duhamel), e))?;
        gamma.push_str(&s.gamma.csv_rows());
        samples.push(SampleEntry { t: s.state.t, state, duhamel });
    }

    let mut steps = format!("{}\n", StepRecord::CSV_HEADER);
    for r in &traj.steps {
        let _ = writeln!(steps, "{}", r.csv_row());
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT,
        name: scenario.name.clone(),
        outcome: traj.outcome.label().into(),
        outcome_t: outcome_time(&traj.outcome),
        steps: traj.steps.len(),
        samples,
    };
    write_text(&dir.join("steps.csv"), &steps)?;
    write_text(&dir.join("gamma.csv"), &gamma)?;
    write_text(&dir.join("scenario.toml"), &scenario.to_toml())?;
    write_text(&dir.join("manifest.toml"), &toml::to_string(&manifest).expect("manifest serializes"))?;
    Ok(manifest)
}

/// A run read back from disk.
pub struct LoadedRun {
    pub dir: PathBuf,
    pub scenario: Scenario,
    pub config: SolverConfig,
    pub trajectory: Trajectory,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun, CliError> {
    let manifest_path = dir.join("manifest.toml");
    if !manifest_path.is_file() {
        return Err(CliError::MissingRun(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(CliError::Config(format!("{}: unsupported format {}", manifest_path.display(), manifest.format)));
    }
    let scenario = Scenario::load(&dir.join("scenario.toml"))?;
    let config = scenario.solver_config(dir)?;
    let grid = config.grid.build().map_err(|e| CliError::Config(e.to_string()))?;
    let read = |rel: &str| -> Result<StateTriple, CliError> {
        let path = dir.join(rel);
        read_state_file(&path, Some(&grid)).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    };
    let samples = manifest
        .samples
        .iter()
        .map(|entry| -> Result<Sample, CliError> {
            let state = read(&entry.state)?;
            let duhamel = read(&entry.duhamel)?.into_fields().map(|f| f.to_spectrum());
            let gamma = gamma_norm(&state, &config.masses, config.norm_order)
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(Sample { state, duhamel, gamma })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if samples.is_empty() {
        return Err(CliError::Config(format!("{}: no snapshots", manifest_path.display())));
    }
    let outcome = outcome_from(&manifest.outcome, manifest.outcome_t)?;
    let trajectory = Trajectory { samples, steps: Vec::new(), outcome };
    Ok(LoadedRun { dir: dir.to_path_buf(), scenario, config, trajectory })
}
