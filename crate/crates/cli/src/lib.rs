//! Batch front-end for `fracnoether`: scenario runs, refinement studies and
//! the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod manifest;
pub mod scenario;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{Kind, Scenario};
pub use error::CliError;
pub use manifest::RunManifest;
pub use scenario::{prepare, Artifact, Overrides, Prepared, StudyTable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `--out`, then the scenario's `out` key (relative to the scenario file),
/// then `out/<file stem>`.
pub fn output_dir(scenario_file: &Path, scenario: &Scenario, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    if let Some(o) = &scenario.out {
        return scenario_file.parent().unwrap_or(Path::new(".")).join(o);
    }
    let stem = scenario_file.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
    Path::new("out").join(stem)
}

fn finish(dir: &Path, scenario: &Scenario, artifacts: &[Artifact], started: Instant) -> Result<RunManifest, CliError> {
    let files = manifest::write_artifacts(dir, artifacts)?;
    let m = RunManifest {
        scenario: scenario.echo(),
        version: VERSION.to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        files,
    };
    manifest::write_manifest(dir, &m)?;
    Ok(m)
}

/// Runs a scenario file, writing its CSVs and `manifest.json`.
pub fn run(scenario_file: &Path, out: Option<&Path>, ov: &Overrides) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let scenario = Scenario::load(scenario_file)?;
    let prepared = prepare(&scenario, ov)?;
    let artifacts = prepared.run()?;
    finish(&output_dir(scenario_file, &scenario, out), &scenario, &artifacts, started)
}

/// Re-runs a scenario at each grid size and writes `study.csv`.
pub fn study(scenario_file: &Path, grids: &[usize], out: Option<&Path>, ov: &Overrides) -> Result<(StudyTable, RunManifest), CliError> {
    let started = Instant::now();
    let scenario = Scenario::load(scenario_file)?;
    let prepared = prepare(&scenario, ov)?;
    let table = prepared.study(grids)?;
    let artifacts = vec![table.artifact("study.csv")?];
    let m = finish(&output_dir(scenario_file, &scenario, out), &scenario, &artifacts, started)?;
    Ok((table, m))
}
