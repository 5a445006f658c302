use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ganlab::divergences::{catalog_dump, CatalogId, ConvexFunction};
use ganlab::nn::{snapshot_csv, MlpParams};
use ganlab::trainers::{train, train_cyclegan, TrainReport, DOCUMENTED_COLUMNS};
use ganlab::vae::train_vae;
use ganlab::verify::{Check, Suite};
use ganlab::Error;

use crate::config::{Experiment, Job};

/// How a job ended, ordered by severity; the process exits with the worst.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Ok,
    /// A property suite ran but some invariant failed, or writing failed.
    Failed(String),
    Invalid(String),
    Aborted(String),
}

impl Outcome {
    pub fn code(&self) -> u8 {
        match self {
            Outcome::Ok => 0,
            Outcome::Failed(_) => 1,
            Outcome::Invalid(_) => 2,
            Outcome::Aborted(_) => 3,
        }
    }
}

/// Everything a finished job writes, keyed by file name.
struct Artifacts(Vec<(&'static str, String)>);

fn training_artifacts(report: &TrainReport) -> Result<Artifacts, Outcome> {
    let header = report.header();
    if let Some(col) = header
        .iter()
        .find(|c| !DOCUMENTED_COLUMNS.contains(&c.as_str()))
    {
        return Err(Outcome::Invalid(format!(
            "report column {col:?} is not documented"
        )));
    }
    let nets: Vec<(&str, &MlpParams)> = report
        .final_params
        .iter()
        .map(|(t, p)| (t.as_str(), p))
        .collect();
    Ok(Artifacts(vec![
        ("report.csv", report.to_csv()),
        ("samples_final.csv", report.samples_csv()),
        ("checkpoint.csv", snapshot_csv(&nets)),
    ]))
}

fn checks_csv(results: &[(Suite, Vec<Check>)]) -> String {
    let mut out = String::from("suite,invariant,measured,tolerance,passed\n");
    for (suite, checks) in results {
        for c in checks {
            out.push_str(&format!(
                "{},{},{:?},{:?},{}\n",
                suite.name(),
                c.name,
                c.measured,
                c.tolerance,
                c.passed()
            ));
        }
    }
    out
}

fn run_suites(suites: &[Suite]) -> Result<(Vec<(Suite, Vec<Check>)>, usize), Outcome> {
    let mut results = Vec::new();
    let mut failed = 0;
    for &s in suites {
        let checks = s
            .run()
            .map_err(|e| Outcome::Failed(format!("{} suite: {e}", s.name())))?;
        failed += checks.iter().filter(|c| !c.passed()).count();
        results.push((s, checks));
    }
    Ok((results, failed))
}

fn classify(e: Error) -> Outcome {
    match e {
        Error::NumericalAbort { iteration, reason, diagnostic } => Outcome::Aborted(format!(
            "numerical abort at iteration {iteration}: {reason}\nparameters at the abort:\n{diagnostic}"
        )),
        Error::InvalidConfig(m) => Outcome::Invalid(m),
        other => Outcome::Failed(other.to_string()),
    }
}

/// Runs the job and returns its artifacts plus a one-line summary.
fn execute(job: &Job) -> Result<(Artifacts, String, Outcome), Outcome> {
    let summary = |r: &TrainReport| {
        let last = r.last();
        let w1 = last
            .w1_1d
            .map(|w| format!(", w1_1d {w:.4}"))
            .unwrap_or_default();
        format!(
            "{} rows, final hist_js {:.4}{w1}",
            r.records.len(),
            last.hist_js
        )
    };
    match &job.experiment {
        Experiment::Gan(cfg) => {
            let report = train(cfg).map_err(classify)?;
            Ok((training_artifacts(&report)?, summary(&report), Outcome::Ok))
        }
        Experiment::Cyclegan(cfg) => {
            let report = train_cyclegan(cfg).map_err(classify)?;
            Ok((training_artifacts(&report)?, summary(&report), Outcome::Ok))
        }
        Experiment::Vae(cfg) => {
            let (report, _) = train_vae(cfg).map_err(classify)?;
            Ok((training_artifacts(&report)?, summary(&report), Outcome::Ok))
        }
        Experiment::DivergenceSuite(cfg) => {
            let mut suites = vec![Suite::Divergences];
            if cfg.transport {
                suites.push(Suite::Transport);
            }
            suite_artifacts(&suites, None)
        }
        Experiment::ConjugateSuite(cfg) => {
            let entries: Vec<ConvexFunction> = CatalogId::all_default()
                .into_iter()
                .map(ConvexFunction::from)
                .collect();
            suite_artifacts(
                &[Suite::Conjugates],
                Some(catalog_dump(&entries, cfg.grid_points)),
            )
        }
    }
}

fn suite_artifacts(
    suites: &[Suite],
    catalog: Option<String>,
) -> Result<(Artifacts, String, Outcome), Outcome> {
    let (results, failed) = run_suites(suites)?;
    let total: usize = results.iter().map(|(_, c)| c.len()).sum();
    let mut files = vec![("report.csv", checks_csv(&results))];
    if let Some(c) = catalog {
        files.push(("catalog.csv", c));
    }
    let outcome = if failed == 0 {
        Outcome::Ok
    } else {
        Outcome::Failed(format!("{failed} of {total} checks failed"))
    };
    Ok((
        Artifacts(files),
        format!("{} of {total} checks passed", total - failed),
        outcome,
    ))
}

/// A directory is only replaced when it holds an earlier run.
fn clear_previous(dir: &Path) -> io::Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    if dir.join("config_resolved.json").is_file() {
        return fs::remove_dir_all(dir);
    }
    Err(io::Error::new(
        io::ErrorKind::AlreadyExists,
        format!("{} exists and does not hold a previous run", dir.display()),
    ))
}

fn write_all(dir: &Path, job: &Job, files: &Artifacts) -> io::Result<()> {
    let parent = dir.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let name = dir
        .file_name()
        .expect("run directories are named")
        .to_string_lossy();
    let staging = parent.join(format!(".{name}.partial"));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir(&staging)?;
    let written = (|| {
        for (file, text) in &files.0 {
            fs::write(staging.join(file), text)?;
        }
        fs::write(staging.join("config_resolved.json"), job.resolved_json())?;
        clear_previous(dir)?;
        fs::rename(&staging, dir)
    })();
    if written.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    written
}

pub struct JobResult {
    pub name: String,
    pub dir: PathBuf,
    pub outcome: Outcome,
    pub summary: String,
}

/// Runs one job and writes its directory under `root`. Nothing is written
/// when the run is invalid or aborts.
pub fn run_job(job: &Job, root: &Path) -> JobResult {
    let dir = root.join(&job.name);
    let (outcome, summary) = match execute(job) {
        Err(o) => (o, String::new()),
        Ok((files, summary, outcome)) => match write_all(&dir, job, &files) {
            Ok(()) => (outcome, summary),
            Err(e) => (
                Outcome::Failed(format!("writing {}: {e}", dir.display())),
                summary,
            ),
        },
    };
    JobResult {
        name: job.name.clone(),
        dir,
        outcome,
        summary,
    }
}
