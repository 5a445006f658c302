//! Experiment files: parsing, default materialization and validation.
//!
//! An experiment file is a JSON object
//!
//! ```json
//! { "kind": "gan", "name": "mix", "config": { "target": ..., "seed": 1 } }
//! ```
//!
//! or, for several runs, `"runs": [{ "name": ..., "config": ... }]` in place
//! of `config`; a run may carry its own `kind`. Kind-specific configs may
//! omit any field that has a desk default; the defaults are filled in before
//! validation and written to `config_resolved.json`.

use std::fmt;
use std::path::Path;

use ganlab::distributions::TargetDist;
use ganlab::trainers::{CycleGanConfig, GanConfig, GanVariant};
use ganlab::vae::VaeConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Gan,
    Fgan,
    Wgan,
    Cyclegan,
    Vae,
    DivergenceSuite,
    ConjugateSuite,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    kind: Option<Kind>,
    name: Option<String>,
    config: Value,
}

#[derive(Debug, Deserialize)]
struct RawFile {
    kind: Option<Kind>,
    name: Option<String>,
    output: Option<String>,
    log_interval: Option<usize>,
    config: Option<Value>,
    runs: Option<Vec<RawRun>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceSuiteConfig {
    /// Also run the transport checks.
    #[serde(default = "yes")]
    pub transport: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateSuiteConfig {
    /// Grid points per catalog entry in `catalog.csv`.
    #[serde(default = "d_grid")]
    pub grid_points: usize,
}

fn yes() -> bool {
    true
}
fn d_grid() -> usize {
    50
}

/// A fully resolved experiment of one kind.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Experiment {
    Gan(GanConfig),
    Cyclegan(CycleGanConfig),
    Vae(VaeConfig),
    DivergenceSuite(DivergenceSuiteConfig),
    ConjugateSuite(ConjugateSuiteConfig),
}

/// One run: where it writes and what it does.
#[derive(Clone, Debug)]
pub struct Job {
    pub kind: Kind,
    pub name: String,
    pub output: Option<String>,
    pub experiment: Experiment,
}

impl Job {
    /// The single-run experiment file that reproduces this job.
    pub fn resolved_json(&self) -> String {
        let file = serde_json::json!({
            "kind": self.kind,
            "name": self.name,
            "config": self.experiment,
        });
        let mut s = serde_json::to_string_pretty(&file).expect("configs serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Deserializes `value`, failing on any field the target type does not know.
fn strict<T: DeserializeOwned>(value: Value, what: &str) -> Result<T, ConfigError> {
    let mut unknown = Vec::new();
    let parsed: Result<T, _> =
        serde_ignored::deserialize(value, |path| unknown.push(path.to_string()));
    match parsed {
        Err(e) => err(format!("{what}: {e}")),
        Ok(_) if !unknown.is_empty() => {
            err(format!("{what}: unknown fields: {}", unknown.join(", ")))
        }
        Ok(v) => Ok(v),
    }
}

fn object(value: Value, what: &str) -> Result<Map<String, Value>, ConfigError> {
    match value {
        Value::Object(m) => Ok(m),
        other => err(format!("{what}: expected a JSON object, got {other}")),
    }
}

fn required<T: DeserializeOwned>(
    m: &Map<String, Value>,
    key: &str,
    what: &str,
) -> Result<T, ConfigError> {
    match m.get(key) {
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| ConfigError(format!("{what}: field `{key}`: {e}"))),
        None => err(format!("{what}: missing field `{key}`")),
    }
}

/// User fields win over the defaults, key by key.
fn overlay(defaults: impl Serialize, user: Map<String, Value>) -> Value {
    let mut base = match serde_json::to_value(defaults).expect("defaults serialize") {
        Value::Object(m) => m,
        _ => unreachable!("configs serialize to objects"),
    };
    base.extend(user);
    Value::Object(base)
}

fn default_variant(kind: Kind, what: &str) -> Result<GanVariant, ConfigError> {
    match kind {
        Kind::Gan => Ok(GanVariant::Vanilla),
        Kind::Wgan => Ok(GanVariant::Wgan { clip: 0.01 }),
        _ => err(format!(
            "{what}: an fgan config needs a `variant` naming its divergence"
        )),
    }
}

fn variant_matches(kind: Kind, v: &GanVariant) -> bool {
    matches!(
        (kind, v),
        (Kind::Gan, GanVariant::Vanilla | GanVariant::VanillaLogd)
            | (Kind::Fgan, GanVariant::Fgan { .. })
            | (Kind::Wgan, GanVariant::Wgan { .. })
    )
}

fn resolve_one(
    kind: Kind,
    config: Value,
    log_interval: Option<usize>,
    seed_override: Option<u64>,
    what: &str,
) -> Result<Experiment, ConfigError> {
    let mut user = object(config, what)?;
    let seeded = matches!(
        kind,
        Kind::Gan | Kind::Fgan | Kind::Wgan | Kind::Cyclegan | Kind::Vae
    );
    if seeded {
        if let Some(s) = seed_override {
            user.insert("seed".into(), s.into());
        }
        if let Some(l) = log_interval {
            user.insert("log_interval".into(), l.into());
        }
    }
    let invalid = |e: ganlab::Error| ConfigError(format!("{what}: {e}"));
    let exp = match kind {
        Kind::Gan | Kind::Fgan | Kind::Wgan => {
            let variant = match user.get("variant") {
                Some(_) => required(&user, "variant", what)?,
                None => default_variant(kind, what)?,
            };
            if !variant_matches(kind, &variant) {
                return err(format!(
                    "{what}: variant {} does not belong to kind {kind:?}",
                    variant.label()
                ));
            }
            let target: TargetDist = required(&user, "target", what)?;
            let seed: u64 = required(&user, "seed", what)?;
            let cfg: GanConfig = strict(
                overlay(GanConfig::desk_default(variant, target, seed), user),
                what,
            )?;
            cfg.validate().map_err(invalid)?;
            Experiment::Gan(cfg)
        }
        Kind::Cyclegan => {
            let x: TargetDist = required(&user, "domain_x", what)?;
            let y: TargetDist = required(&user, "domain_y", what)?;
            let seed: u64 = required(&user, "seed", what)?;
            let base = CycleGanConfig::desk_default(x, y, 10.0, seed);
            let cfg: CycleGanConfig = strict(overlay(base, user), what)?;
            cfg.validate().map_err(invalid)?;
            Experiment::Cyclegan(cfg)
        }
        Kind::Vae => {
            let target: TargetDist = required(&user, "target", what)?;
            let seed: u64 = required(&user, "seed", what)?;
            let latent = match user.remove("latent_dim") {
                Some(v) => serde_json::from_value(v)
                    .map_err(|e| ConfigError(format!("{what}: field `latent_dim`: {e}")))?,
                None => target.dim(),
            };
            let cfg: VaeConfig = strict(
                overlay(VaeConfig::desk_default(target, latent, seed), user),
                what,
            )?;
            cfg.validate().map_err(invalid)?;
            Experiment::Vae(cfg)
        }
        Kind::DivergenceSuite => Experiment::DivergenceSuite(strict(Value::Object(user), what)?),
        Kind::ConjugateSuite => {
            let cfg: ConjugateSuiteConfig = strict(Value::Object(user), what)?;
            if cfg.grid_points < 1 {
                return err(format!("{what}: grid_points must be at least 1"));
            }
            Experiment::ConjugateSuite(cfg)
        }
    };
    Ok(exp)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

/// Parses an experiment file into resolved jobs.
pub fn load(path: &Path, text: &str, seed_override: Option<u64>) -> Result<Vec<Job>, ConfigError> {
    let what = path.display().to_string();
    let value: Value =
        serde_json::from_str(text).map_err(|e| ConfigError(format!("{what}: {e}")))?;
    let raw: RawFile = strict(value, &what)?;
    let base = raw.name.clone().unwrap_or_else(|| stem(path));
    let runs = match (raw.config, raw.runs) {
        (Some(c), None) => vec![(raw.kind, base.clone(), c)],
        (None, Some(runs)) if !runs.is_empty() => runs
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    r.kind.or(raw.kind),
                    r.name.unwrap_or_else(|| format!("{base}_{i}")),
                    r.config,
                )
            })
            .collect(),
        (None, Some(_)) => return err(format!("{what}: `runs` is empty")),
        _ => return err(format!("{what}: give exactly one of `config` and `runs`")),
    };
    let mut names = std::collections::BTreeSet::new();
    let mut jobs = Vec::with_capacity(runs.len());
    for (kind, name, config) in runs {
        let Some(kind) = kind else {
            return err(format!("{what}: run {name:?} has no `kind`"));
        };
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return err(format!(
                "{what}: run name {name:?} is not a plain directory name"
            ));
        }
        if !names.insert(name.clone()) {
            return err(format!("{what}: duplicate run name {name:?}"));
        }
        let label = format!("{what} [{name}]");
        let experiment = resolve_one(kind, config, raw.log_interval, seed_override, &label)?;
        jobs.push(Job {
            kind,
            name,
            output: raw.output.clone(),
            experiment,
        });
    }
    Ok(jobs)
}
