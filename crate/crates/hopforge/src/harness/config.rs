//! Experiment configuration: TOML files with strict schemas, dotted-path
//! overrides, seed resolution, and content hashing for output provenance.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::AltOptSettings;
use crate::channel::{ThzPhysParams, Topology};
use crate::ddpg::{DdpgHyper, TrainOptions};
use crate::error::{Error, Result};

/// Fallback source for the master seed when neither the CLI flag nor the
/// config file provides one.
pub const SEED_ENV_VAR: &str = "RIS_HOPFORGE_SEED";

/// Which beamforming scheme a run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Full digital zero-forcing on the direct channels, no RIS.
    NoRisZf,
    /// Best of N random phase configurations, each with zero-forcing.
    RandomPhase,
    /// Alternating optimization on a single-hop chain.
    SingleHopAltopt,
    /// DDPG agent over `drl_hops` RIS hops.
    Drl,
}

impl Scheme {
    /// Label used in CSV output; DRL carries its hop count.
    pub fn label(&self, drl_hops: usize) -> String {
        match self {
            Scheme::NoRisZf => "no-ris-zf".to_string(),
            Scheme::RandomPhase => "random-phase".to_string(),
            Scheme::SingleHopAltopt => "single-hop-altopt".to_string(),
            Scheme::Drl => format!("drl-i{drl_hops}"),
        }
    }

    pub fn parse(name: &str) -> Result<Scheme> {
        match name {
            "no-ris-zf" => Ok(Scheme::NoRisZf),
            "random-phase" => Ok(Scheme::RandomPhase),
            "single-hop-altopt" => Ok(Scheme::SingleHopAltopt),
            "drl" => Ok(Scheme::Drl),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected no-ris-zf, random-phase, single-hop-altopt, or drl)"
            ))),
        }
    }
}

/// The `[experiment]` section: what to run and where to put it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub scheme: Scheme,
    /// Hop count used by the DRL scheme (prefix of the configured chain).
    #[serde(default = "default_drl_hops")]
    pub drl_hops: usize,
    pub transmit_power_w: f64,
    /// BS-user distances of the sweep, m.
    pub distance_grid_m: Vec<f64>,
    /// Independent channel draws per grid distance.
    pub num_channel_draws: usize,
    /// Master seed; optional here because the CLI flag and the environment
    /// variable can supply it.
    #[serde(default)]
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// Search budget of the random-phase scheme.
    #[serde(default = "default_random_phase_draws")]
    pub random_phase_draws: usize,
    /// Transmit powers evaluated by the reward trace.
    #[serde(default = "default_pt_grid")]
    pub pt_grid_w: Vec<f64>,
    /// Record measured per-cell wall time in the sweep CSV. Off by default
    /// because timing breaks byte-for-byte reproducibility; the column then
    /// reads 0.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_drl_hops() -> usize {
    1
}

fn default_random_phase_draws() -> usize {
    100
}

fn default_pt_grid() -> Vec<f64> {
    vec![5.0, 20.0, 30.0]
}

/// A full experiment description, loadable from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: Topology,
    pub phys: ThzPhysParams,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub hyper: DdpgHyper,
    #[serde(default)]
    pub train: TrainOptions,
    #[serde(default)]
    pub altopt: AltOptSettings,
}

impl ExperimentConfig {
    /// Parses a config, applying `key=value` overrides (dotted paths into
    /// the TOML tree) before deserialization. Unknown keys anywhere are hard
    /// errors. Returns the config together with its canonical TOML text.
    pub fn load(path: &Path, overrides: &[String]) -> Result<(Self, String)> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    pub fn from_toml(text: &str, overrides: &[String]) -> Result<(Self, String)> {
        let mut value: toml::Value = text
            .parse()
            .map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: ExperimentConfig = value
            .clone()
            .try_into()
            .map_err(|e| Error::Config(format!("config error: {e}")))?;
        cfg.validate()?;
        let canonical = toml::to_string(&cfg)
            .map_err(|e| Error::Config(format!("config re-serialization failed: {e}")))?;
        Ok((cfg, canonical))
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.phys.validate()?;
        self.hyper.validate()?;
        self.altopt.validate()?;
        let e = &self.experiment;
        if e.distance_grid_m.is_empty() {
            return Err(Error::Config("experiment.distance_grid_m must be nonempty".into()));
        }
        if e.distance_grid_m.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::Config("experiment.distance_grid_m entries must be positive".into()));
        }
        if e.num_channel_draws == 0 {
            return Err(Error::Config("experiment.num_channel_draws must be >= 1".into()));
        }
        if !(e.transmit_power_w > 0.0) {
            return Err(Error::Config("experiment.transmit_power_w must be positive".into()));
        }
        if e.random_phase_draws == 0 {
            return Err(Error::Config("experiment.random_phase_draws must be >= 1".into()));
        }
        if e.pt_grid_w.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Config("experiment.pt_grid_w entries must be positive".into()));
        }
        match e.scheme {
            Scheme::SingleHopAltopt => {
                if self.topology.num_hops() < 1 {
                    return Err(Error::Config(
                        "single-hop-altopt needs at least one configured RIS".into(),
                    ));
                }
            }
            Scheme::Drl => {
                if e.drl_hops > self.topology.num_hops() {
                    return Err(Error::Config(format!(
                        "experiment.drl_hops = {} exceeds the {} configured RISs",
                        e.drl_hops,
                        self.topology.num_hops()
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML text, embedded in output headers so a
    /// row's inputs are recoverable.
    pub fn hash_of(canonical: &str) -> String {
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// The topology with users moved to sweep distance `d`: each user keeps
    /// its configured lateral (y, z) offsets and its x coordinate becomes
    /// `bs_x + d`.
    pub fn topology_at_distance(&self, d: f64) -> Topology {
        let mut t = self.topology.clone();
        for p in &mut t.user_positions {
            p[0] = t.bs_position[0] + d;
        }
        t
    }
}

/// Applies one `dotted.path=value` override into a parsed TOML tree. The
/// value is parsed as a TOML literal, falling back to a plain string, so
/// `hyper.episodes=10`, `experiment.scheme="drl"`, and
/// `experiment.scheme=drl` all work.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw_value) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not of the form key=value")))?;
    let parsed: toml::Value = match format!("v = {raw_value}").parse::<toml::Table>() {
        Ok(table) => table["v"].clone(),
        Err(_) => toml::Value::String(raw_value.to_string()),
    };
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override path '{path}' has empty segments")));
    }
    for part in &parts[..parts.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path '{path}': '{part}' is not a table")))?
            .entry((*part).to_string())
            .or_insert(toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("override path '{path}' does not end in a table")))?;
    table.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

/// Seed precedence: CLI flag, then config file, then the environment
/// variable.
pub fn resolve_seed(cli: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = cli {
        return Ok(s);
    }
    if let Some(s) = config {
        return Ok(s);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text.trim().parse::<u64>().map_err(|_| {
            Error::Config(format!("{SEED_ENV_VAR}='{text}' is not a valid 64-bit seed"))
        }),
        Err(_) => Err(Error::Config(format!(
            "no seed given: pass --seed, set experiment.seed, or export {SEED_ENV_VAR}"
        ))),
    }
}
