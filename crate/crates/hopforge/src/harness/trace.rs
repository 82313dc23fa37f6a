//! Per-step reward traces of DRL runs across a grid of transmit powers.

use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scheme};
use crate::ddpg::{train, EnvSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, tags};

/// One step of one P_t run: instant reward plus the running average over
/// all steps so far in that run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub episode: usize,
    pub step: usize,
    pub pt_watt: f64,
    pub reward: f64,
    pub avg_reward: f64,
    pub critic_loss: f64,
    pub actor_objective: f64,
    pub lr_c: f64,
    pub lr_a: f64,
    pub noise_std: f64,
}

/// Trains one agent per configured transmit power and logs every step.
/// Each P_t run gets its own derived seed.
pub fn run_reward_trace(cfg: &ExperimentConfig, master_seed: u64) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    if cfg.experiment.scheme != Scheme::Drl {
        return Err(Error::Config(format!(
            "trace requires scheme = \"drl\", got {}",
            cfg.experiment.scheme.label(cfg.experiment.drl_hops)
        )));
    }
    let topology = cfg.topology.with_hops(cfg.experiment.drl_hops)?;
    let mut rows = Vec::new();
    for (p_idx, &pt) in cfg.experiment.pt_grid_w.iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(master_seed, &[tags::TRACE_RUN, p_idx as u64]));
        let env = EnvSpec { topology: topology.clone(), phys: cfg.phys.clone(), transmit_power_w: pt };
        let out = train(&env, &cfg.hyper, &cfg.train, &mut rng)?;
        let mut running_sum = 0.0;
        for (i, rec) in out.records.iter().enumerate() {
            running_sum += rec.reward;
            rows.push(TraceRow {
                episode: rec.episode,
                step: rec.step,
                pt_watt: pt,
                reward: rec.reward,
                avg_reward: running_sum / (i + 1) as f64,
                critic_loss: rec.critic_loss,
                actor_objective: rec.actor_objective,
                lr_c: rec.lr_c,
                lr_a: rec.lr_a,
                noise_std: rec.noise_std,
            });
        }
    }
    Ok(rows)
}

/// Writes trace rows as CSV with the provenance header line.
pub fn write_trace_csv(path: &Path, rows: &[TraceRow], config_hash: &str, seed: u64) -> Result<()> {
    let mut file = File::create(path)?;
    writeln!(file, "# config_sha256={config_hash} seed={seed}")?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}
