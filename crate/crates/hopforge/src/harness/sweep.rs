//! Distance sweeps: one scheme evaluated over a grid of BS-user distances
//! with independent channel draws per grid point.

use std::fs::File;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scheme};
use crate::baselines::{alternating_opt, random_phase_baseline, zf_precoder};
use crate::channel::generate_channels;
use crate::ddpg::{train_on_channel, TrainOptions};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, tags};
use crate::signal::{stack_rows, sum_rate, sum_rate_from_rows, NoiseParams};

/// One sweep measurement: scheme performance on one channel draw at one
/// distance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub distance_m: f64,
    pub scheme: String,
    pub draw: usize,
    pub seed: u64,
    pub sum_rate_bps_hz: f64,
    pub throughput_bps: f64,
    pub wall_time_s: f64,
}

/// Runs the configured scheme at every (distance, draw) cell.
///
/// Cell seeds derive from the master seed and the cell coordinates, so any
/// cell can be reproduced in isolation; rows come out in (distance, draw)
/// order regardless of execution details.
pub fn run_distance_sweep(cfg: &ExperimentConfig, master_seed: u64) -> Result<Vec<SweepCell>> {
    cfg.validate()?;
    let noise = NoiseParams::new(cfg.phys.noise_variance())?;
    let label = cfg.experiment.scheme.label(cfg.experiment.drl_hops);
    let mut cells = Vec::with_capacity(
        cfg.experiment.distance_grid_m.len() * cfg.experiment.num_channel_draws,
    );
    for (d_idx, &distance) in cfg.experiment.distance_grid_m.iter().enumerate() {
        let base_topo = cfg.topology_at_distance(distance);
        let scheme_topo = match cfg.experiment.scheme {
            Scheme::NoRisZf => base_topo.with_hops(0)?,
            Scheme::SingleHopAltopt => base_topo.with_hops(1)?,
            Scheme::Drl => base_topo.with_hops(cfg.experiment.drl_hops)?,
            Scheme::RandomPhase => base_topo,
        };
        for draw in 0..cfg.experiment.num_channel_draws {
            let cell_seed =
                derive_seed(master_seed, &[tags::SWEEP_CELL, d_idx as u64, draw as u64]);
            let started = Instant::now();
            let mut rng = rng_from_seed(cell_seed);
            let chan = generate_channels(&scheme_topo, &cfg.phys, &mut rng)?;
            let rate = match cfg.experiment.scheme {
                Scheme::NoRisZf => {
                    let rows = chan.direct.clone();
                    let prec = zf_precoder(&stack_rows(&rows), cfg.experiment.transmit_power_w)?;
                    sum_rate_from_rows(&rows, &prec, &noise)
                }
                Scheme::RandomPhase => {
                    let (_, _, rate) = random_phase_baseline(
                        &chan,
                        cfg.experiment.transmit_power_w,
                        &noise,
                        &mut rng,
                        cfg.experiment.random_phase_draws,
                    )?;
                    rate
                }
                Scheme::SingleHopAltopt => {
                    let out = alternating_opt(
                        &chan,
                        cfg.experiment.transmit_power_w,
                        &noise,
                        &cfg.altopt,
                    )?;
                    *out.trace.last().expect("trace is nonempty")
                }
                Scheme::Drl => {
                    let opts = TrainOptions { redraw_each_episode: false, ..cfg.train.clone() };
                    let out = train_on_channel(
                        &chan,
                        cfg.experiment.transmit_power_w,
                        &noise,
                        &cfg.hyper,
                        &opts,
                        &mut rng,
                    )?;
                    // Report the clean sum rate of the best action, not the
                    // (possibly penalty-shaped) reward.
                    sum_rate(&chan, &out.best_phases, &out.best_precoder, &noise)?
                }
            };
            let wall_time_s = if cfg.experiment.record_wall_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            };
            cells.push(SweepCell {
                distance_m: distance,
                scheme: label.clone(),
                draw,
                seed: cell_seed,
                sum_rate_bps_hz: rate,
                throughput_bps: rate * cfg.phys.bandwidth_hz,
                wall_time_s,
            });
        }
    }
    Ok(cells)
}

/// Writes sweep cells as CSV with a provenance header line
/// `# config_sha256=<hash> seed=<seed>`.
pub fn write_sweep_csv(
    path: &Path,
    cells: &[SweepCell],
    config_hash: &str,
    seed: u64,
) -> Result<()> {
    let mut file = File::create(path)?;
    writeln!(file, "# config_sha256={config_hash} seed={seed}")?;
    let mut writer = csv::Writer::from_writer(file);
    for cell in cells {
        writer.serialize(cell)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a sweep CSV produced by [`write_sweep_csv`], skipping the
/// provenance line.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepCell>> {
    let text = std::fs::read_to_string(path)?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut cells = Vec::new();
    for row in reader.deserialize() {
        let cell: SweepCell = row?;
        cells.push(cell);
    }
    if cells.is_empty() {
        return Err(Error::Config(format!("{} contains no sweep rows", path.display())));
    }
    Ok(cells)
}
