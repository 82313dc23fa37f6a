//! The episode/step training loop over the simulator environment, plus the
//! SVD and max-min action initializers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::agent::{Agent, DdpgHyper};
use super::buffer::Transition;
use super::{decode_action, encode_action, encode_state, reward, ProblemDims};
use crate::channel::{generate_channels, ChannelRealization, ThzPhysParams, Topology};
use crate::error::{Error, Result};
use crate::signal::{
    effective_channels, normalize_power, sinr_from_rows, stack_rows, NoiseParams, PhaseConfig,
    Precoder,
};

/// Which initializer seeds the per-episode starting action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    Svd,
    MaxMin,
}

/// Scenario-independent knobs of the training loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    /// Hidden width of the four networks; 0 means `max(256, action_dim)`.
    pub hidden_width: usize,
    /// Batch normalization between the hidden layers of all four networks.
    pub batchnorm: bool,
    /// Weight of the optional action-change penalty
    /// `-penalty_weight * ||a - a_prev||^2 / D_a`.
    pub penalty_weight: f64,
    /// Redraw channels at every episode start (the environment's default).
    /// When false the first draw is reused, which makes single-instance
    /// optimization runs.
    pub redraw_each_episode: bool,
    /// Starting-action initializer.
    pub init: InitScheme,
    /// Stop when the best reward improves by less than
    /// `convergence_rel_improvement` over this many consecutive episodes;
    /// 0 disables early stopping.
    pub convergence_window: usize,
    pub convergence_rel_improvement: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            hidden_width: 0,
            batchnorm: true,
            penalty_weight: 0.0,
            redraw_each_episode: true,
            init: InitScheme::Svd,
            convergence_window: 50,
            convergence_rel_improvement: 0.001,
        }
    }
}

/// The environment a training run interacts with.
#[derive(Debug, Clone)]
pub struct EnvSpec {
    pub topology: Topology,
    pub phys: ThzPhysParams,
    pub transmit_power_w: f64,
}

impl EnvSpec {
    pub fn noise(&self) -> Result<NoiseParams> {
        NoiseParams::new(self.phys.noise_variance())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub episode: usize,
    pub step: usize,
    pub reward: f64,
    pub critic_loss: f64,
    pub actor_objective: f64,
    pub lr_c: f64,
    pub lr_a: f64,
    pub noise_std: f64,
}

/// Result of a training run: the best feasible action observed, its reward,
/// and the full per-step log.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_precoder: Precoder,
    pub best_phases: PhaseConfig,
    pub best_reward: f64,
    pub records: Vec<StepRecord>,
    pub episodes_run: usize,
    pub agent: Agent,
}

/// Trains over `hyper.episodes` episodes with channels drawn from the
/// environment (fresh per episode unless `opts.redraw_each_episode` is
/// false).
pub fn train(
    env: &EnvSpec,
    hyper: &DdpgHyper,
    opts: &TrainOptions,
    rng: &mut ChaCha8Rng,
) -> Result<TrainOutcome> {
    env.topology.validate()?;
    env.phys.validate()?;
    let mut fixed: Option<ChannelRealization> = None;
    let noise = env.noise()?;
    train_core(
        |rng| {
            if opts.redraw_each_episode {
                generate_channels(&env.topology, &env.phys, rng)
            } else {
                if fixed.is_none() {
                    fixed = Some(generate_channels(&env.topology, &env.phys, rng)?);
                }
                Ok(fixed.as_ref().expect("populated above").clone())
            }
        },
        env.transmit_power_w,
        &noise,
        hyper,
        opts,
        rng,
    )
}

/// Trains against one fixed, caller-supplied channel realization. Sweep
/// cells use this so that every scheme sees the same draw.
pub fn train_on_channel(
    chan: &ChannelRealization,
    transmit_power_w: f64,
    noise: &NoiseParams,
    hyper: &DdpgHyper,
    opts: &TrainOptions,
    rng: &mut ChaCha8Rng,
) -> Result<TrainOutcome> {
    train_core(|_| Ok(chan.clone()), transmit_power_w, noise, hyper, opts, rng)
}

fn train_core<F>(
    mut next_channel: F,
    p_t: f64,
    noise: &NoiseParams,
    hyper: &DdpgHyper,
    opts: &TrainOptions,
    rng: &mut ChaCha8Rng,
) -> Result<TrainOutcome>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<ChannelRealization>,
{
    hyper.validate()?;
    let first_chan = next_channel(rng)?;
    let dims = ProblemDims::from_channel(&first_chan);
    let da = dims.action_dim();
    let hidden = if opts.hidden_width == 0 { da.max(256) } else { opts.hidden_width };
    let mut agent = Agent::new(dims.clone(), hidden, hyper.buffer_capacity, opts.batchnorm, rng)?;

    let mut best: Option<(Precoder, PhaseConfig, f64)> = None;
    let mut records = Vec::new();
    let mut lr_c = hyper.mu_c;
    let mut lr_a = hyper.mu_a;
    let mut noise_std = hyper.noise_std;
    let mut episodes_run = 0;
    let mut best_at_window_start = f64::NEG_INFINITY;
    let mut stagnant_episodes = 0;

    let mut chan = first_chan;
    for episode in 0..hyper.episodes {
        if episode > 0 {
            chan = next_channel(rng)?;
        }
        episodes_run += 1;

        let (init_prec, init_phi) = match opts.init {
            InitScheme::Svd => init_action_svd(&chan, p_t)?,
            InitScheme::MaxMin => init_action_maxmin(&chan, p_t, noise)?,
        };
        // The initializer's action is itself feasible and observed; it seeds
        // the incumbent so the returned best is never worse than it.
        let init_reward = reward(&chan, &init_phi, &init_prec, noise)?;
        if best.as_ref().map_or(true, |(_, _, r)| init_reward > *r) {
            best = Some((init_prec.clone(), init_phi.clone(), init_reward));
        }

        let mut state = encode_state(&init_prec, &init_phi, &chan)?;
        let mut prev_action = encode_action(&init_prec, &init_phi);

        for step in 0..hyper.steps_per_episode {
            let raw = agent.act(&state, noise_std, rng)?;
            let (action_used, prec, phi) = decode_with_resample(&raw, &dims, p_t, rng)?;
            #[cfg(debug_assertions)]
            {
                // Test builds verify feasibility of every emitted action.
                debug_assert!((prec.transmit_power() - p_t).abs() <= 1e-9 * p_t);
                for i in 0..phi.num_ris() {
                    debug_assert!(phi
                        .phases(i)
                        .iter()
                        .all(|p| (0.0..std::f64::consts::TAU).contains(p)));
                }
            }
            let base_reward = reward(&chan, &phi, &prec, noise)?;
            let r = if opts.penalty_weight > 0.0 {
                let diff = &action_used - &prev_action;
                base_reward - opts.penalty_weight * diff.norm_squared() / da as f64
            } else {
                base_reward
            };
            if !r.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite reward at episode {episode} step {step}: {r}"
                )));
            }
            if best.as_ref().map_or(true, |(_, _, br)| r > *br) {
                best = Some((prec.clone(), phi.clone(), r));
            }

            let next_state = encode_state(&prec, &phi, &chan)?;
            agent.remember(Transition {
                state: state.clone(),
                action: action_used.clone(),
                reward: r,
                next_state: next_state.clone(),
            });

            let (critic_loss, actor_objective) = match agent.train_step(hyper, lr_c, lr_a, rng) {
                Ok(Some(pair)) => pair,
                Ok(None) => (f64::NAN, f64::NAN),
                Err(Error::Diverged(msg)) => {
                    return Err(Error::Diverged(format!(
                        "episode {episode} step {step}: {msg}; lr_c={lr_c}, lr_a={lr_a}, noise_std={noise_std}, buffer={}",
                        agent.replay.len()
                    )));
                }
                Err(e) => return Err(e),
            };

            records.push(StepRecord {
                episode,
                step,
                reward: r,
                critic_loss,
                actor_objective,
                lr_c,
                lr_a,
                noise_std,
            });

            state = next_state;
            prev_action = action_used;
        }

        lr_c *= 1.0 - hyper.lambda_c;
        lr_a *= 1.0 - hyper.lambda_a;
        noise_std *= hyper.noise_decay;

        if opts.convergence_window > 0 {
            let current_best = best.as_ref().map_or(f64::NEG_INFINITY, |(_, _, r)| *r);
            let floor = best_at_window_start.abs().max(1e-12);
            if current_best - best_at_window_start
                <= opts.convergence_rel_improvement * floor
            {
                stagnant_episodes += 1;
            } else {
                stagnant_episodes = 0;
            }
            best_at_window_start = current_best;
            if stagnant_episodes >= opts.convergence_window {
                break;
            }
        }
    }

    let (best_precoder, best_phases, best_reward) =
        best.ok_or_else(|| Error::Diverged("no feasible action was ever produced".into()))?;
    Ok(TrainOutcome { best_precoder, best_phases, best_reward, records, episodes_run, agent })
}

/// Decodes a raw action; an all-zero precoder block is replaced by fresh
/// Gaussian raw values until decoding succeeds. Returns the action actually
/// credited to the agent (the one stored in the buffer).
fn decode_with_resample<R: Rng + ?Sized>(
    raw: &DVector<f64>,
    dims: &ProblemDims,
    p_t: f64,
    rng: &mut R,
) -> Result<(DVector<f64>, Precoder, PhaseConfig)> {
    match decode_action(raw, dims, p_t) {
        Ok((prec, phi)) => Ok((raw.clone(), prec, phi)),
        Err(Error::DegenerateInput(_)) => loop {
            let resampled = DVector::from_fn(dims.action_dim(), |_, _| {
                let n: f64 = rng.sample(StandardNormal);
                n
            });
            match decode_action(&resampled, dims, p_t) {
                Ok((prec, phi)) => return Ok((resampled, prec, phi)),
                Err(Error::DegenerateInput(_)) => continue,
                Err(e) => return Err(e),
            }
        },
        Err(e) => Err(e),
    }
}

/// SVD-based starting action: with zero phases as the provisional RIS
/// setting, the precoder takes the K dominant right-singular vectors of the
/// stacked effective channel, and each RIS element is then co-phased for
/// user 1 along the chain.
pub fn init_action_svd(chan: &ChannelRealization, p_t: f64) -> Result<(Precoder, PhaseConfig)> {
    let dims = ProblemDims::from_channel(chan);
    let m = dims.num_bs_antennas;
    let k = dims.num_users;
    let hops = dims.num_hops();

    let zero_phi = PhaseConfig::zeros(&dims.ris_sizes);
    let rows = effective_channels(chan, &zero_phi)?;
    let stacked = stack_rows(&rows);

    // Right-singular vectors of the K x M composite, dominant first.
    let svd = stacked.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Diverged("SVD failed to produce right-singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let directions: Vec<DVector<Complex64>> = order
        .iter()
        .take(k)
        .map(|&si| DVector::from_fn(m, |r, _| v_t[(si, r)].conj()))
        .collect();

    // The singular directions span the users jointly but carry no user
    // labels; match them greedily to users by received amplitude.
    let mut f_raw = DMatrix::<Complex64>::zeros(m, k);
    let mut user_done = vec![false; k];
    let mut dir_done = vec![false; directions.len()];
    for _ in 0..k.min(directions.len()) {
        let mut best = (0usize, 0usize, -1.0f64);
        for u in 0..k {
            if user_done[u] {
                continue;
            }
            for (j, dir) in directions.iter().enumerate() {
                if dir_done[j] {
                    continue;
                }
                let gain = (&rows[u] * dir)[(0, 0)].norm();
                if gain > best.2 {
                    best = (u, j, gain);
                }
            }
        }
        let (u, j, _) = best;
        user_done[u] = true;
        dir_done[j] = true;
        f_raw.set_column(u, &directions[j]);
    }
    // Rank-deficient composites can leave fewer than K directions; pad with
    // unit axes so the normalizer has something to scale.
    for col in 0..k {
        if f_raw.column(col).iter().all(|c| c.norm_sqr() == 0.0) {
            f_raw[(col % m, col)] = Complex64::new(1.0, 0.0);
        }
    }
    let prec = normalize_power(&f_raw, p_t)?;

    if hops == 0 {
        return Ok((prec, zero_phi));
    }

    // Co-phase each element's incident/outgoing product for user 1,
    // sequentially along the chain. `incoming` tracks the signal vector
    // arriving at RIS i (phases set so far applied); `outgoing[i]` is the
    // zero-phase back-chain from RIS i to user 1.
    let f1 = prec.column(0);
    let mut outgoing: Vec<DVector<Complex64>> = vec![DVector::zeros(0); hops];
    outgoing[hops - 1] = chan.ris_user[0].clone();
    for i in (0..hops - 1).rev() {
        // row = outgoing[i+1]^T H_{i+1}  (zero phases on later RISs).
        let row = outgoing[i + 1].transpose() * &chan.hops[i + 1];
        outgoing[i] = row.transpose();
    }

    let mut phases: Vec<DVector<f64>> = Vec::with_capacity(hops);
    let mut incoming = &chan.hops[0] * &f1;
    for i in 0..hops {
        let n = dims.ris_sizes[i];
        let mut phi_i = DVector::zeros(n);
        for e in 0..n {
            let product = outgoing[i][e] * incoming[e];
            if product.norm_sqr() > 0.0 {
                phi_i[e] = -product.arg();
            }
        }
        phases.push(phi_i.clone());
        if i + 1 < hops {
            let theta = phi_i.map(|p| Complex64::from_polar(1.0, p));
            let reflected = DVector::from_fn(n, |r, _| incoming[r] * theta[r]);
            incoming = &chan.hops[i + 1] * reflected;
        }
    }
    Ok((prec, PhaseConfig::new(phases)))
}

/// Max-min starting action: the SVD initializer followed by a fixed budget
/// of inverse-SINR power rebalancing across the precoder columns.
pub fn init_action_maxmin(
    chan: &ChannelRealization,
    p_t: f64,
    noise: &NoiseParams,
) -> Result<(Precoder, PhaseConfig)> {
    const REBALANCE_ITERS: usize = 10;
    let (mut prec, phi) = init_action_svd(chan, p_t)?;
    let k = prec.num_users();
    if k == 1 {
        return Ok((prec, phi));
    }
    let rows = effective_channels(chan, &phi)?;
    for _ in 0..REBALANCE_ITERS {
        let sinrs: Vec<f64> =
            (0..k).map(|u| sinr_from_rows(&rows, &prec, noise, u).max(1e-12)).collect();
        let powers: Vec<f64> =
            (0..k).map(|u| prec.matrix().column(u).iter().map(|c| c.norm_sqr()).sum()).collect();
        // Inverse-SINR loading: users starved of SINR get more power.
        let weights: Vec<f64> = powers.iter().zip(&sinrs).map(|(p, s)| p / s).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let mut f = prec.matrix().clone();
        for u in 0..k {
            let target = p_t * weights[u] / total;
            let scale = (target / powers[u].max(1e-300)).sqrt();
            for r in 0..f.nrows() {
                f[(r, u)] *= scale;
            }
        }
        prec = normalize_power(&f, p_t)?;
    }
    Ok((prec, phi))
}
