//! The actor-critic agent: four networks, two optimizers, a replay buffer,
//! and the state whitener.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, Transition};
use super::whiten::RunningWhitener;
use super::ProblemDims;
use crate::error::{Error, Result};
use crate::neural::{
    adam_step, AdamHyper, AdamState, Activation, DenseNet, Mode, NetConfig,
};

/// Hyperparameters of the learning algorithm. Defaults follow the reference
/// parameter table; exploration noise is additive Gaussian on the raw action
/// with a per-episode decay.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdpgHyper {
    /// Discount on the future reward.
    pub beta: f64,
    /// Critic learning rate.
    pub mu_c: f64,
    /// Actor learning rate.
    pub mu_a: f64,
    /// Critic target soft-update rate.
    pub tau_c: f64,
    /// Actor target soft-update rate.
    pub tau_a: f64,
    /// Per-episode critic learning-rate decay: `mu <- (1 - lambda) mu`.
    pub lambda_c: f64,
    /// Per-episode actor learning-rate decay.
    pub lambda_a: f64,
    /// Replay buffer capacity D.
    pub buffer_capacity: usize,
    /// Episode count Z.
    pub episodes: usize,
    /// Steps per episode T.
    pub steps_per_episode: usize,
    /// Minibatch size W.
    pub minibatch: usize,
    /// Target-sync interval U in steps.
    pub sync_every: usize,
    /// Exploration noise standard deviation on the raw action.
    pub noise_std: f64,
    /// Multiplicative per-episode decay of the exploration noise.
    pub noise_decay: f64,
}

impl Default for DdpgHyper {
    fn default() -> Self {
        Self {
            beta: 0.99,
            mu_c: 0.001,
            mu_a: 0.001,
            tau_c: 0.001,
            tau_a: 0.001,
            lambda_c: 0.005,
            lambda_a: 0.005,
            buffer_capacity: 100_000,
            episodes: 5_000,
            steps_per_episode: 20_000,
            minibatch: 16,
            sync_every: 1,
            noise_std: 0.1,
            noise_decay: 0.999,
        }
    }
}

impl DdpgHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) && self.beta != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "discount beta must be in [0, 1), got {}",
                self.beta
            )));
        }
        for (name, tau) in [("tau_c", self.tau_c), ("tau_a", self.tau_a)] {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must be in (0, 1], got {tau}")));
            }
        }
        for (name, v) in [("mu_c", self.mu_c), ("mu_a", self.mu_a)] {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("lambda_c", self.lambda_c), ("lambda_a", self.lambda_a)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} must be in [0, 1), got {v}")));
            }
        }
        if self.buffer_capacity == 0
            || self.episodes == 0
            || self.steps_per_episode == 0
            || self.minibatch == 0
            || self.sync_every == 0
        {
            return Err(Error::InvalidArgument("all counts must be >= 1".into()));
        }
        if self.minibatch > self.buffer_capacity {
            return Err(Error::InvalidArgument(format!(
                "minibatch ({}) must not exceed buffer capacity ({})",
                self.minibatch, self.buffer_capacity
            )));
        }
        if !(self.noise_std >= 0.0) || !(self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return Err(Error::InvalidArgument(
                "noise_std must be >= 0 and noise_decay in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Actor-critic agent with target copies.
#[derive(Debug, Clone)]
pub struct Agent {
    pub dims: ProblemDims,
    actor_train: DenseNet,
    actor_target: DenseNet,
    critic_train: DenseNet,
    critic_target: DenseNet,
    adam_actor: AdamState,
    adam_critic: AdamState,
    pub replay: ReplayBuffer,
    pub whitener: RunningWhitener,
    steps_taken: u64,
}

/// Serialized agent: networks and optimizer state, without the replay
/// buffer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub version: u32,
    pub actor_train: DenseNet,
    pub actor_target: DenseNet,
    pub critic_train: DenseNet,
    pub critic_target: DenseNet,
    pub adam_actor: AdamState,
    pub adam_critic: AdamState,
    pub whitener: RunningWhitener,
    pub steps_taken: u64,
}

impl Agent {
    /// Builds the four networks. Actor: state -> action with tanh output;
    /// critic: (whitened state, action) -> scalar Q with identity output.
    /// Both have two ReLU hidden layers of `hidden_width`, with batch
    /// normalization when `batchnorm` is set.
    pub fn new<R: Rng + ?Sized>(
        dims: ProblemDims,
        hidden_width: usize,
        buffer_capacity: usize,
        batchnorm: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let ds = dims.state_dim();
        let da = dims.action_dim();
        let actor_cfg = NetConfig {
            input: ds,
            hidden: vec![hidden_width, hidden_width],
            output: da,
            batchnorm,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Tanh,
            bn_momentum: 0.05,
            bn_epsilon: 1e-5,
            output_init_scale: Some(3e-3),
        };
        let critic_cfg = NetConfig {
            input: ds + da,
            hidden: vec![hidden_width, hidden_width],
            output: 1,
            batchnorm,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
            bn_momentum: 0.05,
            bn_epsilon: 1e-5,
            output_init_scale: Some(3e-3),
        };
        let actor_train = DenseNet::new(&actor_cfg, rng)?;
        let critic_train = DenseNet::new(&critic_cfg, rng)?;
        let actor_target = actor_train.clone();
        let critic_target = critic_train.clone();
        let adam_actor = AdamState::for_net(&actor_train);
        let adam_critic = AdamState::for_net(&critic_train);
        Ok(Self {
            dims,
            actor_train,
            actor_target,
            critic_train,
            critic_target,
            adam_actor,
            adam_critic,
            replay: ReplayBuffer::new(buffer_capacity)?,
            whitener: RunningWhitener::new(ds),
            steps_taken: 0,
        })
    }

    /// Policy action plus exploration noise. The raw state is recorded by
    /// the whitener before use, so the first observation is its own mean.
    pub fn act<R: Rng + ?Sized>(
        &mut self,
        state: &DVector<f64>,
        noise_std: f64,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        self.whitener.observe(state);
        let mut action = self.policy(state)?;
        if noise_std > 0.0 {
            for a in action.iter_mut() {
                let n: f64 = rng.sample(StandardNormal);
                *a += noise_std * n;
            }
        }
        Ok(action)
    }

    /// Deterministic policy output (no noise, eval-mode statistics).
    pub fn policy(&mut self, state: &DVector<f64>) -> Result<DVector<f64>> {
        let white = self.whitener.whiten(state);
        self.actor_train.infer(&white)
    }

    pub fn remember(&mut self, t: Transition) {
        self.replay.push(t);
    }

    /// One gradient update on a uniformly sampled minibatch, returning
    /// `(critic mse loss, actor objective)`, or `None` while the buffer has
    /// fewer transitions than the minibatch size.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        hyper: &DdpgHyper,
        lr_c: f64,
        lr_a: f64,
        rng: &mut R,
    ) -> Result<Option<(f64, f64)>> {
        let w = hyper.minibatch;
        if self.replay.len() < w {
            return Ok(None);
        }
        let ds = self.dims.state_dim();
        let da = self.dims.action_dim();
        let idx = self.replay.sample_indices(rng, w);

        let mut states = DMatrix::zeros(ds, w);
        let mut actions = DMatrix::zeros(da, w);
        let mut rewards = DVector::zeros(w);
        let mut next_states = DMatrix::zeros(ds, w);
        for (col, &i) in idx.iter().enumerate() {
            let t = self.replay.get(i);
            states.set_column(col, &self.whitener.whiten(&t.state));
            actions.set_column(col, &t.action);
            rewards[col] = t.reward;
            next_states.set_column(col, &self.whitener.whiten(&t.next_state));
        }

        // Critic target: y = r + beta * Q_target(s', pi_target(s')).
        let (next_actions, _) = self.actor_target.forward(&next_states, Mode::Eval)?;
        let next_q_in = stack(&next_states, &next_actions);
        let (next_q, _) = self.critic_target.forward(&next_q_in, Mode::Eval)?;
        let targets = DVector::from_fn(w, |c, _| rewards[c] + hyper.beta * next_q[(0, c)]);

        // Critic regression toward the targets.
        let q_in = stack(&states, &actions);
        let (q, critic_cache) = self.critic_train.forward(&q_in, Mode::Train)?;
        let mut critic_loss = 0.0;
        let mut upstream = DMatrix::zeros(1, w);
        for c in 0..w {
            let diff = q[(0, c)] - targets[c];
            critic_loss += diff * diff;
            upstream[(0, c)] = 2.0 * diff / w as f64;
        }
        critic_loss /= w as f64;
        let critic_grads = self.critic_train.backward(&critic_cache, &upstream)?;
        adam_step(
            &mut self.critic_train,
            &critic_grads,
            &mut self.adam_critic,
            &AdamHyper::with_lr(lr_c),
        )?;

        // Actor ascent on mean Q(s, pi(s)), chained through the critic's
        // input gradient. Both passes run with running statistics so the
        // gradient is that of the deployed (eval-mode) policy; batch-stat
        // noise at small minibatches otherwise swamps the ascent. A
        // dedicated train-mode pass still refreshes the actor's running
        // statistics toward the replayed state distribution.
        self.actor_train.forward(&states, Mode::Train)?;
        let (policy_actions, actor_cache) = self.actor_train.forward(&states, Mode::Eval)?;
        let pi_in = stack(&states, &policy_actions);
        let (q_pi, critic_cache2) = self.critic_train.forward(&pi_in, Mode::Eval)?;
        let actor_objective = q_pi.iter().sum::<f64>() / w as f64;
        let ones = DMatrix::from_element(1, w, 1.0 / w as f64);
        let through_critic = self.critic_train.backward(&critic_cache2, &ones)?;
        let d_actions = through_critic.input.rows(ds, da).into_owned();
        let mut actor_grads = self.actor_train.backward(&actor_cache, &d_actions)?;
        actor_grads.scale(-1.0);
        adam_step(
            &mut self.actor_train,
            &actor_grads,
            &mut self.adam_actor,
            &AdamHyper::with_lr(lr_a),
        )?;

        self.steps_taken += 1;
        if self.steps_taken % hyper.sync_every as u64 == 0 {
            self.soft_update(hyper.tau_c, hyper.tau_a);
        }

        if !critic_loss.is_finite() || !actor_objective.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite update at step {}: critic_loss={critic_loss}, actor_objective={actor_objective}",
                self.steps_taken
            )));
        }
        Ok(Some((critic_loss, actor_objective)))
    }

    /// Blends the target networks toward the training ones.
    pub fn soft_update(&mut self, tau_c: f64, tau_a: f64) {
        self.critic_target.blend_from(&self.critic_train, tau_c);
        self.actor_target.blend_from(&self.actor_train, tau_a);
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    pub fn actor_train(&self) -> &DenseNet {
        &self.actor_train
    }

    pub fn actor_target(&self) -> &DenseNet {
        &self.actor_target
    }

    pub fn critic_train(&self) -> &DenseNet {
        &self.critic_train
    }

    pub fn critic_target(&self) -> &DenseNet {
        &self.critic_target
    }

    /// Buffer-free snapshot for persistence.
    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            version: crate::neural::CHECKPOINT_VERSION,
            actor_train: self.actor_train.clone(),
            actor_target: self.actor_target.clone(),
            critic_train: self.critic_train.clone(),
            critic_target: self.critic_target.clone(),
            adam_actor: self.adam_actor.clone(),
            adam_critic: self.adam_critic.clone(),
            whitener: self.whitener.clone(),
            steps_taken: self.steps_taken,
        }
    }

    /// Restores a snapshot into a fresh agent with an empty buffer.
    pub fn from_checkpoint(
        dims: ProblemDims,
        ckpt: AgentCheckpoint,
        buffer_capacity: usize,
    ) -> Result<Self> {
        if ckpt.version != crate::neural::CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "agent checkpoint version {} unsupported",
                ckpt.version
            )));
        }
        Ok(Self {
            dims,
            actor_train: ckpt.actor_train,
            actor_target: ckpt.actor_target,
            critic_train: ckpt.critic_train,
            critic_target: ckpt.critic_target,
            adam_actor: ckpt.adam_actor,
            adam_critic: ckpt.adam_critic,
            replay: ReplayBuffer::new(buffer_capacity)?,
            whitener: ckpt.whitener,
            steps_taken: ckpt.steps_taken,
        })
    }

    /// Writes the buffer-free snapshot as JSON.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let json = serde_json::to_string(&self.checkpoint())
            .map_err(|e| Error::Config(format!("agent checkpoint serialization failed: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Reads a snapshot written by [`Agent::save`].
    pub fn load(path: &std::path::Path, dims: ProblemDims, buffer_capacity: usize) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        let ckpt: AgentCheckpoint = serde_json::from_str(&json)
            .map_err(|e| Error::Config(format!("agent checkpoint parse failed: {e}")))?;
        Self::from_checkpoint(dims, ckpt, buffer_capacity)
    }
}

/// Stacks state rows on top of action rows into the critic's input batch.
fn stack(states: &DMatrix<f64>, actions: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(states.nrows() + actions.nrows(), states.ncols());
    out.rows_mut(0, states.nrows()).copy_from(states);
    out.rows_mut(states.nrows(), actions.nrows()).copy_from(actions);
    out
}
