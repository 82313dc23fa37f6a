//! Deep deterministic policy gradient over the beamforming environment:
//! state/action encodings, reward, replay buffer, actor-critic updates with
//! soft target networks, action initialization, and the training loop.

mod agent;
mod buffer;
mod train;
mod whiten;

pub use agent::{Agent, AgentCheckpoint, DdpgHyper};
pub use buffer::{ReplayBuffer, Transition};
pub use train::{
    init_action_maxmin, init_action_svd, train, train_on_channel, EnvSpec, InitScheme, StepRecord,
    TrainOptions, TrainOutcome,
};
pub use whiten::RunningWhitener;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::signal::{
    normalize_power, project_unit_modulus, sum_rate, NoiseParams, PhaseConfig, Precoder,
};

/// Antenna, user, and RIS-chain sizes that fix the state and action layouts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemDims {
    pub num_bs_antennas: usize,
    pub num_users: usize,
    pub ris_sizes: Vec<usize>,
}

impl ProblemDims {
    pub fn new(num_bs_antennas: usize, num_users: usize, ris_sizes: Vec<usize>) -> Self {
        Self { num_bs_antennas, num_users, ris_sizes }
    }

    pub fn from_channel(chan: &ChannelRealization) -> Self {
        Self {
            num_bs_antennas: chan.num_bs_antennas(),
            num_users: chan.num_users(),
            ris_sizes: chan.hops.iter().map(|h| h.nrows()).collect(),
        }
    }

    pub fn num_hops(&self) -> usize {
        self.ris_sizes.len()
    }

    /// State-vector length:
    /// `2MK + 2 sum N_i + 2M N_1 + 2 sum N_i N_{i+1} + 2K N_I`.
    /// RIS-dependent terms vanish when the chain is empty.
    pub fn state_dim(&self) -> usize {
        let m = self.num_bs_antennas;
        let k = self.num_users;
        let ns = &self.ris_sizes;
        let mut d = 2 * m * k + 2 * ns.iter().sum::<usize>();
        if let Some(&n1) = ns.first() {
            d += 2 * m * n1;
        }
        for w in ns.windows(2) {
            d += 2 * w[0] * w[1];
        }
        if let Some(&nl) = ns.last() {
            d += 2 * k * nl;
        }
        d
    }

    /// Action-vector length: `2MK + 2 sum N_i`.
    pub fn action_dim(&self) -> usize {
        2 * self.num_bs_antennas * self.num_users + 2 * self.ris_sizes.iter().sum::<usize>()
    }
}

fn push_complex_matrix(out: &mut Vec<f64>, m: &DMatrix<Complex64>) {
    // Column-major: real block first, then imaginary.
    out.extend(m.iter().map(|c| c.re));
    out.extend(m.iter().map(|c| c.im));
}

/// Encodes the agent's observation: the previous action (precoder + phases)
/// and the full channel state.
///
/// Layout, all blocks split into a real part then an imaginary part:
///
/// 1. `F_prev + W^T` (M x K, column-major) — the direct-channel matrix is
///    folded into the precoder block, which is the only 2MK slot the state
///    budget provides.
/// 2. Per RIS in hop order: the unit-circle phase encoding, centered so the
///    zero-phase configuration encodes as zeros (`cos phi - 1`, then
///    `sin phi`).
/// 3. `H_1` through `H_I`, column-major.
/// 4. `g_1` through `g_K`.
pub fn encode_state(
    prec: &Precoder,
    phi: &PhaseConfig,
    chan: &ChannelRealization,
) -> Result<DVector<f64>> {
    let dims = ProblemDims::from_channel(chan);
    if prec.num_bs_antennas() != dims.num_bs_antennas || prec.num_users() != dims.num_users {
        return Err(Error::DimensionMismatch(format!(
            "precoder is {}x{}, channel wants {}x{}",
            prec.num_bs_antennas(),
            prec.num_users(),
            dims.num_bs_antennas,
            dims.num_users
        )));
    }
    if phi.sizes() != dims.ris_sizes {
        return Err(Error::DimensionMismatch(format!(
            "phase config sizes {:?} do not match RIS sizes {:?}",
            phi.sizes(),
            dims.ris_sizes
        )));
    }

    let mut out = Vec::with_capacity(dims.state_dim());

    // Precoder block with the direct channels folded in.
    let mut fold = prec.matrix().clone();
    for (k, w) in chan.direct.iter().enumerate() {
        for m in 0..w.len() {
            fold[(m, k)] += w[m];
        }
    }
    push_complex_matrix(&mut out, &fold);

    for i in 0..dims.num_hops() {
        let phases = phi.phases(i);
        out.extend(phases.iter().map(|p| p.cos() - 1.0));
        out.extend(phases.iter().map(|p| p.sin()));
    }

    for h in &chan.hops {
        push_complex_matrix(&mut out, h);
    }
    for g in &chan.ris_user {
        out.extend(g.iter().map(|c| c.re));
        out.extend(g.iter().map(|c| c.im));
    }

    debug_assert_eq!(out.len(), dims.state_dim());
    Ok(DVector::from_vec(out))
}

/// Encodes a feasible action into the raw action layout:
/// `[Re F | Im F | per RIS: cos phi | sin phi]`. Decoding this vector
/// reproduces the action exactly (up to the projections' fixed points).
pub fn encode_action(prec: &Precoder, phi: &PhaseConfig) -> DVector<f64> {
    let mut out = Vec::new();
    push_complex_matrix(&mut out, prec.matrix());
    for i in 0..phi.num_ris() {
        let phases = phi.phases(i);
        out.extend(phases.iter().map(|p| p.cos()));
        out.extend(phases.iter().map(|p| p.sin()));
    }
    DVector::from_vec(out)
}

/// Decodes a raw action vector into a feasible `(Precoder, PhaseConfig)`:
/// the precoder block is scaled onto the power budget, each RIS block is
/// projected onto unit modulus.
///
/// An all-zero precoder block is a degenerate input; the caller resamples.
pub fn decode_action(
    action: &DVector<f64>,
    dims: &ProblemDims,
    p_t: f64,
) -> Result<(Precoder, PhaseConfig)> {
    if action.len() != dims.action_dim() {
        return Err(Error::DimensionMismatch(format!(
            "action has length {}, expected {}",
            action.len(),
            dims.action_dim()
        )));
    }
    let m = dims.num_bs_antennas;
    let k = dims.num_users;
    let mk = m * k;

    let mut f_raw = DMatrix::<Complex64>::zeros(m, k);
    for (i, c) in f_raw.iter_mut().enumerate() {
        *c = Complex64::new(action[i], action[mk + i]);
    }
    let prec = normalize_power(&f_raw, p_t)?;

    let mut offset = 2 * mk;
    let mut phases = Vec::with_capacity(dims.num_hops());
    for &n in &dims.ris_sizes {
        let raw = DVector::from_fn(n, |j, _| {
            Complex64::new(action[offset + j], action[offset + n + j])
        });
        phases.push(project_unit_modulus(&raw));
        offset += 2 * n;
    }
    Ok((prec, PhaseConfig::new(phases)))
}

/// Instant reward of a feasible action: the sum rate, in bits/s/Hz. The
/// optional action-change penalty is applied by the training loop.
pub fn reward(
    chan: &ChannelRealization,
    phi: &PhaseConfig,
    prec: &Precoder,
    noise: &NoiseParams,
) -> Result<f64> {
    sum_rate(chan, phi, prec, noise)
}
