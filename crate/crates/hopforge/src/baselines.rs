//! Reference beamformers the learning agent is judged against.
//!
//! Three schemes: full-digital zero-forcing on the direct channels (the
//! no-RIS case), best-of-N uniformly random phase configurations each paired
//! with zero-forcing on its induced effective channels, and a single-hop
//! alternating optimizer that interleaves zero-forcing precoder updates with
//! cyclic per-element phase search over a uniform grid.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::signal::{
    effective_channels, normalize_power, stack_rows, sum_rate_from_rows, NoiseParams, PhaseConfig,
    Precoder,
};

/// Settings for the alternating optimizer.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AltOptSettings {
    /// Maximum number of full (phase sweep + precoder) iterations.
    pub max_iters: usize,
    /// Stop once the relative objective improvement over one full iteration
    /// falls below this threshold.
    pub rel_tol: f64,
    /// Number of candidate phases per element, uniformly spaced on
    /// `[0, 2 pi)`.
    pub phase_grid: usize,
    /// Extra ascent starts from seeded random grid configurations, on top
    /// of the zero start and the per-user co-phasing starts. Coordinate
    /// ascent is deterministic, so escaping its local optima takes multiple
    /// starts; the start set is fixed, keeping the optimizer a pure
    /// function of its inputs.
    pub random_starts: usize,
}

impl Default for AltOptSettings {
    fn default() -> Self {
        Self { max_iters: 100, rel_tol: 1e-4, phase_grid: 16, random_starts: 16 }
    }
}

impl AltOptSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rel_tol must be in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.phase_grid < 2 {
            return Err(Error::InvalidArgument("phase_grid must be >= 2".into()));
        }
        Ok(())
    }
}

/// Relative singular-value cutoff below which the stacked channel counts as
/// rank deficient.
const ZF_RANK_TOL: f64 = 1e-12;

/// Zero-forcing precoder on a stacked K x M channel matrix.
///
/// `F = W^H (W W^H)^{-1}` (the right pseudo-inverse, computed through the
/// SVD for a reliable rank check) scaled onto the power budget, which loads
/// every user with the same received power and nulls all inter-user terms.
pub fn zf_precoder(direct: &DMatrix<Complex64>, p_t: f64) -> Result<Precoder> {
    let k = direct.nrows();
    let m = direct.ncols();
    if k == 0 || m == 0 {
        return Err(Error::InvalidArgument("channel matrix must be nonempty".into()));
    }
    if k > m {
        return Err(Error::InvalidArgument(format!(
            "zero-forcing needs K <= M, got K={k}, M={m}"
        )));
    }
    let svd = direct.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= ZF_RANK_TOL * smax {
        return Err(Error::SingularChannel(format!(
            "stacked channel matrix is rank deficient (sigma_min/sigma_max = {:.3e})",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    let raw = svd
        .pseudo_inverse(ZF_RANK_TOL * smax)
        .map_err(|e| Error::SingularChannel(format!("pseudo-inverse failed: {e}")))?;
    if raw.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::SingularChannel(
            "zero-forcing solution is non-finite (near-singular channel)".into(),
        ));
    }
    normalize_power(&raw, p_t)
}

/// Best of `num_draws` uniformly random phase configurations, each paired
/// with the zero-forcing precoder on its induced effective channels.
pub fn random_phase_baseline<R: Rng + ?Sized>(
    chan: &ChannelRealization,
    p_t: f64,
    noise: &NoiseParams,
    rng: &mut R,
    num_draws: usize,
) -> Result<(PhaseConfig, Precoder, f64)> {
    if num_draws == 0 {
        return Err(Error::InvalidArgument("num_draws must be >= 1".into()));
    }
    let sizes: Vec<usize> = chan.hops.iter().map(|h| h.nrows()).collect();
    let mut best: Option<(PhaseConfig, Precoder, f64)> = None;
    for _ in 0..num_draws {
        let phi = PhaseConfig::uniform(&sizes, rng);
        let rows = effective_channels(chan, &phi)?;
        let prec = zf_precoder(&stack_rows(&rows), p_t)?;
        let rate = sum_rate_from_rows(&rows, &prec, noise);
        if best.as_ref().map_or(true, |(_, _, r)| rate > *r) {
            best = Some((phi, prec, rate));
        }
    }
    Ok(best.expect("num_draws >= 1"))
}

/// Outcome of the alternating optimizer, with the objective value recorded
/// after every half-step.
#[derive(Debug, Clone)]
pub struct AltOptOutcome {
    pub phases: PhaseConfig,
    pub precoder: Precoder,
    /// Sum-rate trace: initial value, then one entry per half-step
    /// (phase sweep or precoder update). Nondecreasing.
    pub trace: Vec<f64>,
}

/// Alternating optimization for a single-hop chain.
///
/// Coordinate ascent can stall in a local grid optimum, so the search runs
/// from several deterministic starting phase vectors (all zeros, plus one
/// greedy co-phasing per user) and returns the best run. Each run repeats
/// until stagnation or `max_iters`: (a) a cyclic sweep over all RIS
/// elements picking the grid phase (or the incumbent) that maximizes the
/// sum rate with the precoder fixed, then (b) a zero-forcing precoder
/// update that is accepted only when it does not decrease the objective.
/// Both half-steps are individually nondecreasing, so the returned trace
/// is too.
pub fn alternating_opt(
    chan: &ChannelRealization,
    p_t: f64,
    noise: &NoiseParams,
    settings: &AltOptSettings,
) -> Result<AltOptOutcome> {
    settings.validate()?;
    if chan.num_hops() != 1 {
        return Err(Error::UnsupportedScenario(format!(
            "alternating optimization supports exactly one hop, got {}",
            chan.num_hops()
        )));
    }
    let n = chan.hops[0].nrows();
    let mut starts = vec![DVector::zeros(n)];
    for k in 0..chan.num_users() {
        starts.push(cophase_start(chan, k));
    }
    let mut start_rng = crate::rng::rng_from_seed(0x414c_544f_5054);
    for _ in 0..settings.random_starts {
        starts.push(DVector::from_fn(n, |_, _| {
            let g = start_rng.gen_range(0..settings.phase_grid);
            TAU * g as f64 / settings.phase_grid as f64
        }));
    }
    let mut best: Option<AltOptOutcome> = None;
    for start in starts {
        let outcome = ascend_from(chan, p_t, noise, settings, start)?;
        let rate = *outcome.trace.last().expect("trace is nonempty");
        if best.as_ref().map_or(true, |b| rate > *b.trace.last().expect("nonempty")) {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least the zero start ran"))
}

/// Greedy element-by-element phase choice that maximizes the norm of user
/// k's effective row; a cheap deterministic ascent start.
fn cophase_start(chan: &ChannelRealization, user: usize) -> DVector<f64> {
    let n = chan.hops[0].nrows();
    let mut partial = chan.direct[user].clone();
    let mut phases = DVector::zeros(n);
    for e in 0..n {
        let contrib = chan.hops[0].row(e) * chan.ris_user[user][e];
        // Align the contribution with the partial sum; the first nonzero
        // contribution sets the reference.
        let inner: Complex64 =
            contrib.iter().zip(partial.iter()).map(|(c, p)| c * p.conj()).sum();
        let phase = if inner.norm_sqr() > 0.0 { -inner.arg() } else { 0.0 };
        phases[e] = phase;
        let rot = Complex64::from_polar(1.0, phase);
        for (pp, c) in partial.iter_mut().zip(contrib.iter()) {
            *pp += c * rot;
        }
    }
    phases
}

fn ascend_from(
    chan: &ChannelRealization,
    p_t: f64,
    noise: &NoiseParams,
    settings: &AltOptSettings,
    start: DVector<f64>,
) -> Result<AltOptOutcome> {
    let n = chan.hops[0].nrows();

    let mut phi = PhaseConfig::new(vec![start]);
    let rows = effective_channels(chan, &phi)?;
    let mut prec = zf_precoder(&stack_rows(&rows), p_t)?;
    let mut current = sum_rate_from_rows(&rows, &prec, noise);
    let mut trace = vec![current];

    for _ in 0..settings.max_iters {
        let at_iter_start = current;

        // Phase sweep: per-element argmax of the sum rate over the grid,
        // keeping the incumbent phase as a candidate.
        for elem in 0..n {
            let mut best_phase = phi.phases(0)[elem];
            let mut best_rate = current;
            for g in 0..settings.phase_grid {
                let cand = TAU * g as f64 / settings.phase_grid as f64;
                phi.set_phase(0, elem, cand);
                let rate = objective(chan, &phi, &prec, noise)?;
                if rate > best_rate {
                    best_rate = rate;
                    best_phase = cand;
                }
            }
            phi.set_phase(0, elem, best_phase);
            current = best_rate;
        }
        trace.push(current);

        // Precoder half-step: zero-forcing on the updated effective
        // channels, kept only if it does not lose rate.
        let rows = effective_channels(chan, &phi)?;
        if let Ok(cand) = zf_precoder(&stack_rows(&rows), p_t) {
            let rate = sum_rate_from_rows(&rows, &cand, noise);
            if rate >= current {
                prec = cand;
                current = rate;
            }
        }
        trace.push(current);

        let improvement = current - at_iter_start;
        if improvement <= settings.rel_tol * at_iter_start.max(1e-12) {
            break;
        }
    }
    Ok(AltOptOutcome { phases: phi, precoder: prec, trace })
}

fn objective(
    chan: &ChannelRealization,
    phi: &PhaseConfig,
    prec: &Precoder,
    noise: &NoiseParams,
) -> Result<f64> {
    let rows = effective_channels(chan, phi)?;
    Ok(sum_rate_from_rows(&rows, prec, noise))
}

/// Exhaustively searches every grid-phase combination of a single-hop chain,
/// pairing each with zero-forcing. Test oracle; cost is `grid^N`.
pub fn exhaustive_grid_optimum(
    chan: &ChannelRealization,
    p_t: f64,
    noise: &NoiseParams,
    grid: usize,
) -> Result<f64> {
    if chan.num_hops() != 1 {
        return Err(Error::UnsupportedScenario("exhaustive search needs exactly one hop".into()));
    }
    let n = chan.hops[0].nrows();
    let mut idx = vec![0usize; n];
    let mut phi = PhaseConfig::zeros(&[n]);
    let mut best = f64::NEG_INFINITY;
    loop {
        for (e, &g) in idx.iter().enumerate() {
            phi.set_phase(0, e, TAU * g as f64 / grid as f64);
        }
        let rows = effective_channels(chan, &phi)?;
        if let Ok(prec) = zf_precoder(&stack_rows(&rows), p_t) {
            best = best.max(sum_rate_from_rows(&rows, &prec, noise));
        }
        let mut carry = 0;
        loop {
            idx[carry] += 1;
            if idx[carry] < grid {
                break;
            }
            idx[carry] = 0;
            carry += 1;
            if carry == n {
                return Ok(best);
            }
        }
    }
}
