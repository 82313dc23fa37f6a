//! Effective-channel composition, SINR, sum rate, and feasibility
//! projections.
//!
//! For user k the effective downlink row vector is
//!
//! ```text
//! h_k = g_k^T Phi_I H_I ... Phi_1 H_1 + w_k
//! ```
//!
//! with `H_1` (the BS-side hop) applied first to the transmit vector. The
//! per-user SINR divides the desired term `|h_k f_k|^2` by the multiuser
//! interference `sum_{j != k} |h_k f_j|^2` plus the noise variance, and the
//! system objective is the Shannon sum rate `sum_k log2(1 + rho_k)` in
//! bits/s/Hz.
//!
//! Feasible designs satisfy two constraints: the precoder trace power budget
//! and exact unit modulus on every RIS element. [`normalize_power`] and
//! [`project_unit_modulus`] map arbitrary raw outputs onto that feasible set.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};

/// Per-RIS phase vectors; RIS i applies the diagonal matrix
/// `diag(exp(j phi_{i,1}), ..., exp(j phi_{i,N_i}))`.
///
/// Phases are stored wrapped to `[0, 2 pi)`, so every implied diagonal entry
/// has unit modulus by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    phases: Vec<DVector<f64>>,
}

/// Wraps an angle to `[0, 2 pi)`.
#[inline]
pub fn wrap_phase(phi: f64) -> f64 {
    let p = phi.rem_euclid(TAU);
    if p == TAU {
        0.0
    } else {
        p
    }
}

impl PhaseConfig {
    /// Builds a config from raw angle vectors, wrapping each entry.
    pub fn new(raw: Vec<DVector<f64>>) -> Self {
        let phases = raw
            .into_iter()
            .map(|v| v.map(wrap_phase))
            .collect();
        Self { phases }
    }

    /// All-zero phases (every RIS acts as an identity reflector).
    pub fn zeros(ris_sizes: &[usize]) -> Self {
        Self {
            phases: ris_sizes.iter().map(|&n| DVector::zeros(n)).collect(),
        }
    }

    /// Independent uniform phases on `[0, 2 pi)`.
    pub fn uniform<R: Rng + ?Sized>(ris_sizes: &[usize], rng: &mut R) -> Self {
        Self {
            phases: ris_sizes
                .iter()
                .map(|&n| DVector::from_fn(n, |_, _| rng.gen::<f64>() * TAU))
                .collect(),
        }
    }

    pub fn num_ris(&self) -> usize {
        self.phases.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.phases.iter().map(|v| v.len()).collect()
    }

    /// Phase vector of RIS `i`.
    pub fn phases(&self, i: usize) -> &DVector<f64> {
        &self.phases[i]
    }

    pub fn all_phases(&self) -> &[DVector<f64>] {
        &self.phases
    }

    /// Diagonal entries `exp(j phi)` of RIS `i`.
    pub fn theta(&self, i: usize) -> DVector<Complex64> {
        self.phases[i].map(|p| Complex64::from_polar(1.0, p))
    }

    /// Replaces one element's phase (wrapped). Used by coordinate-ascent
    /// optimizers.
    pub fn set_phase(&mut self, ris: usize, element: usize, phi: f64) {
        self.phases[ris][element] = wrap_phase(phi);
    }

    fn matches(&self, chan: &ChannelRealization) -> Result<()> {
        if self.num_ris() != chan.num_hops() {
            return Err(Error::DimensionMismatch(format!(
                "phase config has {} RIS vectors but channel has {} hops",
                self.num_ris(),
                chan.num_hops()
            )));
        }
        for (i, v) in self.phases.iter().enumerate() {
            if v.len() != chan.hops[i].nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "RIS {} has {} phases but hop matrix has {} rows",
                    i + 1,
                    v.len(),
                    chan.hops[i].nrows()
                )));
            }
        }
        Ok(())
    }
}

/// Digital precoder F (M x K; column k serves user k) under the transmit
/// power budget `tr(F F^H) <= P_t`.
#[derive(Debug, Clone)]
pub struct Precoder {
    matrix: DMatrix<Complex64>,
    budget_w: f64,
}

impl Precoder {
    /// Absolute slack allowed on the trace constraint at construction.
    pub const POWER_SLACK: f64 = 1e-9;

    pub fn new(matrix: DMatrix<Complex64>, budget_w: f64) -> Result<Self> {
        if !(budget_w > 0.0) || !budget_w.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "power budget must be positive and finite, got {budget_w}"
            )));
        }
        let power = matrix.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if !power.is_finite() {
            return Err(Error::InvalidArgument("precoder has non-finite entries".into()));
        }
        if power > budget_w + Self::POWER_SLACK {
            return Err(Error::InvalidArgument(format!(
                "precoder power {power} exceeds budget {budget_w}"
            )));
        }
        Ok(Self { matrix, budget_w })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Column (beamforming vector) for user k.
    pub fn column(&self, k: usize) -> DVector<Complex64> {
        self.matrix.column(k).into_owned()
    }

    pub fn budget(&self) -> f64 {
        self.budget_w
    }

    /// Actual transmit power `tr(F F^H)`.
    pub fn transmit_power(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn num_bs_antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Additive noise power at each receiver.
#[derive(Debug, Clone, Copy)]
pub struct NoiseParams {
    sigma2_w: f64,
}

impl NoiseParams {
    pub fn new(sigma2_w: f64) -> Result<Self> {
        if !(sigma2_w > 0.0) || !sigma2_w.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive and finite, got {sigma2_w}"
            )));
        }
        Ok(Self { sigma2_w })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2_w
    }
}

/// Effective channel row for user k: the reflected chain product plus the
/// direct path. With no hops this is just the direct row.
pub fn effective_channel(
    chan: &ChannelRealization,
    phi: &PhaseConfig,
    user: usize,
) -> Result<RowDVector<Complex64>> {
    phi.matches(chan)?;
    if user >= chan.num_users() {
        return Err(Error::DimensionMismatch(format!(
            "user index {} out of range ({} users)",
            user,
            chan.num_users()
        )));
    }
    let hops = chan.num_hops();
    if hops == 0 {
        return Ok(chan.direct[user].clone());
    }
    // Walk the chain from the user side: (g^T Phi_I) H_I ... Phi_1 H_1.
    let mut row: RowDVector<Complex64> = chan.ris_user[user].transpose();
    for i in (0..hops).rev() {
        let theta = phi.theta(i);
        for (entry, t) in row.iter_mut().zip(theta.iter()) {
            *entry *= *t;
        }
        row *= &chan.hops[i];
    }
    row += &chan.direct[user];
    Ok(row)
}

/// Effective rows for all users, stacked in user order.
pub fn effective_channels(
    chan: &ChannelRealization,
    phi: &PhaseConfig,
) -> Result<Vec<RowDVector<Complex64>>> {
    (0..chan.num_users()).map(|k| effective_channel(chan, phi, k)).collect()
}

/// Stacks effective rows into the K x M matrix used by zero-forcing.
pub fn stack_rows(rows: &[RowDVector<Complex64>]) -> DMatrix<Complex64> {
    DMatrix::from_rows(rows)
}

/// SINR of user k from precomputed effective rows.
pub fn sinr_from_rows(
    rows: &[RowDVector<Complex64>],
    prec: &Precoder,
    noise: &NoiseParams,
    user: usize,
) -> f64 {
    sinr_for_row(&rows[user], prec, noise, user)
}

/// SINR of user k: `|h_k f_k|^2 / (sum_{j != k} |h_k f_j|^2 + sigma^2)`.
pub fn sinr(
    chan: &ChannelRealization,
    phi: &PhaseConfig,
    prec: &Precoder,
    noise: &NoiseParams,
    user: usize,
) -> Result<f64> {
    check_precoder_dims(chan, prec)?;
    let h = effective_channel(chan, phi, user)?;
    Ok(sinr_for_row(&h, prec, noise, user))
}

fn sinr_for_row(
    h: &RowDVector<Complex64>,
    prec: &Precoder,
    noise: &NoiseParams,
    user: usize,
) -> f64 {
    let mut desired = 0.0;
    let mut interference = 0.0;
    for j in 0..prec.num_users() {
        let gain = (h * prec.matrix().column(j))[(0, 0)].norm_sqr();
        if j == user {
            desired = gain;
        } else {
            interference += gain;
        }
    }
    desired / (interference + noise.sigma2())
}

fn check_precoder_dims(chan: &ChannelRealization, prec: &Precoder) -> Result<()> {
    if prec.num_bs_antennas() != chan.num_bs_antennas() {
        return Err(Error::DimensionMismatch(format!(
            "precoder has {} rows but channel has {} BS antennas",
            prec.num_bs_antennas(),
            chan.num_bs_antennas()
        )));
    }
    if prec.num_users() != chan.num_users() {
        return Err(Error::DimensionMismatch(format!(
            "precoder has {} columns but channel has {} users",
            prec.num_users(),
            chan.num_users()
        )));
    }
    Ok(())
}

/// Sum rate from precomputed effective rows, bits/s/Hz.
pub fn sum_rate_from_rows(
    rows: &[RowDVector<Complex64>],
    prec: &Precoder,
    noise: &NoiseParams,
) -> f64 {
    (0..rows.len())
        .map(|k| (1.0 + sinr_from_rows(rows, prec, noise, k)).log2())
        .sum()
}

/// System sum rate `sum_k log2(1 + rho_k)`, bits/s/Hz. Bandwidth scaling to
/// bits/s happens in the reporting layer only.
pub fn sum_rate(
    chan: &ChannelRealization,
    phi: &PhaseConfig,
    prec: &Precoder,
    noise: &NoiseParams,
) -> Result<f64> {
    check_precoder_dims(chan, prec)?;
    let rows = effective_channels(chan, phi)?;
    Ok(sum_rate_from_rows(&rows, prec, noise))
}

/// Scales a raw matrix onto the power boundary: `F = F_raw * sqrt(P_t / tr)`.
///
/// An identically zero matrix cannot be scaled and yields a degenerate-input
/// error; callers substitute a fresh random action.
pub fn normalize_power(f_raw: &DMatrix<Complex64>, p_t: f64) -> Result<Precoder> {
    if !(p_t > 0.0) || !p_t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "power budget must be positive and finite, got {p_t}"
        )));
    }
    let raw_power: f64 = f_raw.iter().map(|c| c.norm_sqr()).sum();
    if !raw_power.is_finite() {
        return Err(Error::InvalidArgument("raw precoder has non-finite entries".into()));
    }
    if raw_power == 0.0 {
        return Err(Error::DegenerateInput(
            "cannot normalize an identically zero precoder".into(),
        ));
    }
    let scale = (p_t / raw_power).sqrt();
    Precoder::new(f_raw * Complex64::new(scale, 0.0), p_t)
}

/// Projects raw complex entries onto unit modulus, returning the phases.
/// Zero entries map to phase 0 by convention.
pub fn project_unit_modulus(raw: &DVector<Complex64>) -> DVector<f64> {
    raw.map(|c| {
        if c.norm_sqr() == 0.0 {
            0.0
        } else {
            wrap_phase(c.arg())
        }
    })
}
