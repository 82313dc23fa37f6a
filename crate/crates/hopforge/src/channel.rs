//! Terahertz channel generation for a multi-hop RIS topology.
//!
//! Deterministic link budgets follow the standard THz form: free-space
//! spreading `c / (4 pi f d)` multiplied by molecular absorption
//! `exp(-k d / 2)` in amplitude, with the propagation delay `d / c` carried
//! as a phase rotation. NLOS bounces pay an extra configurable reflection
//! loss. Small-scale fading is Rayleigh: every channel entry is drawn
//! circularly-symmetric complex Gaussian with the link's LOS amplitude as
//! its per-entry standard deviation.
//!
//! All draws go through an explicit generator, so a topology plus a seed
//! fixes every byte of the realization.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Physical-layer constants of the THz link.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThzPhysParams {
    /// Carrier frequency f, Hz.
    pub carrier_freq_hz: f64,
    /// Occupied bandwidth B, Hz. Noise variance is `noise_psd_w_hz * B`.
    pub bandwidth_hz: f64,
    /// Molecular-absorption scalar k(f), 1/m. Configurable rather than
    /// looked up from a spectral database.
    pub absorption_coeff: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd_w_hz: f64,
    /// Amplitude loss per NLOS bounce, dB.
    pub reflection_loss_db: f64,
    /// Number of NLOS rays in the scattering sum of the transfer function.
    pub num_nlos_rays: usize,
}

impl ThzPhysParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_freq_hz > 0.0) || !self.carrier_freq_hz.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "carrier_freq_hz must be positive and finite, got {}",
                self.carrier_freq_hz
            )));
        }
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bandwidth_hz must be positive and finite, got {}",
                self.bandwidth_hz
            )));
        }
        if !(self.absorption_coeff >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "absorption_coeff must be nonnegative, got {}",
                self.absorption_coeff
            )));
        }
        if !(self.noise_psd_w_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise_psd_w_hz must be positive, got {}",
                self.noise_psd_w_hz
            )));
        }
        if !(self.reflection_loss_db >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "reflection_loss_db must be nonnegative, got {}",
                self.reflection_loss_db
            )));
        }
        if !(self.noise_psd_w_hz * self.bandwidth_hz > 0.0) {
            return Err(Error::InvalidArgument(
                "noise variance noise_psd * bandwidth must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    /// Noise variance sigma_n^2 = noise PSD times bandwidth, W.
    pub fn noise_variance(&self) -> f64 {
        self.noise_psd_w_hz * self.bandwidth_hz
    }
}

/// Placement and sizing of the BS, the serial RIS chain, and the users.
///
/// All users share the one chain: a signal reaching user k traverses every
/// configured RIS in order, plus the (possibly blocked) direct BS-user path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    /// BS antenna count M.
    pub num_bs_antennas: usize,
    /// Single-antenna user count K; K <= M.
    pub num_users: usize,
    /// Element count N_i of each RIS in hop order; the length is the hop
    /// count I.
    pub ris_sizes: Vec<usize>,
    /// BS location, m.
    pub bs_position: [f64; 3],
    /// RIS locations in hop order, m; one per entry of `ris_sizes`.
    pub ris_positions: Vec<[f64; 3]>,
    /// User locations, m; one per user.
    pub user_positions: Vec<[f64; 3]>,
    /// Extra amplitude attenuation on the direct BS-user channels, dB.
    /// `f64::INFINITY` models full blockage.
    pub direct_blockage_db: f64,
}

impl Topology {
    /// Hop count I.
    pub fn num_hops(&self) -> usize {
        self.ris_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_bs_antennas == 0 {
            return Err(Error::InvalidArgument("num_bs_antennas must be >= 1".into()));
        }
        if self.num_users == 0 {
            return Err(Error::InvalidArgument("num_users must be >= 1".into()));
        }
        if self.num_users > self.num_bs_antennas {
            return Err(Error::InvalidArgument(format!(
                "num_users ({}) must not exceed num_bs_antennas ({})",
                self.num_users, self.num_bs_antennas
            )));
        }
        if self.ris_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument("every RIS must have >= 1 element".into()));
        }
        if self.ris_positions.len() != self.ris_sizes.len() {
            return Err(Error::InvalidArgument(format!(
                "ris_positions has {} entries but ris_sizes has {}",
                self.ris_positions.len(),
                self.ris_sizes.len()
            )));
        }
        if self.user_positions.len() != self.num_users {
            return Err(Error::InvalidArgument(format!(
                "user_positions has {} entries but num_users is {}",
                self.user_positions.len(),
                self.num_users
            )));
        }
        let finite3 = |p: &[f64; 3]| p.iter().all(|x| x.is_finite());
        if !finite3(&self.bs_position)
            || !self.ris_positions.iter().all(finite3)
            || !self.user_positions.iter().all(finite3)
        {
            return Err(Error::InvalidArgument("all positions must be finite".into()));
        }
        if self.direct_blockage_db < 0.0 || self.direct_blockage_db.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "direct_blockage_db must be >= 0 (or +inf for full blockage), got {}",
                self.direct_blockage_db
            )));
        }
        Ok(())
    }

    /// Keeps only the first `hops` RISs of the chain (0 removes them all).
    pub fn with_hops(&self, hops: usize) -> Result<Topology> {
        if hops > self.num_hops() {
            return Err(Error::InvalidArgument(format!(
                "requested {} hops but topology configures {}",
                hops,
                self.num_hops()
            )));
        }
        let mut t = self.clone();
        t.ris_sizes.truncate(hops);
        t.ris_positions.truncate(hops);
        Ok(t)
    }
}

/// One scenario draw: every complex channel matrix of the topology.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Hop matrices: `hops[0]` is the N_1 x M BS-to-first-RIS channel,
    /// `hops[i]` the N_{i+1} x N_i channel between consecutive RISs.
    pub hops: Vec<DMatrix<Complex64>>,
    /// Last-RIS-to-user vectors, length N_I, one per user.
    pub ris_user: Vec<DVector<Complex64>>,
    /// Direct BS-to-user row vectors, length M, one per user.
    pub direct: Vec<RowDVector<Complex64>>,
}

impl ChannelRealization {
    pub fn num_hops(&self) -> usize {
        self.hops.len()
    }

    pub fn num_users(&self) -> usize {
        self.direct.len()
    }

    pub fn num_bs_antennas(&self) -> usize {
        self.direct.first().map_or(0, |w| w.len())
    }

    /// Checks the dimension chain against a topology.
    pub fn validate_against(&self, topo: &Topology) -> Result<()> {
        let i = topo.num_hops();
        if self.hops.len() != i {
            return Err(Error::DimensionMismatch(format!(
                "expected {} hop matrices, got {}",
                i,
                self.hops.len()
            )));
        }
        for (idx, h) in self.hops.iter().enumerate() {
            let rows = topo.ris_sizes[idx];
            let cols = if idx == 0 { topo.num_bs_antennas } else { topo.ris_sizes[idx - 1] };
            if h.nrows() != rows || h.ncols() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "hop {} is {}x{}, expected {}x{}",
                    idx + 1,
                    h.nrows(),
                    h.ncols(),
                    rows,
                    cols
                )));
            }
        }
        if i > 0 {
            if self.ris_user.len() != topo.num_users {
                return Err(Error::DimensionMismatch(format!(
                    "expected {} ris-user vectors, got {}",
                    topo.num_users,
                    self.ris_user.len()
                )));
            }
            let n_last = *topo.ris_sizes.last().expect("i > 0");
            for (k, g) in self.ris_user.iter().enumerate() {
                if g.len() != n_last {
                    return Err(Error::DimensionMismatch(format!(
                        "ris_user[{}] has length {}, expected {}",
                        k,
                        g.len(),
                        n_last
                    )));
                }
            }
        } else if !self.ris_user.is_empty() {
            return Err(Error::DimensionMismatch(
                "no hops configured but ris_user vectors present".into(),
            ));
        }
        if self.direct.len() != topo.num_users {
            return Err(Error::DimensionMismatch(format!(
                "expected {} direct rows, got {}",
                topo.num_users,
                self.direct.len()
            )));
        }
        for (k, w) in self.direct.iter().enumerate() {
            if w.len() != topo.num_bs_antennas {
                return Err(Error::DimensionMismatch(format!(
                    "direct[{}] has length {}, expected {}",
                    k,
                    w.len(),
                    topo.num_bs_antennas
                )));
            }
        }
        let finite = self.hops.iter().all(|h| h.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
            && self.ris_user.iter().all(|g| g.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
            && self.direct.iter().all(|w| w.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        if !finite {
            return Err(Error::DimensionMismatch("non-finite channel entry".into()));
        }
        Ok(())
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Deterministic line-of-sight gain over a link of length `distance_m`.
///
/// Amplitude is `c / (4 pi f d) * exp(-k d / 2)`; the phase is the carrier
/// rotation `2 pi f d / c` (delay d/c), reduced mod 2 pi.
pub fn los_gain(params: &ThzPhysParams, distance_m: f64) -> Result<Complex64> {
    params.validate()?;
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "distance must be positive and finite, got {distance_m}"
        )));
    }
    let f = params.carrier_freq_hz;
    let spreading = SPEED_OF_LIGHT / (4.0 * PI * f * distance_m);
    let absorption = (-params.absorption_coeff * distance_m / 2.0).exp();
    let phase = (TAU * f * distance_m / SPEED_OF_LIGHT) % TAU;
    Ok(Complex64::from_polar(spreading * absorption, -phase))
}

/// Gain of an NLOS path of total length `path_length_m`: the LOS gain over
/// that length further attenuated by `reflection_loss_db` in amplitude.
pub fn nlos_gain(params: &ThzPhysParams, path_length_m: f64) -> Result<Complex64> {
    let base = los_gain(params, path_length_m)?;
    let loss = 10f64.powf(-params.reflection_loss_db / 20.0);
    Ok(base * loss)
}

/// Draws a `rows x cols` matrix of i.i.d. circularly-symmetric complex
/// Gaussians with per-entry variance `scale^2` (Rayleigh-faded link with
/// mean power `scale^2`).
pub fn sample_rayleigh<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    scale: f64,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix dimensions must be >= 1, got {rows}x{cols}"
        )));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scale must be positive and finite, got {scale}"
        )));
    }
    let sigma = scale / 2f64.sqrt();
    // Row-major draw order so the stream is independent of the storage layout.
    let mut out = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out[(r, c)] = Complex64::new(sigma * re, sigma * im);
        }
    }
    Ok(out)
}

/// Draws the full channel realization for a topology.
///
/// Every link is Rayleigh with per-entry standard deviation equal to the
/// link's deterministic LOS amplitude; direct channels carry the extra
/// blockage attenuation. Draw order is fixed (hops in order, then ris-user
/// vectors by user, then direct rows by user) so a seed pins the result.
pub fn generate_channels<R: Rng + ?Sized>(
    topo: &Topology,
    params: &ThzPhysParams,
    rng: &mut R,
) -> Result<ChannelRealization> {
    topo.validate()?;
    params.validate()?;
    let hops_n = topo.num_hops();
    let m = topo.num_bs_antennas;

    let mut hops = Vec::with_capacity(hops_n);
    for i in 0..hops_n {
        let (from, cols) = if i == 0 {
            (&topo.bs_position, m)
        } else {
            (&topo.ris_positions[i - 1], topo.ris_sizes[i - 1])
        };
        let d = distance(from, &topo.ris_positions[i]);
        let scale = los_gain(params, d)?.norm();
        hops.push(sample_rayleigh(topo.ris_sizes[i], cols, scale, rng)?);
    }

    let mut ris_user = Vec::with_capacity(if hops_n > 0 { topo.num_users } else { 0 });
    if hops_n > 0 {
        let last_pos = &topo.ris_positions[hops_n - 1];
        let n_last = topo.ris_sizes[hops_n - 1];
        for k in 0..topo.num_users {
            let d = distance(last_pos, &topo.user_positions[k]);
            let scale = los_gain(params, d)?.norm();
            let col = sample_rayleigh(n_last, 1, scale, rng)?;
            ris_user.push(col.column(0).into_owned());
        }
    }

    let blockage = 10f64.powf(-topo.direct_blockage_db / 20.0);
    let mut direct = Vec::with_capacity(topo.num_users);
    for k in 0..topo.num_users {
        if blockage == 0.0 {
            direct.push(RowDVector::zeros(m));
            continue;
        }
        let d = distance(&topo.bs_position, &topo.user_positions[k]);
        let scale = los_gain(params, d)?.norm() * blockage;
        let row = sample_rayleigh(1, m, scale, rng)?;
        direct.push(row.row(0).into_owned());
    }

    Ok(ChannelRealization { hops, ris_user, direct })
}
