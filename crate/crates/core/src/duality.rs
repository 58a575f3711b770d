//! Weighted sum MSE transfer between the downlink and a virtual uplink with
//! diagonal noise covariance `Psi = diag(psi)`.
//!
//! With `V = W`, `T = B`, `zeta = eta` and `lambda = I`, the two weighted sum
//! MSEs differ by `tau_tilde - p_tilde^T psi`, where `tau_tilde` is the
//! weighted receive noise power of the downlink and `p_tilde` holds the
//! per-antenna powers of `B`. The reverse transfer `B = beta T`, `W = V / beta`
//! preserves the weighted sum MSE exactly, and the antenna powers it produces
//! are pinned to the caps when `psi` is a fixed point of [`PsiMap`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::model::{ChannelSet, DownlinkTransceiver, NoiseModel, SystemDims};

/// Per-antenna power caps.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBudget {
    caps: Vec<f64>,
}

impl PowerBudget {
    pub fn new(caps: Vec<f64>) -> Result<Self> {
        if caps.is_empty() {
            return Err(Error::arg("power budget needs at least one antenna"));
        }
        if let Some(n) = caps.iter().position(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::arg(format!(
                "power cap of antenna {n} must be positive"
            )));
        }
        Ok(PowerBudget { caps })
    }

    pub fn uniform(antennas: usize, cap: f64) -> Result<Self> {
        Self::new(vec![cap; antennas])
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn total(&self) -> f64 {
        self.caps.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    /// Largest `power_n - cap_n` (negative when every antenna has headroom).
    pub fn max_excess(&self, powers: &[f64]) -> f64 {
        powers
            .iter()
            .zip(&self.caps)
            .map(|(p, c)| p - c)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn check(&self, dims: &SystemDims) -> Result<()> {
        if self.caps.len() != dims.bs_antennas() {
            return Err(Error::dim(format!(
                "{} power caps for {} BS antennas",
                self.caps.len(),
                dims.bs_antennas()
            )));
        }
        Ok(())
    }
}

/// Virtual uplink transceiver: block-diagonal precoder `V`, decoder `T`,
/// symbol variances `zeta` and MSE weights `lambda`.
#[derive(Debug, Clone)]
pub struct UplinkTransceiver {
    pub precoder: CMat,
    pub decoder: CMat,
    pub zeta: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Diagonal uplink noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkNoise {
    psi: Vec<f64>,
}

impl UplinkNoise {
    pub fn new(psi: Vec<f64>) -> Result<Self> {
        if psi.is_empty() || psi.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::arg(
                "uplink noise variances must be positive and finite",
            ));
        }
        Ok(UplinkNoise { psi })
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn covariance(&self) -> CMat {
        CMat::from_diagonal(&DVector::from_iterator(
            self.psi.len(),
            self.psi.iter().map(|&v| C64::new(v, 0.0)),
        ))
    }
}

/// `V = W`, `T = B`, `zeta = eta`, `lambda = I`.
pub fn dl_to_ul_transfer(tr: &DownlinkTransceiver, eta: &[f64]) -> UplinkTransceiver {
    UplinkTransceiver {
        precoder: tr.decoder().clone(),
        decoder: tr.precoder().clone(),
        zeta: eta.to_vec(),
        lambda: vec![1.0; eta.len()],
    }
}

fn weighted_columns(m: &CMat, weights: &[f64]) -> CMat {
    let mut out = m.clone();
    for (j, w) in weights.iter().enumerate() {
        out.column_mut(j).scale_mut(*w);
    }
    out
}

/// Uplink weighted sum MSE `tr{lambda (T^H Sigma T - 2 Re{zeta T^H H V} + zeta)}`
/// with `Sigma = H V zeta V^H H^H + Psi`.
pub fn weighted_sum_mse_ul(
    channel: &ChannelSet,
    ul: &UplinkTransceiver,
    noise: &UplinkNoise,
) -> Result<f64> {
    let dims = channel.dims();
    let s = dims.total_streams();
    if ul.precoder.shape() != (dims.total_rx(), s)
        || ul.decoder.shape() != (dims.bs_antennas(), s)
        || ul.zeta.len() != s
        || ul.lambda.len() != s
        || noise.psi().len() != dims.bs_antennas()
    {
        return Err(Error::dim(
            "uplink transceiver does not match the system dimensions",
        ));
    }
    let hv = channel.stacked() * &ul.precoder; // N x S
    let sigma = &hv * weighted_columns(&hv, &ul.zeta).adjoint() + noise.covariance();
    let quad = ul.decoder.adjoint() * sigma * &ul.decoder;
    let cross = ul.decoder.adjoint() * &hv;
    Ok((0..s)
        .map(|l| {
            ul.lambda[l] * (quad[(l, l)].re - 2.0 * ul.zeta[l] * cross[(l, l)].re + ul.zeta[l])
        })
        .sum())
}

/// `sum_k tr{eta_k W_k^H R_nk W_k}`.
pub fn tau_tilde(
    channel: &ChannelSet,
    noise: &NoiseModel,
    decoder: &CMat,
    eta: &[f64],
) -> Result<f64> {
    let dims = channel.dims();
    if decoder.shape() != (dims.total_rx(), dims.total_streams())
        || eta.len() != dims.total_streams()
    {
        return Err(Error::dim(
            "decoder or eta does not match the system dimensions",
        ));
    }
    let mut total = 0.0;
    for k in 0..dims.users() {
        let wk = decoder
            .view(
                (dims.rx_offset(k), dims.stream_offset(k)),
                (dims.rx_antennas(k), dims.streams(k)),
            )
            .into_owned();
        let rw = noise.block(k) * &wk;
        for i in 0..dims.streams(k) {
            total += eta[dims.stream_offset(k) + i] * wk.column(i).dotc(&rw.column(i)).re;
        }
    }
    Ok(total)
}

/// Uplink MMSE decoder `T = (H V zeta V^H H^H + Psi)^{-1} H V zeta`.
pub fn uplink_mmse_receiver(
    channel: &ChannelSet,
    precoder: &CMat,
    zeta: &[f64],
    noise: &UplinkNoise,
) -> Result<CMat> {
    let dims = channel.dims();
    if precoder.shape() != (dims.total_rx(), dims.total_streams())
        || zeta.len() != dims.total_streams()
        || noise.psi().len() != dims.bs_antennas()
    {
        return Err(Error::dim(
            "uplink MMSE inputs do not match the system dimensions",
        ));
    }
    let hv = channel.stacked() * precoder;
    let hvz = weighted_columns(&hv, zeta);
    let sigma = &hv * hvz.adjoint() + noise.covariance();
    linalg::solve_hpd(&sigma, &hvz, "uplink receive covariance")
}

/// `B = beta T`, `W = V / beta` with `beta^2 = tau_tilde / sum_n psi_n |t_n|^2`.
/// Returns the downlink pair and `beta`.
pub fn ul_to_dl_transfer(
    dims: &SystemDims,
    ul: &UplinkTransceiver,
    noise: &UplinkNoise,
    tau_tilde: f64,
) -> Result<(DownlinkTransceiver, f64)> {
    if !(tau_tilde > 0.0) {
        return Err(Error::UndefinedTransfer(format!(
            "weighted noise power tau_tilde = {tau_tilde} must be positive"
        )));
    }
    if noise.psi().len() != ul.decoder.nrows() {
        return Err(Error::dim("psi length does not match the decoder rows"));
    }
    let denom: f64 = noise
        .psi()
        .iter()
        .enumerate()
        .map(|(n, p)| p * linalg::row_norm_sq(&ul.decoder, n))
        .sum();
    if !(denom > 0.0) {
        return Err(Error::UndefinedTransfer("uplink decoder is zero".into()));
    }
    let beta = (tau_tilde / denom).sqrt();
    let tr = DownlinkTransceiver::new(dims, ul.decoder.scale(beta), ul.precoder.unscale(beta))?;
    Ok((tr, beta))
}

/// Options for [`psi_fixed_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Relative residual `|psi - F(psi)| / |psi|` at which to stop. Every
    /// antenna must also satisfy `F(psi)_n <= (1 + tol) psi_n`, which bounds
    /// the transferred antenna power by `(1 + tol)` times its cap.
    pub tol: f64,
    pub max_iters: usize,
    /// The iterates are kept in `[eps, ...]` with
    /// `eps = min(1e-6, floor_ratio * min_n tau_tilde / cap_n)`.
    pub floor_ratio: f64,
    /// Step `psi <- (1 - r) psi + r clamp(F(psi))`; 1 is plain Picard.
    pub relaxation: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-8,
            max_iters: 500,
            floor_ratio: 1e-13,
            relaxation: 1.0,
        }
    }
}

/// Result of [`psi_fixed_point`].
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub noise: UplinkNoise,
    pub iterations: usize,
    /// `|psi - F(psi)|_2 / |psi|_2` at the returned point.
    pub residual: f64,
    pub floor: f64,
}

/// The power-balancing map
/// `f_n(psi) = (tau_tilde / cap_n) psi_n |t_n|^2 / sum_i psi_i |t_i|^2`,
/// where `t_n^H` is row `n` of the uplink MMSE decoder for the current `psi`.
///
/// `H W eta W^H H^H` and `H W eta` do not depend on `psi` and are formed once.
#[derive(Debug, Clone)]
pub struct PsiMap {
    signal_cov: CMat,
    cross: CMat,
    caps: Vec<f64>,
    tau_tilde: f64,
}

impl PsiMap {
    pub fn new(
        channel: &ChannelSet,
        decoder: &CMat,
        eta: &[f64],
        budget: &PowerBudget,
        tau_tilde: f64,
    ) -> Result<Self> {
        let dims = channel.dims();
        budget.check(dims)?;
        if decoder.shape() != (dims.total_rx(), dims.total_streams())
            || eta.len() != dims.total_streams()
        {
            return Err(Error::dim(
                "decoder or eta does not match the system dimensions",
            ));
        }
        if !(tau_tilde > 0.0) {
            return Err(Error::UndefinedTransfer(format!(
                "weighted noise power tau_tilde = {tau_tilde} must be positive"
            )));
        }
        let hw = channel.stacked() * decoder;
        let cross = weighted_columns(&hw, eta);
        let signal_cov = linalg::hermitian_part(&(&hw * cross.adjoint()));
        Ok(PsiMap {
            signal_cov,
            cross,
            caps: budget.caps().to_vec(),
            tau_tilde,
        })
    }

    pub fn tau_tilde(&self) -> f64 {
        self.tau_tilde
    }

    /// Row energies `|t_n|^2` of the uplink MMSE decoder for `psi`.
    pub fn row_energies(&self, psi: &[f64]) -> Result<Vec<f64>> {
        let mut sigma = self.signal_cov.clone();
        for (n, p) in psi.iter().enumerate() {
            sigma[(n, n)] += C64::new(*p, 0.0);
        }
        let t = linalg::solve_hpd(&sigma, &self.cross, "uplink receive covariance")?;
        Ok((0..t.nrows()).map(|n| linalg::row_norm_sq(&t, n)).collect())
    }

    /// Unclamped `F(psi)`.
    pub fn apply(&self, psi: &[f64]) -> Result<Vec<f64>> {
        let q = self.row_energies(psi)?;
        let denom: f64 = psi.iter().zip(&q).map(|(p, e)| p * e).sum();
        if !(denom > 0.0) {
            return Err(Error::UndefinedTransfer("uplink decoder is zero".into()));
        }
        Ok(psi
            .iter()
            .zip(&q)
            .zip(&self.caps)
            .map(|((p, e), c)| self.tau_tilde / c * p * e / denom)
            .collect())
    }

    /// Antenna powers `tau_tilde |t_n|^2 / sum_i psi_i |t_i|^2` produced by the
    /// reverse transfer at `psi`.
    pub fn transfer_powers(&self, psi: &[f64]) -> Result<Vec<f64>> {
        let q = self.row_energies(psi)?;
        let denom: f64 = psi.iter().zip(&q).map(|(p, e)| p * e).sum();
        Ok(q.iter().map(|e| self.tau_tilde * e / denom).collect())
    }

    /// Lower clamp `eps` for the iterates.
    pub fn floor(&self, floor_ratio: f64) -> f64 {
        let min_ratio = self
            .caps
            .iter()
            .map(|c| self.tau_tilde / c)
            .fold(f64::INFINITY, f64::min);
        (floor_ratio * min_ratio).min(1e-6)
    }

    fn clamp(&self, f: &mut [f64], floor: f64) {
        let total: f64 = self.caps.iter().sum();
        for (n, v) in f.iter_mut().enumerate() {
            let upper = (self.tau_tilde - floor * (total - self.caps[n])) / self.caps[n];
            *v = v.clamp(floor, upper.max(floor));
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sweeps of plain fixed-point iteration before Newton steps are tried.
const NEWTON_AFTER: usize = 10;

struct Sweep {
    raw: Vec<f64>,
    clamped: Vec<f64>,
    residual: f64,
    within_caps: bool,
}

impl Sweep {
    /// Largest `|ln(clamp(F)_n / psi_n)|`; unlike the residual it still sees
    /// antennas sitting near the floor.
    fn merit(&self, psi: &[f64]) -> f64 {
        self.clamped
            .iter()
            .zip(psi)
            .map(|(c, p)| (c / p).ln().abs())
            .fold(0.0, f64::max)
    }
}

fn sweep(map: &PsiMap, psi: &[f64], floor: f64, tol: f64) -> Result<Sweep> {
    let raw = map.apply(psi)?;
    let mut clamped = raw.clone();
    map.clamp(&mut clamped, floor);
    let diff: Vec<f64> = psi.iter().zip(&clamped).map(|(a, b)| a - b).collect();
    let within_caps = raw.iter().zip(psi).all(|(f, p)| *f <= (1.0 + tol) * p);
    Ok(Sweep {
        residual: norm2(&diff) / norm2(psi),
        raw,
        clamped,
        within_caps,
    })
}

/// `ln(F(psi)_n / psi_n)`, zero exactly at a fixed point away from the clamp.
fn log_ratio(map: &PsiMap, psi: &[f64]) -> Result<Vec<f64>> {
    Ok(map
        .apply(psi)?
        .iter()
        .zip(psi)
        .map(|(f, p)| (f / p).ln())
        .collect())
}

/// Newton step on `ln F(psi) - ln psi = 0` in `ln psi` over the antennas not
/// held at the floor, with a forward-difference Jacobian. When `snap` is set
/// and the step fails, the antenna shrinking fastest is pinned to the floor
/// and a few steps are taken from there. Returns a point only when it lowers
/// the merit.
fn newton_step(
    map: &PsiMap,
    psi: &[f64],
    current: &Sweep,
    floor: f64,
    tol: f64,
    snap: bool,
) -> Result<Option<Vec<f64>>> {
    const H: f64 = 1e-6;
    const MAX_LOG_STEP: f64 = 2.0;
    let x: Vec<f64> = psi.iter().map(|p| p.ln()).collect();
    let r: Vec<f64> = current
        .raw
        .iter()
        .zip(psi)
        .map(|(f, p)| (f / p).ln())
        .collect();
    let free: Vec<usize> = (0..psi.len())
        .filter(|&n| psi[n] > floor * (1.0 + 1e-9) || r[n] > 0.0)
        .collect();
    if free.is_empty() {
        return Ok(None);
    }
    let m = free.len();
    let mut jac = DMatrix::zeros(m, m);
    for (c, &j) in free.iter().enumerate() {
        let mut shifted = psi.to_vec();
        shifted[j] = (x[j] + H).exp();
        let rs = log_ratio(map, &shifted)?;
        for (row, &i) in free.iter().enumerate() {
            jac[(row, c)] = (rs[i] - r[i]) / H;
        }
    }
    let target = current.merit(psi);
    let mut keep: Vec<usize> = (0..m).collect();
    let Some(d) = solve_kept(&jac, &r, &free, &mut keep, MAX_LOG_STEP) else {
        return Ok(None);
    };
    let mut step = 1.0;
    for _ in 0..20 {
        let mut trial = psi.to_vec();
        for (k, &i) in free.iter().enumerate() {
            trial[i] = if d[k].is_finite() {
                (x[i] + step * d[k]).exp()
            } else {
                floor
            };
        }
        let trial = onto_budget(map, trial, floor);
        if sweep(map, &trial, floor, tol)?.merit(&trial) < target {
            return Ok(Some(trial));
        }
        step *= 0.5;
    }
    if !snap {
        return Ok(None);
    }
    // no progress: guess that the antenna shrinking fastest belongs at the
    // floor and solve again from there
    let Some(&n) = free
        .iter()
        .filter(|&&n| r[n] < 0.0)
        .min_by(|&&a, &&b| r[a].total_cmp(&r[b]))
    else {
        return Ok(None);
    };
    let mut trial = psi.to_vec();
    trial[n] = floor;
    let mut trial = onto_budget(map, trial, floor);
    for _ in 0..8 {
        let s = sweep(map, &trial, floor, tol)?;
        if s.merit(&trial) < target {
            return Ok(Some(trial));
        }
        match newton_step(map, &trial, &s, floor, tol, false)? {
            Some(next) => trial = next,
            None => break,
        }
    }
    Ok(None)
}

/// Rescales onto the budget surface every fixed point lies on, then clamps.
fn onto_budget(map: &PsiMap, mut psi: Vec<f64>, floor: f64) -> Vec<f64> {
    let spent: f64 = psi.iter().zip(&map.caps).map(|(p, c)| p * c).sum();
    psi.iter_mut().for_each(|p| *p *= map.tau_tilde / spent);
    map.clamp(&mut psi, floor);
    psi
}

/// Newton direction for the kept antennas in `ln psi`, `-inf` for the rest.
/// Antennas the step would push down by more than `max_step` join the floor
/// and the system is solved again without them.
fn solve_kept(
    jac: &DMatrix<f64>,
    r: &[f64],
    free: &[usize],
    keep: &mut Vec<usize>,
    max_step: f64,
) -> Option<Vec<f64>> {
    loop {
        let sub = jac.select_rows(keep.iter()).select_columns(keep.iter());
        let rhs = DVector::from_iterator(keep.len(), keep.iter().map(|&k| -r[free[k]]));
        let d = sub.lu().solve(&rhs)?;
        if !d.iter().all(|v| v.is_finite()) {
            return None;
        }
        let next: Vec<usize> = keep
            .iter()
            .zip(d.iter())
            .filter(|(_, v)| **v >= -max_step)
            .map(|(k, _)| *k)
            .collect();
        if next.is_empty() {
            return None;
        }
        if next.len() == keep.len() {
            let mut full = vec![f64::NEG_INFINITY; free.len()];
            for (&k, v) in keep.iter().zip(d.iter()) {
                full[k] = v.min(max_step);
            }
            return Some(full);
        }
        *keep = next;
    }
}

/// Relaxed Picard iteration on `clamp(F(psi))` from `psi_0 = tau_tilde / sum(caps)`.
/// Iterates that approach the floor converge slowly, so after a few sweeps
/// safeguarded Newton steps are tried first.
pub fn psi_fixed_point(map: &PsiMap, opts: &FixedPointOptions) -> Result<FixedPoint> {
    let total: f64 = map.caps.iter().sum();
    let floor = map.floor(opts.floor_ratio);
    let mut psi = vec![(map.tau_tilde / total).max(floor); map.caps.len()];
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iters {
        let s = sweep(map, &psi, floor, opts.tol)?;
        residual = s.residual;
        if residual <= opts.tol && s.within_caps {
            return Ok(FixedPoint {
                noise: UplinkNoise::new(psi)?,
                iterations: it + 1,
                residual,
                floor,
            });
        }
        if it >= NEWTON_AFTER {
            if let Some(next) = newton_step(map, &psi, &s, floor, opts.tol, true)? {
                psi = next;
                continue;
            }
        }
        let r = opts.relaxation;
        psi = psi
            .iter()
            .zip(&s.clamped)
            .map(|(a, b)| (1.0 - r) * a + r * b)
            .collect();
    }
    Err(Error::FixedPointDiverged {
        iterations: opts.max_iters,
        residual,
    })
}
