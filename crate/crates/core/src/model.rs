//! System dimensions, channels, transceivers and the downlink MSE/rate
//! formulas.
//!
//! Symbols are flattened user-major, stream-minor: stream `i` of user `k` is
//! symbol `l = S_1 + ... + S_{k-1} + i`. Every matrix indexed by symbol
//! (precoder columns, decoder columns, weights, auxiliaries) uses this order.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// Tolerance used for Hermitian checks on noise covariances.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Relative tolerance on the `prod(nu) = 1` constraint.
pub const NU_PRODUCT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemDims {
    bs_antennas: usize,
    rx_antennas: Vec<usize>,
    streams: Vec<usize>,
    rx_offsets: Vec<usize>,
    stream_offsets: Vec<usize>,
    stream_user: Vec<usize>,
}

impl SystemDims {
    /// `bs_antennas` transmit antennas; user `k` has `rx_antennas[k]` receive
    /// antennas and `streams[k]` symbols.
    pub fn new(bs_antennas: usize, rx_antennas: Vec<usize>, streams: Vec<usize>) -> Result<Self> {
        if bs_antennas == 0 {
            return Err(Error::dim("at least one BS antenna is required"));
        }
        if rx_antennas.is_empty() {
            return Err(Error::dim("at least one user is required"));
        }
        if rx_antennas.len() != streams.len() {
            return Err(Error::dim(format!(
                "{} receive-antenna counts but {} stream counts",
                rx_antennas.len(),
                streams.len()
            )));
        }
        for (k, (&m, &s)) in rx_antennas.iter().zip(&streams).enumerate() {
            if s == 0 || s > m {
                return Err(Error::dim(format!(
                    "user {k}: need 1 <= streams ({s}) <= receive antennas ({m})"
                )));
            }
        }
        let total_streams: usize = streams.iter().sum();
        if total_streams > bs_antennas {
            return Err(Error::dim(format!(
                "{total_streams} streams exceed {bs_antennas} BS antennas"
            )));
        }

        let prefix = |v: &[usize]| {
            v.iter()
                .scan(0, |acc, &x| {
                    let start = *acc;
                    *acc += x;
                    Some(start)
                })
                .collect::<Vec<_>>()
        };
        let stream_user = streams
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
            .collect();

        Ok(SystemDims {
            bs_antennas,
            rx_offsets: prefix(&rx_antennas),
            stream_offsets: prefix(&streams),
            rx_antennas,
            streams,
            stream_user,
        })
    }

    /// `users` identical users with `rx` antennas and `streams` symbols each.
    pub fn uniform(bs_antennas: usize, users: usize, rx: usize, streams: usize) -> Result<Self> {
        Self::new(bs_antennas, vec![rx; users], vec![streams; users])
    }

    pub fn users(&self) -> usize {
        self.rx_antennas.len()
    }

    pub fn bs_antennas(&self) -> usize {
        self.bs_antennas
    }

    pub fn rx_antennas(&self, user: usize) -> usize {
        self.rx_antennas[user]
    }

    pub fn streams(&self, user: usize) -> usize {
        self.streams[user]
    }

    pub fn rx_offset(&self, user: usize) -> usize {
        self.rx_offsets[user]
    }

    pub fn stream_offset(&self, user: usize) -> usize {
        self.stream_offsets[user]
    }

    pub fn total_rx(&self) -> usize {
        self.rx_antennas.iter().sum()
    }

    pub fn total_streams(&self) -> usize {
        self.stream_user.len()
    }

    /// User owning flattened symbol `l`.
    pub fn user_of(&self, l: usize) -> usize {
        self.stream_user[l]
    }

    /// Whether entry `(row, l)` of an `M_total x S_total` matrix lies in the
    /// block-diagonal support.
    pub fn in_decoder_support(&self, row: usize, l: usize) -> bool {
        let k = self.stream_user[l];
        row >= self.rx_offsets[k] && row < self.rx_offsets[k] + self.rx_antennas[k]
    }

    fn check_decoder(&self, w: &CMat, what: &str) -> Result<()> {
        if w.shape() != (self.total_rx(), self.total_streams()) {
            return Err(Error::dim(format!(
                "{what} is {:?}, expected {:?}",
                w.shape(),
                (self.total_rx(), self.total_streams())
            )));
        }
        for l in 0..w.ncols() {
            for r in 0..w.nrows() {
                if !self.in_decoder_support(r, l) && w[(r, l)] != C64::new(0.0, 0.0) {
                    return Err(Error::dim(format!(
                        "{what} entry ({r}, {l}) lies outside the block-diagonal support"
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_precoder(&self, b: &CMat, what: &str) -> Result<()> {
        if b.shape() != (self.bs_antennas, self.total_streams()) {
            return Err(Error::dim(format!(
                "{what} is {:?}, expected {:?}",
                b.shape(),
                (self.bs_antennas, self.total_streams())
            )));
        }
        Ok(())
    }

    fn check_len(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.total_streams() {
            return Err(Error::dim(format!(
                "{what} has length {}, expected {}",
                v.len(),
                self.total_streams()
            )));
        }
        Ok(())
    }
}

/// Downlink channels. User `k` sees `H_k^H`, with `H_k` of size `N x M_k`;
/// the stacked matrix is `H = [H_1, ..., H_K]`.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    dims: SystemDims,
    stacked: CMat,
}

impl ChannelSet {
    pub fn from_stacked(dims: SystemDims, stacked: CMat) -> Result<Self> {
        if stacked.shape() != (dims.bs_antennas(), dims.total_rx()) {
            return Err(Error::dim(format!(
                "stacked channel is {:?}, expected {:?}",
                stacked.shape(),
                (dims.bs_antennas(), dims.total_rx())
            )));
        }
        if !linalg::is_finite(&stacked) {
            return Err(Error::arg("channel has non-finite entries"));
        }
        Ok(ChannelSet { dims, stacked })
    }

    pub fn from_blocks(dims: SystemDims, blocks: &[CMat]) -> Result<Self> {
        if blocks.len() != dims.users() {
            return Err(Error::dim(format!(
                "{} channel blocks for {} users",
                blocks.len(),
                dims.users()
            )));
        }
        let mut stacked = CMat::zeros(dims.bs_antennas(), dims.total_rx());
        for (k, hk) in blocks.iter().enumerate() {
            if hk.shape() != (dims.bs_antennas(), dims.rx_antennas(k)) {
                return Err(Error::dim(format!("channel block {k} is {:?}", hk.shape())));
            }
            stacked
                .columns_mut(dims.rx_offset(k), dims.rx_antennas(k))
                .copy_from(hk);
        }
        Self::from_stacked(dims, stacked)
    }

    pub fn dims(&self) -> &SystemDims {
        &self.dims
    }

    pub fn stacked(&self) -> &CMat {
        &self.stacked
    }

    /// `H_k`, the `N x M_k` block of user `k`.
    pub fn block(&self, user: usize) -> CMat {
        self.stacked
            .columns(self.dims.rx_offset(user), self.dims.rx_antennas(user))
            .into_owned()
    }
}

/// Receiver noise covariances `R_nk`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    blocks: Vec<CMat>,
    sigma2: Option<f64>,
}

impl NoiseModel {
    /// `R_n = sigma2 * I`.
    pub fn isotropic(dims: &SystemDims, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::arg(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        let blocks = (0..dims.users())
            .map(|k| {
                let m = dims.rx_antennas(k);
                CMat::identity(m, m).scale(sigma2)
            })
            .collect();
        Ok(NoiseModel {
            blocks,
            sigma2: Some(sigma2),
        })
    }

    pub fn from_blocks(dims: &SystemDims, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != dims.users() {
            return Err(Error::dim(format!(
                "{} noise blocks for {} users",
                blocks.len(),
                dims.users()
            )));
        }
        for (k, r) in blocks.iter().enumerate() {
            let m = dims.rx_antennas(k);
            if r.shape() != (m, m) {
                return Err(Error::dim(format!("noise block {k} is {:?}", r.shape())));
            }
            if !linalg::is_hermitian(r, HERMITIAN_TOL) {
                return Err(Error::NotPositiveDefinite(format!(
                    "noise block {k} is not Hermitian"
                )));
            }
            linalg::cholesky(r, &format!("noise block {k}"))?;
        }
        Ok(NoiseModel {
            blocks,
            sigma2: None,
        })
    }

    pub fn block(&self, user: usize) -> &CMat {
        &self.blocks[user]
    }

    /// Variance of the isotropic model, if it was built that way.
    pub fn sigma2(&self) -> Option<f64> {
        self.sigma2
    }

    /// `blkdiag(R_n1, ..., R_nK)`.
    pub fn stacked(&self, dims: &SystemDims) -> CMat {
        let m = dims.total_rx();
        let mut out = CMat::zeros(m, m);
        for (k, r) in self.blocks.iter().enumerate() {
            let o = dims.rx_offset(k);
            out.view_mut((o, o), r.shape()).copy_from(r);
        }
        out
    }

    fn check(&self, dims: &SystemDims) -> Result<()> {
        if self.blocks.len() != dims.users()
            || self
                .blocks
                .iter()
                .enumerate()
                .any(|(k, r)| r.nrows() != dims.rx_antennas(k))
        {
            return Err(Error::dim(
                "noise model does not match the system dimensions",
            ));
        }
        Ok(())
    }
}

/// Downlink precoder `B` (`N x S`) and block-diagonal decoder `W` (`M x S`).
#[derive(Debug, Clone)]
pub struct DownlinkTransceiver {
    precoder: CMat,
    decoder: CMat,
}

impl DownlinkTransceiver {
    pub fn new(dims: &SystemDims, precoder: CMat, decoder: CMat) -> Result<Self> {
        dims.check_precoder(&precoder, "precoder")?;
        dims.check_decoder(&decoder, "decoder")?;
        Ok(DownlinkTransceiver { precoder, decoder })
    }

    pub fn precoder(&self) -> &CMat {
        &self.precoder
    }

    pub fn decoder(&self) -> &CMat {
        &self.decoder
    }

    pub fn into_parts(self) -> (CMat, CMat) {
        (self.precoder, self.decoder)
    }
}

/// Rate weights and the exponents derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct RateWeights {
    omega: Vec<f64>,
    gamma: Vec<f64>,
    mu: Vec<f64>,
    theta: Vec<f64>,
}

impl RateWeights {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::arg("no rate weights given"));
        }
        if let Some((l, w)) = omega
            .iter()
            .enumerate()
            .find(|(_, &w)| !(w > 0.0 && w < 1.0))
        {
            return Err(Error::arg(format!(
                "rate weight {l} = {w} is outside the open interval (0, 1)"
            )));
        }
        let gamma = omega.iter().map(|w| 1.0 / (1.0 - w)).collect();
        let mu: Vec<f64> = omega.iter().map(|w| 1.0 / w - 1.0).collect();
        let theta = omega
            .iter()
            .zip(&mu)
            .map(|(w, m)| w * m.powf(1.0 - w))
            .collect();
        Ok(RateWeights {
            omega,
            gamma,
            mu,
            theta,
        })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// MSE weights `eta_l = tau_l^{mu_l}`.
    pub fn eta(&self, tau: &[f64]) -> Vec<f64> {
        tau.iter().zip(&self.mu).map(|(t, m)| t.powf(*m)).collect()
    }
}

/// Auxiliary variables `tau` and `nu` of the reformulated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxVars {
    tau: Vec<f64>,
    nu: Vec<f64>,
}

impl AuxVars {
    pub fn new(tau: Vec<f64>, nu: Vec<f64>) -> Result<Self> {
        if tau.len() != nu.len() || tau.is_empty() {
            return Err(Error::dim(
                "tau and nu must be non-empty and of equal length",
            ));
        }
        if tau.iter().chain(&nu).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::arg(
                "auxiliary variables must be positive and finite",
            ));
        }
        let log_prod: f64 = nu.iter().map(|v| v.ln()).sum();
        if log_prod.exp_m1().abs() > NU_PRODUCT_TOL {
            return Err(Error::arg(format!(
                "product of nu is {}, expected 1",
                log_prod.exp()
            )));
        }
        Ok(AuxVars { tau, nu })
    }

    /// `tau = nu = 1`.
    pub fn ones(len: usize) -> Self {
        AuxVars {
            tau: vec![1.0; len],
            nu: vec![1.0; len],
        }
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn eta(&self, weights: &RateWeights) -> Vec<f64> {
        weights.eta(&self.tau)
    }
}

/// Per-antenna transmit powers `[B B^H]_{n,n}`.
pub fn antenna_powers(precoder: &CMat) -> Vec<f64> {
    (0..precoder.nrows())
        .map(|n| linalg::row_norm_sq(precoder, n))
        .collect()
}

/// Per-symbol downlink MSEs for an arbitrary transceiver pair, read off the
/// diagonal of `W^H (H^H B B^H H + R_n) W - 2 Re{W^H H^H B} + I`.
pub fn downlink_symbol_mse(
    channel: &ChannelSet,
    noise: &NoiseModel,
    tr: &DownlinkTransceiver,
) -> Result<Vec<f64>> {
    let dims = channel.dims();
    dims.check_precoder(tr.precoder(), "precoder")?;
    dims.check_decoder(tr.decoder(), "decoder")?;
    noise.check(dims)?;
    let e = downlink_error_matrix(channel, noise, tr);
    Ok((0..e.nrows()).map(|l| e[(l, l)].re).collect())
}

/// Downlink weighted sum MSE `tr{eta [W^H Gamma W - 2 Re{W^H H^H B} + I]}`.
pub fn weighted_sum_mse_dl(
    channel: &ChannelSet,
    noise: &NoiseModel,
    tr: &DownlinkTransceiver,
    eta: &[f64],
) -> Result<f64> {
    let dims = channel.dims();
    dims.check_precoder(tr.precoder(), "precoder")?;
    dims.check_decoder(tr.decoder(), "decoder")?;
    dims.check_len(eta, "eta")?;
    noise.check(dims)?;
    let e = downlink_error_matrix(channel, noise, tr);
    Ok(eta.iter().enumerate().map(|(l, w)| w * e[(l, l)].re).sum())
}

fn downlink_error_matrix(
    channel: &ChannelSet,
    noise: &NoiseModel,
    tr: &DownlinkTransceiver,
) -> CMat {
    let h = channel.stacked();
    let b = tr.precoder();
    let w = tr.decoder();
    let hb = h.adjoint() * b; // M x S
    let gamma = linalg::hermitian_part(&(&hb * hb.adjoint() + noise.stacked(channel.dims())));
    let cross = w.adjoint() * &hb;
    let mut e = w.adjoint() * gamma * w;
    let s = e.nrows();
    for i in 0..s {
        for j in 0..s {
            e[(i, j)] -= C64::new(2.0 * cross[(i, j)].re, 0.0);
        }
        e[(i, i)] += C64::new(1.0, 0.0);
    }
    e
}

/// Per-user `Gamma_k = H_k^H B B^H H_k + R_nk` and `H_k^H B_k`.
fn user_covariance(
    channel: &ChannelSet,
    noise: &NoiseModel,
    precoder: &CMat,
    user: usize,
) -> (CMat, CMat) {
    let dims = channel.dims();
    let hk = channel.block(user);
    let hb = hk.adjoint() * precoder;
    let gamma = linalg::hermitian_part(&(&hb * hb.adjoint() + noise.block(user)));
    let own = hb
        .columns(dims.stream_offset(user), dims.streams(user))
        .into_owned();
    (gamma, own)
}

/// MMSE receivers `W_k = (H_k^H B B^H H_k + R_nk)^{-1} H_k^H B_k`.
pub fn downlink_mmse_receiver(
    channel: &ChannelSet,
    noise: &NoiseModel,
    precoder: &CMat,
) -> Result<CMat> {
    let dims = channel.dims();
    dims.check_precoder(precoder, "precoder")?;
    noise.check(dims)?;
    let mut w = CMat::zeros(dims.total_rx(), dims.total_streams());
    for k in 0..dims.users() {
        let (gamma, own) = user_covariance(channel, noise, precoder, k);
        let wk = linalg::solve_hpd(&gamma, &own, &format!("receive covariance of user {k}"))?;
        w.view_mut((dims.rx_offset(k), dims.stream_offset(k)), wk.shape())
            .copy_from(&wk);
    }
    Ok(w)
}

/// Minimum MSEs `1 - b_l^H H_k Gamma_k^{-1} H_k^H b_l`.
pub fn downlink_mmse(
    channel: &ChannelSet,
    noise: &NoiseModel,
    precoder: &CMat,
) -> Result<Vec<f64>> {
    let dims = channel.dims();
    dims.check_precoder(precoder, "precoder")?;
    noise.check(dims)?;
    let mut xi = Vec::with_capacity(dims.total_streams());
    for k in 0..dims.users() {
        let (gamma, own) = user_covariance(channel, noise, precoder, k);
        let solved = linalg::solve_hpd(&gamma, &own, &format!("receive covariance of user {k}"))?;
        for i in 0..own.ncols() {
            let quad = own.column(i).dotc(&solved.column(i)).re;
            xi.push(1.0 - quad);
        }
    }
    Ok(xi)
}

/// Rates `R_l = -log2 xi_l` from minimum MSEs.
pub fn symbol_rates(xi_min: &[f64]) -> Result<Vec<f64>> {
    xi_min
        .iter()
        .enumerate()
        .map(|(l, &x)| {
            if !(x > 0.0) || !x.is_finite() {
                Err(Error::arg(format!(
                    "MMSE of symbol {l} is {x}, expected a value in (0, 1]"
                )))
            } else if x > 1.0 + 1e-12 {
                Err(Error::arg(format!("MMSE of symbol {l} is {x} > 1")))
            } else {
                Ok((-x.log2()).max(0.0))
            }
        })
        .collect()
}

pub fn weighted_sum_rate(omega: &[f64], rates: &[f64]) -> f64 {
    omega.iter().zip(rates).map(|(w, r)| w * r).sum()
}

/// `sum_l theta_l nu_l^{gamma_l} / tau_l + tau_l^{mu_l} xi_l`, the merit
/// function monitored by the outer loop.
pub fn reformulated_objective(
    tau: &[f64],
    nu: &[f64],
    xi: &[f64],
    weights: &RateWeights,
) -> Result<f64> {
    let s = weights.len();
    if tau.len() != s || nu.len() != s || xi.len() != s {
        return Err(Error::dim(
            "objective inputs must all have one entry per symbol",
        ));
    }
    if tau.iter().chain(nu).any(|v| !(*v > 0.0)) {
        return Err(Error::arg("tau and nu must be positive"));
    }
    Ok((0..s)
        .map(|l| {
            weights.theta[l] * nu[l].powf(weights.gamma[l]) / tau[l]
                + tau[l].powf(weights.mu[l]) * xi[l]
        })
        .sum())
}

/// `B_k = G_k P_k^{1/2}`, `W_k = U_k alpha_k P_k^{-1/2}` with unit-norm
/// columns in `G` and `U`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub directions: CMat,
    pub powers: Vec<f64>,
    pub receive_directions: CMat,
    pub alpha: Vec<f64>,
}

impl Decomposition {
    pub fn from_transceiver(dims: &SystemDims, tr: &DownlinkTransceiver) -> Result<Self> {
        let b = tr.precoder();
        let w = tr.decoder();
        dims.check_precoder(b, "precoder")?;
        dims.check_decoder(w, "decoder")?;
        let s = dims.total_streams();
        let mut g = b.clone();
        let mut u = w.clone();
        let mut powers = Vec::with_capacity(s);
        let mut alpha = Vec::with_capacity(s);
        for l in 0..s {
            let p = linalg::column_norm_sq(b, l);
            let wn = linalg::column_norm_sq(w, l).sqrt();
            if !(p > 0.0) || !(wn > 0.0) {
                return Err(Error::DegenerateStream { stream: l });
            }
            let bn = p.sqrt();
            g.column_mut(l).unscale_mut(bn);
            u.column_mut(l).unscale_mut(wn);
            powers.push(p);
            alpha.push(wn * bn);
        }
        Ok(Decomposition {
            directions: g,
            powers,
            receive_directions: u,
            alpha,
        })
    }

    pub fn precoder(&self) -> CMat {
        let mut b = self.directions.clone();
        for (l, p) in self.powers.iter().enumerate() {
            b.column_mut(l).scale_mut(p.sqrt());
        }
        b
    }

    pub fn decoder(&self) -> CMat {
        let mut w = self.receive_directions.clone();
        for (l, (a, p)) in self.alpha.iter().zip(&self.powers).enumerate() {
            w.column_mut(l).scale_mut(a / p.sqrt());
        }
        w
    }

    pub fn recompose(&self, dims: &SystemDims) -> Result<DownlinkTransceiver> {
        DownlinkTransceiver::new(dims, self.precoder(), self.decoder())
    }

    /// Same directions and receiver scalings with new stream powers.
    pub fn with_powers(&self, powers: Vec<f64>) -> Result<Self> {
        if powers.len() != self.powers.len() {
            return Err(Error::dim("power vector length mismatch"));
        }
        if let Some(l) = powers.iter().position(|p| !(*p > 0.0)) {
            return Err(Error::DegenerateStream { stream: l });
        }
        Ok(Decomposition {
            powers,
            ..self.clone()
        })
    }
}

/// Interference coupling `Phi`, the self terms `D`, the per-antenna power
/// rows `varsigma` and the receive noise gains `u_l^H R_n u_l`.
#[derive(Debug, Clone)]
pub struct CouplingMatrices {
    /// `S x S`, `phi[(l, j)] = |g_l^H H u_j|^2` off the diagonal, zero on it.
    pub phi: DMatrix<f64>,
    /// Signed diagonal `alpha_l^2 |g_l^H H u_l|^2 - 2 alpha_l Re(u_l^H H^H g_l) + 1`.
    pub d: Vec<f64>,
    /// `N x S`, `varsigma[(n, l)] = |G_{n,l}|^2`.
    pub varsigma: DMatrix<f64>,
    pub noise_gain: Vec<f64>,
}

impl CouplingMatrices {
    pub fn build(channel: &ChannelSet, noise: &NoiseModel, dec: &Decomposition) -> Result<Self> {
        let dims = channel.dims();
        dims.check_precoder(&dec.directions, "transmit directions")?;
        dims.check_decoder(&dec.receive_directions, "receive directions")?;
        dims.check_len(&dec.alpha, "alpha")?;
        noise.check(dims)?;
        let s = dims.total_streams();
        let gain = dec.directions.adjoint() * channel.stacked() * &dec.receive_directions;
        let mut phi = DMatrix::zeros(s, s);
        for l in 0..s {
            for j in 0..s {
                if l != j {
                    phi[(l, j)] = gain[(l, j)].norm_sqr();
                }
            }
        }
        let d = (0..s)
            .map(|l| {
                let a = dec.alpha[l];
                a * a * gain[(l, l)].norm_sqr() - 2.0 * a * gain[(l, l)].re + 1.0
            })
            .collect();
        let varsigma = dec.directions.map(|z| z.norm_sqr());
        let rn = noise.stacked(dims);
        let noise_gain = (0..s)
            .map(|l| {
                let u = dec.receive_directions.column(l);
                u.dotc(&(&rn * u)).re
            })
            .collect();
        Ok(CouplingMatrices {
            phi,
            d,
            varsigma,
            noise_gain,
        })
    }

    pub fn streams(&self) -> usize {
        self.d.len()
    }

    /// Per-symbol MSEs as functions of the stream powers:
    /// `xi_l = p_l^{-1} [(D + alpha^2 Phi^T) p]_l + p_l^{-1} alpha_l^2 u_l^H R_n u_l`.
    pub fn mse_from_powers(&self, alpha: &[f64], powers: &[f64]) -> Result<Vec<f64>> {
        let s = self.streams();
        if alpha.len() != s || powers.len() != s {
            return Err(Error::dim("alpha and powers need one entry per symbol"));
        }
        if let Some(l) = powers.iter().position(|p| !(*p > 0.0)) {
            return Err(Error::arg(format!("power of stream {l} is not positive")));
        }
        Ok((0..s)
            .map(|l| {
                let a2 = alpha[l] * alpha[l];
                let cross: f64 = (0..s).map(|j| self.phi[(j, l)] * powers[j]).sum();
                self.d[l] + a2 * (cross + self.noise_gain[l]) / powers[l]
            })
            .collect())
    }

    /// `varsigma_n^T p`, the per-antenna powers implied by stream powers.
    pub fn antenna_powers(&self, powers: &[f64]) -> Vec<f64> {
        (0..self.varsigma.nrows())
            .map(|n| {
                (0..powers.len())
                    .map(|l| self.varsigma[(n, l)] * powers[l])
                    .sum()
            })
            .collect()
    }
}
