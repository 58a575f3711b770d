#![allow(dead_code)]

pub mod gp_grid;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use wsr_core::{CMat, ChannelSet, NoiseModel, PowerBudget, RateWeights, SystemDims, C64};

pub const OMEGA: [f64; 4] = [0.4, 0.2, 0.6, 0.25];
pub const CAP: f64 = 2.5;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_cmat(rng: &mut impl Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cgauss(rng))
}

/// Two users, two receive antennas and two streams each, four BS antennas.
pub fn sec5_dims() -> SystemDims {
    SystemDims::uniform(4, 2, 2, 2).unwrap()
}

pub fn sec5_budget() -> PowerBudget {
    PowerBudget::uniform(4, CAP).unwrap()
}

pub fn sec5_weights() -> RateWeights {
    RateWeights::new(OMEGA.to_vec()).unwrap()
}

pub fn random_channel(rng: &mut impl Rng, dims: &SystemDims) -> ChannelSet {
    ChannelSet::from_stacked(
        dims.clone(),
        random_cmat(rng, dims.bs_antennas(), dims.total_rx()),
    )
    .unwrap()
}

/// Block-diagonal decoder with random entries inside each user's block.
pub fn random_decoder(rng: &mut impl Rng, dims: &SystemDims) -> CMat {
    let mut w = CMat::zeros(dims.total_rx(), dims.total_streams());
    for k in 0..dims.users() {
        for r in 0..dims.rx_antennas(k) {
            for c in 0..dims.streams(k) {
                w[(dims.rx_offset(k) + r, dims.stream_offset(k) + c)] = cgauss(rng);
            }
        }
    }
    w
}

/// Random positive definite noise blocks `A A^H + 0.1 I`.
pub fn random_noise(rng: &mut impl Rng, dims: &SystemDims) -> NoiseModel {
    let blocks = (0..dims.users())
        .map(|k| {
            let m = dims.rx_antennas(k);
            let a = random_cmat(rng, m, m) * C64::new(0.5, 0.0);
            &a * a.adjoint() + CMat::identity(m, m) * C64::new(0.1, 0.0)
        })
        .collect();
    NoiseModel::from_blocks(dims, blocks).unwrap()
}

pub fn random_weights(rng: &mut impl Rng, s: usize) -> RateWeights {
    RateWeights::new((0..s).map(|_| rng.random_range(0.05..0.95)).collect()).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
