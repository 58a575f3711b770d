//! Joint power programs and a grid oracle for the two-symbol case.

use rand::Rng;
use wsr_core::gp::{build_gp_full, AuxProgram};
use wsr_core::model::{downlink_mmse_receiver, CouplingMatrices, Decomposition};
use wsr_core::{DownlinkTransceiver, NoiseModel, PowerBudget, RateWeights, SystemDims, C64};

use super::*;

pub struct Full {
    pub coupling: CouplingMatrices,
    pub alpha: Vec<f64>,
    pub powers: Vec<f64>,
    pub budget: PowerBudget,
    pub weights: RateWeights,
}

pub fn full_instance(
    seed: u64,
    dims: SystemDims,
    budget: PowerBudget,
    weights: Option<RateWeights>,
) -> Full {
    let mut rng = rng(seed);
    let ch = random_channel(&mut rng, &dims);
    let noise = NoiseModel::isotropic(&dims, rng.random_range(0.05..1.0)).unwrap();
    let b = random_cmat(&mut rng, dims.bs_antennas(), dims.total_streams()) * C64::new(0.5, 0.0);
    let w = downlink_mmse_receiver(&ch, &noise, &b).unwrap();
    let tr = DownlinkTransceiver::new(&dims, b, w).unwrap();
    let dec = Decomposition::from_transceiver(&dims, &tr).unwrap();
    let weights = weights.unwrap_or_else(|| moderate_weights(&mut rng, dims.total_streams()));
    Full {
        coupling: CouplingMatrices::build(&ch, &noise, &dec).unwrap(),
        alpha: dec.alpha.clone(),
        powers: dec.powers.clone(),
        budget,
        weights,
    }
}

/// Weights away from 1, where the optimal `tau` stays inside the log-domain box.
pub fn moderate_weights(rng: &mut impl Rng, s: usize) -> RateWeights {
    RateWeights::new((0..s).map(|_| rng.random_range(0.05..0.8)).collect()).unwrap()
}

pub fn program(f: &Full) -> AuxProgram {
    build_gp_full(&f.coupling, &f.alpha, &f.budget, &f.weights, &f.powers).unwrap()
}

/// `min_tau a / tau + b tau^mu`
pub fn tau_eliminated(a: f64, b: f64, mu: f64) -> f64 {
    let tau = (a / (mu * b)).powf(1.0 / (mu + 1.0));
    a / tau + b * tau.powf(mu)
}

/// Two-symbol objective with tau eliminated, as a function of
/// `(ln nu_1, ln p_1, ln s)` where `p_2 = s * p2_max(p_1)`.
pub struct TwoSymbol<'a> {
    pub f: &'a Full,
}

impl TwoSymbol<'_> {
    pub fn p1_max(&self) -> f64 {
        let v = &self.f.coupling.varsigma;
        (0..v.nrows())
            .filter(|&n| v[(n, 0)] > 0.0)
            .map(|n| self.f.budget.caps()[n] / v[(n, 0)])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn p2_max(&self, p1: f64) -> f64 {
        let v = &self.f.coupling.varsigma;
        (0..v.nrows())
            .filter(|&n| v[(n, 1)] > 0.0)
            .map(|n| (self.f.budget.caps()[n] - v[(n, 0)] * p1) / v[(n, 1)])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn value(&self, ln_nu: f64, ln_p1: f64, ln_s: f64) -> f64 {
        let p1 = ln_p1.exp();
        let p2 = ln_s.exp() * self.p2_max(p1);
        if p2.is_nan() || p2 <= 0.0 {
            return f64::INFINITY;
        }
        let xi = self
            .f
            .coupling
            .mse_from_powers(&self.f.alpha, &[p1, p2])
            .unwrap();
        let w = &self.f.weights;
        let nu = [ln_nu.exp(), (-ln_nu).exp()];
        (0..2)
            .map(|l| tau_eliminated(w.theta()[l] * nu[l].powf(w.gamma()[l]), xi[l], w.mu()[l]))
            .sum()
    }

    pub fn brute_force(&self) -> f64 {
        let top = self.p1_max().ln();
        let mut lo = [-10.0, top - 14.0, -14.0];
        let mut hi = [10.0, top, 0.0];
        let mut best = (f64::INFINITY, [0.0; 3]);
        for n in [100, 40, 40, 40, 40, 40, 40] {
            let step: Vec<f64> = (0..3).map(|d| (hi[d] - lo[d]) / (n - 1) as f64).collect();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let z = [
                            lo[0] + step[0] * i as f64,
                            lo[1] + step[1] * j as f64,
                            lo[2] + step[2] * k as f64,
                        ];
                        let v = self.value(z[0], z[1], z[2]);
                        if v < best.0 {
                            best = (v, z);
                        }
                    }
                }
            }
            for d in 0..3 {
                lo[d] = best.1[d] - 4.0 * step[d];
                hi[d] = best.1[d] + 4.0 * step[d];
            }
            hi[1] = hi[1].min(top);
            hi[2] = hi[2].min(0.0);
        }
        best.0
    }
}

/// Two BS antennas with random caps, two single-antenna users.
pub fn two_symbol_case(seed: u64) -> Full {
    let mut r = rng(1000 + seed);
    let budget =
        PowerBudget::new(vec![r.random_range(0.5..3.0), r.random_range(0.5..3.0)]).unwrap();
    full_instance(seed, SystemDims::uniform(2, 2, 1, 1).unwrap(), budget, None)
}
