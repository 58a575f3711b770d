//! Alternating optimization of precoders, receivers, stream powers and the
//! auxiliary variables.

use serde::{Deserialize, Serialize};

use crate::duality::{
    dl_to_ul_transfer, psi_fixed_point, tau_tilde, ul_to_dl_transfer, uplink_mmse_receiver,
    FixedPointOptions, PowerBudget, PsiMap,
};
use crate::error::{Error, Result};
use crate::gp::{build_gp_full, build_gp_tau_nu, solve_gp, GpOptions, GpSolution, GpStatus};
use crate::linalg::{self, CMat};
use crate::model::{
    antenna_powers, downlink_mmse, downlink_mmse_receiver, reformulated_objective, symbol_rates,
    weighted_sum_rate, AuxVars, ChannelSet, CouplingMatrices, Decomposition, DownlinkTransceiver,
    NoiseModel, RateWeights,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_outer_iters: usize,
    /// Stop when the relative decrease of the merit function drops below this.
    pub outer_tol: f64,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iters: usize,
    pub fixed_point_floor_ratio: f64,
    pub fixed_point_relaxation: f64,
    /// A power program that ran out of barrier stages is still used when its
    /// KKT residual is at most this.
    pub gp_accept_kkt: f64,
    pub gp: GpOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_outer_iters: 100,
            outer_tol: 1e-6,
            fixed_point_tol: 1e-10,
            fixed_point_max_iters: FixedPointOptions::default().max_iters,
            fixed_point_floor_ratio: FixedPointOptions::default().floor_ratio,
            fixed_point_relaxation: FixedPointOptions::default().relaxation,
            gp_accept_kkt: 1e-6,
            gp: GpOptions::default(),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 || !(self.outer_tol > 0.0) {
            return Err(Error::arg(
                "outer iteration count and tolerance must be positive",
            ));
        }
        let fp = self.fixed_point();
        if !(fp.tol > 0.0) || fp.max_iters == 0 || !(fp.floor_ratio > 0.0) {
            return Err(Error::arg("fixed point options must be positive"));
        }
        if !(fp.relaxation > 0.0 && fp.relaxation <= 1.0) {
            return Err(Error::arg("fixed point relaxation must lie in (0, 1]"));
        }
        if !(self.gp_accept_kkt >= 0.0) {
            return Err(Error::arg("gp_accept_kkt must be nonnegative"));
        }
        self.gp.validate()
    }

    pub fn fixed_point(&self) -> FixedPointOptions {
        FixedPointOptions {
            tol: self.fixed_point_tol,
            max_iters: self.fixed_point_max_iters,
            floor_ratio: self.fixed_point_floor_ratio,
            relaxation: self.fixed_point_relaxation,
        }
    }
}

/// State after one outer iteration. Record 0 is the initialization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Merit function `sum theta nu^gamma / tau + tau^mu xi` with MMSE `xi`.
    pub objective: f64,
    pub weighted_sum_rate: f64,
    /// `[B B^H]_{n,n}` at the end of the iteration.
    pub antenna_powers: Vec<f64>,
    pub total_power: f64,
    /// Largest `[B B^H]_{n,n} - cap_n` over the transferred and the final
    /// precoder of this iteration.
    pub max_excess: f64,
    pub fixed_point_sweeps: usize,
    pub gp_status: Option<GpStatus>,
    pub gp_kkt_residual: Option<f64>,
}

pub type IterationTrace = Vec<IterationRecord>;

#[derive(Debug, Clone)]
pub struct Solution {
    pub transceiver: DownlinkTransceiver,
    pub aux: AuxVars,
    pub trace: IterationTrace,
    /// `false` when the iteration budget ran out before the stopping rule.
    pub converged: bool,
}

impl Solution {
    pub fn outer_iterations(&self) -> usize {
        self.trace.len() - 1
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.trace.last().expect("trace holds the initial record")
    }
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug, thiserror::Error)]
#[error("outer iteration {iteration}: {source}")]
pub struct SolveFailure {
    pub iteration: usize,
    #[source]
    pub source: Error,
    pub trace: IterationTrace,
}

/// `B` equal to the first `S` columns of `H` with each row rescaled to its
/// antenna cap.
pub fn init_precoder(channel: &ChannelSet, budget: &PowerBudget) -> Result<CMat> {
    let dims = channel.dims();
    budget.check(dims)?;
    let s = dims.total_streams();
    let mut b = channel.stacked().columns(0, s).into_owned();
    for (n, cap) in budget.caps().iter().enumerate() {
        let energy = linalg::row_norm_sq(&b, n);
        if !(energy > 0.0) {
            return Err(Error::arg(format!(
                "row {n} of the initial precoder is zero; the channel is degenerate"
            )));
        }
        b.row_mut(n).scale_mut((cap / energy).sqrt());
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport {
    pub weighted_sum_rate: f64,
    pub antenna_powers: Vec<f64>,
    pub total_power: f64,
    /// Largest `[B B^H]_{n,n} - cap_n`.
    pub max_excess: f64,
}

/// Rate and power figures for a precoder, with MMSE receivers.
pub fn evaluate_solution(
    precoder: &CMat,
    channel: &ChannelSet,
    noise: &NoiseModel,
    omega: &[f64],
    budget: &PowerBudget,
) -> Result<SolutionReport> {
    budget.check(channel.dims())?;
    let rates = symbol_rates(&downlink_mmse(channel, noise, precoder)?)?;
    if omega.len() != rates.len() {
        return Err(Error::dim("one rate weight per symbol expected"));
    }
    let powers = antenna_powers(precoder);
    Ok(SolutionReport {
        weighted_sum_rate: weighted_sum_rate(omega, &rates),
        total_power: powers.iter().sum(),
        max_excess: budget.max_excess(&powers),
        antenna_powers: powers,
    })
}

fn check_gp(sol: GpSolution, accept_kkt: f64) -> Result<GpSolution> {
    match sol.status {
        GpStatus::Converged => Ok(sol),
        GpStatus::Infeasible => Err(Error::GpInfeasible),
        GpStatus::MaxIter if sol.kkt_residual <= accept_kkt => {
            log::debug!(
                "using a power program stopped at KKT residual {:e}",
                sol.kkt_residual
            );
            Ok(sol)
        }
        GpStatus::MaxIter => Err(Error::GpNotConverged {
            gap: sol.kkt_residual,
            iterations: sol.newton_steps,
        }),
    }
}

struct Loop<'a> {
    channel: &'a ChannelSet,
    noise: &'a NoiseModel,
    budget: &'a PowerBudget,
    weights: &'a RateWeights,
    opts: &'a SolveOptions,
}

impl Loop<'_> {
    fn mmse_pair(&self, precoder: CMat) -> Result<DownlinkTransceiver> {
        let w = downlink_mmse_receiver(self.channel, self.noise, &precoder)?;
        DownlinkTransceiver::new(self.channel.dims(), precoder, w)
    }

    fn record(
        &self,
        iteration: usize,
        tr: &DownlinkTransceiver,
        aux: &AuxVars,
        transfer_excess: f64,
        sweeps: usize,
        gp: Option<&GpSolution>,
    ) -> Result<IterationRecord> {
        let xi = downlink_mmse(self.channel, self.noise, tr.precoder())?;
        let rates = symbol_rates(&xi)?;
        let powers = antenna_powers(tr.precoder());
        Ok(IterationRecord {
            iteration,
            objective: reformulated_objective(aux.tau(), aux.nu(), &xi, self.weights)?,
            weighted_sum_rate: weighted_sum_rate(self.weights.omega(), &rates),
            total_power: powers.iter().sum(),
            max_excess: self.budget.max_excess(&powers).max(transfer_excess),
            antenna_powers: powers,
            fixed_point_sweeps: sweeps,
            gp_status: gp.map(|g| g.status),
            gp_kkt_residual: gp.map(|g| g.kkt_residual),
        })
    }

    /// Optimal `(tau, nu)` for the MMSE values of `tr`.
    fn aux_for(&self, tr: &DownlinkTransceiver) -> Result<AuxVars> {
        let xi = downlink_mmse(self.channel, self.noise, tr.precoder())?;
        let prog = build_gp_tau_nu(&xi, self.weights)?;
        let sol = check_gp(
            solve_gp(&prog.problem, &self.opts.gp)?,
            self.opts.gp_accept_kkt,
        )?;
        prog.layout.aux(&sol.x)
    }

    fn initialize(&self) -> Result<(DownlinkTransceiver, AuxVars)> {
        let tr = self.mmse_pair(init_precoder(self.channel, self.budget)?)?;
        let aux = self.aux_for(&tr)?;
        Ok((tr, aux))
    }

    /// One pass of the five steps; returns the new pair, auxiliaries and record.
    fn step(
        &self,
        iteration: usize,
        tr: &DownlinkTransceiver,
        aux: &AuxVars,
    ) -> Result<(DownlinkTransceiver, AuxVars, IterationRecord)> {
        let dims = self.channel.dims();
        let eta = aux.eta(self.weights);

        // 1) virtual uplink and its noise
        let tt = tau_tilde(self.channel, self.noise, tr.decoder(), &eta)?;
        let map = PsiMap::new(self.channel, tr.decoder(), &eta, self.budget, tt)?;
        let fp = psi_fixed_point(&map, &self.opts.fixed_point())?;

        // 2) uplink MMSE decoder
        let mut ul = dl_to_ul_transfer(tr, &eta);
        ul.decoder = uplink_mmse_receiver(self.channel, &ul.precoder, &ul.zeta, &fp.noise)?;

        // 3) back to the downlink
        let (transferred, _) = ul_to_dl_transfer(dims, &ul, &fp.noise, tt)?;
        let transfer_excess = self
            .budget
            .max_excess(&antenna_powers(transferred.precoder()));

        // 4) powers and auxiliaries, from MMSE-consistent receive scalings
        let refreshed = self.mmse_pair(transferred.into_parts().0)?;
        let dec = Decomposition::from_transceiver(dims, &refreshed)?;
        let coupling = CouplingMatrices::build(self.channel, self.noise, &dec)?;
        let prog = build_gp_full(
            &coupling,
            &dec.alpha,
            self.budget,
            self.weights,
            &dec.powers,
        )?;
        let sol = check_gp(
            solve_gp(&prog.problem, &self.opts.gp)?,
            self.opts.gp_accept_kkt,
        )?;
        let powers = prog
            .layout
            .powers(&sol.x)
            .expect("joint program has powers");
        let new_aux = prog.layout.aux(&sol.x)?;
        let precoder = dec.with_powers(powers.to_vec())?.precoder();

        // 5) downlink MMSE receivers
        let next = self.mmse_pair(precoder)?;
        let rec = self.record(
            iteration,
            &next,
            &new_aux,
            transfer_excess,
            fp.iterations,
            Some(&sol),
        )?;
        Ok((next, new_aux, rec))
    }
}

/// Runs the alternating optimization from the row-scaled channel precoder
/// until the relative decrease of the merit function falls below
/// `opts.outer_tol` or `opts.max_outer_iters` passes have been made.
pub fn run_algorithm_ii(
    channel: &ChannelSet,
    noise: &NoiseModel,
    budget: &PowerBudget,
    weights: &RateWeights,
    opts: &SolveOptions,
) -> std::result::Result<Solution, SolveFailure> {
    let fail = |iteration, source, trace| SolveFailure {
        iteration,
        source,
        trace,
    };
    let setup = || -> Result<()> {
        opts.validate()?;
        budget.check(channel.dims())?;
        if weights.len() != channel.dims().total_streams() {
            return Err(Error::dim(format!(
                "{} rate weights for {} symbols",
                weights.len(),
                channel.dims().total_streams()
            )));
        }
        Ok(())
    };
    setup().map_err(|e| fail(0, e, Vec::new()))?;

    let lp = Loop {
        channel,
        noise,
        budget,
        weights,
        opts,
    };
    let (mut tr, mut aux) = lp.initialize().map_err(|e| fail(0, e, Vec::new()))?;
    let first = lp
        .record(0, &tr, &aux, f64::NEG_INFINITY, 0, None)
        .map_err(|e| fail(0, e, Vec::new()))?;
    let mut trace = vec![first];
    let mut converged = false;
    for it in 1..=opts.max_outer_iters {
        let (next, next_aux, rec) = match lp.step(it, &tr, &aux) {
            Ok(v) => v,
            Err(e) => return Err(fail(it, e, trace)),
        };
        let prev = trace.last().expect("non-empty").objective;
        let decrease = (prev - rec.objective) / prev.abs().max(f64::MIN_POSITIVE);
        log::debug!(
            "iteration {it}: objective {:.12e}, rate {:.6}, fixed point sweeps {}",
            rec.objective,
            rec.weighted_sum_rate,
            rec.fixed_point_sweeps
        );
        trace.push(rec);
        tr = next;
        aux = next_aux;
        if decrease < opts.outer_tol {
            converged = true;
            break;
        }
    }
    Ok(Solution {
        transceiver: tr,
        aux,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::model::SystemDims;

    fn scalar(p: f64, sigma2: f64) -> (ChannelSet, NoiseModel, PowerBudget) {
        let dims = SystemDims::uniform(1, 1, 1, 1).unwrap();
        (
            ChannelSet::from_stacked(dims.clone(), CMat::from_element(1, 1, C64::new(1.0, 0.0)))
                .unwrap(),
            NoiseModel::isotropic(&dims, sigma2).unwrap(),
            PowerBudget::uniform(1, p).unwrap(),
        )
    }

    #[test]
    fn single_antenna_init_uses_full_power() {
        let (ch, _, budget) = scalar(3.0, 1.0);
        let b = init_precoder(&ch, &budget).unwrap();
        assert!((b[(0, 0)].norm_sqr() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_precoder_has_no_rate() {
        let (ch, noise, budget) = scalar(3.0, 1.0);
        let rep = evaluate_solution(&CMat::zeros(1, 1), &ch, &noise, &[0.5], &budget).unwrap();
        assert_eq!(rep.weighted_sum_rate, 0.0);
        assert_eq!(rep.total_power, 0.0);
        assert_eq!(rep.max_excess, -3.0);
    }

    #[test]
    fn scalar_channel_reaches_capacity() {
        let (ch, noise, budget) = scalar(4.0, 0.5);
        let w = RateWeights::new(vec![0.3]).unwrap();
        let sol = run_algorithm_ii(&ch, &noise, &budget, &w, &SolveOptions::default()).unwrap();
        let rec = sol.final_record();
        assert!((rec.weighted_sum_rate - 0.3 * 9f64.log2()).abs() < 1e-6);
        assert!((rec.total_power - 4.0).abs() < 1e-6);
    }

    #[test]
    fn bad_options_fail_before_iterating() {
        let (ch, noise, budget) = scalar(1.0, 1.0);
        let w = RateWeights::new(vec![0.5]).unwrap();
        let opts = SolveOptions {
            outer_tol: 0.0,
            ..SolveOptions::default()
        };
        let err = run_algorithm_ii(&ch, &noise, &budget, &w, &opts).unwrap_err();
        assert!(err.trace.is_empty());
        for r in [0.0, 1.5, f64::NAN] {
            let opts = SolveOptions {
                fixed_point_relaxation: r,
                ..SolveOptions::default()
            };
            assert!(opts.validate().is_err(), "relaxation {r}");
        }
    }
}
