use super::{GpProblem, Monomial, Posynomial};
use crate::duality::PowerBudget;
use crate::error::{Error, Result};
use crate::model::{AuxVars, CouplingMatrices, RateWeights};

/// Where `tau`, `nu` and (optionally) the stream powers sit in a solution
/// vector: `tau` at `0..S`, `nu` at `S..2S`, powers at `2S..3S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuxLayout {
    pub streams: usize,
    pub with_powers: bool,
}

impl AuxLayout {
    pub fn tau<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.streams]
    }

    pub fn nu<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.streams..2 * self.streams]
    }

    pub fn powers<'a>(&self, x: &'a [f64]) -> Option<&'a [f64]> {
        self.with_powers
            .then(|| &x[2 * self.streams..3 * self.streams])
    }

    pub fn aux(&self, x: &[f64]) -> Result<AuxVars> {
        AuxVars::new(self.tau(x).to_vec(), self.nu(x).to_vec())
    }
}

#[derive(Debug, Clone)]
pub struct AuxProgram {
    pub problem: GpProblem,
    pub layout: AuxLayout,
}

fn aux_variables(gp: &mut GpProblem, s: usize) {
    for l in 0..s {
        gp.add_variable(format!("tau_{}", l + 1));
    }
    for l in 0..s {
        gp.add_variable(format!("nu_{}", l + 1));
    }
}

fn nu_product(s: usize) -> Monomial {
    Monomial::new(1.0, (s..2 * s).map(|v| (v, 1.0)).collect())
}

/// `theta_l nu_l^{gamma_l} / tau_l`
fn rate_term(weights: &RateWeights, l: usize, s: usize) -> Monomial {
    Monomial::new(
        weights.theta()[l],
        vec![(l, -1.0), (s + l, weights.gamma()[l])],
    )
}

/// Auxiliary update for fixed MSEs:
/// `min sum_l theta_l nu_l^{gamma_l} / tau_l + tau_l^{mu_l} xi_l` s.t. `prod nu = 1`.
pub fn build_gp_tau_nu(xi_min: &[f64], weights: &RateWeights) -> Result<AuxProgram> {
    let s = weights.len();
    if xi_min.len() != s {
        return Err(Error::dim(format!("{} MSEs for {s} symbols", xi_min.len())));
    }
    if let Some(l) = xi_min.iter().position(|x| !(*x > 0.0 && *x <= 1.0 + 1e-12)) {
        return Err(Error::arg(format!(
            "MMSE of symbol {l} is {}, expected (0, 1]",
            xi_min[l]
        )));
    }
    let mut gp = GpProblem::new();
    aux_variables(&mut gp, s);
    let mut obj = Posynomial::default();
    for l in 0..s {
        obj.push(rate_term(weights, l, s));
        obj.push(Monomial::new(xi_min[l], vec![(l, weights.mu()[l])]));
    }
    gp.set_objective(obj);
    gp.add_equality(nu_product(s), 1.0);
    gp.set_start(vec![1.0; 2 * s]);
    Ok(AuxProgram {
        problem: gp,
        layout: AuxLayout {
            streams: s,
            with_powers: false,
        },
    })
}

/// Joint update of `tau`, `nu` and the stream powers `p` with the MSEs
/// written as posynomials in `p`:
/// `xi_l = D_l + alpha_l^2 (sum_{j != l} Phi_{j,l} p_j + n_l) / p_l`,
/// subject to `varsigma_n^T p <= cap_n` and `prod nu = 1`.
///
/// `current_powers` seeds the start point, scaled into the strict interior
/// when it touches or violates a cap.
pub fn build_gp_full(
    coupling: &CouplingMatrices,
    alpha: &[f64],
    budget: &PowerBudget,
    weights: &RateWeights,
    current_powers: &[f64],
) -> Result<AuxProgram> {
    let s = weights.len();
    if coupling.streams() != s || alpha.len() != s || current_powers.len() != s {
        return Err(Error::dim(
            "coupling, alpha, powers and weights disagree on the symbol count",
        ));
    }
    if coupling.varsigma.nrows() != budget.len() {
        return Err(Error::dim("coupling rows do not match the power budget"));
    }
    if let Some(l) = coupling.d.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::NonPositiveCoupling {
            stream: l,
            value: coupling.d[l],
        });
    }
    if let Some(l) = current_powers
        .iter()
        .position(|p| !(*p > 0.0 && p.is_finite()))
    {
        return Err(Error::arg(format!(
            "current power of stream {l} is not positive"
        )));
    }

    let mut gp = GpProblem::new();
    aux_variables(&mut gp, s);
    for l in 0..s {
        gp.add_variable(format!("p_{}", l + 1));
    }
    let p = |l: usize| 2 * s + l;

    let mut obj = Posynomial::default();
    for l in 0..s {
        let mu = weights.mu()[l];
        let a2 = alpha[l] * alpha[l];
        obj.push(rate_term(weights, l, s));
        obj.push(Monomial::new(coupling.d[l], vec![(l, mu)]));
        for j in (0..s).filter(|&j| j != l) {
            let c = a2 * coupling.phi[(j, l)];
            if c > 0.0 {
                obj.push(Monomial::new(c, vec![(l, mu), (p(j), 1.0), (p(l), -1.0)]));
            }
        }
        let c = a2 * coupling.noise_gain[l];
        if c > 0.0 {
            obj.push(Monomial::new(c, vec![(l, mu), (p(l), -1.0)]));
        }
    }
    gp.set_objective(obj);

    for (n, &cap) in budget.caps().iter().enumerate() {
        let row: Vec<Monomial> = (0..s)
            .filter(|&l| coupling.varsigma[(n, l)] > 0.0)
            .map(|l| Monomial::new(coupling.varsigma[(n, l)], vec![(p(l), 1.0)]))
            .collect();
        if !row.is_empty() {
            gp.add_inequality(Posynomial::new(row), cap);
        }
    }
    gp.add_equality(nu_product(s), 1.0);

    let loads = coupling.antenna_powers(current_powers);
    let headroom = budget
        .caps()
        .iter()
        .zip(&loads)
        .filter(|(_, load)| **load > 0.0)
        .map(|(cap, load)| cap / load)
        .fold(f64::INFINITY, f64::min);
    let scale = if headroom > 1.0 { 1.0 } else { 0.99 * headroom };
    let mut start = vec![1.0; 2 * s];
    start.extend(current_powers.iter().map(|q| q * scale));
    gp.set_start(start);

    Ok(AuxProgram {
        problem: gp,
        layout: AuxLayout {
            streams: s,
            with_powers: true,
        },
    })
}
