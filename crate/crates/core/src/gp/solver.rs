use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{GpProblem, Monomial, Posynomial};
use crate::error::{Error, Result};

/// Every variable is kept in `[1e-12, 1e12]` by barrier terms on
/// `|ln x_v| <= LOG_BOX`, which keeps the exponentials finite when the
/// objective is flat or decreasing towards zero in some variable.
const LOG_BOX: f64 = 27.631_021_115_928_547; // ln(1e12)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpOptions {
    /// Stop once the barrier gap `m / t` falls below this. The objective is
    /// handled as `ln f0`, so the gap bounds the relative suboptimality.
    pub gap_tol: f64,
    /// Newton decrement `lambda^2 / 2` at which a centering step ends.
    pub newton_tol: f64,
    /// Largest KKT residual accepted as converged once the gap is closed.
    pub kkt_tol: f64,
    pub t0: f64,
    pub barrier_factor: f64,
    /// Maximum number of barrier (centering) stages.
    pub max_iters: usize,
    /// Maximum Newton steps per centering stage.
    pub max_newton_steps: usize,
    pub armijo_slope: f64,
    pub backtrack: f64,
}

impl Default for GpOptions {
    fn default() -> Self {
        GpOptions {
            gap_tol: 1e-11,
            newton_tol: 1e-20,
            kkt_tol: 1e-8,
            t0: 1.0,
            barrier_factor: 10.0,
            max_iters: 200,
            max_newton_steps: 100,
            armijo_slope: 0.25,
            backtrack: 0.5,
        }
    }
}

impl GpOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gap_tol > 0.0
            && self.newton_tol > 0.0
            && self.kkt_tol > 0.0
            && self.t0 > 0.0
            && self.barrier_factor > 1.0
            && self.max_iters > 0
            && self.max_newton_steps > 0
            && self.armijo_slope > 0.0
            && self.armijo_slope < 0.5
            && self.backtrack > 0.0
            && self.backtrack < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!("invalid GP solver options {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct GpSolution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// `max(|grad ln f0 + sum_i lambda_i grad g_i|_inf, m / t)` in log coordinates.
    pub kkt_residual: f64,
    pub status: GpStatus,
    pub newton_steps: usize,
}

/// `ln sum_i exp(F z + b)_i` for a posynomial in reduced log coordinates.
#[derive(Debug, Clone)]
struct LogSumExp {
    f: DMatrix<f64>,
    b: DVector<f64>,
}

struct Lse {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl LogSumExp {
    fn value(&self, z: &DVector<f64>) -> f64 {
        let v = &self.f * z + &self.b;
        let m = v.max();
        m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }

    fn eval(&self, z: &DVector<f64>) -> Lse {
        let v = &self.f * z + &self.b;
        let m = v.max();
        let e = v.map(|x| (x - m).exp());
        let total = e.sum();
        let s = e / total;
        let grad = self.f.transpose() * &s;
        let mut weighted = self.f.clone();
        for (i, si) in s.iter().enumerate() {
            weighted.row_mut(i).scale_mut(*si);
        }
        let hess = self.f.transpose() * weighted - &grad * grad.transpose();
        Lse {
            value: m + total.ln(),
            grad,
            hess,
        }
    }
}

/// `y = y0 + Z z` parametrizes the affine set of the equality constraints.
#[derive(Debug, Clone)]
struct Reduction {
    y0: DVector<f64>,
    z: DMatrix<f64>,
    free: Vec<usize>,
}

impl Reduction {
    fn lift(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.y0 + &self.z * z
    }

    /// `y_v - LOG_BOX <= 0` and `-y_v - LOG_BOX <= 0` as single-term
    /// constraints, skipping variables fixed by the equalities.
    fn box_constraints(&self) -> Vec<LogSumExp> {
        let mut out = Vec::new();
        for v in 0..self.y0.len() {
            let row = self.z.row(v);
            if row.iter().all(|a| *a == 0.0) {
                continue;
            }
            for sign in [1.0, -1.0] {
                out.push(LogSumExp {
                    f: DMatrix::from_fn(1, row.len(), |_, k| sign * row[k]),
                    b: DVector::from_element(1, sign * self.y0[v] - LOG_BOX),
                });
            }
        }
        out
    }

    fn reduce_monomial(&self, t: &Monomial, shift: f64, n: usize) -> (DVector<f64>, f64) {
        let mut a = DVector::zeros(n);
        for &(v, e) in &t.exponents {
            a[v] += e;
        }
        let row = self.z.transpose() * &a;
        (row, t.coeff.ln() + a.dot(&self.y0) - shift)
    }

    fn reduce(&self, p: &Posynomial, bound: f64, n: usize) -> LogSumExp {
        let k = p.terms.len();
        let mut f = DMatrix::zeros(k, self.free.len());
        let mut b = DVector::zeros(k);
        for (i, t) in p.terms.iter().enumerate() {
            let (row, off) = self.reduce_monomial(t, bound.ln(), n);
            f.row_mut(i).copy_from(&row.transpose());
            b[i] = off;
        }
        LogSumExp { f, b }
    }
}

/// Gauss-Jordan elimination of the monomial equalities in log coordinates.
/// Pivots on the largest magnitude entry, preferring the later variable on
/// ties, so `prod nu = 1` eliminates the last `nu`.
fn eliminate(problem: &GpProblem) -> Option<Reduction> {
    let n = problem.variables();
    let m = problem.equalities.len();
    let mut a = DMatrix::<f64>::zeros(m, n);
    let mut rhs = DVector::<f64>::zeros(m);
    for (r, eq) in problem.equalities.iter().enumerate() {
        for &(v, e) in &eq.lhs.exponents {
            a[(r, v)] += e;
        }
        rhs[r] = (eq.bound / eq.lhs.coeff).ln();
    }
    let scale = a.amax().max(1.0);
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut used_rows = vec![false; m];
    let mut used_cols = vec![false; n];
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for r in (0..m).filter(|&r| !used_rows[r]) {
            for c in (0..n).filter(|&c| !used_cols[c]) {
                let mag = a[(r, c)].abs();
                if best.is_none_or(|(_, bc, bm)| mag > bm || (mag == bm && c > bc)) {
                    best = Some((r, c, mag));
                }
            }
        }
        let Some((r, c, mag)) = best else { break };
        if mag <= 1e-12 * scale {
            break;
        }
        let piv = a[(r, c)];
        a.row_mut(r).unscale_mut(piv);
        rhs[r] /= piv;
        for o in 0..m {
            if o != r && a[(o, c)] != 0.0 {
                let factor = a[(o, c)];
                let row = a.row(r).into_owned();
                let mut target = a.row_mut(o);
                target -= row * factor;
                rhs[o] -= factor * rhs[r];
            }
        }
        used_rows[r] = true;
        used_cols[c] = true;
        pivots.push((r, c));
    }
    let rhs_scale = rhs.amax().max(1.0);
    if (0..m).any(|r| !used_rows[r] && rhs[r].abs() > 1e-9 * rhs_scale) {
        return None;
    }
    let free: Vec<usize> = (0..n).filter(|&c| !used_cols[c]).collect();
    let mut y0 = DVector::zeros(n);
    let mut z = DMatrix::zeros(n, free.len());
    for (k, &c) in free.iter().enumerate() {
        z[(c, k)] = 1.0;
    }
    for &(r, p) in &pivots {
        y0[p] = rhs[r];
        for (k, &c) in free.iter().enumerate() {
            z[(p, k)] = -a[(r, c)];
        }
    }
    Some(Reduction { y0, z, free })
}

/// Barrier function `t f0(z) - sum_i ln(-g_i(z))` over the reduced
/// coordinates. In phase one the last coordinate is a slack `s` and the
/// function is `t s - sum_i ln(s - g_i(z))`.
struct Barrier<'a> {
    objective: &'a LogSumExp,
    constraints: &'a [LogSumExp],
    phase_one: bool,
}

impl Barrier<'_> {
    fn split(&self, x: &DVector<f64>) -> (DVector<f64>, f64) {
        if self.phase_one {
            let n = x.len() - 1;
            (x.rows(0, n).into_owned(), x[n])
        } else {
            (x.clone(), 0.0)
        }
    }

    /// Value, or `None` outside the barrier domain.
    fn value(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        let (z, s) = self.split(x);
        let mut val = if self.phase_one {
            t * s
        } else {
            t * self.objective.value(&z)
        };
        for c in self.constraints {
            let slack = s - c.value(&z);
            if !(slack > 0.0) {
                return None;
            }
            val -= slack.ln();
        }
        Some(val)
    }

    fn derivatives(&self, x: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let dim = x.len();
        let (z, s) = self.split(x);
        let nz = z.len();
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        if self.phase_one {
            grad[nz] = t;
        } else {
            let f0 = self.objective.eval(&z);
            grad += f0.grad * t;
            hess += f0.hess * t;
        }
        for c in self.constraints {
            let gi = c.eval(&z);
            let slack = s - gi.value;
            let mut ds = DVector::zeros(dim);
            ds.rows_mut(0, nz).copy_from(&(-&gi.grad));
            if self.phase_one {
                ds[nz] = 1.0;
            }
            grad -= &ds / slack;
            hess += &ds * ds.transpose() / (slack * slack);
            let mut block = hess.view_mut((0, 0), (nz, nz));
            block += gi.hess / slack;
        }
        (grad, hess)
    }
}

fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> DVector<f64> {
    let n = grad.len();
    let scale = hess.diagonal().amax().max(1e-300);
    let mut reg = 0.0;
    loop {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += reg;
        }
        if let Some(ch) = h.cholesky() {
            return -ch.solve(grad);
        }
        reg = if reg == 0.0 {
            1e-12 * scale
        } else {
            reg * 10.0
        };
        if reg > 1e12 * scale {
            return -grad.clone();
        }
    }
}

enum Centering {
    /// Phase one reached a strictly feasible point.
    Feasible,
    Done,
}

/// Damped Newton minimization of the barrier at fixed `t`.
fn center(
    barrier: &Barrier<'_>,
    x: &mut DVector<f64>,
    t: f64,
    opts: &GpOptions,
    steps: &mut usize,
) -> Centering {
    let mut current = barrier
        .value(x, t)
        .expect("centering starts inside the domain");
    for _ in 0..opts.max_newton_steps {
        let (grad, hess) = barrier.derivatives(x, t);
        let dx = newton_direction(&grad, &hess);
        let slope = grad.dot(&dx);
        if -slope / 2.0 <= opts.newton_tol || !slope.is_finite() {
            break;
        }
        *steps += 1;
        let mut step = 1.0;
        let mut accepted = false;
        // Near the centre the decrease is below the resolution of the
        // barrier value, hence the small relative slack.
        let slack = 1e-13 * current.abs().max(1.0);
        while step > 1e-14 {
            let trial = &*x + &dx * step;
            if let Some(v) = barrier.value(&trial, t) {
                if v <= current + opts.armijo_slope * step * slope + slack {
                    if v < current {
                        *x = trial;
                        current = v;
                        accepted = true;
                    }
                    break;
                }
            }
            step *= opts.backtrack;
        }
        if !accepted {
            // the value no longer resolves progress, the gradient still does
            let norm = grad.norm();
            let mut step = 1.0;
            while step > 1e-4 && !accepted {
                let trial = &*x + &dx * step;
                if let Some(v) = barrier.value(&trial, t) {
                    if barrier.derivatives(&trial, t).0.norm() < norm {
                        *x = trial;
                        current = v;
                        accepted = true;
                    }
                }
                step *= opts.backtrack;
            }
        }
        if !accepted {
            break;
        }
        if barrier.phase_one {
            let (z, _) = barrier.split(x);
            if barrier.constraints.iter().all(|c| c.value(&z) < 0.0) {
                return Centering::Feasible;
            }
        }
    }
    Centering::Done
}

fn stationarity(g0: &DVector<f64>, grads: &[DVector<f64>], lambda: &[f64]) -> f64 {
    let mut r = g0.clone();
    for (g, l) in grads.iter().zip(lambda) {
        r.axpy(*l, g, 1.0);
    }
    r.amax()
}

/// Multipliers refitted by nonnegative least squares on the nearly active set,
/// with the KKT residual they give.
fn refit(objective: &LogSumExp, constraints: &[LogSumExp], z: &DVector<f64>) -> (f64, Vec<f64>) {
    let g0 = objective.eval(z).grad;
    let evals: Vec<Lse> = constraints.iter().map(|c| c.eval(z)).collect();
    let grads: Vec<DVector<f64>> = evals.iter().map(|e| e.grad.clone()).collect();
    let active: Vec<usize> = (0..evals.len())
        .filter(|&i| evals[i].value > -1e-6)
        .collect();
    let mut lambda = vec![0.0; evals.len()];
    if !active.is_empty() {
        // the slack rows keep weight off constraints that are not quite active
        let (n, m) = (g0.len(), active.len());
        let j = DMatrix::from_fn(n + m, m, |r, c| match r < n {
            true => grads[active[c]][r],
            false if r - n == c => evals[active[c]].value.abs(),
            false => 0.0,
        });
        let rhs = DVector::from_fn(n + m, |r, _| if r < n { -g0[r] } else { 0.0 });
        for (k, l) in nnls(&j, &rhs).iter().enumerate() {
            lambda[active[k]] = *l;
        }
    }
    let slackness: f64 = evals
        .iter()
        .zip(&lambda)
        .map(|(e, l)| l * e.value.abs())
        .sum();
    (stationarity(&g0, &grads, &lambda).max(slackness), lambda)
}

/// KKT residual `max(|grad f0 + sum_i lambda_i grad g_i|_inf, sum_i lambda_i |g_i|)`.
///
/// The barrier multipliers `1 / (-t g_i)` inherit the rounding error of the
/// tiny slacks of active constraints, so refitted multipliers are tried as
/// well and the smaller residual is reported.
fn kkt_residual(objective: &LogSumExp, constraints: &[LogSumExp], z: &DVector<f64>, t: f64) -> f64 {
    let g0 = objective.eval(z).grad;
    let grads: Vec<DVector<f64>> = constraints.iter().map(|c| c.eval(z).grad).collect();
    let barrier: Vec<f64> = constraints
        .iter()
        .map(|c| 1.0 / (-t * c.value(z)))
        .collect();
    let from_barrier = stationarity(&g0, &grads, &barrier).max(constraints.len() as f64 / t);
    from_barrier.min(refit(objective, constraints, z).0)
}

/// Newton iterations on the KKT equations with the constraints in `held`
/// treated as equalities. Returns the best feasible iterate with the residual
/// its multipliers certify.
fn polish_on(
    objective: &LogSumExp,
    constraints: &[LogSumExp],
    z: &DVector<f64>,
    held: &[usize],
) -> Option<(f64, DVector<f64>)> {
    let (n, m) = (z.len(), held.len());
    let (_, refitted) = refit(objective, constraints, z);
    let mut lambda: Vec<f64> = held.iter().map(|&i| refitted[i]).collect();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut cur = z.clone();
    for _ in 0..6 {
        let f0 = objective.eval(&cur);
        let mut hess = f0.hess;
        let mut kkt_mat = DMatrix::zeros(n + m, n + m);
        let mut rhs = DVector::zeros(n + m);
        for (k, &i) in held.iter().enumerate() {
            let e = constraints[i].eval(&cur);
            hess += &e.hess * lambda[k].max(0.0);
            for r in 0..n {
                kkt_mat[(n + k, r)] = e.grad[r];
                kkt_mat[(r, n + k)] = e.grad[r];
            }
            // aim a hair inside so rounding cannot push the point out
            rhs[n + k] = -e.value - 1e-11;
        }
        kkt_mat.view_mut((0, 0), (n, n)).copy_from(&hess);
        rhs.rows_mut(0, n).copy_from(&(-&f0.grad));
        // unknowns are the step and the new multipliers
        let sol = kkt_mat.lu().solve(&rhs)?;
        cur += sol.rows(0, n);
        lambda = sol.rows(n, m).iter().copied().collect();
        let worst = constraints
            .iter()
            .map(|c| c.value(&cur))
            .fold(f64::NEG_INFINITY, f64::max);
        if !worst.is_finite() {
            return best;
        }
        if worst > 0.0 {
            continue;
        }
        // any nonnegative multipliers certify the residual
        let mut r = refit(objective, constraints, &cur).0;
        if lambda.iter().all(|l| *l >= 0.0) {
            let grads: Vec<DVector<f64>> = held
                .iter()
                .map(|&i| constraints[i].eval(&cur).grad)
                .collect();
            let slackness: f64 = held
                .iter()
                .zip(&lambda)
                .map(|(&i, l)| l * constraints[i].value(&cur).abs())
                .sum();
            r = r.min(stationarity(&objective.eval(&cur).grad, &grads, &lambda).max(slackness));
        }
        if best.as_ref().is_none_or(|b| r < b.0) {
            best = Some((r, cur.clone()));
        }
    }
    best
}

/// Refines a barrier solution by guessing which of the nearly active
/// constraints hold with equality, starting from those the refitted
/// multipliers put weight on. Returns a point only when it beats `kkt`.
fn polish(
    objective: &LogSumExp,
    constraints: &[LogSumExp],
    z: &DVector<f64>,
    kkt: f64,
    goal: f64,
) -> Option<(f64, DVector<f64>)> {
    const MAX_NEAR: usize = 6;
    let near: Vec<usize> = (0..constraints.len())
        .filter(|&i| constraints[i].value(z) > -1e-6)
        .collect();
    let (_, refitted) = refit(objective, constraints, z);
    let first: Vec<usize> = near
        .iter()
        .copied()
        .filter(|&i| refitted[i] > 0.0)
        .collect();
    let mut guesses = vec![first.clone()];
    if near.len() <= MAX_NEAR {
        for mask in 0..1usize << near.len() {
            let set: Vec<usize> = (0..near.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| near[b])
                .collect();
            if set != first {
                guesses.push(set);
            }
        }
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    for held in &guesses {
        if let Some((r, p)) = polish_on(objective, constraints, z, held) {
            if r < best.as_ref().map_or(kkt, |b| b.0) {
                best = Some((r, p));
            }
        }
        if best.as_ref().is_some_and(|b| b.0 <= goal) {
            break;
        }
    }
    best
}

/// Lawson-Hanson nonnegative least squares `min |a x - b|` s.t. `x >= 0`.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-14 * a.amax().max(1.0) * b.amax().max(1.0);
    let restricted = |passive: &[bool]| -> DVector<f64> {
        let cols: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
        let sub = DMatrix::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])]);
        let fit = sub
            .svd(true, true)
            .solve(b, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(cols.len()));
        let mut z = DVector::zeros(n);
        for (c, &k) in cols.iter().enumerate() {
            z[k] = fit[c];
        }
        z
    };
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let Some(enter) = (0..n)
            .filter(|&k| !passive[k] && w[k] > tol)
            .max_by(|&i, &k| w[i].total_cmp(&w[k]))
        else {
            break;
        };
        passive[enter] = true;
        loop {
            let z = restricted(&passive);
            let blocked: Vec<usize> = (0..n).filter(|&k| passive[k] && z[k] <= 0.0).collect();
            if blocked.is_empty() {
                x = z;
                break;
            }
            let step = blocked
                .iter()
                .map(|&k| x[k] / (x[k] - z[k]))
                .fold(f64::INFINITY, f64::min);
            x += (&z - &x) * step;
            for k in 0..n {
                if passive[k] && x[k] <= tol {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
        }
    }
    x
}

/// Finds a strictly feasible reduced point, or `None` when the constraints
/// cannot be satisfied.
fn phase_one(
    objective: &LogSumExp,
    constraints: &[LogSumExp],
    z0: DVector<f64>,
    opts: &GpOptions,
    steps: &mut usize,
) -> Option<DVector<f64>> {
    let g_max = constraints
        .iter()
        .map(|c| c.value(&z0))
        .fold(f64::NEG_INFINITY, f64::max);
    if g_max < 0.0 {
        return Some(z0);
    }
    let nz = z0.len();
    let mut x = DVector::zeros(nz + 1);
    x.rows_mut(0, nz).copy_from(&z0);
    x[nz] = g_max + 1.0;
    let barrier = Barrier {
        objective,
        constraints,
        phase_one: true,
    };
    let m = constraints.len() as f64;
    let mut t = opts.t0;
    for _ in 0..opts.max_iters {
        if let Centering::Feasible = center(&barrier, &mut x, t, opts, steps) {
            return Some(x.rows(0, nz).into_owned());
        }
        if x[nz] - m / t > 0.0 || m / t < opts.gap_tol {
            return None;
        }
        t *= opts.barrier_factor;
    }
    None
}

/// Solves a geometric program by a log-domain barrier method.
///
/// Structural problems (bad coefficients, inconsistent equalities) are
/// errors; an infeasible inequality system or an exhausted iteration budget
/// is reported through [`GpSolution::status`].
pub fn solve_gp(problem: &GpProblem, opts: &GpOptions) -> Result<GpSolution> {
    problem.validate()?;
    opts.validate()?;
    let n = problem.variables();
    let Some(red) = eliminate(problem) else {
        return Ok(GpSolution {
            x: vec![f64::NAN; n],
            objective_value: f64::NAN,
            kkt_residual: f64::INFINITY,
            status: GpStatus::Infeasible,
            newton_steps: 0,
        });
    };
    let objective = red.reduce(&problem.objective, 1.0, n);
    let mut constraints: Vec<LogSumExp> = problem
        .inequalities
        .iter()
        .map(|c| red.reduce(&c.lhs, c.bound, n))
        .collect();
    constraints.extend(red.box_constraints());

    let z0 = match problem.start() {
        Some(x) => DVector::from_iterator(
            red.free.len(),
            red.free
                .iter()
                .map(|&v| x[v].ln().clamp(1.0 - LOG_BOX, LOG_BOX - 1.0)),
        ),
        None => DVector::zeros(red.free.len()),
    };
    let finish = |z: &DVector<f64>, kkt: f64, status: GpStatus, steps: usize| {
        let x: Vec<f64> = red.lift(z).iter().map(|y| y.exp()).collect();
        GpSolution {
            objective_value: problem.objective_at(&x),
            x,
            kkt_residual: kkt,
            status,
            newton_steps: steps,
        }
    };

    let mut steps = 0;
    let Some(mut z) = phase_one(&objective, &constraints, z0.clone(), opts, &mut steps) else {
        return Ok(finish(&z0, f64::INFINITY, GpStatus::Infeasible, steps));
    };

    let barrier = Barrier {
        objective: &objective,
        constraints: &constraints,
        phase_one: false,
    };
    let m = constraints.len() as f64;
    let mut t = opts.t0;
    // Past some barrier weight the centering is limited by the resolution of
    // the barrier value and the residual grows again, so the last iterate
    // that met the tolerance (or else the best one) is kept.
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut done = false;
    for _ in 0..opts.max_iters {
        center(&barrier, &mut z, t, opts, &mut steps);
        let kkt = kkt_residual(&objective, &constraints, &z, t);
        let keep = match &best {
            None => true,
            Some((b, _)) => kkt <= opts.kkt_tol || kkt < *b,
        };
        if keep {
            best = Some((kkt, z.clone()));
        }
        if m / t <= opts.gap_tol {
            done = true;
            break;
        }
        t *= opts.barrier_factor;
    }
    let (mut kkt, mut z) = best.unwrap_or((f64::INFINITY, z));
    if done && kkt > opts.kkt_tol * 1e-3 {
        if let Some((k, p)) = polish(&objective, &constraints, &z, kkt, opts.kkt_tol * 1e-3) {
            (kkt, z) = (k, p);
        }
    }
    let status = if done && kkt <= opts.kkt_tol {
        GpStatus::Converged
    } else {
        GpStatus::MaxIter
    };
    Ok(finish(&z, kkt, status, steps))
}
