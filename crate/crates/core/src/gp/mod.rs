//! Geometric programs in posynomial form and a log-domain barrier solver.
//!
//! A problem minimizes a posynomial subject to `posynomial <= bound` and
//! `monomial = bound` constraints over strictly positive variables. With
//! `y = ln x` the objective and inequalities become log-sum-exp functions of
//! affine forms and the equalities become affine, so the problem is convex
//! and the barrier method returns a global optimum.

mod builders;
mod solver;

use std::fmt::Write as _;
use std::io::{self, Write};

pub use builders::{build_gp_full, build_gp_tau_nu, AuxLayout, AuxProgram};
pub use solver::{solve_gp, GpOptions, GpSolution, GpStatus};

use crate::error::{Error, Result};

/// `coeff * prod_v x_v^{a_v}` with `coeff > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<(usize, f64)>,
}

impl Monomial {
    pub fn new(coeff: f64, exponents: Vec<(usize, f64)>) -> Self {
        Monomial { coeff, exponents }
    }

    pub fn constant(coeff: f64) -> Self {
        Monomial::new(coeff, Vec::new())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .fold(self.coeff, |acc, &(v, a)| acc * x[v].powf(a))
    }

    fn validate(&self, vars: usize, what: &str) -> Result<()> {
        if !(self.coeff > 0.0 && self.coeff.is_finite()) {
            return Err(Error::arg(format!(
                "{what}: coefficient {} is not strictly positive",
                self.coeff
            )));
        }
        for &(v, a) in &self.exponents {
            if v >= vars {
                return Err(Error::arg(format!("{what}: unknown variable index {v}")));
            }
            if !a.is_finite() {
                return Err(Error::arg(format!("{what}: non-finite exponent")));
            }
        }
        Ok(())
    }
}

/// Sum of monomials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Posynomial { terms }
    }

    pub fn push(&mut self, term: Monomial) {
        self.terms.push(term);
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    fn validate(&self, vars: usize, what: &str) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::arg(format!("{what} has no terms")));
        }
        self.terms.iter().try_for_each(|t| t.validate(vars, what))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub lhs: Posynomial,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub lhs: Monomial,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GpProblem {
    names: Vec<String>,
    pub objective: Posynomial,
    pub inequalities: Vec<Inequality>,
    pub equalities: Vec<Equality>,
    start: Option<Vec<f64>>,
}

impl GpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index.
    pub fn add_variable(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn variables(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn set_objective(&mut self, objective: Posynomial) {
        self.objective = objective;
    }

    /// `lhs <= bound`.
    pub fn add_inequality(&mut self, lhs: Posynomial, bound: f64) {
        self.inequalities.push(Inequality { lhs, bound });
    }

    /// `lhs = bound`.
    pub fn add_equality(&mut self, lhs: Monomial, bound: f64) {
        self.equalities.push(Equality { lhs, bound });
    }

    /// Initial point for the solver. It should satisfy the inequalities
    /// strictly; otherwise a feasibility phase runs first.
    pub fn set_start(&mut self, x: Vec<f64>) {
        self.start = Some(x);
    }

    pub fn start(&self) -> Option<&[f64]> {
        self.start.as_deref()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.variables();
        if n == 0 {
            return Err(Error::arg("geometric program has no variables"));
        }
        self.objective.validate(n, "objective")?;
        for (i, c) in self.inequalities.iter().enumerate() {
            c.lhs.validate(n, &format!("inequality {i}"))?;
            if !(c.bound > 0.0 && c.bound.is_finite()) {
                return Err(Error::arg(format!(
                    "inequality {i}: bound must be positive"
                )));
            }
        }
        for (i, c) in self.equalities.iter().enumerate() {
            c.lhs.validate(n, &format!("equality {i}"))?;
            if !(c.bound > 0.0 && c.bound.is_finite()) {
                return Err(Error::arg(format!("equality {i}: bound must be positive")));
            }
        }
        if let Some(x) = &self.start {
            if x.len() != n || x.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::arg(
                    "start point must be positive with one entry per variable",
                ));
            }
        }
        Ok(())
    }

    /// Objective value at `x`.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Largest `ln(lhs / bound)` over inequalities and `|ln(lhs / bound)|`
    /// over equalities; `<= 0` means feasible up to the equalities.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let ineq = self
            .inequalities
            .iter()
            .map(|c| (c.lhs.eval(x) / c.bound).ln());
        let eq = self
            .equalities
            .iter()
            .map(|c| (c.lhs.eval(x) / c.bound).ln().abs());
        ineq.chain(eq).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Plain-text listing: one term per line as the coefficient followed by
    /// `variable:exponent` pairs, grouped under `minimize`, `subject_to <=`
    /// and `subject_to =` headers.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "variables {}", self.names.join(" "))?;
        writeln!(out, "minimize")?;
        for t in &self.objective.terms {
            writeln!(out, "  {}", self.term_line(t))?;
        }
        for c in &self.inequalities {
            writeln!(out, "subject_to <= {:e}", c.bound)?;
            for t in &c.lhs.terms {
                writeln!(out, "  {}", self.term_line(t))?;
            }
        }
        for c in &self.equalities {
            writeln!(out, "subject_to = {:e}", c.bound)?;
            writeln!(out, "  {}", self.term_line(&c.lhs))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("text dump is UTF-8")
    }

    fn term_line(&self, t: &Monomial) -> String {
        let mut line = format!("{:e}", t.coeff);
        for &(v, a) in &t.exponents {
            let _ = write!(line, " {}:{}", self.names[v], a);
        }
        line
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_dump_lists_terms() {
        let mut gp = GpProblem::new();
        let x = gp.add_variable("x");
        let y = gp.add_variable("y");
        gp.set_objective(Posynomial::new(vec![
            Monomial::new(0.5, vec![(x, -1.0), (y, 2.0)]),
            Monomial::constant(3.0),
        ]));
        gp.add_inequality(
            Posynomial::new(vec![Monomial::new(1.0, vec![(x, 1.0)])]),
            2.5,
        );
        gp.add_equality(Monomial::new(1.0, vec![(x, 1.0), (y, 1.0)]), 1.0);
        let text = gp.to_text();
        assert_eq!(
            text,
            "variables x y\n\
             minimize\n  5e-1 x:-1 y:2\n  3e0\n\
             subject_to <= 2.5e0\n  1e0 x:1\n\
             subject_to = 1e0\n  1e0 x:1 y:1\n"
        );
    }

    #[test]
    fn validation_rejects_bad_terms() {
        let mut gp = GpProblem::new();
        assert!(gp.validate().is_err());
        let x = gp.add_variable("x");
        gp.set_objective(Posynomial::new(vec![Monomial::new(-1.0, vec![(x, 1.0)])]));
        assert!(gp.validate().is_err());
        gp.set_objective(Posynomial::new(vec![Monomial::new(1.0, vec![(3, 1.0)])]));
        assert!(gp.validate().is_err());
        gp.set_objective(Posynomial::new(vec![Monomial::new(1.0, vec![(x, 1.0)])]));
        assert!(gp.validate().is_ok());
        gp.add_inequality(Posynomial::new(vec![Monomial::constant(1.0)]), 0.0);
        assert!(gp.validate().is_err());
    }
}
