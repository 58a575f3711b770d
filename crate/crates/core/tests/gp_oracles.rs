mod common;

use common::gp_grid::*;
use common::*;
use rand::Rng;
use rand_distr::StandardNormal;
use wsr_core::gp::{build_gp_tau_nu, solve_gp, AuxProgram};
use wsr_core::model::reformulated_objective;
use wsr_core::{GpOptions, GpProblem, GpStatus, Monomial, Posynomial, RateWeights};

#[test]
fn two_symbol_program_matches_grid_search() {
    for seed in 0..20 {
        let f = two_symbol_case(seed);
        let sol = solve_gp(&program(&f).problem, &GpOptions::default()).unwrap();
        assert_eq!(sol.status, GpStatus::Converged, "seed {seed}");
        let grid = TwoSymbol { f: &f }.brute_force();
        assert!(
            sol.objective_value <= grid * (1.0 + 1e-9),
            "seed {seed}: {} > {grid}",
            sol.objective_value
        );
        assert!(
            rel(sol.objective_value, grid) <= 1e-4,
            "seed {seed}: {} vs {grid}",
            sol.objective_value
        );
    }
}

fn feasible_probe(
    rng: &mut impl Rng,
    prog: &AuxProgram,
    f: &Full,
    center: Option<&[f64]>,
) -> Vec<f64> {
    let s = prog.layout.streams;
    let mut x: Vec<f64> = match center {
        Some(c) => c
            .iter()
            .map(|v| {
                let g: f64 = rng.sample(StandardNormal);
                v * (0.01 * g).exp()
            })
            .collect(),
        None => (0..3 * s)
            .map(|_| rng.random_range(-3.0f64..3.0).exp())
            .collect(),
    };
    let log_mean = x[s..2 * s].iter().map(|v| v.ln()).sum::<f64>() / s as f64;
    for v in &mut x[s..2 * s] {
        *v /= log_mean.exp();
    }
    let loads = f.coupling.antenna_powers(&x[2 * s..]);
    let worst = loads
        .iter()
        .zip(f.budget.caps())
        .map(|(l, c)| l / c)
        .fold(0.0, f64::max);
    if worst > 1.0 {
        for v in &mut x[2 * s..] {
            *v /= worst * (1.0 + 1e-12);
        }
    }
    x
}

#[test]
fn full_program_beats_feasible_probes() {
    let mut r = rng(77);
    for seed in 0..5 {
        let f = full_instance(
            2000 + seed,
            sec5_dims(),
            sec5_budget(),
            Some(sec5_weights()),
        );
        let prog = program(&f);
        let sol = solve_gp(&prog.problem, &GpOptions::default()).unwrap();
        assert!(sol.kkt_residual <= 1e-6, "seed {seed}: {:?}", sol.status);
        let best = sol.objective_value;
        for i in 0..1000 {
            let center = (i % 2 == 0).then_some(sol.x.as_slice());
            let x = feasible_probe(&mut r, &prog, &f, center);
            assert!(prog.problem.max_violation(&x) <= 1e-12);
            assert!(
                prog.problem.objective_at(&x) >= best - 1e-9 * best,
                "seed {seed}, probe {i}"
            );
        }
    }
}

#[test]
fn full_program_respects_caps_and_improves_incumbent() {
    for seed in 0..20 {
        let f = full_instance(
            3000 + seed,
            sec5_dims(),
            sec5_budget(),
            Some(sec5_weights()),
        );
        let prog = program(&f);
        let sol = solve_gp(&prog.problem, &GpOptions::default()).unwrap();
        let powers = prog.layout.powers(&sol.x).unwrap();
        for load in f.coupling.antenna_powers(powers) {
            assert!(load <= CAP + 1e-8, "seed {seed}: {load}");
        }
        let nu_prod: f64 = prog.layout.nu(&sol.x).iter().product();
        assert!((nu_prod - 1.0).abs() < 1e-10);
        let start = prog.problem.start().unwrap();
        assert!(sol.objective_value <= prog.problem.objective_at(start));
    }
}

#[test]
fn objective_scaling_leaves_minimizer_unchanged() {
    let f = full_instance(4000, sec5_dims(), sec5_budget(), Some(sec5_weights()));
    let prog = program(&f);
    let base = solve_gp(&prog.problem, &GpOptions::default()).unwrap();
    for c in [1e-3, 7.0, 1e3] {
        let mut scaled = prog.problem.clone();
        for t in &mut scaled.objective.terms {
            t.coeff *= c;
        }
        let sol = solve_gp(&scaled, &GpOptions::default()).unwrap();
        assert!(rel(sol.objective_value, c * base.objective_value) <= 1e-8 * c.max(1.0));
        let obj_at_base = scaled.objective_at(&base.x);
        assert!(
            rel(sol.objective_value, obj_at_base) <= 1e-8 * c.max(1.0),
            "scale {c}"
        );
    }
}

#[test]
fn aux_program_value_matches_merit_function() {
    let mut r = rng(5);
    for _ in 0..50 {
        let s = r.random_range(1..7);
        let weights = moderate_weights(&mut r, s);
        let xi: Vec<f64> = (0..s).map(|_| r.random_range(1e-4f64..1.0)).collect();
        let prog = build_gp_tau_nu(&xi, &weights).unwrap();
        let sol = solve_gp(&prog.problem, &GpOptions::default()).unwrap();
        assert_eq!(sol.status, GpStatus::Converged);
        let (tau, nu) = (prog.layout.tau(&sol.x), prog.layout.nu(&sol.x));
        let merit = reformulated_objective(tau, nu, &xi, &weights).unwrap();
        assert!(rel(merit, sol.objective_value) <= 1e-8);

        let ones = vec![1.0; s];
        let at_ones = reformulated_objective(&ones, &ones, &xi, &weights).unwrap();
        assert!(sol.objective_value <= at_ones);

        for l in 0..s {
            for f in [0.9, 1.1] {
                let mut t = tau.to_vec();
                t[l] *= f;
                let probe = reformulated_objective(&t, nu, &xi, &weights).unwrap();
                assert!(probe > merit, "symbol {l}, factor {f}");
            }
        }
    }
}

#[test]
fn aux_program_matches_one_dimensional_search() {
    let mut r = rng(6);
    for _ in 0..20 {
        let weights = moderate_weights(&mut r, 2);
        let xi = [r.random_range(1e-3f64..1.0), r.random_range(1e-3f64..1.0)];
        let prog = build_gp_tau_nu(&xi, &weights).unwrap();
        let sol = solve_gp(&prog.problem, &GpOptions::default()).unwrap();
        let value = |ln_nu: f64| {
            let nu = [ln_nu.exp(), (-ln_nu).exp()];
            (0..2)
                .map(|l| {
                    tau_eliminated(
                        weights.theta()[l] * nu[l].powf(weights.gamma()[l]),
                        xi[l],
                        weights.mu()[l],
                    )
                })
                .sum::<f64>()
        };
        let (mut lo, mut hi, mut best) = (-20.0, 20.0, f64::INFINITY);
        for _ in 0..6 {
            let step = (hi - lo) / 999.0;
            let mut arg = lo;
            for i in 0..1000 {
                let z = lo + step * i as f64;
                let v = value(z);
                if v < best {
                    best = v;
                    arg = z;
                }
            }
            lo = arg - 2.0 * step;
            hi = arg + 2.0 * step;
        }
        assert!(sol.objective_value <= best * (1.0 + 1e-9));
        assert!(
            rel(sol.objective_value, best) <= 1e-8,
            "{} vs {best}",
            sol.objective_value
        );
    }
}

#[test]
fn infeasible_program_is_reported() {
    let mut gp = GpProblem::new();
    let x = gp.add_variable("x");
    gp.set_objective(Posynomial::new(vec![Monomial::new(1.0, vec![(x, 1.0)])]));
    gp.add_inequality(
        Posynomial::new(vec![Monomial::new(1.0, vec![(x, 1.0)])]),
        1.0,
    );
    gp.add_inequality(
        Posynomial::new(vec![Monomial::new(1.0, vec![(x, -1.0)])]),
        0.5,
    );
    let sol = solve_gp(&gp, &GpOptions::default()).unwrap();
    assert_eq!(sol.status, GpStatus::Infeasible);

    let mut gp = GpProblem::new();
    let (x, y) = (gp.add_variable("x"), gp.add_variable("y"));
    gp.set_objective(Posynomial::new(vec![Monomial::new(1.0, vec![(x, 1.0)])]));
    gp.add_equality(Monomial::new(1.0, vec![(x, 1.0), (y, 1.0)]), 1.0);
    gp.add_equality(Monomial::new(1.0, vec![(x, 2.0), (y, 2.0)]), 4.0);
    let sol = solve_gp(&gp, &GpOptions::default()).unwrap();
    assert_eq!(sol.status, GpStatus::Infeasible);
}

#[test]
fn simple_program_closed_form() {
    // min x + 1/(x y) s.t. y <= 2: y = 2, x = 1/sqrt(2), value sqrt(2)
    let mut gp = GpProblem::new();
    let (x, y) = (gp.add_variable("x"), gp.add_variable("y"));
    gp.set_objective(Posynomial::new(vec![
        Monomial::new(1.0, vec![(x, 1.0)]),
        Monomial::new(1.0, vec![(x, -1.0), (y, -1.0)]),
    ]));
    gp.add_inequality(
        Posynomial::new(vec![Monomial::new(1.0, vec![(y, 1.0)])]),
        2.0,
    );
    let sol = solve_gp(&gp, &GpOptions::default()).unwrap();
    assert_eq!(sol.status, GpStatus::Converged);
    assert!((sol.objective_value - 2f64.sqrt()).abs() < 1e-9);
    assert!((sol.x[0] - 0.5f64.sqrt()).abs() < 1e-8);
    assert!((sol.x[1] - 2.0).abs() < 1e-8);
}

#[test]
fn aux_program_text_dump() {
    let weights = RateWeights::new(vec![0.5, 0.25]).unwrap();
    let prog = build_gp_tau_nu(&[0.5, 0.25], &weights).unwrap();
    let text = prog.problem.to_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "variables tau_1 tau_2 nu_1 nu_2");
    assert_eq!(lines[1], "minimize");
    // theta = 0.5 * 1^0.5 = 0.5, gamma = 2 for the first symbol
    assert_eq!(lines[2], "  5e-1 tau_1:-1 nu_1:2");
    assert_eq!(lines[3], "  5e-1 tau_1:1");
    assert_eq!(lines[lines.len() - 2], "subject_to = 1e0");
    assert_eq!(lines[lines.len() - 1], "  1e0 nu_1:1 nu_2:1");
    assert_eq!(lines.len(), 2 + 4 + 2);
}
