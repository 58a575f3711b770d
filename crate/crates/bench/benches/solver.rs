use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use wsr_core::duality::{psi_fixed_point, tau_tilde, PsiMap};
use wsr_core::gp::{build_gp_full, solve_gp};
use wsr_core::harness::{generate_channel, sigma2_from_snr};
use wsr_core::model::{downlink_mmse_receiver, Decomposition};
use wsr_core::optimizer::init_precoder;
use wsr_core::{
    run_algorithm_ii, AuxVars, ChannelSet, CouplingMatrices, DownlinkTransceiver,
    FixedPointOptions, GpOptions, NoiseModel, PowerBudget, RateWeights, SolveOptions, SystemDims,
};

struct Instance {
    channel: ChannelSet,
    noise: NoiseModel,
    budget: PowerBudget,
    weights: RateWeights,
    tr: DownlinkTransceiver,
}

fn instance(snr_db: f64) -> Instance {
    let dims = SystemDims::uniform(4, 2, 2, 2).unwrap();
    let channel = generate_channel(&dims, 11, 0);
    let budget = PowerBudget::uniform(4, 2.5).unwrap();
    let noise = NoiseModel::isotropic(&dims, sigma2_from_snr(snr_db, budget.total(), 2)).unwrap();
    let weights = RateWeights::new(vec![0.4, 0.2, 0.6, 0.25]).unwrap();
    let b = init_precoder(&channel, &budget).unwrap();
    let w = downlink_mmse_receiver(&channel, &noise, &b).unwrap();
    let tr = DownlinkTransceiver::new(&dims, b, w).unwrap();
    Instance {
        channel,
        noise,
        budget,
        weights,
        tr,
    }
}

fn fixed_point(c: &mut Criterion) {
    let inst = instance(10.0);
    let eta = AuxVars::ones(4).eta(&inst.weights);
    let tt = tau_tilde(&inst.channel, &inst.noise, inst.tr.decoder(), &eta).unwrap();
    let map = PsiMap::new(&inst.channel, inst.tr.decoder(), &eta, &inst.budget, tt).unwrap();
    let opts = FixedPointOptions {
        tol: 1e-10,
        ..FixedPointOptions::default()
    };
    c.bench_function("psi_fixed_point", |b| {
        b.iter(|| psi_fixed_point(black_box(&map), &opts).unwrap())
    });
}

fn power_program(c: &mut Criterion) {
    let inst = instance(10.0);
    let dec = Decomposition::from_transceiver(inst.channel.dims(), &inst.tr).unwrap();
    let coupling = CouplingMatrices::build(&inst.channel, &inst.noise, &dec).unwrap();
    let prog = build_gp_full(
        &coupling,
        &dec.alpha,
        &inst.budget,
        &inst.weights,
        &dec.powers,
    )
    .unwrap();
    let opts = GpOptions::default();
    c.bench_function("solve_gp_joint", |b| {
        b.iter(|| solve_gp(black_box(&prog.problem), &opts).unwrap())
    });
}

fn full_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_algorithm_ii");
    group.sample_size(10);
    for snr in [0.0, 20.0] {
        let inst = instance(snr);
        let opts = SolveOptions::default();
        group.bench_function(format!("{snr}dB"), |b| {
            b.iter(|| {
                run_algorithm_ii(
                    &inst.channel,
                    &inst.noise,
                    &inst.budget,
                    &inst.weights,
                    &opts,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, fixed_point, power_program, full_run);
criterion_main!(benches);
