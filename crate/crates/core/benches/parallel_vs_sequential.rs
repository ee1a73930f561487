use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spurline_core::chain::{parse_scenario, MixerSpec};
use spurline_core::engine::{run_two_tone_sweep_with, TwoToneSweep};
use spurline_core::planner::{search_plans_with, PlanConstraints, Sideband, DEFAULT_GUARD};
use spurline_core::{Execution, FrequencyHz, PowerDbm};

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn sweep(c: &mut Criterion) {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/tx_fig1.chain")).unwrap();
    let sc = parse_scenario(&text).unwrap();
    let spec = TwoToneSweep {
        center: FrequencyHz::from_ghz(5),
        spacing: FrequencyHz::from_mhz(10),
        start: PowerDbm(-40.0),
        stop: PowerDbm(0.0),
        step: 0.5,
    };
    let mut g = c.benchmark_group("two_tone_sweep");
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_two_tone_sweep_with(&sc.chain, &spec, exec).unwrap())
        });
    }
    g.finish();
}

fn plan_search(c: &mut Criterion) {
    let constraints = PlanConstraints {
        if_values: (0..8).map(|k| FrequencyHz::from_mhz(4_000 + 250 * k)).collect(),
        lo_values: (0..40).map(|k| FrequencyHz::from_mhz(19_000 + 100 * k)).collect(),
        rf_band: (FrequencyHz::from_ghz(24), FrequencyHz::from_ghz(31)),
        sideband: Sideband::Usb,
        rx_if_band: (FrequencyHz::from_ghz(3), FrequencyHz::from_ghz(7)),
        sampler_fs: Some(FrequencyHz::from_ghz(10)),
        guard: DEFAULT_GUARD,
        n_max: 5,
        m_max: 5,
        tx: MixerSpec::default(),
        rx: MixerSpec::default(),
    };
    let mut g = c.benchmark_group("plan_search");
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| search_plans_with(&constraints, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, sweep, plan_search);
criterion_main!(benches);
