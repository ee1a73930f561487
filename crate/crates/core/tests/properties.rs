use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use spurline_core::chain::{AmplifierSpec, AttenuatorSpec, Chain, ComponentSpec, FilterSpec, MixerSpec, Stage};
use spurline_core::engine::{
    apply_amplifier, apply_attenuator, apply_filter, apply_mixer, propagate, run_two_tone_sweep_with, TwoToneSweep,
};
use spurline_core::planner::{search_plans_with, PlanConstraints, Sideband, DEFAULT_GUARD};
use spurline_core::{Execution, FrequencyHz, GainDb, PowerDbm, Spectrum, Tone};

fn tone(src: &str, hz: u64, p: f64) -> Tone {
    Tone::stimulus(src, FrequencyHz::from_hz(hz), PowerDbm(p))
}

fn spectrum(tones: Vec<Tone>) -> Spectrum {
    Spectrum::from_tones(tones, FrequencyHz::ZERO)
}

/// |±n·fs ± m·fl| over the mixer's orders, plus feedthrough and breakthrough.
fn brute_force_mixer(fs: u64, fl: u64, n_max: u32, m_max: u32) -> BTreeSet<u64> {
    let mut out = BTreeSet::from([fs, fl]);
    for n in 1..=u64::from(n_max) {
        for m in 1..=u64::from(m_max) {
            out.insert(n * fs + m * fl);
            let d = (n * fs).abs_diff(m * fl);
            if d != 0 {
                out.insert(d);
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn mixer_frequency_closure(fs in 1u64..5_000_000, fl in 1u64..5_000_000, n_max in 1u32..=5, m_max in 1u32..=5) {
        let spec = MixerSpec { n_max, m_max, ..MixerSpec::default() };
        let out = apply_mixer(&spectrum(vec![tone("s", fs, 0.0)]), &spectrum(vec![tone("l", fl, 20.0)]), &spec, &Arc::from("m")).unwrap();
        let got: BTreeSet<u64> = out.iter().map(|t| t.freq.hz()).collect();
        prop_assert_eq!(got, brute_force_mixer(fs, fl, n_max, m_max));
    }

    #[test]
    fn im3_drops_three_db_per_db(oip3 in 0.0f64..20.0, gain in 0.0f64..30.0, pin in -40.0f64..0.0, delta in prop_oneof![Just(1.0), Just(3.0), Just(10.0)]) {
        let spec = AmplifierSpec::new(gain, oip3);
        let stage = Arc::from("a");
        let im3 = |p: f64| {
            let out = apply_amplifier(&spectrum(vec![tone("t1", 28_000_000_000, p), tone("t2", 28_010_000_000, p)]), &spec, &stage);
            out.power_at(FrequencyHz::from_mhz(27_990)).unwrap().0
        };
        prop_assert!(((im3(pin) - im3(pin - delta)) - 3.0 * delta).abs() < 1e-6);
    }

    #[test]
    fn small_signal_chain_is_linear(pin in -120.0f64..-60.0, gain in 0.0f64..20.0, loss in 0.0f64..20.0, f_mhz in 1_000u64..40_000) {
        let filter = FilterSpec::new(vec![(FrequencyHz::from_ghz(1), 3.0), (FrequencyHz::from_ghz(40), 7.0)]).unwrap();
        let chain = Chain {
            stages: vec![
                Stage::new("amp", ComponentSpec::Amplifier(AmplifierSpec::new(gain, 10.0))),
                Stage::new("pad", ComponentSpec::Attenuator(AttenuatorSpec { loss: GainDb(loss) })),
                Stage::new("flt", ComponentSpec::Filter(filter.clone())),
            ],
            ..Chain::default()
        };
        let f = FrequencyHz::from_mhz(f_mhz);
        let r = propagate(&chain, &spectrum(vec![tone("s", f.hz(), pin)])).unwrap();
        let want = pin + gain - loss - filter.attenuation_db(f);
        prop_assert!((r.final_spectrum.power_at(f).unwrap().0 - want).abs() < 1e-6);
    }

    #[test]
    fn filter_never_adds_and_pad_subtracts_exactly(
        tones in proptest::collection::vec((1u64..50_000, -100.0f64..20.0), 1..12),
        loss in 0.0f64..40.0,
    ) {
        let input = spectrum(tones.iter().enumerate().map(|(i, &(mhz, p))| tone(&format!("s{i}"), mhz * 1_000_000, p)).collect());
        let filter = FilterSpec::new(vec![(FrequencyHz::from_ghz(10), 30.0), (FrequencyHz::from_ghz(20), 0.5)]).unwrap();
        let filtered = apply_filter(&input, &filter);
        for t in filtered.iter() {
            prop_assert!(t.power.0 <= input.power_at(t.freq).unwrap().0);
        }
        let padded = apply_attenuator(&input, &AttenuatorSpec { loss: GainDb(loss) });
        prop_assert_eq!(padded.len(), input.len());
        for (a, b) in padded.iter().zip(input.iter()) {
            prop_assert!((b.power.0 - a.power.0 - loss).abs() < 1e-9);
        }
    }
}

#[test]
fn propagate_is_pure() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/tx_fig1.chain")).unwrap();
    let sc = spurline_core::chain::parse_scenario(&text).unwrap();
    let stim = spurline_core::engine::stimulus_spectrum(sc.stimulus.as_ref().unwrap());
    assert_eq!(propagate(&sc.chain, &stim).unwrap(), propagate(&sc.chain, &stim).unwrap());
}

#[test]
fn execution_modes_agree() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/tx_fig1.chain")).unwrap();
    let sc = spurline_core::chain::parse_scenario(&text).unwrap();
    let sw = TwoToneSweep {
        center: FrequencyHz::from_ghz(5),
        spacing: FrequencyHz::from_mhz(10),
        start: PowerDbm(-30.0),
        stop: PowerDbm(-10.0),
        step: 2.0,
    };
    assert_eq!(
        run_two_tone_sweep_with(&sc.chain, &sw, Execution::Sequential).unwrap(),
        run_two_tone_sweep_with(&sc.chain, &sw, Execution::Parallel).unwrap()
    );
    let c = PlanConstraints {
        if_values: vec![FrequencyHz::from_ghz(5), FrequencyHz::from_mhz(5_005)],
        lo_values: (0..8).map(|k| FrequencyHz::from_mhz(20_800 + 100 * k)).collect(),
        rf_band: (FrequencyHz::from_ghz(24), FrequencyHz::from_ghz(31)),
        sideband: Sideband::Usb,
        rx_if_band: (FrequencyHz::from_ghz(3), FrequencyHz::from_ghz(7)),
        sampler_fs: Some(FrequencyHz::from_ghz(10)),
        guard: DEFAULT_GUARD,
        n_max: 3,
        m_max: 3,
        tx: MixerSpec::default(),
        rx: MixerSpec::default(),
    };
    assert_eq!(search_plans_with(&c, Execution::Sequential).unwrap(), search_plans_with(&c, Execution::Parallel).unwrap());
}
