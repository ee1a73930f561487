//! Tone-domain propagation through a [`Chain`].
//!
//! Every component is a behavioral transfer on discrete spectral lines:
//! doublers and mixers create new frequencies, amplifiers add odd-order
//! intermodulation, filters and pads only scale. All frequency arithmetic is
//! integer hertz.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::chain::{
    AmplifierSpec, AttenuatorSpec, Chain, ComponentSpec, DoublerSpec, FilterSpec, LoChain, LoSourceSpec, MixerSpec, PathRef,
    Stage, StimulusSpec,
};
use crate::exec::Execution;
use crate::tone::{bin_spectrum, OriginSignature, ProductStep, Spectrum, SummationMode, Tone};
use crate::units::{amplitude_floor, FrequencyHz, PhaseRad, PowerDbm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("doubler `{stage}` is driven by {count} tones; it accepts exactly one")]
    MultiToneDoublerInput { stage: String, count: usize },
    #[error("mixer `{stage}` has no LO tones")]
    EmptyLo { stage: String },
    #[error("LO sub-chain `{0}` is not defined")]
    UnknownLoChain(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

/// Output of [`propagate`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub probe_spectra: BTreeMap<String, Spectrum>,
    pub final_spectrum: Spectrum,
    /// Output of every stage in evaluation order: LO sub-chains first, then
    /// the main path.
    pub trace: Vec<(Arc<str>, Spectrum)>,
    /// Output of each LO sub-chain, keyed by sub-chain name.
    pub lo_spectra: BTreeMap<String, Spectrum>,
}

/// Fundamental plus configured harmonics of an LO source.
pub fn lo_source_spectrum(name: &str, spec: &LoSourceSpec) -> Spectrum {
    let name: Arc<str> = Arc::from(name);
    let mut tones = vec![Tone::new(spec.freq, spec.power, PhaseRad::default(), OriginSignature::root(Arc::clone(&name)))];
    for &(k, level) in &spec.harmonics {
        if let Some(f) = spec.freq.checked_mul(u64::from(k)) {
            let origin = OriginSignature::with_path(Arc::clone(&name), vec![ProductStep::new(&name, k as i32, 0)]);
            tones.push(Tone::new(f, spec.power + level, PhaseRad::default(), origin));
        }
    }
    Spectrum::from_tones(tones, FrequencyHz::ZERO)
}

pub fn stimulus_spectrum(spec: &StimulusSpec) -> Spectrum {
    let tones = spec
        .tones
        .iter()
        .enumerate()
        .map(|(i, &(f, p, ph))| Tone::new(f, p, ph, OriginSignature::root(format!("{}.{}", spec.name, i))))
        .collect();
    Spectrum::from_tones(tones, FrequencyHz::ZERO)
}

/// Two equal tones `spacing` apart around `center`, labelled `t1` (lower)
/// and `t2` (upper).
pub fn two_tone_stimulus(center: FrequencyHz, spacing: FrequencyHz, power: PowerDbm) -> Spectrum {
    let f1 = FrequencyHz::from_hz(center.hz().saturating_sub(spacing.hz() / 2));
    let f2 = f1 + spacing;
    Spectrum::from_tones(vec![Tone::stimulus("t1", f1, power), Tone::stimulus("t2", f2, power)], FrequencyHz::ZERO)
}

/// Doubled line plus the leaked fundamental.
///
/// Below `p_threshold` the doubled output falls at `unleveled_slope` dB/dB;
/// at or above it the output sits at `p_max`.
pub fn apply_doubler(input: &Tone, spec: &DoublerSpec, stage: &Arc<str>) -> Vec<Tone> {
    let out_power = spec.output_power(input.power);
    let doubled = Tone::new(
        FrequencyHz::from_hz(input.freq.hz() * 2),
        out_power,
        PhaseRad::new(2.0 * input.phase.value()),
        input.origin.extend(ProductStep::new(stage, 2, 0)),
    );
    let leak = Tone::new(
        input.freq,
        out_power + spec.fundamental_leakage,
        input.phase,
        input.origin.extend(ProductStep::new(stage, 1, 0)),
    );
    vec![doubled, leak]
}

fn apply_doubler_spectrum(input: &Spectrum, spec: &DoublerSpec, stage: &Arc<str>) -> Result<Spectrum, EngineError> {
    match input.tones() {
        [] => Ok(Spectrum::empty(input.bin_tolerance())),
        [t] => Ok(Spectrum::from_tones(apply_doubler(t, spec, stage), input.bin_tolerance())),
        many => Err(EngineError::MultiToneDoublerInput { stage: stage.to_string(), count: many.len() }),
    }
}

/// Harmonic mixing products, LO breakthrough and signal feedthrough.
///
/// For each signal tone `s`, LO tone `l` and orders `1 <= n <= n_max`,
/// `1 <= m <= m_max`, lines appear at `|n·f_s ± m·f_l|` with power
/// `P_s − conversion_loss + rejection(n, m)`. Products from LO tones weaker
/// than the strongest one are scaled down by the difference, so doubler
/// leakage on the LO port mixes as a weak pump. Zero-frequency products are
/// discarded.
pub fn apply_mixer(input: &Spectrum, lo: &Spectrum, spec: &MixerSpec, stage: &Arc<str>) -> Result<Spectrum, EngineError> {
    let lo_ref = lo.strongest().ok_or_else(|| EngineError::EmptyLo { stage: stage.to_string() })?.power;
    let floor = amplitude_floor().0;
    let mut out = Vec::new();
    for l in lo.iter() {
        out.push(Tone::new(l.freq, l.power - spec.lo_to_rf_isolation, l.phase, l.origin.extend(ProductStep::new(stage, 0, 1))));
    }
    for s in input.iter() {
        out.push(Tone::new(s.freq, s.power - spec.if_to_rf_isolation, s.phase, s.origin.extend(ProductStep::new(stage, 1, 0))));
        for l in lo.iter() {
            let pump_offset = l.power.0 - lo_ref.0;
            for n in 1..=spec.n_max {
                for m in 1..=spec.m_max {
                    let power = s.power.0 - spec.conversion_loss.0 + spec.rejection(n, m).0 + pump_offset;
                    if power < floor {
                        continue;
                    }
                    let nf = i128::from(n) * i128::from(s.freq.hz());
                    let mf = i128::from(m) * i128::from(l.freq.hz());
                    let n_phase = f64::from(n) * s.phase.value();
                    let m_phase = f64::from(m) * l.phase.value();
                    for (sign, f) in [(1i32, nf + mf), (-1i32, nf - mf)] {
                        if f == 0 {
                            continue;
                        }
                        let phase = n_phase + f64::from(sign) * m_phase;
                        let phase = if f < 0 { -phase } else { phase };
                        out.push(Tone::new(
                            FrequencyHz::from_signed(f),
                            PowerDbm(power),
                            PhaseRad::new(phase),
                            s.origin.extend(ProductStep::new(stage, n as i32, sign * m as i32)),
                        ));
                    }
                }
            }
        }
    }
    Ok(Spectrum::from_tones(out, input.bin_tolerance()))
}

/// Scales each tone by the interpolated attenuation at its frequency.
pub fn apply_filter(input: &Spectrum, spec: &FilterSpec) -> Spectrum {
    let tones = input
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.power = PowerDbm(t.power.0 - spec.attenuation_db(t.freq));
            t
        })
        .collect();
    Spectrum::from_tones(tones, input.bin_tolerance())
}

pub fn apply_attenuator(input: &Spectrum, spec: &AttenuatorSpec) -> Spectrum {
    let tones = input
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.power = t.power - spec.loss;
            t
        })
        .collect();
    Spectrum::from_tones(tones, input.bin_tolerance())
}

/// Linear gain plus odd-order intermodulation from a memoryless polynomial
/// `y = u + b3·u³ (+ b5·u⁵)` written in terms of the linear output `u`.
///
/// `b3` follows from OIP3: with output tone amplitudes `U`, the trinomial
/// expansion gives the line at `2f_i − f_j` an amplitude `¾·b3·U_i²·U_j`
/// and the line at `f_i + f_j − f_k` an amplitude `3/2·b3·U_i·U_j·U_k`.
/// Setting the two-tone product equal to the fundamental at OIP3 fixes
/// `|b3|`, which reduces the powers to
///
/// * `2f_i − f_j`: `2·P_i + P_j − 2·OIP3`
/// * `f_i + f_j − f_k`: `P_i + P_j + P_k − 2·OIP3 + 10·log10(4)`
/// * `3f_i − 2f_j` (with IM5 on): `3·P_i + 2·P_j − 4·OIP5`
///
/// Terms that land back on an input frequency through a cancelling pair
/// (gain compression) are not generated, so fundamentals stay exactly linear.
pub fn apply_amplifier(input: &Spectrum, spec: &AmplifierSpec, stage: &Arc<str>) -> Spectrum {
    let floor = amplitude_floor().0;
    let amplified: Vec<Tone> = input
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.power = t.power + spec.gain;
            t
        })
        .collect();
    let labels: Vec<String> = amplified.iter().map(|t| t.origin.to_string()).collect();
    let n = amplified.len();
    let oip3 = spec.oip3.0;
    let mut products = Vec::new();
    let im3_step = ProductStep::new(stage, 3, 0);
    let compressive = std::f64::consts::PI;

    let mut emit = |f: i128, power: f64, phase: f64, source: String, step: &ProductStep| {
        if f == 0 || power < floor {
            return;
        }
        let phase = if f < 0 { -phase } else { phase };
        products.push(Tone::new(
            FrequencyHz::from_signed(f),
            PowerDbm(power),
            PhaseRad::new(phase),
            OriginSignature::with_path(source, vec![step.clone()]),
        ));
    };

    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (a, b) = (&amplified[i], &amplified[j]);
            let power = 2.0 * a.power.0 + b.power.0 - 2.0 * oip3;
            if power < floor {
                continue;
            }
            let f = 2 * i128::from(a.freq.hz()) - i128::from(b.freq.hz());
            let phase = 2.0 * a.phase.value() - b.phase.value() + compressive;
            emit(f, power, phase, format!("im3[2*{}-{}]", labels[i], labels[j]), &im3_step);
        }
    }

    let triple_gain = 10.0 * 4f64.log10();
    for i in 0..n {
        for j in (i + 1)..n {
            let pij = amplified[i].power.0 + amplified[j].power.0;
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let c = &amplified[k];
                let power = pij + c.power.0 - 2.0 * oip3 + triple_gain;
                if power < floor {
                    continue;
                }
                let (a, b) = (&amplified[i], &amplified[j]);
                let f = i128::from(a.freq.hz()) + i128::from(b.freq.hz()) - i128::from(c.freq.hz());
                let phase = a.phase.value() + b.phase.value() - c.phase.value() + compressive;
                let (la, lb) = if labels[i] <= labels[j] { (&labels[i], &labels[j]) } else { (&labels[j], &labels[i]) };
                emit(f, power, phase, format!("im3[{la}+{lb}-{}]", labels[k]), &im3_step);
            }
        }
    }

    if let (true, Some(oip5)) = (spec.im5_enabled, spec.oip5) {
        let im5_step = ProductStep::new(stage, 5, 0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (a, b) = (&amplified[i], &amplified[j]);
                let power = 3.0 * a.power.0 + 2.0 * b.power.0 - 4.0 * oip5.0;
                let f = 3 * i128::from(a.freq.hz()) - 2 * i128::from(b.freq.hz());
                let phase = 3.0 * a.phase.value() - 2.0 * b.phase.value();
                emit(f, power, phase, format!("im5[3*{}-2*{}]", labels[i], labels[j]), &im5_step);
            }
        }
    }

    let mut all = amplified;
    all.extend(products);
    bin_spectrum(all, input.bin_tolerance(), SummationMode::PowerSum)
}

/// Applies one stage. Mixers need the output of their LO sub-chain.
pub fn apply_stage(stage: &Stage, input: Spectrum, lo: Option<&Spectrum>) -> Result<Spectrum, EngineError> {
    Ok(match &stage.spec {
        ComponentSpec::Doubler(d) => apply_doubler_spectrum(&input, d, &stage.id)?,
        ComponentSpec::Mixer(m) => {
            let empty = Spectrum::empty(input.bin_tolerance());
            apply_mixer(&input, lo.unwrap_or(&empty), m, &stage.id)?
        }
        ComponentSpec::Filter(f) => apply_filter(&input, f),
        ComponentSpec::Amplifier(a) => apply_amplifier(&input, a, &stage.id),
        ComponentSpec::Attenuator(a) => apply_attenuator(&input, a),
    })
}

/// Output spectrum of an LO sub-chain.
pub fn propagate_lo_chain(lc: &LoChain) -> Result<Spectrum, EngineError> {
    let mut sp = lo_source_spectrum(&lc.name, &lc.source);
    for s in &lc.stages {
        sp = apply_stage(s, sp, None)?;
    }
    Ok(sp)
}

fn record_probes(chain: &Chain, path: &PathRef, index: usize, sp: &Spectrum, out: &mut BTreeMap<String, Spectrum>) {
    for p in chain.probes.iter().filter(|p| &p.path == path && p.index == index) {
        out.insert(p.name.clone(), sp.clone());
    }
}

/// Runs LO sub-chains, then the main path, recording probe spectra.
pub fn propagate(chain: &Chain, stimulus: &Spectrum) -> Result<PropagationResult, EngineError> {
    let mut probes = BTreeMap::new();
    let mut trace = Vec::new();
    let mut lo_spectra = BTreeMap::new();

    for lc in &chain.lo_chains {
        let path = PathRef::Lo(lc.name.clone());
        let mut sp = lo_source_spectrum(&lc.name, &lc.source);
        record_probes(chain, &path, 0, &sp, &mut probes);
        for (i, s) in lc.stages.iter().enumerate() {
            sp = apply_stage(s, sp, None)?;
            record_probes(chain, &path, i + 1, &sp, &mut probes);
            trace.push((Arc::clone(&s.id), sp.clone()));
        }
        lo_spectra.insert(lc.name.clone(), sp);
    }

    let mut sp = stimulus.clone();
    record_probes(chain, &PathRef::Main, 0, &sp, &mut probes);
    for (i, s) in chain.stages.iter().enumerate() {
        let lo = match chain.lo_routing.get(&*s.id) {
            Some(name) => Some(lo_spectra.get(name).ok_or_else(|| EngineError::UnknownLoChain(name.clone()))?),
            None => None,
        };
        sp = apply_stage(s, sp, lo)?;
        record_probes(chain, &PathRef::Main, i + 1, &sp, &mut probes);
        trace.push((Arc::clone(&s.id), sp.clone()));
    }
    Ok(PropagationResult { probe_spectra: probes, final_spectrum: sp, trace, lo_spectra })
}

/// `start, start + step, …` up to and including `stop` (with a small
/// tolerance for accumulated float error).
pub fn power_grid(start: PowerDbm, stop: PowerDbm, step: f64) -> Result<Vec<PowerDbm>, EngineError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(EngineError::InvalidSweep(format!("step must be > 0, got {step}")));
    }
    if !(start.0 <= stop.0) || !start.0.is_finite() || !stop.0.is_finite() {
        return Err(EngineError::InvalidSweep(format!("start {} must not exceed stop {}", start.0, stop.0)));
    }
    let count = ((stop.0 - start.0) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| PowerDbm(start.0 + i as f64 * step)).collect())
}

/// One row of a two-tone sweep; `None` means no line at that frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub pin: PowerDbm,
    pub fund: Option<PowerDbm>,
    pub im3_low: Option<PowerDbm>,
    pub im3_high: Option<PowerDbm>,
    pub im5_low: Option<PowerDbm>,
    pub im5_high: Option<PowerDbm>,
    pub lo_residual: Option<PowerDbm>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str = "pin_dbm,fund_dbm,im3_low_dbm,im3_high_dbm,im5_low_dbm,im5_high_dbm,lo_residual_dbm";

fn csv_opt(v: Option<PowerDbm>) -> String {
    v.map(|p| format!("{:.6}", p.0)).unwrap_or_default()
}

impl SweepResult {
    /// Reads a table written by [`SweepResult::to_csv`], e.g. a saved or
    /// measured sweep.
    pub fn from_csv(text: &str) -> Result<SweepResult, EngineError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(SWEEP_CSV_HEADER) {
            return Err(EngineError::InvalidSweep(format!("expected header `{SWEEP_CSV_HEADER}`")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let bad = |msg: String| EngineError::InvalidSweep(format!("row {}: {msg}", i + 1));
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 7 {
                return Err(bad(format!("expected 7 columns, found {}", cols.len())));
            }
            let mut vals = [None; 7];
            for (slot, c) in vals.iter_mut().zip(&cols) {
                if !c.is_empty() {
                    let v: f64 = c.parse().map_err(|_| bad(format!("bad number `{c}`")))?;
                    *slot = Some(PowerDbm(v));
                }
            }
            let pin = vals[0].ok_or_else(|| bad("missing input power".into()))?;
            rows.push(SweepRow {
                pin,
                fund: vals[1],
                im3_low: vals[2],
                im3_high: vals[3],
                im5_low: vals[4],
                im5_high: vals[5],
                lo_residual: vals[6],
            });
        }
        Ok(SweepResult { rows })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.6},{},{},{},{},{},{}",
                r.pin.0,
                csv_opt(r.fund),
                csv_opt(r.im3_low),
                csv_opt(r.im3_high),
                csv_opt(r.im5_low),
                csv_opt(r.im5_high),
                csv_opt(r.lo_residual)
            );
        }
        out
    }
}

// A desired output line descends from a stimulus tone through first-order
// mixing only.
fn is_first_order(origin: &OriginSignature, source: &str) -> bool {
    origin.source() == source && origin.path().iter().all(|s| s.n == 1 && s.m.abs() == 1)
}

/// Frequency of the strongest first-order descendant of `source`.
pub fn desired_line(sp: &Spectrum, source: &str) -> Option<FrequencyHz> {
    sp.iter()
        .filter(|t| is_first_order(&t.origin, source))
        .reduce(|best, t| if t.power.0 > best.power.0 { t } else { best })
        .map(|t| t.freq)
}

/// Strongest line of each main-path mixer's LO drive, in stage order.
pub fn dominant_lo_frequencies(chain: &Chain) -> Result<Vec<(String, FrequencyHz)>, EngineError> {
    let mut out = Vec::new();
    for s in &chain.stages {
        if let Some(name) = chain.lo_routing.get(&*s.id) {
            let lc = chain.lo_chain(name).ok_or_else(|| EngineError::UnknownLoChain(name.clone()))?;
            if let Some(t) = propagate_lo_chain(lc)?.strongest() {
                out.push((s.id.to_string(), t.freq));
            }
        }
    }
    Ok(out)
}

fn line_at(sp: &Spectrum, f: i128) -> Option<PowerDbm> {
    if f <= 0 {
        return None;
    }
    sp.power_at(FrequencyHz::from_signed(f))
}

fn measure_sweep_point(
    chain: &Chain,
    lo_freqs: &[FrequencyHz],
    sweep: &TwoToneSweep,
    pin: PowerDbm,
) -> Result<SweepRow, EngineError> {
    let stim = two_tone_stimulus(sweep.center, sweep.spacing, pin);
    let result = propagate(chain, &stim)?;
    let out = &result.final_spectrum;
    let mut row = SweepRow { pin, fund: None, im3_low: None, im3_high: None, im5_low: None, im5_high: None, lo_residual: None };
    if let (Some(fa), Some(fb)) = (desired_line(out, "t1"), desired_line(out, "t2")) {
        let (lo_f, hi_f) = if fa <= fb { (fa, fb) } else { (fb, fa) };
        let (l, h) = (i128::from(lo_f.hz()), i128::from(hi_f.hz()));
        row.fund = out.power_at(lo_f);
        if l != h {
            row.im3_low = line_at(out, 2 * l - h);
            row.im3_high = line_at(out, 2 * h - l);
            row.im5_low = line_at(out, 3 * l - 2 * h);
            row.im5_high = line_at(out, 3 * h - 2 * l);
        }
    }
    row.lo_residual = lo_freqs.iter().filter_map(|f| out.power_at(*f)).reduce(|a, b| if b.0 > a.0 { b } else { a });
    Ok(row)
}

/// Two-tone stimulus settings for [`run_two_tone_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct TwoToneSweep {
    pub center: FrequencyHz,
    pub spacing: FrequencyHz,
    pub start: PowerDbm,
    pub stop: PowerDbm,
    pub step: f64,
}

pub fn run_two_tone_sweep(chain: &Chain, sweep: &TwoToneSweep) -> Result<SweepResult, EngineError> {
    run_two_tone_sweep_with(chain, sweep, Execution::default())
}

/// Sweep with an explicit execution mode. Rows are ordered by input power
/// whatever the mode.
pub fn run_two_tone_sweep_with(chain: &Chain, sweep: &TwoToneSweep, exec: Execution) -> Result<SweepResult, EngineError> {
    let grid = power_grid(sweep.start, sweep.stop, sweep.step)?;
    let lo_freqs: Vec<FrequencyHz> = dominant_lo_frequencies(chain)?.into_iter().map(|(_, f)| f).collect();
    let rows: Result<Vec<SweepRow>, EngineError> =
        exec.map(&grid, |&pin| measure_sweep_point(chain, &lo_freqs, sweep, pin)).into_iter().collect();
    Ok(SweepResult { rows: rows? })
}

/// Output power of an LO sub-chain as its source drive is swept.
///
/// The output level is that of the strongest line at the sub-chain output
/// (the doubled tone for a doubler chain).
pub fn leveling_curve(
    chain: &Chain,
    lo: &str,
    start: PowerDbm,
    stop: PowerDbm,
    step: f64,
    exec: Execution,
) -> Result<Vec<(PowerDbm, PowerDbm)>, EngineError> {
    let lc = chain.lo_chain(lo).ok_or_else(|| EngineError::UnknownLoChain(lo.to_string()))?;
    let grid = power_grid(start, stop, step)?;
    exec.map(&grid, |&p| {
        let mut driven = lc.clone();
        driven.source.power = p;
        let out = propagate_lo_chain(&driven)?;
        Ok((p, out.strongest().map(|t| t.power).unwrap_or(PowerDbm(f64::NEG_INFINITY))))
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{parse_chain_config, Probe};

    fn sid(s: &str) -> Arc<str> {
        Arc::from(s)
    }

    fn single(hz: u64, p: f64) -> Spectrum {
        Spectrum::from_tones(vec![Tone::stimulus("s", FrequencyHz::from_hz(hz), PowerDbm(p))], FrequencyHz::ZERO)
    }

    // closed-form piecewise doubler output, kept separate from DoublerSpec::output_power
    fn doubler_oracle(pin: f64) -> f64 {
        if pin >= -12.0 {
            20.0
        } else {
            20.0 - 2.0 * (-12.0 - pin)
        }
    }

    #[test]
    fn doubler_examples() {
        let spec = DoublerSpec::default();
        for (pin, want) in [(-5.0, 20.0), (-12.0, 20.0), (-20.0, 4.0)] {
            assert_eq!(doubler_oracle(pin), want);
            let t = Tone::stimulus("lo", FrequencyHz::from_mhz(12_500), PowerDbm(pin));
            let out = apply_doubler(&t, &spec, &sid("d"));
            assert_eq!(out[0].freq, FrequencyHz::from_ghz(25));
            assert_eq!(out[0].power.0, want);
            assert_eq!(out[1].freq, FrequencyHz::from_mhz(12_500));
            assert_eq!(out[1].power.0, want - 30.0);
            assert_eq!(out[0].origin.path()[0], ProductStep::new(&sid("d"), 2, 0));
            assert_eq!(out[1].origin.path()[0], ProductStep::new(&sid("d"), 1, 0));
        }
    }

    #[test]
    fn doubler_rejects_multi_tone() {
        let two = Spectrum::from_tones(
            vec![
                Tone::stimulus("a", FrequencyHz::from_hz(1), PowerDbm(0.0)),
                Tone::stimulus("b", FrequencyHz::from_hz(2), PowerDbm(0.0)),
            ],
            FrequencyHz::ZERO,
        );
        let stage = Stage::new("d", ComponentSpec::Doubler(DoublerSpec::default()));
        assert_eq!(apply_stage(&stage, two, None), Err(EngineError::MultiToneDoublerInput { stage: "d".into(), count: 2 }));
    }

    fn plain_mixer() -> MixerSpec {
        MixerSpec { spur_table: BTreeMap::from([((1, 1), crate::units::GainDb(0.0))]), ..MixerSpec::default() }
    }

    #[test]
    fn mixer_sidebands() {
        let out = apply_mixer(&single(5_000_000_000, -10.0), &single(25_000_000_000, 20.0), &plain_mixer(), &sid("m")).unwrap();
        assert_eq!(out.power_at(FrequencyHz::from_ghz(20)), Some(PowerDbm(-18.0)));
        assert_eq!(out.power_at(FrequencyHz::from_ghz(30)), Some(PowerDbm(-18.0)));
        // breakthrough and feedthrough
        assert_eq!(out.power_at(FrequencyHz::from_ghz(25)), Some(PowerDbm(-5.0)));
        assert_eq!(out.power_at(FrequencyHz::from_ghz(5)), Some(PowerDbm(-40.0)));
    }

    #[test]
    fn mixer_lo_harmonic_product() {
        let mut spec = plain_mixer();
        spec.spur_table.insert((1, 2), crate::units::GainDb(-40.0));
        let out = apply_mixer(&single(5_000_000_000, -10.0), &single(25_000_000_000, 20.0), &spec, &sid("m")).unwrap();
        assert_eq!(out.power_at(FrequencyHz::from_ghz(55)), Some(PowerDbm(-58.0)));
    }

    #[test]
    fn mixer_without_lo_fails() {
        let r = apply_mixer(&single(1, 0.0), &Spectrum::empty(FrequencyHz::ZERO), &plain_mixer(), &sid("m"));
        assert_eq!(r, Err(EngineError::EmptyLo { stage: "m".into() }));
    }

    #[test]
    fn mixer_drops_zero_frequency() {
        // 2·f_s = f_l lands on DC
        let out = apply_mixer(&single(10, 0.0), &single(20, 10.0), &MixerSpec::default(), &sid("m")).unwrap();
        assert!(out.iter().all(|t| t.freq.hz() > 0));
    }

    #[test]
    fn filter_examples() {
        let bpf = FilterSpec::new(vec![
            (FrequencyHz::from_ghz(25), 50.0),
            (FrequencyHz::from_mhz(27_000), 50.0),
            (FrequencyHz::from_mhz(27_500), 2.0),
            (FrequencyHz::from_ghz(31), 2.0),
            (FrequencyHz::from_mhz(31_500), 50.0),
        ])
        .unwrap();
        let out = apply_filter(&single(29_000_000_000, -10.0), &bpf);
        assert_eq!(out.tones()[0].power.0, -12.0);
        let out = apply_filter(&single(25_000_000_000, -10.0), &bpf);
        assert_eq!(out.tones()[0].power.0, -60.0);
        assert!(apply_filter(&Spectrum::empty(FrequencyHz::ZERO), &bpf).is_empty());
        let out = apply_filter(&single(25_000_000_000, -160.0), &bpf);
        assert!(out.is_empty(), "tones pushed under the floor are dropped");
    }

    fn two_tone_out(p_each_out: f64, gain: f64, oip3: f64, f1: u64, f2: u64) -> Spectrum {
        let input = Spectrum::from_tones(
            vec![
                Tone::stimulus("a", FrequencyHz::from_hz(f1), PowerDbm(p_each_out - gain)),
                Tone::stimulus("b", FrequencyHz::from_hz(f2), PowerDbm(p_each_out - gain)),
            ],
            FrequencyHz::ZERO,
        );
        apply_amplifier(&input, &AmplifierSpec::new(gain, oip3), &sid("amp"))
    }

    #[test]
    fn amplifier_im3_two_tone_law() {
        let out = two_tone_out(-10.0, 20.0, 10.5, 28_000_000_000, 28_010_000_000);
        // oracle: 3·P − 2·OIP3
        let want = 3.0 * -10.0 - 2.0 * 10.5;
        assert_eq!(want, -51.0);
        let lo = out.power_at(FrequencyHz::from_mhz(27_990)).unwrap().0;
        let hi = out.power_at(FrequencyHz::from_mhz(28_020)).unwrap().0;
        assert!((lo - want).abs() < 1e-9 && (hi - want).abs() < 1e-9);
        assert!((out.power_at(FrequencyHz::from_ghz(28)).unwrap().0 + 10.0).abs() < 1e-12);
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn amplifier_single_tone_is_linear() {
        let out = apply_amplifier(&single(1_000, -3.0), &AmplifierSpec::new(15.0, 0.0), &sid("amp"));
        assert_eq!(out.len(), 1);
        assert_eq!(out.tones()[0].power.0, 12.0);
    }

    #[test]
    fn amplifier_im5_two_tone_law() {
        let input = Spectrum::from_tones(
            vec![
                Tone::stimulus("a", FrequencyHz::from_mhz(100), PowerDbm(-20.0)),
                Tone::stimulus("b", FrequencyHz::from_mhz(110), PowerDbm(-20.0)),
            ],
            FrequencyHz::ZERO,
        );
        let out = apply_amplifier(&input, &AmplifierSpec::new(10.0, 20.0).with_oip5(15.0), &sid("amp"));
        let want = 5.0 * -10.0 - 4.0 * 15.0;
        assert!((out.power_at(FrequencyHz::from_mhz(80)).unwrap().0 - want).abs() < 1e-9);
        assert!((out.power_at(FrequencyHz::from_mhz(130)).unwrap().0 - want).abs() < 1e-9);
    }

    #[test]
    fn three_tone_product_is_6db_above_two_tone_terms() {
        let input = Spectrum::from_tones(
            vec![
                Tone::stimulus("a", FrequencyHz::from_mhz(100), PowerDbm(-30.0)),
                Tone::stimulus("b", FrequencyHz::from_mhz(103), PowerDbm(-30.0)),
                Tone::stimulus("c", FrequencyHz::from_mhz(110), PowerDbm(-30.0)),
            ],
            FrequencyHz::ZERO,
        );
        let out = apply_amplifier(&input, &AmplifierSpec::new(0.0, 0.0), &sid("amp"));
        // 100 + 110 − 103 = 107 MHz only arises from the distinct triple
        let p = out.power_at(FrequencyHz::from_mhz(107)).unwrap().0;
        assert!((p - (-90.0 + 10.0 * 4f64.log10())).abs() < 1e-9);
    }

    #[test]
    fn attenuator_only_chain() {
        let c = parse_chain_config("[attenuator pad]\nloss = 6\n").unwrap();
        let r = propagate(&c, &single(1_000, -10.0)).unwrap();
        assert_eq!(r.final_spectrum.tones()[0].power.0, -16.0);
    }

    #[test]
    fn probes_capture_positions() {
        let c = parse_chain_config(
            "[lo l]\nfreq = 12.5GHz\npower = -5\n[doubler d]\nchain = l\n[mixer m]\nlo = l\n[attenuator pad]\n[probe 1]\nbefore = d\n[probe 2]\nafter = m\n[probe out]\nat = main:2\n",
        )
        .unwrap();
        assert_eq!(c.probe("out"), Some(&Probe { name: "out".into(), path: PathRef::Main, index: 2 }));
        let r = propagate(&c, &single(5_000_000_000, 0.0)).unwrap();
        let p1 = &r.probe_spectra["1"];
        assert_eq!(p1.len(), 1);
        assert_eq!(p1.tones()[0].power.0, -5.0);
        let p2 = &r.probe_spectra["2"];
        // the leaked 12.5 GHz tone's m=2 product also lands on 30 GHz, ~65 dB down
        assert!((p2.power_at(FrequencyHz::from_ghz(30)).unwrap().0 + 8.0).abs() < 1e-5);
        assert_eq!(r.probe_spectra["out"], r.final_spectrum);
        assert_eq!(r.trace.len(), 3);
    }

    #[test]
    fn power_grid_edges() {
        assert_eq!(power_grid(PowerDbm(-5.0), PowerDbm(-5.0), 1.0).unwrap(), vec![PowerDbm(-5.0)]);
        assert_eq!(power_grid(PowerDbm(-30.0), PowerDbm(-10.0), 1.0).unwrap().len(), 21);
        assert_eq!(power_grid(PowerDbm(0.0), PowerDbm(1.0), 0.3).unwrap().len(), 4);
        assert!(power_grid(PowerDbm(0.0), PowerDbm(-1.0), 1.0).is_err());
        assert!(power_grid(PowerDbm(0.0), PowerDbm(1.0), 0.0).is_err());
    }
}
