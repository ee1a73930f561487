//! Spectral lines, their provenance, and binning into a [`Spectrum`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::units::{amplitude_floor, dbm_to_watts, watts_to_dbm, FrequencyHz, PhaseRad, PowerDbm};

/// How co-located tones with different origins are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SummationMode {
    /// Add linear powers (uncorrelated phases).
    #[default]
    PowerSum,
    /// Add voltage magnitudes (all contributions in phase).
    WorstCase,
}

impl SummationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SummationMode::PowerSum => "POWER_SUM",
            SummationMode::WorstCase => "WORST_CASE",
        }
    }
}

impl std::str::FromStr for SummationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "power_sum" | "power" | "rss" => Ok(SummationMode::PowerSum),
            "worst_case" | "worst" | "linear" => Ok(SummationMode::WorstCase),
            other => Err(format!("unknown summation mode `{other}`")),
        }
    }
}

/// One hop in a tone's history: the stage that produced it and the signal (`n`)
/// and LO (`m`) harmonic orders involved. Negative `m` marks a difference
/// product.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProductStep {
    pub stage: Arc<str>,
    pub n: i32,
    pub m: i32,
}

impl ProductStep {
    pub fn new(stage: &Arc<str>, n: i32, m: i32) -> Self {
        ProductStep { stage: Arc::clone(stage), n, m }
    }
}

/// Provenance of a tone. Tones merge coherently only when these are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OriginSignature {
    source: Arc<str>,
    path: Arc<[ProductStep]>,
}

impl OriginSignature {
    /// An unmodified stimulus tone.
    pub fn root(source: impl Into<Arc<str>>) -> Self {
        OriginSignature { source: source.into(), path: Arc::from(Vec::new()) }
    }

    pub fn with_path(source: impl Into<Arc<str>>, path: Vec<ProductStep>) -> Self {
        OriginSignature { source: source.into(), path: Arc::from(path) }
    }

    pub fn extend(&self, step: ProductStep) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(step);
        OriginSignature { source: Arc::clone(&self.source), path: Arc::from(path) }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn path(&self) -> &[ProductStep] {
        &self.path
    }

    pub fn is_identity(&self) -> bool {
        self.path.is_empty()
    }
}

impl fmt::Display for OriginSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)?;
        for s in self.path.iter() {
            write!(f, "/{}:{}:{}", s.stage, s.n, s.m)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tone {
    pub freq: FrequencyHz,
    pub power: PowerDbm,
    pub phase: PhaseRad,
    pub origin: OriginSignature,
}

impl Tone {
    pub fn new(freq: FrequencyHz, power: PowerDbm, phase: PhaseRad, origin: OriginSignature) -> Self {
        Tone { freq, power, phase, origin }
    }

    /// A zero-phase stimulus line with an identity origin.
    pub fn stimulus(source: impl Into<Arc<str>>, freq: FrequencyHz, power: PowerDbm) -> Self {
        Tone::new(freq, power, PhaseRad::default(), OriginSignature::root(source))
    }

    pub fn watts(&self) -> f64 {
        dbm_to_watts(self.power)
    }

    fn phasor(&self) -> Complex64 {
        Complex64::from_polar(self.watts().sqrt(), self.phase.value())
    }

    fn sort_key_cmp(&self, other: &Tone) -> std::cmp::Ordering {
        self.freq
            .cmp(&other.freq)
            .then(self.power.0.total_cmp(&other.power.0))
            .then_with(|| self.origin.cmp(&other.origin))
            .then(self.phase.value().total_cmp(&other.phase.value()))
    }
}

/// Tones sorted by frequency, already merged at `bin_tolerance`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Spectrum {
    tones: Vec<Tone>,
    bin_tolerance: FrequencyHz,
}

impl Spectrum {
    pub fn empty(bin_tolerance: FrequencyHz) -> Self {
        Spectrum { tones: Vec::new(), bin_tolerance }
    }

    /// Bins `tones` with [`SummationMode::PowerSum`].
    pub fn from_tones(tones: Vec<Tone>, bin_tolerance: FrequencyHz) -> Self {
        bin_spectrum(tones, bin_tolerance, SummationMode::PowerSum)
    }

    pub fn tones(&self) -> &[Tone] {
        &self.tones
    }

    pub fn into_tones(self) -> Vec<Tone> {
        self.tones
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Tone> {
        self.tones.iter()
    }

    pub fn len(&self) -> usize {
        self.tones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tones.is_empty()
    }

    pub fn bin_tolerance(&self) -> FrequencyHz {
        self.bin_tolerance
    }

    /// The tone nearest to `freq` within the bin tolerance, if any.
    pub fn tone_at(&self, freq: FrequencyHz) -> Option<&Tone> {
        let tol = self.bin_tolerance.hz();
        let idx = self.tones.partition_point(|t| t.freq < freq);
        let candidates = idx.saturating_sub(1)..(idx + 1).min(self.tones.len());
        self.tones[candidates]
            .iter()
            .filter(|t| t.freq.hz().abs_diff(freq.hz()) <= tol)
            .min_by_key(|t| t.freq.hz().abs_diff(freq.hz()))
    }

    pub fn power_at(&self, freq: FrequencyHz) -> Option<PowerDbm> {
        self.tone_at(freq).map(|t| t.power)
    }

    /// The highest-power tone; ties go to the lower frequency.
    pub fn strongest(&self) -> Option<&Tone> {
        self.tones.iter().reduce(|best, t| if t.power.0 > best.power.0 { t } else { best })
    }

    pub fn total_watts(&self) -> f64 {
        self.tones.iter().map(Tone::watts).sum()
    }
}

impl<'a> IntoIterator for &'a Spectrum {
    type Item = &'a Tone;
    type IntoIter = std::slice::Iter<'a, Tone>;
    fn into_iter(self) -> Self::IntoIter {
        self.tones.iter()
    }
}

/// Sorts and merges raw tones.
///
/// Tones form a cluster while consecutive frequencies are at most `tol`
/// apart. Inside a cluster, tones with equal origin add as phasors; the
/// per-origin results are then combined by `mode`. The merged line keeps the
/// frequency, phase and origin of its strongest contributor. Anything below the
/// amplitude floor is dropped.
pub fn bin_spectrum(raw: Vec<Tone>, tol: FrequencyHz, mode: SummationMode) -> Spectrum {
    let floor = amplitude_floor().0;
    let mut tones: Vec<Tone> = raw.into_iter().filter(|t| t.power.0.is_finite() && t.power.0 >= floor).collect();
    tones.sort_by(Tone::sort_key_cmp);

    let mut out = Vec::with_capacity(tones.len());
    let mut start = 0;
    while start < tones.len() {
        let mut end = start + 1;
        while end < tones.len() && tones[end].freq.hz() - tones[end - 1].freq.hz() <= tol.hz() {
            end += 1;
        }
        if end - start == 1 {
            out.push(tones[start].clone());
        } else if let Some(t) = merge_cluster(&tones[start..end], mode, floor) {
            out.push(t);
        }
        start = end;
    }
    Spectrum { tones: out, bin_tolerance: tol }
}

fn merge_cluster(cluster: &[Tone], mode: SummationMode, floor: f64) -> Option<Tone> {
    let mut groups: BTreeMap<&OriginSignature, Vec<&Tone>> = BTreeMap::new();
    for t in cluster {
        groups.entry(&t.origin).or_default().push(t);
    }
    let merged: Vec<Tone> = groups.into_values().filter_map(|g| coherent_sum(&g)).filter(|t| t.power.0 >= floor).collect();
    if merged.len() <= 1 {
        return merged.into_iter().next();
    }
    let total_watts = match mode {
        SummationMode::PowerSum => merged.iter().map(Tone::watts).sum::<f64>(),
        SummationMode::WorstCase => merged.iter().map(|t| t.watts().sqrt()).sum::<f64>().powi(2),
    };
    let lead = strongest_of(merged.iter());
    let mut out = lead.clone();
    out.power = watts_to_dbm(total_watts);
    (out.power.0 >= floor).then_some(out)
}

fn coherent_sum(group: &[&Tone]) -> Option<Tone> {
    if let [single] = group {
        return Some((*single).clone());
    }
    let sum: Complex64 = group.iter().map(|t| t.phasor()).sum();
    let w = sum.norm_sqr();
    let power = watts_to_dbm(w);
    if !power.0.is_finite() {
        return None;
    }
    let lead = strongest_of(group.iter().copied());
    Some(Tone::new(lead.freq, power, PhaseRad::new(sum.arg()), lead.origin.clone()))
}

// Input is in sort order, so the first of equal-power tones wins.
fn strongest_of<'a>(it: impl Iterator<Item = &'a Tone>) -> &'a Tone {
    it.reduce(|best, t| if t.power.0 > best.power.0 { t } else { best }).expect("non-empty group")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn tone(src: &str, hz: u64, p: f64, phase: f64) -> Tone {
        Tone::new(FrequencyHz::from_hz(hz), PowerDbm(p), PhaseRad::new(phase), OriginSignature::root(src))
    }

    #[test]
    fn coherent_cancellation_drops_tone() {
        let s = bin_spectrum(
            vec![tone("a", 1000, -10.0, 0.0), tone("a", 1000, -10.0, PI)],
            FrequencyHz::ZERO,
            SummationMode::PowerSum,
        );
        assert!(s.is_empty());
    }

    #[test]
    fn coherent_in_phase_adds_six_db() {
        let s = bin_spectrum(
            vec![tone("a", 1000, -10.0, 0.0), tone("a", 1000, -10.0, 0.0)],
            FrequencyHz::ZERO,
            SummationMode::PowerSum,
        );
        assert_eq!(s.len(), 1);
        assert!((s.tones()[0].power.0 - (-10.0 + 20.0 * 2f64.log10())).abs() < 1e-9);
    }

    #[test]
    fn incoherent_power_sum_example() {
        let s = bin_spectrum(
            vec![tone("a", 1000, -43.01, 0.0), tone("b", 1000, -43.01, 1.0)],
            FrequencyHz::ZERO,
            SummationMode::PowerSum,
        );
        assert_eq!(s.len(), 1);
        // brute force: watts, add, back to dBm
        let w = 2.0 * 10f64.powf((-43.01 - 30.0) / 10.0);
        let expected = 10.0 * w.log10() + 30.0;
        assert!((s.tones()[0].power.0 - expected).abs() < 1e-12);
        assert!((s.tones()[0].power.0 + 40.0).abs() <= 0.01);
    }

    #[test]
    fn worst_case_adds_voltages() {
        let s = bin_spectrum(
            vec![tone("a", 1000, -40.0, 0.0), tone("b", 1000, -40.0, 2.0)],
            FrequencyHz::ZERO,
            SummationMode::WorstCase,
        );
        assert!((s.tones()[0].power.0 - (-40.0 + 20.0 * 2f64.log10())).abs() < 1e-9);
    }

    #[test]
    fn single_tone_is_identity() {
        let t = tone("a", 5, -3.0, 0.25);
        let s = bin_spectrum(vec![t.clone()], FrequencyHz::from_hz(10), SummationMode::PowerSum);
        assert_eq!(s.tones(), &[t]);
    }

    #[test]
    fn tolerance_chains_neighbours() {
        let s = bin_spectrum(
            vec![tone("a", 0, -10.0, 0.0), tone("b", 1000, -20.0, 0.0), tone("c", 1500, -30.0, 0.0), tone("d", 5000, -10.0, 0.0)],
            FrequencyHz::from_khz(1),
            SummationMode::PowerSum,
        );
        assert_eq!(s.len(), 2);
        assert_eq!(s.tones()[0].freq.hz(), 0);
        assert_eq!(s.tones()[0].origin.source(), "a");
        assert_eq!(s.tones()[1].freq.hz(), 5000);
    }

    #[test]
    fn below_floor_is_dropped() {
        let s = Spectrum::from_tones(vec![tone("a", 1, -250.0, 0.0)], FrequencyHz::ZERO);
        assert!(s.is_empty());
    }

    #[test]
    fn tone_lookup_respects_tolerance() {
        let s = Spectrum::from_tones(vec![tone("a", 1000, -1.0, 0.0), tone("b", 3000, -2.0, 0.0)], FrequencyHz::from_hz(100));
        assert_eq!(s.power_at(FrequencyHz::from_hz(1050)), Some(PowerDbm(-1.0)));
        assert_eq!(s.power_at(FrequencyHz::from_hz(2000)), None);
        assert_eq!(s.strongest().unwrap().freq.hz(), 1000);
    }

    fn arb_tone() -> impl Strategy<Value = Tone> {
        (0u64..40, -80.0f64..10.0, 0.0f64..std::f64::consts::TAU, 0u8..3)
            .prop_map(|(f, p, ph, src)| tone(["x", "y", "z"][src as usize], f * 250, p, ph))
    }

    proptest! {
        #[test]
        fn binning_is_idempotent(raw in proptest::collection::vec(arb_tone(), 0..30), tol in 0u64..600, worst in any::<bool>()) {
            let mode = if worst { SummationMode::WorstCase } else { SummationMode::PowerSum };
            let tol = FrequencyHz::from_hz(tol);
            let once = bin_spectrum(raw, tol, mode);
            let twice = bin_spectrum(once.tones().to_vec(), tol, mode);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn binning_is_order_independent(raw in proptest::collection::vec(arb_tone(), 0..30), tol in 0u64..600, seed in any::<u64>()) {
            let mut shuffled = raw.clone();
            // deterministic Fisher-Yates from the seed
            let mut state = seed | 1;
            for i in (1..shuffled.len()).rev() {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                shuffled.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let tol = FrequencyHz::from_hz(tol);
            let a = bin_spectrum(raw, tol, SummationMode::PowerSum);
            let b = bin_spectrum(shuffled, tol, SummationMode::PowerSum);
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert_eq!(x.freq, y.freq);
                prop_assert!((x.power.0 - y.power.0).abs() < 1e-9);
            }
        }

        #[test]
        fn equal_incoherent_tones_gain_3_0103_db(p in -150.0f64..40.0) {
            let s = bin_spectrum(vec![tone("a", 7, p, 0.0), tone("b", 7, p, 0.0)], FrequencyHz::ZERO, SummationMode::PowerSum);
            prop_assert!((s.tones()[0].power.0 - p - 10.0 * 2f64.log10()).abs() < 1e-9);
            prop_assert!((s.tones()[0].power.0 - p - 3.0103).abs() < 1e-4);
        }

        #[test]
        fn binned_output_is_sorted_and_separated(raw in proptest::collection::vec(arb_tone(), 0..30), tol in 0u64..600) {
            let s = bin_spectrum(raw, FrequencyHz::from_hz(tol), SummationMode::PowerSum);
            for w in s.tones().windows(2) {
                prop_assert!(w[1].freq.hz() - w[0].freq.hz() > tol);
            }
        }
    }
}
