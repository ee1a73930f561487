//! Behavioral component parameters and the ordered chain that connects them.
//!
//! A chain file describes one signal path (the "main" path) plus any number of
//! LO sub-chains, each starting at an LO source. Stage blocks join an LO
//! sub-chain with `chain = <lo name>`; otherwise they are appended to the main
//! path in file order. Mixers name the LO sub-chain that drives them with
//! `lo = <lo name>`.
//!
//! ```text
//! [lo lo1]
//! freq = 12.5GHz
//! power = -5
//!
//! [doubler dbl1]
//! chain = lo1
//!
//! [mixer mix1]
//! lo = lo1
//! conversion_loss = 8
//!
//! [probe 2]
//! after = mix1
//! ```
//!
//! Mixer spur rejections and isolations default to scenario calibrations, not
//! datasheet values; override them per scenario.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::config::{apply_overrides, parse_blocks, write_blocks, Block, ConfigError, Entry};
use crate::units::{FrequencyHz, GainDb, PhaseRad, PowerDbm};

#[derive(Debug, Clone, PartialEq)]
pub struct DoublerSpec {
    /// Leveled output power.
    pub p_max: PowerDbm,
    /// Input power at which the output levels.
    pub p_threshold: PowerDbm,
    /// Output dB per input dB below the threshold.
    pub unleveled_slope: f64,
    /// Residual fundamental relative to the doubled output (dBc, negative).
    pub fundamental_leakage: GainDb,
}

impl Default for DoublerSpec {
    fn default() -> Self {
        DoublerSpec {
            p_max: PowerDbm(20.0),
            p_threshold: PowerDbm(-12.0),
            unleveled_slope: 2.0,
            fundamental_leakage: GainDb(-30.0),
        }
    }
}

impl DoublerSpec {
    /// Doubled-tone output power for a given drive level.
    pub fn output_power(&self, input: PowerDbm) -> PowerDbm {
        if input.0 >= self.p_threshold.0 {
            self.p_max
        } else {
            PowerDbm(self.p_max.0 - self.unleveled_slope * (self.p_threshold.0 - input.0))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixerSpec {
    pub conversion_loss: GainDb,
    /// Rejection of the `(n, m)` product relative to `(1, 1)`, in dBc.
    pub spur_table: BTreeMap<(u32, u32), GainDb>,
    /// Rejection used for orders missing from `spur_table`.
    pub spur_floor: GainDb,
    pub lo_to_rf_isolation: GainDb,
    pub if_to_rf_isolation: GainDb,
    pub n_max: u32,
    pub m_max: u32,
    /// Recommended LO drive window at the mixer LO port.
    pub lo_drive_min: PowerDbm,
    pub lo_drive_max: PowerDbm,
}

impl Default for MixerSpec {
    fn default() -> Self {
        MixerSpec {
            conversion_loss: GainDb(8.0),
            spur_table: default_spur_table(),
            spur_floor: GainDb(-60.0),
            lo_to_rf_isolation: GainDb(25.0),
            if_to_rf_isolation: GainDb(30.0),
            n_max: 3,
            m_max: 3,
            lo_drive_min: PowerDbm(13.0),
            lo_drive_max: PowerDbm(25.0),
        }
    }
}

/// `(1,1)` at 0 dBc, `(1,2)` and `(1,3)` at −40 dBc.
pub fn default_spur_table() -> BTreeMap<(u32, u32), GainDb> {
    BTreeMap::from([((1, 1), GainDb(0.0)), ((1, 2), GainDb(-40.0)), ((1, 3), GainDb(-40.0))])
}

impl MixerSpec {
    pub fn rejection(&self, n: u32, m: u32) -> GainDb {
        if (n, m) == (1, 1) {
            return GainDb(0.0);
        }
        self.spur_table.get(&(n, m)).copied().unwrap_or(self.spur_floor)
    }

    pub(crate) fn check(&self, label: &str) -> Result<(), ConfigError> {
        let field = |k: &str| format!("{label}.{k}");
        if !(self.conversion_loss.0 > 0.0) {
            return Err(ConfigError::invariant(field("conversion_loss"), "must be positive"));
        }
        if self.n_max == 0 || self.m_max == 0 {
            return Err(ConfigError::invariant(field("n_max"), "orders must be at least 1"));
        }
        if self.spur_floor.0 > 0.0 {
            return Err(ConfigError::invariant(field("spur_floor"), "must be <= 0 dBc"));
        }
        for (&(n, m), level) in &self.spur_table {
            let key = field(&format!("spur.{n}.{m}"));
            if n == 0 || m == 0 {
                return Err(ConfigError::invariant(key, "orders start at 1; feedthrough is set by the isolation keys"));
            }
            if (n, m) == (1, 1) && level.0 != 0.0 {
                return Err(ConfigError::invariant(key, "(1,1) is the 0 dBc reference"));
            }
            if level.0 > 0.0 || !level.0.is_finite() {
                return Err(ConfigError::invariant(key, "must be finite and <= 0 dBc"));
            }
        }
        for (k, v) in [("lo_to_rf_isolation", self.lo_to_rf_isolation), ("if_to_rf_isolation", self.if_to_rf_isolation)] {
            if !v.0.is_finite() {
                return Err(ConfigError::invariant(field(k), "must be finite"));
            }
        }
        if self.lo_drive_min.0 > self.lo_drive_max.0 {
            return Err(ConfigError::invariant(field("lo_drive_min"), "must not exceed lo_drive_max"));
        }
        Ok(())
    }
}

/// Attenuation versus frequency, linear in dB between breakpoints and held
/// constant beyond the first and last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub breakpoints: Vec<(FrequencyHz, f64)>,
}

impl FilterSpec {
    pub fn new(breakpoints: Vec<(FrequencyHz, f64)>) -> Result<Self, String> {
        if breakpoints.is_empty() {
            return Err("at least one breakpoint is required".into());
        }
        if breakpoints.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err("breakpoint frequencies must be strictly increasing".into());
        }
        if breakpoints.iter().any(|&(_, a)| !(a >= 0.0) || !a.is_finite()) {
            return Err("attenuation must be finite and >= 0 dB".into());
        }
        Ok(FilterSpec { breakpoints })
    }

    pub fn attenuation_db(&self, f: FrequencyHz) -> f64 {
        let bp = &self.breakpoints;
        let idx = bp.partition_point(|&(bf, _)| bf <= f);
        if idx == 0 {
            return bp[0].1;
        }
        if idx == bp.len() {
            return bp[bp.len() - 1].1;
        }
        let (f0, a0) = bp[idx - 1];
        let (f1, a1) = bp[idx];
        let t = (f.hz() - f0.hz()) as f64 / (f1.hz() - f0.hz()) as f64;
        a0 + t * (a1 - a0)
    }

    pub fn min_attenuation_db(&self) -> f64 {
        self.breakpoints.iter().map(|&(_, a)| a).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplifierSpec {
    pub gain: GainDb,
    pub oip3: PowerDbm,
    pub im5_enabled: bool,
    pub oip5: Option<PowerDbm>,
}

impl AmplifierSpec {
    pub fn new(gain: f64, oip3: f64) -> Self {
        AmplifierSpec { gain: GainDb(gain), oip3: PowerDbm(oip3), im5_enabled: false, oip5: None }
    }

    pub fn with_oip5(mut self, oip5: f64) -> Self {
        self.im5_enabled = true;
        self.oip5 = Some(PowerDbm(oip5));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttenuatorSpec {
    pub loss: GainDb,
}

impl Default for AttenuatorSpec {
    fn default() -> Self {
        AttenuatorSpec { loss: GainDb(6.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoSourceSpec {
    pub freq: FrequencyHz,
    pub power: PowerDbm,
    /// `(k, dBc)` for the k-th harmonic, `k >= 2`.
    pub harmonics: Vec<(u32, GainDb)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentSpec {
    Doubler(DoublerSpec),
    Mixer(MixerSpec),
    Filter(FilterSpec),
    Amplifier(AmplifierSpec),
    Attenuator(AttenuatorSpec),
}

impl ComponentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ComponentSpec::Doubler(_) => "doubler",
            ComponentSpec::Mixer(_) => "mixer",
            ComponentSpec::Filter(_) => "filter",
            ComponentSpec::Amplifier(_) => "amplifier",
            ComponentSpec::Attenuator(_) => "attenuator",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub id: Arc<str>,
    pub spec: ComponentSpec,
}

impl Stage {
    pub fn new(id: &str, spec: ComponentSpec) -> Self {
        Stage { id: Arc::from(id), spec }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoChain {
    pub name: String,
    pub source: LoSourceSpec,
    pub stages: Vec<Stage>,
}

/// Which path a probe sits on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathRef {
    Main,
    Lo(String),
}

/// A probe at inter-stage position `index` of `path`: 0 is the path input,
/// `len` is the path output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    pub name: String,
    pub path: PathRef,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chain {
    pub stages: Vec<Stage>,
    pub lo_chains: Vec<LoChain>,
    /// Mixer stage id to LO sub-chain name.
    pub lo_routing: BTreeMap<String, String>,
    pub probes: Vec<Probe>,
}

impl Chain {
    pub fn lo_chain(&self, name: &str) -> Option<&LoChain> {
        self.lo_chains.iter().find(|l| l.name == name)
    }

    /// Stages on the main path plus every LO sub-chain.
    pub fn stage_count(&self) -> usize {
        self.stages.len() + self.lo_chains.iter().map(|l| l.stages.len()).sum::<usize>()
    }

    pub fn all_stages(&self) -> impl Iterator<Item = &Stage> {
        self.lo_chains.iter().flat_map(|l| l.stages.iter()).chain(self.stages.iter())
    }

    pub fn stage(&self, id: &str) -> Option<&Stage> {
        self.all_stages().find(|s| &*s.id == id)
    }

    pub fn probe(&self, name: &str) -> Option<&Probe> {
        self.probes.iter().find(|p| p.name == name)
    }

    fn path_len(&self, path: &PathRef) -> Option<usize> {
        match path {
            PathRef::Main => Some(self.stages.len()),
            PathRef::Lo(n) => self.lo_chain(n).map(|l| l.stages.len()),
        }
    }

    /// Structural checks: unique ids, LO routing, probe positions.
    pub fn check(&self) -> Result<(), ConfigError> {
        let mut names = BTreeSet::new();
        for s in self.all_stages() {
            if !names.insert(s.id.to_string()) {
                return Err(ConfigError::DuplicateName(s.id.to_string()));
            }
        }
        for l in &self.lo_chains {
            if !names.insert(l.name.clone()) {
                return Err(ConfigError::DuplicateName(l.name.clone()));
            }
            if l.stages.iter().any(|s| matches!(s.spec, ComponentSpec::Mixer(_))) {
                return Err(ConfigError::invariant(format!("{}.chain", l.name), "mixers cannot sit inside an LO sub-chain"));
            }
        }
        for s in &self.stages {
            if let ComponentSpec::Mixer(_) = s.spec {
                let lo = self
                    .lo_routing
                    .get(&*s.id)
                    .ok_or_else(|| ConfigError::MissingKey { block: s.id.to_string(), key: "lo".into() })?;
                if self.lo_chain(lo).is_none() {
                    return Err(ConfigError::DanglingLoReference { mixer: s.id.to_string(), lo: lo.clone() });
                }
            }
        }
        for mixer in self.lo_routing.keys() {
            if !matches!(self.stages.iter().find(|s| &*s.id == mixer), Some(Stage { spec: ComponentSpec::Mixer(_), .. })) {
                return Err(ConfigError::invariant(
                    format!("{mixer}.lo"),
                    "LO routing names a stage that is not a main-path mixer",
                ));
            }
        }
        let mut probe_names = BTreeSet::new();
        for p in &self.probes {
            if !probe_names.insert(p.name.as_str()) {
                return Err(ConfigError::DuplicateName(p.name.clone()));
            }
            match self.path_len(&p.path) {
                None => return Err(ConfigError::invariant(format!("{}.at", p.name), "probe names an unknown LO sub-chain")),
                Some(len) if p.index > len => {
                    return Err(ConfigError::invariant(
                        format!("{}.at", p.name),
                        format!("position {} is past the end ({len})", p.index),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Stimulus lines for `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusSpec {
    pub name: String,
    pub tones: Vec<(FrequencyHz, PowerDbm, PhaseRad)>,
}

/// Two-tone power sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub center: FrequencyHz,
    pub spacing: FrequencyHz,
    pub start: PowerDbm,
    pub stop: PowerDbm,
    pub step: f64,
}

/// LO-drive sweep settings for leveling curves.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelingSpec {
    pub lo: String,
    pub start: PowerDbm,
    pub stop: PowerDbm,
    pub step: f64,
    pub epsilon: f64,
}

/// A chain plus the optional run settings stored alongside it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub chain: Chain,
    pub stimulus: Option<StimulusSpec>,
    pub sweep: Option<SweepSpec>,
    pub leveling: Option<LevelingSpec>,
}

pub fn parse_chain_config(text: &str) -> Result<Chain, ConfigError> {
    parse_scenario(text).map(|s| s.chain)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    parse_scenario_with_overrides(text, &[])
}

/// Parses a chain file after applying `block.key=value` overrides.
pub fn parse_scenario_with_overrides(text: &str, overrides: &[String]) -> Result<Scenario, ConfigError> {
    if text.trim().is_empty() {
        return Err(ConfigError::Empty);
    }
    let mut blocks = parse_blocks(text)?;
    apply_overrides(&mut blocks, overrides)?;
    scenario_from_blocks(&blocks)
}

fn named(b: &Block) -> Result<&str, ConfigError> {
    b.name.as_deref().ok_or(ConfigError::Syntax {
        line: b.line,
        column: 1,
        message: format!("`[{}]` blocks need a name: `[{} <name>]`", b.kind, b.kind),
    })
}

enum Placement {
    Main,
    Lo(String),
}

fn scenario_from_blocks(blocks: &[Block]) -> Result<Scenario, ConfigError> {
    let mut sc = Scenario::default();
    let mut probe_blocks = Vec::new();
    for b in blocks {
        match b.kind.as_str() {
            "lo" => {
                let name = named(b)?;
                let source = parse_lo_source(b)?;
                sc.chain.lo_chains.push(LoChain { name: name.to_string(), source, stages: Vec::new() });
            }
            "doubler" | "mixer" | "filter" | "amplifier" | "attenuator" => {
                let id = named(b)?;
                let (spec, placement, lo) = parse_stage(b)?;
                let stage = Stage::new(id, spec);
                match placement {
                    Placement::Main => sc.chain.stages.push(stage),
                    Placement::Lo(lo_name) => {
                        let chain = sc.chain.lo_chains.iter_mut().find(|l| l.name == lo_name).ok_or_else(|| {
                            ConfigError::invariant(
                                format!("{id}.chain"),
                                format!("LO sub-chain `{lo_name}` must be declared before its stages"),
                            )
                        })?;
                        chain.stages.push(stage);
                    }
                }
                if let Some(lo) = lo {
                    sc.chain.lo_routing.insert(id.to_string(), lo);
                }
            }
            "probe" => probe_blocks.push(b),
            "stimulus" => {
                if sc.stimulus.is_some() {
                    return Err(ConfigError::DuplicateName("stimulus".into()));
                }
                sc.stimulus = Some(parse_stimulus(b)?);
            }
            "sweep" => {
                if sc.sweep.is_some() {
                    return Err(ConfigError::DuplicateName("sweep".into()));
                }
                sc.sweep = Some(parse_sweep(b)?);
            }
            "leveling" => {
                if sc.leveling.is_some() {
                    return Err(ConfigError::DuplicateName("leveling".into()));
                }
                sc.leveling = Some(parse_leveling(b)?);
            }
            other => {
                return Err(ConfigError::UnknownComponentKind { line: b.line, kind: other.to_string() });
            }
        }
    }
    for b in probe_blocks {
        let probe = parse_probe(b, &sc.chain)?;
        sc.chain.probes.push(probe);
    }
    sc.chain.check()?;
    if let Some(lev) = &sc.leveling {
        if sc.chain.lo_chain(&lev.lo).is_none() {
            return Err(ConfigError::DanglingLoReference { mixer: "leveling".into(), lo: lev.lo.clone() });
        }
    }
    Ok(sc)
}

fn parse_lo_source(b: &Block) -> Result<LoSourceSpec, ConfigError> {
    b.check_keys(|k| matches!(k, "freq" | "power" | "harmonics"))?;
    let mut harmonics = Vec::new();
    if let Some(e) = b.get("harmonics") {
        for item in e.items() {
            let (k, lvl) = item.split_once(':').ok_or_else(|| e.syntax(format!("harmonic `{item}` must be `k:dBc`")))?;
            let k: u32 = k.trim().parse().map_err(|_| e.syntax(format!("bad harmonic order `{k}`")))?;
            let lvl: f64 = lvl.trim().parse().map_err(|_| e.syntax(format!("bad harmonic level `{lvl}`")))?;
            if k < 2 {
                return Err(b.violation("harmonics", "harmonic order must be >= 2"));
            }
            if !(lvl < 0.0) || !lvl.is_finite() {
                return Err(b.violation("harmonics", "harmonic levels must be < 0 dBc"));
            }
            harmonics.push((k, GainDb(lvl)));
        }
    }
    Ok(LoSourceSpec { freq: b.freq_req("freq")?, power: PowerDbm(b.f64_req("power")?), harmonics })
}

fn parse_stage(b: &Block) -> Result<(ComponentSpec, Placement, Option<String>), ConfigError> {
    let placement = match b.get("chain") {
        Some(e) => Placement::Lo(e.value.clone()),
        None => Placement::Main,
    };
    let mut lo = None;
    let spec = match b.kind.as_str() {
        "doubler" => {
            b.check_keys(|k| matches!(k, "chain" | "p_max" | "p_threshold" | "unleveled_slope" | "fundamental_leakage"))?;
            let d = DoublerSpec::default();
            let spec = DoublerSpec {
                p_max: PowerDbm(b.f64_or("p_max", d.p_max.0)?),
                p_threshold: PowerDbm(b.f64_or("p_threshold", d.p_threshold.0)?),
                unleveled_slope: b.f64_or("unleveled_slope", d.unleveled_slope)?,
                fundamental_leakage: GainDb(b.f64_or("fundamental_leakage", d.fundamental_leakage.0)?),
            };
            if !(spec.unleveled_slope > 0.0) {
                return Err(b.violation("unleveled_slope", "must be > 0"));
            }
            if !(spec.fundamental_leakage.0 < 0.0) {
                return Err(b.violation("fundamental_leakage", "must be < 0 dBc"));
            }
            ComponentSpec::Doubler(spec)
        }
        "mixer" => {
            b.check_keys(|k| {
                matches!(
                    k,
                    "lo" | "conversion_loss"
                        | "spur_floor"
                        | "lo_to_rf_isolation"
                        | "if_to_rf_isolation"
                        | "n_max"
                        | "m_max"
                        | "lo_drive_min"
                        | "lo_drive_max"
                ) || k.starts_with("spur.")
            })?;
            if b.get("chain").is_some() {
                return Err(b.violation("chain", "mixers cannot sit inside an LO sub-chain"));
            }
            lo = Some(b.require("lo")?.value.clone());
            let d = MixerSpec::default();
            let mut spur_table = d.spur_table.clone();
            for e in b.entries.iter().filter(|e| e.key.starts_with("spur.")) {
                let (n, m) = parse_spur_key(e)?;
                spur_table.insert((n, m), GainDb(e.parse()?));
            }
            let spec = MixerSpec {
                conversion_loss: GainDb(b.f64_or("conversion_loss", d.conversion_loss.0)?),
                spur_table,
                spur_floor: GainDb(b.f64_or("spur_floor", d.spur_floor.0)?),
                lo_to_rf_isolation: GainDb(b.f64_or("lo_to_rf_isolation", d.lo_to_rf_isolation.0)?),
                if_to_rf_isolation: GainDb(b.f64_or("if_to_rf_isolation", d.if_to_rf_isolation.0)?),
                n_max: b.parse_opt("n_max")?.unwrap_or(d.n_max),
                m_max: b.parse_opt("m_max")?.unwrap_or(d.m_max),
                lo_drive_min: PowerDbm(b.f64_or("lo_drive_min", d.lo_drive_min.0)?),
                lo_drive_max: PowerDbm(b.f64_or("lo_drive_max", d.lo_drive_max.0)?),
            };
            spec.check(b.label())?;
            ComponentSpec::Mixer(spec)
        }
        "filter" => {
            b.check_keys(|k| matches!(k, "chain" | "breakpoints"))?;
            let e = b.require("breakpoints")?;
            let mut bps = Vec::new();
            for item in e.items() {
                let (f, a) = item.split_once(':').ok_or_else(|| e.syntax(format!("breakpoint `{item}` must be `freq:dB`")))?;
                let f: FrequencyHz = f.trim().parse().map_err(|err| e.syntax(format!("breakpoint frequency `{f}`: {err}")))?;
                let a: f64 = a.trim().parse().map_err(|_| e.syntax(format!("breakpoint attenuation `{a}`")))?;
                bps.push((f, a));
            }
            ComponentSpec::Filter(FilterSpec::new(bps).map_err(|m| b.violation("breakpoints", m))?)
        }
        "amplifier" => {
            b.check_keys(|k| matches!(k, "chain" | "gain" | "oip3" | "im5" | "oip5"))?;
            let oip5 = b.parse_opt::<f64>("oip5")?;
            let im5_enabled = b.parse_opt::<bool>("im5")?.unwrap_or(oip5.is_some());
            if im5_enabled && oip5.is_none() {
                return Err(b.violation("oip5", "required when im5 is enabled"));
            }
            if oip5.is_some_and(|v| !v.is_finite()) {
                return Err(b.violation("oip5", "must be finite"));
            }
            ComponentSpec::Amplifier(AmplifierSpec {
                gain: GainDb(b.f64_req("gain")?),
                oip3: PowerDbm(b.f64_req("oip3")?),
                im5_enabled,
                oip5: oip5.map(PowerDbm),
            })
        }
        "attenuator" => {
            b.check_keys(|k| matches!(k, "chain" | "loss"))?;
            let loss = b.f64_or("loss", AttenuatorSpec::default().loss.0)?;
            if !(loss >= 0.0) {
                return Err(b.violation("loss", "must be >= 0 dB"));
            }
            ComponentSpec::Attenuator(AttenuatorSpec { loss: GainDb(loss) })
        }
        _ => unreachable!("caller filters kinds"),
    };
    Ok((spec, placement, lo))
}

pub(crate) fn parse_spur_key(e: &Entry) -> Result<(u32, u32), ConfigError> {
    let bad = || ConfigError::Syntax { line: e.line, column: 1, message: format!("spur key `{}` must be `spur.<n>.<m>`", e.key) };
    let rest = e.key.strip_prefix("spur.").ok_or_else(bad)?;
    let (n, m) = rest.split_once('.').ok_or_else(bad)?;
    Ok((n.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?))
}

fn parse_probe(b: &Block, chain: &Chain) -> Result<Probe, ConfigError> {
    b.check_keys(|k| matches!(k, "at" | "before" | "after"))?;
    let name = named(b)?.to_string();
    let given: Vec<&Entry> = ["at", "before", "after"].iter().filter_map(|k| b.get(k)).collect();
    if given.len() != 1 {
        return Err(ConfigError::invariant(format!("{name}.at"), "exactly one of `at`, `before`, `after` is required"));
    }
    let e = given[0];
    let (path, index) = match e.key.as_str() {
        "at" => {
            let (p, i) = e.value.split_once(':').ok_or_else(|| e.syntax("expected `main:<index>` or `<lo>:<index>`"))?;
            let path = if p.trim() == "main" { PathRef::Main } else { PathRef::Lo(p.trim().to_string()) };
            let idx: usize = i.trim().parse().map_err(|_| e.syntax(format!("bad probe index `{i}`")))?;
            (path, idx)
        }
        key => {
            let target = e.value.as_str();
            let (path, pos) = locate_stage(chain, target)
                .ok_or_else(|| ConfigError::invariant(format!("{name}.{key}"), format!("unknown stage `{target}`")))?;
            (path, if key == "before" { pos } else { pos + 1 })
        }
    };
    Ok(Probe { name, path, index })
}

fn locate_stage(chain: &Chain, id: &str) -> Option<(PathRef, usize)> {
    if let Some(i) = chain.stages.iter().position(|s| &*s.id == id) {
        return Some((PathRef::Main, i));
    }
    chain.lo_chains.iter().find_map(|l| l.stages.iter().position(|s| &*s.id == id).map(|i| (PathRef::Lo(l.name.clone()), i)))
}

fn parse_stimulus(b: &Block) -> Result<StimulusSpec, ConfigError> {
    b.check_keys(|k| k == "tones")?;
    let e = b.require("tones")?;
    let mut tones = Vec::new();
    for item in e.items() {
        let parts: Vec<&str> = item.split(':').map(str::trim).collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(e.syntax(format!("tone `{item}` must be `freq:dBm[:phase_rad]`")));
        }
        let f: FrequencyHz = parts[0].parse().map_err(|err| e.syntax(format!("tone frequency `{}`: {err}", parts[0])))?;
        let p: f64 = parts[1].parse().map_err(|_| e.syntax(format!("tone power `{}`", parts[1])))?;
        let ph: f64 = match parts.get(2) {
            Some(s) => s.parse().map_err(|_| e.syntax(format!("tone phase `{s}`")))?,
            None => 0.0,
        };
        if !p.is_finite() || !ph.is_finite() {
            return Err(b.violation("tones", "power and phase must be finite"));
        }
        tones.push((f, PowerDbm(p), PhaseRad::new(ph)));
    }
    if tones.is_empty() {
        return Err(b.violation("tones", "at least one tone is required"));
    }
    Ok(StimulusSpec { name: b.label().to_string(), tones })
}

fn parse_power_range(b: &Block) -> Result<(PowerDbm, PowerDbm, f64), ConfigError> {
    let start = b.f64_req("start")?;
    let stop = b.f64_req("stop")?;
    let step = b.f64_or("step", 1.0)?;
    if !(step > 0.0) {
        return Err(b.violation("step", "must be > 0"));
    }
    if start > stop {
        return Err(b.violation("start", "must not exceed stop"));
    }
    Ok((PowerDbm(start), PowerDbm(stop), step))
}

fn parse_sweep(b: &Block) -> Result<SweepSpec, ConfigError> {
    b.check_keys(|k| matches!(k, "center" | "spacing" | "start" | "stop" | "step"))?;
    let (start, stop, step) = parse_power_range(b)?;
    let spacing = b.freq_req("spacing")?;
    if spacing == FrequencyHz::ZERO {
        return Err(b.violation("spacing", "must be > 0"));
    }
    Ok(SweepSpec { center: b.freq_req("center")?, spacing, start, stop, step })
}

fn parse_leveling(b: &Block) -> Result<LevelingSpec, ConfigError> {
    b.check_keys(|k| matches!(k, "lo" | "start" | "stop" | "step" | "epsilon"))?;
    let (start, stop, step) = parse_power_range(b)?;
    let epsilon = b.f64_or("epsilon", 0.1)?;
    if !(epsilon > 0.0) {
        return Err(b.violation("epsilon", "must be > 0"));
    }
    Ok(LevelingSpec { lo: b.require("lo")?.value.clone(), start, stop, step, epsilon })
}

fn push(b: &mut Block, key: &str, value: impl ToString) {
    b.entries.push(Entry { key: key.to_string(), value: value.to_string(), line: 0, column: 0 });
}

fn block(kind: &str, name: Option<&str>) -> Block {
    Block { kind: kind.to_string(), name: name.map(str::to_string), line: 0, entries: Vec::new() }
}

fn stage_block(stage: &Stage, lo_chain: Option<&str>, routing: &BTreeMap<String, String>) -> Block {
    let mut b = block(stage.spec.kind(), Some(&stage.id));
    if let Some(lc) = lo_chain {
        push(&mut b, "chain", lc);
    }
    match &stage.spec {
        ComponentSpec::Doubler(d) => {
            push(&mut b, "p_max", d.p_max.0);
            push(&mut b, "p_threshold", d.p_threshold.0);
            push(&mut b, "unleveled_slope", d.unleveled_slope);
            push(&mut b, "fundamental_leakage", d.fundamental_leakage.0);
        }
        ComponentSpec::Mixer(m) => {
            if let Some(lo) = routing.get(&*stage.id) {
                push(&mut b, "lo", lo);
            }
            push(&mut b, "conversion_loss", m.conversion_loss.0);
            push(&mut b, "lo_to_rf_isolation", m.lo_to_rf_isolation.0);
            push(&mut b, "if_to_rf_isolation", m.if_to_rf_isolation.0);
            push(&mut b, "n_max", m.n_max);
            push(&mut b, "m_max", m.m_max);
            push(&mut b, "spur_floor", m.spur_floor.0);
            push(&mut b, "lo_drive_min", m.lo_drive_min.0);
            push(&mut b, "lo_drive_max", m.lo_drive_max.0);
            for (&(n, mm), lvl) in &m.spur_table {
                push(&mut b, &format!("spur.{n}.{mm}"), lvl.0);
            }
        }
        ComponentSpec::Filter(f) => {
            let list: Vec<String> = f.breakpoints.iter().map(|(fr, a)| format!("{}:{}", fr.hz(), a)).collect();
            push(&mut b, "breakpoints", list.join(", "));
        }
        ComponentSpec::Amplifier(a) => {
            push(&mut b, "gain", a.gain.0);
            push(&mut b, "oip3", a.oip3.0);
            push(&mut b, "im5", a.im5_enabled);
            if let Some(o) = a.oip5 {
                push(&mut b, "oip5", o.0);
            }
        }
        ComponentSpec::Attenuator(a) => push(&mut b, "loss", a.loss.0),
    }
    b
}

/// Canonical text form of a scenario; parsing it yields an equal value.
pub fn serialize_scenario(sc: &Scenario) -> String {
    let mut blocks = Vec::new();
    let chain = &sc.chain;
    if let Some(st) = &sc.stimulus {
        let mut b = block("stimulus", Some(&st.name));
        let list: Vec<String> = st.tones.iter().map(|(f, p, ph)| format!("{}:{}:{}", f.hz(), p.0, ph.value())).collect();
        push(&mut b, "tones", list.join(", "));
        blocks.push(b);
    }
    for lc in &chain.lo_chains {
        let mut b = block("lo", Some(&lc.name));
        push(&mut b, "freq", lc.source.freq.hz());
        push(&mut b, "power", lc.source.power.0);
        if !lc.source.harmonics.is_empty() {
            let list: Vec<String> = lc.source.harmonics.iter().map(|(k, l)| format!("{k}:{}", l.0)).collect();
            push(&mut b, "harmonics", list.join(", "));
        }
        blocks.push(b);
        for s in &lc.stages {
            blocks.push(stage_block(s, Some(&lc.name), &chain.lo_routing));
        }
    }
    for s in &chain.stages {
        blocks.push(stage_block(s, None, &chain.lo_routing));
    }
    for p in &chain.probes {
        let mut b = block("probe", Some(&p.name));
        let path = match &p.path {
            PathRef::Main => "main".to_string(),
            PathRef::Lo(n) => n.clone(),
        };
        push(&mut b, "at", format!("{path}:{}", p.index));
        blocks.push(b);
    }
    if let Some(sw) = &sc.sweep {
        let mut b = block("sweep", None);
        push(&mut b, "center", sw.center.hz());
        push(&mut b, "spacing", sw.spacing.hz());
        push(&mut b, "start", sw.start.0);
        push(&mut b, "stop", sw.stop.0);
        push(&mut b, "step", sw.step);
        blocks.push(b);
    }
    if let Some(lv) = &sc.leveling {
        let mut b = block("leveling", None);
        push(&mut b, "lo", &lv.lo);
        push(&mut b, "start", lv.start.0);
        push(&mut b, "stop", lv.stop.0);
        push(&mut b, "step", lv.step);
        push(&mut b, "epsilon", lv.epsilon);
        blocks.push(b);
    }
    write_blocks(&blocks)
}

pub fn serialize_chain(chain: &Chain) -> String {
    serialize_scenario(&Scenario { chain: chain.clone(), ..Scenario::default() })
}

/// Non-fatal advisories raised by [`validate_chain`].
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    UnderdrivenMixer { mixer: String, delivered: PowerDbm, min: PowerDbm },
    OverdrivenMixer { mixer: String, delivered: PowerDbm, max: PowerDbm },
    BelowLevelingKnee { doubler: String, input: PowerDbm, knee: PowerDbm },
    FilterRejectsDesired { filter: String, freq: FrequencyHz, attenuation_db: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::UnderdrivenMixer { mixer, delivered, min } => {
                write!(f, "mixer `{mixer}` LO drive {delivered} is below the recommended minimum {min}")
            }
            Warning::OverdrivenMixer { mixer, delivered, max } => {
                write!(f, "mixer `{mixer}` LO drive {delivered} is above the recommended maximum {max}")
            }
            Warning::BelowLevelingKnee { doubler, input, knee } => {
                write!(f, "doubler `{doubler}` input {input} is below its leveling knee {knee}")
            }
            Warning::FilterRejectsDesired { filter, freq, attenuation_db } => {
                write!(f, "filter `{filter}` attenuates the desired signal at {} by {attenuation_db:.1} dB", freq.display_ghz())
            }
        }
    }
}

/// Drive-level advisories for every mixer and doubler.
pub fn validate_chain(chain: &Chain) -> Vec<Warning> {
    let mut warnings = Vec::new();
    for lc in &chain.lo_chains {
        let mut level = crate::engine::lo_source_spectrum(&lc.name, &lc.source);
        for s in &lc.stages {
            if let ComponentSpec::Doubler(d) = &s.spec {
                if let Some(t) = level.strongest() {
                    if t.power.0 < d.p_threshold.0 {
                        warnings.push(Warning::BelowLevelingKnee {
                            doubler: s.id.to_string(),
                            input: t.power,
                            knee: d.p_threshold,
                        });
                    }
                }
            }
            // doubler errors surface later in propagate; stop tracking here
            match crate::engine::apply_stage(s, level.clone(), None) {
                Ok(next) => level = next,
                Err(_) => break,
            }
        }
        for s in &chain.stages {
            let ComponentSpec::Mixer(m) = &s.spec else { continue };
            if chain.lo_routing.get(&*s.id) != Some(&lc.name) {
                continue;
            }
            let delivered = level.strongest().map(|t| t.power).unwrap_or(PowerDbm(f64::NEG_INFINITY));
            if delivered.0 < m.lo_drive_min.0 {
                warnings.push(Warning::UnderdrivenMixer { mixer: s.id.to_string(), delivered, min: m.lo_drive_min });
            } else if delivered.0 > m.lo_drive_max.0 {
                warnings.push(Warning::OverdrivenMixer { mixer: s.id.to_string(), delivered, max: m.lo_drive_max });
            }
        }
    }
    warnings
}

/// [`validate_chain`] plus a passband check that follows the stimulus tones'
/// first-order products along the main path.
pub fn validate_scenario(sc: &Scenario) -> Vec<Warning> {
    let mut warnings = validate_chain(&sc.chain);
    let Some(stim) = &sc.stimulus else { return warnings };
    let chain = &sc.chain;
    let mut desired: BTreeSet<FrequencyHz> = stim.tones.iter().map(|t| t.0).collect();
    for s in &chain.stages {
        match &s.spec {
            ComponentSpec::Mixer(_) => {
                let lo_f = chain
                    .lo_routing
                    .get(&*s.id)
                    .and_then(|n| chain.lo_chain(n))
                    .and_then(|lc| crate::engine::propagate_lo_chain(lc).ok())
                    .and_then(|sp| sp.strongest().map(|t| t.freq));
                if let Some(lo) = lo_f {
                    desired =
                        desired.iter().flat_map(|f| [*f + lo, f.abs_diff(lo)]).filter(|f| *f != FrequencyHz::ZERO).collect();
                }
            }
            ComponentSpec::Doubler(_) => {
                desired = desired.iter().filter_map(|f| f.checked_mul(2)).collect();
            }
            ComponentSpec::Filter(flt) => {
                let limit = flt.min_attenuation_db() + 3.0;
                let passed: BTreeSet<FrequencyHz> = desired.iter().copied().filter(|f| flt.attenuation_db(*f) <= limit).collect();
                if passed.is_empty() {
                    if let Some(&f) = desired.iter().next() {
                        warnings.push(Warning::FilterRejectsDesired {
                            filter: s.id.to_string(),
                            freq: f,
                            attenuation_db: flt.attenuation_db(f),
                        });
                    }
                } else {
                    desired = passed;
                }
            }
            _ => {}
        }
    }
    warnings
}
