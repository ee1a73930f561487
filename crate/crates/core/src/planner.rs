//! Frequency planning for an up/down-conversion link.
//!
//! The planner composes transmit-side mixing products with receive-side
//! down-conversion and asks which harmonic paths land on the wanted receive
//! IF. With one LO shared by both ends, every `(1, m, m)` path lands exactly
//! on the wanted IF and cannot be separated; splitting the LOs moves those
//! paths off by multiples of the LO offset.
//!
//! Levels here are spur-table arithmetic only, a fast screen ahead of a full
//! engine run.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::chain::{parse_spur_key, MixerSpec};
use crate::config::{apply_overrides, parse_blocks, Block, ConfigError};
use crate::exec::Execution;
use crate::units::{FrequencyHz, GainDb};

/// Default sampler guard band.
pub const DEFAULT_GUARD: FrequencyHz = FrequencyHz::from_mhz(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sideband {
    Usb,
    Lsb,
}

impl Sideband {
    pub fn as_str(self) -> &'static str {
        match self {
            Sideband::Usb => "USB",
            Sideband::Lsb => "LSB",
        }
    }
}

impl std::str::FromStr for Sideband {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "USB" => Ok(Sideband::Usb),
            "LSB" => Ok(Sideband::Lsb),
            other => Err(format!("expected USB or LSB, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreqPlan {
    pub f_if: FrequencyHz,
    pub f_lo_tx: FrequencyHz,
    pub f_lo_rx: FrequencyHz,
    pub sideband: Sideband,
    pub rx_if_band: (FrequencyHz, FrequencyHz),
    pub sampler_fs: Option<FrequencyHz>,
    pub guard: FrequencyHz,
}

impl FreqPlan {
    /// Transmitted RF for the selected sideband.
    pub fn desired_rf(&self) -> FrequencyHz {
        match self.sideband {
            Sideband::Usb => self.f_if + self.f_lo_tx,
            Sideband::Lsb => self.f_lo_tx.abs_diff(self.f_if),
        }
    }

    /// Received IF of the desired path: `|f_rf − f_lo_rx|`.
    pub fn desired_rx_if(&self) -> FrequencyHz {
        self.desired_rf().abs_diff(self.f_lo_rx)
    }

    pub fn in_rx_band(&self, f: FrequencyHz) -> bool {
        self.rx_if_band.0 <= f && f <= self.rx_if_band.1
    }
}

/// One composed path. `m_tx`/`m_rx` are signed: positive for sum products,
/// negative for difference products.
#[derive(Debug, Clone, PartialEq)]
pub struct SpurEntry {
    pub rx_if: FrequencyHz,
    pub rf: FrequencyHz,
    pub n: u32,
    pub m_tx: i32,
    pub m_rx: i32,
    pub level_dbc: f64,
    pub in_band: bool,
    pub degenerate_with_desired: bool,
    pub desired: bool,
}

impl SpurEntry {
    /// First-order in every order, i.e. one of the (1,1,1) sideband paths.
    pub fn is_primary(&self) -> bool {
        self.n == 1 && self.m_tx.abs() == 1 && self.m_rx.abs() == 1
    }

    fn order_label(&self) -> String {
        if self.n == 1 && self.m_tx.abs() == self.m_rx.abs() {
            self.m_tx.abs().to_string()
        } else {
            format!("{}:{}:{}", self.n, self.m_tx.abs(), self.m_rx.abs())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpurReport {
    pub plan: FreqPlan,
    pub entries: Vec<SpurEntry>,
    pub desired_rx_if: FrequencyHz,
    pub degenerate: bool,
}

pub const SPUR_CSV_HEADER: &str = "rx_if_hz,n,m_tx,m_rx,level_dbc,in_band,degenerate";

impl SpurReport {
    pub fn desired_entry(&self) -> Option<&SpurEntry> {
        self.entries.iter().find(|e| e.desired)
    }

    pub fn degenerate_entries(&self) -> impl Iterator<Item = &SpurEntry> {
        self.entries.iter().filter(|e| e.degenerate_with_desired)
    }

    /// Distinct orders of the colliding paths, e.g. `["2", "3"]` for the
    /// shared-LO plan. Paths that are not `(1, m, m)` render as `n:m_tx:m_rx`.
    pub fn colliding_orders(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut entries: Vec<&SpurEntry> = self.degenerate_entries().collect();
        entries.sort_by_key(|e| (e.n, e.m_tx.abs(), e.m_rx.abs()));
        for e in entries {
            let label = e.order_label();
            if seen.insert(label.clone()) {
                out.push(label);
            }
        }
        out
    }

    /// Rx IF of the `(1, m, m)` path on the desired sideband for each `m`.
    pub fn harmonic_paths(&self) -> Vec<(u32, FrequencyHz)> {
        let Some(d) = self.desired_entry() else { return Vec::new() };
        let mut out: Vec<(u32, FrequencyHz)> = self
            .entries
            .iter()
            .filter(|e| {
                e.n == 1
                    && e.m_tx.signum() == d.m_tx.signum()
                    && e.m_rx.signum() == d.m_rx.signum()
                    && e.m_tx == e.m_rx * d.m_tx.signum() * d.m_rx.signum()
            })
            .map(|e| (e.m_tx.unsigned_abs(), e.rx_if))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Worst (highest) in-band level among non-primary entries.
    pub fn worst_in_band_spur(&self) -> Option<&SpurEntry> {
        self.entries.iter().filter(|e| e.in_band && !e.is_primary()).reduce(|a, b| if b.level_dbc > a.level_dbc { b } else { a })
    }

    /// Non-primary entries within `tol` of the desired IF but not on it.
    pub fn near_degenerate(&self, tol: FrequencyHz) -> Vec<&SpurEntry> {
        self.entries
            .iter()
            .filter(|e| !e.is_primary() && e.rx_if != self.desired_rx_if && e.rx_if.abs_diff(self.desired_rx_if) <= tol)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{SPUR_CSV_HEADER}\n");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.3},{},{}",
                e.rx_if.hz(),
                e.n,
                e.m_tx,
                e.m_rx,
                e.level_dbc,
                e.in_band,
                e.degenerate_with_desired
            );
        }
        s
    }

    pub fn to_report(&self) -> String {
        let p = &self.plan;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Plan: IF {}, LO tx {}, LO rx {}, {}",
            p.f_if.display_ghz(),
            p.f_lo_tx.display_ghz(),
            p.f_lo_rx.display_ghz(),
            p.sideband.as_str()
        );
        let _ = writeln!(s, "Desired RF: {}", p.desired_rf().display_ghz());
        let _ = writeln!(s, "Desired rx IF: {}", self.desired_rx_if.display_ghz());
        if self.degenerate {
            let _ = writeln!(
                s,
                "DEGENERATE: yes (orders {} collide at {})",
                self.colliding_orders().join(","),
                self.desired_rx_if.display_ghz()
            );
        } else {
            let _ = writeln!(s, "DEGENERATE: no");
        }
        for (m, f) in self.harmonic_paths() {
            let offset = i128::from(f.hz()) - i128::from(self.desired_rx_if.hz());
            let _ = writeln!(s, "Harmonic path m={m}: {} (offset {offset} Hz)", f.display_ghz());
        }
        let in_band = self.entries.iter().filter(|e| e.in_band).count();
        let _ = writeln!(s, "Entries: {} ({} in band)", self.entries.len(), in_band);
        match self.worst_in_band_spur() {
            Some(e) => {
                let _ = writeln!(
                    s,
                    "Worst in-band spur: {:.2} dBc at {} (n={}, m_tx={}, m_rx={})",
                    e.level_dbc,
                    e.rx_if.display_ghz(),
                    e.n,
                    e.m_tx,
                    e.m_rx
                );
            }
            None => {
                let _ = writeln!(s, "Worst in-band spur: none");
            }
        }
        s
    }
}

/// Composes every transmit product `|n·f_if ± m_tx·f_lo_tx|` with every
/// receive product `|f_rf ± m_rx·f_lo_rx|`.
///
/// An entry's level is the sum of the two mixers' rejections. Degeneracy is
/// exact integer equality with the desired receive IF; the `(1,1,1)` paths
/// themselves are never counted as collisions.
pub fn enumerate_rx_spurs(plan: &FreqPlan, n_max: u32, m_max: u32, tx: &MixerSpec, rx: &MixerSpec) -> SpurReport {
    let desired_rx_if = plan.desired_rx_if();
    let desired_m_tx = match plan.sideband {
        Sideband::Usb => 1,
        Sideband::Lsb => -1,
    };
    let f_if = i128::from(plan.f_if.hz());
    let lo_tx = i128::from(plan.f_lo_tx.hz());
    let lo_rx = i128::from(plan.f_lo_rx.hz());
    let mut entries = Vec::new();
    for n in 1..=n_max {
        for m_tx in 1..=m_max {
            let tx_level = tx.rejection(n, m_tx).0;
            let base = i128::from(n) * f_if;
            let mt = i128::from(m_tx) * lo_tx;
            for (sign_tx, rf) in [(1i32, base + mt), (-1i32, base - mt)] {
                if rf == 0 {
                    continue;
                }
                let rf = rf.abs();
                for m_rx in 1..=m_max {
                    let level = tx_level + rx.rejection(1, m_rx).0;
                    let mr = i128::from(m_rx) * lo_rx;
                    for (sign_rx, f) in [(1i32, rf + mr), (-1i32, rf - mr)] {
                        if f == 0 {
                            continue;
                        }
                        let rx_if = FrequencyHz::from_signed(f);
                        let desired = n == 1 && m_tx == 1 && m_rx == 1 && sign_tx == desired_m_tx && sign_rx == -1;
                        entries.push(SpurEntry {
                            rx_if,
                            rf: FrequencyHz::from_signed(rf),
                            n,
                            m_tx: sign_tx * m_tx as i32,
                            m_rx: sign_rx * m_rx as i32,
                            level_dbc: level,
                            in_band: plan.in_rx_band(rx_if),
                            degenerate_with_desired: false,
                            desired,
                        });
                    }
                }
            }
        }
    }
    for e in &mut entries {
        e.degenerate_with_desired = !e.is_primary() && e.rx_if == desired_rx_if;
    }
    entries.sort_by_key(|e| (e.rx_if, e.n, e.m_tx, e.m_rx));
    let degenerate = entries.iter().any(|e| e.degenerate_with_desired);
    SpurReport { plan: plan.clone(), entries, desired_rx_if, degenerate }
}

/// First-Nyquist-zone image of `f` for sample rate `fs`.
pub fn alias_frequency(f: FrequencyHz, fs: FrequencyHz) -> FrequencyHz {
    assert!(fs.hz() > 0, "sample rate must be positive");
    let r = f.hz() % fs.hz();
    FrequencyHz::from_hz(r.min(fs.hz() - r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub entry: SpurEntry,
    pub alias: FrequencyHz,
    pub desired_alias: FrequencyHz,
    pub distance: FrequencyHz,
}

/// In-band spur entries whose sampler image falls within `guard` of the
/// desired signal's image (inclusive; a spur is clear only when strictly
/// farther than `guard`).
pub fn check_sampler_collisions(report: &SpurReport, fs: FrequencyHz, guard: FrequencyHz) -> Vec<Violation> {
    let desired_alias = alias_frequency(report.desired_rx_if, fs);
    report
        .entries
        .iter()
        .filter(|e| e.in_band && !e.desired)
        .filter_map(|e| {
            let alias = alias_frequency(e.rx_if, fs);
            let distance = alias.abs_diff(desired_alias);
            (distance <= guard).then(|| Violation { entry: e.clone(), alias, desired_alias, distance })
        })
        .collect()
}

pub const VIOLATION_CSV_HEADER: &str = "rx_if_hz,n,m_tx,m_rx,alias_hz,desired_alias_hz,distance_hz";

pub fn violations_to_csv(v: &[Violation]) -> String {
    let mut s = format!("{VIOLATION_CSV_HEADER}\n");
    for x in v {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            x.entry.rx_if.hz(),
            x.entry.n,
            x.entry.m_tx,
            x.entry.m_rx,
            x.alias.hz(),
            x.desired_alias.hz(),
            x.distance.hz()
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("search grid is empty")]
    EmptyGrid,
}

/// Exhaustive search space for [`search_plans`]. Both LOs are drawn from
/// `lo_values`; plans whose desired RF or receive IF fall outside the target
/// bands are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanConstraints {
    pub if_values: Vec<FrequencyHz>,
    pub lo_values: Vec<FrequencyHz>,
    pub rf_band: (FrequencyHz, FrequencyHz),
    pub sideband: Sideband,
    pub rx_if_band: (FrequencyHz, FrequencyHz),
    pub sampler_fs: Option<FrequencyHz>,
    pub guard: FrequencyHz,
    pub n_max: u32,
    pub m_max: u32,
    pub tx: MixerSpec,
    pub rx: MixerSpec,
}

/// Ranking key: fewer exact collisions first, then a lower worst in-band
/// spur, then fewer sampler violations.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanScore {
    pub degeneracy_count: usize,
    pub worst_in_band_dbc: f64,
    pub sampler_violations: usize,
}

impl PlanScore {
    fn cmp_key(&self, other: &PlanScore) -> std::cmp::Ordering {
        self.degeneracy_count
            .cmp(&other.degeneracy_count)
            .then(self.worst_in_band_dbc.total_cmp(&other.worst_in_band_dbc))
            .then(self.sampler_violations.cmp(&other.sampler_violations))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPlan {
    pub plan: FreqPlan,
    pub score: PlanScore,
}

pub fn score_plan(report: &SpurReport) -> PlanScore {
    let sampler_violations = match report.plan.sampler_fs {
        Some(fs) => check_sampler_collisions(report, fs, report.plan.guard).len(),
        None => 0,
    };
    PlanScore {
        degeneracy_count: report.degenerate_entries().count(),
        worst_in_band_dbc: report.worst_in_band_spur().map(|e| e.level_dbc).unwrap_or(f64::NEG_INFINITY),
        sampler_violations,
    }
}

pub fn search_plans(c: &PlanConstraints) -> Result<Vec<RankedPlan>, PlanError> {
    search_plans_with(c, Execution::default())
}

/// [`search_plans`] with an explicit execution mode. Ties break on lower
/// transmit LO, then receive LO, then IF, so the ranking does not depend on
/// grid order or thread count.
pub fn search_plans_with(c: &PlanConstraints, exec: Execution) -> Result<Vec<RankedPlan>, PlanError> {
    let ifs: BTreeSet<FrequencyHz> = c.if_values.iter().copied().collect();
    let los: BTreeSet<FrequencyHz> = c.lo_values.iter().copied().collect();
    if ifs.is_empty() || los.is_empty() {
        return Err(PlanError::EmptyGrid);
    }
    let mut candidates = Vec::new();
    for &f_if in &ifs {
        for &f_lo_tx in &los {
            for &f_lo_rx in &los {
                let plan = FreqPlan {
                    f_if,
                    f_lo_tx,
                    f_lo_rx,
                    sideband: c.sideband,
                    rx_if_band: c.rx_if_band,
                    sampler_fs: c.sampler_fs,
                    guard: c.guard,
                };
                let rf = plan.desired_rf();
                if rf < c.rf_band.0 || rf > c.rf_band.1 || !plan.in_rx_band(plan.desired_rx_if()) {
                    continue;
                }
                candidates.push(plan);
            }
        }
    }
    let mut ranked = exec.map(&candidates, |plan| {
        let report = enumerate_rx_spurs(plan, c.n_max, c.m_max, &c.tx, &c.rx);
        RankedPlan { plan: plan.clone(), score: score_plan(&report) }
    });
    ranked.sort_by(|a, b| {
        a.score
            .cmp_key(&b.score)
            .then(a.plan.f_lo_tx.cmp(&b.plan.f_lo_tx))
            .then(a.plan.f_lo_rx.cmp(&b.plan.f_lo_rx))
            .then(a.plan.f_if.cmp(&b.plan.f_if))
    });
    Ok(ranked)
}

pub const RANKING_CSV_HEADER: &str =
    "rank,f_if_hz,f_lo_tx_hz,f_lo_rx_hz,desired_rx_if_hz,degeneracy_count,worst_in_band_dbc,sampler_violations";

pub fn ranking_to_csv(ranked: &[RankedPlan]) -> String {
    let mut s = format!("{RANKING_CSV_HEADER}\n");
    for (i, r) in ranked.iter().enumerate() {
        let worst =
            if r.score.worst_in_band_dbc.is_finite() { format!("{:.3}", r.score.worst_in_band_dbc) } else { String::new() };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            i + 1,
            r.plan.f_if.hz(),
            r.plan.f_lo_tx.hz(),
            r.plan.f_lo_rx.hz(),
            r.plan.desired_rx_if().hz(),
            r.score.degeneracy_count,
            worst,
            r.score.sampler_violations
        );
    }
    s
}

/// Contents of a `.plan` file: an optional fixed plan, an optional search
/// grid, and the spur tables of the two mixers.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub plan: Option<FreqPlan>,
    pub n_max: u32,
    pub m_max: u32,
    pub tx: MixerSpec,
    pub rx: MixerSpec,
    pub search: Option<PlanConstraints>,
}

fn band(b: &Block, low: &str, high: &str) -> Result<(FrequencyHz, FrequencyHz), ConfigError> {
    let lo = b.freq_req(low)?;
    let hi = b.freq_req(high)?;
    if lo >= hi {
        return Err(b.violation(low, format!("must be below {high}")));
    }
    Ok((lo, hi))
}

fn freq_list(b: &Block, list_key: &str, prefix: &str) -> Result<Vec<FrequencyHz>, ConfigError> {
    if let Some(e) = b.get(list_key) {
        return e.items().map(|s| s.parse::<FrequencyHz>().map_err(|err| e.syntax(format!("`{s}`: {err}")))).collect();
    }
    let start = b.freq_req(&format!("{prefix}_start"))?;
    let stop = b.freq_req(&format!("{prefix}_stop"))?;
    let step = b.freq_req(&format!("{prefix}_step"))?;
    if step == FrequencyHz::ZERO {
        return Err(b.violation(&format!("{prefix}_step"), "must be > 0"));
    }
    let mut out = Vec::new();
    let mut f = start.hz();
    while f <= stop.hz() {
        out.push(FrequencyHz::from_hz(f));
        f += step.hz();
    }
    Ok(out)
}

fn orders(b: &Block, n_default: u32, m_default: u32) -> Result<(u32, u32), ConfigError> {
    let n: u32 = b.parse_opt("n_max")?.unwrap_or(n_default);
    let m: u32 = b.parse_opt("m_max")?.unwrap_or(m_default);
    if n == 0 || m == 0 {
        return Err(b.violation("n_max", "orders must be at least 1"));
    }
    Ok((n, m))
}

fn guard(b: &Block) -> Result<FrequencyHz, ConfigError> {
    Ok(b.parse_opt("guard")?.unwrap_or(DEFAULT_GUARD))
}

fn sampler(b: &Block) -> Result<Option<FrequencyHz>, ConfigError> {
    let fs: Option<FrequencyHz> = b.parse_opt("sampler_fs")?;
    if fs == Some(FrequencyHz::ZERO) {
        return Err(b.violation("sampler_fs", "must be > 0"));
    }
    Ok(fs)
}

fn mixer_levels(b: &Block) -> Result<MixerSpec, ConfigError> {
    b.check_keys(|k| k == "spur_floor" || k.starts_with("spur."))?;
    let mut spec = MixerSpec::default();
    spec.spur_floor = GainDb(b.f64_or("spur_floor", spec.spur_floor.0)?);
    for e in b.entries.iter().filter(|e| e.key.starts_with("spur.")) {
        let (n, m) = parse_spur_key(e)?;
        spec.spur_table.insert((n, m), GainDb(e.parse()?));
    }
    spec.check(b.label())?;
    Ok(spec)
}

pub fn parse_plan_config(text: &str) -> Result<PlanConfig, ConfigError> {
    parse_plan_config_with_overrides(text, &[])
}

pub fn parse_plan_config_with_overrides(text: &str, overrides: &[String]) -> Result<PlanConfig, ConfigError> {
    let mut blocks = parse_blocks(text)?;
    apply_overrides(&mut blocks, overrides)?;
    let mut tx = MixerSpec::default();
    let mut rx = MixerSpec::default();
    let mut plan_block = None;
    let mut search_block = None;
    for b in &blocks {
        match (b.kind.as_str(), b.name.as_deref()) {
            ("plan", _) if plan_block.is_none() => plan_block = Some(b),
            ("search", _) if search_block.is_none() => search_block = Some(b),
            ("plan", _) | ("search", _) => return Err(ConfigError::DuplicateName(b.kind.clone())),
            ("mixer", Some("tx")) => tx = mixer_levels(b)?,
            ("mixer", Some("rx")) => rx = mixer_levels(b)?,
            ("mixer", _) => {
                return Err(ConfigError::Syntax {
                    line: b.line,
                    column: 1,
                    message: "plan files take `[mixer tx]` and `[mixer rx]` only".into(),
                })
            }
            (other, _) => return Err(ConfigError::UnknownComponentKind { line: b.line, kind: other.to_string() }),
        }
    }
    let mut n_max = 3;
    let mut m_max = 3;
    let plan = match plan_block {
        Some(b) => {
            b.check_keys(|k| {
                matches!(
                    k,
                    "f_if"
                        | "f_lo_tx"
                        | "f_lo_rx"
                        | "sideband"
                        | "rx_if_low"
                        | "rx_if_high"
                        | "sampler_fs"
                        | "guard"
                        | "n_max"
                        | "m_max"
                )
            })?;
            (n_max, m_max) = orders(b, 3, 3)?;
            Some(FreqPlan {
                f_if: b.freq_req("f_if")?,
                f_lo_tx: b.freq_req("f_lo_tx")?,
                f_lo_rx: b.freq_req("f_lo_rx")?,
                sideband: b.parse_opt("sideband")?.unwrap_or(Sideband::Usb),
                rx_if_band: band(b, "rx_if_low", "rx_if_high")?,
                sampler_fs: sampler(b)?,
                guard: guard(b)?,
            })
        }
        None => None,
    };
    let search = match search_block {
        Some(b) => {
            b.check_keys(|k| {
                matches!(
                    k,
                    "if_values"
                        | "if_start"
                        | "if_stop"
                        | "if_step"
                        | "lo_values"
                        | "lo_start"
                        | "lo_stop"
                        | "lo_step"
                        | "rf_low"
                        | "rf_high"
                        | "sideband"
                        | "rx_if_low"
                        | "rx_if_high"
                        | "sampler_fs"
                        | "guard"
                        | "n_max"
                        | "m_max"
                )
            })?;
            let (n, m) = orders(b, n_max, m_max)?;
            Some(PlanConstraints {
                if_values: freq_list(b, "if_values", "if")?,
                lo_values: freq_list(b, "lo_values", "lo")?,
                rf_band: band(b, "rf_low", "rf_high")?,
                sideband: b.parse_opt("sideband")?.unwrap_or(Sideband::Usb),
                rx_if_band: band(b, "rx_if_low", "rx_if_high")?,
                sampler_fs: sampler(b)?,
                guard: guard(b)?,
                n_max: n,
                m_max: m,
                tx: tx.clone(),
                rx: rx.clone(),
            })
        }
        None => None,
    };
    if plan.is_none() && search.is_none() {
        return Err(ConfigError::MissingKey { block: "plan".into(), key: "[plan] or [search] block".into() });
    }
    Ok(PlanConfig { plan, n_max, m_max, tx, rx, search })
}
