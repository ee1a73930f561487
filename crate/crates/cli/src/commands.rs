use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use spurline_core::analysis::{detect_leveling_threshold, fit_ip3, format_breakthrough, lo_breakthrough_report, EvmBudget};
use spurline_core::chain::{parse_scenario_with_overrides, validate_scenario, Scenario};
use spurline_core::config::{apply_overrides, parse_blocks, ConfigError};
use spurline_core::engine::{
    desired_line, dominant_lo_frequencies, leveling_curve, propagate, run_two_tone_sweep_with, stimulus_spectrum, SweepResult,
    TwoToneSweep,
};
use spurline_core::planner::{
    check_sampler_collisions, enumerate_rx_spurs, parse_plan_config_with_overrides, ranking_to_csv, search_plans_with,
    violations_to_csv, PlanConfig,
};
use spurline_core::sparams::{build_channel_matrix, coupling_report, CouplingDataset, DatasetError, Polarization};
use spurline_core::{Execution, FrequencyHz, Spectrum, SummationMode};

use crate::svg::{line_chart, Series};
use crate::{Command, Common, Format};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn config(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn config_path(c: &Common) -> Result<&Path> {
    c.config.as_deref().ok_or_else(|| CliError::Config("--config is required".into()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit(c: &Common, text: &str) -> Result<()> {
    match &c.output {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_svg(c: &Common, title: &str, x: &str, y: &str, series: &[Series]) -> Result<()> {
    match &c.svg {
        Some(p) => write(p, &line_chart(title, x, y, series)),
        None => Ok(()),
    }
}

fn execution(c: &Common) -> Result<Execution> {
    match c.threads {
        None => Ok(Execution::Parallel),
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        Some(_n) => {
            #[cfg(feature = "parallel")]
            {
                // a second call fails once the pool exists; the first size wins
                let _ = rayon::ThreadPoolBuilder::new().num_threads(_n).build_global();
            }
            Ok(Execution::Parallel)
        }
    }
}

fn parse_freq(s: &str, flag: &str) -> Result<FrequencyHz> {
    s.parse().map_err(|e| CliError::Config(format!("{flag} `{s}`: {e}")))
}

fn load_scenario(c: &Common) -> Result<Scenario> {
    let text = read(config_path(c)?)?;
    let sc = parse_scenario_with_overrides(&text, &c.overrides).map_err(config)?;
    for w in validate_scenario(&sc) {
        eprintln!("warning: {w}");
    }
    Ok(sc)
}

fn load_plan(c: &Common) -> Result<PlanConfig> {
    let text = read(config_path(c)?)?;
    parse_plan_config_with_overrides(&text, &c.overrides).map_err(config)
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(c) => simulate(&c),
        Command::Sweep(c) => sweep(&c),
        Command::Ip3(c) => ip3(&c),
        Command::Evm { common, spurs, mode } => evm(&common, &spurs, mode.as_deref()),
        Command::Plan(c) => plan(&c),
        Command::AliasCheck { common, fs, guard } => alias_check(&common, fs.as_deref(), guard.as_deref()),
        Command::Coupling { common, freq, separation, pol } => coupling(&common, &freq, separation, &pol),
        Command::Leveling(c) => leveling(&c),
    }
}

const SPECTRUM_CSV_HEADER: &str = "freq_hz,power_dbm,phase_rad,origin";

fn spectrum_rows(sp: &Spectrum, prefix: &str, out: &mut String) {
    for t in sp.iter() {
        let _ = writeln!(out, "{prefix}{},{:.6},{:.6},{}", t.freq.hz(), t.power.0, t.phase.value(), t.origin);
    }
}

fn spectrum_report(title: &str, sp: &Spectrum, out: &mut String) {
    let _ = writeln!(out, "{title} ({} tones)", sp.len());
    for t in sp.iter() {
        let _ = writeln!(out, "  {}  {:>10.2} dBm  {}", t.freq.display_ghz(), t.power.0, t.origin);
    }
}

fn simulate(c: &Common) -> Result<()> {
    let sc = load_scenario(c)?;
    let stim = sc.stimulus.as_ref().ok_or_else(|| CliError::Config("scenario has no [stimulus] block".into()))?;
    let r = propagate(&sc.chain, &stimulus_spectrum(stim)).map_err(runtime)?;
    match c.format {
        Format::Csv => match &c.output {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                let mut files: Vec<(String, &Spectrum)> =
                    r.probe_spectra.iter().map(|(name, sp)| (format!("probe_{name}.csv"), sp)).collect();
                files.push(("final.csv".into(), &r.final_spectrum));
                for (name, sp) in files {
                    let mut s = format!("{SPECTRUM_CSV_HEADER}\n");
                    spectrum_rows(sp, "", &mut s);
                    write(&dir.join(name), &s)?;
                }
                Ok(())
            }
            None => {
                let mut s = format!("probe,{SPECTRUM_CSV_HEADER}\n");
                for (name, sp) in &r.probe_spectra {
                    spectrum_rows(sp, &format!("{name},"), &mut s);
                }
                spectrum_rows(&r.final_spectrum, "final,", &mut s);
                emit(c, &s)
            }
        },
        Format::Report => {
            let mut s = String::new();
            for (name, sp) in &r.probe_spectra {
                spectrum_report(&format!("Probe {name}"), sp, &mut s);
            }
            spectrum_report("Output", &r.final_spectrum, &mut s);
            let desired = (0..stim.tones.len())
                .filter_map(|i| desired_line(&r.final_spectrum, &format!("{}.{i}", stim.name)))
                .filter_map(|f| r.final_spectrum.tone_at(f))
                .reduce(|a, b| if b.power.0 > a.power.0 { b } else { a });
            if let Some(d) = desired {
                for (mixer, f_lo) in dominant_lo_frequencies(&sc.chain).map_err(runtime)? {
                    let level = lo_breakthrough_report(&r.final_spectrum, f_lo, d.freq).map_err(runtime)?;
                    let _ = writeln!(
                        s,
                        "LO breakthrough ({mixer}, {}): {} relative to {}",
                        f_lo.display_ghz(),
                        format_breakthrough(level),
                        d.freq.display_ghz()
                    );
                }
            }
            emit(c, &s)
        }
    }
}

fn scenario_sweep(c: &Common) -> Result<SweepResult> {
    let sc = load_scenario(c)?;
    let sw = sc.sweep.as_ref().ok_or_else(|| CliError::Config("scenario has no [sweep] block".into()))?;
    let spec = TwoToneSweep { center: sw.center, spacing: sw.spacing, start: sw.start, stop: sw.stop, step: sw.step };
    run_two_tone_sweep_with(&sc.chain, &spec, execution(c)?).map_err(runtime)
}

fn sweep(c: &Common) -> Result<()> {
    let r = scenario_sweep(c)?;
    let column = |get: fn(&spurline_core::engine::SweepRow) -> Option<spurline_core::PowerDbm>| -> Vec<(f64, f64)> {
        r.rows.iter().filter_map(|row| get(row).map(|p| (row.pin.0, p.0))).collect()
    };
    emit_svg(
        c,
        "Two-tone sweep",
        "input power per tone (dBm)",
        "output (dBm)",
        &[
            Series { label: "fundamental", points: column(|r| r.fund) },
            Series { label: "IM3 low", points: column(|r| r.im3_low) },
            Series { label: "IM3 high", points: column(|r| r.im3_high) },
            Series { label: "LO residual", points: column(|r| r.lo_residual) },
        ],
    )?;
    match c.format {
        Format::Csv => emit(c, &r.to_csv()),
        Format::Report => {
            let mut s = String::new();
            let _ = writeln!(s, "{:>9} {:>10} {:>10} {:>10} {:>12}", "Pin", "Fund", "IM3 low", "IM3 high", "LO residual");
            let cell = |p: Option<spurline_core::PowerDbm>| p.map(|p| format!("{:.2}", p.0)).unwrap_or_else(|| "-".into());
            for row in &r.rows {
                let _ = writeln!(
                    s,
                    "{:>9.2} {:>10} {:>10} {:>10} {:>12}",
                    row.pin.0,
                    cell(row.fund),
                    cell(row.im3_low),
                    cell(row.im3_high),
                    cell(row.lo_residual)
                );
            }
            emit(c, &s)
        }
    }
}

fn ip3(c: &Common) -> Result<()> {
    let path = config_path(c)?;
    let text = read(path)?;
    let sweep = if text.trim_start().starts_with("pin_dbm,") {
        if !c.overrides.is_empty() {
            return Err(CliError::Config("--set does not apply to a sweep CSV".into()));
        }
        SweepResult::from_csv(&text).map_err(config)?
    } else {
        scenario_sweep(c)?
    };
    let fit = fit_ip3(&sweep).map_err(runtime)?;
    emit(
        c,
        &match c.format {
            Format::Csv => fit.to_csv(),
            Format::Report => fit.to_report(),
        },
    )
}

fn parse_spur(s: &str, idx: usize) -> Result<(String, f64)> {
    let (label, level) = match s.split_once('=') {
        Some((l, v)) => (l.trim().to_string(), v.trim()),
        None => (format!("spur{}", idx + 1), s.trim()),
    };
    let v: f64 = level.parse().map_err(|_| CliError::Config(format!("--spur `{s}`: bad level")))?;
    Ok((label, v))
}

// `[budget]` with `mode = ...` and one `spur.<label> = <dBc>` per contributor.
type Budget = (Vec<(String, f64)>, Option<SummationMode>);

fn evm_file(text: &str, overrides: &[String]) -> Result<Budget> {
    let mut blocks = parse_blocks(text).map_err(config)?;
    apply_overrides(&mut blocks, overrides).map_err(config)?;
    let mut spurs = Vec::new();
    let mut mode = None;
    for b in &blocks {
        if b.kind != "budget" {
            return Err(config(ConfigError::UnknownComponentKind { line: b.line, kind: b.kind.clone() }));
        }
        b.check_keys(|k| k == "mode" || k.starts_with("spur.")).map_err(config)?;
        mode = b.parse_opt::<SummationMode>("mode").map_err(config)?.or(mode);
        for e in b.entries.iter().filter(|e| e.key.starts_with("spur.")) {
            let v: f64 = e.parse().map_err(config)?;
            spurs.push((e.key["spur.".len()..].to_string(), v));
        }
    }
    Ok((spurs, mode))
}

fn evm(c: &Common, spur_flags: &[String], mode_flag: Option<&str>) -> Result<()> {
    let (mut spurs, file_mode) = match &c.config {
        Some(p) => evm_file(&read(p)?, &c.overrides)?,
        None if !c.overrides.is_empty() => return Err(CliError::Config("--set needs --config".into())),
        None => (Vec::new(), None),
    };
    let base = spurs.len();
    for (i, s) in spur_flags.iter().enumerate() {
        spurs.push(parse_spur(s, base + i)?);
    }
    if spurs.is_empty() {
        return Err(CliError::Config("no spurs given (use --spur or a [budget] file)".into()));
    }
    let mode = match mode_flag {
        Some(m) => m.parse().map_err(CliError::Config)?,
        None => file_mode.unwrap_or_default(),
    };
    let budget = EvmBudget::new(spurs, mode).map_err(runtime)?;
    emit(
        c,
        &match c.format {
            Format::Csv => budget.to_csv(),
            Format::Report => budget.to_report(),
        },
    )
}

fn plan(c: &Common) -> Result<()> {
    let cfg = load_plan(c)?;
    let exec = execution(c)?;
    if let Some(search) = &cfg.search {
        let ranked = search_plans_with(search, exec).map_err(runtime)?;
        return match c.format {
            Format::Csv => emit(c, &ranking_to_csv(&ranked)),
            Format::Report => {
                let mut s = String::new();
                let _ = writeln!(s, "{} candidate plans", ranked.len());
                for (i, r) in ranked.iter().take(10).enumerate() {
                    let worst = if r.score.worst_in_band_dbc.is_finite() {
                        format!("{:.2} dBc", r.score.worst_in_band_dbc)
                    } else {
                        "none".into()
                    };
                    let _ = writeln!(
                        s,
                        "{:>3}. IF {} LO tx {} LO rx {}: {} collisions, worst in-band {worst}, {} sampler violations",
                        i + 1,
                        r.plan.f_if.display_ghz(),
                        r.plan.f_lo_tx.display_ghz(),
                        r.plan.f_lo_rx.display_ghz(),
                        r.score.degeneracy_count,
                        r.score.sampler_violations
                    );
                }
                emit(c, &s)
            }
        };
    }
    let p = cfg.plan.as_ref().ok_or_else(|| CliError::Config("plan file has no [plan] block".into()))?;
    let report = enumerate_rx_spurs(p, cfg.n_max, cfg.m_max, &cfg.tx, &cfg.rx);
    emit(
        c,
        &match c.format {
            Format::Csv => report.to_csv(),
            Format::Report => report.to_report(),
        },
    )
}

fn alias_check(c: &Common, fs_flag: Option<&str>, guard_flag: Option<&str>) -> Result<()> {
    let cfg = load_plan(c)?;
    let p = cfg.plan.as_ref().ok_or_else(|| CliError::Config("plan file has no [plan] block".into()))?;
    let fs = match fs_flag {
        Some(s) => parse_freq(s, "--fs")?,
        None => p.sampler_fs.ok_or_else(|| CliError::Config("no sampler rate: set sampler_fs or pass --fs".into()))?,
    };
    if fs == FrequencyHz::ZERO {
        return Err(CliError::Config("sample rate must be positive".into()));
    }
    let guard = match guard_flag {
        Some(s) => parse_freq(s, "--guard")?,
        None => p.guard,
    };
    let report = enumerate_rx_spurs(p, cfg.n_max, cfg.m_max, &cfg.tx, &cfg.rx);
    let v = check_sampler_collisions(&report, fs, guard);
    match c.format {
        Format::Csv => emit(c, &violations_to_csv(&v)),
        Format::Report => {
            let mut s = String::new();
            let _ = writeln!(s, "Sampler {} with guard {}", fs.display_ghz(), guard.display_ghz());
            let desired = spurline_core::planner::alias_frequency(report.desired_rx_if, fs);
            let _ = writeln!(s, "Desired {} aliases to {}", report.desired_rx_if.display_ghz(), desired.display_ghz());
            let _ = writeln!(s, "Violations: {}", v.len());
            for x in &v {
                let _ = writeln!(
                    s,
                    "  {} (n={}, m_tx={}, m_rx={}) aliases to {}, {} Hz from desired",
                    x.entry.rx_if.display_ghz(),
                    x.entry.n,
                    x.entry.m_tx,
                    x.entry.m_rx,
                    x.alias.display_ghz(),
                    x.distance.hz()
                );
            }
            emit(c, &s)
        }
    }
}

fn dataset_error(e: DatasetError) -> CliError {
    match e {
        DatasetError::Io { .. } => CliError::Io(e.to_string()),
        other => config(other),
    }
}

fn coupling(c: &Common, freq: &str, separation: Option<f64>, pol: &str) -> Result<()> {
    if !c.overrides.is_empty() {
        return Err(CliError::Config("--set does not apply to a coupling manifest".into()));
    }
    let f = parse_freq(freq, "--freq")?;
    let pol: Polarization = pol.parse().map_err(CliError::Config)?;
    let ds = CouplingDataset::load(config_path(c)?).map_err(dataset_error)?;
    let table = coupling_report(&ds, f).map_err(runtime)?;
    let curve = |p: Polarization| -> Vec<(f64, f64)> {
        ds.by_polarization(p)
            .iter()
            .filter_map(|r| r.sparams.s21_at(f).map(|z| (r.separation_mm, 20.0 * z.norm().log10())))
            .collect()
    };
    emit_svg(
        c,
        &format!("Coupling at {}", f.display_ghz()),
        "separation (mm)",
        "|S21| (dB)",
        &[Series { label: "CO", points: curve(Polarization::Co) }, Series { label: "CROSS", points: curve(Polarization::Cross) }],
    )?;
    let channel = match separation {
        Some(d) => {
            let s21 = ds.coupling_at(f, d, pol).map_err(runtime)?;
            let s11 = ds.reflection_at(f, d, pol).map_err(runtime)?;
            let h = build_channel_matrix(num_complex::Complex64::new(1.0, 0.0), s21, [s11, s11], [s11, s11]).map_err(runtime)?;
            Some((d, s21, h))
        }
        None => None,
    };
    match c.format {
        Format::Csv => emit(c, &table),
        Format::Report => {
            let mut s = String::new();
            let _ = writeln!(s, "Coupling at {}", f.display_ghz());
            for pol in [Polarization::Co, Polarization::Cross] {
                let recs = ds.by_polarization(pol);
                let db: Vec<f64> = recs.iter().filter_map(|r| r.sparams.s21_at(f)).map(|z| 20.0 * z.norm().log10()).collect();
                if let (Some(first), Some(last)) = (db.first(), db.last()) {
                    let _ = writeln!(
                        s,
                        "  {}: {} records, {:.2} dB at {} mm to {:.2} dB at {} mm",
                        pol.as_str(),
                        recs.len(),
                        first,
                        recs[0].separation_mm,
                        last,
                        recs[recs.len() - 1].separation_mm
                    );
                }
            }
            if let Some((d, s21, h)) = channel {
                let _ = writeln!(s, "Channel at {d} mm ({}), coupling {:.2} dB", pol.as_str(), 20.0 * s21.norm().log10());
                s.push_str(&h.to_report());
            }
            emit(c, &s)
        }
    }
}

pub const LEVELING_CSV_HEADER: &str = "pin_dbm,pout_dbm,threshold";

fn leveling(c: &Common) -> Result<()> {
    let sc = load_scenario(c)?;
    let lv = sc.leveling.as_ref().ok_or_else(|| CliError::Config("scenario has no [leveling] block".into()))?;
    let curve = leveling_curve(&sc.chain, &lv.lo, lv.start, lv.stop, lv.step, execution(c)?).map_err(runtime)?;
    let threshold = detect_leveling_threshold(&curve, lv.epsilon).map_err(runtime)?;
    emit_svg(
        c,
        "Doubler leveling",
        "LO drive (dBm)",
        "doubled output (dBm)",
        &[Series { label: "output", points: curve.iter().map(|(p, o)| (p.0, o.0)).collect() }],
    )?;
    match c.format {
        Format::Csv => {
            let mut s = format!("{LEVELING_CSV_HEADER}\n");
            for (p, o) in &curve {
                let _ = writeln!(s, "{:.6},{:.6},{}", p.0, o.0, *p == threshold);
            }
            emit(c, &s)
        }
        Format::Report => {
            let above: Vec<f64> = curve.iter().filter(|(p, _)| p.0 >= threshold.0).map(|(_, o)| o.0).collect();
            let spread =
                above.iter().copied().fold(f64::NEG_INFINITY, f64::max) - above.iter().copied().fold(f64::INFINITY, f64::min);
            let mut s = String::new();
            let _ = writeln!(s, "Leveling threshold = {:.2} dBm", threshold.0);
            let _ = writeln!(s, "Output above threshold: flat within {spread:.3} dB over {} points", above.len());
            emit(c, &s)
        }
    }
}
