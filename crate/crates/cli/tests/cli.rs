use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).to_string_lossy().into_owned()
}

fn spurline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spurline")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = spurline(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    spurline(args).status.code().unwrap()
}

#[test]
fn every_subcommand_help_lists_all_flags() {
    for sub in ["simulate", "sweep", "ip3", "evm", "plan", "alias-check", "coupling", "leveling"] {
        let help = stdout(&[sub, "--help"]);
        for flag in ["--config", "--output", "--format", "--set", "--threads", "--svg"] {
            assert!(help.contains(flag), "{sub} --help lacks {flag}");
        }
    }
    assert!(stdout(&["evm", "--help"]).contains("--spur"));
    assert!(stdout(&["alias-check", "--help"]).contains("--fs"));
    assert!(stdout(&["coupling", "--help"]).contains("--separation"));
}

#[test]
fn golden_csv_headers() {
    let first = |args: &[&str]| stdout(args).lines().next().unwrap().to_string();
    assert_eq!(first(&["simulate", "-c", &scenario("tx_fig1.chain")]), "probe,freq_hz,power_dbm,phase_rad,origin");
    assert_eq!(
        first(&["sweep", "-c", &scenario("amp_sweep.chain")]),
        "pin_dbm,fund_dbm,im3_low_dbm,im3_high_dbm,im5_low_dbm,im5_high_dbm,lo_residual_dbm"
    );
    assert_eq!(
        first(&["ip3", "-c", &scenario("amp_sweep.chain")]),
        "slope_fund,slope_im3,oip3_dbm,iip3_dbm,gain_db,fit_residual_db"
    );
    assert_eq!(first(&["evm", "--spur", "-40"]), "label,level_dbc,evm_fraction,evm_percent");
    assert_eq!(first(&["plan", "-c", &scenario("degenerate.plan")]), "rx_if_hz,n,m_tx,m_rx,level_dbc,in_band,degenerate");
    assert_eq!(
        first(&["plan", "-c", &scenario("search.plan")]),
        "rank,f_if_hz,f_lo_tx_hz,f_lo_rx_hz,desired_rx_if_hz,degeneracy_count,worst_in_band_dbc,sampler_violations"
    );
    assert_eq!(
        first(&["alias-check", "-c", &scenario("nondegenerate.plan")]),
        "rx_if_hz,n,m_tx,m_rx,alias_hz,desired_alias_hz,distance_hz"
    );
    assert_eq!(first(&["coupling", "-c", &scenario("coupling/manifest.csv")]), "separation_mm,pol,s21_db,s11_db");
    assert_eq!(first(&["leveling", "-c", &scenario("doubler.chain")]), "pin_dbm,pout_dbm,threshold");
}

#[test]
fn documented_examples() {
    let lv = stdout(&["leveling", "-c", &scenario("doubler.chain")]);
    let marked: Vec<&str> = lv.lines().filter(|l| l.ends_with(",true")).collect();
    assert_eq!(marked, vec!["-12.000000,20.000000,true"]);
    let plan = stdout(&["plan", "-c", &scenario("degenerate.plan"), "--format", "report"]);
    assert!(plan.lines().any(|l| l == "DEGENERATE: yes (orders 2,3 collide at 5.000000000 GHz)"), "{plan}");
    let ip3 = stdout(&["ip3", "-c", &scenario("amp_sweep.chain"), "--format", "report"]);
    assert_eq!(ip3.lines().next(), Some("OIP3 = 10.50 dBm"));
}

#[test]
fn ip3_fits_a_saved_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let csv = csv.to_str().unwrap();
    stdout(&["sweep", "-c", &scenario("amp_sweep.chain"), "-o", csv]);
    let report = stdout(&["ip3", "-c", csv, "--format", "report"]);
    assert_eq!(report.lines().next(), Some("OIP3 = 10.50 dBm"));
}

#[test]
fn overrides_change_the_result() {
    let base = stdout(&["simulate", "-c", &scenario("tx_fig1.chain"), "--format", "report"]);
    let more =
        stdout(&["simulate", "-c", &scenario("tx_fig1.chain"), "--format", "report", "--set", "mix1.lo_to_rf_isolation=35"]);
    assert!(base.contains("LO breakthrough (mix1, 25.000000000 GHz): -1.25 dBc"), "{base}");
    assert!(more.contains("LO breakthrough (mix1, 25.000000000 GHz): -11.25 dBc"), "{more}");
}

#[test]
fn exit_codes() {
    let tx = scenario("tx_fig1.chain");
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["simulate"]), 1);
    assert_eq!(code(&["simulate", "-c", &tx, "--set", "mix1.bogus=1"]), 1);
    assert_eq!(code(&["simulate", "-c", &tx, "--set", "nosuchblock.loss=1"]), 1);
    assert_eq!(code(&["simulate", "-c", "/nonexistent/x.chain"]), 3);
    assert_eq!(code(&["sweep", "-c", &tx, "-o", "/nonexistent/dir/out.csv"]), 3);
    assert_eq!(code(&["evm", "--spur", "3"]), 2);
    // a one-point leveling curve cannot be analysed
    assert_eq!(code(&["leveling", "-c", &scenario("doubler.chain"), "--set", "leveling.start=0"]), 2);
    assert_eq!(code(&["coupling", "-c", &scenario("coupling/manifest.csv"), "--freq", "40GHz"]), 2);
    assert_eq!(code(&["sweep", "-c", &tx, "--threads", "0"]), 1);
    let err = spurline(&["simulate", "-c", &tx, "--set", "mix1.bogus=1"]);
    assert!(String::from_utf8_lossy(&err.stderr).contains("bogus"));
}

#[test]
fn simulate_writes_one_csv_per_probe() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spectra");
    stdout(&["simulate", "-c", &scenario("tx_fig1.chain"), "-o", out.to_str().unwrap()]);
    let mut names: Vec<String> =
        std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["final.csv", "probe_1.csv", "probe_2.csv"]);
    let p1 = std::fs::read_to_string(out.join("probe_1.csv")).unwrap();
    assert_eq!(p1, "freq_hz,power_dbm,phase_rad,origin\n12500000000,-5.000000,0.000000,lo1\n");
}

#[test]
fn svg_charts_are_written() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, cfg) in [("sweep", "amp_sweep.chain"), ("leveling", "doubler.chain"), ("coupling", "coupling/manifest.csv")] {
        let svg = dir.path().join(format!("{sub}.svg"));
        stdout(&[sub, "-c", &scenario(cfg), "--svg", svg.to_str().unwrap()]);
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<svg") && text.contains("<polyline"), "{sub}");
    }
}

#[test]
fn floor_env_var_prunes_weak_lines() {
    let tx = scenario("tx_fig1.chain");
    let default = stdout(&["simulate", "-c", &tx]).lines().count();
    let out = Command::new(env!("CARGO_BIN_EXE_spurline"))
        .args(["simulate", "-c", &tx])
        .env("SPURLINE_FLOOR_DBM", "-100")
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() < default);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap() >= -100.0));
}

#[test]
fn evm_budget_file_and_flags_combine() {
    let report =
        stdout(&["evm", "-c", &scenario("spurs.budget"), "--spur", "extra=-40", "--mode", "WORST_CASE", "--format", "report"]);
    assert!(report.starts_with("EVM budget (WORST_CASE)"));
    assert!(report.contains("extra: -40.00 dBc"));
}

#[test]
fn coupling_channel_report() {
    let report = stdout(&["coupling", "-c", &scenario("coupling/manifest.csv"), "--separation", "20", "--format", "report"]);
    assert!(report.contains("condition number:"));
    assert_eq!(code(&["coupling", "-c", &scenario("coupling/manifest.csv"), "--separation", "50"]), 2);
}
