//! Figures of merit extracted from engine output: IP3 fits, leveling
//! threshold, spur-to-EVM budgets and LO breakthrough.

use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::SweepResult;
use crate::tone::{Spectrum, SummationMode};
use crate::units::{FrequencyHz, GainDb, PowerDbm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} usable points, found {found}")]
    InsufficientPoints { needed: usize, found: usize },
    #[error("fundamental and IM3 lines are parallel; no intercept")]
    DegenerateFit,
    #[error("spur level {0} dBc is not below the carrier")]
    NonNegativeSpur(f64),
    #[error("no tone at the desired frequency {}", .0.display_ghz())]
    DesiredToneMissing(FrequencyHz),
}

/// Straight-line fits through the fundamental and IM3 columns of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Ip3Fit {
    pub slope_fund: f64,
    pub slope_im3: f64,
    pub oip3: PowerDbm,
    pub iip3: PowerDbm,
    /// RMS residual over both fits, in dB.
    pub fit_residual: f64,
}

pub const IP3_CSV_HEADER: &str = "slope_fund,slope_im3,oip3_dbm,iip3_dbm,gain_db,fit_residual_db";

impl Ip3Fit {
    pub fn gain(&self) -> GainDb {
        self.oip3 - self.iip3
    }

    /// Residual above 0.1 dB suggests the data is not a clean third-order law.
    pub fn is_clean(&self) -> bool {
        self.fit_residual <= 0.1
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{IP3_CSV_HEADER}\n{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            self.slope_fund,
            self.slope_im3,
            self.oip3.0,
            self.iip3.0,
            self.gain().0,
            self.fit_residual
        )
    }

    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "OIP3 = {:.2} dBm", self.oip3.0);
        let _ = writeln!(s, "IIP3 = {:.2} dBm", self.iip3.0);
        let _ = writeln!(s, "Gain = {:.2} dB", self.gain().0);
        let _ = writeln!(s, "Fundamental slope = {:.3} dB/dB", self.slope_fund);
        let _ = writeln!(s, "IM3 slope = {:.3} dB/dB", self.slope_im3);
        let _ = writeln!(
            s,
            "Fit residual = {:.4} dB RMS{}",
            self.fit_residual,
            if self.is_clean() { "" } else { " (non-ideal data)" }
        );
        s
    }
}

/// Ordinary least squares `y = a + b·x`; returns `(a, b, residuals)`.
fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let res = xs.iter().zip(ys).map(|(x, y)| y - (a + b * x)).collect();
    (a, b, res)
}

/// Fits the fundamental and IM3 lines and intersects them.
///
/// Rows need both a fundamental and at least one IM3 line; when both IM3
/// sides are present their dB mean is used. Two distinct input levels are the
/// minimum for a line.
pub fn fit_ip3(sweep: &SweepResult) -> Result<Ip3Fit, AnalysisError> {
    let mut xs = Vec::new();
    let mut fund = Vec::new();
    let mut im3 = Vec::new();
    for r in &sweep.rows {
        let im = match (r.im3_low, r.im3_high) {
            (Some(a), Some(b)) => Some((a.0 + b.0) / 2.0),
            (Some(a), None) | (None, Some(a)) => Some(a.0),
            (None, None) => None,
        };
        if let (Some(f), Some(i)) = (r.fund, im) {
            xs.push(r.pin.0);
            fund.push(f.0);
            im3.push(i);
        }
    }
    let distinct = {
        let mut v = xs.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    if distinct < 2 {
        return Err(AnalysisError::InsufficientPoints { needed: 2, found: distinct });
    }
    let (a1, b1, r1) = line_fit(&xs, &fund);
    let (a3, b3, r3) = line_fit(&xs, &im3);
    if (b3 - b1).abs() < 1e-9 {
        return Err(AnalysisError::DegenerateFit);
    }
    let iip3 = (a1 - a3) / (b3 - b1);
    let oip3 = a1 + b1 * iip3;
    let sq: f64 = r1.iter().chain(&r3).map(|r| r * r).sum();
    let fit_residual = (sq / (r1.len() + r3.len()) as f64).sqrt();
    Ok(Ip3Fit { slope_fund: b1, slope_im3: b3, oip3: PowerDbm(oip3), iip3: PowerDbm(iip3), fit_residual })
}

/// EVM fraction from spur levels relative to the desired signal.
///
/// A single spur at `L` dBc contributes `10^(L/20)`; several combine as an
/// RSS ([`SummationMode::PowerSum`]) or a straight voltage sum
/// ([`SummationMode::WorstCase`]).
pub fn evm_from_spurs(spurs_dbc: &[f64], mode: SummationMode) -> Result<f64, AnalysisError> {
    if let Some(&bad) = spurs_dbc.iter().find(|&&l| !(l < 0.0)) {
        return Err(AnalysisError::NonNegativeSpur(bad));
    }
    Ok(match mode {
        SummationMode::PowerSum => spurs_dbc.iter().map(|l| 10f64.powf(l / 10.0)).sum::<f64>().sqrt(),
        SummationMode::WorstCase => spurs_dbc.iter().map(|l| 10f64.powf(l / 20.0)).sum(),
    })
}

/// Labelled spur contributions and their combined EVM.
#[derive(Debug, Clone, PartialEq)]
pub struct EvmBudget {
    pub contributions: Vec<(String, f64)>,
    pub total_evm: f64,
    pub mode: SummationMode,
}

pub const EVM_CSV_HEADER: &str = "label,level_dbc,evm_fraction,evm_percent";

impl EvmBudget {
    pub fn new(contributions: Vec<(String, f64)>, mode: SummationMode) -> Result<Self, AnalysisError> {
        let levels: Vec<f64> = contributions.iter().map(|(_, l)| *l).collect();
        let total_evm = evm_from_spurs(&levels, mode)?;
        Ok(EvmBudget { contributions, total_evm, mode })
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{EVM_CSV_HEADER}\n");
        for (label, level) in &self.contributions {
            let e = 10f64.powf(level / 20.0);
            let _ = writeln!(s, "{label},{level:.6},{e:.8},{:.6}", e * 100.0);
        }
        let _ = writeln!(s, "TOTAL_{},,{:.8},{:.6}", self.mode.as_str(), self.total_evm, self.total_evm * 100.0);
        s
    }

    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "EVM budget ({})", self.mode.as_str());
        for (label, level) in &self.contributions {
            let e = 10f64.powf(level / 20.0);
            let _ = writeln!(s, "  {label}: {level:.2} dBc -> {:.4} %", e * 100.0);
        }
        let _ = writeln!(s, "Total EVM = {:.4} % ({:.6})", self.total_evm * 100.0, self.total_evm);
        s
    }
}

/// Smallest input at which every forward slope from there on is below
/// `epsilon` dB/dB.
///
/// The last point has no forward slope, so a curve that never levels
/// reports its final input; an everywhere-flat curve reports its first.
pub fn detect_leveling_threshold(curve: &[(PowerDbm, PowerDbm)], epsilon: f64) -> Result<PowerDbm, AnalysisError> {
    if curve.len() < 3 {
        return Err(AnalysisError::InsufficientPoints { needed: 3, found: curve.len() });
    }
    let slopes: Vec<f64> = curve.windows(2).map(|w| (w[1].1 .0 - w[0].1 .0) / (w[1].0 .0 - w[0].0 .0)).collect();
    let mut idx = curve.len() - 1;
    while idx > 0 && slopes[idx - 1].abs() < epsilon {
        idx -= 1;
    }
    Ok(curve[idx].0)
}

/// LO level relative to the desired tone, or `None` when no LO line survives
/// above the floor.
pub fn lo_breakthrough_report(
    spectrum: &Spectrum,
    f_lo: FrequencyHz,
    f_desired: FrequencyHz,
) -> Result<Option<GainDb>, AnalysisError> {
    let desired = spectrum.power_at(f_desired).ok_or(AnalysisError::DesiredToneMissing(f_desired))?;
    Ok(spectrum.power_at(f_lo).map(|lo| lo - desired))
}

/// Renders a breakthrough level for reports: a dBc figure or `BELOW_FLOOR`.
pub fn format_breakthrough(level: Option<GainDb>) -> String {
    match level {
        Some(g) => format!("{:.2} dBc", g.0),
        None => "BELOW_FLOOR".to_string(),
    }
}
