//! Two-port S-parameters, antenna coupling datasets and 2×2 channel assembly.
//!
//! Only Touchstone version 1 is accepted. A version 1 file has no keyword
//! lines; a `[Version]` keyword marks the file as version 2 and is rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::units::FrequencyHz;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TouchstoneError {
    #[error("line {line}: malformed option line: {reason}")]
    MalformedOptionLine { line: usize, reason: String },
    #[error("line {line}: expected 9 fields for a 2-port data row, found {found}")]
    WrongPortCount { line: usize, found: usize },
    #[error("line {line}: frequency grid is not strictly ascending")]
    NonMonotoneGrid { line: usize },
    #[error("line {line}: bad numeric field `{field}`")]
    BadNumericField { line: usize, field: String },
    #[error("line {line}: Touchstone version 2 is not supported")]
    UnsupportedVersion { line: usize },
    #[error("no data rows")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Ma,
    Db,
    Ri,
}

impl DataFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            DataFormat::Ma => "MA",
            DataFormat::Db => "DB",
            DataFormat::Ri => "RI",
        }
    }

    fn decode(self, a: f64, b: f64) -> Complex64 {
        match self {
            DataFormat::Ri => Complex64::new(a, b),
            DataFormat::Ma => Complex64::from_polar(a, b.to_radians()),
            DataFormat::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        }
    }

    fn encode(self, z: Complex64) -> (f64, f64) {
        match self {
            DataFormat::Ri => (z.re, z.im),
            DataFormat::Ma => (z.norm(), z.arg().to_degrees()),
            DataFormat::Db => (20.0 * z.norm().log10(), z.arg().to_degrees()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPortSParams {
    pub freq_grid: Vec<FrequencyHz>,
    pub s11: Vec<Complex64>,
    pub s21: Vec<Complex64>,
    pub s12: Vec<Complex64>,
    pub s22: Vec<Complex64>,
    pub reference_impedance: f64,
}

impl TwoPortSParams {
    pub fn len(&self) -> usize {
        self.freq_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_grid.is_empty()
    }

    pub fn span(&self) -> Option<(FrequencyHz, FrequencyHz)> {
        Some((*self.freq_grid.first()?, *self.freq_grid.last()?))
    }

    /// Grid-linear interpolation of one parameter list, real and imaginary
    /// parts independently. `None` outside the grid span.
    fn interp(&self, values: &[Complex64], f: FrequencyHz) -> Option<Complex64> {
        let i = self.freq_grid.partition_point(|&g| g < f);
        if i == self.freq_grid.len() {
            return None;
        }
        if self.freq_grid[i] == f {
            return Some(values[i]);
        }
        if i == 0 {
            return None;
        }
        let (f0, f1) = (self.freq_grid[i - 1].as_f64(), self.freq_grid[i].as_f64());
        let t = (f.as_f64() - f0) / (f1 - f0);
        Some(values[i - 1] + (values[i] - values[i - 1]) * t)
    }

    pub fn s21_at(&self, f: FrequencyHz) -> Option<Complex64> {
        self.interp(&self.s21, f)
    }

    pub fn s11_at(&self, f: FrequencyHz) -> Option<Complex64> {
        self.interp(&self.s11, f)
    }
}

fn unit_scale(tok: &str) -> Option<f64> {
    match tok {
        "HZ" => Some(1.0),
        "KHZ" => Some(1e3),
        "MHZ" => Some(1e6),
        "GHZ" => Some(1e9),
        _ => None,
    }
}

struct Options {
    scale: f64,
    format: DataFormat,
    r: f64,
}

fn parse_option_line(body: &str, line: usize) -> Result<Options, TouchstoneError> {
    let bad = |reason: String| TouchstoneError::MalformedOptionLine { line, reason };
    let mut opts = Options { scale: 1e9, format: DataFormat::Ma, r: 50.0 };
    let upper = body.to_ascii_uppercase();
    let mut toks = upper.split_whitespace();
    while let Some(t) = toks.next() {
        if let Some(s) = unit_scale(t) {
            opts.scale = s;
            continue;
        }
        match t {
            "S" => {}
            "Y" | "Z" | "H" | "G" => return Err(bad(format!("parameter type {t} is not supported, only S"))),
            "MA" => opts.format = DataFormat::Ma,
            "DB" => opts.format = DataFormat::Db,
            "RI" => opts.format = DataFormat::Ri,
            "R" => {
                let v = toks.next().ok_or_else(|| bad("R without a value".into()))?;
                opts.r = v
                    .parse::<f64>()
                    .ok()
                    .filter(|r| r.is_finite() && *r > 0.0)
                    .ok_or_else(|| bad(format!("bad reference resistance `{v}`")))?;
            }
            other => return Err(bad(format!("unrecognized token `{other}`"))),
        }
    }
    Ok(opts)
}

pub fn parse_touchstone(text: &str) -> Result<TwoPortSParams, TouchstoneError> {
    let mut opts: Option<Options> = None;
    let mut out = TwoPortSParams {
        freq_grid: Vec::new(),
        s11: Vec::new(),
        s21: Vec::new(),
        s12: Vec::new(),
        s22: Vec::new(),
        reference_impedance: 50.0,
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            // Keyword lines only exist in version 2 files.
            return Err(TouchstoneError::UnsupportedVersion { line });
        }
        if let Some(body) = content.strip_prefix('#') {
            // Only the first option line counts; later ones are ignored by convention.
            if opts.is_none() {
                opts = Some(parse_option_line(body, line)?);
            }
            continue;
        }
        let o = opts.get_or_insert(Options { scale: 1e9, format: DataFormat::Ma, r: 50.0 });
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(TouchstoneError::WrongPortCount { line, found: fields.len() });
        }
        let mut nums = [0.0f64; 9];
        for (slot, tok) in nums.iter_mut().zip(&fields) {
            *slot = tok
                .parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .ok_or_else(|| TouchstoneError::BadNumericField { line, field: tok.to_string() })?;
        }
        let hz = nums[0] * o.scale;
        if !hz.is_finite() || hz < 0.0 || hz > u64::MAX as f64 {
            return Err(TouchstoneError::BadNumericField { line, field: fields[0].to_string() });
        }
        let f = FrequencyHz::from_hz(hz.round() as u64);
        if out.freq_grid.last().is_some_and(|&prev| f <= prev) {
            return Err(TouchstoneError::NonMonotoneGrid { line });
        }
        out.freq_grid.push(f);
        out.s11.push(o.format.decode(nums[1], nums[2]));
        out.s21.push(o.format.decode(nums[3], nums[4]));
        out.s12.push(o.format.decode(nums[5], nums[6]));
        out.s22.push(o.format.decode(nums[7], nums[8]));
    }
    if out.freq_grid.is_empty() {
        return Err(TouchstoneError::Empty);
    }
    out.reference_impedance = opts.map(|o| o.r).unwrap_or(50.0);
    Ok(out)
}

/// Writes a version 1 file with frequencies in integer Hz and values in
/// shortest round-trip float form.
pub fn serialize_touchstone(s: &TwoPortSParams, format: DataFormat) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "! 2-port S-parameters");
    let _ = writeln!(out, "# Hz S {} R {}", format.as_str(), s.reference_impedance);
    for i in 0..s.len() {
        let _ = write!(out, "{}", s.freq_grid[i].hz());
        for z in [s.s11[i], s.s21[i], s.s12[i], s.s22[i]] {
            let (a, b) = format.encode(z);
            let _ = write!(out, " {a:e} {b:e}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    Co,
    Cross,
}

impl Polarization {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarization::Co => "CO",
            Polarization::Cross => "CROSS",
        }
    }
}

impl std::str::FromStr for Polarization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CO" => Ok(Polarization::Co),
            "CROSS" => Ok(Polarization::Cross),
            other => Err(format!("expected CO or CROSS, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRecord {
    pub separation_mm: f64,
    pub polarization: Polarization,
    pub sparams: TwoPortSParams,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{path}: {source}")]
    Touchstone { path: PathBuf, source: TouchstoneError },
    #[error("separations for {pol} are not strictly increasing at {separation_mm} mm")]
    NonIncreasingSeparation { pol: &'static str, separation_mm: f64 },
    #[error("dataset has no records")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CouplingError {
    #[error("{what} out of range")]
    OutOfRange { what: String },
}

/// Coupling records grouped by polarization, each group ordered by
/// separation.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingDataset {
    records: Vec<CouplingRecord>,
}

impl CouplingDataset {
    /// Records may come in any order; within a polarization the separations
    /// must be distinct.
    pub fn new(mut records: Vec<CouplingRecord>) -> Result<Self, DatasetError> {
        if records.is_empty() {
            return Err(DatasetError::Empty);
        }
        records.sort_by(|a, b| a.polarization.cmp(&b.polarization).then(a.separation_mm.total_cmp(&b.separation_mm)));
        for w in records.windows(2) {
            if w[0].polarization == w[1].polarization && w[0].separation_mm >= w[1].separation_mm {
                return Err(DatasetError::NonIncreasingSeparation {
                    pol: w[1].polarization.as_str(),
                    separation_mm: w[1].separation_mm,
                });
            }
        }
        Ok(CouplingDataset { records })
    }

    pub fn records(&self) -> &[CouplingRecord] {
        &self.records
    }

    pub fn by_polarization(&self, pol: Polarization) -> &[CouplingRecord] {
        let start = self.records.partition_point(|r| r.polarization < pol);
        let end = self.records.partition_point(|r| r.polarization <= pol);
        &self.records[start..end]
    }

    /// Loads the manifest (`file,separation_mm,polarization`) and every file
    /// it lists. Paths are relative to the manifest's directory.
    pub fn load(manifest: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(manifest).map_err(|source| DatasetError::Io { path: manifest.into(), source })?;
        let dir = manifest.parent().unwrap_or(Path::new("."));
        let mut records = Vec::new();
        let mut header_seen = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let row = raw.trim();
            if row.is_empty() || row.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = row.split(',').map(str::trim).collect();
            if !header_seen {
                if cols != ["file", "separation_mm", "polarization"] {
                    return Err(DatasetError::Manifest {
                        line,
                        message: "expected header `file,separation_mm,polarization`".into(),
                    });
                }
                header_seen = true;
                continue;
            }
            let bad = |message: String| DatasetError::Manifest { line, message };
            let [file, sep, pol] = cols[..] else {
                return Err(bad(format!("expected 3 columns, found {}", cols.len())));
            };
            let separation_mm: f64 = sep
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| bad(format!("bad separation `{sep}`")))?;
            let polarization: Polarization = pol.parse().map_err(bad)?;
            let path = dir.join(file);
            let body = std::fs::read_to_string(&path).map_err(|source| DatasetError::Io { path: path.clone(), source })?;
            let sparams = parse_touchstone(&body).map_err(|source| DatasetError::Touchstone { path, source })?;
            records.push(CouplingRecord { separation_mm, polarization, sparams });
        }
        Self::new(records)
    }

    /// Interpolated s21: grid-linear in frequency within each record, then
    /// linear in separation between the two bracketing records.
    pub fn coupling_at(&self, f: FrequencyHz, separation_mm: f64, pol: Polarization) -> Result<Complex64, CouplingError> {
        self.interp(f, separation_mm, pol, TwoPortSParams::s21_at)
    }

    pub fn reflection_at(&self, f: FrequencyHz, separation_mm: f64, pol: Polarization) -> Result<Complex64, CouplingError> {
        self.interp(f, separation_mm, pol, TwoPortSParams::s11_at)
    }

    fn interp(
        &self,
        f: FrequencyHz,
        d: f64,
        pol: Polarization,
        at: fn(&TwoPortSParams, FrequencyHz) -> Option<Complex64>,
    ) -> Result<Complex64, CouplingError> {
        let recs = self.by_polarization(pol);
        let (Some(first), Some(last)) = (recs.first(), recs.last()) else {
            return Err(CouplingError::OutOfRange { what: format!("polarization {}", pol.as_str()) });
        };
        if !(first.separation_mm..=last.separation_mm).contains(&d) {
            return Err(CouplingError::OutOfRange { what: format!("separation {d} mm") });
        }
        let sample = |r: &CouplingRecord| {
            at(&r.sparams, f).ok_or_else(|| CouplingError::OutOfRange {
                what: format!("frequency {} at {} mm", f.display_ghz(), r.separation_mm),
            })
        };
        let i = recs.partition_point(|r| r.separation_mm < d);
        if recs[i].separation_mm == d {
            return sample(&recs[i]);
        }
        let (a, b) = (&recs[i - 1], &recs[i]);
        let t = (d - a.separation_mm) / (b.separation_mm - a.separation_mm);
        let (za, zb) = (sample(a)?, sample(b)?);
        Ok(za + (zb - za) * t)
    }
}

pub const COUPLING_CSV_HEADER: &str = "separation_mm,pol,s21_db,s11_db";

fn to_db(z: Complex64) -> f64 {
    20.0 * z.norm().log10()
}

/// Coupling versus separation at one frequency, CO rows first.
pub fn coupling_report(ds: &CouplingDataset, f: FrequencyHz) -> Result<String, CouplingError> {
    let mut s = format!("{COUPLING_CSV_HEADER}\n");
    for r in ds.records() {
        let out_of_range =
            || CouplingError::OutOfRange { what: format!("frequency {} at {} mm", f.display_ghz(), r.separation_mm) };
        let s21 = r.sparams.s21_at(f).ok_or_else(out_of_range)?;
        let s11 = r.sparams.s11_at(f).ok_or_else(out_of_range)?;
        let _ = writeln!(s, "{},{},{:.4},{:.4}", r.separation_mm, r.polarization.as_str(), to_db(s21), to_db(s11));
    }
    Ok(s)
}

/// Free-space exponential-decay coupling model behind the bundled dataset.
///
/// `|s21|` in dB falls linearly with separation from a polarization-dependent
/// intercept, with a mild frequency slope. Phase follows the free-space path
/// delay. `s11` is a fixed match level with a path-dependent phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticCoupling {
    pub co_intercept_db: f64,
    pub cross_intercept_db: f64,
    pub decay_db_per_mm: f64,
    pub slope_db_per_ghz: f64,
    pub reference: FrequencyHz,
    pub match_db: f64,
}

impl Default for SyntheticCoupling {
    fn default() -> Self {
        SyntheticCoupling {
            co_intercept_db: -18.0,
            cross_intercept_db: -24.0,
            decay_db_per_mm: 0.5,
            slope_db_per_ghz: -0.2,
            reference: FrequencyHz::from_ghz(30),
            match_db: -15.0,
        }
    }
}

const C_MM_PER_S: f64 = 299_792_458_000.0;

impl SyntheticCoupling {
    pub fn s21(&self, f: FrequencyHz, d_mm: f64, pol: Polarization) -> Complex64 {
        let intercept = match pol {
            Polarization::Co => self.co_intercept_db,
            Polarization::Cross => self.cross_intercept_db,
        };
        let db = intercept - self.decay_db_per_mm * d_mm + self.slope_db_per_ghz * (f.ghz() - self.reference.ghz());
        let phase = -2.0 * std::f64::consts::PI * f.as_f64() * d_mm / C_MM_PER_S;
        Complex64::from_polar(10f64.powf(db / 20.0), phase)
    }

    pub fn s11(&self, f: FrequencyHz, d_mm: f64) -> Complex64 {
        let phase = -std::f64::consts::PI * f.as_f64() * d_mm / C_MM_PER_S;
        Complex64::from_polar(10f64.powf(self.match_db / 20.0), phase)
    }

    pub fn record(&self, grid: &[FrequencyHz], d_mm: f64, pol: Polarization) -> CouplingRecord {
        let s21: Vec<Complex64> = grid.iter().map(|&f| self.s21(f, d_mm, pol)).collect();
        let s11: Vec<Complex64> = grid.iter().map(|&f| self.s11(f, d_mm)).collect();
        CouplingRecord {
            separation_mm: d_mm,
            polarization: pol,
            sparams: TwoPortSParams {
                freq_grid: grid.to_vec(),
                s12: s21.clone(),
                s22: s11.clone(),
                s11,
                s21,
                reference_impedance: 50.0,
            },
        }
    }
}

/// Writes one `.s2p` per (separation, polarization) plus `manifest.csv` into
/// `dir`. Returns the manifest path.
pub fn write_synthetic_dataset(
    dir: &Path,
    model: &SyntheticCoupling,
    grid: &[FrequencyHz],
    separations_mm: &[f64],
    format: DataFormat,
) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::from("file,separation_mm,polarization\n");
    for pol in [Polarization::Co, Polarization::Cross] {
        for &d in separations_mm {
            let name = format!("{}_{:05.1}mm.s2p", pol.as_str().to_ascii_lowercase(), d);
            std::fs::write(dir.join(&name), serialize_touchstone(&model.record(grid, d, pol).sparams, format))?;
            let _ = writeln!(manifest, "{name},{d},{}", pol.as_str());
        }
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("|coupling| = {0} must be below 1")]
    Coupling(f64),
    #[error("|reflection| = {0} must be below 1")]
    Mismatch(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMatrix2x2 {
    pub h11: Complex64,
    pub h12: Complex64,
    pub h21: Complex64,
    pub h22: Complex64,
    pub condition_number: f64,
}

impl ChannelMatrix2x2 {
    pub fn from_entries(h11: Complex64, h12: Complex64, h21: Complex64, h22: Complex64) -> Self {
        ChannelMatrix2x2 { h11, h12, h21, h22, condition_number: condition_number([[h11, h12], [h21, h22]]) }
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> (f64, f64) {
        let (s1_sq, s2_sq) = singular_values_sq([[self.h11, self.h12], [self.h21, self.h22]]);
        (s1_sq.sqrt(), s2_sq.sqrt())
    }

    pub fn to_report(&self) -> String {
        let (s1, s2) = self.singular_values();
        let c = |z: Complex64| format!("{:.6}{:+.6}j", z.re, z.im);
        format!(
            "H = [[{}, {}], [{}, {}]]\nsingular values: {:.6e}, {:.6e}\ncondition number: {:.6}\n",
            c(self.h11),
            c(self.h12),
            c(self.h21),
            c(self.h22),
            s1,
            s2,
            self.condition_number
        )
    }
}

// σ1² + σ2² = ‖H‖F² and σ1²·σ2² = |det H|². The smaller one comes from the
// product rather than the difference, which keeps it accurate when the
// matrix is close to singular.
fn singular_values_sq(h: [[Complex64; 2]; 2]) -> (f64, f64) {
    let fro = h.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>();
    let det = (h[0][0] * h[1][1] - h[0][1] * h[1][0]).norm_sqr();
    let disc = (fro * fro - 4.0 * det).max(0.0).sqrt();
    let s1 = (fro + disc) / 2.0;
    let s2 = if s1 > 0.0 { det / s1 } else { 0.0 };
    (s1, s2)
}

pub fn condition_number(h: [[Complex64; 2]; 2]) -> f64 {
    let (s1, s2) = singular_values_sq(h);
    if s2 <= 0.0 {
        return f64::INFINITY;
    }
    (s1 / s2).sqrt().max(1.0)
}

/// `H = g·[[1, c], [c, 1]]` with row `i` scaled by the receive port's
/// mismatch factor `(1 − |Γrx_i|²)^½` and column `j` by the transmit port's.
pub fn build_channel_matrix(
    direct_gain: Complex64,
    coupling: Complex64,
    mismatch_tx: [Complex64; 2],
    mismatch_rx: [Complex64; 2],
) -> Result<ChannelMatrix2x2, ChannelError> {
    if coupling.norm() >= 1.0 || !coupling.norm().is_finite() {
        return Err(ChannelError::Coupling(coupling.norm()));
    }
    let factor = |g: Complex64| {
        let m = g.norm();
        if m >= 1.0 || !m.is_finite() {
            Err(ChannelError::Mismatch(m))
        } else {
            Ok((1.0 - m * m).sqrt())
        }
    };
    let tx = [factor(mismatch_tx[0])?, factor(mismatch_tx[1])?];
    let rx = [factor(mismatch_rx[0])?, factor(mismatch_rx[1])?];
    let one = Complex64::new(1.0, 0.0);
    let base = [[one, coupling], [coupling, one]];
    let h = |i: usize, j: usize| direct_gain * base[i][j] * rx[i] * tx[j];
    Ok(ChannelMatrix2x2::from_entries(h(0, 0), h(0, 1), h(1, 0), h(1, 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MATCHED: [Complex64; 2] = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * a.norm().max(b.norm()).max(1e-300)
    }

    #[test]
    fn ma_row_maps_to_fields() {
        let s = parse_touchstone("! comment\n# GHz S MA R 50\n30 0.1 0 0.01 90 0.01 90 0.1 0\n").unwrap();
        assert_eq!(s.freq_grid, vec![FrequencyHz::from_ghz(30)]);
        assert!(close(s.s11[0], Complex64::new(0.1, 0.0), 1e-12));
        assert!(close(s.s21[0], Complex64::new(0.0, 0.01), 1e-12));
        assert_eq!(s.reference_impedance, 50.0);
    }

    #[test]
    fn db_row() {
        let s = parse_touchstone("# MHz S DB R 75\n30000 -20 0 -40 0 -40 0 -20 0\n").unwrap();
        assert!((s.s21[0].norm() - 0.01).abs() < 1e-15);
        assert_eq!(s.freq_grid[0], FrequencyHz::from_ghz(30));
        assert_eq!(s.reference_impedance, 75.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        use TouchstoneError::*;
        assert!(matches!(parse_touchstone("# GHz S XX R 50\n"), Err(MalformedOptionLine { line: 1, .. })));
        assert!(matches!(parse_touchstone("# GHz Z MA R 50\n"), Err(MalformedOptionLine { .. })));
        assert!(matches!(parse_touchstone("# GHz S MA R\n"), Err(MalformedOptionLine { .. })));
        assert_eq!(parse_touchstone("# GHz S MA R 50\n30 0.1 0 0.01 90\n"), Err(WrongPortCount { line: 2, found: 5 }));
        assert_eq!(
            parse_touchstone("# GHz S MA R 50\n30 0.1 0 0.01 90 0.01 90 0.1 0\n29 0.1 0 0.01 90 0.01 90 0.1 0\n"),
            Err(NonMonotoneGrid { line: 3 })
        );
        assert_eq!(
            parse_touchstone("# GHz S MA R 50\n30 0.1 0 abc 90 0.01 90 0.1 0\n"),
            Err(BadNumericField { line: 2, field: "abc".into() })
        );
        assert_eq!(parse_touchstone("[Version] 2.0\n# GHz S MA R 50\n"), Err(UnsupportedVersion { line: 1 }));
        assert_eq!(parse_touchstone("! nothing\n"), Err(Empty));
    }

    fn one_record(d: f64, s21: Complex64) -> CouplingRecord {
        let grid = vec![FrequencyHz::from_ghz(29), FrequencyHz::from_ghz(31)];
        CouplingRecord {
            separation_mm: d,
            polarization: Polarization::Co,
            sparams: TwoPortSParams {
                freq_grid: grid,
                s11: vec![Complex64::new(0.1, 0.0); 2],
                s21: vec![s21, s21 * 2.0],
                s12: vec![s21; 2],
                s22: vec![Complex64::new(0.1, 0.0); 2],
                reference_impedance: 50.0,
            },
        }
    }

    #[test]
    fn coupling_interpolation() {
        let a = Complex64::new(0.02, 0.0);
        let b = Complex64::new(0.01, 0.0);
        let ds = CouplingDataset::new(vec![one_record(2.0, b), one_record(1.0, a)]).unwrap();
        let f29 = FrequencyHz::from_ghz(29);
        assert_eq!(ds.coupling_at(f29, 1.0, Polarization::Co).unwrap(), a);
        assert!(close(ds.coupling_at(f29, 1.5, Polarization::Co).unwrap(), (a + b) / 2.0, 1e-12));
        assert!(close(ds.coupling_at(FrequencyHz::from_ghz(30), 1.0, Polarization::Co).unwrap(), a * 1.5, 1e-12));
        assert!(ds.coupling_at(f29, 3.0, Polarization::Co).is_err());
        assert!(ds.coupling_at(FrequencyHz::from_ghz(32), 1.0, Polarization::Co).is_err());
        assert!(ds.coupling_at(f29, 1.0, Polarization::Cross).is_err());
        assert!(CouplingDataset::new(vec![one_record(1.0, a), one_record(1.0, b)]).is_err());
    }

    #[test]
    fn synthetic_dataset_matches_model() {
        let dir = tempfile::tempdir().unwrap();
        let model = SyntheticCoupling::default();
        let grid: Vec<FrequencyHz> = (0..5).map(|k| FrequencyHz::from_mhz(29_000 + 500 * k)).collect();
        let seps: Vec<f64> = (1..=41).map(f64::from).collect();
        let manifest = write_synthetic_dataset(dir.path(), &model, &grid, &seps, DataFormat::Ri).unwrap();
        let ds = CouplingDataset::load(&manifest).unwrap();
        let f = FrequencyHz::from_ghz(30);
        let got = ds.coupling_at(f, 20.0, Polarization::Co).unwrap();
        assert!((got - model.s21(f, 20.0, Polarization::Co)).norm() < 1e-6);
        let co = ds.coupling_at(f, 20.0, Polarization::Co).unwrap().norm();
        let cross = ds.coupling_at(f, 20.0, Polarization::Cross).unwrap().norm();
        assert!(co > cross);
        let report = coupling_report(&ds, f).unwrap();
        assert!(report.starts_with("separation_mm,pol,s21_db,s11_db\n1,CO,"));
        assert_eq!(report.lines().count(), 83);
    }

    #[test]
    fn channel_examples() {
        let g = Complex64::new(1.0, 0.0);
        let m = build_channel_matrix(g, Complex64::new(0.0, 0.0), MATCHED, MATCHED).unwrap();
        assert_eq!(m.h12, Complex64::new(0.0, 0.0));
        assert!((m.condition_number - 1.0).abs() < 1e-12);
        let m = build_channel_matrix(g, Complex64::new(0.5, 0.0), MATCHED, MATCHED).unwrap();
        assert!((m.condition_number - 3.0).abs() < 1e-9);
        let m = build_channel_matrix(g, Complex64::new(0.01, 0.0), MATCHED, MATCHED).unwrap();
        assert!((m.condition_number - 1.01 / 0.99).abs() < 1e-12);
        // singular values are |1 ± c|, so a complex c of the same magnitude is better conditioned
        let m = build_channel_matrix(g, Complex64::from_polar(0.01, 0.7), MATCHED, MATCHED).unwrap();
        assert!(m.condition_number < 1.01 / 0.99 && m.condition_number > 1.0);
        assert!(build_channel_matrix(g, Complex64::new(1.0, 0.0), MATCHED, MATCHED).is_err());
        assert!(build_channel_matrix(g, Complex64::new(0.1, 0.0), [Complex64::new(1.0, 0.0), MATCHED[1]], MATCHED).is_err());
    }

    #[test]
    fn mismatch_scales_rows_and_columns() {
        let g = Complex64::new(2.0, 0.0);
        let tx = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.0)];
        let m = build_channel_matrix(g, Complex64::new(0.0, 0.0), tx, MATCHED).unwrap();
        assert!((m.h11.re - 1.6).abs() < 1e-12);
        assert!((m.h22.re - 2.0).abs() < 1e-12);
        assert!((m.condition_number - 1.25).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix() {
        let one = Complex64::new(1.0, 0.0);
        assert!(condition_number([[one, one], [one, one]]).is_infinite());
    }

    fn cplx() -> impl Strategy<Value = Complex64> {
        (1e-3f64..10.0, -180.0f64..180.0).prop_map(|(m, p)| Complex64::from_polar(m, p.to_radians()))
    }

    fn sparams() -> impl Strategy<Value = TwoPortSParams> {
        (1usize..6, 1e6f64..1e11, 1u64..1_000_000_000)
            .prop_flat_map(|(n, start, step)| {
                (proptest::collection::vec((cplx(), cplx(), cplx(), cplx()), n), Just(start as u64), Just(step), 1.0f64..500.0)
            })
            .prop_map(|(vals, start, step, r)| TwoPortSParams {
                freq_grid: (0..vals.len() as u64).map(|k| FrequencyHz::from_hz(start + k * step)).collect(),
                s11: vals.iter().map(|v| v.0).collect(),
                s21: vals.iter().map(|v| v.1).collect(),
                s12: vals.iter().map(|v| v.2).collect(),
                s22: vals.iter().map(|v| v.3).collect(),
                reference_impedance: r,
            })
    }

    proptest! {
        #[test]
        fn touchstone_round_trip(s in sparams(), fmt in prop_oneof![Just(DataFormat::Ma), Just(DataFormat::Db), Just(DataFormat::Ri)]) {
            let back = parse_touchstone(&serialize_touchstone(&s, fmt)).unwrap();
            prop_assert_eq!(&back.freq_grid, &s.freq_grid);
            prop_assert_eq!(back.reference_impedance, s.reference_impedance);
            for (a, b) in [(&s.s11, &back.s11), (&s.s21, &back.s21), (&s.s12, &back.s12), (&s.s22, &back.s22)] {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!(close(*x, *y, 1e-9), "{x} vs {y}");
                }
            }
        }

        #[test]
        fn condition_number_scale_invariant(h in proptest::array::uniform4(cplx()), k in cplx()) {
            let a = condition_number([[h[0], h[1]], [h[2], h[3]]]);
            let b = condition_number([[h[0] * k, h[1] * k], [h[2] * k, h[3] * k]]);
            prop_assume!(a.is_finite() && a < 1e6);
            prop_assert!((a - b).abs() <= 1e-8 * a);
            prop_assert!(a >= 1.0);
        }

        #[test]
        fn condition_number_monotone_in_coupling(m1 in 0.0f64..0.99, dm in 1e-4f64..0.009, phase in -3.1f64..3.1) {
            let g = Complex64::new(1.0, 0.0);
            let lo = build_channel_matrix(g, Complex64::from_polar(m1, phase), MATCHED, MATCHED).unwrap();
            let hi = build_channel_matrix(g, Complex64::from_polar(m1 + dm, phase), MATCHED, MATCHED).unwrap();
            prop_assert!(hi.condition_number > lo.condition_number);
        }

        #[test]
        fn knots_reproduced(d in 1u32..=5, k in 0usize..3) {
            let model = SyntheticCoupling::default();
            let grid: Vec<FrequencyHz> = (0..3).map(|i| FrequencyHz::from_ghz(29 + i)).collect();
            let recs = (1..=5).map(|d| model.record(&grid, f64::from(d), Polarization::Co)).collect();
            let ds = CouplingDataset::new(recs).unwrap();
            let got = ds.coupling_at(grid[k], f64::from(d), Polarization::Co).unwrap();
            prop_assert_eq!(got, model.s21(grid[k], f64::from(d), Polarization::Co));
        }
    }
}
