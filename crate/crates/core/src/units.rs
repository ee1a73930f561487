//! Unit-safe scalars: integer-hertz frequencies, dBm/dB powers and phases.
//!
//! Frequencies are exact integers so that collision checks in the planner are
//! plain equality. Powers stay in the log domain and only visit watts when
//! tones are summed.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

/// Default amplitude floor. Tones below this level are never stored.
pub const DEFAULT_FLOOR_DBM: f64 = -200.0;

/// Environment variable that overrides [`DEFAULT_FLOOR_DBM`] for the process.
pub const FLOOR_ENV_VAR: &str = "SPURLINE_FLOOR_DBM";

static FLOOR: OnceLock<f64> = OnceLock::new();

/// The process-wide amplitude floor in dBm.
///
/// Read once from `SPURLINE_FLOOR_DBM` on first use; falls back to
/// −200 dBm when the variable is absent or not a finite number.
pub fn amplitude_floor() -> PowerDbm {
    PowerDbm(*FLOOR.get_or_init(|| {
        std::env::var(FLOOR_ENV_VAR)
            .ok()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .unwrap_or(DEFAULT_FLOOR_DBM)
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitParseError {
    #[error("empty value")]
    Empty,
    #[error("invalid number `{0}`")]
    BadNumber(String),
    #[error("unknown frequency unit `{0}`")]
    BadUnit(String),
    #[error("frequency `{0}` is negative")]
    Negative(String),
    #[error("frequency `{0}` is not a whole number of hertz")]
    Fractional(String),
    #[error("frequency `{0}` is out of range")]
    Overflow(String),
}

/// A non-negative frequency in whole hertz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FrequencyHz(u64);

impl FrequencyHz {
    pub const ZERO: FrequencyHz = FrequencyHz(0);

    pub const fn from_hz(hz: u64) -> Self {
        FrequencyHz(hz)
    }

    pub const fn from_khz(khz: u64) -> Self {
        FrequencyHz(khz * 1_000)
    }

    pub const fn from_mhz(mhz: u64) -> Self {
        FrequencyHz(mhz * 1_000_000)
    }

    pub const fn from_ghz(ghz: u64) -> Self {
        FrequencyHz(ghz * 1_000_000_000)
    }

    /// Folds a signed mixing result onto the non-negative axis.
    ///
    /// Panics if the magnitude does not fit in `u64`; mixer orders used here
    /// keep products many orders of magnitude below that.
    pub fn from_signed(hz: i128) -> Self {
        FrequencyHz(u64::try_from(hz.unsigned_abs()).expect("frequency overflow"))
    }

    pub const fn hz(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn ghz(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn abs_diff(self, other: FrequencyHz) -> FrequencyHz {
        FrequencyHz(self.0.abs_diff(other.0))
    }

    pub fn checked_mul(self, k: u64) -> Option<FrequencyHz> {
        self.0.checked_mul(k).map(FrequencyHz)
    }

    /// Renders as GHz with nine decimals, exactly (no float rounding).
    pub fn display_ghz(self) -> String {
        format!("{}.{:09} GHz", self.0 / 1_000_000_000, self.0 % 1_000_000_000)
    }
}

impl fmt::Display for FrequencyHz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for FrequencyHz {
    type Output = FrequencyHz;
    fn add(self, rhs: FrequencyHz) -> FrequencyHz {
        FrequencyHz(self.0 + rhs.0)
    }
}

/// Accepts `5000000000`, `5GHz`, `5.005 GHz`, `10 MHz`, `2.5e9`.
///
/// Decimal inputs with a unit suffix are scaled with integer arithmetic, so
/// `10.4975GHz` is exactly 10 497 500 000 Hz.
impl FromStr for FrequencyHz {
    type Err = UnitParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(UnitParseError::Empty);
        }
        let split = s.find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E').unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let num = num.trim();
        let exponent: u32 = match unit.trim().to_ascii_lowercase().as_str() {
            "" | "hz" => 0,
            "khz" => 3,
            "mhz" => 6,
            "ghz" => 9,
            "thz" => 12,
            other => return Err(UnitParseError::BadUnit(other.to_string())),
        };
        if num.starts_with('-') {
            return Err(UnitParseError::Negative(s.to_string()));
        }
        if num.contains(['e', 'E']) {
            let v: f64 = num.parse().map_err(|_| UnitParseError::BadNumber(num.to_string()))?;
            let hz = v * 10f64.powi(exponent as i32);
            if !hz.is_finite() || hz < 0.0 || hz > u64::MAX as f64 {
                return Err(UnitParseError::Overflow(s.to_string()));
            }
            if (hz - hz.round()).abs() > 1e-6 {
                return Err(UnitParseError::Fractional(s.to_string()));
            }
            return Ok(FrequencyHz(hz.round() as u64));
        }
        let num = num.strip_prefix('+').unwrap_or(num);
        let (int_part, frac_part) = match num.split_once('.') {
            Some((i, f)) => (i, f),
            None => (num, ""),
        };
        if (int_part.is_empty() && frac_part.is_empty())
            || !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(UnitParseError::BadNumber(num.to_string()));
        }
        let frac_trimmed = frac_part.trim_end_matches('0');
        if frac_trimmed.len() > exponent as usize {
            return Err(UnitParseError::Fractional(s.to_string()));
        }
        let overflow = || UnitParseError::Overflow(s.to_string());
        let int_val: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| overflow())? };
        let scale = 10u64.pow(exponent);
        let frac_val: u64 = if frac_trimmed.is_empty() {
            0
        } else {
            let digits: u64 = frac_trimmed.parse().map_err(|_| overflow())?;
            digits * 10u64.pow(exponent - frac_trimmed.len() as u32)
        };
        int_val.checked_mul(scale).and_then(|v| v.checked_add(frac_val)).map(FrequencyHz).ok_or_else(overflow)
    }
}

/// Absolute power in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PowerDbm(pub f64);

/// Relative level in dB (gain, loss, dBc).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct GainDb(pub f64);

impl PowerDbm {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn watts(self) -> f64 {
        dbm_to_watts(self)
    }

    pub fn from_watts(w: f64) -> Self {
        watts_to_dbm(w)
    }

    pub fn is_below_floor(self) -> bool {
        !(self.0 >= amplitude_floor().0)
    }
}

impl GainDb {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl Add<GainDb> for PowerDbm {
    type Output = PowerDbm;
    fn add(self, rhs: GainDb) -> PowerDbm {
        PowerDbm(self.0 + rhs.0)
    }
}

impl Sub<GainDb> for PowerDbm {
    type Output = PowerDbm;
    fn sub(self, rhs: GainDb) -> PowerDbm {
        PowerDbm(self.0 - rhs.0)
    }
}

impl Sub for PowerDbm {
    type Output = GainDb;
    fn sub(self, rhs: PowerDbm) -> GainDb {
        GainDb(self.0 - rhs.0)
    }
}

impl Add for GainDb {
    type Output = GainDb;
    fn add(self, rhs: GainDb) -> GainDb {
        GainDb(self.0 + rhs.0)
    }
}

impl fmt::Display for PowerDbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} dBm", self.0)
    }
}

/// Phase in radians, normalized to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PhaseRad(f64);

impl PhaseRad {
    pub fn new(rad: f64) -> Self {
        let mut p = rad.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs,
        // and keeps the sign of -0.0
        if p >= TAU || p == 0.0 {
            p = 0.0;
        }
        PhaseRad(p)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `10^((p − 30)/10)` watts.
pub fn dbm_to_watts(p: PowerDbm) -> f64 {
    10f64.powf((p.0 - 30.0) / 10.0)
}

/// Inverse of [`dbm_to_watts`]; zero watts maps to −∞ dBm.
pub fn watts_to_dbm(w: f64) -> PowerDbm {
    PowerDbm(10.0 * w.log10() + 30.0)
}

/// Ratio in dB to linear power ratio.
pub fn db_to_power_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Ratio in dB to linear voltage ratio.
pub fn db_to_voltage_ratio(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}
