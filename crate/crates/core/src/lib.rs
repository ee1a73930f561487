//! Tone-domain behavioral simulation of a millimeter-wave up/down-conversion
//! chain, with the analyses that go with it: two-tone IP3 extraction, spur
//! to EVM budgeting, LO-harmonic frequency planning and 2×2 coupling channels.
//!
//! Signals are sparse lists of tones, not time samples. Every tone carries
//! the mixing path that produced it, so coherent copies of one product add as
//! phasors while unrelated products add in power.

// `!(x >= lo)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod chain;
pub mod config;
pub mod engine;
pub mod exec;
pub mod planner;
pub mod sparams;
pub mod tone;
pub mod units;

pub use chain::{Chain, Scenario};
pub use exec::Execution;
pub use tone::{OriginSignature, Spectrum, SummationMode, Tone};
pub use units::{FrequencyHz, GainDb, PhaseRad, PowerDbm};
