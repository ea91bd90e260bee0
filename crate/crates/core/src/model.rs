//! Domain types shared by the spectral, dynamics and sweep modules.
//!
//! All quantities are dimensionless: unit mass and unit natural frequency for
//! both oscillators. Every type here is an immutable value once constructed.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError};
use crate::format::fmt_f64;

/// Phase-space point `(x, p, y, q)`: displacement and velocity of the lossy
/// oscillator followed by those of the gain oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector {
    pub x: f64,
    pub p: f64,
    pub y: f64,
    pub q: f64,
}

impl StateVector {
    pub fn new(x: f64, p: f64, y: f64, q: f64) -> Result<Self> {
        let s = Self { x, p, y, q };
        let mut errors = Vec::new();
        for (name, v) in [("x", x), ("p", p), ("y", y), ("q", q)] {
            if !v.is_finite() {
                errors.push(ValidationError::new(name, "finite"));
            }
        }
        if errors.is_empty() {
            Ok(s)
        } else {
            Err(Error::Validation(errors))
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.p, self.y, self.q]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            x: a[0],
            p: a[1],
            y: a[2],
            q: a[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Decoupled energy of the lossy oscillator, `(p² + x²) / 2`.
    pub fn energy_x(&self) -> f64 {
        0.5 * (self.p * self.p + self.x * self.x)
    }

    /// Decoupled energy of the gain oscillator, `(q² + y²) / 2`.
    pub fn energy_y(&self) -> f64 {
        0.5 * (self.q * self.q + self.y * self.y)
    }

    /// Total energy of the lossless coupled pair including the `εxy` term.
    pub fn hamiltonian(&self, epsilon: f64) -> f64 {
        self.energy_x() + self.energy_y() + epsilon * self.x * self.y
    }

    pub fn displacement(&self, channel: Channel) -> f64 {
        match channel {
            Channel::X => self.x,
            Channel::Y => self.y,
        }
    }

    pub fn velocity(&self, channel: Channel) -> f64 {
        match channel {
            Channel::X => self.p,
            Channel::Y => self.q,
        }
    }
}

/// One of the two oscillators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    X,
    Y,
}

/// Unvalidated coupled-oscillator parameters, as read from flags or files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawCoupledParams {
    pub epsilon: f64,
    pub damping: f64,
    pub transfer_fraction: f64,
}

/// Coupling `ε`, gain/loss rate `a` and per-peak transfer fraction `g` for the
/// mechanical models.
///
/// The type admits `ε ≥ 1`; operations that need `ε < 1` check it themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoupledParams", into = "RawCoupledParams")]
pub struct CoupledParams {
    epsilon: f64,
    damping: f64,
    transfer_fraction: f64,
}

impl CoupledParams {
    pub fn new(epsilon: f64, damping: f64, transfer_fraction: f64) -> Result<Self> {
        validate_params(RawCoupledParams {
            epsilon,
            damping,
            transfer_fraction,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn transfer_fraction(&self) -> f64 {
        self.transfer_fraction
    }

    /// Flat JSON object with every double rendered to 17 significant digits.
    pub fn to_manifest_json(&self) -> String {
        format!(
            "{{\"epsilon\": {}, \"damping\": {}, \"transfer_fraction\": {}}}",
            fmt_f64(self.epsilon),
            fmt_f64(self.damping),
            fmt_f64(self.transfer_fraction)
        )
    }

    pub fn from_manifest_json(s: &str) -> Result<Self> {
        let raw: RawCoupledParams =
            serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        validate_params(raw)
    }
}

impl TryFrom<RawCoupledParams> for CoupledParams {
    type Error = Error;

    fn try_from(raw: RawCoupledParams) -> Result<Self> {
        validate_params(raw)
    }
}

impl From<CoupledParams> for RawCoupledParams {
    fn from(p: CoupledParams) -> Self {
        RawCoupledParams {
            epsilon: p.epsilon,
            damping: p.damping,
            transfer_fraction: p.transfer_fraction,
        }
    }
}

/// Check every bound on `raw` and report all violations at once.
pub fn validate_params(raw: RawCoupledParams) -> Result<CoupledParams> {
    let mut errors = Vec::new();
    if !(raw.epsilon.is_finite() && raw.epsilon >= 0.0) {
        errors.push(ValidationError::new("epsilon", ">= 0"));
    }
    if !(raw.damping.is_finite() && raw.damping >= 0.0) {
        errors.push(ValidationError::new("damping", ">= 0"));
    }
    if !(raw.transfer_fraction.is_finite() && raw.transfer_fraction >= 0.0) {
        errors.push(ValidationError::new("transfer_fraction", ">= 0"));
    } else if raw.transfer_fraction >= 1.0 {
        errors.push(ValidationError::new("transfer_fraction", "< 1"));
    }
    if errors.is_empty() {
        Ok(CoupledParams {
            epsilon: raw.epsilon,
            damping: raw.damping,
            transfer_fraction: raw.transfer_fraction,
        })
    } else {
        Err(Error::Validation(errors))
    }
}

/// The 2×2 source/sink Hamiltonian `[[a e^{iθ}, g], [g, a e^{-iθ}]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBoxParams {
    magnitude: f64,
    theta: f64,
    coupling: f64,
}

impl TwoBoxParams {
    pub fn new(magnitude: f64, theta: f64, coupling: f64) -> Result<Self> {
        let mut errors = Vec::new();
        if !(magnitude.is_finite() && magnitude > 0.0) {
            errors.push(ValidationError::new("magnitude", "> 0"));
        }
        if !(theta.is_finite() && theta > 0.0 && theta < PI) {
            errors.push(ValidationError::new("theta", "in (0, pi)"));
        }
        if !coupling.is_finite() {
            errors.push(ValidationError::new("coupling", "finite"));
        }
        if errors.is_empty() {
            Ok(Self {
                magnitude,
                theta,
                coupling,
            })
        } else {
            Err(Error::Validation(errors))
        }
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseLabel {
    Unbroken,
    Broken,
    /// Within the tolerance band around the phase boundary.
    Exceptional,
}

impl PhaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::Unbroken => "unbroken",
            PhaseLabel::Broken => "broken",
            PhaseLabel::Exceptional => "exceptional",
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "unbroken" => Ok(PhaseLabel::Unbroken),
            "broken" => Ok(PhaseLabel::Broken),
            "exceptional" => Ok(PhaseLabel::Exceptional),
            other => Err(Error::Config(format!("unknown phase label {other:?}"))),
        }
    }
}

/// Uniformly sampled trajectory with per-sample decoupled energies.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dt: f64,
    samples: Vec<(f64, StateVector)>,
    energies: Vec<(f64, f64, f64)>,
}

impl TimeSeries {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            samples: Vec::new(),
            energies: Vec::new(),
        }
    }

    /// Rebuild a series from stored samples, checking uniform spacing.
    pub fn from_samples(samples: Vec<(f64, StateVector)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Config(
                "a time series needs at least two samples".into(),
            ));
        }
        let t0 = samples[0].0;
        let dt = (samples[samples.len() - 1].0 - t0) / (samples.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Config("timestamps must increase".into()));
        }
        for (k, (t, s)) in samples.iter().enumerate() {
            let expected = t0 + k as f64 * dt;
            if (t - expected).abs() > 1e-6 * dt {
                return Err(Error::Config(format!(
                    "sample {k} at t = {t} breaks uniform spacing dt = {dt}"
                )));
            }
            if !s.is_finite() {
                return Err(Error::Config(format!("sample {k} is not finite")));
            }
        }
        let mut series = Self::new(dt);
        for (t, s) in samples {
            series.push(t, s);
        }
        Ok(series)
    }

    pub(crate) fn push(&mut self, t: f64, state: StateVector) {
        self.samples.push((t, state));
        self.energies.push((t, state.energy_x(), state.energy_y()));
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[(f64, StateVector)] {
        &self.samples
    }

    pub fn energies(&self) -> &[(f64, f64, f64)] {
        &self.energies
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|(t, _)| *t)
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.0 - a.0,
            _ => 0.0,
        }
    }
}

/// One packet of energy moved from the lossy to the gain oscillator.
///
/// The deposit fields stay `None` while the packet is still queued.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferEvent {
    pub t_extract: f64,
    pub x_peak_before: f64,
    pub x_peak_after: f64,
    pub packet_energy: f64,
    pub t_deposit: Option<f64>,
    pub y_peak_before: Option<f64>,
    pub y_peak_after: Option<f64>,
    /// Energy applied at the deposit; always the stored `packet_energy`.
    pub deposited_energy: Option<f64>,
}

impl TransferEvent {
    pub fn is_complete(&self) -> bool {
        self.t_deposit.is_some()
    }
}

/// Ledger of transfer events in extraction order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferLog {
    pub events: Vec<TransferEvent>,
}

impl TransferLog {
    pub fn completed(&self) -> impl Iterator<Item = &TransferEvent> {
        self.events.iter().filter(|e| e.is_complete())
    }

    pub fn pending(&self) -> usize {
        self.events.iter().filter(|e| !e.is_complete()).count()
    }

    /// Sum of packet energies over completed events.
    pub fn total_extracted(&self) -> f64 {
        self.completed().map(|e| e.packet_energy).sum()
    }

    /// Sum of energies applied at deposits.
    pub fn total_deposited(&self) -> f64 {
        self.completed().filter_map(|e| e.deposited_energy).sum()
    }
}
