//! Fixed-step RK4 integration of the three oscillator models.
//!
//! * `Lossless`: `x'' = −x − εy`, `y'' = −y − εx`.
//! * `LinearGainLoss`: velocity damping `−a·p` on x and undamping `+a·q` on y.
//! * `EnergyTransfer`: the lossless equations plus discrete events. At every
//!   turning point of x a fraction `g` of its peak energy is removed by scaling
//!   `(x, p)` by `√(1 − g)`; the packet is queued and deposited at the next
//!   turning point of y by scaling `(y, q)` so that its peak energy grows by
//!   exactly the packet.
//!
//! Events are located by a sign change of the channel's velocity over one
//! step, timed by a parabola through the three surrounding states, and applied
//! at whichever step boundary is nearer the interpolated peak. Integration
//! restarts from the modified state.

mod peaks;
mod rabi;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use peaks::{detect_peaks, Envelope, PeakEvent, PEAK_NOISE_FLOOR};
pub use rabi::{
    classify_dynamics, classify_envelopes, rabi_metrics, RabiMetrics, ENVELOPE_MIN_POINTS,
};

use crate::error::{Error, Result};
use crate::model::{CoupledParams, StateVector, TimeSeries, TransferEvent, TransferLog};

/// Largest step accepted without `allow_large_step`.
pub const MAX_DEFAULT_DT: f64 = 0.01;
/// Upper bound on `t_end / dt`.
pub const MAX_STEPS: f64 = 1e8;
/// Any state component beyond this aborts the run.
pub const BLOW_UP_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Lossless,
    LinearGainLoss,
    EnergyTransfer,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Lossless => "lossless",
            Model::LinearGainLoss => "linear-gain-loss",
            Model::EnergyTransfer => "energy-transfer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub initial: StateVector,
    pub model: Model,
    /// Record every k-th step.
    pub sample_stride: usize,
    #[serde(default)]
    pub allow_large_step: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.001,
            t_end: 400.0,
            initial: StateVector {
                x: 1.0,
                p: 0.0,
                y: 0.0,
                q: 0.0,
            },
            model: Model::Lossless,
            sample_stride: 10,
            allow_large_step: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            problems.push(format!("dt must be > 0, got {}", self.dt));
        } else if self.dt > MAX_DEFAULT_DT && !self.allow_large_step {
            problems.push(format!(
                "dt = {} exceeds {MAX_DEFAULT_DT} (set allow_large_step to override)",
                self.dt
            ));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            problems.push(format!("t_end must be > 0, got {}", self.t_end));
        }
        if self.dt > 0.0 && self.t_end / self.dt > MAX_STEPS {
            problems.push(format!("t_end / dt exceeds {MAX_STEPS:e}"));
        }
        if self.sample_stride == 0 {
            problems.push("sample_stride must be positive".into());
        }
        if !self.initial.is_finite() {
            problems.push("initial state must be finite".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Number of steps and the step actually used: the requested step is
    /// shrunk so that a whole number of steps lands on `t_end`.
    pub fn steps(&self) -> (usize, f64) {
        let n = (self.t_end / self.dt).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

/// Result of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub series: TimeSeries,
    /// Present for `EnergyTransfer` runs.
    pub transfer_log: Option<TransferLog>,
    pub final_state: StateVector,
}

/// Right-hand side of the first-order system for `model`.
pub fn derivative(s: &StateVector, p: &CoupledParams, model: Model) -> StateVector {
    let eps = p.epsilon();
    let a = match model {
        Model::LinearGainLoss => p.damping(),
        Model::Lossless | Model::EnergyTransfer => 0.0,
    };
    StateVector {
        x: s.p,
        p: -s.x - eps * s.y - a * s.p,
        y: s.q,
        q: -s.y - eps * s.x + a * s.q,
    }
}

fn axpy(s: &StateVector, h: f64, k: &StateVector) -> StateVector {
    StateVector {
        x: s.x + h * k.x,
        p: s.p + h * k.p,
        y: s.y + h * k.y,
        q: s.q + h * k.q,
    }
}

/// One classical fourth-order Runge–Kutta step of size `h` (may be negative).
pub fn rk4_step(s: &StateVector, h: f64, p: &CoupledParams, model: Model) -> StateVector {
    let k1 = derivative(s, p, model);
    let k2 = derivative(&axpy(s, 0.5 * h, &k1), p, model);
    let k3 = derivative(&axpy(s, 0.5 * h, &k2), p, model);
    let k4 = derivative(&axpy(s, h, &k3), p, model);
    StateVector {
        x: s.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        p: s.p + h / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p),
        y: s.y + h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
        q: s.q + h / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q),
    }
}

/// True when the velocity changes sign going from `a` to `b`. A start at
/// exactly zero does not count.
pub(crate) fn velocity_turns(a: f64, b: f64) -> bool {
    (a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0)
}

/// Vertex of the parabola through `(−h, f0)`, `(0, f1)`, `(h, f2)`, returned
/// as `(offset from the middle sample, value)`.
pub(crate) fn parabola_vertex(f0: f64, f1: f64, f2: f64, h: f64) -> (f64, f64) {
    let b = (f2 - f0) / (2.0 * h);
    let c = (f0 - 2.0 * f1 + f2) / (2.0 * h * h);
    if c == 0.0 || !c.is_finite() {
        return (0.0, f1);
    }
    let tau = (-b / (2.0 * c)).clamp(-h, h);
    (tau, f1 + b * tau + c * tau * tau)
}

struct TransferState {
    g: f64,
    scale_x: f64,
    log: TransferLog,
    queue: VecDeque<usize>,
    last_x_peak: f64,
    last_y_peak: f64,
}

enum Apply {
    Current,
    Next,
}

pub fn integrate(cfg: &SimConfig, p: &CoupledParams) -> Result<Simulation> {
    cfg.validate()?;
    let (n_steps, h) = cfg.steps();
    let model = cfg.model;
    let stride = cfg.sample_stride;

    let mut series = TimeSeries::new(h * stride as f64);
    let mut cur = cfg.initial;
    let mut prev = rk4_step(&cur, -h, p, model);

    let mut transfer = (model == Model::EnergyTransfer).then(|| TransferState {
        g: p.transfer_fraction(),
        scale_x: (1.0 - p.transfer_fraction()).sqrt(),
        log: TransferLog::default(),
        queue: VecDeque::new(),
        last_x_peak: f64::NEG_INFINITY,
        last_y_peak: f64::NEG_INFINITY,
    });
    let min_separation = 10.0 * h;

    for i in 0..n_steps {
        let t = i as f64 * h;
        let mut next = rk4_step(&cur, h, p, model);

        if let Some(tr) = transfer.as_mut() {
            if velocity_turns(cur.p, next.p) && t - tr.last_x_peak >= min_separation {
                let (tau, xv) = parabola_vertex(prev.x, cur.x, next.x, h);
                if xv.abs() > PEAK_NOISE_FLOOR {
                    let t_peak = t + tau;
                    let before = xv.abs();
                    tr.log.events.push(TransferEvent {
                        t_extract: t_peak,
                        x_peak_before: before,
                        x_peak_after: tr.scale_x * before,
                        packet_energy: tr.g * 0.5 * before * before,
                        t_deposit: None,
                        y_peak_before: None,
                        y_peak_after: None,
                        deposited_energy: None,
                    });
                    tr.queue.push_back(tr.log.events.len() - 1);
                    tr.last_x_peak = t_peak;
                    if tr.scale_x != 1.0 {
                        let at = if tau <= 0.5 * h { Apply::Current } else { Apply::Next };
                        match at {
                            Apply::Current => {
                                cur.x *= tr.scale_x;
                                cur.p *= tr.scale_x;
                                next = rk4_step(&cur, h, p, model);
                            }
                            Apply::Next => {
                                next.x *= tr.scale_x;
                                next.p *= tr.scale_x;
                            }
                        }
                    }
                }
            }

            if velocity_turns(cur.q, next.q) && t - tr.last_y_peak >= min_separation {
                let (tau, yv) = parabola_vertex(prev.y, cur.y, next.y, h);
                let t_peak = t + tau;
                if yv.abs() > PEAK_NOISE_FLOOR {
                    tr.last_y_peak = t_peak;
                    let ready = tr
                        .queue
                        .front()
                        .is_some_and(|&k| tr.log.events[k].t_extract < t_peak);
                    if ready {
                        let k = tr.queue.pop_front().expect("queue checked non-empty");
                        let event = &mut tr.log.events[k];
                        let before = yv.abs();
                        let packet = event.packet_energy;
                        let after = (before * before + 2.0 * packet).sqrt();
                        event.t_deposit = Some(t_peak);
                        event.y_peak_before = Some(before);
                        event.y_peak_after = Some(after);
                        event.deposited_energy = Some(packet);
                        let factor = after / before;
                        if packet != 0.0 {
                            match if tau <= 0.5 * h { Apply::Current } else { Apply::Next } {
                                Apply::Current => {
                                    cur.y *= factor;
                                    cur.q *= factor;
                                    next = rk4_step(&cur, h, p, model);
                                }
                                Apply::Next => {
                                    next.y *= factor;
                                    next.q *= factor;
                                }
                            }
                        }
                    }
                }
            }
        }

        if i % stride == 0 {
            series.push(t, cur);
        }
        if !(next.max_abs() <= BLOW_UP_LIMIT) {
            return Err(Error::StepSize {
                t: t + h,
                limit: BLOW_UP_LIMIT,
            });
        }
        prev = cur;
        cur = next;
    }
    if n_steps % stride == 0 {
        series.push(n_steps as f64 * h, cur);
    }

    Ok(Simulation {
        series,
        transfer_log: transfer.map(|tr| tr.log),
        final_state: cur,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(eps: f64, a: f64, g: f64) -> CoupledParams {
        CoupledParams::new(eps, a, g).unwrap()
    }

    fn state(x: f64, p: f64, y: f64, q: f64) -> StateVector {
        StateVector { x, p, y, q }
    }

    #[test]
    fn derivative_examples() {
        let d = derivative(&state(1.0, 0.0, 0.0, 0.0), &params(0.0, 0.0, 0.0), Model::Lossless);
        assert_eq!(d, state(0.0, -1.0, 0.0, 0.0));
        let d = derivative(&state(1.0, 0.0, 1.0, 0.0), &params(0.075, 0.0, 0.0), Model::Lossless);
        assert_eq!(d, state(0.0, -1.075, 0.0, -1.075));
        let d = derivative(
            &state(0.0, 1.0, 0.0, 1.0),
            &params(0.0, 0.1, 0.0),
            Model::LinearGainLoss,
        );
        assert_eq!(d, state(1.0, -0.1, 1.0, 0.1));
    }

    #[test]
    fn damping_ignored_outside_linear_model() {
        let s = state(0.0, 1.0, 0.0, 1.0);
        let p = params(0.0, 0.1, 0.0);
        assert_eq!(derivative(&s, &p, Model::Lossless), derivative(&s, &p, Model::EnergyTransfer));
        assert_eq!(derivative(&s, &p, Model::Lossless).p, -0.0);
    }

    #[test]
    fn free_cosine_over_one_period() {
        let cfg = SimConfig {
            dt: 0.001,
            t_end: 2.0 * PI,
            sample_stride: 1,
            ..SimConfig::default()
        };
        let sim = integrate(&cfg, &params(0.0, 0.0, 0.0)).unwrap();
        assert!((sim.final_state.x - 1.0).abs() < 1e-9);
        assert!(sim.series.samples().iter().all(|(_, s)| s.y == 0.0 && s.q == 0.0));
        let (t_last, _) = *sim.series.samples().last().unwrap();
        assert!((t_last - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn config_guards() {
        let p = params(0.1, 0.0, 0.0);
        let big = SimConfig { dt: 0.05, ..SimConfig::default() };
        assert!(matches!(integrate(&big, &p), Err(Error::Config(_))));
        let ok = SimConfig { dt: 0.05, allow_large_step: true, t_end: 1.0, ..SimConfig::default() };
        assert!(integrate(&ok, &p).is_ok());
        let long = SimConfig { t_end: 1e6, dt: 0.001, ..SimConfig::default() };
        assert!(long.validate().is_err());
        let zero_stride = SimConfig { sample_stride: 0, ..SimConfig::default() };
        assert!(zero_stride.validate().is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let cfg = SimConfig {
            model: Model::LinearGainLoss,
            t_end: 2000.0,
            dt: 0.01,
            ..SimConfig::default()
        };
        let err = integrate(&cfg, &params(0.01, 0.5, 0.0)).unwrap_err();
        assert!(matches!(err, Error::StepSize { .. }));
    }

    #[test]
    fn series_spacing_is_uniform() {
        let cfg = SimConfig { t_end: 10.0, sample_stride: 7, ..SimConfig::default() };
        let sim = integrate(&cfg, &params(0.1, 0.0, 0.0)).unwrap();
        let dt = sim.series.dt();
        for (k, (t, _)) in sim.series.samples().iter().enumerate() {
            assert!((t - k as f64 * dt).abs() < 1e-9);
        }
        assert_eq!(sim.series.energies().len(), sim.series.len());
    }

    #[test]
    fn first_extraction_waits_for_a_turning_point() {
        let cfg = SimConfig { t_end: 20.0, model: Model::EnergyTransfer, ..SimConfig::default() };
        let sim = integrate(&cfg, &params(0.01, 0.0, 0.3)).unwrap();
        let log = sim.transfer_log.unwrap();
        // x starts at rest at its maximum, so the first event is half a period in
        let first = log.events[0];
        assert!((first.t_extract - PI).abs() < 0.01, "{}", first.t_extract);
        assert!((first.x_peak_after / first.x_peak_before - 0.7f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_fraction_matches_lossless_bitwise() {
        let base = SimConfig { t_end: 200.0, ..SimConfig::default() };
        let p = params(0.075, 0.0, 0.0);
        let a = integrate(&base, &p).unwrap();
        let b = integrate(&SimConfig { model: Model::EnergyTransfer, ..base }, &p).unwrap();
        assert_eq!(a.series, b.series);
        let log = b.transfer_log.unwrap();
        assert!(log.events.iter().all(|e| e.packet_energy == 0.0));
    }

    #[test]
    fn vertex_of_cosine() {
        let h = 0.01f64;
        let t0 = 0.003f64;
        let (tau, v) = parabola_vertex((t0 - h).cos(), t0.cos(), (t0 + h).cos(), h);
        assert!((t0 + tau).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-8);
    }
}
