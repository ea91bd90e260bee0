//! Envelope readouts: Rabi period, modulation depth and growth trend, and the
//! empirical phase label built from them.

use serde::{Deserialize, Serialize};

use super::peaks::Envelope;
use crate::error::{Error, Result};
use crate::model::{Channel, PhaseLabel, TimeSeries};

pub const ENVELOPE_MIN_POINTS: usize = 8;

/// An envelope extremum counts only if the envelope moves away from it by at
/// least this fraction of the envelope maximum on both sides.
const MIN_PROMINENCE: f64 = 0.1;

/// Total log-amplitude drift tolerated over a run before the envelope counts
/// as trending.
const LOG_DRIFT_TOL: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiMetrics {
    /// Mean spacing of successive envelope minima; absent with fewer than two.
    pub rabi_period: Option<f64>,
    /// `1 − min/max` of the envelope amplitude, in `[0, 1]`.
    pub modulation_depth: f64,
    /// Least-squares slope of log amplitude against time. With two or more
    /// whole Rabi windows the fit uses the time-averaged RMS amplitude of each
    /// window, otherwise every envelope point.
    pub trend_slope: f64,
    /// Refined `(t, amplitude)` of each envelope minimum.
    pub minima: Vec<(f64, f64)>,
    /// Number of prominent interior maxima.
    pub maxima: usize,
    /// `ln(last / first)` over the envelope.
    pub log_drift: f64,
}

/// Indices of interior local minima of `v` whose prominence is at least
/// `threshold`.
fn prominent_minima(v: &[f64], threshold: f64) -> Vec<usize> {
    let n = v.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if !(v[i] < v[i - 1] && v[i] <= v[i + 1]) {
            i += 1;
            continue;
        }
        // extend across a flat bottom
        let mut j = i;
        while j + 1 < n && v[j + 1] == v[i] {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let mut left_peak = v[i];
        for k in (0..i).rev() {
            if v[k] < v[i] {
                break;
            }
            left_peak = left_peak.max(v[k]);
        }
        let mut right_peak = v[i];
        for &w in &v[j + 1..] {
            if w < v[i] {
                break;
            }
            right_peak = right_peak.max(w);
        }
        if (left_peak - v[i]).min(right_peak - v[i]) >= threshold {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

/// Vertex `(t, f)` of the parabola through three points with arbitrary spacing.
fn parabola_through(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<(f64, f64)> {
    let (t0, f0) = p0;
    let (t1, f1) = p1;
    let (t2, f2) = p2;
    let d01 = (f1 - f0) / (t1 - t0);
    let d12 = (f2 - f1) / (t2 - t1);
    let c = (d12 - d01) / (t2 - t0);
    if !(c > 0.0) {
        return None;
    }
    let b = d01 - c * (t0 + t1);
    let t = -b / (2.0 * c);
    if !(t >= t0 && t <= t2) {
        return None;
    }
    let f = f0 + (t - t0) * (d01 + c * (t - t1));
    Some((t, f))
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mf = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, f) in points {
        sxy += (t - mt) * (f - mf);
        sxx += (t - mt) * (t - mt);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

pub fn rabi_metrics(env: &Envelope) -> Result<RabiMetrics> {
    let pts = &env.points;
    if pts.len() < ENVELOPE_MIN_POINTS {
        return Err(Error::InsufficientData {
            needed: ENVELOPE_MIN_POINTS,
            got: pts.len(),
        });
    }
    let amps: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let max = amps.iter().copied().fold(f64::MIN, f64::max);
    let raw_min = amps.iter().copied().fold(f64::MAX, f64::min);
    let threshold = MIN_PROMINENCE * max;

    let minima_idx = if max > raw_min {
        prominent_minima(&amps, threshold)
    } else {
        Vec::new()
    };
    let negated: Vec<f64> = amps.iter().map(|a| -a).collect();
    let maxima = if max > raw_min {
        prominent_minima(&negated, threshold).len()
    } else {
        0
    };

    // Refine on the squared amplitude, which is smooth through a beat node.
    let minima: Vec<(f64, f64)> = minima_idx
        .iter()
        .map(|&i| {
            let sq = |k: usize| (pts[k].0, pts[k].1 * pts[k].1);
            match parabola_through(sq(i - 1), sq(i), sq(i + 1)) {
                Some((t, f)) => (t, f.max(0.0).sqrt().min(pts[i].1)),
                None => pts[i],
            }
        })
        .collect();

    let rabi_period = (minima.len() >= 2).then(|| {
        (minima[minima.len() - 1].0 - minima[0].0) / (minima.len() - 1) as f64
    });

    let lowest = minima.iter().map(|m| m.1).fold(raw_min, f64::min);
    let modulation_depth = if max > 0.0 {
        (1.0 - lowest / max).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let floor = 1e-12 * max.max(f64::MIN_POSITIVE);
    // Time-averaged squared amplitude between successive refined minima,
    // trapezoidal in time; the squared envelope is smooth through the nodes.
    let windows: Vec<(f64, f64)> = minima_idx
        .windows(2)
        .zip(minima.windows(2))
        .map(|(w, m)| {
            let mut prev = (m[0].0, m[0].1 * m[0].1);
            let mut area = 0.0;
            for &(t, a) in pts[w[0] + 1..w[1]].iter().chain(std::iter::once(&m[1])) {
                let cur = (t, a * a);
                area += 0.5 * (cur.0 - prev.0) * (cur.1 + prev.1);
                prev = cur;
            }
            let msq = area / (m[1].0 - m[0].0);
            (0.5 * (m[0].0 + m[1].0), 0.5 * msq.max(floor * floor).ln())
        })
        .collect();
    let trend_slope = if windows.len() >= 2 {
        least_squares_slope(&windows)
    } else {
        let logs: Vec<(f64, f64)> = pts.iter().map(|&(t, a)| (t, a.max(floor).ln())).collect();
        least_squares_slope(&logs)
    };

    let log_drift = (amps[amps.len() - 1].max(floor) / amps[0].max(floor)).ln();

    Ok(RabiMetrics {
        rabi_period,
        modulation_depth,
        trend_slope,
        minima,
        maxima,
        log_drift,
    })
}

/// Empirical phase label from the two channel envelopes of a run lasting
/// `duration` time units.
///
/// Unbroken: both channels show a Rabi period, modulation depth above 0.5 and
/// a log-trend flatter than `0.2 / duration`. Broken: some channel has no
/// envelope minima, no interior maxima and drifts by more than 0.2 in log
/// amplitude. Anything else is reported as exceptional.
pub fn classify_envelopes(x: &Envelope, y: &Envelope, duration: f64) -> Result<PhaseLabel> {
    let mx = rabi_metrics(x)?;
    let my = rabi_metrics(y)?;
    let slope_tol = LOG_DRIFT_TOL / duration;
    let oscillating = |m: &RabiMetrics| {
        m.rabi_period.is_some() && m.modulation_depth > 0.5 && m.trend_slope.abs() < slope_tol
    };
    let monotone = |m: &RabiMetrics| {
        m.minima.is_empty() && m.maxima == 0 && m.log_drift.abs() > LOG_DRIFT_TOL
    };
    Ok(if oscillating(&mx) && oscillating(&my) {
        PhaseLabel::Unbroken
    } else if monotone(&mx) || monotone(&my) {
        PhaseLabel::Broken
    } else {
        PhaseLabel::Exceptional
    })
}

pub fn classify_dynamics(series: &TimeSeries) -> Result<PhaseLabel> {
    let x = Envelope::of_series(series, Channel::X);
    let y = Envelope::of_series(series, Channel::Y);
    classify_envelopes(&x, &y, series.duration())
}
