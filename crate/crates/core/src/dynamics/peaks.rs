use serde::{Deserialize, Serialize};

use super::{parabola_vertex, velocity_turns};
use crate::model::{Channel, TimeSeries};

/// Peaks with smaller |displacement| are treated as numerical noise.
pub const PEAK_NOISE_FLOOR: f64 = 1e-12;

/// A turning point (amplitude maximum of |displacement|) of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEvent {
    pub t_peak: f64,
    pub channel: Channel,
    pub amplitude: f64,
    /// Sign of the displacement at the peak, ±1.
    pub sign: i8,
}

/// Locate turning points of `channel` in a sampled trajectory.
///
/// A peak lies between two samples whose velocities differ in sign. Its time
/// and amplitude come from a parabola through the three samples centred on
/// whichever of the pair has the larger |displacement|. Peaks closer than
/// ten sample intervals to the previous one are dropped.
pub fn detect_peaks(series: &TimeSeries, channel: Channel) -> Vec<PeakEvent> {
    let samples = series.samples();
    let n = samples.len();
    let mut peaks: Vec<PeakEvent> = Vec::new();
    if n < 3 {
        return peaks;
    }
    let h = series.dt();
    let disp = |k: usize| samples[k].1.displacement(channel);
    let vel = |k: usize| samples[k].1.velocity(channel);

    for j in 0..n - 1 {
        if !velocity_turns(vel(j), vel(j + 1)) {
            continue;
        }
        let centre = if disp(j).abs() >= disp(j + 1).abs() { j } else { j + 1 };
        let centre = centre.clamp(1, n - 2);
        let (tau, value) = parabola_vertex(disp(centre - 1), disp(centre), disp(centre + 1), h);
        if value.abs() <= PEAK_NOISE_FLOOR {
            continue;
        }
        let t_peak = samples[centre].0 + tau;
        if let Some(last) = peaks.last() {
            if t_peak - last.t_peak < 10.0 * h {
                continue;
            }
        }
        peaks.push(PeakEvent {
            t_peak,
            channel,
            amplitude: value.abs(),
            sign: if value >= 0.0 { 1 } else { -1 },
        });
    }
    peaks
}

/// Successive |peak| amplitudes of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub channel: Channel,
    /// `(t_peak, amplitude)` with strictly increasing times.
    pub points: Vec<(f64, f64)>,
}

impl Envelope {
    pub fn from_peaks(channel: Channel, peaks: &[PeakEvent]) -> Self {
        let mut points: Vec<(f64, f64)> = Vec::with_capacity(peaks.len());
        for pk in peaks.iter().filter(|pk| pk.channel == channel) {
            if points.last().is_none_or(|&(t, _)| pk.t_peak > t) {
                points.push((pk.t_peak, pk.amplitude));
            }
        }
        Self { channel, points }
    }

    pub fn of_series(series: &TimeSeries, channel: Channel) -> Self {
        Self::from_peaks(channel, &detect_peaks(series, channel))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
