//! Phase diagrams over `(ε, a)` or `(ε, g)` grids.
//!
//! Cells are independent and are evaluated on a dedicated rayon pool; results
//! are placed by grid index, so the map does not depend on the worker count.
//! A cell that fails is labelled exceptional and its error is kept in the
//! map's annex.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{classify_dynamics, integrate, Model, SimConfig};
use crate::error::{Error, Result, ValidationError};
use crate::model::{CoupledParams, PhaseLabel};
use crate::spectral::{beat_period, classify_phase, modal_eigenvalues, Tolerances};

/// Largest number of points allowed on one axis.
pub const MAX_AXIS_POINTS: usize = 2048;
/// Rabi periods simulated per dynamical cell.
pub const CELL_RABI_PERIODS: f64 = 4.0;
/// Cap on the simulated time of one dynamical cell.
pub const MAX_CELL_TIME: f64 = 1e4;
/// Growth factor a broken cell is simulated for, `e^{λt} = 10⁶`.
const GROWTH_HORIZON: f64 = 13.815_510_557_964_274;
/// Enough carrier periods for the envelope analysis to have data.
const MIN_CELL_TIME: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    /// Closed-form phase of the linear gain/loss spectrum over `(ε, a)`.
    SpectralEpsA,
    /// Simulated linear gain/loss model over `(ε, a)`.
    DynamicalEpsA,
    /// Simulated energy-transfer model over `(ε, g)`.
    DynamicalEpsG,
}

impl GridMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GridMode::SpectralEpsA => "spectral-eps-a",
            GridMode::DynamicalEpsA => "dynamical-eps-a",
            GridMode::DynamicalEpsG => "dynamical-eps-g",
        }
    }

    /// Name of the non-ε axis.
    pub fn param_name(&self) -> &'static str {
        match self {
            GridMode::DynamicalEpsG => "g",
            _ => "a",
        }
    }

    pub fn is_dynamical(&self) -> bool {
        !matches!(self, GridMode::SpectralEpsA)
    }
}

impl std::str::FromStr for GridMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral-eps-a" => Ok(GridMode::SpectralEpsA),
            "dynamical-eps-a" => Ok(GridMode::DynamicalEpsA),
            "dynamical-eps-g" => Ok(GridMode::DynamicalEpsG),
            _ => Err(Error::validation(
                "mode",
                "one of spectral-eps-a, dynamical-eps-a, dynamical-eps-g",
            )),
        }
    }
}

/// `n` evenly spaced values from `lo` to `hi` inclusive. A single point
/// requires `lo == hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    fn check(&self, field: &'static str, errs: &mut Vec<ValidationError>) {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            errs.push(ValidationError::new(field, "finite"));
        } else if self.n == 1 {
            if self.lo != self.hi {
                errs.push(ValidationError::new(field, "a single point (lo == hi) when n = 1"));
            }
        } else if !(self.lo < self.hi) {
            errs.push(ValidationError::new(field, "ordered with lo < hi"));
        }
        if self.n == 0 || self.n > MAX_AXIS_POINTS {
            errs.push(ValidationError::new(field, format!("sampled at 1..={MAX_AXIS_POINTS} points")));
        }
    }

    pub fn value(&self, k: usize) -> f64 {
        if self.n <= 1 {
            return self.lo;
        }
        if k + 1 == self.n {
            return self.hi;
        }
        self.lo + (self.hi - self.lo) * (k as f64 / (self.n - 1) as f64)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.value(k)).collect()
    }

    pub fn spacing(&self) -> f64 {
        if self.n <= 1 {
            0.0
        } else {
            (self.hi - self.lo) / (self.n - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub epsilon: AxisRange,
    /// Damping `a` or transfer fraction `g`, depending on `mode`.
    pub param: AxisRange,
    pub mode: GridMode,
    /// Base configuration for dynamical cells. `t_end` is replaced per cell
    /// and `model` is implied by `mode`.
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl GridSpec {
    pub fn new(epsilon: AxisRange, param: AxisRange, mode: GridMode) -> Self {
        Self {
            epsilon,
            param,
            mode,
            sim: SimConfig::default(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        self.epsilon.check("epsilon_range", &mut errs);
        self.param.check("param_range", &mut errs);
        if self.epsilon.lo < 0.0 {
            errs.push(ValidationError::new("epsilon_range", "non-negative"));
        }
        if self.param.lo < 0.0 {
            errs.push(ValidationError::new("param_range", "non-negative"));
        }
        if self.mode == GridMode::DynamicalEpsG && self.param.hi >= 1.0 {
            errs.push(ValidationError::new("param_range", "below 1 for transfer fractions"));
        }
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        if self.mode.is_dynamical() {
            self.sim.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.epsilon.n * self.param.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index: ε selects the row.
    pub fn index(&self, eps_k: usize, param_k: usize) -> usize {
        eps_k * self.param.n + param_k
    }

    pub fn coords(&self, index: usize) -> (f64, f64) {
        (
            self.epsilon.value(index / self.param.n),
            self.param.value(index % self.param.n),
        )
    }

    fn params(&self, epsilon: f64, param: f64) -> Result<CoupledParams> {
        match self.mode {
            GridMode::DynamicalEpsG => CoupledParams::new(epsilon, 0.0, param),
            _ => CoupledParams::new(epsilon, param, 0.0),
        }
    }

    /// Simulation settings for one dynamical cell.
    pub fn cell_config(&self, p: &CoupledParams) -> SimConfig {
        let (model, linear) = match self.mode {
            GridMode::DynamicalEpsG => (
                Model::EnergyTransfer,
                CoupledParams::new(p.epsilon(), 0.0, 0.0).ok(),
            ),
            _ => (Model::LinearGainLoss, Some(*p)),
        };
        let t_end = match linear.as_ref().and_then(beat_period) {
            Some(period) => CELL_RABI_PERIODS * period,
            None => {
                let growth = linear
                    .map(|lp| modal_eigenvalues(&lp, &self.tolerances).max_real_part())
                    .unwrap_or(0.0);
                if growth > 0.0 {
                    (GROWTH_HORIZON / growth).min(self.sim.t_end)
                } else {
                    self.sim.t_end
                }
            }
        };
        SimConfig {
            model,
            t_end: t_end.clamp(MIN_CELL_TIME, MAX_CELL_TIME),
            ..self.sim
        }
    }

    /// Phase label at one parameter point.
    pub fn classify_point(&self, epsilon: f64, param: f64) -> Result<PhaseLabel> {
        let p = self.params(epsilon, param)?;
        if !self.mode.is_dynamical() {
            return Ok(classify_phase(&p, &self.tolerances));
        }
        let cfg = self.cell_config(&p);
        let sim = integrate(&cfg, &p)?;
        classify_dynamics(&sim.series)
    }
}

/// A located phase transition in one ε column: the critical parameter lies
/// within `critical_value ± half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub epsilon: f64,
    pub critical_value: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub grid: GridSpec,
    /// Row-major, `grid.epsilon.n × grid.param.n`.
    pub labels: Vec<PhaseLabel>,
    /// Midpoints of every neighbouring pair whose labels straddle the
    /// unbroken region's edge, ordered by ε then parameter.
    pub boundary: Vec<BoundaryPoint>,
    /// Errors of failed cells, keyed by grid index.
    pub errors: BTreeMap<usize, String>,
}

impl PhaseMap {
    pub fn label(&self, eps_k: usize, param_k: usize) -> PhaseLabel {
        self.labels[self.grid.index(eps_k, param_k)]
    }

    pub fn column(&self, eps_k: usize) -> &[PhaseLabel] {
        let n = self.grid.param.n;
        &self.labels[eps_k * n..(eps_k + 1) * n]
    }

    /// Grid brackets `(k, k+1)` in column `eps_k` where exactly one side is
    /// unbroken.
    pub fn transitions(&self, eps_k: usize) -> Vec<usize> {
        self.column(eps_k)
            .windows(2)
            .enumerate()
            .filter(|(_, w)| (w[0] == PhaseLabel::Unbroken) != (w[1] == PhaseLabel::Unbroken))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn count(&self, label: PhaseLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

pub(crate) fn grid_boundary(grid: &GridSpec, labels: &[PhaseLabel]) -> Vec<BoundaryPoint> {
    let n = grid.param.n;
    let mut out = Vec::new();
    for i in 0..grid.epsilon.n {
        let col = &labels[i * n..(i + 1) * n];
        for k in 0..n.saturating_sub(1) {
            if (col[k] == PhaseLabel::Unbroken) != (col[k + 1] == PhaseLabel::Unbroken) {
                let (lo, hi) = (grid.param.value(k), grid.param.value(k + 1));
                out.push(BoundaryPoint {
                    epsilon: grid.epsilon.value(i),
                    critical_value: 0.5 * (lo + hi),
                    half_width: 0.5 * (hi - lo),
                });
            }
        }
    }
    out
}

/// Evaluate every cell of `grid` on `workers` threads (0 picks rayon's
/// default).
pub fn run_sweep(grid: &GridSpec, workers: usize) -> Result<PhaseMap> {
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let cells: Vec<Result<PhaseLabel>> = pool.install(|| {
        (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (eps, param) = grid.coords(idx);
                grid.classify_point(eps, param)
            })
            .collect()
    });
    let mut errors = BTreeMap::new();
    let labels: Vec<PhaseLabel> = cells
        .into_iter()
        .enumerate()
        .map(|(idx, cell)| match cell {
            Ok(label) => label,
            Err(e) => {
                errors.insert(idx, e.to_string());
                PhaseLabel::Exceptional
            }
        })
        .collect();
    let boundary = grid_boundary(grid, &labels);
    Ok(PhaseMap {
        grid: *grid,
        labels,
        boundary,
        errors,
    })
}

/// Bisect every transition of column `eps_k` `iterations` times on the
/// parameter axis. Each halving keeps the half whose ends still disagree on
/// being unbroken.
pub fn refine_column(map: &PhaseMap, eps_k: usize, iterations: u32) -> Result<Vec<BoundaryPoint>> {
    let grid = &map.grid;
    let epsilon = grid.epsilon.value(eps_k);
    let brackets = map.transitions(eps_k);
    if brackets.is_empty() {
        return Err(Error::NoTransition { epsilon });
    }
    brackets
        .into_iter()
        .map(|k| {
            let (mut lo, mut hi) = (grid.param.value(k), grid.param.value(k + 1));
            // the width halves exactly; the endpoints carry rounding
            let half_width = 0.5 * (hi - lo) * 0.5f64.powi(iterations as i32);
            let lo_unbroken = map.label(eps_k, k) == PhaseLabel::Unbroken;
            for _ in 0..iterations {
                let mid = 0.5 * (lo + hi);
                let unbroken = grid.classify_point(epsilon, mid)? == PhaseLabel::Unbroken;
                if unbroken == lo_unbroken {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(BoundaryPoint {
                epsilon,
                critical_value: 0.5 * (lo + hi),
                half_width,
            })
        })
        .collect()
}

/// [`refine_column`] over every ε column; a uniform column is an error.
pub fn refine_boundary(map: &PhaseMap, iterations: u32) -> Result<Vec<BoundaryPoint>> {
    let mut out = Vec::new();
    for i in 0..map.grid.epsilon.n {
        out.extend(refine_column(map, i, iterations)?);
    }
    Ok(out)
}
