//! Quadrature for complex-valued integrands on finite intervals.
//!
//! [`adaptive`] is a globally adaptive 7/15-point Gauss–Kronrod scheme that
//! always bisects the panel with the largest error estimate. [`fixed_panels`]
//! applies an n-point Gauss–Legendre rule to a caller-supplied partition and
//! shares no nodes or logic with the adaptive path.

#![allow(clippy::excessive_precision)] // tables carry their published digits

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};


const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Upper bound on panels held by the adaptive scheme.
pub const MAX_PANELS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    // largest error first; ties go to the leftmost panel
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gauss_kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(centre - dx)? + f(centre + dx)?;
        kronrod += pair * WGK[k];
        if k % 2 == 1 {
            gauss += pair * WG[k / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Ok(Panel { a, b, value, error })
}

/// Integrate `f` over the partition given by `breaks` (strictly increasing,
/// at least two points) to absolute accuracy `tol`.
///
/// Fails with [`Error::Convergence`] if the panel budget runs out or the
/// worst panel can no longer be split in floating point.
pub fn adaptive<F>(mut f: F, breaks: &[f64], tol: f64) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain {
            what: "quadrature partition",
            detail: "needs at least two strictly increasing points".into(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::validation("tolerance", "> 0"));
    }
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        let p = gauss_kronrod(&mut f, w[0], w[1])?;
        total_err += p.error;
        heap.push(p);
    }
    let mut splits = 0usize;
    while !(total_err <= tol) {
        if heap.len() >= MAX_PANELS || !total_err.is_finite() {
            return Err(Error::Convergence { iterations: splits });
        }
        let worst = heap.pop().expect("partition is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::Convergence { iterations: splits });
        }
        let left = gauss_kronrod(&mut f, worst.a, mid)?;
        let right = gauss_kronrod(&mut f, mid, worst.b)?;
        heap.push(left);
        heap.push(right);
        splits += 1;
        // re-sum so the running total does not accumulate cancellation error
        if splits % 64 == 0 {
            total_err = heap.iter().map(|p| p.error).sum();
        } else {
            total_err += left.error + right.error - worst.error;
        }
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    Ok(Estimate {
        value,
        error,
        panels: panels.len(),
    })
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Sum of an `order`-point Gauss–Legendre rule over each panel of `breaks`.
pub fn fixed_panels<F>(mut f: F, breaks: &[f64], order: usize) -> Result<Complex64>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let (nodes, weights) = gauss_legendre(order);
    let mut total = Complex64::new(0.0, 0.0);
    for w in breaks.windows(2) {
        let centre = 0.5 * (w[0] + w[1]);
        let half = 0.5 * (w[1] - w[0]);
        let mut panel = Complex64::new(0.0, 0.0);
        for (x, wt) in nodes.iter().zip(&weights) {
            panel += f(centre + half * x)? * wt;
        }
        total += panel * half;
    }
    Ok(total)
}

/// `[0, 2^-k_min, ..., 1/2, 1, 2, 4, ..., upper]`: panels whose width tracks
/// the distance from the origin.
pub fn geometric_breaks(upper: f64, finest: i32) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut x = 2f64.powi(-finest);
    while x < upper {
        out.push(x);
        x *= 2.0;
    }
    out.push(upper);
    out
}
