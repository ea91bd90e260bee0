//! Eigenvalue analysis of the two gain/loss models.
//!
//! Two problems live here. The 2×2 source/sink Hamiltonian
//! `[[a e^{iθ}, g], [g, a e^{-iθ}]]` has eigenvalues `a cos θ ± √(g² − a² sin²θ)`,
//! real once the coupling exceeds `|a sin θ|`. The first-order form of the
//! damped/undamped oscillator pair has the even characteristic polynomial
//! `E⁴ + (2 − a²)E² + 1 − ε²`, solved in closed form as a quadratic in `E²`.
//!
//! [`quartic_root_oracle`] and [`quartic_roots_aberth`] are independent routes
//! to the same roots, used to cross-check [`modal_eigenvalues`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{CoupledParams, PhaseLabel, TwoBoxParams};

/// Widths of the bands that absorb floating-point error around phase
/// boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Band on `g² − a² sin²θ` for the two-box model.
    pub tol_ep: f64,
    /// Band on the quartic boundary margins.
    pub tol_boundary: f64,
    /// Imaginary-axis test on eigenvalues.
    pub tol_real: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_ep: 1e-9,
            tol_boundary: 1e-9,
            tol_real: 1e-9,
        }
    }
}

/// Coefficients of `c4 E⁴ + c2 E² + c0`; odd powers are identically zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticCoefficients {
    pub c4: f64,
    pub c2: f64,
    pub c0: f64,
}

impl QuarticCoefficients {
    pub fn new(c2: f64, c0: f64) -> Self {
        Self { c4: 1.0, c2, c0 }
    }

    pub fn eval(&self, e: Complex64) -> Complex64 {
        let e2 = e * e;
        (e2 * self.c4 + self.c2) * e2 + self.c0
    }

    fn eval_derivative(&self, e: Complex64) -> Complex64 {
        e * (e * e * (4.0 * self.c4) + 2.0 * self.c2)
    }

    /// Scale used for residual checks: `max(1, |c2|, |c0|)`.
    pub fn scale(&self) -> f64 {
        1f64.max(self.c2.abs()).max(self.c0.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoBoxSpectrum {
    pub eigenvalues: [Complex64; 2],
    pub phase: PhaseLabel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalSpectrum {
    /// Ordered `[+√u₊, −√u₊, +√u₋, −√u₋]` with `u± = (a² − 2 ± √Δ)/2`.
    pub eigenvalues: [Complex64; 4],
    pub phase: PhaseLabel,
    /// Signed margin to the phase boundary; negative inside the unbroken region.
    pub boundary_distance: f64,
}

impl ModalSpectrum {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, e| m.max(e.re.abs()))
    }

    /// Report object `{"eigenvalues": [[re, im]; 4], "phase": .., "boundary_distance": ..}`.
    pub fn to_json(&self) -> serde_json::Value {
        let eigs: Vec<[f64; 2]> = self.eigenvalues.iter().map(|e| [e.re, e.im]).collect();
        json!({
            "eigenvalues": eigs,
            "phase": self.phase.as_str(),
            "boundary_distance": self.boundary_distance,
        })
    }
}

/// Principal square root with negative reals sent to `+i√|v|`, whatever the
/// sign of a zero imaginary part.
pub fn principal_sqrt(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        if z.re >= 0.0 {
            Complex64::new(z.re.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-z.re).sqrt())
        }
    } else {
        z.sqrt()
    }
}

fn sqrt_real(v: f64) -> Complex64 {
    principal_sqrt(Complex64::new(v, 0.0))
}

fn label_from_margin(margin: f64, band: f64) -> PhaseLabel {
    // margin > 0 means the reality condition holds
    if margin.abs() <= band {
        PhaseLabel::Exceptional
    } else if margin > 0.0 {
        PhaseLabel::Unbroken
    } else {
        PhaseLabel::Broken
    }
}

/// `g² − a² sin²θ`, positive when the two-box eigenvalues are real.
pub fn two_box_discriminant(h: &TwoBoxParams) -> f64 {
    let s = (h.magnitude() * h.theta().sin()).abs();
    let g = h.coupling().abs();
    (g - s) * (g + s)
}

pub fn two_box_eigenvalues(h: &TwoBoxParams, tol: &Tolerances) -> TwoBoxSpectrum {
    let d = two_box_discriminant(h);
    let centre = Complex64::new(h.magnitude() * h.theta().cos(), 0.0);
    let r = sqrt_real(d);
    TwoBoxSpectrum {
        eigenvalues: [centre + r, centre - r],
        phase: label_from_margin(d, tol.tol_ep),
    }
}

/// Coupling at which the two-box eigenvalues coalesce, `|a sin θ|`.
pub fn two_box_critical_coupling(h: &TwoBoxParams) -> f64 {
    (h.magnitude() * h.theta().sin()).abs()
}

pub fn characteristic_coefficients(p: &CoupledParams) -> QuarticCoefficients {
    let a = p.damping();
    let e = p.epsilon();
    QuarticCoefficients::new(2.0 - a * a, 1.0 - e * e)
}

/// `a⁴ − 4a² + 4ε²`, the discriminant of the quadratic in `E²`.
pub fn modal_discriminant(p: &CoupledParams) -> f64 {
    let a2 = p.damping() * p.damping();
    let e = p.epsilon();
    a2 * (a2 - 4.0) + 4.0 * e * e
}

/// Signed distance to the unbroken/broken boundary.
///
/// Inside the unbroken region both `Δ = a⁴ − 4a² + 4ε² > 0` and
/// `a² − 2 + √Δ < 0`; the distance is `max(−Δ, a² − 2 + √Δ)` (or `−Δ` when
/// `Δ < 0`), so it is negative exactly where both conditions hold.
pub fn boundary_distance(p: &CoupledParams) -> f64 {
    let disc = modal_discriminant(p);
    if disc < 0.0 {
        return -disc;
    }
    let a2 = p.damping() * p.damping();
    let upper = a2 - 2.0 + disc.sqrt();
    (-disc).max(upper)
}

pub fn classify_phase(p: &CoupledParams, tol: &Tolerances) -> PhaseLabel {
    label_from_margin(-boundary_distance(p), tol.tol_boundary)
}

pub fn modal_eigenvalues(p: &CoupledParams, tol: &Tolerances) -> ModalSpectrum {
    let a2 = p.damping() * p.damping();
    let s = sqrt_real(modal_discriminant(p));
    let base = Complex64::new(a2 - 2.0, 0.0);
    let u_plus = (base + s) * 0.5;
    let u_minus = (base - s) * 0.5;
    let r_plus = principal_sqrt(u_plus);
    let r_minus = principal_sqrt(u_minus);
    ModalSpectrum {
        eigenvalues: [r_plus, -r_plus, r_minus, -r_minus],
        phase: classify_phase(p, tol),
        boundary_distance: boundary_distance(p),
    }
}

/// Period of the slow energy exchange, `2π / |ω₁ − ω₂|`, for parameters whose
/// spectrum is purely imaginary with two distinct frequencies.
pub fn beat_period(p: &CoupledParams) -> Option<f64> {
    let disc = modal_discriminant(p);
    if disc <= 0.0 {
        return None;
    }
    let a2 = p.damping() * p.damping();
    let s = disc.sqrt();
    let u_plus = 0.5 * (a2 - 2.0 + s);
    let u_minus = 0.5 * (a2 - 2.0 - s);
    if u_plus >= 0.0 {
        return None;
    }
    let gap = (-u_minus).sqrt() - (-u_plus).sqrt();
    (gap > 0.0).then(|| 2.0 * PI / gap)
}

/// Largest damping that keeps the spectrum imaginary at coupling `ε`:
/// `√(2(1 − √(1 − ε²)))`, evaluated as `ε √(2 / (1 + √(1 − ε²)))` to avoid
/// cancellation at small `ε`.
pub fn critical_damping(epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && (0.0..1.0).contains(&epsilon)) {
        return Err(Error::Domain {
            what: "epsilon",
            detail: format!("critical damping needs 0 <= epsilon < 1, got {epsilon}"),
        });
    }
    let root = (1.0 - epsilon * epsilon).sqrt();
    Ok(epsilon * (2.0 / (1.0 + root)).sqrt())
}

/// Roots of `E⁴ + c2 E² + c0` via the cancellation-free quadratic formula in
/// `u = E²`: the larger-magnitude root comes from `q = −(c2 + sgn(c2)√D)/2`
/// and the other from Vieta, `c0 / q`.
pub fn quartic_root_oracle(c: &QuarticCoefficients) -> Result<[Complex64; 4]> {
    if c.c4 != 1.0 {
        return Err(Error::Domain {
            what: "quartic coefficients",
            detail: format!("leading coefficient must be 1, got {}", c.c4),
        });
    }
    // fused multiply-add keeps c2² exact before the subtraction
    let d = c.c2.mul_add(c.c2, -4.0 * c.c0);
    let (u1, u2) = if d >= 0.0 {
        let r = d.sqrt();
        let sign = if c.c2 >= 0.0 { 1.0 } else { -1.0 };
        let q = -0.5 * (c.c2 + sign * r);
        if q == 0.0 {
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        } else {
            (Complex64::new(q, 0.0), Complex64::new(c.c0 / q, 0.0))
        }
    } else {
        let re = -0.5 * c.c2;
        let im = 0.5 * (-d).sqrt();
        (Complex64::new(re, im), Complex64::new(re, -im))
    };
    let r1 = principal_sqrt(u1);
    let r2 = principal_sqrt(u2);
    Ok([r1, -r1, r2, -r2])
}

/// Simultaneous (Aberth–Ehrlich) iteration on the full quartic.
pub fn quartic_roots_aberth(c: &QuarticCoefficients, max_iter: usize) -> Result<[Complex64; 4]> {
    let scale = c.scale();
    // Cauchy bound on root modulus
    let radius = 1.0 + (c.c2.abs().max(c.c0.abs()) / c.c4.abs());
    let mut z: [Complex64; 4] = std::array::from_fn(|k| {
        Complex64::from_polar(0.5 * radius, 0.4 + 2.0 * PI * k as f64 / 4.0)
    });
    for _ in 0..max_iter {
        let mut max_step = 0.0f64;
        let mut max_resid = 0.0f64;
        for i in 0..4 {
            let pz = c.eval(z[i]);
            max_resid = max_resid.max(pz.norm());
            if pz.norm() == 0.0 {
                continue;
            }
            let ratio = pz / c.eval_derivative(z[i]);
            let repulsion: Complex64 = (0..4)
                .filter(|&j| j != i)
                .map(|j| {
                    let diff = z[i] - z[j];
                    if diff.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        diff.inv()
                    }
                })
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.norm() == 0.0 || !ratio.is_finite() {
                Complex64::new(1e-3 * radius, 1e-3 * radius)
            } else {
                ratio / denom
            };
            z[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_resid <= 1e-14 * scale || max_step <= 1e-15 * radius {
            let resid = z.iter().fold(0.0f64, |m, r| m.max(c.eval(*r).norm()));
            if resid <= 1e-10 * scale {
                return Ok(z);
            }
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
    })
}

/// Distance between two root multisets: the smallest, over all pairings, of
/// the largest pairwise gap.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "multisets differ in size");
    fn search(a: &[Complex64], b: &[Complex64], used: &mut Vec<bool>, i: usize, worst: f64, best: &mut f64) {
        if worst >= *best {
            return;
        }
        if i == a.len() {
            *best = worst;
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                search(a, b, used, i + 1, worst.max((a[i] - b[j]).norm()), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    search(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    best
}
