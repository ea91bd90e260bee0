//! Classical time of flight `T = ∫ dx / √(E − V(x))` across the real line for
//! the potential family `V(x) = x²(ix)^ε`.
//!
//! The integral is truncated to `[−L, L]` and evaluated by adaptive
//! Gauss–Kronrod quadrature. Beyond the cutoff the integrand decays like
//! `|x|^{−(2+ε)/2}`, which bounds the discarded tails in closed form.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result, ValidationError};
use crate::quadrature::{self, geometric_breaks};
use crate::spectral::principal_sqrt;

pub const DEFAULT_CUTOFF: f64 = 1e4;
pub const DEFAULT_ACCURACY: f64 = 1e-6;
pub const MIN_CUTOFF: f64 = 10.0;

/// Relative size of `|E − V(x)|` below which the integrand is treated as
/// singular.
const SINGULAR_REL: f64 = 1e-12;

/// `x²(ix)^ε` with `arg(ix) = ±π/2` on the positive and negative axis.
pub fn potential(x: f64, epsilon: f64) -> Result<Complex64> {
    if x == 0.0 {
        return if epsilon > -2.0 {
            Ok(Complex64::new(0.0, 0.0))
        } else {
            Err(Error::Branch { epsilon })
        };
    }
    let arg = FRAC_PI_2 * x.signum();
    let power = Complex64::new(epsilon * x.abs().ln(), epsilon * arg).exp();
    Ok(power * (x * x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailExponent {
    /// Decay exponent `(2+ε)/2` of the integrand magnitude at large `|x|`.
    pub exponent: f64,
    pub convergent: bool,
}

pub fn tail_exponent(epsilon: f64) -> TailExponent {
    let exponent = (2.0 + epsilon) / 2.0;
    TailExponent {
        exponent,
        convergent: exponent > 1.0,
    }
}

/// `2∫_L^∞ x^{−(2+ε)/2} dx = 4 L^{−ε/2} / ε`, infinite when `ε ≤ 0`.
pub fn tail_bound(epsilon: f64, cutoff: f64) -> f64 {
    if epsilon > 0.0 {
        4.0 * cutoff.powf(-0.5 * epsilon) / epsilon
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TofRequest {
    pub energy: f64,
    pub epsilon: f64,
    pub cutoff: f64,
    pub target_accuracy: f64,
}

impl TofRequest {
    pub fn new(energy: f64, epsilon: f64, cutoff: f64, target_accuracy: f64) -> Result<Self> {
        let req = Self {
            energy,
            epsilon,
            cutoff,
            target_accuracy,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn with_defaults(energy: f64, epsilon: f64) -> Result<Self> {
        Self::new(energy, epsilon, DEFAULT_CUTOFF, DEFAULT_ACCURACY)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.energy > 0.0 && self.energy.is_finite()) {
            errs.push(ValidationError::new("energy", "finite and > 0"));
        }
        if !self.epsilon.is_finite() {
            errs.push(ValidationError::new("epsilon", "finite"));
        }
        if !(self.cutoff >= MIN_CUTOFF && self.cutoff.is_finite()) {
            errs.push(ValidationError::new("cutoff", format!("finite and >= {MIN_CUTOFF}")));
        }
        if !(self.target_accuracy > 0.0 && self.target_accuracy.is_finite()) {
            errs.push(ValidationError::new("target_accuracy", "finite and > 0"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn at_cutoff(&self, cutoff: f64) -> Self {
        Self { cutoff, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TofResult {
    pub request: TofRequest,
    pub value: Complex64,
    /// Bound on the part of the integral beyond `±cutoff`.
    pub tail_bound: f64,
    /// Error estimate of the truncated integral.
    pub quadrature_error: f64,
    /// `tail_bound + quadrature_error ≤ target_accuracy`.
    pub converged: bool,
}

impl TofResult {
    /// Flat JSON record; a non-finite tail bound is written as `null`.
    pub fn to_json(&self) -> serde_json::Value {
        let finite = |v: f64| v.is_finite().then_some(v);
        json!({
            "T": [self.value.re, self.value.im],
            "tail_bound": finite(self.tail_bound),
            "converged": self.converged,
            "L": self.request.cutoff,
            "epsilon": self.request.epsilon,
            "E": self.request.energy,
        })
    }
}

/// `1/√(E − V(x))` with the principal square root.
pub fn integrand(x: f64, energy: f64, epsilon: f64) -> Result<Complex64> {
    let v = potential(x, epsilon)?;
    let d = Complex64::new(energy, 0.0) - v;
    if d.norm() <= SINGULAR_REL * energy.max(v.norm()) {
        return Err(Error::Singularity { x });
    }
    Ok(principal_sqrt(d).inv())
}

/// A real-axis solution of `V(x) = E` inside `[−L, L]`, if one exists.
///
/// `V` is real only when `sin(επ/2) = 0`; it then equals `E` at
/// `|x| = (E / cos(επ/2))^{1/(2+ε)}` provided the cosine is positive.
fn real_turning_point(req: &TofRequest) -> Option<f64> {
    let (s, c) = (FRAC_PI_2 * req.epsilon).sin_cos();
    if s.abs() > SINGULAR_REL || c <= 0.0 || req.epsilon <= -2.0 {
        return None;
    }
    let x = (req.energy / c).powf(1.0 / (2.0 + req.epsilon));
    (x <= req.cutoff).then_some(x)
}

fn symmetric_breaks(cutoff: f64, finest: i32) -> Vec<f64> {
    let half = geometric_breaks(cutoff, finest);
    let mut out: Vec<f64> = half.iter().skip(1).rev().map(|x| -x).collect();
    out.extend(half);
    out
}

pub fn time_of_flight(req: &TofRequest) -> Result<TofResult> {
    req.validate()?;
    if let Some(x) = real_turning_point(req) {
        return Err(Error::Singularity { x });
    }
    let breaks = symmetric_breaks(req.cutoff, 4);
    let est = quadrature::adaptive(
        |x| integrand(x, req.energy, req.epsilon),
        &breaks,
        0.5 * req.target_accuracy,
    )?;
    let tail = tail_bound(req.epsilon, req.cutoff);
    Ok(TofResult {
        request: *req,
        value: est.value,
        tail_bound: tail,
        quadrature_error: est.error,
        converged: tail + est.error <= req.target_accuracy,
    })
}

/// The truncated integral by a fixed `order`-point Gauss–Legendre rule on
/// octave panels that refine towards the origin.
pub fn time_of_flight_panels(req: &TofRequest, order: usize) -> Result<Complex64> {
    req.validate()?;
    if let Some(x) = real_turning_point(req) {
        return Err(Error::Singularity { x });
    }
    let breaks = symmetric_breaks(req.cutoff, 24);
    quadrature::fixed_panels(|x| integrand(x, req.energy, req.epsilon), &breaks, order)
}

/// Estimates at cutoffs `L, 2L, …, 2^doublings·L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffStudy {
    pub results: Vec<TofResult>,
}

impl CutoffStudy {
    pub fn run(req: &TofRequest, doublings: usize) -> Result<Self> {
        let results = (0..=doublings)
            .map(|k| time_of_flight(&req.at_cutoff(req.cutoff * 2f64.powi(k as i32))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { results })
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.value.norm()).collect()
    }

    pub fn is_monotone_growth(&self) -> bool {
        self.magnitudes().windows(2).all(|w| w[1] > w[0])
    }

    /// `log₂(|ΔT_{k+1}| / |ΔT_k|)` for successive cutoff increments. A tail
    /// decaying like `|x|^{−s}` gives `1 − s`.
    pub fn increment_exponents(&self) -> Vec<f64> {
        let inc: Vec<f64> = self
            .results
            .windows(2)
            .map(|w| (w[1].value - w[0].value).norm())
            .collect();
        inc.windows(2).map(|w| (w[1] / w[0]).log2()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn potential_special_cases() {
        assert!(close(potential(1.0, 1.0).unwrap(), Complex64::new(0.0, 1.0), 1e-15));
        assert!(close(potential(1.0, 2.0).unwrap(), Complex64::new(-1.0, 0.0), 1e-15));
        assert!(close(potential(-2.0, 0.0).unwrap(), Complex64::new(4.0, 0.0), 1e-15));
        assert!(close(potential(-1.0, 1.0).unwrap(), Complex64::new(0.0, -1.0), 1e-15));
        assert_eq!(potential(0.0, -1.5).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(potential(0.0, -2.0), Err(Error::Branch { epsilon: -2.0 }));
    }

    #[test]
    fn tail_exponents() {
        assert_eq!(tail_exponent(1.0), TailExponent { exponent: 1.5, convergent: true });
        assert_eq!(tail_exponent(0.0), TailExponent { exponent: 1.0, convergent: false });
        assert_eq!(tail_exponent(-0.5), TailExponent { exponent: 0.75, convergent: false });
        assert!(tail_bound(0.0, 1e4).is_infinite());
        assert!((tail_bound(1.0, 1e4) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn request_validation_lists_fields() {
        let Err(Error::Validation(errs)) = TofRequest::new(0.0, 1.0, 5.0, -1.0) else {
            panic!("expected validation error");
        };
        let fields: Vec<_> = errs.iter().map(|e| e.field).collect();
        assert_eq!(fields, ["energy", "cutoff", "target_accuracy"]);
    }

    #[test]
    fn harmonic_full_line_hits_turning_point() {
        let req = TofRequest::with_defaults(1.0, 0.0).unwrap();
        match time_of_flight(&req) {
            Err(Error::Singularity { x }) => assert!((x - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_exponent_turning_point_check() {
        // cos(−π) < 0: V is real and negative, never equal to E
        let req = TofRequest::with_defaults(1.0, -2.0 + 1e-9).unwrap();
        assert!(real_turning_point(&req).is_none());
    }

    #[test]
    fn cubic_cross_check() {
        let req = TofRequest::with_defaults(1.0, 1.0).unwrap();
        let r = time_of_flight(&req).unwrap();
        let fixed = time_of_flight_panels(&req, 30).unwrap();
        assert!((r.value - fixed).norm() <= 1e-6 * fixed.norm());
        assert!(r.value.im.abs() <= 1e-6);
        assert!(!r.converged);
        let j = r.to_json();
        assert_eq!(j["L"], 1e4);
        assert_eq!(j["T"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn diverging_json_has_null_tail() {
        let req = TofRequest::new(1.0, -0.5, 100.0, 1e-6).unwrap();
        let r = time_of_flight(&req).unwrap();
        assert!(!r.converged);
        assert!(r.to_json()["tail_bound"].is_null());
    }
}
