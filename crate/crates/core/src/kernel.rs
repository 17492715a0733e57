//! The Szego kernel of the worm domain as a truncated series over θ-modes.

use crate::error::{Error, Result};
use crate::geometry::WormParams;
use crate::quadrature::ComplexSum;
use crate::strip::{KernelEvaluator, StripPoint};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

/// Tail ratio above which a larger truncation is suggested.
pub const TAIL_WARNING: f64 = 1e-8;
pub const DEFAULT_J_MAX: i64 = 64;

/// A point `(z1, z2)` strictly inside the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorPoint {
    pub z1: Complex64,
    pub z2: Complex64,
}

impl InteriorPoint {
    pub fn new(z1: Complex64, z2: Complex64, params: &WormParams) -> Result<Self> {
        if z2.norm() == 0.0 || !z2.norm().is_finite() {
            return Err(Error::Domain("z2 must be a nonzero finite number".into()));
        }
        let l = z2.norm_sqr().ln();
        if !((z1.im - l).abs() < FRAC_PI_2 && l.abs() < params.half_width()) {
            return Err(Error::Domain(format!("({z1}, {z2}) is not an interior point")));
        }
        Ok(InteriorPoint { z1, z2 })
    }

    /// The same point with `z2` rotated by `phi`.
    pub fn rotated(&self, phi: f64) -> Self {
        InteriorPoint { z1: self.z1, z2: self.z2 * Complex64::from_polar(1.0, phi) }
    }

    /// The same point translated horizontally by `a`.
    pub fn translated(&self, a: f64) -> Self {
        InteriorPoint { z1: self.z1 + a, z2: self.z2 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SzegoValue {
    pub re: f64,
    pub im: f64,
    /// `max(|term_{j_max}|, |term_{-j_max}|) / |partial sum|`.
    pub tail_ratio: f64,
    pub j_max: i64,
    pub warning: Option<String>,
    /// `(j, ln|term_j|)` for every computed mode.
    pub profile: Vec<(i64, f64)>,
}

impl SzegoValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `K(z, w) = sum_{|j| <= j_max} z2^j conj(w2)^j k_j(z1, w1)`, summed in log-magnitude form.
pub fn szego_eval(z: &InteriorPoint, w: &InteriorPoint, j_max: i64, ev: &KernelEvaluator) -> Result<SzegoValue> {
    if j_max < 1 {
        return Err(Error::InvalidParameter("j_max must be positive".into()));
    }
    let params = ev.params();
    let z1 = StripPoint::new(z.z1, params)?;
    let w1 = StripPoint::new(w.z1, params)?;
    let log_r = z.z2.norm().ln() + w.z2.norm().ln();
    let dphase = z.z2.arg() - w.z2.arg();
    let mut terms = Vec::with_capacity((2 * j_max + 1) as usize);
    for j in -j_max..=j_max {
        let k = ev.k_j(z1, w1, j);
        let log_mag = j as f64 * log_r + k.log_scale;
        let phase = Complex64::from_polar(1.0, j as f64 * dphase) * k.mantissa;
        terms.push((j, log_mag, phase));
    }
    let top = terms.iter().map(|(_, lm, ph)| lm + ph.norm().ln()).fold(f64::NEG_INFINITY, f64::max);
    let mut acc = ComplexSum::default();
    let mut profile = Vec::with_capacity(terms.len());
    for (j, lm, ph) in &terms {
        acc.add(ph * (lm - top).exp());
        profile.push((*j, lm + ph.norm().ln()));
    }
    let scaled = acc.value();
    let log_sum = top + scaled.norm().ln();
    let value = scaled * top.exp();
    let edge = profile.first().unwrap().1.max(profile.last().unwrap().1);
    let tail_ratio = (edge - log_sum).exp();
    let warning = (tail_ratio > TAIL_WARNING)
        .then(|| format!("tail ratio {tail_ratio:.3e} exceeds {TAIL_WARNING:e}; try j_max = {}", 2 * j_max));
    Ok(SzegoValue { re: value.re, im: value.im, tail_ratio, j_max, warning, profile })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayProfile {
    pub profile: Vec<(i64, f64)>,
    /// Least-squares slope of `ln|term|` against `|j|` over the outer quartile, j > 0.
    pub slope_positive: f64,
    /// Same for j < 0.
    pub slope_negative: f64,
}

/// Per-mode magnitudes of the kernel series with fitted tail slopes.
pub fn mode_decay_profile(
    z: &InteriorPoint,
    w: &InteriorPoint,
    j_max: i64,
    ev: &KernelEvaluator,
) -> Result<DecayProfile> {
    let v = szego_eval(z, w, j_max, ev)?;
    let q = (j_max * 3) / 4;
    let fit = |sign: i64| {
        let pts: Vec<(f64, f64)> =
            v.profile.iter().filter(|(j, _)| j * sign >= q && *j != 0).map(|(j, l)| ((j * sign) as f64, *l)).collect();
        least_squares_slope(&pts)
    };
    let slope_positive = fit(1);
    let slope_negative = fit(-1);
    if !(slope_positive < 0.0 && slope_negative < 0.0) {
        return Err(Error::Domain(format!(
            "kernel series not decaying (slopes {slope_positive:.3e}, {slope_negative:.3e}); point too close to the boundary for j_max = {j_max}"
        )));
    }
    Ok(DecayProfile { profile: v.profile, slope_positive, slope_negative })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup() -> (WormParams, KernelEvaluator) {
        let p = WormParams::new(PI).unwrap();
        (p, KernelEvaluator::new(p))
    }

    #[test]
    fn rejects_exterior_points() {
        let (p, _) = setup();
        assert!(InteriorPoint::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), &p).is_err());
        assert!(InteriorPoint::new(Complex64::new(0.0, 2.0), Complex64::new(1.0, 0.0), &p).is_err());
        assert!(InteriorPoint::new(Complex64::new(0.0, 0.0), Complex64::new(3.0, 0.0), &p).is_err());
    }

    #[test]
    fn diagonal_is_real_and_positive() {
        let (p, ev) = setup();
        let z = InteriorPoint::new(Complex64::new(0.3, 0.2), Complex64::new(0.8, 0.4), &p).unwrap();
        let v = szego_eval(&z, &z, DEFAULT_J_MAX, &ev).unwrap();
        assert!(v.re > 0.0);
        assert!(v.im.abs() <= 1e-10 * v.re);
        assert!(v.warning.is_none(), "{:?}", v.warning);
    }

    #[test]
    fn profile_decays_at_the_unit_point() {
        let (p, ev) = setup();
        let z = InteriorPoint::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), &p).unwrap();
        let d = mode_decay_profile(&z, &z, DEFAULT_J_MAX, &ev).unwrap();
        assert!(d.slope_positive < 0.0 && d.slope_negative < 0.0);
        // At z2 = 1 the two halves of the profile mirror each other up to the
        // shift j -> -j - 1 of the weight, so the slopes are close.
        assert!((d.slope_positive - d.slope_negative).abs() < 0.1 * d.slope_positive.abs(), "{d:?}");
    }

    #[test]
    fn near_outer_edge_decays_slower_for_positive_modes() {
        let (p, ev) = setup();
        let r = (0.45 * p.half_width()).exp();
        let z = InteriorPoint::new(Complex64::new(0.0, 0.9), Complex64::new(r, 0.0), &p).unwrap();
        let d = mode_decay_profile(&z, &z, DEFAULT_J_MAX, &ev).unwrap();
        assert!(d.slope_positive > d.slope_negative, "{d:?}");
    }

    #[test]
    fn doubling_truncation_changes_little() {
        let (p, ev) = setup();
        let z = InteriorPoint::new(Complex64::new(0.1, -0.3), Complex64::new(0.9, 0.2), &p).unwrap();
        let w = InteriorPoint::new(Complex64::new(-0.4, 0.2), Complex64::new(1.1, -0.3), &p).unwrap();
        let a = szego_eval(&z, &w, 64, &ev).unwrap().value();
        let b = szego_eval(&z, &w, 128, &ev).unwrap().value();
        assert!((a - b).norm() < 1e-8 * b.norm());
    }
}
