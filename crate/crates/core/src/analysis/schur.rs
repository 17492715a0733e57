//! Schur test for the positive kernels that bound the `t`-integration of the sheet-pair blocks.
//!
//! For a kernel `N(y, t)` on `I_out x I_in` and test functions `phi_out`, `phi_in` the two
//! quantities certified here are
//!
//! * q-side: `sup_y  int N(y, t) phi_in(t)^q dt / phi_out(y)^q`,
//! * p-side: `sup_t  int N(y, t) phi_out(y)^p dy / phi_in(t)^p`.
//!
//! Both finite gives `L^p` boundedness of the integral operator with norm at most
//! `qside^{1/q} pside^{1/p}`.

use super::{alpha_gamma_of, pair_kind, MultiplierKind};
use crate::error::{Error, Result};
use crate::geometry::{SheetId, WormParams};
use crate::projector::SheetPairMultiplier;
use crate::quadrature::{adaptive_gk, NeumaierSum};
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchurKernel {
    /// `1 / ((1 - |alpha|) + (1 - |gamma|))` with the exponents of the sheet pair,
    /// tested with `phi(t) = (dist(t, a) dist(t, b) / |I|^2)^{-1/(pq)}`.
    Pair,
    /// `1 / ((beta - pi + t) + (beta - pi + y))` on `I_1 x I_1` with `phi(t) = (beta - pi + t)^{-1/(pq)}`.
    LowerEdge,
    /// `1 / (1 + (t - y)^2)`, a bounded control kernel, with the two-sided `phi`.
    Control,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SchurKernelSpec {
    pub out_sheet: SheetId,
    pub in_sheet: SheetId,
    pub p: f64,
    pub q: f64,
    pub kernel: SchurKernel,
}

impl SchurKernelSpec {
    pub fn new(out_sheet: SheetId, in_sheet: SheetId, p: f64, kernel: SchurKernel) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("Schur exponent p = {p} must lie in (1, inf)")));
        }
        if kernel == SchurKernel::LowerEdge && (out_sheet, in_sheet) != (SheetId::S1, SheetId::S1) {
            return Err(Error::InvalidParameter("the lower-edge kernel lives on I_1 x I_1".into()));
        }
        if kernel == SchurKernel::Pair && pair_kind(out_sheet, in_sheet) == MultiplierKind::Gap {
            return Err(Error::InvalidParameter(format!(
                "pair ({}, {}) is a gap pair without a Schur kernel",
                out_sheet.label(),
                in_sheet.label()
            )));
        }
        Ok(SchurKernelSpec { out_sheet, in_sheet, p, q: p / (p - 1.0), kernel })
    }

    /// The value approached by both sups as `y` (resp. `t`) tends to a singular end, when it is known in closed form.
    pub fn edge_limits(&self, params: &WormParams) -> Option<(f64, f64)> {
        let h = params.half_width();
        let sp = PI / (PI / self.p).sin();
        let sq = PI / (PI / self.q).sin();
        use SheetId::*;
        match (self.kernel, self.out_sheet, self.in_sheet) {
            (SchurKernel::LowerEdge, _, _) => Some((sp, sq)),
            (SchurKernel::Pair, S1, S1) | (SchurKernel::Pair, S3, S3) => Some((2.0 * h * sp, 2.0 * h * sq)),
            (SchurKernel::Pair, S2, S2) | (SchurKernel::Pair, S4, S4) => Some((PI * sp, PI * sq)),
            (SchurKernel::Pair, S2, S1) => Some((2.0 * h * sp, PI * sq)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Weight {
    /// `(t - a)(b - t) / (b - a)^2`.
    TwoSided { a: f64, b: f64 },
    /// `t - a`.
    Lower { a: f64, b: f64 },
}

impl Weight {
    fn ends(&self) -> (f64, f64) {
        match *self {
            Weight::TwoSided { a, b } | Weight::Lower { a, b } => (a, b),
        }
    }

    /// `g` at distance `d` from the lower (`from_lower`) or upper end.
    fn g(&self, from_lower: bool, d: f64) -> f64 {
        let (a, b) = self.ends();
        let len = b - a;
        match *self {
            Weight::TwoSided { .. } => d * (len - d) / (len * len),
            Weight::Lower { .. } => {
                if from_lower {
                    d
                } else {
                    len - d
                }
            }
        }
    }

    /// `g / d` when `g` vanishes at that end.
    fn vanishing_ratio(&self, from_lower: bool, d: f64) -> Option<f64> {
        let (a, b) = self.ends();
        let len = b - a;
        match *self {
            Weight::TwoSided { .. } => Some((len - d) / (len * len)),
            Weight::Lower { .. } => from_lower.then_some(1.0),
        }
    }
}

/// `int_I N(x) g(x)^{-s} dx`, with `N` given as a function of (end, distance) for accuracy near the ends.
fn weighted_integral(w: &Weight, s: f64, rel_tol: f64, kernel: &dyn Fn(bool, f64) -> f64) -> f64 {
    let (a, b) = w.ends();
    let half = 0.5 * (b - a);
    let m = 1.0 / (1.0 - s);
    let mut total = NeumaierSum::default();
    for from_lower in [true, false] {
        let integrand = |u: f64| {
            let d = u.powf(m);
            let jac = match w.vanishing_ratio(from_lower, d) {
                Some(r) => m * r.powf(-s),
                None => w.g(from_lower, d).powf(-s) * m * u.powf(m - 1.0),
            };
            kernel(from_lower, d) * jac
        };
        // Decade breakpoints in the distance to the end resolve the kernel's own scale.
        let mut breaks = vec![0.0];
        for k in (0..=16).rev() {
            breaks.push((half * 10f64.powi(-k)).powf(1.0 / m));
        }
        for seg in breaks.windows(2) {
            if seg[1] > seg[0] {
                total.add(adaptive_gk(integrand, seg[0], seg[1], 0.0, rel_tol, 400).value);
            }
        }
    }
    total.value()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SchurConfig {
    /// Grid points per end for the outer variable, geometric toward the end.
    pub n_per_end: usize,
    /// Closest approach to an end, relative to the interval length.
    pub depth: f64,
    pub rel_tol: f64,
}

impl Default for SchurConfig {
    fn default() -> Self {
        SchurConfig { n_per_end: 25, depth: 1e-9, rel_tol: 1e-10 }
    }
}

impl SchurConfig {
    pub fn refined(&self) -> Self {
        SchurConfig { n_per_end: 2 * self.n_per_end - 1, depth: self.depth, rel_tol: 0.1 * self.rel_tol }
    }
}

/// Outer-variable grid as (from_lower, distance) pairs.
fn outer_grid(len: f64, cfg: &SchurConfig) -> Vec<(bool, f64)> {
    let n = cfg.n_per_end.max(2);
    let top = 0.5 * len;
    let bottom = cfg.depth * len;
    let mut out = Vec::with_capacity(2 * n);
    for from_lower in [true, false] {
        for i in 0..n {
            if !from_lower && i == 0 {
                continue;
            }
            let d = top * (bottom / top).powf(i as f64 / (n - 1) as f64);
            out.push((from_lower, d));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SideResult {
    pub sup: f64,
    /// Location of the sup in the outer variable.
    pub at: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchurReport {
    pub spec: SchurKernelSpec,
    pub q_side: SideResult,
    pub p_side: SideResult,
    pub q_side_refined: SideResult,
    pub p_side_refined: SideResult,
    pub max_rel_change: f64,
    /// Closed-form limits at the singular ends when known, `(q_side, p_side)`.
    pub edge_limits: Option<(f64, f64)>,
}

impl SchurReport {
    pub fn finite(&self) -> bool {
        [&self.q_side, &self.p_side, &self.q_side_refined, &self.p_side_refined]
            .iter()
            .all(|s| s.sup.is_finite() && s.sup > 0.0)
    }

    /// `qside^{1/q} pside^{1/p}` on the refined grid.
    pub fn norm_bound(&self) -> f64 {
        self.q_side_refined.sup.powf(1.0 / self.spec.q) * self.p_side_refined.sup.powf(1.0 / self.spec.p)
    }
}

struct Setup {
    w_out: Weight,
    w_in: Weight,
    kernel: Box<dyn Fn(f64, f64) -> f64>,
}

fn setup(spec: &SchurKernelSpec, params: &WormParams) -> Result<Setup> {
    let (ao, bo) = params.interval(spec.out_sheet);
    let (ai, bi) = params.interval(spec.in_sheet);
    let p = *params;
    let (out_sheet, in_sheet) = (spec.out_sheet, spec.in_sheet);
    Ok(match spec.kernel {
        SchurKernel::Pair => {
            // Validate the pair once at an interior point.
            let probe = SheetPairMultiplier::new(out_sheet, in_sheet, 0.5 * (ao + bo), 0.5 * (ai + bi), params)?;
            alpha_gamma_of(&probe, params)?;
            Setup {
                w_out: Weight::TwoSided { a: ao, b: bo },
                w_in: Weight::TwoSided { a: ai, b: bi },
                kernel: Box::new(move |y, t| {
                    let pair = SheetPairMultiplier { out_sheet, in_sheet, y, t };
                    let c = pair.c(&p);
                    let alpha = -c / p.half_width();
                    let gamma = (2.0 * c - (t + y)) / PI;
                    1.0 / ((1.0 - alpha.abs()) + (1.0 - gamma.abs()))
                }),
            }
        }
        SchurKernel::LowerEdge => {
            let shift = params.beta() - PI;
            Setup {
                w_out: Weight::Lower { a: ao, b: bo },
                w_in: Weight::Lower { a: ai, b: bi },
                kernel: Box::new(move |y, t| 1.0 / ((shift + t) + (shift + y))),
            }
        }
        SchurKernel::Control => Setup {
            w_out: Weight::TwoSided { a: ao, b: bo },
            w_in: Weight::TwoSided { a: ai, b: bi },
            kernel: Box::new(|y, t| 1.0 / (1.0 + (t - y) * (t - y))),
        },
    })
}

fn at(w: &Weight, from_lower: bool, d: f64) -> f64 {
    let (a, b) = w.ends();
    if from_lower {
        a + d
    } else {
        b - d
    }
}

fn side(s: &Setup, q_side: bool, exponent: f64, cfg: &SchurConfig) -> SideResult {
    let (w_outer, w_inner) = if q_side { (&s.w_out, &s.w_in) } else { (&s.w_in, &s.w_out) };
    let (a, b) = w_outer.ends();
    let mut best = SideResult { sup: 0.0, at: f64::NAN, points: 0 };
    for (lower, d) in outer_grid(b - a, cfg) {
        let x = at(w_outer, lower, d);
        let k = |inner_lower: bool, e: f64| {
            let z = at(w_inner, inner_lower, e);
            if q_side {
                (s.kernel)(x, z)
            } else {
                (s.kernel)(z, x)
            }
        };
        let integral = weighted_integral(w_inner, exponent, cfg.rel_tol, &k);
        let ratio = integral * w_outer.g(lower, d).powf(exponent);
        best.points += 1;
        if !(ratio <= best.sup) {
            best.sup = ratio;
            best.at = x;
        }
    }
    best
}

/// Runs both sides of the Schur test on the base grid and on its refinement.
pub fn schur_test(spec: &SchurKernelSpec, params: &WormParams, cfg: &SchurConfig) -> Result<SchurReport> {
    if !(spec.p > 1.0 && spec.p.is_finite()) {
        return Err(Error::Domain(format!("Schur exponent p = {} must lie in (1, inf)", spec.p)));
    }
    if !(cfg.depth > 0.0 && cfg.depth < 0.5 && cfg.n_per_end >= 2) {
        return Err(Error::InvalidParameter(
            "Schur grid needs depth in (0, 1/2) and at least two points per end".into(),
        ));
    }
    let s = setup(spec, params)?;
    // phi^q = g^{-1/p} and phi^p = g^{-1/q}.
    let (eq, ep) = (1.0 / spec.p, 1.0 / spec.q);
    let q_side = side(&s, true, eq, cfg);
    let p_side = side(&s, false, ep, cfg);
    let fine = cfg.refined();
    let q_side_refined = side(&s, true, eq, &fine);
    let p_side_refined = side(&s, false, ep, &fine);
    let rel = |a: &SideResult, b: &SideResult| (a.sup - b.sup).abs() / b.sup;
    Ok(SchurReport {
        spec: *spec,
        max_rel_change: rel(&q_side, &q_side_refined).max(rel(&p_side, &p_side_refined)),
        q_side,
        p_side,
        q_side_refined,
        p_side_refined,
        edge_limits: spec.edge_limits(params),
    })
}

/// The diagonal pairs together with `(2, 1)`.
pub fn certified_pairs() -> Vec<(SheetId, SheetId)> {
    use SheetId::*;
    vec![(S1, S1), (S2, S2), (S3, S3), (S4, S4), (S2, S1)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi_params() -> WormParams {
        WormParams::new(PI).unwrap()
    }

    #[test]
    fn rejects_p_at_most_one() {
        assert!(matches!(
            SchurKernelSpec::new(SheetId::S1, SheetId::S1, 1.0, SchurKernel::Pair),
            Err(Error::Domain(_))
        ));
        assert!(SchurKernelSpec::new(SheetId::S1, SheetId::S1, 0.5, SchurKernel::Control).is_err());
        assert!(SchurKernelSpec::new(SheetId::S3, SheetId::S1, 2.0, SchurKernel::Pair).is_err());
        assert!(SchurKernelSpec::new(SheetId::S2, SheetId::S2, 2.0, SchurKernel::LowerEdge).is_err());
    }

    #[test]
    fn weighted_integral_of_pure_power() {
        // int_0^1 x^{-1/2} dx with the one-sided weight on [0, 1].
        let w = Weight::Lower { a: 0.0, b: 1.0 };
        let v = weighted_integral(&w, 0.5, 1e-12, &|_, _| 1.0);
        assert!((v - 2.0).abs() < 1e-10, "{v}");
        // Beta function B(1 - s, 1 - s) for the two-sided weight.
        let w = Weight::TwoSided { a: 0.0, b: 1.0 };
        let v = weighted_integral(&w, 0.5, 1e-12, &|_, _| 1.0);
        assert!((v - PI).abs() < 1e-9, "{v}");
    }

    #[test]
    fn lower_edge_kernel_approaches_its_limit() {
        let params = pi_params();
        let spec = SchurKernelSpec::new(SheetId::S1, SheetId::S1, 2.0, SchurKernel::LowerEdge).unwrap();
        let r = schur_test(&spec, &params, &SchurConfig::default()).unwrap();
        let (lq, lp) = r.edge_limits.unwrap();
        assert!(r.finite());
        assert!(r.q_side.sup < lq * (1.0 + 1e-8) && r.q_side.sup > 0.999 * lq, "{r:?}");
        assert!(r.p_side.sup < lp * (1.0 + 1e-8) && r.p_side.sup > 0.999 * lp, "{r:?}");
    }

    #[test]
    fn control_kernel_gives_a_small_sup() {
        let params = pi_params();
        let spec = SchurKernelSpec::new(SheetId::S1, SheetId::S1, 2.0, SchurKernel::Control).unwrap();
        let r = schur_test(&spec, &params, &SchurConfig::default()).unwrap();
        // Bounded by int_0^pi (t(pi - t)/pi^2)^{-1/2} dt / g(y)^{-1/2} <= pi^2 / 2.
        assert!(r.finite() && r.q_side.sup < PI * PI / 2.0, "{r:?}");
        assert!(r.max_rel_change < 1e-6);
    }

    #[test]
    fn pair_kernels_are_finite_and_near_their_edge_limits() {
        let params = pi_params();
        for (o, i) in certified_pairs() {
            let spec = SchurKernelSpec::new(o, i, 2.0, SchurKernel::Pair).unwrap();
            let r = schur_test(&spec, &params, &SchurConfig::default()).unwrap();
            assert!(r.finite() && r.max_rel_change < 0.05, "{r:?}");
            let (lq, lp) = r.edge_limits.unwrap();
            assert!(r.q_side.sup > 0.99 * lq && r.q_side.sup < 2.0 * lq, "{o:?}{i:?} {} {lq}", r.q_side.sup);
            assert!(r.p_side.sup > 0.99 * lp && r.p_side.sup < 2.0 * lp, "{o:?}{i:?} {} {lp}", r.p_side.sup);
        }
    }

    #[test]
    fn sup_grows_as_p_decreases_to_one() {
        let params = pi_params();
        let mut prev = 0.0;
        for p in [1.5, 1.2, 1.1] {
            let spec = SchurKernelSpec::new(SheetId::S1, SheetId::S1, p, SchurKernel::LowerEdge).unwrap();
            let r = schur_test(&spec, &params, &SchurConfig::default()).unwrap();
            assert!(r.finite());
            assert!(r.q_side.sup > prev, "{p}");
            prev = r.q_side.sup;
        }
    }
}
