//! Symbols of the sheet-pair multipliers in normalized frequency coordinates.
//!
//! With `xi_n = pi xi` and `eta_n = h (2 xi - (j + 1))`, `h = beta - pi/2`, every
//! sheet-pair symbol becomes `e^{-c} e^{gamma xi_n + alpha eta_n} / nu~(xi_n, eta_n)`
//! and `nu~ = D / Q` with the elementary denominator `D`.

pub mod derivatives;
pub mod fdecay;
pub mod marcinkiewicz;
pub mod schur;

use crate::error::{Error, Result};
use crate::geometry::{SheetId, WormParams};
use crate::projector::{log_unified_multiplier, SheetPairMultiplier};
use crate::quadrature::log_add_exp;
use crate::strip::NuEvaluator;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizedCoords {
    pub xi_n: f64,
    pub eta_n: f64,
}

pub fn to_normalized(xi: f64, j: f64, params: &WormParams) -> NormalizedCoords {
    NormalizedCoords { xi_n: PI * xi, eta_n: params.half_width() * (2.0 * xi - (j + 1.0)) }
}

/// Inverse of [`to_normalized`]; `j` comes back as a real number.
pub fn from_normalized(c: NormalizedCoords, params: &WormParams) -> (f64, f64) {
    let xi = c.xi_n / PI;
    (xi, 2.0 * xi - 1.0 - c.eta_n / params.half_width())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    Diagonal,
    OffDiagonal,
    /// Pairs of sheets at positive distance: (3,1), (1,3), (4,2), (2,4).
    Gap,
}

/// Exponents of a sheet-pair symbol in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizedMultiplier {
    pub alpha: f64,
    pub gamma: f64,
    pub kind: MultiplierKind,
    /// `ln` of the bounded factor split off in front, `-c`.
    pub log_prefactor: f64,
}

impl NormalizedMultiplier {
    /// `ln( e^{gamma xi_n + alpha eta_n} / nu~ )`.
    pub fn log_value(&self, xi_n: f64, eta_n: f64, params: &WormParams) -> f64 {
        self.gamma * xi_n + self.alpha * eta_n - log_nu_tilde(xi_n, eta_n, params)
    }
}

pub fn pair_kind(out: SheetId, inp: SheetId) -> MultiplierKind {
    if out == inp {
        MultiplierKind::Diagonal
    } else if (out.label() + 2 - 1) % 4 + 1 == inp.label() {
        MultiplierKind::Gap
    } else {
        MultiplierKind::OffDiagonal
    }
}

/// `alpha = -c / h`, `gamma = (2c - (t + y)) / pi`, read off from the exponent
/// `c j - (t + y) xi` after the change of coordinates.
pub fn alpha_gamma_of(pair: &SheetPairMultiplier, params: &WormParams) -> Result<NormalizedMultiplier> {
    if !params.contains(pair.out_sheet, pair.y) || !params.contains(pair.in_sheet, pair.t) {
        return Err(Error::Domain(format!("(y, t) = ({}, {}) outside the sheet intervals", pair.y, pair.t)));
    }
    let c = pair.c(params);
    Ok(NormalizedMultiplier {
        alpha: -c / params.half_width(),
        gamma: (2.0 * c - (pair.t + pair.y)) / PI,
        kind: pair_kind(pair.out_sheet, pair.in_sheet),
        log_prefactor: -c,
    })
}

/// `(1 - e^{-2|x|}) / (2|x|)`, which is `e^{-|x|} sinh(x) / x`.
fn reduced_sinhc(x: f64) -> f64 {
    let a = x.abs();
    if a < 1e-8 {
        1.0 - a
    } else {
        -(-2.0 * a).exp_m1() / (2.0 * a)
    }
}

/// `ln D(xi, eta) - |xi| - |eta|`.
pub fn log_d_reduced(xi: f64, eta: f64) -> f64 {
    let (ax, ae) = (xi.abs(), eta.abs());
    let ex = (-2.0 * ax).exp();
    let ee = (-2.0 * ae).exp();
    (0.5 * (1.0 + ee) * reduced_sinhc(ax) + reduced_sinhc(ae) * 0.5 * (1.0 + ex)).ln()
}

/// `ln D(xi, eta)`, stable for all real arguments.
pub fn log_d(xi: f64, eta: f64) -> f64 {
    xi.abs() + eta.abs() + log_d_reduced(xi, eta)
}

/// `D(xi, eta) = cosh(eta) sinh(xi)/xi + sinh(eta)/eta cosh(xi)`.
pub fn d_fn(xi: f64, eta: f64) -> f64 {
    log_d(xi, eta).exp()
}

/// `ln nu~(xi_n, eta_n)` where `nu~(to_normalized(xi, j)) = nu(xi, j)`.
pub fn log_nu_tilde(xi_n: f64, eta_n: f64, params: &WormParams) -> f64 {
    log_nu_tilde_with(&NuEvaluator::new(*params), xi_n, eta_n)
}

pub(crate) fn log_nu_tilde_with(ev: &NuEvaluator, xi_n: f64, eta_n: f64) -> f64 {
    xi_n.abs() + eta_n.abs() + log_nu_tilde_reduced(ev, xi_n, eta_n)
}

/// `ln nu~ - |xi_n| - |eta_n|`, accurate to rounding even when the exponents are huge.
pub(crate) fn log_nu_tilde_reduced(ev: &NuEvaluator, xi_n: f64, eta_n: f64) -> f64 {
    let h = ev.params().half_width();
    let shifted = eta_n + 0.5 * h;
    let cosh_part = shifted.abs() - eta_n.abs() + (0.5 * (1.0 + (-2.0 * shifted.abs()).exp())).ln();
    let first = h.ln() + (0.5 * (1.0 + (-2.0 * xi_n.abs()).exp())).ln() + ev.log_s_integral_reduced(eta_n);
    let second = (2.0 * PI).ln() + cosh_part + reduced_sinhc(xi_n).ln();
    log_add_exp(first, second)
}

pub fn nu_tilde(xi_n: f64, eta_n: f64, params: &WormParams) -> f64 {
    log_nu_tilde(xi_n, eta_n, params).exp()
}

pub(crate) fn log_q_with(ev: &NuEvaluator, xi: f64, eta: f64) -> f64 {
    log_d_reduced(xi, eta) - log_nu_tilde_reduced(ev, xi, eta)
}

/// `Q = D / nu~`.
pub fn q_fn(xi: f64, eta: f64, params: &WormParams) -> f64 {
    log_q_with(&NuEvaluator::new(*params), xi, eta).exp()
}

/// `ln(e^{gamma xi + alpha eta} / D)` with the `|xi| + |eta|` growth cancelled analytically.
pub fn log_m(xi: f64, eta: f64, alpha: f64, gamma: f64) -> f64 {
    (gamma * xi - xi.abs()) + (alpha * eta - eta.abs()) - log_d_reduced(xi, eta)
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} must lie in (0, 1)")))
    }
}

/// `m_alpha = e^{xi + alpha eta} / D` for `0 < alpha < 1`.
pub fn m_alpha_fn(xi: f64, eta: f64, alpha: f64) -> Result<f64> {
    check_open_unit("alpha", alpha)?;
    Ok(log_m(xi, eta, alpha, 1.0).exp())
}

/// `m_{alpha,gamma} = e^{gamma xi + alpha eta} / D` for `0 < alpha, gamma < 1`.
pub fn m_alpha_gamma_fn(xi: f64, eta: f64, alpha: f64, gamma: f64) -> Result<f64> {
    check_open_unit("alpha", alpha)?;
    check_open_unit("gamma", gamma)?;
    Ok(log_m(xi, eta, alpha, gamma).exp())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub out_sheet: usize,
    pub in_sheet: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// Ratio of the sheet-pair symbol to the normalized symbol at `(xi_n, eta_n) = (0, 0)`.
    pub prefactor_recovered: f64,
    pub prefactor_expected: f64,
    /// Largest relative deviation of the ratio from the recovered prefactor over the samples.
    pub max_rel_deviation: f64,
}

/// Verifies `m(xi, j) = prefactor * e^{gamma xi_n + alpha eta_n} / nu~` on the given samples
/// for the exponents `(alpha, gamma)`.
pub fn consistency_check(
    pair: &SheetPairMultiplier,
    alpha: f64,
    gamma: f64,
    samples: &[(f64, i64)],
    params: &WormParams,
) -> ConsistencyReport {
    let ev = NuEvaluator::new(*params);
    let log_ratio = |xi: f64, j: i64| {
        let nc = to_normalized(xi, j as f64, params);
        log_unified_multiplier(pair, xi, j, params)
            - (gamma * nc.xi_n + alpha * nc.eta_n - log_nu_tilde_with(&ev, nc.xi_n, nc.eta_n))
    };
    let base = log_ratio(0.0, -1);
    let max_rel_deviation = samples.iter().map(|&(xi, j)| (log_ratio(xi, j) - base).exp_m1().abs()).fold(0.0, f64::max);
    ConsistencyReport {
        out_sheet: pair.out_sheet.label(),
        in_sheet: pair.in_sheet.label(),
        alpha,
        gamma,
        prefactor_recovered: base.exp(),
        prefactor_expected: (-pair.c(params)).exp(),
        max_rel_deviation,
    }
}

/// A deterministic sample of `(xi, j)` pairs for consistency checks.
pub fn consistency_samples() -> Vec<(f64, i64)> {
    let mut v = Vec::new();
    for &xi in &[-3.1, -1.0, -0.25, 0.0, 0.4, 1.7, 4.2] {
        for &j in &[-6i64, -1, 0, 2, 9] {
            v.push((xi, j));
        }
    }
    v
}
