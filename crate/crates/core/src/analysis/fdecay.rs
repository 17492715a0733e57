//! Decay of `F~(eta) = S(eta) / cosh(eta)` and its first two derivatives, where
//! `S(eta) = int_{|s|<1} e^{-eta s} sqrt(1 + 4 e^{-h s}) ds` and `h = beta - pi/2`.

use crate::error::{Error, Result};
use crate::geometry::WormParams;
use crate::quadrature::adaptive_gk;
use serde::Serialize;

/// Value and first two derivatives of `F~` at one point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FTildeJet {
    pub eta: f64,
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Moments `U_k(a) = int_{-1}^{1} (1+s)^k e^{-a(1+s)} sqrt(1 + 4 e^{-sigma h s}) ds`.
fn moments(a: f64, sigma: f64, h: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let f =
            |s: f64| (1.0 + s).powi(k as i32) * (-a * (1.0 + s)).exp() * (1.0 + 4.0 * (-sigma * h * s).exp()).sqrt();
        // The integrand is concentrated in a layer of width ~1/a at s = -1.
        let cut = (-1.0 + 40.0 / a.max(1e-300)).min(1.0);
        let mut v = adaptive_gk(f, -1.0, cut, 0.0, 1e-14, 2000).value;
        if cut < 1.0 {
            v += adaptive_gk(f, cut, 1.0, 0.0, 1e-14, 2000).value;
        }
        *slot = v;
    }
    out
}

/// `F~`, `F~'` and `F~''` at `eta`, computed from exponentially scaled moments.
pub fn f_tilde_jet(eta: f64, params: &WormParams) -> FTildeJet {
    let h = params.half_width();
    let a = eta.abs();
    let sigma = if eta < 0.0 { -1.0 } else { 1.0 };
    let [u0, u1, u2] = moments(a, sigma, h);
    let q = (-2.0 * a).exp();
    let e0 = 2.0 / (1.0 + q);
    let e1 = 4.0 * q / (1.0 + q).powi(2);
    let e2 = -8.0 * q / (1.0 + q).powi(2) + 16.0 * q * q / (1.0 + q).powi(3);
    FTildeJet { eta, value: e0 * u0, d1: sigma * (e1 * u0 - e0 * u1), d2: e2 * u0 - 2.0 * e1 * u1 + e0 * u2 }
}

/// `F(eta) = S(eta) / cosh(eta + h/2)`.
pub fn f_value(eta: f64, params: &WormParams) -> f64 {
    let h = params.half_width();
    let jet = f_tilde_jet(eta, params);
    // cosh(eta)/cosh(eta + h/2) written without overflow.
    let ratio = ((-2.0 * eta.abs()).exp() + 1.0) / ((-2.0 * (eta + 0.5 * h).abs()).exp() + 1.0)
        * (eta.abs() - (eta + 0.5 * h).abs()).exp();
    jet.value * ratio
}

fn tanh_over_eta(eta: f64) -> f64 {
    if eta.abs() < 1e-8 {
        1.0 - eta * eta / 3.0
    } else {
        eta.tanh() / eta
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedSups {
    pub points: usize,
    /// `sup eta^2 |F~'(eta)|` over `1 <= |eta| <= 50`.
    pub first: f64,
    pub first_at: f64,
    /// `sup |eta|^3 |F~''(eta)|` over the same range.
    pub second: f64,
    pub second_at: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FDecayReport {
    pub f_tilde_zero: f64,
    pub coarse: WeightedSups,
    pub fine: WeightedSups,
    pub first_rel_change: f64,
    pub second_rel_change: f64,
    /// `inf` and `sup` of `F(eta) eta / tanh(eta)` over the grid together with `eta = 0`.
    pub c1: f64,
    pub c2: f64,
}

impl FDecayReport {
    pub fn max_rel_change(&self) -> f64 {
        self.first_rel_change.max(self.second_rel_change)
    }
}

/// Symmetric grid of `n` points per side, equally spaced in `|eta|` over `[1, 50]`.
pub fn default_eta_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    let pos: Vec<f64> = (0..n).map(|i| 1.0 + 49.0 * i as f64 / (n - 1) as f64).collect();
    pos.iter().rev().map(|x| -x).chain(pos.iter().copied()).collect()
}

fn refine(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        out.push(w[0]);
        // Skip the gap between the two sides of the origin.
        if w[0].signum() == w[1].signum() {
            out.push(0.5 * (w[0] + w[1]));
        }
    }
    if let Some(&last) = grid.last() {
        out.push(last);
    }
    out
}

fn weighted_sups(grid: &[f64], params: &WormParams) -> WeightedSups {
    let mut s = WeightedSups { points: 0, first: 0.0, first_at: f64::NAN, second: 0.0, second_at: f64::NAN };
    for &eta in grid.iter().filter(|e| (1.0..=50.0).contains(&e.abs())) {
        let j = f_tilde_jet(eta, params);
        s.points += 1;
        let w1 = eta * eta * j.d1.abs();
        let w2 = eta.abs().powi(3) * j.d2.abs();
        if w1 > s.first {
            s.first = w1;
            s.first_at = eta;
        }
        if w2 > s.second {
            s.second = w2;
            s.second_at = eta;
        }
    }
    s
}

/// Weighted derivative sups of `F~` on `eta_grid` and on its midpoint refinement,
/// plus the two-sided comparison of `F` with `tanh(eta)/eta`.
pub fn f_decay_check(params: &WormParams, eta_grid: &[f64]) -> Result<FDecayReport> {
    let mut grid: Vec<f64> = eta_grid.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    if grid.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidParameter("non-finite eta in grid".into()));
    }
    let coarse = weighted_sups(&grid, params);
    if coarse.points == 0 {
        return Err(Error::EmptyGrid);
    }
    let fine_grid = refine(&grid);
    let fine = weighted_sups(&fine_grid, params);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
    for &eta in fine_grid.iter().chain(std::iter::once(&0.0)) {
        let r = f_value(eta, params) / tanh_over_eta(eta);
        c1 = c1.min(r);
        c2 = c2.max(r);
    }
    Ok(FDecayReport {
        f_tilde_zero: f_tilde_jet(0.0, params).value,
        first_rel_change: rel(coarse.first, fine.first),
        second_rel_change: rel(coarse.second, fine.second),
        coarse,
        fine,
        c1,
        c2,
    })
}
