//! Weighted derivative sups `|xi|^k1 |eta|^k2 |d^k1_xi d^k2_eta m|` of planar symbols.

use super::{log_m, log_q_with};
use crate::error::{Error, Result};
use crate::geometry::WormParams;
use crate::strip::NuEvaluator;
use serde::Serialize;

/// Derivative orders `(k1, k2)` with `k1 + k2 <= 2`.
pub const ORDERS: [(u8, u8); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "symbol", rename_all = "snake_case")]
pub enum Symbol {
    Constant { value: f64 },
    Q,
    MAlpha { alpha: f64 },
    MAlphaGamma { alpha: f64, gamma: f64 },
}

impl Symbol {
    pub fn name(&self) -> String {
        match self {
            Symbol::Constant { value } => format!("const({value})"),
            Symbol::Q => "Q".into(),
            Symbol::MAlpha { alpha } => format!("m_alpha({alpha})"),
            Symbol::MAlphaGamma { alpha, gamma } => format!("m_alpha_gamma({alpha},{gamma})"),
        }
    }

    fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        match *self {
            Symbol::MAlpha { alpha } if !unit(alpha) => Err(Error::Domain(format!("alpha = {alpha} outside (0, 1)"))),
            Symbol::MAlphaGamma { alpha, gamma } if !unit(alpha) || !unit(gamma) => {
                Err(Error::Domain(format!("(alpha, gamma) = ({alpha}, {gamma}) outside (0, 1)^2")))
            }
            _ => Ok(()),
        }
    }
}

/// A symbol bound to the evaluator it needs.
pub struct SymbolEval {
    symbol: Symbol,
    nu: NuEvaluator,
}

impl SymbolEval {
    pub fn new(symbol: Symbol, params: WormParams) -> Result<Self> {
        symbol.validate()?;
        Ok(SymbolEval { symbol, nu: NuEvaluator::new(params) })
    }

    pub fn eval(&self, xi: f64, eta: f64) -> f64 {
        match self.symbol {
            Symbol::Constant { value } => value,
            Symbol::Q => log_q_with(&self.nu, xi, eta).exp(),
            Symbol::MAlpha { alpha } => log_m(xi, eta, alpha, 1.0).exp(),
            Symbol::MAlphaGamma { alpha, gamma } => log_m(xi, eta, alpha, gamma).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanConfig {
    /// Smallest and largest decade of `|xi|`, `|eta|`.
    pub e_min: f64,
    pub e_max: f64,
    pub per_decade: usize,
    /// Initial finite-difference step relative to `max(1, |x|)`.
    pub h0: f64,
    /// Relative agreement required between steps `h` and `h/2`.
    pub rel_tol: f64,
    /// Absolute floor on the weighted derivative below which agreement is not required.
    pub abs_floor: f64,
    /// Additional floor relative to `|m(xi, eta)|`, the natural size of a weighted derivative;
    /// lets differences certify near zero crossings of the derivative.
    pub scale_rel: f64,
    pub max_halvings: usize,
    /// Number of top grid points refined by a local pattern search.
    pub refine_starts: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            e_min: -2.0,
            e_max: 6.0,
            per_decade: 8,
            h0: 0.05,
            rel_tol: 1e-4,
            abs_floor: 1e-10,
            scale_rel: 1e-7,
            max_halvings: 14,
            refine_starts: 4,
        }
    }
}

impl ScanConfig {
    pub fn doubled(&self) -> Self {
        ScanConfig { per_decade: 2 * self.per_decade, ..*self }
    }

    /// Exponents `e` of the log grid between `lo` and `hi` (inclusive of `lo`).
    fn decades(&self, lo: f64, hi: f64, include_hi: bool) -> Vec<f64> {
        let n = ((hi - lo) * self.per_decade as f64).round() as usize;
        let end = if include_hi { n + 1 } else { n };
        (0..end).map(|k| lo + k as f64 / self.per_decade as f64).collect()
    }
}

/// One finite-difference estimate and whether step halving certified it.
#[derive(Debug, Clone, Copy)]
pub struct FdEstimate {
    pub value: f64,
    pub reliable: bool,
}

fn stencil1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

fn stencil2(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
}

fn raw_derivative(f: &dyn Fn(f64, f64) -> f64, xi: f64, eta: f64, order: (u8, u8), hx: f64, he: f64) -> f64 {
    match order {
        (0, 0) => f(xi, eta),
        (1, 0) => stencil1(&|x| f(x, eta), xi, hx),
        (0, 1) => stencil1(&|e| f(xi, e), eta, he),
        (2, 0) => stencil2(&|x| f(x, eta), xi, hx),
        (0, 2) => stencil2(&|e| f(xi, e), eta, he),
        (1, 1) => stencil1(&|x| stencil1(&|e| f(x, e), eta, he), xi, hx),
        _ => unreachable!("order {order:?} not supported"),
    }
}

/// 4th-order central difference of the requested order, with Richardson-certified step halving.
pub fn derivative(
    f: &dyn Fn(f64, f64) -> f64,
    xi: f64,
    eta: f64,
    order: (u8, u8),
    weight: f64,
    cfg: &ScanConfig,
) -> FdEstimate {
    if order == (0, 0) {
        return FdEstimate { value: f(xi, eta), reliable: true };
    }
    let mut hx = cfg.h0 * xi.abs().max(1.0);
    let mut he = cfg.h0 * eta.abs().max(1.0);
    let floor = cfg.abs_floor.max(cfg.scale_rel * f(xi, eta).abs());
    let mut coarse = raw_derivative(f, xi, eta, order, hx, he);
    let mut best = (f64::INFINITY, coarse);
    for _ in 0..cfg.max_halvings {
        hx *= 0.5;
        he *= 0.5;
        let fine = raw_derivative(f, xi, eta, order, hx, he);
        let extrapolated = fine + (fine - coarse) / 15.0;
        let gap = weight * (fine - coarse).abs();
        if gap <= cfg.rel_tol * weight * fine.abs() || gap <= floor {
            return FdEstimate { value: extrapolated, reliable: true };
        }
        if gap > 4.0 * best.0 {
            // Differences grow again: rounding dominates from here on.
            break;
        }
        if gap < best.0 {
            best = (gap, extrapolated);
        }
        coarse = fine;
    }
    FdEstimate { value: best.1, reliable: false }
}

fn weight(xi: f64, eta: f64, order: (u8, u8), eta_weighted: bool) -> f64 {
    let w = xi.abs().powi(order.0 as i32);
    if eta_weighted {
        w * eta.abs().powi(order.1 as i32)
    } else {
        w
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderResult {
    pub k1: u8,
    pub k2: u8,
    /// Weighted sup over `|eta| >= 1`.
    pub sup: f64,
    pub at_xi: f64,
    pub at_eta: f64,
    /// Sup of `|xi|^k1 |derivative|` over `|eta| < 1`.
    pub inner_sup: f64,
    /// Grid points where step halving did not certify the difference quotient.
    pub unreliable_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub symbol: Symbol,
    pub per_decade: usize,
    pub orders: Vec<OrderResult>,
    /// Largest weighted sup over all orders on `|eta| >= 1`.
    pub constant: f64,
    pub any_unreliable: bool,
}

struct Region {
    eta_lo: f64,
    eta_hi: f64,
    eta_weighted: bool,
}

fn scan_region(
    f: &dyn Fn(f64, f64) -> f64,
    order: (u8, u8),
    region: &Region,
    cfg: &ScanConfig,
) -> (f64, f64, f64, usize) {
    let xd = cfg.decades(cfg.e_min, cfg.e_max, true);
    let ed = cfg.decades(region.eta_lo, region.eta_hi, region.eta_weighted);
    let signs = [-1.0, 1.0];
    let mut pts: Vec<(f64, f64, f64, f64, f64)> = Vec::new();
    let mut unreliable = 0;
    for &sx in &signs {
        for &u in &xd {
            let xi = sx * 10f64.powf(u);
            for &se in &signs {
                for &v in &ed {
                    let eta = se * 10f64.powf(v);
                    let w = weight(xi, eta, order, region.eta_weighted);
                    let d = derivative(f, xi, eta, order, w, cfg);
                    if !d.reliable {
                        unreliable += 1;
                    }
                    pts.push((w * d.value.abs(), sx, u, se, v));
                }
            }
        }
    }
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut best, mut bx, mut be) = (pts[0].0, pts[0].1 * 10f64.powf(pts[0].2), pts[0].3 * 10f64.powf(pts[0].4));
    let clamp_v =
        |v: f64| v.clamp(region.eta_lo, if region.eta_weighted { region.eta_hi } else { region.eta_hi - 1e-9 });
    let objective = |sx: f64, u: f64, se: f64, v: f64| {
        let (xi, eta) = (sx * 10f64.powf(u), se * 10f64.powf(v));
        let w = weight(xi, eta, order, region.eta_weighted);
        w * derivative(f, xi, eta, order, w, cfg).value.abs()
    };
    for start in pts.iter().take(cfg.refine_starts) {
        let (mut val, sx, mut u, se, mut v) = *start;
        let mut step = 1.0 / cfg.per_decade as f64;
        while step > 1e-4 {
            let mut moved = false;
            for (du, dv) in
                [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)]
            {
                let nu = (u + du * step).clamp(cfg.e_min, cfg.e_max);
                let nv = clamp_v(v + dv * step);
                let cand = objective(sx, nu, se, nv);
                if cand > val {
                    val = cand;
                    u = nu;
                    v = nv;
                    moved = true;
                    break;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if val > best {
            best = val;
            bx = sx * 10f64.powf(u);
            be = se * 10f64.powf(v);
        }
    }
    (best, bx, be, unreliable)
}

/// Weighted derivative sups of `symbol` for every order in [`ORDERS`].
pub fn marcinkiewicz_scan(symbol: Symbol, params: WormParams, cfg: &ScanConfig) -> Result<ScanReport> {
    let ev = SymbolEval::new(symbol, params)?;
    let f = |x: f64, e: f64| ev.eval(x, e);
    let outer = Region { eta_lo: 0.0, eta_hi: cfg.e_max, eta_weighted: true };
    let inner = Region { eta_lo: cfg.e_min, eta_hi: 0.0, eta_weighted: false };
    let mut orders = Vec::new();
    for order in ORDERS {
        let (sup, at_xi, at_eta, u1) = scan_region(&f, order, &outer, cfg);
        let (inner_sup, _, _, u2) = scan_region(&f, order, &inner, cfg);
        orders.push(OrderResult {
            k1: order.0,
            k2: order.1,
            sup,
            at_xi,
            at_eta,
            inner_sup,
            unreliable_points: u1 + u2,
        });
    }
    let constant = orders.iter().map(|o| o.sup).fold(0.0, f64::max);
    let any_unreliable = orders.iter().any(|o| o.unreliable_points > 0);
    Ok(ScanReport { symbol, per_decade: cfg.per_decade, orders, constant, any_unreliable })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub coarse: ScanReport,
    pub fine: ScanReport,
    /// Largest relative change of any order's sup (outer and inner) under grid doubling.
    pub max_rel_change: f64,
}

pub fn scan_with_refinement(symbol: Symbol, params: WormParams, cfg: &ScanConfig) -> Result<StabilityReport> {
    let coarse = marcinkiewicz_scan(symbol, params, cfg)?;
    let fine = marcinkiewicz_scan(symbol, params, &cfg.doubled())?;
    let rel = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
    let max_rel_change = coarse
        .orders
        .iter()
        .zip(&fine.orders)
        .map(|(c, f)| rel(c.sup, f.sup).max(rel(c.inner_sup, f.inner_sup)))
        .fold(0.0, f64::max);
    Ok(StabilityReport { coarse, fine, max_rel_change })
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowUpEntry {
    pub alpha: f64,
    pub gamma: Option<f64>,
    /// `(1 - alpha)` or `(1 - alpha) + (1 - gamma)`.
    pub gap: f64,
    pub constant: f64,
    pub scaled: f64,
    pub max_rel_change: f64,
    pub any_unreliable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowUpReport {
    pub entries: Vec<BlowUpEntry>,
    /// `max(scaled) / min(scaled)`.
    pub spread: f64,
    /// Least-squares slope of `ln C` against `ln(1 / gap)`.
    pub fitted_exponent: f64,
}

fn blow_up(entries: Vec<BlowUpEntry>) -> BlowUpReport {
    let hi = entries.iter().map(|e| e.scaled).fold(0.0, f64::max);
    let lo = entries.iter().map(|e| e.scaled).fold(f64::INFINITY, f64::min);
    let pts: Vec<(f64, f64)> = entries.iter().map(|e| (-e.gap.ln(), e.constant.ln())).collect();
    let fitted_exponent = crate::kernel::least_squares_slope(&pts);
    BlowUpReport { entries, spread: hi / lo, fitted_exponent }
}

/// Constants of `m_alpha` over `alphas`, scaled by `1 - alpha`.
pub fn m_alpha_blow_up(alphas: &[f64], params: WormParams, cfg: &ScanConfig) -> Result<BlowUpReport> {
    let mut entries = Vec::new();
    for &alpha in alphas {
        let r = scan_with_refinement(Symbol::MAlpha { alpha }, params, cfg)?;
        let gap = 1.0 - alpha;
        entries.push(BlowUpEntry {
            alpha,
            gamma: None,
            gap,
            constant: r.fine.constant,
            scaled: r.fine.constant * gap,
            max_rel_change: r.max_rel_change,
            any_unreliable: r.coarse.any_unreliable || r.fine.any_unreliable,
        });
    }
    Ok(blow_up(entries))
}

/// Constants of `m_{alpha,gamma}` over the product grid, scaled by `(1 - alpha) + (1 - gamma)`.
pub fn m_alpha_gamma_blow_up(
    alphas: &[f64],
    gammas: &[f64],
    params: WormParams,
    cfg: &ScanConfig,
) -> Result<BlowUpReport> {
    let mut entries = Vec::new();
    for &alpha in alphas {
        for &gamma in gammas {
            let r = scan_with_refinement(Symbol::MAlphaGamma { alpha, gamma }, params, cfg)?;
            let gap = (1.0 - alpha) + (1.0 - gamma);
            entries.push(BlowUpEntry {
                alpha,
                gamma: Some(gamma),
                gap,
                constant: r.fine.constant,
                scaled: r.fine.constant * gap,
                max_rel_change: r.max_rel_change,
                any_unreliable: r.coarse.any_unreliable || r.fine.any_unreliable,
            });
        }
    }
    Ok(blow_up(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn quick() -> ScanConfig {
        ScanConfig { e_min: -1.0, e_max: 3.0, per_decade: 4, refine_starts: 2, ..ScanConfig::default() }
    }

    #[test]
    fn constant_symbol_has_vanishing_derivative_sups() {
        let p = WormParams::new(PI).unwrap();
        let r = marcinkiewicz_scan(Symbol::Constant { value: 1.0 }, p, &quick()).unwrap();
        for o in &r.orders {
            if (o.k1, o.k2) == (0, 0) {
                assert_eq!(o.sup, 1.0);
            } else {
                assert_eq!(o.sup, 0.0);
                assert_eq!(o.inner_sup, 0.0);
            }
        }
    }

    #[test]
    fn finite_differences_match_known_derivatives() {
        let cfg = ScanConfig::default();
        let f = |x: f64, e: f64| (0.3 * x).sin() * (-0.2 * e * e).exp();
        let d = derivative(&f, 1.1, 0.7, (1, 1), 1.0, &cfg);
        let want = 0.3 * (0.33f64).cos() * (-0.4 * 0.7) * (-0.2 * 0.49f64).exp();
        assert!(d.reliable && (d.value - want).abs() < 1e-8, "{d:?} {want}");
        let d = derivative(&f, 1.1, 0.7, (2, 0), 1.0, &cfg);
        let want = -0.09 * (0.33f64).sin() * (-0.2 * 0.49f64).exp();
        assert!(d.reliable && (d.value - want).abs() < 1e-8);
    }

    #[test]
    fn rejects_parameters_outside_the_unit_interval() {
        let p = WormParams::new(PI).unwrap();
        assert!(marcinkiewicz_scan(Symbol::MAlpha { alpha: 1.0 }, p, &quick()).is_err());
        assert!(marcinkiewicz_scan(Symbol::MAlphaGamma { alpha: 0.5, gamma: 0.0 }, p, &quick()).is_err());
    }

    #[test]
    fn eta_weighted_first_derivative_grows_with_alpha() {
        let p = WormParams::new(PI).unwrap();
        let cfg = ScanConfig { per_decade: 6, ..ScanConfig::default() };
        let a = marcinkiewicz_scan(Symbol::MAlpha { alpha: 0.5 }, p, &cfg).unwrap();
        let b = marcinkiewicz_scan(Symbol::MAlpha { alpha: 0.9 }, p, &cfg).unwrap();
        let (sa, sb) = (a.orders[2].sup, b.orders[2].sup);
        assert!(sa.is_finite() && sb.is_finite());
        let ratio = sb / sa;
        // (1 - 0.5) / (1 - 0.9) = 5.
        assert!(ratio > 5.0 / 3.0 && ratio < 15.0, "{ratio}");
    }
}
