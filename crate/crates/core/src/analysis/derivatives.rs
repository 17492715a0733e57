//! Closed-form derivatives of `m_alpha = e^{xi + alpha eta} / D` against finite differences.

use super::marcinkiewicz::{derivative, ScanConfig};
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Display {
    /// `d_xi m = psi_alpha [sinh(eta)/eta - cosh(eta)/xi + cosh(eta) sinh(xi)/xi^2 e^xi]`.
    DerivativeXi,
    /// `d_eta m = [(alpha - 1) + phi / D] m`.
    DerivativeEta,
    /// `d_eta^2 m = [(alpha - 1) + phi/D] d_eta m + m/D^2 [d_eta phi D - phi d_eta D]`.
    SecondEta,
    /// `I + II` with the printed expanded form of `II`.
    SecondEtaExpandedPrinted,
    /// `I + II` with the expanded form of `II` after replacing `-sinh^2(xi)/xi^2` by `-eta^2 sinh^2(xi)/xi^2`.
    SecondEtaExpandedCorrected,
    /// `d_xi^2 m` in the factored form with the two bracket products over `D^3`.
    SecondXiFactored,
    /// `d_xi^2 m` in the printed fully expanded form.
    SecondXiExpandedPrinted,
    /// The expanded form with the sign of the `xi e^{-xi}` term flipped and the
    /// missing `-xi^2 sinh^2(eta)/eta^2 sinh(xi)` term restored.
    SecondXiExpandedCorrected,
    /// `d_xi d_eta m`.
    Mixed,
}

impl Display {
    pub const ALL: [Display; 9] = [
        Display::DerivativeXi,
        Display::DerivativeEta,
        Display::SecondEta,
        Display::SecondEtaExpandedPrinted,
        Display::SecondEtaExpandedCorrected,
        Display::SecondXiFactored,
        Display::SecondXiExpandedPrinted,
        Display::SecondXiExpandedCorrected,
        Display::Mixed,
    ];

    pub fn order(self) -> (u8, u8) {
        match self {
            Display::DerivativeXi => (1, 0),
            Display::DerivativeEta => (0, 1),
            Display::SecondEta | Display::SecondEtaExpandedPrinted | Display::SecondEtaExpandedCorrected => (0, 2),
            Display::SecondXiFactored | Display::SecondXiExpandedPrinted | Display::SecondXiExpandedCorrected => (2, 0),
            Display::Mixed => (1, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Display::DerivativeXi => "derivative_xi",
            Display::DerivativeEta => "derivative_eta",
            Display::SecondEta => "second_eta",
            Display::SecondEtaExpandedPrinted => "second_eta_expanded_printed",
            Display::SecondEtaExpandedCorrected => "second_eta_expanded_corrected",
            Display::SecondXiFactored => "second_xi_factored",
            Display::SecondXiExpandedPrinted => "second_xi_expanded_printed",
            Display::SecondXiExpandedCorrected => "second_xi_expanded_corrected",
            Display::Mixed => "mixed",
        }
    }
}

/// Hyperbolic building blocks at one point.
struct Point {
    x: f64,
    e: f64,
    sx: f64,
    cx: f64,
    se: f64,
    ce: f64,
    alpha: f64,
}

impl Point {
    fn new(x: f64, e: f64, alpha: f64) -> Self {
        Point { x, e, sx: x.sinh(), cx: x.cosh(), se: e.sinh(), ce: e.cosh(), alpha }
    }
    fn d(&self) -> f64 {
        self.ce * self.sx / self.x + self.se / self.e * self.cx
    }
    fn d_eta(&self) -> f64 {
        self.se * self.sx / self.x + self.cx * (self.ce / self.e - self.se / (self.e * self.e))
    }
    fn m(&self) -> f64 {
        (self.x + self.alpha * self.e).exp() / self.d()
    }
    fn phi(&self) -> f64 {
        (-self.e).exp() * (self.sx / self.x - self.cx / self.e) + self.cx * self.se / (self.e * self.e)
    }
    fn phi_eta(&self) -> f64 {
        let (x, e) = (self.x, self.e);
        -(-e).exp() * (self.sx / x - self.cx / e)
            + (-e).exp() * self.cx / (e * e)
            + self.cx * (self.ce / (e * e) - 2.0 * self.se / (e * e * e))
    }
    fn eta_factor(&self) -> f64 {
        (self.alpha - 1.0) + self.phi() / self.d()
    }
    fn dxi(&self) -> f64 {
        let (x, e) = (self.x, self.e);
        let psi = (self.alpha * e).exp() / self.d().powi(2);
        psi * (self.se / e - self.ce / x + self.ce * self.sx / (x * x) * x.exp())
    }
    fn dxi2_prefactor(&self) -> f64 {
        2.0 * (self.alpha * self.e).exp() / (self.x * self.x * self.d().powi(3))
    }
    fn dxi2_printed_brace(&self) -> f64 {
        let (x, e) = (self.x, self.e);
        let (sx, cx, se, ce) = (self.sx, self.cx, self.se, self.ce);
        ce * se / e * x * (-x).exp() + ce * ce * cx + ce * se / e * (x.exp() + sx)
            - cx * ce * sx / x * se / e * x.exp()
            - ce * ce * sx / x
    }
    fn ii_expanded(&self, corrected: bool) -> f64 {
        let (x, e) = (self.x, self.e);
        let (sx, cx, se, ce) = (self.sx, self.cx, self.se, self.ce);
        let sinhc2 = (sx / x).powi(2);
        let term = if corrected { e * e * sinhc2 } else { sinhc2 };
        let bracket =
            2.0 * cx * sx / x + cx * cx - term - cx * cx * (se / e).powi(2) - 2.0 * cx * ce * (sx / x) * (se / e);
        self.m() / (e * e * self.d().powi(2)) * bracket
    }

    fn closed_form(&self, display: Display) -> f64 {
        let (x, e) = (self.x, self.e);
        let (sx, cx, se, ce) = (self.sx, self.cx, self.se, self.ce);
        let m = self.m();
        let d = self.d();
        match display {
            Display::DerivativeXi => self.dxi(),
            Display::DerivativeEta => self.eta_factor() * m,
            Display::SecondEta => {
                let deta = self.eta_factor() * m;
                self.eta_factor() * deta + m / (d * d) * (self.phi_eta() * d - self.phi() * self.d_eta())
            }
            Display::SecondEtaExpandedPrinted => self.eta_factor().powi(2) * m + self.ii_expanded(false),
            Display::SecondEtaExpandedCorrected => self.eta_factor().powi(2) * m + self.ii_expanded(true),
            Display::SecondXiFactored => {
                let pre = e * (self.alpha * e).exp() / se / (x * x) * (se / e) / d.powi(3);
                let a = -2.0 * (ce * (cx - sx / x) + se / e * x * sx) * (x * se / e - ce + ce * sx / x * x.exp());
                let b = (cx * se / e + ce * sx / x)
                    * (ce + ce * cx * x.exp() - 2.0 * ce * sx / x * x.exp() + ce * sx * x.exp());
                pre * (a + b)
            }
            Display::SecondXiExpandedPrinted => self.dxi2_prefactor() * self.dxi2_printed_brace(),
            Display::SecondXiExpandedCorrected => {
                let fix = -2.0 * ce * se / e * x * (-x).exp() - x * x * (se / e).powi(2) * sx;
                self.dxi2_prefactor() * (self.dxi2_printed_brace() + fix)
            }
            Display::Mixed => {
                let extra = 1.0 / (x * e) * (1.0 - cx * sx / x) * (1.0 - ce * se / e);
                self.dxi() * self.eta_factor() + m / (d * d) * extra
            }
        }
    }
}

/// `phi(xi, eta) / D(xi, eta)`.
pub fn phi_over_d(xi: f64, eta: f64) -> f64 {
    let p = Point::new(xi, eta, 0.5);
    p.phi() / p.d()
}

#[derive(Debug, Clone, Serialize)]
pub struct DisplayRow {
    pub display: Display,
    pub xi: f64,
    pub eta: f64,
    pub closed_form: f64,
    pub finite_difference: f64,
    pub rel_residual: f64,
    pub fd_certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DisplaySummary {
    pub display: Display,
    pub max_rel_residual: f64,
    pub all_certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeCheckReport {
    pub alpha: f64,
    pub rows: Vec<DisplayRow>,
    pub summary: Vec<DisplaySummary>,
}

impl DerivativeCheckReport {
    pub fn max_residual(&self, display: Display) -> f64 {
        self.summary.iter().find(|s| s.display == display).map(|s| s.max_rel_residual).unwrap_or(f64::NAN)
    }
}

/// Twenty points away from the coordinate axes, with moderate magnitudes.
pub fn default_check_grid() -> Vec<(f64, f64)> {
    let mut g = Vec::new();
    for &xi in &[-1.7, 0.6, 1.0, 2.0, 3.3] {
        for &eta in &[1.0, 2.0, 3.1, 4.6] {
            g.push((xi, eta));
        }
    }
    g
}

/// Step settings for the high-accuracy difference quotients used here.
pub fn check_fd_config() -> ScanConfig {
    ScanConfig { h0: 0.02, rel_tol: 1e-8, abs_floor: 0.0, scale_rel: 0.0, max_halvings: 8, ..ScanConfig::default() }
}

/// Compares every closed form with certified finite differences of `m_alpha` on `grid`.
pub fn derivative_formula_check(alpha: f64, grid: &[(f64, f64)]) -> Result<DerivativeCheckReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    if let Some(&(x, e)) = grid.iter().find(|(x, e)| x.abs() < 1e-3 || e.abs() < 1e-3) {
        return Err(Error::Domain(format!("grid point ({x}, {e}) too close to an axis")));
    }
    let cfg = check_fd_config();
    let f = |x: f64, e: f64| Point::new(x, e, alpha).m();
    let mut rows = Vec::new();
    for &(xi, eta) in grid {
        let p = Point::new(xi, eta, alpha);
        let mut fd_cache: Vec<((u8, u8), (f64, bool))> = Vec::new();
        for display in Display::ALL {
            let order = display.order();
            let fd = match fd_cache.iter().find(|(o, _)| *o == order) {
                Some((_, v)) => *v,
                None => {
                    let d = derivative(&f, xi, eta, order, 1.0, &cfg);
                    fd_cache.push((order, (d.value, d.reliable)));
                    (d.value, d.reliable)
                }
            };
            let closed = p.closed_form(display);
            rows.push(DisplayRow {
                display,
                xi,
                eta,
                closed_form: closed,
                finite_difference: fd.0,
                rel_residual: (closed - fd.0).abs() / fd.0.abs(),
                fd_certified: fd.1,
            });
        }
    }
    let summary = Display::ALL
        .iter()
        .map(|&display| {
            let mine: Vec<&DisplayRow> = rows.iter().filter(|r| r.display == display).collect();
            DisplaySummary {
                display,
                max_rel_residual: mine.iter().map(|r| r.rel_residual).fold(0.0, f64::max),
                all_certified: mine.iter().all(|r| r.fd_certified),
            }
        })
        .collect();
    Ok(DerivativeCheckReport { alpha, rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_examples() {
        let r = derivative_formula_check(0.5, &[(1.0, 2.0)]).unwrap();
        assert!(r.max_residual(Display::DerivativeEta) < 1e-6, "{r:?}");
        let r = derivative_formula_check(0.3, &[(2.0, 1.0)]).unwrap();
        assert!(r.max_residual(Display::DerivativeXi) < 1e-6, "{r:?}");
    }

    #[test]
    fn correct_displays_match_on_the_grid() {
        for alpha in [0.3, 0.5, 0.9] {
            let r = derivative_formula_check(alpha, &default_check_grid()).unwrap();
            for d in [
                Display::DerivativeXi,
                Display::DerivativeEta,
                Display::SecondEta,
                Display::SecondEtaExpandedCorrected,
                Display::SecondXiFactored,
                Display::SecondXiExpandedCorrected,
                Display::Mixed,
            ] {
                assert!(r.max_residual(d) < 1e-6, "{alpha} {d:?} {}", r.max_residual(d));
            }
        }
    }

    #[test]
    fn printed_expansions_do_not_match() {
        let r = derivative_formula_check(0.5, &[(1.0, 2.0)]).unwrap();
        let row = r.rows.iter().find(|x| x.display == Display::SecondEtaExpandedPrinted).unwrap();
        // True d_eta^2 m versus I + printed II at (1, 2).
        assert!(row.rel_residual > 1e-2, "{row:?}");
        assert!(r.max_residual(Display::SecondXiExpandedPrinted) > 1e-2);
    }

    #[test]
    fn second_part_value_at_one_two() {
        // II = m/D^2 (d_eta phi D - phi d_eta D) at (1, 2), alpha = 1/2, from a symbolic oracle.
        let p = Point::new(1.0, 2.0, 0.5);
        let ii = p.m() / p.d().powi(2) * (p.phi_eta() * p.d() - p.phi() * p.d_eta());
        assert!((ii - (-0.157_532_695_624_630)).abs() < 1e-13);
        assert!((p.ii_expanded(false) - (-0.137_193_479_930_977)).abs() < 1e-13);
    }

    #[test]
    fn phi_over_d_decays_along_xi_one() {
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let eta = 2f64.powi(k);
            let v = phi_over_d(1.0, eta).abs();
            assert!(eta * eta * v < 1.5, "{eta} {v}");
            if k > 2 {
                assert!(v < prev);
            }
            prev = v;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn rejects_axis_points_and_bad_alpha() {
        assert!(derivative_formula_check(0.5, &[(0.0, 1.0)]).is_err());
        assert!(derivative_formula_check(1.5, &[(1.0, 1.0)]).is_err());
    }
}
