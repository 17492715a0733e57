//! Weighted Bergman spaces of the strip `|Im z| < beta`: the weights `omega_j`,
//! their transform `nu(xi, j)`, the Paley–Wiener correspondence and the
//! reproducing kernels `k_j`.

use crate::error::{Error, Result};
use crate::geometry::WormParams;
use crate::quadrature::{log_add_exp, log_cosh, log_sinhc, sinhc, ComplexSum, GaussLegendre, NeumaierSum};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, OnceLock, RwLock};

/// Default node count of the fixed rule used for the s-integral.
pub const DEFAULT_S_NODES: usize = 64;

/// Above this exponent rate the s-integral switches to the endpoint substitution.
const DIRECT_RATE_LIMIT: f64 = 32.0;
/// Upper limit of the substituted variable; e^-50 is far below double precision.
const SUBSTITUTION_CUTOFF: f64 = 50.0;

fn default_rule() -> Arc<GaussLegendre> {
    static RULE: OnceLock<Arc<GaussLegendre>> = OnceLock::new();
    RULE.get_or_init(|| Arc::new(GaussLegendre::new(DEFAULT_S_NODES))).clone()
}

/// `ln sqrt(1 + 4 e^{-h s})`.
#[inline]
fn log_sqrt_factor(h: f64, s: f64) -> f64 {
    let x = 4f64.ln() - h * s;
    0.5 * (x.max(0.0) + (-x.abs()).exp().ln_1p())
}

/// Evaluator for `nu(xi, j)` and the s-integral behind it.
#[derive(Debug, Clone)]
pub struct NuEvaluator {
    params: WormParams,
    rule: Arc<GaussLegendre>,
}

impl NuEvaluator {
    pub fn new(params: WormParams) -> Self {
        NuEvaluator { params, rule: default_rule() }
    }

    pub fn with_nodes(params: WormParams, nodes: usize) -> Self {
        NuEvaluator { params, rule: Arc::new(GaussLegendre::new(nodes)) }
    }

    pub fn params(&self) -> &WormParams {
        &self.params
    }

    /// `ln of int_{-1}^{1} e^{-a s} sqrt(1 + 4 e^{-h s}) ds`.
    pub fn log_s_integral(&self, a: f64) -> f64 {
        a.abs() + self.log_s_integral_reduced(a)
    }

    /// `ln S(a) - |a|`, computed without forming the large exponent.
    pub fn log_s_integral_reduced(&self, a: f64) -> f64 {
        let h = self.params.half_width();
        if a.abs() <= DIRECT_RATE_LIMIT {
            let exps: Vec<f64> = self.rule.nodes.iter().map(|&s| -a * s + log_sqrt_factor(h, s)).collect();
            let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut acc = NeumaierSum::default();
            for (e, w) in exps.iter().zip(&self.rule.weights) {
                acc.add(w * (e - m).exp());
            }
            return m + acc.value().ln() - a.abs();
        }
        // Dominant endpoint s0 = -sign(a); u = |a| (s - s0) sign measures distance from it.
        let r = a.abs();
        let s0 = -a.signum();
        let upper = (2.0 * r).min(SUBSTITUTION_CUTOFF);
        let (us, ws) = self.rule.on(0.0, upper);
        let mut acc = NeumaierSum::default();
        let mut m = f64::NEG_INFINITY;
        let exps: Vec<f64> = us
            .iter()
            .map(|&u| {
                let s = s0 - s0 * u / r;
                let e = -u + log_sqrt_factor(h, s);
                m = m.max(e);
                e
            })
            .collect();
        for (e, w) in exps.iter().zip(&ws) {
            acc.add(w * (e - m).exp());
        }
        // e^{-a s} = e^{r} e^{-u} at the dominant end; the e^{r} is the part removed.
        m + acc.value().ln() - r.ln()
    }

    /// `ln nu(xi, j)`, finite for all arguments where the result is representable as a log.
    pub fn log_nu(&self, xi: f64, j: f64) -> f64 {
        let h = self.params.half_width();
        let a = h * (2.0 * xi - (j + 1.0));
        let first = h.ln() + log_cosh(PI * xi) + self.log_s_integral(a);
        let second = 2f64.ln() + log_cosh(h * (2.0 * xi - j - 0.5)) + PI.ln() + log_sinhc(PI * xi);
        log_add_exp(first, second)
    }

    /// `nu(xi, j)` by direct evaluation with a composite rule; overflows to infinity
    /// where `nu` is not representable.
    pub fn nu(&self, xi: f64, j: f64) -> f64 {
        let h = self.params.half_width();
        let a = h * (2.0 * xi - (j + 1.0));
        let panels = ((a.abs() / 16.0).ceil() as usize).max(1);
        let mut acc = NeumaierSum::default();
        for p in 0..panels {
            let lo = -1.0 + 2.0 * p as f64 / panels as f64;
            let hi = -1.0 + 2.0 * (p + 1) as f64 / panels as f64;
            acc.add(self.rule.integrate(|s| (-a * s).exp() * (1.0 + 4.0 * (-h * s).exp()).sqrt(), lo, hi));
        }
        h * (PI * xi).cosh() * acc.value() + 2.0 * (h * (2.0 * xi - j - 0.5)).cosh() * PI * sinhc(PI * xi)
    }
}

/// `nu(xi, j)` with the default rule.
pub fn nu(xi: f64, j: i64, params: &WormParams) -> f64 {
    NuEvaluator::new(*params).nu(xi, j as f64)
}

/// `ln nu(xi, j)` with the default rule.
pub fn log_nu(xi: f64, j: i64, params: &WormParams) -> f64 {
    NuEvaluator::new(*params).log_nu(xi, j as f64)
}

/// The weight `omega_j(y)` of the j-th mode space on the strip.
pub fn omega_j(y: f64, j: i64, params: &WormParams) -> Result<f64> {
    let b = params.beta();
    if y.abs() >= b {
        return Err(Error::Domain(format!("|y| = {} not below beta = {b}", y.abs())));
    }
    let h = params.half_width();
    let jf = j as f64;
    let mut w = 0.0;
    // Closed indicators: the pieces meet at the breakpoints, where any choice is
    // measure-zero, and closing them keeps the weight positive when beta = pi.
    if y >= PI - b {
        let t = y - FRAC_PI_2;
        w += PI * (t * (jf + 1.0)).exp() * (1.0 + 4.0 * (-t).exp()).sqrt();
    }
    if y >= b - PI {
        w += 2.0 * PI * (h * (jf + 0.5)).exp();
    }
    if y <= b - PI {
        let t = y + FRAC_PI_2;
        w += PI * (t * (jf + 1.0)).exp() * (1.0 + 4.0 * (-t).exp()).sqrt();
    }
    if y <= PI - b {
        w += 2.0 * PI * (-h * (jf + 0.5)).exp();
    }
    Ok(w)
}

/// Points where `omega_j` is discontinuous, together with the strip ends, sorted.
pub fn omega_breakpoints(params: &WormParams) -> Vec<f64> {
    let b = params.beta();
    let mut pts = vec![-b, b - PI, PI - b, b];
    pts.sort_by(|a, c| a.partial_cmp(c).unwrap());
    pts.dedup_by(|a, c| (*a - *c).abs() < 1e-15);
    pts
}

/// Result of [`decay_constant_fit`].
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    /// `ln sup e^{2 beta |xi|} / nu` over the scan.
    pub log_c: f64,
    /// `e^{log_c}`, possibly infinite.
    pub c: f64,
    pub argmax_xi: f64,
    pub argmax_j: i64,
    /// Per-mode `ln sup`.
    pub per_j: Vec<(i64, f64)>,
}

/// Scans `e^{2 beta |xi|} / nu(xi, j)` over `|xi| <= xi_max`, `|j| <= j_max`.
pub fn decay_constant_fit(j_max: i64, xi_max: f64, dxi: f64, params: &WormParams) -> Result<DecayFit> {
    if j_max < 0 || !(xi_max > 0.0) || !(dxi > 0.0) {
        return Err(Error::InvalidParameter("scan ranges must be nonempty".into()));
    }
    let ev = NuEvaluator::new(*params);
    let n = (xi_max / dxi).round() as i64;
    let two_beta = 2.0 * params.beta();
    let mut best = (f64::NEG_INFINITY, 0.0, 0);
    let mut per_j = Vec::new();
    for j in -j_max..=j_max {
        let mut sup = f64::NEG_INFINITY;
        for k in -n..=n {
            let xi = k as f64 * xi_max / n as f64;
            let v = two_beta * xi.abs() - ev.log_nu(xi, j as f64);
            if v > sup {
                sup = v;
            }
            if v > best.0 {
                best = (v, xi, j);
            }
        }
        per_j.push((j, sup));
    }
    Ok(DecayFit { log_c: best.0, c: best.0.exp(), argmax_xi: best.1, argmax_j: best.2, per_j })
}

/// Diagnostic profile of `nu(xi, j)` against `nu(-xi, j)`.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    /// max |ln nu(xi) - ln nu(-xi)| over the scan.
    pub max_log_asymmetry: f64,
    /// max |nu(xi) - nu(-xi)| / nu(xi), saturating at infinity.
    pub max_rel_asymmetry: f64,
    pub all_positive: bool,
    pub per_j: Vec<(i64, f64)>,
}

pub fn nu_symmetry_scan(params: &WormParams, js: &[i64], xi_max: f64, dxi: f64) -> SymmetryReport {
    let ev = NuEvaluator::new(*params);
    let n = (xi_max / dxi).round().max(1.0) as i64;
    let mut max_log: f64 = 0.0;
    let mut all_positive = true;
    let mut per_j = Vec::new();
    for &j in js {
        let mut m: f64 = 0.0;
        for k in 0..=n {
            let xi = k as f64 * xi_max / n as f64;
            let a = ev.log_nu(xi, j as f64);
            let b = ev.log_nu(-xi, j as f64);
            all_positive &= a.is_finite() && b.is_finite();
            m = m.max((a - b).abs());
        }
        per_j.push((j, m));
        max_log = max_log.max(m);
    }
    SymmetryReport { max_log_asymmetry: max_log, max_rel_asymmetry: max_log.exp_m1(), all_positive, per_j }
}

/// A point of the strip `|Im z| < beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripPoint(Complex64);

impl StripPoint {
    pub fn new(z: Complex64, params: &WormParams) -> Result<Self> {
        if z.im.abs() >= params.beta() || !z.re.is_finite() {
            return Err(Error::Domain(format!("{z} is not inside the strip of half-width {}", params.beta())));
        }
        Ok(StripPoint(z))
    }

    pub fn z(&self) -> Complex64 {
        self.0
    }
}

/// A function on the strip given by its Paley–Wiener density on a uniform xi grid.
#[derive(Debug, Clone)]
pub struct StripFunction {
    pub params: WormParams,
    pub j: i64,
    pub xi_max: f64,
    pub density: Vec<Complex64>,
}

impl StripFunction {
    /// Samples `g` on `n` equispaced points of `[-xi_max, xi_max]` (endpoints included).
    pub fn from_fn<F: FnMut(f64) -> Complex64>(
        params: WormParams,
        j: i64,
        xi_max: f64,
        n: usize,
        mut g: F,
    ) -> Result<Self> {
        if n < 3 || !(xi_max > 0.0) {
            return Err(Error::InvalidParameter("density grid needs at least 3 points on a positive range".into()));
        }
        let step = 2.0 * xi_max / (n - 1) as f64;
        let density = (0..n).map(|k| g(-xi_max + k as f64 * step)).collect();
        Ok(StripFunction { params, j, xi_max, density })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.xi_max / (self.density.len() - 1) as f64
    }

    pub fn xi(&self, k: usize) -> f64 {
        -self.xi_max + k as f64 * self.step()
    }

    fn trap_weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.density.len() {
            0.5 * self.step()
        } else {
            self.step()
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.density.iter_mut().for_each(|g| *g *= c);
        out
    }

    /// `int |g|^2 nu dxi` by the trapezoid rule.
    pub fn spectral_norm_sq(&self) -> f64 {
        let ev = NuEvaluator::new(self.params);
        let mut acc = NeumaierSum::default();
        for (k, g) in self.density.iter().enumerate() {
            acc.add(self.trap_weight(k) * g.norm_sqr() * ev.log_nu(self.xi(k), self.j as f64).exp());
        }
        acc.value()
    }

    /// True when the inversion integrand at height `y` is not negligible at the grid ends.
    pub fn tail_unreliable(&self, y: f64) -> bool {
        let n = self.density.len();
        let mag = |k: usize| self.density[k].norm() * (-y * self.xi(k)).exp();
        let peak = (0..n).map(mag).fold(0.0, f64::max);
        peak > 0.0 && mag(0).max(mag(n - 1)) > 1e-12 * peak
    }

    /// Values `f(x0 + m dx + i y)` for `m < count`, by phase rotation.
    pub fn eval_row(&self, y: f64, x0: f64, dx: f64, count: usize) -> Vec<Complex64> {
        let coeffs: Vec<Complex64> = (0..self.density.len())
            .map(|k| self.density[k] * (-y * self.xi(k)).exp() * self.trap_weight(k) / (2.0 * PI))
            .collect();
        let xis: Vec<f64> = (0..self.density.len()).map(|k| self.xi(k)).collect();
        phase_rotation_sum(&coeffs, &xis, x0, dx, count)
    }
}

/// `sum_k c_k e^{i x_m xi_k}` for `x_m = x0 + m dx`, refreshing phases every 64 rows.
pub fn phase_rotation_sum(coeffs: &[Complex64], xis: &[f64], x0: f64, dx: f64, count: usize) -> Vec<Complex64> {
    let rot: Vec<Complex64> = xis.iter().map(|&xi| Complex64::from_polar(1.0, dx * xi)).collect();
    let mut phase: Vec<Complex64> = Vec::new();
    let mut out = Vec::with_capacity(count);
    for m in 0..count {
        if m % 64 == 0 {
            let x = x0 + m as f64 * dx;
            phase = coeffs.iter().zip(xis).map(|(c, &xi)| c * Complex64::from_polar(1.0, x * xi)).collect();
        } else {
            phase.iter_mut().zip(&rot).for_each(|(p, r)| *p *= r);
        }
        let mut acc = ComplexSum::default();
        phase.iter().for_each(|p| acc.add(*p));
        out.push(acc.value());
    }
    out
}

/// Value of the inversion integral plus the truncation flag.
#[derive(Debug, Clone, Copy)]
pub struct PwValue {
    pub value: Complex64,
    pub tail_unreliable: bool,
}

/// `f(z) = (1/2pi) int e^{i z xi} g(xi) dxi` by the trapezoid rule.
pub fn pw_inverse(f: &StripFunction, z: StripPoint) -> PwValue {
    let z = z.z();
    let value = f.eval_row(z.im, z.re, 0.0, 1)[0];
    PwValue { value, tail_unreliable: f.tail_unreliable(z.im) }
}

/// Resolution of the spatial side of [`parseval_residual`].
#[derive(Debug, Clone, Copy)]
pub struct SpatialQuadrature {
    pub l: f64,
    pub n_x: usize,
    /// Gauss–Legendre nodes per smooth piece of `omega_j`.
    pub n_y: usize,
}

impl Default for SpatialQuadrature {
    fn default() -> Self {
        SpatialQuadrature { l: 20.0, n_x: 400, n_y: 64 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParsevalReport {
    pub residual: f64,
    pub spectral: f64,
    pub spatial: f64,
    pub tail_unreliable: bool,
}

/// Relative gap between `int |g|^2 nu` and the strip integral `int |f|^2 omega_j dA`.
pub fn parseval_residual(f: &StripFunction, quad: SpatialQuadrature) -> Result<ParsevalReport> {
    let spectral = f.spectral_norm_sq();
    let pts = omega_breakpoints(&f.params);
    let gl = GaussLegendre::new(quad.n_y);
    let dx = 2.0 * quad.l / quad.n_x as f64;
    let mut acc = NeumaierSum::default();
    let mut tail = false;
    for piece in pts.windows(2) {
        let (ys, ws) = gl.on(piece[0], piece[1]);
        for (&y, &wy) in ys.iter().zip(&ws) {
            tail |= f.tail_unreliable(y);
            let row = f.eval_row(y, -quad.l, dx, quad.n_x + 1);
            let mut sx = NeumaierSum::default();
            for (m, v) in row.iter().enumerate() {
                let w = if m == 0 || m == quad.n_x { 0.5 } else { 1.0 };
                sx.add(w * v.norm_sqr());
            }
            acc.add(wy * dx * sx.value() * omega_j(y, f.j, &f.params)?);
        }
    }
    let spatial = acc.value();
    Ok(ParsevalReport { residual: (spatial - spectral).abs() / spectral, spectral, spatial, tail_unreliable: tail })
}

/// Cached `ln nu` on a uniform grid `xi_k = k delta` for one mode.
#[derive(Debug)]
struct ModeTable {
    delta: f64,
    kmin: i64,
    log_nu: Vec<f64>,
}

impl ModeTable {
    fn kmax(&self) -> i64 {
        self.kmin + self.log_nu.len() as i64 - 1
    }
}

/// A reproducing-kernel value kept as `mantissa * e^{log_scale}`.
#[derive(Debug, Clone, Copy)]
pub struct KjValue {
    pub log_scale: f64,
    pub mantissa: Complex64,
    /// True if the integration window hit the configured cap.
    pub truncated: bool,
}

impl KjValue {
    pub fn value(&self) -> Complex64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn log_abs(&self) -> f64 {
        self.log_scale + self.mantissa.norm().ln()
    }
}

/// Evaluates the reproducing kernels `k_j` of the mode spaces, caching `ln nu` per mode.
///
/// The cache is filled under a write lock and read concurrently afterwards.
#[derive(Debug)]
pub struct KernelEvaluator {
    nu: NuEvaluator,
    cache: RwLock<HashMap<i64, Arc<ModeTable>>>,
    /// Integrand is truncated where it falls below this fraction of its peak.
    pub tail_ratio: f64,
    /// Hard cap on |xi| for the integration window.
    pub xi_cap: f64,
    initial_delta: f64,
}

impl KernelEvaluator {
    pub fn new(params: WormParams) -> Self {
        KernelEvaluator {
            nu: NuEvaluator::new(params),
            cache: RwLock::new(HashMap::new()),
            tail_ratio: 1e-14,
            xi_cap: 2000.0,
            initial_delta: 0.05,
        }
    }

    pub fn with_xi_cap(mut self, xi_cap: f64) -> Self {
        self.xi_cap = xi_cap;
        self
    }

    pub fn params(&self) -> &WormParams {
        self.nu.params()
    }

    fn table(&self, j: i64) -> Arc<ModeTable> {
        if let Some(t) = self.cache.read().unwrap().get(&j) {
            return t.clone();
        }
        let delta = self.initial_delta;
        let c = 0.5 * (j as f64 + 1.0);
        let lo = (c.min(0.0) - 12.0) / delta;
        let hi = (c.max(0.0) + 12.0) / delta;
        self.build(j, delta, lo.floor() as i64, hi.ceil() as i64)
    }

    fn build(&self, j: i64, delta: f64, kmin: i64, kmax: i64) -> Arc<ModeTable> {
        let log_nu = (kmin..=kmax).map(|k| self.nu.log_nu(k as f64 * delta, j as f64)).collect();
        let t = Arc::new(ModeTable { delta, kmin, log_nu });
        self.cache.write().unwrap().insert(j, t.clone());
        t
    }

    fn extend(&self, j: i64, old: &ModeTable, kmin: i64, kmax: i64) -> Arc<ModeTable> {
        let kmin = kmin.min(old.kmin);
        let kmax = kmax.max(old.kmax());
        let log_nu = (kmin..=kmax)
            .map(|k| {
                if k >= old.kmin && k <= old.kmax() {
                    old.log_nu[(k - old.kmin) as usize]
                } else {
                    self.nu.log_nu(k as f64 * old.delta, j as f64)
                }
            })
            .collect();
        let t = Arc::new(ModeTable { delta: old.delta, kmin, log_nu });
        self.cache.write().unwrap().insert(j, t.clone());
        t
    }

    /// Finds the index window where `-b xi - ln nu` exceeds its peak minus the tail
    /// threshold, growing the cached table as needed. Returns the table, the window
    /// bounds and the peak exponent.
    fn window(&self, j: i64, b: f64) -> (Arc<ModeTable>, i64, i64, f64, bool) {
        let drop = -self.tail_ratio.ln() + 2.0;
        let mut t = self.table(j);
        loop {
            let expo = |k: i64| -b * k as f64 * t.delta - t.log_nu[(k - t.kmin) as usize];
            let (mut kp, mut peak) = (t.kmin, f64::NEG_INFINITY);
            for k in t.kmin..=t.kmax() {
                let e = expo(k);
                if e > peak {
                    peak = e;
                    kp = k;
                }
            }
            let cap = (self.xi_cap / t.delta) as i64;
            let left_ok = expo(t.kmin) < peak - drop || t.kmin <= -cap;
            let right_ok = expo(t.kmax()) < peak - drop || t.kmax() >= cap;
            if left_ok && right_ok {
                let mut lo = kp;
                while lo > t.kmin && expo(lo) >= peak - drop {
                    lo -= 1;
                }
                let mut hi = kp;
                while hi < t.kmax() && expo(hi) >= peak - drop {
                    hi += 1;
                }
                let truncated = expo(lo) >= peak - drop || expo(hi) >= peak - drop;
                return (t.clone(), lo, hi, peak, truncated);
            }
            let width = t.kmax() - t.kmin;
            let new_min = if left_ok { t.kmin } else { (t.kmin - width).max(-cap) };
            let new_max = if right_ok { t.kmax() } else { (t.kmax() + width).min(cap) };
            t = self.extend(j, &t, new_min, new_max);
        }
    }

    /// `k_j(z, w) = (1/4 pi^2) int e^{i (z - conj w) xi} / nu(xi, j) dxi`.
    pub fn k_j(&self, z: StripPoint, w: StripPoint, j: i64) -> KjValue {
        let d = z.z() - w.z().conj();
        loop {
            let (t, lo, hi, peak, truncated) = self.window(j, d.im);
            let mut full = ComplexSum::default();
            let mut even = ComplexSum::default();
            let mut scale = 0.0;
            for k in lo..=hi {
                let xi = k as f64 * t.delta;
                let mag = (-d.im * xi - t.log_nu[(k - t.kmin) as usize] - peak).exp();
                let term = Complex64::from_polar(mag, d.re * xi);
                full.add(term);
                if k.rem_euclid(2) == 0 {
                    even.add(term);
                }
                scale += mag;
            }
            let fine = full.value() * t.delta;
            let coarse = even.value() * 2.0 * t.delta;
            // The trapezoid error squares when the step halves, so a 1e-7 gap
            // between the two nested sums leaves about 1e-14 in the fine one.
            if (fine - coarse).norm() <= 1e-7 * scale * t.delta || t.delta < 1e-3 {
                return KjValue { log_scale: peak - (4.0 * PI * PI).ln(), mantissa: fine, truncated };
            }
            let delta = t.delta / 2.0;
            self.build(j, delta, 2 * t.kmin, 2 * t.kmax());
        }
    }

    /// `k_j(x + i y, w)` for `x = x0 + m dx`, `m < count`.
    pub fn k_j_row(&self, j: i64, y: f64, w: StripPoint, x0: f64, dx: f64, count: usize) -> Vec<Complex64> {
        let probe = StripPoint(Complex64::new(x0, y));
        // Settles the step size for this height before the batch sum.
        let first = self.k_j(probe, w, j);
        let b = y + w.z().im;
        let (t, lo, hi, peak, _) = self.window(j, b);
        let norm = (peak - (4.0 * PI * PI).ln()).exp() * t.delta;
        let wre = w.z().re;
        let xis: Vec<f64> = (lo..=hi).map(|k| k as f64 * t.delta).collect();
        let coeffs: Vec<Complex64> = (lo..=hi)
            .zip(&xis)
            .map(|(k, &xi)| {
                let mag = (-b * xi - t.log_nu[(k - t.kmin) as usize] - peak).exp() * norm;
                Complex64::from_polar(mag, -wre * xi)
            })
            .collect();
        let mut row = phase_rotation_sum(&coeffs, &xis, x0, dx, count);
        if count > 0 {
            row[0] = first.value();
        }
        row
    }
}

/// `k_j(z, w)` with a throwaway evaluator.
pub fn k_j(z: StripPoint, w: StripPoint, j: i64, params: &WormParams) -> Complex64 {
    KernelEvaluator::new(*params).k_j(z, w, j).value()
}

/// `<k_{w0}, k_{w1}>` in the weighted space of mode `j`, computed as the strip integral
/// `int int k_j(z, w0) conj(k_j(z, w1)) omega_j(y) dx dy` with a trapezoid rule in `x` on
/// `[-l, l]` and Gauss–Legendre in `y` on each smooth piece of the weight.
pub fn kernel_inner_product(
    ev: &KernelEvaluator,
    w0: StripPoint,
    w1: StripPoint,
    j: i64,
    quad: SpatialQuadrature,
) -> Result<Complex64> {
    let params = *ev.params();
    let gl = GaussLegendre::new(quad.n_y);
    let dx = 2.0 * quad.l / quad.n_x as f64;
    let mut acc = ComplexSum::default();
    for piece in omega_breakpoints(&params).windows(2) {
        let (ys, ws) = gl.on(piece[0], piece[1]);
        for (&y, &wy) in ys.iter().zip(&ws) {
            let r0 = ev.k_j_row(j, y, w0, -quad.l, dx, quad.n_x + 1);
            let r1 = ev.k_j_row(j, y, w1, -quad.l, dx, quad.n_x + 1);
            let mut row = ComplexSum::default();
            for (m, (a, b)) in r0.iter().zip(&r1).enumerate() {
                let w = if m == 0 || m == quad.n_x { 0.5 } else { 1.0 };
                row.add(a * b.conj() * w);
            }
            acc.add(row.value() * (wy * dx * omega_j(y, j, &params)?));
        }
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_gk;

    const NU_0_M1_PI: f64 = 16.058_385_522_506_908_476_260_373_915_537_842_986_405_309_714_472;

    fn pi_params() -> WormParams {
        WormParams::new(PI).unwrap()
    }

    #[test]
    fn nu_at_origin_matches_high_precision_value() {
        let p = pi_params();
        let v = nu(0.0, -1, &p);
        assert!((v - NU_0_M1_PI).abs() < 1e-14 * NU_0_M1_PI, "{v}");
        assert!((log_nu(0.0, -1, &p) - NU_0_M1_PI.ln()).abs() < 1e-14);
    }

    #[test]
    fn nu_at_origin_matches_its_closed_form_structure() {
        let p = pi_params();
        let h = p.half_width();
        let s = GaussLegendre::new(64).integrate(|s| (1.0 + 4.0 * (-h * s).exp()).sqrt(), -1.0, 1.0);
        let want = h * s + 2.0 * PI * (0.5 * h).cosh();
        assert!((nu(0.0, -1, &p) - want).abs() < 1e-13 * want);
    }

    #[test]
    fn nu_matches_frozen_high_precision_values() {
        let cases = [
            (0.7, 2, PI, 94.735_950_280_060_618_345_536),
            (-1.3, -3, PI, 266.039_513_475_271_242_968_58),
            (0.5, 0, 0.6 * PI, 12.858_227_730_990_828_093_501),
            (3.0, 5, 1.5 * PI, 135_488.922_721_233_840_198_95),
        ];
        for (xi, j, beta, want) in cases {
            let p = WormParams::new(beta).unwrap();
            let got = nu(xi, j, &p);
            assert!((got - want).abs() < 2e-14 * want, "nu({xi},{j}) = {got} want {want}");
            assert!((log_nu(xi, j, &p) - f64::ln(want)).abs() < 1e-13);
        }
    }

    #[test]
    fn log_nu_agrees_with_direct_nu() {
        for beta in [0.6 * PI, PI, 1.5 * PI] {
            let p = WormParams::new(beta).unwrap();
            let ev = NuEvaluator::new(p);
            for j in -5..=5 {
                for k in -40..=40 {
                    let xi = k as f64 * 0.25;
                    let direct = ev.nu(xi, j as f64);
                    let viaslog = ev.log_nu(xi, j as f64).exp();
                    assert!((direct - viaslog).abs() < 1e-12 * direct, "beta={beta} xi={xi} j={j}");
                }
            }
        }
    }

    #[test]
    fn log_nu_agrees_with_direct_nu_at_steep_rates() {
        let p = pi_params();
        let ev = NuEvaluator::new(p);
        for (xi, j) in [(20.0, -30.0), (-15.0, 40.0), (30.0, 0.0), (-25.0, -60.0), (12.0, 80.0)] {
            let direct = ev.nu(xi, j);
            assert!(direct.is_finite());
            let rel = (ev.log_nu(xi, j).exp() - direct).abs() / direct;
            assert!(rel < 1e-12, "xi={xi} j={j} rel={rel}");
        }
    }

    #[test]
    fn log_nu_large_xi_grows_like_two_beta_xi() {
        let p = pi_params();
        let v = log_nu(100.0, 0, &p);
        assert!(v.is_finite());
        let off = v - 2.0 * PI * 100.0;
        assert!(off.abs() < 10.0, "offset {off}");
        // The offset settles to a constant minus ln xi.
        let fit: Vec<f64> = [50.0, 100.0, 200.0].iter().map(|&x| log_nu(x, 0, &p) - 2.0 * PI * x + x.ln()).collect();
        assert!((fit[0] - fit[2]).abs() < 1e-2, "{fit:?}");
    }

    #[test]
    fn nu_positive_on_large_grid() {
        let p = pi_params();
        let ev = NuEvaluator::new(p);
        for j in -60..=60 {
            for k in -80..=80 {
                let v = ev.log_nu(k as f64 * 0.5, j as f64);
                assert!(v.is_finite());
            }
        }
    }

    #[test]
    fn sinh_factor_limit_at_zero() {
        assert_eq!(PI * sinhc(PI * 0.0), PI);
        let tiny = 1e-9;
        assert!((PI * sinhc(PI * tiny) - (PI * tiny).sinh() / tiny).abs() < 1e-15);
    }

    #[test]
    fn omega_example_at_zero() {
        let p = pi_params();
        let want = PI * (1.0 + 4.0 * FRAC_PI_2.exp()).sqrt()
            + PI * (1.0 + 4.0 * (-FRAC_PI_2).exp()).sqrt()
            + 2.0 * PI * (-PI / 4.0).exp()
            + 2.0 * PI * (PI / 4.0).exp();
        assert!((omega_j(0.0, -1, &p).unwrap() - want).abs() < 1e-13);
        assert!(omega_j(PI, 0, &p).is_err());
    }

    #[test]
    fn omega_near_top_has_only_upper_terms() {
        let p = pi_params();
        let y = PI - 1e-9;
        let t = y - FRAC_PI_2;
        let want = PI * t.exp() * (1.0 + 4.0 * (-t).exp()).sqrt() + 2.0 * PI * (p.half_width() * 0.5).exp();
        assert!((omega_j(y, 0, &p).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn omega_transform_matches_nu_by_adaptive_quadrature() {
        for beta in [0.6 * PI, PI] {
            let p = WormParams::new(beta).unwrap();
            let pts = omega_breakpoints(&p);
            for xi in [0.0, 1.0, -1.0] {
                for j in -2..=2 {
                    let mut total = 0.0;
                    for w in pts.windows(2) {
                        let r = adaptive_gk(
                            |y| (-2.0 * y * xi).exp() * omega_j(y, j, &p).unwrap(),
                            w[0],
                            w[1],
                            0.0,
                            1e-15,
                            400,
                        );
                        total += r.value;
                    }
                    total /= 2.0 * PI;
                    let want = nu(xi, j, &p);
                    assert!((total - want).abs() < 1e-10 * want, "beta={beta} xi={xi} j={j}");
                }
            }
        }
    }

    #[test]
    fn evenness_fails_away_from_special_modes() {
        let p = pi_params();
        let rep = nu_symmetry_scan(&p, &[-1], 10.0, 0.05);
        assert!(rep.all_positive);
        assert!(rep.max_log_asymmetry > 1.0, "{rep:?}");
        let finer = nu_symmetry_scan(&p, &[-1], 10.0, 0.025);
        assert!((finer.max_log_asymmetry - rep.max_log_asymmetry).abs() < 0.01 * rep.max_log_asymmetry);
    }

    #[test]
    fn decay_constant_is_finite_but_mode_dependent() {
        let p = pi_params();
        let fit = decay_constant_fit(60, 40.0, 0.1, &p).unwrap();
        assert!(fit.log_c.is_finite());
        let small = fit.per_j.iter().find(|(j, _)| *j == 0).unwrap().1;
        let large = fit.per_j.iter().find(|(j, _)| *j == 60).unwrap().1;
        // The sup at mode 60 exceeds the one at mode 0 by many orders of magnitude.
        assert!(large - small > 20.0, "small={small} large={large}");
    }

    #[test]
    fn pw_inverse_gaussian_at_origin() {
        let p = pi_params();
        let f = StripFunction::from_fn(p, 0, 12.0, 961, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        let v = pw_inverse(&f, StripPoint::new(Complex64::new(0.0, 0.0), &p).unwrap());
        assert!((v.value - Complex64::new(PI.sqrt() / (2.0 * PI), 0.0)).norm() < 1e-14);
        assert!(!v.tail_unreliable);
        let zero = StripFunction::from_fn(p, 0, 5.0, 11, |_| Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(
            pw_inverse(&zero, StripPoint::new(Complex64::new(0.3, 1.0), &p).unwrap()).value,
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn pw_inverse_flags_short_grids() {
        let p = pi_params();
        let f = StripFunction::from_fn(p, 0, 2.0, 81, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        assert!(pw_inverse(&f, StripPoint::new(Complex64::new(0.0, 1.0), &p).unwrap()).tail_unreliable);
    }

    #[test]
    fn parseval_examples() {
        let p = pi_params();
        let g = StripFunction::from_fn(p, 0, 12.0, 481, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        let r = parseval_residual(&g, SpatialQuadrature::default()).unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
        let scaled = parseval_residual(&g.scaled(Complex64::new(3.0, -2.0)), SpatialQuadrature::default()).unwrap();
        assert!((scaled.residual - r.residual).abs() < 1e-12);
        let p6 = WormParams::new(0.6 * PI).unwrap();
        let g =
            StripFunction::from_fn(p6, -3, 14.0, 561, |x| Complex64::new((-(x - 2.0) * (x - 2.0)).exp(), 0.0)).unwrap();
        let r = parseval_residual(&g, SpatialQuadrature::default()).unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
    }

    #[test]
    fn k_j_matches_frozen_high_precision_values() {
        let p = pi_params();
        let ev = KernelEvaluator::new(p);
        let sp = |re, im| StripPoint::new(Complex64::new(re, im), &p).unwrap();
        let k0 = ev.k_j(sp(0.0, 0.3), sp(-0.2, 0.1), 0).value();
        let want0 = Complex64::new(0.001_286_098_816_601_350_449_908_966, 0.000_020_657_016_668_146_766_569_910_1);
        assert!((k0 - want0).norm() < 1e-12 * want0.norm(), "{k0}");
        let k2 = ev.k_j(sp(0.5, -0.4), sp(0.1, 0.8), 2).value();
        let want2 = Complex64::new(0.000_248_885_234_021_473_140_070_732, 0.000_053_375_617_448_814_528_529_179_25);
        assert!((k2 - want2).norm() < 1e-12 * want2.norm(), "{k2}");
    }

    #[test]
    fn k_j_symmetries() {
        let p = pi_params();
        let ev = KernelEvaluator::new(p);
        let sp = |re, im| StripPoint::new(Complex64::new(re, im), &p).unwrap();
        for j in [-3, 0, 4] {
            let a = ev.k_j(sp(0.4, 1.2), sp(-1.0, -2.5), j).value();
            let b = ev.k_j(sp(-1.0, -2.5), sp(0.4, 1.2), j).value();
            assert!((a - b.conj()).norm() < 1e-12 * a.norm());
            let c = ev.k_j(sp(3.4, 1.2), sp(2.0, -2.5), j).value();
            assert!((a - c).norm() < 1e-12 * a.norm());
        }
    }

    #[test]
    fn kernel_inner_product_reproduces() {
        let p = pi_params();
        let ev = KernelEvaluator::new(p);
        let sp = |re, im| StripPoint::new(Complex64::new(re, im), &p).unwrap();
        let (w0, w1) = (sp(0.2, 0.5), sp(-0.6, -1.0));
        let quad = SpatialQuadrature { l: 20.0, n_x: 800, n_y: 48 };
        let g = kernel_inner_product(&ev, w0, w1, 1, quad).unwrap();
        let want = ev.k_j(w1, w0, 1).value();
        assert!((g - want).norm() < 1e-4 * want.norm(), "{g} {want}");
    }

    #[test]
    fn k_j_row_matches_pointwise() {
        let p = pi_params();
        let ev = KernelEvaluator::new(p);
        let w = StripPoint::new(Complex64::new(0.0, 0.1), &p).unwrap();
        let row = ev.k_j_row(1, 2.0, w, -5.0, 0.37, 200);
        for m in [0, 1, 63, 64, 130, 199] {
            let z = StripPoint::new(Complex64::new(-5.0 + m as f64 * 0.37, 2.0), &p).unwrap();
            let v = ev.k_j(z, w, 1).value();
            assert!((row[m] - v).norm() < 1e-12 * row.iter().map(|c| c.norm()).fold(0.0, f64::max), "m={m}");
        }
    }
}
