//! Quadrature rules and summation helpers shared by every numerical module.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Gauss–Legendre rule on the reference interval [-1, 1], nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the three-term recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi's initial guess, refined by Newton.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto [a, b].
    pub fn on(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|&s| mid + half * s).collect();
        let w = self.weights.iter().map(|&w| half * w).collect();
        (x, w)
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = NeumaierSum::default();
        for (s, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(mid + half * s));
        }
        half * acc.value()
    }

    /// Barycentric weights for interpolation through these nodes.
    pub fn barycentric_weights(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(k, (&x, &w))| {
                let s = ((1.0 - x * x) * w).sqrt();
                if k % 2 == 0 {
                    s
                } else {
                    -s
                }
            })
            .collect()
    }

    /// Dense matrix (row per target) interpolating samples at the nodes onto `targets`,
    /// all given in reference coordinates.
    pub fn interpolation_matrix(&self, targets: &[f64]) -> Vec<Vec<f64>> {
        let bw = self.barycentric_weights();
        targets
            .iter()
            .map(|&t| {
                if let Some(k) = self.nodes.iter().position(|&x| (x - t).abs() < 1e-15) {
                    let mut row = vec![0.0; self.len()];
                    row[k] = 1.0;
                    return row;
                }
                let terms: Vec<f64> = self.nodes.iter().zip(&bw).map(|(&x, &b)| b / (t - x)).collect();
                let denom: f64 = terms.iter().sum();
                terms.into_iter().map(|v| v / denom).collect()
            })
            .collect()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const GK_XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for i in 0..7 {
        let dx = h * GK_XK[i];
        let s = f(c - dx) + f(c + dx);
        kron += GK_WK[i] * s;
        if i % 2 == 1 {
            gauss += GK_WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive 7/15-point Gauss–Kronrod integration on [a, b].
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> AdaptiveResult {
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    intervals.push((a, b, v, e));
    loop {
        let mut total = NeumaierSum::default();
        let mut err = 0.0;
        let mut worst = 0;
        for (k, iv) in intervals.iter().enumerate() {
            total.add(iv.2);
            err += iv.3;
            if iv.3 > intervals[worst].3 {
                worst = k;
            }
        }
        let value = total.value();
        let tol = abs_tol.max(rel_tol * value.abs());
        if err <= tol || intervals.len() >= max_intervals {
            return AdaptiveResult { value, error: err, converged: err <= tol };
        }
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated summation of complex values, component-wise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// ln(e^a + e^b) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// ln cosh(x), stable for large |x|.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// sinh(x)/x with the removable singularity filled in.
pub fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// ln(sinh(x)/x), stable for large |x|.
pub fn log_sinhc(x: f64) -> f64 {
    let a = x.abs();
    if a < 1e-4 {
        sinhc(a).ln()
    } else {
        a + (-(-2.0 * a).exp_m1()).ln() - (2.0 * a).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(10);
        for k in 0..20 {
            let got = gl.integrate(|x| x.powi(k), -1.0, 1.0);
            let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((got - want).abs() < 1e-14, "k={k} got={got}");
        }
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two_for_large_rules() {
        for n in [1, 2, 7, 64, 128, 257] {
            let gl = GaussLegendre::new(n);
            let s: f64 = gl.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} s={s}");
            assert!(gl.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn gauss_legendre_matches_known_three_point_rule() {
        let gl = GaussLegendre::new(3);
        assert!((gl.nodes[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((gl.weights[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let gl = GaussLegendre::new(12);
        let f = |x: f64| 3.0 * x.powi(11) - x.powi(4) + 0.5;
        let samples: Vec<f64> = gl.nodes.iter().map(|&x| f(x)).collect();
        let targets = [-1.0, -0.33, 0.0, 0.71, 1.0];
        let mat = gl.interpolation_matrix(&targets);
        for (row, &t) in mat.iter().zip(&targets) {
            let v: f64 = row.iter().zip(&samples).map(|(a, b)| a * b).sum();
            assert!((v - f(t)).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn adaptive_gk_handles_endpoint_singularity() {
        let r = adaptive_gk(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12, 1e-12, 2000);
        assert!((r.value - 2.0).abs() < 1e-9, "{:?}", r);
    }

    #[test]
    fn adaptive_gk_gaussian() {
        let r = adaptive_gk(|x| (-x * x).exp(), -10.0, 10.0, 1e-14, 1e-14, 500);
        assert!(r.converged);
        assert!((r.value - PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let mut s = NeumaierSum::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn log_helpers_agree_with_direct_formulas() {
        for x in [-30.0, -2.5, -1e-5, 0.0, 3e-5, 0.7, 12.0] {
            assert!((log_cosh(x) - f64::cosh(x).ln()).abs() < 1e-14);
            assert!((log_sinhc(x) - sinhc(x).ln()).abs() < 1e-14, "x={x}");
        }
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!(log_sinhc(800.0).is_finite());
        assert_eq!(sinhc(0.0), 1.0);
    }
}
