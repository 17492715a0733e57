//! The boundary Szego projection assembled from sheet-pair Fourier multipliers.
//!
//! For each frequency pair `(xi, j)` the projection acts on the vertical
//! coordinate as the rank-one operator `Phi -> a <a, Phi>_sigma / nu` with
//! `a_l(y) = exp(lambda_l(y) j / 2 - y xi)`. The sheet-pair symbol
//! `m(y, t) = a(y) a(t) / nu` therefore factors as `A(y) A(t)` with
//! `A = a / sqrt(nu)`, which is what the transforms below exploit.

use crate::error::{Error, Result};
use crate::geometry::{
    lambda_of, lambda_slope, lambda_weight, lambda_weight_log_slope, surface_weight, BoundaryField, FieldGrid, SheetId,
    WormParams,
};
use crate::quadrature::GaussLegendre;
use crate::strip::{KernelEvaluator, NuEvaluator, StripPoint};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// A sheet pair with an output height `y` and an input height `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheetPairMultiplier {
    pub out_sheet: SheetId,
    pub in_sheet: SheetId,
    pub y: f64,
    pub t: f64,
}

impl SheetPairMultiplier {
    pub fn new(out_sheet: SheetId, in_sheet: SheetId, y: f64, t: f64, params: &WormParams) -> Result<Self> {
        if !params.contains(out_sheet, y) || !params.contains(in_sheet, t) {
            return Err(Error::Domain(format!(
                "(y, t) = ({y}, {t}) outside the intervals of sheets ({}, {})",
                out_sheet.label(),
                in_sheet.label()
            )));
        }
        Ok(SheetPairMultiplier { out_sheet, in_sheet, y, t })
    }

    /// `c = (lambda_out(y) + lambda_in(t)) / 2`.
    pub fn c(&self, params: &WormParams) -> f64 {
        0.5 * (lambda_of(self.out_sheet, self.y, params) + lambda_of(self.in_sheet, self.t, params))
    }
}

/// `ln m = c j - (t + y) xi - ln nu(xi, j)`.
pub fn log_unified_multiplier(pair: &SheetPairMultiplier, xi: f64, j: i64, params: &WormParams) -> f64 {
    pair.c(params) * j as f64 - (pair.t + pair.y) * xi - NuEvaluator::new(*params).log_nu(xi, j as f64)
}

/// The symbol of the fiber operator between two sheets at heights `(y, t)`.
pub fn unified_multiplier(pair: &SheetPairMultiplier, xi: f64, j: i64, params: &WormParams) -> f64 {
    log_unified_multiplier(pair, xi, j, params).exp()
}

/// θ-Fourier coefficients of a field, layout `[sheet][v][x][j-index]`.
#[derive(Debug, Clone)]
pub struct SpectralField {
    pub grid: Arc<FieldGrid>,
    /// Mode number of each j-index, in transform order.
    pub modes: Vec<i64>,
    pub data: Vec<Complex64>,
}

/// Mode numbers in discrete-transform order for `n` samples.
pub fn transform_modes(n: usize) -> Vec<i64> {
    (0..n).map(|k| if k < n / 2 { k as i64 } else { k as i64 - n as i64 }).collect()
}

/// `(1/2pi) int f e^{-i j theta} d theta` on every (sheet, v, x) line.
pub fn theta_mode_decompose(field: &BoundaryField) -> SpectralField {
    let n = field.grid.spec.n_theta;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut data = field.data.clone();
    fft.process(&mut data);
    let s = 1.0 / n as f64;
    data.iter_mut().for_each(|z| *z *= s);
    SpectralField { grid: field.grid.clone(), modes: transform_modes(n), data }
}

/// Inverse of [`theta_mode_decompose`].
pub fn theta_mode_compose(spec: &SpectralField) -> BoundaryField {
    let n = spec.grid.spec.n_theta;
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let mut data = spec.data.clone();
    fft.process(&mut data);
    BoundaryField { grid: spec.grid.clone(), data }
}

/// Which weights the fiber transform attaches on each side.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Weighting {
    /// The projection itself: surface measure on the input, nothing on the output.
    Projection,
    /// Chart form `Lambda_out P Lambda_in^{-1}`.
    Chart,
}

/// Discrete Szego projection on a [`FieldGrid`].
///
/// The x-direction uses zero-padded transforms of twice the window length, so
/// the operator realized is the projection compressed to the window.
pub struct Projector {
    grid: Arc<FieldGrid>,
    n_t: usize,
    pad: usize,
    xi: Vec<f64>,
    modes: Vec<i64>,
    /// `0.5 ln nu(xi_m, j)`, layout `[j-index][m]`.
    half_log_nu: Vec<f64>,
    t_nodes: [Vec<f64>; 4],
    t_weights: [Vec<f64>; 4],
    /// Rows interpolate the v-samples onto the t-nodes; `None` when they coincide.
    interp: Option<Vec<Vec<f64>>>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_t: Arc<dyn Fft<f64>>,
    ifft_t: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Projector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Projector").field("spec", &self.grid.spec).field("n_t", &self.n_t).finish()
    }
}

impl Projector {
    pub fn new(grid: Arc<FieldGrid>, n_t: usize) -> Result<Self> {
        if n_t == 0 {
            return Err(Error::EmptyGrid);
        }
        let params = grid.params;
        let spec = grid.spec;
        let pad = 2 * spec.n_x;
        let dx = grid.dx;
        let xi: Vec<f64> = transform_modes(pad).iter().map(|&k| 2.0 * PI * k as f64 / (pad as f64 * dx)).collect();
        let modes = transform_modes(spec.n_theta);
        let ev = NuEvaluator::new(params);
        let mut half_log_nu = Vec::with_capacity(modes.len() * pad);
        for &j in &modes {
            for &x in &xi {
                half_log_nu.push(0.5 * ev.log_nu(x, j as f64));
            }
        }
        let rule_t = GaussLegendre::new(n_t);
        let mut t_nodes: [Vec<f64>; 4] = Default::default();
        let mut t_weights: [Vec<f64>; 4] = Default::default();
        for s in SheetId::ALL {
            let (a, b) = params.interval(s);
            let (n, w) = rule_t.on(a, b);
            t_nodes[s.idx()] = n;
            t_weights[s.idx()] = w;
        }
        let interp = (n_t != spec.n_v).then(|| GaussLegendre::new(spec.n_v).interpolation_matrix(&rule_t.nodes));
        let mut planner = FftPlanner::new();
        Ok(Projector {
            fft_x: planner.plan_fft_forward(pad),
            ifft_x: planner.plan_fft_inverse(pad),
            fft_t: planner.plan_fft_forward(spec.n_theta),
            ifft_t: planner.plan_fft_inverse(spec.n_theta),
            grid,
            n_t,
            pad,
            xi,
            modes,
            half_log_nu,
            t_nodes,
            t_weights,
            interp,
        })
    }

    pub fn grid(&self) -> &Arc<FieldGrid> {
        &self.grid
    }

    pub fn params(&self) -> &WormParams {
        &self.grid.params
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// Angular frequencies of the padded x transform.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    /// `ln A(xi_m, j, sheet, y)`.
    #[inline]
    fn log_a(&self, sheet: SheetId, y: f64, jk: usize, m: usize) -> f64 {
        let lam = lambda_of(sheet, y, self.params());
        0.5 * lam * self.modes[jk] as f64 - y * self.xi[m] - self.half_log_nu[jk * self.pad + m]
    }

    /// Input slice of `sheet` at the k-th t-node, layout `[x][theta]`.
    fn input_slice(&self, field: &BoundaryField, sheet: SheetId, k: usize) -> Vec<Complex64> {
        let row = self.grid.spec.n_x * self.grid.spec.n_theta;
        let src = field.sheet_slice(sheet);
        match &self.interp {
            None => src[k * row..(k + 1) * row].to_vec(),
            Some(mat) => {
                let mut out = vec![Complex64::new(0.0, 0.0); row];
                for (iv, &c) in mat[k].iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    for (o, s) in out.iter_mut().zip(&src[iv * row..(iv + 1) * row]) {
                        *o += s * c;
                    }
                }
                out
            }
        }
    }

    /// Accumulates `s(xi, j) = sum_t W(t) A(t) hat(psi)(xi, j, t)` over the given input sheets.
    fn fiber_coefficients(&self, field: &BoundaryField, in_sheets: &[SheetId], weighting: Weighting) -> Vec<Complex64> {
        let (nx, nth) = (self.grid.spec.n_x, self.grid.spec.n_theta);
        let params = *self.params();
        let mut acc = vec![Complex64::new(0.0, 0.0); nth * self.pad];
        let mut buf = vec![Complex64::new(0.0, 0.0); nth * self.pad];
        for &s in in_sheets {
            for k in 0..self.n_t {
                let t = self.t_nodes[s.idx()][k];
                let mut w = self.t_weights[s.idx()][k] * surface_weight(s, t, &params);
                if weighting == Weighting::Chart {
                    w /= lambda_weight(s, t, &params);
                }
                let mut slice = self.input_slice(field, s, k);
                if slice.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                    continue;
                }
                self.fft_t.process(&mut slice);
                let inv_n = 1.0 / nth as f64;
                buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                for ix in 0..nx {
                    for jk in 0..nth {
                        buf[jk * self.pad + ix] = slice[ix * nth + jk] * inv_n;
                    }
                }
                self.fft_x.process(&mut buf);
                for jk in 0..nth {
                    for m in 0..self.pad {
                        let idx = jk * self.pad + m;
                        acc[idx] += buf[idx] * (w * self.log_a(s, t, jk, m).exp());
                    }
                }
            }
        }
        acc
    }

    /// Output slice `[x][theta]` at height `y` on `sheet`, optionally with an extra symbol factor.
    fn output_slice(
        &self,
        coeffs: &[Complex64],
        sheet: SheetId,
        y: f64,
        factor: Option<&dyn Fn(f64, i64) -> f64>,
    ) -> Vec<Complex64> {
        let (nx, nth) = (self.grid.spec.n_x, self.grid.spec.n_theta);
        let mut buf = vec![Complex64::new(0.0, 0.0); nth * self.pad];
        for jk in 0..nth {
            for m in 0..self.pad {
                let idx = jk * self.pad + m;
                let mut a = self.log_a(sheet, y, jk, m).exp();
                if let Some(f) = factor {
                    a *= f(self.xi[m], self.modes[jk]);
                }
                buf[idx] = coeffs[idx] * a;
            }
        }
        self.ifft_x.process(&mut buf);
        let inv_m = 1.0 / self.pad as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); nx * nth];
        for ix in 0..nx {
            for jk in 0..nth {
                out[ix * nth + jk] = buf[jk * self.pad + ix] * inv_m;
            }
        }
        self.ifft_t.process(&mut out);
        out
    }

    fn check(&self, field: &BoundaryField) -> Result<()> {
        if field.grid.spec != self.grid.spec || field.grid.params != self.grid.params {
            return Err(Error::GridMismatch("field grid differs from the projector grid".into()));
        }
        Ok(())
    }

    fn blocks(
        &self,
        field: &BoundaryField,
        out_sheets: &[SheetId],
        in_sheets: &[SheetId],
        weighting: Weighting,
    ) -> Result<BoundaryField> {
        self.check(field)?;
        let coeffs = self.fiber_coefficients(field, in_sheets, weighting);
        let mut out = BoundaryField::zeros(self.grid.clone());
        let row = self.grid.spec.n_x * self.grid.spec.n_theta;
        let params = *self.params();
        for &s in out_sheets {
            for iv in 0..self.grid.spec.n_v {
                let y = self.grid.v[s.idx()][iv];
                let mut slice = self.output_slice(&coeffs, s, y, None);
                if weighting == Weighting::Chart {
                    let w = lambda_weight(s, y, &params);
                    slice.iter_mut().for_each(|z| *z *= w);
                }
                out.sheet_slice_mut(s)[iv * row..(iv + 1) * row].copy_from_slice(&slice);
            }
        }
        Ok(out)
    }

    /// The Szego projection of a boundary field.
    pub fn apply_p(&self, field: &BoundaryField) -> Result<BoundaryField> {
        self.blocks(field, &SheetId::ALL, &SheetId::ALL, Weighting::Projection)
    }

    /// The chart operator `T = Lambda_out P_{out,in} Lambda_in^{-1}`: reads sheet
    /// `in_sheet` of `psi` and writes sheet `out_sheet` of the result.
    pub fn apply_t(&self, out_sheet: SheetId, in_sheet: SheetId, psi: &BoundaryField) -> Result<BoundaryField> {
        self.blocks(psi, &[out_sheet], &[in_sheet], Weighting::Chart)
    }

    /// `T psi` evaluated at arbitrary output heights, each as an `[x][theta]` slice.
    /// `factor(xi, j)` multiplies the symbol when given.
    pub fn apply_t_at(
        &self,
        out_sheet: SheetId,
        in_sheet: SheetId,
        psi: &BoundaryField,
        ys: &[f64],
        factor: Option<&dyn Fn(f64, i64) -> f64>,
    ) -> Result<Vec<Vec<Complex64>>> {
        self.check(psi)?;
        let params = *self.params();
        let coeffs = self.fiber_coefficients(psi, &[in_sheet], Weighting::Chart);
        ys.iter()
            .map(|&y| {
                if !params.contains(out_sheet, y) {
                    return Err(Error::Domain(format!("y = {y} outside sheet {}", out_sheet.label())));
                }
                let mut slice = self.output_slice(&coeffs, out_sheet, y, factor);
                let w = lambda_weight(out_sheet, y, &params);
                slice.iter_mut().for_each(|z| *z *= w);
                Ok(slice)
            })
            .collect()
    }

    /// `P` rebuilt as `sum Lambda_out^{-1} T Lambda_in` over all sixteen sheet pairs.
    pub fn apply_p_by_pairs(&self, field: &BoundaryField) -> Result<BoundaryField> {
        let mut total = BoundaryField::zeros(self.grid.clone());
        for lin in SheetId::ALL {
            let mut chart = field.clone();
            chart.apply_vertical_weight(|s, v| if s == lin { lambda_weight(s, v, &self.grid.params) } else { 0.0 });
            for lout in SheetId::ALL {
                let mut t = self.apply_t(lout, lin, &chart)?;
                t.apply_vertical_weight(
                    |s, v| if s == lout { 1.0 / lambda_weight(s, v, &self.grid.params) } else { 0.0 },
                );
                total.add_assign(&t)?;
            }
        }
        Ok(total)
    }
}

/// Random smooth field compactly supported in `|x| < support`, with θ-modes up to `max_mode`.
pub fn random_smooth_field<R: Rng>(grid: &Arc<FieldGrid>, rng: &mut R, support: f64, max_mode: i64) -> BoundaryField {
    struct Bump {
        sheet: SheetId,
        center: f64,
        width: f64,
        mode: i64,
        coef: Complex64,
        poly: [f64; 3],
    }
    let params = grid.params;
    let bumps: Vec<Bump> = (0..12)
        .map(|_| {
            let width = rng.random_range(0.3 * support..0.6 * support);
            Bump {
                sheet: SheetId::ALL[rng.random_range(0..4)],
                center: rng.random_range(-(support - width)..(support - width)),
                width,
                mode: rng.random_range(-max_mode..=max_mode),
                coef: Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)),
                poly: [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)],
            }
        })
        .collect();
    BoundaryField::from_fn(grid.clone(), |s, x, v, th| {
        let (a, b) = params.interval(s);
        let u = (2.0 * v - a - b) / (b - a);
        let mut z = Complex64::new(0.0, 0.0);
        for bp in bumps.iter().filter(|bp| bp.sheet == s) {
            let r = (x - bp.center) / bp.width;
            if r.abs() < 1.0 {
                let env = (-1.0 / (1.0 - r * r)).exp();
                let p = bp.poly[0] + bp.poly[1] * u + bp.poly[2] * u * u;
                z += bp.coef * env * p * Complex64::from_polar(1.0, bp.mode as f64 * th);
            }
        }
        z
    })
}

/// Independent complex Gaussian samples at every grid node.
pub fn random_noise_field<R: Rng>(grid: &Arc<FieldGrid>, rng: &mut R) -> BoundaryField {
    let data =
        (0..grid.len()).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    BoundaryField { grid: grid.clone(), data }
}

/// Boundary values of `k_{j0}(z1, w0) z2^{j0}`, an element of the Hardy space.
pub fn holomorphic_trace(grid: &Arc<FieldGrid>, ev: &KernelEvaluator, j0: i64, w0: Complex64) -> Result<BoundaryField> {
    let params = grid.params;
    let w = StripPoint::new(w0, &params)?;
    let mut out = BoundaryField::zeros(grid.clone());
    let nx = grid.spec.n_x;
    let angular: Vec<Complex64> = grid.theta.iter().map(|&t| Complex64::from_polar(1.0, j0 as f64 * t)).collect();
    for s in SheetId::ALL {
        for iv in 0..grid.spec.n_v {
            let v = grid.v[s.idx()][iv];
            let radial = (0.5 * lambda_of(s, v, &params) * j0 as f64).exp();
            let row = ev.k_j_row(j0, v, w, grid.x[0], grid.dx, nx);
            for (ix, &r) in row.iter().enumerate().take(nx) {
                for (it, &a) in angular.iter().enumerate() {
                    out.data[grid.index(s, iv, ix, it)] = r * radial * a;
                }
            }
        }
    }
    Ok(out)
}

/// `||P(P phi) - P phi|| / ||P phi||`.
pub fn idempotence_residual(p: &Projector, phi: &BoundaryField) -> Result<f64> {
    let p1 = p.apply_p(phi)?;
    let p2 = p.apply_p(&p1)?;
    Ok(p2.sub(&p1)?.norm2() / p1.norm2())
}

/// `|<P phi, psi> - <phi, P psi>| / (||phi|| ||psi||)` in the surface-measure inner product.
pub fn self_adjointness_residual(p: &Projector, phi: &BoundaryField, psi: &BoundaryField) -> Result<f64> {
    let a = p.apply_p(phi)?.inner(psi)?;
    let b = phi.inner(&p.apply_p(psi)?)?;
    Ok((a - b).norm() / (phi.norm2() * psi.norm2()))
}

/// `||P phi - phi|| / ||phi||`.
pub fn fixed_point_residual(p: &Projector, phi: &BoundaryField) -> Result<f64> {
    Ok(p.apply_p(phi)?.sub(phi)?.norm2() / phi.norm2())
}

/// `|<P phi, phi>| / ||phi||^2`; zero for the zero field.
pub fn annihilation_check(p: &Projector, phi: &BoundaryField) -> Result<f64> {
    let n = phi.norm2();
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok(p.apply_p(phi)?.inner(phi)?.norm() / (n * n))
}

/// `||P phi||^2 / ||phi||^2`.
pub fn rayleigh_quotient(p: &Projector, phi: &BoundaryField) -> Result<f64> {
    let n = phi.norm2();
    Ok((p.apply_p(phi)?.norm2() / n).powi(2))
}

#[derive(Debug, Clone, Serialize)]
pub struct SobolevReport {
    pub out_sheet: usize,
    pub in_sheet: usize,
    pub y: f64,
    /// `(step, residual)` for each step in the halving sequence.
    pub steps: Vec<(f64, f64)>,
    /// `log2` of successive residual ratios.
    pub orders: Vec<f64>,
}

/// Compares a centered difference in `y` of `T psi` with `T` applied through the
/// differentiated symbol `(kappa(y) + lambda'(y) j / 2 - xi) m`, where `kappa` is the
/// log-derivative of the output Lambda weight. The `-xi` term is the x-derivative
/// of the input.
pub fn sobolev_commutation_residual(
    p: &Projector,
    out_sheet: SheetId,
    in_sheet: SheetId,
    psi: &BoundaryField,
    y: f64,
    steps: &[f64],
) -> Result<SobolevReport> {
    let params = *p.params();
    let (a, b) = params.interval(out_sheet);
    let hmax = steps.iter().cloned().fold(0.0, f64::max);
    if !(y - hmax > a && y + hmax < b) {
        return Err(Error::Domain(format!("y = {y} too close to the ends of sheet {}", out_sheet.label())));
    }
    let kappa = lambda_weight_log_slope(out_sheet, y, &params);
    let slope = lambda_slope(out_sheet);
    let symbol = move |xi: f64, j: i64| kappa + 0.5 * slope * j as f64 - xi;
    let exact = p.apply_t_at(out_sheet, in_sheet, psi, &[y], Some(&symbol))?.remove(0);
    let norm: f64 = exact.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut out = Vec::new();
    for &h in steps {
        let v = p.apply_t_at(out_sheet, in_sheet, psi, &[y - h, y + h], None)?;
        let err: f64 = v[1]
            .iter()
            .zip(&v[0])
            .zip(&exact)
            .map(|((up, dn), e)| ((up - dn) / (2.0 * h) - e).norm_sqr())
            .sum::<f64>()
            .sqrt();
        out.push((h, err / norm));
    }
    let orders = out.windows(2).map(|w| (w[0].1 / w[1].1).log2() / (w[0].0 / w[1].0).log2()).collect();
    Ok(SobolevReport { out_sheet: out_sheet.label(), in_sheet: in_sheet.label(), y, steps: out, orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(n_t: usize) -> Projector {
        let params = WormParams::new(PI).unwrap();
        let grid = FieldGrid::new(GridSpec { l: 8.0, n_x: 64, n_v: 16, n_theta: 8 }, params).unwrap();
        Projector::new(grid, n_t).unwrap()
    }

    #[test]
    fn unified_multiplier_examples() {
        let p = WormParams::new(PI).unwrap();
        let h = p.half_width();
        let pair = SheetPairMultiplier::new(SheetId::S1, SheetId::S1, PI / 2.0, PI / 2.0, &p).unwrap();
        let m = unified_multiplier(&pair, 0.0, -1, &p);
        assert!((m - 1.0 / crate::strip::nu(0.0, -1, &p)).abs() < 1e-15);
        let pair = SheetPairMultiplier::new(SheetId::S2, SheetId::S2, 0.4, 2.0, &p).unwrap();
        assert!((pair.c(&p) - h).abs() < 1e-15);
        let t = -1.0;
        let pair = SheetPairMultiplier::new(SheetId::S2, SheetId::S1, 0.4, t, &p);
        assert!(pair.is_err());
        let t = 1.0;
        let pair = SheetPairMultiplier::new(SheetId::S2, SheetId::S1, 0.4, t, &p).unwrap();
        assert!((pair.c(&p) - 0.5 * (p.beta() - PI + t)).abs() < 1e-15);
    }

    #[test]
    fn displayed_diagonal_symbol_matches() {
        let p = WormParams::new(PI).unwrap();
        for (y, t, xi, j) in [(0.7, 2.1, 0.3, 2), (1.5, 0.2, -0.8, -3)] {
            let pair = SheetPairMultiplier::new(SheetId::S1, SheetId::S1, y, t, &p).unwrap();
            let display = ((t + y - PI) * j as f64 / 2.0 - (t + y) * xi).exp() / crate::strip::nu(xi, j, &p);
            let m = unified_multiplier(&pair, xi, j, &p);
            assert!((m - display).abs() < 1e-13 * display);
        }
    }

    #[test]
    fn theta_modes_round_trip_and_isolate() {
        let params = WormParams::new(PI).unwrap();
        let grid = FieldGrid::new(GridSpec { l: 2.0, n_x: 4, n_v: 3, n_theta: 16 }, params).unwrap();
        let f = BoundaryField::from_fn(grid.clone(), |_, x, v, th| Complex64::from_polar(1.0 + x * v, 3.0 * th));
        let s = theta_mode_decompose(&f);
        for (k, z) in s.data.iter().enumerate() {
            let jk = k % 16;
            if s.modes[jk] != 3 {
                assert!(z.norm() < 1e-14);
            }
        }
        let back = theta_mode_compose(&s);
        assert!(back.sub(&f).unwrap().data.iter().all(|z| z.norm() < 1e-13));
        let c = BoundaryField::from_fn(grid, |_, x, _, _| Complex64::new(x, 1.0));
        let s = theta_mode_decompose(&c);
        for (k, z) in s.data.iter().enumerate() {
            if s.modes[k % 16] != 0 {
                assert!(z.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_in_zero_out_and_linearity() {
        let p = small(16);
        let z = BoundaryField::zeros(p.grid().clone());
        assert!(p.apply_p(&z).unwrap().data.iter().all(|c| c.norm() == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_noise_field(p.grid(), &mut rng);
        let b = random_noise_field(p.grid(), &mut rng);
        let c = Complex64::new(0.3, -1.7);
        let mut comb = a.clone();
        comb.scale(c);
        comb.add_assign(&b).unwrap();
        let lhs = p.apply_p(&comb).unwrap();
        let mut rhs = p.apply_p(&a).unwrap();
        rhs.scale(c);
        rhs.add_assign(&p.apply_p(&b).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().norm2() < 1e-12 * lhs.norm2());
    }

    #[test]
    fn single_mode_input_stays_in_its_mode() {
        let p = small(16);
        let f = BoundaryField::from_fn(p.grid().clone(), |s, x, _, th| {
            if s == SheetId::S1 {
                Complex64::from_polar((-x * x).exp(), 2.0 * th)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let out = p.apply_t(SheetId::S2, SheetId::S1, &f).unwrap();
        let spec = theta_mode_decompose(&out);
        let total: f64 = spec.data.iter().map(|z| z.norm_sqr()).sum();
        let leak: f64 =
            spec.data.iter().enumerate().filter(|(k, _)| spec.modes[k % 8] != 2).map(|(_, z)| z.norm_sqr()).sum();
        assert!(total > 0.0 && leak.sqrt() < 1e-12 * total.sqrt());
    }

    #[test]
    fn pairwise_assembly_equals_direct_projection() {
        let p = small(16);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_smooth_field(p.grid(), &mut rng, 4.0, 3);
        let a = p.apply_p(&f).unwrap();
        let b = p.apply_p_by_pairs(&f).unwrap();
        assert!(a.sub(&b).unwrap().norm2() < 1e-12 * a.norm2());
    }

    #[test]
    fn separable_factor_reproduces_unified_multiplier() {
        let p = small(16);
        let params = *p.params();
        for (jk, m) in [(1usize, 3usize), (5, 70), (7, 127)] {
            for (so, si, y, t) in [(SheetId::S1, SheetId::S3, 1.0, -2.0), (SheetId::S4, SheetId::S2, -0.5, 2.5)] {
                let pair = SheetPairMultiplier::new(so, si, y, t, &params).unwrap();
                let want = log_unified_multiplier(&pair, p.xi[m], p.modes[jk], &params);
                let got = p.log_a(so, y, jk, m) + p.log_a(si, t, jk, m);
                assert!((want - got).abs() < 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn projection_is_nearly_idempotent_and_contractive() {
        let p = small(16);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_smooth_field(p.grid(), &mut rng, 3.0, 3);
        assert!(idempotence_residual(&p, &f).unwrap() < 1e-2);
        let g = random_noise_field(p.grid(), &mut rng);
        assert!(rayleigh_quotient(&p, &g).unwrap() <= 1.0 + 1e-10);
        assert!(self_adjointness_residual(&p, &f, &g).unwrap() < 1e-12);
    }

    #[test]
    fn interpolated_input_nodes_agree_with_native_nodes() {
        let a = small(16);
        let b = small(24);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_smooth_field(a.grid(), &mut rng, 3.0, 2);
        let pa = a.apply_p(&f).unwrap();
        let pb = b.apply_p(&f).unwrap();
        assert!(pa.sub(&pb).unwrap().norm2() < 1e-6 * pa.norm2());
    }

    #[test]
    fn sobolev_rule_on_a_flat_and_a_slanted_sheet() {
        let p = small(16);
        let f = BoundaryField::from_fn(p.grid().clone(), |s, x, v, th| {
            if s == SheetId::S1 {
                Complex64::from_polar((-(x * x)).exp() * (1.0 + 0.1 * v), th)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        for out in [SheetId::S2, SheetId::S1] {
            let (a, b) = p.params().interval(out);
            let r = sobolev_commutation_residual(&p, out, SheetId::S1, &f, 0.5 * (a + b), &[4e-3, 2e-3, 1e-3]).unwrap();
            assert!(r.steps.last().unwrap().1 < 1e-4, "{r:?}");
            assert!(r.orders.iter().all(|&o| o > 1.0), "{r:?}");
        }
    }

    #[test]
    fn annihilation_of_zero_is_zero() {
        let p = small(16);
        assert_eq!(annihilation_check(&p, &BoundaryField::zeros(p.grid().clone())).unwrap(), 0.0);
    }
}
