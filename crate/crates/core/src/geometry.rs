//! The model worm domain, its four boundary sheets, their charts and measures.

use crate::error::{Error, Result};
use crate::quadrature::{GaussLegendre, NeumaierSum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;
use std::sync::Arc;

/// The single shape parameter of the domain. Construction enforces `beta > pi/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WormParams {
    beta: f64,
}

impl WormParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta <= FRAC_PI_2 {
            return Err(Error::InvalidParameter(format!("beta must exceed pi/2, got {beta}")));
        }
        Ok(WormParams { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `beta - pi/2`, the bound on |log|z2|^2|.
    pub fn half_width(&self) -> f64 {
        self.beta - FRAC_PI_2
    }

    /// Open interval of the vertical coordinate on a sheet.
    pub fn interval(&self, sheet: SheetId) -> (f64, f64) {
        let b = self.beta;
        match sheet {
            SheetId::S1 => (PI - b, b),
            SheetId::S2 => (b - PI, b),
            SheetId::S3 => (-b, b - PI),
            SheetId::S4 => (-b, PI - b),
        }
    }

    pub fn contains(&self, sheet: SheetId, v: f64) -> bool {
        let (a, b) = self.interval(sheet);
        v > a && v < b
    }
}

/// One of the four boundary sheets. Sheets 1 and 3 are slanted, 2 and 4 are flat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SheetId {
    S1,
    S2,
    S3,
    S4,
}

impl SheetId {
    pub const ALL: [SheetId; 4] = [SheetId::S1, SheetId::S2, SheetId::S3, SheetId::S4];

    /// 1-based label.
    pub fn label(self) -> usize {
        self.idx() + 1
    }

    /// 0-based position in storage.
    pub fn idx(self) -> usize {
        match self {
            SheetId::S1 => 0,
            SheetId::S2 => 1,
            SheetId::S3 => 2,
            SheetId::S4 => 3,
        }
    }

    pub fn from_label(label: usize) -> Result<Self> {
        match label {
            1 => Ok(SheetId::S1),
            2 => Ok(SheetId::S2),
            3 => Ok(SheetId::S3),
            4 => Ok(SheetId::S4),
            _ => Err(Error::InvalidParameter(format!("sheet label {label} not in 1..=4"))),
        }
    }

    pub fn is_slanted(self) -> bool {
        matches!(self, SheetId::S1 | SheetId::S3)
    }
}

/// `log|z2|^2` on a sheet, with no interval check.
#[inline]
pub fn lambda_of(sheet: SheetId, v: f64, params: &WormParams) -> f64 {
    match sheet {
        SheetId::S1 => v - FRAC_PI_2,
        SheetId::S2 => params.half_width(),
        SheetId::S3 => v + FRAC_PI_2,
        SheetId::S4 => -params.half_width(),
    }
}

/// d/dv of [`lambda_of`].
#[inline]
pub fn lambda_slope(sheet: SheetId) -> f64 {
    if sheet.is_slanted() {
        1.0
    } else {
        0.0
    }
}

/// `log|z2|^2` at the boundary point with vertical coordinate `v` on `sheet`.
pub fn log_mod_z2(sheet: SheetId, v: f64, params: &WormParams) -> Result<f64> {
    if sheet.is_slanted() && !params.contains(sheet, v) {
        let (a, b) = params.interval(sheet);
        return Err(Error::Domain(format!("v = {v} outside sheet {} interval ({a}, {b})", sheet.label())));
    }
    Ok(lambda_of(sheet, v, params))
}

/// Density of surface measure in chart coordinates (x, v, theta).
#[inline]
pub fn surface_weight(sheet: SheetId, v: f64, params: &WormParams) -> f64 {
    let h = params.half_width();
    match sheet {
        SheetId::S2 => (0.5 * h).exp(),
        SheetId::S4 => (-0.5 * h).exp(),
        _ => {
            let lam = lambda_of(sheet, v, params);
            0.5 * lam.exp() * (1.0 + 4.0 * (-lam).exp()).sqrt()
        }
    }
}

/// Scalar factor of the chart isomorphism from L^p of a sheet to L^p of its chart.
#[inline]
pub fn lambda_weight(sheet: SheetId, v: f64, params: &WormParams) -> f64 {
    let h = params.half_width();
    match sheet {
        SheetId::S2 => (-0.5 * h).exp(),
        SheetId::S4 => (0.5 * h).exp(),
        _ => {
            let lam = lambda_of(sheet, v, params);
            1.0 / (1.0 + 4.0 * (-lam).exp()).sqrt()
        }
    }
}

/// d/dv log(lambda_weight).
#[inline]
pub fn lambda_weight_log_slope(sheet: SheetId, v: f64, params: &WormParams) -> f64 {
    if !sheet.is_slanted() {
        return 0.0;
    }
    let e = 4.0 * (-lambda_of(sheet, v, params)).exp();
    0.5 * e / (1.0 + e)
}

/// A point of one boundary sheet in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub sheet: SheetId,
    pub x: f64,
    pub v: f64,
    pub theta: f64,
}

impl BoundaryPoint {
    /// Accepts the closed interval: its endpoints are the measure-zero edges of the sheet.
    pub fn new(sheet: SheetId, x: f64, v: f64, theta: f64, params: &WormParams) -> Result<Self> {
        let (a, b) = params.interval(sheet);
        if !(v >= a - 1e-12 && v <= b + 1e-12) {
            return Err(Error::Domain(format!("v = {v} not inside sheet {}", sheet.label())));
        }
        Ok(BoundaryPoint { sheet, x, v, theta: theta.rem_euclid(TAU) })
    }
}

/// Maps a chart point to `(z1, z2)`.
pub fn embed(p: &BoundaryPoint, params: &WormParams) -> (Complex64, Complex64) {
    let lam = lambda_of(p.sheet, p.v, params);
    let z1 = Complex64::new(p.x, p.v);
    let z2 = Complex64::from_polar((0.5 * lam).exp(), p.theta);
    (z1, z2)
}

/// Recovers chart coordinates from `(z1, z2)` on a known sheet.
pub fn chart_coordinates(sheet: SheetId, z1: Complex64, z2: Complex64, params: &WormParams) -> Result<BoundaryPoint> {
    BoundaryPoint::new(sheet, z1.re, z1.im, z2.arg(), params)
}

/// Grid configuration for boundary fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Half-length of the x window.
    pub l: f64,
    pub n_x: usize,
    pub n_v: usize,
    pub n_theta: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_v == 0 || self.n_theta == 0 {
            return Err(Error::EmptyGrid);
        }
        if !(self.l > 0.0) || !self.l.is_finite() {
            return Err(Error::InvalidParameter(format!("window half-length must be positive, got {}", self.l)));
        }
        Ok(())
    }
}

/// Precomputed nodes and measure factors for a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub params: WormParams,
    /// Periodic x nodes `-L + k dx`.
    pub x: Vec<f64>,
    pub dx: f64,
    pub theta: Vec<f64>,
    pub dtheta: f64,
    /// Per sheet: vertical nodes, quadrature weights, surface weights, Lambda weights.
    pub v: [Vec<f64>; 4],
    pub vw: [Vec<f64>; 4],
    pub sigma: [Vec<f64>; 4],
    pub lw: [Vec<f64>; 4],
}

impl FieldGrid {
    pub fn new(spec: GridSpec, params: WormParams) -> Result<Arc<Self>> {
        spec.validate()?;
        let dx = 2.0 * spec.l / spec.n_x as f64;
        let x = (0..spec.n_x).map(|k| -spec.l + k as f64 * dx).collect();
        let dtheta = TAU / spec.n_theta as f64;
        let theta = (0..spec.n_theta).map(|m| m as f64 * dtheta).collect();
        let gl = GaussLegendre::new(spec.n_v);
        let mut v: [Vec<f64>; 4] = Default::default();
        let mut vw: [Vec<f64>; 4] = Default::default();
        let mut sigma: [Vec<f64>; 4] = Default::default();
        let mut lw: [Vec<f64>; 4] = Default::default();
        for s in SheetId::ALL {
            let (a, b) = params.interval(s);
            let (nodes, weights) = gl.on(a, b);
            sigma[s.idx()] = nodes.iter().map(|&t| surface_weight(s, t, &params)).collect();
            lw[s.idx()] = nodes.iter().map(|&t| lambda_weight(s, t, &params)).collect();
            v[s.idx()] = nodes;
            vw[s.idx()] = weights;
        }
        Ok(Arc::new(FieldGrid { spec, params, x, dx, theta, dtheta, v, vw, sigma, lw }))
    }

    /// Number of samples in one sheet.
    pub fn sheet_len(&self) -> usize {
        self.spec.n_v * self.spec.n_x * self.spec.n_theta
    }

    pub fn len(&self) -> usize {
        4 * self.sheet_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of (sheet, v-index, x-index, theta-index).
    #[inline]
    pub fn index(&self, sheet: SheetId, iv: usize, ix: usize, it: usize) -> usize {
        ((sheet.idx() * self.spec.n_v + iv) * self.spec.n_x + ix) * self.spec.n_theta + it
    }

    /// Quadrature weight of surface measure at a sample.
    #[inline]
    pub fn measure(&self, sheet: SheetId, iv: usize) -> f64 {
        self.vw[sheet.idx()][iv] * self.sigma[sheet.idx()][iv] * self.dx * self.dtheta
    }

    /// Same quadrature weight without the surface density (plain chart measure).
    #[inline]
    pub fn chart_measure(&self, sheet: SheetId, iv: usize) -> f64 {
        self.vw[sheet.idx()][iv] * self.dx * self.dtheta
    }
}

/// Complex samples of a function on the four sheets, layout `[sheet][v][x][theta]`.
#[derive(Debug, Clone)]
pub struct BoundaryField {
    pub grid: Arc<FieldGrid>,
    pub data: Vec<Complex64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldRow {
    sheet: usize,
    x: f64,
    v: f64,
    theta: f64,
    re: f64,
    im: f64,
}

impl BoundaryField {
    pub fn zeros(grid: Arc<FieldGrid>) -> Self {
        let n = grid.len();
        BoundaryField { grid, data: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Samples `f(sheet, x, v, theta)` on the grid.
    pub fn from_fn<F: FnMut(SheetId, f64, f64, f64) -> Complex64>(grid: Arc<FieldGrid>, mut f: F) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for s in SheetId::ALL {
            for &v in &grid.v[s.idx()] {
                for &x in &grid.x {
                    for &t in &grid.theta {
                        data.push(f(s, x, v, t));
                    }
                }
            }
        }
        BoundaryField { grid, data }
    }

    pub fn params(&self) -> &WormParams {
        &self.grid.params
    }

    pub fn sheet_slice(&self, sheet: SheetId) -> &[Complex64] {
        let n = self.grid.sheet_len();
        &self.data[sheet.idx() * n..(sheet.idx() + 1) * n]
    }

    pub fn sheet_slice_mut(&mut self, sheet: SheetId) -> &mut [Complex64] {
        let n = self.grid.sheet_len();
        &mut self.data[sheet.idx() * n..(sheet.idx() + 1) * n]
    }

    pub fn check_same_grid(&self, other: &BoundaryField) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid)
            && (self.grid.spec != other.grid.spec || self.grid.params != other.grid.params)
        {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn scale(&mut self, c: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= c);
    }

    pub fn sub(&self, other: &BoundaryField) -> Result<BoundaryField> {
        self.check_same_grid(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(BoundaryField { grid: self.grid.clone(), data })
    }

    pub fn add_assign(&mut self, other: &BoundaryField) -> Result<()> {
        self.check_same_grid(other)?;
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn conj(&self) -> BoundaryField {
        BoundaryField { grid: self.grid.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    /// Multiplies every sample by `w(sheet, v)`.
    pub fn apply_vertical_weight<F: Fn(SheetId, f64) -> f64>(&mut self, w: F) {
        let nv = self.grid.spec.n_v;
        let row = self.grid.spec.n_x * self.grid.spec.n_theta;
        let grid = self.grid.clone();
        for s in SheetId::ALL {
            let slice = self.sheet_slice_mut(s);
            for iv in 0..nv {
                let f = w(s, grid.v[s.idx()][iv]);
                slice[iv * row..(iv + 1) * row].iter_mut().for_each(|z| *z *= f);
            }
        }
    }

    /// Surface-measure inner product `<self, other>` (linear in `self`).
    pub fn inner(&self, other: &BoundaryField) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let g = &self.grid;
        let row = g.spec.n_x * g.spec.n_theta;
        let mut re = NeumaierSum::default();
        let mut im = NeumaierSum::default();
        for s in SheetId::ALL {
            let a = self.sheet_slice(s);
            let b = other.sheet_slice(s);
            for iv in 0..g.spec.n_v {
                let w = g.measure(s, iv);
                let mut acc = Complex64::new(0.0, 0.0);
                for k in iv * row..(iv + 1) * row {
                    acc += a[k] * b[k].conj();
                }
                re.add(w * acc.re);
                im.add(w * acc.im);
            }
        }
        Ok(Complex64::new(re.value(), im.value()))
    }

    pub fn norm2(&self) -> f64 {
        hardy_norm_p(self, 2.0).unwrap_or(f64::NAN)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_rows(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_rows<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let g = &self.grid;
        for s in SheetId::ALL {
            for iv in 0..g.spec.n_v {
                for ix in 0..g.spec.n_x {
                    for it in 0..g.spec.n_theta {
                        let z = self.data[g.index(s, iv, ix, it)];
                        w.serialize(FieldRow {
                            sheet: s.label(),
                            x: g.x[ix],
                            v: g.v[s.idx()][iv],
                            theta: g.theta[it],
                            re: z.re,
                            im: z.im,
                        })?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Reads a field written by [`BoundaryField::write_csv`] onto `grid`,
    /// checking that every row sits on a grid node.
    pub fn read_csv<P: AsRef<Path>>(path: P, grid: Arc<FieldGrid>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut field = BoundaryField::zeros(grid.clone());
        let mut seen = vec![false; grid.len()];
        let tol = 1e-9;
        for row in r.deserialize() {
            let row: FieldRow = row?;
            let s = SheetId::from_label(row.sheet)?;
            let ix = ((row.x + grid.spec.l) / grid.dx).round();
            let it = (row.theta / grid.dtheta).round();
            let iv = grid.v[s.idx()].iter().position(|&v| (v - row.v).abs() < tol);
            let ok = ix >= 0.0
                && (ix as usize) < grid.spec.n_x
                && (grid.x[ix as usize] - row.x).abs() < tol
                && it >= 0.0
                && (it as usize) < grid.spec.n_theta
                && (grid.theta[it as usize] - row.theta).abs() < tol;
            let (Some(iv), true) = (iv, ok) else {
                return Err(Error::GridMismatch(format!(
                    "row (sheet {}, x {}, v {}, theta {}) is not a grid node",
                    row.sheet, row.x, row.v, row.theta
                )));
            };
            let k = grid.index(s, iv, ix as usize, it as usize);
            field.data[k] = Complex64::new(row.re, row.im);
            seen[k] = true;
        }
        if let Some(missing) = seen.iter().position(|&b| !b) {
            return Err(Error::GridMismatch(format!("csv is missing sample {missing}")));
        }
        Ok(field)
    }
}

/// Discrete Hardy boundary norm `(sum over sheets of int |phi|^p dsigma)^(1/p)`.
pub fn hardy_norm_p(field: &BoundaryField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    let g = &field.grid;
    if g.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let row = g.spec.n_x * g.spec.n_theta;
    let mut acc = NeumaierSum::default();
    for s in SheetId::ALL {
        let a = field.sheet_slice(s);
        for iv in 0..g.spec.n_v {
            let part: f64 = a[iv * row..(iv + 1) * row].iter().map(|z| z.norm().powf(p)).sum();
            acc.add(g.measure(s, iv) * part);
        }
    }
    Ok(acc.value().powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn pi_params() -> WormParams {
        WormParams::new(PI).unwrap()
    }

    #[test]
    fn rejects_small_beta() {
        assert!(WormParams::new(FRAC_PI_2).is_err());
        assert!(WormParams::new(1.0).is_err());
        assert!(WormParams::new(f64::NAN).is_err());
    }

    #[test]
    fn intervals_have_expected_lengths() {
        for beta in [0.6 * PI, PI, 1.5 * PI] {
            let p = WormParams::new(beta).unwrap();
            let len = |s| {
                let (a, b) = p.interval(s);
                b - a
            };
            assert!((len(SheetId::S1) - (2.0 * beta - PI)).abs() < 1e-15);
            assert!((len(SheetId::S3) - (2.0 * beta - PI)).abs() < 1e-15);
            assert!((len(SheetId::S2) - PI).abs() < 1e-15);
            assert!((len(SheetId::S4) - PI).abs() < 1e-15);
        }
    }

    #[test]
    fn log_mod_z2_examples() {
        let p = pi_params();
        assert_eq!(log_mod_z2(SheetId::S2, 123.0, &p).unwrap(), FRAC_PI_2);
        assert_eq!(log_mod_z2(SheetId::S1, FRAC_PI_2, &p).unwrap(), 0.0);
        assert_eq!(log_mod_z2(SheetId::S3, -FRAC_PI_2, &p).unwrap(), 0.0);
        assert!(log_mod_z2(SheetId::S1, -0.1, &p).is_err());
    }

    #[test]
    fn embed_examples() {
        let p = pi_params();
        let pt = BoundaryPoint::new(SheetId::S2, 0.0, FRAC_PI_2, 0.0, &p).unwrap();
        let (z1, z2) = embed(&pt, &p);
        assert!((z1 - Complex64::new(0.0, FRAC_PI_2)).norm() < 1e-15);
        assert!((z2 - Complex64::new(FRAC_PI_4.exp(), 0.0)).norm() < 1e-15);
        let pt = BoundaryPoint::new(SheetId::S4, 1.0, 0.0, PI, &p).unwrap();
        let (z1, z2) = embed(&pt, &p);
        assert!((z1 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((z2 - Complex64::new(-(-FRAC_PI_4).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn embedded_points_lie_on_the_boundary() {
        for beta in [0.6 * PI, PI, 1.5 * PI] {
            let p = WormParams::new(beta).unwrap();
            for s in SheetId::ALL {
                let (a, b) = p.interval(s);
                for k in 1..20 {
                    let v = a + (b - a) * k as f64 / 20.0;
                    let pt = BoundaryPoint::new(s, 0.3 * k as f64, v, 0.4 * k as f64, &p).unwrap();
                    let (z1, z2) = embed(&pt, &p);
                    let l = z2.norm_sqr().ln();
                    assert!((z1.im - l).abs() <= FRAC_PI_2 + 1e-12);
                    assert!(l.abs() <= p.half_width() + 1e-12);
                    if s.is_slanted() {
                        assert!(((z1.im - l).abs() - FRAC_PI_2).abs() < 1e-12);
                    } else {
                        assert!((l.abs() - p.half_width()).abs() < 1e-12);
                    }
                    let back = chart_coordinates(s, z1, z2, &p).unwrap();
                    assert!((back.x - pt.x).abs() < 1e-12);
                    assert!((back.v - pt.v).abs() < 1e-12);
                    let dth = (back.theta - pt.theta).rem_euclid(TAU);
                    assert!(dth.min(TAU - dth) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn weights_examples() {
        let p = pi_params();
        assert!((surface_weight(SheetId::S2, 0.0, &p) - FRAC_PI_4.exp()).abs() < 1e-15);
        assert!((surface_weight(SheetId::S1, FRAC_PI_2, &p) - 0.5 * 5f64.sqrt()).abs() < 1e-15);
        assert!((surface_weight(SheetId::S4, 0.0, &p) - (-FRAC_PI_4).exp()).abs() < 1e-15);
        assert!((lambda_weight(SheetId::S1, FRAC_PI_2, &p) - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!((lambda_weight(SheetId::S2, 0.0, &p) - (-FRAC_PI_4).exp()).abs() < 1e-15);
        assert!((lambda_weight(SheetId::S4, 0.0, &p) - FRAC_PI_4.exp()).abs() < 1e-15);
    }

    #[test]
    fn lambda_weight_log_slope_matches_finite_difference() {
        let p = pi_params();
        for s in SheetId::ALL {
            let (a, b) = p.interval(s);
            let v = 0.3 * a + 0.7 * b;
            let h = 1e-5;
            let fd = (lambda_weight(s, v + h, &p).ln() - lambda_weight(s, v - h, &p).ln()) / (2.0 * h);
            assert!((fd - lambda_weight_log_slope(s, v, &p)).abs() < 1e-9);
        }
    }

    #[test]
    fn norm_of_indicator_on_flat_sheet() {
        let p = pi_params();
        let spec = GridSpec { l: 3.0, n_x: 16, n_v: 8, n_theta: 8 };
        let g = FieldGrid::new(spec, p).unwrap();
        let f = BoundaryField::from_fn(g, |s, _, _, _| {
            if s == SheetId::S2 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let want = (FRAC_PI_4.exp() * 2.0 * 3.0 * PI * TAU).sqrt();
        assert!((hardy_norm_p(&f, 2.0).unwrap() - want).abs() < 1e-12 * want);
        let z = BoundaryField::from_fn(f.grid.clone(), |_, _, _, _| Complex64::new(0.0, 0.0));
        assert_eq!(hardy_norm_p(&z, 3.0).unwrap(), 0.0);
        assert!(hardy_norm_p(&z, 0.5).is_err());
    }
}
