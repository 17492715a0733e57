//! Named check suites. Every numbered criterion is a function returning its check rows,
//! so the command line and the test harness run exactly the same code.

use crate::analysis::derivatives::{default_check_grid, derivative_formula_check, phi_over_d, Display};
use crate::analysis::fdecay::{default_eta_grid, f_decay_check};
use crate::analysis::marcinkiewicz::{
    m_alpha_blow_up, m_alpha_gamma_blow_up, scan_with_refinement, ScanConfig, Symbol,
};
use crate::analysis::schur::{certified_pairs, schur_test, SchurConfig, SchurKernel, SchurKernelSpec};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{FieldGrid, GridSpec, SheetId, WormParams};
use crate::kernel::{mode_decay_profile, szego_eval, InteriorPoint};
use crate::projector::{
    fixed_point_residual, holomorphic_trace, idempotence_residual, random_noise_field, random_smooth_field,
    rayleigh_quotient, self_adjointness_residual, sobolev_commutation_residual, Projector,
};
use crate::quadrature::adaptive_gk;
use crate::strip::{
    kernel_inner_product, nu, omega_breakpoints, omega_j, parseval_residual, KernelEvaluator, SpatialQuadrature,
    StripFunction, StripPoint,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Below,
    AtMost,
    AtLeast,
}

impl Comparison {
    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::Below => value < threshold,
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Below => "<",
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        }
    }
}

/// One measured quantity compared against its threshold.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub criterion: u8,
    pub check: String,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
    /// Informational rows are reported but do not decide the criterion.
    pub gating: bool,
}

impl CheckRow {
    fn new(criterion: u8, check: impl Into<String>, value: f64, comparison: Comparison, threshold: f64) -> Self {
        CheckRow {
            criterion,
            check: check.into(),
            value,
            comparison,
            threshold,
            passed: comparison.holds(value, threshold),
            gating: true,
        }
    }

    fn flag(criterion: u8, check: impl Into<String>, ok: bool) -> Self {
        CheckRow::new(criterion, check, if ok { 1.0 } else { 0.0 }, Comparison::AtLeast, 1.0)
    }

    fn informational(mut self) -> Self {
        self.gating = false;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub rows: Vec<CheckRow>,
}

impl CriterionOutcome {
    pub fn passed(&self) -> bool {
        self.rows.iter().filter(|r| r.gating).all(|r| r.passed)
    }

    pub fn failing(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| r.gating && !r.passed).collect()
    }

    /// `criterion N [PASS|FAIL] title`, with the failing checks appended.
    pub fn summary_line(&self) -> String {
        let mut s = format!("criterion {:>2} {} {}", self.id, if self.passed() { "PASS" } else { "FAIL" }, self.title);
        for r in self.failing() {
            s.push_str(&format!(
                "; {} = {:.3e} (needs {} {:.3e})",
                r.check,
                r.value,
                r.comparison.symbol(),
                r.threshold
            ));
        }
        s
    }
}

pub const TITLES: [&str; 10] = [
    "Parseval identity for the strip transform",
    "weight and transform duality",
    "reproducing property of the mode kernels",
    "Szego kernel symmetries and series decay",
    "projection identities under refinement",
    "discrete projection norm",
    "Marcinkiewicz certificates and blow-up rates",
    "closed-form derivative displays",
    "Schur certificates",
    "Sobolev commutation",
];

/// Runs criterion `id` (1 to 10).
pub fn run_criterion(id: u8, cfg: &RunConfig) -> Result<CriterionOutcome> {
    let rows = match id {
        1 => parseval_rows(cfg)?,
        2 => duality_rows(cfg)?,
        3 => reproducing_rows(cfg)?,
        4 => symmetry_rows(cfg)?,
        5 => projection_identity_rows(cfg)?,
        6 => projection_norm_rows(cfg)?,
        7 => marcinkiewicz_rows(cfg)?,
        8 => derivative_rows(cfg)?,
        9 => schur_rows(cfg)?,
        10 => sobolev_rows(cfg)?,
        _ => return Err(Error::InvalidParameter(format!("no criterion {id}"))),
    };
    Ok(CriterionOutcome { id, title: TITLES[id as usize - 1], rows })
}

fn parseval_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let tol = cfg.tolerance("parseval");
    let n = (40.0 * cfg.xi_max).round() as usize + 1;
    let mut rows = Vec::new();
    for (label, beta) in [("0.6pi", 0.6 * PI), ("pi", PI), ("1.5pi", 1.5 * PI)] {
        let p = WormParams::new(beta)?;
        for j in -5..=5 {
            let g = StripFunction::from_fn(p, j, cfg.xi_max, n, |x| Complex64::new((-x * x).exp(), 0.0))?;
            let r = parseval_residual(&g, SpatialQuadrature { l: cfg.l, ..SpatialQuadrature::default() })?;
            rows.push(CheckRow::new(1, format!("parseval beta={label} j={j}"), r.residual, Comparison::Below, tol));
        }
    }
    Ok(rows)
}

/// The fifteen `(xi, j)` pairs of the duality check.
pub fn duality_sample() -> Vec<(f64, i64)> {
    let mut s = Vec::new();
    for xi in [-1.5, -0.5, 0.0, 0.7, 2.0] {
        for j in [-3, 0, 2] {
            s.push((xi, j));
        }
    }
    s
}

fn duality_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let p = cfg.params()?;
    let pts = omega_breakpoints(&p);
    let mut rows = Vec::new();
    for (xi, j) in duality_sample() {
        let mut total = 0.0;
        for w in pts.windows(2) {
            let mut bad = None;
            let r = adaptive_gk(
                |y| match omega_j(y, j, &p) {
                    Ok(o) => (-2.0 * y * xi).exp() * o,
                    Err(e) => {
                        bad = Some(e);
                        0.0
                    }
                },
                w[0],
                w[1],
                0.0,
                1e-15,
                400,
            );
            if let Some(e) = bad {
                return Err(e);
            }
            total += r.value;
        }
        let quad = total / (2.0 * PI);
        let closed = nu(xi, j, &p);
        rows.push(CheckRow::new(
            2,
            format!("nu transform xi={xi} j={j}"),
            (quad - closed).abs() / closed,
            Comparison::Below,
            cfg.tolerance("nu_transform"),
        ));
    }
    Ok(rows)
}

/// Point pairs of the reproducing check, as `(w0, w1)` in the strip.
pub fn reproducing_pairs() -> [(Complex64, Complex64); 3] {
    [
        (Complex64::new(0.2, 0.5), Complex64::new(-0.6, -1.0)),
        (Complex64::new(0.0, 0.0), Complex64::new(0.3, 2.0)),
        (Complex64::new(1.0, -2.2), Complex64::new(-0.5, 0.3)),
    ]
}

fn reproducing_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let p = cfg.params()?;
    let ev = KernelEvaluator::new(p);
    let quad = SpatialQuadrature { l: cfg.l, n_x: 40 * cfg.l.ceil() as usize, n_y: 48 };
    let mut rows = Vec::new();
    for (k, (a, b)) in reproducing_pairs().into_iter().enumerate() {
        let (w0, w1) = (StripPoint::new(a, &p)?, StripPoint::new(b, &p)?);
        for j in [-2, 0, 3] {
            let gram = kernel_inner_product(&ev, w0, w1, j, quad)?;
            let want = ev.k_j(w1, w0, j).value();
            rows.push(CheckRow::new(
                3,
                format!("reproducing pair={k} j={j}"),
                (gram - want).norm() / want.norm(),
                Comparison::Below,
                cfg.tolerance("reproducing"),
            ));
        }
    }
    Ok(rows)
}

/// A random point with `|log|z2|^2| < 0.8 h` and `|Im z1 - log|z2|^2| < 0.4 pi`.
pub fn random_interior_point<R: Rng>(rng: &mut R, params: &WormParams) -> Result<InteriorPoint> {
    let h = params.half_width();
    let l = rng.random_range(-0.8 * h..0.8 * h);
    let y = l + rng.random_range(-0.4 * PI..0.4 * PI);
    let x = rng.random_range(-2.0..2.0);
    let theta = rng.random_range(-PI..PI);
    InteriorPoint::new(Complex64::new(x, y), Complex64::from_polar((0.5 * l).exp(), theta), params)
}

fn symmetry_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let p = cfg.params()?;
    let ev = KernelEvaluator::new(p);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tol = cfg.tolerance("kernel_symmetry");
    let (mut herm, mut rot, mut trans, mut diag_im) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut diag_positive = true;
    let mut worst_slope = f64::NEG_INFINITY;
    for _ in 0..10 {
        let z = random_interior_point(&mut rng, &p)?;
        let w = random_interior_point(&mut rng, &p)?;
        let phi = rng.random_range(-PI..PI);
        let a = rng.random_range(-3.0..3.0);
        let k = szego_eval(&z, &w, cfg.j_max, &ev)?.value();
        let kt = szego_eval(&w, &z, cfg.j_max, &ev)?.value();
        herm = herm.max((k - kt.conj()).norm() / k.norm());
        let kr = szego_eval(&z.rotated(phi), &w.rotated(phi), cfg.j_max, &ev)?.value();
        rot = rot.max((k - kr).norm() / k.norm());
        let ks = szego_eval(&z.translated(a), &w.translated(a), cfg.j_max, &ev)?.value();
        trans = trans.max((k - ks).norm() / k.norm());
        let d = szego_eval(&z, &z, cfg.j_max, &ev)?;
        diag_positive &= d.re > 0.0;
        diag_im = diag_im.max(d.im.abs() / d.re.abs());
        let prof = mode_decay_profile(&z, &w, cfg.j_max, &ev)?;
        worst_slope = worst_slope.max(prof.slope_positive.max(prof.slope_negative));
    }
    Ok(vec![
        CheckRow::new(4, "hermitian", herm, Comparison::Below, tol),
        CheckRow::new(4, "rotation invariance", rot, Comparison::Below, tol),
        CheckRow::new(4, "translation invariance", trans, Comparison::Below, tol),
        CheckRow::new(4, "diagonal imaginary part", diag_im, Comparison::Below, tol),
        CheckRow::flag(4, "diagonal positive", diag_positive),
        CheckRow::new(4, "largest tail slope", worst_slope, Comparison::Below, 0.0),
    ])
}

fn projector_for(cfg: &RunConfig, spec: GridSpec, n_t: usize) -> Result<Projector> {
    Projector::new(FieldGrid::new(spec, cfg.params()?)?, n_t)
}

/// Interior points and modes of the three Hardy-space traces.
pub fn trace_points() -> [(i64, Complex64); 3] {
    [(0, Complex64::new(0.0, 0.2)), (1, Complex64::new(0.5, -0.4)), (-2, Complex64::new(-0.3, 0.8))]
}

/// Residuals of criterion 5 on one grid: idempotence, self-adjointness, and the three fixed points.
pub fn projection_identities(cfg: &RunConfig, spec: GridSpec, n_t: usize) -> Result<(f64, f64, Vec<f64>)> {
    let p = projector_for(cfg, spec, n_t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f = random_smooth_field(p.grid(), &mut rng, 6.0, 4);
    let g = random_smooth_field(p.grid(), &mut rng, 6.0, 4);
    let idem = idempotence_residual(&p, &f)?;
    let sa = self_adjointness_residual(&p, &f, &g)?;
    let ev = KernelEvaluator::new(*p.params());
    let mut fp = Vec::new();
    for (j0, w0) in trace_points() {
        fp.push(fixed_point_residual(&p, &holomorphic_trace(p.grid(), &ev, j0, w0)?)?);
    }
    Ok((idem, sa, fp))
}

/// Name of the row that compares self-adjointness residuals across the refinement.
pub const SELF_ADJOINTNESS_GAIN: &str = "self-adjointness gain";

fn projection_identity_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let base = cfg.grid_spec();
    let fine = GridSpec { l: 2.0 * base.l, n_x: 2 * base.n_x, ..base };
    let (idem, sa, fp) = projection_identities(cfg, base, cfg.n_t)?;
    let (idem2, sa2, _) = projection_identities(cfg, fine, 2 * cfg.n_t)?;
    let gain = cfg.tolerance("refinement_gain");
    let mut rows = vec![
        CheckRow::new(5, "idempotence", idem, Comparison::Below, cfg.tolerance("idempotence")),
        CheckRow::new(5, "self-adjointness", sa, Comparison::Below, cfg.tolerance("self_adjointness")),
        CheckRow::new(5, "idempotence refined", idem2, Comparison::Below, cfg.tolerance("idempotence")),
        CheckRow::new(5, "self-adjointness refined", sa2, Comparison::Below, cfg.tolerance("self_adjointness")),
        CheckRow::new(5, "idempotence gain", idem / idem2, Comparison::AtLeast, gain),
        CheckRow::new(5, SELF_ADJOINTNESS_GAIN, sa / sa2, Comparison::AtLeast, gain),
    ];
    for (k, r) in fp.into_iter().enumerate() {
        rows.push(CheckRow::new(
            5,
            format!("fixed point trace={k}"),
            r,
            Comparison::Below,
            cfg.tolerance("fixed_point"),
        ));
    }
    Ok(rows)
}

fn projection_norm_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let p = projector_for(cfg, cfg.grid_spec(), cfg.n_t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut worst = 0.0f64;
    for k in 0..50 {
        let f = if k % 2 == 0 {
            random_smooth_field(p.grid(), &mut rng, 8.0, 6)
        } else {
            random_noise_field(p.grid(), &mut rng)
        };
        worst = worst.max(rayleigh_quotient(&p, &f)?);
    }
    Ok(vec![CheckRow::new(
        6,
        "max Rayleigh quotient",
        worst,
        Comparison::AtMost,
        1.0 + cfg.tolerance("rayleigh_excess"),
    )])
}

pub const BLOW_UP_LIST: [f64; 4] = [0.5, 0.9, 0.99, 0.999];

fn marcinkiewicz_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let p = cfg.params()?;
    let sc = ScanConfig::default();
    let change = cfg.tolerance("refinement_change");
    let band = cfg.tolerance("blow_up_band");
    let mut rows = Vec::new();
    let q = scan_with_refinement(Symbol::Q, p, &sc)?;
    rows.push(CheckRow::new(7, "Q constant", q.fine.constant, Comparison::Below, f64::INFINITY));
    rows.push(CheckRow::new(7, "Q refinement change", q.max_rel_change, Comparison::Below, change));
    rows.push(CheckRow::flag(7, "Q derivatives certified", !(q.coarse.any_unreliable || q.fine.any_unreliable)));
    let ma = m_alpha_blow_up(&BLOW_UP_LIST, p, &sc)?;
    let mag = m_alpha_gamma_blow_up(&BLOW_UP_LIST, &BLOW_UP_LIST, p, &sc)?;
    for (name, rep) in [("m_alpha", &ma), ("m_alpha_gamma", &mag)] {
        let worst = rep.entries.iter().map(|e| e.max_rel_change).fold(0.0, f64::max);
        let finite = rep.entries.iter().all(|e| e.constant.is_finite());
        let certified = rep.entries.iter().all(|e| !e.any_unreliable);
        rows.push(CheckRow::flag(7, format!("{name} constants finite"), finite));
        rows.push(CheckRow::new(7, format!("{name} refinement change"), worst, Comparison::Below, change));
        rows.push(CheckRow::flag(7, format!("{name} derivatives certified"), certified));
        rows.push(CheckRow::new(7, format!("{name} scaled constant spread"), rep.spread, Comparison::AtMost, band));
        rows.push(
            CheckRow::new(7, format!("{name} fitted exponent"), rep.fitted_exponent, Comparison::AtLeast, 0.0)
                .informational(),
        );
    }
    let fd = f_decay_check(&p, &default_eta_grid(50))?;
    rows.push(CheckRow::new(7, "F~ weighted sups refinement change", fd.max_rel_change(), Comparison::Below, change));
    rows.push(CheckRow::new(7, "F lower comparison constant", fd.c1, Comparison::AtLeast, f64::MIN_POSITIVE));
    rows.push(CheckRow::flag(7, "F upper comparison constant finite", fd.c2.is_finite()));
    Ok(rows)
}

fn derivative_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let tol = cfg.tolerance("derivative_display");
    let grid = default_check_grid();
    let mut rows = Vec::new();
    for alpha in [0.3, 0.5, 0.9] {
        let r = derivative_formula_check(alpha, &grid)?;
        for s in &r.summary {
            let gating = matches!(s.display, Display::DerivativeXi | Display::DerivativeEta | Display::SecondEta);
            let mut row = CheckRow::new(
                8,
                format!("{} alpha={alpha}", s.display.name()),
                s.max_rel_residual,
                Comparison::Below,
                tol,
            );
            if !gating {
                row = row.informational();
            }
            rows.push(row);
            if gating {
                rows.push(CheckRow::flag(
                    8,
                    format!("{} alpha={alpha} steps converged", s.display.name()),
                    s.all_certified,
                ));
            }
        }
    }
    let decay = phi_over_d(1.0, 512.0).abs();
    rows.push(CheckRow::new(8, "phi/D at xi=1 eta=512", decay, Comparison::Below, 1e-4).informational());
    Ok(rows)
}

pub const SCHUR_EXPONENTS: [f64; 4] = [1.1, 1.5, 2.0, 4.0];

fn schur_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let p = cfg.params()?;
    let change = cfg.tolerance("refinement_change");
    let mut rows = Vec::new();
    for exp in SCHUR_EXPONENTS {
        for (o, i) in certified_pairs() {
            let spec = SchurKernelSpec::new(o, i, exp, SchurKernel::Pair)?;
            let r = schur_test(&spec, &p, &SchurConfig::default())?;
            let tag = format!("pair=({},{}) p={exp}", o.label(), i.label());
            rows.push(CheckRow::flag(9, format!("schur finite {tag}"), r.finite()));
            rows.push(CheckRow::new(
                9,
                format!("schur refinement change {tag}"),
                r.max_rel_change,
                Comparison::Below,
                change,
            ));
        }
    }
    Ok(rows)
}

fn sobolev_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let p = projector_for(cfg, cfg.grid_spec(), cfg.n_t)?;
    let f = crate::geometry::BoundaryField::from_fn(p.grid().clone(), |s, x, v, th| {
        if s == SheetId::S1 {
            Complex64::from_polar((-(x * x)).exp() * (1.0 + 0.1 * v), th)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut rows = Vec::new();
    for (label, out) in [("slanted", SheetId::S1), ("flat", SheetId::S2)] {
        let (a, b) = p.params().interval(out);
        let r = sobolev_commutation_residual(&p, out, SheetId::S1, &f, 0.5 * (a + b), &[4e-3, 2e-3, 1e-3])?;
        let last = r.steps.last().map(|s| s.1).unwrap_or(f64::NAN);
        let order = r.orders.iter().cloned().fold(f64::INFINITY, f64::min);
        rows.push(CheckRow::new(
            10,
            format!("sobolev residual {label}"),
            last,
            Comparison::Below,
            cfg.tolerance("sobolev"),
        ));
        rows.push(CheckRow::new(
            10,
            format!("sobolev order {label}"),
            order,
            Comparison::AtLeast,
            cfg.tolerance("sobolev_order"),
        ));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Parseval,
    Kernel,
    Projection,
    Marcinkiewicz,
    Schur,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Parseval => "parseval",
            Suite::Kernel => "kernel",
            Suite::Projection => "projection",
            Suite::Marcinkiewicz => "marcinkiewicz",
            Suite::Schur => "schur",
            Suite::All => "all",
        }
    }

    pub fn criteria(self) -> Vec<u8> {
        match self {
            Suite::Parseval => vec![1, 2],
            Suite::Kernel => vec![3, 4],
            Suite::Projection => vec![5, 6, 10],
            Suite::Marcinkiewicz => vec![7, 8],
            Suite::Schur => vec![9],
            Suite::All => (1..=10).collect(),
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "parseval" => Suite::Parseval,
            "kernel" => Suite::Kernel,
            "projection" => Suite::Projection,
            "marcinkiewicz" => Suite::Marcinkiewicz,
            "schur" => Suite::Schur,
            "all" => Suite::All,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown suite '{other}' (expected parseval, kernel, projection, marcinkiewicz, schur or all)"
                )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub config: RunConfig,
    pub criteria: Vec<CriterionOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed())
    }
}

/// Runs every criterion of `suite`, concurrently, and orders the outcomes by id.
pub fn run_suite(cfg: &RunConfig, suite: Suite) -> Result<SuiteReport> {
    cfg.validate()?;
    let ids = suite.criteria();
    let results: Vec<Result<CriterionOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = ids.iter().map(|&id| s.spawn(move || run_criterion(id, cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread panicked")).collect()
    });
    let mut criteria = results.into_iter().collect::<Result<Vec<_>>>()?;
    criteria.sort_by_key(|c| c.id);
    Ok(SuiteReport { suite, config: cfg.clone(), criteria })
}

/// Writes `<suite>.csv` with one row per check and `<suite>_summary.json`; returns both paths.
pub fn write_report(report: &SuiteReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", report.suite));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["criterion", "check", "value", "comparison", "threshold", "passed", "gating"])?;
    for c in &report.criteria {
        for r in &c.rows {
            w.write_record([
                r.criterion.to_string(),
                r.check.clone(),
                format!("{:e}", r.value),
                r.comparison.symbol().to_string(),
                format!("{:e}", r.threshold),
                r.passed.to_string(),
                r.gating.to_string(),
            ])?;
        }
    }
    w.flush()?;
    #[derive(Serialize)]
    struct Summary<'a> {
        suite: Suite,
        passed: bool,
        config: &'a RunConfig,
        criteria: Vec<CriterionSummary<'a>>,
    }
    #[derive(Serialize)]
    struct CriterionSummary<'a> {
        id: u8,
        title: &'a str,
        passed: bool,
        failing: Vec<&'a CheckRow>,
    }
    let summary = Summary {
        suite: report.suite,
        passed: report.passed(),
        config: &report.config,
        criteria: report
            .criteria
            .iter()
            .map(|c| CriterionSummary { id: c.id, title: c.title, passed: c.passed(), failing: c.failing() })
            .collect(),
    };
    let json_path = dir.join(format!("{}_summary.json", report.suite));
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok((csv_path, json_path))
}
