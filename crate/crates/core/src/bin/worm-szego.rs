use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use worm_szego::analysis::derivatives::{default_check_grid, derivative_formula_check};
use worm_szego::analysis::marcinkiewicz::{
    m_alpha_blow_up, m_alpha_gamma_blow_up, scan_with_refinement, ScanConfig, Symbol,
};
use worm_szego::analysis::schur::{schur_test, SchurConfig, SchurKernel, SchurKernelSpec};
use worm_szego::config::RunConfig;
use worm_szego::geometry::{BoundaryField, FieldGrid, SheetId};
use worm_szego::kernel::{szego_eval, InteriorPoint};
use worm_szego::projector::{holomorphic_trace, random_noise_field, random_smooth_field, rayleigh_quotient, Projector};
use worm_szego::strip::{self, KernelEvaluator, NuEvaluator, SpatialQuadrature, StripFunction, StripPoint};
use worm_szego::suite::{projection_identities, run_criterion, run_suite, write_report, Suite};
use worm_szego::{Error, Result};

#[derive(Parser)]
#[command(name = "worm-szego", version, about = "Szego kernel and boundary projection of the model worm domain")]
struct Cli {
    /// Domain parameter beta (> pi/2); overrides the config file.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON reports; tables go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random field; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SymbolArg {
    Q,
    MAlpha,
    MAlphaGamma,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Pair,
    LowerEdge,
    Control,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldArg {
    Smooth,
    Noise,
    Trace,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate nu(xi, j) and ln nu(xi, j).
    Nu {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        xi: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
        j: Vec<i64>,
    },
    /// Reproducing kernel k_j(z, w) of one mode space.
    Kj {
        /// Strip point as `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, allow_hyphen_values = true)]
        w: String,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        j: i64,
    },
    /// Szego kernel K(z, w) of the domain, with the truncation diagnostics.
    Kernel {
        #[arg(long, allow_hyphen_values = true)]
        z1: String,
        #[arg(long, allow_hyphen_values = true)]
        z2: String,
        #[arg(long, allow_hyphen_values = true)]
        w1: String,
        #[arg(long, allow_hyphen_values = true)]
        w2: String,
        /// Truncation of the mode series; defaults to the config value.
        #[arg(long)]
        j_max: Option<i64>,
    },
    /// Parseval residual for a Gaussian density exp(-(xi - center)^2) in mode j.
    Parseval {
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        j: i64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        center: f64,
    },
    /// Apply the boundary projection to a field read from CSV or generated from the seed.
    Project {
        /// Field CSV with columns sheet,x,v,theta,re,im on the configured grid.
        #[arg(long, conflicts_with = "field")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "smooth")]
        field: FieldArg,
    },
    /// Idempotence, self-adjointness, fixed points and Rayleigh quotients on the configured grid.
    VerifyProjection {
        #[arg(long, default_value_t = 10)]
        fields: usize,
    },
    /// Commutation of y-derivatives with the sheet-pair operators.
    SobolevCheck,
    /// Weighted derivative sups of a multiplier symbol, or blow-up constants over a parameter list.
    Marcinkiewicz {
        #[arg(long, value_enum, default_value = "q")]
        symbol: SymbolArg,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        gamma: Vec<f64>,
        /// Fit constants against the parameter gap instead of scanning a single symbol.
        #[arg(long)]
        blow_up: bool,
    },
    /// Schur test sups for a sheet pair.
    Schur {
        #[arg(long, value_delimiter = ',', default_value = "1.1,1.5,2,4")]
        p: Vec<f64>,
        /// Sheet pair as `out,in`.
        #[arg(long, default_value = "1,1")]
        pair: String,
        #[arg(long, value_enum, default_value = "pair")]
        kernel: KernelArg,
    },
    /// Closed-form derivatives of m_alpha against finite differences.
    DerivativeCheck {
        #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.9")]
        alpha: Vec<f64>,
    },
    /// Run a named check suite and write its reports.
    Suite {
        /// parseval, kernel, projection, marcinkiewicz, schur or all.
        name: String,
    },
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number '{t}' in '{s}'")));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(Error::InvalidParameter(format!("expected 're,im', got '{s}'"))),
    }
}

fn parse_pair(s: &str) -> Result<(SheetId, SheetId)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let sheet = |t: &str| {
        t.parse::<usize>()
            .map_err(|_| Error::InvalidParameter(format!("bad sheet label '{t}'")))
            .and_then(SheetId::from_label)
    };
    match parts.as_slice() {
        [a, b] => Ok((sheet(a)?, sheet(b)?)),
        _ => Err(Error::InvalidParameter(format!("expected 'out,in', got '{s}'"))),
    }
}

/// A CSV table written to `<out>/<name>.csv`, or to stdout without `--out`.
struct Table {
    writer: csv::Writer<Box<dyn Write>>,
    path: Option<PathBuf>,
}

impl Table {
    fn new(out: Option<&Path>, name: &str, header: &[&str]) -> Result<Self> {
        let (sink, path): (Box<dyn Write>, Option<PathBuf>) = match out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let p = dir.join(format!("{name}.csv"));
                (Box::new(std::fs::File::create(&p)?), Some(p))
            }
            None => (Box::new(std::io::stdout()), None),
        };
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(header)?;
        Ok(Table { writer, path })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        if let Some(p) = self.path {
            eprintln!("wrote {}", p.display());
        }
        Ok(())
    }
}

fn e(x: f64) -> String {
    format!("{x:e}")
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(b) = cli.beta {
        cfg.beta = b;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the command; `Ok(false)` means a check failed its tolerance.
fn run(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    let params = cfg.params()?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Nu { xi, j } => {
            let ev = NuEvaluator::new(params);
            let mut t = Table::new(out, "nu", &["xi", "j", "nu", "log_nu"])?;
            for &jj in j {
                for &x in xi {
                    let l = ev.log_nu(x, jj as f64);
                    t.row(&[e(x), jj.to_string(), e(l.exp()), e(l)])?;
                }
            }
            t.finish()?;
        }
        Command::Kj { z, w, j } => {
            let ev = KernelEvaluator::new(params);
            let v =
                ev.k_j(StripPoint::new(parse_complex(z)?, &params)?, StripPoint::new(parse_complex(w)?, &params)?, *j);
            let mut t = Table::new(out, "kj", &["j", "re", "im", "log_abs", "window_truncated"])?;
            let c = v.value();
            t.row(&[j.to_string(), e(c.re), e(c.im), e(v.log_abs()), v.truncated.to_string()])?;
            t.finish()?;
        }
        Command::Kernel { z1, z2, w1, w2, j_max } => {
            let z = InteriorPoint::new(parse_complex(z1)?, parse_complex(z2)?, &params)?;
            let w = InteriorPoint::new(parse_complex(w1)?, parse_complex(w2)?, &params)?;
            let v = szego_eval(&z, &w, j_max.unwrap_or(cfg.j_max), &KernelEvaluator::new(params))?;
            if let Some(msg) = &v.warning {
                eprintln!("warning: {msg}");
            }
            let mut t = Table::new(out, "kernel", &["re", "im", "tail_ratio", "j_max"])?;
            t.row(&[e(v.re), e(v.im), e(v.tail_ratio), v.j_max.to_string()])?;
            t.finish()?;
        }
        Command::Parseval { j, center } => {
            let n = (40.0 * cfg.xi_max).round() as usize + 1;
            let g = StripFunction::from_fn(params, *j, cfg.xi_max, n, |x| {
                Complex64::new((-(x - center) * (x - center)).exp(), 0.0)
            })?;
            let r = strip::parseval_residual(&g, SpatialQuadrature { l: cfg.l, ..SpatialQuadrature::default() })?;
            let mut t =
                Table::new(out, "parseval", &["j", "center", "residual", "spectral", "spatial", "tail_unreliable"])?;
            t.row(&[
                j.to_string(),
                e(*center),
                e(r.residual),
                e(r.spectral),
                e(r.spatial),
                r.tail_unreliable.to_string(),
            ])?;
            t.finish()?;
            return Ok(r.residual < cfg.tolerance("parseval"));
        }
        Command::Project { input, field } => {
            let grid = FieldGrid::new(cfg.grid_spec(), params)?;
            let f = match (input, field) {
                (Some(path), _) => BoundaryField::read_csv(path, grid.clone())?,
                (None, FieldArg::Smooth) => {
                    random_smooth_field(&grid, &mut ChaCha8Rng::seed_from_u64(cfg.seed), 6.0, 4)
                }
                (None, FieldArg::Noise) => random_noise_field(&grid, &mut ChaCha8Rng::seed_from_u64(cfg.seed)),
                (None, FieldArg::Trace) => {
                    holomorphic_trace(&grid, &KernelEvaluator::new(params), 1, Complex64::new(0.5, -0.4))?
                }
            };
            let p = Projector::new(grid, cfg.n_t)?.apply_p(&f)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    let path = dir.join("projected.csv");
                    p.write_csv(&path)?;
                    eprintln!("wrote {}", path.display());
                }
                None => {
                    let mut w = csv::Writer::from_writer(std::io::stdout());
                    p.write_rows(&mut w)?;
                    w.flush()?;
                }
            }
        }
        Command::VerifyProjection { fields } => {
            let (idem, sa, fp) = projection_identities(&cfg, cfg.grid_spec(), cfg.n_t)?;
            let proj = Projector::new(FieldGrid::new(cfg.grid_spec(), params)?, cfg.n_t)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
            let mut worst = 0.0f64;
            for k in 0..*fields {
                let f = if k % 2 == 0 {
                    random_smooth_field(proj.grid(), &mut rng, 8.0, 6)
                } else {
                    random_noise_field(proj.grid(), &mut rng)
                };
                worst = worst.max(rayleigh_quotient(&proj, &f)?);
            }
            let mut t = Table::new(out, "verify_projection", &["check", "value", "threshold", "passed"])?;
            let mut ok = true;
            let mut emit = |t: &mut Table, name: String, v: f64, thr: f64, pass: bool| -> Result<()> {
                ok &= pass;
                t.row(&[name, e(v), e(thr), pass.to_string()])
            };
            let ti = cfg.tolerance("idempotence");
            emit(&mut t, "idempotence".into(), idem, ti, idem < ti)?;
            let ts = cfg.tolerance("self_adjointness");
            emit(&mut t, "self-adjointness".into(), sa, ts, sa < ts)?;
            let tf = cfg.tolerance("fixed_point");
            for (k, r) in fp.iter().enumerate() {
                emit(&mut t, format!("fixed point trace={k}"), *r, tf, *r < tf)?;
            }
            let tr = 1.0 + cfg.tolerance("rayleigh_excess");
            emit(&mut t, "max Rayleigh quotient".into(), worst, tr, worst <= tr)?;
            t.finish()?;
            return Ok(ok);
        }
        Command::SobolevCheck => {
            let o = run_criterion(10, &cfg)?;
            let mut t = Table::new(out, "sobolev", &["check", "value", "threshold", "passed"])?;
            for r in &o.rows {
                t.row(&[r.check.clone(), e(r.value), e(r.threshold), r.passed.to_string()])?;
            }
            t.finish()?;
            return Ok(o.passed());
        }
        Command::Marcinkiewicz { symbol, alpha, gamma, blow_up } => {
            let sc = ScanConfig::default();
            let change = cfg.tolerance("refinement_change");
            if *blow_up {
                let rep = match symbol {
                    SymbolArg::MAlpha => m_alpha_blow_up(alpha, params, &sc)?,
                    SymbolArg::MAlphaGamma => m_alpha_gamma_blow_up(alpha, gamma, params, &sc)?,
                    SymbolArg::Q => return Err(Error::InvalidParameter("Q has no parameter to blow up".into())),
                };
                let mut t = Table::new(
                    out,
                    "marcinkiewicz_blow_up",
                    &["alpha", "gamma", "gap", "constant", "scaled", "rate", "stable"],
                )?;
                for en in &rep.entries {
                    let g = en.gamma.map(e).unwrap_or_default();
                    let stable = en.max_rel_change < change && !en.any_unreliable;
                    t.row(&[
                        e(en.alpha),
                        g,
                        e(en.gap),
                        e(en.constant),
                        e(en.scaled),
                        e(rep.fitted_exponent),
                        stable.to_string(),
                    ])?;
                }
                t.finish()?;
                eprintln!("spread {:.4} fitted exponent {:.4}", rep.spread, rep.fitted_exponent);
                return Ok(rep.spread <= cfg.tolerance("blow_up_band"));
            }
            let sym = match symbol {
                SymbolArg::Q => Symbol::Q,
                SymbolArg::MAlpha => Symbol::MAlpha { alpha: alpha[0] },
                SymbolArg::MAlphaGamma => Symbol::MAlphaGamma { alpha: alpha[0], gamma: gamma[0] },
            };
            let r = scan_with_refinement(sym, params, &sc)?;
            let stable = r.max_rel_change < change && !r.fine.any_unreliable && !r.coarse.any_unreliable;
            let mut t = Table::new(
                out,
                "marcinkiewicz",
                &["symbol", "order", "sup", "at_xi", "at_eta", "inner_sup", "unreliable_points", "stable"],
            )?;
            for o in &r.fine.orders {
                t.row(&[
                    sym.name(),
                    format!("({},{})", o.k1, o.k2),
                    e(o.sup),
                    e(o.at_xi),
                    e(o.at_eta),
                    e(o.inner_sup),
                    o.unreliable_points.to_string(),
                    stable.to_string(),
                ])?;
            }
            t.finish()?;
            return Ok(stable);
        }
        Command::Schur { p, pair, kernel } => {
            let (o, i) = parse_pair(pair)?;
            let k = match kernel {
                KernelArg::Pair => SchurKernel::Pair,
                KernelArg::LowerEdge => SchurKernel::LowerEdge,
                KernelArg::Control => SchurKernel::Control,
            };
            let change = cfg.tolerance("refinement_change");
            let mut ok = true;
            let mut t =
                Table::new(out, "schur", &["pair", "p", "q_side", "p_side", "norm_bound", "rel_change", "stable"])?;
            for &pp in p {
                let r = schur_test(&SchurKernelSpec::new(o, i, pp, k)?, &params, &SchurConfig::default())?;
                let stable = r.finite() && r.max_rel_change < change;
                ok &= stable;
                t.row(&[
                    format!("({},{})", o.label(), i.label()),
                    e(pp),
                    e(r.q_side_refined.sup),
                    e(r.p_side_refined.sup),
                    e(r.norm_bound()),
                    e(r.max_rel_change),
                    stable.to_string(),
                ])?;
            }
            t.finish()?;
            return Ok(ok);
        }
        Command::DerivativeCheck { alpha } => {
            let tol = cfg.tolerance("derivative_display");
            let mut t = Table::new(
                out,
                "derivative_check",
                &["alpha", "display", "max_rel_residual", "steps_converged", "below_tolerance"],
            )?;
            for &a in alpha {
                let r = derivative_formula_check(a, &default_check_grid())?;
                for s in &r.summary {
                    t.row(&[
                        e(a),
                        s.display.name().into(),
                        e(s.max_rel_residual),
                        s.all_certified.to_string(),
                        (s.max_rel_residual < tol).to_string(),
                    ])?;
                }
            }
            t.finish()?;
        }
        Command::Suite { name } => {
            let suite: Suite = name.parse()?;
            let report = run_suite(&cfg, suite)?;
            for c in &report.criteria {
                println!("{}", c.summary_line());
            }
            let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("out"));
            let (csv_path, json_path) = write_report(&report, &dir)?;
            eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
