use std::ffi::CStr;
use std::ptr;

use worm_szego::geometry::WormParams;
use worm_szego::strip::{k_j, log_nu, StripPoint};
use worm_szego_ffi::*;

fn c(re: f64, im: f64) -> WsComplex {
    WsComplex { re, im }
}

fn last_error() -> String {
    let n = unsafe { ws_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; n + 1];
    unsafe { ws_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn context(beta: f64) -> *mut WsContext {
    let mut ctx = ptr::null_mut();
    assert_eq!(unsafe { ws_context_new(beta, &mut ctx) }, WsStatus::Ok);
    assert!(!ctx.is_null());
    ctx
}

#[test]
fn log_nu_matches_the_library() {
    let beta = std::f64::consts::PI;
    let ctx = context(beta);
    let params = WormParams::new(beta).unwrap();
    for (xi, j) in [(0.0, 0), (1.5, -2), (-3.0, 4)] {
        let mut v = f64::NAN;
        assert_eq!(unsafe { ws_log_nu(ctx, xi, j, &mut v) }, WsStatus::Ok);
        assert!((v - log_nu(xi, j, &params)).abs() < 1e-12 * v.abs().max(1.0));
    }
    unsafe { ws_context_free(ctx) };
}

#[test]
fn kj_matches_the_library_and_is_hermitian() {
    let beta = 4.0;
    let ctx = context(beta);
    let params = WormParams::new(beta).unwrap();
    let (z, w) = (c(0.4, 0.2), c(-0.3, -0.5));
    let mut a = WsComplex::default();
    let mut b = WsComplex::default();
    assert_eq!(unsafe { ws_kj(ctx, z, w, 1, &mut a) }, WsStatus::Ok);
    assert_eq!(unsafe { ws_kj(ctx, w, z, 1, &mut b) }, WsStatus::Ok);
    let lib = k_j(
        StripPoint::new(num_complex::Complex64::new(0.4, 0.2), &params).unwrap(),
        StripPoint::new(num_complex::Complex64::new(-0.3, -0.5), &params).unwrap(),
        1,
        &params,
    );
    assert!((a.re - lib.re).abs() + (a.im - lib.im).abs() < 1e-12 * lib.norm());
    assert!((a.re - b.re).abs() + (a.im + b.im).abs() < 1e-10 * lib.norm());
    unsafe { ws_context_free(ctx) };
}

#[test]
fn szego_value_is_hermitian_with_small_tail() {
    let ctx = context(std::f64::consts::PI);
    let (z1, z2, w1, w2) = (c(0.3, 0.2), c(0.8, 0.4), c(-0.1, -0.3), c(0.5, -0.6));
    let (mut kzw, mut kwz) = (WsComplex::default(), WsComplex::default());
    let mut tail = f64::NAN;
    assert_eq!(unsafe { ws_szego(ctx, z1, z2, w1, w2, 64, &mut kzw, &mut tail) }, WsStatus::Ok);
    assert_eq!(unsafe { ws_szego(ctx, w1, w2, z1, z2, 64, &mut kwz, ptr::null_mut()) }, WsStatus::Ok);
    let scale = kzw.re.hypot(kzw.im);
    assert!(scale > 0.0 && tail < 1e-10);
    assert!((kzw.re - kwz.re).abs() + (kzw.im + kwz.im).abs() < 1e-10 * scale);
    unsafe { ws_context_free(ctx) };
}

#[test]
fn errors_set_codes_and_messages() {
    let mut ctx = ptr::null_mut();
    assert_eq!(unsafe { ws_context_new(1.0, &mut ctx) }, WsStatus::InvalidParameter);
    assert!(ctx.is_null());
    assert!(last_error().contains("beta"));

    assert_eq!(unsafe { ws_context_new(4.0, ptr::null_mut()) }, WsStatus::NullPointer);
    let ctx = context(4.0);
    let mut out = WsComplex::default();
    // Imaginary part outside the strip of half-width beta - pi/2.
    assert_eq!(unsafe { ws_kj(ctx, c(0.0, 5.0), c(0.0, 0.0), 0, &mut out) }, WsStatus::Domain);
    assert!(!last_error().is_empty());
    let mut v = 0.0;
    assert_eq!(unsafe { ws_log_nu(ptr::null(), 0.0, 0, &mut v) }, WsStatus::NullPointer);
    assert_eq!(unsafe { ws_log_nu(ctx, f64::NAN, 0, &mut v) }, WsStatus::InvalidParameter);
    // A successful call clears the message.
    assert_eq!(unsafe { ws_log_nu(ctx, 0.0, 0, &mut v) }, WsStatus::Ok);
    assert_eq!(unsafe { ws_last_error_message(ptr::null_mut(), 0) }, 0);
    unsafe {
        ws_context_free(ctx);
        ws_context_free(ptr::null_mut());
    }
}

#[test]
fn projector_round_trip_is_idempotent() {
    let mut p = ptr::null_mut();
    let st = unsafe { ws_projector_new(std::f64::consts::PI, 10.0, 64, 12, 8, 24, &mut p) };
    assert_eq!(st, WsStatus::Ok, "{}", last_error());
    let n = unsafe { ws_projector_field_len(p) };
    assert_eq!(n, 4 * 64 * 12 * 8);

    let mut input = Vec::with_capacity(n);
    for i in 0..n {
        let (mut s, mut x, mut v, mut t) = (0u32, 0.0, 0.0, 0.0);
        assert_eq!(unsafe { ws_projector_node(p, i, &mut s, &mut x, &mut v, &mut t) }, WsStatus::Ok);
        assert!((1..=4).contains(&s));
        let g = (-x * x / 2.0).exp();
        input.push(c(g * t.cos() * (1.0 + 0.1 * v), g * (2.0 * t).sin()));
    }
    let mut once = vec![WsComplex::default(); n];
    let mut twice = vec![WsComplex::default(); n];
    assert_eq!(unsafe { ws_projector_apply(p, input.as_ptr(), once.as_mut_ptr(), n) }, WsStatus::Ok);
    assert_eq!(unsafe { ws_projector_apply(p, once.as_ptr(), twice.as_mut_ptr(), n) }, WsStatus::Ok);
    let norm = |f: &[WsComplex]| f.iter().map(|z| z.re * z.re + z.im * z.im).sum::<f64>().sqrt();
    let diff: Vec<WsComplex> = once.iter().zip(&twice).map(|(a, b)| c(a.re - b.re, a.im - b.im)).collect();
    assert!(norm(&once) > 0.0);
    assert!(norm(&diff) < 0.05 * norm(&once), "{} {}", norm(&diff), norm(&once));

    assert_eq!(unsafe { ws_projector_apply(p, input.as_ptr(), once.as_mut_ptr(), n - 1) }, WsStatus::BufferTooSmall);
    let (mut s, mut x, mut v, mut t) = (0u32, 0.0, 0.0, 0.0);
    assert_eq!(unsafe { ws_projector_node(p, n, &mut s, &mut x, &mut v, &mut t) }, WsStatus::InvalidParameter);
    unsafe { ws_projector_free(p) };
    assert_eq!(unsafe { ws_projector_field_len(ptr::null()) }, 0);
}

#[test]
fn generated_header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/worm_szego.h")).unwrap();
    for name in [
        "ws_last_error_message",
        "ws_context_new",
        "ws_context_free",
        "ws_log_nu",
        "ws_kj",
        "ws_szego",
        "ws_projector_new",
        "ws_projector_free",
        "ws_projector_field_len",
        "ws_projector_node",
        "ws_projector_apply",
        "typedef struct WsContext WsContext",
        "WS_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let dir = std::env::temp_dir().join(format!("ws_header_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("smoke.c");
    std::fs::write(
        &src,
        "#include \"worm_szego.h\"\nint main(void) { WsContext *c = 0; WsComplex z = {0.0, 0.0}; (void)z;\n\
         return ws_context_new(3.14159, &c) == WS_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "{cc} rejected the generated header"),
        Err(e) => eprintln!("skipping: no C compiler ({e})"),
    }
}
