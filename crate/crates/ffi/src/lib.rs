//! C interface to the worm-szego library.
//!
//! Every function returns a [`WsStatus`]. On failure a human-readable message is stored
//! per thread and can be copied out with [`ws_last_error_message`]. Objects are exposed as
//! opaque handles that the caller releases with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use num_complex::Complex64;
use worm_szego::geometry::{BoundaryField, FieldGrid, GridSpec, SheetId, WormParams};
use worm_szego::kernel::{szego_eval, InteriorPoint};
use worm_szego::projector::Projector;
use worm_szego::strip::{KernelEvaluator, NuEvaluator, StripPoint};
use worm_szego::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    GridMismatch = 4,
    EmptyGrid = 5,
    Config = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// A complex number laid out as two doubles.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WsComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for WsComplex {
    fn from(c: Complex64) -> Self {
        WsComplex { re: c.re, im: c.im }
    }
}

impl From<WsComplex> for Complex64 {
    fn from(c: WsComplex) -> Self {
        Complex64::new(c.re, c.im)
    }
}

/// Domain parameters plus the cached evaluators for `nu`, `k_j` and `K`.
pub struct WsContext {
    nu: NuEvaluator,
    kernel: KernelEvaluator,
}

/// A boundary projection bound to one sampling grid.
pub struct WsProjector {
    inner: Projector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> WsStatus {
    match err {
        Error::InvalidParameter(_) => WsStatus::InvalidParameter,
        Error::Domain(_) => WsStatus::Domain,
        Error::GridMismatch(_) => WsStatus::GridMismatch,
        Error::EmptyGrid => WsStatus::EmptyGrid,
        Error::Config(_) => WsStatus::Config,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => WsStatus::Io,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), (WsStatus, String)>>(f: F) -> WsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            WsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            WsStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (WsStatus, String)>;
}

impl<T> IntoFfi<T> for worm_szego::Result<T> {
    fn ffi(self) -> Result<T, (WsStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(name: &str) -> (WsStatus, String) {
    (WsStatus::NullPointer, format!("{name} is null"))
}

/// Copies the message of the last failed call on this thread into `buf`, NUL-terminated.
///
/// Returns the message length without the terminator, or 0 when there is no error.
/// When `buf` is null or `len` is too small nothing is written, so the return value
/// can be used to size the buffer.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ws_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len >= bytes.len() {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
            }
            bytes.len() - 1
        }
    })
}

/// Creates a context for the domain with parameter `beta > pi/2`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ws_context_new(beta: f64, out: *mut *mut WsContext) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = WormParams::new(beta).ffi()?;
        let ctx = WsContext { nu: NuEvaluator::new(params), kernel: KernelEvaluator::new(params) };
        *out = Box::into_raw(Box::new(ctx));
        Ok(())
    })
}

/// Releases a context. Passing null is a no-op.
///
/// # Safety
/// `ctx` must be null or a handle from [`ws_context_new`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ws_context_free(ctx: *mut WsContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Writes `ln nu(xi, j)` to `out`.
///
/// # Safety
/// `ctx` must be a live context and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_log_nu(ctx: *const WsContext, xi: f64, j: i64, out: *mut f64) -> WsStatus {
    guard(|| {
        let ctx = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !xi.is_finite() {
            return Err((WsStatus::InvalidParameter, format!("xi must be finite, got {xi}")));
        }
        *out = ctx.nu.log_nu(xi, j as f64);
        Ok(())
    })
}

/// Writes the mode kernel `k_j(z, w)` for strip points `z`, `w` to `out`.
///
/// # Safety
/// `ctx` must be a live context and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_kj(
    ctx: *const WsContext,
    z: WsComplex,
    w: WsComplex,
    j: i64,
    out: *mut WsComplex,
) -> WsStatus {
    guard(|| {
        let ctx = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let params = ctx.kernel.params();
        let z = StripPoint::new(z.into(), params).ffi()?;
        let w = StripPoint::new(w.into(), params).ffi()?;
        *out = ctx.kernel.k_j(z, w, j).value().into();
        Ok(())
    })
}

/// Writes the Szego kernel `K(z, w)` truncated at `|j| <= j_max` to `out`.
///
/// `tail_ratio` may be null; otherwise it receives the size of the last retained
/// terms relative to the partial sum.
///
/// # Safety
/// `ctx` must be a live context, `out` a valid pointer and `tail_ratio` null or valid.
#[no_mangle]
pub unsafe extern "C" fn ws_szego(
    ctx: *const WsContext,
    z1: WsComplex,
    z2: WsComplex,
    w1: WsComplex,
    w2: WsComplex,
    j_max: i64,
    out: *mut WsComplex,
    tail_ratio: *mut f64,
) -> WsStatus {
    guard(|| {
        let ctx = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let params = ctx.kernel.params();
        let z = InteriorPoint::new(z1.into(), z2.into(), params).ffi()?;
        let w = InteriorPoint::new(w1.into(), w2.into(), params).ffi()?;
        let v = szego_eval(&z, &w, j_max, &ctx.kernel).ffi()?;
        *out = v.value().into();
        if !tail_ratio.is_null() {
            *tail_ratio = v.tail_ratio;
        }
        Ok(())
    })
}

/// Builds the projection on a grid of `n_x` x-nodes over `[-l, l)`, `n_v` vertical nodes
/// per sheet and `n_theta` angles, with `n_t` quadrature nodes for the transverse integral.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ws_projector_new(
    beta: f64,
    l: f64,
    n_x: usize,
    n_v: usize,
    n_theta: usize,
    n_t: usize,
    out: *mut *mut WsProjector,
) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = WormParams::new(beta).ffi()?;
        let grid = FieldGrid::new(GridSpec { l, n_x, n_v, n_theta }, params).ffi()?;
        let inner = Projector::new(grid, n_t).ffi()?;
        *out = Box::into_raw(Box::new(WsProjector { inner }));
        Ok(())
    })
}

/// Releases a projector. Passing null is a no-op.
///
/// # Safety
/// `p` must be null or a handle from [`ws_projector_new`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ws_projector_free(p: *mut WsProjector) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of complex samples in a field on the projector's grid.
///
/// Samples are ordered by sheet, then vertical node, then x node, then angle.
/// Returns 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live projector.
#[no_mangle]
pub unsafe extern "C" fn ws_projector_field_len(p: *const WsProjector) -> usize {
    p.as_ref().map_or(0, |p| p.inner.grid().len())
}

/// Coordinates of sample `index`: sheet label (1 to 4), `x`, vertical coordinate `v`, angle `theta`.
///
/// # Safety
/// `p` must be a live projector and the four output pointers valid.
#[no_mangle]
pub unsafe extern "C" fn ws_projector_node(
    p: *const WsProjector,
    index: usize,
    sheet: *mut u32,
    x: *mut f64,
    v: *mut f64,
    theta: *mut f64,
) -> WsStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("projector"))?;
        if sheet.is_null() || x.is_null() || v.is_null() || theta.is_null() {
            return Err(null("output pointer"));
        }
        let g = p.inner.grid();
        if index >= g.len() {
            return Err((WsStatus::InvalidParameter, format!("index {index} out of range 0..{}", g.len())));
        }
        let (n_v, n_x, n_t) = (g.spec.n_v, g.spec.n_x, g.spec.n_theta);
        let s = index / (n_v * n_x * n_t);
        let rest = index % (n_v * n_x * n_t);
        let (iv, ix, it) = (rest / (n_x * n_t), (rest / n_t) % n_x, rest % n_t);
        let id = SheetId::ALL[s];
        *sheet = id.label() as u32;
        *x = g.x[ix];
        *v = g.v[id.idx()][iv];
        *theta = g.theta[it];
        Ok(())
    })
}

/// Applies the projection to `len` samples from `input`, writing `len` samples to `output`.
///
/// `len` must equal [`ws_projector_field_len`]. The buffers may alias.
///
/// # Safety
/// `p` must be a live projector; `input` and `output` must point to `len` elements.
#[no_mangle]
pub unsafe extern "C" fn ws_projector_apply(
    p: *const WsProjector,
    input: *const WsComplex,
    output: *mut WsComplex,
    len: usize,
) -> WsStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("projector"))?;
        if input.is_null() {
            return Err(null("input"));
        }
        if output.is_null() {
            return Err(null("output"));
        }
        let grid: &Arc<FieldGrid> = p.inner.grid();
        if len != grid.len() {
            return Err((WsStatus::BufferTooSmall, format!("field has {} samples, buffer has {len}", grid.len())));
        }
        let data: Vec<Complex64> = std::slice::from_raw_parts(input, len).iter().map(|&c| c.into()).collect();
        let field = BoundaryField { grid: grid.clone(), data };
        let projected = p.inner.apply_p(&field).ffi()?;
        let out = std::slice::from_raw_parts_mut(output, len);
        for (o, c) in out.iter_mut().zip(projected.data) {
            *o = c.into();
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping_covers_io_family() {
        let e = Error::Io(std::io::Error::other("x"));
        assert_eq!(status_of(&e), WsStatus::Io);
        assert_eq!(status_of(&Error::EmptyGrid), WsStatus::EmptyGrid);
    }

    #[test]
    fn panics_become_status_codes() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, WsStatus::Panic);
        let n = unsafe { ws_last_error_message(std::ptr::null_mut(), 0) };
        assert!(n > 0);
    }
}
