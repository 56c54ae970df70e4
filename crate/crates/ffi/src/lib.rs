//! C interface to `graph_nls`.
//!
//! Every function returns a status code (`GNLS_OK` on success) and writes
//! results through out-pointers. On failure a message is available from
//! [`gnls_last_error_message`] on the same thread. Handles are opaque and
//! must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use graph_nls::minmax::{level_bound, mass_threshold_k, Placement, SlotLayout};
use graph_nls::solver::{multi_solve, BoundState, SolveStatus, SolverConfig};
use graph_nls::soliton::{mass_threshold, SolitonParams};
use graph_nls::{build_mesh, parse_graph, Error, Mesh, MetricGraph};

pub const GNLS_OK: i32 = 0;
pub const GNLS_NULL_POINTER: i32 = 1;
pub const GNLS_INVALID_UTF8: i32 = 2;
pub const GNLS_PARSE_ERROR: i32 = 3;
pub const GNLS_INVALID_ARGUMENT: i32 = 4;
pub const GNLS_BELOW_THRESHOLD: i32 = 5;
pub const GNLS_NUMERICAL_ERROR: i32 = 6;
pub const GNLS_UNCONVERGED: i32 = 7;
pub const GNLS_PANIC: i32 = 99;

pub const GNLS_PLACEMENT_LONGEST_EDGE: i32 = 0;
pub const GNLS_PLACEMENT_MULTI_EDGE: i32 = 1;

pub const GNLS_STATUS_CONVERGED: i32 = 0;
pub const GNLS_STATUS_UNCONVERGED: i32 = 1;
pub const GNLS_STATUS_STALLED: i32 = 2;
pub const GNLS_STATUS_VANISHING: i32 = 3;

/// A parsed metric graph.
pub struct GnlsGraph {
    graph: Arc<MetricGraph>,
}

/// A finite-element mesh over a graph.
pub struct GnlsMesh {
    mesh: Arc<Mesh>,
}

/// Distinct bound states returned by [`gnls_solve`], by increasing energy.
pub struct GnlsBoundStates {
    states: Vec<BoundState>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GnlsSolitonInfo {
    pub p: f64,
    pub mu: f64,
    pub lambda: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub energy: f64,
    /// Zero of the Lagrangian density.
    pub sign_point: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GnlsSolveOptions {
    pub mu: f64,
    pub p: f64,
    pub k: u32,
    pub tolerance: f64,
    pub max_iterations: u32,
    pub theta_samples: u32,
    pub seed: u64,
    pub placement: i32,
    /// Solve even when `mu` is below the threshold for `k`.
    pub force: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GnlsStateSummary {
    pub energy: f64,
    pub lambda: f64,
    pub mass: f64,
    pub mass_error: f64,
    pub j_residual: f64,
    pub max_kirchhoff: f64,
    pub sup_norm: f64,
    pub status: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Graph(_) | Error::Json(_) => GNLS_PARSE_ERROR,
        Error::BelowThreshold { .. } => GNLS_BELOW_THRESHOLD,
        Error::Singular { .. } | Error::Degenerate(_) | Error::Stall(_) => GNLS_NUMERICAL_ERROR,
        _ => GNLS_INVALID_ARGUMENT,
    }
}

fn fail(e: Error) -> i32 {
    set_error(e.to_string());
    code_of(&e)
}

fn null_pointer(name: &str) -> i32 {
    set_error(format!("{name} is null"));
    GNLS_NULL_POINTER
}

/// Runs `f`, turning panics into `GNLS_PANIC`.
fn guard(f: impl FnOnce() -> i32) -> i32 {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            GNLS_PANIC
        }
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) {
    // SAFETY: callers check `out` for null; the caller owns the storage.
    unsafe { out.write(value) }
}

fn placement_of(code: i32) -> Result<Placement, i32> {
    match code {
        GNLS_PLACEMENT_LONGEST_EDGE => Ok(Placement::LongestEdge),
        GNLS_PLACEMENT_MULTI_EDGE => Ok(Placement::MultiEdge),
        _ => {
            set_error(format!("unknown placement {code}"));
            Err(GNLS_INVALID_ARGUMENT)
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gnls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failure on this thread, or null. The
/// pointer stays valid until the next `gnls_*` call on the same thread.
#[no_mangle]
pub extern "C" fn gnls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Parses a graph description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gnls_graph_from_json(json: *const c_char, out: *mut *mut GnlsGraph) -> i32 {
    guard(|| {
        if json.is_null() {
            return null_pointer("json");
        }
        if out.is_null() {
            return null_pointer("out");
        }
        // SAFETY: non-null and NUL-terminated per the contract.
        let text = match unsafe { CStr::from_ptr(json) }.to_str() {
            Ok(t) => t,
            Err(e) => {
                set_error(format!("graph text is not UTF-8: {e}"));
                return GNLS_INVALID_UTF8;
            }
        };
        match parse_graph(text) {
            Ok(g) => {
                let handle = Box::into_raw(Box::new(GnlsGraph { graph: Arc::new(g) }));
                unsafe { write_out(out, handle) };
                GNLS_OK
            }
            Err(e) => fail(e.into()),
        }
    })
}

/// # Safety
/// `graph` must be null or a handle from [`gnls_graph_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gnls_graph_free(graph: *mut GnlsGraph) {
    if !graph.is_null() {
        // SAFETY: allocated by `Box::into_raw` in this crate.
        drop(unsafe { Box::from_raw(graph) });
    }
}

/// # Safety
/// `graph` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_graph_edge_count(graph: *const GnlsGraph, out: *mut usize) -> i32 {
    guard(|| {
        let (Some(g), false) = (unsafe { graph.as_ref() }, out.is_null()) else {
            return null_pointer("graph or out");
        };
        unsafe { write_out(out, g.graph.edges().len()) };
        GNLS_OK
    })
}

/// Index and length of the longest bounded edge.
///
/// # Safety
/// `graph` must be a live handle; `index` and `length` writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_graph_longest_core_edge(graph: *const GnlsGraph, index: *mut usize, length: *mut f64) -> i32 {
    guard(|| {
        let Some(g) = (unsafe { graph.as_ref() }) else {
            return null_pointer("graph");
        };
        if index.is_null() || length.is_null() {
            return null_pointer("index or length");
        }
        let (i, l) = graph_nls::graph::longest_core_edge(&g.graph);
        unsafe {
            write_out(index, i);
            write_out(length, l);
        }
        GNLS_OK
    })
}

/// Closed-form constants of the line soliton of mass `mu`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_soliton_info(p: f64, mu: f64, out: *mut GnlsSolitonInfo) -> i32 {
    guard(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        match SolitonParams::new(p, mu) {
            Ok(s) => {
                let info = GnlsSolitonInfo {
                    p,
                    mu,
                    lambda: s.lambda,
                    amplitude: s.amplitude,
                    rate: s.rate,
                    energy: s.energy(),
                    sign_point: s.sign_point(),
                };
                unsafe { write_out(out, info) };
                GNLS_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Smallest mass for which the cut-off soliton on an edge of length `ell`
/// has certified negative energy.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_mass_threshold(p: f64, ell: f64, out: *mut f64) -> i32 {
    guard(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        match mass_threshold(p, ell) {
            Ok(m) => {
                unsafe { write_out(out, m) };
                GNLS_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Mass threshold for the `k`-slot seed family on `graph`.
///
/// # Safety
/// `graph` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_mass_threshold_k(graph: *const GnlsGraph, k: u32, p: f64, placement: i32, out: *mut f64) -> i32 {
    guard(|| {
        let Some(g) = (unsafe { graph.as_ref() }) else {
            return null_pointer("graph");
        };
        if out.is_null() {
            return null_pointer("out");
        }
        let placement = match placement_of(placement) {
            Ok(p) => p,
            Err(code) => return code,
        };
        let result = if placement == Placement::LongestEdge {
            mass_threshold_k(&g.graph, k as usize, p).map(|(m, _)| m)
        } else {
            SlotLayout::new(&g.graph, k as usize, placement).and_then(|l| l.mass_threshold(p))
        };
        match result {
            Ok(m) => {
                unsafe { write_out(out, m) };
                GNLS_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Upper bound for the `j`-th min-max level built from `k` slots.
///
/// # Safety
/// `graph` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_level_bound(graph: *const GnlsGraph, k: u32, j: u32, mu: f64, p: f64, out: *mut f64) -> i32 {
    guard(|| {
        let Some(g) = (unsafe { graph.as_ref() }) else {
            return null_pointer("graph");
        };
        if out.is_null() {
            return null_pointer("out");
        }
        match level_bound(&g.graph, k as usize, j as usize, mu, p) {
            Ok(r) => {
                unsafe { write_out(out, r.bound_cj) };
                GNLS_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Meshes `graph` with cells of size at most `h`, truncating half-lines
/// at `truncation`.
///
/// # Safety
/// `graph` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_mesh_new(graph: *const GnlsGraph, h: f64, truncation: f64, out: *mut *mut GnlsMesh) -> i32 {
    guard(|| {
        let Some(g) = (unsafe { graph.as_ref() }) else {
            return null_pointer("graph");
        };
        if out.is_null() {
            return null_pointer("out");
        }
        match build_mesh(g.graph.clone(), h, truncation) {
            Ok(mesh) => {
                unsafe { write_out(out, Box::into_raw(Box::new(GnlsMesh { mesh }))) };
                GNLS_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `mesh` must be null or a handle from [`gnls_mesh_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gnls_mesh_free(mesh: *mut GnlsMesh) {
    if !mesh.is_null() {
        // SAFETY: allocated by `Box::into_raw` in this crate.
        drop(unsafe { Box::from_raw(mesh) });
    }
}

/// # Safety
/// `mesh` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_mesh_dof_count(mesh: *const GnlsMesh, out: *mut usize) -> i32 {
    guard(|| {
        let (Some(m), false) = (unsafe { mesh.as_ref() }, out.is_null()) else {
            return null_pointer("mesh or out");
        };
        unsafe { write_out(out, m.mesh.n_dofs()) };
        GNLS_OK
    })
}

/// Defaults matching the command-line solver.
#[no_mangle]
pub extern "C" fn gnls_solve_options_default(mu: f64, p: f64, k: u32) -> GnlsSolveOptions {
    let cfg = SolverConfig::new(mu, p);
    GnlsSolveOptions {
        mu,
        p,
        k,
        tolerance: cfg.tolerance,
        max_iterations: cfg.max_iterations as u32,
        theta_samples: cfg.theta_samples as u32,
        seed: cfg.seed,
        placement: GNLS_PLACEMENT_LONGEST_EDGE,
        force: false,
    }
}

/// Runs the multistart search for levels `1..=k`. Returns
/// `GNLS_UNCONVERGED` (with `*out` still set) when fewer than `k` distinct
/// states were found.
///
/// # Safety
/// `mesh` must be a live handle, `options` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_solve(mesh: *const GnlsMesh, options: *const GnlsSolveOptions, out: *mut *mut GnlsBoundStates) -> i32 {
    guard(|| {
        let (Some(m), Some(o)) = (unsafe { mesh.as_ref() }, unsafe { options.as_ref() }) else {
            return null_pointer("mesh or options");
        };
        if out.is_null() {
            return null_pointer("out");
        }
        let placement = match placement_of(o.placement) {
            Ok(p) => p,
            Err(code) => return code,
        };
        let g = m.mesh.graph().clone();
        let k = o.k as usize;
        if !o.force {
            let threshold = SlotLayout::new(&g, k, placement).and_then(|l| l.mass_threshold(o.p));
            match threshold {
                Ok(t) if o.mu < t => {
                    return fail(Error::BelowThreshold { mu: o.mu, threshold: t, reason: "pass force to solve anyway".into() })
                }
                Ok(_) => {}
                Err(e) => return fail(e),
            }
        }
        let mut cfg = SolverConfig::new(o.mu, o.p);
        cfg.tolerance = o.tolerance;
        cfg.max_iterations = o.max_iterations as usize;
        cfg.theta_samples = o.theta_samples as usize;
        cfg.seed = o.seed;
        cfg.placement = placement;
        match multi_solve(&g, &m.mesh, &cfg, k) {
            Ok(report) => {
                let found = report.states.len();
                unsafe { write_out(out, Box::into_raw(Box::new(GnlsBoundStates { states: report.states }))) };
                if found < k {
                    set_error(format!("found {found} distinct states, fewer than {k}"));
                    GNLS_UNCONVERGED
                } else {
                    GNLS_OK
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `states` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_states_count(states: *const GnlsBoundStates, out: *mut usize) -> i32 {
    guard(|| {
        let (Some(s), false) = (unsafe { states.as_ref() }, out.is_null()) else {
            return null_pointer("states or out");
        };
        unsafe { write_out(out, s.states.len()) };
        GNLS_OK
    })
}

fn status_code(s: SolveStatus) -> i32 {
    match s {
        SolveStatus::Converged => GNLS_STATUS_CONVERGED,
        SolveStatus::Unconverged => GNLS_STATUS_UNCONVERGED,
        SolveStatus::Stalled => GNLS_STATUS_STALLED,
        SolveStatus::Vanishing => GNLS_STATUS_VANISHING,
    }
}

/// # Safety
/// `states` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_state_summary(states: *const GnlsBoundStates, index: usize, out: *mut GnlsStateSummary) -> i32 {
    guard(|| {
        let (Some(s), false) = (unsafe { states.as_ref() }, out.is_null()) else {
            return null_pointer("states or out");
        };
        let Some(st) = s.states.get(index) else {
            set_error(format!("state index {index} out of range"));
            return GNLS_INVALID_ARGUMENT;
        };
        let summary = GnlsStateSummary {
            energy: st.energy.total,
            lambda: st.lambda,
            mass: st.energy.mass,
            mass_error: st.mass_error,
            j_residual: st.j_residual,
            max_kirchhoff: st.max_kirchhoff(),
            sup_norm: st.u.sup_norm(),
            status: status_code(st.status),
        };
        unsafe { write_out(out, summary) };
        GNLS_OK
    })
}

/// Copies the nodal values of state `index` into `buffer`. `*written`
/// receives the number of values; pass a null buffer to query it.
///
/// # Safety
/// `states` must be a live handle; `buffer` null or writable for
/// `capacity` doubles; `written` writable.
#[no_mangle]
pub unsafe extern "C" fn gnls_state_values(
    states: *const GnlsBoundStates,
    index: usize,
    buffer: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> i32 {
    guard(|| {
        let (Some(s), false) = (unsafe { states.as_ref() }, written.is_null()) else {
            return null_pointer("states or written");
        };
        let Some(st) = s.states.get(index) else {
            set_error(format!("state index {index} out of range"));
            return GNLS_INVALID_ARGUMENT;
        };
        let values = st.u.values();
        unsafe { write_out(written, values.len()) };
        if buffer.is_null() {
            return GNLS_OK;
        }
        if capacity < values.len() {
            set_error(format!("buffer holds {capacity} values, {} needed", values.len()));
            return GNLS_INVALID_ARGUMENT;
        }
        // SAFETY: `buffer` is writable for `capacity ≥ values.len()` doubles.
        unsafe { std::ptr::copy_nonoverlapping(values.as_ptr(), buffer, values.len()) };
        GNLS_OK
    })
}

/// # Safety
/// `states` must be null or a handle from [`gnls_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gnls_states_free(states: *mut GnlsBoundStates) {
    if !states.is_null() {
        // SAFETY: allocated by `Box::into_raw` in this crate.
        drop(unsafe { Box::from_raw(states) });
    }
}
