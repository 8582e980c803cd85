//! C ABI over the `gedanken` simulator.
//!
//! Objects are opaque handles created by `gd_*_new`/builder functions and
//! released with the matching `gd_*_free`. Fallible calls return a
//! [`GdStatus`] and write results through out-pointers; on failure the
//! message is available from [`gd_last_error`] on the same thread.
//! Strings handed out by the library are freed with [`gd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gedanken::cli::{parse_config_str, report_json, Command};
use gedanken::doppler::{collide_exact, CollisionInput};
use gedanken::lattice::{make_grid, Grid1D, Rep};
use gedanken::measurement::{self, Density, PointerSpec};
use gedanken::protocols::run_scenario;
use gedanken::states::{self, Envelope, PreparationParams, StateTensor};
use gedanken::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Wrapped = 4,
    NullPostselection = 5,
    Numerical = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdRep {
    Position = 0,
    Momentum = 1,
}

impl From<GdRep> for Rep {
    fn from(r: GdRep) -> Rep {
        match r {
            GdRep::Position => Rep::Position,
            GdRep::Momentum => Rep::Momentum,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdEnvelopeKind {
    Unit = 0,
    Gaussian = 1,
}

/// Transverse profile; `center` and `width` are ignored for `Unit`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GdEnvelope {
    pub kind: GdEnvelopeKind,
    pub center: f64,
    pub width: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GdPreparation {
    pub d: f64,
    pub sigma: f64,
    pub k0: f64,
    pub envelopes: [GdEnvelope; 2],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GdCorrelation {
    pub ridge_slope: f64,
    pub ridge_offset: f64,
    pub pearson: f64,
    pub flatness_tv: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GdCollision {
    pub omega_out: f64,
    pub v_out: f64,
    pub shift_exact: f64,
    pub shift_expansion: f64,
    pub shift_doppler: f64,
}

/// Opaque 1-D lattice.
pub struct GdGrid(Grid1D);

/// Opaque multi-axis state.
pub struct GdState(StateTensor);

/// Opaque probability density.
pub struct GdDensity(Density);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> GdStatus {
    match err {
        Error::Wrapped(_) => GdStatus::Wrapped,
        Error::NullPostselection { .. } => GdStatus::NullPostselection,
        Error::Config(_) => GdStatus::Config,
        Error::Io { .. } => GdStatus::Io,
        e if e.is_numerical() => GdStatus::Numerical,
        _ => GdStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
    Small(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GdStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GdStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Small(needed))) => {
            set_error(format!("buffer too small, {needed} elements needed"));
            GdStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("panic inside gedanken".into());
            GdStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Core(Error::Config(format!("{what} is not UTF-8"))))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn gd_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn gd_grid_new(
    n_points: usize,
    length: f64,
    out: *mut *mut GdGrid,
) -> GdStatus {
    guard(|| {
        let grid = make_grid(n_points, length)?;
        put(out, boxed(GdGrid(grid)), "out")
    })
}

/// # Safety
/// `grid` must be NULL or a live handle from [`gd_grid_new`].
#[no_mangle]
pub unsafe extern "C" fn gd_grid_free(grid: *mut GdGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Writes the position and momentum lattice spacings.
///
/// # Safety
/// `grid` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gd_grid_spacings(
    grid: *const GdGrid,
    dx: *mut f64,
    dk: *mut f64,
) -> GdStatus {
    guard(|| {
        let g = &get(grid, "grid")?.0;
        put(dx, g.spacing(), "dx")?;
        put(dk, g.momentum_spacing(), "dk")
    })
}

/// Default preparation: d = 3, sigma = 0.15, K0 = 0, unit envelopes.
#[no_mangle]
pub extern "C" fn gd_preparation_default() -> GdPreparation {
    let unit = GdEnvelope {
        kind: GdEnvelopeKind::Unit,
        center: 0.0,
        width: 0.0,
    };
    let p = PreparationParams::default();
    GdPreparation {
        d: p.d,
        sigma: p.sigma,
        k0: p.k0,
        envelopes: [unit; 2],
    }
}

fn to_params(p: &GdPreparation) -> PreparationParams {
    let env = |e: &GdEnvelope| match e.kind {
        GdEnvelopeKind::Unit => Envelope::Unit,
        GdEnvelopeKind::Gaussian => Envelope::Gaussian {
            center: e.center,
            width: e.width,
        },
    };
    PreparationParams {
        d: p.d,
        sigma: p.sigma,
        k0: p.k0,
        envelopes: [env(&p.envelopes[0]), env(&p.envelopes[1])],
    }
}

/// Two-particle EPR state (axes `particle1`, `particle2`).
///
/// # Safety
/// `grid` and `prep` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gd_state_epr(
    grid: *const GdGrid,
    prep: *const GdPreparation,
    out: *mut *mut GdState,
) -> GdStatus {
    guard(|| {
        let st = states::build_epr_state(&get(grid, "grid")?.0, &to_params(get(prep, "prep")?))?;
        put(out, boxed(GdState(st)), "out")
    })
}

/// Particle-particle-diaphragm state (axes `particle1`, `particle2`, `diaphragm`).
///
/// # Safety
/// `grid` and `prep` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gd_state_bohr(
    grid: *const GdGrid,
    prep: *const GdPreparation,
    out: *mut *mut GdState,
) -> GdStatus {
    guard(|| {
        let st = states::build_bohr_state(&get(grid, "grid")?.0, &to_params(get(prep, "prep")?))?;
        put(out, boxed(GdState(st)), "out")
    })
}

/// # Safety
/// `state` must be NULL or a live state handle.
#[no_mangle]
pub unsafe extern "C" fn gd_state_free(state: *mut GdState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Number of axes, or 0 for NULL.
///
/// # Safety
/// `state` must be NULL or a live state handle.
#[no_mangle]
pub unsafe extern "C" fn gd_state_n_axes(state: *const GdState) -> usize {
    state.as_ref().map_or(0, |s| s.0.n_axes())
}

/// `sum |psi|^2 * cell`.
///
/// # Safety
/// `state` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gd_state_norm_sqr(state: *const GdState, out: *mut f64) -> GdStatus {
    guard(|| put(out, get(state, "state")?.0.norm_sqr(), "out"))
}

/// Conditions `axis` on a pointer outcome. `smearing` 0 is a sharp slice.
///
/// # Safety
/// `state` live, `axis` a NUL-terminated string, out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn gd_postselect(
    state: *const GdState,
    axis: *const c_char,
    basis: GdRep,
    value: f64,
    smearing: f64,
    out_state: *mut *mut GdState,
    out_probability: *mut f64,
) -> GdStatus {
    guard(|| {
        let pointer = PointerSpec {
            axis: text(axis, "axis")?.to_string(),
            basis: basis.into(),
            value,
            smearing,
        };
        let r = measurement::postselect(&get(state, "state")?.0, &pointer)?;
        if out_state.is_null() || out_probability.is_null() {
            return Err(Failure::Null("out"));
        }
        put(out_probability, r.probability, "out_probability")?;
        put(out_state, boxed(GdState(r.state)), "out_state")
    })
}

/// Joint density with axis `i` read in `reps[i]`; `n_reps` must equal the
/// number of axes.
///
/// # Safety
/// `reps` must point to `n_reps` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gd_joint_density(
    state: *const GdState,
    reps: *const GdRep,
    n_reps: usize,
    out: *mut *mut GdDensity,
) -> GdStatus {
    guard(|| {
        let st = &get(state, "state")?.0;
        if reps.is_null() {
            return Err(Failure::Null("reps"));
        }
        let reps: Vec<Rep> = std::slice::from_raw_parts(reps, n_reps)
            .iter()
            .map(|&r| r.into())
            .collect();
        let d = measurement::joint_density(st, &reps)?;
        put(out, boxed(GdDensity(d)), "out")
    })
}

/// # Safety
/// `density` must be NULL or a live density handle.
#[no_mangle]
pub unsafe extern "C" fn gd_density_free(density: *mut GdDensity) {
    if !density.is_null() {
        drop(Box::from_raw(density));
    }
}

/// Number of cells, or 0 for NULL.
///
/// # Safety
/// `density` must be NULL or a live density handle.
#[no_mangle]
pub unsafe extern "C" fn gd_density_len(density: *const GdDensity) -> usize {
    density.as_ref().map_or(0, |d| d.0.values().len())
}

/// Copies the values in row-major (lexicographic) order into `buf`.
///
/// # Safety
/// `buf` must have room for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn gd_density_values(
    density: *const GdDensity,
    buf: *mut f64,
    capacity: usize,
) -> GdStatus {
    guard(|| {
        let d = &get(density, "density")?.0;
        let n = d.values().len();
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        if capacity < n {
            return Err(Failure::Small(n));
        }
        let dst = std::slice::from_raw_parts_mut(buf, n);
        for (o, &v) in dst.iter_mut().zip(d.values().iter()) {
            *o = v;
        }
        Ok(())
    })
}

/// Total variation distance between two densities on the same support.
///
/// # Safety
/// Both handles live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gd_total_variation(
    a: *const GdDensity,
    b: *const GdDensity,
    out: *mut f64,
) -> GdStatus {
    guard(|| {
        let tv = measurement::total_variation(&get(a, "a")?.0, &get(b, "b")?.0)?;
        put(out, tv, "out")
    })
}

/// Ridge fit of a two-axis density.
///
/// # Safety
/// `density` live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gd_ridge_fit(
    density: *const GdDensity,
    out: *mut GdCorrelation,
) -> GdStatus {
    guard(|| {
        let r = measurement::ridge_fit(&get(density, "density")?.0)?;
        put(
            out,
            GdCorrelation {
                ridge_slope: r.ridge_slope,
                ridge_offset: r.ridge_offset,
                pearson: r.pearson,
                flatness_tv: r.flatness_tv,
            },
            "out",
        )
    })
}

/// Exact photon/mirror collision.
///
/// # Safety
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gd_doppler_collide(
    omega: f64,
    v: f64,
    mass: f64,
    out: *mut GdCollision,
) -> GdStatus {
    guard(|| {
        let r = collide_exact(&CollisionInput::new(omega, v, mass)?)?;
        put(
            out,
            GdCollision {
                omega_out: r.omega_out,
                v_out: r.v_out,
                shift_exact: r.shift_exact,
                shift_expansion: r.shift_expansion,
                shift_doppler: r.shift_doppler,
            },
            "out",
        )
    })
}

/// Runs a protocol scenario and returns its report as JSON.
///
/// `config_yaml` may be NULL for defaults. The string written to `out_json`
/// is freed with [`gd_string_free`].
///
/// # Safety
/// `scenario` (and `config_yaml` when non-NULL) must be NUL-terminated;
/// `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn gd_run_scenario(
    scenario: *const c_char,
    config_yaml: *const c_char,
    out_json: *mut *mut c_char,
) -> GdStatus {
    guard(|| {
        let command: Command = text(scenario, "scenario")?.parse()?;
        let Command::Protocol(sc) = command else {
            return Err(Failure::Core(Error::Config(
                "doppler is exposed through gd_doppler_collide".into(),
            )));
        };
        let yaml = if config_yaml.is_null() {
            ""
        } else {
            text(config_yaml, "config_yaml")?
        };
        let resolved = parse_config_str(yaml, "config_yaml")?.resolve(command)?;
        let report = run_scenario(sc, &resolved.protocol)?;
        let json = CString::new(report_json(&report)?).map_err(|e| Error::Config(e.to_string()))?;
        put(out_json, json.into_raw(), "out_json")
    })
}
