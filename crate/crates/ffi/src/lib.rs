//! C ABI for `seqdepth`.
//!
//! Every function returns an [`SdStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and read with
//! [`sd_last_error_message`]. Objects are opaque handles released with their
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use seqdepth::allocation::{self, AllocationParams};
use seqdepth::dimension::pca_intrinsic_dim;
use seqdepth::experiment::{run_trial, Prepared, SweepConfig};
use seqdepth::ingest::{load_input, PopulationSpec};
use seqdepth::sequencing::{ScenarioKind, UnseenPolicy};
use seqdepth::simplex::population_stats;
use seqdepth::wasserstein::wasserstein_p;
use seqdepth::{DiscreteDistribution, Error, ExpressionProfile};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    SizeLimit = 4,
    Io = 5,
    Parse = 6,
    Solver = 7,
    Panic = 8,
}

/// Cell-weight scenario.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdScenario {
    Uniform = 0,
    Coupled = 1,
    Independent = 2,
}

/// Treatment of cells that receive no reads.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdUnseen {
    /// Measured profile is the uniform vector.
    Uniform = 0,
    /// Cell is left out of the noisy measure.
    Drop = 1,
}

/// Opaque discrete distribution on the simplex.
pub struct SdDistribution(DiscreteDistribution);

/// Opaque population: a distribution plus its cell-weight scenario.
pub struct SdPopulation(PopulationSpec);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SdStats {
    pub mean_l0: f64,
    pub mean_sq_l2: f64,
    pub ambient_dim: usize,
    pub atom_count: usize,
}

/// Distances from one simulated trial.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SdTrial {
    pub w_noisy_vs_mu: f64,
    pub w_noisy_vs_mun: f64,
    pub w_mun_vs_mu: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SdAllocationParams {
    pub p: f64,
    pub alpha: f64,
    pub c_star: f64,
    pub c_alloc: f64,
    pub k: f64,
    pub mean_l0: f64,
    pub mean_sq_l2: f64,
}

impl From<AllocationParams> for SdAllocationParams {
    fn from(a: AllocationParams) -> Self {
        Self {
            p: a.p,
            alpha: a.alpha,
            c_star: a.c_star,
            c_alloc: a.c_alloc,
            k: a.k,
            mean_l0: a.mean_l0,
            mean_sq_l2: a.mean_sq_l2,
        }
    }
}

impl From<SdAllocationParams> for AllocationParams {
    fn from(a: SdAllocationParams) -> Self {
        Self {
            p: a.p,
            alpha: a.alpha,
            c_star: a.c_star,
            c_alloc: a.c_alloc,
            k: a.k,
            mean_l0: a.mean_l0,
            mean_sq_l2: a.mean_sq_l2,
        }
    }
}

/// Optimal allocation and error bounds for one read budget.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SdAllocation {
    pub n_opt: f64,
    pub n_cells: u64,
    pub exponent: f64,
    pub upper_bound: f64,
    pub lower_bound: f64,
    /// Nonzero when the read-budget condition of the lower bound holds.
    pub lower_bound_valid: i32,
    pub m0: f64,
    pub below_m0: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SdStatus {
    match e {
        Error::DimensionMismatch { .. } => SdStatus::DimensionMismatch,
        Error::SizeLimit { .. } | Error::TooLarge { .. } => SdStatus::SizeLimit,
        Error::Io(_) => SdStatus::Io,
        Error::Parse { .. } | Error::Json(_) => SdStatus::Parse,
        Error::Solver(_) | Error::ConvexityViolation { .. } => SdStatus::Solver,
        _ => SdStatus::InvalidArgument,
    }
}

struct Fail(SdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SdStatus::NullPointer, format!("`{what}` is null"))
}

fn bad(msg: impl Into<String>) -> Fail {
    Fail(SdStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a distribution from `n_atoms` dense rows of length `dim`
/// (row-major). Each row is renormalized onto the simplex. `weights` may be
/// null for uniform weights; otherwise it holds `n_atoms` probabilities.
///
/// # Safety
/// `values` must point to `n_atoms * dim` doubles, `weights` to `n_atoms`
/// doubles or be null, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_distribution_from_dense(
    values: *const f64,
    n_atoms: usize,
    dim: usize,
    weights: *const f64,
    out: *mut *mut SdDistribution,
) -> SdStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if n_atoms == 0 || dim == 0 {
            return Err(bad("n_atoms and dim must be positive"));
        }
        let len = n_atoms.checked_mul(dim).ok_or_else(|| bad("n_atoms * dim overflows"))?;
        let data = std::slice::from_raw_parts(values, len);
        let atoms = data.chunks(dim).map(ExpressionProfile::from_dense).collect::<Result<Vec<_>, _>>()?;
        let mu = if weights.is_null() {
            DiscreteDistribution::uniform(atoms)?
        } else {
            DiscreteDistribution::new(atoms, std::slice::from_raw_parts(weights, n_atoms).to_vec())?
        };
        write_out(out, Box::into_raw(Box::new(SdDistribution(mu))), "out")
    })
}

/// # Safety
/// `dist` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn sd_distribution_free(dist: *mut SdDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_distribution_stats(dist: *const SdDistribution, out: *mut SdStats) -> SdStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        write_out(out, stats(&d.0), "out")
    })
}

fn stats(mu: &DiscreteDistribution) -> SdStats {
    let s = population_stats(mu);
    SdStats {
        mean_l0: s.mean_l0,
        mean_sq_l2: s.mean_sq_l2,
        ambient_dim: s.ambient_dim,
        atom_count: s.atom_count,
    }
}

/// Exact `W_p` between two distributions under the `l_q` ground metric
/// (`q` may be `INFINITY`).
///
/// # Safety
/// `a` and `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_wasserstein(
    a: *const SdDistribution,
    b: *const SdDistribution,
    p: f64,
    q: f64,
    out: *mut f64,
) -> SdStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        write_out(out, wasserstein_p(&a.0, &b.0, p, q)?, "out")
    })
}

/// PCA intrinsic dimension: components needed to capture `threshold` of the
/// variance.
///
/// # Safety
/// `dist` must be a live handle and `out_k` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_pca_dim(dist: *const SdDistribution, threshold: f64, out_k: *mut usize) -> SdStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        let (k, _) = pca_intrinsic_dim(&d.0, threshold)?;
        write_out(out_k, k, "out_k")
    })
}

/// Loads a population directory, or a CSV / MatrixMarket counts file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_population_load(path: *const c_char, out: *mut *mut SdPopulation) -> SdStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| bad("path is not valid UTF-8"))?;
        let spec = load_input(Path::new(path))?;
        write_out(out, Box::into_raw(Box::new(SdPopulation(spec))), "out")
    })
}

/// Wraps a copy of `dist` as a population with uniform frequencies.
///
/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_population_from_distribution(dist: *const SdDistribution, out: *mut *mut SdPopulation) -> SdStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        let spec = PopulationSpec::from_distribution(d.0.clone());
        write_out(out, Box::into_raw(Box::new(SdPopulation(spec))), "out")
    })
}

/// # Safety
/// `pop` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn sd_population_free(pop: *mut SdPopulation) {
    if !pop.is_null() {
        drop(Box::from_raw(pop));
    }
}

/// # Safety
/// `pop` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_population_stats(pop: *const SdPopulation, out: *mut SdStats) -> SdStatus {
    guard(|| {
        let p = deref(pop, "pop")?;
        write_out(out, stats(&p.0.mu), "out")
    })
}

/// Runs one shallow-sequencing trial with `n` cells and `m` reads. The same
/// seed gives the same result as trial 0 of a sweep with that master seed.
///
/// # Safety
/// `pop` must be a live handle and `out` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sd_simulate(
    pop: *const SdPopulation,
    n: usize,
    m: u64,
    scenario: SdScenario,
    unseen: SdUnseen,
    p: f64,
    q: f64,
    seed: u64,
    out: *mut SdTrial,
) -> SdStatus {
    guard(|| {
        let pop = deref(pop, "pop")?;
        if n == 0 {
            return Err(bad("n must be at least 1"));
        }
        let kind = match scenario {
            SdScenario::Uniform => ScenarioKind::Uniform,
            SdScenario::Coupled => ScenarioKind::Coupled,
            SdScenario::Independent => ScenarioKind::Independent,
        };
        let config = SweepConfig {
            m_grid: vec![m],
            n_grid: vec![n],
            trials: 1,
            p,
            q,
            scenario: kind,
            unseen_policy: match unseen {
                SdUnseen::Uniform => UnseenPolicy::Uniform,
                SdUnseen::Drop => UnseenPolicy::Drop,
            },
            master_seed: seed,
            theory: None,
        };
        config.validate()?;
        let prep = Prepared::new(&pop.0, kind)?;
        let r = run_trial(&prep, m, n, 0, &config)?.record;
        write_out(
            out,
            SdTrial {
                w_noisy_vs_mu: r.w_noisy_vs_mu,
                w_noisy_vs_mun: r.w_noisy_vs_mun,
                w_mun_vs_mu: r.w_mun_vs_mu,
            },
            "out",
        )
    })
}

/// Default allocation parameters.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_allocation_params_default(out: *mut SdAllocationParams) -> SdStatus {
    guard(|| write_out(out, AllocationParams::default().into(), "out"))
}

/// Number of cells `(C m / E|P|_0)^(1 - 2/(k+2))` for a read budget `m`.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_optimal_cells(m: f64, params: *const SdAllocationParams, out: *mut f64) -> SdStatus {
    guard(|| {
        let params: AllocationParams = (*deref(params, "params")?).into();
        params.validate()?;
        if !(m > 0.0 && m.is_finite()) {
            return Err(bad("m must be a positive number"));
        }
        write_out(out, allocation::optimal_cells(m, &params), "out")
    })
}

/// Optimal allocation together with the upper and lower error bounds.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_allocate(m: f64, params: *const SdAllocationParams, out: *mut SdAllocation) -> SdStatus {
    guard(|| {
        let params: AllocationParams = (*deref(params, "params")?).into();
        params.validate()?;
        if !(m > 0.0 && m.is_finite()) {
            return Err(bad("m must be a positive number"));
        }
        let r = allocation::report(m, None, &params);
        write_out(
            out,
            SdAllocation {
                n_opt: r.n_opt,
                n_cells: r.n_cells,
                exponent: r.exponent,
                upper_bound: r.upper_bound,
                lower_bound: r.lower_bound,
                lower_bound_valid: r.lower_bound_valid as i32,
                m0: r.m0,
                below_m0: r.below_m0 as i32,
            },
            "out",
        )
    })
}
