//! C interface to the mode-clustering library.
//!
//! Objects cross the boundary as opaque handles created by `mc_*_new` or
//! `mc_*_run` functions and released with the matching `mc_*_free`. Every
//! fallible function returns an [`McStatus`]; on failure a message is
//! stored per thread and can be read with [`mc_last_error_message`].
//! Output buffers are caller-allocated and sized from the `mc_*_size`
//! style accessors.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use modeclust::clustering::KMeansConfig;
use modeclust::jump::{JumpModel, Trajectory};
use modeclust::markov::{self, StochasticMatrix};
use modeclust::reduction::{self, MrBoundInputs, PDiffBoundInputs, PipelineOutput, ReducedModel};
use modeclust::{estimation, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    BufferTooSmall = 3,
    Numerical = 4,
    Parse = 5,
    Io = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> McStatus {
    match e {
        Error::InvalidArgument(_) => McStatus::InvalidArgument,
        Error::Parse { .. } | Error::Json(_) => McStatus::Parse,
        Error::Io(_) => McStatus::Io,
        e if e.is_numerical() => McStatus::Numerical,
        _ => McStatus::InvalidArgument,
    }
}

struct Fail(McStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(McStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> McStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => McStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            McStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out(values: &[f64], out: *mut f64, len: usize) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < values.len() {
        return Err(Fail(McStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", values.len())));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = v;
    Ok(())
}

unsafe fn handle<'a, T>(h: *const T) -> Result<&'a T, Fail> {
    h.as_ref().ok_or_else(|| null("handle"))
}

/// Copies the calling thread's last error message, nul-terminated, into
/// `buf` and returns the full message length excluding the terminator.
/// Pass a null `buf` to query the length. Returns 0 when there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn mc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Row-stochastic transition matrix.
pub struct McChain(StochasticMatrix);

/// Builds a chain from `n * n` row-major entries.
///
/// # Safety
/// `data` must point to `n * n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_chain_new(n: usize, data: *const f64, out: *mut *mut McChain) -> McStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        if n == 0 {
            return Err(Fail(McStatus::InvalidArgument, "chain needs at least one state".into()));
        }
        let entries = slice(data, n * n, "data")?;
        let p = StochasticMatrix::from_row_slice(n, entries)?;
        *out = Box::into_raw(Box::new(McChain(p)));
        Ok(())
    })
}

/// # Safety
/// `chain` must be null or a handle from [`mc_chain_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_chain_free(chain: *mut McChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Number of states, or 0 for a null handle.
///
/// # Safety
/// `chain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_chain_size(chain: *const McChain) -> usize {
    chain.as_ref().map_or(0, |c| c.0.n())
}

/// Stationary distribution by the power method with the default tolerance.
///
/// # Safety
/// `chain` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mc_chain_stationary(chain: *const McChain, out: *mut f64, len: usize) -> McStatus {
    guard(|| {
        let c = handle(chain)?;
        let pi = markov::stationary(&c.0)?;
        write_out(pi.as_slice(), out, len)
    })
}

/// Smallest `k <= max_k` with worst-row total variation to stationarity at
/// most `eps`.
///
/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mc_chain_mixing_time(
    chain: *const McChain,
    eps: f64,
    max_k: usize,
    out: *mut usize,
) -> McStatus {
    guard(|| {
        let c = handle(chain)?;
        let k = markov::mixing_time(&c.0, eps, max_k)?;
        put(out, k)
    })
}

/// Clustering result with the aggregated chain.
pub struct McReduced {
    reduced: ReducedModel,
    mistake_rate: f64,
}

impl McReduced {
    fn from_pipeline(out: PipelineOutput) -> Self {
        Self { mistake_rate: out.estimate.mistake_rate.unwrap_or(f64::NAN), reduced: out.reduced }
    }
}

fn kmeans_config(restarts: usize) -> KMeansConfig {
    KMeansConfig {
        restarts: if restarts == 0 { KMeansConfig::default().restarts } else { restarts },
        ..KMeansConfig::default()
    }
}

/// Clusters `n` modes into `r` groups from an observed mode sequence.
/// `restarts == 0` selects the default number of k-means restarts.
///
/// # Safety
/// `modes` must hold `len` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_cluster_modes(
    modes: *const usize,
    len: usize,
    n: usize,
    r: usize,
    restarts: usize,
    seed: u64,
    out: *mut *mut McReduced,
) -> McStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let modes = slice(modes, len, "modes")?;
        let (_, _, _, _, reduced) = reduction::cluster_modes(modes, n, r, &kmeans_config(restarts), seed)?;
        *out = Box::into_raw(Box::new(McReduced { reduced, mistake_rate: f64::NAN }));
        Ok(())
    })
}

/// Full pipeline from observations: `params` holds `n * (n_a + n_c)`
/// row-major model coefficients, `y` and `u` hold `len` samples each.
///
/// # Safety
/// All buffers must be readable for the stated sizes; `out` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn mc_pipeline_run(
    n: usize,
    n_a: usize,
    n_c: usize,
    params: *const f64,
    y: *const f64,
    u: *const f64,
    len: usize,
    r: usize,
    restarts: usize,
    seed: u64,
    out: *mut *mut McReduced,
) -> McStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let d = n_a + n_c;
        if n == 0 || d == 0 {
            return Err(Fail(McStatus::InvalidArgument, "model needs modes and lags".into()));
        }
        let params = slice(params, n * d, "params")?;
        let model = JumpModel::new(n_a, n_c, params.chunks(d).map(<[f64]>::to_vec).collect())?;
        let traj = Trajectory::new(slice(y, len, "y")?.to_vec(), slice(u, len, "u")?.to_vec(), None)?;
        let res = reduction::run_pipeline(&model, &traj, r, &kmeans_config(restarts), seed)?;
        *out = Box::into_raw(Box::new(McReduced::from_pipeline(res)));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_reduced_free(h: *mut McReduced) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of modes, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_reduced_n(h: *const McReduced) -> usize {
    h.as_ref().map_or(0, |m| m.reduced.n())
}

/// Number of clusters, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_reduced_r(h: *const McReduced) -> usize {
    h.as_ref().map_or(0, |m| m.reduced.r())
}

/// Mistake rate of the mode estimate; NaN when the truth was unavailable.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_reduced_mistake_rate(h: *const McReduced) -> f64 {
    h.as_ref().map_or(f64::NAN, |m| m.mistake_rate)
}

/// Writes the 0-based cluster label of each mode into `out[0..n]`.
///
/// # Safety
/// `h` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mc_reduced_labels(h: *const McReduced, out: *mut usize, len: usize) -> McStatus {
    guard(|| {
        let m = handle(h)?;
        let labels = m.reduced.partition.assignment();
        if out.is_null() {
            return Err(null("output buffer"));
        }
        if len < labels.len() {
            return Err(Fail(McStatus::BufferTooSmall, format!("buffer holds {len} labels, {} needed", labels.len())));
        }
        ptr::copy_nonoverlapping(labels.as_ptr(), out, labels.len());
        Ok(())
    })
}

/// Writes the expanded `n x n` reduced transition matrix, row-major.
///
/// # Safety
/// `h` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mc_reduced_matrix(h: *const McReduced, out: *mut f64, len: usize) -> McStatus {
    guard(|| {
        let m = handle(h)?;
        let n = m.reduced.n();
        let flat: Vec<f64> = (0..n).flat_map(|i| m.reduced.dense.row(i)).collect();
        write_out(&flat, out, len)
    })
}

/// Stationary distribution of the reduced chain via the factored product.
///
/// # Safety
/// `h` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mc_reduced_stationary(h: *const McReduced, out: *mut f64, len: usize) -> McStatus {
    guard(|| {
        let m = handle(h)?;
        let pi = reduction::reduced_stationary(&m.reduced, markov::DEFAULT_STATIONARY_TOL)?;
        write_out(pi.as_slice(), out, len)
    })
}

/// Empirical transition matrix of a mode sequence, `n * n` row-major.
///
/// # Safety
/// `modes` must hold `len` values and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mc_empirical_matrix(
    modes: *const usize,
    len: usize,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> McStatus {
    guard(|| {
        let counts = estimation::count_transitions(slice(modes, len, "modes")?, n)?;
        let p = estimation::empirical_matrix(&counts);
        let flat: Vec<f64> = (0..n).flat_map(|i| p.row(i)).collect();
        write_out(&flat, out, out_len)
    })
}

/// Value and applicability of an error bound.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct McBound {
    /// Bound value; NaN when not applicable.
    pub value: f64,
    /// Measured quantity the bound controls, NaN when not computed.
    pub actual: f64,
    pub applicable: bool,
    /// The value exceeds the trivial cap of the bounded quantity.
    pub vacuous: bool,
}

fn bound_of(r: &reduction::BoundReport) -> McBound {
    McBound {
        value: r.value.unwrap_or(f64::NAN),
        actual: r.outputs.get("actual").copied().unwrap_or(f64::NAN),
        applicable: r.applicable,
        vacuous: r.vacuous,
    }
}

/// Stationary-distribution difference bound between `p` and `p_tilde`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mc_bound_stationary_diff(
    p: *const McChain,
    p_tilde: *const McChain,
    out: *mut McBound,
) -> McStatus {
    guard(|| {
        let rep = reduction::bound_stationary_diff(&handle(p)?.0, &handle(p_tilde)?.0)?;
        put(out, bound_of(&rep))
    })
}

/// Scalars of the misclustering-rate bound.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct McMrInputs {
    pub sigma_r_bar: f64,
    pub sigma_1_bar: f64,
    pub delta_norm: f64,
    pub pi_min: f64,
    pub pi_max: f64,
    pub tau_star: f64,
    pub eta: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub largest_cluster: f64,
    pub smallest_cluster: f64,
    pub n: f64,
    pub r: f64,
    pub samples: f64,
}

/// # Safety
/// `inputs` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mc_bound_mr(inputs: *const McMrInputs, out: *mut McBound) -> McStatus {
    guard(|| {
        let x = *handle(inputs)?;
        let rep = reduction::bound_mr(&MrBoundInputs {
            sigma_r_bar: x.sigma_r_bar,
            sigma_1_bar: x.sigma_1_bar,
            delta_norm: x.delta_norm,
            pi_min: x.pi_min,
            pi_max: x.pi_max,
            tau_star: x.tau_star,
            eta: x.eta,
            eps1: x.eps1,
            eps2: x.eps2,
            largest_cluster: x.largest_cluster,
            smallest_cluster: x.smallest_cluster,
            n: x.n,
            r: x.r,
            samples: x.samples,
        })?;
        put(out, bound_of(&rep))
    })
}

/// Scalars of the transition-matrix error bound.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct McPDiffInputs {
    pub n: f64,
    pub pi_min: f64,
    pub sigma_1: f64,
    pub eps2: f64,
    pub eta: f64,
    pub delta_inf: f64,
    pub mr_zero: bool,
}

/// # Safety
/// `inputs` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mc_bound_p_diff(inputs: *const McPDiffInputs, out: *mut McBound) -> McStatus {
    guard(|| {
        let x = *handle(inputs)?;
        let rep = reduction::bound_p_diff(&PDiffBoundInputs {
            n: x.n,
            pi_min: x.pi_min,
            sigma_1: x.sigma_1,
            eps2: x.eps2,
            eta: x.eta,
            delta_inf: x.delta_inf,
            mr_zero: x.mr_zero,
        })?;
        put(out, bound_of(&rep))
    })
}
