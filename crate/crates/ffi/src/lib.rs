//! C ABI over the `qumode` library.
//!
//! Spectra and mixtures cross the boundary as opaque handles created by
//! `*_new`-style constructors and released with the matching `*_free`.
//! Every fallible call returns a [`QumodeStatus`]; on failure the message
//! is kept per thread and read back with [`qumode_last_error`]. Panics are
//! caught at the boundary and reported as `QUMODE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use qumode::dqc1::{estimate_trace, required_samples};
use qumode::estimation::{success_probability, ExperimentConfig};
use qumode::factoring::{continued_fraction_recover, factor};
use qumode::qumode::{momentum_distribution, sample_momentum, GaussianMixture, QumodeWavefunction};
use qumode::spectrum::{exact_normalized_trace, ModularProblem, PhaseSpectrum};
use qumode::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QumodeStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    SharedFactor = 3,
    Rejected = 4,
    BudgetExhausted = 5,
    Numeric = 6,
    Io = 7,
    Panic = 8,
}

/// Eigenphase spectrum handle.
pub struct QumodeSpectrum(PhaseSpectrum);

/// Momentum distribution handle.
pub struct QumodeMixture(GaussianMixture);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QumodeStatus {
    match e {
        Error::InvalidArgument(_) | Error::Incomplete { .. } | Error::Json(_) => QumodeStatus::InvalidArgument,
        Error::SharedFactor { .. } => QumodeStatus::SharedFactor,
        Error::Rejected { .. } => QumodeStatus::Rejected,
        Error::BudgetExhausted { .. } => QumodeStatus::BudgetExhausted,
        Error::GridTooCoarse { .. } | Error::GridTooNarrow { .. } | Error::PosteriorUnderflow(_) => {
            QumodeStatus::Numeric
        }
        Error::Io(_) => QumodeStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QumodeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QumodeStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("{name} is null"));
            QumodeStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            QumodeStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qumode_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Forgets the last error message on this thread.
#[no_mangle]
pub extern "C" fn qumode_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qumode_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Spectrum of `l -> lq mod N`.
///
/// # Safety
/// `out_spec` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_spectrum_modular(
    modulus: u64,
    base: u64,
    out_spec: *mut *mut QumodeSpectrum,
) -> QumodeStatus {
    guard(|| {
        let slot = out(out_spec, "out_spec")?;
        let spec = ModularProblem::new(modulus, base)?.spectrum();
        *slot = Box::into_raw(Box::new(QumodeSpectrum(spec)));
        Ok(())
    })
}

/// Spectrum parsed from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_spec` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_spectrum_from_json(
    json: *const c_char,
    out_spec: *mut *mut QumodeSpectrum,
) -> QumodeStatus {
    guard(|| {
        let slot = out(out_spec, "out_spec")?;
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        *slot = Box::into_raw(Box::new(QumodeSpectrum(PhaseSpectrum::from_json(text)?)));
        Ok(())
    })
}

/// Spectrum from `count` phases with multiplicities on an `n_qubits` register.
///
/// # Safety
/// `phases` and `multiplicities` must hold `count` elements; `out_spec`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_spectrum_from_phases(
    n_qubits: u32,
    phases: *const f64,
    multiplicities: *const u64,
    count: usize,
    out_spec: *mut *mut QumodeSpectrum,
) -> QumodeStatus {
    guard(|| {
        let slot = out(out_spec, "out_spec")?;
        if phases.is_null() || multiplicities.is_null() {
            return Err(Failure::Null("phases"));
        }
        let phases = std::slice::from_raw_parts(phases, count);
        let mults = std::slice::from_raw_parts(multiplicities, count);
        let pairs: Vec<(f64, u64)> = phases.iter().copied().zip(mults.iter().copied()).collect();
        *slot = Box::into_raw(Box::new(QumodeSpectrum(PhaseSpectrum::from_phases(n_qubits, &pairs)?)));
        Ok(())
    })
}

/// # Safety
/// `spec` must come from a spectrum constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qumode_spectrum_free(spec: *mut QumodeSpectrum) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Number of distinct eigenphases.
///
/// # Safety
/// `spec` must be a live handle and `out_len` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_spectrum_len(spec: *const QumodeSpectrum, out_len: *mut usize) -> QumodeStatus {
    guard(|| {
        *out(out_len, "out_len")? = deref(spec, "spec")?.0.len();
        Ok(())
    })
}

/// Phase in radians and multiplicity of entry `index`.
///
/// # Safety
/// `spec` must be a live handle; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_spectrum_entry(
    spec: *const QumodeSpectrum,
    index: usize,
    out_phase: *mut f64,
    out_multiplicity: *mut u64,
) -> QumodeStatus {
    guard(|| {
        let spec = deref(spec, "spec")?;
        let entry = spec
            .0
            .entries()
            .get(index)
            .ok_or_else(|| Error::InvalidArgument(format!("entry {index} out of range")))?;
        *out(out_phase, "out_phase")? = entry.phase.value();
        *out(out_multiplicity, "out_multiplicity")? = entry.multiplicity;
        Ok(())
    })
}

/// `Tr(exp(iHt))/2^n`.
///
/// # Safety
/// `spec` must be a live handle; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_spectrum_trace(
    spec: *const QumodeSpectrum,
    t: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> QumodeStatus {
    guard(|| {
        let tr = exact_normalized_trace(&deref(spec, "spec")?.0, t);
        *out(out_re, "out_re")? = tr.re;
        *out(out_im, "out_im")? = tr.im;
        Ok(())
    })
}

/// Momentum distribution for a squeezed control state.
///
/// # Safety
/// `spec` must be a live handle and `out_mix` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_mixture_squeezed(
    spec: *const QumodeSpectrum,
    s0: f64,
    tau: f64,
    x0: f64,
    out_mix: *mut *mut QumodeMixture,
) -> QumodeStatus {
    guard(|| {
        let spec = deref(spec, "spec")?;
        let slot = out(out_mix, "out_mix")?;
        let psi = QumodeWavefunction::squeezed(s0)?.with_x0(x0)?;
        let mix = momentum_distribution(&spec.0, &psi, tau)?;
        *slot = Box::into_raw(Box::new(QumodeMixture(mix)));
        Ok(())
    })
}

/// Momentum distribution for a coherent control state `alpha`.
///
/// # Safety
/// `spec` must be a live handle and `out_mix` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_mixture_coherent(
    spec: *const QumodeSpectrum,
    alpha_re: f64,
    alpha_im: f64,
    tau: f64,
    x0: f64,
    out_mix: *mut *mut QumodeMixture,
) -> QumodeStatus {
    guard(|| {
        let spec = deref(spec, "spec")?;
        let slot = out(out_mix, "out_mix")?;
        let psi = QumodeWavefunction::coherent(Complex64::new(alpha_re, alpha_im))?.with_x0(x0)?;
        let mix = momentum_distribution(&spec.0, &psi, tau)?;
        *slot = Box::into_raw(Box::new(QumodeMixture(mix)));
        Ok(())
    })
}

/// # Safety
/// `mix` must come from a mixture constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qumode_mixture_free(mix: *mut QumodeMixture) {
    if !mix.is_null() {
        drop(Box::from_raw(mix));
    }
}

/// Density at `p_e`.
///
/// # Safety
/// `mix` must be a live handle and `out_density` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_mixture_density(
    mix: *const QumodeMixture,
    p_e: f64,
    out_density: *mut f64,
) -> QumodeStatus {
    guard(|| {
        *out(out_density, "out_density")? = deref(mix, "mix")?.0.density_at(p_e);
        Ok(())
    })
}

/// Fills `out_samples[0..count]` with draws; identical to the library's
/// sampler for the same seed.
///
/// # Safety
/// `mix` must be a live handle and `out_samples` valid for `count` writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_mixture_sample(
    mix: *const QumodeMixture,
    count: usize,
    seed: u64,
    out_samples: *mut f64,
) -> QumodeStatus {
    guard(|| {
        let mix = deref(mix, "mix")?;
        if out_samples.is_null() {
            return Err(Failure::Null("out_samples"));
        }
        let samples = sample_momentum(&mix.0, count, seed)?;
        std::slice::from_raw_parts_mut(out_samples, count).copy_from_slice(&samples);
        Ok(())
    })
}

/// Probability that one draw lands within `delta_e` of an eigenphase.
///
/// # Safety
/// `spec` must be a live handle and `out_p` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_success_probability(
    spec: *const QumodeSpectrum,
    s0: f64,
    tau: f64,
    delta_e: f64,
    out_p: *mut f64,
) -> QumodeStatus {
    guard(|| {
        let cfg = ExperimentConfig {
            s0,
            tau,
            delta_e,
            ..Default::default()
        };
        *out(out_p, "out_p")? = success_probability(&deref(spec, "spec")?.0, &cfg)?;
        Ok(())
    })
}

/// Sample count for a trace estimate within `delta` componentwise.
///
/// # Safety
/// `out_count` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_required_samples(
    delta_re: f64,
    delta_im: f64,
    s0: f64,
    out_count: *mut u64,
) -> QumodeStatus {
    guard(|| {
        *out(out_count, "out_count")? = required_samples(Complex64::new(delta_re, delta_im), s0)?;
        Ok(())
    })
}

/// Corrected normalized-trace estimate from samples taken at `tau = 1`.
///
/// # Safety
/// `samples` must hold `count` values; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_estimate_trace(
    samples: *const f64,
    count: usize,
    s0: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> QumodeStatus {
    guard(|| {
        if samples.is_null() {
            return Err(Failure::Null("samples"));
        }
        let est = estimate_trace(std::slice::from_raw_parts(samples, count), s0)?;
        *out(out_re, "out_re")? = est.value.re;
        *out(out_im, "out_im")? = est.value.im;
        Ok(())
    })
}

/// Continued-fraction recovery of `m/r` from `p_prime`. `*out_found` is
/// false when no fraction lies within `1/(2N^2)`.
///
/// # Safety
/// The out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_continued_fraction(
    p_prime: f64,
    modulus: u64,
    out_found: *mut bool,
    out_m: *mut u64,
    out_r: *mut u64,
) -> QumodeStatus {
    guard(|| {
        let found = out(out_found, "out_found")?;
        let m = out(out_m, "out_m")?;
        let r = out(out_r, "out_r")?;
        match continued_fraction_recover(p_prime, modulus)? {
            Some((a, b)) => (*found, *m, *r) = (true, a, b),
            None => (*found, *m, *r) = (false, 0, 0),
        }
        Ok(())
    })
}

/// Multiplicative order of `q` modulo `N`.
///
/// # Safety
/// `out_order` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_order(modulus: u64, base: u64, out_order: *mut u64) -> QumodeStatus {
    guard(|| {
        *out(out_order, "out_order")? = ModularProblem::new(modulus, base)?.order();
        Ok(())
    })
}

/// Factors `N` by simulated order finding; `t_bound` caps the total runs.
///
/// # Safety
/// The out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qumode_factor(
    modulus: u64,
    s0: f64,
    tau: f64,
    t_bound: u64,
    seed: u64,
    out_p: *mut u64,
    out_q: *mut u64,
) -> QumodeStatus {
    guard(|| {
        let p = out(out_p, "out_p")?;
        let q = out(out_q, "out_q")?;
        let cfg = ExperimentConfig {
            s0,
            tau,
            t_bound,
            ..Default::default()
        };
        let res = factor(modulus, &cfg, seed)?;
        (*p, *q) = res.factors;
        Ok(())
    })
}
