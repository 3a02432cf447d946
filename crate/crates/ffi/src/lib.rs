//! C ABI over `stitchnorm`.
//!
//! Every fallible call returns an [`SnStatus`]; on failure a message for the
//! calling thread is available from [`sn_last_error`]. Objects are opaque and
//! owned by the caller once created: release them with the matching
//! `*_free` function. No call panics across the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use stitchnorm::geometry::{evaluate, SamplingPlan};
use stitchnorm::patchnet::{weights, PatchNet};
use stitchnorm::stitching::{
    run_pipeline, JetEstimator, NetEstimator, PatchEstimator, PcaEstimator, PipelineConfig,
    StitchConfig, StitchResult,
};
use stitchnorm::{Error, PointCloud, Vec3};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Degenerate = 5,
    Numeric = 6,
    Io = 7,
    Weights = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnBackend {
    Pca = 0,
    Jet = 1,
    Net = 2,
}

/// Pipeline settings; start from [`sn_estimate_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SnEstimateOptions {
    pub patch_size: usize,
    /// 0 derives the count from `overlap`.
    pub patch_count: usize,
    pub overlap: f64,
    pub seed: u64,
    pub backend: SnBackend,
    pub sigma_ratio: f64,
    /// 0 keeps the value stored with the weights.
    pub k_graph: usize,
    pub naive_stitch: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SnMetrics {
    pub rmse_deg: f64,
    pub pgp5: f64,
    pub pgp10: f64,
    pub n_evaluated: usize,
}

/// A point cloud with optional reference normals.
pub struct SnCloud(PointCloud);

/// Loaded network weights.
pub struct SnNetwork(PatchNet);

/// Stitched normals and per-point selection data.
pub struct SnResult(StitchResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SnStatus {
    match e {
        Error::InvalidArgument(_) | Error::IdOutOfRange { .. } | Error::ShapeMismatch(_) => {
            SnStatus::InvalidArgument
        }
        Error::Config(_) => SnStatus::Config,
        Error::EmptyCloud | Error::Parse { .. } | Error::Data { .. } => SnStatus::Data,
        Error::Degenerate(_) => SnStatus::Degenerate,
        Error::Numeric(_) => SnStatus::Numeric,
        Error::Io { .. } => SnStatus::Io,
        Error::Weights(_) => SnStatus::Weights,
    }
}

struct Failure(SnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SnStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SnStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            SnStatus::Panic
        }
    }
}

unsafe fn triples(data: *const f64, n: usize, what: &str) -> Result<Vec<Vec3>, Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    let flat: &[f64] = std::slice::from_raw_parts(data, n.checked_mul(3).ok_or_else(|| {
        Failure(SnStatus::InvalidArgument, format!("{what}: length overflow"))
    })?);
    Ok(flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies `n` points from `xyz` (`3n` doubles, interleaved).
#[no_mangle]
pub unsafe extern "C" fn sn_cloud_new(xyz: *const f64, n: usize, out: *mut *mut SnCloud) -> SnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if n == 0 {
            return Err(Error::EmptyCloud.into());
        }
        let cloud = PointCloud::new(triples(xyz, n, "xyz")?)?;
        *out = Box::into_raw(Box::new(SnCloud(cloud)));
        Ok(())
    })
}

/// Attaches `n` unit reference normals (`3n` doubles); `n` must equal the
/// cloud size.
#[no_mangle]
pub unsafe extern "C" fn sn_cloud_set_normals(
    cloud: *mut SnCloud,
    normals: *const f64,
    n: usize,
) -> SnStatus {
    guard(|| {
        let cloud = cloud.as_mut().ok_or_else(|| null("cloud"))?;
        cloud.0.set_normals(triples(normals, n, "normals")?)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sn_cloud_len(cloud: *const SnCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn sn_cloud_free(cloud: *mut SnCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Loads an STNW weights file.
#[no_mangle]
pub unsafe extern "C" fn sn_network_load(path: *const c_char, out: *mut *mut SnNetwork) -> SnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| {
            Failure(SnStatus::InvalidArgument, "path is not valid UTF-8".into())
        })?;
        let (params, _) = weights::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(SnNetwork(PatchNet::new(params)?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sn_network_free(net: *mut SnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

#[no_mangle]
pub extern "C" fn sn_estimate_options_default() -> SnEstimateOptions {
    SnEstimateOptions {
        patch_size: 256,
        patch_count: 0,
        overlap: 12.0,
        seed: 0,
        backend: SnBackend::Jet,
        sigma_ratio: 1.0 / 3.0,
        k_graph: 0,
        naive_stitch: false,
    }
}

/// Runs the full pipeline. `net` is required for the net backend and ignored
/// otherwise; `options` may be null for the defaults.
#[no_mangle]
pub unsafe extern "C" fn sn_estimate(
    cloud: *const SnCloud,
    options: *const SnEstimateOptions,
    net: *const SnNetwork,
    out: *mut *mut SnResult,
) -> SnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cloud = &cloud.as_ref().ok_or_else(|| null("cloud"))?.0;
        let opts = options.as_ref().copied().unwrap_or_else(|| sn_estimate_options_default());
        let n = cloud.len();
        let patch_count = if opts.patch_count > 0 {
            opts.patch_count
        } else {
            if !(opts.overlap > 0.0 && opts.overlap.is_finite()) {
                return Err(Error::Config(format!("overlap must be positive, got {}", opts.overlap)).into());
            }
            let k = opts.patch_size.clamp(1, n);
            ((opts.overlap * n as f64 / k as f64).round() as usize).clamp(1, n)
        };
        let plan = SamplingPlan::new(opts.patch_size, patch_count, opts.seed);
        let config = PipelineConfig {
            stitch: StitchConfig {
                sigma_ratio: opts.sigma_ratio,
                ..StitchConfig::default()
            },
            naive_stitch: opts.naive_stitch,
        };
        let net_estimator;
        let estimator: &dyn PatchEstimator = match opts.backend {
            SnBackend::Pca => &PcaEstimator,
            SnBackend::Jet => &JetEstimator,
            SnBackend::Net => {
                let net = net
                    .as_ref()
                    .ok_or_else(|| Failure(SnStatus::Config, "net backend needs a network".into()))?;
                let mut pn = net.0.clone();
                if opts.k_graph > 0 {
                    let mut params = pn.into_params();
                    params.config.k_graph = opts.k_graph;
                    pn = PatchNet::new(params)?;
                }
                net_estimator = NetEstimator::new(pn);
                &net_estimator
            }
        };
        let run = run_pipeline(cloud, &plan, estimator, &config)?;
        *out = Box::into_raw(Box::new(SnResult(run.result)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sn_result_len(result: *const SnResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.len())
}

/// Copies `3·len` doubles of stitched normals into `out`; `capacity` counts
/// points.
#[no_mangle]
pub unsafe extern "C" fn sn_result_normals(
    result: *const SnResult,
    out: *mut f64,
    capacity: usize,
) -> SnStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.0;
        let dst = out_slice(out, capacity, r.len())?;
        for (chunk, n) in dst.chunks_exact_mut(3).zip(&r.normals) {
            chunk.copy_from_slice(n.as_slice());
        }
        Ok(())
    })
}

unsafe fn out_slice<'a>(out: *mut f64, capacity: usize, points: usize) -> Result<&'a mut [f64], Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if capacity < points {
        return Err(Failure(
            SnStatus::InvalidArgument,
            format!("buffer holds {capacity} points, need {points}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(out, points * 3))
}

/// Winning candidate weight per point (0 for uncovered points).
#[no_mangle]
pub unsafe extern "C" fn sn_result_winner_weights(
    result: *const SnResult,
    out: *mut f64,
    capacity: usize,
) -> SnStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.0;
        copy_out(out, capacity, &r.winner_weight)
    })
}

/// Candidate count `m_i` per point.
#[no_mangle]
pub unsafe extern "C" fn sn_result_candidate_counts(
    result: *const SnResult,
    out: *mut usize,
    capacity: usize,
) -> SnStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.0;
        copy_out(out, capacity, &r.candidate_count)
    })
}

/// Number of points filled by the fallback estimator.
#[no_mangle]
pub unsafe extern "C" fn sn_result_uncovered_len(result: *const SnResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.uncovered.len())
}

/// Ids of the points filled by the fallback estimator, ascending.
#[no_mangle]
pub unsafe extern "C" fn sn_result_uncovered(
    result: *const SnResult,
    out: *mut usize,
    capacity: usize,
) -> SnStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.0;
        copy_out(out, capacity, &r.uncovered)
    })
}

unsafe fn copy_out<T: Copy>(out: *mut T, capacity: usize, src: &[T]) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if capacity < src.len() {
        return Err(Failure(
            SnStatus::InvalidArgument,
            format!("buffer holds {capacity} values, need {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

#[no_mangle]
pub unsafe extern "C" fn sn_result_free(result: *mut SnResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Unoriented angle metrics of `n` predicted normals against `n` reference
/// normals (both `3n` doubles). `subset` may be null to use every point.
#[no_mangle]
pub unsafe extern "C" fn sn_evaluate(
    pred: *const f64,
    gt: *const f64,
    n: usize,
    subset: *const usize,
    subset_len: usize,
    out: *mut SnMetrics,
) -> SnStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let pred = triples(pred, n, "pred")?;
        let gt = triples(gt, n, "gt")?;
        let subset = if subset.is_null() {
            None
        } else {
            Some(std::slice::from_raw_parts(subset, subset_len))
        };
        let m = evaluate(&pred, &gt, subset)?;
        *out = SnMetrics {
            rmse_deg: m.rmse_deg,
            pgp5: m.pgp5,
            pgp10: m.pgp10,
            n_evaluated: m.n_evaluated,
        };
        Ok(())
    })
}
