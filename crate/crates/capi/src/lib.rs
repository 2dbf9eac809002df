//! C ABI for the grasp detection toolkit.
//!
//! Opaque handles own the Rust objects; every entry point returns a
//! [`GkStatus`] code and never unwinds across the boundary. Details for
//! the most recent failure on the calling thread are available through
//! [`gk_last_error_message`].

use graspkit::eval::{angle_match, is_correct, jaccard, MatchCriteria};
use graspkit::grasp::{decode_grasps, GraspRectangle};
use graspkit::net::{load_checkpoint, CheckpointMeta, Network};
use ndarray::Array3;
use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    IoError = 3,
    RuntimeError = 4,
}

/// A decoded planar grasp in image coordinates.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GkGrasp {
    /// Center column, pixels.
    pub u: f64,
    /// Center row, pixels.
    pub v: f64,
    /// Grasp angle in [-pi/2, pi/2), radians.
    pub phi: f64,
    /// Gripper opening, pixels.
    pub width: f64,
    /// Quality in [0, 1].
    pub quality: f64,
}

/// An oriented grasp rectangle (center, angle, opening, jaw size).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GkRect {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub w: f64,
    pub h: f64,
}

/// Opaque predictor handle: a loaded checkpoint ready for inference.
pub struct GkPredictor {
    net: Network<f32>,
    meta: CheckpointMeta,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> =
        RefCell::new(CString::new("").expect("empty cstring"));
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: GkStatus, msg: &str) -> GkStatus {
    set_last_error(msg);
    status
}

fn guarded(f: impl FnOnce() -> GkStatus) -> GkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(GkStatus::RuntimeError, "internal panic"),
    }
}

/// Version string of the underlying toolkit; static storage, do not free.
#[no_mangle]
pub extern "C" fn gk_version() -> *const c_char {
    concat!("graspkit ", env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread; valid until
/// the next failing call. Do not free.
#[no_mangle]
pub extern "C" fn gk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Loads a checkpoint directory. On success `*out` owns the predictor;
/// release it with [`gk_predictor_free`].
///
/// # Safety
/// `checkpoint_dir` must be a valid NUL-terminated string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gk_predictor_load(
    checkpoint_dir: *const c_char,
    out: *mut *mut GkPredictor,
) -> GkStatus {
    guarded(|| {
        if checkpoint_dir.is_null() || out.is_null() {
            return fail(GkStatus::NullArgument, "null argument to gk_predictor_load");
        }
        let path = match unsafe { CStr::from_ptr(checkpoint_dir) }.to_str() {
            Ok(s) => PathBuf::from(s),
            Err(_) => return fail(GkStatus::InvalidArgument, "checkpoint path is not utf-8"),
        };
        match load_checkpoint::<f32>(&path) {
            Ok((net, meta)) => {
                let boxed = Box::new(GkPredictor { net, meta });
                unsafe { *out = Box::into_raw(boxed) };
                GkStatus::Ok
            }
            Err(e) => fail(GkStatus::IoError, &e.to_string()),
        }
    })
}

/// Releases a predictor created by [`gk_predictor_load`]. A null pointer
/// is a no-op.
///
/// # Safety
/// `p` must have been produced by [`gk_predictor_load`] and not freed yet.
#[no_mangle]
pub unsafe extern "C" fn gk_predictor_free(p: *mut GkPredictor) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Number of input channels the loaded network expects (1, 3 or 4).
///
/// # Safety
/// `p` must be a live predictor handle.
#[no_mangle]
pub unsafe extern "C" fn gk_predictor_input_channels(p: *const GkPredictor) -> c_int {
    if p.is_null() {
        return -1;
    }
    unsafe { &*p }.meta.network.in_channels as c_int
}

/// Square input size (pixels) the checkpoint was trained at. Inference
/// accepts any spatial size divisible by 4; this is the trained size.
///
/// # Safety
/// `p` must be a live predictor handle.
#[no_mangle]
pub unsafe extern "C" fn gk_predictor_input_size(p: *const GkPredictor) -> c_int {
    if p.is_null() {
        return -1;
    }
    unsafe { &*p }.meta.input.size as c_int
}

fn run_prediction(
    pred: &GkPredictor,
    input: Array3<f32>,
    top_k: usize,
    out_grasps: *mut GkGrasp,
    capacity: usize,
    out_count: *mut usize,
) -> GkStatus {
    let mut maps = match pred.net.predict_maps(&input) {
        Ok(m) => m,
        Err(e) => return fail(GkStatus::InvalidArgument, &e.to_string()),
    };
    maps.quality.mapv_inplace(|v| v.clamp(0.0, 1.0));
    let grasps = match decode_grasps(
        &maps,
        top_k.max(1),
        pred.meta.decode.smooth_sigma,
        pred.meta.encoder.w_max,
    ) {
        Ok(g) => g,
        Err(e) => return fail(GkStatus::RuntimeError, &e.to_string()),
    };
    let n = grasps.len().min(capacity);
    for (i, g) in grasps.iter().take(n).enumerate() {
        unsafe {
            *out_grasps.add(i) = GkGrasp {
                u: g.u(),
                v: g.v(),
                phi: g.phi(),
                width: g.width(),
                quality: g.quality(),
            };
        }
    }
    unsafe { *out_count = n };
    GkStatus::Ok
}

/// Runs inference on an already assembled, normalized input tensor laid
/// out as channel-major (C, H, W) f32, row-major within each channel.
/// Writes up to `capacity` grasps ordered by decreasing quality.
///
/// # Safety
/// `data` must point to `channels * height * width` floats; `out_grasps`
/// must have room for `capacity` entries; `out_count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_predictor_predict_raw(
    p: *const GkPredictor,
    data: *const f32,
    channels: usize,
    height: usize,
    width: usize,
    top_k: usize,
    out_grasps: *mut GkGrasp,
    capacity: usize,
    out_count: *mut usize,
) -> GkStatus {
    guarded(|| {
        if p.is_null() || data.is_null() || out_grasps.is_null() || out_count.is_null() {
            return fail(GkStatus::NullArgument, "null argument to predict_raw");
        }
        let pred = unsafe { &*p };
        if channels != pred.meta.network.in_channels {
            return fail(
                GkStatus::InvalidArgument,
                "channel count does not match the checkpoint",
            );
        }
        if height == 0 || width == 0 || height % 4 != 0 || width % 4 != 0 {
            return fail(
                GkStatus::InvalidArgument,
                "spatial size must be a positive multiple of 4",
            );
        }
        let slice = unsafe { std::slice::from_raw_parts(data, channels * height * width) };
        let input = match Array3::from_shape_vec((channels, height, width), slice.to_vec()) {
            Ok(a) => a,
            Err(e) => return fail(GkStatus::InvalidArgument, &e.to_string()),
        };
        run_prediction(pred, input, top_k, out_grasps, capacity, out_count)
    })
}

/// Runs inference on a raw depth image in meters (H, W) row-major,
/// applying the toolkit's zero-mean depth normalization. Only valid for
/// depth-input (1 channel) checkpoints.
///
/// # Safety
/// Pointer contracts as in [`gk_predictor_predict_raw`].
#[no_mangle]
pub unsafe extern "C" fn gk_predictor_predict_depth(
    p: *const GkPredictor,
    depth_m: *const f32,
    height: usize,
    width: usize,
    top_k: usize,
    out_grasps: *mut GkGrasp,
    capacity: usize,
    out_count: *mut usize,
) -> GkStatus {
    guarded(|| {
        if p.is_null() || depth_m.is_null() || out_grasps.is_null() || out_count.is_null() {
            return fail(GkStatus::NullArgument, "null argument to predict_depth");
        }
        let pred = unsafe { &*p };
        if pred.meta.network.in_channels != 1 {
            return fail(
                GkStatus::InvalidArgument,
                "predict_depth requires a depth-input checkpoint",
            );
        }
        if height == 0 || width == 0 || height % 4 != 0 || width % 4 != 0 {
            return fail(
                GkStatus::InvalidArgument,
                "spatial size must be a positive multiple of 4",
            );
        }
        let slice = unsafe { std::slice::from_raw_parts(depth_m, height * width) };
        let mean = slice.iter().sum::<f32>() / slice.len() as f32;
        let data: Vec<f32> = slice.iter().map(|v| (v - mean).clamp(-1.0, 1.0)).collect();
        let input = Array3::from_shape_vec((1, height, width), data).expect("sized above");
        run_prediction(pred, input, top_k, out_grasps, capacity, out_count)
    })
}

fn to_rect(r: &GkRect) -> Result<GraspRectangle, String> {
    GraspRectangle::new(r.x, r.y, r.theta, r.w, r.h).map_err(|e| e.to_string())
}

/// Jaccard index (intersection over union) of two oriented rectangles.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_rect_jaccard(
    a: *const GkRect,
    b: *const GkRect,
    out: *mut f64,
) -> GkStatus {
    guarded(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return fail(GkStatus::NullArgument, "null argument to gk_rect_jaccard");
        }
        let (ra, rb) = unsafe { (&*a, &*b) };
        let (ra, rb) = match (to_rect(ra), to_rect(rb)) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(e), _) | (_, Err(e)) => return fail(GkStatus::InvalidArgument, &e),
        };
        match jaccard(&ra, &rb) {
            Ok(j) => {
                unsafe { *out = j };
                GkStatus::Ok
            }
            Err(e) => fail(GkStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// 1 when the two grasp angles differ by less than `threshold_rad` under
/// pi-periodic identification, else 0.
#[no_mangle]
pub extern "C" fn gk_angle_match(phi_pred: f64, phi_label: f64, threshold_rad: f64) -> c_int {
    angle_match(phi_pred, phi_label, threshold_rad) as c_int
}

/// Rectangle-metric check of one predicted rectangle against a label set:
/// correct when the angle difference is below `angle_threshold_rad` and
/// the Jaccard overlap exceeds `jaccard_threshold` against the same label.
///
/// # Safety
/// `labels` must point to `n_labels` rectangles; out pointers must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn gk_rect_is_correct(
    pred: *const GkRect,
    labels: *const GkRect,
    n_labels: usize,
    angle_threshold_rad: f64,
    jaccard_threshold: f64,
    out_matched: *mut c_int,
    out_best_jaccard: *mut f64,
) -> GkStatus {
    guarded(|| {
        if pred.is_null() || labels.is_null() || out_matched.is_null() {
            return fail(GkStatus::NullArgument, "null argument to gk_rect_is_correct");
        }
        if n_labels == 0 {
            return fail(GkStatus::InvalidArgument, "label list must be non-empty");
        }
        let pred = match to_rect(unsafe { &*pred }) {
            Ok(r) => r,
            Err(e) => return fail(GkStatus::InvalidArgument, &e),
        };
        let raw = unsafe { std::slice::from_raw_parts(labels, n_labels) };
        let mut rects = Vec::with_capacity(n_labels);
        for r in raw {
            match to_rect(r) {
                Ok(rect) => rects.push(rect),
                Err(e) => return fail(GkStatus::InvalidArgument, &e),
            }
        }
        let crit = MatchCriteria {
            angle_threshold: angle_threshold_rad,
            jaccard_threshold,
            top_k: 1,
        };
        match is_correct(&pred, &rects, &crit) {
            Ok(outcome) => {
                unsafe {
                    *out_matched = outcome.matched as c_int;
                    if !out_best_jaccard.is_null() {
                        *out_best_jaccard = outcome.best_jaccard;
                    }
                }
                GkStatus::Ok
            }
            Err(e) => fail(GkStatus::RuntimeError, &e.to_string()),
        }
    })
}
