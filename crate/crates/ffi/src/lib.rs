//! C ABI for the deferlab core: load and run trained networks, make
//! system predictions with deferral, and evaluate the calibration
//! misclassification bound.
//!
//! Conventions:
//! - Handles are opaque pointers created and freed by this library.
//! - Fallible functions return [`DeferlabStatus`]; on failure a
//!   thread-local message is readable via [`deferlab_last_error_message`]
//!   until the next failing call on the same thread.
//! - Pointers must be valid for the stated lengths; null pointers are
//!   rejected with `NullArgument` rather than dereferenced.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use deferlab::calib::{
    chebyshev_bound, simulate_misclassification, CalibrationScenario, NoiseKind,
};
use deferlab::cli::{load_model, save_model};
use deferlab::data::FeatureVector;
use deferlab::nn::Network;

/// Result code of a C ABI call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeferlabStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
}

/// Opaque handle to a loaded feed-forward network.
pub struct DeferlabNetwork {
    inner: Network,
}

/// Calibration-noise family for bound simulation.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeferlabNoiseKind {
    Gaussian = 0,
    Uniform = 1,
    Laplace = 2,
}

impl From<DeferlabNoiseKind> for NoiseKind {
    fn from(kind: DeferlabNoiseKind) -> Self {
        match kind {
            DeferlabNoiseKind::Gaussian => NoiseKind::Gaussian,
            DeferlabNoiseKind::Uniform => NoiseKind::Uniform,
            DeferlabNoiseKind::Laplace => NoiseKind::Laplace,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: DeferlabStatus, message: impl std::fmt::Display) -> DeferlabStatus {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
    status
}

fn status_of(err: &deferlab::Error) -> DeferlabStatus {
    match err {
        deferlab::Error::Io { .. } => DeferlabStatus::Io,
        deferlab::Error::Json { .. }
        | deferlab::Error::MalformedRecord { .. }
        | deferlab::Error::SchemaVersion { .. } => DeferlabStatus::Parse,
        _ => DeferlabStatus::InvalidArgument,
    }
}

/// Message of the last failing call on this thread. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn deferlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn deferlab_network_load(
    path: *const c_char,
    out: *mut *mut DeferlabNetwork,
) -> DeferlabStatus {
    if path.is_null() || out.is_null() {
        return fail(DeferlabStatus::NullArgument, "null path or out pointer");
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(e) => return fail(DeferlabStatus::InvalidArgument, format!("path: {e}")),
    };
    match load_model(Path::new(path)) {
        Ok(net) => {
            *out = Box::into_raw(Box::new(DeferlabNetwork { inner: net }));
            DeferlabStatus::Ok
        }
        Err(e) => fail(status_of(&e), e),
    }
}

/// # Safety
/// `net` must be a live handle from this library; `path` must be a
/// valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn deferlab_network_save(
    net: *const DeferlabNetwork,
    path: *const c_char,
) -> DeferlabStatus {
    if net.is_null() || path.is_null() {
        return fail(DeferlabStatus::NullArgument, "null handle or path");
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(e) => return fail(DeferlabStatus::InvalidArgument, format!("path: {e}")),
    };
    match save_model(&(*net).inner, Path::new(path)) {
        Ok(()) => DeferlabStatus::Ok,
        Err(e) => fail(status_of(&e), e),
    }
}

/// Frees a handle returned by [`deferlab_network_load`]. Null is a no-op.
///
/// # Safety
/// `net` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn deferlab_network_free(net: *mut DeferlabNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Input width of the network; 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn deferlab_network_input_dim(net: *const DeferlabNetwork) -> usize {
    if net.is_null() {
        0
    } else {
        (*net).inner.input_dim()
    }
}

/// Output width of the network; 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn deferlab_network_output_dim(net: *const DeferlabNetwork) -> usize {
    if net.is_null() {
        0
    } else {
        (*net).inner.output_dim()
    }
}

/// Forward pass: writes the network outputs into `output`.
///
/// # Safety
/// `input` must point to `input_len` doubles and `output` to
/// `output_len` doubles; `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn deferlab_network_forward(
    net: *const DeferlabNetwork,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> DeferlabStatus {
    if net.is_null() || input.is_null() || output.is_null() {
        return fail(DeferlabStatus::NullArgument, "null handle or buffer");
    }
    let net = &(*net).inner;
    if output_len != net.output_dim() {
        return fail(
            DeferlabStatus::InvalidArgument,
            format!(
                "output buffer holds {output_len}, need {}",
                net.output_dim()
            ),
        );
    }
    let x = FeatureVector::new(std::slice::from_raw_parts(input, input_len).to_vec());
    match net.forward(&x) {
        Ok(values) => {
            ptr::copy_nonoverlapping(values.as_ptr(), output, output_len);
            DeferlabStatus::Ok
        }
        Err(e) => fail(status_of(&e), e),
    }
}

/// Runs a K+1 rejector-classifier network as a system: argmax over the
/// outputs; the last output defers and substitutes `human_label`.
/// Writes the final label and whether the point was deferred.
///
/// # Safety
/// `input` must point to `input_len` doubles; `label_out` and
/// `deferred_out` must be valid; `net` must be a live handle with at
/// least 2 outputs.
#[no_mangle]
pub unsafe extern "C" fn deferlab_system_predict(
    net: *const DeferlabNetwork,
    input: *const f64,
    input_len: usize,
    human_label: usize,
    label_out: *mut usize,
    deferred_out: *mut bool,
) -> DeferlabStatus {
    if net.is_null() || input.is_null() || label_out.is_null() || deferred_out.is_null() {
        return fail(DeferlabStatus::NullArgument, "null handle or out pointer");
    }
    let network = &(*net).inner;
    if network.output_dim() < 2 {
        return fail(
            DeferlabStatus::InvalidArgument,
            "rejector-classifier needs at least 2 outputs",
        );
    }
    let num_classes = network.output_dim() - 1;
    let rc = match deferlab::defer::RejectorClassifier::new(network.clone(), num_classes) {
        Ok(rc) => rc,
        Err(e) => return fail(status_of(&e), e),
    };
    let x = FeatureVector::new(std::slice::from_raw_parts(input, input_len).to_vec());
    match deferlab::defer::system_predict(&rc, &x, human_label) {
        Ok((label, deferred)) => {
            *label_out = label;
            *deferred_out = deferred;
            DeferlabStatus::Ok
        }
        Err(e) => fail(status_of(&e), e),
    }
}

/// The Chebyshev misclassification bound `min(1, 2 eps^2 / gap^2)`.
/// Returns NaN for confidences outside [0, 1] or a negative epsilon.
#[no_mangle]
pub extern "C" fn deferlab_chebyshev_bound(
    human_confidence: f64,
    machine_confidence: f64,
    epsilon: f64,
) -> f64 {
    let scenario = CalibrationScenario {
        human_confidence,
        machine_confidence,
        epsilon,
        noise: NoiseKind::Gaussian,
    };
    if scenario.validate().is_err() {
        return f64::NAN;
    }
    chebyshev_bound(&scenario)
}

/// Monte-Carlo misclassification rate of the confidence-comparison
/// router under calibration noise; writes the rate and its 99% CI
/// half-width. Needs at least 10^4 trials.
///
/// # Safety
/// `rate_out` and `ci_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn deferlab_simulate_misclassification(
    human_confidence: f64,
    machine_confidence: f64,
    epsilon: f64,
    noise: DeferlabNoiseKind,
    trials: u64,
    seed: u64,
    rate_out: *mut f64,
    ci_out: *mut f64,
) -> DeferlabStatus {
    if rate_out.is_null() || ci_out.is_null() {
        return fail(DeferlabStatus::NullArgument, "null out pointer");
    }
    let scenario = CalibrationScenario {
        human_confidence,
        machine_confidence,
        epsilon,
        noise: noise.into(),
    };
    match simulate_misclassification(&scenario, trials, seed) {
        Ok(result) => {
            *rate_out = result.rate;
            *ci_out = result.ci_halfwidth;
            DeferlabStatus::Ok
        }
        Err(e) => fail(status_of(&e), e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn c_path(path: &Path) -> CString {
        CString::new(path.to_str().unwrap()).unwrap()
    }

    #[test]
    fn load_forward_free_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = Network::new(&[3, 8, 4], 5).unwrap();
        save_model(&net, &path).unwrap();

        let mut handle: *mut DeferlabNetwork = ptr::null_mut();
        let status = unsafe { deferlab_network_load(c_path(&path).as_ptr(), &mut handle) };
        assert_eq!(status, DeferlabStatus::Ok);
        assert_eq!(unsafe { deferlab_network_input_dim(handle) }, 3);
        assert_eq!(unsafe { deferlab_network_output_dim(handle) }, 4);

        let input = [0.25, -1.5, 2.0];
        let mut output = [0.0; 4];
        let status =
            unsafe { deferlab_network_forward(handle, input.as_ptr(), 3, output.as_mut_ptr(), 4) };
        assert_eq!(status, DeferlabStatus::Ok);
        let direct = net.forward(&FeatureVector::new(input.to_vec())).unwrap();
        assert_eq!(output.to_vec(), direct);

        // Saving through the ABI reproduces the file.
        let copy = dir.path().join("copy.json");
        let status = unsafe { deferlab_network_save(handle, c_path(&copy).as_ptr()) };
        assert_eq!(status, DeferlabStatus::Ok);
        assert_eq!(load_model(&copy).unwrap(), net);

        unsafe { deferlab_network_free(handle) };
    }

    #[test]
    fn null_and_missing_paths_are_reported() {
        let mut handle: *mut DeferlabNetwork = ptr::null_mut();
        let status = unsafe { deferlab_network_load(ptr::null(), &mut handle) };
        assert_eq!(status, DeferlabStatus::NullArgument);

        let missing = CString::new("/nonexistent/deferlab-model.json").unwrap();
        let status = unsafe { deferlab_network_load(missing.as_ptr(), &mut handle) };
        assert_eq!(status, DeferlabStatus::Io);
        let msg = unsafe { CStr::from_ptr(deferlab_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("deferlab-model.json"));

        // Wrong-size output buffer.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_model(&Network::new(&[2, 3], 1).unwrap(), &path).unwrap();
        let status = unsafe { deferlab_network_load(c_path(&path).as_ptr(), &mut handle) };
        assert_eq!(status, DeferlabStatus::Ok);
        let input = [0.0, 0.0];
        let mut small = [0.0; 2];
        let status =
            unsafe { deferlab_network_forward(handle, input.as_ptr(), 2, small.as_mut_ptr(), 2) };
        assert_eq!(status, DeferlabStatus::InvalidArgument);
        unsafe { deferlab_network_free(handle) };
        unsafe { deferlab_network_free(ptr::null_mut()) };
    }

    #[test]
    fn system_predict_defers_on_last_output() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rc.json");
        // Pass-through 3-output net: features are the logits (2 classes + defer).
        let eye = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let net = Network::from_parts(&[3, 3], vec![eye], vec![vec![0.0; 3]]).unwrap();
        save_model(&net, &path).unwrap();
        let mut handle: *mut DeferlabNetwork = ptr::null_mut();
        unsafe { deferlab_network_load(c_path(&path).as_ptr(), &mut handle) };

        let mut label = 99usize;
        let mut deferred = false;
        let defer_logits = [0.0, 0.0, 4.0];
        let status = unsafe {
            deferlab_system_predict(
                handle,
                defer_logits.as_ptr(),
                3,
                1,
                &mut label,
                &mut deferred,
            )
        };
        assert_eq!(status, DeferlabStatus::Ok);
        assert_eq!((label, deferred), (1, true));

        let class_logits = [4.0, 0.0, 0.0];
        unsafe {
            deferlab_system_predict(
                handle,
                class_logits.as_ptr(),
                3,
                1,
                &mut label,
                &mut deferred,
            )
        };
        assert_eq!((label, deferred), (0, false));
        unsafe { deferlab_network_free(handle) };
    }

    #[test]
    fn bound_and_simulation_match_core() {
        let b = deferlab_chebyshev_bound(0.9, 0.7, 0.05);
        assert!((b - 0.125).abs() < 1e-15);
        assert!(deferlab_chebyshev_bound(1.5, 0.5, 0.1).is_nan());

        let mut rate = -1.0;
        let mut ci = -1.0;
        let status = unsafe {
            deferlab_simulate_misclassification(
                0.9,
                0.7,
                0.05,
                DeferlabNoiseKind::Gaussian,
                100_000,
                9,
                &mut rate,
                &mut ci,
            )
        };
        assert_eq!(status, DeferlabStatus::Ok);
        assert!(rate <= b);
        assert!(ci > 0.0);

        let status = unsafe {
            deferlab_simulate_misclassification(
                0.9,
                0.7,
                0.05,
                DeferlabNoiseKind::Gaussian,
                10, // too few
                9,
                &mut rate,
                &mut ci,
            )
        };
        assert_eq!(status, DeferlabStatus::InvalidArgument);
    }

    #[test]
    fn generated_header_covers_the_surface() {
        let header =
            std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/deferlab.h"))
                .expect("build script generates include/deferlab.h");
        for symbol in [
            "deferlab_network_load",
            "deferlab_network_forward",
            "deferlab_network_free",
            "deferlab_system_predict",
            "deferlab_chebyshev_bound",
            "deferlab_simulate_misclassification",
            "deferlab_last_error_message",
            "typedef struct DeferlabNetwork DeferlabNetwork;",
        ] {
            assert!(header.contains(symbol), "missing {symbol}");
        }
    }
}
