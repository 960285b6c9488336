//! C ABI over the geoshap engine.
//!
//! Every handle is opaque and owned by the caller once returned; release it
//! with the matching `*_free`. Functions return a [`GeoshapStatus`] and write
//! results through out-pointers. On failure the message is kept per thread
//! and can be read with [`geoshap_last_error_message`].
//!
//! Matrices are dense row-major `double` arrays. Model input rows have the
//! `p` features first, then the two coordinates.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use geoshap::analysis::{svc_extract, SvcConfig};
use geoshap::models::{gen_svc, ModelArtifact, ModelSpec};
use geoshap::{explain, BackgroundSet, DataSet, Error, ErrorClass, ExplainConfig, ExplanationSet, PredictionOracle};
use nalgebra::DMatrix;

/// Result of every fallible call. Values 2 to 7 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeoshapStatus {
    Ok = 0,
    Config = 2,
    Data = 3,
    Model = 4,
    Numerical = 5,
    Bridge = 6,
    Io = 7,
    NullPointer = 8,
    Panic = 9,
}

impl From<ErrorClass> for GeoshapStatus {
    fn from(c: ErrorClass) -> Self {
        match c {
            ErrorClass::Config => GeoshapStatus::Config,
            ErrorClass::Data => GeoshapStatus::Data,
            ErrorClass::Model => GeoshapStatus::Model,
            ErrorClass::Numerical => GeoshapStatus::Numerical,
            ErrorClass::Bridge => GeoshapStatus::Bridge,
            ErrorClass::Io => GeoshapStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(GeoshapStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.class().into(), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GeoshapStatus::NullPointer, format!("`{what}` is null"))
}

fn config(message: impl Into<String>) -> Failure {
    Failure(GeoshapStatus::Config, message.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GeoshapStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GeoshapStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {message}"));
            GeoshapStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| config(format!("`{what}` is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn out<T>(p: *mut *mut T, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null("out"));
    }
    unsafe { *p = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { *p = value };
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next geoshap call on the same thread.
#[no_mangle]
pub extern "C" fn geoshap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn geoshap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn geoshap_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------- datasets

/// Tabular data with coordinates and an optional target.
pub struct GeoshapDataset(DataSet);

/// Builds a dataset from `features` (`n_rows x n_features`), `coords`
/// (`n_rows x 2`) and an optional `target` of length `n_rows`. `names` may be
/// null, in which case features are called `x1..xp`.
///
/// # Safety
/// Pointers must reference arrays of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn geoshap_dataset_new(
    features: *const f64,
    n_rows: usize,
    n_features: usize,
    coords: *const f64,
    target: *const f64,
    names: *const *const c_char,
    out_dataset: *mut *mut GeoshapDataset,
) -> GeoshapStatus {
    guard(|| {
        let x = slice(features, n_rows * n_features, "features")?;
        let c = slice(coords, n_rows * 2, "coords")?;
        let y = if target.is_null() {
            None
        } else {
            Some(slice(target, n_rows, "target")?.to_vec())
        };
        let names = if names.is_null() {
            (1..=n_features).map(|j| format!("x{j}")).collect()
        } else {
            let raw = std::slice::from_raw_parts(names, n_features);
            raw.iter()
                .map(|p| text(*p, "names[j]").map(str::to_string))
                .collect::<Result<Vec<_>, _>>()?
        };
        let data = DataSet::new(
            names,
            DMatrix::from_row_slice(n_rows, n_features, x),
            c.chunks_exact(2).map(|p| [p[0], p[1]]).collect(),
            y,
            None,
        )?;
        out(out_dataset, GeoshapDataset(data))
    })
}

/// Draws the synthetic spatially varying coefficient process with two
/// features on the unit square: `y = 3(u + v) + (1 + 2u) x1 + 2 x2 + noise`.
#[no_mangle]
pub extern "C" fn geoshap_dataset_gen_svc(
    n_rows: usize,
    seed: u64,
    noise_sd: f64,
    out_dataset: *mut *mut GeoshapDataset,
) -> GeoshapStatus {
    guard(|| out(out_dataset, GeoshapDataset(gen_svc(n_rows, seed, noise_sd)?.dataset)))
}

/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn geoshap_dataset_n_rows(dataset: *const GeoshapDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n_rows())
}

/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn geoshap_dataset_n_features(dataset: *const GeoshapDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n_features())
}

/// # Safety
/// `dataset` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn geoshap_dataset_free(dataset: *mut GeoshapDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

// ------------------------------------------------------------------ models

/// Batch prediction callback. Fills `out` with `n_rows` values for the
/// row-major `rows` matrix and returns 0, or returns non-zero on failure.
pub type GeoshapPredictFn = Option<
    unsafe extern "C" fn(user_data: *mut c_void, rows: *const f64, n_rows: usize, n_columns: usize, out: *mut f64) -> i32,
>;

struct CallbackOracle {
    n_columns: usize,
    predict: unsafe extern "C" fn(*mut c_void, *const f64, usize, usize, *mut f64) -> i32,
    user_data: *mut c_void,
}

// The caller promises the callback tolerates being invoked from the
// explaining thread; calls are never concurrent (concurrency_safe is false).
unsafe impl Send for CallbackOracle {}
unsafe impl Sync for CallbackOracle {}

impl PredictionOracle for CallbackOracle {
    fn n_columns(&self) -> usize {
        self.n_columns
    }

    fn predict(&self, rows: &DMatrix<f64>) -> geoshap::Result<Vec<f64>> {
        if rows.ncols() != self.n_columns {
            return Err(Error::ColumnMismatch {
                expected: self.n_columns,
                actual: rows.ncols(),
            });
        }
        let flat: Vec<f64> = rows.transpose().as_slice().to_vec();
        let mut values = vec![f64::NAN; rows.nrows()];
        let code = unsafe { (self.predict)(self.user_data, flat.as_ptr(), rows.nrows(), rows.ncols(), values.as_mut_ptr()) };
        if code != 0 {
            return Err(Error::Oracle {
                batch: format!("{} rows", rows.nrows()),
                message: format!("callback returned {code}"),
            });
        }
        Ok(values)
    }

    fn concurrency_safe(&self) -> bool {
        false
    }
}

enum ModelKind {
    Builtin(ModelArtifact),
    Callback(CallbackOracle),
}

/// A prediction oracle: a built-in trained model or a caller callback.
pub struct GeoshapModel(ModelKind);

impl GeoshapModel {
    fn oracle(&self) -> &dyn PredictionOracle {
        match &self.0 {
            ModelKind::Builtin(a) => &a.model,
            ModelKind::Callback(c) => c,
        }
    }
}

/// Trains a built-in model on `dataset` (which must have a target).
/// `spec_json` selects the learner, for example `{"kind":"linear"}` or
/// `{"kind":"boosted_trees","trees":200,...}`; null means boosted trees with
/// default settings.
///
/// # Safety
/// `dataset` must be a live handle; `spec_json` null or a C string.
#[no_mangle]
pub unsafe extern "C" fn geoshap_model_train(
    dataset: *const GeoshapDataset,
    spec_json: *const c_char,
    out_model: *mut *mut GeoshapModel,
) -> GeoshapStatus {
    guard(|| {
        let data = &handle(dataset, "dataset")?.0;
        let spec = if spec_json.is_null() {
            ModelSpec::BoostedTrees(Default::default())
        } else {
            serde_json::from_str(text(spec_json, "spec_json")?)
                .map_err(|e| config(format!("bad model spec: {e}")))?
        };
        let y = data
            .target()
            .ok_or_else(|| Failure(GeoshapStatus::Data, "dataset has no target".into()))?;
        let model = spec.train(&data.model_matrix(), y)?;
        let artifact = ModelArtifact::new(model, data.feature_names().to_vec());
        out(out_model, GeoshapModel(ModelKind::Builtin(artifact)))
    })
}

/// Wraps a caller-supplied batch predictor over `n_columns` inputs.
/// `user_data` is passed back untouched and must outlive the handle.
#[no_mangle]
pub extern "C" fn geoshap_model_from_callback(
    n_columns: usize,
    predict: GeoshapPredictFn,
    user_data: *mut c_void,
    out_model: *mut *mut GeoshapModel,
) -> GeoshapStatus {
    guard(|| {
        let predict = predict.ok_or_else(|| null("predict"))?;
        if n_columns < 3 {
            return Err(config("a model needs at least one feature plus two coordinates"));
        }
        let oracle = CallbackOracle {
            n_columns,
            predict,
            user_data,
        };
        out(out_model, GeoshapModel(ModelKind::Callback(oracle)))
    })
}

/// Loads a model artifact written by `geoshap_model_save` or the CLI.
///
/// # Safety
/// `path` must be a C string.
#[no_mangle]
pub unsafe extern "C" fn geoshap_model_load(path: *const c_char, out_model: *mut *mut GeoshapModel) -> GeoshapStatus {
    guard(|| {
        let artifact = ModelArtifact::load(Path::new(text(path, "path")?))?;
        out(out_model, GeoshapModel(ModelKind::Builtin(artifact)))
    })
}

/// # Safety
/// `model` must be a live handle; `path` a C string.
#[no_mangle]
pub unsafe extern "C" fn geoshap_model_save(model: *const GeoshapModel, path: *const c_char) -> GeoshapStatus {
    guard(|| {
        let path = text(path, "path")?;
        match &handle(model, "model")?.0 {
            ModelKind::Builtin(a) => Ok(a.save(Path::new(path))?),
            ModelKind::Callback(_) => Err(Failure(GeoshapStatus::Model, "callback models cannot be saved".into())),
        }
    })
}

/// Input width the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn geoshap_model_n_columns(model: *const GeoshapModel) -> usize {
    model.as_ref().map_or(0, |m| m.oracle().n_columns())
}

/// Predicts `n_rows` rows of width `n_columns` into `out_values`.
///
/// # Safety
/// `rows` must hold `n_rows * n_columns` values and `out_values` `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn geoshap_model_predict(
    model: *const GeoshapModel,
    rows: *const f64,
    n_rows: usize,
    n_columns: usize,
    out_values: *mut f64,
) -> GeoshapStatus {
    guard(|| {
        let oracle = handle(model, "model")?.oracle();
        let x = DMatrix::from_row_slice(n_rows, n_columns, slice(rows, n_rows * n_columns, "rows")?);
        let values = oracle.predict(&x)?;
        slice_mut(out_values, n_rows, "out_values")?.copy_from_slice(&values);
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn geoshap_model_free(model: *mut GeoshapModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ------------------------------------------------------------ explanations

/// Settings for `geoshap_explain`. Start from `geoshap_explain_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GeoshapExplainOptions {
    /// Background rows sampled from the dataset.
    pub background_size: usize,
    pub background_seed: u64,
    /// Coalition budget; 0 picks the default.
    pub budget: usize,
    pub seed: u64,
    /// Treat the coordinates as one location player.
    pub include_geo: bool,
}

#[no_mangle]
pub extern "C" fn geoshap_explain_options_default() -> GeoshapExplainOptions {
    let d = ExplainConfig::default();
    GeoshapExplainOptions {
        background_size: 100,
        background_seed: 0,
        budget: 0,
        seed: d.seed,
        include_geo: d.include_geo,
    }
}

/// Attributions for every row of a dataset.
pub struct GeoshapExplanation(ExplanationSet);

/// Explains every row of `dataset`. `options` may be null for defaults.
///
/// # Safety
/// Handles must be live; `options` null or a valid struct.
#[no_mangle]
pub unsafe extern "C" fn geoshap_explain(
    dataset: *const GeoshapDataset,
    model: *const GeoshapModel,
    options: *const GeoshapExplainOptions,
    out_explanation: *mut *mut GeoshapExplanation,
) -> GeoshapStatus {
    guard(|| {
        let data = &handle(dataset, "dataset")?.0;
        let oracle = handle(model, "model")?.oracle();
        let o = options.as_ref().copied().unwrap_or_else(|| geoshap_explain_options_default());
        let bg = BackgroundSet::sample(data, o.background_size, o.background_seed)?;
        let config = ExplainConfig {
            budget: (o.budget > 0).then_some(o.budget),
            seed: o.seed,
            include_geo: o.include_geo,
            ..Default::default()
        };
        out(out_explanation, GeoshapExplanation(explain(data, oracle, &bg, &config)?))
    })
}

/// # Safety
/// `explanation` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn geoshap_explanation_n_rows(explanation: *const GeoshapExplanation) -> usize {
    explanation.as_ref().map_or(0, |e| e.0.rows.len())
}

/// # Safety
/// `explanation` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn geoshap_explanation_n_features(explanation: *const GeoshapExplanation) -> usize {
    explanation.as_ref().map_or(0, |e| e.0.n_features())
}

/// Copies row `row`'s components. `phi` and `phi_geo_x` receive one value
/// per feature; any out-pointer may be null to skip it.
///
/// # Safety
/// Non-null arrays must hold `n_features` values.
#[no_mangle]
pub unsafe extern "C" fn geoshap_explanation_row(
    explanation: *const GeoshapExplanation,
    row: usize,
    out_phi0: *mut f64,
    out_phi_geo: *mut f64,
    out_phi: *mut f64,
    out_phi_geo_x: *mut f64,
    out_prediction: *mut f64,
) -> GeoshapStatus {
    guard(|| {
        let ex = &handle(explanation, "explanation")?.0;
        let r = ex
            .rows
            .get(row)
            .ok_or_else(|| config(format!("row {row} out of range for {} rows", ex.rows.len())))?;
        let a = &r.attribution;
        let p = a.phi.len();
        if !out_phi0.is_null() {
            *out_phi0 = a.phi0;
        }
        if !out_phi_geo.is_null() {
            *out_phi_geo = a.phi_geo;
        }
        if !out_phi.is_null() {
            slice_mut(out_phi, p, "out_phi")?.copy_from_slice(&a.phi);
        }
        if !out_phi_geo_x.is_null() {
            slice_mut(out_phi_geo_x, p, "out_phi_geo_x")?.copy_from_slice(&a.phi_geo_x);
        }
        if !out_prediction.is_null() {
            *out_prediction = r.prediction;
        }
        Ok(())
    })
}

/// Largest per-row gap between the summed components and the prediction.
///
/// # Safety
/// `explanation` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn geoshap_explanation_max_efficiency_gap(
    explanation: *const GeoshapExplanation,
    out_gap: *mut f64,
) -> GeoshapStatus {
    guard(|| write(out_gap, handle(explanation, "explanation")?.0.max_efficiency_gap(), "out_gap"))
}

/// Serializes the explanations to the JSON document format used by the CLI.
/// Free the result with `geoshap_string_free`.
///
/// # Safety
/// `explanation` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn geoshap_explanation_to_json(
    explanation: *const GeoshapExplanation,
    out_json: *mut *mut c_char,
) -> GeoshapStatus {
    guard(|| {
        let doc = handle(explanation, "explanation")?.0.to_document();
        let json = serde_json::to_string(&doc).map_err(Error::from)?;
        let s = CString::new(json).map_err(|e| config(e.to_string()))?;
        write(out_json, s.into_raw(), "out_json")
    })
}

/// Local coefficients for `feature` from the automatic-bandwidth bisquare
/// smoother. `out_beta` and `out_intercept` receive one value per row (either
/// may be null); `out_bandwidth` receives the neighbor count used.
///
/// # Safety
/// Non-null arrays must hold `n_rows` values.
#[no_mangle]
pub unsafe extern "C" fn geoshap_svc(
    explanation: *const GeoshapExplanation,
    feature: *const c_char,
    out_beta: *mut f64,
    out_intercept: *mut f64,
    out_bandwidth: *mut f64,
) -> GeoshapStatus {
    guard(|| {
        let ex = &handle(explanation, "explanation")?.0;
        let surface = svc_extract(ex, text(feature, "feature")?, &SvcConfig::default())?;
        let n = surface.beta.len();
        if !out_beta.is_null() {
            slice_mut(out_beta, n, "out_beta")?.copy_from_slice(&surface.beta);
        }
        if !out_intercept.is_null() {
            slice_mut(out_intercept, n, "out_intercept")?.copy_from_slice(&surface.intercept);
        }
        if !out_bandwidth.is_null() {
            *out_bandwidth = surface.bandwidth;
        }
        Ok(())
    })
}

/// # Safety
/// `explanation` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn geoshap_explanation_free(explanation: *mut GeoshapExplanation) {
    if !explanation.is_null() {
        drop(Box::from_raw(explanation));
    }
}
