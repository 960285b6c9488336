use std::ffi::{c_void, CStr, CString};
use std::ptr;

use geoshap_ffi::*;

fn last_error() -> String {
    let p = geoshap_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn gen(n: usize) -> *mut GeoshapDataset {
    let mut d = ptr::null_mut();
    assert_eq!(geoshap_dataset_gen_svc(n, 5, 0.2, &mut d), GeoshapStatus::Ok);
    d
}

#[test]
fn train_explain_and_free() {
    unsafe {
        let data = gen(120);
        assert_eq!(geoshap_dataset_n_rows(data), 120);
        assert_eq!(geoshap_dataset_n_features(data), 2);
        let spec = CString::new(r#"{"kind":"linear"}"#).unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(geoshap_model_train(data, spec.as_ptr(), &mut model), GeoshapStatus::Ok);
        assert_eq!(geoshap_model_n_columns(model), 4);

        let mut opts = geoshap_explain_options_default();
        opts.background_size = 30;
        let mut ex = ptr::null_mut();
        assert_eq!(geoshap_explain(data, model, &opts, &mut ex), GeoshapStatus::Ok);
        assert_eq!(geoshap_explanation_n_rows(ex), 120);

        let mut gap = f64::NAN;
        assert_eq!(geoshap_explanation_max_efficiency_gap(ex, &mut gap), GeoshapStatus::Ok);
        assert!(gap <= 1e-8);

        let (mut phi0, mut geo, mut pred) = (0.0, 0.0, 0.0);
        let (mut phi, mut gx) = ([0.0; 2], [0.0; 2]);
        let status = geoshap_explanation_row(ex, 7, &mut phi0, &mut geo, phi.as_mut_ptr(), gx.as_mut_ptr(), &mut pred);
        assert_eq!(status, GeoshapStatus::Ok);
        // a linear model has no location-by-feature interaction
        assert!(gx.iter().all(|v| v.abs() < 1e-9));
        assert!((phi0 + geo + phi.iter().sum::<f64>() + gx.iter().sum::<f64>() - pred).abs() <= 1e-8);

        let mut json = ptr::null_mut();
        assert_eq!(geoshap_explanation_to_json(ex, &mut json), GeoshapStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        geoshap_string_free(json);
        assert!(text.contains("\"phi_geo\""));

        geoshap_explanation_free(ex);
        geoshap_model_free(model);
        geoshap_dataset_free(data);
    }
}

#[test]
fn svc_through_the_abi() {
    unsafe {
        let data = gen(200);
        let mut model = ptr::null_mut();
        let spec = CString::new(r#"{"kind":"boosted_trees","trees":80}"#).unwrap();
        assert_eq!(geoshap_model_train(data, spec.as_ptr(), &mut model), GeoshapStatus::Ok, "{}", last_error());
        let mut opts = geoshap_explain_options_default();
        opts.background_size = 30;
        let mut ex = ptr::null_mut();
        assert_eq!(geoshap_explain(data, model, &opts, &mut ex), GeoshapStatus::Ok);
        let mut beta = vec![0.0; 200];
        let mut bw = 0.0;
        let feature = CString::new("x1").unwrap();
        let status = geoshap_svc(ex, feature.as_ptr(), beta.as_mut_ptr(), ptr::null_mut(), &mut bw);
        assert_eq!(status, GeoshapStatus::Ok, "{}", last_error());
        assert!(bw >= 10.0);
        assert!(beta.iter().all(|b| b.is_finite()));

        let missing = CString::new("nope").unwrap();
        let status = geoshap_svc(ex, missing.as_ptr(), beta.as_mut_ptr(), ptr::null_mut(), ptr::null_mut());
        assert_ne!(status, GeoshapStatus::Ok);
        assert!(last_error().contains("nope"));

        geoshap_explanation_free(ex);
        geoshap_model_free(model);
        geoshap_dataset_free(data);
    }
}

unsafe extern "C" fn sum_features(user: *mut c_void, rows: *const f64, n: usize, cols: usize, out: *mut f64) -> i32 {
    let fail = *(user as *const bool);
    if fail {
        return 3;
    }
    let rows = std::slice::from_raw_parts(rows, n * cols);
    let out = std::slice::from_raw_parts_mut(out, n);
    for i in 0..n {
        out[i] = rows[i * cols..i * cols + cols - 2].iter().sum();
    }
    0
}

#[test]
fn callback_models_and_their_failures() {
    unsafe {
        let data = gen(100);
        let mut fail = false;
        let mut model = ptr::null_mut();
        let user = &mut fail as *mut bool as *mut c_void;
        assert_eq!(geoshap_model_from_callback(4, Some(sum_features), user, &mut model), GeoshapStatus::Ok);

        let rows = [1.0, 2.0, 9.0, 9.0, -1.0, 0.5, 9.0, 9.0];
        let mut values = [0.0; 2];
        assert_eq!(geoshap_model_predict(model, rows.as_ptr(), 2, 4, values.as_mut_ptr()), GeoshapStatus::Ok);
        assert_eq!(values, [3.0, -0.5]);

        let mut ex = ptr::null_mut();
        assert_eq!(geoshap_explain(data, model, ptr::null(), &mut ex), GeoshapStatus::Ok);
        let mut geo = f64::NAN;
        let status = geoshap_explanation_row(ex, 0, ptr::null_mut(), &mut geo, ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(status, GeoshapStatus::Ok);
        assert!(geo.abs() < 1e-9, "coordinate-free callback has no location effect");
        geoshap_explanation_free(ex);

        fail = true;
        let _ = fail;
        let mut ex = ptr::null_mut();
        let status = geoshap_explain(data, model, ptr::null(), &mut ex);
        assert_eq!(status, GeoshapStatus::Model);
        assert!(last_error().contains("callback returned 3"), "{}", last_error());
        assert!(ex.is_null());

        let saved = CString::new("/tmp/never.json").unwrap();
        assert_eq!(geoshap_model_save(model, saved.as_ptr()), GeoshapStatus::Model);

        geoshap_model_free(model);
        geoshap_dataset_free(data);
    }
}

#[test]
fn status_codes_and_null_handles() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(geoshap_dataset_gen_svc(100, 1, 0.1, ptr::null_mut()), GeoshapStatus::NullPointer);
        assert_eq!(
            geoshap_dataset_new(ptr::null(), 3, 1, ptr::null(), ptr::null(), ptr::null(), &mut d),
            GeoshapStatus::NullPointer
        );
        assert!(last_error().contains("features"));

        // non-finite feature value
        let x = [1.0, f64::NAN, 3.0];
        let c = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        assert_eq!(geoshap_dataset_new(x.as_ptr(), 3, 1, c.as_ptr(), ptr::null(), ptr::null(), &mut d), GeoshapStatus::Data);

        let missing = CString::new("/nonexistent/m.json").unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(geoshap_model_load(missing.as_ptr(), &mut m), GeoshapStatus::Io);

        let data = gen(100);
        let bad = CString::new("{\"kind\":\"forest\"}").unwrap();
        assert_eq!(geoshap_model_train(data, bad.as_ptr(), &mut m), GeoshapStatus::Config);
        // a success clears the previous message
        assert_eq!(geoshap_dataset_n_rows(data), 100);
        let spec = CString::new(r#"{"kind":"linear"}"#).unwrap();
        assert_eq!(geoshap_model_train(data, spec.as_ptr(), &mut m), GeoshapStatus::Ok);
        assert!(geoshap_last_error_message().is_null());

        let mut opts = geoshap_explain_options_default();
        opts.background_size = 10;
        opts.budget = 3;
        let mut ex = ptr::null_mut();
        assert_eq!(geoshap_explain(data, m, &opts, &mut ex), GeoshapStatus::Config);

        geoshap_model_free(m);
        geoshap_dataset_free(data);
        geoshap_dataset_free(ptr::null_mut());
        geoshap_model_free(ptr::null_mut());
        geoshap_explanation_free(ptr::null_mut());
        assert_eq!(CStr::from_ptr(geoshap_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn models_round_trip_through_files() {
    unsafe {
        let data = gen(100);
        let mut m = ptr::null_mut();
        assert_eq!(geoshap_model_train(data, ptr::null(), &mut m), GeoshapStatus::Ok);
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
        assert_eq!(geoshap_model_save(m, path.as_ptr()), GeoshapStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(geoshap_model_load(path.as_ptr(), &mut back), GeoshapStatus::Ok);
        let rows = [0.3, -0.2, 0.5, 0.5, 1.0, 1.0, 0.1, 0.9];
        let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
        assert_eq!(geoshap_model_predict(m, rows.as_ptr(), 2, 4, a.as_mut_ptr()), GeoshapStatus::Ok);
        assert_eq!(geoshap_model_predict(back, rows.as_ptr(), 2, 4, b.as_mut_ptr()), GeoshapStatus::Ok);
        assert_eq!(a, b);
        assert_eq!(geoshap_model_predict(m, rows.as_ptr(), 2, 3, a.as_mut_ptr()), GeoshapStatus::Data);
        geoshap_model_free(m);
        geoshap_model_free(back);
        geoshap_dataset_free(data);
    }
}
