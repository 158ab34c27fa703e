use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use gnn_designer::graph_data::{save_dataset, Features, GraphDataset};
use gnn_designer::synthetic::confidence_bank;
use gnn_designer_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    gd_string_free(s);
    out
}

unsafe fn last_error() -> String {
    let p = gd_last_error();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

#[test]
fn kendall_through_the_abi() {
    let a = [1.0, 2.0, 3.0, 4.0];
    let b = [1.0, 3.0, 2.0, 4.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(gd_kendall_tau(a.as_ptr(), b.as_ptr(), 4, &mut out), GdStatus::Ok);
        assert!((out - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(gd_kendall_tau(a.as_ptr(), b.as_ptr(), 1, &mut out), GdStatus::InvalidInput);
        assert!(last_error().contains('2'));
        assert_eq!(gd_kendall_tau(ptr::null(), b.as_ptr(), 4, &mut out), GdStatus::NullPointer);
    }
}

#[test]
fn architecture_validation_and_errors() {
    unsafe {
        let mut s = ptr::null_mut();
        let k = c("macro:[0,0,1,3]|ops:[gcn,gat,sage,gin]");
        assert_eq!(gd_architecture_validate(k.as_ptr(), &mut s), GdStatus::Ok);
        assert_eq!(take(s), "macro:[0,0,1,3]|ops:[gcn,gat,sage,gin]");
        assert!(gd_last_error().is_null());
        let bad = c("macro:[0,0,1,3]|ops:[gcn,gat,sage,mlp]");
        assert_eq!(gd_architecture_validate(bad.as_ptr(), &mut s), GdStatus::InvalidInput);
        assert!(last_error().contains("mlp"));
        assert_eq!(gd_architecture_validate(ptr::null(), &mut s), GdStatus::NullPointer);
        let invalid_utf8 = [0xffu8, 0];
        assert_eq!(gd_architecture_validate(invalid_utf8.as_ptr().cast(), &mut s), GdStatus::InvalidUtf8);
    }
}

#[test]
fn property_names_are_static_and_bounded() {
    unsafe {
        assert_eq!(CStr::from_ptr(gd_property_name(0)).to_str().unwrap(), "avg_clustering");
        assert_eq!(CStr::from_ptr(gd_property_name(15)).to_str().unwrap(), "label_homophily");
    }
    assert!(gd_property_name(GD_NUM_PROPERTIES).is_null());
}

#[test]
fn dataset_handle_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let g = GraphDataset::new("tri", 3, &[(0, 1), (1, 2), (0, 2)], Features::zeros(3, 2), Some(vec![0, 0, 1])).unwrap();
    save_dataset(&g, dir.path()).unwrap();
    let path = c(dir.path().to_str().unwrap());
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(gd_dataset_load(path.as_ptr(), &mut d), GdStatus::Ok);
        assert_eq!(gd_dataset_num_nodes(d), 3);
        let mut vals = [0.0; GD_NUM_PROPERTIES];
        assert_eq!(gd_properties_compute(d, 1000, 100, 0, vals.as_mut_ptr()), GdStatus::Ok);
        assert_eq!(vals[2], 1.0);
        assert_eq!(vals[0], 1.0);
        assert_eq!(gd_properties_compute(d, 1, 100, 0, vals.as_mut_ptr()), GdStatus::InvalidInput);
        gd_dataset_free(d);
        gd_dataset_free(ptr::null_mut());

        let missing = c("/nonexistent/dataset");
        assert_eq!(gd_dataset_load(missing.as_ptr(), &mut d), GdStatus::Io);
    }
}

fn write_bank(dir: &Path) -> (PathBuf, PathBuf) {
    let t = confidence_bank(0);
    let csv = dir.join("bench.csv");
    t.write_bench_csv(&csv).unwrap();
    let props = dir.join("properties");
    t.write_property_dir(&props).unwrap();
    (csv, props)
}

#[test]
fn bench_confidence_and_design() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, props) = write_bank(dir.path());
    let (csv, props) = (c(csv.to_str().unwrap()), c(props.to_str().unwrap()));
    unsafe {
        let mut b = ptr::null_mut();
        assert_eq!(gd_bench_load(csv.as_ptr(), props.as_ptr(), &mut b), GdStatus::Ok);
        assert_eq!(gd_bench_num_records(b), 250);

        let mut json = ptr::null_mut();
        assert_eq!(gd_confidence_build(b, 4, 5, GD_ER_BEST, &mut json), GdStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(v["selected"][0], "density");
        assert_eq!(v["selected"].as_array().unwrap().len(), 4);
        assert_eq!(gd_confidence_build(b, 4, 5, 7, &mut json), GdStatus::InvalidInput);

        let cfg = c(r#"{"leave_one_out":"cedar","simulate":true,"n_m":5,"max_trials":6,"seed":1}"#);
        let out = dir.path().join("run");
        let out_c = c(out.to_str().unwrap());
        assert_eq!(gd_design_run(b, cfg.as_ptr(), out_c.as_ptr(), &mut json), GdStatus::Ok);
        let s: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(s["eval_count"], 6);
        assert!(out.join("summary.json").exists());

        let leak = c(r#"{"leave_one_out":"cedar","n_m":5,"max_trials":6}"#);
        assert_eq!(gd_design_run(b, leak.as_ptr(), ptr::null(), &mut json), GdStatus::Leakage);
        let bad = c("{not json");
        assert_eq!(gd_design_run(b, bad.as_ptr(), ptr::null(), &mut json), GdStatus::Parse);
        gd_bench_free(b);
    }
}

#[test]
fn header_compiles_and_links_from_c() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/gnn_designer.h");
    assert!(header.exists());
    let src = root.join("tests/c/smoke.c");
    let inc = root.join("include");
    let syntax = Command::new(&cc).arg("-fsyntax-only").arg("-I").arg(&inc).arg(&src).status().unwrap();
    assert!(syntax.success());

    // link against the static library when cargo has produced one next to the test binary
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.parent().unwrap().join("libgnn_designer_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; link step skipped", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let ok = Command::new(&cc)
        .arg("-I")
        .arg(&inc)
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(ok.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
