//! Exercises the C entry points through raw pointers, as a C caller would.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use qipsolve_ffi::*;

fn last_error() -> String {
    let p = qip_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn named_solve_and_report_getters() {
    unsafe {
        let name = CString::new("trace-inverse-n4").unwrap();
        let mut problem = ptr::null_mut();
        assert_eq!(qip_problem_named(name.as_ptr(), &mut problem), QipStatus::Ok);
        assert_eq!(qip_problem_order(problem), 4);

        let mut report = ptr::null_mut();
        assert_eq!(qip_solve(problem, ptr::null(), &mut report), QipStatus::Ok);
        assert_eq!(qip_report_termination(report), QipTermination::Converged);
        let f = qip_report_f_min(report);
        assert!((f - 16.0).abs() <= 16.0 * 1e-5, "f_min {f}");
        assert!(qip_report_total_newton(report) > 0);
        assert!(qip_report_final_beta(report) >= 4.0 * 4.0 / 1e-8);

        let mut needed = 0usize;
        assert_eq!(
            qip_report_x_star(report, ptr::null_mut(), 0, &mut needed),
            QipStatus::BufferTooSmall
        );
        assert_eq!(needed, 16);
        let mut x = vec![0.0; needed];
        assert_eq!(qip_report_x_star(report, x.as_mut_ptr(), x.len(), ptr::null_mut()), QipStatus::Ok);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 0.25 } else { 0.0 };
                assert!((x[4 * i + j] - expect).abs() <= 1e-6);
            }
        }

        let json = qip_report_to_json(report);
        assert!(!json.is_null());
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["termination"], "Converged");
        qip_string_free(json);

        qip_report_free(report);
        qip_problem_free(problem);
    }
}

#[test]
fn generate_save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = CString::new(dir.path().join("p.json").to_str().unwrap()).unwrap();
    unsafe {
        let dims = QipDims { n: 3, ..QipDims::default() };
        let mut a = ptr::null_mut();
        assert_eq!(qip_problem_generate(QipProblemKind::Qkd, dims, 5, &mut a), QipStatus::Ok);
        assert_eq!(qip_problem_save(a, file.as_ptr()), QipStatus::Ok);
        let mut b = ptr::null_mut();
        assert_eq!(qip_problem_load(file.as_ptr(), &mut b), QipStatus::Ok);
        assert_eq!(qip_problem_order(b), 3);

        let mut config = qip_config_default();
        config.no_barrier = true;
        let mut report = ptr::null_mut();
        assert_eq!(qip_solve(b, &config, &mut report), QipStatus::Ok);
        assert!(qip_report_f_min(report).is_finite());
        qip_report_free(report);
        qip_problem_free(a);
        qip_problem_free(b);
    }
}

#[test]
fn failures_set_status_and_message() {
    unsafe {
        let mut problem = ptr::null_mut();
        let bad = CString::new("no-such-instance").unwrap();
        assert_eq!(qip_problem_named(bad.as_ptr(), &mut problem), QipStatus::NotFound);
        assert!(problem.is_null());
        assert!(last_error().contains("no-such-instance"));

        let missing = CString::new("/nonexistent/p.json").unwrap();
        assert_eq!(qip_problem_load(missing.as_ptr(), &mut problem), QipStatus::Io);

        assert_eq!(qip_problem_named(ptr::null(), &mut problem), QipStatus::NullPointer);
        assert_eq!(qip_problem_named(bad.as_ptr(), ptr::null_mut()), QipStatus::NullPointer);

        let dims = QipDims::default();
        assert_eq!(
            qip_problem_generate(QipProblemKind::Type1, dims, 0, &mut problem),
            QipStatus::Validation
        );

        // heuristic mode is QKD-only
        let name = CString::new("trace-inverse-n3").unwrap();
        assert_eq!(qip_problem_named(name.as_ptr(), &mut problem), QipStatus::Ok);
        let mut config = qip_config_default();
        config.no_barrier = true;
        let mut report = ptr::null_mut();
        assert_eq!(qip_solve(problem, &config, &mut report), QipStatus::InvalidArgument);
        config.no_barrier = false;
        config.epsilon = -1.0;
        assert_eq!(qip_solve(problem, &config, &mut report), QipStatus::Validation);
        assert!(report.is_null());
        qip_problem_free(problem);

        // null handles give sentinels, not crashes
        assert!(qip_report_f_min(ptr::null()).is_nan());
        assert_eq!(qip_report_total_newton(ptr::null()), 0);
        assert!(qip_report_to_json(ptr::null()).is_null());
        qip_problem_free(ptr::null_mut());
        qip_report_free(ptr::null_mut());
        qip_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(qip_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let probe = tempfile::Builder::new().suffix(".c").tempfile().unwrap();
    std::fs::write(
        probe.path(),
        "#include \"qipsolve.h\"\n\
         int main(void) {\n\
           QipSolverConfig c = qip_config_default();\n\
           QipProblem *p = 0;\n\
           QipStatus s = qip_problem_named(\"qkd-toy\", &p);\n\
           (void)c; (void)s;\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&header)
        .arg(probe.path())
        .output()
    else {
        eprintln!("no C compiler available, skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
