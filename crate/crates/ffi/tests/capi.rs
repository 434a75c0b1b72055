use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use sagin_ffi::*;

fn last_error() -> String {
    let p = sagin_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn quick_options() -> SaginRunOptions {
    SaginRunOptions {
        gwo_population: 12,
        gwo_iterations: 20,
        ..sagin_run_options_default()
    }
}

fn generate(seed: u64, devices: usize) -> *mut SaginScenario {
    let mut s = ptr::null_mut();
    let status = unsafe { sagin_scenario_generate(seed, devices, 2, 40, &mut s) };
    assert_eq!(status, SaginStatus::Ok);
    assert!(!s.is_null());
    s
}

#[test]
fn run_round_trip() {
    let s = generate(3, 12);
    assert_eq!(unsafe { sagin_scenario_device_count(s) }, 12);
    let bits = unsafe { sagin_scenario_total_bits(s) };
    assert!(bits > 0);

    let opts = quick_options();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { sagin_run(s, &opts, &mut run) }, SaginStatus::Ok);
    assert!(sagin_last_error_message().is_null());

    let mut report = SaginEnergyReport::default();
    assert_eq!(
        unsafe { sagin_run_report(run, &mut report) },
        SaginStatus::Ok
    );
    let sum = report.hover_energy_p1
        + report.flight_energy
        + report.device_energy
        + report.sat_compute_energy
        + report.hover_energy_p2;
    assert!((sum - report.total).abs() <= 1e-9 * report.total);

    let mut distance = 0.0;
    assert_eq!(
        unsafe { sagin_run_flight_distance(run, &mut distance) },
        SaginStatus::Ok
    );
    // flight energy is P_f times fly time at 10 m/s
    assert!((report.flight_energy - 240.0 * distance / 10.0).abs() <= 1e-9 * report.flight_energy);

    let n = unsafe { sagin_run_decision_count(run) };
    assert!(n >= 1);
    let mut offloaded = 0u64;
    for i in 0..n {
        let mut d = SaginDecision::default();
        assert_eq!(
            unsafe { sagin_run_decision(run, i, &mut d) },
            SaginStatus::Ok
        );
        assert!(d.t_offload >= d.t_request);
        assert!(d.rate > 0.0);
        offloaded += d.data_bits;
    }
    assert_eq!(offloaded, bits);

    let mut d = SaginDecision::default();
    assert_eq!(
        unsafe { sagin_run_decision(run, n, &mut d) },
        SaginStatus::OutOfRange
    );
    assert!(last_error().contains("out of range"));

    let mut violations = usize::MAX;
    assert_eq!(
        unsafe { sagin_run_violation_count(run, &mut violations) },
        SaginStatus::Ok
    );
    assert_eq!(violations, 0);

    unsafe {
        sagin_run_free(run);
        sagin_scenario_free(s);
    }
}

#[test]
fn identical_inputs_give_identical_reports() {
    let reports: Vec<SaginEnergyReport> = (0..2)
        .map(|_| {
            let s = generate(9, 10);
            let mut run = ptr::null_mut();
            let opts = quick_options();
            assert_eq!(unsafe { sagin_run(s, &opts, &mut run) }, SaginStatus::Ok);
            let mut r = SaginEnergyReport::default();
            assert_eq!(unsafe { sagin_run_report(run, &mut r) }, SaginStatus::Ok);
            unsafe {
                sagin_run_free(run);
                sagin_scenario_free(s);
            }
            r
        })
        .collect();
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn snapshot_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("scenario.toml").to_str().unwrap()).unwrap();
    let s = generate(5, 8);
    assert_eq!(
        unsafe { sagin_scenario_save(s, path.as_ptr()) },
        SaginStatus::Ok
    );
    let mut loaded = ptr::null_mut();
    assert_eq!(
        unsafe { sagin_scenario_load(path.as_ptr(), &mut loaded) },
        SaginStatus::Ok
    );
    assert_eq!(unsafe { sagin_scenario_total_bits(loaded) }, unsafe {
        sagin_scenario_total_bits(s)
    });

    let mut run = ptr::null_mut();
    let opts = quick_options();
    assert_eq!(
        unsafe { sagin_run(loaded, &opts, &mut run) },
        SaginStatus::Ok
    );
    let solution = CString::new(dir.path().join("solution.toml").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { sagin_run_save_solution(run, solution.as_ptr()) },
        SaginStatus::Ok
    );
    let text = std::fs::read_to_string(dir.path().join("solution.toml")).unwrap();
    assert!(text.contains("scheme = \"proposed\""));
    unsafe {
        sagin_run_free(run);
        sagin_scenario_free(loaded);
        sagin_scenario_free(s);
    }
}

#[test]
fn config_file_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "seed = 4\ndevices = 6\nuavs = 1\nsats = 10\n").unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { sagin_scenario_from_config(path.as_ptr(), &mut s) },
        SaginStatus::Ok
    );
    assert_eq!(unsafe { sagin_scenario_device_count(s) }, 6);
    unsafe { sagin_scenario_free(s) };

    std::fs::write(&cfg, "devices = \"many\"\n").unwrap();
    let mut bad = ptr::null_mut();
    assert_eq!(
        unsafe { sagin_scenario_from_config(path.as_ptr(), &mut bad) },
        SaginStatus::Config
    );
    assert!(bad.is_null());
}

#[test]
fn errors_are_reported() {
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { sagin_scenario_generate(1, 0, 1, 1, &mut s) },
        SaginStatus::InvalidArgument
    );
    assert!(s.is_null());
    assert!(last_error().contains("counts"));

    assert_eq!(
        unsafe { sagin_scenario_generate(1, 5, 1, 1, ptr::null_mut()) },
        SaginStatus::NullPointer
    );

    let missing = CString::new("/nonexistent/sagin/scenario.toml").unwrap();
    assert_eq!(
        unsafe { sagin_scenario_load(missing.as_ptr(), &mut s) },
        SaginStatus::Io
    );
    assert_eq!(
        unsafe { sagin_scenario_load(ptr::null(), &mut s) },
        SaginStatus::NullPointer
    );

    let mut run = ptr::null_mut();
    assert_eq!(
        unsafe { sagin_run(ptr::null(), ptr::null(), &mut run) },
        SaginStatus::NullPointer
    );

    let s = generate(2, 6);
    let opts = SaginRunOptions {
        scheme: 7,
        ..quick_options()
    };
    assert_eq!(
        unsafe { sagin_run(s, &opts, &mut run) },
        SaginStatus::InvalidArgument
    );
    assert!(last_error().contains("scheme"));
    let opts = SaginRunOptions {
        gwo_population: 1,
        ..quick_options()
    };
    assert_eq!(
        unsafe { sagin_run(s, &opts, &mut run) },
        SaginStatus::InvalidArgument
    );
    assert!(run.is_null());

    // null handles are tolerated by counters and free functions
    assert_eq!(unsafe { sagin_scenario_device_count(ptr::null()) }, 0);
    assert_eq!(unsafe { sagin_run_decision_count(ptr::null()) }, 0);
    unsafe {
        sagin_scenario_free(ptr::null_mut());
        sagin_run_free(ptr::null_mut());
        sagin_scenario_free(s);
    }
}

#[test]
fn errors_are_per_thread() {
    let mut s = ptr::null_mut();
    assert_ne!(
        unsafe { sagin_scenario_generate(1, 0, 1, 1, &mut s) },
        SaginStatus::Ok
    );
    let other = std::thread::spawn(|| sagin_last_error_message().is_null())
        .join()
        .unwrap();
    assert!(other);
    assert!(!sagin_last_error_message().is_null());
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(sagin_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/sagin.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "sagin_scenario_generate",
        "sagin_run_report",
        "sagin_run_decision",
        "sagin_last_error_message",
        "SAGIN_STATUS_OUT_OF_RANGE",
        "SAGIN_SCHEME_F_SCHEME",
        "typedef struct SaginRun SaginRun",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"sagin.h\"\n\
         int main(void) {\n\
           SaginScenario *s = 0;\n\
           SaginRunOptions o = sagin_run_options_default();\n\
           enum SaginStatus st = sagin_scenario_generate(1, 10, 1, 20, &s);\n\
           (void)o; sagin_scenario_free(s);\n\
           return st == SAGIN_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let include = header.parent().unwrap();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(include)
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(e) => eprintln!("skipping {compiler} check: {e}"),
        }
    }
}
