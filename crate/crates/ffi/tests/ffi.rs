use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use gedanken_ffi::*;

fn grid(n: usize, l: f64) -> *mut GdGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { gd_grid_new(n, l, &mut g) }, GdStatus::Ok);
    g
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(gd_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn small_prep() -> GdPreparation {
    GdPreparation {
        sigma: 0.3,
        ..gd_preparation_default()
    }
}

#[test]
fn grid_handles() {
    let g = grid(128, 20.0);
    let (mut dx, mut dk) = (0.0, 0.0);
    assert_eq!(
        unsafe { gd_grid_spacings(g, &mut dx, &mut dk) },
        GdStatus::Ok
    );
    assert_eq!(dx, 0.15625);
    assert!((dk - 2.0 * std::f64::consts::PI / 20.0).abs() < 1e-15);
    unsafe { gd_grid_free(g) };

    let mut bad = ptr::null_mut();
    assert_eq!(
        unsafe { gd_grid_new(9, 20.0, &mut bad) },
        GdStatus::InvalidArgument
    );
    assert!(bad.is_null());
    assert!(last_error().contains("invalid grid"));
    assert_eq!(
        unsafe { gd_grid_new(8, 1.0, ptr::null_mut()) },
        GdStatus::NullPointer
    );
}

#[test]
fn bohr_postselection_round_trip() {
    let g = grid(64, 20.0);
    let mut st = ptr::null_mut();
    assert_eq!(
        unsafe { gd_state_bohr(g, &small_prep(), &mut st) },
        GdStatus::Ok
    );
    assert_eq!(unsafe { gd_state_n_axes(st) }, 3);
    let mut norm = 0.0;
    assert_eq!(unsafe { gd_state_norm_sqr(st, &mut norm) }, GdStatus::Ok);
    assert!((norm - 1.0).abs() < 1e-12);

    let axis = CString::new("diaphragm").unwrap();
    let (mut pair, mut p) = (ptr::null_mut(), 0.0);
    let status = unsafe {
        gd_postselect(
            st,
            axis.as_ptr(),
            GdRep::Momentum,
            0.0,
            0.0,
            &mut pair,
            &mut p,
        )
    };
    assert_eq!(status, GdStatus::Ok);
    assert!(p > 0.0 && p <= 1.0);
    assert_eq!(unsafe { gd_state_n_axes(pair) }, 2);

    let reps = [GdRep::Momentum, GdRep::Momentum];
    let mut dens = ptr::null_mut();
    assert_eq!(
        unsafe { gd_joint_density(pair, reps.as_ptr(), 2, &mut dens) },
        GdStatus::Ok
    );
    let mut fit = GdCorrelation::default();
    assert_eq!(unsafe { gd_ridge_fit(dens, &mut fit) }, GdStatus::Ok);
    assert!((fit.ridge_slope + 1.0).abs() < 0.02);

    let n = unsafe { gd_density_len(dens) };
    assert_eq!(n, 64 * 64);
    let mut small = vec![0.0; 10];
    assert_eq!(
        unsafe { gd_density_values(dens, small.as_mut_ptr(), small.len()) },
        GdStatus::BufferTooSmall
    );
    let mut buf = vec![0.0; n];
    assert_eq!(
        unsafe { gd_density_values(dens, buf.as_mut_ptr(), n) },
        GdStatus::Ok
    );
    let dk = 2.0 * std::f64::consts::PI / 20.0;
    assert!((buf.iter().sum::<f64>() * dk * dk - 1.0).abs() < 1e-10);

    let mut tv = 1.0;
    assert_eq!(
        unsafe { gd_total_variation(dens, dens, &mut tv) },
        GdStatus::Ok
    );
    assert_eq!(tv, 0.0);

    let wrong = CString::new("nowhere").unwrap();
    let status = unsafe {
        gd_postselect(
            st,
            wrong.as_ptr(),
            GdRep::Momentum,
            0.0,
            0.0,
            &mut pair,
            &mut p,
        )
    };
    assert_eq!(status, GdStatus::InvalidArgument);
    assert!(last_error().contains("nowhere"));

    unsafe {
        gd_density_free(dens);
        gd_state_free(pair);
        gd_state_free(st);
        gd_grid_free(g);
    }
}

#[test]
fn wrapped_preparation_reports_status() {
    let g = grid(64, 20.0);
    let mut st = ptr::null_mut();
    let prep = GdPreparation {
        d: 15.0,
        ..small_prep()
    };
    assert_eq!(
        unsafe { gd_state_epr(g, &prep, &mut st) },
        GdStatus::Wrapped
    );
    assert!(st.is_null());
    unsafe { gd_grid_free(g) };
}

#[test]
fn doppler_and_scenarios() {
    let mut out = GdCollision::default();
    assert_eq!(
        unsafe { gd_doppler_collide(1.0, 1e-3, 1e9, &mut out) },
        GdStatus::Ok
    );
    assert!((out.shift_exact + 2e-3).abs() < 3e-6);
    assert_eq!(out.shift_doppler, -2e-3);
    assert_eq!(
        unsafe { gd_doppler_collide(1.0, 0.5, 1e9, &mut out) },
        GdStatus::InvalidArgument
    );

    let scenario = CString::new("bohr_flawed").unwrap();
    let yaml = CString::new("grid: { n_points: 64 }\npreparation: { sigma: 0.3 }\n").unwrap();
    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { gd_run_scenario(scenario.as_ptr(), yaml.as_ptr(), &mut json) },
        GdStatus::Ok
    );
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { gd_string_free(json) };
    assert!(text.contains("\"scenario\": \"bohr_flawed\""));
    assert!(text.contains("x2_peak"));

    let bad = CString::new("grid: [").unwrap();
    assert_eq!(
        unsafe { gd_run_scenario(scenario.as_ptr(), bad.as_ptr(), &mut json) },
        GdStatus::Config
    );
    let doppler = CString::new("doppler").unwrap();
    assert_eq!(
        unsafe { gd_run_scenario(doppler.as_ptr(), ptr::null(), &mut json) },
        GdStatus::Config
    );
}

#[test]
fn c_program_links_against_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libgedanken_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new(cc)
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| {
            Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .ok_or(())
}
