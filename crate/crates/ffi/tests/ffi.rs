use std::ffi::{CStr, CString};
use std::ptr;

use eccm_ffi::*;

const LEVELS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
const ROWS: [f64; 16] = [
    0.3878, 0.3215, 0.1858, 0.1049, //
    0.2980, 0.3617, 0.2146, 0.1256, //
    0.2040, 0.2583, 0.3307, 0.2070, //
    0.1029, 0.1408, 0.2140, 0.5422,
];

fn last_error() -> String {
    let p = eccm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn reference_channel() -> *mut EccmChannel {
    let mut ch = ptr::null_mut();
    let status = unsafe { eccm_channel_new(LEVELS.as_ptr(), 4, ROWS.as_ptr(), &mut ch) };
    assert_eq!(status, EccmStatus::Ok);
    assert!(!ch.is_null());
    ch
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(eccm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn structure_of_reference_channel() {
    let ch = reference_channel();
    let (mut tp2, mut tail) = (false, false);
    let status = unsafe { eccm_channel_check_structure(ch, &mut tp2, &mut tail) };
    assert_eq!(status, EccmStatus::Ok);
    assert!(tp2 && tail);
    unsafe { eccm_channel_free(ch) };
}

#[test]
fn solve_matches_known_contract() {
    let ch = reference_channel();
    let mut sol = ptr::null_mut();
    let status = unsafe { eccm_solve_pap(ch, 100.0, 1e4, 1.0, EccmSolveMode::Full, &mut sol) };
    assert_eq!(status, EccmStatus::Ok);

    let mut summary = EccmSolutionSummary::default();
    assert_eq!(
        unsafe { eccm_solution_summary(sol, &mut summary) },
        EccmStatus::Ok
    );
    assert_eq!(summary.j_star_index, 0);
    assert_eq!(summary.j_star, 1.0);
    assert!((summary.radar_value - 65.02028).abs() < 1e-4);
    assert!(summary.kkt_residual <= 1e-6);

    let n = unsafe { eccm_solution_size(sol) };
    assert_eq!(n, 4);
    let mut x = vec![0.0; n];
    let mut pi = vec![0.0; n];
    assert_eq!(
        unsafe { eccm_solution_x_star(sol, x.as_mut_ptr(), n) },
        EccmStatus::Ok
    );
    assert_eq!(
        unsafe { eccm_solution_pi_star(sol, pi.as_mut_ptr(), n) },
        EccmStatus::Ok
    );
    for (xi, pi) in x.iter().zip(&pi) {
        assert!((xi.exp() - pi).abs() <= 1e-12 * pi.abs().max(1.0));
    }

    let mut short = [0.0; 2];
    let status = unsafe { eccm_solution_x_star(sol, short.as_mut_ptr(), 2) };
    assert_eq!(status, EccmStatus::BufferTooSmall);
    assert!(last_error().contains("need 4"));

    unsafe {
        eccm_solution_free(sol);
        eccm_channel_free(ch);
    }
}

#[test]
fn fixed_level_solve() {
    let ch = reference_channel();
    let mut sol = ptr::null_mut();
    let status =
        unsafe { eccm_solve_level(ch, 100.0, 1e4, 1.0, 3, EccmSolveMode::Relaxed, &mut sol) };
    assert_eq!(status, EccmStatus::Ok);
    let mut summary = EccmSolutionSummary::default();
    unsafe { eccm_solution_summary(sol, &mut summary) };
    assert_eq!(summary.j_star_index, 3);
    assert!((summary.radar_value - 37.15561).abs() < 1e-4);
    unsafe {
        eccm_solution_free(sol);
        eccm_channel_free(ch);
    }
}

#[test]
fn invalid_inputs_report_status_and_message() {
    let mut ch = ptr::null_mut();
    let bad = [0.9, 0.0, 0.0, 1.0];
    let status = unsafe { eccm_channel_new(LEVELS.as_ptr(), 2, bad.as_ptr(), &mut ch) };
    assert_eq!(status, EccmStatus::InvalidArgument);
    assert!(ch.is_null());
    assert!(!last_error().is_empty());

    let status = unsafe { eccm_channel_new(ptr::null(), 4, ROWS.as_ptr(), &mut ch) };
    assert_eq!(status, EccmStatus::NullPointer);
    assert!(last_error().contains("levels"));

    let mut sol = ptr::null_mut();
    let status =
        unsafe { eccm_solve_pap(ptr::null(), 100.0, 1e4, 1.0, EccmSolveMode::Full, &mut sol) };
    assert_eq!(status, EccmStatus::NullPointer);

    let ch = reference_channel();
    let status = unsafe { eccm_solve_pap(ch, -1.0, 1e4, 1.0, EccmSolveMode::Full, &mut sol) };
    assert_eq!(status, EccmStatus::InvalidArgument);
    let status = unsafe { eccm_solve_level(ch, 100.0, 1e4, 1.0, 9, EccmSolveMode::Full, &mut sol) };
    assert_eq!(status, EccmStatus::InvalidArgument);

    // success clears the previous message
    let (mut a, mut b) = (false, false);
    unsafe { eccm_channel_check_structure(ch, &mut a, &mut b) };
    assert!(eccm_last_error_message().is_null());
    unsafe { eccm_channel_free(ch) };

    // freeing NULL is a no-op
    unsafe {
        eccm_channel_free(ptr::null_mut());
        eccm_solution_free(ptr::null_mut());
        eccm_trace_free(ptr::null_mut());
    }
}

#[test]
fn scalar_riccati() {
    // a = 1, q = 1, c = 1, snr = 1: Σ = (1 + √5) / 2
    let one = [1.0];
    let mut lambda = 0.0;
    let mut sigma = [0.0];
    let status = unsafe {
        eccm_solve_are_barrage(
            one.as_ptr(),
            one.as_ptr(),
            one.as_ptr(),
            1,
            1,
            1.0,
            &mut lambda,
            sigma.as_mut_ptr(),
        )
    };
    assert_eq!(status, EccmStatus::Ok);
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((lambda - golden).abs() < 1e-9);
    assert!((sigma[0] - golden).abs() < 1e-9);

    let status = unsafe {
        eccm_solve_are_barrage(
            one.as_ptr(),
            one.as_ptr(),
            one.as_ptr(),
            1,
            1,
            -1.0,
            &mut lambda,
            ptr::null_mut(),
        )
    };
    assert_eq!(status, EccmStatus::InvalidArgument);
}

#[test]
fn simulate_from_json() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/barrage.json");
    let text = CString::new(std::fs::read_to_string(path).unwrap()).unwrap();
    let mut trace = ptr::null_mut();
    let status = unsafe { eccm_simulate_json(text.as_ptr(), &mut trace) };
    assert_eq!(status, EccmStatus::Ok, "{}", last_error());
    let len = unsafe { eccm_trace_len(trace) };
    assert_eq!(len, 32);

    let mut first = EccmRecord::default();
    let mut last = EccmRecord::default();
    unsafe {
        assert_eq!(eccm_trace_record(trace, 0, &mut first), EccmStatus::Ok);
        assert_eq!(eccm_trace_record(trace, len - 1, &mut last), EccmStatus::Ok);
    }
    assert_eq!((first.t, first.n), (1, 1));
    assert_eq!((last.t, last.n), (4, 8));
    assert!((last.lambda_max - 4.3821).abs() < 1e-3);

    let mut r = EccmRecord::default();
    let status = unsafe { eccm_trace_record(trace, len, &mut r) };
    assert_eq!(status, EccmStatus::InvalidArgument);
    unsafe { eccm_trace_free(trace) };
}

#[test]
fn malformed_json_is_a_config_error() {
    let text = CString::new("{ not json").unwrap();
    let mut trace = ptr::null_mut();
    let status = unsafe { eccm_simulate_json(text.as_ptr(), &mut trace) };
    assert_eq!(status, EccmStatus::Config);
    assert!(trace.is_null());
    assert!(last_error().contains("line 1"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/eccm.h");
    for name in [
        "eccm_version",
        "eccm_last_error_message",
        "eccm_channel_new",
        "eccm_channel_free",
        "eccm_channel_check_structure",
        "eccm_solve_pap",
        "eccm_solve_level",
        "eccm_solution_free",
        "eccm_solution_size",
        "eccm_solution_summary",
        "eccm_solution_x_star",
        "eccm_solution_pi_star",
        "eccm_solve_are_barrage",
        "eccm_simulate_json",
        "eccm_trace_len",
        "eccm_trace_record",
        "eccm_trace_free",
        "typedef struct EccmChannel EccmChannel",
        "ECCM_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
