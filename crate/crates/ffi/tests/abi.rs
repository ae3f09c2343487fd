use std::ffi::{c_char, CStr, CString};
use std::ptr;

use cvqkd_ffi::*;

fn last_error() -> String {
    let p = cvqkd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { cvqkd_string_free(p) };
    s
}

fn set(cfg: *mut CvqkdConfig, k: &str, v: &str) -> CvqkdStatus {
    let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
    unsafe { cvqkd_config_set(cfg, k.as_ptr(), v.as_ptr()) }
}

#[test]
fn run_and_summarise() {
    let cfg = cvqkd_config_new_default();
    assert_eq!(set(cfg, "n_packets", "200"), CvqkdStatus::Ok);
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { cvqkd_run_experiment(cfg, &mut report) }, CvqkdStatus::Ok);
    let mut s = CvqkdSummary::default();
    assert_eq!(unsafe { cvqkd_report_summary(report, &mut s) }, CvqkdStatus::Ok);
    assert_eq!(s.pulses, 200 * 400);
    assert_eq!(s.bits, 200 * 244);
    assert_eq!(s.bit_errors, 0);
    assert_eq!(s.data_rate_bps, 1.22e6);
    assert!((9.5..12.0).contains(&s.q_factor));

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { cvqkd_report_json(report, &mut json) }, CvqkdStatus::Ok);
    let json = take_string(json);
    let direct = cvqkd_core::report::to_canonical_json(
        &cvqkd_core::run_experiment(&cvqkd_core::ExperimentConfig {
            n_packets: 200,
            ..Default::default()
        })
        .unwrap(),
    )
    .unwrap();
    assert_eq!(json, direct);
    unsafe {
        cvqkd_report_free(report);
        cvqkd_config_free(cfg);
    }
}

#[test]
fn keyrate_matches_core() {
    let cfg = cvqkd_config_new_default();
    let mut k = CvqkdKeyRate::default();
    assert_eq!(unsafe { cvqkd_keyrate(cfg, &mut k) }, CvqkdStatus::Ok);
    assert!((k.key_rate_per_pulse - 0.023_006_982_077_375_8).abs() < 1e-12);
    assert!((k.chi_be - 0.439_299_707_656_876_3).abs() < 1e-12);
    assert_eq!(set(cfg, "excess_noise", "0.5"), CvqkdStatus::Ok);
    assert_eq!(unsafe { cvqkd_keyrate(cfg, &mut k) }, CvqkdStatus::Ok);
    assert!(k.key_rate_per_pulse < 0.0);
    assert_eq!(k.key_rate_bps, 0.0);
    unsafe { cvqkd_config_free(cfg) };
}

#[test]
fn errors_map_to_status_codes() {
    let cfg = cvqkd_config_new_default();
    assert_eq!(set(cfg, "no_such_key", "1"), CvqkdStatus::Config);
    assert!(last_error().contains("no_such_key"));
    assert_eq!(set(cfg, "transmittance", "abc"), CvqkdStatus::Config);

    assert_eq!(set(cfg, "n_packets", "2"), CvqkdStatus::Ok);
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { cvqkd_run_experiment(cfg, &mut report) }, CvqkdStatus::InsufficientData);
    assert!(report.is_null());
    assert!(last_error().contains("vacuum"));

    assert_eq!(set(cfg, "n_packets", "20"), CvqkdStatus::Ok);
    assert_eq!(set(cfg, "eta", "1.5"), CvqkdStatus::Ok);
    assert_eq!(unsafe { cvqkd_run_experiment(cfg, &mut report) }, CvqkdStatus::InvalidParameter);

    let mut k = CvqkdKeyRate::default();
    assert_eq!(unsafe { cvqkd_keyrate(ptr::null(), &mut k) }, CvqkdStatus::NullPointer);
    assert_eq!(unsafe { cvqkd_run_experiment(cfg, ptr::null_mut()) }, CvqkdStatus::NullPointer);
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { cvqkd_config_set(cfg, bad.as_ptr().cast(), c"1".as_ptr()) },
        CvqkdStatus::InvalidUtf8
    );
    unsafe {
        cvqkd_config_free(cfg);
        cvqkd_config_free(ptr::null_mut());
        cvqkd_report_free(ptr::null_mut());
        cvqkd_string_free(ptr::null_mut());
    }
}

#[test]
fn config_text_round_trip() {
    let text = CString::new("transmittance = 0.4\nmodulation = qpsk\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { cvqkd_config_from_text(text.as_ptr(), &mut cfg) }, CvqkdStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cvqkd_config_to_text(cfg, &mut out) }, CvqkdStatus::Ok);
    let parsed = cvqkd_core::ExperimentConfig::from_text(&take_string(out)).unwrap();
    assert_eq!(parsed.channel.transmittance, 0.4);
    assert_eq!(parsed.modulation.psk, cvqkd_core::PskOrder::Qpsk);
    unsafe { cvqkd_config_free(cfg) };

    let broken = CString::new("transmittance\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { cvqkd_config_from_text(broken.as_ptr(), &mut cfg) }, CvqkdStatus::Config);
    assert!(cfg.is_null());
}

#[test]
fn ber_and_version() {
    assert!((cvqkd_ber_from_q(4.6) - 2.112_454_702_502_853_4e-6).abs() < 1e-18);
    let v = unsafe { CStr::from_ptr(cvqkd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cvqkd.h")).unwrap();
    for name in [
        "cvqkd_last_error_message",
        "cvqkd_version",
        "cvqkd_config_new_default",
        "cvqkd_config_from_text",
        "cvqkd_config_set",
        "cvqkd_config_to_text",
        "cvqkd_config_free",
        "cvqkd_run_experiment",
        "cvqkd_report_json",
        "cvqkd_report_summary",
        "cvqkd_report_free",
        "cvqkd_keyrate",
        "cvqkd_ber_from_q",
        "cvqkd_string_free",
        "typedef struct CvqkdConfig CvqkdConfig;",
        "CVQKD_STATUS_INSUFFICIENT_DATA = 6",
    ] {
        assert!(h.contains(name), "{name}");
    }
}
