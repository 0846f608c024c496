use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use nonadiab_ffi::*;

const CONFIG: &str = "[model]\nkind = single_avoided\n[method]\nname = ctmqc\n[initial]\nk0 = 25\nn_traj = 32\n";

fn parse(text: &str) -> (NonadiabStatus, *mut NonadiabConfig) {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let status = unsafe { nonadiab_config_parse(text.as_ptr(), &mut cfg) };
    (status, cfg)
}

fn last_error() -> String {
    let p = nonadiab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn ensemble_round_trip() {
    let (status, cfg) = parse(CONFIG);
    assert_eq!(status, NonadiabStatus::Ok);
    let mut ens = ptr::null_mut();
    unsafe {
        assert_eq!(nonadiab_ensemble_new(cfg, &mut ens), NonadiabStatus::Ok);
        assert_eq!(nonadiab_ensemble_len(ens), 32);
        assert_eq!(nonadiab_ensemble_step(ens, 10), NonadiabStatus::Ok);
        let (mut t, mut pops, mut coh) = (0.0, [0.0; 2], -1.0);
        assert_eq!(nonadiab_ensemble_observables(ens, &mut t, &mut pops, &mut coh), NonadiabStatus::Ok);
        assert_eq!(t, 5.0);
        assert!((pops[0] + pops[1] - 1.0).abs() < 1e-12);
        assert!((0.0..=0.25).contains(&coh));
        let mut buf = vec![0.0; 32];
        assert_eq!(nonadiab_ensemble_positions(ens, buf.as_mut_ptr(), buf.len()), NonadiabStatus::Ok);
        assert!(buf.iter().all(|r| r.is_finite() && *r != 0.0));
        assert_eq!(nonadiab_ensemble_positions(ens, buf.as_mut_ptr(), 31), NonadiabStatus::BufferTooSmall);
        nonadiab_ensemble_free(ens);
        nonadiab_config_free(cfg);
    }
}

#[test]
fn same_seed_same_positions() {
    let positions = |seed: u64| {
        let (_, cfg) = parse(CONFIG);
        let mut ens = ptr::null_mut();
        let mut buf = vec![0.0; 32];
        unsafe {
            nonadiab_config_set_seed(cfg, seed);
            nonadiab_ensemble_new(cfg, &mut ens);
            nonadiab_ensemble_step(ens, 20);
            nonadiab_ensemble_positions(ens, buf.as_mut_ptr(), buf.len());
            nonadiab_ensemble_free(ens);
            nonadiab_config_free(cfg);
        }
        buf
    };
    assert_eq!(positions(7), positions(7));
    assert_ne!(positions(7), positions(8));
}

#[test]
fn config_errors_carry_messages() {
    let (status, cfg) = parse("[model]\nkind = nowhere\n");
    assert_eq!(status, NonadiabStatus::Config);
    assert!(cfg.is_null());
    let msg = last_error();
    assert!(msg.contains("line 2"), "{msg}");
    assert!(msg.contains("nowhere"), "{msg}");
}

#[test]
fn null_and_bad_input_are_rejected() {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(nonadiab_config_parse(ptr::null(), &mut cfg), NonadiabStatus::NullPointer);
        assert_eq!(nonadiab_ensemble_step(ptr::null_mut(), 1), NonadiabStatus::NullPointer);
        assert_eq!(nonadiab_ensemble_len(ptr::null()), 0);
        nonadiab_config_free(ptr::null_mut());
        nonadiab_ensemble_free(ptr::null_mut());
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(
            nonadiab_config_parse(bad.as_ptr().cast(), &mut cfg),
            NonadiabStatus::InvalidUtf8
        );
    }
}

#[test]
fn exact_method_has_no_ensemble() {
    let (_, cfg) = parse("[model]\nkind = single_avoided\n[method]\nname = exact\n[initial]\nk0 = 25\n");
    let mut ens = ptr::null_mut();
    unsafe {
        assert_eq!(nonadiab_ensemble_new(cfg, &mut ens), NonadiabStatus::Config);
        assert!(ens.is_null());
        nonadiab_config_free(cfg);
    }
}

#[test]
fn hash_matches_engine() {
    let (_, cfg) = parse(CONFIG);
    let expected = nonadiab::parse_config(CONFIG).unwrap().hash();
    let mut buf = vec![0 as std::ffi::c_char; 65];
    unsafe {
        assert_eq!(nonadiab_config_hash(cfg, buf.as_mut_ptr(), 64), NonadiabStatus::BufferTooSmall);
        assert_eq!(nonadiab_config_hash(cfg, buf.as_mut_ptr(), buf.len()), NonadiabStatus::Ok);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), expected);
        nonadiab_config_free(cfg);
    }
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG.replace("name = ctmqc\n", "name = ctmqc\nt_final = 20\n");
    let (status, cfg) = parse(&text);
    assert_eq!(status, NonadiabStatus::Ok, "{}", last_error());
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(nonadiab_config_set_output_dir(cfg, out.as_ptr()), NonadiabStatus::Ok);
        assert_eq!(nonadiab_run(cfg, 1), NonadiabStatus::Ok);
        nonadiab_config_free(cfg);
    }
    assert!(dir.path().join("series.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn model_energies() {
    let name = CString::new("single_avoided").unwrap();
    let (mut e, mut d) = ([0.0; 2], 0.0);
    unsafe {
        assert_eq!(nonadiab_model_adiabatic(name.as_ptr(), 0.0, &mut e, &mut d), NonadiabStatus::Ok);
    }
    // at the crossing the gap is twice the coupling c = 0.005
    assert!((e[1] - e[0] - 0.01).abs() < 1e-15);
    assert!(d.abs() > 1.0);
    let bogus = CString::new("model_z").unwrap();
    unsafe {
        assert_eq!(nonadiab_model_adiabatic(bogus.as_ptr(), 0.0, &mut e, &mut d), NonadiabStatus::Config);
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(nonadiab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/nonadiab.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "nonadiab_config_parse",
        "nonadiab_config_free",
        "nonadiab_run",
        "nonadiab_ensemble_new",
        "nonadiab_ensemble_step",
        "nonadiab_ensemble_observables",
        "nonadiab_last_error",
        "NONADIAB_STATUS_NUMERICAL",
        "typedef struct NonadiabConfig NonadiabConfig",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).status() else {
        eprintln!("no C compiler found; syntax check skipped");
        return;
    };
    assert!(status.success(), "header does not compile as C");
}
