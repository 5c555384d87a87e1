use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use qumode_ffi::*;

fn last_error() -> String {
    let p = qumode_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn spectrum_round_trip() {
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(qumode_spectrum_modular(15, 2, &mut spec), QumodeStatus::Ok);
        let mut len = 0;
        assert_eq!(qumode_spectrum_len(spec, &mut len), QumodeStatus::Ok);
        assert_eq!(len, 4);

        let mut total = 0;
        for i in 0..len {
            let (mut phase, mut mult) = (0.0, 0);
            assert_eq!(qumode_spectrum_entry(spec, i, &mut phase, &mut mult), QumodeStatus::Ok);
            total += mult;
        }
        assert_eq!(total, 16);

        let (mut phase, mut mult) = (0.0, 0);
        assert_eq!(qumode_spectrum_entry(spec, 9, &mut phase, &mut mult), QumodeStatus::InvalidArgument);

        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(qumode_spectrum_trace(spec, 1.0, &mut re, &mut im), QumodeStatus::Ok);
        assert!((re - 0.125).abs() < 1e-12 && im.abs() < 1e-12);
        qumode_spectrum_free(spec);
    }
}

#[test]
fn json_and_phase_constructors() {
    unsafe {
        let json = CString::new(r#"{"n": 1, "entries": [{"phase": 0.5, "mult": 1}, {"phase": 1.5, "mult": 1}]}"#).unwrap();
        let mut spec = ptr::null_mut();
        assert_eq!(qumode_spectrum_from_json(json.as_ptr(), &mut spec), QumodeStatus::Ok);
        let mut p = 0.0;
        assert_eq!(qumode_success_probability(spec, 10.0, 1.0, 0.1, &mut p), QumodeStatus::Ok);
        assert!((p - qumode::special::erf(1.0)).abs() < 1e-12);
        qumode_spectrum_free(spec);

        let phases = [0.0, 1.0];
        let mults = [1u64, 2];
        assert_eq!(
            qumode_spectrum_from_phases(2, phases.as_ptr(), mults.as_ptr(), 2, &mut spec),
            QumodeStatus::InvalidArgument
        );
        assert!(last_error().contains("sum to 3"));
    }
}

#[test]
fn sampling_matches_library() {
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(qumode_spectrum_modular(21, 2, &mut spec), QumodeStatus::Ok);
        let mut mix = ptr::null_mut();
        assert_eq!(qumode_mixture_squeezed(spec, 3.0, 1.0, 1.0, &mut mix), QumodeStatus::Ok);
        let mut buf = vec![0.0; 1000];
        assert_eq!(qumode_mixture_sample(mix, 1000, 9, buf.as_mut_ptr()), QumodeStatus::Ok);

        let lib_spec = qumode::spectrum::modular_spectrum(21, 2).unwrap();
        let psi = qumode::qumode::QumodeWavefunction::squeezed(3.0).unwrap();
        let lib_mix = qumode::qumode::momentum_distribution(&lib_spec, &psi, 1.0).unwrap();
        assert_eq!(buf, qumode::qumode::sample_momentum(&lib_mix, 1000, 9).unwrap());

        let mut d = 0.0;
        assert_eq!(qumode_mixture_density(mix, 0.0, &mut d), QumodeStatus::Ok);
        assert_eq!(d, lib_mix.density_at(0.0));

        assert_eq!(qumode_mixture_coherent(spec, 1.0, 1.0, 1.0, 1.0, &mut mix), QumodeStatus::Ok);
        qumode_mixture_free(mix);
        qumode_spectrum_free(spec);
    }
}

#[test]
fn scalar_entry_points() {
    unsafe {
        let mut n = 0;
        assert_eq!(qumode_required_samples(0.05, 0.05, 1.0, &mut n), QumodeStatus::Ok);
        assert_eq!(n, 452);

        let (mut found, mut m, mut r) = (false, 0, 0);
        assert_eq!(qumode_continued_fraction(0.333, 15, &mut found, &mut m, &mut r), QumodeStatus::Ok);
        assert!(found && (m, r) == (1, 3));
        assert_eq!(qumode_continued_fraction(1.5, 15, &mut found, &mut m, &mut r), QumodeStatus::InvalidArgument);

        let mut order = 0;
        assert_eq!(qumode_order(35, 2, &mut order), QumodeStatus::Ok);
        assert_eq!(order, 12);

        let (mut p, mut q) = (0, 0);
        assert_eq!(qumode_factor(15, 256.0, 1.0, 1000, 3, &mut p, &mut q), QumodeStatus::Ok);
        assert_eq!((p, q), (3, 5));
        assert_eq!(qumode_factor(17, 256.0, 1.0, 1000, 3, &mut p, &mut q), QumodeStatus::Rejected);
        assert!(last_error().contains("prime"));
    }
}

#[test]
fn null_pointers_and_errors() {
    unsafe {
        qumode_clear_error();
        assert!(qumode_last_error().is_null());
        assert_eq!(qumode_spectrum_modular(15, 2, ptr::null_mut()), QumodeStatus::NullPointer);
        assert!(last_error().contains("out_spec"));
        let mut len = 0;
        assert_eq!(qumode_spectrum_len(ptr::null(), &mut len), QumodeStatus::NullPointer);

        let mut spec = ptr::null_mut();
        assert_eq!(qumode_spectrum_modular(15, 5, &mut spec), QumodeStatus::SharedFactor);
        assert!(spec.is_null());
        assert!(last_error().contains("gcd(5, 15) = 5"));

        qumode_spectrum_free(ptr::null_mut());
        qumode_mixture_free(ptr::null_mut());
        let v = CStr::from_ptr(qumode_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps/
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_smoke_program() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libqumode_ffi.a");
    let have_cc = Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success());
    if !have_cc || !lib.exists() || !cfg!(unix) {
        eprintln!("skipping C smoke test: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke program failed to compile");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
