use std::ffi::{CStr, CString};
use std::ptr;

use cavity_noise_ffi::*;

fn baseline_path() -> CString {
    let p = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/baseline.toml");
    CString::new(p).unwrap()
}

fn last_error() -> String {
    let p = cn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load() -> *mut CnModel {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { cn_model_load(baseline_path().as_ptr(), &mut model) }, CnStatus::Ok);
    assert!(!model.is_null());
    model
}

fn build(model: *const CnModel, label: &str) -> *mut CnBudget {
    let label = CString::new(label).unwrap();
    let mut budget = ptr::null_mut();
    let status = unsafe { cn_budget_build(model, label.as_ptr(), 100.0, 1e6, 200, 1e3, &mut budget) };
    assert_eq!(status, CnStatus::Ok);
    budget
}

fn read(f: impl Fn(*mut f64, usize, *mut usize) -> CnStatus) -> Vec<f64> {
    let mut len = 0;
    assert_eq!(f(ptr::null_mut(), 0, &mut len), CnStatus::Ok);
    let mut v = vec![0.0; len];
    assert_eq!(f(v.as_mut_ptr(), v.len(), &mut len), CnStatus::Ok);
    v
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(cn_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_queries() {
    let model = load();
    let mut gamma = 0.0;
    assert_eq!(unsafe { cn_model_linewidth_hz(model, &mut gamma) }, CnStatus::Ok);
    assert!(gamma > 4e5 && gamma < 7e5);

    let mut n = 0;
    assert_eq!(unsafe { cn_model_operating_point_count(model, &mut n) }, CnStatus::Ok);
    assert_eq!(n, 4);

    let mut f = 0.0;
    let label = CString::new("p220").unwrap();
    assert_eq!(unsafe { cn_model_spring_frequency(model, label.as_ptr(), &mut f) }, CnStatus::Ok);
    assert!(f > 50e3 && f < gamma);
    unsafe { cn_model_free(model) };
}

#[test]
fn budget_arrays_are_consistent() {
    let model = load();
    let budget = build(model, "p220");
    let freqs = read(|o, c, l| unsafe { cn_budget_frequencies(budget, o, c, l) });
    let total = read(|o, c, l| unsafe { cn_budget_total(budget, o, c, l) });
    assert_eq!(freqs.len(), 801);
    assert_eq!(total.len(), freqs.len());

    let mut sum = vec![0.0; freqs.len()];
    for label in ["thermal", "qrpn", "shot", "dark", "crpn"] {
        let name = CString::new(label).unwrap();
        let c = read(|o, cap, l| unsafe { cn_budget_component(budget, name.as_ptr(), o, cap, l) });
        for (s, a) in sum.iter_mut().zip(&c) {
            *s += a * a;
        }
    }
    for (s, t) in sum.iter().zip(&total) {
        assert!((s.sqrt() / t - 1.0).abs() < 1e-12);
    }

    let mut fractions = 0.0;
    for label in ["thermal", "qrpn", "shot", "dark", "crpn"] {
        let name = CString::new(label).unwrap();
        let mut x = 0.0;
        let status = unsafe { cn_budget_band_fraction(budget, name.as_ptr(), 21e3, 22e3, &mut x) };
        assert_eq!(status, CnStatus::Ok);
        fractions += x;
    }
    assert!((fractions - 1.0).abs() < 1e-12);

    let mut rms = 0.0;
    assert_eq!(unsafe { cn_budget_band_rms(budget, 21e3, 22e3, &mut rms) }, CnStatus::Ok);
    assert!(rms > 0.0);

    unsafe {
        cn_budget_free(budget);
        cn_model_free(model);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut model = ptr::null_mut();
    let missing = CString::new("/nonexistent/config.toml").unwrap();
    assert_eq!(unsafe { cn_model_load(missing.as_ptr(), &mut model) }, CnStatus::Io);
    assert!(model.is_null());
    assert!(last_error().contains("nonexistent"));

    assert_eq!(unsafe { cn_model_load(ptr::null(), &mut model) }, CnStatus::NullPointer);

    let model = load();
    assert!(cn_last_error().is_null());

    let bogus = CString::new("p999").unwrap();
    let mut budget = ptr::null_mut();
    let status = unsafe { cn_budget_build(model, bogus.as_ptr(), 100.0, 1e6, 200, 0.0, &mut budget) };
    assert_eq!(status, CnStatus::NotFound);
    assert!(budget.is_null());
    assert!(last_error().contains("p999"));

    let budget = build(model, "p073");
    let mut x = 0.0;
    let status = unsafe { cn_budget_band_rms(budget, 10.0, 50.0, &mut x) };
    assert_eq!(status, CnStatus::Band);

    let mut small = [0.0; 3];
    let mut len = 0;
    let status = unsafe { cn_budget_total(budget, small.as_mut_ptr(), small.len(), &mut len) };
    assert_eq!(status, CnStatus::BufferTooSmall);
    assert_eq!(len, 801);

    let nope = CString::new("seismic").unwrap();
    let status = unsafe { cn_budget_component(budget, nope.as_ptr(), ptr::null_mut(), 0, &mut len) };
    assert_eq!(status, CnStatus::NotFound);

    unsafe {
        cn_budget_free(budget);
        cn_model_free(model);
        cn_model_free(ptr::null_mut());
        cn_budget_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cavity_noise.h")).unwrap();
    for name in [
        "cn_version",
        "cn_last_error",
        "cn_model_load",
        "cn_model_free",
        "cn_model_linewidth_hz",
        "cn_model_operating_point_count",
        "cn_model_spring_frequency",
        "cn_budget_build",
        "cn_budget_free",
        "cn_budget_frequencies",
        "cn_budget_total",
        "cn_budget_component",
        "cn_budget_band_rms",
        "cn_budget_band_fraction",
        "typedef struct CnModel CnModel",
        "typedef struct CnBudget CnBudget",
        "CN_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
