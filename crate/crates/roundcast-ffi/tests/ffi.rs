//! Exercises the C entry points from Rust: status codes, last-error text,
//! and agreement with the core library's own prediction path.

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use roundcast::checkpoint::save_checkpoint;
use roundcast::data::Round;
use roundcast::optim::{predict_scores, TrainConfig};
use roundcast::tensor::SeededRng;
use roundcast_ffi::{
    roundcast_last_error, roundcast_model_free, roundcast_model_load, roundcast_predict,
    RoundcastModel, RoundcastStatus,
};

fn checkpoint_file(dir: &Path, arch: &str) -> PathBuf {
    let config = TrainConfig::for_architecture(arch).unwrap();
    let mut rng = SeededRng::new(7);
    let model = config.build_model(&mut rng).unwrap();
    let path = dir.join(format!("{arch}.json"));
    save_checkpoint(&path, &model, &config).unwrap();
    path
}

fn load(path: &Path) -> *mut RoundcastModel {
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle: *mut RoundcastModel = ptr::null_mut();
    let status = unsafe { roundcast_model_load(c_path.as_ptr(), &mut handle) };
    assert_eq!(status, RoundcastStatus::Ok, "{}", last_error());
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(roundcast_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn ramp(len: usize) -> (Vec<f64>, Vec<f64>) {
    let p1: Vec<f64> = (0..len).map(|i| 40.0 * i as f64 / len as f64).collect();
    let p2: Vec<f64> = (0..len).map(|i| 70.0 * i as f64 / len as f64).collect();
    (p1, p2)
}

#[test]
fn predict_matches_the_library_path() {
    let dir = tempfile::tempdir().unwrap();
    for arch in ["lstm", "transformer"] {
        let path = checkpoint_file(dir.path(), arch);
        let handle = load(&path);
        let (p1, p2) = ramp(12);

        let mut probability = f64::NAN;
        let status = unsafe {
            roundcast_predict(handle, p1.as_ptr(), p2.as_ptr(), 12, &mut probability)
        };
        assert_eq!(status, RoundcastStatus::Ok, "{}", last_error());
        assert!(probability > 0.0 && probability < 1.0, "{arch}: {probability}");

        let round = Round {
            sheet_id: "ffi".to_string(),
            round_index: 0,
            features: p1.iter().copied().zip(p2.iter().copied()).collect(),
            winner: 1,
        };
        let (mut model, config) = roundcast::checkpoint::load_checkpoint(&path).unwrap();
        let expected = predict_scores(&mut model, &[round], config.batch_size).unwrap()[0];
        assert_eq!(probability, expected, "{arch}");

        unsafe { roundcast_model_free(handle) };
    }
}

#[test]
fn load_reports_missing_and_malformed_files() {
    let dir = tempfile::tempdir().unwrap();

    let missing = CString::new(dir.path().join("absent.json").to_str().unwrap()).unwrap();
    let mut handle: *mut RoundcastModel = ptr::null_mut();
    let status = unsafe { roundcast_model_load(missing.as_ptr(), &mut handle) };
    assert_eq!(status, RoundcastStatus::Io);
    assert!(handle.is_null());
    assert!(!last_error().is_empty());

    let corrupt = dir.path().join("corrupt.json");
    std::fs::write(&corrupt, "{not json").unwrap();
    let c_path = CString::new(corrupt.to_str().unwrap()).unwrap();
    let status = unsafe { roundcast_model_load(c_path.as_ptr(), &mut handle) };
    assert_eq!(status, RoundcastStatus::Format);
    assert!(handle.is_null());
    assert!(last_error().contains("format error"), "{}", last_error());
}

#[test]
fn null_and_range_violations_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let handle = load(&checkpoint_file(dir.path(), "lstm"));
    let (p1, p2) = ramp(4);
    let mut probability = 0.0;

    let status = unsafe { roundcast_model_load(ptr::null(), &mut (ptr::null_mut())) };
    assert_eq!(status, RoundcastStatus::NullArgument);
    let status = unsafe {
        roundcast_predict(ptr::null_mut(), p1.as_ptr(), p2.as_ptr(), 4, &mut probability)
    };
    assert_eq!(status, RoundcastStatus::NullArgument);
    let status =
        unsafe { roundcast_predict(handle, ptr::null(), p2.as_ptr(), 4, &mut probability) };
    assert_eq!(status, RoundcastStatus::NullArgument);
    let status = unsafe {
        roundcast_predict(handle, p1.as_ptr(), p2.as_ptr(), 4, ptr::null_mut())
    };
    assert_eq!(status, RoundcastStatus::NullArgument);

    let status = unsafe {
        roundcast_predict(handle, p1.as_ptr(), p2.as_ptr(), 0, &mut probability)
    };
    assert_eq!(status, RoundcastStatus::InvalidArgument);

    let bad = [10.0, f64::NAN, 20.0, 30.0];
    let status = unsafe {
        roundcast_predict(handle, bad.as_ptr(), p2.as_ptr(), 4, &mut probability)
    };
    assert_eq!(status, RoundcastStatus::InvalidArgument);
    assert!(last_error().contains("[0, 100]"), "{}", last_error());

    let oversized = [10.0, 120.0, 20.0, 30.0];
    let status = unsafe {
        roundcast_predict(handle, p1.as_ptr(), oversized.as_ptr(), 4, &mut probability)
    };
    assert_eq!(status, RoundcastStatus::InvalidArgument);

    unsafe { roundcast_model_free(handle) };
    unsafe { roundcast_model_free(ptr::null_mut()) };
}

#[test]
fn transformer_capacity_is_surfaced() {
    let dir = tempfile::tempdir().unwrap();
    let handle = load(&checkpoint_file(dir.path(), "transformer"));
    let mut probability = 0.0;

    let (p1, p2) = ramp(722);
    let status = unsafe {
        roundcast_predict(handle, p1.as_ptr(), p2.as_ptr(), 722, &mut probability)
    };
    assert_eq!(status, RoundcastStatus::Ok, "{}", last_error());

    let (p1, p2) = ramp(723);
    let status = unsafe {
        roundcast_predict(handle, p1.as_ptr(), p2.as_ptr(), 723, &mut probability)
    };
    assert_eq!(status, RoundcastStatus::Capacity);
    assert!(last_error().contains("722"), "{}", last_error());

    unsafe { roundcast_model_free(handle) };
}

#[test]
fn generated_header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("roundcast.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for symbol in [
        "roundcast_model_load",
        "roundcast_model_free",
        "roundcast_predict",
        "roundcast_last_error",
        "RoundcastStatus",
        "struct RoundcastModel",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }

    // The header should stand alone as C; skip silently if no compiler.
    let probe = tempfile::tempdir().unwrap();
    let main_c = probe.path().join("probe.c");
    std::fs::write(
        &main_c,
        "#include \"roundcast.h\"\nint main(void) { return RoundcastStatus_Ok; }\n",
    )
    .unwrap();
    let compile = std::process::Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&main_c)
        .output();
    if let Ok(out) = compile {
        assert!(
            out.status.success(),
            "header does not compile as C: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
