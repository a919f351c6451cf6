use std::path::Path;
use std::process::{Command, Output};

use iriskit::spoofsim::EyeDistribution;
use iriskit::{render_synthetic_eye, save_pgm, Eye, GrayImage, Subject};

fn iriskit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iriskit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_eye(dir: &Path, name: &str, user: u32) -> String {
    let params = EyeDistribution::default().identity(4, Subject { user, eye: Eye::L });
    let path = dir.join(name);
    std::fs::write(&path, save_pgm(&render_synthetic_eye(&params))).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn help_and_version_exit_zero() {
    let o = iriskit(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("synth"));
    assert_eq!(iriskit(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(iriskit(&[]).status.code(), Some(2));
    assert_eq!(iriskit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(iriskit(&["match", "only-one"]).status.code(), Some(2));
}

#[test]
fn bad_config_key_exits_two_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let o = iriskit(&["--set", "no.such_key=3", "synth", "--users", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
    assert!(!out.exists());

    let o = iriskit(&["--set", "matching.shift_budget=many", "preset-list"]);
    assert_eq!(o.status.code(), Some(2));
    let o = iriskit(&["--set", "missing-equals", "preset-list"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# test\nmatching.shift_budget = 5\nevaluation.protocol_seed = 9\n").unwrap();
    let o = iriskit(&["--config", cfg.to_str().unwrap(), "--set", "matching.shift_budget=3", "show-config"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("matching.shift_budget = 3"), "{text}");
    assert!(text.contains("evaluation.protocol_seed = 9"), "{text}");

    let o = iriskit(&["--config", dir.path().join("absent.conf").to_str().unwrap(), "show-config"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn blank_image_is_a_segmentation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("blank.pgm");
    std::fs::write(&path, save_pgm(&GrayImage::filled(320, 280, 128))).unwrap();
    let o = iriskit(&["segment", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).trim_end(), "error: segmentation failure");
}

#[test]
fn unreadable_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.pgm");
    std::fs::write(&junk, b"P7 nonsense").unwrap();
    assert_eq!(iriskit(&["segment", junk.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(iriskit(&["segment", "/definitely/not/here.pgm"]).status.code(), Some(1));
    let o = iriskit(&["match", junk.to_str().unwrap(), junk.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn segment_normalize_encode_match() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_eye(dir.path(), "a.pgm", 1);
    let b = write_eye(dir.path(), "b.pgm", 2);
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();

    let o = iriskit(&["segment", &a, "--overlay", &p("overlay.pgm")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("pupil cx="), "{text}");
    assert!(text.contains("\niris cx="));
    assert!(text.contains("upper_eyelid"));
    let overlay = iriskit::load_pgm(&std::fs::read(p("overlay.pgm")).unwrap()).unwrap();
    assert_eq!((overlay.width(), overlay.height()), (320, 280));

    let o = iriskit(&["normalize", &a, "--out", &p("pattern.pgm"), "--mask", &p("mask.pgm")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pattern = iriskit::load_pgm(&std::fs::read(p("pattern.pgm")).unwrap()).unwrap();
    assert_eq!((pattern.width(), pattern.height()), (240, 20));
    assert!(Path::new(&p("mask.pgm")).exists());

    for (img, out) in [(&a, "a.tmpl"), (&b, "b.tmpl")] {
        let o = iriskit(&["encode", img, "--out", &p(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("bits=9600 "));
    }
    let o = iriskit(&["match", &p("a.tmpl"), &p("a.tmpl")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("hd=0.000000 shift=0 bits="), "{text}");

    let o = iriskit(&["match", &p("a.tmpl"), &p("b.tmpl")]);
    let text = stdout(&o);
    let hd: f64 = text.trim_start_matches("hd=").split_whitespace().next().unwrap().parse().unwrap();
    assert!(hd > 0.35, "{text}");
}

#[test]
fn preset_list_names_every_preset() {
    let o = iriskit(&["preset-list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in ["open-tophat", "histeq", "median", "inkjet-highres", "laser-plain", "ideal"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn synth_rejects_unknown_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let out = out.to_str().unwrap();
    assert_eq!(iriskit(&["synth", "--users", "1", "--out", out, "--recapture", "photo"]).status.code(), Some(2));
    assert_eq!(iriskit(&["synth", "--users", "1", "--out", out, "--chain", "open:"]).status.code(), Some(2));
    assert_eq!(iriskit(&["synth", "--users", "0", "--out", out]).status.code(), Some(2));
    assert!(!Path::new(out).exists());
}

#[test]
fn synth_then_eval_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    let o = iriskit(&["--jobs", "1", "synth", "--users", "2", "--seed", "5", "--out", ds.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("32 real and 32 fake"), "{}", stdout(&o));

    let reports = dir.path().join("reports");
    let manifest = ds.join("manifest.csv");
    let o = iriskit(&["eval", manifest.to_str().unwrap(), "--out", reports.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["scores.csv", "report.json", "report.txt"] {
        assert!(reports.join(f).exists(), "{f}");
    }
    let table = std::fs::read_to_string(reports.join("report.txt")).unwrap();
    assert_eq!(stdout(&o), table);
    let csv = std::fs::read_to_string(reports.join("scores.csv")).unwrap();
    assert!(csv.starts_with("kind,subject_a,subject_b,hd,shift\n"));
    let report = iriskit::EvaluationReport::from_json(&std::fs::read_to_string(reports.join("report.json")).unwrap());
    assert!(report.is_ok());
}

#[test]
fn eval_of_missing_manifest_exits_one() {
    let o = iriskit(&["eval", "/no/such/manifest.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}
