use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fesf::imageio::{load, save_png};
use fesf::AppError;
use fesf_core::{toy, Shape};

fn fesf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fesf"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FESF_OUTPUT_ROOT")
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn pair(dir: &Path) {
    let s = Shape::new(3, 20, 20);
    save_png(&dir.join("p.png"), &toy::signal_sample(s, 0, 0, 0).unwrap()).unwrap();
    save_png(&dir.join("h.png"), &toy::host_texture(s).unwrap()).unwrap();
}

#[test]
fn out_of_range_alpha_names_the_valid_range() {
    let dir = tempfile::tempdir().unwrap();
    pair(dir.path());
    let o = fesf(&["hide", "--plaintext", "p.png", "--host", "h.png", "--out", "s.png", "--alpha", "0.7"], dir.path());
    assert_eq!(o.status.code(), Some(AppError::EXIT_VALIDATION), "{}", text(&o));
    assert!(text(&o).contains("[0, 0.5]"), "{}", text(&o));
    assert!(!dir.path().join("s.png").exists());
}

#[test]
fn error_categories_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    pair(dir.path());
    let o = fesf(&["hide", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(AppError::EXIT_USAGE), "{}", text(&o));
    let o = fesf(&["hide", "--plaintext", "missing.png", "--host", "h.png", "--out", "s.png"], dir.path());
    assert_eq!(o.status.code(), Some(AppError::EXIT_IO), "{}", text(&o));
    fs::write(dir.path().join("bad.toml"), "[hiding]\nalpha = \"wide\"\n").unwrap();
    let o = fesf(&["--config", "bad.toml", "hide", "--plaintext", "p.png", "--host", "h.png", "--out", "s.png"], dir.path());
    assert_eq!(o.status.code(), Some(AppError::EXIT_CONFIG), "{}", text(&o));
    let codes = [
        AppError::EXIT_FAILED,
        AppError::EXIT_USAGE,
        AppError::EXIT_VALIDATION,
        AppError::EXIT_IO,
        AppError::EXIT_CONFIG,
        AppError::EXIT_TRAINING,
    ];
    let unique: std::collections::BTreeSet<i32> = codes.into_iter().collect();
    assert_eq!(unique.len(), codes.len());
}

#[test]
fn single_image_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    pair(dir.path());
    let d = dir.path();
    let run = |args: &[&str]| {
        let o = fesf(args, d);
        assert!(o.status.success(), "{args:?}: {}", text(&o));
    };
    run(&["hide", "--plaintext", "p.png", "--host", "h.png", "--out", "syn/a.png", "--beta", "0.3"]);
    run(&["hide", "--plaintext", "h.png", "--host", "p.png", "--out", "syn/b.png"]);
    run(&[
        "train-enhancer", "--synthetics", "syn", "--host", "h.png", "--out", "g.fesf", "--epochs", "3", "--patch-size", "16",
    ]);
    run(&["enhance", "--model", "g.fesf", "--input", "syn/a.png", "--out", "su.png"]);
    run(&["refine", "--surrogate", "su.png", "--plaintext", "p.png", "--out", "ref.png", "--beta-prime", "0.2"]);
    let img = load(&d.join("ref.png"), 3, None).unwrap();
    assert_eq!(img.shape(), Shape::new(3, 20, 20));
    assert!(img.in_unit_range());

    // config file values apply, flags override them
    fs::write(d.join("c.toml"), "[hiding]\nbeta = 0.0\n").unwrap();
    run(&["--config", "c.toml", "hide", "--plaintext", "p.png", "--host", "h.png", "--out", "same.png"]);
    let host = load(&d.join("h.png"), 3, None).unwrap();
    assert!(load(&d.join("same.png"), 3, None).unwrap().max_abs_diff(&host).unwrap() < 1e-4);
    run(&["--config", "c.toml", "hide", "--plaintext", "p.png", "--host", "h.png", "--out", "diff.png", "--beta", "1"]);
    assert!(load(&d.join("diff.png"), 3, None).unwrap().max_abs_diff(&host).unwrap() > 1e-2);
}

#[test]
fn demo_honours_the_output_root_variable_and_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fesf"))
        .args(["demo", "--per-class", "12", "--size", "32", "--enhancer-epochs", "1"])
        .current_dir(dir.path())
        .env("FESF_OUTPUT_ROOT", dir.path().join("envout"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    let manifest = dir.path().join("envout/manifest.jsonl");
    assert!(manifest.exists());
    for f in ["report.txt", "report.jsonl", "utility.json", "utility.txt", "enhancer.fesf"] {
        assert!(dir.path().join("envout").join(f).exists(), "{f}");
    }

    let o = fesf(&["evaluate", "--manifest", manifest.to_str().unwrap(), "--out", "rep"], dir.path());
    assert!(o.status.success(), "{}", text(&o));
    let out = text(&o);
    for kind in ["(x_ho, x_su')", "(x_ho, x_sy)", "(x_pl, x_su')", "(x_pl, x_sy)"] {
        assert!(out.contains(kind), "{out}");
    }
    let rows = fs::read_to_string(dir.path().join("rep/report.jsonl")).unwrap();
    for kind in ["host-vs-refined", "host-vs-synthetic", "plaintext-vs-refined", "plaintext-vs-synthetic"] {
        assert!(rows.contains(kind), "{rows}");
    }

    let o = fesf(
        &["utility", "--manifest", manifest.to_str().unwrap(), "--source", "surrogate", "--out", "u.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", text(&o));
    assert!(fs::read_to_string(dir.path().join("u.json")).unwrap().contains("\"trained_on\": \"surrogate\""));
}
