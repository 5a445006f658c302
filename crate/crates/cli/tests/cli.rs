use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ganlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ganlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("GANLAB_OUTPUT")
        .output()
        .expect("binary runs")
}

fn example(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
        .display()
        .to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let j = lines
        .next()
        .unwrap()
        .split(',')
        .position(|c| c == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(j).unwrap().parse().unwrap())
        .collect()
}

const SMALL_GAN: &str = r#"{
  "kind": "wgan",
  "name": "small",
  "config": {
    "target": { "gauss_mix_1d": { "weights": [0.5, 0.5], "means": [-2.0, 2.0], "stds": [0.5, 0.5] } },
    "seed": 3,
    "iters": 200,
    "log_interval": 20,
    "eval_samples": 200
  }
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn bundled_vanilla_example_runs() {
    let tmp = TempDir::new().unwrap();
    let out = ganlab(
        &["run", &example("vanilla_mix1d.json"), "--output", "out"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let run = tmp.path().join("out/vanilla_mix1d");
    for f in [
        "report.csv",
        "samples_final.csv",
        "config_resolved.json",
        "checkpoint.csv",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let report = fs::read_to_string(run.join("report.csv")).unwrap();
    assert!(report.lines().count() - 1 >= 10);
    assert!(
        report.starts_with("iter,loss_d,loss_g,grad_norm_d,grad_norm_g,hist_js,w1_1d,wall_ms\n")
    );
    let samples = fs::read_to_string(run.join("samples_final.csv")).unwrap();
    assert_eq!(samples.lines().next(), Some("index,x0"));
    let ckpt = fs::read_to_string(run.join("checkpoint.csv")).unwrap();
    assert!(ckpt.starts_with("layer,row,col,value\n"));
    assert!(ckpt.contains("generator.0.weight") && ckpt.contains("discriminator.2.bias"));
}

#[test]
fn segment_example_contrasts_the_two_critics() {
    let tmp = TempDir::new().unwrap();
    let out = ganlab(
        &[
            "run",
            &example("segment_wgan_vs_js.json"),
            "--output",
            "out",
            "--jobs",
            "2",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let read =
        |r: &str| fs::read_to_string(tmp.path().join("out").join(r).join("report.csv")).unwrap();
    let (vanilla, wgan) = (read("segment_vanilla"), read("segment_wgan"));
    assert!(*column(&vanilla, "grad_norm_g").last().unwrap() < 1e-6);
    assert!(*column(&wgan, "grad_norm_g").last().unwrap() > 1e-3);
    for js in column(&vanilla, "hist_js") {
        assert!((js - std::f64::consts::LN_2).abs() < 1e-6);
    }
    assert!(wgan.lines().next().unwrap().ends_with(",w1_critic"));
}

#[test]
fn k_zero_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.json",
        &SMALL_GAN.replace(r#""seed": 3,"#, r#""seed": 3, "k": 0,"#),
    );
    let out = ganlab(&["run", &cfg, "--output", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("k must be at least 1"),
        "{}",
        stderr(&out)
    );
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_fields_are_listed() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL_GAN
        .replace(
            r#""seed": 3,"#,
            r#""seed": 3, "learning_rate": 0.1, "generator_spec": 1,"#,
        )
        .replace(r#""kind": "wgan","#, r#""kind": "wgan", "colour": "red","#);
    let cfg = write(tmp.path(), "typo.json", &text);
    let out = ganlab(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("colour"), "{err}");

    let cfg = write(
        tmp.path(),
        "typo2.json",
        &SMALL_GAN.replace(
            r#""seed": 3,"#,
            r#""seed": 3, "learning_rate": 0.1, "generator_spec": 1,"#,
        ),
    );
    let out = ganlab(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("learning_rate") && err.contains("generator_spec"),
        "{err}"
    );
}

#[test]
fn resolved_config_reproduces_the_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.json", SMALL_GAN);
    assert!(ganlab(&["run", &cfg, "--output", "a"], tmp.path())
        .status
        .success());
    let first = tmp.path().join("a/small");
    let resolved = first.join("config_resolved.json").display().to_string();
    let out = ganlab(&["run", &resolved, "--output", "b"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let second = tmp.path().join("b/small");
    for f in [
        "report.csv",
        "samples_final.csv",
        "checkpoint.csv",
        "config_resolved.json",
    ] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f} differs"
        );
    }

    let out = ganlab(
        &["run", &cfg, "--output", "c", "--seed-override", "99"],
        tmp.path(),
    );
    assert!(out.status.success());
    let text = fs::read_to_string(tmp.path().join("c/small/config_resolved.json")).unwrap();
    assert!(text.contains("\"seed\": 99"));
    assert_ne!(
        fs::read(first.join("report.csv")).unwrap(),
        fs::read(tmp.path().join("c/small/report.csv")).unwrap()
    );
}

#[test]
fn numerical_abort_leaves_no_output() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL_GAN
        .replace(r#""kind": "wgan","#, r#""kind": "fgan","#)
        .replace(
            r#""seed": 3,"#,
            r#""seed": 9, "variant": { "kind": "fgan", "divergence": "kl" }, "lr_d": 1e6,"#,
        );
    let cfg = write(tmp.path(), "boom.json", &text);
    let out = ganlab(&["run", &cfg, "--output", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("numerical abort"));
    let left: Vec<_> = fs::read_dir(tmp.path().join("out"))
        .map(|d| d.collect())
        .unwrap_or_default();
    assert!(left.is_empty(), "{left:?}");
}

#[test]
fn output_falls_back_to_the_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.json", SMALL_GAN);
    let out = Command::new(env!("CARGO_BIN_EXE_ganlab"))
        .args(["run", &cfg])
        .current_dir(tmp.path())
        .env("GANLAB_OUTPUT", tmp.path().join("from_env"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("from_env/small/report.csv").is_file());
}

#[test]
fn parallel_runs_match_serial_runs() {
    let tmp = TempDir::new().unwrap();
    let runs = r#"{
      "kind": "gan",
      "runs": [
        { "name": "one", "config": { "target": { "gauss_mix_1d": { "weights": [1.0], "means": [1.0], "stds": [0.5] } }, "seed": 1, "iters": 100, "log_interval": 50, "eval_samples": 200 } },
        { "name": "two", "config": { "target": { "gauss_mix_1d": { "weights": [1.0], "means": [1.0], "stds": [0.5] } }, "seed": 2, "iters": 100, "log_interval": 50, "eval_samples": 200 } },
        { "kind": "vae", "name": "three", "config": { "target": { "ring_2d": { "radius": 2.0, "noise": 0.1 } }, "seed": 3, "iters": 100, "log_interval": 50, "eval_samples": 200 } }
      ]
    }"#;
    let cfg = write(tmp.path(), "many.json", runs);
    assert!(ganlab(&["run", &cfg, "--output", "serial"], tmp.path())
        .status
        .success());
    assert!(ganlab(
        &["run", &cfg, "--output", "parallel", "--jobs", "3"],
        tmp.path()
    )
    .status
    .success());
    for r in ["one", "two", "three"] {
        let a = fs::read(tmp.path().join("serial").join(r).join("report.csv")).unwrap();
        let b = fs::read(tmp.path().join("parallel").join(r).join("report.csv")).unwrap();
        assert_eq!(a, b, "{r}");
    }
    let vae = fs::read_to_string(tmp.path().join("serial/three/report.csv")).unwrap();
    assert!(vae.lines().next().unwrap().ends_with(",loss_kl"));
}

#[test]
fn suite_kinds_write_check_tables() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "conj.json",
        r#"{ "kind": "conjugate_suite", "config": { "grid_points": 7 } }"#,
    );
    let out = ganlab(&["run", &cfg, "--output", "out"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = fs::read_to_string(tmp.path().join("out/conj/report.csv")).unwrap();
    assert!(report.starts_with("suite,invariant,measured,tolerance,passed\n"));
    assert!(report.lines().skip(1).all(|l| l.ends_with(",true")));
    let catalog = fs::read_to_string(tmp.path().join("out/conj/catalog.csv")).unwrap();
    assert_eq!(catalog.lines().count(), 1 + 4 * 7);

    let cfg = write(
        tmp.path(),
        "div.json",
        r#"{ "kind": "divergence_suite", "config": {} }"#,
    );
    let out = ganlab(&["run", &cfg, "--output", "out"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = fs::read_to_string(tmp.path().join("out/div/report.csv")).unwrap();
    assert!(report.contains("\ntransport,"));
}

#[test]
fn existing_foreign_directories_are_not_replaced() {
    let tmp = TempDir::new().unwrap();
    fs::create_dir_all(tmp.path().join("out/small")).unwrap();
    fs::write(tmp.path().join("out/small/notes.txt"), "keep me").unwrap();
    let cfg = write(tmp.path(), "small.json", SMALL_GAN);
    let out = ganlab(&["run", &cfg, "--output", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(
        fs::read_to_string(tmp.path().join("out/small/notes.txt")).unwrap(),
        "keep me"
    );

    // an earlier run is replaced
    let again = ganlab(&["run", &cfg, "--output", "second"], tmp.path());
    assert!(again.status.success());
    let again = ganlab(&["run", &cfg, "--output", "second"], tmp.path());
    assert!(again.status.success());
}

#[test]
fn verify_prints_a_table() {
    let tmp = TempDir::new().unwrap();
    for suite in ["conjugates", "transport"] {
        let out = ganlab(&["verify", suite], tmp.path());
        assert!(out.status.success(), "{}", stderr(&out));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("status") && text.contains("pass"));
        assert!(!text.contains("FAIL"));
    }
    assert_eq!(
        ganlab(&["verify", "everything"], tmp.path()).status.code(),
        Some(2)
    );
}
