//! End-to-end runs of the `contrast-xai` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_contrast-xai");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    let out = run(args);
    out.status.code().unwrap_or(-1)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

struct Fixture {
    _dir: TempDir,
    data: PathBuf,
    model: PathBuf,
    diseased: Vec<String>,
}

const SMALL: [&str; 6] = ["--set", "n_images=300", "--set", "image_size=64", "--set", "seed=3"];

/// A small dataset and a model trained on it, shared across tests.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let data = dir.path().join("data");
        let model = dir.path().join("model.json");
        let mut args = vec!["generate", "--out", s(&data)];
        args.extend(SMALL);
        assert_eq!(code(&args), 0);
        let mut args = vec!["train", "--data", s(&data), "--out", s(&model)];
        args.extend(SMALL);
        let out = run(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mut diseased = vec![];
        let manifest: serde_json::Value =
            serde_json::from_slice(&std::fs::read(data.join("dataset.json")).unwrap()).unwrap();
        for id in manifest["ids"].as_array().unwrap() {
            let id = id.as_str().unwrap().to_string();
            let truth: serde_json::Value =
                serde_json::from_slice(&std::fs::read(data.join(format!("{id}_truth.json"))).unwrap())
                    .unwrap();
            if truth["label"] == "diseased" {
                diseased.push(id);
            }
        }
        Fixture {
            _dir: dir,
            data,
            model,
            diseased,
        }
    })
}

/// Explains diseased images until one is classified positive.
fn explain_first(f: &Fixture, extra: &[&str], out: &Path) -> String {
    for id in &f.diseased {
        let x = f.data.join(format!("{id}_x.png"));
        let xp = f.data.join(format!("{id}_xp.png"));
        let mut args = vec!["explain", "--x", s(&x), "--contrast", s(&xp), "--out", s(out)];
        args.extend(extra);
        args.extend(["--set", "image_size=64"]);
        match code(&args) {
            0 => return id.clone(),
            4 => continue,
            c => panic!("explain exited {c}"),
        }
    }
    panic!("no diseased image classified positive");
}

#[test]
fn generate_is_deterministic_and_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let args = ["--set", "n_images=6", "--set", "image_size=64", "--set", "seed=9"];
    assert_eq!(code(&[&["generate", "--out", s(&a)][..], &args].concat()), 0);
    assert_eq!(code(&[&["generate", "--out", s(&b)][..], &args].concat()), 0);
    let ta = tree(&a);
    assert_eq!(ta.len(), 6 * 3 + 2);
    assert_eq!(ta, tree(&b));
    let resolved = a.join("resolved_config.json");
    assert_eq!(code(&["generate", "--out", s(&c), "--config", s(&resolved)]), 0);
    assert_eq!(ta, tree(&c));
}

#[test]
fn single_class_training_exits_4() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("healthy");
    let set = ["--set", "n_images=10", "--set", "image_size=64", "--set", "disease_ratio=0.0"];
    assert_eq!(code(&[&["generate", "--out", s(&data)][..], &set].concat()), 0);
    let model = dir.path().join("m.json");
    assert_eq!(code(&["train", "--data", s(&data), "--out", s(&model), "--set", "image_size=64"]), 4);
}

#[test]
fn usage_and_io_errors() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let model = dir.path().join("m.json");
    assert_eq!(code(&["train", "--data", s(&empty), "--out", s(&model)]), 2);
    assert_eq!(code(&["train", "--data", s(&dir.path().join("nope")), "--out", s(&model)]), 3);
    assert_eq!(code(&["generate", "--out", s(&empty), "--set", "no_such_key=1"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);

    let f = fixture();
    let x = f.data.join(format!("{}_x.png", f.diseased[0]));
    let missing = dir.path().join("missing.png");
    let out = dir.path().join("out");
    let args = ["explain", "--x", s(&x), "--contrast", s(&missing), "--model", s(&f.model), "--out", s(&out)];
    assert_eq!(code(&args), 3);
    let args = ["explain", "--x", s(&x), "--contrast", s(&x), "--out", s(&out)];
    assert_eq!(code(&args), 2);
}

#[test]
fn explain_writes_artifacts() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("explain");
    explain_first(f, &["--model", s(&f.model)], &out);
    for name in [
        "explanation.json",
        "report.txt",
        "saliency.png",
        "saliency.json",
        "segments.png",
        "segments.json",
        "perturbations.csv",
        "resolved_config.json",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("Segments:"));
}

#[test]
fn subprocess_classifier_matches_in_process_model() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let id = explain_first(f, &["--model", s(&f.model)], &a);
    let cmd = format!("{BIN} serve --model {}", s(&f.model));
    let x = f.data.join(format!("{id}_x.png"));
    let xp = f.data.join(format!("{id}_xp.png"));
    let args = [
        "explain", "--x", s(&x), "--contrast", s(&xp), "--classifier-cmd", &cmd, "--out", s(&b),
        "--set", "image_size=64",
    ];
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let load = |d: &Path| -> serde_json::Value {
        serde_json::from_slice(&std::fs::read(d.join("explanation.json")).unwrap()).unwrap()
    };
    let (ja, jb) = (load(&a), load(&b));
    for key in ["probability", "segments", "counterfactuals", "regression", "scores"] {
        assert!(!ja[key].is_null(), "{key}");
        assert_eq!(ja[key], jb[key], "{key}");
    }
    assert_eq!(
        std::fs::read(a.join("perturbations.csv")).unwrap(),
        std::fs::read(b.join("perturbations.csv")).unwrap()
    );
}

#[test]
fn external_saliency_directory_scores_like_explanations() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let (a, maps, b) = (dir.path().join("a"), dir.path().join("maps"), dir.path().join("b"));
    let set = ["--set", "image_size=64", "--set", "n_images=300"];
    let args = [&["evaluate", "--data", s(&f.data), "--model", s(&f.model), "--out", s(&a)][..], &set].concat();
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["scores.csv", "random_scores.csv", "summary.json", "summary.svg"] {
        assert!(a.join(name).is_file(), "{name} missing");
    }
    std::fs::create_dir(&maps).unwrap();
    let mut copied = 0;
    for e in std::fs::read_dir(a.join("explanations")).unwrap() {
        let e = e.unwrap();
        let src = e.path().join("saliency.json");
        if src.is_file() {
            std::fs::copy(src, maps.join(format!("{}.json", e.file_name().to_string_lossy()))).unwrap();
            copied += 1;
        }
    }
    assert!(copied > 0);
    let template: serde_json::Value = serde_json::from_slice(
        &std::fs::read(std::fs::read_dir(&maps).unwrap().next().unwrap().unwrap().path()).unwrap(),
    )
    .unwrap();
    for id in &f.diseased {
        let path = maps.join(format!("{id}.json"));
        if !path.exists() {
            let mut zero = template.clone();
            for v in zero["values"].as_array_mut().unwrap() {
                *v = 0.0.into();
            }
            std::fs::write(path, serde_json::to_vec(&zero).unwrap()).unwrap();
        }
    }
    let args = [&["evaluate", "--data", s(&f.data), "--saliency-dir", s(&maps), "--out", s(&b)][..], &set].concat();
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = |d: &Path| -> BTreeMap<String, String> {
        std::fs::read_to_string(d.join("scores.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| (l.split(',').next().unwrap().to_string(), l.to_string()))
            .collect()
    };
    let (ra, rb) = (rows(&a), rows(&b));
    assert_eq!(rb.len(), f.diseased.len());
    let mut compared = 0;
    for e in std::fs::read_dir(a.join("explanations")).unwrap() {
        let id = e.unwrap().file_name().to_string_lossy().into_owned();
        if let Some(row) = ra.get(&id) {
            assert_eq!(Some(row), rb.get(&id), "{id}");
            compared += 1;
        }
    }
    assert_eq!(compared, copied);
}
