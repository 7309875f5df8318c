use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use actionvlm::eval::{validate_report_value, MetricsReport};
use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_actionvlm"));
    cmd.env_remove("ACTIONVLM_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn ok(cmd: &mut Command) -> Output {
    let out = run(cmd);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    out
}

/// A corpus and model small enough to train in well under a second.
fn tiny() -> Value {
    json!({
        "seed": 5,
        "world_seed": 5,
        "num_classes": 4,
        "num_videos": 6,
        "frames": 32,
        "dim": 8,
        "ambiguity": [0.0, 0.0, 0.6, 0.6],
        "helpfulness": [0.2, 0.2, 0.8, 0.8],
        "hidden": 8,
        "epochs": 4,
        "eval_videos": 4,
        "probe_clips": 4
    })
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

/// Train logs carry wall-clock times; zero them so runs compare by content.
fn without_timing(bytes: Vec<u8>) -> Vec<u8> {
    let text = String::from_utf8(bytes).unwrap();
    let mut out = String::new();
    for line in text.lines() {
        let mut v: Value = serde_json::from_str(line).unwrap();
        v["wall_ms"] = json!(0);
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out.into_bytes()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let mut bytes = std::fs::read(&path).unwrap();
                if path.ends_with("train_log.jsonl") {
                    bytes = without_timing(bytes);
                }
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn gen(tmp: &Path, cfg: &Path, name: &str) -> PathBuf {
    let out = tmp.join(name);
    ok(bin().arg("gen").arg("--config").arg(cfg).arg("--out").arg(&out));
    out
}

fn train(tmp: &Path, corpus: &Path, cfg: &Path, name: &str) -> PathBuf {
    let out = tmp.join(name);
    ok(bin()
        .arg("train")
        .arg("--corpus")
        .arg(corpus)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(&out));
    out
}

fn assert_run_files(dir: &Path) {
    let version = std::fs::read_to_string(dir.join("version.txt")).unwrap();
    assert!(version.starts_with("actionvlm "), "{version}");
    let echo: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    assert!(echo.get("seed").is_some());
}

#[test]
fn gen_is_deterministic_and_echoes_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &tiny());
    let a = gen(tmp.path(), &cfg, "a");
    let b = gen(tmp.path(), &cfg, "b");
    assert_eq!(tree(&a), tree(&b));
    assert_run_files(&a);
    let corpus = actionvlm::synth::read_corpus(&a).unwrap();
    assert_eq!(corpus.len(), 6);
    assert_eq!(corpus.config.num_classes, 4);
}

#[test]
fn seed_override_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &tiny());
    let plain = gen(tmp.path(), &cfg, "plain");
    let out = tmp.path().join("env");
    ok(bin()
        .env("ACTIONVLM_SEED", "77")
        .arg("gen")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out));
    assert_ne!(tree(&plain), tree(&out));
    let echo: Value = serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["seed"], 77);

    let bad = run(bin()
        .env("ACTIONVLM_SEED", "seven")
        .arg("gen")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("x")));
    assert_eq!(code(&bad), 2);
    assert!(stderr(&bad).contains("ACTIONVLM_SEED"));
}

#[test]
fn out_dir_may_come_from_the_config() {
    let tmp = TempDir::new().unwrap();
    let mut value = tiny();
    value["out_dir"] = json!(tmp.path().join("from_cfg"));
    let cfg = write_config(tmp.path(), "c.json", &value);
    ok(bin().arg("gen").arg("--config").arg(&cfg));
    assert!(tmp.path().join("from_cfg").join("config.json").is_file());

    let bare = write_config(tmp.path(), "bare.json", &tiny());
    let out = run(bin().arg("gen").arg("--config").arg(&bare));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--out"));
}

#[test]
fn invalid_inputs_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let mut value = tiny();
    value["num_classes"] = json!(1);
    value["ambiguity"] = json!([0.0]);
    value["helpfulness"] = json!([0.5]);
    let cfg = write_config(tmp.path(), "c.json", &value);
    let out = run(bin().arg("gen").arg("--config").arg(&cfg).arg("--out").arg(tmp.path().join("o")));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("num_classes"), "{}", stderr(&out));

    let unknown = write_config(tmp.path(), "u.json", &json!({"epoch": 3}));
    let out = run(bin().arg("gen").arg("--config").arg(&unknown).arg("--out").arg(tmp.path().join("o")));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("epoch"));

    let out = run(bin()
        .arg("eval")
        .arg("--ckpt")
        .arg(tmp.path().join("missing.avlm"))
        .arg("--corpus")
        .arg(tmp.path())
        .arg("--out")
        .arg(tmp.path().join("r.json")));
    assert_eq!(code(&out), 2);
}

#[test]
fn usage_errors_exit_with_one() {
    let out = run(bin().arg("ablate").arg("--corpus").arg("c").arg("--config").arg("f").arg("--mode").arg("bogus"));
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    for mode in ["fixed-lambda", "no-adv-loss", "no-tg-loss", "language-only", "vision-only"] {
        assert!(err.contains(mode), "{err}");
    }
    assert_eq!(code(&run(bin().arg("frobnicate"))), 1);
    assert_eq!(code(&run(&mut bin())), 1);
    assert_eq!(code(&run(bin().arg("--version"))), 0);
}

#[test]
fn train_resume_eval_and_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &tiny());
    let corpus = gen(tmp.path(), &cfg, "corpus");
    let run1 = train(tmp.path(), &corpus, &cfg, "run1");
    assert_run_files(&run1);
    for f in ["model.avlm", "optimizer.avlm", "train_log.jsonl"] {
        assert!(run1.join(f).is_file(), "{f}");
    }
    let run2 = train(tmp.path(), &corpus, &cfg, "run2");
    assert_eq!(tree(&run1), tree(&run2));

    // Resuming a finished run adds no epochs and reproduces its files.
    let resumed = tmp.path().join("resumed");
    ok(bin()
        .arg("train")
        .arg("--corpus")
        .arg(&corpus)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&resumed)
        .arg("--resume")
        .arg(&run1));
    assert_eq!(tree(&run1), tree(&resumed));

    // Two epochs then a resume to four matches the uninterrupted run.
    let mut short = tiny();
    short["epochs"] = json!(2);
    let short_cfg = write_config(tmp.path(), "short.json", &short);
    let half = train(tmp.path(), &corpus, &short_cfg, "half");
    let rest = tmp.path().join("rest");
    ok(bin()
        .arg("train")
        .arg("--corpus")
        .arg(&corpus)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&rest)
        .arg("--resume")
        .arg(&half));
    for f in ["model.avlm", "optimizer.avlm"] {
        assert_eq!(std::fs::read(run1.join(f)).unwrap(), std::fs::read(rest.join(f)).unwrap(), "{f}");
    }

    let mut other = tiny();
    other["seed"] = json!(6);
    let other_cfg = write_config(tmp.path(), "other.json", &other);
    let run3 = train(tmp.path(), &corpus, &other_cfg, "run3");
    assert_ne!(std::fs::read(run1.join("model.avlm")).unwrap(), std::fs::read(run3.join("model.avlm")).unwrap());

    let report = tmp.path().join("eval").join("metrics.json");
    let out = ok(bin()
        .arg("eval")
        .arg("--ckpt")
        .arg(run1.join("model.avlm"))
        .arg("--corpus")
        .arg(&corpus)
        .arg("--conflict")
        .arg("--probe")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&report));
    assert!(stdout(&out).contains("mAP avg"));
    let text = std::fs::read_to_string(&report).unwrap();
    validate_report_value(&serde_json::from_str(&text).unwrap()).unwrap();
    let parsed = MetricsReport::from_json(&text).unwrap();
    assert!(parsed.lap.is_some() && parsed.mconf.is_some() && parsed.mlen.is_some());
    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("eval").join("metrics.meta.json")).unwrap())
            .unwrap();
    assert!(meta["version"].as_str().unwrap().starts_with("actionvlm "));
    assert_eq!(meta["conflict"], true);

    // Without flags the optional sections stay empty.
    let plain = tmp.path().join("plain.json");
    ok(bin()
        .arg("eval")
        .arg("--ckpt")
        .arg(run1.join("model.avlm"))
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(&plain));
    let parsed = MetricsReport::from_json(&std::fs::read_to_string(&plain).unwrap()).unwrap();
    assert!(parsed.lap.is_none() && parsed.mconf.is_none());

    let out = ok(bin().arg("report").arg("--run").arg(&run1));
    let text = stdout(&out);
    assert!(text.contains("epoch") && text.contains("vision"), "{text}");
    let out = ok(bin().arg("report").arg("--run").arg(&report));
    assert!(stdout(&out).contains("mconf"));
    assert_eq!(code(&run(bin().arg("report").arg("--run").arg(&corpus))), 2);
}

#[test]
fn vision_only_ablation_matches_fixed_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &tiny());
    let corpus = gen(tmp.path(), &cfg, "corpus");
    let out = tmp.path().join("ablate");
    ok(bin()
        .arg("ablate")
        .arg("--corpus")
        .arg(&corpus)
        .arg("--config")
        .arg(&cfg)
        .arg("--mode")
        .arg("vision-only")
        .arg("--out")
        .arg(&out));
    assert_run_files(&out);
    assert_run_files(&out.join("full"));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    let names: Vec<&str> = doc["rows"].as_array().unwrap().iter().map(|r| r["variant"].as_str().unwrap()).collect();
    assert_eq!(names, ["full", "vision-only"]);
    let vision = &doc["rows"][1]["report"];
    assert_eq!(vision["lap"], 0.0);
    let mla = vision["mla_per_bucket"].as_object().unwrap();
    assert!(mla.values().all(|v| v.as_f64() == Some(0.0)), "{mla:?}");

    let sweep = tmp.path().join("sweep");
    ok(bin()
        .arg("ablate")
        .arg("--corpus")
        .arg(&corpus)
        .arg("--config")
        .arg(&cfg)
        .arg("--mode")
        .arg("fixed-lambda")
        .arg("--out")
        .arg(&sweep));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(sweep.join("ablation.json")).unwrap()).unwrap();
    let names: Vec<&str> = doc["rows"].as_array().unwrap().iter().map(|r| r["variant"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        ["full", "fixed-1.0", "fixed-0.8", "fixed-0.6", "fixed-0.4", "fixed-0.2", "fixed-0.0"]
    );
    // The gate-zero model is the vision-only baseline of the other run.
    assert_eq!(
        std::fs::read(sweep.join("fixed-0.0").join("model.avlm")).unwrap(),
        std::fs::read(out.join("vision-only").join("model.avlm")).unwrap()
    );
    assert_eq!(doc["rows"][6]["report"], vision.clone());

    let out = ok(bin().arg("report").arg("--run").arg(&sweep));
    let text = stdout(&out);
    assert!(text.contains("fixed-0.4") && text.contains("hard mAP"), "{text}");
}
