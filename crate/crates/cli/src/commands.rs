use std::path::{Path, PathBuf};

use actionvlm::eval::{evaluate, validate_report_value, MetricsReport};
use actionvlm::experiment::{conflicted_twin, probe_clips_for, run_ablation, AblationMode, Corpora};
use actionvlm::model::{read_checkpoint, write_checkpoint, Model};
use actionvlm::synth::{generate_corpus, read_corpus, write_corpus};
use actionvlm::train::{read_log, write_log, TrainLog, Trainer};
use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::config::{InvalidInput, RunConfig, UsageError};
use crate::render;
use crate::VERSION;

pub const CONFIG_ECHO: &str = "config.json";
pub const VERSION_FILE: &str = "version.txt";
pub const CHECKPOINT: &str = "model.avlm";
pub const OPTIMIZER: &str = "optimizer.avlm";
pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const METRICS: &str = "metrics.json";
pub const ABLATION_JSON: &str = "ablation.json";
pub const ABLATION_TEXT: &str = "ablation.txt";

/// 1 usage, 2 data or invariant, 3 anything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if cause.is::<InvalidInput>()
            || cause.is::<actionvlm::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<std::io::Error>()
        {
            return 2;
        }
    }
    3
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Config echo and tool version, present in every output directory.
fn write_run_files(dir: &Path, cfg: &RunConfig) -> Result<()> {
    create_dir(dir)?;
    write(&dir.join(CONFIG_ECHO), &cfg.to_json()?)?;
    write(&dir.join(VERSION_FILE), &format!("{VERSION}\n"))
}

pub fn gen(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let dir = cfg.out_dir(out)?;
    let corpus = generate_corpus(&cfg.gen())?;
    write_corpus(&corpus, &dir)?;
    write_run_files(&dir, &cfg)?;
    println!("wrote {} videos to {}", corpus.len(), dir.display());
    Ok(())
}

pub fn train(corpus_dir: &Path, config: &Path, out: Option<PathBuf>, resume: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let dir = cfg.out_dir(out)?;
    let corpus = read_corpus(corpus_dir)?;
    let train_cfg = cfg.train()?;
    let (mut trainer, mut log) = match resume {
        Some(from) => {
            let model = read_checkpoint(&from.join(CHECKPOINT))?;
            let mut trainer = Trainer::new(model, train_cfg.clone())?;
            trainer.read_optimizer_state(&from.join(OPTIMIZER))?;
            let log = read_log(&from.join(TRAIN_LOG))?;
            (trainer, log)
        }
        None => (Trainer::new(Model::new(cfg.model(&corpus)?)?, train_cfg.clone())?, TrainLog::default()),
    };
    let done = trainer.epochs_done;
    if done > train_cfg.epochs {
        return Err(InvalidInput(format!(
            "checkpoint has {done} epochs, config asks for {}",
            train_cfg.epochs
        ))
        .into());
    }
    log.epochs.extend(trainer.train(&corpus, train_cfg.epochs - done)?.epochs);
    create_dir(&dir)?;
    write_checkpoint(&trainer.model, &dir.join(CHECKPOINT))?;
    trainer.write_optimizer_state(&dir.join(OPTIMIZER))?;
    write_log(&dir.join(TRAIN_LOG), &log)?;
    write_run_files(&dir, &cfg)?;
    let last = log.epochs.last().map(|e| e.total).unwrap_or(f64::NAN);
    println!(
        "trained {} epochs ({} new), final loss {last:.4}; wrote {}",
        trainer.epochs_done,
        trainer.epochs_done - done,
        dir.display()
    );
    Ok(())
}

pub fn eval(ckpt: &Path, corpus_dir: &Path, conflict: bool, probe: bool, config: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let model = read_checkpoint(ckpt)?;
    let corpus = read_corpus(corpus_dir)?;
    let twin = conflict.then(|| conflicted_twin(&corpus)).transpose()?;
    let clips = probe.then(|| probe_clips_for(&corpus.config, cfg.probe_clips)).transpose()?;
    let evaluation = evaluate(&model, &corpus, twin.as_ref(), clips.as_ref(), None, &cfg.eval())?;
    let text = evaluation.report.to_canonical_json()?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write(out, &text)?;
    let meta = json!({
        "version": VERSION,
        "checkpoint": ckpt.display().to_string(),
        "corpus": corpus_dir.display().to_string(),
        "conflict": conflict,
        "probe": probe,
        "config": serde_json::to_value(&cfg)?,
    });
    write(&meta_path(out), &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    print!("{}", render::metrics(&evaluation.report));
    Ok(())
}

/// Sidecar of an evaluation report holding the version and config echo.
pub fn meta_path(report: &Path) -> PathBuf {
    report.with_extension("meta.json")
}

pub fn ablate(corpus_dir: &Path, config: &Path, mode: AblationMode, out: Option<PathBuf>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let dir = cfg.out_dir(out)?;
    let corpus = read_corpus(corpus_dir)?;
    let recipe = cfg.recipe(&corpus)?;
    let corpora = Corpora::derive(corpus, recipe.eval_videos, recipe.probe_clips)?;
    let (buckets, rows) = run_ablation(&recipe, &corpora, mode)?;
    create_dir(&dir)?;
    let mut table = Vec::new();
    for row in &rows {
        let name = row.variant.name();
        let sub = dir.join(&name);
        write_run_files(&sub, &cfg)?;
        write_checkpoint(&row.model, &sub.join(CHECKPOINT))?;
        write_log(&sub.join(TRAIN_LOG), &row.log)?;
        let metrics = row.evaluation.report.to_canonical_json()?;
        write(&sub.join(METRICS), &metrics)?;
        let hard = row.evaluation.aligned.subset_average(&buckets.hard);
        table.push(json!({
            "variant": name,
            "hard_map": hard,
            "report": serde_json::from_str::<Value>(&metrics)?,
        }));
    }
    let doc = json!({
        "mode": mode.to_string(),
        "buckets": {"easy": buckets.easy, "medium": buckets.medium, "hard": buckets.hard},
        "rows": table,
    });
    write(&dir.join(ABLATION_JSON), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    let text = render::ablation(&doc)?;
    write(&dir.join(ABLATION_TEXT), &text)?;
    write_run_files(&dir, &cfg)?;
    print!("{text}");
    Ok(())
}

pub fn report(run: &Path) -> Result<()> {
    if run.is_file() {
        let text = std::fs::read_to_string(run).with_context(|| format!("reading {}", run.display()))?;
        print!("{}", render::metrics(&MetricsReport::from_json(&text)?));
        return Ok(());
    }
    let mut sections = Vec::new();
    let log_path = run.join(TRAIN_LOG);
    if log_path.is_file() {
        sections.push(render::train_log(&read_log(&log_path)?));
    }
    let metrics_path = run.join(METRICS);
    if metrics_path.is_file() {
        let text = std::fs::read_to_string(&metrics_path)?;
        validate_report_value(&serde_json::from_str(&text)?)?;
        sections.push(render::metrics(&MetricsReport::from_json(&text)?));
    }
    let ablation_path = run.join(ABLATION_JSON);
    if ablation_path.is_file() {
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&ablation_path)?)?;
        sections.push(render::ablation(&doc)?);
    }
    if sections.is_empty() {
        return Err(InvalidInput(format!(
            "{} holds no {TRAIN_LOG}, {METRICS} or {ABLATION_JSON}",
            run.display()
        ))
        .into());
    }
    if let Ok(v) = std::fs::read_to_string(run.join(VERSION_FILE)) {
        println!("run {} ({})\n", run.display(), v.trim());
    }
    print!("{}", sections.join("\n"));
    Ok(())
}
