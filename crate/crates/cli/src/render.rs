//! Aligned plain-text views of logs, reports and ablation tables.

use actionvlm::eval::MetricsReport;
use actionvlm::train::{Phase, TrainLog};
use anyhow::{Context, Result};
use serde_json::Value;

/// Left-aligned first column, right-aligned rest, two spaces between.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<String>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.iter().map(|h| h.to_string()).collect());
    for row in rows {
        out.push_str(&line(row.clone()));
    }
    out
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.digits$}"))
}

pub fn train_log(log: &TrainLog) -> String {
    let rows: Vec<Vec<String>> = log
        .epochs
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                match e.phase {
                    Phase::VisionOnly => "vision".into(),
                    Phase::VisionLanguage => "vision+lang".into(),
                },
                format!("{:.4}", e.total),
                format!("{:.4}", e.dh),
                format!("{:.4}", e.tg),
                format!("{:.4}", e.adv),
                format!("{:.3}", e.mean_lambda),
                e.wall_ms.to_string(),
            ]
        })
        .collect();
    table(&["epoch", "phase", "total", "det", "tmpl", "adv", "lambda", "ms"], &rows)
}

pub fn metrics(r: &MetricsReport) -> String {
    let mut rows: Vec<Vec<String>> = r
        .map_per_threshold
        .iter()
        .map(|(t, m)| vec![format!("mAP@{t:.2}"), format!("{:.2}", 100.0 * m)])
        .collect();
    rows.push(vec!["mAP avg".into(), format!("{:.2}", 100.0 * r.map_avg)]);
    rows.push(vec!["LAP".into(), opt(r.lap, 2)]);
    rows.push(vec!["fixed rate".into(), format!("{:.3}", r.fixed_rate)]);
    rows.push(vec!["infinite rate".into(), format!("{:.3}", r.infinite_rate)]);
    for (bucket, v) in &r.mla_per_bucket {
        rows.push(vec![format!("mLA {bucket}"), format!("{v:.3}")]);
    }
    rows.push(vec!["mconf".into(), opt(r.mconf, 3)]);
    rows.push(vec!["mlen".into(), opt(r.mlen, 3)]);
    for (t, a) in &r.acc_at {
        rows.push(vec![format!("acc@{t:.1}"), format!("{a:.3}")]);
    }
    table(&["metric", "value"], &rows)
}

pub fn ablation(doc: &Value) -> Result<String> {
    let rows = doc["rows"].as_array().context("ablation table has no rows")?;
    let num = |v: &Value| v.as_f64();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let r = &row["report"];
            let mla = |b: &str| opt(num(&r["mla_per_bucket"][b]), 3);
            vec![
                row["variant"].as_str().unwrap_or("?").to_string(),
                opt(num(&r["map_avg"]).map(|m| 100.0 * m), 2),
                opt(num(&row["hard_map"]).map(|m| 100.0 * m), 2),
                opt(num(&r["lap"]), 2),
                mla("easy"),
                mla("hard"),
                opt(num(&r["mconf"]), 3),
                opt(num(&r["mlen"]), 3),
            ]
        })
        .collect();
    let mode = doc["mode"].as_str().unwrap_or("?");
    Ok(format!(
        "ablation {mode}\n{}",
        table(
            &["variant", "mAP", "hard mAP", "LAP", "mLA easy", "mLA hard", "mconf", "mlen"],
            &body
        )
    ))
}
