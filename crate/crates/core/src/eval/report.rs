use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::Value;

use crate::error::{Error, Result};

/// Flat summary of one evaluation. Rates and mAPs are fractions in `[0, 1]`;
/// LAP is in percentage points (or a fraction in relative mode).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    /// `(tIoU threshold, mAP)` in threshold order.
    pub map_per_threshold: Vec<(f64, f64)>,
    pub map_avg: f64,
    pub lap: Option<f64>,
    pub fixed_rate: f64,
    pub infinite_rate: f64,
    pub mla_per_bucket: BTreeMap<String, f64>,
    pub mconf: Option<f64>,
    pub mlen: Option<f64>,
    /// `(span threshold, accuracy)`; empty without a probe run.
    pub acc_at: Vec<(f64, f64)>,
}

const KEYS: [&str; 9] = [
    "acc_at",
    "fixed_rate",
    "infinite_rate",
    "lap",
    "map_avg",
    "map_per_threshold",
    "mconf",
    "mla_per_bucket",
    "mlen",
];

fn threshold_key(t: f64) -> String {
    format!("{t:.2}")
}

fn num(v: f64) -> String {
    // -0.000000 would make otherwise equal reports differ.
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_string(), num)
}

fn write_map(out: &mut String, entries: &[(String, f64)]) {
    if entries.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for (i, (k, v)) in entries.iter().enumerate() {
        let sep = if i + 1 < entries.len() { "," } else { "" };
        let _ = writeln!(out, "    {}: {}{sep}", Value::String(k.clone()), num(*v));
    }
    out.push_str("  }");
}

impl MetricsReport {
    /// Canonical JSON: sorted keys, two-space indent, every number printed
    /// with six decimals, trailing newline. Equal reports give equal bytes.
    pub fn to_canonical_json(&self) -> Result<String> {
        self.check_finite()?;
        let pairs = |v: &[(f64, f64)]| -> Vec<(String, f64)> {
            let mut e: Vec<(String, f64)> = v.iter().map(|(t, x)| (threshold_key(*t), *x)).collect();
            e.sort_by(|a, b| a.0.cmp(&b.0));
            e
        };
        let mut out = String::from("{\n");
        for (i, key) in KEYS.iter().enumerate() {
            let _ = write!(out, "  \"{key}\": ");
            match *key {
                "acc_at" => write_map(&mut out, &pairs(&self.acc_at)),
                "fixed_rate" => out.push_str(&num(self.fixed_rate)),
                "infinite_rate" => out.push_str(&num(self.infinite_rate)),
                "lap" => out.push_str(&opt_num(self.lap)),
                "map_avg" => out.push_str(&num(self.map_avg)),
                "map_per_threshold" => write_map(&mut out, &pairs(&self.map_per_threshold)),
                "mconf" => out.push_str(&opt_num(self.mconf)),
                "mla_per_bucket" => {
                    let e: Vec<(String, f64)> = self.mla_per_bucket.iter().map(|(k, v)| (k.clone(), *v)).collect();
                    write_map(&mut out, &e)
                }
                "mlen" => out.push_str(&opt_num(self.mlen)),
                _ => unreachable!(),
            }
            out.push_str(if i + 1 < KEYS.len() { ",\n" } else { "\n" });
        }
        out.push_str("}\n");
        Ok(out)
    }

    fn check_finite(&self) -> Result<()> {
        let all = self
            .map_per_threshold
            .iter()
            .chain(&self.acc_at)
            .flat_map(|(a, b)| [*a, *b])
            .chain([self.map_avg, self.fixed_rate, self.infinite_rate])
            .chain(self.lap)
            .chain(self.mconf)
            .chain(self.mlen)
            .chain(self.mla_per_bucket.values().copied());
        for v in all {
            if !v.is_finite() {
                return Err(Error::NonFinite("metrics report".into()));
            }
        }
        Ok(())
    }

    /// Parses and validates a report produced by [`Self::to_canonical_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::json("metrics report", e))?;
        validate_report_value(&value)?;
        let obj = value.as_object().expect("validated");
        let f = |k: &str| obj[k].as_f64().expect("validated");
        let opt = |k: &str| obj[k].as_f64();
        let map = |k: &str| -> Vec<(String, f64)> {
            obj[k]
                .as_object()
                .expect("validated")
                .iter()
                .map(|(k, v)| (k.clone(), v.as_f64().expect("validated")))
                .collect()
        };
        let thresholds = |k: &str| -> Vec<(f64, f64)> {
            map(k).into_iter().map(|(t, v)| (t.parse().expect("validated"), v)).collect()
        };
        Ok(MetricsReport {
            map_per_threshold: thresholds("map_per_threshold"),
            map_avg: f("map_avg"),
            lap: opt("lap"),
            fixed_rate: f("fixed_rate"),
            infinite_rate: f("infinite_rate"),
            mla_per_bucket: map("mla_per_bucket").into_iter().collect(),
            mconf: opt("mconf"),
            mlen: opt("mlen"),
            acc_at: thresholds("acc_at"),
        })
    }
}

fn schema_error(reason: String) -> Error {
    Error::invalid("metrics report", reason)
}

/// Checks a parsed document against the report schema: exactly the known
/// keys, numeric fields, nullable `lap`/`mconf`/`mlen`, numeric maps keyed by
/// threshold (or bucket name), fractions within `[0, 1]`.
pub fn validate_report_value(value: &Value) -> Result<()> {
    let obj = value
        .as_object()
        .ok_or_else(|| schema_error("top level is not an object".into()))?;
    for key in obj.keys() {
        if !KEYS.contains(&key.as_str()) {
            return Err(schema_error(format!("unknown key {key:?}")));
        }
    }
    let fraction = |k: &str, v: &Value| -> Result<()> {
        match v.as_f64() {
            Some(x) if (0.0..=1.0).contains(&x) => Ok(()),
            _ => Err(schema_error(format!("{k} must be a number in [0, 1]"))),
        }
    };
    for key in KEYS {
        let v = obj.get(key).ok_or_else(|| schema_error(format!("missing key {key:?}")))?;
        match key {
            "fixed_rate" | "infinite_rate" | "map_avg" => fraction(key, v)?,
            "lap" | "mconf" | "mlen" => {
                if !(v.is_null() || v.is_number()) {
                    return Err(schema_error(format!("{key} must be a number or null")));
                }
            }
            _ => {
                let m = v
                    .as_object()
                    .ok_or_else(|| schema_error(format!("{key} must be an object")))?;
                for (k, x) in m {
                    if key != "mla_per_bucket" && k.parse::<f64>().is_err() {
                        return Err(schema_error(format!("{key} key {k:?} is not a threshold")));
                    }
                    if key == "mla_per_bucket" {
                        if !x.is_number() {
                            return Err(schema_error(format!("{key}.{k} must be a number")));
                        }
                    } else {
                        fraction(&format!("{key}.{k}"), x)?;
                    }
                }
            }
        }
    }
    Ok(())
}
