use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blob;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    VisionOnly,
    VisionLanguage,
}

/// One JSON-lines record per epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub phase: Phase,
    pub total: f64,
    pub dh: f64,
    pub tg: f64,
    pub adv: f64,
    pub mean_lambda: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e).map_err(|err| Error::json("train log", err))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let epochs = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::json(format!("train log line {}", i + 1), e)))
            .collect::<Result<_>>()?;
        Ok(TrainLog { epochs })
    }

    /// Mean total loss of each consecutive (vision-only, vision-language) pair.
    pub fn pair_means(&self) -> Vec<f64> {
        self.epochs
            .chunks(2)
            .filter(|c| c.len() == 2)
            .map(|c| 0.5 * (c[0].total + c[1].total))
            .collect()
    }
}

pub fn write_log(path: &Path, log: &TrainLog) -> Result<()> {
    blob::write_file(path, log.to_jsonl()?.as_bytes())
}

pub fn read_log(path: &Path) -> Result<TrainLog> {
    let bytes = blob::read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::invalid("train log", "not UTF-8"))?;
    TrainLog::from_jsonl(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(epoch: usize, phase: Phase, total: f64) -> EpochLog {
        EpochLog {
            epoch,
            phase,
            total,
            dh: total,
            tg: 0.0,
            adv: 0.0,
            mean_lambda: 0.25,
            wall_ms: 3,
        }
    }

    #[test]
    fn jsonl_round_trip_and_pair_means() {
        let log = TrainLog {
            epochs: vec![
                entry(0, Phase::VisionOnly, 1.0),
                entry(1, Phase::VisionLanguage, 3.0),
                entry(2, Phase::VisionOnly, 0.5),
            ],
        };
        let text = log.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("\"phase\":\"vision_only\""));
        assert_eq!(TrainLog::from_jsonl(&text).unwrap(), log);
        assert_eq!(log.pair_means(), vec![2.0]);
        assert!(TrainLog::from_jsonl("{\"epoch\": 1}\n").is_err());
    }
}
