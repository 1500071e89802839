//! JSONL episode logs: a header line followed by one [`StepRecord`] per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentParams;
use crate::env::{StepRecord, WorldConfig};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty log")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// First line of every log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeHeader {
    pub config: WorldConfig,
    pub seed: u64,
    pub episode: u32,
    pub agent: Option<AgentParams>,
}

impl EpisodeHeader {
    pub fn agent_id(&self) -> String {
        self.agent
            .as_ref()
            .map_or_else(|| "unknown".to_string(), AgentParams::id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: EpisodeHeader,
    pub records: Vec<StepRecord>,
}

impl EpisodeLog {
    pub fn score(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    pub fn distance(&self) -> f64 {
        self.header.config.patch_distance
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), LogError> {
        serde_json::to_writer(&mut w, &self.header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, LogError> {
        let mut lines = BufReader::new(r).lines();
        let first = match lines.next() {
            Some(l) => l?,
            None => return Err(LogError::Empty),
        };
        let header: EpisodeHeader = serde_json::from_str(&first).map_err(|e| LogError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StepRecord = serde_json::from_str(&line).map_err(|e| LogError::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Ok(Self { header, records })
    }

    pub fn save(&self, path: &Path) -> Result<(), LogError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, LogError> {
        Self::read_from(File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Agent, AgentKind};
    use crate::env::run_episode;

    fn sample() -> EpisodeLog {
        let config = WorldConfig::default();
        let params = AgentParams::of_kind(AgentKind::Accumulator);
        let mut agent = Agent::new(&params, &config, 4).unwrap();
        let records = run_episode(&config, &mut agent, 4).unwrap();
        EpisodeLog {
            header: EpisodeHeader {
                config,
                seed: 4,
                episode: 0,
                agent: Some(params),
            },
            records,
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let log = sample();
        let mut buf = Vec::new();
        log.write_to(&mut buf).unwrap();
        let back = EpisodeLog::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, log);
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3601);
    }

    #[test]
    fn field_names_on_disk() {
        let log = sample();
        let line = serde_json::to_string(&log.records[0]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            [
                "action",
                "agent_state",
                "depletion",
                "heading",
                "inside",
                "pos",
                "reward",
                "step"
            ]
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let log = sample();
        let mut buf = Vec::new();
        log.write_to(&mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("{\"step\": \"oops\"}\n");
        match EpisodeLog::read_from(text.as_bytes()) {
            Err(LogError::Parse { line, .. }) => assert_eq!(line, 3602),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            EpisodeLog::read_from("not json\n".as_bytes()),
            Err(LogError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            EpisodeLog::read_from("".as_bytes()),
            Err(LogError::Empty)
        ));
    }
}
