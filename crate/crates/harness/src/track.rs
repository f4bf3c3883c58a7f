use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use confseq_core::{ConfidenceState, Error as CoreError};
use serde::{Deserialize, Serialize};

use crate::table::{Cell, Format, TableWriter};

/// Saved progress of a tracked stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub state: ConfidenceState,
    pub skipped: u64,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing checkpoint {}", path.display()))
    }

    /// Writes through a temporary file so a crash never leaves half a checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_string(self)?)
            .with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrackOptions {
    pub format: Format,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackSummary {
    pub records: u64,
    pub skipped: u64,
    pub t: u64,
}

enum Record {
    Value(f64),
    Blank,
    Malformed,
}

fn parse_record(line: &str, format: Format) -> Record {
    let line = line.trim();
    if line.is_empty() {
        return Record::Blank;
    }
    let v = match format {
        Format::Csv => line.parse::<f64>().ok(),
        Format::Jsonl => serde_json::from_str::<serde_json::Value>(line)
            .ok()
            .and_then(|v| v.get("y").and_then(serde_json::Value::as_f64)),
    };
    match v {
        Some(v) if !v.is_nan() => Record::Value(v),
        _ => Record::Malformed,
    }
}

/// Feeds each record to the confidence sequence and writes `t, low, high`
/// after it (`NaN` ends once the running intersection is empty).
///
/// Malformed records are skipped with a warning and counted; a value
/// outside `[0, 1]` stops the run with an error. With a checkpoint path the
/// state is restored from it when present and written back at the end.
pub fn track<R: BufRead, W: Write>(
    input: R,
    out: W,
    fresh: ConfidenceState,
    opts: &TrackOptions,
) -> Result<TrackSummary> {
    let (mut state, mut skipped) = match &opts.checkpoint {
        Some(p) if p.exists() => {
            let c = Checkpoint::load(p)?;
            if c.state.method() != fresh.method() || c.state.delta() != fresh.delta() {
                bail!(
                    "checkpoint {} was written for {} at delta {}, not {} at delta {}",
                    p.display(),
                    c.state.method().label(),
                    c.state.delta(),
                    fresh.method().label(),
                    fresh.delta()
                );
            }
            (c.state, c.skipped)
        }
        _ => (fresh, 0),
    };

    let mut w = TableWriter::new(out, opts.format, &["t", "low", "high"])?;
    let mut records = 0u64;
    for (i, line) in input.lines().enumerate() {
        let line = line.context("reading input")?;
        let y = match parse_record(&line, opts.format) {
            Record::Value(v) => v,
            Record::Blank => continue,
            Record::Malformed => {
                skipped += 1;
                log::warn!("line {}: malformed record skipped ({skipped} so far)", i + 1);
                continue;
            }
        };
        if !(0.0..=1.0).contains(&y) {
            bail!("line {}: observation {y} is outside [0, 1]", i + 1);
        }
        let (low, high) = match state.update(y) {
            Ok(iv) => (iv.low, iv.high),
            Err(CoreError::EmptyIntersection { t }) => {
                if t == state.t() {
                    log::warn!("running intersection became empty at t = {t}");
                }
                (f64::NAN, f64::NAN)
            }
            Err(e) => return Err(e.into()),
        };
        records += 1;
        w.row(&[Cell::Int(state.t()), Cell::Float(low), Cell::Float(high)])?;
    }
    w.flush()?;
    if let Some(p) = &opts.checkpoint {
        Checkpoint {
            state: state.clone(),
            skipped,
        }
        .save(p)?;
    }
    Ok(TrackSummary {
        records,
        skipped,
        t: state.t(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use confseq_core::Method;

    fn run(input: &str, format: Format) -> Result<(String, TrackSummary)> {
        let s = ConfidenceState::new(Method::Hr, 0.05).unwrap();
        let mut out = Vec::new();
        let opts = TrackOptions {
            format,
            checkpoint: None,
        };
        let summary = track(input.as_bytes(), &mut out, s, &opts)?;
        Ok((String::from_utf8(out).unwrap(), summary))
    }

    #[test]
    fn empty_input() {
        let (out, s) = run("", Format::Csv).unwrap();
        assert_eq!(out, "t,low,high\n");
        assert_eq!(s.records, 0);
        let (out, _) = run("", Format::Jsonl).unwrap();
        assert_eq!(out, "");
    }

    #[test]
    fn malformed_and_out_of_range() {
        let (out, s) = run("0.5\nabc\n\n0.25\nnan\n", Format::Csv).unwrap();
        assert_eq!(s.records, 2);
        assert_eq!(s.skipped, 2);
        assert_eq!(out.lines().count(), 3);
        assert!(run("0.5\n1.5\n", Format::Csv).is_err());
        assert!(run("-0.1\n", Format::Csv).is_err());

        let (out, s) = run("{\"y\": 0.5}\n{\"x\": 1}\n{\"y\": 1}\n", Format::Jsonl).unwrap();
        assert_eq!((s.records, s.skipped), (2, 1));
        assert!(out.starts_with("{\"t\":1,\"low\":"));
    }
}
