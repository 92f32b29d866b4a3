use std::collections::BTreeMap;
use std::io::BufRead;

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSample {
    /// Seconds since the Unix epoch (UTC).
    pub timestamp: i64,
    pub watts: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub appliance: String,
    pub samples: Vec<RawSample>,
}

impl RawSeries {
    /// Validates ordering and value ranges.
    pub fn new(appliance: impl Into<String>, samples: Vec<RawSample>) -> Result<Self, IngestError> {
        for (i, s) in samples.iter().enumerate() {
            check_sample(i + 1, s)?;
            if i > 0 && samples[i - 1].timestamp >= s.timestamp {
                return Err(IngestError::Ordering {
                    line: i + 1,
                    previous: samples[i - 1].timestamp,
                    timestamp: s.timestamp,
                });
            }
        }
        Ok(RawSeries {
            appliance: appliance.into(),
            samples,
        })
    }
}

fn check_sample(line: usize, s: &RawSample) -> Result<(), IngestError> {
    if s.timestamp <= 0 {
        return Err(IngestError::Parse {
            line,
            message: format!("timestamp {} must be positive", s.timestamp),
        });
    }
    if !(s.watts.is_finite() && s.watts >= 0.0) {
        return Err(IngestError::Parse {
            line,
            message: format!("power {} must be finite and non-negative", s.watts),
        });
    }
    Ok(())
}

/// Streaming reader over `<unix_seconds> <watts>` lines.
///
/// Yields samples in file order and stops at the first malformed or
/// out-of-order line. Used directly for multi-year channels that should not
/// be materialized in memory.
pub struct ChannelReader<R> {
    inner: R,
    line: usize,
    previous: Option<i64>,
    buf: String,
    done: bool,
}

impl<R: BufRead> ChannelReader<R> {
    pub fn new(inner: R) -> Self {
        ChannelReader {
            inner,
            line: 0,
            previous: None,
            buf: String::new(),
            done: false,
        }
    }

    fn parse_line(&self, text: &str) -> Result<RawSample, IngestError> {
        let line = self.line;
        let bad = |message: String| IngestError::Parse { line, message };
        let mut fields = text.split(' ');
        let (Some(ts), Some(w), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(bad(format!(
                "expected `<timestamp> <watts>`, got {:?}",
                text
            )));
        };
        let timestamp: i64 = ts
            .parse()
            .map_err(|_| bad(format!("non-numeric timestamp {ts:?}")))?;
        let watts: f64 = w
            .parse()
            .map_err(|_| bad(format!("non-numeric power {w:?}")))?;
        let sample = RawSample { timestamp, watts };
        check_sample(line, &sample)?;
        Ok(sample)
    }
}

impl<R: BufRead> Iterator for ChannelReader<R> {
    type Item = Result<RawSample, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
            self.line += 1;
            let text = self.buf.trim_end_matches(['\n', '\r']);
            if text.is_empty() {
                continue;
            }
            let result = self.parse_line(text).and_then(|s| match self.previous {
                Some(prev) if s.timestamp <= prev => Err(IngestError::Ordering {
                    line: self.line,
                    previous: prev,
                    timestamp: s.timestamp,
                }),
                _ => Ok(s),
            });
            match &result {
                Ok(s) => self.previous = Some(s.timestamp),
                Err(_) => self.done = true,
            }
            return Some(result);
        }
    }
}

pub fn parse_channel<R: BufRead>(
    appliance: impl Into<String>,
    reader: R,
) -> Result<RawSeries, IngestError> {
    let samples = ChannelReader::new(reader).collect::<Result<Vec<_>, _>>()?;
    Ok(RawSeries {
        appliance: appliance.into(),
        samples,
    })
}

/// Inverse of [`parse_channel`]; `f64` display is shortest-roundtrip.
pub fn serialize_channel(series: &RawSeries) -> String {
    let mut out = String::with_capacity(series.samples.len() * 16);
    for s in &series.samples {
        out.push_str(&format!("{} {}\n", s.timestamp, s.watts));
    }
    out
}

/// Reads a `<channel> <name>` labels file.
pub fn parse_labels<R: BufRead>(reader: R) -> Result<BTreeMap<u32, String>, IngestError> {
    let mut labels = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let Some((num, name)) = text.split_once(' ') else {
            return Err(IngestError::Parse {
                line: i + 1,
                message: format!("expected `<channel> <name>`, got {text:?}"),
            });
        };
        let channel = num.parse().map_err(|_| IngestError::Parse {
            line: i + 1,
            message: format!("non-numeric channel {num:?}"),
        })?;
        labels.insert(channel, name.trim().to_string());
    }
    Ok(labels)
}
