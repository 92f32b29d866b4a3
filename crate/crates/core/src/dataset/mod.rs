//! Labeled half-hourly dataset: binarized appliance grid, injected outing
//! events, and the encoded feature rows handed to the learners.

mod annotate;
mod grid;

pub use annotate::{
    annotate, annotate_saturdays, annotate_workdays, plan_fixed_trips, Annotation,
    AnnotationConfig, AnnotationError, ClockTime, MonthDay, Outing, OutingInterval, OutingKind,
    SaturdayRule,
};
pub use grid::{align_channels, BinarizedGrid};

use std::io::{BufRead, Write};

use chrono::Datelike;
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar;
use crate::data::{DataError, Examples, FeatureSpec, Label};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("channel grids differ: {0}")]
    Alignment(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Encoded features of one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureRow {
    pub tv: bool,
    pub kettle: bool,
    pub oven: bool,
    pub microwave: bool,
    /// Window index within the local day.
    pub time_slot: u16,
    /// Monday = 0.
    pub weekday: u8,
    pub day: u8,
    pub month: u8,
}

pub const FEATURE_NAMES: [&str; 8] = [
    "tv",
    "kettle",
    "oven",
    "microwave",
    "time_slot",
    "weekday",
    "day",
    "month",
];

/// Learner schema for rows built at `window_minutes` resolution.
pub fn feature_schema(window_minutes: u32) -> Vec<FeatureSpec> {
    let slots = (1440 / window_minutes.max(1)) as u16;
    vec![
        FeatureSpec::binary("tv"),
        FeatureSpec::binary("kettle"),
        FeatureSpec::binary("oven"),
        FeatureSpec::binary("microwave"),
        FeatureSpec::numeric("time_slot", 0, slots - 1),
        FeatureSpec::numeric("weekday", 0, 6),
        FeatureSpec::numeric("day", 1, 31),
        FeatureSpec::numeric("month", 1, 12),
    ]
}

impl FeatureRow {
    pub fn encode(&self) -> [u16; 8] {
        [
            u16::from(self.tv),
            u16::from(self.kettle),
            u16::from(self.oven),
            u16::from(self.microwave),
            self.time_slot,
            u16::from(self.weekday),
            u16::from(self.day),
            u16::from(self.month),
        ]
    }

    pub fn at(tz: &Tz, timestamp: i64, window_minutes: u32, on: [bool; 4]) -> Self {
        let local = calendar::to_local(tz, timestamp);
        let date = local.date();
        FeatureRow {
            tv: on[0],
            kettle: on[1],
            oven: on[2],
            microwave: on[3],
            time_slot: (calendar::minute_of_day(tz, timestamp) / window_minutes) as u16,
            weekday: calendar::weekday_index(date),
            day: date.day() as u8,
            month: date.month() as u8,
        }
    }

    pub fn all_off(&self) -> bool {
        !(self.tv || self.kettle || self.oven || self.microwave)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledRow {
    pub timestamp: i64,
    pub features: FeatureRow,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub window_minutes: u32,
    pub threshold_watts: f64,
    pub timezone: String,
    pub rules: AnnotationConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub window_minutes: u32,
    pub rows: Vec<LabeledRow>,
    pub provenance: Option<Provenance>,
}

/// Absent and total row counts for one weekday.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WeekdayCount {
    pub absent: usize,
    pub total: usize,
}

pub const WEEKDAY_NAMES: [&str; 7] = [
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];

impl LabeledDataset {
    pub fn label_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for r in &self.rows {
            c[r.label.index()] += 1;
        }
        c
    }

    pub fn weekday_histogram(&self) -> [WeekdayCount; 7] {
        let mut h = [WeekdayCount::default(); 7];
        for r in &self.rows {
            let e = &mut h[usize::from(r.features.weekday)];
            e.total += 1;
            e.absent += usize::from(r.label == Label::Absent);
        }
        h
    }

    pub fn to_examples(&self) -> Examples {
        let mut ex = Examples::new(feature_schema(self.window_minutes));
        for r in &self.rows {
            ex.push(&r.features.encode(), r.label)
                .expect("feature rows are encoded within the schema");
        }
        ex
    }
}

pub const DATASET_CSV_HEADER: &str =
    "timestamp,tv,kettle,oven,microwave,time_slot,weekday,day,month,label";

pub fn write_dataset_csv<W: Write>(ds: &LabeledDataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{DATASET_CSV_HEADER}")?;
    for r in &ds.rows {
        let f = &r.features;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.timestamp,
            u8::from(f.tv),
            u8::from(f.kettle),
            u8::from(f.oven),
            u8::from(f.microwave),
            f.time_slot,
            f.weekday,
            f.day,
            f.month,
            r.label.index()
        )?;
    }
    Ok(())
}

pub fn read_dataset_csv<R: BufRead>(
    reader: R,
    window_minutes: u32,
) -> Result<LabeledDataset, DatasetError> {
    let schema = feature_schema(window_minutes);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != DATASET_CSV_HEADER {
        return Err(DatasetError::Parse {
            line: 1,
            message: format!("expected header `{DATASET_CSV_HEADER}`"),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let bad = |message: String| DatasetError::Parse {
            line: lineno,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(bad(format!("expected 10 fields, got {}", fields.len())));
        }
        let timestamp: i64 = fields[0].parse().map_err(|_| bad("bad timestamp".into()))?;
        let mut v = [0u16; 9];
        for (slot, text) in v.iter_mut().zip(&fields[1..]) {
            *slot = text
                .parse()
                .map_err(|_| bad(format!("non-integer field {text:?}")))?;
        }
        crate::data::validate_row(&schema, &v[..8])?;
        if v[8] > 1 {
            return Err(bad(format!("label {} is not 0 or 1", v[8])));
        }
        rows.push(LabeledRow {
            timestamp,
            features: FeatureRow {
                tv: v[0] == 1,
                kettle: v[1] == 1,
                oven: v[2] == 1,
                microwave: v[3] == 1,
                time_slot: v[4],
                weekday: v[5] as u8,
                day: v[6] as u8,
                month: v[7] as u8,
            },
            label: Label::from_index(usize::from(v[8])),
        });
    }
    Ok(LabeledDataset {
        window_minutes,
        rows,
        provenance: None,
    })
}

pub const HISTOGRAM_CSV_HEADER: &str = "weekday,name,absent_rows,total_rows";

pub fn write_histogram_csv<W: Write>(ds: &LabeledDataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{HISTOGRAM_CSV_HEADER}")?;
    for (i, c) in ds.weekday_histogram().iter().enumerate() {
        writeln!(out, "{},{},{},{}", i, WEEKDAY_NAMES[i], c.absent, c.total)?;
    }
    Ok(())
}

/// One row per grid window; a window is absent iff its start lies inside a
/// segment of any outing.
pub fn build_dataset(grid: &BinarizedGrid, annotation: &Annotation) -> LabeledDataset {
    let segments = annotation.merged_segments();
    let mut seg = 0;
    let rows = grid
        .starts()
        .iter()
        .zip(grid.states())
        .map(|(&t, &on)| {
            while seg < segments.len() && segments[seg].1 <= t {
                seg += 1;
            }
            let absent = seg < segments.len() && segments[seg].0 <= t;
            LabeledRow {
                timestamp: t,
                features: FeatureRow::at(grid.timezone(), t, grid.window_minutes(), on),
                label: Label::from_absent(absent),
            }
        })
        .collect();
    LabeledDataset {
        window_minutes: grid.window_minutes(),
        rows,
        provenance: Some(Provenance {
            seed: annotation.seed,
            window_minutes: grid.window_minutes(),
            threshold_watts: grid.threshold_watts(),
            timezone: grid.timezone().name().to_string(),
            rules: annotation.config.clone(),
        }),
    }
}
