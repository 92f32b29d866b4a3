use std::io::{BufRead, Write};

use chrono::{DateTime, TimeZone};
use chrono_tz::{OffsetComponents, Tz};

use super::{check_window, IngestError, RawSample, RawSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    /// UTC epoch seconds of the window's first instant.
    pub start: i64,
    pub mean_watts: f64,
    pub sample_count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampledSeries {
    pub appliance: String,
    pub window_minutes: u32,
    pub values: Vec<Window>,
}

impl ResampledSeries {
    pub fn window_secs(&self) -> i64 {
        i64::from(self.window_minutes) * 60
    }
}

/// Grid phase (seconds) so that window starts fall on local wall-clock
/// multiples of the window in the zone's standard time. Daylight-saving
/// shifts of a whole hour keep 30- and 60-minute grids on local boundaries.
fn grid_phase(tz: &Tz, timestamp: i64) -> i64 {
    let utc = DateTime::from_timestamp(timestamp, 0).expect("timestamp in chrono range");
    let offset = tz.offset_from_utc_datetime(&utc.naive_utc());
    offset.base_utc_offset().num_seconds()
}

/// Incremental mean-per-window accumulator; samples must arrive in
/// strictly increasing timestamp order.
pub struct Resampler {
    appliance: String,
    window_minutes: u32,
    window_secs: i64,
    phase: Option<i64>,
    tz: Tz,
    current: Option<(i64, f64, u32)>,
    previous: Option<i64>,
    values: Vec<Window>,
}

impl Resampler {
    pub fn new(
        appliance: impl Into<String>,
        window_minutes: u32,
        tz: Tz,
    ) -> Result<Self, IngestError> {
        check_window(window_minutes)?;
        Ok(Resampler {
            appliance: appliance.into(),
            window_minutes,
            window_secs: i64::from(window_minutes) * 60,
            phase: None,
            tz,
            current: None,
            previous: None,
            values: Vec::new(),
        })
    }

    fn start_of(&self, timestamp: i64) -> i64 {
        let phase = self.phase.unwrap_or(0);
        timestamp - (timestamp + phase).rem_euclid(self.window_secs)
    }

    pub fn push(&mut self, sample: RawSample) -> Result<(), IngestError> {
        if let Some(prev) = self.previous {
            if sample.timestamp <= prev {
                return Err(IngestError::Ordering {
                    line: self.values.len() + 1,
                    previous: prev,
                    timestamp: sample.timestamp,
                });
            }
        }
        self.previous = Some(sample.timestamp);
        if self.phase.is_none() {
            self.phase = Some(grid_phase(&self.tz, sample.timestamp));
        }
        let start = self.start_of(sample.timestamp);
        match self.current.as_mut() {
            Some((s, sum, count)) if *s == start => {
                *sum += sample.watts;
                *count += 1;
            }
            Some(&mut (s, sum, count)) => {
                self.values.push(Window {
                    start: s,
                    mean_watts: sum / f64::from(count),
                    sample_count: count,
                });
                let mut gap = s + self.window_secs;
                while gap < start {
                    self.values.push(Window {
                        start: gap,
                        mean_watts: 0.0,
                        sample_count: 0,
                    });
                    gap += self.window_secs;
                }
                self.current = Some((start, sample.watts, 1));
            }
            None => self.current = Some((start, sample.watts, 1)),
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<ResampledSeries, IngestError> {
        let Some((s, sum, count)) = self.current.take() else {
            return Err(IngestError::Empty(self.appliance));
        };
        self.values.push(Window {
            start: s,
            mean_watts: sum / f64::from(count),
            sample_count: count,
        });
        Ok(ResampledSeries {
            appliance: self.appliance,
            window_minutes: self.window_minutes,
            values: self.values,
        })
    }
}

/// Mean power per fixed window. Windows inside the covered span that hold
/// no samples are emitted with mean 0 and count 0.
pub fn resample(
    series: &RawSeries,
    window_minutes: u32,
    tz: Tz,
) -> Result<ResampledSeries, IngestError> {
    let mut r = Resampler::new(series.appliance.clone(), window_minutes, tz)?;
    for s in &series.samples {
        r.push(*s)?;
    }
    r.finish()
}

pub const RESAMPLED_CSV_HEADER: &str = "window_start,appliance,mean_watts,sample_count";

pub fn write_resampled_csv<W: Write>(series: &ResampledSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{RESAMPLED_CSV_HEADER}")?;
    for w in &series.values {
        writeln!(
            out,
            "{},{},{},{}",
            w.start, series.appliance, w.mean_watts, w.sample_count
        )?;
    }
    Ok(())
}

/// Reads one appliance's resampled CSV. The window length is supplied by
/// the caller and checked against the spacing of the rows.
pub fn read_resampled_csv<R: BufRead>(
    reader: R,
    window_minutes: u32,
) -> Result<ResampledSeries, IngestError> {
    check_window(window_minutes)?;
    let step = i64::from(window_minutes) * 60;
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != RESAMPLED_CSV_HEADER {
        return Err(IngestError::Parse {
            line: 1,
            message: format!("expected header `{RESAMPLED_CSV_HEADER}`"),
        });
    }
    let mut appliance: Option<String> = None;
    let mut values: Vec<Window> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| IngestError::Parse {
            line: lineno,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", fields.len())));
        }
        let start: i64 = fields[0]
            .parse()
            .map_err(|_| bad("bad window_start".into()))?;
        let mean_watts: f64 = fields[2]
            .parse()
            .map_err(|_| bad("bad mean_watts".into()))?;
        let sample_count: u32 = fields[3]
            .parse()
            .map_err(|_| bad("bad sample_count".into()))?;
        if !(mean_watts.is_finite() && mean_watts >= 0.0) {
            return Err(bad(format!("mean_watts {mean_watts} out of range")));
        }
        match &appliance {
            None => appliance = Some(fields[1].to_string()),
            Some(a) if a != fields[1] => {
                return Err(bad(format!("mixed appliances `{a}` and `{}`", fields[1])))
            }
            _ => {}
        }
        if let Some(prev) = values.last() {
            if start != prev.start + step {
                return Err(bad(format!(
                    "window {start} is not contiguous with {}",
                    prev.start
                )));
            }
        }
        values.push(Window {
            start,
            mean_watts,
            sample_count,
        });
    }
    let appliance = appliance.ok_or_else(|| IngestError::Empty("<csv>".into()))?;
    Ok(ResampledSeries {
        appliance,
        window_minutes,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono_tz::Europe::London;
    use proptest::prelude::*;

    // 2013-01-01T00:00:00Z, a window boundary in London winter time.
    const T0: i64 = 1_356_998_400;

    fn series(samples: &[(i64, f64)]) -> RawSeries {
        RawSeries::new(
            "kettle",
            samples
                .iter()
                .map(|&(timestamp, watts)| RawSample { timestamp, watts })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn mean_of_two_samples() {
        let r = resample(&series(&[(T0, 10.0), (T0 + 6, 20.0)]), 30, London).unwrap();
        assert_eq!(r.values.len(), 1);
        assert_eq!(r.values[0].mean_watts, 15.0);
        assert_eq!(r.values[0].start, T0);
    }

    #[test]
    fn single_sample_identity() {
        let r = resample(&series(&[(T0 + 100, 7.5)]), 30, London).unwrap();
        assert_eq!(r.values[0].mean_watts, 7.5);
        assert_eq!(r.values[0].sample_count, 1);
    }

    #[test]
    fn gap_window_is_zero() {
        let r = resample(
            &series(&[(T0, 50.0), (T0 + 3 * 1800 + 5, 50.0)]),
            30,
            London,
        )
        .unwrap();
        assert_eq!(r.values.len(), 4);
        assert_eq!((r.values[1].mean_watts, r.values[1].sample_count), (0.0, 0));
        assert_eq!((r.values[2].mean_watts, r.values[2].sample_count), (0.0, 0));
    }

    #[test]
    fn empty_input_errors() {
        let err = resample(&series(&[]), 30, London).unwrap_err();
        assert!(matches!(err, IngestError::Empty(_)));
    }

    #[test]
    fn window_must_divide_day() {
        assert!(matches!(
            resample(&series(&[(T0, 1.0)]), 7, London),
            Err(IngestError::InvalidWindow(7))
        ));
        assert!(resample(&series(&[(T0, 1.0)]), 0, London).is_err());
    }

    #[test]
    fn summer_windows_align_to_local_half_hours() {
        // 2013-07-01T07:30:00Z == 08:30 BST.
        let t = 1_372_663_800;
        let r = resample(&series(&[(t + 17, 3.0)]), 30, London).unwrap();
        assert_eq!(r.values[0].start, t);
    }

    #[test]
    fn csv_roundtrip() {
        let r = resample(
            &series(&[(T0, 10.0), (T0 + 6, 20.5), (T0 + 4000, 1.25)]),
            30,
            London,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_resampled_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("window_start,appliance,mean_watts,sample_count\n"));
        let back = read_resampled_csv(buf.as_slice(), 30).unwrap();
        assert_eq!(back, r);
    }

    fn brute_force_windows(samples: &[(i64, f64)], w: i64) -> Vec<(i64, f64, u32)> {
        let first = samples[0].0 - samples[0].0.rem_euclid(w);
        let last = samples.last().unwrap().0;
        let mut out = Vec::new();
        let mut s = first;
        while s <= last {
            let inside: Vec<f64> = samples
                .iter()
                .filter(|(t, _)| *t >= s && *t < s + w)
                .map(|&(_, v)| v)
                .collect();
            let mean = if inside.is_empty() {
                0.0
            } else {
                inside.iter().sum::<f64>() / inside.len() as f64
            };
            out.push((s, mean, inside.len() as u32));
            s += w;
        }
        out
    }

    proptest! {
        #[test]
        fn resampling_conserves_mass_and_matches_brute_force(
            offset in 0i64..5000,
            steps in proptest::collection::vec((1i64..1500, 0.0f64..3000.0), 1..120),
            window in prop::sample::select(vec![1u32, 5, 15, 30, 60]),
        ) {
            let mut t = T0 + offset;
            let samples: Vec<(i64, f64)> = steps.iter().map(|&(dt, w)| { t += dt; (t, w) }).collect();
            let r = resample(&series(&samples), window, London).unwrap();
            let w = i64::from(window) * 60;

            let raw: f64 = samples.iter().map(|s| s.1).sum();
            let back: f64 = r.values.iter().map(|v| v.mean_watts * f64::from(v.sample_count)).sum();
            prop_assert!((raw - back).abs() <= 1e-9 * raw.abs().max(1.0));

            let total: u32 = r.values.iter().map(|v| v.sample_count).sum();
            prop_assert_eq!(total as usize, samples.len());
            let span = r.values.last().unwrap().start + w - r.values[0].start;
            prop_assert_eq!(r.values.len() as i64, (span + w - 1) / w);

            let oracle = brute_force_windows(&samples, w);
            prop_assert_eq!(oracle.len(), r.values.len());
            for (o, v) in oracle.iter().zip(&r.values) {
                prop_assert_eq!(o.0, v.start);
                prop_assert_eq!(o.2, v.sample_count);
                prop_assert!((o.1 - v.mean_watts).abs() <= 1e-9 * o.1.max(1.0));
                prop_assert!(v.start.rem_euclid(w) == 0);
            }
        }
    }
}
