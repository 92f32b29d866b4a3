use chrono_tz::Tz;

use super::DatasetError;
use crate::ingest::{binarize, ResampledSeries};
use crate::Appliance;

/// On/off state of the four appliances on a shared contiguous window grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarizedGrid {
    tz: Tz,
    window_minutes: u32,
    threshold_watts: f64,
    starts: Vec<i64>,
    states: Vec<[bool; 4]>,
}

impl BinarizedGrid {
    /// `channels` must hold each appliance exactly once on identical grids.
    pub fn from_channels(
        channels: &[ResampledSeries],
        threshold_watts: f64,
        tz: Tz,
    ) -> Result<Self, DatasetError> {
        let mut by_appliance: [Option<&ResampledSeries>; 4] = [None; 4];
        for c in channels {
            let a = Appliance::from_name(&c.appliance).ok_or_else(|| {
                DatasetError::Alignment(format!("unknown appliance `{}`", c.appliance))
            })?;
            if by_appliance[a.index()].replace(c).is_some() {
                return Err(DatasetError::Alignment(format!(
                    "duplicate channel `{}`",
                    c.appliance
                )));
            }
        }
        let mut chans = Vec::with_capacity(4);
        for a in Appliance::ALL {
            chans.push(by_appliance[a.index()].ok_or_else(|| {
                DatasetError::Alignment(format!("missing channel `{}`", a.name()))
            })?);
        }
        let reference = chans[0];
        for c in &chans[1..] {
            if c.window_minutes != reference.window_minutes {
                return Err(DatasetError::Alignment(format!(
                    "`{}` uses {}-minute windows, `{}` uses {}",
                    c.appliance, c.window_minutes, reference.appliance, reference.window_minutes
                )));
            }
            let same = c.values.len() == reference.values.len()
                && c.values
                    .iter()
                    .zip(&reference.values)
                    .all(|(a, b)| a.start == b.start);
            if !same {
                return Err(DatasetError::Alignment(format!(
                    "`{}` and `{}` cover different windows",
                    c.appliance, reference.appliance
                )));
            }
        }
        let starts: Vec<i64> = reference.values.iter().map(|w| w.start).collect();
        let states = (0..starts.len())
            .map(|i| {
                let mut s = [false; 4];
                for (slot, c) in s.iter_mut().zip(&chans) {
                    *slot = binarize(c.values[i].mean_watts, threshold_watts).is_on();
                }
                s
            })
            .collect();
        Ok(BinarizedGrid {
            tz,
            window_minutes: reference.window_minutes,
            threshold_watts,
            starts,
            states,
        })
    }

    /// Grid from explicit states; `starts` must be contiguous.
    pub fn from_states(
        tz: Tz,
        window_minutes: u32,
        first_start: i64,
        states: Vec<[bool; 4]>,
    ) -> Self {
        let step = i64::from(window_minutes) * 60;
        let starts = (0..states.len() as i64)
            .map(|i| first_start + i * step)
            .collect();
        BinarizedGrid {
            tz,
            window_minutes,
            threshold_watts: crate::ingest::DEFAULT_THRESHOLD_WATTS,
            starts,
            states,
        }
    }

    pub fn timezone(&self) -> &Tz {
        &self.tz
    }

    pub fn window_minutes(&self) -> u32 {
        self.window_minutes
    }

    pub fn window_secs(&self) -> i64 {
        i64::from(self.window_minutes) * 60
    }

    pub fn threshold_watts(&self) -> f64 {
        self.threshold_watts
    }

    pub fn starts(&self) -> &[i64] {
        &self.starts
    }

    pub fn states(&self) -> &[[bool; 4]] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    /// First instant after the last window.
    pub fn end(&self) -> i64 {
        self.starts.last().map_or(0, |s| s + self.window_secs())
    }

    /// Index of the first window starting at or after `t`.
    pub fn lower_bound(&self, t: i64) -> usize {
        self.starts.partition_point(|&s| s < t)
    }

    pub fn all_off(&self, i: usize) -> bool {
        self.states[i].iter().all(|on| !on)
    }
}

/// Trims every channel to the span all of them cover.
pub fn align_channels(channels: &[ResampledSeries]) -> Result<Vec<ResampledSeries>, DatasetError> {
    let first = channels
        .iter()
        .filter_map(|c| c.values.first().map(|w| w.start))
        .max()
        .ok_or_else(|| DatasetError::Alignment("no channels".into()))?;
    let last = channels
        .iter()
        .map(|c| c.values.last().map_or(i64::MIN, |w| w.start))
        .min()
        .unwrap_or(i64::MIN);
    if last < first {
        return Err(DatasetError::Alignment(
            "channels do not overlap in time".into(),
        ));
    }
    Ok(channels
        .iter()
        .map(|c| ResampledSeries {
            appliance: c.appliance.clone(),
            window_minutes: c.window_minutes,
            values: c
                .values
                .iter()
                .filter(|w| w.start >= first && w.start <= last)
                .copied()
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Window;
    use chrono_tz::Europe::London;

    fn chan(name: &str, start: i64, watts: &[f64]) -> ResampledSeries {
        ResampledSeries {
            appliance: name.into(),
            window_minutes: 30,
            values: watts
                .iter()
                .enumerate()
                .map(|(i, &w)| Window {
                    start: start + i as i64 * 1800,
                    mean_watts: w,
                    sample_count: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn binarizes_at_threshold() {
        let chans = vec![
            chan("tv", 0, &[1.0, 100.0]),
            chan("kettle", 0, &[500.0, 0.0]),
            chan("oven", 0, &[10.0, 9.9]),
            chan("microwave", 0, &[0.0, 0.0]),
        ];
        let g = BinarizedGrid::from_channels(&chans, 10.0, London).unwrap();
        assert_eq!(
            g.states(),
            &[[false, true, true, false], [true, false, false, false]]
        );
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let chans = vec![
            chan("tv", 0, &[1.0, 1.0]),
            chan("kettle", 1800, &[1.0, 1.0]),
            chan("oven", 0, &[1.0, 1.0]),
            chan("microwave", 0, &[1.0, 1.0]),
        ];
        assert!(matches!(
            BinarizedGrid::from_channels(&chans, 10.0, London),
            Err(DatasetError::Alignment(_))
        ));
        assert!(BinarizedGrid::from_channels(&chans[..3], 10.0, London).is_err());
        let aligned = align_channels(&chans).unwrap();
        assert!(aligned
            .iter()
            .all(|c| c.values.len() == 1 && c.values[0].start == 1800));
        BinarizedGrid::from_channels(&aligned, 10.0, London).unwrap();
    }
}
