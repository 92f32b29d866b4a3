use chrono::{Duration, NaiveDate};
use chrono_tz::Tz;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{IngestError, RawSample, RawSeries, ResampledSeries, Resampler};
use crate::calendar;
use crate::seed;
use crate::Appliance;

pub const SAMPLE_PERIOD_SECS: i64 = 6;

const STANDBY_BASE: f64 = 0.8;
const STANDBY_SPREAD: f64 = 0.4;

#[derive(Debug, Clone, Copy)]
struct Burst {
    start: i64,
    end: i64,
    watts: f64,
}

fn nominal_watts(a: Appliance) -> f64 {
    match a {
        Appliance::Tv => 110.0,
        Appliance::Kettle => 2000.0,
        Appliance::Oven => 2200.0,
        Appliance::Microwave => 1100.0,
    }
}

struct DayPlanner<'a> {
    tz: &'a Tz,
    date: NaiveDate,
    rng: ChaCha8Rng,
    bursts: [Vec<Burst>; 4],
}

impl DayPlanner<'_> {
    fn add(&mut self, a: Appliance, start_min: f64, minutes: f64) {
        let start = calendar::local_minute(self.tz, self.date, 0) + (start_min * 60.0) as i64;
        let end = start + (minutes * 60.0).max(SAMPLE_PERIOD_SECS as f64) as i64;
        self.bursts[a.index()].push(Burst {
            start,
            end,
            watts: nominal_watts(a),
        });
    }

    fn maybe(&mut self, p: f64, a: Appliance, start: (f64, f64), minutes: (f64, f64)) {
        if self.rng.gen_bool(p) {
            let s = self.rng.gen_range(start.0..start.1);
            let m = self.rng.gen_range(minutes.0..minutes.1);
            self.add(a, s, m);
        }
    }

    fn evening(&mut self, back_from: f64, back_to: f64) {
        let back = self.rng.gen_range(back_from..back_to);
        self.maybe(0.8, Appliance::Kettle, (back, back + 15.0), (2.0, 4.0));
        self.maybe(
            0.9,
            Appliance::Tv,
            (back + 10.0, back + 60.0),
            (90.0, 300.0),
        );
        self.maybe(0.5, Appliance::Oven, (1080.0, 1170.0), (30.0, 70.0));
        self.maybe(0.4, Appliance::Microwave, (1080.0, 1260.0), (2.0, 5.0));
        self.maybe(0.3, Appliance::Kettle, (1230.0, 1320.0), (2.0, 4.0));
    }

    fn workday(&mut self) {
        let wake = self.rng.gen_range(375.0..435.0);
        // Morning routine finishes before 08:20 so the 08:30 window is idle.
        let cap = 500.0;
        let morning = |p: &mut Self, prob: f64, a: Appliance, lo: f64, hi: f64, m: (f64, f64)| {
            if p.rng.gen_bool(prob) {
                let s = p.rng.gen_range(wake + lo..wake + hi).min(cap - m.0);
                let len = p.rng.gen_range(m.0..m.1).min(cap - s);
                p.add(a, s, len);
            }
        };
        morning(self, 0.85, Appliance::Kettle, 5.0, 20.0, (2.0, 4.0));
        morning(self, 0.3, Appliance::Microwave, 10.0, 40.0, (1.0, 3.0));
        morning(self, 0.35, Appliance::Tv, 0.0, 20.0, (15.0, 50.0));

        if self.rng.gen_bool(0.15) {
            // Working from home.
            let n = self.rng.gen_range(2..=5);
            for _ in 0..n {
                let a = [Appliance::Kettle, Appliance::Microwave, Appliance::Tv]
                    [self.rng.gen_range(0..3)];
                let len = if a == Appliance::Tv {
                    (20.0, 90.0)
                } else {
                    (2.0, 5.0)
                };
                self.maybe(1.0, a, (510.0, 950.0), len);
            }
            self.evening(960.0, 1080.0);
        } else {
            self.maybe(0.05, Appliance::Kettle, (510.0, 950.0), (2.0, 4.0));
            self.evening(990.0, 1110.0);
        }
    }

    fn weekend(&mut self) {
        let wake = self.rng.gen_range(450.0..570.0);
        self.maybe(0.9, Appliance::Kettle, (wake, wake + 20.0), (2.0, 4.0));
        self.maybe(0.6, Appliance::Tv, (wake, wake + 40.0), (30.0, 120.0));
        self.maybe(0.5, Appliance::Microwave, (720.0, 810.0), (2.0, 5.0));
        self.maybe(0.5, Appliance::Kettle, (720.0, 810.0), (2.0, 4.0));
        self.maybe(0.4, Appliance::Tv, (840.0, 1020.0), (30.0, 120.0));
        self.evening(1020.0, 1140.0);
    }
}

fn plan_bursts(tz: &Tz, start: NaiveDate, num_days: i64, seed_value: u64) -> [Vec<Burst>; 4] {
    let mut all: [Vec<Burst>; 4] = Default::default();
    for d in 0..num_days {
        let date = start + Duration::days(d);
        let mut planner = DayPlanner {
            tz,
            date,
            rng: seed::rng_for(seed_value, &format!("synth/day/{date}")),
            bursts: Default::default(),
        };
        if calendar::is_weekend(date) {
            planner.weekend();
        } else {
            planner.workday();
        }
        for (acc, b) in all.iter_mut().zip(planner.bursts) {
            acc.extend(b);
        }
    }
    for b in &mut all {
        b.sort_by_key(|x| (x.start, x.end));
    }
    all
}

/// Feeds one appliance's 6-second trace into `sink`.
fn emit_channel(
    bursts: &[Burst],
    t0: i64,
    count: i64,
    rng: &mut ChaCha8Rng,
    mut sink: impl FnMut(RawSample) -> Result<(), IngestError>,
) -> Result<(), IngestError> {
    let mut next = 0;
    let mut active: Option<f64> = None;
    let mut active_end = i64::MIN;
    for i in 0..count {
        let t = t0 + i * SAMPLE_PERIOD_SECS;
        while next < bursts.len() && bursts[next].start <= t {
            if bursts[next].end > t {
                active = Some(bursts[next].watts);
                active_end = active_end.max(bursts[next].end);
            }
            next += 1;
        }
        if t >= active_end {
            active = None;
        }
        let watts = match active {
            Some(nominal) => (nominal * rng.gen_range(0.95..1.05)).clamp(30.0, 3000.0),
            None => STANDBY_BASE + rng.gen_range(0.0..STANDBY_SPREAD),
        };
        sink(RawSample {
            timestamp: t,
            watts,
        })?;
    }
    Ok(())
}

fn check_days(num_days: i64) -> Result<(), IngestError> {
    if num_days <= 0 {
        return Err(IngestError::InvalidArgument(format!(
            "num_days must be at least 1, got {num_days}"
        )));
    }
    Ok(())
}

/// Deterministic four-appliance household at 6-second resolution starting at
/// local midnight of `start`. Standby readings sit in 0.8–1.2 W; usage
/// bursts in 30–3000 W happen in morning and evening routines, with weekday
/// working hours mostly idle.
pub fn synth_household(
    start: NaiveDate,
    num_days: i64,
    seed_value: u64,
    tz: Tz,
) -> Result<Vec<RawSeries>, IngestError> {
    check_days(num_days)?;
    let bursts = plan_bursts(&tz, start, num_days, seed_value);
    let t0 = calendar::local_minute(&tz, start, 0);
    let count = num_days * 86_400 / SAMPLE_PERIOD_SECS;
    Appliance::ALL
        .iter()
        .map(|&a| {
            let mut rng = seed::rng_for(seed_value, &format!("synth/noise/{}", a.name()));
            let mut samples = Vec::with_capacity(count as usize);
            emit_channel(&bursts[a.index()], t0, count, &mut rng, |s| {
                samples.push(s);
                Ok(())
            })?;
            Ok(RawSeries {
                appliance: a.name().to_string(),
                samples,
            })
        })
        .collect()
}

/// Same traces as [`synth_household`], resampled on the fly without
/// holding the raw samples.
pub fn synth_household_resampled(
    start: NaiveDate,
    num_days: i64,
    seed_value: u64,
    tz: Tz,
    window_minutes: u32,
) -> Result<Vec<ResampledSeries>, IngestError> {
    check_days(num_days)?;
    let bursts = plan_bursts(&tz, start, num_days, seed_value);
    let t0 = calendar::local_minute(&tz, start, 0);
    let count = num_days * 86_400 / SAMPLE_PERIOD_SECS;
    Appliance::ALL
        .iter()
        .map(|&a| {
            let mut rng = seed::rng_for(seed_value, &format!("synth/noise/{}", a.name()));
            let mut r = Resampler::new(a.name(), window_minutes, tz)?;
            emit_channel(&bursts[a.index()], t0, count, &mut rng, |s| r.push(s))?;
            r.finish()
        })
        .collect()
}
