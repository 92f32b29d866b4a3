use std::fmt;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use chrono_tz::Tz;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::BinarizedGrid;
use crate::calendar;

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("outing probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid annotation rule: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutingKind {
    Christmas,
    SpringBreak,
    Summer,
    AutumnWeekend,
    Workday,
    Saturday,
}

impl OutingKind {
    pub const FIXED_TRIPS: [OutingKind; 4] = [
        OutingKind::Christmas,
        OutingKind::SpringBreak,
        OutingKind::Summer,
        OutingKind::AutumnWeekend,
    ];

    pub const ALL: [OutingKind; 6] = [
        OutingKind::Christmas,
        OutingKind::SpringBreak,
        OutingKind::Summer,
        OutingKind::AutumnWeekend,
        OutingKind::Workday,
        OutingKind::Saturday,
    ];

    pub fn is_fixed_trip(self) -> bool {
        Self::FIXED_TRIPS.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            OutingKind::Christmas => "christmas",
            OutingKind::SpringBreak => "spring_break",
            OutingKind::Summer => "summer",
            OutingKind::AutumnWeekend => "autumn_weekend",
            OutingKind::Workday => "workday",
            OutingKind::Saturday => "saturday",
        }
    }
}

/// Half-open `[start, end)` in UTC epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutingInterval {
    pub start: i64,
    pub end: i64,
    pub kind: OutingKind,
}

impl OutingInterval {
    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, start: i64, end: i64) -> bool {
        self.start < end && start < self.end
    }
}

/// A planned outing and the parts of it that label windows. Segments leave
/// out windows in which any appliance was on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outing {
    pub planned: OutingInterval,
    pub segments: Vec<OutingInterval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MonthDay {
    pub month: u32,
    pub day: u32,
}

impl MonthDay {
    pub const fn new(month: u32, day: u32) -> Self {
        MonthDay { month, day }
    }

    pub fn in_year(self, year: i32) -> Option<NaiveDate> {
        NaiveDate::from_ymd_opt(year, self.month, self.day)
    }
}

impl TryFrom<String> for MonthDay {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        let (m, d) = s
            .split_once('-')
            .ok_or_else(|| format!("expected MM-DD, got {s:?}"))?;
        let md = MonthDay {
            month: m.parse().map_err(|_| format!("bad month in {s:?}"))?,
            day: d.parse().map_err(|_| format!("bad day in {s:?}"))?,
        };
        // 2000 is a leap year, so Feb 29 is accepted here.
        md.in_year(2000)
            .ok_or_else(|| format!("no such date {s:?}"))?;
        Ok(md)
    }
}

impl From<MonthDay> for String {
    fn from(md: MonthDay) -> String {
        format!("{:02}-{:02}", md.month, md.day)
    }
}

/// Local wall-clock time as minutes after midnight; `24:00` is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClockTime(pub u32);

impl ClockTime {
    pub const fn hm(h: u32, m: u32) -> Self {
        ClockTime(h * 60 + m)
    }
}

impl TryFrom<String> for ClockTime {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        let (h, m) = s
            .split_once(':')
            .ok_or_else(|| format!("expected HH:MM, got {s:?}"))?;
        let h: u32 = h.parse().map_err(|_| format!("bad hour in {s:?}"))?;
        let m: u32 = m.parse().map_err(|_| format!("bad minute in {s:?}"))?;
        if m >= 60 || h * 60 + m > 1440 {
            return Err(format!("time {s:?} out of range"));
        }
        Ok(ClockTime(h * 60 + m))
    }
}

impl From<ClockTime> for String {
    fn from(t: ClockTime) -> String {
        t.to_string()
    }
}

impl fmt::Display for ClockTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaturdayRule {
    pub probability: f64,
    pub start_earliest: ClockTime,
    pub start_latest: ClockTime,
    pub min_hours: f64,
    pub max_hours: f64,
}

impl Default for SaturdayRule {
    fn default() -> Self {
        SaturdayRule {
            probability: 0.7,
            start_earliest: ClockTime::hm(9, 0),
            start_latest: ClockTime::hm(18, 0),
            min_hours: 2.0,
            max_hours: 6.0,
        }
    }
}

impl SaturdayRule {
    fn validate(&self) -> Result<(), AnnotationError> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(AnnotationError::InvalidProbability(self.probability));
        }
        if self.start_earliest > self.start_latest || self.start_latest.0 >= 1440 {
            return Err(AnnotationError::InvalidConfig(format!(
                "Saturday start range {}..{} is empty",
                self.start_earliest, self.start_latest
            )));
        }
        if !(self.min_hours > 0.0 && self.min_hours <= self.max_hours && self.max_hours <= 24.0) {
            return Err(AnnotationError::InvalidConfig(format!(
                "Saturday duration range {}..{} h is invalid",
                self.min_hours, self.max_hours
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationConfig {
    pub christmas: bool,
    pub spring_break: bool,
    pub summer: bool,
    pub autumn_weekend: bool,
    pub workdays: bool,
    pub saturdays: bool,
    pub spring_window: [MonthDay; 2],
    pub spring_days: u32,
    pub summer_start_window: [MonthDay; 2],
    pub summer_days: u32,
    pub autumn_window: [MonthDay; 2],
    pub workday_start: ClockTime,
    pub workday_end: ClockTime,
    pub saturday: SaturdayRule,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        AnnotationConfig {
            christmas: true,
            spring_break: true,
            summer: true,
            autumn_weekend: true,
            workdays: true,
            saturdays: true,
            spring_window: [MonthDay::new(3, 15), MonthDay::new(5, 31)],
            spring_days: 4,
            summer_start_window: [MonthDay::new(8, 1), MonthDay::new(8, 7)],
            summer_days: 14,
            autumn_window: [MonthDay::new(9, 1), MonthDay::new(11, 30)],
            workday_start: ClockTime::hm(8, 30),
            workday_end: ClockTime::hm(16, 0),
            saturday: SaturdayRule::default(),
        }
    }
}

impl AnnotationConfig {
    /// No outing rules at all.
    pub fn disabled() -> Self {
        AnnotationConfig {
            christmas: false,
            spring_break: false,
            summer: false,
            autumn_weekend: false,
            workdays: false,
            saturdays: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), AnnotationError> {
        let bad = |m: String| Err(AnnotationError::InvalidConfig(m));
        if self.spring_days == 0 || self.summer_days == 0 {
            return bad("trip lengths must be at least one day".into());
        }
        for (name, w) in [
            ("spring_window", self.spring_window),
            ("summer_start_window", self.summer_start_window),
            ("autumn_window", self.autumn_window),
        ] {
            if w[0] > w[1] {
                return bad(format!("{name} ends before it starts"));
            }
        }
        let spring_len = date_span(self.spring_window, 2001);
        if spring_len + 1 < i64::from(self.spring_days) {
            return bad("spring window is shorter than the spring break".into());
        }
        if self.workday_start >= self.workday_end {
            return bad("workday outing must start before it ends".into());
        }
        self.saturday.validate()
    }
}

fn date_span(w: [MonthDay; 2], year: i32) -> i64 {
    match (w[0].in_year(year), w[1].in_year(year)) {
        (Some(a), Some(b)) => (b - a).num_days(),
        _ => 0,
    }
}

fn day_interval(tz: &Tz, first: NaiveDate, days: i64, kind: OutingKind) -> OutingInterval {
    OutingInterval {
        start: calendar::local_minute(tz, first, 0),
        end: calendar::local_minute(tz, first + Duration::days(days), 0),
        kind,
    }
}

fn window_dates(w: [MonthDay; 2], year: i32) -> Option<(NaiveDate, NaiveDate)> {
    // Feb 29 ends fall back to Feb 28 in common years.
    let fix = |md: MonthDay| {
        md.in_year(year)
            .or_else(|| MonthDay::new(md.month, md.day - 1).in_year(year))
    };
    Some((fix(w[0])?, fix(w[1])?))
}

/// Christmas, spring break, summer holiday and autumn weekend for `year`.
///
/// Christmas covers Dec 24–26, running to Dec 28 when Dec 26 falls on a
/// weekend. The other trips start on a uniformly drawn day inside their
/// configured windows.
pub fn plan_fixed_trips<R: Rng>(
    year: i32,
    rng: &mut R,
    config: &AnnotationConfig,
    tz: &Tz,
) -> Vec<OutingInterval> {
    let mut out = Vec::new();
    if config.christmas {
        let eve = NaiveDate::from_ymd_opt(year, 12, 24).expect("valid date");
        let boxing = NaiveDate::from_ymd_opt(year, 12, 26).expect("valid date");
        let days = if calendar::is_weekend(boxing) { 5 } else { 3 };
        out.push(day_interval(tz, eve, days, OutingKind::Christmas));
    }
    if config.spring_break {
        if let Some((first, last)) = window_dates(config.spring_window, year) {
            let days = i64::from(config.spring_days);
            let latest = last - Duration::days(days - 1);
            let offset = rng.gen_range(0..=(latest - first).num_days().max(0));
            out.push(day_interval(
                tz,
                first + Duration::days(offset),
                days,
                OutingKind::SpringBreak,
            ));
        }
    }
    if config.summer {
        if let Some((first, last)) = window_dates(config.summer_start_window, year) {
            let offset = rng.gen_range(0..=(last - first).num_days());
            out.push(day_interval(
                tz,
                first + Duration::days(offset),
                i64::from(config.summer_days),
                OutingKind::Summer,
            ));
        }
    }
    if config.autumn_weekend {
        if let Some((first, last)) = window_dates(config.autumn_window, year) {
            let saturdays: Vec<NaiveDate> = first
                .iter_days()
                .take_while(|d| *d < last)
                .filter(|d| d.weekday() == Weekday::Sat)
                .collect();
            if !saturdays.is_empty() {
                let s = saturdays[rng.gen_range(0..saturdays.len())];
                out.push(day_interval(tz, s, 2, OutingKind::AutumnWeekend));
            }
        }
    }
    out
}

/// Labeling segments of `planned`: maximal runs of grid windows whose start
/// lies in the interval and whose appliances are all off.
pub fn clip_to_idle(planned: OutingInterval, grid: &BinarizedGrid) -> Vec<OutingInterval> {
    let w = grid.window_secs();
    let starts = grid.starts();
    let mut segments = Vec::new();
    let mut run: Option<(i64, i64)> = None;
    let mut i = grid.lower_bound(planned.start);
    while i < starts.len() && starts[i] < planned.end {
        if grid.all_off(i) {
            let end = (starts[i] + w).min(planned.end);
            run = Some(match run {
                Some((s, _)) => (s, end),
                None => (starts[i], end),
            });
        } else if let Some((s, e)) = run.take() {
            segments.push(OutingInterval {
                start: s,
                end: e,
                kind: planned.kind,
            });
        }
        i += 1;
    }
    if let Some((s, e)) = run {
        segments.push(OutingInterval {
            start: s,
            end: e,
            kind: planned.kind,
        });
    }
    segments
}

fn covered_dates(grid: &BinarizedGrid) -> Vec<NaiveDate> {
    let (Some(&first), Some(&last)) = (grid.starts().first(), grid.starts().last()) else {
        return Vec::new();
    };
    let tz = grid.timezone();
    let (a, b) = (
        calendar::local_date(tz, first),
        calendar::local_date(tz, last),
    );
    a.iter_days().take_while(|d| *d <= b).collect()
}

/// Weekday work outings: `[workday_start, workday_end)` on every Monday to
/// Friday outside a fixed trip when every window touching that span is
/// present in the grid with all appliances off.
pub fn annotate_workdays(
    grid: &BinarizedGrid,
    config: &AnnotationConfig,
    trips: &[OutingInterval],
) -> Vec<Outing> {
    let tz = grid.timezone();
    let w = grid.window_secs();
    let mut out = Vec::new();
    if grid.is_empty() {
        return out;
    }
    for date in covered_dates(grid) {
        if calendar::is_weekend(date) {
            continue;
        }
        let start = calendar::local_minute(tz, date, i64::from(config.workday_start.0));
        let end = calendar::local_minute(tz, date, i64::from(config.workday_end.0));
        if trips.iter().any(|t| t.overlaps(start, end)) {
            continue;
        }
        if grid.starts()[0] > start || grid.end() < end {
            continue;
        }
        let from = grid.lower_bound(start - w + 1);
        let to = grid.lower_bound(end);
        if (from..to).all(|i| grid.all_off(i)) {
            let iv = OutingInterval {
                start,
                end,
                kind: OutingKind::Workday,
            };
            out.push(Outing {
                planned: iv,
                segments: vec![iv],
            });
        }
    }
    out
}

/// Random Saturday outings, clipped to windows with every appliance off.
pub fn annotate_saturdays<R: Rng>(
    grid: &BinarizedGrid,
    rng: &mut R,
    rule: &SaturdayRule,
    trips: &[OutingInterval],
) -> Result<Vec<Outing>, AnnotationError> {
    rule.validate()?;
    let tz = grid.timezone();
    let mut out = Vec::new();
    for date in covered_dates(grid) {
        if date.weekday() != Weekday::Sat {
            continue;
        }
        let (day_start, day_end) = (
            calendar::local_minute(tz, date, 0),
            calendar::local_day_end(tz, date),
        );
        if trips.iter().any(|t| t.overlaps(day_start, day_end)) {
            continue;
        }
        if !rng.gen_bool(rule.probability) {
            continue;
        }
        let start_min = rng.gen_range(rule.start_earliest.0..=rule.start_latest.0);
        let lo = (rule.min_hours * 60.0).round() as u32;
        let hi = (rule.max_hours * 60.0).round() as u32;
        let duration = rng.gen_range(lo..=hi);
        let end_min = (start_min + duration).min(1440);
        let planned = OutingInterval {
            start: calendar::local_minute(tz, date, i64::from(start_min)),
            end: if end_min == 1440 {
                day_end
            } else {
                calendar::local_minute(tz, date, i64::from(end_min))
            },
            kind: OutingKind::Saturday,
        };
        out.push(Outing {
            planned,
            segments: clip_to_idle(planned, grid),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub seed: u64,
    pub config: AnnotationConfig,
    pub outings: Vec<Outing>,
}

impl Annotation {
    /// Sorted, merged `(start, end)` pairs of every labeling segment.
    pub fn merged_segments(&self) -> Vec<(i64, i64)> {
        let mut segs: Vec<(i64, i64)> = self
            .outings
            .iter()
            .flat_map(|o| o.segments.iter().map(|s| (s.start, s.end)))
            .collect();
        segs.sort_unstable();
        let mut merged: Vec<(i64, i64)> = Vec::with_capacity(segs.len());
        for (s, e) in segs {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        merged
    }

    pub fn count(&self, kind: OutingKind) -> usize {
        self.outings
            .iter()
            .filter(|o| o.planned.kind == kind)
            .count()
    }

    /// Audit manifest: seed, rules and every outing with local times.
    pub fn manifest_json(&self, tz: &Tz) -> String {
        #[derive(Serialize)]
        struct Entry {
            kind: OutingKind,
            start: i64,
            end: i64,
            start_local: String,
            end_local: String,
            segments: Vec<[i64; 2]>,
        }
        #[derive(Serialize)]
        struct Manifest<'a> {
            seed: u64,
            timezone: &'a str,
            rules: &'a AnnotationConfig,
            outings: Vec<Entry>,
        }
        let fmt = |t: i64| {
            calendar::to_local(tz, t)
                .format("%Y-%m-%d %H:%M")
                .to_string()
        };
        let m = Manifest {
            seed: self.seed,
            timezone: tz.name(),
            rules: &self.config,
            outings: self
                .outings
                .iter()
                .map(|o| Entry {
                    kind: o.planned.kind,
                    start: o.planned.start,
                    end: o.planned.end,
                    start_local: fmt(o.planned.start),
                    end_local: fmt(o.planned.end),
                    segments: o.segments.iter().map(|s| [s.start, s.end]).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n"
    }
}

/// Applies every enabled rule with one RNG stream seeded by `seed`: fixed
/// trips year by year, then workdays, then Saturdays.
pub fn annotate(
    grid: &BinarizedGrid,
    config: &AnnotationConfig,
    seed: u64,
) -> Result<Annotation, AnnotationError> {
    config.validate()?;
    let mut rng = crate::seed::rng(seed);
    let dates = covered_dates(grid);
    let mut outings = Vec::new();
    let mut trips = Vec::new();
    if let (Some(first), Some(last)) = (dates.first(), dates.last()) {
        for year in first.year()..=last.year() {
            for planned in plan_fixed_trips(year, &mut rng, config, grid.timezone()) {
                trips.push(planned);
                outings.push(Outing {
                    planned,
                    segments: clip_to_idle(planned, grid),
                });
            }
        }
    }
    if config.workdays {
        outings.extend(annotate_workdays(grid, config, &trips));
    }
    if config.saturdays {
        outings.extend(annotate_saturdays(
            grid,
            &mut rng,
            &config.saturday,
            &trips,
        )?);
    }
    outings.sort_by_key(|o| (o.planned.start, o.planned.kind));
    Ok(Annotation {
        seed,
        config: config.clone(),
        outings,
    })
}
