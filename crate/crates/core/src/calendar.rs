//! Wall-clock helpers over UTC epoch seconds and a dataset timezone.

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, TimeZone, Timelike};
use chrono_tz::Tz;

pub fn to_local(tz: &Tz, timestamp: i64) -> NaiveDateTime {
    let utc = DateTime::from_timestamp(timestamp, 0).expect("timestamp in chrono range");
    utc.with_timezone(tz).naive_local()
}

/// UTC seconds for a local wall-clock time. Ambiguous times resolve to the
/// earlier instant; times inside a spring-forward gap move past the gap.
pub fn to_utc(tz: &Tz, local: NaiveDateTime) -> i64 {
    let mut probe = local;
    for _ in 0..4 {
        if let Some(dt) = tz.from_local_datetime(&probe).earliest() {
            return dt.timestamp();
        }
        probe += Duration::minutes(30);
    }
    // No zone has a gap longer than two hours.
    tz.from_utc_datetime(&local).timestamp()
}

/// UTC seconds at `minute` minutes after local midnight of `date`.
pub fn local_minute(tz: &Tz, date: NaiveDate, minute: i64) -> i64 {
    let midnight = date.and_hms_opt(0, 0, 0).expect("midnight exists");
    to_utc(tz, midnight + Duration::minutes(minute))
}

/// Start of the local day following `date`.
pub fn local_day_end(tz: &Tz, date: NaiveDate) -> i64 {
    local_minute(tz, date.succ_opt().expect("date in range"), 0)
}

pub fn local_date(tz: &Tz, timestamp: i64) -> NaiveDate {
    to_local(tz, timestamp).date()
}

/// Minutes since local midnight.
pub fn minute_of_day(tz: &Tz, timestamp: i64) -> u32 {
    let l = to_local(tz, timestamp);
    l.hour() * 60 + l.minute()
}

/// Monday = 0 … Sunday = 6.
pub fn weekday_index(date: NaiveDate) -> u8 {
    date.weekday().num_days_from_monday() as u8
}

pub fn is_weekend(date: NaiveDate) -> bool {
    weekday_index(date) >= 5
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono_tz::Europe::London;

    #[test]
    fn known_weekdays() {
        assert_eq!(
            weekday_index(NaiveDate::from_ymd_opt(2013, 4, 1).unwrap()),
            0
        );
        assert_eq!(
            weekday_index(NaiveDate::from_ymd_opt(2013, 12, 26).unwrap()),
            3
        );
        assert_eq!(
            weekday_index(NaiveDate::from_ymd_opt(2015, 12, 26).unwrap()),
            5
        );
    }

    #[test]
    fn london_offsets() {
        let d = NaiveDate::from_ymd_opt(2013, 7, 1).unwrap();
        assert_eq!(local_minute(&London, d, 8 * 60 + 30), 1_372_663_800);
        let w = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
        assert_eq!(local_minute(&London, w, 0), 1_356_998_400);
        assert_eq!(minute_of_day(&London, 1_372_663_800), 510);
    }

    #[test]
    fn dst_gap_moves_forward() {
        // 2013-03-31 01:30 does not exist in London.
        let d = NaiveDate::from_ymd_opt(2013, 3, 31).unwrap();
        let t = local_minute(&London, d, 90);
        assert_eq!(minute_of_day(&London, t), 120);
    }
}
