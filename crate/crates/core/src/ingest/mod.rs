//! Appliance channel ingestion: parsing, fixed-window resampling,
//! on/off binarization and a synthetic household generator.

mod channel;
mod resample;
mod synth;

pub use channel::{
    parse_channel, parse_labels, serialize_channel, ChannelReader, RawSample, RawSeries,
};
pub use resample::{
    read_resampled_csv, resample, write_resampled_csv, ResampledSeries, Resampler, Window,
    RESAMPLED_CSV_HEADER,
};
pub use synth::{synth_household, synth_household_resampled, SAMPLE_PERIOD_SECS};

use thiserror::Error;

/// Default mean-power threshold separating standby from use.
pub const DEFAULT_THRESHOLD_WATTS: f64 = 10.0;
pub const DEFAULT_WINDOW_MINUTES: u32 = 30;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {timestamp} does not follow {previous}")]
    Ordering {
        line: usize,
        previous: i64,
        timestamp: i64,
    },
    #[error("series `{0}` has no samples to resample")]
    Empty(String),
    #[error("window of {0} minutes does not divide a day")]
    InvalidWindow(u32),
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OnOff {
    Off,
    On,
}

impl OnOff {
    pub fn is_on(self) -> bool {
        self == OnOff::On
    }
}

/// `Off` iff `mean_watts < threshold_watts`; a reading exactly at the
/// threshold counts as on.
pub fn binarize(mean_watts: f64, threshold_watts: f64) -> OnOff {
    if mean_watts < threshold_watts {
        OnOff::Off
    } else {
        OnOff::On
    }
}

pub(crate) fn check_window(window_minutes: u32) -> Result<(), IngestError> {
    if window_minutes == 0 || 1440 % window_minutes != 0 {
        return Err(IngestError::InvalidWindow(window_minutes));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_examples() {
        assert_eq!(binarize(1.0, DEFAULT_THRESHOLD_WATTS), OnOff::Off);
        assert_eq!(binarize(30.0, DEFAULT_THRESHOLD_WATTS), OnOff::On);
        assert_eq!(binarize(10.0, DEFAULT_THRESHOLD_WATTS), OnOff::On);
        assert_eq!(binarize(9.999, DEFAULT_THRESHOLD_WATTS), OnOff::Off);
    }

    proptest! {
        #[test]
        fn binarize_is_monotone(a in 0.0f64..5000.0, b in 0.0f64..5000.0, thr in 0.1f64..100.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if binarize(lo, thr).is_on() {
                prop_assert!(binarize(hi, thr).is_on());
            }
        }
    }
}
