//! Home-absence detection from appliance-level electricity use.
//!
//! The pipeline turns per-appliance power channels into a labeled
//! half-hourly dataset ([`ingest`], [`dataset`]), trains six classifier
//! families on it ([`learners`]), tunes their hyperparameters
//! ([`tuning`]) and compares them under repeated cross-validation
//! ([`eval`]). [`pipeline`] wires the stages behind a single run config.

pub mod calendar;
pub mod data;
pub mod dataset;
pub mod eval;
pub mod ingest;
pub mod learners;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod tuning;

pub use data::{Examples, FeatureKind, FeatureSpec, Label};
pub use scalar::Real;

pub type Metrics = eval::MetricsReport<f64>;
pub type Net = learners::Network<f64>;
pub type KdeBayes = learners::KdeNaiveBayes<f64>;
pub type Net32 = learners::Network<f32>;

use serde::{Deserialize, Serialize};

/// The four monitored appliances, in feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Appliance {
    Tv,
    Kettle,
    Oven,
    Microwave,
}

impl Appliance {
    pub const ALL: [Appliance; 4] = [
        Appliance::Tv,
        Appliance::Kettle,
        Appliance::Oven,
        Appliance::Microwave,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Appliance::Tv => "tv",
            Appliance::Kettle => "kettle",
            Appliance::Oven => "oven",
            Appliance::Microwave => "microwave",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Matches channel names as they appear in UK-DALE `labels.dat` files.
    pub fn from_channel_label(label: &str) -> Option<Self> {
        match label.trim().to_ascii_lowercase().as_str() {
            "tv" | "television" => Some(Appliance::Tv),
            "kettle" => Some(Appliance::Kettle),
            "oven" | "gas_oven" | "electric_oven" => Some(Appliance::Oven),
            "microwave" => Some(Appliance::Microwave),
            _ => None,
        }
    }
}
