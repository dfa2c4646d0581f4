//! Experimental condition key shared by simulation, logs and statistics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which feedback channels the operator receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feedback {
    #[serde(rename = "V")]
    Visual,
    #[serde(rename = "T")]
    Tactile,
    #[serde(rename = "VT")]
    VisualTactile,
}

impl Feedback {
    pub const ALL: [Feedback; 3] = [Feedback::Visual, Feedback::Tactile, Feedback::VisualTactile];

    pub fn code(self) -> &'static str {
        match self {
            Feedback::Visual => "V",
            Feedback::Tactile => "T",
            Feedback::VisualTactile => "VT",
        }
    }

    pub fn sees_drone(self) -> bool {
        matches!(self, Feedback::Visual | Feedback::VisualTactile)
    }

    pub fn feels_pad(self) -> bool {
        matches!(self, Feedback::Tactile | Feedback::VisualTactile)
    }
}

impl FromStr for Feedback {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V" => Ok(Feedback::Visual),
            "T" => Ok(Feedback::Tactile),
            "VT" => Ok(Feedback::VisualTactile),
            other => Err(Error::Config(format!("unknown feedback type {other:?}"))),
        }
    }
}

/// Descent speed class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedClass {
    Slow,
    Fast,
}

impl SpeedClass {
    pub const ALL: [SpeedClass; 2] = [SpeedClass::Slow, SpeedClass::Fast];

    /// Descent speed in m/s.
    pub fn descent_speed(self) -> f64 {
        match self {
            SpeedClass::Slow => 0.1,
            SpeedClass::Fast => 0.15,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            SpeedClass::Slow => "slow",
            SpeedClass::Fast => "fast",
        }
    }
}

impl FromStr for SpeedClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slow" => Ok(SpeedClass::Slow),
            "fast" => Ok(SpeedClass::Fast),
            other => Err(Error::Config(format!("unknown speed class {other:?}"))),
        }
    }
}

/// Feedback type × descent speed × drone count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub feedback: Feedback,
    #[serde(rename = "speed")]
    pub speed_class: SpeedClass,
    #[serde(rename = "drones")]
    pub drone_count: u8,
}

impl ConditionSpec {
    pub fn new(feedback: Feedback, speed_class: SpeedClass, drone_count: u8) -> Result<Self> {
        let c = ConditionSpec {
            feedback,
            speed_class,
            drone_count,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.drone_count) {
            return Err(Error::Config(format!(
                "drone count must be 1 or 2, got {}",
                self.drone_count
            )));
        }
        Ok(())
    }

    /// The six feedback × speed conditions for a given drone count.
    pub fn protocol(drone_count: u8) -> Vec<ConditionSpec> {
        Feedback::ALL
            .iter()
            .flat_map(|&f| {
                SpeedClass::ALL.iter().map(move |&s| ConditionSpec {
                    feedback: f,
                    speed_class: s,
                    drone_count,
                })
            })
            .collect()
    }

    /// Feedback/speed label without the drone count, e.g. `VT-slow`.
    pub fn cell_label(&self) -> String {
        format!("{}-{}", self.feedback.code(), self.speed_class.code())
    }
}

impl fmt::Display for ConditionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}-{}d",
            self.feedback.code(),
            self.speed_class.code(),
            self.drone_count
        )
    }
}
