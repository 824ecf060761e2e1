//! Minute-resolution timestamps with a fixed 12-digit external form.

use chrono::{DateTime, NaiveDateTime};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use thiserror::Error;

pub const MINUTES_PER_DAY: i64 = 1440;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimeError {
    #[error("invalid timestamp {0:?}: expected 12 digits YYYYMMDDHHMM")]
    BadFormat(String),
    #[error("timestamp out of renderable range")]
    OutOfRange,
}

/// A point in time with minute resolution, stored as minutes since the Unix
/// epoch. Rendered externally as `YYYYMMDDHHMM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn from_minutes(minutes: i64) -> Self {
        Timestamp(minutes)
    }

    pub fn minutes(self) -> i64 {
        self.0
    }

    pub fn plus_minutes(self, delta: i64) -> Self {
        Timestamp(self.0 + delta)
    }

    /// Parse the 12-digit `YYYYMMDDHHMM` external form.
    pub fn parse(s: &str) -> Result<Self, TimeError> {
        if s.len() != 12 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(TimeError::BadFormat(s.to_string()));
        }
        let dt = NaiveDateTime::parse_from_str(s, "%Y%m%d%H%M")
            .map_err(|_| TimeError::BadFormat(s.to_string()))?;
        Ok(Timestamp(dt.and_utc().timestamp() / 60))
    }

    /// Render as `YYYYMMDDHHMM`. Errors only outside the 4-digit-year range.
    pub fn render(self) -> Result<String, TimeError> {
        let dt = DateTime::from_timestamp(self.0 * 60, 0).ok_or(TimeError::OutOfRange)?;
        let naive = dt.naive_utc();
        let rendered = naive.format("%Y%m%d%H%M").to_string();
        if rendered.len() != 12 {
            return Err(TimeError::OutOfRange);
        }
        Ok(rendered)
    }

    /// Clock-of-day rendering (`HH:MM`), used by the template realizer.
    pub fn render_clock(self) -> String {
        let day_minute = self.0.rem_euclid(MINUTES_PER_DAY);
        format!("{:02}:{:02}", day_minute / 60, day_minute % 60)
    }

    /// Start of the calendar day containing this timestamp.
    pub fn day_start(self) -> Self {
        Timestamp(self.0.div_euclid(MINUTES_PER_DAY) * MINUTES_PER_DAY)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.render() {
            Ok(s) => f.write_str(&s),
            Err(_) => write!(f, "minute#{}", self.0),
        }
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let s = self
            .render()
            .map_err(|e| serde::ser::Error::custom(e.to_string()))?;
        serializer.serialize_str(&s)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(|e| D::Error::custom(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_renders_the_external_form() {
        let t = Timestamp::parse("199907151200").unwrap();
        assert_eq!(t.render().unwrap(), "199907151200");
        assert_eq!(t.render_clock(), "12:00");
    }

    #[test]
    fn ordering_follows_time() {
        let a = Timestamp::parse("200602110000").unwrap();
        let b = Timestamp::parse("200602120000").unwrap();
        assert!(a < b);
        assert_eq!(b.minutes() - a.minutes(), MINUTES_PER_DAY);
    }

    #[test]
    fn rejects_malformed_strings() {
        assert!(Timestamp::parse("20060212").is_err());
        assert!(Timestamp::parse("200602121x00").is_err());
        assert!(Timestamp::parse("200613120000").is_err());
    }
}
