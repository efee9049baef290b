//! Mapping between market settlement periods and the fixed profile year.

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::profiles::HOURS_PER_YEAR;

/// One settlement period of the day-ahead market. `hour` runs from 1 and
/// reaches 23 or 25 on daylight-saving change days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HourKey {
    pub date: NaiveDate,
    pub hour: u8,
}

impl HourKey {
    pub fn new(date: NaiveDate, hour: u8) -> Self {
        HourKey { date, hour }
    }

    /// Zero-based slot in the 8,760-hour profile year.
    ///
    /// Leap days reuse February 28 and a 25th hour reuses hour 24.
    pub fn profile_index(&self) -> usize {
        let mut day = self.date.ordinal0() as usize;
        if self.date.leap_year() && day >= 59 {
            day -= 1;
        }
        let hour = usize::from(self.hour.clamp(1, 24));
        (day * 24 + hour - 1).min(HOURS_PER_YEAR - 1)
    }

    pub fn day_type(&self) -> DayType {
        DayType::of(self.date)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    /// Saturday and Sunday are weekend days; holidays are not folded in.
    pub fn of(date: NaiveDate) -> DayType {
        match date.weekday() {
            Weekday::Sat | Weekday::Sun => DayType::Weekend,
            _ => DayType::Weekday,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
        }
    }
}

/// Day selection used by the aggregate views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayFilter {
    All,
    Weekday,
    Weekend,
}

impl DayFilter {
    pub const ALL: [DayFilter; 3] = [DayFilter::All, DayFilter::Weekday, DayFilter::Weekend];

    pub fn accepts(self, date: NaiveDate) -> bool {
        match self {
            DayFilter::All => true,
            DayFilter::Weekday => DayType::of(date) == DayType::Weekday,
            DayFilter::Weekend => DayType::of(date) == DayType::Weekend,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DayFilter::All => "all",
            DayFilter::Weekday => "weekday",
            DayFilter::Weekend => "weekend",
        }
    }
}

/// Parses `YYYY-MM-DD` or the compact `YYYYMMDD`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y%m%d"))
        .ok()
}
