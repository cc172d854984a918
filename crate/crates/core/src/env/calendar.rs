use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Key dates of an episode. Day indices count days since `start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calendar {
    pub start: NaiveDate,
    pub lockdown: NaiveDate,
    pub exit: NaiveDate,
    pub holiday_start: NaiveDate,
    /// Inclusive.
    pub holiday_end: NaiveDate,
    pub end: NaiveDate,
}

pub const DAYS_PER_STEP: i64 = 7;

impl Default for Calendar {
    fn default() -> Self {
        let d = |m, day| NaiveDate::from_ymd_opt(2020, m, day).expect("valid date");
        Self {
            start: d(3, 1),
            lockdown: d(3, 14),
            exit: d(5, 4),
            holiday_start: d(7, 1),
            holiday_end: d(8, 31),
            end: d(8, 31),
        }
    }
}

impl Calendar {
    pub fn validate(&self) -> Result<()> {
        if !(self.start < self.lockdown && self.lockdown < self.exit && self.exit < self.end) {
            return Err(Error::Config(
                "dates must satisfy start < lockdown < exit < end".into(),
            ));
        }
        if self.holiday_start > self.holiday_end {
            return Err(Error::Config("holiday start is after holiday end".into()));
        }
        if (self.end - self.exit).num_days() % DAYS_PER_STEP != 0 {
            return Err(Error::Config(format!(
                "the controlled period ({} days) is not a whole number of weeks",
                (self.end - self.exit).num_days()
            )));
        }
        Ok(())
    }

    pub fn day_of(&self, date: NaiveDate) -> i64 {
        (date - self.start).num_days()
    }

    pub fn date_of(&self, day: i64) -> NaiveDate {
        self.start + chrono::Duration::days(day)
    }

    pub fn lockdown_day(&self) -> i64 {
        self.day_of(self.lockdown)
    }

    pub fn exit_day(&self) -> i64 {
        self.day_of(self.exit)
    }

    pub fn end_day(&self) -> i64 {
        self.day_of(self.end)
    }

    /// Number of controllable weekly steps.
    pub fn steps(&self) -> usize {
        ((self.end_day() - self.exit_day()) / DAYS_PER_STEP) as usize
    }

    pub fn day_of_week(&self, week: usize) -> i64 {
        self.exit_day() + DAYS_PER_STEP * week as i64
    }

    pub fn is_holiday(&self, day: i64) -> bool {
        let date = self.date_of(day);
        self.holiday_start <= date && date <= self.holiday_end
    }
}
