//! UTC calendar-month arithmetic shared by the lifecycle and panel stages.

use chrono::{Datelike, Duration, Months, NaiveDate, TimeZone, Utc};

use crate::ingest::Timestamp;

/// Mean Gregorian month, in days.
pub const DAYS_PER_MONTH: f64 = 365.2425 / 12.0;

/// Midnight UTC on the first day of `t`'s month.
pub fn month_start(t: Timestamp) -> Timestamp {
    let d = NaiveDate::from_ymd_opt(t.year(), t.month(), 1).expect("valid month");
    Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).expect("midnight"))
}

/// Start of the calendar month `k` months after `t`'s month.
pub fn add_months(t: Timestamp, k: u32) -> Timestamp {
    month_start(t)
        .checked_add_months(Months::new(k))
        .expect("month arithmetic in range")
}

/// Calendar months from `a`'s month to `b`'s month (0 when equal).
pub fn month_index(a: Timestamp, b: Timestamp) -> i64 {
    (b.year() as i64 * 12 + b.month0() as i64) - (a.year() as i64 * 12 + a.month0() as i64)
}

/// Elapsed time in mean months.
pub fn fractional_months(a: Timestamp, b: Timestamp) -> f64 {
    (b - a).num_milliseconds() as f64 / (DAYS_PER_MONTH * 86_400_000.0)
}

pub fn years_between(a: Timestamp, b: Timestamp) -> f64 {
    (b - a).num_milliseconds() as f64 / (365.2425 * 86_400_000.0)
}

pub fn utc_date(t: Timestamp) -> NaiveDate {
    t.date_naive()
}

/// Same wall-clock instant `k` calendar months later (day clamped to the
/// month's length).
pub fn shift_months(t: Timestamp, k: u32) -> Timestamp {
    t.checked_add_months(Months::new(k)).unwrap_or(t + Duration::days(31 * k as i64))
}
