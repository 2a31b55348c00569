use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate, Weekday};

/// Business-day calendar: Monday to Friday minus listed holidays. Thursday
/// expiries falling on a holiday move to the previous business day.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Calendar {
    holidays: BTreeSet<NaiveDate>,
}

impl Calendar {
    pub fn new(holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        Self {
            holidays: holidays.into_iter().collect(),
        }
    }

    pub fn holidays(&self) -> impl Iterator<Item = &NaiveDate> {
        self.holidays.iter()
    }

    pub fn is_business_day(&self, d: NaiveDate) -> bool {
        !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) && !self.holidays.contains(&d)
    }

    /// `d` itself if it is a business day, otherwise the closest earlier one.
    pub fn roll_back(&self, mut d: NaiveDate) -> NaiveDate {
        while !self.is_business_day(d) {
            d -= Duration::days(1);
        }
        d
    }

    pub fn next_business_day(&self, d: NaiveDate) -> NaiveDate {
        let mut n = d + Duration::days(1);
        while !self.is_business_day(n) {
            n += Duration::days(1);
        }
        n
    }

    /// Business days in the closed interval `[start, end]`.
    pub fn business_days(&self, start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
        start
            .iter_days()
            .take_while(|d| *d <= end)
            .filter(|d| self.is_business_day(*d))
            .collect()
    }

    /// Expiry date of the contract nominally expiring on Thursday `thursday`.
    pub fn adjust_expiry(&self, thursday: NaiveDate) -> NaiveDate {
        self.roll_back(thursday)
    }

    /// Weekly expiries (adjusted Thursdays) strictly after `start` and up to `end`.
    pub fn weekly_expiries(&self, start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
        let mut thu = next_weekday_on_or_after(start, Weekday::Thu);
        let mut out = Vec::new();
        // An adjusted expiry can precede its nominal Thursday, so scan from the
        // week of `start` and filter afterwards.
        while thu <= end + Duration::days(7) {
            let e = self.adjust_expiry(thu);
            if e > start && e <= end {
                out.push(e);
            }
            thu += Duration::days(7);
        }
        out
    }

    /// Monthly expiry: the last Thursday of the month, adjusted for holidays.
    pub fn monthly_expiry(&self, year: i32, month: u32) -> NaiveDate {
        self.adjust_expiry(last_weekday_of_month(year, month, Weekday::Thu))
    }

    /// First monthly expiry strictly after `d`.
    pub fn next_monthly_expiry(&self, d: NaiveDate) -> NaiveDate {
        let (mut y, mut m) = (d.year(), d.month());
        loop {
            let e = self.monthly_expiry(y, m);
            if e > d {
                return e;
            }
            if m == 12 {
                y += 1;
                m = 1;
            } else {
                m += 1;
            }
        }
    }

    /// Next weekly expiry strictly after `d`.
    pub fn next_weekly_expiry(&self, d: NaiveDate) -> NaiveDate {
        let mut thu = next_weekday_on_or_after(d, Weekday::Thu);
        loop {
            let e = self.adjust_expiry(thu);
            if e > d {
                return e;
            }
            thu += Duration::days(7);
        }
    }

    pub fn is_monthly_expiry(&self, d: NaiveDate) -> bool {
        self.monthly_expiry(d.year(), d.month()) == d
    }
}

pub fn next_weekday_on_or_after(d: NaiveDate, wd: Weekday) -> NaiveDate {
    let delta = (7 + wd.num_days_from_monday() as i64 - d.weekday().num_days_from_monday() as i64) % 7;
    d + Duration::days(delta)
}

pub fn last_weekday_of_month(year: i32, month: u32, wd: Weekday) -> NaiveDate {
    let first_next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    let last = first_next - Duration::days(1);
    let back = (7 + last.weekday().num_days_from_monday() as i64 - wd.num_days_from_monday() as i64) % 7;
    last - Duration::days(back)
}

/// ACT/365 year fraction from `a` to `b`.
pub fn year_fraction(a: NaiveDate, b: NaiveDate) -> f64 {
    (b - a).num_days() as f64 / 365.0
}
