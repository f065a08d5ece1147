//! Monthly calendar backbone.

use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// A calendar month. Ordering is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthIndex {
    year: i32,
    month: u8,
}

impl MonthIndex {
    pub fn new(year: i32, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::DateParse(alloc::format!("{year}-{month}")));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    /// Months since January of year 0.
    pub fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    pub fn from_ordinal(ord: i64) -> Self {
        let year = ord.div_euclid(12) as i32;
        let month = (ord.rem_euclid(12) + 1) as u8;
        Self { year, month }
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    pub fn pred(self) -> Self {
        self.add_months(-1)
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Whole months from `other` to `self`.
    pub fn months_since(self, other: Self) -> i64 {
        self.ordinal() - other.ordinal()
    }

    /// `n` consecutive months starting at `self`.
    pub fn range(self, n: usize) -> impl Iterator<Item = MonthIndex> {
        (0..n as i64).map(move |k| self.add_months(k))
    }

    /// Parses `YYYYMM` or `YYYY-MM`; surrounding whitespace is ignored.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::DateParse(t.to_string());
        let (y, m) = match t.len() {
            6 if t.bytes().all(|b| b.is_ascii_digit()) => (&t[..4], &t[4..]),
            7 if t.as_bytes()[4] == b'-' => (&t[..4], &t[5..]),
            _ => return Err(bad()),
        };
        if !y.bytes().all(|b| b.is_ascii_digit()) || !m.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u8 = m.parse().map_err(|_| bad())?;
        Self::new(year, month).map_err(|_| bad())
    }
}

impl fmt::Display for MonthIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl core::ops::Sub for MonthIndex {
    type Output = i64;

    fn sub(self, rhs: Self) -> i64 {
        self.months_since(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn december_rolls_into_january() {
        let d = MonthIndex::new(1999, 12).unwrap();
        assert_eq!(d.succ(), MonthIndex::new(2000, 1).unwrap());
        assert_eq!(d.succ().pred(), d);
    }

    #[test]
    fn parses_both_layouts() {
        let a = MonthIndex::parse("196307").unwrap();
        let b = MonthIndex::parse("1963-07").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "1963-07");
        assert!(MonthIndex::parse("1963-13").is_err());
        assert!(MonthIndex::parse("63-07").is_err());
        assert!(MonthIndex::parse("1963/07").is_err());
        assert!(MonthIndex::parse("19630701").is_err());
    }

    #[test]
    fn subtraction_counts_months() {
        let a = MonthIndex::new(1963, 7).unwrap();
        let b = MonthIndex::new(2026, 1).unwrap();
        assert_eq!(b - a + 1, 751);
    }

    proptest! {
        #[test]
        fn ordinal_roundtrip_and_order(o1 in -5000i64..50000, o2 in -5000i64..50000) {
            let a = MonthIndex::from_ordinal(o1);
            let b = MonthIndex::from_ordinal(o2);
            prop_assert_eq!(a.ordinal(), o1);
            prop_assert_eq!(a.cmp(&b), o1.cmp(&o2));
            prop_assert_eq!(a - b, o1 - o2);
        }
    }
}
