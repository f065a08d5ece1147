//! Canonical in-memory panel of monthly returns.
//!
//! Returns are decimals (0.01 = 1%) everywhere inside the crate. Missing
//! months are absent keys, never sentinel values.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::calendar::MonthIndex;
use crate::error::{Error, Result};

/// Dated observations of one series, sorted by month.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub dates: Vec<MonthIndex>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series from parallel vectors; dates must be strictly increasing.
    pub fn new(dates: Vec<MonthIndex>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Precondition(alloc::format!(
                "{} dates for {} values",
                dates.len(),
                values.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Precondition(alloc::format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        Ok(Self { dates, values })
    }

    /// Consecutive months starting at `start`.
    pub fn monthly(start: MonthIndex, values: Vec<f64>) -> Self {
        let dates = start.range(values.len()).collect();
        Self { dates, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, t: MonthIndex) -> Option<f64> {
        self.dates.binary_search(&t).ok().map(|i| self.values[i])
    }
}

/// Long-format panel keyed by (series id, month).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReturnPanel {
    series: BTreeMap<String, BTreeMap<MonthIndex, f64>>,
    families: BTreeMap<String, Option<String>>,
}

impl ReturnPanel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts one observation, rejecting a duplicate key.
    pub fn insert(&mut self, series: &str, t: MonthIndex, ret: f64) -> Result<()> {
        let obs = self.series.entry(series.into()).or_default();
        if obs.contains_key(&t) {
            return Err(Error::DuplicateKey {
                series: series.into(),
                month: t,
            });
        }
        obs.insert(t, ret);
        self.families.entry(series.into()).or_insert(None);
        Ok(())
    }

    pub fn set_family(&mut self, series: &str, family: Option<String>) {
        self.families.insert(series.into(), family);
    }

    pub fn family(&self, series: &str) -> Option<&str> {
        self.families.get(series).and_then(|f| f.as_deref())
    }

    pub fn series_ids(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn contains(&self, series: &str) -> bool {
        self.series.contains_key(series)
    }

    pub fn len(&self) -> usize {
        self.series.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn series(&self, id: &str) -> Option<TimeSeries> {
        self.series.get(id).map(|obs| TimeSeries {
            dates: obs.keys().copied().collect(),
            values: obs.values().copied().collect(),
        })
    }

    pub fn get(&self, id: &str, t: MonthIndex) -> Option<f64> {
        self.series.get(id).and_then(|o| o.get(&t)).copied()
    }

    /// All observations as `(series, month, return)`, ordered by series then month.
    pub fn observations(&self) -> impl Iterator<Item = (&str, MonthIndex, f64)> {
        self.series
            .iter()
            .flat_map(|(id, obs)| obs.iter().map(move |(t, r)| (id.as_str(), *t, *r)))
    }

    /// Restricts to the given series and to months where every one of them
    /// has an observation.
    pub fn align_common_sample<S: AsRef<str>>(&self, series: &[S]) -> Result<ReturnPanel> {
        let mut common: Option<BTreeSet<MonthIndex>> = None;
        for s in series {
            let s = s.as_ref();
            let obs = self
                .series
                .get(s)
                .ok_or_else(|| Error::Precondition(alloc::format!("series `{s}` not in panel")))?;
            let months: BTreeSet<MonthIndex> = obs.keys().copied().collect();
            common = Some(match common {
                None => months,
                Some(c) => c.intersection(&months).copied().collect(),
            });
        }
        let common = common.unwrap_or_default();
        if common.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut out = ReturnPanel::new();
        for s in series {
            let s = s.as_ref();
            let obs = &self.series[s];
            for t in &common {
                out.insert(s, *t, obs[t])?;
            }
            out.set_family(s, self.family(s).map(String::from));
        }
        Ok(out)
    }
}

/// A single exogenous monthly series (e.g. passive ownership share).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExogenousSeries {
    values: BTreeMap<MonthIndex, f64>,
}

impl ExogenousSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, t: MonthIndex, v: f64) -> Result<()> {
        if self.values.contains_key(&t) {
            return Err(Error::DuplicateKey {
                series: "exogenous".into(),
                month: t,
            });
        }
        self.values.insert(t, v);
        Ok(())
    }

    pub fn get(&self, t: MonthIndex) -> Option<f64> {
        self.values.get(&t).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MonthIndex, f64)> + '_ {
        self.values.iter().map(|(t, v)| (*t, *v))
    }

    pub fn to_series(&self) -> TimeSeries {
        TimeSeries {
            dates: self.values.keys().copied().collect(),
            values: self.values.values().copied().collect(),
        }
    }
}

impl FromIterator<(MonthIndex, f64)> for ExogenousSeries {
    fn from_iter<I: IntoIterator<Item = (MonthIndex, f64)>>(iter: I) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}
