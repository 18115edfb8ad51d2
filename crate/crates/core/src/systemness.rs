//! Does a category × year matrix develop as a system?
//!
//! Two predictions of the target year's distribution are scored against the
//! observation with the expected information of the message:
//!
//! * the Markov prediction reproduces the previous year's shares, treating
//!   the categories as one system whose current state is the best forecast;
//! * the trend prediction extrapolates each category's own count series and
//!   normalizes the result.
//!
//! Lower information means a better prediction, so the systemness score
//! `info_trend − info_markov` is positive when the Markov prediction wins.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::ops::Sub;
use std::str::FromStr;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::infotheory::{expected_info, Distribution};
use crate::num::{compensated_sum, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct CategorySeries<F> {
    categories: Vec<String>,
    years: Vec<i32>,
    // counts[year][category]
    counts: Vec<Vec<F>>,
}

impl<F: Scalar> CategorySeries<F> {
    pub fn new(categories: Vec<String>, years: Vec<i32>, counts: Vec<Vec<F>>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::InvalidSeries("no categories".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = categories.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::InvalidSeries(format!("duplicate category `{dup}`")));
        }
        if counts.len() != years.len() {
            return Err(Error::InvalidSeries(format!(
                "{} years but {} count rows",
                years.len(),
                counts.len()
            )));
        }
        for w in years.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::YearOrder {
                    previous: w[0],
                    next: w[1],
                });
            }
        }
        for (year, row) in years.iter().zip(&counts) {
            if row.len() != categories.len() {
                return Err(Error::InvalidSeries(format!(
                    "year {year} has {} counts for {} categories",
                    row.len(),
                    categories.len()
                )));
            }
            if let Some(c) = row.iter().find(|c| !c.is_finite() || **c < F::zero()) {
                return Err(Error::InvalidSeries(format!("year {year} has count {c}")));
            }
        }
        Ok(Self {
            categories,
            years,
            counts,
        })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn row(&self, year: i32) -> Option<&[F]> {
        self.years
            .iter()
            .position(|&y| y == year)
            .map(|i| self.counts[i].as_slice())
    }

    /// Keeps only the named categories, in the order given.
    pub fn restrict<S: AsRef<str>>(&self, subset: &[S]) -> Result<Self> {
        let index: HashMap<&str, usize> = self
            .categories
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let cols = subset
            .iter()
            .map(|s| {
                index
                    .get(s.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownCategory(s.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            subset.iter().map(|s| s.as_ref().to_string()).collect(),
            self.years.clone(),
            self.counts
                .iter()
                .map(|row| cols.iter().map(|&c| row[c]).collect())
                .collect(),
        )
    }

    pub fn scaled(&self, factor: F) -> Self {
        Self {
            categories: self.categories.clone(),
            years: self.years.clone(),
            counts: self
                .counts
                .iter()
                .map(|row| row.iter().map(|&c| c * factor).collect())
                .collect(),
        }
    }

    /// Reads a CSV whose first column is the year and whose remaining columns
    /// are categories.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::InvalidSeries("need a year column and at least one category".into()));
        }
        let categories = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
        let (mut years, mut counts) = (Vec::new(), Vec::new());
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let line = i + 2;
            let field = |s: &str| s.trim().to_string();
            let year: i32 = field(&record[0])
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("bad year `{}`", &record[0]) })?;
            let row = record
                .iter()
                .skip(1)
                .map(|v| {
                    field(v)
                        .parse::<f64>()
                        .ok()
                        .and_then(F::from_f64)
                        .ok_or_else(|| Error::Parse { line, message: format!("bad count `{v}`") })
                })
                .collect::<Result<Vec<F>>>()?;
            years.push(year);
            counts.push(row);
        }
        Self::new(categories, years, counts)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["year".to_string()];
        header.extend(self.categories.iter().cloned());
        out.write_record(&header)?;
        for (year, row) in self.years.iter().zip(&self.counts) {
            let mut record = vec![year.to_string()];
            record.extend(row.iter().map(|c| c.to_string()));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    fn positive_row(&self, year: i32) -> Result<&[F]> {
        let row = self.row(year).ok_or(Error::MissingYear(year))?;
        if compensated_sum(row.iter().copied()) <= F::zero() {
            return Err(Error::ZeroTotal(year));
        }
        Ok(row)
    }
}

/// Previous year's shares.
pub fn predict_markov<F: Scalar>(series: &CategorySeries<F>, target_year: i32) -> Result<Distribution<F>> {
    Distribution::from_weights(series.positive_row(target_year - 1)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrendModel {
    /// Least squares on `ln(count)`: geometric growth.
    #[default]
    LogLinear,
    /// Least squares on the counts themselves.
    Linear,
}

impl FromStr for TrendModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "loglinear" => Ok(Self::LogLinear),
            "linear" => Ok(Self::Linear),
            other => Err(format!("unknown trend model `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrendConfig {
    pub model: TrendModel,
    /// Number of most recent years before the target used for the fit.
    pub window: usize,
}

impl Default for TrendConfig {
    fn default() -> Self {
        Self {
            model: TrendModel::LogLinear,
            window: 2,
        }
    }
}

fn fit_and_extrapolate<F: Scalar>(points: &[(F, F)], at: F) -> F {
    let n = F::of(points.len() as f64);
    let mx = compensated_sum(points.iter().map(|p| p.0)) / n;
    let my = compensated_sum(points.iter().map(|p| p.1)) / n;
    let sxx = compensated_sum(points.iter().map(|p| (p.0 - mx) * (p.0 - mx)));
    let sxy = compensated_sum(points.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    my + sxy / sxx * (at - mx)
}

/// Per-category extrapolated counts for `target_year`, clamped at zero.
///
/// In log-linear mode a category is fitted over its positive counts only; if
/// fewer than two are positive its last count is carried forward.
pub fn extrapolate_counts<F: Scalar>(series: &CategorySeries<F>, target_year: i32, config: TrendConfig) -> Result<Vec<F>> {
    if config.window < 2 {
        return Err(Error::InvalidSeries(format!("window {} is below 2", config.window)));
    }
    let history: Vec<usize> = series
        .years
        .iter()
        .enumerate()
        .filter(|(_, &y)| y < target_year)
        .map(|(i, _)| i)
        .collect();
    let start = history.len().saturating_sub(config.window);
    let window = &history[start..];
    if window.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: window.len(),
        });
    }
    // centring on the target keeps the year arithmetic small
    let x = |i: usize| F::of(f64::from(series.years[i] - target_year));
    let at = F::zero();

    let forecasts = (0..series.categories.len())
        .map(|c| {
            let value = match config.model {
                TrendModel::Linear => {
                    let pts: Vec<(F, F)> = window.iter().map(|&i| (x(i), series.counts[i][c])).collect();
                    fit_and_extrapolate(&pts, at)
                }
                TrendModel::LogLinear => {
                    let pts: Vec<(F, F)> = window
                        .iter()
                        .filter(|&&i| series.counts[i][c] > F::zero())
                        .map(|&i| (x(i), series.counts[i][c].ln()))
                        .collect();
                    if pts.len() >= 2 {
                        fit_and_extrapolate(&pts, at).exp()
                    } else {
                        series.counts[*window.last().expect("window has two years")][c]
                    }
                }
            };
            value.max(F::zero())
        })
        .collect();
    Ok(forecasts)
}

pub fn predict_trend<F: Scalar>(series: &CategorySeries<F>, target_year: i32, config: TrendConfig) -> Result<Distribution<F>> {
    let counts = extrapolate_counts(series, target_year, config)?;
    if compensated_sum(counts.iter().copied()) <= F::zero() {
        return Err(Error::ZeroExtrapolation);
    }
    Distribution::from_weights(&counts)
}

/// Both raw predictions for a target year, before it is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct RowColumnForecast<F> {
    pub categories: Vec<String>,
    /// Row-wise: each category's own extrapolated count.
    pub trend_counts: Vec<F>,
    pub trend: Distribution<F>,
    /// Column-wise: the current distribution carried forward.
    pub markov: Distribution<F>,
}

pub fn row_column_forecast<F: Scalar>(series: &CategorySeries<F>, target_year: i32, config: TrendConfig) -> Result<RowColumnForecast<F>> {
    let trend_counts = extrapolate_counts(series, target_year, config)?;
    if compensated_sum(trend_counts.iter().copied()) <= F::zero() {
        return Err(Error::ZeroExtrapolation);
    }
    Ok(RowColumnForecast {
        categories: series.categories.clone(),
        trend: Distribution::from_weights(&trend_counts)?,
        trend_counts,
        markov: predict_markov(series, target_year)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Corroborated,
    Rejected,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Corroborated => "corroborated",
            Verdict::Rejected => "rejected",
        })
    }
}

/// Scores for one category subset. Generic over any ordered number type so
/// published values can be checked in exact rational arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetScore<T> {
    pub subset: Vec<String>,
    pub info_trend_mbits: T,
    pub info_markov_mbits: T,
    pub systemness_mbits: T,
    pub verdict: Verdict,
}

impl<T> SubsetScore<T>
where
    T: Copy + Sub<Output = T> + PartialOrd + Zero,
{
    pub fn from_infos(subset: Vec<String>, info_trend_mbits: T, info_markov_mbits: T) -> Self {
        let systemness_mbits = info_trend_mbits - info_markov_mbits;
        let verdict = if systemness_mbits > T::zero() {
            Verdict::Corroborated
        } else {
            Verdict::Rejected
        };
        Self {
            subset,
            info_trend_mbits,
            info_markov_mbits,
            systemness_mbits,
            verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemnessConfig<F> {
    pub trend: TrendConfig,
    /// Additive smoothing of predicted counts; `None` makes a zero
    /// prediction under observed mass an error.
    pub smoothing_alpha: Option<F>,
}

impl<F> Default for SystemnessConfig<F> {
    fn default() -> Self {
        Self {
            trend: TrendConfig::default(),
            smoothing_alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemnessReport<F> {
    pub target_year: i32,
    pub smoothing_alpha: Option<F>,
    pub scores: Vec<SubsetScore<F>>,
}

fn score_subset<F: Scalar>(series: &CategorySeries<F>, subset: &[String], target_year: i32, config: &SystemnessConfig<F>) -> Result<SubsetScore<F>> {
    let restricted = series.restrict(subset)?;
    let observed = Distribution::from_weights(restricted.positive_row(target_year)?)?;
    let (trend, markov) = match config.smoothing_alpha {
        None => (
            predict_trend(&restricted, target_year, config.trend)?,
            predict_markov(&restricted, target_year)?,
        ),
        Some(alpha) => (
            Distribution::smoothed(&extrapolate_counts(&restricted, target_year, config.trend)?, alpha)?,
            Distribution::smoothed(restricted.positive_row(target_year - 1)?, alpha)?,
        ),
    };
    Ok(SubsetScore::from_infos(
        subset.to_vec(),
        expected_info(&observed, &trend)?,
        expected_info(&observed, &markov)?,
    ))
}

/// Scores each subset; an empty subset list means all categories.
pub fn systemness_test<F: Scalar>(
    series: &CategorySeries<F>,
    target_year: i32,
    subsets: &[Vec<String>],
    config: &SystemnessConfig<F>,
) -> Result<SystemnessReport<F>> {
    let all = [series.categories.clone()];
    let subsets = if subsets.is_empty() { &all[..] } else { subsets };
    let scores = subsets
        .iter()
        .map(|s| score_subset(series, s, target_year, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(SystemnessReport {
        target_year,
        smoothing_alpha: config.smoothing_alpha,
        scores,
    })
}

/// Report CSV; a `smoothing_alpha` column is appended when smoothing was on.
pub fn write_report<W: Write>(writer: W, report: &SystemnessReport<f64>) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["subset", "info_trend_mbits", "info_markov_mbits", "systemness_mbits", "verdict"];
    if report.smoothing_alpha.is_some() {
        header.push("smoothing_alpha");
    }
    out.write_record(&header)?;
    for s in &report.scores {
        let mut record = vec![
            s.subset.join("+"),
            format!("{:.2}", s.info_trend_mbits),
            format!("{:.2}", s.info_markov_mbits),
            format!("{:.2}", s.systemness_mbits),
            s.verdict.to_string(),
        ];
        if let Some(alpha) = report.smoothing_alpha {
            record.push(format!("{alpha}"));
        }
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}
