//! Annual count series: CSV ingestion, validation, and the log transform.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fewest observations a series may hold.
pub const MIN_OBSERVATIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub year: i32,
    pub count: T,
}

/// Ordered `(year, count)` observations of a counting process.
///
/// Years are strictly increasing, counts are finite and non-negative, and
/// there are at least [`MIN_OBSERVATIONS`] rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualSeries<T> {
    label: String,
    observations: Vec<Observation<T>>,
}

impl<T: Scalar> AnnualSeries<T> {
    /// Validates and canonicalizes (sorts by year) a list of observations.
    pub fn new(label: impl Into<String>, rows: impl IntoIterator<Item = (i32, T)>) -> Result<Self> {
        let mut observations: Vec<Observation<T>> = rows
            .into_iter()
            .map(|(year, count)| Observation { year, count })
            .collect();
        for (i, o) in observations.iter().enumerate() {
            let line = i as u64 + 1;
            if !o.count.is_finite() {
                return Err(Error::NonFiniteCount { line, year: o.year });
            }
            if o.count < T::zero() {
                return Err(Error::NegativeCount {
                    line,
                    year: o.year,
                    value: o.count.as_f64(),
                });
            }
        }
        observations.sort_by_key(|o| o.year);
        if let Some(w) = observations.windows(2).find(|w| w[0].year == w[1].year) {
            return Err(Error::DuplicateYear(w[0].year));
        }
        if observations.len() < MIN_OBSERVATIONS {
            return Err(Error::TooFewObservations {
                got: observations.len(),
                need: MIN_OBSERVATIONS,
            });
        }
        Ok(Self {
            label: label.into(),
            observations,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn observations(&self) -> &[Observation<T>] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn first_year(&self) -> i32 {
        self.observations[0].year
    }

    pub fn last_year(&self) -> i32 {
        self.observations[self.observations.len() - 1].year
    }

    /// Serializes as `year,count` CSV with a header line. The output parses
    /// back to an identical series.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("year,count\n");
        for o in &self.observations {
            out.push_str(&format!("{},{}\n", o.year, o.count));
        }
        out
    }
}

/// Parsing options for [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// `None` autodetects: the first data line is a header when its year
    /// field is not an integer.
    pub has_header: Option<bool>,
    pub label: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: None,
            label: String::from("series"),
        }
    }
}

/// Reads a two-column `year,count` table. Lines starting with `#` are
/// comments; the header line is optional.
pub fn load_csv<T: Scalar, R: Read>(source: R, options: &CsvOptions) -> Result<AnnualSeries<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(options.delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);

    let mut rows = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.kind() {
                csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
                _ => Error::MalformedRow {
                    line,
                    message: e.to_string(),
                },
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let year_field = &record[0];
        let count_field = &record[1];
        if first {
            first = false;
            let header = options.has_header.unwrap_or_else(|| year_field.parse::<i32>().is_err());
            if header {
                continue;
            }
        }
        let year: i32 = year_field.parse().map_err(|_| Error::MalformedRow {
            line,
            message: format!("year {year_field:?} is not an integer"),
        })?;
        let count: f64 = count_field.parse().map_err(|_| Error::MalformedRow {
            line,
            message: format!("count {count_field:?} is not a number"),
        })?;
        if !count.is_finite() {
            return Err(Error::NonFiniteCount { line, year });
        }
        if count < 0.0 {
            return Err(Error::NegativeCount {
                line,
                year,
                value: count,
            });
        }
        rows.push((year, T::lit(count)));
    }
    AnnualSeries::new(options.label.clone(), rows)
}

/// How [`log_transform`] treats years with a zero count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroPolicy {
    #[default]
    DropWithWarning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPoint<T> {
    pub year: i32,
    pub log_count: T,
}

/// Natural-log counts of an [`AnnualSeries`], with zero-count years removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSeries<T> {
    source_label: String,
    points: Vec<LogPoint<T>>,
    dropped_years: Vec<i32>,
}

impl<T: Scalar> LogSeries<T> {
    /// Builds a log series directly from already-logged values, sorted by
    /// year. Used for synthetic data and stacked fits.
    pub fn from_points(label: impl Into<String>, points: impl IntoIterator<Item = (i32, T)>) -> Self {
        let mut points: Vec<LogPoint<T>> = points
            .into_iter()
            .map(|(year, log_count)| LogPoint { year, log_count })
            .collect();
        points.sort_by_key(|p| p.year);
        Self {
            source_label: label.into(),
            points,
            dropped_years: Vec::new(),
        }
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn points(&self) -> &[LogPoint<T>] {
        &self.points
    }

    pub fn dropped_years(&self) -> &[i32] {
        &self.dropped_years
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn years(&self) -> Vec<T> {
        self.points.iter().map(|p| T::year(p.year)).collect()
    }

    pub fn values(&self) -> Vec<T> {
        self.points.iter().map(|p| p.log_count).collect()
    }

    pub fn first_year(&self) -> Option<i32> {
        self.points.first().map(|p| p.year)
    }

    pub fn last_year(&self) -> Option<i32> {
        self.points.last().map(|p| p.year)
    }

    /// Debug dump as `year\tlog_count` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("year\tlog_count\n");
        for p in &self.points {
            out.push_str(&format!("{}\t{}\n", p.year, p.log_count));
        }
        out
    }
}

/// Takes the natural log of every count, handling zero counts per `policy`.
pub fn log_transform<T: Scalar>(series: &AnnualSeries<T>, policy: ZeroPolicy) -> Result<LogSeries<T>> {
    let mut points = Vec::with_capacity(series.len());
    let mut dropped_years = Vec::new();
    for o in series.observations() {
        if o.count == T::zero() {
            match policy {
                ZeroPolicy::DropWithWarning => dropped_years.push(o.year),
                ZeroPolicy::Error => return Err(Error::ZeroCount(o.year)),
            }
        } else {
            points.push(LogPoint {
                year: o.year,
                log_count: o.count.ln(),
            });
        }
    }
    Ok(LogSeries {
        source_label: series.label().to_owned(),
        points,
        dropped_years,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load(text: &str) -> Result<AnnualSeries<f64>> {
        load_csv(text.as_bytes(), &CsvOptions::default())
    }

    #[test]
    fn two_rows_rejected_by_size_gate() {
        let err = load("1980,702880\n1981,723500").unwrap_err();
        assert_eq!(err, Error::TooFewObservations { got: 2, need: 4 });
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let s = load("year,count\n1983,4\n1980,1\n1982,3\n1981,2\n").unwrap();
        let years: Vec<i32> = s.observations().iter().map(|o| o.year).collect();
        assert_eq!(years, vec![1980, 1981, 1982, 1983]);
    }

    #[test]
    fn negative_count_names_line_and_value() {
        let err = load("1914,-5\n1915,1\n1916,1\n1917,1\n").unwrap_err();
        assert_eq!(
            err,
            Error::NegativeCount {
                line: 1,
                year: 1914,
                value: -5.0
            }
        );
        assert!(err.to_string().contains("line 1"));
        assert!(err.to_string().contains("-5"));
    }

    #[test]
    fn duplicate_year_rejected() {
        let err = load("1,1\n2,1\n2,3\n4,1\n").unwrap_err();
        assert_eq!(err, Error::DuplicateYear(2));
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = load("# comment\n1,1\n2,x\n3,1\n4,1\n").unwrap_err();
        match err {
            Error::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = load("1,1\n2,1,7\n3,1\n4,1\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 2, .. }));
    }

    #[test]
    fn comments_header_and_delimiter() {
        let opts = CsvOptions {
            delimiter: b';',
            ..CsvOptions::default()
        };
        let s: AnnualSeries<f64> =
            load_csv("# src\nyear;count\n1;1.5\n2;2\n# mid\n3;3\n4;4\n".as_bytes(), &opts).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.observations()[0].count, 1.5);
    }

    #[test]
    fn forced_header_skips_numeric_first_row() {
        let opts = CsvOptions {
            has_header: Some(true),
            ..CsvOptions::default()
        };
        let s: AnnualSeries<f64> = load_csv("0,0\n1,1\n2,1\n3,1\n4,1\n".as_bytes(), &opts).unwrap();
        assert_eq!(s.first_year(), 1);
    }

    #[test]
    fn log_of_one_and_e_squared() {
        let e2 = std::f64::consts::E.powi(2);
        let s = AnnualSeries::new("t", vec![(1700, 1.0), (1701, e2), (1702, 3.0), (1703, 4.0)]).unwrap();
        let l = log_transform(&s, ZeroPolicy::Error).unwrap();
        assert_eq!(l.points()[0].log_count, 0.0);
        assert!((l.points()[1].log_count - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_policy_cases() {
        let s = AnnualSeries::new("t", vec![(1655, 0.0), (1656, 2.0), (1657, 3.0), (1658, 4.0)]).unwrap();
        let l = log_transform(&s, ZeroPolicy::DropWithWarning).unwrap();
        assert_eq!(l.dropped_years(), &[1655]);
        assert_eq!(l.first_year(), Some(1656));
        assert_eq!(log_transform(&s, ZeroPolicy::Error), Err(Error::ZeroCount(1655)));
    }

    #[test]
    fn tsv_dump() {
        let l = LogSeries::from_points("x", vec![(2, 0.5), (1, 0.25)]);
        assert_eq!(l.to_tsv(), "year\tlog_count\n1\t0.25\n2\t0.5\n");
    }

    fn arb_rows() -> impl Strategy<Value = Vec<(i32, f64)>> {
        prop::collection::btree_map(1600i32..2100, prop_oneof![Just(0.0), 1e-3f64..1e9], 4..60)
            .prop_map(|m| m.into_iter().collect())
    }

    proptest! {
        #[test]
        fn log_round_trip_and_partition(rows in arb_rows()) {
            let s = AnnualSeries::new("p", rows.clone()).unwrap();
            let l = log_transform(&s, ZeroPolicy::DropWithWarning).unwrap();
            prop_assert_eq!(l.len() + l.dropped_years().len(), s.len());
            let counts: std::collections::BTreeMap<i32, f64> = rows.into_iter().collect();
            for p in l.points() {
                let c = counts[&p.year];
                prop_assert!(((p.log_count.exp() - c) / c).abs() <= 1e-12);
            }
            for y in l.dropped_years() {
                prop_assert_eq!(counts[y], 0.0);
            }
        }

        #[test]
        fn csv_is_idempotent(rows in arb_rows()) {
            let s = AnnualSeries::new("p", rows).unwrap();
            let once = s.to_csv();
            let again: AnnualSeries<f64> = load_csv(once.as_bytes(), &CsvOptions { label: "p".into(), ..CsvOptions::default() }).unwrap();
            prop_assert_eq!(&again, &s);
            prop_assert_eq!(again.to_csv(), once);
        }
    }
}
