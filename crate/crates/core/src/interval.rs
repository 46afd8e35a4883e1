//! Interval data model, OHLC ingestion, scale transforms, the
//! estimation/hold-out split and lag embedding into supervised pairs.

use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// A lower/upper bound pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    /// Midpoint and half-range.
    pub fn center_radius(&self) -> (f64, f64) {
        ((self.lower + self.upper) / 2.0, (self.upper - self.lower) / 2.0)
    }

    pub fn from_center_radius(center: f64, radius: f64) -> Self {
        Self::new(center - radius, center + radius)
    }

    /// True when the lower bound exceeds the upper bound. Forecasts may do
    /// this; observed data may not.
    pub fn is_inverted(&self) -> bool {
        self.lower > self.upper
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(f(self.lower), f(self.upper))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhlcRecord {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl OhlcRecord {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.open, self.high, self.low, self.close]
            .iter()
            .all(|v| v.is_finite());
        let fail = |msg: String| {
            Err(Error::Validation {
                date: self.date.to_string(),
                msg,
            })
        };
        if !finite {
            return fail("non-finite price".into());
        }
        if self.low > self.high {
            return fail(format!("low {} exceeds high {}", self.low, self.high));
        }
        if self.low > self.open.min(self.close) {
            return fail(format!("low {} above open/close", self.low));
        }
        if self.high < self.open.max(self.close) {
            return fail(format!("high {} below open/close", self.high));
        }
        Ok(())
    }
}

/// Header names for the OHLC columns. Matching is case-insensitive and
/// ignores surrounding whitespace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub date: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            date: "date".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
        }
    }
}

pub fn parse_ohlc_csv(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<Vec<OhlcRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_ohlc_reader(file, path, columns)
}

/// Parses OHLC rows from any reader. `origin` is only used in error messages.
pub fn parse_ohlc_reader<R: Read>(
    reader: R,
    origin: impl Into<PathBuf>,
    columns: &ColumnMap,
) -> Result<Vec<OhlcRecord>> {
    let origin = origin.into();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.clone(),
        line,
        msg,
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
    };
    let idx = [
        find(&columns.date)?,
        find(&columns.open)?,
        find(&columns.high)?,
        find(&columns.low)?,
        find(&columns.close)?,
    ];

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| {
            row.get(i)
                .ok_or_else(|| parse_err(line, format!("missing field {i}")))
        };
        let date = NaiveDate::parse_from_str(field(idx[0])?, "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("bad date {:?}: {e}", field(idx[0]).unwrap_or(""))))?;
        let num = |i: usize| -> Result<f64> {
            let s = field(i)?;
            s.parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad number {s:?}")))
        };
        let rec = OhlcRecord {
            date,
            open: num(idx[1])?,
            high: num(idx[2])?,
            low: num(idx[3])?,
            close: num(idx[4])?,
        };
        rec.validate()?;
        records.push(rec);
    }

    records.sort_by_key(|r| r.date);
    if let Some(w) = records.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(Error::Validation {
            date: w[0].date.to_string(),
            msg: "duplicate date".into(),
        });
    }
    Ok(records)
}

/// Writes records with a `date,open,high,low,close` header. Values use the
/// shortest round-trip representation.
pub fn write_ohlc_csv<W: Write>(mut out: W, records: &[OhlcRecord]) -> std::io::Result<()> {
    writeln!(out, "date,open,high,low,close")?;
    for r in records {
        writeln!(out, "{},{},{},{},{}", r.date, r.open, r.high, r.low, r.close)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scale {
    Raw,
    Log,
}

impl Scale {
    /// Maps a stored value back to price space.
    pub fn to_price(self, v: f64) -> f64 {
        match self {
            Scale::Raw => v,
            Scale::Log => v.exp(),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Raw => "raw",
            Scale::Log => "log",
        })
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Scale::Raw),
            "log" => Ok(Scale::Log),
            other => Err(Error::Argument(format!("unknown scale {other:?}"))),
        }
    }
}

/// Dated sequence of intervals. Dates are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSeries {
    dates: Vec<NaiveDate>,
    intervals: Vec<Interval>,
    scale: Scale,
}

impl IntervalSeries {
    pub fn new(dates: Vec<NaiveDate>, intervals: Vec<Interval>, scale: Scale) -> Result<Self> {
        if dates.len() != intervals.len() {
            return Err(Error::Shape(format!(
                "{} dates for {} intervals",
                dates.len(),
                intervals.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Validation {
                date: w[1].to_string(),
                msg: "dates not strictly increasing".into(),
            });
        }
        Ok(Self {
            dates,
            intervals,
            scale,
        })
    }

    /// Builds a series over consecutive synthetic calendar days starting at
    /// 2000-01-03. Used for generated data where dates carry no meaning.
    pub fn from_intervals(intervals: Vec<Interval>, scale: Scale) -> Self {
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
        let dates = start.iter_days().take(intervals.len()).collect();
        Self {
            dates,
            intervals,
            scale,
        }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    /// Contiguous sub-series `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            dates: self.dates[start..end].to_vec(),
            intervals: self.intervals[start..end].to_vec(),
            scale: self.scale,
        }
    }
}

pub fn to_interval_series(records: &[OhlcRecord], scale: Scale) -> Result<IntervalSeries> {
    let mut intervals = Vec::with_capacity(records.len());
    for r in records {
        let iv = match scale {
            Scale::Raw => Interval::new(r.low, r.high),
            Scale::Log => {
                if r.low <= 0.0 || r.high <= 0.0 {
                    return Err(Error::Domain(format!(
                        "non-positive price on {} under log scale",
                        r.date
                    )));
                }
                Interval::new(r.low.ln(), r.high.ln())
            }
        };
        intervals.push(iv);
    }
    IntervalSeries::new(records.iter().map(|r| r.date).collect(), intervals, scale)
}

/// Size of the estimation sample: two thirds of `n`, rounded to nearest.
pub fn estimation_len(n: usize) -> usize {
    (2 * n + 1) / 3
}

pub fn split_estimation_holdout(series: &IntervalSeries) -> Result<(IntervalSeries, IntervalSeries)> {
    let n = series.len();
    if n < 3 {
        return Err(Error::Size {
            what: "series length for estimation/hold-out split",
            needed: 3,
            got: n,
        });
    }
    let cut = estimation_len(n);
    Ok((series.slice(0, cut), series.slice(cut, n)))
}

/// Supervised input/target pairs built from a lagged series.
///
/// Input `i` is `[L_t, U_t, L_{t-1}, U_{t-1}, ..., L_{t-d+1}, U_{t-d+1}]`
/// (lag-major, lower before upper) and its target is `[L_{t+1}, U_{t+1}]`,
/// where `t = origin_indices[i]` indexes the source series.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub origin_indices: Vec<usize>,
}

impl SupervisedDataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} inputs for {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(first) = inputs.first() {
            if inputs.iter().any(|x| x.len() != first.len()) {
                return Err(Error::Shape("ragged input vectors".into()));
            }
        }
        if let Some(first) = targets.first() {
            if first.is_empty() || targets.iter().any(|y| y.len() != first.len()) {
                return Err(Error::Shape("ragged or empty target vectors".into()));
            }
        }
        let origin_indices = (0..inputs.len()).collect();
        Ok(Self {
            inputs,
            targets,
            origin_indices,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn output_dim(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    /// Keeps only the listed input coordinates, in the given order.
    pub fn select_inputs(&self, columns: &[usize]) -> Self {
        Self {
            inputs: self
                .inputs
                .iter()
                .map(|x| columns.iter().map(|&c| x[c]).collect())
                .collect(),
            targets: self.targets.clone(),
            origin_indices: self.origin_indices.clone(),
        }
    }

    /// Keeps only target column `j`, yielding a single-output dataset.
    pub fn target_column(&self, j: usize) -> Self {
        Self {
            inputs: self.inputs.clone(),
            targets: self.targets.iter().map(|y| vec![y[j]]).collect(),
            origin_indices: self.origin_indices.clone(),
        }
    }

    /// Pairs at the given positions, in order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            inputs: rows.iter().map(|&r| self.inputs[r].clone()).collect(),
            targets: rows.iter().map(|&r| self.targets[r].clone()).collect(),
            origin_indices: rows.iter().map(|&r| self.origin_indices[r]).collect(),
        }
    }
}

/// Lag vector for the interval ending at position `t`, most recent first.
pub fn lag_vector(intervals: &[Interval], t: usize, order: usize) -> Vec<f64> {
    (0..order)
        .flat_map(|lag| {
            let iv = intervals[t - lag];
            [iv.lower, iv.upper]
        })
        .collect()
}

pub fn embed(series: &IntervalSeries, order: usize) -> Result<SupervisedDataset> {
    let n = series.len();
    if order == 0 {
        return Err(Error::Argument("embedding order must be at least 1".into()));
    }
    if n <= order {
        return Err(Error::Size {
            what: "series length for embedding",
            needed: order + 1,
            got: n,
        });
    }
    let ivs = series.intervals();
    let origins: Vec<usize> = (order - 1..n - 1).collect();
    Ok(SupervisedDataset {
        inputs: origins.iter().map(|&t| lag_vector(ivs, t, order)).collect(),
        targets: origins
            .iter()
            .map(|&t| vec![ivs[t + 1].lower, ivs[t + 1].upper])
            .collect(),
        origin_indices: origins,
    })
}

const SERIES_MAGIC: &str = "# itsforge interval-series v1";

/// Writes `date,lower,upper` rows preceded by a magic line recording the scale.
pub fn write_interval_series<W: Write>(mut out: W, series: &IntervalSeries) -> std::io::Result<()> {
    writeln!(out, "{SERIES_MAGIC} scale={}", series.scale)?;
    writeln!(out, "date,lower,upper")?;
    for (d, iv) in series.dates.iter().zip(&series.intervals) {
        writeln!(out, "{d},{:.16e},{:.16e}", iv.lower, iv.upper)?;
    }
    Ok(())
}

pub fn read_interval_series<R: BufRead>(reader: R, origin: impl Into<PathBuf>) -> Result<IntervalSeries> {
    let origin = origin.into();
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.clone(),
        line,
        msg,
    };
    let mut lines = reader.lines();
    let magic = lines
        .next()
        .transpose()?
        .ok_or_else(|| err(1, "empty file".into()))?;
    let scale = magic
        .strip_prefix(SERIES_MAGIC)
        .and_then(|rest| rest.trim().strip_prefix("scale="))
        .ok_or_else(|| err(1, "not an interval-series file".into()))?
        .parse::<Scale>()
        .map_err(|e| err(1, e.to_string()))?;
    match lines.next().transpose()? {
        Some(h) if h.trim() == "date,lower,upper" => {}
        _ => return Err(err(2, "expected header date,lower,upper".into())),
    }
    let mut dates = Vec::new();
    let mut intervals = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 3;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(err(lineno, "expected 3 fields".into()));
        }
        let date = NaiveDate::parse_from_str(parts[0].trim(), "%Y-%m-%d")
            .map_err(|e| err(lineno, e.to_string()))?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| err(lineno, format!("bad number {s:?}")))
        };
        dates.push(date);
        intervals.push(Interval::new(num(parts[1])?, num(parts[2])?));
    }
    IntervalSeries::new(dates, intervals, scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn parse(text: &str) -> Result<Vec<OhlcRecord>> {
        parse_ohlc_reader(text.as_bytes(), "inline.csv", &ColumnMap::default())
    }

    #[test]
    fn parses_table_row() {
        let recs = parse("Date,Open,High,Low,Close\n2012-12-11,1425.0,1434.27,1418.55,1427.84\n").unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].low, 1418.55);
        assert_eq!(recs[0].high, 1434.27);
        assert_eq!(recs[0].date, d("2012-12-11"));
    }

    #[test]
    fn empty_body_is_empty() {
        assert!(parse("date,open,high,low,close\n").unwrap().is_empty());
    }

    #[test]
    fn inverted_bounds_rejected_with_date() {
        let err = parse("date,open,high,low,close\n2020-01-02,7,5,10,6\n").unwrap_err();
        match err {
            Error::Validation { date, .. } => assert_eq!(date, "2020-01-02"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_names_line() {
        let err = parse("date,open,high,low,close\n2020-01-02,1,2,1,1\n2020-01-03,x,2,1,1\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sorts_and_rejects_duplicates() {
        let recs = parse("date,open,high,low,close\n2020-01-03,1,2,1,1\n2020-01-02,1,2,1,1\n").unwrap();
        assert!(recs[0].date < recs[1].date);
        let err = parse("date,open,high,low,close\n2020-01-03,1,2,1,1\n2020-01-03,1,2,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn custom_column_map() {
        let map = ColumnMap {
            date: "Day".into(),
            open: "O".into(),
            high: "H".into(),
            low: "L".into(),
            close: "Adj".into(),
        };
        let recs = parse_ohlc_reader("Day,H,L,O,Adj\n2020-01-02,5,1,2,3\n".as_bytes(), "x", &map).unwrap();
        assert_eq!((recs[0].open, recs[0].high, recs[0].low, recs[0].close), (2.0, 5.0, 1.0, 3.0));
    }

    fn record(low: f64, high: f64) -> OhlcRecord {
        OhlcRecord {
            date: d("2012-12-11"),
            open: low,
            high,
            low,
            close: high,
        }
    }

    #[test]
    fn scale_transforms() {
        let raw = to_interval_series(&[record(1418.55, 1434.27)], Scale::Raw).unwrap();
        assert_eq!(raw.intervals()[0], Interval::new(1418.55, 1434.27));

        let unit = to_interval_series(&[record(1.0, 1.0)], Scale::Log).unwrap();
        assert_eq!(unit.intervals()[0], Interval::new(0.0, 0.0));

        // hand-computed natural logs
        let log = to_interval_series(&[record(1418.55, 1434.27)], Scale::Log).unwrap();
        let iv = log.intervals()[0];
        assert!((iv.lower - 7.257_390_502_129_631).abs() < 1e-12, "{}", iv.lower);
        assert!((iv.upper - 7.268_411_287_955_089).abs() < 1e-12, "{}", iv.upper);
        assert!((iv.upper - iv.lower - (1434.27f64 / 1418.55).ln()).abs() < 1e-12);
    }

    #[test]
    fn log_scale_rejects_nonpositive() {
        let mut r = record(1.0, 2.0);
        r.low = 0.0;
        r.open = 0.0;
        assert!(matches!(to_interval_series(&[r], Scale::Log), Err(Error::Domain(_))));
    }

    #[test]
    fn center_radius_examples() {
        let (c, r) = Interval::new(1418.55, 1434.27).center_radius();
        assert!((c - 1426.41).abs() < 1e-9);
        assert!((r - 7.86).abs() < 1e-9);
        assert_eq!(Interval::new(3.5, 3.5).center_radius(), (3.5, 0.0));
        assert_eq!(Interval::new(0.0, 2.0).center_radius(), (1.0, 1.0));
    }

    #[test]
    fn split_sizes() {
        for (n, est, hold) in [(523, 349, 174), (3, 2, 1), (1218, 812, 406), (500, 333, 167)] {
            let s = IntervalSeries::from_intervals(vec![Interval::new(0.0, 1.0); n], Scale::Raw);
            let (a, b) = split_estimation_holdout(&s).unwrap();
            assert_eq!((a.len(), b.len()), (est, hold), "n={n}");
        }
        let s = IntervalSeries::from_intervals(vec![Interval::new(0.0, 1.0); 2], Scale::Raw);
        assert!(matches!(split_estimation_holdout(&s), Err(Error::Size { .. })));
    }

    fn ramp(n: usize) -> IntervalSeries {
        IntervalSeries::from_intervals(
            (0..n).map(|t| Interval::new(t as f64, t as f64 + 0.5)).collect(),
            Scale::Raw,
        )
    }

    #[test]
    fn embed_five_order_two() {
        let ds = embed(&ramp(5), 2).unwrap();
        assert_eq!(ds.len(), 3);
        // 1-based X_2, X_1 -> X_3 is 0-based 1, 0 -> 2
        assert_eq!(ds.inputs[0], vec![1.0, 1.5, 0.0, 0.5]);
        assert_eq!(ds.targets[0], vec![2.0, 2.5]);
        assert_eq!(embed(&ramp(5), 4).unwrap().len(), 1);
        assert!(matches!(embed(&ramp(5), 5), Err(Error::Size { .. })));
    }

    #[test]
    fn embed_matches_index_enumeration() {
        let n = 17;
        let order = 4;
        let s = ramp(n);
        let ds = embed(&s, order).unwrap();
        assert_eq!(ds.len(), n - order);
        for (p, (x, y)) in ds.inputs.iter().zip(&ds.targets).enumerate() {
            let t = p + order - 1;
            for lag in 0..order {
                assert_eq!(x[2 * lag], (t - lag) as f64);
                assert_eq!(x[2 * lag + 1], (t - lag) as f64 + 0.5);
            }
            assert_eq!(y, &vec![(t + 1) as f64, (t + 1) as f64 + 0.5]);
        }
    }

    #[test]
    fn series_file_round_trip() {
        let s = to_interval_series(&[record(1418.55, 1434.27)], Scale::Log).unwrap();
        let mut buf = Vec::new();
        write_interval_series(&mut buf, &s).unwrap();
        let back = read_interval_series(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn unordered_dates_rejected() {
        let err = IntervalSeries::new(
            vec![d("2020-01-02"), d("2020-01-02")],
            vec![Interval::new(0.0, 1.0); 2],
            Scale::Raw,
        );
        assert!(err.is_err());
    }
}
