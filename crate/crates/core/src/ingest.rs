//! Hourly weather and outage record ingestion.
//!
//! Weather CSV: `timestamp,<factor1>,...,<factorK>` with ISO-8601 UTC
//! timestamps. An empty cell or `N/A` is a missing value. Outage CSV:
//! `timestamp,weather_related` with `weather_related` in {0,1}.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime, Utc};

use crate::error::{Error, Result};

pub const TIMESTAMP_COLUMN: &str = "timestamp";
pub const WEATHER_RELATED_COLUMN: &str = "weather_related";

/// Columns left out when the caller does not name a schema. Circular
/// quantities do not discretize meaningfully into equal-width bins.
pub const EXCLUDED_BY_DEFAULT: &[&str] = &["wind_direction"];

const HOUR_SECONDS: i64 = 3600;

/// Weather records as read from disk, before hourly alignment and filling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub timestamps: Vec<DateTime<Utc>>,
    pub columns: Vec<String>,
    /// Column-major: `values[c][r]`.
    pub values: Vec<Vec<Option<f64>>>,
}

/// Complete hourly table: uniform one-hour grid, no missing factor values,
/// and a binary outage label per hour.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTable {
    pub timestamps: Vec<DateTime<Utc>>,
    pub columns: Vec<String>,
    /// Column-major: `values[c][r]`.
    pub values: Vec<Vec<f64>>,
    pub label: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutageEvent {
    pub timestamp: DateTime<Utc>,
    pub weather_related: bool,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.values
            .iter()
            .map(|col| col.iter().filter(|v| v.is_none()).count())
            .sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = Vec::with_capacity(self.columns.len() + 1);
        header.push(TIMESTAMP_COLUMN.to_string());
        header.extend(self.columns.iter().cloned());
        wtr.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (r, ts) in self.timestamps.iter().enumerate() {
            record.clear();
            record.push(format_timestamp(ts));
            for col in &self.values {
                record.push(match col[r] {
                    Some(v) => format!("{v}"),
                    None => String::new(),
                });
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()
    }
}

impl TimeSeriesTable {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Factor values of one hour, in column order.
    pub fn row(&self, r: usize) -> Vec<f64> {
        self.values.iter().map(|col| col[r]).collect()
    }

    pub fn to_raw(&self) -> RawTable {
        RawTable {
            timestamps: self.timestamps.clone(),
            columns: self.columns.clone(),
            values: self
                .values
                .iter()
                .map(|col| col.iter().copied().map(Some).collect())
                .collect(),
        }
    }

    /// Keeps only the given rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> TimeSeriesTable {
        TimeSeriesTable {
            timestamps: rows.iter().map(|&r| self.timestamps[r]).collect(),
            columns: self.columns.clone(),
            values: self
                .values
                .iter()
                .map(|col| rows.iter().map(|&r| col[r]).collect())
                .collect(),
            label: rows.iter().map(|&r| self.label[r]).collect(),
        }
    }
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    const NAIVE_FORMATS: &[&str] = &[
        "%Y-%m-%dT%H:%MZ",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ];
    NAIVE_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|naive| naive.and_utc())
}

/// Accepts plain decimal or scientific notation only. Locale-specific
/// separators, `inf` and `NaN` are treated as unparseable.
fn parse_cell(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("n/a") {
        return None;
    }
    if !s
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
    {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_weather_csv(path: impl AsRef<Path>, schema: &[String]) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_weather_reader(file, path, schema)
}

/// Reads weather records. An empty `schema` selects every column except the
/// timestamp and [`EXCLUDED_BY_DEFAULT`].
pub fn parse_weather_reader<R: Read>(
    reader: R,
    origin: &Path,
    schema: &[String],
) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_error(origin, 0, "<header>", e.to_string()))?
        .clone();
    let position = |name: &str| header.iter().position(|h| h == name);
    let ts_idx = position(TIMESTAMP_COLUMN).ok_or_else(|| Error::MissingColumn {
        path: origin.to_path_buf(),
        column: TIMESTAMP_COLUMN.to_string(),
    })?;

    let columns: Vec<String> = if schema.is_empty() {
        header
            .iter()
            .filter(|h| *h != TIMESTAMP_COLUMN && !EXCLUDED_BY_DEFAULT.contains(h))
            .map(str::to_string)
            .collect()
    } else {
        schema.to_vec()
    };
    let indices = columns
        .iter()
        .map(|c| {
            position(c).ok_or_else(|| Error::MissingColumn {
                path: origin.to_path_buf(),
                column: c.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<(DateTime<Utc>, usize, Vec<Option<f64>>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // Row numbers are 1-based data rows (the header is row 0).
        let row_no = i + 1;
        let rec = rec.map_err(|e| parse_error(origin, row_no, "<record>", e.to_string()))?;
        let raw_ts = rec.get(ts_idx).unwrap_or("");
        let ts = parse_timestamp(raw_ts).ok_or_else(|| {
            parse_error(
                origin,
                row_no,
                TIMESTAMP_COLUMN,
                format!("invalid timestamp `{raw_ts}`"),
            )
        })?;
        let cells = indices
            .iter()
            .map(|&c| rec.get(c).and_then(parse_cell))
            .collect();
        rows.push((ts, row_no, cells));
    }

    rows.sort_by_key(|(ts, row_no, _)| (*ts, *row_no));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateTimestamp {
            path: origin.to_path_buf(),
            row: w[1].1,
            timestamp: format_timestamp(&w[1].0),
        });
    }

    let mut values = vec![Vec::with_capacity(rows.len()); columns.len()];
    let mut timestamps = Vec::with_capacity(rows.len());
    for (ts, _, cells) in rows {
        timestamps.push(ts);
        for (col, cell) in values.iter_mut().zip(cells) {
            col.push(cell);
        }
    }
    Ok(RawTable {
        timestamps,
        columns,
        values,
    })
}

fn parse_error(path: &Path, row: usize, column: &str, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message,
    }
}

pub fn floor_to_hour(ts: DateTime<Utc>) -> DateTime<Utc> {
    let secs = ts.timestamp().div_euclid(HOUR_SECONDS) * HOUR_SECONDS;
    DateTime::from_timestamp(secs, 0).expect("hour floor stays in range")
}

/// Aligns records on a uniform hourly grid and fills missing values.
///
/// Records are bucketed to the hour they fall in (several records in one
/// hour are averaged per column), missing whole hours become all-missing
/// rows, interior gaps are filled by linear interpolation in time and
/// leading/trailing gaps by the nearest observed value.
pub fn interpolate_missing(raw: &RawTable) -> Result<TimeSeriesTable> {
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let first = floor_to_hour(raw.timestamps[0]);
    let last = floor_to_hour(*raw.timestamps.last().unwrap());
    let hours = ((last - first).num_seconds() / HOUR_SECONDS) as usize + 1;

    let mut sums = vec![vec![(0.0f64, 0u32); hours]; raw.columns.len()];
    for (r, ts) in raw.timestamps.iter().enumerate() {
        let slot = ((floor_to_hour(*ts) - first).num_seconds() / HOUR_SECONDS) as usize;
        for (c, col) in raw.values.iter().enumerate() {
            if let Some(v) = col[r] {
                let acc = &mut sums[c][slot];
                acc.0 += v;
                acc.1 += 1;
            }
        }
    }

    let mut values = Vec::with_capacity(raw.columns.len());
    for (name, col) in raw.columns.iter().zip(sums) {
        let grid: Vec<Option<f64>> = col
            .into_iter()
            .map(|(s, n)| (n > 0).then(|| if n == 1 { s } else { s / n as f64 }))
            .collect();
        values.push(fill_column(&grid).ok_or_else(|| Error::UnrecoverableColumn(name.clone()))?);
    }

    let timestamps = (0..hours)
        .map(|h| first + Duration::hours(h as i64))
        .collect();
    Ok(TimeSeriesTable {
        timestamps,
        columns: raw.columns.clone(),
        values,
        label: vec![0; hours],
    })
}

/// Linear fill on a uniform grid; `None` when nothing is observed.
pub(crate) fn fill_column(col: &[Option<f64>]) -> Option<Vec<f64>> {
    let observed: Vec<usize> = (0..col.len()).filter(|&i| col[i].is_some()).collect();
    let (&head, &tail) = (observed.first()?, observed.last()?);
    let mut out = vec![0.0; col.len()];
    out[..=head].fill(col[head].unwrap());
    out[tail..].fill(col[tail].unwrap());
    for pair in observed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (va, vb) = (col[a].unwrap(), col[b].unwrap());
        out[a] = va;
        out[b] = vb;
        let span = (b - a) as f64;
        for (k, slot) in out.iter_mut().enumerate().take(b).skip(a + 1) {
            let t = (k - a) as f64 / span;
            *slot = va + t * (vb - va);
        }
    }
    Some(out)
}

/// Sets the label to 1 for every hour containing at least one of `events`
/// (an event at hh:mm marks hour hh). Existing 1s are kept.
pub fn attach_outage_labels(
    table: &TimeSeriesTable,
    events: &[DateTime<Utc>],
) -> Result<TimeSeriesTable> {
    let mut out = table.clone();
    if events.is_empty() {
        return Ok(out);
    }
    let Some((&first, &last)) = table.timestamps.first().zip(table.timestamps.last()) else {
        return Err(Error::EventsOutOfRange(
            events.iter().map(format_timestamp).collect(),
        ));
    };
    let mut offending = Vec::new();
    for ev in events {
        let hour = floor_to_hour(*ev);
        if hour < first || hour > last {
            offending.push(format_timestamp(ev));
            continue;
        }
        let slot = ((hour - first).num_seconds() / HOUR_SECONDS) as usize;
        out.label[slot] = 1;
    }
    if !offending.is_empty() {
        return Err(Error::EventsOutOfRange(offending));
    }
    Ok(out)
}

pub fn parse_outage_csv(path: impl AsRef<Path>) -> Result<Vec<OutageEvent>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_outage_reader(file, path)
}

pub fn parse_outage_reader<R: Read>(reader: R, origin: &Path) -> Result<Vec<OutageEvent>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_error(origin, 0, "<header>", e.to_string()))?
        .clone();
    // An empty file lists no outages.
    if header.iter().all(str::is_empty) {
        return Ok(Vec::new());
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: origin.to_path_buf(),
                column: name.to_string(),
            })
    };
    let ts_idx = find(TIMESTAMP_COLUMN)?;
    let wr_idx = find(WEATHER_RELATED_COLUMN)?;
    let mut events = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row_no = i + 1;
        let rec = rec.map_err(|e| parse_error(origin, row_no, "<record>", e.to_string()))?;
        let raw_ts = rec.get(ts_idx).unwrap_or("");
        let timestamp = parse_timestamp(raw_ts).ok_or_else(|| {
            parse_error(
                origin,
                row_no,
                TIMESTAMP_COLUMN,
                format!("invalid timestamp `{raw_ts}`"),
            )
        })?;
        let weather_related = match rec.get(wr_idx).unwrap_or("") {
            "1" => true,
            "0" => false,
            other => {
                return Err(parse_error(
                    origin,
                    row_no,
                    WEATHER_RELATED_COLUMN,
                    format!("expected 0 or 1, got `{other}`"),
                ))
            }
        };
        events.push(OutageEvent {
            timestamp,
            weather_related,
        });
    }
    Ok(events)
}

pub fn write_outage_csv<W: Write>(events: &[OutageEvent], writer: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([TIMESTAMP_COLUMN, WEATHER_RELATED_COLUMN])?;
    for ev in events {
        wtr.write_record([
            format_timestamp(&ev.timestamp),
            if ev.weather_related { "1" } else { "0" }.to_string(),
        ])?;
    }
    wtr.flush()
}

/// Timestamps of weather-related events only.
pub fn weather_related_times(events: &[OutageEvent]) -> Vec<DateTime<Utc>> {
    events
        .iter()
        .filter(|e| e.weather_related)
        .map(|e| e.timestamp)
        .collect()
}

/// Loads both files and returns the complete labeled hourly table.
pub fn load_labeled(
    weather: impl AsRef<Path>,
    outages: impl AsRef<Path>,
    schema: &[String],
) -> Result<TimeSeriesTable> {
    let raw = parse_weather_csv(weather, schema)?;
    let table = interpolate_missing(&raw)?;
    let events = parse_outage_csv(outages)?;
    attach_outage_labels(&table, &weather_related_times(&events))
}

/// Count of hours per label value; handy for logging.
pub fn label_counts(label: &[u8]) -> BTreeMap<u8, usize> {
    let mut counts = BTreeMap::new();
    for &l in label {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn hour(h: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap() + Duration::hours(h)
    }

    fn parse_str(s: &str, schema: &[&str]) -> Result<RawTable> {
        let schema: Vec<String> = schema.iter().map(|s| s.to_string()).collect();
        parse_weather_reader(s.as_bytes(), Path::new("mem.csv"), &schema)
    }

    #[test]
    fn well_formed_rows_pass_through() {
        let t = parse_str(
            "timestamp,wind,temp\n\
             2020-01-01T00:00:00Z,1.5,10\n\
             2020-01-01T01:00:00Z,2.5,11\n\
             2020-01-01T02:00:00Z,3.5,12\n",
            &["wind", "temp"],
        )
        .unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.missing_count(), 0);
        assert_eq!(t.values[0], vec![Some(1.5), Some(2.5), Some(3.5)]);
    }

    #[test]
    fn na_cell_is_missing_and_row_kept() {
        let t = parse_str(
            "timestamp,wind\n2020-01-01T00:00:00Z,N/A\n2020-01-01T01:00:00Z,\n2020-01-01T02:00:00Z,1,5\n",
            &["wind"],
        );
        // The last record has a stray field; csv rejects ragged rows.
        assert!(t.is_err());
        let t = parse_str(
            "timestamp,wind\n2020-01-01T00:00:00Z,N/A\n2020-01-01T01:00:00Z,\n2020-01-01T02:00:00Z,\"1,5\"\n",
            &["wind"],
        )
        .unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.values[0], vec![None, None, None]);
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let err = parse_str(
            "timestamp,wind\n2020-01-01T00:00Z,1\n2020-01-01T00:00:00Z,2\n",
            &["wind"],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateTimestamp { row: 2, .. }), "{err}");
    }

    #[test]
    fn missing_column_rejected() {
        let err = parse_str("timestamp,wind\n2020-01-01T00:00Z,1\n", &["gust"]).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { ref column, .. } if column == "gust"));
        let err = parse_str("time,wind\n2020-01-01T00:00Z,1\n", &["wind"]).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { ref column, .. } if column == "timestamp"));
    }

    #[test]
    fn default_schema_skips_wind_direction() {
        let t = parse_str(
            "timestamp,wind,wind_direction,temp\n2020-01-01T00:00Z,1,270,3\n",
            &[],
        )
        .unwrap();
        assert_eq!(t.columns, vec!["wind", "temp"]);
    }

    #[test]
    fn rows_sorted_by_timestamp() {
        let t = parse_str(
            "timestamp,x\n2020-01-01T02:00Z,3\n2020-01-01T00:00Z,1\n2020-01-01T01:00Z,2\n",
            &["x"],
        )
        .unwrap();
        assert_eq!(t.timestamps, vec![hour(0), hour(1), hour(2)]);
        assert_eq!(t.values[0], vec![Some(1.0), Some(2.0), Some(3.0)]);
    }

    fn raw(col: Vec<Option<f64>>) -> RawTable {
        RawTable {
            timestamps: (0..col.len() as i64).map(hour).collect(),
            columns: vec!["x".into()],
            values: vec![col],
        }
    }

    #[test]
    fn interpolation_examples() {
        let t = interpolate_missing(&raw(vec![Some(1.0), None, Some(3.0)])).unwrap();
        assert_eq!(t.values[0], vec![1.0, 2.0, 3.0]);
        let t = interpolate_missing(&raw(vec![None, Some(5.0), Some(5.0)])).unwrap();
        assert_eq!(t.values[0], vec![5.0, 5.0, 5.0]);
        let t = interpolate_missing(&raw(vec![Some(0.0), None, None, Some(6.0)])).unwrap();
        assert_eq!(t.values[0], vec![0.0, 2.0, 4.0, 6.0]);
        let t = interpolate_missing(&raw(vec![Some(1.0), Some(2.0), None])).unwrap();
        assert_eq!(t.values[0], vec![1.0, 2.0, 2.0]);
    }

    #[test]
    fn all_missing_column_is_unrecoverable() {
        let err = interpolate_missing(&raw(vec![None, None])).unwrap_err();
        assert!(matches!(err, Error::UnrecoverableColumn(ref c) if c == "x"));
    }

    #[test]
    fn timeline_gaps_become_interpolated_rows() {
        let t = RawTable {
            timestamps: vec![hour(0), hour(3)],
            columns: vec!["x".into()],
            values: vec![vec![Some(0.0), Some(6.0)]],
        };
        let filled = interpolate_missing(&t).unwrap();
        assert_eq!(filled.timestamps, (0..4).map(hour).collect::<Vec<_>>());
        assert_eq!(filled.values[0], vec![0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn sub_hour_records_are_bucketed_and_averaged() {
        let t = RawTable {
            timestamps: vec![hour(0), hour(0) + Duration::minutes(53), hour(1)],
            columns: vec!["x".into()],
            values: vec![vec![Some(1.0), Some(3.0), Some(5.0)]],
        };
        let filled = interpolate_missing(&t).unwrap();
        assert_eq!(filled.values[0], vec![2.0, 5.0]);
    }

    fn table(n: i64) -> TimeSeriesTable {
        interpolate_missing(&raw((0..n).map(|i| Some(i as f64)).collect())).unwrap()
    }

    #[test]
    fn labels_bucket_to_floor_hour() {
        let t = table(24);
        assert!(attach_outage_labels(&t, &[]).unwrap().label.iter().all(|&l| l == 0));

        let ev = hour(14) + Duration::minutes(48);
        let l = attach_outage_labels(&t, &[ev]).unwrap().label;
        assert_eq!(l.iter().map(|&x| x as usize).sum::<usize>(), 1);
        assert_eq!(l[14], 1);

        let l = attach_outage_labels(&t, &[ev, hour(14) + Duration::minutes(5)])
            .unwrap()
            .label;
        assert_eq!(l.iter().map(|&x| x as usize).sum::<usize>(), 1);
    }

    #[test]
    fn out_of_range_events_listed() {
        let t = table(3);
        let err = attach_outage_labels(&t, &[hour(1), hour(5), hour(-1)]).unwrap_err();
        match err {
            Error::EventsOutOfRange(list) => assert_eq!(list.len(), 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn outage_csv_parses_flags() {
        let evs = parse_outage_reader(
            "timestamp,weather_related\n2020-01-01T14:48:00Z,1\n2020-01-01T15:00Z,0\n".as_bytes(),
            Path::new("o.csv"),
        )
        .unwrap();
        assert_eq!(evs.len(), 2);
        assert_eq!(weather_related_times(&evs), vec![hour(14) + Duration::minutes(48)]);
        assert!(parse_outage_reader(
            "timestamp,weather_related\n2020-01-01T14:48:00Z,yes\n".as_bytes(),
            Path::new("o.csv"),
        )
        .is_err());
        assert!(parse_outage_reader("".as_bytes(), Path::new("o.csv")).unwrap().is_empty());
        assert!(parse_outage_reader("time,flag\n".as_bytes(), Path::new("o.csv")).is_err());
    }

    proptest! {
        #[test]
        fn affine_signals_reconstructed(
            a in -100.0f64..100.0,
            b in -10.0f64..10.0,
            mask in proptest::collection::vec(any::<bool>(), 3..60),
        ) {
            let n = mask.len();
            let truth: Vec<f64> = (0..n).map(|t| a + b * t as f64).collect();
            let mut col: Vec<Option<f64>> = truth.iter().copied().map(Some).collect();
            // Only interior gaps: endpoints stay observed.
            for (i, &drop) in mask.iter().enumerate().take(n - 1).skip(1) {
                if drop { col[i] = None; }
            }
            let filled = fill_column(&col).unwrap();
            for (f, t) in filled.iter().zip(&truth) {
                prop_assert!((f - t).abs() <= 1e-9 * t.abs().max(1.0));
            }
        }

        #[test]
        fn labels_idempotent_and_monotone(
            first in proptest::collection::vec(0i64..48, 0..6),
            extra in proptest::collection::vec(0i64..48, 0..6),
        ) {
            let t = table(48);
            let ev1: Vec<_> = first.iter().map(|&h| hour(h) + Duration::minutes(30)).collect();
            let once = attach_outage_labels(&t, &ev1).unwrap();
            let twice = attach_outage_labels(&once, &ev1).unwrap();
            prop_assert_eq!(&once.label, &twice.label);
            let ev2: Vec<_> = ev1.iter().copied().chain(extra.iter().map(|&h| hour(h))).collect();
            let more = attach_outage_labels(&t, &ev2).unwrap();
            for (a, b) in once.label.iter().zip(&more.label) {
                prop_assert!(b >= a);
            }
        }

        #[test]
        fn complete_tables_round_trip(values in proptest::collection::vec(
            proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 5), 1..4)
        ) {
            let t = RawTable {
                timestamps: (0..5).map(hour).collect(),
                columns: (0..values.len()).map(|i| format!("f{i}")).collect(),
                values: values.iter().map(|c| c.iter().copied().map(Some).collect()).collect(),
            };
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            let back = parse_weather_reader(buf.as_slice(), Path::new("rt"), &t.columns).unwrap();
            prop_assert_eq!(back.timestamps, t.timestamps);
            for (x, y) in back.values.iter().flatten().zip(t.values.iter().flatten()) {
                prop_assert_eq!(x.unwrap().to_bits(), y.unwrap().to_bits());
            }
        }
    }
}
