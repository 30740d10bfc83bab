use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{HgtsError, Result};

/// A multivariate series with one timestamp per step.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTable {
    /// Seconds since the Unix epoch, strictly increasing.
    pub timestamps: Vec<i64>,
    pub names: Vec<String>,
    /// `C` rows of `T` values.
    pub values: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn channels(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Writes the table in the format [`load_csv`] reads.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| HgtsError::Data(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (t, &ts) in self.timestamps.iter().enumerate() {
            let when = DateTime::from_timestamp(ts, 0)
                .ok_or_else(|| HgtsError::Data(format!("timestamp {ts} out of range")))?
                .naive_utc()
                .format("%Y-%m-%d %H:%M:%S")
                .to_string();
            let mut rec = vec![when];
            rec.extend(self.values.iter().map(|ch| format!("{:?}", ch[t])));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| HgtsError::io(path, e))
    }
}

fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y/%m/%d %H:%M", "%Y/%m/%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

/// Reads a CSV whose first column is a timestamp (ISO-8601 or epoch
/// seconds) and whose remaining columns are numeric channels.
///
/// Row numbers in errors count data rows from 1, excluding the header.
pub fn load_csv(path: &Path) -> Result<SeriesTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => HgtsError::Data(format!("cannot open {}: {e}", path.display())),
            _ => HgtsError::Data(format!("{}: {e}", path.display())),
        })?;
    let header = reader
        .headers()
        .map_err(|e| HgtsError::Data(format!("{}: bad header: {e}", path.display())))?
        .clone();
    if header.len() < 2 {
        return Err(HgtsError::Data(format!(
            "{}: need a timestamp column and at least one channel",
            path.display()
        )));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut timestamps = Vec::new();
    let mut values = vec![Vec::new(); names.len()];
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| HgtsError::Data(format!("{}: row {row}: {e}", path.display())))?;
        if rec.len() != header.len() {
            return Err(HgtsError::Data(format!(
                "{}: row {row} has {} fields, expected {}",
                path.display(),
                rec.len(),
                header.len()
            )));
        }
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| {
            HgtsError::Data(format!("{}: row {row}, column {}: bad timestamp {:?}", path.display(), &header[0], &rec[0]))
        })?;
        if let Some(&prev) = timestamps.last() {
            if ts <= prev {
                return Err(HgtsError::Data(format!(
                    "{}: row {row}: timestamp {:?} does not increase",
                    path.display(),
                    &rec[0]
                )));
            }
        }
        timestamps.push(ts);
        for (c, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                HgtsError::Data(format!(
                    "{}: row {row}, column {} ({}): cannot parse {cell:?}",
                    path.display(),
                    c + 2,
                    names[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(HgtsError::Data(format!(
                    "{}: row {row}, column {} ({}): missing or non-finite value",
                    path.display(),
                    c + 2,
                    names[c]
                )));
            }
            values[c].push(v);
        }
    }
    if timestamps.is_empty() {
        return Err(HgtsError::Data(format!("{}: no data rows", path.display())));
    }
    log::info!("loaded {}: {} channels, {} steps", path.display(), names.len(), timestamps.len());
    Ok(SeriesTable {
        timestamps,
        names,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_rows_round_trip() {
        let f = write("date,a,b\n2016-07-01 00:00:00,1.5,-2\n2016-07-01 01:00:00,0.25,3\n2016-07-01 02:00:00,7,8.125\n");
        let t = load_csv(f.path()).unwrap();
        assert_eq!(t.channels(), 2);
        assert_eq!(t.values[0], vec![1.5, 0.25, 7.0]);
        assert_eq!(t.timestamps[1] - t.timestamps[0], 3600);
        let out = tempfile::NamedTempFile::new().unwrap();
        t.write_csv(out.path()).unwrap();
        assert_eq!(load_csv(out.path()).unwrap(), t);
    }

    #[test]
    fn text_cell_is_named() {
        let f = write("date,a,b\n1,1,2\n2,oops,3\n");
        let err = load_csv(f.path()).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("column 2") && err.contains("oops"), "{err}");
    }

    #[test]
    fn missing_value_and_order_rejected() {
        let f = write("date,a\n1,1\n2,\n");
        assert!(load_csv(f.path()).unwrap_err().to_string().contains("row 2"));
        let f = write("date,a\n2,1\n1,2\n");
        assert!(load_csv(f.path()).unwrap_err().to_string().contains("does not increase"));
        let f = write("date,a\n2,NaN\n");
        assert!(load_csv(f.path()).is_err());
    }

    #[test]
    fn missing_file_is_data_error() {
        assert!(matches!(load_csv(Path::new("/nonexistent/x.csv")), Err(HgtsError::Data(_))));
    }
}
