//! CSV tables and key-value reports.
//!
//! Every writer renders the whole file in memory and moves it into place
//! from a temporary file in the same directory, so a failed run never leaves
//! a partial output behind.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::jsa::ScanRecord;
use crate::simulator::CountRecord;
use crate::uncertainty::BudgetReport;

pub const COUNTS_HEADER: [&str; 6] = [
    "p_ave_mw",
    "gates",
    "singles_signal",
    "singles_idler",
    "coincidences_raw",
    "accidentals_measured",
];
pub const SCAN_HEADER: [&str; 3] = ["lambda_s0_prime_nm", "cc_normalized", "eta_ts"];
pub const CURVE_HEADER: [&str; 2] = ["x", "value"];
pub const BUDGET_HEADER: [&str; 3] = ["configuration", "term", "relative_dev"];

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn input_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Input {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Opens a CSV file and checks that its header matches `expected` exactly.
fn open_table(path: &Path, expected: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| input_error(path, 1, format!("unreadable header: {e}")))?
        .clone();
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(input_error(
            path,
            1,
            format!("expected columns `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(reader)
}

fn rows(path: &Path, expected: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut reader = open_table(path, expected)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let fallback = i as u64 + 2;
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(fallback);
            input_error(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(fallback);
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T>
where
    T::Err: Display,
{
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|e| input_error(path, line, format!("column `{name}`: cannot parse `{raw}`: {e}")))
}

pub fn read_counts(path: &Path) -> Result<Vec<CountRecord>> {
    let mut out = Vec::new();
    for (line, rec) in rows(path, &COUNTS_HEADER)? {
        let accidentals = match rec.get(5).unwrap_or("") {
            "" => None,
            _ => Some(field(path, line, &rec, 5, COUNTS_HEADER[5])?),
        };
        let record = CountRecord {
            p_ave_mw: field(path, line, &rec, 0, COUNTS_HEADER[0])?,
            gates: field(path, line, &rec, 1, COUNTS_HEADER[1])?,
            singles_signal: field(path, line, &rec, 2, COUNTS_HEADER[2])?,
            singles_idler: field(path, line, &rec, 3, COUNTS_HEADER[3])?,
            coincidences_raw: field(path, line, &rec, 4, COUNTS_HEADER[4])?,
            accidentals_measured: accidentals,
            dark_corrected: false,
        };
        record
            .validate()
            .map_err(|e| input_error(path, line, e.to_string()))?;
        out.push(record);
    }
    if out.is_empty() {
        return Err(input_error(path, 2, "no data rows"));
    }
    Ok(out)
}

pub fn read_scan(path: &Path) -> Result<Vec<ScanRecord>> {
    let mut out = Vec::new();
    for (line, rec) in rows(path, &SCAN_HEADER)? {
        let record = ScanRecord {
            lambda_s0_prime_nm: field(path, line, &rec, 0, SCAN_HEADER[0])?,
            true_coincidence_normalized: field(path, line, &rec, 1, SCAN_HEADER[1])?,
            eta_ts_at_point: field(path, line, &rec, 2, SCAN_HEADER[2])?,
        };
        if !(record.eta_ts_at_point > 0.0 && record.eta_ts_at_point <= 1.0) {
            return Err(input_error(path, line, "eta_ts must lie in (0, 1]"));
        }
        out.push(record);
    }
    if out.is_empty() {
        return Err(input_error(path, 2, "no data rows"));
    }
    Ok(out)
}

pub fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    rows(path, &CURVE_HEADER)?
        .into_iter()
        .map(|(line, rec)| Ok((field(path, line, &rec, 0, "x")?, field(path, line, &rec, 1, "value")?)))
        .collect()
}

fn render<R, F>(header: &[&str], rows: R, mut row: F) -> Result<Vec<u8>>
where
    R: IntoIterator,
    F: FnMut(R::Item) -> Vec<String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Io(e.into()))?;
    for r in rows {
        w.write_record(row(r)).map_err(|e| Error::Io(e.into()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn counts_csv(records: &[CountRecord]) -> Result<Vec<u8>> {
    render(&COUNTS_HEADER, records, |r| {
        vec![
            r.p_ave_mw.to_string(),
            r.gates.to_string(),
            r.singles_signal.to_string(),
            r.singles_idler.to_string(),
            r.coincidences_raw.to_string(),
            r.accidentals_measured.map(|a| a.to_string()).unwrap_or_default(),
        ]
    })
}

pub fn write_counts(path: &Path, records: &[CountRecord]) -> Result<()> {
    atomic_write(path, &counts_csv(records)?)
}

pub fn write_scan(path: &Path, records: &[ScanRecord]) -> Result<()> {
    let bytes = render(&SCAN_HEADER, records, |r| {
        vec![
            r.lambda_s0_prime_nm.to_string(),
            r.true_coincidence_normalized.to_string(),
            r.eta_ts_at_point.to_string(),
        ]
    })?;
    atomic_write(path, &bytes)
}

pub fn curve_csv(points: &[(f64, f64)]) -> Result<Vec<u8>> {
    render(&CURVE_HEADER, points, |(x, v)| vec![x.to_string(), v.to_string()])
}

pub fn write_curve(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    atomic_write(path, &curve_csv(points)?)
}

pub fn budget_csv(report: &BudgetReport) -> Result<Vec<u8>> {
    let mut rows: Vec<(String, String, f64)> = Vec::new();
    for row in &report.rows {
        for (term, v) in &row.terms {
            rows.push((row.label.clone(), term.to_string(), *v));
        }
        rows.push((row.label.clone(), "eta_ut".into(), row.rel_eta));
    }
    if report.rows.len() > 1 {
        rows.push(("mean".into(), "eta_ut".into(), report.mean_combined));
    }
    for (name, bound) in &report.systematic_bounds {
        rows.push(("systematic_bound".into(), name.to_string(), *bound));
    }
    render(&BUDGET_HEADER, rows, |(c, t, v)| vec![c, t, v.to_string()])
}

pub fn write_budget(path: &Path, report: &BudgetReport) -> Result<()> {
    atomic_write(path, &budget_csv(report)?)
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Self { entries }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.render().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<CountRecord> {
        vec![
            CountRecord {
                p_ave_mw: 0.1,
                gates: 1_000_000,
                singles_signal: 300,
                singles_idler: 700,
                coincidences_raw: 12,
                accidentals_measured: Some(1),
                dark_corrected: false,
            },
            CountRecord {
                p_ave_mw: 0.2,
                gates: 1_000_000,
                singles_signal: 600,
                singles_idler: 1500,
                coincidences_raw: 40,
                accidentals_measured: None,
                dark_corrected: false,
            },
        ]
    }

    #[test]
    fn counts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("counts.csv");
        write_counts(&path, &sample()).unwrap();
        assert_eq!(read_counts(&path).unwrap(), sample());
    }

    #[test]
    fn wrong_header_reports_line_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "power,gates\n0.1,10\n").unwrap();
        match read_counts(&path) {
            Err(Error::Input { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_value_reports_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let text = format!("{}\n0.1,1000,1,1,0,\n0.2,1000,x,1,0,\n", COUNTS_HEADER.join(","));
        std::fs::write(&path, text).unwrap();
        match read_counts(&path) {
            Err(Error::Input { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("singles_signal"));
            }
            other => panic!("{other:?}"),
        }
        let bound = format!("{}\n0.1,1000,1,1,5,\n", COUNTS_HEADER.join(","));
        std::fs::write(&path, bound).unwrap();
        assert!(matches!(read_counts(&path), Err(Error::Input { line: 2, .. })));
    }

    #[test]
    fn report_round_trip() {
        let mut r = Report::new();
        r.push("eta_ut", 0.117).push("flag", true);
        let back = Report::parse(&r.render());
        assert_eq!(back, r);
        assert_eq!(back.get("eta_ut"), Some("0.117"));
    }
}
