//! CSV ingestion and export.
//!
//! Flight logs: header row with `t`, motor columns `m1..mN` and optionally the
//! four attitude columns `roll_des,roll,pitch_des,pitch` (degrees). Datasets:
//! `margin_mean,margin_std,risk`. Risk records:
//! `t,margin_mean,margin_std,risk_inst,p_high,p_low,risk_acc`.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::margin::{Attitude, MotorFrame};
use crate::pipeline::RiskRecord;
use crate::rules::DataPair;

const ATTITUDE_COLUMNS: [&str; 4] = ["roll_des", "roll", "pitch_des", "pitch"];

pub const DATASET_HEADER: [&str; 3] = ["margin_mean", "margin_std", "risk"];

pub const RECORD_HEADER: [&str; 7] = [
    "t",
    "margin_mean",
    "margin_std",
    "risk_inst",
    "p_high",
    "p_low",
    "risk_acc",
];

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn motor_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('m')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

#[derive(Debug, Clone)]
struct LogLayout {
    t: usize,
    motors: Vec<usize>,
    attitude: Option<[usize; 4]>,
}

impl LogLayout {
    fn from_header(header: &csv::StringRecord, path: &Path) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let t = find("t").ok_or_else(|| parse_err(path, 1, "missing column `t`"))?;

        let count = header
            .iter()
            .filter_map(|h| motor_index(h.trim()))
            .max()
            .unwrap_or(0);
        let motors = (1..=count.max(1))
            .map(|i| {
                let name = format!("m{i}");
                find(&name).ok_or_else(|| parse_err(path, 1, format!("missing column `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?;

        let att: Vec<Option<usize>> = ATTITUDE_COLUMNS.iter().map(|c| find(c)).collect();
        let attitude = match att.iter().filter(|c| c.is_some()).count() {
            0 => None,
            4 => Some([
                att[0].unwrap(),
                att[1].unwrap(),
                att[2].unwrap(),
                att[3].unwrap(),
            ]),
            _ => {
                let missing: Vec<&str> = ATTITUDE_COLUMNS
                    .iter()
                    .zip(&att)
                    .filter(|(_, c)| c.is_none())
                    .map(|(n, _)| *n)
                    .collect();
                return Err(parse_err(
                    path,
                    1,
                    format!(
                        "incomplete attitude columns, missing {}",
                        missing.join(", ")
                    ),
                ));
            }
        };
        Ok(Self {
            t,
            motors,
            attitude,
        })
    }
}

/// Streaming reader over a flight-log CSV. Yields frames in file order and
/// fails on the first malformed or time-reversed row.
pub struct LogReader<R: Read> {
    rows: csv::StringRecordsIntoIter<R>,
    layout: LogLayout,
    path: PathBuf,
    last_t: Option<f64>,
}

impl LogReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        Self::new(BufReader::new(file), path)
    }
}

impl<R: Read> LogReader<R> {
    /// `name` is only used in error messages.
    pub fn new(reader: R, name: impl AsRef<Path>) -> Result<Self> {
        let path = name.as_ref().to_path_buf();
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = csv.headers()?.clone();
        let layout = LogLayout::from_header(&header, &path)?;
        Ok(Self {
            rows: csv.into_records(),
            layout,
            path,
            last_t: None,
        })
    }

    pub fn motor_count(&self) -> usize {
        self.layout.motors.len()
    }

    pub fn has_attitude(&self) -> bool {
        self.layout.attitude.is_some()
    }

    fn parse_row(&mut self, row: csv::StringRecord) -> Result<MotorFrame> {
        let line = row.position().map_or(0, |p| p.line());
        let path = &self.path;
        let field = |idx: usize| -> Result<f64> {
            let raw = row
                .get(idx)
                .ok_or_else(|| parse_err(path, line, format!("row has no column {}", idx + 1)))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(path, line, format!("`{raw}` is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(path, line, format!("non-finite value `{raw}`")))
            }
        };
        let t = field(self.layout.t)?;
        if let Some(prev) = self.last_t {
            if t < prev {
                return Err(parse_err(
                    path,
                    line,
                    format!("time goes backwards ({t} after {prev})"),
                ));
            }
        }
        let commands = self
            .layout
            .motors
            .iter()
            .map(|&i| field(i))
            .collect::<Result<Vec<_>>>()?;
        let attitude = match self.layout.attitude {
            Some([rd, r, pd, p]) => Some(Attitude {
                roll_des: field(rd)?,
                roll: field(r)?,
                pitch_des: field(pd)?,
                pitch: field(p)?,
            }),
            None => None,
        };
        self.last_t = Some(t);
        Ok(MotorFrame {
            t,
            commands,
            attitude,
        })
    }
}

impl<R: Read> Iterator for LogReader<R> {
    type Item = Result<MotorFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = match self.rows.next()? {
            Ok(row) => row,
            Err(e) => return Some(Err(e.into())),
        };
        Some(self.parse_row(row))
    }
}

/// Read a whole flight log from a reader.
pub fn read_log<R: Read>(reader: R, name: impl AsRef<Path>) -> Result<Vec<MotorFrame>> {
    LogReader::new(reader, name)?.collect()
}

/// Read a whole flight log from disk.
pub fn parse_log(path: impl AsRef<Path>) -> Result<Vec<MotorFrame>> {
    LogReader::open(path)?.collect()
}

/// Write frames in the flight-log schema. Attitude columns are written when
/// every frame carries attitude.
pub fn write_log<W: Write>(out: W, frames: &[MotorFrame]) -> Result<()> {
    let n = frames.first().map_or(0, MotorFrame::motor_count);
    if n == 0 {
        return Err(Error::Input("cannot write an empty flight log".into()));
    }
    if frames.iter().any(|f| f.motor_count() != n) {
        return Err(Error::Input("motor count changes within the log".into()));
    }
    let with_att = frames.iter().all(|f| f.attitude.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("m{i}")));
    if with_att {
        header.extend(ATTITUDE_COLUMNS.iter().map(|s| s.to_string()));
    }
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for f in frames {
        row.clear();
        row.push(f.t.to_string());
        row.extend(f.commands.iter().map(f64::to_string));
        if let (true, Some(a)) = (with_att, f.attitude) {
            row.extend([a.roll_des, a.roll, a.pitch_des, a.pitch].map(|v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read `margin_mean,margin_std,risk` pairs.
pub fn read_dataset<R: Read>(reader: R, name: impl AsRef<Path>) -> Result<Vec<DataPair>> {
    let path = name.as_ref();
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv.headers()?.clone();
    let cols = DATASET_HEADER
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| parse_err(path, 1, format!("missing column `{c}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let mut vals = [0.0; 3];
        for (v, &c) in vals.iter_mut().zip(&cols) {
            let raw = row.get(c).unwrap_or("");
            *v = raw
                .parse()
                .map_err(|_| parse_err(path, line, format!("`{raw}` is not a number")))?;
        }
        let pair = DataPair::new(vals[0], vals[1], vals[2])
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Vec<DataPair>> {
    let path = path.as_ref();
    read_dataset(BufReader::new(File::open(path)?), path)
}

pub fn write_dataset<W: Write>(out: W, pairs: &[DataPair]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_HEADER)?;
    for p in pairs {
        w.write_record([p.margin_mean, p.margin_std, p.risk].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Incremental writer for risk records.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
    with_source: bool,
}

impl<W: Write> RecordWriter<W> {
    /// With `with_source`, an eighth `source` column says how `risk_inst` was obtained.
    pub fn new(out: W, with_source: bool) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = RECORD_HEADER.to_vec();
        if with_source {
            header.push("source");
        }
        inner.write_record(&header)?;
        Ok(Self { inner, with_source })
    }

    pub fn write(&mut self, r: &RiskRecord) -> Result<()> {
        let mut row: Vec<String> = [
            r.t,
            r.margin_mean,
            r.margin_std,
            r.risk_inst,
            r.p_high,
            r.p_low,
            r.risk_acc,
        ]
        .iter()
        .map(f64::to_string)
        .collect();
        if self.with_source {
            row.push(r.source.as_str().to_string());
        }
        self.inner.write_record(&row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_records<W: Write>(out: W, records: &[RiskRecord], with_source: bool) -> Result<()> {
    let mut w = RecordWriter::new(out, with_source)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(text: &str) -> Result<Vec<MotorFrame>> {
        read_log(text.as_bytes(), "test.csv")
    }

    #[test]
    fn four_motor_log() {
        let frames =
            log("t,m1,m2,m3,m4\n0.0,1500,1500,1500,1500\n0.1,1600,1400,1600,1400\n").unwrap();
        assert_eq!(frames.len(), 2);
        assert!(frames
            .iter()
            .all(|f| f.motor_count() == 4 && f.attitude.is_none()));
        assert_eq!(frames[1].commands, vec![1600.0, 1400.0, 1600.0, 1400.0]);
    }

    #[test]
    fn columns_in_any_order() {
        let frames = log("m2,pitch,t,roll,m1,roll_des,pitch_des\n1400,1,0.5,2,1600,3,4\n").unwrap();
        let f = &frames[0];
        assert_eq!((f.t, f.commands.clone()), (0.5, vec![1600.0, 1400.0]));
        let a = f.attitude.unwrap();
        assert_eq!((a.roll_error(), a.pitch_error()), (1.0, 3.0));
    }

    #[test]
    fn eight_motor_log() {
        let mut text = String::from("t,m1,m2,m3,m4,m5,m6,m7,m8\n");
        for i in 0..5 {
            text.push_str(&format!(
                "{},1500,1510,1520,1530,1540,1550,1560,1570\n",
                i as f64 * 0.1
            ));
        }
        let frames = log(&text).unwrap();
        assert_eq!(frames.len(), 5);
        assert!(frames.iter().all(|f| f.motor_count() == 8));
    }

    #[test]
    fn missing_columns_are_named() {
        let err = log("t,m2,m3\n0,1500,1500\n").unwrap_err().to_string();
        assert!(err.contains("`m1`"), "{err}");
        let err = log("time,m1\n0,1500\n").unwrap_err().to_string();
        assert!(err.contains("`t`"), "{err}");
        let err = log("t\n0\n").unwrap_err().to_string();
        assert!(err.contains("`m1`"), "{err}");
        let err = log("t,m1,roll,roll_des\n0,1500,1,1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("pitch_des"), "{err}");
    }

    #[test]
    fn bad_rows_report_line() {
        let err = log("t,m1\n0,1500\n0.2,1500\n0.1,1500\n").unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 4);
                assert!(msg.contains("backwards"));
            }
            e => panic!("unexpected {e}"),
        }
        let err = log("t,m1\n0,abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(log("t,m1\n0,NaN\n").is_err());
    }

    #[test]
    fn equal_timestamps_allowed() {
        assert_eq!(log("t,m1\n0,1500\n0,1500\n").unwrap().len(), 2);
    }

    #[test]
    fn log_roundtrip() {
        let frames = vec![
            MotorFrame::new(0.0, vec![1500.25, 1499.0])
                .with_attitude(Attitude::from_errors(0.1, -0.2)),
            MotorFrame::new(0.1, vec![1712.5, 1288.125])
                .with_attitude(Attitude::from_errors(1.0 / 3.0, 2.0)),
        ];
        let mut buf = Vec::new();
        write_log(&mut buf, &frames).unwrap();
        assert_eq!(read_log(buf.as_slice(), "mem").unwrap(), frames);
    }

    #[test]
    fn dataset_roundtrip_and_validation() {
        let pairs = vec![
            DataPair::new(0.007969, 0.226310, 65.679063).unwrap(),
            DataPair::new(0.1 / 3.0, 0.0, 100.0).unwrap(),
        ];
        let mut buf = Vec::new();
        write_dataset(&mut buf, &pairs).unwrap();
        assert!(buf.starts_with(b"margin_mean,margin_std,risk\n"));
        assert_eq!(read_dataset(buf.as_slice(), "mem").unwrap(), pairs);
        assert!(read_dataset("margin_mean,risk\n0.1,3\n".as_bytes(), "mem").is_err());
        let err =
            read_dataset("margin_mean,margin_std,risk\n0.7,0.1,3\n".as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
