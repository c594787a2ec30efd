//! CSV ingestion and export.
//!
//! | file               | columns                                            |
//! |--------------------|----------------------------------------------------|
//! | `resistance.csv`   | `participant_id,shape,timestamp_ms,resistance_ohm` |
//! | `hits.csv`         | `participant_id,shape,hit_index,timestamp_ms`      |
//! | `gaze.csv`         | `participant_id,shape,hit_index,g1..gG`            |
//! | `participants.csv` | `participant_id,direction` (`cw` / `ccw`)          |
//!
//! Row numbers in errors count data rows from 1, excluding the header.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, Writer};

use super::{
    DatasetError, Direction, GazeRow, HitEvent, Recording, ResistanceTrace, Result, Sample,
    TaskShape,
};

pub const RESISTANCE_FILE: &str = "resistance.csv";
pub const HITS_FILE: &str = "hits.csv";
pub const GAZE_FILE: &str = "gaze.csv";
pub const PARTICIPANTS_FILE: &str = "participants.csv";

type TaskKey = (String, TaskShape);

struct Table {
    path: String,
    headers: StringRecord,
    rows: Vec<StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let p = path.display().to_string();
        let file = File::open(path).map_err(|source| DatasetError::Io {
            path: p.clone(),
            source,
        })?;
        let mut reader = ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file);
        let csv_err = |source| DatasetError::Csv {
            path: p.clone(),
            source,
        };
        let headers = reader.headers().map_err(csv_err)?.clone();
        let rows = reader
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(csv_err)?;
        Ok(Self {
            path: p,
            headers,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn {
                file: self.path.clone(),
                column: name.to_string(),
            })
    }
}

fn field<'a>(rec: &'a StringRecord, idx: usize, row: usize, column: &str) -> Result<&'a str> {
    rec.get(idx).ok_or_else(|| DatasetError::NonNumericValue {
        row,
        column: column.to_string(),
    })
}

fn number(rec: &StringRecord, idx: usize, row: usize, column: &str) -> Result<f64> {
    field(rec, idx, row, column)?
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| DatasetError::NonNumericValue {
            row,
            column: column.to_string(),
        })
}

fn parsed<T: FromStr>(rec: &StringRecord, idx: usize, row: usize, column: &str) -> Result<T> {
    let raw = field(rec, idx, row, column)?;
    raw.parse::<T>().map_err(|_| DatasetError::UnknownValue {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

fn index(rec: &StringRecord, idx: usize, row: usize, column: &str) -> Result<usize> {
    field(rec, idx, row, column)?
        .parse::<usize>()
        .map_err(|_| DatasetError::NonNumericValue {
            row,
            column: column.to_string(),
        })
}

/// One trace per `(participant, shape)` in order of first appearance.
/// Within a trace, timestamps must be non-decreasing in file order.
pub fn load_resistance_csv(path: &Path) -> Result<Vec<ResistanceTrace>> {
    let t = Table::read(path)?;
    let (pid, shape, ts, res) = (
        t.column("participant_id")?,
        t.column("shape")?,
        t.column("timestamp_ms")?,
        t.column("resistance_ohm")?,
    );
    let mut order: Vec<TaskKey> = Vec::new();
    let mut traces: BTreeMap<TaskKey, ResistanceTrace> = BTreeMap::new();
    for (i, rec) in t.rows.iter().enumerate() {
        let row = i + 1;
        let id = field(rec, pid, row, "participant_id")?.to_string();
        let sh: TaskShape = parsed(rec, shape, row, "shape")?;
        let timestamp_ms = number(rec, ts, row, "timestamp_ms")?;
        let resistance_ohm = number(rec, res, row, "resistance_ohm")?;
        let key = (id.clone(), sh);
        let trace = traces.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            ResistanceTrace {
                participant_id: id,
                shape: sh,
                samples: Vec::new(),
            }
        });
        if trace.samples.last().is_some_and(|s| s.timestamp_ms > timestamp_ms) {
            return Err(DatasetError::NonMonotonicTimestamp { row });
        }
        trace.samples.push(Sample {
            timestamp_ms,
            resistance_ohm,
        });
    }
    Ok(order
        .into_iter()
        .map(|k| traces.remove(&k).expect("every key was inserted"))
        .collect())
}

/// Hit events grouped per task and sorted by hit index.
pub fn load_hits_csv(path: &Path) -> Result<BTreeMap<(String, TaskShape), Vec<HitEvent>>> {
    let t = Table::read(path)?;
    let (pid, shape, hit, ts) = (
        t.column("participant_id")?,
        t.column("shape")?,
        t.column("hit_index")?,
        t.column("timestamp_ms")?,
    );
    let mut out: BTreeMap<TaskKey, Vec<HitEvent>> = BTreeMap::new();
    for (i, rec) in t.rows.iter().enumerate() {
        let row = i + 1;
        let key = (
            field(rec, pid, row, "participant_id")?.to_string(),
            parsed(rec, shape, row, "shape")?,
        );
        out.entry(key).or_default().push(HitEvent {
            hit_index: index(rec, hit, row, "hit_index")?,
            timestamp_ms: number(rec, ts, row, "timestamp_ms")?,
        });
    }
    for events in out.values_mut() {
        events.sort_by_key(|e| e.hit_index);
    }
    Ok(out)
}

/// Gaze rows grouped per task and sorted by hit index. The width `G` is the
/// number of consecutive `g1..gG` header columns; every row must match it,
/// and so must `expected_width` when given.
pub fn load_gaze_csv(
    path: &Path,
    expected_width: Option<usize>,
) -> Result<BTreeMap<(String, TaskShape), Vec<GazeRow>>> {
    let t = Table::read(path)?;
    let (pid, shape, hit) = (
        t.column("participant_id")?,
        t.column("shape")?,
        t.column("hit_index")?,
    );
    let mut cols = Vec::new();
    while let Ok(c) = t.column(&format!("g{}", cols.len() + 1)) {
        cols.push(c);
    }
    if cols.is_empty() {
        return Err(DatasetError::MissingColumn {
            file: t.path.clone(),
            column: "g1".into(),
        });
    }
    let width = cols.len();
    if let Some(expected) = expected_width.filter(|&e| e != width) {
        return Err(DatasetError::GazeWidthMismatch {
            row: 0,
            expected,
            found: width,
        });
    }
    let mut out: BTreeMap<TaskKey, Vec<GazeRow>> = BTreeMap::new();
    for (i, rec) in t.rows.iter().enumerate() {
        let row = i + 1;
        if rec.len() != t.headers.len() {
            return Err(DatasetError::GazeWidthMismatch {
                row,
                expected: width,
                found: rec.len().saturating_sub(t.headers.len() - width),
            });
        }
        let key = (
            field(rec, pid, row, "participant_id")?.to_string(),
            parsed(rec, shape, row, "shape")?,
        );
        let features = cols
            .iter()
            .enumerate()
            .map(|(d, &c)| number(rec, c, row, &format!("g{}", d + 1)))
            .collect::<Result<Vec<_>>>()?;
        out.entry(key).or_default().push(GazeRow {
            hit_index: index(rec, hit, row, "hit_index")?,
            features,
        });
    }
    for rows in out.values_mut() {
        rows.sort_by_key(|g| g.hit_index);
    }
    Ok(out)
}

pub fn load_participants_csv(path: &Path) -> Result<BTreeMap<String, Direction>> {
    let t = Table::read(path)?;
    let (pid, dir) = (t.column("participant_id")?, t.column("direction")?);
    let mut out = BTreeMap::new();
    for (i, rec) in t.rows.iter().enumerate() {
        let row = i + 1;
        out.insert(
            field(rec, pid, row, "participant_id")?.to_string(),
            parsed(rec, dir, row, "direction")?,
        );
    }
    Ok(out)
}

/// Loads and joins the four dataset files in `dir`.
pub fn load_dataset(dir: &Path, expected_gaze_width: Option<usize>) -> Result<Vec<Recording>> {
    let traces = load_resistance_csv(&dir.join(RESISTANCE_FILE))?;
    let mut hits = load_hits_csv(&dir.join(HITS_FILE))?;
    let mut gaze = load_gaze_csv(&dir.join(GAZE_FILE), expected_gaze_width)?;
    let directions = load_participants_csv(&dir.join(PARTICIPANTS_FILE))?;

    traces
        .into_iter()
        .map(|trace| {
            let key = (trace.participant_id.clone(), trace.shape);
            let missing = |what: &str| {
                DatasetError::Inconsistent(format!("no {what} for {}/{}", key.0, key.1))
            };
            let direction = *directions.get(&key.0).ok_or_else(|| missing("direction"))?;
            Ok(Recording {
                participant_id: key.0.clone(),
                shape: key.1,
                direction,
                hits: hits.remove(&key).ok_or_else(|| missing("hit events"))?,
                gaze: gaze.remove(&key).ok_or_else(|| missing("gaze rows"))?,
                trace,
            })
        })
        .collect()
}

fn writer(path: &Path) -> Result<Writer<File>> {
    let file = File::create(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(Writer::from_writer(file))
}

/// Writes the four dataset files into `dir` (which must exist).
pub fn write_dataset(dir: &Path, recordings: &[Recording]) -> Result<()> {
    let csv_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| DatasetError::Csv { path, source }
    };

    let path = dir.join(RESISTANCE_FILE);
    let mut w = writer(&path)?;
    w.write_record(["participant_id", "shape", "timestamp_ms", "resistance_ohm"])
        .map_err(csv_err(&path))?;
    for r in recordings {
        for s in &r.trace.samples {
            w.write_record([
                r.participant_id.as_str(),
                r.shape.as_str(),
                &s.timestamp_ms.to_string(),
                &s.resistance_ohm.to_string(),
            ])
            .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;

    let path = dir.join(HITS_FILE);
    let mut w = writer(&path)?;
    w.write_record(["participant_id", "shape", "hit_index", "timestamp_ms"])
        .map_err(csv_err(&path))?;
    for r in recordings {
        for h in &r.hits {
            w.write_record([
                r.participant_id.as_str(),
                r.shape.as_str(),
                &h.hit_index.to_string(),
                &h.timestamp_ms.to_string(),
            ])
            .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;

    let path = dir.join(GAZE_FILE);
    let width = recordings
        .first()
        .and_then(|r| r.gaze.first())
        .map_or(0, |g| g.features.len());
    let mut w = writer(&path)?;
    let mut header = vec!["participant_id".to_string(), "shape".into(), "hit_index".into()];
    header.extend((1..=width).map(|d| format!("g{d}")));
    w.write_record(&header).map_err(csv_err(&path))?;
    for r in recordings {
        for g in &r.gaze {
            if g.features.len() != width {
                return Err(DatasetError::GazeWidthMismatch {
                    row: g.hit_index,
                    expected: width,
                    found: g.features.len(),
                });
            }
            let mut rec = vec![
                r.participant_id.clone(),
                r.shape.as_str().to_string(),
                g.hit_index.to_string(),
            ];
            rec.extend(g.features.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;

    let path = dir.join(PARTICIPANTS_FILE);
    let mut w = writer(&path)?;
    w.write_record(["participant_id", "direction"]).map_err(csv_err(&path))?;
    let mut seen = std::collections::BTreeSet::new();
    for r in recordings {
        if seen.insert(r.participant_id.clone()) {
            w.write_record([r.participant_id.as_str(), r.direction.as_str()])
                .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::fs;

    use super::*;
    use crate::dataset::{synth_cohort, ParticipantRecord, SynthConfig};

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn two_participants_give_two_traces() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "r.csv",
            "participant_id,shape,timestamp_ms,resistance_ohm\n\
             A,circle,0,10\nA,circle,5,11\nB,circle,0,9\nB,circle,5,8.5\n",
        );
        let traces = load_resistance_csv(&p).unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[1].participant_id, "B");
        assert_eq!(traces[1].samples[1].resistance_ohm, 8.5);
    }

    #[test]
    fn shuffled_timestamps_are_rejected_with_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "r.csv",
            "participant_id,shape,timestamp_ms,resistance_ohm\n\
             A,circle,0,10\nA,circle,9,11\nA,circle,4,12\n",
        );
        assert!(matches!(
            load_resistance_csv(&p),
            Err(DatasetError::NonMonotonicTimestamp { row: 3 })
        ));
    }

    #[test]
    fn nan_resistance_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("participant_id,shape,timestamp_ms,resistance_ohm\n");
        for i in 1..=20 {
            let v = if i == 17 { "NaN".to_string() } else { "100".to_string() };
            body.push_str(&format!("A,diamond,{i},{v}\n"));
        }
        let p = write(dir.path(), "r.csv", &body);
        match load_resistance_csv(&p) {
            Err(DatasetError::NonNumericValue { row: 17, column }) => assert_eq!(column, "resistance_ohm"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "r.csv", "participant_id,shape,timestamp_ms\nA,circle,0\n");
        match load_resistance_csv(&p) {
            Err(DatasetError::MissingColumn { column, .. }) => assert_eq!(column, "resistance_ohm"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixed_gaze_widths_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "g.csv",
            "participant_id,shape,hit_index,g1,g2\nA,circle,1,0.1,0.2\nA,circle,2,0.3\n",
        );
        assert!(matches!(
            load_gaze_csv(&p, None),
            Err(DatasetError::GazeWidthMismatch { row: 2, expected: 2, found: 1 })
        ));
        let p = write(dir.path(), "g2.csv", "participant_id,shape,hit_index,g1,g2\nA,circle,1,0.1,0.2\n");
        assert!(matches!(
            load_gaze_csv(&p, Some(24)),
            Err(DatasetError::GazeWidthMismatch { expected: 24, found: 2, .. })
        ));
    }

    #[test]
    fn synthetic_dataset_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig::default();
        let recs = synth_cohort(5, 2, &TaskShape::ALL, &cfg).unwrap();
        write_dataset(dir.path(), &recs).unwrap();
        let back = load_dataset(dir.path(), Some(24)).unwrap();
        assert_eq!(back, recs);
        for r in &back {
            ParticipantRecord::from_recording(r).unwrap();
        }
        let hits = fs::read_to_string(dir.path().join(HITS_FILE)).unwrap();
        assert_eq!(hits.lines().count() - 1, 2 * 2 * 40);
    }

    #[test]
    fn missing_file_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let recs = synth_cohort(5, 2, &[TaskShape::Circle], &SynthConfig::default()).unwrap();
        write_dataset(dir.path(), &recs).unwrap();
        fs::remove_file(dir.path().join(GAZE_FILE)).unwrap();
        let err = load_dataset(dir.path(), None).unwrap_err();
        assert!(err.to_string().contains(GAZE_FILE), "{err}");
    }
}
