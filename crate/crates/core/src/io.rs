//! On-disk formats.
//!
//! Corpora, annotations and datasets are line-delimited JSON (one record per
//! line); fold maps, SOP tables and replay results are CSV. Every writer goes
//! through [`write_atomically`] so a failed command never leaves a partial file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::baselines::{SopConfig, SopEntry};
use crate::data::{
    BenchmarkId, BenchmarkKey, Label, LabeledSegment, MeasurementSeries, Segment,
    SteadyStateAnnotation, DEFAULT_ITERATION_DURATION_S,
};
use crate::error::{Error, Result};
use crate::stopper::{HaltReason, StopResult};

/// Writes through a temporary file in the target directory, renaming on success.
pub fn write_atomically<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        write(&mut out)?;
        out.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            location: format!("{}:{}", path.display(), lineno + 1),
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(out: &mut dyn Write, records: impl IntoIterator<Item = T>) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut *out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRecord {
    project: String,
    benchmark: String,
    fork: u32,
    #[serde(default = "default_duration")]
    iteration_duration_s: f64,
    values: Vec<f64>,
}

fn default_duration() -> f64 {
    DEFAULT_ITERATION_DURATION_S
}

pub fn read_corpus(path: &Path) -> Result<Vec<MeasurementSeries>> {
    let records: Vec<SeriesRecord> = read_jsonl(path)?;
    Ok(records
        .into_iter()
        .map(|r| MeasurementSeries {
            id: BenchmarkId::new(r.project, r.benchmark, r.fork),
            values: r.values,
            iteration_duration: r.iteration_duration_s,
        })
        .collect())
}

pub fn write_corpus(out: &mut dyn Write, corpus: &[MeasurementSeries]) -> Result<()> {
    write_jsonl(
        out,
        corpus.iter().map(|s| SeriesRecord {
            project: s.id.project.clone(),
            benchmark: s.id.benchmark.clone(),
            fork: s.id.fork,
            iteration_duration_s: s.iteration_duration,
            values: s.values.clone(),
        }),
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationRecord {
    project: String,
    benchmark: String,
    fork: u32,
    st: Option<usize>,
}

pub type Annotations = BTreeMap<BenchmarkId, SteadyStateAnnotation>;

pub fn read_annotations(path: &Path) -> Result<Annotations> {
    let records: Vec<AnnotationRecord> = read_jsonl(path)?;
    let mut out = BTreeMap::new();
    for r in records {
        let annotation = match r.st {
            Some(0) => {
                return Err(Error::InvalidInput(format!(
                    "{}/{}#{}: st is 1-based",
                    r.project, r.benchmark, r.fork
                )))
            }
            Some(st) => SteadyStateAnnotation::reached_at(st),
            None => SteadyStateAnnotation::not_reached(),
        };
        let id = BenchmarkId::new(r.project, r.benchmark, r.fork);
        if out.insert(id.clone(), annotation).is_some() {
            return Err(Error::InvalidInput(format!("duplicate annotation for {id}")));
        }
    }
    Ok(out)
}

pub fn write_annotations(out: &mut dyn Write, annotations: &Annotations) -> Result<()> {
    write_jsonl(
        out,
        annotations.iter().map(|(id, a)| AnnotationRecord {
            project: id.project.clone(),
            benchmark: id.benchmark.clone(),
            fork: id.fork,
            st: a.st(),
        }),
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentRecord {
    project: String,
    benchmark: String,
    fork: u32,
    start: usize,
    label: Label,
    values: Vec<f64>,
}

pub fn read_segments(path: &Path) -> Result<Vec<LabeledSegment>> {
    let records: Vec<SegmentRecord> = read_jsonl(path)?;
    let window = records.first().map(|r| r.values.len());
    records
        .into_iter()
        .map(|r| {
            if Some(r.values.len()) != window {
                return Err(Error::InvalidInput(format!(
                    "segment {}/{}#{}@{} has length {}, expected {}",
                    r.project,
                    r.benchmark,
                    r.fork,
                    r.start,
                    r.values.len(),
                    window.unwrap_or(0)
                )));
            }
            Ok(LabeledSegment {
                segment: Segment {
                    source: BenchmarkId::new(r.project, r.benchmark, r.fork),
                    start: r.start,
                    values: r.values,
                },
                label: r.label,
            })
        })
        .collect()
}

pub fn write_segments(out: &mut dyn Write, items: &[LabeledSegment]) -> Result<()> {
    write_jsonl(
        out,
        items.iter().map(|item| SegmentRecord {
            project: item.segment.source.project.clone(),
            benchmark: item.segment.source.benchmark.clone(),
            fork: item.segment.source.fork,
            start: item.segment.start,
            label: item.label,
            values: item.segment.values.clone(),
        }),
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct FoldRecord {
    project: String,
    benchmark: String,
    fold: usize,
}

pub type FoldMap = BTreeMap<BenchmarkKey, usize>;

pub fn read_fold_map(path: &Path) -> Result<FoldMap> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize() {
        let r: FoldRecord = row?;
        out.insert(
            BenchmarkKey {
                project: r.project,
                benchmark: r.benchmark,
            },
            r.fold,
        );
    }
    Ok(out)
}

pub fn write_fold_map(out: &mut dyn Write, folds: &FoldMap) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for (key, &fold) in folds {
        writer.serialize(FoldRecord {
            project: key.project.clone(),
            benchmark: key.benchmark.clone(),
            fold,
        })?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SopRecord {
    project: String,
    benchmark: String,
    warmup: usize,
    measurement: usize,
    forks: usize,
}

pub fn read_sop_config(path: &Path) -> Result<SopConfig> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut config = SopConfig::default();
    for row in reader.deserialize() {
        let r: SopRecord = row?;
        config.entries.insert(
            BenchmarkKey {
                project: r.project,
                benchmark: r.benchmark,
            },
            SopEntry {
                warmup_iterations: r.warmup,
                measurement_iterations: r.measurement,
                forks: r.forks,
            },
        );
    }
    Ok(config)
}

pub fn write_sop_config(out: &mut dyn Write, config: &SopConfig) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for (key, entry) in &config.entries {
        writer.serialize(SopRecord {
            project: key.project.clone(),
            benchmark: key.benchmark.clone(),
            warmup: entry.warmup_iterations,
            measurement: entry.measurement_iterations,
            forks: entry.forks,
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// One row of a replay results file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRecord {
    pub project: String,
    pub benchmark: String,
    pub fork: u32,
    pub warmup_iterations: usize,
    pub halt_reason: HaltReason,
    pub queries: usize,
}

impl StopRecord {
    pub fn new(id: &BenchmarkId, result: &StopResult) -> Self {
        Self {
            project: id.project.clone(),
            benchmark: id.benchmark.clone(),
            fork: id.fork,
            warmup_iterations: result.warmup_iterations,
            halt_reason: result.halt_reason,
            queries: result.queries,
        }
    }

    pub fn id(&self) -> BenchmarkId {
        BenchmarkId::new(self.project.clone(), self.benchmark.clone(), self.fork)
    }
}

pub fn read_stop_records(path: &Path) -> Result<Vec<StopRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_stop_records(out: &mut dyn Write, records: &[StopRecord]) -> Result<()> {
    write_csv(out, records)
}

pub fn write_csv<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
