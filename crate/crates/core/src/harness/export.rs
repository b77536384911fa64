//! Metrics export. Every metric family is a table with one row per window
//! and a fixed column order. CSV writes one file per family; JSON lines
//! writes a single file whose records carry a `family` field. A leading
//! `report` table records the window size so an import restores the report
//! exactly.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::log::csv_error;
use super::{io_error, HarnessError, MetricsReport, Tally, WindowExploration, WindowMetrics};
use crate::domain::{EngagementLevel, MAX_EXHIBITS};
use crate::harness::DeltaCounts;
use crate::visitor::STOP_SLOTS;

pub const FAMILIES: [&str; 5] = ["summary", "deltas", "exploration", "continuation", "describe_more"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    JsonLines,
}

impl FromStr for ExportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" | "json-lines" => Ok(ExportFormat::JsonLines),
            _ => Err(HarnessError::Config(format!("unknown export format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    Int(u64),
    Float(f64),
    Missing,
}

impl Cell {
    fn text(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn json(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => serde_json::to_string(&v).expect("finite metrics"),
            Cell::Missing => "null".into(),
        }
    }
}

fn opt(v: Option<f64>) -> Cell {
    v.map_or(Cell::Missing, Cell::Float)
}

fn level_tag(level: EngagementLevel) -> &'static str {
    match level {
        EngagementLevel::Low => "low",
        EngagementLevel::Medium => "medium",
        EngagementLevel::High => "high",
    }
}

fn columns(family: &str) -> Vec<String> {
    let mut cols = vec!["window".to_string()];
    let fixed: &[&str] = match family {
        "report" => return vec!["window_size".into(), "windows".into()],
        "summary" => &["tours", "mean_stops", "completion_rate", "mean_engagement"],
        "deltas" => {
            &["increased", "stable", "decreased", "increased_fraction", "stable_fraction", "decreased_fraction"]
        }
        "exploration" => &["new_pairs", "cumulative_pairs"],
        "continuation" => {
            for stop in 0..STOP_SLOTS {
                for level in EngagementLevel::ALL {
                    cols.push(format!("stop{stop}_{}_reached", level_tag(level)));
                    cols.push(format!("stop{stop}_{}_continued", level_tag(level)));
                }
            }
            &[]
        }
        "describe_more" => {
            for stop in 1..=MAX_EXHIBITS {
                for level in EngagementLevel::ALL {
                    cols.push(format!("stop{stop}_{}_offered", level_tag(level)));
                    cols.push(format!("stop{stop}_{}_given", level_tag(level)));
                }
            }
            &[]
        }
        _ => unreachable!("unknown family {family}"),
    };
    cols.extend(fixed.iter().map(|c| c.to_string()));
    cols
}

fn tally_cells(tallies: &[[Tally; 3]]) -> impl Iterator<Item = Cell> + '_ {
    tallies.iter().flatten().flat_map(|t| [Cell::Int(t.trials), Cell::Int(t.hits)])
}

fn rows(report: &MetricsReport, family: &str) -> Vec<Vec<Cell>> {
    if family == "report" {
        return vec![vec![Cell::Int(report.window_size as u64), Cell::Int(report.windows.len() as u64)]];
    }
    report
        .windows
        .iter()
        .map(|w| {
            let mut row = vec![Cell::Int(w.window as u64)];
            match family {
                "summary" => row.extend([
                    Cell::Int(w.tours as u64),
                    Cell::Float(w.mean_stops),
                    Cell::Float(w.completion_rate),
                    opt(w.mean_engagement),
                ]),
                "deltas" => {
                    let f = w.deltas.fractions();
                    row.extend([
                        Cell::Int(w.deltas.increased),
                        Cell::Int(w.deltas.stable),
                        Cell::Int(w.deltas.decreased),
                    ]);
                    row.extend((0..3).map(|i| opt(f.map(|f| f[i]))));
                }
                "exploration" => match w.exploration {
                    Some(e) => row.extend([Cell::Int(e.new_pairs), Cell::Int(e.cumulative_pairs)]),
                    None => row.extend([Cell::Missing, Cell::Missing]),
                },
                "continuation" => row.extend(tally_cells(&w.continuation)),
                "describe_more" => row.extend(tally_cells(&w.describe_more)),
                _ => unreachable!(),
            }
            row
        })
        .collect()
}

fn csv_path(dir: &Path, stem: &str, family: &str) -> PathBuf {
    dir.join(format!("{stem}-{family}.csv"))
}

fn jsonl_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.jsonl"))
}

/// Write `report` under `dir`, returning the files written.
pub fn export(
    report: &MetricsReport,
    format: ExportFormat,
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    let families = std::iter::once("report").chain(FAMILIES);
    match format {
        ExportFormat::Csv => {
            let mut written = Vec::new();
            for family in families {
                let path = csv_path(dir, stem, family);
                let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
                w.write_record(columns(family)).map_err(|e| csv_error(&path, e))?;
                for row in rows(report, family) {
                    w.write_record(row.into_iter().map(Cell::text)).map_err(|e| csv_error(&path, e))?;
                }
                w.flush().map_err(io_error(&path))?;
                written.push(path);
            }
            Ok(written)
        }
        ExportFormat::JsonLines => {
            let path = jsonl_path(dir, stem);
            let file = File::create(&path).map_err(io_error(&path))?;
            let mut out = BufWriter::new(file);
            for family in families {
                let cols = columns(family);
                for row in rows(report, family) {
                    let mut line = format!("{{\"family\":\"{family}\"");
                    for (c, v) in cols.iter().zip(row) {
                        write!(line, ",\"{c}\":{}", v.json()).unwrap();
                    }
                    line.push('}');
                    writeln!(out, "{line}").map_err(io_error(&path))?;
                }
            }
            out.flush().map_err(io_error(&path))?;
            Ok(vec![path])
        }
    }
}

/// One parsed row: source line and cell text by column.
struct RawRow {
    line: usize,
    cells: Vec<Option<String>>,
}

fn read_csv(path: &Path, family: &str) -> Result<Vec<RawRow>, HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    if header != columns(family) {
        return Err(HarnessError::Parse { path: path.to_path_buf(), line: 1, message: "unexpected columns".into() });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cells = record.iter().map(|c| (!c.is_empty()).then(|| c.to_string())).collect();
        out.push(RawRow { line, cells });
    }
    Ok(out)
}

fn read_jsonl(path: &Path) -> Result<Vec<(String, RawRow)>, HarnessError> {
    let file = File::open(path).map_err(io_error(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_error(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| HarnessError::Parse { path: path.to_path_buf(), line: i + 1, message };
        let map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let family = match map.get("family") {
            Some(serde_json::Value::String(f)) if f == "report" || FAMILIES.contains(&f.as_str()) => f.clone(),
            _ => return Err(err("missing or unknown family".into())),
        };
        let cells = columns(&family)
            .iter()
            .map(|c| match map.get(c) {
                Some(serde_json::Value::Number(n)) => Ok(Some(n.to_string())),
                Some(serde_json::Value::Null) => Ok(None),
                _ => Err(err(format!("missing numeric field {c:?}"))),
            })
            .collect::<Result<_, _>>()?;
        out.push((family, RawRow { line: i + 1, cells }));
    }
    Ok(out)
}

struct Cursor<'a> {
    path: &'a Path,
    row: &'a RawRow,
    next: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: String) -> HarnessError {
        HarnessError::Parse { path: self.path.to_path_buf(), line: self.row.line, message }
    }

    fn take(&mut self) -> Result<Option<&'a str>, HarnessError> {
        let row: &'a RawRow = self.row;
        let cell = row.cells.get(self.next).ok_or_else(|| self.err("row is too short".into()))?;
        self.next += 1;
        Ok(cell.as_deref())
    }

    fn opt<T: FromStr>(&mut self) -> Result<Option<T>, HarnessError> {
        match self.take()? {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|_| self.err(format!("bad value {s:?}"))),
        }
    }

    fn req<T: FromStr>(&mut self) -> Result<T, HarnessError> {
        self.opt()?.ok_or_else(|| self.err("missing value".into()))
    }

    fn tallies<const N: usize>(&mut self) -> Result<[[Tally; 3]; N], HarnessError> {
        let mut out = [[Tally::default(); 3]; N];
        for t in out.iter_mut().flatten() {
            *t = Tally { trials: self.req()?, hits: self.req()? };
        }
        Ok(out)
    }
}

fn empty_window(window: usize) -> WindowMetrics {
    WindowMetrics {
        window,
        tours: 0,
        mean_stops: 0.0,
        completion_rate: 0.0,
        mean_engagement: None,
        deltas: DeltaCounts::default(),
        exploration: None,
        continuation: [[Tally::default(); 3]; STOP_SLOTS],
        describe_more: [[Tally::default(); 3]; MAX_EXHIBITS],
    }
}

fn apply(report: &mut MetricsReport, path: &Path, family: &str, row: &RawRow) -> Result<(), HarnessError> {
    let mut c = Cursor { path, row, next: 0 };
    if family == "report" {
        report.window_size = c.req()?;
        let n: usize = c.req()?;
        report.windows = (0..n).map(empty_window).collect();
        return Ok(());
    }
    let index: usize = c.req()?;
    let w = match report.windows.get_mut(index) {
        Some(w) => w,
        None => return Err(c.err(format!("window {index} is not in the report"))),
    };
    match family {
        "summary" => {
            w.tours = c.req()?;
            w.mean_stops = c.req()?;
            w.completion_rate = c.req()?;
            w.mean_engagement = c.opt()?;
        }
        "deltas" => w.deltas = DeltaCounts { increased: c.req()?, stable: c.req()?, decreased: c.req()? },
        "exploration" => {
            let new_pairs: Option<u64> = c.opt()?;
            let cumulative: Option<u64> = c.opt()?;
            w.exploration = match (new_pairs, cumulative) {
                (Some(new_pairs), Some(cumulative_pairs)) => Some(WindowExploration { new_pairs, cumulative_pairs }),
                (None, None) => None,
                _ => return Err(c.err("exploration needs both counts or neither".into())),
            };
        }
        "continuation" => w.continuation = c.tallies()?,
        "describe_more" => w.describe_more = c.tallies()?,
        _ => unreachable!(),
    }
    Ok(())
}

/// Read back a report written by [`export`].
pub fn import(format: ExportFormat, dir: &Path, stem: &str) -> Result<MetricsReport, HarnessError> {
    let mut report = MetricsReport::empty(0);
    match format {
        ExportFormat::Csv => {
            for family in std::iter::once("report").chain(FAMILIES) {
                let path = csv_path(dir, stem, family);
                for row in read_csv(&path, family)? {
                    apply(&mut report, &path, family, &row)?;
                }
            }
        }
        ExportFormat::JsonLines => {
            let path = jsonl_path(dir, stem);
            for (family, row) in read_jsonl(&path)? {
                apply(&mut report, &path, &family, &row)?;
            }
        }
    }
    Ok(report)
}
