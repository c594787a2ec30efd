//! Table rendering (`AA.AA [0.FFF]` cells) and run output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{label_of, ExperimentCell, ReportTables};
use super::{GridModel, PipelineError, Result, Step};
use crate::dataset::TaskShape;
use crate::features::SetupId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Csv,
}

/// Accuracy with two decimals, F1 with three: `96.72 [0.946]`.
pub fn format_cell(accuracy: f64, f1: f64) -> String {
    format!("{accuracy:.2} [{f1:.3}]")
}

/// A rendered table: row/column headings, cells in row-major order, and
/// the index of the best cell.
struct Table<'a> {
    step: Step,
    shape: TaskShape,
    row_heads: Vec<String>,
    col_heads: Vec<String>,
    cells: Vec<&'a ExperimentCell>,
    best: usize,
}

fn distinct<T: Ord + Copy>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = items.collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Segment tables have models as rows and setups as columns; direction
/// tables the transpose. Every row × column combination must be present.
fn build_tables(tables: &ReportTables) -> Result<Vec<Table<'_>>> {
    let mut out = Vec::new();
    for step in Step::ALL {
        for shape in TaskShape::ALL {
            let group: Vec<&ExperimentCell> =
                tables.cells.iter().filter(|c| c.step == step && c.shape == shape).collect();
            if group.is_empty() {
                continue;
            }
            let models = distinct(group.iter().map(|c| c.model));
            let setups = distinct(group.iter().map(|c| c.setup));
            let find = |m: GridModel, s: SetupId| {
                group
                    .iter()
                    .copied()
                    .find(|c| c.model == m && c.setup == s)
                    .ok_or_else(|| {
                        PipelineError::IncompleteTable(format!(
                            "{step} {shape}: no cell for {} on {s}",
                            m.label(step)
                        ))
                    })
            };
            let model_heads: Vec<String> = models.iter().map(|m| m.label(step).to_string()).collect();
            let setup_heads: Vec<String> = setups.iter().map(|s| s.to_string()).collect();
            let mut cells = Vec::new();
            let (row_heads, col_heads) = match step {
                Step::Segment => {
                    for &m in &models {
                        for &s in &setups {
                            cells.push(find(m, s)?);
                        }
                    }
                    (model_heads, setup_heads)
                }
                Step::Direction => {
                    for &s in &setups {
                        for &m in &models {
                            cells.push(find(m, s)?);
                        }
                    }
                    (setup_heads, model_heads)
                }
            };
            let mut best = 0;
            for (i, c) in cells.iter().enumerate() {
                let b = &cells[best].metrics;
                if (c.metrics.accuracy, c.metrics.macro_f1) > (b.accuracy, b.macro_f1) {
                    best = i;
                }
            }
            out.push(Table {
                step,
                shape,
                row_heads,
                col_heads,
                cells,
                best,
            });
        }
    }
    Ok(out)
}

fn title(step: Step, shape: TaskShape) -> String {
    let problem = match step {
        Step::Segment => "Segment",
        Step::Direction => "Direction",
    };
    format!("{problem} prediction for {shape}")
}

fn csv_model_name(step: Step, model: GridModel) -> String {
    model.label(step).to_ascii_lowercase()
}

fn render_text(tables: &ReportTables, rendered: &[Table<'_>]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Two-step motion-intention benchmark");
    let _ = writeln!(s, "root seed {}, config {}", tables.root_seed, tables.config_hash);
    let _ = writeln!(
        s,
        "Cells are Accuracy (%) [macro F1] on held-out rows; ** marks the best cell of each table."
    );
    let _ = writeln!(
        s,
        "Caveat: rows are split per sample, so every participant appears on both sides of the split."
    );
    for t in rendered {
        let _ = writeln!(s);
        let _ = writeln!(s, "{}", title(t.step, t.shape));
        let head_w = t.row_heads.iter().map(String::len).max().unwrap_or(0).max(4);
        let cell_w = 18;
        let _ = write!(s, "{:head_w$}", "");
        for c in &t.col_heads {
            let _ = write!(s, "  {c:<cell_w$}");
        }
        let _ = writeln!(s);
        for (r, head) in t.row_heads.iter().enumerate() {
            let _ = write!(s, "{head:<head_w$}");
            for c in 0..t.col_heads.len() {
                let i = r * t.col_heads.len() + c;
                let m = &t.cells[i].metrics;
                let mut cell = format_cell(m.accuracy, m.macro_f1);
                if i == t.best {
                    cell = format!("**{cell}**");
                }
                let _ = write!(s, "  {cell:<cell_w$}");
            }
            let _ = writeln!(s);
        }
    }
    if !tables.random_guess.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Random guess baseline");
        for e in &tables.random_guess {
            let _ = writeln!(
                s,
                "{:<34}  {}",
                title(e.step, e.shape),
                format_cell(e.metrics.accuracy, e.metrics.macro_f1)
            );
        }
    }
    if !tables.step_one.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Step one (gaze NN feeding D4/D6/D7/D8)");
        for e in &tables.step_one {
            let _ = writeln!(
                s,
                "{:<34}  {}",
                e.shape.to_string(),
                format_cell(e.metrics.accuracy, e.metrics.macro_f1)
            );
        }
    }
    s
}

fn render_csv(tables: &ReportTables, rendered: &[Table<'_>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| PipelineError::Io {
        path: "report.csv".into(),
        source: e.into(),
    };
    w.write_record(["step", "shape", "model", "setup", "accuracy", "f1", "best"])
        .map_err(io)?;
    for t in rendered {
        for (i, c) in t.cells.iter().enumerate() {
            w.write_record([
                c.step.as_str().to_string(),
                c.shape.to_string(),
                csv_model_name(c.step, c.model),
                c.setup.to_string(),
                c.metrics.accuracy.to_string(),
                c.metrics.macro_f1.to_string(),
                (i == t.best).to_string(),
            ])
            .map_err(io)?;
        }
    }
    for e in &tables.random_guess {
        w.write_record([
            e.step.as_str().to_string(),
            e.shape.to_string(),
            "random_guess".to_string(),
            String::new(),
            e.metrics.accuracy.to_string(),
            e.metrics.macro_f1.to_string(),
            "false".to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| PipelineError::Io {
        path: "report.csv".into(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_report(tables: &ReportTables, format: ReportFormat) -> Result<String> {
    if tables.cells.is_empty() {
        return Err(PipelineError::IncompleteTable("no cells".into()));
    }
    let rendered = build_tables(tables)?;
    match format {
        ReportFormat::Text => Ok(render_text(tables, &rendered)),
        ReportFormat::Csv => render_csv(tables, &rendered),
    }
}

/// One ordering claim checked against a finished grid. `holds` is `None`
/// when the grid lacks the cells the claim needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheck {
    pub claim: String,
    pub reference: String,
    pub observed: String,
    pub holds: Option<bool>,
}

const SEGMENT_NN_D3_D1: [(TaskShape, f64, f64); 2] =
    [(TaskShape::Diamond, 92.31, 39.67), (TaskShape::Circle, 94.87, 38.05)];
const DIRECTION_LSTM_D6: [(TaskShape, f64); 2] = [(TaskShape::Diamond, 96.72), (TaskShape::Circle, 97.44)];
const DIAMOND_D2_D1_GAP: f64 = 34.6;
/// How far the observed D2 − D1 gap may drift and still count as matching.
pub const GAP_TOLERANCE: f64 = 10.0;

/// Compares a grid against the reference results' ordering claims. Purely
/// informational: deviations are reported, never raised.
pub fn reference_comparison(tables: &ReportTables) -> Vec<ClaimCheck> {
    let acc = |step, model, setup, shape| tables.cell(step, model, setup, shape).map(|c| c.metrics.accuracy);
    let mut out = Vec::new();
    for (shape, ref_d3, ref_d1) in SEGMENT_NN_D3_D1 {
        let d3 = acc(Step::Segment, GridModel::Nn, SetupId::D3, shape);
        let d1 = acc(Step::Segment, GridModel::Nn, SetupId::D1, shape);
        out.push(ClaimCheck {
            claim: format!("segment NN on D3 beats NN on D1 ({shape})"),
            reference: format!("{ref_d3:.2} vs {ref_d1:.2}"),
            observed: match (d3, d1) {
                (Some(a), Some(b)) => format!("{a:.2} vs {b:.2}"),
                _ => "not run".into(),
            },
            holds: d3.zip(d1).map(|(a, b)| a > b),
        });
    }
    for (shape, ref_d6) in DIRECTION_LSTM_D6 {
        let group: Vec<&ExperimentCell> = tables
            .cells
            .iter()
            .filter(|c| c.step == Step::Direction && c.shape == shape)
            .collect();
        let mut best: Option<&ExperimentCell> = None;
        for c in &group {
            if best.is_none_or(|b| (c.metrics.accuracy, c.metrics.macro_f1) > (b.metrics.accuracy, b.metrics.macro_f1)) {
                best = Some(c);
            }
        }
        let d6 = acc(Step::Direction, GridModel::Nn, SetupId::D6, shape);
        out.push(ClaimCheck {
            claim: format!("LSTM on D6 is the best direction cell ({shape})"),
            reference: format!("{ref_d6:.2}"),
            observed: match (best, d6) {
                (Some(b), Some(v)) => format!(
                    "LSTM-D6 {v:.2}; best {}-{} {:.2}",
                    b.model.label(Step::Direction),
                    b.setup,
                    b.metrics.accuracy
                ),
                _ => "not run".into(),
            },
            holds: d6.zip(best).map(|(v, b)| v >= b.metrics.accuracy),
        });
    }
    let d2 = acc(Step::Direction, GridModel::Nn, SetupId::D2, TaskShape::Diamond);
    let d1 = acc(Step::Direction, GridModel::Nn, SetupId::D1, TaskShape::Diamond);
    let gap = d2.zip(d1).map(|(a, b)| a - b);
    out.push(ClaimCheck {
        claim: format!("LSTM D2 − D1 gap on diamond ≈ {DIAMOND_D2_D1_GAP} points (±{GAP_TOLERANCE})"),
        reference: format!("{DIAMOND_D2_D1_GAP:.2}"),
        observed: gap.map_or("not run".into(), |g| format!("{g:.2} (deviation {:+.2})", g - DIAMOND_D2_D1_GAP)),
        holds: gap.map(|g| (g - DIAMOND_D2_D1_GAP).abs() <= GAP_TOLERANCE),
    });
    out
}

pub fn render_reference_comparison(checks: &[ClaimCheck]) -> String {
    let mut s = String::from("Reference comparison (informational)\n");
    for c in checks {
        let verdict = match c.holds {
            Some(true) => "holds",
            Some(false) => "DEVIATES",
            None => "n/a",
        };
        let _ = writeln!(
            s,
            "  [{verdict}] {}: reference {}, observed {}",
            c.claim, c.reference, c.observed
        );
    }
    s
}

/// Non-deterministic run facts kept out of the report files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub root_seed: u64,
    pub config_hash: String,
    pub data_source: String,
    pub started_unix_s: u64,
    pub tool_version: String,
    pub cells: Vec<CellProvenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellProvenance {
    pub cell: String,
    pub seed: u64,
    pub wall_ms: f64,
}

impl RunProvenance {
    pub fn new(tables: &ReportTables, data_source: impl Into<String>, started_unix_s: u64) -> Self {
        Self {
            root_seed: tables.root_seed,
            config_hash: tables.config_hash.clone(),
            data_source: data_source.into(),
            started_unix_s,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            cells: tables
                .cells
                .iter()
                .map(|c| CellProvenance {
                    cell: label_of(c),
                    seed: c.seed,
                    wall_ms: c.wall_ms,
                })
                .collect(),
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data");
    s.push('\n');
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `report.txt`, `report.csv`, `cells.json`, `run.json` and one
/// confusion matrix per cell under `confusions/`. Only `run.json` carries
/// timing and clock data.
pub fn write_outputs(
    dir: &Path,
    tables: &ReportTables,
    provenance: &RunProvenance,
    extra_text: Option<&str>,
) -> Result<()> {
    let mkdir = |p: &Path| {
        fs::create_dir_all(p).map_err(|source| PipelineError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    mkdir(dir)?;
    let mut text = render_report(tables, ReportFormat::Text)?;
    if let Some(extra) = extra_text {
        text.push('\n');
        text.push_str(extra);
    }
    write(&dir.join("report.txt"), &text)?;
    write(&dir.join("report.csv"), &render_report(tables, ReportFormat::Csv)?)?;
    write(&dir.join("cells.json"), &to_json(tables))?;
    write(&dir.join("run.json"), &to_json(provenance))?;

    let conf_dir = dir.join("confusions");
    mkdir(&conf_dir)?;
    for c in &tables.cells {
        let name = format!(
            "{}_{}_{}_{}.csv",
            c.step,
            c.shape,
            csv_model_name(c.step, c.model),
            c.setup
        );
        let k = c.metrics.confusion.len();
        let mut s = String::from("truth");
        for p in 0..k {
            let _ = write!(s, ",pred_{p}");
        }
        s.push('\n');
        for (t, row) in c.metrics.confusion.iter().enumerate() {
            let _ = write!(s, "{t}");
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        write(&conf_dir.join(name), &s)?;
    }
    Ok(())
}
