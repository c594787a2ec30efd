//! Config-driven commands behind the `intent-bench` binary.
//!
//! A run is fully described by a [`RunConfig`] (a TOML file plus flag
//! overrides). Every command is deterministic in that config; the only
//! clock-dependent output is `run.json`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use intent_core::dataset::{
    load_dataset, synth_cohort, write_dataset, DatasetError, Recording, SynthConfig, TaskShape, GAZE_FILE,
    HITS_FILE, PARTICIPANTS_FILE, RESISTANCE_FILE,
};
use intent_core::features::{write_feature_csv, FeatureOptions, SetupId, ShapeTables};
use intent_core::pipeline::{
    participant_records, reference_comparison, render_reference_comparison, render_report, run_grid,
    run_two_step, standard_cells, write_outputs, GridSelection, ModelSettings, PipelineConfig, PipelineError,
    PipelineResult, ReportFormat, ReportTables, RunProvenance, SplitSpec,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable consulted for the root seed when neither the
/// config file nor `--seed` sets one.
pub const SEED_ENV: &str = "INTENT_BENCH_SEED";

pub const DEFAULT_PARTICIPANTS: usize = 16;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Dataset {
        context: String,
        #[source]
        source: DatasetError,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl CliError {
    /// Short machine-readable category used as the diagnostic prefix.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Dataset { .. } => "dataset",
            CliError::Pipeline(PipelineError::Io { .. }) => "io",
            CliError::Pipeline(PipelineError::Dataset { .. }) => "dataset",
            CliError::Pipeline(PipelineError::Setup { .. } | PipelineError::Scale { .. }) => "features",
            CliError::Pipeline(PipelineError::Model { .. }) => "model",
            CliError::Pipeline(_) => "pipeline",
        }
    }

    /// `error[kind]: message` on a single line.
    pub fn diagnostic(&self) -> String {
        let mut msg = self.to_string();
        let mut source = std::error::Error::source(self);
        // transparent variants already print their source
        if matches!(self, CliError::Pipeline(_)) {
            source = source.and_then(|s| s.source());
        }
        while let Some(s) = source {
            let text = s.to_string();
            if !msg.contains(&text) {
                msg.push_str(": ");
                msg.push_str(&text);
            }
            source = s.source();
        }
        let one_line = msg.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{}]: {one_line}", self.kind())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    /// Generated cohort; `seed` defaults to the root seed.
    Synthetic {
        #[serde(default = "default_participants")]
        participants: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// A directory holding the four dataset CSV files.
    Csv { dir: PathBuf },
}

fn default_participants() -> usize {
    DEFAULT_PARTICIPANTS
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            participants: DEFAULT_PARTICIPANTS,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeSelection {
    Diamond,
    Circle,
    #[default]
    Both,
}

impl ShapeSelection {
    pub fn shapes(self) -> Vec<TaskShape> {
        match self {
            ShapeSelection::Diamond => vec![TaskShape::Diamond],
            ShapeSelection::Circle => vec![TaskShape::Circle],
            ShapeSelection::Both => TaskShape::ALL.to_vec(),
        }
    }
}

impl FromStr for ShapeSelection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "diamond" => Ok(ShapeSelection::Diamond),
            "circle" => Ok(ShapeSelection::Circle),
            "both" => Ok(ShapeSelection::Both),
            _ => Err(format!("unknown shape selection {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// The full (step × model × setup × shape) grid.
    #[default]
    Grid,
    /// Only the two-step pipeline on `direction_setup`, per shape.
    TwoStep,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Grid => "grid",
            RunMode::TwoStep => "two_step",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root seed; `None` falls back to the environment, then 0.
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub data: DataSource,
    /// Expected gaze width. For CSV input `None` accepts whatever the files
    /// hold; for synthetic data it overrides `synth.gaze_width`.
    pub gaze_width: Option<usize>,
    pub synth: SynthConfig,
    pub split: SplitSpec,
    pub features: FeatureOptions,
    pub models: ModelSettings,
    pub grid: GridSelection,
    pub shape: ShapeSelection,
    pub mode: RunMode,
    pub direction_setup: SetupId,
    pub random_guess_draws: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            seed: None,
            out: PathBuf::from("out"),
            data: DataSource::default(),
            gaze_width: None,
            synth: SynthConfig::default(),
            split: p.split,
            features: p.features,
            models: p.models,
            grid: GridSelection::default(),
            shape: ShapeSelection::default(),
            mode: RunMode::default(),
            direction_setup: p.direction_setup,
            random_guess_draws: p.random_guess_draws,
        }
    }
}

/// Command-line values layered over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub synthetic: bool,
    pub data: Option<PathBuf>,
    pub grid: Option<GridSelection>,
    pub shape: Option<ShapeSelection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Flags win over the file; the seed environment variable only fills a
    /// seed that neither set.
    pub fn apply(&mut self, o: &Overrides, env_seed: Option<&str>) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if self.seed.is_none() {
            if let Some(raw) = env_seed {
                let seed = raw
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
                self.seed = Some(seed);
            }
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        match (o.synthetic, &o.data) {
            (true, Some(_)) => {
                return Err(CliError::Config("--synthetic and --data are mutually exclusive".into()))
            }
            (true, None) => {
                if !matches!(self.data, DataSource::Synthetic { .. }) {
                    self.data = DataSource::default();
                }
            }
            (false, Some(dir)) => self.data = DataSource::Csv { dir: dir.clone() },
            (false, None) => {}
        }
        if let Some(g) = o.grid {
            self.grid = g;
        }
        if let Some(s) = o.shape {
            self.shape = s;
        }
        Ok(())
    }

    pub fn root_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            gaze_width: self.gaze_width.unwrap_or(self.synth.gaze_width),
            ..self.synth.clone()
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            seed: self.root_seed(),
            split: self.split,
            models: self.models.clone(),
            features: self.features,
            direction_setup: self.direction_setup,
            random_guess_draws: self.random_guess_draws,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Synthetic { participants, .. } = self.data {
            if participants < 2 {
                return Err(CliError::Config(format!(
                    "data.participants must be at least 2, got {participants}"
                )));
            }
            self.synth_config()
                .validate()
                .map_err(|e| CliError::Config(format!("synth: {e}")))?;
        }
        self.pipeline_config().validate()?;
        Ok(())
    }

    fn describe_source(&self) -> String {
        match &self.data {
            DataSource::Synthetic { participants, seed } => format!(
                "synthetic (participants {participants}, seed {})",
                seed.unwrap_or(self.root_seed())
            ),
            DataSource::Csv { dir } => format!("csv ({})", dir.display()),
        }
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

/// Recordings of the selected shapes, from files or generated.
pub fn load_recordings(cfg: &RunConfig) -> Result<Vec<Recording>> {
    let shapes = cfg.shape.shapes();
    let recs = match &cfg.data {
        DataSource::Synthetic { participants, seed } => synth_cohort(
            seed.unwrap_or(cfg.root_seed()),
            *participants,
            &shapes,
            &cfg.synth_config(),
        )
        .map_err(|source| CliError::Dataset {
            context: "synthesizing cohort".into(),
            source,
        })?,
        DataSource::Csv { dir } => load_dataset(dir, cfg.gaze_width).map_err(|source| CliError::Dataset {
            context: format!("loading {}", dir.display()),
            source,
        })?,
    };
    Ok(recs.into_iter().filter(|r| shapes.contains(&r.shape)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub dir: PathBuf,
    pub participants: usize,
    pub shapes: Vec<TaskShape>,
    pub hit_rows_per_shape: usize,
}

/// Writes a synthetic cohort as dataset CSV files into `cfg.out`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthSummary> {
    cfg.validate()?;
    let DataSource::Synthetic { participants, .. } = cfg.data else {
        return Err(CliError::Config("synth needs a synthetic data source".into()));
    };
    let recs = load_recordings(cfg)?;
    mkdir(&cfg.out)?;
    write_dataset(&cfg.out, &recs).map_err(|source| CliError::Dataset {
        context: format!("writing {}", cfg.out.display()),
        source,
    })?;
    let shapes = cfg.shape.shapes();
    Ok(SynthSummary {
        dir: cfg.out.clone(),
        participants,
        hit_rows_per_shape: recs.iter().filter(|r| r.shape == shapes[0]).map(|r| r.hits.len()).sum(),
        shapes,
    })
}

/// Writes `features_<shape>.csv` (one row per window, labelled) per shape.
pub fn cmd_features(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let recs = load_recordings(cfg)?;
    mkdir(&cfg.out)?;
    let mut written = Vec::new();
    for shape in cfg.shape.shapes() {
        let records = participant_records(&recs, shape)?;
        if records.is_empty() {
            continue;
        }
        let tables = ShapeTables::build(&records, cfg.features).map_err(|source| PipelineError::Setup {
            context: format!("{shape} features"),
            source,
        })?;
        let path = cfg.out.join(format!("features_{shape}.csv"));
        write_feature_csv(&path, &tables).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        written.push(path);
    }
    if written.is_empty() {
        return Err(CliError::Config("no recordings for the selected shapes".into()));
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunSummary {
    Grid(ReportTables),
    TwoStep(Vec<PipelineResult>),
}

fn two_step_text(results: &[PipelineResult]) -> String {
    let mut s = String::from("Two-step pipeline (Accuracy (%) [macro F1] on held-out rows)\n");
    for r in results {
        s.push_str(&format!(
            "{:<8} step one (gaze NN) {}   step two (LSTM on {}) {}\n",
            r.shape.to_string(),
            intent_core::pipeline::format_cell(r.step_one.accuracy, r.step_one.macro_f1),
            r.setup,
            intent_core::pipeline::format_cell(r.step_two.accuracy, r.step_two.macro_f1),
        ));
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Trains and evaluates per `cfg.mode`, writing reports under `cfg.out`.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let recs = load_recordings(cfg)?;
    let pcfg = cfg.pipeline_config();
    let shapes = cfg.shape.shapes();
    mkdir(&cfg.out)?;
    match cfg.mode {
        RunMode::Grid => {
            let mut records = Vec::new();
            for &shape in &shapes {
                records.extend(participant_records(&recs, shape)?);
            }
            let tables = run_grid(&records, &standard_cells(cfg.grid, &shapes), &pcfg)?;
            let comparison = match cfg.data {
                DataSource::Csv { .. } => Some(render_reference_comparison(&reference_comparison(&tables))),
                DataSource::Synthetic { .. } => None,
            };
            let provenance = RunProvenance::new(&tables, cfg.describe_source(), started);
            write_outputs(&cfg.out, &tables, &provenance, comparison.as_deref())?;
            Ok(RunSummary::Grid(tables))
        }
        RunMode::TwoStep => {
            let mut results = Vec::new();
            for &shape in &shapes {
                let records = participant_records(&recs, shape)?;
                results.push(run_two_step(&records, &pcfg)?);
            }
            let json = serde_json::to_string_pretty(&results).expect("plain data") + "\n";
            write_text(&cfg.out.join("two_step.json"), &json)?;
            write_text(&cfg.out.join("report.txt"), &two_step_text(&results))?;
            Ok(RunSummary::TwoStep(results))
        }
    }
}

/// Re-renders `report.txt` / `report.csv` from a previous run's
/// `cells.json` in `cfg.out`, returning the text report.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let path = cfg.out.join("cells.json");
    let text = fs::read_to_string(&path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let tables: ReportTables = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut report = render_report(&tables, ReportFormat::Text)?;
    if matches!(cfg.data, DataSource::Csv { .. }) {
        report.push('\n');
        report.push_str(&render_reference_comparison(&reference_comparison(&tables)));
    }
    write_text(&cfg.out.join("report.txt"), &report)?;
    write_text(&cfg.out.join("report.csv"), &render_report(&tables, ReportFormat::Csv)?)?;
    Ok(report)
}

/// The dataset file names `synth` writes and `--data` expects.
pub const DATASET_FILES: [&str; 4] = [RESISTANCE_FILE, HITS_FILE, GAZE_FILE, PARTICIPANTS_FILE];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml("seed = 1\nbogus_key = 3\n").unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
        let err = RunConfig::from_toml("[models.mlp]\nlayers = 3\n").unwrap_err();
        assert!(err.to_string().contains("layers"), "{err}");
    }

    #[test]
    fn full_config_parses() {
        let cfg = RunConfig::from_toml(
            r#"
            seed = 7
            out = "results"
            grid = "segment"
            shape = "circle"
            direction_setup = "D8"

            [data]
            source = "synthetic"
            participants = 4

            [split]
            train_fraction = 0.75
            stratify_by = "direction"

            [models.lstm]
            window_len = 3
            mode = "full-sequence"

            [models.svm]
            epochs = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.root_seed(), 7);
        assert_eq!(cfg.grid, GridSelection::Segment);
        assert_eq!(cfg.models.lstm.window_len, 3);
        assert_eq!(cfg.models.svm.epochs, 10);
        assert_eq!(cfg.models.svm.lambda, 0.01);
        assert_eq!(cfg.direction_setup, SetupId::D8);
        let csv = RunConfig::from_toml("[data]\nsource = \"csv\"\ndir = \"d\"\n").unwrap();
        assert_eq!(csv.data, DataSource::Csv { dir: "d".into() });
    }

    #[test]
    fn seed_precedence() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides::default(), Some("9")).unwrap();
        assert_eq!(cfg.root_seed(), 9);
        let mut cfg = RunConfig::from_toml("seed = 3").unwrap();
        cfg.apply(&Overrides::default(), Some("9")).unwrap();
        assert_eq!(cfg.root_seed(), 3);
        cfg.apply(&Overrides { seed: Some(5), ..Default::default() }, Some("9")).unwrap();
        assert_eq!(cfg.root_seed(), 5);
        let mut cfg = RunConfig::default();
        assert!(cfg.apply(&Overrides::default(), Some("abc")).is_err());
    }

    #[test]
    fn data_flags() {
        let mut cfg = RunConfig::default();
        let both = Overrides {
            synthetic: true,
            data: Some("x".into()),
            ..Default::default()
        };
        assert!(cfg.apply(&both, None).is_err());
        cfg.apply(&Overrides { data: Some("x".into()), ..Default::default() }, None).unwrap();
        assert_eq!(cfg.data, DataSource::Csv { dir: "x".into() });
        cfg.apply(&Overrides { synthetic: true, ..Default::default() }, None).unwrap();
        assert_eq!(cfg.data, DataSource::default());
    }

    #[test]
    fn diagnostics_are_single_line() {
        let err = RunConfig::from_toml("seed = [\n").unwrap_err();
        let d = err.diagnostic();
        assert!(d.starts_with("error[config]: "));
        assert!(!d.contains('\n'));
    }
}
