//! Command-line frontend for the cross-wavelet ECG classifier.
//!
//! Subcommands cover the whole workflow: cut a template beat from a
//! record, turn records into a feature table, fit the two-stage model,
//! label new tables, score labeled ones, and export the underlying
//! matrices for plotting. A `synth` family generates the deterministic
//! fixtures used throughout the test suite.
//!
//! Configuration is a flat `key = value` file; command-line flags
//! override file values, and `--dump-config` prints the effective
//! settings so any run can be reproduced from its dump. Exit codes: 0 on
//! success, 2 for usage or input-data problems, 1 when writing results
//! fails.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use xwtecg::classify::{
    classify_hierarchical, fit_thresholds, knn_fit, read_model, write_model, ClassLabel,
    CoarseClass,
};
use xwtecg::features::{
    read_feature_csv, write_feature_csv, AnalysisWindow, FeatureRow, FeatureVector,
};
use xwtecg::fsutil;
use xwtecg::ingest::{read_csv_signal, read_wfdb_record, write_csv_signal, EcgRecord};
use xwtecg::metrics::{confusion, MetricsReport};
use xwtecg::pipeline::{
    analyze_record_with, generate_synthetic_beat, generate_synthetic_record, preset_spec,
    read_template, synthetic_template, write_template, BeatAnalyzer, SyntheticRecordSpec,
    TemplateBeat,
};
use xwtecg::preprocess::{
    denoise, detect_r_peaks, read_beat_csv, resample_to_1000, segment_beats, write_beat_csv,
    NormalizedBeat, NORMALIZED_R_INDEX,
};
use xwtecg::xwavelet::export::{
    write_wcoh_binary, write_wcoh_csv, write_wcs_binary, write_wcs_csv,
};
use xwtecg::xwavelet::ScaleGrid;

/// What went wrong, split by whose fault it is. Usage failures cover bad
/// flags, unreadable or malformed inputs, and degenerate data; internal
/// failures are reserved for the machine refusing our writes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Internal(String),
}

/// Tags an input-side error as a usage failure (exit code 2).
fn data(err: impl std::fmt::Display) -> Failure {
    Failure::Usage(err.to_string())
}

/// Tags an output-side error as an internal failure (exit code 1).
fn output(err: impl std::fmt::Display) -> Failure {
    Failure::Internal(err.to_string())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_thread_pool()?;
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = fsutil::read_to_string(path).map_err(data)?;
        cfg.apply_text(&text, &path.display().to_string())?;
    }
    cfg.apply_overrides(&cli.overrides);
    if cli.dump_config {
        print!("{}", cfg.render());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Failure::Usage(
            "no subcommand given (run with --help for the list)".into(),
        ));
    };
    match command {
        Command::Template {
            record,
            beat_ordinal,
        } => cmd_template(&cfg, &record, beat_ordinal),
        Command::Extract { records } => cmd_extract(&cfg, &records),
        Command::Train { features } => cmd_train(&cfg, &features),
        Command::Classify { features } => cmd_classify(&cfg, &features),
        Command::Evaluate { features } => cmd_evaluate(&cfg, &features),
        Command::Spectrogram {
            beat,
            beat_ordinal,
            out_prefix,
            format,
        } => cmd_spectrogram(&cfg, &beat, beat_ordinal, &out_prefix, format),
        Command::Synth(synth) => match synth {
            SynthCommand::Template => cmd_synth_template(&cfg),
            SynthCommand::Record {
                beats,
                noise,
                record_id,
            } => cmd_synth_record(&cfg, beats, noise, &record_id),
            SynthCommand::Beats {
                out_dir,
                per_class,
                noise,
            } => cmd_synth_beats(&cfg, &out_dir, per_class, noise),
        },
    }
}

/// Applies the XWT_ECG_THREADS cap before any parallel work is spawned.
/// Unset means rayon's default (one worker per logical CPU).
fn init_thread_pool() -> Result<(), Failure> {
    let Some(raw) = std::env::var_os("XWT_ECG_THREADS") else {
        return Ok(());
    };
    let text = raw.to_string_lossy();
    let threads: usize = match text.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => {
            return Err(Failure::Usage(format!(
                "XWT_ECG_THREADS must be a positive integer, got {:?}",
                text.as_ref()
            )))
        }
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Internal(format!("cannot size the thread pool: {e}")))
}

#[derive(Parser, Debug)]
#[command(
    name = "xwtecg",
    version,
    about = "ECG beat classification by cross-wavelet comparison against a normal template",
    arg_required_else_help = true
)]
struct Cli {
    /// Flat `key = value` config file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Print the effective configuration and exit without running
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Option<Command>,
}

/// Per-run settings that may also come from the config file. Every flag
/// here is optional; anything left unset falls back to the file value and
/// then to the built-in default.
#[derive(Args, Debug)]
struct Overrides {
    /// Lead to analyze (default iii)
    #[arg(long, global = true)]
    lead: Option<String>,

    /// Smallest wavelet scale in samples (default 1)
    #[arg(long, global = true)]
    scale_min: Option<u32>,

    /// Largest wavelet scale in samples (default 512)
    #[arg(long, global = true)]
    scale_max: Option<u32>,

    /// Lower edge of the feature scale band (default 75)
    #[arg(long, global = true)]
    band_min: Option<usize>,

    /// Upper edge of the feature scale band (default 300)
    #[arg(long, global = true)]
    band_max: Option<usize>,

    /// Feature window start, in samples before the R peak (default 80)
    #[arg(long, global = true)]
    qt_left: Option<usize>,

    /// Feature window end, in samples after the R peak (default 400)
    #[arg(long, global = true)]
    qt_right: Option<usize>,

    /// Neighbor count for the type discriminator, odd (default 3)
    #[arg(long, global = true)]
    k: Option<usize>,

    /// Seed for synthetic generation (default 0)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Sampling rate assumed for headerless CSV records, in Hz (default 1000)
    #[arg(long, global = true)]
    csv_fs: Option<f64>,

    /// Template beat file (input for extract and spectrogram)
    #[arg(long, global = true)]
    template: Option<PathBuf>,

    /// Trained model file to read (input of classify; train writes via --out)
    #[arg(long, global = true)]
    model: Option<PathBuf>,

    /// Primary output path of the subcommand
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cut a normalized template beat out of a record and write it with a
    /// provenance sidecar
    Template {
        /// Record to read (.hea for WFDB, anything else as one-column CSV)
        #[arg(long)]
        record: PathBuf,

        /// Which emitted beat to keep, counting from zero
        #[arg(long, default_value_t = 0)]
        beat_ordinal: usize,
    },

    /// Turn records into a feature table, one row per accepted beat
    Extract {
        /// Record files (.hea or CSV), at least one
        records: Vec<PathBuf>,
    },

    /// Fit coarse thresholds and the infarct-type discriminator from a
    /// labeled feature table
    Train {
        /// Feature table whose label column is filled in
        #[arg(long)]
        features: PathBuf,
    },

    /// Add a predicted column to a feature table using a trained model
    Classify {
        /// Feature table to label
        #[arg(long)]
        features: PathBuf,
    },

    /// Score a table carrying both truth and predicted labels; prints a
    /// coarse report and a type report restricted to infarct beats
    Evaluate {
        /// Labeled and classified feature table
        #[arg(long)]
        features: PathBuf,
    },

    /// Export the cross spectrum and coherence of one beat against the
    /// template, for external plotting
    Spectrogram {
        /// Beat CSV (1000 samples), or a record to cut the beat from
        #[arg(long)]
        beat: PathBuf,

        /// Which beat to take when --beat names a record
        #[arg(long, default_value_t = 0)]
        beat_ordinal: usize,

        /// Output stem; files get .wcs.csv, .wcoh.csv, .wcs.bin, .wcoh.bin
        #[arg(long)]
        out_prefix: PathBuf,

        /// Which representations to write
        #[arg(long, value_enum, default_value_t = ExportFormat::Both)]
        format: ExportFormat,
    },

    /// Generate deterministic synthetic fixtures
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Write the clean synthetic normal beat as a template (to --out)
    Template,

    /// Write a multi-beat synthetic record CSV plus an .rpeaks sidecar
    /// listing the true R positions (to --out)
    Record {
        /// Number of beats in the record
        #[arg(long, default_value_t = 10)]
        beats: usize,

        /// Additive noise RMS in millivolts
        #[arg(long, default_value_t = 0.02)]
        noise: f64,

        /// Record id embedded in the generated beats
        #[arg(long, default_value = "synthrec")]
        record_id: String,
    },

    /// Write a labeled cohort of single beats and a cohort.csv manifest
    Beats {
        /// Directory for the beat files and manifest
        #[arg(long)]
        out_dir: PathBuf,

        /// Beats per class
        #[arg(long, default_value_t = 5)]
        per_class: usize,

        /// Additive noise RMS in millivolts
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ExportFormat {
    Csv,
    Binary,
    Both,
}

/// Effective settings for one run, the merge of built-in defaults, the
/// config file, and command-line flags, in that order.
#[derive(Debug, Clone, PartialEq)]
struct RunConfig {
    lead: String,
    scale_min: u32,
    scale_max: u32,
    band_min: usize,
    band_max: usize,
    qt_left: usize,
    qt_right: usize,
    k: usize,
    seed: u64,
    csv_fs: f64,
    template: Option<PathBuf>,
    model: Option<PathBuf>,
    out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lead: "iii".into(),
            scale_min: 1,
            scale_max: 512,
            band_min: 75,
            band_max: 300,
            qt_left: 80,
            qt_right: 400,
            k: 3,
            seed: 0,
            csv_fs: 1000.0,
            template: None,
            model: None,
            out: None,
        }
    }
}

impl RunConfig {
    /// Folds a config file's text into the settings. Lines are
    /// `key = value`; blank lines and `#` comments are skipped, unknown
    /// keys and unparsable values are errors, later lines win.
    fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), Failure> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::Usage(format!(
                    "{origin} line {}: expected `key = value`, got {line:?}",
                    idx + 1
                )));
            };
            self.set(key.trim(), value.trim())
                .map_err(|msg| Failure::Usage(format!("{origin} line {}: {msg}", idx + 1)))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if value.is_empty() {
            return Err(format!("key {key:?} has an empty value"));
        }
        match key {
            "lead" => self.lead = value.to_string(),
            "scale_min" => self.scale_min = parse_value(key, value)?,
            "scale_max" => self.scale_max = parse_value(key, value)?,
            "band_min" => self.band_min = parse_value(key, value)?,
            "band_max" => self.band_max = parse_value(key, value)?,
            "qt_left" => self.qt_left = parse_value(key, value)?,
            "qt_right" => self.qt_right = parse_value(key, value)?,
            "k" => self.k = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "csv_fs" => self.csv_fs = parse_value(key, value)?,
            "template" => self.template = Some(PathBuf::from(value)),
            "model" => self.model = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(format!("unknown config key {other:?}")),
        }
        Ok(())
    }

    fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(v) = &o.lead {
            self.lead = v.clone();
        }
        if let Some(v) = o.scale_min {
            self.scale_min = v;
        }
        if let Some(v) = o.scale_max {
            self.scale_max = v;
        }
        if let Some(v) = o.band_min {
            self.band_min = v;
        }
        if let Some(v) = o.band_max {
            self.band_max = v;
        }
        if let Some(v) = o.qt_left {
            self.qt_left = v;
        }
        if let Some(v) = o.qt_right {
            self.qt_right = v;
        }
        if let Some(v) = o.k {
            self.k = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.csv_fs {
            self.csv_fs = v;
        }
        if let Some(v) = &o.template {
            self.template = Some(v.clone());
        }
        if let Some(v) = &o.model {
            self.model = Some(v.clone());
        }
        if let Some(v) = &o.out {
            self.out = Some(v.clone());
        }
    }

    /// The dump format is itself a valid config file, so a dump plus the
    /// same subcommand reproduces the run.
    fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lead = {}", self.lead);
        let _ = writeln!(s, "scale_min = {}", self.scale_min);
        let _ = writeln!(s, "scale_max = {}", self.scale_max);
        let _ = writeln!(s, "band_min = {}", self.band_min);
        let _ = writeln!(s, "band_max = {}", self.band_max);
        let _ = writeln!(s, "qt_left = {}", self.qt_left);
        let _ = writeln!(s, "qt_right = {}", self.qt_right);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "csv_fs = {}", self.csv_fs);
        if let Some(p) = &self.template {
            let _ = writeln!(s, "template = {}", p.display());
        }
        if let Some(p) = &self.model {
            let _ = writeln!(s, "model = {}", p.display());
        }
        if let Some(p) = &self.out {
            let _ = writeln!(s, "out = {}", p.display());
        }
        s
    }

    fn grid(&self) -> Result<ScaleGrid, Failure> {
        ScaleGrid::linear(self.scale_min, self.scale_max).map_err(data)
    }

    fn window(&self) -> Result<AnalysisWindow, Failure> {
        if self.qt_left > NORMALIZED_R_INDEX {
            return Err(Failure::Usage(format!(
                "qt_left {} reaches past the start of the beat (R sits at {})",
                self.qt_left, NORMALIZED_R_INDEX
            )));
        }
        AnalysisWindow::new(
            NORMALIZED_R_INDEX - self.qt_left,
            NORMALIZED_R_INDEX + self.qt_right,
            self.band_min,
            self.band_max,
        )
        .map_err(data)
    }

    fn template_path(&self) -> Result<&Path, Failure> {
        self.template.as_deref().ok_or_else(|| {
            Failure::Usage("no template path set (--template or config key template)".into())
        })
    }

    fn model_path(&self) -> Result<&Path, Failure> {
        self.model.as_deref().ok_or_else(|| {
            Failure::Usage("no model path set (--model or config key model)".into())
        })
    }

    fn out_path(&self) -> Result<&Path, Failure> {
        self.out
            .as_deref()
            .ok_or_else(|| Failure::Usage("no output path set (--out or config key out)".into()))
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse {value:?} as a value for {key:?}"))
}

/// Reads a record by extension: `.hea` means a WFDB header, anything else
/// is a one-column CSV at the configured sampling rate.
fn load_record(path: &Path, csv_fs: f64) -> xwtecg::Result<EcgRecord> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("hea")) {
        read_wfdb_record(path)
    } else {
        read_csv_signal(path, csv_fs)
    }
}

/// Picks the configured lead name, falling back to the only lead when the
/// record has exactly one. CSV records name their single lead `csv`
/// regardless of what was actually recorded, so insisting on the
/// configured name there would make every CSV unusable.
fn resolve_lead<'a>(record: &'a EcgRecord, want: &'a str) -> &'a str {
    if record.select_lead(want).is_ok() || record.leads.len() != 1 {
        want
    } else {
        &record.leads[0].name
    }
}

/// Denoises, finds R peaks, and cuts the record into normalized beats.
/// Needs at least two peaks, since beat boundaries come from RR spans.
fn cut_beats(record: &EcgRecord, lead: &str) -> Result<Vec<NormalizedBeat>, Failure> {
    let raw = record.select_lead(lead).map_err(data)?;
    let clean = denoise(raw, record.sampling_rate).map_err(data)?;
    let peaks = detect_r_peaks(&clean, record.sampling_rate);
    if peaks.len() < 2 {
        return Err(Failure::Usage(format!(
            "record {}: found {} R peak(s), need at least 2 to cut beats",
            record.record_id,
            peaks.len()
        )));
    }
    segment_beats(&clean, &peaks)
        .iter()
        .map(|seg| resample_to_1000(seg, &record.record_id, lead).map_err(data))
        .collect()
}

fn cmd_template(cfg: &RunConfig, record_path: &Path, beat_ordinal: usize) -> Result<(), Failure> {
    let out = cfg.out_path()?;
    let record = load_record(record_path, cfg.csv_fs).map_err(data)?;
    let lead = resolve_lead(&record, &cfg.lead);
    let beats = cut_beats(&record, lead)?;
    let beat = beats.get(beat_ordinal).ok_or_else(|| {
        Failure::Usage(format!(
            "record {} yields {} beat(s), ordinal {beat_ordinal} is out of range",
            record.record_id,
            beats.len()
        ))
    })?;
    let template = TemplateBeat::new(
        beat.clone(),
        format!(
            "record {}, lead {}, beat {}",
            record.record_id, lead, beat_ordinal
        ),
    )
    .map_err(data)?;
    write_template(out, &template).map_err(output)
}

fn cmd_extract(cfg: &RunConfig, records: &[PathBuf]) -> Result<(), Failure> {
    if records.is_empty() {
        return Err(Failure::Usage("no input records given".into()));
    }
    let out = cfg.out_path()?;
    let template = read_template(cfg.template_path()?).map_err(data)?;
    let analyzer = BeatAnalyzer::new(&template, cfg.grid()?, cfg.window()?).map_err(data)?;

    // Records are independent, so they fan out across the pool; collect
    // keeps input order, which keeps the output bytes stable.
    let per_record: Vec<Result<Vec<FeatureRow>, Failure>> = records
        .par_iter()
        .map(|path| extract_one(cfg, &analyzer, path))
        .collect();
    let mut rows = Vec::new();
    for result in per_record {
        rows.extend(result?);
    }
    write_feature_csv(out, &rows).map_err(output)
}

fn extract_one(
    cfg: &RunConfig,
    analyzer: &BeatAnalyzer,
    path: &Path,
) -> Result<Vec<FeatureRow>, Failure> {
    let record = load_record(path, cfg.csv_fs).map_err(data)?;
    let lead = resolve_lead(&record, &cfg.lead).to_string();
    let features = analyze_record_with(analyzer, &record, &lead).map_err(data)?;
    // The diagnosis comment becomes a label only when it is exactly one of
    // our class names; free-text diagnoses stay out of the label column.
    let label = record
        .diagnosis_label
        .as_deref()
        .and_then(|d| d.trim().parse::<ClassLabel>().ok())
        .map(|l| l.as_str().to_string());
    Ok(features
        .into_iter()
        .map(|fv| FeatureRow {
            beat_id: fv.beat_id,
            record_id: record.record_id.clone(),
            lead: lead.clone(),
            pa: fv.pa,
            pb: fv.pb,
            label: label.clone(),
            predicted: None,
        })
        .collect())
}

/// Splits a feature table into vectors and parsed truth labels, failing
/// on any row whose label is missing or not a known class name.
fn labeled_features(rows: &[FeatureRow]) -> Result<(Vec<FeatureVector>, Vec<ClassLabel>), Failure> {
    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for row in rows {
        let raw = row.label.as_deref().unwrap_or("");
        let label: ClassLabel = raw
            .parse()
            .map_err(|_| Failure::Usage(format!("beat {}: missing or unknown label {raw:?}", row.beat_id)))?;
        features.push(FeatureVector {
            pa: row.pa,
            pb: row.pb,
            beat_id: row.beat_id.clone(),
        });
        labels.push(label);
    }
    Ok((features, labels))
}

fn cmd_train(cfg: &RunConfig, features_path: &Path) -> Result<(), Failure> {
    let out = cfg.out_path()?;
    let rows = read_feature_csv(features_path).map_err(data)?;
    if rows.is_empty() {
        return Err(Failure::Usage(format!(
            "{}: feature table has no rows",
            features_path.display()
        )));
    }
    let (features, labels) = labeled_features(&rows)?;
    let coarse: Vec<CoarseClass> = labels.iter().map(|l| l.coarse()).collect();
    let thresholds = fit_thresholds(&features, &coarse).map_err(data)?;

    let mut abn_features = Vec::new();
    let mut abn_labels = Vec::new();
    for (fv, label) in features.iter().zip(&labels) {
        if *label != ClassLabel::Normal {
            abn_features.push(fv.clone());
            abn_labels.push(*label);
        }
    }
    let knn = knn_fit(&abn_features, &abn_labels, cfg.k).map_err(data)?;
    write_model(out, &thresholds, &knn).map_err(output)
}

fn cmd_classify(cfg: &RunConfig, features_path: &Path) -> Result<(), Failure> {
    let out = cfg.out_path()?;
    let mut rows = read_feature_csv(features_path).map_err(data)?;
    if rows.is_empty() {
        return Err(Failure::Usage(format!(
            "{}: feature table has no rows",
            features_path.display()
        )));
    }
    let (thresholds, knn) = read_model(cfg.model_path()?).map_err(data)?;
    for row in &mut rows {
        let fv = FeatureVector {
            pa: row.pa,
            pb: row.pb,
            beat_id: row.beat_id.clone(),
        };
        let label = classify_hierarchical(&fv, &thresholds, &knn).map_err(data)?;
        row.predicted = Some(label.as_str().to_string());
    }
    write_feature_csv(out, &rows).map_err(output)
}

fn cmd_evaluate(cfg: &RunConfig, features_path: &Path) -> Result<(), Failure> {
    let rows = read_feature_csv(features_path).map_err(data)?;
    if rows.is_empty() {
        return Err(Failure::Usage(format!(
            "{}: feature table has no rows",
            features_path.display()
        )));
    }
    let mut truth = Vec::with_capacity(rows.len());
    let mut predicted = Vec::with_capacity(rows.len());
    for row in &rows {
        let t = row.label.as_deref().unwrap_or("");
        let p = row.predicted.as_deref().unwrap_or("");
        let t: ClassLabel = t.parse().map_err(|_| {
            Failure::Usage(format!("beat {}: missing or unknown label {t:?}", row.beat_id))
        })?;
        let p: ClassLabel = p.parse().map_err(|_| {
            Failure::Usage(format!(
                "beat {}: missing or unknown prediction {p:?}",
                row.beat_id
            ))
        })?;
        truth.push(t);
        predicted.push(p);
    }

    let coarse_truth: Vec<CoarseClass> = truth.iter().map(|l| l.coarse()).collect();
    let coarse_pred: Vec<CoarseClass> = predicted.iter().map(|l| l.coarse()).collect();
    let coarse_counts =
        confusion(&coarse_pred, &coarse_truth, &CoarseClass::Abnormal).map_err(data)?;
    let coarse_report = MetricsReport::from_counts(coarse_counts);
    print!("{}", coarse_report.table("coarse (abnormal vs normal)"));

    // The type report scores only beats that both sides call infarcted,
    // with Type 1 as the positive class: its sensitivity is the Type 1
    // accuracy and its specificity the Type 2 accuracy.
    let mut type_truth = Vec::new();
    let mut type_pred = Vec::new();
    for (t, p) in truth.iter().zip(&predicted) {
        if *t != ClassLabel::Normal && *p != ClassLabel::Normal {
            type_truth.push(*t);
            type_pred.push(*p);
        }
    }
    let type_report = if type_truth.is_empty() {
        println!("type (1 vs 2): no beats where truth and prediction are both infarct types");
        None
    } else {
        let counts = confusion(&type_pred, &type_truth, &ClassLabel::ImiType1).map_err(data)?;
        let report = MetricsReport::from_counts(counts);
        print!("{}", report.table("type (1 vs 2, among infarct beats)"));
        Some(report)
    };

    if let Some(out) = &cfg.out {
        let mut csv = String::from(MetricsReport::CSV_HEADER);
        csv.push('\n');
        csv.push_str(&coarse_report.csv_row("coarse"));
        csv.push('\n');
        if let Some(report) = &type_report {
            csv.push_str(&report.csv_row("type"));
            csv.push('\n');
        }
        fsutil::write_atomic(out, csv.as_bytes()).map_err(output)?;
    }
    Ok(())
}

/// Reads the beat for the spectrogram command. A 1000-line CSV is taken
/// as an already normalized beat; anything else is loaded as a record and
/// cut, honoring the ordinal.
fn load_beat(cfg: &RunConfig, path: &Path, beat_ordinal: usize) -> Result<NormalizedBeat, Failure> {
    match read_beat_csv(path) {
        Ok(beat) => {
            if beat_ordinal != 0 {
                return Err(Failure::Usage(format!(
                    "{} is a single-beat file, beat ordinal {beat_ordinal} makes no sense here",
                    path.display()
                )));
            }
            Ok(beat)
        }
        Err(beat_err) => {
            let record = load_record(path, cfg.csv_fs).map_err(|record_err| {
                Failure::Usage(format!(
                    "{}: not a beat file ({beat_err}) and not a record ({record_err})",
                    path.display()
                ))
            })?;
            let lead = resolve_lead(&record, &cfg.lead);
            let beats = cut_beats(&record, lead)?;
            beats.get(beat_ordinal).cloned().ok_or_else(|| {
                Failure::Usage(format!(
                    "record {} yields {} beat(s), ordinal {beat_ordinal} is out of range",
                    record.record_id,
                    beats.len()
                ))
            })
        }
    }
}

fn cmd_spectrogram(
    cfg: &RunConfig,
    beat_path: &Path,
    beat_ordinal: usize,
    out_prefix: &Path,
    format: ExportFormat,
) -> Result<(), Failure> {
    let template = read_template(cfg.template_path()?).map_err(data)?;
    let beat = load_beat(cfg, beat_path, beat_ordinal)?;
    let analyzer = BeatAnalyzer::new(&template, cfg.grid()?, cfg.window()?).map_err(data)?;
    let (wcs, wcoh, _) = analyzer.analyze(&beat).map_err(data)?;

    if format != ExportFormat::Binary {
        write_wcs_csv(&path_with_suffix(out_prefix, ".wcs.csv"), &wcs).map_err(output)?;
        write_wcoh_csv(&path_with_suffix(out_prefix, ".wcoh.csv"), &wcoh).map_err(output)?;
    }
    if format != ExportFormat::Csv {
        write_wcs_binary(&path_with_suffix(out_prefix, ".wcs.bin"), &wcs).map_err(output)?;
        write_wcoh_binary(&path_with_suffix(out_prefix, ".wcoh.bin"), &wcoh).map_err(output)?;
    }
    Ok(())
}

fn cmd_synth_template(cfg: &RunConfig) -> Result<(), Failure> {
    write_template(cfg.out_path()?, &synthetic_template()).map_err(output)
}

fn cmd_synth_record(
    cfg: &RunConfig,
    beats: usize,
    noise: f64,
    record_id: &str,
) -> Result<(), Failure> {
    let out = cfg.out_path()?;
    let spec = SyntheticRecordSpec {
        record_id: record_id.to_string(),
        n_beats: beats,
        sampling_rate: cfg.csv_fs,
        noise_rms_mv: noise,
        random_seed: cfg.seed,
    };
    let (record, r_peaks) = generate_synthetic_record(&spec).map_err(data)?;
    write_csv_signal(out, &record.leads[0].samples).map_err(output)?;
    let mut sidecar = String::new();
    for peak in r_peaks {
        let _ = writeln!(sidecar, "{peak}");
    }
    fsutil::write_atomic(&path_with_suffix(out, ".rpeaks"), sidecar.as_bytes()).map_err(output)
}

fn cmd_synth_beats(
    cfg: &RunConfig,
    out_dir: &Path,
    per_class: usize,
    noise: f64,
) -> Result<(), Failure> {
    if per_class == 0 {
        return Err(Failure::Usage("per-class count must be at least 1".into()));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| output(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut manifest = String::from("file,label\n");
    for class in [
        ClassLabel::Normal,
        ClassLabel::ImiType1,
        ClassLabel::ImiType2,
    ] {
        for variant in 0..per_class {
            let spec = preset_spec(class, cfg.seed.wrapping_add(variant as u64), noise);
            let beat = generate_synthetic_beat(&spec).map_err(data)?;
            let file = format!("{}-{variant:03}.csv", class.as_str());
            write_beat_csv(&out_dir.join(&file), &beat).map_err(output)?;
            let _ = writeln!(manifest, "{file},{}", class.as_str());
        }
    }
    fsutil::write_atomic(&out_dir.join("cohort.csv"), manifest.as_bytes()).map_err(output)
}

/// Appends a suffix to a path's final component, keeping the directory.
fn path_with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}
