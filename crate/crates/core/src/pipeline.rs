//! End-to-end batch runs: load → cross-assign → count → strengths → measures
//! → validation → report, plus the single-stage runs behind the CLI.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cooccur::{count_pairs, outlier_diagnostics, pairing_strengths, Direction, PairCounts, Pool};
use crate::error::BtmError;
use crate::interchange::{load_bundle, write_bundle, CorpusBundle};
use crate::matcher::{assign_cross_topics, build_assignment_table, AssignmentRow, SourceCorpus};
use crate::measures::{measure_report, DEFAULT_UNIQUE_THRESHOLD};
use crate::report::{
    build_report, plot_data, plot_data_csv, DirectionResults, ReportMetadata, DEFAULT_MERGE_BELOW,
    DEFAULT_TOP_K,
};
use crate::synth::{generate_pair, SynthConfig};
use crate::validate::validation_report;
use crate::{AnalysisReport, AssignmentTable, MeasureReport, PlotSegment, Real, StrengthMatrix, ValidationReport};

pub const REPORT_FILE: &str = "report.json";
pub const PLOT_DATA_FILE: &str = "plot_data.csv";
pub const ASSIGNMENTS_TABLE_FILE: &str = "assignments_table.csv";
pub const VALIDATION_FILE: &str = "validation.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// Knobs that change what the analysis computes.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisOptions {
    pub pool: Pool,
    pub unique_threshold: Real,
    pub cosine_outlier: bool,
    pub top_k: usize,
    pub merge_below: Real,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            pool: Pool::Both,
            unique_threshold: DEFAULT_UNIQUE_THRESHOLD,
            cosine_outlier: true,
            top_k: DEFAULT_TOP_K,
            merge_below: DEFAULT_MERGE_BELOW,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<(), BtmError> {
        let in_unit = |x: Real| x > 0.0 && x <= 1.0;
        if !in_unit(self.unique_threshold) {
            return Err(BtmError::Config(format!(
                "unique-threshold {} must lie in (0, 1]",
                self.unique_threshold
            )));
        }
        if !in_unit(self.merge_below) {
            return Err(BtmError::Config(format!(
                "merge-below {} must lie in (0, 1]",
                self.merge_below
            )));
        }
        if self.top_k == 0 {
            return Err(BtmError::Config("top-k must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub bundle_1: PathBuf,
    pub bundle_2: PathBuf,
    pub options: AnalysisOptions,
    pub out_dir: PathBuf,
    /// Worker threads for cross assignment; never changes results.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(bundle_1: impl Into<PathBuf>, bundle_2: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            bundle_1: bundle_1.into(),
            bundle_2: bundle_2.into(),
            options: AnalysisOptions::default(),
            out_dir: out_dir.into(),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<(), BtmError> {
        self.options.validate()?;
        if self.bundle_1 == self.bundle_2 {
            return Err(BtmError::Config("--c1 and --c2 must be different bundles".into()));
        }
        if self.threads == Some(0) {
            return Err(BtmError::Config("--threads must be positive".into()));
        }
        Ok(())
    }
}

/// Everything computed by [`analyze`].
#[derive(Clone, Debug)]
pub struct Analysis {
    pub table: AssignmentTable,
    pub strengths: [StrengthMatrix; 2],
    pub report: AnalysisReport,
    pub plot: Vec<PlotSegment>,
}

/// Pairing strengths with the row-simplex invariant enforced.
pub fn checked_strengths(counts: &PairCounts) -> Result<StrengthMatrix, BtmError> {
    let sm = pairing_strengths::<Real>(counts)?;
    sm.check_simplex()?;
    Ok(sm)
}

/// Measures of one direction, starting from raw counts.
pub fn measure_direction(counts: &PairCounts, unique_threshold: Real) -> Result<MeasureReport, BtmError> {
    let sm = checked_strengths(counts)?;
    Ok(measure_report(&sm, unique_threshold)?)
}

fn check_dims(b1: &CorpusBundle, b2: &CorpusBundle) -> Result<(), BtmError> {
    if b1.dim() != b2.dim() {
        return Err(crate::matcher::MatchError::DimensionMismatch {
            left: b1.dim(),
            right: b2.dim(),
        }
        .into());
    }
    Ok(())
}

fn native_and_cross<'a>(
    direction: Direction,
    b1: &'a CorpusBundle,
    b2: &'a CorpusBundle,
) -> (&'a CorpusBundle, &'a CorpusBundle) {
    match direction {
        Direction::OneToTwo => (b1, b2),
        Direction::TwoToOne => (b2, b1),
    }
}

/// Full in-memory analysis of two loaded bundles.
pub fn analyze(b1: &CorpusBundle, b2: &CorpusBundle, options: &AnalysisOptions) -> Result<Analysis, BtmError> {
    options.validate()?;
    check_dims(b1, b2)?;
    let table = build_assignment_table::<Real>(b1, b2)?;

    let mut strengths = Vec::with_capacity(2);
    let mut results = Vec::with_capacity(2);
    for direction in Direction::BOTH {
        let counts = count_pairs(&table, direction, options.pool)?;
        let sm = checked_strengths(&counts)?;
        let measures = measure_report(&sm, options.unique_threshold)?;
        let (native, cross) = native_and_cross(direction, b1, b2);
        let validation = validation_report(&sm, native, cross, options.cosine_outlier)?;
        strengths.push(sm);
        results.push(DirectionResults { measures, validation });
    }
    let [s12, s21]: [StrengthMatrix; 2] = strengths.try_into().expect("two directions");

    let diagnostics = outlier_diagnostics(&s12, &s21);
    if let crate::cooccur::OutlierDiagnostics::Computed { directions } = &diagnostics {
        for (r, d) in results.iter_mut().zip(directions) {
            r.measures.diagnostics = Some(d.clone());
        }
    }

    let metadata = ReportMetadata {
        tool: "btm".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        corpus_1: b1.corpus_id().to_string(),
        corpus_2: b2.corpus_id().to_string(),
        pool: options.pool,
        unique_threshold: options.unique_threshold,
        cosine_outlier: options.cosine_outlier,
    };
    let report = build_report(metadata, b1, b2, results, diagnostics)?;
    let plot = plot_data(&report, options.top_k, options.merge_below)?;
    Ok(Analysis {
        table,
        strengths: [s12, s21],
        report,
        plot,
    })
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, BtmError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| BtmError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<(), BtmError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| BtmError::Output {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), BtmError> {
    fs::create_dir_all(dir).map_err(|source| BtmError::Output {
        path: dir.display().to_string(),
        source,
    })
}

fn load_pair(config: &RunConfig) -> Result<(CorpusBundle, CorpusBundle), BtmError> {
    let b1 = load_bundle(&config.bundle_1)?;
    let b2 = load_bundle(&config.bundle_2)?;
    check_dims(&b1, &b2)?;
    Ok((b1, b2))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Runs the whole pipeline and writes `report.json`, `plot_data.csv`,
/// `assignments_table.csv` and one `strengths_<direction>.csv` per direction.
pub fn run_analyze(config: &RunConfig) -> Result<AnalysisReport, BtmError> {
    config.validate()?;
    let (b1, b2) = load_pair(config)?;
    let analysis = with_threads(config.threads, || analyze(&b1, &b2, &config.options))??;

    let out = &config.out_dir;
    ensure_dir(out)?;
    write_file(out, REPORT_FILE, analysis.report.to_json())?;
    write_file(out, PLOT_DATA_FILE, plot_data_csv(&analysis.plot))?;
    write_file(out, ASSIGNMENTS_TABLE_FILE, analysis.table.to_csv())?;
    for sm in &analysis.strengths {
        write_file(out, &format!("strengths_{}.csv", sm.direction), sm.to_csv())?;
    }
    log::info!("wrote analysis of {} vs {} to {}", b1.corpus_id(), b2.corpus_id(), out.display());
    Ok(analysis.report)
}

/// Cross assignment of one model onto the other corpus. `model_1_on_2` applies
/// model 1 to corpus 2 (T12); otherwise model 2 is applied to corpus 1 (T21).
/// Writes `assignments_table.csv` with the rows of the assigned corpus.
pub fn run_match(
    bundle_1: &Path,
    bundle_2: &Path,
    model_1_on_2: bool,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<AssignmentTable, BtmError> {
    if threads == Some(0) {
        return Err(BtmError::Config("--threads must be positive".into()));
    }
    let b1 = load_bundle(bundle_1)?;
    let b2 = load_bundle(bundle_2)?;
    check_dims(&b1, &b2)?;
    let (docs, model) = if model_1_on_2 { (&b2, &b1) } else { (&b1, &b2) };
    let cross = with_threads(threads, || assign_cross_topics::<Real>(docs, model))??;
    let rows = docs
        .native_assignments()
        .iter()
        .zip(cross)
        .map(|(&native, c)| {
            let (source_corpus, model1_topic, model2_topic) = if model_1_on_2 {
                (SourceCorpus::Two, c.topic, native)
            } else {
                (SourceCorpus::One, native, c.topic)
            };
            AssignmentRow {
                doc_id: c.doc_id,
                source_corpus,
                model1_topic,
                model2_topic,
                cross_similarity: c.similarity,
            }
        })
        .collect();
    let table = AssignmentTable {
        model1_topics: b1.topic_ids(),
        model2_topics: b2.topic_ids(),
        rows,
    };
    ensure_dir(out_dir)?;
    write_file(out_dir, ASSIGNMENTS_TABLE_FILE, table.to_csv())?;
    Ok(table)
}

/// Kappa validation only; writes `validation.json` with one report per direction.
pub fn run_validate(config: &RunConfig) -> Result<Vec<ValidationReport>, BtmError> {
    config.validate()?;
    let (b1, b2) = load_pair(config)?;
    let reports = with_threads(config.threads, || -> Result<Vec<ValidationReport>, BtmError> {
        let table = build_assignment_table::<Real>(&b1, &b2)?;
        Direction::BOTH
            .into_iter()
            .map(|direction| {
                let sm = checked_strengths(&count_pairs(&table, direction, config.options.pool)?)?;
                let (native, cross) = native_and_cross(direction, &b1, &b2);
                Ok(validation_report(&sm, native, cross, config.options.cosine_outlier)?)
            })
            .collect()
    })??;
    ensure_dir(&config.out_dir)?;
    write_file(&config.out_dir, VALIDATION_FILE, to_json(&reports))?;
    Ok(reports)
}

/// Recomputes `plot_data.csv` from an existing `report.json`.
pub fn run_plot_data(
    report_path: &Path,
    top_k: usize,
    merge_below: Real,
    out_dir: &Path,
) -> Result<Vec<PlotSegment>, BtmError> {
    let text = fs::read_to_string(report_path).map_err(|source| BtmError::Output {
        path: report_path.display().to_string(),
        source,
    })?;
    let report = AnalysisReport::from_json(&text)?;
    let segments = plot_data(&report, top_k, merge_below)?;
    ensure_dir(out_dir)?;
    write_file(out_dir, PLOT_DATA_FILE, plot_data_csv(&segments))?;
    Ok(segments)
}

/// Writes `corpus_1/`, `corpus_2/` and `ground_truth.json` under `out_dir`.
pub fn run_synth(config: &SynthConfig, out_dir: &Path) -> Result<(), BtmError> {
    let (b1, b2, truth) = generate_pair(config)?;
    ensure_dir(out_dir)?;
    write_bundle(&b1, out_dir.join("corpus_1"))?;
    write_bundle(&b2, out_dir.join("corpus_2"))?;
    write_file(out_dir, GROUND_TRUTH_FILE, to_json(&truth))?;
    Ok(())
}
