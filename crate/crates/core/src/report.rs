//! Final analysis report and plot-ready pairing-strength compositions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cooccur::{Direction, OutlierDiagnostics, Pool};
use crate::interchange::CorpusBundle;
use crate::measures::{MeasureReport, Relationship, SkewLabel};
use crate::scalar::{display, Scalar};
use crate::topic::TopicId;
use crate::validate::ValidationReport;

pub const DEFAULT_TOP_K: usize = 25;
pub const DEFAULT_MERGE_BELOW: f64 = 0.05;
pub const REMAINING_LABEL: &str = "remaining";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing measures for direction {0}")]
    MissingDirection(Direction),
    #[error("topic {topic} of model {model} has no label")]
    UnknownTopic { model: u8, topic: TopicId },
    #[error("top_k must be positive")]
    ZeroTopK,
    #[error("merge_below must lie in [0, 1], got {0}")]
    MergeBelow(f64),
    #[error("malformed report: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub tool_version: String,
    pub corpus_1: String,
    pub corpus_2: String,
    pub pool: Pool,
    pub unique_threshold: f64,
    pub cosine_outlier: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicLabel {
    pub id: TopicId,
    pub label: String,
    pub native_size: usize,
}

/// Native topic with its strongest non-outlier cross topic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopPairRow<S> {
    pub native_topic: TopicId,
    pub native_label: String,
    pub native_size: usize,
    pub cross_topic: Option<TopicId>,
    pub cross_label: Option<String>,
    pub alignment_strength: S,
    pub display: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniqueTopicRow<S> {
    pub topic: TopicId,
    pub label: String,
    pub uniqueness: S,
    pub display: String,
}

/// One row of the corpus factor table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorRow<S> {
    pub native_corpus: String,
    pub c: S,
    pub c_w_minus_c: S,
    pub u: S,
    pub u_w_minus_u: S,
    pub a: S,
    pub a_w_minus_a: S,
    pub theta_label: SkewLabel,
    pub relationship: Relationship,
    /// Two-decimal strings in column order C, C_w−C, U, U_w−U, A, A_w−A.
    pub display: [String; 6],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport<S> {
    pub native_corpus: String,
    pub cross_corpus: String,
    pub native_topics: Vec<TopicLabel>,
    pub cross_topics: Vec<TopicLabel>,
    pub measures: MeasureReport<S>,
    pub validation: ValidationReport<S>,
    /// Sorted by native size, largest first.
    pub top_pairs: Vec<TopPairRow<S>>,
    pub unique_topics: Vec<UniqueTopicRow<S>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport<S> {
    pub metadata: ReportMetadata,
    pub direction_1to2: DirectionReport<S>,
    pub direction_2to1: DirectionReport<S>,
    pub outlier_diagnostics: OutlierDiagnostics<S>,
    pub factor_table: Vec<FactorRow<S>>,
}

fn labels_of(bundle: &CorpusBundle) -> Vec<TopicLabel> {
    bundle
        .topics()
        .iter()
        .map(|t| TopicLabel {
            id: t.id,
            label: t.label.clone(),
            native_size: t.native_size,
        })
        .collect()
}

fn find(labels: &[TopicLabel], model: u8, id: TopicId) -> Result<&TopicLabel, ReportError> {
    labels
        .iter()
        .find(|t| t.id == id)
        .ok_or(ReportError::UnknownTopic { model, topic: id })
}

fn model_numbers(direction: Direction) -> (u8, u8) {
    match direction {
        Direction::OneToTwo => (1, 2),
        Direction::TwoToOne => (2, 1),
    }
}

fn direction_report<S: Scalar>(
    native: &CorpusBundle,
    cross: &CorpusBundle,
    measures: MeasureReport<S>,
    validation: ValidationReport<S>,
) -> Result<DirectionReport<S>, ReportError> {
    let native_topics = labels_of(native);
    let cross_topics = labels_of(cross);
    let (native_model, cross_model) = model_numbers(measures.direction);

    // every referenced id must resolve
    for t in &measures.per_topic {
        find(&native_topics, native_model, t.topic)?;
        for p in &t.pairings {
            find(&cross_topics, cross_model, p.cross_topic)?;
        }
    }
    for d in &validation.discrepancies {
        find(&native_topics, native_model, d.native_topic)?;
        find(&cross_topics, cross_model, d.btm_label)?;
        find(&cross_topics, cross_model, d.cosine_label)?;
    }

    let mut top_pairs = Vec::new();
    for t in measures.per_topic.iter().filter(|t| !t.topic.is_outlier()) {
        let Some(sa) = t.alignment_strength else { continue };
        let meta = find(&native_topics, native_model, t.topic)?;
        let cross_label = match t.aligned_cross_topic {
            Some(c) => Some(find(&cross_topics, cross_model, c)?.label.clone()),
            None => None,
        };
        top_pairs.push(TopPairRow {
            native_topic: t.topic,
            native_label: meta.label.clone(),
            native_size: meta.native_size,
            cross_topic: t.aligned_cross_topic,
            cross_label,
            alignment_strength: sa,
            display: display(sa, 2),
        });
    }
    top_pairs.sort_by(|a, b| {
        b.native_size
            .cmp(&a.native_size)
            .then(a.native_topic.cmp(&b.native_topic))
    });

    let unique_topics = measures
        .unique_topics
        .iter()
        .map(|u| {
            Ok(UniqueTopicRow {
                topic: u.topic,
                label: find(&native_topics, native_model, u.topic)?.label.clone(),
                uniqueness: u.uniqueness,
                display: display(u.uniqueness, 2),
            })
        })
        .collect::<Result<_, ReportError>>()?;

    Ok(DirectionReport {
        native_corpus: native.corpus_id().to_string(),
        cross_corpus: cross.corpus_id().to_string(),
        native_topics,
        cross_topics,
        measures,
        validation,
        top_pairs,
        unique_topics,
    })
}

fn factor_row<S: Scalar>(d: &DirectionReport<S>) -> FactorRow<S> {
    let m = &d.measures;
    let values = [m.c, m.theta, m.u, m.u_skew, m.a, m.a_skew];
    FactorRow {
        native_corpus: d.native_corpus.clone(),
        c: m.c,
        c_w_minus_c: m.theta,
        u: m.u,
        u_w_minus_u: m.u_skew,
        a: m.a,
        a_w_minus_a: m.a_skew,
        theta_label: m.theta_label,
        relationship: m.relationship,
        display: values.map(|v| display(v, 2)),
    }
}

/// Measures and validation for one direction.
pub struct DirectionResults<S> {
    pub measures: MeasureReport<S>,
    pub validation: ValidationReport<S>,
}

/// Assembles the report. `directions` must hold exactly one entry per direction.
pub fn build_report<S: Scalar>(
    metadata: ReportMetadata,
    bundle1: &CorpusBundle,
    bundle2: &CorpusBundle,
    directions: Vec<DirectionResults<S>>,
    outlier_diagnostics: OutlierDiagnostics<S>,
) -> Result<AnalysisReport<S>, ReportError> {
    let mut one_to_two = None;
    let mut two_to_one = None;
    for d in directions {
        match d.measures.direction {
            Direction::OneToTwo => one_to_two = Some(d),
            Direction::TwoToOne => two_to_one = Some(d),
        }
    }
    let one_to_two = one_to_two.ok_or(ReportError::MissingDirection(Direction::OneToTwo))?;
    let two_to_one = two_to_one.ok_or(ReportError::MissingDirection(Direction::TwoToOne))?;

    let direction_1to2 = direction_report(bundle1, bundle2, one_to_two.measures, one_to_two.validation)?;
    let direction_2to1 = direction_report(bundle2, bundle1, two_to_one.measures, two_to_one.validation)?;
    let factor_table = vec![factor_row(&direction_1to2), factor_row(&direction_2to1)];
    let report = AnalysisReport {
        metadata,
        direction_1to2,
        direction_2to1,
        outlier_diagnostics,
        factor_table,
    };
    report.validate()?;
    Ok(report)
}

impl<S: Scalar> AnalysisReport<S> {
    pub fn directions(&self) -> [&DirectionReport<S>; 2] {
        [&self.direction_1to2, &self.direction_2to1]
    }

    /// Structural checks, also applied to reports read back from disk.
    pub fn validate(&self) -> Result<(), ReportError> {
        let bad = |m: String| Err(ReportError::Malformed(m));
        if self.direction_1to2.measures.direction != Direction::OneToTwo
            || self.direction_2to1.measures.direction != Direction::TwoToOne
        {
            return bad("directions out of place".into());
        }
        for d in self.directions() {
            let (native_model, cross_model) = model_numbers(d.measures.direction);
            if d.validation.direction != d.measures.direction {
                return bad(format!("validation direction mismatch in {}", d.measures.direction));
            }
            for t in &d.measures.per_topic {
                find(&d.native_topics, native_model, t.topic)?;
                for p in &t.pairings {
                    find(&d.cross_topics, cross_model, p.cross_topic)?;
                }
                let sum: S = t.pairings.iter().map(|p| p.strength).sum();
                if t.closeness_total.is_some() && (sum.to_f64_value() - 1.0).abs() > 1e-9 {
                    return bad(format!("pairings of topic {} sum to {sum}", t.topic));
                }
            }
            let m = &d.measures;
            if (m.c + m.u - S::one()).abs().to_f64_value() > 1e-9 {
                return bad(format!("C + U = {} in {}", m.c + m.u, m.direction));
            }
        }
        if self.factor_table.len() != 2 {
            return bad("factor table must have two rows".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let report: Self =
            serde_json::from_str(text).map_err(|e| ReportError::Malformed(e.to_string()))?;
        report.validate()?;
        Ok(report)
    }
}

/// One bar segment of a native topic's pairing-strength composition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSegment<S> {
    pub direction: Direction,
    pub native_topic: TopicId,
    pub native_label: String,
    /// 1-based position in the bar; ranked pairs first, then "remaining", then the outlier.
    pub rank: usize,
    pub cross_topic: Option<TopicId>,
    pub cross_label: String,
    pub strength: S,
    pub is_outlier: bool,
    pub is_remaining: bool,
}

/// Pairing-strength composition of the `top_k` largest native topics per
/// direction. Non-outlier pairs weaker than `merge_below` collapse into one
/// "remaining" segment; the cross outlier always gets its own segment.
pub fn plot_data<S: Scalar>(
    report: &AnalysisReport<S>,
    top_k: usize,
    merge_below: S,
) -> Result<Vec<PlotSegment<S>>, ReportError> {
    if top_k == 0 {
        return Err(ReportError::ZeroTopK);
    }
    let mb = merge_below.to_f64_value();
    if !(0.0..=1.0).contains(&mb) {
        return Err(ReportError::MergeBelow(mb));
    }
    let mut out = Vec::new();
    for d in report.directions() {
        let direction = d.measures.direction;
        let (_, cross_model) = model_numbers(direction);
        let mut topics: Vec<_> = d
            .measures
            .per_topic
            .iter()
            .filter(|t| !t.topic.is_outlier() && t.closeness_total.is_some())
            .map(|t| {
                let meta = d.native_topics.iter().find(|l| l.id == t.topic);
                (meta.map_or(0, |m| m.native_size), t)
            })
            .collect();
        topics.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.topic.cmp(&b.1.topic)));

        for (_, t) in topics.into_iter().take(top_k) {
            let native_label = d
                .native_topics
                .iter()
                .find(|l| l.id == t.topic)
                .map(|l| l.label.clone())
                .unwrap_or_default();
            let mut ranked: Vec<_> = t.pairings.iter().filter(|p| !p.cross_topic.is_outlier()).collect();
            ranked.sort_by(|a, b| {
                b.strength
                    .partial_cmp(&a.strength)
                    .expect("finite strength")
                    .then(a.cross_topic.cmp(&b.cross_topic))
            });
            let mut remaining = S::zero();
            let mut has_remaining = false;
            let mut segments = Vec::new();
            for p in ranked {
                if p.strength < merge_below {
                    remaining += p.strength;
                    has_remaining = true;
                } else {
                    segments.push((
                        Some(p.cross_topic),
                        find(&d.cross_topics, cross_model, p.cross_topic)?.label.clone(),
                        p.strength,
                        false,
                        false,
                    ));
                }
            }
            if has_remaining {
                segments.push((None, REMAINING_LABEL.to_string(), remaining, false, true));
            }
            if let Some(p) = t.pairings.iter().find(|p| p.cross_topic.is_outlier()) {
                let label = find(&d.cross_topics, cross_model, p.cross_topic)?.label.clone();
                segments.push((Some(p.cross_topic), label, p.strength, true, false));
            }
            for (k, (cross_topic, cross_label, strength, is_outlier, is_remaining)) in
                segments.into_iter().enumerate()
            {
                out.push(PlotSegment {
                    direction,
                    native_topic: t.topic,
                    native_label: native_label.clone(),
                    rank: k + 1,
                    cross_topic,
                    cross_label,
                    strength,
                    is_outlier,
                    is_remaining,
                });
            }
        }
    }
    Ok(out)
}

/// CSV `direction,native_topic,native_label,rank,cross_topic,cross_label,strength,is_outlier,is_remaining`.
pub fn plot_data_csv<S: Scalar>(segments: &[PlotSegment<S>]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "direction",
            "native_topic",
            "native_label",
            "rank",
            "cross_topic",
            "cross_label",
            "strength",
            "is_outlier",
            "is_remaining",
        ])
        .expect("in-memory csv write");
    for s in segments {
        writer
            .write_record([
                s.direction.as_str().to_string(),
                s.native_topic.to_string(),
                s.native_label.clone(),
                s.rank.to_string(),
                s.cross_topic.map(|t| t.to_string()).unwrap_or_default(),
                s.cross_label.clone(),
                s.strength.to_string(),
                s.is_outlier.to_string(),
                s.is_remaining.to_string(),
            ])
            .expect("in-memory csv write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
}
