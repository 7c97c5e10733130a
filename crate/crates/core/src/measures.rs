//! Corpus- and topic-level measures over a [`StrengthMatrix`].
//!
//! All corpus factors average over the *defined, non-outlier* native topics
//! (rows with at least one document). Closeness sums run over non-outlier
//! cross topics; uniqueness is the cross-outlier column. The native outlier
//! row is reported per topic but never enters a corpus factor.
//!
//! | factor | unweighted | size-weighted |
//! |--------|-----------|---------------|
//! | closeness | `C = Σ_i Σ_{j≥0} S_ij / T` | `C_w = Σ_i n_i Σ_{j≥0} S_ij / Σ_i n_i` |
//! | uniqueness | `U = Σ_i S_i,-1 / T` | `U_w = Σ_i n_i S_i,-1 / Σ_i n_i` |
//! | alignment | `A = Σ_i SA_i / T` | `A_w = Σ_i n_i SA_i / Σ_i n_i` |
//!
//! with `SA_i = max_{j≥0} S_ij`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cooccur::{Direction, DirectionDiagnostics, Pool, StrengthMatrix};
use crate::scalar::{display, Scalar};
use crate::topic::TopicId;

pub const DEFAULT_UNIQUE_THRESHOLD: f64 = 0.5;
/// |C_w − C| below this reads as size-independent.
pub const SKEW_CUTOFF: f64 = 0.1;
/// Low/high cutoff for both U and A.
pub const RELATIONSHIP_CUTOFF: f64 = 0.5;
/// Slack allowed on `A ≤ 1 − U` before it counts as a broken invariant.
pub const RELATIONSHIP_SLACK: f64 = 1e-9;
/// Slack on the complement identities checked while building a report.
pub const COMPLEMENT_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("no defined native topics (direction {0})")]
    NoNativeTopics(Direction),
    #[error("alignment inputs differ in length: {sa} strengths, {sizes} sizes")]
    LengthMismatch { sa: usize, sizes: usize },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkewLabel {
    LargerTopicDriven,
    SizeIndependent,
    SmallerTopicDriven,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relationship {
    /// Low U, low A: the cross corpus covers the native themes in more detail.
    OverlapMultifaceted,
    /// Low U, high A: both corpora look like subsets of a common parent.
    OverlapSubset,
    /// High U, low A.
    Independent,
    /// Not covered by the three cases above (only U = A = 0.5).
    Intermediate,
}

/// Defined non-outlier native rows: (row index, topic, strengths, n(D_i)).
fn defined_rows<S: Scalar>(sm: &StrengthMatrix<S>) -> impl Iterator<Item = (usize, TopicId, &[S], u64)> {
    sm.native_topics
        .iter()
        .zip(&sm.rows)
        .zip(&sm.native_sizes)
        .enumerate()
        .filter_map(|(i, ((&t, row), &n))| match row {
            Some(row) if !t.is_outlier() => Some((i, t, row.as_slice(), n)),
            _ => None,
        })
}

fn closeness_total<S: Scalar>(sm: &StrengthMatrix<S>, row: &[S]) -> S {
    row.iter()
        .zip(&sm.cross_topics)
        .filter(|(_, t)| !t.is_outlier())
        .map(|(&s, _)| s)
        .sum()
}

fn uniqueness<S: Scalar>(sm: &StrengthMatrix<S>, row: &[S]) -> S {
    sm.cross_outlier_column().map_or(S::zero(), |j| row[j])
}

/// Unweighted and size-weighted mean of a per-topic quantity.
fn means<S: Scalar>(
    sm: &StrengthMatrix<S>,
    value: impl Fn(&[S]) -> S,
) -> Result<(S, S), MeasureError> {
    let mut count = 0u64;
    let (mut plain, mut weighted, mut weight) = (S::zero(), S::zero(), S::zero());
    for (_, _, row, n) in defined_rows(sm) {
        let v = value(row);
        let n = S::from_count(n);
        count += 1;
        plain += v;
        weighted += n * v;
        weight += n;
    }
    if count == 0 {
        return Err(MeasureError::NoNativeTopics(sm.direction));
    }
    Ok((plain / S::from_count(count), weighted / weight))
}

/// Corpus closeness `(C, C_w)`.
pub fn corpus_closeness<S: Scalar>(sm: &StrengthMatrix<S>) -> Result<(S, S), MeasureError> {
    means(sm, |row| closeness_total(sm, row))
}

/// Corpus uniqueness `(U, U_w)`, identically zero when the cross model has no outlier topic.
pub fn corpus_uniqueness<S: Scalar>(sm: &StrengthMatrix<S>) -> Result<(S, S), MeasureError> {
    means(sm, |row| uniqueness(sm, row))
}

/// `θ = C_w − C` and its reading.
pub fn closeness_skew<S: Scalar>(c: S, c_w: S) -> (S, SkewLabel) {
    let theta = c_w - c;
    let label = if theta >= S::lit(SKEW_CUTOFF) {
        SkewLabel::LargerTopicDriven
    } else if theta <= -S::lit(SKEW_CUTOFF) {
        SkewLabel::SmallerTopicDriven
    } else {
        SkewLabel::SizeIndependent
    };
    (theta, label)
}

/// Highest non-outlier pairing strength of a native topic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicAlignment<S> {
    pub topic: TopicId,
    pub strength: S,
    /// `None` when the cross model has no non-outlier topic.
    pub cross_topic: Option<TopicId>,
    pub native_size: u64,
}

fn row_alignment<S: Scalar>(sm: &StrengthMatrix<S>, row: &[S]) -> (S, Option<TopicId>) {
    let mut best: Option<(S, TopicId)> = None;
    for (&s, &t) in row.iter().zip(&sm.cross_topics) {
        if t.is_outlier() {
            continue;
        }
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, t));
        }
    }
    best.map_or((S::zero(), None), |(s, t)| (s, Some(t)))
}

/// `SA(t_i)` for every defined non-outlier native topic; ties go to the smaller cross id.
pub fn alignment_strength<S: Scalar>(sm: &StrengthMatrix<S>) -> Vec<TopicAlignment<S>> {
    defined_rows(sm)
        .map(|(_, topic, row, n)| {
            let (strength, cross_topic) = row_alignment(sm, row);
            TopicAlignment {
                topic,
                strength,
                cross_topic,
                native_size: n,
            }
        })
        .collect()
}

/// Corpus alignment `(A, A_w)` from per-topic strengths and sizes.
pub fn corpus_alignment<S: Scalar>(sa: &[S], sizes: &[u64]) -> Result<(S, S), MeasureError> {
    if sa.len() != sizes.len() {
        return Err(MeasureError::LengthMismatch {
            sa: sa.len(),
            sizes: sizes.len(),
        });
    }
    if sa.is_empty() {
        return Err(MeasureError::OutOfRange("no native topics to average".into()));
    }
    let plain: S = sa.iter().copied().sum::<S>() / S::from_count(sa.len() as u64);
    let weight: S = sizes.iter().map(|&n| S::from_count(n)).sum();
    let weighted: S = sa
        .iter()
        .zip(sizes)
        .map(|(&s, &n)| S::from_count(n) * s)
        .sum();
    Ok((plain, weighted / weight))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniqueTopic<S> {
    pub topic: TopicId,
    pub uniqueness: S,
}

/// Native topics whose uniqueness is at least `threshold`, most unique first.
pub fn unique_topics<S: Scalar>(sm: &StrengthMatrix<S>, threshold: S) -> Vec<UniqueTopic<S>> {
    let Some(col) = sm.cross_outlier_column() else {
        log::warn!("{}: cross model has no outlier topic; no unique topics", sm.direction);
        return Vec::new();
    };
    let mut out: Vec<UniqueTopic<S>> = defined_rows(sm)
        .filter(|(_, _, row, _)| row[col] >= threshold)
        .map(|(_, topic, row, _)| UniqueTopic {
            topic,
            uniqueness: row[col],
        })
        .collect();
    out.sort_by(|a, b| {
        b.uniqueness
            .partial_cmp(&a.uniqueness)
            .expect("finite uniqueness")
            .then(a.topic.cmp(&b.topic))
    });
    out
}

/// Reads the corpus relationship off the (U, A) plane.
pub fn classify_relationship<S: Scalar>(u: S, a: S) -> Result<Relationship, MeasureError> {
    let in_unit = |x: S| x >= S::zero() && x <= S::one();
    if !in_unit(u) || !in_unit(a) {
        return Err(MeasureError::OutOfRange(format!("U={u}, A={a} must lie in [0, 1]")));
    }
    if u + a > S::one() + S::tolerance(RELATIONSHIP_SLACK) {
        return Err(MeasureError::InvariantViolation(format!(
            "A ≤ 1 − U does not hold: U={u}, A={a}"
        )));
    }
    let cut = S::lit(RELATIONSHIP_CUTOFF);
    Ok(match (u >= cut, a >= cut) {
        (false, false) => Relationship::OverlapMultifaceted,
        (false, true) => Relationship::OverlapSubset,
        (true, false) => Relationship::Independent,
        (true, true) => Relationship::Intermediate,
    })
}

/// Nonzero entry of a strength row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pairing<S> {
    pub cross_topic: TopicId,
    pub count: u64,
    pub strength: S,
}

/// Per-native-topic view; the strength fields are `None` for undefined rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicMeasures<S> {
    pub topic: TopicId,
    /// n(D_i) under the report's pool mode.
    pub pooled_size: u64,
    /// Sum of the topic's non-outlier pairing strengths.
    pub closeness_total: Option<S>,
    pub uniqueness: Option<S>,
    pub alignment_strength: Option<S>,
    pub aligned_cross_topic: Option<TopicId>,
    pub pairings: Vec<Pairing<S>>,
}

/// Rounded strings for the scalar factors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorDisplay {
    pub c: String,
    pub c_w: String,
    pub theta: String,
    pub u: String,
    pub u_w: String,
    pub u_skew: String,
    pub a: String,
    pub a_w: String,
    pub a_skew: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport<S> {
    pub direction: Direction,
    pub pool: Pool,
    pub c: S,
    pub c_w: S,
    pub theta: S,
    pub theta_label: SkewLabel,
    pub u: S,
    pub u_w: S,
    pub u_skew: S,
    pub a: S,
    pub a_w: S,
    pub a_skew: S,
    pub relationship: Relationship,
    pub unique_threshold: S,
    pub unique_topics: Vec<UniqueTopic<S>>,
    pub per_topic: Vec<TopicMeasures<S>>,
    pub diagnostics: Option<DirectionDiagnostics<S>>,
    pub warnings: Vec<String>,
    pub display: FactorDisplay,
}

fn check_unit<S: Scalar>(name: &str, x: S, lo: S) -> Result<(), MeasureError> {
    let eps = S::tolerance(COMPLEMENT_SLACK);
    if x < lo - eps || x > S::one() + eps {
        return Err(MeasureError::InvariantViolation(format!("{name}={x} outside [{lo}, 1]")));
    }
    Ok(())
}

/// All measures of one direction.
pub fn measure_report<S: Scalar>(
    sm: &StrengthMatrix<S>,
    unique_threshold: S,
) -> Result<MeasureReport<S>, MeasureError> {
    if !(unique_threshold > S::zero() && unique_threshold <= S::one()) {
        return Err(MeasureError::OutOfRange(format!(
            "unique-topic threshold {unique_threshold} must lie in (0, 1]"
        )));
    }
    let mut warnings = sm.warnings.clone();
    if sm.cross_outlier_column().is_none() {
        warnings.push(format!(
            "{}: cross model has no outlier topic (no-outlier mode); uniqueness is reported as 0",
            sm.direction
        ));
    }

    let (c, c_w) = corpus_closeness(sm)?;
    let (u, u_w) = corpus_uniqueness(sm)?;
    let alignments = alignment_strength(sm);
    let sa: Vec<S> = alignments.iter().map(|t| t.strength).collect();
    let sizes: Vec<u64> = alignments.iter().map(|t| t.native_size).collect();
    let (a, a_w) = corpus_alignment(&sa, &sizes)?;

    for (name, x) in [("C", c), ("C_w", c_w), ("U", u), ("U_w", u_w), ("A", a), ("A_w", a_w)] {
        check_unit(name, x, S::zero())?;
    }
    let slack = S::tolerance(COMPLEMENT_SLACK);
    if (c + u - S::one()).abs() > slack || (c_w + u_w - S::one()).abs() > slack {
        return Err(MeasureError::InvariantViolation(format!(
            "closeness and uniqueness are not complements: C+U={}, C_w+U_w={}",
            c + u,
            c_w + u_w
        )));
    }

    let (theta, theta_label) = closeness_skew(c, c_w);
    let relationship = classify_relationship(u, a)?;

    let per_topic = sm
        .native_topics
        .iter()
        .zip(&sm.rows)
        .zip(sm.counts.iter().zip(&sm.native_sizes))
        .map(|((&topic, row), (counts, &n))| {
            let pairings = match row {
                Some(row) => row
                    .iter()
                    .zip(counts)
                    .zip(&sm.cross_topics)
                    .filter(|((_, &count), _)| count > 0)
                    .map(|((&strength, &count), &cross_topic)| Pairing {
                        cross_topic,
                        count,
                        strength,
                    })
                    .collect(),
                None => Vec::new(),
            };
            let (sa, aligned) = match row {
                Some(row) => {
                    let (s, t) = row_alignment(sm, row);
                    (Some(s), t)
                }
                None => (None, None),
            };
            TopicMeasures {
                topic,
                pooled_size: n,
                closeness_total: row.as_deref().map(|r| closeness_total(sm, r)),
                uniqueness: row.as_deref().map(|r| uniqueness(sm, r)),
                alignment_strength: sa,
                aligned_cross_topic: aligned,
                pairings,
            }
        })
        .collect();

    let display = FactorDisplay {
        c: display(c, 4),
        c_w: display(c_w, 4),
        theta: display(theta, 4),
        u: display(u, 4),
        u_w: display(u_w, 4),
        u_skew: display(u_w - u, 4),
        a: display(a, 4),
        a_w: display(a_w, 4),
        a_skew: display(a_w - a, 4),
    };

    Ok(MeasureReport {
        direction: sm.direction,
        pool: sm.pool,
        c,
        c_w,
        theta,
        theta_label,
        u,
        u_w,
        u_skew: u_w - u,
        a,
        a_w,
        a_skew: a_w - a,
        relationship,
        unique_threshold,
        unique_topics: unique_topics(sm, unique_threshold),
        per_topic,
        diagnostics: None,
        warnings,
        display,
    })
}
