//! Native/cross topic pair tallies and pairing strengths.
//!
//! For a direction with native model `M` and cross model `M̃`, `D_i` is the set
//! of documents whose `M` topic is `t_i` and `D_ij` the subset whose `M̃` topic
//! is `t̃_j`. The pairing strength is `S(t_i, t̃_j) = n(D_ij) / n(D_i)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcher::{AssignmentTable, SourceCorpus};
use crate::scalar::Scalar;
use crate::topic::{index_of, TopicId};

/// Tolerance on the row-simplex invariant.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;
/// Outlier-outlier pairing strength at or above which the pairing is expected.
pub const OUTLIER_PAIR_EXPECTED: f64 = 0.5;
/// Outlier-outlier pairing strength below which the pairing is anomalous.
pub const OUTLIER_PAIR_ANOMALOUS: f64 = 0.1;

#[derive(Debug, Error)]
pub enum CooccurError {
    #[error("assignment table references topic {topic} unknown to model {model}")]
    UnknownTopic { topic: TopicId, model: u8 },
    #[error("count matrix shape does not match its topic lists")]
    Shape,
    #[error("row-simplex violated for native topic {topic} ({direction}): strengths sum to {sum}")]
    SimplexViolation {
        direction: Direction,
        topic: TopicId,
        sum: f64,
    },
}

/// Which model supplies the native topics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Model 1 topics are native, model 2 topics are cross.
    #[serde(rename = "1to2")]
    OneToTwo,
    #[serde(rename = "2to1")]
    TwoToOne,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::OneToTwo, Direction::TwoToOne];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::OneToTwo => "1to2",
            Direction::TwoToOne => "2to1",
        }
    }

    /// The corpus whose model supplies the native topics.
    pub fn native_corpus(self) -> SourceCorpus {
        match self {
            Direction::OneToTwo => SourceCorpus::One,
            Direction::TwoToOne => SourceCorpus::Two,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which documents make up `D_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pool {
    /// Documents of both corpora.
    #[default]
    Both,
    /// Only documents of the native corpus.
    NativeOnly,
}

impl Pool {
    pub fn as_str(self) -> &'static str {
        match self {
            Pool::Both => "both",
            Pool::NativeOnly => "native-only",
        }
    }
}

/// Contingency table of native × cross topics for one direction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub direction: Direction,
    pub pool: Pool,
    pub native_topics: Vec<TopicId>,
    pub cross_topics: Vec<TopicId>,
    /// `counts[i][j]` = n(D_ij), rows follow `native_topics`, columns `cross_topics`.
    pub counts: Vec<Vec<u64>>,
    /// n(D_i)
    pub native_totals: Vec<u64>,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.native_totals.iter().sum()
    }
}

pub fn count_pairs<S: Scalar>(
    table: &AssignmentTable<S>,
    direction: Direction,
    pool: Pool,
) -> Result<PairCounts, CooccurError> {
    let (native_topics, cross_topics, native_model, cross_model) = match direction {
        Direction::OneToTwo => (&table.model1_topics, &table.model2_topics, 1, 2),
        Direction::TwoToOne => (&table.model2_topics, &table.model1_topics, 2, 1),
    };
    let mut counts = vec![vec![0u64; cross_topics.len()]; native_topics.len()];
    let mut native_totals = vec![0u64; native_topics.len()];
    for row in &table.rows {
        if pool == Pool::NativeOnly && row.source_corpus != direction.native_corpus() {
            continue;
        }
        let (native, cross) = match direction {
            Direction::OneToTwo => (row.model1_topic, row.model2_topic),
            Direction::TwoToOne => (row.model2_topic, row.model1_topic),
        };
        let i = index_of(native_topics, native).ok_or(CooccurError::UnknownTopic {
            topic: native,
            model: native_model,
        })?;
        let j = index_of(cross_topics, cross).ok_or(CooccurError::UnknownTopic {
            topic: cross,
            model: cross_model,
        })?;
        counts[i][j] += 1;
        native_totals[i] += 1;
    }
    Ok(PairCounts {
        direction,
        pool,
        native_topics: native_topics.clone(),
        cross_topics: cross_topics.clone(),
        counts,
        native_totals,
    })
}

/// Row-normalized pairing strengths for one direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrengthMatrix<S> {
    pub direction: Direction,
    pub pool: Pool,
    pub native_topics: Vec<TopicId>,
    pub cross_topics: Vec<TopicId>,
    /// `None` marks a native topic with n(D_i) = 0.
    pub rows: Vec<Option<Vec<S>>>,
    pub counts: Vec<Vec<u64>>,
    pub native_sizes: Vec<u64>,
    pub warnings: Vec<String>,
}

pub fn pairing_strengths<S: Scalar>(counts: &PairCounts) -> Result<StrengthMatrix<S>, CooccurError> {
    if counts.counts.len() != counts.native_topics.len()
        || counts.native_totals.len() != counts.native_topics.len()
        || counts
            .counts
            .iter()
            .any(|row| row.len() != counts.cross_topics.len())
    {
        return Err(CooccurError::Shape);
    }
    let mut warnings = Vec::new();
    let rows = counts
        .counts
        .iter()
        .zip(&counts.native_totals)
        .zip(&counts.native_topics)
        .map(|((row, &total), &topic)| {
            if total == 0 {
                warnings.push(format!(
                    "{}: native topic {topic} has no documents; row undefined",
                    counts.direction
                ));
                return None;
            }
            let total = S::from_count(total);
            Some(row.iter().map(|&c| S::from_count(c) / total).collect())
        })
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(StrengthMatrix {
        direction: counts.direction,
        pool: counts.pool,
        native_topics: counts.native_topics.clone(),
        cross_topics: counts.cross_topics.clone(),
        rows,
        counts: counts.counts.clone(),
        native_sizes: counts.native_totals.clone(),
        warnings,
    })
}

impl<S: Scalar> StrengthMatrix<S> {
    pub fn row(&self, native: TopicId) -> Option<&[S]> {
        index_of(&self.native_topics, native).and_then(|i| self.rows[i].as_deref())
    }

    pub fn get(&self, native: TopicId, cross: TopicId) -> Option<S> {
        let j = index_of(&self.cross_topics, cross)?;
        self.row(native).map(|row| row[j])
    }

    /// Column index of the cross outlier topic, if the cross model has one.
    pub fn cross_outlier_column(&self) -> Option<usize> {
        index_of(&self.cross_topics, TopicId::OUTLIER)
    }

    /// Every defined row must sum to one.
    pub fn check_simplex(&self) -> Result<(), CooccurError> {
        for (row, &topic) in self.rows.iter().zip(&self.native_topics) {
            if let Some(row) = row {
                let sum: S = row.iter().copied().sum();
                // NaN sums fail too
                if (sum - S::one()).abs() > S::tolerance(SIMPLEX_TOLERANCE) || sum.is_nan() {
                    let sum = sum.to_f64_value();
                    return Err(CooccurError::SimplexViolation {
                        direction: self.direction,
                        topic,
                        sum,
                    });
                }
            }
        }
        Ok(())
    }

    /// CSV `native_topic,cross_topic,count,strength` over the defined rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("native_topic,cross_topic,count,strength\n");
        for ((row, counts), native) in self.rows.iter().zip(&self.counts).zip(&self.native_topics) {
            let Some(row) = row else { continue };
            for ((s, c), cross) in row.iter().zip(counts).zip(&self.cross_topics) {
                out.push_str(&format!("{native},{cross},{c},{s}\n"));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierPairFlag {
    Expected,
    Moderate,
    AnomalousLow,
}

impl OutlierPairFlag {
    pub fn from_strength(s: f64) -> Self {
        if s >= OUTLIER_PAIR_EXPECTED {
            OutlierPairFlag::Expected
        } else if s < OUTLIER_PAIR_ANOMALOUS {
            OutlierPairFlag::AnomalousLow
        } else {
            OutlierPairFlag::Moderate
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionDiagnostics<S> {
    pub direction: Direction,
    /// S(t_-1, t̃_-1)
    pub outlier_pair_strength: S,
    pub flag: OutlierPairFlag,
    /// Non-outlier native topics whose strongest pairing is the cross outlier.
    pub topics_paired_with_outlier: Vec<TopicId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum OutlierDiagnostics<S> {
    NotApplicable { reason: String },
    Computed { directions: Vec<DirectionDiagnostics<S>> },
}

fn direction_diagnostics<S: Scalar>(sm: &StrengthMatrix<S>) -> Result<DirectionDiagnostics<S>, String> {
    let col = sm
        .cross_outlier_column()
        .ok_or_else(|| format!("{}: cross model has no outlier topic", sm.direction))?;
    if index_of(&sm.native_topics, TopicId::OUTLIER).is_none() {
        return Err(format!("{}: native model has no outlier topic", sm.direction));
    }
    let outlier_row = sm
        .row(TopicId::OUTLIER)
        .ok_or_else(|| format!("{}: native outlier topic has no documents", sm.direction))?;
    let strength = outlier_row[col];
    let topics_paired_with_outlier = sm
        .native_topics
        .iter()
        .zip(&sm.rows)
        .filter(|(t, _)| !t.is_outlier())
        .filter_map(|(&t, row)| {
            let row = row.as_ref()?;
            let mut best = 0;
            for (j, &s) in row.iter().enumerate() {
                if s > row[best] {
                    best = j;
                }
            }
            (best == col).then_some(t)
        })
        .collect();
    Ok(DirectionDiagnostics {
        direction: sm.direction,
        outlier_pair_strength: strength,
        flag: OutlierPairFlag::from_strength(strength.to_f64_value()),
        topics_paired_with_outlier,
    })
}

/// Outlier-outlier co-occurrence for both directions.
pub fn outlier_diagnostics<S: Scalar>(
    strengths_dir1: &StrengthMatrix<S>,
    strengths_dir2: &StrengthMatrix<S>,
) -> OutlierDiagnostics<S> {
    let computed = [strengths_dir1, strengths_dir2]
        .into_iter()
        .map(direction_diagnostics)
        .collect::<Result<Vec<_>, _>>();
    match computed {
        Ok(directions) => OutlierDiagnostics::Computed { directions },
        Err(reason) => OutlierDiagnostics::NotApplicable { reason },
    }
}
