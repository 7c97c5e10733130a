//! Agreement between BTM's strongest pairings and a cosine-similarity
//! matching of the two models' topic embeddings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cooccur::{Direction, StrengthMatrix};
use crate::interchange::CorpusBundle;
use crate::matcher::{MatchError, TopicTable};
use crate::scalar::Scalar;
use crate::topic::TopicId;

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("labelings cover different native topics")]
    DomainMismatch,
    #[error("labelings are empty")]
    EmptyDomain,
    #[error("kappa undefined: chance agreement is 1 but the labelings disagree")]
    DegenerateChance,
    #[error(transparent)]
    Match(#[from] MatchError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMethod {
    Btm,
    Cosine,
}

/// One rater's choice of cross topic for every native topic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchLabeling<S> {
    pub direction: Direction,
    pub method: MatchMethod,
    pub labels: BTreeMap<TopicId, TopicId>,
    pub scores: BTreeMap<TopicId, S>,
}

impl<S: Scalar> MatchLabeling<S> {
    /// Keeps only the native topics in `domain`.
    pub fn restricted_to(&self, domain: &BTreeSet<TopicId>) -> Self {
        MatchLabeling {
            direction: self.direction,
            method: self.method,
            labels: self
                .labels
                .iter()
                .filter(|(t, _)| domain.contains(t))
                .map(|(&t, &l)| (t, l))
                .collect(),
            scores: self
                .scores
                .iter()
                .filter(|(t, _)| domain.contains(t))
                .map(|(&t, &s)| (t, s))
                .collect(),
        }
    }

    pub fn domain(&self) -> BTreeSet<TopicId> {
        self.labels.keys().copied().collect()
    }
}

/// Strongest pairing of every defined non-outlier native topic, the cross
/// outlier included; ties go to the smallest cross id.
pub fn btm_match<S: Scalar>(sm: &StrengthMatrix<S>) -> MatchLabeling<S> {
    let mut labels = BTreeMap::new();
    let mut scores = BTreeMap::new();
    for (&topic, row) in sm.native_topics.iter().zip(&sm.rows) {
        let Some(row) = row else { continue };
        if topic.is_outlier() || row.is_empty() {
            continue;
        }
        let mut best = 0;
        for (j, &s) in row.iter().enumerate() {
            if s > row[best] {
                best = j;
            }
        }
        labels.insert(topic, sm.cross_topics[best]);
        scores.insert(topic, row[best]);
    }
    MatchLabeling {
        direction: sm.direction,
        method: MatchMethod::Btm,
        labels,
        scores,
    }
}

/// Most cosine-similar cross topic for every non-outlier native topic. The
/// cross outlier row takes part only when `include_outlier` is set and the
/// cross model has one.
pub fn cosine_match<S: Scalar>(
    direction: Direction,
    native: &CorpusBundle,
    cross: &CorpusBundle,
    include_outlier: bool,
) -> Result<MatchLabeling<S>, ValidateError> {
    if native.dim() != cross.dim() {
        return Err(MatchError::DimensionMismatch {
            left: native.dim(),
            right: cross.dim(),
        }
        .into());
    }
    let cross_table = TopicTable::<S>::from_bundle(cross, include_outlier);
    if cross_table.is_empty() {
        return Err(MatchError::NoTopics(cross.corpus_id().to_string()).into());
    }
    let mut labels = BTreeMap::new();
    let mut scores = BTreeMap::new();
    for meta in native.topics().iter().filter(|t| !t.id.is_outlier()) {
        let row: Vec<S> = native
            .topic_embedding(meta.id)
            .expect("topic has an embedding row")
            .iter()
            .map(|&x| S::from_f32_value(x))
            .collect();
        let (label, score) = cross_table.best_match(&row);
        labels.insert(meta.id, label);
        scores.insert(meta.id, score.max(-S::one()).min(S::one()));
    }
    Ok(MatchLabeling {
        direction,
        method: MatchMethod::Cosine,
        labels,
        scores,
    })
}

/// Cohen's kappa `(p_o − p_e) / (1 − p_e)` over the shared native topics.
pub fn cohens_kappa<S: Scalar, T: Ord + Copy>(
    labels_a: &BTreeMap<TopicId, T>,
    labels_b: &BTreeMap<TopicId, T>,
) -> Result<S, ValidateError> {
    if labels_a.len() != labels_b.len() || labels_a.keys().ne(labels_b.keys()) {
        return Err(ValidateError::DomainMismatch);
    }
    let n = labels_a.len() as u64;
    if n == 0 {
        return Err(ValidateError::EmptyDomain);
    }
    let agreements = labels_a
        .iter()
        .filter(|(k, a)| labels_b.get(k) == Some(a))
        .count() as u64;
    let mut marginal_a: BTreeMap<T, u64> = BTreeMap::new();
    let mut marginal_b: BTreeMap<T, u64> = BTreeMap::new();
    for (a, b) in labels_a.values().zip(labels_b.values()) {
        *marginal_a.entry(*a).or_default() += 1;
        *marginal_b.entry(*b).or_default() += 1;
    }
    // n² · p_e, exact in integers
    let chance: u64 = marginal_a
        .iter()
        .map(|(k, &ca)| ca * marginal_b.get(k).copied().unwrap_or(0))
        .sum();
    if chance == n * n {
        return if agreements == n {
            Ok(S::one())
        } else {
            Err(ValidateError::DegenerateChance)
        };
    }
    let n2 = S::from_count(n * n);
    let p_o = S::from_count(agreements) / S::from_count(n);
    let p_e = S::from_count(chance) / n2;
    Ok((p_o - p_e) / (S::one() - p_e))
}

/// Kappa between two [`MatchLabeling`]s.
pub fn labeling_kappa<S: Scalar>(a: &MatchLabeling<S>, b: &MatchLabeling<S>) -> Result<S, ValidateError> {
    cohens_kappa(&a.labels, &b.labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy<S> {
    pub native_topic: TopicId,
    pub btm_label: TopicId,
    pub cosine_label: TopicId,
    pub btm_strength: S,
    pub cosine_score: S,
    pub outlier_involved: bool,
}

/// Native topics on which the two raters disagree.
pub fn discrepancy_report<S: Scalar>(
    labels_btm: &MatchLabeling<S>,
    labels_cosine: &MatchLabeling<S>,
) -> Vec<Discrepancy<S>> {
    labels_btm
        .labels
        .iter()
        .filter_map(|(&topic, &btm)| {
            let &cosine = labels_cosine.labels.get(&topic)?;
            (btm != cosine).then(|| Discrepancy {
                native_topic: topic,
                btm_label: btm,
                cosine_label: cosine,
                btm_strength: labels_btm.scores[&topic],
                cosine_score: labels_cosine.scores[&topic],
                outlier_involved: btm.is_outlier() || cosine.is_outlier(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport<S> {
    pub direction: Direction,
    pub kappa: S,
    pub n_topics: usize,
    pub n_agreements: usize,
    pub cosine_outlier: bool,
    pub discrepancies: Vec<Discrepancy<S>>,
}

/// Compares both raters over the BTM domain (defined non-outlier native topics).
pub fn validation_report<S: Scalar>(
    sm: &StrengthMatrix<S>,
    native: &CorpusBundle,
    cross: &CorpusBundle,
    cosine_outlier: bool,
) -> Result<ValidationReport<S>, ValidateError> {
    let btm = btm_match(sm);
    let cosine = cosine_match::<S>(sm.direction, native, cross, cosine_outlier)?.restricted_to(&btm.domain());
    let kappa = labeling_kappa(&btm, &cosine)?;
    let discrepancies = discrepancy_report(&btm, &cosine);
    Ok(ValidationReport {
        direction: sm.direction,
        kappa,
        n_topics: btm.labels.len(),
        n_agreements: btm.labels.len() - discrepancies.len(),
        cosine_outlier,
        discrepancies,
    })
}
