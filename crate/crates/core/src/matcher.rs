//! Cross-corpus topic assignment: every document of one corpus is matched to
//! the most similar topic embedding of the other corpus's model.

use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::CorpusBundle;
use crate::scalar::Scalar;
use crate::topic::TopicId;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("corpus {0:?} has no documents")]
    EmptyCorpus(String),
    #[error("model {0:?} has no topics")]
    NoTopics(String),
    #[error("could not write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Which corpus a document belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceCorpus {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl SourceCorpus {
    pub fn number(self) -> u8 {
        match self {
            SourceCorpus::One => 1,
            SourceCorpus::Two => 2,
        }
    }
}

fn dot<S: Scalar>(u: &[S], v: &[S]) -> S {
    u.iter().zip(v).map(|(&a, &b)| a * b).sum()
}

fn norm<S: Scalar>(u: &[S]) -> S {
    dot(u, u).sqrt()
}

/// Cosine of the angle between `u` and `v`, clamped to `[-1, 1]`.
pub fn cosine_similarity<S: Scalar>(u: &[S], v: &[S]) -> Result<S, MatchError> {
    if u.len() != v.len() {
        return Err(MatchError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == S::zero() || nv == S::zero() {
        return Err(MatchError::ZeroVector);
    }
    Ok(clamp_unit(dot(u, v) / (nu * nv)))
}

fn clamp_unit<S: Scalar>(x: S) -> S {
    x.max(-S::one()).min(S::one())
}

/// Topic embeddings of one model, promoted to `S`, with precomputed norms.
pub(crate) struct TopicTable<S> {
    pub ids: Vec<TopicId>,
    rows: Vec<Vec<S>>,
    norms: Vec<S>,
}

impl<S: Scalar> TopicTable<S> {
    pub fn from_bundle(bundle: &CorpusBundle, include_outlier: bool) -> Self {
        let dim = bundle.dim();
        let mut table = TopicTable {
            ids: Vec::new(),
            rows: Vec::new(),
            norms: Vec::new(),
        };
        for (meta, row) in bundle
            .topics()
            .iter()
            .zip(bundle.topic_embeddings().chunks_exact(dim))
        {
            if meta.id.is_outlier() && !include_outlier {
                continue;
            }
            let row: Vec<S> = row.iter().map(|&x| S::from_f32_value(x)).collect();
            table.norms.push(norm(&row));
            table.rows.push(row);
            table.ids.push(meta.id);
        }
        table
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Best topic for `v` with its raw cosine. Ids ascend, so a strict `>`
    /// leaves ties with the smallest id.
    pub fn best_match(&self, v: &[S]) -> (TopicId, S) {
        let nv = norm(v);
        let mut best = (self.ids[0], S::neg_infinity());
        for ((&id, row), &nt) in self.ids.iter().zip(&self.rows).zip(&self.norms) {
            let score = dot(v, row) / (nv * nt);
            if score > best.1 {
                best = (id, score);
            }
        }
        best
    }
}

/// One cross assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossAssignment<S> {
    pub doc_id: String,
    pub topic: TopicId,
    pub similarity: S,
}

/// Assigns every document of `docs` to the most similar topic of `cross_model`,
/// the outlier topic included whenever the cross model has one.
///
/// Runs on the ambient rayon pool; results come back in document order.
pub fn assign_cross_topics<S: Scalar>(
    docs: &CorpusBundle,
    cross_model: &CorpusBundle,
) -> Result<Vec<CrossAssignment<S>>, MatchError> {
    if docs.dim() != cross_model.dim() {
        return Err(MatchError::DimensionMismatch {
            left: docs.dim(),
            right: cross_model.dim(),
        });
    }
    if docs.n_docs() == 0 {
        return Err(MatchError::EmptyCorpus(docs.corpus_id().to_string()));
    }
    let table = TopicTable::<S>::from_bundle(cross_model, true);
    if table.is_empty() {
        return Err(MatchError::NoTopics(cross_model.corpus_id().to_string()));
    }
    let assignments = (0..docs.n_docs())
        .into_par_iter()
        .map(|i| {
            let v: Vec<S> = docs
                .doc_embedding(i)
                .iter()
                .map(|&x| S::from_f32_value(x))
                .collect();
            let (topic, score) = table.best_match(&v);
            CrossAssignment {
                doc_id: docs.doc_ids()[i].clone(),
                topic,
                similarity: clamp_unit(score),
            }
        })
        .collect();
    Ok(assignments)
}

/// Row of the assignment table: one document, its model-1 and model-2 topics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow<S> {
    pub doc_id: String,
    pub source_corpus: SourceCorpus,
    pub model1_topic: TopicId,
    pub model2_topic: TopicId,
    /// Winning cosine of the cross assignment.
    pub cross_similarity: S,
}

/// Native and cross assignments for the documents of both corpora
/// (T11/T21 for corpus 1, T12/T22 for corpus 2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentTable<S> {
    pub model1_topics: Vec<TopicId>,
    pub model2_topics: Vec<TopicId>,
    pub rows: Vec<AssignmentRow<S>>,
}

pub fn build_assignment_table<S: Scalar>(
    bundle1: &CorpusBundle,
    bundle2: &CorpusBundle,
) -> Result<AssignmentTable<S>, MatchError> {
    if bundle1.dim() != bundle2.dim() {
        return Err(MatchError::DimensionMismatch {
            left: bundle1.dim(),
            right: bundle2.dim(),
        });
    }
    let mut rows = Vec::with_capacity(bundle1.n_docs() + bundle2.n_docs());
    if bundle1.n_docs() > 0 {
        let cross = assign_cross_topics::<S>(bundle1, bundle2)?;
        rows.extend(bundle1.native_assignments().iter().zip(cross).map(
            |(&native, cross)| AssignmentRow {
                doc_id: cross.doc_id,
                source_corpus: SourceCorpus::One,
                model1_topic: native,
                model2_topic: cross.topic,
                cross_similarity: cross.similarity,
            },
        ));
    }
    if bundle2.n_docs() > 0 {
        let cross = assign_cross_topics::<S>(bundle2, bundle1)?;
        rows.extend(bundle2.native_assignments().iter().zip(cross).map(
            |(&native, cross)| AssignmentRow {
                doc_id: cross.doc_id,
                source_corpus: SourceCorpus::Two,
                model1_topic: cross.topic,
                model2_topic: native,
                cross_similarity: cross.similarity,
            },
        ));
    }
    Ok(AssignmentTable {
        model1_topics: bundle1.topic_ids(),
        model2_topics: bundle2.topic_ids(),
        rows,
    })
}

impl<S: Scalar> AssignmentTable<S> {
    /// CSV with header `doc_id,source_corpus,model1_topic,model2_topic,cross_similarity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("doc_id,source_corpus,model1_topic,model2_topic,cross_similarity\n");
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        for row in &self.rows {
            writer
                .write_record([
                    row.doc_id.clone(),
                    row.source_corpus.number().to_string(),
                    row.model1_topic.to_string(),
                    row.model2_topic.to_string(),
                    row.cross_similarity.to_string(),
                ])
                .expect("in-memory csv write");
        }
        let bytes = writer.into_inner().expect("in-memory csv flush");
        out.push_str(&String::from_utf8(bytes).expect("utf-8 csv"));
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), MatchError> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|source| MatchError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interchange::{BundleParts, TopicMeta};

    fn bundle(id: &str, docs: &[[f32; 2]], native: &[i32], topics: &[[f32; 2]]) -> CorpusBundle {
        let n_topics = topics.len();
        let topic_meta = (0..n_topics as i32)
            .map(|t| TopicMeta {
                id: TopicId(t),
                label: format!("{id}-{t}"),
                keywords: vec![],
                native_size: native.iter().filter(|&&n| n == t).count(),
            })
            .collect();
        CorpusBundle::new(BundleParts {
            corpus_id: id.into(),
            dim: 2,
            doc_ids: (0..docs.len()).map(|i| format!("{id}-d{i}")).collect(),
            doc_embeddings: docs.iter().flatten().copied().collect(),
            topics: topic_meta,
            topic_embeddings: topics.iter().flatten().copied().collect(),
            native_assignments: native.iter().map(|&t| TopicId(t)).collect(),
        })
        .unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0f64, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[2.0f64, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        let c = cosine_similarity(&[1.0f64, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let c32 = cosine_similarity(&[1.0f32, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c32 - std::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&[0.0f64, 0.0], &[1.0, 0.0]),
            Err(MatchError::ZeroVector)
        ));
        assert!(matches!(
            cosine_similarity(&[1.0f64], &[1.0, 0.0]),
            Err(MatchError::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn cosine_stays_in_unit_interval() {
        let u = [0.1f64, 0.2, 0.3];
        let v = [0.3f64, 0.6, 0.9];
        let c = cosine_similarity(&u, &v).unwrap();
        assert!((0.9999999..=1.0).contains(&c));
    }

    #[test]
    fn tie_goes_to_smaller_topic_id() {
        let docs = bundle("a", &[[1.0, 1.0]], &[0], &[[1.0, 1.0]]);
        let cross = bundle("b", &[[1.0, 0.0], [0.0, 1.0]], &[0, 1], &[[1.0, 0.0], [0.0, 1.0]]);
        let out = assign_cross_topics::<f64>(&docs, &cross).unwrap();
        assert_eq!(out[0].topic, TopicId(0));
    }

    #[test]
    fn exact_match_gets_similarity_one() {
        let topics = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.2], [0.6, 0.8]];
        let cross = bundle("b", &[[1.0, 0.0]], &[0], &topics);
        let docs = bundle("a", &[[0.6, 0.8]], &[0], &[[1.0, 0.0]]);
        let out = assign_cross_topics::<f64>(&docs, &cross).unwrap();
        assert_eq!(out[0].topic, TopicId(3));
        assert!((out[0].similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_and_dim_mismatch() {
        let empty = bundle("e", &[], &[], &[[1.0, 0.0]]);
        let other = bundle("b", &[[1.0, 0.0]], &[0], &[[1.0, 0.0]]);
        assert!(matches!(
            assign_cross_topics::<f64>(&empty, &other),
            Err(MatchError::EmptyCorpus(_))
        ));
        let table = build_assignment_table::<f64>(&other, &empty).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].source_corpus, SourceCorpus::One);
    }

    /// Three docs in corpus 1, two in corpus 2, each model with two topics.
    ///
    /// Cosines worked by hand:
    /// corpus-1 docs vs model-2 topics (1,1)/(−1,1):
    ///   (1,0): 1/√2, −1/√2 → 0;  (0,1): 1/√2, 1/√2 → tie → 0;  (−1,0.5): −0.5/(√1.25·√2), 1.5/(√1.25·√2) → 1
    /// corpus-2 docs vs model-1 topics (1,0)/(0,1):
    ///   (1,1): tie → 0;  (−1,2): −1/√5, 2/√5 → 1
    #[test]
    fn hand_table() {
        let b1 = bundle("c1", &[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.5]], &[0, 1, 1], &[[1.0, 0.0], [0.0, 1.0]]);
        let b2 = bundle("c2", &[[1.0, 1.0], [-1.0, 2.0]], &[0, 1], &[[1.0, 1.0], [-1.0, 1.0]]);
        let table = build_assignment_table::<f64>(&b1, &b2).unwrap();
        let got: Vec<(&str, u8, i32, i32)> = table
            .rows
            .iter()
            .map(|r| (r.doc_id.as_str(), r.source_corpus.number(), r.model1_topic.0, r.model2_topic.0))
            .collect();
        assert_eq!(
            got,
            vec![
                ("c1-d0", 1, 0, 0),
                ("c1-d1", 1, 1, 0),
                ("c1-d2", 1, 1, 1),
                ("c2-d0", 2, 0, 0),
                ("c2-d1", 2, 1, 1),
            ]
        );
        let expected_sims = [
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
            1.5 / (1.25f64.sqrt() * 2f64.sqrt()),
            std::f64::consts::FRAC_1_SQRT_2,
            2.0 / 5f64.sqrt(),
        ];
        for (row, want) in table.rows.iter().zip(expected_sims) {
            assert!((row.cross_similarity - want).abs() < 1e-12, "{row:?}");
        }
        let csv = table.to_csv();
        assert!(csv.starts_with("doc_id,source_corpus,model1_topic,model2_topic,cross_similarity\nc1-d0,1,0,0,"));
    }
}
