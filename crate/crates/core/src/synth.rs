//! Synthetic corpus pairs with planted thematic structure, and a naive
//! reimplementation of the whole pipeline to check it against.
//!
//! Cluster centroids sit on scaled coordinate axes, so every pair of distinct
//! clusters is orthogonal. Shared clusters feed documents into both corpora;
//! unique clusters into one. Outlier documents come from a broad Gaussian
//! around the all-ones direction and are natively labeled `-1`; their topic
//! embedding is left out of the bundle and filled with the outlier centroid.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cooccur::Pool;
use crate::interchange::{BundleError, BundleParts, CorpusBundle, TopicMeta};
use crate::topic::TopicId;

/// Noise scale of the outlier background, relative to `centroid_separation`.
const BACKGROUND_SPREAD: f64 = 0.5;

pub const ORACLE_MAX_DOCS: usize = 500;
pub const ORACLE_MAX_TOPICS: usize = 16;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("instance too large for the brute-force oracle: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub dim: usize,
    pub clusters_shared: usize,
    pub clusters_unique_1: usize,
    pub clusters_unique_2: usize,
    pub docs_per_cluster: usize,
    pub cluster_spread: f64,
    pub centroid_separation: f64,
    pub outlier_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            dim: 16,
            clusters_shared: 5,
            clusters_unique_1: 2,
            clusters_unique_2: 2,
            docs_per_cluster: 40,
            cluster_spread: 0.1,
            centroid_separation: 1.0,
            outlier_fraction: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        let total = self.clusters_shared + self.clusters_unique_1 + self.clusters_unique_2;
        if self.clusters_shared + self.clusters_unique_1 == 0
            || self.clusters_shared + self.clusters_unique_2 == 0
        {
            return bad("each corpus needs at least one cluster".into());
        }
        if self.dim < total {
            return bad(format!("dim {} cannot hold {total} orthogonal centroids", self.dim));
        }
        if self.docs_per_cluster == 0 {
            return bad("docs_per_cluster must be positive".into());
        }
        if !(self.cluster_spread > 0.0 && self.cluster_spread.is_finite()) {
            return bad("cluster_spread must be positive".into());
        }
        if !(self.centroid_separation > 0.0 && self.centroid_separation.is_finite()) {
            return bad("centroid_separation must be positive".into());
        }
        if self.centroid_separation / self.cluster_spread < 1.0 {
            return bad("centroid_separation / cluster_spread must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// What was planted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// (model-1 topic, model-2 topic) built from the same cluster.
    pub shared_pairs: Vec<(TopicId, TopicId)>,
    pub unique_1: Vec<TopicId>,
    pub unique_2: Vec<TopicId>,
    pub outlier_docs_1: usize,
    pub outlier_docs_2: usize,
}

struct CorpusPlan<'a> {
    name: &'a str,
    /// (topic label, cluster axis)
    clusters: Vec<(String, usize)>,
}

fn build_corpus(
    plan: &CorpusPlan<'_>,
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(CorpusBundle, usize), SynthError> {
    let dim = config.dim;
    let sep = config.centroid_separation;
    let noise = Normal::new(0.0, config.cluster_spread).expect("valid spread");
    let background = Normal::new(0.0, BACKGROUND_SPREAD * sep).expect("valid spread");
    let background_mean = sep / (dim as f64).sqrt();

    let n_clustered = plan.clusters.len() * config.docs_per_cluster;
    let f = config.outlier_fraction;
    let n_outliers = (n_clustered as f64 * f / (1.0 - f)).round() as usize;

    let mut doc_ids = Vec::new();
    let mut doc_embeddings = Vec::new();
    let mut native = Vec::new();
    let mut push_doc = |row: Vec<f64>, topic: TopicId| {
        doc_ids.push(format!("{}-d{:05}", plan.name, doc_ids.len()));
        doc_embeddings.extend(row.into_iter().map(|x| x as f32));
        native.push(topic);
    };

    let sample = |rng: &mut ChaCha8Rng, mean: &dyn Fn(usize) -> f64, dist: &Normal<f64>| loop {
        let row: Vec<f64> = (0..dim).map(|d| mean(d) + dist.sample(rng)).collect();
        if row.iter().any(|&x| x as f32 != 0.0) {
            break row;
        }
    };

    for (k, &(_, axis)) in plan.clusters.iter().enumerate() {
        for _ in 0..config.docs_per_cluster {
            let mean = |d: usize| if d == axis { sep } else { 0.0 };
            push_doc(sample(rng, &mean, &noise), TopicId(k as i32));
        }
    }
    for _ in 0..n_outliers {
        push_doc(sample(rng, &|_| background_mean, &background), TopicId::OUTLIER);
    }

    let mut topics = Vec::new();
    let mut topic_embeddings = Vec::new();
    if n_outliers > 0 {
        topics.push(TopicMeta {
            id: TopicId::OUTLIER,
            label: "outlier".into(),
            keywords: vec![],
            native_size: n_outliers,
        });
    }
    for (k, (label, axis)) in plan.clusters.iter().enumerate() {
        topics.push(TopicMeta {
            id: TopicId(k as i32),
            label: label.clone(),
            keywords: vec![format!("axis{axis}"), label.clone()],
            native_size: config.docs_per_cluster,
        });
        topic_embeddings.extend((0..dim).map(|d| if d == *axis { sep as f32 } else { 0.0 }));
    }

    let bundle = CorpusBundle::new(BundleParts {
        corpus_id: plan.name.to_string(),
        dim,
        doc_ids,
        doc_embeddings,
        topics,
        topic_embeddings,
        native_assignments: native,
    })?;
    Ok((bundle, n_outliers))
}

/// Two bundles and the structure planted in them. Deterministic in `config.seed`.
///
/// Corpus 1 numbers its shared clusters first, corpus 2 its unique clusters
/// first, so shared pairs do not map topic ids onto themselves.
pub fn generate_pair(config: &SynthConfig) -> Result<(CorpusBundle, CorpusBundle, GroundTruth), SynthError> {
    config.validate()?;
    let (s, u1, u2) = (config.clusters_shared, config.clusters_unique_1, config.clusters_unique_2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let plan1 = CorpusPlan {
        name: "synth-1",
        clusters: (0..s)
            .map(|k| (format!("shared-{k}"), k))
            .chain((0..u1).map(|k| (format!("unique1-{k}"), s + k)))
            .collect(),
    };
    let plan2 = CorpusPlan {
        name: "synth-2",
        clusters: (0..u2)
            .map(|k| (format!("unique2-{k}"), s + u1 + k))
            .chain((0..s).map(|k| (format!("shared-{k}"), k)))
            .collect(),
    };
    let (b1, outliers_1) = build_corpus(&plan1, config, &mut rng)?;
    let (b2, outliers_2) = build_corpus(&plan2, config, &mut rng)?;

    let truth = GroundTruth {
        shared_pairs: (0..s)
            .map(|k| (TopicId(k as i32), TopicId((u2 + k) as i32)))
            .collect(),
        unique_1: (s..s + u1).map(|k| TopicId(k as i32)).collect(),
        unique_2: (0..u2).map(|k| TopicId(k as i32)).collect(),
        outlier_docs_1: outliers_1,
        outlier_docs_2: outliers_2,
    };
    Ok((b1, b2, truth))
}

/// Factors of one direction as computed by [`brute_force_report`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleDirection {
    /// (native id, cross id) → n(D_ij); only nonzero cells.
    pub counts: BTreeMap<(i32, i32), u64>,
    pub c: f64,
    pub c_w: f64,
    pub u: f64,
    pub u_w: f64,
    pub a: f64,
    pub a_w: f64,
    /// Defined non-outlier native topics with uniqueness ≥ 0.5.
    pub unique_topics: Vec<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    /// (corpus, doc index) → (model-1 topic, model-2 topic)
    pub pairs: Vec<(i32, i32)>,
    pub one_to_two: OracleDirection,
    pub two_to_one: OracleDirection,
}

/// Reference pipeline with plain nested loops over `f64`. Shares no code with
/// the matcher, cooccur or measures modules.
pub fn brute_force_report(
    bundle1: &CorpusBundle,
    bundle2: &CorpusBundle,
    pool: Pool,
) -> Result<OracleReport, SynthError> {
    let n_docs = bundle1.n_docs() + bundle2.n_docs();
    if n_docs > ORACLE_MAX_DOCS {
        return Err(SynthError::TooLarge(format!("{n_docs} documents")));
    }
    if bundle1.n_topics() > ORACLE_MAX_TOPICS || bundle2.n_topics() > ORACLE_MAX_TOPICS {
        return Err(SynthError::TooLarge(format!(
            "{} and {} topics",
            bundle1.n_topics(),
            bundle2.n_topics()
        )));
    }

    fn best_topic(doc: &[f32], model: &CorpusBundle) -> i32 {
        let dim = model.dim();
        let mut best_id = i32::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for k in 0..model.n_topics() {
            let id = model.topics()[k].id.0;
            let topic = &model.topic_embeddings()[k * dim..(k + 1) * dim];
            let mut uv = 0.0;
            let mut uu = 0.0;
            let mut vv = 0.0;
            for d in 0..dim {
                let (x, y) = (doc[d] as f64, topic[d] as f64);
                uv += x * y;
                uu += x * x;
                vv += y * y;
            }
            let score = uv / (uu.sqrt() * vv.sqrt());
            if score > best_score || (score == best_score && id < best_id) {
                best_score = score;
                best_id = id;
            }
        }
        best_id
    }

    // (source corpus, model-1 topic, model-2 topic)
    let mut docs: Vec<(u8, i32, i32)> = Vec::new();
    for i in 0..bundle1.n_docs() {
        let cross = best_topic(bundle1.doc_embedding(i), bundle2);
        docs.push((1, bundle1.native_assignments()[i].0, cross));
    }
    for i in 0..bundle2.n_docs() {
        let cross = best_topic(bundle2.doc_embedding(i), bundle1);
        docs.push((2, cross, bundle2.native_assignments()[i].0));
    }

    let direction = |native_corpus: u8| -> OracleDirection {
        let pick = |&(src, m1, m2): &(u8, i32, i32)| {
            if native_corpus == 1 {
                (src, m1, m2)
            } else {
                (src, m2, m1)
            }
        };
        let mut counts: BTreeMap<(i32, i32), u64> = BTreeMap::new();
        let mut totals: BTreeMap<i32, u64> = BTreeMap::new();
        for doc in &docs {
            let (src, native, cross) = pick(doc);
            if pool == Pool::NativeOnly && src != native_corpus {
                continue;
            }
            *counts.entry((native, cross)).or_insert(0) += 1;
            *totals.entry(native).or_insert(0) += 1;
        }

        let (mut c, mut c_w, mut u, mut u_w, mut a, mut a_w) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let mut t = 0.0;
        let mut weight = 0.0;
        let mut unique = Vec::new();
        for (&native, &total) in &totals {
            if native == -1 {
                continue;
            }
            let mut closeness = 0.0;
            let mut outlier = 0.0;
            let mut best = 0.0f64;
            for (&(i, j), &n) in &counts {
                if i != native {
                    continue;
                }
                let s = n as f64 / total as f64;
                if j == -1 {
                    outlier += s;
                } else {
                    closeness += s;
                    best = best.max(s);
                }
            }
            let n = total as f64;
            t += 1.0;
            weight += n;
            c += closeness;
            c_w += n * closeness;
            u += outlier;
            u_w += n * outlier;
            a += best;
            a_w += n * best;
            if outlier >= 0.5 {
                unique.push(native);
            }
        }
        OracleDirection {
            counts,
            c: c / t,
            c_w: c_w / weight,
            u: u / t,
            u_w: u_w / weight,
            a: a / t,
            a_w: a_w / weight,
            unique_topics: unique,
        }
    };

    Ok(OracleReport {
        pairs: docs.iter().map(|&(_, m1, m2)| (m1, m2)).collect(),
        one_to_two: direction(1),
        two_to_one: direction(2),
    })
}
