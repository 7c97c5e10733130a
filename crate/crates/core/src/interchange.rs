//! On-disk corpus bundle: everything a topic-modeling framework has to export
//! for one corpus so that it can take part in bidirectional matching.
//!
//! A bundle directory holds
//!
//! * `manifest.json` with corpus id, embedding dimension, document count, the
//!   topic list and the names of the payload files,
//! * `doc_embeddings.f32le` and `topic_embeddings.f32le`, flat row-major
//!   little-endian `f32` matrices whose shape is recorded only in the manifest,
//! * `assignments.csv` (`doc_id,topic_id`), whose row order defines document
//!   order.
//!
//! The outlier topic `-1` is optional. When the topic list contains it but the
//! topic embedding payload has no row for it, the row is filled with the mean
//! of the natively-outlier documents.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topic::TopicId;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DOC_EMBEDDINGS_FILE: &str = "doc_embeddings.f32le";
pub const TOPIC_EMBEDDINGS_FILE: &str = "topic_embeddings.f32le";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed manifest {}: {source}", path.display())]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("dim must be positive")]
    ZeroDim,
    #[error("payload size mismatch in {file}: expected {expected} floats, found {actual}")]
    PayloadSizeMismatch {
        file: String,
        expected: String,
        actual: String,
    },
    #[error("malformed assignments file: {0}")]
    Assignments(String),
    #[error("document count mismatch: manifest says {manifest}, assignments hold {actual}")]
    DocCountMismatch { manifest: usize, actual: usize },
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("invalid topic id {0} (ids must be >= -1)")]
    InvalidTopicId(i32),
    #[error("duplicate topic id {0}")]
    DuplicateTopicId(TopicId),
    #[error("topics not sorted ascending at id {0}")]
    UnsortedTopics(TopicId),
    #[error("topic ids not contiguous from 0: missing id {0}")]
    TopicGap(TopicId),
    #[error("unknown topic id {topic} assigned to doc {doc_id:?}")]
    UnknownTopic { doc_id: String, topic: TopicId },
    #[error("topic {topic}: declared native_size {declared}, but {actual} documents are assigned")]
    NativeSizeMismatch {
        topic: TopicId,
        declared: usize,
        actual: usize,
    },
    #[error("zero vector in {what} {name:?}")]
    ZeroVector { what: &'static str, name: String },
    #[error("non-finite value in {what} {name:?}")]
    NonFinite { what: &'static str, name: String },
    #[error("outlier embedding unavailable: no document is natively assigned -1")]
    OutlierEmbeddingUnavailable,
}

/// One topic of a model, with its keyword representation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicMeta {
    pub id: TopicId,
    pub label: String,
    pub keywords: Vec<String>,
    pub native_size: usize,
}

/// Where the outlier topic's embedding row came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierState {
    /// Exported by the topic model.
    Provided,
    /// Mean of the natively-outlier documents.
    Centroid,
    /// The model has no outlier topic ("no-outlier mode").
    Absent,
}

/// A validated corpus together with its topic model. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusBundle {
    corpus_id: String,
    dim: usize,
    doc_ids: Vec<String>,
    doc_embeddings: Vec<f32>,
    topics: Vec<TopicMeta>,
    topic_embeddings: Vec<f32>,
    native_assignments: Vec<TopicId>,
    outlier: OutlierState,
}

/// Unvalidated bundle contents, as produced by an exporter or generator.
///
/// `topic_embeddings` has one row per entry of `topics`, except that the row
/// of the outlier topic may be left out.
#[derive(Clone, Debug, Default)]
pub struct BundleParts {
    pub corpus_id: String,
    pub dim: usize,
    pub doc_ids: Vec<String>,
    pub doc_embeddings: Vec<f32>,
    pub topics: Vec<TopicMeta>,
    pub topic_embeddings: Vec<f32>,
    pub native_assignments: Vec<TopicId>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    corpus_id: String,
    dim: usize,
    n_docs: usize,
    topics: Vec<TopicMeta>,
    files: ManifestFiles,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFiles {
    doc_embeddings: String,
    topic_embeddings: String,
    assignments: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct AssignmentRecord {
    doc_id: String,
    topic_id: i32,
}

impl CorpusBundle {
    /// Validates `parts` and fills a missing outlier row.
    pub fn new(parts: BundleParts) -> Result<Self, BundleError> {
        let BundleParts {
            corpus_id,
            dim,
            doc_ids,
            doc_embeddings,
            mut topics,
            mut topic_embeddings,
            native_assignments,
        } = parts;

        if dim == 0 {
            return Err(BundleError::ZeroDim);
        }
        let n_docs = doc_ids.len();
        if native_assignments.len() != n_docs {
            return Err(BundleError::DocCountMismatch {
                manifest: n_docs,
                actual: native_assignments.len(),
            });
        }
        if doc_embeddings.len() != n_docs * dim {
            return Err(BundleError::PayloadSizeMismatch {
                file: DOC_EMBEDDINGS_FILE.into(),
                expected: format!("{n_docs}x{dim}={}", n_docs * dim),
                actual: doc_embeddings.len().to_string(),
            });
        }

        let mut seen = HashSet::with_capacity(n_docs);
        for id in &doc_ids {
            if !seen.insert(id.as_str()) {
                return Err(BundleError::DuplicateDocId(id.clone()));
            }
        }

        check_topic_ids(&topics)?;
        let ids: Vec<TopicId> = topics.iter().map(|t| t.id).collect();

        let mut counts = vec![0usize; topics.len()];
        for (doc_id, &topic) in doc_ids.iter().zip(&native_assignments) {
            match ids.binary_search(&topic) {
                Ok(k) => counts[k] += 1,
                Err(_) => {
                    return Err(BundleError::UnknownTopic {
                        doc_id: doc_id.clone(),
                        topic,
                    })
                }
            }
        }
        for (meta, &actual) in topics.iter().zip(&counts) {
            if meta.native_size != actual {
                return Err(BundleError::NativeSizeMismatch {
                    topic: meta.id,
                    declared: meta.native_size,
                    actual,
                });
            }
        }

        for (i, row) in doc_embeddings.chunks_exact(dim).enumerate() {
            check_row(row, "document embedding", &doc_ids[i])?;
        }

        let has_outlier = ids.first() == Some(&TopicId::OUTLIER);
        let rows = topic_embeddings.len() / dim;
        let outlier_row_missing = has_outlier
            && topic_embeddings.len() % dim == 0
            && rows + 1 == topics.len();
        if !outlier_row_missing && topic_embeddings.len() != topics.len() * dim {
            return Err(BundleError::PayloadSizeMismatch {
                file: TOPIC_EMBEDDINGS_FILE.into(),
                expected: format!("{}x{dim}={}", topics.len(), topics.len() * dim),
                actual: topic_embeddings.len().to_string(),
            });
        }
        let first_given = usize::from(outlier_row_missing);
        for (row, meta) in topic_embeddings.chunks_exact(dim).zip(&topics[first_given..]) {
            check_row(row, "topic embedding", &meta.id.to_string())?;
        }

        let outlier = if !has_outlier {
            OutlierState::Absent
        } else if !outlier_row_missing {
            OutlierState::Provided
        } else if counts[0] == 0 {
            log::warn!(
                "corpus {corpus_id}: outlier topic has neither an embedding nor documents; running in no-outlier mode"
            );
            topics.remove(0);
            OutlierState::Absent
        } else {
            let centroid = mean_of_outlier_docs(dim, &doc_embeddings, &native_assignments);
            let row: Vec<f32> = centroid.iter().map(|&x| x as f32).collect();
            check_row(&row, "outlier centroid", "-1")?;
            topic_embeddings.splice(0..0, row);
            OutlierState::Centroid
        };

        Ok(CorpusBundle {
            corpus_id,
            dim,
            doc_ids,
            doc_embeddings,
            topics,
            topic_embeddings,
            native_assignments,
            outlier,
        })
    }

    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_embedding(&self, doc: usize) -> &[f32] {
        &self.doc_embeddings[doc * self.dim..(doc + 1) * self.dim]
    }

    pub fn doc_embeddings(&self) -> &[f32] {
        &self.doc_embeddings
    }

    /// Topics sorted by ascending id; the outlier topic, when present, comes first.
    pub fn topics(&self) -> &[TopicMeta] {
        &self.topics
    }

    pub fn topic_ids(&self) -> Vec<TopicId> {
        self.topics.iter().map(|t| t.id).collect()
    }

    pub fn topic(&self, id: TopicId) -> Option<&TopicMeta> {
        self.topic_index(id).map(|k| &self.topics[k])
    }

    pub fn topic_index(&self, id: TopicId) -> Option<usize> {
        self.topics.binary_search_by(|t| t.id.cmp(&id)).ok()
    }

    /// Embedding rows aligned with [`CorpusBundle::topics`].
    pub fn topic_embeddings(&self) -> &[f32] {
        &self.topic_embeddings
    }

    pub fn topic_embedding(&self, id: TopicId) -> Option<&[f32]> {
        self.topic_index(id)
            .map(|k| &self.topic_embeddings[k * self.dim..(k + 1) * self.dim])
    }

    pub fn native_assignments(&self) -> &[TopicId] {
        &self.native_assignments
    }

    pub fn outlier_state(&self) -> OutlierState {
        self.outlier
    }

    pub fn has_outlier(&self) -> bool {
        self.outlier != OutlierState::Absent
    }
}

fn check_topic_ids(topics: &[TopicMeta]) -> Result<(), BundleError> {
    let mut expected_next = 0;
    for (k, meta) in topics.iter().enumerate() {
        let id = meta.id;
        if id.0 < -1 {
            return Err(BundleError::InvalidTopicId(id.0));
        }
        if k > 0 {
            let prev = topics[k - 1].id;
            if id == prev {
                return Err(BundleError::DuplicateTopicId(id));
            }
            if id < prev {
                return Err(BundleError::UnsortedTopics(id));
            }
        }
        if id.is_outlier() {
            continue;
        }
        if id.0 != expected_next {
            return Err(BundleError::TopicGap(TopicId(expected_next)));
        }
        expected_next += 1;
    }
    Ok(())
}

fn check_row(row: &[f32], what: &'static str, name: &str) -> Result<(), BundleError> {
    if row.iter().any(|x| !x.is_finite()) {
        return Err(BundleError::NonFinite {
            what,
            name: name.to_string(),
        });
    }
    if row.iter().all(|&x| x == 0.0) {
        return Err(BundleError::ZeroVector {
            what,
            name: name.to_string(),
        });
    }
    Ok(())
}

fn mean_of_outlier_docs(dim: usize, embeddings: &[f32], assignments: &[TopicId]) -> Vec<f64> {
    let mut sum = vec![0.0f64; dim];
    let mut n = 0usize;
    for (row, topic) in embeddings.chunks_exact(dim).zip(assignments) {
        if topic.is_outlier() {
            n += 1;
            for (acc, &x) in sum.iter_mut().zip(row) {
                *acc += f64::from(x);
            }
        }
    }
    sum.iter_mut().for_each(|x| *x /= n as f64);
    sum
}

/// Arithmetic mean of the embeddings of all documents natively assigned `-1`.
pub fn outlier_centroid(bundle: &CorpusBundle) -> Result<Vec<f64>, BundleError> {
    if !bundle.native_assignments.iter().any(|t| t.is_outlier()) {
        return Err(BundleError::OutlierEmbeddingUnavailable);
    }
    Ok(mean_of_outlier_docs(
        bundle.dim,
        &bundle.doc_embeddings,
        &bundle.native_assignments,
    ))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BundleError + '_ {
    move |source| {
        if source.kind() == io::ErrorKind::NotFound {
            BundleError::MissingFile(path.to_path_buf())
        } else {
            BundleError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

fn read_f32le(path: &Path) -> Result<Vec<f32>, BundleError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() % 4 != 0 {
        return Err(BundleError::PayloadSizeMismatch {
            file: path.display().to_string(),
            expected: "a multiple of 4 bytes".into(),
            actual: format!("{} bytes", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

fn write_f32le(path: &Path, values: &[f32]) -> Result<(), BundleError> {
    let bytes: Vec<u8> = values.iter().flat_map(|x| x.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(io_err(path))
}

/// Loads and fully validates a bundle directory.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<CorpusBundle, BundleError> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|source| BundleError::Manifest {
            path: manifest_path.clone(),
            source,
        })?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(BundleError::SchemaVersion(manifest.schema_version));
    }
    if manifest.dim == 0 {
        return Err(BundleError::ZeroDim);
    }

    let doc_path = dir.join(&manifest.files.doc_embeddings);
    let doc_embeddings = read_f32le(&doc_path)?;
    let expected = manifest.n_docs * manifest.dim;
    if doc_embeddings.len() != expected {
        return Err(BundleError::PayloadSizeMismatch {
            file: manifest.files.doc_embeddings.clone(),
            expected: format!("{}x{}={expected}", manifest.n_docs, manifest.dim),
            actual: doc_embeddings.len().to_string(),
        });
    }
    let topic_embeddings = read_f32le(&dir.join(&manifest.files.topic_embeddings))?;

    let assignments_path = dir.join(&manifest.files.assignments);
    let file = fs::File::open(&assignments_path).map_err(io_err(&assignments_path))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| BundleError::Assignments(e.to_string()))?;
    if headers != vec!["doc_id", "topic_id"] {
        return Err(BundleError::Assignments(format!(
            "expected header doc_id,topic_id, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut doc_ids = Vec::with_capacity(manifest.n_docs);
    let mut native_assignments = Vec::with_capacity(manifest.n_docs);
    for record in reader.deserialize::<AssignmentRecord>() {
        let record = record.map_err(|e| BundleError::Assignments(e.to_string()))?;
        doc_ids.push(record.doc_id);
        native_assignments.push(TopicId(record.topic_id));
    }
    if doc_ids.len() != manifest.n_docs {
        return Err(BundleError::DocCountMismatch {
            manifest: manifest.n_docs,
            actual: doc_ids.len(),
        });
    }

    CorpusBundle::new(BundleParts {
        corpus_id: manifest.corpus_id,
        dim: manifest.dim,
        doc_ids,
        doc_embeddings,
        topics: manifest.topics,
        topic_embeddings,
        native_assignments,
    })
}

/// Writes `bundle` so that [`load_bundle`] reproduces it exactly. A centroid-filled
/// outlier row is left out of the payload and recomputed on load.
pub fn write_bundle(bundle: &CorpusBundle, dir: impl AsRef<Path>) -> Result<(), BundleError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        corpus_id: bundle.corpus_id.clone(),
        dim: bundle.dim,
        n_docs: bundle.n_docs(),
        topics: bundle.topics.clone(),
        files: ManifestFiles {
            doc_embeddings: DOC_EMBEDDINGS_FILE.into(),
            topic_embeddings: TOPIC_EMBEDDINGS_FILE.into(),
            assignments: ASSIGNMENTS_FILE.into(),
        },
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;

    write_f32le(&dir.join(DOC_EMBEDDINGS_FILE), &bundle.doc_embeddings)?;
    let topic_rows = match bundle.outlier {
        OutlierState::Centroid => &bundle.topic_embeddings[bundle.dim..],
        _ => &bundle.topic_embeddings[..],
    };
    write_f32le(&dir.join(TOPIC_EMBEDDINGS_FILE), topic_rows)?;

    let assignments_path = dir.join(ASSIGNMENTS_FILE);
    let file = fs::File::create(&assignments_path).map_err(io_err(&assignments_path))?;
    let mut writer = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| BundleError::Io {
        path: assignments_path.clone(),
        source: io::Error::other(e.to_string()),
    };
    writer
        .write_record(["doc_id", "topic_id"])
        .map_err(csv_err)?;
    for (doc_id, topic) in bundle.doc_ids.iter().zip(&bundle.native_assignments) {
        writer
            .write_record([doc_id.as_str(), &topic.0.to_string()])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|source| BundleError::Io {
        path: assignments_path.clone(),
        source,
    })?;
    Ok(())
}
