//! Embedded vector store with exact top-k cosine-distance search.
//!
//! On disk an index directory holds three files:
//!
//! * `manifest.json`: format version, dimension, model and estimator ids,
//!   object count.
//! * `objects.jsonl`: one JSON object per stored chunk (no vector).
//! * `vectors.bin`: the magic `NBSV1\0` followed by row-major little-endian
//!   `f32` vectors, row `i` belonging to line `i` of `objects.jsonl`.
//!
//! Vectors are stored as `f32`. The query is rounded to `f32` as well, and
//! the distance `1 - dot(q, v) / sqrt(|q|^2 |v|^2)` is evaluated in `f64`,
//! so a query equal to a stored vector scores exactly `0.0`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::EmbeddingVector;

pub const FORMAT_VERSION: u32 = 1;
pub const VECTORS_MAGIC: &[u8; 6] = b"NBSV1\0";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const OBJECTS_FILE: &str = "objects.jsonl";
pub const VECTORS_FILE: &str = "vectors.bin";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("vector has dimension {got}, store expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("key {0} appears twice in one upsert batch")]
    DuplicateKeyInBatch(ObjectKey),
    #[error("corrupt index in {dir}: {reason}")]
    CorruptIndex { dir: PathBuf, reason: String },
    #[error("invalid object {key}: {reason}")]
    InvalidObject { key: ObjectKey, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Upsert key of a stored chunk.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectKey {
    pub notebook_id: String,
    pub cell_index: u32,
    pub unit_index: u32,
}

impl ObjectKey {
    pub fn new(notebook_id: impl Into<String>, cell_index: u32, unit_index: u32) -> Self {
        Self { notebook_id: notebook_id.into(), cell_index, unit_index }
    }

    /// Parses `notebook:cell:unit`; the notebook id may itself contain `:`.
    pub fn parse(s: &str) -> Option<Self> {
        let mut parts = s.rsplitn(3, ':');
        let unit = parts.next()?.parse().ok()?;
        let cell = parts.next()?.parse().ok()?;
        let nb = parts.next().filter(|n| !n.is_empty())?;
        Some(Self::new(nb, cell, unit))
    }
}

impl std::fmt::Display for ObjectKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.notebook_id, self.cell_index, self.unit_index)
    }
}

/// One stored chunk. The first seven schema fields are `notebook_id`,
/// `contents`, `cell_type`, `author_name`, `modified_at`, `created_at`, and
/// the vector; the rest is chunk provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredObject {
    pub notebook_id: String,
    pub contents: String,
    /// `"text"` (markdown) or `"code"`.
    pub cell_type: String,
    pub author_name: String,
    pub modified_at: i64,
    pub created_at: i64,
    pub cell_index: u32,
    pub unit_index: u32,
    pub chunk_kind: String,
    /// Embedded text for summary chunks, whose `contents` hold the code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    /// Insertion sequence number, assigned by the store.
    pub seq: u64,
    #[serde(skip)]
    pub vector: Vec<f32>,
}

impl StoredObject {
    pub fn key(&self) -> ObjectKey {
        ObjectKey::new(self.notebook_id.clone(), self.cell_index, self.unit_index)
    }

    /// The text that was embedded for this object.
    pub fn embed_text(&self) -> &str {
        self.summary.as_deref().unwrap_or(&self.contents)
    }
}

/// Input to [`VectorStore::upsert`]; `seq` is assigned by the store.
#[derive(Debug, Clone, PartialEq)]
pub struct NewObject {
    pub notebook_id: String,
    pub contents: String,
    pub cell_type: String,
    pub author_name: String,
    pub modified_at: i64,
    pub created_at: i64,
    pub cell_index: u32,
    pub unit_index: u32,
    pub chunk_kind: String,
    pub summary: Option<String>,
    pub vector: EmbeddingVector,
}

impl NewObject {
    pub fn key(&self) -> ObjectKey {
        ObjectKey::new(self.notebook_id.clone(), self.cell_index, self.unit_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub object: StoredObject,
    /// `1 - cosine similarity`, in `[0, 2]`.
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchFilter {
    pub cell_type: Option<String>,
    pub notebook_prefix: Option<String>,
}

impl SearchFilter {
    pub fn matches(&self, obj: &StoredObject) -> bool {
        self.cell_type.as_deref().is_none_or(|t| obj.cell_type == t)
            && self.notebook_prefix.as_deref().is_none_or(|p| obj.notebook_id.starts_with(p))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpsertReport {
    pub inserted: usize,
    pub replaced: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    /// 0 until the first vector is stored.
    pub dim: usize,
    pub model_id: String,
    pub estimator_id: String,
    pub object_count: usize,
    #[serde(default)]
    pub next_seq: u64,
}

#[derive(Debug, Clone)]
struct Row {
    object: StoredObject,
    sq_norm: f64,
}

#[derive(Debug, Clone)]
struct State {
    dim: usize,
    model_id: String,
    estimator_id: String,
    rows: Vec<Row>,
    by_key: HashMap<ObjectKey, usize>,
    next_seq: u64,
}

impl State {
    fn reindex(&mut self) {
        self.by_key = self.rows.iter().enumerate().map(|(i, r)| (r.object.key(), i)).collect();
    }

    fn manifest(&self) -> Manifest {
        Manifest {
            format_version: FORMAT_VERSION,
            dim: self.dim,
            model_id: self.model_id.clone(),
            estimator_id: self.estimator_id.clone(),
            object_count: self.rows.len(),
            next_seq: self.next_seq,
        }
    }
}

fn squared_norm(v: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for &x in v {
        acc += f64::from(x) * f64::from(x);
    }
    acc
}

fn cosine_distance(query: &[f64], query_sq_norm: f64, row: &Row) -> f64 {
    let mut dot = 0.0f64;
    for (q, &v) in query.iter().zip(&row.object.vector) {
        dot += q * f64::from(v);
    }
    let denom = (query_sq_norm * row.sq_norm).sqrt();
    let sim = if denom > 0.0 { dot / denom } else { 0.0 };
    (1.0 - sim).clamp(0.0, 2.0)
}

/// Max-heap entry ordered by (distance, seq).
struct Candidate {
    distance: f64,
    seq: u64,
    row: usize,
}

impl Candidate {
    fn rank(&self, other: &Self) -> Ordering {
        self.distance.total_cmp(&other.distance).then(self.seq.cmp(&other.seq))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank(other)
    }
}

/// Thread-safe store: concurrent searches, one writer at a time. When
/// opened on a directory every mutation is persisted before it returns.
#[derive(Debug)]
pub struct VectorStore {
    state: RwLock<State>,
    dir: Option<PathBuf>,
    mutations: AtomicU64,
}

impl VectorStore {
    /// Empty in-memory store. `dim == 0` adopts the dimension of the first
    /// upserted vector.
    pub fn new(dim: usize, model_id: impl Into<String>, estimator_id: impl Into<String>) -> Self {
        Self {
            state: RwLock::new(State {
                dim,
                model_id: model_id.into(),
                estimator_id: estimator_id.into(),
                rows: Vec::new(),
                by_key: HashMap::new(),
                next_seq: 0,
            }),
            dir: None,
            mutations: AtomicU64::new(0),
        }
    }

    /// Loads the store in `dir`, or creates an empty one there if the
    /// directory has no manifest. The returned store persists mutations.
    pub fn open(dir: &Path, model_id: impl Into<String>, estimator_id: impl Into<String>) -> Result<Self, StoreError> {
        let mut store = if dir.join(MANIFEST_FILE).exists() {
            Self::load(dir)?
        } else {
            let s = Self::new(0, model_id, estimator_id);
            s.save(dir)?;
            s
        };
        store.dir = Some(dir.to_path_buf());
        Ok(store)
    }

    /// Attaches a directory: saves there now and after every mutation.
    pub fn persist_to(mut self, dir: &Path) -> Result<Self, StoreError> {
        self.save(dir)?;
        self.dir = Some(dir.to_path_buf());
        Ok(self)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.read().dim
    }

    pub fn model_id(&self) -> String {
        self.read().model_id.clone()
    }

    pub fn estimator_id(&self) -> String {
        self.read().estimator_id.clone()
    }

    pub fn len(&self) -> usize {
        self.read().rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of committed mutations (upserts and deletes that changed
    /// something) since this handle was created.
    pub fn mutation_count(&self) -> u64 {
        self.mutations.load(AtomicOrdering::SeqCst)
    }

    pub fn manifest(&self) -> Manifest {
        self.read().manifest()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn get(&self, key: &ObjectKey) -> Option<StoredObject> {
        let st = self.read();
        st.by_key.get(key).map(|&i| st.rows[i].object.clone())
    }

    pub fn objects(&self) -> Vec<StoredObject> {
        self.read().rows.iter().map(|r| r.object.clone()).collect()
    }

    /// Chunk count per notebook id.
    pub fn notebook_counts(&self) -> HashMap<String, usize> {
        let mut counts = HashMap::new();
        for r in &self.read().rows {
            *counts.entry(r.object.notebook_id.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn upsert(&self, objects: Vec<NewObject>) -> Result<UpsertReport, StoreError> {
        let mut seen = HashSet::with_capacity(objects.len());
        for o in &objects {
            if !seen.insert(o.key()) {
                return Err(StoreError::DuplicateKeyInBatch(o.key()));
            }
            if o.cell_type != "text" && o.cell_type != "code" {
                return Err(StoreError::InvalidObject {
                    key: o.key(),
                    reason: format!("cell_type {:?} is neither \"text\" nor \"code\"", o.cell_type),
                });
            }
        }
        if objects.is_empty() {
            return Ok(UpsertReport::default());
        }

        let mut st = self.write();
        let dim = if st.dim == 0 { objects[0].vector.dim() } else { st.dim };
        if let Some(o) = objects.iter().find(|o| o.vector.dim() != dim || dim == 0) {
            return Err(StoreError::DimensionMismatch { expected: dim, got: o.vector.dim() });
        }

        let mut next = st.clone();
        next.dim = dim;
        let mut report = UpsertReport::default();
        for o in objects {
            let key = o.key();
            let vector: Vec<f32> = o.vector.values.iter().map(|&v| v as f32).collect();
            let sq_norm = squared_norm(&vector);
            let seq = match next.by_key.get(&key) {
                Some(&i) => next.rows[i].object.seq,
                None => {
                    next.next_seq += 1;
                    next.next_seq - 1
                }
            };
            let object = StoredObject {
                notebook_id: o.notebook_id,
                contents: o.contents,
                cell_type: o.cell_type,
                author_name: o.author_name,
                modified_at: o.modified_at,
                created_at: o.created_at,
                cell_index: o.cell_index,
                unit_index: o.unit_index,
                chunk_kind: o.chunk_kind,
                summary: o.summary,
                seq,
                vector,
            };
            match next.by_key.get(&key) {
                Some(&i) => {
                    next.rows[i] = Row { object, sq_norm };
                    report.replaced += 1;
                }
                None => {
                    next.by_key.insert(key, next.rows.len());
                    next.rows.push(Row { object, sq_norm });
                    report.inserted += 1;
                }
            }
        }
        self.commit(&mut st, next)?;
        Ok(report)
    }

    /// Removes every object of `notebook_id`; returns how many were removed.
    pub fn delete_notebook(&self, notebook_id: &str) -> Result<usize, StoreError> {
        let mut st = self.write();
        let before = st.rows.len();
        if !st.rows.iter().any(|r| r.object.notebook_id == notebook_id) {
            return Ok(0);
        }
        let mut next = st.clone();
        next.rows.retain(|r| r.object.notebook_id != notebook_id);
        next.reindex();
        let removed = before - next.rows.len();
        self.commit(&mut st, next)?;
        Ok(removed)
    }

    /// Persists `next` (when directory-backed) and swaps it in. On failure
    /// the in-memory state is left unchanged.
    fn commit(&self, st: &mut State, next: State) -> Result<(), StoreError> {
        if let Some(dir) = &self.dir {
            write_state(dir, &next)?;
        }
        *st = next;
        self.mutations.fetch_add(1, AtomicOrdering::SeqCst);
        Ok(())
    }

    /// The `min(k, matching)` objects nearest to `query`, ordered by
    /// (distance, seq).
    pub fn search(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: &SearchFilter,
    ) -> Result<Vec<SearchHit>, StoreError> {
        let st = self.read();
        if st.dim != 0 && query.dim() != st.dim {
            return Err(StoreError::DimensionMismatch { expected: st.dim, got: query.dim() });
        }
        if k == 0 || st.rows.is_empty() {
            return Ok(Vec::new());
        }
        let q: Vec<f64> = query.values.iter().map(|&v| f64::from(v as f32)).collect();
        let mut q_sq = 0.0f64;
        for x in &q {
            q_sq += x * x;
        }

        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        for (i, row) in st.rows.iter().enumerate() {
            if !filter.matches(&row.object) {
                continue;
            }
            let cand = Candidate { distance: cosine_distance(&q, q_sq, row), seq: row.object.seq, row: i };
            if heap.len() < k {
                heap.push(cand);
            } else if heap.peek().is_some_and(|worst| cand < *worst) {
                heap.pop();
                heap.push(cand);
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| SearchHit { object: st.rows[c.row].object.clone(), distance: c.distance })
            .collect())
    }

    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        write_state(dir, &self.read())
    }

    /// Reads a saved store. The result is in-memory; use [`Self::open`] for
    /// a persisting handle.
    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let corrupt = |reason: String| StoreError::CorruptIndex { dir: dir.to_path_buf(), reason };
        let io = |path: PathBuf| move |source| StoreError::Io { path, source };

        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest_text = match fs::read_to_string(&manifest_path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(corrupt(format!("missing {MANIFEST_FILE}")))
            }
            Err(e) => return Err(io(manifest_path)(e)),
        };
        let manifest: Manifest =
            serde_json::from_str(&manifest_text).map_err(|e| corrupt(format!("bad manifest: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported format_version {}", manifest.format_version)));
        }

        let objects_path = dir.join(OBJECTS_FILE);
        let file = fs::File::open(&objects_path).map_err(|e| corrupt(format!("{OBJECTS_FILE}: {e}")))?;
        let mut objects = Vec::with_capacity(manifest.object_count);
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io(objects_path.clone()))?;
            if line.trim().is_empty() {
                continue;
            }
            let obj: StoredObject =
                serde_json::from_str(&line).map_err(|e| corrupt(format!("{OBJECTS_FILE} line {}: {e}", n + 1)))?;
            objects.push(obj);
        }
        if objects.len() != manifest.object_count {
            return Err(corrupt(format!(
                "manifest lists {} objects, {OBJECTS_FILE} has {}",
                manifest.object_count,
                objects.len()
            )));
        }

        let vectors_path = dir.join(VECTORS_FILE);
        let bytes = fs::read(&vectors_path).map_err(|e| corrupt(format!("{VECTORS_FILE}: {e}")))?;
        if bytes.len() < VECTORS_MAGIC.len() || &bytes[..VECTORS_MAGIC.len()] != VECTORS_MAGIC {
            return Err(corrupt("bad magic in vectors.bin".into()));
        }
        let payload = &bytes[VECTORS_MAGIC.len()..];
        let row_bytes = manifest.dim * 4;
        if payload.len() != manifest.object_count * row_bytes {
            return Err(corrupt(format!(
                "{VECTORS_FILE} holds {} bytes of vectors, expected {} rows of dim {}",
                payload.len(),
                manifest.object_count,
                manifest.dim
            )));
        }
        if manifest.dim == 0 && manifest.object_count > 0 {
            return Err(corrupt("objects stored with dimension 0".into()));
        }

        let mut rows = Vec::with_capacity(objects.len());
        for (i, mut object) in objects.into_iter().enumerate() {
            object.vector = payload[i * row_bytes..(i + 1) * row_bytes]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            if object.cell_type != "text" && object.cell_type != "code" {
                return Err(corrupt(format!("object {} has cell_type {:?}", object.key(), object.cell_type)));
            }
            let sq_norm = squared_norm(&object.vector);
            rows.push(Row { object, sq_norm });
        }

        let next_seq = rows.iter().map(|r| r.object.seq + 1).max().unwrap_or(0).max(manifest.next_seq);
        let mut state = State {
            dim: manifest.dim,
            model_id: manifest.model_id,
            estimator_id: manifest.estimator_id,
            rows,
            by_key: HashMap::new(),
            next_seq,
        };
        state.reindex();
        if state.by_key.len() != state.rows.len() {
            return Err(corrupt("duplicate object keys".into()));
        }
        Ok(Self { state: RwLock::new(state), dir: None, mutations: AtomicU64::new(0) })
    }
}

/// Writes all three files through temporaries and renames them into place,
/// manifest last.
fn write_state(dir: &Path, st: &State) -> Result<(), StoreError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| StoreError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;

    let objects_tmp = dir.join(format!("{OBJECTS_FILE}.tmp"));
    {
        let mut w = BufWriter::new(fs::File::create(&objects_tmp).map_err(io(&objects_tmp))?);
        for r in &st.rows {
            let line = serde_json::to_string(&r.object).expect("stored objects serialize");
            writeln!(w, "{line}").map_err(io(&objects_tmp))?;
        }
        w.into_inner().map_err(|e| e.into_error()).and_then(|f| f.sync_all()).map_err(io(&objects_tmp))?;
    }

    let vectors_tmp = dir.join(format!("{VECTORS_FILE}.tmp"));
    {
        let mut buf = Vec::with_capacity(VECTORS_MAGIC.len() + st.rows.len() * st.dim * 4);
        buf.extend_from_slice(VECTORS_MAGIC);
        for r in &st.rows {
            for v in &r.object.vector {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = fs::File::create(&vectors_tmp).map_err(io(&vectors_tmp))?;
        f.write_all(&buf).and_then(|_| f.sync_all()).map_err(io(&vectors_tmp))?;
    }

    let manifest_tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    let manifest = serde_json::to_string_pretty(&st.manifest()).expect("manifest serializes");
    fs::write(&manifest_tmp, manifest).map_err(io(&manifest_tmp))?;

    for (tmp, name) in [(objects_tmp, OBJECTS_FILE), (vectors_tmp, VECTORS_FILE), (manifest_tmp, MANIFEST_FILE)] {
        let dest = dir.join(name);
        fs::rename(&tmp, &dest).map_err(io(&dest))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector { values: values.to_vec(), model_id: "test".into() }
    }

    fn obj(nb: &str, cell: u32, values: &[f64]) -> NewObject {
        NewObject {
            notebook_id: nb.into(),
            contents: format!("{nb} cell {cell}"),
            cell_type: if cell.is_multiple_of(2) { "code".into() } else { "text".into() },
            author_name: "ada".into(),
            modified_at: 2,
            created_at: 1,
            cell_index: cell,
            unit_index: 0,
            chunk_kind: "WholeCell".into(),
            summary: None,
            vector: vec_of(values),
        }
    }

    fn axis_store() -> VectorStore {
        let s = VectorStore::new(4, "test", "heuristic-v1");
        s.upsert(vec![
            obj("a", 0, &[1.0, 0.0, 0.0, 0.0]),
            obj("b", 0, &[0.0, 1.0, 0.0, 0.0]),
            obj("c", 0, &[-1.0, 0.0, 0.0, 0.0]),
        ])
        .unwrap();
        s
    }

    #[test]
    fn upsert_then_replace() {
        let s = axis_store();
        assert_eq!(s.len(), 3);
        let again = s
            .upsert(vec![
                obj("a", 0, &[0.0, 0.0, 1.0, 0.0]),
                obj("b", 0, &[0.0, 0.0, 1.0, 0.0]),
                obj("c", 0, &[0.0, 0.0, 1.0, 0.0]),
            ])
            .unwrap();
        assert_eq!(again, UpsertReport { inserted: 0, replaced: 3 });
        let seqs: Vec<_> = s.objects().iter().map(|o| o.seq).collect();
        assert_eq!(seqs, vec![0, 1, 2]);
    }

    #[test]
    fn duplicate_key_in_batch() {
        let s = VectorStore::new(4, "test", "h");
        let err = s.upsert(vec![obj("a", 0, &[1.0, 0.0, 0.0, 0.0]), obj("a", 0, &[0.0, 1.0, 0.0, 0.0])]);
        assert!(matches!(err, Err(StoreError::DuplicateKeyInBatch(_))));
        assert!(s.is_empty());
    }

    #[test]
    fn dimension_mismatch() {
        let s = axis_store();
        assert!(matches!(
            s.upsert(vec![obj("d", 0, &[1.0, 0.0])]),
            Err(StoreError::DimensionMismatch { expected: 4, got: 2 })
        ));
        assert!(matches!(
            s.search(&vec_of(&[1.0]), 1, &SearchFilter::default()),
            Err(StoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn axis_distances() {
        let hits = axis_store().search(&vec_of(&[1.0, 0.0, 0.0, 0.0]), 3, &SearchFilter::default()).unwrap();
        let got: Vec<_> = hits.iter().map(|h| (h.object.notebook_id.as_str(), h.distance)).collect();
        assert_eq!(got, vec![("a", 0.0), ("b", 1.0), ("c", 2.0)]);
    }

    #[test]
    fn ties_break_by_seq() {
        let s = VectorStore::new(2, "test", "h");
        s.upsert(vec![obj("second", 0, &[0.6, 0.8])]).unwrap();
        s.upsert(vec![obj("first", 0, &[0.6, 0.8])]).unwrap();
        let hits = s.search(&vec_of(&[0.6, 0.8]), 2, &SearchFilter::default()).unwrap();
        assert_eq!(hits[0].object.notebook_id, "second");
        assert_eq!(hits[0].distance, hits[1].distance);
    }

    #[test]
    fn k_larger_than_store() {
        let hits = axis_store().search(&vec_of(&[0.0, 1.0, 0.0, 0.0]), 10, &SearchFilter::default()).unwrap();
        assert_eq!(hits.len(), 3);
    }

    #[test]
    fn filter_by_type_and_prefix() {
        let s = VectorStore::new(2, "test", "h");
        s.upsert(vec![obj("x/a", 0, &[1.0, 0.0]), obj("x/a", 1, &[1.0, 0.0]), obj("y/b", 0, &[1.0, 0.0])]).unwrap();
        let f = SearchFilter { cell_type: Some("code".into()), notebook_prefix: Some("x/".into()) };
        let hits = s.search(&vec_of(&[1.0, 0.0]), 5, &f).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].object.key(), ObjectKey::new("x/a", 0, 0));
    }

    #[test]
    fn delete_notebook_counts() {
        let s = VectorStore::new(2, "test", "h");
        s.upsert((0..5).map(|c| obj("nb", c, &[1.0, 0.0])).collect()).unwrap();
        s.upsert(vec![obj("other", 0, &[0.0, 1.0])]).unwrap();
        assert_eq!(s.delete_notebook("nb").unwrap(), 5);
        assert_eq!(s.delete_notebook("unknown").unwrap(), 0);
        let hits = s.search(&vec_of(&[1.0, 0.0]), 10, &SearchFilter::default()).unwrap();
        assert!(hits.iter().all(|h| h.object.notebook_id != "nb"));
        assert_eq!(s.mutation_count(), 3);
    }

    #[test]
    fn seq_not_reused_after_delete() {
        let s = axis_store();
        s.delete_notebook("c").unwrap();
        s.upsert(vec![obj("d", 0, &[0.0, 0.0, 0.0, 1.0])]).unwrap();
        assert_eq!(s.get(&ObjectKey::new("d", 0, 0)).unwrap().seq, 3);
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let s = axis_store();
        s.save(dir.path()).unwrap();
        let loaded = VectorStore::load(dir.path()).unwrap();
        assert_eq!(loaded.objects(), s.objects());
        assert_eq!(loaded.manifest(), s.manifest());
        let bytes = fs::read(dir.path().join(VECTORS_FILE)).unwrap();
        assert_eq!(&bytes[..6], b"NBSV1\0");
        assert_eq!(bytes.len(), 6 + 3 * 4 * 4);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(VectorStore::load(dir.path()), Err(StoreError::CorruptIndex { .. })));

        axis_store().save(dir.path()).unwrap();
        let vp = dir.path().join(VECTORS_FILE);
        let bytes = fs::read(&vp).unwrap();
        fs::write(&vp, &bytes[..bytes.len() - 16]).unwrap();
        assert!(matches!(VectorStore::load(dir.path()), Err(StoreError::CorruptIndex { .. })));

        let mut bad = bytes.clone();
        bad[0] = b'X';
        fs::write(&vp, bad).unwrap();
        assert!(matches!(VectorStore::load(dir.path()), Err(StoreError::CorruptIndex { .. })));
    }

    #[test]
    fn open_persists_mutations() {
        let dir = tempfile::tempdir().unwrap();
        let s = VectorStore::open(dir.path(), "test", "h").unwrap();
        assert_eq!(s.dim(), 0);
        s.upsert(vec![obj("a", 0, &[1.0, 0.0])]).unwrap();
        let reloaded = VectorStore::load(dir.path()).unwrap();
        assert_eq!(reloaded.len(), 1);
        assert_eq!(reloaded.dim(), 2);
        s.delete_notebook("a").unwrap();
        assert!(VectorStore::load(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn object_key_parse() {
        assert_eq!(ObjectKey::parse("nb.ipynb:3:1"), Some(ObjectKey::new("nb.ipynb", 3, 1)));
        assert_eq!(ObjectKey::parse("c:/x.ipynb:0:2"), Some(ObjectKey::new("c:/x.ipynb", 0, 2)));
        assert_eq!(ObjectKey::parse("nb:x:1"), None);
        assert_eq!(ObjectKey::parse(":1:1"), None);
    }
}
