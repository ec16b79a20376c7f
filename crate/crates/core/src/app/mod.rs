//! Commands tying the pipeline together: full index, periodic sync, query,
//! and evaluation. The `nbsearch` binary is a thin argument parser over
//! these functions.

mod config;
mod state;

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use config::AppConfig;
pub use state::{IndexLock, NotebookState, SyncState, LOCK_FILE, STATE_FILE};

use crate::chunker::{plan_chunks, ChunkError, TokenBudget};
use crate::gateway::{GatewayError, ModelGateway};
use crate::notebook::{load_notebook, scan_repository, CellKind, NotebookDocument, NotebookError, ScannedFile};
use crate::preprocess::{clean_code, clean_markdown};
use crate::query::{parse_query_set, EvalReport, LineError, Query, QueryEngine, QueryError};
use crate::store::{NewObject, SearchHit, StoreError, VectorStore, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no index found in {0}; run `nbsearch index` first")]
    MissingIndex(PathBuf),
    #[error("the index is empty")]
    EmptyStore,
    #[error(
        "index in {dir} was built with model {found:?}, current model is {expected:?}; run `nbsearch index` to rebuild"
    )]
    ModelMismatch { dir: PathBuf, found: String, expected: String },
    #[error("index directory {0} is locked by another sync process")]
    Locked(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Notebook(#[from] NotebookError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Query(QueryError),
}

impl From<QueryError> for AppError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::EmptyStore => AppError::EmptyStore,
            other => AppError::Query(other),
        }
    }
}

impl AppError {
    /// 2 for queries that cannot run because there is nothing indexed,
    /// 1 for every other failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::MissingIndex(_) | AppError::EmptyStore => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AppError {
    let path = path.to_path_buf();
    move |source| AppError::Io { path, source }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IndexSummary {
    pub notebooks: usize,
    pub chunks: usize,
    /// Cells left out because they could not be chunked.
    pub skipped: usize,
    /// Files that could not be read or parsed.
    pub errors: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CycleSummary {
    pub added: usize,
    pub updated: usize,
    pub removed: usize,
    pub errors: usize,
    pub skipped_cells: usize,
    pub store_writes: u64,
}

/// Chunks and embeds notebooks into store objects.
pub struct Pipeline<'a> {
    pub gateway: &'a ModelGateway,
    pub budget: TokenBudget,
}

/// Objects for one notebook plus the number of cells that were skipped.
pub struct NotebookObjects {
    pub objects: Vec<NewObject>,
    pub skipped_cells: usize,
}

impl<'a> Pipeline<'a> {
    pub fn new(gateway: &'a ModelGateway, token_budget: usize) -> Self {
        Self { gateway, budget: TokenBudget::new(token_budget) }
    }

    pub fn build(&self, doc: &NotebookDocument) -> Result<NotebookObjects, GatewayError> {
        let mut chunks = Vec::new();
        let mut skipped_cells = 0;
        for cell in &doc.cells {
            let cleaned = match cell.kind {
                CellKind::Markdown => clean_markdown(&cell.source),
                CellKind::Code => clean_code(&cell.source),
            };
            match plan_chunks(&doc.notebook_id, cell, &cleaned, &self.budget, self.gateway) {
                Ok(planned) => chunks.extend(planned),
                Err(e @ ChunkError::SummarizerUnavailable(_)) | Err(e @ ChunkError::SyntaxErrorInCell(_)) => {
                    log::warn!("{} cell {}: skipped: {e}", doc.notebook_id, cell.cell_index);
                    skipped_cells += 1;
                }
            }
        }
        if chunks.is_empty() {
            return Ok(NotebookObjects { objects: Vec::new(), skipped_cells });
        }

        let texts: Vec<&str> = chunks.iter().map(|c| c.embed_text.as_str()).collect();
        let vectors = self.gateway.embed_batch(&texts)?;
        let objects = chunks
            .into_iter()
            .zip(vectors)
            .map(|(c, vector)| NewObject {
                notebook_id: c.notebook_id,
                summary: (c.embed_text != c.contents).then_some(c.embed_text),
                contents: c.contents,
                cell_type: c.cell_type.as_str().to_string(),
                author_name: doc.author_name.clone(),
                modified_at: doc.modified_at,
                created_at: doc.created_at,
                cell_index: c.cell_index as u32,
                unit_index: c.unit_index as u32,
                chunk_kind: c.kind.as_str().to_string(),
                vector,
            })
            .collect();
        Ok(NotebookObjects { objects, skipped_cells })
    }
}

fn now_secs() -> i64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs() as i64).unwrap_or(0)
}

/// Rebuilds the index from scratch over every matching notebook.
pub fn cmd_index(cfg: &AppConfig, gateway: &ModelGateway) -> Result<IndexSummary, AppError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.index_dir).map_err(io_err(&cfg.index_dir))?;
    let _lock = IndexLock::acquire(&cfg.index_dir)?;

    let pipeline = Pipeline::new(gateway, cfg.token_budget);
    let files = scan_repository(&cfg.repo_root, &cfg.glob)?;
    let store = VectorStore::new(0, gateway.embed_model_id(), pipeline.budget.estimator_id());
    let mut state = SyncState::default();
    let mut summary = IndexSummary::default();

    for file in &files {
        let doc = match load_notebook(file) {
            Ok(doc) => doc,
            Err(e) => {
                log::warn!("skipping {}: {e}", file.path);
                summary.errors += 1;
                continue;
            }
        };
        let built = pipeline.build(&doc)?;
        summary.notebooks += 1;
        summary.chunks += built.objects.len();
        summary.skipped += built.skipped_cells;
        state.record(file, built.objects.len());
        store.upsert(built.objects)?;
    }

    store.save(&cfg.index_dir)?;
    state.last_sync_at = now_secs();
    state.save(&cfg.index_dir)?;
    Ok(summary)
}

/// Incremental synchronization of an existing index with the repository.
pub struct Syncer<'a> {
    cfg: &'a AppConfig,
    pipeline: Pipeline<'a>,
    store: VectorStore,
    state: SyncState,
    _lock: IndexLock,
}

impl<'a> Syncer<'a> {
    pub fn open(cfg: &'a AppConfig, gateway: &'a ModelGateway) -> Result<Self, AppError> {
        cfg.validate()?;
        if !cfg.index_dir.join(MANIFEST_FILE).exists() {
            return Err(AppError::MissingIndex(cfg.index_dir.clone()));
        }
        let lock = IndexLock::acquire(&cfg.index_dir)?;
        let pipeline = Pipeline::new(gateway, cfg.token_budget);
        let store = VectorStore::open(&cfg.index_dir, gateway.embed_model_id(), pipeline.budget.estimator_id())?;
        check_model(&cfg.index_dir, &store, gateway)?;
        let state = SyncState::load(&cfg.index_dir)?;
        Ok(Self { cfg, pipeline, store, state, _lock: lock })
    }

    pub fn store(&self) -> &VectorStore {
        &self.store
    }

    pub fn state(&self) -> &SyncState {
        &self.state
    }

    /// One reconcile pass: changed files are deleted then re-indexed,
    /// vanished files are deleted, unchanged files are not touched.
    pub fn cycle(&mut self) -> Result<CycleSummary, AppError> {
        let writes_before = self.store.mutation_count();
        let files = scan_repository(&self.cfg.repo_root, &self.cfg.glob)?;
        let mut summary = CycleSummary::default();

        // Entries whose chunk count disagrees with the store (an interrupted
        // earlier cycle) are forgotten so the file gets re-indexed.
        let counts = self.store.notebook_counts();
        self.state.notebooks.retain(|id, entry| counts.get(id).copied().unwrap_or(0) == entry.chunk_count);

        for file in &files {
            let known_hash = self.state.notebooks.get(&file.path).map(|e| e.content_hash);
            match known_hash {
                Some(hash) if hash == file.content_hash => {
                    if let Some(entry) = self.state.notebooks.get_mut(&file.path) {
                        entry.modified_at = file.modified_at;
                    }
                }
                Some(_) => {
                    if self.reindex(file, &mut summary) {
                        summary.updated += 1;
                    }
                }
                None => {
                    if self.reindex(file, &mut summary) {
                        summary.added += 1;
                    }
                }
            }
        }

        let live: std::collections::HashSet<&str> = files.iter().map(|f| f.path.as_str()).collect();
        let mut stale: Vec<String> = self
            .state
            .notebooks
            .keys()
            .chain(self.store.notebook_counts().keys())
            .filter(|id| !live.contains(id.as_str()))
            .cloned()
            .collect();
        stale.sort();
        stale.dedup();
        for id in stale {
            self.store.delete_notebook(&id)?;
            self.state.notebooks.remove(&id);
            summary.removed += 1;
        }

        self.state.last_sync_at = now_secs();
        self.state.save(&self.cfg.index_dir)?;
        summary.store_writes = self.store.mutation_count() - writes_before;
        Ok(summary)
    }

    /// Returns whether the file ended up indexed. Failures are logged and
    /// counted; a file that no longer parses is dropped from the index.
    fn reindex(&mut self, file: &ScannedFile, summary: &mut CycleSummary) -> bool {
        let result = load_notebook(file)
            .map_err(AppError::from)
            .and_then(|doc| self.pipeline.build(&doc).map_err(AppError::from));
        let built = match result {
            Ok(built) => built,
            Err(e) => {
                log::warn!("sync: {}: {e}", file.path);
                summary.errors += 1;
                if self.state.notebooks.remove(&file.path).is_some() {
                    summary.removed += 1;
                }
                if let Err(e) = self.store.delete_notebook(&file.path) {
                    log::error!("sync: could not drop {}: {e}", file.path);
                }
                return false;
            }
        };
        summary.skipped_cells += built.skipped_cells;
        let count = built.objects.len();
        let write = self.store.delete_notebook(&file.path).and_then(|_| self.store.upsert(built.objects));
        match write {
            Ok(_) => {
                self.state.record(file, count);
                true
            }
            Err(e) => {
                log::error!("sync: {}: {e}", file.path);
                summary.errors += 1;
                self.state.notebooks.remove(&file.path);
                false
            }
        }
    }
}

fn check_model(dir: &Path, store: &VectorStore, gateway: &ModelGateway) -> Result<(), AppError> {
    let expected = gateway.embed_model_id();
    let found = store.model_id();
    if found != expected {
        return Err(AppError::ModelMismatch { dir: dir.to_path_buf(), found, expected });
    }
    Ok(())
}

/// Runs sync cycles every `interval` (or once), reporting each summary to
/// `on_cycle`.
pub fn cmd_sync(
    cfg: &AppConfig,
    gateway: &ModelGateway,
    once: bool,
    mut on_cycle: impl FnMut(&CycleSummary),
) -> Result<(), AppError> {
    let mut syncer = Syncer::open(cfg, gateway)?;
    loop {
        match syncer.cycle() {
            Ok(summary) => on_cycle(&summary),
            Err(e) if once => return Err(e),
            Err(e) => log::error!("sync cycle failed: {e}"),
        }
        if once {
            return Ok(());
        }
        thread::sleep(Duration::from_secs(cfg.sync_interval_s));
    }
}

/// Loads the index read-only. A load that races a concurrent writer's
/// file renames is retried.
pub fn open_index(cfg: &AppConfig) -> Result<VectorStore, AppError> {
    if !cfg.index_dir.join(MANIFEST_FILE).exists() {
        return Err(AppError::MissingIndex(cfg.index_dir.clone()));
    }
    let mut attempt = 0;
    loop {
        match VectorStore::load(&cfg.index_dir) {
            Err(StoreError::CorruptIndex { .. }) if attempt < 3 => {
                attempt += 1;
                thread::sleep(Duration::from_millis(50));
            }
            other => return other.map_err(AppError::from),
        }
    }
}

pub fn cmd_query(cfg: &AppConfig, gateway: &ModelGateway, query: &Query) -> Result<Vec<SearchHit>, AppError> {
    let store = open_index(cfg)?;
    if store.is_empty() {
        return Err(AppError::EmptyStore);
    }
    check_model(&cfg.index_dir, &store, gateway)?;
    let budget = TokenBudget::new(cfg.token_budget);
    Ok(QueryEngine::new(&store, gateway, &budget).run(query)?)
}

pub const PREVIEW_CHARS: usize = 120;

pub fn preview(contents: &str) -> String {
    contents.split_whitespace().collect::<Vec<_>>().join(" ").chars().take(PREVIEW_CHARS).collect()
}

/// `rank  distance  notebook  cell/unit  kind  preview`, one line per hit.
pub fn render_hits(hits: &[SearchHit]) -> String {
    hits.iter()
        .enumerate()
        .map(|(i, h)| {
            let o = &h.object;
            format!(
                "{}\t{:.4}\t{}\t{}/{}\t{}\t{}\n",
                i + 1,
                h.distance,
                o.notebook_id,
                o.cell_index,
                o.unit_index,
                o.chunk_kind,
                preview(&o.contents)
            )
        })
        .collect()
}

pub fn hits_json(hits: &[SearchHit]) -> Value {
    Value::Array(
        hits.iter()
            .enumerate()
            .map(|(i, h)| {
                let o = &h.object;
                json!({
                    "rank": i + 1,
                    "distance": h.distance,
                    "notebook_id": o.notebook_id,
                    "cell_index": o.cell_index,
                    "unit_index": o.unit_index,
                    "chunk_kind": o.chunk_kind,
                    "cell_type": o.cell_type,
                    "author_name": o.author_name,
                    "modified_at": o.modified_at,
                    "created_at": o.created_at,
                    "contents": o.contents,
                    "preview": preview(&o.contents),
                })
            })
            .collect(),
    )
}

pub struct EvalOutcome {
    pub report: EvalReport,
    pub line_errors: Vec<LineError>,
    pub report_path: PathBuf,
}

/// `queries.jsonl` -> `queries.report.json` in the same directory.
pub fn report_path_for(queries_file: &Path) -> PathBuf {
    let stem = queries_file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    queries_file.with_file_name(format!("{stem}.report.json"))
}

pub fn cmd_eval(cfg: &AppConfig, gateway: &ModelGateway, queries_file: &Path) -> Result<EvalOutcome, AppError> {
    let text = fs::read_to_string(queries_file).map_err(io_err(queries_file))?;
    let (queries, line_errors) = parse_query_set(&text, cfg.k_default);
    for e in &line_errors {
        log::warn!("{}: {e}", queries_file.display());
    }
    let store = open_index(cfg)?;
    if store.is_empty() {
        return Err(AppError::EmptyStore);
    }
    check_model(&cfg.index_dir, &store, gateway)?;
    let budget = TokenBudget::new(cfg.token_budget);
    let report = QueryEngine::new(&store, gateway, &budget).evaluate(&queries)?;

    let report_path = report_path_for(queries_file);
    let mut doc = report.to_json();
    doc["malformed_lines"] = serde_json::to_value(
        line_errors.iter().map(|e| json!({"line": e.line, "error": e.message})).collect::<Vec<_>>(),
    )
    .expect("line errors serialize");
    let body = serde_json::to_string_pretty(&doc).expect("report serializes");
    fs::write(&report_path, body).map_err(io_err(&report_path))?;
    Ok(EvalOutcome { report, line_errors, report_path })
}
