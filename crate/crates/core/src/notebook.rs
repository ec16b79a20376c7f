//! Notebook discovery and parsing.
//!
//! Only nbformat-v4 documents are accepted: a JSON object with a top-level
//! `cells` array. Markdown and code cells are kept; every other cell type
//! (`raw`, unknown) is dropped, as are outputs and execution metadata.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use globset::{Glob, GlobMatcher};
use serde_json::Value;
use thiserror::Error;
use walkdir::WalkDir;

use crate::hash::fnv1a64;

pub const DEFAULT_GLOB: &str = "**/*.ipynb";

#[derive(Debug, Error)]
pub enum NotebookError {
    #[error("malformed notebook {path}: {reason}")]
    MalformedNotebook { path: String, reason: String },
    #[error("repository root not found: {0}")]
    RootNotFound(PathBuf),
    #[error("invalid glob pattern {pattern:?}: {reason}")]
    BadGlob { pattern: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Markdown,
    Code,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub cell_index: usize,
    pub kind: CellKind,
    pub source: String,
}

/// Filesystem-derived metadata for one notebook file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileMeta {
    pub created_at: i64,
    pub modified_at: i64,
    pub author_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotebookDocument {
    /// Repository-relative path with `/` separators.
    pub notebook_id: String,
    pub cells: Vec<Cell>,
    pub author_name: String,
    pub created_at: i64,
    pub modified_at: i64,
    pub content_hash: u64,
}

/// One file found by [`scan_repository`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScannedFile {
    /// Repository-relative path with `/` separators.
    pub path: String,
    pub abs_path: PathBuf,
    pub modified_at: i64,
    pub content_hash: u64,
}

pub fn parse_notebook(raw: &[u8], path: &str, meta: &FileMeta) -> Result<NotebookDocument, NotebookError> {
    let malformed =
        |reason: &str| NotebookError::MalformedNotebook { path: path.to_string(), reason: reason.to_string() };

    let text = std::str::from_utf8(raw).map_err(|_| malformed("not valid UTF-8"))?;
    let root: Value = serde_json::from_str(text).map_err(|e| malformed(&format!("not JSON: {e}")))?;
    let obj = root.as_object().ok_or_else(|| malformed("top level is not an object"))?;

    let cells_json = match obj.get("cells") {
        Some(Value::Array(cells)) => cells,
        Some(_) => return Err(malformed("`cells` is not an array")),
        None if obj.contains_key("worksheets") => return Err(malformed("nbformat v3 (`worksheets`) is not supported")),
        None => return Err(malformed("missing `cells` array")),
    };

    let mut cells = Vec::with_capacity(cells_json.len());
    for (pos, cell) in cells_json.iter().enumerate() {
        let cell_type = cell
            .get("cell_type")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(&format!("cell {pos} has no `cell_type`")))?;
        let source = cell
            .get("source")
            .and_then(join_source)
            .ok_or_else(|| malformed(&format!("cell {pos} has no usable `source`")))?;
        let kind = match cell_type {
            "markdown" => CellKind::Markdown,
            "code" => CellKind::Code,
            _ => continue,
        };
        cells.push(Cell { cell_index: cells.len(), kind, source });
    }

    let author_name = metadata_author(obj.get("metadata")).unwrap_or_else(|| meta.author_name.clone());

    Ok(NotebookDocument {
        notebook_id: normalize_id(path),
        cells,
        author_name,
        created_at: meta.created_at,
        modified_at: meta.modified_at,
        content_hash: fnv1a64(raw),
    })
}

/// `source` is either a string or a list of strings joined verbatim.
fn join_source(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => parts.iter().map(|p| p.as_str()).collect::<Option<Vec<_>>>().map(|parts| parts.concat()),
        _ => None,
    }
}

fn metadata_author(metadata: Option<&Value>) -> Option<String> {
    metadata?.get("authors")?.get(0)?.get("name")?.as_str().map(str::to_string)
}

fn normalize_id(path: &str) -> String {
    path.replace('\\', "/").trim_start_matches("./").to_string()
}

/// Lists every file under `root` matching `glob`, sorted by relative path.
/// Hidden directories (including `.ipynb_checkpoints`) are not descended.
pub fn scan_repository(root: &Path, glob: &str) -> Result<Vec<ScannedFile>, NotebookError> {
    if !root.is_dir() {
        return Err(NotebookError::RootNotFound(root.to_path_buf()));
    }
    let matcher = compile_glob(glob)?;

    let mut out = Vec::new();
    let walker = WalkDir::new(root).follow_links(false).into_iter().filter_entry(|e| {
        e.depth() == 0 || !(e.file_type().is_dir() && e.file_name().to_string_lossy().starts_with('.'))
    });
    for entry in walker {
        let entry = entry.map_err(|e| NotebookError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf()),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
        let rel = rel_to_id(rel);
        if !matcher.is_match(&rel) {
            continue;
        }
        let bytes =
            fs::read(entry.path()).map_err(|source| NotebookError::Io { path: entry.path().to_path_buf(), source })?;
        let meta =
            file_meta(entry.path()).map_err(|source| NotebookError::Io { path: entry.path().to_path_buf(), source })?;
        out.push(ScannedFile {
            path: rel,
            abs_path: entry.path().to_path_buf(),
            modified_at: meta.modified_at,
            content_hash: fnv1a64(&bytes),
        });
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn compile_glob(glob: &str) -> Result<GlobMatcher, NotebookError> {
    Glob::new(glob)
        .map(|g| g.compile_matcher())
        .map_err(|e| NotebookError::BadGlob { pattern: glob.to_string(), reason: e.to_string() })
}

fn rel_to_id(rel: &Path) -> String {
    rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/")
}

/// Timestamps (whole Unix seconds) and owner name for a file.
///
/// Creation time falls back to the modification time when the platform
/// does not report it, and is clamped so that `created_at <= modified_at`.
pub fn file_meta(path: &Path) -> std::io::Result<FileMeta> {
    let md = fs::metadata(path)?;
    let modified_at = md.modified().ok().map(unix_secs).unwrap_or(0);
    let created_at = md.created().ok().map(unix_secs).map(|c| c.min(modified_at)).unwrap_or(modified_at);
    Ok(FileMeta { created_at, modified_at, author_name: owner_name(&md).unwrap_or_default() })
}

fn unix_secs(t: std::time::SystemTime) -> i64 {
    match t.duration_since(UNIX_EPOCH) {
        Ok(d) => d.as_secs() as i64,
        Err(e) => -(e.duration().as_secs() as i64),
    }
}

#[cfg(unix)]
fn owner_name(md: &fs::Metadata) -> Option<String> {
    use std::os::unix::fs::MetadataExt;
    let uid = md.uid().to_string();
    let passwd = fs::read_to_string("/etc/passwd").ok()?;
    passwd.lines().find_map(|line| {
        let mut fields = line.split(':');
        let name = fields.next()?;
        let _pw = fields.next()?;
        (fields.next()? == uid).then(|| name.to_string())
    })
}

#[cfg(not(unix))]
fn owner_name(_md: &fs::Metadata) -> Option<String> {
    None
}

/// Reads and parses one scanned file with filesystem metadata attached.
pub fn load_notebook(file: &ScannedFile) -> Result<NotebookDocument, NotebookError> {
    let io_err = |source| NotebookError::Io { path: file.abs_path.clone(), source };
    let bytes = fs::read(&file.abs_path).map_err(io_err)?;
    let meta = file_meta(&file.abs_path).map_err(io_err)?;
    parse_notebook(&bytes, &file.path, &meta)
}
