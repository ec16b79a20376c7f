//! Chunk planning: fit each cell into the embedding model's token budget.
//!
//! A cell that fits is embedded whole. An oversized markdown cell is packed
//! paragraph by paragraph. An oversized code cell is split into its top-level
//! classes, functions, and residue; a unit that still does not fit is
//! replaced (for embedding purposes) by a model-written summary while its
//! original source is kept as the chunk contents.

mod tokens;
mod units;

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

pub use tokens::{
    count_tokens, token_spans, tokens, HeuristicV1, TokenBudget, TokenEstimator, DEFAULT_MAX_TOKENS, HEURISTIC_V1,
};
pub use units::{extract_units, parse_suite, CodeUnit, LineSpan, UnitKind, RESIDUE_NAME};

use crate::notebook::{Cell, CellKind};
use crate::preprocess::{clean_markdown, CleanText};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChunkError {
    #[error("cell is not valid Python: {0}")]
    SyntaxErrorInCell(String),
    #[error("summarizer unavailable: {0}")]
    SummarizerUnavailable(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SummaryError {
    /// The unit is larger than the completion model accepts.
    #[error("code exceeds the completion budget ({tokens} > {limit} tokens)")]
    TooLong { tokens: usize, limit: usize },
    #[error("{0}")]
    Unavailable(String),
}

/// Produces a natural-language summary of a code unit.
pub trait Summarizer: Send + Sync {
    fn summarize(&self, code: &str) -> Result<String, SummaryError>;
}

impl<F> Summarizer for F
where
    F: Fn(&str) -> Result<String, SummaryError> + Send + Sync,
{
    fn summarize(&self, code: &str) -> Result<String, SummaryError> {
        self(code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChunkKind {
    WholeCell,
    ClassUnit,
    FunctionUnit,
    Residue,
    Summary,
    Truncated,
}

impl ChunkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChunkKind::WholeCell => "WholeCell",
            ChunkKind::ClassUnit => "ClassUnit",
            ChunkKind::FunctionUnit => "FunctionUnit",
            ChunkKind::Residue => "Residue",
            ChunkKind::Summary => "Summary",
            ChunkKind::Truncated => "Truncated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "WholeCell" => ChunkKind::WholeCell,
            "ClassUnit" => ChunkKind::ClassUnit,
            "FunctionUnit" => ChunkKind::FunctionUnit,
            "Residue" => ChunkKind::Residue,
            "Summary" => ChunkKind::Summary,
            "Truncated" => ChunkKind::Truncated,
            _ => return None,
        })
    }
}

impl From<UnitKind> for ChunkKind {
    fn from(k: UnitKind) -> Self {
        match k {
            UnitKind::ClassUnit => ChunkKind::ClassUnit,
            UnitKind::FunctionUnit => ChunkKind::FunctionUnit,
            UnitKind::Residue => ChunkKind::Residue,
        }
    }
}

impl fmt::Display for ChunkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stored cell type; markdown cells are called "text".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellType {
    Text,
    Code,
}

impl CellType {
    pub fn as_str(self) -> &'static str {
        match self {
            CellType::Text => "text",
            CellType::Code => "code",
        }
    }
}

impl From<CellKind> for CellType {
    fn from(k: CellKind) -> Self {
        match k {
            CellKind::Markdown => CellType::Text,
            CellKind::Code => CellType::Code,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub notebook_id: String,
    pub cell_index: usize,
    pub unit_index: usize,
    pub kind: ChunkKind,
    /// Cleaned source text of the unit.
    pub contents: String,
    /// What gets embedded: `contents`, except for summaries.
    pub embed_text: String,
    pub cell_type: CellType,
    pub token_count: usize,
}

struct Draft {
    kind: ChunkKind,
    contents: String,
    embed_text: String,
}

impl Draft {
    fn plain(kind: ChunkKind, text: &str) -> Self {
        Self { kind, contents: text.to_string(), embed_text: text.to_string() }
    }
}

fn paragraph_break() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\n[ \t\r]*\n").unwrap())
}

/// Plans the chunks of one cell. `cleaned` must be the preprocessed text
/// of `cell`.
pub fn plan_chunks(
    notebook_id: &str,
    cell: &Cell,
    cleaned: &CleanText,
    budget: &TokenBudget,
    summarizer: &dyn Summarizer,
) -> Result<Vec<Chunk>, ChunkError> {
    let text = cleaned.text.as_str();
    let drafts = if text.trim().is_empty() {
        Vec::new()
    } else if budget.fits(text) {
        vec![Draft::plain(ChunkKind::WholeCell, text)]
    } else {
        match cell.kind {
            CellKind::Markdown => pack_paragraphs(&cell.source, budget),
            CellKind::Code => plan_code(text, budget, summarizer)?,
        }
    };

    Ok(drafts
        .into_iter()
        .filter(|d| !d.contents.trim().is_empty())
        .enumerate()
        .map(|(unit_index, d)| Chunk {
            notebook_id: notebook_id.to_string(),
            cell_index: cell.cell_index,
            unit_index,
            kind: d.kind,
            token_count: budget.count(&d.embed_text),
            contents: d.contents,
            embed_text: d.embed_text,
            cell_type: cell.kind.into(),
        })
        .collect())
}

/// Greedy next-fit packing of cleaned paragraphs. The raw source is split
/// because cleaning collapses the blank lines that mark paragraphs.
fn pack_paragraphs(raw: &str, budget: &TokenBudget) -> Vec<Draft> {
    let mut drafts = Vec::new();
    let mut current = String::new();
    let mut current_tokens = 0;
    let flush = |drafts: &mut Vec<Draft>, current: &mut String| {
        if !current.is_empty() {
            drafts.push(Draft::plain(ChunkKind::WholeCell, current));
            current.clear();
        }
    };

    for para in paragraph_break().split(raw) {
        let cleaned = clean_markdown(para).text;
        if cleaned.is_empty() {
            continue;
        }
        let n = budget.count(&cleaned);
        if n > budget.max_tokens {
            flush(&mut drafts, &mut current);
            current_tokens = 0;
            drafts.push(Draft::plain(ChunkKind::Truncated, budget.truncate(&cleaned)));
        } else if current.is_empty() || current_tokens + n <= budget.max_tokens {
            if !current.is_empty() {
                current.push(' ');
            }
            current.push_str(&cleaned);
            current_tokens += n;
        } else {
            flush(&mut drafts, &mut current);
            current.push_str(&cleaned);
            current_tokens = n;
        }
    }
    flush(&mut drafts, &mut current);
    drafts
}

fn plan_code(text: &str, budget: &TokenBudget, summarizer: &dyn Summarizer) -> Result<Vec<Draft>, ChunkError> {
    let units = match extract_units(text) {
        Ok(units) if !units.is_empty() => units,
        // unparseable, or nothing but comments
        _ => return Ok(vec![Draft::plain(ChunkKind::Truncated, budget.truncate(text))]),
    };

    let mut drafts = Vec::with_capacity(units.len());
    for unit in units {
        if budget.fits(&unit.source) {
            drafts.push(Draft::plain(unit.kind.into(), &unit.source));
            continue;
        }
        match summarizer.summarize(&unit.source) {
            Ok(summary) if budget.count(&summary) > 0 => drafts.push(Draft {
                kind: ChunkKind::Summary,
                contents: unit.source,
                embed_text: budget.truncate(summary.trim()).to_string(),
            }),
            // an empty summary or one the model cannot take falls back to the
            // head of the unit itself
            Ok(_) | Err(SummaryError::TooLong { .. }) => {
                drafts.push(Draft::plain(ChunkKind::Truncated, budget.truncate(&unit.source)))
            }
            Err(SummaryError::Unavailable(msg)) => return Err(ChunkError::SummarizerUnavailable(msg)),
        }
    }
    Ok(drafts)
}
