//! Top-level class / function decomposition of a Python code cell.

use rustpython_parser::ast::{self, Ranged};
use rustpython_parser::Parse;

use super::ChunkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitKind {
    ClassUnit,
    FunctionUnit,
    Residue,
}

pub const RESIDUE_NAME: &str = "<residue>";

/// Inclusive, 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeUnit {
    pub kind: UnitKind,
    pub name: String,
    pub source: String,
    /// Line ranges the unit was taken from. Class and function units have
    /// exactly one; the residue has one per contiguous run of statements.
    /// Spans never overlap across the units of one cell.
    pub spans: Vec<LineSpan>,
}

impl CodeUnit {
    /// First and last line covered by the unit.
    pub fn line_span(&self) -> LineSpan {
        LineSpan { start: self.spans.first().map_or(0, |s| s.start), end: self.spans.last().map_or(0, |s| s.end) }
    }
}

struct Lines<'a> {
    text: &'a str,
    /// byte offset of the start of each line
    starts: Vec<usize>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let mut starts = vec![0];
        starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        Self { text, starts }
    }

    /// 1-based line containing byte `offset`.
    fn line_of(&self, offset: usize) -> usize {
        self.starts.partition_point(|&s| s <= offset)
    }

    fn slice(&self, span: LineSpan) -> &'a str {
        let start = self.starts[span.start - 1];
        let end = self.starts.get(span.end).map_or(self.text.len(), |&next| next - 1);
        self.text[start..end].trim_end_matches('\r')
    }
}

fn stmt_span(stmt: &ast::Stmt, lines: &Lines<'_>) -> LineSpan {
    let decorators: &[ast::Expr] = match stmt {
        ast::Stmt::FunctionDef(f) => &f.decorator_list,
        ast::Stmt::AsyncFunctionDef(f) => &f.decorator_list,
        ast::Stmt::ClassDef(c) => &c.decorator_list,
        _ => &[],
    };
    let start = decorators
        .iter()
        .map(|d| d.start().to_usize())
        .chain(std::iter::once(stmt.start().to_usize()))
        .min()
        .unwrap_or(0);
    let end = stmt.end().to_usize().max(start + 1);
    LineSpan { start: lines.line_of(start), end: lines.line_of(end - 1) }
}

pub fn parse_suite(code: &str) -> Result<ast::Suite, ChunkError> {
    ast::Suite::parse(code, "<cell>").map_err(|e| ChunkError::SyntaxErrorInCell(e.to_string()))
}

/// Splits a code cell into top-level class units, function units, and one
/// residue unit holding every other top-level statement (omitted if empty).
/// Nested definitions stay inside their parent.
pub fn extract_units(code: &str) -> Result<Vec<CodeUnit>, ChunkError> {
    let suite = parse_suite(code)?;
    let lines = Lines::new(code);

    let mut units = Vec::new();
    let mut residue: Vec<LineSpan> = Vec::new();
    for stmt in &suite {
        let span = stmt_span(stmt, &lines);
        let named = match stmt {
            ast::Stmt::ClassDef(c) => Some((UnitKind::ClassUnit, c.name.to_string())),
            ast::Stmt::FunctionDef(f) => Some((UnitKind::FunctionUnit, f.name.to_string())),
            ast::Stmt::AsyncFunctionDef(f) => Some((UnitKind::FunctionUnit, f.name.to_string())),
            _ => None,
        };
        match named {
            Some((kind, name)) => {
                units.push(CodeUnit { kind, name, source: lines.slice(span).to_string(), spans: vec![span] })
            }
            None => match residue.last_mut() {
                // `a = 1; b = 2` puts two statements on one line
                Some(last) if span.start <= last.end => last.end = last.end.max(span.end),
                Some(last) if span.start == last.end + 1 => last.end = span.end,
                _ => residue.push(span),
            },
        }
    }

    if !residue.is_empty() {
        let source = residue.iter().map(|&s| lines.slice(s)).collect::<Vec<_>>().join("\n");
        units.push(CodeUnit { kind: UnitKind::Residue, name: RESIDUE_NAME.to_string(), source, spans: residue });
    }
    Ok(units)
}
