//! Query execution for exact (EQ), user-defined (UDQ), and code-summary
//! (CSQ) queries, plus the evaluation harness that scores them.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::chunker::TokenBudget;
use crate::gateway::{GatewayError, ModelGateway};
use crate::preprocess::{clean_code, clean_markdown};
use crate::store::{ObjectKey, SearchFilter, SearchHit, StoreError, VectorStore};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("the index is empty")]
    EmptyStore,
    #[error("unknown target {0}")]
    UnknownTarget(ObjectKey),
    #[error("target {0} is not a code chunk")]
    TargetNotCode(ObjectKey),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryType {
    EQ,
    UDQ,
    CSQ,
}

impl QueryType {
    pub const ALL: [QueryType; 3] = [QueryType::EQ, QueryType::UDQ, QueryType::CSQ];

    pub fn label(self) -> &'static str {
        match self {
            QueryType::EQ => "Exact Query",
            QueryType::UDQ => "User Defined Query",
            QueryType::CSQ => "Code Summary Query",
        }
    }

    /// Whose understanding of the content the query reflects.
    pub fn perspective(self) -> &'static str {
        match self {
            QueryType::EQ => "Author",
            QueryType::UDQ => "Searcher",
            QueryType::CSQ => "GPT",
        }
    }
}

impl std::str::FromStr for QueryType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "EQ" => Ok(QueryType::EQ),
            "UDQ" => Ok(QueryType::UDQ),
            "CSQ" => Ok(QueryType::CSQ),
            other => Err(format!("unknown query type {other:?} (expected EQ, UDQ or CSQ)")),
        }
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub qtype: QueryType,
    pub text: Option<String>,
    /// CSQ only: the stored code chunk to summarize.
    pub target: Option<ObjectKey>,
    pub k: usize,
    pub filter: SearchFilter,
}

impl Query {
    pub fn text(qtype: QueryType, text: impl Into<String>, k: usize) -> Self {
        Self { qtype, text: Some(text.into()), target: None, k, filter: SearchFilter::default() }
    }

    pub fn code_summary(target: ObjectKey, k: usize) -> Self {
        Self { qtype: QueryType::CSQ, text: None, target: Some(target), k, filter: SearchFilter::default() }
    }
}

/// Runs queries against one store with one gateway.
pub struct QueryEngine<'a> {
    pub store: &'a VectorStore,
    pub gateway: &'a ModelGateway,
    /// Query texts are cut to this budget before embedding.
    pub budget: &'a TokenBudget,
}

impl<'a> QueryEngine<'a> {
    pub fn new(store: &'a VectorStore, gateway: &'a ModelGateway, budget: &'a TokenBudget) -> Self {
        Self { store, gateway, budget }
    }

    pub fn run(&self, q: &Query) -> Result<Vec<SearchHit>, QueryError> {
        if self.store.is_empty() {
            return Err(QueryError::EmptyStore);
        }
        if q.k == 0 {
            return Err(QueryError::InvalidQuery("k must be at least 1".into()));
        }
        let variants = match q.qtype {
            QueryType::EQ | QueryType::UDQ => {
                let text = q
                    .text
                    .as_deref()
                    .filter(|t| !t.trim().is_empty())
                    .ok_or_else(|| QueryError::InvalidQuery(format!("{} needs query text", q.qtype)))?;
                cleaned_variants(q.qtype, text)
            }
            QueryType::CSQ => {
                let target =
                    q.target.as_ref().ok_or_else(|| QueryError::InvalidQuery("CSQ needs a target chunk".into()))?;
                let obj = self.store.get(target).ok_or_else(|| QueryError::UnknownTarget(target.clone()))?;
                if obj.cell_type != "code" {
                    return Err(QueryError::TargetNotCode(target.clone()));
                }
                vec![self.gateway.summarize_code(&obj.contents)?]
            }
        };

        let variants: Vec<String> =
            variants.iter().map(|v| self.budget.truncate(v).to_string()).filter(|v| !v.trim().is_empty()).collect();
        if variants.is_empty() {
            return Err(QueryError::InvalidQuery("query is empty after cleaning".into()));
        }

        let vectors = self.gateway.embed_batch(&variants)?;
        let mut best: HashMap<ObjectKey, SearchHit> = HashMap::new();
        for v in &vectors {
            for hit in self.store.search(v, q.k, &q.filter)? {
                let key = hit.object.key();
                match best.get(&key) {
                    Some(prev) if prev.distance <= hit.distance => {}
                    _ => {
                        best.insert(key, hit);
                    }
                }
            }
        }
        let mut hits: Vec<SearchHit> = best.into_values().collect();
        hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.object.seq.cmp(&b.object.seq)));
        hits.truncate(q.k);
        Ok(hits)
    }

    pub fn evaluate(&self, queries: &[LabeledQuery]) -> Result<EvalReport, QueryError> {
        let mut outcomes = Vec::with_capacity(queries.len());
        for lq in queries {
            let hits = self.run(&lq.query)?;
            let rank1 = hits.first().map(|h| RankedKey { key: h.object.key(), distance: h.distance });
            let position = hits.iter().position(|h| h.object.key() == lq.expected);
            outcomes.push(QueryOutcome {
                line: lq.line,
                qtype: lq.query.qtype,
                text: lq.query.text.clone(),
                target: lq.query.target.clone(),
                expected: lq.expected.clone(),
                k: lq.query.k,
                rank1,
                expected_rank: position.map(|p| p + 1),
                hit_at_1: position == Some(0),
                hit_at_k: position.is_some(),
            });
        }
        Ok(EvalReport::from_outcomes(outcomes))
    }
}

/// Query-side cleaning mirrors indexing. Multi-line text is treated as code.
/// A single line may have come from either kind of cell, so both cleanings
/// are searched for exact queries and the closer hit wins.
fn cleaned_variants(qtype: QueryType, text: &str) -> Vec<String> {
    if text.contains('\n') {
        return vec![clean_code(text).text];
    }
    let md = clean_markdown(text).text;
    if qtype != QueryType::EQ {
        return vec![md];
    }
    let code = clean_code(text).text;
    if code == md {
        vec![md]
    } else {
        vec![md, code]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledQuery {
    pub query: Query,
    /// Key of the chunk the query is meant to retrieve.
    pub expected: ObjectKey,
    /// 1-based line in the query file, when read from one.
    pub line: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct QueryLine {
    qtype: QueryType,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    target: Option<ObjectKey>,
    #[serde(default)]
    expected: Option<ObjectKey>,
    #[serde(default)]
    k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parses a JSON-lines query set. Malformed lines are returned as errors
/// and do not stop the remaining lines from parsing.
pub fn parse_query_set(text: &str, default_k: usize) -> (Vec<LabeledQuery>, Vec<LineError>) {
    let mut queries = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        match parse_query_line(raw, default_k) {
            Ok(mut q) => {
                q.line = Some(line);
                queries.push(q);
            }
            Err(message) => errors.push(LineError { line, message }),
        }
    }
    (queries, errors)
}

fn parse_query_line(raw: &str, default_k: usize) -> Result<LabeledQuery, String> {
    let parsed: QueryLine = serde_json::from_str(raw).map_err(|e| e.to_string())?;
    let k = parsed.k.unwrap_or(default_k);
    if k == 0 {
        return Err("k must be at least 1".into());
    }
    let query = match parsed.qtype {
        QueryType::EQ | QueryType::UDQ => {
            let text = parsed.text.filter(|t| !t.trim().is_empty()).ok_or("EQ/UDQ need non-empty text")?;
            Query::text(parsed.qtype, text, k)
        }
        QueryType::CSQ => Query::code_summary(parsed.target.clone().ok_or("CSQ needs a target")?, k),
    };
    let expected = parsed.expected.or(parsed.target).ok_or("missing expected key")?;
    Ok(LabeledQuery { query, expected, line: None })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedKey {
    pub key: ObjectKey,
    pub distance: f64,
}

/// Result of one evaluated query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub line: Option<usize>,
    pub qtype: QueryType,
    pub text: Option<String>,
    pub target: Option<ObjectKey>,
    pub expected: ObjectKey,
    pub k: usize,
    pub rank1: Option<RankedKey>,
    pub expected_rank: Option<usize>,
    pub hit_at_1: bool,
    pub hit_at_k: bool,
}

/// Aggregates for one query type. `valid` is false when no query of that
/// type was run, in which case the means are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub qtype: QueryType,
    pub perspective: String,
    pub query_count: usize,
    pub mean_distance_of_rank1: Option<f64>,
    pub recall_at_1: Option<f64>,
    pub recall_at_k: Option<f64>,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub queries: Vec<QueryOutcome>,
}

impl EvalReport {
    pub fn from_outcomes(queries: Vec<QueryOutcome>) -> Self {
        let rows = QueryType::ALL
            .iter()
            .map(|&qtype| {
                let of_type: Vec<&QueryOutcome> = queries.iter().filter(|o| o.qtype == qtype).collect();
                let n = of_type.len();
                let mean = |f: &dyn Fn(&QueryOutcome) -> f64| {
                    (n > 0).then(|| of_type.iter().map(|o| f(o)).sum::<f64>() / n as f64)
                };
                let distances: Vec<f64> = of_type.iter().filter_map(|o| o.rank1.as_ref().map(|r| r.distance)).collect();
                EvalRow {
                    qtype,
                    perspective: qtype.perspective().to_string(),
                    query_count: n,
                    mean_distance_of_rank1: (!distances.is_empty())
                        .then(|| distances.iter().sum::<f64>() / distances.len() as f64),
                    recall_at_1: mean(&|o| f64::from(u8::from(o.hit_at_1))),
                    recall_at_k: mean(&|o| f64::from(u8::from(o.hit_at_k))),
                    valid: n > 0,
                }
            })
            .collect();
        Self { rows, queries }
    }

    pub fn row(&self, qtype: QueryType) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.qtype == qtype)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    /// Aligned text table: query type, perspective, mean rank-1 distance,
    /// recall columns and query count.
    pub fn render_table(&self) -> String {
        let header = ["Query Types", "Perspective of Understanding", "Distance", "Recall@1", "Recall@k", "Queries"];
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let body: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.qtype.label().to_string(),
                    r.perspective.clone(),
                    fmt_opt(r.mean_distance_of_rank1),
                    fmt_opt(r.recall_at_1),
                    fmt_opt(r.recall_at_k),
                    r.query_count.to_string(),
                ]
            })
            .collect();

        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        };
        line(&mut out, &header);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        let _ = writeln!(out, "{}", rule.join("  "));
        for row in &body {
            line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out
    }
}
