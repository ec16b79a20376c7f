//! Deterministic stand-ins for the embedding and completion models.

use std::sync::OnceLock;

use regex::Regex;

use super::{EmbeddingVector, GatewayError};
use crate::chunker::tokens;
use crate::hash::fnv1a64;

pub const DEFAULT_OFFLINE_DIM: usize = 256;
pub const OFFLINE_MODEL_PREFIX: &str = "offline-fnv1a";

pub fn offline_model_id(dim: usize) -> String {
    format!("{OFFLINE_MODEL_PREFIX}-{dim}")
}

/// Signed hashed bag of lowercase tokens, L2-normalized.
///
/// Each token `t` adds `±1` to bucket `fnv1a64(t) % dim`; the sign is `-`
/// when the top bit of the hash is set.
pub fn deterministic_embed(text: &str, dim: usize) -> Result<EmbeddingVector, GatewayError> {
    assert!(dim > 0, "embedding dimension must be positive");
    let mut values = vec![0.0f64; dim];
    let mut seen = false;
    for token in tokens(text) {
        seen = true;
        let h = fnv1a64(token.to_lowercase().as_bytes());
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        values[(h % dim as u64) as usize] += sign;
    }
    if !seen {
        return Err(GatewayError::NoTokens);
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        // every token cancelled out; fall back to the first token's bucket
        let first = tokens(text).next().unwrap_or_default().to_lowercase();
        let h = fnv1a64(first.as_bytes());
        values[(h % dim as u64) as usize] = 1.0;
    } else {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(EmbeddingVector { values, model_id: offline_model_id(dim) })
}

fn def_name_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^[ \t]*(?:async[ \t]+)?(?:def|class)[ \t]+([A-Za-z_][A-Za-z0-9_]*)").unwrap())
}

/// Extractive summary: `summary:` followed by up to 32 `def`/`class` names
/// in source order.
pub fn offline_summary(code: &str) -> String {
    let mut out = String::from("summary:");
    for cap in def_name_re().captures_iter(code).take(32) {
        out.push(' ');
        out.push_str(&cap[1]);
    }
    out
}
