use std::fmt;
use std::sync::Arc;

pub const DEFAULT_MAX_TOKENS: usize = 8191;
pub const HEURISTIC_V1: &str = "heuristic-v1";

/// Token counting strategy. A provider-exact tokenizer can be plugged in
/// in place of [`HeuristicV1`].
pub trait TokenEstimator: Send + Sync {
    fn id(&self) -> &str;

    fn count(&self, text: &str) -> usize;

    /// Longest prefix of `text` holding at most `max_tokens` tokens, cut at a
    /// token boundary.
    fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str;
}

/// A token is a maximal run of alphanumeric/underscore characters or a
/// single other non-whitespace character. Whitespace counts for nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicV1;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte spans `(start, end)` of heuristic-v1 tokens.
pub fn token_spans(text: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
    let mut chars = text.char_indices().peekable();
    std::iter::from_fn(move || loop {
        let (start, c) = chars.next()?;
        if c.is_whitespace() {
            continue;
        }
        let mut end = start + c.len_utf8();
        if is_word_char(c) {
            while let Some(&(i, n)) = chars.peek() {
                if !is_word_char(n) {
                    break;
                }
                end = i + n.len_utf8();
                chars.next();
            }
        }
        return Some((start, end));
    })
}

pub fn tokens(text: &str) -> impl Iterator<Item = &str> + '_ {
    token_spans(text).map(move |(s, e)| &text[s..e])
}

pub fn count_tokens(text: &str) -> usize {
    token_spans(text).count()
}

impl TokenEstimator for HeuristicV1 {
    fn id(&self) -> &str {
        HEURISTIC_V1
    }

    fn count(&self, text: &str) -> usize {
        count_tokens(text)
    }

    fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str {
        if max_tokens == 0 {
            return "";
        }
        match token_spans(text).nth(max_tokens - 1) {
            Some((_, end)) => &text[..end],
            None => text,
        }
    }
}

#[derive(Clone)]
pub struct TokenBudget {
    pub max_tokens: usize,
    pub estimator: Arc<dyn TokenEstimator>,
}

impl TokenBudget {
    pub fn new(max_tokens: usize) -> Self {
        Self { max_tokens, estimator: Arc::new(HeuristicV1) }
    }

    pub fn with_estimator(max_tokens: usize, estimator: Arc<dyn TokenEstimator>) -> Self {
        Self { max_tokens, estimator }
    }

    pub fn estimator_id(&self) -> &str {
        self.estimator.id()
    }

    pub fn count(&self, text: &str) -> usize {
        self.estimator.count(text)
    }

    pub fn fits(&self, text: &str) -> bool {
        self.count(text) <= self.max_tokens
    }

    pub fn truncate<'a>(&self, text: &'a str) -> &'a str {
        self.estimator.truncate(text, self.max_tokens)
    }
}

impl Default for TokenBudget {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_TOKENS)
    }
}

impl fmt::Debug for TokenBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TokenBudget")
            .field("max_tokens", &self.max_tokens)
            .field("estimator_id", &self.estimator_id())
            .finish()
    }
}
