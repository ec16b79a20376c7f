//! Split a code cell into class/function units under a small token budget.
//!
//!     cargo run --example chunk_cell -- [MAX_TOKENS]

use nbsearch::chunker::{extract_units, plan_chunks, TokenBudget};
use nbsearch::gateway::offline_summary;
use nbsearch::notebook::{Cell, CellKind};
use nbsearch::preprocess::clean_code;

const CELL: &str = r#"import numpy as np

class Scaler:
    def __init__(self, k):
        self.k = k

    def __call__(self, xs):
        return [x * self.k for x in xs]

@staticmethod
def mean(xs):
    return sum(xs) / len(xs)

readings = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9, 3, 2, 3, 8, 4, 6, 2, 6, 4, 3, 3, 8, 3, 2, 7, 9, 5]
print(mean(Scaler(2)(readings)))
"#;

fn main() {
    let max: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(40);
    for unit in extract_units(CELL).expect("valid python") {
        println!("{:?} {} lines {:?}", unit.kind, unit.name, unit.spans);
    }

    let budget = TokenBudget::new(max);
    let cell = Cell { cell_index: 0, kind: CellKind::Code, source: CELL.to_string() };
    let summarize = |code: &str| Ok(offline_summary(code));
    let chunks = plan_chunks("demo.ipynb", &cell, &clean_code(CELL), &budget, &summarize).unwrap();
    println!("\n{} chunks at max_tokens={max} (whole cell is {} tokens):", chunks.len(), budget.count(CELL));
    for c in chunks {
        println!("--- unit {} {:?}, {} tokens\n{}", c.unit_index, c.kind, c.token_count, c.embed_text);
    }
}
