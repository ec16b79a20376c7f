use proptest::prelude::*;

use nbsearch::chunker::{plan_chunks, ChunkKind, SummaryError, TokenBudget};
use nbsearch::gateway::deterministic_embed;
use nbsearch::notebook::{Cell, CellKind};
use nbsearch::preprocess::{clean_code, clean_markdown};
use nbsearch::store::NewObject;
use nbsearch::{EmbeddingVector, SearchFilter, VectorStore};

fn code_cell() -> impl Strategy<Value = String> {
    let block = prop_oneof![
        (1usize..5, "[a-z]{1,6}").prop_map(|(n, v)| {
            let body: Vec<String> = (0..n).map(|i| format!("    {v}{i} = {i} * 2")).collect();
            format!("def f_{v}():\n{}", body.join("\n"))
        }),
        "[A-Z][a-z]{0,5}".prop_map(|c| format!("class {c}:\n    x = 1")),
        proptest::collection::vec(0u32..1000, 1..60).prop_map(|xs| format!("values = {xs:?}")),
        "[a-z ]{0,30}".prop_map(|c| format!("# {c}")),
    ];
    proptest::collection::vec(block, 1..6).prop_map(|b| b.join("\n"))
}

fn summarize(code: &str) -> Result<String, SummaryError> {
    Ok(format!("summary of {} lines", code.lines().count()))
}

fn plan(kind: CellKind, source: &str, max: usize) -> Vec<nbsearch::Chunk> {
    let cleaned = match kind {
        CellKind::Code => clean_code(source),
        CellKind::Markdown => clean_markdown(source),
    };
    let cell = Cell { cell_index: 3, kind, source: source.to_string() };
    plan_chunks("nb.ipynb", &cell, &cleaned, &TokenBudget::new(max), &summarize).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chunks_fit_their_budget(src in code_cell(), max in 1usize..80) {
        let budget = TokenBudget::new(max);
        for c in plan(CellKind::Code, &src, max) {
            prop_assert!(budget.count(&c.embed_text) <= max);
            prop_assert_eq!(c.cell_index, 3);
            prop_assert_eq!(c.notebook_id.as_str(), "nb.ipynb");
        }
    }

    #[test]
    fn unit_indices_are_dense(src in code_cell(), max in 1usize..80) {
        let chunks = plan(CellKind::Code, &src, max);
        for (i, c) in chunks.iter().enumerate() {
            prop_assert_eq!(c.unit_index, i);
        }
    }

    #[test]
    fn big_budget_gives_one_whole_cell(src in code_cell()) {
        let chunks = plan(CellKind::Code, &src, 100_000);
        prop_assert_eq!(chunks.len(), 1);
        prop_assert_eq!(chunks[0].kind, ChunkKind::WholeCell);
    }

    #[test]
    fn plain_code_chunks_come_from_the_cell(src in code_cell(), max in 1usize..80) {
        let cleaned = clean_code(&src).text;
        for c in plan(CellKind::Code, &src, max) {
            if c.kind != ChunkKind::Summary {
                for line in c.contents.lines().filter(|l| !l.trim().is_empty()) {
                    prop_assert!(cleaned.contains(line), "{:?} not in cell", line);
                }
            }
        }
    }

    #[test]
    fn markdown_chunks_fit(words in proptest::collection::vec("[a-z]{1,8}", 1..200), max in 1usize..40) {
        let src: String = words.chunks(7).map(|w| w.join(" ")).collect::<Vec<_>>().join("\n\n");
        for c in plan(CellKind::Markdown, &src, max) {
            prop_assert!(TokenBudget::new(max).count(&c.embed_text) <= max);
        }
    }

    #[test]
    fn larger_k_extends_the_ranking(texts in proptest::collection::vec("[a-z ]{1,20}", 1..40), q in "[a-z ]{1,20}", k in 1usize..20) {
        let store = store_of(&texts);
        let query = deterministic_embed(&format!("{q} x"), 32).unwrap();
        let small = store.search(&query, k, &SearchFilter::default()).unwrap();
        let large = store.search(&query, k + 5, &SearchFilter::default()).unwrap();
        prop_assert_eq!(small.len(), k.min(store.len()));
        prop_assert_eq!(&large[..small.len()], &small[..]);
        prop_assert!(large.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn filters_only_drop_hits(texts in proptest::collection::vec("[a-z ]{1,20}", 1..40), q in "[a-z ]{1,20}") {
        let store = store_of(&texts);
        let query = deterministic_embed(&format!("{q} x"), 32).unwrap();
        let filter = SearchFilter { cell_type: Some("code".into()), notebook_prefix: None };
        let all = store.search(&query, texts.len(), &SearchFilter::default()).unwrap();
        let some = store.search(&query, texts.len(), &filter).unwrap();
        let expected: Vec<_> = all.into_iter().filter(|h| filter.matches(&h.object)).collect();
        prop_assert_eq!(some, expected);
    }
}

fn store_of(texts: &[String]) -> VectorStore {
    let store = VectorStore::new(32, "offline", "heuristic-v1");
    let objects: Vec<NewObject> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| NewObject {
            notebook_id: format!("n{}.ipynb", i % 4),
            contents: t.clone(),
            cell_type: if i % 2 == 0 { "code" } else { "text" }.into(),
            author_name: String::new(),
            modified_at: 0,
            created_at: 0,
            cell_index: i as u32,
            unit_index: 0,
            chunk_kind: "WholeCell".into(),
            summary: None,
            vector: deterministic_embed(&format!("{t} x"), 32)
                .unwrap_or_else(|_| EmbeddingVector { values: vec![1.0; 32], model_id: "offline".into() }),
        })
        .collect();
    store.upsert(objects).unwrap();
    store
}
