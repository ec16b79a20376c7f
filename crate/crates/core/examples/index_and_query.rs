//! Index a repository offline and run one query of each type.
//!
//!     cargo run --example index_and_query -- [REPO_DIR]

use std::path::PathBuf;

use nbsearch::app::{self, AppConfig};
use nbsearch::{ModelGateway, ObjectKey, Query, QueryType};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let repo = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus"));
    let index = tempfile_dir("nbsearch-index-example");
    let cfg = AppConfig::offline(&repo, &index);
    let gw = ModelGateway::new(cfg.model.clone());
    let summary = app::cmd_index(&cfg, &gw)?;
    println!("{summary:?}\n");

    let queries = [
        Query::text(QueryType::EQ, "Cleaning the sales data Drop rows where monthly_revenue is missing and clip outliers above the 99th percentile.", 3),
        Query::text(QueryType::UDQ, "remove outliers from revenue", 3),
        Query::code_summary(ObjectKey::new("team_a/00_sales.ipynb", 4, 0), 3),
    ];
    for q in &queries {
        match app::cmd_query(&cfg, &gw, q) {
            Ok(hits) => print!("{}:\n{}\n", q.qtype.label(), app::render_hits(&hits)),
            Err(e) => println!("{}: {e}\n", q.qtype.label()),
        }
    }
    Ok(())
}

fn tempfile_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}
