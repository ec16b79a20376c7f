//! Evaluate a labeled query set and print the per-type table.
//!
//!     cargo run --example evaluate -- [REPO_DIR] [QUERIES.jsonl]

use std::path::PathBuf;

use nbsearch::app::{self, AppConfig};
use nbsearch::ModelGateway;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut args = std::env::args().skip(1);
    let repo = args.next().map(PathBuf::from).unwrap_or_else(|| fixtures.join("corpus"));
    let queries = args.next().map(PathBuf::from).unwrap_or_else(|| fixtures.join("queries.jsonl"));

    let work = std::env::temp_dir().join("nbsearch-evaluate-example");
    let _ = std::fs::remove_dir_all(&work);
    std::fs::create_dir_all(&work)?;
    let cfg = AppConfig::offline(&repo, work.join("index"));
    let gw = ModelGateway::new(cfg.model.clone());
    app::cmd_index(&cfg, &gw)?;

    // The report is written next to the query file, so evaluate a copy.
    let copy = work.join(queries.file_name().unwrap_or_default());
    std::fs::copy(&queries, &copy)?;
    let outcome = app::cmd_eval(&cfg, &gw, &copy)?;
    for e in &outcome.line_errors {
        eprintln!("{e}");
    }
    print!("{}", outcome.report.render_table());
    println!("per-query details in {}", outcome.report_path.display());
    Ok(())
}
