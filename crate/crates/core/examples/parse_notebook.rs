//! Scan a repository and list the cells of every notebook.
//!
//!     cargo run --example parse_notebook -- [REPO_DIR]

use std::path::PathBuf;

use nbsearch::notebook::{load_notebook, scan_repository, DEFAULT_GLOB};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus"));
    for file in scan_repository(&root, DEFAULT_GLOB)? {
        match load_notebook(&file) {
            Ok(doc) => {
                println!(
                    "{} by {} ({} cells, hash {:016x})",
                    doc.notebook_id,
                    doc.author_name,
                    doc.cells.len(),
                    doc.content_hash
                );
                for cell in &doc.cells {
                    let first = cell.source.lines().next().unwrap_or("");
                    println!("  [{}] {:?}: {first}", cell.cell_index, cell.kind);
                }
            }
            Err(e) => eprintln!("skipping: {e}"),
        }
    }
    Ok(())
}
