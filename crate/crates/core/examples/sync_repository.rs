//! Incremental sync: add, edit and delete notebooks between cycles.

use std::fs;

use nbsearch::app::{self, AppConfig, Syncer};
use nbsearch::ModelGateway;

fn notebook(cells: &[(&str, &str)]) -> String {
    let cells: Vec<_> =
        cells.iter().map(|(t, s)| serde_json::json!({"cell_type": t, "metadata": {}, "source": s})).collect();
    serde_json::json!({"nbformat": 4, "nbformat_minor": 5, "metadata": {}, "cells": cells}).to_string()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = std::env::temp_dir().join("nbsearch-sync-example");
    let _ = fs::remove_dir_all(&work);
    let repo = work.join("repo");
    fs::create_dir_all(&repo)?;
    fs::write(repo.join("a.ipynb"), notebook(&[("markdown", "Load data"), ("code", "df = load()")]))?;

    let cfg = AppConfig::offline(&repo, work.join("index"));
    let gw = ModelGateway::new(cfg.model.clone());
    println!("index: {:?}", app::cmd_index(&cfg, &gw)?);

    let mut syncer = Syncer::open(&cfg, &gw)?;
    let report = |label: &str, syncer: &mut Syncer| -> Result<(), app::AppError> {
        let s = syncer.cycle()?;
        println!("{label:>8}: {s:?}, store has {} objects", syncer.store().len());
        Ok(())
    };

    report("no-op", &mut syncer)?;
    fs::write(repo.join("b.ipynb"), notebook(&[("code", "def f():\n    return 1")]))?;
    report("add", &mut syncer)?;
    fs::write(repo.join("a.ipynb"), notebook(&[("markdown", "Load the data twice")]))?;
    report("edit", &mut syncer)?;
    fs::remove_file(repo.join("b.ipynb"))?;
    report("delete", &mut syncer)?;
    Ok(())
}
