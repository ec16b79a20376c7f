//! Build an in-memory store, search it with a filter, and persist it.

use nbsearch::store::NewObject;
use nbsearch::{ModelGateway, SearchFilter, VectorStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gw = ModelGateway::offline();
    let rows = [
        ("a.ipynb", "code", "df = pd.read_csv('sales.csv')"),
        ("a.ipynb", "text", "We load the sales table"),
        ("b.ipynb", "code", "plt.hist(df['age'])"),
        ("b.ipynb", "text", "Age distribution of customers"),
    ];
    let store = VectorStore::new(0, gw.embed_model_id(), "heuristic-v1");
    let mut objects = Vec::new();
    for (i, (nb, cell_type, text)) in rows.iter().enumerate() {
        objects.push(NewObject {
            notebook_id: nb.to_string(),
            contents: text.to_string(),
            cell_type: cell_type.to_string(),
            author_name: "demo".into(),
            modified_at: 0,
            created_at: 0,
            cell_index: i as u32,
            unit_index: 0,
            chunk_kind: "WholeCell".into(),
            summary: None,
            vector: gw.embed_one(text)?,
        });
    }
    store.upsert(objects)?;

    let q = gw.embed_one("read the sales csv")?;
    for filter in [SearchFilter::default(), SearchFilter { cell_type: Some("code".into()), notebook_prefix: None }] {
        println!("filter {filter:?}");
        for hit in store.search(&q, 3, &filter)? {
            println!("  {:.4}  {}  {}", hit.distance, hit.object.key(), hit.object.contents);
        }
    }

    let dir = std::env::temp_dir().join("nbsearch-vector-search-example");
    store.save(&dir)?;
    let loaded = VectorStore::load(&dir)?;
    println!("saved and reloaded {} objects from {}", loaded.len(), dir.display());
    Ok(())
}
