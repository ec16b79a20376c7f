//! Deterministic offline embeddings and their cosine distances.

use nbsearch::ModelGateway;

fn main() {
    let gw = ModelGateway::offline();
    let texts = ["load the sales csv", "read sales data from csv", "plot a histogram of ages"];
    let vectors = gw.embed_batch(&texts).unwrap();
    println!("model {}, dimension {}", gw.embed_model_id(), vectors[0].dim());
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i + 1) {
            let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
            println!("{:?} vs {:?}: distance {:.4}", texts[i], texts[j], 1.0 - dot);
        }
    }
}
