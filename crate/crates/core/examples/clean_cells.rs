//! Markdown and code cleaning applied before chunking.

use nbsearch::preprocess::{clean_code, clean_markdown};

fn main() {
    let md = "## Results\n\nSee [the report](https://example.com/r) or <https://x.org>.\nIt's `fast`: {really}!";
    let cleaned = clean_markdown(md);
    println!("markdown: {md:?}");
    println!("cleaned:  {:?} ({} urls removed)", cleaned.text, cleaned.removed_url_count);

    let code = "%matplotlib inline\n!pip install pandas\nimport pandas as pd   \n\n\n\n\ndf = pd.read_csv('x.csv')\n";
    println!("\ncode:\n{code}");
    println!("cleaned:\n{}", clean_code(code).text);
}
