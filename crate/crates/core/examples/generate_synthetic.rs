//! Writes the bundled synthetic dataset, its ingest schema and a run config.
//!
//! Usage: `cargo run --release -p vinecast-core --example generate_synthetic [OUT_DIR]`

use std::path::PathBuf;

use serde_json::json;
use vinecast_core::dataio::parse_iso_date;
use vinecast_core::forecast::synthetic::{self, covid_like, generate, joint_spec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic"));
    std::fs::create_dir_all(&out)?;
    let truth = covid_like()?;
    let start = parse_iso_date(synthetic::START_DATE)?;
    let frame = generate(&truth, start, synthetic::N_ROWS, synthetic::SEED)?;
    frame.save_csv(&out.join("synthetic.csv"))?;
    std::fs::write(out.join("schema.json"), serde_json::to_string_pretty(&synthetic::schema())? + "\n")?;
    let spec = joint_spec();
    let config = json!({
        "data": "synthetic.csv",
        "schema": "schema.json",
        "marginals": spec.marginals,
        "vine": spec.vine,
        "split": synthetic::SPLIT_DATE,
        "horizon": 38,
        "draws": 1000,
        "alpha": 0.05,
        "seed": 1,
        "output_dir": "output",
        "sentiment": {
            "corpus": "../sentiment/tweets.csv",
            "lexicons": {
                "Bing": { "path": "../sentiment/bing_sample.tsv", "kind": "binary" },
                "Afinn": { "path": "../sentiment/afinn_sample.tsv", "kind": "scored" }
            },
            "stopwords": "../sentiment/stopwords.txt"
        }
    });
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(&config)? + "\n")?;
    std::fs::write(out.join("truth_vine.txt"), truth.vine.render())?;
    println!("wrote {} rows x {} columns to {}", frame.n_rows(), frame.n_cols(), out.display());
    Ok(())
}
