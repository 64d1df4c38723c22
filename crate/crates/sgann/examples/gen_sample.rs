//! One-off generator for the bundled sample dataset.

use std::path::Path;

use sgann::sparse::NormalizationMode;
use sgann::svmlight;
use sgann::synth::{generate, SyntheticProfile};

fn main() {
    let profile = SyntheticProfile {
        name: "news20_sample".to_string(),
        dim: 62_061,
        n_vectors: 1_000,
        n_queries: 0,
        nnz: 80,
        clusters: 20,
        noise: 0.35,
        normalization: NormalizationMode::L1SumToOne,
        seed: 20_250_815,
    };
    let ds = generate(&profile).unwrap();
    let labels: Vec<i32> = ds.labels().unwrap().iter().map(|l| l + 1).collect();
    svmlight::write_file(Path::new("data/news20_sample.svm"), &labels, ds.vectors()).unwrap();
    println!("wrote {} vectors", ds.len());
}
