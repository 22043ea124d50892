use std::path::Path;

use divrec::dataset::{parse_ratings_path, RatingsDataset, RatingsFormat};
use divrec::synth;

/// The MovieLens-100k ratings when available, else a deterministic planted
/// stand-in of identical shape (943 users, 1682 items, 100,000 ratings).
///
/// Lookup order: an `ML100K` environment variable holding the path to
/// `u.data`, then `data/ml-100k/u.data` relative to the package or workspace
/// root. The returned label says which source ran.
pub fn ml100k() -> (RatingsDataset, &'static str) {
    if let Ok(path) = std::env::var("ML100K") {
        let ds = parse_ratings_path(&path, RatingsFormat::MovielensTab)
            .expect("ML100K should point at a MovieLens-format ratings file");
        return (ds, "movielens-100k via ML100K");
    }
    for candidate in ["data/ml-100k/u.data", "../../data/ml-100k/u.data"] {
        if Path::new(candidate).exists() {
            let ds = parse_ratings_path(candidate, RatingsFormat::MovielensTab)
                .expect("u.data should parse");
            return (ds, "movielens-100k via data/ml-100k");
        }
    }
    let ds = synth::ml100k_standin(0).expect("stand-in generation");
    (ds, "planted stand-in, 943x1682, 100k ratings")
}
