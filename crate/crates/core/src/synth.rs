//! Deterministic synthetic ratings for benchmarks and tests: planted
//! low-rank instances at arbitrary shapes, including a MovieLens-100k-sized
//! stand-in for environments without the real file.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dataset::RatingsDataset;
use crate::error::{Error, Result};
use crate::factorization::{FactorModel, TrainConfig};

fn uniform_matrix(rows: usize, cols: usize, scale: f64, rng: &mut StdRng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(0.0..scale))
}

/// A seeded model with uniform factor entries in [0, scale); no training
/// report beyond the defaults.
pub fn random_model(n_users: usize, m_items: usize, d: usize, scale: f64, seed: u64) -> Result<FactorModel> {
    let mut rng = StdRng::seed_from_u64(seed);
    let q = uniform_matrix(d, n_users, scale, &mut rng);
    let p = uniform_matrix(d, m_items, scale, &mut rng);
    FactorModel::from_factors(q, p, TrainConfig::new(d))
}

/// Sparse ratings planted on a rank-d model: every user and item covered,
/// exactly `n_ratings` entries, values rounded to the 1..5 scale after
/// uniform noise. Factor entries are scaled so products center near 3.5.
pub fn planted_ratings(
    n_users: usize,
    m_items: usize,
    n_ratings: usize,
    d: usize,
    seed: u64,
) -> Result<RatingsDataset> {
    if n_users == 0 || m_items == 0 || d == 0 {
        return Err(Error::InvalidParam {
            name: "shape",
            msg: format!("degenerate shape {n_users}x{m_items}, d={d}"),
        });
    }
    if n_ratings > n_users * m_items {
        return Err(Error::InvalidParam {
            name: "n_ratings",
            msg: format!("{n_ratings} exceeds {n_users}x{m_items} cells"),
        });
    }

    let mut rng = StdRng::seed_from_u64(seed);
    let scale = 2.0 * (3.5 / d as f64).sqrt();
    let q = uniform_matrix(d, n_users, scale, &mut rng);
    let p = uniform_matrix(d, m_items, scale, &mut rng);

    // Coverage pass: every item, then every user, gets at least one cell.
    let mut cells: Vec<(u32, u32)> = Vec::with_capacity(n_ratings);
    let mut seen = HashSet::new();
    for j in 0..m_items {
        let pair = ((j % n_users) as u32, j as u32);
        if seen.insert(pair) {
            cells.push(pair);
        }
    }
    for u in 0..n_users {
        let pair = (u as u32, (u % m_items) as u32);
        if seen.insert(pair) {
            cells.push(pair);
        }
    }
    if cells.len() > n_ratings {
        return Err(Error::InvalidParam {
            name: "n_ratings",
            msg: format!("{n_ratings} cannot cover {n_users} users and {m_items} items"),
        });
    }
    while cells.len() < n_ratings {
        let pair = (
            rng.gen_range(0..n_users) as u32,
            rng.gen_range(0..m_items) as u32,
        );
        if seen.insert(pair) {
            cells.push(pair);
        }
    }

    let triples: Vec<(u32, u32, f64)> = cells
        .into_iter()
        .map(|(u, i)| {
            let mean: f64 = q.column(u as usize).dot(&p.column(i as usize));
            let value = (mean + rng.gen_range(-0.9..0.9)).round().clamp(1.0, 5.0);
            (u, i, value)
        })
        .collect();
    RatingsDataset::from_external(triples)
}

/// Every cell observed, values exactly rank-d products inside [1, 5]; an
/// unregularized factorization at the same rank can drive train RMSE to
/// numerical noise on this data.
pub fn fully_observed_low_rank(
    n_users: usize,
    m_items: usize,
    d: usize,
    seed: u64,
) -> Result<RatingsDataset> {
    if n_users == 0 || m_items == 0 || d == 0 {
        return Err(Error::InvalidParam {
            name: "shape",
            msg: format!("degenerate shape {n_users}x{m_items}, d={d}"),
        });
    }
    let mut rng = StdRng::seed_from_u64(seed);
    // Entry ranges chosen so every product lands in [1, 5]: with all factor
    // entries in [sqrt(1/d), sqrt(5/d)], the d-term sum is in [1, 5].
    let lo = (1.0 / d as f64).sqrt();
    let hi = (5.0 / d as f64).sqrt();
    let q = DMatrix::from_fn(d, n_users, |_, _| rng.gen_range(lo..hi));
    let p = DMatrix::from_fn(d, m_items, |_, _| rng.gen_range(lo..hi));
    let mut triples = Vec::with_capacity(n_users * m_items);
    for u in 0..n_users {
        for i in 0..m_items {
            let value: f64 = q.column(u).dot(&p.column(i));
            triples.push((u as u32, i as u32, value));
        }
    }
    RatingsDataset::from_external(triples)
}

/// MovieLens-100k-shaped stand-in: 943 users, 1682 items, exactly 100,000
/// ratings on the 1..5 scale, planted rank 8.
pub fn ml100k_standin(seed: u64) -> Result<RatingsDataset> {
    planted_ratings(943, 1682, 100_000, 8, seed)
}

/// Render a dataset in the tab-separated layout `user<TAB>item<TAB>rating
/// <TAB>timestamp` (timestamps constant 0), reparseable into the same dense
/// index space.
pub fn to_movielens_tab(ds: &RatingsDataset) -> String {
    let mut out = String::new();
    for r in ds.ratings() {
        let user = ds.user_ids().external(r.user).expect("interned user");
        let item = ds.item_ids().external(r.item).expect("interned item");
        out.push_str(&format!("{user}\t{item}\t{}\t0\n", r.value));
    }
    out
}
