//! Latent-factor model and alternating least squares training.
//!
//! The model is the pure bilinear form: predicted rating = qᵢ·pⱼ, no biases,
//! no mean-centering. Training minimizes squared error over observed entries
//! plus squared-L2 (ridge) penalties on both factor matrices, alternating
//! exact per-user and per-item ridge solves.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::dataset::RatingsDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Latent dimension.
    pub d: usize,
    /// Ridge weight on user factors.
    pub lambda_q: f64,
    /// Ridge weight on item factors.
    pub lambda_p: f64,
    /// Maximum full ALS iterations (0 returns the initialization unchanged).
    pub max_iters: usize,
    /// Relative loss-change convergence threshold.
    pub tolerance: f64,
    /// Factors initialize uniform on [0, init_scale]; 0 gives all-zero factors.
    pub init_scale: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults: lambda 0.05 on both sides, 50 iterations, tolerance 1e-5,
    /// init_scale 1/sqrt(d) so initial predictions are O(1).
    pub fn new(d: usize) -> Self {
        TrainConfig {
            d,
            lambda_q: 0.05,
            lambda_p: 0.05,
            max_iters: 50,
            tolerance: 1e-5,
            init_scale: 1.0 / (d.max(1) as f64).sqrt(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParam {
                name: "d",
                msg: "latent dimension must be >= 1".into(),
            });
        }
        for (name, v) in [("lambda_q", self.lambda_q), ("lambda_p", self.lambda_p)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParam {
                    name,
                    msg: format!("{v} must be finite and >= 0"),
                });
            }
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidParam {
                name: "tolerance",
                msg: format!("{} must be finite and > 0", self.tolerance),
            });
        }
        if !self.init_scale.is_finite() || self.init_scale < 0.0 {
            return Err(Error::InvalidParam {
                name: "init_scale",
                msg: format!("{} must be finite and >= 0", self.init_scale),
            });
        }
        Ok(())
    }
}

/// What happened during training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub iterations_run: usize,
    /// Loss after each full iteration; non-increasing for exact solves.
    pub loss_history: Vec<f64>,
    /// Train RMSE after each full iteration (for the training log).
    pub rmse_history: Vec<f64>,
    pub final_train_rmse: f64,
}

/// User factors (one column per user) and item factors (one column per item),
/// both d rows, plus the config they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    user_factors: DMatrix<f64>,
    item_factors: DMatrix<f64>,
    config: TrainConfig,
    report: TrainReport,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl FactorModel {
    /// Seeded uniform [0, init_scale] initialization; user entries are drawn
    /// before item entries, user by user, so results are bitwise reproducible.
    pub fn init(n: usize, m: usize, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if n == 0 || m == 0 {
            return Err(Error::InvalidParam {
                name: "n/m",
                msg: format!("need at least one user and one item, got {n}x{m}"),
            });
        }
        let d = config.d;
        let mut rng = StdRng::seed_from_u64(config.seed);
        let mut user_factors = DMatrix::zeros(d, n);
        for i in 0..n {
            for r in 0..d {
                user_factors[(r, i)] = rng.gen::<f64>() * config.init_scale;
            }
        }
        let mut item_factors = DMatrix::zeros(d, m);
        for j in 0..m {
            for r in 0..d {
                item_factors[(r, j)] = rng.gen::<f64>() * config.init_scale;
            }
        }
        Ok(FactorModel {
            user_factors,
            item_factors,
            config,
            report: TrainReport::default(),
        })
    }

    /// Wrap externally built factors (d rows each, one column per user/item).
    pub fn from_factors(
        user_factors: DMatrix<f64>,
        item_factors: DMatrix<f64>,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        if user_factors.nrows() != config.d || item_factors.nrows() != config.d {
            return Err(Error::DimensionMismatch(format!(
                "factor rows {}/{} do not match d={}",
                user_factors.nrows(),
                item_factors.nrows(),
                config.d
            )));
        }
        if user_factors.ncols() == 0 || item_factors.ncols() == 0 {
            return Err(Error::EmptyInput("factor matrices must be nonempty".into()));
        }
        if user_factors.iter().chain(item_factors.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite factor entry".into()));
        }
        Ok(FactorModel {
            user_factors,
            item_factors,
            config,
            report: TrainReport::default(),
        })
    }

    pub fn n_users(&self) -> usize {
        self.user_factors.ncols()
    }

    pub fn n_items(&self) -> usize {
        self.item_factors.ncols()
    }

    pub fn dim(&self) -> usize {
        self.config.d
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn user_factors(&self) -> &DMatrix<f64> {
        &self.user_factors
    }

    pub fn item_factors(&self) -> &DMatrix<f64> {
        &self.item_factors
    }

    pub fn user_factor(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.user_factors.as_slice()[i * d..(i + 1) * d]
    }

    pub fn item_factor(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.item_factors.as_slice()[j * d..(j + 1) * d]
    }

    /// Raw predicted rating qᵢ·pⱼ, deliberately unclamped.
    pub fn predict(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.n_users() {
            return Err(Error::IndexOutOfRange {
                kind: "user",
                index: i,
                limit: self.n_users(),
            });
        }
        if j >= self.n_items() {
            return Err(Error::IndexOutOfRange {
                kind: "item",
                index: j,
                limit: self.n_items(),
            });
        }
        Ok(dot(self.user_factor(i), self.item_factor(j)))
    }

    /// Predicted ratings for user `i` over every item.
    pub fn scores_for(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.n_users() {
            return Err(Error::IndexOutOfRange {
                kind: "user",
                index: i,
                limit: self.n_users(),
            });
        }
        let q = self.user_factor(i);
        Ok((0..self.n_items()).map(|j| dot(q, self.item_factor(j))).collect())
    }

    fn check_covers(&self, ds: &RatingsDataset) -> Result<()> {
        if ds.n_users() > self.n_users() || ds.n_items() > self.n_items() {
            return Err(Error::DimensionMismatch(format!(
                "dataset is {}x{} but model covers {}x{}",
                ds.n_users(),
                ds.n_items(),
                self.n_users(),
                self.n_items()
            )));
        }
        Ok(())
    }

    /// Squared-error loss over observed entries plus squared-L2 penalties:
    /// Σ (r - q·p)² + lambda_q Σ‖q‖² + lambda_p Σ‖p‖².
    pub fn loss(&self, ds: &RatingsDataset, lambda_q: f64, lambda_p: f64) -> Result<f64> {
        self.check_covers(ds)?;
        let mut sum = 0.0;
        for r in ds.ratings() {
            let err = r.value - dot(self.user_factor(r.user as usize), self.item_factor(r.item as usize));
            sum += err * err;
        }
        let q_sq: f64 = self.user_factors.as_slice().iter().map(|v| v * v).sum();
        let p_sq: f64 = self.item_factors.as_slice().iter().map(|v| v * v).sum();
        Ok(sum + lambda_q * q_sq + lambda_p * p_sq)
    }

    /// Root mean squared error over the dataset's observed entries.
    pub fn rmse(&self, ds: &RatingsDataset) -> Result<f64> {
        self.check_covers(ds)?;
        if ds.is_empty() {
            return Err(Error::EmptyInput("rmse over empty dataset".into()));
        }
        let mut sum = 0.0;
        for r in ds.ratings() {
            let err = r.value - dot(self.user_factor(r.user as usize), self.item_factor(r.item as usize));
            sum += err * err;
        }
        Ok((sum / ds.len() as f64).sqrt())
    }

    /// One user half-step: with item factors fixed, set every user column to
    /// the exact ridge minimizer solve(Pᵢ Pᵢᵀ + lambda I) qᵢ = Pᵢ rᵢ over that
    /// user's observed items. `items_of_user` is `RatingsDataset::items_by_user`.
    pub fn user_step(&mut self, items_of_user: &[Vec<(u32, f64)>], lambda: f64) -> Result<()> {
        if items_of_user.len() != self.n_users() {
            return Err(Error::DimensionMismatch(format!(
                "{} adjacency rows for {} users",
                items_of_user.len(),
                self.n_users()
            )));
        }
        let m = self.n_items();
        if let Some(&(j, _)) = items_of_user.iter().flatten().find(|&&(j, _)| j as usize >= m) {
            return Err(Error::IndexOutOfRange {
                kind: "item",
                index: j as usize,
                limit: m,
            });
        }
        let basis = &self.item_factors;
        let solved: Result<Vec<DVector<f64>>> = items_of_user
            .par_iter()
            .enumerate()
            .map(|(i, obs)| {
                ridge_solve(obs, basis, lambda).ok_or(Error::SingularSystem {
                    side: "user",
                    index: i,
                })
            })
            .collect();
        for (i, col) in solved?.into_iter().enumerate() {
            self.user_factors.set_column(i, &col);
        }
        Ok(())
    }

    /// Mirror of `user_step` for item columns; `users_of_item` is
    /// `RatingsDataset::users_by_item`.
    pub fn item_step(&mut self, users_of_item: &[Vec<(u32, f64)>], lambda: f64) -> Result<()> {
        if users_of_item.len() != self.n_items() {
            return Err(Error::DimensionMismatch(format!(
                "{} adjacency columns for {} items",
                users_of_item.len(),
                self.n_items()
            )));
        }
        let n = self.n_users();
        if let Some(&(i, _)) = users_of_item.iter().flatten().find(|&&(i, _)| i as usize >= n) {
            return Err(Error::IndexOutOfRange {
                kind: "user",
                index: i as usize,
                limit: n,
            });
        }
        let basis = &self.user_factors;
        let solved: Result<Vec<DVector<f64>>> = users_of_item
            .par_iter()
            .enumerate()
            .map(|(j, obs)| {
                ridge_solve(obs, basis, lambda).ok_or(Error::SingularSystem {
                    side: "item",
                    index: j,
                })
            })
            .collect();
        for (j, col) in solved?.into_iter().enumerate() {
            self.item_factors.set_column(j, &col);
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    /// Binary serialization: magic header, shapes, config, training report,
    /// then user factors user-by-user and item factors item-by-item, all
    /// little-endian. Round-trips bitwise.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        write_u64(w, self.n_users() as u64)?;
        write_u64(w, self.n_items() as u64)?;
        write_u64(w, self.dim() as u64)?;
        write_f64(w, self.config.lambda_q)?;
        write_f64(w, self.config.lambda_p)?;
        write_u64(w, self.config.max_iters as u64)?;
        write_f64(w, self.config.tolerance)?;
        write_f64(w, self.config.init_scale)?;
        write_u64(w, self.config.seed)?;
        write_u64(w, self.report.iterations_run as u64)?;
        write_u64(w, self.report.loss_history.len() as u64)?;
        for &v in &self.report.loss_history {
            write_f64(w, v)?;
        }
        write_u64(w, self.report.rmse_history.len() as u64)?;
        for &v in &self.report.rmse_history {
            write_f64(w, v)?;
        }
        write_f64(w, self.report.final_train_rmse)?;
        for v in self.user_factors.as_slice() {
            write_f64(w, *v)?;
        }
        for v in self.item_factors.as_slice() {
            write_f64(w, *v)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat(format!(
                "bad magic {:?} (expected {:?})",
                magic, MAGIC
            )));
        }
        let n = read_u64(r)? as usize;
        let m = read_u64(r)? as usize;
        let d = read_u64(r)? as usize;
        if n == 0 || m == 0 || d == 0 {
            return Err(Error::ModelFormat(format!("degenerate shape {n}x{m}x{d}")));
        }
        if d.saturating_mul(n.max(m)) > (1 << 33) {
            return Err(Error::ModelFormat(format!("implausible shape {n}x{m}x{d}")));
        }
        let config = TrainConfig {
            d,
            lambda_q: read_f64(r)?,
            lambda_p: read_f64(r)?,
            max_iters: read_u64(r)? as usize,
            tolerance: read_f64(r)?,
            init_scale: read_f64(r)?,
            seed: read_u64(r)?,
        };
        let iterations_run = read_u64(r)? as usize;
        let loss_len = read_u64(r)? as usize;
        if loss_len > (1 << 24) {
            return Err(Error::ModelFormat(format!("implausible history length {loss_len}")));
        }
        let mut loss_history = Vec::with_capacity(loss_len);
        for _ in 0..loss_len {
            loss_history.push(read_f64(r)?);
        }
        let rmse_len = read_u64(r)? as usize;
        if rmse_len > (1 << 24) {
            return Err(Error::ModelFormat(format!("implausible history length {rmse_len}")));
        }
        let mut rmse_history = Vec::with_capacity(rmse_len);
        for _ in 0..rmse_len {
            rmse_history.push(read_f64(r)?);
        }
        let final_train_rmse = read_f64(r)?;
        let mut user_data = vec![0.0; d * n];
        for v in &mut user_data {
            *v = read_f64(r)?;
        }
        let mut item_data = vec![0.0; d * m];
        for v in &mut item_data {
            *v = read_f64(r)?;
        }
        if user_data.iter().chain(item_data.iter()).any(|v| !v.is_finite()) {
            return Err(Error::ModelFormat("non-finite factor entry".into()));
        }
        Ok(FactorModel {
            user_factors: DMatrix::from_vec(d, n, user_data),
            item_factors: DMatrix::from_vec(d, m, item_data),
            config,
            report: TrainReport {
                iterations_run,
                loss_history,
                rmse_history,
                final_train_rmse,
            },
        })
    }
}

const MAGIC: &[u8; 8] = b"DIVRECF1";

fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Exact ridge solve for one row: (B_obs B_obsᵀ + lambda I) x = B_obs r,
/// where B_obs stacks the basis columns this row observes. Returns None when
/// the normal matrix is not positive definite (lambda = 0 and the observed
/// columns span fewer than d dimensions).
fn ridge_solve(obs: &[(u32, f64)], basis: &DMatrix<f64>, lambda: f64) -> Option<DVector<f64>> {
    let d = basis.nrows();
    let mut normal = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for &(j, rating) in obs {
        let v = basis.column(j as usize);
        for c in 0..d {
            let vc = v[c];
            rhs[c] += rating * vc;
            for row in 0..d {
                normal[(row, c)] += v[row] * vc;
            }
        }
    }
    for i in 0..d {
        normal[(i, i)] += lambda;
    }
    Cholesky::new(normal).map(|ch| ch.solve(&rhs))
}

/// Alternate user and item half-steps from a seeded initialization, recording
/// loss and train RMSE after each full iteration, and stop early once the
/// relative loss change drops below `config.tolerance`.
pub fn train(ds: &RatingsDataset, config: &TrainConfig) -> Result<FactorModel> {
    config.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyInput("cannot train on an empty dataset".into()));
    }
    let items_of_user = ds.items_by_user();
    let users_of_item = ds.users_by_item();
    let mut model = FactorModel::init(ds.n_users(), ds.n_items(), config.clone())?;

    let mut prev_loss: Option<f64> = None;
    for _ in 0..config.max_iters {
        model.user_step(&items_of_user, config.lambda_q)?;
        model.item_step(&users_of_item, config.lambda_p)?;
        let loss = model.loss(ds, config.lambda_q, config.lambda_p)?;
        let rmse = model.rmse(ds)?;
        model.report.loss_history.push(loss);
        model.report.rmse_history.push(rmse);
        model.report.iterations_run += 1;
        let converged = prev_loss.is_some_and(|prev| {
            (prev - loss).abs() / prev.abs().max(f64::MIN_POSITIVE) < config.tolerance
        });
        prev_loss = Some(loss);
        if converged {
            break;
        }
    }
    model.report.final_train_rmse = match model.report.rmse_history.last() {
        Some(&r) => r,
        None => model.rmse(ds)?, // max_iters = 0: report the initialization's RMSE
    };
    Ok(model)
}
