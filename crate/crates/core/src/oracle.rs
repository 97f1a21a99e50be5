//! Independent brute-force oracles: Monte Carlo estimates of the Fisher
//! definitions, materialized Kronecker sums, and finite-difference score
//! checks. These never call the closed-form machinery they are used to
//! validate.

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::OracleError;
use crate::parallel::run_sharded;

const DELTA: f64 = 8.0;
const MIN_DRAWS: usize = 100_000;
const KRON_CAP: usize = 10_000;
const SHARD_SIZE: usize = 65_536;

/// Ground-truth 9-dimensional Gaussian patch model for oracle runs.
#[derive(Debug, Clone)]
pub struct SyntheticPatchModel {
    cov9: SMatrix<f64, 9, 9>,
    chol: SMatrix<f64, 9, 9>,
    pub mu: f64,
    pub beta: f64,
}

impl SyntheticPatchModel {
    /// Requires `cov9` to be symmetric positive definite.
    pub fn new(cov9: SMatrix<f64, 9, 9>, mu: f64, beta: f64) -> Result<Self, OracleError> {
        let sym = (cov9 + cov9.transpose()) * 0.5;
        let chol = nalgebra::Cholesky::new(sym)
            .ok_or(OracleError::NotPositiveDefinite)?
            .l();
        Ok(Self {
            cov9: sym,
            chol,
            mu,
            beta,
        })
    }

    pub fn cov9(&self) -> &SMatrix<f64, 9, 9> {
        &self.cov9
    }

    /// The model's sigma^2 is the center-site variance of the patch.
    pub fn sigma_sq(&self) -> f64 {
        self.cov9[(4, 4)]
    }

    /// One centered patch draw (x - mu), via the Cholesky factor.
    fn draw_centered(&self, rng: &mut ChaCha8Rng) -> SVector<f64, 9> {
        let mut xi = SVector::<f64, 9>::zeros();
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        self.chol * xi
    }
}

/// Position in the 3x3 Fisher matrices, rows/cols ordered (mu, sigma^2, beta).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormEntry {
    MuMu,
    MuSigmaSq,
    MuBeta,
    SigmaSqMu,
    SigmaSqSigmaSq,
    SigmaSqBeta,
    BetaMu,
    BetaSigmaSq,
    BetaBeta,
}

impl FormEntry {
    pub const ALL: [FormEntry; 9] = [
        FormEntry::MuMu,
        FormEntry::MuSigmaSq,
        FormEntry::MuBeta,
        FormEntry::SigmaSqMu,
        FormEntry::SigmaSqSigmaSq,
        FormEntry::SigmaSqBeta,
        FormEntry::BetaMu,
        FormEntry::BetaSigmaSq,
        FormEntry::BetaBeta,
    ];

    /// (row, col) in the 3x3 matrix.
    pub fn indices(&self) -> (usize, usize) {
        match self {
            FormEntry::MuMu => (0, 0),
            FormEntry::MuSigmaSq => (0, 1),
            FormEntry::MuBeta => (0, 2),
            FormEntry::SigmaSqMu => (1, 0),
            FormEntry::SigmaSqSigmaSq => (1, 1),
            FormEntry::SigmaSqBeta => (1, 2),
            FormEntry::BetaMu => (2, 0),
            FormEntry::BetaSigmaSq => (2, 1),
            FormEntry::BetaBeta => (2, 2),
        }
    }

    /// Entries that are identically zero for this model (B, C, M, N and
    /// their transposes).
    pub fn is_analytically_zero(&self) -> bool {
        matches!(
            self,
            FormEntry::MuSigmaSq | FormEntry::MuBeta | FormEntry::SigmaSqMu | FormEntry::BetaMu
        )
    }
}

/// Which Fisher definition to estimate: score products or negative Hessians.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherOrder {
    First,
    Second,
}

/// Analytic first derivatives of the local conditional log density at a
/// centered patch draw.
#[inline]
fn scores(model: &SyntheticPatchModel, z: &SVector<f64, 9>) -> [f64; 3] {
    let s2 = model.sigma_sq();
    let beta = model.beta;
    let mut w = 0.0;
    for j in 0..9 {
        if j != 4 {
            w += z[j];
        }
    }
    let y = z[4] - beta * w;
    [
        (1.0 - beta * DELTA) * y / s2,
        -0.5 / s2 + y * y / (2.0 * s2 * s2),
        y * w / s2,
    ]
}

/// Analytic second derivatives (Hessian entries) at a centered patch draw.
#[inline]
fn hessian_entry(model: &SyntheticPatchModel, z: &SVector<f64, 9>, row: usize, col: usize) -> f64 {
    let s2 = model.sigma_sq();
    let beta = model.beta;
    let one = 1.0 - beta * DELTA;
    let mut w = 0.0;
    for j in 0..9 {
        if j != 4 {
            w += z[j];
        }
    }
    let y = z[4] - beta * w;
    match (row.min(col), row.max(col)) {
        (0, 0) => -one * one / s2,
        (0, 1) => -one * y / (s2 * s2),
        (0, 2) => (-DELTA * y - one * w) / s2,
        (1, 1) => 0.5 / (s2 * s2) - y * y / (s2 * s2 * s2),
        (1, 2) => -y * w / (s2 * s2),
        (2, 2) => -w * w / s2,
        _ => unreachable!("3x3 Hessian"),
    }
}

/// Monte Carlo estimate of one Fisher-matrix entry under the synthetic patch
/// model: score products for `First`, negative expected Hessians for
/// `Second`. Returns (estimate, standard error). Deterministic given the
/// seed: draws are split into fixed shards combined in shard order.
pub fn mc_fisher_entry(
    model: &SyntheticPatchModel,
    which: FormEntry,
    order: FisherOrder,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64), OracleError> {
    if draws < MIN_DRAWS {
        return Err(OracleError::TooFewDraws {
            min: MIN_DRAWS,
            got: draws,
        });
    }
    let (row, col) = which.indices();
    let num_shards = draws.div_ceil(SHARD_SIZE);
    let partials = run_sharded(num_shards, |shard| {
        let start = shard * SHARD_SIZE;
        let count = SHARD_SIZE.min(draws - start);
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed ^ (shard as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1),
        );
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..count {
            let z = model.draw_centered(&mut rng);
            let v = match order {
                FisherOrder::First => {
                    let s = scores(model, &z);
                    s[row] * s[col]
                }
                FisherOrder::Second => -hessian_entry(model, &z, row, col),
            };
            sum += v;
            sum_sq += v * v;
        }
        (sum, sum_sq)
    });
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for (s, q) in partials {
        sum += s;
        sum_sq += q;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Log of the local conditional density evaluated on a raw 9-patch; used only
/// by the finite-difference cross-check of the analytic scores.
fn patch_logdensity(x: &SVector<f64, 9>, mu: f64, sigma_sq: f64, beta: f64) -> f64 {
    let mut excess = 0.0;
    for j in 0..9 {
        if j != 4 {
            excess += x[j] - mu;
        }
    }
    let dev = x[4] - mu - beta * excess;
    -0.5 * (2.0 * std::f64::consts::PI * sigma_sq).ln() - dev * dev / (2.0 * sigma_sq)
}

/// Maximum relative mismatch between the analytic scores and central finite
/// differences of the log density, over `points` random patch draws.
pub fn finite_difference_score_residual(
    model: &SyntheticPatchModel,
    points: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..points {
        let z = model.draw_centered(&mut rng);
        let x = z.add_scalar(model.mu);
        let s = scores(model, &z);
        let s2 = model.sigma_sq();
        let fd = [
            (patch_logdensity(&x, model.mu + h, s2, model.beta)
                - patch_logdensity(&x, model.mu - h, s2, model.beta))
                / (2.0 * h),
            (patch_logdensity(&x, model.mu, s2 + h, model.beta)
                - patch_logdensity(&x, model.mu, s2 - h, model.beta))
                / (2.0 * h),
            (patch_logdensity(&x, model.mu, s2, model.beta + h)
                - patch_logdensity(&x, model.mu, s2, model.beta - h))
                / (2.0 * h),
        ];
        for k in 0..3 {
            let rel = (s[k] - fd[k]).abs() / s[k].abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    worst
}

/// ||a (x) b||_+ by literally materializing the Kronecker product.
///
/// Shapes are irrelevant to the entry sum, so inputs are flat entry slices;
/// the materialized product is capped at 10^4 entries.
pub fn materialized_kron_sum(a: &[f64], b: &[f64]) -> Result<f64, OracleError> {
    let total = a.len() * b.len();
    if total > KRON_CAP {
        return Err(OracleError::KroneckerTooLarge {
            got: total,
            cap: KRON_CAP,
        });
    }
    let mut entries = Vec::with_capacity(total);
    for &x in a {
        for &y in b {
            entries.push(x * y);
        }
    }
    Ok(entries.iter().sum())
}

/// Random symmetric positive definite 9x9 covariance for oracle runs.
pub fn random_spd_cov9(seed: u64, scale: f64) -> SMatrix<f64, 9, 9> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = SMatrix::<f64, 9, 12>::zeros();
    for v in b.iter_mut() {
        *v = rng.gen_range(-0.5..0.5) * scale;
    }
    let mut m = b * b.transpose();
    for k in 0..9 {
        m[(k, k)] += rng.gen_range(0.1..0.6) * scale * scale;
    }
    m
}
