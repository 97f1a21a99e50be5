//! Metropolis-Hastings / Gibbs dynamics on the local conditional density and
//! the curved-exponential-family decomposition of the pseudo-likelihood.
//!
//! The local conditional of a pairwise isotropic GMRF is
//! `N(mu + beta * sum_j (x_j - mu), sigma^2)`; Gibbs mode redraws each site
//! exactly from it, random-walk MH proposes `x + N(0, proposal_std^2)` and
//! accepts with the usual ratio.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::ModelError;
use crate::lattice::{Lattice, ModelParams};

/// Sampler kind: exact Gibbs or Gaussian random-walk Metropolis-Hastings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    RandomWalkMh,
    Gibbs,
}

/// Site visit order within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Row-major scan; strictly sequential.
    Raster,
    /// Color-by-color scan using the (row mod 3, col mod 3) classes, a proper
    /// coloring of the order <= 3 neighbor graphs when 3 divides the side.
    /// Sweeps are sequential either way; the coloring fixes the visit order.
    Checkerboard,
}

/// Sweep configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SamplerConfig {
    pub mode: SamplerMode,
    /// Random-walk proposal scale; `None` uses sigma of the current params.
    pub proposal_std: Option<f64>,
    pub sweep_order: SweepOrder,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mode: SamplerMode::Gibbs,
            proposal_std: None,
            sweep_order: SweepOrder::Raster,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(std) = self.proposal_std {
            if !(std > 0.0) || !std.is_finite() {
                return Err(ModelError::InvalidProposalStd(std));
            }
        }
        Ok(())
    }
}

/// Per-sweep proposal/acceptance counters (Gibbs accepts everything).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepStats {
    pub proposed: usize,
    pub accepted: usize,
}

impl SweepStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return 1.0;
        }
        self.accepted as f64 / self.proposed as f64
    }
}

/// Log of the local conditional density p(x_i | eta_i, theta):
/// `-1/2 log(2 pi sigma^2) - [x - mu - beta sum_j (x_j - mu)]^2 / (2 sigma^2)`.
pub fn local_conditional_logdensity(
    x_center: f64,
    neighbor_values: &[f64],
    params: &ModelParams,
) -> Result<f64, ModelError> {
    params.validate()?;
    if !x_center.is_finite() {
        return Err(ModelError::NonFiniteInput("x_center"));
    }
    let mut excess = 0.0;
    for &v in neighbor_values {
        if !v.is_finite() {
            return Err(ModelError::NonFiniteInput("neighbor_values"));
        }
        excess += v - params.mu;
    }
    let dev = x_center - params.mu - params.beta * excess;
    Ok(-0.5 * (2.0 * std::f64::consts::PI * params.sigma_sq).ln()
        - dev * dev / (2.0 * params.sigma_sq))
}

#[inline]
fn conditional_mean(lattice: &Lattice, row: usize, col: usize, params: &ModelParams) -> f64 {
    let delta = lattice.neighborhood().delta() as f64;
    params.mu + params.beta * (lattice.neighbor_sum(row, col) - delta * params.mu)
}

/// One sweep visiting every site exactly once; deterministic given the RNG
/// state and sweep order. Returns proposal/acceptance counts.
pub fn metropolis_sweep(
    lattice: &mut Lattice,
    params: &ModelParams,
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SweepStats, ModelError> {
    params.validate()?;
    config.validate()?;
    let side = lattice.side();
    let sigma = params.sigma_sq.sqrt();
    let tau = config.proposal_std.unwrap_or(sigma);
    let mut stats = SweepStats {
        proposed: 0,
        accepted: 0,
    };

    let mut visit = |lattice: &mut Lattice, row: usize, col: usize, rng: &mut ChaCha8Rng| {
        let mean = conditional_mean(lattice, row, col, params);
        match config.mode {
            SamplerMode::Gibbs => {
                let z: f64 = StandardNormal.sample(rng);
                lattice.set(row, col, mean + sigma * z);
                stats.proposed += 1;
                stats.accepted += 1;
            }
            SamplerMode::RandomWalkMh => {
                let current = lattice.get(row, col);
                let z: f64 = StandardNormal.sample(rng);
                let candidate = current + tau * z;
                let d_cur = current - mean;
                let d_new = candidate - mean;
                let log_ratio = (d_cur * d_cur - d_new * d_new) / (2.0 * params.sigma_sq);
                let u: f64 = rng.gen();
                stats.proposed += 1;
                if u.ln() < log_ratio {
                    lattice.set(row, col, candidate);
                    stats.accepted += 1;
                }
            }
        }
    };

    match config.sweep_order {
        SweepOrder::Raster => {
            for row in 0..side {
                for col in 0..side {
                    visit(lattice, row, col, rng);
                }
            }
        }
        SweepOrder::Checkerboard => {
            for color in 0..9 {
                let (cr, cc) = (color / 3, color % 3);
                for row in (cr..side).step_by(3) {
                    for col in (cc..side).step_by(3) {
                        visit(lattice, row, col, rng);
                    }
                }
            }
        }
    }
    Ok(stats)
}

/// Sample mean and biased (1/n^2) sample variance of the lattice; beta is
/// passed through. A constant lattice yields sigma_sq = 0, which downstream
/// operations reject as degenerate.
pub fn estimate_params(lattice: &Lattice, beta: f64) -> ModelParams {
    ModelParams {
        mu: lattice.mean(),
        sigma_sq: lattice.variance(),
        beta,
    }
}

/// Natural parameters c, sufficient statistics T evaluated on the data, and
/// the d(theta) term of the pseudo-likelihood's exponential-family expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalDecomposition {
    pub c: [f64; 5],
    pub t: [f64; 5],
    pub d: f64,
}

impl NaturalDecomposition {
    /// `<c, t> + d`, which equals the pseudo-log-likelihood.
    pub fn log_likelihood(&self) -> f64 {
        self.c.iter().zip(&self.t).map(|(c, t)| c * t).sum::<f64>() + self.d
    }
}

/// Exponential-family decomposition of the pseudo-likelihood.
///
/// `c = ( mu(1-beta*delta)/sigma^2, -1/(2 sigma^2), beta/sigma^2,
///        -beta*mu(1-beta*delta)/sigma^2, -beta^2/(2 sigma^2) )`
/// paired with
/// `T = ( sum x_i, sum x_i^2, sum_i sum_j x_i x_j, sum_i sum_j x_j,
///        sum_i (sum_j x_j)^2 )`
/// and
/// `d = -(n/2)[log(2 pi sigma^2) + mu^2/sigma^2]
///      + beta*delta*mu^2*n (1 - beta*delta/2) / sigma^2`.
pub fn natural_decomposition(
    lattice: &Lattice,
    params: &ModelParams,
) -> Result<NaturalDecomposition, ModelError> {
    params.validate()?;
    let side = lattice.side();
    let n = lattice.num_sites() as f64;
    let delta = lattice.neighborhood().delta() as f64;
    let (mu, s2, beta) = (params.mu, params.sigma_sq, params.beta);

    let mut t = [0.0f64; 5];
    for row in 0..side {
        for col in 0..side {
            let x = lattice.get(row, col);
            let ns = lattice.neighbor_sum(row, col);
            t[0] += x;
            t[1] += x * x;
            t[2] += x * ns;
            t[3] += ns;
            t[4] += ns * ns;
        }
    }

    let one = 1.0 - beta * delta;
    let c = [
        mu * one / s2,
        -1.0 / (2.0 * s2),
        beta / s2,
        -beta * mu * one / s2,
        -beta * beta / (2.0 * s2),
    ];
    let d = -(n / 2.0) * ((2.0 * std::f64::consts::PI * s2).ln() + mu * mu / s2)
        + beta * delta * mu * mu * n * (1.0 - beta * delta / 2.0) / s2;
    Ok(NaturalDecomposition { c, t, d })
}

/// Sum over all sites of the local conditional log density.
pub fn pseudo_log_likelihood(lattice: &Lattice, params: &ModelParams) -> Result<f64, ModelError> {
    params.validate()?;
    let side = lattice.side();
    let delta = lattice.neighborhood().delta() as f64;
    let norm = -0.5 * (2.0 * std::f64::consts::PI * params.sigma_sq).ln();
    let mut total = 0.0;
    for row in 0..side {
        for col in 0..side {
            let x = lattice.get(row, col);
            let excess = lattice.neighbor_sum(row, col) - delta * params.mu;
            let dev = x - params.mu - params.beta * excess;
            total += norm - dev * dev / (2.0 * params.sigma_sq);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{init_lattice, neighbors, NeighborhoodSpec};
    use rand::SeedableRng;

    const HALF_LOG_2PI: f64 = 0.918938533204672741_f64; // (1/2) log(2 pi)

    fn params(mu: f64, s2: f64, beta: f64) -> ModelParams {
        ModelParams::new(mu, s2, beta).unwrap()
    }

    #[test]
    fn logdensity_standard_normal_at_zero() {
        let p = params(0.0, 1.0, 0.0);
        let v = local_conditional_logdensity(0.0, &[5.0; 8], &p).unwrap();
        assert!((v + HALF_LOG_2PI).abs() < 1e-15);
    }

    #[test]
    fn logdensity_at_conditional_mode() {
        let p = params(0.4, 2.5, 0.07);
        let nb = [1.0, -0.3, 2.0, 0.9, 0.1, -1.4, 0.5, 0.8];
        let excess: f64 = nb.iter().map(|v| v - p.mu).sum();
        let x = p.mu + p.beta * excess;
        let v = local_conditional_logdensity(x, &nb, &p).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI * p.sigma_sq).ln();
        assert!((v - expected).abs() < 1e-15);
    }

    #[test]
    fn logdensity_hand_evaluated() {
        // mu=0, sigma^2=1, beta=0.1, all 8 neighbors = 1, x = 0:
        // -1/2 log(2 pi) - (0 - 0.8)^2 / 2
        let p = params(0.0, 1.0, 0.1);
        let v = local_conditional_logdensity(0.0, &[1.0; 8], &p).unwrap();
        assert!((v - (-HALF_LOG_2PI - 0.32)).abs() < 1e-15);
    }

    #[test]
    fn logdensity_rejects_bad_input() {
        let p = params(0.0, 1.0, 0.0);
        assert!(local_conditional_logdensity(f64::NAN, &[0.0], &p).is_err());
        assert!(local_conditional_logdensity(0.0, &[f64::INFINITY], &p).is_err());
        let bad = ModelParams {
            mu: 0.0,
            sigma_sq: 0.0,
            beta: 0.0,
        };
        assert!(local_conditional_logdensity(0.0, &[0.0], &bad).is_err());
    }

    #[test]
    fn gibbs_at_beta_zero_matches_marginal() {
        let p = params(1.5, 0.8, 0.0);
        let mut lat = init_lattice(64, &p, 21).unwrap();
        let config = SamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..30 {
            metropolis_sweep(&mut lat, &p, &config, &mut rng).unwrap();
        }
        let n = lat.num_sites() as f64;
        let se_mean = (p.sigma_sq / n).sqrt();
        assert!((lat.mean() - p.mu).abs() < 3.0 * se_mean);
        // chi-square spread of the sample variance: SE ~ sigma^2 sqrt(2/n)
        let se_var = p.sigma_sq * (2.0 / n).sqrt();
        assert!((lat.variance() - p.sigma_sq).abs() < 3.0 * se_var);
    }

    #[test]
    fn tiny_proposals_are_always_accepted() {
        let p = params(0.0, 1.0, 0.05);
        let mut lat = init_lattice(32, &p, 4).unwrap();
        let before = lat.values().to_vec();
        let config = SamplerConfig {
            mode: SamplerMode::RandomWalkMh,
            proposal_std: Some(1e-9),
            sweep_order: SweepOrder::Raster,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let stats = metropolis_sweep(&mut lat, &p, &config, &mut rng).unwrap();
        assert!(stats.acceptance_rate() > 0.999, "{:?}", stats);
        let max_move = lat
            .values()
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_move < 1e-8);
    }

    fn mean_nn_correlation(lat: &Lattice) -> f64 {
        let m = lat.mean();
        let var = lat.variance();
        let side = lat.side();
        let mut acc = 0.0;
        for r in 0..side {
            for c in 0..side {
                acc += (lat.get(r, c) - m) * (lat.get(r, (c + 1) % side) - m);
            }
        }
        acc / (side * side) as f64 / var
    }

    #[test]
    fn correlation_increases_with_beta() {
        let config = SamplerConfig::default();
        let mut corr = Vec::new();
        for &beta in &[0.05, 0.2] {
            let p = params(0.0, 1.0, beta);
            let mut lat = init_lattice(128, &p, 30).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            for _ in 0..60 {
                metropolis_sweep(&mut lat, &p, &config, &mut rng).unwrap();
            }
            corr.push(mean_nn_correlation(&lat));
        }
        assert!(corr[0] > 0.0, "corr at beta=0.05: {}", corr[0]);
        assert!(corr[1] > corr[0], "corr {:?}", corr);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let p = params(0.0, 1.0, 0.1);
        let config = SamplerConfig {
            mode: SamplerMode::RandomWalkMh,
            proposal_std: None,
            sweep_order: SweepOrder::Checkerboard,
        };
        let mut a = init_lattice(16, &p, 1).unwrap();
        let mut b = init_lattice(16, &p, 1).unwrap();
        let mut ra = ChaCha8Rng::seed_from_u64(2);
        let mut rb = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            metropolis_sweep(&mut a, &p, &config, &mut ra).unwrap();
            metropolis_sweep(&mut b, &p, &config, &mut rb).unwrap();
        }
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn estimate_params_examples() {
        let lat = Lattice::from_values(5, vec![7.0; 25], NeighborhoodSpec::second_order()).unwrap();
        let est = estimate_params(&lat, 0.3);
        assert_eq!((est.mu, est.sigma_sq, est.beta), (7.0, 0.0, 0.3));
        assert!(est.validate().is_err(), "sigma_sq = 0 is degenerate");

        // {0,1} checkerboard on 6x6: mu = 0.5, sigma^2 = 0.25.
        let values: Vec<f64> = (0..36).map(|i| ((i / 6 + i % 6) % 2) as f64).collect();
        let lat = Lattice::from_values(6, values, NeighborhoodSpec::second_order()).unwrap();
        let est = estimate_params(&lat, 0.0);
        assert!((est.mu - 0.5).abs() < 1e-15);
        assert!((est.sigma_sq - 0.25).abs() < 1e-15);
    }

    #[test]
    fn estimates_are_permutation_invariant() {
        let p = params(0.3, 1.2, 0.0);
        let lat = init_lattice(8, &p, 77).unwrap();
        let mut shuffled = lat.values().to_vec();
        shuffled.reverse();
        shuffled.swap(3, 40);
        let lat2 = Lattice::from_values(8, shuffled, NeighborhoodSpec::second_order()).unwrap();
        let (a, b) = (estimate_params(&lat, 0.1), estimate_params(&lat2, 0.1));
        assert!((a.mu - b.mu).abs() < 1e-12);
        assert!((a.sigma_sq - b.sigma_sq).abs() < 1e-12);
    }

    #[test]
    fn decomposition_reduces_to_gaussian_at_beta_zero() {
        let p = params(1.3, 2.0, 0.0);
        let lat = init_lattice(8, &p, 1).unwrap();
        let nd = natural_decomposition(&lat, &p).unwrap();
        assert_eq!(nd.c[0], p.mu / p.sigma_sq);
        assert_eq!(nd.c[1], -0.5 / p.sigma_sq);
        assert_eq!(&nd.c[2..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn decomposition_of_zero_lattice_has_zero_statistics() {
        let lat = Lattice::from_values(5, vec![0.0; 25], NeighborhoodSpec::second_order()).unwrap();
        let p = params(0.0, 1.0, 0.2);
        let nd = natural_decomposition(&lat, &p).unwrap();
        assert_eq!(nd.t, [0.0; 5]);
    }

    #[test]
    fn exponential_family_identity_on_random_lattices() {
        // <c, t> + d must reproduce the pseudo-log-likelihood; validates the
        // expansion including the beta(1 - beta*delta) cross terms.
        for seed in 0..20u64 {
            let p = params(
                0.5 - (seed as f64) * 0.03,
                0.6 + (seed as f64) * 0.11,
                (seed as f64) * 0.013,
            );
            let lat = init_lattice(8, &p, 100 + seed).unwrap();
            let nd = natural_decomposition(&lat, &p).unwrap();
            let pll = pseudo_log_likelihood(&lat, &p).unwrap();
            let rel = (nd.log_likelihood() - pll).abs() / pll.abs().max(1.0);
            assert!(rel < 1e-8, "seed {seed}: rel {rel}");
        }
    }

    #[test]
    fn pll_of_zero_lattice() {
        let lat = Lattice::from_values(5, vec![0.0; 25], NeighborhoodSpec::second_order()).unwrap();
        let p = params(0.0, 1.0, 0.0);
        let pll = pseudo_log_likelihood(&lat, &p).unwrap();
        assert!((pll + 25.0 * HALF_LOG_2PI).abs() < 1e-12);
    }

    #[test]
    fn pll_is_maximized_at_sample_mean_when_beta_zero() {
        let p = params(0.0, 1.0, 0.0);
        let lat = init_lattice(8, &p, 3).unwrap();
        let mu_hat = lat.mean();
        let at = |mu: f64| {
            pseudo_log_likelihood(&lat, &ModelParams::new(mu, 1.0, 0.0).unwrap()).unwrap()
        };
        assert!(at(mu_hat) > at(mu_hat + 0.05));
        assert!(at(mu_hat) > at(mu_hat - 0.05));
    }

    #[test]
    fn pll_matches_sum_of_local_logdensities() {
        let p = params(0.2, 1.4, 0.09);
        let lat = init_lattice(6, &p, 8).unwrap();
        let mut total = 0.0;
        for r in 0..6 {
            for c in 0..6 {
                let nb: Vec<f64> = neighbors(&lat, r, c)
                    .into_iter()
                    .map(|(nr, nc)| lat.get(nr, nc))
                    .collect();
                total += local_conditional_logdensity(lat.get(r, c), &nb, &p).unwrap();
            }
        }
        let pll = pseudo_log_likelihood(&lat, &p).unwrap();
        assert!((total - pll).abs() < 1e-9 * total.abs());
    }
}
