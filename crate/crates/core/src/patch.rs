//! 3x3 patch statistics: the 9x9 sample covariance Sigma_p and its
//! decomposition into the center-to-neighbor vector rho and the
//! neighbor-to-neighbor block Sigma_p^-, plus the plus-norm / Kronecker-sum
//! primitives used by the tensorial forms.

use nalgebra::{SMatrix, SVector};

use crate::error::ModelError;
use crate::lattice::Lattice;
use crate::parallel::run_sharded;

/// Patch window positions in row-major order; index 4 is the center.
const CENTER: usize = 4;
/// Patch indices of the 8 neighbors, in window order.
const NEIGHBOR_IDX: [usize; 8] = [0, 1, 2, 3, 5, 6, 7, 8];

/// 9x9 patch covariance with its rho / Sigma_p^- decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchCovariance {
    /// Full 9x9 symmetric sample covariance of the patch vectors.
    pub sigma_p: SMatrix<f64, 9, 9>,
    /// Covariances between the center site and each of its 8 neighbors
    /// (central row of sigma_p with the diagonal entry removed).
    pub rho: SVector<f64, 8>,
    /// Covariances among the 8 neighbors (sigma_p with the central row and
    /// column removed).
    pub sigma_minus: SMatrix<f64, 8, 8>,
    /// Variance of the center site (central diagonal entry).
    pub sigma_sq_center: f64,
}

impl PatchCovariance {
    /// Decomposes a full 9x9 covariance matrix.
    pub fn from_matrix(sigma_p: SMatrix<f64, 9, 9>) -> Self {
        let mut rho = SVector::<f64, 8>::zeros();
        let mut sigma_minus = SMatrix::<f64, 8, 8>::zeros();
        for (a, &ia) in NEIGHBOR_IDX.iter().enumerate() {
            rho[a] = sigma_p[(CENTER, ia)];
            for (b, &ib) in NEIGHBOR_IDX.iter().enumerate() {
                sigma_minus[(a, b)] = sigma_p[(ia, ib)];
            }
        }
        Self {
            sigma_p,
            rho,
            sigma_minus,
            sigma_sq_center: sigma_p[(CENTER, CENTER)],
        }
    }

    /// Sum of the center-to-neighbor covariances, ||rho||_+.
    pub fn rho_plus_norm(&self) -> f64 {
        plus_norm(self.rho.iter())
    }

    /// Sum of the neighbor-to-neighbor covariances, ||Sigma_p^-||_+.
    pub fn sigma_minus_plus_norm(&self) -> f64 {
        plus_norm(self.sigma_minus.iter())
    }

    /// True when every entry is exactly zero (constant lattice).
    pub fn is_degenerate(&self) -> bool {
        self.sigma_p.iter().all(|&v| v == 0.0)
    }
}

/// Sum of all entries (not absolute values).
pub fn plus_norm<'a, I>(entries: I) -> f64
where
    I: IntoIterator<Item = &'a f64>,
{
    entries.into_iter().sum()
}

/// ||a (x) b||_+ computed as ||a||_+ * ||b||_+ without materializing the
/// Kronecker product.
pub fn kron_plus_norm<'a, 'b, A, B>(a: A, b: B) -> f64
where
    A: IntoIterator<Item = &'a f64>,
    B: IntoIterator<Item = &'b f64>,
{
    plus_norm(a) * plus_norm(b)
}

/// Row-major flattening of the 3x3 window centered at (row, col), with
/// toroidal wrap. Element 4 is the center site.
///
/// Defined for second-order neighborhoods only; the tensorial machinery
/// assumes delta = 8.
pub fn patch_vectorize(lattice: &Lattice, row: usize, col: usize) -> Result<[f64; 9], ModelError> {
    let order = lattice.neighborhood().order();
    if order != 2 {
        return Err(ModelError::RequiresSecondOrder(order));
    }
    let mut out = [0.0; 9];
    let mut k = 0;
    for dr in -1..=1i64 {
        for dc in -1..=1i64 {
            out[k] = lattice.get_wrapped(row as i64 + dr, col as i64 + dc);
            k += 1;
        }
    }
    Ok(out)
}

/// Biased (1/n^2) sample covariance of all n^2 patch vectors.
///
/// Every site is a patch center thanks to the periodic boundaries. A constant
/// lattice yields the zero matrix (flagged via `is_degenerate`). The reduction
/// runs over fixed row shards combined in row order, so the result does not
/// depend on the worker-thread count.
pub fn patch_covariance(lattice: &Lattice) -> Result<PatchCovariance, ModelError> {
    let order = lattice.neighborhood().order();
    if order != 2 {
        return Err(ModelError::RequiresSecondOrder(order));
    }
    let side = lattice.side();
    let n = lattice.num_sites() as f64;
    // Each patch component ranges over the same multiset of lattice values,
    // so every component mean equals the lattice mean.
    let mean = lattice.mean();

    let partials = run_sharded(side, |row| {
        let mut acc = [[0.0f64; 9]; 9];
        let mut window = [0.0f64; 9];
        for col in 0..side {
            let mut k = 0;
            for dr in -1..=1i64 {
                for dc in -1..=1i64 {
                    window[k] = lattice.get_wrapped(row as i64 + dr, col as i64 + dc) - mean;
                    k += 1;
                }
            }
            for a in 0..9 {
                let wa = window[a];
                for b in a..9 {
                    acc[a][b] += wa * window[b];
                }
            }
        }
        acc
    });

    let mut sums = [[0.0f64; 9]; 9];
    for acc in partials {
        for a in 0..9 {
            for b in a..9 {
                sums[a][b] += acc[a][b];
            }
        }
    }
    let mut sigma_p = SMatrix::<f64, 9, 9>::zeros();
    for a in 0..9 {
        for b in a..9 {
            let v = sums[a][b] / n;
            sigma_p[(a, b)] = v;
            sigma_p[(b, a)] = v;
        }
    }
    Ok(PatchCovariance::from_matrix(sigma_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{init_lattice, ModelParams, NeighborhoodSpec};
    use crate::sampler::{metropolis_sweep, SamplerConfig, SamplerMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lattice_from_fn(side: usize, f: impl Fn(usize, usize) -> f64) -> Lattice {
        let values = (0..side * side)
            .map(|i| f(i / side, i % side))
            .collect();
        Lattice::from_values(side, values, NeighborhoodSpec::second_order()).unwrap()
    }

    #[test]
    fn vectorize_constant() {
        let lat = lattice_from_fn(5, |_, _| 3.25);
        assert_eq!(patch_vectorize(&lat, 2, 3).unwrap(), [3.25; 9]);
    }

    #[test]
    fn vectorize_interior_indices() {
        let lat = lattice_from_fn(5, |r, c| (r * 5 + c) as f64);
        let got = patch_vectorize(&lat, 2, 2).unwrap();
        assert_eq!(got, [6., 7., 8., 11., 12., 13., 16., 17., 18.]);
    }

    #[test]
    fn vectorize_wraps_at_origin() {
        let lat = lattice_from_fn(5, |r, c| (r * 5 + c) as f64);
        let got = patch_vectorize(&lat, 0, 0).unwrap();
        assert_eq!(got[0], lat.get(4, 4));
        assert_eq!(got[4], lat.get(0, 0));
    }

    #[test]
    fn vectorize_rejects_other_orders() {
        let lat = Lattice::from_values(
            5,
            vec![0.0; 25],
            NeighborhoodSpec::of_order(1).unwrap(),
        )
        .unwrap();
        assert_eq!(
            patch_vectorize(&lat, 0, 0).unwrap_err(),
            ModelError::RequiresSecondOrder(1)
        );
        assert!(patch_covariance(&lat).is_err());
    }

    #[test]
    fn plus_norm_examples() {
        let eye3 = nalgebra::Matrix3::<f64>::identity();
        assert_eq!(plus_norm(eye3.iter()), 3.0);
        assert_eq!(plus_norm([1.0, -1.0].iter()), 0.0);
    }

    #[test]
    fn kron_plus_norm_examples() {
        assert_eq!(kron_plus_norm([1.0, 2.0].iter(), [3.0, 4.0].iter()), 21.0);
        let rho = [0.3, -0.1, 0.25, 0.4, 0.0, -0.2, 0.15, 0.05];
        let n = plus_norm(rho.iter());
        assert!((kron_plus_norm(rho.iter(), rho.iter()) - n * n).abs() < 1e-15);
    }

    #[test]
    fn covariance_of_constant_lattice_is_zero() {
        let lat = lattice_from_fn(8, |_, _| 7.0);
        let cov = patch_covariance(&lat).unwrap();
        assert!(cov.is_degenerate());
        assert_eq!(cov.sigma_sq_center, 0.0);
        assert_eq!(cov.rho_plus_norm(), 0.0);
    }

    #[test]
    fn covariance_decomposition_layout() {
        let lat = lattice_from_fn(6, |r, c| ((r * 31 + c * 17) % 11) as f64 * 0.5);
        let cov = patch_covariance(&lat).unwrap();
        // rho is the central row minus the diagonal entry.
        for (a, &ia) in NEIGHBOR_IDX.iter().enumerate() {
            assert_eq!(cov.rho[a], cov.sigma_p[(4, ia)]);
            for (b, &ib) in NEIGHBOR_IDX.iter().enumerate() {
                assert_eq!(cov.sigma_minus[(a, b)], cov.sigma_p[(ia, ib)]);
            }
        }
        assert_eq!(cov.sigma_sq_center, cov.sigma_p[(4, 4)]);
        // Symmetry.
        assert_eq!(cov.sigma_p.transpose(), cov.sigma_p);
        // Entry partition: ||Sigma_p||_+ = ||Sigma_p^-||_+ + 2||rho||_+ + var_center.
        let lhs = plus_norm(cov.sigma_p.iter());
        let rhs = cov.sigma_minus_plus_norm() + 2.0 * cov.rho_plus_norm() + cov.sigma_sq_center;
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn iid_lattice_has_vanishing_cross_covariances() {
        let p = ModelParams::new(0.0, 1.0, 0.0).unwrap();
        let lat = init_lattice(512, &p, 3).unwrap();
        let cov = patch_covariance(&lat).unwrap();
        let bound = 3.0 / 512.0; // 3 / sqrt(n^2) * sigma^2
        for a in 0..9 {
            for b in 0..9 {
                if a != b {
                    assert!(
                        cov.sigma_p[(a, b)].abs() <= bound,
                        "off-diagonal ({a},{b}) = {}",
                        cov.sigma_p[(a, b)]
                    );
                }
            }
        }
    }

    #[test]
    fn coupled_field_has_positive_rho() {
        let p = ModelParams::new(0.0, 1.0, 0.2).unwrap();
        let mut lat = init_lattice(64, &p, 9).unwrap();
        let config = SamplerConfig {
            mode: SamplerMode::Gibbs,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            metropolis_sweep(&mut lat, &p, &config, &mut rng).unwrap();
        }
        let cov = patch_covariance(&lat).unwrap();
        for a in 0..8 {
            assert!(cov.rho[a] > 0.0, "rho[{a}] = {}", cov.rho[a]);
        }
    }

    #[test]
    fn covariance_is_translation_invariant() {
        let p = ModelParams::new(1.0, 2.0, 0.0).unwrap();
        let lat = init_lattice(32, &p, 5).unwrap();
        let cov = patch_covariance(&lat).unwrap();
        // Shift the torus by (3, 7); the pooled covariance must not change
        // beyond floating-point reduction order.
        let side = lat.side();
        let shifted = lattice_from_fn(side, |r, c| lat.get((r + 3) % side, (c + 7) % side));
        let cov2 = patch_covariance(&shifted).unwrap();
        let max_diff = (cov.sigma_p - cov2.sigma_p)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_diff < 1e-10, "max diff {max_diff}");
    }
}
