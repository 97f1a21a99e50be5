//! 2D toroidal lattice, neighborhood systems and model parameters.
//!
//! Boundaries are periodic so every site has exactly `delta` neighbors, which
//! is what the closed-form expressions for the fundamental forms assume.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::ModelError;

/// Model parameter vector theta = (mu, sigma_sq, beta).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ModelParams {
    /// Field mean.
    pub mu: f64,
    /// Field variance (same units as site values squared).
    pub sigma_sq: f64,
    /// Inverse temperature; beta = 0 degenerates to independent Gaussians.
    pub beta: f64,
}

impl ModelParams {
    /// Validating constructor: requires `sigma_sq > 0` and `beta >= 0`.
    pub fn new(mu: f64, sigma_sq: f64, beta: f64) -> Result<Self, ModelError> {
        let p = Self { mu, sigma_sq, beta };
        p.validate()?;
        Ok(p)
    }

    /// Checks the invariants without constructing.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.mu.is_finite() {
            return Err(ModelError::NonFiniteInput("mu"));
        }
        if !(self.sigma_sq > 0.0) || !self.sigma_sq.is_finite() {
            return Err(ModelError::NonPositiveVariance(self.sigma_sq));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(ModelError::InvalidBeta(self.beta));
        }
        Ok(())
    }
}

// Relative window offsets in row-major scan order, center excluded.
const OFFSETS_1: [(i64, i64); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
const OFFSETS_2: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];
const OFFSETS_3: [(i64, i64); 12] = [
    (-2, 0),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -2),
    (0, -1),
    (0, 1),
    (0, 2),
    (1, -1),
    (1, 0),
    (1, 1),
    (2, 0),
];

/// Neighborhood system: order 1, 2 or 3 with delta = 4, 8 or 12 neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct NeighborhoodSpec {
    order: u8,
    delta: usize,
}

impl NeighborhoodSpec {
    /// Builds the spec for the given order; delta is determined by the order.
    pub fn of_order(order: u8) -> Result<Self, ModelError> {
        let delta = match order {
            1 => 4,
            2 => 8,
            3 => 12,
            other => return Err(ModelError::InvalidOrder(other)),
        };
        Ok(Self { order, delta })
    }

    /// Second-order system (the 8 nearest neighbors), the paper's setting.
    pub fn second_order() -> Self {
        Self { order: 2, delta: 8 }
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// Number of neighbors of every site.
    pub fn delta(&self) -> usize {
        self.delta
    }

    /// Window offsets in row-major scan order, center excluded.
    pub fn offsets(&self) -> &'static [(i64, i64)] {
        match self.order {
            1 => &OFFSETS_1,
            2 => &OFFSETS_2,
            _ => &OFFSETS_3,
        }
    }
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        Self::second_order()
    }
}

/// n x n grid of real-valued sites with periodic boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    side: usize,
    values: Vec<f64>,
    neighborhood: NeighborhoodSpec,
}

impl Lattice {
    /// Builds a lattice from row-major values. Requires `side >= 5`.
    pub fn from_values(
        side: usize,
        values: Vec<f64>,
        neighborhood: NeighborhoodSpec,
    ) -> Result<Self, ModelError> {
        if side < 5 {
            return Err(ModelError::SideTooSmall(side));
        }
        if values.len() != side * side {
            return Err(ModelError::SizeMismatch {
                expected: side * side,
                got: values.len(),
            });
        }
        Ok(Self {
            side,
            values,
            neighborhood,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Total number of sites, n = side^2.
    pub fn num_sites(&self) -> usize {
        self.side * self.side
    }

    pub fn neighborhood(&self) -> NeighborhoodSpec {
        self.neighborhood
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.side + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.side + col] = value;
    }

    /// Wraps a (possibly negative) coordinate onto the torus.
    #[inline]
    pub fn wrap(&self, coord: i64) -> usize {
        coord.rem_euclid(self.side as i64) as usize
    }

    #[inline]
    pub(crate) fn get_wrapped(&self, row: i64, col: i64) -> f64 {
        let r = self.wrap(row);
        let c = self.wrap(col);
        self.values[r * self.side + c]
    }

    /// Sum of the neighbor values of site (row, col).
    #[inline]
    pub fn neighbor_sum(&self, row: usize, col: usize) -> f64 {
        let mut s = 0.0;
        for &(dr, dc) in self.neighborhood.offsets() {
            s += self.get_wrapped(row as i64 + dr, col as i64 + dc);
        }
        s
    }

    /// Sample mean over all sites.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.num_sites() as f64
    }

    /// Biased (1/n^2) sample variance over all sites.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.num_sites() as f64
    }
}

/// Neighbor coordinates of (row, col) in fixed row-major window order.
///
/// Toroidal wrapping; the center site is never included, so the result always
/// has exactly `delta` entries.
pub fn neighbors(lattice: &Lattice, row: usize, col: usize) -> Vec<(usize, usize)> {
    assert!(
        row < lattice.side() && col < lattice.side(),
        "site ({row}, {col}) out of bounds for side {}",
        lattice.side()
    );
    lattice
        .neighborhood()
        .offsets()
        .iter()
        .map(|&(dr, dc)| {
            (
                lattice.wrap(row as i64 + dr),
                lattice.wrap(col as i64 + dc),
            )
        })
        .collect()
}

/// Fills a lattice with i.i.d. N(mu, sigma_sq) sites; deterministic given seed.
pub fn init_lattice(side: usize, params: &ModelParams, seed: u64) -> Result<Lattice, ModelError> {
    if side < 5 {
        return Err(ModelError::SideTooSmall(side));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(params.mu, params.sigma_sq.sqrt())
        .map_err(|_| ModelError::NonPositiveVariance(params.sigma_sq))?;
    let values = (0..side * side).map(|_| normal.sample(&mut rng)).collect();
    Lattice::from_values(side, values, NeighborhoodSpec::second_order())
}
