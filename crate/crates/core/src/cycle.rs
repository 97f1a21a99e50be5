//! The inverse-temperature cycle: beta climbs from 0 to beta_max in
//! half_cycle_steps increments of delta_beta, then returns to 0, with MCMC
//! sweeps and a full geometry snapshot at every iteration.
//!
//! By default the field parameters are re-estimated every iteration and fed
//! back into the sampler. That dynamics is simulated on a standardized
//! lattice (the sweep at theta = (mu_hat, sigma_hat^2, beta) is affinely
//! equivalent to a sweep at (0, 1, beta) on the standardized field), with the
//! accumulated scale tracked as log sigma_hat^2 so the run stays finite even
//! deep in the supercritical regime where the raw variance overflows f64.
//! Curvatures are invariant under that rescaling; the recorded absolute-unit
//! form components may underflow to zero once the scale is astronomical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CycleError, ModelError};
use crate::geometry::{
    curvatures_from_forms, entropy, first_form_nested, first_form_tensorial, second_form_nested,
    second_form_tensorial, FormComponents, FundamentalForms,
};
use crate::lattice::{init_lattice, Lattice, ModelParams};
use crate::patch::patch_covariance;
use crate::sampler::{estimate_params, metropolis_sweep, SamplerConfig};

/// Half of the cycle a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Heating,
    Cooling,
}

/// Parameter-estimation schedule along the cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateSchedule {
    /// Re-estimate mu and sigma^2 every iteration and feed the estimates back
    /// into the sampler (default).
    EveryIteration,
    /// Estimate once from the initial field and keep the sampler parameters
    /// fixed. The raw field is evolved directly; deep in the supercritical
    /// regime its variance can exceed f64 range.
    Once,
}

/// Full-cycle configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CycleConfig {
    pub side: usize,
    pub delta_beta: f64,
    pub half_cycle_steps: usize,
    /// Must equal delta_beta * half_cycle_steps.
    pub beta_max: f64,
    pub sweeps_per_step: usize,
    pub seed: u64,
    pub sampler: SamplerConfig,
    /// Ridge scale: the shape operator uses ridge * ||I||_F when the first
    /// form is numerically singular; 0 disables ridging.
    pub ridge: f64,
    pub estimate_schedule: EstimateSchedule,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            side: 512,
            delta_beta: 0.0006,
            half_cycle_steps: 500,
            beta_max: 0.3,
            sweeps_per_step: 1,
            seed: 0,
            sampler: SamplerConfig::default(),
            ridge: 1e-9,
            estimate_schedule: EstimateSchedule::EveryIteration,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<(), CycleError> {
        if self.side < 5 {
            return Err(CycleError::InvalidConfig(format!(
                "side must be at least 5, got {}",
                self.side
            )));
        }
        if !(self.delta_beta > 0.0) || !self.delta_beta.is_finite() {
            return Err(CycleError::InvalidConfig(format!(
                "delta_beta must be positive, got {}",
                self.delta_beta
            )));
        }
        if self.half_cycle_steps == 0 {
            return Err(CycleError::InvalidConfig(
                "half_cycle_steps must be at least 1".into(),
            ));
        }
        let expected = self.delta_beta * self.half_cycle_steps as f64;
        if (self.beta_max - expected).abs() > 1e-12 * expected.max(1.0) {
            return Err(CycleError::InvalidConfig(format!(
                "beta_max {} != delta_beta * half_cycle_steps = {expected}",
                self.beta_max
            )));
        }
        if self.sweeps_per_step == 0 {
            return Err(CycleError::InvalidConfig(
                "sweeps_per_step must be at least 1".into(),
            ));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(CycleError::InvalidConfig(format!(
                "ridge must be non-negative, got {}",
                self.ridge
            )));
        }
        self.sampler.validate().map_err(CycleError::Model)?;
        Ok(())
    }

    /// Total number of iterations (records) in a full cycle.
    pub fn total_steps(&self) -> usize {
        2 * self.half_cycle_steps
    }

    /// Beta at which iteration k runs: k * delta_beta while heating,
    /// (2H - k) * delta_beta while cooling; peaks at beta_max at k = H.
    pub fn beta_at(&self, iteration: usize) -> f64 {
        let h = self.half_cycle_steps;
        let steps = if iteration < h {
            iteration
        } else {
            2 * h - iteration
        };
        steps as f64 * self.delta_beta
    }

    pub fn phase_at(&self, iteration: usize) -> Phase {
        if iteration < self.half_cycle_steps {
            Phase::Heating
        } else {
            Phase::Cooling
        }
    }
}

/// Per-iteration time-series row.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CycleRecord {
    pub iteration: usize,
    pub beta: f64,
    pub entropy: f64,
    pub components: FormComponents,
    pub gaussian_k: f64,
    pub mean_h: f64,
    pub principal: [f64; 3],
    pub phase: Phase,
}

/// A sign flip of the Gaussian curvature between consecutive records.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SignChangeEvent {
    pub iteration: usize,
    pub beta: f64,
    pub direction: SignDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignDirection {
    NegativeToPositive,
    PositiveToNegative,
}

fn frobenius3(m: &nalgebra::Matrix3<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct GeometrySnapshot {
    components: FormComponents,
    gaussian_k: f64,
    mean_h: f64,
    principal: [f64; 3],
    entropy: f64,
}

/// Forms, curvatures and entropy at the given covariance/params, with the
/// configured ridge policy. Both algebraic routes are evaluated; the nested
/// route is the recorded one (they agree to 1e-10).
fn geometry_at(
    cov: &crate::patch::PatchCovariance,
    params: &ModelParams,
    ridge_scale: f64,
) -> Result<(FundamentalForms, GeometrySnapshot), CycleError> {
    let first = first_form_tensorial(cov, params)?;
    let second = second_form_tensorial(cov, params)?;
    debug_assert!({
        let fn_ = first_form_nested(cov, params)?;
        let sn = second_form_nested(cov, params)?;
        (first - fn_).iter().all(|v| v.abs() < 1e-8)
            && (second - sn).iter().all(|v| v.abs() < 1e-8)
    });
    let ridge = ridge_scale * frobenius3(&first);
    let report = curvatures_from_forms(&first, &second, ridge)?;
    let ent = entropy(cov, params)?;
    let forms = FundamentalForms { first, second };
    let components = forms.components();
    Ok((
        forms,
        GeometrySnapshot {
            components,
            gaussian_k: report.gaussian_k,
            mean_h: report.mean_h,
            principal: report.principal,
            entropy: ent,
        },
    ))
}

/// Subtract the mean and divide by the standard deviation in place.
fn standardize(lattice: &mut Lattice, mean: f64, std: f64) {
    for v in lattice.values_mut() {
        *v = (*v - mean) / std;
    }
}

/// Runs a full cycle and returns one record per iteration
/// (2 * half_cycle_steps records). Deterministic given the seed.
pub fn run_cycle(config: &CycleConfig) -> Result<Vec<CycleRecord>, CycleError> {
    config.validate()?;
    let initial = ModelParams::new(0.0, 1.0, 0.0).expect("valid initial params");
    let mut lattice = init_lattice(config.side, &initial, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let mut records = Vec::with_capacity(config.total_steps());

    match config.estimate_schedule {
        EstimateSchedule::EveryIteration => {
            let m0 = lattice.mean();
            let v0 = lattice.variance();
            if !(v0 > 0.0) {
                return Err(CycleError::Model(ModelError::NonPositiveVariance(v0)));
            }
            let mut log_sigma_sq = v0.ln();
            standardize(&mut lattice, m0, v0.sqrt());

            for k in 0..config.total_steps() {
                let beta = config.beta_at(k);
                let sweep_params = ModelParams {
                    mu: 0.0,
                    sigma_sq: 1.0,
                    beta,
                };
                for _ in 0..config.sweeps_per_step {
                    metropolis_sweep(&mut lattice, &sweep_params, &config.sampler, &mut rng)?;
                }
                let m = lattice.mean();
                let v = lattice.variance();
                if !(v > 0.0) {
                    return Err(CycleError::Model(ModelError::NonPositiveVariance(v)));
                }
                log_sigma_sq += v.ln();
                standardize(&mut lattice, m, v.sqrt());

                let cov = patch_covariance(&lattice)?;
                let params = ModelParams {
                    mu: 0.0,
                    sigma_sq: cov.sigma_sq_center,
                    beta,
                };
                let (_, std_geo) = geometry_at(&cov, &params, config.ridge)?;
                // Absolute-unit components: A, L, F, Q carry 1/sigma^2, E and
                // P carry 1/sigma^4; I and T are scale-free. exp() underflow
                // to zero is accepted once the accumulated scale is huge.
                let inv1 = (-log_sigma_sq).exp();
                let inv2 = (-2.0 * log_sigma_sq).exp();
                let c = std_geo.components;
                records.push(CycleRecord {
                    iteration: k,
                    beta,
                    entropy: std_geo.entropy + 0.5 * log_sigma_sq,
                    components: FormComponents {
                        a: c.a * inv1,
                        e: c.e * inv2,
                        f: c.f * inv1,
                        i: c.i,
                        l: c.l * inv1,
                        p: c.p * inv2,
                        q: c.q * inv1,
                        t: c.t,
                    },
                    gaussian_k: std_geo.gaussian_k,
                    mean_h: std_geo.mean_h,
                    principal: std_geo.principal,
                    phase: config.phase_at(k),
                });
            }
        }
        EstimateSchedule::Once => {
            let base = estimate_params(&lattice, 0.0);
            for k in 0..config.total_steps() {
                let beta = config.beta_at(k);
                let params = ModelParams {
                    mu: base.mu,
                    sigma_sq: base.sigma_sq,
                    beta,
                };
                for _ in 0..config.sweeps_per_step {
                    metropolis_sweep(&mut lattice, &params, &config.sampler, &mut rng)?;
                }
                let cov = patch_covariance(&lattice)?;
                let (_, geo) = geometry_at(&cov, &params, config.ridge)?;
                records.push(CycleRecord {
                    iteration: k,
                    beta,
                    entropy: geo.entropy,
                    components: geo.components,
                    gaussian_k: geo.gaussian_k,
                    mean_h: geo.mean_h,
                    principal: geo.principal,
                    phase: config.phase_at(k),
                });
            }
        }
    }
    Ok(records)
}

/// One event per consecutive pair with opposite-signed Gaussian curvature;
/// zero (or non-finite) K carries no sign and attaches to the next signed
/// pair.
pub fn detect_sign_changes(records: &[CycleRecord]) -> Vec<SignChangeEvent> {
    let mut events = Vec::new();
    let mut last_sign: Option<bool> = None;
    for rec in records {
        let k = rec.gaussian_k;
        if !k.is_finite() || k == 0.0 {
            continue;
        }
        let positive = k > 0.0;
        if let Some(prev) = last_sign {
            if prev != positive {
                events.push(SignChangeEvent {
                    iteration: rec.iteration,
                    beta: rec.beta,
                    direction: if positive {
                        SignDirection::NegativeToPositive
                    } else {
                        SignDirection::PositiveToNegative
                    },
                });
            }
        }
        last_sign = Some(positive);
    }
    events
}

/// Which curvature spans the x-axis of a hysteresis loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HysteresisQuantity {
    GaussianK,
    MeanH,
}

/// Heating and cooling polylines in the (curvature, entropy) plane plus the
/// signed area enclosed by the full loop.
#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisPath {
    pub heating: Vec<(f64, f64)>,
    pub cooling: Vec<(f64, f64)>,
    pub enclosed_area: f64,
}

/// Splits a full cycle into its heating/cooling branches in the (curvature,
/// entropy) plane; the enclosed area is the shoelace sum over the closed,
/// concatenated loop.
pub fn hysteresis_path(records: &[CycleRecord], quantity: HysteresisQuantity) -> HysteresisPath {
    let point = |r: &CycleRecord| {
        let x = match quantity {
            HysteresisQuantity::GaussianK => r.gaussian_k,
            HysteresisQuantity::MeanH => r.mean_h,
        };
        (x, r.entropy)
    };
    let heating: Vec<_> = records
        .iter()
        .filter(|r| r.phase == Phase::Heating)
        .map(point)
        .collect();
    let cooling: Vec<_> = records
        .iter()
        .filter(|r| r.phase == Phase::Cooling)
        .map(point)
        .collect();
    let loop_points: Vec<_> = heating.iter().chain(cooling.iter()).copied().collect();
    let mut area = 0.0;
    let n = loop_points.len();
    for i in 0..n {
        let (x0, y0) = loop_points[i];
        let (x1, y1) = loop_points[(i + 1) % n];
        area += x0 * y1 - x1 * y0;
    }
    HysteresisPath {
        heating,
        cooling,
        enclosed_area: 0.5 * area,
    }
}
