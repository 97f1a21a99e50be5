//! Closed-form first and second fundamental forms of the (mu, sigma^2, beta)
//! parametric space, the shape operator, Gaussian/mean/principal curvatures,
//! and entropy.
//!
//! Every component is available through two algebraic routes that must agree:
//! explicit nested sums over neighbor indices using sigma_ij from `rho` and
//! sigma_jk from `sigma_minus`, and the factorized tensorial route built on
//! plus-norms and Kronecker-sum identities. Matrix rows and columns are
//! ordered (mu, sigma^2, beta); the (mu, sigma^2) and (mu, beta) cross entries
//! vanish identically for this model.

use nalgebra::{Matrix3, SMatrix};

use crate::error::GeometryError;
use crate::lattice::ModelParams;
use crate::patch::{kron_plus_norm, PatchCovariance};

/// Neighbor count of the second-order system the patch machinery assumes.
const DELTA: f64 = 8.0;

/// First (I) and second (II) fundamental forms as 3x3 symmetric matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalForms {
    pub first: Matrix3<f64>,
    pub second: Matrix3<f64>,
}

impl FundamentalForms {
    pub fn components(&self) -> FormComponents {
        FormComponents {
            a: self.first[(0, 0)],
            e: self.first[(1, 1)],
            f: self.first[(1, 2)],
            i: self.first[(2, 2)],
            l: self.second[(0, 0)],
            p: self.second[(1, 1)],
            q: self.second[(1, 2)],
            t: self.second[(2, 2)],
        }
    }
}

/// The eight non-zero scalars of the two forms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FormComponents {
    pub a: f64,
    pub e: f64,
    pub f: f64,
    pub i: f64,
    pub l: f64,
    pub p: f64,
    pub q: f64,
    pub t: f64,
}

/// Gaussian, mean and principal curvatures of the shape operator.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    /// det of the shape operator.
    pub gaussian_k: f64,
    /// trace of the shape operator.
    pub mean_h: f64,
    /// Eigenvalues of the shape operator, sorted descending.
    pub principal: [f64; 3],
    pub shape_operator: Matrix3<f64>,
}

fn check_sigma(params: &ModelParams) -> Result<(), GeometryError> {
    if !(params.sigma_sq > 0.0) || !params.sigma_sq.is_finite() {
        return Err(GeometryError::NonPositiveVariance(params.sigma_sq));
    }
    Ok(())
}

fn place_first(a: f64, e: f64, f: f64, i: f64) -> Matrix3<f64> {
    // B = C = 0: the mu row couples to nothing else.
    Matrix3::new(a, 0.0, 0.0, 0.0, e, f, 0.0, f, i)
}

/// First fundamental form by explicit nested summation over neighbor indices.
pub fn first_form_nested(
    cov: &PatchCovariance,
    params: &ModelParams,
) -> Result<Matrix3<f64>, GeometryError> {
    check_sigma(params)?;
    let (s2, beta) = (params.sigma_sq, params.beta);
    let (s4, s6, s8) = (s2 * s2, s2 * s2 * s2, s2 * s2 * s2 * s2);
    let rho = &cov.rho;
    let sm = &cov.sigma_minus;
    let one = 1.0 - beta * DELTA;

    let mut sum_rho = 0.0;
    for j in 0..8 {
        sum_rho += rho[j];
    }
    let mut sum_sm = 0.0;
    for j in 0..8 {
        for k in 0..8 {
            sum_sm += sm[(j, k)];
        }
    }
    // sum_{j,k} sigma_ij sigma_ik
    let mut sum_rho_rho = 0.0;
    for j in 0..8 {
        for k in 0..8 {
            sum_rho_rho += rho[j] * rho[k];
        }
    }
    // sum_{j,k,l} (sigma_ij sigma_kl + sigma_ik sigma_jl + sigma_il sigma_jk)
    let mut sum_rho_sm3 = 0.0;
    for j in 0..8 {
        for k in 0..8 {
            for l in 0..8 {
                sum_rho_sm3 += rho[j] * sm[(k, l)] + rho[k] * sm[(j, l)] + rho[l] * sm[(j, k)];
            }
        }
    }
    // sum_{j,k,l,m} (sigma_jk sigma_lm + sigma_jl sigma_km + sigma_jm sigma_kl)
    let mut sum_sm_sm3 = 0.0;
    for j in 0..8 {
        for k in 0..8 {
            for l in 0..8 {
                for m in 0..8 {
                    sum_sm_sm3 +=
                        sm[(j, k)] * sm[(l, m)] + sm[(j, l)] * sm[(k, m)] + sm[(j, m)] * sm[(k, l)];
                }
            }
        }
    }

    let b2 = beta * beta;
    let b3 = b2 * beta;
    let b4 = b2 * b2;

    let a = one * one / s2 * (1.0 - (2.0 * beta * sum_rho - b2 * sum_sm) / s2);
    let e = 1.0 / (2.0 * s4) - (2.0 * beta * sum_rho - b2 * sum_sm) / s6
        + (3.0 * b2 * sum_rho_rho - b3 * sum_rho_sm3 + (b4 / 4.0) * sum_sm_sm3) / s8;
    let f = (sum_rho - beta * sum_sm) / s4
        - (6.0 * beta * sum_rho_rho - 3.0 * b2 * sum_rho_sm3 + b3 * sum_sm_sm3) / (2.0 * s6);
    let i = sum_sm / s2 + (2.0 * sum_rho_rho - 2.0 * beta * sum_rho_sm3 + b2 * sum_sm_sm3) / s4;
    Ok(place_first(a, e, f, i))
}

/// First fundamental form through the factorized Kronecker-sum route.
pub fn first_form_tensorial(
    cov: &PatchCovariance,
    params: &ModelParams,
) -> Result<Matrix3<f64>, GeometryError> {
    check_sigma(params)?;
    let (s2, beta) = (params.sigma_sq, params.beta);
    let (s4, s6, s8) = (s2 * s2, s2 * s2 * s2, s2 * s2 * s2 * s2);
    let one = 1.0 - beta * DELTA;
    let rho_n = cov.rho_plus_norm();
    let sm_n = cov.sigma_minus_plus_norm();
    let rho_rho = kron_plus_norm(cov.rho.iter(), cov.rho.iter());
    let rho_sm = kron_plus_norm(cov.rho.iter(), cov.sigma_minus.iter());
    let sm_sm = kron_plus_norm(cov.sigma_minus.iter(), cov.sigma_minus.iter());

    let b2 = beta * beta;
    let b3 = b2 * beta;
    let b4 = b2 * b2;

    let a = one * one / s2 * (1.0 - (2.0 * beta * rho_n - b2 * sm_n) / s2);
    let e = 1.0 / (2.0 * s4) - (2.0 * beta * rho_n - b2 * sm_n) / s6
        + (3.0 * b2 * rho_rho - 3.0 * b3 * rho_sm + 0.75 * b4 * sm_sm) / s8;
    let f = (rho_n - beta * sm_n) / s4
        - (6.0 * beta * rho_rho - 9.0 * b2 * rho_sm + 3.0 * b3 * sm_sm) / (2.0 * s6);
    let i = sm_n / s2 + (2.0 * rho_rho - 6.0 * beta * rho_sm + 3.0 * b2 * sm_sm) / s4;
    Ok(place_first(a, e, f, i))
}

fn second_from_sums(params: &ModelParams, sum_rho: f64, sum_sm: f64) -> Matrix3<f64> {
    let (s2, beta) = (params.sigma_sq, params.beta);
    let (s4, s6) = (s2 * s2, s2 * s2 * s2);
    let one = 1.0 - beta * DELTA;
    let l = one * one / s2;
    let p = 1.0 / (2.0 * s4) - (2.0 * beta * sum_rho - beta * beta * sum_sm) / s6;
    let q = (sum_rho - beta * sum_sm) / s4;
    let t = sum_sm / s2;
    // M = N = 0.
    Matrix3::new(l, 0.0, 0.0, 0.0, p, q, 0.0, q, t)
}

/// Second fundamental form by explicit nested summation.
pub fn second_form_nested(
    cov: &PatchCovariance,
    params: &ModelParams,
) -> Result<Matrix3<f64>, GeometryError> {
    check_sigma(params)?;
    let mut sum_rho = 0.0;
    for j in 0..8 {
        sum_rho += cov.rho[j];
    }
    let mut sum_sm = 0.0;
    for j in 0..8 {
        for k in 0..8 {
            sum_sm += cov.sigma_minus[(j, k)];
        }
    }
    Ok(second_from_sums(params, sum_rho, sum_sm))
}

/// Second fundamental form through the plus-norm route.
pub fn second_form_tensorial(
    cov: &PatchCovariance,
    params: &ModelParams,
) -> Result<Matrix3<f64>, GeometryError> {
    check_sigma(params)?;
    Ok(second_from_sums(
        params,
        cov.rho_plus_norm(),
        cov.sigma_minus_plus_norm(),
    ))
}

/// Second fundamental form (tensorial route).
pub fn second_form(
    cov: &PatchCovariance,
    params: &ModelParams,
) -> Result<Matrix3<f64>, GeometryError> {
    second_form_tensorial(cov, params)
}

/// Both forms through the tensorial route.
pub fn fundamental_forms(
    cov: &PatchCovariance,
    params: &ModelParams,
) -> Result<FundamentalForms, GeometryError> {
    Ok(FundamentalForms {
        first: first_form_tensorial(cov, params)?,
        second: second_form_tensorial(cov, params)?,
    })
}

fn frobenius(m: &Matrix3<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Ridge used by the cycle when the first form degenerates: 1e-9 * ||I||_F.
pub fn default_ridge(first: &Matrix3<f64>) -> f64 {
    1e-9 * frobenius(first)
}

/// det below 1e-12 relative to the matrix scale counts as singular.
fn is_singular(first: &Matrix3<f64>) -> bool {
    let scale = frobenius(first);
    first.determinant().abs() <= 1e-12 * scale * scale * scale
}

fn check_ridge(ridge: f64) -> Result<(), GeometryError> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(GeometryError::InvalidRidge(ridge));
    }
    Ok(())
}

/// The (possibly ridged) pair of forms the shape operator is built from.
///
/// The ridge is applied to both matrices and only when the first form is
/// numerically singular, so the information-equality limit II = I maps to
/// exactly -identity (K = -1, H = -3) instead of losing the degenerate
/// direction. A singular first form without a ridge is an error.
fn effective_pair(
    first: &Matrix3<f64>,
    second: &Matrix3<f64>,
    ridge: f64,
) -> Result<(Matrix3<f64>, Matrix3<f64>), GeometryError> {
    check_ridge(ridge)?;
    if !is_singular(first) {
        return Ok((*first, *second));
    }
    if ridge == 0.0 {
        return Err(GeometryError::SingularFirstForm);
    }
    let bump = Matrix3::identity() * ridge;
    Ok((first + bump, second + bump))
}

/// Shape operator P = -(II)(I)^-1, with the ridge policy described on
/// [`effective_pair`].
pub fn shape_operator(
    first: &Matrix3<f64>,
    second: &Matrix3<f64>,
    ridge: f64,
) -> Result<Matrix3<f64>, GeometryError> {
    let (first_eff, second_eff) = effective_pair(first, second, ridge)?;
    let inv = first_eff
        .try_inverse()
        .ok_or(GeometryError::SingularFirstForm)?;
    Ok(-(second_eff * inv))
}

fn sorted_descending(mut v: [f64; 3]) -> [f64; 3] {
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    v
}

/// Curvatures straight from a shape-operator matrix.
///
/// K and H are the determinant and trace; the principal curvatures come from
/// the eigenvalues of the (generally non-symmetric) operator, which must be
/// real up to a 1e-8 residual.
pub fn curvatures(p: &Matrix3<f64>) -> Result<CurvatureReport, GeometryError> {
    let eig = p.complex_eigenvalues();
    let scale = frobenius(p).max(1.0);
    let mut principal = [0.0f64; 3];
    for (k, ev) in eig.iter().enumerate() {
        if ev.im.abs() > 1e-8 * scale {
            return Err(GeometryError::ComplexEigenvalues(ev.im.abs()));
        }
        principal[k] = ev.re;
    }
    Ok(CurvatureReport {
        gaussian_k: p.determinant(),
        mean_h: p.trace(),
        principal: sorted_descending(principal),
        shape_operator: *p,
    })
}

/// Curvatures from the two forms.
///
/// K and H come from the operator; the principal curvatures solve the
/// symmetric generalized problem II v = lambda I v (negated), which keeps
/// them real whenever the first form is positive definite.
pub fn curvatures_from_forms(
    first: &Matrix3<f64>,
    second: &Matrix3<f64>,
    ridge: f64,
) -> Result<CurvatureReport, GeometryError> {
    let (first_eff, second_eff) = effective_pair(first, second, ridge)?;
    let inv = first_eff
        .try_inverse()
        .ok_or(GeometryError::SingularFirstForm)?;
    let p = -(second_eff * inv);

    if let Some(chol) = nalgebra::Cholesky::new(first_eff) {
        let l = chol.l();
        // B = L^-1 II L^-T is symmetric and similar to II I^-1.
        let x = l
            .solve_lower_triangular(&second_eff)
            .ok_or(GeometryError::SingularFirstForm)?;
        let y = l
            .solve_lower_triangular(&x.transpose())
            .ok_or(GeometryError::SingularFirstForm)?;
        let b = (y.transpose() + y) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(b);
        let lam = eig.eigenvalues;
        Ok(CurvatureReport {
            gaussian_k: p.determinant(),
            mean_h: p.trace(),
            principal: sorted_descending([-lam[0], -lam[1], -lam[2]]),
            shape_operator: p,
        })
    } else {
        // Indefinite first form; fall back to the operator eigenvalues.
        curvatures(&p)
    }
}

/// Entropy of the local conditional model,
/// `H_beta = 1/2 [log(2 pi sigma^2) + 1] - (beta/sigma^2) ||rho||_+
///           + (beta^2 / (2 sigma^2)) ||Sigma_p^-||_+`,
/// which satisfies `H_beta = H_G - beta sigma^2 Q - beta^2 T / 2` against the
/// second-form components.
pub fn entropy(cov: &PatchCovariance, params: &ModelParams) -> Result<f64, GeometryError> {
    check_sigma(params)?;
    let s2 = params.sigma_sq;
    let beta = params.beta;
    let h_g = 0.5 * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0);
    Ok(h_g - beta * cov.rho_plus_norm() / s2
        + beta * beta * cov.sigma_minus_plus_norm() / (2.0 * s2))
}

/// Builds a `PatchCovariance` whose entries are all zero (the degenerate
/// information-equality input).
pub fn zero_patch_covariance() -> PatchCovariance {
    PatchCovariance::from_matrix(SMatrix::<f64, 9, 9>::zeros())
}
