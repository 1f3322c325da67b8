//! Correlated Rayleigh channel generation.
//!
//! User rows are drawn i.i.d. as circularly-symmetric complex Gaussians with
//! spatial covariance Σ = α̃·Re{Y_aa}, scaled so every entry has average
//! power ρ. Draws are a pure function of (seed, realization_index) so Monte
//! Carlo trials can run in parallel without a shared stream.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Parameters of the statistical channel model.
#[derive(Debug, Clone)]
pub struct ChannelModelParams {
    /// Number of single-antenna users M.
    pub n_users: usize,
    /// Spatial covariance Σ (N × N, real PSD, diag = ρ).
    pub covariance: DMatrix<f64>,
    /// Average entry power ρ.
    pub entry_power: f64,
    /// Noise variance σ_n².
    pub noise_variance: f64,
    /// Base seed of the realization stream.
    pub seed: u64,
    /// Cached factor L with Σ = L·Lᵀ.
    factor: DMatrix<f64>,
}

/// Σ = α̃·Re{Y_aa} with α̃ chosen so that diag(Σ) = ρ.
///
/// Requires a constant diagonal (all elements share the self-admittance) and
/// positive semidefiniteness of Re{Y_aa}.
pub fn build_covariance(y_aa: &CMat, rho: f64) -> Result<DMatrix<f64>> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "entry power must be positive, got {rho}"
        )));
    }
    let n = y_aa.nrows();
    let re = y_aa.map(|v| v.re);
    let d0 = re[(0, 0)];
    if !(d0 > 0.0) {
        return Err(Error::InvalidCovariance(
            "Re{Y_aa} diagonal must be positive".into(),
        ));
    }
    for k in 0..n {
        if (re[(k, k)] - d0).abs() > 1e-9 * d0 {
            return Err(Error::InvalidCovariance(
                "Re{Y_aa} diagonal is not constant".into(),
            ));
        }
    }
    let sigma = re * (rho / d0);
    let scale = sigma.norm();
    let min_eig = nalgebra::SymmetricEigen::new(sigma.clone())
        .eigenvalues
        .min();
    if min_eig < -1e-10 * scale {
        return Err(Error::InvalidCovariance(format!(
            "Re{{Y_aa}} has negative eigenvalue {min_eig:.3e}"
        )));
    }
    Ok(sigma)
}

impl ChannelModelParams {
    /// Validates Σ and caches its Cholesky factor; a PSD jitter of
    /// 1e-12·trace is applied once if the factorization fails on the edge of
    /// semidefiniteness.
    pub fn new(
        n_users: usize,
        covariance: DMatrix<f64>,
        entry_power: f64,
        noise_variance: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_users == 0 {
            return Err(Error::InvalidArgument("need at least one user".into()));
        }
        if !(noise_variance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        let n = covariance.nrows();
        if covariance.ncols() != n {
            return Err(Error::InvalidCovariance("covariance must be square".into()));
        }
        let factor = match nalgebra::Cholesky::new(covariance.clone()) {
            Some(c) => c.l(),
            None => {
                let jitter = 1e-12 * covariance.trace();
                let jittered = &covariance + DMatrix::from_diagonal_element(n, n, jitter);
                nalgebra::Cholesky::new(jittered)
                    .ok_or_else(|| {
                        Error::InvalidCovariance(
                            "Cholesky failed even after PSD jitter".into(),
                        )
                    })?
                    .l()
            }
        };
        Ok(Self {
            n_users,
            covariance,
            entry_power,
            noise_variance,
            seed,
            factor,
        })
    }

    /// Number of antennas N.
    pub fn n_antennas(&self) -> usize {
        self.covariance.nrows()
    }
}

/// Draws the M × N channel matrix for one realization.
///
/// Each user row is L·g with g a standard circularly-symmetric complex
/// Gaussian vector, so E[h hᴴ] = Σ. Identical (seed, realization_index)
/// yield bitwise-identical matrices.
pub fn sample_channel(params: &ChannelModelParams, realization_index: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ realization_index);
    let n = params.n_antennas();
    let m = params.n_users;
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let g = CMat::from_fn(m, n, |_, _| {
        // Row-major fill order is part of the determinism contract.
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * half, im * half)
    });
    // h_m = L g_m per row: H = G·Lᵀ.
    let lt = params.factor.transpose().map(|v| Complex64::new(v, 0.0));
    g * lt
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag_cov(n: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal_element(n, n, rho)
    }

    #[test]
    fn diagonal_coupling_gives_scaled_identity() {
        let y = CMat::from_diagonal_element(4, 4, Complex64::new(12.37, 0.0));
        let sigma = build_covariance(&y, 0.08).unwrap();
        assert!((sigma - diag_cov(4, 0.08)).norm() < 1e-14);
    }

    #[test]
    fn unit_entry_power_normalizes_diagonal() {
        let c = crate::geometry::PhysicalConstants::new(10e9).unwrap();
        let layout =
            crate::geometry::ArrayLayout::grid(2, 2, 0.5 * c.wavelength, c.wavelength).unwrap();
        let y = crate::admittance::mutual_admittance_array(&layout, &c).unwrap();
        let sigma = build_covariance(&y, 1.0).unwrap();
        for k in 0..4 {
            assert_relative_eq!(sigma[(k, k)], 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn half_wavelength_pair_correlation() {
        let c = crate::geometry::PhysicalConstants::new(10e9).unwrap();
        let layout =
            crate::geometry::ArrayLayout::grid(1, 2, 0.5 * c.wavelength, c.wavelength).unwrap();
        let y = crate::admittance::mutual_admittance_array(&layout, &c).unwrap();
        let sigma = build_covariance(&y, 0.08).unwrap();
        // Frozen Green's-function oracle value: ρ·(-3/(2π²)).
        assert_relative_eq!(sigma[(0, 1)], 0.08 * -0.1519817754635066, max_relative = 1e-12);
    }

    #[test]
    fn non_psd_rejected() {
        let mut y = CMat::from_diagonal_element(2, 2, Complex64::new(1.0, 0.0));
        y[(0, 1)] = Complex64::new(2.0, 0.0);
        y[(1, 0)] = Complex64::new(2.0, 0.0);
        assert!(matches!(
            build_covariance(&y, 1.0),
            Err(Error::InvalidCovariance(_))
        ));
    }

    #[test]
    fn same_seed_same_draw() {
        let p = ChannelModelParams::new(3, diag_cov(5, 1.0), 1.0, 0.02, 42).unwrap();
        let a = sample_channel(&p, 7);
        let b = sample_channel(&p, 7);
        assert_eq!(a, b);
        let c = sample_channel(&p, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn white_case_unit_power() {
        let p = ChannelModelParams::new(2, diag_cov(4, 1.0), 1.0, 0.02, 11).unwrap();
        let trials = 20_000;
        let mut acc = 0.0;
        for t in 0..trials {
            let h = sample_channel(&p, t);
            acc += h.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        let mean = acc / (trials as f64 * 8.0);
        // 3σ bound for the mean of 160k unit-mean exponentials.
        assert!((mean - 1.0).abs() < 3.0 / (trials as f64 * 8.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn empirical_covariance_matches_sigma() {
        let c = crate::geometry::PhysicalConstants::new(10e9).unwrap();
        let layout =
            crate::geometry::ArrayLayout::grid(1, 3, 0.5 * c.wavelength, c.wavelength).unwrap();
        let y = crate::admittance::mutual_admittance_array(&layout, &c).unwrap();
        let sigma = build_covariance(&y, 1.0).unwrap();
        let p = ChannelModelParams::new(1, sigma.clone(), 1.0, 0.02, 3).unwrap();
        let trials = 100_000;
        let n = 3;
        let mut acc = CMat::zeros(n, n);
        for t in 0..trials {
            let h = sample_channel(&p, t);
            let row = h.row(0);
            acc += row.adjoint() * row;
        }
        let emp = acc.map(|v| v.re / trials as f64);
        let err = (&emp - &sigma).norm() / sigma.norm();
        assert!(err < 0.02, "empirical covariance off by {err}");
    }
}
