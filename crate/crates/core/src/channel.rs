//! Heterogeneous Ricean channel model.
//!
//! Each user block is `H_ℓ = sqrt(κ/(κ+1)) H̄_ℓ + sqrt(1/(κ+1)) H̃_ℓ` with a
//! rank-one uniform-linear-array LOS term `H̄_ℓ` and i.i.d. CN(0, 1) scatter
//! `H̃_ℓ`. Blocks are stacked row-wise into the `LN x M` composite channel.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::domain;
use crate::{CMatrix, Result};

/// Antenna counts, SNR grid and geometry for one system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Base-station antennas.
    pub m: usize,
    /// Users.
    pub l: usize,
    /// Antennas per user.
    pub n: usize,
    /// Inter-element spacing in carrier wavelengths.
    pub d_over_lambda: f64,
    /// Operating SNRs (ρ) in dB.
    pub snr_grid_db: Vec<f64>,
    /// Cell radius. Metadata only: the model has no path loss.
    pub cell_radius_m: f64,
    pub seed: u64,
}

impl SystemConfig {
    pub fn new(m: usize, l: usize, n: usize) -> Self {
        Self {
            m,
            l,
            n,
            d_over_lambda: 0.5,
            snr_grid_db: vec![-10.0, 0.0, 10.0, 20.0, 30.0],
            cell_radius_m: 100.0,
            seed: 0,
        }
    }

    pub fn with_snr_grid(mut self, snr_grid_db: Vec<f64>) -> Self {
        self.snr_grid_db = snr_grid_db;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Total receive antennas `L·N`.
    pub fn streams(&self) -> usize {
        self.l * self.n
    }

    /// Every violated invariant, as human-readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.l == 0 || self.n == 0 {
            v.push(format!("L·N must be at least 1 (L = {}, N = {})", self.l, self.n));
        }
        if self.m < self.streams() {
            v.push(format!(
                "M ≥ L·N violated: M = {}, L = {}, N = {}",
                self.m, self.l, self.n
            ));
        }
        if !(self.d_over_lambda > 0.0) || !self.d_over_lambda.is_finite() {
            v.push(format!("d_over_lambda must be positive, got {}", self.d_over_lambda));
        }
        if self.snr_grid_db.is_empty() {
            v.push("SNR grid is empty".to_owned());
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            v.push("SNR grid contains a non-finite entry".to_owned());
        }
        if !(self.cell_radius_m > 0.0) {
            v.push(format!("cell radius must be positive, got {}", self.cell_radius_m));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().first() {
            None => Ok(()),
            Some(msg) => Err(crate::Error::Config(msg.clone())),
        }
    }
}

/// Distribution of per-user Ricean K-factors.
#[derive(Debug, Clone, PartialEq)]
pub enum KappaLaw {
    /// κ = 0 (pure scatter).
    Rayleigh,
    /// Same K-factor for every user, in dB.
    Fixed { db: f64 },
    /// K-factor in dB drawn from Gaussian(mean_db, var_db); `var_db` is a
    /// variance in dB².
    LogNormal { mean_db: f64, var_db: f64 },
    /// One law per user.
    PerUser(Vec<KappaLaw>),
}

impl KappaLaw {
    pub fn validate(&self, users: usize) -> Result<()> {
        match self {
            KappaLaw::Rayleigh => Ok(()),
            KappaLaw::Fixed { db } if db.is_finite() => Ok(()),
            KappaLaw::Fixed { db } => Err(domain(format!("fixed K-factor must be finite, got {db}"))),
            KappaLaw::LogNormal { mean_db, var_db } => {
                if !(*var_db >= 0.0) || !var_db.is_finite() {
                    Err(domain(format!("K-factor variance must be ≥ 0, got {var_db}")))
                } else if !mean_db.is_finite() {
                    Err(domain(format!("K-factor mean must be finite, got {mean_db}")))
                } else {
                    Ok(())
                }
            }
            KappaLaw::PerUser(laws) => {
                if laws.len() != users {
                    return Err(domain(format!(
                        "{} per-user K-factor laws for {users} users",
                        laws.len()
                    )));
                }
                laws.iter().try_for_each(|law| match law {
                    KappaLaw::PerUser(_) => Err(domain("nested per-user K-factor law")),
                    other => other.validate(1),
                })
            }
        }
    }

    fn sample_db<R: Rng + ?Sized>(&self, user: usize, rng: &mut R) -> f64 {
        match self {
            KappaLaw::Rayleigh => f64::NEG_INFINITY,
            KappaLaw::Fixed { db } => *db,
            KappaLaw::LogNormal { mean_db, var_db } => {
                // validated beforehand
                Normal::new(*mean_db, var_db.sqrt()).unwrap().sample(rng)
            }
            KappaLaw::PerUser(laws) => laws[user].sample_db(user, rng),
        }
    }
}

/// Large-scale description of one user's link.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    /// Ricean K-factor in dB; `-inf` means Rayleigh.
    pub kappa_db: f64,
    /// LOS angle of departure at the base station.
    pub aod_rad: f64,
    /// LOS angle of arrival at the user array (only used when N > 1).
    pub aoa_rad: f64,
    /// Weight μ_ℓ for weighted sum capacity.
    pub weight: f64,
}

impl UserProfile {
    pub fn kappa_linear(&self) -> f64 {
        db_to_linear(self.kappa_db)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One composite channel draw.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// `LN x M` composite channel, user blocks stacked by rows.
    pub h: CMatrix,
    /// `LN x M` LOS steering component (unscaled by κ).
    pub h_bar: CMatrix,
    /// Antennas per user.
    pub n: usize,
}

impl ChannelRealization {
    pub fn users(&self) -> usize {
        self.h.nrows() / self.n
    }

    /// `N x M` block `H_ℓ`.
    pub fn user_block(&self, user: usize) -> nalgebra::DMatrixView<'_, Complex64> {
        self.h.rows(user * self.n, self.n)
    }

    pub fn user_blocks(&self) -> Vec<CMatrix> {
        (0..self.users()).map(|u| self.user_block(u).into_owned()).collect()
    }
}

fn ula_response(len: usize, d_over_lambda: f64, angle: f64) -> Vec<Complex64> {
    let k = -TAU * d_over_lambda * angle.sin();
    (0..len).map(|i| Complex64::from_polar(1.0, k * i as f64)).collect()
}

/// Rank-one LOS block `a_rx(aoa) · a_tx(aod)^H` (`N x M`).
pub fn los_steering_matrix(profile: &UserProfile, m: usize, n: usize, d_over_lambda: f64) -> CMatrix {
    let tx = ula_response(m, d_over_lambda, profile.aod_rad);
    let rx = ula_response(n, d_over_lambda, profile.aoa_rad);
    CMatrix::from_fn(n, m, |r, c| rx[r] * tx[c].conj())
}

/// Draws `L` user profiles: K-factors from `law`, departure and arrival
/// angles uniform on `[0, 2π)`, equal weights `1/L`.
pub fn draw_user_profiles<R: Rng + ?Sized>(
    config: &SystemConfig,
    law: &KappaLaw,
    rng: &mut R,
) -> Result<Vec<UserProfile>> {
    law.validate(config.l)?;
    let weight = 1.0 / config.l as f64;
    Ok((0..config.l)
        .map(|user| {
            let kappa_db = law.sample_db(user, rng);
            let aod_rad = rng.random_range(0.0..TAU);
            let aoa_rad = rng.random_range(0.0..TAU);
            UserProfile { kappa_db, aod_rad, aoa_rad, weight }
        })
        .collect())
}

/// Standard circularly-symmetric complex Gaussian sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws one composite channel for the given user profiles.
pub fn draw_channel<R: Rng + ?Sized>(
    config: &SystemConfig,
    profiles: &[UserProfile],
    rng: &mut R,
) -> Result<ChannelRealization> {
    if profiles.len() != config.l {
        return Err(domain(format!(
            "{} profiles supplied for {} users",
            profiles.len(),
            config.l
        )));
    }
    let (m, n) = (config.m, config.n);
    let mut h = CMatrix::zeros(config.streams(), m);
    let mut h_bar = CMatrix::zeros(config.streams(), m);
    for (user, profile) in profiles.iter().enumerate() {
        let kappa = profile.kappa_linear();
        if !(kappa >= 0.0) {
            return Err(domain(format!("K-factor must be non-negative, got {kappa}")));
        }
        let los_amp = (kappa / (kappa + 1.0)).sqrt();
        let nlos_amp = (1.0 / (kappa + 1.0)).sqrt();
        let los = los_steering_matrix(profile, m, n, config.d_over_lambda);
        for r in 0..n {
            for c in 0..m {
                let row = user * n + r;
                h_bar[(row, c)] = los[(r, c)];
                h[(row, c)] = los[(r, c)] * los_amp + complex_gaussian(rng) * nlos_amp;
            }
        }
    }
    Ok(ChannelRealization { h, h_bar, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;
    use std::f64::consts::FRAC_PI_2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profile(kappa_db: f64, aod: f64) -> UserProfile {
        UserProfile { kappa_db, aod_rad: aod, aoa_rad: 0.3, weight: 1.0 }
    }

    #[test]
    fn steering_examples() {
        let one = los_steering_matrix(&profile(0.0, 1.2), 1, 1, 0.5);
        assert!((one[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        let broadside = los_steering_matrix(&profile(0.0, 0.0), 4, 1, 0.5);
        for c in 0..4 {
            assert!((broadside[(0, c)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }

        let endfire = los_steering_matrix(&profile(0.0, FRAC_PI_2), 3, 1, 0.5);
        for (c, want) in [1.0, -1.0, 1.0].into_iter().enumerate() {
            assert!((endfire[(0, c)] - Complex64::new(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn steering_is_rank_one_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (m, n) = (rng.random_range(1..12), rng.random_range(1..4));
            let p = UserProfile {
                kappa_db: 0.0,
                aod_rad: rng.random_range(0.0..TAU),
                aoa_rad: rng.random_range(0.0..TAU),
                weight: 1.0,
            };
            let los = los_steering_matrix(&p, m, n, 0.5);
            assert!(los.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            let sv = singular_values(&los);
            assert!((sv[0] - ((m * n) as f64).sqrt()).abs() < 1e-9);
            assert!(sv[1..].iter().all(|&s| s < 1e-9));
        }
    }

    #[test]
    fn fixed_kappa_conversion() {
        let cfg = SystemConfig::new(8, 4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (db, lin) in [(0.0, 1.0), (20.0, 100.0)] {
            let ps = draw_user_profiles(&cfg, &KappaLaw::Fixed { db }, &mut rng).unwrap();
            assert_eq!(ps.len(), 4);
            for p in ps {
                assert!((p.kappa_linear() - lin).abs() < 1e-12);
                assert!((0.0..TAU).contains(&p.aod_rad));
            }
        }
        let ray = draw_user_profiles(&cfg, &KappaLaw::Rayleigh, &mut rng).unwrap();
        assert!(ray.iter().all(|p| p.kappa_linear() == 0.0));
    }

    #[test]
    fn negative_variance_rejected() {
        let cfg = SystemConfig::new(8, 4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let law = KappaLaw::LogNormal { mean_db: 9.0, var_db: -1.0 };
        assert!(draw_user_profiles(&cfg, &law, &mut rng).is_err());
    }

    #[test]
    fn lognormal_kappa_mean() {
        let cfg = SystemConfig::new(1, 1, 1);
        let law = KappaLaw::LogNormal { mean_db: 9.0, var_db: 5.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 100_000;
        let mean = (0..draws)
            .map(|_| draw_user_profiles(&cfg, &law, &mut rng).unwrap()[0].kappa_db)
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 9.0).abs() <= 3.0 * (5.0f64 / draws as f64).sqrt());
    }

    #[test]
    fn rayleigh_channel_is_the_scatter_draw() {
        let cfg = SystemConfig::new(6, 2, 2);
        let ps = vec![profile(f64::NEG_INFINITY, 0.4), profile(f64::NEG_INFINITY, 2.0)];
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let ch = draw_channel(&cfg, &ps, &mut a).unwrap();
        for r in 0..4 {
            for c in 0..6 {
                assert_eq!(ch.h[(r, c)], complex_gaussian(&mut b));
            }
        }
    }

    #[test]
    fn huge_kappa_is_pure_los() {
        let cfg = SystemConfig::new(8, 2, 2);
        let ps = vec![profile(120.0, 0.4), profile(120.0, 2.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ch = draw_channel(&cfg, &ps, &mut rng).unwrap();
        for (x, y) in ch.h.iter().zip(ch.h_bar.iter()) {
            assert!((x - y).norm() < 1e-5);
        }
        assert_eq!(ch.user_block(1).nrows(), 2);
        assert_eq!(ch.users(), 2);
    }

    #[test]
    fn scatter_variance_at_unit_kappa() {
        let cfg = SystemConfig::new(4, 1, 1);
        let ps = vec![profile(0.0, 0.7)];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let draws = 100_000;
        let mut samples = Vec::with_capacity(draws);
        for _ in 0..draws {
            let ch = draw_channel(&cfg, &ps, &mut rng).unwrap();
            let mean = ch.h_bar[(0, 2)] * 0.5f64.sqrt();
            samples.push((ch.h[(0, 2)] - mean).norm_sqr());
        }
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn unit_average_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for db in [f64::NEG_INFINITY, 0.0, 9.0, 20.0] {
            let cfg = SystemConfig::new(2, 1, 1);
            let ps = vec![profile(db, 1.1)];
            let draws = 100_000;
            let samples: Vec<f64> = (0..draws)
                .map(|_| draw_channel(&cfg, &ps, &mut rng).unwrap().h[(0, 1)].norm_sqr())
                .collect();
            let mean = samples.iter().sum::<f64>() / draws as f64;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
            assert!((mean - 1.0).abs() < 3.0 * (var / draws as f64).sqrt(), "κ = {db} dB: {mean}");
        }
    }

    #[test]
    fn config_violations() {
        let bad = SystemConfig { m: 8, l: 8, n: 2, ..SystemConfig::new(8, 8, 2) };
        assert!(bad.violations().iter().any(|v| v.contains("M ≥ L·N")));
        let empty = SystemConfig::new(8, 2, 1).with_snr_grid(vec![]);
        assert!(empty.validate().is_err());
        assert!(SystemConfig::new(64, 8, 1).validate().is_ok());
    }
}
