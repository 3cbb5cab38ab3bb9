//! Closed-form approximation of the expected DPC–ZF sum-capacity loss.
//!
//! The expected loss splits into `E{log2 |H H^H|}` (a non-central Wishart
//! log-determinant, evaluated with [`delta_m`]) plus `E{log2 1/γ}` (the ZF
//! gain product, approximated through a central Wishart with the shifted
//! covariance `Σ̂`). Both are conditional on the users' K-factors and LOS
//! angles; ensemble values average them over profile draws.

use std::f64::consts::LN_2;

use statrs::function::gamma::digamma;

use crate::channel::{los_steering_matrix, UserProfile};
use crate::error::domain;
use crate::harness::{LossEstimate, Method};
use crate::linalg::hermitian_eigenvalues;
use crate::special::{central_wishart_logdet_mean, delta_m};
use crate::{CMatrix, Complex64, Error, Result};

/// Which spectrum feeds the non-central Wishart log-determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenSource {
    /// Eigenvalues of the unscaled LOS Gram `H̄ H̄^H`.
    Literal,
    /// Eigenvalues of `P P^H` with mean matrix `P = sqrt(κ/(κ+1)) H̄`.
    KappaScaled,
    /// Row-whitened form: eigenvalues of `κ^{1/2} H̄ H̄^H κ^{1/2}` (the mean
    /// after scaling each row to unit scatter variance) plus `log2 |Σ|`.
    #[default]
    Whitened,
}

/// How `E{log2 1/|g|²}` is taken from the chi-squared gain model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InverseGainRule {
    /// `log2 ((Σ̂^{-1})_{ℓℓ} / (M − LN))`, i.e. the log of the mean inverse gain.
    #[default]
    LaplaceBracket,
    /// `log2 (Σ̂^{-1})_{ℓℓ} − ψ(M − LN + 1)/ln 2`, the exact log-moment of the
    /// chi-squared model.
    Digamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AnalyticOptions {
    pub eigen_source: EigenSource,
    pub inverse_gain: InverseGainRule,
}

/// Second-order description of the composite channel given the user
/// profiles.
#[derive(Debug, Clone)]
pub struct WishartSpec {
    /// Linear K-factors, one per user (the diagonal of `𝜿`).
    pub kappa: Vec<f64>,
    /// `L x L` Gram of the users' LOS departure rows.
    pub los_gram: CMatrix,
    /// `LN x LN` Gram of the composite LOS matrix `H̄`.
    pub stream_los_gram: CMatrix,
    pub m: usize,
    pub n: usize,
}

impl WishartSpec {
    pub fn from_profiles(profiles: &[UserProfile], m: usize, n: usize, d_over_lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(domain("N must be at least 1"));
        }
        let l = profiles.len();
        let mut rows = CMatrix::zeros(l, m);
        let mut h_bar = CMatrix::zeros(l * n, m);
        for (u, p) in profiles.iter().enumerate() {
            let tx_only = los_steering_matrix(p, m, 1, d_over_lambda);
            rows.row_mut(u).copy_from(&tx_only.row(0));
            h_bar.rows_mut(u * n, n).copy_from(&los_steering_matrix(p, m, n, d_over_lambda));
        }
        let kappa = profiles.iter().map(UserProfile::kappa_linear).collect();
        Self::new(kappa, &rows * rows.adjoint(), &h_bar * h_bar.adjoint(), m, n)
    }

    pub fn new(kappa: Vec<f64>, los_gram: CMatrix, stream_los_gram: CMatrix, m: usize, n: usize) -> Result<Self> {
        let l = kappa.len();
        if los_gram.shape() != (l, l) {
            return Err(Error::Dimension(format!(
                "LOS Gram is {}x{} for {l} users",
                los_gram.nrows(),
                los_gram.ncols()
            )));
        }
        if stream_los_gram.shape() != (l * n, l * n) {
            return Err(Error::Dimension(format!(
                "stream LOS Gram is {}x{} for {} streams",
                stream_los_gram.nrows(),
                stream_los_gram.ncols(),
                l * n
            )));
        }
        check_kappa(&kappa)?;
        Ok(Self { kappa, los_gram, stream_los_gram, m, n })
    }

    pub fn users(&self) -> usize {
        self.kappa.len()
    }

    pub fn streams(&self) -> usize {
        self.kappa.len() * self.n
    }

    /// Row covariance `Σ = (𝜿 + I)^{-1}` (diagonal).
    pub fn sigma(&self) -> Vec<f64> {
        self.kappa.iter().map(|k| 1.0 / (k + 1.0)).collect()
    }

    pub fn sigma_hat(&self) -> Result<CMatrix> {
        sigma_hat(&self.kappa, &self.los_gram, self.m)
    }

    fn stream_kappa(&self) -> impl Iterator<Item = f64> + '_ {
        self.kappa.iter().flat_map(move |&k| std::iter::repeat_n(k, self.n))
    }

    /// The `LN` eigenvalues used by the non-central log-determinant.
    pub fn noncentral_eigs(&self, source: EigenSource) -> Vec<f64> {
        let scale: Vec<f64> = match source {
            EigenSource::Literal => vec![1.0; self.streams()],
            EigenSource::KappaScaled => self.stream_kappa().map(|k| (k / (k + 1.0)).sqrt()).collect(),
            EigenSource::Whitened => self.stream_kappa().map(f64::sqrt).collect(),
        };
        let g = &self.stream_los_gram;
        let scaled = CMatrix::from_fn(g.nrows(), g.ncols(), |r, c| g[(r, c)] * (scale[r] * scale[c]));
        let mut eigs = hermitian_eigenvalues(&scaled);
        eigs.reverse();
        eigs.into_iter().map(|e| e.max(0.0)).collect()
    }
}

fn check_kappa(kappa: &[f64]) -> Result<()> {
    match kappa.iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
        Some(k) => Err(domain(format!("K-factors must be finite and ≥ 0, got {k}"))),
        None => Ok(()),
    }
}

/// Shifted covariance
/// `Σ̂ = (𝜿 + I)^{-1} + (1/M) sqrt(𝜿(𝜿+I)^{-1}) G sqrt(𝜿(𝜿+I)^{-1})`
/// where `G` is the `L x L` LOS row Gram.
pub fn sigma_hat(kappa: &[f64], los_gram: &CMatrix, m: usize) -> Result<CMatrix> {
    let l = kappa.len();
    if los_gram.shape() != (l, l) {
        return Err(Error::Dimension(format!(
            "LOS Gram is {}x{} for {l} K-factors",
            los_gram.nrows(),
            los_gram.ncols()
        )));
    }
    if m == 0 {
        return Err(domain("M must be at least 1"));
    }
    check_kappa(kappa)?;
    let d: Vec<f64> = kappa.iter().map(|k| (k / (k + 1.0)).sqrt()).collect();
    Ok(CMatrix::from_fn(l, l, |r, c| {
        let shift = los_gram[(r, c)] * (d[r] * d[c] / m as f64);
        if r == c {
            shift + Complex64::from(1.0 / (kappa[r] + 1.0))
        } else {
            shift
        }
    }))
}

/// `Σ_{ℓ=1}^{LN} Δ_M(λ_ℓ)` over the leading `streams` eigenvalues.
pub fn expected_logdet_from_eigenvalues(eigs: &[f64], m: usize, streams: usize) -> Result<f64> {
    if eigs.len() < streams {
        return Err(domain(format!("{} eigenvalues supplied, {streams} needed", eigs.len())));
    }
    eigs[..streams].iter().map(|&lambda| delta_m(lambda, m)).sum()
}

/// `E{log2 |H H^H|}`.
///
/// With every K-factor zero the matrix is central and the digamma sum is
/// returned. A mean matrix with some (but not all) zero eigenvalues is a
/// domain error, as `Δ_M` is undefined at zero.
pub fn expected_logdet_noncentral(spec: &WishartSpec, opts: &AnalyticOptions) -> Result<f64> {
    let streams = spec.streams();
    if streams == 0 {
        return Ok(0.0);
    }
    if spec.m < streams {
        return Err(domain(format!("M = {} < LN = {streams}", spec.m)));
    }
    if spec.kappa.iter().all(|&k| k == 0.0) {
        return central_wishart_logdet_mean(spec.m, streams);
    }
    let eigs = spec.noncentral_eigs(opts.eigen_source);
    let top = eigs.first().copied().unwrap_or(0.0).max(1.0);
    if let Some(pos) = eigs.iter().position(|&e| e <= 1e-12 * top) {
        return Err(domain(format!(
            "non-central eigenvalue {pos} is zero; Δ_M is undefined there"
        )));
    }
    let mut total = expected_logdet_from_eigenvalues(&eigs, spec.m, streams)?;
    if opts.eigen_source == EigenSource::Whitened {
        total += spec.stream_kappa().map(|k| -(k + 1.0).log2()).sum::<f64>();
    }
    Ok(total)
}

/// `E{log2 1/γ}` with `γ = Π |g_{ℓ,n}|²`, from the per-user diagonal of
/// `Σ̂^{-1}`, each user counted `N` times.
pub fn expected_log_inv_gamma(spec: &WishartSpec, opts: &AnalyticOptions) -> Result<f64> {
    let streams = spec.streams();
    if streams == 0 {
        return Ok(0.0);
    }
    if spec.m <= streams {
        return Err(domain(format!(
            "the gain approximation needs M > LN (M = {}, LN = {streams})",
            spec.m
        )));
    }
    let sh = spec.sigma_hat()?;
    let inv = sh
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefinite {
            min_eigenvalue: hermitian_eigenvalues(&sh).first().copied().unwrap_or(f64::NAN),
        })?;
    let dof = (spec.m - streams) as f64;
    let offset = match opts.inverse_gain {
        InverseGainRule::LaplaceBracket => -dof.log2(),
        InverseGainRule::Digamma => -digamma(dof + 1.0) / LN_2,
    };
    Ok((0..spec.users())
        .map(|u| spec.n as f64 * (inv[(u, u)].re.log2() + offset))
        .sum())
}

/// Analytic expected DPC–ZF loss for one profile draw.
pub fn expected_loss_dpc_zf_analytic(spec: &WishartSpec, opts: &AnalyticOptions) -> Result<LossEstimate> {
    let value = if spec.users() == 0 {
        0.0
    } else {
        expected_log_inv_gamma(spec, opts)? + expected_logdet_noncentral(spec, opts)?
    };
    Ok(LossEstimate { value, method: Method::Analytic, half_width_95: 0.0, trials_used: 1 })
}
