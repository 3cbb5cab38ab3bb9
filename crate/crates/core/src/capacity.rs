//! Per-realization sum capacities, their high-SNR affine forms, and the
//! SNR-free DPC losses.

use std::f64::consts::LN_2;

use crate::error::domain;
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, RowSpaceReduction};
use crate::precoding::{bd_precoder, waterfill, zf_precoder, PrecoderSet};
use crate::special::log_det_hermitian;
use crate::{CMatrix, Complex64, Error, Result};

/// Stopping rule for the dual-MAC sum-power iterative waterfilling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpcSolverOptions {
    /// Stop once the certified optimality gap (bits) drops below this.
    pub gap_tolerance: f64,
    /// Gap accepted when the iteration cap is hit.
    pub fallback_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for DpcSolverOptions {
    fn default() -> Self {
        Self { gap_tolerance: 1e-8, fallback_tolerance: 1e-6, max_iterations: 10_000 }
    }
}

/// Outcome of the DPC solver.
#[derive(Debug, Clone, PartialEq)]
pub struct DpcSolution {
    /// Sum capacity in bits/s/Hz.
    pub capacity: f64,
    /// Upper bound on `optimum − capacity`, in bits.
    pub gap: f64,
    pub iterations: usize,
    /// Dual-MAC trace powers per user.
    pub user_powers: Vec<f64>,
}

/// `α = LN [log2 ρ − log2 LN]`.
pub fn alpha(streams: usize, rho: f64) -> f64 {
    let k = streams as f64;
    k * (rho.log2() - k.log2())
}

/// DPC sum capacity of the composite channel `h` (users of `n` antennas)
/// with default solver options.
pub fn dpc_sum_capacity(h: &CMatrix, n: usize, rho: f64) -> Result<f64> {
    dpc_solve(h, n, rho, &DpcSolverOptions::default()).map(|s| s.capacity)
}

/// Maximizes `log2 |I + Σ H_ℓ^H Q_ℓ H_ℓ|` over dual-MAC covariances with
/// `Σ Tr Q_ℓ ≤ ρ` by sum-power iterative waterfilling with the `1/L`
/// averaging update, started from `Q_ℓ = ρ/(LN) I`.
///
/// The channel is first reduced to its row space so every matrix in the loop
/// is `LN x LN`. Convergence is certified by the linearization bound
/// `ρ max_ℓ λ_max(∇_ℓ) − Σ Tr(∇_ℓ Q_ℓ)`.
pub fn dpc_solve(h: &CMatrix, n: usize, rho: f64, opts: &DpcSolverOptions) -> Result<DpcSolution> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(domain(format!("total power must be positive, got {rho}")));
    }
    let k = h.nrows();
    if n == 0 || k == 0 || !k.is_multiple_of(n) {
        return Err(Error::Dimension(format!("{k} rows cannot be grouped into users of {n} antennas")));
    }
    let users = k / n;
    let hr = RowSpaceReduction::new(h)?.reduced;
    let blocks: Vec<CMatrix> = (0..users).map(|u| hr.rows(u * n, n).into_owned()).collect();
    let eye_k = CMatrix::identity(k, k);
    let mut q: Vec<CMatrix> = vec![CMatrix::identity(n, n) * Complex64::from(rho / k as f64); users];
    let mix = 1.0 / users as f64;
    let mut last = (f64::NAN, f64::INFINITY);

    for iter in 0..=opts.max_iterations {
        let contributions: Vec<CMatrix> =
            blocks.iter().zip(&q).map(|(b, qu)| b.adjoint() * qu * b).collect();
        let z = contributions.iter().fold(eye_k.clone(), |acc, c| acc + c);
        let objective = log_det_hermitian(&z)?;
        let z_inv = hermitian_inverse(&z)?;
        let mut top = 0.0f64;
        let mut inner = 0.0;
        for (b, qu) in blocks.iter().zip(&q) {
            let grad = b * &z_inv * b.adjoint();
            top = top.max(*hermitian_eigenvalues(&grad).last().unwrap());
            inner += (&grad * qu).trace().re;
        }
        let gap = ((rho * top - inner) / LN_2).max(0.0);
        last = (objective, gap);
        if gap <= opts.gap_tolerance {
            return Ok(solution(objective, gap, iter, &q));
        }
        if iter == opts.max_iterations {
            break;
        }

        // best responses against the current interference
        let mut modes = Vec::with_capacity(users);
        let mut all_gains = Vec::with_capacity(k);
        for (b, c) in blocks.iter().zip(&contributions) {
            let zu_inv = hermitian_inverse(&(&z - c))?;
            let eff = b * zu_inv * b.adjoint();
            let (vals, vecs) = hermitian_eigen(&eff);
            all_gains.extend(vals.iter().map(|v| v.max(0.0)));
            modes.push((vals, vecs));
        }
        let powers = waterfill_nonneg(&all_gains, rho)?;
        for (u, (vals, vecs)) in modes.iter().enumerate() {
            let p = &powers[u * n..(u + 1) * n];
            let diag = CMatrix::from_fn(vals.len(), vals.len(), |r, c| {
                if r == c { Complex64::from(p[r]) } else { Complex64::from(0.0) }
            });
            let s = vecs * diag * vecs.adjoint();
            q[u] = &s * Complex64::from(mix) + &q[u] * Complex64::from(1.0 - mix);
        }
    }
    if last.1 <= opts.fallback_tolerance {
        return Ok(solution(last.0, last.1, opts.max_iterations, &q));
    }
    Err(Error::NoConvergence {
        solver: "sum-power iterative waterfilling",
        iterations: opts.max_iterations,
        objective: last.0,
        gap: last.1,
    })
}

fn solution(capacity: f64, gap: f64, iterations: usize, q: &[CMatrix]) -> DpcSolution {
    DpcSolution { capacity, gap, iterations, user_powers: q.iter().map(|x| x.trace().re).collect() }
}

pub(crate) fn hermitian_inverse(a: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefinite {
            min_eigenvalue: hermitian_eigenvalues(a).first().copied().unwrap_or(f64::NAN),
        })
}

/// Waterfilling that leaves zero-gain modes unpowered.
fn waterfill_nonneg(gains: &[f64], rho: f64) -> Result<Vec<f64>> {
    let floor = gains.iter().copied().fold(0.0, f64::max) * 1e-300;
    let active: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > floor && gains[i] > 0.0).collect();
    let mut powers = vec![0.0; gains.len()];
    if active.is_empty() {
        return Ok(powers);
    }
    let sub: Vec<f64> = active.iter().map(|&i| gains[i]).collect();
    let alloc = waterfill(&sub, rho)?;
    for (&i, p) in active.iter().zip(alloc.powers) {
        powers[i] = p;
    }
    Ok(powers)
}

/// `log2 |H H^H|` of the composite channel, the nonzero-spectrum form of
/// `log2 |H^H H|`.
pub fn log2_gram_det(h: &CMatrix) -> Result<f64> {
    Ok(RowSpaceReduction::new(h)?.log2_gram_det())
}

/// High-SNR affine DPC capacity `LN[log2 ρ − log2 LN] + log2 |H H^H|`.
pub fn dpc_affine(h: &CMatrix, rho: f64) -> Result<f64> {
    Ok(alpha(h.nrows(), rho) + log2_gram_det(h)?)
}

/// Capacity of parallel channels with optimal power allocation.
pub fn parallel_capacity(gains: &[f64], rho: f64) -> Result<f64> {
    let powers = waterfill_nonneg(gains, rho)?;
    Ok(powers.iter().zip(gains).map(|(p, g)| (p * g).ln_1p()).sum::<f64>() / LN_2)
}

/// ZF sum capacity: waterfilling over the `LN` equivalent gains.
pub fn zf_sum_capacity(precoders: &PrecoderSet, rho: f64) -> Result<f64> {
    parallel_capacity(&precoders.mode_gains, rho)
}

/// `α + Σ log2 |g_{ℓ,n}|²`.
pub fn zf_affine(precoders: &PrecoderSet, rho: f64) -> Result<f64> {
    let streams = precoders.mode_gains.len();
    Ok(alpha(streams, rho) + sum_log2_gains(&precoders.mode_gains)?)
}

/// BD sum capacity: waterfilling jointly over the eigenmodes of every
/// `G_ℓ^H G_ℓ` under the single sum-power constraint.
pub fn bd_sum_capacity(precoders: &PrecoderSet, rho: f64) -> Result<f64> {
    parallel_capacity(&precoders.mode_gains, rho)
}

/// `α + Σ_ℓ log2 |G_ℓ^H G_ℓ|`.
pub fn bd_affine(precoders: &PrecoderSet, rho: f64) -> Result<f64> {
    let streams: usize = precoders.equivalent.iter().map(|g| g.ncols()).sum();
    Ok(alpha(streams, rho) + sum_log2_equivalent(precoders)?)
}

fn sum_log2_gains(gains: &[f64]) -> Result<f64> {
    if let Some(g) = gains.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::RankDeficient { min_singular_value: g.max(0.0).sqrt() });
    }
    Ok(gains.iter().map(|g| g.log2()).sum())
}

fn sum_log2_equivalent(precoders: &PrecoderSet) -> Result<f64> {
    precoders
        .equivalent
        .iter()
        .map(|g| log_det_hermitian(&(g.adjoint() * g)))
        .sum()
}

/// SNR-free DPC–ZF loss `log2 (|H H^H| / Π |g_{ℓ,n}|²)`.
pub fn loss_dpc_zf(h: &CMatrix, zf: &PrecoderSet) -> Result<f64> {
    Ok(log2_gram_det(h)? - sum_log2_gains(&zf.mode_gains)?)
}

/// SNR-free DPC–BD loss `log2 (|H H^H| / Π |G_ℓ^H G_ℓ|)`.
pub fn loss_dpc_bd(h: &CMatrix, bd: &PrecoderSet) -> Result<f64> {
    Ok(log2_gram_det(h)? - sum_log2_equivalent(bd)?)
}

/// Every capacity and loss for one channel at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub c_dpc: f64,
    pub c_zf: f64,
    /// Present when users have more than one antenna.
    pub c_bd: Option<f64>,
    pub affine_dpc: f64,
    pub affine_zf: f64,
    pub affine_bd: Option<f64>,
    pub loss_dpc_zf: f64,
    pub loss_dpc_bd: Option<f64>,
}

/// Evaluates DPC (users of `n` antennas), ZF (every antenna its own stream)
/// and, for `n > 1`, BD on the same composite channel.
pub fn capacity_report(h: &CMatrix, n: usize, rho: f64) -> Result<CapacityReport> {
    let zf = zf_precoder(h, n)?;
    let c_dpc = dpc_sum_capacity(h, n, rho)?;
    let (c_bd, affine_bd, loss_bd) = if n > 1 {
        let blocks: Vec<CMatrix> = (0..h.nrows() / n).map(|u| h.rows(u * n, n).into_owned()).collect();
        let bd = bd_precoder(&blocks)?;
        (Some(bd_sum_capacity(&bd, rho)?), Some(bd_affine(&bd, rho)?), Some(loss_dpc_bd(h, &bd)?))
    } else {
        (None, None, None)
    };
    Ok(CapacityReport {
        c_dpc,
        c_zf: zf_sum_capacity(&zf, rho)?,
        c_bd,
        affine_dpc: dpc_affine(h, rho)?,
        affine_zf: zf_affine(&zf, rho)?,
        affine_bd,
        loss_dpc_zf: loss_dpc_zf(h, &zf)?,
        loss_dpc_bd: loss_bd,
    })
}
