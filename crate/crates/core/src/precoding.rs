//! Zero-forcing and block-diagonalization precoders and waterfilling.

use nalgebra::SVD;

use crate::error::domain;
use crate::linalg::{row_space_basis, RowSpaceReduction};
use crate::{CMatrix, Error, Result};

/// Linear precoders for all users plus their equivalent channels.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    /// `M x N` precoder per user; every column has unit norm.
    pub w: Vec<CMatrix>,
    /// Equivalent `N x N` channel `G_ℓ = H_ℓ W_ℓ` per user.
    pub equivalent: Vec<CMatrix>,
    /// Power gains of the parallel modes: `|g_{ℓ,n}|²` for ZF, eigenvalues of
    /// `G_ℓ^H G_ℓ` for BD. User-major order.
    pub mode_gains: Vec<f64>,
}

impl PrecoderSet {
    pub fn users(&self) -> usize {
        self.w.len()
    }
}

/// Zero-forcing: every receive antenna is treated as its own stream and all
/// inter-stream interference is nulled. Columns of the right pseudo-inverse
/// `H^H (H H^H)^{-1}`, normalized; the equivalent gains come out real and
/// positive.
///
/// `n` groups the `LN` rows into users for the returned `w` and `equivalent`.
pub fn zf_precoder(h: &CMatrix, n: usize) -> Result<PrecoderSet> {
    let (k, _m) = h.shape();
    check_grouping(k, n)?;
    let red = RowSpaceReduction::new(h)?;
    // pinv = Q (R^H)^{-1}
    let inv = red
        .reduced
        .solve_lower_triangular(&CMatrix::identity(k, k))
        .ok_or(Error::RankDeficient { min_singular_value: 0.0 })?;
    let mut columns = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    for s in 0..k {
        let x = inv.column(s);
        let norm = x.norm();
        columns.push(&red.basis * (x / nalgebra::Complex::new(norm, 0.0)));
        gains.push(1.0 / (norm * norm));
    }
    let users = k / n;
    let mut w = Vec::with_capacity(users);
    let mut equivalent = Vec::with_capacity(users);
    for u in 0..users {
        let wu = CMatrix::from_fn(h.ncols(), n, |r, c| columns[u * n + c][r]);
        equivalent.push(h.rows(u * n, n) * &wu);
        w.push(wu);
    }
    Ok(PrecoderSet { w, equivalent, mode_gains: gains })
}

/// Block diagonalization: user `ℓ` transmits inside the null space of the
/// other users' stacked channels, along the right singular vectors of its
/// own projected channel.
pub fn bd_precoder(blocks: &[CMatrix]) -> Result<PrecoderSet> {
    let Some(first) = blocks.first() else {
        return Err(domain("no users"));
    };
    let (n, m) = first.shape();
    if blocks.iter().any(|b| b.shape() != (n, m)) {
        return Err(Error::Dimension("user blocks differ in shape".to_owned()));
    }
    let users = blocks.len();
    if m < users * n {
        return Err(Error::Config(format!(
            "BD needs M ≥ L·N (M = {m}, L = {users}, N = {n})"
        )));
    }
    let mut w = Vec::with_capacity(users);
    let mut equivalent = Vec::with_capacity(users);
    let mut mode_gains = Vec::with_capacity(users * n);
    for (u, hu) in blocks.iter().enumerate() {
        let others = stack_except(blocks, u, m);
        let basis = row_space_basis(&others);
        let null_dim = m - basis.ncols();
        if null_dim < n {
            return Err(Error::Config(format!(
                "user {u}: interference null space has dimension {null_dim} < N = {n}"
            )));
        }
        let projected = hu - (hu * &basis) * basis.adjoint();
        let svd = SVD::new(projected, false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let wu = CMatrix::from_fn(m, n, |r, c| v_t[(order[c], r)].conj());
        let gu = hu * &wu;
        mode_gains.extend(order.iter().map(|&i| svd.singular_values[i].powi(2)));
        equivalent.push(gu);
        w.push(wu);
    }
    Ok(PrecoderSet { w, equivalent, mode_gains })
}

fn stack_except(blocks: &[CMatrix], skip: usize, m: usize) -> CMatrix {
    let rows: usize = blocks.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, b)| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, m);
    let mut at = 0;
    for (i, b) in blocks.iter().enumerate() {
        if i == skip {
            continue;
        }
        out.rows_mut(at, b.nrows()).copy_from(b);
        at += b.nrows();
    }
    out
}

fn check_grouping(rows: usize, n: usize) -> Result<()> {
    if n == 0 || rows == 0 || !rows.is_multiple_of(n) {
        return Err(Error::Dimension(format!("{rows} rows cannot be grouped into users of {n} antennas")));
    }
    Ok(())
}

/// Per-channel powers under a sum-power constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub total: f64,
    pub water_level: f64,
}

impl PowerAllocation {
    /// `Σ log2(1 + p_k g_k)`.
    pub fn rate_bits(&self, gains: &[f64]) -> f64 {
        self.powers.iter().zip(gains).map(|(p, g)| (p * g).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
    }
}

/// Capacity-achieving waterfilling `p_k = max(ν − 1/g_k, 0)`, `Σ p_k = ρ`.
///
/// The water level is found exactly by scanning the sorted gains.
pub fn waterfill(gains: &[f64], rho: f64) -> Result<PowerAllocation> {
    if gains.is_empty() {
        return Err(domain("waterfilling over zero channels"));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(domain(format!("total power must be positive, got {rho}")));
    }
    if let Some(g) = gains.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
        return Err(domain(format!("channel gains must be positive and finite, got {g}")));
    }
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    for (active, &idx) in order.iter().enumerate() {
        let floor = 1.0 / gains[idx];
        let candidate = (rho + inv_sum + floor) / (active + 1) as f64;
        if active > 0 && candidate <= floor {
            break;
        }
        inv_sum += floor;
        level = candidate;
    }
    let powers = gains.iter().map(|g| (level - 1.0 / g).max(0.0)).collect();
    Ok(PowerAllocation { powers, total: rho, water_level: level })
}
