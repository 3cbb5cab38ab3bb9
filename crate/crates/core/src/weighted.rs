//! Weighted sum capacity for single-antenna users.
//!
//! Users are encoded in descending-weight order. The exact DPC optimum is
//! found numerically on the power simplex; the affine forms use the
//! weight-proportional allocation `ρ_ℓ = μ_ℓ ρ` and the successive (DPC) or
//! full (ZF) null-space projections of the channel rows.

use std::f64::consts::LN_2;

use crate::capacity::hermitian_inverse;
use crate::error::domain;
use crate::linalg::{row_gram, RowSpaceReduction};
use crate::{CMatrix, Complex64, Error, Result};

/// `1 x M` complex row.
pub type CRow = nalgebra::RowDVector<Complex64>;

const WEIGHT_SUM_TOL: f64 = 1e-12;

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(domain("at least one weight is required"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(domain(format!("weights must be finite and ≥ 0, got {weights:?}")));
    }
    if weights.windows(2).any(|p| p[0] < p[1]) {
        return Err(domain(format!("weights must be sorted descending, got {weights:?}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(domain(format!("weights must sum to 1, got {sum}")));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("total power must be positive and finite, got {rho}")))
    }
}

/// Rows `h_ℓ` (`L x M`), descending weights and total power.
#[derive(Debug, Clone)]
pub struct WeightedInstance {
    pub h_rows: CMatrix,
    pub weights: Vec<f64>,
    pub rho: f64,
}

impl WeightedInstance {
    pub fn new(h_rows: CMatrix, weights: Vec<f64>, rho: f64) -> Result<Self> {
        check_weights(&weights)?;
        check_rho(rho)?;
        if h_rows.nrows() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} channel rows for {} weights",
                h_rows.nrows(),
                weights.len()
            )));
        }
        Ok(Self { h_rows, weights, rho })
    }

    pub fn users(&self) -> usize {
        self.weights.len()
    }
}

/// Successive (`f`) and full (`g`) null-space projections of the rows.
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    pub f: Vec<CRow>,
    pub g: Vec<CRow>,
    pub norms_sq_f: Vec<f64>,
    pub norms_sq_g: Vec<f64>,
}

fn dot(a: &CRow, b: &CRow) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

fn norm_sq(a: &CRow) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Gram–Schmidt residuals in user order (`f`) and residuals against all
/// other rows (`g`).
pub fn successive_projections(h_rows: &CMatrix) -> Result<ProjectionSet> {
    RowSpaceReduction::new(h_rows)?;
    let l = h_rows.nrows();
    let mut basis: Vec<CRow> = Vec::with_capacity(l);
    let mut f = Vec::with_capacity(l);
    for i in 0..l {
        let mut r = h_rows.row(i).into_owned();
        // two passes keep the residual orthogonal to working precision
        for _ in 0..2 {
            for e in &basis {
                let c = dot(&r, e);
                r -= e * c;
            }
        }
        if i == 0 {
            r = h_rows.row(0).into_owned();
        }
        let nr = norm_sq(&r).sqrt();
        basis.push(&r / Complex64::from(nr));
        f.push(r);
    }
    let inv = hermitian_inverse(&row_gram(h_rows))?;
    let mut g = Vec::with_capacity(l);
    for i in 0..l {
        // u = H^H (H H^H)^{-1} e_i is the dual row; g_i = u^H / |u|²
        let u = h_rows.adjoint() * inv.column(i);
        let nu = u.norm_squared();
        g.push(u.adjoint() / Complex64::from(nu));
    }
    let norms_sq_f: Vec<f64> = f.iter().map(norm_sq).collect();
    let norms_sq_g: Vec<f64> = g.iter().map(norm_sq).collect();
    Ok(ProjectionSet { f, g, norms_sq_f, norms_sq_g })
}

/// Decoupled-KKT variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KktVariant {
    /// Inner sum over every active user; powers sum to `ρ`.
    #[default]
    FullSum,
    /// Inner sum over `i ≠ ℓ`, kept for comparison; powers do not in general
    /// sum to `ρ`.
    ExcludeSelf,
}

/// Maximizer of `Σ μ_ℓ log2(1 + ρ_ℓ a_ℓ)` subject to `Σ ρ_ℓ = ρ`, `ρ_ℓ ≥ 0`.
pub fn kkt_power_allocation(norms_sq: &[f64], weights: &[f64], rho: f64) -> Result<Vec<f64>> {
    kkt_power_allocation_with(norms_sq, weights, rho, KktVariant::FullSum)
}

pub fn kkt_power_allocation_with(
    norms_sq: &[f64],
    weights: &[f64],
    rho: f64,
    variant: KktVariant,
) -> Result<Vec<f64>> {
    check_rho(rho)?;
    if norms_sq.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} gains for {} weights",
            norms_sq.len(),
            weights.len()
        )));
    }
    if norms_sq.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(domain(format!("gains must be positive and finite, got {norms_sq:?}")));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(domain(format!("weights must be finite and ≥ 0, got {weights:?}")));
    }
    match variant {
        KktVariant::FullSum => Ok(weighted_waterfill(norms_sq, weights, rho)),
        KktVariant::ExcludeSelf => Ok(exclude_self(norms_sq, weights, rho)),
    }
}

fn weighted_waterfill(a: &[f64], mu: &[f64], rho: f64) -> Vec<f64> {
    // users enter in order of μ_ℓ a_ℓ; the active set is a prefix
    let mut order: Vec<usize> = (0..a.len()).filter(|&i| mu[i] > 0.0).collect();
    order.sort_by(|&i, &j| (mu[j] * a[j]).total_cmp(&(mu[i] * a[i])));
    let mut powers = vec![0.0; a.len()];
    let (mut inv_sum, mut mu_sum) = (0.0, 0.0);
    let mut active = 0;
    for (k, &i) in order.iter().enumerate() {
        let (s, m) = (inv_sum + 1.0 / a[i], mu_sum + mu[i]);
        let level = (rho + s) / m;
        if k > 0 && mu[i] * level - 1.0 / a[i] <= 0.0 {
            break;
        }
        inv_sum = s;
        mu_sum = m;
        active = k + 1;
    }
    let level = (rho + inv_sum) / mu_sum;
    for &i in &order[..active] {
        powers[i] = mu[i] * level - 1.0 / a[i];
    }
    powers
}

fn exclude_self(a: &[f64], mu: &[f64], rho: f64) -> Vec<f64> {
    let mut active: Vec<bool> = mu.iter().map(|&m| m > 0.0).collect();
    loop {
        let total_inv: f64 = (0..a.len()).filter(|&i| active[i]).map(|i| 1.0 / a[i]).sum();
        let p: Vec<f64> = (0..a.len())
            .map(|i| {
                if active[i] {
                    mu[i] * rho + mu[i] * (total_inv - 1.0 / a[i]) - 1.0 / a[i]
                } else {
                    0.0
                }
            })
            .collect();
        let negative: Vec<usize> = (0..a.len()).filter(|&i| active[i] && p[i] < 0.0).collect();
        if negative.is_empty() {
            return p;
        }
        negative.iter().for_each(|&i| active[i] = false);
    }
}

/// Weight-proportional allocation `ρ_ℓ = μ_ℓ ρ`.
pub fn asymptotic_allocation(weights: &[f64], rho: f64) -> Vec<f64> {
    weights.iter().map(|m| m * rho).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Dpc,
    Zf,
}

/// `Σ μ_ℓ log2(1 + ρ μ_ℓ |f_ℓ|²)` (DPC) or the same with `g_ℓ` (ZF).
pub fn weighted_capacity_affine(projections: &ProjectionSet, weights: &[f64], rho: f64, which: Scheme) -> f64 {
    let norms = match which {
        Scheme::Dpc => &projections.norms_sq_f,
        Scheme::Zf => &projections.norms_sq_g,
    };
    weights
        .iter()
        .zip(norms)
        .map(|(mu, a)| mu * (1.0 + rho * mu * a).log2())
        .sum()
}

/// `Σ μ_ℓ log2(|f_ℓ|² / |g_ℓ|²)`.
pub fn weighted_loss(projections: &ProjectionSet, weights: &[f64]) -> f64 {
    weights
        .iter()
        .zip(projections.norms_sq_f.iter().zip(&projections.norms_sq_g))
        .map(|(mu, (f, g))| mu * (f / g).log2())
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub struct WeightedSolverOptions {
    /// Frank–Wolfe duality gap, in bits, at which a start is accepted.
    pub gap_tolerance: f64,
    /// Gap accepted when the iteration cap is hit.
    pub fallback_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for WeightedSolverOptions {
    fn default() -> Self {
        Self { gap_tolerance: 1e-8, fallback_tolerance: 1e-6, max_iterations: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct WeightedSolution {
    pub value: f64,
    pub powers: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
}

/// Weighted DPC objective in reduced coordinates. With descending weights it
/// telescopes to `Σ_ℓ (μ_ℓ − μ_{ℓ+1}) log2 |S_ℓ|`, `S_ℓ = I + Σ_{j≤ℓ} ρ_j r_j^H r_j`.
struct Objective {
    rows: Vec<CRow>,
    steps: Vec<f64>,
}

impl Objective {
    fn new(instance: &WeightedInstance) -> Result<Self> {
        let red = RowSpaceReduction::new(&instance.h_rows)?;
        let l = instance.users();
        let rows = (0..l).map(|i| red.reduced.row(i).into_owned()).collect();
        let w = &instance.weights;
        let steps = (0..l).map(|i| w[i] - w.get(i + 1).copied().unwrap_or(0.0)).collect();
        Ok(Self { rows, steps })
    }

    /// Value (bits) and gradient (bits per unit power).
    fn eval(&self, p: &[f64], want_grad: bool) -> Result<(f64, Vec<f64>)> {
        let l = self.rows.len();
        let mut s = CMatrix::identity(l, l);
        let mut value = 0.0;
        let mut grad = vec![0.0; l];
        for ell in 0..l {
            let r = &self.rows[ell];
            s += r.adjoint() * r * Complex64::from(p[ell]);
            if self.steps[ell] == 0.0 {
                continue;
            }
            let chol = s
                .clone()
                .cholesky()
                .ok_or(Error::NotPositiveDefinite { min_eigenvalue: f64::NAN })?;
            let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum();
            value += self.steps[ell] * logdet / LN_2;
            if want_grad {
                for (j, gj) in grad.iter_mut().enumerate().take(ell + 1) {
                    let x = chol.solve(&self.rows[j].adjoint());
                    let q = (&self.rows[j] * x)[(0, 0)].re;
                    *gj += self.steps[ell] * q / LN_2;
                }
            }
        }
        Ok((value, grad))
    }
}

/// Euclidean projection onto `{x ≥ 0, Σ x = total}`.
fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - total) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn fw_gap(p: &[f64], grad: &[f64], total: f64) -> f64 {
    let best = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lin: f64 = p.iter().zip(grad).map(|(x, g)| x * g).sum();
    (total * best - lin).max(0.0)
}

fn ascend(obj: &Objective, start: Vec<f64>, rho: f64, opts: &WeightedSolverOptions) -> Result<WeightedSolution> {
    let mut p = project_simplex(&start, rho);
    let (mut value, mut grad) = obj.eval(&p, true)?;
    let gmax = grad.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut step = rho / gmax;
    let mut gap = fw_gap(&p, &grad, rho);
    let mut it = 0;
    while gap > opts.gap_tolerance && it < opts.max_iterations {
        it += 1;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = p.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
            let q = project_simplex(&trial, rho);
            let d2: f64 = q.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum();
            if d2 == 0.0 {
                break;
            }
            let lin: f64 = q.iter().zip(&p).zip(&grad).map(|((a, b), g)| (a - b) * g).sum();
            let (v, _) = obj.eval(&q, false)?;
            // Armijo condition for the projected step
            if v >= value + 0.5 * lin.min(d2 / step) - 1e-15 * value.abs() {
                p = q;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        let (v, g) = obj.eval(&p, true)?;
        value = v;
        grad = g;
        gap = fw_gap(&p, &grad, rho);
        if accepted {
            step *= 2.0;
        } else {
            break;
        }
    }
    Ok(WeightedSolution { value, powers: p, gap, iterations: it })
}

/// Weighted DPC objective at a given allocation.
pub fn weighted_dpc_objective(instance: &WeightedInstance, powers: &[f64]) -> Result<f64> {
    if powers.len() != instance.users() {
        return Err(Error::Dimension(format!(
            "{} powers for {} users",
            powers.len(),
            instance.users()
        )));
    }
    if powers.iter().any(|p| !(*p >= 0.0)) {
        return Err(domain(format!("powers must be ≥ 0, got {powers:?}")));
    }
    Ok(Objective::new(instance)?.eval(powers, false)?.0)
}

/// Maximum weighted DPC sum capacity, in bits.
pub fn weighted_dpc_exact(instance: &WeightedInstance) -> Result<f64> {
    Ok(weighted_dpc_solve(instance, &WeightedSolverOptions::default())?.value)
}

/// Projected-gradient ascent from the asymptotic, uniform and decoupled-KKT
/// points; the best start whose certified gap meets the tolerance wins.
pub fn weighted_dpc_solve(instance: &WeightedInstance, opts: &WeightedSolverOptions) -> Result<WeightedSolution> {
    let obj = Objective::new(instance)?;
    let (l, rho) = (instance.users(), instance.rho);
    let proj = successive_projections(&instance.h_rows)?;
    let starts = [
        asymptotic_allocation(&instance.weights, rho),
        vec![rho / l as f64; l],
        kkt_power_allocation(&proj.norms_sq_f, &instance.weights, rho)?,
    ];
    let mut best: Option<WeightedSolution> = None;
    for start in starts {
        let sol = ascend(&obj, start, rho, opts)?;
        if best.as_ref().is_none_or(|b| sol.value > b.value) {
            best = Some(sol);
        }
    }
    let best = best.expect("at least one start");
    if best.gap <= opts.gap_tolerance || best.gap <= opts.fallback_tolerance {
        Ok(best)
    } else {
        Err(Error::NoConvergence {
            solver: "weighted DPC projected gradient",
            iterations: best.iterations,
            objective: best.value,
            gap: best.gap,
        })
    }
}
