//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sumcap_core::channel::complex_gaussian;
use sumcap_core::{CMatrix, Complex64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows x cols` matrix of i.i.d. standard complex Gaussians.
pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `Ei(x)` for `x < 0` as `−E1(−x)`, with `E1(z) = ∫_0^∞ exp(−z e^u) du`
/// integrated by composite Gauss–Legendre.
pub fn ei_quadrature(x: f64) -> f64 {
    assert!(x < 0.0);
    let z = -x;
    let upper = (750.0 / z).ln().max(1.0);
    let panels = 4000;
    let nodes = gauss_legendre(10);
    let h = upper / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for &(t, w) in &nodes {
            let u = mid + 0.5 * h * t;
            total += 0.5 * h * w * (-z * u.exp()).exp();
        }
    }
    -total
}

/// Mean and standard error of `log2 |h|²` for `h ~ CN(μ, I_M)`, `|μ|² = λ`.
pub fn delta_monte_carlo(lambda: f64, m: usize, draws: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let shift = Complex64::new(lambda.sqrt(), 0.0);
    let samples: Vec<f64> = (0..draws)
        .map(|_| {
            let mut s = (shift + complex_gaussian(&mut r)).norm_sqr();
            for _ in 1..m {
                s += complex_gaussian(&mut r).norm_sqr();
            }
            s.log2()
        })
        .collect();
    mean_se(&samples)
}

pub fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `log2 |A|` of a Hermitian positive-definite matrix through its eigenvalues.
pub fn log2_det_eig(a: &CMatrix) -> f64 {
    nalgebra::SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .map(|e| e.log2())
        .sum()
}

/// Largest relative cross-talk `|h_i w_j| / (|h_i| |w_j|)` for `i ≠ j`
/// between rows of `h` and the columns of `w`, grouped by `n`.
pub fn max_leakage(h: &CMatrix, w: &[CMatrix], n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (u, wu) in w.iter().enumerate() {
        for r in 0..h.nrows() {
            if r / n == u {
                continue;
            }
            let row = h.row(r);
            for c in 0..wu.ncols() {
                let col = wu.column(c);
                let v = (row * col)[(0, 0)].norm() / (row.norm() * col.norm());
                worst = worst.max(v);
            }
        }
    }
    worst
}

/// Block leakage `max_{i≠ℓ} ‖H_ℓ W_i‖ / (‖H_ℓ‖ ‖W_i‖)`.
pub fn max_block_leakage(blocks: &[CMatrix], w: &[CMatrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for (l, hl) in blocks.iter().enumerate() {
        for (i, wi) in w.iter().enumerate() {
            if i != l {
                worst = worst.max((hl * wi).norm() / (hl.norm() * wi.norm()));
            }
        }
    }
    worst
}

pub fn split_blocks(h: &CMatrix, n: usize) -> Vec<CMatrix> {
    (0..h.nrows() / n).map(|u| h.rows(u * n, n).into_owned()).collect()
}
