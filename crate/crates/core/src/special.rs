//! Special functions behind the closed-form loss expressions.
//!
//! Results documented "in bits" are natural-log quantities divided by `ln 2`.

use std::f64::consts::LN_2;

use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::domain;
use crate::linalg::hermitian_eigenvalues;
use crate::{CMatrix, Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest argument for which `exp` is finite.
const EXP_OVERFLOW: f64 = 709.782_712_893_384;

/// Exponential integral `Ei(x)`, the Cauchy principal value of
/// `∫_{-∞}^{x} e^t / t dt`. For negative arguments `Ei(x) = -E1(-x)`.
pub fn exp_integral_ei(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(domain("Ei(NaN)"));
    }
    if x == 0.0 {
        return Err(domain("Ei has a logarithmic singularity at 0"));
    }
    if x < 0.0 {
        let z = -x;
        return Ok(if z <= 1.0 { ei_series(x) } else { -e1_continued_fraction(z) });
    }
    if x > EXP_OVERFLOW {
        return Err(Error::Range(format!("Ei({x}) overflows")));
    }
    let v = if x <= 40.0 { ei_series(x) } else { ei_asymptotic(x) };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Range(format!("Ei({x}) overflows")))
    }
}

/// `γ + ln|x| + Σ x^k / (k·k!)`.
fn ei_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..500 {
        let kf = k as f64;
        term *= x / kf;
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() <= f64::EPSILON * sum.abs() {
            break;
        }
    }
    EULER_GAMMA + x.abs().ln() + sum
}

/// `E1(z)` for `z > 1` by the modified Lentz evaluation of
/// `e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))`.
fn e1_continued_fraction(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

/// `e^x / x · Σ k! / x^k`, truncated at the smallest term.
fn ei_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..100 {
        let next = term * k as f64 / x;
        if next >= term || next < f64::EPSILON * sum {
            break;
        }
        term = next;
        sum += term;
    }
    // split the exponential so e^x / x stays finite up to the overflow limit
    ((x / 2.0).exp() / x) * (x / 2.0).exp() * sum
}

/// `log2 |A|` for a Hermitian positive-definite `A`, via Cholesky.
pub fn log_det_hermitian(a: &CMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let asym = a
        .iter()
        .zip(a.adjoint().iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    if asym > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(domain("matrix is not Hermitian"));
    }
    match a.clone().cholesky() {
        Some(chol) => {
            let l = chol.l_dirty();
            // pivots at rounding level mean numerically singular
            let floor = n as f64 * f64::EPSILON * scale;
            let mut s = 0.0;
            for i in 0..n {
                let d = l[(i, i)].re;
                if !(d * d > floor) {
                    return Err(Error::NotPositiveDefinite { min_eigenvalue: min_eig(a) });
                }
                s += d.ln();
            }
            Ok(2.0 * s / LN_2)
        }
        None => Err(Error::NotPositiveDefinite { min_eigenvalue: min_eig(a) }),
    }
}

fn min_eig(a: &CMatrix) -> f64 {
    hermitian_eigenvalues(a).first().copied().unwrap_or(f64::NAN)
}

/// Expected `log2 ‖h‖²` for `h ~ CN(m, I_M)` with `‖m‖² = λ`.
///
/// Closed form in nats:
///
/// ```text
/// ln λ − Ei(−λ) + Σ_{k=1}^{M−1} (−1/λ)^k [ e^{−λ} (k−1)! − (M−1)! / (k (M−1−k)!) ]
/// ```
///
/// The alternating sum cancels badly once its terms exceed O(1), which
/// happens for `λ` small relative to `M`. There the equivalent Poisson
/// mixture `Σ_j Pois(j; λ) ψ(M + j)` is summed instead.
pub fn delta_m(lambda: f64, m: usize) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(domain(format!("Δ_M requires λ > 0, got {lambda}")));
    }
    if m == 0 {
        return Err(domain("Δ_M requires M ≥ 1"));
    }
    if closed_form_max_log_term(lambda, m) <= CLOSED_FORM_LOG_LIMIT {
        delta_m_closed_form(lambda, m)
    } else {
        Ok(delta_m_poisson_mixture(lambda, m))
    }
}

// Terms up to e^2 keep the cancellation error near 1e-14.
const CLOSED_FORM_LOG_LIMIT: f64 = 2.0;

fn closed_form_max_log_term(lambda: f64, m: usize) -> f64 {
    let ln_l = lambda.ln();
    let ln_fact_m1 = ln_gamma(m as f64);
    (1..m)
        .map(|k| {
            let kf = k as f64;
            let a = -lambda + ln_gamma(kf) - kf * ln_l;
            let b = ln_fact_m1 - kf.ln() - ln_gamma((m - k) as f64) - kf * ln_l;
            a.max(b)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Closed-form evaluation (bits); factorials via log-gamma.
pub fn delta_m_closed_form(lambda: f64, m: usize) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(domain(format!("Δ_M requires λ > 0, got {lambda}")));
    }
    let ln_l = lambda.ln();
    let ln_fact_m1 = ln_gamma(m as f64);
    let mut sum = 0.0;
    for k in 1..m {
        let kf = k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let a = (-lambda + ln_gamma(kf) - kf * ln_l).exp();
        let b = (ln_fact_m1 - kf.ln() - ln_gamma((m - k) as f64) - kf * ln_l).exp();
        sum += sign * (a - b);
    }
    let nats = -exp_integral_ei(-lambda)? + sum;
    Ok(lambda.log2() + nats / LN_2)
}

/// Poisson-mixture evaluation (bits): a non-central `‖h‖²` is a Poisson(λ)
/// mixture of Gamma(M + j, 1) variables, each with `E ln = ψ(M + j)`.
pub fn delta_m_poisson_mixture(lambda: f64, m: usize) -> f64 {
    let mode = lambda.floor();
    let ln_l = lambda.ln();
    let log_weight = |j: f64| -lambda + j * ln_l - ln_gamma(j + 1.0);
    let mut acc = 0.0;
    // upward from the mode
    let mut j = mode;
    let mut psi = digamma(m as f64 + j);
    loop {
        let w = log_weight(j).exp();
        acc += w * psi;
        if w < 1e-18 && j > lambda {
            break;
        }
        psi += 1.0 / (m as f64 + j);
        j += 1.0;
    }
    // downward from the mode
    let mut j = mode;
    let mut psi = digamma(m as f64 + j);
    while j > 0.0 {
        psi -= 1.0 / (m as f64 + j - 1.0);
        j -= 1.0;
        let w = log_weight(j).exp();
        acc += w * psi;
        if w < 1e-18 {
            break;
        }
    }
    acc / LN_2
}

/// `E log2 |H H^H|` for an `L x M` matrix of i.i.d. CN(0, 1) entries:
/// `Σ_{k=0}^{L−1} ψ(M − k) / ln 2`.
pub fn central_wishart_logdet_mean(m: usize, l: usize) -> Result<f64> {
    if l == 0 || m < l {
        return Err(domain(format!("central Wishart log-det needs M ≥ L ≥ 1 (M = {m}, L = {l})")));
    }
    Ok((0..l).map(|k| digamma((m - k) as f64)).sum::<f64>() / LN_2)
}
