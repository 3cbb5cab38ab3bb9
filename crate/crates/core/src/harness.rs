//! Monte Carlo orchestration.
//!
//! Each trial draws user profiles and one composite channel from its own
//! RNG substream, then evaluates every requested metric at every SNR point
//! on that same channel. Trials are mapped in parallel and reduced in trial
//! order, so results are bit-identical for any worker count.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analytic::{expected_loss_dpc_zf_analytic, AnalyticOptions, WishartSpec};
use crate::capacity::{bd_sum_capacity, dpc_sum_capacity, loss_dpc_bd, loss_dpc_zf, zf_sum_capacity};
use crate::channel::{db_to_linear, draw_channel, draw_user_profiles, KappaLaw, SystemConfig};
use crate::error::domain;
use crate::linalg::{hermitian_eigenvalues, row_gram, CompensatedSum};
use crate::parallel::map_indexed;
use crate::precoding::{bd_precoder, zf_precoder, PrecoderSet};
use crate::weighted::{
    asymptotic_allocation, successive_projections, weighted_dpc_objective, weighted_dpc_solve, weighted_loss,
    WeightedInstance, WeightedSolverOptions,
};
use crate::{CMatrix, Error, Result};

/// Default Monte Carlo trials per SNR point.
pub const DEFAULT_TRIALS: usize = 2000;
/// Largest tolerated fraction of numerically failed trials.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    CDpc,
    CZf,
    CBd,
    /// SNR-free DPC–ZF loss per realization, averaged.
    LossMc,
    /// SNR-free DPC–BD loss per realization, averaged.
    LossBdMc,
    /// Closed-form expected DPC–ZF loss, averaged over profile draws.
    LossAnalytic,
    GapDpcZf,
    GapDpcBd,
    /// Exact weighted DPC capacity minus its value at `ρ_ℓ = μ_ℓ ρ`.
    WeightedGap,
    WeightedLoss,
    /// `10 log10` of the mean condition number `λ_max/λ_min` of `H H^H`.
    ConditionNumberDb,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::CDpc,
        Metric::CZf,
        Metric::CBd,
        Metric::LossMc,
        Metric::LossBdMc,
        Metric::LossAnalytic,
        Metric::GapDpcZf,
        Metric::GapDpcBd,
        Metric::WeightedGap,
        Metric::WeightedLoss,
        Metric::ConditionNumberDb,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Metric::CDpc => "c_dpc",
            Metric::CZf => "c_zf",
            Metric::CBd => "c_bd",
            Metric::LossMc => "loss_mc",
            Metric::LossBdMc => "loss_bd_mc",
            Metric::LossAnalytic => "loss_analytic",
            Metric::GapDpcZf => "gap_dpc_zf",
            Metric::GapDpcBd => "gap_dpc_bd",
            Metric::WeightedGap => "weighted_gap",
            Metric::WeightedLoss => "weighted_loss",
            Metric::ConditionNumberDb => "condition_number_db",
        }
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, Metric::WeightedGap | Metric::WeightedLoss)
    }

    fn needs_dpc(self) -> bool {
        matches!(self, Metric::CDpc | Metric::GapDpcZf | Metric::GapDpcBd)
    }

    fn needs_zf(self) -> bool {
        matches!(self, Metric::CZf | Metric::LossMc | Metric::GapDpcZf)
    }

    fn needs_bd(self) -> bool {
        matches!(self, Metric::CBd | Metric::LossBdMc | Metric::GapDpcBd)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MonteCarlo,
    Analytic,
}

/// Expected loss in bits with its 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEstimate {
    pub value: f64,
    pub method: Method,
    pub half_width_95: f64,
    pub trials_used: usize,
}

/// One system configuration and K-factor law inside an experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub config: SystemConfig,
    pub kappa_law: KappaLaw,
    /// Descending user weights; required by the weighted metrics.
    pub weights: Option<Vec<f64>>,
    pub metrics: Vec<Metric>,
    /// Replaces the random channel in every trial (fixtures).
    pub fixed_channel: Option<CMatrix>,
    pub analytic: AnalyticOptions,
}

impl Scenario {
    pub fn new(label: impl Into<String>, config: SystemConfig, kappa_law: KappaLaw, metrics: Vec<Metric>) -> Self {
        Self {
            label: label.into(),
            config,
            kappa_law,
            weights: None,
            metrics,
            fixed_channel: None,
            analytic: AnalyticOptions::default(),
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn with_fixed_channel(mut self, h: CMatrix) -> Self {
        self.fixed_channel = Some(h);
        self
    }

    /// Every invariant violation, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.config.violations();
        if let Err(e) = self.kappa_law.validate(self.config.l) {
            out.push(e.to_string());
        }
        if self.metrics.is_empty() {
            out.push("no metrics requested".into());
        }
        if let Some(w) = &self.weights {
            if w.len() != self.config.l {
                out.push(format!("{} weights for {} users", w.len(), self.config.l));
            }
            if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                out.push(format!("weights must be finite and ≥ 0, got {w:?}"));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                out.push(format!("weights must sum to 1, got {sum}"));
            }
            if w.windows(2).any(|p| p[0] < p[1]) {
                out.push(format!("weights must be sorted descending, got {w:?}"));
            }
        }
        if self.metrics.iter().any(|m| m.is_weighted()) {
            if self.config.n != 1 {
                out.push(format!("weighted metrics need N = 1, got N = {}", self.config.n));
            }
            if self.weights.is_none() {
                out.push("weighted metrics need user weights".into());
            }
        }
        if self.metrics.contains(&Metric::LossAnalytic) && self.config.n != 1 {
            out.push(format!("loss_analytic needs N = 1, got N = {}", self.config.n));
        }
        if self.metrics.contains(&Metric::LossAnalytic) && self.config.m <= self.config.streams() {
            out.push(format!(
                "loss_analytic needs M > L·N (M = {}, L·N = {})",
                self.config.m,
                self.config.streams()
            ));
        }
        if let Some(h) = &self.fixed_channel {
            if h.shape() != (self.config.streams(), self.config.m) {
                out.push(format!(
                    "fixed channel is {}x{}, expected {}x{}",
                    h.nrows(),
                    h.ncols(),
                    self.config.streams(),
                    self.config.m
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub scenarios: Vec<Scenario>,
    pub trials: usize,
    pub seed: u64,
}

impl Experiment {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.trials < 1 {
            out.push("trials must be at least 1".into());
        }
        if self.scenarios.is_empty() {
            out.push("experiment has no scenarios".into());
        }
        for s in &self.scenarios {
            out.extend(s.violations().into_iter().map(|v| format!("{}: {v}", s.label)));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().first() {
            Some(_) => Err(Error::Config(self.violations().join("; "))),
            None => Ok(()),
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// One `(scenario, SNR, metric)` cell of the result table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// `experiment.scenario`.
    pub scenario: String,
    pub snr_db: f64,
    pub metric: Metric,
    pub mean: f64,
    pub half_width_95: f64,
    pub trials: usize,
}

impl ResultRow {
    pub fn loss_estimate(&self) -> LossEstimate {
        let method = match self.metric {
            Metric::LossAnalytic => Method::Analytic,
            _ => Method::MonteCarlo,
        };
        LossEstimate { value: self.mean, method, half_width_95: self.half_width_95, trials_used: self.trials }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub name: String,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
    /// Excluded trials per scenario, in scenario order.
    pub failed_trials: Vec<usize>,
}

impl ExperimentResult {
    pub fn row(&self, scenario: &str, snr_db: f64, metric: Metric) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.scenario.ends_with(scenario) && r.snr_db == snr_db && r.metric == metric)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// RNG for one trial: the key mixes the seed with the scenario index, the
/// stream is the trial index.
pub fn trial_rng(seed: u64, scenario: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(scenario as u64)));
    rng.set_stream(trial as u64);
    rng
}

/// Mean and `1.96 s / sqrt(n)`.
pub fn mean_and_half_width(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean).powi(2)).collect::<CompensatedSum>().value();
    let sd = (ss / (n - 1) as f64).sqrt();
    (mean, 1.96 * sd / (n as f64).sqrt())
}

struct TrialState {
    h: CMatrix,
    zf: Option<PrecoderSet>,
    bd: Option<PrecoderSet>,
}

/// Metric values of one trial, laid out `[snr][metric]`.
fn evaluate_trial(sc: &Scenario, seed: u64, index: usize, trial: usize) -> Result<Vec<f64>> {
    let cfg = &sc.config;
    let mut rng = trial_rng(seed, index, trial);
    let mut profiles = draw_user_profiles(cfg, &sc.kappa_law, &mut rng)?;
    if let Some(w) = &sc.weights {
        profiles.iter_mut().zip(w).for_each(|(p, &w)| p.weight = w);
    }
    let drawn = draw_channel(cfg, &profiles, &mut rng)?;
    let h = sc.fixed_channel.clone().unwrap_or(drawn.h);
    let wants = |f: fn(Metric) -> bool| sc.metrics.iter().any(|&m| f(m));
    let state = TrialState {
        zf: if wants(Metric::needs_zf) { Some(zf_precoder(&h, cfg.n)?) } else { None },
        bd: if wants(Metric::needs_bd) {
            let blocks: Vec<CMatrix> = (0..cfg.l).map(|u| h.rows(u * cfg.n, cfg.n).into_owned()).collect();
            Some(bd_precoder(&blocks)?)
        } else {
            None
        },
        h,
    };

    // SNR-free metrics
    let mut fixed = vec![f64::NAN; sc.metrics.len()];
    for (i, m) in sc.metrics.iter().enumerate() {
        fixed[i] = match m {
            Metric::LossMc => loss_dpc_zf(&state.h, state.zf.as_ref().expect("zf"))?,
            Metric::LossBdMc => loss_dpc_bd(&state.h, state.bd.as_ref().expect("bd"))?,
            Metric::LossAnalytic => {
                let spec = WishartSpec::from_profiles(&profiles, cfg.m, cfg.n, cfg.d_over_lambda)?;
                expected_loss_dpc_zf_analytic(&spec, &sc.analytic)?.value
            }
            Metric::WeightedLoss => {
                let proj = successive_projections(&state.h)?;
                weighted_loss(&proj, sc.weights.as_deref().expect("weights"))
            }
            Metric::ConditionNumberDb => {
                let ev = hermitian_eigenvalues(&row_gram(&state.h));
                let (lo, hi) = (ev[0], ev[ev.len() - 1]);
                if !(lo > 0.0) {
                    return Err(Error::RankDeficient { min_singular_value: lo.max(0.0).sqrt() });
                }
                hi / lo
            }
            _ => continue,
        };
    }

    let nm = sc.metrics.len();
    let mut out = vec![0.0; cfg.snr_grid_db.len() * nm];
    for (s, &snr) in cfg.snr_grid_db.iter().enumerate() {
        let rho = db_to_linear(snr);
        let c_dpc = if wants(Metric::needs_dpc) { dpc_sum_capacity(&state.h, cfg.n, rho)? } else { f64::NAN };
        let c_zf = match &state.zf {
            Some(zf) => zf_sum_capacity(zf, rho)?,
            None => f64::NAN,
        };
        let c_bd = match &state.bd {
            Some(bd) => bd_sum_capacity(bd, rho)?,
            None => f64::NAN,
        };
        for (i, m) in sc.metrics.iter().enumerate() {
            out[s * nm + i] = match m {
                Metric::CDpc => c_dpc,
                Metric::CZf => c_zf,
                Metric::CBd => c_bd,
                Metric::GapDpcZf => c_dpc - c_zf,
                Metric::GapDpcBd => c_dpc - c_bd,
                Metric::WeightedGap => {
                    let w = sc.weights.clone().expect("weights");
                    let inst = WeightedInstance::new(state.h.clone(), w, rho)?;
                    let exact = weighted_dpc_solve(&inst, &WeightedSolverOptions::default())?.value;
                    exact - weighted_dpc_objective(&inst, &asymptotic_allocation(&inst.weights, rho))?
                }
                _ => fixed[i],
            };
        }
    }
    Ok(out)
}

/// Runs every scenario of `exp` with `workers` threads (`0` = all cores).
pub fn run_experiment(exp: &Experiment, workers: usize) -> Result<ExperimentResult> {
    exp.validate()?;
    let mut rows = Vec::new();
    let mut failed_trials = Vec::new();
    for (index, sc) in exp.scenarios.iter().enumerate() {
        let outcomes = map_indexed(exp.trials, workers, |t| evaluate_trial(sc, exp.seed, index, t));
        let mut ok = Vec::with_capacity(outcomes.len());
        let mut failed = 0;
        let mut first = None;
        for o in outcomes {
            match o {
                Ok(v) => ok.push(v),
                Err(e) => {
                    failed += 1;
                    first.get_or_insert(e.to_string());
                }
            }
        }
        if ok.is_empty() || failed as f64 > MAX_FAILURE_FRACTION * exp.trials as f64 {
            return Err(Error::TooManyFailures {
                failed,
                total: exp.trials,
                first: first.unwrap_or_default(),
            });
        }
        failed_trials.push(failed);
        let nm = sc.metrics.len();
        let mut column = vec![0.0; ok.len()];
        for (s, &snr) in sc.config.snr_grid_db.iter().enumerate() {
            for (i, &metric) in sc.metrics.iter().enumerate() {
                ok.iter().zip(column.iter_mut()).for_each(|(v, c)| *c = v[s * nm + i]);
                let (mut mean, mut hw) = mean_and_half_width(&column);
                if metric == Metric::ConditionNumberDb {
                    // delta method for 10 log10 of the mean
                    hw = 10.0 / std::f64::consts::LN_10 * hw / mean;
                    mean = 10.0 * mean.log10();
                }
                rows.push(ResultRow {
                    scenario: format!("{}.{}", exp.name, sc.label),
                    snr_db: snr,
                    metric,
                    mean,
                    half_width_95: hw,
                    trials: ok.len(),
                });
            }
        }
    }
    Ok(ExperimentResult { name: exp.name.clone(), seed: exp.seed, rows, failed_trials })
}

/// Monte Carlo expected loss of one scenario (`loss_mc` or `loss_bd_mc`).
pub fn estimate_loss(sc: &Scenario, metric: Metric, trials: usize, seed: u64, workers: usize) -> Result<LossEstimate> {
    if !matches!(metric, Metric::LossMc | Metric::LossBdMc | Metric::LossAnalytic) {
        return Err(domain(format!("{metric} is not a loss metric")));
    }
    let mut sc = sc.clone();
    sc.metrics = vec![metric];
    sc.config.snr_grid_db = vec![0.0];
    let exp = Experiment { name: "loss".into(), scenarios: vec![sc], trials, seed };
    Ok(run_experiment(&exp, workers)?.rows[0].loss_estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity_experiment(trials: usize) -> Experiment {
        let cfg = SystemConfig::new(2, 2, 1).with_snr_grid(vec![10.0 * 2f64.log10()]);
        let sc = Scenario::new("eye", cfg, KappaLaw::Rayleigh, vec![Metric::CDpc])
            .with_fixed_channel(CMatrix::identity(2, 2));
        Experiment { name: "fixture".into(), scenarios: vec![sc], trials, seed: 1 }
    }

    #[test]
    fn identity_fixture() {
        let res = run_experiment(&identity_experiment(1), 1).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert_abs_diff_eq!(res.rows[0].mean, 2.0, epsilon = 1e-9);
        assert_eq!(res.rows[0].half_width_95, 0.0);
        assert_eq!(res.rows[0].trials, 1);
        assert_eq!(res.rows[0].scenario, "fixture.eye");
    }

    #[test]
    fn metric_ids_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.id().parse::<Metric>().unwrap(), m);
        }
        assert!("nope".parse::<Metric>().is_err());
    }

    #[test]
    fn half_width() {
        let (m, hw) = mean_and_half_width(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_abs_diff_eq!(hw, 1.96 * 2f64.sqrt() / 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(mean_and_half_width(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn rng_streams_differ() {
        use rand::Rng;
        let a: u64 = trial_rng(1, 0, 0).random();
        let b: u64 = trial_rng(1, 0, 1).random();
        let c: u64 = trial_rng(1, 1, 0).random();
        let d: u64 = trial_rng(1, 0, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, d);
    }

    #[test]
    fn weighted_metrics_need_weights() {
        let cfg = SystemConfig::new(8, 2, 1);
        let sc = Scenario::new("w", cfg, KappaLaw::Rayleigh, vec![Metric::WeightedGap]);
        assert!(!sc.violations().is_empty());
        let ok = sc.clone().with_weights(vec![0.6, 0.4]);
        assert!(ok.violations().is_empty());
        let bad = sc.with_weights(vec![0.6, 0.5]);
        assert!(bad.violations().iter().any(|v| v.contains("sum to 1")));
    }

    #[test]
    fn invalid_trials() {
        assert!(run_experiment(&identity_experiment(0), 1).is_err());
    }
}
