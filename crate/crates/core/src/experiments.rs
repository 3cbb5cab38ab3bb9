//! Preset experiments for the four figure reproductions.
//!
//! Common setting: ULA with half-wavelength spacing at 3.7 GHz, 100 m cell,
//! LOS departure angles uniform over the azimuth, `M = 64` with either
//! `L = 8, N = 1` (DPC vs ZF) or `L = 4, N = 2` (DPC vs BD).

use crate::channel::{KappaLaw, SystemConfig};
use crate::harness::{Experiment, Metric, Scenario, DEFAULT_TRIALS};

/// Carrier frequency of the presets, recorded in run metadata.
pub const CARRIER_HZ: f64 = 3.7e9;

pub const FIG4_WEIGHTS: [f64; 2] = [0.6, 0.4];
pub const FIG4_FIXED_KAPPA_DB: f64 = 9.0;

fn snr_grid() -> Vec<f64> {
    (0..=8).map(|i| -10.0 + 5.0 * i as f64).collect()
}

fn lognormal() -> KappaLaw {
    KappaLaw::LogNormal { mean_db: 9.0, var_db: 5.0 }
}

fn config(m: usize, l: usize, n: usize) -> SystemConfig {
    SystemConfig::new(m, l, n).with_snr_grid(snr_grid())
}

fn zf_metrics() -> Vec<Metric> {
    vec![Metric::CDpc, Metric::CZf, Metric::GapDpcZf]
}

fn bd_metrics() -> Vec<Metric> {
    vec![Metric::CDpc, Metric::CBd, Metric::GapDpcBd]
}

/// Expected sum capacity under Rayleigh, 1 dB and 20 dB K-factors.
pub fn fig1() -> Experiment {
    let cases = [
        ("rayleigh", KappaLaw::Rayleigh),
        ("kappa_1db", KappaLaw::Fixed { db: 1.0 }),
        ("kappa_20db", KappaLaw::Fixed { db: 20.0 }),
    ];
    let mut scenarios = Vec::new();
    for (tag, law) in cases {
        let mut zf = zf_metrics();
        zf.push(Metric::ConditionNumberDb);
        scenarios.push(Scenario::new(format!("{tag}.l8n1"), config(64, 8, 1), law.clone(), zf));
        scenarios.push(Scenario::new(format!("{tag}.l4n2"), config(64, 4, 2), law, bd_metrics()));
    }
    Experiment { name: "fig1".into(), scenarios, trials: DEFAULT_TRIALS, seed: 0 }
}

/// Expected sum capacity with lognormal K-factors for `M = 64` and `M = 32`.
pub fn fig2() -> Experiment {
    let scenarios = [64, 32]
        .into_iter()
        .flat_map(|m| {
            [
                Scenario::new(format!("m{m}.l8n1"), config(m, 8, 1), lognormal(), zf_metrics()),
                Scenario::new(format!("m{m}.l4n2"), config(m, 4, 2), lognormal(), bd_metrics()),
            ]
        })
        .collect();
    Experiment { name: "fig2".into(), scenarios, trials: DEFAULT_TRIALS, seed: 0 }
}

/// Expected DPC–ZF and DPC–BD loss, simulated and closed form.
pub fn fig3() -> Experiment {
    let scenarios = vec![
        Scenario::new(
            "l8n1",
            config(64, 8, 1),
            lognormal(),
            vec![Metric::LossMc, Metric::LossAnalytic, Metric::GapDpcZf],
        ),
        Scenario::new("l4n2", config(64, 4, 2), lognormal(), vec![Metric::LossBdMc, Metric::GapDpcBd]),
    ];
    Experiment { name: "fig3".into(), scenarios, trials: DEFAULT_TRIALS, seed: 0 }
}

/// Exact minus weight-proportional weighted DPC capacity on three
/// realizations.
pub fn fig4() -> Experiment {
    let law = KappaLaw::PerUser(vec![KappaLaw::Fixed { db: FIG4_FIXED_KAPPA_DB }, lognormal()]);
    let cfg = SystemConfig::new(32, 2, 1).with_snr_grid((0..=6).map(|i| 5.0 * i as f64).collect());
    let sc = Scenario::new("l2n1", cfg, law, vec![Metric::WeightedGap, Metric::WeightedLoss])
        .with_weights(FIG4_WEIGHTS.to_vec());
    Experiment { name: "fig4".into(), scenarios: vec![sc], trials: 3, seed: 0 }
}

pub fn builtin_experiments() -> Vec<Experiment> {
    vec![fig1(), fig2(), fig3(), fig4()]
}

pub fn find_experiment(name: &str) -> Option<Experiment> {
    builtin_experiments().into_iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for e in builtin_experiments() {
            assert!(e.violations().is_empty(), "{}: {:?}", e.name, e.violations());
        }
    }

    #[test]
    fn fig4_weights() {
        let e = fig4();
        assert_eq!(e.scenarios[0].weights.as_deref(), Some(&[0.6, 0.4][..]));
        let c = &e.scenarios[0].config;
        assert_eq!((c.m, c.l, c.n), (32, 2, 1));
        assert_eq!(e.trials, 3);
    }

    #[test]
    fn fig2_antenna_counts() {
        let mut ms: Vec<usize> = fig2().scenarios.iter().map(|s| s.config.m).collect();
        ms.dedup();
        assert_eq!(ms, vec![64, 32]);
    }

    #[test]
    fn fig1_kappa_cases() {
        let laws: Vec<KappaLaw> = fig1().scenarios.iter().map(|s| s.kappa_law.clone()).collect();
        assert!(laws.contains(&KappaLaw::Rayleigh));
        assert!(laws.contains(&KappaLaw::Fixed { db: 1.0 }));
        assert!(laws.contains(&KappaLaw::Fixed { db: 20.0 }));
        for s in fig1().scenarios {
            assert_eq!(s.config.m, 64);
            assert_eq!(s.config.d_over_lambda, 0.5);
            assert_eq!(s.config.cell_radius_m, 100.0);
        }
    }

    #[test]
    fn lookup() {
        assert!(find_experiment("fig3").is_some());
        assert!(find_experiment("nosuch").is_none());
    }
}
