//! Plain-text experiment configuration.
//!
//! One `section.key = value` entry per line, `#` starts a comment, lists are
//! comma separated, and SNR and K-factor values may carry a `dB` suffix.
//!
//! ```text
//! system.m = 64
//! system.l = 8
//! system.n = 1
//! system.snr_db = -10, 0, 10, 20, 30 dB
//! kappa.law = lognormal
//! kappa.mean_db = 9 dB
//! kappa.var_db = 5
//! experiment.name = lognormal_m64
//! experiment.metrics = c_dpc, c_zf, loss_mc
//! ```
//!
//! `kappa.law` is `rayleigh`, `fixed` or `lognormal`, or a per-user list of
//! those. `experiment.preset = <name>` starts from a built-in experiment
//! instead; only `experiment.trials` and `system.seed` may accompany it.

use std::collections::BTreeMap;
use std::fmt::Write;

use sumcap_core::channel::{KappaLaw, SystemConfig};
use sumcap_core::experiments::find_experiment;
use sumcap_core::harness::{Experiment, Metric, Scenario, DEFAULT_TRIALS};
use sumcap_core::report::format_sig9;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Count,
    Unsigned,
    Real,
    Decibel,
    DecibelList,
    RealList,
    Words,
    Word,
}

const KEYS: &[(&str, Kind)] = &[
    ("system.m", Kind::Count),
    ("system.l", Kind::Count),
    ("system.n", Kind::Count),
    ("system.d_over_lambda", Kind::Real),
    ("system.snr_db", Kind::DecibelList),
    ("system.cell_radius_m", Kind::Real),
    ("system.seed", Kind::Unsigned),
    ("kappa.law", Kind::Words),
    ("kappa.mean_db", Kind::Decibel),
    ("kappa.var_db", Kind::Decibel),
    ("kappa.value_db", Kind::Decibel),
    ("users.weights", Kind::RealList),
    ("experiment.name", Kind::Word),
    ("experiment.preset", Kind::Word),
    ("experiment.trials", Kind::Count),
    ("experiment.metrics", Kind::Words),
];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Int(u64),
    Real(f64),
    Reals(Vec<f64>),
    Words(Vec<String>),
    Word(String),
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: Value,
    line: usize,
    column: usize,
}

/// Parsed, type-checked entries keyed by `section.key`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, Entry>,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse { line, column, message: message.into() }
}

fn strip_db(token: &str) -> &str {
    let t = token.trim_end();
    if t.len() >= 2 && t[t.len() - 2..].eq_ignore_ascii_case("db") {
        t[..t.len() - 2].trim_end()
    } else {
        t
    }
}

fn parse_real(token: &str, line: usize, column: usize) -> Result<f64, ConfigError> {
    let t = token.trim();
    t.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| parse_error(line, column, format!("expected a number, found `{t}`")))
}

/// Splits on commas, returning each trimmed token with its 1-based column.
fn tokens(value: &str, column: usize) -> Vec<(&str, usize)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for piece in value.split(',') {
        let lead = piece.len() - piece.trim_start().len();
        out.push((piece.trim(), column + offset + lead));
        offset += piece.len() + 1;
    }
    out
}

fn parse_value(kind: Kind, raw: &str, line: usize, column: usize) -> Result<Value, ConfigError> {
    let list = tokens(raw, column);
    if list.iter().any(|(t, _)| t.is_empty()) {
        let col = list.iter().find(|(t, _)| t.is_empty()).map(|(_, c)| *c).unwrap_or(column);
        return Err(parse_error(line, col, "empty value"));
    }
    let single = || -> Result<(&str, usize), ConfigError> {
        match list.as_slice() {
            [one] => Ok(*one),
            _ => Err(parse_error(line, list[1].1, "expected a single value")),
        }
    };
    match kind {
        Kind::Count | Kind::Unsigned => {
            let (t, c) = single()?;
            let v: u64 = t
                .parse()
                .map_err(|_| parse_error(line, c, format!("expected a non-negative integer, found `{t}`")))?;
            Ok(Value::Int(v))
        }
        Kind::Real => {
            let (t, c) = single()?;
            Ok(Value::Real(parse_real(t, line, c)?))
        }
        Kind::Decibel => {
            let (t, c) = single()?;
            Ok(Value::Real(parse_real(strip_db(t), line, c)?))
        }
        Kind::DecibelList | Kind::RealList => {
            // a trailing `dB` may follow the last entry and applies to all
            let n = list.len();
            list.iter()
                .enumerate()
                .map(|(i, &(t, c))| {
                    let t = if kind == Kind::DecibelList && (i + 1 == n || t.to_ascii_lowercase().ends_with("db")) {
                        strip_db(t)
                    } else {
                        t
                    };
                    parse_real(t, line, c)
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Reals)
        }
        Kind::Words => list
            .iter()
            .map(|&(t, c)| word(t, line, c))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Words),
        Kind::Word => {
            let (t, c) = single()?;
            word(t, line, c).map(Value::Word)
        }
    }
}

fn word(t: &str, line: usize, column: usize) -> Result<String, ConfigError> {
    if t.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-' || ch == '.') {
        Ok(t.to_owned())
    } else {
        Err(parse_error(line, column, format!("expected a name, found `{t}`")))
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let key_col = content.len() - content.trim_start().len() + 1;
            let Some(eq) = content.find('=') else {
                return Err(parse_error(line, key_col, "expected `section.key = value`"));
            };
            let key = content[..eq].trim();
            let valid_key = key.split_once('.').is_some_and(|(s, k)| {
                !s.is_empty()
                    && !k.is_empty()
                    && key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.')
            });
            if !valid_key {
                return Err(parse_error(line, key_col, format!("malformed key `{key}`")));
            }
            let Some(&(_, kind)) = KEYS.iter().find(|(k, _)| *k == key) else {
                return Err(parse_error(line, key_col, format!("unknown key `{key}`")));
            };
            if entries.contains_key(key) {
                return Err(parse_error(line, key_col, format!("duplicate key `{key}`")));
            }
            let value_col = eq + 2;
            let value = parse_value(kind, &content[eq + 1..], line, value_col)?;
            entries.insert(key.to_owned(), Entry { value, line, column: key_col });
        }
        Ok(Self { entries })
    }

    fn int(&self, key: &str) -> Option<u64> {
        match self.entries.get(key).map(|e| &e.value) {
            Some(Value::Int(v)) => Some(*v),
            _ => None,
        }
    }

    fn real(&self, key: &str) -> Option<f64> {
        match self.entries.get(key).map(|e| &e.value) {
            Some(Value::Real(v)) => Some(*v),
            _ => None,
        }
    }

    fn reals(&self, key: &str) -> Option<Vec<f64>> {
        match self.entries.get(key).map(|e| &e.value) {
            Some(Value::Reals(v)) => Some(v.clone()),
            _ => None,
        }
    }

    fn words(&self, key: &str) -> Option<Vec<String>> {
        match self.entries.get(key).map(|e| &e.value) {
            Some(Value::Words(v)) => Some(v.clone()),
            _ => None,
        }
    }

    fn word(&self, key: &str) -> Option<String> {
        match self.entries.get(key).map(|e| &e.value) {
            Some(Value::Word(v)) => Some(v.clone()),
            _ => None,
        }
    }

    fn position(&self, key: &str) -> (usize, usize) {
        self.entries.get(key).map(|e| (e.line, e.column)).unwrap_or((0, 0))
    }

    /// Resolves the entries into an experiment, collecting every invariant
    /// violation.
    pub fn to_experiment(&self) -> Result<Experiment, ConfigError> {
        if let Some(preset) = self.word("experiment.preset") {
            return self.preset(&preset);
        }
        let mut problems = Vec::new();
        let need = |key: &str, problems: &mut Vec<String>| {
            let v = self.int(key);
            if v.is_none() {
                problems.push(format!("missing required key `{key}`"));
            }
            v.unwrap_or(0) as usize
        };
        let m = need("system.m", &mut problems);
        let l = need("system.l", &mut problems);
        let n = self.int("system.n").unwrap_or(1) as usize;
        let mut cfg = SystemConfig::new(m, l, n);
        if let Some(d) = self.real("system.d_over_lambda") {
            cfg.d_over_lambda = d;
        }
        if let Some(grid) = self.reals("system.snr_db") {
            cfg.snr_grid_db = grid;
        }
        if let Some(r) = self.real("system.cell_radius_m") {
            cfg.cell_radius_m = r;
        }
        cfg.seed = self.int("system.seed").unwrap_or(0);

        let law = match self.kappa_law(l) {
            Ok(law) => law,
            Err(msg) => {
                problems.push(msg);
                KappaLaw::Rayleigh
            }
        };

        let metrics = match self.words("experiment.metrics") {
            Some(ids) => ids
                .iter()
                .filter_map(|id| match id.parse::<Metric>() {
                    Ok(m) => Some(m),
                    Err(e) => {
                        problems.push(e.to_string());
                        None
                    }
                })
                .collect(),
            None if n > 1 => vec![Metric::CDpc, Metric::CBd, Metric::LossBdMc],
            None => vec![Metric::CDpc, Metric::CZf, Metric::LossMc],
        };
        let trials = self.int("experiment.trials").map(|t| t as usize).unwrap_or(DEFAULT_TRIALS);
        let name = self.word("experiment.name").unwrap_or_else(|| "custom".into());
        let mut scenario = Scenario::new(format!("l{l}n{n}"), cfg.clone(), law, metrics);
        if let Some(w) = self.reals("users.weights") {
            scenario = scenario.with_weights(w);
        }
        let exp = Experiment { name, scenarios: vec![scenario], trials, seed: cfg.seed };
        problems.extend(exp.violations());
        if problems.is_empty() {
            Ok(exp)
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    fn preset(&self, name: &str) -> Result<Experiment, ConfigError> {
        let allowed = ["experiment.preset", "experiment.trials", "system.seed"];
        if let Some(extra) = self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            let (line, column) = self.position(extra);
            return Err(parse_error(line, column, format!("`{extra}` cannot be combined with a preset")));
        }
        let Some(mut exp) = find_experiment(name) else {
            let (line, column) = self.position("experiment.preset");
            return Err(parse_error(line, column, format!("unknown preset `{name}`")));
        };
        if let Some(t) = self.int("experiment.trials") {
            exp.trials = t as usize;
        }
        if let Some(s) = self.int("system.seed") {
            exp.seed = s;
        }
        match exp.violations() {
            v if v.is_empty() => Ok(exp),
            v => Err(ConfigError::Invalid(v)),
        }
    }

    fn kappa_law(&self, users: usize) -> Result<KappaLaw, String> {
        let names = self.words("kappa.law").unwrap_or_else(|| vec!["rayleigh".into()]);
        let one = |name: &str| -> Result<KappaLaw, String> {
            match name {
                "rayleigh" => Ok(KappaLaw::Rayleigh),
                "fixed" => self
                    .real("kappa.value_db")
                    .map(|db| KappaLaw::Fixed { db })
                    .ok_or_else(|| "kappa.law = fixed needs `kappa.value_db`".to_owned()),
                "lognormal" => match (self.real("kappa.mean_db"), self.real("kappa.var_db")) {
                    (Some(mean_db), Some(var_db)) => Ok(KappaLaw::LogNormal { mean_db, var_db }),
                    _ => Err("kappa.law = lognormal needs `kappa.mean_db` and `kappa.var_db`".to_owned()),
                },
                other => Err(format!("unknown K-factor law `{other}`")),
            }
        };
        match names.as_slice() {
            [single] => one(single),
            many if many.len() == users => {
                many.iter().map(|n| one(n)).collect::<Result<Vec<_>, _>>().map(KappaLaw::PerUser)
            }
            many => Err(format!("{} K-factor laws listed for {users} users", many.len())),
        }
    }
}

fn law_lines(law: &KappaLaw, out: &mut String) {
    let mut names = Vec::new();
    let mut value = None;
    let mut lognormal = None;
    let mut visit = |l: &KappaLaw| match l {
        KappaLaw::Rayleigh => names.push("rayleigh"),
        KappaLaw::Fixed { db } => {
            names.push("fixed");
            value = Some(*db);
        }
        KappaLaw::LogNormal { mean_db, var_db } => {
            names.push("lognormal");
            lognormal = Some((*mean_db, *var_db));
        }
        KappaLaw::PerUser(_) => {}
    };
    match law {
        KappaLaw::PerUser(laws) => laws.iter().for_each(&mut visit),
        other => visit(other),
    }
    let _ = writeln!(out, "kappa.law = {}", names.join(", "));
    if let Some(db) = value {
        let _ = writeln!(out, "kappa.value_db = {} dB", format_sig9(db));
    }
    if let Some((mean, var)) = lognormal {
        let _ = writeln!(out, "kappa.mean_db = {} dB", format_sig9(mean));
        let _ = writeln!(out, "kappa.var_db = {}", format_sig9(var));
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format_sig9(*x)).collect::<Vec<_>>().join(", ")
}

/// Renders one scenario as a stand-alone configuration.
pub fn render_scenario(name: &str, trials: usize, seed: u64, sc: &Scenario) -> String {
    let c = &sc.config;
    let mut out = String::new();
    let _ = writeln!(out, "system.m = {}", c.m);
    let _ = writeln!(out, "system.l = {}", c.l);
    let _ = writeln!(out, "system.n = {}", c.n);
    let _ = writeln!(out, "system.d_over_lambda = {}", format_sig9(c.d_over_lambda));
    let _ = writeln!(out, "system.snr_db = {} dB", join(&c.snr_grid_db));
    let _ = writeln!(out, "system.cell_radius_m = {}", format_sig9(c.cell_radius_m));
    let _ = writeln!(out, "system.seed = {seed}");
    law_lines(&sc.kappa_law, &mut out);
    if let Some(w) = &sc.weights {
        let _ = writeln!(out, "users.weights = {}", join(w));
    }
    let _ = writeln!(out, "experiment.name = {name}");
    let _ = writeln!(out, "experiment.trials = {trials}");
    let ids: Vec<&str> = sc.metrics.iter().map(|m| m.id()).collect();
    let _ = writeln!(out, "experiment.metrics = {}", ids.join(", "));
    out
}
