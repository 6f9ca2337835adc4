//! Run configuration files.
//!
//! Flat `key = value` lines grouped under `[scenario]`, `[rates]`,
//! `[energies]` and `[run]` headers. Lines starting with `#` are comments.
//!
//! ```text
//! [scenario]
//! name = double_dot_set
//!
//! [rates]
//! gamma_L = 1
//! gamma_R = 1e4
//! Gamma_L = 1
//! Gamma_R = 1
//! Omega = 1
//!
//! [run]
//! param = gamma_R
//! grid = 1:1e4:4log
//! ```
//!
//! Primed widths default to their unprimed counterparts; `epsilon`, `U`,
//! `U1` and `U2` default to zero. `[energies]` is optional but, when present,
//! must list all seven levels.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::model::{BlockingConfig, EnergyConfig, RateSet, Scenario};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value` or `[section]`")]
    Syntax { line: usize },
    #[error("line {line}: unknown section `[{name}]`")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: `{key}` appears before any section header")]
    OutsideSection { line: usize, key: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        line: usize,
        key: String,
        section: &'static str,
    },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    DuplicateKey {
        line: usize,
        key: String,
        first: usize,
    },
    #[error("line {line}: `{key}` = `{value}` is not a number")]
    MalformedNumber {
        line: usize,
        key: String,
        value: String,
    },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("missing required key `{key}` for {context}")]
    MissingKey { key: String, context: String },
}

/// `start:stop:count`, optionally suffixed `log` on the count for
/// geometric spacing. Both ends are included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let t = k as f64 / last;
                if k + 1 == self.count {
                    self.stop
                } else if self.log {
                    self.start * (self.stop / self.start).powf(t)
                } else {
                    self.start + (self.stop - self.start) * t
                }
            })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(format!("`{s}` is not start:stop:count"));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{v}` is not a finite number"))
        };
        let (start, stop) = (num(start)?, num(stop)?);
        let count = count.trim();
        let (count, log) = match count.strip_suffix("log") {
            Some(c) => (c, true),
            None => (count.strip_suffix("lin").unwrap_or(count), false),
        };
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| format!("`{count}` is not a point count"))?;
        if count == 0 {
            return Err("grid needs at least one point".into());
        }
        if log && (start <= 0.0 || stop <= 0.0) {
            return Err("log grid bounds must be positive".into());
        }
        Ok(GridSpec {
            start,
            stop,
            count,
            log,
        })
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}{}",
            self.start,
            self.stop,
            self.count,
            if self.log { "log" } else { "" }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Svg,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(format!("unknown format `{other}` (csv or svg)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Svg => "svg",
        })
    }
}

/// `[run]` section. Everything is optional.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    /// Integration step; derived from the generator when absent.
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub out: Option<String>,
    pub param: Option<String>,
    pub grid: Option<GridSpec>,
    pub tol: Option<f64>,
    pub format: Option<OutputFormat>,
    /// Allow Fermi-sweep points at or above `E0 + U2`.
    pub extrapolate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub rates: RateSet,
    pub energies: Option<EnergyConfig>,
    pub run: RunOptions,
}

const SCENARIO_KEYS: [&str; 4] = [
    "name",
    "blocked_when_dot1",
    "blocked_when_dot2",
    "backflow_when_blocked",
];
const ENERGY_KEYS: [&str; 7] = ["E0", "E1", "E2", "EFL_det", "EFR_det", "EFL_sys", "EFR_sys"];
const RUN_KEYS: [&str; 8] = [
    "dt",
    "t_final",
    "out",
    "param",
    "grid",
    "tol",
    "format",
    "extrapolate",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Scenario,
    Rates,
    Energies,
    Run,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Scenario => "scenario",
            Section::Rates => "rates",
            Section::Energies => "energies",
            Section::Run => "run",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Section::Scenario => &SCENARIO_KEYS,
            Section::Rates => &RateSet::PARAMETERS,
            Section::Energies => &ENERGY_KEYS,
            Section::Run => &RUN_KEYS,
        }
    }
}

struct Entry {
    section: Section,
    key: &'static str,
    value: String,
    line: usize,
}

fn required_rates(scenario: Scenario) -> &'static [&'static str] {
    match scenario {
        Scenario::SingleDotSet => &["gamma_L", "gamma_R", "Gamma_L", "Gamma_R"],
        Scenario::DoubleDotBare => &["Gamma_L", "Gamma_R", "Omega"],
        Scenario::ReducedDoubleDot => &["gamma_L", "Gamma_L", "Gamma_R", "Omega"],
        Scenario::DoubleDotSet | Scenario::GeneralizedDoubleDotSet(_) => {
            &["gamma_L", "gamma_R", "Gamma_L", "Gamma_R", "Omega"]
        }
    }
}

fn parse_bool(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            line: e.line,
            key: e.key.to_string(),
            reason: "expected true or false".into(),
        }),
    }
}

fn parse_number(e: &Entry) -> Result<f64, ConfigError> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::MalformedNumber {
            line: e.line,
            key: e.key.to_string(),
            value: e.value.clone(),
        })
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut section: Option<Section> = None;
    let mut entries: Vec<Entry> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or(ConfigError::Syntax { line })?
                .trim();
            section = Some(match name {
                "scenario" => Section::Scenario,
                "rates" => Section::Rates,
                "energies" => Section::Energies,
                "run" => Section::Run,
                other => {
                    return Err(ConfigError::UnknownSection {
                        line,
                        name: other.to_string(),
                    })
                }
            });
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        let Some(sec) = section else {
            return Err(ConfigError::OutsideSection {
                line,
                key: key.to_string(),
            });
        };
        let Some(&known) = sec.keys().iter().find(|&&k| k == key) else {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
                section: sec.name(),
            });
        };
        if let Some(prev) = entries.iter().find(|e| e.section == sec && e.key == known) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
                first: prev.line,
            });
        }
        entries.push(Entry {
            section: sec,
            key: known,
            value: value.to_string(),
            line,
        });
    }

    let find = |sec: Section, key: &str| entries.iter().find(|e| e.section == sec && e.key == key);

    // [scenario]
    let name = find(Section::Scenario, "name").ok_or_else(|| ConfigError::MissingKey {
        key: "name".into(),
        context: "[scenario]".into(),
    })?;
    let mut scenario: Scenario = name.value.parse().map_err(|_| ConfigError::InvalidValue {
        line: name.line,
        key: "name".into(),
        reason: format!("unknown scenario `{}`", name.value),
    })?;
    let mut blocking = BlockingConfig::DISTINGUISHING;
    for e in entries
        .iter()
        .filter(|e| e.section == Section::Scenario && e.key != "name")
    {
        if !matches!(scenario, Scenario::GeneralizedDoubleDotSet(_)) {
            return Err(ConfigError::UnknownKey {
                line: e.line,
                key: e.key.to_string(),
                section: "scenario",
            });
        }
        let v = parse_bool(e)?;
        match e.key {
            "blocked_when_dot1" => blocking.blocked_when_dot1 = v,
            "blocked_when_dot2" => blocking.blocked_when_dot2 = v,
            _ => blocking.backflow_when_blocked = v,
        }
    }
    if let Scenario::GeneralizedDoubleDotSet(b) = &mut scenario {
        *b = blocking;
    }

    // [rates]
    let mut rates = RateSet::default();
    for e in entries.iter().filter(|e| e.section == Section::Rates) {
        rates
            .set(e.key, parse_number(e)?)
            .expect("key list matches RateSet");
    }
    for &key in required_rates(scenario) {
        if find(Section::Rates, key).is_none() {
            return Err(ConfigError::MissingKey {
                key: key.into(),
                context: format!("scenario {}", scenario.name()),
            });
        }
    }
    for (primed, base) in [
        ("gamma_L_p", "gamma_L"),
        ("gamma_R_p", "gamma_R"),
        ("Gamma_L_p", "Gamma_L"),
        ("Gamma_R_p", "Gamma_R"),
    ] {
        if find(Section::Rates, primed).is_none() {
            rates.set(primed, rates.get(base).unwrap()).unwrap();
        }
    }
    for e in entries.iter().filter(|e| e.section == Section::Rates) {
        if rates.get(e.key).unwrap() < 0.0
            && !matches!(e.key, "Omega" | "epsilon" | "U" | "U1" | "U2")
        {
            return Err(ConfigError::InvalidValue {
                line: e.line,
                key: e.key.into(),
                reason: "tunneling widths must be nonnegative".into(),
            });
        }
    }

    // [energies]
    let energies = if entries.iter().any(|e| e.section == Section::Energies) {
        let mut vals = [0.0; 7];
        for (slot, key) in vals.iter_mut().zip(ENERGY_KEYS) {
            let e = find(Section::Energies, key).ok_or_else(|| ConfigError::MissingKey {
                key: key.into(),
                context: "[energies]".into(),
            })?;
            *slot = parse_number(e)?;
        }
        let [e0, e1, e2, efl_det, efr_det, efl_sys, efr_sys] = vals;
        Some(EnergyConfig {
            e0,
            e1,
            e2,
            efl_det,
            efr_det,
            efl_sys,
            efr_sys,
        })
    } else {
        None
    };

    // [run]
    let mut run = RunOptions::default();
    for e in entries.iter().filter(|e| e.section == Section::Run) {
        let invalid = |reason: String| ConfigError::InvalidValue {
            line: e.line,
            key: e.key.into(),
            reason,
        };
        match e.key {
            "dt" | "t_final" | "tol" => {
                let v = parse_number(e)?;
                if v <= 0.0 {
                    return Err(invalid("must be positive".into()));
                }
                match e.key {
                    "dt" => run.dt = Some(v),
                    "t_final" => run.t_final = Some(v),
                    _ => run.tol = Some(v),
                }
            }
            "out" => run.out = Some(e.value.clone()),
            "param" => run.param = Some(e.value.clone()),
            "grid" => run.grid = Some(e.value.parse().map_err(invalid)?),
            "format" => run.format = Some(e.value.parse().map_err(invalid)?),
            "extrapolate" => run.extrapolate = parse_bool(e)?,
            _ => unreachable!("run keys are exhaustive"),
        }
    }

    Ok(RunConfig {
        scenario,
        rates,
        energies,
        run,
    })
}

/// Writes `cfg` in the format read by [`parse_config`], listing every value.
pub fn render_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[scenario]\nname = {}", cfg.scenario.name());
    if let Scenario::GeneralizedDoubleDotSet(b) = cfg.scenario {
        let _ = writeln!(s, "blocked_when_dot1 = {}", b.blocked_when_dot1);
        let _ = writeln!(s, "blocked_when_dot2 = {}", b.blocked_when_dot2);
        let _ = writeln!(s, "backflow_when_blocked = {}", b.backflow_when_blocked);
    }
    let _ = writeln!(s, "\n[rates]");
    for key in RateSet::PARAMETERS {
        let _ = writeln!(s, "{key} = {}", cfg.rates.get(key).unwrap());
    }
    if let Some(e) = &cfg.energies {
        let _ = writeln!(s, "\n[energies]");
        let vals = [e.e0, e.e1, e.e2, e.efl_det, e.efr_det, e.efl_sys, e.efr_sys];
        for (key, v) in ENERGY_KEYS.iter().zip(vals) {
            let _ = writeln!(s, "{key} = {v}");
        }
    }
    let r = &cfg.run;
    let mut run = String::new();
    if let Some(v) = r.dt {
        let _ = writeln!(run, "dt = {v}");
    }
    if let Some(v) = r.t_final {
        let _ = writeln!(run, "t_final = {v}");
    }
    if let Some(v) = &r.out {
        let _ = writeln!(run, "out = {v}");
    }
    if let Some(v) = &r.param {
        let _ = writeln!(run, "param = {v}");
    }
    if let Some(v) = r.grid {
        let _ = writeln!(run, "grid = {v}");
    }
    if let Some(v) = r.tol {
        let _ = writeln!(run, "tol = {v}");
    }
    if let Some(v) = r.format {
        let _ = writeln!(run, "format = {v}");
    }
    if r.extrapolate {
        let _ = writeln!(run, "extrapolate = true");
    }
    if !run.is_empty() {
        let _ = write!(s, "\n[run]\n{run}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOUBLE_DOT: &str = "\
# aligned levels
[scenario]
name = double_dot_bare

[rates]
Gamma_L = 1.0
Gamma_R = 1.0
Omega = 1
";

    #[test]
    fn complete_file() {
        let cfg = parse_config(DOUBLE_DOT).unwrap();
        assert_eq!(cfg.scenario, Scenario::DoubleDotBare);
        assert_eq!(cfg.rates.sys.left, 1.0);
        assert_eq!(cfg.rates.sys_p.right, 1.0);
        assert_eq!(cfg.rates.omega, 1.0);
        assert_eq!(cfg.rates.epsilon, 0.0);
        assert_eq!(cfg.energies, None);
    }

    #[test]
    fn malformed_number_names_line() {
        let text = DOUBLE_DOT.replace("Gamma_L = 1.0", "Gamma_L = abc");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(
            err,
            ConfigError::MalformedNumber {
                line: 6,
                key: "Gamma_L".into(),
                value: "abc".into()
            }
        );
        assert!(err.to_string().contains("line 6"));
    }

    #[test]
    fn missing_omega() {
        let text = DOUBLE_DOT.replace("Omega = 1\n", "");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::MissingKey { key, .. }) if key == "Omega"
        ));
    }

    #[test]
    fn duplicate_and_unknown_keys() {
        let dup = format!("{DOUBLE_DOT}Omega = 2\n");
        assert!(matches!(
            parse_config(&dup),
            Err(ConfigError::DuplicateKey {
                line: 9,
                first: 8,
                ..
            })
        ));
        let unknown = format!("{DOUBLE_DOT}Delta = 2\n");
        assert!(matches!(
            parse_config(&unknown),
            Err(ConfigError::UnknownKey { .. })
        ));
        let blocking = DOUBLE_DOT.replace(
            "name = double_dot_bare",
            "name = double_dot_bare\nblocked_when_dot1 = true",
        );
        assert!(matches!(
            parse_config(&blocking),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            parse_config("Omega = 1\n"),
            Err(ConfigError::OutsideSection { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("[physics]\n"),
            Err(ConfigError::UnknownSection { .. })
        ));
        assert!(matches!(
            parse_config("[rates]\nOmega\n"),
            Err(ConfigError::Syntax { line: 2 })
        ));
    }

    #[test]
    fn generalized_blocking_keys() {
        let text = "[scenario]\nname = generalized_double_dot_set\nblocked_when_dot1 = true\n\
                    [rates]\ngamma_L = 1\ngamma_R = 10\nGamma_L = 1\nGamma_R = 1\nOmega = 1\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(
            cfg.scenario,
            Scenario::GeneralizedDoubleDotSet(BlockingConfig::INDISTINGUISHING)
        );
    }

    #[test]
    fn partial_energies_rejected() {
        let text = format!("{DOUBLE_DOT}[energies]\nE0 = 0\n");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::MissingKey { .. })
        ));
    }

    #[test]
    fn grid_specs() {
        let g: GridSpec = "1:1e4:4log".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 4);
        for (k, a) in v.iter().enumerate() {
            let b = 10f64.powf(4.0 * k as f64 / 3.0);
            assert!((a - b).abs() <= 1e-12 * b, "{a} {b}");
        }
        let g: GridSpec = "0:1:3".parse().unwrap();
        assert_eq!(g.values(), vec![0.0, 0.5, 1.0]);
        assert_eq!("0.5:2:1".parse::<GridSpec>().unwrap().values(), vec![0.5]);
        assert!("0:1".parse::<GridSpec>().is_err());
        assert!("0:1:0".parse::<GridSpec>().is_err());
        assert!("0:1:3log".parse::<GridSpec>().is_err());
        assert_eq!(g.to_string().parse::<GridSpec>().unwrap(), g);
    }
}
