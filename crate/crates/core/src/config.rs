//! Run configuration: a flat `key = value` text format with `#` comments.
//!
//! Every key has a default that depends on the experiment, so a config file
//! only has to name the experiment and whatever it wants to change.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ChainConfig;
use crate::mpdo::SiteOrdering;

/// Keys accepted in a config file.
pub const KEYS: &[&str] = &[
    "experiment",
    "n",
    "n_values",
    "kappa",
    "delta_t",
    "omega",
    "feedback_ratio",
    "dt",
    "dt_values",
    "dt_rk",
    "cutoff",
    "max_bond",
    "t_max",
    "samples_per_delay",
    "sample_every",
    "compare_until",
    "ring_rate",
    "ordering",
    "tolerance",
    "output",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Kernel,
    Linear,
    Profile,
    Qubit,
    OracleCompare,
    TrotterOrder,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Kernel,
        Experiment::Linear,
        Experiment::Profile,
        Experiment::Qubit,
        Experiment::OracleCompare,
        Experiment::TrotterOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Kernel => "kernel",
            Experiment::Linear => "linear",
            Experiment::Profile => "profile",
            Experiment::Qubit => "qubit",
            Experiment::OracleCompare => "oracle-compare",
            Experiment::TrotterOrder => "trotter-order",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Kernel => "memory kernel normalization, peak and width for each n",
            Experiment::Linear => "single-photon site-0 population vs the delay equation, convergence in n",
            Experiment::Profile => "memory profile f(t) and its rise width scaling",
            Experiment::Qubit => "driven qubit on the ring via MPDO (population, bond dimension, trace error)",
            Experiment::OracleCompare => "MPDO vs dense Lindblad integration on a small ring",
            Experiment::TrotterOrder => "local error order of the fourth-order split and channel factorization checks",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}` (see `delayline list-experiments`)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub n_values: Vec<usize>,
    pub kappa: f64,
    pub delta_t: f64,
    pub omega: f64,
    pub feedback_ratio: f64,
    /// Trotter step.
    pub dt: f64,
    pub dt_values: Vec<f64>,
    /// Runge-Kutta step of the dense oracle.
    pub dt_rk: f64,
    pub cutoff: f64,
    pub max_bond: usize,
    pub t_max: f64,
    pub samples_per_delay: usize,
    /// Trotter steps between MPDO samples.
    pub sample_every: usize,
    /// Upper end of the comparison window.
    pub compare_until: f64,
    /// Bond rate of the small test ring used for the order fit.
    pub ring_rate: f64,
    pub ordering: SiteOrdering,
    pub tolerance: f64,
    pub output: String,
}

impl RunConfig {
    /// Defaults for one experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = RunConfig {
            experiment,
            n: 23,
            n_values: vec![23, 83, 203, 403],
            kappa: 1.0,
            delta_t: 1.0,
            omega: 0.0,
            feedback_ratio: 1.0,
            dt: 2e-3,
            dt_values: vec![4e-3, 2e-3, 1e-3, 5e-4],
            dt_rk: 1e-3,
            cutoff: 1e-10,
            max_bond: 512,
            t_max: 40.0,
            samples_per_delay: 100,
            sample_every: 5,
            compare_until: 8.0,
            ring_rate: 20.0,
            ordering: SiteOrdering::Linear,
            tolerance: 0.02,
            output: experiment.name().to_string(),
        };
        match experiment {
            Experiment::Kernel => {
                c.n_values = vec![3, 23, 83, 403];
                c.tolerance = 1e-9;
            }
            Experiment::Linear => {}
            Experiment::Profile => {
                c.t_max = 4.0;
                c.tolerance = 0.1;
            }
            Experiment::Qubit => {
                c.omega = std::f64::consts::PI;
                c.t_max = 10.0;
                c.tolerance = 0.1;
            }
            Experiment::OracleCompare => {
                c.n = 7;
                c.omega = std::f64::consts::PI;
                c.t_max = 3.0;
                c.compare_until = 3.0;
                c.cutoff = 1e-12;
                c.dt_rk = 2e-3;
                c.tolerance = 1e-6;
            }
            Experiment::TrotterOrder => {
                c.n = 3;
                c.omega = std::f64::consts::PI;
                c.tolerance = 0.3;
            }
        }
        c
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    pub fn chain(&self, n: usize) -> ChainConfig {
        ChainConfig::new(n, self.kappa, self.delta_t)
            .with_omega(self.omega)
            .with_feedback_ratio(self.feedback_ratio)
    }

    /// Checks ranges and the experiment-specific chain invariants.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("`{key}` must be finite and > 0, got {v}")))
            }
        };
        positive("kappa", self.kappa)?;
        positive("delta_t", self.delta_t)?;
        positive("dt", self.dt)?;
        positive("dt_rk", self.dt_rk)?;
        positive("t_max", self.t_max)?;
        positive("tolerance", self.tolerance)?;
        positive("compare_until", self.compare_until)?;
        positive("ring_rate", self.ring_rate)?;
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::Config(format!("`omega` must be finite and >= 0, got {}", self.omega)));
        }
        if !(self.cutoff.is_finite() && (0.0..1.0).contains(&self.cutoff)) {
            return Err(Error::Config(format!("`cutoff` must lie in [0, 1), got {}", self.cutoff)));
        }
        if self.max_bond == 0 || self.samples_per_delay == 0 || self.sample_every == 0 {
            return Err(Error::Config("`max_bond`, `samples_per_delay` and `sample_every` must be >= 1".into()));
        }
        if self.output.trim().is_empty() {
            return Err(Error::Config("`output` must not be empty".into()));
        }
        let check_chain = |n: usize| {
            crate::model::derive_params(&self.chain(n))
                .map(|_| ())
                .map_err(|e| Error::Config(format!("n = {n}: {e}")))
        };
        match self.experiment {
            Experiment::Kernel => {
                if self.n_values.iter().any(|&n| n < 2) {
                    return Err(Error::Config("kernel `n_values` must all be >= 2".into()));
                }
            }
            Experiment::Linear | Experiment::Profile => {
                if self.n_values.is_empty() {
                    return Err(Error::Config("`n_values` must not be empty".into()));
                }
                for &n in &self.n_values {
                    check_chain(n)?;
                }
            }
            Experiment::Qubit | Experiment::OracleCompare => {
                check_chain(self.n)?;
                if self.experiment == Experiment::OracleCompare && self.n > crate::brute::MAX_N {
                    return Err(Error::Config(format!(
                        "oracle-compare needs n <= {}, got {}",
                        crate::brute::MAX_N,
                        self.n
                    )));
                }
                let gamma = (self.n as f64 - 1.0) / self.delta_t;
                if gamma * self.dt >= 1.0 {
                    return Err(Error::Config(format!("gamma * dt = {} must be < 1", gamma * self.dt)));
                }
                if self.experiment == Experiment::OracleCompare && self.dt_rk * gamma > 0.1 {
                    return Err(Error::Config(format!(
                        "`dt_rk` must be <= 1/(10 gamma) = {}",
                        0.1 / gamma
                    )));
                }
            }
            Experiment::TrotterOrder => {
                if self.dt_values.len() < 2 || self.dt_values.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
                    return Err(Error::Config("`dt_values` needs at least two positive steps".into()));
                }
            }
        }
        Ok(())
    }

    /// Every parameter as `key=value` pairs in key order.
    pub fn manifest(&self) -> Vec<(String, String)> {
        let join = |v: &[String]| v.join(",");
        vec![
            ("experiment".into(), self.experiment.to_string()),
            ("n".into(), self.n.to_string()),
            ("n_values".into(), join(&self.n_values.iter().map(|v| v.to_string()).collect::<Vec<_>>())),
            ("kappa".into(), self.kappa.to_string()),
            ("delta_t".into(), self.delta_t.to_string()),
            ("omega".into(), self.omega.to_string()),
            ("feedback_ratio".into(), self.feedback_ratio.to_string()),
            ("dt".into(), self.dt.to_string()),
            ("dt_values".into(), join(&self.dt_values.iter().map(|v| v.to_string()).collect::<Vec<_>>())),
            ("dt_rk".into(), self.dt_rk.to_string()),
            ("cutoff".into(), self.cutoff.to_string()),
            ("max_bond".into(), self.max_bond.to_string()),
            ("t_max".into(), self.t_max.to_string()),
            ("samples_per_delay".into(), self.samples_per_delay.to_string()),
            ("sample_every".into(), self.sample_every.to_string()),
            ("compare_until".into(), self.compare_until.to_string()),
            ("ring_rate".into(), self.ring_rate.to_string()),
            ("ordering".into(), ordering_name(self.ordering).into()),
            ("tolerance".into(), self.tolerance.to_string()),
            ("output".into(), self.output.clone()),
        ]
    }
}

fn ordering_name(o: SiteOrdering) -> &'static str {
    match o {
        SiteOrdering::Linear => "linear",
        SiteOrdering::Folded => "folded",
        SiteOrdering::Paired => "paired",
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{raw}`")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

/// Splits config text into `(line, key, value)` triples.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", i + 1)));
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut seen = BTreeMap::new();
        for (line, k, v) in &pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("line {line}: unknown key `{k}`")));
            }
            if seen.insert(k.clone(), v.clone()).is_some() {
                return Err(Error::Config(format!("line {line}: duplicate key `{k}`")));
            }
        }
        let experiment: Experiment = seen
            .get("experiment")
            .ok_or_else(|| Error::Config("missing required key `experiment`".into()))?
            .parse()?;
        let mut c = RunConfig::defaults(experiment);
        for (k, v) in &seen {
            match k.as_str() {
                "experiment" => {}
                "n" => c.n = parse_value(k, v)?,
                "n_values" => c.n_values = parse_list(k, v)?,
                "kappa" => c.kappa = parse_value(k, v)?,
                "delta_t" => c.delta_t = parse_value(k, v)?,
                "omega" => c.omega = parse_omega(v)?,
                "feedback_ratio" => c.feedback_ratio = parse_value(k, v)?,
                "dt" => c.dt = parse_value(k, v)?,
                "dt_values" => c.dt_values = parse_list(k, v)?,
                "dt_rk" => c.dt_rk = parse_value(k, v)?,
                "cutoff" => c.cutoff = parse_value(k, v)?,
                "max_bond" => c.max_bond = parse_value(k, v)?,
                "t_max" => c.t_max = parse_value(k, v)?,
                "samples_per_delay" => c.samples_per_delay = parse_value(k, v)?,
                "sample_every" => c.sample_every = parse_value(k, v)?,
                "compare_until" => c.compare_until = parse_value(k, v)?,
                "ring_rate" => c.ring_rate = parse_value(k, v)?,
                "ordering" => {
                    c.ordering = match v.as_str() {
                        "linear" => SiteOrdering::Linear,
                        "folded" => SiteOrdering::Folded,
                        "paired" => SiteOrdering::Paired,
                        _ => return Err(Error::Config(format!("`ordering` must be linear, folded or paired, got `{v}`"))),
                    }
                }
                "tolerance" => c.tolerance = parse_value(k, v)?,
                "output" => c.output = v.clone(),
                _ => unreachable!("key list checked above"),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Accepts a plain number or a multiple of `pi` such as `pi`, `0.5pi`, `2*pi`.
fn parse_omega(v: &str) -> Result<f64> {
    let s = v.replace(' ', "");
    if let Some(head) = s.strip_suffix("pi") {
        let head = head.strip_suffix('*').unwrap_or(head);
        let factor = if head.is_empty() { 1.0 } else { parse_value::<f64>("omega", head)? };
        return Ok(factor * std::f64::consts::PI);
    }
    parse_value("omega", &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c: RunConfig = "experiment = qubit\n".parse().unwrap();
        assert_eq!(c.n, 23);
        assert_eq!(c.omega, std::f64::consts::PI);
        assert_eq!(c.cutoff, 1e-10);
    }

    #[test]
    fn comments_lists_and_pi() {
        let text = "# scan\nexperiment = linear  # trailing\nn_values = 3, 7,11\nomega = 0.5pi\n";
        let c: RunConfig = text.parse().unwrap();
        assert_eq!(c.n_values, vec![3, 7, 11]);
        assert!((c.omega - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let e = "experiment = kernel\nkapa = 1\n".parse::<RunConfig>().unwrap_err();
        assert!(e.to_string().contains("unknown key `kapa`"));
        let e = "experiment = kernel\nkappa = 1\nkappa = 2\n".parse::<RunConfig>().unwrap_err();
        assert!(e.to_string().contains("duplicate"));
        assert!("n = 3\n".parse::<RunConfig>().is_err());
        assert!("experiment = fig9\n".parse::<RunConfig>().is_err());
    }

    #[test]
    fn range_checks_name_the_violation() {
        let e = "experiment = qubit\nn = 24\n".parse::<RunConfig>().unwrap_err();
        assert!(e.to_string().contains("n = 24"), "{e}");
        let e = "experiment = qubit\ndt = 0.1\n".parse::<RunConfig>().unwrap_err();
        assert!(e.to_string().contains("gamma * dt"), "{e}");
        let e = "experiment = oracle-compare\nn = 11\n".parse::<RunConfig>().unwrap_err();
        assert!(e.to_string().contains("n <= 7"), "{e}");
        assert!("experiment = linear\ncutoff = 2\n".parse::<RunConfig>().is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let c: RunConfig = "experiment = profile\nn_values = 23,83\nomega = 0.25\n".parse().unwrap();
        let text: String = c.manifest().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let back: RunConfig = text.parse().unwrap();
        assert_eq!(back, c);
    }
}
