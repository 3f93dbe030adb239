//! End-to-end experiments driven by a [`RunConfig`].

use std::time::Instant;

use num_complex::Complex64 as C64;

use crate::brute::dense_evolve;
use crate::config::{Experiment, RunConfig};
use crate::dde::{solve_linear_dde, DdeConfig};
use crate::error::{Error, Result};
use crate::linear::{
    auxiliary_peak_times, build_drift, memory_profile, rise_width, site_population, CovarianceState,
    ProfileNormalization, Propagator,
};
use crate::model::{derive_params, kernel_modulus, kernel_stats};
use crate::mpdo::{evolve, excited, EvolutionLog, Mpdo, TruncationConfig};
use crate::series::{uniform_grid, TimeSeries};
use crate::superop::{
    exponentiate, factorize_channel, log_log_slope, make_schedule, min_choi_eigenvalue, trace_preservation_error,
    trotter_step_error, trotter_test_ring, GateSet,
};

/// One threshold comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition, e.g. `<= 0.02`.
    pub condition: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            condition: format!("<= {limit:e}"),
            pass: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            condition: format!(">= {limit:e}"),
            pass: value >= limit,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            value,
            condition: format!("{target} +- {tol}"),
            pass: (value - target).abs() <= tol,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            condition: "true".into(),
            pass: ok,
        }
    }
}

/// Everything an experiment produces.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub series: Vec<TimeSeries>,
    /// Derived quantities for the manifest.
    pub derived: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub wall_seconds: f64,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn derive(&mut self, key: impl Into<String>, value: impl ToString) {
        self.derived.push((key.into(), value.to_string()));
    }
}

/// Runs the experiment named in `cfg`.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = match cfg.experiment {
        Experiment::Kernel => kernel(cfg)?,
        Experiment::Linear => linear(cfg)?,
        Experiment::Profile => profile(cfg)?,
        Experiment::Qubit => qubit(cfg)?,
        Experiment::OracleCompare => oracle_compare(cfg)?,
        Experiment::TrotterOrder => trotter_order(cfg)?,
    };
    out.wall_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Composite Simpson rule on `m` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

const KERNEL_INTERVALS: usize = 400_000;

fn kernel(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    for &n in &cfg.n_values {
        let gamma = (n as f64 - 1.0) / cfg.delta_t;
        let stats = kernel_stats(n, gamma)?;
        let upper = 40.0 * n as f64 / gamma;
        let h = upper / KERNEL_INTERVALS as f64;
        let f = |t: f64| kernel_modulus(n, gamma, t);
        let mass = simpson(f, 0.0, upper, KERNEL_INTERVALS);
        let mean = simpson(|t| t * f(t), 0.0, upper, KERNEL_INTERVALS);
        let second = simpson(|t| t * t * f(t), 0.0, upper, KERNEL_INTERVALS);
        let std = (second - mean * mean).sqrt();
        let argmax = (0..=KERNEL_INTERVALS)
            .map(|k| k as f64 * h)
            .fold((0.0, f64::NEG_INFINITY), |best, t| {
                let v = f(t);
                if v > best.1 {
                    (t, v)
                } else {
                    best
                }
            })
            .0;
        out.derive(format!("gamma_n{n}"), gamma);
        out.derive(format!("peak_n{n}"), stats.peak_location);
        out.derive(format!("std_n{n}"), stats.std_dev);
        out.checks.push(Check::within(format!("mass_n{n}"), mass, 1.0, cfg.tolerance));
        out.checks.push(Check::at_most(
            format!("argmax_offset_cells_n{n}"),
            (argmax - stats.peak_location).abs() / h,
            1.0,
        ));
        out.checks.push(Check::within(format!("std_n{n}"), std, (n as f64).sqrt() / gamma, 1e-6));
        let plot_every = KERNEL_INTERVALS / 2000;
        let times: Vec<f64> = (0..=2000).map(|k| (k * plot_every) as f64 * h).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        out.series.push(TimeSeries::new(format!("kernel_abs_n{n}"), times, values)?);
    }
    Ok(out)
}

/// Exact trajectory of a single photon starting at site 0.
fn photon_trajectory(cfg: &RunConfig, n: usize, t_max: f64) -> Result<(Vec<CovarianceState>, f64)> {
    let p = derive_params(&cfg.chain(n))?;
    let prop = Propagator::new(&build_drift(&p))?;
    let grid = uniform_grid(t_max, cfg.samples_per_delay, cfg.delta_t);
    Ok((prop.propagate(&CovarianceState::single_excitation(n + 1, 0), &grid)?, p.chi_01))
}

fn dde_population(cfg: &RunConfig, t_max: f64) -> Result<TimeSeries> {
    let eta = cfg.feedback_ratio * cfg.kappa;
    let dde = DdeConfig::new(cfg.kappa, eta, cfg.delta_t, t_max)
        .with_dt(cfg.delta_t / cfg.samples_per_delay.max(50) as f64);
    Ok(solve_linear_dde(&dde, C64::new(1.0, 0.0))?.population())
}

fn linear(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let dde = dde_population(cfg, cfg.t_max)?;
    let window = cfg.compare_until.min(cfg.t_max);
    let dde_end = dde.interpolate(cfg.t_max).unwrap_or(f64::NAN);
    out.derive("dde_population_t_max", dde_end);
    let mut ns = cfg.n_values.clone();
    ns.sort_unstable();
    let mut sups = Vec::new();
    let mut last_end = f64::NAN;
    for &n in &ns {
        let (states, _) = photon_trajectory(cfg, n, cfg.t_max)?;
        let mut pop = site_population(&states, 0)?;
        pop.name = format!("population_n{n}");
        let sup = pop
            .sup_deviation(&dde, 0.0, window)
            .ok_or_else(|| Error::InvalidParameter("empty comparison window".into()))?;
        last_end = pop.interpolate(cfg.t_max).unwrap_or(f64::NAN);
        out.derive(format!("sup_deviation_n{n}"), sup);
        out.derive(format!("population_t_max_n{n}"), last_end);
        sups.push(sup);
        out.series.push(pop);
    }
    out.series.push(dde.with_meta("source", "dde"));
    out.checks.push(Check::holds(
        "sup_deviation_decreasing_in_n",
        sups.windows(2).all(|w| w[1] < w[0]),
    ));
    out.checks.push(Check::at_most(
        format!("sup_deviation_n{}", ns[ns.len() - 1]),
        sups[sups.len() - 1],
        cfg.tolerance,
    ));
    out.checks.push(Check::within("steady_population", last_end, dde_end, cfg.tolerance));
    Ok(out)
}

/// Window used for the plateau of the memory profile.
pub fn plateau_window(delta_t: f64, t_max: f64) -> (f64, f64) {
    (2.0 * delta_t, t_max)
}

fn profile(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (lo, hi) = plateau_window(cfg.delta_t, cfg.t_max);
    let mut ns = Vec::new();
    let mut widths = Vec::new();
    for &n in &cfg.n_values {
        let (states, chi_01) = photon_trajectory(cfg, n, cfg.t_max)?;
        let mut f = memory_profile(&states, cfg.delta_t, ProfileNormalization::Kernel { chi_01 })?;
        f.name = format!("profile_n{n}");
        let width = rise_width(&f).ok_or_else(|| Error::InvalidParameter(format!("profile n = {n} never rises")))?;
        let plateau = f
            .window_mean(lo, hi)
            .ok_or_else(|| Error::InvalidParameter("t_max too short for the plateau window".into()))?;
        out.derive(format!("rise_width_n{n}"), width);
        out.checks.push(Check::within(format!("plateau_n{n}"), plateau, 1.0, 0.05));
        ns.push(n as f64);
        widths.push(width);
        out.series.push(f);

        let peaks = auxiliary_peak_times(&states);
        let front = TimeSeries::new(
            format!("front_peak_time_n{n}"),
            (1..=n).map(|j| j as f64).collect(),
            peaks.clone(),
        )?
        .with_meta("axis", "site index in the time column");
        out.checks.push(Check::holds(
            format!("front_monotone_n{n}"),
            peaks.windows(2).all(|w| w[1] >= w[0]),
        ));
        out.checks.push(Check::within(format!("front_site_n_peak_n{n}"), peaks[n - 1], cfg.delta_t, 0.1));
        out.series.push(front);
    }
    if ns.len() >= 2 {
        let exponent = log_log_slope(&ns, &widths);
        out.derive("rise_width_exponent", exponent);
        out.checks.push(Check::within("rise_width_exponent", exponent, -0.5, cfg.tolerance));
    }
    Ok(out)
}

/// Mean spacing of successive local maxima inside `[from, to]`. Maxima are
/// located by parabolic refinement; wiggles whose height above both
/// neighbouring minima is below `prominence` are ignored.
pub fn oscillation_period(ts: &TimeSeries, from: f64, to: f64, prominence: f64) -> Option<f64> {
    let v = &ts.values;
    let t = &ts.times;
    let mut extrema: Vec<(usize, bool)> = Vec::new();
    for i in 1..v.len().saturating_sub(1) {
        if v[i] > v[i - 1] && v[i] >= v[i + 1] {
            extrema.push((i, true));
        } else if v[i] < v[i - 1] && v[i] <= v[i + 1] {
            extrema.push((i, false));
        }
    }
    let mut peaks = Vec::new();
    for (k, &(i, is_max)) in extrema.iter().enumerate() {
        if !is_max || t[i] < from || t[i] > to {
            continue;
        }
        let left = extrema[..k].iter().rev().find(|e| !e.1).map_or(v[0], |e| v[e.0]);
        let right = extrema[k + 1..].iter().find(|e| !e.1).map_or(v[v.len() - 1], |e| v[e.0]);
        if v[i] - left.max(right) < prominence {
            continue;
        }
        let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        peaks.push(t[i] + shift * (t[i + 1] - t[i]));
    }
    (peaks.len() >= 2).then(|| (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
}

/// MPDO run of the driven qubit with the parameters in `cfg`.
pub fn qubit_run(cfg: &RunConfig, cutoff: f64) -> Result<EvolutionLog> {
    let p = derive_params(&cfg.chain(cfg.n))?;
    let schedule = make_schedule(cfg.dt)?;
    let gates = GateSet::new(&p, cfg.omega, &schedule)?;
    let trunc = TruncationConfig {
        cutoff,
        max_bond: cfg.max_bond,
    };
    let mut state = Mpdo::init_product(cfg.n, &excited(), cfg.ordering, trunc)?;
    evolve(&mut state, &schedule, &gates, cfg.t_max, cfg.sample_every)
}

/// The sampled log as named series.
pub fn log_series(log: &EvolutionLog) -> Result<Vec<TimeSeries>> {
    let t = log.times.clone();
    Ok(vec![
        TimeSeries::new("population", t.clone(), log.population.clone())?,
        TimeSeries::new("population_normalized", t.clone(), log.population_normalized.clone())?,
        TimeSeries::new("trace_error", t.clone(), log.trace.iter().map(|tr| 1.0 - tr).collect())?,
        TimeSeries::new(
            "max_bond_dim",
            t.clone(),
            log.max_bond_dim.iter().map(|&d| d as f64).collect(),
        )?,
        TimeSeries::new("truncation_weight", t, log.truncation_weight.clone())?,
    ])
}

/// Largest bond dimension at the last sample not later than `t`.
pub fn bond_dim_at(log: &EvolutionLog, t: f64) -> usize {
    log.times
        .iter()
        .zip(&log.max_bond_dim)
        .take_while(|(&s, _)| s <= t + 1e-9)
        .last()
        .map_or(0, |(_, &d)| d)
}

fn qubit(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let log = qubit_run(cfg, cfg.cutoff)?;
    let series = log_series(&log)?;
    let pop = series[0].clone();
    let t_end = *log.times.last().unwrap_or(&0.0);
    let half = bond_dim_at(&log, t_end / 2.0);
    let end = bond_dim_at(&log, t_end);
    let norm_gap = log
        .population
        .iter()
        .zip(&log.population_normalized)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.derive("gamma", (cfg.n as f64 - 1.0) / cfg.delta_t);
    out.derive("gamma_dt", (cfg.n as f64 - 1.0) / cfg.delta_t * cfg.dt);
    out.derive("trace_error_final", 1.0 - log.trace.last().copied().unwrap_or(1.0));
    out.derive("max_bond_dim_half", half);
    out.derive("max_bond_dim_final", end);
    out.checks.push(Check::at_most("normalization_gap", norm_gap, 0.02));
    out.checks.push(Check::at_most(
        "bond_dim_growth_second_half",
        end as f64 / half.max(1) as f64,
        2.0,
    ));
    if cfg.omega > 0.0 {
        let expected = std::f64::consts::PI / cfg.omega;
        let period = oscillation_period(&pop, cfg.delta_t, 5.0 * cfg.delta_t, 1e-3).unwrap_or(f64::NAN);
        out.derive("oscillation_period", period);
        out.checks.push(Check::within("oscillation_period", period, expected, cfg.tolerance));
    } else {
        let window = cfg.compare_until.min(t_end);
        let (states, _) = photon_trajectory(cfg, cfg.n, window)?;
        let reference = site_population(&states, 0)?;
        let sup = pop.sup_deviation(&reference, 0.0, window).unwrap_or(f64::NAN);
        out.derive("linear_sup_deviation", sup);
        out.checks.push(Check::at_most("linear_sup_deviation", sup, cfg.tolerance.min(0.01)));
        out.series.push(TimeSeries {
            name: "linear_population".into(),
            ..reference
        });
    }
    out.series.extend(series);
    Ok(out)
}

fn oracle_compare(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let log = qubit_run(cfg, cfg.cutoff)?;
    let series = log_series(&log)?;
    let interval = cfg.dt * cfg.sample_every as f64;
    let dense = dense_evolve(&cfg.chain(cfg.n), cfg.t_max, cfg.dt_rk, interval)?;
    let window = cfg.compare_until.min(cfg.t_max);
    let sup = series[0]
        .sup_deviation(&dense.population, 0.0, window)
        .ok_or_else(|| Error::InvalidParameter("empty comparison window".into()))?;
    out.derive("dense_error_estimate", dense.error_estimate);
    out.derive("sup_deviation", sup);
    out.checks.push(Check::at_most("mpdo_vs_dense_sup", sup, cfg.tolerance));
    out.checks.push(Check::at_most("dense_error_estimate", dense.error_estimate, 1e-8));
    out.series.extend(series);
    out.series.push(TimeSeries {
        name: "dense_population".into(),
        ..dense.population
    });
    Ok(out)
}

fn trotter_order(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let bonds = trotter_test_ring(cfg.ring_rate);
    let errors = cfg
        .dt_values
        .iter()
        .map(|&dt| trotter_step_error(&bonds, cfg.omega, dt))
        .collect::<Result<Vec<_>>>()?;
    let slope = log_log_slope(&cfg.dt_values, &errors);
    for (dt, e) in cfg.dt_values.iter().zip(&errors) {
        out.derive(format!("local_error_dt{dt}"), e);
    }
    out.derive("fitted_order", slope);
    out.checks.push(Check::within("local_error_order", slope, 5.0, cfg.tolerance));
    let mut sorted: Vec<(f64, f64)> = cfg.dt_values.iter().copied().zip(errors).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.series.push(TimeSeries::new(
        "local_error_vs_dt",
        sorted.iter().map(|x| x.0).collect(),
        sorted.iter().map(|x| x.1).collect(),
    )?);

    // Channel factorization of every gate a run with this chain would use.
    let p = derive_params(&cfg.chain(cfg.n))?;
    let schedule = make_schedule(cfg.dt)?;
    let gates = GateSet::new(&p, cfg.omega, &schedule)?;
    let (mut recon, mut complete, mut tp) = (0.0f64, 0.0f64, 0.0f64);
    let mut negative_ok = true;
    for j in [0, 1, p.n] {
        let l = crate::superop::vectorize_lindbladian(&crate::superop::build_bond(j, &p, cfg.omega)?);
        for dt in schedule.distinct_dts(p.n) {
            let e = exponentiate(&l, dt)?;
            let step = factorize_channel(&e, crate::superop::ChannelKind::for_substep(dt), dt)?;
            recon = recon.max(crate::linalg::frobenius(&(step.superoperator() - &e).view()));
            complete = complete.max(step.completeness_error());
            tp = tp.max(trace_preservation_error(&e));
            if dt < 0.0 {
                negative_ok &= min_choi_eigenvalue(&e)? < -1e-8;
            }
        }
    }
    out.derive("gates", gates.len());
    out.checks.push(Check::at_most("reconstruction_frobenius", recon, 1e-10));
    out.checks.push(Check::at_most("completeness", complete, 1e-10));
    out.checks.push(Check::at_most("trace_preservation", tp, 1e-9));
    out.checks.push(Check::holds("negative_substeps_not_cp", negative_ok));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 4);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn period_of_a_cosine() {
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        let values = times.iter().map(|t| (std::f64::consts::PI * t).cos().powi(2) + 0.001 * (40.0 * t).sin()).collect();
        let ts = TimeSeries::new("x", times, values).unwrap();
        let period = oscillation_period(&ts, 1.0, 5.0, 0.01).unwrap();
        assert!((period - 1.0).abs() < 0.01, "{period}");
    }

    #[test]
    fn kernel_experiment_passes_small_n() {
        let cfg: RunConfig = "experiment = kernel\nn_values = 3, 23\n".parse().unwrap();
        let out = run(&cfg).unwrap();
        assert!(out.passed(), "{:?}", out.checks);
        assert_eq!(out.series.len(), 2);
    }

    #[test]
    fn trotter_experiment_reports_order() {
        let cfg: RunConfig = "experiment = trotter-order\n".parse().unwrap();
        let out = run(&cfg).unwrap();
        assert!(out.passed(), "{:?}", out.checks);
    }
}
