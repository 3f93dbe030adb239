//! Reference solutions of the delayed amplitude equation
//! `ȧ(t) = -κ a(t) + η Θ(t - Δt) a(t - Δt)` and of the classical
//! chain that realises the Gamma-shaped delay kernel.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Longest horizon, in units of the delay, accepted by the solvers.
pub const MAX_DELAYS: f64 = 200.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DdeConfig {
    pub kappa: f64,
    pub eta: f64,
    pub delta_t: f64,
    pub t_max: f64,
    /// Output grid spacing.
    pub dt: f64,
}

impl DdeConfig {
    pub fn new(kappa: f64, eta: f64, delta_t: f64, t_max: f64) -> Self {
        Self {
            kappa,
            eta,
            delta_t,
            t_max,
            dt: delta_t / 100.0,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !self.eta.is_finite() {
            return bad(format!("eta must be finite, got {}", self.eta));
        }
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return bad(format!("delta_t must be positive, got {}", self.delta_t));
        }
        if !(self.t_max >= 0.0) || self.t_max / self.delta_t > MAX_DELAYS {
            return bad(format!(
                "t_max must lie in [0, {MAX_DELAYS} delta_t], got {}",
                self.t_max
            ));
        }
        if !(self.dt > 0.0) || self.dt > self.delta_t / 50.0 * (1.0 + 1e-12) {
            return bad(format!(
                "dt must lie in (0, delta_t/50], got {} for delta_t = {}",
                self.dt, self.delta_t
            ));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        let steps = (self.t_max / self.dt).round() as usize;
        (0..=steps).map(|k| k as f64 * self.dt).collect()
    }
}

/// Complex amplitude `a(t)` on the output grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DdeSolution {
    pub times: Vec<f64>,
    pub amplitude: Vec<C64>,
}

impl DdeSolution {
    /// `|a(t)|²`.
    pub fn population(&self) -> TimeSeries {
        TimeSeries::new(
            "dde_population",
            self.times.clone(),
            self.amplitude.iter().map(|a| a.norm_sqr()).collect(),
        )
        .expect("grid is increasing")
    }

    pub fn real_part(&self) -> TimeSeries {
        TimeSeries::new(
            "dde_amplitude_re",
            self.times.clone(),
            self.amplitude.iter().map(|a| a.re).collect(),
        )
        .expect("grid is increasing")
    }

    pub fn imag_part(&self) -> TimeSeries {
        TimeSeries::new(
            "dde_amplitude_im",
            self.times.clone(),
            self.amplitude.iter().map(|a| a.im).collect(),
        )
        .expect("grid is increasing")
    }

    /// Mean of `|a|²` over the last `window` time units.
    pub fn steady_population(&self, window: f64) -> Option<f64> {
        let end = *self.times.last()?;
        self.population().window_mean(end - window, end)
    }
}

/// Exact method of steps. On the `k`-th delay interval the solution is
/// `a(kΔt + uΔt) = e^{-κΔt u} q_k(u)` with polynomials
/// `q_k(u) = e^{-κΔt} q_{k-1}(1) + ηΔt ∫_0^u q_{k-1}` and `q_0 = a(0)`,
/// so the only error is floating-point round-off.
pub fn solve_linear_dde(cfg: &DdeConfig, a0: C64) -> Result<DdeSolution> {
    cfg.validate()?;
    let times = cfg.grid();
    let intervals = (cfg.t_max / cfg.delta_t).floor() as usize + 1;
    let decay = (-cfg.kappa * cfg.delta_t).exp();
    let feed = cfg.eta * cfg.delta_t;

    let mut polys: Vec<Vec<C64>> = Vec::with_capacity(intervals);
    polys.push(vec![a0]);
    for k in 1..intervals {
        let prev = &polys[k - 1];
        let start: C64 = prev.iter().sum::<C64>() * decay;
        let mut q = Vec::with_capacity(prev.len() + 1);
        q.push(start);
        for (m, c) in prev.iter().enumerate() {
            q.push(c * feed / (m + 1) as f64);
        }
        polys.push(q);
    }

    let amplitude = times
        .iter()
        .map(|&t| {
            let x = t / cfg.delta_t;
            let k = (x.floor() as usize).min(intervals - 1);
            let u = x - k as f64;
            let q = &polys[k];
            let value = q.iter().rev().fold(C64::from(0.0), |acc, c| acc * u + c);
            value * (-cfg.kappa * cfg.delta_t * u).exp()
        })
        .collect::<Vec<_>>();
    if amplitude.iter().any(|a| !a.is_finite()) {
        return Err(Error::Unstable("delayed amplitude overflowed".into()));
    }
    Ok(DdeSolution { times, amplitude })
}

/// Trapezoidal time stepping on the output grid, with the delayed term read
/// from the stored history. The step must divide the delay. The switch-on
/// at `t = Δt` falls on a grid point and is taken from the correct side in
/// each interval, so the scheme is second order.
pub fn solve_linear_dde_trapezoid(cfg: &DdeConfig, a0: C64) -> Result<DdeSolution> {
    cfg.validate()?;
    let lag_f = cfg.delta_t / cfg.dt;
    let lag = lag_f.round() as usize;
    if (lag_f - lag as f64).abs() > 1e-9 * lag_f {
        return Err(Error::InvalidParameter(format!(
            "dt = {} must divide delta_t = {}",
            cfg.dt, cfg.delta_t
        )));
    }
    let times = cfg.grid();
    let h = cfg.dt;
    let left = 1.0 - 0.5 * cfg.kappa * h;
    let right = 1.0 + 0.5 * cfg.kappa * h;
    let mut a: Vec<C64> = Vec::with_capacity(times.len());
    a.push(a0);
    for i in 0..times.len() - 1 {
        // Delayed input at the start (right limit) and end (left limit).
        let start = if i >= lag { a[i - lag] } else { C64::from(0.0) };
        let end = if i + 1 > lag { a[i + 1 - lag] } else { C64::from(0.0) };
        let next = (a[i] * left + (start + end) * (0.5 * h * cfg.eta)) / right;
        a.push(next);
    }
    Ok(DdeSolution {
        times,
        amplitude: a,
    })
}

/// Output of the classical chain check.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOracleResult {
    /// Last chain variable `x_n(t)`.
    pub x_n: TimeSeries,
    /// The drive shifted by one delay, `x_0(t - Δt)`.
    pub x0_delayed: TimeSeries,
    /// `sup |x_n(t) - x_0(t - Δt)|` over `t ∈ [2Δt, t_max]`.
    pub sup_error: f64,
}

/// Integration steps per delay for a chain with rate `γ`: at least
/// `100 γ Δt`, rounded up to a multiple of 100 so that samples every
/// `Δt/100` fall on steps.
fn chain_steps_per_delay(n: usize) -> usize {
    let gamma_dt = (n - 1) as f64;
    let raw = (100.0 * gamma_dt).ceil().max(100.0) as usize;
    raw.div_ceil(100) * 100
}

/// Drives the deterministic chain `ẋ_j = v x_j + w x_{j-1}` (`j = 1..n`,
/// `v = -w = -(n-1)/Δt`) with a prescribed `x_0(t)` from rest, using
/// classical RK4, and compares its end with the delayed drive.
pub fn classical_chain_oracle(
    n: usize,
    delta_t: f64,
    x0: &dyn Fn(f64) -> f64,
    t_max: f64,
) -> Result<ChainOracleResult> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("chain needs n >= 2, got {n}")));
    }
    if !(delta_t > 0.0) || !(t_max >= 0.0) || t_max / delta_t > MAX_DELAYS {
        return Err(Error::InvalidParameter(format!(
            "need delta_t > 0 and 0 <= t_max <= {MAX_DELAYS} delta_t"
        )));
    }
    let (x_n, _) = integrate_chain(n, delta_t, x0, vec![0.0; n], t_max)?;
    let delayed: Vec<f64> = x_n
        .times
        .iter()
        .map(|&t| if t >= delta_t { x0(t - delta_t) } else { 0.0 })
        .collect();
    let x0_delayed = TimeSeries::new("x0_delayed", x_n.times.clone(), delayed)?;
    let sup_error = x_n
        .times
        .iter()
        .zip(x_n.values.iter().zip(&x0_delayed.values))
        .filter(|(&t, _)| t >= 2.0 * delta_t - 1e-12)
        .map(|(_, (a, b))| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ChainOracleResult {
        x_n,
        x0_delayed,
        sup_error,
    })
}

/// Response of the chain end to a unit impulse in `x_0` at `t = 0`
/// (realised as `x_1(0⁺) = w`). Analytically equal to `|K_n(t)|` with
/// `γ = (n-1)/Δt`.
pub fn chain_impulse_response(n: usize, delta_t: f64, t_max: f64) -> Result<TimeSeries> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("chain needs n >= 2, got {n}")));
    }
    let w = (n - 1) as f64 / delta_t;
    let mut init = vec![0.0; n];
    init[0] = w;
    Ok(integrate_chain(n, delta_t, &|_| 0.0, init, t_max)?.0)
}

fn integrate_chain(
    n: usize,
    delta_t: f64,
    x0: &dyn Fn(f64) -> f64,
    mut x: Vec<f64>,
    t_max: f64,
) -> Result<(TimeSeries, usize)> {
    let w = (n - 1) as f64 / delta_t;
    let v = -w;
    let per_delay = chain_steps_per_delay(n);
    let h = delta_t / per_delay as f64;
    let sample_every = per_delay / 100;
    let steps = (t_max / h).round() as usize;

    let rhs = |t: f64, x: &[f64], out: &mut [f64]| {
        let mut prev = x0(t);
        for j in 0..x.len() {
            out[j] = v * x[j] + w * prev;
            prev = x[j];
        }
    };
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut times = vec![0.0];
    let mut values = vec![x[n - 1]];
    for step in 0..steps {
        let t = step as f64 * h;
        rhs(t, &x, &mut k1);
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * h * k1[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * h * k2[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for j in 0..n {
            tmp[j] = x[j] + h * k3[j];
        }
        rhs(t + h, &tmp, &mut k4);
        for j in 0..n {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if (step + 1) % sample_every == 0 {
            times.push((step + 1) as f64 * h);
            values.push(x[n - 1]);
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Unstable("chain integration overflowed".into()));
    }
    Ok((TimeSeries::new("x_n", times, values)?, steps))
}
