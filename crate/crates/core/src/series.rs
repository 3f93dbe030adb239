use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A named, sampled observable. Missing samples are stored as NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: BTreeMap<String, String>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "time series has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "time series times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            times,
            values,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.meta.insert(key.into(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation; `None` outside the sampled range or next to a
    /// missing sample.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if t < first || t > last {
            return None;
        }
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            return Some(self.values[0]).filter(|v| !v.is_nan());
        }
        let i = idx - 1;
        if i + 1 == self.times.len() {
            return Some(self.values[i]).filter(|v| !v.is_nan());
        }
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let v = v0 + (v1 - v0) * (t - t0) / (t1 - t0);
        Some(v).filter(|v| !v.is_nan())
    }

    /// Maximum of `|self - other|` over the samples of `self` inside
    /// `[from, to]`, with `other` interpolated onto those times.
    pub fn sup_deviation(&self, other: &TimeSeries, from: f64, to: f64) -> Option<f64> {
        let mut sup: Option<f64> = None;
        for (&t, &v) in self.times.iter().zip(&self.values) {
            if t < from || t > to || v.is_nan() {
                continue;
            }
            let w = other.interpolate(t)?;
            let d = (v - w).abs();
            sup = Some(sup.map_or(d, |s: f64| s.max(d)));
        }
        sup
    }

    /// First time the series reaches `level` from below, linearly
    /// interpolated between samples, searching from `after` onwards.
    pub fn first_crossing(&self, level: f64, after: f64) -> Option<f64> {
        let mut prev: Option<(f64, f64)> = None;
        for (&t, &v) in self.times.iter().zip(&self.values) {
            if v.is_nan() || t < after {
                prev = None;
                continue;
            }
            if let Some((tp, vp)) = prev {
                if vp < level && v >= level {
                    return Some(tp + (level - vp) * (t - tp) / (v - vp));
                }
            } else if v >= level && t == after {
                return Some(t);
            }
            prev = Some((t, v));
        }
        None
    }

    /// Time of the largest value (first occurrence).
    pub fn argmax(&self) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| !v.is_nan())
            .fold(None, |best: Option<(f64, f64)>, (&t, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((t, v)),
            })
            .map(|(t, _)| t)
    }

    /// Mean over the samples inside `[from, to]`.
    pub fn window_mean(&self, from: f64, to: f64) -> Option<f64> {
        let (sum, count) = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(&t, v)| t >= from && t <= to && !v.is_nan())
            .fold((0.0, 0usize), |(s, c), (_, &v)| (s + v, c + 1));
        (count > 0).then(|| sum / count as f64)
    }
}

/// `n` uniformly spaced samples `0, dt, 2 dt, …` up to and including `t_max`.
pub fn uniform_grid(t_max: f64, samples_per_unit: usize, unit: f64) -> Vec<f64> {
    let dt = unit / samples_per_unit as f64;
    let steps = (t_max / dt).round() as usize;
    (0..=steps).map(|k| k as f64 * dt).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_increasing_times() {
        assert!(TimeSeries::new("x", vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new("x", vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn interpolation_and_crossing() {
        let ts = TimeSeries::new("x", vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(ts.interpolate(0.25), Some(0.25));
        assert_eq!(ts.interpolate(2.5), None);
        assert_eq!(ts.first_crossing(0.5, 0.0), Some(0.5));
        assert_eq!(ts.argmax(), Some(1.0));
        assert_eq!(ts.window_mean(1.0, 2.0), Some(1.0));
    }

    #[test]
    fn grid_endpoints() {
        let g = uniform_grid(2.0, 4, 1.0);
        assert_eq!(g.len(), 9);
        assert_eq!(*g.last().unwrap(), 2.0);
    }
}
