//! Closed forms for the normal-variance model `y_it = α_i + √θ u_it`.
//!
//! The fixed-effect estimate is the within mean squared deviation and, with
//! simulated panels built from the same α̂, `β̂^h(θ) = θ·S^h` where `S^h` is
//! the within mean squared deviation of the path-`h` normal shocks. The
//! matching equation is therefore linear and `θ̃ = θ̂ / S_H`. These serve as
//! exact references for the generic estimators.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ife::{draw_shocks, ShockStore};
use crate::panel::PanelData;
use crate::rng::{self, Purpose};
use crate::scalar::Scalar;

/// Individual means `α_i0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum AlphaRule {
    /// `α_i0 = i` for `i = 1..=n`.
    Index,
    Constant { value: f64 },
    /// `α_i0 ~ N(mean, sd²)`, drawn from the replication's data stream.
    Normal { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsDesign {
    pub theta0: f64,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub alpha_rule: AlphaRule,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub seed: u64,
}

impl Default for NsDesign {
    fn default() -> Self {
        Self { theta0: 2.0, n: 2500, t: 5, alpha_rule: AlphaRule::Index, r: 1000, h: 1, seed: 1 }
    }
}

impl NsDesign {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta0 > 0.0 && self.theta0.is_finite()) {
            return Err(Error::Config("theta0 must be positive".into()));
        }
        if self.t < 2 {
            return Err(Error::Config("T must be at least 2".into()));
        }
        if self.n == 0 || self.r == 0 || self.h == 0 {
            return Err(Error::Config("n, R and H must be positive".into()));
        }
        Ok(())
    }

    /// Panel of replication `rep`, drawn from stream `(seed, rep, data)`.
    pub fn simulate(&self, rep: usize) -> Result<PanelData<f64>> {
        self.validate()?;
        let mut r = rng::stream(self.seed, rep as u64, Purpose::Data);
        let sd = self.theta0.sqrt();
        let mut y = Vec::with_capacity(self.n * self.t);
        for i in 0..self.n {
            let alpha = match self.alpha_rule {
                AlphaRule::Index => (i + 1) as f64,
                AlphaRule::Constant { value } => value,
                AlphaRule::Normal { mean, sd } => mean + sd * rng::std_normal(&mut r),
            };
            for _ in 0..self.t {
                y.push(alpha + sd * rng::std_normal(&mut r));
            }
        }
        PanelData::new(self.n, self.t, y, vec![], vec![], None)
    }

    /// Shock store of replication `rep`.
    pub fn shocks(&self, rep: usize) -> Result<ShockStore<f64>> {
        draw_shocks(rng::derive_seed(self.seed, rep as u64, Purpose::Shocks), self.h, self.n, self.t)
    }
}

/// Closed-form fixed-effect estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsFe<S> {
    pub theta_hat: S,
    /// Set when `T < 2`: there is no within variation and the estimate is 0.
    pub degenerate: bool,
}

/// `(1/nT) ΣΣ (y_it − ȳ_i)²`.
pub fn ns_fe<S: Scalar>(panel: &PanelData<S>) -> NsFe<S> {
    let t = panel.periods_len();
    if t < 2 {
        return NsFe { theta_hat: S::zero(), degenerate: true };
    }
    let y: Vec<f64> = panel.y().iter().map(|v| v.as_f64()).collect();
    NsFe { theta_hat: S::lit(within_msd(&y, t)), degenerate: false }
}

/// Within-individual mean squared deviation of an `n × t` array.
fn within_msd(y: &[f64], t: usize) -> f64 {
    let mut ss = 0.0;
    for row in y.chunks_exact(t) {
        let mean = row.iter().sum::<f64>() / t as f64;
        ss += row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    }
    ss / y.len() as f64
}

/// `S_H = (1/H) Σ_h (1/nT) ΣΣ (u^h_it − ū^h_i)²` with `u = Φ⁻¹(v)`.
pub fn ns_shock_factor<S: Scalar>(shocks: &ShockStore<S>) -> S {
    let (n, t) = (shocks.n(), shocks.periods_len());
    let mut total = 0.0;
    let mut row = vec![0.0; t];
    for h in 0..shocks.paths() {
        let mut ss = 0.0;
        for i in 0..n {
            for (s, slot) in row.iter_mut().enumerate() {
                *slot = shocks.u(h, i, s).as_f64();
            }
            let mean = row.iter().sum::<f64>() / t as f64;
            ss += row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        total += ss / (n * t) as f64;
    }
    S::lit(total / shocks.paths() as f64)
}

/// `θ̃ = θ̂ / S_H`, the exact solution of the linear matching equation.
pub fn ns_ife<S: Scalar>(theta_hat: S, shocks: &ShockStore<S>) -> Result<S> {
    let s_h = ns_shock_factor(shocks);
    if !(s_h > S::zero()) {
        return Err(Error::Domain("degenerate shocks: S_H = 0".into()));
    }
    Ok(theta_hat / s_h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Sample standard deviation (0 for a single replication).
    pub sd: f64,
    /// Monte Carlo standard error of the mean.
    pub se_mean: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd, se_mean: sd / r.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub estimator: String,
    pub bin_left: f64,
    pub bin_right: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsSummary {
    pub design: NsDesign,
    pub fe: Moments,
    pub ife: Moments,
    pub theta_fe: Vec<f64>,
    pub theta_ife: Vec<f64>,
    pub histogram: Vec<HistogramBin>,
}

pub const HISTOGRAM_BINS: usize = 60;

/// Runs the replications of `design` (in parallel; each owns its streams).
pub fn ns_experiment(design: &NsDesign) -> Result<NsSummary> {
    design.validate()?;
    let pairs: Vec<Result<(f64, f64)>> = (0..design.r)
        .into_par_iter()
        .map(|rep| {
            let panel = design.simulate(rep)?;
            let fe = ns_fe(&panel).theta_hat;
            let ife = ns_ife(fe, &design.shocks(rep)?)?;
            Ok((fe, ife))
        })
        .collect();
    let mut theta_fe = Vec::with_capacity(design.r);
    let mut theta_ife = Vec::with_capacity(design.r);
    for pair in pairs {
        let (a, b) = pair?;
        theta_fe.push(a);
        theta_ife.push(b);
    }
    let histogram = histogram(&[("fe", &theta_fe), ("ife", &theta_ife)], HISTOGRAM_BINS);
    Ok(NsSummary {
        design: design.clone(),
        fe: Moments::of(&theta_fe),
        ife: Moments::of(&theta_ife),
        theta_fe,
        theta_ife,
        histogram,
    })
}

/// Density histograms over common equal-width bins spanning the pooled range.
pub fn histogram(series: &[(&str, &[f64])], bins: usize) -> Vec<HistogramBin> {
    let pooled = series.iter().flat_map(|(_, v)| v.iter().copied());
    let (mut lo, mut hi) = pooled.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        return Vec::new();
    }
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut out = Vec::with_capacity(series.len() * bins);
    for (name, values) in series {
        let mut counts = vec![0usize; bins];
        for v in values.iter() {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let total = values.len().max(1) as f64;
        for (b, c) in counts.into_iter().enumerate() {
            out.push(HistogramBin {
                estimator: name.to_string(),
                bin_left: lo + b as f64 * width,
                bin_right: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width },
                density: c as f64 / (total * width),
            });
        }
    }
    out
}

/// Writes `estimator,bin_left,bin_right,density`.
pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for b in bins {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}
