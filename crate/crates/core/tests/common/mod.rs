#![allow(dead_code)]

use ife_core::panel::PanelData;
use ife_core::rng::{self, Purpose};

/// Probit panel with `x_it ~ N(0,1)` regressors and `α_i ~ N(0,1)`; returns
/// the panel and the true effects.
pub fn probit_panel(n: usize, t: usize, theta: &[f64], seed: u64) -> (PanelData<f64>, Vec<f64>) {
    let p = theta.len();
    let mut r = rng::stream(seed, 0, Purpose::Data);
    let mut y = Vec::with_capacity(n * t);
    let mut x = Vec::with_capacity(n * t * p);
    let mut alpha = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng::std_normal(&mut r);
        alpha.push(a);
        for _ in 0..t {
            let mut eta = a;
            for th in theta {
                let v = rng::std_normal(&mut r);
                x.push(v);
                eta += th * v;
            }
            y.push(if eta >= rng::std_normal(&mut r) { 1.0 } else { 0.0 });
        }
    }
    let names = (0..p).map(|k| format!("x{k}")).collect();
    (PanelData::new(n, t, y, x, names, None).unwrap(), alpha)
}

/// Poisson panel with `x_it ~ U(−1, 1)` and `α_i ~ U(−1, 1)`.
pub fn poisson_panel(n: usize, t: usize, theta: &[f64], seed: u64) -> PanelData<f64> {
    let p = theta.len();
    let mut r = rng::stream(seed, 0, Purpose::Data);
    let mut y = Vec::with_capacity(n * t);
    let mut x = Vec::with_capacity(n * t * p);
    for _ in 0..n {
        let a = rng::uniform(&mut r, -1.0, 1.0);
        for _ in 0..t {
            let mut eta = a;
            for th in theta {
                let v = rng::uniform(&mut r, -1.0, 1.0);
                x.push(v);
                eta += th * v;
            }
            // Inversion against the Poisson CDF by sequential search.
            let u = rng::uniform(&mut r, 0.0, 1.0);
            let lambda = eta.exp();
            let (mut k, mut pk) = (0.0, (-lambda).exp());
            let mut cdf = pk;
            while u > cdf && k < 200.0 {
                k += 1.0;
                pk *= lambda / k;
                cdf += pk;
            }
            y.push(k);
        }
    }
    let names = (0..p).map(|k| format!("x{k}")).collect();
    PanelData::new(n, t, y, x, names, None).unwrap()
}

/// `y_it = α_i + √θ₀ ε_it` with `α_i = i`.
pub fn ns_panel(n: usize, t: usize, theta0: f64, seed: u64) -> PanelData<f64> {
    let mut r = rng::stream(seed, 0, Purpose::Data);
    let y = (0..n * t).map(|k| (k / t) as f64 + theta0.sqrt() * rng::std_normal(&mut r)).collect();
    PanelData::new(n, t, y, vec![], vec![], None).unwrap()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation.
pub fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

/// Standard error of the mean.
pub fn se_mean(v: &[f64]) -> f64 {
    sd(v) / (v.len() as f64).sqrt()
}
