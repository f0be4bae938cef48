//! Jackknife bias corrections: half-panel (HBC) and leave-one-period-out
//! (BC–HN).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::fe::{fit_fe, FeFit, FeOptions};
use crate::panel::PanelData;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JackknifeMethod {
    Hbc,
    BcHn,
}

impl JackknifeMethod {
    pub fn name(self) -> &'static str {
        match self {
            JackknifeMethod::Hbc => "hbc",
            JackknifeMethod::BcHn => "bc_hn",
        }
    }
}

/// A fit on part of the panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SubFit<S> {
    /// E.g. `first half`, `second half (split 2)`, `without t=3`.
    pub label: String,
    pub fit: FeFit<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JackknifeFit<S> {
    pub method: JackknifeMethod,
    pub theta_corrected: Vec<S>,
    /// Fit on the whole panel.
    pub full: FeFit<S>,
    pub subfits: Vec<SubFit<S>>,
    /// Full-sample fixed-effect standard errors.
    pub se: Vec<S>,
}

impl<S: Scalar> JackknifeFit<S> {
    /// Applies the method's combination rule to the stored fits.
    pub fn recompute(&self) -> Vec<S> {
        let subs: Vec<&[S]> = self.subfits.iter().map(|s| s.fit.theta_hat.as_slice()).collect();
        let t = self.full.n_obs / self.full.kept().len().max(1);
        combine(self.method, &self.full.theta_hat, &subs, t)
    }
}

/// HBC: `2θ̂ − mean(half-panel estimates)`; BC–HN: `Tθ̂ − (T−1)·mean(θ̂₍₋ₜ₎)`.
fn combine<S: Scalar>(method: JackknifeMethod, full: &[S], subs: &[&[S]], t: usize) -> Vec<S> {
    let m = S::from_usize_lossy(subs.len());
    let (a, b) = match method {
        JackknifeMethod::Hbc => (S::lit(2.0), S::one()),
        JackknifeMethod::BcHn => {
            let t = S::from_usize_lossy(t);
            (t, t - S::one())
        }
    };
    (0..full.len())
        .map(|k| {
            let mean = subs.iter().map(|s| s[k]).sum::<S>() / m;
            a * full[k] - b * mean
        })
        .collect()
}

/// Half-panel jackknife. For odd `T` both splits (`⌈T/2⌉ + ⌊T/2⌋` and
/// `⌊T/2⌋ + ⌈T/2⌉`) are used and all four half estimates averaged.
pub fn hbc<S: Scalar>(panel: &PanelData<S>, family: Family, opts: &FeOptions<S>) -> Result<JackknifeFit<S>> {
    let t = panel.periods_len();
    if t < 4 {
        return Err(Error::Domain(format!("half-panel jackknife needs T >= 4 (each half needs >= 2 periods), got {t}")));
    }
    let full = fit_fe(panel, family, opts)?;
    let cuts: Vec<(usize, &str)> = if t % 2 == 0 {
        vec![(t / 2, "")]
    } else {
        vec![(t / 2 + 1, " (split 1)"), (t / 2, " (split 2)")]
    };
    let mut subfits = Vec::new();
    for (cut, suffix) in cuts {
        for (range, name) in [(0..cut, "first half"), (cut..t, "second half")] {
            let label = format!("{name}{suffix}");
            let fit = panel
                .slice_periods(range)
                .and_then(|half| fit_fe(&half, family, opts))
                .map_err(|e| Error::subfit(label.clone(), e))?;
            subfits.push(SubFit { label, fit });
        }
    }
    Ok(finish(JackknifeMethod::Hbc, full, subfits, t))
}

/// Leave-one-period-out jackknife for static panels.
pub fn bc_hn<S: Scalar>(panel: &PanelData<S>, family: Family, opts: &FeOptions<S>) -> Result<JackknifeFit<S>> {
    if panel.lag_column().is_some() {
        return Err(Error::NotApplicable("bc_hn is not applicable due to dynamics (lagged outcome)".into()));
    }
    let t = panel.periods_len();
    if t < 3 {
        return Err(Error::Domain(format!("leave-one-out jackknife needs T >= 3, got {t}")));
    }
    let full = fit_fe(panel, family, opts)?;
    let mut subfits = Vec::with_capacity(t);
    for s in 0..t {
        let label = format!("without t={}", panel.periods()[s]);
        let fit = panel
            .drop_period(s)
            .and_then(|sub| fit_fe(&sub, family, opts))
            .map_err(|e| Error::subfit(label.clone(), e))?;
        subfits.push(SubFit { label, fit });
    }
    Ok(finish(JackknifeMethod::BcHn, full, subfits, t))
}

fn finish<S: Scalar>(method: JackknifeMethod, full: FeFit<S>, subfits: Vec<SubFit<S>>, t: usize) -> JackknifeFit<S> {
    let subs: Vec<&[S]> = subfits.iter().map(|s| s.fit.theta_hat.as_slice()).collect();
    let theta_corrected = combine(method, &full.theta_hat, &subs, t);
    let se = full.se.clone();
    JackknifeFit { method, theta_corrected, full, subfits, se }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};

    fn ns_panel(n: usize, t: usize, theta0: f64, seed: u64) -> PanelData<f64> {
        let mut r = rng::stream(seed, 0, Purpose::Data);
        let y = (0..n * t).map(|k| (k / t) as f64 + theta0.sqrt() * rng::std_normal(&mut r)).collect();
        PanelData::new(n, t, y, vec![], vec![], None).unwrap()
    }

    fn probit_panel(n: usize, t: usize, seed: u64) -> PanelData<f64> {
        let mut r = rng::stream(seed, 0, Purpose::Data);
        let mut y = Vec::new();
        let mut x = Vec::new();
        for _ in 0..n {
            let a = rng::std_normal(&mut r);
            for _ in 0..t {
                let xv = rng::std_normal(&mut r);
                y.push(if xv + a >= rng::std_normal(&mut r) { 1.0 } else { 0.0 });
                x.push(xv);
            }
        }
        PanelData::new(n, t, y, x, vec!["x".into()], None).unwrap()
    }

    #[test]
    fn combination_rules_are_auditable() {
        let opts = FeOptions::default();
        for t in [4, 5, 6] {
            let panel = ns_panel(30, t, 2.0, t as u64);
            let h = hbc(&panel, Family::NeymanScott, &opts).unwrap();
            assert_eq!(h.subfits.len(), if t % 2 == 0 { 2 } else { 4 });
            let re = h.recompute();
            assert!((re[0] - h.theta_corrected[0]).abs() <= 1e-12);
            let b = bc_hn(&panel, Family::NeymanScott, &opts).unwrap();
            assert_eq!(b.subfits.len(), t);
            assert!((b.recompute()[0] - b.theta_corrected[0]).abs() <= 1e-12);
            assert_eq!(b.se, b.full.se);
        }
    }

    #[test]
    fn identical_halves_leave_estimate_unchanged() {
        // Repeating the same two periods makes both halves identical to the full panel.
        let base = ns_panel(20, 2, 1.0, 3);
        let mut y = Vec::new();
        for i in 0..20 {
            let yi = base.individual_y(i);
            y.extend([yi[0], yi[1], yi[0], yi[1]]);
        }
        let panel = PanelData::new(20, 4, y, vec![], vec![], None).unwrap();
        let h = hbc(&panel, Family::NeymanScott, &FeOptions::default()).unwrap();
        assert!((h.theta_corrected[0] - h.full.theta_hat[0]).abs() < 1e-12);
    }

    #[test]
    fn hand_combination() {
        let full = [1.0, 2.0];
        let a = [0.5, 1.0];
        let b = [1.5, 2.0];
        assert_eq!(combine(JackknifeMethod::Hbc, &full, &[&a, &b], 4), vec![1.0, 2.5]);
        let subs: Vec<&[f64]> = vec![&full; 5];
        assert_eq!(combine(JackknifeMethod::BcHn, &full, &subs, 5), full.to_vec());
    }

    #[test]
    fn preconditions() {
        let panel = ns_panel(10, 3, 1.0, 1);
        assert!(matches!(hbc(&panel, Family::NeymanScott, &FeOptions::default()), Err(Error::Domain(_))));
        let short = ns_panel(10, 2, 1.0, 1);
        assert!(bc_hn(&short, Family::NeymanScott, &FeOptions::default()).is_err());
        let x: Vec<f64> = vec![1.0; 40];
        let dynamic = PanelData::new(10, 4, vec![1.0; 40], x, vec!["lag".into()], Some(0)).unwrap();
        let err = bc_hn(&dynamic, Family::Probit, &FeOptions::default()).unwrap_err();
        assert!(err.to_string().contains("dynamics"));
    }

    #[test]
    fn subfit_failure_names_the_half() {
        // Every individual varies overall but not within the second half.
        let n = 6;
        let mut y = Vec::new();
        let mut x = Vec::new();
        for i in 0..n {
            y.extend([1.0, 0.0, 1.0, 1.0]);
            x.extend([0.1 * i as f64, -0.3, 0.5, 0.2 + i as f64]);
        }
        let panel = PanelData::new(n, 4, y, x, vec!["x".into()], None).unwrap();
        let err = hbc(&panel, Family::Probit, &FeOptions::default()).unwrap_err();
        assert!(err.to_string().starts_with("second half"), "{err}");
    }

    #[test]
    fn probit_hbc_runs() {
        let panel = probit_panel(200, 6, 11);
        let fit = hbc(&panel, Family::Probit, &FeOptions::default()).unwrap();
        // Correction pulls the upward-biased estimate down.
        assert!(fit.theta_corrected[0] < fit.full.theta_hat[0]);
        let b = bc_hn(&panel, Family::Probit, &FeOptions::default()).unwrap();
        assert!(b.theta_corrected[0] < b.full.theta_hat[0]);
    }
}
