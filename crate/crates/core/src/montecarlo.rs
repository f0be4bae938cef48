//! Monte Carlo designs and the replication harness.
//!
//! Three designs are supported: the varying-T probit design with a trending
//! autoregressive regressor, and static or dynamic designs calibrated to a
//! data set (the fixed-effect estimates on that data are the truth and its
//! regressors are held fixed across replications). Every replication draws
//! from its own streams, so results do not depend on scheduling.

use std::io::Write;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::fe::{fit_fe, FeOptions};
use crate::fmt::sig6;
use crate::ife::{draw_shocks, simulate_panel, solve_ife, IfeOptions, IfeStatus};
use crate::jackknife::{bc_hn, hbc};
use crate::panel::PanelData;
use crate::rng::{self, Purpose};

/// Critical value of the nominal 95% intervals.
pub const Z95: f64 = 1.96;

/// Share of failed replications above which a result is flagged unreliable.
pub const UNRELIABLE_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    CalibratedStatic,
    CalibratedDynamic,
    #[serde(rename = "varying_T")]
    VaryingT,
}

impl DesignKind {
    pub fn name(self) -> &'static str {
        match self {
            DesignKind::CalibratedStatic => "calibrated_static",
            DesignKind::CalibratedDynamic => "calibrated_dynamic",
            DesignKind::VaryingT => "varying_T",
        }
    }
}

impl std::str::FromStr for DesignKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "calibrated_static" | "static" => Ok(DesignKind::CalibratedStatic),
            "calibrated_dynamic" | "dynamic" => Ok(DesignKind::CalibratedDynamic),
            "varying_t" => Ok(DesignKind::VaryingT),
            _ => Err(Error::Config(format!("unknown design '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Echoes the truth with zero standard error; checks the harness itself.
    Truth,
    Fe,
    Ife,
    Hbc,
    BcHn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Truth => "truth",
            Method::Fe => "fe",
            Method::Ife => "ife",
            Method::Hbc => "hbc",
            Method::BcHn => "bc_hn",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "truth" => Ok(Method::Truth),
            "fe" => Ok(Method::Fe),
            "ife" => Ok(Method::Ife),
            "hbc" => Ok(Method::Hbc),
            "bc_hn" | "bchn" => Ok(Method::BcHn),
            _ => Err(Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

/// A Monte Carlo design.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub kind: DesignKind,
    pub family: Family,
    pub n: usize,
    pub t: usize,
    pub theta0: Vec<f64>,
    /// Truth effects of a calibrated design; empty for `varying_T`, which
    /// draws fresh effects each replication.
    pub alpha0: Vec<f64>,
    /// Frozen regressors (and initial outcomes) of a calibrated design.
    pub template: Option<PanelData<f64>>,
    pub r: usize,
    pub h: usize,
    pub seed: u64,
    /// Empty means the truth echo only.
    pub methods: Vec<Method>,
    pub fe: FeOptions<f64>,
    pub ife: IfeOptions<f64>,
}

impl Design {
    /// The varying-T probit design with `θ₀ = 1`.
    pub fn varying_t(n: usize, t: usize, r: usize, h: usize, seed: u64, methods: Vec<Method>) -> Self {
        Self {
            kind: DesignKind::VaryingT,
            family: Family::Probit,
            n,
            t,
            theta0: vec![1.0],
            alpha0: Vec::new(),
            template: None,
            r,
            h,
            seed,
            methods,
            fe: FeOptions::default(),
            ife: IfeOptions::default(),
        }
    }

    /// A calibrated design built from [`calibrate`]. The kind follows from
    /// whether the data carry a lag column.
    pub fn calibrated(cal: Calibration, r: usize, h: usize, seed: u64, methods: Vec<Method>) -> Self {
        let kind = if cal.template.lag_column().is_some() {
            DesignKind::CalibratedDynamic
        } else {
            DesignKind::CalibratedStatic
        };
        Self {
            kind,
            family: cal.family,
            n: cal.template.n(),
            t: cal.template.periods_len(),
            theta0: cal.theta,
            alpha0: cal.alpha,
            template: Some(cal.template),
            r,
            h,
            seed,
            methods,
            fe: FeOptions::default(),
            ife: IfeOptions::default(),
        }
    }

    pub fn coefficient_names(&self) -> Vec<String> {
        match &self.template {
            Some(t) => t.column_names().to_vec(),
            None => vec!["x".into()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::Config("R must be at least 1".into()));
        }
        if self.methods.contains(&Method::Ife) && self.h == 0 {
            return Err(Error::Config("H must be at least 1".into()));
        }
        match (self.kind, &self.template) {
            (DesignKind::VaryingT, _) => {
                if self.family != Family::Probit && self.family != Family::Poisson {
                    return Err(Error::Config("varying_T needs an index family".into()));
                }
                if self.theta0.len() != 1 || self.n == 0 || self.t == 0 {
                    return Err(Error::Config("varying_T needs one coefficient and n, T >= 1".into()));
                }
            }
            (kind, Some(template)) => {
                if self.theta0.len() != self.family.theta_dim(template.p()) {
                    return Err(Error::Config("theta0 does not match the regressors".into()));
                }
                if self.alpha0.len() != template.n() {
                    return Err(Error::Config("alpha0 does not match the regressors".into()));
                }
                if (kind == DesignKind::CalibratedDynamic) != template.lag_column().is_some() {
                    return Err(Error::Config("dynamic designs need a lag column and static designs none".into()));
                }
            }
            (_, None) => return Err(Error::Config("calibrated designs need data".into())),
        }
        if self.kind == DesignKind::CalibratedDynamic && self.methods.contains(&Method::BcHn) {
            return Err(Error::NotApplicable("bc_hn is not applicable due to dynamics".into()));
        }
        Ok(())
    }

    /// The data set of replication `rep`.
    pub fn generate(&self, rep: usize) -> Result<PanelData<f64>> {
        match self.kind {
            DesignKind::VaryingT => generate_varying_t(self, rep),
            _ => generate_calibrated(self, rep),
        }
    }

    pub fn echo(&self) -> DesignEcho {
        DesignEcho {
            kind: self.kind,
            family: self.family,
            n: self.n,
            t: self.t,
            theta0: self.theta0.clone(),
            coefficients: self.coefficient_names(),
            alpha0: self.alpha0.clone(),
            r: self.r,
            h: self.h,
            seed: self.seed,
            methods: self.methods.clone(),
            z: Z95,
            tol_match: self.ife.tol_match,
        }
    }
}

/// Serializable description of a design, embedded in every result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEcho {
    pub kind: DesignKind,
    pub family: Family,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub theta0: Vec<f64>,
    pub coefficients: Vec<String>,
    pub alpha0: Vec<f64>,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub z: f64,
    pub tol_match: f64,
}

/// Truth for a calibrated design.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub family: Family,
    pub theta: Vec<f64>,
    /// Effects of the retained individuals, aligned with `template`.
    pub alpha: Vec<f64>,
    /// The data restricted to retained individuals; its regressors are frozen.
    pub template: PanelData<f64>,
    /// Indices (in the input panel) of individuals excluded for separation.
    pub dropped: Vec<usize>,
}

/// Fixed-effect estimates on `panel`, taken verbatim as a design's truth.
pub fn calibrate(panel: &PanelData<f64>, family: Family, opts: &FeOptions<f64>) -> Result<Calibration> {
    let fit = fit_fe(panel, family, opts)?;
    let kept = fit.kept();
    Ok(Calibration {
        family,
        theta: fit.theta_hat.clone(),
        alpha: kept.iter().map(|&i| fit.alpha_hat[i]).collect(),
        template: panel.subset_individuals(&kept)?,
        dropped: fit.dropped,
    })
}

/// Varying-T data for replication `rep`: `α_i ~ N(0,1)`,
/// `x_it = t/10 + x_{i,t−1}/2 + u_it` with `x_i0 = u_i0`, `u ~ U(−½, ½)`,
/// and outcomes from the design's family at index `θ₀x_it + α_i`.
pub fn generate_varying_t(design: &Design, rep: usize) -> Result<PanelData<f64>> {
    if design.kind != DesignKind::VaryingT {
        return Err(Error::Config("not a varying_T design".into()));
    }
    let (n, t) = (design.n, design.t);
    let mut r = rng::stream(design.seed, rep as u64, Purpose::Data);
    let mut alpha = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n * (t + 1));
    let mut v = Vec::with_capacity(n * t);
    for _ in 0..n {
        alpha.push(rng::std_normal(&mut r));
        u.push(rng::uniform(&mut r, -0.5, 0.5));
        for _ in 0..t {
            u.push(rng::uniform(&mut r, -0.5, 0.5));
            v.push(rng::open_unit::<f64>(r.next_u64()));
        }
    }
    varying_t_from_draws(design.family, design.theta0[0], t, &alpha, &u, &v)
}

/// Builds a varying-T panel from explicit draws: `u` is `n × (T+1)` (the
/// first entry per individual is `u_i0`) and `v` the `n × T` outcome shocks.
pub fn varying_t_from_draws(
    family: Family,
    theta0: f64,
    t: usize,
    alpha: &[f64],
    u: &[f64],
    v: &[f64],
) -> Result<PanelData<f64>> {
    let n = alpha.len();
    let mut x = Vec::with_capacity(n * t);
    let mut y = Vec::with_capacity(n * t);
    for i in 0..n {
        let mut prev = u[i * (t + 1)];
        for s in 1..=t {
            let xv = s as f64 / 10.0 + prev / 2.0 + u[i * (t + 1) + s];
            let eta = theta0 * xv + alpha[i];
            y.push(family.simulate_unchecked(eta, v[i * t + s - 1], 0.0));
            x.push(xv);
            prev = xv;
        }
    }
    PanelData::new(n, t, y, x, vec!["x".into()], None)
}

/// Calibrated data for replication `rep`: outcomes simulated from the truth
/// on the frozen regressors; dynamic designs start from the observed initial
/// outcomes.
pub fn generate_calibrated(design: &Design, rep: usize) -> Result<PanelData<f64>> {
    let template = design.template.as_ref().ok_or_else(|| Error::Config("calibrated design without data".into()))?;
    let seed = rng::derive_seed(design.seed, rep as u64, Purpose::Data);
    let shocks = draw_shocks::<f64>(seed, 1, template.n(), template.periods_len())?;
    let init = template.initial_outcomes();
    let y = simulate_panel(design.family, &design.theta0, &design.alpha0, template, &shocks, 0, init.as_deref())?;
    template.with_outcomes(y)
}

/// `estimate ± 1.96·se`.
pub fn coverage_interval(estimate: f64, se: f64) -> (f64, f64) {
    (estimate - Z95 * se, estimate + Z95 * se)
}

/// Point estimates and standard errors of one method in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub theta: Vec<f64>,
    pub se: Vec<f64>,
    /// Set for IFE runs whose residual stayed above the tolerance.
    pub resolution_limited: bool,
}

/// Outcome of one replication, per requested method.
#[derive(Debug, Clone)]
pub struct Replication {
    pub index: usize,
    pub results: Vec<(Method, std::result::Result<Estimate, String>)>,
}

/// Runs the requested methods on one generated data set.
pub fn run_replication(design: &Design, rep: usize) -> Replication {
    let methods: Vec<Method> = if design.methods.is_empty() { vec![Method::Truth] } else { design.methods.clone() };
    let failed_all = |msg: String| Replication {
        index: rep,
        results: methods.iter().map(|m| (*m, Err(msg.clone()))).collect(),
    };
    let panel = match design.generate(rep) {
        Ok(p) => p,
        Err(e) => return failed_all(format!("generation: {e}")),
    };
    let needs_fe = methods.iter().any(|m| matches!(m, Method::Fe | Method::Ife));
    let base = if needs_fe { Some(fit_fe(&panel, design.family, &design.fe).map_err(|e| e.to_string())) } else { None };
    let mut results = Vec::with_capacity(methods.len());
    for &m in &methods {
        let out = match m {
            Method::Truth => Ok(Estimate {
                theta: design.theta0.clone(),
                se: vec![0.0; design.theta0.len()],
                resolution_limited: false,
            }),
            Method::Fe => base.clone().unwrap().map(|f| Estimate { theta: f.theta_hat, se: f.se, resolution_limited: false }),
            Method::Ife => match base.as_ref().unwrap() {
                Err(e) => Err(e.clone()),
                Ok(fit) => {
                    let seed = rng::derive_seed(design.seed, rep as u64, Purpose::Shocks);
                    draw_shocks(seed, design.h, panel.n(), panel.periods_len())
                        .and_then(|shocks| solve_ife(fit, &shocks, &panel, design.family, &design.ife))
                        .map_err(|e| e.to_string())
                        .and_then(|f| match f.status {
                            IfeStatus::NotConverged => {
                                Err(format!("matching not solved (residual {:e})", f.residual))
                            }
                            status => Ok(Estimate {
                                theta: f.theta_tilde,
                                se: f.se,
                                resolution_limited: status == IfeStatus::ResolutionLimited,
                            }),
                        })
                }
            },
            Method::Hbc => hbc(&panel, design.family, &design.fe)
                .map(|j| Estimate { theta: j.theta_corrected, se: j.se, resolution_limited: false })
                .map_err(|e| e.to_string()),
            Method::BcHn => bc_hn(&panel, design.family, &design.fe)
                .map(|j| Estimate { theta: j.theta_corrected, se: j.se, resolution_limited: false })
                .map_err(|e| e.to_string()),
        };
        results.push((m, out));
    }
    Replication { index: rep, results }
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: Method,
    pub coefficient: String,
    /// Mean relative bias ×100.
    pub bias: f64,
    /// Standard deviation of estimate/truth ×100.
    pub stddev: f64,
    pub coverage: f64,
    #[serde(rename = "R_effective")]
    pub r_effective: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    #[serde(rename = "R_effective")]
    pub r_effective: usize,
    pub failed: usize,
    /// IFE replications whose residual stayed above the tolerance at the
    /// resolution of the simulated estimates (included in the metrics).
    pub resolution_limited: usize,
    /// First few failure messages, for diagnosis.
    pub failure_examples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub design: DesignEcho,
    pub rows: Vec<MetricRow>,
    pub methods: Vec<MethodSummary>,
    /// More than 20% of replications failed for some method.
    pub unreliable: bool,
    /// Not serialized so output files stay reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Runs all replications and aggregates bias, dispersion and coverage.
pub fn run_design(design: &Design) -> Result<McResult> {
    design.validate()?;
    let start = Instant::now();
    let reps: Vec<Replication> = (0..design.r).into_par_iter().map(|rep| run_replication(design, rep)).collect();
    let mut result = aggregate(design, &reps);
    result.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Metrics from replication outcomes. Aggregation runs over replications in
/// index order.
pub fn aggregate(design: &Design, reps: &[Replication]) -> McResult {
    let names = design.coefficient_names();
    let methods: Vec<Method> = if design.methods.is_empty() { vec![Method::Truth] } else { design.methods.clone() };
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut unreliable = false;
    for (mi, &m) in methods.iter().enumerate() {
        let mut ok: Vec<&Estimate> = Vec::new();
        let mut failures = Vec::new();
        for rep in reps {
            match &rep.results[mi].1 {
                Ok(e) => ok.push(e),
                Err(msg) => failures.push(format!("replication {}: {msg}", rep.index)),
            }
        }
        if failures.len() as f64 > UNRELIABLE_SHARE * reps.len() as f64 {
            unreliable = true;
        }
        for (k, name) in names.iter().enumerate() {
            let truth = design.theta0[k];
            // Relative statistics; a zero truth falls back to absolute ones.
            let scale = if truth != 0.0 { truth } else { 1.0 };
            let rel: Vec<f64> = ok.iter().map(|e| e.theta[k] / scale).collect();
            let bias: Vec<f64> = ok.iter().map(|e| (e.theta[k] - truth) / scale).collect();
            let covered = ok
                .iter()
                .filter(|e| {
                    let (lo, hi) = coverage_interval(e.theta[k], e.se[k]);
                    lo <= truth && truth <= hi
                })
                .count();
            let count = ok.len() as f64;
            rows.push(MetricRow {
                method: m,
                coefficient: name.clone(),
                bias: 100.0 * mean(&bias),
                stddev: 100.0 * sample_sd(&rel),
                coverage: covered as f64 / count,
                r_effective: ok.len(),
            });
        }
        summaries.push(MethodSummary {
            method: m,
            r_effective: ok.len(),
            failed: failures.len(),
            resolution_limited: ok.iter().filter(|e| e.resolution_limited).count(),
            failure_examples: failures.into_iter().take(5).collect(),
        });
    }
    McResult { design: design.echo(), rows, methods: summaries, unreliable, wall_time_secs: 0.0 }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl McResult {
    pub fn row(&self, method: Method, coefficient: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.method == method && r.coefficient == coefficient)
    }

    /// `method,coefficient,bias,stddev,coverage,R_effective`, six significant
    /// digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "coefficient", "bias", "stddev", "coverage", "R_effective"])?;
        for r in &self.rows {
            w.write_record([
                r.method.name().to_string(),
                r.coefficient.clone(),
                sig6(r.bias),
                sig6(r.stddev),
                sig6(r.coverage),
                r.r_effective.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Presentation table: one block per method with bias, std dev and
    /// coverage at two decimals.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let width = self.rows.iter().map(|r| r.coefficient.len()).max().unwrap_or(4).max(11);
        out.push_str(&format!("{:<8} {:<width$} {:>9} {:>9} {:>9} {:>5}\n", "method", "coefficient", "bias", "std dev", "coverage", "R"));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:<width$} {:>9.2} {:>9.2} {:>9.2} {:>5}\n",
                r.method.name(),
                r.coefficient,
                r.bias,
                r.stddev,
                r.coverage,
                r.r_effective
            ));
        }
        for s in &self.methods {
            if s.failed > 0 || s.resolution_limited > 0 {
                out.push_str(&format!(
                    "{}: {} failed, {} at simulation resolution\n",
                    s.method.name(),
                    s.failed,
                    s.resolution_limited
                ));
            }
        }
        if self.unreliable {
            out.push_str("UNRELIABLE: more than 20% of replications failed for some method\n");
        }
        out
    }
}

/// Covariate names of the synthetic labour-force data.
pub const LFP_COLUMNS: [&str; 5] = ["lfp_lagged", "kids0_2", "kids3_5", "loghusinc", "age"];

/// Coefficients of the synthetic labour-force generator, ordered like
/// [`LFP_COLUMNS`]. The static variant drops the first.
pub const LFP_GENERATOR_THETA: [f64; 5] = [1.0, -0.6, -0.35, -0.3, 0.5];

/// A synthetic married-women labour-force panel standing in for survey data
/// that cannot be redistributed. Children counts follow individual Markov
/// chains, log husband income an AR(1) around an individual mean, and age
/// (in decades) advances one year per period. Effects are correlated with
/// fertility. Only individuals whose participation changes over the `t`
/// sample periods are kept, until `n` are collected. With `dynamic` the
/// first column is the lagged outcome, whose first-period value is an
/// observed initial condition.
pub fn synthetic_lfp(n: usize, t: usize, dynamic: bool, seed: u64) -> Result<PanelData<f64>> {
    if n == 0 || t < 2 {
        return Err(Error::Config("synthetic data need n >= 1 and T >= 2".into()));
    }
    let theta = &LFP_GENERATOR_THETA;
    let burn_in = 4;
    let mut y_all = Vec::with_capacity(n * t);
    let mut x_all = Vec::new();
    let mut candidate = 0u64;
    while y_all.len() < n * t {
        if candidate > 1000 * n as u64 {
            return Err(Error::Config("synthetic generator cannot find enough movers".into()));
        }
        let mut r = rng::stream(seed, candidate, Purpose::Data);
        candidate += 1;
        let taste = rng::std_normal(&mut r);
        let fertility = -0.4 * taste + 0.8 * rng::std_normal(&mut r);
        let alpha = 0.4 + taste;
        let inc_mean = 10.4 + 0.4 * rng::std_normal(&mut r);
        let mut inc_dev = 0.25 * rng::std_normal(&mut r);
        let mut age = rng::uniform(&mut r, 22.0, 50.0) - burn_in as f64;
        let birth_rate = (0.12 + 0.08 * fertility).clamp(0.01, 0.4) * (1.0 - ((age - 20.0) / 30.0).clamp(0.0, 1.0));
        let mut kids02: f64 = if rng::uniform(&mut r, 0.0, 1.0) < 2.0 * birth_rate { 1.0 } else { 0.0 };
        let mut kids35: f64 = if rng::uniform(&mut r, 0.0, 1.0) < 2.0 * birth_rate { 1.0 } else { 0.0 };
        let mut prev_y = if rng::uniform(&mut r, 0.0, 1.0) < 0.6 { 1.0 } else { 0.0 };
        let mut ys = Vec::with_capacity(t);
        let mut xs = Vec::with_capacity(t * 5);
        for s in 0..(burn_in + t) {
            // Children age out of the 0-2 band into 3-5 and leave that band.
            if rng::uniform(&mut r, 0.0, 1.0) < 0.3 && kids35 > 0.0 {
                kids35 -= 1.0;
            }
            if rng::uniform(&mut r, 0.0, 1.0) < 0.33 && kids02 > 0.0 {
                kids02 -= 1.0;
                kids35 += 1.0;
            }
            let fertile = (1.0 - ((age - 20.0) / 25.0).clamp(0.0, 1.0)).max(0.0);
            if rng::uniform(&mut r, 0.0, 1.0) < birth_rate.max(0.02) * fertile * 2.0 && kids02 < 2.0 {
                kids02 += 1.0;
            }
            inc_dev = 0.7 * inc_dev + 0.15 * rng::std_normal(&mut r);
            let loghusinc = inc_mean + inc_dev;
            let age_dec = age / 10.0;
            let lag_term = if dynamic { theta[0] * prev_y } else { 0.0 };
            let eta = alpha + lag_term + theta[1] * kids02 + theta[2] * kids35 + theta[3] * (loghusinc - 10.4)
                + theta[4] * (age_dec - 3.5);
            let y = if eta >= rng::std_normal(&mut r) { 1.0 } else { 0.0 };
            if s >= burn_in {
                if dynamic {
                    xs.push(prev_y);
                }
                xs.extend([kids02, kids35, loghusinc, age_dec]);
                ys.push(y);
            }
            prev_y = y;
            age += 1.0;
        }
        let movers = ys.iter().any(|v| *v == 1.0) && ys.iter().any(|v| *v == 0.0);
        if movers {
            y_all.extend(ys);
            x_all.extend(xs);
        }
    }
    let columns: Vec<String> =
        LFP_COLUMNS.iter().skip(if dynamic { 0 } else { 1 }).map(|s| s.to_string()).collect();
    PanelData::new(n, t, y_all, x_all, columns, if dynamic { Some(0) } else { None })
}
