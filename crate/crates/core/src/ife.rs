//! Indirect fixed effect estimator.
//!
//! Shocks for `H` simulation paths are drawn once ([`draw_shocks`]). For a
//! candidate θ each path is simulated from the fitted effects α̂ and re-fitted
//! by fixed-effect MLE; [`beta_h`] averages those estimates. [`solve_ife`]
//! looks for θ̃ with `θ̂ = β̂_H(θ̃)` without ever differentiating β̂_H, which is
//! a step function of θ for discrete outcomes.

use rayon::prelude::*;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::family::Family;
use crate::fe::{fit_fe, FeFit, FeOptions};
use crate::panel::PanelData;
use crate::rng::{self, Purpose};
use crate::scalar::{l2_norm, Scalar};
use crate::special;

/// Uniform shocks `v(h, i, t)` for `H` paths, plus their normal quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockStore<S> {
    seed: u64,
    paths: usize,
    n: usize,
    t: usize,
    v: Vec<S>,
    u: Vec<S>,
}

impl<S: Scalar> ShockStore<S> {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn periods_len(&self) -> usize {
        self.t
    }

    #[inline]
    fn offset(&self, h: usize, i: usize, s: usize) -> usize {
        (h * self.n + i) * self.t + s
    }

    /// Uniform shock for path `h`, individual `i`, period index `s`.
    pub fn v(&self, h: usize, i: usize, s: usize) -> S {
        self.v[self.offset(h, i, s)]
    }

    /// `Φ⁻¹(v(h, i, s))`.
    pub fn u(&self, h: usize, i: usize, s: usize) -> S {
        self.u[self.offset(h, i, s)]
    }

    /// All uniforms, ordered by `(h, i, t)`.
    pub fn uniforms(&self) -> &[S] {
        &self.v
    }

    /// The same shocks for a subset of individuals, renumbered in order.
    pub fn restrict(&self, individuals: &[usize]) -> Result<Self> {
        if let Some(&bad) = individuals.iter().find(|&&i| i >= self.n) {
            return Err(Error::Domain(format!("individual {bad} outside shock store of size {}", self.n)));
        }
        let mut v = Vec::with_capacity(self.paths * individuals.len() * self.t);
        let mut u = Vec::with_capacity(v.capacity());
        for h in 0..self.paths {
            for &i in individuals {
                let o = self.offset(h, i, 0);
                v.extend_from_slice(&self.v[o..o + self.t]);
                u.extend_from_slice(&self.u[o..o + self.t]);
            }
        }
        Ok(Self { seed: self.seed, paths: self.paths, n: individuals.len(), t: self.t, v, u })
    }

    fn check_shape(&self, n: usize, t: usize) -> Result<()> {
        if self.n != n || self.t != t {
            return Err(Error::Domain(format!(
                "shock store is {}x{}, panel is {n}x{t}",
                self.n, self.t
            )));
        }
        Ok(())
    }
}

/// Draws the shock store for `(seed, H, n, T)`. Path `h` comes from its own
/// stream, so its values do not depend on `H` or on evaluation order.
pub fn draw_shocks<S: Scalar>(seed: u64, paths: usize, n: usize, t: usize) -> Result<ShockStore<S>> {
    if paths == 0 {
        return Err(Error::Domain("H must be at least 1".into()));
    }
    let per_path = n * t;
    let mut v = Vec::with_capacity(paths * per_path);
    let mut u = Vec::with_capacity(paths * per_path);
    for h in 0..paths {
        let mut r = rng::stream(seed, h as u64, Purpose::Path);
        for _ in 0..per_path {
            // Rounding to S happens before the quantile so v and u agree.
            let vs: S = rng::open_unit(r.next_u64());
            v.push(vs);
            u.push(S::lit(special::norm_quantile(vs.as_f64())));
        }
    }
    Ok(ShockStore { seed, paths, n, t, v, u })
}

/// Simulated outcomes for path `h`, ordered like `panel.y()`.
///
/// Static panels use `x'θ + α̂ᵢ` directly. When the panel has a lag column the
/// simulated lag replaces the observed one from the second period on;
/// `dynamic_init` supplies the outcome preceding the first period.
pub fn simulate_panel<S: Scalar>(
    family: Family,
    theta: &[S],
    alpha_hat: &[S],
    panel: &PanelData<S>,
    shocks: &ShockStore<S>,
    h: usize,
    dynamic_init: Option<&[S]>,
) -> Result<Vec<S>> {
    let (n, t, p) = (panel.n(), panel.periods_len(), panel.p());
    shocks.check_shape(n, t)?;
    if h >= shocks.paths {
        return Err(Error::Domain(format!("path {h} outside 0..{}", shocks.paths)));
    }
    if alpha_hat.len() != n {
        return Err(Error::Domain(format!("alpha_hat has length {}, expected {n}", alpha_hat.len())));
    }
    if theta.len() != family.theta_dim(p) {
        return Err(Error::Domain(format!("theta has length {}, expected {}", theta.len(), family.theta_dim(p))));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("theta must be finite".into()));
    }
    let lag = panel.lag_column();
    let init = match (lag, dynamic_init) {
        (Some(_), None) => return Err(Error::Config("lag column set but no initial outcomes supplied".into())),
        (Some(_), Some(init)) if init.len() != n => {
            return Err(Error::Domain(format!("dynamic_init has length {}, expected {n}", init.len())))
        }
        (_, init) => init,
    };
    if family == Family::NeymanScott && theta[0] <= S::zero() {
        return Err(Error::Domain("variance must be positive".into()));
    }

    let theta64: Vec<f64> = theta.iter().map(|v| v.as_f64()).collect();
    let mut y = Vec::with_capacity(n * t);
    for i in 0..n {
        let alpha = alpha_hat[i].as_f64();
        let x = panel.individual_x(i);
        let mut prev = init.map(|v| v[i].as_f64()).unwrap_or(0.0);
        for s in 0..t {
            let o = shocks.offset(h, i, s);
            let value = if family.has_index() {
                let row = &x[s * p..(s + 1) * p];
                let mut eta = alpha;
                for k in 0..p {
                    let xk = if lag == Some(k) { prev } else { row[k].as_f64() };
                    eta += xk * theta64[k];
                }
                match family {
                    Family::Probit => {
                        if eta >= shocks.u[o].as_f64() {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    _ => family.simulate_unchecked(eta, shocks.v[o].as_f64(), 0.0),
                }
            } else {
                alpha + theta64[0].sqrt() * shocks.u[o].as_f64()
            };
            prev = value;
            y.push(S::lit(value));
        }
    }
    Ok(y)
}

/// How [`solve_ife`] ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IfeStatus {
    /// Residual within `tol_match`.
    Converged,
    /// The residual tolerance is below the resolution of β̂_H: the search
    /// localized θ̃ to that resolution and the remaining residual is smaller
    /// than the fixed-effect standard errors.
    ResolutionLimited,
    /// Budget exhausted, or the search stalled at a residual comparable to
    /// the sampling error.
    NotConverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfeOptions<S> {
    /// Euclidean tolerance on `θ̂ − β̂_H(θ)`.
    pub tol_match: S,
    pub max_fixed_point: usize,
    pub max_simplex_evals: usize,
    /// Box for the iterates; when absent, `θ̂_k ± 10(1 + |θ̂_k|)` (and a
    /// positive lower bound for a variance).
    pub theta_box: Option<(Vec<S>, Vec<S>)>,
    /// Options for the simulated-data fits. `theta_init` is replaced by θ̂ and
    /// the finite-difference Hessian is skipped.
    pub fe: FeOptions<S>,
    /// Fit the H paths concurrently.
    pub parallel: bool,
}

impl<S: Scalar> Default for IfeOptions<S> {
    fn default() -> Self {
        Self {
            tol_match: S::tol_at_least(1e-4),
            max_fixed_point: 50,
            max_simplex_evals: 400,
            theta_box: None,
            fe: FeOptions::default(),
            parallel: false,
        }
    }
}

/// One evaluated iterate of the matching solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverStep<S> {
    pub theta: Vec<S>,
    pub residual: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfeFit<S> {
    pub theta_tilde: Vec<S>,
    pub paths: usize,
    pub se: Vec<S>,
    /// `‖θ̂ − β̂_H(θ̃)‖₂`.
    pub residual: S,
    pub beta_h: Vec<S>,
    pub converged: bool,
    pub status: IfeStatus,
    pub evaluations: usize,
    /// Trial points whose simulated fits failed; the search treated them as
    /// having an infinite residual.
    pub failed_evaluations: usize,
    pub solver_trace: Vec<SolverStep<S>>,
    pub base: FeFit<S>,
}

/// `se_FE · sqrt(1 + 1/H)`.
pub fn ife_standard_errors<S: Scalar>(se_fe: &[S], paths: usize) -> Result<Vec<S>> {
    if paths == 0 {
        return Err(Error::Domain("H must be at least 1".into()));
    }
    let factor = (S::one() + S::one() / S::from_usize_lossy(paths)).sqrt();
    Ok(se_fe.iter().map(|s| *s * factor).collect())
}

/// The simulation problem restricted to the individuals retained by the base
/// fit, so observed and simulated estimations use the same cross-section.
struct Matching<'a, S> {
    family: Family,
    panel: PanelData<S>,
    alpha: Vec<S>,
    init: Option<Vec<S>>,
    shocks: ShockStore<S>,
    fe: FeOptions<S>,
    parallel: bool,
    theta_hat: &'a [S],
}

impl<'a, S: Scalar> Matching<'a, S> {
    fn new(
        base: &'a FeFit<S>,
        shocks: &ShockStore<S>,
        panel: &PanelData<S>,
        family: Family,
        opts: &IfeOptions<S>,
    ) -> Result<Self> {
        if !base.trace.converged {
            return Err(Error::Config("base fit did not converge".into()));
        }
        if base.family != family {
            return Err(Error::Config(format!("base fit is {}, requested {family}", base.family)));
        }
        shocks.check_shape(panel.n(), panel.periods_len())?;
        if base.alpha_hat.len() != panel.n() {
            return Err(Error::Domain("base fit does not match the panel".into()));
        }
        let kept = base.kept();
        let sub = panel.subset_individuals(&kept)?;
        let init = sub.initial_outcomes();
        let mut fe = opts.fe.clone();
        fe.theta_init = Some(base.theta_hat.clone());
        fe.fd_hessian = false;
        Ok(Self {
            family,
            alpha: kept.iter().map(|&i| base.alpha_hat[i]).collect(),
            init,
            shocks: shocks.restrict(&kept)?,
            panel: sub,
            fe,
            parallel: opts.parallel,
            theta_hat: &base.theta_hat,
        })
    }

    fn fit_path(&self, theta: &[S], h: usize) -> Result<Vec<S>> {
        let label = || format!("simulated path {h}");
        let y = simulate_panel(self.family, theta, &self.alpha, &self.panel, &self.shocks, h, self.init.as_deref())
            .map_err(|e| Error::subfit(label(), e))?;
        let sim = self.panel.with_outcomes(y).map_err(|e| Error::subfit(label(), e))?;
        fit_fe(&sim, self.family, &self.fe).map(|f| f.theta_hat).map_err(|e| Error::subfit(label(), e))
    }

    fn beta_h(&self, theta: &[S]) -> Result<Vec<S>> {
        let paths = self.shocks.paths;
        let fits: Vec<Result<Vec<S>>> = if self.parallel {
            (0..paths).into_par_iter().map(|h| self.fit_path(theta, h)).collect()
        } else {
            (0..paths).map(|h| self.fit_path(theta, h)).collect()
        };
        // Summed in path order so the average is bit-reproducible.
        let mut sum = vec![0.0f64; theta.len()];
        for fit in fits {
            for (acc, v) in sum.iter_mut().zip(fit?) {
                *acc += v.as_f64();
            }
        }
        Ok(sum.into_iter().map(|s| S::lit(s / paths as f64)).collect())
    }

    fn residual(&self, theta: &[S]) -> Result<(Vec<S>, Vec<S>)> {
        let b = self.beta_h(theta)?;
        let r = self.theta_hat.iter().zip(&b).map(|(a, b)| *a - *b).collect();
        Ok((r, b))
    }
}

/// `β̂_H(θ)`: the average over paths of the fixed-effect estimate on the
/// panel simulated at `(θ, α̂)`.
pub fn beta_h<S: Scalar>(
    theta: &[S],
    base: &FeFit<S>,
    shocks: &ShockStore<S>,
    panel: &PanelData<S>,
    family: Family,
    opts: &IfeOptions<S>,
) -> Result<Vec<S>> {
    let matching = Matching::new(base, shocks, panel, family, opts)?;
    if theta.len() != base.theta_hat.len() {
        return Err(Error::Domain(format!("theta has length {}, expected {}", theta.len(), base.theta_hat.len())));
    }
    matching.beta_h(theta)
}

struct Evaluated<S> {
    theta: Vec<S>,
    residual: Vec<S>,
    beta: Vec<S>,
    norm: S,
}

struct Solver<'m, 'a, S> {
    matching: &'m Matching<'a, S>,
    lower: Vec<S>,
    upper: Vec<S>,
    evaluations: usize,
    failed: usize,
    trace: Vec<SolverStep<S>>,
}

impl<S: Scalar> Solver<'_, '_, S> {
    fn clamp(&self, theta: &[S]) -> Vec<S> {
        theta.iter().zip(self.lower.iter().zip(&self.upper)).map(|(t, (lo, hi))| t.max(*lo).min(*hi)).collect()
    }

    /// Evaluates the matching residual. Past the first evaluation (at θ̂), a
    /// numerical failure of a simulated fit marks the point as infeasible
    /// instead of aborting the search.
    fn eval(&mut self, theta: Vec<S>) -> Result<Evaluated<S>> {
        let theta = self.clamp(&theta);
        let (residual, beta) = match self.matching.residual(&theta) {
            Ok(r) => r,
            Err(e) if self.evaluations > 0 && !e.is_input_error() => {
                self.failed += 1;
                (vec![S::infinity(); theta.len()], vec![S::nan(); theta.len()])
            }
            Err(e) => return Err(e),
        };
        let norm = l2_norm(&residual);
        self.evaluations += 1;
        self.trace.push(SolverStep { theta: theta.clone(), residual: norm });
        Ok(Evaluated { theta, residual, beta, norm })
    }
}

/// Solves `θ̂ = β̂_H(θ̃)`.
///
/// Damped fixed-point iteration `θ ← θ + λ(θ̂ − β̂_H(θ))` from θ̂ with λ halved
/// whenever a step fails to lower the residual. After `max_fixed_point`
/// evaluations, or once λ falls below 1/16 (the residual has reached the
/// granularity of β̂_H), a Nelder–Mead search on `‖θ̂ − β̂_H(θ)‖²` continues
/// from the best point until the residual meets `tol_match` or the simplex
/// is smaller than a quarter of the residual at which the fixed-point phase
/// stalled. The best iterate is returned in every case, with
/// [`IfeFit::status`] saying how the search ended.
pub fn solve_ife<S: Scalar>(
    base: &FeFit<S>,
    shocks: &ShockStore<S>,
    panel: &PanelData<S>,
    family: Family,
    opts: &IfeOptions<S>,
) -> Result<IfeFit<S>> {
    let matching = Matching::new(base, shocks, panel, family, opts)?;
    let theta_hat = &base.theta_hat;
    let (lower, upper) = match &opts.theta_box {
        Some((lo, hi)) => {
            if lo.len() != theta_hat.len() || hi.len() != theta_hat.len() {
                return Err(Error::Config("theta_box dimension mismatch".into()));
            }
            (lo.clone(), hi.clone())
        }
        None => default_box(family, theta_hat),
    };
    let mut solver = Solver { matching: &matching, lower, upper, evaluations: 0, failed: 0, trace: Vec::new() };
    let tol = opts.tol_match;

    let mut current = solver.eval(theta_hat.clone())?;
    let mut status = None;
    if current.norm <= tol {
        status = Some(IfeStatus::Converged);
    }

    let mut lambda = S::one();
    let min_lambda = S::lit(1.0 / 16.0);
    let mut fp = 1;
    while status.is_none() && fp < opts.max_fixed_point && lambda >= min_lambda {
        let cand: Vec<S> =
            current.theta.iter().zip(&current.residual).map(|(t, r)| *t + lambda * *r).collect();
        let next = solver.eval(cand)?;
        fp += 1;
        if next.norm < current.norm {
            current = next;
            if current.norm <= tol {
                status = Some(IfeStatus::Converged);
            }
        } else {
            lambda = lambda * S::lit(0.5);
        }
    }

    if status.is_none() {
        let x_tol = tol.max(current.norm * S::lit(0.25));
        let (best, collapsed) = nelder_mead(&mut solver, current, tol, x_tol, opts.max_simplex_evals)?;
        status = Some(if best.norm <= tol {
            IfeStatus::Converged
        } else if collapsed && best.norm <= l2_norm(&base.se) {
            IfeStatus::ResolutionLimited
        } else {
            IfeStatus::NotConverged
        });
        current = best;
    }

    let se = ife_standard_errors(&base.se, shocks.paths)?;
    let status = status.unwrap_or(IfeStatus::NotConverged);
    Ok(IfeFit {
        theta_tilde: current.theta,
        paths: shocks.paths,
        se,
        residual: current.norm,
        beta_h: current.beta,
        converged: status == IfeStatus::Converged,
        status,
        evaluations: solver.evaluations,
        failed_evaluations: solver.failed,
        solver_trace: solver.trace,
        base: base.clone(),
    })
}

fn default_box<S: Scalar>(family: Family, theta_hat: &[S]) -> (Vec<S>, Vec<S>) {
    let ten = S::lit(10.0);
    let width = |t: &S| ten * (S::one() + t.abs());
    let mut lower: Vec<S> = theta_hat.iter().map(|t| *t - width(t)).collect();
    let upper: Vec<S> = theta_hat.iter().map(|t| *t + width(t)).collect();
    if !family.has_index() {
        lower[0] = theta_hat[0] * S::lit(1e-3);
    }
    (lower, upper)
}

/// Nelder–Mead on the squared residual, started around `start` with edges of
/// the size of its residual. Stops on the residual tolerance `tol`, on a
/// simplex diameter below `x_tol`, or on the evaluation budget; the flag
/// reports whether the simplex collapsed.
fn nelder_mead<S: Scalar>(
    solver: &mut Solver<'_, '_, S>,
    start: Evaluated<S>,
    tol: S,
    x_tol: S,
    budget: usize,
) -> Result<(Evaluated<S>, bool)> {
    let dim = start.theta.len();
    let budget_end = solver.evaluations + budget;
    let edge = start.norm.max(tol * S::lit(10.0));
    let mut simplex = vec![start];
    for k in 0..dim {
        if solver.evaluations >= budget_end {
            break;
        }
        let mut theta = simplex[0].theta.clone();
        // Step away from a box face when the start sits on it.
        theta[k] = if theta[k] + edge <= solver.upper[k] { theta[k] + edge } else { theta[k] - edge };
        let v = solver.eval(theta)?;
        simplex.push(v);
    }
    let half = S::lit(0.5);
    let two = S::lit(2.0);
    loop {
        simplex.sort_by(|a, b| a.norm.partial_cmp(&b.norm).unwrap_or(std::cmp::Ordering::Equal));
        if simplex[0].norm <= tol {
            return Ok((simplex.swap_remove(0), false));
        }
        if simplex.len() == dim + 1 && diameter(&simplex) <= x_tol {
            return Ok((simplex.swap_remove(0), true));
        }
        if solver.evaluations >= budget_end || simplex.len() < dim + 1 {
            return Ok((simplex.swap_remove(0), false));
        }
        let worst = dim;
        let centroid: Vec<S> = (0..dim)
            .map(|k| simplex[..worst].iter().map(|v| v.theta[k]).sum::<S>() / S::from_usize_lossy(dim))
            .collect();
        let along = |c: S| -> Vec<S> {
            centroid.iter().zip(&simplex[worst].theta).map(|(m, w)| *m + c * (*m - *w)).collect()
        };
        let reflected = solver.eval(along(S::one()))?;
        if reflected.norm < simplex[0].norm {
            let expanded = solver.eval(along(two))?;
            simplex[worst] = if expanded.norm < reflected.norm { expanded } else { reflected };
            continue;
        }
        if reflected.norm < simplex[worst - 1].norm {
            simplex[worst] = reflected;
            continue;
        }
        let contracted = if reflected.norm < simplex[worst].norm {
            solver.eval(along(half))?
        } else {
            solver.eval(along(-half))?
        };
        if contracted.norm < simplex[worst].norm.min(reflected.norm) {
            simplex[worst] = contracted;
            continue;
        }
        // Shrink towards the best vertex.
        let best = simplex[0].theta.clone();
        for j in 1..=dim {
            if solver.evaluations >= budget_end {
                break;
            }
            let theta: Vec<S> = best.iter().zip(&simplex[j].theta).map(|(b, v)| *b + half * (*v - *b)).collect();
            simplex[j] = solver.eval(theta)?;
        }
    }
}

fn diameter<S: Scalar>(simplex: &[Evaluated<S>]) -> S {
    let mut d = S::zero();
    for a in simplex {
        for b in simplex {
            let dist: Vec<S> = a.theta.iter().zip(&b.theta).map(|(x, y)| *x - *y).collect();
            d = d.max(l2_norm(&dist));
        }
    }
    d
}
