//! Fixed-effect maximum likelihood with the individual effects concentrated
//! out.
//!
//! For a given θ each individual's effect solves a one-dimensional concave
//! problem ([`concentrate_alpha`]); the profiled objective
//! `(1/NT) ΣΣ ln f(y | x; α̂ᵢ(θ), θ)` is then maximized over θ by Newton's
//! method. Its gradient follows from the envelope property: the α̂ᵢ(θ)
//! derivative terms vanish at the inner optimum, leaving `ΣΣ ∂ln f/∂θ`.
//! During the iterations the exact profiled Hessian
//! `Σᵢ [Σₜ dₜ xₜxₜ' − (Σₜ dₜ xₜ)(Σₜ dₜ xₜ)'/Σₜ dₜ]` (with `dₜ = ∂²ln f/∂η²`) is
//! used; the Hessian reported in [`FeFit`] is by default a central finite
//! difference of the analytic gradient.
//!
//! Individuals whose outcomes carry no usable variation (all-0/all-1 probit,
//! all-zero Poisson) are dropped and listed in [`FeFit::dropped`]; `N` in the
//! per-observation scale counts the retained individuals only.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{Family, Separation};
use crate::linalg::{dependent_columns, Matrix};
use crate::panel::{PanelData, DEFAULT_ALPHA_BOUND};
use crate::scalar::{sup_norm, Scalar};
use crate::special;

/// Panels with at least this many retained observations evaluate the
/// individual problems in parallel.
const PARALLEL_OBS: usize = 50_000;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct FeOptions<S> {
    /// Starting θ; zeros (unit variance for Neyman–Scott) when absent.
    pub theta_init: Option<Vec<S>>,
    /// Sup-norm tolerance on the per-observation profiled gradient.
    pub tol_outer: S,
    pub max_iter: usize,
    /// Tolerance on the per-observation score of each individual problem.
    pub tol_inner: S,
    /// Individual effects are restricted to `[-alpha_bound, alpha_bound]`.
    pub alpha_bound: S,
    /// Iterates must satisfy `|θ_k| ≤ theta_bound`.
    pub theta_bound: S,
    /// Report the finite-difference Hessian of the analytic gradient (true) or
    /// the analytic profiled Hessian (false).
    pub fd_hessian: bool,
}

impl<S: Scalar> Default for FeOptions<S> {
    fn default() -> Self {
        Self {
            theta_init: None,
            tol_outer: S::tol_at_least(1e-8),
            max_iter: 200,
            tol_inner: S::tol_at_least(1e-10),
            alpha_bound: S::lit(DEFAULT_ALPHA_BOUND),
            theta_bound: S::lit(1e4),
            fd_hessian: true,
        }
    }
}

impl<S: Scalar> FeOptions<S> {
    pub fn with_alpha_bound(mut self, bound: S) -> Self {
        self.alpha_bound = bound;
        self
    }

    pub fn with_theta_init(mut self, theta: Vec<S>) -> Self {
        self.theta_init = Some(theta);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<S> {
    pub value: S,
    pub grad_norm: S,
    /// Line-search step length that produced the next iterate.
    pub step: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace<S> {
    pub iterations: usize,
    pub grad_norm: S,
    pub converged: bool,
    pub history: Vec<TraceStep<S>>,
}

/// Result of [`fit_fe`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeFit<S> {
    pub family: Family,
    pub theta_hat: Vec<S>,
    /// One entry per individual of the input panel. Dropped individuals carry
    /// the bound `±A` in the direction their likelihood diverges.
    pub alpha_hat: Vec<S>,
    /// Profiled objective at θ̂, per-observation scale.
    pub loglik: S,
    /// Profiled Hessian at θ̂, per-observation scale.
    pub hessian: Matrix<S>,
    pub se: Vec<S>,
    /// Indices of individuals excluded for separation.
    pub dropped: Vec<usize>,
    /// Observations used, `N·T` over retained individuals.
    pub n_obs: usize,
    pub trace: FitTrace<S>,
}

impl<S: Scalar> FeFit<S> {
    /// Retained individuals, in panel order.
    pub fn kept(&self) -> Vec<usize> {
        let mut dropped = self.dropped.iter().peekable();
        (0..self.alpha_hat.len())
            .filter(|i| {
                if dropped.peek() == Some(&i) {
                    dropped.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }
}

/// Maximizer of `(1/T) Σₜ ln f(yₜ | xₜ; α, θ)` over `α ∈ [-A, A]` for one
/// individual (`x` is `T × p` row-major), or the direction of separation.
///
/// Poisson uses the closed form `ln(Σy / Σ exp(x'θ))`, Neyman–Scott the
/// sample mean, probit a safeguarded Newton iteration with bisection fallback.
pub fn concentrate_alpha<S: Scalar>(
    family: Family,
    y: &[S],
    x: &[S],
    theta: &[S],
    opts: &FeOptions<S>,
) -> std::result::Result<S, Separation> {
    if let Some(sep) = family.separation(y) {
        return Err(sep);
    }
    let offsets = offsets(family, y.len(), x, theta);
    let yf: Vec<f64> = y.iter().map(|v| v.as_f64()).collect();
    Ok(S::lit(solve_alpha(
        family,
        &yf,
        &offsets,
        None,
        opts.alpha_bound.as_f64(),
        opts.tol_inner.as_f64(),
    )))
}

fn offsets<S: Scalar>(family: Family, t: usize, x: &[S], theta: &[S]) -> Vec<f64> {
    if !family.has_index() || theta.is_empty() {
        return vec![0.0; t];
    }
    let p = theta.len();
    x.chunks_exact(p)
        .map(|row| row.iter().zip(theta).map(|(a, b)| *a * *b).sum::<S>().as_f64())
        .collect()
}

fn solve_alpha(family: Family, y: &[f64], offsets: &[f64], warm: Option<f64>, bound: f64, tol: f64) -> f64 {
    let t = y.len() as f64;
    match family {
        Family::NeymanScott => y.iter().sum::<f64>() / t,
        Family::Poisson => {
            let max_o = offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max_o + offsets.iter().map(|o| (o - max_o).exp()).sum::<f64>().ln();
            (y.iter().sum::<f64>().ln() - lse).clamp(-bound, bound)
        }
        Family::Probit => solve_probit_alpha(y, offsets, warm, bound, tol),
    }
}

fn solve_probit_alpha(y: &[f64], offsets: &[f64], warm: Option<f64>, bound: f64, tol: f64) -> f64 {
    let t = y.len() as f64;
    let start = warm.unwrap_or_else(|| {
        let ybar = (y.iter().sum::<f64>() / t).clamp(0.5 / t, 1.0 - 0.5 / t);
        special::norm_quantile(ybar) - offsets.iter().sum::<f64>() / t
    });
    let (mut lo, mut hi) = (-bound, bound);
    let mut a = start.clamp(lo, hi);
    for _ in 0..200 {
        let (mut score, mut curv) = (0.0, 0.0);
        for (yt, ot) in y.iter().zip(offsets) {
            let (d1, d2) = Family::Probit.eta_derivs(*yt, ot + a, 0.0);
            score += d1;
            curv += d2;
        }
        if score.abs() <= tol * t {
            // A last Newton step costs nothing and takes the score to rounding.
            let polished = a - score / curv;
            return if curv < 0.0 && polished > lo && polished < hi { polished } else { a };
        }
        if score > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + a.abs()) {
            return a;
        }
        let newton = a - score / curv;
        a = if newton > lo && newton < hi && curv < 0.0 { newton } else { 0.5 * (lo + hi) };
    }
    a
}

/// Per-individual contribution to the profiled objective.
struct Contribution {
    value: f64,
    gradient: Vec<f64>,
    hessian: Vec<f64>,
    alpha: f64,
}

/// Profiled objective, envelope gradient and analytic Hessian at one θ.
#[derive(Debug, Clone)]
pub struct ProfiledEval<S> {
    pub value: S,
    pub gradient: Vec<S>,
    pub hessian: Matrix<S>,
    /// α̂ᵢ(θ) for the retained individuals, in order.
    pub alpha: Vec<S>,
}

/// The profiled problem for one panel: retained individuals and options.
pub(crate) struct Profile<'a, S> {
    family: Family,
    panel: &'a PanelData<S>,
    kept: Vec<usize>,
    dim: usize,
    opts: &'a FeOptions<S>,
}

impl<'a, S: Scalar> Profile<'a, S> {
    pub(crate) fn new(panel: &'a PanelData<S>, family: Family, opts: &'a FeOptions<S>) -> Result<Self> {
        panel.validate_for(family)?;
        let kept: Vec<usize> =
            (0..panel.n()).filter(|&i| family.separation(panel.individual_y(i)).is_none()).collect();
        if kept.is_empty() {
            return Err(Error::NoEstimableIndividuals);
        }
        Ok(Self { family, panel, kept, dim: family.theta_dim(panel.p()), opts })
    }

    fn n_obs(&self) -> usize {
        self.kept.len() * self.panel.periods_len()
    }

    fn initial_theta(&self) -> Result<Vec<S>> {
        let theta = match &self.opts.theta_init {
            Some(t) => t.clone(),
            None if self.family.has_index() => vec![S::zero(); self.dim],
            None => vec![S::one()],
        };
        if theta.len() != self.dim {
            return Err(Error::Config(format!("theta_init has length {}, expected {}", theta.len(), self.dim)));
        }
        if !self.feasible(&theta) {
            return Err(Error::Config("theta_init outside the parameter space".into()));
        }
        Ok(theta)
    }

    fn feasible(&self, theta: &[S]) -> bool {
        theta.iter().all(|v| v.is_finite() && v.abs() <= self.opts.theta_bound)
            && (self.family.has_index() || theta[0] > S::zero())
    }

    /// Columns that are linear combinations of others once individual means
    /// are removed; these make the profiled Hessian singular.
    fn collinear_columns(&self) -> Vec<String> {
        let p = self.panel.p();
        if !self.family.has_index() || p == 0 {
            return Vec::new();
        }
        let t = self.panel.periods_len();
        let mut gram = Matrix::<f64>::zeros(p);
        let mut raw = vec![0.0; p];
        for &i in &self.kept {
            let x = self.panel.individual_x(i);
            let mut mean = vec![0.0; p];
            for row in x.chunks_exact(p) {
                for k in 0..p {
                    mean[k] += row[k].as_f64() / t as f64;
                }
            }
            for row in x.chunks_exact(p) {
                for r in 0..p {
                    let dr = row[r].as_f64() - mean[r];
                    raw[r] += row[r].as_f64() * row[r].as_f64();
                    for c in 0..p {
                        gram[(r, c)] += dr * (row[c].as_f64() - mean[c]);
                    }
                }
            }
        }
        let reference: Vec<f64> = raw.iter().map(|v| v.max(f64::MIN_POSITIVE)).collect();
        dependent_columns(&gram, &reference, 1e-10)
            .into_iter()
            .map(|k| self.panel.column_names()[k].clone())
            .collect()
    }

    fn contribution(&self, i: usize, theta: &[S], warm: Option<f64>, want_hessian: bool) -> Contribution {
        let family = self.family;
        let p = self.dim;
        let yv = self.panel.individual_y(i);
        let y: Vec<f64> = yv.iter().map(|v| v.as_f64()).collect();
        let x = self.panel.individual_x(i);
        let offs = offsets(family, y.len(), x, theta);
        let bound = self.opts.alpha_bound.as_f64();
        let alpha = solve_alpha(family, &y, &offs, warm, bound, self.opts.tol_inner.as_f64());
        let mut value = 0.0;
        let mut gradient = vec![0.0; p];
        let mut hessian = if want_hessian { vec![0.0; p * p] } else { Vec::new() };

        if !family.has_index() {
            let var = theta[0].as_f64();
            let (mut g, mut h) = (0.0, 0.0);
            for yt in &y {
                let r2 = (yt - alpha) * (yt - alpha);
                value += family.terms(*yt, alpha, var).0;
                g += -0.5 / var + 0.5 * r2 / (var * var);
                h += 0.5 / (var * var) - r2 / (var * var * var);
            }
            gradient[0] = g;
            if want_hessian {
                hessian[0] = h;
            }
            return Contribution { value, gradient, hessian, alpha };
        }

        let interior = alpha.abs() < bound;
        let mut dsum = 0.0;
        let mut dx = vec![0.0; p];
        for (s, (yt, ot)) in y.iter().zip(&offs).enumerate() {
            let (ll, d1, d2) = family.terms(*yt, ot + alpha, f64::NAN);
            value += ll;
            let row = &x[s * p..(s + 1) * p];
            for k in 0..p {
                gradient[k] += d1 * row[k].as_f64();
            }
            if want_hessian {
                dsum += d2;
                for r in 0..p {
                    let xr = row[r].as_f64();
                    dx[r] += d2 * xr;
                    for c in 0..p {
                        hessian[r * p + c] += d2 * xr * row[c].as_f64();
                    }
                }
            }
        }
        if want_hessian && interior && dsum < 0.0 {
            for r in 0..p {
                for c in 0..p {
                    hessian[r * p + c] -= dx[r] * dx[c] / dsum;
                }
            }
        }
        Contribution { value, gradient, hessian, alpha }
    }

    pub(crate) fn evaluate(&self, theta: &[S], warm: Option<&[S]>, want_hessian: bool) -> ProfiledEval<S> {
        let run = |(j, &i): (usize, &usize)| {
            self.contribution(i, theta, warm.map(|w| w[j].as_f64()), want_hessian)
        };
        let parts: Vec<Contribution> = if self.n_obs() >= PARALLEL_OBS {
            self.kept.par_iter().enumerate().map(run).collect()
        } else {
            self.kept.iter().enumerate().map(run).collect()
        };
        // Reduce in individual order so results do not depend on scheduling.
        let p = self.dim;
        let scale = 1.0 / self.n_obs() as f64;
        let mut value = 0.0;
        let mut gradient = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        for c in &parts {
            value += c.value;
            for k in 0..p {
                gradient[k] += c.gradient[k];
            }
            if want_hessian {
                for k in 0..p * p {
                    hess[k] += c.hessian[k];
                }
            }
        }
        let mut hessian = Matrix::zeros(p);
        for r in 0..p {
            for c in 0..p {
                hessian[(r, c)] = S::lit(hess[r * p + c] * scale);
            }
        }
        ProfiledEval {
            value: S::lit(value * scale),
            gradient: gradient.iter().map(|g| S::lit(g * scale)).collect(),
            hessian,
            alpha: parts.iter().map(|c| S::lit(c.alpha)).collect(),
        }
    }

    /// Central finite difference of the analytic gradient, step
    /// `h_k = max(1e-5, ε^{1/3})·(1 + |θ_k|)`, symmetrized.
    fn fd_hessian(&self, theta: &[S], warm: &[S]) -> Matrix<S> {
        let p = self.dim;
        let base_step = S::lit(1e-5).max(S::epsilon().cbrt());
        let mut h = Matrix::zeros(p);
        for k in 0..p {
            let step = base_step * (S::one() + theta[k].abs());
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            plus[k] = plus[k] + step;
            minus[k] = minus[k] - step;
            let gp = self.evaluate(&plus, Some(warm), false).gradient;
            let gm = self.evaluate(&minus, Some(warm), false).gradient;
            for r in 0..p {
                h[(r, k)] = (gp[r] - gm[r]) / (step + step);
            }
        }
        h.symmetrize();
        h
    }
}

/// Profiled objective and its envelope gradient at `theta`. Separated
/// individuals are excluded, not treated as failures.
pub fn profiled_loglik<S: Scalar>(
    panel: &PanelData<S>,
    family: Family,
    theta: &[S],
    opts: &FeOptions<S>,
) -> Result<(S, Vec<S>)> {
    let eval = profiled_eval(panel, family, theta, opts)?;
    Ok((eval.value, eval.gradient))
}

/// Like [`profiled_loglik`] but also returns the analytic profiled Hessian
/// and the concentrated effects.
pub fn profiled_eval<S: Scalar>(
    panel: &PanelData<S>,
    family: Family,
    theta: &[S],
    opts: &FeOptions<S>,
) -> Result<ProfiledEval<S>> {
    let profile = Profile::new(panel, family, opts)?;
    if theta.len() != profile.dim {
        return Err(Error::Domain(format!("theta has length {}, expected {}", theta.len(), profile.dim)));
    }
    if !profile.feasible(theta) {
        return Err(Error::Domain("theta outside the parameter space".into()));
    }
    Ok(profile.evaluate(theta, None, true))
}

/// Fixed-effect MLE of θ and the individual effects.
pub fn fit_fe<S: Scalar>(panel: &PanelData<S>, family: Family, opts: &FeOptions<S>) -> Result<FeFit<S>> {
    let profile = Profile::new(panel, family, opts)?;
    let collinear = profile.collinear_columns();
    if !collinear.is_empty() {
        return Err(Error::SingularHessian { columns: collinear });
    }

    let mut theta = profile.initial_theta()?;
    let mut eval = profile.evaluate(&theta, None, true);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let tol = opts.tol_outer;

    while iterations < opts.max_iter {
        let gnorm = sup_norm(&eval.gradient);
        if !gnorm.is_finite() || !eval.value.is_finite() {
            break;
        }
        if gnorm <= tol {
            converged = true;
            break;
        }
        let direction = newton_direction(&eval);
        let slope: S = eval.gradient.iter().zip(&direction).map(|(g, d)| *g * *d).sum();
        let mut step = S::one();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<S> = theta.iter().zip(&direction).map(|(t, d)| *t + step * *d).collect();
            if profile.feasible(&cand) {
                let next = profile.evaluate(&cand, Some(&eval.alpha), true);
                let armijo = next.value >= eval.value + S::lit(ARMIJO) * step * slope;
                // Near the optimum the objective is flat to rounding; accept a
                // step that does not lose value beyond that and shrinks the gradient.
                let slack = S::lit(1e-13) * (S::one() + eval.value.abs());
                let flat = next.value >= eval.value - slack && sup_norm(&next.gradient) < gnorm;
                if next.value.is_finite() && (armijo || flat) {
                    accepted = Some((cand, next));
                    break;
                }
            }
            step = step * S::lit(0.5);
        }
        history.push(TraceStep { value: eval.value, grad_norm: gnorm, step });
        iterations += 1;
        match accepted {
            Some((cand, next)) => {
                theta = cand;
                eval = next;
            }
            None => break,
        }
    }

    let grad_norm = sup_norm(&eval.gradient);
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            grad_norm: grad_norm.as_f64(),
            trace: history.iter().map(|s| (s.value.as_f64(), s.grad_norm.as_f64())).collect(),
        });
    }

    // One extra Newton step: quadratic convergence usually takes the gradient
    // from the tolerance to rounding level at negligible cost.
    let direction = newton_direction(&eval);
    let polished: Vec<S> = theta.iter().zip(&direction).map(|(t, d)| *t + *d).collect();
    if profile.feasible(&polished) {
        let next = profile.evaluate(&polished, Some(&eval.alpha), true);
        let slack = S::lit(1e-13) * (S::one() + eval.value.abs());
        if next.value >= eval.value - slack && sup_norm(&next.gradient) < grad_norm {
            theta = polished;
            eval = next;
        }
    }

    let hessian = if opts.fd_hessian { profile.fd_hessian(&theta, &eval.alpha) } else { eval.hessian.clone() };
    let n_obs = profile.n_obs();
    let cov = hessian.neg().inverse_spd().ok_or(Error::SingularHessian { columns: Vec::new() })?;
    let nt = S::from_usize_lossy(n_obs);
    let se = (0..profile.dim).map(|k| (cov[(k, k)] / nt).sqrt()).collect();

    let bound = opts.alpha_bound;
    let mut alpha_hat = vec![S::zero(); panel.n()];
    let mut dropped = Vec::new();
    let mut kept_alpha = profile.kept.iter().zip(&eval.alpha).peekable();
    for (i, slot) in alpha_hat.iter_mut().enumerate() {
        match kept_alpha.peek() {
            Some((&k, &a)) if k == i => {
                *slot = a;
                kept_alpha.next();
            }
            _ => {
                dropped.push(i);
                *slot = match family.separation(panel.individual_y(i)) {
                    Some(Separation::Upper) => bound,
                    _ => -bound,
                };
            }
        }
    }

    Ok(FeFit {
        family,
        theta_hat: theta,
        alpha_hat,
        loglik: eval.value,
        hessian,
        se,
        dropped,
        n_obs,
        trace: FitTrace { iterations, grad_norm: sup_norm(&eval.gradient), converged, history },
    })
}

/// Newton direction `-H⁻¹g` when the analytic Hessian is negative definite,
/// otherwise the gradient itself.
fn newton_direction<S: Scalar>(eval: &ProfiledEval<S>) -> Vec<S> {
    eval.hessian.neg().solve_spd(&eval.gradient).unwrap_or_else(|| eval.gradient.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};

    pub(crate) fn probit_panel(n: usize, t: usize, theta: &[f64], seed: u64) -> PanelData<f64> {
        let p = theta.len();
        let mut r = rng::stream(seed, 0, Purpose::Data);
        let mut y = Vec::new();
        let mut x = Vec::new();
        for _ in 0..n {
            let a = rng::std_normal(&mut r);
            for _ in 0..t {
                let row: Vec<f64> = (0..p).map(|_| rng::std_normal(&mut r) + 0.3 * a).collect();
                let eta: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + a;
                y.push(if eta >= rng::std_normal(&mut r) { 1.0 } else { 0.0 });
                x.extend(row);
            }
        }
        PanelData::new(n, t, y, x, (0..p).map(|k| format!("x{k}")).collect(), None).unwrap()
    }

    fn poisson_panel(n: usize, t: usize, theta: &[f64], seed: u64) -> PanelData<f64> {
        let p = theta.len();
        let mut r = rng::stream(seed, 0, Purpose::Data);
        let mut y = Vec::new();
        let mut x = Vec::new();
        for _ in 0..n {
            let a = 0.5 * rng::std_normal(&mut r);
            for _ in 0..t {
                let row: Vec<f64> = (0..p).map(|_| 0.5 * rng::std_normal(&mut r)).collect();
                let eta: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + a;
                let v = rng::uniform(&mut r, 0.0, 1.0);
                y.push(Family::Poisson.simulate_unchecked(eta, v, 0.0));
                x.extend(row);
            }
        }
        PanelData::new(n, t, y, x, (0..p).map(|k| format!("x{k}")).collect(), None).unwrap()
    }

    #[test]
    fn concentrate_alpha_examples() {
        let opts = FeOptions::<f64>::default();
        let a = concentrate_alpha(Family::Poisson, &[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0], &[0.7], &opts).unwrap();
        assert!((a - 2f64.ln()).abs() < 1e-15);
        assert_eq!(
            concentrate_alpha(Family::Probit, &[1.0, 1.0, 1.0], &[0.0; 3], &[0.7], &opts),
            Err(Separation::Upper)
        );
        let a = concentrate_alpha(Family::Probit, &[1.0, 0.0], &[0.0, 0.0], &[3.0], &opts).unwrap();
        assert!(a.abs() < 1e-12);
        assert_eq!(concentrate_alpha(Family::Poisson, &[0.0, 0.0], &[1.0, 2.0], &[1.0], &opts), Err(Separation::Lower));
    }

    #[test]
    fn poisson_closed_form_matches_newton() {
        // Newton on the Poisson individual score, independent of the closed form.
        let newton = |y: &[f64], o: &[f64]| {
            let mut a = 0.0;
            for _ in 0..100 {
                let s: f64 = y.iter().zip(o).map(|(y, o)| y - (o + a).exp()).sum();
                let h: f64 = o.iter().map(|o| -(o + a).exp()).sum();
                a -= s / h;
            }
            a
        };
        let mut r = rng::stream(3, 0, Purpose::Data);
        let opts = FeOptions::<f64>::default();
        for _ in 0..200 {
            let t = 2 + (rng::uniform(&mut r, 0.0, 8.0) as usize);
            let x: Vec<f64> = (0..t).map(|_| rng::std_normal(&mut r)).collect();
            let y: Vec<f64> = (0..t).map(|_| (rng::uniform(&mut r, 0.0, 5.0)).floor()).collect();
            if y.iter().all(|v| *v == 0.0) {
                continue;
            }
            let theta = [rng::uniform(&mut r, -1.0, 1.0)];
            let closed = concentrate_alpha(Family::Poisson, &y, &x, &theta, &opts).unwrap();
            let o: Vec<f64> = x.iter().map(|v| v * theta[0]).collect();
            assert!((closed - newton(&y, &o)).abs() < 1e-10);
        }
    }

    #[test]
    fn envelope_gradient_matches_finite_differences() {
        let opts = FeOptions::<f64>::default();
        let cases = [
            (Family::Probit, probit_panel(60, 6, &[0.8, -0.4], 21)),
            (Family::Poisson, poisson_panel(60, 6, &[0.5, -0.3], 22)),
        ];
        let mut r = rng::stream(9, 0, Purpose::Data);
        for (family, panel) in &cases {
            for _ in 0..20 {
                let theta = [rng::uniform(&mut r, -1.0, 1.0), rng::uniform(&mut r, -1.0, 1.0)];
                let (_, grad) = profiled_loglik(panel, *family, &theta, &opts).unwrap();
                for k in 0..2 {
                    let h = 1e-5;
                    let mut tp = theta;
                    let mut tm = theta;
                    tp[k] += h;
                    tm[k] -= h;
                    let fp = profiled_loglik(panel, *family, &tp, &opts).unwrap().0;
                    let fm = profiled_loglik(panel, *family, &tm, &opts).unwrap().0;
                    let fd = (fp - fm) / (2.0 * h);
                    assert!((grad[k] - fd).abs() <= 1e-6 * grad[k].abs().max(1e-2), "{family} k={k}: {} vs {fd}", grad[k]);
                }
            }
        }
    }

    #[test]
    fn analytic_profiled_hessian_matches_finite_differences() {
        let panel = probit_panel(80, 5, &[1.0, 0.5], 5);
        let opts = FeOptions::<f64>::default();
        let fit = fit_fe(&panel, Family::Probit, &opts).unwrap();
        let eval = profiled_eval(&panel, Family::Probit, &fit.theta_hat, &opts).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((eval.hessian[(r, c)] - fit.hessian[(r, c)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn neyman_scott_profiled_value_closed_form() {
        let y = vec![1.0, 3.0, 2.0, 2.5, -1.0, 0.0];
        let panel = PanelData::new(2, 3, y.clone(), vec![], vec![], None).unwrap();
        let opts = FeOptions::default();
        let s2 = {
            let m0 = (1.0 + 3.0 + 2.0) / 3.0;
            let m1 = (2.5 - 1.0 + 0.0) / 3.0;
            (y[..3].iter().map(|v| (v - m0) * (v - m0)).sum::<f64>()
                + y[3..].iter().map(|v| (v - m1) * (v - m1)).sum::<f64>())
                / 6.0
        };
        for theta in [0.5, 1.0, 2.0] {
            let (v, _) = profiled_loglik(&panel, Family::NeymanScott, &[theta], &opts).unwrap();
            let want = -0.5 * (2.0 * std::f64::consts::PI * theta).ln() - s2 / (2.0 * theta);
            assert!((v - want).abs() < 1e-14);
        }
        let fit = fit_fe(&panel, Family::NeymanScott, &opts).unwrap();
        assert!((fit.theta_hat[0] - s2).abs() < 1e-10);
    }

    #[test]
    fn collinear_copy_is_singular() {
        let base = probit_panel(50, 5, &[1.0], 8);
        let mut x = Vec::new();
        for v in base.x() {
            x.extend([*v, *v]);
        }
        let dup = PanelData::new(50, 5, base.y().to_vec(), x, vec!["a".into(), "a_copy".into()], None).unwrap();
        match fit_fe(&dup, Family::Probit, &FeOptions::default()) {
            Err(Error::SingularHessian { columns }) => assert_eq!(columns, vec!["a_copy".to_string()]),
            other => panic!("expected singular Hessian, got {other:?}"),
        }
        // A time-invariant regressor is absorbed by the effects.
        let mut x = Vec::new();
        for i in 0..50 {
            for s in 0..5 {
                x.extend([base.x_at(i, s, 0), i as f64]);
            }
        }
        let inv = PanelData::new(50, 5, base.y().to_vec(), x, vec!["a".into(), "const".into()], None).unwrap();
        assert!(matches!(fit_fe(&inv, Family::Probit, &FeOptions::default()), Err(Error::SingularHessian { .. })));
    }

    #[test]
    fn all_separated_fails() {
        let panel = PanelData::new(2, 2, vec![1.0, 1.0, 0.0, 0.0], vec![0.1, 0.2, 0.3, 0.4], vec!["x".into()], None)
            .unwrap();
        let err = fit_fe(&panel, Family::Probit, &FeOptions::default()).unwrap_err();
        assert!(err.to_string().contains("no estimable individuals"));
    }

    #[test]
    fn fit_invariants_probit() {
        let panel = probit_panel(200, 8, &[1.0, -0.5], 17);
        let opts = FeOptions::default();
        let fit = fit_fe(&panel, Family::Probit, &opts).unwrap();
        assert!(fit.trace.converged);
        let (_, g) = profiled_loglik(&panel, Family::Probit, &fit.theta_hat, &opts).unwrap();
        assert!(sup_norm(&g) <= 1e-8);
        assert!(fit.hessian.max_asymmetry() == 0.0);
        assert!(fit.hessian.is_negative_definite());
        let cov = fit.hessian.neg().inverse_spd().unwrap();
        for k in 0..2 {
            let want = (cov[(k, k)] / fit.n_obs as f64).sqrt();
            assert!((fit.se[k] - want).abs() < 1e-15);
        }
        for &i in &fit.kept() {
            let a = concentrate_alpha(Family::Probit, panel.individual_y(i), panel.individual_x(i), &fit.theta_hat, &opts)
                .unwrap();
            assert!((a - fit.alpha_hat[i]).abs() < 1e-8, "i={i} {a} {} y={:?}", fit.alpha_hat[i], panel.individual_y(i));
        }
        for &i in &fit.dropped {
            assert_eq!(fit.alpha_hat[i].abs(), 50.0);
        }
    }

    #[test]
    fn fit_poisson_recovers_truth() {
        let panel = poisson_panel(400, 10, &[0.6, -0.4], 4);
        let fit = fit_fe(&panel, Family::Poisson, &FeOptions::default()).unwrap();
        // Poisson FE has no incidental-parameter bias.
        assert!((fit.theta_hat[0] - 0.6).abs() < 4.0 * fit.se[0]);
        assert!((fit.theta_hat[1] + 0.4).abs() < 4.0 * fit.se[1]);
    }

    #[test]
    fn f32_fit_runs() {
        let panel64 = probit_panel(100, 6, &[1.0], 2);
        let panel32 = PanelData::<f32>::new(
            100,
            6,
            panel64.y().iter().map(|v| *v as f32).collect(),
            panel64.x().iter().map(|v| *v as f32).collect(),
            vec!["x".into()],
            None,
        )
        .unwrap();
        let f64fit = fit_fe(&panel64, Family::Probit, &FeOptions::default()).unwrap();
        let f32fit = fit_fe(&panel32, Family::Probit, &FeOptions::default()).unwrap();
        assert!((f32fit.theta_hat[0] as f64 - f64fit.theta_hat[0]).abs() < 1e-3);
    }
}
