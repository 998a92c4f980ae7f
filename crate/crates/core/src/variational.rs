//! The nonconvex functional `J₀(u) = ∫₀¹ (u'² − 1)² + u² dx` minimized on
//! each hat level, and the net of level minimizers read as a hyperreal.
//!
//! On a level the functional is an exact per-element polynomial in the
//! nodal values, so value and gradient are closed forms.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galerkin::{Basis, GalerkinError, GalerkinLevel, Ultrafunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariationalError {
    #[error("`{0}` needs the hat basis")]
    UnsupportedBasis(&'static str),
    #[error("invalid level: {0}")]
    InvalidLevel(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Galerkin(#[from] GalerkinError),
}

pub type Result<T> = std::result::Result<T, VariationalError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    /// `∫ (u'² − 1)² + u²`.
    J0,
    /// `∫ u'² + u²`, whose only minimizer is 0.
    Convex,
}

/// Nodal values with the zero boundary values attached at both ends.
fn padded(u: &Ultrafunction) -> Vec<f64> {
    let mut v = Vec::with_capacity(u.coeffs().len() + 2);
    v.push(0.0);
    v.extend_from_slice(u.coeffs());
    v.push(0.0);
    v
}

fn require_hat(u: &Ultrafunction, what: &'static str) -> Result<()> {
    if u.level().basis() != Basis::Hat {
        return Err(VariationalError::UnsupportedBasis(what));
    }
    Ok(())
}

fn value_nodal(f: Functional, v: &[f64], h: f64) -> f64 {
    v.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let s = (b - a) / h;
            let grad = match f {
                Functional::J0 => (s * s - 1.0).powi(2),
                Functional::Convex => s * s,
            };
            h * (grad + (a * a + a * b + b * b) / 3.0)
        })
        .sum()
}

/// Gradient with respect to the interior values `v[1..len−1]`.
fn gradient_nodal(f: Functional, v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len() - 2;
    let mut g = vec![0.0; n];
    for e in 0..v.len() - 1 {
        let (a, b) = (v[e], v[e + 1]);
        let s = (b - a) / h;
        // d/ds of the gradient term, per unit h, times ds/db = 1/h.
        let ds = match f {
            Functional::J0 => 4.0 * s * (s * s - 1.0),
            Functional::Convex => 2.0 * s,
        };
        let da = -ds + h * (2.0 * a + b) / 3.0;
        let db = ds + h * (a + 2.0 * b) / 3.0;
        if e >= 1 {
            g[e - 1] += da;
        }
        if e < n {
            g[e] += db;
        }
    }
    g
}

/// `J₀(u)`: the per-element closed form for hats, 5-point Gauss quadrature
/// of the truncated series for sines.
pub fn j0_value(u: &Ultrafunction) -> f64 {
    match u.level().basis() {
        Basis::Hat => value_nodal(Functional::J0, &padded(u), u.level().h()),
        Basis::Sine => j0_quadrature(u),
    }
}

/// `J₀(u)` by 5-point Gauss quadrature on each element, for any basis.
pub fn j0_quadrature(u: &Ultrafunction) -> f64 {
    const NODES: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
    const WEIGHTS: [f64; 5] = [0.236_926_885_056_189_08, 0.478_628_670_499_366_47, 0.568_888_888_888_888_9, 0.478_628_670_499_366_47, 0.236_926_885_056_189_08];
    let level = u.level();
    let h = level.h();
    let pi = std::f64::consts::PI;
    let derivative = |x: f64| -> f64 {
        match level.basis() {
            Basis::Hat => {
                let v = padded(u);
                let e = ((x / h).floor() as usize).min(level.m() - 1);
                (v[e + 1] - v[e]) / h
            }
            Basis::Sine => u
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let w = (k + 1) as f64 * pi;
                    c * w * (w * x).cos()
                })
                .sum(),
        }
    };
    let mut acc = 0.0;
    for e in 0..level.m() {
        let mid = (e as f64 + 0.5) * h;
        for (t, w) in NODES.iter().zip(WEIGHTS) {
            let x = mid + t * h / 2.0;
            let (d, y) = (derivative(x), u.eval(x));
            acc += w * h / 2.0 * ((d * d - 1.0).powi(2) + y * y);
        }
    }
    acc
}

/// Exact gradient of the closed form with respect to the nodal values.
pub fn j0_gradient(u: &Ultrafunction) -> Result<Vec<f64>> {
    require_hat(u, "j0_gradient")?;
    Ok(gradient_nodal(Functional::J0, &padded(u), u.level().h()))
}

/// `J_c(u) = ∫ u'² + u²`.
pub fn convex_value(u: &Ultrafunction) -> Result<f64> {
    require_hat(u, "convex_value")?;
    Ok(value_nodal(Functional::Convex, &padded(u), u.level().h()))
}

pub fn convex_gradient(u: &Ultrafunction) -> Result<Vec<f64>> {
    require_hat(u, "convex_gradient")?;
    Ok(gradient_nodal(Functional::Convex, &padded(u), u.level().h()))
}

/// Nodal values of the sawtooth with slopes ±1: `h` at odd nodes, 0 at even.
pub fn sawtooth(level: &Arc<GalerkinLevel>) -> Result<Ultrafunction> {
    let h = level.h();
    let c = (1..level.m()).map(|i| if i % 2 == 1 { h } else { 0.0 }).collect();
    Ok(level.from_coeffs(c)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    /// Random starts beyond the sawtooth and zero.
    pub random_starts: usize,
    pub seed: u64,
    /// Stop once the gradient sup-norm is at most this.
    pub grad_tol: f64,
    pub max_iterations: usize,
    pub functional: Functional,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            random_starts: 4,
            seed: 0,
            grad_tol: 1e-8,
            max_iterations: 10_000,
            functional: Functional::J0,
        }
    }
}

/// History length of the quasi-Newton update.
const LBFGS_MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;

struct Outcome {
    x: Vec<f64>,
    value: f64,
    grad_sup: f64,
    iterations: usize,
    converged: bool,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L-BFGS with Armijo backtracking; falls back to steepest descent when the
/// quasi-Newton direction fails to descend.
fn lbfgs(f: impl Fn(&[f64]) -> f64, grad: impl Fn(&[f64]) -> Vec<f64>, x0: Vec<f64>, cfg: &MinimizeConfig) -> Outcome {
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        if sup(&g) <= cfg.grad_tol {
            break;
        }
        iterations += 1;
        let mut d = two_loop(&g, &hist);
        if dot(&d, &g) >= 0.0 {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let Some((xn, fn_)) = backtrack(&f, &x, fx, &g, &d) else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let gn = grad(&xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if hist.len() == LBFGS_MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    let grad_sup = sup(&g);
    Outcome {
        x,
        value: fx,
        grad_sup,
        iterations,
        converged: grad_sup <= cfg.grad_tol,
    }
}

fn two_loop(g: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.into_iter().map(|v| -v).collect()
}

fn backtrack(f: &impl Fn(&[f64]) -> f64, x: &[f64], fx: f64, g: &[f64], d: &[f64]) -> Option<(Vec<f64>, f64)> {
    let slope = dot(g, d);
    let mut t = 1.0;
    for _ in 0..MAX_HALVINGS {
        let xn: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        let fx_new = f(&xn);
        if fx_new <= fx + ARMIJO * t * slope {
            return Some((xn, fx_new));
        }
        t *= 0.5;
    }
    None
}

/// The best local minimizer found on one level.
#[derive(Clone, Debug)]
pub struct LevelMinimizer {
    pub level: Arc<GalerkinLevel>,
    pub u_star: Ultrafunction,
    pub j_value: f64,
    /// Sup-norm of the gradient at `u_star`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub starts_used: usize,
    pub converged: bool,
}

/// One row of a sweep report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub m: usize,
    pub h: f64,
    pub j_value: f64,
    pub sup_norm: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub starts_used: usize,
    pub converged: bool,
}

impl LevelMinimizer {
    /// A record for a given candidate, without optimizing.
    pub fn evaluate(u: Ultrafunction, functional: Functional) -> Result<Self> {
        let (j, g) = match functional {
            Functional::J0 => (j0_value(&u), j0_gradient(&u)?),
            Functional::Convex => (convex_value(&u)?, convex_gradient(&u)?),
        };
        Ok(LevelMinimizer {
            level: u.level().clone(),
            j_value: j,
            grad_norm: sup(&g),
            iterations: 0,
            starts_used: 1,
            converged: false,
            u_star: u,
        })
    }

    pub fn m(&self) -> usize {
        self.level.m()
    }

    pub fn sup_norm(&self) -> f64 {
        self.u_star.sup_norm()
    }

    pub fn row(&self) -> LevelRow {
        LevelRow {
            m: self.level.m(),
            h: self.level.h(),
            j_value: self.j_value,
            sup_norm: self.sup_norm(),
            grad_norm: self.grad_norm,
            iterations: self.iterations,
            starts_used: self.starts_used,
            converged: self.converged,
        }
    }
}

/// Multistart minimization on the hat level with `m` elements: the
/// sawtooth, the zero function and `random_starts` random perturbations of
/// the sawtooth. The best result wins; `converged` is false when its
/// gradient stayed above tolerance.
pub fn minimize_level(m: usize, cfg: &MinimizeConfig) -> Result<LevelMinimizer> {
    if m < 2 || m % 2 != 0 {
        return Err(VariationalError::InvalidLevel(format!("m must be even and at least 2, got {m}")));
    }
    let level = GalerkinLevel::new(m, Basis::Hat)?;
    let h = level.h();
    let saw = sawtooth(&level)?.into_coeffs();
    let mut starts = vec![saw.clone(), vec![0.0; m - 1]];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (m as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    for _ in 0..cfg.random_starts {
        starts.push(saw.iter().map(|v| v + rng.gen_range(-h..h)).collect());
    }

    let pad = |x: &[f64]| {
        let mut v = Vec::with_capacity(x.len() + 2);
        v.push(0.0);
        v.extend_from_slice(x);
        v.push(0.0);
        v
    };
    let func = cfg.functional;
    let f = |x: &[f64]| value_nodal(func, &pad(x), h);
    let g = |x: &[f64]| gradient_nodal(func, &pad(x), h);

    let starts_used = starts.len();
    let best = starts
        .into_iter()
        .map(|x0| lbfgs(f, g, x0, cfg))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least two starts");
    Ok(LevelMinimizer {
        u_star: level.from_coeffs(best.x)?,
        level,
        j_value: best.value,
        grad_norm: best.grad_sup,
        iterations: best.iterations,
        starts_used,
        converged: best.converged,
    })
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slack allowed when checking that values do not increase along the chain.
pub const MONOTONE_SLACK: f64 = 1e-10;

/// Level minimizers in increasing `m`, with fitted decay orders against `h`.
#[derive(Clone, Debug)]
pub struct NetResult {
    pub levels: Vec<LevelMinimizer>,
    /// Slope of `log j` against `log h`.
    pub order_j: f64,
    /// Slope of `log sup|u*|` against `log h`.
    pub order_sup: f64,
}

impl NetResult {
    pub fn from_levels(levels: Vec<LevelMinimizer>) -> Result<Self> {
        if levels.len() < 4 {
            return Err(VariationalError::InvalidSweep(format!(
                "need at least 4 levels, got {}",
                levels.len()
            )));
        }
        if levels.windows(2).any(|w| w[0].m() >= w[1].m()) {
            return Err(VariationalError::InvalidSweep("levels must be strictly increasing".into()));
        }
        let fit = |y: &dyn Fn(&LevelMinimizer) -> f64| {
            let pts: Vec<(f64, f64)> = levels.iter().map(|l| (l.level.h().ln(), y(l).ln())).collect();
            fit_slope(&pts)
        };
        let order_j = fit(&|l| l.j_value);
        let order_sup = fit(&|l| l.sup_norm());
        Ok(NetResult {
            levels,
            order_j,
            order_sup,
        })
    }

    /// `j(m_k) ≥ j(m_{k+1}) − slack` along the chain.
    pub fn is_nonincreasing(&self) -> bool {
        self.levels
            .windows(2)
            .all(|w| w[0].j_value >= w[1].j_value - MONOTONE_SLACK)
    }
}

/// Minimizes on every level, in parallel, and fits decay orders.
pub fn minimize_net(levels: &[usize], cfg: &MinimizeConfig) -> Result<NetResult> {
    if levels.len() < 4 {
        return Err(VariationalError::InvalidSweep(format!(
            "need at least 4 levels, got {}",
            levels.len()
        )));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(VariationalError::InvalidSweep("levels must be strictly increasing".into()));
    }
    let results: Vec<LevelMinimizer> = levels
        .par_iter()
        .map(|&m| minimize_level(m, cfg))
        .collect::<Result<_>>()?;
    NetResult::from_levels(results)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub reasons: Vec<String>,
    pub reading: String,
}

/// PASS iff every value is positive, the values strictly decrease along
/// the chain, and the fitted order is at least 1.
pub fn certify_infinitesimal(net: &NetResult) -> Certificate {
    let mut reasons = Vec::new();
    for l in &net.levels {
        if l.j_value <= 0.0 {
            reasons.push(format!("j = {} is not positive at m = {}", l.j_value, l.m()));
        }
    }
    for w in net.levels.windows(2) {
        if w[1].j_value >= w[0].j_value {
            reasons.push(format!(
                "j does not decrease from m = {} ({}) to m = {} ({})",
                w[0].m(),
                w[0].j_value,
                w[1].m(),
                w[1].j_value
            ));
        }
    }
    if !(net.order_j >= 1.0) {
        reasons.push(format!("fitted order {:.4} is below 1", net.order_j));
    }
    let verdict = if reasons.is_empty() { Verdict::Pass } else { Verdict::Fail };
    let reading = match verdict {
        Verdict::Pass => format!(
            "the net (J0(u_m))_m is positive and decays like h^{:.3}; its limit along the chain is a positive infinitesimal",
            net.order_j
        ),
        Verdict::Fail => "the net does not exhibit a positive infinitesimal".to_string(),
    };
    Certificate {
        verdict,
        reasons,
        reading,
    }
}

/// Serializable summary of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub levels: Vec<LevelRow>,
    pub order_j: f64,
    pub order_sup: f64,
    pub certificate: Verdict,
}

impl SweepReport {
    pub fn new(net: &NetResult) -> Self {
        SweepReport {
            levels: net.levels.iter().map(LevelMinimizer::row).collect(),
            order_j: net.order_j,
            order_sup: net.order_sup,
            certificate: certify_infinitesimal(net).verdict,
        }
    }
}
