//! Finite-dimensional spaces on (0, 1) with zero boundary values: the
//! per-level spaces whose nested chain stands in for the ultrafunction
//! space.
//!
//! Matrices are assembled in exact rationals and converted once; solves run
//! in double precision.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use exmex::{Express, FlatEx};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Q;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GalerkinError {
    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: String, right: String },
    #[error("quadrature failure for `{label}`: {reason}")]
    QuadratureFailure { label: String, reason: String },
    #[error("invalid level: {0}")]
    InvalidLevel(String),
    #[error("cannot parse `{src}`: {message}")]
    Parse { src: String, message: String },
    #[error("{from} is not contained in {to}")]
    NotNested { from: String, to: String },
}

pub type Result<T> = std::result::Result<T, GalerkinError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Hat,
    Sine,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Hat => "hat",
            Basis::Sine => "sine",
        })
    }
}

impl FromStr for Basis {
    type Err = GalerkinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hat" => Ok(Basis::Hat),
            "sine" => Ok(Basis::Sine),
            _ => Err(GalerkinError::Parse {
                src: s.into(),
                message: "expected `hat` or `sine`".into(),
            }),
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], five points.
const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Sub-intervals per element for the sine basis, whose top modes complete
/// about half an oscillation per element.
const SINE_SUBDIVISIONS: usize = 8;

/// Sub-intervals per element when measuring L² distances to arbitrary
/// functions.
const ERROR_SUBDIVISIONS: usize = 4;

/// Calls `f(x, w)` for every quadrature point of `[a, b]` split into `parts`.
fn quadrature(a: f64, b: f64, parts: usize, mut f: impl FnMut(f64, f64)) {
    let len = (b - a) / parts as f64;
    for p in 0..parts {
        let lo = a + p as f64 * len;
        let (mid, half) = (lo + len / 2.0, len / 2.0);
        for (t, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            f(mid + half * t, w * half);
        }
    }
}

/// Sparse rows of exact entries.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrix {
    n: usize,
    rows: Vec<Vec<(usize, Q)>>,
}

impl RationalMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Q {
        self.rows[i]
            .iter()
            .find(|(c, _)| *c == j)
            .map_or_else(Q::zero, |(_, v)| v.clone())
    }

    pub fn row(&self, i: usize) -> &[(usize, Q)] {
        &self.rows[i]
    }

    fn to_f64(&self) -> Vec<Vec<(usize, f64)>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|(j, v)| (*j, v.to_f64().expect("finite"))).collect())
            .collect()
    }
}

fn mul(rows: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| r.iter().map(|(j, v)| v * x[*j]).sum()).collect()
}

fn mul_transpose(rows: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r {
            out[*j] += v * x[i];
        }
    }
    out
}

/// One space `V_m`: `m` elements of width `h = 1/m`, dimension `m − 1`.
#[derive(Debug)]
pub struct GalerkinLevel {
    m: usize,
    basis: Basis,
    mass: RationalMatrix,
    derivative: RationalMatrix,
    mass_f: Vec<Vec<(usize, f64)>>,
    derivative_f: Vec<Vec<(usize, f64)>>,
}

impl PartialEq for GalerkinLevel {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.basis == other.basis
    }
}

impl fmt::Display for GalerkinLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(m={})", self.basis, self.m)
    }
}

impl GalerkinLevel {
    pub fn new(m: usize, basis: Basis) -> Result<Arc<Self>> {
        if m < 2 {
            return Err(GalerkinError::InvalidLevel(format!("need at least 2 elements, got {m}")));
        }
        let n = m - 1;
        let q = |p: i64, d: i64| Q::new(p.into(), d.into());
        let (mass, derivative) = match basis {
            Basis::Hat => {
                let mut mass = Vec::with_capacity(n);
                let mut der = Vec::with_capacity(n);
                let (diag, off) = (q(2, 3 * m as i64), q(1, 6 * m as i64));
                for i in 0..n {
                    let mut mr = Vec::new();
                    let mut dr = Vec::new();
                    if i > 0 {
                        mr.push((i - 1, off.clone()));
                        dr.push((i - 1, q(1, 2)));
                    }
                    mr.push((i, diag.clone()));
                    if i + 1 < n {
                        mr.push((i + 1, off.clone()));
                        dr.push((i + 1, q(-1, 2)));
                    }
                    mass.push(mr);
                    der.push(dr);
                }
                (mass, der)
            }
            Basis::Sine => {
                let mass = (0..n).map(|i| vec![(i, q(1, 2))]).collect();
                // ∫ (sin kπx)' sin jπx dx = 2kj / (j² − k²) when k + j is odd.
                let der = (0..n)
                    .map(|i| {
                        let k = i as i64 + 1;
                        (0..n)
                            .filter(|j| (i + j) % 2 == 1)
                            .map(|j| {
                                let jj = j as i64 + 1;
                                (j, q(2 * k * jj, jj * jj - k * k))
                            })
                            .collect()
                    })
                    .collect();
                (mass, der)
            }
        };
        let mass = RationalMatrix { n, rows: mass };
        let derivative = RationalMatrix { n, rows: derivative };
        Ok(Arc::new(GalerkinLevel {
            m,
            basis,
            mass_f: mass.to_f64(),
            derivative_f: derivative.to_f64(),
            mass,
            derivative,
        }))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.m - 1
    }

    /// `M_ij = ∫ φ_i φ_j`.
    pub fn mass_matrix(&self) -> &RationalMatrix {
        &self.mass
    }

    /// `B_ij = ∫ φ_i' φ_j`.
    pub fn first_derivative_matrix(&self) -> &RationalMatrix {
        &self.derivative
    }

    /// Interior nodes `x_i = i·h`, `i = 1..m−1`.
    pub fn nodes(&self) -> Vec<f64> {
        (1..self.m).map(|i| i as f64 / self.m as f64).collect()
    }

    /// Value of basis function `i` (0-based) at `x`.
    pub fn basis_value(&self, i: usize, x: f64) -> f64 {
        match self.basis {
            Basis::Hat => {
                let t = x * self.m as f64 - (i + 1) as f64;
                (1.0 - t.abs()).max(0.0)
            }
            Basis::Sine => ((i + 1) as f64 * std::f64::consts::PI * x).sin(),
        }
    }

    /// Solves `M c = b`.
    pub fn solve_mass(&self, b: &[f64]) -> Vec<f64> {
        match self.basis {
            Basis::Sine => b.iter().map(|v| 2.0 * v).collect(),
            Basis::Hat => {
                let h = self.h();
                tridiagonal_solve(h / 6.0, 2.0 * h / 3.0, h / 6.0, b)
            }
        }
    }

    /// `b_i = ∫ g φ_i` by per-element Gauss–Legendre quadrature.
    pub fn load(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        let n = self.dim();
        let h = self.h();
        let mut b = vec![0.0; n];
        match self.basis {
            Basis::Hat => {
                for e in 0..self.m {
                    let a = e as f64 * h;
                    quadrature(a, a + h, 1, |x, w| {
                        let t = (x - a) / h;
                        let gx = g(x) * w;
                        if e >= 1 {
                            b[e - 1] += gx * (1.0 - t);
                        }
                        if e < n {
                            b[e] += gx * t;
                        }
                    });
                }
            }
            Basis::Sine => {
                for e in 0..self.m {
                    let a = e as f64 * h;
                    quadrature(a, a + h, SINE_SUBDIVISIONS, |x, w| {
                        let gx = g(x) * w;
                        for (k, bk) in b.iter_mut().enumerate() {
                            *bk += gx * ((k + 1) as f64 * std::f64::consts::PI * x).sin();
                        }
                    });
                }
            }
        }
        b
    }

    pub fn zero(self: &Arc<Self>) -> Ultrafunction {
        Ultrafunction {
            level: self.clone(),
            coeffs: vec![0.0; self.dim()],
        }
    }

    /// Nodal interpolant (hat) or the truncated series with the given
    /// coefficients (sine): for the hat basis the coefficients are the
    /// values at the interior nodes.
    pub fn from_coeffs(self: &Arc<Self>, coeffs: Vec<f64>) -> Result<Ultrafunction> {
        if coeffs.len() != self.dim() {
            return Err(GalerkinError::InvalidLevel(format!(
                "{} coefficients for a space of dimension {}",
                coeffs.len(),
                self.dim()
            )));
        }
        Ok(Ultrafunction {
            level: self.clone(),
            coeffs,
        })
    }

    /// Hat interpolant of `f` at the interior nodes.
    pub fn interpolate(self: &Arc<Self>, f: impl Fn(f64) -> f64) -> Result<Ultrafunction> {
        if self.basis != Basis::Hat {
            return Err(GalerkinError::InvalidLevel("nodal interpolation needs the hat basis".into()));
        }
        Ok(Ultrafunction {
            level: self.clone(),
            coeffs: self.nodes().into_iter().map(f).collect(),
        })
    }
}

/// Thomas algorithm for a constant-coefficient tridiagonal system.
pub fn tridiagonal_solve(lower: f64, diag: f64, upper: f64, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper / diag;
    d[0] = b[0] / diag;
    for i in 1..n {
        let den = diag - lower * c[i - 1];
        c[i] = upper / den;
        d[i] = (b[i] - lower * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// An element of one level: coefficients against its basis.
#[derive(Clone, Debug)]
pub struct Ultrafunction {
    level: Arc<GalerkinLevel>,
    coeffs: Vec<f64>,
}

impl Ultrafunction {
    pub fn level(&self) -> &Arc<GalerkinLevel> {
        &self.level
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        let lv = &self.level;
        match lv.basis {
            Basis::Hat => {
                let s = (x * lv.m as f64).clamp(0.0, lv.m as f64);
                let e = (s.floor() as usize).min(lv.m - 1);
                let t = s - e as f64;
                let at = |node: usize| {
                    if node == 0 || node == lv.m {
                        0.0
                    } else {
                        self.coeffs[node - 1]
                    }
                };
                at(e) * (1.0 - t) + at(e + 1) * t
            }
            Basis::Sine => self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * x).sin())
                .sum(),
        }
    }

    /// `max |u|` on [0, 1]: exact for hats, sampled on a fine grid for sines.
    pub fn sup_norm(&self) -> f64 {
        match self.level.basis {
            Basis::Hat => self.coeffs.iter().fold(0.0, |a, c| a.max(c.abs())),
            Basis::Sine => {
                let samples = 64 * self.level.m;
                (0..=samples)
                    .map(|i| self.eval(i as f64 / samples as f64).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    pub fn norm(&self) -> f64 {
        inner_product(self, self).expect("same level").max(0.0).sqrt()
    }

    fn check_level(&self, other: &Ultrafunction) -> Result<()> {
        if self.level != other.level {
            return Err(GalerkinError::LevelMismatch {
                left: self.level.to_string(),
                right: other.level.to_string(),
            });
        }
        Ok(())
    }

    /// The same function as an element of a finer level. Hat spaces nest
    /// when `m` divides `m'`; sine spaces whenever `m ≤ m'`.
    pub fn embed(&self, fine: &Arc<GalerkinLevel>) -> Result<Ultrafunction> {
        let (m, mf) = (self.level.m, fine.m);
        let nested = self.level.basis == fine.basis
            && match fine.basis {
                Basis::Hat => mf % m == 0,
                Basis::Sine => m <= mf,
            };
        if !nested {
            return Err(GalerkinError::NotNested {
                from: self.level.to_string(),
                to: fine.to_string(),
            });
        }
        let coeffs = match fine.basis {
            Basis::Hat => {
                let r = mf / m;
                (1..mf)
                    .map(|j| {
                        let (e, k) = (j / r, j % r);
                        let at = |node: usize| if node == 0 || node == m { 0.0 } else { self.coeffs[node - 1] };
                        if k == 0 {
                            at(e)
                        } else {
                            let t = k as f64 / r as f64;
                            at(e) * (1.0 - t) + at(e + 1) * t
                        }
                    })
                    .collect()
            }
            Basis::Sine => {
                let mut c = self.coeffs.clone();
                c.resize(fine.dim(), 0.0);
                c
            }
        };
        Ok(Ultrafunction {
            level: fine.clone(),
            coeffs,
        })
    }
}

/// `uᵀ M v`.
pub fn inner_product(u: &Ultrafunction, v: &Ultrafunction) -> Result<f64> {
    u.check_level(v)?;
    Ok(u.coeffs.iter().zip(mul(&u.level.mass_f, &v.coeffs)).map(|(a, b)| a * b).sum())
}

/// Operations that may appear in a registered function expression.
const REGISTERED_OPS: &[&str] = &[
    "+", "-", "*", "/", "^", "min", "max", "abs", "signum", "sin", "cos", "exp", "sqrt", "PI", "π", "E", "e",
];

/// A real function of `x` built from polynomials, `sin`, `cos`, `exp`,
/// `sqrt` and the piecewise operations `abs`, `signum`, `min`, `max`.
#[derive(Clone, Debug)]
pub struct RealExpr {
    src: String,
    ex: FlatEx<f64>,
}

impl RealExpr {
    pub fn parse(src: &str) -> Result<Self> {
        let err = |message: String| GalerkinError::Parse {
            src: src.to_string(),
            message,
        };
        let ex = exmex::parse::<f64>(src).map_err(|e| err(e.to_string()))?;
        if let Some(v) = ex.var_names().iter().find(|v| v.as_str() != "x") {
            return Err(err(format!("unknown variable `{v}`; only `x` is allowed")));
        }
        if let Some(op) = ex.operator_reprs().iter().find(|o| !REGISTERED_OPS.contains(&o.as_str())) {
            return Err(err(format!("`{op}` is not a registered function")));
        }
        Ok(RealExpr {
            src: src.to_string(),
            ex,
        })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn eval(&self, x: f64) -> f64 {
        let r = if self.ex.var_names().is_empty() {
            self.ex.eval(&[])
        } else {
            self.ex.eval(&[x])
        };
        r.unwrap_or(f64::NAN)
    }
}

impl fmt::Display for RealExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

type RealCallback = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// What `project` accepts.
#[derive(Clone)]
pub enum FunctionDescriptor {
    Expr(RealExpr),
    Ultrafunction(Ultrafunction),
    /// Outside the registered library; projection refuses it.
    Custom(String, RealCallback),
}

impl fmt::Debug for FunctionDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FunctionDescriptor {
    pub fn parse(src: &str) -> Result<Self> {
        RealExpr::parse(src).map(FunctionDescriptor::Expr)
    }

    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        FunctionDescriptor::Custom(label.into(), Arc::new(f))
    }

    pub fn label(&self) -> String {
        match self {
            FunctionDescriptor::Expr(e) => e.source().to_string(),
            FunctionDescriptor::Ultrafunction(u) => format!("element of {}", u.level),
            FunctionDescriptor::Custom(l, _) => l.clone(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FunctionDescriptor::Expr(e) => e.eval(x),
            FunctionDescriptor::Ultrafunction(u) => u.eval(x),
            FunctionDescriptor::Custom(_, f) => f(x),
        }
    }
}

/// Load vector of a registered function, failing on non-finite samples.
fn registered_load(f: &FunctionDescriptor, level: &GalerkinLevel) -> Result<Vec<f64>> {
    if let FunctionDescriptor::Custom(label, _) = f {
        return Err(GalerkinError::QuadratureFailure {
            label: label.clone(),
            reason: "not in the registered function library".into(),
        });
    }
    let b = level.load(|x| f.eval(x));
    if b.iter().all(|v| v.is_finite()) {
        Ok(b)
    } else {
        Err(GalerkinError::QuadratureFailure {
            label: f.label(),
            reason: "non-finite value at a quadrature node".into(),
        })
    }
}

/// Orthogonal projection onto the level: solves `M c = b`, `b_i = ∫ f φ_i`.
pub fn project(f: &FunctionDescriptor, level: &Arc<GalerkinLevel>) -> Result<Ultrafunction> {
    let b = registered_load(f, level)?;
    Ok(Ultrafunction {
        level: level.clone(),
        coeffs: level.solve_mass(&b),
    })
}

/// `⟨f, φ_i⟩ − ⟨u, φ_i⟩` for every basis function.
pub fn residual(f: &FunctionDescriptor, u: &Ultrafunction) -> Result<Vec<f64>> {
    let b = registered_load(f, &u.level)?;
    let mu = mul(&u.level.mass_f, &u.coeffs);
    Ok(b.iter().zip(mu).map(|(x, y)| x - y).collect())
}

/// `‖f − u‖` in L²(0, 1) by refined per-element quadrature.
pub fn l2_distance(f: &FunctionDescriptor, u: &Ultrafunction) -> f64 {
    let h = u.level.h();
    let mut acc = 0.0;
    for e in 0..u.level.m {
        let a = e as f64 * h;
        quadrature(a, a + h, ERROR_SUBDIVISIONS, |x, w| {
            let d = f.eval(x) - u.eval(x);
            acc += w * d * d;
        });
    }
    acc.sqrt()
}

/// `∫ u g` with the quadrature used for projection: `Σ_i c_i ∫ g φ_i`.
pub fn pairing(u: &Ultrafunction, g: &FunctionDescriptor) -> Result<f64> {
    let b = registered_load(g, &u.level)?;
    Ok(u.coeffs.iter().zip(b).map(|(c, v)| c * v).sum())
}

/// `∫ f g` over (0, 1) by refined quadrature.
pub fn l2_inner(f: &FunctionDescriptor, g: &FunctionDescriptor, m: usize) -> f64 {
    let h = 1.0 / m as f64;
    let mut acc = 0.0;
    for e in 0..m {
        let a = e as f64 * h;
        quadrature(a, a + h, ERROR_SUBDIVISIONS, |x, w| acc += w * f.eval(x) * g.eval(x));
    }
    acc
}

/// `Du = P(∂u)`: solves `M c = Bᵀu`, since `∫ u' φ_i = Σ_j u_j B_ji`.
pub fn generalized_derivative(u: &Ultrafunction) -> Ultrafunction {
    let rhs = derivative_load(u);
    Ultrafunction {
        level: u.level.clone(),
        coeffs: u.level.solve_mass(&rhs),
    }
}

/// `∫ u' φ_i` for every `i`.
pub fn derivative_load(u: &Ultrafunction) -> Vec<f64> {
    mul_transpose(&u.level.derivative_f, &u.coeffs)
}

/// A linear operator on functions, applied level by level.
#[derive(Clone, Debug)]
pub enum LinearOp {
    Identity,
    Derivative,
    MultiplyBy(RealExpr),
}

/// `P ∘ A` restricted to one level.
#[derive(Clone, Debug)]
pub struct ExtendedOperator {
    op: LinearOp,
}

pub fn extend_operator(op: LinearOp) -> ExtendedOperator {
    ExtendedOperator { op }
}

impl ExtendedOperator {
    /// `∫ (A u) φ_i` for every `i`.
    pub fn assemble(&self, u: &Ultrafunction) -> Result<Vec<f64>> {
        Ok(match &self.op {
            LinearOp::Identity => mul(&u.level.mass_f, &u.coeffs),
            LinearOp::Derivative => derivative_load(u),
            LinearOp::MultiplyBy(g) => {
                let b = u.level.load(|x| g.eval(x) * u.eval(x));
                if !b.iter().all(|v| v.is_finite()) {
                    return Err(GalerkinError::QuadratureFailure {
                        label: g.to_string(),
                        reason: "non-finite value at a quadrature node".into(),
                    });
                }
                b
            }
        })
    }

    pub fn apply(&self, u: &Ultrafunction) -> Result<Ultrafunction> {
        let coeffs = match &self.op {
            LinearOp::Identity => u.coeffs.clone(),
            _ => u.level.solve_mass(&self.assemble(u)?),
        };
        Ok(Ultrafunction {
            level: u.level.clone(),
            coeffs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::q_frac;

    fn hat(m: usize) -> Arc<GalerkinLevel> {
        GalerkinLevel::new(m, Basis::Hat).unwrap()
    }

    fn unit(level: &Arc<GalerkinLevel>, i: usize) -> Ultrafunction {
        let mut c = vec![0.0; level.dim()];
        c[i] = 1.0;
        level.from_coeffs(c).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn matrices_in_closed_form() {
        let l = hat(8);
        let (m, b) = (l.mass_matrix(), l.first_derivative_matrix());
        for i in 0..7 {
            assert_eq!(m.get(i, i), q_frac(2, 24));
            assert_eq!(b.get(i, i), q_frac(0, 1));
            if i + 1 < 7 {
                assert_eq!(m.get(i, i + 1), q_frac(1, 48));
                assert_eq!(m.get(i + 1, i), q_frac(1, 48));
                assert_eq!(b.get(i, i + 1), q_frac(-1, 2));
                assert_eq!(b.get(i + 1, i), q_frac(1, 2));
            }
            if i + 2 < 7 {
                assert_eq!(m.get(i, i + 2), q_frac(0, 1));
            }
        }
        let s = GalerkinLevel::new(6, Basis::Sine).unwrap();
        let b = s.first_derivative_matrix();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(b.get(i, j), -b.get(j, i));
            }
        }
        // ∫ π cos(πx) sin(2πx) dx = 4/3
        assert_eq!(b.get(0, 1), q_frac(4, 3));
    }

    #[test]
    fn sine_derivative_matrix_matches_quadrature() {
        let s = GalerkinLevel::new(7, Basis::Sine).unwrap();
        for i in 0..6 {
            let k = (i + 1) as f64 * std::f64::consts::PI;
            let num = s.load(|x| k * (k * x).cos());
            for (j, v) in num.iter().enumerate() {
                let exact = s.first_derivative_matrix().get(i, j).to_f64().unwrap();
                assert!(close(*v, exact, 1e-12), "{i} {j}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn inner_product_examples() {
        let l = hat(4);
        let (p1, p3) = (unit(&l, 0), unit(&l, 2));
        assert!(close(inner_product(&p1, &p1).unwrap(), 1.0 / 6.0, 1e-15));
        assert_eq!(inner_product(&p1, &p3).unwrap(), 0.0);
        assert_eq!(l.zero().norm(), 0.0);
        let other = unit(&hat(8), 0);
        assert!(matches!(inner_product(&p1, &other), Err(GalerkinError::LevelMismatch { .. })));
    }

    #[test]
    fn projection_contract() {
        let l = hat(4);
        let f = FunctionDescriptor::parse("x*(1-x)").unwrap();
        let u = project(&f, &l).unwrap();
        assert!(residual(&f, &u).unwrap().iter().all(|r| r.abs() <= 1e-10));
        // Projecting an element of the space returns it.
        let v = l.interpolate(|x| (3.0 * x).sin()).unwrap();
        let pv = project(&FunctionDescriptor::Ultrafunction(v.clone()), &l).unwrap();
        for (a, b) in pv.coeffs().iter().zip(v.coeffs()) {
            assert!(close(*a, *b, 1e-12));
        }
        let custom = FunctionDescriptor::custom("mystery", |x| x);
        assert!(matches!(project(&custom, &l), Err(GalerkinError::QuadratureFailure { .. })));
        let bad = FunctionDescriptor::parse("sqrt(x-2)").unwrap();
        assert!(matches!(project(&bad, &l), Err(GalerkinError::QuadratureFailure { .. })));
    }

    #[test]
    fn second_order_convergence() {
        let f = FunctionDescriptor::parse("sin(PI*x)").unwrap();
        let ms = [4usize, 8, 16, 32];
        let pts: Vec<(f64, f64)> = ms
            .iter()
            .map(|&m| {
                let u = project(&f, &hat(m)).unwrap();
                ((1.0 / m as f64).ln(), l2_distance(&f, &u).ln())
            })
            .collect();
        let slope = crate::variational::fit_slope(&pts);
        assert!((slope - 2.0).abs() <= 0.2, "slope {slope}");
        let s = GalerkinLevel::new(4, Basis::Sine).unwrap();
        let u = project(&f, &s).unwrap();
        assert!(close(u.coeffs()[0], 1.0, 1e-12));
        assert!(l2_distance(&f, &u) < 1e-12);
    }

    #[test]
    fn projection_is_self_adjoint() {
        let f = FunctionDescriptor::parse("x^3 - x").unwrap();
        let g = FunctionDescriptor::parse("cos(2*x) * abs(x - 0.3)").unwrap();
        for basis in [Basis::Hat, Basis::Sine] {
            let l = GalerkinLevel::new(16, basis).unwrap();
            let a = pairing(&project(&f, &l).unwrap(), &g).unwrap();
            let b = pairing(&project(&g, &l).unwrap(), &f).unwrap();
            assert!(close(a, b, 1e-10), "{basis}: {a} vs {b}");
        }
    }

    #[test]
    fn derivative_examples() {
        let l = hat(4);
        assert!(generalized_derivative(&l.zero()).coeffs().iter().all(|c| *c == 0.0));
        assert_eq!(derivative_load(&unit(&l, 1)), vec![0.5, 0.0, -0.5]);
        let u = project(&FunctionDescriptor::parse("x*(1-x)").unwrap(), &l).unwrap();
        let du = generalized_derivative(&u);
        // ⟨Du, φ_i⟩ = ∫ u' φ_i, with u' integrated elementwise.
        let h = l.h();
        let slope = |x: f64| {
            let e = ((x / h).floor() as usize).min(3);
            let at = |n: usize| if n == 0 || n == 4 { 0.0 } else { u.coeffs()[n - 1] };
            (at(e + 1) - at(e)) / h
        };
        let direct = l.load(slope);
        for i in 0..3 {
            let lhs = inner_product(&du, &unit(&l, i)).unwrap();
            assert!(close(lhs, direct[i], 1e-10));
        }
    }

    #[test]
    fn extended_operators() {
        let l = hat(4);
        let u = unit(&l, 0);
        assert_eq!(extend_operator(LinearOp::Identity).apply(&u).unwrap().coeffs(), u.coeffs());
        let d = extend_operator(LinearOp::Derivative).apply(&u).unwrap();
        assert_eq!(d.coeffs(), generalized_derivative(&u).coeffs());
        let x = extend_operator(LinearOp::MultiplyBy(RealExpr::parse("x").unwrap()))
            .apply(&u)
            .unwrap();
        // ∫ x φ_1 φ_j integrated by hand on the two elements of φ_1.
        let exact = [1.0 / 24.0, 1.0 / 64.0, 0.0];
        for (j, e) in exact.iter().enumerate() {
            let got = inner_product(&x, &unit(&l, j)).unwrap();
            assert!(close(got, *e, 1e-10), "{j}: {got} vs {e}");
        }
    }

    #[test]
    fn levels_nest() {
        let coarse = hat(4);
        let u = coarse.from_coeffs(vec![0.3, -1.0, 2.5]).unwrap();
        let fine = hat(12);
        let v = u.embed(&fine).unwrap();
        for i in 0..3 {
            assert!(close(v.coeffs()[3 * i + 2], u.coeffs()[i], 1e-12));
        }
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            assert!(close(u.eval(x), v.eval(x), 1e-12));
        }
        assert!(matches!(u.embed(&hat(6)), Err(GalerkinError::NotNested { .. })));
        assert!(GalerkinLevel::new(1, Basis::Hat).is_err());
        assert!(RealExpr::parse("tan(x)").is_err());
        assert!(RealExpr::parse("y + 1").is_err());
    }
}
