//! Exact eventual truth of a formula whose free variables have exact
//! representatives.
//!
//! Within one residue class of `n` every free variable is a single rational
//! function of `n`, so a quantifier-free formula has a constant truth value
//! from some computable level on. A quantifier over a progression
//! `x = s(n) + k·d(n)`, `0 ≤ k < c(n)`, whose atoms are affine in `k` is
//! reduced to finitely many regions: the atoms' critical points `γ_i(n)` and
//! the ends `0`, `c(n) − 1` are eventually totally ordered, the body is
//! constant on each point and each open gap, and whether a region contains
//! an integer is decided from limits and integer-valued polynomials.
//! Anything outside this fragment yields `None`.

use std::cmp::Ordering;

use num_integer::Integer;
use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::hyperreal::rep::PERIOD_CAP;
use crate::hyperreal::{ExactSeq, RealFnKind};
use crate::poly::{q_u64, Poly};
use crate::ratfn::{Limit, RatFn};
use crate::Q;

use super::formula::{Formula, Term};
use super::SetKind;

/// Truth per residue class modulo `pattern.len()`, valid from `bound` on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Eventual {
    pub pattern: Vec<bool>,
    pub bound: u64,
}

#[derive(Clone)]
enum Binding {
    Fixed(RatFn),
    /// The variable under analysis: `b + a·k`.
    Active { a: RatFn, b: RatFn },
}

struct Engine {
    period: u64,
    residue: u64,
    bound: u64,
    env: Vec<(String, Binding)>,
    /// Factor by which the period must grow for a critical point to have a
    /// periodic fractional part; 1 when no refinement was requested.
    refine: u64,
}

/// `a·k + b`.
type Affine = (RatFn, RatFn);


/// Stability bounds beyond this are treated as undecided.
const MAX_BOUND: u64 = 1 << 53;

pub(crate) fn decide(f: &Formula, assignment: &[(String, &ExactSeq)]) -> Option<Eventual> {
    let mut base = 1u64;
    let mut head = 0u64;
    for (_, s) in assignment {
        base = base.lcm(&(s.period() as u64));
        if base > PERIOD_CAP as u64 {
            return None;
        }
        head = head.max(s.head().len() as u64);
    }
    let mut period = base;
    loop {
        match decide_with_period(f, assignment, period, head) {
            Ok(e) => return e,
            Err(k) => {
                period = period.checked_mul(k)?;
                if period > PERIOD_CAP as u64 {
                    return None;
                }
            }
        }
    }
}

/// `Err(k)` asks for the period to be multiplied by `k`.
fn decide_with_period(
    f: &Formula,
    assignment: &[(String, &ExactSeq)],
    period: u64,
    head: u64,
) -> Result<Option<Eventual>, u64> {
    let mut bound = head;
    let mut pattern = Vec::with_capacity(period as usize);
    for r in 0..period {
        let env = assignment
            .iter()
            .map(|(v, s)| (v.clone(), Binding::Fixed(s.branch_at(r).clone())))
            .collect();
        let mut e = Engine {
            period,
            residue: r,
            bound,
            env,
            refine: 1,
        };
        match e.formula(f) {
            Some(b) => pattern.push(b),
            None if e.refine > 1 => return Err(e.refine),
            None => return Ok(None),
        }
        bound = bound.max(e.bound);
    }
    if bound > MAX_BOUND {
        return Ok(None);
    }
    // Report the shortest period.
    let p = pattern.len();
    if let Some(d) = (1..p).find(|&d| p % d == 0 && (d..p).all(|i| pattern[i] == pattern[i % d])) {
        pattern.truncate(d);
    }
    Ok(Some(Eventual { pattern, bound }))
}

impl Engine {
    fn raise(&mut self, b: u64) {
        self.bound = self.bound.max(b);
    }

    /// Raises the bound by an index `m` of the residue class, i.e. level
    /// `period·m + residue`.
    fn raise_in_class(&mut self, m: u64) {
        let n = m.saturating_mul(self.period).saturating_add(self.residue);
        self.raise(n);
    }

    fn lookup(&self, v: &str) -> Option<&Binding> {
        self.env.iter().rev().find(|(w, _)| w == v).map(|(_, b)| b)
    }

    fn term(&mut self, t: &Term) -> Option<Affine> {
        Some(match t {
            Term::Const(q) => (RatFn::zero(), RatFn::constant(q.clone())),
            Term::Var(v) => match self.lookup(v)? {
                Binding::Fixed(r) => (RatFn::zero(), r.clone()),
                Binding::Active { a, b } => (a.clone(), b.clone()),
            },
            Term::Neg(x) => {
                let (a, b) = self.term(x)?;
                (a.neg(), b.neg())
            }
            Term::Add(x, y) => {
                let ((a1, b1), (a2, b2)) = (self.term(x)?, self.term(y)?);
                (a1.add(&a2), b1.add(&b2))
            }
            Term::Sub(x, y) => {
                let ((a1, b1), (a2, b2)) = (self.term(x)?, self.term(y)?);
                (a1.sub(&a2), b1.sub(&b2))
            }
            Term::Mul(x, y) => {
                let ((a1, b1), (a2, b2)) = (self.term(x)?, self.term(y)?);
                if a1.is_zero() {
                    (b1.mul(&a2), b1.mul(&b2))
                } else if a2.is_zero() {
                    (a1.mul(&b2), b1.mul(&b2))
                } else {
                    return None;
                }
            }
            Term::Div(x, y) => {
                let ((a1, b1), (a2, b2)) = (self.term(x)?, self.term(y)?);
                if !a2.is_zero() || b2.is_zero() {
                    return None;
                }
                self.raise(b2.stable_from());
                (a1.div(&b2)?, b1.div(&b2)?)
            }
            Term::Pow(x, k) => {
                let (a, b) = self.term(x)?;
                match k {
                    0 => (RatFn::zero(), RatFn::constant(Q::one())),
                    1 => (a, b),
                    _ if a.is_zero() => (a, b.pow(*k)),
                    _ => return None,
                }
            }
            Term::Apply(f, x) => {
                let (a, b) = self.term(x)?;
                if !a.is_zero() {
                    return None;
                }
                let RealFnKind::Piecewise { breaks, pieces } = f.kind() else {
                    return None;
                };
                let mut i = 0;
                for c in breaks {
                    let (s, from) = b.eventual_cmp(&RatFn::constant(c.clone()));
                    self.raise(from);
                    if s != Ordering::Less {
                        i += 1;
                    }
                }
                let composed = pieces[i].compose(&b)?;
                self.raise(composed.den().root_free_from());
                (RatFn::zero(), composed)
            }
        })
    }

    fn formula(&mut self, f: &Formula) -> Option<bool> {
        Some(match f {
            Formula::Const(b) => *b,
            Formula::Atom(rel, x, y) => {
                let ((a1, b1), (a2, b2)) = (self.term(x)?, self.term(y)?);
                debug_assert!(a1.is_zero() && a2.is_zero(), "no active variable here");
                let d = b1.sub(&b2);
                self.raise(d.stable_from());
                rel.holds(d.eventual_sign())
            }
            Formula::Not(a) => !self.formula(a)?,
            Formula::And(a, b) => {
                let (x, y) = (self.formula(a)?, self.formula(b)?);
                x && y
            }
            Formula::Or(a, b) => {
                let (x, y) = (self.formula(a)?, self.formula(b)?);
                x || y
            }
            Formula::Implies(a, b) => {
                let (x, y) = (self.formula(a)?, self.formula(b)?);
                !x || y
            }
            Formula::Forall(v, set, body) => self.quantifier(true, v, set.kind(), body)?,
            Formula::Exists(v, set, body) => self.quantifier(false, v, set.kind(), body)?,
        })
    }

    fn with<T>(&mut self, v: &str, b: Binding, f: impl FnOnce(&mut Self) -> T) -> T {
        self.env.push((v.to_string(), b));
        let r = f(self);
        self.env.pop();
        r
    }

    fn quantifier(&mut self, universal: bool, v: &str, set: &SetKind, body: &Formula) -> Option<bool> {
        let samples: Vec<RatFn> = match set {
            SetKind::Constant(values) => values.iter().map(|q| RatFn::constant(q.clone())).collect(),
            SetKind::Explicit(_) => return None,
            SetKind::Progression {
                start,
                step,
                count,
                valid_from,
            } => {
                self.raise(*valid_from);
                self.raise(count.stable_from());
                if count.is_zero() {
                    Vec::new()
                } else {
                    self.progression_samples(v, start, step, count, body)?
                }
            }
        };
        let mut result = universal;
        for x in samples {
            let t = self.with(v, Binding::Fixed(x), |e| e.formula(body))?;
            if t != universal {
                result = !universal;
            }
        }
        Some(result)
    }

    /// Values of the bound variable, one per region of the progression that
    /// eventually contains an index.
    fn progression_samples(&mut self, v: &str, s: &RatFn, d: &RatFn, c: &RatFn, body: &Formula) -> Option<Vec<RatFn>> {
        let last = c.sub(&RatFn::constant(Q::one()));
        let mut points = vec![RatFn::zero(), last.clone()];
        let active = Binding::Active { a: d.clone(), b: s.clone() };
        self.with(v, active, |e| e.critical_points(v, body, &mut points))?;

        points.sort_by(|x, y| x.eventual_cmp(y).0);
        points.dedup();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let (_, from) = points[i].eventual_cmp(&points[j]);
                self.raise(from);
            }
        }
        let i0 = points.iter().position(|p| p.is_zero()).expect("zero is a point");
        let i1 = points.iter().position(|p| *p == last).expect("last is a point");
        if i1 < i0 {
            return Some(Vec::new());
        }
        let mut out = Vec::new();
        for i in i0..=i1 {
            let p = &points[i];
            if self.contains_integer_point(p)? {
                out.push(p.clone());
            }
            if i < i1 {
                let q = &points[i + 1];
                if self.contains_integer_between(p, q)? {
                    out.push(p.add(q).mul(&RatFn::constant(Q::new(1.into(), 2.into()))));
                }
            }
        }
        Some(out.into_iter().map(|k| s.add(&d.mul(&k))).collect())
    }

    fn critical_points(&mut self, v: &str, f: &Formula, out: &mut Vec<RatFn>) -> Option<()> {
        match f {
            Formula::Const(_) => {}
            Formula::Atom(_, x, y) => {
                let ((a1, b1), (a2, b2)) = (self.term(x)?, self.term(y)?);
                let (a, b) = (a1.sub(&a2), b1.sub(&b2));
                if !a.is_zero() {
                    self.raise(a.stable_from());
                    out.push(b.neg().div(&a)?);
                }
            }
            Formula::Not(a) => self.critical_points(v, a, out)?,
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                self.critical_points(v, a, out)?;
                self.critical_points(v, b, out)?;
            }
            Formula::Forall(w, set, body) | Formula::Exists(w, set, body) => {
                if !(f.mentions(v) || body_mentions_active(self, body)) {
                    return Some(());
                }
                // Over a constant set the quantifier is a finite conjunction
                // or disjunction of its instances. Over a progression it may
                // depend on the outer variable through its own regions, which
                // this fragment does not track.
                let SetKind::Constant(values) = set.kind() else {
                    return None;
                };
                for c in values {
                    let fixed = Binding::Fixed(RatFn::constant(c.clone()));
                    self.with(w, fixed, |e| e.critical_points(v, body, out))?;
                }
            }
        }
        Some(())
    }

    /// `r` restricted to the residue class, as a function of the class index.
    fn in_class(&self, r: &RatFn) -> Option<RatFn> {
        let sub = RatFn::poly(Poly::new(vec![q_u64(self.residue), q_u64(self.period)]));
        r.compose(&sub)
    }

    /// Splits `g` as `T + c₀ + ρ` with `T` integer-valued without constant
    /// term and `ρ → 0`. Otherwise records the period refinement that makes
    /// `T` integer-valued on every residue class and returns `None`.
    fn split_integer(&mut self, g: &RatFn) -> Option<(RatFn, Q, RatFn)> {
        let (t, rho) = g.split();
        let c0 = t.coeffs().first().cloned().unwrap_or_else(Q::zero);
        let t1 = t.sub(&Poly::constant(c0.clone()));
        if t1.is_integer_valued() {
            return Some((RatFn::poly(t1), c0, rho));
        }
        let den = t1.coeffs().iter().fold(BigInt::one(), |l, c| l.lcm(c.denom()));
        self.refine = self.refine.lcm(&den.try_into().unwrap_or(u64::MAX));
        None
    }

    fn contains_integer_point(&mut self, p: &RatFn) -> Option<bool> {
        if let Some(c) = p.as_constant() {
            return Some(c.is_integer());
        }
        let g = self.in_class(p)?;
        let (_, c0, rho) = self.split_integer(&g)?;
        if rho.is_zero() {
            return Some(c0.is_integer());
        }
        let frac = &c0 - Q::from_integer(c0.floor().to_integer());
        let delta = if frac.is_zero() {
            Q::one()
        } else {
            frac.clone().min(Q::one() - frac)
        };
        let (_, f1) = rho.eventual_cmp(&RatFn::constant(delta.clone()));
        let (_, f2) = rho.eventual_cmp(&RatFn::constant(-delta));
        self.raise_in_class(f1.max(f2).max(rho.stable_from()));
        Some(false)
    }

    /// Whether the open interval `(p, q)`, with `p < q` eventually, contains
    /// an integer from some level on.
    fn contains_integer_between(&mut self, p: &RatFn, q: &RatFn) -> Option<bool> {
        let len = q.sub(p);
        let (s, from) = len.eventual_cmp(&RatFn::constant(Q::one()));
        if s == Ordering::Greater {
            self.raise(from);
            return Some(true);
        }
        let (gp, gq) = (self.in_class(p)?, self.in_class(q)?);
        let (t, _, _) = self.split_integer(&gp)?;
        let (lp, lq) = (gp.sub(&t), gq.sub(&t));
        let (Limit::Finite(alpha), Limit::Finite(beta)) = (lp.limit(), lq.limit()) else {
            return None;
        };
        let lo: BigInt = alpha.floor().to_integer() - 1;
        let hi = beta.ceil().to_integer() + 1;
        let mut z = lo;
        let mut bound = 0;
        while z <= hi {
            let zq = RatFn::constant(Q::from_integer(z.clone()));
            let (s1, f1) = lp.eventual_cmp(&zq);
            let (s2, f2) = lq.eventual_cmp(&zq);
            if s1 == Ordering::Less && s2 == Ordering::Greater {
                self.raise_in_class(f1.max(f2));
                return Some(true);
            }
            bound = bound.max(f1).max(f2);
            z += 1;
        }
        self.raise_in_class(bound);
        Some(false)
    }
}

fn body_mentions_active(e: &Engine, f: &Formula) -> bool {
    e.env
        .iter()
        .any(|(v, b)| matches!(b, Binding::Active { .. }) && f.mentions(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::internal::{HyperfiniteSet, Rel};
    use crate::poly::{q_frac, q_int};

    fn x() -> Term {
        Term::var("x")
    }

    fn closed(f: &Formula) -> Option<Eventual> {
        decide(f, &[])
    }

    #[test]
    fn exceeds_a_large_constant() {
        let f = Formula::exists("x", HyperfiniteSet::upto_n(), Formula::atom(Rel::Gt, x(), Term::int(1_000_000)));
        let e = closed(&f).unwrap();
        assert_eq!(e.pattern, vec![true]);
        assert!(e.bound >= 1_000_001);
    }

    #[test]
    fn nonnegativity_and_irrational_roots() {
        let a = HyperfiniteSet::upto_n();
        let f = Formula::forall("x", a.clone(), Formula::atom(Rel::Ge, x(), Term::int(0)));
        assert_eq!(closed(&f).unwrap().pattern, vec![true]);
        // x·x is outside the affine fragment.
        let g = Formula::exists("x", a, Formula::atom(Rel::Eq, x().mul(x()), Term::int(2)));
        assert!(closed(&g).is_none());
    }

    #[test]
    fn grid_points_and_fractions() {
        let grid = HyperfiniteSet::unit_grid();
        // Some k/n equals 1/2 exactly when n is even.
        let half = Formula::exists("x", grid.clone(), Formula::atom(Rel::Eq, x(), Term::Const(q_frac(1, 2))));
        assert_eq!(closed(&half).unwrap().pattern, vec![true, false]);
        // Every grid point lies in (0, 1].
        let inside = Formula::forall(
            "x",
            grid.clone(),
            Formula::atom(Rel::Gt, x(), Term::int(0)).and(Formula::atom(Rel::Le, x(), Term::int(1))),
        );
        assert_eq!(closed(&inside).unwrap().pattern, vec![true]);
        // Some grid point lies strictly between 1/3 and 1/3 + 1/1000.
        let narrow = Formula::exists(
            "x",
            grid,
            Formula::atom(Rel::Gt, x(), Term::Const(q_frac(1, 3)))
                .and(Formula::atom(Rel::Lt, x(), Term::Const(q_frac(1, 3) + q_frac(1, 1000)))),
        );
        assert_eq!(closed(&narrow).unwrap().pattern, vec![true]);
    }

    #[test]
    fn free_variables_by_residue() {
        let alt = ExactSeq::eventually_periodic(vec![], vec![q_int(1), q_int(-1)]);
        let f = Formula::atom(Rel::Gt, Term::var("s"), Term::int(0));
        let e = decide(&f, &[("s".into(), &alt)]).unwrap();
        assert_eq!(e.pattern, vec![true, false]);
        let w = ExactSeq::closed_form(RatFn::var()).unwrap();
        // ∃x∈{0..n} (x = w − 3): true once n ≥ 3.
        let g = Formula::exists(
            "x",
            HyperfiniteSet::upto_n(),
            Formula::atom(Rel::Eq, x(), Term::var("w").sub(Term::int(3))),
        );
        assert_eq!(decide(&g, &[("w".into(), &w)]).unwrap().pattern, vec![true]);
        // ∃x∈{0..n} (2x = w): only for even n.
        let h = Formula::exists(
            "x",
            HyperfiniteSet::upto_n(),
            Formula::atom(Rel::Eq, x().mul(Term::int(2)), Term::var("w")),
        );
        let d = decide(&h, &[("w".into(), &w)]).unwrap();
        assert_eq!(d.pattern, vec![true, false]);
        // Outside the fragment: the body is quadratic in x.
        let sq = Formula::exists("x", HyperfiniteSet::upto_n(), Formula::atom(Rel::Eq, x().mul(x()), Term::var("w")));
        assert!(decide(&sq, &[("w".into(), &w)]).is_none());
    }
}
