//! The hyperreal field: sequence representatives modulo equality on a
//! qualified set.
//!
//! A [`Hyperreal`] pairs a representative with the oracle that decides its
//! equalities and order. Values are never canonicalized; `eq` and `lt` are
//! oracle queries on `{n : x(n) = y(n)}` and `{n : x(n) < y(n)}`.

pub mod expr;
pub mod realfn;
pub mod rep;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::oracle::{Oracle, OracleError, SetDescriptor};
use crate::poly::{q_frac, q_int, q_u64};
use crate::ratfn::{Limit, RatFn};
use crate::Q;

pub use realfn::{RealFn, RealFnKind};
pub use rep::{ExactSeq, Form, SequenceRep};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HyperrealError {
    #[error("operands belong to different oracle contexts")]
    ContextMismatch,
    #[error("division by a hyperreal equal to zero: {0}")]
    DivisionByZero(String),
    #[error("`{function}` is undefined at level {level} of `{value}`")]
    DomainViolation {
        function: String,
        value: String,
        level: u64,
    },
    #[error("could not classify `{0}`")]
    Undecided(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub type Result<T> = std::result::Result<T, HyperrealError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Magnitude {
    Infinitesimal,
    FiniteNonInfinitesimal,
    Infinite,
}

/// Outcome of [`Hyperreal::analyze`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Analysis {
    pub magnitude: Magnitude,
    pub standard_part: Option<Q>,
    /// Whether the verdict rests on sampled (non-exact) order queries.
    pub heuristic: bool,
}

/// Largest denominator tried when guessing an opaque standard part.
const OPAQUE_MAX_DEN: u64 = 100;

/// Window sample used to extract opaque functions' domain violations.
const DOMAIN_SAMPLE: u64 = 4096;

#[derive(Clone)]
pub struct Hyperreal {
    rep: Arc<SequenceRep>,
    ctx: Oracle,
}

impl fmt::Debug for Hyperreal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hyperreal({})", self.rep.label())
    }
}

impl fmt::Display for Hyperreal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.rep.label())
    }
}

impl Hyperreal {
    pub fn from_rep(ctx: &Oracle, rep: SequenceRep) -> Self {
        Hyperreal {
            rep: Arc::new(rep),
            ctx: ctx.clone(),
        }
    }

    pub fn from_rational(ctx: &Oracle, c: Q) -> Self {
        Self::from_rep(ctx, SequenceRep::constant(c))
    }

    pub fn from_int(ctx: &Oracle, k: i64) -> Self {
        Self::from_rational(ctx, q_int(k))
    }

    /// The representative `n ↦ n`.
    pub fn omega(ctx: &Oracle) -> Self {
        Self::from_rep(ctx, SequenceRep::closed_form("omega", RatFn::var()))
    }

    /// `1/omega`, patched to `1` at `n = 0`.
    pub fn eps(ctx: &Oracle) -> Self {
        let inv = rep::ExactSeq::closed_form(RatFn::var())
            .and_then(|s| s.patched_inverse())
            .expect("1/n fits the caps");
        Self::from_rep(ctx, SequenceRep::exact("eps", inv))
    }

    pub fn closed_form(ctx: &Oracle, label: impl Into<String>, r: RatFn) -> Self {
        Self::from_rep(ctx, SequenceRep::closed_form(label, r))
    }

    pub fn eventually_periodic(ctx: &Oracle, label: impl Into<String>, preperiod: Vec<Q>, period: Vec<Q>) -> Self {
        Self::from_rep(ctx, SequenceRep::eventually_periodic(label, preperiod, period))
    }

    pub fn from_fn(ctx: &Oracle, label: impl Into<String>, f: impl Fn(u64) -> Q + Send + Sync + 'static) -> Self {
        Self::from_rep(ctx, SequenceRep::opaque(label, f))
    }

    pub fn rep(&self) -> &SequenceRep {
        &self.rep
    }

    pub fn ctx(&self) -> &Oracle {
        &self.ctx
    }

    pub fn label(&self) -> &str {
        self.rep.label()
    }

    pub fn at(&self, n: u64) -> Q {
        self.rep.eval(n)
    }

    pub fn form(&self) -> Form {
        self.rep.form()
    }

    fn same_ctx(&self, other: &Hyperreal) -> Result<()> {
        if self.ctx.same_as(&other.ctx) {
            Ok(())
        } else {
            Err(HyperrealError::ContextMismatch)
        }
    }

    fn wrap(&self, rep: SequenceRep) -> Hyperreal {
        Hyperreal {
            rep: Arc::new(rep),
            ctx: self.ctx.clone(),
        }
    }

    fn zip(
        &self,
        other: &Hyperreal,
        sym: &str,
        op_q: impl Fn(&Q, &Q) -> Q + Send + Sync + 'static,
        op_r: impl Fn(&RatFn, &RatFn) -> RatFn,
    ) -> Result<Hyperreal> {
        self.same_ctx(other)?;
        let label = format!("({} {sym} {})", self.label(), other.label());
        if let (Some(a), Some(b)) = (self.rep.as_exact(), other.rep.as_exact()) {
            if let Some(s) = a.zip_with(b, &op_q, op_r) {
                return Ok(self.wrap(SequenceRep::exact(label, s)));
            }
        }
        let (f, g) = (self.rep.eval_fn(), other.rep.eval_fn());
        Ok(self.wrap(SequenceRep::opaque(label, move |n| op_q(&f(n), &g(n)))))
    }

    pub fn add(&self, other: &Hyperreal) -> Result<Hyperreal> {
        self.zip(other, "+", |a, b| a + b, RatFn::add)
    }

    pub fn sub(&self, other: &Hyperreal) -> Result<Hyperreal> {
        self.zip(other, "-", |a, b| a - b, RatFn::sub)
    }

    pub fn mul(&self, other: &Hyperreal) -> Result<Hyperreal> {
        self.zip(other, "*", |a, b| a * b, RatFn::mul)
    }

    pub fn neg(&self) -> Hyperreal {
        let label = format!("-{}", self.label());
        match self.rep.as_exact() {
            Some(s) => self.wrap(SequenceRep::exact(label, s.neg())),
            None => {
                let f = self.rep.eval_fn();
                self.wrap(SequenceRep::opaque(label, move |n| -f(n)))
            }
        }
    }

    /// Multiplicative inverse. Queries whether `self` equals zero; if not,
    /// the representative is `1/x(n)` where `x(n) ≠ 0` and `1` elsewhere.
    pub fn inv(&self) -> Result<Hyperreal> {
        let zero = Hyperreal::from_rational(&self.ctx, Q::zero());
        if self.eq(&zero)? {
            return Err(HyperrealError::DivisionByZero(self.label().to_string()));
        }
        let label = format!("1/{}", self.label());
        if let Some(s) = self.rep.as_exact().and_then(|s| s.patched_inverse()) {
            return Ok(self.wrap(SequenceRep::exact(label, s)));
        }
        let f = self.rep.eval_fn();
        Ok(self.wrap(SequenceRep::opaque(label, move |n| {
            let v = f(n);
            if v.is_zero() {
                Q::one()
            } else {
                Q::one() / v
            }
        })))
    }

    pub fn div(&self, other: &Hyperreal) -> Result<Hyperreal> {
        self.same_ctx(other)?;
        self.mul(&other.inv()?)
    }

    pub fn pow(&self, k: u32) -> Hyperreal {
        let mut acc = Hyperreal::from_rational(&self.ctx, Q::one());
        for _ in 0..k {
            acc = acc.mul(self).expect("same context");
        }
        acc.wrap_label(format!("{}^{k}", self.label()))
    }

    fn wrap_label(self, label: String) -> Hyperreal {
        let rep = match self.rep.as_exact() {
            Some(s) => SequenceRep::exact(label, (**s).clone()),
            None => SequenceRep::from_opaque_fn(label, self.rep.eval_fn()),
        };
        self.wrap(rep)
    }

    /// The set `{n : cmp(x(n), y(n))}` for a sign predicate on `x − y`.
    fn relation_set(
        &self,
        other: &Hyperreal,
        sym: &str,
        pred: impl Fn(Ordering) -> bool + Send + Sync + Clone + 'static,
    ) -> Result<SetDescriptor> {
        self.same_ctx(other)?;
        let label = format!("{} {sym} {}", self.label(), other.label());
        if let (Some(a), Some(b)) = (self.rep.as_exact(), other.rep.as_exact()) {
            if let Some(d) = a.zip_with(b, |x, y| x - y, RatFn::sub) {
                return Ok(Arc::new(d).sign_set(label, vec![Q::zero()], move |s| pred(s[0])));
            }
        }
        let (f, g) = (self.rep.eval_fn(), other.rep.eval_fn());
        Ok(SetDescriptor::predicate(label, move |n| pred(f(n).cmp(&g(n)))))
    }

    /// Equality on a qualified set.
    #[allow(clippy::should_implement_trait)]
    pub fn eq(&self, other: &Hyperreal) -> Result<bool> {
        let s = self.relation_set(other, "=", |o| o == Ordering::Equal)?;
        Ok(self.ctx.is_qualified(&s)?)
    }

    /// Strict order on a qualified set.
    pub fn lt(&self, other: &Hyperreal) -> Result<bool> {
        let s = self.relation_set(other, "<", |o| o == Ordering::Less)?;
        Ok(self.ctx.is_qualified(&s)?)
    }

    pub fn gt(&self, other: &Hyperreal) -> Result<bool> {
        other.lt(self)
    }

    pub fn le(&self, other: &Hyperreal) -> Result<bool> {
        Ok(!other.lt(self)?)
    }

    /// Trichotomy through the oracle.
    pub fn compare(&self, other: &Hyperreal) -> Result<Ordering> {
        if self.lt(other)? {
            Ok(Ordering::Less)
        } else if self.eq(other)? {
            Ok(Ordering::Equal)
        } else {
            Ok(Ordering::Greater)
        }
    }

    pub fn abs(&self) -> Result<Hyperreal> {
        self.apply(&RealFn::abs())
    }

    /// Natural extension `f*(x)`, represented by `n ↦ f(x(n))`.
    pub fn apply(&self, f: &RealFn) -> Result<Hyperreal> {
        let label = format!("{}({})", f.label(), self.label());
        let violation = |level| HyperrealError::DomainViolation {
            function: f.label().to_string(),
            value: self.label().to_string(),
            level,
        };
        if let (Some(s), RealFnKind::Piecewise { breaks, pieces }) = (self.rep.as_exact(), f.kind()) {
            let mut h = s.head().len() as u64;
            let mut branches = Vec::with_capacity(s.period());
            for b in s.branches() {
                let mut i = 0;
                for c in breaks {
                    let (sign, from) = b.eventual_cmp(&RatFn::constant(c.clone()));
                    h = h.max(from);
                    if sign != Ordering::Less {
                        i += 1;
                    }
                }
                let piece = &pieces[i];
                let composed = piece.compose(b).ok_or_else(|| violation(h))?;
                let den_at_b = RatFn::poly(piece.den().clone())
                    .compose(b)
                    .expect("polynomial composition");
                h = h
                    .max(composed.den().root_free_from())
                    .max(den_at_b.num().root_free_from());
                branches.push(composed);
            }
            match s.rebuild(h, branches, |_, v| f.eval(&v)) {
                Ok(Some(seq)) => return Ok(self.wrap(SequenceRep::exact(label, seq))),
                Ok(None) => {}
                Err(level) => return Err(violation(level)),
            }
        }
        let horizon = self.ctx.horizon();
        let g = self.rep.eval_fn();
        for n in 0..horizon.min(DOMAIN_SAMPLE) {
            if f.eval(&g(n)).is_none() {
                return Err(violation(n));
            }
        }
        let f = f.clone();
        Ok(self.wrap(SequenceRep::opaque(label, move |n| {
            f.eval(&g(n)).unwrap_or_else(Q::zero)
        })))
    }

    pub fn classify(&self) -> Result<Magnitude> {
        Ok(self.analyze()?.magnitude)
    }

    /// The rational `r` with `x − r` infinitesimal, or `None` for infinite
    /// values.
    pub fn standard_part(&self) -> Result<Option<Q>> {
        Ok(self.analyze()?.standard_part)
    }

    pub fn analyze(&self) -> Result<Analysis> {
        match self.rep.as_exact() {
            Some(s) => self.analyze_exact(s),
            None => self.analyze_opaque(),
        }
    }

    fn analyze_exact(&self, s: &rep::ExactSeq) -> Result<Analysis> {
        let outcome = |b: &RatFn| match b.limit() {
            Limit::Finite(l) if l.is_zero() => (Magnitude::Infinitesimal, Some(l)),
            Limit::Finite(l) => (Magnitude::FiniteNonInfinitesimal, Some(l)),
            Limit::PosInf | Limit::NegInf => (Magnitude::Infinite, None),
        };
        let per_residue: Vec<_> = s.branches().iter().map(outcome).collect();
        let mut distinct: Vec<(Magnitude, Option<Q>)> = Vec::new();
        for o in &per_residue {
            if !distinct.contains(o) {
                distinct.push(o.clone());
            }
        }
        let chosen = if distinct.len() == 1 {
            distinct.pop()
        } else {
            // Exactly one residue class mod p is qualified; ask which
            // outcome it carries.
            let p = per_residue.len();
            let mut found = None;
            for o in &distinct {
                let period: Vec<bool> = per_residue.iter().map(|x| x == o).collect();
                let residues: Vec<String> = (0..p).filter(|&r| period[r]).map(|r| r.to_string()).collect();
                let set = SetDescriptor::periodic(
                    format!("{{n mod {p} ∈ {{{}}}}}", residues.join(",")),
                    Vec::new(),
                    period,
                );
                if self.ctx.is_qualified(&set)? {
                    found = Some(o.clone());
                    break;
                }
            }
            found
        };
        let (magnitude, standard_part) =
            chosen.ok_or_else(|| HyperrealError::Undecided(self.label().to_string()))?;
        Ok(Analysis {
            magnitude,
            standard_part,
            heuristic: false,
        })
    }

    /// Order-query ladder against `1/k` and `k` for `k = 1, 10, …, 10⁶`.
    fn analyze_opaque(&self) -> Result<Analysis> {
        let ctx = &self.ctx;
        let a = self.abs()?;
        let rungs: Vec<Q> = (0..=6).map(|e| q_int(10i64.pow(e))).collect();
        let magnitude = if a.lt(&Hyperreal::from_rational(ctx, Q::one()))? {
            let mut all = true;
            let mut last = true;
            for k in &rungs[1..] {
                let below = a.lt(&Hyperreal::from_rational(ctx, Q::one() / k))?;
                if below && !last {
                    return Err(HyperrealError::Undecided(self.label().to_string()));
                }
                last = below;
                all &= below;
            }
            if all {
                Magnitude::Infinitesimal
            } else {
                Magnitude::FiniteNonInfinitesimal
            }
        } else {
            let mut all = true;
            let mut last = true;
            for k in &rungs {
                let above = a.gt(&Hyperreal::from_rational(ctx, k.clone()))?;
                if above && !last {
                    return Err(HyperrealError::Undecided(self.label().to_string()));
                }
                last = above;
                all &= above;
            }
            if all {
                Magnitude::Infinite
            } else {
                Magnitude::FiniteNonInfinitesimal
            }
        };
        let standard_part = match magnitude {
            Magnitude::Infinitesimal => Some(Q::zero()),
            Magnitude::Infinite => None,
            Magnitude::FiniteNonInfinitesimal => {
                let probe = self.at(ctx.horizon().saturating_sub(1));
                let r = best_rational(&probe, OPAQUE_MAX_DEN);
                let d = self.sub(&Hyperreal::from_rational(ctx, r.clone()))?.abs()?;
                let tol = q_frac(1, 2 * (OPAQUE_MAX_DEN * OPAQUE_MAX_DEN) as i64);
                if d.lt(&Hyperreal::from_rational(ctx, tol))? {
                    Some(r)
                } else {
                    return Err(HyperrealError::Undecided(self.label().to_string()));
                }
            }
        };
        // Below the ladder's resolution but within the standard-part
        // tolerance of zero.
        let magnitude = match &standard_part {
            Some(r) if r.is_zero() => Magnitude::Infinitesimal,
            _ => magnitude,
        };
        Ok(Analysis {
            magnitude,
            standard_part,
            heuristic: true,
        })
    }
}

/// Closest rational with denominator at most `max_den` (continued fractions).
fn best_rational(x: &Q, max_den: u64) -> Q {
    let (mut h0, mut h1) = (q_int(0), q_int(1));
    let (mut k0, mut k1) = (q_int(1), q_int(0));
    let mut rem = x.clone();
    let bound = q_u64(max_den);
    for _ in 0..64 {
        let a = Q::from_integer(rem.floor().to_integer());
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        if k2 > bound {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = &rem - &a;
        if frac.is_zero() {
            break;
        }
        rem = Q::one() / frac;
    }
    if k1.is_zero() {
        return Q::from_integer(x.round().to_integer());
    }
    h1 / k1
}

/// Rendering of a rational for JSON output: `p/q`, or an integer.
pub fn format_rational(q: &Q) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Approximate decimal value, for display only.
pub fn rational_to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or_else(|| if q.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    fn ctx() -> Oracle {
        Oracle::default()
    }

    #[test]
    fn from_rational_embedding() {
        let o = ctx();
        let a = Hyperreal::from_rational(&o, q_frac(3, 2));
        let b = Hyperreal::from_rational(&o, q_frac(3, 2));
        assert!(a.eq(&b).unwrap());
        assert!(!a.eq(&Hyperreal::from_int(&o, 1)).unwrap());
        assert_eq!(Hyperreal::from_int(&o, 0).at(17), q_int(0));
    }

    #[test]
    fn omega_is_infinite() {
        let o = ctx();
        let w = Hyperreal::omega(&o);
        for k in [10, 1_000_000] {
            assert!(Hyperreal::from_int(&o, k).lt(&w).unwrap());
        }
        assert!(!w.eq(&Hyperreal::from_int(&o, 5)).unwrap());
        assert_eq!(w.classify().unwrap(), Magnitude::Infinite);
        assert_eq!(w.standard_part().unwrap(), None);
        let e = w.inv().unwrap();
        assert_eq!(e.classify().unwrap(), Magnitude::Infinitesimal);
        assert!(Hyperreal::from_int(&o, 0).lt(&e).unwrap());
    }

    #[test]
    fn ring_identity_with_eps() {
        let o = ctx();
        let one = Hyperreal::from_int(&o, 1);
        let e = Hyperreal::eps(&o);
        let lhs = one.add(&e).unwrap().mul(&one.sub(&e).unwrap()).unwrap();
        let rhs = one.sub(&e.mul(&e).unwrap()).unwrap();
        assert!(lhs.eq(&rhs).unwrap());
        let w = Hyperreal::omega(&o);
        let w1 = w.add(&one).unwrap();
        assert!(w1.sub(&w).unwrap().eq(&one).unwrap());
    }

    #[test]
    fn inverse_cases() {
        let o = ctx();
        let two = Hyperreal::from_int(&o, 2);
        assert!(two.inv().unwrap().eq(&Hyperreal::from_rational(&o, q_frac(1, 2))).unwrap());
        let w = Hyperreal::omega(&o);
        assert!(w.inv().unwrap().inv().unwrap().eq(&w).unwrap());
        let zero = Hyperreal::from_int(&o, 0);
        assert!(matches!(zero.inv(), Err(HyperrealError::DivisionByZero(_))));
    }

    #[test]
    fn parity_patch_follows_oracle() {
        // x(n) = n on evens, 0 on odds
        let o = ctx();
        let x = Hyperreal::from_rep(
            &o,
            SequenceRep::exact(
                "n·[n even]",
                rep::ExactSeq::closed_form(RatFn::var())
                    .unwrap()
                    .zip_with(
                        &rep::ExactSeq::eventually_periodic(vec![], vec![q_int(1), q_int(0)]),
                        |a, b| a * b,
                        RatFn::mul,
                    )
                    .unwrap(),
            ),
        );
        let evens = o.is_qualified(&SetDescriptor::evens()).unwrap();
        match x.inv() {
            Ok(ix) => {
                assert!(evens);
                assert!(x.mul(&ix).unwrap().eq(&Hyperreal::from_int(&o, 1)).unwrap());
                assert_eq!(ix.at(3), q_int(1));
                assert_eq!(ix.at(4), q_frac(1, 4));
            }
            Err(HyperrealError::DivisionByZero(_)) => assert!(!evens),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn alternating_sign_collapses_consistently() {
        let o = ctx();
        let alt = Hyperreal::eventually_periodic(&o, "(-1)^n", vec![], vec![q_int(1), q_int(-1)]);
        let is_one = alt.eq(&Hyperreal::from_int(&o, 1)).unwrap();
        let is_minus = alt.eq(&Hyperreal::from_int(&o, -1)).unwrap();
        assert!(is_one ^ is_minus);
        // n(-1)^n/(n+1)
        let r = RatFn::new(Poly::from_ints(&[0, 1]), Poly::from_ints(&[1, 1]));
        let y = Hyperreal::closed_form(&o, "n/(n+1)", r).mul(&alt).unwrap();
        let st = y.standard_part().unwrap().unwrap();
        assert_eq!(st, if is_one { q_int(1) } else { q_int(-1) });
    }

    #[test]
    fn classify_closed_forms() {
        let o = ctx();
        // 1 + 1/(n+1)
        let r = RatFn::new(Poly::from_ints(&[2, 1]), Poly::from_ints(&[1, 1]));
        let x = Hyperreal::closed_form(&o, "1+1/(n+1)", r);
        let a = x.analyze().unwrap();
        assert_eq!(a.magnitude, Magnitude::FiniteNonInfinitesimal);
        assert_eq!(a.standard_part, Some(q_int(1)));
        assert!(!a.heuristic);
    }

    #[test]
    fn natural_extension_examples() {
        let o = ctx();
        let w = Hyperreal::omega(&o);
        let sq = w.apply(&RealFn::square()).unwrap();
        assert_eq!(sq.at(7), q_int(49));
        assert!(w.lt(&sq).unwrap());
        // |(-1)^n / n| = 1/n on n >= 1
        let alt = Hyperreal::eventually_periodic(&o, "(-1)^n", vec![], vec![q_int(1), q_int(-1)]);
        let x = alt.mul(&Hyperreal::eps(&o)).unwrap();
        let ax = x.abs().unwrap();
        assert!(ax.eq(&Hyperreal::eps(&o)).unwrap());
        assert_eq!(ax.form(), Form::ClosedForm);
        assert!(x.apply(&RealFn::identity()).unwrap().eq(&x).unwrap());
        let c = Hyperreal::from_int(&o, -3).apply(&RealFn::abs()).unwrap();
        assert!(c.eq(&Hyperreal::from_int(&o, 3)).unwrap());
    }

    #[test]
    fn domain_violation() {
        let o = ctx();
        let recip = RealFn::rational("1/t", RatFn::var().recip().unwrap());
        let zero = Hyperreal::from_int(&o, 0);
        assert!(matches!(zero.apply(&recip), Err(HyperrealError::DomainViolation { .. })));
        // defined eventually but not at level 0
        let w = Hyperreal::omega(&o);
        assert!(matches!(w.apply(&recip), Err(HyperrealError::DomainViolation { level: 0, .. })));
    }

    #[test]
    fn context_mismatch() {
        let (a, b) = (ctx(), ctx());
        let x = Hyperreal::from_int(&a, 1);
        let y = Hyperreal::from_int(&b, 1);
        assert_eq!(x.add(&y).unwrap_err(), HyperrealError::ContextMismatch);
        assert_eq!(x.eq(&y).unwrap_err(), HyperrealError::ContextMismatch);
    }

    #[test]
    fn opaque_values_use_the_ladder() {
        // 1/n must fall below the standard-part tolerance on the window.
        let o = Oracle::with_horizon(50_000);
        let x = Hyperreal::from_fn(&o, "opaque 3 + 1/n", |n| q_int(3) + Q::one() / q_u64(n + 1));
        let a = x.analyze().unwrap();
        assert!(a.heuristic);
        assert_eq!(a.magnitude, Magnitude::FiniteNonInfinitesimal);
        assert_eq!(a.standard_part, Some(q_int(3)));
        let big = Hyperreal::from_fn(&o, "opaque n^2", |n| q_u64(n * n));
        assert_eq!(big.classify().unwrap(), Magnitude::Infinite);
    }
}
