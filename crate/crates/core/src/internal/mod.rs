//! Depth-one internal objects: natural extensions of sets of rationals,
//! hyperfinite sets of numbers, hyperfinite sums and transfer of bounded
//! formulas.

mod eventual;
pub mod formula;
mod level;
pub mod sexpr;
pub mod transfer;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::hyperreal::{ExactSeq, Hyperreal, HyperrealError, RealFn, RealFnKind, SequenceRep};
use crate::oracle::SetDescriptor;
use crate::poly::{q_u64, Poly};
use crate::ratfn::RatFn;
use crate::Q;

pub use formula::{Formula, Rel, Term};
pub use transfer::{transfer_eval, Assignment};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InternalError {
    #[error(transparent)]
    Hyperreal(#[from] HyperrealError),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("invalid hyperfinite set `{label}`: {reason}")]
    InvalidSet { label: String, reason: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("`{formula}` nests dependent hyperfinite quantifiers outside the exact fragment; a level scan needs about {work} evaluations (lower the horizon)")]
    Intractable { formula: String, work: u64 },
}

pub type Result<T> = std::result::Result<T, InternalError>;

/// Levels scanned for domain violations when a sum has no closed form.
const SUM_DOMAIN_LEVELS: u64 = 512;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Endpoint {
    pub at: Q,
    pub closed: bool,
}

/// An interval of rationals; `None` ends are unbounded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Option<Endpoint>,
    pub hi: Option<Endpoint>,
}

impl Interval {
    pub fn contains(&self, t: &Q) -> bool {
        let above = match &self.lo {
            None => true,
            Some(e) => t > &e.at || (e.closed && t == &e.at),
        };
        let below = match &self.hi {
            None => true,
            Some(e) => t < &e.at || (e.closed && t == &e.at),
        };
        above && below
    }

    /// Membership from the orderings of `t` against `consts`.
    fn contains_by(&self, consts: &[Q], o: &[Ordering]) -> bool {
        let ord = |q: &Q| o[consts.iter().position(|c| c == q).expect("endpoint listed")];
        let above = match &self.lo {
            None => true,
            Some(e) => match ord(&e.at) {
                Ordering::Greater => true,
                Ordering::Equal => e.closed,
                Ordering::Less => false,
            },
        };
        let below = match &self.hi {
            None => true,
            Some(e) => match ord(&e.at) {
                Ordering::Less => true,
                Ordering::Equal => e.closed,
                Ordering::Greater => false,
            },
        };
        above && below
    }
}

#[derive(Clone)]
enum RealSetKind {
    Intervals(Vec<Interval>),
    Predicate(Arc<dyn Fn(&Q) -> bool + Send + Sync>),
}

/// A set `E` of rationals whose natural extension `E*` is tested by
/// [`star_membership`].
#[derive(Clone)]
pub struct RealSetDescriptor {
    label: String,
    kind: RealSetKind,
}

impl fmt::Debug for RealSetDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealSet({})", self.label)
    }
}

impl RealSetDescriptor {
    pub fn intervals(label: impl Into<String>, parts: Vec<Interval>) -> Self {
        RealSetDescriptor {
            label: label.into(),
            kind: RealSetKind::Intervals(parts),
        }
    }

    pub fn interval(lo: Option<(Q, bool)>, hi: Option<(Q, bool)>) -> Self {
        let show = |e: &Option<(Q, bool)>, open: &str, closed: &str| match e {
            None => ("∞".to_string(), "(".to_string()),
            Some((q, c)) => (q.to_string(), if *c { closed } else { open }.to_string()),
        };
        let (l, lb) = show(&lo, "(", "[");
        let (h, hb) = show(&hi, ")", "]");
        let hb = if hi.is_none() { ")".to_string() } else { hb };
        let l = if lo.is_none() { "-∞".to_string() } else { l };
        let label = format!("{lb}{l}, {h}{hb}");
        let end = |e: Option<(Q, bool)>| e.map(|(at, closed)| Endpoint { at, closed });
        Self::intervals(
            label,
            vec![Interval {
                lo: end(lo),
                hi: end(hi),
            }],
        )
    }

    pub fn closed(a: Q, b: Q) -> Self {
        Self::interval(Some((a, true)), Some((b, true)))
    }

    pub fn open(a: Q, b: Q) -> Self {
        Self::interval(Some((a, false)), Some((b, false)))
    }

    pub fn positive() -> Self {
        Self::interval(Some((Q::zero(), false)), None).with_label("positive rationals")
    }

    pub fn nonnegative() -> Self {
        Self::interval(Some((Q::zero(), true)), None).with_label("nonnegative rationals")
    }

    pub fn all() -> Self {
        Self::interval(None, None).with_label("ℚ")
    }

    pub fn point(c: Q) -> Self {
        Self::closed(c.clone(), c.clone()).with_label(format!("{{{c}}}"))
    }

    pub fn predicate(label: impl Into<String>, f: impl Fn(&Q) -> bool + Send + Sync + 'static) -> Self {
        RealSetDescriptor {
            label: label.into(),
            kind: RealSetKind::Predicate(Arc::new(f)),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn contains(&self, t: &Q) -> bool {
        match &self.kind {
            RealSetKind::Intervals(parts) => parts.iter().any(|i| i.contains(t)),
            RealSetKind::Predicate(f) => f(t),
        }
    }
}

/// Whether `x ∈ E*`, i.e. whether `{n : x(n) ∈ E}` is qualified.
pub fn star_membership(x: &Hyperreal, e: &RealSetDescriptor) -> Result<bool> {
    let label = format!("{} ∈ {}*", x.label(), e.label());
    let set = match (&e.kind, x.rep().as_exact()) {
        (RealSetKind::Intervals(parts), Some(seq)) => {
            let mut consts: Vec<Q> = parts
                .iter()
                .flat_map(|i| i.lo.iter().chain(i.hi.iter()).map(|e| e.at.clone()))
                .collect();
            consts.sort();
            consts.dedup();
            let parts = parts.clone();
            let cs = consts.clone();
            seq.sign_set(label, consts, move |o| parts.iter().any(|i| i.contains_by(&cs, o)))
        }
        _ => {
            let f = x.rep().eval_fn();
            let e = e.clone();
            SetDescriptor::predicate(label, move |n| e.contains(&f(n)))
        }
    };
    Ok(x.ctx().is_qualified(&set).map_err(HyperrealError::from)?)
}

#[derive(Clone)]
pub(crate) enum SetKind {
    /// `{start + k·step : 0 ≤ k < count}` from level `valid_from` on, empty
    /// below it.
    Progression {
        start: RatFn,
        step: RatFn,
        count: RatFn,
        valid_from: u64,
    },
    /// The same finite set at every level.
    Constant(Vec<Q>),
    Explicit(Arc<dyn Fn(u64) -> Vec<Q> + Send + Sync>),
}

/// A level-indexed family of finite sets of rationals.
#[derive(Clone)]
pub struct HyperfiniteSet {
    label: String,
    kind: SetKind,
}

impl fmt::Debug for HyperfiniteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HyperfiniteSet({})", self.label)
    }
}

/// One level of a hyperfinite set.
pub(crate) enum LevelSet {
    Progression { start: Q, step: Q, count: u64 },
    Values(Vec<Q>),
}

impl HyperfiniteSet {
    /// `{start(n) + k·step(n) : 0 ≤ k < count(n)}` for `n ≥ valid_from`.
    /// `count` must be an integer-valued polynomial, nonnegative from
    /// `valid_from` on, and `step` positive there.
    pub fn progression(
        label: impl Into<String>,
        start: RatFn,
        step: RatFn,
        count: RatFn,
        valid_from: u64,
    ) -> Result<Self> {
        let label = label.into();
        let bad = |reason: &str| InternalError::InvalidSet {
            label: label.clone(),
            reason: reason.to_string(),
        };
        let c = count.as_poly().ok_or_else(|| bad("count must be a polynomial in n"))?;
        if !c.is_integer_valued() {
            return Err(bad("count must be integer at every level"));
        }
        if c.eventual_sign() == Ordering::Less {
            return Err(bad("count is eventually negative"));
        }
        if step.eventual_sign() != Ordering::Greater {
            return Err(bad("step must be positive"));
        }
        // Every sign change happens below these bounds; check the rest directly.
        let upto = valid_from
            .max(c.root_free_from())
            .max(step.stable_from())
            .max(start.den().root_free_from());
        if upto - valid_from > 1 << 16 {
            return Err(bad("validity region too large to check"));
        }
        for n in valid_from..upto {
            let t = q_u64(n);
            if c.eval(&t).is_negative() {
                return Err(bad(&format!("count is negative at level {n}")));
            }
            if !step.eval(&t).is_some_and(|s| s.is_positive()) || start.eval(&t).is_none() {
                return Err(bad(&format!("start/step undefined or step not positive at level {n}")));
            }
        }
        Ok(HyperfiniteSet {
            label,
            kind: SetKind::Progression {
                start,
                step,
                count,
                valid_from,
            },
        })
    }

    /// Integers `lo(n) ..= hi(n)` for integer-valued polynomials; empty when
    /// `hi(n) < lo(n)`, which may only happen below `valid_from`.
    pub fn integer_range(label: impl Into<String>, lo: Poly, hi: Poly) -> Result<Self> {
        let label = label.into();
        let count = hi.sub(&lo).add(&Poly::one());
        let cf = RatFn::poly(count.clone());
        // First level from which the count stays nonnegative.
        let mut from = count.root_free_from();
        while from > 0 && !count.eval(&q_u64(from - 1)).is_negative() {
            from -= 1;
        }
        if !lo.is_integer_valued() {
            return Err(InternalError::InvalidSet {
                label,
                reason: "endpoints must be integer at every level".into(),
            });
        }
        Self::progression(label, RatFn::poly(lo), RatFn::constant(Q::one()), cf, from)
    }

    /// `{0, 1, …, n}`.
    pub fn upto_n() -> Self {
        Self::integer_range("{0..n}", Poly::zero(), Poly::var()).expect("valid range")
    }

    /// `{k/n : 1 ≤ k ≤ n}` for `n ≥ 1`.
    pub fn unit_grid() -> Self {
        let inv = RatFn::var().recip().expect("nonzero");
        Self::progression("{k/n : 1≤k≤n}", inv.clone(), inv, RatFn::var(), 1).expect("valid grid")
    }

    pub fn constant(label: impl Into<String>, mut values: Vec<Q>) -> Self {
        values.sort();
        values.dedup();
        HyperfiniteSet {
            label: label.into(),
            kind: SetKind::Constant(values),
        }
    }

    pub fn empty() -> Self {
        Self::constant("∅", Vec::new())
    }

    /// An arbitrary family; output is sorted and deduplicated on access.
    pub fn explicit(label: impl Into<String>, f: impl Fn(u64) -> Vec<Q> + Send + Sync + 'static) -> Self {
        HyperfiniteSet {
            label: label.into(),
            kind: SetKind::Explicit(Arc::new(f)),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub(crate) fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub(crate) fn level(&self, n: u64) -> LevelSet {
        match &self.kind {
            SetKind::Progression {
                start,
                step,
                count,
                valid_from,
            } => {
                if n < *valid_from {
                    return LevelSet::Values(Vec::new());
                }
                let t = q_u64(n);
                let c = count.eval(&t).expect("polynomial");
                LevelSet::Progression {
                    start: start.eval(&t).expect("checked at construction"),
                    step: step.eval(&t).expect("checked at construction"),
                    count: c.to_integer().to_u64().expect("count fits in u64"),
                }
            }
            SetKind::Constant(v) => LevelSet::Values(v.clone()),
            SetKind::Explicit(f) => {
                let mut v = f(n);
                v.sort();
                v.dedup();
                LevelSet::Values(v)
            }
        }
    }

    /// The members at level `n`, sorted.
    pub fn at_level(&self, n: u64) -> Vec<Q> {
        match self.level(n) {
            LevelSet::Progression { start, step, count } => {
                let mut out = Vec::with_capacity(count as usize);
                let mut x = start;
                for _ in 0..count {
                    out.push(x.clone());
                    x += &step;
                }
                out
            }
            LevelSet::Values(v) => v,
        }
    }
}

/// The hyperreal `n ↦ |A_n|`.
pub fn hypercardinality(ctx: &crate::Oracle, a: &HyperfiniteSet) -> Hyperreal {
    let label = format!("|{}|", a.label());
    let rep = match &a.kind {
        SetKind::Progression { count, valid_from, .. } => {
            ExactSeq::from_head(vec![Q::zero(); *valid_from as usize], vec![count.clone()])
                .map(|s| SequenceRep::exact(label.clone(), s))
        }
        SetKind::Constant(v) => Some(SequenceRep::exact(label.clone(), ExactSeq::constant(q_u64(v.len() as u64)))),
        SetKind::Explicit(_) => None,
    };
    let rep = rep.unwrap_or_else(|| {
        let a = a.clone();
        SequenceRep::opaque(label, move |n| q_u64(a.at_level(n).len() as u64))
    });
    Hyperreal::from_rep(ctx, rep)
}

/// `Σ_{k<c} p(s + k·d)` as a rational function of `n`.
fn progression_power_sum(p: &Poly, s: &RatFn, d: &RatFn, c: &RatFn) -> RatFn {
    let deg = p.degree().unwrap_or(0);
    // (s + k d)^j = Σ_i C(j,i) s^{j-i} d^i k^i
    let mut coeff_k: Vec<RatFn> = vec![RatFn::zero(); deg + 1];
    for (j, fj) in p.coeffs().iter().enumerate() {
        if fj.is_zero() {
            continue;
        }
        let mut binom = Q::one();
        for i in 0..=j {
            let term = s
                .pow((j - i) as u32)
                .mul(&d.pow(i as u32))
                .mul(&RatFn::constant(fj * &binom));
            coeff_k[i] = coeff_k[i].add(&term);
            binom = binom * q_u64((j - i) as u64) / q_u64(i as u64 + 1);
        }
    }
    let mut total = RatFn::zero();
    for (i, e) in coeff_k.iter().enumerate() {
        if e.is_zero() {
            continue;
        }
        let ps = RatFn::poly(Poly::power_sum(i as u32)).compose(c).expect("polynomial");
        total = total.add(&e.mul(&ps));
    }
    total
}

/// The hyperreal `n ↦ Σ_{a ∈ A_n} f(a)`.
pub fn hyperfinite_sum(ctx: &crate::Oracle, a: &HyperfiniteSet, f: &RealFn) -> Result<Hyperreal> {
    let label = format!("Σ_{{{}}} {}", a.label(), f.label());
    let violation = |level: u64| {
        InternalError::from(HyperrealError::DomainViolation {
            function: f.label().to_string(),
            value: a.label().to_string(),
            level,
        })
    };
    let (set, g) = (a.clone(), f.clone());
    let direct = move |n: u64| -> Option<Q> {
        let mut acc = Q::zero();
        for x in set.at_level(n) {
            acc += g.eval(&x)?;
        }
        Some(acc)
    };
    match &a.kind {
        SetKind::Constant(v) => {
            let mut acc = Q::zero();
            for x in v {
                acc += f.eval(x).ok_or_else(|| violation(0))?;
            }
            return Ok(Hyperreal::from_rep(ctx, SequenceRep::exact(label, ExactSeq::constant(acc))));
        }
        SetKind::Progression {
            start,
            step,
            count,
            valid_from,
        } => {
            if let Some((piece, bound)) = progression_piece(f, start, step, count) {
                let total = progression_power_sum(&piece, start, step, count);
                let h = bound.max(*valid_from);
                if h <= crate::hyperreal::rep::HEAD_CAP {
                    let mut head = Vec::with_capacity(h as usize);
                    for n in 0..h {
                        head.push(direct(n).ok_or_else(|| violation(n))?);
                    }
                    if let Some(seq) = ExactSeq::from_head(head, vec![total]) {
                        return Ok(Hyperreal::from_rep(ctx, SequenceRep::exact(label, seq)));
                    }
                }
            }
        }
        SetKind::Explicit(_) => {}
    }
    for n in 0..ctx.horizon().min(SUM_DOMAIN_LEVELS) {
        direct(n).ok_or_else(|| violation(n))?;
    }
    Ok(Hyperreal::from_rep(
        ctx,
        SequenceRep::opaque(label, move |n| direct(n).unwrap_or_else(Q::zero)),
    ))
}

/// The polynomial piece of `f` that eventually covers the whole
/// progression, with the level from which it does.
fn progression_piece(f: &RealFn, start: &RatFn, step: &RatFn, count: &RatFn) -> Option<(Poly, u64)> {
    let RealFnKind::Piecewise { breaks, pieces } = f.kind() else {
        return None;
    };
    let last = start.add(&step.mul(&count.sub(&RatFn::constant(Q::one()))));
    let mut bound = count.stable_from();
    let mut piece_of = |x: &RatFn| {
        let mut i = 0;
        for b in breaks {
            let (s, from) = x.eventual_cmp(&RatFn::constant(b.clone()));
            bound = bound.max(from);
            if s != Ordering::Less {
                i += 1;
            }
        }
        i
    };
    let (i, j) = (piece_of(start), piece_of(&last));
    if i != j || count.is_zero() {
        return None;
    }
    pieces[i].as_poly().map(|p| (p.clone(), bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperreal::Magnitude;
    use crate::oracle::Oracle;
    use crate::poly::{q_frac, q_int};

    fn ctx() -> Oracle {
        Oracle::with_horizon(20_000)
    }

    #[test]
    fn star_membership_examples() {
        let o = ctx();
        let unit = RealSetDescriptor::closed(q_int(0), q_int(1));
        assert!(!star_membership(&Hyperreal::omega(&o), &unit).unwrap());
        assert!(star_membership(&Hyperreal::eps(&o), &RealSetDescriptor::positive()).unwrap());
        assert!(star_membership(&Hyperreal::from_rational(&o, q_frac(1, 2)), &unit).unwrap());
        // Open end excludes eps from (0, 1) only at no level; it is inside.
        assert!(star_membership(&Hyperreal::eps(&o), &RealSetDescriptor::open(q_int(0), q_int(1))).unwrap());
        let opaque = RealSetDescriptor::predicate("integers", |q: &Q| q.is_integer());
        assert!(star_membership(&Hyperreal::omega(&o), &opaque).unwrap());
    }

    #[test]
    fn cardinalities() {
        let o = ctx();
        let c = hypercardinality(&o, &HyperfiniteSet::upto_n());
        let w1 = Hyperreal::omega(&o).add(&Hyperreal::from_int(&o, 1)).unwrap();
        assert!(c.eq(&w1).unwrap());
        let e = hypercardinality(&o, &HyperfiniteSet::empty());
        assert!(e.eq(&Hyperreal::from_int(&o, 0)).unwrap());
        let sq = HyperfiniteSet::integer_range("{0..n²}", Poly::zero(), Poly::from_ints(&[0, 0, 1])).unwrap();
        let c2 = hypercardinality(&o, &sq);
        assert!(Hyperreal::omega(&o).lt(&c2).unwrap());
        assert_eq!(c2.at(3), q_int(10));
    }

    #[test]
    fn sums_in_closed_form() {
        let o = ctx();
        let a = HyperfiniteSet::upto_n();
        let ones = hyperfinite_sum(&o, &a, &RealFn::constant(q_int(1))).unwrap();
        assert!(ones.eq(&hypercardinality(&o, &a)).unwrap());
        let s = hyperfinite_sum(&o, &a, &RealFn::identity()).unwrap();
        assert_eq!(s.form(), crate::hyperreal::Form::ClosedForm);
        for n in 0..20u64 {
            assert_eq!(s.at(n), q_u64(n * (n + 1) / 2));
        }
        assert!(Hyperreal::omega(&o).lt(&s).unwrap());
    }

    #[test]
    fn riemann_sum_of_identity() {
        let o = ctx();
        let g = HyperfiniteSet::unit_grid();
        let s = hyperfinite_sum(&o, &g, &RealFn::identity()).unwrap();
        // Σ_{k=1}^{n} k/n = (n+1)/2; scaled by 1/n it is Σ k/n² = (n+1)/(2n).
        for n in 1..30u64 {
            assert_eq!(s.at(n), q_frac(n as i64 + 1, 2));
        }
        assert_eq!(s.at(0), q_int(0));
        let r = s.mul(&Hyperreal::eps(&o)).unwrap();
        for n in 1..30u64 {
            assert_eq!(r.at(n), q_frac(n as i64 + 1, 2 * n as i64));
        }
        let a = r.analyze().unwrap();
        assert_eq!(a.standard_part, Some(q_frac(1, 2)));
        assert_eq!(a.magnitude, Magnitude::FiniteNonInfinitesimal);
    }

    #[test]
    fn sums_match_direct_summation() {
        let o = ctx();
        let sets = [
            HyperfiniteSet::upto_n(),
            HyperfiniteSet::unit_grid(),
            HyperfiniteSet::integer_range("{-n..2n}", Poly::from_ints(&[0, -1]), Poly::from_ints(&[0, 2])).unwrap(),
        ];
        let fs = [
            RealFn::polynomial(vec![q_int(1), q_int(-2), q_frac(1, 3)]),
            RealFn::square(),
            RealFn::abs(),
            RealFn::polynomial(vec![q_int(0), q_int(0), q_int(0), q_int(1)]),
        ];
        for a in &sets {
            for f in &fs {
                let s = hyperfinite_sum(&o, a, f).unwrap();
                for n in 0..25u64 {
                    let want: Q = a.at_level(n).iter().map(|x| f.eval(x).unwrap()).sum();
                    assert_eq!(s.at(n), want, "{} {} at {n}", a.label(), f.label());
                }
            }
        }
    }

    #[test]
    fn sum_domain_violation() {
        let o = ctx();
        let recip = RealFn::rational("1/t", RatFn::var().recip().unwrap());
        let err = hyperfinite_sum(&o, &HyperfiniteSet::upto_n(), &recip).unwrap_err();
        assert!(matches!(
            err,
            InternalError::Hyperreal(HyperrealError::DomainViolation { level: 0, .. })
        ));
        let ok = hyperfinite_sum(&o, &HyperfiniteSet::unit_grid(), &recip).unwrap();
        assert_eq!(ok.at(2), q_int(3)); // 2 + 1
    }

    #[test]
    fn invalid_sets_are_rejected() {
        let bad = HyperfiniteSet::progression("bad", RatFn::zero(), RatFn::constant(q_int(1)), RatFn::constant(q_frac(1, 2)), 0);
        assert!(bad.is_err());
        let neg_step = HyperfiniteSet::progression("neg", RatFn::zero(), RatFn::constant(q_int(-1)), RatFn::var(), 0);
        assert!(neg_step.is_err());
    }
}
