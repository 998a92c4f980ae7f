//! Sequence representatives `ℕ → ℚ` of hyperreals.
//!
//! Exact representatives are explicit head values followed by a periodic
//! choice of rational functions of `n`: `x(n) = head[n]` below
//! `head.len()`, and `x(n) = branches[n mod p](n)` from there on. A single
//! branch is a closed form; constant branches are an eventually periodic
//! sequence. Everything else is an opaque callback.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::oracle::{periodic_from, Classification, EvalFn, SetDescriptor};
use crate::poly::q_u64;
use crate::ratfn::RatFn;
use crate::Q;

/// Longest explicit head kept before an exact representative degrades to an
/// opaque one.
pub const HEAD_CAP: u64 = 1 << 16;
/// Longest branch period kept exact.
pub const PERIOD_CAP: usize = 1 << 12;

pub type OpaqueFn = Arc<dyn Fn(u64) -> Q + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Form {
    ClosedForm,
    EventuallyPeriodic,
    /// A periodic choice among several rational functions.
    PeriodicClosedForm,
    Opaque,
}

#[derive(Clone, PartialEq, Eq)]
pub struct ExactSeq {
    head: Vec<Q>,
    branches: Vec<RatFn>,
}

impl ExactSeq {
    /// Caller guarantees every branch denominator is nonzero from
    /// `head.len()` on.
    fn from_parts(head: Vec<Q>, branches: Vec<RatFn>) -> Self {
        debug_assert!(!branches.is_empty());
        let mut branches = branches;
        let p = branches.len();
        if let Some(d) = (1..p).find(|&d| p % d == 0 && (d..p).all(|r| branches[r] == branches[r % d])) {
            branches.truncate(d);
        }
        ExactSeq { head, branches }
    }

    pub fn constant(c: Q) -> Self {
        Self::from_parts(Vec::new(), vec![RatFn::constant(c)])
    }

    /// `n ↦ r(n)`, with `0` stored at any pole.
    pub fn closed_form(r: RatFn) -> Option<Self> {
        let h = r.den().root_free_from();
        if h > HEAD_CAP {
            return None;
        }
        let head = (0..h).map(|n| r.eval(&q_u64(n)).unwrap_or_else(Q::zero)).collect();
        Some(Self::from_parts(head, vec![r]))
    }

    pub fn eventually_periodic(preperiod: Vec<Q>, period: Vec<Q>) -> Self {
        assert!(!period.is_empty(), "empty period");
        let p = period.len() as u64;
        let l = preperiod.len() as u64;
        let branches = (0..p)
            .map(|r| RatFn::constant(period[((r + p - l % p) % p) as usize].clone()))
            .collect();
        Self::from_parts(preperiod, branches)
    }

    /// Explicit values followed by periodic branches. The head is extended
    /// with branch values past any pole; `None` if that meets a pole or
    /// exceeds the cap.
    pub fn from_head(mut head: Vec<Q>, branches: Vec<RatFn>) -> Option<Self> {
        assert!(!branches.is_empty(), "no branches");
        if branches.len() > PERIOD_CAP {
            return None;
        }
        let h = branches
            .iter()
            .map(|b| b.den().root_free_from())
            .max()
            .unwrap_or(0)
            .max(head.len() as u64);
        if h > HEAD_CAP {
            return None;
        }
        let p = branches.len() as u64;
        for n in head.len() as u64..h {
            head.push(branches[(n % p) as usize].eval(&q_u64(n))?);
        }
        Some(Self::from_parts(head, branches))
    }

    pub fn head(&self) -> &[Q] {
        &self.head
    }

    pub fn branches(&self) -> &[RatFn] {
        &self.branches
    }

    pub fn period(&self) -> usize {
        self.branches.len()
    }

    pub fn branch_at(&self, n: u64) -> &RatFn {
        &self.branches[(n % self.branches.len() as u64) as usize]
    }

    pub fn eval(&self, n: u64) -> Q {
        if (n as usize) < self.head.len() {
            self.head[n as usize].clone()
        } else {
            self.branch_at(n)
                .eval(&q_u64(n))
                .expect("branch denominator vanishes beyond the head")
        }
    }

    pub fn form(&self) -> Form {
        if self.branches.len() == 1 {
            Form::ClosedForm
        } else if self.branches.iter().all(|b| b.as_constant().is_some()) {
            Form::EventuallyPeriodic
        } else {
            Form::PeriodicClosedForm
        }
    }

    /// Pointwise combination; `None` when the result would exceed the caps.
    pub fn zip_with(
        &self,
        other: &ExactSeq,
        op_q: impl Fn(&Q, &Q) -> Q,
        op_r: impl Fn(&RatFn, &RatFn) -> RatFn,
    ) -> Option<ExactSeq> {
        let p = self.period().lcm(&other.period());
        if p > PERIOD_CAP {
            return None;
        }
        let h = self.head.len().max(other.head.len()) as u64;
        let head = (0..h).map(|n| op_q(&self.eval(n), &other.eval(n))).collect();
        let branches = (0..p)
            .map(|r| op_r(&self.branches[r % self.period()], &other.branches[r % other.period()]))
            .collect();
        Some(Self::from_parts(head, branches))
    }

    pub fn neg(&self) -> ExactSeq {
        ExactSeq {
            head: self.head.iter().map(|q| -q).collect(),
            branches: self.branches.iter().map(RatFn::neg).collect(),
        }
    }

    /// Inverse with the value `1` wherever the sequence vanishes. `None` when
    /// the patched head would exceed the cap.
    pub fn patched_inverse(&self) -> Option<ExactSeq> {
        let mut h = self.head.len() as u64;
        let mut branches = Vec::with_capacity(self.period());
        for b in &self.branches {
            match b.recip() {
                Some(r) => {
                    h = h.max(b.num().root_free_from());
                    branches.push(r);
                }
                None => branches.push(RatFn::constant(Q::one())),
            }
        }
        if h > HEAD_CAP {
            return None;
        }
        let head = (0..h)
            .map(|n| {
                let v = self.eval(n);
                if v.is_zero() {
                    Q::one()
                } else {
                    Q::one() / v
                }
            })
            .collect();
        Some(Self::from_parts(head, branches))
    }

    /// Extends the head to `h`, re-deriving values from the current
    /// representative through `f`.
    pub(crate) fn rebuild(
        &self,
        h: u64,
        branches: Vec<RatFn>,
        f: impl Fn(u64, Q) -> Option<Q>,
    ) -> Result<Option<ExactSeq>, u64> {
        if h > HEAD_CAP {
            return Ok(None);
        }
        let mut head = Vec::with_capacity(h as usize);
        for n in 0..h {
            head.push(f(n, self.eval(n)).ok_or(n)?);
        }
        Ok(Some(Self::from_parts(head, branches)))
    }

    /// The set `{n : pred(x(n) ⋚ c_0, x(n) ⋚ c_1, …)}` with an exact
    /// classification: every comparison against a constant stabilizes.
    pub fn sign_set(
        self: &Arc<Self>,
        label: String,
        consts: Vec<Q>,
        pred: impl Fn(&[Ordering]) -> bool + Send + Sync + 'static,
    ) -> SetDescriptor {
        let mut bound = self.head.len() as u64;
        let pattern: Vec<bool> = self
            .branches
            .iter()
            .map(|b| {
                let signs: Vec<Ordering> = consts
                    .iter()
                    .map(|c| {
                        let (s, from) = b.eventual_cmp(&RatFn::constant(c.clone()));
                        bound = bound.max(from);
                        s
                    })
                    .collect();
                pred(&signs)
            })
            .collect();
        let me = self.clone();
        let pred = Arc::new(pred);
        let pred2 = pred.clone();
        let eval: EvalFn = Arc::new(move |n| {
            let v = me.eval(n);
            let signs: Vec<Ordering> = consts.iter().map(|c| v.cmp(c)).collect();
            pred2(&signs)
        });
        let classification = if pattern.len() == 1 {
            if pattern[0] {
                Classification::Cofinite(bound)
            } else {
                Classification::Finite(bound)
            }
        } else if pattern.iter().all(|&b| b) {
            Classification::Cofinite(bound)
        } else if pattern.iter().all(|&b| !b) {
            Classification::Finite(bound)
        } else {
            periodic_from(bound, pattern, &eval)
        };
        let e = eval.clone();
        SetDescriptor::new(label, classification, move |n| e(n))
    }
}

enum Body {
    Exact(Arc<ExactSeq>),
    Opaque(OpaqueFn),
}

/// A representative of a hyperreal.
pub struct SequenceRep {
    label: String,
    body: Body,
}

impl fmt::Debug for SequenceRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SequenceRep")
            .field("label", &self.label)
            .field("form", &self.form())
            .finish()
    }
}

impl SequenceRep {
    pub fn exact(label: impl Into<String>, seq: ExactSeq) -> Self {
        SequenceRep {
            label: label.into(),
            body: Body::Exact(Arc::new(seq)),
        }
    }

    pub fn constant(c: Q) -> Self {
        Self::exact(c.to_string(), ExactSeq::constant(c))
    }

    /// A closed form; falls back to an opaque representative when the
    /// denominator's pole region is too long to store.
    pub fn closed_form(label: impl Into<String>, r: RatFn) -> Self {
        let label = label.into();
        match ExactSeq::closed_form(r.clone()) {
            Some(s) => Self::exact(label, s),
            None => Self::opaque(label, move |n| r.eval(&q_u64(n)).unwrap_or_else(Q::zero)),
        }
    }

    pub fn eventually_periodic(label: impl Into<String>, preperiod: Vec<Q>, period: Vec<Q>) -> Self {
        Self::exact(label, ExactSeq::eventually_periodic(preperiod, period))
    }

    pub fn opaque(label: impl Into<String>, f: impl Fn(u64) -> Q + Send + Sync + 'static) -> Self {
        SequenceRep {
            label: label.into(),
            body: Body::Opaque(Arc::new(f)),
        }
    }

    pub(crate) fn from_opaque_fn(label: String, f: OpaqueFn) -> Self {
        SequenceRep {
            label,
            body: Body::Opaque(f),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, n: u64) -> Q {
        match &self.body {
            Body::Exact(s) => s.eval(n),
            Body::Opaque(f) => f(n),
        }
    }

    pub fn form(&self) -> Form {
        match &self.body {
            Body::Exact(s) => s.form(),
            Body::Opaque(_) => Form::Opaque,
        }
    }

    pub fn as_exact(&self) -> Option<&Arc<ExactSeq>> {
        match &self.body {
            Body::Exact(s) => Some(s),
            Body::Opaque(_) => None,
        }
    }

    /// Evaluation handle usable from `'static` closures.
    pub fn eval_fn(&self) -> OpaqueFn {
        match &self.body {
            Body::Exact(s) => {
                let s = s.clone();
                Arc::new(move |n| s.eval(n))
            }
            Body::Opaque(f) => f.clone(),
        }
    }
}
