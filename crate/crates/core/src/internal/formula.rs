//! Bounded formulas over the ordered field, with quantifiers ranging over
//! hyperfinite sets.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use crate::hyperreal::{format_rational, RealFn, RealFnKind};
use crate::Q;

use super::HyperfiniteSet;

#[derive(Clone, Debug)]
pub enum Term {
    Const(Q),
    Var(String),
    Neg(Box<Term>),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Div(Box<Term>, Box<Term>),
    Pow(Box<Term>, u32),
    Apply(RealFn, Box<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Rel {
    /// Whether `lhs − rhs` having sign `o` satisfies the relation.
    pub fn holds(self, o: Ordering) -> bool {
        match self {
            Rel::Eq => o == Ordering::Equal,
            Rel::Ne => o != Ordering::Equal,
            Rel::Lt => o == Ordering::Less,
            Rel::Le => o != Ordering::Greater,
            Rel::Gt => o == Ordering::Greater,
            Rel::Ge => o != Ordering::Less,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Ne => "!=",
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }

    pub fn negate(self) -> Rel {
        match self {
            Rel::Eq => Rel::Ne,
            Rel::Ne => Rel::Eq,
            Rel::Lt => Rel::Ge,
            Rel::Le => Rel::Gt,
            Rel::Gt => Rel::Le,
            Rel::Ge => Rel::Lt,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Formula {
    Const(bool),
    Atom(Rel, Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(String, HyperfiniteSet, Box<Formula>),
    Exists(String, HyperfiniteSet, Box<Formula>),
}

impl Term {
    pub fn constant(q: Q) -> Self {
        Term::Const(q)
    }

    pub fn int(k: i64) -> Self {
        Term::Const(Q::from_integer(k.into()))
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, o: Term) -> Self {
        Term::Add(Box::new(self), Box::new(o))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, o: Term) -> Self {
        Term::Sub(Box::new(self), Box::new(o))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, o: Term) -> Self {
        Term::Mul(Box::new(self), Box::new(o))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(self, o: Term) -> Self {
        Term::Div(Box::new(self), Box::new(o))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Self {
        Term::Neg(Box::new(self))
    }

    pub fn pow(self, k: u32) -> Self {
        Term::Pow(Box::new(self), k)
    }

    pub fn apply(f: RealFn, t: Term) -> Self {
        Term::Apply(f, Box::new(t))
    }

    fn collect_vars(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Term::Const(_) => {}
            Term::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Term::Neg(a) | Term::Pow(a, _) | Term::Apply(_, a) => a.collect_vars(bound, out),
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) => {
                a.collect_vars(bound, out);
                b.collect_vars(bound, out);
            }
        }
    }

    pub(crate) fn mentions(&self, v: &str) -> bool {
        match self {
            Term::Const(_) => false,
            Term::Var(w) => w == v,
            Term::Neg(a) | Term::Pow(a, _) | Term::Apply(_, a) => a.mentions(v),
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) => a.mentions(v) || b.mentions(v),
        }
    }

    /// Whether the term is defined at every assignment.
    fn is_total(&self) -> bool {
        match self {
            Term::Const(_) | Term::Var(_) => true,
            Term::Div(..) => false,
            Term::Apply(f, a) => {
                let total_fn = match f.kind() {
                    RealFnKind::Piecewise { pieces, .. } => pieces.iter().all(|p| p.as_poly().is_some()),
                    RealFnKind::Custom(_) => false,
                };
                total_fn && a.is_total()
            }
            Term::Neg(a) | Term::Pow(a, _) => a.is_total(),
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => a.is_total() && b.is_total(),
        }
    }
}

impl Formula {
    pub fn atom(rel: Rel, l: Term, r: Term) -> Self {
        Formula::Atom(rel, l, r)
    }

    pub fn and(self, o: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(o))
    }

    pub fn or(self, o: Formula) -> Self {
        Formula::Or(Box::new(self), Box::new(o))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn implies(self, o: Formula) -> Self {
        Formula::Implies(Box::new(self), Box::new(o))
    }

    pub fn forall(v: impl Into<String>, set: HyperfiniteSet, body: Formula) -> Self {
        Formula::Forall(v.into(), set, Box::new(body))
    }

    pub fn exists(v: impl Into<String>, set: HyperfiniteSet, body: Formula) -> Self {
        Formula::Exists(v.into(), set, Box::new(body))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut Vec::new(), &mut out);
        out
    }

    fn collect_vars(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Formula::Const(_) => {}
            Formula::Atom(_, a, b) => {
                a.collect_vars(bound, out);
                b.collect_vars(bound, out);
            }
            Formula::Not(a) => a.collect_vars(bound, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_vars(bound, out);
                b.collect_vars(bound, out);
            }
            Formula::Forall(v, _, body) | Formula::Exists(v, _, body) => {
                bound.push(v.clone());
                body.collect_vars(bound, out);
                bound.pop();
            }
        }
    }

    /// Whether `v` occurs free.
    pub fn mentions(&self, v: &str) -> bool {
        match self {
            Formula::Const(_) => false,
            Formula::Atom(_, a, b) => a.mentions(v) || b.mentions(v),
            Formula::Not(a) => a.mentions(v),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => a.mentions(v) || b.mentions(v),
            Formula::Forall(w, _, body) | Formula::Exists(w, _, body) => w != v && body.mentions(v),
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Const(_) | Formula::Atom(..) => true,
            Formula::Not(a) => a.is_quantifier_free(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.is_quantifier_free() && b.is_quantifier_free()
            }
            Formula::Forall(..) | Formula::Exists(..) => false,
        }
    }

    /// No division and no partial function applications anywhere.
    pub fn is_total(&self) -> bool {
        match self {
            Formula::Const(_) => true,
            Formula::Atom(_, a, b) => a.is_total() && b.is_total(),
            Formula::Not(a) => a.is_total(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => a.is_total() && b.is_total(),
            Formula::Forall(_, _, body) | Formula::Exists(_, _, body) => body.is_total(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(q) => f.write_str(&format_rational(q)),
            Term::Var(v) => f.write_str(v),
            Term::Neg(a) => write!(f, "(- {a})"),
            Term::Add(a, b) => write!(f, "(+ {a} {b})"),
            Term::Sub(a, b) => write!(f, "(- {a} {b})"),
            Term::Mul(a, b) => write!(f, "(* {a} {b})"),
            Term::Div(a, b) => write!(f, "(/ {a} {b})"),
            Term::Pow(a, k) => write!(f, "(^ {a} {k})"),
            Term::Apply(g, a) => write!(f, "({} {a})", g.label()),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Const(b) => write!(f, "({b})"),
            Formula::Atom(r, a, b) => write!(f, "({} {a} {b})", r.symbol()),
            Formula::Not(a) => write!(f, "(not {a})"),
            Formula::And(a, b) => write!(f, "(and {a} {b})"),
            Formula::Or(a, b) => write!(f, "(or {a} {b})"),
            Formula::Implies(a, b) => write!(f, "(implies {a} {b})"),
            Formula::Forall(v, s, body) => write!(f, "(forall {v} {} {body})", s.label()),
            Formula::Exists(v, s, body) => write!(f, "(exists {v} {} {body})", s.label()),
        }
    }
}
