//! Truth of a formula at a single level `n`.
//!
//! A quantifier over a progression whose body is quantifier-free and
//! polynomial in the bound variable is decided without enumerating the
//! progression: the body's truth can only change at real roots of the atom
//! polynomials, so it suffices to test the integers next to the roots
//! (located with Sturm sequences) together with both ends.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use num_traits::{One, ToPrimitive, Zero};

use crate::poly::{Poly, RootCounter};
use crate::Q;

use super::formula::{Formula, Term};
use super::LevelSet;

/// Highest atom degree the root-isolation path accepts.
const MAX_FAST_DEGREE: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct LevelError {
    pub function: String,
    pub level: u64,
}

pub(crate) type Env = Vec<(String, Q)>;

fn lookup<'a>(env: &'a Env, v: &str) -> &'a Q {
    &env
        .iter()
        .rev()
        .find(|(w, _)| w == v)
        .unwrap_or_else(|| panic!("unbound variable `{v}`"))
        .1
}

pub(crate) fn term(t: &Term, n: u64, env: &Env) -> Result<Q, LevelError> {
    Ok(match t {
        Term::Const(q) => q.clone(),
        Term::Var(v) => lookup(env, v).clone(),
        Term::Neg(a) => -term(a, n, env)?,
        Term::Add(a, b) => term(a, n, env)? + term(b, n, env)?,
        Term::Sub(a, b) => term(a, n, env)? - term(b, n, env)?,
        Term::Mul(a, b) => term(a, n, env)? * term(b, n, env)?,
        Term::Div(a, b) => {
            let d = term(b, n, env)?;
            if d.is_zero() {
                return Err(LevelError {
                    function: "/".into(),
                    level: n,
                });
            }
            term(a, n, env)? / d
        }
        Term::Pow(a, k) => num_traits::pow(term(a, n, env)?, *k as usize),
        Term::Apply(f, a) => f.eval(&term(a, n, env)?).ok_or_else(|| LevelError {
            function: f.label().to_string(),
            level: n,
        })?,
    })
}

pub(crate) fn formula(f: &Formula, n: u64, env: &mut Env) -> Result<bool, LevelError> {
    Ok(match f {
        Formula::Const(b) => *b,
        Formula::Atom(rel, a, b) => rel.holds(term(a, n, env)?.cmp(&term(b, n, env)?)),
        Formula::Not(a) => !formula(a, n, env)?,
        Formula::And(a, b) => formula(a, n, env)? && formula(b, n, env)?,
        Formula::Or(a, b) => formula(a, n, env)? || formula(b, n, env)?,
        Formula::Implies(a, b) => !formula(a, n, env)? || formula(b, n, env)?,
        Formula::Forall(v, set, body) => quantifier(true, v, set.level(n), body, n, env)?,
        Formula::Exists(v, set, body) => quantifier(false, v, set.level(n), body, n, env)?,
    })
}

/// `∀` when `universal`, else `∃`.
fn quantifier(universal: bool, v: &str, set: LevelSet, body: &Formula, n: u64, env: &mut Env) -> Result<bool, LevelError> {
    let test = |x: Q, env: &mut Env| -> Result<Option<bool>, LevelError> {
        env.push((v.to_string(), x));
        let r = formula(body, n, env);
        env.pop();
        let r = r?;
        // Short-circuit value, if reached.
        Ok((r != universal).then_some(!universal))
    };
    match set {
        LevelSet::Values(vs) => {
            for x in vs {
                if let Some(r) = test(x, env)? {
                    return Ok(r);
                }
            }
        }
        LevelSet::Progression { start, step, count } => {
            if count == 0 {
                return Ok(universal);
            }
            let ks: Box<dyn Iterator<Item = u64>> = match candidates(v, body, n, env, &start, &step, count) {
                Some(c) => Box::new(c.into_iter()),
                None => Box::new(0..count),
            };
            for k in ks {
                let x = &start + &step * Q::from_integer(k.into());
                if let Some(r) = test(x, env)? {
                    return Ok(r);
                }
            }
        }
    }
    Ok(universal)
}

/// The term as a polynomial in `v`, or `None` when it is not one (or some
/// subterm free of `v` is undefined here, which the enumeration reports).
fn term_poly(t: &Term, v: &str, n: u64, env: &Env) -> Option<Poly> {
    Some(match t {
        Term::Var(w) if w == v => Poly::var(),
        _ if !t.mentions(v) => Poly::constant(term(t, n, env).ok()?),
        Term::Neg(a) => term_poly(a, v, n, env)?.neg(),
        Term::Add(a, b) => term_poly(a, v, n, env)?.add(&term_poly(b, v, n, env)?),
        Term::Sub(a, b) => term_poly(a, v, n, env)?.sub(&term_poly(b, v, n, env)?),
        Term::Mul(a, b) => {
            let p = term_poly(a, v, n, env)?.mul(&term_poly(b, v, n, env)?);
            if p.degree().unwrap_or(0) > MAX_FAST_DEGREE {
                return None;
            }
            p
        }
        Term::Div(a, b) if !b.mentions(v) => {
            let d = term(b, n, env).ok()?;
            if d.is_zero() {
                return None;
            }
            term_poly(a, v, n, env)?.scale(&(Q::one() / d))
        }
        Term::Pow(a, k) if (*k as usize) <= MAX_FAST_DEGREE => {
            let p = term_poly(a, v, n, env)?.pow(*k);
            if p.degree().unwrap_or(0) > MAX_FAST_DEGREE {
                return None;
            }
            p
        }
        _ => return None,
    })
}

fn atoms<'a>(f: &'a Formula, out: &mut Vec<(&'a Term, &'a Term)>) {
    match f {
        Formula::Const(_) => {}
        Formula::Atom(_, a, b) => out.push((a, b)),
        Formula::Not(a) => atoms(a, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            atoms(a, out);
            atoms(b, out);
        }
        Formula::Forall(..) | Formula::Exists(..) => unreachable!("quantifier-free body"),
    }
}

/// Indices `k < count` that represent every truth value the body takes on
/// the progression.
fn candidates(v: &str, body: &Formula, n: u64, env: &Env, start: &Q, step: &Q, count: u64) -> Option<BTreeSet<u64>> {
    if !body.is_quantifier_free() {
        return None;
    }
    let mut pairs = Vec::new();
    atoms(body, &mut pairs);
    let x_of_k = Poly::new(vec![start.clone(), step.clone()]);
    let mut out = BTreeSet::from([0, count - 1]);
    for (a, b) in pairs {
        let p = term_poly(a, v, n, env)?.sub(&term_poly(b, v, n, env)?);
        if p.degree().unwrap_or(0) == 0 {
            continue;
        }
        let q = p.compose(&x_of_k);
        for a in root_cells(&q, count) {
            // A root in (a, a+1]: the next two integers cover both the root
            // itself and the region after it.
            for k in [a + 1, a + 2] {
                if (0..count as i64).contains(&k) {
                    out.insert(k as u64);
                }
            }
        }
    }
    Some(out)
}

/// Polynomials whose root cells are remembered per thread.
const CELL_CACHE_SIZE: usize = 1024;

thread_local! {
    static CELLS: RefCell<HashMap<Poly, Rc<Vec<i64>>>> = RefCell::new(HashMap::new());
}

/// Cells `(a, a+1]` with `-1 ≤ a < count` that contain a root of `q`.
/// All cells above `-1` are isolated once per polynomial, so the many levels
/// of one query share the work.
fn root_cells(q: &Poly, count: u64) -> Vec<i64> {
    let all = CELLS.with(|c| c.borrow().get(q).cloned()).or_else(|| {
        let bound = q.cauchy_bound()?.ceil().to_integer().to_i64().filter(|&b| b < 1 << 53)?;
        let rc = RootCounter::new(q);
        let mut cells = Vec::new();
        if rc.total_roots() > 0 {
            isolate(&rc, -1, bound.max(0), &mut cells);
        }
        let cells = Rc::new(cells);
        CELLS.with(|c| {
            let mut c = c.borrow_mut();
            if c.len() >= CELL_CACHE_SIZE {
                c.clear();
            }
            c.insert(q.clone(), cells.clone());
        });
        Some(cells)
    });
    match all {
        Some(cells) => cells.iter().copied().take_while(|&a| a < count as i64).collect(),
        None => {
            let rc = RootCounter::new(q);
            let mut cells = Vec::new();
            if rc.total_roots() > 0 {
                isolate(&rc, -1, count as i64, &mut cells);
            }
            cells
        }
    }
}

/// Integer cells `(a, a+1]` inside `(lo, hi]` that contain a root.
fn isolate(rc: &RootCounter, lo: i64, hi: i64, out: &mut Vec<i64>) {
    let at = |t: i64| rc.roots_at_most(&Q::from_integer(t.into()));
    fn go(at: &dyn Fn(i64) -> usize, lo: i64, hi: i64, clo: usize, chi: usize, out: &mut Vec<i64>) {
        if chi == clo {
            return;
        }
        if hi - lo == 1 {
            out.push(lo);
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let cm = at(mid);
        go(at, lo, mid, clo, cm, out);
        go(at, mid, hi, cm, chi, out);
    }
    let (clo, chi) = (at(lo), at(hi));
    go(&at, lo, hi, clo, chi, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::internal::{HyperfiniteSet, Rel};
    use crate::poly::q_int;

    fn brute(universal: bool, set: &HyperfiniteSet, v: &str, body: &Formula, n: u64) -> bool {
        let mut env = Env::new();
        let xs = set.at_level(n);
        let mut it = xs.into_iter().map(|x| {
            env.push((v.to_string(), x));
            let r = formula(body, n, &mut env).unwrap();
            env.pop();
            r
        });
        if universal {
            it.all(|b| b)
        } else {
            it.any(|b| b)
        }
    }

    #[test]
    fn root_isolation_agrees_with_enumeration() {
        let a = HyperfiniteSet::upto_n();
        let x = || Term::var("x");
        let bodies = vec![
            // x^2 = 2 has no rational solution
            Formula::atom(Rel::Eq, x().mul(x()), Term::int(2)),
            Formula::atom(Rel::Eq, x().mul(x()), Term::int(49)),
            Formula::atom(Rel::Gt, x(), Term::int(1_000)),
            // (x - 3)(x - 7) < 0
            Formula::atom(Rel::Lt, x().sub(Term::int(3)).mul(x().sub(Term::int(7))), Term::int(0)),
            Formula::atom(Rel::Ge, x().pow(3).sub(x().mul(Term::int(10))), Term::int(5))
                .and(Formula::atom(Rel::Ne, x(), Term::int(4))),
            Formula::atom(Rel::Le, x().div(Term::int(3)), Term::constant(crate::poly::q_frac(7, 2))),
        ];
        for body in &bodies {
            for n in [0u64, 1, 2, 5, 8, 13, 50, 1_200] {
                for universal in [false, true] {
                    let set = a.level(n);
                    let got = quantifier(universal, "x", set, body, n, &mut Env::new()).unwrap();
                    assert_eq!(got, brute(universal, &a, "x", body, n), "{body} at {n} ({universal})");
                }
            }
        }
    }

    #[test]
    fn large_levels_do_not_enumerate() {
        let a = HyperfiniteSet::upto_n();
        let body = Formula::atom(Rel::Gt, Term::var("x"), Term::int(1_000_000));
        let n = 5_000_000_000u64;
        assert!(quantifier(false, "x", a.level(n), &body, n, &mut Env::new()).unwrap());
        assert!(!quantifier(false, "x", a.level(999_999), &body, 999_999, &mut Env::new()).unwrap());
    }

    #[test]
    fn domain_errors_surface() {
        let f = Formula::exists(
            "x",
            HyperfiniteSet::upto_n(),
            Formula::atom(Rel::Gt, Term::int(1).div(Term::var("x")), Term::int(0)),
        );
        let err = formula(&f, 3, &mut Env::new()).unwrap_err();
        assert_eq!(err.function, "/");
        assert!(formula(&Formula::atom(Rel::Eq, Term::int(1), Term::Const(q_int(1))), 0, &mut Env::new()).unwrap());
    }
}
