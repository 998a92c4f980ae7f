//! Truth of a bounded sentence in the extension: the set of levels where it
//! holds is handed to the oracle.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use crate::hyperreal::{Hyperreal, HyperrealError};
use crate::oracle::{periodic_from, Classification, Oracle, SetDescriptor};

use super::formula::Formula;
use super::level::{self, Env, LevelError};
use super::{eventual, InternalError, LevelSet, Result, SetKind};

pub type Assignment = BTreeMap<String, Hyperreal>;

/// Levels scanned for domain violations before a formula with partial
/// operations is submitted.
const DOMAIN_SCAN: u64 = 4096;

/// Refuse level scans estimated to need more body evaluations than this.
const SCAN_BUDGET: f64 = 1e8;

/// Whether `p`, with its free variables bound by `assignment`, holds on a
/// qualified set of levels.
pub fn transfer_eval(ctx: &Oracle, p: &Formula, assignment: &Assignment) -> Result<bool> {
    let (set, errors) = level_set(ctx, p, assignment)?;
    let answer = ctx.is_qualified(&set).map_err(HyperrealError::from)?;
    if let Some(e) = errors.lock().expect("error cell").take() {
        return Err(violation(p, e));
    }
    Ok(answer)
}

fn violation(p: &Formula, e: LevelError) -> InternalError {
    InternalError::Hyperreal(HyperrealError::DomainViolation {
        function: e.function,
        value: p.to_string(),
        level: e.level,
    })
}

type ErrorCell = Arc<Mutex<Option<LevelError>>>;

/// `{n : p holds at level n}` with an exact classification when the
/// eventual engine decides `p`.
pub(crate) fn level_set(ctx: &Oracle, p: &Formula, assignment: &Assignment) -> Result<(SetDescriptor, ErrorCell)> {
    let free = p.free_vars();
    let mut vars = Vec::with_capacity(free.len());
    for v in &free {
        let x = assignment.get(v).ok_or_else(|| InternalError::Unbound(v.clone()))?;
        if !x.ctx().same_as(ctx) {
            return Err(HyperrealError::ContextMismatch.into());
        }
        vars.push((v.clone(), x.clone()));
    }

    let fns: Vec<(String, _)> = vars.iter().map(|(v, x)| (v.clone(), x.rep().eval_fn())).collect();
    let formula = Arc::new(p.clone());
    let eval_at = {
        let formula = formula.clone();
        move |n: u64| -> std::result::Result<bool, LevelError> {
            let mut env: Env = fns.iter().map(|(v, f)| (v.clone(), f(n))).collect();
            level::formula(&formula, n, &mut env)
        }
    };

    // Levels below the scan are answered from the table.
    let mut table = Vec::new();
    if !p.is_total() {
        for n in 0..ctx.horizon().min(DOMAIN_SCAN) {
            table.push(eval_at(n).map_err(|e| violation(p, e))?);
        }
    }

    let exact: Option<Vec<_>> = vars
        .iter()
        .map(|(v, x)| x.rep().as_exact().map(|s| (v.clone(), &**s)))
        .collect();
    let eventual = exact.and_then(|a| eventual::decide(p, &a));
    if eventual.is_none() {
        let work = nested_work(p, ctx.horizon(), &[]) * ctx.horizon() as f64;
        if work > SCAN_BUDGET {
            return Err(InternalError::Intractable {
                formula: p.to_string(),
                work: work as u64,
            });
        }
    }

    let errors: ErrorCell = Arc::new(Mutex::new(None));
    let cell = errors.clone();
    let eval = move |n: u64| match table.get(n as usize) {
        Some(&b) => b,
        None => match eval_at(n) {
            Ok(b) => b,
            Err(e) => {
                cell.lock().expect("error cell").get_or_insert(e);
                false
            }
        },
    };
    let eval: Arc<dyn Fn(u64) -> bool + Send + Sync> = Arc::new(eval);

    let classification = match eventual {
        None => Classification::Unknown,
        Some(e) if e.pattern.iter().all(|&b| b) => Classification::Cofinite(e.bound),
        Some(e) if e.pattern.iter().all(|&b| !b) => Classification::Finite(e.bound),
        Some(e) => periodic_from(e.bound, e.pattern, &eval),
    };

    let bindings: Vec<String> = vars.iter().map(|(v, x)| format!("{v}={}", x.label())).collect();
    let label = if bindings.is_empty() {
        format!("{{n : {p}}}")
    } else {
        format!("{{n : {p} | {}}}", bindings.join(", "))
    };
    let e = eval.clone();
    Ok((SetDescriptor::new(label, classification, move |n| e(n)), errors))
}

/// Largest product of set sizes at level `n` along a chain of hyperfinite
/// quantifiers in which an inner body mentions an outer variable; 0 if
/// there is no such chain. Single quantifiers have fast per-level paths
/// and are not counted.
fn nested_work(p: &Formula, n: u64, outer: &[(&str, f64)]) -> f64 {
    match p {
        Formula::Const(_) | Formula::Atom(..) => 0.0,
        Formula::Not(a) => nested_work(a, n, outer),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            nested_work(a, n, outer).max(nested_work(b, n, outer))
        }
        Formula::Forall(v, set, body) | Formula::Exists(v, set, body) => {
            if matches!(set.kind(), SetKind::Constant(_)) {
                return nested_work(body, n, outer);
            }
            let size = match set.level(n) {
                LevelSet::Progression { count, .. } => count as f64,
                LevelSet::Values(vs) => vs.len() as f64,
            };
            let own = if outer.iter().any(|(w, _)| body.mentions(w)) {
                outer.iter().map(|(_, s)| s).product::<f64>() * size
            } else {
                0.0
            };
            let mut chain = outer.to_vec();
            chain.push((v, size));
            own.max(nested_work(body, n, &chain))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::internal::{HyperfiniteSet, Rel, Term};
    use crate::poly::{q_int, Poly};

    fn ctx() -> Oracle {
        Oracle::with_horizon(20_000)
    }

    fn x() -> Term {
        Term::var("x")
    }

    #[test]
    fn examples() {
        let o = ctx();
        let a = HyperfiniteSet::upto_n();
        let none = Assignment::new();
        let nonneg = Formula::forall("x", a.clone(), Formula::atom(Rel::Ge, x(), Term::int(0)));
        assert!(transfer_eval(&o, &nonneg, &none).unwrap());
        let sqrt2 = Formula::exists("x", a.clone(), Formula::atom(Rel::Eq, x().mul(x()), Term::int(2)));
        assert!(!transfer_eval(&o, &sqrt2, &none).unwrap());
        let mut asg = Assignment::new();
        asg.insert("c".into(), Hyperreal::from_int(&o, 1_000_000));
        let big = Formula::exists("x", a, Formula::atom(Rel::Gt, x(), Term::var("c")));
        assert!(transfer_eval(&o, &big, &asg).unwrap());
        let log = o.decision_log();
        assert_eq!(log.last().unwrap().mode, crate::oracle::DecisionMode::Exact);
    }

    #[test]
    fn errors() {
        let o = ctx();
        let f = Formula::atom(Rel::Lt, Term::var("y"), Term::int(0));
        assert_eq!(
            transfer_eval(&o, &f, &Assignment::new()).unwrap_err(),
            InternalError::Unbound("y".into())
        );
        let mut asg = Assignment::new();
        asg.insert("y".into(), Hyperreal::omega(&ctx()));
        assert_eq!(
            transfer_eval(&o, &f, &asg).unwrap_err(),
            InternalError::Hyperreal(HyperrealError::ContextMismatch)
        );
        let mut asg = Assignment::new();
        asg.insert("w".into(), Hyperreal::omega(&o));
        let g = Formula::atom(Rel::Gt, Term::int(1).div(Term::var("w").sub(Term::int(5))), Term::int(0));
        assert!(matches!(
            transfer_eval(&o, &g, &asg),
            Err(InternalError::Hyperreal(HyperrealError::DomainViolation { level: 5, .. }))
        ));
    }

    #[test]
    fn homomorphism_on_parity() {
        let o = ctx();
        let mut asg = Assignment::new();
        asg.insert("w".into(), Hyperreal::omega(&o));
        let even = Formula::exists(
            "x",
            HyperfiniteSet::upto_n(),
            Formula::atom(Rel::Eq, x().mul(Term::int(2)), Term::var("w")),
        );
        let e = transfer_eval(&o, &even, &asg).unwrap();
        assert_eq!(transfer_eval(&o, &even.clone().not(), &asg).unwrap(), !e);
        let big = Formula::atom(Rel::Gt, Term::var("w"), Term::int(10));
        assert_eq!(transfer_eval(&o, &even.clone().and(big), &asg).unwrap(), e);
        let sq = HyperfiniteSet::integer_range("{0..n²}", Poly::zero(), Poly::from_ints(&[0, 0, 1])).unwrap();
        let has_w = Formula::exists("x", sq, Formula::atom(Rel::Eq, x(), Term::var("w").mul(Term::var("w"))));
        assert!(transfer_eval(&o, &has_w, &asg).unwrap());
    }

    #[test]
    fn standard_sentences_agree_with_direct_evaluation() {
        let o = ctx();
        let f = HyperfiniteSet::constant("F", vec![q_int(-2), q_int(0), q_int(3)]);
        let p = Formula::forall(
            "x",
            f.clone(),
            Formula::exists("y", f, Formula::atom(Rel::Gt, Term::var("y"), x())).or(Formula::atom(Rel::Eq, x(), Term::int(3))),
        );
        let direct = level::formula(&p, 0, &mut Env::new()).unwrap();
        assert!(direct);
        assert_eq!(transfer_eval(&o, &p, &Assignment::new()).unwrap(), direct);
    }

    #[test]
    fn inner_constant_quantifiers_stay_exact() {
        let o = ctx();
        let pair = HyperfiniteSet::constant("{0, 1}", vec![q_int(0), q_int(1)]);
        let body = Formula::exists("y", pair, Formula::atom(Rel::Ge, x().add(Term::var("y")), Term::int(1)));
        let p = Formula::forall("x", HyperfiniteSet::upto_n(), body);
        assert!(transfer_eval(&o, &p, &Assignment::new()).unwrap());
        assert_eq!(o.decision_log().last().unwrap().mode, crate::oracle::DecisionMode::Exact);
    }

    #[test]
    fn dependent_nesting_is_refused_past_the_budget() {
        let two_n = || HyperfiniteSet::integer_range("{0..2n}", Poly::zero(), Poly::from_ints(&[0, 2])).unwrap();
        // ∀x ∃y (3 + 2x − 2y < 0) fails at x = 2n on every level.
        let atom = Formula::atom(
            Rel::Lt,
            Term::int(3).add(Term::int(2).mul(x())).sub(Term::int(2).mul(Term::var("y"))),
            Term::int(0),
        );
        let p = Formula::forall("x", two_n(), Formula::exists("y", two_n(), atom));
        assert!(matches!(
            transfer_eval(&ctx(), &p, &Assignment::new()),
            Err(InternalError::Intractable { .. })
        ));
        let small = Oracle::with_horizon(120);
        assert!(!transfer_eval(&small, &p, &Assignment::new()).unwrap());
    }
}
