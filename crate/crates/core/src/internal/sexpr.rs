//! Reader for formula files.
//!
//! A file is a JSON preamble naming hyperfinite sets and hyperreal values,
//! a line holding `---`, then one sentence per line in s-expression form:
//!
//! ```text
//! {"sets": {"A": {"range": ["0", "n"]}}, "values": {"w": "omega"}}
//! ---
//! (forall x A (>= x 0))
//! (exists x A (= (* 2 x) w))
//! ```
//!
//! Blank lines and lines starting with `;` are skipped.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Deserialize;

use crate::hyperreal::expr::{self, ExprError, Value};
use crate::hyperreal::{Hyperreal, RealFn};
use crate::oracle::Oracle;
use crate::ratfn::RatFn;
use crate::Q;

use super::formula::{Formula, Rel, Term};
use super::{HyperfiniteSet, InternalError, Result};

pub const GRAMMAR: &str = "\
file     := preamble \"---\" sentence*
preamble := {\"sets\": {name: set}, \"values\": {name: hyperreal expression}}
set      := {\"range\": [lo, hi]} | {\"progression\": {\"start\", \"step\", \"count\", \"from\"}} | {\"values\": [number]}
            (lo, hi, start, step, count: rational functions of n)
formula  := true | false | (rel term term) | (not f) | (and f+) | (or f+) | (implies f f)
          | (forall var set f) | (exists var set f)
rel      := = | != | < | <= | > | >=
term     := number | var | value | (+ t+) | (* t+) | (- t) | (- t t) | (/ t t) | (^ t k)
          | (abs t) | (sq t) | (min t number) | (max t number)";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }
}

pub fn read(src: &str) -> std::result::Result<Sexp, String> {
    let tokens = tokenize(src);
    let mut pos = 0;
    let e = read_at(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(format!("unexpected `{}` after expression", tokens[pos]));
    }
    Ok(e)
}

fn tokenize(src: &str) -> Vec<String> {
    src.replace('(', " ( ").replace(')', " ) ").split_whitespace().map(str::to_string).collect()
}

fn read_at(tokens: &[String], pos: &mut usize) -> std::result::Result<Sexp, String> {
    let t = tokens.get(*pos).ok_or("unexpected end of input")?;
    *pos += 1;
    match t.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    None => return Err("unclosed `(`".into()),
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(read_at(tokens, pos)?),
                }
            }
        }
        ")" => Err("unexpected `)`".into()),
        _ => Ok(Sexp::Atom(t.clone())),
    }
}

/// Integer, `p/q` or decimal literal.
pub fn parse_number(s: &str) -> Option<Q> {
    if let Some((p, q)) = s.split_once('/') {
        let (p, q) = (p.parse::<BigInt>().ok()?, q.parse::<BigInt>().ok()?);
        return (!q.is_zero()).then(|| Q::new(p, q));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !(int.chars().chain(frac.chars())).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("0{int}{frac}").parse().ok()?;
    let q = Q::new(digits, num_traits::pow(BigInt::from(10), frac.len()));
    Some(if neg { -q } else { q })
}

/// Names a sentence may refer to.
pub struct Scope<'a> {
    pub sets: &'a BTreeMap<String, HyperfiniteSet>,
    pub values: &'a BTreeSet<String>,
}

pub fn parse_formula(src: &str, scope: &Scope) -> std::result::Result<Formula, String> {
    formula(&read(src)?, scope, &mut Vec::new())
}

fn formula(e: &Sexp, scope: &Scope, bound: &mut Vec<String>) -> std::result::Result<Formula, String> {
    let items = match e {
        Sexp::Atom(a) if a == "true" => return Ok(Formula::Const(true)),
        Sexp::Atom(a) if a == "false" => return Ok(Formula::Const(false)),
        Sexp::Atom(a) => return Err(format!("expected a formula, found `{a}`")),
        Sexp::List(items) => items,
    };
    let head = items.first().and_then(Sexp::atom).ok_or("expected an operator")?;
    let args = &items[1..];
    let arity = |k: usize| {
        if args.len() == k {
            Ok(())
        } else {
            Err(format!("`{head}` takes {k} arguments, got {}", args.len()))
        }
    };
    let rel = match head {
        "=" => Some(Rel::Eq),
        "!=" => Some(Rel::Ne),
        "<" => Some(Rel::Lt),
        "<=" => Some(Rel::Le),
        ">" => Some(Rel::Gt),
        ">=" => Some(Rel::Ge),
        _ => None,
    };
    if let Some(r) = rel {
        arity(2)?;
        return Ok(Formula::atom(r, term(&args[0], scope, bound)?, term(&args[1], scope, bound)?));
    }
    match head {
        "true" | "false" => {
            arity(0)?;
            Ok(Formula::Const(head == "true"))
        }
        "not" => {
            arity(1)?;
            Ok(formula(&args[0], scope, bound)?.not())
        }
        "implies" | "=>" => {
            arity(2)?;
            Ok(formula(&args[0], scope, bound)?.implies(formula(&args[1], scope, bound)?))
        }
        "and" | "or" => {
            let mut fs = args.iter().map(|a| formula(a, scope, bound));
            let first = fs.next().ok_or_else(|| format!("`{head}` needs an argument"))??;
            fs.try_fold(first, |acc, f| Ok(if head == "and" { acc.and(f?) } else { acc.or(f?) }))
        }
        "forall" | "exists" => {
            arity(3)?;
            let v = args[0].atom().ok_or("quantified variable must be a name")?;
            if parse_number(v).is_some() || scope.values.contains(v) {
                return Err(format!("cannot bind `{v}`"));
            }
            let set_name = args[1].atom().ok_or("quantifier bound must be a set name")?;
            let set = scope.sets.get(set_name).ok_or_else(|| format!("unknown set `{set_name}`"))?.clone();
            bound.push(v.to_string());
            let body = formula(&args[2], scope, bound);
            bound.pop();
            Ok(if head == "forall" {
                Formula::forall(v, set, body?)
            } else {
                Formula::exists(v, set, body?)
            })
        }
        _ => Err(format!("unknown connective `{head}`")),
    }
}

fn term(e: &Sexp, scope: &Scope, bound: &[String]) -> std::result::Result<Term, String> {
    let items = match e {
        Sexp::Atom(a) => {
            if let Some(q) = parse_number(a) {
                return Ok(Term::constant(q));
            }
            if bound.iter().any(|b| b == a) || scope.values.contains(a) {
                return Ok(Term::var(a.as_str()));
            }
            return Err(format!("unknown name `{a}`"));
        }
        Sexp::List(items) => items,
    };
    let head = items.first().and_then(Sexp::atom).ok_or("expected an operator")?;
    let args: Vec<Term> = items[1..].iter().map(|a| term(a, scope, bound)).collect::<std::result::Result<_, _>>()?;
    let want = |k: usize| {
        if args.len() == k {
            Ok(())
        } else {
            Err(format!("`{head}` takes {k} arguments, got {}", args.len()))
        }
    };
    let constant = |t: &Term| match t {
        Term::Const(q) => Ok(q.clone()),
        _ => Err(format!("second argument of `{head}` must be a number")),
    };
    let mut it = args.clone().into_iter();
    Ok(match head {
        "+" | "*" => {
            let first = it.next().ok_or_else(|| format!("`{head}` needs an argument"))?;
            it.fold(first, |a, b| if head == "+" { a.add(b) } else { a.mul(b) })
        }
        "-" => match args.len() {
            1 => it.next().unwrap().neg(),
            2 => args[0].clone().sub(args[1].clone()),
            k => return Err(format!("`-` takes 1 or 2 arguments, got {k}")),
        },
        "/" => {
            want(2)?;
            args[0].clone().div(args[1].clone())
        }
        "^" => {
            want(2)?;
            let k = constant(&args[1])?;
            if !k.is_integer() || k < Q::zero() || k > Q::from_integer(64.into()) {
                return Err("exponent must be an integer in 0..=64".into());
            }
            args[0].clone().pow(k.to_integer().try_into().expect("small"))
        }
        "abs" => {
            want(1)?;
            Term::apply(RealFn::abs(), args[0].clone())
        }
        "sq" => {
            want(1)?;
            Term::apply(RealFn::square(), args[0].clone())
        }
        "min" | "max" => {
            want(2)?;
            let c = constant(&args[1])?;
            let f = if head == "min" { RealFn::min_with(c) } else { RealFn::max_with(c) };
            Term::apply(f, args[0].clone())
        }
        _ => return Err(format!("unknown function `{head}`")),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Preamble {
    #[serde(default)]
    sets: BTreeMap<String, SetSpec>,
    #[serde(default)]
    values: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum SetSpec {
    /// Integers `lo(n) ..= hi(n)`.
    Range([String; 2]),
    Progression {
        start: String,
        step: String,
        count: String,
        #[serde(default)]
        from: u64,
    },
    /// The same finite set at every level.
    Values(Vec<String>),
}

/// A parsed formula file.
#[derive(Debug)]
pub struct FormulaFile {
    pub sets: BTreeMap<String, HyperfiniteSet>,
    pub values: BTreeMap<String, Hyperreal>,
    /// `(line, source, formula)` for each sentence.
    pub sentences: Vec<(usize, String, Formula)>,
}

fn n_expr(src: &str, line: usize) -> Result<RatFn> {
    let syntax = |message: String| InternalError::Syntax { line, message };
    let e = expr::parse(src).map_err(|e| syntax(format!("`{src}`: {e}")))?;
    expr::to_ratfn(&e).ok_or_else(|| syntax(format!("`{src}` is not a rational function of n")))
}

fn set_from_spec(name: &str, spec: SetSpec, line: usize) -> Result<HyperfiniteSet> {
    let syntax = |message: String| InternalError::Syntax { line, message };
    match spec {
        SetSpec::Range([lo, hi]) => {
            let poly = |s: &str| -> Result<_> {
                n_expr(s, line)?
                    .as_poly()
                    .cloned()
                    .ok_or_else(|| syntax(format!("range endpoint `{s}` must be a polynomial in n")))
            };
            HyperfiniteSet::integer_range(name, poly(&lo)?, poly(&hi)?)
        }
        SetSpec::Progression {
            start,
            step,
            count,
            from,
        } => HyperfiniteSet::progression(name, n_expr(&start, line)?, n_expr(&step, line)?, n_expr(&count, line)?, from),
        SetSpec::Values(vs) => {
            let qs = vs
                .iter()
                .map(|v| parse_number(v).ok_or_else(|| syntax(format!("`{v}` is not a number"))))
                .collect::<Result<_>>()?;
            Ok(HyperfiniteSet::constant(name, qs))
        }
    }
}

pub fn parse_file(ctx: &Oracle, text: &str) -> Result<FormulaFile> {
    let lines: Vec<&str> = text.lines().collect();
    let sep = lines.iter().position(|l| l.trim() == "---").ok_or(InternalError::Syntax {
        line: lines.len().max(1),
        message: "missing `---` after the preamble".into(),
    })?;
    let preamble_src = lines[..sep].join("\n");
    let preamble: Preamble = if preamble_src.trim().is_empty() {
        Preamble {
            sets: BTreeMap::new(),
            values: BTreeMap::new(),
        }
    } else {
        serde_json::from_str(&preamble_src).map_err(|e| InternalError::Syntax {
            line: e.line(),
            message: e.to_string(),
        })?
    };

    let mut sets = BTreeMap::new();
    for (name, spec) in preamble.sets {
        let s = set_from_spec(&name, spec, 1)?;
        sets.insert(name, s);
    }
    let mut values = BTreeMap::new();
    for (name, src) in preamble.values {
        if sets.contains_key(&name) {
            return Err(InternalError::Syntax {
                line: 1,
                message: format!("`{name}` names both a set and a value"),
            });
        }
        let v = match expr::eval_str(ctx, &src) {
            Ok(Value::Number(x)) => x,
            Ok(Value::Bool(_)) => {
                return Err(InternalError::Syntax {
                    line: 1,
                    message: format!("value `{name}` is a truth value, not a number"),
                })
            }
            Err(ExprError::Eval(e)) => return Err(e.into()),
            Err(e) => {
                return Err(InternalError::Syntax {
                    line: 1,
                    message: format!("value `{name}`: {e}"),
                })
            }
        };
        values.insert(name, v);
    }

    let names: BTreeSet<String> = values.keys().cloned().collect();
    let scope = Scope {
        sets: &sets,
        values: &names,
    };
    let mut sentences = Vec::new();
    for (i, l) in lines.iter().enumerate().skip(sep + 1) {
        let l = l.trim();
        if l.is_empty() || l.starts_with(';') {
            continue;
        }
        let f = parse_formula(l, &scope).map_err(|message| InternalError::Syntax { line: i + 1, message })?;
        sentences.push((i + 1, l.to_string(), f));
    }
    Ok(FormulaFile {
        sets,
        values,
        sentences,
    })
}
