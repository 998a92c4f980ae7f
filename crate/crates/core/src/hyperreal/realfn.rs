//! The registered library of real functions that may be lifted to hyperreals:
//! piecewise rational functions with rational breakpoints (polynomials, `abs`,
//! `min`/`max` against a constant are special cases), plus opaque callbacks.

use std::fmt;
use std::sync::Arc;

use crate::poly::Poly;
use crate::ratfn::RatFn;
use crate::Q;

pub type CustomFn = Arc<dyn Fn(&Q) -> Option<Q> + Send + Sync>;

#[derive(Clone)]
pub enum RealFnKind {
    /// `pieces[i]` applies on `[breaks[i-1], breaks[i])`, with the outer
    /// pieces unbounded.
    Piecewise { breaks: Vec<Q>, pieces: Vec<RatFn> },
    Custom(CustomFn),
}

#[derive(Clone)]
pub struct RealFn {
    label: String,
    kind: RealFnKind,
}

impl fmt::Debug for RealFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealFn({})", self.label)
    }
}

impl RealFn {
    pub fn piecewise(label: impl Into<String>, breaks: Vec<Q>, pieces: Vec<RatFn>) -> Self {
        assert_eq!(pieces.len(), breaks.len() + 1, "need one more piece than breakpoints");
        assert!(breaks.windows(2).all(|w| w[0] < w[1]), "breakpoints must increase");
        RealFn {
            label: label.into(),
            kind: RealFnKind::Piecewise { breaks, pieces },
        }
    }

    pub fn rational(label: impl Into<String>, r: RatFn) -> Self {
        Self::piecewise(label, Vec::new(), vec![r])
    }

    /// Coefficients lowest degree first.
    pub fn polynomial(coeffs: Vec<Q>) -> Self {
        let p = Poly::new(coeffs);
        let label = format!("t ↦ {}", PolyT(&p));
        Self::rational(label, RatFn::poly(p))
    }

    pub fn identity() -> Self {
        Self::rational("id", RatFn::var())
    }

    pub fn square() -> Self {
        Self::rational("sq", RatFn::var().pow(2))
    }

    pub fn constant(c: Q) -> Self {
        Self::rational(format!("const {c}"), RatFn::constant(c))
    }

    pub fn abs() -> Self {
        Self::piecewise("abs", vec![Q::from_integer(0.into())], vec![RatFn::var().neg(), RatFn::var()])
    }

    /// `t ↦ min(t, c)`.
    pub fn min_with(c: Q) -> Self {
        Self::piecewise(
            format!("min(·, {c})"),
            vec![c.clone()],
            vec![RatFn::var(), RatFn::constant(c)],
        )
    }

    /// `t ↦ max(t, c)`.
    pub fn max_with(c: Q) -> Self {
        Self::piecewise(
            format!("max(·, {c})"),
            vec![c.clone()],
            vec![RatFn::constant(c), RatFn::var()],
        )
    }

    /// An unregistered callback; lifts to opaque representatives only.
    pub fn custom(label: impl Into<String>, f: impl Fn(&Q) -> Option<Q> + Send + Sync + 'static) -> Self {
        RealFn {
            label: label.into(),
            kind: RealFnKind::Custom(Arc::new(f)),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &RealFnKind {
        &self.kind
    }

    pub fn is_registered(&self) -> bool {
        matches!(self.kind, RealFnKind::Piecewise { .. })
    }

    /// `None` where the function is undefined.
    pub fn eval(&self, t: &Q) -> Option<Q> {
        match &self.kind {
            RealFnKind::Piecewise { breaks, pieces } => {
                let i = breaks.partition_point(|b| b <= t);
                pieces[i].eval(t)
            }
            RealFnKind::Custom(f) => f(t),
        }
    }
}

struct PolyT<'a>(&'a Poly);

impl fmt::Display for PolyT<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt_in(f, "t")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{q_frac, q_int};

    #[test]
    fn piecewise_evaluation() {
        let a = RealFn::abs();
        assert_eq!(a.eval(&q_int(-3)), Some(q_int(3)));
        assert_eq!(a.eval(&q_int(0)), Some(q_int(0)));
        let m = RealFn::min_with(q_frac(1, 2));
        assert_eq!(m.eval(&q_int(2)), Some(q_frac(1, 2)));
        assert_eq!(m.eval(&q_frac(1, 3)), Some(q_frac(1, 3)));
        let r = RealFn::rational("inv", RatFn::var().recip().unwrap());
        assert_eq!(r.eval(&q_int(0)), None);
    }
}
