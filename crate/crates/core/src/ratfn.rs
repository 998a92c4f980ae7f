//! Rational functions of the index variable `n`, ordered by their behavior as
//! `n → ∞`.

use std::cmp::Ordering;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::poly::Poly;
use crate::Q;

/// Reduced `num / den` with monic denominator.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RatFn {
    num: Poly,
    den: Poly,
}

/// Limit as `n → ∞`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Limit {
    Finite(Q),
    PosInf,
    NegInf,
}

impl RatFn {
    pub fn new(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "rational function with zero denominator");
        if num.is_zero() {
            return Self::zero();
        }
        let g = num.gcd(&den);
        let (mut n, _) = num.div_rem(&g);
        let (mut d, _) = den.div_rem(&g);
        let l = d.lead();
        if !l.is_one() {
            let inv = Q::one() / l;
            n = n.scale(&inv);
            d = d.scale(&inv);
        }
        RatFn { num: n, den: d }
    }

    pub fn zero() -> Self {
        RatFn {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn constant(c: Q) -> Self {
        RatFn {
            num: Poly::constant(c),
            den: Poly::one(),
        }
    }

    /// The identity `n ↦ n`.
    pub fn var() -> Self {
        RatFn {
            num: Poly::var(),
            den: Poly::one(),
        }
    }

    pub fn poly(p: Poly) -> Self {
        RatFn {
            num: p,
            den: Poly::one(),
        }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn as_constant(&self) -> Option<Q> {
        if self.den.degree() == Some(0) {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn as_poly(&self) -> Option<&Poly> {
        (self.den.degree() == Some(0)).then_some(&self.num)
    }

    pub fn eval(&self, t: &Q) -> Option<Q> {
        let d = self.den.eval(t);
        if d.is_zero() {
            None
        } else {
            Some(self.num.eval(t) / d)
        }
    }

    pub fn add(&self, o: &RatFn) -> Self {
        if self.den == o.den {
            return Self::new(self.num.add(&o.num), self.den.clone());
        }
        Self::new(
            self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            self.den.mul(&o.den),
        )
    }

    pub fn sub(&self, o: &RatFn) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        RatFn {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, o: &RatFn) -> Self {
        Self::new(self.num.mul(&o.num), self.den.mul(&o.den))
    }

    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Self::new(self.den.clone(), self.num.clone()))
        }
    }

    pub fn div(&self, o: &RatFn) -> Option<Self> {
        o.recip().map(|r| self.mul(&r))
    }

    pub fn pow(&self, k: u32) -> Self {
        RatFn {
            num: self.num.pow(k),
            den: self.den.pow(k),
        }
    }

    /// `self(inner(n))`, or `None` when the composed denominator vanishes
    /// identically.
    pub fn compose(&self, inner: &RatFn) -> Option<RatFn> {
        // Horner in the field of rational functions.
        let horner = |p: &Poly| {
            let mut acc = RatFn::zero();
            for c in p.coeffs().iter().rev() {
                acc = acc.mul(inner).add(&RatFn::constant(c.clone()));
            }
            acc
        };
        horner(&self.num).div(&horner(&self.den))
    }

    /// Sign for all sufficiently large `n`.
    pub fn eventual_sign(&self) -> Ordering {
        self.num.eventual_sign()
    }

    /// Smallest `b` such that neither numerator nor denominator vanishes on
    /// `[b, ∞)`; the sign is constant there.
    pub fn stable_from(&self) -> u64 {
        if self.is_zero() {
            return self.den.root_free_from();
        }
        self.num.root_free_from().max(self.den.root_free_from())
    }

    /// Sign of `self − other` eventually, with the index from which it holds.
    pub fn eventual_cmp(&self, other: &RatFn) -> (Ordering, u64) {
        let d = self.sub(other);
        let from = d
            .stable_from()
            .max(self.den.root_free_from())
            .max(other.den.root_free_from());
        (d.eventual_sign(), from)
    }

    pub fn limit(&self) -> Limit {
        let dn = self.num.degree();
        let dd = self.den.degree().unwrap_or(0);
        match dn {
            None => Limit::Finite(Q::zero()),
            Some(k) if k < dd => Limit::Finite(Q::zero()),
            Some(k) if k == dd => Limit::Finite(self.num.lead() / self.den.lead()),
            Some(_) => {
                if self.num.lead().is_positive() {
                    Limit::PosInf
                } else {
                    Limit::NegInf
                }
            }
        }
    }

    /// Splits into polynomial part and proper remainder.
    pub fn split(&self) -> (Poly, RatFn) {
        let (q, r) = self.num.div_rem(&self.den);
        (q, RatFn::new(r, self.den.clone()))
    }
}

impl fmt::Debug for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.degree() == Some(0) {
            self.num.fmt_in(f, "n")
        } else {
            write!(f, "(")?;
            self.num.fmt_in(f, "n")?;
            write!(f, ")/(")?;
            self.den.fmt_in(f, "n")?;
            write!(f, ")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{q_frac, q_int};

    fn n() -> RatFn {
        RatFn::var()
    }

    #[test]
    fn reduces_common_factors() {
        // (n^2 - 1)/(n - 1) = n + 1
        let r = RatFn::new(Poly::from_ints(&[-1, 0, 1]), Poly::from_ints(&[-1, 1]));
        assert_eq!(r, RatFn::poly(Poly::from_ints(&[1, 1])));
    }

    #[test]
    fn limits_and_signs() {
        let one = RatFn::constant(q_int(1));
        let x = one.add(&n()).recip().unwrap().add(&one); // 1 + 1/(n+1)
        assert_eq!(x.limit(), Limit::Finite(q_int(1)));
        assert_eq!(x.eventual_cmp(&one).0, Ordering::Greater);
        assert_eq!(n().neg().limit(), Limit::NegInf);
        let half = RatFn::new(Poly::from_ints(&[1, 1]), Poly::from_ints(&[0, 2]));
        assert_eq!(half.limit(), Limit::Finite(q_frac(1, 2)));
    }

    #[test]
    fn eventual_cmp_bound_is_sound() {
        let big = RatFn::constant(q_int(1000));
        let (s, from) = n().eventual_cmp(&big);
        assert_eq!(s, Ordering::Greater);
        assert!(from >= 1001);
        for k in from..from + 10 {
            assert!(q_int(k as i64) > q_int(1000));
        }
    }

    #[test]
    fn composition() {
        let sq = RatFn::poly(Poly::from_ints(&[0, 0, 1]));
        let inv_n = n().recip().unwrap();
        let c = sq.compose(&inv_n).unwrap();
        assert_eq!(c, n().pow(2).recip().unwrap());
    }
}
