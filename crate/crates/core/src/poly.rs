//! Dense univariate polynomials over arbitrary-precision rationals.
//!
//! Coefficients are stored lowest degree first with no trailing zeros, so the
//! zero polynomial is the empty vector.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::Q;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    coeffs: Vec<Q>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Q>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `t`.
    pub fn var() -> Self {
        Self::new(vec![Q::zero(), Q::one()])
    }

    pub fn from_ints(cs: &[i64]) -> Self {
        Self::new(cs.iter().map(|&c| Q::from_integer(c.into())).collect())
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn lead(&self) -> Q {
        self.coeffs.last().cloned().unwrap_or_else(Q::zero)
    }

    pub fn as_constant(&self) -> Option<Q> {
        match self.coeffs.len() {
            0 => Some(Q::zero()),
            1 => Some(self.coeffs[0].clone()),
            _ => None,
        }
    }

    pub fn eval(&self, t: &Q) -> Q {
        let mut acc = Q::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * t + c.to_f64().unwrap_or(f64::NAN))
    }

    pub fn scale(&self, k: &Q) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn neg(&self) -> Self {
        Poly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn add(&self, other: &Poly) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let z = Q::zero();
        Self::new(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).unwrap_or(&z) + other.coeffs.get(i).unwrap_or(&z)
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![Q::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// `self(inner(t))`.
    pub fn compose(&self, inner: &Poly) -> Self {
        let mut acc = Self::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(inner).add(&Self::constant(c.clone()));
        }
        acc
    }

    /// Euclidean division; panics on a zero divisor.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        let dd = d.degree().expect("polynomial division by zero");
        let lead = d.lead();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![Q::zero(); self.coeffs.len().saturating_sub(dd)];
        while rem.len() > dd && !rem.is_empty() {
            let k = rem.len() - 1 - dd;
            let f = rem.last().unwrap() / &lead;
            for (j, dc) in d.coeffs.iter().enumerate() {
                rem[k + j] -= &f * dc;
            }
            quot[k] = f;
            rem.pop();
            while rem.last().is_some_and(Zero::is_zero) {
                rem.pop();
            }
        }
        (Self::new(quot), Self::new(rem))
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let l = self.lead();
        self.scale(&(Q::one() / l))
    }

    /// Monic greatest common divisor; `gcd(0, 0) = 0`.
    pub fn gcd(&self, other: &Poly) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * Q::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    pub fn square_free(&self) -> Self {
        if self.degree().unwrap_or(0) == 0 {
            return self.clone();
        }
        let g = self.gcd(&self.derivative());
        self.div_rem(&g).0
    }

    /// Cauchy bound: every real root `r` satisfies `|r| < cauchy_bound()`.
    /// Zero for nonzero constants; the zero polynomial has no bound and
    /// yields `None`.
    pub fn cauchy_bound(&self) -> Option<Q> {
        let d = self.degree()?;
        if d == 0 {
            return Some(Q::zero());
        }
        let lead = self.lead().abs();
        let m = self.coeffs[..d]
            .iter()
            .map(|c| c.abs() / &lead)
            .max()
            .unwrap_or_else(Q::zero);
        Some(Q::one() + m)
    }

    /// Smallest `b` with no real root in `[b, ∞)`, saturating at `u64::MAX`.
    pub fn root_free_from(&self) -> u64 {
        match self.cauchy_bound() {
            None => u64::MAX,
            Some(b) if b.is_zero() => 0,
            Some(b) => b.floor().to_integer().to_u64().map_or(u64::MAX, |v| v.saturating_add(1)),
        }
    }

    /// Sign of `self(t)` for all sufficiently large `t`.
    pub fn eventual_sign(&self) -> Ordering {
        self.lead().cmp(&Q::zero())
    }

    /// Whether `self(k)` is an integer for every integer `k`.
    pub fn is_integer_valued(&self) -> bool {
        let d = self.degree().unwrap_or(0);
        (0..=d as i64).all(|k| self.eval(&Q::from_integer(k.into())).is_integer())
    }

    /// Sturm sequence of the square-free part.
    pub fn sturm_sequence(&self) -> Vec<Poly> {
        let p0 = self.square_free();
        let mut seq = vec![p0.clone()];
        if p0.degree().unwrap_or(0) == 0 {
            return seq;
        }
        seq.push(p0.derivative());
        loop {
            let n = seq.len();
            let (_, r) = seq[n - 2].div_rem(&seq[n - 1]);
            if r.is_zero() {
                break;
            }
            seq.push(r.neg());
        }
        seq
    }

    pub fn monomial(c: Q, k: usize) -> Self {
        let mut v = vec![Q::zero(); k];
        v.push(c);
        Self::new(v)
    }

    /// Power-sum polynomial `S_j(c) = Σ_{k=0}^{c-1} k^j` as a polynomial in `c`.
    pub fn power_sum(j: u32) -> Self {
        // Degree j+1, fixed by its values at c = 0..=j+1.
        let pts: Vec<(Q, Q)> = (0..=(j as i64 + 1))
            .map(|c| {
                let s: BigInt = (0..c).map(|k| BigInt::from(k).pow(j)).sum();
                (Q::from_integer(c.into()), Q::from_integer(s))
            })
            .collect();
        Self::interpolate(&pts)
    }

    /// Lagrange interpolation through distinct abscissae.
    pub fn interpolate(pts: &[(Q, Q)]) -> Self {
        let mut acc = Self::zero();
        for (i, (xi, yi)) in pts.iter().enumerate() {
            let mut basis = Self::one();
            let mut denom = Q::one();
            for (j, (xj, _)) in pts.iter().enumerate() {
                if i != j {
                    basis = basis.mul(&Self::new(vec![-xj.clone(), Q::one()]));
                    denom *= xi - xj;
                }
            }
            acc = acc.add(&basis.scale(&(yi / denom)));
        }
        acc
    }
}

/// Number of sign changes in a sequence, ignoring zeros.
fn sign_changes(signs: impl Iterator<Item = Ordering>) -> usize {
    let mut last = Ordering::Equal;
    let mut n = 0;
    for s in signs {
        if s == Ordering::Equal {
            continue;
        }
        if last != Ordering::Equal && s != last {
            n += 1;
        }
        last = s;
    }
    n
}

/// Counts distinct real roots via a precomputed Sturm sequence.
#[derive(Clone, Debug)]
pub struct RootCounter {
    seq: Vec<Poly>,
    at_neg_inf: usize,
}

impl RootCounter {
    pub fn new(p: &Poly) -> Self {
        let seq = p.sturm_sequence();
        let at_neg_inf = sign_changes(seq.iter().map(|q| {
            let s = q.eventual_sign();
            if q.degree().unwrap_or(0) % 2 == 1 {
                s.reverse()
            } else {
                s
            }
        }));
        RootCounter { seq, at_neg_inf }
    }

    /// Number of distinct real roots `r <= t`.
    pub fn roots_at_most(&self, t: &Q) -> usize {
        let v = sign_changes(self.seq.iter().map(|q| q.eval(t).cmp(&Q::zero())));
        self.at_neg_inf - v
    }

    pub fn total_roots(&self) -> usize {
        let v = sign_changes(self.seq.iter().map(Poly::eventual_sign));
        self.at_neg_inf - v
    }
}

pub fn q_int(k: i64) -> Q {
    Q::from_integer(k.into())
}

pub fn q_frac(p: i64, q: i64) -> Q {
    Q::new(p.into(), q.into())
}

pub fn q_u64(k: u64) -> Q {
    Q::from_integer(k.into())
}

pub fn floor_i(q: &Q) -> BigInt {
    q.numer().div_floor(q.denom())
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_in(f, "n")
    }
}

impl Poly {
    pub fn fmt_in(&self, f: &mut fmt::Formatter<'_>, var: &str) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            first = false;
            let show_coeff = i == 0 || !a.is_one();
            if show_coeff {
                write!(f, "{a}")?;
            }
            match i {
                0 => {}
                1 => write!(f, "{}{var}", if show_coeff { "*" } else { "" })?,
                _ => write!(f, "{}{var}^{i}", if show_coeff { "*" } else { "" })?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_and_gcd() {
        // (t-1)(t-2) / (t-1)
        let p = Poly::from_ints(&[2, -3, 1]);
        let d = Poly::from_ints(&[-1, 1]);
        let (q, r) = p.div_rem(&d);
        assert_eq!(q, Poly::from_ints(&[-2, 1]));
        assert!(r.is_zero());
        let g = p.gcd(&Poly::from_ints(&[-3, 1]).mul(&d));
        assert_eq!(g, d);
    }

    #[test]
    fn sturm_counts_roots() {
        // (t-1)^2 (t+3): distinct roots -3 and 1
        let p = Poly::from_ints(&[-1, 1]).pow(2).mul(&Poly::from_ints(&[3, 1]));
        let rc = RootCounter::new(&p);
        assert_eq!(rc.total_roots(), 2);
        assert_eq!(rc.roots_at_most(&q_int(-4)), 0);
        assert_eq!(rc.roots_at_most(&q_int(-3)), 1);
        assert_eq!(rc.roots_at_most(&q_int(0)), 1);
        assert_eq!(rc.roots_at_most(&q_int(1)), 2);
        // t^2 - 2 has two irrational roots
        let rc = RootCounter::new(&Poly::from_ints(&[-2, 0, 1]));
        assert_eq!(rc.roots_at_most(&q_int(1)), 1);
        assert_eq!(rc.roots_at_most(&q_int(2)), 2);
    }

    #[test]
    fn power_sums_match_brute_force() {
        for j in 0..5u32 {
            let s = Poly::power_sum(j);
            for c in 0..12i64 {
                let want: i64 = (0..c).map(|k| k.pow(j)).sum();
                assert_eq!(s.eval(&q_int(c)), q_int(want));
            }
        }
    }

    #[test]
    fn root_free_bound() {
        let p = Poly::from_ints(&[-1_000_000, 1]);
        let b = p.root_free_from();
        assert!(b > 1_000_000);
        assert_eq!(Poly::from_ints(&[5]).root_free_from(), 0);
        assert!(Poly::new(vec![q_frac(1, 2), q_frac(1, 2)]).is_integer_valued() == false);
        assert!(Poly::new(vec![q_int(0), q_frac(1, 2), q_frac(1, 2)]).is_integer_valued());
    }
}
