//! Truncated p-adic integers Z/p^M and binomial coefficients mod p.

use crate::error::{Error, Result};
use crate::fp;
use crate::val::Val;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Deref;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// `p^m` if it fits comfortably below 2^63.
pub fn checked_modulus(p: u64, m: u32) -> Option<u64> {
    let mut q: u64 = 1;
    for _ in 0..m {
        q = q.checked_mul(p)?;
        if q >= 1 << 62 {
            return None;
        }
    }
    Some(q)
}

/// An element of Z/p^M, stored as its base-p digits (least significant first).
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PadicInt {
    p: u64,
    digits: Vec<u32>,
}

impl PadicInt {
    /// The class of `residue` mod p^M; negative inputs are reduced into range.
    pub fn make(residue: i128, p: u64, m: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if m < 1 {
            return Err(Error::BadPrecision(m));
        }
        let q = checked_modulus(p, m).ok_or(Error::PrecisionOverflow { p, m })?;
        let r = residue.rem_euclid(q as i128) as u64;
        Ok(Self::from_residue_unchecked(r, p, m))
    }

    pub(crate) fn from_residue_unchecked(mut r: u64, p: u64, m: u32) -> Self {
        let mut digits = Vec::with_capacity(m as usize);
        for _ in 0..m {
            digits.push((r % p) as u32);
            r /= p;
        }
        PadicInt { p, digits }
    }

    pub fn from_digits(digits: Vec<u32>, p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if digits.is_empty() {
            return Err(Error::BadPrecision(0));
        }
        checked_modulus(p, digits.len() as u32).ok_or(Error::PrecisionOverflow {
            p,
            m: digits.len() as u32,
        })?;
        if let Some(d) = digits.iter().find(|&&d| d as u64 >= p) {
            return Err(Error::Parse(format!("digit {d} out of range for p={p}")));
        }
        Ok(PadicInt { p, digits })
    }

    pub fn zero(p: u64, m: u32) -> Self {
        PadicInt { p, digits: vec![0; m as usize] }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.digits.len() as u32
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn modulus(&self) -> u64 {
        self.p.pow(self.precision())
    }

    /// Canonical representative in [0, p^M).
    pub fn residue(&self) -> u64 {
        self.digits.iter().rev().fold(0u64, |acc, &d| acc * self.p + d as u64)
    }

    pub fn is_zero(&self) -> bool {
        self.digits.iter().all(|&d| d == 0)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.p != other.p || self.digits.len() != other.digits.len() {
            return Err(Error::Mismatch(format!(
                "Z/{}^{} vs Z/{}^{}",
                self.p,
                self.precision(),
                other.p,
                other.precision()
            )));
        }
        Ok(())
    }

    fn with_residue(&self, r: u64) -> Self {
        Self::from_residue_unchecked(r, self.p, self.precision())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let q = self.modulus() as u128;
        Ok(self.with_residue(((self.residue() as u128 + other.residue() as u128) % q) as u64))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let q = self.modulus() as u128;
        Ok(self.with_residue(((self.residue() as u128 * other.residue() as u128) % q) as u64))
    }

    pub fn neg(&self) -> Self {
        let q = self.modulus();
        self.with_residue((q - self.residue()) % q)
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let q = self.modulus() as u128;
        let mut base = self.residue() as u128;
        let mut acc = 1u128 % q;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % q;
            }
            base = base * base % q;
            e >>= 1;
        }
        self.with_residue(acc as u64)
    }

    /// p-adic valuation; the all-zero residue gives the `>= M` marker.
    pub fn vp(&self) -> Val {
        match self.digits.iter().position(|&d| d != 0) {
            Some(i) => Val::Finite(i as i64),
            None => Val::AtLeast(self.precision() as i64),
        }
    }

    /// Reduce to a lower precision.
    pub fn truncate(&self, m: u32) -> Self {
        let m = m.min(self.precision()).max(1);
        PadicInt { p: self.p, digits: self.digits[..m as usize].to_vec() }
    }

    /// Exact division by p^k, losing k digits of precision. `None` when p^k does not
    /// divide the residue or no precision would remain.
    pub fn div_p_pow(&self, k: u32) -> Option<Self> {
        if k >= self.precision() {
            return None;
        }
        if self.digits[..k as usize].iter().any(|&d| d != 0) {
            return None;
        }
        Some(PadicInt { p: self.p, digits: self.digits[k as usize..].to_vec() })
    }

    /// Parse a decimal integer with p and M supplied by context.
    pub fn parse(text: &str, p: u64, m: u32) -> Result<Self> {
        let v: i128 = text
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("not an integer: {text:?}")))?;
        Self::make(v, p, m)
    }
}

impl fmt::Display for PadicInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ds: Vec<String> = self.digits.iter().map(|d| d.to_string()).collect();
        write!(f, "{}@{}^{}", ds.join("."), self.p, self.precision())
    }
}

impl fmt::Debug for PadicInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// C(a, b) mod p for 0 <= a, b < p.
fn digit_binom(a: u64, b: u64, p: u32) -> u32 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    let (mut num, mut den) = (1u32, 1u32);
    for i in 0..b {
        num = fp::mul(num, ((a - i) % p as u64) as u32, p);
        den = fp::mul(den, ((i + 1) % p as u64) as u32, p);
    }
    fp::mul(num, fp::inv(den, p), p)
}

/// C(lambda, n) mod p for non-negative integers via Lucas.
pub fn binom_u64(mut lambda: u64, mut n: u64, p: u64) -> u32 {
    let mut acc = 1u32;
    while n > 0 {
        let (a, b) = (lambda % p, n % p);
        if b > a {
            return 0;
        }
        acc = fp::mul(acc, digit_binom(a, b, p as u32), p as u32);
        if acc == 0 {
            return 0;
        }
        lambda /= p;
        n /= p;
    }
    acc
}

/// C(lambda, n) mod p for a truncated p-adic lambda (Lucas on digits).
pub fn binom_mod_p(lambda: &PadicInt, n: u64) -> Result<u32> {
    let p = lambda.p();
    let mut q: u64 = 1;
    for _ in 0..lambda.precision() {
        q = q.saturating_mul(p);
    }
    if q <= n {
        return Err(Error::InsufficientPrecision(format!(
            "C(lambda, {n}) needs p^M > {n}, have {p}^{}",
            lambda.precision()
        )));
    }
    let mut acc = 1u32;
    let mut rest = n;
    for &d in lambda.digits() {
        if rest == 0 {
            break;
        }
        let b = rest % p;
        if b > d as u64 {
            return Ok(0);
        }
        acc = fp::mul(acc, digit_binom(d as u64, b, p as u32), p as u32);
        rest /= p;
    }
    Ok(acc)
}

/// A multi-index in N^d.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn unit(d: usize, i: usize) -> Self {
        let mut v = vec![0; d];
        v[i] = 1;
        MultiIndex(v)
    }

    /// Componentwise order.
    pub fn leq(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&a| a as u64).sum()
    }

    /// Pairing with integer weights.
    pub fn weight(&self, omega: &[i64]) -> i64 {
        self.0.iter().zip(omega).map(|(&a, &w)| a as i64 * w).sum()
    }

    /// All multi-indices gamma with gamma <= self, in lexicographic order.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(Vec::with_capacity(self.0.len()))];
        for &a in &self.0 {
            let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
            for prefix in &out {
                for g in 0..=a {
                    let mut v = prefix.0.clone();
                    v.push(g);
                    next.push(MultiIndex(v));
                }
            }
            out = next;
        }
        out
    }

    /// Product of Lucas binomials C(self_i, other_i) mod p.
    pub fn binom(&self, other: &Self, p: u64) -> u32 {
        let mut acc = 1u32;
        for (&a, &b) in self.0.iter().zip(&other.0) {
            acc = fp::mul(acc, binom_u64(a as u64, b as u64, p), p as u32);
            if acc == 0 {
                break;
            }
        }
        acc
    }
}

impl Deref for MultiIndex {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_examples() {
        assert_eq!(PadicInt::make(4, 3, 3).unwrap().digits(), &[1, 1, 0]);
        assert_eq!(PadicInt::make(-1, 3, 3).unwrap().digits(), &[2, 2, 2]);
        assert_eq!(PadicInt::make(27, 3, 3).unwrap().digits(), &[0, 0, 0]);
        assert_eq!(PadicInt::make(1, 4, 3), Err(Error::NotPrime(4)));
        assert_eq!(PadicInt::make(1, 3, 0), Err(Error::BadPrecision(0)));
    }

    #[test]
    fn arith_examples() {
        let a = PadicInt::from_digits(vec![1, 1, 0], 3).unwrap();
        let b = PadicInt::from_digits(vec![2, 1, 0], 3).unwrap();
        assert_eq!(a.add(&b).unwrap().digits(), &[0, 0, 1]);
        let one = PadicInt::make(1, 3, 3).unwrap();
        assert_eq!(a.mul(&one).unwrap(), a);
        let ten = PadicInt::from_digits(vec![1, 0, 1], 3).unwrap();
        assert_eq!(ten.pow(3).digits(), &[1, 0, 0]);
        let other = PadicInt::make(1, 3, 2).unwrap();
        assert!(matches!(a.add(&other), Err(Error::Mismatch(_))));
        let five = PadicInt::make(1, 5, 3).unwrap();
        assert!(matches!(a.mul(&five), Err(Error::Mismatch(_))));
    }

    #[test]
    fn vp_examples() {
        assert_eq!(PadicInt::from_digits(vec![0, 2, 1], 3).unwrap().vp(), Val::Finite(1));
        assert_eq!(PadicInt::from_digits(vec![1, 2, 1], 3).unwrap().vp(), Val::Finite(0));
        assert_eq!(PadicInt::zero(3, 3).vp(), Val::AtLeast(3));
    }

    #[test]
    fn binom_examples() {
        let l = |v: i128| PadicInt::make(v, 3, 3).unwrap();
        assert_eq!(binom_mod_p(&l(7), 7).unwrap(), 1);
        assert_eq!(binom_mod_p(&l(4), 3).unwrap(), 1);
        assert_eq!(binom_mod_p(&l(2), 5).unwrap(), 0);
        assert!(matches!(binom_mod_p(&l(2), 27), Err(Error::InsufficientPrecision(_))));
    }

    #[test]
    fn display_and_parse() {
        let a = PadicInt::parse("4", 3, 3).unwrap();
        assert_eq!(a.to_string(), "1.1.0@3^3");
        assert!(PadicInt::parse("x", 3, 3).is_err());
    }

    #[test]
    fn division_by_p_powers() {
        let a = PadicInt::make(18, 3, 4).unwrap();
        assert_eq!(a.div_p_pow(2).unwrap().residue(), 2);
        assert!(a.div_p_pow(3).is_none());
    }

    #[test]
    fn multi_index_below() {
        let a = MultiIndex(vec![1, 2]);
        assert_eq!(a.below().len(), 6);
        assert!(a.below().iter().all(|g| g.leq(&a)));
    }
}
