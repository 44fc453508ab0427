//! The truncated Iwasawa algebra kG / F_W over F_p.
//!
//! Elements are power series in `b_i = g_i - 1` written in normal order
//! `b^a = b_1^{a_1} ... b_d^{a_d}`, keeping only monomials with `<a, omega> < W`.

use crate::error::{Error, Result};
use crate::fp;
use crate::group::{Automorphism, GroupElement, GroupModel};
use crate::padic::{binom_mod_p, binom_u64, MultiIndex};
use crate::val::Val;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

/// A cutoff `W` (in units of `1/e`) together with the monomial basis below it.
#[derive(Debug)]
pub struct TruncationSpec {
    model: Arc<GroupModel>,
    cutoff: i64,
    basis: Vec<MultiIndex>,
    weights: Vec<i64>,
    index: HashMap<MultiIndex, usize>,
}

impl TruncationSpec {
    pub fn new(model: Arc<GroupModel>, cutoff: i64) -> Result<Arc<Self>> {
        if cutoff < 1 {
            return Err(Error::InsufficientPrecision(format!("cutoff must be positive, got {cutoff}")));
        }
        let omega = model.omega().values().to_vec();
        let p = model.p();
        let max_exp = omega.iter().map(|&w| ((cutoff - 1) / w).max(0) as u64).max().unwrap_or(0);
        let mut need = 1u32;
        let mut q = p;
        while q <= max_exp {
            q = q.saturating_mul(p);
            need += 1;
        }
        if model.precision() < need {
            return Err(Error::InsufficientPrecision(format!(
                "cutoff {cutoff} needs exponents up to {max_exp}; requires M >= {need}, model has M = {}",
                model.precision()
            )));
        }
        let mut basis = Vec::new();
        let mut cur = vec![0u32; omega.len()];
        enumerate(&omega, 0, cutoff, &mut cur, &mut basis);
        basis.sort_by(|a, b| a.weight(&omega).cmp(&b.weight(&omega)).then_with(|| a.cmp(b)));
        let weights = basis.iter().map(|a| a.weight(&omega)).collect();
        let index = basis.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        Ok(Arc::new(TruncationSpec { model, cutoff, basis, weights, index }))
    }

    pub fn model(&self) -> &Arc<GroupModel> {
        &self.model
    }

    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }

    pub fn e(&self) -> i64 {
        self.model.omega().e()
    }

    pub fn p(&self) -> u32 {
        self.model.p() as u32
    }

    pub fn rank(&self) -> usize {
        self.model.rank()
    }

    pub fn omega(&self) -> &[i64] {
        self.model.omega().values()
    }

    /// Monomial basis in canonical order (by weight, then lexicographic).
    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn weight(&self, i: usize) -> i64 {
        self.weights[i]
    }

    pub fn index_of(&self, a: &MultiIndex) -> Option<usize> {
        self.index.get(a).copied()
    }

    pub fn max_weight(&self) -> i64 {
        self.weights.last().copied().unwrap_or(0)
    }
}

fn enumerate(omega: &[i64], i: usize, budget: i64, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if i == omega.len() {
        out.push(MultiIndex(cur.clone()));
        return;
    }
    let mut a = 0u32;
    while a as i64 * omega[i] < budget {
        cur[i] = a;
        enumerate(omega, i + 1, budget - a as i64 * omega[i], cur, out);
        a += 1;
    }
    cur[i] = 0;
}

/// An element of kG / F_W.
#[derive(Clone)]
pub struct TruncatedSeries {
    trunc: Arc<TruncationSpec>,
    coeffs: BTreeMap<usize, u32>,
}

impl PartialEq for TruncatedSeries {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.trunc, &other.trunc) && self.coeffs == other.coeffs
    }
}

impl Eq for TruncatedSeries {}

impl TruncatedSeries {
    pub fn zero(trunc: &Arc<TruncationSpec>) -> Self {
        TruncatedSeries { trunc: trunc.clone(), coeffs: BTreeMap::new() }
    }

    pub fn one(trunc: &Arc<TruncationSpec>) -> Self {
        Self::monomial(trunc, &MultiIndex::zero(trunc.rank()), 1)
    }

    /// `c * b^a`, or zero when the monomial lies in F_W.
    pub fn monomial(trunc: &Arc<TruncationSpec>, a: &MultiIndex, c: u32) -> Self {
        let mut s = Self::zero(trunc);
        if let Some(i) = trunc.index_of(a) {
            let c = c % trunc.p();
            if c != 0 {
                s.coeffs.insert(i, c);
            }
        }
        s
    }

    /// `b_i` (0-based index).
    pub fn b(trunc: &Arc<TruncationSpec>, i: usize) -> Self {
        Self::monomial(trunc, &MultiIndex::unit(trunc.rank(), i), 1)
    }

    pub fn from_dense(trunc: &Arc<TruncationSpec>, v: &[u32]) -> Self {
        let coeffs = v.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, &c)| (i, c)).collect();
        TruncatedSeries { trunc: trunc.clone(), coeffs }
    }

    pub(crate) fn from_map(trunc: &Arc<TruncationSpec>, coeffs: BTreeMap<usize, u32>) -> Self {
        let coeffs = coeffs.into_iter().filter(|&(_, c)| c != 0).collect();
        TruncatedSeries { trunc: trunc.clone(), coeffs }
    }

    pub fn to_dense(&self) -> Vec<u32> {
        let mut v = vec![0; self.trunc.size()];
        for (&i, &c) in &self.coeffs {
            v[i] = c;
        }
        v
    }

    pub fn trunc(&self) -> &Arc<TruncationSpec> {
        &self.trunc
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Non-zero terms as (basis index, coefficient) in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.coeffs.iter().map(|(&i, &c)| (i, c))
    }

    pub fn coeff(&self, a: &MultiIndex) -> u32 {
        self.trunc.index_of(a).and_then(|i| self.coeffs.get(&i).copied()).unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    fn check(&self, o: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.trunc, &o.trunc) {
            return Err(Error::Mismatch("series live in different truncations".into()));
        }
        Ok(())
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        let p = self.trunc.p();
        let mut out = self.coeffs.clone();
        for (&i, &c) in &o.coeffs {
            let e = out.entry(i).or_insert(0);
            *e = fp::add(*e, c, p);
            if *e == 0 {
                out.remove(&i);
            }
        }
        Ok(TruncatedSeries { trunc: self.trunc.clone(), coeffs: out })
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(self.trunc.p() - 1)
    }

    pub fn scale(&self, c: u32) -> Self {
        let p = self.trunc.p();
        let c = c % p;
        let coeffs = if c == 0 {
            BTreeMap::new()
        } else {
            self.coeffs.iter().map(|(&i, &x)| (i, fp::mul(x, c, p))).collect()
        };
        TruncatedSeries { trunc: self.trunc.clone(), coeffs }
    }

    /// Product mod F_W. Abelian models use the commutative monomial product; every
    /// other model goes through [`TruncatedSeries::mul_reference`].
    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        if self.trunc.model.is_abelian() {
            Ok(self.mul_commutative(o))
        } else {
            self.mul_reference(o)
        }
    }

    fn mul_commutative(&self, o: &Self) -> Self {
        let t = &self.trunc;
        let p = t.p();
        let mut out: BTreeMap<usize, u32> = BTreeMap::new();
        for (&i, &c) in &self.coeffs {
            let a = &t.basis[i];
            for (&j, &d) in &o.coeffs {
                if t.weights[i] + t.weights[j] >= t.cutoff {
                    continue;
                }
                let s = MultiIndex(a.iter().zip(t.basis[j].iter()).map(|(x, y)| x + y).collect());
                let k = t.index[&s];
                let e = out.entry(k).or_insert(0);
                *e = fp::add(*e, fp::mul(c, d, p), p);
            }
        }
        Self::from_map(t, out)
    }

    /// Product by group expansion: write each operand as a combination of group
    /// elements `g^c = g_1^{c_1} ... g_d^{c_d}`, multiply those in the group, and
    /// expand each product back as `sum C(mu, beta) b^beta`.
    pub fn mul_reference(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        let t = &self.trunc;
        let p = t.p();
        let model = &t.model;
        let xs = self.group_expansion();
        let ys = o.group_expansion();
        let mut products: HashMap<Vec<u64>, u32> = HashMap::new();
        for (g, &c) in &xs {
            for (h, &d) in &ys {
                let mu = model.mul_raw(g, h);
                let e = products.entry(mu).or_insert(0);
                *e = fp::add(*e, fp::mul(c, d, p), p);
            }
        }
        let mut out = vec![0u32; t.size()];
        for (mu, c) in products {
            if c == 0 {
                continue;
            }
            embed_residues_into(t, &mu, c, &mut out);
        }
        Ok(Self::from_dense(t, &out))
    }

    /// A random series with up to `terms` non-zero terms drawn from monomials of
    /// weight below `below`.
    pub fn random<R: rand::Rng + ?Sized>(trunc: &Arc<TruncationSpec>, below: i64, terms: usize, rng: &mut R) -> Self {
        let p = trunc.p();
        let pool = trunc.weights.partition_point(|&w| w < below);
        let mut out = BTreeMap::new();
        if pool == 0 {
            return Self::zero(trunc);
        }
        for _ in 0..terms {
            out.insert(rng.random_range(0..pool), rng.random_range(1..p));
        }
        Self::from_map(trunc, out)
    }

    /// Coefficients of this series as a combination of normal-ordered group elements,
    /// keyed by integer exponent vectors.
    pub fn group_expansion(&self) -> HashMap<Vec<u64>, u32> {
        let t = &self.trunc;
        let p = t.p();
        let mut out: HashMap<Vec<u64>, u32> = HashMap::new();
        for (&i, &c) in &self.coeffs {
            let a = &t.basis[i];
            for g in a.below() {
                let sign_odd = (a.total() - g.total()) % 2 == 1;
                let mut coef = fp::mul(c, a.binom(&g, p as u64), p);
                if sign_odd {
                    coef = fp::neg(coef, p);
                }
                if coef == 0 {
                    continue;
                }
                let key: Vec<u64> = g.iter().map(|&x| x as u64).collect();
                let e = out.entry(key).or_insert(0);
                *e = fp::add(*e, coef, p);
            }
        }
        out.retain(|_, c| *c != 0);
        out
    }

    pub fn pow(&self, mut n: u64) -> Result<Self> {
        let mut acc = Self::one(&self.trunc);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// The p-th power map; in abelian models this is `b^a -> b^{pa}` on monomials.
    pub fn frobenius(&self) -> Result<Self> {
        let t = &self.trunc;
        if !t.model.is_abelian() {
            return self.pow(t.p() as u64);
        }
        let p = t.p();
        let mut out = BTreeMap::new();
        for (&i, &c) in &self.coeffs {
            let a = MultiIndex(t.basis[i].iter().map(|&x| x * p).collect());
            if let Some(k) = t.index_of(&a) {
                out.insert(k, c);
            }
        }
        Ok(Self::from_map(t, out))
    }

    /// `min <a, omega>` over the support; the zero series gives the `>= W` marker.
    pub fn w_val(&self) -> Val {
        match self.coeffs.keys().next() {
            Some(&i) => Val::Finite(self.trunc.weights[i]),
            None => Val::AtLeast(self.trunc.cutoff),
        }
    }

    /// Lowest monomial in canonical order.
    pub fn leading_monomial(&self) -> Option<&MultiIndex> {
        self.coeffs.keys().next().map(|&i| &self.trunc.basis[i])
    }

    /// Reduce into another truncation of the same model (smaller or larger cutoff);
    /// monomials absent from the target are dropped.
    pub fn project(&self, target: &Arc<TruncationSpec>) -> Result<Self> {
        if !Arc::ptr_eq(&self.trunc.model, &target.model) {
            return Err(Error::Mismatch("projection across models".into()));
        }
        let mut out = BTreeMap::new();
        for (&i, &c) in &self.coeffs {
            if let Some(k) = target.index_of(&self.trunc.basis[i]) {
                out.insert(k, c);
            }
        }
        Ok(Self::from_map(target, out))
    }

    /// Parse the literal syntax `c*b1^a1*b2^a2 + ...`. Factors are multiplied in
    /// the order written.
    pub fn parse(trunc: &Arc<TruncationSpec>, text: &str) -> Result<Self> {
        let p = trunc.p() as i64;
        let d = trunc.rank();
        let mut acc = Self::zero(trunc);
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::Parse("empty series literal".into()));
        }
        for term in text.split('+') {
            let term = term.trim();
            if term.is_empty() {
                return Err(Error::Parse(format!("empty term in {text:?}")));
            }
            let mut val = Self::one(trunc);
            for factor in term.split('*') {
                let f = factor.trim();
                if let Some(rest) = f.strip_prefix('b') {
                    let (idx, exp) = match rest.split_once('^') {
                        Some((i, e)) => (i, e),
                        None => (rest, "1"),
                    };
                    let i: usize = idx.trim().parse().map_err(|_| Error::Parse(format!("bad variable {f:?}")))?;
                    let e: u64 = exp.trim().parse().map_err(|_| Error::Parse(format!("bad exponent {f:?}")))?;
                    if i == 0 || i > d {
                        return Err(Error::Parse(format!("variable b{i} out of range 1..={d}")));
                    }
                    val = val.mul(&Self::b(trunc, i - 1).pow(e)?)?;
                } else {
                    let c: i64 = f.parse().map_err(|_| Error::Parse(format!("bad factor {f:?}")))?;
                    val = val.scale(c.rem_euclid(p) as u32);
                }
            }
            acc = acc.add(&val)?;
        }
        Ok(acc)
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return f.write_str("0");
        }
        let mut parts = Vec::new();
        for (&i, &c) in &self.coeffs {
            let a = &self.trunc.basis[i];
            let mut factors = Vec::new();
            if c != 1 || a.total() == 0 {
                factors.push(c.to_string());
            }
            for (k, &e) in a.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(format!("b{}", k + 1)),
                    _ => factors.push(format!("b{}^{}", k + 1, e)),
                }
            }
            parts.push(factors.join("*"));
        }
        f.write_str(&parts.join(" + "))
    }
}

impl fmt::Debug for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Add `c * sum_beta C(mu, beta) b^beta` into a dense accumulator.
fn embed_residues_into(t: &TruncationSpec, mu: &[u64], c: u32, out: &mut [u32]) {
    let p = t.p();
    for (k, beta) in t.basis.iter().enumerate() {
        let mut b = c;
        for (&m, &e) in mu.iter().zip(beta.iter()) {
            if b == 0 {
                break;
            }
            b = fp::mul(b, binom_u64(m, e as u64, p as u64), p);
        }
        if b != 0 {
            out[k] = fp::add(out[k], b, p);
        }
    }
}

/// `g^lambda = sum_alpha C(lambda, alpha) b^alpha`.
pub fn group_embed(trunc: &Arc<TruncationSpec>, g: &GroupElement) -> Result<TruncatedSeries> {
    let p = trunc.p();
    if g.coords.len() != trunc.rank() {
        return Err(Error::Mismatch("element rank differs from truncation".into()));
    }
    let mut out = BTreeMap::new();
    for (k, beta) in trunc.basis.iter().enumerate() {
        let mut b = 1u32;
        for (lam, &e) in g.coords.iter().zip(beta.iter()) {
            b = fp::mul(b, binom_mod_p(lam, e as u64)?, p);
            if b == 0 {
                break;
            }
        }
        if b != 0 {
            out.insert(k, b);
        }
    }
    Ok(TruncatedSeries::from_map(trunc, out))
}

/// Images `phi(b_i) = embed(phi(g_i)) - 1`.
pub fn aut_images(trunc: &Arc<TruncationSpec>, phi: &Automorphism) -> Result<Vec<TruncatedSeries>> {
    let one = TruncatedSeries::one(trunc);
    phi.images().iter().map(|g| group_embed(trunc, g)?.sub(&one)).collect()
}

/// Column images `phi(b^beta)` for every basis monomial, in basis order.
pub fn aut_basis_images(trunc: &Arc<TruncationSpec>, phi: &Automorphism) -> Result<Vec<TruncatedSeries>> {
    let ys = aut_images(trunc, phi)?;
    let mut powers: Vec<Vec<TruncatedSeries>> = Vec::with_capacity(ys.len());
    for (i, y) in ys.iter().enumerate() {
        let top = trunc.basis.iter().map(|a| a[i]).max().unwrap_or(0);
        let mut v = vec![TruncatedSeries::one(trunc)];
        for _ in 0..top {
            let next = v.last().unwrap().mul(y)?;
            v.push(next);
        }
        powers.push(v);
    }
    trunc
        .basis
        .iter()
        .map(|a| {
            let mut acc = TruncatedSeries::one(trunc);
            for (i, &e) in a.iter().enumerate() {
                if e > 0 {
                    acc = acc.mul(&powers[i][e as usize])?;
                }
            }
            Ok(acc)
        })
        .collect()
}

/// The continuous ring endomorphism of kG induced by `phi`, applied to `x`.
pub fn aut_extend(phi: &Automorphism, x: &TruncatedSeries) -> Result<TruncatedSeries> {
    let t = x.trunc();
    let cols = aut_basis_images(t, phi)?;
    let mut acc = TruncatedSeries::zero(t);
    for (i, c) in x.terms() {
        acc = acc.add(&cols[i].scale(c))?;
    }
    Ok(acc)
}

/// Regroup `x = sum_gamma r_gamma c^gamma` with `c_j = b_{split + j}` and
/// `r_gamma` supported on the first `split` variables. Each `r_gamma` is determined
/// modulo `F_{W - w(c^gamma)}`.
pub fn relative_normal_form(x: &TruncatedSeries, split: usize) -> Result<BTreeMap<Vec<u32>, TruncatedSeries>> {
    let t = x.trunc();
    let d = t.rank();
    if split > d {
        return Err(Error::Shape(format!("split {split} exceeds rank {d}")));
    }
    let mut out: BTreeMap<Vec<u32>, BTreeMap<usize, u32>> = BTreeMap::new();
    for (i, c) in x.terms() {
        let a = &t.basis[i];
        let gamma = a[split..].to_vec();
        let mut head = a.0.clone();
        for v in &mut head[split..] {
            *v = 0;
        }
        let k = t.index_of(&MultiIndex(head)).expect("basis is downward closed");
        out.entry(gamma).or_default().insert(k, c);
    }
    Ok(out.into_iter().map(|(g, m)| (g, TruncatedSeries::from_map(t, m))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::ModelSpec;

    fn abelian(p: u64, omega: &[&str], m: u32) -> Arc<GroupModel> {
        Arc::new(
            GroupModel::load(&ModelSpec::Abelian { p, d: omega.len(), m, omega: omega.iter().map(|s| s.to_string()).collect() })
                .unwrap(),
        )
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(TruncationSpec::new(abelian(3, &["1"], 3), 5).unwrap().size(), 5);
        assert_eq!(TruncationSpec::new(abelian(3, &["1", "2"], 3), 4).unwrap().size(), 6);
        assert_eq!(TruncationSpec::new(abelian(3, &["1", "1"], 3), 1).unwrap().size(), 1);
        assert!(matches!(TruncationSpec::new(abelian(3, &["1"], 1), 5), Err(Error::InsufficientPrecision(_))));
    }

    #[test]
    fn valuation_examples() {
        let t = TruncationSpec::new(abelian(3, &["1"], 3), 5).unwrap();
        let b = TruncatedSeries::b(&t, 0);
        assert_eq!(b.pow(2).unwrap().w_val(), Val::Finite(2));
        assert_eq!(TruncatedSeries::zero(&t).w_val(), Val::AtLeast(5));
        assert_eq!(TruncatedSeries::one(&t).add(&b).unwrap().w_val(), Val::Finite(0));
    }

    #[test]
    fn embed_examples() {
        let m = abelian(3, &["1"], 3);
        let t = TruncationSpec::new(m.clone(), 5).unwrap();
        let e = group_embed(&t, &m.element(&[4]).unwrap()).unwrap();
        assert_eq!(e.to_dense(), vec![1, 1, 0, 1, 1]);
        let g3 = group_embed(&t, &m.element(&[3]).unwrap()).unwrap();
        assert_eq!(g3.to_string(), "1 + b1^3");
    }

    #[test]
    fn aut_extend_power_map() {
        let m = abelian(3, &["1"], 4);
        let t = TruncationSpec::new(m.clone(), 12).unwrap();
        let phi = Automorphism::linear_on_log(&m, &[vec![10]]).unwrap();
        let img = aut_extend(&phi, &TruncatedSeries::b(&t, 0)).unwrap();
        assert_eq!(img.to_string(), "b1 + b1^9 + b1^10");
        assert_eq!(aut_extend(&phi, &TruncatedSeries::one(&t)).unwrap(), TruncatedSeries::one(&t));
    }

    #[test]
    fn parse_and_print() {
        let t = TruncationSpec::new(abelian(5, &["1", "1"], 3), 6).unwrap();
        let x = TruncatedSeries::parse(&t, "2*b1^2*b2 + 3 + b2").unwrap();
        assert_eq!(x.to_string(), "3 + b2 + 2*b1^2*b2");
        assert_eq!(TruncatedSeries::parse(&t, &x.to_string()).unwrap(), x);
        assert!(TruncatedSeries::parse(&t, "b3").is_err());
        assert!(TruncatedSeries::parse(&t, "").is_err());
    }

    #[test]
    fn normal_form_split() {
        let t = TruncationSpec::new(abelian(3, &["1", "1", "1"], 3), 5).unwrap();
        let x = TruncatedSeries::parse(&t, "b1*b3").unwrap();
        let nf = relative_normal_form(&x, 2).unwrap();
        assert_eq!(nf.len(), 1);
        assert_eq!(nf[&vec![1]].to_string(), "b1");
        let y = TruncatedSeries::parse(&t, "b3").unwrap();
        assert_eq!(relative_normal_form(&y, 2).unwrap()[&vec![1]], TruncatedSeries::one(&t));
        let z = TruncatedSeries::parse(&t, "b1 + b2^2").unwrap();
        assert_eq!(relative_normal_form(&z, 2).unwrap().keys().collect::<Vec<_>>(), vec![&vec![0]]);
    }

    #[test]
    fn commutative_matches_reference() {
        let t = TruncationSpec::new(abelian(3, &["1", "2"], 3), 9).unwrap();
        let x = TruncatedSeries::parse(&t, "1 + 2*b1 + b2 + b1^3*b2").unwrap();
        let y = TruncatedSeries::parse(&t, "b1^2 + 2*b1*b2 + 1").unwrap();
        assert_eq!(x.mul(&y).unwrap(), x.mul_reference(&y).unwrap());
    }
}
