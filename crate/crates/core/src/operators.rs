//! Operators on kG / F_W: quantized divided powers, the action of locally constant
//! functions, Mahler coefficients, and coset idempotents.
//!
//! Operators are materialized on the span of the basis monomials. Every operator
//! built here except left multiplication maps that span into itself without
//! truncation, so composition of matrices matches composition of operators.

use crate::error::{Error, Result};
use crate::fp;
use crate::group::{Automorphism, GroupModel, SubgroupSpec};
use crate::iwasawa::{aut_basis_images, group_embed, TruncatedSeries, TruncationSpec};
use crate::linalg::FpMatrix;
use crate::padic::MultiIndex;
use crate::val::Val;
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;

/// `d^(alpha)(b^beta) = C(beta, alpha) prod_i (1 + b_i)^{alpha_i} b_i^{beta_i - alpha_i}`.
pub fn qdel_monomial(trunc: &Arc<TruncationSpec>, alpha: &MultiIndex, beta: &MultiIndex) -> TruncatedSeries {
    let p = trunc.p();
    let c = beta.binom(alpha, p as u64);
    if c == 0 || !alpha.leq(beta) {
        return TruncatedSeries::zero(trunc);
    }
    let mut out = BTreeMap::new();
    for g in alpha.below() {
        let k = fp::mul(c, alpha.binom(&g, p as u64), p);
        if k == 0 {
            continue;
        }
        let m = MultiIndex(beta.iter().zip(alpha.iter()).zip(g.iter()).map(|((&b, &a), &x)| b - a + x).collect());
        let i = trunc.index_of(&m).expect("image weight never exceeds the source weight");
        let e = out.entry(i).or_insert(0);
        *e = fp::add(*e, k, p);
    }
    TruncatedSeries::from_map(trunc, out)
}

pub fn qdel_apply(alpha: &MultiIndex, x: &TruncatedSeries) -> Result<TruncatedSeries> {
    let t = x.trunc();
    if alpha.len() != t.rank() {
        return Err(Error::Mismatch("multi-index rank differs from truncation".into()));
    }
    let mut acc = TruncatedSeries::zero(t);
    for (i, c) in x.terms() {
        acc = acc.add(&qdel_monomial(t, alpha, &t.basis()[i]).scale(c))?;
    }
    Ok(acc)
}

/// A bounded operator on kG / F_W in the monomial basis; column `j` is the image
/// of the `j`-th basis monomial.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    trunc: Arc<TruncationSpec>,
    m: FpMatrix,
}

impl PartialEq for OperatorMatrix {
    fn eq(&self, o: &Self) -> bool {
        Arc::ptr_eq(&self.trunc, &o.trunc) && self.m == o.m
    }
}

/// Degree of an operator: the minimum over resolved columns, and a lower bound
/// coming from columns whose image vanished mod F_W.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Degree {
    pub resolved: Option<i64>,
    pub unresolved_bound: Option<i64>,
}

impl Degree {
    /// The best statement available: the resolved minimum when it is below every
    /// unresolved bound, otherwise a bound.
    pub fn as_val(&self) -> Val {
        match (self.resolved, self.unresolved_bound) {
            (Some(r), Some(b)) if b < r => Val::AtLeast(b),
            (Some(r), _) => Val::Finite(r),
            (None, Some(b)) => Val::AtLeast(b),
            (None, None) => Val::AtLeast(i64::MAX),
        }
    }
}

impl OperatorMatrix {
    pub fn from_columns(trunc: &Arc<TruncationSpec>, cols: &[TruncatedSeries]) -> Self {
        let dense: Vec<Vec<u32>> = cols.iter().map(|c| c.to_dense()).collect();
        OperatorMatrix { trunc: trunc.clone(), m: FpMatrix::from_columns(&dense, trunc.size(), trunc.p()) }
    }

    fn from_column_fn<F>(trunc: &Arc<TruncationSpec>, f: F) -> Result<Self>
    where
        F: Fn(&MultiIndex) -> Result<TruncatedSeries> + Sync,
    {
        let cols = trunc.basis().par_iter().map(|b| f(b)).collect::<Result<Vec<_>>>()?;
        Ok(Self::from_columns(trunc, &cols))
    }

    pub fn identity(trunc: &Arc<TruncationSpec>) -> Self {
        OperatorMatrix { trunc: trunc.clone(), m: FpMatrix::identity(trunc.size(), trunc.p()) }
    }

    pub fn qdel(trunc: &Arc<TruncationSpec>, alpha: &MultiIndex) -> Result<Self> {
        Self::from_column_fn(trunc, |b| Ok(qdel_monomial(trunc, alpha, b)))
    }

    /// `d_i = d^(e_i)` for a 0-based index.
    pub fn partial(trunc: &Arc<TruncationSpec>, i: usize) -> Result<Self> {
        Self::qdel(trunc, &MultiIndex::unit(trunc.rank(), i))
    }

    /// Left multiplication by `x`.
    pub fn left_mult(x: &TruncatedSeries) -> Result<Self> {
        let t = x.trunc();
        Self::from_column_fn(t, |b| x.mul(&TruncatedSeries::monomial(t, b, 1)))
    }

    /// Right multiplication by `x`.
    pub fn right_mult(x: &TruncatedSeries) -> Result<Self> {
        let t = x.trunc();
        Self::from_column_fn(t, |b| TruncatedSeries::monomial(t, b, 1).mul(x))
    }

    pub fn aut_extend(trunc: &Arc<TruncationSpec>, phi: &Automorphism) -> Result<Self> {
        Ok(Self::from_columns(trunc, &aut_basis_images(trunc, phi)?))
    }

    pub fn rho(trunc: &Arc<TruncationSpec>, f: &LocallyConstantFunction) -> Result<Self> {
        Self::from_column_fn(trunc, |b| rho_apply(f, &TruncatedSeries::monomial(trunc, b, 1)))
    }

    pub fn trunc(&self) -> &Arc<TruncationSpec> {
        &self.trunc
    }

    pub fn matrix(&self) -> &FpMatrix {
        &self.m
    }

    fn check(&self, o: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.trunc, &o.trunc) {
            return Err(Error::Mismatch("operators live on different truncations".into()));
        }
        Ok(())
    }

    /// `self . o` (apply `o` first).
    pub fn compose(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(OperatorMatrix { trunc: self.trunc.clone(), m: self.m.mul(&o.m) })
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(OperatorMatrix { trunc: self.trunc.clone(), m: self.m.add(&o.m) })
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(OperatorMatrix { trunc: self.trunc.clone(), m: self.m.sub(&o.m) })
    }

    pub fn scale(&self, c: u32) -> Self {
        OperatorMatrix { trunc: self.trunc.clone(), m: self.m.scale(c) }
    }

    pub fn pow(&self, e: u64) -> Self {
        OperatorMatrix { trunc: self.trunc.clone(), m: self.m.pow(e) }
    }

    pub fn apply(&self, x: &TruncatedSeries) -> Result<TruncatedSeries> {
        if !Arc::ptr_eq(&self.trunc, x.trunc()) {
            return Err(Error::Mismatch("series and operator live on different truncations".into()));
        }
        Ok(TruncatedSeries::from_dense(&self.trunc, &self.m.apply(&x.to_dense())))
    }

    pub fn column(&self, j: usize) -> TruncatedSeries {
        TruncatedSeries::from_dense(&self.trunc, &self.m.column(j))
    }

    /// `min_beta w(image of b^beta) - <beta, omega>`.
    pub fn degree(&self) -> Degree {
        let t = &self.trunc;
        let mut resolved: Option<i64> = None;
        let mut bound: Option<i64> = None;
        for j in 0..t.size() {
            let wb = t.weight(j);
            match self.column(j).w_val() {
                Val::Finite(v) => resolved = Some(resolved.map_or(v - wb, |r| r.min(v - wb))),
                Val::AtLeast(v) => bound = Some(bound.map_or(v - wb, |r| r.min(v - wb))),
            }
        }
        Degree { resolved, unresolved_bound: bound }
    }
}

pub fn operator_degree(m: &OperatorMatrix) -> Degree {
    m.degree()
}

/// A function `(Z/p^s)^d -> F_p`, read through `theta mod p^s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocallyConstantFunction {
    p: u64,
    d: usize,
    level: u32,
    table: Vec<u32>,
}

impl LocallyConstantFunction {
    pub fn from_fn<F: Fn(&[u64]) -> u32>(p: u64, d: usize, level: u32, f: F) -> Self {
        let ps = p.pow(level);
        let size = (ps as usize).pow(d as u32);
        let mut table = Vec::with_capacity(size);
        let mut pt = vec![0u64; d];
        for idx in 0..size {
            let mut r = idx;
            for x in pt.iter_mut() {
                *x = (r % ps as usize) as u64;
                r /= ps as usize;
            }
            table.push(f(&pt) % p as u32);
        }
        LocallyConstantFunction { p, d, level, table }
    }

    /// `lambda -> C(lambda, alpha) mod p`, at the least level that resolves it.
    pub fn binomial(p: u64, alpha: &MultiIndex) -> Self {
        let top = alpha.iter().copied().max().unwrap_or(0) as u64;
        let mut level = 1;
        while p.pow(level) <= top {
            level += 1;
        }
        let a = alpha.clone();
        Self::from_fn(p, alpha.len(), level, move |l| {
            let l = MultiIndex(l.iter().map(|&x| x as u32).collect());
            l.binom(&a, p)
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn rank(&self) -> usize {
        self.d
    }

    pub fn eval(&self, coords: &[u64]) -> u32 {
        let ps = self.p.pow(self.level);
        let mut idx = 0usize;
        for &c in coords.iter().rev() {
            idx = idx * ps as usize + (c % ps) as usize;
        }
        self.table[idx]
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        if self.p != o.p || self.d != o.d {
            return Err(Error::Mismatch("functions on different groups".into()));
        }
        let level = self.level.max(o.level);
        let p = self.p;
        Ok(Self::from_fn(p, self.d, level, |x| fp::mul(self.eval(x), o.eval(x), p as u32)))
    }
}

/// `C_alpha(f) = sum_{beta <= alpha} (-1)^{|alpha - beta|} C(alpha, beta) f(beta)` for
/// every `alpha` in `[0, p^s)^d`; only non-zero coefficients are returned.
pub fn mahler_coeffs_function(f: &LocallyConstantFunction) -> BTreeMap<MultiIndex, u32> {
    let p = f.p as u32;
    let top = MultiIndex(vec![(f.p.pow(f.level) - 1) as u32; f.d]);
    let mut out = BTreeMap::new();
    for alpha in top.below() {
        let mut acc = 0u32;
        for beta in alpha.below() {
            let pt: Vec<u64> = beta.iter().map(|&x| x as u64).collect();
            let mut c = fp::mul(alpha.binom(&beta, f.p), f.eval(&pt), p);
            if (alpha.total() - beta.total()) % 2 == 1 {
                c = fp::neg(c, p);
            }
            acc = fp::add(acc, c, p);
        }
        if acc != 0 {
            out.insert(alpha, acc);
        }
    }
    out
}

/// `rho(f)`: scale each group element in the expansion of `x` by `f(theta(g))`.
pub fn rho_apply(f: &LocallyConstantFunction, x: &TruncatedSeries) -> Result<TruncatedSeries> {
    let t = x.trunc();
    if f.d != t.rank() || f.p != t.p() as u64 {
        return Err(Error::Mismatch("function and series disagree on p or rank".into()));
    }
    let p = t.p();
    let mut out = vec![0u32; t.size()];
    for (g, c) in x.group_expansion() {
        let c = fp::mul(c, f.eval(&g), p);
        if c == 0 {
            continue;
        }
        let gi = MultiIndex(g.iter().map(|&v| v as u32).collect());
        for delta in gi.below() {
            let k = fp::mul(c, gi.binom(&delta, p as u64), p);
            if k != 0 {
                let j = t.index_of(&delta).expect("sub-multi-indices of a basis monomial are in the basis");
                out[j] = fp::add(out[j], k, p);
            }
        }
    }
    Ok(TruncatedSeries::from_dense(t, &out))
}

/// The same action computed as `sum_alpha C_alpha(f) d^(alpha)(x)`.
pub fn rho_apply_mahler(f: &LocallyConstantFunction, x: &TruncatedSeries) -> Result<TruncatedSeries> {
    let mut acc = TruncatedSeries::zero(x.trunc());
    for (alpha, c) in mahler_coeffs_function(f) {
        acc = acc.add(&qdel_apply(&alpha, x)?.scale(c))?;
    }
    Ok(acc)
}

/// `Delta^alpha (psi theta^-1)(0)` with `psi(g) = phi(g) g^-1`, by finite differences.
pub fn mahler_coeff_aut(trunc: &Arc<TruncationSpec>, phi: &Automorphism, alpha: &MultiIndex) -> Result<TruncatedSeries> {
    let model: &GroupModel = trunc.model();
    let p = trunc.p();
    let mut acc = TruncatedSeries::zero(trunc);
    for beta in alpha.below() {
        let mut c = alpha.binom(&beta, p as u64);
        if c == 0 {
            continue;
        }
        if (alpha.total() - beta.total()) % 2 == 1 {
            c = fp::neg(c, p);
        }
        let coords: Vec<i128> = beta.iter().map(|&x| x as i128).collect();
        let g = model.element(&coords)?;
        acc = acc.add(&group_embed(trunc, &phi.psi(model, &g)?)?.scale(c))?;
    }
    Ok(acc)
}

/// `prod_i (embed(psi(g_i)) - 1)^{alpha_i}`, the closed form valid when `phi` is
/// trivial modulo the centre.
pub fn mahler_coeff_closed_form(trunc: &Arc<TruncationSpec>, phi: &Automorphism, alpha: &MultiIndex) -> Result<TruncatedSeries> {
    let model = trunc.model();
    let one = TruncatedSeries::one(trunc);
    let mut acc = one.clone();
    for (i, &a) in alpha.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let y = group_embed(trunc, &phi.psi(model, &model.basis(i))?)?.sub(&one)?;
        acc = acc.mul(&y.pow(a as u64)?)?;
    }
    Ok(acc)
}

/// A partial Mahler sum for an automorphism.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub matrix: OperatorMatrix,
    /// Largest `<alpha, omega>` included in the sum.
    pub d_prime: i64,
    /// Columns `beta` with `<beta, omega> <= budget` are guaranteed.
    pub budget: i64,
    pub deg_estimate: Val,
}

impl Reconstruction {
    pub fn guaranteed_columns(&self) -> Vec<usize> {
        let t = self.matrix.trunc();
        (0..t.size()).filter(|&j| t.weight(j) <= self.budget).collect()
    }
}

/// `sum_{<alpha, omega> <= D'} L(<phi, d^(alpha)>) . d^(alpha)`.
///
/// `D'` is the larger of `budget` and `omega_max (W - budget) / deg_omega(phi)`;
/// terms beyond it have degree above `W - budget`.
pub fn reconstruct_aut<R: Rng + ?Sized>(
    trunc: &Arc<TruncationSpec>,
    phi: &Automorphism,
    budget: i64,
    rng: &mut R,
) -> Result<Reconstruction> {
    let model = trunc.model();
    let deg = phi.deg_omega(model, 16, rng)?;
    let dv = deg.bound();
    if dv <= 0 {
        return Err(Error::Automorphism(format!("deg_omega estimate {} is not positive", deg.display(trunc.e()))));
    }
    let gap = (trunc.cutoff() - budget).max(0);
    let from_degree = (model.omega().max() * gap + dv - 1) / dv;
    let d_prime = budget.max(from_degree).min(trunc.max_weight());
    let mut acc = OperatorMatrix { trunc: trunc.clone(), m: FpMatrix::zero(trunc.size(), trunc.size(), trunc.p()) };
    for (k, alpha) in trunc.basis().iter().enumerate() {
        if trunc.weight(k) > d_prime {
            break;
        }
        let coef = mahler_coeff_aut(trunc, phi, alpha)?;
        if coef.is_zero() {
            continue;
        }
        let term = OperatorMatrix::left_mult(&coef)?.compose(&OperatorMatrix::qdel(trunc, alpha)?)?;
        acc = acc.add(&term)?;
    }
    Ok(Reconstruction { matrix: acc, d_prime, budget, deg_estimate: deg })
}

/// Positions tested by a subgroup of the shape `{g_i^p : i in T} u {g_j : j not in T}`.
pub fn tested_positions(h: &SubgroupSpec) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, e) in h.exponents.iter().enumerate() {
        match e {
            Some(0) => {}
            Some(1) => out.push(i),
            _ => return Err(Error::Shape(format!("exponent {e:?} at position {}; expected 0 or 1", i + 1))),
        }
    }
    Ok(out)
}

/// `prod_{i in T} (1 - (d_i - nu_i)^{p-1})`.
pub fn coset_idempotent(trunc: &Arc<TruncationSpec>, h: &SubgroupSpec, nu: &[u32]) -> Result<OperatorMatrix> {
    let tested = tested_positions(h)?;
    if nu.len() != tested.len() {
        return Err(Error::Shape(format!("nu has {} entries, subgroup tests {} positions", nu.len(), tested.len())));
    }
    let p = trunc.p();
    let id = OperatorMatrix::identity(trunc);
    let mut acc = id.clone();
    for (&i, &v) in tested.iter().zip(nu) {
        let shifted = OperatorMatrix::partial(trunc, i)?.sub(&id.scale(v % p))?;
        acc = acc.compose(&id.sub(&shifted.pow(p as u64 - 1))?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::ModelSpec;

    fn trunc(p: u64, omega: &[&str], w: i64, m: u32) -> Arc<TruncationSpec> {
        let model = GroupModel::load(&ModelSpec::Abelian { p, d: omega.len(), m, omega: omega.iter().map(|s| s.to_string()).collect() })
            .unwrap();
        TruncationSpec::new(Arc::new(model), w).unwrap()
    }

    #[test]
    fn qdel_examples() {
        let t = trunc(3, &["1"], 6, 3);
        let b2 = TruncatedSeries::parse(&t, "b1^2").unwrap();
        let e1 = MultiIndex(vec![1]);
        assert_eq!(qdel_apply(&e1, &b2).unwrap().to_string(), "2*b1 + 2*b1^2");
        let a = MultiIndex(vec![2]);
        assert_eq!(qdel_apply(&a, &b2).unwrap().to_string(), "1 + 2*b1 + b1^2");
        assert!(qdel_apply(&a, &TruncatedSeries::one(&t)).unwrap().is_zero());
    }

    #[test]
    fn degrees() {
        let t = trunc(3, &["1", "2"], 6, 3);
        let a = MultiIndex(vec![1, 1]);
        assert_eq!(OperatorMatrix::qdel(&t, &a).unwrap().degree().resolved, Some(-3));
        assert_eq!(OperatorMatrix::identity(&t).degree().resolved, Some(0));
        let b1 = TruncatedSeries::b(&t, 0);
        let l = OperatorMatrix::left_mult(&b1).unwrap();
        assert_eq!(l.degree().resolved, Some(1));
        assert!(l.degree().unresolved_bound.is_some());
    }

    #[test]
    fn indicator_mahler() {
        let f = LocallyConstantFunction::from_fn(3, 1, 1, |x| u32::from(x[0] == 0));
        let c = mahler_coeffs_function(&f);
        assert_eq!(c.get(&MultiIndex(vec![0])), Some(&1));
        assert_eq!(c.get(&MultiIndex(vec![1])), Some(&2));
        assert_eq!(c.get(&MultiIndex(vec![2])), Some(&1));
    }

    #[test]
    fn power_map_coefficient() {
        let t = trunc(3, &["1"], 12, 4);
        let phi = Automorphism::linear_on_log(t.model(), &[vec![10]]).unwrap();
        let c = mahler_coeff_aut(&t, &phi, &MultiIndex(vec![1])).unwrap();
        assert_eq!(c.to_string(), "b1^9");
        let c0 = mahler_coeff_aut(&t, &Automorphism::identity(t.model()), &MultiIndex(vec![0])).unwrap();
        assert_eq!(c0, TruncatedSeries::one(&t));
    }

    #[test]
    fn idempotent_shape_errors() {
        let t = trunc(3, &["1"], 4, 3);
        let h = SubgroupSpec { exponents: vec![Some(2)] };
        assert!(matches!(coset_idempotent(&t, &h, &[0]), Err(Error::Shape(_))));
    }
}
