//! Smith (Moore-type) matrices over F_p, their determinant factorization, and the
//! abelian `zeta_r -> d_i` convergence experiment.

use crate::error::{Error, Result};
use crate::fp;
use crate::group::Automorphism;
use crate::iwasawa::{aut_extend, group_embed, TruncatedSeries, TruncationSpec};
use crate::operators::{mahler_coeff_aut, qdel_apply, OperatorMatrix};
use crate::padic::MultiIndex;
use crate::val::{fmt_ratio, Val};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// A commutative polynomial in `y_1..y_m` over F_p. Terms are displayed from the
/// lex-leading one down.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FpPolynomial {
    p: u32,
    nvars: usize,
    terms: BTreeMap<Vec<u32>, u32>,
}

impl FpPolynomial {
    pub fn zero(p: u32, nvars: usize) -> Self {
        FpPolynomial { p, nvars, terms: BTreeMap::new() }
    }

    pub fn constant(p: u32, nvars: usize, c: u32) -> Self {
        let mut s = Self::zero(p, nvars);
        if c % p != 0 {
            s.terms.insert(vec![0; nvars], c % p);
        }
        s
    }

    /// `y_i` (0-based).
    pub fn var(p: u32, nvars: usize, i: usize) -> Self {
        let mut a = vec![0; nvars];
        a[i] = 1;
        FpPolynomial { p, nvars, terms: [(a, 1)].into_iter().collect() }
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, u32> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant value, if the polynomial is constant.
    pub fn as_constant(&self) -> Option<u32> {
        match self.terms.len() {
            0 => Some(0),
            1 => self.terms.get(&vec![0; self.nvars]).copied(),
            _ => None,
        }
    }

    fn add_term(&mut self, a: Vec<u32>, c: u32) {
        let p = self.p;
        let e = self.terms.entry(a).or_insert(0);
        *e = fp::add(*e, c % p, p);
        if *e == 0 {
            self.terms.retain(|_, c| *c != 0);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut s = self.clone();
        for (a, &c) in &o.terms {
            s.add_term(a.clone(), c);
        }
        s
    }

    pub fn neg(&self) -> Self {
        let terms = self.terms.iter().map(|(a, &c)| (a.clone(), fp::neg(c, self.p))).collect();
        FpPolynomial { terms, ..*self }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut s = Self::zero(self.p, self.nvars);
        for (a, &c) in &self.terms {
            for (b, &d) in &o.terms {
                let m: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                s.add_term(m, fp::mul(c, d, self.p));
            }
        }
        s
    }

    /// `f^p`, which in characteristic p multiplies every exponent by p.
    pub fn frobenius(&self) -> Self {
        let terms = self.terms.iter().map(|(a, &c)| (a.iter().map(|&x| x * self.p).collect(), c)).collect();
        FpPolynomial { terms, ..*self }
    }

    pub fn min_degree(&self) -> Option<u64> {
        self.terms.keys().map(|a| a.iter().map(|&x| x as u64).sum()).min()
    }

    /// `min sum_i a_i w_i` over the support.
    pub fn weighted_valuation(&self, weights: &[i64]) -> Option<i64> {
        self.terms.keys().map(|a| a.iter().zip(weights).map(|(&x, &w)| x as i64 * w).sum()).min()
    }

    /// Exact quotient by `d`, dividing lex-leading terms; `None` if `d` does not divide.
    pub fn div_exact(&self, d: &Self) -> Option<Self> {
        let (da, &dc) = d.terms.iter().next_back()?;
        let dinv = fp::inv(dc, self.p);
        let mut r = self.clone();
        let mut q = Self::zero(self.p, self.nvars);
        while let Some((ra, &rc)) = r.terms.iter().next_back() {
            if ra.iter().zip(da).any(|(x, y)| x < y) {
                return None;
            }
            let t: Vec<u32> = ra.iter().zip(da).map(|(x, y)| x - y).collect();
            let mono = FpPolynomial { p: self.p, nvars: self.nvars, terms: [(t, fp::mul(rc, dinv, self.p))].into_iter().collect() };
            r = r.sub(&mono.mul(d));
            q = q.add(&mono);
        }
        Some(q)
    }
}

impl fmt::Display for FpPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(a, &c)| {
                let mut fs: Vec<String> = Vec::new();
                for (i, &e) in a.iter().enumerate() {
                    match e {
                        0 => {}
                        1 => fs.push(format!("y{}", i + 1)),
                        _ => fs.push(format!("y{}^{e}", i + 1)),
                    }
                }
                match (c, fs.is_empty()) {
                    (_, true) => c.to_string(),
                    (1, false) => fs.join("*"),
                    _ => format!("{c}*{}", fs.join("*")),
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Minimal ring interface for small determinants.
pub trait RingElem: Clone {
    fn r_zero(&self) -> Self;
    fn r_add(&self, o: &Self) -> Result<Self>;
    fn r_sub(&self, o: &Self) -> Result<Self>;
    fn r_mul(&self, o: &Self) -> Result<Self>;
}

impl RingElem for FpPolynomial {
    fn r_zero(&self) -> Self {
        Self::zero(self.p, self.nvars)
    }
    fn r_add(&self, o: &Self) -> Result<Self> {
        Ok(self.add(o))
    }
    fn r_sub(&self, o: &Self) -> Result<Self> {
        Ok(self.sub(o))
    }
    fn r_mul(&self, o: &Self) -> Result<Self> {
        Ok(self.mul(o))
    }
}

impl RingElem for TruncatedSeries {
    fn r_zero(&self) -> Self {
        TruncatedSeries::zero(self.trunc())
    }
    fn r_add(&self, o: &Self) -> Result<Self> {
        self.add(o)
    }
    fn r_sub(&self, o: &Self) -> Result<Self> {
        self.sub(o)
    }
    fn r_mul(&self, o: &Self) -> Result<Self> {
        self.mul(o)
    }
}

fn minor<T: Clone>(m: &[Vec<T>], row: usize, col: usize) -> Vec<Vec<T>> {
    m.iter()
        .enumerate()
        .filter(|(r, _)| *r != row)
        .map(|(_, v)| v.iter().enumerate().filter(|(c, _)| *c != col).map(|(_, x)| x.clone()).collect())
        .collect()
}

/// Cofactor expansion along the first row; entries must commute.
pub fn determinant<T: RingElem>(m: &[Vec<T>], one: &T) -> Result<T> {
    match m.len() {
        0 => Ok(one.clone()),
        1 => Ok(m[0][0].clone()),
        n => {
            let mut acc = one.r_zero();
            for j in 0..n {
                let term = m[0][j].r_mul(&determinant(&minor(m, 0, j), one)?)?;
                acc = if j % 2 == 0 { acc.r_add(&term)? } else { acc.r_sub(&term)? };
            }
            Ok(acc)
        }
    }
}

/// `adj(M)_{ij} = (-1)^{i+j} det(M without row j and column i)`.
pub fn adjugate<T: RingElem>(m: &[Vec<T>], one: &T) -> Result<Vec<Vec<T>>> {
    let n = m.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = determinant(&minor(m, j, i), one)?;
                    if (i + j) % 2 == 0 {
                        Ok(d)
                    } else {
                        d.r_zero().r_sub(&d)
                    }
                })
                .collect()
        })
        .collect()
}

/// `M_r[j][i] = y_i^{p^{r+j}}` over polynomials, rows built by Frobenius.
pub fn smith_matrix_poly(ys: &[FpPolynomial], r: u32, m: usize) -> Result<Vec<Vec<FpPolynomial>>> {
    if m > ys.len() {
        return Err(Error::Shape(format!("m = {m} exceeds {} variables", ys.len())));
    }
    let mut row: Vec<FpPolynomial> = ys[..m].iter().map(|y| (0..r).fold(y.clone(), |a, _| a.frobenius())).collect();
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let next = row.iter().map(|y| y.frobenius()).collect();
        out.push(std::mem::replace(&mut row, next));
    }
    Ok(out)
}

/// The same matrix over kG / F_W for commuting series of valuation `lambda`.
pub fn smith_matrix_series(ys: &[TruncatedSeries], lambda: i64, r: u32, m: usize) -> Result<Vec<Vec<TruncatedSeries>>> {
    if m > ys.len() || m == 0 {
        return Err(Error::Shape(format!("m = {m} not in 1..={}", ys.len())));
    }
    let t = ys[0].trunc();
    let p = t.p() as i64;
    let need = p.pow(r + m as u32 - 1) * lambda;
    if need >= t.cutoff() {
        return Err(Error::InsufficientPrecision(format!(
            "Smith matrix needs cutoff above {need}, have W = {}",
            t.cutoff()
        )));
    }
    let mut row = ys[..m].iter().map(|y| (0..r).try_fold(y.clone(), |a, _| a.frobenius())).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let next = row.iter().map(|y| y.frobenius()).collect::<Result<Vec<_>>>()?;
        out.push(std::mem::replace(&mut row, next));
    }
    Ok(out)
}

/// Projective representatives of `P(F_p^m)`: first non-zero coordinate equal to 1,
/// in lexicographic order.
pub fn projective_points(p: u32, m: usize) -> Vec<Vec<u32>> {
    let total = (p as usize).pow(m as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut r = idx;
        let mut mu = vec![0u32; m];
        for x in mu.iter_mut().rev() {
            *x = (r % p as usize) as u32;
            r /= p as usize;
        }
        if mu.iter().find(|&&x| x != 0) == Some(&1) {
            out.push(mu);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct MooreReport {
    pub p: u32,
    pub m: usize,
    pub r: u32,
    pub det: String,
    pub forms: Vec<String>,
    /// `det / prod(forms)` when it is a non-zero constant.
    pub scalar: Option<u32>,
    pub factorization_holds: bool,
    pub valuation: Option<i64>,
    pub expected_valuation: i64,
}

/// Factor `det M_r` over the projective linear forms in `y_i^{p^r}`, and compare
/// its valuation under `w(y_i) = lambda` with `(1 + p + ... + p^{m-1}) lambda p^r`.
pub fn moore_det_check(p: u32, m: usize, r: u32, lambda: i64, budget: u64) -> Result<MooreReport> {
    if !crate::padic::is_prime(p as u64) {
        return Err(Error::NotPrime(p as u64));
    }
    if m == 0 || (p as u64).pow(m as u32) > budget {
        return Err(Error::Budget(format!("p^m = {p}^{m} exceeds budget {budget}")));
    }
    let ys: Vec<FpPolynomial> = (0..m).map(|i| FpPolynomial::var(p, m, i)).collect();
    let mat = smith_matrix_poly(&ys, r, m)?;
    let one = FpPolynomial::constant(p, m, 1);
    let det = determinant(&mat, &one)?;
    let pr: Vec<FpPolynomial> = ys.iter().map(|y| (0..r).fold(y.clone(), |a, _| a.frobenius())).collect();
    let mut prod = one.clone();
    let mut forms = Vec::new();
    for mu in projective_points(p, m) {
        let mut f = FpPolynomial::zero(p, m);
        for (c, y) in mu.iter().zip(&pr) {
            if *c != 0 {
                f = f.add(&y.mul(&FpPolynomial::constant(p, m, *c)));
            }
        }
        forms.push(f.to_string());
        prod = prod.mul(&f);
    }
    let scalar = det.div_exact(&prod).and_then(|q| q.as_constant()).filter(|&c| c != 0);
    let geometric: i64 = (0..m as u32).map(|k| (p as i64).pow(k)).sum();
    Ok(MooreReport {
        p,
        m,
        r,
        det: det.to_string(),
        forms,
        scalar,
        factorization_holds: scalar.is_some(),
        valuation: det.weighted_valuation(&vec![lambda; m]),
        expected_valuation: geometric * lambda * (p as i64).pow(r),
    })
}

/// `num / den` in the fraction field of the commutative truncated algebra. Both
/// parts are known modulo F_W, so the value is known modulo valuation `W - den_val`.
#[derive(Clone, Debug)]
pub struct ValuedFraction {
    pub num: TruncatedSeries,
    pub den: TruncatedSeries,
    pub den_val: i64,
}

impl ValuedFraction {
    pub fn new(num: TruncatedSeries, den: TruncatedSeries) -> Result<Self> {
        let den_val = den.w_val().finite().ok_or(Error::DivisionByZero)?;
        Ok(ValuedFraction { num, den, den_val })
    }

    pub fn from_series(x: TruncatedSeries) -> Self {
        let one = TruncatedSeries::one(x.trunc());
        ValuedFraction { num: x, den: one, den_val: 0 }
    }

    /// Valuations at or above this are not resolved.
    pub fn precision(&self) -> i64 {
        self.num.trunc().cutoff() - self.den_val
    }

    pub fn val(&self) -> Val {
        match self.num.w_val() {
            Val::Finite(v) => Val::Finite(v - self.den_val),
            Val::AtLeast(_) => Val::AtLeast(self.precision()),
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn combine_den(&self, o: &Self) -> Result<(TruncatedSeries, i64)> {
        let den = self.den.mul(&o.den)?;
        let dv = self.den_val + o.den_val;
        if dv >= self.num.trunc().cutoff() {
            return Err(Error::InsufficientPrecision(format!("common denominator has valuation {dv}")));
        }
        Ok((den, dv))
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        let (den, den_val) = self.combine_den(o)?;
        let num = self.num.mul(&o.den)?.add(&o.num.mul(&self.den)?)?;
        Ok(ValuedFraction { num, den, den_val })
    }

    pub fn neg(&self) -> Self {
        ValuedFraction { num: self.num.neg(), ..self.clone() }
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        let (den, den_val) = self.combine_den(o)?;
        Ok(ValuedFraction { num: self.num.mul(&o.num)?, den, den_val })
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        let inv = ValuedFraction::new(o.den.clone(), o.num.clone())?;
        self.mul(&inv)
    }

    /// `self - s` for a plain series, keeping the denominator.
    pub fn sub_series(&self, s: &TruncatedSeries) -> Result<Self> {
        Ok(ValuedFraction { num: self.num.sub(&self.den.mul(s)?)?, ..self.clone() })
    }

    /// Cross-multiplied equality modulo F_W.
    pub fn equals(&self, o: &Self) -> Result<bool> {
        Ok(self.num.mul(&o.den)? == o.num.mul(&self.den)?)
    }
}

/// The data of a `zeta_r` experiment in an abelian model with `P = 0`.
#[derive(Clone, Debug)]
pub struct ZetaExperiment {
    pub trunc: Arc<TruncationSpec>,
    pub phi: Automorphism,
    /// `y_i = embed(z(g_i)) - 1`, in basis order.
    pub y: Vec<TruncatedSeries>,
    pub lambda: i64,
    pub m: usize,
    /// Basis positions sorted by `w(y_i)`, ties in basis order.
    pub order: Vec<usize>,
    pub r_range: Vec<u32>,
    pub tests: Vec<TruncatedSeries>,
}

impl ZetaExperiment {
    /// `z` is computed by `p^{z_depth}`-th roots of `phi^{p^{z_depth}}(g) g^-1`.
    pub fn new(trunc: &Arc<TruncationSpec>, phi: Automorphism, z_depth: u32, r_range: Vec<u32>, tests: Vec<TruncatedSeries>) -> Result<Self> {
        let model = trunc.model();
        if !model.is_abelian() {
            return Err(Error::Model("the zeta experiment needs an abelian model".into()));
        }
        let one = TruncatedSeries::one(trunc);
        let y = phi
            .z_of_automorphism(model, z_depth)?
            .iter()
            .map(|z| group_embed(trunc, z)?.sub(&one))
            .collect::<Result<Vec<_>>>()?;
        let vals: Vec<Option<i64>> = y.iter().map(|s| s.w_val().finite()).collect();
        let Some(lambda) = vals.iter().flatten().copied().min() else {
            return Err(Error::Automorphism("z(phi) is trivial to this precision; lambda is unresolved".into()));
        };
        let mut order: Vec<usize> = (0..y.len()).collect();
        order.sort_by_key(|&i| (vals[i].unwrap_or(i64::MAX), i));
        let m = vals.iter().filter(|v| **v == Some(lambda)).count();
        Ok(ZetaExperiment { trunc: trunc.clone(), phi, y, lambda, m, order, r_range, tests })
    }

    fn sorted_y(&self) -> Vec<TruncatedSeries> {
        self.order.iter().map(|&i| self.y[i].clone()).collect()
    }

    pub fn smith(&self, r: u32) -> Result<Vec<Vec<TruncatedSeries>>> {
        smith_matrix_series(&self.sorted_y(), self.lambda, r, self.m)
    }
}

/// `zeta_r^{(i)}(x) = sum_j adj(M_r)_{ij} (phi^{p^{r+j}}(x) - x) / det(M_r)`.
pub fn zeta_eval(exp: &ZetaExperiment, i: usize, r: u32, x: &TruncatedSeries) -> Result<ValuedFraction> {
    let t = &exp.trunc;
    if i >= exp.m {
        return Err(Error::Shape(format!("zeta index {} exceeds m = {}", i + 1, exp.m)));
    }
    let mat = exp.smith(r)?;
    let one = TruncatedSeries::one(t);
    let det = determinant(&mat, &one)?;
    let adj = adjugate(&mat, &one)?;
    let p = t.p() as u64;
    let mut num = TruncatedSeries::zero(t);
    for (j, a) in adj[i].iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let pw = exp.phi.power(t.model(), p.pow(r + j as u32))?;
        let diff = aut_extend(&pw, x)?.sub(x)?;
        num = num.add(&a.mul(&diff)?)?;
    }
    ValuedFraction::new(num, det).map_err(|_| Error::InsufficientPrecision("det M_r vanishes mod F_W".into()))
}

#[derive(Clone, Debug, Serialize)]
pub struct ZetaRecord {
    pub i: usize,
    pub r: u32,
    #[serde(rename = "D")]
    pub d: String,
    pub d_value: Option<i64>,
    #[serde(rename = "bound_A")]
    pub bound_a: String,
    #[serde(rename = "bound_B")]
    pub bound_b: i64,
    pub status: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZetaReport {
    pub lambda: i64,
    pub m: usize,
    pub records: Vec<ZetaRecord>,
    /// Strict increase of resolved `D(i, r)` in `r`, per `i`.
    pub monotone: bool,
    pub cramer_ok: bool,
    pub vdet_ok: bool,
    pub fixed_vectors: usize,
    pub fixed_killed: bool,
}

/// Measure `D(i, r) = min_x v(zeta_r^{(i)}(x) - d_i(x)) - w(x)` over the test set,
/// with the supporting Cramer, Vdet and fixed-vector checks.
pub fn zeta_convergence(exp: &ZetaExperiment) -> Result<ZetaReport> {
    let t = &exp.trunc;
    let e = t.e();
    let p = t.p() as i64;
    let lambda = exp.lambda;
    let mut records = Vec::new();
    let mut cramer_ok = true;
    let mut vdet_ok = true;
    let one = TruncatedSeries::one(t);
    for i in 0..exp.m {
        let dir = MultiIndex::unit(t.rank(), exp.order[i]);
        for &r in &exp.r_range {
            let mut d = Val::AtLeast(i64::MAX);
            for x in &exp.tests {
                let wx = x.w_val().finite().ok_or_else(|| Error::Shape("test vector is zero mod F_W".into()))?;
                let z = zeta_eval(exp, i, r, x)?;
                d = d.min(z.sub_series(&qdel_apply(&dir, x)?)?.val().shift(-wx));
            }
            let mat = exp.smith(r)?;
            let det = determinant(&mat, &one)?;
            let dv = det.w_val().bound();
            for (j, a) in adjugate(&mat, &one)?[i].iter().enumerate() {
                if let Val::Finite(v) = a.w_val() {
                    if v - dv < -p.pow(r + j as u32) * lambda {
                        cramer_ok = false;
                    }
                }
            }
            let pr = p.pow(r);
            let bound_b = e * p.pow(2 * r) - p.pow(r + exp.m as u32 - 1) * lambda;
            records.push(ZetaRecord {
                i: i + 1,
                r,
                d: d.display(e),
                d_value: d.finite(),
                bound_a: fmt_ratio(pr * lambda, 2 * e),
                bound_b,
                status: if d.is_finite() { "resolved" } else { "unresolved" }.into(),
            });
        }
    }
    for &r in &exp.r_range {
        let row = exp.smith(r)?.swap_remove(0);
        for mu in projective_points(t.p(), exp.m) {
            let mut s = TruncatedSeries::zero(t);
            for (c, y) in mu.iter().zip(&row) {
                s = s.add(&y.scale(*c))?;
            }
            if s.w_val() != Val::Finite(p.pow(r) * lambda) {
                vdet_ok = false;
            }
        }
    }
    let monotone = (1..=exp.m).all(|i| {
        let ds: Vec<i64> = records.iter().filter(|rec| rec.i == i).filter_map(|rec| rec.d_value).collect();
        ds.windows(2).all(|w| w[1] > w[0])
    });
    let fixed = fixed_vectors(t, &exp.phi)?;
    let mut fixed_killed = true;
    for x in &fixed {
        for i in 0..exp.m {
            for &r in &exp.r_range {
                if !zeta_eval(exp, i, r, x)?.is_exact_zero() {
                    fixed_killed = false;
                }
            }
        }
    }
    Ok(ZetaReport { lambda, m: exp.m, records, monotone, cramer_ok, vdet_ok, fixed_vectors: fixed.len(), fixed_killed })
}

/// A basis of `ker(phi - 1)` on kG / F_W.
pub fn fixed_vectors(trunc: &Arc<TruncationSpec>, phi: &Automorphism) -> Result<Vec<TruncatedSeries>> {
    let a = OperatorMatrix::aut_extend(trunc, phi)?;
    let diff = a.sub(&OperatorMatrix::identity(trunc))?;
    Ok(diff.matrix().kernel().iter().map(|v| TruncatedSeries::from_dense(trunc, v)).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticsRecord {
    pub alpha: Vec<u32>,
    pub r: u32,
    pub lhs: String,
    pub bound: i64,
    /// `None` when the left side is not resolved below the bound.
    pub holds: Option<bool>,
}

/// `w(<phi^{p^r}, d^(alpha)> - y^{alpha p^r}) >= p^{2r} + lambda p^r (|alpha| - 1)`.
pub fn coefficient_asymptotics(exp: &ZetaExperiment, alphas: &[MultiIndex]) -> Result<Vec<AsymptoticsRecord>> {
    let t = &exp.trunc;
    let p = t.p() as i64;
    let mut out = Vec::new();
    for &r in &exp.r_range {
        let pw = exp.phi.power(t.model(), (p as u64).pow(r))?;
        let ypr: Vec<TruncatedSeries> = exp.y.iter().map(|y| y.pow((p as u64).pow(r))).collect::<Result<_>>()?;
        for alpha in alphas {
            if alpha.total() == 0 {
                continue;
            }
            let coef = mahler_coeff_aut(t, &pw, alpha)?;
            let mut mono = TruncatedSeries::one(t);
            for (y, &a) in ypr.iter().zip(alpha.iter()) {
                mono = mono.mul(&y.pow(a as u64)?)?;
            }
            let lhs = coef.sub(&mono)?.w_val();
            let bound = t.e() * p.pow(2 * r) + exp.lambda * p.pow(r) * (alpha.total() as i64 - 1);
            let holds = match lhs {
                Val::Finite(v) => Some(v >= bound),
                Val::AtLeast(b) if b >= bound => Some(true),
                Val::AtLeast(_) => None,
            };
            out.push(AsymptoticsRecord { alpha: alpha.0.clone(), r, lhs: lhs.display(t.e()), bound, holds });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupModel, ModelSpec};

    #[test]
    fn moore_small() {
        let rep = moore_det_check(2, 2, 0, 1, 1 << 12).unwrap();
        assert_eq!(rep.det, "y1^2*y2 + y1*y2^2");
        assert_eq!(rep.forms, vec!["y2", "y1", "y1 + y2"]);
        assert_eq!(rep.scalar, Some(1));
        let one = moore_det_check(3, 1, 1, 2, 1 << 12).unwrap();
        assert_eq!(one.det, "y1^3");
        assert_eq!(one.scalar, Some(1));
    }

    #[test]
    fn exact_division() {
        let y1 = FpPolynomial::var(3, 2, 0);
        let y2 = FpPolynomial::var(3, 2, 1);
        let f = y1.add(&y2).mul(&y1.sub(&y2));
        assert_eq!(f.div_exact(&y1.add(&y2)), Some(y1.sub(&y2)));
        assert_eq!(y1.div_exact(&y2), None);
    }

    #[test]
    fn fraction_examples() {
        let model = GroupModel::load(&ModelSpec::Abelian { p: 3, d: 1, m: 4, omega: vec!["1".into()] }).unwrap();
        let t = TruncationSpec::new(Arc::new(model), 20).unwrap();
        let b = |k| TruncatedSeries::parse(&t, &format!("b1^{k}")).unwrap();
        let q = ValuedFraction::new(TruncatedSeries::one(&t), b(9)).unwrap().mul(&ValuedFraction::from_series(b(10))).unwrap();
        assert_eq!(q.val(), Val::Finite(1));
        let x = ValuedFraction::new(b(2), b(3)).unwrap();
        let y = ValuedFraction::new(b(3), b(2)).unwrap();
        assert!(x.mul(&y).unwrap().equals(&ValuedFraction::from_series(TruncatedSeries::one(&t))).unwrap());
        assert!(ValuedFraction::new(b(1), TruncatedSeries::zero(&t)).is_err());
    }
}
