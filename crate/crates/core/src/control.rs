//! Truncated ideals and the finite-precision control, dagger and primality checks.
//!
//! Every answer here is a statement about kG / F_W. A positive control result is
//! a necessary condition for control of the true ideal, not a proof of it.

use crate::error::{Error, Result};
use crate::fp;
use crate::group::SubgroupSpec;
use crate::iwasawa::{group_embed, relative_normal_form, TruncatedSeries, TruncationSpec};
use crate::linalg::{FpMatrix, RowSpace};
use crate::operators::{tested_positions, OperatorMatrix};
use crate::padic::MultiIndex;
use crate::val::Val;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    #[default]
    Right,
    TwoSided,
}

/// The image of an ideal in kG / F_W, as a row-reduced subspace.
#[derive(Clone, Debug)]
pub struct IdealSpan {
    trunc: Arc<TruncationSpec>,
    space: RowSpace,
    sidedness: Sidedness,
}

impl IdealSpan {
    /// Close the span of `gens` under right (and for two-sided, left) multiplication
    /// by every `b_i`.
    pub fn new(trunc: &Arc<TruncationSpec>, gens: &[TruncatedSeries], sidedness: Sidedness) -> Result<Self> {
        let mut ops = Vec::new();
        for i in 0..trunc.rank() {
            let b = TruncatedSeries::b(trunc, i);
            ops.push(OperatorMatrix::right_mult(&b)?.matrix().clone());
            if sidedness == Sidedness::TwoSided {
                ops.push(OperatorMatrix::left_mult(&b)?.matrix().clone());
            }
        }
        Self::closure(trunc, gens, &ops, sidedness)
    }

    fn closure(trunc: &Arc<TruncationSpec>, gens: &[TruncatedSeries], ops: &[FpMatrix], sidedness: Sidedness) -> Result<Self> {
        let mut space = RowSpace::new(trunc.size(), trunc.p());
        let mut queue = VecDeque::new();
        for g in gens {
            if !Arc::ptr_eq(g.trunc(), trunc) {
                return Err(Error::Mismatch("ideal generator from a different truncation".into()));
            }
            let v = g.to_dense();
            if space.insert(&v) {
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            for op in ops {
                let w = op.apply(&v);
                if space.insert(&w) {
                    queue.push_back(w);
                }
            }
        }
        Ok(IdealSpan { trunc: trunc.clone(), space, sidedness })
    }

    pub fn maximal(trunc: &Arc<TruncationSpec>) -> Result<Self> {
        let gens: Vec<_> = (0..trunc.rank()).map(|i| TruncatedSeries::b(trunc, i)).collect();
        Self::new(trunc, &gens, Sidedness::TwoSided)
    }

    pub fn trunc(&self) -> &Arc<TruncationSpec> {
        &self.trunc
    }

    pub fn sidedness(&self) -> Sidedness {
        self.sidedness
    }

    pub fn rank(&self) -> usize {
        self.space.rank()
    }

    pub fn space(&self) -> &RowSpace {
        &self.space
    }

    pub fn rows(&self) -> Vec<TruncatedSeries> {
        self.space.rows.iter().map(|r| TruncatedSeries::from_dense(&self.trunc, r)).collect()
    }

    pub fn contains(&self, x: &TruncatedSeries) -> bool {
        self.space.contains(&x.to_dense())
    }

    /// The subspace obtained by dropping monomials of weight `>= cutoff`.
    fn projected(&self, cutoff: i64) -> RowSpace {
        let t = &self.trunc;
        let mut rs = RowSpace::new(t.size(), t.p());
        for row in &self.space.rows {
            rs.insert(&mask_below(t, row, cutoff));
        }
        rs
    }
}

fn mask_below(t: &TruncationSpec, v: &[u32], cutoff: i64) -> Vec<u32> {
    v.iter().enumerate().map(|(j, &x)| if t.weight(j) < cutoff { x } else { 0 }).collect()
}

/// A failed stability test: `d_direction(row) not in I`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ControlWitness {
    /// 1-based basis position of the tested operator.
    pub direction: usize,
    pub row: String,
    pub residual_monomial: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlReport {
    pub controlled: bool,
    /// 1-based tested positions.
    pub tested: Vec<usize>,
    pub witnesses: Vec<ControlWitness>,
    pub rank: usize,
}

fn monomial_string(t: &Arc<TruncationSpec>, j: usize) -> String {
    TruncatedSeries::monomial(t, &t.basis()[j], 1).to_string()
}

/// Stability of one direction: `d_i(I) subset I` compared modulo `F_{W - omega_i}`,
/// the precision at which `d_i` of a class mod F_W is determined.
fn direction_failure(ideal: &IdealSpan, i: usize) -> Result<Option<ControlWitness>> {
    let t = &ideal.trunc;
    let di = OperatorMatrix::partial(t, i)?;
    let cutoff = t.cutoff() - t.omega()[i];
    let target = ideal.projected(cutoff);
    for row in &ideal.space.rows {
        let img = mask_below(t, &di.matrix().apply(row), cutoff);
        let res = target.reduce(&img);
        if let Some(j) = res.iter().position(|&x| x != 0) {
            return Ok(Some(ControlWitness {
                direction: i + 1,
                row: TruncatedSeries::from_dense(t, row).to_string(),
                residual_monomial: monomial_string(t, j),
            }));
        }
    }
    Ok(None)
}

/// Control by `H = <g_i^p (i tested), g_j (j untested)>`, tested as stability of
/// the span under `d_i` for every tested `i`.
pub fn is_controlled_by(ideal: &IdealSpan, h: &SubgroupSpec) -> Result<ControlReport> {
    let tested = tested_positions(h)?;
    if h.exponents.len() != ideal.trunc.rank() {
        return Err(Error::Shape("subgroup rank differs from the model".into()));
    }
    let mut witnesses = Vec::new();
    for &i in &tested {
        if let Some(w) = direction_failure(ideal, i)? {
            witnesses.push(w);
        }
    }
    Ok(ControlReport {
        controlled: witnesses.is_empty(),
        tested: tested.iter().map(|i| i + 1).collect(),
        witnesses,
        rank: ideal.rank(),
    })
}

/// The smallest basis-aligned `H` of the tested shape that passes the control
/// test. This is an upper bound for the controller relative to the chosen basis.
pub fn controller_approx(ideal: &IdealSpan) -> Result<SubgroupSpec> {
    let d = ideal.trunc.rank();
    let mut exponents = vec![Some(0); d];
    for (i, e) in exponents.iter_mut().enumerate() {
        if direction_failure(ideal, i)?.is_none() {
            *e = Some(1);
        }
    }
    Ok(SubgroupSpec { exponents })
}

/// All `lambda in [0, p^s)^d` with `g^lambda - 1` in the span.
pub fn dagger_approx(ideal: &IdealSpan, s: u32, budget: u64) -> Result<Vec<Vec<u64>>> {
    let t = &ideal.trunc;
    let model = t.model();
    let d = t.rank() as u32;
    let ps = model.p().checked_pow(s).ok_or_else(|| Error::Budget("p^s overflows".into()))?;
    let total = ps.checked_pow(d).filter(|&n| n <= budget);
    let Some(total) = total else {
        return Err(Error::Budget(format!("dagger search needs p^(s*d) points, budget is {budget}")));
    };
    if s > model.precision() {
        return Err(Error::InsufficientPrecision(format!("search depth {s} exceeds precision {}", model.precision())));
    }
    let one = TruncatedSeries::one(t);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut r = idx;
        let lambda: Vec<u64> = (0..d)
            .map(|_| {
                let x = r % ps;
                r /= ps;
                x
            })
            .collect();
        let g = model.element(&lambda.iter().map(|&x| x as i128).collect::<Vec<_>>())?;
        if ideal.contains(&group_embed(t, &g)?.sub(&one)?) {
            out.push(lambda);
        }
    }
    Ok(out)
}

/// A prime of the commutative algebra on the first `split` variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PrimeKind {
    Zero,
    /// `z_target - u`, with `u` a polynomial in the other central variables.
    Graph { target: usize, u: BTreeMap<Vec<u32>, u32> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CentralPrimeSpec {
    pub split: usize,
    pub kind: PrimeKind,
}

impl CentralPrimeSpec {
    pub fn zero(split: usize) -> Self {
        CentralPrimeSpec { split, kind: PrimeKind::Zero }
    }

    /// Parse `u` in the series literal syntax; it may only involve central variables
    /// other than `target` (0-based).
    pub fn graph(trunc: &Arc<TruncationSpec>, split: usize, target: usize, u: &str) -> Result<Self> {
        check_central_block(trunc, split)?;
        if target >= split {
            return Err(Error::Shape(format!("graph target {} is outside the central block", target + 1)));
        }
        let s = TruncatedSeries::parse(trunc, u)?;
        let mut map = BTreeMap::new();
        for (i, c) in s.terms() {
            let a = &trunc.basis()[i];
            if a[split..].iter().any(|&x| x != 0) || a[target] != 0 {
                return Err(Error::Shape(format!("substitution term {} uses a forbidden variable", monomial_string(trunc, i))));
            }
            map.insert(a[..split].to_vec(), c);
        }
        if s.w_val().bound() <= trunc.omega()[target] {
            return Err(Error::Shape(format!(
                "substitution has w = {}, needs more than omega of the target",
                s.w_val().display(trunc.e())
            )));
        }
        Ok(CentralPrimeSpec { split, kind: PrimeKind::Graph { target, u: map } })
    }

    /// `z_target - u` as a series, or `None` for the zero prime.
    pub fn generator(&self, trunc: &Arc<TruncationSpec>) -> Result<Option<TruncatedSeries>> {
        match &self.kind {
            PrimeKind::Zero => Ok(None),
            PrimeKind::Graph { target, u } => {
                let mut g = TruncatedSeries::b(trunc, *target);
                for (a, &c) in u {
                    let mut full = a.clone();
                    full.resize(trunc.rank(), 0);
                    g = g.sub(&TruncatedSeries::monomial(trunc, &MultiIndex(full), c))?;
                }
                Ok(Some(g))
            }
        }
    }
}

fn check_central_block(trunc: &Arc<TruncationSpec>, split: usize) -> Result<()> {
    let model = trunc.model();
    if split == 0 || split > trunc.rank() {
        return Err(Error::Shape(format!("split {split} is not in 1..={}", trunc.rank())));
    }
    if !model.is_abelian() {
        let c = &model.centre().exponents;
        if c[..split].iter().any(|e| *e != Some(0)) {
            return Err(Error::Shape("the first split variables must span part of the declared centre".into()));
        }
    }
    Ok(())
}

/// Commutative truncated polynomials in the central variables.
struct CentralAlgebra<'a> {
    omega: &'a [i64],
    cutoff: i64,
    p: u32,
}

type Poly = BTreeMap<Vec<u32>, u32>;

impl CentralAlgebra<'_> {
    fn weight(&self, a: &[u32]) -> i64 {
        a.iter().zip(self.omega).map(|(&x, &w)| x as i64 * w).sum()
    }

    fn mul(&self, x: &Poly, y: &Poly) -> Poly {
        let mut out = Poly::new();
        for (a, &c) in x {
            for (b, &d) in y {
                let s: Vec<u32> = a.iter().zip(b).map(|(u, v)| u + v).collect();
                if self.weight(&s) >= self.cutoff {
                    continue;
                }
                let e = out.entry(s).or_insert(0);
                *e = fp::add(*e, fp::mul(c, d, self.p), self.p);
            }
        }
        out.retain(|_, c| *c != 0);
        out
    }

    fn val(&self, x: &Poly) -> Option<i64> {
        x.iter().filter(|(_, &c)| c != 0).map(|(a, _)| self.weight(a)).min()
    }
}

/// `f(x) = min_gamma v(tau(r_gamma)) + w(c^gamma)`; the `>= W` marker when no term
/// survives below the cutoff.
pub fn induced_filtration(x: &TruncatedSeries, prime: &CentralPrimeSpec) -> Result<Val> {
    let t = x.trunc();
    let split = prime.split;
    check_central_block(t, split)?;
    let omega = &t.omega()[..split];
    let tail = &t.omega()[split..];
    let mut best: Option<i64> = None;
    for (gamma, r) in relative_normal_form(x, split)? {
        let wc: i64 = gamma.iter().zip(tail).map(|(&g, &w)| g as i64 * w).sum();
        let alg = CentralAlgebra { omega, cutoff: t.cutoff() - wc, p: t.p() };
        let mut poly = Poly::new();
        for (i, c) in r.terms() {
            poly.insert(t.basis()[i][..split].to_vec(), c);
        }
        let image = match &prime.kind {
            PrimeKind::Zero => poly,
            PrimeKind::Graph { target, u } => substitute(&alg, &poly, *target, u),
        };
        if let Some(v) = alg.val(&image) {
            best = Some(best.map_or(v + wc, |b| b.min(v + wc)));
        }
    }
    Ok(match best {
        Some(v) if v < t.cutoff() => Val::Finite(v),
        _ => Val::AtLeast(t.cutoff()),
    })
}

fn substitute(alg: &CentralAlgebra, x: &Poly, target: usize, u: &Poly) -> Poly {
    let top = x.keys().map(|a| a[target]).max().unwrap_or(0);
    let one: Poly = [(vec![0; alg.omega.len()], 1)].into_iter().collect();
    let mut powers = vec![one];
    for _ in 0..top {
        let next = alg.mul(powers.last().unwrap(), u);
        powers.push(next);
    }
    let mut out = Poly::new();
    for (a, &c) in x {
        let mut rest = a.clone();
        rest[target] = 0;
        let mono: Poly = [(rest, c)].into_iter().collect();
        for (k, v) in alg.mul(&mono, &powers[a[target] as usize]) {
            let e = out.entry(k).or_insert(0);
            *e = fp::add(*e, v, alg.p);
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub resolved_triples: usize,
    pub skipped: usize,
    pub superadditivity_violations: usize,
    pub multiplicativity_violations: usize,
    pub membership_checks: usize,
    pub membership_violations: usize,
    pub witnesses: Vec<String>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.superadditivity_violations == 0 && self.multiplicativity_violations == 0 && self.membership_violations == 0
    }
}

/// Random checks that `f` is a ring filtration with multiplicative leading
/// symbols, and that `PkG` (the `f = marker` locus) absorbs products.
pub fn completely_prime_probe<R: Rng + ?Sized>(
    trunc: &Arc<TruncationSpec>,
    prime: &CentralPrimeSpec,
    samples: usize,
    rng: &mut R,
) -> Result<ProbeReport> {
    let half = trunc.cutoff() / 2;
    let gen = prime.generator(trunc)?;
    let mut rep = ProbeReport { samples, ..Default::default() };
    for _ in 0..samples {
        let n1 = rng.random_range(1..=4);
        let n2 = rng.random_range(1..=4);
        let x = TruncatedSeries::random(trunc, half, n1, rng);
        let y = TruncatedSeries::random(trunc, half, n2, rng);
        let xy = x.mul(&y)?;
        let (fx, fy, fxy) = (induced_filtration(&x, prime)?, induced_filtration(&y, prime)?, induced_filtration(&xy, prime)?);
        if fxy.certainly_below(fx.add(fy)) {
            rep.superadditivity_violations += 1;
            rep.witnesses.push(format!("f({x} * {y}) below f(x) + f(y)"));
        }
        match (fx, fy, fxy) {
            (Val::Finite(a), Val::Finite(b), Val::Finite(c)) => {
                rep.resolved_triples += 1;
                if c != a + b {
                    rep.multiplicativity_violations += 1;
                    rep.witnesses.push(format!("f({x} * {y}) = {c}, expected {}", a + b));
                }
            }
            (Val::Finite(a), Val::Finite(b), Val::AtLeast(_)) if a + b < trunc.cutoff() => {
                rep.multiplicativity_violations += 1;
                rep.witnesses.push(format!("product of {x} and {y} fell into PkG"));
            }
            _ => rep.skipped += 1,
        }
        if let Some(g) = &gen {
            let z = TruncatedSeries::random(trunc, half, n1, rng);
            let m = g.mul(&z)?;
            for cand in [m.clone(), m.mul(&y)?, y.mul(&m)?] {
                rep.membership_checks += 1;
                if induced_filtration(&cand, prime)?.is_finite() {
                    rep.membership_violations += 1;
                    rep.witnesses.push(format!("{cand} expected in PkG"));
                }
            }
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct ZalesskiiReport {
    pub depth: u32,
    pub faithful: bool,
    pub dagger: Vec<Vec<u64>>,
    /// `None` when the faithfulness precondition fails and the test is skipped.
    pub controlled: Option<bool>,
    pub tested: Vec<usize>,
    pub witnesses: Vec<ControlWitness>,
    pub rank: usize,
}

/// For a faithful two-sided ideal, test control by the declared centre: stability
/// under `d_i` for every non-central basis position.
pub fn zalesskii_check(trunc: &Arc<TruncationSpec>, gens: &[TruncatedSeries], depth: u32, budget: u64) -> Result<ZalesskiiReport> {
    let model = trunc.model();
    if model.is_abelian() {
        return Err(Error::Model("zalesskii check needs a nilpotent matrix model".into()));
    }
    let z = model.centre();
    model.validate_central(z)?;
    let ideal = IdealSpan::new(trunc, gens, Sidedness::TwoSided)?;
    let dagger = dagger_approx(&ideal, depth, budget)?;
    let faithful = dagger.iter().all(|l| l.iter().all(|&x| x == 0));
    let h = SubgroupSpec { exponents: z.exponents.iter().map(|e| Some(u32::from(*e != Some(0)))).collect() };
    let (controlled, tested, witnesses) = if faithful {
        let r = is_controlled_by(&ideal, &h)?;
        (Some(r.controlled), r.tested, r.witnesses)
    } else {
        (None, tested_positions(&h)?.iter().map(|i| i + 1).collect(), Vec::new())
    };
    Ok(ZalesskiiReport { depth, faithful, dagger, controlled, tested, witnesses, rank: ideal.rank() })
}

/// Spanning monomials of kH for `H = <g_i^{p^{n_i}}>`: exponents divisible by `p^{n_i}`.
pub fn subalgebra_mask(trunc: &Arc<TruncationSpec>, n: &[u32]) -> Vec<bool> {
    let p = trunc.p();
    trunc
        .basis()
        .iter()
        .map(|a| a.iter().zip(n).all(|(&x, &k)| x % p.pow(k) == 0))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatnessReport {
    pub dim_j: usize,
    pub dim_jkg: usize,
    pub dim_intersection: usize,
    pub holds: bool,
}

/// `span(J kG) cap kH = span(J)` where `J` is the right ideal of kH generated by
/// `gens` (which must lie in kH).
pub fn faithful_flatness_check(trunc: &Arc<TruncationSpec>, n: &[u32], gens: &[TruncatedSeries]) -> Result<FlatnessReport> {
    if n.len() != trunc.rank() {
        return Err(Error::Shape("subgroup exponents differ from rank".into()));
    }
    let mask = subalgebra_mask(trunc, n);
    for g in gens {
        if g.terms().any(|(i, _)| !mask[i]) {
            return Err(Error::Shape(format!("generator {g} is not in kH")));
        }
    }
    let p = trunc.p();
    let mut sub_ops = Vec::new();
    let mut all_ops = Vec::new();
    for i in 0..trunc.rank() {
        let b = TruncatedSeries::b(trunc, i);
        all_ops.push(OperatorMatrix::right_mult(&b)?.matrix().clone());
        let h = TruncatedSeries::monomial(trunc, &MultiIndex::unit(trunc.rank(), i), 1).pow(p.pow(n[i]) as u64)?;
        sub_ops.push(OperatorMatrix::right_mult(&h)?.matrix().clone());
    }
    let j = IdealSpan::closure(trunc, gens, &sub_ops, Sidedness::Right)?;
    let u = IdealSpan::closure(trunc, gens, &all_ops, Sidedness::Right)?;
    let inter = u.space.intersect_coordinates_dim(&mask);
    let contained = j.space.rows.iter().all(|r| u.space.contains(r) && r.iter().zip(&mask).all(|(&x, &m)| m || x == 0));
    Ok(FlatnessReport { dim_j: j.rank(), dim_jkg: u.rank(), dim_intersection: inter, holds: contained && inter == j.rank() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupModel, ModelSpec};

    fn abelian(p: u64, omega: &[&str], w: i64, m: u32) -> Arc<TruncationSpec> {
        let model = GroupModel::load(&ModelSpec::Abelian { p, d: omega.len(), m, omega: omega.iter().map(|s| s.to_string()).collect() })
            .unwrap();
        TruncationSpec::new(Arc::new(model), w).unwrap()
    }

    #[test]
    fn trivial_spans() {
        let t = abelian(3, &["1", "1"], 5, 3);
        assert_eq!(IdealSpan::new(&t, &[TruncatedSeries::one(&t)], Sidedness::Right).unwrap().rank(), t.size());
        assert_eq!(IdealSpan::new(&t, &[], Sidedness::Right).unwrap().rank(), 0);
        let b1 = IdealSpan::new(&t, &[TruncatedSeries::b(&t, 0)], Sidedness::Right).unwrap();
        let expected = t.basis().iter().filter(|a| a[0] >= 1).count();
        assert_eq!(b1.rank(), expected);
    }

    #[test]
    fn control_examples() {
        let t = abelian(3, &["1", "1"], 6, 3);
        let i = IdealSpan::new(&t, &[TruncatedSeries::b(&t, 0)], Sidedness::Right).unwrap();
        let h = |a, b| SubgroupSpec { exponents: vec![Some(a), Some(b)] };
        assert!(is_controlled_by(&i, &h(0, 0)).unwrap().controlled);
        assert!(is_controlled_by(&i, &h(0, 1)).unwrap().controlled);
        let r = is_controlled_by(&i, &h(1, 0)).unwrap();
        assert!(!r.controlled);
        assert_eq!(r.witnesses[0].direction, 1);
        let m = IdealSpan::maximal(&t).unwrap();
        assert!(!is_controlled_by(&m, &h(0, 1)).unwrap().controlled);
        assert_eq!(controller_approx(&m).unwrap(), h(0, 0));
        assert_eq!(controller_approx(&i).unwrap(), h(0, 1));
    }

    #[test]
    fn dagger_examples() {
        let t = abelian(3, &["1", "1"], 5, 3);
        assert_eq!(dagger_approx(&IdealSpan::maximal(&t).unwrap(), 1, 100).unwrap().len(), 9);
        assert_eq!(dagger_approx(&IdealSpan::new(&t, &[], Sidedness::Right).unwrap(), 1, 100).unwrap(), vec![vec![0, 0]]);
        assert!(matches!(dagger_approx(&IdealSpan::maximal(&t).unwrap(), 2, 10), Err(Error::Budget(_))));
    }

    #[test]
    fn filtration_examples() {
        let t = abelian(3, &["1", "1", "1"], 8, 3);
        let x = TruncatedSeries::parse(&t, "b1 + b2*b3").unwrap();
        assert_eq!(induced_filtration(&x, &CentralPrimeSpec::zero(2)).unwrap(), x.w_val());
        let g = CentralPrimeSpec::graph(&t, 2, 0, "b2^2").unwrap();
        assert_eq!(induced_filtration(&TruncatedSeries::b(&t, 0), &g).unwrap(), Val::Finite(2));
        let gen = g.generator(&t).unwrap().unwrap();
        assert_eq!(induced_filtration(&gen, &g).unwrap(), Val::AtLeast(8));
        assert!(CentralPrimeSpec::graph(&t, 2, 0, "b2").is_err());
    }
}
