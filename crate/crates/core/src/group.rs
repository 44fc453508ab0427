//! Complete p-valued groups of finite rank, presented by an ordered basis.
//!
//! Two presentations are supported: abelian groups `Z_p^d` with coordinatewise
//! multiplication, and closed subgroups of unitriangular `n x n` matrices over `Z_p`
//! whose generators are congruent to the identity mod p. In the matrix case
//! logarithms and exponentials are finite sums (the matrices are unipotent and
//! `p > n`), so everything is exact at the working precision.

use crate::error::{Error, Result};
use crate::padic::{checked_modulus, is_prime, PadicInt};
use crate::val::Val;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

/// A p-valuation on the ordered basis: `omega(g_i) = values[i] / e`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PValuation {
    values: Vec<i64>,
    e: i64,
}

impl PValuation {
    pub fn new(values: Vec<i64>, e: i64) -> Result<Self> {
        if e <= 0 {
            return Err(Error::Model(format!("denominator e must be positive, got {e}")));
        }
        Ok(PValuation { values, e })
    }

    /// Parse strings of the form `a` or `a/b` onto a shared denominator.
    pub fn parse(items: &[String]) -> Result<Self> {
        let mut fracs = Vec::with_capacity(items.len());
        for s in items {
            let (n, d) = match s.split_once('/') {
                Some((n, d)) => (n.trim(), d.trim()),
                None => (s.trim(), "1"),
            };
            let n: i64 = n.parse().map_err(|_| Error::Parse(format!("bad omega value {s:?}")))?;
            let d: i64 = d.parse().map_err(|_| Error::Parse(format!("bad omega value {s:?}")))?;
            if d <= 0 {
                return Err(Error::Parse(format!("bad omega denominator in {s:?}")));
            }
            fracs.push((n, d));
        }
        let e = fracs.iter().fold(1i64, |acc, &(_, d)| lcm(acc, d));
        let values = fracs.iter().map(|&(n, d)| n * (e / d)).collect();
        PValuation::new(values, e)
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn e(&self) -> i64 {
        self.e
    }

    pub fn min(&self) -> i64 {
        self.values.iter().copied().min().unwrap_or(0)
    }

    pub fn max(&self) -> i64 {
        self.values.iter().copied().max().unwrap_or(0)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

/// Square matrix over Z/q with q = p^k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZMat {
    pub n: usize,
    pub a: Vec<u64>,
}

impl ZMat {
    pub fn identity(n: usize) -> Self {
        let mut a = vec![0; n * n];
        for i in 0..n {
            a[i * n + i] = 1;
        }
        ZMat { n, a }
    }

    pub fn zero(n: usize) -> Self {
        ZMat { n, a: vec![0; n * n] }
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.a[r * self.n + c]
    }

    fn mul(&self, o: &ZMat, q: u64) -> ZMat {
        let n = self.n;
        let mut out = vec![0u64; n * n];
        for i in 0..n {
            for k in 0..n {
                let x = self.a[i * n + k];
                if x == 0 {
                    continue;
                }
                for j in 0..n {
                    let y = o.a[k * n + j];
                    if y != 0 {
                        out[i * n + j] = ((out[i * n + j] as u128 + x as u128 * y as u128) % q as u128) as u64;
                    }
                }
            }
        }
        ZMat { n, a: out }
    }

    fn add_scaled(&mut self, o: &ZMat, c: u64, q: u64) {
        for (x, &y) in self.a.iter_mut().zip(&o.a) {
            *x = ((*x as u128 + c as u128 * y as u128) % q as u128) as u64;
        }
    }

    fn scaled(&self, c: u64, q: u64) -> ZMat {
        ZMat { n: self.n, a: self.a.iter().map(|&x| ((x as u128 * c as u128) % q as u128) as u64).collect() }
    }

    fn is_zero(&self) -> bool {
        self.a.iter().all(|&x| x == 0)
    }
}

fn inv_mod(a: u64, q: u64) -> Option<u64> {
    let (mut t, mut nt) = (0i128, 1i128);
    let (mut r, mut nr) = (q as i128, a as i128 % q as i128);
    while nr != 0 {
        let quo = r / nr;
        (t, nt) = (nt, t - quo * nt);
        (r, nr) = (nr, r - quo * nr);
    }
    if r != 1 {
        return None;
    }
    Some(t.rem_euclid(q as i128) as u64)
}

fn vp_u64(mut x: u64, p: u64) -> u32 {
    if x == 0 {
        return u32::MAX;
    }
    let mut k = 0;
    while x % p == 0 {
        x /= p;
        k += 1;
    }
    k
}

#[derive(Debug, Clone)]
struct Unitriangular {
    n: usize,
    /// Matrix modulus `p^mmat`, with `mmat = M + kmax` so coordinates are exact mod p^M.
    q: u64,
    generators: Vec<ZMat>,
    logs: Vec<ZMat>,
    pivots: Vec<(usize, usize)>,
    pivot_val: Vec<u32>,
    pivot_unit_inv: Vec<u64>,
}

impl Unitriangular {
    fn log(&self, a: &ZMat) -> ZMat {
        let (n, q) = (self.n, self.q);
        let mut nil = a.clone();
        for i in 0..n {
            nil.a[i * n + i] = (nil.a[i * n + i] + q - 1) % q;
        }
        let mut out = ZMat::zero(n);
        let mut pw = nil.clone();
        for k in 1..n {
            let c = inv_mod(k as u64, q).expect("k < p is a unit");
            let c = if k % 2 == 1 { c } else { (q - c) % q };
            out.add_scaled(&pw, c, q);
            pw = pw.mul(&nil, q);
        }
        out
    }

    fn exp(&self, x: &ZMat) -> ZMat {
        let (n, q) = (self.n, self.q);
        let mut out = ZMat::identity(n);
        let mut pw = ZMat::identity(n);
        let mut fact: u64 = 1;
        for k in 1..n {
            pw = pw.mul(x, q);
            fact = fact * k as u64 % q;
            out.add_scaled(&pw, inv_mod(fact, q).expect("k! is a unit"), q);
        }
        out
    }

    fn basis_pow(&self, i: usize, lambda: u64) -> ZMat {
        self.exp(&self.logs[i].scaled(lambda % self.q, self.q))
    }

    fn native(&self, coords: &[u64]) -> ZMat {
        let mut acc = ZMat::identity(self.n);
        for (i, &c) in coords.iter().enumerate() {
            if c != 0 {
                acc = acc.mul(&self.basis_pow(i, c), self.q);
            }
        }
        acc
    }

    /// Lie coordinates of `x` in the basis `log g_i`, mod q / p^{pivot_val}.
    fn lie_coords(&self, x: &ZMat, p: u64) -> Result<Vec<u64>> {
        let q = self.q;
        let mut rest = x.clone();
        let mut mu = Vec::with_capacity(self.logs.len());
        for (i, l) in self.logs.iter().enumerate() {
            let (r, c) = self.pivots[i];
            let v = rest.get(r, c);
            let pk = p.pow(self.pivot_val[i]);
            if v % pk != 0 {
                return Err(Error::NotRepresentable(format!("pivot ({r},{c}) of basis {i} not divisible")));
            }
            let m = ((v / pk) as u128 * self.pivot_unit_inv[i] as u128 % q as u128) as u64;
            rest.add_scaled(l, (q - m) % q, q);
            mu.push(m);
        }
        if !rest.is_zero() {
            return Err(Error::NotRepresentable("matrix outside the Lie lattice".into()));
        }
        Ok(mu)
    }

    fn theta(&self, a: &ZMat, p: u64, pm: u64) -> Result<Vec<u64>> {
        let q = self.q;
        for r in 0..self.n {
            for c in 0..self.n {
                let v = a.get(r, c);
                let ok = if r == c { v == 1 } else if r > c { v == 0 } else { v % p == 0 };
                if !ok {
                    return Err(Error::NotRepresentable("matrix is not unitriangular mod p".into()));
                }
            }
        }
        let mut cur = a.clone();
        let mut out = Vec::with_capacity(self.logs.len());
        for i in 0..self.logs.len() {
            let x = self.log(&cur);
            let (r, c) = self.pivots[i];
            let v = x.get(r, c);
            let pk = p.pow(self.pivot_val[i]);
            if v % pk != 0 {
                return Err(Error::NotRepresentable(format!("divisibility failure at basis {i}")));
            }
            let lam = ((v / pk) as u128 * self.pivot_unit_inv[i] as u128 % q as u128) as u64;
            let lam = lam % pm;
            cur = self.basis_pow(i, (q - lam) % q).mul(&cur, q);
            out.push(lam);
        }
        if cur != ZMat::identity(self.n) {
            return Err(Error::NotRepresentable("residual after elimination is not the identity".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Abelian,
    Unitriangular(Box<Unitriangular>),
}

/// Description of a model before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Abelian {
        p: u64,
        d: usize,
        m: u32,
        omega: Vec<String>,
    },
    Unitriangular {
        p: u64,
        n: usize,
        m: u32,
        /// Row-major integer matrices.
        generators: Vec<Vec<Vec<i64>>>,
        omega: Vec<String>,
        /// Basis positions spanning the declared centre.
        #[serde(default)]
        centre: Option<Vec<usize>>,
    },
}

/// A validated model of a complete p-valued group with an ordered basis.
#[derive(Debug, Clone)]
pub struct GroupModel {
    p: u64,
    d: usize,
    m: u32,
    pm: u64,
    omega: PValuation,
    centre: SubgroupSpec,
    kind: Kind,
}

/// Second-kind coordinates: `g = g_1^{l_1} ... g_d^{l_d}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    pub coords: Vec<PadicInt>,
}

impl GroupElement {
    pub fn residues(&self) -> Vec<u64> {
        self.coords.iter().map(|c| c.residue()).collect()
    }
}

/// Model-native form of an element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Native {
    Coords(Vec<u64>),
    Matrix(ZMat),
}

/// Closed subgroup with ordered basis `{g_i^{p^{n_i}}}`; `None` omits `g_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubgroupSpec {
    pub exponents: Vec<Option<u32>>,
}

impl SubgroupSpec {
    pub fn whole(d: usize) -> Self {
        SubgroupSpec { exponents: vec![Some(0); d] }
    }

    /// Componentwise containment `self <= other` of basis-aligned subgroups.
    pub fn is_subgroup_of(&self, other: &SubgroupSpec) -> bool {
        self.exponents.iter().zip(&other.exponents).all(|(a, b)| match (a, b) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(x), Some(y)) => x >= y,
        })
    }
}

fn parse_omega(omega: &[String], d: usize) -> Result<PValuation> {
    let om = PValuation::parse(omega)?;
    if om.values.len() != d {
        return Err(Error::Model(format!("omega has {} entries, rank is {d}", om.values.len())));
    }
    Ok(om)
}

impl GroupModel {
    /// Validate a model description.
    pub fn load(spec: &ModelSpec) -> Result<Self> {
        match spec {
            ModelSpec::Abelian { p, d, m, omega } => {
                let (p, d, m) = (*p, *d, *m);
                let pm = Self::check_pm(p, m)?;
                let omega = parse_omega(omega, d)?;
                let model = GroupModel {
                    p,
                    d,
                    m,
                    pm,
                    omega,
                    centre: SubgroupSpec::whole(d),
                    kind: Kind::Abelian,
                };
                model.validate()?;
                Ok(model)
            }
            ModelSpec::Unitriangular { p, n, m, generators, omega, centre } => {
                let (p, n, m) = (*p, *n, *m);
                if !is_prime(p) {
                    return Err(Error::NotPrime(p));
                }
                if p == 2 || p <= n as u64 {
                    return Err(Error::Model(format!("unitriangular models need p odd and p > n (p={p}, n={n})")));
                }
                Self::check_pm(p, m)?;
                let d = generators.len();
                let omega = parse_omega(omega, d)?;
                let uni = Self::build_unitriangular(p, n, m, generators)?;
                let centre = match centre {
                    Some(ix) => {
                        let mut ex = vec![None; d];
                        for &i in ix {
                            if i >= d {
                                return Err(Error::Model(format!("centre index {i} out of range")));
                            }
                            ex[i] = Some(0);
                        }
                        SubgroupSpec { exponents: ex }
                    }
                    None => SubgroupSpec { exponents: vec![None; d] },
                };
                let model = GroupModel {
                    p,
                    d,
                    m,
                    pm: p.pow(m),
                    omega,
                    centre,
                    kind: Kind::Unitriangular(Box::new(uni)),
                };
                model.validate()?;
                Ok(model)
            }
        }
    }

    fn check_pm(p: u64, m: u32) -> Result<u64> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if m < 1 {
            return Err(Error::BadPrecision(m));
        }
        checked_modulus(p, m).ok_or(Error::PrecisionOverflow { p, m })
    }

    fn build_unitriangular(p: u64, n: usize, m: u32, gens: &[Vec<Vec<i64>>]) -> Result<Unitriangular> {
        if gens.is_empty() {
            return Err(Error::Model("no generators".into()));
        }
        // First pass at a generous modulus to find pivot valuations.
        let probe_m = m + 8;
        let q0 = checked_modulus(p, probe_m).ok_or(Error::PrecisionOverflow { p, m: probe_m })?;
        let to_mat = |g: &Vec<Vec<i64>>, q: u64| -> Result<ZMat> {
            if g.len() != n || g.iter().any(|r| r.len() != n) {
                return Err(Error::Model(format!("generator is not {n}x{n}")));
            }
            let mut a = vec![0u64; n * n];
            for r in 0..n {
                for c in 0..n {
                    let v = g[r][c];
                    let ok = if r == c { v == 1 } else if r > c { v == 0 } else { v.rem_euclid(p as i64) == 0 };
                    if !ok {
                        return Err(Error::Model(format!(
                            "generator entry ({r},{c}) = {v}: need unitriangular with off-diagonal entries divisible by p"
                        )));
                    }
                    a[r * n + c] = v.rem_euclid(q as i64) as u64;
                }
            }
            Ok(ZMat { n, a })
        };
        let skeleton = |q: u64, mats: Vec<ZMat>| Unitriangular {
            n,
            q,
            generators: mats,
            logs: vec![],
            pivots: vec![],
            pivot_val: vec![],
            pivot_unit_inv: vec![],
        };
        let mats0 = gens.iter().map(|g| to_mat(g, q0)).collect::<Result<Vec<_>>>()?;
        let mut u0 = skeleton(q0, mats0);
        u0.logs = u0.generators.iter().map(|g| u0.log(g)).collect();
        let mut pivots = Vec::new();
        let mut pivot_val = Vec::new();
        for i in 0..u0.logs.len() {
            let mut best: Option<(usize, u32, usize, usize)> = None;
            for r in 0..n {
                for c in r + 1..n {
                    let v = u0.logs[i].get(r, c);
                    if v == 0 || u0.logs[i + 1..].iter().any(|l| l.get(r, c) != 0) {
                        continue;
                    }
                    let key = (c - r, vp_u64(v, p), r, c);
                    if best.map_or(true, |b| key < b) {
                        best = Some(key);
                    }
                }
            }
            let (_, v, r, c) = best.ok_or_else(|| Error::Model(format!("basis element {i} has no pivot position")))?;
            pivots.push((r, c));
            pivot_val.push(v);
        }
        let kmax = *pivot_val.iter().max().unwrap();
        let mmat = m + kmax;
        let q = checked_modulus(p, mmat).ok_or(Error::PrecisionOverflow { p, m: mmat })?;
        let mats = gens.iter().map(|g| to_mat(g, q)).collect::<Result<Vec<_>>>()?;
        let mut u = skeleton(q, mats);
        u.logs = u.generators.iter().map(|g| u.log(g)).collect();
        let mut inv = Vec::new();
        for (i, &(r, c)) in pivots.iter().enumerate() {
            let unit = u.logs[i].get(r, c) / p.pow(pivot_val[i]);
            inv.push(inv_mod(unit % q, q).ok_or_else(|| Error::Model("pivot unit not invertible".into()))?);
        }
        u.pivots = pivots;
        u.pivot_val = pivot_val;
        u.pivot_unit_inv = inv;
        Ok(u)
    }

    fn validate(&self) -> Result<()> {
        let e = self.omega.e;
        for (i, &w) in self.omega.values.iter().enumerate() {
            if w * (self.p as i64 - 1) <= e {
                return Err(Error::Model(format!("omega(g_{}) = {} is not > 1/(p-1)", i + 1, Val::Finite(w).display(e))));
            }
        }
        for i in 0..self.d {
            let g = self.basis(i);
            let back = self.theta_coords(&self.to_native(&g))?;
            if back != g {
                return Err(Error::Model(format!("theta round trip fails on g_{}", i + 1)));
            }
        }
        for i in 0..self.d {
            for j in 0..self.d {
                let (gi, gj) = (self.basis(i), self.basis(j));
                let c = self.commutator(&gi, &gj)?;
                let lhs = self.omega_of(&c);
                let rhs = self.omega.values[i] + self.omega.values[j];
                if let Val::Finite(v) = lhs {
                    if v <= rhs {
                        return Err(Error::Model(format!(
                            "omega([g_{}, g_{}]) = {} is not > omega(g_{}) + omega(g_{})",
                            i + 1,
                            j + 1,
                            lhs.display(e),
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        let mut rng = Pcg64::seed_from_u64(0x5eed_0001);
        for k in 0..24 {
            let x = self.random_element(&mut rng);
            let y = self.random_element(&mut rng);
            if let Some(msg) = self.check_axioms(&x, &y)? {
                return Err(Error::Model(format!("sample {k}: {msg}")));
            }
            if self.theta_coords(&self.to_native(&x))? != x {
                return Err(Error::Model(format!("sample {k}: theta round trip fails")));
            }
        }
        self.validate_central(&self.centre)?;
        Ok(())
    }

    /// Check the p-valuation axioms on one pair; `Some(description)` on violation.
    pub fn check_axioms(&self, x: &GroupElement, y: &GroupElement) -> Result<Option<String>> {
        let (wx, wy) = (self.omega_of(x), self.omega_of(y));
        let xy = self.mul(x, &self.inv(y)?)?;
        if self.omega_of(&xy).certainly_below(wx.min(wy)) {
            return Ok(Some("omega(xy^-1) < min(omega(x), omega(y))".into()));
        }
        let c = self.commutator(x, y)?;
        if self.omega_of(&c).certainly_below(wx.add(wy)) {
            return Ok(Some("omega([x,y]) < omega(x) + omega(y)".into()));
        }
        let xp = self.pow_int(x, self.p as i128)?;
        let lhs = self.omega_of(&xp);
        let rhs = wx.shift(self.omega.e);
        let bad = match (lhs, rhs) {
            (Val::Finite(a), Val::Finite(b)) => a != b,
            (Val::AtLeast(a), Val::Finite(b)) => b < a,
            (Val::Finite(a), Val::AtLeast(b)) => a < b,
            _ => false,
        };
        if bad {
            return Ok(Some("omega(x^p) != omega(x) + 1".into()));
        }
        Ok(None)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn rank(&self) -> usize {
        self.d
    }

    pub fn precision(&self) -> u32 {
        self.m
    }

    pub fn omega(&self) -> &PValuation {
        &self.omega
    }

    pub fn centre(&self) -> &SubgroupSpec {
        &self.centre
    }

    pub fn is_abelian(&self) -> bool {
        matches!(self.kind, Kind::Abelian)
    }

    /// Matrix size for unitriangular models.
    pub fn matrix_size(&self) -> Option<usize> {
        match &self.kind {
            Kind::Abelian => None,
            Kind::Unitriangular(u) => Some(u.n),
        }
    }

    pub fn element(&self, coords: &[i128]) -> Result<GroupElement> {
        if coords.len() != self.d {
            return Err(Error::Mismatch(format!("expected {} coordinates, got {}", self.d, coords.len())));
        }
        Ok(GroupElement {
            coords: coords.iter().map(|&c| PadicInt::make(c, self.p, self.m)).collect::<Result<_>>()?,
        })
    }

    pub(crate) fn from_residues(&self, r: &[u64]) -> GroupElement {
        GroupElement { coords: r.iter().map(|&c| PadicInt::from_residue_unchecked(c % self.pm, self.p, self.m)).collect() }
    }

    pub fn identity(&self) -> GroupElement {
        self.from_residues(&vec![0; self.d])
    }

    pub fn basis(&self, i: usize) -> GroupElement {
        let mut r = vec![0; self.d];
        r[i] = 1;
        self.from_residues(&r)
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        let r: Vec<u64> = (0..self.d).map(|_| rng.random_range(0..self.pm)).collect();
        self.from_residues(&r)
    }

    fn check_elem(&self, a: &GroupElement) -> Result<()> {
        if a.coords.len() != self.d || a.coords.iter().any(|c| c.p() != self.p || c.precision() != self.m) {
            return Err(Error::Mismatch("element does not belong to this model".into()));
        }
        Ok(())
    }

    pub(crate) fn mul_raw(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        match &self.kind {
            Kind::Abelian => a.iter().zip(b).map(|(&x, &y)| (x + y) % self.pm).collect(),
            Kind::Unitriangular(u) => {
                let m = u.native(a).mul(&u.native(b), u.q);
                u.theta(&m, self.p, self.pm).expect("products of group elements are representable")
            }
        }
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.check_elem(a)?;
        self.check_elem(b)?;
        Ok(self.from_residues(&self.mul_raw(&a.residues(), &b.residues())))
    }

    pub fn inv(&self, a: &GroupElement) -> Result<GroupElement> {
        self.check_elem(a)?;
        self.pow_int(a, -1)
    }

    /// `a^lambda`; in the matrix case via `exp(lambda log a)`.
    pub fn pow(&self, a: &GroupElement, lambda: &PadicInt) -> Result<GroupElement> {
        self.check_elem(a)?;
        if lambda.p() != self.p || lambda.precision() != self.m {
            return Err(Error::Mismatch("exponent precision differs from model".into()));
        }
        self.pow_int(a, lambda.residue() as i128)
    }

    pub fn pow_int(&self, a: &GroupElement, lambda: i128) -> Result<GroupElement> {
        self.check_elem(a)?;
        match &self.kind {
            Kind::Abelian => {
                let l = lambda.rem_euclid(self.pm as i128) as u128;
                let r: Vec<u64> = a.residues().iter().map(|&x| (x as u128 * l % self.pm as u128) as u64).collect();
                Ok(self.from_residues(&r))
            }
            Kind::Unitriangular(u) => {
                let l = lambda.rem_euclid(u.q as i128) as u64;
                let x = u.log(&u.native(&a.residues())).scaled(l, u.q);
                let r = u.theta(&u.exp(&x), self.p, self.pm)?;
                Ok(self.from_residues(&r))
            }
        }
    }

    /// `x^-1 y^-1 x y`.
    pub fn commutator(&self, x: &GroupElement, y: &GroupElement) -> Result<GroupElement> {
        let xi = self.inv(x)?;
        let yi = self.inv(y)?;
        self.mul(&self.mul(&xi, &yi)?, &self.mul(x, y)?)
    }

    pub fn to_native(&self, a: &GroupElement) -> Native {
        match &self.kind {
            Kind::Abelian => Native::Coords(a.residues()),
            Kind::Unitriangular(u) => Native::Matrix(u.native(&a.residues())),
        }
    }

    /// Coordinates of the second kind, by triangular elimination in the matrix case.
    pub fn theta_coords(&self, a: &Native) -> Result<GroupElement> {
        match (&self.kind, a) {
            (Kind::Abelian, Native::Coords(c)) if c.len() == self.d => Ok(self.from_residues(c)),
            (Kind::Unitriangular(u), Native::Matrix(m)) if m.n == u.n => Ok(self.from_residues(&u.theta(m, self.p, self.pm)?)),
            _ => Err(Error::NotRepresentable("native form does not match the model kind".into())),
        }
    }

    /// `min_i omega(g_i) + v_p(lambda_i)`; the identity gives a precision-limited bound.
    pub fn omega_of(&self, a: &GroupElement) -> Val {
        omega_of_coords(&self.omega, &a.coords)
    }

    fn is_central_elem(&self, a: &GroupElement) -> Result<bool> {
        for i in 0..self.d {
            let g = self.basis(i);
            if self.mul(a, &g)? != self.mul(&g, a)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Generators of a subgroup spec, as elements.
    pub fn subgroup_generators(&self, h: &SubgroupSpec) -> Vec<(usize, GroupElement)> {
        h.exponents
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.map(|n| (i, self.pow_int(&self.basis(i), (self.p as i128).pow(n)).unwrap())))
            .collect()
    }

    pub fn validate_central(&self, z: &SubgroupSpec) -> Result<()> {
        for (i, h) in self.subgroup_generators(z) {
            if !self.is_central_elem(&h)? {
                return Err(Error::Subgroup(format!("declared centre generator g_{} is not central", i + 1)));
            }
        }
        Ok(())
    }

    /// Membership of an element in a basis-aligned subgroup via its coordinates.
    pub fn contains(&self, h: &SubgroupSpec, a: &GroupElement) -> bool {
        a.coords.iter().zip(&h.exponents).all(|(c, e)| match e {
            None => c.is_zero(),
            Some(n) => match c.vp() {
                Val::Finite(v) => v >= *n as i64,
                Val::AtLeast(_) => true,
            },
        })
    }

    pub fn subgroup_from_exponents(&self, exponents: &[u32]) -> Result<SubgroupSpec> {
        self.subgroup(exponents.iter().map(|&n| Some(n)).collect())
    }

    /// Validate closure of a basis-aligned subgroup on pairs of its generators.
    pub fn subgroup(&self, exponents: Vec<Option<u32>>) -> Result<SubgroupSpec> {
        if exponents.len() != self.d {
            return Err(Error::Subgroup(format!("expected {} exponents", self.d)));
        }
        let h = SubgroupSpec { exponents };
        let gens = self.subgroup_generators(&h);
        for (i, a) in &gens {
            for (j, b) in &gens {
                let prod = self.mul(a, b)?;
                if !self.contains(&h, &prod) {
                    return Err(Error::Subgroup(format!("product of generators {} and {} leaves the subgroup", i + 1, j + 1)));
                }
            }
        }
        Ok(h)
    }
}

pub fn omega_of_coords(omega: &PValuation, coords: &[PadicInt]) -> Val {
    let mut best: Option<i64> = None;
    let mut bound = i64::MAX;
    for (c, &w) in coords.iter().zip(&omega.values) {
        match c.vp() {
            Val::Finite(v) => {
                let x = w + omega.e * v;
                best = Some(best.map_or(x, |b| b.min(x)));
            }
            Val::AtLeast(v) => bound = bound.min(w + omega.e * v),
        }
    }
    match best {
        Some(b) => Val::Finite(b),
        None => Val::AtLeast(bound),
    }
}

/// Automorphism data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutKind {
    /// Conjugation `a -> h a h^-1`.
    Inner(GroupElement),
    /// `exp(A log a)` with `A` acting on coordinates in the basis `log g_i`.
    LinearOnLog(Vec<Vec<u64>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automorphism {
    kind: AutKind,
    images: Vec<GroupElement>,
}

impl Automorphism {
    pub fn identity(model: &GroupModel) -> Self {
        Automorphism { kind: AutKind::Inner(model.identity()), images: (0..model.d).map(|i| model.basis(i)).collect() }
    }

    pub fn inner(model: &GroupModel, h: GroupElement) -> Result<Self> {
        model.check_elem(&h)?;
        Self::build(model, AutKind::Inner(h))
    }

    pub fn linear_on_log(model: &GroupModel, a: &[Vec<i64>]) -> Result<Self> {
        let d = model.d;
        if a.len() != d || a.iter().any(|r| r.len() != d) {
            return Err(Error::Automorphism(format!("matrix must be {d}x{d}")));
        }
        let q = model.lie_modulus();
        let a: Vec<Vec<u64>> = a.iter().map(|r| r.iter().map(|&x| x.rem_euclid(q as i64) as u64).collect()).collect();
        if det_mod_p(&a, model.p) == 0 {
            return Err(Error::Automorphism("matrix is singular mod p".into()));
        }
        Self::build(model, AutKind::LinearOnLog(a))
    }

    fn build(model: &GroupModel, kind: AutKind) -> Result<Self> {
        let mut phi = Automorphism { kind, images: vec![] };
        phi.images = (0..model.d).map(|i| phi.apply_direct(model, &model.basis(i))).collect::<Result<_>>()?;
        for i in 0..model.d {
            for j in 0..model.d {
                let prod = model.mul(&model.basis(i), &model.basis(j))?;
                let lhs = phi.apply_direct(model, &prod)?;
                let rhs = model.mul(&phi.images[i], &phi.images[j])?;
                if lhs != rhs {
                    return Err(Error::Automorphism(format!(
                        "not a homomorphism on the pair (g_{}, g_{})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let mut rng = Pcg64::seed_from_u64(0x5eed_0002);
        let deg = phi.deg_omega(model, 16, &mut rng)?;
        let e = model.omega.e;
        if let Val::Finite(v) = deg {
            if v * (model.p as i64 - 1) <= e {
                return Err(Error::Automorphism(format!("deg_omega estimate {} is not > 1/(p-1)", deg.display(e))));
            }
        }
        Ok(phi)
    }

    pub fn kind(&self) -> &AutKind {
        &self.kind
    }

    /// Cached images of the basis elements.
    pub fn images(&self) -> &[GroupElement] {
        &self.images
    }

    fn apply_direct(&self, model: &GroupModel, a: &GroupElement) -> Result<GroupElement> {
        match &self.kind {
            AutKind::Inner(h) => model.mul(&model.mul(h, a)?, &model.inv(h)?),
            AutKind::LinearOnLog(mat) => match &model.kind {
                Kind::Abelian => {
                    let r = a.residues();
                    let pm = model.pm as u128;
                    let out: Vec<u64> = mat
                        .iter()
                        .map(|row| (row.iter().zip(&r).map(|(&x, &y)| x as u128 * y as u128 % pm).sum::<u128>() % pm) as u64)
                        .collect();
                    Ok(model.from_residues(&out))
                }
                Kind::Unitriangular(u) => {
                    let mu = u.lie_coords(&u.log(&u.native(&a.residues())), model.p)?;
                    let q = u.q as u128;
                    let mut x = ZMat::zero(u.n);
                    for (i, row) in mat.iter().enumerate() {
                        let c = (row.iter().zip(&mu).map(|(&s, &t)| s as u128 * t as u128 % q).sum::<u128>() % q) as u64;
                        x.add_scaled(&u.logs[i], c, u.q);
                    }
                    Ok(model.from_residues(&u.theta(&u.exp(&x), model.p, model.pm)?))
                }
            },
        }
    }

    pub fn apply(&self, model: &GroupModel, a: &GroupElement) -> Result<GroupElement> {
        model.check_elem(a)?;
        self.apply_direct(model, a)
    }

    /// `phi^n` for `n >= 0`.
    pub fn power(&self, model: &GroupModel, n: u64) -> Result<Automorphism> {
        let kind = match &self.kind {
            AutKind::Inner(h) => AutKind::Inner(model.pow_int(h, n as i128)?),
            AutKind::LinearOnLog(a) => {
                let q = model.lie_modulus() as u128;
                let d = model.d;
                let mul = |x: &Vec<Vec<u64>>, y: &Vec<Vec<u64>>| -> Vec<Vec<u64>> {
                    (0..d)
                        .map(|i| (0..d).map(|j| ((0..d).map(|k| x[i][k] as u128 * y[k][j] as u128 % q).sum::<u128>() % q) as u64).collect())
                        .collect()
                };
                let mut acc: Vec<Vec<u64>> = (0..d).map(|i| (0..d).map(|j| u64::from(i == j)).collect()).collect();
                let mut base = a.clone();
                let mut e = n;
                while e > 0 {
                    if e & 1 == 1 {
                        acc = mul(&acc, &base);
                    }
                    base = mul(&base, &base);
                    e >>= 1;
                }
                AutKind::LinearOnLog(acc)
            }
        };
        let mut phi = Automorphism { kind, images: vec![] };
        phi.images = (0..model.d).map(|i| phi.apply_direct(model, &model.basis(i))).collect::<Result<_>>()?;
        Ok(phi)
    }

    /// `psi(g) = phi(g) g^-1`.
    pub fn psi(&self, model: &GroupModel, g: &GroupElement) -> Result<GroupElement> {
        model.mul(&self.apply(model, g)?, &model.inv(g)?)
    }

    /// Sampled estimate of `inf_g omega(phi(g) g^-1) - omega(g)` over the basis and
    /// `samples` random elements. Resolved values take precedence over bounds.
    pub fn deg_omega<R: Rng + ?Sized>(&self, model: &GroupModel, samples: usize, rng: &mut R) -> Result<Val> {
        let mut pts: Vec<GroupElement> = (0..model.d).map(|i| model.basis(i)).collect();
        pts.extend((0..samples).map(|_| model.random_element(rng)));
        let mut finite: Option<i64> = None;
        let mut bound = i64::MAX;
        for g in pts {
            let wg = match model.omega_of(&g) {
                Val::Finite(v) => v,
                Val::AtLeast(_) => continue,
            };
            match model.omega_of(&self.psi(model, &g)?) {
                Val::Finite(v) => finite = Some(finite.map_or(v - wg, |f| f.min(v - wg))),
                Val::AtLeast(v) => bound = bound.min(v - wg),
            }
        }
        Ok(match finite {
            Some(f) => Val::Finite(f),
            None => Val::AtLeast(bound),
        })
    }

    /// Whether `phi(g_i) g_i^-1` lies in `z` for every basis element.
    pub fn is_trivial_mod_centre(&self, model: &GroupModel, z: &SubgroupSpec) -> Result<bool> {
        model.validate_central(z)?;
        for i in 0..model.d {
            if !model.contains(z, &self.psi(model, &model.basis(i))?) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `(phi^{p^r}(g) g^-1)^{p^-r}` by coordinate division in the declared centre.
    /// The result has coordinate precision `M - r`.
    pub fn z_apply(&self, model: &GroupModel, r: u32, g: &GroupElement) -> Result<GroupElement> {
        let pr = self.z_power(model, r)?;
        z_from_power(model, &pr, r, g)
    }

    /// `z_r(phi)` on each basis element.
    pub fn z_of_automorphism(&self, model: &GroupModel, r: u32) -> Result<Vec<GroupElement>> {
        let pr = self.z_power(model, r)?;
        (0..model.d).map(|i| z_from_power(model, &pr, r, &model.basis(i))).collect()
    }

    fn z_power(&self, model: &GroupModel, r: u32) -> Result<Automorphism> {
        if r + 1 > model.m {
            return Err(Error::NoRoot(format!("r = {r} exceeds M - 1 = {}", model.m - 1)));
        }
        if !self.is_trivial_mod_centre(model, &model.centre)? {
            return Err(Error::Automorphism("not trivial modulo the declared centre".into()));
        }
        self.power(model, model.p.pow(r))
    }
}

fn z_from_power(model: &GroupModel, pr: &Automorphism, r: u32, g: &GroupElement) -> Result<GroupElement> {
    let c = pr.psi(model, g)?;
    if !model.contains(&model.centre, &c) {
        return Err(Error::Automorphism("phi^{p^r}(g) g^-1 is not central".into()));
    }
    let coords = c
        .coords
        .iter()
        .enumerate()
        .map(|(i, x)| x.div_p_pow(r).ok_or_else(|| Error::NoRoot(format!("coordinate {} not divisible by p^{r}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupElement { coords })
}

impl GroupModel {
    /// Modulus for linear-on-log matrices: the matrix modulus for unitriangular
    /// models, `p^M` for abelian ones.
    fn lie_modulus(&self) -> u64 {
        match &self.kind {
            Kind::Abelian => self.pm,
            Kind::Unitriangular(u) => u.q,
        }
    }
}

fn det_mod_p(a: &[Vec<u64>], p: u64) -> u64 {
    let n = a.len();
    let mut m: Vec<Vec<u64>> = a.iter().map(|r| r.iter().map(|&x| x % p).collect()).collect();
    let mut det = 1u64;
    for c in 0..n {
        let Some(piv) = (c..n).find(|&r| m[r][c] != 0) else { return 0 };
        if piv != c {
            m.swap(piv, c);
            det = (p - det) % p;
        }
        det = det * m[c][c] % p;
        let inv = inv_mod(m[c][c], p).unwrap();
        for r in c + 1..n {
            let f = m[r][c] * inv % p;
            for k in c..n {
                m[r][k] = (m[r][k] + p * p - f * m[c][k] % p) % p;
            }
        }
    }
    det
}
