//! Configuration-driven task runner and report emitter.

use crate::control::{
    completely_prime_probe, dagger_approx, induced_filtration, is_controlled_by, zalesskii_check, CentralPrimeSpec,
    IdealSpan, Sidedness,
};
use crate::error::{Error, Result};
use crate::group::{Automorphism, GroupModel, ModelSpec, SubgroupSpec};
use crate::iwasawa::{group_embed, TruncatedSeries, TruncationSpec};
use crate::operators::{
    coset_idempotent, mahler_coeff_aut, mahler_coeff_closed_form, qdel_apply, qdel_monomial, reconstruct_aut, rho_apply,
    rho_apply_mahler, tested_positions, LocallyConstantFunction, OperatorMatrix,
};
use crate::padic::{binom_mod_p, MultiIndex};
use crate::smith::{coefficient_asymptotics, moore_det_check, zeta_convergence, ZetaExperiment};
use crate::val::Val;
use rand::Rng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub p: u64,
    pub model: ModelShape,
    pub omega: Vec<String>,
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub automorphisms: BTreeMap<String, AutSpec>,
    #[serde(default)]
    pub tasks: Vec<TaskEntry>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub budgets: Budgets,
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelShape {
    Abelian {
        d: usize,
    },
    Unitriangular {
        n: usize,
        generators: Vec<Vec<Vec<i64>>>,
        #[serde(default)]
        centre: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    #[serde(rename = "W")]
    pub w: i64,
    #[serde(rename = "M")]
    pub m: u32,
    /// Optional; must agree with the denominator derived from `omega`.
    #[serde(default)]
    pub e: Option<i64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AutSpec {
    Identity,
    Inner { element: Vec<i64> },
    LinearOnLog { matrix: Vec<Vec<i64>> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    #[serde(default = "default_dagger")]
    pub dagger_points: u64,
    #[serde(default = "default_basis")]
    pub basis_size: usize,
    #[serde(default = "default_moore")]
    pub moore_points: u64,
}

fn default_dagger() -> u64 {
    1 << 20
}
fn default_basis() -> usize {
    4000
}
fn default_moore() -> u64 {
    4096
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { dagger_points: default_dagger(), basis_size: default_basis(), moore_points: default_moore() }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct TaskEntry {
    #[serde(flatten)]
    pub spec: TaskSpec,
    /// Per-task cutoff override.
    #[serde(rename = "W", default)]
    pub cutoff: Option<i64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct IdealConfig {
    pub gens: Vec<String>,
    #[serde(default)]
    pub sidedness: Sidedness,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PrimeConfig {
    Zero,
    /// `z_target - u` with a 1-based target.
    Graph { target: usize, u: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum TaskSpec {
    VerifyOperators {
        #[serde(default = "twenty")]
        samples: usize,
    },
    VerifyValuation {
        #[serde(default = "hundred")]
        samples: usize,
    },
    MahlerReconstruct {
        automorphism: String,
        #[serde(default)]
        budget: Option<i64>,
    },
    Idempotents {
        subgroup: Vec<u32>,
        #[serde(default = "fifty")]
        samples: usize,
    },
    ControlCheck {
        ideal: IdealConfig,
        subgroup: Vec<u32>,
        #[serde(default)]
        expect: Option<bool>,
    },
    Dagger {
        ideal: IdealConfig,
        #[serde(default = "one_u32")]
        depth: u32,
        #[serde(default)]
        expect_faithful: Option<bool>,
    },
    InducedFiltration {
        split: usize,
        prime: PrimeConfig,
        series: Vec<String>,
    },
    CompletelyPrimeProbe {
        split: usize,
        prime: PrimeConfig,
        #[serde(default = "hundred")]
        samples: usize,
    },
    Zalesskii {
        gens: Vec<String>,
        #[serde(default = "one_u32")]
        depth: u32,
    },
    MooreDet {
        #[serde(default)]
        p: Option<u32>,
        m: usize,
        r: u32,
        #[serde(default = "one_i64")]
        lambda: i64,
    },
    Zeta {
        automorphism: String,
        z_depth: u32,
        r: Vec<u32>,
        tests: Vec<String>,
    },
}

fn twenty() -> usize {
    20
}
fn fifty() -> usize {
    50
}
fn hundred() -> usize {
    100
}
fn one_u32() -> u32 {
    1
}
fn one_i64() -> i64 {
    1
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::VerifyOperators { .. } => "verify-operators",
            TaskSpec::VerifyValuation { .. } => "verify-valuation",
            TaskSpec::MahlerReconstruct { .. } => "mahler-reconstruct",
            TaskSpec::Idempotents { .. } => "idempotents",
            TaskSpec::ControlCheck { .. } => "control-check",
            TaskSpec::Dagger { .. } => "dagger",
            TaskSpec::InducedFiltration { .. } => "induced-filtration",
            TaskSpec::CompletelyPrimeProbe { .. } => "completely-prime-probe",
            TaskSpec::Zalesskii { .. } => "zalesskii",
            TaskSpec::MooreDet { .. } => "moore-det",
            TaskSpec::Zeta { .. } => "zeta",
        }
    }

    fn automorphism(&self) -> Option<&str> {
        match self {
            TaskSpec::MahlerReconstruct { automorphism, .. } | TaskSpec::Zeta { automorphism, .. } => Some(automorphism),
            _ => None,
        }
    }

    fn literals(&self) -> Vec<(&'static str, &[String])> {
        match self {
            TaskSpec::ControlCheck { ideal, .. } | TaskSpec::Dagger { ideal, .. } => vec![("ideal.gens", &ideal.gens)],
            TaskSpec::InducedFiltration { series, .. } => vec![("series", series)],
            TaskSpec::Zalesskii { gens, .. } => vec![("gens", gens)],
            TaskSpec::Zeta { tests, .. } => vec![("tests", tests)],
            _ => vec![],
        }
    }
}

fn cfg_err(path: impl Into<String>, e: impl ToString) -> Error {
    Error::Config { path: path.into(), msg: e.to_string() }
}

/// Parse and validate a JSON config. Every referenced automorphism must be
/// defined, and every series literal must parse in its task's truncation.
pub fn parse_config(text: &str) -> Result<Config> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        cfg_err(if path.is_empty() { ".".to_string() } else { path }, e.inner())
    })?;
    Context::new(&cfg)?;
    Ok(cfg)
}

impl Config {
    pub fn model_spec(&self) -> ModelSpec {
        match &self.model {
            ModelShape::Abelian { d } => ModelSpec::Abelian { p: self.p, d: *d, m: self.truncation.m, omega: self.omega.clone() },
            ModelShape::Unitriangular { n, generators, centre } => ModelSpec::Unitriangular {
                p: self.p,
                n: *n,
                m: self.truncation.m,
                generators: generators.clone(),
                omega: self.omega.clone(),
                centre: centre.clone(),
            },
        }
    }
}

struct Context {
    model: Arc<GroupModel>,
    base: Arc<TruncationSpec>,
    auts: BTreeMap<String, Automorphism>,
    budgets: Budgets,
}

impl Context {
    fn new(cfg: &Config) -> Result<Self> {
        if cfg.jobs == 0 {
            return Err(cfg_err("jobs", "must be at least 1"));
        }
        let model = Arc::new(GroupModel::load(&cfg.model_spec()).map_err(|e| cfg_err("model", e))?);
        if let Some(e) = cfg.truncation.e {
            if e != model.omega().e() {
                return Err(cfg_err("truncation.e", format!("omega has denominator {}, config says {e}", model.omega().e())));
            }
        }
        let budgets = cfg.budgets.clone();
        let base = make_trunc(&model, cfg.truncation.w, &budgets).map_err(|e| cfg_err("truncation.W", e))?;
        let mut auts = BTreeMap::new();
        for (name, spec) in &cfg.automorphisms {
            let path = format!("automorphisms.{name}");
            let phi = match spec {
                AutSpec::Identity => Automorphism::identity(&model),
                AutSpec::Inner { element } => {
                    let coords: Vec<i128> = element.iter().map(|&x| x as i128).collect();
                    let h = model.element(&coords).map_err(|e| cfg_err(&path, e))?;
                    Automorphism::inner(&model, h).map_err(|e| cfg_err(&path, e))?
                }
                AutSpec::LinearOnLog { matrix } => Automorphism::linear_on_log(&model, matrix).map_err(|e| cfg_err(&path, e))?,
            };
            auts.insert(name.clone(), phi);
        }
        let ctx = Context { model, base, auts, budgets };
        for (k, task) in cfg.tasks.iter().enumerate() {
            if let Some(a) = task.spec.automorphism() {
                if !ctx.auts.contains_key(a) {
                    return Err(cfg_err(format!("tasks[{k}].automorphism"), format!("undefined automorphism {a:?}")));
                }
            }
            let t = ctx.trunc_for(task.cutoff).map_err(|e| cfg_err(format!("tasks[{k}].W"), e))?;
            for (field, lits) in task.spec.literals() {
                for (j, s) in lits.iter().enumerate() {
                    TruncatedSeries::parse(&t, s).map_err(|e| cfg_err(format!("tasks[{k}].{field}[{j}]"), e))?;
                }
            }
        }
        Ok(ctx)
    }

    fn trunc_for(&self, cutoff: Option<i64>) -> Result<Arc<TruncationSpec>> {
        match cutoff {
            None => Ok(self.base.clone()),
            Some(w) => make_trunc(&self.model, w, &self.budgets),
        }
    }
}

fn make_trunc(model: &Arc<GroupModel>, w: i64, budgets: &Budgets) -> Result<Arc<TruncationSpec>> {
    let t = TruncationSpec::new(model.clone(), w)?;
    if t.size() > budgets.basis_size {
        return Err(Error::Budget(format!("basis has {} monomials, budget is {}", t.size(), budgets.basis_size)));
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub task: String,
    pub status: Status,
    pub metrics: BTreeMap<String, Value>,
    pub witnesses: Vec<Value>,
}

impl Record {
    fn new(task: &str) -> Self {
        Record { task: task.to_string(), status: Status::Pass, metrics: BTreeMap::new(), witnesses: Vec::new() }
    }

    fn metric(&mut self, k: &str, v: impl Serialize) {
        self.metrics.insert(k.to_string(), serde_json::to_value(v).expect("metrics serialize"));
    }

    fn fail_if(&mut self, bad: bool) {
        if bad {
            self.status = Status::Fail;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub records: Vec<Record>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Table,
}

impl Report {
    pub fn any_failed(&self) -> bool {
        self.records.iter().any(|r| r.status == Status::Fail)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<_>>()?;
        Ok(Report { records })
    }

    pub fn to_table(&self) -> String {
        if self.records.is_empty() {
            return String::new();
        }
        let rows: Vec<[String; 3]> = self
            .records
            .iter()
            .map(|r| {
                let status = serde_json::to_value(r.status).unwrap().as_str().unwrap().to_string();
                [r.task.clone(), status, serde_json::to_string(&r.metrics).unwrap()]
            })
            .collect();
        let w0 = rows.iter().map(|r| r[0].len()).max().unwrap().max(4);
        let w1 = rows.iter().map(|r| r[1].len()).max().unwrap().max(6);
        let mut out = String::new();
        let _ = writeln!(out, "{:<w0$}  {:<w1$}  METRICS", "TASK", "STATUS");
        for r in rows {
            let _ = writeln!(out, "{:<w0$}  {:<w1$}  {}", r[0], r[1], r[2]);
        }
        out
    }
}

pub fn emit_report(rep: &Report, format: Format) -> String {
    match format {
        Format::Jsonl => rep.to_jsonl(),
        Format::Table => rep.to_table(),
    }
}

/// The generator for task `index`: PCG-XSL-RR 128/64 with the seed as state and
/// the task index as stream.
pub fn task_rng(seed: u64, index: usize) -> Pcg64 {
    Pcg64::new(seed as u128, index as u128)
}

/// Run the tasks in declared order, optionally restricted to the given names.
pub fn run_tasks(cfg: &Config, only: &[String]) -> Result<Report> {
    let ctx = Context::new(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| cfg_err("jobs", e))?;
    pool.install(|| {
        let mut records = Vec::new();
        for (k, task) in cfg.tasks.iter().enumerate() {
            let name = task.spec.name();
            if !only.is_empty() && !only.iter().any(|n| n == name) {
                continue;
            }
            let mut rng = task_rng(cfg.seed, k);
            let rec = run_one(&ctx, task, &mut rng).unwrap_or_else(|e| {
                let mut r = Record::new(name);
                r.status = Status::Fail;
                r.metric("error", e.to_string());
                r
            });
            records.push(rec);
        }
        Ok(Report { records })
    })
}

fn parse_all(t: &Arc<TruncationSpec>, lits: &[String]) -> Result<Vec<TruncatedSeries>> {
    lits.iter().map(|s| TruncatedSeries::parse(t, s)).collect()
}

fn prime_spec(t: &Arc<TruncationSpec>, split: usize, p: &PrimeConfig) -> Result<CentralPrimeSpec> {
    match p {
        PrimeConfig::Zero => Ok(CentralPrimeSpec::zero(split)),
        PrimeConfig::Graph { target, u } => {
            if *target == 0 {
                return Err(Error::Shape("graph target is 1-based".into()));
            }
            CentralPrimeSpec::graph(t, split, target - 1, u)
        }
    }
}

fn run_one(ctx: &Context, task: &TaskEntry, rng: &mut Pcg64) -> Result<Record> {
    let t = ctx.trunc_for(task.cutoff)?;
    let mut rec = Record::new(task.spec.name());
    rec.metric("W", t.cutoff());
    rec.metric("basis_size", t.size());
    match &task.spec {
        TaskSpec::VerifyOperators { samples } => verify_operators(&t, *samples, rng, &mut rec)?,
        TaskSpec::VerifyValuation { samples } => verify_valuation(&t, *samples, rng, &mut rec)?,
        TaskSpec::MahlerReconstruct { automorphism, budget } => {
            let phi = &ctx.auts[automorphism];
            mahler_reconstruct(&t, phi, budget.unwrap_or(t.cutoff() / 2), rng, &mut rec)?
        }
        TaskSpec::Idempotents { subgroup, samples } => idempotents(&t, subgroup, *samples, rng, &mut rec)?,
        TaskSpec::ControlCheck { ideal, subgroup, expect } => {
            let i = IdealSpan::new(&t, &parse_all(&t, &ideal.gens)?, ideal.sidedness)?;
            let h = SubgroupSpec { exponents: subgroup.iter().map(|&e| Some(e)).collect() };
            let rep = is_controlled_by(&i, &h)?;
            rec.metric("controlled", rep.controlled);
            rec.metric("rank", rep.rank);
            rec.metric("tested", &rep.tested);
            rec.metric("note", "controlled modulo F_W");
            rec.witnesses = rep.witnesses.iter().map(|w| serde_json::to_value(w).unwrap()).collect();
            rec.fail_if(rep.controlled != expect.unwrap_or(true));
        }
        TaskSpec::Dagger { ideal, depth, expect_faithful } => {
            let i = IdealSpan::new(&t, &parse_all(&t, &ideal.gens)?, ideal.sidedness)?;
            let found = dagger_approx(&i, *depth, ctx.budgets.dagger_points)?;
            let faithful = found.iter().all(|l| l.iter().all(|&x| x == 0));
            rec.metric("depth", depth);
            rec.metric("count", found.len());
            rec.metric("faithful", faithful);
            rec.witnesses = found.iter().map(|l| json!(l)).collect();
            if let Some(e) = expect_faithful {
                rec.fail_if(*e != faithful);
            }
        }
        TaskSpec::InducedFiltration { split, prime, series } => {
            let spec = prime_spec(&t, *split, prime)?;
            let mut values = Vec::new();
            for x in parse_all(&t, series)? {
                let f = induced_filtration(&x, &spec)?;
                if matches!(prime, PrimeConfig::Zero) && f != x.w_val() {
                    rec.status = Status::Fail;
                    rec.witnesses.push(json!({ "series": x.to_string(), "f": f.display(t.e()), "w": x.w_val().display(t.e()) }));
                }
                values.push(json!({ "series": x.to_string(), "f": f.display(t.e()) }));
            }
            rec.metric("values", values);
        }
        TaskSpec::CompletelyPrimeProbe { split, prime, samples } => {
            let spec = prime_spec(&t, *split, prime)?;
            let rep = completely_prime_probe(&t, &spec, *samples, rng)?;
            rec.fail_if(!rep.passed());
            rec.witnesses = rep.witnesses.iter().map(|w| json!(w)).collect();
            let mut m = serde_json::to_value(&rep).unwrap();
            m.as_object_mut().unwrap().remove("witnesses");
            for (k, v) in m.as_object().unwrap() {
                rec.metrics.insert(k.clone(), v.clone());
            }
        }
        TaskSpec::Zalesskii { gens, depth } => {
            let rep = zalesskii_check(&t, &parse_all(&t, gens)?, *depth, ctx.budgets.dagger_points)?;
            rec.metric("depth", rep.depth);
            rec.metric("faithful", rep.faithful);
            rec.metric("controlled", rep.controlled);
            rec.metric("tested", &rep.tested);
            rec.metric("rank", rep.rank);
            rec.witnesses = rep.witnesses.iter().map(|w| serde_json::to_value(w).unwrap()).collect();
            match rep.controlled {
                None => {
                    rec.status = Status::Skipped;
                    rec.witnesses = rep.dagger.iter().map(|l| json!(l)).collect();
                }
                Some(c) => rec.fail_if(!c),
            }
        }
        TaskSpec::MooreDet { p, m, r, lambda } => {
            let p = p.unwrap_or(t.p());
            let rep = moore_det_check(p, *m, *r, *lambda, ctx.budgets.moore_points)?;
            rec.fail_if(!rep.factorization_holds || rep.valuation != Some(rep.expected_valuation));
            for (k, v) in serde_json::to_value(&rep).unwrap().as_object().unwrap() {
                rec.metrics.insert(k.clone(), v.clone());
            }
        }
        TaskSpec::Zeta { automorphism, z_depth, r, tests } => {
            let phi = ctx.auts[automorphism].clone();
            let exp = ZetaExperiment::new(&t, phi, *z_depth, r.clone(), parse_all(&t, tests)?)?;
            let rep = zeta_convergence(&exp)?;
            let alphas: Vec<MultiIndex> = t.basis().iter().filter(|a| a.total() > 0).cloned().collect();
            let asym = coefficient_asymptotics(&exp, &alphas)?;
            let asym_bad: Vec<_> = asym.iter().filter(|a| a.holds == Some(false)).collect();
            rec.fail_if(!(rep.monotone && rep.cramer_ok && rep.vdet_ok && rep.fixed_killed) || !asym_bad.is_empty());
            for (k, v) in serde_json::to_value(&rep).unwrap().as_object().unwrap() {
                rec.metrics.insert(k.clone(), v.clone());
            }
            rec.metric("asymptotics_checked", asym.iter().filter(|a| a.holds.is_some()).count());
            rec.metric("asymptotics_unresolved", asym.iter().filter(|a| a.holds.is_none()).count());
            rec.witnesses = asym_bad.iter().map(|a| serde_json::to_value(a).unwrap()).collect();
        }
    }
    Ok(rec)
}

fn binom_vec(lambda: &[crate::padic::PadicInt], alpha: &MultiIndex, p: u32) -> Result<u32> {
    let mut c = 1u32;
    for (l, &a) in lambda.iter().zip(alpha.iter()) {
        c = crate::fp::mul(c, binom_mod_p(l, a as u64)?, p);
    }
    Ok(c)
}

fn verify_operators(t: &Arc<TruncationSpec>, samples: usize, rng: &mut Pcg64, rec: &mut Record) -> Result<()> {
    let p = t.p();
    let model = t.model();
    let one = TruncatedSeries::one(t);
    let mut pairs = 0usize;
    let mut diagonal_exact_mismatches = 0usize;
    let mut bad = Vec::new();
    for alpha in t.basis() {
        let f = LocallyConstantFunction::binomial(p as u64, alpha);
        for beta in t.basis() {
            let closed = qdel_monomial(t, alpha, beta);
            let via_rho = rho_apply(&f, &TruncatedSeries::monomial(t, beta, 1))?;
            pairs += 1;
            if closed != via_rho {
                bad.push(json!({ "check": "closed-formula", "alpha": alpha.0, "beta": beta.0 }));
            }
        }
        let diag = qdel_monomial(t, alpha, alpha);
        if diag != one {
            diagonal_exact_mismatches += 1;
        }
        if diag.w_val() != Val::Finite(0) || diag.coeff(&MultiIndex::zero(t.rank())) != 1 {
            bad.push(json!({ "check": "diagonal-leading-term", "alpha": alpha.0 }));
        }
    }
    let ext = TruncationSpec::new(model.clone(), t.cutoff() + t.max_weight())?;
    for _ in 0..samples {
        let g = model.random_element(rng);
        let e_ext = group_embed(&ext, &g)?;
        let e = group_embed(t, &g)?;
        for alpha in t.basis() {
            let lhs = qdel_apply(alpha, &e_ext)?.project(t)?;
            if lhs != e.scale(binom_vec(&g.coords, alpha, p)?) {
                bad.push(json!({ "check": "group-eigenvalue", "lambda": g.residues(), "alpha": alpha.0 }));
            }
        }
    }
    let mut routes = 0usize;
    for _ in 0..samples {
        let table: Vec<u32> = (0..(p as usize).pow(t.rank() as u32)).map(|_| rng.random_range(0..p)).collect();
        let f = LocallyConstantFunction::from_fn(p as u64, t.rank(), 1, |x| {
            table[x.iter().rev().fold(0usize, |acc, &v| acc * p as usize + v as usize)]
        });
        let x = TruncatedSeries::random(t, t.cutoff(), 4, rng);
        routes += 1;
        if rho_apply(&f, &x)? != rho_apply_mahler(&f, &x)? {
            bad.push(json!({ "check": "rho-routes", "x": x.to_string() }));
        }
    }
    rec.metric("pairs", pairs);
    rec.metric("diagonal_exact_mismatches", diagonal_exact_mismatches);
    rec.metric("group_samples", samples);
    rec.metric("rho_route_samples", routes);
    rec.metric("failures", bad.len());
    rec.fail_if(!bad.is_empty());
    rec.witnesses = bad;
    Ok(())
}

fn verify_valuation(t: &Arc<TruncationSpec>, samples: usize, rng: &mut Pcg64, rec: &mut Record) -> Result<()> {
    let half = t.cutoff() / 2 + 1;
    let mut checked = 0usize;
    let mut attempts = 0usize;
    let mut bad = Vec::new();
    while checked < samples && attempts < samples * 20 {
        attempts += 1;
        let x = TruncatedSeries::random(t, half, rng.random_range(1..=4), rng);
        let y = TruncatedSeries::random(t, half, rng.random_range(1..=4), rng);
        let (Val::Finite(a), Val::Finite(b)) = (x.w_val(), y.w_val()) else { continue };
        if a + b >= t.cutoff() {
            continue;
        }
        checked += 1;
        let xy = x.mul(&y)?;
        if xy.w_val() != Val::Finite(a + b) {
            bad.push(json!({ "x": x.to_string(), "y": y.to_string(), "w_xy": xy.w_val().display(t.e()) }));
        }
        if t.model().is_abelian() && xy != x.mul_reference(&y)? {
            bad.push(json!({ "x": x.to_string(), "y": y.to_string(), "check": "reference-product" }));
        }
    }
    rec.metric("pairs", checked);
    rec.metric("failures", bad.len());
    rec.fail_if(!bad.is_empty() || checked < samples);
    rec.witnesses = bad;
    Ok(())
}

fn mahler_reconstruct(t: &Arc<TruncationSpec>, phi: &Automorphism, budget: i64, rng: &mut Pcg64, rec: &mut Record) -> Result<()> {
    let rc = reconstruct_aut(t, phi, budget, rng)?;
    let ae = OperatorMatrix::aut_extend(t, phi)?;
    let cols = rc.guaranteed_columns();
    let mut bad = Vec::new();
    for &j in &cols {
        if rc.matrix.column(j) != ae.column(j) {
            bad.push(json!({ "column": t.basis()[j].0 }));
        }
    }
    rec.metric("d_prime", rc.d_prime);
    rec.metric("deg_estimate", rc.deg_estimate.display(t.e()));
    rec.metric("guaranteed_columns", cols.len());
    let model = t.model();
    let trivial = phi.is_trivial_mod_centre(model, model.centre())?;
    rec.metric("trivial_mod_centre", trivial);
    if trivial {
        let mut n = 0;
        for alpha in t.basis() {
            n += 1;
            if mahler_coeff_aut(t, phi, alpha)? != mahler_coeff_closed_form(t, phi, alpha)? {
                bad.push(json!({ "closed_form_alpha": alpha.0 }));
            }
        }
        rec.metric("closed_form_checked", n);
    }
    rec.fail_if(!bad.is_empty());
    rec.witnesses = bad;
    Ok(())
}

fn idempotents(t: &Arc<TruncationSpec>, subgroup: &[u32], samples: usize, rng: &mut Pcg64, rec: &mut Record) -> Result<()> {
    let model = t.model();
    let p = t.p();
    let h = SubgroupSpec { exponents: subgroup.iter().map(|&e| Some(e)).collect() };
    let tested = tested_positions(&h)?;
    let shift: i64 = tested.iter().map(|&i| t.omega()[i]).sum::<i64>() * (p as i64 - 1);
    let ext = TruncationSpec::new(model.clone(), t.cutoff() + shift)?;
    let nus: Vec<Vec<u32>> = (0..(p as usize).pow(tested.len() as u32))
        .map(|mut k| {
            (0..tested.len())
                .map(|_| {
                    let v = (k % p as usize) as u32;
                    k /= p as usize;
                    v
                })
                .collect()
        })
        .collect();
    let mut bad = Vec::new();
    let mut sum = OperatorMatrix::identity(t).scale(0);
    let mut ext_ops = Vec::new();
    for nu in &nus {
        let e = coset_idempotent(t, &h, nu)?;
        if e.compose(&e)? != e {
            bad.push(json!({ "check": "idempotent", "nu": nu }));
        }
        sum = sum.add(&e)?;
        ext_ops.push(coset_idempotent(&ext, &h, nu)?);
    }
    if sum != OperatorMatrix::identity(t) {
        bad.push(json!({ "check": "partition-of-unity" }));
    }
    for _ in 0..samples {
        let g = model.random_element(rng);
        let lam = g.residues();
        let ge = group_embed(&ext, &g)?;
        let gt = group_embed(t, &g)?;
        for (nu, e) in nus.iter().zip(&ext_ops) {
            let inside = tested.iter().zip(nu).all(|(&i, &v)| lam[i] % p as u64 == v as u64);
            let expected = if inside { gt.clone() } else { TruncatedSeries::zero(t) };
            if e.apply(&ge)?.project(t)? != expected {
                bad.push(json!({ "check": "coset-indicator", "lambda": lam, "nu": nu }));
            }
        }
    }
    rec.metric("cosets", nus.len());
    rec.metric("samples", samples);
    rec.metric("failures", bad.len());
    rec.fail_if(!bad.is_empty());
    rec.witnesses = bad;
    Ok(())
}
