//! Named, seeded experiments with embedded acceptance rules.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{fbl_infty_norm, fbl_norm, moduli_norm, sublattice_generators};
use crate::error::{Error, Result};
use crate::estimate::NormEstimate;
use crate::expr::LatticeExpr;
use crate::extension::{embedding_gap, extension_constant, SubspaceSpec};
use crate::fixtures;
use crate::lattice::GeneratorBinding;
use crate::linear_map::LinearMap;
use crate::optimize::{rng_for, OptimizerConfig};
use crate::space::{Exponent, SpaceSpec};
use crate::summing::pi_q1_lower;

/// One catalog entry with its default parameters.
#[derive(Clone, Copy, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub reference: &'static str,
    pub defaults: &'static [(&'static str, &'static str)],
}

const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "unconditionality-sqrt2",
        summary: "moduli sum 2 and difference √2 over the Euclidean plane",
        reference: "unit vector moduli in the free Banach lattice over ℓ_2^2 are not 1-unconditional",
        defaults: &[],
    },
    CatalogEntry {
        name: "haar-level",
        summary: "moduli of one Haar level in dyadic L_1 have norm Σ|a_k|",
        reference: "moduli of a single Haar level are isometric to the ℓ_1 basis",
        defaults: &[("n", "2"), ("a", "random")],
    },
    CatalogEntry {
        name: "haar-branch",
        summary: "moduli of a Haar branch in dyadic L_1",
        reference: "moduli of a Haar branch are equivalent to the ℓ_1 basis",
        defaults: &[("levels", "4"), ("a", "random")],
    },
    CatalogEntry {
        name: "summing-basis",
        summary: "constant and alternating moduli sums of the summing basis",
        reference: "summing basis moduli are conditional: n and 1 in the sup-norm lattice, order √n for p = 1",
        defaults: &[("m", "20"), ("ns", "4,16,64"), ("mode", "all")],
    },
    CatalogEntry {
        name: "rademacher-join",
        summary: "join of Rademacher generators in L_1 versus join of unit vectors in ℓ_2^m",
        reference: "⋁δ_{r_k} has norm 1 over L_1 while ⋁δ_{e_k} has norm at least √m over ℓ_2",
        defaults: &[("ms", "3,4,5")],
    },
    CatalogEntry {
        name: "rad-linfty",
        summary: "join of Rademacher generators over L_∞ atoms",
        reference: "⋁δ_{r_k} over L_∞ grows at most like √m",
        defaults: &[("ms", "2,3,4"), ("p", "1")],
    },
    CatalogEntry {
        name: "hilbert-bibasis",
        summary: "bibasis ratio of the truncated Hilbert matrix",
        reference: "the Hilbert matrix image of the c₀ basis violates the bibasis inequality",
        defaults: &[("ms", "4,8,16"), ("target", "1.4")],
    },
    CatalogEntry {
        name: "sublattice-isometry",
        summary: "disjoint elements spanning an isometric copy of ℓ_2^n",
        reference: "a lattice with 1-unconditional basis embeds as a sublattice of its free lattice",
        defaults: &[("count", "4"), ("trunc", "12"), ("trials", "20"), ("samples", "10000")],
    },
    CatalogEntry {
        name: "c0-moduli-ell2",
        summary: "Σ|δ_{e_k}| over ℓ_∞^{2n} grows like √n",
        reference: "moduli of the c₀ basis are equivalent to the ℓ_2 basis",
        defaults: &[("ns", "4,16")],
    },
    CatalogEntry {
        name: "ell1-moduli",
        summary: "Σ a_k|δ_{e_k}| over ℓ_1^n equals Σ a_k",
        reference: "moduli of the ℓ_1 basis are isometric to the ℓ_1 basis",
        defaults: &[("n", "6")],
    },
    CatalogEntry {
        name: "lower2-ell1",
        summary: "Σ a_k|δ_{e_k}| over ℓ_2^n for a basis with a lower 2-estimate",
        reference: "moduli of a basis with a lower 2-estimate are equivalent to the ℓ_1 basis",
        defaults: &[("ns", "4,8")],
    },
    CatalogEntry {
        name: "fblinfty-equivalence",
        summary: "Σ a_k δ_{e_k} against Σ a_k|δ_{e_k}| in the sup-norm lattice",
        reference: "an unconditional basis and its moduli are equivalent in the sup-norm lattice",
        defaults: &[("n", "4"), ("rs", "1,2,inf")],
    },
    CatalogEntry {
        name: "upper-estimate-duality",
        summary: "π_{q,1} of the dual identity against a disjoint-family ratio",
        reference: "the upper p-estimate constant of the free lattice equals π_{q,1}(id_{E*})",
        defaults: &[("r", "1"), ("n", "3"), ("q", "2")],
    },
    CatalogEntry {
        name: "convexity-ceiling",
        summary: "q-power sums of unit vector moduli over ℓ_2^n",
        reference: "(Σ|δ_{x_j}|^q)^{1/q} is at least of order n^{1/2} for Euclidean slices",
        defaults: &[("ns", "4,9"), ("q", "4")],
    },
    CatalogEntry {
        name: "poe-constants",
        summary: "extension constants and embedding gaps for Rademacher spans in L_1",
        reference: "operator extension into L_p is equivalent to a lattice embedding of free lattices",
        defaults: &[("ms", "2,3"), ("p", "1")],
    },
];

pub fn catalog() -> &'static [CatalogEntry] {
    CATALOG
}

/// One measured quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub quantity: String,
    pub value: f64,
    pub lower: f64,
    #[serde(with = "crate::estimate::ext_f64")]
    pub upper: f64,
    pub lower_certified: bool,
    pub upper_certified: bool,
    pub method: Vec<String>,
    pub reference: String,
    /// The acceptance rule, if the record carries one.
    pub rule: Option<String>,
    pub pass: Option<bool>,
}

impl Record {
    fn estimate(quantity: impl Into<String>, est: &NormEstimate, reference: &str) -> Self {
        Record {
            quantity: quantity.into(),
            value: est.lower,
            lower: est.lower,
            upper: est.upper,
            lower_certified: est.lower_certified,
            upper_certified: est.upper_certified,
            method: est.method.clone(),
            reference: reference.to_string(),
            rule: None,
            pass: None,
        }
    }

    fn scalar(quantity: impl Into<String>, value: f64, exact: bool, method: &str, reference: &str) -> Self {
        Record {
            quantity: quantity.into(),
            value,
            lower: value,
            upper: value,
            lower_certified: exact,
            upper_certified: exact,
            method: vec![method.to_string()],
            reference: reference.to_string(),
            rule: None,
            pass: None,
        }
    }

    fn rule(mut self, text: impl Into<String>, pass: bool) -> Self {
        self.rule = Some(text.into());
        self.pass = Some(pass);
        self
    }

    pub fn certified(&self) -> bool {
        self.lower_certified && self.upper_certified
    }
}

/// A data series for growth experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, String>,
    pub seed: u64,
    pub records: Vec<Record>,
    pub series: Vec<Series>,
    /// Kept out of the serialized form so that reports stay reproducible.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl ExperimentReport {
    /// False when any embedded rule failed.
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass != Some(false))
    }

    pub fn record(&self, quantity: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.quantity == quantity)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per record: experiment, quantity, lower, upper, certified, reference, pass.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["experiment", "quantity", "lower", "upper", "certified", "reference", "pass"])
            .map_err(csv_err)?;
        for r in &self.records {
            let pass = r.pass.map_or(String::new(), |p| p.to_string());
            w.write_record([
                self.name.as_str(),
                &r.quantity,
                &format!("{:.12e}", r.lower),
                &format!("{:.12e}", r.upper),
                &r.certified().to_string(),
                &r.reference,
                &pass,
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Two-column blocks, one per series, separated by blank lines.
    pub fn to_gnuplot(&self) -> Option<String> {
        if self.series.is_empty() {
            return None;
        }
        let mut out = String::new();
        for (i, s) in self.series.iter().enumerate() {
            if i > 0 {
                out.push_str("\n\n");
            }
            let _ = writeln!(out, "# {} {}", self.name, s.label);
            for (x, y) in &s.points {
                let _ = writeln!(out, "{x} {y:.12e}");
            }
        }
        Some(out)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Resolved parameters of one run.
struct Params<'a> {
    values: &'a BTreeMap<String, String>,
}

impl Params<'_> {
    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("defaults cover every key")
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.raw(key).trim().parse().map_err(|_| Error::param(key, format!("expected a nonnegative integer, got '{}'", self.raw(key))))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.raw(key).trim().parse().map_err(|_| Error::param(key, format!("expected a number, got '{}'", self.raw(key))))
    }

    fn exponent(&self, key: &str) -> Result<Exponent> {
        self.raw(key).trim().parse().map_err(|_| Error::param(key, format!("expected an exponent in [1, inf], got '{}'", self.raw(key))))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.raw(key);
        let items = raw
            .split(',')
            .map(|s| s.trim().parse::<T>().map_err(|_| Error::param(key, format!("cannot parse list entry '{s}'"))))
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            return Err(Error::param(key, "list is empty"));
        }
        Ok(items)
    }

    /// Coefficients from a comma list, or uniform in [-1, 1] when "random".
    fn coeffs(&self, key: &str, len: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
        if self.raw(key).trim() == "random" {
            let mut rng = rng_for(seed, stream);
            return Ok((0..len).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
        let a: Vec<f64> = self.list(key)?;
        if a.len() != len {
            return Err(Error::param(key, format!("expected {len} coefficients, got {}", a.len())));
        }
        Ok(a)
    }
}

/// Merges user parameters over the defaults; unknown keys are rejected.
pub fn resolve_params(name: &str, given: &BTreeMap<String, String>) -> Result<BTreeMap<String, String>> {
    let entry = CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownExperiment(name.to_string()))?;
    let mut out: BTreeMap<String, String> = entry.defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    for (k, v) in given {
        if !out.contains_key(k) {
            let known: Vec<&str> = entry.defaults.iter().map(|(k, _)| *k).collect();
            return Err(Error::param(k.clone(), format!("not a parameter of {name} (known: {})", known.join(", "))));
        }
        out.insert(k.clone(), v.clone());
    }
    Ok(out)
}

/// Parses `K=V` strings into a parameter map.
pub fn parse_params<S: AsRef<str>>(items: &[S]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for item in items {
        let item = item.as_ref();
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::param("params", format!("expected K=V, got '{item}'")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn run_experiment(name: &str, params: &BTreeMap<String, String>, seed: u64) -> Result<ExperimentReport> {
    run_experiment_with(name, params, &OptimizerConfig::default().with_seed(seed))
}

/// Runs an experiment under an explicit optimizer configuration; the seed
/// is taken from `cfg`.
pub fn run_experiment_with(name: &str, params: &BTreeMap<String, String>, cfg: &OptimizerConfig) -> Result<ExperimentReport> {
    let parameters = resolve_params(name, params)?;
    let p = Params { values: &parameters };
    let start = Instant::now();
    let entry = CATALOG.iter().find(|e| e.name == name).expect("resolved above");
    let reference = entry.reference;
    let mut series = Vec::new();
    let records = match name {
        "unconditionality-sqrt2" => unconditionality(cfg, reference)?,
        "haar-level" => haar_level(&p, cfg, reference)?,
        "haar-branch" => haar_branch(&p, cfg, reference)?,
        "summing-basis" => summing_basis(&p, cfg, reference, &mut series)?,
        "rademacher-join" => rademacher_join(&p, cfg, reference)?,
        "rad-linfty" => rad_linfty(&p, cfg, reference, &mut series)?,
        "hilbert-bibasis" => hilbert_bibasis(&p, cfg, reference, &mut series)?,
        "sublattice-isometry" => sublattice_isometry(&p, cfg, reference)?,
        "c0-moduli-ell2" => c0_moduli(&p, cfg, reference, &mut series)?,
        "ell1-moduli" => ell1_moduli(&p, cfg, reference)?,
        "lower2-ell1" => lower2(&p, cfg, reference)?,
        "fblinfty-equivalence" => infty_equivalence(&p, cfg, reference)?,
        "upper-estimate-duality" => upper_estimate(&p, cfg, reference)?,
        "convexity-ceiling" => convexity_ceiling(&p, cfg, reference, &mut series)?,
        "poe-constants" => poe_constants(&p, cfg, reference)?,
        _ => unreachable!("catalog and dispatch agree"),
    };
    Ok(ExperimentReport {
        name: name.to_string(),
        parameters,
        seed: cfg.seed,
        records,
        series,
        wall_clock: start.elapsed(),
    })
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn unconditionality(cfg: &OptimizerConfig, reference: &str) -> Result<Vec<Record>> {
    let space = SpaceSpec::ell(2.0, 2);
    let b = GeneratorBinding::new(space.clone(), fixtures::unit_vectors(&space))?;
    let m0 = LatticeExpr::gen(0).abs();
    let m1 = LatticeExpr::gen(1).abs();
    let sum = fbl_norm(&(m0.clone() + m1.clone()), &b, Exponent::ONE, cfg)?;
    let diff = fbl_norm(&(m0 - m1), &b, Exponent::ONE, cfg)?;
    let sum_ok = sum.lower_certified && within(sum.lower, 1.998, 2.0 + 1e-9) && sum.upper_certified && (sum.upper - 2.0).abs() <= 1e-9;
    let diff_ok = diff.lower_certified && within(diff.lower, 1.407, 1.41422);
    Ok(vec![
        Record::estimate("sum-of-moduli", &sum, reference).rule("certified lower in [1.998, 2], certified upper 2", sum_ok),
        Record::estimate("difference-of-moduli", &diff, reference).rule("certified lower in [1.407, 1.41422]", diff_ok),
    ])
}

fn haar_records(space: &SpaceSpec, h: &[Vec<f64>], a: &[f64], cfg: &OptimizerConfig, reference: &str, signed_rule: bool) -> Result<Vec<Record>> {
    let total: f64 = a.iter().map(|t| t.abs()).sum();
    let mods: Vec<f64> = a.iter().map(|t| t.abs()).collect();
    let exact = moduli_norm(space, h, &mods, Exponent::ONE, cfg)?;
    let ok = exact.is_exact(1e-9) && (exact.lower - total).abs() <= 1e-9;
    let b = GeneratorBinding::new(space.clone(), h.to_vec())?;
    let e = LatticeExpr::moduli_combination(a).ok_or_else(|| Error::param("a", "needs at least one coefficient"))?;
    let signed = fbl_norm(&e, &b, Exponent::ONE, cfg)?;
    let mut rec = Record::estimate("signed-moduli", &signed, reference);
    if signed_rule {
        let ok = signed.lower_certified && signed.lower >= total * (1.0 - 1e-6) && signed.upper <= total + 1e-9;
        rec = rec.rule("certified lower within 1e-6 relative of Σ|a_k|", ok);
    } else {
        let ok = signed.lower <= total + 1e-9 && signed.upper >= signed.lower;
        rec = rec.rule("estimate consistent with the triangle bound Σ|a_k|", ok);
    }
    Ok(vec![
        Record::estimate("moduli-sum", &exact, reference).rule(format!("exact value Σ|a_k| = {total}"), ok),
        rec,
        Record::scalar("coefficient-l1", total, true, "closed-form", reference),
    ])
}

fn haar_level(p: &Params, cfg: &OptimizerConfig, reference: &str) -> Result<Vec<Record>> {
    let n = p.usize("n")?;
    let (space, h) = fixtures::haar_level(n)?;
    let a = p.coeffs("a", h.len(), cfg.seed, 0x4a41)?;
    haar_records(&space, &h, &a, cfg, reference, true)
}

fn haar_branch(p: &Params, cfg: &OptimizerConfig, reference: &str) -> Result<Vec<Record>> {
    let levels = p.usize("levels")?;
    let (space, h) = fixtures::haar_branch(levels)?;
    let a = p.coeffs("a", h.len(), cfg.seed, 0x4a42)?;
    haar_records(&space, &h, &a, cfg, reference, false)
}

fn alternating(n: usize) -> Vec<f64> {
    (1..=n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

fn summing_basis(p: &Params, cfg: &OptimizerConfig, reference: &str, series: &mut Vec<Series>) -> Result<Vec<Record>> {
    let m = p.usize("m")?;
    let mode = p.raw("mode").to_string();
    if !["all", "inf-moduli", "inf-alternating", "one-alternating"].contains(&mode.as_str()) {
        return Err(Error::param("mode", "expected all, inf-moduli, inf-alternating or one-alternating"));
    }
    let wants = |m: &str| mode == "all" || mode == m;
    let mut out = Vec::new();
    if m == 0 {
        return Err(Error::param("m", "must be positive"));
    }
    let (space, s) = fixtures::summing_basis(m);
    let b = GeneratorBinding::new(space, s)?;
    if wants("inf-moduli") {
        let e = LatticeExpr::moduli_combination(&vec![1.0; m]).expect("m > 0");
        let est = fbl_infty_norm(&e, &b, cfg)?;
        let ok = within(est.lower, m as f64 - 1e-6, m as f64) && est.upper <= m as f64 + 1e-9;
        out.push(Record::estimate("inf-moduli", &est, reference).rule(format!("estimate in [{m} - 1e-6, {m}]"), ok));
    }
    if wants("inf-alternating") {
        let e = LatticeExpr::moduli_combination(&alternating(m)).expect("m > 0");
        let est = fbl_infty_norm(&e, &b, cfg)?;
        let ok = within(est.lower, 1.0 - 1e-3, 1.0 + 1e-3);
        out.push(Record::estimate("inf-alternating", &est, reference).rule("estimate within 1e-3 of 1", ok));
    }
    if wants("one-alternating") {
        let ns: Vec<usize> = p.list("ns")?;
        let mut pts = Vec::new();
        for n in ns {
            if n == 0 || n % 2 == 1 {
                return Err(Error::param("ns", "sizes must be even and positive"));
            }
            let (space, s) = fixtures::summing_basis(n);
            let b = GeneratorBinding::new(space, s)?;
            let e = LatticeExpr::moduli_combination(&alternating(n)).expect("n > 0");
            let est = fbl_norm(&e, &b, Exponent::ONE, cfg)?;
            let ratio = est.lower / (n as f64).sqrt();
            pts.push((n as f64, ratio));
            out.push(Record::estimate(format!("one-alternating-n{n}"), &est, reference));
            out.push(
                Record::scalar(format!("one-alternating-ratio-n{n}"), ratio, false, "lower/sqrt(n)", reference)
                    .rule("lower/√n in [0.4, 1.79]", within(ratio, 0.4, 1.79)),
            );
        }
        series.push(Series {
            label: "alternating lower/sqrt(n)".into(),
            points: pts,
        });
    }
    Ok(out)
}

fn rademacher_join(p: &Params, cfg: &OptimizerConfig, reference: &str) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for m in p.list::<usize>("ms")? {
        let (space, r) = fixtures::rademachers(m, Exponent::ONE)?;
        let join = LatticeExpr::join_all((0..m).map(LatticeExpr::gen).collect()).expect("m > 0");
        let est = fbl_norm(&join, &GeneratorBinding::new(space, r)?, Exponent::ONE, cfg)?;
        let ok = est.lower_certified && within(est.lower, 0.999, 1.0 + 1e-9);
        out.push(Record::estimate(format!("l1-join-m{m}"), &est, reference).rule("certified lower in [0.999, 1]", ok));
        let l2 = SpaceSpec::ell(2.0, m);
        let est = fbl_norm(&join, &GeneratorBinding::new(l2.clone(), fixtures::unit_vectors(&l2))?, Exponent::ONE, cfg)?;
        let target = (m as f64).sqrt();
        let ok = est.lower_certified && est.lower >= target - 1e-6;
        out.push(Record::estimate(format!("l2-join-m{m}"), &est, reference).rule(format!("certified lower at least √{m}"), ok));
    }
    Ok(out)
}

fn rad_linfty(p: &Params, cfg: &OptimizerConfig, reference: &str, series: &mut Vec<Series>) -> Result<Vec<Record>> {
    let q = p.exponent("p")?;
    let ms: Vec<usize> = p.list("ms")?;
    let mut out = Vec::new();
    let mut pts = Vec::new();
    let mut lowers = Vec::new();
    for &m in &ms {
        let (space, r) = fixtures::rademachers(m, Exponent::Inf)?;
        let join = LatticeExpr::join_all((0..m).map(LatticeExpr::gen).collect()).expect("m > 0");
        let est = fbl_norm(&join, &GeneratorBinding::new(space, r)?, q, cfg)?;
        lowers.push(est.lower);
        pts.push((m as f64, est.lower / (m as f64).sqrt()));
        out.push(Record::estimate(format!("join-m{m}"), &est, reference));
    }
    let growing = lowers.windows(2).all(|w| w[1] > w[0]);
    out.push(
        Record::scalar("growth", lowers.last().copied().unwrap_or(0.0) / lowers[0].max(1e-300), false, "ratio of lowers", reference)
            .rule("lower bounds strictly increase with m", growing),
    );
    series.push(Series {
        label: "join lower/sqrt(m)".into(),
        points: pts,
    });
    Ok(out)
}

/// (R(m), numerator, denominator estimate, domination margin).
pub fn hilbert_ratio(m: usize, cfg: &OptimizerConfig) -> (f64, f64, NormEstimate, f64) {
    let sup = fixtures::hilbert_partial_sum_sup(m);
    let pos = fixtures::hilbert_positive_row_sums(m);
    let margin = sup.iter().zip(&pos).map(|(s, p)| s - p).fold(f64::INFINITY, f64::min);
    let numer = SpaceSpec::ell(1.0, m).norm_of(&sup);
    let den = fixtures::hilbert(m).operator_norm(cfg);
    (numer / den.lower, numer, den, margin)
}

fn hilbert_bibasis(p: &Params, cfg: &OptimizerConfig, reference: &str, series: &mut Vec<Series>) -> Result<Vec<Record>> {
    let ms: Vec<usize> = p.list("ms")?;
    let target = p.f64("target")?;
    let mut out = Vec::new();
    let mut ratios = Vec::new();
    for &m in &ms {
        if m == 0 {
            return Err(Error::param("ms", "sizes must be positive"));
        }
        let (ratio, numer, den, margin) = hilbert_ratio(m, cfg);
        out.push(Record::scalar(format!("partial-sum-sup-m{m}"), numer, true, "partial-sum-scan", reference));
        out.push(Record::estimate(format!("operator-norm-m{m}"), &den, reference));
        out.push(
            Record::scalar(format!("domination-margin-m{m}"), margin, true, "componentwise", reference)
                .rule("max of |partial sums| ≥ H^+𝟙 componentwise", margin >= -1e-12),
        );
        out.push(Record::scalar(format!("ratio-m{m}"), ratio, den.is_exact(1e-9), "numerator/operator-norm", reference));
        ratios.push((m as f64, ratio));
    }
    let increasing = ratios.windows(2).all(|w| w[1].1 > w[0].1);
    out.push(Record::scalar("ratio-increasing", f64::from(u8::from(increasing)), true, "comparison", reference).rule("R(m) strictly increasing", increasing));
    if ratios.len() >= 2 {
        let growth = ratios.last().expect("nonempty").1 / ratios[0].1;
        out.push(
            Record::scalar("growth", growth, true, "ratio of ratios", reference)
                .rule(format!("R(last)/R(first) ≥ {target}"), growth >= target),
        );
    }
    series.push(Series {
        label: "bibasis ratio".into(),
        points: ratios,
    });
    Ok(out)
}

fn sublattice_isometry(p: &Params, cfg: &OptimizerConfig, reference: &str) -> Result<Vec<Record>> {
    let count = p.usize("count")?;
    let trunc = p.usize("trunc")?;
    let trials = p.usize("trials")?;
    let samples = p.usize("samples")?;
    let space = SpaceSpec::ell(2.0, trunc);
    let sub = sublattice_generators(&space, count, trunc)?;
    let mut rng = rng_for(cfg.seed, 0x5b1a);
    let mut worst_rel = 0.0f64;
    let mut out = Vec::new();
    for t in 0..trials {
        let alpha: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..1.0)).collect();
        let e = LatticeExpr::sum(sub.exprs.iter().zip(&alpha).map(|(f, a)| f.clone().scale(*a)).collect()).expect("count > 0");
        let est = fbl_norm(&e, &sub.binding, Exponent::ONE, cfg)?;
        let target = Exponent::TWO.norm(&alpha);
        let rel = (est.lower - target).abs() / target.max(1e-300);
        worst_rel = worst_rel.max(rel);
        if t == 0 {
            out.push(Record::estimate("first-trial", &est, reference));
        }
    }
    out.push(
        Record::scalar("max-relative-error", worst_rel, false, "lower vs ∥α∥₂", reference)
            .rule("|lower − ∥α∥₂| ≤ 0.02·∥α∥₂ for every trial", worst_rel <= 0.02),
    );
    let mut worst_meet = 0.0f64;
    for i in 0..count {
        for j in i + 1..count {
            let rep = sub.binding.disjointness_check(&sub.exprs[i], &sub.exprs[j], samples, cfg.seed.wrapping_add((i * count + j) as u64))?;
            worst_meet = worst_meet.max(rep.max_meet);
        }
    }
    out.push(Record::scalar("max-meet", worst_meet, false, "sampled", reference).rule("pairwise meets ≤ 1e-9", worst_meet <= 1e-9));
    out.push(Record::scalar(
        "truncation-error",
        sub.truncation_error.iter().fold(0.0, |a: f64, b| a.max(*b)),
        true,
        "tail-bound",
        reference,
    ));
    Ok(out)
}

fn c0_moduli(p: &Params, cfg: &OptimizerConfig, reference: &str, series: &mut Vec<Series>) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    let mut pts = Vec::new();
    for n in p.list::<usize>("ns")? {
        if n == 0 {
            return Err(Error::param("ns", "sizes must be positive"));
        }
        let space = SpaceSpec::ell_inf(2 * n);
        let e = fixtures::unit_vectors(&space)[..n].to_vec();
        let est = moduli_norm(&space, &e, &vec![1.0; n], Exponent::ONE, cfg)?;
        let ratio = est.lower / (n as f64).sqrt();
        pts.push((n as f64, ratio));
        out.push(Record::estimate(format!("moduli-n{n}"), &est, reference));
        out.push(
            Record::scalar(format!("ratio-n{n}"), ratio, est.lower_certified, "lower/sqrt(n)", reference)
                .rule("certified lower/√n in [0.5, 1.8]", est.lower_certified && within(ratio, 0.5, 1.8)),
        );
    }
    series.push(Series {
        label: "moduli lower/sqrt(n)".into(),
        points: pts,
    });
    Ok(out)
}

fn ell1_moduli(p: &Params, cfg: &OptimizerConfig, reference: &str) -> Result<Vec<Record>> {
    let n = p.usize("n")?;
    let space = SpaceSpec::ell(1.0, n);
    let mut rng = rng_for(cfg.seed, 0xe111);
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = a.iter().sum();
    let est = moduli_norm(&space, &fixtures::unit_vectors(&space), &a, Exponent::ONE, cfg)?;
    let ok = est.is_exact(1e-9) && (est.lower - total).abs() <= 1e-9;
    Ok(vec![Record::estimate("moduli", &est, reference).rule(format!("exact value Σa_k = {total}"), ok)])
}

fn lower2(p: &Params, cfg: &OptimizerConfig, reference: &str) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    let mut rng = rng_for(cfg.seed, 0x12e2);
    for n in p.list::<usize>("ns")? {
        let space = SpaceSpec::ell(2.0, n);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = a.iter().sum();
        let est = moduli_norm(&space, &fixtures::unit_vectors(&space), &a, Exponent::ONE, cfg)?;
        let ok = est.lower_certified && est.lower >= 0.99 * total && est.upper <= total + 1e-9;
        out.push(Record::estimate(format!("moduli-n{n}"), &est, reference).rule("certified lower ≥ 0.99·Σa_k, upper ≤ Σa_k", ok));
    }
    Ok(out)
}

fn infty_equivalence(p: &Params, cfg: &OptimizerConfig, reference: &str) -> Result<Vec<Record>> {
    let n = p.usize("n")?;
    let mut out = Vec::new();
    let mut rng = rng_for(cfg.seed, 0x1f1f);
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    for r in p.list::<Exponent>("rs")? {
        let space = SpaceSpec::new(r, n)?;
        let b = GeneratorBinding::new(space.clone(), fixtures::unit_vectors(&space))?;
        let plain = LatticeExpr::sum((0..n).map(|k| LatticeExpr::gen(k).scale(a[k])).collect()).expect("n > 0");
        let mods = LatticeExpr::moduli_combination(&a).expect("n > 0");
        let e1 = fbl_infty_norm(&plain, &b, cfg)?;
        let e2 = fbl_infty_norm(&mods, &b, cfg)?;
        let ratio = e2.lower / e1.lower;
        out.push(Record::estimate(format!("basis-r{r}"), &e1, reference));
        out.push(Record::estimate(format!("moduli-r{r}"), &e2, reference));
        out.push(
            Record::scalar(format!("ratio-r{r}"), ratio, false, "moduli/basis", reference)
                .rule("agree within 1e-6 for a 1-unconditional basis", (ratio - 1.0).abs() <= 1e-6),
        );
    }
    Ok(out)
}

fn upper_estimate(p: &Params, cfg: &OptimizerConfig, reference: &str) -> Result<Vec<Record>> {
    let r = p.exponent("r")?;
    let n = p.usize("n")?;
    let q = p.exponent("q")?;
    let pconj = q.conjugate();
    let space = SpaceSpec::new(r, n)?;
    let id = LinearMap::identity(&space.dual());
    let pi = pi_q1_lower(&id, q, cfg);
    let sub = sublattice_generators(&space, n, n)?;
    let sum = LatticeExpr::sum(sub.exprs.clone()).expect("n > 0");
    let total = fbl_norm(&sum, &sub.binding, Exponent::ONE, cfg)?;
    let parts = sub
        .exprs
        .iter()
        .map(|f| fbl_norm(f, &sub.binding, Exponent::ONE, cfg))
        .collect::<Result<Vec<_>>>()?;
    let denom = pconj.combine(parts.iter().map(|e| e.upper));
    let ratio = total.lower / denom;
    let ok = ratio <= pi.upper * (1.0 + 1e-6);
    Ok(vec![
        Record::estimate("pi-q1-dual-identity", &pi, reference),
        Record::estimate("disjoint-sum", &total, reference),
        Record::scalar("disjoint-ratio", ratio, total.lower_certified && parts.iter().all(|e| e.upper_certified), "lower/upper", reference)
            .rule("disjoint-family ratio ≤ π_{q,1} upper bound", ok),
    ])
}

fn convexity_ceiling(p: &Params, cfg: &OptimizerConfig, reference: &str, series: &mut Vec<Series>) -> Result<Vec<Record>> {
    let q = p.exponent("q")?;
    let mut out = Vec::new();
    let mut pts = Vec::new();
    for n in p.list::<usize>("ns")? {
        let space = SpaceSpec::ell(2.0, n);
        let b = GeneratorBinding::new(space.clone(), fixtures::unit_vectors(&space))?;
        let e = LatticeExpr::power_sum(q, (0..n).map(|k| LatticeExpr::gen(k).abs()).collect());
        let est = fbl_norm(&e, &b, Exponent::ONE, cfg)?;
        let floor = 0.2 * (n as f64).sqrt();
        pts.push((n as f64, est.lower / (n as f64).sqrt()));
        let ok = est.lower_certified && est.lower >= floor;
        out.push(Record::estimate(format!("power-sum-n{n}"), &est, reference).rule("certified lower ≥ 0.2·√n", ok));
    }
    series.push(Series {
        label: "power sum lower/sqrt(n)".into(),
        points: pts,
    });
    Ok(out)
}

fn poe_constants(p: &Params, cfg: &OptimizerConfig, reference: &str) -> Result<Vec<Record>> {
    let q = p.exponent("p")?;
    let mut out = Vec::new();
    for m in p.list::<usize>("ms")? {
        let (space, r) = fixtures::rademachers(m, Exponent::ONE)?;
        let sub = SubspaceSpec::completed(space, r.clone())?;
        let mut eye = vec![vec![0.0; m]; m];
        for (i, row) in eye.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let t = LinearMap::new(eye, SpaceSpec::ell(2.0, m), SpaceSpec::new(q, m)?)?;
        let ext = extension_constant(&sub, &t, q, cfg)?;
        out.push(Record::estimate(format!("extension-m{m}"), &ext, reference).rule("constant at least 1", ext.upper >= 1.0 - 1e-9));
        let join = LatticeExpr::join_all((0..m).map(LatticeExpr::gen).collect()).expect("m > 0");
        let gap = embedding_gap(&sub, &join, &r, q, cfg)?;
        out.push(Record::estimate(format!("join-f-side-m{m}"), &gap.f_side, reference));
        out.push(Record::estimate(format!("join-e-side-m{m}"), &gap.e_side, reference));
        out.push(
            Record::scalar(format!("embedding-ratio-m{m}"), gap.ratio, false, "f-side/e-side", reference)
                .rule("ratio bounds contain a value ≥ 1", gap.bounds.upper >= 1.0 - 1e-9),
        );
        let consistent = gap.ratio <= ext.upper * (1.0 + 2.0 * cfg.tolerance);
        out.push(
            Record::scalar(format!("gap-vs-extension-m{m}"), gap.ratio / ext.upper, false, "ratio/extension", reference)
                .rule("embedding ratio ≤ extension constant·(1 + 2·tolerance)", consistent),
        );
        let sup = SubspaceSpec::coordinate(SpaceSpec::ell(3.0, m + 1), &(0..m).collect::<Vec<_>>())?;
        let t = LinearMap::new(
            (0..m).map(|j| (0..m).map(|i| if i <= j { 1.0 } else { 0.0 }).collect()).collect(),
            SpaceSpec::ell(2.0, m),
            SpaceSpec::new(q, m)?,
        )?;
        let coord = extension_constant(&sup, &t, q, cfg)?;
        out.push(Record::estimate(format!("coordinate-m{m}"), &coord, reference).rule("constant ≤ 1 + 1e-3", coord.upper <= 1.0 + 1e-3));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_are_validated() {
        let given = parse_params(&["n=3"]).unwrap();
        let p = resolve_params("haar-level", &given).unwrap();
        assert_eq!(p["n"], "3");
        assert_eq!(p["a"], "random");
        assert!(resolve_params("haar-level", &parse_params(&["bogus=1"]).unwrap()).is_err());
        assert!(matches!(resolve_params("nope", &BTreeMap::new()), Err(Error::UnknownExperiment(_))));
        assert!(parse_params(&["novalue"]).is_err());
    }

    #[test]
    fn haar_level_example() {
        let params = parse_params(&["n=2", "a=1,2,3,4"]).unwrap();
        let rep = run_experiment("haar-level", &params, 0).unwrap();
        let rec = rep.record("moduli-sum").unwrap();
        assert_eq!(rec.pass, Some(true));
        assert!((rec.value - 10.0).abs() < 1e-12);
        assert!(rep.passed(), "{rep:#?}");
    }

    #[test]
    fn reports_serialize_reproducibly() {
        let params = parse_params(&["n=1"]).unwrap();
        let a = run_experiment("haar-level", &params, 7).unwrap();
        let b = run_experiment("haar-level", &params, 7).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let csv = a.to_csv().unwrap();
        assert!(csv.starts_with("experiment,quantity,lower,upper,certified,reference,pass"));
        assert_eq!(csv.lines().count(), a.records.len() + 1);
    }

    #[test]
    fn catalog_names_are_unique() {
        let mut names: Vec<&str> = catalog().iter().map(|e| e.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), catalog().len());
    }
}
