//! Scenario catalog, suite dispatch and report assembly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::calculus::{bracket_form_field, directional, lie_derivative};
use crate::canonical::{verify_identity_suite, CanonicalPack, SemiSpray, SprayType};
use crate::chart::{sample_points, Chart, SampleBox};
use crate::connection::{
    associated_semispray, catz_decompose_type2, conjugate_pair, decompose_type1, eq17_form, matrix_from_json, matrix_to_json,
    random_type1, reference_semispray, strong_torsion, strong_torsion_closed_form, strong_torsion_type2, torsion_checks,
    type1_spray_n1, validate_connection, Connection,
};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::finsler::{exactness_suite, finsler_suite, search_witness, FinslerianForm};
use crate::gen::PolyGen;
use crate::linear::{
    covariant_derivative, family_n1_ext, homogeneity_criterion, induced_connection, is_regular, parallel_check, prop3_obstruction,
    prop4_relation, sample_n1, torsion_free_n1, LinearConnection, Regularity,
};
use crate::report::{Check, RunConfig, Tolerance, VerificationReport};
use crate::tensor::{compare, magnitude, VectorField, VectorOneForm};

/// Theorem groups that can be selected for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Suite {
    #[serde(rename = "eq1-8")]
    Identities,
    #[serde(rename = "sec2")]
    Sec2,
    #[serde(rename = "sec3")]
    Sec3,
    #[serde(rename = "sec4")]
    Sec4,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Identities, Suite::Sec2, Suite::Sec3, Suite::Sec4];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "eq1-8",
            Suite::Sec2 => "sec2",
            Suite::Sec3 => "sec3",
            Suite::Sec4 => "sec4",
        }
    }
}

/// A `--suite` value: one suite or all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteSelection {
    One(Suite),
    All,
}

impl SuiteSelection {
    pub fn suites(self) -> Vec<Suite> {
        match self {
            SuiteSelection::One(s) => vec![s],
            SuiteSelection::All => Suite::ALL.to_vec(),
        }
    }
}

impl FromStr for SuiteSelection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" => Ok(SuiteSelection::All),
            _ => Suite::ALL
                .iter()
                .find(|x| x.name() == s)
                .map(|x| SuiteSelection::One(*x))
                .ok_or_else(|| format!("unknown suite \"{s}\" (expected eq1-8, sec2, sec3, sec4 or all)")),
        }
    }
}

impl fmt::Display for SuiteSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuiteSelection::One(s) => f.write_str(s.name()),
            SuiteSelection::All => f.write_str("all"),
        }
    }
}

fn default_points() -> usize {
    25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bounds: SampleBox,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { points: default_points(), seed: 0, bounds: SampleBox::default() }
    }
}

/// Reference values a scenario is expected to reproduce.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub matrices: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j1_regular: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j2_regular: Option<bool>,
}

impl Expected {
    fn is_empty(&self) -> bool {
        self.matrices.is_empty() && self.j1_regular.is_none() && self.j2_regular.is_none()
    }
}

/// Object definitions as expression ASTs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objects {
    /// `{"type": 1|2, "components": [ast | null]}`; `null` marks a forced entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spray: Option<Value>,
    /// `3n × 3n` array of ASTs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torsion: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finsler: Option<Value>,
    #[serde(default, skip_serializing_if = "Expected::is_empty")]
    pub expected: Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub n: usize,
    #[serde(default)]
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default = "default_tolerance")]
    pub tolerance: Tolerance,
    #[serde(default)]
    pub objects: Objects,
}

fn default_tolerance() -> Tolerance {
    Tolerance::POLY
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Scenario> {
        let sc: Scenario = serde_json::from_str(s).map_err(|e| Error::schema("", e.to_string()))?;
        sc.check_objects()?;
        Ok(sc)
    }

    pub fn load(path: &std::path::Path) -> Result<Scenario> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Scenario::from_json_str(&s)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    /// Parses every object definition so schema errors surface before running.
    pub fn check_objects(&self) -> Result<()> {
        let chart = Chart::new(self.n)?;
        let ptr = |p: &str, e: Error| match e {
            Error::Schema { pointer, message } => Error::Schema { pointer: format!("/objects/{p}{pointer}"), message },
            other => other,
        };
        let o = &self.objects;
        if let Some(s) = &o.spray {
            parse_spray(s, chart).map_err(|e| ptr("spray", e))?;
        }
        if let Some(t) = &o.torsion {
            matrix_from_json(t, chart, "").map_err(|e| ptr("torsion", e))?;
        }
        if let Some(c) = &o.connection {
            let c = Connection::from_json(c).map_err(|e| ptr("connection", e))?;
            c.chart().ensure_same(&chart)?;
        }
        if let Some(l) = &o.linear {
            let l = LinearConnection::from_json(l).map_err(|e| ptr("linear", e))?;
            l.chart().ensure_same(&chart)?;
        }
        if let Some(f) = &o.finsler {
            let w = FinslerianForm::from_json(f).map_err(|e| ptr("finsler", e))?;
            w.chart().ensure_same(&chart)?;
        }
        for (name, m) in &o.expected.matrices {
            if m.len() != chart.dim() || m.iter().any(|r| r.len() != chart.dim()) {
                return Err(Error::schema(format!("/objects/expected/matrices/{name}"), format!("expected a {0}x{0} matrix", chart.dim())));
            }
        }
        Ok(())
    }
}

pub fn spray_to_json(s: &SemiSpray) -> Result<Value> {
    let comps: Result<Vec<Value>> = s.field.comps().iter().map(Expr::to_json).collect();
    Ok(json!({"type": u8::from(s.kind), "components": comps?}))
}

pub fn parse_spray(v: &Value, chart: Chart) -> Result<SemiSpray> {
    let obj = v.as_object().ok_or_else(|| Error::schema("", "spray must be an object"))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "type" | "components") {
            return Err(Error::schema("", format!("unknown field \"{key}\"")));
        }
    }
    let kind = match obj.get("type").and_then(Value::as_u64) {
        Some(1) => SprayType::One,
        Some(2) => SprayType::Two,
        _ => return Err(Error::schema("/type", "expected 1 or 2")),
    };
    let comps = obj
        .get("components")
        .and_then(Value::as_array)
        .filter(|a| a.len() == chart.dim())
        .ok_or_else(|| Error::schema("/components", format!("expected {} entries", chart.dim())))?;
    let parsed: Result<Vec<Option<Expr>>> = comps
        .iter()
        .enumerate()
        .map(|(k, c)| if c.is_null() { Ok(None) } else { Expr::from_json(c, Some(chart.n), &format!("/components/{k}")).map(Some) })
        .collect();
    SemiSpray::complete(chart, kind, parsed?)
}

fn rows(m: &[[f64; 3]]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

fn diag3(a: f64, b: f64, c: f64) -> Vec<Vec<f64>> {
    rows(&[[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
}

/// Points on which built-in searches are run.
fn search_points(n: usize) -> Vec<Vec<f64>> {
    sample_points(Chart::new(n).unwrap(), 25, 0, &SampleBox::default())
}

/// Names and one-line descriptions of the built-in scenarios.
pub fn catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("flat-n1", "n = 1, spray (y, z, 0), flat linear connection: identities, regression matrices, conjugate pair, regularity"),
        ("linear-sample-n1", "n = 1, J1-regular connection Γ(X, Y) = (X_z Y_x / y, 0, X_z Y_z / y)"),
        ("linear-prop4-n1", "n = 1, J1-regular connection with [C2, DC1] = 0 and nonzero strong torsion"),
        ("linear-torsion-free-n1", "n = 1, torsion-free connection with DJ1 = 0"),
        ("decompose-n1", "n = 1, type-1 spray (y, y²/2, yz/2 - y³/4) decomposed with zero torsion"),
        ("catz-n1", "n = 1, spray (y, z, 0) with a π1-semi-basic torsion"),
        ("finsler-n2", "n = 2, searched Finslerian form, canonical spray and connections"),
        ("identities-n1", "identity suite at n = 1"),
        ("identities-n2", "identity suite at n = 2"),
        ("identities-n3", "identity suite at n = 3"),
    ]
}

pub fn builtin(name: &str) -> Result<Scenario> {
    let base = |n: usize, suites: Vec<Suite>, tolerance: Tolerance| Scenario {
        name: name.into(),
        description: catalog().into_iter().find(|(k, _)| *k == name).map(|(_, d)| d.to_string()).unwrap_or_default(),
        n,
        suites,
        sampling: Sampling::default(),
        tolerance,
        objects: Objects::default(),
    };
    let c1 = Chart::new(1)?;
    let mut sc = match name {
        "flat-n1" => {
            let mut sc = base(1, Suite::ALL.to_vec(), Tolerance::POLY);
            sc.objects.spray = Some(spray_to_json(&reference_semispray(c1, SprayType::Two))?);
            sc.objects.linear = Some(LinearConnection::flat(c1).to_json()?);
            let m = &mut sc.objects.expected.matrices;
            m.insert("j2s".into(), diag3(1.0, 1.0, -2.0));
            m.insert("j1s".into(), rows(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]));
            m.insert("j1ss".into(), diag3(1.0, -2.0, 1.0));
            m.insert("gamma1".into(), diag3(1.0, -1.0, -1.0));
            m.insert("gamma2".into(), diag3(1.0, 1.0, -1.0));
            m.insert("induced_j2".into(), diag3(1.0, -1.0, -1.0));
            sc.objects.expected.j1_regular = Some(false);
            sc.objects.expected.j2_regular = Some(true);
            sc
        }
        "linear-sample-n1" => {
            let mut sc = base(1, vec![Suite::Sec3], Tolerance::RATIONAL);
            sc.objects.linear = Some(sample_n1().to_json()?);
            sc.objects.expected.matrices.insert("induced_j1".into(), rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -2.0, -1.0]]));
            sc.objects.expected.j1_regular = Some(true);
            sc.objects.expected.j2_regular = Some(false);
            sc
        }
        "linear-prop4-n1" => {
            let mut sc = base(1, vec![Suite::Sec3], Tolerance::RATIONAL);
            sc.objects.linear = Some(family_n1_ext(0.5, -1.0, 1.0, 0.5).to_json()?);
            sc.objects.expected.j1_regular = Some(true);
            sc
        }
        "linear-torsion-free-n1" => {
            let mut sc = base(1, vec![Suite::Sec3], Tolerance::POLY);
            sc.objects.linear = Some(torsion_free_n1().to_json()?);
            sc.objects.expected.j1_regular = Some(false);
            sc
        }
        "decompose-n1" => {
            let mut sc = base(1, vec![Suite::Sec2], Tolerance::RATIONAL);
            sc.objects.spray = Some(spray_to_json(&type1_spray_n1(0.5, -0.25))?);
            sc.objects.torsion = Some(matrix_to_json(&VectorOneForm::zero(c1))?);
            sc
        }
        "catz-n1" => {
            let mut sc = base(1, vec![Suite::Sec2], Tolerance::POLY);
            sc.objects.spray = Some(spray_to_json(&reference_semispray(c1, SprayType::Two))?);
            let t = VectorOneForm::from_fn(c1, |r, c| match (r, c) {
                (2, 0) => Expr::z(0) * 0.5,
                (2, 1) => Expr::y(0) * -0.5,
                _ => Expr::zero(),
            });
            sc.objects.torsion = Some(matrix_to_json(&t)?);
            sc
        }
        "finsler-n2" => {
            let mut sc = base(2, vec![Suite::Sec4], Tolerance::RATIONAL);
            let (found, _) = search_witness(&search_points(2), Tolerance::RATIONAL);
            let (f, _, _) = found.ok_or_else(|| Error::NoSolution("no Finslerian witness in the searched families".into()))?;
            sc.objects.finsler = Some(f.to_json()?);
            sc
        }
        "identities-n1" => base(1, vec![Suite::Identities], Tolerance::POLY),
        "identities-n2" => base(2, vec![Suite::Identities], Tolerance::POLY),
        "identities-n3" => base(3, vec![Suite::Identities], Tolerance::POLY),
        _ => return Err(Error::Parse(format!("unknown scenario \"{name}\"; see `list`"))),
    };
    sc.name = name.into();
    Ok(sc)
}

/// Overrides applied on top of a scenario.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub suite: Option<SuiteSelection>,
}

/// Runs the selected suites; an error inside a suite becomes a failed check.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<VerificationReport> {
    sc.check_objects()?;
    let points_n = opts.points.unwrap_or(sc.sampling.points);
    let seed = opts.seed.unwrap_or(sc.sampling.seed);
    let tol = opts.tol.map(|a| sc.tolerance.with_abs(a)).unwrap_or(sc.tolerance);
    let suites = opts.suite.map(SuiteSelection::suites).unwrap_or_else(|| sc.suites.clone());
    let pk = CanonicalPack::new(sc.n)?;
    let points = sample_points(pk.chart, points_n, seed, &sc.sampling.bounds);
    let ctx = Ctx { sc, pk: &pk, points: &points, seed, tol };
    let mut checks = Vec::new();
    for s in &suites {
        let res = match s {
            Suite::Identities => verify_identity_suite(sc.n, &points, 5, seed, tol),
            Suite::Sec2 => ctx.sec2(),
            Suite::Sec3 => ctx.sec3(),
            Suite::Sec4 => ctx.sec4(),
        };
        match res {
            Ok(c) => checks.extend(c),
            Err(e) => checks.push(Check::flag(&format!("{}.error", s.name()), "§ suite", points.len(), false, e.to_string())),
        }
    }
    let suite = if suites.is_empty() { "none".to_string() } else { suites.iter().map(|s| s.name()).collect::<Vec<_>>().join(",") };
    let config = RunConfig { n: sc.n, points: points.len(), seed, tolerance: tol, suite };
    Ok(VerificationReport::new(&sc.name, config, checks))
}

struct Ctx<'a> {
    sc: &'a Scenario,
    pk: &'a CanonicalPack,
    points: &'a [Vec<f64>],
    seed: u64,
    tol: Tolerance,
}

/// Regression comparisons are held to this absolute tolerance.
const REGRESSION: Tolerance = Tolerance { abs: 1e-12, rel: 0.0 };

fn not_applicable(id: &str, anchor: &str, np: usize, why: impl fmt::Display) -> Check {
    Check::flag(id, anchor, np, true, format!("not applicable: {why}"))
}

fn with_anchor(mut checks: Vec<Check>, anchor: &str) -> Vec<Check> {
    for c in &mut checks {
        c.anchor = anchor.into();
    }
    checks
}

impl Ctx<'_> {
    fn np(&self) -> usize {
        self.points.len()
    }

    fn regression(&self, key: &str, anchor: &str, got: &VectorOneForm) -> Option<Check> {
        let want = self.sc.objects.expected.matrices.get(key)?;
        let r = VectorOneForm::constant(self.pk.chart, &want.iter().map(|r| r.as_slice()).collect::<Vec<_>>())
            .and_then(|w| compare(got, &w, self.points));
        Some(Check::from_result(&format!("regress.{key}"), anchor, self.np(), r, REGRESSION))
    }

    fn spray(&self) -> Result<Option<SemiSpray>> {
        self.sc.objects.spray.as_ref().map(|s| parse_spray(s, self.pk.chart)).transpose()
    }

    fn torsion(&self) -> Result<Option<VectorOneForm>> {
        self.sc.objects.torsion.as_ref().map(|t| matrix_from_json(t, self.pk.chart, "/objects/torsion")).transpose()
    }

    fn sec2(&self) -> Result<Vec<Check>> {
        let (pk, p, tol, np) = (self.pk, self.points, self.tol, self.np());
        let mut out = Vec::new();
        let spray = self.spray()?.unwrap_or_else(|| reference_semispray(pk.chart, SprayType::Two));
        let torsion = self.torsion()?;
        match spray.kind {
            SprayType::Two => {
                let j2s = bracket_form_field(&pk.j2, &spray.field)?;
                let j1s = bracket_form_field(&pk.j1, &spray.field)?;
                let j1ss = bracket_form_field(&j1s, &spray.field)?;
                out.extend(self.regression("j2s", "Eq (12)", &j2s));
                out.extend(self.regression("j1s", "Eq (11)", &j1s));
                out.extend(self.regression("j1ss", "Eq (11)", &j1ss));
                let (g1, g2) = conjugate_pair(pk, &spray, p, tol)?;
                out.extend(self.regression("gamma1", "Eq (11)", &g1.gamma));
                out.extend(self.regression("gamma2", "Eq (12)", &g2.gamma));
                out.extend(with_anchor(validate_connection(pk, &g1, p, tol, "eq11.gamma1"), "Eq (11)"));
                out.extend(with_anchor(validate_connection(pk, &g2, p, tol, "eq12.gamma2"), "Eq (12)"));
                out.push(Check::residual("eq11.homogeneous", "Eq (11)", np, magnitude(&lie_derivative(&pk.c2, &g1.gamma)?, p)?, tol));
                out.push(Check::residual("eq12.homogeneous", "Eq (12)", np, magnitude(&lie_derivative(&pk.c2, &g2.gamma)?, p)?, tol));
                out.extend(torsion_checks(pk, &g1, p, tol, "def1.gamma1"));
                // decomposition with the given (or zero) torsion, and back
                let t = torsion.unwrap_or_else(|| VectorOneForm::zero(pk.chart));
                let catz = catz_decompose_type2(pk, &spray, &t, p, tol)?;
                out.push(Check::residual("catz.torsion_round_trip", "§2 Catz", np, compare(&strong_torsion_type2(pk, &catz)?, &t, p)?, tol));
                let assoc = associated_semispray(&catz, &reference_semispray(pk.chart, SprayType::Two))?;
                out.push(Check::residual("catz.spray_round_trip", "§2 Catz", np, compare(&assoc.field, &spray.field, p)?, tol));
                out.push(Check::residual("catz.homogeneous", "§2 Catz", np, magnitude(&lie_derivative(&pk.c2, &catz.gamma)?, p)?, tol));
                // type-1 decomposition of Γ₁ when [C1, Γ1] = 0
                let c1g = magnitude(&lie_derivative(&pk.c1, &g1.gamma)?, p)?;
                if tol.accepts(c1g.value, c1g.scale) {
                    let s1 = associated_semispray(&g1, &reference_semispray(pk.chart, SprayType::One))?;
                    let t1 = strong_torsion(pk, &g1, &s1)?;
                    out.extend(self.thm1(&s1, &t1, Some(&g1), "thm1.gamma1")?);
                } else {
                    out.push(not_applicable("thm1.gamma1", "Thm 1", np, format!("[C1, Γ1] = {:.3e}", c1g.value)));
                }
            }
            SprayType::One => {
                let t = torsion.unwrap_or_else(|| VectorOneForm::zero(pk.chart));
                out.extend(self.thm1(&spray, &t, None, "thm1.given")?);
            }
        }
        if let Some(c) = &self.sc.objects.connection {
            let c = Connection::from_json(c)?;
            out.extend(validate_connection(pk, &c, p, tol, "given"));
            if c.kind == SprayType::One {
                out.extend(torsion_checks(pk, &c, p, tol, "def1.given"));
            }
        }
        // flat type-1 decomposition at this n
        out.extend(self.thm1(&reference_semispray(pk.chart, SprayType::One), &VectorOneForm::zero(pk.chart), None, "thm1.flat")?);
        // strong torsion from the definition against the closed form on random homogeneous connections
        let mut gen = PolyGen::new(self.seed);
        for k in 0..5 {
            let c = random_type1(pk.chart, false, &mut gen);
            out.extend(torsion_checks(pk, &c, p, tol, &format!("def1.random{k}")));
        }
        for k in 0..3 {
            let c = random_type1(pk.chart, true, &mut gen);
            let r = eq17_form(pk, &c, p, tol).and_then(|t17| compare(&t17, &strong_torsion_closed_form(pk, &c)?, p));
            out.push(Check::from_result(&format!("eq17.random{k}"), "Eq (17)", np, r, tol));
        }
        Ok(out)
    }

    fn thm1(&self, s: &SemiSpray, t: &VectorOneForm, expect: Option<&Connection>, prefix: &str) -> Result<Vec<Check>> {
        let (pk, p, tol, np) = (self.pk, self.points, self.tol, self.np());
        let mut out = Vec::new();
        match decompose_type1(pk, s, t, p, tol) {
            Ok(c) => {
                let j1s = bracket_form_field(&pk.j1, &s.field)?;
                let rhs = VectorOneForm::combine(pk.chart, &[(2.0, t), (1.0, &pk.j2), (4.0, &j1s)])?;
                out.push(Check::residual(&format!("{prefix}.eq18"), "Eq (18)", np, compare(&pk.j2.compose(&c.gamma)?, &rhs, p)?, tol));
                out.push(Check::residual(&format!("{prefix}.torsion"), "Thm 1", np, compare(&strong_torsion(pk, &c, s)?, t, p)?, tol));
                let assoc = associated_semispray(&c, &reference_semispray(pk.chart, SprayType::One))?;
                out.push(Check::residual(&format!("{prefix}.spray"), "Thm 1", np, compare(&assoc.field, &s.field, p)?, tol));
                if let Some(e) = expect {
                    out.push(Check::residual(&format!("{prefix}.unique"), "Thm 1", np, compare(&c.gamma, &e.gamma, p)?, tol));
                }
            }
            Err(e) => out.push(Check::flag(&format!("{prefix}.decompose"), "Thm 1", np, false, e.to_string())),
        }
        Ok(out)
    }

    fn sec3(&self) -> Result<Vec<Check>> {
        let (pk, p, tol, np) = (self.pk, self.points, self.tol, self.np());
        let Some(lv) = &self.sc.objects.linear else {
            return Ok(vec![not_applicable("sec3.linear", "Def 2", np, "no linear connection in the scenario")]);
        };
        let d = LinearConnection::from_json(lv)?;
        let mut out = Vec::new();

        // Leibniz rule on random data
        let mut gen = PolyGen::new(self.seed ^ 0x5ec3);
        let x = VectorField::from_fn(pk.chart, |_| gen.poly(pk.chart, 2, 2));
        let y = VectorField::from_fn(pk.chart, |_| gen.poly(pk.chart, 2, 2));
        let f = gen.poly(pk.chart, 2, 3);
        let lhs = covariant_derivative(&d, &x, &y.scale_expr(&f))?;
        let rhs = y.scale_expr(&directional(pk.chart, x.comps(), &f)).add(&covariant_derivative(&d, &x, &y)?.scale_expr(&f))?;
        out.push(Check::residual("sec3.leibniz", "§3 linear connection", np, compare(&lhs, &rhs, p)?, tol));

        let r1 = parallel_check(&d, &pk.j1, p)?;
        let r2 = parallel_check(&d, &pk.j2, p)?;
        let (p1, p2) = (tol.accepts(r1.value, r1.scale), tol.accepts(r2.value, r2.scale));
        out.push(Check::flag("def2.dj2_implies_dj1", "Def 2", np, !p2 || p1, format!("|DJ1| = {:.3e}, |DJ2| = {:.3e}", r1.value, r2.value)));

        for kind in [Regularity::J1, Regularity::J2] {
            let tag = kind.name().to_lowercase();
            let cert = is_regular(&d, pk, kind, p, tol);
            let expected = match kind {
                Regularity::J1 => self.sc.objects.expected.j1_regular,
                Regularity::J2 => self.sc.objects.expected.j2_regular,
            };
            let note = format!("{}-regular: {}{}", kind.name(), cert.verdict, cert.reason.as_ref().map(|r| format!(" ({r})")).unwrap_or_default());
            out.push(match expected {
                Some(e) => Check::flag(&format!("def2.{tag}_regular"), "Def 2", np, e == cert.verdict, note),
                None => Check::flag(&format!("def2.{tag}_regular"), "Def 2", np, true, note),
            });
            if !cert.verdict {
                let r = induced_connection(&d, pk, kind, p, tol);
                out.push(Check::flag(&format!("thm2.{tag}.guard"), "Thm 2", np, matches!(r, Err(Error::NotRegular { .. })), "induced connection refused"));
                continue;
            }
            let conn = induced_connection(&d, pk, kind, p, tol)?;
            out.extend(with_anchor(validate_connection(pk, &conn, p, tol, &format!("thm2.{tag}")), "Thm 2"));
            out.extend(self.regression(&format!("induced_{tag}"), "Thm 2", &conn.gamma));
            let h = homogeneity_criterion(&d, pk, kind, p, tol)?;
            out.push(Check::flag(
                &format!("prop2.{tag}.agree"),
                "Prop 2",
                np,
                h.agrees(),
                format!(
                    "criterion {} ({:.3e}), homogeneous {} ({:.3e})",
                    h.criterion, h.criterion_residual.value, h.homogeneous, h.homogeneity_residual.value
                ),
            ));
        }

        let tr = d.torsion_residual(p)?;
        if tol.accepts(tr.value, tr.scale) && p1 {
            out.extend(prop3_obstruction(&d, pk, p, tol, "prop3")?);
        } else {
            out.push(not_applicable("prop3", "Prop 3", np, format!("torsion {:.3e}, DJ1 {:.3e}", tr.value, r1.value)));
        }

        match prop4_relation(&d, pk, p, tol, "prop4") {
            Ok(r) => {
                out.extend(r.checks);
                let s = associated_semispray(&r.gamma2, &reference_semispray(pk.chart, SprayType::Two))?;
                let (bar1, bar2) = conjugate_pair(pk, &s, p, tol)?;
                out.push(Check::residual("eq19.gamma2_bar", "Eq (19)", np, compare(&bar2.gamma, &r.gamma2_bar.gamma, p)?, tol));
                out.extend(with_anchor(validate_connection(pk, &bar1, p, tol, "rem4.gamma1_bar"), "Remark 4"));
            }
            Err(Error::PreconditionFailed { what, residual }) => {
                out.push(not_applicable("prop4", "Prop 4", np, format!("{what} fails ({residual:.3e})")));
            }
            Err(e) => return Err(e),
        }
        Ok(out)
    }

    fn sec4(&self) -> Result<Vec<Check>> {
        let (pk, p, tol, np) = (self.pk, self.points, self.tol, self.np());
        let mut out = exactness_suite(pk, p, self.seed, tol)?;
        if let Some(fv) = &self.sc.objects.finsler {
            let omega = FinslerianForm::from_json(fv)?;
            match FinslerianForm::new(pk, omega, p, tol) {
                Ok(mut f) => {
                    f.domain = fv.get("domain").and_then(Value::as_str).map(String::from);
                    out.extend(finsler_suite(pk, &f, p, self.seed, tol)?);
                }
                Err(e) => out.push(Check::flag("def3.valid", "Def 3", np, false, e.to_string())),
            }
        }
        Ok(out)
    }
}

/// Validates a standalone object file of the given kind.
pub fn check_object(kind: &str, v: &Value, points: usize, seed: u64, tol: Option<f64>) -> Result<VerificationReport> {
    let n = v.get("n").and_then(Value::as_u64).ok_or_else(|| Error::schema("/n", "expected a positive integer"))? as usize;
    let mut sc = Scenario {
        name: format!("check-{kind}"),
        description: String::new(),
        n,
        suites: Vec::new(),
        sampling: Sampling { points, seed, bounds: SampleBox::default() },
        tolerance: Tolerance::RATIONAL,
        objects: Objects::default(),
    };
    match kind {
        "connection" => {
            let c = Connection::from_json(v)?;
            let pk = CanonicalPack::new(n)?;
            let pts = sample_points(pk.chart, points, seed, &SampleBox::default());
            let t = tol.map(|a| sc.tolerance.with_abs(a)).unwrap_or(sc.tolerance);
            let mut checks = validate_connection(&pk, &c, &pts, t, "conn");
            let valid = checks.iter().all(|c| c.passed);
            if valid && c.kind == SprayType::One {
                checks.extend(torsion_checks(&pk, &c, &pts, t, "def1"));
            }
            let config = RunConfig { n, points: pts.len(), seed, tolerance: t, suite: "connection".into() };
            return Ok(VerificationReport::new(&sc.name, config, checks));
        }
        "linear" => {
            sc.objects.linear = Some(v.clone());
            sc.suites = vec![Suite::Sec3];
        }
        "finsler" => {
            sc.objects.finsler = Some(v.clone());
            sc.suites = vec![Suite::Sec4];
        }
        _ => return Err(Error::Parse(format!("unknown kind \"{kind}\" (expected connection, linear or finsler)"))),
    }
    run_scenario(&sc, &RunOptions { tol, ..Default::default() })
}

/// Labels every built-in scenario is collectively expected to exercise.
pub const REQUIRED_ANCHORS: &[&str] = &[
    "Eq (1)", "Eq (2)", "Eq (3)", "Eq (4)", "Eq (5)", "Eq (6)", "Eq (7)", "Eq (8)", "Eq (9)", "Eq (10)", "Eq (11)", "Eq (12)",
    "Eq (13)", "Eq (17)", "Eq (18)", "Eq (19)", "Def 1", "Prop 1(a)", "Prop 1(b)", "Thm 1", "§2 Catz", "Def 2", "Thm 2",
    "Prop 2", "Prop 3", "Prop 4", "Remark 4", "Lemma 1", "Prop 5", "Cor 1", "Thm 3", "Def 3", "Prop 6", "Prop 7", "Def 5",
    "Thm 4", "Thm 5", "Prop 8", "Remark 5", "Thm 6", "Thm 7",
];

/// Anchors among `REQUIRED_ANCHORS` that no check in `reports` carries.
pub fn coverage_gaps(reports: &[VerificationReport]) -> Vec<&'static str> {
    REQUIRED_ANCHORS
        .iter()
        .copied()
        .filter(|a| !reports.iter().any(|r| r.checks.iter().any(|c| c.anchor == *a)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        assert_eq!("eq1-8".parse::<SuiteSelection>(), Ok(SuiteSelection::One(Suite::Identities)));
        assert_eq!("all".parse::<SuiteSelection>().unwrap().suites().len(), 4);
        assert!("sec5".parse::<SuiteSelection>().is_err());
    }

    #[test]
    fn catalog_contract() {
        let names: Vec<&str> = catalog().iter().map(|(n, _)| *n).collect();
        for n in ["flat-n1", "linear-sample-n1", "finsler-n2"] {
            assert!(names.contains(&n));
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn empty_suite_selection() {
        let mut sc = builtin("flat-n1").unwrap();
        sc.suites.clear();
        let r = run_scenario(&sc, &RunOptions::default()).unwrap();
        assert_eq!(r.summary.total, 0);
        assert!(r.all_passed());
        assert_eq!(r.config.suite, "none");
    }

    #[test]
    fn scenario_round_trip() {
        for name in ["flat-n1", "catz-n1", "linear-sample-n1"] {
            let sc = builtin(name).unwrap();
            assert_eq!(Scenario::from_json_str(&sc.to_json()).unwrap(), sc);
        }
    }

    #[test]
    fn malformed_node_is_located() {
        let sc = builtin("catz-n1").unwrap();
        let mut v: Value = serde_json::from_str(&sc.to_json()).unwrap();
        v["objects"]["torsion"][2][0] = json!({"op": "pow", "args": []});
        match Scenario::from_json_str(&v.to_string()) {
            Err(Error::Schema { pointer, .. }) => assert!(pointer.starts_with("/objects/torsion/2/0"), "{pointer}"),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"name": "x", "n": 1, "bogus": 1}"#;
        assert!(matches!(Scenario::from_json_str(bad), Err(Error::Schema { .. })));
    }

    #[test]
    fn tolerance_override() {
        let sc = builtin("identities-n1").unwrap();
        let r = run_scenario(&sc, &RunOptions { points: Some(3), tol: Some(1e-6), ..Default::default() }).unwrap();
        assert_eq!(r.config.tolerance.abs, 1e-6);
        assert_eq!(r.config.points, 3);
    }
}
