//! One line per acceptance criterion; exits nonzero if any fails.

use std::process::Command;
use std::time::Instant;

use t2calc::canonical::{is_spray, random_semispray, verify_identity_suite, CanonicalPack, SprayType};
use t2calc::connection::{decompose_type1, reference_semispray, validate_connection, Connection};
use t2calc::finsler::FinslerianForm;
use t2calc::gen::PolyGen;
use t2calc::scenario::{builtin, catalog, run_scenario, RunOptions};
use t2calc::tensor::compare;
use t2calc::{sample_points, Chart, Check, Error, SampleBox, ScalarForm, Tolerance, VectorOneForm, VerificationReport};

struct Crit {
    failures: Vec<String>,
}

impl Crit {
    fn new() -> Self {
        Crit { failures: Vec::new() }
    }

    fn need(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    /// Check `id` exists, passed, and its residual is at most `bound`.
    fn residual(&mut self, r: &VerificationReport, id: &str, bound: f64) {
        match r.checks.iter().find(|c| c.id == id) {
            Some(c) => {
                let v = c.max_residual.unwrap_or(f64::INFINITY);
                self.need(c.passed && v <= bound, format!("{}:{id} = {v:e} (bound {bound:e})", r.scenario));
            }
            None => self.need(false, format!("{}:{id} missing", r.scenario)),
        }
    }

    fn passed(&mut self, r: &VerificationReport, id: &str) {
        let ok = r.checks.iter().any(|c| c.id == id && c.passed);
        self.need(ok, format!("{}:{id} not passed", r.scenario));
    }

    fn prefix_within(&mut self, r: &VerificationReport, prefix: &str, bound: f64) {
        let cs: Vec<&Check> = r.checks.iter().filter(|c| c.id.starts_with(prefix)).collect();
        self.need(!cs.is_empty(), format!("{}:{prefix}* missing", r.scenario));
        for c in cs {
            let ok = c.passed && c.max_residual.is_none_or(|v| v <= bound);
            self.need(ok, format!("{}:{} = {:?}", r.scenario, c.id, c.max_residual));
        }
    }

    fn report(self, n: usize, title: &str) -> bool {
        let ok = self.failures.is_empty();
        println!("criterion {n}: {} {title}", if ok { "PASS" } else { "FAIL" });
        for f in &self.failures {
            println!("    {f}");
        }
        ok
    }
}

fn run(name: &str) -> VerificationReport {
    let sc = builtin(name).expect("built-in scenario");
    run_scenario(&sc, &RunOptions::default()).expect("scenario runs")
}

fn criterion1() -> bool {
    let mut c = Crit::new();
    let start = Instant::now();
    for n in 1..=3 {
        let pts = sample_points(Chart::new(n).unwrap(), 25, 0, &SampleBox::default());
        let checks = verify_identity_suite(n, &pts, 5, 0, Tolerance::POLY).expect("identity suite");
        for ch in &checks {
            let eq = ch.anchor.trim_start_matches("Eq (").trim_end_matches(')').parse::<u32>().unwrap_or(0);
            let v = ch.max_residual;
            // the subspace distance is a floating-point SVD, not an algebraic residual
            let bound = if ch.id == "eq1.kernel_image" {
                1e-12
            } else if eq <= 5 {
                0.0
            } else {
                1e-9
            };
            c.need(ch.passed && v.is_none_or(|v| v <= bound), format!("n={n} {} = {v:?}", ch.id));
        }
        c.need(checks.iter().any(|ch| ch.anchor == "Eq (8)"), format!("n={n}: no Eq (8) checks"));
    }
    let secs = start.elapsed().as_secs_f64();
    c.need(secs < 10.0, format!("runtime {secs:.2} s"));
    c.report(1, &format!("identity suite n = 1..3, exact (1)-(5), < 1e-9 (6)-(8), {secs:.2} s"))
}

fn criterion2() -> bool {
    let mut c = Crit::new();
    let r = run("flat-n1");
    for key in ["j2s", "j1s", "j1ss", "gamma1", "gamma2"] {
        c.residual(&r, &format!("regress.{key}"), 1e-12);
    }
    c.report(2, "regression matrices for S0 = (y, z, 0) to 1e-12")
}

fn criterion3() -> bool {
    let mut c = Crit::new();
    let r = run("flat-n1");
    for k in 0..5 {
        c.residual(&r, &format!("def1.random{k}.strong_torsion_closed_form"), 1e-8);
    }
    for k in 0..3 {
        c.residual(&r, &format!("eq17.random{k}"), 1e-8);
    }
    for id in ["thm1.flat.eq18", "thm1.flat.torsion", "thm1.flat.spray"] {
        c.residual(&r, id, 0.0);
    }
    let pk = CanonicalPack::new(1).unwrap();
    let pts = sample_points(pk.chart, 25, 0, &SampleBox::default());
    let s = reference_semispray(pk.chart, SprayType::One);
    match decompose_type1(&pk, &s, &VectorOneForm::zero(pk.chart), &pts, Tolerance::POLY) {
        Ok(g) => {
            let want = VectorOneForm::constant(pk.chart, &[&[1.0, 0.0, 0.0], &[0.0, -1.0, 0.0], &[0.0, 0.0, -1.0]]).unwrap();
            let d = compare(&g.gamma, &want, &pts).unwrap();
            c.need(d.value == 0.0, format!("decompose_type1 flat differs by {:e}", d.value));
        }
        Err(e) => c.need(false, format!("decompose_type1 flat: {e}")),
    }
    c.report(3, "Def 1 vs closed form, flat decomposition round trip, guarded (17) path")
}

fn criterion4() -> bool {
    let mut c = Crit::new();
    let flat = run("flat-n1");
    c.passed(&flat, "prop3.phi_j1_vanishes");
    c.passed(&flat, "prop3.not_j1_regular");
    c.passed(&flat, "def2.j1_regular");
    c.passed(&flat, "def2.j2_regular");
    c.prefix_within(&flat, "thm2.j2.", 1e-9);
    let sample = run("linear-sample-n1");
    c.passed(&sample, "def2.j1_regular");
    c.residual(&sample, "regress.induced_j1", 1e-10);
    let mut agreements = 0;
    for (name, _) in catalog() {
        if !name.starts_with("linear-") || name == "linear-sample-n1" {
            continue;
        }
        let r = run(name);
        for ch in r.checks.iter().filter(|ch| ch.id.starts_with("prop2.")) {
            agreements += 1;
            c.need(ch.passed, format!("{name}:{} disagrees", ch.id));
        }
    }
    for r in [&flat, &sample] {
        for ch in r.checks.iter().filter(|ch| ch.id.starts_with("prop2.")) {
            agreements += 1;
            c.need(ch.passed, format!("{}:{} disagrees", r.scenario, ch.id));
        }
    }
    c.need(agreements >= 3, format!("only {agreements} Prop 2 comparisons"));
    c.report(4, &format!("regularity, induced connections, Prop 2 on {agreements} catalog comparisons"))
}

fn criterion5() -> bool {
    let mut c = Crit::new();
    let r = run("finsler-n2");
    c.need(r.config.points == 25, "not 25 points");
    let rank = r.checks.iter().find(|ch| ch.id == "def3.max_rank");
    c.need(
        rank.is_some_and(|ch| ch.passed && ch.note.as_deref().is_some_and(|n| n.contains("rank 6 of 6"))),
        format!("rank check: {rank:?}"),
    );
    c.residual(&r, "def3.i_j2_vanishes", 1e-9);
    c.residual(&r, "thm4.j2_g", 1e-8);
    c.residual(&r, "thm4.homogeneous", 1e-8);
    c.residual(&r, "prop8.dg_energy", 1e-8);
    c.residual(&r, "thm6.no_strong_torsion", 1e-8);
    c.residual(&r, "thm5.reconstruction", 1e-8);
    c.residual(&r, "thm3.reconstruction", 1e-10);
    c.residual(&r, "lemma1.operator", 1e-9);
    c.need(r.all_passed(), format!("{} failed checks", r.summary.failed));
    c.report(5, "Finslerian witness at n = 2: rank, canonical spray, connections, reconstructions")
}

fn criterion6() -> bool {
    let mut c = Crit::new();
    let pk1 = CanonicalPack::new(1).unwrap();
    let pts1 = sample_points(pk1.chart, 25, 0, &SampleBox::default());
    let w = ScalarForm::zero(pk1.chart, 2).unwrap();
    let odd = FinslerianForm::new(&pk1, w, &pts1, Tolerance::POLY);
    c.need(matches!(odd, Err(Error::OddDimension(1))), format!("odd n: {odd:?}"));
    let s = random_semispray(pk1.chart, SprayType::Two, false, &mut PolyGen::new(3));
    let v = is_spray(&pk1, &s, &pts1, Tolerance::POLY).unwrap();
    c.need(!v.passed, "non-homogeneous completion accepted as a spray");
    for kind in [SprayType::One, SprayType::Two] {
        let g = Connection::new(VectorOneForm::identity(pk1.chart), kind);
        let checks = validate_connection(&pk1, &g, &pts1, Tolerance::POLY, "id");
        c.need(checks.iter().any(|ch| !ch.passed), format!("Γ = I validates as type {}", u8::from(kind)));
    }
    c.report(6, "negative controls: odd n, non-spray, Γ = I")
}

fn criterion7() -> bool {
    let mut c = Crit::new();
    let out = || {
        Command::new(env!("CARGO_BIN_EXE_t2calc"))
            .args(["run", "--scenario", "flat-n1", "--seed", "7"])
            .env_remove("T2CALC_TOL")
            .output()
            .expect("binary runs")
    };
    let (a, b) = (out(), out());
    c.need(a.status.code() == Some(0), format!("exit status {:?}", a.status.code()));
    c.need(!a.stdout.is_empty() && a.stdout == b.stdout, "outputs differ");
    c.report(7, "determinism of run --scenario flat-n1 --seed 7")
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let results = [criterion1(), criterion2(), criterion3(), criterion4(), criterion5(), criterion6(), criterion7()];
    let failed = results.iter().filter(|r| !**r).count();
    println!("acceptance: {} of 7 criteria passed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
