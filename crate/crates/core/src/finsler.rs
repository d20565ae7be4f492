//! Finslerian 2-forms, energy, canonical spray and canonical connections.

use nalgebra::DMatrix;
use serde_json::{json, Map, Value};

use crate::calculus::{d_endo, d_field, differential, exterior_derivative, interior_endo, interior_field, lie_derivative};
use crate::canonical::{homogeneity_residual, is_spray, semibasic_residual, spray_residual, CanonicalPack, Graded, Projection, SemiSpray, SprayType};
use crate::chart::{Block, Chart, Coord};
use crate::connection::{associated_semispray, conjugate_pair, reference_semispray, strong_torsion_type2, validate_connection, Connection};
use crate::error::{Error, Result};
use crate::expr::{Evaluator, Expr};
use crate::gen::PolyGen;
use crate::linalg;
use crate::report::{Check, Residual, Tolerance};
use crate::tensor::{compare, magnitude, multi_indices, ScalarForm, VectorField};

/// Below this `|det Ω♭|` a form counts as singular at a point.
pub const DET_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FinslerianForm {
    pub omega: ScalarForm,
    pub domain: Option<String>,
}

fn pass_all(checks: &[Check]) -> Option<&Check> {
    checks.iter().find(|c| !c.passed)
}

impl FinslerianForm {
    /// Validated construction; odd `n` is rejected up front.
    pub fn new(pk: &CanonicalPack, omega: ScalarForm, points: &[Vec<f64>], tol: Tolerance) -> Result<Self> {
        if pk.n % 2 == 1 {
            return Err(Error::OddDimension(pk.n));
        }
        if omega.degree() != 2 {
            return Err(Error::InvalidForm(format!("expected a 2-form, got degree {}", omega.degree())));
        }
        let checks = validate_finslerian(pk, &omega, points, tol, "finsler");
        if let Some(bad) = pass_all(&checks) {
            return Err(Error::InvalidForm(format!("{} fails{}", bad.id, bad.note.as_ref().map(|n| format!(": {n}")).unwrap_or_default())));
        }
        Ok(FinslerianForm { omega, domain: None })
    }

    pub fn chart(&self) -> Chart {
        self.omega.chart()
    }

    /// `{"n", "components": {"x1,y1": ast, …}, "domain"}`.
    pub fn to_json(&self) -> Result<Value> {
        let chart = self.chart();
        let mut comps = Map::new();
        for (idx, c) in self.omega.terms() {
            comps.insert(format!("{},{}", chart.coord(idx[0]), chart.coord(idx[1])), c.to_json()?);
        }
        let mut v = json!({"n": chart.n, "components": comps});
        if let Some(d) = &self.domain {
            v["domain"] = json!(d);
        }
        Ok(v)
    }

    /// Parses without validating; the caller validates against sample points.
    pub fn from_json(v: &Value) -> Result<ScalarForm> {
        let obj = v.as_object().ok_or_else(|| Error::schema("", "Finslerian form must be an object"))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "n" | "components" | "domain" | "kind") {
                return Err(Error::schema("", format!("unknown field \"{key}\"")));
            }
        }
        let n = obj.get("n").and_then(Value::as_u64).ok_or_else(|| Error::schema("/n", "expected a positive integer"))? as usize;
        let chart = Chart::new(n)?;
        let comps = obj
            .get("components")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::schema("/components", "expected an object keyed by coordinate pairs"))?;
        let mut terms = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (key, val) in comps {
            let ptr = format!("/components/{}", key.replace('~', "~0").replace('/', "~1"));
            let (a, b) = key.split_once(',').ok_or_else(|| Error::schema(&ptr, "key must be \"<coord>,<coord>\""))?;
            let (a, b) = (parse_coord(a.trim(), chart, &ptr)?, parse_coord(b.trim(), chart, &ptr)?);
            if a == b {
                return Err(Error::schema(&ptr, "repeated coordinate in an alternating form"));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::schema(&ptr, "duplicate coordinate pair"));
            }
            terms.push((vec![a, b], Expr::from_json(val, Some(n), &ptr)?));
        }
        ScalarForm::from_terms(chart, 2, terms)
    }
}

fn parse_coord(s: &str, chart: Chart, ptr: &str) -> Result<usize> {
    let bad = || Error::schema(ptr, format!("bad coordinate \"{s}\""));
    let block = match s.chars().next() {
        Some('x') => Block::X,
        Some('y') => Block::Y,
        Some('z') => Block::Z,
        _ => return Err(bad()),
    };
    let i: usize = s[1..].parse().map_err(|_| bad())?;
    if i == 0 || i > chart.n {
        return Err(bad());
    }
    Ok(chart.index(Coord::new(block, i - 1)))
}

/// Rank, `d_{C₂}Ω = Ω` and `i_{J₂}Ω = 0`, each reported separately.
pub fn validate_finslerian(pk: &CanonicalPack, omega: &ScalarForm, points: &[Vec<f64>], tol: Tolerance, prefix: &str) -> Vec<Check> {
    let np = points.len();
    let id = |s: &str| format!("{prefix}.{s}");
    let mut out = Vec::new();
    let d = pk.chart.dim();
    if pk.n % 2 == 1 {
        out.push(Check::flag(&id("parity"), "Def 3", np, false, Error::OddDimension(pk.n).to_string()));
    }
    if omega.degree() != 2 {
        out.push(Check::flag(&id("degree"), "Def 3", np, false, format!("degree {} is not 2", omega.degree())));
        return out;
    }
    let rank = (|| -> Result<(usize, f64)> {
        let mut lo = usize::MAX;
        let mut min_det = f64::INFINITY;
        for p in points {
            let m = omega.eval_skew_matrix(p)?;
            lo = lo.min(linalg::rank(&m, 1e-10));
            min_det = min_det.min(m.determinant().abs());
        }
        Ok((if points.is_empty() { 0 } else { lo }, min_det))
    })();
    out.push(match rank {
        Ok((r, det)) => Check::flag(&id("max_rank"), "Def 3", np, r == d && det > DET_THRESHOLD, format!("minimum rank {r} of {d}, min |det| {det:.3e}")),
        Err(e) => Check::flag(&id("max_rank"), "Def 3", np, false, e.to_string()),
    });
    out.push(Check::from_result(&id("homogeneous_degree_1"), "Def 3", np, homogeneity_residual(pk, Graded::Scalar(omega), 1.0, points), tol));
    out.push(Check::from_result(&id("i_j2_vanishes"), "Def 3", np, interior_endo(&pk.j2, omega).and_then(|w| magnitude(&w, points)), tol));
    out
}

/// `g(J₂X, J₂Y) = Ω(J₂X, Y)` at a point.
pub fn induced_metric(pk: &CanonicalPack, f: &FinslerianForm, point: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
    let j2 = pk.j2.eval(point)?;
    let jx = &j2 * nalgebra::DVector::from_column_slice(x);
    f.omega.eval_on(point, &[jx.as_slice(), y]).map_err(|e| Error::InvalidForm(e.to_string()))
}

/// `E = ½ Ω(C₂, S)` for a spray `S` of type 2.
pub fn energy(pk: &CanonicalPack, f: &FinslerianForm, s: &SemiSpray, points: &[Vec<f64>], tol: Tolerance) -> Result<Expr> {
    if s.kind != SprayType::Two {
        return Err(Error::TypeMismatch("energy needs a spray of type 2".into()));
    }
    let r = spray_residual(pk, &s.field, points)?;
    if !tol.accepts(r.value, r.scale) {
        return Err(Error::NotSpray(r.value));
    }
    energy_of(pk, f, s)
}

fn energy_of(pk: &CanonicalPack, f: &FinslerianForm, s: &SemiSpray) -> Result<Expr> {
    Ok(f.omega.apply(&[pk.c2.comps(), s.field.comps()])?.scale(0.5))
}

/// Residual form of `[i_S, d_{J₂}]ω - d_{C₂}ω + i_{[S,J₂]}ω`, with `i_S f = 0` on functions.
pub fn lemma1_defect(pk: &CanonicalPack, w: &ScalarForm, s: &SemiSpray) -> Result<ScalarForm> {
    let dj = d_endo(&pk.j2, w)?;
    let sj2 = lie_derivative(&s.field, &pk.j2)?;
    let mut lhs = interior_field(&s.field, &dj)?;
    if w.degree() > 0 {
        lhs = lhs.add(&d_endo(&pk.j2, &interior_field(&s.field, w)?)?)?;
        lhs = lhs.add(&interior_endo(&sj2, w)?)?;
    }
    lhs.sub(&d_field(&pk.c2, w)?)
}

/// Checks of `[i_S, d_{J₂}]ω = (r+p)ω` and `i_{[S,J₂]}ω = -pω`.
pub fn prop5_checks(pk: &CanonicalPack, w: &ScalarForm, r: f64, s: &SemiSpray, points: &[Vec<f64>], tol: Tolerance, prefix: &str) -> Result<Vec<Check>> {
    let p = w.degree();
    if p == 0 {
        return Err(Error::Degree("semi-basic forms of degree 0 carry no interior product".into()));
    }
    let np = points.len();
    let lhs = interior_field(&s.field, &d_endo(&pk.j2, w)?)?.add(&d_endo(&pk.j2, &interior_field(&s.field, w)?)?)?;
    let sj2 = lie_derivative(&s.field, &pk.j2)?;
    Ok(vec![
        Check::residual(&format!("{prefix}.prop5"), "Prop 5", np, compare(&lhs, &w.scale(r + p as f64), points)?, tol),
        Check::residual(&format!("{prefix}.cor1"), "Cor 1", np, compare(&interior_endo(&sj2, w)?, &w.scale(-(p as f64)), points)?, tol),
    ])
}

/// `ω = (1/(r+p)) d_{J₂} i_S ω` for a semi-basic, `h(r)`, `d_{J₂}`-closed `ω`.
pub fn homogeneous_exactness(
    pk: &CanonicalPack,
    w: &ScalarForm,
    r: f64,
    s: &SemiSpray,
    which: Projection,
    points: &[Vec<f64>],
    tol: Tolerance,
) -> Result<(ScalarForm, Vec<Check>)> {
    let p = w.degree();
    let pre = |what: &str, res: Residual| -> Result<()> {
        if tol.accepts(res.value, res.scale) {
            Ok(())
        } else {
            Err(Error::PreconditionFailed { what: what.into(), residual: res.value })
        }
    };
    if p == 0 {
        return Err(Error::PreconditionFailed { what: "degree p ≥ 1".into(), residual: 0.0 });
    }
    if r + p as f64 == 0.0 {
        return Err(Error::PreconditionFailed { what: "r + p ≠ 0".into(), residual: 0.0 });
    }
    if s.kind != SprayType::Two {
        return Err(Error::TypeMismatch("needs a semi-spray of type 2".into()));
    }
    pre("semi-basic", semibasic_residual(pk, Graded::Scalar(w), which, points)?)?;
    pre("homogeneous of degree r", homogeneity_residual(pk, Graded::Scalar(w), r, points)?)?;
    pre("d_J2 ω = 0", magnitude(&d_endo(&pk.j2, w)?, points)?)?;
    let rec = d_endo(&pk.j2, &interior_field(&s.field, w)?)?.scale(1.0 / (r + p as f64));
    let mut checks = prop5_checks(pk, w, r, s, points, tol, "thm3")?;
    checks.push(Check::residual("thm3.reconstruction", "Thm 3", points.len(), compare(&rec, w, points)?, tol));
    Ok((rec, checks))
}

/// Result of the canonical spray construction.
#[derive(Debug, Clone)]
pub struct CanonicalSpray {
    pub spray: SemiSpray,
    pub energy: Expr,
    pub checks: Vec<Check>,
}

fn flat_matrix(omega: &ScalarForm) -> Result<Vec<Expr>> {
    omega.skew_matrix()
}

/// Solves `i_S Ω = α`, i.e. `Ω♭ S = -α` with `(Ω♭)_{ab} = Ω(∂_a, ∂_b)`.
fn solve_interior(omega: &ScalarForm, alpha: &[Expr], points: &[Vec<f64>]) -> Result<VectorField> {
    let chart = omega.chart();
    let d = chart.dim();
    let m = flat_matrix(omega)?;
    for p in points {
        let det = omega.eval_skew_matrix(p)?.determinant().abs();
        if !(det > DET_THRESHOLD) {
            return Err(Error::SingularForm(det));
        }
    }
    let rhs: Vec<Expr> = alpha.iter().map(|a| -a).collect();
    let sol = Expr::solve_linear(m, rhs.clone());
    let field = VectorField::new(chart, sol)?;
    for p in points {
        let mut ev = Evaluator::new(p);
        let mm = omega.eval_skew_matrix(p)?;
        let g = nalgebra::DVector::from_vec(field.eval_with(&mut ev)?);
        let b = nalgebra::DVector::from_vec(rhs.iter().map(|e| ev.eval(e)).collect::<Result<Vec<_>>>()?);
        let res = (&mm * g - &b).norm();
        if !(res < 1e-9 * b.amax().max(1.0)) {
            return Err(Error::SingularForm(mm.determinant().abs()));
        }
        debug_assert_eq!(mm.nrows(), d);
    }
    Ok(field)
}

/// Components of a 1-form as a coordinate list.
fn one_form_components(w: &ScalarForm) -> Vec<Expr> {
    (0..w.chart().dim()).map(|k| w.coeff(&[k])).collect()
}

/// The spray `S` with `i_S Ω = α`, for `α` h(2) with `J₂α = -i_{C₂}Ω`.
pub fn spray_from_alpha(pk: &CanonicalPack, f: &FinslerianForm, alpha: &ScalarForm, points: &[Vec<f64>], tol: Tolerance) -> Result<SemiSpray> {
    if alpha.degree() != 1 {
        return Err(Error::Degree("α must be a 1-form".into()));
    }
    let theta = interior_field(&pk.c2, &f.omega)?;
    let r = compare(&interior_endo(&pk.j2, alpha)?, &theta.scale(-1.0), points)?;
    if !tol.accepts(r.value, r.scale) {
        return Err(Error::PreconditionFailed { what: "J2 α = -i_C2 Ω".into(), residual: r.value });
    }
    let h = homogeneity_residual(pk, Graded::Scalar(alpha), 2.0, points)?;
    if !tol.accepts(h.value, h.scale) {
        return Err(Error::PreconditionFailed { what: "α homogeneous of degree 2".into(), residual: h.value });
    }
    let field = solve_interior(&f.omega, &one_form_components(alpha), points)?;
    Ok(SemiSpray { field, kind: SprayType::Two })
}

/// `G` with `i_G Ω = -dE`, after checking that `i_{C₂}Ω` is `d_{J₂}`-closed.
pub fn canonical_spray(pk: &CanonicalPack, f: &FinslerianForm, points: &[Vec<f64>], tol: Tolerance) -> Result<CanonicalSpray> {
    let np = points.len();
    let theta = interior_field(&pk.c2, &f.omega)?;
    let closed = magnitude(&d_endo(&pk.j2, &theta)?, points)?;
    if !tol.accepts(closed.value, closed.scale) {
        return Err(Error::ClosednessFailed(closed.value));
    }
    let e = energy_of(pk, f, &reference_semispray(pk.chart, SprayType::Two))?;
    let de = differential(pk.chart, &e)?;
    let minus_de: Vec<Expr> = one_form_components(&de).iter().map(|c| -c).collect();
    let g = solve_interior(&f.omega, &minus_de, points)?;
    let spray = SemiSpray { field: g, kind: SprayType::Two };

    let mut checks = vec![
        Check::residual("thm4.closedness", "Thm 4", np, closed, tol),
        Check::residual("thm4.j2_g", "Thm 4", np, compare(&pk.j2.apply(&spray.field)?, &pk.c2, points)?, tol),
        Check::residual("thm4.homogeneous", "Thm 4", np, spray_residual(pk, &spray.field, points)?, tol),
        Check::residual("thm4.i_c2_omega", "Thm 4", np, compare(&theta, &d_endo(&pk.j2, &ScalarForm::function(pk.chart, e.clone()))?, points)?, tol),
        Check::residual("thm4.theta_homogeneous", "Thm 4", np, homogeneity_residual(pk, Graded::Scalar(&theta), 1.0, points)?, tol),
        Check::residual("thm4.theta_semibasic", "Thm 4", np, semibasic_residual(pk, Graded::Scalar(&theta), Projection::Pi1, points)?, tol),
    ];
    // same system with the rows reversed
    let d = pk.chart.dim();
    let mut dev = 0.0_f64;
    for p in points {
        let m = f.omega.eval_skew_matrix(p)?;
        let b: Vec<f64> = minus_de.iter().map(|c| c.eval(p).map(|v| -v)).collect::<Result<_>>()?;
        let perm = DMatrix::from_fn(d, d, |r, c| m[(d - 1 - r, c)]);
        let pb = nalgebra::DVector::from_fn(d, |r, _| b[d - 1 - r]);
        let x = perm.lu().solve(&pb).ok_or(Error::SingularForm(0.0))?;
        let gv = spray.field.eval(p)?;
        dev = dev.max((0..d).map(|k| (x[k] - gv[k]).abs()).fold(0.0, f64::max));
    }
    checks.push(Check::residual("thm4.unique", "Thm 7", np, Residual::exact(dev), tol));
    Ok(CanonicalSpray { spray, energy: e, checks })
}

/// `Ω = dd_{J₂}E + Θ` with `Θ = i_{C₂}dΩ`.
pub fn decompose_omega(pk: &CanonicalPack, f: &FinslerianForm, e: &Expr) -> Result<(ScalarForm, ScalarForm)> {
    let exact = exterior_derivative(&d_endo(&pk.j2, &ScalarForm::function(pk.chart, e.clone()))?)?;
    let theta = interior_field(&pk.c2, &exterior_derivative(&f.omega)?)?;
    Ok((exact, theta))
}

/// Conjugate canonical connections `(Γ₂, Γ₁)` of the canonical spray, with their checks.
pub fn canonical_connections(pk: &CanonicalPack, g: &SemiSpray, points: &[Vec<f64>], tol: Tolerance) -> Result<(Connection, Connection, Vec<Check>)> {
    let np = points.len();
    let (g1, g2) = conjugate_pair(pk, g, points, tol)?;
    let mut checks = validate_connection(pk, &g2, points, tol, "thm6.gamma2");
    checks.extend(validate_connection(pk, &g1, points, tol, "thm7.gamma1"));
    let h2 = associated_semispray(&g2, &reference_semispray(pk.chart, SprayType::Two))?;
    let (h1, _) = g1.projectors();
    let h1g = h1.apply(&g.field)?;
    checks.extend([
        Check::residual("thm6.homogeneous", "Thm 6", np, magnitude(&lie_derivative(&pk.c2, &g2.gamma)?, points)?, tol),
        Check::residual("thm6.no_strong_torsion", "Thm 6", np, magnitude(&strong_torsion_type2(pk, &g2)?, points)?, tol),
        Check::residual("thm6.associated_spray", "Thm 6", np, compare(&h2.field, &g.field, points)?, tol),
        Check::residual("thm7.homogeneous", "Thm 7", np, magnitude(&lie_derivative(&pk.c2, &g1.gamma)?, points)?, tol),
        Check::residual("thm7.h1g_type1", "Thm 7", np, compare(&pk.j1.apply(&h1g)?, &pk.c1, points)?, tol),
        Check::residual("thm7.h1g_homogeneous", "Thm 7", np, spray_residual(pk, &h1g, points)?, tol),
    ]);
    Ok((g2, g1, checks))
}

/// `d_G E = 0`; `d_G Ω = 0` when `Ω` is closed; properties of `i_{C₁}Ω`.
pub fn prop8_and_remark5(pk: &CanonicalPack, f: &FinslerianForm, g: &SemiSpray, e: &Expr, points: &[Vec<f64>], tol: Tolerance) -> Result<Vec<Check>> {
    let np = points.len();
    let mut out = Vec::new();
    let dge = d_field(&g.field, &ScalarForm::function(pk.chart, e.clone()))?;
    out.push(Check::residual("prop8.dg_energy", "Prop 8", np, magnitude(&dge, points)?, tol));
    let domega = magnitude(&exterior_derivative(&f.omega)?, points)?;
    if tol.accepts(domega.value, domega.scale) {
        out.push(Check::residual("prop8.dg_omega", "Prop 8", np, magnitude(&d_field(&g.field, &f.omega)?, points)?, tol));
    } else {
        out.push(Check::flag(
            "prop8.dg_omega",
            "Prop 8",
            np,
            true,
            format!("not applicable: Ω is not closed (|dΩ| = {:.3e})", domega.value),
        ));
    }
    let ic1 = interior_field(&pk.c1, &f.omega)?;
    out.push(Check::residual("rem5.i_c1_homogeneous", "Remark 5", np, homogeneity_residual(pk, Graded::Scalar(&ic1), 0.0, points)?, tol));
    out.push(Check::residual("rem5.i_c1_pi1", "Remark 5", np, semibasic_residual(pk, Graded::Scalar(&ic1), Projection::Pi1, points)?, tol));
    out.push(Check::residual("rem5.i_c1_pi2", "Remark 5", np, semibasic_residual(pk, Graded::Scalar(&ic1), Projection::Pi2, points)?, tol));
    let oc1s = f.omega.apply(&[pk.c1.comps(), g.field.comps()])?;
    out.push(Check::residual("rem5.omega_c1_s", "Remark 5", np, magnitude(&ScalarForm::function(pk.chart, oc1s), points)?, tol));
    let closed = magnitude(&d_endo(&pk.j2, &ic1)?, points)?;
    if tol.accepts(closed.value, closed.scale) {
        out.push(Check::residual("rem5.i_c1_vanishes", "Remark 5", np, magnitude(&ic1, points)?, tol));
    } else {
        out.push(Check::flag(
            "rem5.i_c1_vanishes",
            "Remark 5",
            np,
            true,
            format!("not applicable: i_C1 Ω is not d_J2-closed ({:.3e})", closed.value),
        ));
    }
    Ok(out)
}

/// Parameters of the `n = 2` witness family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessParams {
    pub kappa: f64,
    pub eps: f64,
    pub alpha: f64,
}

impl Default for WitnessParams {
    fn default() -> Self {
        WitnessParams { kappa: 1.0, eps: 0.5, alpha: 0.25 }
    }
}

/// The `n = 2` family with energy `E = ½(1+εx₁²)|y|² + (κ/|y|)(y₂z₁ - y₁z₂)`.
///
/// Blocks of `Ω♭`: `xx = α y₁ J`, `xy = B`, `xz = C`, `yy = -2C`, with
/// `C = (κ/|y|) J`, `J = [[0,1],[-1,0]]` and `B` the symmetric matrix with
/// `By = -E_y - 2Cz` that vanishes on `y⊥`.
pub fn witness_n2(p: WitnessParams) -> (ScalarForm, Expr) {
    let chart = Chart::new(2).unwrap();
    let (y, z) = ([Expr::y(0), Expr::y(1)], [Expr::z(0), Expr::z(1)]);
    let r2 = &y[0] * &y[0] + &y[1] * &y[1];
    let c = r2.sqrt().recip() * p.kappa;
    let e = Expr::add([
        (Expr::x(0) * Expr::x(0) * p.eps + 1.0) * &r2 * 0.5,
        &c * (&y[1] * &z[0] - &y[0] * &z[1]),
    ]);
    let jmat = [[0.0, 1.0], [-1.0, 0.0]];
    let cm = |i: usize, j: usize| c.scale(jmat[i][j]);
    // v = -E_y - 2Cz
    let v: Vec<Expr> = (0..2)
        .map(|i| -(e.diff(Coord::new(Block::Y, i))) - Expr::add((0..2).map(|j| cm(i, j) * &z[j])).scale(2.0))
        .collect();
    let yv = &y[0] * &v[0] + &y[1] * &v[1];
    let inv = r2.recip();
    let b = |i: usize, j: usize| {
        Expr::add([(&v[i] * &y[j] + &y[i] * &v[j]) * &inv, -(&yv * &y[i] * &y[j] * inv.powf(2.0))])
    };
    let a = |i: usize, j: usize| Expr::y(0) * (p.alpha * jmat[i][j]);
    let omega = ScalarForm::from_alternating(chart, 2, |idx| {
        let (u, w) = (chart.coord(idx[0]), chart.coord(idx[1]));
        match (u.block, w.block) {
            (Block::X, Block::X) => a(u.i, w.i),
            (Block::X, Block::Y) => b(u.i, w.i),
            (Block::X, Block::Z) => cm(u.i, w.i),
            (Block::Y, Block::Y) => cm(u.i, w.i).scale(-2.0),
            _ => Expr::zero(),
        }
    })
    .unwrap();
    (omega, e)
}

/// `Ω = dd_{J₂}E` for `E = ½|y|² + c z₁z₂/|y|²` on `n = 2`.
pub fn exact_candidate_n2(c: f64) -> ScalarForm {
    let chart = Chart::new(2).unwrap();
    let r2 = Expr::y(0) * Expr::y(0) + Expr::y(1) * Expr::y(1);
    let e = &r2 * 0.5 + Expr::z(0) * Expr::z(1) * r2.recip() * c;
    let pk = CanonicalPack::for_chart(chart);
    exterior_derivative(&d_endo(&pk.j2, &ScalarForm::function(chart, e)).unwrap()).unwrap()
}

/// One candidate examined by the witness search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchAttempt {
    pub family: &'static str,
    pub parameter: f64,
    pub accepted: bool,
    pub failed: Vec<String>,
}

/// Scans the exact candidates, then the witness family over `κ`, and returns
/// the first candidate passing every Finslerian check together with the log.
pub fn search_witness(points: &[Vec<f64>], tol: Tolerance) -> (Option<(FinslerianForm, Expr, WitnessParams)>, Vec<SearchAttempt>) {
    let pk = CanonicalPack::new(2).unwrap();
    let mut log = Vec::new();
    let failing = |checks: Vec<Check>| -> Vec<String> { checks.into_iter().filter(|c| !c.passed).map(|c| c.id).collect() };
    for c in [0.5, 1.0, 2.0] {
        let omega = exact_candidate_n2(c);
        let failed = failing(validate_finslerian(&pk, &omega, points, tol, "finsler"));
        log.push(SearchAttempt { family: "exact", parameter: c, accepted: failed.is_empty(), failed: failed.clone() });
        if failed.is_empty() {
            let e = energy_of(&pk, &FinslerianForm { omega: omega.clone(), domain: None }, &reference_semispray(pk.chart, SprayType::Two)).unwrap();
            return (Some((FinslerianForm { omega, domain: Some("y nonzero".into()) }, e, WitnessParams { kappa: 0.0, eps: 0.0, alpha: 0.0 })), log);
        }
    }
    for k in 0..=8 {
        let params = WitnessParams { kappa: k as f64 * 0.25, ..Default::default() };
        let (omega, e) = witness_n2(params);
        let mut failed = failing(validate_finslerian(&pk, &omega, points, tol, "finsler"));
        if failed.is_empty() {
            let theta = interior_field(&pk.c2, &omega).unwrap();
            let r = magnitude(&d_endo(&pk.j2, &theta).unwrap(), points).unwrap();
            if !tol.accepts(r.value, r.scale) {
                failed.push("thm4.closedness".into());
            }
        }
        log.push(SearchAttempt { family: "witness", parameter: params.kappa, accepted: failed.is_empty(), failed: failed.clone() });
        if failed.is_empty() {
            return (Some((FinslerianForm { omega, domain: Some("y nonzero".into()) }, e, params)), log);
        }
    }
    (None, log)
}

/// Random field homogeneous of degree 2: blocks of weighted degree 1, 2, 3.
pub fn random_h2_field(chart: Chart, gen: &mut PolyGen) -> VectorField {
    VectorField::from_fn(chart, |k| {
        let r = match chart.coord(k).block {
            Block::X => 1,
            Block::Y => 2,
            Block::Z => 3,
        };
        gen.homogeneous(chart.n, r, 2)
    })
}

/// Random `p`-form, semi-basic for `which`, homogeneous of degree `r`.
pub fn random_semibasic(chart: Chart, p: usize, r: i32, which: Projection, gen: &mut PolyGen) -> Result<ScalarForm> {
    let allowed = |k: usize| match (which, chart.coord(k).block) {
        (_, Block::X) => true,
        (Projection::Pi1, Block::Y) => true,
        _ => false,
    };
    let weight = |k: usize| if chart.coord(k).block == Block::Y { 1 } else { 0 };
    let mut terms = Vec::new();
    for idx in multi_indices(chart.dim(), p) {
        if !idx.iter().all(|&k| allowed(k)) {
            continue;
        }
        let deg = r - idx.iter().map(|&k| weight(k)).sum::<i32>();
        if deg < 0 {
            continue;
        }
        terms.push((idx, gen.homogeneous(chart.n, deg as u32, 2)));
    }
    ScalarForm::from_terms(chart, p, terms)
}

/// Checks that `Z ↦ i_Z Ω` has zero kernel and maps `h(2)` fields to `h(2)` forms.
pub fn isomorphism_checks(pk: &CanonicalPack, f: &FinslerianForm, fields: &[VectorField], points: &[Vec<f64>], tol: Tolerance) -> Result<Vec<Check>> {
    let np = points.len();
    let mut min_det = f64::INFINITY;
    for p in points {
        min_det = min_det.min(f.omega.eval_skew_matrix(p)?.determinant().abs());
    }
    let mut out = vec![Check::flag("iso.kernel_trivial", "Def 3", np, min_det > DET_THRESHOLD, format!("min |det| {min_det:.3e}"))];
    let mut r = Residual::exact(0.0);
    for z in fields {
        r = r.max(homogeneity_residual(pk, Graded::Scalar(&interior_field(z, &f.omega)?), 2.0, points)?);
    }
    out.push(Check::residual("iso.h2_images", "Def 3", np, r, tol));
    Ok(out)
}

/// Symmetry of the induced metric and its independence of the `Y` representative.
pub fn metric_checks(pk: &CanonicalPack, f: &FinslerianForm, points: &[Vec<f64>], pairs: usize, seed: u64, tol: Tolerance) -> Result<Vec<Check>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = pk.chart.dim();
    let mut sym = Residual::exact(0.0);
    let mut rep = Residual::exact(0.0);
    for p in points {
        for _ in 0..pairs {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut k: Vec<f64> = y.clone();
            for idx in pk.chart.block_range(Block::Z) {
                k[idx] += rng.random_range(-1.0..1.0);
            }
            let gxy = induced_metric(pk, f, p, &x, &y)?;
            let gyx = induced_metric(pk, f, p, &y, &x)?;
            let gxk = induced_metric(pk, f, p, &x, &k)?;
            sym = sym.max(Residual::new((gxy - gyx).abs(), gxy.abs()));
            rep = rep.max(Residual::new((gxy - gxk).abs(), gxy.abs()));
        }
    }
    Ok(vec![
        Check::residual("prop6.symmetric", "Prop 6", points.len(), sym, tol),
        Check::residual("prop6.representative", "Prop 6", points.len(), rep, tol),
    ])
}

/// The complete check set on a Finslerian form.
pub fn finsler_suite(pk: &CanonicalPack, f: &FinslerianForm, points: &[Vec<f64>], seed: u64, tol: Tolerance) -> Result<Vec<Check>> {
    let np = points.len();
    let mut checks = validate_finslerian(pk, &f.omega, points, tol, "def3");
    checks.extend(metric_checks(pk, f, points, 4, seed, tol)?);
    let mut gen = PolyGen::new(seed);
    let fields: Vec<VectorField> = (0..2).map(|_| random_h2_field(pk.chart, &mut gen)).collect();
    checks.extend(isomorphism_checks(pk, f, &fields, points, tol)?);

    // energy from two sprays differing by a vertical h(2) term
    let s0 = reference_semispray(pk.chart, SprayType::Two);
    let s1 = SemiSpray::from_free(pk.chart, SprayType::Two, (0..pk.n).map(|_| gen.homogeneous(pk.n, 3, 2)).collect())?;
    let e0 = energy(pk, f, &s0, points, tol)?;
    let e1 = energy(pk, f, &s1, points, tol)?;
    let (f0, f1) = (ScalarForm::function(pk.chart, e0.clone()), ScalarForm::function(pk.chart, e1));
    checks.push(Check::residual("def5.well_defined", "Def 5", np, compare(&f0, &f1, points)?, tol));
    checks.push(Check::residual("def5.homogeneous", "Def 5", np, homogeneity_residual(pk, Graded::Scalar(&f0), 2.0, points)?, tol));
    let metric_e = (|| -> Result<Residual> {
        let mut r = Residual::exact(0.0);
        for p in points {
            let sv = s0.field.eval(p)?;
            let g = induced_metric(pk, f, p, &sv, &sv)?;
            let ev = e0.eval(p)?;
            r = r.max(Residual::new((g - 2.0 * ev).abs(), ev.abs()));
        }
        Ok(r)
    })();
    checks.push(Check::from_result("def5.metric_form", "Def 5", np, metric_e, tol));

    let cs = canonical_spray(pk, f, points, tol)?;
    checks.extend(cs.checks.iter().cloned());
    let (exact, theta) = decompose_omega(pk, f, &cs.energy)?;
    checks.push(Check::residual("thm5.reconstruction", "Thm 5", np, compare(&exact.add(&theta)?, &f.omega, points)?, tol));
    let (_, _, cc) = canonical_connections(pk, &cs.spray, points, tol)?;
    checks.extend(cc);
    checks.extend(prop8_and_remark5(pk, f, &cs.spray, &cs.energy, points, tol)?);

    // spray to connection to spray round trip on a second spray
    let alpha = interior_field(&s1.field, &f.omega)?;
    let back = spray_from_alpha(pk, f, &alpha, points, tol)?;
    checks.push(Check::residual("prop7.round_trip", "Prop 7", np, compare(&back.field, &s1.field, points)?, tol));
    checks.push(Check::from_result(
        "prop7.is_spray",
        "Prop 7",
        np,
        is_spray(pk, &back, points, tol).map(|v| v.residual),
        tol,
    ));
    Ok(checks)
}

/// Exactness and semi-basic operator checks on generated forms, independent of any `Ω`.
pub fn exactness_suite(pk: &CanonicalPack, points: &[Vec<f64>], seed: u64, tol: Tolerance) -> Result<Vec<Check>> {
    let np = points.len();
    let mut gen = PolyGen::new(seed);
    let chart = pk.chart;
    let s = crate::canonical::random_semispray(chart, SprayType::Two, false, &mut gen);
    let mut checks = Vec::new();
    let mut lemma = Residual::exact(0.0);
    for p in 0..=2 {
        for _ in 0..2 {
            let w = if p == 0 {
                ScalarForm::function(chart, gen.poly(chart, 3, 4))
            } else {
                ScalarForm::from_terms(chart, p, multi_indices(chart.dim(), p).into_iter().map(|i| (i, gen.poly(chart, 2, 2))))?
            };
            lemma = lemma.max(magnitude(&lemma1_defect(pk, &w, &s)?, points)?);
        }
    }
    checks.push(Check::residual("lemma1.operator", "Lemma 1", np, lemma, tol));
    for which in [Projection::Pi1, Projection::Pi2] {
        for (r, p) in [(1, 1), (2, 1), (1, 2), (0, 2)] {
            let w = random_semibasic(chart, p, r, which, &mut gen)?;
            let tag = format!("prop5.{}.r{r}p{p}", if which == Projection::Pi1 { "pi1" } else { "pi2" });
            for c in prop5_checks(pk, &w, r as f64, &s, points, tol, &tag)? {
                checks.push(c);
            }
        }
    }
    // ω = Σ y_i dx_i
    let w = ScalarForm::from_terms(chart, 1, (0..chart.n).map(|i| (vec![chart.index(Coord::new(Block::X, i))], Expr::y(i))))?;
    let (_, c) = homogeneous_exactness(pk, &w, 1.0, &s, Projection::Pi1, points, tol)?;
    checks.extend(c);
    Ok(checks)
}
