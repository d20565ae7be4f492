//! Nonlinear connections of type 1 and 2.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::calculus::{bracket_form_field, contract_two, lie_bracket, lie_derivative, nijenhuis};
use crate::canonical::{semibasic_residual, spray_residual, CanonicalPack, Graded, Projection, SemiSpray, SprayType};
use crate::chart::{Block, Chart};
use crate::error::{Error, Result};
use crate::expr::{Evaluator, Expr};
use crate::gen::PolyGen;
use crate::linalg;
use crate::report::{Check, Residual, Tolerance};
use crate::tensor::{compare, magnitude, Tensor, VectorForm, VectorOneForm, VectorTwoForm};

/// Connection types share the numbering of semi-sprays.
pub type ConnType = SprayType;

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub gamma: VectorOneForm,
    pub kind: ConnType,
}

fn kind_no(k: ConnType) -> u8 {
    k.into()
}

impl Connection {
    pub fn new(gamma: VectorOneForm, kind: ConnType) -> Self {
        Connection { gamma, kind }
    }

    /// Builds a connection, rejecting it if any defining identity fails.
    pub fn validated(pk: &CanonicalPack, gamma: VectorOneForm, kind: ConnType, points: &[Vec<f64>], tol: Tolerance) -> Result<Self> {
        let c = Connection { gamma, kind };
        if let Some(bad) = validate_connection(pk, &c, points, tol, "conn").into_iter().find(|c| !c.passed) {
            return Err(Error::InvalidConnection(format!(
                "{} fails ({})",
                bad.id,
                bad.max_residual.map(|r| format!("{r:.3e}")).or(bad.note).unwrap_or_default()
            )));
        }
        Ok(c)
    }

    pub fn chart(&self) -> Chart {
        self.gamma.chart()
    }

    /// `{"conn_type": 1|2, "n", "matrix": [[ast]]}`.
    pub fn to_json(&self) -> Result<Value> {
        Ok(json!({"conn_type": kind_no(self.kind), "n": self.chart().n, "matrix": matrix_to_json(&self.gamma)?}))
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::schema("", "connection must be an object"))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "conn_type" | "n" | "matrix" | "kind") {
                return Err(Error::schema("", format!("unknown field \"{key}\"")));
            }
        }
        let kind = match obj.get("conn_type").and_then(Value::as_u64) {
            Some(1) => SprayType::One,
            Some(2) => SprayType::Two,
            _ => return Err(Error::schema("/conn_type", "expected 1 or 2")),
        };
        let n = obj.get("n").and_then(Value::as_u64).ok_or_else(|| Error::schema("/n", "expected a positive integer"))? as usize;
        let chart = Chart::new(n)?;
        let m = obj.get("matrix").ok_or_else(|| Error::schema("/matrix", "missing"))?;
        Ok(Connection { gamma: matrix_from_json(m, chart, "/matrix")?, kind })
    }

    /// `h = (I + Γ)/2`, `v = (I - Γ)/2`.
    pub fn projectors(&self) -> (VectorOneForm, VectorOneForm) {
        let i = VectorOneForm::identity(self.chart());
        let h = VectorOneForm::combine(self.chart(), &[(0.5, &i), (0.5, &self.gamma)]).unwrap();
        let v = VectorOneForm::combine(self.chart(), &[(0.5, &i), (-0.5, &self.gamma)]).unwrap();
        (h, v)
    }
}

pub fn matrix_to_json(k: &VectorOneForm) -> Result<Value> {
    let d = k.dim();
    let rows: Result<Vec<Value>> = (0..d)
        .map(|r| (0..d).map(|c| k.get(r, c).to_json()).collect::<Result<Vec<_>>>().map(Value::Array))
        .collect();
    Ok(Value::Array(rows?))
}

/// A `3n × 3n` array of expression nodes.
pub fn matrix_from_json(v: &Value, chart: Chart, pointer: &str) -> Result<VectorOneForm> {
    let d = chart.dim();
    let rows = v.as_array().filter(|r| r.len() == d).ok_or_else(|| Error::schema(pointer, format!("expected {d} rows")))?;
    let mut entries = Vec::with_capacity(d * d);
    for (r, row) in rows.iter().enumerate() {
        let ptr = format!("{pointer}/{r}");
        let cols = row.as_array().filter(|c| c.len() == d).ok_or_else(|| Error::schema(&ptr, format!("expected {d} entries")))?;
        for (c, e) in cols.iter().enumerate() {
            entries.push(Expr::from_json(e, Some(chart.n), &format!("{ptr}/{c}"))?);
        }
    }
    VectorOneForm::new(chart, entries)
}

/// Defining identities, `Γ² = I`, projector algebra and the projector identities of the type.
pub fn validate_connection(pk: &CanonicalPack, c: &Connection, points: &[Vec<f64>], tol: Tolerance, prefix: &str) -> Vec<Check> {
    let np = points.len();
    let g = &c.gamma;
    let id = |s: &str| format!("{prefix}.{s}");
    let mut out = Vec::new();
    let mut push = |name: &str, anchor: &str, r: Result<Residual>| out.push(Check::from_result(&id(name), anchor, np, r, tol));
    let i = VectorOneForm::identity(pk.chart);
    let (h, v) = c.projectors();
    let (j1, j2) = (&pk.j1, &pk.j2);
    match c.kind {
        SprayType::One => {
            push("j1_gamma", "§1 connection", g.chart().ensure_same(&pk.chart).and_then(|_| compare(&j1.compose(g)?, j1, points)));
            push("gamma_j2", "§1 connection", g.compose(j2).and_then(|m| compare(&m, &j2.scale(-1.0), points)));
        }
        SprayType::Two => {
            push("j2_gamma", "§1 connection", g.chart().ensure_same(&pk.chart).and_then(|_| compare(&j2.compose(g)?, j2, points)));
            push("gamma_j1", "§1 connection", g.compose(j1).and_then(|m| compare(&m, &j1.scale(-1.0), points)));
        }
    }
    push("involution", "§1 connection", g.compose(g).and_then(|m| compare(&m, &i, points)));
    push("h_idempotent", "§1 connection", h.compose(&h).and_then(|m| compare(&m, &h, points)));
    push("v_idempotent", "§1 connection", v.compose(&v).and_then(|m| compare(&m, &v, points)));
    push("hv", "§1 connection", h.compose(&v).and_then(|m| magnitude(&m, points)));
    push("vh", "§1 connection", v.compose(&h).and_then(|m| magnitude(&m, points)));
    match c.kind {
        SprayType::One => {
            push("eq9.j1_h", "Eq (9)", j1.compose(&h).and_then(|m| compare(&m, j1, points)));
            push("eq9.j1_v", "Eq (9)", j1.compose(&v).and_then(|m| magnitude(&m, points)));
            push("eq9.h_j2", "Eq (9)", h.compose(j2).and_then(|m| magnitude(&m, points)));
            push("eq9.v_j2", "Eq (9)", v.compose(j2).and_then(|m| compare(&m, j2, points)));
        }
        SprayType::Two => {
            push("eq10.j2_h", "Eq (10)", j2.compose(&h).and_then(|m| compare(&m, j2, points)));
            push("eq10.j2_v", "Eq (10)", j2.compose(&v).and_then(|m| magnitude(&m, points)));
            push("eq10.h_j1", "Eq (10)", h.compose(j1).and_then(|m| magnitude(&m, points)));
            push("eq10.v_j1", "Eq (10)", v.compose(j1).and_then(|m| compare(&m, j1, points)));
        }
    }
    let ranks = (|| -> Result<bool> {
        let d = pk.chart.dim();
        let mut ok = true;
        for p in points {
            let (mh, mv) = (h.eval(p)?, v.eval(p)?);
            ok &= linalg::rank(&mh, 1e-9) + linalg::rank(&mv, 1e-9) == d;
        }
        Ok(ok)
    })();
    out.push(match ranks {
        Ok(ok) => Check::flag(&id("rank_split"), "§1 connection", np, ok, "rank h + rank v = 3n"),
        Err(e) => Check::flag(&id("rank_split"), "§1 connection", np, false, e.to_string()),
    });
    out
}

fn require_kind(c: &Connection, kind: ConnType) -> Result<()> {
    if c.kind != kind {
        return Err(Error::InvalidConnection(format!(
            "expected a connection of type {}, got type {}",
            kind_no(kind),
            kind_no(c.kind)
        )));
    }
    Ok(())
}

/// `t = [J₁, Γ]`.
pub fn weak_torsion(pk: &CanonicalPack, c: &Connection) -> Result<VectorTwoForm> {
    require_kind(c, SprayType::One)?;
    nijenhuis(&pk.j1, &c.gamma)
}

/// The trivial semi-spray `(y, 0, 0)` (type 1) or `(y, z, 0)` (type 2).
pub fn reference_semispray(chart: Chart, kind: SprayType) -> SemiSpray {
    let free = chart.dim() - kind.forced_blocks().len() * chart.n;
    SemiSpray::from_free(chart, kind, vec![Expr::zero(); free]).unwrap()
}

/// `S = h S'`.
pub fn associated_semispray(c: &Connection, s_prime: &SemiSpray) -> Result<SemiSpray> {
    if s_prime.kind != c.kind {
        return Err(Error::TypeMismatch(format!(
            "connection of type {} with a semi-spray of type {}",
            kind_no(c.kind),
            kind_no(s_prime.kind)
        )));
    }
    let (h, _) = c.projectors();
    Ok(SemiSpray { field: h.apply(&s_prime.field)?, kind: c.kind })
}

/// Strong torsion `T = i_S t - [C₂, Γ]` of a type-1 connection.
pub fn strong_torsion(pk: &CanonicalPack, c: &Connection, s: &SemiSpray) -> Result<VectorOneForm> {
    require_kind(c, SprayType::One)?;
    if s.kind != SprayType::One {
        return Err(Error::TypeMismatch("strong torsion needs a semi-spray of type 1".into()));
    }
    let t = weak_torsion(pk, c)?;
    contract_two(&t, &s.field)?.sub(&lie_derivative(&pk.c2, &c.gamma)?)
}

/// Strong torsion through `T = -J₂v + 2[S, J₁] + [C₁, Γ] - [C₂, Γ]`, with `S` the associated semi-spray.
pub fn strong_torsion_closed_form(pk: &CanonicalPack, c: &Connection) -> Result<VectorOneForm> {
    require_kind(c, SprayType::One)?;
    let s = associated_semispray(c, &reference_semispray(pk.chart, SprayType::One))?;
    let (_, v) = c.projectors();
    VectorOneForm::combine(
        pk.chart,
        &[
            (-1.0, &pk.j2.compose(&v)?),
            (2.0, &lie_derivative(&s.field, &pk.j1)?),
            (1.0, &lie_derivative(&pk.c1, &c.gamma)?),
            (-1.0, &lie_derivative(&pk.c2, &c.gamma)?),
        ],
    )
}

/// `T = ½{J₂Γ - J₂ - 4[J₁, S]}`, for homogeneous `Γ` with `[C₁, Γ] = 0`.
pub fn eq17_form(pk: &CanonicalPack, c: &Connection, points: &[Vec<f64>], tol: Tolerance) -> Result<VectorOneForm> {
    require_kind(c, SprayType::One)?;
    let r2 = magnitude(&lie_derivative(&pk.c2, &c.gamma)?, points)?;
    if !tol.accepts(r2.value, r2.scale) {
        return Err(Error::PreconditionFailed { what: "[C2, Γ] = 0".into(), residual: r2.value });
    }
    let r1 = magnitude(&lie_derivative(&pk.c1, &c.gamma)?, points)?;
    if !tol.accepts(r1.value, r1.scale) {
        return Err(Error::PreconditionFailed { what: "[C1, Γ] = 0".into(), residual: r1.value });
    }
    let s = associated_semispray(c, &reference_semispray(pk.chart, SprayType::One))?;
    VectorOneForm::combine(
        pk.chart,
        &[
            (0.5, &pk.j2.compose(&c.gamma)?),
            (-0.5, &pk.j2),
            (-2.0, &bracket_form_field(&pk.j1, &s.field)?),
        ],
    )
}

/// Strong torsion of a type-2 connection with associated spray `S`: `T = 3Γ - I - 2[J₂, S]`.
pub fn strong_torsion_type2(pk: &CanonicalPack, c: &Connection) -> Result<VectorOneForm> {
    require_kind(c, SprayType::Two)?;
    let s = associated_semispray(c, &reference_semispray(pk.chart, SprayType::Two))?;
    VectorOneForm::combine(
        pk.chart,
        &[
            (3.0, &c.gamma),
            (-1.0, &VectorOneForm::identity(pk.chart)),
            (-2.0, &bracket_form_field(&pk.j2, &s.field)?),
        ],
    )
}

fn precondition(what: &str, r: Residual, tol: Tolerance) -> Result<()> {
    if tol.accepts(r.value, r.scale) {
        Ok(())
    } else {
        Err(Error::PreconditionFailed { what: what.into(), residual: r.value })
    }
}

fn check_spray(pk: &CanonicalPack, s: &SemiSpray, kind: SprayType, points: &[Vec<f64>], tol: Tolerance) -> Result<()> {
    if s.kind != kind {
        return Err(Error::TypeMismatch(format!("expected a spray of type {}", kind_no(kind))));
    }
    precondition(&format!("J{}S = C{}", kind_no(kind), kind_no(kind)), s.constraint_residual(pk, points)?, tol)?;
    precondition("[C2, S] = S", spray_residual(pk, &s.field, points)?, tol)
}

/// `Γ = ⅓{2[J₂, S] + T + I}`.
pub fn catz_decompose_type2(pk: &CanonicalPack, s: &SemiSpray, t: &VectorOneForm, points: &[Vec<f64>], tol: Tolerance) -> Result<Connection> {
    check_spray(pk, s, SprayType::Two, points, tol)?;
    let tv = VectorForm::One(t.clone());
    precondition("T is π1-semi-basic", semibasic_residual(pk, Graded::Vector(&tv), Projection::Pi1, points)?, tol)?;
    precondition("T(S) = 0", magnitude(&t.apply(&s.field)?, points)?, tol)?;
    let i = VectorOneForm::identity(pk.chart);
    let gamma = VectorOneForm::combine(
        pk.chart,
        &[(2.0 / 3.0, &bracket_form_field(&pk.j2, &s.field)?), (1.0 / 3.0, t), (1.0 / 3.0, &i)],
    )?;
    Connection::validated(pk, gamma, SprayType::Two, points, tol).map_err(|e| Error::ValidationFailed(e.to_string()))
}

/// The conjugate pair `Γ₁ = ⅓{2[J₂,S] + 2[[J₁,S],S] - I}`, `Γ₂ = ⅓{2[J₂,S] + I}`.
pub fn conjugate_pair(pk: &CanonicalPack, s: &SemiSpray, points: &[Vec<f64>], tol: Tolerance) -> Result<(Connection, Connection)> {
    check_spray(pk, s, SprayType::Two, points, tol)?;
    let i = VectorOneForm::identity(pk.chart);
    let j2s = bracket_form_field(&pk.j2, &s.field)?;
    let j1ss = bracket_form_field(&bracket_form_field(&pk.j1, &s.field)?, &s.field)?;
    let g1 = VectorOneForm::combine(pk.chart, &[(2.0 / 3.0, &j2s), (2.0 / 3.0, &j1ss), (-1.0 / 3.0, &i)])?;
    let g2 = VectorOneForm::combine(pk.chart, &[(2.0 / 3.0, &j2s), (1.0 / 3.0, &i)])?;
    Ok((Connection::new(g1, SprayType::One), Connection::new(g2, SprayType::Two)))
}

/// Block `(row, col)` entries of a vector 1-form.
fn block_entry(k: &VectorOneForm, n: usize, rb: Block, i: usize, cb: Block, j: usize) -> &Expr {
    k.get(rb.offset() * n + i, cb.offset() * n + j)
}

/// A type-1 connection with `J₂Γ = 2T + J₂ + 4[J₁, S]`, associated spray `S`, strong
/// torsion `T` and `[C₁, Γ] = 0`.
///
/// Pointwise, the constraints `J₁Γ = J₁`, `ΓJ₂ = -J₂`, `J₂Γ = R` and `ΓS = S` are
/// solved for the minimum-norm matrix `Γ`; the closed form
/// `Γ = [[I,0,0],[P,-I,0],[W,0,-I]]`, `P = R_zx/2`, `W = 2 S_z yᵀ/|y|²` is that
/// solution and is then validated.
pub fn decompose_type1(pk: &CanonicalPack, s: &SemiSpray, t: &VectorOneForm, points: &[Vec<f64>], tol: Tolerance) -> Result<Connection> {
    check_spray(pk, s, SprayType::One, points, tol)?;
    let tv = VectorForm::One(t.clone());
    precondition("T is π2-semi-basic", semibasic_residual(pk, Graded::Vector(&tv), Projection::Pi2, points)?, tol)?;
    precondition("T(S) = 0", magnitude(&t.apply(&s.field)?, points)?, tol)?;
    let chart = pk.chart;
    let (n, d) = (chart.n, chart.dim());
    let j1s = bracket_form_field(&pk.j1, &s.field)?;
    let r = VectorOneForm::combine(chart, &[(2.0, t), (1.0, &pk.j2), (4.0, &j1s)])?;

    // closed form
    let y2 = Expr::add((0..n).map(|k| Expr::y(k) * Expr::y(k)));
    let inv = y2.recip();
    let sz: Vec<Expr> = chart.block_range(Block::Z).map(|k| s.field.comp(k).clone()).collect();
    let gamma = VectorOneForm::from_fn(chart, |a, b| {
        let (ca, cb) = (chart.coord(a), chart.coord(b));
        let delta = if ca.i == cb.i { 1.0 } else { 0.0 };
        match (ca.block, cb.block) {
            (Block::X, Block::X) => Expr::constant(delta),
            (Block::Y, Block::Y) | (Block::Z, Block::Z) => Expr::constant(-delta),
            (Block::Y, Block::X) => block_entry(&r, n, Block::Z, ca.i, Block::X, cb.i).scale(0.5),
            (Block::Z, Block::X) => Expr::mul([Expr::constant(2.0), sz[ca.i].clone(), Expr::y(cb.i), inv.clone()]),
            _ => Expr::zero(),
        }
    });

    // pointwise minimum-norm solve of the constraint system
    for p in points {
        let mut ev = Evaluator::new(p);
        let (mj1, mj2, mr, mg) = (pk.j1.eval_with(&mut ev)?, pk.j2.eval_with(&mut ev)?, r.eval_with(&mut ev)?, gamma.eval_with(&mut ev)?);
        let sv = DVector::from_vec(s.field.eval_with(&mut ev)?);
        let unknowns = d * d;
        let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        // (A Γ)_{ab} = Σ_k A_{ak} Γ_{kb}
        for (a_mat, rhs) in [(&mj1, &mj1), (&mj2, &mr)] {
            for a in 0..d {
                for b in 0..d {
                    let coeffs: Vec<(usize, f64)> = (0..d).filter(|k| a_mat[(a, *k)] != 0.0).map(|k| (k * d + b, a_mat[(a, k)])).collect();
                    rows.push((coeffs, rhs[(a, b)]));
                }
            }
        }
        // (Γ J₂)_{ab} = Σ_k Γ_{ak} J₂_{kb} = -J₂_{ab}
        for a in 0..d {
            for b in 0..d {
                let coeffs: Vec<(usize, f64)> = (0..d).filter(|k| mj2[(*k, b)] != 0.0).map(|k| (a * d + k, mj2[(k, b)])).collect();
                rows.push((coeffs, -mj2[(a, b)]));
            }
            // (Γ S)_a = S_a
            rows.push(((0..d).map(|k| (a * d + k, sv[k])).collect(), sv[a]));
        }
        let mut am = DMatrix::zeros(rows.len(), unknowns);
        let mut bv = DVector::zeros(rows.len());
        for (i, (coeffs, rhs)) in rows.iter().enumerate() {
            for (k, v) in coeffs {
                am[(i, *k)] += v;
            }
            bv[i] = *rhs;
        }
        let (x, res) = linalg::min_norm_solve(&am, &bv, 1e-12);
        let scale = bv.amax().max(1.0);
        if !tol.accepts(res, scale) {
            return Err(Error::NoSolution(format!("constraint system infeasible at {p:?} (residual {res:.3e})")));
        }
        let dev = (0..unknowns).map(|k| (x[k] - mg[(k / d, k % d)]).abs()).fold(0.0, f64::max);
        if !tol.accepts(dev, scale) {
            return Err(Error::ValidationFailed(format!("closed form deviates from the minimum-norm solution by {dev:.3e}")));
        }
    }

    let c = Connection::validated(pk, gamma, SprayType::One, points, tol).map_err(|e| Error::ValidationFailed(e.to_string()))?;
    let fail = |what: &str, r: Residual| -> Result<()> {
        if tol.accepts(r.value, r.scale) {
            Ok(())
        } else {
            Err(Error::ValidationFailed(format!("{what} (residual {:.3e})", r.value)))
        }
    };
    fail("J2Γ = 2T + J2 + 4[J1,S]", compare(&pk.j2.compose(&c.gamma)?, &r, points)?)?;
    fail("[C2, Γ] = 0", magnitude(&lie_derivative(&pk.c2, &c.gamma)?, points)?)?;
    fail("[C1, Γ] = 0", magnitude(&lie_derivative(&pk.c1, &c.gamma)?, points)?)?;
    let assoc = associated_semispray(&c, &reference_semispray(chart, SprayType::One))?;
    fail("associated spray is S", compare(&assoc.field, &s.field, points)?)?;
    fail("strong torsion is T", compare(&strong_torsion(pk, &c, s)?, t, points)?)?;
    Ok(c)
}

/// Random homogeneous type-1 connection `[[I,0,0],[P,-I,0],[W,0,-I]]` with `P` h(1), `W` h(2).
/// With `c1_flat`, `W = Σ P_k z_k + q(y)` so that also `[C₁, Γ] = 0`.
pub fn random_type1(chart: Chart, c1_flat: bool, gen: &mut PolyGen) -> Connection {
    let n = chart.n;
    let mut p = vec![vec![Expr::zero(); n]; n];
    let mut w = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            if c1_flat {
                let coef: Vec<Expr> = (0..n).map(|_| gen.base_factor(n)).collect();
                p[i][j] = Expr::add((0..n).map(|k| &coef[k] * Expr::y(k)));
                let (a, b) = (gen.index(n), gen.index(n));
                let q = gen.base_factor(n) * Expr::y(a) * Expr::y(b);
                w[i][j] = Expr::add((0..n).map(|k| &coef[k] * Expr::z(k))) + q;
            } else {
                p[i][j] = gen.homogeneous(n, 1, 2);
                w[i][j] = gen.homogeneous(n, 2, 2);
            }
        }
    }
    let gamma = VectorOneForm::from_fn(chart, |a, b| {
        let (ca, cb) = (chart.coord(a), chart.coord(b));
        let delta = if ca.i == cb.i { 1.0 } else { 0.0 };
        match (ca.block, cb.block) {
            (Block::X, Block::X) => Expr::constant(delta),
            (Block::Y, Block::Y) | (Block::Z, Block::Z) => Expr::constant(-delta),
            (Block::Y, Block::X) => p[ca.i][cb.i].clone(),
            (Block::Z, Block::X) => w[ca.i][cb.i].clone(),
            _ => Expr::zero(),
        }
    });
    Connection::new(gamma, SprayType::One)
}

/// Spray of type 1 `S = (y, a y², a y z + b y³)` on `n = 1`, used with `T = 0`.
pub fn type1_spray_n1(a: f64, b: f64) -> SemiSpray {
    let (y, z) = (Expr::y(0), Expr::z(0));
    let chart = Chart::new(1).unwrap();
    SemiSpray::from_free(
        chart,
        SprayType::One,
        vec![y.powf(2.0) * a, Expr::add([&y * &z * a, y.powf(3.0) * b])],
    )
    .unwrap()
}

/// Torsion checks on a type-1 connection: semi-basic torsions,
/// agreement with the closed form and `T(S) = -2v[C₂, S]`.
pub fn torsion_checks(pk: &CanonicalPack, c: &Connection, points: &[Vec<f64>], tol: Tolerance, prefix: &str) -> Vec<Check> {
    let np = points.len();
    let id = |s: &str| format!("{prefix}.{s}");
    let mut out = Vec::new();
    let res = (|| -> Result<Vec<Check>> {
        let mut v = Vec::new();
        let sref = reference_semispray(pk.chart, SprayType::One);
        let s = associated_semispray(c, &sref)?;
        let t_def = strong_torsion(pk, c, &sref)?;
        let t_assoc = strong_torsion(pk, c, &s)?;
        let t_closed = strong_torsion_closed_form(pk, c)?;
        let weak = VectorForm::Two(weak_torsion(pk, c)?);
        let tv = VectorForm::One(t_def.clone());
        v.push(Check::residual(&id("weak_torsion_semibasic"), "Def 1", np, semibasic_residual(pk, Graded::Vector(&weak), Projection::Pi2, points)?, tol));
        v.push(Check::residual(&id("strong_torsion_spray_independent"), "Def 1", np, compare(&t_def, &t_assoc, points)?, tol));
        v.push(Check::residual(&id("strong_torsion_closed_form"), "Eq (13)", np, compare(&t_def, &t_closed, points)?, tol));
        v.push(Check::residual(&id("strong_torsion_semibasic"), "Prop 1(a)", np, semibasic_residual(pk, Graded::Vector(&tv), Projection::Pi2, points)?, tol));
        let (_, vproj) = c.projectors();
        let rhs = vproj.apply(&lie_bracket(&pk.c2, &s.field)?)?.scale(-2.0);
        v.push(Check::residual(&id("strong_torsion_on_spray"), "Prop 1(b)", np, compare(&t_def.apply(&s.field)?, &rhs, points)?, tol));
        Ok(v)
    })();
    match res {
        Ok(v) => out.extend(v),
        Err(e) => out.push(Check::flag(&id("strong_torsion"), "Def 1", np, false, e.to_string())),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{sample_points, SampleBox};

    fn pts(n: usize) -> Vec<Vec<f64>> {
        sample_points(Chart::new(n).unwrap(), 8, 4, &SampleBox::default())
    }

    fn diag(chart: Chart, v: &[f64]) -> VectorOneForm {
        VectorOneForm::from_fn(chart, |r, c| Expr::constant(if r == c { v[r] } else { 0.0 }))
    }

    fn s0(chart: Chart) -> SemiSpray {
        reference_semispray(chart, SprayType::Two)
    }

    fn all_pass(checks: &[Check]) -> bool {
        checks.iter().all(|c| c.passed)
    }

    #[test]
    fn json_round_trip() {
        let mut g = PolyGen::new(3);
        let c = random_type1(Chart::new(2).unwrap(), true, &mut g);
        let back = Connection::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        let mut bad = c.to_json().unwrap();
        bad["matrix"][1][2] = json!({"op": "coord", "index": {"block": "w", "i": 1}});
        match Connection::from_json(&bad) {
            Err(Error::Schema { pointer, .. }) => assert!(pointer.starts_with("/matrix/1/2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_examples() {
        let pk = CanonicalPack::new(1).unwrap();
        let ch = pk.chart;
        let p = pts(1);
        let g2 = Connection::new(diag(ch, &[1.0, 1.0, -1.0]), SprayType::Two);
        assert!(all_pass(&validate_connection(&pk, &g2, &p, Tolerance::POLY, "c")));
        let g1 = Connection::new(diag(ch, &[1.0, -1.0, -1.0]), SprayType::One);
        assert!(all_pass(&validate_connection(&pk, &g1, &p, Tolerance::POLY, "c")));
        for kind in [SprayType::One, SprayType::Two] {
            let id = Connection::new(VectorOneForm::identity(ch), kind);
            assert!(!all_pass(&validate_connection(&pk, &id, &p, Tolerance::POLY, "c")));
        }
        let (h, v) = g2.projectors();
        assert_eq!(h.eval(&p[0]).unwrap(), diag(ch, &[1.0, 1.0, 0.0]).eval(&p[0]).unwrap());
        assert_eq!(v.eval(&p[0]).unwrap(), diag(ch, &[0.0, 0.0, 1.0]).eval(&p[0]).unwrap());
    }

    #[test]
    fn associated_semisprays() {
        let ch = Chart::new(1).unwrap();
        let g2 = Connection::new(diag(ch, &[1.0, 1.0, -1.0]), SprayType::Two);
        let sp = SemiSpray::from_free(ch, SprayType::Two, vec![Expr::constant(5.0)]).unwrap();
        let s = associated_semispray(&g2, &sp).unwrap();
        assert_eq!(s.field.eval(&[0.0, 2.0, 3.0]).unwrap(), vec![2.0, 3.0, 0.0]);
        let g1 = Connection::new(diag(ch, &[1.0, -1.0, -1.0]), SprayType::One);
        let sp = SemiSpray::from_free(ch, SprayType::One, vec![Expr::constant(7.0), Expr::constant(9.0)]).unwrap();
        let s = associated_semispray(&g1, &sp).unwrap();
        assert_eq!(s.field.eval(&[0.0, 2.0, 3.0]).unwrap(), vec![2.0, 0.0, 0.0]);
        assert!(matches!(associated_semispray(&g2, &sp), Err(Error::TypeMismatch(_))));
    }

    #[test]
    fn conjugate_pair_flat() {
        let pk = CanonicalPack::new(1).unwrap();
        let p = pts(1);
        let (g1, g2) = conjugate_pair(&pk, &s0(pk.chart), &p, Tolerance::POLY).unwrap();
        assert!(compare(&g1.gamma, &diag(pk.chart, &[1.0, -1.0, -1.0]), &p).unwrap().value < 1e-12);
        assert!(compare(&g2.gamma, &diag(pk.chart, &[1.0, 1.0, -1.0]), &p).unwrap().value < 1e-12);
        let catz = catz_decompose_type2(&pk, &s0(pk.chart), &VectorOneForm::zero(pk.chart), &p, Tolerance::POLY).unwrap();
        assert!(compare(&catz.gamma, &g2.gamma, &p).unwrap().value == 0.0);
    }

    #[test]
    fn flat_torsions_vanish() {
        let pk = CanonicalPack::new(1).unwrap();
        let p = pts(1);
        let g1 = Connection::new(diag(pk.chart, &[1.0, -1.0, -1.0]), SprayType::One);
        assert_eq!(weak_torsion(&pk, &g1).unwrap().max_abs(&p).unwrap(), 0.0);
        let s = reference_semispray(pk.chart, SprayType::One);
        assert_eq!(strong_torsion(&pk, &g1, &s).unwrap().max_abs(&p).unwrap(), 0.0);
        assert_eq!(eq17_form(&pk, &g1, &p, Tolerance::POLY).unwrap().max_abs(&p).unwrap(), 0.0);
    }

    #[test]
    fn eq17_guard() {
        let pk = CanonicalPack::new(1).unwrap();
        let p = pts(1);
        // W = z is h(2) but [C1, Γ] = (y - 0) ≠ 0 since P = 0
        let g = VectorOneForm::new(pk.chart, vec![
            Expr::one(), Expr::zero(), Expr::zero(),
            Expr::zero(), -Expr::one(), Expr::zero(),
            Expr::z(0), Expr::zero(), -Expr::one(),
        ]).unwrap();
        let c = Connection::new(g, SprayType::One);
        assert!(matches!(eq17_form(&pk, &c, &p, Tolerance::POLY), Err(Error::PreconditionFailed { .. })));
    }

    #[test]
    fn random_type1_torsion_paths_agree() {
        for n in 1..=2 {
            let pk = CanonicalPack::new(n).unwrap();
            let p = pts(n);
            let mut g = PolyGen::new(21 + n as u64);
            for flat in [false, true] {
                let c = random_type1(pk.chart, flat, &mut g);
                assert!(all_pass(&validate_connection(&pk, &c, &p, Tolerance::POLY, "c")));
                let checks = torsion_checks(&pk, &c, &p, Tolerance::POLY, "t");
                assert!(all_pass(&checks), "{checks:#?}");
                if flat {
                    let t17 = eq17_form(&pk, &c, &p, Tolerance::POLY).unwrap();
                    let t = strong_torsion_closed_form(&pk, &c).unwrap();
                    assert!(compare(&t17, &t, &p).unwrap().value < 1e-9);
                }
            }
        }
    }

    #[test]
    fn decompose_type1_flat_and_family() {
        let pk = CanonicalPack::new(1).unwrap();
        let p = pts(1);
        let s = reference_semispray(pk.chart, SprayType::One);
        let t = VectorOneForm::zero(pk.chart);
        let c = decompose_type1(&pk, &s, &t, &p, Tolerance::RATIONAL).unwrap();
        assert!(compare(&c.gamma, &diag(pk.chart, &[1.0, -1.0, -1.0]), &p).unwrap().value < 1e-12);
        let s = type1_spray_n1(0.5, -0.25);
        let c = decompose_type1(&pk, &s, &t, &p, Tolerance::RATIONAL).unwrap();
        assert_eq!(strong_torsion(&pk, &c, &s).unwrap().max_abs(&p).unwrap() < 1e-9, true);
    }

    #[test]
    fn decompose_type1_guards() {
        let pk = CanonicalPack::new(1).unwrap();
        let p = pts(1);
        let s = reference_semispray(pk.chart, SprayType::One);
        // T with T(S) ≠ 0: only an x-column, T_yx = 1
        let t = VectorOneForm::from_fn(pk.chart, |r, c| if r == 1 && c == 0 { Expr::one() } else { Expr::zero() });
        assert!(matches!(decompose_type1(&pk, &s, &t, &p, Tolerance::POLY), Err(Error::PreconditionFailed { .. })));
        // a spray for which the constraint system is inconsistent: S_y = y² with ∂_z S_z = 0
        let bad = SemiSpray::from_free(pk.chart, SprayType::One, vec![Expr::y(0).powf(2.0), Expr::zero()]).unwrap();
        let t = VectorOneForm::zero(pk.chart);
        assert!(matches!(decompose_type1(&pk, &bad, &t, &p, Tolerance::POLY), Err(Error::NoSolution(_))));
    }

    #[test]
    fn catz_round_trip_with_torsion() {
        let pk = CanonicalPack::new(1).unwrap();
        let p = pts(1);
        let s = s0(pk.chart);
        // π1-semi-basic T with T(S) = 0: only a z-row (a z, -a y, 0)
        let t = VectorOneForm::new(pk.chart, vec![
            Expr::zero(), Expr::zero(), Expr::zero(),
            Expr::zero(), Expr::zero(), Expr::zero(),
            Expr::z(0) * 0.5, Expr::y(0) * -0.5, Expr::zero(),
        ]).unwrap();
        let c = catz_decompose_type2(&pk, &s, &t, &p, Tolerance::POLY).unwrap();
        let back = strong_torsion_type2(&pk, &c).unwrap();
        assert!(compare(&back, &t, &p).unwrap().value < 1e-12);
        let assoc = associated_semispray(&c, &s).unwrap();
        assert!(compare(&assoc.field, &s.field, &p).unwrap().value < 1e-12);
        // perturbing Γ breaks validity or the torsion
        let bumped = c.gamma.add(&VectorOneForm::from_fn(pk.chart, |r, cc| Expr::constant(if r == 2 && cc == 0 { 0.1 } else { 0.0 }))).unwrap();
        let pert = Connection::new(bumped, SprayType::Two);
        let valid = all_pass(&validate_connection(&pk, &pert, &p, Tolerance::POLY, "c"));
        let same_t = compare(&strong_torsion_type2(&pk, &pert).unwrap(), &t, &p).unwrap().value < 1e-9;
        assert!(!(valid && same_t));
    }
}
