//! Linear connections on `T₂M` given by coordinate coefficients.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::calculus::{bracket_form_field, directional, lie_derivative};
use crate::canonical::{CanonicalPack, SprayType};
use crate::chart::{Block, Chart};
use crate::connection::{associated_semispray, reference_semispray, strong_torsion_type2, validate_connection, Connection};
use crate::error::{Error, Result};
use crate::expr::{Evaluator, Expr};
use crate::report::{Check, Residual, Tolerance};
use crate::tensor::{compare, magnitude, Tensor, VectorField, VectorOneForm};

/// Below this `|det|` a fiber map is treated as singular.
pub const DET_THRESHOLD: f64 = 1e-8;

/// `D_X Y = X·∇Y + Γ(X, Y)` with `Γ(X, Y)^a = Σ Γ^a_{bc} X^b Y^c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConnection {
    chart: Chart,
    coef: Vec<Expr>,
    pub domain: Option<String>,
}

impl LinearConnection {
    /// `coef[a d² + b d + c] = Γ^a_{bc}`.
    pub fn new(chart: Chart, coef: Vec<Expr>) -> Result<Self> {
        let d = chart.dim();
        if coef.len() != d * d * d {
            return Err(Error::InvalidConnection(format!("expected {} coefficients, got {}", d * d * d, coef.len())));
        }
        Ok(LinearConnection { chart, coef, domain: None })
    }

    pub fn from_fn(chart: Chart, mut f: impl FnMut(usize, usize, usize) -> Expr) -> Self {
        let d = chart.dim();
        let mut coef = Vec::with_capacity(d * d * d);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    coef.push(f(a, b, c));
                }
            }
        }
        LinearConnection { chart, coef, domain: None }
    }

    pub fn flat(chart: Chart) -> Self {
        Self::from_fn(chart, |_, _, _| Expr::zero())
    }

    pub fn with_domain(mut self, domain: &str) -> Self {
        self.domain = Some(domain.into());
        self
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> &Expr {
        let d = self.chart.dim();
        &self.coef[a * d * d + b * d + c]
    }

    /// `(Γ_b)_{ac} = Γ^a_{bc}`, the matrix of `Y ↦ Γ(∂_b, Y)`.
    pub fn slice(&self, b: usize) -> VectorOneForm {
        VectorOneForm::from_fn(self.chart, |a, c| self.get(a, b, c).clone())
    }

    pub fn christoffel(&self, x: &[Expr], y: &[Expr]) -> Vec<Expr> {
        let d = self.chart.dim();
        (0..d)
            .map(|a| {
                let mut terms = Vec::new();
                for b in 0..d {
                    if x[b].is_zero() {
                        continue;
                    }
                    for c in 0..d {
                        let g = self.get(a, b, c);
                        if !g.is_zero() && !y[c].is_zero() {
                            terms.push(Expr::mul([g.clone(), x[b].clone(), y[c].clone()]));
                        }
                    }
                }
                Expr::add(terms)
            })
            .collect()
    }

    /// Coefficients replaced by their part symmetric in the two lower indices.
    pub fn symmetrized(&self) -> Self {
        let mut out = Self::from_fn(self.chart, |a, b, c| (self.get(a, b, c) + self.get(a, c, b)).scale(0.5));
        out.domain = self.domain.clone();
        out
    }

    /// Torsion `T_D(∂_b, ∂_c)^a = Γ^a_{bc} - Γ^a_{cb}`; coordinate fields commute.
    pub fn torsion_residual(&self, points: &[Vec<f64>]) -> Result<Residual> {
        let d = self.chart.dim();
        let mut r = Residual::exact(0.0);
        for p in points {
            let mut ev = Evaluator::new(p);
            for a in 0..d {
                for b in 0..d {
                    for c in b + 1..d {
                        let (u, v) = (ev.eval(self.get(a, b, c))?, ev.eval(self.get(a, c, b))?);
                        r = r.max(Residual::new((u - v).abs(), u.abs().max(v.abs())));
                    }
                }
            }
        }
        Ok(r)
    }

    /// JSON: `{"n", "coefficients": [a][b][c], "domain"}`.
    pub fn to_json(&self) -> Result<Value> {
        let d = self.chart.dim();
        let mut outer = Vec::with_capacity(d);
        for a in 0..d {
            let mut mid = Vec::with_capacity(d);
            for b in 0..d {
                let row: Result<Vec<Value>> = (0..d).map(|c| self.get(a, b, c).to_json()).collect();
                mid.push(Value::Array(row?));
            }
            outer.push(Value::Array(mid));
        }
        let mut v = json!({"n": self.chart.n, "coefficients": outer});
        if let Some(dom) = &self.domain {
            v["domain"] = json!(dom);
        }
        Ok(v)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::schema("", "linear connection must be an object"))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "n" | "coefficients" | "domain" | "kind") {
                return Err(Error::schema("", format!("unknown field \"{key}\"")));
            }
        }
        let n = obj
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::schema("/n", "expected a positive integer"))? as usize;
        let chart = Chart::new(n)?;
        let d = chart.dim();
        let arr = |v: &Value, ptr: &str| -> Result<Vec<Value>> {
            let a = v.as_array().ok_or_else(|| Error::schema(ptr, "expected an array"))?;
            if a.len() != d {
                return Err(Error::schema(ptr, format!("expected {d} entries, got {}", a.len())));
            }
            Ok(a.clone())
        };
        let top = obj.get("coefficients").ok_or_else(|| Error::schema("/coefficients", "missing"))?;
        let mut coef = Vec::with_capacity(d * d * d);
        for (a, va) in arr(top, "/coefficients")?.iter().enumerate() {
            for (b, vb) in arr(va, &format!("/coefficients/{a}"))?.iter().enumerate() {
                for (c, vc) in arr(vb, &format!("/coefficients/{a}/{b}"))?.iter().enumerate() {
                    coef.push(Expr::from_json(vc, Some(n), &format!("/coefficients/{a}/{b}/{c}"))?);
                }
            }
        }
        let mut lc = LinearConnection::new(chart, coef)?;
        lc.domain = match obj.get("domain") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(Error::schema("/domain", "expected a string")),
        };
        Ok(lc)
    }
}

pub fn covariant_derivative(d: &LinearConnection, x: &VectorField, y: &VectorField) -> Result<VectorField> {
    d.chart.ensure_same(&x.chart())?;
    d.chart.ensure_same(&y.chart())?;
    let g = d.christoffel(x.comps(), y.comps());
    VectorField::new(d.chart, y.comps().iter().zip(g).map(|(yc, gc)| directional(d.chart, x.comps(), yc) + gc).collect())
}

/// `DY`: the vector 1-form `X ↦ D_X Y`.
pub fn covariant_of_field(d: &LinearConnection, y: &VectorField) -> Result<VectorOneForm> {
    d.chart.ensure_same(&y.chart())?;
    let chart = d.chart;
    let dim = chart.dim();
    Ok(VectorOneForm::from_fn(chart, |a, b| {
        let mut terms = vec![y.comp(a).diff(chart.coord(b))];
        for c in 0..dim {
            let g = d.get(a, b, c);
            if !g.is_zero() && !y.comp(c).is_zero() {
                terms.push(g * y.comp(c));
            }
        }
        Expr::add(terms)
    }))
}

/// `(D_{∂_b} K) = ∂_b K + Γ_b K - K Γ_b` for each coordinate direction `b`.
pub fn covariant_of_form(d: &LinearConnection, k: &VectorOneForm) -> Result<Vec<VectorOneForm>> {
    d.chart.ensure_same(&k.chart())?;
    let chart = d.chart;
    (0..chart.dim())
        .map(|b| {
            let gb = d.slice(b);
            let dk = VectorOneForm::from_fn(chart, |r, c| k.get(r, c).diff(chart.coord(b)));
            VectorOneForm::combine(chart, &[(1.0, &dk), (1.0, &gb.compose(k)?), (-1.0, &k.compose(&gb)?)])
        })
        .collect()
}

/// Residual of `DK = 0`, i.e. of `D_X(KY) - K(D_X Y)` over basis pairs.
pub fn parallel_check(d: &LinearConnection, k: &VectorOneForm, points: &[Vec<f64>]) -> Result<Residual> {
    let mut r = Residual::exact(0.0);
    for m in covariant_of_form(d, k)? {
        r = r.max(magnitude(&m, points)?);
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularity {
    J1,
    J2,
}

impl Regularity {
    /// Vertical block on which the fiber map acts.
    fn blocks(self) -> &'static [Block] {
        match self {
            Regularity::J1 => &[Block::Z],
            Regularity::J2 => &[Block::Y, Block::Z],
        }
    }

    /// Type of the induced nonlinear connection.
    pub fn induced_type(self) -> SprayType {
        match self {
            Regularity::J1 => SprayType::Two,
            Regularity::J2 => SprayType::One,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regularity::J1 => "J1",
            Regularity::J2 => "J2",
        }
    }
}

fn block_indices(chart: Chart, kind: Regularity) -> Vec<usize> {
    kind.blocks().iter().flat_map(|b| chart.block_range(*b)).collect()
}

/// `DC₁` (kind `J₁`) or `DC₂` (kind `J₂`).
pub fn dc(d: &LinearConnection, pk: &CanonicalPack, kind: Regularity) -> Result<VectorOneForm> {
    covariant_of_field(d, if kind == Regularity::J1 { &pk.c1 } else { &pk.c2 })
}

/// `φ = DC₁` on the `z` block or `ψ = DC₂` on the `(y, z)` block, symbolically.
pub fn fiber_map_exprs(d: &LinearConnection, pk: &CanonicalPack, kind: Regularity) -> Result<Vec<Vec<Expr>>> {
    let m = dc(d, pk, kind)?;
    let idx = block_indices(pk.chart, kind);
    Ok(idx.iter().map(|&r| idx.iter().map(|&c| m.get(r, c).clone()).collect()).collect())
}

/// Largest entry of `DC_k` outside the vertical rows.
fn leak(m: &DMatrix<f64>, idx: &[usize]) -> f64 {
    let mut out = 0.0_f64;
    for r in 0..m.nrows() {
        if !idx.contains(&r) {
            for c in 0..m.ncols() {
                out = out.max(m[(r, c)].abs());
            }
        }
    }
    out
}

fn fiber_at(d: &LinearConnection, pk: &CanonicalPack, kind: Regularity, point: &[f64], tol: Tolerance) -> Result<DMatrix<f64>> {
    let m = dc(d, pk, kind)?.eval(point)?;
    let idx = block_indices(pk.chart, kind);
    let l = leak(&m, &idx);
    if !tol.accepts(l, m.amax()) {
        return Err(Error::PreconditionFailed { what: format!("Im D{} is vertical", if kind == Regularity::J1 { "C1" } else { "C2" }), residual: l });
    }
    Ok(DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])]))
}

/// `(φ, ψ)` at a point.
pub fn fiber_maps(d: &LinearConnection, pk: &CanonicalPack, point: &[f64], tol: Tolerance) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    Ok((fiber_at(d, pk, Regularity::J1, point, tol)?, fiber_at(d, pk, Regularity::J2, point, tol)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityCertificate {
    pub kind: Regularity,
    pub parallel_residual: f64,
    pub determinants: Vec<f64>,
    pub condition_numbers: Vec<f64>,
    pub verdict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

pub fn is_regular(d: &LinearConnection, pk: &CanonicalPack, kind: Regularity, points: &[Vec<f64>], tol: Tolerance) -> RegularityCertificate {
    let j = if kind == Regularity::J1 { &pk.j1 } else { &pk.j2 };
    let mut cert = RegularityCertificate {
        kind,
        parallel_residual: f64::INFINITY,
        determinants: Vec::new(),
        condition_numbers: Vec::new(),
        verdict: false,
        reason: None,
    };
    let par = match parallel_check(d, j, points) {
        Ok(r) => r,
        Err(e) => {
            cert.reason = Some(e.to_string());
            return cert;
        }
    };
    cert.parallel_residual = par.value;
    if !tol.accepts(par.value, par.scale) {
        cert.reason = Some(format!("D{} ≠ 0", kind.name()));
        return cert;
    }
    for p in points {
        match fiber_at(d, pk, kind, p, tol) {
            Ok(f) => {
                let sv = f.clone().svd(false, false).singular_values;
                let (hi, lo) = (sv.max(), sv.min());
                cert.determinants.push(f.determinant());
                cert.condition_numbers.push(if lo > 0.0 { hi / lo } else { f64::INFINITY });
            }
            Err(e) => {
                cert.reason = Some(e.to_string());
                return cert;
            }
        }
    }
    let singular = cert.determinants.iter().any(|det| !(det.abs() > DET_THRESHOLD));
    cert.verdict = !singular && cert.condition_numbers.iter().all(|c| c.is_finite());
    if !cert.verdict {
        cert.reason = Some(format!("fiber map of {} is singular", kind.name()));
    }
    cert
}

/// `Γ₂ = I - 2φ⁻¹∘DC₁` (kind `J₁`) or `Γ₁ = I - 2ψ⁻¹∘DC₂` (kind `J₂`).
pub fn induced_connection(d: &LinearConnection, pk: &CanonicalPack, kind: Regularity, points: &[Vec<f64>], tol: Tolerance) -> Result<Connection> {
    let cert = is_regular(d, pk, kind, points, tol);
    if !cert.verdict {
        return Err(Error::NotRegular { kind: kind.name(), detail: cert.reason.unwrap_or_default() });
    }
    let m = dc(d, pk, kind)?;
    let idx = block_indices(pk.chart, kind);
    let f = fiber_map_exprs(d, pk, kind)?;
    let flat: Vec<Expr> = f.into_iter().flatten().collect();
    let dim = pk.chart.dim();
    let mut sol = vec![vec![Expr::zero(); dim]; dim];
    for c in 0..dim {
        let rhs: Vec<Expr> = idx.iter().map(|&r| m.get(r, c).clone()).collect();
        let x = Expr::solve_linear(flat.clone(), rhs);
        for (k, &r) in idx.iter().enumerate() {
            sol[r][c] = x[k].clone();
        }
    }
    let gamma = VectorOneForm::from_fn(pk.chart, |r, c| {
        let delta = if r == c { Expr::one() } else { Expr::zero() };
        delta - sol[r][c].scale(2.0)
    });
    let conn = Connection::new(gamma, kind.induced_type());
    if let Some(bad) = validate_connection(pk, &conn, points, tol, "induced").into_iter().find(|c| !c.passed) {
        return Err(Error::ValidationFailed(format!("induced connection fails {}", bad.id)));
    }
    Ok(conn)
}

/// Both sides of `[C₂, DC_k] = 0 ⟺ [C₂, Γ] = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneityCriterion {
    pub criterion: bool,
    pub homogeneous: bool,
    pub criterion_residual: Residual,
    pub homogeneity_residual: Residual,
}

impl HomogeneityCriterion {
    pub fn agrees(&self) -> bool {
        self.criterion == self.homogeneous
    }
}

pub fn homogeneity_criterion(d: &LinearConnection, pk: &CanonicalPack, kind: Regularity, points: &[Vec<f64>], tol: Tolerance) -> Result<HomogeneityCriterion> {
    let conn = induced_connection(d, pk, kind, points, tol)?;
    let m = dc(d, pk, kind)?;
    let cr = magnitude(&lie_derivative(&pk.c2, &m)?, points)?;
    let hr = magnitude(&lie_derivative(&pk.c2, &conn.gamma)?, points)?;
    Ok(HomogeneityCriterion {
        criterion: tol.accepts(cr.value, cr.scale),
        homogeneous: tol.accepts(hr.value, hr.scale),
        criterion_residual: cr,
        homogeneity_residual: hr,
    })
}

/// For a torsion-free `D` with `DJ₁ = 0`: `φ∘J₁ = 0`, so `D` is not `J₁`-regular.
pub fn prop3_obstruction(d: &LinearConnection, pk: &CanonicalPack, points: &[Vec<f64>], tol: Tolerance, prefix: &str) -> Result<Vec<Check>> {
    let tr = d.torsion_residual(points)?;
    if !tol.accepts(tr.value, tr.scale) {
        return Err(Error::PreconditionFailed { what: "D has no torsion".into(), residual: tr.value });
    }
    let pr = parallel_check(d, &pk.j1, points)?;
    if !tol.accepts(pr.value, pr.scale) {
        return Err(Error::PreconditionFailed { what: "DJ1 = 0".into(), residual: pr.value });
    }
    let np = points.len();
    let m = dc(d, pk, Regularity::J1)?;
    let cert = is_regular(d, pk, Regularity::J1, points, tol);
    Ok(vec![
        Check::residual(&format!("{prefix}.phi_j1_vanishes"), "Prop 3", np, magnitude(&m.compose(&pk.j1)?, points)?, tol),
        Check::flag(&format!("{prefix}.not_j1_regular"), "Prop 3", np, !cert.verdict, cert.reason.unwrap_or_default()),
    ])
}

/// Outcome of the strong-torsion relation for a `J₁`-regular `D` with `[C₂, DC₁] = 0`.
#[derive(Debug, Clone)]
pub struct Prop4 {
    pub gamma2: Connection,
    pub gamma2_bar: Connection,
    pub torsion: VectorOneForm,
    pub checks: Vec<Check>,
}

pub fn prop4_relation(d: &LinearConnection, pk: &CanonicalPack, points: &[Vec<f64>], tol: Tolerance, prefix: &str) -> Result<Prop4> {
    let cert = is_regular(d, pk, Regularity::J1, points, tol);
    if !cert.verdict {
        return Err(Error::PreconditionFailed { what: "D is J1-regular".into(), residual: cert.parallel_residual });
    }
    let m = dc(d, pk, Regularity::J1)?;
    let cr = magnitude(&lie_derivative(&pk.c2, &m)?, points)?;
    if !tol.accepts(cr.value, cr.scale) {
        return Err(Error::PreconditionFailed { what: "[C2, DC1] = 0".into(), residual: cr.value });
    }
    let np = points.len();
    let id = |s: &str| format!("{prefix}.{s}");
    let g2 = induced_connection(d, pk, Regularity::J1, points, tol)?;
    let s = associated_semispray(&g2, &reference_semispray(pk.chart, SprayType::Two))?;
    let i = VectorOneForm::identity(pk.chart);
    let j2s = bracket_form_field(&pk.j2, &s.field)?;
    let bar = Connection::new(VectorOneForm::combine(pk.chart, &[(2.0 / 3.0, &j2s), (1.0 / 3.0, &i)])?, SprayType::Two);
    let t = strong_torsion_type2(pk, &g2)?;
    let mut checks = vec![
        Check::residual(&id("gamma2_fixes_spray"), "Prop 4", np, compare(&g2.gamma.apply(&s.field)?, &s.field, points)?, tol),
        Check::residual(&id("gamma2_bar_fixes_spray"), "Prop 4", np, compare(&bar.gamma.apply(&s.field)?, &s.field, points)?, tol),
        Check::residual(&id("torsion_relation"), "Prop 4", np, compare(&t, &VectorOneForm::combine(pk.chart, &[(3.0, &g2.gamma), (-3.0, &bar.gamma)])?, points)?, tol),
    ];
    checks.extend(validate_connection(pk, &bar, points, tol, &id("gamma2_bar")));
    let tm = magnitude(&t, points)?;
    let coincide = compare(&g2.gamma, &bar.gamma, points)?;
    let no_torsion = tol.accepts(tm.value, tm.scale);
    checks.push(Check::flag(
        &id("coincide_iff_no_torsion"),
        "Prop 4",
        np,
        no_torsion == tol.accepts(coincide.value, coincide.scale),
        format!("|T| = {:.3e}", tm.value),
    ));
    if no_torsion {
        // DC₁ = ⅓ φ∘(I - [J₂,S])
        let f = fiber_map_exprs(d, pk, Regularity::J1)?;
        let idx = block_indices(pk.chart, Regularity::J1);
        let rest = VectorOneForm::combine(pk.chart, &[(1.0, &i), (-1.0, &j2s)])?;
        let rhs = VectorOneForm::from_fn(pk.chart, |r, c| match idx.iter().position(|&k| k == r) {
            Some(ri) => Expr::add(idx.iter().enumerate().map(|(k, &rr)| &f[ri][k] * rest.get(rr, c))).scale(1.0 / 3.0),
            None => Expr::zero(),
        });
        checks.push(Check::residual(&id("dc1_closed_form"), "Prop 4", np, compare(&m, &rhs, points)?, tol));
    }
    Ok(Prop4 { gamma2: g2, gamma2_bar: bar, torsion: t, checks })
}

/// `n = 1` family with `Γ^x_{xx} = Γ^z_{xz} = a y`, `Γ^x_{yx} = Γ^z_{yz} = b/y`,
/// `Γ^x_{zx} = Γ^z_{zz} = c/y`. `(0, 0, 1)` is the sample connection
/// `Γ(X, Y) = (X_z Y_x/y, 0, X_z Y_z/y)`; `b = -1` gives `[C₂, DC₁] = 0`.
pub fn family_n1(a: f64, b: f64, c: f64) -> LinearConnection {
    family_n1_ext(a, b, c, 0.0)
}

/// [`family_n1`] with `e z/y²` added to the `y` slot.
pub fn family_n1_ext(a: f64, b: f64, c: f64, e: f64) -> LinearConnection {
    let chart = Chart::new(1).unwrap();
    let y = Expr::y(0);
    let inv = y.recip();
    let slot_y = if e == 0.0 { &inv * b } else { &inv * b + Expr::z(0) * (&inv * &inv) * e };
    let slot = [&y * a, slot_y, &inv * c];
    LinearConnection::from_fn(chart, |i, j, k| {
        if (i, k) == (0, 0) || (i, k) == (2, 2) {
            slot[j].clone()
        } else {
            Expr::zero()
        }
    })
    .with_domain("y nonzero")
}

pub fn sample_n1() -> LinearConnection {
    family_n1(0.0, 0.0, 1.0)
}

/// Torsion-free `n = 1` connection with `DJ₁ = 0`: `Γ^z_{xx} = x`, `Γ^y_{xy} = Γ^y_{yx} = 1`.
pub fn torsion_free_n1() -> LinearConnection {
    let chart = Chart::new(1).unwrap();
    LinearConnection::from_fn(chart, |a, b, c| match (a, b, c) {
        (2, 0, 0) => Expr::x(0),
        (1, 0, 1) | (1, 1, 0) => Expr::one(),
        _ => Expr::zero(),
    })
}

/// Grid search of `family_n1` for `J₁`-regular members with `[C₂, DC₁] = 0`.
pub fn search_prop4(points: &[Vec<f64>], tol: Tolerance) -> Vec<((f64, f64, f64), f64)> {
    let pk = CanonicalPack::new(1).unwrap();
    let mut found = Vec::new();
    for ai in 0..=2 {
        for bi in 0..=12 {
            for ci in 1..=2 {
                let (a, b, c) = (ai as f64 * 0.5, -2.0 + bi as f64 * 0.25, ci as f64);
                let d = family_n1(a, b, c);
                if !is_regular(&d, &pk, Regularity::J1, points, tol).verdict {
                    continue;
                }
                let r = dc(&d, &pk, Regularity::J1)
                    .and_then(|m| lie_derivative(&pk.c2, &m))
                    .and_then(|l| magnitude(&l, points));
                if let Ok(r) = r {
                    if tol.accepts(r.value, r.scale) {
                        found.push(((a, b, c), r.value));
                    }
                }
            }
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{sample_points, SampleBox};

    fn pts() -> Vec<Vec<f64>> {
        sample_points(Chart::new(1).unwrap(), 10, 9, &SampleBox::default())
    }

    fn pk() -> CanonicalPack {
        CanonicalPack::new(1).unwrap()
    }

    fn field(v: [Expr; 3]) -> VectorField {
        VectorField::new(Chart::new(1).unwrap(), v.to_vec()).unwrap()
    }

    #[test]
    fn covariant_derivative_examples() {
        let pk = pk();
        let x = field([Expr::x(0) * 2.0, Expr::z(0), Expr::y(0) + 1.0]);
        let flat = LinearConnection::flat(pk.chart);
        let got = covariant_derivative(&flat, &x, &pk.c1).unwrap();
        assert_eq!(got.comps(), &[Expr::zero(), Expr::zero(), Expr::z(0)]);
        let zero = VectorField::zero(pk.chart);
        assert!(covariant_derivative(&sample_n1(), &x, &zero).unwrap().comps().iter().all(Expr::is_zero));
        let got = covariant_derivative(&sample_n1(), &x, &pk.c1).unwrap();
        let p = [0.3, 1.5, -0.7];
        let v = got.eval(&p).unwrap();
        assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15 && (v[2] - (-0.7 + 2.5)).abs() < 1e-12);
    }

    #[test]
    fn leibniz_rule() {
        let pk = pk();
        let d = sample_n1();
        let x = field([Expr::x(0), Expr::y(0) * Expr::z(0), Expr::one()]);
        let y = field([Expr::z(0), Expr::x(0) * Expr::x(0), Expr::y(0)]);
        let f = Expr::x(0) * Expr::z(0) + 2.0;
        let lhs = covariant_derivative(&d, &x, &y.scale_expr(&f)).unwrap();
        let rhs = y.scale_expr(&directional(pk.chart, x.comps(), &f)).add(&covariant_derivative(&d, &x, &y).unwrap().scale_expr(&f)).unwrap();
        assert!(compare(&lhs, &rhs, &pts()).unwrap().value < 1e-12);
    }

    #[test]
    fn parallelism() {
        let pk = pk();
        let p = pts();
        let flat = LinearConnection::flat(pk.chart);
        assert_eq!(parallel_check(&flat, &pk.j1, &p).unwrap().value, 0.0);
        assert!(parallel_check(&sample_n1(), &pk.j1, &p).unwrap().value < 1e-12);
        assert!(parallel_check(&sample_n1(), &pk.j2, &p).unwrap().value > 0.1);
    }

    #[test]
    fn fiber_maps_and_regularity() {
        let pk = pk();
        let p = pts();
        let flat = LinearConnection::flat(pk.chart);
        let (phi, psi) = fiber_maps(&flat, &pk, &p[0], Tolerance::POLY).unwrap();
        assert_eq!(phi, DMatrix::from_element(1, 1, 0.0));
        assert_eq!(psi, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        let (phi, _) = fiber_maps(&sample_n1(), &pk, &p[0], Tolerance::POLY).unwrap();
        assert!((phi[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(!is_regular(&flat, &pk, Regularity::J1, &p, Tolerance::POLY).verdict);
        assert!(is_regular(&flat, &pk, Regularity::J2, &p, Tolerance::POLY).verdict);
        assert!(is_regular(&sample_n1(), &pk, Regularity::J1, &p, Tolerance::RATIONAL).verdict);
    }

    #[test]
    fn induced_connections() {
        let pk = pk();
        let p = pts();
        let g2 = induced_connection(&sample_n1(), &pk, Regularity::J1, &p, Tolerance::RATIONAL).unwrap();
        let want = VectorOneForm::constant(pk.chart, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, -2.0, -1.0]]).unwrap();
        assert!(compare(&g2.gamma, &want, &p).unwrap().value < 1e-12);
        assert!(compare(&pk.j2.compose(&g2.gamma).unwrap(), &pk.j2, &p).unwrap().value < 1e-12);
        let flat = LinearConnection::flat(pk.chart);
        let g1 = induced_connection(&flat, &pk, Regularity::J2, &p, Tolerance::POLY).unwrap();
        let want = VectorOneForm::constant(pk.chart, &[&[1.0, 0.0, 0.0], &[0.0, -1.0, 0.0], &[0.0, 0.0, -1.0]]).unwrap();
        assert!(compare(&g1.gamma, &want, &p).unwrap().value < 1e-12);
        assert!(matches!(induced_connection(&flat, &pk, Regularity::J1, &p, Tolerance::POLY), Err(Error::NotRegular { .. })));
    }

    #[test]
    fn homogeneity_sides_agree() {
        let pk = pk();
        let p = pts();
        let h = homogeneity_criterion(&sample_n1(), &pk, Regularity::J1, &p, Tolerance::RATIONAL).unwrap();
        assert!(!h.criterion && !h.homogeneous);
        let m = dc(&sample_n1(), &pk, Regularity::J1).unwrap();
        let l = lie_derivative(&pk.c2, &m).unwrap();
        let want = VectorOneForm::constant(pk.chart, &[&[0.0; 3], &[0.0; 3], &[0.0, -1.0, 0.0]]).unwrap();
        assert!(compare(&l, &want, &p).unwrap().value < 1e-12);
        let flat = LinearConnection::flat(pk.chart);
        assert!(homogeneity_criterion(&flat, &pk, Regularity::J2, &p, Tolerance::POLY).unwrap().agrees());
        assert!(matches!(homogeneity_criterion(&flat, &pk, Regularity::J1, &p, Tolerance::POLY), Err(Error::NotRegular { .. })));
    }

    #[test]
    fn prop3() {
        let pk = pk();
        let p = pts();
        let flat = LinearConnection::flat(pk.chart);
        assert!(prop3_obstruction(&flat, &pk, &p, Tolerance::POLY, "p").unwrap().iter().all(|c| c.passed));
        let tf = torsion_free_n1();
        assert!(prop3_obstruction(&tf, &pk, &p, Tolerance::POLY, "p").unwrap().iter().all(|c| c.passed));
        assert!(matches!(prop3_obstruction(&sample_n1(), &pk, &p, Tolerance::RATIONAL, "p"), Err(Error::PreconditionFailed { .. })));
        let sym = sample_n1().symmetrized();
        match prop3_obstruction(&sym, &pk, &p, Tolerance::RATIONAL, "p") {
            Err(Error::PreconditionFailed { .. }) => {}
            Ok(c) => assert!(c.iter().all(|c| c.passed)),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn prop4() {
        let pk = pk();
        let p = pts();
        let found = search_prop4(&p, Tolerance::RATIONAL);
        assert!(!found.is_empty());
        assert!(found.iter().all(|((_, b, _), _)| *b == -1.0));
        for ((a, b, c), _) in found {
            let r = prop4_relation(&family_n1(a, b, c), &pk, &p, Tolerance::RATIONAL, "p4").unwrap();
            assert!(r.checks.iter().all(|c| c.passed), "{:#?}", r.checks);
            if a == 0.0 {
                assert!(r.checks.iter().any(|c| c.id == "p4.dc1_closed_form"));
            }
        }
        assert!(matches!(prop4_relation(&sample_n1(), &pk, &p, Tolerance::RATIONAL, "p4"), Err(Error::PreconditionFailed { .. })));
    }

    #[test]
    fn json_round_trip() {
        let d = family_n1(0.5, -1.0, 2.0);
        let back = LinearConnection::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
        let mut bad = d.to_json().unwrap();
        bad["coefficients"][0].as_array_mut().unwrap().pop();
        assert!(matches!(LinearConnection::from_json(&bad), Err(Error::Schema { .. })));
    }
}
