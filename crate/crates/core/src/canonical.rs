//! Canonical tensors and fields, homogeneity, semi-basic forms and semi-sprays.

use serde::{Deserialize, Serialize};

use crate::calculus::{
    bracket_form_field, d_field, interior_field, lie_bracket, lie_derivative, lie_derivative_two, nijenhuis,
};
use crate::chart::{sample_points, Block, Chart, SampleBox};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::gen::PolyGen;
use crate::linalg;
use crate::report::{Check, Residual, Tolerance, Verdict};
use crate::tensor::{compare, magnitude, unit, ScalarForm, Tensor, VectorField, VectorForm, VectorOneForm};

/// `J₁`, `J₂`, `C₁`, `C₂` on a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPack {
    pub n: usize,
    pub chart: Chart,
    pub j1: VectorOneForm,
    pub j2: VectorOneForm,
    pub c1: VectorField,
    pub c2: VectorField,
}

impl CanonicalPack {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self::for_chart(Chart::new(n)?))
    }

    /// Per index: `J₁(p,q,r) = (0,0,p)`, `J₂(p,q,r) = (0,p,2q)`,
    /// `C₁ = (0,0,y)`, `C₂ = (0,y,2z)`.
    pub fn for_chart(chart: Chart) -> Self {
        let n = chart.n;
        let j1 = VectorOneForm::from_fn(chart, |r, c| {
            if r >= 2 * n && c == r - 2 * n {
                Expr::one()
            } else {
                Expr::zero()
            }
        });
        let j2 = VectorOneForm::from_fn(chart, |r, c| {
            if r >= n && c + n == r {
                Expr::constant(if r >= 2 * n { 2.0 } else { 1.0 })
            } else {
                Expr::zero()
            }
        });
        let c1 = VectorField::from_fn(chart, |k| if k >= 2 * n { Expr::y(k - 2 * n) } else { Expr::zero() });
        let c2 = VectorField::from_fn(chart, |k| match chart.coord(k).block {
            Block::X => Expr::zero(),
            Block::Y => Expr::y(k - n),
            Block::Z => Expr::z(k - 2 * n) * 2.0,
        });
        CanonicalPack { n, chart, j1, j2, c1, c2 }
    }
}

/// An object whose homogeneity or semi-basic character can be tested.
#[derive(Debug, Clone, Copy)]
pub enum Graded<'a> {
    Scalar(&'a ScalarForm),
    Vector(&'a VectorForm),
}

impl<'a> From<&'a ScalarForm> for Graded<'a> {
    fn from(w: &'a ScalarForm) -> Self {
        Graded::Scalar(w)
    }
}

impl<'a> From<&'a VectorForm> for Graded<'a> {
    fn from(v: &'a VectorForm) -> Self {
        Graded::Vector(v)
    }
}

/// Residual of `d_{C₂}ω = rω` (scalar forms) or `[C₂, L] = (r-1)L` (vector forms).
pub fn homogeneity_residual(pk: &CanonicalPack, obj: Graded, r: f64, points: &[Vec<f64>]) -> Result<Residual> {
    match obj {
        Graded::Scalar(w) => compare(&d_field(&pk.c2, w)?, &w.scale(r), points),
        Graded::Vector(VectorForm::Field(x)) => compare(&lie_bracket(&pk.c2, x)?, &x.scale(r - 1.0), points),
        Graded::Vector(VectorForm::One(k)) => compare(&lie_derivative(&pk.c2, k)?, &k.scale(r - 1.0), points),
        Graded::Vector(VectorForm::Two(t)) => {
            let lt = lie_derivative_two(&pk.c2, t)?;
            let scaled = crate::tensor::VectorTwoForm::from_fn(t.chart(), |i, j| {
                t.get(i, j).iter().map(|e| e.scale(r - 1.0)).collect()
            });
            compare(&lt, &scaled, points)
        }
    }
}

pub fn is_homogeneous(pk: &CanonicalPack, obj: Graded, r: f64, points: &[Vec<f64>], tol: Tolerance) -> Result<Verdict> {
    Ok(Verdict::judge(homogeneity_residual(pk, obj, r, points)?, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    Pi1,
    Pi2,
}

/// Residual of the semi-basic conditions: `i_{JX}ω = 0` for scalar forms;
/// `J'L = 0` and `i_{JX}L = 0` for vector forms, where `(J, J') = (J₁, J₂)`
/// for `π₁` and `(J₂, J₁)` for `π₂`.
pub fn semibasic_residual(pk: &CanonicalPack, obj: Graded, which: Projection, points: &[Vec<f64>]) -> Result<Residual> {
    let (ins, out) = match which {
        Projection::Pi1 => (&pk.j1, &pk.j2),
        Projection::Pi2 => (&pk.j2, &pk.j1),
    };
    let d = pk.chart.dim();
    let mut r = Residual::exact(0.0);
    match obj {
        Graded::Scalar(w) => {
            if w.degree() == 0 {
                return Ok(r);
            }
            for c in 0..d {
                let jx = VectorField::new(pk.chart, ins.column(c))?;
                r = r.max(magnitude(&interior_field(&jx, w)?, points)?);
            }
        }
        Graded::Vector(VectorForm::Field(x)) => {
            r = magnitude(&out.apply(x)?, points)?;
        }
        Graded::Vector(VectorForm::One(k)) => {
            r = magnitude(&out.compose(k)?, points)?.max(magnitude(&k.compose(ins)?, points)?);
        }
        Graded::Vector(VectorForm::Two(t)) => {
            let jt = crate::tensor::VectorTwoForm::from_fn(pk.chart, |i, j| out.apply_vec(&t.get(i, j)));
            r = magnitude(&jt, points)?;
            for b in 0..d {
                for c in 0..d {
                    let v = t.apply_vec(&ins.column(b), &unit(d, c));
                    r = r.max(magnitude(&VectorField::new(pk.chart, v)?, points)?);
                }
            }
        }
    }
    Ok(r)
}

pub fn is_semibasic(pk: &CanonicalPack, obj: Graded, which: Projection, points: &[Vec<f64>], tol: Tolerance) -> Result<Verdict> {
    Ok(Verdict::judge(semibasic_residual(pk, obj, which, points)?, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SprayType {
    One,
    Two,
}

impl TryFrom<u8> for SprayType {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(SprayType::One),
            2 => Ok(SprayType::Two),
            _ => Err(format!("type must be 1 or 2, got {v}")),
        }
    }
}

impl From<SprayType> for u8 {
    fn from(t: SprayType) -> u8 {
        match t {
            SprayType::One => 1,
            SprayType::Two => 2,
        }
    }
}

impl SprayType {
    /// Blocks fixed by `J_k S = C_k`.
    pub fn forced_blocks(self) -> &'static [Block] {
        match self {
            SprayType::One => &[Block::X],
            SprayType::Two => &[Block::X, Block::Y],
        }
    }
}

/// Vector field `S` with `J₁S = C₁` (type 1) or `J₂S = C₂` (type 2).
#[derive(Debug, Clone, PartialEq)]
pub struct SemiSpray {
    pub field: VectorField,
    pub kind: SprayType,
}

fn forced_value(chart: Chart, kind: SprayType, k: usize) -> Option<Expr> {
    let c = chart.coord(k);
    match (kind, c.block) {
        (_, Block::X) => Some(Expr::y(c.i)),
        (SprayType::Two, Block::Y) => Some(Expr::z(c.i)),
        _ => None,
    }
}

impl SemiSpray {
    /// Builds a semi-spray from the free blocks only (`y, z` for type 1, `z` for type 2),
    /// flattened block by block.
    pub fn from_free(chart: Chart, kind: SprayType, free: Vec<Expr>) -> Result<Self> {
        let forced = kind.forced_blocks().len() * chart.n;
        if free.len() != chart.dim() - forced {
            return Err(Error::Constraint(format!(
                "a type-{} completion has {} components, got {}",
                u8::from(kind),
                chart.dim() - forced,
                free.len()
            )));
        }
        let mut it = free.into_iter();
        let field = VectorField::from_fn(chart, |k| forced_value(chart, kind, k).unwrap_or_else(|| it.next().unwrap()));
        Ok(SemiSpray { field, kind })
    }

    /// Completes a full component list; forced entries may be omitted, and
    /// when given must agree with the constraint.
    pub fn complete(chart: Chart, kind: SprayType, comps: Vec<Option<Expr>>) -> Result<Self> {
        chart.ensure_point(&vec![0.0; comps.len()])?;
        let probe = sample_points(chart, 4, 0, &SampleBox::default());
        let mut out = Vec::with_capacity(comps.len());
        for (k, c) in comps.into_iter().enumerate() {
            let forced = forced_value(chart, kind, k);
            match (forced, c) {
                (Some(f), None) => out.push(f),
                (Some(f), Some(g)) => {
                    if f != g {
                        for p in &probe {
                            let (a, b) = (f.eval(p)?, g.eval(p)?);
                            if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                                return Err(Error::Constraint(format!(
                                    "component {} must be {f} for a type-{} semi-spray, got {g}",
                                    chart.coord(k),
                                    u8::from(kind)
                                )));
                            }
                        }
                    }
                    out.push(g)
                }
                (None, Some(g)) => out.push(g),
                (None, None) => {
                    return Err(Error::Constraint(format!("missing free component {}", chart.coord(k))));
                }
            }
        }
        Ok(SemiSpray { field: VectorField::new(chart, out)?, kind })
    }

    /// Checks `J_k S = C_k` at sample points.
    pub fn checked(pk: &CanonicalPack, field: VectorField, kind: SprayType, points: &[Vec<f64>]) -> Result<Self> {
        let s = SemiSpray { field, kind };
        let r = s.constraint_residual(pk, points)?;
        if !Tolerance::RATIONAL.accepts(r.value, r.scale) {
            return Err(Error::Constraint(format!(
                "J{}S differs from C{} by {:.3e}",
                u8::from(kind),
                u8::from(kind),
                r.value
            )));
        }
        Ok(s)
    }

    pub fn constraint_residual(&self, pk: &CanonicalPack, points: &[Vec<f64>]) -> Result<Residual> {
        match self.kind {
            SprayType::One => compare(&pk.j1.apply(&self.field)?, &pk.c1, points),
            SprayType::Two => compare(&pk.j2.apply(&self.field)?, &pk.c2, points),
        }
    }
}

/// `[C₂, S] - S`.
pub fn spray_residual(pk: &CanonicalPack, s: &VectorField, points: &[Vec<f64>]) -> Result<Residual> {
    compare(&lie_bracket(&pk.c2, s)?, s, points)
}

pub fn is_spray(pk: &CanonicalPack, s: &SemiSpray, points: &[Vec<f64>], tol: Tolerance) -> Result<Verdict> {
    Ok(Verdict::judge(spray_residual(pk, &s.field, points)?, tol))
}

/// Random polynomial semi-spray; with `homogeneous` the free part is chosen so that `S` is a spray.
pub fn random_semispray(chart: Chart, kind: SprayType, homogeneous: bool, gen: &mut PolyGen) -> SemiSpray {
    let n = chart.n;
    let free: Vec<Expr> = chart
        .coords()
        .filter(|c| !kind.forced_blocks().contains(&c.block))
        .map(|c| {
            if homogeneous {
                // S^y is h(2) and S^z is h(3) for [C₂, S] = S
                let r = if c.block == Block::Y { 2 } else { 3 };
                gen.homogeneous(n, r, 2)
            } else {
                gen.poly(chart, 2, 3)
            }
        })
        .collect();
    SemiSpray::from_free(chart, kind, free).expect("sizes match")
}

const CANON: Tolerance = Tolerance::EXACT;

fn exact(id: &str, anchor: &str, points: &[Vec<f64>], r: Result<Residual>) -> Check {
    Check::from_result(id, anchor, points.len(), r.map(|r| Residual::exact(r.value)), CANON)
}

/// Identities of the canonical objects and of sampled semi-sprays.
/// `sprays` random semi-sprays of each type are drawn from `seed`.
pub fn verify_identity_suite(n: usize, points: &[Vec<f64>], sprays: usize, seed: u64, tol: Tolerance) -> Result<Vec<Check>> {
    let pk = CanonicalPack::new(n)?;
    let ch = pk.chart;
    let np = points.len();
    let mut checks = Vec::new();
    let (j1, j2, c1, c2) = (&pk.j1, &pk.j2, &pk.c1, &pk.c2);

    // ranks and kernels
    let mut rank_ok = true;
    let mut dist = 0.0_f64;
    for p in points {
        let (m1, m2) = (j1.eval(p)?, j2.eval(p)?);
        rank_ok &= linalg::rank(&m1, 1e-12) == n && linalg::rank(&m2, 1e-12) == 2 * n;
        dist = dist.max(linalg::subspace_distance(&linalg::null_space(&m1, 1e-12), &linalg::column_space(&m2, 1e-12)));
        dist = dist.max(linalg::subspace_distance(&linalg::null_space(&m2, 1e-12), &linalg::column_space(&m1, 1e-12)));
    }
    checks.push(Check::flag("eq1.rank", "Eq (1)", np, rank_ok, format!("rank J1 = {n}, rank J2 = {}", 2 * n)));
    checks.push(Check::residual("eq1.kernel_image", "Eq (1)", np, Residual::exact(dist), tol));
    checks.push(exact("eq1.j1_j2_vanishes", "Eq (1)", points, magnitude(&j1.compose(j2)?, points)));
    checks.push(exact("eq1.j2_j1_vanishes", "Eq (1)", points, magnitude(&j2.compose(j1)?, points)));

    let j1j1 = j1.compose(j1)?;
    checks.push(exact("eq2.j1_squared", "Eq (2)", points, magnitude(&j1j1, points)));
    checks.push(exact("eq2.j2_squared", "Eq (2)", points, compare(&j2.compose(j2)?, &j1.scale(2.0), points)));
    checks.push(exact("eq2.j1_j2", "Eq (2)", points, magnitude(&j1.compose(j2)?, points)));
    checks.push(exact("eq2.j2_j1", "Eq (2)", points, magnitude(&j2.compose(j1)?, points)));
    checks.push(exact("eq2.j1_cubed", "Eq (2)", points, magnitude(&j1j1.compose(j1)?, points)));

    checks.push(exact("eq3.j1_j1", "Eq (3)", points, magnitude(&nijenhuis(j1, j1)?, points)));
    checks.push(exact("eq3.j2_j2", "Eq (3)", points, magnitude(&nijenhuis(j2, j2)?, points)));
    checks.push(exact("eq3.j1_j2", "Eq (3)", points, magnitude(&nijenhuis(j1, j2)?, points)));

    checks.push(exact("eq4.j1_c1", "Eq (4)", points, magnitude(&j1.apply(c1)?, points)));
    checks.push(exact("eq4.j2_c1", "Eq (4)", points, magnitude(&j2.apply(c1)?, points)));
    checks.push(exact("eq4.j1_c2", "Eq (4)", points, magnitude(&j1.apply(c2)?, points)));
    checks.push(exact("eq4.j2_c2", "Eq (4)", points, compare(&j2.apply(c2)?, &c1.scale(2.0), points)));
    checks.push(exact("eq4.c1_c2", "Eq (4)", points, compare(&lie_bracket(c1, c2)?, c1, points)));

    checks.push(exact("eq5.c1_j1", "Eq (5)", points, magnitude(&lie_derivative(c1, j1)?, points)));
    checks.push(exact("eq5.c1_j2", "Eq (5)", points, compare(&lie_derivative(c1, j2)?, &j1.scale(-1.0), points)));
    checks.push(exact("eq5.c2_j1", "Eq (5)", points, compare(&lie_derivative(c2, j1)?, &j1.scale(-2.0), points)));
    checks.push(exact("eq5.c2_j2", "Eq (5)", points, compare(&lie_derivative(c2, j2)?, &j2.scale(-1.0), points)));

    let mut gen = PolyGen::new(seed);
    let mut r6 = [Residual::exact(0.0); 2];
    let mut r7 = [Residual::exact(0.0); 4];
    let mut r8 = [Residual::exact(0.0); 2];
    let mut failure: Option<Error> = None;
    for k in 0..sprays {
        for kind in [SprayType::One, SprayType::Two] {
            let s = random_semispray(ch, kind, k % 2 == 1, &mut gen);
            let res = (|| -> Result<()> {
                let j1s = bracket_form_field(j1, &s.field)?;
                let j2s = bracket_form_field(j2, &s.field)?;
                match kind {
                    SprayType::One => {
                        r6[0] = r6[0].max(magnitude(&j1.compose(&j1s)?, points)?);
                        r6[1] = r6[1].max(compare(&j1.compose(&j2s)?, j1, points)?);
                    }
                    SprayType::Two => {
                        r7[0] = r7[0].max(magnitude(&j1.compose(&j1s)?, points)?);
                        r7[1] = r7[1].max(compare(&j1.compose(&j2s)?, j1, points)?);
                        r7[2] = r7[2].max(compare(&j2.compose(&j1s)?, &j1.scale(2.0), points)?);
                        r7[3] = r7[3].max(compare(&j2.compose(&j2s)?, j2, points)?);
                        r8[0] = r8[0].max(compare(&j2s.compose(j1)?, &j1.scale(-2.0), points)?);
                        let rhs = j1s.scale(2.0).sub(j2)?;
                        r8[1] = r8[1].max(compare(&j2s.compose(j2)?, &rhs, points)?);
                    }
                }
                Ok(())
            })();
            if let Err(e) = res {
                failure.get_or_insert(e);
            }
        }
    }
    let ids6 = ["eq6.j1_j1s", "eq6.j1_j2s"];
    let ids7 = ["eq7.j1_j1s", "eq7.j1_j2s", "eq7.j2_j1s", "eq7.j2_j2s"];
    let ids8 = ["eq8.j2s_j1", "eq8.j2s_j2"];
    let mut push = |ids: &[&str], rs: &[Residual], anchor: &str| {
        for (id, r) in ids.iter().zip(rs) {
            let c = match &failure {
                Some(e) => Check::flag(id, anchor, np, false, e.to_string()),
                None => Check::residual(id, anchor, np, *r, tol),
            };
            checks.push(c.with_note(format!("{sprays} random semi-sprays")));
        }
    };
    push(&ids6, &r6, "Eq (6)");
    push(&ids7, &r7, "Eq (7)");
    push(&ids8, &r8, "Eq (8)");
    Ok(checks)
}
