//! Fields and forms with expression coefficients.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::{Evaluator, Expr};
use crate::report::Residual;

/// Highest scalar form degree handled.
pub const MAX_FORM_DEGREE: usize = 3;

/// Anything with a flat list of coefficient expressions.
pub trait Tensor {
    fn chart(&self) -> Chart;
    fn components(&self) -> Vec<&Expr>;

    /// Components in a layout shared by all tensors of the same kind and chart.
    fn dense(&self) -> Vec<Expr> {
        self.components().into_iter().cloned().collect()
    }

    /// Largest absolute coefficient over the given points.
    fn max_abs(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut m = 0.0_f64;
        for p in points {
            self.chart().ensure_point(p)?;
            let mut ev = Evaluator::new(p);
            for c in self.components() {
                m = m.max(ev.eval(c)?.abs());
            }
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    chart: Chart,
    comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: Chart, comps: Vec<Expr>) -> Result<Self> {
        if comps.len() != chart.dim() {
            return Err(Error::ChartMismatch { left: chart.dim(), right: comps.len() });
        }
        Ok(VectorField { chart, comps })
    }

    pub fn zero(chart: Chart) -> Self {
        VectorField { chart, comps: vec![Expr::zero(); chart.dim()] }
    }

    pub fn from_fn(chart: Chart, f: impl FnMut(usize) -> Expr) -> Self {
        VectorField { chart, comps: (0..chart.dim()).map(f).collect() }
    }

    /// Coordinate field `∂/∂w_k`.
    pub fn basis(chart: Chart, k: usize) -> Self {
        Self::from_fn(chart, |i| if i == k { Expr::one() } else { Expr::zero() })
    }

    pub fn constant(chart: Chart, v: &[f64]) -> Result<Self> {
        Self::new(chart, v.iter().map(|c| Expr::constant(*c)).collect())
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn comp(&self, k: usize) -> &Expr {
        &self.comps[k]
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.chart.ensure_point(point)?;
        let mut ev = Evaluator::new(point);
        self.eval_with(&mut ev)
    }

    pub fn eval_with(&self, ev: &mut Evaluator) -> Result<Vec<f64>> {
        self.comps.iter().map(|c| ev.eval(c)).collect()
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        self.chart.ensure_same(&other.chart)?;
        Ok(Self::from_fn(self.chart, |k| &self.comps[k] + &other.comps[k]))
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.chart.ensure_same(&other.chart)?;
        Ok(Self::from_fn(self.chart, |k| &self.comps[k] - &other.comps[k]))
    }

    pub fn scale(&self, c: f64) -> VectorField {
        Self::from_fn(self.chart, |k| self.comps[k].scale(c))
    }

    pub fn scale_expr(&self, f: &Expr) -> VectorField {
        Self::from_fn(self.chart, |k| f * &self.comps[k])
    }
}

impl Tensor for VectorField {
    fn chart(&self) -> Chart {
        self.chart
    }
    fn components(&self) -> Vec<&Expr> {
        self.comps.iter().collect()
    }
}

/// Vector 1-form: a field of endomorphisms, stored row-major, `(KX)^a = K[a][b] X^b`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorOneForm {
    chart: Chart,
    entries: Vec<Expr>,
}

impl VectorOneForm {
    pub fn new(chart: Chart, entries: Vec<Expr>) -> Result<Self> {
        let d = chart.dim();
        if entries.len() != d * d {
            return Err(Error::ChartMismatch { left: d * d, right: entries.len() });
        }
        Ok(VectorOneForm { chart, entries })
    }

    pub fn from_fn(chart: Chart, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let d = chart.dim();
        let mut entries = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                entries.push(f(r, c));
            }
        }
        VectorOneForm { chart, entries }
    }

    pub fn identity(chart: Chart) -> Self {
        Self::from_fn(chart, |r, c| if r == c { Expr::one() } else { Expr::zero() })
    }

    pub fn zero(chart: Chart) -> Self {
        Self::from_fn(chart, |_, _| Expr::zero())
    }

    /// Constant matrix, row-major.
    pub fn constant(chart: Chart, rows: &[&[f64]]) -> Result<Self> {
        let d = chart.dim();
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(Error::ChartMismatch { left: d, right: rows.len() });
        }
        Ok(Self::from_fn(chart, |r, c| Expr::constant(rows[r][c])))
    }

    pub fn get(&self, r: usize, c: usize) -> &Expr {
        &self.entries[r * self.chart.dim() + c]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// `K X`.
    pub fn apply(&self, x: &VectorField) -> Result<VectorField> {
        self.chart.ensure_same(&x.chart)?;
        Ok(VectorField { chart: self.chart, comps: self.apply_vec(x.comps()) })
    }

    pub fn apply_vec(&self, x: &[Expr]) -> Vec<Expr> {
        let d = self.dim();
        (0..d)
            .map(|r| Expr::add((0..d).map(|c| self.get(r, c) * &x[c])))
            .collect()
    }

    /// Column `c`, i.e. `K ∂_c`.
    pub fn column(&self, c: usize) -> Vec<Expr> {
        (0..self.dim()).map(|r| self.get(r, c).clone()).collect()
    }

    /// Composite `self ∘ other`.
    pub fn compose(&self, other: &VectorOneForm) -> Result<VectorOneForm> {
        self.chart.ensure_same(&other.chart)?;
        let d = self.dim();
        Ok(Self::from_fn(self.chart, |r, c| {
            Expr::add((0..d).map(|k| self.get(r, k) * other.get(k, c)))
        }))
    }

    pub fn add(&self, other: &VectorOneForm) -> Result<VectorOneForm> {
        self.chart.ensure_same(&other.chart)?;
        Ok(Self::from_fn(self.chart, |r, c| self.get(r, c) + other.get(r, c)))
    }

    pub fn sub(&self, other: &VectorOneForm) -> Result<VectorOneForm> {
        self.chart.ensure_same(&other.chart)?;
        Ok(Self::from_fn(self.chart, |r, c| self.get(r, c) - other.get(r, c)))
    }

    pub fn scale(&self, k: f64) -> VectorOneForm {
        Self::from_fn(self.chart, |r, c| self.get(r, c).scale(k))
    }

    /// Linear combination `Σ c_i K_i`.
    pub fn combine(chart: Chart, terms: &[(f64, &VectorOneForm)]) -> Result<VectorOneForm> {
        for (_, k) in terms {
            chart.ensure_same(&k.chart)?;
        }
        Ok(Self::from_fn(chart, |r, c| {
            Expr::add(terms.iter().map(|(w, k)| k.get(r, c).scale(*w)))
        }))
    }

    pub fn eval(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        self.chart.ensure_point(point)?;
        let mut ev = Evaluator::new(point);
        self.eval_with(&mut ev)
    }

    pub fn eval_with(&self, ev: &mut Evaluator) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                m[(r, c)] = ev.eval(self.get(r, c))?;
            }
        }
        Ok(m)
    }
}

impl Tensor for VectorOneForm {
    fn chart(&self) -> Chart {
        self.chart
    }
    fn components(&self) -> Vec<&Expr> {
        self.entries.iter().collect()
    }
}

fn pair_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    i * d - i * (i + 1) / 2 + (j - i - 1)
}

/// Alternating vector 2-form; stores `t(∂_i, ∂_j)` for `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorTwoForm {
    chart: Chart,
    pairs: Vec<Vec<Expr>>,
}

impl VectorTwoForm {
    pub fn zero(chart: Chart) -> Self {
        Self::from_fn(chart, |_, _| vec![Expr::zero(); chart.dim()])
    }

    /// Builds from values on basis pairs `i < j`.
    pub fn from_fn(chart: Chart, mut f: impl FnMut(usize, usize) -> Vec<Expr>) -> Self {
        let d = chart.dim();
        let mut pairs = Vec::with_capacity(d * (d.saturating_sub(1)) / 2);
        for i in 0..d {
            for j in i + 1..d {
                let v = f(i, j);
                assert_eq!(v.len(), d);
                pairs.push(v);
            }
        }
        VectorTwoForm { chart, pairs }
    }

    /// `t(∂_i, ∂_j)`, alternating in `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> Vec<Expr> {
        let d = self.chart.dim();
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => vec![Expr::zero(); d],
            std::cmp::Ordering::Less => self.pairs[pair_index(d, i, j)].clone(),
            std::cmp::Ordering::Greater => self.pairs[pair_index(d, j, i)].iter().map(|e| -e).collect(),
        }
    }

    /// Symbolic `t(X, Y)`.
    pub fn apply_vec(&self, x: &[Expr], y: &[Expr]) -> Vec<Expr> {
        let d = self.chart.dim();
        let mut out: Vec<Vec<Expr>> = vec![Vec::new(); d];
        for i in 0..d {
            for j in i + 1..d {
                let w = &x[i] * &y[j] - &x[j] * &y[i];
                if w.is_zero() {
                    continue;
                }
                for (a, t) in self.pairs[pair_index(d, i, j)].iter().enumerate() {
                    if !t.is_zero() {
                        out[a].push(&w * t);
                    }
                }
            }
        }
        out.into_iter().map(Expr::add).collect()
    }

    pub fn eval_on(&self, point: &[f64], x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.chart.ensure_point(point)?;
        self.chart.ensure_point(x)?;
        self.chart.ensure_point(y)?;
        let d = self.chart.dim();
        let mut ev = Evaluator::new(point);
        let mut out = vec![0.0; d];
        for i in 0..d {
            for j in i + 1..d {
                let w = x[i] * y[j] - x[j] * y[i];
                if w == 0.0 {
                    continue;
                }
                for (a, t) in self.pairs[pair_index(d, i, j)].iter().enumerate() {
                    out[a] += w * ev.eval(t)?;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &VectorTwoForm) -> Result<VectorTwoForm> {
        self.chart.ensure_same(&other.chart)?;
        Ok(VectorTwoForm {
            chart: self.chart,
            pairs: self
                .pairs
                .iter()
                .zip(&other.pairs)
                .map(|(a, b)| a.iter().zip(b).map(|(s, t)| s - t).collect())
                .collect(),
        })
    }
}

impl Tensor for VectorTwoForm {
    fn chart(&self) -> Chart {
        self.chart
    }
    fn components(&self) -> Vec<&Expr> {
        self.pairs.iter().flatten().collect()
    }
}

/// Vector forms of degree 0, 1 or 2.
#[derive(Clone, Debug, PartialEq)]
pub enum VectorForm {
    Field(VectorField),
    One(VectorOneForm),
    Two(VectorTwoForm),
}

impl VectorForm {
    pub fn degree(&self) -> usize {
        match self {
            VectorForm::Field(_) => 0,
            VectorForm::One(_) => 1,
            VectorForm::Two(_) => 2,
        }
    }

    pub fn chart(&self) -> Chart {
        match self {
            VectorForm::Field(v) => v.chart(),
            VectorForm::One(k) => k.chart(),
            VectorForm::Two(t) => t.chart(),
        }
    }

    /// Value at `point` on `args` (as many as the degree).
    pub fn evaluate(&self, point: &[f64], args: &[&[f64]]) -> Result<Vec<f64>> {
        if args.len() != self.degree() {
            return Err(Error::Degree(format!(
                "vector {}-form takes {} arguments, got {}",
                self.degree(),
                self.degree(),
                args.len()
            )));
        }
        match self {
            VectorForm::Field(v) => v.eval(point),
            VectorForm::One(k) => {
                self.chart().ensure_point(args[0])?;
                let m = k.eval(point)?;
                Ok((m * nalgebra::DVector::from_column_slice(args[0])).iter().copied().collect())
            }
            VectorForm::Two(t) => t.eval_on(point, args[0], args[1]),
        }
    }

    pub fn as_one(&self) -> Result<&VectorOneForm> {
        match self {
            VectorForm::One(k) => Ok(k),
            other => Err(Error::Degree(format!("expected a vector 1-form, got degree {}", other.degree()))),
        }
    }

    pub fn as_two(&self) -> Result<&VectorTwoForm> {
        match self {
            VectorForm::Two(t) => Ok(t),
            other => Err(Error::Degree(format!("expected a vector 2-form, got degree {}", other.degree()))),
        }
    }
}

impl From<VectorField> for VectorForm {
    fn from(v: VectorField) -> Self {
        VectorForm::Field(v)
    }
}

impl From<VectorOneForm> for VectorForm {
    fn from(k: VectorOneForm) -> Self {
        VectorForm::One(k)
    }
}

impl From<VectorTwoForm> for VectorForm {
    fn from(t: VectorTwoForm) -> Self {
        VectorForm::Two(t)
    }
}

/// Sorts `idx` in place; returns the permutation sign, or `None` on a repeated index.
pub(crate) fn sort_with_sign(idx: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 0..idx.len() {
        for j in 0..idx.len() - 1 - i {
            if idx[j] > idx[j + 1] {
                idx.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

fn permutations(p: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                cur.push(k);
                rec(cur, used, out);
                cur.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; p], &mut out);
    out.into_iter()
        .map(|perm| {
            let mut s = perm.clone();
            let sign = sort_with_sign(&mut s).unwrap();
            (perm, sign)
        })
        .collect()
}

/// All strictly increasing multi-indices of length `p` below `d`.
pub fn multi_indices(d: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for k in start..d {
            cur.push(k);
            rec(k + 1, d, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, p, &mut Vec::new(), &mut out);
    out
}

/// Scalar p-form `Σ_I ω_I dw^{I_1} ∧ … ∧ dw^{I_p}` over increasing multi-indices.
/// Evaluation follows the determinant convention, `(dx∧dy)(∂x, ∂y) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarForm {
    chart: Chart,
    degree: usize,
    coeffs: BTreeMap<Vec<usize>, Expr>,
}

impl ScalarForm {
    pub fn zero(chart: Chart, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        Ok(ScalarForm { chart, degree, coeffs: BTreeMap::new() })
    }

    pub fn function(chart: Chart, f: Expr) -> Self {
        let mut coeffs = BTreeMap::new();
        if !f.is_zero() {
            coeffs.insert(Vec::new(), f);
        }
        ScalarForm { chart, degree: 0, coeffs }
    }

    /// Builds from `(indices, coefficient)` terms; indices in any order,
    /// repeated terms are summed.
    pub fn from_terms(
        chart: Chart,
        degree: usize,
        terms: impl IntoIterator<Item = (Vec<usize>, Expr)>,
    ) -> Result<Self> {
        check_degree(degree)?;
        let mut acc: BTreeMap<Vec<usize>, Vec<Expr>> = BTreeMap::new();
        for (mut idx, c) in terms {
            if idx.len() != degree {
                return Err(Error::Degree(format!(
                    "term of length {} in a {degree}-form",
                    idx.len()
                )));
            }
            if idx.iter().any(|&k| k >= chart.dim()) {
                return Err(Error::ChartMismatch { left: chart.dim(), right: idx.iter().max().unwrap() + 1 });
            }
            if let Some(sign) = sort_with_sign(&mut idx) {
                acc.entry(idx).or_default().push(c.scale(sign));
            }
        }
        let coeffs = acc
            .into_iter()
            .map(|(k, v)| (k, Expr::add(v)))
            .filter(|(_, v)| !v.is_zero())
            .collect();
        Ok(ScalarForm { chart, degree, coeffs })
    }

    /// Builds a p-form from its values on increasing basis multi-indices.
    pub fn from_alternating(chart: Chart, degree: usize, mut f: impl FnMut(&[usize]) -> Expr) -> Result<Self> {
        check_degree(degree)?;
        let coeffs = multi_indices(chart.dim(), degree)
            .into_iter()
            .filter_map(|idx| {
                let v = f(&idx);
                (!v.is_zero()).then_some((idx, v))
            })
            .collect();
        Ok(ScalarForm { chart, degree, coeffs })
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Expr)> {
        self.coeffs.iter()
    }

    pub fn is_structurally_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient on an arbitrary index list (alternating).
    pub fn coeff(&self, idx: &[usize]) -> Expr {
        let mut k = idx.to_vec();
        match sort_with_sign(&mut k) {
            None => Expr::zero(),
            Some(sign) => self.coeffs.get(&k).map(|c| c.scale(sign)).unwrap_or_else(Expr::zero),
        }
    }

    /// The function of a 0-form.
    pub fn as_function(&self) -> Result<Expr> {
        if self.degree != 0 {
            return Err(Error::Degree(format!("expected a 0-form, got degree {}", self.degree)));
        }
        Ok(self.coeff(&[]))
    }

    /// Symbolic `ω(X_1, …, X_p)`.
    pub fn apply(&self, args: &[&[Expr]]) -> Result<Expr> {
        if args.len() != self.degree {
            return Err(Error::Degree(format!(
                "{}-form applied to {} arguments",
                self.degree,
                args.len()
            )));
        }
        let perms = permutations(self.degree);
        let mut terms = Vec::new();
        for (idx, c) in &self.coeffs {
            let mut det = Vec::new();
            for (perm, sign) in &perms {
                let factors: Vec<Expr> = perm.iter().enumerate().map(|(k, &j)| args[k][idx[j]].clone()).collect();
                if factors.iter().any(Expr::is_zero) {
                    continue;
                }
                det.push(Expr::mul(factors).scale(*sign));
            }
            if !det.is_empty() {
                terms.push(c * &Expr::add(det));
            }
        }
        Ok(Expr::add(terms))
    }

    pub fn eval_on(&self, point: &[f64], args: &[&[f64]]) -> Result<f64> {
        self.chart.ensure_point(point)?;
        if args.len() != self.degree {
            return Err(Error::Degree(format!(
                "{}-form applied to {} arguments",
                self.degree,
                args.len()
            )));
        }
        for a in args {
            self.chart.ensure_point(a)?;
        }
        let perms = permutations(self.degree);
        let mut ev = Evaluator::new(point);
        let mut s = 0.0;
        for (idx, c) in &self.coeffs {
            let mut det = 0.0;
            for (perm, sign) in &perms {
                det += sign * perm.iter().enumerate().map(|(k, &j)| args[k][idx[j]]).product::<f64>();
            }
            if det != 0.0 {
                s += det * ev.eval(c)?;
            }
        }
        Ok(s)
    }

    /// Skew matrix `M[a][b] = ω(∂_a, ∂_b)` of a 2-form.
    pub fn skew_matrix(&self) -> Result<Vec<Expr>> {
        if self.degree != 2 {
            return Err(Error::Degree(format!("skew matrix needs a 2-form, got degree {}", self.degree)));
        }
        let d = self.chart.dim();
        let mut m = vec![Expr::zero(); d * d];
        for (idx, c) in &self.coeffs {
            m[idx[0] * d + idx[1]] = c.clone();
            m[idx[1] * d + idx[0]] = -c;
        }
        Ok(m)
    }

    pub fn eval_skew_matrix(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.chart.dim();
        let m = self.skew_matrix()?;
        let mut ev = Evaluator::new(point);
        let mut out = DMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                out[(r, c)] = ev.eval(&m[r * d + c])?;
            }
        }
        Ok(out)
    }

    fn zip(&self, other: &ScalarForm, f: impl Fn(&Expr, &Expr) -> Expr) -> Result<ScalarForm> {
        self.chart.ensure_same(&other.chart)?;
        if self.degree != other.degree {
            return Err(Error::Degree(format!(
                "cannot combine a {}-form with a {}-form",
                self.degree, other.degree
            )));
        }
        let keys: std::collections::BTreeSet<&Vec<usize>> = self.coeffs.keys().chain(other.coeffs.keys()).collect();
        let zero = Expr::zero();
        let coeffs = keys
            .into_iter()
            .map(|k| {
                let a = self.coeffs.get(k).unwrap_or(&zero);
                let b = other.coeffs.get(k).unwrap_or(&zero);
                (k.clone(), f(a, b))
            })
            .filter(|(_, v)| !v.is_zero())
            .collect();
        Ok(ScalarForm { chart: self.chart, degree: self.degree, coeffs })
    }

    pub fn add(&self, other: &ScalarForm) -> Result<ScalarForm> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarForm) -> Result<ScalarForm> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> ScalarForm {
        self.map(|c| c.scale(k))
    }

    /// `f ω`.
    pub fn mul_fn(&self, f: &Expr) -> ScalarForm {
        self.map(|c| f * c)
    }

    fn map(&self, f: impl Fn(&Expr) -> Expr) -> ScalarForm {
        ScalarForm {
            chart: self.chart,
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, v)| (k.clone(), f(v)))
                .filter(|(_, v)| !v.is_zero())
                .collect(),
        }
    }
}

impl Tensor for ScalarForm {
    fn chart(&self) -> Chart {
        self.chart
    }
    fn components(&self) -> Vec<&Expr> {
        self.coeffs.values().collect()
    }
    fn dense(&self) -> Vec<Expr> {
        multi_indices(self.chart.dim(), self.degree).iter().map(|i| self.coeff(i)).collect()
    }
}

/// Largest componentwise difference `|a - b|` over `points`, with the
/// largest magnitude seen as scale.
pub fn compare<T: Tensor>(a: &T, b: &T, points: &[Vec<f64>]) -> Result<Residual> {
    a.chart().ensure_same(&b.chart())?;
    let (da, db) = (a.dense(), b.dense());
    if da.len() != db.len() {
        return Err(Error::Degree(format!("cannot compare {} with {} components", da.len(), db.len())));
    }
    let mut r = Residual::exact(0.0);
    for p in points {
        a.chart().ensure_point(p)?;
        let mut ev = Evaluator::new(p);
        for (x, y) in da.iter().zip(&db) {
            let (u, v) = (ev.eval(x)?, ev.eval(y)?);
            r = r.max(Residual::new((u - v).abs(), u.abs().max(v.abs())));
        }
    }
    Ok(r)
}

/// `max |a|` over `points` as a residual against zero.
pub fn magnitude<T: Tensor>(a: &T, points: &[Vec<f64>]) -> Result<Residual> {
    let m = a.max_abs(points)?;
    Ok(Residual::exact(m))
}

fn check_degree(p: usize) -> Result<()> {
    if p > MAX_FORM_DEGREE {
        return Err(Error::Degree(format!("scalar forms of degree {p} > {MAX_FORM_DEGREE} are not supported")));
    }
    Ok(())
}

/// Constant unit vector `∂_k` as expressions.
pub fn unit(d: usize, k: usize) -> Vec<Expr> {
    (0..d).map(|i| if i == k { Expr::one() } else { Expr::zero() }).collect()
}
