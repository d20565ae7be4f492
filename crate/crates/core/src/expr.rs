//! Scalar expressions on a chart with exact symbolic partial derivatives.
//!
//! Expressions are immutable shared DAGs. Derivatives are memoized per node
//! through weak references, so repeated differentiation of a shared
//! subexpression (as happens in nested brackets) reuses earlier results
//! without keeping them alive.
//!
//! Besides the smooth primitives there is one internal node kind,
//! [`Node::Solve`], standing for a component of the solution of a linear
//! system whose matrix and right-hand side are expressions. Its derivative is
//! again a `Solve` node (differentiate `M x = b`), so fields defined by
//! pointwise linear solves stay exactly differentiable to any order.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::fmt;
use std::ops;
use std::sync::{Arc, Mutex, Weak};

use nalgebra::{DMatrix, DVector};

use crate::chart::{Block, Coord};
use crate::error::{Error, Result};

#[derive(Clone)]
pub struct Expr(Arc<Inner>);

struct Inner {
    node: Node,
    /// Structural hash, used to order and merge terms.
    hash: u64,
    derivs: Mutex<Vec<(Coord, Weak<Inner>)>>,
}

/// Expression node. `Add` and `Mul` are n-ary; `Pow` has a constant real exponent.
#[derive(Clone)]
pub enum Node {
    Const(f64),
    Coord(Coord),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, f64),
    Recip(Expr),
    Sqrt(Expr),
    Exp(Expr),
    /// Component `k` of the solution of `M x = b`.
    Solve(Arc<LinearSystem>, usize),
}

/// Square system `M x = b` with expression entries. `matrix` is row-major and
/// shared between a system and all of its derivative systems.
pub struct LinearSystem {
    dim: usize,
    hash: u64,
    matrix: Arc<[Expr]>,
    rhs: Vec<Expr>,
    derivs: Mutex<Vec<(Coord, Weak<LinearSystem>)>>,
}

impl LinearSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[Expr] {
        &self.matrix
    }

    pub fn rhs(&self) -> &[Expr] {
        &self.rhs
    }

    fn build(matrix: Arc<[Expr]>, rhs: Vec<Expr>) -> LinearSystem {
        let mut h = DefaultHasher::new();
        "solve".hash(&mut h);
        for e in matrix.iter().chain(rhs.iter()) {
            e.0.hash.hash(&mut h);
        }
        LinearSystem { dim: rhs.len(), hash: h.finish(), matrix, rhs, derivs: Mutex::new(Vec::new()) }
    }

    fn derivative(self: &Arc<Self>, v: Coord) -> Arc<LinearSystem> {
        {
            let cache = self.derivs.lock().unwrap();
            if let Some(sys) = cache.iter().find(|(c, _)| *c == v).and_then(|(_, w)| w.upgrade()) {
                return sys;
            }
        }
        // M x' = b' - M' x
        let d = self.dim;
        let rhs = (0..d)
            .map(|k| {
                let mut terms = vec![self.rhs[k].diff(v)];
                for j in 0..d {
                    let dm = self.matrix[k * d + j].diff(v);
                    if !dm.is_zero() {
                        terms.push(-(dm * Expr::raw(Node::Solve(self.clone(), j))));
                    }
                }
                Expr::add(terms)
            })
            .collect();
        let sys = Arc::new(LinearSystem::build(self.matrix.clone(), rhs));
        let mut cache = self.derivs.lock().unwrap();
        cache.retain(|(_, w)| w.strong_count() > 0);
        cache.push((v, Arc::downgrade(&sys)));
        sys
    }
}

impl Expr {
    /// Wraps a node without any simplification; used by the JSON loader so
    /// that trees round-trip unchanged.
    pub fn raw(node: Node) -> Expr {
        let hash = structural_hash(&node);
        Expr(Arc::new(Inner { node, hash, derivs: Mutex::new(Vec::new()) }))
    }

    fn hash_value(&self) -> u64 {
        self.0.hash
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn constant(c: f64) -> Expr {
        Expr::raw(Node::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn coord(c: Coord) -> Expr {
        Expr::raw(Node::Coord(c))
    }

    pub fn x(i: usize) -> Expr {
        Expr::coord(Coord::new(Block::X, i))
    }

    pub fn y(i: usize) -> Expr {
        Expr::coord(Coord::new(Block::Y, i))
    }

    pub fn z(i: usize) -> Expr {
        Expr::coord(Coord::new(Block::Z, i))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Sum with constant folding, flattening and collection of like terms.
    pub fn add(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut c = 0.0;
        let mut acc: Vec<(Expr, f64)> = Vec::new();
        let mut push = |t: &Expr, acc: &mut Vec<(Expr, f64)>| match t.node() {
            Node::Const(v) => c += v,
            _ => {
                let (k, rest) = t.split_coefficient();
                match acc.iter_mut().find(|(r, _)| r.hash_value() == rest.hash_value() && *r == rest) {
                    Some((_, w)) => *w += k,
                    None => acc.push((rest, k)),
                }
            }
        };
        for t in terms {
            match t.node() {
                Node::Add(inner) => inner.iter().for_each(|s| push(s, &mut acc)),
                _ => push(&t, &mut acc),
            }
        }
        let mut out: Vec<Expr> = acc
            .into_iter()
            .filter(|(_, w)| *w != 0.0)
            .map(|(r, w)| if w == 1.0 { r } else { Expr::mul([Expr::constant(w), r]) })
            .collect();
        out.sort_by_key(Expr::hash_value);
        if c != 0.0 {
            out.insert(0, Expr::constant(c));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::raw(Node::Add(out)),
        }
    }

    /// `(c, rest)` with `self = c * rest`.
    fn split_coefficient(&self) -> (f64, Expr) {
        if let Node::Mul(fs) = self.node() {
            if let Some(c) = fs[0].as_const() {
                let rest = if fs.len() == 2 { fs[1].clone() } else { Expr::raw(Node::Mul(fs[1..].to_vec())) };
                return (c, rest);
            }
        }
        (1.0, self.clone())
    }

    /// `(base, exponent)` view of a factor.
    fn split_power(&self) -> (Expr, f64) {
        match self.node() {
            Node::Pow(a, k) => (a.clone(), *k),
            Node::Recip(a) => (a.clone(), -1.0),
            _ => (self.clone(), 1.0),
        }
    }

    /// Product with constant folding, flattening and collection of powers.
    pub fn mul(factors: impl IntoIterator<Item = Expr>) -> Expr {
        let mut c = 1.0;
        let mut acc: Vec<(Expr, f64)> = Vec::new();
        let mut push = |f: &Expr, acc: &mut Vec<(Expr, f64)>| match f.node() {
            Node::Const(v) => c *= v,
            _ => {
                let (b, k) = f.split_power();
                match acc.iter_mut().find(|(r, _)| r.hash_value() == b.hash_value() && *r == b) {
                    Some((_, w)) => *w += k,
                    None => acc.push((b, k)),
                }
            }
        };
        for f in factors {
            match f.node() {
                Node::Mul(inner) => inner.iter().for_each(|s| push(s, &mut acc)),
                _ => push(&f, &mut acc),
            }
        }
        if c == 0.0 {
            return Expr::zero();
        }
        let mut out: Vec<Expr> = acc
            .into_iter()
            .filter(|(_, k)| *k != 0.0)
            .map(|(b, k)| {
                if k == 1.0 {
                    b
                } else if k == -1.0 {
                    Expr::raw(Node::Recip(b))
                } else {
                    Expr::raw(Node::Pow(b, k))
                }
            })
            .collect();
        out.sort_by_key(Expr::hash_value);
        if out.is_empty() {
            return Expr::constant(c);
        }
        if c != 1.0 {
            out.insert(0, Expr::constant(c));
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Expr::raw(Node::Mul(out))
        }
    }

    pub fn powf(&self, k: f64) -> Expr {
        if k == 0.0 {
            return Expr::one();
        }
        if k == 1.0 {
            return self.clone();
        }
        if let Some(c) = self.as_const() {
            let v = c.powf(k);
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::raw(Node::Pow(self.clone(), k))
    }

    pub fn recip(&self) -> Expr {
        match self.node() {
            Node::Const(c) if *c != 0.0 => Expr::constant(1.0 / c),
            Node::Recip(a) => a.clone(),
            _ => Expr::raw(Node::Recip(self.clone())),
        }
    }

    pub fn sqrt(&self) -> Expr {
        match self.node() {
            Node::Const(c) if *c >= 0.0 => Expr::constant(c.sqrt()),
            _ => Expr::raw(Node::Sqrt(self.clone())),
        }
    }

    pub fn exp(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(c.exp()),
            _ => Expr::raw(Node::Exp(self.clone())),
        }
    }

    pub fn scale(&self, c: f64) -> Expr {
        Expr::mul([Expr::constant(c), self.clone()])
    }

    /// Components of the solution of `matrix * x = rhs` (row-major `matrix`).
    pub fn solve_linear(matrix: Vec<Expr>, rhs: Vec<Expr>) -> Vec<Expr> {
        let d = rhs.len();
        assert_eq!(matrix.len(), d * d, "solve_linear: matrix must be {d}x{d}");
        if d == 1 {
            return vec![rhs[0].clone() * matrix[0].recip()];
        }
        if rhs.iter().all(Expr::is_zero) {
            return vec![Expr::zero(); d];
        }
        let sys = Arc::new(LinearSystem::build(matrix.into(), rhs));
        (0..d).map(|k| Expr::raw(Node::Solve(sys.clone(), k))).collect()
    }

    fn cached_diff(&self, v: Coord) -> Option<Expr> {
        let cache = self.0.derivs.lock().unwrap();
        cache
            .iter()
            .find(|(c, _)| *c == v)
            .and_then(|(_, w)| w.upgrade())
            .map(Expr)
    }

    /// Exact partial derivative with respect to coordinate `v`.
    pub fn diff(&self, v: Coord) -> Expr {
        if let Some(d) = self.cached_diff(v) {
            return d;
        }
        let d = match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Coord(c) => {
                if *c == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(ts) => Expr::add(ts.iter().map(|t| t.diff(v))),
            Node::Mul(fs) => {
                let mut terms = Vec::new();
                for (i, f) in fs.iter().enumerate() {
                    let df = f.diff(v);
                    if df.is_zero() {
                        continue;
                    }
                    let mut prod = Vec::with_capacity(fs.len());
                    for (j, g) in fs.iter().enumerate() {
                        prod.push(if i == j { df.clone() } else { g.clone() });
                    }
                    terms.push(Expr::mul(prod));
                }
                Expr::add(terms)
            }
            Node::Pow(a, k) => {
                let da = a.diff(v);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    Expr::mul([Expr::constant(*k), a.powf(k - 1.0), da])
                }
            }
            Node::Recip(a) => {
                let da = a.diff(v);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    Expr::mul([Expr::constant(-1.0), da, self.clone(), self.clone()])
                }
            }
            Node::Sqrt(a) => {
                let da = a.diff(v);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    Expr::mul([Expr::constant(0.5), da, self.recip()])
                }
            }
            Node::Exp(a) => {
                let da = a.diff(v);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    Expr::mul([self.clone(), da])
                }
            }
            Node::Solve(sys, k) => {
                let dsys = sys.derivative(v);
                if dsys.rhs.iter().all(Expr::is_zero) {
                    Expr::zero()
                } else {
                    Expr::raw(Node::Solve(dsys, *k))
                }
            }
        };
        if !d.ptr_eq(self) {
            let mut cache = self.0.derivs.lock().unwrap();
            cache.retain(|(_, w)| w.strong_count() > 0);
            cache.push((v, Arc::downgrade(&d.0)));
        }
        d
    }

    /// Evaluates at a chart point (flat `x, y, z` layout of length `3n`).
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        Evaluator::new(point).eval(self)
    }

    /// True when the expression contains an internal linear-solve node,
    /// which the JSON format cannot represent.
    pub fn has_solve(&self) -> bool {
        match self.node() {
            Node::Const(_) | Node::Coord(_) => false,
            Node::Add(ts) | Node::Mul(ts) => ts.iter().any(Expr::has_solve),
            Node::Pow(a, _) | Node::Recip(a) | Node::Sqrt(a) | Node::Exp(a) => a.has_solve(),
            Node::Solve(..) => true,
        }
    }

    /// Largest block index referenced, plus one; zero for closed constants.
    pub fn max_index(&self) -> usize {
        match self.node() {
            Node::Const(_) => 0,
            Node::Coord(c) => c.i + 1,
            Node::Add(ts) | Node::Mul(ts) => ts.iter().map(Expr::max_index).max().unwrap_or(0),
            Node::Pow(a, _) | Node::Recip(a) | Node::Sqrt(a) | Node::Exp(a) => a.max_index(),
            Node::Solve(sys, _) => sys
                .matrix
                .iter()
                .chain(sys.rhs.iter())
                .map(Expr::max_index)
                .max()
                .unwrap_or(0),
        }
    }
}

/// Evaluates many expressions at one point, sharing work across common
/// subexpressions and linear solves.
pub struct Evaluator<'p> {
    point: &'p [f64],
    n: usize,
    // Keys are pointers; the stored handles keep them from being reused.
    memo: HashMap<*const Inner, (Expr, f64)>,
    solutions: HashMap<*const LinearSystem, (Arc<LinearSystem>, Vec<f64>)>,
    factors: HashMap<*const Expr, (Arc<[Expr]>, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
}

impl<'p> Evaluator<'p> {
    pub fn new(point: &'p [f64]) -> Self {
        Evaluator {
            point,
            n: point.len() / 3,
            memo: HashMap::new(),
            solutions: HashMap::new(),
            factors: HashMap::new(),
        }
    }

    pub fn point(&self) -> &[f64] {
        self.point
    }

    pub fn eval(&mut self, e: &Expr) -> Result<f64> {
        let key = Arc::as_ptr(&e.0);
        let shared = Arc::strong_count(&e.0) > 1;
        if shared {
            if let Some((_, v)) = self.memo.get(&key) {
                return Ok(*v);
            }
        }
        let v = match e.node() {
            Node::Const(c) => *c,
            Node::Coord(c) => {
                if c.i >= self.n || self.point.len() != 3 * self.n {
                    return Err(Error::domain(
                        "coord",
                        format!("coordinate {c} outside a point of length {}", self.point.len()),
                    ));
                }
                self.point[c.block.offset() * self.n + c.i]
            }
            Node::Add(ts) => {
                let mut s = 0.0;
                for t in ts {
                    s += self.eval(t)?;
                }
                s
            }
            Node::Mul(fs) => {
                let mut p = 1.0;
                for f in fs {
                    p *= self.eval(f)?;
                }
                p
            }
            Node::Pow(a, k) => {
                let b = self.eval(a)?;
                if k.fract() == 0.0 && k.abs() < i32::MAX as f64 {
                    if b == 0.0 && *k < 0.0 {
                        return Err(Error::domain("pow", "zero base with negative exponent"));
                    }
                    b.powi(*k as i32)
                } else {
                    if b < 0.0 || (b == 0.0 && *k < 0.0) {
                        return Err(Error::domain("pow", format!("base {b} with exponent {k}")));
                    }
                    b.powf(*k)
                }
            }
            Node::Recip(a) => {
                let b = self.eval(a)?;
                if b == 0.0 {
                    return Err(Error::domain("recip", "division by zero"));
                }
                1.0 / b
            }
            Node::Sqrt(a) => {
                let b = self.eval(a)?;
                if b < 0.0 {
                    return Err(Error::domain("sqrt", format!("negative argument {b}")));
                }
                b.sqrt()
            }
            Node::Exp(a) => self.eval(a)?.exp(),
            Node::Solve(sys, k) => self.solution(sys)?[*k],
        };
        if !v.is_finite() {
            return Err(Error::domain("eval", format!("non-finite value {v}")));
        }
        if shared {
            self.memo.insert(key, (e.clone(), v));
        }
        Ok(v)
    }

    fn solution(&mut self, sys: &Arc<LinearSystem>) -> Result<Vec<f64>> {
        let key = Arc::as_ptr(sys);
        if let Some((_, x)) = self.solutions.get(&key) {
            return Ok(x.clone());
        }
        let d = sys.dim;
        let mkey = sys.matrix.as_ptr();
        if !self.factors.contains_key(&mkey) {
            let mut m = DMatrix::zeros(d, d);
            for r in 0..d {
                for c in 0..d {
                    m[(r, c)] = self.eval(&sys.matrix[r * d + c])?;
                }
            }
            let lu = m.lu();
            if !lu.is_invertible() {
                return Err(Error::domain("solve", "singular linear system"));
            }
            self.factors.insert(mkey, (sys.matrix.clone(), lu));
        }
        let mut b = DVector::zeros(d);
        for r in 0..d {
            b[r] = self.eval(&sys.rhs[r])?;
        }
        let x = self.factors[&mkey]
            .1
            .solve(&b)
            .ok_or_else(|| Error::domain("solve", "singular linear system"))?;
        let x: Vec<f64> = x.iter().copied().collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("solve", "non-finite solution"));
        }
        self.solutions.insert(key, (sys.clone(), x.clone()));
        Ok(x)
    }
}

fn structural_hash(node: &Node) -> u64 {
    let mut h = DefaultHasher::new();
    match node {
        Node::Const(c) => (0u8, c.to_bits()).hash(&mut h),
        Node::Coord(c) => (1u8, c).hash(&mut h),
        Node::Add(ts) => {
            2u8.hash(&mut h);
            ts.iter().for_each(|t| t.0.hash.hash(&mut h));
        }
        Node::Mul(ts) => {
            3u8.hash(&mut h);
            ts.iter().for_each(|t| t.0.hash.hash(&mut h));
        }
        Node::Pow(a, k) => (4u8, a.0.hash, k.to_bits()).hash(&mut h),
        Node::Recip(a) => (5u8, a.0.hash).hash(&mut h),
        Node::Sqrt(a) => (6u8, a.0.hash).hash(&mut h),
        Node::Exp(a) => (7u8, a.0.hash).hash(&mut h),
        Node::Solve(sys, k) => (8u8, sys.hash, *k).hash(&mut h),
    }
    h.finish()
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        if self.0.hash != other.0.hash {
            return false;
        }
        match (self.node(), other.node()) {
            (Node::Const(a), Node::Const(b)) => a.to_bits() == b.to_bits(),
            (Node::Coord(a), Node::Coord(b)) => a == b,
            (Node::Add(a), Node::Add(b)) | (Node::Mul(a), Node::Mul(b)) => a == b,
            (Node::Pow(a, k), Node::Pow(b, l)) => k.to_bits() == l.to_bits() && a == b,
            (Node::Recip(a), Node::Recip(b))
            | (Node::Sqrt(a), Node::Sqrt(b))
            | (Node::Exp(a), Node::Exp(b)) => a == b,
            (Node::Solve(s, k), Node::Solve(t, l)) => Arc::ptr_eq(s, t) && k == l,
            _ => false,
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Coord(c) => write!(f, "{c}"),
            Node::Add(ts) => {
                write!(f, "(")?;
                for (k, t) in ts.iter().enumerate() {
                    if k > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            Node::Mul(fs) => {
                for (k, t) in fs.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{t}")?;
                }
                Ok(())
            }
            Node::Pow(a, k) => write!(f, "({a})^{k}"),
            Node::Recip(a) => write!(f, "1/({a})"),
            Node::Sqrt(a) => write!(f, "sqrt({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Solve(sys, k) => write!(f, "solve{}[{k}]", sys.dim),
        }
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs.clone())
            }
        }
        impl ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs.clone())
            }
        }
        impl ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs)
            }
        }
        impl ops::$tr<f64> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), Expr::constant(rhs))
            }
        }
        impl ops::$tr<&Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(Expr::constant(self), rhs.clone())
            }
        }
        impl ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, Expr::constant(rhs))
            }
        }
        impl ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(Expr::constant(self), rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::add([a, b]));
binop!(Sub, sub, |a, b| Expr::add([a, Expr::mul([Expr::constant(-1.0), b])]));
binop!(Mul, mul, |a, b| Expr::mul([a, b]));
binop!(Div, div, |a, b| Expr::mul([a, b.recip()]));

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::mul([Expr::constant(-1.0), self])
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx() -> Coord {
        Coord::new(Block::X, 0)
    }
    fn cy() -> Coord {
        Coord::new(Block::Y, 0)
    }

    #[test]
    fn folding_removes_trivial_terms() {
        let e = Expr::x(0) * 0.0 + Expr::y(0) * 1.0 + 2.0 + 3.0;
        match e.node() {
            Node::Add(ts) => {
                assert_eq!(ts.len(), 2);
                assert_eq!(ts[0].as_const(), Some(5.0));
            }
            _ => panic!("expected a sum, got {e}"),
        }
        assert!((Expr::x(0) * Expr::zero()).is_zero());
        assert_eq!((Expr::constant(2.0) * 3.0).as_const(), Some(6.0));
    }

    #[test]
    fn derivative_rules() {
        let p = [0.7, 1.3, -0.4];
        let x = Expr::x(0);
        let y = Expr::y(0);
        let f = &x * &y * &y + (x.clone() / y.clone()).sqrt() + (x.clone() * 0.5).exp() + y.powf(3.0);
        let fx = f.diff(cx()).eval(&p).unwrap();
        let (xv, yv) = (0.7_f64, 1.3_f64);
        let want = yv * yv + 0.5 / (xv / yv).sqrt() / yv + 0.5 * (0.5 * xv).exp();
        assert!((fx - want).abs() < 1e-12, "{fx} vs {want}");
        let fy = f.diff(cy()).eval(&p).unwrap();
        let want = 2.0 * xv * yv - 0.5 * (xv / yv).sqrt() / yv + 3.0 * yv * yv;
        assert!((fy - want).abs() < 1e-12, "{fy} vs {want}");
    }

    #[test]
    fn memoized_derivative_is_reused() {
        let f = Expr::x(0) * Expr::y(0);
        let a = f.diff(cx());
        let b = f.diff(cx());
        assert!(a.ptr_eq(&b));
    }

    #[test]
    fn domain_errors() {
        let p = [0.0, 1.0, 2.0];
        assert!(matches!(Expr::x(0).recip().eval(&p), Err(Error::Domain { op: "recip", .. })));
        assert!(matches!((Expr::x(0) - 1.0).sqrt().eval(&p), Err(Error::Domain { op: "sqrt", .. })));
        assert!(matches!((Expr::x(0) - 1.0).powf(0.5).eval(&p), Err(Error::Domain { op: "pow", .. })));
        assert_eq!((Expr::x(0) - 1.0).powf(3.0).eval(&p).unwrap(), -1.0);
    }

    #[test]
    fn coordinate_outside_point_is_an_error() {
        assert!(Expr::x(1).eval(&[0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn linear_solve_and_its_derivatives() {
        // M = [[1 + x^2, y], [y, 2]], b = [exp(x), x*y]
        let x = Expr::x(0);
        let y = Expr::y(0);
        let m = vec![1.0 + &x * &x, y.clone(), y.clone(), Expr::constant(2.0)];
        let b = vec![x.exp(), &x * &y];
        let sol = Expr::solve_linear(m, b);
        let solve_at = |p: &[f64]| {
            let (xv, yv) = (p[0], p[1]);
            let m = nalgebra::Matrix2::new(1.0 + xv * xv, yv, yv, 2.0);
            let b = nalgebra::Vector2::new(xv.exp(), xv * yv);
            m.lu().solve(&b).unwrap()
        };
        let p = [0.3, 0.8, 0.0];
        let exact = solve_at(&p);
        for k in 0..2 {
            assert!((sol[k].eval(&p).unwrap() - exact[k]).abs() < 1e-14);
        }
        // first and second derivatives against central differences
        let h = 1e-5;
        for k in 0..2 {
            let d = sol[k].diff(cx());
            let fd = (solve_at(&[p[0] + h, p[1], 0.0])[k] - solve_at(&[p[0] - h, p[1], 0.0])[k]) / (2.0 * h);
            assert!((d.eval(&p).unwrap() - fd).abs() < 1e-8);
            let dd = d.diff(cy());
            let g = |q: &[f64]| d.eval(q).unwrap();
            let fd2 = (g(&[p[0], p[1] + h, 0.0]) - g(&[p[0], p[1] - h, 0.0])) / (2.0 * h);
            assert!((dd.eval(&p).unwrap() - fd2).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_solve_reports_domain_error() {
        let x = Expr::x(0);
        let m = vec![x.clone(), x.clone(), x.clone(), x.clone()];
        let sol = Expr::solve_linear(m, vec![Expr::one(), Expr::x(0)]);
        assert!(sol[0].eval(&[1.0, 1.0, 1.0]).is_err());
    }
}
