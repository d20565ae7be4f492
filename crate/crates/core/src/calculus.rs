//! Brackets, interior products and derivations.
//!
//! Conventions: for a vector field `X` and a vector 1-form `K`,
//! `[X, K](Y) = [X, KY] - K[X, Y]` (the Lie derivative of `K` along `X`) and
//! `[K, X] = -[X, K]`. Two vector 1-forms bracket to the Frölicher–Nijenhuis
//! vector 2-form.

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::tensor::{ScalarForm, Tensor, VectorField, VectorForm, VectorOneForm, VectorTwoForm};

/// `X f = Σ X^i ∂_i f`.
pub fn directional(chart: Chart, x: &[Expr], f: &Expr) -> Expr {
    Expr::add(
        chart
            .coords()
            .zip(x)
            .filter(|(_, xi)| !xi.is_zero())
            .map(|(c, xi)| xi * &f.diff(c)),
    )
}

/// `(∂_c X^a)` as a row-major matrix.
pub fn jacobian(chart: Chart, x: &[Expr]) -> VectorOneForm {
    let coords: Vec<_> = chart.coords().collect();
    VectorOneForm::from_fn(chart, |a, c| x[a].diff(coords[c]))
}

pub(crate) fn lie_bracket_vec(chart: Chart, x: &[Expr], y: &[Expr]) -> Vec<Expr> {
    (0..chart.dim())
        .map(|k| directional(chart, x, &y[k]) - directional(chart, y, &x[k]))
        .collect()
}

/// `[X, Y]^k = Σ_i (X^i ∂_i Y^k - Y^i ∂_i X^k)`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    x.chart().ensure_same(&y.chart())?;
    VectorField::new(x.chart(), lie_bracket_vec(x.chart(), x.comps(), y.comps()))
}

/// `[X, K]` for a vector field and a vector 1-form.
pub fn fn_bracket_vf(x: &VectorField, k: &VectorForm) -> Result<VectorOneForm> {
    lie_derivative(x, k.as_one()?)
}

/// Lie derivative `L_X K = X·∇K - (DX) K + K (DX)`.
pub fn lie_derivative(x: &VectorField, k: &VectorOneForm) -> Result<VectorOneForm> {
    let chart = x.chart();
    chart.ensure_same(&k.chart())?;
    let dx = jacobian(chart, x.comps());
    let d = chart.dim();
    Ok(VectorOneForm::from_fn(chart, |a, c| {
        let mut terms = vec![directional(chart, x.comps(), k.get(a, c))];
        for b in 0..d {
            let l = dx.get(a, b);
            if !l.is_zero() {
                terms.push(-(l * k.get(b, c)));
            }
            let r = dx.get(b, c);
            if !r.is_zero() {
                terms.push(k.get(a, b) * r);
            }
        }
        Expr::add(terms)
    }))
}

/// `[K, X] = -[X, K]`.
pub fn bracket_form_field(k: &VectorOneForm, x: &VectorField) -> Result<VectorOneForm> {
    Ok(lie_derivative(x, k)?.scale(-1.0))
}

/// Lie derivative of a vector 2-form:
/// `(L_X t)(A, B) = [X, t(A, B)] - t([X, A], B) - t(A, [X, B])`.
pub fn lie_derivative_two(x: &VectorField, t: &VectorTwoForm) -> Result<VectorTwoForm> {
    let chart = x.chart();
    chart.ensure_same(&t.chart())?;
    let d = chart.dim();
    let dx = jacobian(chart, x.comps());
    Ok(VectorTwoForm::from_fn(chart, |b, c| {
        let tbc = t.get(b, c);
        let mut out: Vec<Expr> = lie_bracket_vec(chart, x.comps(), &tbc);
        // [X, ∂_b] = -∂_b X
        let (xb, xc) = (dx.column(b), dx.column(c));
        let a1 = t.apply_vec(&xb, &crate::tensor::unit(d, c));
        let a2 = t.apply_vec(&crate::tensor::unit(d, b), &xc);
        for a in 0..d {
            out[a] = Expr::add([out[a].clone(), a1[a].clone(), a2[a].clone()]);
        }
        out
    }))
}

/// Frölicher–Nijenhuis bracket of two vector 1-forms.
pub fn fn_bracket_ff(k: &VectorForm, l: &VectorForm) -> Result<VectorTwoForm> {
    nijenhuis(k.as_one()?, l.as_one()?)
}

/// `[K, L]` in coordinates:
/// `[K,L]^a_{bc} = K^d_b ∂_d L^a_c - K^d_c ∂_d L^a_b + L^d_b ∂_d K^a_c - L^d_c ∂_d K^a_b
///                 - K^a_d (∂_b L^d_c - ∂_c L^d_b) - L^a_d (∂_b K^d_c - ∂_c K^d_b)`.
pub fn nijenhuis(k: &VectorOneForm, l: &VectorOneForm) -> Result<VectorTwoForm> {
    let chart = k.chart();
    chart.ensure_same(&l.chart())?;
    let d = chart.dim();
    let coords: Vec<_> = chart.coords().collect();
    // Derivative tables dK[e][a*d+c] = ∂_e K^a_c, built lazily per entry.
    let dk = |e: usize, a: usize, c: usize| k.get(a, c).diff(coords[e]);
    let dl = |e: usize, a: usize, c: usize| l.get(a, c).diff(coords[e]);
    Ok(VectorTwoForm::from_fn(chart, |b, c| {
        (0..d)
            .map(|a| {
                let mut terms = Vec::new();
                for e in 0..d {
                    let (kb, kc, lb, lc) = (k.get(e, b), k.get(e, c), l.get(e, b), l.get(e, c));
                    if !kb.is_zero() {
                        terms.push(kb * &dl(e, a, c));
                    }
                    if !kc.is_zero() {
                        terms.push(-(kc * &dl(e, a, b)));
                    }
                    if !lb.is_zero() {
                        terms.push(lb * &dk(e, a, c));
                    }
                    if !lc.is_zero() {
                        terms.push(-(lc * &dk(e, a, b)));
                    }
                    let (ka, la) = (k.get(a, e), l.get(a, e));
                    if !ka.is_zero() {
                        let curl = dl(b, e, c) - dl(c, e, b);
                        if !curl.is_zero() {
                            terms.push(-(ka * &curl));
                        }
                    }
                    if !la.is_zero() {
                        let curl = dk(b, e, c) - dk(c, e, b);
                        if !curl.is_zero() {
                            terms.push(-(la * &curl));
                        }
                    }
                }
                Expr::add(terms)
            })
            .collect()
    }))
}

/// `(i_S t)(X) = t(S, X)`.
pub fn apply_vector2form(t: &VectorForm, s: &VectorField) -> Result<VectorOneForm> {
    contract_two(t.as_two()?, s)
}

pub fn contract_two(t: &VectorTwoForm, s: &VectorField) -> Result<VectorOneForm> {
    let chart = t.chart();
    chart.ensure_same(&s.chart())?;
    let d = chart.dim();
    let cols: Vec<Vec<Expr>> = (0..d).map(|c| t.apply_vec(s.comps(), &crate::tensor::unit(d, c))).collect();
    Ok(VectorOneForm::from_fn(chart, |a, c| cols[c][a].clone()))
}

/// Exterior derivative; defined for degrees up to 2.
pub fn exterior_derivative(w: &ScalarForm) -> Result<ScalarForm> {
    let p = w.degree();
    if p >= crate::tensor::MAX_FORM_DEGREE {
        return Err(Error::Degree(format!("exterior derivative of a {p}-form is not supported")));
    }
    let chart = w.chart();
    let mut terms = Vec::new();
    for (idx, f) in w.terms() {
        for (v, c) in chart.coords().enumerate() {
            let df = f.diff(c);
            if df.is_zero() || idx.contains(&v) {
                continue;
            }
            let mut k = Vec::with_capacity(p + 1);
            k.push(v);
            k.extend_from_slice(idx);
            terms.push((k, df));
        }
    }
    ScalarForm::from_terms(chart, p + 1, terms)
}

/// Contraction with a vector field in the first slot.
pub fn interior_field(x: &VectorField, w: &ScalarForm) -> Result<ScalarForm> {
    x.chart().ensure_same(&w.chart())?;
    let p = w.degree();
    if p == 0 {
        return Err(Error::Degree("interior product of a 0-form".into()));
    }
    let chart = w.chart();
    ScalarForm::from_alternating(chart, p - 1, |rest| {
        Expr::add((0..chart.dim()).filter(|v| !x.comp(*v).is_zero()).map(|v| {
            let mut idx = Vec::with_capacity(p);
            idx.push(v);
            idx.extend_from_slice(rest);
            x.comp(v) * &w.coeff(&idx)
        }))
    })
}

/// `(i_K ω)(X_1..X_p) = Σ_i ω(X_1, .., K X_i, .., X_p)`.
pub fn interior_endo(k: &VectorOneForm, w: &ScalarForm) -> Result<ScalarForm> {
    k.chart().ensure_same(&w.chart())?;
    let p = w.degree();
    if p == 0 {
        return Err(Error::Degree("interior product of a 0-form".into()));
    }
    let chart = w.chart();
    ScalarForm::from_alternating(chart, p, |idx| {
        let mut terms = Vec::new();
        for i in 0..p {
            for b in 0..chart.dim() {
                let kb = k.get(b, idx[i]);
                if kb.is_zero() {
                    continue;
                }
                let mut j = idx.to_vec();
                j[i] = b;
                let c = w.coeff(&j);
                if !c.is_zero() {
                    terms.push(kb * &c);
                }
            }
        }
        Expr::add(terms)
    })
}

/// `i_K ω` for `K` a vector field or a vector 1-form.
pub fn interior_product(k: &VectorForm, w: &ScalarForm) -> Result<ScalarForm> {
    match k {
        VectorForm::Field(x) => interior_field(x, w),
        VectorForm::One(e) => interior_endo(e, w),
        VectorForm::Two(_) => Err(Error::Degree("interior product with a vector 2-form".into())),
    }
}

/// `d_X = i_X d + d i_X`, the Lie derivative along `X`.
pub fn d_field(x: &VectorField, w: &ScalarForm) -> Result<ScalarForm> {
    x.chart().ensure_same(&w.chart())?;
    if w.degree() == 0 {
        return Ok(ScalarForm::function(w.chart(), directional(w.chart(), x.comps(), &w.as_function()?)));
    }
    interior_field(x, &exterior_derivative(w)?)?.add(&exterior_derivative(&interior_field(x, w)?)?)
}

/// `d_K = i_K d - d i_K`, with `i_K f = 0` on functions.
pub fn d_endo(k: &VectorOneForm, w: &ScalarForm) -> Result<ScalarForm> {
    k.chart().ensure_same(&w.chart())?;
    let a = interior_endo(k, &exterior_derivative(w)?)?;
    if w.degree() == 0 {
        return Ok(a);
    }
    a.sub(&exterior_derivative(&interior_endo(k, w)?)?)
}

pub fn d_k(k: &VectorForm, w: &ScalarForm) -> Result<ScalarForm> {
    match k {
        VectorForm::Field(x) => d_field(x, w),
        VectorForm::One(e) => d_endo(e, w),
        VectorForm::Two(_) => Err(Error::Degree("derivation along a vector 2-form".into())),
    }
}

/// Differential of a function as a 1-form.
pub fn differential(chart: Chart, f: &Expr) -> Result<ScalarForm> {
    exterior_derivative(&ScalarForm::function(chart, f.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::CanonicalPack;

    fn ch(n: usize) -> Chart {
        Chart::new(n).unwrap()
    }

    fn s0() -> VectorField {
        VectorField::new(ch(1), vec![Expr::y(0), Expr::z(0), Expr::zero()]).unwrap()
    }

    fn assert_const_matrix(k: &VectorOneForm, want: &[&[f64]]) {
        let p = [0.3, -1.2, 0.7];
        let m = k.eval(&p).unwrap();
        for (r, row) in want.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!((m[(r, c)] - v).abs() < 1e-12, "entry ({r},{c}) = {} want {v}", m[(r, c)]);
            }
        }
    }

    #[test]
    fn liouville_fields_bracket() {
        let pk = CanonicalPack::new(1).unwrap();
        let b = lie_bracket(&pk.c1, &pk.c2).unwrap();
        assert_eq!(b.comps(), pk.c1.comps());
        let b = lie_bracket(&pk.c2, &s0()).unwrap();
        assert_eq!(b.eval(&[0.1, 2.0, 3.0]).unwrap(), vec![2.0, 3.0, 0.0]);
        assert!(lie_bracket(&s0(), &s0()).unwrap().max_abs(&[vec![1.0, 2.0, 3.0]]).unwrap() == 0.0);
    }

    #[test]
    fn canonical_tensor_brackets() {
        let pk = CanonicalPack::new(1).unwrap();
        let a = lie_derivative(&pk.c2, &pk.j1).unwrap();
        assert_eq!(a.sub(&pk.j1.scale(-2.0)).unwrap().max_abs(&[vec![0.5, 1.0, 2.0]]).unwrap(), 0.0);
        let b = lie_derivative(&pk.c1, &pk.j2).unwrap();
        assert_eq!(b.sub(&pk.j1.scale(-1.0)).unwrap().max_abs(&[vec![0.5, 1.0, 2.0]]).unwrap(), 0.0);
    }

    #[test]
    fn spray_brackets_against_hand_expansion() {
        let pk = CanonicalPack::new(1).unwrap();
        let j2s = bracket_form_field(&pk.j2, &s0()).unwrap();
        assert_const_matrix(&j2s, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, -2.0]]);
        let j1s = bracket_form_field(&pk.j1, &s0()).unwrap();
        assert_const_matrix(&j1s, &[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, -1.0, 0.0]]);
        let j1ss = bracket_form_field(&j1s, &s0()).unwrap();
        assert_const_matrix(&j1ss, &[&[1.0, 0.0, 0.0], &[0.0, -2.0, 0.0], &[0.0, 0.0, 1.0]]);
    }

    #[test]
    fn fn_bracket_of_canonical_tensors_vanishes() {
        for n in 1..=2 {
            let pk = CanonicalPack::new(n).unwrap();
            let pts = crate::chart::sample_points(ch(n), 3, 1, &Default::default());
            assert_eq!(nijenhuis(&pk.j1, &pk.j1).unwrap().max_abs(&pts).unwrap(), 0.0);
            assert_eq!(nijenhuis(&pk.j1, &pk.j2).unwrap().max_abs(&pts).unwrap(), 0.0);
            assert_eq!(nijenhuis(&pk.j2, &pk.j2).unwrap().max_abs(&pts).unwrap(), 0.0);
        }
        let k = VectorOneForm::constant(ch(1), &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, -2.0]]).unwrap();
        assert!(nijenhuis(&k, &k).unwrap().components().iter().all(|e| e.is_zero()));
    }

    /// `[K,L](X,Y)` from its eight-term definition, with constant `X`, `Y`.
    fn eight_term(chart: Chart, k: &VectorOneForm, l: &VectorOneForm, x: &[Expr], y: &[Expr]) -> Vec<Expr> {
        let br = |a: &[Expr], b: &[Expr]| lie_bracket_vec(chart, a, b);
        let (kx, ky, lx, ly) = (k.apply_vec(x), k.apply_vec(y), l.apply_vec(x), l.apply_vec(y));
        let xy = br(x, y);
        let parts = [
            br(&kx, &ly),
            br(&lx, &ky),
            k.apply_vec(&l.apply_vec(&xy)),
            l.apply_vec(&k.apply_vec(&xy)),
        ];
        let neg = [
            k.apply_vec(&br(&lx, y)),
            k.apply_vec(&br(x, &ly)),
            l.apply_vec(&br(&kx, y)),
            l.apply_vec(&br(x, &ky)),
        ];
        (0..chart.dim())
            .map(|a| Expr::add(parts.iter().map(|v| v[a].clone())) - Expr::add(neg.iter().map(|v| v[a].clone())))
            .collect()
    }

    #[test]
    fn coordinate_nijenhuis_matches_definition() {
        let c = ch(1);
        let (x, y, z) = (Expr::x(0), Expr::y(0), Expr::z(0));
        let k = VectorOneForm::new(
            c,
            vec![
                &x * &y, z.clone(), Expr::one(),
                y.powf(2.0), &x + &z, Expr::zero(),
                (&x * 0.5).exp(), &y * &z, x.clone(),
            ],
        )
        .unwrap();
        let l = VectorOneForm::new(
            c,
            vec![
                z.clone(), Expr::zero(), &x * &x,
                Expr::one(), y.recip(), &y * &x,
                &z * &z, Expr::x(0), Expr::constant(2.0),
            ],
        )
        .unwrap();
        let t = nijenhuis(&k, &l).unwrap();
        let p = [0.4, 1.3, -0.6];
        for b in 0..3 {
            for cc in 0..3 {
                let e = |i: usize| crate::tensor::unit(3, i);
                let want = eight_term(c, &k, &l, &e(b), &e(cc));
                let got = t.get(b, cc);
                for a in 0..3 {
                    let (g, w) = (got[a].eval(&p).unwrap(), want[a].eval(&p).unwrap());
                    assert!((g - w).abs() < 1e-10, "({b},{cc})[{a}]: {g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn exterior_derivative_examples() {
        let c = ch(2);
        let w = ScalarForm::from_terms(c, 1, [(vec![0], Expr::y(0)), (vec![1], Expr::y(1))]).unwrap();
        let dw = exterior_derivative(&w).unwrap();
        // dy1∧dx1 + dy2∧dx2
        assert_eq!(dw.coeff(&[2, 0]).as_const(), Some(1.0));
        assert_eq!(dw.coeff(&[3, 1]).as_const(), Some(1.0));
        assert_eq!(dw.terms().count(), 2);
        assert!(differential(c, &Expr::constant(3.0)).unwrap().is_structurally_zero());
        let f = Expr::x(0) * Expr::y(0) * Expr::z(0);
        let ddf = exterior_derivative(&differential(c, &f).unwrap()).unwrap();
        assert!(ddf.is_structurally_zero());
        let top = ScalarForm::from_terms(c, 3, [(vec![0, 1, 2], Expr::x(0))]).unwrap();
        assert!(matches!(exterior_derivative(&top), Err(Error::Degree(_))));
    }

    #[test]
    fn interior_products() {
        let pk = CanonicalPack::new(1).unwrap();
        let c = ch(1);
        let w = ScalarForm::from_terms(c, 2, [(vec![1, 0], Expr::one())]).unwrap();
        let a = interior_field(&pk.c2, &w).unwrap();
        assert_eq!(a.coeff(&[0]), Expr::y(0));
        assert_eq!(a.terms().count(), 1);
        let b = interior_endo(&pk.j2, &w).unwrap();
        assert!(b.max_abs(&[vec![0.1, 1.0, 2.0]]).unwrap() == 0.0);
        assert!(interior_field(&VectorField::zero(c), &w).unwrap().is_structurally_zero());
        let f = ScalarForm::function(c, Expr::x(0));
        assert!(matches!(interior_product(&VectorForm::Field(pk.c2.clone()), &f), Err(Error::Degree(_))));
    }

    #[test]
    fn derivations_on_energy() {
        let c = ch(2);
        let pk = CanonicalPack::new(2).unwrap();
        let e = (Expr::y(0) * Expr::y(0) + Expr::y(1) * Expr::y(1)) * 0.5;
        let ef = ScalarForm::function(c, e.clone());
        let p = [0.1, 0.2, 1.5, -0.7, 0.3, 0.9];
        let dc2 = d_field(&pk.c2, &ef).unwrap().as_function().unwrap();
        assert!((dc2.eval(&p).unwrap() - 2.0 * e.eval(&p).unwrap()).abs() < 1e-12);
        let dj2 = d_endo(&pk.j2, &ef).unwrap();
        assert_eq!(dj2.coeff(&[0]), Expr::y(0));
        assert_eq!(dj2.coeff(&[1]), Expr::y(1));
        assert_eq!(dj2.terms().count(), 2);
        let k = d_field(&pk.c2, &ScalarForm::function(c, Expr::constant(4.0))).unwrap();
        assert!(k.is_structurally_zero());
    }

    #[test]
    fn contraction_of_two_form() {
        let pk = CanonicalPack::new(1).unwrap();
        let flat = VectorOneForm::constant(ch(1), &[&[1.0, 0.0, 0.0], &[0.0, -1.0, 0.0], &[0.0, 0.0, -1.0]]).unwrap();
        let t = nijenhuis(&pk.j1, &flat).unwrap();
        let s = VectorField::new(ch(1), vec![Expr::y(0), Expr::zero(), Expr::zero()]).unwrap();
        let its = contract_two(&t, &s).unwrap();
        assert_eq!(its.max_abs(&[vec![0.2, 1.0, 0.5]]).unwrap(), 0.0);
        // t(S, S) = 0 for any t
        let g = VectorOneForm::new(ch(1), vec![
            Expr::one(), Expr::zero(), Expr::zero(),
            Expr::x(0), -Expr::one(), Expr::zero(),
            Expr::x(0) * Expr::y(0), Expr::zero(), -Expr::one(),
        ]).unwrap();
        let t = nijenhuis(&pk.j1, &g).unwrap();
        let v = contract_two(&t, &s).unwrap().apply(&s).unwrap();
        assert!(v.max_abs(&[vec![0.2, 1.0, 0.5]]).unwrap() < 1e-14);
    }
}
