use proptest::prelude::*;

use t2calc::calculus::{bracket_form_field, directional, exterior_derivative, lie_bracket, lie_derivative, nijenhuis};
use t2calc::gen::PolyGen;
use t2calc::tensor::{compare, magnitude, multi_indices};
use t2calc::{sample_points, Chart, Coord, Expr, SampleBox, ScalarForm, Tolerance, VectorField, VectorOneForm, VectorTwoForm};

fn setup(n: usize, seed: u64) -> (Chart, PolyGen, Vec<Vec<f64>>) {
    let chart = Chart::new(n).unwrap();
    (chart, PolyGen::new(seed), sample_points(chart, 6, seed, &SampleBox::default()))
}

fn field(chart: Chart, g: &mut PolyGen) -> VectorField {
    VectorField::from_fn(chart, |_| g.poly(chart, 2, 2))
}

fn endo(chart: Chart, g: &mut PolyGen) -> VectorOneForm {
    VectorOneForm::from_fn(chart, |_, _| g.poly(chart, 2, 2))
}

fn ok(r: t2calc::Residual) -> bool {
    Tolerance::POLY.accepts(r.value, r.scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jacobi(seed in any::<u64>(), n in 1usize..=2) {
        let (chart, mut g, p) = setup(n, seed);
        let (x, y, z) = (field(chart, &mut g), field(chart, &mut g), field(chart, &mut g));
        let a = lie_bracket(&x, &lie_bracket(&y, &z).unwrap()).unwrap();
        let b = lie_bracket(&y, &lie_bracket(&z, &x).unwrap()).unwrap();
        let c = lie_bracket(&z, &lie_bracket(&x, &y).unwrap()).unwrap();
        let sum = a.add(&b).unwrap().add(&c).unwrap();
        prop_assert!(ok(magnitude(&sum, &p).unwrap()));
    }

    #[test]
    fn bracket_bilinear(seed in any::<u64>(), s in -3.0f64..3.0) {
        let (chart, mut g, p) = setup(1, seed);
        let (k, l, m) = (endo(chart, &mut g), endo(chart, &mut g), endo(chart, &mut g));
        let lhs = nijenhuis(&k, &VectorOneForm::combine(chart, &[(1.0, &l), (s, &m)]).unwrap()).unwrap();
        let nm = nijenhuis(&k, &m).unwrap();
        let nm_s = VectorTwoForm::from_fn(chart, |i, j| nm.get(i, j).iter().map(|e| e.scale(s)).collect());
        let diff = lhs.sub(&nijenhuis(&k, &l).unwrap()).unwrap();
        prop_assert!(ok(compare(&diff, &nm_s, &p).unwrap()));
        let x = field(chart, &mut g);
        let a = bracket_form_field(&VectorOneForm::combine(chart, &[(1.0, &k), (s, &l)]).unwrap(), &x).unwrap();
        let b = VectorOneForm::combine(chart, &[(1.0, &bracket_form_field(&k, &x).unwrap()), (s, &bracket_form_field(&l, &x).unwrap())]).unwrap();
        prop_assert!(ok(compare(&a, &b, &p).unwrap()));
    }

    #[test]
    fn d_squared_vanishes(seed in any::<u64>(), n in 1usize..=2, deg in 0usize..=1) {
        let (chart, mut g, p) = setup(n, seed);
        let w = if deg == 0 {
            ScalarForm::function(chart, g.poly(chart, 3, 4))
        } else {
            ScalarForm::from_terms(chart, deg, multi_indices(chart.dim(), deg).into_iter().map(|i| (i, g.poly(chart, 2, 2)))).unwrap()
        };
        let dd = exterior_derivative(&exterior_derivative(&w).unwrap()).unwrap();
        prop_assert!(ok(magnitude(&dd, &p).unwrap()));
    }

    #[test]
    fn expr_json_round_trip(seed in any::<u64>(), n in 1usize..=3) {
        let (chart, mut g, p) = setup(n, seed);
        let e = g.poly(chart, 3, 4) * (Expr::y(0) * Expr::y(0) + 1.0).recip() + g.poly(chart, 1, 2).exp();
        let back = Expr::from_json(&e.to_json().unwrap(), Some(n), "").unwrap();
        for pt in &p {
            prop_assert_eq!(e.eval(pt).unwrap().to_bits(), back.eval(pt).unwrap().to_bits());
        }
    }

    #[test]
    fn derivative_matches_finite_difference(seed in any::<u64>(), n in 1usize..=2) {
        let (chart, mut g, p) = setup(n, seed);
        let e = g.poly(chart, 3, 4) * (Expr::y(0) * Expr::y(0) + 1.0).recip();
        let h = 1e-5;
        for pt in &p {
            for k in 0..chart.dim() {
                let d = e.diff(chart.coord(k)).eval(pt).unwrap();
                let (mut a, mut b) = (pt.clone(), pt.clone());
                a[k] += h;
                b[k] -= h;
                let fd = (e.eval(&a).unwrap() - e.eval(&b).unwrap()) / (2.0 * h);
                prop_assert!((d - fd).abs() <= 1e-5 * d.abs().max(1.0), "{} vs {}", d, fd);
            }
        }
    }

    #[test]
    fn bracket_leibniz(seed in any::<u64>(), n in 1usize..=2) {
        let (chart, mut g, p) = setup(n, seed);
        let (x, y) = (field(chart, &mut g), field(chart, &mut g));
        let f = g.poly(chart, 2, 3);
        let lhs = lie_bracket(&x, &y.scale_expr(&f)).unwrap();
        let rhs = y.scale_expr(&directional(chart, x.comps(), &f)).add(&lie_bracket(&x, &y).unwrap().scale_expr(&f)).unwrap();
        prop_assert!(ok(compare(&lhs, &rhs, &p).unwrap()));
    }

    #[test]
    fn lie_derivative_of_identity_vanishes(seed in any::<u64>()) {
        let (chart, mut g, p) = setup(1, seed);
        let x = field(chart, &mut g);
        let l = lie_derivative(&x, &VectorOneForm::identity(chart)).unwrap();
        prop_assert!(ok(magnitude(&l, &p).unwrap()));
    }
}

#[test]
fn coordinate_lookup() {
    let chart = Chart::new(2).unwrap();
    assert_eq!(chart.coord(chart.index(Coord::new(t2calc::Block::Z, 1))), Coord::new(t2calc::Block::Z, 1));
}
