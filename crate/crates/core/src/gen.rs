//! Seeded random polynomial generators for tests and scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::{Chart, Coord};
use crate::expr::Expr;

pub struct PolyGen {
    rng: ChaCha8Rng,
}

impl PolyGen {
    pub fn new(seed: u64) -> Self {
        PolyGen { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Dyadic coefficient in `[-1, 1]`, nonzero.
    pub fn coeff(&mut self) -> f64 {
        let k = self.rng.random_range(1..=8) as f64 / 8.0;
        if self.rng.random_bool(0.5) {
            k
        } else {
            -k
        }
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// `c + a x_j`: a random affine function of the base point.
    pub fn base_factor(&mut self, n: usize) -> Expr {
        let j = self.index(n);
        self.coeff() + Expr::x(j) * self.coeff()
    }

    /// Random monomial of weighted degree `r` in `y` (weight 1) and `z` (weight 2).
    pub fn weighted_monomial(&mut self, n: usize, r: u32) -> Expr {
        let mut factors = Vec::new();
        let mut left = r;
        while left > 0 {
            if left >= 2 && self.rng.random_bool(0.4) {
                factors.push(Expr::z(self.index(n)));
                left -= 2;
            } else {
                factors.push(Expr::y(self.index(n)));
                left -= 1;
            }
        }
        Expr::mul(factors)
    }

    /// Random polynomial homogeneous of degree `r` under `C₂`.
    pub fn homogeneous(&mut self, n: usize, r: u32, terms: usize) -> Expr {
        Expr::add((0..terms).map(|_| {
            let b = self.base_factor(n);
            b * self.weighted_monomial(n, r)
        }))
    }

    /// Random polynomial in all chart coordinates of total degree at most `deg`.
    pub fn poly(&mut self, chart: Chart, deg: usize, terms: usize) -> Expr {
        let coords: Vec<Coord> = chart.coords().collect();
        Expr::add((0..terms).map(|_| {
            let d = self.rng.random_range(0..=deg);
            let mut f = vec![Expr::constant(self.coeff())];
            for _ in 0..d {
                f.push(Expr::coord(coords[self.index(coords.len())]));
            }
            Expr::mul(f)
        }))
    }
}
