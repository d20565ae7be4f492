//! Coordinate charts on the second-order tangent bundle and sample points.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate block: position `x`, velocity `y`, acceleration `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    X,
    Y,
    Z,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::X, Block::Y, Block::Z];

    pub fn offset(self) -> usize {
        match self {
            Block::X => 0,
            Block::Y => 1,
            Block::Z => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Block::X => "x",
            Block::Y => "y",
            Block::Z => "z",
        }
    }
}

/// A chart coordinate; `i` is zero-based within its block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub block: Block,
    pub i: usize,
}

impl Coord {
    pub fn new(block: Block, i: usize) -> Self {
        Coord { block, i }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.block.label(), self.i + 1)
    }
}

/// Chart `(x_1..x_n, y_1..y_n, z_1..z_n)` of dimension `3n`, flattened block by block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chart {
    pub n: usize,
}

impl Chart {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidChart("base dimension must be positive".into()));
        }
        Ok(Chart { n })
    }

    pub fn dim(&self) -> usize {
        3 * self.n
    }

    pub fn index(&self, c: Coord) -> usize {
        debug_assert!(c.i < self.n);
        c.block.offset() * self.n + c.i
    }

    pub fn coord(&self, idx: usize) -> Coord {
        let block = Block::ALL[idx / self.n];
        Coord::new(block, idx % self.n)
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.dim()).map(move |k| self.coord(k))
    }

    /// Flat indices of one block.
    pub fn block_range(&self, block: Block) -> std::ops::Range<usize> {
        let start = block.offset() * self.n;
        start..start + self.n
    }

    pub fn ensure_same(&self, other: &Chart) -> Result<()> {
        if self.n != other.n {
            return Err(Error::ChartMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(())
    }

    pub fn ensure_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::ChartMismatch { left: self.dim(), right: point.len() });
        }
        Ok(())
    }
}

/// Sampling box. The `y` block is drawn with `|y_i|` in `[y_min, y_max]` and a random sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub x: (f64, f64),
    pub y_min: f64,
    pub y_max: f64,
    pub z: (f64, f64),
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox { x: (-1.0, 1.0), y_min: 0.5, y_max: 2.0, z: (-1.0, 1.0) }
    }
}

/// Deterministic sample points for a chart.
pub fn sample_points(chart: Chart, count: usize, seed: u64, bounds: &SampleBox) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut p = vec![0.0; chart.dim()];
            for c in chart.coords() {
                let v = match c.block {
                    Block::X => rng.random_range(bounds.x.0..=bounds.x.1),
                    Block::Y => {
                        let m = rng.random_range(bounds.y_min..=bounds.y_max);
                        if rng.random_bool(0.5) {
                            m
                        } else {
                            -m
                        }
                    }
                    Block::Z => rng.random_range(bounds.z.0..=bounds.z.1),
                };
                p[chart.index(c)] = v;
            }
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_layout_is_blockwise() {
        let ch = Chart::new(2).unwrap();
        assert_eq!(ch.index(Coord::new(Block::X, 1)), 1);
        assert_eq!(ch.index(Coord::new(Block::Y, 0)), 2);
        assert_eq!(ch.index(Coord::new(Block::Z, 1)), 5);
        for k in 0..ch.dim() {
            assert_eq!(ch.index(ch.coord(k)), k);
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(Chart::new(0).is_err());
    }

    #[test]
    fn samples_avoid_small_velocities_and_repeat() {
        let ch = Chart::new(3).unwrap();
        let a = sample_points(ch, 50, 11, &SampleBox::default());
        let b = sample_points(ch, 50, 11, &SampleBox::default());
        assert_eq!(a, b);
        for p in &a {
            for k in ch.block_range(Block::Y) {
                assert!(p[k].abs() >= 0.5 && p[k].abs() <= 2.0);
            }
        }
    }
}
