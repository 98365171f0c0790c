use serde::{Deserialize, Serialize};

use super::{Distribution, Relation};

/// Rectangles are bitmasks, so each side is capped at 64 elements.
pub const MAX_SIDE: usize = 64;

/// A combinatorial rectangle `A × B` given by row and column bitmasks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rectangle {
    pub rows: u64,
    pub cols: u64,
}

impl Rectangle {
    pub fn new(rows: u64, cols: u64) -> Self {
        Rectangle { rows, cols }
    }

    pub fn full(x_size: usize, y_size: usize) -> Self {
        Rectangle { rows: low_bits(x_size), cols: low_bits(y_size) }
    }

    pub fn cell(x: usize, y: usize) -> Self {
        Rectangle { rows: 1 << x, cols: 1 << y }
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.rows >> x & 1 == 1 && self.cols >> y & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn row_indices(&self) -> impl Iterator<Item = usize> + '_ {
        bits(self.rows)
    }

    pub fn col_indices(&self) -> impl Iterator<Item = usize> + '_ {
        bits(self.cols)
    }

    pub fn area(&self) -> u32 {
        self.rows.count_ones() * self.cols.count_ones()
    }
}

pub(crate) fn low_bits(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub(crate) fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask >> i & 1 == 1)
}

/// `λ(R)`.
pub fn mass_of(rect: &Rectangle, dist: &Distribution) -> f64 {
    let mut total = 0.0;
    for x in rect.row_indices().take_while(|&x| x < dist.x_size()) {
        for y in rect.col_indices().take_while(|&y| y < dist.y_size()) {
            total += dist.prob(x, y);
        }
    }
    total
}

/// `λ(g⁻¹(z) ∩ R)` where `g⁻¹(z) = {(x, y) : z ∈ g(x, y)}`.
pub fn good_mass(rect: &Rectangle, dist: &Distribution, g: &Relation, z: usize) -> f64 {
    let mut total = 0.0;
    for x in rect.row_indices().take_while(|&x| x < dist.x_size()) {
        for y in rect.col_indices().take_while(|&y| y < dist.y_size()) {
            if g.accepts(x, y, z) {
                total += dist.prob(x, y);
            }
        }
    }
    total
}
