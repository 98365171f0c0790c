use std::fmt;
use std::str::FromStr;

use super::{Distribution, Relation};
use crate::error::{Error, Result};

/// `2^n ≤ 64`, so every input side fits a rectangle bitmask.
pub const MAX_FAMILY_BITS: usize = 6;

/// Built-in two-party function families on `n`-bit inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    Eq,
    And,
    Xor,
    Ip,
    Disj,
    Ghd,
    Tribes,
}

impl Family {
    pub const ALL: [Family; 7] = [Family::Eq, Family::And, Family::Xor, Family::Ip, Family::Disj, Family::Ghd, Family::Tribes];

    pub fn name(self) -> &'static str {
        match self {
            Family::Eq => "EQ",
            Family::And => "AND",
            Family::Xor => "XOR",
            Family::Ip => "IP",
            Family::Disj => "DISJ",
            Family::Ghd => "GHD",
            Family::Tribes => "TRIBES",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Family::Eq => "1 iff x = y",
            Family::And => "1 iff every bit of x and y is set",
            Family::Xor => "parity of x xor y",
            Family::Ip => "inner product <x,y> mod 2",
            Family::Disj => "1 iff x and y share no set bit",
            Family::Ghd => "gap-Hamming: 1 if d(x,y) >= n/2 + sqrt(n), 0 if d(x,y) <= n/2 - sqrt(n), both accepted otherwise",
            Family::Tribes => "AND over blocks of ceil(sqrt(n)) bits of OR_i (x_i and y_i)",
        }
    }

    /// Builds the relation on `X = Y = {0,1}^n` (inputs as integers) with its
    /// canonical distribution. Every family uses the uniform distribution.
    pub fn build(self, n: usize) -> Result<(Relation, Distribution)> {
        if n == 0 || n > MAX_FAMILY_BITS {
            return Err(Error::SizeCap(format!("n = {n}; need 1 <= n <= {MAX_FAMILY_BITS}")));
        }
        let size = 1usize << n;
        let all = (size - 1) as u32;
        let relation = match self {
            Family::Eq => Relation::tabulate(size, size, 2, |x, y| (x == y) as usize)?,
            Family::And => Relation::tabulate(size, size, 2, |x, y| ((x & y) as u32 == all) as usize)?,
            Family::Xor => Relation::tabulate(size, size, 2, |x, y| ((x ^ y).count_ones() & 1) as usize)?,
            Family::Ip => Relation::tabulate(size, size, 2, |x, y| ((x & y).count_ones() & 1) as usize)?,
            Family::Disj => Relation::tabulate(size, size, 2, |x, y| (x & y == 0) as usize)?,
            Family::Ghd => {
                let half = n as f64 / 2.0;
                let gap = (n as f64).sqrt();
                let mut accept = Vec::with_capacity(size * size);
                for x in 0..size {
                    for y in 0..size {
                        let d = (x ^ y).count_ones() as f64;
                        accept.push(if d >= half + gap {
                            vec![1]
                        } else if d <= half - gap {
                            vec![0]
                        } else {
                            vec![0, 1]
                        });
                    }
                }
                Relation::new(size, size, 2, accept)?
            }
            Family::Tribes => {
                let block = (n as f64).sqrt().ceil() as usize;
                Relation::tabulate(size, size, 2, |x, y| {
                    let hits = x & y;
                    (0..n).step_by(block).all(|start| {
                        let width = block.min(n - start);
                        let mask = ((1usize << width) - 1) << start;
                        hits & mask != 0
                    }) as usize
                })?
            }
        };
        Ok((relation, Distribution::uniform(size, size)))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(s)).ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// Looks up a family by name and builds it on `n` bits.
pub fn make_family(name: &str, n: usize) -> Result<(Relation, Distribution)> {
    name.parse::<Family>()?.build(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(f: &Relation) -> usize {
        let mut count = 0;
        for x in 0..f.x_size() {
            for y in 0..f.y_size() {
                count += f.accepts(x, y, 1) as usize;
            }
        }
        count
    }

    #[test]
    fn and_on_one_bit() {
        let (f, d) = make_family("AND", 1).unwrap();
        assert_eq!(f.function_values().unwrap(), vec![0, 0, 0, 1]);
        assert_eq!(d.masses(), &[0.25; 4]);
    }

    #[test]
    fn equality_on_two_bits() {
        let (f, _) = make_family("EQ", 2).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                assert_eq!(f.is_exactly(x, y, 1), x == y);
            }
        }
    }

    #[test]
    fn inner_product_count_matches_enumeration() {
        let (f, _) = make_family("IP", 2).unwrap();
        let mut expected = 0;
        for x in 0..4usize {
            for y in 0..4usize {
                let bits = [(x & 1) * (y & 1), (x >> 1 & 1) * (y >> 1 & 1)];
                expected += (bits[0] + bits[1]) % 2;
            }
        }
        assert_eq!(expected, 6);
        assert_eq!(ones(&f), expected);
    }

    #[test]
    fn gap_hamming_is_a_promise_relation() {
        let (f, _) = make_family("GHD", 4).unwrap();
        assert!(!f.is_total_function());
        // d = 0 <= 2 - 2 and d = 4 >= 2 + 2; d = 2 violates the promise.
        assert_eq!(f.outputs(0, 0), &[0]);
        assert_eq!(f.outputs(0, 15), &[1]);
        assert_eq!(f.outputs(0, 3), &[0, 1]);
    }

    #[test]
    fn tribes_blocks() {
        let (f, _) = make_family("TRIBES", 4).unwrap();
        // Blocks {0,1} and {2,3}.
        assert!(f.is_exactly(0b0101, 0b0101, 1));
        assert!(f.is_exactly(0b0011, 0b0011, 0));
    }

    #[test]
    fn errors() {
        assert!(matches!(make_family("MAJ", 2), Err(Error::UnknownFamily(_))));
        assert!(matches!(make_family("EQ", 7), Err(Error::SizeCap(_))));
    }

    #[test]
    fn deterministic() {
        for fam in Family::ALL {
            assert_eq!(fam.build(3).unwrap(), fam.build(3).unwrap());
        }
    }
}
