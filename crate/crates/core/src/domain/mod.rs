//! Finite relations, input distributions, rectangles and the built-in
//! function families.

mod distribution;
mod family;
mod rectangle;
mod relation;

pub use distribution::Distribution;
pub use family::{make_family, Family, MAX_FAMILY_BITS};
pub use rectangle::{good_mass, mass_of, Rectangle, MAX_SIDE};
pub(crate) use relation::{checked_pow, digits};
pub use relation::{Problem, Relation, MAX_OUTPUTS};

/// Number of bits needed to write an output symbol, `⌈log2 |Z|⌉`.
pub fn output_bits(z_size: usize) -> u32 {
    if z_size <= 1 {
        0
    } else {
        usize::BITS - (z_size - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::output_bits;

    #[test]
    fn output_bit_counts() {
        assert_eq!(output_bits(1), 0);
        assert_eq!(output_bits(2), 1);
        assert_eq!(output_bits(3), 2);
        assert_eq!(output_bits(4), 2);
        assert_eq!(output_bits(5), 3);
    }
}
