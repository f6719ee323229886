//! Arithmetic in the cyclic group Z_N for prime N.
//!
//! Charges and edge powers are stored as `u8`, so the modulus is capped at
//! the largest prime below 256.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported modulus.
pub const MAX_MODULUS: u32 = 251;

/// A prime modulus with field operations on residues in `[0, N)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Modulus {
    n: u32,
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z_{}", self.n)
    }
}

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Modulus {
    pub fn new(n: u32) -> Result<Self> {
        if !is_prime(n) {
            return Err(Error::InvalidSpec(format!(
                "charge modulus N = {n} must be prime"
            )));
        }
        if n > MAX_MODULUS {
            return Err(Error::InvalidSpec(format!(
                "charge modulus N = {n} exceeds the supported maximum {MAX_MODULUS}"
            )));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(self) -> u32 {
        self.n
    }

    #[inline]
    pub fn reduce(self, x: i64) -> u8 {
        x.rem_euclid(self.n as i64) as u8
    }

    #[inline]
    pub fn add(self, a: u8, b: u8) -> u8 {
        ((a as u32 + b as u32) % self.n) as u8
    }

    #[inline]
    pub fn sub(self, a: u8, b: u8) -> u8 {
        ((a as u32 + self.n - b as u32) % self.n) as u8
    }

    #[inline]
    pub fn neg(self, a: u8) -> u8 {
        ((self.n - a as u32) % self.n) as u8
    }

    #[inline]
    pub fn mul(self, a: u8, b: u8) -> u8 {
        ((a as u32 * b as u32) % self.n) as u8
    }

    pub fn pow(self, base: u8, mut exp: u64) -> u8 {
        let mut acc = 1 % self.n;
        let mut b = base as u32 % self.n;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * b % self.n;
            }
            b = b * b % self.n;
            exp >>= 1;
        }
        acc as u8
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn inv(self, a: u8) -> u8 {
        assert!(!(a as u32).is_multiple_of(self.n), "zero has no inverse in {self:?}");
        // Fermat: a^(p-2)
        self.pow(a, self.n as u64 - 2)
    }

    #[inline]
    pub fn div(self, a: u8, b: u8) -> u8 {
        self.mul(a, self.inv(b))
    }

    /// Multiplicative order of `a`, i.e. the least k ≥ 1 with a^k ≡ 1.
    pub fn order(self, a: u8) -> u32 {
        assert!(!(a as u32).is_multiple_of(self.n));
        let mut x = a as u32 % self.n;
        let mut k = 1;
        while x != 1 {
            x = x * a as u32 % self.n;
            k += 1;
        }
        k
    }

    /// Dot product of two residue vectors.
    pub fn dot(self, a: &[u8], b: &[u8]) -> u8 {
        debug_assert_eq!(a.len(), b.len());
        let mut acc: u64 = 0;
        for (&x, &y) in a.iter().zip(b) {
            acc += x as u64 * y as u64;
        }
        (acc % self.n as u64) as u8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_composite_and_large() {
        assert!(Modulus::new(4).is_err());
        assert!(Modulus::new(1).is_err());
        assert!(Modulus::new(257).is_err());
        assert!(Modulus::new(251).is_ok());
    }

    #[test]
    fn inverses_mod_five() {
        let z = Modulus::new(5).unwrap();
        assert_eq!(z.inv(2), 3);
        assert_eq!(z.inv(4), 4);
        for a in 1..5 {
            assert_eq!(z.mul(a, z.inv(a)), 1);
        }
    }

    #[test]
    fn order_of_two_mod_five_is_four() {
        let z = Modulus::new(5).unwrap();
        assert_eq!(z.order(2), 4);
        assert_eq!(z.order(4), 2);
        assert_eq!(z.pow(2, 48), 1);
        assert_eq!(z.pow(2, 2), 4);
    }

    #[test]
    fn neg_and_sub() {
        let z = Modulus::new(5).unwrap();
        assert_eq!(z.neg(0), 0);
        assert_eq!(z.neg(1), 4);
        assert_eq!(z.sub(1, 3), 3);
        assert_eq!(z.reduce(-7), 3);
    }
}
