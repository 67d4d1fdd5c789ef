//! Goldilocks prime field `p = 2^64 - 2^32 + 1` and its quadratic extension
//! `F_p[X] / (X^2 - 7)`.
//!
//! Values are kept canonical (`< p`) at every API boundary. All protocol
//! challenges live in the extension so that Schwartz-Zippel error terms are
//! governed by `|EF| = p^2`.

use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;

use crate::error::{Error, Result};

/// The Goldilocks modulus.
pub const MODULUS: u64 = 0xFFFF_FFFF_0000_0001;

/// `2^64 mod p`.
const EPSILON: u64 = 0xFFFF_FFFF;

/// Quadratic non-residue defining the extension.
pub const EXT_NONRESIDUE: u64 = 7;

/// Multiplicative generator of `F_p^*`.
pub const MULTIPLICATIVE_GENERATOR: u64 = 7;

/// `p - 1 = 2^32 * (2^32 - 1)`.
pub const TWO_ADICITY: u32 = 32;

/// Common arithmetic surface shared by [`Fp`] and [`Ext`].
pub trait Field:
    Copy
    + Clone
    + Default
    + PartialEq
    + Eq
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Product
    + From<Fp>
    + 'static
{
    const ZERO: Self;
    const ONE: Self;

    fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    fn inverse(&self) -> Result<Self>;

    fn square(&self) -> Self {
        *self * *self
    }

    fn pow(&self, mut exp: u64) -> Self {
        let mut base = *self;
        let mut acc = Self::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base = base.square();
            exp >>= 1;
        }
        acc
    }

    fn double(&self) -> Self {
        *self + *self
    }
}

/// Element of the Goldilocks field in canonical form.
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fp(u64);

impl Fp {
    pub const ZERO: Fp = Fp(0);
    pub const ONE: Fp = Fp(1);
    pub const TWO: Fp = Fp(2);

    /// Reduces an arbitrary `u64` into the field.
    #[inline]
    pub const fn new(value: u64) -> Self {
        if value >= MODULUS {
            Fp(value - MODULUS)
        } else {
            Fp(value)
        }
    }

    /// Embeds a signed integer, mapping negatives to `p - |v|`.
    pub fn from_i64(value: i64) -> Self {
        if value >= 0 {
            Fp::new(value as u64)
        } else {
            -Fp::new(value.unsigned_abs())
        }
    }

    /// Reduces a 128-bit integer; used for challenge sampling.
    pub fn from_u128(value: u128) -> Self {
        Fp(reduce128(value))
    }

    #[inline]
    pub const fn value(self) -> u64 {
        self.0
    }

    /// Interprets the element as a signed integer in `(-p/2, p/2]`.
    pub fn to_i64_centered(self) -> i128 {
        if self.0 > MODULUS / 2 {
            self.0 as i128 - MODULUS as i128
        } else {
            self.0 as i128
        }
    }

    pub fn to_le_bytes(self) -> [u8; 8] {
        self.0.to_le_bytes()
    }

    /// Parses a canonical little-endian encoding; non-canonical input is an error.
    pub fn from_le_bytes(bytes: [u8; 8]) -> Result<Self> {
        let v = u64::from_le_bytes(bytes);
        if v >= MODULUS {
            return Err(Error::Parse(format!("non-canonical field element {v:#x}")));
        }
        Ok(Fp(v))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v: u64 = rng.gen();
            if v < MODULUS {
                return Fp(v);
            }
        }
    }

    pub fn random_nonzero<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v = Fp::random(rng);
            if v != Fp::ZERO {
                return v;
            }
        }
    }

    /// Generator of the multiplicative subgroup of order `2^log_n`.
    pub fn two_adic_root(log_n: u32) -> Result<Self> {
        if log_n > TWO_ADICITY {
            return Err(Error::Size(format!("no root of unity of order 2^{log_n} (two-adicity is {TWO_ADICITY})")));
        }
        let base = Fp(MULTIPLICATIVE_GENERATOR).pow((MODULUS - 1) >> TWO_ADICITY);
        Ok(base.pow(1u64 << (TWO_ADICITY - log_n)))
    }
}

#[inline]
fn reduce128(x: u128) -> u64 {
    let lo = x as u64;
    let hi = (x >> 64) as u64;
    let hi_hi = hi >> 32;
    let hi_lo = hi & EPSILON;

    let (mut t0, borrow) = lo.overflowing_sub(hi_hi);
    if borrow {
        t0 = t0.wrapping_sub(EPSILON);
    }
    let t1 = hi_lo * EPSILON;
    let (sum, carry) = t0.overflowing_add(t1);
    let mut r = sum.wrapping_add(EPSILON * carry as u64);
    if r >= MODULUS {
        r -= MODULUS;
    }
    r
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for Fp {
    fn from(v: u64) -> Self {
        Fp::new(v)
    }
}

impl Add for Fp {
    type Output = Fp;
    #[inline]
    fn add(self, rhs: Fp) -> Fp {
        let (s, carry) = self.0.overflowing_add(rhs.0);
        if carry {
            Fp(s.wrapping_add(EPSILON))
        } else if s >= MODULUS {
            Fp(s - MODULUS)
        } else {
            Fp(s)
        }
    }
}

impl Sub for Fp {
    type Output = Fp;
    #[inline]
    fn sub(self, rhs: Fp) -> Fp {
        let (d, borrow) = self.0.overflowing_sub(rhs.0);
        if borrow {
            Fp(d.wrapping_sub(EPSILON))
        } else {
            Fp(d)
        }
    }
}

impl Mul for Fp {
    type Output = Fp;
    #[inline]
    fn mul(self, rhs: Fp) -> Fp {
        Fp(reduce128(self.0 as u128 * rhs.0 as u128))
    }
}

impl Neg for Fp {
    type Output = Fp;
    #[inline]
    fn neg(self) -> Fp {
        if self.0 == 0 {
            self
        } else {
            Fp(MODULUS - self.0)
        }
    }
}

impl AddAssign for Fp {
    #[inline]
    fn add_assign(&mut self, rhs: Fp) {
        *self = *self + rhs;
    }
}

impl SubAssign for Fp {
    #[inline]
    fn sub_assign(&mut self, rhs: Fp) {
        *self = *self - rhs;
    }
}

impl MulAssign for Fp {
    #[inline]
    fn mul_assign(&mut self, rhs: Fp) {
        *self = *self * rhs;
    }
}

impl Sum for Fp {
    fn sum<I: Iterator<Item = Fp>>(iter: I) -> Fp {
        iter.fold(Fp::ZERO, |a, b| a + b)
    }
}

impl Product for Fp {
    fn product<I: Iterator<Item = Fp>>(iter: I) -> Fp {
        iter.fold(Fp::ONE, |a, b| a * b)
    }
}

impl Field for Fp {
    const ZERO: Fp = Fp(0);
    const ONE: Fp = Fp(1);

    fn inverse(&self) -> Result<Fp> {
        if self.0 == 0 {
            return Err(Error::Arithmetic("inverse of zero".into()));
        }
        Ok(self.pow(MODULUS - 2))
    }
}

/// Montgomery batch inversion: one field inversion plus `3(n-1)` multiplications.
pub fn batch_inverse<F: Field>(values: &[F]) -> Result<Vec<F>> {
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let mut prefix = Vec::with_capacity(values.len());
    let mut acc = F::ONE;
    for (i, v) in values.iter().enumerate() {
        if v.is_zero() {
            return Err(Error::Arithmetic(format!("batch inverse: element {i} is zero")));
        }
        prefix.push(acc);
        acc *= *v;
    }
    let mut inv = acc.inverse()?;
    let mut out = vec![F::ZERO; values.len()];
    for i in (0..values.len()).rev() {
        out[i] = inv * prefix[i];
        inv *= values[i];
    }
    Ok(out)
}

/// Element `c0 + c1 * X` of `F_p[X] / (X^2 - 7)`.
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash)]
pub struct Ext {
    pub c0: Fp,
    pub c1: Fp,
}

impl Ext {
    pub const ZERO: Ext = Ext { c0: Fp::ZERO, c1: Fp::ZERO };
    pub const ONE: Ext = Ext { c0: Fp::ONE, c1: Fp::ZERO };
    /// The adjoined root `X`.
    pub const GEN: Ext = Ext { c0: Fp::ZERO, c1: Fp::ONE };

    pub const fn new(c0: Fp, c1: Fp) -> Self {
        Ext { c0, c1 }
    }

    pub fn from_u64(v: u64) -> Self {
        Ext::from(Fp::new(v))
    }

    pub fn from_i64(v: i64) -> Self {
        Ext::from(Fp::from_i64(v))
    }

    /// Returns the base-field value when `c1 == 0`.
    pub fn as_base(&self) -> Option<Fp> {
        (self.c1 == Fp::ZERO).then_some(self.c0)
    }

    #[inline]
    pub fn mul_base(self, rhs: Fp) -> Ext {
        Ext { c0: self.c0 * rhs, c1: self.c1 * rhs }
    }

    pub fn to_le_bytes(self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[..8].copy_from_slice(&self.c0.to_le_bytes());
        out[8..].copy_from_slice(&self.c1.to_le_bytes());
        out
    }

    pub fn from_le_bytes(bytes: [u8; 16]) -> Result<Self> {
        let mut lo = [0u8; 8];
        let mut hi = [0u8; 8];
        lo.copy_from_slice(&bytes[..8]);
        hi.copy_from_slice(&bytes[8..]);
        Ok(Ext { c0: Fp::from_le_bytes(lo)?, c1: Fp::from_le_bytes(hi)? })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Ext { c0: Fp::random(rng), c1: Fp::random(rng) }
    }

    pub fn random_nonzero<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v = Ext::random(rng);
            if v != Ext::ZERO {
                return v;
            }
        }
    }
}

#[inline]
fn mul_by_nonresidue(x: Fp) -> Fp {
    // 7x = 8x - x
    let x2 = x + x;
    let x4 = x2 + x2;
    x4 + x4 - x
}

impl fmt::Debug for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.c1 == Fp::ZERO {
            write!(f, "{}", self.c0)
        } else {
            write!(f, "({} + {}·X)", self.c0, self.c1)
        }
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl From<Fp> for Ext {
    #[inline]
    fn from(v: Fp) -> Self {
        Ext { c0: v, c1: Fp::ZERO }
    }
}

impl Add for Ext {
    type Output = Ext;
    #[inline]
    fn add(self, rhs: Ext) -> Ext {
        Ext { c0: self.c0 + rhs.c0, c1: self.c1 + rhs.c1 }
    }
}

impl Sub for Ext {
    type Output = Ext;
    #[inline]
    fn sub(self, rhs: Ext) -> Ext {
        Ext { c0: self.c0 - rhs.c0, c1: self.c1 - rhs.c1 }
    }
}

impl Mul for Ext {
    type Output = Ext;
    #[inline]
    fn mul(self, rhs: Ext) -> Ext {
        let a0b0 = self.c0 * rhs.c0;
        let a1b1 = self.c1 * rhs.c1;
        let cross = (self.c0 + self.c1) * (rhs.c0 + rhs.c1) - a0b0 - a1b1;
        Ext { c0: a0b0 + mul_by_nonresidue(a1b1), c1: cross }
    }
}

impl Mul<Fp> for Ext {
    type Output = Ext;
    #[inline]
    fn mul(self, rhs: Fp) -> Ext {
        self.mul_base(rhs)
    }
}

impl Neg for Ext {
    type Output = Ext;
    #[inline]
    fn neg(self) -> Ext {
        Ext { c0: -self.c0, c1: -self.c1 }
    }
}

impl AddAssign for Ext {
    #[inline]
    fn add_assign(&mut self, rhs: Ext) {
        *self = *self + rhs;
    }
}

impl SubAssign for Ext {
    #[inline]
    fn sub_assign(&mut self, rhs: Ext) {
        *self = *self - rhs;
    }
}

impl MulAssign for Ext {
    #[inline]
    fn mul_assign(&mut self, rhs: Ext) {
        *self = *self * rhs;
    }
}

impl Sum for Ext {
    fn sum<I: Iterator<Item = Ext>>(iter: I) -> Ext {
        iter.fold(Ext::ZERO, |a, b| a + b)
    }
}

impl Product for Ext {
    fn product<I: Iterator<Item = Ext>>(iter: I) -> Ext {
        iter.fold(Ext::ONE, |a, b| a * b)
    }
}

impl Field for Ext {
    const ZERO: Ext = Ext::ZERO;
    const ONE: Ext = Ext::ONE;

    fn inverse(&self) -> Result<Ext> {
        // (c0 + c1 X)^{-1} = (c0 - c1 X) / (c0^2 - 7 c1^2)
        let norm = self.c0.square() - mul_by_nonresidue(self.c1.square());
        if norm == Fp::ZERO {
            return Err(Error::Arithmetic("inverse of zero in extension field".into()));
        }
        let n_inv = norm.inverse()?;
        Ok(Ext { c0: self.c0 * n_inv, c1: -self.c1 * n_inv })
    }
}

/// Checks Euler's criterion `w^((p-1)/2) = -1`, i.e. `X^2 - w` is irreducible.
pub fn check_extension_irreducible() -> Result<()> {
    let w = Fp::new(EXT_NONRESIDUE);
    if w.pow((MODULUS - 1) / 2) == -Fp::ONE {
        Ok(())
    } else {
        Err(Error::Arithmetic(format!("{EXT_NONRESIDUE} is a square mod p; extension is not a field")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wraparound_and_inverse() {
        assert_eq!(Fp::new(MODULUS - 1) + Fp::ONE, Fp::ZERO);
        assert_eq!(Fp::ZERO - Fp::ONE, Fp::new(MODULUS - 1));
        assert_eq!(Fp::TWO.inverse().unwrap() * Fp::TWO, Fp::ONE);
        assert!(matches!(Fp::ZERO.inverse(), Err(Error::Arithmetic(_))));
        assert!(matches!(Ext::ZERO.inverse(), Err(Error::Arithmetic(_))));
    }

    #[test]
    fn mul_matches_u128_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let a = Fp::random(&mut rng);
            let b = Fp::random(&mut rng);
            let expect = ((a.value() as u128 * b.value() as u128) % MODULUS as u128) as u64;
            assert_eq!((a * b).value(), expect);
            let expect_add = ((a.value() as u128 + b.value() as u128) % MODULUS as u128) as u64;
            assert_eq!((a + b).value(), expect_add);
        }
        // extreme operands
        let m = Fp::new(MODULUS - 1);
        assert_eq!(m * m, Fp::ONE);
        assert_eq!(Fp::from_u128(u128::MAX).value(), (u128::MAX % MODULUS as u128) as u64);
    }

    #[test]
    fn batch_inverse_matches_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<Fp> = (0..33).map(|_| Fp::random_nonzero(&mut rng)).collect();
        let inv = batch_inverse(&xs).unwrap();
        for (x, i) in xs.iter().zip(&inv) {
            assert_eq!(x.inverse().unwrap(), *i);
        }
        let mut with_zero = xs.clone();
        with_zero[5] = Fp::ZERO;
        assert!(batch_inverse(&with_zero).is_err());
    }

    #[test]
    fn field_axioms_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let (a, b, c) = (Fp::random(&mut rng), Fp::random(&mut rng), Fp::random(&mut rng));
            assert_eq!((a * b) * c, a * (b * c));
            assert_eq!(a * (b + c), a * b + a * c);
            assert_eq!((a + b) + c, a + (b + c));
            let (x, y, z) = (Ext::random(&mut rng), Ext::random(&mut rng), Ext::random(&mut rng));
            assert_eq!((x * y) * z, x * (y * z));
            assert_eq!(x * (y + z), x * y + x * z);
            assert_eq!(x * y, y * x);
        }
    }

    #[test]
    fn extension_definition() {
        check_extension_irreducible().unwrap();
        assert_eq!(Ext::GEN * Ext::GEN, Ext::from_u64(EXT_NONRESIDUE));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let a = Ext::random_nonzero(&mut rng);
            assert_eq!(a * a.inverse().unwrap(), Ext::ONE);
            let (c, d) = (Fp::random(&mut rng), Fp::random(&mut rng));
            assert_eq!(Ext::from(c) * Ext::from(d), Ext::from(c * d));
            assert_eq!(Ext::from(c) + Ext::from(d), Ext::from(c + d));
        }
    }

    #[test]
    fn roots_of_unity() {
        let w = Fp::two_adic_root(TWO_ADICITY).unwrap();
        assert_eq!(w.pow(1 << 31), -Fp::ONE);
        assert_eq!(Fp::two_adic_root(3).unwrap().pow(8), Fp::ONE);
        assert!(Fp::two_adic_root(33).is_err());
    }

    #[test]
    fn signed_embedding() {
        assert_eq!(Fp::from_i64(-4096), Fp::new(MODULUS - 4096));
        assert_eq!(Fp::from_i64(-4096).to_i64_centered(), -4096);
        assert!(Fp::from_le_bytes(MODULUS.to_le_bytes()).is_err());
    }
}
