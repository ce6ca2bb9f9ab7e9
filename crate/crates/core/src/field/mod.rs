//! Arithmetic over the 64-bit prime field `p = 2^64 - 2^32 + 1`.
//!
//! The multiplicative group has order `2^32 * (2^32 - 1)`, so there is a
//! subgroup of every power-of-two order up to `2^32`. Those subgroups (and
//! their cosets) are the FFT domains used by the polynomial commitment.

pub(crate) mod fft;
pub(crate) mod mle;

pub use fft::{fft_evaluate, ifft_interpolate, DomainKind, EvaluationDomain};
pub use mle::{beta_evaluate, eq_table, mle_evaluate, MultilinearTable};

use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;

use crate::error::{Error, Result};

/// The field modulus.
pub const MODULUS: u64 = 0xffff_ffff_0000_0001;
/// `2^64 mod p`.
const EPSILON: u64 = 0xffff_ffff;
/// Largest `k` such that `2^k | p - 1`.
pub const TWO_ADICITY: u32 = 32;
/// A generator of the full multiplicative group.
pub const MULTIPLICATIVE_GENERATOR: u64 = 7;

/// A canonical field element (`value < p`).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement(u64);

impl FieldElement {
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1);
    pub const TWO: Self = Self(2);

    /// Reduces an arbitrary `u64` into the field.
    pub const fn new(value: u64) -> Self {
        if value >= MODULUS {
            Self(value - MODULUS)
        } else {
            Self(value)
        }
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v: u64 = rng.gen();
            if v < MODULUS {
                return Self(v);
            }
        }
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn pow(self, mut exp: u64) -> Self {
        let mut base = self;
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

    /// Multiplicative inverse; `None` for zero.
    pub fn inverse(self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(self.pow(MODULUS - 2))
        }
    }

    /// A primitive `2^log_order`-th root of unity.
    pub fn two_adic_root(log_order: u32) -> Self {
        assert!(log_order <= TWO_ADICITY, "no subgroup of order 2^{log_order}");
        let base = Self(MULTIPLICATIVE_GENERATOR).pow((MODULUS - 1) >> TWO_ADICITY);
        base.pow(1u64 << (TWO_ADICITY - log_order))
    }

    /// 8-byte little-endian canonical encoding.
    pub fn to_bytes(self) -> [u8; 8] {
        self.0.to_le_bytes()
    }

    /// Decodes the canonical encoding, rejecting values `>= p`.
    pub fn from_bytes(bytes: [u8; 8]) -> Result<Self> {
        let v = u64::from_le_bytes(bytes);
        if v >= MODULUS {
            return Err(Error::Decode(format!("non-canonical field element {v:#x}")));
        }
        Ok(Self(v))
    }
}

/// Inverts every element in place with a single field inversion.
/// Panics if any element is zero.
pub fn batch_inverse(values: &mut [FieldElement]) {
    let mut prefix = Vec::with_capacity(values.len());
    let mut acc = FieldElement::ONE;
    for v in values.iter() {
        prefix.push(acc);
        acc *= *v;
    }
    let mut inv = acc.inverse().expect("batch_inverse on a zero element");
    for (v, pre) in values.iter_mut().zip(prefix).rev() {
        let next = inv * *v;
        *v = inv * pre;
        inv = next;
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
    let (mut t2, carry) = t0.overflowing_add(t1);
    if carry {
        t2 = t2.wrapping_add(EPSILON);
    }
    if t2 >= MODULUS {
        t2 - MODULUS
    } else {
        t2
    }
}

impl Add for FieldElement {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let (sum, over) = self.0.overflowing_add(rhs.0);
        if over || sum >= MODULUS {
            Self(sum.wrapping_sub(MODULUS))
        } else {
            Self(sum)
        }
    }
}

impl Sub for FieldElement {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        if self.0 >= rhs.0 {
            Self(self.0 - rhs.0)
        } else {
            Self((MODULUS - rhs.0) + self.0)
        }
    }
}

impl Mul for FieldElement {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self(reduce128(self.0 as u128 * rhs.0 as u128))
    }
}

impl Div for FieldElement {
    type Output = Self;
    /// Panics on division by zero.
    fn div(self, rhs: Self) -> Self {
        self * rhs.inverse().expect("division by zero")
    }
}

impl Neg for FieldElement {
    type Output = Self;
    fn neg(self) -> Self {
        Self::ZERO - self
    }
}

impl AddAssign for FieldElement {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for FieldElement {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl MulAssign for FieldElement {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl Sum for FieldElement {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a FieldElement> for FieldElement {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + *b)
    }
}

impl Product for FieldElement {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ONE, |a, b| a * b)
    }
}

impl From<u64> for FieldElement {
    fn from(v: u64) -> Self {
        Self::new(v)
    }
}

impl From<u32> for FieldElement {
    fn from(v: u32) -> Self {
        Self(v as u64)
    }
}

impl From<bool> for FieldElement {
    fn from(v: bool) -> Self {
        Self(v as u64)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shorthand used throughout tests and examples.
pub fn fe(v: u64) -> FieldElement {
    FieldElement::new(v)
}
