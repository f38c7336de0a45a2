//! Machine-word abstraction for the multiprecision arithmetic.
//!
//! Production code uses [`u64`] limbs. The [`u8`] instance exists so that
//! small-modulus cases can be tested exhaustively; the algorithms are
//! word-size agnostic.

use core::fmt::Debug;
use core::hash::Hash;

/// One machine word of a multiprecision integer.
pub trait Limb:
    Copy + Clone + Debug + Default + Eq + Ord + Hash + Send + Sync + 'static
{
    /// Bit width of the limb.
    const BITS: u32;
    const ZERO: Self;
    const ONE: Self;
    const MAX: Self;

    /// `self + rhs + carry`, returning the low limb and the carry out.
    fn carrying_add(self, rhs: Self, carry: bool) -> (Self, bool);

    /// `self - rhs - borrow`, returning the low limb and the borrow out.
    fn borrowing_sub(self, rhs: Self, borrow: bool) -> (Self, bool);

    /// Full double-width product, returned as `(lo, hi)`.
    fn widening_mul(self, rhs: Self) -> (Self, Self);

    /// `self * rhs + addend + carry` cannot overflow two limbs; returns `(lo, hi)`.
    fn carrying_mul_add(self, rhs: Self, addend: Self, carry: Self) -> (Self, Self);

    fn wrapping_add(self, rhs: Self) -> Self;
    fn wrapping_sub(self, rhs: Self) -> Self;
    fn wrapping_mul(self, rhs: Self) -> Self;
    fn wrapping_neg(self) -> Self;

    fn shl(self, bits: u32) -> Self;
    fn shr(self, bits: u32) -> Self;

    fn bitand(self, rhs: Self) -> Self;
    fn bitor(self, rhs: Self) -> Self;
    fn bitxor(self, rhs: Self) -> Self;
    fn not(self) -> Self;

    fn leading_zeros(self) -> u32;
    fn trailing_zeros(self) -> u32;

    fn from_u64(v: u64) -> Self;
    fn to_u64(self) -> u64;

    /// All-ones mask when `cond` is true, all-zeros otherwise.
    #[inline]
    fn mask(cond: bool) -> Self {
        if cond {
            Self::MAX
        } else {
            Self::ZERO
        }
    }

    /// Branchless select: `a` when `cond` is true, `b` otherwise.
    #[inline]
    fn select(cond_mask: Self, a: Self, b: Self) -> Self {
        a.bitand(cond_mask).bitor(b.bitand(cond_mask.not()))
    }
}

macro_rules! impl_limb {
    ($t:ty, $wide:ty) => {
        impl Limb for $t {
            const BITS: u32 = <$t>::BITS;
            const ZERO: Self = 0;
            const ONE: Self = 1;
            const MAX: Self = <$t>::MAX;

            #[inline]
            fn carrying_add(self, rhs: Self, carry: bool) -> (Self, bool) {
                let (s, c1) = self.overflowing_add(rhs);
                let (s, c2) = s.overflowing_add(carry as $t);
                (s, c1 | c2)
            }

            #[inline]
            fn borrowing_sub(self, rhs: Self, borrow: bool) -> (Self, bool) {
                let (d, b1) = self.overflowing_sub(rhs);
                let (d, b2) = d.overflowing_sub(borrow as $t);
                (d, b1 | b2)
            }

            #[inline]
            fn widening_mul(self, rhs: Self) -> (Self, Self) {
                let wide = (self as $wide) * (rhs as $wide);
                (wide as $t, (wide >> <$t>::BITS) as $t)
            }

            #[inline]
            fn carrying_mul_add(self, rhs: Self, addend: Self, carry: Self) -> (Self, Self) {
                let wide = (self as $wide) * (rhs as $wide)
                    + (addend as $wide)
                    + (carry as $wide);
                (wide as $t, (wide >> <$t>::BITS) as $t)
            }

            #[inline]
            fn wrapping_add(self, rhs: Self) -> Self {
                <$t>::wrapping_add(self, rhs)
            }
            #[inline]
            fn wrapping_sub(self, rhs: Self) -> Self {
                <$t>::wrapping_sub(self, rhs)
            }
            #[inline]
            fn wrapping_mul(self, rhs: Self) -> Self {
                <$t>::wrapping_mul(self, rhs)
            }
            #[inline]
            fn wrapping_neg(self) -> Self {
                <$t>::wrapping_neg(self)
            }

            #[inline]
            fn shl(self, bits: u32) -> Self {
                self << bits
            }
            #[inline]
            fn shr(self, bits: u32) -> Self {
                self >> bits
            }

            #[inline]
            fn bitand(self, rhs: Self) -> Self {
                self & rhs
            }
            #[inline]
            fn bitor(self, rhs: Self) -> Self {
                self | rhs
            }
            #[inline]
            fn bitxor(self, rhs: Self) -> Self {
                self ^ rhs
            }
            #[inline]
            fn not(self) -> Self {
                !self
            }

            #[inline]
            fn leading_zeros(self) -> u32 {
                <$t>::leading_zeros(self)
            }
            #[inline]
            fn trailing_zeros(self) -> u32 {
                <$t>::trailing_zeros(self)
            }

            #[inline]
            fn from_u64(v: u64) -> Self {
                v as $t
            }
            #[inline]
            fn to_u64(self) -> u64 {
                self as u64
            }
        }
    };
}

impl_limb!(u8, u16);
impl_limb!(u32, u64);
impl_limb!(u64, u128);

/// Default production limb.
pub type Word = u64;
