//! Fixed-width natural-number limb arithmetic.
//!
//! [`FixedNat`] is an unsigned integer with a fixed bit capacity, stored as a
//! little-endian limb vector. Every operation states its output width; there
//! is no implicit truncation. Three interchangeable full-product multipliers
//! are provided (schoolbook, Karatsuba, Toom-3), all instrumented through
//! [`MulCounter`].

use core::cmp::Ordering;
use core::fmt;

use crate::limb::{Limb, Word};

/// Default limb count at which Karatsuba recursion hands off to schoolbook.
pub const KARATSUBA_THRESHOLD_LIMBS: usize = 8;
/// Default limb count at which Toom-3 recursion hands off to schoolbook.
pub const TOOM3_THRESHOLD_LIMBS: usize = 24;

/// Instrumentation record for a computation.
///
/// `submuls` counts limb-level (recursion-leaf) multiplications. Small-constant
/// products and bit shifts inside the evaluation/interpolation steps count as
/// `adds`, matching the usual cost model where only the pointwise products of
/// a split multiplier are charged.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct MulCounter {
    pub submuls: u64,
    pub cond_reductions: u64,
    pub adds: u64,
    /// Modular-level multiplications (one per Montgomery multiply).
    pub mont_muls: u64,
}

impl MulCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub(crate) fn record_submuls(&mut self, n: u64) {
        self.submuls += n;
    }

    #[inline]
    pub(crate) fn record_add(&mut self) {
        self.adds += 1;
    }

    #[inline]
    pub(crate) fn record_cond_reduction(&mut self) {
        self.cond_reductions += 1;
    }

    #[inline]
    pub(crate) fn record_mont_mul(&mut self) {
        self.mont_muls += 1;
    }

    /// Merge another counter into this one.
    pub fn absorb(&mut self, other: &MulCounter) {
        self.submuls += other.submuls;
        self.cond_reductions += other.cond_reductions;
        self.adds += other.adds;
        self.mont_muls += other.mont_muls;
    }
}

/// Fixed-width unsigned multiprecision integer, least-significant limb first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FixedNat<L: Limb = Word> {
    limbs: Vec<L>,
}

impl<L: Limb> FixedNat<L> {
    /// Zero of the given capacity. `width_bits` must be a positive multiple
    /// of the limb size.
    pub fn zero(width_bits: u32) -> Self {
        Self {
            limbs: vec![L::ZERO; Self::limbs_for(width_bits)],
        }
    }

    pub fn from_u64(value: u64, width_bits: u32) -> Self {
        let mut out = Self::zero(width_bits);
        let mut v = value;
        for limb in out.limbs.iter_mut() {
            *limb = L::from_u64(v);
            if L::BITS >= 64 {
                v = 0;
            } else {
                v >>= L::BITS;
            }
            if v == 0 {
                break;
            }
        }
        assert_eq!(v, 0, "value does not fit in {} bits", width_bits);
        out
    }

    pub fn from_limbs(limbs: Vec<L>) -> Self {
        assert!(!limbs.is_empty());
        Self { limbs }
    }

    fn limbs_for(width_bits: u32) -> usize {
        assert!(
            width_bits > 0 && width_bits.is_multiple_of(L::BITS),
            "width {} is not a positive multiple of the {}-bit limb",
            width_bits,
            L::BITS
        );
        (width_bits / L::BITS) as usize
    }

    #[inline]
    pub fn width_bits(&self) -> u32 {
        self.limbs.len() as u32 * L::BITS
    }

    #[inline]
    pub fn limb_count(&self) -> usize {
        self.limbs.len()
    }

    #[inline]
    pub fn limbs(&self) -> &[L] {
        &self.limbs
    }

    #[inline]
    pub(crate) fn limbs_mut(&mut self) -> &mut [L] {
        &mut self.limbs
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == L::ZERO)
    }

    /// Value of bit `i` (0 = least significant).
    pub fn bit(&self, i: u32) -> bool {
        let limb = (i / L::BITS) as usize;
        if limb >= self.limbs.len() {
            return false;
        }
        self.limbs[limb].shr(i % L::BITS).bitand(L::ONE) == L::ONE
    }

    /// Position of the highest set bit plus one; 0 for zero.
    pub fn bit_len(&self) -> u32 {
        for (i, &limb) in self.limbs.iter().enumerate().rev() {
            if limb != L::ZERO {
                return (i as u32 + 1) * L::BITS - limb.leading_zeros();
            }
        }
        0
    }

    pub fn is_even(&self) -> bool {
        self.limbs[0].bitand(L::ONE) == L::ZERO
    }

    /// Copy into a wider capacity, zero-extending.
    pub fn widened(&self, width_bits: u32) -> Self {
        let n = Self::limbs_for(width_bits);
        assert!(n >= self.limbs.len(), "widened() cannot shrink");
        let mut limbs = self.limbs.clone();
        limbs.resize(n, L::ZERO);
        Self { limbs }
    }

    /// Keep only the low `width_bits`, dropping higher limbs.
    pub fn truncated(&self, width_bits: u32) -> Self {
        let n = Self::limbs_for(width_bits);
        assert!(n <= self.limbs.len(), "truncated() cannot grow");
        Self {
            limbs: self.limbs[..n].to_vec(),
        }
    }

    /// Low `n` limbs as a new value.
    pub(crate) fn low_limbs(&self, n: usize) -> Self {
        Self {
            limbs: self.limbs[..n].to_vec(),
        }
    }

    /// Two's-complement negation at this width: `2^width - self` (0 maps to 0).
    pub(crate) fn wrapping_neg(&self) -> Self {
        let mut out = Self {
            limbs: vec![L::ZERO; self.limbs.len()],
        };
        let mut borrow = false;
        for (o, &l) in out.limbs.iter_mut().zip(self.limbs.iter()) {
            let (d, b) = L::ZERO.borrowing_sub(l, borrow);
            *o = d;
            borrow = b;
        }
        out
    }

    pub(crate) fn wrapping_add_assign(&mut self, rhs: &Self) {
        debug_assert_eq!(self.limbs.len(), rhs.limbs.len());
        let mut carry = false;
        for (a, &b) in self.limbs.iter_mut().zip(rhs.limbs.iter()) {
            let (s, c) = a.carrying_add(b, carry);
            *a = s;
            carry = c;
        }
    }

    pub(crate) fn wrapping_sub_assign(&mut self, rhs: &Self) {
        debug_assert_eq!(self.limbs.len(), rhs.limbs.len());
        let mut borrow = false;
        for (a, &b) in self.limbs.iter_mut().zip(rhs.limbs.iter()) {
            let (d, bo) = a.borrowing_sub(b, borrow);
            *a = d;
            borrow = bo;
        }
    }

    /// Logical right shift by one bit.
    pub(crate) fn shr1(&self) -> Self {
        let mut limbs = vec![L::ZERO; self.limbs.len()];
        let mut carry = L::ZERO;
        for (i, &l) in self.limbs.iter().enumerate().rev() {
            limbs[i] = l.shr(1).bitor(carry);
            carry = l.shl(L::BITS - 1);
        }
        Self { limbs }
    }

    /// Left shift by one bit; returns the bit shifted out.
    pub(crate) fn shl1_assign(&mut self) -> bool {
        let mut carry = L::ZERO;
        for l in self.limbs.iter_mut() {
            let next = l.shr(L::BITS - 1);
            *l = l.shl(1).bitor(carry);
            carry = next;
        }
        carry == L::ONE
    }

    /// Lowercase, big-endian, fixed-width zero-padded hexadecimal.
    pub fn to_hex(&self) -> String {
        let digits_per_limb = (L::BITS / 4) as usize;
        let mut s = String::with_capacity(self.limbs.len() * digits_per_limb);
        for &limb in self.limbs.iter().rev() {
            let v = limb.to_u64();
            for d in (0..digits_per_limb).rev() {
                let nib = (v >> (d * 4)) & 0xf;
                s.push(char::from_digit(nib as u32, 16).unwrap());
            }
        }
        s
    }

    /// Parse big-endian hex at the smallest limb-aligned width that holds the
    /// digits. Accepts upper or lower case, no prefix.
    pub fn from_hex(s: &str) -> Result<Self, crate::Error> {
        let bits = (s.len() as u32).max(1) * 4;
        let width = bits.div_ceil(L::BITS) * L::BITS;
        Self::from_hex_width(s, width)
    }

    /// Parse big-endian hex into the given capacity.
    pub fn from_hex_width(s: &str, width_bits: u32) -> Result<Self, crate::Error> {
        if s.is_empty() {
            return Err(crate::Error::InvalidHex("empty string".into()));
        }
        let mut out = Self::zero(width_bits);
        let digits_per_limb = (L::BITS / 4) as usize;
        for (pos, ch) in s.bytes().rev().enumerate() {
            let nib = (ch as char)
                .to_digit(16)
                .ok_or_else(|| crate::Error::InvalidHex(format!("bad digit {:?}", ch as char)))?;
            let limb = pos / digits_per_limb;
            if limb >= out.limbs.len() {
                if nib != 0 {
                    return Err(crate::Error::InvalidHex(format!(
                        "value exceeds {} bits",
                        width_bits
                    )));
                }
                continue;
            }
            let shift = (pos % digits_per_limb) as u32 * 4;
            out.limbs[limb] = out.limbs[limb].bitor(L::from_u64(nib as u64).shl(shift));
        }
        Ok(out)
    }

    /// Widen to `width_bits` if larger, else keep the value (which must fit).
    #[doc(hidden)]
    pub fn widened_to(&self, width_bits: u32) -> Self {
        self.widened_or_self(width_bits)
    }

    /// Smallest power-of-limb width holding the current value, at least one limb.
    pub fn shrunk_to_value(&self) -> Self {
        let mut n = self.limbs.len();
        while n > 1 && self.limbs[n - 1] == L::ZERO {
            n -= 1;
        }
        Self {
            limbs: self.limbs[..n].to_vec(),
        }
    }
}

impl<L: Limb> fmt::Debug for FixedNat<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FixedNat<u{}>({})", L::BITS, self.to_hex())
    }
}

impl<L: Limb> fmt::Display for FixedNat<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

fn assert_same_width<L: Limb>(a: &FixedNat<L>, b: &FixedNat<L>) {
    assert_eq!(
        a.width_bits(),
        b.width_bits(),
        "operand widths differ ({} vs {} bits)",
        a.width_bits(),
        b.width_bits()
    );
}

/// Exact addition: `sum + carry * 2^width == a + b`.
pub fn add<L: Limb>(a: &FixedNat<L>, b: &FixedNat<L>) -> (FixedNat<L>, bool) {
    assert_same_width(a, b);
    let mut out = a.clone();
    let mut carry = false;
    for (o, &r) in out.limbs.iter_mut().zip(b.limbs.iter()) {
        let (s, c) = o.carrying_add(r, carry);
        *o = s;
        carry = c;
    }
    (out, carry)
}

/// Exact subtraction: `diff == a - b + borrow * 2^width`.
pub fn sub<L: Limb>(a: &FixedNat<L>, b: &FixedNat<L>) -> (FixedNat<L>, bool) {
    assert_same_width(a, b);
    let mut out = a.clone();
    let mut borrow = false;
    for (o, &r) in out.limbs.iter_mut().zip(b.limbs.iter()) {
        let (d, bo) = o.borrowing_sub(r, borrow);
        *o = d;
        borrow = bo;
    }
    (out, borrow)
}

/// Integer-order comparison of same-width values.
pub fn cmp<L: Limb>(a: &FixedNat<L>, b: &FixedNat<L>) -> Ordering {
    assert_same_width(a, b);
    cmp_slices(&a.limbs, &b.limbs)
}

pub(crate) fn cmp_slices<L: Limb>(a: &[L], b: &[L]) -> Ordering {
    debug_assert_eq!(a.len(), b.len());
    for (&x, &y) in a.iter().zip(b.iter()).rev() {
        match x.cmp(&y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Schoolbook full product into a zeroed output of `a.len() + b.len()` limbs.
pub(crate) fn schoolbook_into<L: Limb>(out: &mut [L], a: &[L], b: &[L], counter: &mut MulCounter) {
    debug_assert_eq!(out.len(), a.len() + b.len());
    debug_assert!(out.iter().all(|&l| l == L::ZERO));
    for (i, &ai) in a.iter().enumerate() {
        let mut carry = L::ZERO;
        for (j, &bj) in b.iter().enumerate() {
            let (lo, hi) = ai.carrying_mul_add(bj, out[i + j], carry);
            out[i + j] = lo;
            carry = hi;
        }
        out[i + b.len()] = carry;
    }
    counter.record_submuls((a.len() * b.len()) as u64);
}

/// Schoolbook multiply-accumulate: `out += a * b`, carry-propagating through
/// the rest of `out`. Counts the same limb products as `schoolbook_into`.
pub(crate) fn schoolbook_acc_into<L: Limb>(
    out: &mut [L],
    a: &[L],
    b: &[L],
    counter: &mut MulCounter,
) {
    debug_assert!(out.len() >= a.len() + b.len());
    for (i, &ai) in a.iter().enumerate() {
        let mut carry = L::ZERO;
        for (j, &bj) in b.iter().enumerate() {
            let (lo, hi) = ai.carrying_mul_add(bj, out[i + j], carry);
            out[i + j] = lo;
            carry = hi;
        }
        let mut k = i + b.len();
        while carry != L::ZERO {
            let (s, c) = out[k].carrying_add(carry, false);
            out[k] = s;
            carry = if c { L::ONE } else { L::ZERO };
            k += 1;
        }
    }
    counter.record_submuls((a.len() * b.len()) as u64);
}

/// `acc += addend`, carry-propagating through the rest of `acc`.
/// Panics in debug builds if a carry escapes.
pub(crate) fn add_assign_slice<L: Limb>(acc: &mut [L], addend: &[L]) {
    debug_assert!(acc.len() >= addend.len());
    let mut carry = false;
    for (a, &b) in acc.iter_mut().zip(addend.iter()) {
        let (s, c) = a.carrying_add(b, carry);
        *a = s;
        carry = c;
    }
    if carry {
        for a in acc[addend.len()..].iter_mut() {
            let (s, c) = a.carrying_add(L::ZERO, true);
            *a = s;
            carry = c;
            if !carry {
                break;
            }
        }
    }
    debug_assert!(!carry, "carry escaped the accumulator");
}

/// `acc -= subtrahend`, borrowing through the rest of `acc`.
pub(crate) fn sub_assign_slice<L: Limb>(acc: &mut [L], subtrahend: &[L]) {
    debug_assert!(acc.len() >= subtrahend.len());
    let mut borrow = false;
    for (a, &b) in acc.iter_mut().zip(subtrahend.iter()) {
        let (d, bo) = a.borrowing_sub(b, borrow);
        *a = d;
        borrow = bo;
    }
    if borrow {
        for a in acc[subtrahend.len()..].iter_mut() {
            let (d, bo) = a.borrowing_sub(L::ZERO, true);
            *a = d;
            borrow = bo;
            if !borrow {
                break;
            }
        }
    }
    debug_assert!(!borrow, "borrow escaped the accumulator");
}

/// Masked accumulate: `acc += addend & mask`, always executing the full loop.
pub(crate) fn add_assign_masked<L: Limb>(acc: &mut [L], addend: &[L], mask: L) {
    debug_assert!(acc.len() >= addend.len());
    let mut carry = false;
    for (a, &b) in acc.iter_mut().zip(addend.iter()) {
        let (s, c) = a.carrying_add(b.bitand(mask), carry);
        *a = s;
        carry = c;
    }
    for a in acc[addend.len()..].iter_mut() {
        let (s, c) = a.carrying_add(L::ZERO, carry);
        *a = s;
        carry = c;
    }
    debug_assert!(!carry, "carry escaped the accumulator");
}

/// Full product, exact, output width `2 * width`.
///
/// `counter.submuls` grows by the number of limb products executed.
pub fn mul_schoolbook<L: Limb>(
    a: &FixedNat<L>,
    b: &FixedNat<L>,
    counter: &mut MulCounter,
) -> FixedNat<L> {
    assert_same_width(a, b);
    let mut out = vec![L::ZERO; 2 * a.limb_count()];
    schoolbook_into(&mut out, &a.limbs, &b.limbs, counter);
    FixedNat { limbs: out }
}

/// Karatsuba full product; switches to schoolbook below `threshold` limbs.
/// Each recursion level contributes exactly three sub-multiplications.
pub fn mul_karatsuba<L: Limb>(
    a: &FixedNat<L>,
    b: &FixedNat<L>,
    threshold: usize,
    counter: &mut MulCounter,
) -> FixedNat<L> {
    assert_same_width(a, b);
    assert!(threshold >= 1);
    let mut out = vec![L::ZERO; 2 * a.limb_count()];
    karatsuba_rec(&mut out, &a.limbs, &b.limbs, threshold, counter);
    FixedNat { limbs: out }
}

fn karatsuba_rec<L: Limb>(
    out: &mut [L],
    a: &[L],
    b: &[L],
    threshold: usize,
    counter: &mut MulCounter,
) {
    let n = a.len();
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(out.len(), 2 * n);
    // `threshold` is the largest size still handled by schoolbook, so a width
    // of 2^t * threshold splits exactly t times.
    if n <= threshold || n < 2 {
        schoolbook_into(out, a, b, counter);
        return;
    }
    let sp = n.div_ceil(2);
    let (a0, a1) = a.split_at(sp);
    let (b0, b1) = b.split_at(sp);

    // Parts are padded to sp limbs so every level splits uniformly.
    let mut a1p = a1.to_vec();
    a1p.resize(sp, L::ZERO);
    let mut b1p = b1.to_vec();
    b1p.resize(sp, L::ZERO);

    let mut z0 = vec![L::ZERO; 2 * sp];
    karatsuba_rec(&mut z0, a0, &b0[..sp], threshold, counter);
    let mut z2 = vec![L::ZERO; 2 * sp];
    karatsuba_rec(&mut z2, &a1p, &b1p, threshold, counter);

    // (a0 + a1)(b0 + b1) with the carry bits handled by masked adds, keeping
    // the recursive product at sp limbs.
    let mut sa = a0.to_vec();
    let mut ca = false;
    for (x, &y) in sa.iter_mut().zip(a1p.iter()) {
        let (s, c) = x.carrying_add(y, ca);
        *x = s;
        ca = c;
    }
    let mut sb = b0[..sp].to_vec();
    let mut cb = false;
    for (x, &y) in sb.iter_mut().zip(b1p.iter()) {
        let (s, c) = x.carrying_add(y, cb);
        *x = s;
        cb = c;
    }
    counter.record_add();
    counter.record_add();

    // z1 buffer holds (a0+a1)(b0+b1) which needs 2*sp limbs plus two bits.
    let mut z1 = vec![L::ZERO; 2 * sp + 1];
    karatsuba_rec(&mut z1[..2 * sp], &sa, &sb, threshold, counter);
    add_assign_masked(&mut z1[sp..], &sb, L::mask(ca));
    add_assign_masked(&mut z1[sp..], &sa, L::mask(cb));
    add_assign_masked(&mut z1[2 * sp..], &[L::ONE], L::mask(ca && cb));
    counter.record_add();
    counter.record_add();

    // mid = z1 - z0 - z2 >= 0
    sub_assign_slice(&mut z1, &z0);
    sub_assign_slice(&mut z1, &z2);
    counter.record_add();
    counter.record_add();

    out[..2 * sp].copy_from_slice(&z0);
    add_at(out, sp, &z1);
    add_at(out, 2 * sp, &z2);
    counter.record_add();
    counter.record_add();
}

/// `out[offset..] += value`, asserting that limbs of `value` falling past the
/// end of `out` are zero and that no carry escapes.
pub(crate) fn add_at<L: Limb>(out: &mut [L], offset: usize, value: &[L]) {
    let room = out.len() - offset;
    let (fits, beyond) = if value.len() > room {
        value.split_at(room)
    } else {
        (value, &[][..])
    };
    debug_assert!(beyond.iter().all(|&l| l == L::ZERO), "value overflows out");
    add_assign_slice(&mut out[offset..], fits);
}

// ---------------------------------------------------------------------------
// Signed magnitude helpers (internal to the split multipliers)
// ---------------------------------------------------------------------------

/// Sign-and-magnitude integer used for Toom-3 intermediates. Never exposed.
#[derive(Clone, Debug)]
pub(crate) struct SignedMag<L: Limb> {
    pub neg: bool,
    pub mag: Vec<L>,
}

impl<L: Limb> SignedMag<L> {
    pub(crate) fn from_mag(mag: Vec<L>) -> Self {
        Self { neg: false, mag }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.mag.iter().all(|&l| l == L::ZERO)
    }

    fn width_to(&mut self, n: usize) {
        debug_assert!(self.mag.len() <= n || self.mag[n..].iter().all(|&l| l == L::ZERO));
        self.mag.resize(n, L::ZERO);
    }

    pub(crate) fn add(&self, rhs: &Self) -> Self {
        let n = self.mag.len().max(rhs.mag.len()) + 1;
        let mut a = self.clone();
        a.width_to(n);
        let mut b = rhs.clone();
        b.width_to(n);
        if a.neg == b.neg {
            add_assign_slice(&mut a.mag, &b.mag);
            a.normalize()
        } else {
            match cmp_slices(&a.mag, &b.mag) {
                Ordering::Less => {
                    sub_assign_slice(&mut b.mag, &a.mag);
                    b.normalize()
                }
                _ => {
                    sub_assign_slice(&mut a.mag, &b.mag);
                    a.normalize()
                }
            }
        }
    }

    pub(crate) fn sub(&self, rhs: &Self) -> Self {
        let mut r = rhs.clone();
        r.neg = !r.neg;
        self.add(&r)
    }

    fn normalize(mut self) -> Self {
        if self.is_zero() {
            self.neg = false;
        }
        self
    }

    /// Exact halving; the value must be even.
    pub(crate) fn halve_exact(&self) -> Self {
        debug_assert!(self.mag[0].bitand(L::ONE) == L::ZERO, "value is odd");
        let mut mag = vec![L::ZERO; self.mag.len()];
        let mut carry = L::ZERO;
        for (i, &l) in self.mag.iter().enumerate().rev() {
            mag[i] = l.shr(1).bitor(carry);
            carry = l.shl(L::BITS - 1);
        }
        Self {
            neg: self.neg,
            mag,
        }
        .normalize()
    }

    /// Exact division by 3.
    pub(crate) fn div3_exact(&self) -> Self {
        let mut mag = vec![L::ZERO; self.mag.len()];
        let mut rem: u64 = 0;
        for (i, &l) in self.mag.iter().enumerate().rev() {
            // Short division, one limb at a time. L::BITS <= 64 so the
            // dividend fits u128.
            let cur = ((rem as u128) << L::BITS) | l.to_u64() as u128;
            mag[i] = L::from_u64((cur / 3) as u64);
            rem = (cur % 3) as u64;
        }
        debug_assert_eq!(rem, 0, "division by 3 is not exact");
        Self {
            neg: self.neg,
            mag,
        }
        .normalize()
    }

    /// Left shift by fewer than `L::BITS` bits, growing by one limb.
    pub(crate) fn shl_small(&self, bits: u32) -> Self {
        debug_assert!(bits < L::BITS);
        let mut mag = vec![L::ZERO; self.mag.len() + 1];
        if bits == 0 {
            mag[..self.mag.len()].copy_from_slice(&self.mag);
        } else {
            let mut carry = L::ZERO;
            for (i, &l) in self.mag.iter().enumerate() {
                mag[i] = l.shl(bits).bitor(carry);
                carry = l.shr(L::BITS - bits);
            }
            mag[self.mag.len()] = carry;
        }
        Self {
            neg: self.neg,
            mag,
        }
    }

    /// Magnitude as a non-negative value; panics if negative and nonzero.
    pub(crate) fn expect_nonneg(self) -> Vec<L> {
        assert!(!self.neg || self.is_zero(), "expected non-negative value");
        self.mag
    }
}

// ---------------------------------------------------------------------------
// Toom-3
// ---------------------------------------------------------------------------

/// Evaluation of a 3-part operand at one point: `value = (-1)^neg * (mag + ext * 2^(h*B))`
/// where `mag` has `h` limbs and `ext` is a small word (at most 6).
#[derive(Clone, Debug)]
pub(crate) struct ToomEval<L: Limb> {
    pub neg: bool,
    pub mag: Vec<L>,
    pub ext: L,
}

/// Evaluations of `x = x0 + x1*2^(h*B) + x2*2^(2h*B)` at {1, -1, 2}; the
/// points 0 and infinity are the parts `x0` and `x2` themselves.
pub(crate) fn toom3_eval<L: Limb>(x0: &[L], x1: &[L], x2: &[L], h: usize) -> [ToomEval<L>; 3] {
    debug_assert!(x0.len() == h && x1.len() == h && x2.len() == h);

    // x(1) = x0 + x1 + x2
    let mut m1 = x0.to_vec();
    let mut ext1 = 0u64;
    for part in [x1, x2] {
        let mut carry = false;
        for (a, &b) in m1.iter_mut().zip(part.iter()) {
            let (s, c) = a.carrying_add(b, carry);
            *a = s;
            carry = c;
        }
        ext1 += carry as u64;
    }
    let e1 = ToomEval {
        neg: false,
        mag: m1,
        ext: L::from_u64(ext1),
    };

    // x(-1) = (x0 + x2) - x1
    let mut s02 = x0.to_vec();
    let mut carry = false;
    for (a, &b) in s02.iter_mut().zip(x2.iter()) {
        let (s, c) = a.carrying_add(b, carry);
        *a = s;
        carry = c;
    }
    let mut borrow = false;
    for (a, &b) in s02.iter_mut().zip(x1.iter()) {
        let (d, bo) = a.borrowing_sub(b, borrow);
        *a = d;
        borrow = bo;
    }
    let em1 = if borrow && !carry {
        // negative: magnitude is the two's complement of the h-limb result
        let mut mag = vec![L::ZERO; h];
        let mut bo = false;
        for (m, &l) in mag.iter_mut().zip(s02.iter()) {
            let (d, b2) = L::ZERO.borrowing_sub(l, bo);
            *m = d;
            bo = b2;
        }
        ToomEval {
            neg: true,
            mag,
            ext: L::ZERO,
        }
    } else {
        let ext = (carry as i64) - (borrow as i64);
        debug_assert!(ext >= 0);
        ToomEval {
            neg: false,
            mag: s02,
            ext: L::from_u64(ext as u64),
        }
    };

    // x(2) = x0 + 2*(x1 + 2*x2), computed in an (h+1)-limb scratch.
    let mut acc = vec![L::ZERO; h + 1];
    acc[..h].copy_from_slice(x2);
    shl1_slice(&mut acc);
    add_assign_slice(&mut acc, x1);
    shl1_slice(&mut acc);
    add_assign_slice(&mut acc, x0);
    let ext2 = acc[h];
    debug_assert!(ext2.to_u64() <= 6);
    let e2 = ToomEval {
        neg: false,
        mag: acc[..h].to_vec(),
        ext: ext2,
    };

    [e1, em1, e2]
}

fn shl1_slice<L: Limb>(acc: &mut [L]) {
    let mut carry = L::ZERO;
    for l in acc.iter_mut() {
        let next = l.shr(L::BITS - 1);
        *l = l.shl(1).bitor(carry);
        carry = next;
    }
    debug_assert_eq!(carry, L::ZERO);
}

/// Part-product callback used by the Toom pointwise step.
pub(crate) type PartMul<'a, L> = &'a mut dyn FnMut(&[L], &[L], &mut MulCounter) -> Vec<L>;

/// Pointwise product of two evaluations. The core product is `h x h` limbs;
/// the small `ext` words are folded in with masked shifted adds so that the
/// sub-multiplication count stays at the part size.
pub(crate) fn toom_point_product<L: Limb>(
    a: &ToomEval<L>,
    b: &ToomEval<L>,
    mul: PartMul<'_, L>,
    counter: &mut MulCounter,
) -> SignedMag<L> {
    let h = a.mag.len();
    debug_assert_eq!(b.mag.len(), h);
    let core = mul(&a.mag, &b.mag, counter);
    debug_assert_eq!(core.len(), 2 * h);
    // product buffer: 2h limbs for the core, one limb for the ext cross terms,
    // one more for ext*ext.
    let mut buf = vec![L::ZERO; 2 * h + 2];
    buf[..2 * h].copy_from_slice(&core);
    // ext_a * mag_b * 2^(h*B) and ext_b * mag_a * 2^(h*B): the ext words are at
    // most 3 bits, expanded as masked shifted adds.
    for bit in 0..3 {
        let mask_a = L::mask(a.ext.shr(bit).bitand(L::ONE) == L::ONE);
        let shifted_b = shifted_copy(&b.mag, bit);
        add_assign_masked(&mut buf[h..], &shifted_b, mask_a);
        let mask_b = L::mask(b.ext.shr(bit).bitand(L::ONE) == L::ONE);
        let shifted_a = shifted_copy(&a.mag, bit);
        add_assign_masked(&mut buf[h..], &shifted_a, mask_b);
        counter.record_add();
        counter.record_add();
    }
    // ext_a * ext_b * 2^(2h*B): both at most 6, so the product fits one limb
    // even with 8-bit limbs.
    let ee = L::from_u64(a.ext.to_u64() * b.ext.to_u64());
    add_assign_slice(&mut buf[2 * h..], &[ee]);
    counter.record_add();
    SignedMag {
        neg: a.neg ^ b.neg,
        mag: buf,
    }
}

fn shifted_copy<L: Limb>(mag: &[L], bits: u32) -> Vec<L> {
    let mut out = vec![L::ZERO; mag.len() + 1];
    if bits == 0 {
        out[..mag.len()].copy_from_slice(mag);
    } else {
        let mut carry = L::ZERO;
        for (o, &l) in out.iter_mut().zip(mag.iter()) {
            *o = l.shl(bits).bitor(carry);
            carry = l.shr(L::BITS - bits);
        }
        out[mag.len()] = carry;
    }
    out
}

/// Toom-3 full product with evaluation points {0, 1, -1, 2, infinity}.
/// The top level contributes exactly five sub-multiplications; interpolation
/// is exact over the integers (divisions by 2 and 3 leave no remainder).
pub fn mul_toom3<L: Limb>(
    a: &FixedNat<L>,
    b: &FixedNat<L>,
    threshold: usize,
    counter: &mut MulCounter,
) -> FixedNat<L> {
    assert_same_width(a, b);
    assert!(threshold >= 1);
    let mut out = vec![L::ZERO; 2 * a.limb_count()];
    toom3_rec(&mut out, &a.limbs, &b.limbs, threshold, counter);
    FixedNat { limbs: out }
}

fn toom3_rec<L: Limb>(
    out: &mut [L],
    a: &[L],
    b: &[L],
    threshold: usize,
    counter: &mut MulCounter,
) {
    let n = a.len();
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(out.len(), 2 * n);
    if n <= threshold || n < 3 {
        schoolbook_into(out, a, b, counter);
        return;
    }
    let h = n.div_ceil(3);

    // Zero-pad the operands to 3h limbs and split.
    let mut ap = a.to_vec();
    ap.resize(3 * h, L::ZERO);
    let mut bp = b.to_vec();
    bp.resize(3 * h, L::ZERO);
    let (a0, a1, a2) = (&ap[..h], &ap[h..2 * h], &ap[2 * h..]);
    let (b0, b1, b2) = (&bp[..h], &bp[h..2 * h], &bp[2 * h..]);

    let ea = toom3_eval(a0, a1, a2, h);
    let eb = toom3_eval(b0, b1, b2, h);

    let mut mul = |x: &[L], y: &[L], c: &mut MulCounter| -> Vec<L> {
        let mut prod = vec![L::ZERO; 2 * x.len()];
        toom3_rec(&mut prod, x, y, threshold, c);
        prod
    };

    // w0 = a(0) b(0), w4 = a(inf) b(inf): plain part products.
    let w0 = SignedMag::from_mag(mul(a0, b0, counter));
    let w1 = toom_point_product(&ea[0], &eb[0], &mut mul, counter);
    let w2 = toom_point_product(&ea[1], &eb[1], &mut mul, counter);
    let w3 = toom_point_product(&ea[2], &eb[2], &mut mul, counter);
    let w4 = SignedMag::from_mag(mul(a2, b2, counter));

    let coeffs = toom3_interpolate(&w0, &w1, &w2, &w3, &w4, counter);

    // Assemble sum(c_i * 2^(i*h*B)) into a 6h scratch, then truncate to 2n.
    let mut acc = vec![L::ZERO; 6 * h + 1];
    for (i, c) in coeffs.iter().enumerate() {
        add_at(&mut acc, i * h, c);
        counter.record_add();
    }
    debug_assert!(acc[2 * n..].iter().all(|&l| l == L::ZERO));
    out.copy_from_slice(&acc[..2 * n]);
}

/// Interpolate the five product-polynomial coefficients from the point values.
/// Exact over the integers: the divisions by 2 and by 3 leave no remainder.
pub(crate) fn toom3_interpolate<L: Limb>(
    w0: &SignedMag<L>,
    w1: &SignedMag<L>,
    w2: &SignedMag<L>,
    w3: &SignedMag<L>,
    w4: &SignedMag<L>,
    counter: &mut MulCounter,
) -> [Vec<L>; 5] {
    // a = w1 - w0 - w4            (c1 + c2 + c3)
    // b = w2 - w0 - w4            (-c1 + c2 - c3)
    // c = w3 - w0 - 16 w4         (2c1 + 4c2 + 8c3)
    let a = w1.sub(w0).sub(w4);
    let b = w2.sub(w0).sub(w4);
    let c = w3.sub(w0).sub(&w4.shl_small(4));
    for _ in 0..6 {
        counter.record_add();
    }
    let c2 = a.add(&b).halve_exact();
    let d = a.sub(&b).halve_exact(); // c1 + c3
    let e = c.halve_exact(); // c1 + 2c2 + 4c3
    let g = e.sub(&c2.shl_small(1)).sub(&d); // 3 c3
    let c3 = g.div3_exact();
    let c1 = d.sub(&c3);
    for _ in 0..5 {
        counter.record_add();
    }
    [
        w0.mag.clone(),
        c1.expect_nonneg(),
        c2.expect_nonneg(),
        c3.expect_nonneg(),
        w4.mag.clone(),
    ]
}

/// Size-dispatched full product used where no particular multiplier is pinned:
/// schoolbook for small operands, then Karatsuba, then Toom-3. The dispatch
/// depends only on the width, never on the values.
pub(crate) fn full_mul_auto<L: Limb>(
    a: &FixedNat<L>,
    b: &FixedNat<L>,
    counter: &mut MulCounter,
) -> FixedNat<L> {
    let n = a.limb_count();
    if n > TOOM3_THRESHOLD_LIMBS {
        mul_toom3(a, b, TOOM3_THRESHOLD_LIMBS, counter)
    } else if n > KARATSUBA_THRESHOLD_LIMBS {
        mul_karatsuba(a, b, KARATSUBA_THRESHOLD_LIMBS, counter)
    } else {
        mul_schoolbook(a, b, counter)
    }
}

/// Binary gcd. Both operands must share a width; the result keeps it.
pub fn gcd<L: Limb>(a: &FixedNat<L>, b: &FixedNat<L>) -> FixedNat<L> {
    assert_same_width(a, b);
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    let mut u = a.clone();
    let mut v = b.clone();
    let mut shift = 0u32;
    while u.is_even() && v.is_even() {
        u = u.shr1();
        v = v.shr1();
        shift += 1;
    }
    while !u.is_zero() {
        while u.is_even() {
            u = u.shr1();
        }
        while v.is_even() {
            v = v.shr1();
        }
        if cmp(&u, &v) == Ordering::Less {
            core::mem::swap(&mut u, &mut v);
        }
        let (d, borrow) = sub(&u, &v);
        debug_assert!(!borrow);
        u = d;
    }
    let mut g = v;
    for _ in 0..shift {
        let carry = g.shl1_assign();
        debug_assert!(!carry);
    }
    g
}
