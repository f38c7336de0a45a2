//! Shared helpers for the in-crate test suites. The arbitrary-precision
//! conversions go through the hex interface so the oracle path stays
//! independent of the limb arithmetic it checks.

use crate::limb::Limb;
use crate::mpnat::FixedNat;
use num_bigint::BigUint;

pub(crate) use crate::rng::SplitMix64;

pub(crate) fn biguint<L: Limb>(n: &FixedNat<L>) -> BigUint {
    BigUint::parse_bytes(n.to_hex().as_bytes(), 16).unwrap()
}

pub(crate) fn nat_from_biguint<L: Limb>(v: &BigUint, width_bits: u32) -> FixedNat<L> {
    FixedNat::from_hex_width(&format!("{:x}", v), width_bits).unwrap()
}

impl SplitMix64 {
    /// Random value of exactly `width_bits` capacity (any bit pattern).
    pub(crate) fn nat<L: Limb>(&mut self, width_bits: u32) -> FixedNat<L> {
        let mut out = FixedNat::<L>::zero(width_bits);
        for limb in out.limbs_mut() {
            *limb = L::from_u64(self.next_u64());
        }
        out
    }

    /// Random odd modulus with exactly `bits` significant bits.
    pub(crate) fn odd_modulus<L: Limb>(&mut self, bits: u32, width_bits: u32) -> FixedNat<L> {
        assert!(bits >= 2 && bits <= width_bits);
        let mut m = FixedNat::<L>::zero(width_bits);
        {
            let limbs = m.limbs_mut();
            for l in limbs.iter_mut() {
                *l = L::from_u64(self.next_u64());
            }
        }
        // clear everything at and above `bits`, then force the top and low bits
        let mut out = FixedNat::<L>::zero(width_bits);
        for i in 0..bits {
            if m.bit(i) {
                set_bit(&mut out, i);
            }
        }
        set_bit(&mut out, bits - 1);
        set_bit(&mut out, 0);
        out
    }

    /// Random value strictly below `bound` (rejection sampling on bit length).
    pub(crate) fn below_nat<L: Limb>(&mut self, bound: &FixedNat<L>) -> FixedNat<L> {
        assert!(!bound.is_zero());
        let bits = bound.bit_len();
        loop {
            let mut cand = FixedNat::<L>::zero(bound.width_bits());
            for i in 0..bits {
                if self.next_u64() & 1 == 1 {
                    set_bit(&mut cand, i);
                }
            }
            if crate::mpnat::cmp(&cand, bound) == core::cmp::Ordering::Less {
                return cand;
            }
        }
    }
}

pub(crate) fn set_bit<L: Limb>(n: &mut FixedNat<L>, i: u32) {
    let limb = (i / L::BITS) as usize;
    let bit = i % L::BITS;
    n.limbs_mut()[limb] = n.limbs_mut()[limb].bitor(L::ONE.shl(bit));
}
