//! Shared helpers for the integration suites: arbitrary-precision conversion
//! through the hex interface (keeping the oracle independent of the limb
//! arithmetic) and deterministic value/prime generation.

#![allow(dead_code)] // not every integration target uses every helper

use lazymont::rng::SplitMix64;
use lazymont::{FixedNat, Limb};
use num_bigint::BigUint;

pub fn biguint<L: Limb>(n: &FixedNat<L>) -> BigUint {
    BigUint::parse_bytes(n.to_hex().as_bytes(), 16).unwrap()
}

pub fn nat_from_biguint<L: Limb>(v: &BigUint, width_bits: u32) -> FixedNat<L> {
    FixedNat::from_hex_width(&format!("{:x}", v), width_bits).unwrap()
}

/// Uniform BigUint below 2^bits.
pub fn random_big(rng: &mut SplitMix64, bits: u32) -> BigUint {
    let words = bits.div_ceil(64);
    let mut v = BigUint::ZERO;
    for _ in 0..words {
        v = (v << 64) | BigUint::from(rng.next_u64());
    }
    v & ((BigUint::from(1u8) << bits) - 1u8)
}

/// Random odd modulus with exactly `bits` significant bits.
pub fn odd_modulus<L: Limb>(rng: &mut SplitMix64, bits: u32, width_bits: u32) -> FixedNat<L> {
    assert!(bits >= 2 && bits <= width_bits);
    let v = random_big(rng, bits) | (BigUint::from(1u8) << (bits - 1)) | BigUint::from(1u8);
    nat_from_biguint(&v, width_bits)
}

/// Uniform value strictly below `bound` (seed-stream determined).
pub fn below_nat<L: Limb>(rng: &mut SplitMix64, bound: &FixedNat<L>) -> FixedNat<L> {
    let b = biguint(bound);
    assert!(b > BigUint::ZERO);
    let v = random_big(rng, bound.bit_len() + 64) % &b;
    nat_from_biguint(&v, bound.width_bits())
}

/// Uniform value below 2^bits at the given capacity.
pub fn random_bits_nat<L: Limb>(rng: &mut SplitMix64, bits: u32, width_bits: u32) -> FixedNat<L> {
    nat_from_biguint(&random_big(rng, bits), width_bits)
}

/// Deterministic Miller-Rabin for u64 (the witness set is complete for 64-bit
/// inputs).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d & 1 == 0 {
        d >>= 1;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..r - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic prime in `[lo, hi)` from the seed stream.
pub fn random_prime(rng: &mut SplitMix64, lo: u64, hi: u64) -> u64 {
    loop {
        let cand = (lo + rng.below(hi - lo)) | 1;
        if cand >= 5 && cand < hi && is_prime_u64(cand) {
            return cand;
        }
    }
}
