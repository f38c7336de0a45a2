//! Truncated low-half multiplication with a tunable split parameter, plus the
//! closed forms for the optimal split.
//!
//! The low half of a product can be had for less than a full multiply: one
//! full product of the low `rho` fraction of the operands plus two recursive
//! low-half products of the remainder. The best `rho` depends on the exponent
//! of the underlying multiplier's complexity class.

use crate::limb::Limb;
use crate::mpnat::{add_at, schoolbook_into, FixedNat, MulCounter};

/// Optimal split data for a multiplier of complexity `O(n^alpha)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhoProfile {
    /// Exponent of the multiplier complexity class, in (1, 2].
    pub alpha: f64,
    /// Split point minimizing the truncated-product cost.
    pub rho_hat: f64,
    /// Cost of the truncated product at `rho_hat`, as a fraction of a full
    /// multiply.
    pub c_rho: f64,
}

/// Cost factor of the truncated product at split `rho` for exponent `alpha`.
pub fn c_rho(alpha: f64, rho: f64) -> f64 {
    rho.powf(alpha) / (1.0 - 2.0 * (1.0 - rho).powf(alpha))
}

/// Closed-form optimum: `rho_hat = 1 - 2^(-1/(alpha-1))`.
///
/// Panics if `alpha` is outside (1, 2].
pub fn optimal_rho(alpha: f64) -> RhoProfile {
    assert!(
        alpha > 1.0 && alpha <= 2.0,
        "alpha {} outside (1, 2]",
        alpha
    );
    let rho_hat = 1.0 - 2f64.powf(-1.0 / (alpha - 1.0));
    RhoProfile {
        alpha,
        rho_hat,
        c_rho: c_rho(alpha, rho_hat),
    }
}

/// Low `out_bits` of `a * b`, exactly.
///
/// Split point: the bit index `ceil(rho * (n - 1))` rounded up to a limb
/// boundary, with `n = out_bits`. The low parts are multiplied in full; the
/// two cross products recurse on the remaining width. Below two limbs the
/// full product is computed and truncated.
///
/// Panics if `rho` is outside [0.5, 1] or `out_bits` exceeds the operand
/// width.
pub fn mul_low<L: Limb>(
    a: &FixedNat<L>,
    b: &FixedNat<L>,
    out_bits: u32,
    rho: f64,
    counter: &mut MulCounter,
) -> FixedNat<L> {
    assert!((0.5..=1.0).contains(&rho), "rho {} outside [0.5, 1]", rho);
    assert_eq!(a.width_bits(), b.width_bits(), "operand widths differ");
    assert!(out_bits <= a.width_bits() && out_bits > 0);
    assert_eq!(out_bits % L::BITS, 0, "output width must be limb aligned");

    let out_limbs = (out_bits / L::BITS) as usize;
    let mut out = vec![L::ZERO; out_limbs];
    if rho == 0.5 {
        // At the half split every level peels s = ceil(n/2) and recurses on
        // floor(n/2), so the executed limb products telescope to exactly the
        // triangular set {(i, j) : i + j < n} — the same products the
        // recursion would run, computed in one pass.
        low_triangle_into(
            &mut out,
            &a.limbs()[..out_limbs],
            &b.limbs()[..out_limbs],
            counter,
        );
        return FixedNat::from_limbs(out);
    }
    let mut scratch = vec![L::ZERO; scratch_limbs(out_limbs)];
    mul_low_rec(
        &mut out,
        &a.limbs()[..out_limbs],
        &b.limbs()[..out_limbs],
        rho,
        counter,
        &mut scratch,
    );
    FixedNat::from_limbs(out)
}

/// Low-half product over the index triangle, counting n(n+1)/2 limb products.
pub(crate) fn low_triangle_into<L: Limb>(out: &mut [L], a: &[L], b: &[L], counter: &mut MulCounter) {
    let n = out.len();
    for i in 0..n {
        let mut carry = L::ZERO;
        let ai = a[i];
        for j in 0..n - i {
            let (lo, hi) = ai.carrying_mul_add(b[j], out[i + j], carry);
            out[i + j] = lo;
            carry = hi;
        }
    }
    counter.record_submuls((n * (n + 1) / 2) as u64);
}

fn scratch_limbs(n: usize) -> usize {
    // Each level needs at most 3n limbs of scratch and recurses on less than
    // half the width; 6n covers the whole tree with room to spare.
    6 * n + 8
}

fn split_point<L: Limb>(n_limbs: usize, rho: f64) -> usize {
    let n_bits = (n_limbs as u32 * L::BITS) as f64;
    let raw = (rho * (n_bits - 1.0)).ceil() as usize;
    let s = raw.div_ceil(L::BITS as usize);
    s.clamp(1, n_limbs)
}

fn mul_low_rec<L: Limb>(
    out: &mut [L],
    a: &[L],
    b: &[L],
    rho: f64,
    counter: &mut MulCounter,
    scratch: &mut [L],
) {
    let n = out.len();
    debug_assert!(a.len() == n && b.len() == n);
    debug_assert!(out.iter().all(|&l| l == L::ZERO));

    if n < 2 {
        // Base case: full product, truncated.
        let (full, _) = scratch.split_at_mut(2 * n);
        full.fill(L::ZERO);
        schoolbook_into(full, a, b, counter);
        out.copy_from_slice(&full[..n]);
        return;
    }

    let s = split_point::<L>(n, rho);
    if s == n {
        // rho == 1 degenerates to the full product reduced mod 2^out_bits.
        let (full, _) = scratch.split_at_mut(2 * n);
        full.fill(L::ZERO);
        schoolbook_into(full, a, b, counter);
        out.copy_from_slice(&full[..n]);
        return;
    }
    let r = n - s;

    // P0: full product of the low s-limb parts, low n limbs kept.
    let (p0, rest) = scratch.split_at_mut(2 * s);
    p0.fill(L::ZERO);
    schoolbook_into(p0, &a[..s], &b[..s], counter);
    // Only the low n limbs of P0 land in a result taken mod 2^(n*B).
    let keep = (2 * s).min(n);
    out[..keep].copy_from_slice(&p0[..keep]);

    // P1: low r limbs of (a >> s*B) * (b mod 2^(r*B)), shifted up by s limbs.
    // P2: symmetric.
    let (p1, rest) = rest.split_at_mut(r);
    let (p2, rest) = rest.split_at_mut(r);
    p1.fill(L::ZERO);
    p2.fill(L::ZERO);
    mul_low_rec(p1, &a[s..], &b[..r], rho, counter, rest);
    mul_low_rec(p2, &a[..r], &b[s..], rho, counter, rest);

    // out += (P1 + P2) << s, wrapping at n limbs (the shifted adds cannot
    // carry past the output because the true product's low bits are exact).
    wrapping_add_at(out, s, p1);
    wrapping_add_at(out, s, p2);
    counter.record_add();
    counter.record_add();
}

/// `out[offset..] += value`, discarding any carry out of the top (the output
/// is a residue mod 2^(out.len()*B)).
fn wrapping_add_at<L: Limb>(out: &mut [L], offset: usize, value: &[L]) {
    let room = out.len() - offset;
    let take = value.len().min(room);
    let mut carry = false;
    for (o, &v) in out[offset..].iter_mut().zip(value[..take].iter()) {
        let (s, c) = o.carrying_add(v, carry);
        *o = s;
        carry = c;
    }
    if carry {
        for o in out[offset + take..].iter_mut() {
            let (s, c) = o.carrying_add(L::ZERO, true);
            *o = s;
            if !c {
                return;
            }
        }
    }
}

/// Full low product by plain schoolbook, for cross-checking instrument counts.
#[doc(hidden)]
pub fn mul_low_reference<L: Limb>(
    a: &FixedNat<L>,
    b: &FixedNat<L>,
    out_bits: u32,
    counter: &mut MulCounter,
) -> FixedNat<L> {
    let full = crate::mpnat::mul_schoolbook(a, b, counter);
    full.truncated(out_bits)
}

// keep add_at linked for the doc comment above; it is the growth-checked variant
#[allow(unused_imports)]
use add_at as _add_at_unused;
