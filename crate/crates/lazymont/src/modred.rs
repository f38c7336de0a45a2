//! Barrett and Montgomery reduction with a lazy residue-bound discipline.
//!
//! The Montgomery context keeps the working width R = 2^r_exp at least two
//! bits wider than the modulus, so products of residues below 2R' (with
//! R' = 2^n >= m) reduce back below 2R' without a trailing conditional
//! subtraction. Conditional reductions after additions and subtractions are
//! branchless: both candidates are computed and one is picked by a single
//! borrow or sign bit.
//!
//! Three REDC strategies share one bit-exact result:
//!  * classic: two full products;
//!  * opt-schoolbook: the high product `b*m` from three half-width products,
//!    with `m0*b0` recovered from the input (`b*m == -a mod R`);
//!  * opt-split: the high product as a Toom-Cook-k pointwise set with the
//!    x=0 product skipped and reconstructed, using 2k-2 instead of 2k-1
//!    sub-multiplications.

use core::cmp::Ordering;

use crate::limb::Limb;
use crate::mpnat::{
    self, add_at, schoolbook_into, toom3_eval, toom3_interpolate, toom_point_product, FixedNat,
    MulCounter, SignedMag,
};
use crate::truncmul;
use crate::Error;

pub(crate) fn align_bits<L: Limb>(bits: u32) -> u32 {
    bits.div_ceil(L::BITS) * L::BITS
}

fn bit_len_of<L: Limb>(limbs: &[L]) -> u32 {
    for (i, &l) in limbs.iter().enumerate().rev() {
        if l != L::ZERO {
            return (i as u32 + 1) * L::BITS - l.leading_zeros();
        }
    }
    0
}

/// Magnitude class of a Montgomery-form residue.
///
/// `R'` is `2^n` for an n-bit modulus; `Lt2Rp` is the class preserved by
/// multiplication chains, `Lt13Over4Rp` the class produced from inputs below
/// `3R'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    Canonical,
    Lt2Rp,
    Lt13Over4Rp,
}

/// REDC implementation choice. All strategies produce bit-identical residues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    Classic,
    OptSchoolbook,
    OptSplitK2,
    OptSplitK3,
}

impl Strategy {
    /// Split strategy for a Toom-Cook order k; orders other than 2 and 3 are
    /// a configuration error.
    pub fn opt_split(k: u32) -> Result<Strategy, Error> {
        match k {
            2 => Ok(Strategy::OptSplitK2),
            3 => Ok(Strategy::OptSplitK3),
            _ => Err(Error::InvalidConfig(format!(
                "unsupported split order k={}",
                k
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Classic => "classic",
            Strategy::OptSchoolbook => "opt-schoolbook",
            Strategy::OptSplitK2 => "opt-k2",
            Strategy::OptSplitK3 => "opt-k3",
        }
    }
}

/// Barrett context: `mu = floor(R^2 / m)` with `R = 2^n`.
#[derive(Clone, Debug)]
pub struct BarrettCtx<L: Limb> {
    m: FixedNat<L>,
    n_bits: u32,
    mu: FixedNat<L>,
}

impl<L: Limb> BarrettCtx<L> {
    pub fn modulus(&self) -> &FixedNat<L> {
        &self.m
    }
    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }
    pub fn mu(&self) -> &FixedNat<L> {
        &self.mu
    }
}

/// Precompute the Barrett context for an odd modulus `m >= 3`.
pub fn barrett_setup<L: Limb>(m: &FixedNat<L>) -> Result<BarrettCtx<L>, Error> {
    check_modulus(m)?;
    let n = m.bit_len();
    // mu = floor(2^(2n) / m), at most n+1 bits.
    let work_bits = align_bits::<L>(2 * n + 1);
    let mu = div_pow2(2 * n, &m.widened_or_self(work_bits));
    Ok(BarrettCtx {
        m: m.shrunk_to_value(),
        n_bits: n,
        mu,
    })
}

/// `a mod m` for `a < m^2`, by one `mu` product and a branchless pick among
/// `r`, `r-m`, `r-2m`.
pub fn barrett_reduce<L: Limb>(ctx: &BarrettCtx<L>, a: &FixedNat<L>) -> FixedNat<L> {
    let n = ctx.n_bits;
    let work_bits = align_bits::<L>(2 * n + 2) + 2 * L::BITS;
    let a_w = a.widened_or_self(work_bits);
    debug_assert!(
        {
            let mut c = MulCounter::new();
            let m_w = ctx.m.widened_or_self(work_bits);
            let m2 = mpnat::mul_schoolbook(&m_w, &m_w, &mut c);
            mpnat::cmp(&a_w.widened(2 * work_bits), &m2) == Ordering::Less
        },
        "barrett_reduce requires a < m^2"
    );

    let mut scratch = MulCounter::new();
    let m_w = ctx.m.widened_or_self(work_bits);
    let mu_w = ctx.mu.widened_or_self(work_bits);

    // q = floor(floor(a / R) * mu / R)
    let q1 = shr_bits(&a_w, n);
    let q2 = mpnat::mul_schoolbook(&q1, &mu_w, &mut scratch);
    let q = shr_bits(&q2, n).truncated(work_bits);

    // r = a - q * m
    let qm = mpnat::mul_schoolbook(&q, &m_w, &mut scratch).truncated(work_bits);
    let (r, borrow) = mpnat::sub(&a_w, &qm);
    debug_assert!(!borrow);

    // r < 3m: return r - 2m, r - m or r, picked branchlessly.
    let two_m = {
        let mut t = m_w.clone();
        let carry = t.shl1_assign();
        debug_assert!(!carry);
        t
    };
    let r = select_sub(&r, &two_m);
    let r = select_sub(&r, &m_w);
    debug_assert!(mpnat::cmp(&r, &m_w) == Ordering::Less);
    r.truncated(align_bits::<L>(n))
}

/// `a - s` when it does not borrow, else `a`; both candidates computed.
fn select_sub<L: Limb>(a: &FixedNat<L>, s: &FixedNat<L>) -> FixedNat<L> {
    let (d, borrow) = mpnat::sub(a, s);
    let keep = L::mask(borrow);
    let mut out = a.clone();
    for (o, &dv) in out.limbs_mut().iter_mut().zip(d.limbs().iter()) {
        *o = L::select(keep, *o, dv);
    }
    out
}

/// Montgomery context for a fixed odd modulus.
///
/// `r_exp` is limb-aligned, covers the modulus plus two headroom bits, and
/// holds an even number of limbs so the split REDC variants can cut the
/// working width exactly in half.
#[derive(Clone, Debug)]
pub struct MontCtx<L: Limb> {
    m: FixedNat<L>,
    n_bits: u32,
    r_exp: u32,
    m_prime: FixedNat<L>,
    two_m: FixedNat<L>,
    r2: FixedNat<L>,
}

impl<L: Limb> MontCtx<L> {
    pub fn modulus(&self) -> &FixedNat<L> {
        &self.m
    }
    /// Bit length of the modulus; `R' = 2^n_bits`.
    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }
    /// `R = 2^r_exp` is the working width.
    pub fn r_exp(&self) -> u32 {
        self.r_exp
    }
    pub fn m_prime(&self) -> &FixedNat<L> {
        &self.m_prime
    }
    pub fn two_m(&self) -> &FixedNat<L> {
        &self.two_m
    }
    /// `R^2 mod m`, the to-Montgomery conversion factor.
    pub fn r_squared(&self) -> &FixedNat<L> {
        &self.r2
    }

    pub fn work_limbs(&self) -> usize {
        (self.r_exp / L::BITS) as usize
    }

    /// True when `value` satisfies `bound` under this context.
    pub fn value_in_bound(&self, value: &FixedNat<L>, bound: Bound) -> bool {
        match bound {
            Bound::Canonical => mpnat::cmp(value, &self.m) == Ordering::Less,
            Bound::Lt2Rp => value.bit_len() <= self.n_bits + 1,
            Bound::Lt13Over4Rp => {
                // 13/4 * R' = 13 * 2^(n-2)
                let thresh = shl_bits(&FixedNat::from_u64(13, self.r_exp), self.n_bits - 2);
                mpnat::cmp(value, &thresh) == Ordering::Less
            }
        }
    }

    /// Test hook: break `m_prime` so the reduction discipline visibly fails.
    #[doc(hidden)]
    pub fn with_corrupted_m_prime(mut self) -> Self {
        let limbs = self.m_prime.limbs_mut();
        limbs[0] = limbs[0].bitxor(L::from_u64(2));
        self
    }
}

/// Montgomery-form residue with a statically tracked magnitude bound.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LazyResidue<L: Limb> {
    value: FixedNat<L>,
    bound: Bound,
}

impl<L: Limb> LazyResidue<L> {
    /// Wrap a raw value with a declared bound. The bound is verified in debug
    /// builds; release builds trust the caller's bound algebra.
    pub fn new(ctx: &MontCtx<L>, value: FixedNat<L>, bound: Bound) -> Self {
        debug_assert_eq!(value.width_bits(), ctx.r_exp);
        debug_assert!(
            ctx.value_in_bound(&value, bound),
            "value {} violates bound {:?}",
            value,
            bound
        );
        Self { value, bound }
    }

    pub fn value(&self) -> &FixedNat<L> {
        &self.value
    }

    pub fn bound(&self) -> Bound {
        self.bound
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    /// Widen the declared bound class (never narrows).
    pub fn relax(&self, bound: Bound) -> Self {
        assert!(bound >= self.bound, "relax() cannot narrow a bound");
        Self {
            value: self.value.clone(),
            bound,
        }
    }

    /// Rewrap without revalidation; for operations that provably preserve
    /// the bound (masked swaps).
    pub(crate) fn from_parts(value: FixedNat<L>, bound: Bound) -> Self {
        Self { value, bound }
    }
}

/// Build the Montgomery context at the smallest usable working width.
pub fn mont_setup<L: Limb>(m: &FixedNat<L>) -> Result<MontCtx<L>, Error> {
    let n = m.bit_len();
    mont_setup_at(m, minimal_r_exp::<L>(n))
}

/// Working width for an n-bit modulus: n plus two headroom bits, rounded up
/// to an even number of limbs.
pub fn minimal_r_exp<L: Limb>(n_bits: u32) -> u32 {
    let mut limbs = (n_bits + 2).div_ceil(L::BITS);
    if limbs % 2 == 1 {
        limbs += 1;
    }
    limbs * L::BITS
}

/// Build the Montgomery context at an explicit working width `r_exp`.
pub fn mont_setup_at<L: Limb>(m: &FixedNat<L>, r_exp: u32) -> Result<MontCtx<L>, Error> {
    check_modulus(m)?;
    let n = m.bit_len();
    if r_exp < n + 2 {
        return Err(Error::ModulusTooWide {
            bits: n,
            capacity: r_exp,
        });
    }
    if !r_exp.is_multiple_of(L::BITS) || !(r_exp / L::BITS).is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "working width {} is not an even number of {}-bit limbs",
            r_exp,
            L::BITS
        )));
    }
    let m_w = m.widened_or_self(r_exp);

    let inv = inv_mod_pow2(m_w.limbs());
    let m_prime = FixedNat::from_limbs(inv).wrapping_neg();
    debug_assert!({
        let mut c = MulCounter::new();
        let prod = mpnat::mul_schoolbook(&m_w, &m_prime, &mut c);
        let mut low = prod.low_limbs(m_w.limb_count());
        let one = FixedNat::from_u64(1, r_exp);
        low.wrapping_add_assign(&one);
        low.is_zero()
    });

    let two_m = {
        let mut t = m_w.clone();
        let carry = t.shl1_assign();
        debug_assert!(!carry);
        t
    };

    let r2 = pow2_mod(2 * r_exp, &m_w);

    Ok(MontCtx {
        m: m_w,
        n_bits: n,
        r_exp,
        m_prime,
        two_m,
        r2,
    })
}

fn check_modulus<L: Limb>(m: &FixedNat<L>) -> Result<(), Error> {
    if m.is_even() {
        return Err(Error::InvalidModulus("modulus must be odd".into()));
    }
    if m.bit_len() < 2 {
        return Err(Error::InvalidModulus("modulus must be at least 3".into()));
    }
    Ok(())
}

/// Inverse of an odd value modulo 2^(limbs * B), by word inverse plus
/// width-doubling Hensel lifting.
fn inv_mod_pow2<L: Limb>(v: &[L]) -> Vec<L> {
    debug_assert!(v[0].bitand(L::ONE) == L::ONE);
    let v0 = v[0];
    let mut x = v0; // correct mod 8 for odd v0
    for _ in 0..6 {
        // x <- x * (2 - v0 * x), doubling the correct bit count
        let t = L::from_u64(2).wrapping_sub(v0.wrapping_mul(x));
        x = x.wrapping_mul(t);
    }
    debug_assert!(v0.wrapping_mul(x) == L::ONE);

    let n = v.len();
    let mut inv = vec![L::ZERO; n];
    inv[0] = x;
    let mut k = 1usize;
    while k < n {
        let k2 = (2 * k).min(n);
        // inv <- inv * (2 - v * inv) mod 2^(k2 * B)
        let vx = mul_low_plain(&v[..k2], &inv[..k2]);
        let mut t = vec![L::ZERO; k2];
        t[0] = L::from_u64(2);
        sub_wrapping(&mut t, &vx);
        let next = mul_low_plain(&inv[..k2], &t);
        inv[..k2].copy_from_slice(&next);
        k = k2;
    }
    inv
}

/// Plain truncated product (no instrumentation): low `a.len()` limbs of `a*b`.
fn mul_low_plain<L: Limb>(a: &[L], b: &[L]) -> Vec<L> {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut out = vec![L::ZERO; n];
    for i in 0..n {
        let mut carry = L::ZERO;
        for j in 0..n - i {
            let (lo, hi) = a[i].carrying_mul_add(b[j], out[i + j], carry);
            out[i + j] = lo;
            carry = hi;
        }
    }
    out
}

fn sub_wrapping<L: Limb>(acc: &mut [L], rhs: &[L]) {
    let mut borrow = false;
    for (a, &b) in acc.iter_mut().zip(rhs.iter()) {
        let (d, bo) = a.borrowing_sub(b, borrow);
        *a = d;
        borrow = bo;
    }
}

/// `2^exp mod m`, by repeated doubling with compare-subtract.
fn pow2_mod<L: Limb>(exp: u32, m: &FixedNat<L>) -> FixedNat<L> {
    let mut t = FixedNat::from_u64(1, m.width_bits());
    for _ in 0..exp {
        let carry = t.shl1_assign();
        debug_assert!(!carry, "doubling escaped the working width");
        if mpnat::cmp(&t, m) != Ordering::Less {
            let (d, borrow) = mpnat::sub(&t, m);
            debug_assert!(!borrow);
            t = d;
        }
    }
    t
}

/// `floor(2^exp / m)` via restoring binary long division.
fn div_pow2<L: Limb>(exp: u32, m: &FixedNat<L>) -> FixedNat<L> {
    let width = m.width_bits();
    let mut q = FixedNat::zero(width);
    let mut rem = FixedNat::zero(width);
    let one = FixedNat::from_u64(1, width);
    for i in (0..=exp).rev() {
        let carry = rem.shl1_assign();
        debug_assert!(!carry);
        if i == exp {
            rem.wrapping_add_assign(&one);
        }
        let qc = q.shl1_assign();
        debug_assert!(!qc);
        if mpnat::cmp(&rem, m) != Ordering::Less {
            let (d, _) = mpnat::sub(&rem, m);
            rem = d;
            q.wrapping_add_assign(&one);
        }
    }
    q
}

pub(crate) fn shr_bits<L: Limb>(a: &FixedNat<L>, k: u32) -> FixedNat<L> {
    let mut out = a.clone();
    let limbs = (k / L::BITS) as usize;
    if limbs > 0 {
        let n = out.limb_count();
        let src: Vec<L> = out.limbs()[limbs.min(n)..].to_vec();
        let out_limbs = out.limbs_mut();
        out_limbs.fill(L::ZERO);
        out_limbs[..src.len()].copy_from_slice(&src);
    }
    let bits = k % L::BITS;
    if bits > 0 {
        let n = out.limb_count();
        let out_limbs = out.limbs_mut();
        for i in 0..n {
            let hi = if i + 1 < n {
                out_limbs[i + 1].shl(L::BITS - bits)
            } else {
                L::ZERO
            };
            out_limbs[i] = out_limbs[i].shr(bits).bitor(hi);
        }
    }
    out
}

pub(crate) fn shl_bits<L: Limb>(a: &FixedNat<L>, k: u32) -> FixedNat<L> {
    debug_assert!(a.bit_len() + k <= a.width_bits());
    shl_bits_wrapping(a, k)
}

fn shl_bits_wrapping<L: Limb>(x: &FixedNat<L>, k: u32) -> FixedNat<L> {
    let n = x.limb_count();
    let limb_shift = (k / L::BITS) as usize;
    let bit_shift = k % L::BITS;
    let mut out = FixedNat::zero(x.width_bits());
    if limb_shift >= n {
        return out;
    }
    for i in (limb_shift..n).rev() {
        let mut v = x.limbs()[i - limb_shift].shl(bit_shift);
        if bit_shift > 0 && i > limb_shift {
            v = v.bitor(x.limbs()[i - limb_shift - 1].shr(L::BITS - bit_shift));
        }
        out.limbs_mut()[i] = v;
    }
    out
}

impl<L: Limb> FixedNat<L> {
    /// Widen if the target is larger; otherwise the value must already fit.
    pub(crate) fn widened_or_self(&self, width_bits: u32) -> FixedNat<L> {
        if width_bits >= self.width_bits() {
            self.widened(width_bits)
        } else {
            debug_assert!(self.bit_len() <= width_bits);
            self.truncated(width_bits)
        }
    }
}

// ---------------------------------------------------------------------------
// REDC
// ---------------------------------------------------------------------------

/// Classic Montgomery reduction in lazy form: computes `a * R^-1 (mod m)` as
/// a residue below `R' + m`, with no trailing conditional subtraction. Uses
/// two full schoolbook products.
pub fn redc_classic<L: Limb>(
    ctx: &MontCtx<L>,
    a: &FixedNat<L>,
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    let wl = ctx.work_limbs();
    let mut scratch = vec![L::ZERO; 4 * wl];
    let (prod, bm) = scratch.split_at_mut(2 * wl);
    schoolbook_into(prod, &a.limbs()[..wl], ctx.m_prime.limbs(), counter);
    schoolbook_into(bm, &prod[..wl], ctx.m.limbs(), counter);
    redc_finish(ctx, a, bm, counter)
}

/// REDC with the high product `b*m` assembled from three half-width products.
/// `m0*b0` is recovered from `b*m == -a (mod R)` instead of being multiplied,
/// so the whole reduction costs half a multiply for `b` plus three quarters
/// for `b*m`.
pub fn redc_opt_schoolbook<L: Limb>(
    ctx: &MontCtx<L>,
    a: &FixedNat<L>,
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    let wl = ctx.work_limbs();
    let h = wl / 2;
    let mut scratch = vec![L::ZERO; wl + (2 * h + 1) + 2 * wl];
    let (b, rest) = scratch.split_at_mut(wl);
    let (cross, bm) = rest.split_at_mut(2 * h + 1);

    // b = a * m' mod R: the half-split truncated product
    truncmul::low_triangle_into(b, &a.limbs()[..wl], ctx.m_prime.limbs(), counter);

    let (m0, m1) = (&ctx.m.limbs()[..h], &ctx.m.limbs()[h..]);
    let (b0, b1) = (&b[..h], &b[h..]);

    // cross = m1*b0 + m0*b1 (two half products, accumulated in place)
    mpnat::schoolbook_acc_into(cross, m1, b0, counter);
    mpnat::schoolbook_acc_into(cross, m0, b1, counter);
    counter.record_add();
    counter.record_add();

    // b*m low half: m0*b0 = -(a + cross*2^(h*B)) mod R, recovered rather
    // than multiplied; high half: the third half product m1*b1.
    bm[..wl].copy_from_slice(&a.limbs()[..wl]);
    {
        let mut carry = false;
        for (d, &c) in bm[h..wl].iter_mut().zip(cross[..wl - h].iter()) {
            let (v, cy) = d.carrying_add(c, carry);
            *d = v;
            carry = cy;
        }
        // two's-complement negation in place
        let mut borrow = false;
        for d in bm[..wl].iter_mut() {
            let (v, bo) = L::ZERO.borrowing_sub(*d, borrow);
            *d = v;
            borrow = bo;
        }
    }
    counter.record_add();
    schoolbook_into(&mut bm[wl..], m1, b1, counter);
    add_at(bm, h, cross);
    counter.record_add();

    redc_finish(ctx, a, bm, counter)
}

/// REDC with the high product computed as a Toom-Cook-k pointwise set, the
/// x = 0 product skipped: its low digits come from `-a`, the low digits of the
/// linear coefficient are reconstructed, and `w0` is then recovered in full.
/// Uses 2k-2 pointwise products instead of 2k-1.
pub fn redc_opt_split<L: Limb>(
    ctx: &MontCtx<L>,
    a: &FixedNat<L>,
    k: u32,
    counter: &mut MulCounter,
) -> Result<LazyResidue<L>, Error> {
    match k {
        2 => Ok(redc_opt_split_k2(ctx, a, counter)),
        3 => Ok(redc_opt_split_k3(ctx, a, counter)),
        _ => Err(Error::InvalidConfig(format!(
            "unsupported split order k={}",
            k
        ))),
    }
}

fn redc_opt_split_k2<L: Limb>(
    ctx: &MontCtx<L>,
    a: &FixedNat<L>,
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    let wl = ctx.work_limbs();
    let h = wl / 2;
    let a_low = a.low_limbs(wl);
    let b = truncmul::mul_low(&a_low, &ctx.m_prime, ctx.r_exp, 0.5, counter);

    let (m0, m1) = (&ctx.m.limbs()[..h], &ctx.m.limbs()[h..]);
    let (b0, b1) = (&b.limbs()[..h], &b.limbs()[h..]);

    // w2 = m1*b1
    let mut w2 = vec![L::ZERO; 2 * h];
    schoolbook_into(&mut w2, m1, b1, counter);

    // w1 = (m0+m1)(b0+b1); carry bits folded in with masked adds so the core
    // product stays at h x h limbs.
    let mut sm = m0.to_vec();
    let mut cm = false;
    for (x, &y) in sm.iter_mut().zip(m1.iter()) {
        let (s, c) = x.carrying_add(y, cm);
        *x = s;
        cm = c;
    }
    let mut sb = b0.to_vec();
    let mut cb = false;
    for (x, &y) in sb.iter_mut().zip(b1.iter()) {
        let (s, c) = x.carrying_add(y, cb);
        *x = s;
        cb = c;
    }
    counter.record_add();
    counter.record_add();
    let mut w1 = vec![L::ZERO; 2 * h + 1];
    schoolbook_into(&mut w1[..2 * h], &sm, &sb, counter);
    mpnat::add_assign_masked(&mut w1[h..], &sb, L::mask(cm));
    mpnat::add_assign_masked(&mut w1[h..], &sm, L::mask(cb));
    mpnat::add_assign_masked(&mut w1[2 * h..], &[L::ONE], L::mask(cm && cb));
    counter.record_add();
    counter.record_add();

    // l0 = (w1 - w2 - w0) mod 2^(h*B), with w0's low digits taken from -a.
    let w0_low = a.low_limbs(h).wrapping_neg();
    let mut l0 = FixedNat::from_limbs(w1[..h].to_vec());
    l0.wrapping_sub_assign(&FixedNat::from_limbs(w2[..h].to_vec()));
    l0.wrapping_sub_assign(&w0_low);
    counter.record_add();
    counter.record_add();

    // w0 = (-a - l0*2^(h*B)) mod R, exact since w0 < R.
    let mut t = a_low.clone();
    let mut l0_shift = FixedNat::zero(ctx.r_exp);
    l0_shift.limbs_mut()[h..].copy_from_slice(l0.limbs());
    t.wrapping_add_assign(&l0_shift);
    let w0 = t.wrapping_neg();
    counter.record_add();

    // c1 = w1 - w0 - w2 in full, then assemble.
    let mut c1 = w1;
    mpnat::sub_assign_slice(&mut c1, w0.limbs());
    mpnat::sub_assign_slice(&mut c1, &w2);
    counter.record_add();
    counter.record_add();

    let mut bm = vec![L::ZERO; 2 * wl];
    bm[..wl].copy_from_slice(w0.limbs());
    add_at(&mut bm, h, &c1);
    add_at(&mut bm, wl, &w2);
    counter.record_add();
    counter.record_add();

    redc_finish(ctx, a, &bm, counter)
}

fn redc_opt_split_k3<L: Limb>(
    ctx: &MontCtx<L>,
    a: &FixedNat<L>,
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    let wl = ctx.work_limbs();
    let h = wl.div_ceil(3);
    debug_assert!(2 * h <= wl);
    let a_low = a.low_limbs(wl);
    let b = truncmul::mul_low(&a_low, &ctx.m_prime, ctx.r_exp, 0.5, counter);

    // Parts, padded to h limbs each.
    let part = |x: &FixedNat<L>, i: usize| -> Vec<L> {
        let lo = (i * h).min(wl);
        let hi = ((i + 1) * h).min(wl);
        let mut p = x.limbs()[lo..hi].to_vec();
        p.resize(h, L::ZERO);
        p
    };
    let (m0, m1, m2) = (part(&ctx.m, 0), part(&ctx.m, 1), part(&ctx.m, 2));
    let (b0, b1, b2) = (part(&b, 0), part(&b, 1), part(&b, 2));

    let em = toom3_eval(&m0, &m1, &m2, h);
    let eb = toom3_eval(&b0, &b1, &b2, h);

    let mut mul = |x: &[L], y: &[L], c: &mut MulCounter| -> Vec<L> {
        let mut prod = vec![L::ZERO; 2 * x.len()];
        schoolbook_into(&mut prod, x, y, c);
        prod
    };

    // Four pointwise products; the x = 0 one is skipped.
    let w1 = toom_point_product(&em[0], &eb[0], &mut mul, counter);
    let w2 = toom_point_product(&em[1], &eb[1], &mut mul, counter);
    let w3 = toom_point_product(&em[2], &eb[2], &mut mul, counter);
    let w4 = SignedMag::from_mag(mul(&m2, &b2, counter));

    // Reconstruct l0 = c1 mod 2^(h*B).
    //
    // Interpolation gives 6*c1 = -3*w0 + K with K = 6*w1 - 2*w2 - w3 + 12*w4,
    // and the reduction congruence gives w0 = -a - c1*2^(h*B) (mod 2^(2h*B)).
    // Substituting: c1 * (6 - 3*2^(h*B)) = 3a + K (mod 2^(h*B+1)). The factor
    // is 2 * 3 * (1 - 2^(h*B-1)); the odd parts are inverted modulo the power
    // of two, and one extra working bit covers the single division by two.
    let ww = h + 1; // container limbs; residues valid modulo 2^((h+1)*B)
    let wrap = |s: &SignedMag<L>| -> FixedNat<L> {
        let mut mag = s.mag.clone();
        if mag.len() < ww {
            mag.resize(ww, L::ZERO);
        }
        let v = FixedNat::from_limbs(mag[..ww].to_vec());
        if s.neg {
            v.wrapping_neg()
        } else {
            v
        }
    };
    let w1w = wrap(&w1);
    let w2w = wrap(&w2);
    let w3w = wrap(&w3);
    let w4w = wrap(&w4);

    let shl_wrap = |x: &FixedNat<L>, k: u32| -> FixedNat<L> { shl_bits_wrapping(x, k) };

    // K = 6w1 - 2w2 - w3 + 12w4 (shifts and adds only)
    let mut kk = shl_wrap(&w1w, 2);
    kk.wrapping_add_assign(&shl_wrap(&w1w, 1));
    kk.wrapping_sub_assign(&shl_wrap(&w2w, 1));
    kk.wrapping_sub_assign(&w3w);
    kk.wrapping_add_assign(&shl_wrap(&w4w, 3));
    kk.wrapping_add_assign(&shl_wrap(&w4w, 2));
    for _ in 0..5 {
        counter.record_add();
    }

    // U = 3a + K
    let a_ww = a.low_limbs(ww);
    let mut u = shl_wrap(&a_ww, 1);
    u.wrapping_add_assign(&a_ww);
    u.wrapping_add_assign(&kk);
    counter.record_add();
    counter.record_add();

    // U is even; U/2 = 3 * (1 - 2^(h*B-1)) * c1 (mod 2^(h*B))
    debug_assert!(u.is_even(), "reconstruction parity violated");
    let s = u.shr1();
    // exact short division by 3: O(h) small-constant work
    let t1 = moddiv3(&s);
    // multiply by (1 - 2^(h*B-1))^-1 == 1 + 2^(h*B-1) (mod 2^(h*B))
    let shift = (h as u32 * L::BITS) - 1;
    let mut c1_low = t1.clone();
    c1_low.wrapping_add_assign(&shl_wrap(&t1, shift));
    counter.record_add();
    let l0 = c1_low.low_limbs(h);

    // w0 = (-a - l0*2^(h*B)) mod 2^(2h*B), exact since w0 < 2^(2h*B).
    let mut t = a.low_limbs(2 * h);
    let mut l0_shift = FixedNat::zero(2 * h as u32 * L::BITS);
    l0_shift.limbs_mut()[h..].copy_from_slice(l0.limbs());
    t.wrapping_add_assign(&l0_shift);
    let w0_val = t.wrapping_neg();
    counter.record_add();
    let mut w0_mag = w0_val.limbs().to_vec();
    w0_mag.resize(2 * h + 2, L::ZERO);
    let w0 = SignedMag::from_mag(w0_mag);

    // Full interpolation with the recovered w0, then assembly.
    let coeffs = toom3_interpolate(&w0, &w1, &w2, &w3, &w4, counter);
    let mut bm = vec![L::ZERO; 2 * wl + 1];
    for (i, c) in coeffs.iter().enumerate() {
        add_at(&mut bm, i * h, c);
        counter.record_add();
    }
    debug_assert_eq!(bm[2 * wl], L::ZERO);
    bm.truncate(2 * wl);

    redc_finish(ctx, a, &bm, counter)
}

/// `y = x / 3 mod 2^width`: exact short division, one small-constant multiply
/// per limb.
fn moddiv3<L: Limb>(x: &FixedNat<L>) -> FixedNat<L> {
    let three = L::from_u64(3);
    let mut inv3 = three;
    for _ in 0..6 {
        let t = L::from_u64(2).wrapping_sub(three.wrapping_mul(inv3));
        inv3 = inv3.wrapping_mul(t);
    }
    debug_assert!(three.wrapping_mul(inv3) == L::ONE);
    let mut out = FixedNat::zero(x.width_bits());
    let mut owed = L::ZERO;
    let mut under = false;
    for i in 0..x.limb_count() {
        let (cur, u) = x.limbs()[i].borrowing_sub(owed, under);
        let q = cur.wrapping_mul(inv3);
        out.limbs_mut()[i] = q;
        // 3*q = cur + carry*2^B; the carry is owed by the next limb.
        let (_, hi) = q.widening_mul(three);
        owed = hi;
        under = u;
    }
    out
}

/// Common tail: `r = (a + b*m) / R`, bound tag from the magnitude of `a`.
///
/// The low halves cancel by construction (`b*m == -a mod R`), so only the
/// high halves are added; the sum of the low halves is exactly `R` whenever
/// the low half of `a` is nonzero, which feeds the carry in.
fn redc_finish<L: Limb>(
    ctx: &MontCtx<L>,
    a: &FixedNat<L>,
    bm: &[L],
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    let wl = ctx.work_limbs();
    debug_assert_eq!(a.limb_count(), 2 * wl, "REDC input must be double width");
    debug_assert_eq!(bm.len(), 2 * wl);
    // No-overflow precondition: a/R + m < R, i.e. the output fits the width.
    debug_assert!(
        {
            let mut carry = false;
            for (&x, &y) in a.limbs()[wl..].iter().zip(ctx.m.limbs().iter()) {
                carry = x.carrying_add(y, carry).1;
            }
            !carry
        },
        "REDC input too large for the working width"
    );
    debug_assert!(
        {
            let mut carry = false;
            let mut all_zero = true;
            for (&x, &y) in a.limbs()[..wl].iter().zip(bm[..wl].iter()) {
                let (s, c) = x.carrying_add(y, carry);
                all_zero &= s == L::ZERO;
                carry = c;
            }
            all_zero
        },
        "b*m must cancel a mod R"
    );

    let a_limbs = a.limbs();
    let mut low_nonzero = L::ZERO;
    for &l in &a_limbs[..wl] {
        low_nonzero = low_nonzero.bitor(l);
    }
    let mut carry = low_nonzero != L::ZERO;
    let mut r = vec![L::ZERO; wl];
    for (i, out) in r.iter_mut().enumerate() {
        let (s, c) = a_limbs[wl + i].carrying_add(bm[wl + i], carry);
        *out = s;
        carry = c;
    }
    counter.record_add();
    debug_assert!(!carry);

    // Bound algebra: inputs below R*R' give outputs below R' + m < 2R';
    // inputs below 9R'^2 (products of values below 3R') stay below 13/4 R'.
    let a_hi_bits = bit_len_of(&a_limbs[wl..]);
    let bound = if a_hi_bits <= ctx.n_bits {
        Bound::Lt2Rp
    } else {
        debug_assert!(
            {
                let thresh = shl_bits(&FixedNat::from_u64(9, 2 * ctx.r_exp), 2 * ctx.n_bits);
                mpnat::cmp(a, &thresh) == Ordering::Less
            },
            "REDC input outside both bound cases"
        );
        Bound::Lt13Over4Rp
    };
    LazyResidue::new(ctx, FixedNat::from_limbs(r), bound)
}

/// Dispatch a REDC by strategy.
pub fn redc<L: Limb>(
    ctx: &MontCtx<L>,
    a: &FixedNat<L>,
    strategy: Strategy,
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    match strategy {
        Strategy::Classic => redc_classic(ctx, a, counter),
        Strategy::OptSchoolbook => redc_opt_schoolbook(ctx, a, counter),
        Strategy::OptSplitK2 => redc_opt_split_k2(ctx, a, counter),
        Strategy::OptSplitK3 => redc_opt_split_k3(ctx, a, counter),
    }
}

// ---------------------------------------------------------------------------
// Conditional reductions
// ---------------------------------------------------------------------------

/// Branchless reduction after an addition: both `a` and `a - m` (or `a - 2m`
/// for the lazy representative range) are computed; the borrow bit picks one.
pub fn cond_sub_after_add<L: Limb>(
    ctx: &MontCtx<L>,
    a: &FixedNat<L>,
    use_two_m: bool,
    counter: &mut MulCounter,
) -> FixedNat<L> {
    let sub = if use_two_m { &ctx.two_m } else { &ctx.m };
    let (d, borrow) = mpnat::sub(a, sub);
    let keep_a = L::mask(borrow);
    let mut out = a.clone();
    for (o, &dv) in out.limbs_mut().iter_mut().zip(d.limbs().iter()) {
        *o = L::select(keep_a, *o, dv);
    }
    counter.record_cond_reduction();
    out
}

/// Branchless reduction after a subtraction. `a` is the two's-complement
/// wrapped difference and `negative` its sign bit; both `a` and `a + m` (or
/// `a + 2m`) are computed and the sign bit picks one.
pub fn cond_add_after_sub<L: Limb>(
    ctx: &MontCtx<L>,
    a: &FixedNat<L>,
    negative: bool,
    use_two_m: bool,
    counter: &mut MulCounter,
) -> FixedNat<L> {
    let addend = if use_two_m { &ctx.two_m } else { &ctx.m };
    let mut fixed = a.clone();
    fixed.wrapping_add_assign(addend);
    let take_fixed = L::mask(negative);
    let mut out = a.clone();
    for (o, &f) in out.limbs_mut().iter_mut().zip(fixed.limbs().iter()) {
        *o = L::select(take_fixed, f, *o);
    }
    counter.record_cond_reduction();
    out
}

// ---------------------------------------------------------------------------
// Montgomery-form operations
// ---------------------------------------------------------------------------

/// Montgomery product under the lazy bound discipline.
///
/// Inputs at or below the `Lt2Rp` class land back in `Lt2Rp` with no
/// conditional reduction at all. Otherwise both values must lie below `3R'`
/// and the result is tagged `Lt13Over4Rp`. Anything else is outside the
/// reduction's coverage and panics.
pub fn mont_mul<L: Limb>(
    ctx: &MontCtx<L>,
    x: &LazyResidue<L>,
    y: &LazyResidue<L>,
    strategy: Strategy,
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    let chain = x.bound <= Bound::Lt2Rp && y.bound <= Bound::Lt2Rp;
    if !chain {
        let three_rp = shl_bits(&FixedNat::from_u64(3, ctx.r_exp), ctx.n_bits);
        let ok = mpnat::cmp(&x.value, &three_rp) == Ordering::Less
            && mpnat::cmp(&y.value, &three_rp) == Ordering::Less;
        assert!(ok, "residue bounds outside the reduction's coverage");
    }
    let prod = mpnat::full_mul_auto(&x.value, &y.value, counter);
    let out = redc(ctx, &prod, strategy, counter);
    counter.record_mont_mul();
    debug_assert!(
        out.bound
            <= if chain {
                Bound::Lt2Rp
            } else {
                Bound::Lt13Over4Rp
            }
    );
    out
}

/// Enter Montgomery form: canonical `x < m` becomes a canonical residue
/// holding `x * R mod m`.
pub fn to_mont<L: Limb>(ctx: &MontCtx<L>, x: &FixedNat<L>) -> LazyResidue<L> {
    let x_w = x.widened_or_self(ctx.r_exp);
    assert!(
        mpnat::cmp(&x_w, &ctx.m) == Ordering::Less,
        "to_mont requires x < m"
    );
    let mut scratch = MulCounter::new();
    let prod = mpnat::full_mul_auto(&x_w, &ctx.r2, &mut scratch);
    let r = redc_classic(ctx, &prod, &mut scratch);
    let v = canonicalize(ctx, r.value(), &mut scratch);
    LazyResidue::new(ctx, v, Bound::Canonical)
}

/// Leave Montgomery form: any in-bound residue becomes its canonical value.
pub fn from_mont<L: Limb>(ctx: &MontCtx<L>, x: &LazyResidue<L>) -> FixedNat<L> {
    let mut scratch = MulCounter::new();
    let wide = x.value.widened(2 * ctx.r_exp);
    let r = redc_classic(ctx, &wide, &mut scratch);
    canonicalize(ctx, r.value(), &mut scratch)
}

/// Reduce a value below `4m` to the canonical range by two branchless steps.
fn canonicalize<L: Limb>(
    ctx: &MontCtx<L>,
    v: &FixedNat<L>,
    counter: &mut MulCounter,
) -> FixedNat<L> {
    let v = cond_sub_after_add(ctx, v, true, counter);
    cond_sub_after_add(ctx, &v, false, counter)
}

/// Lazy residue addition: one wide add and one branchless reduction by `2m`.
/// Inputs must lie below `2m`; the result does too.
pub fn lazy_add<L: Limb>(
    ctx: &MontCtx<L>,
    x: &LazyResidue<L>,
    y: &LazyResidue<L>,
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    debug_assert!(mpnat::cmp(&x.value, &ctx.two_m) == Ordering::Less);
    debug_assert!(mpnat::cmp(&y.value, &ctx.two_m) == Ordering::Less);
    let (s, carry) = mpnat::add(&x.value, &y.value);
    debug_assert!(!carry);
    counter.record_add();
    let v = cond_sub_after_add(ctx, &s, true, counter);
    LazyResidue::new(ctx, v, Bound::Lt2Rp)
}

/// Lazy residue subtraction: one wide sub and one branchless addition of `2m`
/// selected by the borrow bit. Inputs below `2m` stay below `2m`.
pub fn lazy_sub<L: Limb>(
    ctx: &MontCtx<L>,
    x: &LazyResidue<L>,
    y: &LazyResidue<L>,
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    debug_assert!(mpnat::cmp(&x.value, &ctx.two_m) == Ordering::Less);
    debug_assert!(mpnat::cmp(&y.value, &ctx.two_m) == Ordering::Less);
    let (d, borrow) = mpnat::sub(&x.value, &y.value);
    counter.record_add();
    let v = cond_add_after_sub(ctx, &d, borrow, true, counter);
    LazyResidue::new(ctx, v, Bound::Lt2Rp)
}

/// Outcome of a modular inversion attempt against a composite modulus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InvertOutcome<L: Limb> {
    /// `a^-1 mod m`, canonical.
    Inverse(FixedNat<L>),
    /// `gcd(a, m) > 1`; the gcd itself (equal to `m` when `a` is zero).
    SharedFactor(FixedNat<L>),
}

/// Binary extended gcd specialized for an odd modulus. `a` must be canonical.
pub fn invert_mod<L: Limb>(ctx: &MontCtx<L>, a: &FixedNat<L>) -> InvertOutcome<L> {
    let m = &ctx.m;
    let a = a.widened_or_self(ctx.r_exp);
    debug_assert!(mpnat::cmp(&a, m) == Ordering::Less);
    if a.is_zero() {
        return InvertOutcome::SharedFactor(m.clone());
    }

    let width = ctx.r_exp;
    let mut u = a.clone();
    let mut v = m.clone();
    // invariants: x1 * a == u (mod m), x2 * a == v (mod m)
    let mut x1 = FixedNat::from_u64(1, width);
    let mut x2 = FixedNat::zero(width);

    let half_mod = |x: &FixedNat<L>| -> FixedNat<L> {
        if x.is_even() {
            x.shr1()
        } else {
            let (s, carry) = mpnat::add(x, m);
            debug_assert!(!carry, "x + m fits the working width");
            s.shr1()
        }
    };
    let sub_mod = |x: &FixedNat<L>, y: &FixedNat<L>| -> FixedNat<L> {
        let (d, borrow) = mpnat::sub(x, y);
        if borrow {
            let (f, _) = mpnat::add(&d, m);
            f
        } else {
            d
        }
    };

    while !u.is_zero() {
        while u.is_even() {
            u = u.shr1();
            x1 = half_mod(&x1);
        }
        if mpnat::cmp(&u, &v) == Ordering::Less {
            core::mem::swap(&mut u, &mut v);
            core::mem::swap(&mut x1, &mut x2);
        }
        let (d, borrow) = mpnat::sub(&u, &v);
        debug_assert!(!borrow);
        u = d;
        x1 = sub_mod(&x1, &x2);
    }

    if v == FixedNat::from_u64(1, width) {
        InvertOutcome::Inverse(x2)
    } else {
        InvertOutcome::SharedFactor(v)
    }
}
