//! ECM stage 1 over Z/nZ with x-only Montgomery-curve arithmetic.
//!
//! Curves come from the sigma parametrization (u = sigma^2 - 5, v = 4 sigma)
//! so the group order is divisible by 12; the scalar is the product of all
//! maximal prime powers below the smoothness bound, consumed prime by prime;
//! a single gcd against the final Z coordinate decides the outcome. Failed
//! inversions during curve setup surface their gcd immediately.
//!
//! Every ladder step runs the same instruction sequence regardless of the
//! scalar bits: the swap is masked, the kernel operations are branchless, and
//! the per-bit operation counts are constants.

use core::cmp::Ordering;

use crate::limb::Limb;
use crate::modred::{
    cond_add_after_sub, cond_sub_after_add, from_mont, invert_mod, lazy_add, lazy_sub, mont_mul,
    mont_setup, to_mont, Bound, InvertOutcome, LazyResidue, MontCtx, Strategy,
};
use crate::mpnat::{self, FixedNat, MulCounter};
use crate::Error;

/// Reduction scheduling for the curve kernel.
///
/// `Eager` canonicalizes after every multiplication, addition, and
/// subtraction (the unoptimized baseline). `Lazy` keeps residues below `2m`
/// and reduces only after additions and subtractions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReductionDiscipline {
    Eager,
    Lazy,
}

impl ReductionDiscipline {
    pub fn name(self) -> &'static str {
        match self {
            ReductionDiscipline::Eager => "eager",
            ReductionDiscipline::Lazy => "lazy",
        }
    }
}

/// Kernel configuration: reduction scheduling plus the REDC strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelConfig {
    pub discipline: ReductionDiscipline,
    pub strategy: Strategy,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            discipline: ReductionDiscipline::Lazy,
            strategy: Strategy::OptSchoolbook,
        }
    }
}

impl KernelConfig {
    /// The unoptimized reference kernel: eager reductions, classic REDC.
    pub fn baseline() -> Self {
        Self {
            discipline: ReductionDiscipline::Eager,
            strategy: Strategy::Classic,
        }
    }
}

/// Montgomery curve constant in residue form: `a24 = (A + 2) / 4`.
#[derive(Clone, Debug)]
pub struct CurveParams<'a, L: Limb> {
    ctx: &'a MontCtx<L>,
    a24: LazyResidue<L>,
}

impl<'a, L: Limb> CurveParams<'a, L> {
    pub fn new(ctx: &'a MontCtx<L>, a24: LazyResidue<L>) -> Self {
        Self { ctx, a24 }
    }
    pub fn ctx(&self) -> &'a MontCtx<L> {
        self.ctx
    }
    pub fn a24(&self) -> &LazyResidue<L> {
        &self.a24
    }
}

/// Projective x-only point (X : Z). `Z == 0 (mod n)` encodes the neutral
/// element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XZPoint<L: Limb> {
    pub x: LazyResidue<L>,
    pub z: LazyResidue<L>,
}

impl<L: Limb> XZPoint<L> {
    pub fn is_neutral(&self, ctx: &MontCtx<L>) -> bool {
        from_mont(ctx, &self.z).is_zero()
    }
}

/// One entry of the stage-1 scalar plan: the maximal power of `prime` not
/// exceeding the bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimePower {
    pub prime: u64,
    pub exponent: u32,
    pub power: u64,
}

/// Stage-1 scalar plan: all maximal prime powers below `b1`, in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimePowerPlan {
    pub b1: u64,
    pub entries: Vec<PrimePower>,
    /// Exact bit length of the product of all entries.
    pub k_bitlen: u64,
}

/// Compute the plan for a smoothness bound `b1 >= 2`: primes enumerated by a
/// sieve, exponents maximal with `p^e <= b1 < p^(e+1)`.
pub fn stage1_plan(b1: u64) -> Result<PrimePowerPlan, Error> {
    if b1 < 2 {
        return Err(Error::InvalidConfig("b1 must be at least 2".into()));
    }
    if b1 > (1 << 31) {
        return Err(Error::InvalidConfig(format!(
            "b1 = {} is beyond the supported sieve range",
            b1
        )));
    }
    let primes = sieve(b1 as usize);
    let mut entries = Vec::with_capacity(primes.len());
    let mut k = ProductBits::new();
    for p in primes {
        let mut power = p;
        let mut exponent = 1u32;
        while power <= b1 / p {
            power *= p;
            exponent += 1;
        }
        entries.push(PrimePower {
            prime: p,
            exponent,
            power,
        });
        k.mul_small(power);
    }
    Ok(PrimePowerPlan {
        b1,
        entries,
        k_bitlen: k.bit_len(),
    })
}

fn sieve(bound: usize) -> Vec<u64> {
    let mut composite = vec![false; bound + 1];
    let mut out = Vec::new();
    for p in 2..=bound {
        if !composite[p] {
            out.push(p as u64);
            let mut q = p * p;
            while q <= bound {
                composite[q] = true;
                q += p;
            }
        }
    }
    out
}

/// Exact running product kept only for its bit length.
struct ProductBits {
    limbs: Vec<u64>,
}

impl ProductBits {
    fn new() -> Self {
        Self { limbs: vec![1] }
    }

    fn mul_small(&mut self, f: u64) {
        let mut carry = 0u128;
        for l in self.limbs.iter_mut() {
            let t = (*l as u128) * (f as u128) + carry;
            *l = t as u64;
            carry = t >> 64;
        }
        while carry > 0 {
            self.limbs.push(carry as u64);
            carry >>= 64;
        }
    }

    fn bit_len(&self) -> u64 {
        for (i, &l) in self.limbs.iter().enumerate().rev() {
            if l != 0 {
                return (i as u64 + 1) * 64 - l.leading_zeros() as u64;
            }
        }
        0
    }
}

/// Result of one stage-1 attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome<L: Limb> {
    /// A proper factor `1 < d < n`, verified to divide `n` by construction
    /// (it is a gcd with `n`).
    FactorFound(FixedNat<L>),
    NoFactor,
    TrivialGcdN,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageResult<L: Limb> {
    pub outcome: Outcome<L>,
    pub curves_tried: u32,
    pub counters: MulCounter,
}

/// Curve construction outcome: either a usable curve or a gcd surfaced by a
/// failed inversion (a lucky factor when proper, the whole modulus when the
/// sigma is degenerate).
pub enum CurveOutcome<'a, L: Limb> {
    Curve(CurveParams<'a, L>, XZPoint<L>),
    SharedFactor(FixedNat<L>),
}

/// Small constant as a canonical value under the context (handles tiny
/// moduli by repeated subtraction).
fn small_canonical<L: Limb>(ctx: &MontCtx<L>, v: u64) -> FixedNat<L> {
    let mut x = FixedNat::from_u64(v, ctx.r_exp());
    while mpnat::cmp(&x, ctx.modulus()) != Ordering::Less {
        let (d, _) = mpnat::sub(&x, ctx.modulus());
        x = d;
    }
    x
}

/// Build a curve and starting point from a sigma seed:
/// `u = sigma^2 - 5`, `v = 4 sigma`, `X0 = u^3`, `Z0 = v^3`,
/// `a24 = (v - u)^3 (3u + v) / (16 u^3 v)` with the division a modular
/// inversion; a non-invertible denominator surfaces its gcd with `n`.
pub fn curve_from_sigma<'a, L: Limb>(
    ctx: &'a MontCtx<L>,
    sigma: &FixedNat<L>,
) -> CurveOutcome<'a, L> {
    let strategy = KernelConfig::default().strategy;
    let mut c = MulCounter::new();
    let mul =
        |a: &LazyResidue<L>, b: &LazyResidue<L>, c: &mut MulCounter| mont_mul(ctx, a, b, strategy, c);

    let sm = to_mont(ctx, sigma).relax(Bound::Lt2Rp);
    let five = to_mont(ctx, &small_canonical(ctx, 5)).relax(Bound::Lt2Rp);
    let four = to_mont(ctx, &small_canonical(ctx, 4)).relax(Bound::Lt2Rp);
    let sixteen = to_mont(ctx, &small_canonical(ctx, 16)).relax(Bound::Lt2Rp);

    let s2 = mul(&sm, &sm, &mut c);
    let u = lazy_sub(ctx, &s2, &five, &mut c);
    let v = mul(&four, &sm, &mut c);

    let u2 = mul(&u, &u, &mut c);
    let u3 = mul(&u2, &u, &mut c);
    let v2 = mul(&v, &v, &mut c);
    let v3 = mul(&v2, &v, &mut c);

    let d = lazy_sub(ctx, &v, &u, &mut c);
    let d2 = mul(&d, &d, &mut c);
    let d3 = mul(&d2, &d, &mut c);
    let t = lazy_add(ctx, &u, &u, &mut c);
    let t = lazy_add(ctx, &t, &u, &mut c);
    let w = lazy_add(ctx, &t, &v, &mut c);
    let num = mul(&d3, &w, &mut c);

    let uv = mul(&u3, &v, &mut c);
    let den = mul(&uv, &sixteen, &mut c);
    let den_plain = from_mont(ctx, &den);
    let inv = match invert_mod(ctx, &den_plain) {
        InvertOutcome::Inverse(inv) => inv,
        InvertOutcome::SharedFactor(g) => return CurveOutcome::SharedFactor(g),
    };
    let inv_m = to_mont(ctx, &inv).relax(Bound::Lt2Rp);
    let a24 = mul(&num, &inv_m, &mut c);

    CurveOutcome::Curve(CurveParams { ctx, a24 }, XZPoint { x: u3, z: v3 })
}

// ---------------------------------------------------------------------------
// Kernel operations
// ---------------------------------------------------------------------------

fn k_mul<L: Limb>(
    curve: &CurveParams<'_, L>,
    cfg: KernelConfig,
    a: &LazyResidue<L>,
    b: &LazyResidue<L>,
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    let ctx = curve.ctx;
    let p = mont_mul(ctx, a, b, cfg.strategy, counter);
    match cfg.discipline {
        ReductionDiscipline::Lazy => {
            debug_assert!(mpnat::cmp(p.value(), ctx.two_m()) == Ordering::Less);
            p
        }
        ReductionDiscipline::Eager => {
            let v = cond_sub_after_add(ctx, p.value(), false, counter);
            LazyResidue::new(ctx, v, Bound::Lt2Rp)
        }
    }
}

fn k_add<L: Limb>(
    curve: &CurveParams<'_, L>,
    cfg: KernelConfig,
    a: &LazyResidue<L>,
    b: &LazyResidue<L>,
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    let ctx = curve.ctx;
    match cfg.discipline {
        ReductionDiscipline::Lazy => lazy_add(ctx, a, b, counter),
        ReductionDiscipline::Eager => {
            let (s, carry) = mpnat::add(a.value(), b.value());
            debug_assert!(!carry);
            counter.record_add();
            let v = cond_sub_after_add(ctx, &s, false, counter);
            LazyResidue::new(ctx, v, Bound::Lt2Rp)
        }
    }
}

fn k_sub<L: Limb>(
    curve: &CurveParams<'_, L>,
    cfg: KernelConfig,
    a: &LazyResidue<L>,
    b: &LazyResidue<L>,
    counter: &mut MulCounter,
) -> LazyResidue<L> {
    let ctx = curve.ctx;
    match cfg.discipline {
        ReductionDiscipline::Lazy => lazy_sub(ctx, a, b, counter),
        ReductionDiscipline::Eager => {
            let (d, borrow) = mpnat::sub(a.value(), b.value());
            counter.record_add();
            let v = cond_add_after_sub(ctx, &d, borrow, false, counter);
            LazyResidue::new(ctx, v, Bound::Lt2Rp)
        }
    }
}

/// x-only doubling: `2M + 2S` plus one multiplication by `a24`, with the
/// residue bounds maintained by the kernel discipline.
pub fn xz_double<L: Limb>(
    curve: &CurveParams<'_, L>,
    p: &XZPoint<L>,
    cfg: KernelConfig,
    counter: &mut MulCounter,
) -> XZPoint<L> {
    let a = k_add(curve, cfg, &p.x, &p.z, counter);
    let b = k_sub(curve, cfg, &p.x, &p.z, counter);
    let aa = k_mul(curve, cfg, &a, &a, counter);
    let bb = k_mul(curve, cfg, &b, &b, counter);
    let c = k_sub(curve, cfg, &aa, &bb, counter);
    let t = k_mul(curve, cfg, &curve.a24, &c, counter);
    let d = k_add(curve, cfg, &bb, &t, counter);
    let x2 = k_mul(curve, cfg, &aa, &bb, counter);
    let z2 = k_mul(curve, cfg, &c, &d, counter);
    XZPoint { x: x2, z: z2 }
}

/// x-only differential addition: `4M + 2S`, given `diff = P - Q`.
pub fn xz_diffadd<L: Limb>(
    curve: &CurveParams<'_, L>,
    p: &XZPoint<L>,
    q: &XZPoint<L>,
    diff: &XZPoint<L>,
    cfg: KernelConfig,
    counter: &mut MulCounter,
) -> XZPoint<L> {
    let a = k_add(curve, cfg, &p.x, &p.z, counter);
    let b = k_sub(curve, cfg, &p.x, &p.z, counter);
    let c = k_add(curve, cfg, &q.x, &q.z, counter);
    let d = k_sub(curve, cfg, &q.x, &q.z, counter);
    let da = k_mul(curve, cfg, &d, &a, counter);
    let cb = k_mul(curve, cfg, &c, &b, counter);
    let e = k_add(curve, cfg, &da, &cb, counter);
    let f = k_sub(curve, cfg, &da, &cb, counter);
    let ee = k_mul(curve, cfg, &e, &e, counter);
    let ff = k_mul(curve, cfg, &f, &f, counter);
    let x3 = k_mul(curve, cfg, &diff.z, &ee, counter);
    let z3 = k_mul(curve, cfg, &diff.x, &ff, counter);
    XZPoint { x: x3, z: z3 }
}

/// Branchless swap of two points, selected by `swap`.
fn cswap<L: Limb>(swap: bool, a: &mut XZPoint<L>, b: &mut XZPoint<L>) {
    debug_assert_eq!(a.x.bound(), b.x.bound());
    debug_assert_eq!(a.z.bound(), b.z.bound());
    let mask = L::mask(swap);
    swap_masked(mask, &mut a.x, &mut b.x);
    swap_masked(mask, &mut a.z, &mut b.z);
}

fn swap_masked<L: Limb>(mask: L, a: &mut LazyResidue<L>, b: &mut LazyResidue<L>) {
    let bound = a.bound();
    let mut av = a.value().clone();
    let mut bv = b.value().clone();
    for (x, y) in av.limbs_mut().iter_mut().zip(bv.limbs_mut().iter_mut()) {
        let t = mask.bitand(x.bitxor(*y));
        *x = x.bitxor(t);
        *y = y.bitxor(t);
    }
    // a masked swap preserves both bounds structurally
    *a = LazyResidue::from_parts(av, bound);
    *b = LazyResidue::from_parts(bv, bound);
}

/// Montgomery ladder: one doubling and one differential addition per scalar
/// bit, with masked swaps; the instruction sequence does not depend on the
/// bit values. `s = 0` returns the neutral element by convention.
pub fn ladder<L: Limb>(
    curve: &CurveParams<'_, L>,
    p: &XZPoint<L>,
    s: &FixedNat<L>,
    cfg: KernelConfig,
    counter: &mut MulCounter,
) -> XZPoint<L> {
    let ctx = curve.ctx;
    if s.is_zero() {
        return XZPoint {
            x: to_mont(ctx, &small_canonical(ctx, 1)).relax(Bound::Lt2Rp),
            z: LazyResidue::new(ctx, FixedNat::zero(ctx.r_exp()), Bound::Canonical)
                .relax(Bound::Lt2Rp),
        };
    }
    let base = XZPoint {
        x: p.x.relax(Bound::Lt2Rp),
        z: p.z.relax(Bound::Lt2Rp),
    };
    let mut x0 = base.clone();
    let mut x1 = xz_double(curve, &base, cfg, counter);
    let bits = s.bit_len();
    for i in (0..bits - 1).rev() {
        let bit = s.bit(i);
        cswap(bit, &mut x0, &mut x1);
        let sum = xz_diffadd(curve, &x0, &x1, &base, cfg, counter);
        x0 = xz_double(curve, &x0, cfg, counter);
        x1 = sum;
        cswap(bit, &mut x0, &mut x1);
    }
    x0
}

/// ECM stage 1 against modulus `n` with one curve.
pub fn stage1<L: Limb>(
    n: &FixedNat<L>,
    b1: u64,
    sigma: &FixedNat<L>,
) -> Result<StageResult<L>, Error> {
    let ctx = mont_setup(n)?;
    let plan = stage1_plan(b1)?;
    Ok(stage1_with_ctx(&ctx, &plan, sigma, KernelConfig::default()))
}

/// Stage 1 with shared precomputed context and plan (one curve per call).
pub fn stage1_with_ctx<L: Limb>(
    ctx: &MontCtx<L>,
    plan: &PrimePowerPlan,
    sigma: &FixedNat<L>,
    cfg: KernelConfig,
) -> StageResult<L> {
    let mut counter = MulCounter::new();
    let n = ctx.modulus();

    let (curve, mut point) = match curve_from_sigma(ctx, sigma) {
        CurveOutcome::Curve(c, p) => (c, p),
        CurveOutcome::SharedFactor(g) => {
            let outcome = if mpnat::cmp(&g, n) == Ordering::Equal {
                Outcome::TrivialGcdN
            } else {
                Outcome::FactorFound(g)
            };
            return StageResult {
                outcome,
                curves_tried: 1,
                counters: counter,
            };
        }
    };

    for entry in &plan.entries {
        let s = FixedNat::from_u64(entry.power, 64);
        point = ladder(&curve, &point, &s, cfg, &mut counter);
    }

    // Montgomery form and the lazy representative never disturb an odd-n gcd.
    let g = mpnat::gcd(point.z.value(), n);
    let outcome = if g == FixedNat::from_u64(1, ctx.r_exp()) {
        Outcome::NoFactor
    } else if mpnat::cmp(&g, n) == Ordering::Equal {
        Outcome::TrivialGcdN
    } else {
        Outcome::FactorFound(g)
    };
    StageResult {
        outcome,
        curves_tried: 1,
        counters: counter,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{biguint, SplitMix64};
    use num_bigint::BigUint;

    type Nat = FixedNat<u64>;

    // ------------------------------------------------------------------
    // Affine Montgomery-curve oracle over a small prime field
    // ------------------------------------------------------------------

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    enum Pt {
        Inf,
        At(u64, u64),
    }

    #[derive(Clone, Copy)]
    struct AffineCurve {
        p: u64,
        a: u64,
        b: u64,
    }

    impl AffineCurve {
        fn on_curve(&self, x: u64, y: u64) -> bool {
            let p = self.p;
            (self.b * y % p * y) % p == (((x * x % p + self.a * x) % p * x) % p + x) % p
        }

        fn points(&self) -> Vec<Pt> {
            let mut out = vec![Pt::Inf];
            for x in 0..self.p {
                for y in 0..self.p {
                    if self.on_curve(x, y) {
                        out.push(Pt::At(x, y));
                    }
                }
            }
            out
        }

        fn inv(&self, v: u64) -> u64 {
            let mut e = self.p - 2;
            let mut base = v % self.p;
            let mut acc = 1u64;
            while e > 0 {
                if e & 1 == 1 {
                    acc = acc * base % self.p;
                }
                base = base * base % self.p;
                e >>= 1;
            }
            acc
        }

        fn neg(&self, q: Pt) -> Pt {
            match q {
                Pt::Inf => Pt::Inf,
                Pt::At(x, y) => Pt::At(x, (self.p - y) % self.p),
            }
        }

        fn add(&self, q1: Pt, q2: Pt) -> Pt {
            let p = self.p;
            match (q1, q2) {
                (Pt::Inf, q) | (q, Pt::Inf) => q,
                (Pt::At(x1, y1), Pt::At(x2, y2)) => {
                    if x1 == x2 && (y1 + y2) % p == 0 {
                        return Pt::Inf;
                    }
                    let lambda = if x1 == x2 {
                        // (3x^2 + 2ax + 1) / (2by)
                        let num = (3 * x1 % p * x1 % p + 2 * self.a % p * x1 % p + 1) % p;
                        let den = 2 * self.b % p * y1 % p;
                        num * self.inv(den) % p
                    } else {
                        let num = (y2 + p - y1) % p;
                        let den = (x2 + p - x1) % p;
                        num * self.inv(den) % p
                    };
                    // x3 = b*lambda^2 - a - x1 - x2
                    let x3 = (self.b * lambda % p * lambda % p + 3 * p - self.a - x1 - x2) % p;
                    let y3 = (lambda * ((x1 + p - x3) % p) % p + p - y1) % p;
                    Pt::At(x3, y3)
                }
            }
        }

        fn scalar_mul(&self, k: u64, q: Pt) -> Pt {
            let mut acc = Pt::Inf;
            let mut base = q;
            let mut k = k;
            while k > 0 {
                if k & 1 == 1 {
                    acc = self.add(acc, base);
                }
                base = self.add(base, base);
                k >>= 1;
            }
            acc
        }
    }

    // test curve over F_101: B y^2 = x^3 + A x^2 + x
    const F101_A: u64 = 8;
    const F101_B: u64 = 1;

    fn f101_setup() -> (MontCtx<u64>, u64, AffineCurve) {
        let ctx = mont_setup(&Nat::from_u64(101, 64)).unwrap();
        let helper = AffineCurve { p: 101, a: 0, b: 1 };
        let a24_val = (F101_A + 2) * helper.inv(4) % 101;
        let curve = AffineCurve {
            p: 101,
            a: F101_A,
            b: F101_B,
        };
        (ctx, a24_val, curve)
    }

    fn f101_params(ctx: &MontCtx<u64>, a24_val: u64) -> CurveParams<'_, u64> {
        let a24 = to_mont(ctx, &Nat::from_u64(a24_val, 64)).relax(Bound::Lt2Rp);
        CurveParams::new(ctx, a24)
    }

    fn xz_from_x(ctx: &MontCtx<u64>, x: u64) -> XZPoint<u64> {
        XZPoint {
            x: to_mont(ctx, &Nat::from_u64(x, 64)).relax(Bound::Lt2Rp),
            z: to_mont(ctx, &Nat::from_u64(1, 64)).relax(Bound::Lt2Rp),
        }
    }

    /// Affine x of an (X:Z) pair, or None for the neutral element.
    fn affine_x(ctx: &MontCtx<u64>, pt: &XZPoint<u64>) -> Option<u64> {
        let z = from_mont(ctx, &pt.z);
        if z.is_zero() {
            return None;
        }
        let x = from_mont(ctx, &pt.x);
        match invert_mod(ctx, &z) {
            InvertOutcome::Inverse(zi) => {
                Some((biguint(&x) * biguint(&zi) % 101u32).try_into().unwrap())
            }
            InvertOutcome::SharedFactor(_) => unreachable!("101 is prime"),
        }
    }

    fn oracle_x(q: Pt) -> Option<u64> {
        match q {
            Pt::Inf => None,
            Pt::At(x, _) => Some(x),
        }
    }

    #[test]
    fn f101_curve_is_sane() {
        let (_, _, curve) = f101_setup();
        let pts = curve.points();
        // group order lands in the Hasse window around 102
        assert!(pts.len() >= 82 && pts.len() <= 122, "order {}", pts.len());
        for &q in pts.iter().take(5) {
            assert_eq!(curve.scalar_mul(pts.len() as u64, q), Pt::Inf);
        }
    }

    #[test]
    fn xz_double_matches_affine_oracle_everywhere() {
        let (ctx, a24_val, curve) = f101_setup();
        let cp = f101_params(&ctx, a24_val);
        let mut c = MulCounter::new();
        for q in curve.points() {
            let Pt::At(x, _) = q else { continue };
            let doubled = curve.add(q, q);
            for cfg in [KernelConfig::default(), KernelConfig::baseline()] {
                let got = xz_double(&cp, &xz_from_x(&ctx, x), cfg, &mut c);
                assert_eq!(affine_x(&ctx, &got), oracle_x(doubled), "x={}", x);
            }
        }
    }

    #[test]
    fn xz_double_neutral_stays_neutral() {
        let (ctx, a24_val, _) = f101_setup();
        let cp = f101_params(&ctx, a24_val);
        let neutral = XZPoint {
            x: to_mont(&ctx, &Nat::from_u64(1, 64)).relax(Bound::Lt2Rp),
            z: LazyResidue::new(&ctx, FixedNat::zero(ctx.r_exp()), Bound::Canonical)
                .relax(Bound::Lt2Rp),
        };
        let mut c = MulCounter::new();
        let d = xz_double(&cp, &neutral, KernelConfig::default(), &mut c);
        assert!(d.is_neutral(&ctx));
    }

    #[test]
    fn xz_double_projective_invariance() {
        let (ctx, a24_val, curve) = f101_setup();
        let cp = f101_params(&ctx, a24_val);
        let mut rng = SplitMix64::new(0xec);
        let mut c = MulCounter::new();
        for q in curve.points() {
            let Pt::At(x, _) = q else { continue };
            let lambda = 1 + rng.below(100);
            let lm = to_mont(&ctx, &Nat::from_u64(lambda, 64)).relax(Bound::Lt2Rp);
            let base = xz_from_x(&ctx, x);
            let scaled = XZPoint {
                x: mont_mul(&ctx, &base.x, &lm, Strategy::Classic, &mut c),
                z: mont_mul(&ctx, &base.z, &lm, Strategy::Classic, &mut c),
            };
            let cfg = KernelConfig::default();
            let d1 = xz_double(&cp, &base, cfg, &mut c);
            let d2 = xz_double(&cp, &scaled, cfg, &mut c);
            assert_eq!(affine_x(&ctx, &d1), affine_x(&ctx, &d2));
        }
    }

    #[test]
    fn xz_diffadd_matches_affine_oracle() {
        let (ctx, a24_val, curve) = f101_setup();
        let cp = f101_params(&ctx, a24_val);
        let mut c = MulCounter::new();
        let pts = curve.points();
        let cfg = KernelConfig::default();
        for &p1 in &pts {
            let Pt::At(x1, _) = p1 else { continue };
            for &p2 in &pts {
                let Pt::At(x2, _) = p2 else { continue };
                let diff = curve.add(p1, curve.neg(p2));
                // P == Q is excluded (diff = O), as is a 2-torsion difference
                // (x = 0 multiplies the output Z); both are outside the
                // differential-addition formula's domain and never arise in
                // the ladder, whose difference is always the base point.
                let Pt::At(xd, _) = diff else { continue };
                if xd == 0 {
                    continue;
                }
                let sum = curve.add(p1, p2);
                let got = xz_diffadd(
                    &cp,
                    &xz_from_x(&ctx, x1),
                    &xz_from_x(&ctx, x2),
                    &xz_from_x(&ctx, xd),
                    cfg,
                    &mut c,
                );
                assert_eq!(
                    affine_x(&ctx, &got),
                    oracle_x(sum),
                    "P={} Q={} diff={}",
                    x1,
                    x2,
                    xd
                );
            }
        }
    }

    #[test]
    fn xz_diffadd_projective_invariance() {
        let (ctx, a24_val, curve) = f101_setup();
        let cp = f101_params(&ctx, a24_val);
        let mut rng = SplitMix64::new(0xd1ff);
        let mut c = MulCounter::new();
        let pts = curve.points();
        let cfg = KernelConfig::default();
        let mut checked = 0;
        while checked < 200 {
            let p1 = pts[1 + rng.below(pts.len() as u64 - 1) as usize];
            let p2 = pts[1 + rng.below(pts.len() as u64 - 1) as usize];
            let (Pt::At(x1, _), Pt::At(x2, _)) = (p1, p2) else {
                continue;
            };
            let Pt::At(xd, _) = curve.add(p1, curve.neg(p2)) else {
                continue;
            };
            let scale = |pt: &XZPoint<u64>, l: u64, c: &mut MulCounter| XZPoint {
                x: mont_mul(
                    &ctx,
                    &pt.x,
                    &to_mont(&ctx, &Nat::from_u64(l, 64)).relax(Bound::Lt2Rp),
                    Strategy::Classic,
                    c,
                ),
                z: mont_mul(
                    &ctx,
                    &pt.z,
                    &to_mont(&ctx, &Nat::from_u64(l, 64)).relax(Bound::Lt2Rp),
                    Strategy::Classic,
                    c,
                ),
            };
            let a = scale(&xz_from_x(&ctx, x1), 1 + rng.below(100), &mut c);
            let b = scale(&xz_from_x(&ctx, x2), 1 + rng.below(100), &mut c);
            let d = scale(&xz_from_x(&ctx, xd), 1 + rng.below(100), &mut c);
            let got = xz_diffadd(&cp, &a, &b, &d, cfg, &mut c);
            let want = xz_diffadd(
                &cp,
                &xz_from_x(&ctx, x1),
                &xz_from_x(&ctx, x2),
                &xz_from_x(&ctx, xd),
                cfg,
                &mut c,
            );
            assert_eq!(affine_x(&ctx, &got), affine_x(&ctx, &want));
            checked += 1;
        }
    }

    #[test]
    fn ladder_matches_scalar_mul_oracle() {
        let (ctx, a24_val, curve) = f101_setup();
        let cp = f101_params(&ctx, a24_val);
        let mut c = MulCounter::new();
        let cfg = KernelConfig::default();
        for q in curve.points() {
            let Pt::At(x, _) = q else { continue };
            if x == 0 {
                // order-2 base point: outside the ladder's domain (the
                // difference point must have nonzero x); its doubling is
                // checked separately.
                continue;
            }
            let p_xz = xz_from_x(&ctx, x);
            for s in 1..=50u64 {
                let got = ladder(&cp, &p_xz, &Nat::from_u64(s, 64), cfg, &mut c);
                let want = curve.scalar_mul(s, q);
                assert_eq!(affine_x(&ctx, &got), oracle_x(want), "x={} s={}", x, s);
            }
        }
        // the order-2 point doubles to the neutral element
        let torsion = xz_from_x(&ctx, 0);
        let doubled = xz_double(&cp, &torsion, cfg, &mut c);
        assert!(doubled.is_neutral(&ctx));
    }

    #[test]
    fn ladder_trivial_scalars() {
        let (ctx, a24_val, _) = f101_setup();
        let cp = f101_params(&ctx, a24_val);
        let mut c = MulCounter::new();
        let cfg = KernelConfig::default();
        let p = xz_from_x(&ctx, 3);
        let one = ladder(&cp, &p, &Nat::from_u64(1, 64), cfg, &mut c);
        assert_eq!(affine_x(&ctx, &one), affine_x(&ctx, &p));
        let two = ladder(&cp, &p, &Nat::from_u64(2, 64), cfg, &mut c);
        let dbl = xz_double(&cp, &p, cfg, &mut c);
        assert_eq!(affine_x(&ctx, &two), affine_x(&ctx, &dbl));
        let zero = ladder(&cp, &p, &Nat::zero(64), cfg, &mut c);
        assert!(zero.is_neutral(&ctx));
    }

    #[test]
    fn ladder_cost_is_scalar_independent() {
        let (ctx, a24_val, _) = f101_setup();
        let cp = f101_params(&ctx, a24_val);
        let cfg = KernelConfig::default();
        let p = xz_from_x(&ctx, 3);
        let mut baseline = None;
        for s in 32..64u64 {
            let mut c = MulCounter::new();
            ladder(&cp, &p, &Nat::from_u64(s, 64), cfg, &mut c);
            let sig = (c.mont_muls, c.cond_reductions, c.adds, c.submuls);
            match baseline {
                None => baseline = Some(sig),
                Some(b) => assert_eq!(b, sig, "s={}", s),
            }
        }
    }

    #[test]
    fn plan_examples() {
        let p = stage1_plan(2).unwrap();
        assert_eq!(p.entries.len(), 1);
        assert_eq!(p.entries[0].power, 2);
        assert_eq!(p.k_bitlen, 2);

        let p = stage1_plan(10).unwrap();
        let powers: Vec<u64> = p.entries.iter().map(|e| e.power).collect();
        assert_eq!(powers, vec![8, 9, 5, 7]);
        let k: u64 = powers.iter().product();
        assert_eq!(k, 2520);

        assert!(stage1_plan(1).is_err());
    }

    #[test]
    fn plan_invariants_and_bitlen_oracle() {
        let plan = stage1_plan(8192).unwrap();
        let mut k = BigUint::from(1u8);
        for e in &plan.entries {
            assert!((2..e.prime)
                .take_while(|d| d * d <= e.prime)
                .all(|d| e.prime % d != 0));
            assert!(e.prime <= plan.b1);
            assert_eq!(e.power, e.prime.pow(e.exponent));
            assert!(e.power <= plan.b1);
            assert!(e.power > plan.b1 / e.prime, "exponent not maximal");
            k *= BigUint::from(e.power);
        }
        assert_eq!(plan.k_bitlen, k.bits());
    }

    #[test]
    fn suyama_curve_over_prime_field() {
        // sigma = 6 over F_1009: recover (A, x0), check the curve equation via
        // the quadratic-residue trick, and count points to confirm the
        // 12-divisibility of the group order.
        let p: u64 = 1009;
        let ctx = mont_setup(&Nat::from_u64(p, 64)).unwrap();
        let CurveOutcome::Curve(cp, pt) = curve_from_sigma(&ctx, &Nat::from_u64(6, 64)) else {
            panic!("sigma = 6 must give a curve over F_1009");
        };
        let a24: u64 = biguint(&from_mont(&ctx, &cp.a24)).try_into().unwrap();
        let a = (4 * a24 + p - 2) % p;
        let x_m = from_mont(&ctx, &pt.x);
        let z_m = from_mont(&ctx, &pt.z);
        let InvertOutcome::Inverse(zi) = invert_mod(&ctx, &z_m) else {
            panic!("z0 invertible over a prime field");
        };
        let x0: u64 = (biguint(&x_m) * biguint(&zi) % p).try_into().unwrap();

        // with B = f(x0), y = 1 satisfies B y^2 = x^3 + A x^2 + x at x0, and
        // scaling B by a square does not change the twist class
        let f = |x: u64| (((x * x % p + a * x % p) % p * x) % p + x) % p;
        let b = f(x0);
        assert_ne!(b, 0, "starting point must not be 2-torsion");
        let curve = AffineCurve { p, a, b };
        assert!(curve.on_curve(x0, 1));

        let mut order = 1u64;
        for x in 0..p {
            let fx = f(x);
            if fx == 0 {
                order += 1;
                continue;
            }
            // Euler criterion on fx / b
            let val = fx * curve.inv(b) % p;
            let mut e = (p - 1) / 2;
            let mut base = val;
            let mut acc = 1u64;
            while e > 0 {
                if e & 1 == 1 {
                    acc = acc * base % p;
                }
                base = base * base % p;
                e >>= 1;
            }
            if acc == 1 {
                order += 2;
            }
        }
        assert_eq!(order % 12, 0, "Suyama order {} not divisible by 12", order);
    }

    #[test]
    fn degenerate_sigma_surfaces_gcd() {
        // sigma = 22 over n = 143: v = 88 is divisible by 11, so the a24
        // denominator shares the factor 11 with n.
        let ctx = mont_setup(&Nat::from_u64(143, 64)).unwrap();
        match curve_from_sigma(&ctx, &Nat::from_u64(22, 64)) {
            CurveOutcome::SharedFactor(g) => assert_eq!(g.limbs()[0], 11),
            CurveOutcome::Curve(..) => panic!("expected a degenerate sigma"),
        }
    }

    #[test]
    fn stage1_factors_a_tiny_semiprime() {
        let n = Nat::from_u64(143, 64);
        let mut hits = 0;
        for sigma in 6..40u64 {
            let r = stage1(&n, 18, &Nat::from_u64(sigma, 64)).unwrap();
            if let Outcome::FactorFound(d) = &r.outcome {
                let d = d.limbs()[0];
                assert!(d == 11 || d == 13, "sigma={} d={}", sigma, d);
                hits += 1;
            }
        }
        assert!(hits > 0, "no factor found in the sigma scan");
    }

    #[test]
    fn stage1_rejects_bad_inputs() {
        assert!(stage1(&Nat::from_u64(144, 64), 18, &Nat::from_u64(7, 64)).is_err());
        assert!(stage1(&Nat::from_u64(143, 64), 1, &Nat::from_u64(7, 64)).is_err());
    }

    #[test]
    fn stage1_order_of_prime_powers_is_irrelevant() {
        let n = Nat::from_u64(143, 64);
        let ctx = mont_setup(&n).unwrap();
        let plan = stage1_plan(18).unwrap();
        let mut permuted = plan.clone();
        permuted.entries.reverse();
        for sigma in [6u64, 7, 9, 10, 31] {
            let s = Nat::from_u64(sigma, 64);
            let a = stage1_with_ctx(&ctx, &plan, &s, KernelConfig::default());
            let b = stage1_with_ctx(&ctx, &permuted, &s, KernelConfig::default());
            assert_eq!(a.outcome, b.outcome, "sigma={}", sigma);
        }
    }

    #[test]
    fn eager_and_lazy_disciplines_agree() {
        let n = Nat::from_u64(143, 64);
        let ctx = mont_setup(&n).unwrap();
        let plan = stage1_plan(18).unwrap();
        for sigma in 6..30u64 {
            let s = Nat::from_u64(sigma, 64);
            let lazy = stage1_with_ctx(&ctx, &plan, &s, KernelConfig::default());
            let eager = stage1_with_ctx(&ctx, &plan, &s, KernelConfig::baseline());
            assert_eq!(lazy.outcome, eager.outcome, "sigma={}", sigma);
            if !plan.entries.is_empty() && lazy.counters.mont_muls > 40 {
                assert!(lazy.counters.cond_reductions < eager.counters.cond_reductions);
            }
        }
    }

    #[test]
    fn factors_always_divide_n() {
        let mut rng = SplitMix64::new(0xfac);
        let plan = stage1_plan(64).unwrap();
        for _ in 0..40 {
            let a = 3 + 2 * rng.below(80);
            let b = 3 + 2 * rng.below(80);
            let n_val = a * b;
            let n = Nat::from_u64(n_val, 64);
            let Ok(ctx) = mont_setup(&n) else { continue };
            let sigma = Nat::from_u64(6 + rng.below(n_val - 6), 64);
            let r = stage1_with_ctx(&ctx, &plan, &sigma, KernelConfig::default());
            if let Outcome::FactorFound(d) = r.outcome {
                let d = d.limbs()[0];
                assert!(d > 1 && d < n_val && n_val.is_multiple_of(d), "n={} d={}", n_val, d);
            }
        }
    }
}
