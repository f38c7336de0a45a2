//! Built-in verification suites for the `selftest` command.
//!
//! Four suites: dual-route reduction equivalence (Barrett against the
//! Montgomery pipeline, plus strategy bit-identity), residue bound classes,
//! instrumentation counters, and the curve group law against an affine
//! oracle over a small prime field. A fault hook corrupts a precomputed
//! context so a broken build fails loudly rather than silently.

use core::cmp::Ordering;

use crate::ecm::{ladder, CurveParams, KernelConfig, XZPoint};
use crate::limb::Word;
use crate::modred::{
    barrett_reduce, barrett_setup, cond_sub_after_add, from_mont, invert_mod, mont_mul,
    mont_setup, redc_classic, redc_opt_schoolbook, redc_opt_split, to_mont, Bound, InvertOutcome,
    LazyResidue, Strategy,
};
use crate::mpnat::{self, mul_karatsuba, mul_schoolbook, mul_toom3, FixedNat, MulCounter};
use crate::rng::SplitMix64;
use crate::truncmul::mul_low;

type Nat = FixedNat<Word>;

#[derive(Clone, Debug, serde::Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: u64,
    pub detail: String,
}

/// Run all suites; `inject_fault` corrupts a Montgomery context first so the
/// bound suite must fail.
pub fn run_selftest(inject_fault: bool) -> Vec<SuiteResult> {
    vec![
        guard("oracle-equivalence", suite_oracle_equivalence),
        guard("lemma-bounds", move || suite_lemma_bounds(inject_fault)),
        guard("counters", suite_counters),
        guard("group-law-f101", suite_group_law),
    ]
}

/// A panic inside a suite (a tripped debug assertion) counts as a failure.
fn guard(name: &'static str, f: impl Fn() -> Result<u64, String>) -> SuiteResult {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(cases)) => SuiteResult {
            name,
            passed: true,
            cases,
            detail: "ok".into(),
        },
        Ok(Err(detail)) => SuiteResult {
            name,
            passed: false,
            cases: 0,
            detail,
        },
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            SuiteResult {
                name,
                passed: false,
                cases: 0,
                detail: format!("panicked: {}", msg),
            }
        }
    }
}

/// Barrett and the Montgomery pipeline agree, and all REDC strategies are
/// bit-identical.
fn suite_oracle_equivalence() -> Result<u64, String> {
    let mut rng = SplitMix64::new(0x0417);
    let mut cases = 0u64;
    for _ in 0..400 {
        let bits = 8 + (rng.below(24) as u32);
        let m = random_odd_modulus(&mut rng, bits);
        let bctx = barrett_setup(&m).map_err(|e| e.to_string())?;
        let mctx = mont_setup(&m).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            // a < m^2 via a = lo * m + r with lo, r < m
            let a = {
                let mut c = MulCounter::new();
                let lo = below(&mut rng, &m);
                let r = below(&mut rng, &m);
                let p = mul_schoolbook(&lo, &m, &mut c).truncated(64.max(m.width_bits()));
                let (s, _) = mpnat::add(&p, &r);
                s
            };
            let want = barrett_reduce(&bctx, &a);

            let mut c = MulCounter::new();
            let wide = a.widened(2 * mctx.r_exp());
            let t = redc_classic(&mctx, &wide, &mut c);
            let r2 = LazyResidue::new(&mctx, mctx.r_squared().clone(), Bound::Canonical);
            let back = mont_mul(&mctx, &t, &r2, Strategy::Classic, &mut c);
            let v = cond_sub_after_add(&mctx, back.value(), true, &mut c);
            let got = cond_sub_after_add(&mctx, &v, false, &mut c);
            if mpnat::cmp(&got, &want.widened_or_self(got.width_bits())) != Ordering::Equal {
                return Err(format!("barrett/montgomery mismatch at m={}", m));
            }

            // strategy bit-identity on the same input
            let classic = redc_classic(&mctx, &wide, &mut c);
            for (name, res) in [
                ("opt-schoolbook", redc_opt_schoolbook(&mctx, &wide, &mut c)),
                (
                    "opt-k2",
                    redc_opt_split(&mctx, &wide, 2, &mut c).map_err(|e| e.to_string())?,
                ),
                (
                    "opt-k3",
                    redc_opt_split(&mctx, &wide, 3, &mut c).map_err(|e| e.to_string())?,
                ),
            ] {
                if res.value() != classic.value() {
                    return Err(format!("strategy {} diverged at m={}", name, m));
                }
            }
            cases += 1;
        }
    }
    Ok(cases)
}

/// Montgomery multiplication keeps residues inside their declared classes.
fn suite_lemma_bounds(inject_fault: bool) -> Result<u64, String> {
    let mut rng = SplitMix64::new(0xb0b);
    let mut cases = 0u64;
    for trial in 0..400 {
        let bits = 8 + (rng.below(40) as u32);
        let m = random_odd_modulus(&mut rng, bits);
        let mut ctx = mont_setup(&m).map_err(|e| e.to_string())?;
        if inject_fault && trial == 0 {
            ctx = ctx.with_corrupted_m_prime();
        }
        let two_rp_bits = ctx.n_bits() + 1;
        for _ in 0..25 {
            let x = LazyResidue::new(&ctx, random_below_bits(&mut rng, &ctx, two_rp_bits), Bound::Lt2Rp);
            let y = LazyResidue::new(&ctx, random_below_bits(&mut rng, &ctx, two_rp_bits), Bound::Lt2Rp);
            let mut c = MulCounter::new();
            let out = mont_mul(&ctx, &x, &y, Strategy::OptSchoolbook, &mut c);
            if out.value().bit_len() > ctx.n_bits() + 1 {
                return Err(format!("2R' chain bound violated at m={}", m));
            }
            // congruence cross-check against the classic strategy
            let out2 = mont_mul(&ctx, &x, &y, Strategy::Classic, &mut c);
            if out.value() != out2.value() {
                return Err(format!("strategies diverged at m={}", m));
            }
            cases += 1;
        }
    }
    Ok(cases)
}

/// Counter laws: leaf counts for the split multipliers and the sub-product
/// savings of the optimized reductions.
fn suite_counters() -> Result<u64, String> {
    let mut rng = SplitMix64::new(0xc0);
    let mut cases = 0u64;

    // Karatsuba level law: width 2^t * threshold
    for t in 0..4u32 {
        let limbs = (1usize << t) * 2;
        let a = random_nat(&mut rng, limbs as u32 * 64);
        let mut c = MulCounter::new();
        mul_karatsuba(&a, &a, 2, &mut c);
        let want = 3u64.pow(t) * 4;
        if c.submuls != want {
            return Err(format!("karatsuba law broke at t={}: {}", t, c.submuls));
        }
        cases += 1;
    }

    // Toom-3 top level contributes five sub-multiplications.
    let a = random_nat(&mut rng, 192);
    let mut c = MulCounter::new();
    mul_toom3(&a, &a, 1, &mut c);
    if c.submuls != 5 {
        return Err(format!("toom-3 top level counted {}", c.submuls));
    }
    cases += 1;

    // Reduction sub-product counts at a 250-bit modulus.
    let m = random_odd_modulus(&mut rng, 250);
    let ctx = mont_setup(&m).map_err(|e| e.to_string())?;
    let wl = ctx.work_limbs() as u64;
    let a = random_nat(&mut rng, 2 * ctx.r_exp());
    let a = mask_bits(&a, ctx.r_exp() + ctx.n_bits());
    let mut c_low = MulCounter::new();
    mul_low(
        &a.low_limbs(ctx.work_limbs()),
        ctx.m_prime(),
        ctx.r_exp(),
        0.5,
        &mut c_low,
    );
    let mut c = MulCounter::new();
    redc_opt_schoolbook(&ctx, &a, &mut c);
    if c.submuls - c_low.submuls != 3 * (wl / 2) * (wl / 2) {
        return Err("opt-schoolbook is not three half products".into());
    }
    let mut c = MulCounter::new();
    redc_classic(&ctx, &a, &mut c);
    if c.submuls != 2 * wl * wl {
        return Err("classic is not two full products".into());
    }
    let mut c = MulCounter::new();
    redc_opt_split(&ctx, &a, 2, &mut c).map_err(|e| e.to_string())?;
    if c.submuls - c_low.submuls != 2 * (wl / 2) * (wl / 2) {
        return Err("k2 split is not two sub-multiplications".into());
    }
    let mut c = MulCounter::new();
    redc_opt_split(&ctx, &a, 3, &mut c).map_err(|e| e.to_string())?;
    let h3 = wl.div_ceil(3);
    if c.submuls - c_low.submuls != 4 * h3 * h3 {
        return Err("k3 split is not four sub-multiplications".into());
    }
    cases += 4;

    Ok(cases)
}

/// Doubling and the ladder against an affine oracle over F_101.
fn suite_group_law() -> Result<u64, String> {
    const P: u64 = 101;
    const A: u64 = 8;

    let p_inv = |v: u64| -> u64 {
        let mut e = P - 2;
        let (mut b, mut acc) = (v % P, 1u64);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b % P;
            }
            b = b * b % P;
            e >>= 1;
        }
        acc
    };
    let f = |x: u64| (((x * x % P + A * x) % P * x) % P + x) % P;
    // affine point - scalar multiplication oracle on y^2 = f(x)
    let oracle_add = |p1: Option<(u64, u64)>, p2: Option<(u64, u64)>| -> Option<(u64, u64)> {
        match (p1, p2) {
            (None, q) | (q, None) => q,
            (Some((x1, y1)), Some((x2, y2))) => {
                if x1 == x2 && (y1 + y2) % P == 0 {
                    return None;
                }
                let l = if x1 == x2 {
                    (3 * x1 % P * x1 % P + 2 * A % P * x1 % P + 1) % P * p_inv(2 * y1 % P) % P
                } else {
                    (y2 + P - y1) % P * p_inv((x2 + P - x1) % P) % P
                };
                let x3 = (l * l % P + 3 * P - A - x1 - x2) % P;
                Some((x3, (l * ((x1 + P - x3) % P) % P + P - y1) % P))
            }
        }
    };

    let ctx = mont_setup(&Nat::from_u64(P, 64)).map_err(|e| e.to_string())?;
    let a24 = to_mont(&ctx, &Nat::from_u64((A + 2) * p_inv(4) % P, 64)).relax(Bound::Lt2Rp);
    let curve = CurveParams::new(&ctx, a24);
    let cfg = KernelConfig::default();

    let mut cases = 0u64;
    for x in 1..P {
        let fx = f(x);
        // points only where y exists
        let mut y = None;
        for cand in 0..P {
            if cand * cand % P == fx {
                y = Some(cand);
                break;
            }
        }
        let Some(y) = y else { continue };
        let start = XZPoint {
            x: to_mont(&ctx, &Nat::from_u64(x, 64)).relax(Bound::Lt2Rp),
            z: to_mont(&ctx, &Nat::from_u64(1, 64)).relax(Bound::Lt2Rp),
        };
        let mut acc = Some((x, y));
        for s in 2..=20u64 {
            acc = oracle_add(acc, Some((x, y)));
            let mut c = MulCounter::new();
            let got = ladder(&curve, &start, &Nat::from_u64(s, 64), cfg, &mut c);
            let got_x = {
                let z = from_mont(&ctx, &got.z);
                if z.is_zero() {
                    None
                } else {
                    let xv = from_mont(&ctx, &got.x);
                    match invert_mod(&ctx, &z) {
                        InvertOutcome::Inverse(zi) => {
                            Some(xv.limbs()[0] * zi.limbs()[0] % P)
                        }
                        InvertOutcome::SharedFactor(_) => unreachable!(),
                    }
                }
            };
            if got_x != acc.map(|(ax, _)| ax) {
                return Err(format!("ladder mismatch at x={} s={}", x, s));
            }
            cases += 1;
        }
    }
    Ok(cases)
}

// -- small local helpers (the selftest must not depend on the test-only rng
//    extensions) --

fn random_nat(rng: &mut SplitMix64, width_bits: u32) -> Nat {
    let mut out = Nat::zero(width_bits);
    for l in out.limbs_mut() {
        *l = rng.next_u64();
    }
    out
}

fn random_odd_modulus(rng: &mut SplitMix64, bits: u32) -> Nat {
    let width = bits.div_ceil(64) * 64;
    let mut m = mask_bits(&random_nat(rng, width), bits);
    m.limbs_mut()[0] |= 1;
    m = set_bit(&m, bits - 1);
    m
}

fn mask_bits(v: &Nat, bits: u32) -> Nat {
    let mut out = Nat::zero(v.width_bits());
    for i in 0..bits.min(v.width_bits()) {
        if v.bit(i) {
            out = set_bit(&out, i);
        }
    }
    out
}

fn set_bit(v: &Nat, i: u32) -> Nat {
    let mut out = v.clone();
    let limbs = out.limbs_mut();
    limbs[(i / 64) as usize] |= 1u64 << (i % 64);
    out
}

fn below(rng: &mut SplitMix64, bound: &Nat) -> Nat {
    let bits = bound.bit_len();
    loop {
        let cand = mask_bits(&random_nat(rng, bound.width_bits()), bits);
        if mpnat::cmp(&cand, bound) == Ordering::Less {
            return cand;
        }
    }
}

fn random_below_bits(rng: &mut SplitMix64, ctx: &crate::modred::MontCtx<Word>, bits: u32) -> Nat {
    mask_bits(&random_nat(rng, ctx.r_exp()), bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_build_passes() {
        let results = run_selftest(false);
        assert_eq!(results.len(), 4);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
            assert!(r.cases > 0);
        }
    }

    #[test]
    fn injected_fault_fails_the_bound_suite() {
        let results = run_selftest(true);
        let bounds = results.iter().find(|r| r.name == "lemma-bounds").unwrap();
        assert!(!bounds.passed, "corrupted m_prime must not pass");
    }
}
