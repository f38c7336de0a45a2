//! C ABI for the lazymont library: opaque context handles, hex-string value
//! exchange, and integer status codes.
//!
//! Every entry point catches panics at the boundary and reports
//! `LM_STATUS_INTERNAL` instead of unwinding into the caller. Strings are
//! NUL-terminated lowercase hex without a prefix; output buffers receive at
//! most `cap - 1` characters plus the terminator.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lazymont::batch::{run_batch, BatchJob};
use lazymont::ecm::KernelConfig;
use lazymont::modred::{from_mont, mont_mul, mont_setup, to_mont, Bound, MontCtx, Strategy};
use lazymont::mpnat::MulCounter;
use lazymont::rng::SplitMix64;
use lazymont::{FixedNat, Word};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmStatus {
    /// Success.
    Ok = 0,
    /// A pointer argument was null or a string was not valid hex/UTF-8.
    InvalidArgument = 1,
    /// The modulus is unusable (even, too small, or too wide).
    InvalidModulus = 2,
    /// The output buffer is too small for the result.
    BufferTooSmall = 3,
    /// The curve budget was exhausted without finding a factor.
    NoFactor = 4,
    /// An internal invariant failed.
    Internal = 5,
}

/// Opaque Montgomery context for a fixed odd modulus.
pub struct LmContext {
    ctx: MontCtx<Word>,
}

fn parse_hex(ptr: *const c_char) -> Result<FixedNat<Word>, LmStatus> {
    if ptr.is_null() {
        return Err(LmStatus::InvalidArgument);
    }
    let s = unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| LmStatus::InvalidArgument)?;
    FixedNat::from_hex(s).map_err(|_| LmStatus::InvalidArgument)
}

fn write_hex(value: &FixedNat<Word>, out: *mut c_char, cap: usize) -> LmStatus {
    if out.is_null() {
        return LmStatus::InvalidArgument;
    }
    let s = {
        let h = value.to_hex();
        let t = h.trim_start_matches('0');
        if t.is_empty() { "0".to_string() } else { t.to_string() }
    };
    let bytes = s.as_bytes();
    if cap < bytes.len() + 1 {
        return LmStatus::BufferTooSmall;
    }
    unsafe {
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), out as *mut u8, bytes.len());
        *out.add(bytes.len()) = 0;
    }
    LmStatus::Ok
}

fn guarded(f: impl FnOnce() -> LmStatus) -> LmStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(LmStatus::Internal)
}

/// Create a context for an odd modulus given as hex. On success `*out` owns
/// the context; release it with `lm_context_free`.
///
/// # Safety
/// `modulus_hex` must be a valid NUL-terminated string and `out` a valid
/// pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn lm_context_new(
    modulus_hex: *const c_char,
    out: *mut *mut LmContext,
) -> LmStatus {
    guarded(|| {
        if out.is_null() {
            return LmStatus::InvalidArgument;
        }
        let m = match parse_hex(modulus_hex) {
            Ok(m) => m,
            Err(s) => return s,
        };
        match mont_setup(&m) {
            Ok(ctx) => {
                let boxed = Box::new(LmContext { ctx });
                unsafe { *out = Box::into_raw(boxed) };
                LmStatus::Ok
            }
            Err(_) => LmStatus::InvalidModulus,
        }
    })
}

/// Release a context created by `lm_context_new`. A null pointer is ignored.
///
/// # Safety
/// `ctx` must be a pointer previously returned by `lm_context_new` that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn lm_context_free(ctx: *mut LmContext) {
    if !ctx.is_null() {
        drop(unsafe { Box::from_raw(ctx) });
    }
}

/// Bit length of the context's modulus.
///
/// # Safety
/// `ctx` must be a live context pointer.
#[no_mangle]
pub unsafe extern "C" fn lm_context_modulus_bits(ctx: *const LmContext) -> u32 {
    if ctx.is_null() {
        return 0;
    }
    unsafe { &*ctx }.ctx.n_bits()
}

/// Working width in bits (the modulus plus headroom, limb aligned).
///
/// # Safety
/// `ctx` must be a live context pointer.
#[no_mangle]
pub unsafe extern "C" fn lm_context_work_bits(ctx: *const LmContext) -> u32 {
    if ctx.is_null() {
        return 0;
    }
    unsafe { &*ctx }.ctx.r_exp()
}

/// Canonical modular product `a * b mod m` through the Montgomery pipeline.
/// `out` receives lowercase hex, NUL-terminated.
///
/// # Safety
/// `ctx` must be a live context pointer, the strings valid and
/// NUL-terminated, and `out` writable for `out_cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn lm_mulmod(
    ctx: *const LmContext,
    a_hex: *const c_char,
    b_hex: *const c_char,
    out: *mut c_char,
    out_cap: usize,
) -> LmStatus {
    guarded(|| {
        if ctx.is_null() {
            return LmStatus::InvalidArgument;
        }
        let ctx = &unsafe { &*ctx }.ctx;
        let (a, b) = match (parse_hex(a_hex), parse_hex(b_hex)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return LmStatus::InvalidArgument,
        };
        if a.bit_len() > ctx.n_bits() || b.bit_len() > ctx.n_bits() {
            // operands must already be reduced below the modulus
            return LmStatus::InvalidArgument;
        }
        if lazymont::mpnat::cmp(&a.widened_to(ctx.r_exp()), ctx.modulus())
            != core::cmp::Ordering::Less
            || lazymont::mpnat::cmp(&b.widened_to(ctx.r_exp()), ctx.modulus())
                != core::cmp::Ordering::Less
        {
            return LmStatus::InvalidArgument;
        }
        let mut c = MulCounter::new();
        let am = to_mont(ctx, &a).relax(Bound::Lt2Rp);
        let bm = to_mont(ctx, &b).relax(Bound::Lt2Rp);
        let p = mont_mul(ctx, &am, &bm, Strategy::OptSchoolbook, &mut c);
        let r = from_mont(ctx, &p);
        write_hex(&r, out, out_cap)
    })
}

/// ECM stage-1 factor search on an odd composite given as hex. Tries
/// `curves` sigma seeds derived from `seed` with smoothness bound `b1`.
/// On success writes a proper factor to `out` and returns `LM_STATUS_OK`;
/// returns `LM_STATUS_NO_FACTOR` when the budget is exhausted.
///
/// # Safety
/// `n_hex` must be a valid NUL-terminated string and `out` writable for
/// `out_cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn lm_factor(
    n_hex: *const c_char,
    b1: u64,
    curves: u32,
    seed: u64,
    out: *mut c_char,
    out_cap: usize,
) -> LmStatus {
    guarded(|| {
        let n = match parse_hex(n_hex) {
            Ok(n) => n,
            Err(s) => return s,
        };
        if n.is_even() || n.bit_len() < 4 {
            return LmStatus::InvalidModulus;
        }
        let mut rng = SplitMix64::new(seed);
        let sigmas: Vec<FixedNat<Word>> = if n.bit_len() <= 63 {
            let n_u64 = n.limbs()[0];
            if n_u64 <= 7 {
                return LmStatus::InvalidModulus;
            }
            (0..curves)
                .map(|_| FixedNat::from_u64(6 + rng.below(n_u64 - 6), 64))
                .collect()
        } else {
            (0..curves)
                .map(|_| FixedNat::from_u64(6 + rng.below(1 << 62), n.width_bits()))
                .collect()
        };
        let mut job = BatchJob::new(n, b1, sigmas);
        job.lanes = 8;
        job.kernel = KernelConfig::default();
        match run_batch(&job) {
            Ok(report) => match report.first_factor() {
                Some((_, d)) => write_hex(d, out, out_cap),
                None => LmStatus::NoFactor,
            },
            Err(_) => LmStatus::InvalidModulus,
        }
    })
}

/// Closed-form optimal truncation split for a multiplier of complexity
/// `O(n^alpha)`, `1 < alpha <= 2`. Writes `rho_hat` and `c_rho`.
///
/// # Safety
/// `rho_hat` and `c_rho` must be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn lm_optimal_rho(
    alpha: f64,
    rho_hat: *mut f64,
    c_rho: *mut f64,
) -> LmStatus {
    guarded(|| {
        if rho_hat.is_null() || c_rho.is_null() {
            return LmStatus::InvalidArgument;
        }
        if !(alpha > 1.0 && alpha <= 2.0) {
            return LmStatus::InvalidArgument;
        }
        let p = lazymont::truncmul::optimal_rho(alpha);
        unsafe {
            *rho_hat = p.rho_hat;
            *c_rho = p.c_rho;
        }
        LmStatus::Ok
    })
}

/// Static version string of the library.
#[no_mangle]
pub extern "C" fn lm_version() -> *const c_char {
    concat!("lazymont ", env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn hex(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn context_round_trip() {
        let mut ctx: *mut LmContext = std::ptr::null_mut();
        let status = unsafe { lm_context_new(hex("8f").as_ptr(), &mut ctx) };
        assert_eq!(status, LmStatus::Ok);
        assert!(!ctx.is_null());
        assert_eq!(unsafe { lm_context_modulus_bits(ctx) }, 8);
        assert_eq!(unsafe { lm_context_work_bits(ctx) }, 128);
        unsafe { lm_context_free(ctx) };
    }

    #[test]
    fn rejects_even_or_garbage_modulus() {
        let mut ctx: *mut LmContext = std::ptr::null_mut();
        assert_eq!(
            unsafe { lm_context_new(hex("90").as_ptr(), &mut ctx) },
            LmStatus::InvalidModulus
        );
        assert_eq!(
            unsafe { lm_context_new(hex("zz").as_ptr(), &mut ctx) },
            LmStatus::InvalidArgument
        );
        assert_eq!(
            unsafe { lm_context_new(std::ptr::null(), &mut ctx) },
            LmStatus::InvalidArgument
        );
    }

    #[test]
    fn mulmod_matches_known_product() {
        let mut ctx: *mut LmContext = std::ptr::null_mut();
        unsafe { lm_context_new(hex("65").as_ptr(), &mut ctx) }; // 101
        let mut buf = [0i8; 64];
        let status = unsafe {
            lm_mulmod(
                ctx,
                hex("7").as_ptr(),
                hex("9").as_ptr(),
                buf.as_mut_ptr() as *mut c_char,
                buf.len(),
            )
        };
        assert_eq!(status, LmStatus::Ok);
        let got = unsafe { CStr::from_ptr(buf.as_ptr() as *const c_char) };
        // 7 * 9 mod 101 = 63 = 0x3f
        assert_eq!(got.to_str().unwrap(), "3f");

        // unreduced operand is rejected
        let status = unsafe {
            lm_mulmod(
                ctx,
                hex("ff").as_ptr(),
                hex("9").as_ptr(),
                buf.as_mut_ptr() as *mut c_char,
                buf.len(),
            )
        };
        assert_eq!(status, LmStatus::InvalidArgument);
        unsafe { lm_context_free(ctx) };
    }

    #[test]
    fn mulmod_buffer_too_small() {
        let mut ctx: *mut LmContext = std::ptr::null_mut();
        unsafe { lm_context_new(hex("65").as_ptr(), &mut ctx) };
        let mut buf = [0i8; 2];
        let status = unsafe {
            lm_mulmod(
                ctx,
                hex("32").as_ptr(),
                hex("33").as_ptr(),
                buf.as_mut_ptr() as *mut c_char,
                buf.len(),
            )
        };
        // 0x32 * 0x33 mod 101 needs two hex digits plus the terminator
        assert_eq!(status, LmStatus::BufferTooSmall);
        unsafe { lm_context_free(ctx) };
    }

    #[test]
    fn factor_finds_a_divisor_of_143() {
        let mut buf = [0i8; 64];
        let status = unsafe {
            lm_factor(
                hex("8f").as_ptr(),
                18,
                20,
                1,
                buf.as_mut_ptr() as *mut c_char,
                buf.len(),
            )
        };
        assert_eq!(status, LmStatus::Ok);
        let got = unsafe { CStr::from_ptr(buf.as_ptr() as *const c_char) };
        assert!(matches!(got.to_str().unwrap(), "b" | "d"));
    }

    #[test]
    fn factor_on_prime_reports_no_factor() {
        let mut buf = [0i8; 64];
        let status = unsafe {
            lm_factor(
                hex("65").as_ptr(),
                18,
                8,
                1,
                buf.as_mut_ptr() as *mut c_char,
                buf.len(),
            )
        };
        assert_eq!(status, LmStatus::NoFactor);
    }

    #[test]
    fn optimal_rho_round_trip() {
        let mut rho = 0f64;
        let mut c = 0f64;
        let status = unsafe { lm_optimal_rho(2.0, &mut rho, &mut c) };
        assert_eq!(status, LmStatus::Ok);
        assert!((rho - 0.5).abs() < 1e-9 && (c - 0.5).abs() < 1e-9);
        assert_eq!(
            unsafe { lm_optimal_rho(1.0, &mut rho, &mut c) },
            LmStatus::InvalidArgument
        );
    }

    #[test]
    fn version_is_a_static_string() {
        let v = unsafe { CStr::from_ptr(lm_version()) };
        assert!(v.to_str().unwrap().starts_with("lazymont"));
    }
}
