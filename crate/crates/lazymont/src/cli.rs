//! Command-line interface: factoring, benchmarking, table reproduction, and
//! self-test.
//!
//! Exit codes: 0 on success (a factor was found, or the command completed),
//! 1 on input errors, 2 when the curve budget is exhausted without a factor,
//! 3 when the self-test fails.

use std::io::Write;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::batch::{reduction_op_census, run_batch, BatchJob};
use crate::ecm::{
    curve_from_sigma, xz_diffadd, xz_double, CurveOutcome, KernelConfig, Outcome,
    ReductionDiscipline,
};
use crate::limb::Word;
use crate::modred::{mont_setup, Strategy};
use crate::mpnat::{FixedNat, MulCounter};
use crate::rng::SplitMix64;
use crate::selftest::run_selftest;
use crate::truncmul::optimal_rho;

type Nat = FixedNat<Word>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_NO_FACTOR: i32 = 2;
pub const EXIT_SELFTEST_FAILED: i32 = 3;

/// Default modulus capacity for seeded benchmarks: 254 bits, leaving the two
/// headroom bits inside a 256-bit working width.
const DEFAULT_BENCH_MODULUS_BITS: u32 = 254;
const DEFAULT_B1: u64 = 8192;

#[derive(Parser, Debug)]
#[command(
    name = "lazymont",
    about = "Modular arithmetic with lazy Montgomery reduction, plus ECM stage-1 factoring",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Classic,
    OptSchoolbook,
    OptK2,
    OptK3,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Classic => Strategy::Classic,
            StrategyArg::OptSchoolbook => Strategy::OptSchoolbook,
            StrategyArg::OptK2 => Strategy::OptSplitK2,
            StrategyArg::OptK3 => Strategy::OptSplitK3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Jsonl,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find a factor of an odd composite via ECM stage 1.
    Factor {
        /// Modulus, lowercase hex, no prefix.
        #[arg(long)]
        n: String,
        /// Stage-1 smoothness bound.
        #[arg(long, default_value_t = DEFAULT_B1)]
        b1: u64,
        /// Curve budget (one sigma seed per curve).
        #[arg(long, default_value_t = 64)]
        curves: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = StrategyArg::OptSchoolbook)]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 8)]
        lanes: usize,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Measure modular-multiplication throughput across kernel variants.
    Bench {
        /// Modulus, hex; a seeded 254-bit modulus is generated when absent.
        #[arg(long)]
        n: Option<String>,
        #[arg(long, default_value_t = DEFAULT_B1)]
        b1: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// REDC strategy used by the optimized rows.
        #[arg(long, value_enum, default_value_t = StrategyArg::OptSchoolbook)]
        strategy: StrategyArg,
        /// Measurement window per row, in seconds.
        #[arg(long, default_value_t = 1.0)]
        window_secs: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print the optimal-split table and the sub-multiplication ratio table.
    Tables {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run the built-in verification suites.
    Selftest {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Corrupt a precomputed context first; the bound suite must fail.
        #[arg(long, hide = true, default_value_t = false)]
        inject_fault: bool,
    },
}

/// Entry point for the binary: parses `std::env::args`, writes to stdout.
pub fn run_main() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    let mut stdout = std::io::stdout();
    run(&args, &mut stdout)
}

/// Run the CLI against explicit arguments and an output sink.
pub fn run(args: &[String], out: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not input errors
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = write!(out, "{}", e.render());
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                EXIT_OK
            } else {
                EXIT_INPUT_ERROR
            };
        }
    };
    match cli.command {
        Command::Factor {
            n,
            b1,
            curves,
            seed,
            strategy,
            lanes,
            parallelism,
            format,
        } => cmd_factor(
            &n,
            b1,
            curves,
            seed,
            strategy.into(),
            lanes,
            parallelism,
            format,
            out,
        ),
        Command::Bench {
            n,
            b1,
            seed,
            strategy,
            window_secs,
            format,
        } => cmd_bench(n.as_deref(), b1, seed, strategy.into(), window_secs, format, out),
        Command::Tables { format } => cmd_tables(format, out),
        Command::Selftest {
            format,
            inject_fault,
        } => cmd_selftest(format, inject_fault, out),
    }
}

fn fail(out: &mut dyn Write, format: Format, msg: &str) -> i32 {
    match format {
        Format::Text => {
            let _ = writeln!(out, "error: {}", msg);
        }
        Format::Jsonl => {
            let _ = writeln!(
                out,
                "{}",
                serde_json::json!({"event": "error", "message": msg})
            );
        }
    }
    EXIT_INPUT_ERROR
}

fn trimmed_hex(v: &Nat) -> String {
    let s = v.to_hex();
    let t = s.trim_start_matches('0');
    if t.is_empty() {
        "0".to_string()
    } else {
        t.to_string()
    }
}

/// Deterministic sigma stream: values in [6, n).
fn sigma_stream(n: &Nat, seed: u64, count: usize) -> Result<Vec<Nat>, String> {
    let n_bits = n.bit_len();
    if n_bits < 4 {
        return Err("modulus too small for sigma seeds (need n > 6)".into());
    }
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(count);
    if n_bits <= 63 {
        let n_u64 = n.limbs()[0];
        if n_u64 <= 7 {
            return Err("modulus too small for sigma seeds (need n > 6)".into());
        }
        for _ in 0..count {
            out.push(Nat::from_u64(6 + rng.below(n_u64 - 6), 64));
        }
    } else {
        // wide moduli: any 62-bit sigma is far below n
        for _ in 0..count {
            out.push(Nat::from_u64(6 + rng.below(1 << 62), n.width_bits()));
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_factor(
    n_hex: &str,
    b1: u64,
    curves: u32,
    seed: u64,
    strategy: Strategy,
    lanes: usize,
    parallelism: usize,
    format: Format,
    out: &mut dyn Write,
) -> i32 {
    let n = match Nat::from_hex(n_hex) {
        Ok(n) => n,
        Err(e) => return fail(out, format, &e.to_string()),
    };
    if n.is_even() {
        return fail(out, format, "modulus must be odd");
    }
    let sigmas = match sigma_stream(&n, seed, curves as usize) {
        Ok(s) => s,
        Err(e) => return fail(out, format, &e),
    };
    let mut job = BatchJob::new(n.clone(), b1, sigmas);
    job.lanes = lanes.max(1);
    job.parallelism = parallelism.max(1);
    job.kernel = KernelConfig {
        discipline: ReductionDiscipline::Lazy,
        strategy,
    };
    let report = match run_batch(&job) {
        Ok(r) => r,
        Err(e) => return fail(out, format, &e.to_string()),
    };

    let summary = |out: &mut dyn Write| {
        if format == Format::Jsonl {
            let _ = writeln!(
                out,
                "{}",
                serde_json::json!({
                    "event": "summary",
                    "curves": report.items.len(),
                    "mont_muls": report.aggregate.mont_muls,
                    "cond_reductions": report.aggregate.cond_reductions,
                    "elapsed_secs": report.elapsed.as_secs_f64(),
                    "mulmods_per_sec": report.mulmods_per_sec,
                })
            );
        } else {
            let _ = writeln!(
                out,
                "curves {}  mulmods {}  elapsed {:.3}s  ({:.0} mulmod/s)",
                report.items.len(),
                report.aggregate.mont_muls,
                report.elapsed.as_secs_f64(),
                report.mulmods_per_sec
            );
        }
    };

    if let Some((idx, d)) = report.first_factor() {
        let sigma = &job.sigmas[idx];
        match format {
            Format::Text => {
                let _ = writeln!(
                    out,
                    "factor {} found by curve {} (sigma {})",
                    trimmed_hex(d),
                    idx,
                    trimmed_hex(sigma)
                );
            }
            Format::Jsonl => {
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::json!({
                        "event": "factor",
                        "factor": trimmed_hex(d),
                        "curve_index": idx,
                        "sigma": trimmed_hex(sigma),
                    })
                );
            }
        }
        summary(out);
        EXIT_OK
    } else {
        let trivial = report
            .items
            .iter()
            .filter(|r| r.outcome == Outcome::TrivialGcdN)
            .count();
        match format {
            Format::Text => {
                let _ = writeln!(
                    out,
                    "no factor in {} curves ({} trivial-gcd outcomes)",
                    report.items.len(),
                    trivial
                );
            }
            Format::Jsonl => {
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::json!({
                        "event": "no_factor",
                        "curves": report.items.len(),
                        "trivial_gcd": trivial,
                    })
                );
            }
        }
        summary(out);
        EXIT_NO_FACTOR
    }
}

fn cmd_bench(
    n_hex: Option<&str>,
    b1: u64,
    seed: u64,
    strategy: Strategy,
    window_secs: f64,
    format: Format,
    out: &mut dyn Write,
) -> i32 {
    // minimum measurement window: never divide by a zero-length interval
    let window = window_secs.max(0.05);
    let n = match n_hex {
        Some(h) => match Nat::from_hex(h) {
            Ok(n) => n,
            Err(e) => return fail(out, format, &e.to_string()),
        },
        None => seeded_modulus(seed, DEFAULT_BENCH_MODULUS_BITS),
    };
    let ctx = match mont_setup(&n) {
        Ok(c) => c,
        Err(e) => return fail(out, format, &e.to_string()),
    };
    // one usable curve for the workload
    let sigmas = match sigma_stream(&n, seed, 64) {
        Ok(s) => s,
        Err(e) => return fail(out, format, &e),
    };
    let mut picked = None;
    for s in &sigmas {
        if let CurveOutcome::Curve(curve, point) = curve_from_sigma(&ctx, s) {
            picked = Some((curve, point));
            break;
        }
    }
    let Some((curve, point)) = picked else {
        return fail(out, format, "no usable curve for this modulus");
    };

    if format == Format::Text {
        let _ = writeln!(
            out,
            "modulus {} bits, working width {} bits, window {:.2}s",
            ctx.n_bits(),
            ctx.r_exp(),
            window
        );
        let _ = writeln!(
            out,
            "{:<42} {:>12} {:>14} {:>8}",
            "kernel", "mulmod/s", "scaled-192/s", "ratio"
        );
    }

    let rows = [
        ("baseline", KernelConfig::baseline()),
        (
            "lazy-reductions",
            KernelConfig {
                discipline: ReductionDiscipline::Lazy,
                strategy: Strategy::Classic,
            },
        ),
        (
            "optimized-product",
            KernelConfig {
                discipline: ReductionDiscipline::Eager,
                strategy,
            },
        ),
        (
            "fully-optimized",
            KernelConfig {
                discipline: ReductionDiscipline::Lazy,
                strategy,
            },
        ),
    ];

    let scale = (ctx.n_bits() as f64 / 192.0).powi(2);
    // Interleave measurement slices across the rows and keep each row's best
    // slice; sequential whole-window timing is too sensitive to load drift.
    const ROUNDS: usize = 6;
    let slice = window / ROUNDS as f64 / rows.len() as f64;
    let mut best = [0f64; 4];
    for _ in 0..ROUNDS {
        for (i, (_, cfg)) in rows.iter().enumerate() {
            let cfg = *cfg;
            let mut p0 = point.clone();
            let mut p1 = xz_double(&curve, &p0, cfg, &mut MulCounter::new());
            let mut counter = MulCounter::new();
            let started = Instant::now();
            while started.elapsed().as_secs_f64() < slice {
                for _ in 0..16 {
                    let sum = xz_diffadd(&curve, &p0, &p1, &point, cfg, &mut counter);
                    let dbl = xz_double(&curve, &p0, cfg, &mut counter);
                    p0 = dbl;
                    p1 = sum;
                }
            }
            let secs = started.elapsed().as_secs_f64().max(1e-9);
            best[i] = best[i].max(counter.mont_muls as f64 / secs);
        }
    }
    let mut baseline_rate = None;
    let mut optimized_ge_baseline = true;
    for (i, (name, cfg)) in rows.iter().enumerate() {
        let (name, cfg) = (*name, *cfg);
        let rate = best[i];
        let scaled = rate * scale;
        let ratio = match baseline_rate {
            None => {
                baseline_rate = Some(rate);
                1.0
            }
            Some(b) => rate / b,
        };
        if name == "fully-optimized" && ratio < 1.0 {
            optimized_ge_baseline = false;
        }
        match format {
            Format::Text => {
                let _ = writeln!(
                    out,
                    "{:<42} {:>12.0} {:>14.0} {:>7.1}%",
                    format!("{} ({}/{})", name, cfg.discipline.name(), cfg.strategy.name()),
                    rate,
                    scaled,
                    ratio * 100.0
                );
            }
            Format::Jsonl => {
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::json!({
                        "event": "bench",
                        "row": name,
                        "discipline": cfg.discipline.name(),
                        "strategy": cfg.strategy.name(),
                        "mulmods_per_sec": rate,
                        "scaled_192_per_sec": scaled,
                        "ratio_vs_baseline": ratio,
                        "modulus_bits": ctx.n_bits(),
                        "b1": b1,
                    })
                );
            }
        }
    }
    let _ = optimized_ge_baseline; // reported through the ratio column
    EXIT_OK
}

fn seeded_modulus(seed: u64, bits: u32) -> Nat {
    let mut rng = SplitMix64::new(seed ^ 0x6d0d); // independent of sigma stream
    let width = bits.div_ceil(64) * 64;
    let mut m = Nat::zero(width);
    for l in m.limbs_mut() {
        *l = rng.next_u64();
    }
    // clamp to `bits` bits, set the top and low bit
    let mut out = Nat::zero(width);
    for i in 0..bits {
        if m.bit(i) {
            out.limbs_mut()[(i / 64) as usize] |= 1u64 << (i % 64);
        }
    }
    out.limbs_mut()[((bits - 1) / 64) as usize] |= 1u64 << ((bits - 1) % 64);
    out.limbs_mut()[0] |= 1;
    out
}

fn cmd_tables(format: Format, out: &mut dyn Write) -> i32 {
    // optimal split parameters per multiplier complexity class
    let rows = [
        ("schoolbook", 2.0f64),
        ("karatsuba-ofman", 3f64.log2()),
        ("toom-cook-3", 5f64.ln() / 3f64.ln()),
        ("toom-cook-4", 7f64.ln() / 4f64.ln()),
    ];
    if format == Format::Text {
        let _ = writeln!(out, "{:<18} {:>8} {:>8} {:>8}", "multiplier", "alpha", "rho", "c_rho");
    }
    for (name, alpha) in rows {
        let p = optimal_rho(alpha);
        match format {
            Format::Text => {
                let _ = writeln!(
                    out,
                    "{:<18} {:>8.3} {:>8.3} {:>8.3}",
                    name, p.alpha, p.rho_hat, p.c_rho
                );
            }
            Format::Jsonl => {
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::json!({
                        "event": "optimal_rho",
                        "multiplier": name,
                        "alpha": p.alpha,
                        "rho_hat": format!("{:.3}", p.rho_hat),
                        "c_rho": format!("{:.3}", p.c_rho),
                    })
                );
            }
        }
    }

    // sub-multiplication ratios of the reconstruction-based high products:
    // 3/4 for the schoolbook split, (2k-2)/(2k-1) for Toom-Cook-k
    let chat = [
        ("schoolbook", 3.0f64 / 4.0),
        ("karatsuba-ofman", 2.0 / 3.0),
        ("toom-cook-3", 4.0 / 5.0),
        ("toom-cook-4", 6.0 / 7.0),
    ];
    if format == Format::Text {
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<18} {:>8}", "multiplier", "c_hat");
    }
    for (name, c) in chat {
        match format {
            Format::Text => {
                let _ = writeln!(out, "{:<18} {:>8.3}", name, c);
            }
            Format::Jsonl => {
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::json!({
                        "event": "c_hat",
                        "multiplier": name,
                        "c_hat": format!("{:.3}", c),
                    })
                );
            }
        }
    }
    EXIT_OK
}

fn cmd_selftest(format: Format, inject_fault: bool, out: &mut dyn Write) -> i32 {
    let results = run_selftest(inject_fault);
    let mut all_ok = true;
    for r in &results {
        all_ok &= r.passed;
        match format {
            Format::Text => {
                let _ = writeln!(
                    out,
                    "{:<20} {}  ({} cases{})",
                    r.name,
                    if r.passed { "pass" } else { "FAIL" },
                    r.cases,
                    if r.passed {
                        String::new()
                    } else {
                        format!("; {}", r.detail)
                    }
                );
            }
            Format::Jsonl => {
                let _ = writeln!(out, "{}", serde_json::to_string(r).unwrap());
            }
        }
    }
    if all_ok {
        EXIT_OK
    } else {
        EXIT_SELFTEST_FAILED
    }
}

/// Probe used by integration tests: census constants for a modulus.
pub fn census_for(n_hex: &str, b1: u64, seed: u64) -> Result<(u64, u64), crate::Error> {
    let n = Nat::from_hex(n_hex)?;
    let sigmas =
        sigma_stream(&n, seed, 8).map_err(crate::Error::InvalidInput)?;
    let mut job = BatchJob::new(n, b1, sigmas);
    job.lanes = 8;
    let baseline = reduction_op_census(&job, false)?;
    let optimized = reduction_op_census(&job, true)?;
    Ok((
        baseline.cond_reductions_per_iteration,
        optimized.cond_reductions_per_iteration,
    ))
}
