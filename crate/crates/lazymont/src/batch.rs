//! Lockstep batch executor: many independent (curve, point) stage-1 runs over
//! one modulus, one curve per work item, no synchronization between items.
//!
//! Items share only the immutable context and scalar plan. Results are merged
//! by item index, so the report is a pure function of the job no matter how
//! many workers run it. The census probe measures the exact number of
//! conditional-reduction executions per combined double+diffadd ladder
//! iteration for the eager baseline and the lazy kernel.

use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::time::{Duration, Instant};

use crate::ecm::{
    curve_from_sigma, stage1_plan, stage1_with_ctx, xz_diffadd, xz_double, CurveOutcome,
    KernelConfig, ReductionDiscipline, StageResult,
};
use crate::limb::Word;
use crate::modred::{mont_setup, Strategy};
use crate::mpnat::{FixedNat, MulCounter};
use crate::Error;

/// A batch of independent stage-1 work items over one composite.
#[derive(Clone, Debug)]
pub struct BatchJob {
    pub n: FixedNat<Word>,
    pub b1: u64,
    /// One sigma seed per work item.
    pub sigmas: Vec<FixedNat<Word>>,
    /// Items are claimed in contiguous groups of this size, mirroring a
    /// wavefront of lockstep lanes.
    pub lanes: usize,
    /// Worker thread count.
    pub parallelism: usize,
    pub kernel: KernelConfig,
}

impl BatchJob {
    pub fn new(n: FixedNat<Word>, b1: u64, sigmas: Vec<FixedNat<Word>>) -> Self {
        Self {
            n,
            b1,
            sigmas,
            lanes: 1,
            parallelism: 1,
            kernel: KernelConfig::default(),
        }
    }

    fn validate(&self) -> Result<(), Error> {
        if self.sigmas.is_empty() {
            return Err(Error::InvalidConfig("no sigma seeds".into()));
        }
        if self.lanes == 0 {
            return Err(Error::InvalidConfig("lanes must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::InvalidConfig(
                "parallelism must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a batch run.
#[derive(Clone, Debug)]
pub struct BatchReport {
    /// Per-item results, in item order; equal to sequential execution.
    pub items: Vec<StageResult<Word>>,
    pub aggregate: MulCounter,
    pub elapsed: Duration,
    /// Modular multiplications per second, derived from the counters.
    pub mulmods_per_sec: f64,
}

impl BatchReport {
    /// First item that produced a proper factor, if any.
    pub fn first_factor(&self) -> Option<(usize, &FixedNat<Word>)> {
        self.items.iter().enumerate().find_map(|(i, r)| {
            if let crate::ecm::Outcome::FactorFound(d) = &r.outcome {
                Some((i, d))
            } else {
                None
            }
        })
    }
}

/// Run every item of the job; results are bitwise independent of the worker
/// count.
pub fn run_batch(job: &BatchJob) -> Result<BatchReport, Error> {
    job.validate()?;
    let ctx = mont_setup(&job.n)?;
    let plan = stage1_plan(job.b1)?;

    let started = Instant::now();
    let n_items = job.sigmas.len();
    let groups = n_items.div_ceil(job.lanes);
    let next_group = AtomicUsize::new(0);
    let workers = job.parallelism.min(groups.max(1));

    let mut partials: Vec<Vec<(usize, StageResult<Word>)>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for _ in 0..workers {
            let ctx = &ctx;
            let plan = &plan;
            let next_group = &next_group;
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                loop {
                    let g = next_group.fetch_add(1, AtomicOrdering::Relaxed);
                    if g >= groups {
                        break;
                    }
                    let lo = g * job.lanes;
                    let hi = (lo + job.lanes).min(n_items);
                    for idx in lo..hi {
                        let r = stage1_with_ctx(ctx, plan, &job.sigmas[idx], job.kernel);
                        out.push((idx, r));
                    }
                }
                out
            }));
        }
        for h in handles {
            partials.push(h.join().expect("batch worker panicked"));
        }
    });

    let mut slots: Vec<Option<StageResult<Word>>> = vec![None; n_items];
    for part in partials {
        for (idx, r) in part {
            slots[idx] = Some(r);
        }
    }
    let items: Vec<StageResult<Word>> = slots
        .into_iter()
        .map(|s| s.expect("every item processed exactly once"))
        .collect();

    let elapsed = started.elapsed();
    let mut aggregate = MulCounter::new();
    for r in &items {
        aggregate.absorb(&r.counters);
    }
    let secs = elapsed.as_secs_f64().max(1e-9);
    let mulmods_per_sec = aggregate.mont_muls as f64 / secs;

    Ok(BatchReport {
        items,
        aggregate,
        elapsed,
        mulmods_per_sec,
    })
}

/// Census of conditional-reduction executions per combined double+diffadd
/// ladder iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct CensusReport {
    /// Exact conditional reductions in one ladder loop iteration.
    pub cond_reductions_per_iteration: u64,
    /// Modular multiplications in one ladder loop iteration.
    pub mont_muls_per_iteration: u64,
    /// Number of distinct lanes the constant was verified on.
    pub lanes_checked: usize,
}

/// Measure the per-iteration conditional-reduction count for the job's
/// modulus under the chosen kernel. `optimized = false` selects the eager
/// baseline that reduces after every multiplication, addition and
/// subtraction; `optimized = true` selects the lazy kernel.
///
/// The count is verified to be identical across lanes and across iterations
/// before it is reported.
pub fn reduction_op_census(job: &BatchJob, optimized: bool) -> Result<CensusReport, Error> {
    job.validate()?;
    let ctx = mont_setup(&job.n)?;
    let cfg = if optimized {
        KernelConfig {
            discipline: ReductionDiscipline::Lazy,
            strategy: job.kernel.strategy,
        }
    } else {
        KernelConfig {
            discipline: ReductionDiscipline::Eager,
            strategy: Strategy::Classic,
        }
    };

    let mut per_iter: Option<(u64, u64)> = None;
    let mut lanes_checked = 0;
    for sigma in job.sigmas.iter().take(job.lanes.max(1)) {
        let CurveOutcome::Curve(curve, point) = curve_from_sigma(&ctx, sigma) else {
            continue; // degenerate seed; the census needs a usable curve
        };
        let mut p0 = point.clone();
        let mut p1 = xz_double(&curve, &p0, cfg, &mut MulCounter::new());
        for _ in 0..4 {
            // one ladder loop iteration: a differential addition plus a
            // doubling, exactly as the ladder executes per scalar bit
            let mut c = MulCounter::new();
            let sum = xz_diffadd(&curve, &p0, &p1, &point, cfg, &mut c);
            let dbl = xz_double(&curve, &p0, cfg, &mut c);
            let sig = (c.cond_reductions, c.mont_muls);
            match per_iter {
                None => per_iter = Some(sig),
                Some(prev) => {
                    if prev != sig {
                        return Err(Error::InvalidConfig(
                            "census drifted across iterations".into(),
                        ));
                    }
                }
            }
            p0 = dbl;
            p1 = sum;
        }
        lanes_checked += 1;
    }
    let Some((cond, muls)) = per_iter else {
        return Err(Error::InvalidConfig(
            "no usable curve among the sigma seeds".into(),
        ));
    };
    Ok(CensusReport {
        cond_reductions_per_iteration: cond,
        mont_muls_per_iteration: muls,
        lanes_checked,
    })
}
