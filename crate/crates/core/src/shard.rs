//! k-space shard planning and the SPMD worker pool.
//!
//! Workers are threads running the same body on their own shard. The only
//! synchronization point is the [`Collective`] hook: a barrier-synchronized
//! allreduce that sums contributions in ascending worker order and hands
//! every worker the identical result.

use std::collections::BTreeMap;
use std::ops::Range;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::{ComplexTensor, Real};

/// Contiguous sample ranges per worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardPlan {
    n_samples: usize,
    assignments: Vec<Range<usize>>,
}

/// Balanced split of `n` items into `p` contiguous ranges; the first
/// `n mod p` ranges are one longer.
fn balanced(n: usize, p: usize) -> Vec<Range<usize>> {
    let base = n / p;
    let extra = n % p;
    let mut start = 0;
    (0..p)
        .map(|w| {
            let len = base + usize::from(w < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Near-even contiguous partition of `n_k` samples over `p` workers.
pub fn make_shard_plan(n_k: usize, p: usize) -> Result<ShardPlan> {
    if p < 1 || p > n_k {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n_k} samples over {p} workers"
        )));
    }
    Ok(ShardPlan {
        n_samples: n_k,
        assignments: balanced(n_k, p),
    })
}

/// Partition whose boundaries fall on multiples of `block`. Blocks, not
/// samples, are split near-evenly. Used by the order-stable reduction mode.
pub fn make_block_aligned_plan(n_k: usize, p: usize, block: usize) -> Result<ShardPlan> {
    if block == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    let n_blocks = n_k.div_ceil(block);
    if p < 1 || p > n_blocks {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n_blocks} blocks of {block} samples over {p} workers"
        )));
    }
    let assignments = balanced(n_blocks, p)
        .into_iter()
        .map(|r| (r.start * block).min(n_k)..(r.end * block).min(n_k))
        .collect();
    Ok(ShardPlan {
        n_samples: n_k,
        assignments,
    })
}

impl ShardPlan {
    pub fn n_workers(&self) -> usize {
        self.assignments.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn assignments(&self) -> &[Range<usize>] {
        &self.assignments
    }

    pub fn range(&self, worker: usize) -> Range<usize> {
        self.assignments[worker].clone()
    }

    /// Splits a worker's range at global multiples of `block`.
    pub fn segments(&self, worker: usize, block: Option<usize>) -> Vec<Range<usize>> {
        let r = self.range(worker);
        match block {
            None => vec![r],
            Some(b) => {
                let mut out = Vec::new();
                let mut s = r.start;
                while s < r.end {
                    let e = ((s / b + 1) * b).min(r.end);
                    out.push(s..e);
                    s = e;
                }
                out
            }
        }
    }

    /// Checks that ranges are disjoint, ordered and cover `0..n_samples`.
    pub fn validate(&self) -> Result<()> {
        let mut next = 0;
        for r in &self.assignments {
            if r.start != next || r.end <= r.start {
                return Err(Error::InvalidArgument(format!(
                    "shard plan is not a contiguous cover: {:?}",
                    self.assignments
                )));
            }
            next = r.end;
        }
        if next != self.n_samples {
            return Err(Error::InvalidArgument(format!(
                "shard plan covers {next} of {} samples",
                self.n_samples
            )));
        }
        Ok(())
    }
}

/// Which part of the solve a collective belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Adjoint of the data used as the starting image.
    InitialImage,
    /// `Fᴴd` term of the right-hand side.
    RhsBase,
    /// The DFT part of the normal operator, once per application.
    NormalOperator,
    /// Scalar reductions for reporting (objective values).
    Diagnostic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub calls: u64,
    pub elements: u64,
}

/// Communication accounting for one SPMD run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommStats {
    /// Image-size (tensor) allreduce calls.
    pub allreduce_calls: u64,
    /// Complex elements in the reduced tensors, summed over calls.
    pub elements_reduced: u64,
    /// Scalar reductions, counted apart from the tensor ones.
    pub scalar_calls: u64,
    /// Estimated link hops on a near-square 2-D torus of the worker count.
    pub estimated_hops: u64,
    pub per_phase: BTreeMap<Phase, PhaseStats>,
}

impl CommStats {
    fn record(&mut self, phase: Phase, elements: u64, workers: usize) {
        let e = self.per_phase.entry(phase).or_default();
        e.calls += 1;
        e.elements += elements;
        if phase == Phase::Diagnostic {
            self.scalar_calls += 1;
        } else {
            self.allreduce_calls += 1;
            self.elements_reduced += elements;
        }
        self.estimated_hops += torus_allreduce_hops(workers);
    }

    pub fn phase(&self, phase: Phase) -> PhaseStats {
        self.per_phase.get(&phase).copied().unwrap_or_default()
    }
}

/// Hop count of a reduce-scatter + all-gather ring along each dimension of
/// the most square `a × b = p` torus.
pub fn torus_allreduce_hops(p: usize) -> u64 {
    if p <= 1 {
        return 0;
    }
    let mut a = (p as f64).sqrt() as usize;
    while !p.is_multiple_of(a) {
        a -= 1;
    }
    let b = p / a;
    (2 * (a - 1) + 2 * (b - 1)) as u64
}

/// Elementwise sum of equally shaped tensors, accumulated left to right.
pub fn allreduce_sum<T: Real>(contributions: &[ComplexTensor<T>]) -> Result<ComplexTensor<T>> {
    let (first, rest) = contributions
        .split_first()
        .ok_or_else(|| Error::Collective("allreduce over zero contributions".into()))?;
    let mut acc = first.clone();
    for c in rest {
        if c.shape() != first.shape() {
            return Err(shape_err(format!(
                "allreduce contributions differ in shape: {:?} vs {:?}",
                first.shape(),
                c.shape()
            )));
        }
        acc.add_assign(c)?;
    }
    Ok(acc)
}

/// The reduction hook seen by solver code.
pub trait Collective<T: Real>: Sync {
    fn rank(&self) -> usize;

    fn size(&self) -> usize;

    /// Sums `parts` (this worker's segment contributions, in order) with
    /// every other worker's parts, in ascending worker order.
    fn allreduce(&self, parts: Vec<ComplexTensor<T>>, phase: Phase) -> Result<ComplexTensor<T>>;

    fn allreduce_scalar(&self, value: f64) -> Result<f64>;
}

/// Single-worker pass-through hook that still counts calls.
#[derive(Debug, Default)]
pub struct LocalCollective {
    stats: Mutex<CommStats>,
}

impl LocalCollective {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> CommStats {
        self.stats.lock().unwrap().clone()
    }
}

impl<T: Real> Collective<T> for LocalCollective {
    fn rank(&self) -> usize {
        0
    }

    fn size(&self) -> usize {
        1
    }

    fn allreduce(&self, parts: Vec<ComplexTensor<T>>, phase: Phase) -> Result<ComplexTensor<T>> {
        let out = allreduce_sum(&parts)?;
        self.stats
            .lock()
            .unwrap()
            .record(phase, out.len() as u64, 1);
        Ok(out)
    }

    fn allreduce_scalar(&self, value: f64) -> Result<f64> {
        self.stats.lock().unwrap().record(Phase::Diagnostic, 1, 1);
        Ok(value)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpmdConfig {
    /// Longest a worker may wait at the barrier before the run is aborted.
    pub barrier_timeout: Duration,
}

impl Default for SpmdConfig {
    fn default() -> Self {
        Self {
            barrier_timeout: Duration::from_secs(600),
        }
    }
}

enum Payload<T> {
    Tensors(Vec<ComplexTensor<T>>, Phase),
    Scalar(f64),
}

#[derive(Clone)]
enum Reduced<T> {
    Tensor(ComplexTensor<T>),
    Scalar(f64),
}

struct HubState<T> {
    generation: u64,
    arrived: usize,
    slots: Vec<Option<Payload<T>>>,
    result: Option<std::result::Result<Reduced<T>, String>>,
    failure: Option<String>,
    root_failure: Option<usize>,
    exited: usize,
}

struct Hub<T> {
    p: usize,
    state: Mutex<HubState<T>>,
    cv: Condvar,
    stats: Mutex<CommStats>,
    timeout: Duration,
}

impl<T: Real> Hub<T> {
    fn new(p: usize, timeout: Duration) -> Self {
        Self {
            p,
            state: Mutex::new(HubState {
                generation: 0,
                arrived: 0,
                slots: (0..p).map(|_| None).collect(),
                result: None,
                failure: None,
                root_failure: None,
                exited: 0,
            }),
            cv: Condvar::new(),
            stats: Mutex::new(CommStats::default()),
            timeout,
        }
    }

    fn fail(&self, st: &mut MutexGuard<'_, HubState<T>>, msg: String) {
        if st.failure.is_none() {
            st.failure = Some(msg);
        }
        self.cv.notify_all();
    }

    fn reduce(&self, slots: Vec<Option<Payload<T>>>) -> std::result::Result<Reduced<T>, String> {
        let mut tensors = Vec::new();
        let mut scalars = Vec::new();
        let mut phase = None;
        for s in slots {
            match s {
                Some(Payload::Tensors(parts, ph)) => {
                    if phase.is_some_and(|p| p != ph) {
                        return Err(format!("workers disagree on collective phase ({phase:?} vs {ph:?})"));
                    }
                    phase = Some(ph);
                    tensors.extend(parts);
                }
                Some(Payload::Scalar(v)) => scalars.push(v),
                None => return Err("missing contribution".into()),
            }
        }
        let mut stats = self.stats.lock().unwrap();
        match (tensors.is_empty(), scalars.is_empty()) {
            (false, true) => {
                let out = allreduce_sum(&tensors).map_err(|e| e.to_string())?;
                stats.record(phase.unwrap(), out.len() as u64, self.p);
                Ok(Reduced::Tensor(out))
            }
            (true, false) => {
                stats.record(Phase::Diagnostic, 1, self.p);
                Ok(Reduced::Scalar(scalars.into_iter().fold(0.0, |a, v| a + v)))
            }
            _ => Err("workers issued different collective kinds".into()),
        }
    }

    fn exchange(&self, rank: usize, payload: Payload<T>) -> Result<Reduced<T>> {
        let mut st = self.state.lock().unwrap();
        if let Some(f) = &st.failure {
            return Err(Error::Collective(format!("run aborted: {f}")));
        }
        if st.exited > 0 {
            let msg = "a worker finished while others still issued collectives; \
                       every worker must call the hook the same number of times"
                .to_string();
            self.fail(&mut st, msg.clone());
            return Err(Error::Collective(msg));
        }
        st.slots[rank] = Some(payload);
        st.arrived += 1;
        let my_gen = st.generation;
        if st.arrived == self.p {
            let slots = std::mem::replace(&mut st.slots, (0..self.p).map(|_| None).collect());
            let res = self.reduce(slots);
            st.arrived = 0;
            st.generation += 1;
            st.result = Some(res.clone());
            if let Err(e) = &res {
                self.fail(&mut st, e.clone());
            }
            self.cv.notify_all();
            return res.map_err(Error::Collective);
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            if st.generation != my_gen {
                return st
                    .result
                    .clone()
                    .expect("completed generation stores a result")
                    .map_err(Error::Collective);
            }
            if let Some(f) = &st.failure {
                return Err(Error::Collective(format!("run aborted: {f}")));
            }
            if st.exited > 0 {
                let msg = "a worker finished while others waited at the barrier; \
                           every worker must call the hook the same number of times"
                    .to_string();
                self.fail(&mut st, msg.clone());
                return Err(Error::Collective(msg));
            }
            let now = Instant::now();
            if now >= deadline {
                let msg = format!("barrier timeout after {:?}", self.timeout);
                self.fail(&mut st, msg.clone());
                return Err(Error::Collective(msg));
            }
            st = self.cv.wait_timeout(st, deadline - now).unwrap().0;
        }
    }

    fn finish(&self, rank: usize, failed: Option<String>) {
        let mut st = self.state.lock().unwrap();
        st.exited += 1;
        if let Some(msg) = failed {
            if st.failure.is_none() {
                st.root_failure = Some(rank);
            }
            self.fail(&mut st, format!("worker {rank}: {msg}"));
        }
        self.cv.notify_all();
    }
}

/// Per-worker handle to the shared allreduce.
pub struct WorkerComm<'a, T> {
    hub: &'a Hub<T>,
    rank: usize,
}

impl<T: Real> Collective<T> for WorkerComm<'_, T> {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.hub.p
    }

    fn allreduce(&self, parts: Vec<ComplexTensor<T>>, phase: Phase) -> Result<ComplexTensor<T>> {
        if parts.is_empty() {
            return Err(Error::Collective("worker contributed no tensors".into()));
        }
        match self.hub.exchange(self.rank, Payload::Tensors(parts, phase))? {
            Reduced::Tensor(t) => Ok(t),
            Reduced::Scalar(_) => unreachable!("tensor collective returned a scalar"),
        }
    }

    fn allreduce_scalar(&self, value: f64) -> Result<f64> {
        match self.hub.exchange(self.rank, Payload::Scalar(value))? {
            Reduced::Scalar(v) => Ok(v),
            Reduced::Tensor(_) => unreachable!("scalar collective returned a tensor"),
        }
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "worker panicked".to_string()
    }
}

/// Runs `body` on `p` worker threads and collects results in worker order.
///
/// If any worker fails, the others are released from the barrier with an
/// error and the first failing worker's error is returned.
pub fn run_spmd<T, R, F>(p: usize, body: F) -> Result<(Vec<R>, CommStats)>
where
    T: Real,
    R: Send,
    F: Fn(&WorkerComm<'_, T>) -> Result<R> + Sync,
{
    run_spmd_with(p, SpmdConfig::default(), body)
}

pub fn run_spmd_with<T, R, F>(p: usize, config: SpmdConfig, body: F) -> Result<(Vec<R>, CommStats)>
where
    T: Real,
    R: Send,
    F: Fn(&WorkerComm<'_, T>) -> Result<R> + Sync,
{
    if p < 1 {
        return Err(Error::InvalidArgument("need at least one worker".into()));
    }
    let hub = Hub::<T>::new(p, config.barrier_timeout);
    let results: Vec<Result<R>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..p)
            .map(|rank| {
                let hub = &hub;
                let body = &body;
                s.spawn(move || {
                    let comm = WorkerComm { hub, rank };
                    let out = match catch_unwind(AssertUnwindSafe(|| body(&comm))) {
                        Ok(r) => r,
                        Err(panic) => Err(Error::Collective(format!(
                            "worker panicked: {}",
                            panic_message(panic)
                        ))),
                    };
                    hub.finish(rank, out.as_ref().err().map(|e| e.to_string()));
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked outside catch_unwind"))
            .collect()
    });

    let root = hub.state.lock().unwrap().root_failure;
    let mut results = results;
    if let Some(r) = root {
        let err = std::mem::replace(&mut results[r], Err(Error::Collective(String::new())));
        return Err(Error::Worker {
            worker: r,
            source: Box::new(err.err().expect("root failure is an error")),
        });
    }
    let mut out = Vec::with_capacity(p);
    for (w, r) in results.into_iter().enumerate() {
        out.push(r.map_err(|e| Error::Worker {
            worker: w,
            source: Box::new(e),
        })?);
    }
    let stats = hub.stats.into_inner().unwrap();
    Ok((out, stats))
}
