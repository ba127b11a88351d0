//! Segment-based parallel SQUFOF and the multiplier baseline.
//!
//! A coordinator squares a short principal-cycle form into a ladder
//! `F_j = G^{2^j}` and mints consecutive cycle segments from it. Workers
//! walk their segment two steps at a time; a square leading coefficient is
//! carried back toward the symmetry point by an inverse square root, the
//! segment's root form, and ladder forms picked by the pair count.

pub mod bench;
pub mod wire;

use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contfrac::{self, CfError, Convention, Radicand};
use crate::infra::DistanceAccumulator;
use crate::nt::{self, CfInt};
use crate::qforms::{self, FormError, QuadForm};
use crate::report::{FactorReport, Method};
use crate::squfof::{self, BookkeepingSample, SqufofConfig, SqufofError, MULTIPLIER_LADDER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParallelError {
    #[error(transparent)]
    Squfof(#[from] SqufofError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error("exhausted after {steps} steps over {segments} segments")]
    Exhausted { steps: u64, segments: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// A form with its distance from the principal form `φ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedForm {
    pub form: QuadForm,
    pub dist: f64,
}

impl TrackedForm {
    /// `self # other` with the distance carried through.
    pub fn compose(&self, other: &TrackedForm) -> Result<TrackedForm, FormError> {
        let c = self.form.compose_reduce(&other.form)?;
        let dist = self.dist + other.dist + c.distance_shift();
        Ok(TrackedForm { form: c.form, dist })
    }

    pub fn square(&self) -> Result<TrackedForm, FormError> {
        self.compose(self)
    }
}

/// `F_j = G^{2^j}` for `j = 0..=size`, with `G` a few steps into the principal cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub n: BigUint,
    pub multiplier: u64,
    pub origin: TrackedForm,
    pub forms: Vec<TrackedForm>,
}

impl Ladder {
    pub fn size(&self) -> usize {
        self.forms.len() - 1
    }

    pub fn top(&self) -> &TrackedForm {
        self.forms.last().expect("ladder is never empty")
    }
}

/// Builds the ladder on the principal cycle of `kN` (discriminant `4kN`).
/// `base_steps` is how far `G` sits from `φ₀`.
pub fn prepare_ladder(n: &BigUint, multiplier: u64, size: usize, base_steps: u32) -> Result<Ladder, ParallelError> {
    if !(1..=60).contains(&size) {
        return Err(ParallelError::InvalidConfig(format!("ladder size {size} outside 1..=60")));
    }
    let kn = n * multiplier;
    let mut s = contfrac::init_expansion::<BigInt>(&kn, Convention::Standard)?;
    s.advance();
    let origin = TrackedForm { form: qforms::cycle_form(&s), dist: 0.0 };
    let mut acc = DistanceAccumulator::default();
    for _ in 0..base_steps.max(1) {
        acc.push(s.complete_quotient());
        s.advance();
    }
    let mut forms = vec![TrackedForm { form: qforms::cycle_form(&s), dist: acc.value() }];
    for _ in 0..size {
        let next = forms.last().expect("non-empty").square()?;
        forms.push(next);
    }
    Ok(Ladder { n: n.clone(), multiplier, origin, forms })
}

/// A stretch of the principal cycle assigned to one worker.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub job: u64,
    pub seq: u64,
    pub start: TrackedForm,
    pub end: TrackedForm,
    pub root_s: TrackedForm,
    pub ladder: Arc<Ladder>,
}

impl Segment {
    /// Nominal length `δ(F_end) − δ(F_start)`.
    pub fn nominal_length(&self) -> f64 {
        self.end.dist - self.start.dist
    }
}

/// Mints segment 0 = `[φ₀, F_size]` and then the successive segments of
/// the coordinator recurrence
/// `F_start ← F_end, F_rootS ← F_rootE, F_rootE ← F_rootE·F_step, F_end ← F_rootE²`.
#[derive(Debug, Clone)]
pub struct SegmentMinter {
    job: u64,
    ladder: Arc<Ladder>,
    seq: u64,
    start: TrackedForm,
    end: TrackedForm,
    root_s: TrackedForm,
    root_e: TrackedForm,
    step: TrackedForm,
}

impl SegmentMinter {
    pub fn new(job: u64, ladder: Arc<Ladder>) -> Result<Self, ParallelError> {
        let size = ladder.size();
        let top = ladder.top().clone();
        let below = ladder.forms[size - 1].clone();
        Ok(SegmentMinter {
            job,
            seq: 0,
            start: top.clone(),
            end: top.square()?,
            root_s: below.clone(),
            root_e: top,
            step: below,
            ladder,
        })
    }

    pub fn next_segment(&mut self) -> Result<Segment, ParallelError> {
        let seq = self.seq;
        self.seq += 1;
        if seq == 0 {
            let origin = self.ladder.origin.clone();
            return Ok(Segment {
                job: self.job,
                seq,
                start: origin.clone(),
                end: self.ladder.top().clone(),
                root_s: origin,
                ladder: self.ladder.clone(),
            });
        }
        let seg = Segment {
            job: self.job,
            seq,
            start: self.start.clone(),
            end: self.end.clone(),
            root_s: self.root_s.clone(),
            ladder: self.ladder.clone(),
        };
        self.start = self.end.clone();
        self.root_s = self.root_e.clone();
        self.root_e = self.root_e.compose(&self.step)?;
        self.end = self.root_e.square()?;
        Ok(seg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkerStats {
    pub steps: u64,
    pub squares_tested: u64,
    pub reverse_steps: u64,
    pub bookkeeping: Vec<BookkeepingSample>,
}

impl WorkerStats {
    fn absorb(&mut self, o: &WorkerStats) {
        self.steps += o.steps;
        self.squares_tested += o.squares_tested;
        self.reverse_steps += o.reverse_steps;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentOutcome {
    Factor(BigUint),
    Exhausted,
    Cancelled,
    /// The walk came back to the principal form, so the whole cycle is covered.
    Wrapped,
}

/// Why a task ended without a factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Exhausted,
    Cancelled,
    Wrapped,
}

/// Carries a square form `H` found in `seg` back toward the symmetry point
/// and searches both directions; returns `(divisor, reverse steps, sample)`.
fn resolve_square<T: CfInt>(
    rad: &Arc<Radicand<T>>,
    seg: &Segment,
    h: &QuadForm,
    root: &BigInt,
    count: u64,
    walked: f64,
) -> Result<(Option<BigUint>, u64, BookkeepingSample), ParallelError> {
    // F_test ← H^{−1/2}: the reduced form (s, −B, s·C)
    let inv = QuadForm::with_disc(root.clone(), -&h.b, h.disc())?;
    let red = inv.reduce()?;
    let mut track = red.dist;
    let mut test = TrackedForm { form: red.form, dist: 0.0 };
    let c = test.form.compose_reduce(&seg.root_s.form)?;
    track += seg.root_s.dist + c.distance_shift();
    test.form = c.form;
    let mut rest = count;
    for j in (1..=seg.ladder.size()).rev() {
        if rest > 1u64 << j {
            let f = &seg.ladder.forms[j];
            let c = test.form.compose_reduce(&f.form)?;
            track += f.dist + c.distance_shift();
            test.form = c.form;
            rest -= 1u64 << j;
        }
    }
    let predicted = (seg.start.dist + walked) / 2.0 - track;
    let n = &seg.ladder.n;
    let bound = 4 * count + 4096;
    match squfof::reverse_symmetry_search(rad, &test.form, n, bound) {
        Ok(hit) => {
            let sample = BookkeepingSample { index: count, predicted, observed: hit.nearest(predicted) };
            Ok((hit.factor, hit.steps, sample))
        }
        Err(SqufofError::Exhausted { .. }) => Ok((None, bound, BookkeepingSample { index: count, predicted, observed: f64::NAN })),
        Err(e) => Err(e.into()),
    }
}

/// Scans one segment in strides of two `ρ`-steps.
pub fn worker_run<T: CfInt>(seg: &Segment, cancel: &dyn Fn() -> bool) -> Result<(SegmentOutcome, WorkerStats), ParallelError> {
    let kn = &seg.ladder.n * seg.ladder.multiplier;
    let rad = Radicand::<T>::new(&kn, Convention::Standard)?;
    let mut cur = qforms::cursor_of_form(&rad, &seg.start.form)?;
    let end = qforms::cursor_of_form(&rad, &seg.end.form)?;
    let origin = qforms::cursor_of_form(&rad, &seg.ladder.origin.form)?;
    let ln_n = nt::ln_abs(&BigInt::from(kn.clone()));
    let budget = seg.nominal_length().abs() + 4.0 * ln_n + 64.0;
    let mut stats = WorkerStats::default();
    let mut acc = DistanceAccumulator::default();
    let mut count = 0u64;
    // leading coefficient of cycle_form(cur) is positive exactly at odd cursor indices
    let mut pending = if cur.index() & 1 == 0 { 1 } else { 2 };
    loop {
        for _ in 0..pending {
            acc.push(cur.complete_quotient());
            cur.advance();
            stats.steps += 1;
            if cur.same_position(&origin) {
                return Ok((SegmentOutcome::Wrapped, stats));
            }
            if cur.same_position(&end) {
                return Ok((SegmentOutcome::Exhausted, stats));
            }
        }
        pending = 2;
        count += 1;
        if count & 511 == 0 {
            if cancel() {
                return Ok((SegmentOutcome::Cancelled, stats));
            }
            if acc.value() > budget {
                return Ok((SegmentOutcome::Exhausted, stats));
            }
        }
        if let Some(s) = cur.q_prev().perfect_sqrt() {
            stats.squares_tested += 1;
            let root = s.to_bigint();
            if root.is_one() {
                return Ok((SegmentOutcome::Wrapped, stats));
            }
            let g = root.magnitude().gcd(&seg.ladder.n);
            if !g.is_one() && g != seg.ladder.n {
                return Ok((SegmentOutcome::Factor(g), stats));
            }
            let h = qforms::cycle_form(&cur);
            let (factor, rev, sample) = resolve_square(&rad, seg, &h, &root, count, acc.value())?;
            stats.reverse_steps += rev;
            stats.bookkeeping.push(sample);
            if let Some(f) = factor {
                return Ok((SegmentOutcome::Factor(f), stats));
            }
        }
    }
}

/// [`worker_run`] on the narrowest engine that fits `kN`.
pub fn worker_run_dispatch(seg: &Segment, cancel: &dyn Fn() -> bool) -> Result<(SegmentOutcome, WorkerStats), ParallelError> {
    let kn = &seg.ladder.n * seg.ladder.multiplier;
    crate::dispatch_engine!(&kn, worker_run(seg, cancel))
}

/// Serial SQUFOF on `k·N` as a unit of work for the multiplier method.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierTask {
    pub job: u64,
    pub seq: u64,
    pub n: BigUint,
    pub multiplier: u64,
    pub max_forward_steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Segment(Segment),
    Multiplier(MultiplierTask),
}

impl Task {
    pub fn job(&self) -> u64 {
        match self {
            Task::Segment(s) => s.job,
            Task::Multiplier(m) => m.job,
        }
    }

    pub fn seq(&self) -> u64 {
        match self {
            Task::Segment(s) => s.seq,
            Task::Multiplier(m) => m.seq,
        }
    }
}

/// The only coupling between coordinator and workers.
#[derive(Debug, Clone, PartialEq)]
pub enum WorkerMessage {
    Assign(Task),
    FactorFound { worker: u32, job: u64, seq: u64, report: FactorReport, stats: WorkerStats },
    SegmentExhausted { worker: u32, job: u64, seq: u64, reason: StopReason, stats: WorkerStats },
    ProtocolError { worker: u32, job: u64, seq: u64, reason: String },
    /// `Some(job)` abandons that job; `None` stops the worker thread.
    Shutdown { job: Option<u64> },
}

fn run_task(worker: u32, task: &Task, cancel: &dyn Fn() -> bool) -> WorkerMessage {
    let (job, seq) = (task.job(), task.seq());
    let start = Instant::now();
    let (n, k, result) = match task {
        Task::Segment(seg) => (
            seg.ladder.n.clone(),
            seg.ladder.multiplier,
            worker_run_dispatch(seg, cancel),
        ),
        Task::Multiplier(m) => {
            let cfg = SqufofConfig { multiplier: m.multiplier, escalate: false, max_forward_steps: m.max_forward_steps, ..SqufofConfig::default() };
            let r = match squfof::attempt_dispatch(&m.n, m.multiplier, &cfg, cancel) {
                Ok((d, st)) => Ok((SegmentOutcome::Factor(d), to_worker_stats(&st))),
                Err((SqufofError::Cancelled, st)) => Ok((SegmentOutcome::Cancelled, to_worker_stats(&st))),
                Err((SqufofError::Exhausted { .. } | SqufofError::TrivialSymmetry, st)) => Ok((SegmentOutcome::Exhausted, to_worker_stats(&st))),
                Err((e, _)) => Err(ParallelError::from(e)),
            };
            (m.n.clone(), m.multiplier, r)
        }
    };
    match result {
        Ok((SegmentOutcome::Factor(d), stats)) => match FactorReport::from_divisor(&n, &d, Method::Parallel) {
            Some(mut report) => {
                report.multiplier = k;
                report.forward_steps = stats.steps;
                report.reverse_steps = stats.reverse_steps;
                report.squares_tested = stats.squares_tested;
                report.wall_time = start.elapsed();
                WorkerMessage::FactorFound { worker, job, seq, report, stats }
            }
            None => WorkerMessage::ProtocolError { worker, job, seq, reason: format!("{d} does not split {n}") },
        },
        Ok((outcome, stats)) => {
            let reason = match outcome {
                SegmentOutcome::Cancelled => StopReason::Cancelled,
                SegmentOutcome::Wrapped => StopReason::Wrapped,
                _ => StopReason::Exhausted,
            };
            WorkerMessage::SegmentExhausted { worker, job, seq, reason, stats }
        }
        Err(e) => WorkerMessage::ProtocolError { worker, job, seq, reason: e.to_string() },
    }
}

fn to_worker_stats(s: &squfof::AttemptStats) -> WorkerStats {
    WorkerStats { steps: s.forward_steps, squares_tested: s.squares_tested, reverse_steps: s.reverse_steps, bookkeeping: Vec::new() }
}

fn worker_loop(id: u32, inbox: Receiver<WorkerMessage>, outbox: Sender<WorkerMessage>) {
    while let Ok(msg) = inbox.recv() {
        match msg {
            WorkerMessage::Assign(task) => {
                let job = task.job();
                let stop = std::cell::Cell::new(false);
                let cancel = || {
                    loop {
                        match inbox.try_recv() {
                            Ok(WorkerMessage::Shutdown { job: None }) | Err(TryRecvError::Disconnected) => {
                                stop.set(true);
                                return true;
                            }
                            Ok(WorkerMessage::Shutdown { job: Some(j) }) if j == job => return true,
                            Ok(_) => continue,
                            Err(TryRecvError::Empty) => return false,
                        }
                    }
                };
                let reply = run_task(id, &task, &cancel);
                if outbox.send(reply).is_err() || stop.get() {
                    return;
                }
            }
            WorkerMessage::Shutdown { job: None } => return,
            WorkerMessage::Shutdown { job: Some(_) } => {}
            other => {
                let reason = format!("unexpected message for a worker: {other:?}");
                if outbox.send(WorkerMessage::ProtocolError { worker: id, job: 0, seq: 0, reason }).is_err() {
                    return;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelConfig {
    /// Ladder size; `None` picks `⌊log₂ N^{1/4}⌋ − 3` clamped to `2..=30`.
    pub size: Option<usize>,
    pub base_steps: u32,
    /// Total step budget per multiplier; `None` uses twice the serial bound.
    pub max_total_steps: Option<u64>,
    /// Escalate through the multiplier ladder when a multiplier is exhausted.
    pub escalate: bool,
}

impl Default for ParallelConfig {
    fn default() -> Self {
        ParallelConfig { size: None, base_steps: 1, max_total_steps: None, escalate: true }
    }
}

pub fn default_ladder_size(kn: &BigUint) -> usize {
    let quarter_bits = (kn.bits() / 4) as usize;
    quarter_bits.saturating_sub(3).clamp(2, 30)
}

/// Per-task record kept by the coordinator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub multiplier: u64,
    pub seq: u64,
    pub worker: u32,
    pub steps: u64,
    pub squares_tested: u64,
    pub outcome: TaskOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskOutcome {
    Won,
    /// Found a factor after another task had already won.
    Late,
    Exhausted,
    Cancelled,
    /// Reached the principal form again; no more segments are minted for this multiplier.
    Wrapped,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelReport {
    pub report: FactorReport,
    pub tasks: Vec<TaskRecord>,
    pub segments: u64,
    pub bookkeeping: Vec<BookkeepingSample>,
}

/// Long-lived worker threads, reusable across factorizations.
pub struct WorkerPool {
    inboxes: Vec<Sender<WorkerMessage>>,
    results: Receiver<WorkerMessage>,
    handles: Vec<JoinHandle<()>>,
    next_job: u64,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self, ParallelError> {
        if workers == 0 {
            return Err(ParallelError::InvalidConfig("at least one worker is required".into()));
        }
        let (out_tx, results) = mpsc::channel();
        let mut inboxes = Vec::with_capacity(workers);
        let mut handles = Vec::with_capacity(workers);
        for id in 0..workers {
            let (tx, rx) = mpsc::channel();
            let out = out_tx.clone();
            let h = thread::Builder::new()
                .name(format!("squfof-worker-{id}"))
                .spawn(move || worker_loop(id as u32, rx, out))
                .map_err(|e| ParallelError::Protocol(e.to_string()))?;
            inboxes.push(tx);
            handles.push(h);
        }
        Ok(WorkerPool { inboxes, results, handles, next_job: 1 })
    }

    pub fn workers(&self) -> usize {
        self.inboxes.len()
    }

    fn send(&self, worker: usize, msg: WorkerMessage) -> Result<(), ParallelError> {
        self.inboxes[worker].send(msg).map_err(|_| ParallelError::Protocol(format!("worker {worker} is gone")))
    }

    fn broadcast_cancel(&self, job: u64) {
        for tx in &self.inboxes {
            let _ = tx.send(WorkerMessage::Shutdown { job: Some(job) });
        }
    }

    /// Drives one job: hands out tasks from `next_task` to idle workers and
    /// accepts the first validated factor. Returns once no task is in flight.
    fn drive(
        &mut self,
        n: &BigUint,
        job: u64,
        next_task: &mut dyn FnMut(u64) -> Result<Option<Task>, ParallelError>,
        records: &mut Vec<TaskRecord>,
        totals: &mut WorkerStats,
        samples: &mut Vec<BookkeepingSample>,
    ) -> Result<Option<FactorReport>, ParallelError> {
        let mut in_flight = 0usize;
        let mut accepted: Option<FactorReport> = None;
        let mut fatal: Option<ParallelError> = None;
        let mut closed = false;
        let mut multipliers = std::collections::HashMap::new();
        let mut assign = |pool: &Self, w: usize, spent: u64, in_flight: &mut usize, mults: &mut std::collections::HashMap<u64, u64>| -> Result<bool, ParallelError> {
            match next_task(spent)? {
                Some(task) => {
                    let k = match &task {
                        Task::Segment(s) => s.ladder.multiplier,
                        Task::Multiplier(m) => m.multiplier,
                    };
                    mults.insert(task.seq(), k);
                    pool.send(w, WorkerMessage::Assign(task))?;
                    *in_flight += 1;
                    Ok(true)
                }
                None => Ok(false),
            }
        };
        for w in 0..self.workers() {
            if !assign(self, w, totals.steps, &mut in_flight, &mut multipliers)? {
                break;
            }
        }
        while in_flight > 0 {
            let msg = self.results.recv().map_err(|_| ParallelError::Protocol("all workers are gone".into()))?;
            let (worker, seq, outcome, stats) = match msg {
                WorkerMessage::FactorFound { worker, job: j, seq, report, stats } if j == job => {
                    let outcome = if accepted.is_none() && report.is_valid() && report.n == *n {
                        accepted = Some(report);
                        self.broadcast_cancel(job);
                        TaskOutcome::Won
                    } else {
                        TaskOutcome::Late
                    };
                    (worker, seq, outcome, stats)
                }
                WorkerMessage::SegmentExhausted { worker, job: j, seq, reason, stats } if j == job => {
                    let outcome = match reason {
                        StopReason::Exhausted => TaskOutcome::Exhausted,
                        StopReason::Cancelled => TaskOutcome::Cancelled,
                        StopReason::Wrapped => {
                            closed = true;
                            TaskOutcome::Wrapped
                        }
                    };
                    (worker, seq, outcome, stats)
                }
                WorkerMessage::ProtocolError { worker, job: j, seq, reason } if j == job || j == 0 => {
                    if fatal.is_none() {
                        fatal = Some(ParallelError::Protocol(reason));
                        self.broadcast_cancel(job);
                    }
                    (worker, seq, TaskOutcome::Error, WorkerStats::default())
                }
                // stale traffic from an earlier job
                _ => continue,
            };
            in_flight -= 1;
            totals.absorb(&stats);
            samples.extend(stats.bookkeeping.iter().copied());
            records.push(TaskRecord {
                multiplier: multipliers.get(&seq).copied().unwrap_or(0),
                seq,
                worker,
                steps: stats.steps,
                squares_tested: stats.squares_tested,
                outcome,
            });
            if accepted.is_none() && fatal.is_none() && !closed {
                assign(self, worker as usize, totals.steps, &mut in_flight, &mut multipliers)?;
            }
        }
        match fatal {
            Some(e) if accepted.is_none() => Err(e),
            _ => Ok(accepted),
        }
    }

    fn begin_job(&mut self) -> u64 {
        let job = self.next_job;
        self.next_job += 1;
        job
    }

    /// Segment-based parallel SQUFOF.
    pub fn factor_segments(&mut self, n: &BigUint, cfg: &ParallelConfig) -> Result<ParallelReport, ParallelError> {
        let start = Instant::now();
        if let Some(rep) = squfof::preflight(n)? {
            return Ok(ParallelReport { report: rep, tasks: Vec::new(), segments: 0, bookkeeping: Vec::new() });
        }
        let ks: Vec<u64> = if cfg.escalate { MULTIPLIER_LADDER.to_vec() } else { vec![1] };
        let mut records = Vec::new();
        let mut totals = WorkerStats::default();
        let mut samples = Vec::new();
        let mut segments = 0u64;
        for k in ks {
            let kn = n * k;
            let size = cfg.size.unwrap_or_else(|| default_ladder_size(&kn));
            let ladder = Arc::new(prepare_ladder(n, k, size, cfg.base_steps)?);
            let job = self.begin_job();
            let mut minter = SegmentMinter::new(job, ladder)?;
            let budget = cfg.max_total_steps.unwrap_or_else(|| 2 * squfof::default_step_bound(&kn));
            let spent_before = totals.steps;
            let mut minted = 0u64;
            let mut next = |spent: u64| -> Result<Option<Task>, ParallelError> {
                if spent - spent_before >= budget {
                    return Ok(None);
                }
                minted += 1;
                Ok(Some(Task::Segment(minter.next_segment()?)))
            };
            let found = self.drive(n, job, &mut next, &mut records, &mut totals, &mut samples)?;
            segments += minted;
            if let Some(mut report) = found {
                report.forward_steps = totals.steps;
                report.reverse_steps = totals.reverse_steps;
                report.squares_tested = totals.squares_tested;
                report.wall_time = start.elapsed();
                return Ok(ParallelReport { report, tasks: records, segments, bookkeeping: samples });
            }
        }
        Err(ParallelError::Exhausted { steps: totals.steps, segments })
    }

    /// Multiplier-based parallel SQUFOF: serial runs on `kᵢ·N`, first valid divisor of `N` wins.
    pub fn factor_multipliers(&mut self, n: &BigUint, multipliers: &[u64], max_forward_steps: Option<u64>) -> Result<ParallelReport, ParallelError> {
        let start = Instant::now();
        if multipliers.is_empty() || multipliers.contains(&0) {
            return Err(ParallelError::InvalidConfig("multipliers must be positive and non-empty".into()));
        }
        let mut sorted = multipliers.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != multipliers.len() {
            return Err(ParallelError::InvalidConfig("multipliers must be distinct".into()));
        }
        if let Some(rep) = squfof::preflight(n)? {
            return Ok(ParallelReport { report: rep, tasks: Vec::new(), segments: 0, bookkeeping: Vec::new() });
        }
        let job = self.begin_job();
        let mut queue = multipliers.iter().copied().enumerate();
        let mut next = |_spent: u64| -> Result<Option<Task>, ParallelError> {
            Ok(queue.next().map(|(seq, k)| {
                Task::Multiplier(MultiplierTask { job, seq: seq as u64, n: n.clone(), multiplier: k, max_forward_steps })
            }))
        };
        let mut records = Vec::new();
        let mut totals = WorkerStats::default();
        let mut samples = Vec::new();
        let found = self.drive(n, job, &mut next, &mut records, &mut totals, &mut samples)?;
        match found {
            Some(mut report) => {
                report.forward_steps = totals.steps;
                report.reverse_steps = totals.reverse_steps;
                report.squares_tested = totals.squares_tested;
                report.wall_time = start.elapsed();
                Ok(ParallelReport { report, tasks: records, segments: 0, bookkeeping: samples })
            }
            None => Err(ParallelError::Exhausted { steps: totals.steps, segments: 0 }),
        }
    }
}

impl Drop for WorkerPool {
    fn drop(&mut self) {
        for tx in &self.inboxes {
            let _ = tx.send(WorkerMessage::Shutdown { job: None });
        }
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

/// One-shot segment run on a fresh pool.
pub fn coordinator_run(n: &BigUint, size: Option<usize>, workers: usize) -> Result<ParallelReport, ParallelError> {
    let mut pool = WorkerPool::new(workers)?;
    pool.factor_segments(n, &ParallelConfig { size, ..ParallelConfig::default() })
}

/// One-shot multiplier run on a fresh pool.
pub fn multiplier_factor(n: &BigUint, workers: usize, multipliers: &[u64]) -> Result<ParallelReport, ParallelError> {
    let mut pool = WorkerPool::new(workers)?;
    pool.factor_multipliers(n, multipliers, None)
}

/// Wall-clock helper for the bench harness.
pub(crate) fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[allow(dead_code)]
fn _assert_send() {
    fn is_send<T: Send>() {}
    is_send::<WorkerMessage>();
    is_send::<Segment>();
}
