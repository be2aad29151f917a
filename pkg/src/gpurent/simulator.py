"""Discrete-event execution of allocation policies against a trace.

One strictly single-threaded event loop drives both policies:

* fixed-width: each job looks up its pre-computed width per (class, epoch);
  initial placement and every width change trigger a rescaling phase during
  which the job occupies its NEW width but makes no progress. No job ever
  queues (given zero provisioning delay).
* efficiency target: the autoscaling baseline. Arrivals queue until the next
  scheduling quantum. Inside the efficiency band c +- delta the policy only
  slots queued jobs into idle GPUs; when cluster efficiency (sum of allocated
  speedups / rented GPUs) leaves the band, or queued jobs outnumber idle
  GPUs, it searches cluster sizes for the greedy-waterfilled allocation whose
  efficiency is closest to c and reallocates, rescaling every job whose
  width changed.

Event-queue ties break by (time, event-kind priority, job id), so identical
inputs produce identical event logs. Usage integrates rented GPUs: for
fixed-width that is the node-rounded sum of job widths; for the baseline the
provisioned cluster size (idle GPUs included, tracked separately).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import PlanCoverageError
from .optimizer import WidthPlan
from .width_calculator import RecomputeHook
from .workload import Trace, WorkloadSpec

__all__ = [
    "SimConfig",
    "JobState",
    "SimMetrics",
    "EventRecord",
    "FixedWidthPolicy",
    "EfficiencyTargetPolicy",
    "simulate",
    "compute_metrics",
    "compare",
    "CompareRow",
]

# event-kind priorities for same-timestamp ordering
_P_RESCALE_END = 0
_P_EPOCH_DONE = 1
_P_PROVISIONED = 2
_P_ARRIVAL = 3
_P_CAPACITY = 4
_P_QUANTUM = 5
_P_RECOMPUTE = 6


@dataclass
class SimConfig:
    gpus_per_node: int = 4
    provisioning_delay: float = 0.0
    horizon: float | None = None
    recompute_interval: float | None = None  # fixed-width policy only
    quantum: float = 60.0  # baseline only
    seed: int = 0

    def __post_init__(self):
        if self.gpus_per_node < 1:
            raise ValueError("gpus_per_node must be >= 1")
        if self.provisioning_delay < 0.0:
            raise ValueError("provisioning_delay must be >= 0")
        if self.quantum <= 0.0:
            raise ValueError("quantum must be positive")


@dataclass
class JobState:
    job_id: int
    class_id: str
    arrival_time: float
    current_epoch: int = 0
    remaining_work: float = 0.0
    current_width: float = 0.0
    phase: str = "pending"  # pending (pre-arrival) | queued | provisioning | rescaling | running | done
    completion_time: float | None = None
    # internal bookkeeping
    gen: int = 0  # invalidates stale scheduled events
    running_since: float = 0.0
    rate: float = 0.0
    acct_since: float = 0.0
    gpu_seconds: float = 0.0


@dataclass
class EventRecord:
    t: float
    event: str  # arrive|rescale_start|rescale_end|epoch_done|complete|cluster_resize
    job: int | None
    k: float
    cluster_gpus: float

    def to_json(self) -> dict:
        return {"t": self.t, "event": self.event, "job": self.job, "k": self.k, "cluster_gpus": self.cluster_gpus}


@dataclass
class SimMetrics:
    mean_jct: float
    p95_jct: float
    time_avg_usage: float
    usage_series: list[tuple[float, float]]
    efficiency_series: list[tuple[float, float]]
    per_job_gpu_hours: list[float]
    interarrival_c2: float
    n_completed: int
    horizon: float
    idle_gpu_time: float  # integral of (rented - occupied), GPU-seconds
    queue_events: int
    truncated: bool


class FixedWidthPolicy:
    """Executes a pre-computed width plan; optionally refreshed periodically."""

    kind = "fixed_width"

    def __init__(self, plan: WidthPlan | None = None, recompute: RecomputeHook | None = None):
        if plan is None and recompute is None:
            raise ValueError("fixed-width policy needs a plan, a recompute hook, or both")
        self.plan = plan
        self.recompute = recompute
        self.plan_history: list[tuple[float, WidthPlan]] = []

    @property
    def param(self) -> float | None:
        if self.plan is not None:
            return self.plan.budget if self.plan.budget is not None else self.plan.run_budget
        return self.recompute.budget if self.recompute is not None else None


class EfficiencyTargetPolicy:
    """Autoscaling baseline keeping cluster efficiency near a target c."""

    kind = "efficiency_target"

    def __init__(self, c: float):
        if not 0.0 < c < 1.0:
            raise ValueError("target efficiency must lie in (0, 1)")
        self.c = c
        self.delta = min(0.3 * (1.0 - c), 0.3 * c)

    @property
    def param(self) -> float:
        return self.c


class _Engine:
    def __init__(self, trace: Trace, workload: WorkloadSpec, config: SimConfig):
        self.trace = trace
        self.workload = workload
        self.config = config
        self.t = 0.0
        self.heap: list[tuple[float, int, int, int, object]] = []
        self.seq = 0
        self.jobs: list[JobState] = []
        self.log: list[EventRecord] = []
        self.occupied = 0.0  # sum of job widths currently held
        self.rented = 0.0  # provisioned GPUs (>= occupied)
        self.acct_t = 0.0
        self.usage_integral = 0.0
        self.idle_integral = 0.0
        self.queue_events = 0
        self.end_t = 0.0
        self._class_of = {c.class_id: c for c in workload.classes}

    # -- event plumbing -----------------------------------------------------

    def push(self, t: float, prio: int, job_id: int, payload=None):
        self.seq += 1
        heapq.heappush(self.heap, (t, prio, job_id, self.seq, payload))

    def advance(self, t: float):
        dt = t - self.acct_t
        if dt > 0.0:
            self.usage_integral += self.rented * dt
            self.idle_integral += (self.rented - self.occupied) * dt
            self.acct_t = t

    def emit(self, event: str, job: JobState | None, k: float):
        self.log.append(EventRecord(t=self.t, event=event, job=None if job is None else job.job_id, k=k, cluster_gpus=self.rented))

    def set_rented(self, rented: float):
        self.advance(self.t)
        self.rented = rented

    def set_width(self, job: JobState, k: float):
        self.advance(self.t)
        if job.current_width:
            job.gpu_seconds += job.current_width * (self.t - job.acct_since)
        job.acct_since = self.t
        self.occupied += k - job.current_width
        job.current_width = k

    def node_round(self, gpus: float) -> float:
        gpn = self.config.gpus_per_node
        if gpn == 1:
            return gpus  # fractional widths rent fractional GPUs (no node rounding)
        return math.ceil(gpus / gpn - 1e-12) * gpn

    # -- shared job mechanics ------------------------------------------------

    def hull(self, job: JobState, epoch: int | None = None):
        j = job.current_epoch if epoch is None else epoch
        return self.workload.hull(job.class_id, j)

    def settle_progress(self, job: JobState):
        """Deduct work completed since the job last started running."""
        if job.phase == "running":
            job.remaining_work -= (self.t - job.running_since) * job.rate
            job.remaining_work = max(job.remaining_work, 0.0)

    def start_rescale(self, job: JobState, k_new: float):
        """Move a job into a rescaling phase at its new width."""
        self.settle_progress(job)
        job.gen += 1
        self.set_width(job, k_new)
        self._refresh_rented()
        job.phase = "rescaling"
        self.emit("rescale_start", job, k_new)
        dur = self.trace.events[job.job_id].rescale_draws[job.current_epoch]
        if dur > 0.0:
            self.push(self.t + dur, _P_RESCALE_END, job.job_id, job.gen)
        else:
            self.finish_rescale(job)

    def finish_rescale(self, job: JobState):
        job.phase = "running"
        job.running_since = self.t
        job.rate = self.hull(job).eval(job.current_width)
        self.emit("rescale_end", job, job.current_width)
        job.gen += 1
        done_at = self.t + job.remaining_work / job.rate
        self.push(done_at, _P_EPOCH_DONE, job.job_id, job.gen)

    def resume_running(self, job: JobState):
        """Re-schedule epoch completion after a width change without rescale."""
        job.rate = self.hull(job).eval(job.current_width)
        job.running_since = self.t
        job.gen += 1
        self.push(self.t + job.remaining_work / job.rate, _P_EPOCH_DONE, job.job_id, job.gen)

    def complete(self, job: JobState):
        self.set_width(job, 0.0)
        self._refresh_rented()
        job.phase = "done"
        job.completion_time = self.t
        self.emit("complete", job, 0.0)

    def _refresh_rented(self):
        """Fixed-width mode tracks rented = node-rounded occupancy; baseline overrides."""
        raise NotImplementedError

    def finalize(self, end_t: float):
        self.advance(end_t)
        self.end_t = end_t


class _FixedWidthEngine(_Engine):
    def __init__(self, trace, workload, config, policy: FixedWidthPolicy):
        super().__init__(trace, workload, config)
        self.policy = policy

    def _refresh_rented(self):
        self.advance(self.t)
        self.rented = self.node_round(self.occupied)

    def _width_for(self, job: JobState) -> float:
        return self.policy.plan.width(job.class_id, job.current_epoch)

    def run(self):
        cfg = self.config
        if self.policy.plan is None:
            self.policy.plan = self.policy.recompute.compute(0.0, self.workload)
        self.policy.plan_history.append((0.0, self.policy.plan))
        _check_plan_coverage(self.policy.plan, self.workload)

        for i, ev in enumerate(self.trace.events):
            c = self._class_of[ev.class_id]
            if len(ev.epoch_sizes) != c.n_epochs:
                raise ValueError(f"trace job {i}: {len(ev.epoch_sizes)} epoch sizes, class {ev.class_id} has {c.n_epochs}")
            self.jobs.append(JobState(job_id=i, class_id=ev.class_id, arrival_time=ev.arrival_time))
            self.push(ev.arrival_time, _P_ARRIVAL, i)
        interval = cfg.recompute_interval
        if interval is None and self.policy.recompute is not None:
            interval = self.policy.recompute.interval
        if interval is not None and self.policy.recompute is not None:
            self.push(interval, _P_RECOMPUTE, -1, 1)

        while self.heap:
            t, prio, job_id, _, payload = heapq.heappop(self.heap)
            if cfg.horizon is not None and t > cfg.horizon:
                self.finalize(cfg.horizon)
                return
            if prio == _P_RECOMPUTE and all(j.phase == "done" for j in self.jobs):
                continue  # nothing left to schedule; do not stretch the horizon
            self.t = t
            if prio == _P_ARRIVAL:
                job = self.jobs[job_id]
                job.remaining_work = self.trace.events[job_id].epoch_sizes[0]
                self.emit("arrive", job, 0.0)
                if cfg.provisioning_delay > 0.0:
                    job.phase = "provisioning"
                    self.push(t + cfg.provisioning_delay, _P_PROVISIONED, job_id, job.gen)
                else:
                    self.start_rescale(job, self._width_for(job))
            elif prio == _P_PROVISIONED:
                job = self.jobs[job_id]
                if payload != job.gen:
                    continue
                self.start_rescale(job, self._width_for(job))
            elif prio == _P_RESCALE_END:
                job = self.jobs[job_id]
                if payload != job.gen:
                    continue
                self.finish_rescale(job)
            elif prio == _P_EPOCH_DONE:
                job = self.jobs[job_id]
                if payload != job.gen:
                    continue
                self._epoch_done(job)
            elif prio == _P_RECOMPUTE:
                n = payload
                self.policy.plan = self.policy.recompute.compute(t, self.workload)
                self.policy.plan_history.append((t, self.policy.plan))
                _check_plan_coverage(self.policy.plan, self.workload)
                if any(j.phase not in ("done",) for j in self.jobs) or self.heap:
                    self.push((n + 1) * interval, _P_RECOMPUTE, -1, n + 1)
        self.finalize(self.t)

    def _epoch_done(self, job: JobState):
        job.remaining_work = 0.0
        self.emit("epoch_done", job, job.current_width)
        job.current_epoch += 1
        c = self._class_of[job.class_id]
        if job.current_epoch >= c.n_epochs:
            self.complete(job)
            return
        job.remaining_work = self.trace.events[job.job_id].epoch_sizes[job.current_epoch]
        job.running_since = self.t  # previous epoch fully settled
        k_next = self._width_for(job)
        if k_next != job.current_width:
            self.start_rescale(job, k_next)
        else:
            self.resume_running(job)


class _EfficiencyEngine(_Engine):
    def __init__(self, trace, workload, config, policy: EfficiencyTargetPolicy):
        super().__init__(trace, workload, config)
        self.policy = policy
        self.pending_arrivals = len(trace.events)
        # one outstanding capacity order: (eta, target K); upscales take
        # provisioning_delay to come online, downscales apply immediately
        self.order: tuple[float, float] | None = None
        self.order_gen = 0

    def _refresh_rented(self):
        pass  # rented is set only by quantum decisions

    def run(self):
        cfg = self.config
        for i, ev in enumerate(self.trace.events):
            c = self._class_of[ev.class_id]
            if len(ev.epoch_sizes) != c.n_epochs:
                raise ValueError(f"trace job {i}: {len(ev.epoch_sizes)} epoch sizes, class {ev.class_id} has {c.n_epochs}")
            self.jobs.append(JobState(job_id=i, class_id=ev.class_id, arrival_time=ev.arrival_time))
            self.push(ev.arrival_time, _P_ARRIVAL, i)
        self.push(0.0, _P_QUANTUM, -1, 0)

        while self.heap:
            t, prio, job_id, _, payload = heapq.heappop(self.heap)
            if cfg.horizon is not None and t > cfg.horizon:
                self.finalize(cfg.horizon)
                return
            self.t = t
            if prio == _P_ARRIVAL:
                job = self.jobs[job_id]
                job.remaining_work = self.trace.events[job_id].epoch_sizes[0]
                job.phase = "queued"
                self.pending_arrivals -= 1
                self.queue_events += 1
                self.emit("arrive", job, 0.0)
            elif prio == _P_RESCALE_END:
                job = self.jobs[job_id]
                if payload != job.gen:
                    continue
                self.finish_rescale(job)
            elif prio == _P_EPOCH_DONE:
                job = self.jobs[job_id]
                if payload != job.gen:
                    continue
                self._epoch_done(job)
            elif prio == _P_CAPACITY:
                gen, target = payload
                if gen != self.order_gen or self.order is None:
                    continue
                self.order = None
                self.set_rented(target)
                self.emit("cluster_resize", None, 0.0)
                active = self._active_jobs()
                if active:
                    self._decide(active)
            elif prio == _P_QUANTUM:
                self._quantum(payload)
        self.finalize(self.t)

    def _epoch_done(self, job: JobState):
        job.remaining_work = 0.0
        self.emit("epoch_done", job, job.current_width)
        job.current_epoch += 1
        c = self._class_of[job.class_id]
        if job.current_epoch >= c.n_epochs:
            self.complete(job)
            return
        # allocation is untouched at epoch boundaries; only the speedup changes
        job.remaining_work = self.trace.events[job.job_id].epoch_sizes[job.current_epoch]
        job.running_since = self.t
        self.resume_running(job)

    def _active_jobs(self) -> list[JobState]:
        return [j for j in self.jobs if j.phase in ("queued", "rescaling", "running")]

    def _waterfill_sequence(self, jobs: list[JobState], k_cap: int):
        """Greedy grant sequence: next GPU to the job with the largest marginal gain.

        Returns (grants, speedup_after) where grants[g] = (job, new width) of
        the g-th granted GPU and speedup_after[g] = total allocated speedup
        after g grants. Grants stop at saturation; ties break by job id.
        """
        heap = []
        svals: dict[int, list[float]] = {}
        for job in jobs:
            hull = self.hull(job)
            vals = [hull.eval(float(a)) for a in range(1, int(hull.saturation_width) + 1)]
            svals[job.job_id] = vals
            heapq.heappush(heap, (-vals[0], job.job_id, 1, job))
        grants = []
        speedup_after = [0.0]
        total = 0.0
        while heap and len(grants) < k_cap:
            neg_gain, jid, width, job = heapq.heappop(heap)
            total += -neg_gain
            grants.append((job, width))
            speedup_after.append(total)
            vals = svals[jid]
            if width < len(vals):
                gain = vals[width] - vals[width - 1]
                if gain > 0.0:
                    heapq.heappush(heap, (-gain, jid, width + 1, job))
        return grants, speedup_after

    def _quantum(self, n_quantum: int):
        cfg, pol = self.config, self.policy
        active = self._active_jobs()
        if active:
            self._decide(active)
        elif self.rented or self.order is not None:
            self.order = None
            self.order_gen += 1
            self.set_rented(0.0)
            self.emit("cluster_resize", None, 0.0)
        if self.pending_arrivals > 0 or self._active_jobs():
            self.push((n_quantum + 1) * cfg.quantum, _P_QUANTUM, -1, n_quantum + 1)

    def _decide(self, active: list[JobState]):
        cfg, pol = self.config, self.policy
        n = len(active)
        queued = [j for j in active if j.current_width == 0.0]
        occupied = sum(j.current_width for j in active)
        idle = self.rented - occupied

        # control signal: current allocations (queued jobs count 0)
        cur_speedup = sum(self.hull(j).eval(j.current_width) for j in active if j.current_width > 0.0)
        trigger = self.rented <= 0.0
        if not trigger:
            cur_eff = cur_speedup / self.rented
            trigger = cur_eff > pol.c + pol.delta or cur_eff < pol.c - pol.delta
        if queued and idle < len(queued):
            trigger = True  # queued jobs are waiting on the cluster expander

        if not trigger:
            # hysteresis: inside the band running jobs are left alone; queued
            # jobs slot into idle GPUs one each, oldest first
            for job in queued:
                if idle < 1.0:
                    break
                idle -= 1.0
                self.start_rescale(job, 1.0)
            return

        grants, speedup_after = self._waterfill_sequence(active, 10**9)
        sat_gpus = len(grants)  # grants available before every job saturates

        def alloc_for(k: int) -> dict[int, int]:
            widths: dict[int, int] = {}
            for job, w in grants[: min(k, sat_gpus)]:
                widths[job.job_id] = w
            return widths

        def efficiency(k: int) -> float:
            return speedup_after[min(k, sat_gpus)] / k

        k_min = int(self.node_round(max(n, 1)))
        s_max = speedup_after[sat_gpus]
        floor_eff = max(pol.c - pol.delta, 1e-9)
        k_cap = int(self.node_round(max(k_min, sat_gpus, math.ceil(s_max / floor_eff))))
        best_k, best_gap = None, math.inf
        for k in range(k_min, k_cap + 1, cfg.gpus_per_node):
            gap = abs(efficiency(k) - pol.c)
            if gap < best_gap:
                best_k, best_gap = k, gap
            elif efficiency(k) < pol.c:
                break  # efficiency only falls; gaps grow from here

        target = float(best_k)
        if target <= self.rented or cfg.provisioning_delay == 0.0:
            if self.order is not None:
                self.order = None
                self.order_gen += 1
            if target != self.rented:
                self.set_rented(target)
                self.emit("cluster_resize", None, 0.0)
            alloc = alloc_for(best_k)
        else:
            # new nodes take provisioning_delay to come online; until then the
            # cohort squeezes into the current cluster and the excess queues
            if self.order is None:
                self.order_gen += 1
                self.order = (self.t + cfg.provisioning_delay, target)
                self.push(self.t + cfg.provisioning_delay, _P_CAPACITY, -1, (self.order_gen, target))
            elif self.order[1] != target:
                eta = self.order[0]  # the expander keeps the original ETA
                self.order_gen += 1
                self.order = (eta, target)
                self.push(eta, _P_CAPACITY, -1, (self.order_gen, target))
            alloc = alloc_for(int(self.rented))

        for job in active:
            k_new = float(alloc.get(job.job_id, 0))
            if k_new == job.current_width:
                continue
            if k_new == 0.0:
                if job.phase != "queued":
                    raise RuntimeError("waterfilling must not preempt a running job to zero GPUs")
                continue
            self.start_rescale(job, k_new)


def _check_plan_coverage(plan: WidthPlan, workload: WorkloadSpec):
    missing = [key for key in workload.class_epoch_pairs() if key not in plan.widths]
    if missing:
        raise PlanCoverageError(missing)


def simulate(
    trace: Trace,
    policy: FixedWidthPolicy | EfficiencyTargetPolicy,
    workload: WorkloadSpec,
    config: SimConfig | None = None,
) -> tuple[SimMetrics, list[EventRecord]]:
    """Run one policy against a trace; returns metrics plus the full event log."""
    config = config or SimConfig()
    for ev in trace.events:
        if ev.class_id not in {c.class_id for c in workload.classes}:
            raise ValueError(f"trace references unknown class {ev.class_id!r}")
    if policy.kind == "fixed_width":
        engine = _FixedWidthEngine(trace, workload, config, policy)
    elif policy.kind == "efficiency_target":
        engine = _EfficiencyEngine(trace, workload, config, policy)
    else:
        raise ValueError(f"unknown policy kind {policy.kind!r}")
    engine.run()
    metrics = compute_metrics(
        engine.log,
        trace,
        workload,
        horizon=engine.end_t,
        queue_events=engine.queue_events,
    )
    return metrics, engine.log


def compute_metrics(
    events: list[EventRecord],
    trace: Trace,
    workload: WorkloadSpec,
    horizon: float | None = None,
    queue_events: int = 0,
) -> SimMetrics:
    """Replay an event log into metrics.

    Usage integrates the rented-cluster step function carried on each record;
    efficiency is the sum of allocated speedups (a job counts at its current
    width from rescale_start on) over the rented size. Per-job GPU-hours
    attribute every rented-and-held GPU-second to its job; the remainder is
    idle time.
    """
    arrivals: dict[int, float] = {}
    completions: dict[int, float] = {}
    width: dict[int, float] = {}
    epoch: dict[int, int] = {}
    width_since: dict[int, float] = {}
    gpu_seconds: dict[int, float] = {}
    usage_series: list[tuple[float, float]] = []
    eff_series: list[tuple[float, float]] = []
    usage_integral = 0.0
    speedup_sum = 0.0
    last_t = 0.0
    last_rented = 0.0

    def advance(t: float):
        nonlocal usage_integral, last_t
        usage_integral += last_rented * (t - last_t)
        last_t = t

    def record_eff(t: float):
        eff = speedup_sum / last_rented if last_rented > 0.0 else 0.0
        if eff_series and eff_series[-1][0] == t:
            eff_series[-1] = (t, eff)
        else:
            eff_series.append((t, eff))

    hull_cache: dict[tuple[str, int], object] = {}

    def spd(job_id: int) -> float:
        k = width.get(job_id, 0.0)
        if k <= 0.0:
            return 0.0
        cid = trace.events[job_id].class_id
        key = (cid, epoch.get(job_id, 0))
        if key not in hull_cache:
            hull_cache[key] = workload.hull(*key)
        return hull_cache[key].eval(k)

    for rec in events:
        advance(rec.t)
        jid = rec.job
        if rec.event == "arrive":
            arrivals[jid] = rec.t
            epoch[jid] = 0
        elif rec.event == "rescale_start":
            speedup_sum -= spd(jid)
            if width.get(jid, 0.0) > 0.0:
                gpu_seconds[jid] = gpu_seconds.get(jid, 0.0) + width[jid] * (rec.t - width_since[jid])
            width[jid] = rec.k
            width_since[jid] = rec.t
            speedup_sum += spd(jid)
        elif rec.event == "epoch_done":
            speedup_sum -= spd(jid)
            epoch[jid] = epoch.get(jid, 0) + 1
            if epoch[jid] < len(trace.events[jid].epoch_sizes):
                speedup_sum += spd(jid)
        elif rec.event == "complete":
            if width.get(jid, 0.0) > 0.0:
                gpu_seconds[jid] = gpu_seconds.get(jid, 0.0) + width[jid] * (rec.t - width_since[jid])
            width[jid] = 0.0
            completions[jid] = rec.t
        if rec.cluster_gpus != last_rented:
            last_rented = rec.cluster_gpus
            if usage_series and usage_series[-1][0] == rec.t:
                usage_series[-1] = (rec.t, last_rented)
            else:
                usage_series.append((rec.t, last_rented))
        record_eff(rec.t)

    end_t = horizon if horizon is not None else (events[-1].t if events else 0.0)
    advance(end_t)

    if not completions:
        raise ValueError("no jobs completed; cannot compute metrics")
    jcts = sorted(completions[j] - arrivals[j] for j in completions)
    n = len(jcts)
    p95 = jcts[min(n - 1, math.ceil(0.95 * n) - 1)]
    per_job_hours = [gpu_seconds.get(j, 0.0) for j in sorted(completions)]
    kbar = usage_integral / end_t if end_t > 0.0 else 0.0

    ats = [ev.arrival_time for ev in trace.events]
    gaps = np.diff(ats)
    c2 = float(gaps.var() / gaps.mean() ** 2) if len(gaps) >= 2 and gaps.mean() > 0 else float("nan")

    truncated = len(completions) < len(trace.events)
    idle = usage_integral - sum(gpu_seconds.values())
    return SimMetrics(
        mean_jct=sum(jcts) / n,
        p95_jct=p95,
        time_avg_usage=kbar,
        usage_series=usage_series,
        efficiency_series=eff_series,
        per_job_gpu_hours=per_job_hours,
        interarrival_c2=c2,
        n_completed=n,
        horizon=end_t,
        idle_gpu_time=idle,
        queue_events=queue_events,
        truncated=truncated,
    )


@dataclass
class CompareRow:
    policy: str
    budget_param: float
    mean_jct: float
    p95_jct: float
    time_avg_usage: float


def compare(
    trace: Trace,
    workload: WorkloadSpec,
    policies: list[FixedWidthPolicy | EfficiencyTargetPolicy],
    config: SimConfig | None = None,
) -> list[CompareRow]:
    """Run >= 2 policies on the identical trace; one row per policy, input order."""
    if len(policies) < 2:
        raise ValueError("compare needs at least two policies")
    rows = []
    for pol in policies:
        metrics, _ = simulate(trace, pol, workload, config)
        rows.append(
            CompareRow(
                policy=pol.kind,
                budget_param=float(pol.param),
                mean_jct=metrics.mean_jct,
                p95_jct=metrics.p95_jct,
                time_avg_usage=metrics.time_avg_usage,
            )
        )
    return rows
