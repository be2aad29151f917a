"""Job classes, loads, and trace generation with controllable burstiness.

A workload is a mixture of job classes. Each class-i job walks through an
ordered list of statistical epochs; epoch j carries a mean amount of work
(GPU-seconds at width 1) and a speedup profile. The load rho_ij =
lambda_i * E[X_ij] is the average width-1 GPU demand of that epoch.

Traces pre-draw every stochastic quantity (epoch sizes, rescale durations)
at generation time so that all policies are evaluated on the identical
sample path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import TraceParseError
from .speedup import ConcaveHull, SpeedupProfile, build_hull

__all__ = [
    "EpochSpec",
    "JobClassSpec",
    "WorkloadSpec",
    "ArrivalModel",
    "TraceEvent",
    "Trace",
    "Loads",
    "compute_loads",
    "check_feasibility",
    "gen_trace",
    "read_trace",
    "write_trace",
    "read_workload",
    "write_workload",
]

_SIZE_DISTS = ("deterministic", "exponential", "lognormal")
_RESCALE_DISTS = ("deterministic", "exponential")


@dataclass(frozen=True)
class EpochSpec:
    """One statistical epoch: mean work at width 1 plus its speedup profile."""

    mean_size: float
    profile: SpeedupProfile
    size_dist: str = "deterministic"
    sigma: float | None = None  # lognormal shape parameter

    def __post_init__(self):
        if not (self.mean_size > 0.0 and math.isfinite(self.mean_size)):
            raise ValueError(f"epoch mean_size must be positive, got {self.mean_size}")
        if self.size_dist not in _SIZE_DISTS:
            raise ValueError(f"unknown size_dist {self.size_dist!r}, expected one of {_SIZE_DISTS}")
        if self.size_dist == "lognormal":
            if self.sigma is None or not (self.sigma > 0.0):
                raise ValueError("lognormal size_dist requires sigma > 0")

    @cached_property
    def hull(self) -> ConcaveHull:
        return build_hull(self.profile)


@dataclass(frozen=True)
class JobClassSpec:
    """A job class: arrival rate, epochs, and rescale-overhead distribution."""

    class_id: str
    arrival_rate: float
    epochs: tuple[EpochSpec, ...]
    rescale_mean: float = 0.0
    rescale_dist: str = "deterministic"
    mixture_weight: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "epochs", tuple(self.epochs))
        if not (self.arrival_rate > 0.0 and math.isfinite(self.arrival_rate)):
            raise ValueError(f"class {self.class_id}: arrival_rate must be positive")
        if not self.epochs:
            raise ValueError(f"class {self.class_id}: needs at least one epoch")
        if self.rescale_mean < 0.0:
            raise ValueError(f"class {self.class_id}: rescale_mean must be >= 0")
        if self.rescale_dist not in _RESCALE_DISTS:
            raise ValueError(f"class {self.class_id}: unknown rescale_dist {self.rescale_dist!r}")

    @property
    def n_epochs(self) -> int:
        return len(self.epochs)


@dataclass(frozen=True)
class WorkloadSpec:
    """Mixture of job classes with derived total rate and loads."""

    classes: tuple[JobClassSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise ValueError("workload needs at least one class")
        ids = [c.class_id for c in self.classes]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate class ids: {ids}")
        total = sum(c.arrival_rate for c in self.classes)
        given = [c.mixture_weight for c in self.classes if c.mixture_weight is not None]
        if given:
            if len(given) != len(self.classes):
                raise ValueError("either all classes carry a mixture_weight or none do")
            if abs(sum(given) - 1.0) > 1e-9:
                raise ValueError(f"mixture weights must sum to 1, got {sum(given)}")
            for c in self.classes:
                implied = c.arrival_rate / total
                if abs(c.mixture_weight - implied) > 1e-6 * max(1.0, implied):
                    raise ValueError(
                        f"class {c.class_id}: mixture_weight {c.mixture_weight} inconsistent "
                        f"with arrival_rate share {implied}"
                    )
        for c in self.classes:
            for ep in c.epochs:
                if abs(ep.profile.base_speedup - 1.0) > 1e-9:
                    raise ValueError(
                        f"class {c.class_id}: homogeneous speedup profiles must have s(1)=1, "
                        f"got {ep.profile.base_speedup}"
                    )

    @classmethod
    def from_mixture(cls, total_rate: float, classes: list[JobClassSpec]) -> "WorkloadSpec":
        """Rescale per-class arrival rates to weight * total_rate."""
        scaled = []
        for c in classes:
            if c.mixture_weight is None:
                raise ValueError(f"class {c.class_id}: from_mixture needs mixture_weight")
            scaled.append(
                JobClassSpec(
                    class_id=c.class_id,
                    arrival_rate=c.mixture_weight * total_rate,
                    epochs=c.epochs,
                    rescale_mean=c.rescale_mean,
                    rescale_dist=c.rescale_dist,
                    mixture_weight=c.mixture_weight,
                )
            )
        return cls(classes=tuple(scaled))

    @property
    def total_rate(self) -> float:
        return sum(c.arrival_rate for c in self.classes)

    def weight(self, class_id: str) -> float:
        return self.class_spec(class_id).arrival_rate / self.total_rate

    @cached_property
    def _by_id(self) -> dict[str, JobClassSpec]:
        return {c.class_id: c for c in self.classes}

    def class_spec(self, class_id: str) -> JobClassSpec:
        return self._by_id[class_id]

    def hull(self, class_id: str, epoch: int) -> ConcaveHull:
        return self._by_id[class_id].epochs[epoch].hull

    def class_epoch_pairs(self) -> list[tuple[str, int]]:
        return [(c.class_id, j) for c in self.classes for j in range(c.n_epochs)]


@dataclass(frozen=True)
class Loads:
    """Load matrix rho_ij and per-class / total aggregates."""

    per_epoch: dict[tuple[str, int], float]
    per_class: dict[str, float]
    total: float


def compute_loads(spec: WorkloadSpec) -> Loads:
    """rho_ij = lambda_i * E[X_ij]; rho_i = sum_j rho_ij."""
    per_epoch: dict[tuple[str, int], float] = {}
    per_class: dict[str, float] = {}
    for c in spec.classes:
        rho_i = 0.0
        for j, ep in enumerate(c.epochs):
            rho = c.arrival_rate * ep.mean_size
            per_epoch[(c.class_id, j)] = rho
            rho_i += rho
        per_class[c.class_id] = rho_i
    return Loads(per_epoch=per_epoch, per_class=per_class, total=sum(per_class.values()))


def check_feasibility(spec: WorkloadSpec, b: float) -> bool:
    """True iff the budget can keep up with the load: sum_i rho_i < b (strict)."""
    return compute_loads(spec).total < b


# ---------------------------------------------------------------------------
# Arrival models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArrivalModel:
    """Poisson or two-phase Markov-modulated Poisson (bursty) arrivals.

    The bursty model alternates exponentially-distributed high-rate and
    low-rate phases; its interarrival squared coefficient of variation C^2
    has a closed form (computed below from the 2x2 phase generator), which
    is what the calibration constructor bisects on.
    """

    kind: str
    rate: float = 0.0  # poisson rate
    high_rate: float = 0.0
    low_rate: float = 0.0
    mean_high_duration: float = 0.0
    mean_low_duration: float = 0.0

    @classmethod
    def poisson(cls, rate: float) -> "ArrivalModel":
        if not rate > 0.0:
            raise ValueError("poisson rate must be positive")
        return cls(kind="poisson", rate=rate)

    @classmethod
    def two_rate_bursty(
        cls, high_rate: float, low_rate: float, mean_high_duration: float, mean_low_duration: float
    ) -> "ArrivalModel":
        if not (high_rate > 0.0 and low_rate > 0.0):
            raise ValueError("phase rates must be positive")
        if not (mean_high_duration > 0.0 and mean_low_duration > 0.0):
            raise ValueError("phase durations must be positive")
        if high_rate <= low_rate:
            raise ValueError("high_rate must exceed low_rate")
        return cls(
            kind="two_rate_bursty",
            high_rate=high_rate,
            low_rate=low_rate,
            mean_high_duration=mean_high_duration,
            mean_low_duration=mean_low_duration,
        )

    @classmethod
    def bursty_with_c2(
        cls,
        rate: float,
        c2: float,
        rate_ratio: float | None = None,
        high_fraction: float = 0.05,
    ) -> "ArrivalModel":
        """Two-rate model calibrated so long-run rate and interarrival C^2 match.

        The high:low rate ratio fixes the achievable C^2 ceiling (the slow-
        switching limit); when not given, the smallest power-of-two-ish ratio
        with 30% headroom over the target is picked. Phase durations are then
        bisected (common time scale, fixed phase mix) against the analytic C^2.
        """
        if not c2 > 1.0:
            raise ValueError("two_rate_bursty can only target C^2 > 1 (use poisson for C^2 = 1)")
        pi_h = high_fraction
        if not 0.0 < pi_h < 1.0:
            raise ValueError("high_fraction must lie in (0, 1)")

        def rates_for(ratio: float) -> tuple[float, float]:
            low = rate / (pi_h * ratio + (1.0 - pi_h))
            return ratio * low, low

        def c2_ceiling(ratio: float) -> float:
            # slow-switching limit: interarrivals -> mixture of exponentials
            lam_h, lam_l = rates_for(ratio)
            w_h = pi_h * lam_h / rate
            w_l = (1.0 - pi_h) * lam_l / rate
            m2 = 2.0 * (w_h / lam_h**2 + w_l / lam_l**2)
            return m2 * rate**2 - 1.0

        if rate_ratio is None:
            rate_ratio = 10.0
            while c2_ceiling(rate_ratio) < 1.3 * c2 and rate_ratio < 1e7:
                rate_ratio *= 2.0
        if c2_ceiling(rate_ratio) <= c2:
            raise ValueError(
                f"target C^2={c2} unreachable with rate_ratio={rate_ratio} "
                f"(ceiling {c2_ceiling(rate_ratio):.3f}); increase rate_ratio or lower high_fraction"
            )
        lam_h, lam_l = rates_for(rate_ratio)

        def c2_at(theta: float) -> float:
            m = cls.two_rate_bursty(lam_h, lam_l, theta * pi_h, theta * (1.0 - pi_h))
            return m.interarrival_c2()

        lo, hi = 1e-6 / rate, 1e0 / rate
        while c2_at(hi) < c2:
            hi *= 4.0
            if hi > 1e14 / rate:
                raise ValueError("calibration failed to bracket the target C^2")
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if c2_at(mid) < c2:
                lo = mid
            else:
                hi = mid
        theta = math.sqrt(lo * hi)
        return cls.two_rate_bursty(lam_h, lam_l, theta * pi_h, theta * (1.0 - pi_h))

    @property
    def long_run_rate(self) -> float:
        if self.kind == "poisson":
            return self.rate
        tau_h, tau_l = self.mean_high_duration, self.mean_low_duration
        pi_h = tau_h / (tau_h + tau_l)
        return pi_h * self.high_rate + (1.0 - pi_h) * self.low_rate

    def interarrival_c2(self) -> float:
        """Analytic interarrival C^2 (Poisson = 1; MMPP via phase generator)."""
        if self.kind == "poisson":
            return 1.0
        nu_h, nu_l = 1.0 / self.mean_high_duration, 1.0 / self.mean_low_duration
        lam = np.array([self.high_rate, self.low_rate])
        q = np.array([[-nu_h, nu_h], [nu_l, -nu_l]])
        pi = np.array([nu_l, nu_h]) / (nu_h + nu_l)
        lbar = float(pi @ lam)
        phi = pi * lam / lbar  # phase seen by an arrival
        a_inv = np.linalg.inv(np.diag(lam) - q)
        m1 = float(phi @ a_inv @ a_inv @ lam)
        m2 = 2.0 * float(phi @ a_inv @ a_inv @ a_inv @ lam)
        return m2 / m1**2 - 1.0


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceEvent:
    """One job arrival with its pre-drawn epoch sizes and rescale durations."""

    arrival_time: float
    class_id: str
    epoch_sizes: tuple[float, ...]
    rescale_draws: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "epoch_sizes", tuple(float(x) for x in self.epoch_sizes))
        object.__setattr__(self, "rescale_draws", tuple(float(x) for x in self.rescale_draws))
        if self.arrival_time < 0.0:
            raise ValueError(f"arrival_time must be >= 0, got {self.arrival_time}")
        if any(x <= 0.0 for x in self.epoch_sizes):
            raise ValueError("epoch sizes must be strictly positive")
        if any(x < 0.0 for x in self.rescale_draws):
            raise ValueError("rescale draws must be >= 0")


@dataclass(frozen=True)
class Trace:
    """Immutable arrival trace; safe to share across concurrent simulations."""

    events: tuple[TraceEvent, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        prev = -math.inf
        for i, ev in enumerate(self.events):
            if ev.arrival_time < prev:
                raise ValueError(f"arrival times must be non-decreasing (event {i})")
            prev = ev.arrival_time

    def __len__(self) -> int:
        return len(self.events)

    def arrival_times(self) -> np.ndarray:
        return np.array([ev.arrival_time for ev in self.events])

    def interarrival_c2(self) -> float:
        gaps = np.diff(self.arrival_times())
        if len(gaps) < 2:
            raise ValueError("need at least 3 arrivals to estimate C^2")
        m = gaps.mean()
        return float(gaps.var() / m**2)


def _arrival_times(model: ArrivalModel, n_jobs: int, rng: np.random.Generator) -> np.ndarray:
    if model.kind == "poisson":
        return np.cumsum(rng.exponential(1.0 / model.rate, size=n_jobs))
    # two-rate bursty: per phase segment, Poisson count + sorted uniform positions
    tau = (model.mean_high_duration, model.mean_low_duration)
    lam = (model.high_rate, model.low_rate)
    pi_h = tau[0] / (tau[0] + tau[1])
    phase = 0 if rng.random() < pi_h else 1
    t = 0.0
    chunks: list[np.ndarray] = []
    total = 0
    while total < n_jobs:
        dur = rng.exponential(tau[phase])
        count = rng.poisson(lam[phase] * dur)
        if count:
            pts = t + dur * np.sort(rng.random(count))
            chunks.append(pts)
            total += count
        t += dur
        phase = 1 - phase
    return np.concatenate(chunks)[:n_jobs]


def _size_draws(ep: EpochSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if ep.size_dist == "deterministic":
        return np.full(n, ep.mean_size)
    if ep.size_dist == "exponential":
        draws = rng.exponential(ep.mean_size, size=n)
    else:  # lognormal, mean-parameterized
        mu = math.log(ep.mean_size) - 0.5 * ep.sigma**2
        draws = rng.lognormal(mean=mu, sigma=ep.sigma, size=n)
    return np.maximum(draws, 1e-12 * ep.mean_size)


def _rescale_draws(cls_spec: JobClassSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    shape = (n, cls_spec.n_epochs)
    if cls_spec.rescale_mean == 0.0 or cls_spec.rescale_dist == "deterministic":
        return np.full(shape, cls_spec.rescale_mean)
    return rng.exponential(cls_spec.rescale_mean, size=shape)


def gen_trace(spec: WorkloadSpec, model: ArrivalModel, n_jobs: int, seed: int) -> Trace:
    """Generate a trace of n_jobs arrivals; pure function of (spec, model, n_jobs, seed)."""
    if n_jobs < 1:
        raise ValueError("n_jobs must be >= 1")
    rate = model.long_run_rate
    if abs(rate - spec.total_rate) > 1e-9 * max(1.0, spec.total_rate):
        raise ValueError(
            f"arrival model long-run rate {rate} inconsistent with workload total rate {spec.total_rate}"
        )
    rng = np.random.default_rng(seed)
    times = _arrival_times(model, n_jobs, rng)
    weights = np.array([c.arrival_rate for c in spec.classes])
    weights = weights / weights.sum()
    cls_idx = rng.choice(len(spec.classes), size=n_jobs, p=weights)

    sizes = np.empty((n_jobs, max(c.n_epochs for c in spec.classes)))
    rescales = np.empty_like(sizes)
    for ci, c in enumerate(spec.classes):
        mask = cls_idx == ci
        m = int(mask.sum())
        if m == 0:
            continue
        for j, ep in enumerate(c.epochs):
            sizes[mask, j] = _size_draws(ep, m, rng)
        rescales[mask, : c.n_epochs] = _rescale_draws(c, m, rng)

    events = []
    for i in range(n_jobs):
        c = spec.classes[cls_idx[i]]
        events.append(
            TraceEvent(
                arrival_time=float(times[i]),
                class_id=c.class_id,
                epoch_sizes=tuple(sizes[i, : c.n_epochs]),
                rescale_draws=tuple(rescales[i, : c.n_epochs]),
            )
        )
    return Trace(events=tuple(events))


# ---------------------------------------------------------------------------
# File formats (JSON lines trace, JSON workload spec)
# ---------------------------------------------------------------------------

_TRACE_VERSION = 1


def write_trace(trace: Trace, path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"trace_version": _TRACE_VERSION, "n_events": len(trace)}) + "\n")
        for ev in trace.events:
            fh.write(
                json.dumps(
                    {
                        "t": ev.arrival_time,
                        "class": ev.class_id,
                        "sizes": list(ev.epoch_sizes),
                        "rescales": list(ev.rescale_draws),
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )


def _trace_field(obj: dict, name: str, lineno: int):
    if name not in obj:
        raise TraceParseError(f"line {lineno}: missing field {name!r}")
    return obj[name]


def read_trace(path) -> Trace:
    events = []
    with open(path) as fh:
        header_line = fh.readline()
        if not header_line:
            raise TraceParseError("line 1: empty file, expected trace header")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"line 1: invalid JSON header: {exc}") from exc
        if not isinstance(header, dict) or "trace_version" not in header:
            raise TraceParseError("line 1: missing field 'trace_version' in header")
        prev_t = -math.inf
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceParseError(f"line {lineno}: invalid JSON: {exc}") from exc
            t = _trace_field(obj, "t", lineno)
            cid = _trace_field(obj, "class", lineno)
            sizes = _trace_field(obj, "sizes", lineno)
            rescales = _trace_field(obj, "rescales", lineno)
            try:
                ev = TraceEvent(
                    arrival_time=float(t),
                    class_id=str(cid),
                    epoch_sizes=tuple(float(x) for x in sizes),
                    rescale_draws=tuple(float(x) for x in rescales),
                )
            except (TypeError, ValueError) as exc:
                raise TraceParseError(f"line {lineno}: field validation failed: {exc}") from exc
            if ev.arrival_time < prev_t:
                raise TraceParseError(f"line {lineno}: field 't' decreased ({ev.arrival_time} < {prev_t})")
            prev_t = ev.arrival_time
            events.append(ev)
    return Trace(events=tuple(events))


def _profile_to_json(profile: SpeedupProfile) -> list[list[float]]:
    return [[k, s] for k, s in profile.points]


def write_workload(spec: WorkloadSpec, path) -> None:
    doc = {
        "classes": [
            {
                "class_id": c.class_id,
                "arrival_rate": c.arrival_rate,
                "mixture_weight": c.mixture_weight if c.mixture_weight is not None else c.arrival_rate / spec.total_rate,
                "rescale_mean": c.rescale_mean,
                "rescale_dist": c.rescale_dist,
                "epochs": [
                    {
                        "mean_size": ep.mean_size,
                        "size_dist": ep.size_dist if ep.size_dist != "lognormal" else f"lognormal({ep.sigma})",
                        "profile": _profile_to_json(ep.profile),
                    }
                    for ep in c.epochs
                ],
            }
            for c in spec.classes
        ]
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _parse_size_dist(s: str) -> tuple[str, float | None]:
    if s in ("deterministic", "exponential"):
        return s, None
    if s.startswith("lognormal(") and s.endswith(")"):
        return "lognormal", float(s[len("lognormal(") : -1])
    raise ValueError(f"unknown size_dist {s!r} (expected deterministic | exponential | lognormal(sigma))")


def read_workload(path) -> WorkloadSpec:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "classes" not in doc:
        raise ValueError(f"{path}: workload spec must be an object with a 'classes' list")
    classes = []
    for c in doc["classes"]:
        epochs = []
        for ep in c["epochs"]:
            dist, sigma = _parse_size_dist(ep.get("size_dist", "deterministic"))
            epochs.append(
                EpochSpec(
                    mean_size=float(ep["mean_size"]),
                    profile=SpeedupProfile(points=tuple((int(k), float(s)) for k, s in ep["profile"])),
                    size_dist=dist,
                    sigma=sigma,
                )
            )
        classes.append(
            JobClassSpec(
                class_id=str(c["class_id"]),
                arrival_rate=float(c["arrival_rate"]),
                epochs=tuple(epochs),
                rescale_mean=float(c.get("rescale_mean", 0.0)),
                rescale_dist=str(c.get("rescale_dist", "deterministic")),
                mixture_weight=float(c["mixture_weight"]) if "mixture_weight" in c else None,
            )
        )
    return WorkloadSpec(classes=tuple(classes))
