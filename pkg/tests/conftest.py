"""Shared instance builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from gpurent.speedup import SpeedupProfile, build_hull
from gpurent.workload import EpochSpec, JobClassSpec, WorkloadSpec

PROFILE_A = ((1, 1.0), (2, 1.8), (3, 2.4), (4, 2.8))
PROFILE_B = ((1, 1.0), (2, 1.5), (3, 1.8), (4, 2.0))


def profile(points) -> SpeedupProfile:
    return SpeedupProfile(points=tuple(points))


def hull(points):
    return build_hull(profile(points))


def epoch(mean_size, points=PROFILE_A, size_dist="deterministic", sigma=None) -> EpochSpec:
    return EpochSpec(mean_size=mean_size, profile=profile(points), size_dist=size_dist, sigma=sigma)


def job_class(cid, rate, epochs, rescale_mean=0.0, rescale_dist="deterministic", weight=None) -> JobClassSpec:
    return JobClassSpec(
        class_id=cid,
        arrival_rate=rate,
        epochs=tuple(epochs),
        rescale_mean=rescale_mean,
        rescale_dist=rescale_dist,
        mixture_weight=weight,
    )


@pytest.fixture
def two_class_workload() -> WorkloadSpec:
    """The two-class, one-epoch-each instance with rho_A = rho_B = 1."""
    return WorkloadSpec(
        classes=(
            job_class("A", 0.01, [epoch(100.0, PROFILE_A)]),
            job_class("B", 0.01, [epoch(100.0, PROFILE_B)]),
        )
    )


def random_instance(rng: np.random.Generator, max_terms: int = 3) -> WorkloadSpec:
    """Small random workload: <= 3 classes, <= 2 epochs, hulls <= 5 breakpoints."""
    n_classes = int(rng.integers(1, 4))
    budget_terms = max_terms
    classes = []
    for ci in range(n_classes):
        remaining_classes = n_classes - ci - 1
        max_epochs = min(2, budget_terms - remaining_classes)
        n_epochs = int(rng.integers(1, max_epochs + 1))
        budget_terms -= n_epochs
        epochs = []
        for _ in range(n_epochs):
            max_k = int(rng.integers(2, 5))
            pts = [(1, 1.0)]
            for k in range(2, max_k + 1):
                lo = pts[-1][1] * 0.9  # allow mild dips so hulling has work to do
                hi = min(float(k), pts[-1][1] + (k - pts[-1][0]) * 1.0)
                pts.append((k, float(rng.uniform(lo, hi))))
            epochs.append(epoch(float(rng.uniform(20.0, 200.0)), pts))
        classes.append(job_class(f"c{ci}", float(rng.uniform(0.005, 0.05)), epochs))
    return WorkloadSpec(classes=tuple(classes))
