"""Concave speedup functions for parallelizable training jobs.

Measured speedup profiles are noisy: raw points may dip, wiggle, or flatten.
Every policy in this package works on the least non-decreasing concave
piecewise-linear majorant of the measured points (the "hull"), evaluated by
linear interpolation on [1, xi] and extended as a constant past the
saturation width xi. On the hull, the GPU-hours-per-unit-work ratio
k / s(k) is non-decreasing in k, which is what makes renting more GPUs a
genuine cost-performance tradeoff.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

__all__ = ["SpeedupProfile", "ConcaveHull", "build_hull", "round_to_hull"]

# Relative slack for float comparisons in profile/hull validation.
_REL_EPS = 1e-12


@dataclass(frozen=True)
class SpeedupProfile:
    """Raw measured speedup samples (k GPUs, speedup), sorted, starting at k=1.

    Speedups need not be monotone or concave, but no point may be superlinear
    relative to the base point: s <= s(1) * k. The base speedup s(1) is 1 for
    homogeneous profiles; per-GPU-type profiles may use any positive base.
    """

    points: tuple[tuple[int, float], ...]

    def __post_init__(self):
        pts = tuple((int(k), float(s)) for k, s in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("speedup profile needs at least one point")
        if pts[0][0] != 1:
            raise ValueError(f"first profile point must be at k=1, got k={pts[0][0]}")
        base = pts[0][1]
        prev_k = 0
        for k, s in pts:
            if k <= prev_k:
                raise ValueError(f"profile widths must be strictly increasing, got k={k} after k={prev_k}")
            if not math.isfinite(s) or s <= 0.0:
                raise ValueError(f"speedup at k={k} must be positive and finite, got {s}")
            if s > base * k * (1.0 + _REL_EPS):
                raise ValueError(
                    f"speedup at k={k} is superlinear ({s} > s(1)*k = {base * k}); "
                    "no valid monotone concave hull with k/s(k) non-decreasing exists"
                )
            prev_k = k

    @property
    def base_speedup(self) -> float:
        return self.points[0][1]


@dataclass(frozen=True)
class ConcaveHull:
    """Least non-decreasing concave majorant of a speedup profile.

    Breakpoints define a piecewise-linear function on [1, xi]; speedups are
    strictly increasing across breakpoints and the hull is constant at
    max_speedup for k >= xi.
    """

    ks: tuple[float, ...]
    ss: tuple[float, ...]

    def __post_init__(self):
        if len(self.ks) != len(self.ss) or not self.ks:
            raise ValueError("hull breakpoints malformed")

    @property
    def saturation_width(self) -> float:
        """Smallest width attaining the maximum speedup (xi)."""
        return self.ks[-1]

    @property
    def max_speedup(self) -> float:
        """Supremum of the hull (d)."""
        return self.ss[-1]

    @property
    def base_speedup(self) -> float:
        return self.ss[0]

    def eval(self, k: float) -> float:
        """Hull value at a (possibly fractional) width k >= 1."""
        if k < 1.0:
            raise ValueError(f"width must be >= 1, got {k}")
        ks, ss = self.ks, self.ss
        if k >= ks[-1]:
            return ss[-1]
        i = bisect_right(ks, k)
        # ks[i-1] <= k < ks[i]
        frac = (k - ks[i - 1]) / (ks[i] - ks[i - 1])
        return ss[i - 1] + frac * (ss[i] - ss[i - 1])

    def inverse_beta(self, s_target: float) -> float:
        """Smallest width k with eval(k) == s_target (the beta function).

        Exact on the piecewise-linear hull; s_target must lie in
        [s(1), max_speedup].
        """
        lo, hi = self.ss[0], self.ss[-1]
        tol = _REL_EPS * max(1.0, abs(hi))
        if s_target < lo - tol or s_target > hi + tol:
            raise ValueError(f"speedup {s_target} outside hull range [{lo}, {hi}]")
        s_target = min(max(s_target, lo), hi)
        ss, ks = self.ss, self.ks
        i = bisect_right(ss, s_target)
        if i >= len(ss):
            return ks[-1]
        if i == 0:
            return ks[0]
        frac = (s_target - ss[i - 1]) / (ss[i] - ss[i - 1])
        return ks[i - 1] + frac * (ks[i] - ks[i - 1])

    def segments(self):
        """Yield (k_lo, k_hi, slope, intercept) for each linear piece."""
        for i in range(len(self.ks) - 1):
            k0, k1 = self.ks[i], self.ks[i + 1]
            c = (self.ss[i + 1] - self.ss[i]) / (k1 - k0)
            a = self.ss[i] - c * k0
            yield k0, k1, c, a


def build_hull(profile: SpeedupProfile) -> ConcaveHull:
    """Least non-decreasing concave majorant of the profile points.

    Upper convex hull (monotone chain) of the points, then the decreasing
    tail is flattened to the running maximum and truncated at the saturation
    width. Collinear interior points are merged.
    """
    pts = profile.points
    hull: list[tuple[float, float]] = []
    for k, s in pts:
        kf, sf = float(k), float(s)
        while len(hull) >= 2:
            (ok, os_), (ak, as_) = hull[-2], hull[-1]
            # middle point on/under the chord -> drop it
            if (ak - ok) * (sf - os_) - (as_ - os_) * (kf - ok) >= 0.0:
                hull.pop()
            else:
                break
        hull.append((kf, sf))
    # keep the strictly increasing prefix; slopes only decrease afterwards
    ks = [hull[0][0]]
    ss = [hull[0][1]]
    for k, s in hull[1:]:
        if s <= ss[-1]:
            break
        ks.append(k)
        ss.append(s)
    return ConcaveHull(ks=tuple(ks), ss=tuple(ss))


def round_to_hull(hull: ConcaveHull, k: float) -> int:
    """Nearest integer width on the hull domain [1, xi]; ties round down.

    Widths above the saturation point clamp to xi (constant extension makes
    anything larger strictly wasteful).
    """
    if k < 1.0:
        raise ValueError(f"width must be >= 1, got {k}")
    r = math.ceil(k - 0.5)  # round-half-down
    return int(min(hull.saturation_width, max(1, r)))
