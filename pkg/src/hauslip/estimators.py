"""Sample-based estimators: Lipschitz constant, local skew, box dimension.

Everything works on a :class:`MetricSample`, a finite point array with a
distance function vectorised over its leading axis. Points can be float
rows, integer indices into a precomputed table, or an object array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NoValidPairs, ScaleRangeDegenerate

DistFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
MapFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class MetricSample:
    points: np.ndarray
    dist: DistFn
    pairs: np.ndarray | None = None
    seed: int | None = None
    # optional (index, eps) -> superset of the indices within eps of that point
    candidates: Callable[[int, float], np.ndarray] | None = None
    # optional (a, b, cap) -> distances exact up to cap and above cap otherwise
    capped: Callable[[np.ndarray, np.ndarray, float], np.ndarray] | None = None

    def __len__(self):
        return len(self.points)

    @classmethod
    def from_matrix(cls, D: np.ndarray, **kw) -> "MetricSample":
        D = np.asarray(D, dtype=float)
        return cls(np.arange(len(D)), lambda a, b: D[a, b], **kw)

    def with_random_pairs(self, k: int, seed: int) -> "MetricSample":
        rng = np.random.default_rng(seed)
        n = len(self.points)
        pairs = rng.integers(0, n, size=(k, 2))
        return MetricSample(self.points, self.dist, pairs, seed, self.candidates, self.capped)

    def all_pairs(self) -> np.ndarray:
        i, j = np.triu_indices(len(self.points), k=1)
        return np.stack([i, j], axis=1)

    def distances_from(self, i: int) -> np.ndarray:
        p = self.points
        return np.asarray(self.dist(p[np.full(len(p), i)], p), dtype=float)

    def pair_distances(self, pairs: np.ndarray | None = None) -> np.ndarray:
        pairs = self._pairs(pairs)
        return np.asarray(self.dist(self.points[pairs[:, 0]], self.points[pairs[:, 1]]), dtype=float)

    def powered(self, gamma: float) -> "MetricSample":
        base = self.dist
        cand, cap = self.candidates, self.capped
        return MetricSample(self.points, lambda a, b: np.asarray(base(a, b), dtype=float) ** gamma,
                            self.pairs, self.seed,
                            None if cand is None else (lambda i, eps: cand(i, eps ** (1 / gamma))),
                            None if cap is None else
                            (lambda a, b, eps: np.asarray(cap(a, b, eps ** (1 / gamma)), dtype=float) ** gamma))

    def dist_upto(self, a: np.ndarray, b: np.ndarray, cap: float) -> np.ndarray:
        """Distances that are exact where <= cap; enough to decide d <= cap."""
        d = self.dist(a, b) if self.capped is None else self.capped(a, b, cap)
        return np.asarray(d, dtype=float)

    def _pairs(self, pairs):
        if pairs is None:
            pairs = self.pairs if self.pairs is not None else self.all_pairs()
        return np.asarray(pairs)


def _ratios(ms: MetricSample, f: MapFn, pairs) -> tuple[np.ndarray, np.ndarray]:
    pairs = ms._pairs(pairs)
    P, Q = ms.points[pairs[:, 0]], ms.points[pairs[:, 1]]
    d0 = np.asarray(ms.dist(P, Q), dtype=float)
    d1 = np.asarray(ms.dist(f(P), f(Q)), dtype=float)
    keep = d0 > 0
    return d0[keep], d1[keep] / d0[keep]


def empirical_lip(ms: MetricSample, f: MapFn, pairs=None) -> float:
    """max d(fx, fy) / d(x, y) over sampled pairs with d(x, y) > 0."""
    _, r = _ratios(ms, f, pairs)
    if r.size == 0:
        raise NoValidPairs("no sampled pair at positive distance")
    return float(r.max())


def empirical_skew(ms: MetricSample, f: MapFn, eps_levels: Sequence[float], pairs=None) -> float:
    """max over eps of the min expansion ratio among pairs with 0 < d < eps."""
    d0, r = _ratios(ms, f, pairs)
    levels = sorted(eps_levels)
    if not np.any(d0 < levels[0]):
        raise NoValidPairs(f"no sampled pair below the smallest level {levels[0]}")
    return float(max(r[d0 < eps].min() for eps in levels))


# --------------------------------------------------------------------------
# greedy nets and box dimension
# --------------------------------------------------------------------------

def greedy_net(ms: MetricSample, eps: float, limit: int | None = None) -> list[int] | None:
    """Sequential greedy eps-net: the lowest-index uncovered point becomes a center.

    Centers are pairwise more than eps apart and every point lies within eps
    of a center. Returns None once more than ``limit`` centers are needed.
    """
    if ms.candidates is not None:
        return _greedy_net_pruned(ms, eps, limit)
    uncovered = np.arange(len(ms))
    centers = []
    while uncovered.size:
        j = int(uncovered[0])
        centers.append(j)
        if limit is not None and len(centers) > limit:
            return None
        d = ms.dist_upto(ms.points[np.full(uncovered.size, j)], ms.points[uncovered], eps)
        uncovered = uncovered[d > eps]
    return centers


def _greedy_net_pruned(ms: MetricSample, eps: float, limit: int | None) -> list[int] | None:
    # same centers as the plain sweep; distances only evaluated on candidate neighbours
    covered = np.zeros(len(ms), dtype=bool)
    centers = []
    for j in range(len(ms)):
        if covered[j]:
            continue
        centers.append(j)
        if limit is not None and len(centers) > limit:
            return None
        cand = np.asarray(ms.candidates(j, eps), dtype=np.int64)
        cand = cand[~covered[cand]]
        d = ms.dist_upto(ms.points[np.full(cand.size, j)], ms.points[cand], eps)
        covered[cand[d <= eps]] = True
        covered[j] = True
    return centers


def net_count(ms: MetricSample, eps: float, limit: int | None = None) -> int | None:
    net = greedy_net(ms, eps, limit)
    return None if net is None else len(net)


@dataclass
class DimensionFit:
    scales: list[float]
    counts: list[int]
    slope: float
    intercept: float
    residual: float
    label: str = "box"

    def to_json(self) -> dict:
        return {"label": self.label, "slope": self.slope, "residual": self.residual,
                "scales": self.scales, "counts": self.counts}


def estimate_diameter(ms: MetricSample) -> float:
    """Two-sweep estimate; lies within a factor 2 of the true diameter."""
    d = ms.distances_from(0)
    return float(ms.distances_from(int(np.argmax(d))).max())


def scale_for_count(ms: MetricSample, target: int, hi: float, lo: float, steps: int = 14) -> float:
    """Smallest scale in [lo, hi] (bisection in log-scale) whose net has at most ``target`` centers."""
    a, b = math.log(lo), math.log(hi)
    if net_count(ms, lo, target) is not None:
        return lo
    for _ in range(steps):
        m = (a + b) / 2
        if net_count(ms, math.exp(m), target) is None:
            a = m
        else:
            b = m
    return math.exp(b)


def default_scales(ms: MetricSample, levels: int = 8, top: float = 4.0,
                   max_fraction: float = 1 / 40, min_ratio: float = 512.0) -> list[float]:
    """Geometric scales from diam/top down to where the net reaches a fraction of the sample.

    For high-dimensional samples the top scale is lowered until its net has
    at most 1/8 of the bottom count, keeping a usable range.
    """
    diam = estimate_diameter(ms)
    target = max(int(len(ms) * max_fraction), 16)
    upper = diam / top
    if net_count(ms, upper, target // 8) is None:
        upper = scale_for_count(ms, target // 8, diam, diam / min_ratio ** 2)
    bottom = scale_for_count(ms, target, upper, upper / min_ratio)
    if not bottom < upper:
        raise ScaleRangeDegenerate("sample too small to resolve any scale range")
    return list(np.geomspace(upper, bottom, levels))


def resolvable_scales(ms: MetricSample, count_lo: int, count_hi: int, levels: int = 8) -> list[float]:
    """Geometric scales whose net counts run from about count_lo to count_hi."""
    diam = estimate_diameter(ms)
    hi = scale_for_count(ms, count_lo, diam, diam * 1e-6)
    lo = scale_for_count(ms, count_hi, hi, diam * 1e-6)
    if not lo < hi:
        raise ScaleRangeDegenerate("sample does not resolve the requested count range")
    return list(np.geomspace(hi, lo, levels))


def fit_counts(scales: Sequence[float], counts: Sequence[int]) -> DimensionFit:
    x = np.log(1 / np.asarray(scales, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return DimensionFit(list(map(float, scales)), list(map(int, counts)), float(max(slope, 0.0)),
                        float(intercept), resid)


def box_dimension(ms: MetricSample, scales: Sequence[float] | None = None,
                  levels: int = 8) -> DimensionFit:
    """Slope of log N(eps) against log(1/eps) for greedy eps-nets."""
    if scales is None:
        if estimate_diameter(ms) == 0:
            return DimensionFit([], [1], 0.0, 0.0, 0.0)
        scales = default_scales(ms, levels)
    scales = sorted((float(s) for s in scales), reverse=True)
    counts = [net_count(ms, eps) for eps in scales]
    if len(set(counts)) < 3:
        raise ScaleRangeDegenerate(f"only {len(set(counts))} distinct net counts over {len(scales)} scales")
    return fit_counts(scales, counts)


@dataclass
class PowerRuleReport:
    gamma: float
    scales: list[float]
    counts_power: list[int]
    counts_base: list[int]
    counts_match: bool
    slope_base: float
    slope_power: float

    @property
    def slope_ratio(self) -> float:
        return self.slope_power / self.slope_base if self.slope_base else math.nan

    def to_json(self) -> dict:
        return {"gamma": self.gamma, "counts_match": self.counts_match,
                "slope_base": self.slope_base, "slope_power": self.slope_power,
                "slope_ratio": self.slope_ratio}


def power_rule_check(ms: MetricSample, gamma: float, scales: Sequence[float] | None = None,
                     levels: int = 8) -> PowerRuleReport:
    """Compare greedy nets of d**gamma at eps with nets of d at eps**(1/gamma).

    The two nets are built independently; since t -> t**gamma is increasing
    every covering test gives the same answer and the counts agree exactly.
    """
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    msg = ms.powered(gamma)
    if scales is None:
        scales = default_scales(msg, levels)
    scales = sorted((float(s) for s in scales), reverse=True)
    base_scales = [s ** (1 / gamma) for s in scales]
    cg = [net_count(msg, s) for s in scales]
    cb = [net_count(ms, s) for s in base_scales]
    slope_b = box_dimension(ms, levels=levels).slope
    slope_g = box_dimension(msg, levels=levels).slope
    return PowerRuleReport(gamma, scales, cg, cb, cg == cb, slope_b, slope_g)


# --------------------------------------------------------------------------
# metric axioms and sandwich reports
# --------------------------------------------------------------------------

@dataclass
class AxiomReport:
    triples: int
    symmetry_violations: int
    identity_violations: int
    triangle_violations: int

    @property
    def ok(self) -> bool:
        return not (self.symmetry_violations or self.identity_violations or self.triangle_violations)

    def to_json(self) -> dict:
        return {"triples": self.triples, "symmetry": self.symmetry_violations,
                "identity": self.identity_violations, "triangle": self.triangle_violations,
                "ok": self.ok}


def check_metric_axioms(ms: MetricSample, n_triples: int, seed: int, tol: float = 1e-12,
                        same: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None) -> AxiomReport:
    """Symmetry, identity of indiscernibles and triangle inequality on random triples.

    ``same`` decides point equality; by default points are compared by index.
    """
    rng = np.random.default_rng(seed)
    n = len(ms)
    I = rng.integers(0, n, size=(n_triples, 3))
    P = [ms.points[I[:, k]] for k in range(3)]
    dxy = np.asarray(ms.dist(P[0], P[1]), float)
    dyx = np.asarray(ms.dist(P[1], P[0]), float)
    dyz = np.asarray(ms.dist(P[1], P[2]), float)
    dxz = np.asarray(ms.dist(P[0], P[2]), float)
    dxx = np.asarray(ms.dist(P[0], P[0]), float)
    eq = same(P[0], P[1]) if same is not None else (I[:, 0] == I[:, 1])
    scale = np.maximum(1.0, np.maximum(dxz, dxy + dyz))
    return AxiomReport(
        n_triples,
        int(np.sum(np.abs(dxy - dyx) > tol * np.maximum(1.0, dxy))),
        int(np.sum(dxx != 0) + np.sum((dxy == 0) != eq)),
        int(np.sum(dxz > dxy + dyz + tol * scale)),
    )


def entropy_bounds_report(box_dim: float, skew: float, h: float, analytic_hd: float, analytic_lip: float,
                  slack: float = 0.1) -> dict:
    """Lower and upper entropy bounds HD log+ Skew <= h <= HD log+ Lip."""
    lower = box_dim * max(math.log(skew), 0.0) if skew > 0 else 0.0
    upper = analytic_hd * max(math.log(analytic_lip), 0.0)
    return {"lower": lower, "upper": upper, "entropy": h, "slack": slack,
            "lower_ok": lower <= h + slack, "upper_ok": h <= upper + 1e-9}
