"""Adapted metrics for positively expansive maps, on finite forward-closed samples.

Pipeline: separation times n(x, y) under a base metric delta and expansivity
constant c; the quasi-metric rho = alpha**-n; a genuine metric D from rho by
shortest paths (chain infimum); and the refined metric

    d(x, y) = max_{0 <= i < n} D(f^i x, f^i y) / L**(i/n),   L = Lip_D(f^n),

for which f has Lipschitz constant L**(1/n). All orbit arithmetic is exact:
circle points are Fractions, symbolic points are eventually periodic words.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .errors import (DegenerateSample, HorizonExceeded, InputError, InsufficientClosure,
                     SandwichViolation, SkewDegenerate, WeakTriangleViolation)
from .estimators import DimensionFit, MetricSample, box_dimension, resolvable_scales
from .symbolic import Subshift, SymbolicPoint, first_disagreement, random_point, sft_entropy
from .symbolic import shift as shift_map
from .symbolic import shift_dist

DEFAULT_CAP = 64
NEVER = np.iinfo(np.int64).max // 4     # separation time of a point with itself


@dataclass(frozen=True)
class ExpansiveSystem:
    name: str
    f: Callable
    delta: Callable
    c: Fraction
    entropy: float | None = None
    analytic_m: int | None = None
    sampler: Callable | None = None          # (count, rng) -> list of points
    compare: Callable | None = None          # (points, threshold) -> (delta > t, delta >= t) tables

    def delta_tables(self, points: Sequence, threshold) -> tuple[np.ndarray, np.ndarray]:
        if self.compare is not None:
            return self.compare(points, threshold)
        n = len(points)
        gt = np.zeros((n, n), dtype=bool)
        ge = np.zeros((n, n), dtype=bool)
        for i in range(n):
            for j in range(i + 1, n):
                d = self.delta(points[i], points[j])
                gt[i, j] = gt[j, i] = d > threshold
                ge[i, j] = ge[j, i] = d >= threshold
        return gt, ge


# --------------------------------------------------------------------------
# concrete systems
# --------------------------------------------------------------------------

def _mod1(x: Fraction) -> Fraction:
    return x - math.floor(x)


def doubling(x: Fraction) -> Fraction:
    return _mod1(2 * x)


def arc_dist(x: Fraction, y: Fraction) -> Fraction:
    t = abs(_mod1(x) - _mod1(y))
    return min(t, 1 - t)


def _arc_compare(points, threshold):
    den = math.lcm(*(p.denominator for p in points)) if points else 1
    if den > 2 ** 52:
        return ExpansiveSystem("", None, arc_dist, Fraction(0)).delta_tables(points, threshold)
    a = np.array([p.numerator * (den // p.denominator) for p in points], dtype=np.int64)
    t = np.abs(a[:, None] - a[None, :])
    t = np.minimum(t, den - t)
    thr = Fraction(threshold) * den           # compare integers against a rational
    gt = t * thr.denominator > thr.numerator
    ge = t * thr.denominator >= thr.numerator
    return gt, ge


def doubling_system(c=Fraction(1, 4), denominator: int = 2 ** 10,
                    max_denominator: int | None = None) -> ExpansiveSystem:
    """x -> 2x mod 1 with the arc metric; c <= 1/4 gives m = 2.

    Random samples are k / denominator, or k / q with q drawn from
    2..max_denominator when that is given (periodic orbits included).
    """
    c = Fraction(c)
    if not 0 < c < Fraction(1, 2):
        raise InputError("expansivity constant must lie in (0, 1/2) for the doubling map")

    def sampler(count, rng):
        if max_denominator is None:
            return [Fraction(int(k), denominator) for k in rng.integers(0, denominator, size=count)]
        qs = rng.integers(2, max_denominator + 1, size=count)
        return [Fraction(int(rng.integers(0, q)), int(q)) for q in qs]

    return ExpansiveSystem("doubling", doubling, arc_dist, c, entropy=math.log(2),
                           analytic_m=2 if c <= Fraction(1, 4) else None,
                           sampler=sampler, compare=_arc_compare)


def _shift_analytic_m(r: int, c: Fraction) -> int:
    # largest first-disagreement index i with r**-i >= c/2, then its separation time
    i = 0
    while Fraction(1, r ** (i + 1)) >= c / 2:
        i += 1
    k = 0
    while not Fraction(1, r ** max(i - k, 0)) > c:
        k += 1
    return k


def shift_system(sub: Subshift, c=Fraction(1, 2)) -> ExpansiveSystem:
    """The shift on a subshift with delta = r**-(first disagreement)."""
    c = Fraction(c)
    r = sub.r

    def compare(points, threshold):
        n = len(points)
        dist = np.zeros((n, n), dtype=object)
        for i in range(n):
            for j in range(i + 1, n):
                dist[i, j] = dist[j, i] = shift_dist(points[i], points[j], r)
        thr = Fraction(threshold)
        gt = np.vectorize(lambda d: d > thr, otypes=[bool])(dist)
        ge = np.vectorize(lambda d: d >= thr, otypes=[bool])(dist)
        np.fill_diagonal(gt, False)
        np.fill_diagonal(ge, False)
        return gt, ge

    def sampler(count, rng):
        return [random_point(sub, rng) for _ in range(count)]

    m = _shift_analytic_m(r, c) if c <= 1 else None
    return ExpansiveSystem(f"shift(r={r})", shift_map, lambda x, y: shift_dist(x, y, r), c,
                           entropy=sft_entropy(sub), analytic_m=m, sampler=sampler,
                           compare=compare)


# --------------------------------------------------------------------------
# separation times
# --------------------------------------------------------------------------

def separation_time(sys: ExpansiveSystem, x, y, cap: int = DEFAULT_CAP) -> int | None:
    """Smallest i with delta(f^i x, f^i y) > c; None when x == y."""
    if x == y:
        return None
    for i in range(cap + 1):
        if sys.delta(x, y) > sys.c:
            return i
        x, y = sys.f(x), sys.f(y)
    raise HorizonExceeded(
        f"points stay within c={sys.c} for {cap} iterates; c is too large for an expansivity "
        "constant or the horizon cap is too small")


@dataclass
class SampleSet:
    points: list
    index: dict
    succ: np.ndarray          # index of f(point), or -1 when the image left the sample
    closure_depth: int

    def __len__(self):
        return len(self.points)

    @property
    def closed(self) -> bool:
        return bool((self.succ >= 0).all())

    def iterate(self, idx: np.ndarray, k: int) -> np.ndarray:
        """Indices of f^k of the given points; -1 once an image leaves the sample."""
        idx = np.asarray(idx)
        for _ in range(k):
            idx = np.where(idx >= 0, self.succ[np.maximum(idx, 0)], -1)
        return idx

    def depth(self) -> int:
        """Number of f-applications every point survives inside the sample."""
        if self.closed:
            return NEVER
        k, idx = 0, np.arange(len(self))
        while (idx >= 0).all():
            idx = self.iterate(idx, 1)
            k += 1
        return k - 1


def sample_closure(sys: ExpansiveSystem, base: Sequence, closure_depth: int = DEFAULT_CAP) -> SampleSet:
    """Base points together with their first closure_depth - 1 images."""
    points, index = [], {}

    def add(p):
        if p not in index:
            index[p] = len(points)
            points.append(p)
            return True
        return False

    frontier = [p for p in base if add(p)]
    for _ in range(closure_depth - 1):
        nxt = []
        for p in frontier:
            q = sys.f(p)
            if add(q):
                nxt.append(q)
        frontier = nxt
        if not frontier:
            break
    succ = np.array([index.get(sys.f(p), -1) for p in points], dtype=np.int64)
    return SampleSet(points, index, succ, closure_depth)


def random_sample(sys: ExpansiveSystem, count: int, seed: int,
                  closure_depth: int = DEFAULT_CAP) -> SampleSet:
    if sys.sampler is None:
        raise InputError(f"system {sys.name} has no sampler; pass base points explicitly")
    rng = np.random.default_rng(seed)
    return sample_closure(sys, sys.sampler(count, rng), closure_depth)


def separation_table(sys: ExpansiveSystem, sample: SampleSet, cap: int = DEFAULT_CAP) -> np.ndarray:
    """n(x, y) for all pairs; NEVER on the diagonal.

    On the closed part of the sample n(x, y) = 1 + n(fx, fy) whenever
    delta(x, y) <= c, so the table is filled by iterating that recursion.
    """
    N = len(sample)
    gt, _ = sys.delta_tables(sample.points, sys.c)
    n = np.full((N, N), -1, dtype=np.int64)
    n[gt] = 0
    np.fill_diagonal(n, NEVER)
    succ = sample.succ
    open_rows = succ < 0
    for _ in range(cap):
        todo = n < 0
        if not todo.any():
            break
        img = n[np.ix_(np.maximum(succ, 0), np.maximum(succ, 0))]
        upd = todo & (img >= 0) & ~open_rows[:, None] & ~open_rows[None, :]
        n[upd] = np.minimum(img[upd] + 1, NEVER)
    todo = np.argwhere(n < 0)
    for i, j in todo:
        if i < j:
            v = separation_time(sys, sample.points[i], sample.points[j], cap)
            n[i, j] = n[j, i] = v
    return n


def weak_triangle_m(sys: ExpansiveSystem, sample: SampleSet, ntab: np.ndarray | None = None,
                    cap: int = DEFAULT_CAP) -> int:
    """Largest n(x, y) among sampled pairs with delta(x, y) >= c/2."""
    if ntab is None:
        ntab = separation_table(sys, sample, cap)
    _, ge = sys.delta_tables(sample.points, sys.c / 2)
    vals = ntab[ge]
    return int(vals.max()) if vals.size else 0


def resolve_m(sys: ExpansiveSystem, sample: SampleSet, ntab: np.ndarray | None = None,
              cap: int = DEFAULT_CAP) -> tuple[int, str]:
    """Analytic m when the system knows it, else twice the sampled value."""
    if sys.analytic_m is not None:
        return sys.analytic_m, "analytic"
    return 2 * weak_triangle_m(sys, sample, ntab, cap), "sampled x2"


def choose_alpha(m: int) -> float:
    return 2.0 ** (1.0 / max(m, 1))


# --------------------------------------------------------------------------
# quasi-metric, Frink metric, adapted metric
# --------------------------------------------------------------------------

@dataclass
class QuasiMetricTable:
    alpha: float
    m: int
    ntab: np.ndarray
    cap: int
    rho: np.ndarray = field(init=False)

    def __post_init__(self):
        finite = self.ntab != NEVER
        self.rho = np.zeros(self.ntab.shape)
        self.rho[finite] = self.alpha ** -self.ntab[finite].astype(float)


def _alpha_slack(alpha: float) -> int:
    """Largest integer k with alpha**k <= 2."""
    k = int(math.floor(math.log(2) / math.log(alpha) + 1e-12))
    while alpha ** (k + 1) <= 2:
        k += 1
    while k > 0 and alpha ** k > 2:
        k -= 1
    return k


def weak_triangle_violations(ntab: np.ndarray, alpha: float) -> int:
    """Count (x, z) pairs for which some y breaks rho(x,z) <= 2 max(rho(x,y), rho(y,z)).

    In separation times the condition reads min(n(x,y), n(y,z)) <= n(x,z) + k
    with alpha**k <= 2; it is checked level by level with boolean products.
    """
    k = _alpha_slack(alpha)
    finite = ntab[ntab != NEVER]
    top = int(finite.max()) if finite.size else 0
    bad = np.zeros(ntab.shape, dtype=bool)
    for t in range(k + 1, top + 2):
        B = (ntab >= t).astype(np.float32)
        reach = (B @ B) > 0
        bad |= reach & (ntab < t - k)
    np.fill_diagonal(bad, False)
    return int(bad.sum())


def build_rho(sys: ExpansiveSystem, sample: SampleSet, alpha: float, m: int | None = None,
              cap: int = DEFAULT_CAP, ntab: np.ndarray | None = None) -> QuasiMetricTable:
    if ntab is None:
        ntab = separation_table(sys, sample, cap)
    if m is None:
        m = weak_triangle_m(sys, sample, ntab, cap)
    q = QuasiMetricTable(alpha, m, ntab, cap)
    bad = weak_triangle_violations(ntab, alpha)
    if bad:
        raise WeakTriangleViolation(
            f"{bad} pairs violate rho(x,z) <= 2 max(rho(x,y), rho(y,z)) at alpha={alpha}; "
            "m was underestimated")
    return q


def expansion_violations(q: QuasiMetricTable, sample: SampleSet) -> int:
    """Pairs breaking rho(fx,fy) <= alpha rho(x,y), with equality when n(x,y) >= 1."""
    ok = sample.succ >= 0
    idx = np.flatnonzero(ok)
    s = sample.succ[idx]
    n0 = q.ntab[np.ix_(idx, idx)]
    n1 = q.ntab[np.ix_(s, s)]
    off = ~np.eye(len(idx), dtype=bool)
    pos = off & (n0 >= 1) & (n0 != NEVER)
    bad = pos & (n1 != n0 - 1)
    r0, r1 = q.rho[np.ix_(idx, idx)], q.rho[np.ix_(s, s)]
    bad |= off & (r1 > q.alpha * r0 * (1 + 1e-12))
    return int(bad.sum())


@dataclass
class FrinkMetric:
    D: np.ndarray


def frink_metrize(q: QuasiMetricTable, tol: float = 1e-12) -> FrinkMetric:
    """Chain-infimum metric: shortest paths on the complete graph weighted by rho."""
    D = shortest_path(q.rho, method="FW", directed=False)
    fm = FrinkMetric(D)
    bad = sandwich_violations(q, fm, tol)
    if bad:
        raise SandwichViolation(f"Frink metric fails D <= rho <= 4D on {bad} pairs")
    return fm


def sandwich_violations(q: QuasiMetricTable, fm: FrinkMetric, tol: float = 1e-12) -> int:
    return int(((fm.D > q.rho * (1 + tol)) | (q.rho > 4 * fm.D * (1 + tol))).sum())


def _lip_ratio_table(D: np.ndarray, sample: SampleSet, k: int):
    idx = np.arange(len(sample))
    img = sample.iterate(idx, k)
    if (img < 0).any():
        raise InsufficientClosure(f"sample is not closed under {k} applications of f")
    return D[np.ix_(img, img)]


@dataclass
class AdaptedMetric:
    n: int
    L: float
    d: np.ndarray

    @property
    def lip_estimate(self) -> float:
        return self.L ** (1 / self.n)


def adapted_metric(fm: FrinkMetric, sample: SampleSet, n: int) -> AdaptedMetric:
    D = fm.D
    Dn = _lip_ratio_table(D, sample, n)
    pos = D > 0
    L = float((Dn[pos] / D[pos]).max())
    if L == 0:
        raise DegenerateSample(f"f^{n} maps the whole sample to one point; Lip_D(f^{n}) = 0")
    d = D.copy()
    idx = np.arange(len(sample))
    for i in range(1, n):
        img = sample.iterate(idx, i)
        d = np.maximum(d, D[np.ix_(img, img)] / L ** (i / n))
    return AdaptedMetric(n, L, d)


def adapted_sandwich_violations(am: AdaptedMetric, fm: FrinkMetric, alpha: float,
                                tol: float = 1e-12) -> int:
    D, d = fm.D, am.d
    return int(((D > d * (1 + tol)) | (d > 4 * alpha ** am.n * D * (1 + tol))).sum())


def orbit_bound_violations(q: QuasiMetricTable, fm: FrinkMetric, sample: SampleSet,
                           max_i: int, tol: float = 1e-12) -> dict:
    """D(f^i x, f^i y) <= 4 alpha^i D(x, y) on all pairs, and >= alpha^i D / 4 when n(x, y) >= i."""
    D = fm.D
    idx = np.arange(len(sample))
    off = ~np.eye(len(sample), dtype=bool)
    lip_bad = skew_bad = checked = 0
    for i in range(1, max_i + 1):
        img = sample.iterate(idx, i)
        if (img < 0).any():
            break
        Di = D[np.ix_(img, img)]
        a = q.alpha ** i
        lip_bad += int((off & (Di > 4 * a * D * (1 + tol))).sum())
        band = off & (q.ntab >= i)
        skew_bad += int((band & (Di < a * D / 4 * (1 - tol))).sum())
        checked = i
    return {"lip_bound": lip_bad, "skew_bound": skew_bad, "max_i": checked}


def band_ratios(fm: FrinkMetric, q: QuasiMetricTable, sample: SampleSet, i: int) -> np.ndarray:
    """D(f^i x, f^i y) / D(x, y) over the near-diagonal band n(x, y) >= i."""
    D = fm.D
    Di = _lip_ratio_table(D, sample, i)
    band = (q.ntab >= i) & (q.ntab != NEVER)
    if not band.any():
        raise SkewDegenerate(f"no sampled pair with separation time >= {i}; enlarge the sample")
    return Di[band] / D[band]


# --------------------------------------------------------------------------
# certificate
# --------------------------------------------------------------------------

@dataclass
class ExpansiveReport:
    n: int
    L: float
    lip_d: float
    empirical_lip_d: float
    boxdim: DimensionFit
    product: float
    entropy: float | None
    band_lip: float
    band_skew: float
    factor16_ok: bool
    hd_bounds: dict
    hd_bound: float

    def to_json(self) -> dict:
        return {"n": self.n, "L": self.L, "lip_d": self.lip_d,
                "empirical_lip_d": self.empirical_lip_d, "boxdim": self.boxdim.to_json(),
                "product": self.product, "entropy": self.entropy,
                "band": {"lip": self.band_lip, "skew": self.band_skew,
                         "lip_le_16_skew": self.factor16_ok},
                "hd_finite_bounds": {str(k): v for k, v in self.hd_bounds.items()},
                "hd_finite_bound": self.hd_bound}


def hd_finite_bounds(sys: ExpansiveSystem, q: QuasiMetricTable, fm: FrinkMetric,
                     sample: SampleSet, max_i: int) -> dict[int, float]:
    """h(f^i) / log+ Skew_D(f^i) for every admissible i (alpha^i / 4 > 1) with a non-empty band."""
    out = {}
    if sys.entropy is None:
        return out
    for i in range(1, max_i + 1):
        if not q.alpha ** i / 4 > 1 + 1e-12:       # sqrt(2)**4 rounds above 4
            continue
        try:
            skew = float(band_ratios(fm, q, sample, i).min())
        except (SkewDegenerate, InsufficientClosure):
            break
        out[i] = i * sys.entropy / math.log(skew) if skew > 1 else math.inf
    return out


def sample_box_dimension(table: np.ndarray, levels: int = 10) -> DimensionFit:
    """Box dimension of a sample given by its distance table.

    Separation-time metrics take few distinct values at coarse scales, so the
    fit uses scales whose net counts run from 4 up to a quarter of the sample.
    """
    ms = MetricSample.from_matrix(table)
    if len(ms) < 32:
        return box_dimension(ms, levels=levels)
    return box_dimension(ms, resolvable_scales(ms, 4, len(ms) // 4, levels))


def expansive_certificate(sys: ExpansiveSystem, sample: SampleSet, q: QuasiMetricTable,
                          fm: FrinkMetric, n: int, scales=None) -> ExpansiveReport:
    am = adapted_metric(fm, sample, n)
    if scales is None:
        fit = sample_box_dimension(am.d)
    else:
        fit = box_dimension(MetricSample.from_matrix(am.d), scales)
    ok = np.flatnonzero(sample.succ >= 0)
    img = sample.succ[ok]
    d0 = am.d[np.ix_(ok, ok)]
    pos = d0 > 0
    emp = float((am.d[np.ix_(img, img)][pos] / d0[pos]).max())
    product = fit.slope * max(math.log(am.lip_estimate), 0.0)
    ratios = band_ratios(fm, q, sample, n)
    blip, bskew = float(ratios.max()), float(ratios.min())
    bounds = hd_finite_bounds(sys, q, fm, sample, max_i=q.ntab[q.ntab != NEVER].max())
    hd_bound = min(bounds.values()) if bounds else math.inf
    return ExpansiveReport(n, am.L, am.lip_estimate, emp, fit, product, sys.entropy,
                           blip, bskew, blip <= 16 * bskew * (1 + 1e-12), bounds, hd_bound)
