"""One-sided shift spaces over a finite alphabet.

Points are eventually periodic sequences stored as (preperiod, period) in
canonical form, so equality, the shift and the first-disagreement metric
r**-i are all exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import InputError

SPECTRAL_TOL = 1e-10


@dataclass(frozen=True)
class Subshift:
    r: int
    kind: str = "full"                  # "full" | "sft"
    transitions: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.r < 1:
            raise InputError("alphabet size must be positive")
        if self.kind not in ("full", "sft"):
            raise InputError(f"unknown subshift kind {self.kind!r}")
        if self.kind == "sft":
            M = self.transitions
            if M is None or len(M) != self.r or any(len(row) != self.r for row in M):
                raise InputError("SFT needs an r x r transition matrix")
            if any(v not in (0, 1) for row in M for v in row):
                raise InputError("transition matrix must be 0/1")

    @classmethod
    def full(cls, r: int) -> "Subshift":
        return cls(r, "full")

    @classmethod
    def sft(cls, transitions: Sequence[Sequence[int]]) -> "Subshift":
        M = tuple(tuple(int(v) for v in row) for row in transitions)
        return cls(len(M), "sft", M)

    @classmethod
    def from_json(cls, data: dict) -> "Subshift":
        kind = data.get("kind", "full")
        if kind == "full":
            return cls.full(int(data["r"]))
        sub = cls.sft(data["transitions"])
        if "r" in data and int(data["r"]) != sub.r:
            raise InputError("r does not match the transition matrix")
        return sub

    def to_json(self) -> dict:
        d = {"r": self.r, "kind": self.kind}
        if self.kind == "sft":
            d["transitions"] = [list(row) for row in self.transitions]
        return d

    def matrix(self) -> np.ndarray:
        if self.kind == "full":
            return np.ones((self.r, self.r), dtype=np.int64)
        return np.array(self.transitions, dtype=np.int64)

    def essential_symbols(self) -> list[int]:
        """Symbols that start at least one infinite admissible sequence."""
        M = self.matrix()
        alive = np.ones(self.r, dtype=bool)
        while True:
            nxt = alive & (M[:, alive].sum(axis=1) > 0)
            if (nxt == alive).all():
                return [int(i) for i in np.flatnonzero(alive)]
            alive = nxt

    def allows(self, a: int, b: int) -> bool:
        return self.kind == "full" or bool(self.transitions[a][b])

    def admissible_word(self, w: Sequence[int]) -> bool:
        if any(not 0 <= s < self.r for s in w):
            return False
        return all(self.allows(a, b) for a, b in zip(w, w[1:]))


def _primitive_root(w: tuple) -> tuple:
    n = len(w)
    for p in range(1, n + 1):
        if n % p == 0 and w[:p] * (n // p) == w:
            return w[:p]
    return w


@dataclass(frozen=True)
class SymbolicPoint:
    """The sequence preperiod + period + period + ..., kept canonical."""

    preperiod: tuple[int, ...]
    period: tuple[int, ...]

    def __post_init__(self):
        pre = tuple(int(s) for s in self.preperiod)
        per = tuple(int(s) for s in self.period)
        if not per:
            raise InputError("period must be non-empty")
        per = _primitive_root(per)
        while pre and pre[-1] == per[-1]:
            pre = pre[:-1]
            per = (per[-1],) + per[:-1]
        object.__setattr__(self, "preperiod", pre)
        object.__setattr__(self, "period", per)

    @classmethod
    def parse(cls, literal: str) -> "SymbolicPoint":
        """``"pre|period"``; symbols are digits, or comma separated when r > 10."""
        if "|" not in literal:
            pre, per = "", literal
        else:
            pre, per = literal.split("|", 1)

        def word(s):
            s = s.strip()
            if not s:
                return ()
            if "," in s:
                return tuple(int(t) for t in s.split(","))
            return tuple(int(ch) for ch in s)

        return cls(word(pre), word(per))

    def __str__(self):
        sep = "," if max(self.preperiod + self.period) >= 10 else ""
        return sep.join(map(str, self.preperiod)) + "|" + sep.join(map(str, self.period))

    def __getitem__(self, i: int) -> int:
        k = len(self.preperiod)
        if i < k:
            return self.preperiod[i]
        return self.period[(i - k) % len(self.period)]

    def prefix(self, n: int) -> tuple[int, ...]:
        return tuple(self[i] for i in range(n))

    def admissible(self, sub: Subshift) -> bool:
        w = self.preperiod + self.period + self.period[:1]
        return sub.admissible_word(w) and sub.admissible_word(self.period + self.period[:1])


def shift(x: SymbolicPoint) -> SymbolicPoint:
    if x.preperiod:
        return SymbolicPoint(x.preperiod[1:], x.period)
    return SymbolicPoint((), x.period[1:] + x.period[:1])


def first_disagreement(x: SymbolicPoint, y: SymbolicPoint) -> int | None:
    if x == y:
        return None
    horizon = max(len(x.preperiod), len(y.preperiod)) + math.lcm(len(x.period), len(y.period))
    for i in range(horizon):
        if x[i] != y[i]:
            return i
    raise AssertionError("distinct canonical points must differ within the horizon")


def shift_dist(x: SymbolicPoint, y: SymbolicPoint, r: int) -> Fraction:
    """r ** -i for the first index i where x and y differ; exact."""
    i = first_disagreement(x, y)
    if i is None:
        return Fraction(0)
    return Fraction(1, r ** i)


def random_point(sub: Subshift, rng: np.random.Generator, max_pre: int = 8,
                 max_period: int = 8) -> SymbolicPoint:
    """Random admissible eventually periodic point (rejection on the closing edge)."""
    symbols = sub.essential_symbols()
    if not symbols:
        raise InputError("subshift is empty")
    for _ in range(10_000):
        npre = int(rng.integers(0, max_pre + 1))
        nper = int(rng.integers(1, max_period + 1))
        w = [int(rng.choice(symbols))]
        ok = True
        for _ in range(npre + nper - 1):
            nxt = [b for b in symbols if sub.allows(w[-1], b)]
            if not nxt:
                ok = False
                break
            w.append(int(rng.choice(nxt)))
        if not ok:
            continue
        pt = SymbolicPoint(tuple(w[:npre]), tuple(w[npre:]))
        if pt.admissible(sub):
            return pt
    raise InputError("could not sample an admissible periodic point")


# --------------------------------------------------------------------------
# entropy and cylinder counts
# --------------------------------------------------------------------------

def _essential_matrix(sub: Subshift) -> np.ndarray:
    keep = sub.essential_symbols()
    return sub.matrix()[np.ix_(keep, keep)]


def _perron_bounds(M: np.ndarray, tol: float) -> tuple[float, float]:
    """Collatz-Wielandt enclosure of the Perron root of an irreducible M."""
    n = len(M)
    B = M.astype(float) + np.eye(n)         # primitive, same Perron vector, root + 1
    v = np.ones(n)
    lo, hi = 0.0, math.inf
    for _ in range(100_000):
        w = B @ v
        ratios = w / v
        lo, hi = max(lo, ratios.min()), min(hi, ratios.max())
        if hi - lo <= tol:
            break
        v = w / w.max()
    return lo - 1, hi - 1


def spectral_radius_bounds(sub: Subshift, tol: float = SPECTRAL_TOL) -> tuple[float, float]:
    if sub.kind == "full":
        return float(sub.r), float(sub.r)
    M = _essential_matrix(sub)
    if M.size == 0:
        return 0.0, 0.0
    ncomp, labels = connected_components(M, directed=True, connection="strong")
    lo = hi = 0.0
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        sub_m = M[np.ix_(idx, idx)]
        if sub_m.sum() == 0:
            continue
        a, b = _perron_bounds(sub_m, tol)
        lo, hi = max(lo, a), max(hi, b)
    return lo, hi


def sft_entropy(sub: Subshift, tol: float = SPECTRAL_TOL) -> float:
    """log of the spectral radius of the transition matrix (log r for the full shift)."""
    lo, hi = spectral_radius_bounds(sub, tol)
    rho = (lo + hi) / 2
    return math.log(rho) if rho > 1 else 0.0


def cylinder_count(sub: Subshift, n: int) -> int:
    """Number of admissible words of length n (exact integer)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if sub.kind == "full":
        return sub.r ** n
    M = [[int(v) for v in row] for row in _essential_matrix(sub).tolist()]
    k = len(M)
    v = [1] * k
    for _ in range(n - 1):
        v = [sum(M[i][j] * v[j] for j in range(k)) for i in range(k)]
    return sum(v)


def _log_base(count: int, r: int) -> float:
    # exact exponent when count is a power of r, so full shifts fit a slope of exactly 1
    if r >= 2 and count >= 1:
        k = round(math.log(count) / math.log(r))
        if r ** k == count:
            return float(k)
    return math.log(count) / math.log(r)


def cylinder_dimension(sub: Subshift, n_max: int = 15) -> float:
    """Least-squares slope of log #B_n against n log r, n = 2..n_max."""
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    if sub.r < 2:
        return 0.0
    ns = list(range(2, n_max + 1))
    ys = [_log_base(cylinder_count(sub, n), sub.r) for n in ns]
    xbar = sum(ns) / len(ns)
    ybar = sum(ys) / len(ys)
    num = sum((x - xbar) * (y - ybar) for x, y in zip(ns, ys))
    den = sum((x - xbar) ** 2 for x in ns)
    return num / den
