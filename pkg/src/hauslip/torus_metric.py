"""Entropy-adapted metrics for linear maps of the torus.

Each real Jordan block J_i of the conjugated map gets a weighted max-norm
(coordinate t divided by eta**t), which makes J_i almost an isometry up to
its spectral radius. Unstable blocks are then flattened with a power
exponent gamma_i so that every unstable direction expands at the common
rate 1 + eta. The max over blocks gives a translation-invariant metric on
R^n, which is pushed down to R^n / T Z^n by minimising over lattice
translates.

Points of R^n / T Z^n are stored by lattice coordinates c (so y = T c); this
makes the conjugacy psi: R^n/Z^n -> R^n/T Z^n the identity on coordinates,
and reduction modulo the lattice exact for rational c.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np
from mpmath import mp
from scipy.spatial import cKDTree

from .errors import DimensionMismatch, EnumerationInsufficient, NotApplicable
from .exact_linalg import CLASSIFY_TOL, JordanBlock, RealJordanForm, Spectrum, entropy

METRIC_PRECISION = 128
ETA_BISECTION_TOL = 1e-12


def real_block(lam, size: int = 1) -> JordanBlock:
    lam = mpmath.mpf(lam)
    m = abs(lam)
    return JordanBlock("real", lam, mpmath.mpf(0), size, m, _stability(m))


def complex_block(alpha, beta, size: int = 2) -> JordanBlock:
    if size % 2:
        raise DimensionMismatch("complex blocks have even size")
    alpha, beta = mpmath.mpf(alpha), abs(mpmath.mpf(beta))
    m = mpmath.sqrt(alpha ** 2 + beta ** 2)
    return JordanBlock("complex", alpha, beta, size, m, _stability(m))


def _stability(m) -> str:
    if abs(m - 1) <= CLASSIFY_TOL:
        return "neutral"
    return "unstable" if m > 1 else "stable"


# --------------------------------------------------------------------------
# per-block metrics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EtaChoice:
    eta: float
    epsilon: float
    feasible: bool


@dataclass(frozen=True)
class BlockMetric:
    block: JordanBlock
    eta: mpmath.mpf

    @property
    def size(self) -> int:
        return self.block.size

    @property
    def kind(self) -> str:
        return self.block.kind

    @property
    def sharp(self) -> bool:
        """True when J_i acts as plain multiplication by lambda_i."""
        return self.size == (1 if self.kind == "real" else 2)

    @property
    def lip(self) -> mpmath.mpf:
        return block_lipschitz(self)

    @property
    def gamma(self) -> mpmath.mpf:
        return _gamma(self)


def block_lipschitz(b: BlockMetric) -> mpmath.mpf:
    """Lipschitz constant of v -> J_i v under the weighted block norm."""
    return b.block.modulus if b.sharp else b.block.modulus + b.eta


def _gamma(b: BlockMetric) -> mpmath.mpf:
    if b.block.stability != "unstable":
        return mpmath.mpf(1)
    return mpmath.log(1 + b.eta) / mpmath.log(block_lipschitz(b))


def gamma_exponents(blocks: Sequence[JordanBlock], eta) -> list[mpmath.mpf]:
    eta = mpmath.mpf(eta)
    return [_gamma(BlockMetric(b, eta)) for b in blocks]


def _check_len(b: BlockMetric, v):
    if len(v) != b.size:
        raise DimensionMismatch(f"vector of length {len(v)} for block of size {b.size}")


def block_norm(b: BlockMetric, v: Sequence) -> mpmath.mpf:
    _check_len(b, v)
    v = [mpmath.mpf(x) for x in v]
    if b.kind == "real":
        terms = [abs(x) / b.eta ** (t + 1) for t, x in enumerate(v)]
    else:
        terms = [mpmath.hypot(v[2 * t], v[2 * t + 1]) / b.eta ** (t + 1)
                 for t in range(b.size // 2)]
    return max(terms)


def block_norm_np(b: BlockMetric, V: np.ndarray) -> np.ndarray:
    """Vectorised block norm over the rows of ``V`` (float64)."""
    eta = float(b.eta)
    if b.kind == "real":
        w = eta ** -np.arange(1, b.size + 1)
        return np.max(np.abs(V) * w, axis=-1)
    w = eta ** -np.arange(1, b.size // 2 + 1)
    mags = np.hypot(V[..., 0::2], V[..., 1::2])
    return np.max(mags * w, axis=-1)


def block_apply(b: BlockMetric, v: Sequence) -> list:
    """J_i v in the block's own coordinates."""
    _check_len(b, v)
    M = b.block.matrix()
    out = M * mp.matrix([mpmath.mpf(x) for x in v])
    return [out[i] for i in range(b.size)]


def witness_vector(b: BlockMetric) -> list:
    """A vector on which J_i stretches the block norm by exactly |lambda| + eta."""
    if b.sharp:
        raise NotApplicable("block is a pure multiplication; its Lipschitz constant is |lambda|")
    blk = b.block
    if blk.kind == "real":
        s = mpmath.sign(blk.re) if blk.re != 0 else mpmath.mpf(1)
        return [(b.eta * s) ** t for t in range(1, b.size + 1)]
    if blk.modulus == 0:
        u = mpmath.mpc(1)
    else:
        u = mpmath.mpc(blk.re, blk.im) / blk.modulus
    out = []
    for t in range(1, b.size // 2 + 1):
        z = (b.eta * u) ** t
        out.extend([z.real, z.imag])
    return out


# --------------------------------------------------------------------------
# product metric on R^n
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProductMetric:
    blocks: tuple[BlockMetric, ...]
    precision: int = METRIC_PRECISION

    @property
    def n(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def eta(self) -> mpmath.mpf:
        return self.blocks[0].eta

    def slices(self) -> list[slice]:
        out, k = [], 0
        for b in self.blocks:
            out.append(slice(k, k + b.size))
            k += b.size
        return out

    @property
    def gammas(self) -> list[mpmath.mpf]:
        with mp.workprec(self.precision):
            return [b.gamma for b in self.blocks]

    @property
    def analytic_hd(self) -> mpmath.mpf:
        with mp.workprec(self.precision):
            return mpmath.fsum(b.size / b.gamma for b in self.blocks)

    @property
    def block_lips(self) -> list[mpmath.mpf]:
        """Lipschitz constant of J_i under d_i ** gamma_i."""
        with mp.workprec(self.precision):
            return [b.lip ** b.gamma for b in self.blocks]

    @property
    def analytic_lip(self) -> mpmath.mpf:
        return max(self.block_lips)

    def dist_np(self, Z: np.ndarray) -> np.ndarray:
        """d(0, z) for the rows of ``Z``; the metric is translation invariant."""
        out = None
        for b, sl in zip(self.blocks, self.slices()):
            v = block_norm_np(b, Z[..., sl]) ** float(b.gamma)
            out = v if out is None else np.maximum(out, v)
        return out


def build_product_metric(blocks: Sequence[JordanBlock] | RealJordanForm, eta,
                         precision: int = METRIC_PRECISION) -> ProductMetric:
    if isinstance(blocks, RealJordanForm):
        blocks = blocks.blocks
    with mp.workprec(precision):
        eta = mpmath.mpf(eta)
        if not 0 < eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        for b in blocks:
            if b.stability == "unstable" and not 1 + eta < b.modulus:
                raise ValueError(f"eta={eta} violates 1 + eta < |lambda| = {b.modulus}")
        return ProductMetric(tuple(BlockMetric(b, eta) for b in blocks), precision)


def product_dist(pm: ProductMetric, y: Sequence, y2: Sequence) -> mpmath.mpf:
    if len(y) != pm.n or len(y2) != pm.n:
        raise DimensionMismatch(f"expected vectors of length {pm.n}")
    with mp.workprec(pm.precision):
        z = [mpmath.mpf(a) - mpmath.mpf(b) for a, b in zip(y, y2)]
        best = mpmath.mpf(0)
        for b, sl in zip(pm.blocks, pm.slices()):
            best = max(best, block_norm(b, z[sl]) ** b.gamma)
        return best


@dataclass(frozen=True)
class AnalyticCertificate:
    hd: mpmath.mpf
    lip: mpmath.mpf
    product: mpmath.mpf
    bound: mpmath.mpf
    entropy: mpmath.mpf
    argmax_block: int

    def to_json(self) -> dict:
        from .exact_linalg import mp_str
        return {"HD": mp_str(self.hd), "Lip": mp_str(self.lip), "product": mp_str(self.product),
                "bound": mp_str(self.bound), "argmax_block": self.argmax_block}


def analytic_certificate(pm: ProductMetric, h) -> AnalyticCertificate:
    """HD, Lip and HD * log+ Lip of the product metric, with the closed-form bound."""
    with mp.workprec(pm.precision):
        h = mpmath.mpf(h)
        hd = pm.analytic_hd
        lips = pm.block_lips
        lip = max(lips)
        arg = lips.index(lip)
        product = hd * max(mpmath.log(lip), 0)
        eta = pm.eta
        bound = pm.n * mpmath.log(1 + eta) + mpmath.fsum(
            b.size * mpmath.log(b.lip) for b in pm.blocks if b.block.stability == "unstable")
        # neutral blocks may exceed 1 + eta by the classification tolerance
        assert product <= bound + pm.n * CLASSIFY_TOL, (product, bound)
        return AnalyticCertificate(hd, lip, product, bound, h, arg)


def _pseudo_blocks(s: Spectrum) -> list[JordanBlock]:
    # before the Jordan structure is known, assume one block per eigenvalue (worst lip case)
    return [JordanBlock(e.kind, e.re, e.im, e.dim, e.modulus, e.stability) for e in s.items]


def choose_eta(s: Spectrum, epsilon: float, blocks: Sequence[JordanBlock] | None = None,
               precision: int = METRIC_PRECISION) -> EtaChoice:
    """Largest eta (to 1e-12) whose certified product stays below h + epsilon.

    With ``blocks`` the actual per-block Lipschitz cases are used; otherwise
    every repeated eigenvalue is treated as one defective block.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    blks = list(blocks) if blocks is not None else _pseudo_blocks(s)
    with mp.workprec(precision):
        h = entropy(s)
        target = h + mpmath.mpf(epsilon)
        hi = mpmath.mpf(1)
        for b in blks:
            if b.stability == "unstable":
                hi = min(hi, b.modulus - 1)

        def ok(eta):
            pm = ProductMetric(tuple(BlockMetric(b, eta) for b in blks), precision)
            return analytic_certificate(pm, h).product < target

        lo = mpmath.mpf(0)
        while hi - lo > ETA_BISECTION_TOL:
            mid = (lo + hi) / 2
            if ok(mid):
                lo = mid
            else:
                hi = mid
        return EtaChoice(float(lo), float(epsilon), lo > 0)


# --------------------------------------------------------------------------
# torus
# --------------------------------------------------------------------------

def _frac_mod1(q: Fraction) -> Fraction:
    return q - math.floor(q)


def _frac_centered(q: Fraction) -> Fraction:
    """Representative of q mod 1 in [-1/2, 1/2)."""
    return q - math.floor(q + Fraction(1, 2))


@dataclass(frozen=True)
class TorusPoint:
    """Point given by lattice coordinates; arithmetic is exact."""

    coords: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(Fraction(c) for c in self.coords))

    @property
    def canonical(self) -> "TorusPoint":
        return TorusPoint(tuple(_frac_mod1(c) for c in self.coords))

    def __eq__(self, other):
        return isinstance(other, TorusPoint) and self.canonical.coords == other.canonical.coords

    def __hash__(self):
        return hash(self.canonical.coords)

    def translate(self, k: Sequence[int]) -> "TorusPoint":
        return TorusPoint(tuple(c + int(v) for c, v in zip(self.coords, k)))

    def apply(self, A) -> "TorusPoint":
        """Image under x -> A x mod Z^n for an integer matrix A."""
        rows = A.entries if hasattr(A, "entries") else A
        return TorusPoint(tuple(_frac_mod1(sum(int(a) * c for a, c in zip(row, self.coords)))
                                for row in rows)).canonical

    def to_numpy(self) -> np.ndarray:
        return np.array([float(c) for c in self.canonical.coords])

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, bits: int = 30) -> "TorusPoint":
        ks = rng.integers(0, 2 ** bits, size=n)
        return cls(tuple(Fraction(int(k), 2 ** bits) for k in ks))


@dataclass
class TorusMetric:
    pm: ProductMetric
    T: mpmath.matrix           # lattice basis (columns)
    enum_radius: int = 2
    max_radius: int = 64
    T_np: np.ndarray = field(init=False, repr=False)
    Tinv_np: np.ndarray = field(init=False, repr=False)
    sigma_min: float = field(init=False)

    def __post_init__(self):
        self.T_np = np.array([[float(self.T[i, j]) for j in range(self.T.cols)]
                              for i in range(self.T.rows)])
        self.Tinv_np = np.linalg.inv(self.T_np)
        s = np.linalg.svd(self.T_np, compute_uv=False)
        self.sigma_min = float(s[-1]) * (1 - 1e-9)

    @property
    def n(self) -> int:
        return self.pm.n

    def block_widths(self, bound: float) -> np.ndarray:
        """Per-coordinate radius W_c: d(0, z) <= bound forces |z_c| <= W_c.

        Level t of a block (one coordinate, or a rotation pair) is weighted by
        eta**-t, so its magnitude is at most eta**t * bound**(1/gamma_i).
        """
        eta = float(self.pm.eta)
        w = np.empty(self.n)
        for b, sl in zip(self.pm.blocks, self.pm.slices()):
            r = bound ** (1 / float(b.gamma))
            step = 1 if b.kind == "real" else 2
            w[sl] = np.repeat(eta ** np.arange(1, b.size // step + 1), step) * r
        return w * (1 + 1e-9)

    def translate_ranges(self, bounds, check: bool = True) -> np.ndarray:
        """|k_j| limits, one row per bound, for translates of a centred difference that can reach d <= bound."""
        bounds = np.atleast_1d(np.asarray(bounds, dtype=float))
        R = np.zeros((len(bounds), self.n))
        w = self.block_widths(1.0)
        for b, sl in zip(self.pm.blocks, self.pm.slices()):
            Ti = self.Tinv_np[:, sl]
            if b.kind == "real":
                c = np.abs(Ti) @ w[sl]
            else:
                # each rotation pair lies in a disc of radius w
                c = np.hypot(Ti[:, 0::2], Ti[:, 1::2]) @ w[sl][0::2]
            R += np.outer(bounds ** (1 / float(b.gamma)), c)
        K = np.floor(np.minimum(R, 1e15) * (1 + 1e-6) + 0.5).astype(np.int64)
        if check and K.max(initial=0) > self.max_radius:
            raise EnumerationInsufficient(
                f"lattice enumeration needs |k| up to {K.max()} > max_radius {self.max_radius}")
        return K

    def translate_range(self, bound: float) -> np.ndarray:
        return self.translate_ranges([bound])[0]

    def dist_many(self, D: np.ndarray, cap: float = math.inf) -> np.ndarray:
        """Torus distance for rows of lattice-coordinate differences ``D`` (float64).

        The box |k| <= enum_radius gives an upper bound per row, and the block
        widths of that bound limit which translates can still do better. Rows
        whose limit exceeds the box enumerate a box twice as wide (or exactly
        the limit) and repeat; a smaller bound shrinks the limit, so this ends
        with the minimum certified global, or raises past max_radius.

        With a finite ``cap`` the limit comes from min(bound, cap): values
        <= cap are still exact, larger ones are only known to exceed cap.
        """
        D = np.atleast_2d(np.asarray(D, dtype=float))
        D = D - np.floor(D + 0.5)
        r = self.enum_radius
        best = self._min_over(D, [range(-r, r + 1)] * self.n)
        done = np.full(D.shape, r, dtype=np.int64)
        while True:
            K = self.translate_ranges(np.minimum(best, cap), check=False)
            todo = np.flatnonzero((K > done).any(axis=1))
            if not todo.size:
                return best
            nxt = np.maximum(np.minimum(K[todo], 2 * done[todo]), done[todo])
            if nxt.max() > self.max_radius:
                raise EnumerationInsufficient(
                    f"lattice enumeration needs |k| up to {nxt.max()} > max_radius {self.max_radius}")
            groups: dict = {}
            for i, key in zip(todo, map(tuple, nxt)):
                groups.setdefault(key, []).append(i)
            for key, idx in groups.items():
                ranges = [range(-k, k + 1) for k in key]
                best[idx] = np.minimum(best[idx], self._min_over(D[idx], ranges))
            done[todo] = nxt

    def systole_lower(self) -> float:
        """Lower bound for d(0, T k) over nonzero integer k.

        |T k| >= sigma_min, so some block carries at least sigma_min / sqrt(#blocks)
        of it, and its weighted norm is at least that over sqrt(n_i) eta. Below
        half of this bound the torus metric agrees with the metric on R^n.
        """
        eta = float(self.pm.eta)
        nb = len(self.pm.blocks)
        return min((self.sigma_min / (math.sqrt(nb * b.size) * eta)) ** float(b.gamma)
                   for b in self.pm.blocks)

    def J_np(self) -> np.ndarray:
        """Block-diagonal Jordan matrix assembled blockwise (no cross-block rounding)."""
        J = np.zeros((self.n, self.n))
        for b, sl in zip(self.pm.blocks, self.pm.slices()):
            M = b.block.matrix()
            J[sl, sl] = [[float(M[i, j]) for j in range(M.cols)] for i in range(M.rows)]
        return J

    def _min_over(self, D: np.ndarray, ranges, budget: int = 1 << 22) -> np.ndarray:
        K = np.array(list(itertools.product(*ranges)), dtype=float)
        step = max(1, budget // (len(K) * self.n))
        out = np.empty(len(D))
        for s in range(0, len(D), step):
            Z = (D[s:s + step, None, :] + K[None, :, :]) @ self.T_np.T
            out[s:s + step] = self.pm.dist_np(Z).min(axis=1)
        return out


def torus_sample(tm: TorusMetric, X: np.ndarray, **kw):
    """MetricSample of lattice-coordinate rows X in [0,1)^n under the torus metric.

    Net construction only evaluates the metric on candidate neighbours. A
    point within eps has every block component of its nearest translate
    inside a Euclidean ball of radius sqrt(n_i) eta eps**(1/gamma_i), so a
    Chebyshev query on block-rescaled embedded coordinates (including the
    neighbouring lattice copies) finds all of them.
    """
    from .estimators import MetricSample

    X = np.asarray(X, dtype=float)
    n = tm.n
    reach = 2 if n <= 3 else 1
    shifts = np.array(list(itertools.product(range(-reach, reach + 1), repeat=n)), dtype=float)
    copies = (X[None, :, :] + shifts[:, None, :]).reshape(-1, n)
    owner = np.tile(np.arange(len(X)), len(shifts))
    Y = copies @ tm.T_np.T
    cache: dict = {}

    def candidates(i, eps):
        w = tm.block_widths(eps)
        # the copies contain the nearest translate while its lattice offset stays below reach - 1/2
        if np.linalg.norm(w) / tm.sigma_min >= reach - 0.5:
            return np.arange(len(X))
        if cache.get("eps") != eps:
            cache.clear()
            cache.update(eps=eps, tree=cKDTree(Y / w))
        y = (X[i] @ tm.T_np.T) / w
        hits = cache["tree"].query_ball_point(y, 1 + 1e-9, p=np.inf)
        return np.unique(owner[np.asarray(hits, dtype=np.int64)])

    return MetricSample(X, lambda a, b: tm.dist_many(a - b), candidates=candidates,
                        capped=lambda a, b, cap: tm.dist_many(a - b, cap), **kw)


def build_torus_metric(rjf: RealJordanForm, eta, precision: int = METRIC_PRECISION,
                       enum_radius: int = 2) -> TorusMetric:
    """Metric on R^n / T Z^n; the lattice basis is T itself."""
    return TorusMetric(build_product_metric(rjf, eta, precision), rjf.T, enum_radius)


def torus_dist(tm: TorusMetric, x: TorusPoint, y: TorusPoint) -> mpmath.mpf:
    """Minimum of the product metric over lattice translates, certified global."""
    if len(x.coords) != tm.n or len(y.coords) != tm.n:
        raise DimensionMismatch(f"expected points of dimension {tm.n}")
    pm = tm.pm
    delta = [_frac_centered(a - b) for a, b in zip(x.canonical.coords, y.canonical.coords)]
    with mp.workprec(pm.precision):
        T = tm.T
        zero = [0] * tm.n
        best = None
        seen = set()
        reach = [tm.enum_radius] * tm.n
        while True:
            for k in itertools.product(*(range(-r, r + 1) for r in reach)):
                if k in seen:
                    continue
                seen.add(k)
                c = mp.matrix([mpmath.mpf(d.numerator) / d.denominator + kk
                               for d, kk in zip(delta, k)])
                z = T * c
                v = product_dist(pm, [z[i] for i in range(tm.n)], zero)
                if best is None or v < best:
                    best = v
            K = tm.translate_ranges([float(best) * (1 + 1e-12)], check=False)[0]
            if all(k <= r for k, r in zip(K, reach)):
                return best
            reach = [max(min(int(k), 2 * r), r) for k, r in zip(K, reach)]
            if max(reach) > tm.max_radius:
                raise EnumerationInsufficient(
                    f"lattice enumeration needs |k| up to {max(reach)} > max_radius {tm.max_radius}")


def conjugate_dist(tm: TorusMetric, x: TorusPoint, y: TorusPoint) -> mpmath.mpf:
    """Metric on R^n / Z^n making psi(x) = T x an isometry onto (R^n / T Z^n, d_g).

    With points stored by lattice coordinates, psi(x) has the same
    coordinates as x, so this is torus_dist evaluated on the psi-images.
    """
    return torus_dist(tm, psi(x), psi(y))


def psi(x: TorusPoint) -> TorusPoint:
    """R^n/Z^n -> R^n/T Z^n, y = T x; identity in lattice coordinates."""
    return x.canonical


def embed(tm: TorusMetric, x: TorusPoint) -> np.ndarray:
    """Canonical representative of psi(x) as a vector of R^n."""
    return tm.T_np @ x.to_numpy()
