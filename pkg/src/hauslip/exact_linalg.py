"""Exact and certified linear algebra for integer matrices.

The characteristic polynomial is computed in exact integer arithmetic.
Eigenvalues are located with mpmath on the square-free factors of that
polynomial, so every root handed to the numerics is simple and comes with
an a-posteriori error radius. The real Jordan form is assembled from Jordan
chains found by singular-value rank decisions at high precision and is then
checked by its residual.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np
import sympy
from mpmath import mp

from .errors import ClassificationAmbiguous, DecompositionUnverified, InputError

DEFAULT_PRECISION = 256
MAX_PRECISION = 4096
CLASSIFY_TOL = 1e-9
VERIFY_TOL = 1e-30


# --------------------------------------------------------------------------
# integer matrices and characteristic polynomials
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegerMatrix:
    entries: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.entries)
        if n == 0 or any(len(row) != n for row in self.entries):
            raise InputError("matrix must be square and non-empty")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "IntegerMatrix":
        out = []
        for row in rows:
            r = []
            for v in row:
                if isinstance(v, bool) or not float(v).is_integer():
                    raise InputError(f"non-integer matrix entry {v!r}")
                r.append(int(v))
            out.append(tuple(r))
        return cls(tuple(out))

    @classmethod
    def identity(cls, n: int) -> "IntegerMatrix":
        return cls(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.entries)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __matmul__(self, other: "IntegerMatrix") -> "IntegerMatrix":
        n = self.n
        cols = list(zip(*other.entries))
        return IntegerMatrix(tuple(
            tuple(sum(a * b for a, b in zip(self.entries[i], cols[j])) for j in range(n))
            for i in range(n)))

    def __add__(self, other: "IntegerMatrix") -> "IntegerMatrix":
        return IntegerMatrix(tuple(tuple(a + b for a, b in zip(r, s))
                                   for r, s in zip(self.entries, other.entries)))

    def scale(self, c: int) -> "IntegerMatrix":
        return IntegerMatrix(tuple(tuple(c * a for a in r) for r in self.entries))

    def __pow__(self, k: int) -> "IntegerMatrix":
        out = IntegerMatrix.identity(self.n)
        base = self
        while k:
            if k & 1:
                out = out @ base
            base = base @ base
            k >>= 1
        return out

    def trace(self) -> int:
        return sum(self.entries[i][i] for i in range(self.n))

    def is_zero(self) -> bool:
        return all(v == 0 for row in self.entries for v in row)

    def to_list(self) -> list[list[int]]:
        return [list(r) for r in self.entries]

    def to_numpy(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)

    def to_mp(self) -> mpmath.matrix:
        return mp.matrix([list(r) for r in self.entries])


@dataclass(frozen=True)
class CharPoly:
    """Monic integer polynomial, coefficients from the leading term down."""

    coeffs: tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, t):
        acc = 0
        for c in self.coeffs:
            acc = acc * t + c
        return acc

    def at_matrix(self, A: IntegerMatrix) -> IntegerMatrix:
        """Horner evaluation p(A), exact."""
        n = A.n
        acc = IntegerMatrix(tuple(tuple(0 for _ in range(n)) for _ in range(n)))
        eye = IntegerMatrix.identity(n)
        for c in self.coeffs:
            acc = acc @ A + eye.scale(c)
        return acc

    def __str__(self):
        terms = []
        d = self.degree
        for k, c in enumerate(self.coeffs):
            p = d - k
            if c == 0:
                continue
            mono = "" if p == 0 else ("t" if p == 1 else f"t^{p}")
            mag = abs(c)
            body = (str(mag) if (mag != 1 or p == 0) else "") + mono
            terms.append(("-" if c < 0 else "+") + " " + body)
        s = " ".join(terms)
        return s[2:] if s.startswith("+ ") else s


def char_poly(A: IntegerMatrix) -> CharPoly:
    """det(tI - A) by Faddeev-LeVerrier in exact integer arithmetic."""
    n = A.n
    eye = IntegerMatrix.identity(n)
    M = eye
    coeffs = [1]
    for k in range(1, n + 1):
        AM = A @ M
        c, rem = divmod(-AM.trace(), k)
        assert rem == 0, "Faddeev-LeVerrier division must be exact over the integers"
        coeffs.append(c)
        M = AM + eye.scale(c)
    return CharPoly(tuple(coeffs))


# --------------------------------------------------------------------------
# spectrum
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Eigenvalue:
    kind: str                 # "real" | "complex"; complex pairs stored once, im > 0
    re: mpmath.mpf
    im: mpmath.mpf
    multiplicity: int
    modulus: mpmath.mpf
    stability: str            # "stable" | "neutral" | "unstable"
    radius: mpmath.mpf

    @property
    def dim(self) -> int:
        return self.multiplicity * (2 if self.kind == "complex" else 1)

    def to_json(self) -> dict:
        d = {"kind": self.kind, "multiplicity": self.multiplicity,
             "modulus": mp_str(self.modulus), "class": self.stability,
             "error_radius": mpmath.nstr(self.radius, 5)}
        if self.kind == "real":
            d["value"] = mp_str(self.re)
        else:
            d["value"] = [mp_str(self.re), mp_str(self.im)]
        return d


@dataclass(frozen=True)
class Spectrum:
    items: tuple[Eigenvalue, ...]
    precision: int
    tol: float

    @property
    def n(self) -> int:
        return sum(e.dim for e in self.items)

    def unstable(self) -> list[Eigenvalue]:
        return [e for e in self.items if e.stability == "unstable"]

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self.items]


def mp_str(x, digits: int = 30) -> str:
    return mpmath.nstr(mpmath.mpf(x), digits, min_fixed=-mpmath.inf, max_fixed=mpmath.inf)


class _NeedMorePrecision(Exception):
    pass


def _classify(modulus, radius, tol):
    gap = abs(modulus - 1)
    if radius >= tol or abs(gap - tol) <= radius:
        raise _NeedMorePrecision
    if gap <= tol:
        return "neutral"
    return "unstable" if modulus > 1 else "stable"


def _roots_of_squarefree(q: list[int], nreal: int, prec: int):
    deg = len(q) - 1
    dq = [c * (deg - k) for k, c in enumerate(q[:-1])]
    try:
        roots = mp.polyroots(q, maxsteps=200 + 20 * deg, extraprec=prec)
    except mpmath.libmp.NoConvergence as exc:
        raise _NeedMorePrecision from exc
    if not isinstance(roots, (list, tuple)):
        roots = [roots]
    out = []
    for z in roots:
        z = mpmath.mpc(z)
        dz = mp.polyval(dq, z)
        if dz == 0:
            raise _NeedMorePrecision
        # a root of a degree-d polynomial lies within d*|q/q'| of any point
        radius = deg * abs(mp.polyval(q, z)) / abs(dz)
        out.append((z, radius))
    out.sort(key=lambda zr: abs(zr[0].imag))
    real = [(mpmath.mpf(z.real), r) for z, r in out[:nreal]]
    cplx = [(z, r) for z, r in out[nreal:] if z.imag > 0]
    if 2 * len(cplx) != deg - nreal:
        raise _NeedMorePrecision
    return real, cplx


def _eigenvalues_at(p: CharPoly, prec: int, tol: float) -> Spectrum:
    t = sympy.Symbol("t")
    _, factors = sympy.Poly(list(p.coeffs), t, domain="ZZ").sqf_list()
    items = []
    with mp.workprec(prec):
        for factor, mult in factors:
            q = [int(c) for c in factor.all_coeffs()]
            if len(q) == 1:
                continue
            real, cplx = _roots_of_squarefree(q, factor.count_roots(), prec)
            for x, r in real:
                m = abs(x)
                items.append(Eigenvalue("real", x, mpmath.mpf(0), mult, m,
                                        _classify(m, r, tol), r))
            for z, r in cplx:
                m = abs(z)
                items.append(Eigenvalue("complex", mpmath.mpf(z.real), mpmath.mpf(z.imag),
                                        mult, m, _classify(m, r, tol), r))
    items.sort(key=lambda e: (-e.modulus, -e.dim, -e.re))
    sp = Spectrum(tuple(items), prec, tol)
    assert sp.n == p.degree
    return sp


def eigenvalues(p: CharPoly, precision: int = DEFAULT_PRECISION, tol: float = CLASSIFY_TOL,
                max_precision: int = MAX_PRECISION) -> Spectrum:
    """Certified roots of ``p`` with modulus classification against 1.

    Precision is doubled while some root is too close to a classification
    boundary, up to ``max_precision`` bits.
    """
    prec = precision
    while prec <= max_precision:
        try:
            return _eigenvalues_at(p, prec, tol)
        except _NeedMorePrecision:
            prec *= 2
    raise ClassificationAmbiguous(
        f"eigenvalue classification against 1 (tol={tol}) not certified at {max_precision} bits")


def entropy(s: Spectrum) -> mpmath.mpf:
    """Topological entropy of the toral map: sum of n_i log|lambda_i| over unstable eigenvalues."""
    with mp.workprec(s.precision):
        return mpmath.fsum(e.dim * mpmath.log(e.modulus) for e in s.items
                           if e.stability == "unstable") + mpmath.mpf(0)


# --------------------------------------------------------------------------
# real Jordan form
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class JordanBlock:
    kind: str           # "real" | "complex"
    re: mpmath.mpf
    im: mpmath.mpf
    size: int           # n_i; even for complex blocks
    modulus: mpmath.mpf
    stability: str

    def matrix(self) -> mpmath.matrix:
        J = mp.matrix(self.size, self.size)
        if self.kind == "real":
            for t in range(self.size):
                J[t, t] = self.re
                if t + 1 < self.size:
                    J[t, t + 1] = 1
        else:
            for t in range(0, self.size, 2):
                J[t, t] = J[t + 1, t + 1] = self.re
                J[t, t + 1] = -self.im
                J[t + 1, t] = self.im
                if t + 2 < self.size:
                    J[t, t + 2] = J[t + 1, t + 3] = 1
        return J

    def to_json(self) -> dict:
        d = {"kind": self.kind, "size": self.size, "modulus": mp_str(self.modulus),
             "class": self.stability}
        d["value"] = mp_str(self.re) if self.kind == "real" else [mp_str(self.re), mp_str(self.im)]
        return d


@dataclass(frozen=True)
class RealJordanForm:
    blocks: tuple[JordanBlock, ...]
    J: mpmath.matrix
    T: mpmath.matrix
    Tinv: mpmath.matrix
    residual: mpmath.mpf
    precision: int

    @property
    def n(self) -> int:
        return self.J.rows

    def offsets(self) -> list[int]:
        out, k = [], 0
        for b in self.blocks:
            out.append(k)
            k += b.size
        return out

    def T_numpy(self) -> np.ndarray:
        return _to_numpy(self.T)

    def Tinv_numpy(self) -> np.ndarray:
        return _to_numpy(self.Tinv)

    def J_numpy(self) -> np.ndarray:
        return _to_numpy(self.J)


def _to_numpy(M) -> np.ndarray:
    return np.array([[float(M[i, j]) for j in range(M.cols)] for i in range(M.rows)])


def _block_diag(mats) -> mpmath.matrix:
    n = sum(m.rows for m in mats)
    out = mp.matrix(n, n)
    k = 0
    for m in mats:
        for i in range(m.rows):
            for j in range(m.cols):
                out[k + i, k + j] = m[i, j]
        k += m.rows
    return out


def _hstack(cols, n) -> mpmath.matrix:
    M = mp.matrix(n, len(cols))
    for j, c in enumerate(cols):
        for i in range(n):
            M[i, j] = c[i]
    return M


def _column(M, j):
    return mp.matrix([M[i, j] for i in range(M.rows)])


def _null_space(M, thr):
    n = M.cols
    _, S, V = mp.svd(M, full_matrices=True)
    smax = max([abs(s) for s in S] + [mpmath.mpf(1)])
    rank = sum(1 for s in S if abs(s) > thr * smax)
    return [V[i, :].H for i in range(rank, n)]


def _orthonormal(cols, n, thr):
    if not cols:
        return []
    U, S, _ = mp.svd(_hstack(cols, n), full_matrices=False)
    smax = max(abs(s) for s in S)
    return [_column(U, j) for j in range(len(S)) if abs(S[j]) > thr * max(smax, 1)]


def _max_abs(M) -> mpmath.mpf:
    return max(abs(M[i, j]) for i in range(M.rows) for j in range(M.cols))


def _jordan_chains(A, lam, mult, thr):
    """Jordan chains of A for eigenvalue ``lam``, longest first.

    Each chain is [B^{k-1}v, ..., Bv, v] with B = A - lam I.
    """
    n = A.rows
    B = A - lam * mp.eye(n)
    kernels = [[]]
    P = mp.eye(n)
    while len(kernels[-1]) < mult:
        if len(kernels) > mult:
            raise _NeedMorePrecision
        P = B * P
        kernels.append(_null_space(P, thr))
    if len(kernels[-1]) != mult:
        raise _NeedMorePrecision
    p = len(kernels) - 1
    dims = [len(k) for k in kernels] + [mult]
    heads = []
    for k in range(p, 0, -1):
        exact = (dims[k] - dims[k - 1]) - (dims[k + 1] - dims[k])
        if exact < 0:
            raise _NeedMorePrecision
        if exact == 0:
            continue
        inherited = []
        for v, size in heads:
            w = v
            for _ in range(size - k):
                w = B * w
            inherited.append(w)
        Q = _orthonormal(kernels[k - 1] + inherited, n, thr)
        resid = []
        for x in kernels[k]:
            r = x
            for q in Q:
                r = r - q * (q.H * x)[0]
            resid.append(r)
        U = _orthonormal(resid, n, thr)
        if len(U) < exact:
            raise _NeedMorePrecision
        heads.extend((u, k) for u in U[:exact])
    chains = []
    for v, size in heads:
        chain = [v]
        for _ in range(size - 1):
            chain.append(B * chain[-1])
        chains.append(chain[::-1])
    return chains


def _real_jordan_at(A: IntegerMatrix, sp: Spectrum, prec: int, tol: float) -> RealJordanForm:
    n = A.n
    with mp.workprec(prec):
        Am = A.to_mp()
        thr = mpmath.mpf(2) ** (-prec // 3)
        pieces = []
        for e in sp.items:
            lam = e.re if e.kind == "real" else mpmath.mpc(e.re, e.im)
            for chain in _jordan_chains(Am, lam, e.multiplicity, thr):
                if e.kind == "real":
                    cols = [mp.matrix([mpmath.re(x) for x in c]) for c in chain]
                else:
                    cols = []
                    for c in chain:
                        cols.append(mp.matrix([mpmath.re(x) for x in c]))
                        cols.append(mp.matrix([-mpmath.im(x) for x in c]))
                blk = JordanBlock(e.kind, e.re, e.im, len(cols), e.modulus, e.stability)
                pieces.append((blk, cols))
        pieces.sort(key=lambda bc: (-bc[0].modulus, -bc[0].size, -bc[0].re))
        blocks = tuple(b for b, _ in pieces)
        P = _hstack([c for _, cols in pieces for c in cols], n)
        try:
            T = mp.inverse(P)
        except ZeroDivisionError as exc:
            raise _NeedMorePrecision from exc
        return _verified(Am, blocks, T, P, prec, tol)


def _verified(Am, blocks, T, Tinv, prec, tol) -> RealJordanForm:
    n = Am.rows
    J = _block_diag([b.matrix() for b in blocks])
    residual = _max_abs(T * Am * Tinv - J)
    inv_err = _max_abs(T * Tinv - mp.eye(n))
    if residual > tol or inv_err > tol:
        raise _NeedMorePrecision(residual)
    return RealJordanForm(blocks, J, T, Tinv, residual, prec)


def real_jordan(A: IntegerMatrix, precision: int = DEFAULT_PRECISION, tol: float = VERIFY_TOL,
                spectrum: Spectrum | None = None,
                max_precision: int = MAX_PRECISION) -> RealJordanForm:
    """Real Jordan form J = T A T^-1, blocks ordered by descending modulus, size, real part."""
    sp = spectrum if spectrum is not None else eigenvalues(char_poly(A), precision)
    prec = max(precision, sp.precision)
    while prec <= max_precision:
        try:
            if sp.precision < prec:
                sp = eigenvalues(char_poly(A), prec, sp.tol)
            return _real_jordan_at(A, sp, prec, tol)
        except _NeedMorePrecision:
            prec *= 2
    raise DecompositionUnverified(
        f"real Jordan decomposition residual exceeds {tol} up to {max_precision} bits; "
        "supply a jordan_override")


def jordan_from_override(A: IntegerMatrix, data: dict, precision: int = DEFAULT_PRECISION,
                         tol: float = 1e-12) -> RealJordanForm:
    """Accept a user-supplied (blocks, T) pair after checking its residual.

    ``data`` = {"blocks": [{"kind", "value", "size"}], "T": [[str, ...], ...]}
    with numbers given as decimal strings.
    """
    with mp.workprec(precision):
        blocks = []
        for b in data["blocks"]:
            kind = b["kind"]
            if kind == "real":
                re, im = mpmath.mpf(b["value"]), mpmath.mpf(0)
            else:
                re, im = (mpmath.mpf(v) for v in b["value"])
                im = abs(im)
            size = int(b["size"])
            if kind == "complex" and size % 2:
                raise InputError("complex Jordan blocks must have even size")
            modulus = mpmath.sqrt(re * re + im * im)
            gap = abs(modulus - 1)
            stability = "neutral" if gap <= CLASSIFY_TOL else ("unstable" if modulus > 1 else "stable")
            blocks.append(JordanBlock(kind, re, im, size, modulus, stability))
        T = mp.matrix([[mpmath.mpf(v) for v in row] for row in data["T"]])
        if T.rows != A.n or sum(b.size for b in blocks) != A.n:
            raise InputError("jordan_override dimensions do not match the matrix")
        Tinv = mp.inverse(T)
        try:
            return _verified(A.to_mp(), tuple(blocks), T, Tinv, precision, tol)
        except _NeedMorePrecision as exc:
            raise DecompositionUnverified(
                f"jordan_override residual {mpmath.nstr(exc.args[0], 5)} exceeds {tol}") from None
