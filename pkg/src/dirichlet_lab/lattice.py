"""Unimodular lattices and the sup-norm shortest-vector machinery.

A lattice is represented by a basis matrix whose *columns* generate it.  The
central quantity is

    delta(L) = -log(min over nonzero v in L of the sup-norm of v),

which is nonnegative for every unimodular lattice (the open unit cube has
volume 2^d, so by Minkowski it always contains a nonzero lattice point of
sup-norm <= 1).  Membership in the cube-avoiding sets K_r and in their flow
thickenings is decided here as well.

The shortest vector is found by Euclidean LLL reduction followed by an
exhaustive enumeration of integer coefficient vectors inside the ball induced
by the l2 bound ``||v||_inf <= ||v||_2``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DimensionTooLarge,
    NonUnimodular,
    NumericallyDegenerate,
    ROutOfRange,
    WeightDimensionMismatch,
)

DET_TOL = 1e-9           # unimodularity tolerance |det - 1|
BOUNDARY_TOL = 1e-12     # open-cube boundary comparisons
MAX_DIM = 8
LLL_DELTA = 0.99
LLL_MAX_SWEEPS = 10_000


# ---------------------------------------------------------------------------
# basic types
# ---------------------------------------------------------------------------

def _as_square(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


@dataclass(frozen=True)
class LatticeBasis:
    """Column basis of a unimodular lattice in R^d.

    The matrix is copied and frozen on construction; all operations return new
    instances, so values can be shared freely between workers.
    """

    matrix: np.ndarray
    det_tol: float = DET_TOL

    def __post_init__(self):
        a = _as_square(self.matrix).copy()
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        det = float(np.linalg.det(a))
        if abs(det - 1.0) > self.det_tol:
            raise NonUnimodular(
                f"basis determinant {det!r} differs from 1 by more than {self.det_tol}"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    @classmethod
    def identity(cls, d: int) -> "LatticeBasis":
        return cls(np.eye(d))

    @classmethod
    def renormalized(cls, matrix, det_tol: float = DET_TOL) -> "LatticeBasis":
        """Explicit repair: scale a near-unimodular matrix to determinant one.

        Never applied silently, and refuses orientation-reversing input.
        """
        a = _as_square(matrix)
        det = float(np.linalg.det(a))
        if det <= 0:
            raise NonUnimodular(f"cannot renormalize matrix with determinant {det!r}")
        return cls(a / det ** (1.0 / a.shape[0]), det_tol=det_tol)

    def same_lattice(self, other: "LatticeBasis", tol: float = 1e-6) -> bool:
        """True iff both bases generate the same lattice.

        Criterion: ``self^-1 @ other`` is an integer matrix of determinant +-1.
        """
        change = np.linalg.solve(self.matrix, other.matrix)
        if np.max(np.abs(change - np.round(change))) > tol:
            return False
        return abs(abs(round(float(np.linalg.det(np.round(change))))) - 1) == 0

    def transformed(self, gamma) -> "LatticeBasis":
        """Change of basis by an integral matrix of determinant +-1."""
        g = np.asarray(gamma)
        det = round(float(np.linalg.det(g)))
        if abs(det) != 1 or np.max(np.abs(g - np.round(g))) > 0:
            raise ValueError("gamma must be integral with determinant +-1")
        mat = self.matrix @ g
        if det == -1:  # keep orientation so the det==1 invariant survives
            mat = mat.copy()
            mat[:, 0] = -mat[:, 0]
        return LatticeBasis(mat, det_tol=self.det_tol)

    # -- serialization (JSON rows, row-major, full precision) ---------------

    def to_rows(self) -> list[list[float]]:
        return [[float(x) for x in row] for row in self.matrix]

    def to_json(self) -> str:
        return json.dumps(self.to_rows())

    @classmethod
    def from_rows(cls, rows, det_tol: float = DET_TOL) -> "LatticeBasis":
        return cls(np.array(rows, dtype=float), det_tol=det_tol)

    @classmethod
    def from_json(cls, text: str, det_tol: float = DET_TOL) -> "LatticeBasis":
        return cls.from_rows(json.loads(text), det_tol=det_tol)


@dataclass(frozen=True)
class WeightPair:
    """Expanding weights alpha (m entries) and contracting weights beta (n entries).

    Each vector has positive entries summing to one; the derived thresholds
    omega1 = max and omega2 = min of {m*alpha_i, n*beta_j} collapse to 1 for
    equal weights.
    """

    alpha: tuple[float, ...]
    beta: tuple[float, ...]

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        beta = tuple(float(b) for b in self.beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        if not alpha or not beta:
            raise WeightDimensionMismatch("both weight vectors must be nonempty")
        for v, name in ((alpha, "alpha"), (beta, "beta")):
            if min(v) <= 0:
                raise ValueError(f"{name} entries must be positive")
            if abs(sum(v) - 1.0) > 1e-12:
                raise ValueError(f"{name} entries must sum to 1 (got {sum(v)!r})")

    @classmethod
    def equal(cls, m: int, n: int) -> "WeightPair":
        return cls((1.0 / m,) * m, (1.0 / n,) * n)

    @property
    def m(self) -> int:
        return len(self.alpha)

    @property
    def n(self) -> int:
        return len(self.beta)

    @property
    def dim(self) -> int:
        return self.m + self.n

    @property
    def exponents(self) -> np.ndarray:
        """Diagonal exponents of the one-parameter flow: alpha then -beta."""
        return np.concatenate([np.asarray(self.alpha), -np.asarray(self.beta)])

    @property
    def omega1(self) -> float:
        return max(max(self.m * a for a in self.alpha), max(self.n * b for b in self.beta))

    @property
    def omega2(self) -> float:
        return min(min(self.m * a for a in self.alpha), min(self.n * b for b in self.beta))

    @property
    def max_weight(self) -> float:
        """Lipschitz constant of s -> delta(g_s L); always <= 1."""
        return max(max(self.alpha), max(self.beta))


def flow_matrix(w: WeightPair, s: float) -> np.ndarray:
    return np.diag(np.exp(w.exponents * s))


def apply_flow(L: LatticeBasis, w: WeightPair, s: float) -> LatticeBasis:
    """Image of L under the diagonal flow diag(e^{alpha_i s}, e^{-beta_j s})."""
    if w.dim != L.dim:
        raise WeightDimensionMismatch(
            f"weights describe dimension {w.dim}, lattice has dimension {L.dim}"
        )
    scales = np.exp(w.exponents * s)
    return LatticeBasis(scales[:, None] * L.matrix, det_tol=max(L.det_tol, 1e-8))


# ---------------------------------------------------------------------------
# LLL reduction and sup-norm SVP
# ---------------------------------------------------------------------------

def lll_reduce(basis: np.ndarray, delta: float = LLL_DELTA) -> np.ndarray:
    """Floating-point LLL on column vectors; returns a reduced column basis.

    Plain textbook schoolbook variant with eager size reduction; plenty for
    d <= 8 and conditioning near the unimodular group.
    """
    b = _as_square(basis).T.copy()  # rows are basis vectors internally
    d = b.shape[0]
    mu = np.zeros((d, d))
    bstar_sq = np.zeros(d)

    def update_gso():
        bstar = b.astype(float).copy()
        for i in range(d):
            for j in range(i):
                mu[i, j] = np.dot(b[i], bstar[j]) / bstar_sq[j]
                bstar[i] -= mu[i, j] * bstar[j]
            bstar_sq[i] = np.dot(bstar[i], bstar[i])
            if bstar_sq[i] <= 1e-28:
                raise NumericallyDegenerate("Gram-Schmidt norm collapsed during LLL")

    update_gso()
    k = 1
    sweeps = 0
    while k < d:
        sweeps += 1
        if sweeps > LLL_MAX_SWEEPS:
            raise NumericallyDegenerate("LLL failed to converge")
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q != 0:
                b[k] -= q * b[j]
        update_gso()
        if bstar_sq[k] >= (delta - mu[k, k - 1] ** 2) * bstar_sq[k - 1]:
            k += 1
        else:
            b[[k - 1, k]] = b[[k, k - 1]]
            update_gso()
            k = max(k - 1, 1)
    return b.T


def _enumerate_short_coeffs(basis: np.ndarray, radius: float) -> np.ndarray:
    """All integer coefficient vectors m != 0 with ||basis @ m||_2 <= radius.

    Fincke-Pohst walk over the Gram-Schmidt triangularization of the column
    basis.  Only one representative of each +-m pair is returned.
    """
    d = basis.shape[0]
    q, rtri = np.linalg.qr(basis)
    # force positive diagonal so the triangular recursion is stable
    signs = np.sign(np.diag(rtri))
    signs[signs == 0] = 1.0
    rtri = signs[:, None] * rtri

    coeffs = []
    m = np.zeros(d, dtype=int)

    def recurse(level: int, residual_sq: float, center_carry: np.ndarray):
        # center_carry holds sum_{j>level} R[level,j] m_j for each level
        if residual_sq < 0:
            return
        rll = rtri[level, level]
        center = -center_carry[level] / rll
        half = math.sqrt(max(residual_sq, 0.0)) / abs(rll)
        lo = math.ceil(center - half - 1e-12)
        hi = math.floor(center + half + 1e-12)
        for mi in range(lo, hi + 1):
            m[level] = mi
            contrib = (rll * mi + center_carry[level]) ** 2
            if level == 0:
                if contrib <= residual_sq + 1e-12:
                    if any(m):
                        coeffs.append(m.copy())
            else:
                carry = center_carry.copy()
                for j in range(level):
                    carry[j] += rtri[j, level] * mi
                recurse(level - 1, residual_sq - contrib, carry)
        m[level] = 0

    recurse(d - 1, radius * radius, np.zeros(d))
    if not coeffs:
        return np.zeros((0, d), dtype=int)
    arr = np.array(coeffs, dtype=int)
    # canonical sign: first nonzero coefficient positive
    lead = np.argmax(arr != 0, axis=1)
    flip = arr[np.arange(len(arr)), lead] < 0
    arr[flip] = -arr[flip]
    return np.unique(arr, axis=0)


def shortest_sup_vector(L: LatticeBasis) -> tuple[np.ndarray, float]:
    """Nonzero lattice vector of minimal supremum norm, with its norm.

    Returns ``(vector, length)``; ``length <= 1`` always holds for unimodular
    input.  Deterministic: ties are broken by (length, coefficient tuple).
    """
    if L.dim > MAX_DIM:
        raise DimensionTooLarge(f"enumeration supports d <= {MAX_DIM}, got {L.dim}")
    reduced = lll_reduce(L.matrix)
    sup_ub = float(np.min(np.max(np.abs(reduced), axis=0)))
    radius = math.sqrt(L.dim) * sup_ub
    red_coeffs = _enumerate_short_coeffs(reduced, radius)
    if len(red_coeffs) == 0:
        raise NumericallyDegenerate("shortest-vector enumeration returned nothing")
    # transform to exact integer coefficients of the original basis and
    # evaluate lengths against it, so the result does not inherit the
    # rounding of the float-reduced matrix
    u = np.linalg.solve(L.matrix, reduced)
    u_int = np.round(u).astype(np.int64)
    if np.max(np.abs(u - u_int)) > 1e-6 or abs(round(float(np.linalg.det(u_int)))) != 1:
        raise NumericallyDegenerate("reduction transform is not unimodular integral")
    coeffs = red_coeffs @ u_int.T
    lead = np.argmax(coeffs != 0, axis=1)
    flip = coeffs[np.arange(len(coeffs)), lead] < 0
    coeffs[flip] = -coeffs[flip]
    # per-candidate matrix-vector products: batched matmul may round
    # differently from the plain B @ k evaluation the result must match
    fl = coeffs.astype(float)
    lengths = np.empty(len(coeffs))
    for idx in range(len(coeffs)):
        lengths[idx] = np.abs(L.matrix @ fl[idx]).max()
    order = np.lexsort(tuple(coeffs[:, j] for j in range(L.dim - 1, -1, -1)) + (lengths,))
    best = order[0]
    return L.matrix @ fl[best], float(lengths[best])


def delta(L: LatticeBasis) -> float:
    """The log-depth function: -log of the shortest sup-norm length (>= 0)."""
    _, length = shortest_sup_vector(L)
    return max(0.0, -math.log(length))


def in_K_r(L: LatticeBasis, r: float) -> bool:
    """Does L avoid the open cube (r-1, 1-r)^d (no nonzero point inside)?

    The cube is open, so a shortest length of exactly 1-r stays inside K_r;
    numerically the comparison carries a 1e-12 slack on the closed side.
    """
    if not 0.0 < r < 1.0:
        raise ROutOfRange(f"r must lie in (0,1), got {r!r}")
    _, length = shortest_sup_vector(L)
    return length >= (1.0 - r) - BOUNDARY_TOL


class Verdict(Enum):
    YES = "YES"
    NO = "NO"
    UNDECIDED = "UNDECIDED"

    def __bool__(self) -> bool:  # pragma: no cover - convenience only
        if self is Verdict.UNDECIDED:
            raise ValueError("UNDECIDED verdict has no boolean value")
        return self is Verdict.YES


@dataclass(frozen=True)
class ThickenedCertificate:
    verdict: Verdict
    witness_s: float | None = None
    min_margin: float = math.inf   # min over grid of delta(g_s L) - radius(s)
    grid_step: float = 0.0


def _thickened_decision(
    L: LatticeBasis,
    w: WeightPair,
    radius: Callable[[float], float],
    h: float,
    radius_lipschitz: float,
    s_lo: float = 0.0,
    s_hi: float = 1.0,
) -> ThickenedCertificate:
    """Three-valued decision of  exists s in [s_lo, s_hi): delta(g_s L) <= radius(s).

    Grid of step h; between grid points delta moves by at most max_weight*h/2
    and the threshold by radius_lipschitz*h/2, so a uniform margin of
    ``slack = (max_weight + radius_lipschitz) * h`` certifies NO.  A grid point
    with nonpositive margin is an exact witness.  Values in between yield
    UNDECIDED.  Grid points whose margin exceeds the reachable band are skipped
    ahead of, which never changes the three-way outcome.
    """
    slack = (w.max_weight + radius_lipschitz) * h
    lip = w.max_weight + radius_lipschitz
    n_steps = max(1, math.ceil((s_hi - s_lo) / h - 1e-9))
    min_margin = math.inf
    k = 0
    while k < n_steps:
        s = s_lo + k * h
        margin = delta(apply_flow(L, w, s)) - radius(s)
        min_margin = min(min_margin, margin)
        if margin <= 0.0:
            return ThickenedCertificate(Verdict.YES, witness_s=s, min_margin=margin, grid_step=h)
        if margin > slack and lip > 0:
            # cone argument: no grid point within (margin - slack)/lip can dip
            # below the slack line, so jumping over them is sound
            k += 1 + int((margin - slack) / (lip * h))
        else:
            k += 1
    verdict = Verdict.NO if min_margin > slack else Verdict.UNDECIDED
    return ThickenedCertificate(verdict, witness_s=None, min_margin=min_margin, grid_step=h)


def default_thickened_step(r: float) -> float:
    return min(r / 10.0, 1e-3)


def in_thickened(
    L: LatticeBasis, w: WeightPair, r: float, h: float | None = None
) -> ThickenedCertificate:
    """Certified membership of L in the flow thickening of the delta-sublevel set.

    Decides ``exists s in [0,1): delta(g_s L) <= r`` on a step-h grid using the
    Lipschitz bound |delta(g_s L) - delta(g_s' L)| <= max_weight |s - s'|.
    YES comes with an exact witness; NO certifies that every grid value
    exceeds r by more than the reachable band; the remaining sliver is
    UNDECIDED.
    """
    if r <= 0:
        raise ROutOfRange(f"thickening radius must be positive, got {r!r}")
    if h is None:
        h = default_thickened_step(r)
    return _thickened_decision(L, w, lambda s: r, h, radius_lipschitz=0.0)


# ---------------------------------------------------------------------------
# helpers used by tests and experiments
# ---------------------------------------------------------------------------

def random_integral_unimodular(d: int, rng: np.random.Generator, steps: int = 12) -> np.ndarray:
    """Random element of SL_d(Z) built from shear and swap moves (det +1)."""
    g = np.eye(d, dtype=int)
    for _ in range(steps):
        i, j = rng.integers(0, d, size=2)
        if i == j:
            continue
        if rng.random() < 0.85:
            g[:, j] += int(rng.integers(-2, 3)) * g[:, i]
        else:
            g[:, [i, j]] = g[:, [j, i]]
            g[:, i] = -g[:, i]
    return g


def random_unimodular_basis(
    d: int, rng: np.random.Generator, spread: float = 1.0
) -> LatticeBasis:
    """Random determinant-one basis: Gaussian matrix rescaled to det 1."""
    while True:
        a = rng.normal(size=(d, d)) * spread
        det = float(np.linalg.det(a))
        if abs(det) > 1e-3:
            break
    if det < 0:
        a[:, 0] = -a[:, 0]
        det = -det
    return LatticeBasis(a / det ** (1.0 / d))
