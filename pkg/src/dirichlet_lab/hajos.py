"""Triangular bases for critical lattices and cube-tiling checks.

A unimodular lattice is critical when its shortest nonzero vector has
sup norm exactly 1 (the closed unit cube packs but nothing smaller).
Every critical lattice admits a basis of the form w u w^-1 with w a
coordinate permutation and u unit upper triangular, off-diagonal entries
reducible into (-1/2, 1/2]; equivalently, translates of the centered
unit cube by the lattice tile space.  ``decompose_critical`` recovers
such a basis with an exact integer change of basis and reports a float
residual certificate; ``tiling_check`` probes the tiling statement
directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations, product

import numpy as np

from .errors import NegativeR, ToleranceTooLoose
from .lattice import LatticeBasis, in_K_r, shortest_sup_vector
from .rng import worker_rng

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class HajosDecomposition:
    """Certified triangular form B Gamma w^-1... = w u w^-1 of a critical basis.

    ``permutation`` maps triangular coordinates to original ones (the
    permutation matrix w has w[permutation[j], j] = 1); ``u`` is unit
    upper triangular with off-diagonal entries in (-1/2, 1/2]; ``gamma``
    is the exact integer unimodular change of basis with
    basis @ gamma = w @ u @ w^-1 up to ``residual`` in sup norm.
    """

    permutation: tuple[int, ...]
    u: np.ndarray
    gamma: np.ndarray
    residual: float

    @property
    def w_matrix(self) -> np.ndarray:
        d = len(self.permutation)
        w = np.zeros((d, d))
        for j, i in enumerate(self.permutation):
            w[i, j] = 1.0
        return w

    @property
    def basis_matrix(self) -> np.ndarray:
        w = self.w_matrix
        return w @ self.u @ w.T


def _extended_gcd(a: int, b: int) -> tuple[int, int, int]:
    """(g, x, y) with x*a + y*b = g = gcd(a, b) >= 0."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_x, x = x, old_x - q * x
        old_y, y = y, old_y - q * y
    if old_r < 0:
        old_r, old_x, old_y = -old_r, -old_x, -old_y
    return old_r, old_x, old_y


def _complete_primitive(gamma: list[int]) -> list[list[int]] | None:
    """Integer unimodular matrix whose first column is gamma (exact
    arithmetic); None unless the entries are coprime."""
    d = len(gamma)
    vec = list(gamma)
    comp = [[1 if i == j else 0 for j in range(d)] for i in range(d)]
    for i in range(1, d):
        a, b = vec[0], vec[i]
        if b == 0:
            continue
        g, x, y = _extended_gcd(a, b)
        # row op U on (0, i) sends (a, b) -> (g, 0); apply its inverse as a
        # column op to comp so that comp @ U stays the identity product
        au, bu = a // g, b // g
        for row in comp:
            c0, ci = row[0], row[i]
            row[0] = au * c0 + bu * ci
            row[i] = -y * c0 + x * ci
        vec[0], vec[i] = g, 0
    if abs(vec[0]) != 1:
        return None
    if vec[0] == -1:
        for row in comp:
            row[0] = -row[0]
    return comp


def _triangular_gamma(M: np.ndarray, tol: float) -> np.ndarray | None:
    """Exact integer unimodular Gamma with M @ Gamma unit upper triangular
    (within tol), or None; recursion never permutes coordinates."""
    d = M.shape[0]
    try:
        m1 = np.linalg.solve(M, np.eye(d)[:, 0])
    except np.linalg.LinAlgError:
        return None
    g1 = np.round(m1)
    if np.max(np.abs(m1 - g1)) >= tol:
        return None
    if np.max(np.abs(M @ g1 - np.eye(d)[:, 0])) >= tol:
        return None
    ints = [int(v) for v in g1]
    if all(v == 0 for v in ints):
        return None
    comp = _complete_primitive(ints)
    if comp is None:
        return None
    gamma1 = np.array(comp, dtype=float)
    if d == 1:
        return gamma1
    v = M @ gamma1
    sub = _triangular_gamma(v[1:, 1:], tol)
    if sub is None:
        return None
    total = np.eye(d)
    total[1:, 1:] = sub
    return gamma1 @ total


def decompose_critical(
    L: LatticeBasis, tol: float = DEFAULT_TOL
) -> HajosDecomposition | None:
    """Search for a permutation w and unit upper triangular u with
    w u w^-1 a basis of L; returns None when no permutation admits the
    triangular recursion (in exact arithmetic this happens exactly when
    the lattice is not critical).

    All d! permutations are tried at the top level only; within a fixed
    permutation the recursion peels off one exact standard basis vector
    per level, completing it to an integer unimodular change of basis by
    extended-gcd column operations, then reduces the off-diagonal entries
    of u into (-1/2, 1/2].
    """
    if tol > 1e-3:
        raise ToleranceTooLoose(
            f"tolerance {tol!r} would accept spurious decompositions (max 1e-3)"
        )
    b = L.matrix
    d = L.dim
    for perm in permutations(range(d)):
        # w e_j = e_perm[j]; M = w^-1 B permutes rows back
        m = b[list(perm), :]
        gamma = _triangular_gamma(m, tol)
        if gamma is None:
            continue
        v = m @ gamma
        # reduce off-diagonal entries into (-1/2, 1/2] by unit column ops
        for j in range(1, d):
            for i in range(j - 1, -1, -1):
                k = math.ceil(v[i, j] - 0.5)
                if k:
                    v[:, j] -= k * v[:, i]
                    gamma[:, j] -= k * gamma[:, i]
        w = np.zeros((d, d))
        for j, i in enumerate(perm):
            w[i, j] = 1.0
        target = w @ v @ w.T
        c = np.linalg.solve(b, target)
        gamma_final = np.round(c)
        residual = max(
            float(np.max(np.abs(c - gamma_final))),
            float(np.max(np.abs(b @ gamma_final - target))),
        )
        if residual < 10.0 * tol:
            return HajosDecomposition(
                permutation=tuple(perm),
                u=v,
                gamma=gamma_final.astype(np.int64),
                residual=residual,
            )
    return None


def random_critical_basis(
    d: int, rng: np.random.Generator
) -> tuple[LatticeBasis, tuple[int, ...], np.ndarray]:
    """Random critical lattice w u w^-1 together with the (w, u) used;
    every unit triangular u yields shortest sup norm exactly 1."""
    perm = tuple(rng.permutation(d).tolist())
    u = np.eye(d)
    for j in range(1, d):
        for i in range(j):
            # entries in (-1/2, 1/2]
            u[i, j] = 0.5 - rng.random()
    w = np.zeros((d, d))
    for j, i in enumerate(perm):
        w[i, j] = 1.0
    return LatticeBasis(w @ u @ w.T), perm, u


@dataclass(frozen=True)
class TilingReport:
    """Empirical check that lattice translates of the centered unit cube
    tile: membership of the lattice in the target region, the shortest
    sup length, and the fraction of random probe points within sup
    distance 1/2 of the lattice."""

    region_member: bool
    shortest_length: float
    covered_fraction: float
    n_probes: int


def tiling_check(
    L: LatticeBasis,
    r: float = 0.0,
    probe_count: int = 20_000,
    rng_seed: int = 0,
) -> TilingReport:
    """For r > 0, region membership defers verbatim to the K_r test
    (shortest length >= 1 - r); at r = 0 it asks for criticality up to
    1e-12.  The covering probe rounds each random point to the nearest
    lattice coordinates and scans the 3^d surrounding cells."""
    if r < 0:
        raise NegativeR(f"radius must be nonnegative, got {r!r}")
    _, length = shortest_sup_vector(L)
    if r > 0:
        member = in_K_r(L, r)
    else:
        member = length >= 1.0 - 1e-12
    d = L.dim
    rng = worker_rng(rng_seed, 0)
    y = rng.random((probe_count, d))
    coeffs = np.round(np.linalg.solve(L.matrix, y.T).T)
    best = np.full(probe_count, np.inf)
    for z in product((-1.0, 0.0, 1.0), repeat=d):
        pts = (coeffs + np.asarray(z)) @ L.matrix.T
        np.minimum(best, np.max(np.abs(y - pts), axis=1), out=best)
    covered = float(np.mean(best < 0.5))
    return TilingReport(
        region_member=member,
        shortest_length=float(length),
        covered_fraction=covered,
        n_probes=probe_count,
    )
