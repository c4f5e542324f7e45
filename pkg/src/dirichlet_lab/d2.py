"""Global Haar sampling on the space of two-dimensional unimodular lattices.

The shape of a lattice is a point x + iy of the classical fundamental
domain (|x| <= 1/2, x^2 + y^2 >= 1) carrying the hyperbolic measure
(3/pi) dx dy / y^2, plus a free rotation angle in [0, pi).  Sampling is
exact by rejection: x uniform, y drawn from the 1/y^2 tail above
sqrt(3)/2 by inverse CDF, the circle condition accepted at rate
pi*sqrt(3)/6.  The sup-norm sublevel sweep uses an exact cusp shortcut:
once y exceeds e^(2 r_max) the first basis vector is already shorter
than every swept threshold, so the indicator vanishes without any
enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chart import MeasureEstimate, _candidate_array
from .errors import ROutOfRange
from .lattice import BOUNDARY_TOL, LatticeBasis
from .rng import RunningMoments, worker_rng

ACCEPTANCE_RATE = math.pi * math.sqrt(3.0) / 6.0
_Y_FLOOR = math.sqrt(3.0) / 2.0
DEFAULT_BATCH = 50_000


@dataclass(frozen=True)
class ModularPoint:
    """Fundamental-domain shape (x, y) plus rotation angle theta."""

    x: float
    y: float
    theta: float

    def basis_matrix(self) -> np.ndarray:
        a = 1.0 / math.sqrt(self.y)
        shape = np.array([[a, self.x * a], [0.0, self.y * a]])
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return rot @ shape

    def lattice(self) -> LatticeBasis:
        return LatticeBasis(self.basis_matrix())


def _sample_arrays(rng: np.random.Generator, n: int):
    """Vectorized rejection sampler; returns (x, y, theta) arrays of length n."""
    xs = np.empty(n)
    ys = np.empty(n)
    filled = 0
    while filled < n:
        todo = n - filled
        m = int(todo / ACCEPTANCE_RATE * 1.1) + 16
        x = rng.random(m) - 0.5
        y = _Y_FLOOR / rng.random(m)
        keep = x * x + y * y >= 1.0
        k = min(int(keep.sum()), todo)
        xs[filled : filled + k] = x[keep][:k]
        ys[filled : filled + k] = y[keep][:k]
        filled += k
    thetas = rng.random(n) * math.pi
    return xs, ys, thetas


def sample_X2(rng_seed: int) -> ModularPoint:
    """One exact Haar sample of the modular surface with rotation."""
    rng = worker_rng(rng_seed, 0)
    x, y, t = _sample_arrays(rng, 1)
    return ModularPoint(float(x[0]), float(y[0]), float(t[0]))


def sample_modular_points(n: int, rng_seed: int) -> list[ModularPoint]:
    rng = worker_rng(rng_seed, 0)
    x, y, t = _sample_arrays(rng, n)
    return [ModularPoint(float(a), float(b), float(c)) for a, b, c in zip(x, y, t)]


def _batch_bases(x: np.ndarray, y: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Stack of basis matrices, shape (n, 2, 2)."""
    a = 1.0 / np.sqrt(y)
    c, s = np.cos(theta), np.sin(theta)
    b = np.empty((len(x), 2, 2))
    b[:, 0, 0] = c * a
    b[:, 1, 0] = s * a
    b[:, 0, 1] = a * (c * x - s * y)
    b[:, 1, 1] = a * (s * x + c * y)
    return b


def _capped_lengths(bases: np.ndarray) -> np.ndarray:
    """Shortest sup-norm length per basis, exact wherever it is below 1
    and capped at 1 otherwise.

    Any vector B m with sup norm <= 1 has |m_i| <= l1-norm of row i of
    B^-1; the bound is taken per batch, so one canonical candidate array
    (half of the integer box, first nonzero entry positive) serves all
    samples.
    """
    inv = np.linalg.inv(bases)
    row_bounds = np.abs(inv).sum(axis=2)  # (n, 2)
    m1 = int(math.ceil(row_bounds[:, 0].max() + 1e-12))
    m2 = int(math.ceil(row_bounds[:, 1].max() + 1e-12))
    cands = _candidate_array(2, max(m1, m2)).astype(float)
    keep = (np.abs(cands[:, 0]) <= m1) & (np.abs(cands[:, 1]) <= m2)
    cands = cands[keep]
    best = np.full(len(bases), np.inf)
    for lo in range(0, len(cands), 64):
        chunk = cands[lo : lo + 64]
        vecs = np.einsum("nij,kj->nki", bases, chunk)
        np.minimum(best, np.max(np.abs(vecs), axis=2).min(axis=1), out=best)
    return np.minimum(best, 1.0)


def sweep_sublevel_global(
    rs,
    n_samples: int,
    rng_seed: int,
    batch_size: int = DEFAULT_BATCH,
) -> list[MeasureEstimate]:
    """Monte Carlo measure of the depth sublevel sets {delta <= r} for all
    radii in one shared pass (common random numbers across radii).

    A sample is a hit for radius r when its capped shortest length is at
    least e^-r.  Samples beyond the cusp cut y > e^(2 max r) are counted
    as misses exactly, without enumeration.
    """
    rs = [float(r) for r in rs]
    if not rs or min(rs) <= 0:
        raise ROutOfRange(f"radii must be positive, got {rs!r}")
    thresholds = np.array([math.exp(-r) for r in rs])
    cusp_y = 1.0 / float(np.min(thresholds)) ** 2
    rng = worker_rng(rng_seed, 0)
    moments = [RunningMoments() for _ in rs]
    hits = [0 for _ in rs]
    done = 0
    while done < n_samples:
        n = min(batch_size, n_samples - done)
        x, y, theta = _sample_arrays(rng, n)
        bulk = y <= cusp_y
        lengths = np.zeros(n)
        if bulk.any():
            lengths[bulk] = _capped_lengths(_batch_bases(x[bulk], y[bulk], theta[bulk]))
        for i, thr in enumerate(thresholds):
            ind = (lengths >= thr - BOUNDARY_TOL).astype(float)
            moments[i].add_batch(ind)
            hits[i] += int(ind.sum())
        done += n
    out = []
    for r, mom, nh in zip(rs, moments, hits):
        out.append(
            MeasureEstimate(
                region="sublevel-global(d=2)",
                r=r,
                value=mom.mean,
                std_error=mom.std_error,
                n_samples=mom.count,
                seed=rng_seed,
            )
        )
        if nh < 10:
            import warnings

            warnings.warn(
                f"only {nh} hits at r={r!r}; estimate unreliable", stacklevel=2
            )
    return out


def estimate_sublevel_global(
    r: float, n_samples: int, rng_seed: int, batch_size: int = DEFAULT_BATCH
) -> MeasureEstimate:
    return sweep_sublevel_global([r], n_samples, rng_seed, batch_size)[0]
