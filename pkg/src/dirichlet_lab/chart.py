"""Haar sampling on a matrix chart near the identity, with Monte Carlo
measure estimates for cube-avoidance sets and their flow thickenings.

The chart parametrizes determinant-one matrices by the d^2 - 1 entries
g_ij with (i,j) != (d,d), each within c of the identity matrix; the corner
entry is solved from det(g) = 1.  In these coordinates the Haar measure
(normalized like the probability measure on the space of lattices) has the
exact density

    (zeta(2) * ... * zeta(d))^-1 / det(top-left block)

per unit Lebesgue volume, so uniform box sampling plus the density weight
gives unbiased estimates of the Haar measure of any subset of the box, and
hence of the corresponding set of lattices wherever the map g -> gZ^d is
injective on the box (see ``injectivity_audit``).

Membership of a chart lattice in the cube-avoidance set K_r, or in a
sublevel set of the depth function Delta, only needs the shortest sup-norm
length capped at 1.  Inside the box that capped length is an exact finite
minimum over a fixed list of integer coefficient vectors: Minkowski's
theorem caps the true length at 1, and every coefficient vector outside
the list provably maps to sup-norm length >= 1 (see
``ChartBox.candidate_bound`` for the two-case argument, which has to treat
the solved corner entry separately because it is not confined to the c
window).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ROutOfRange, SingularChartBlock, WeightDimensionMismatch
from .lattice import BOUNDARY_TOL, MAX_DIM, LatticeBasis, WeightPair
from .rng import RunningMoments, split_counts, worker_rng

# Number of derangements of k symbols, k = 0..MAX_DIM; used in the
# interval bounds on determinants over the whole box.
_DERANGEMENTS = (1, 0, 1, 2, 9, 44, 265, 1854, 14833)

DEFAULT_BATCH = 20_000


@lru_cache(maxsize=None)
def zeta_product_inverse(d: int) -> float:
    """1 / (zeta(2) * zeta(3) * ... * zeta(d)); equals 1 for d < 2.

    Each zeta value is a direct series to N = 100 plus an Euler-Maclaurin
    tail; the first dropped correction is below 1e-18 for k >= 2, so the
    product is accurate to full double precision.
    """
    if d < 2:
        return 1.0
    product = 1.0
    big_n = 100
    for k in range(2, d + 1):
        head = sum(n ** (-k) for n in range(1, big_n + 1))
        tail = (
            big_n ** (1 - k) / (k - 1)
            - 0.5 * big_n ** (-k)
            + (k / 12.0) * big_n ** (-k - 1)
            - (k * (k + 1) * (k + 2) / 720.0) * big_n ** (-k - 3)
        )
        product *= head + tail
    return 1.0 / product


def det_block_deviation_bound(d: int, c: float) -> float:
    """Upper bound for |det(top-left block) - 1| over the whole box.

    The block is (d-1)x(d-1) with diagonal entries within c of 1 and
    off-diagonal entries within c of 0.  The identity permutation's
    product deviates from 1 by at most (1+c)^n - 1; a permutation moving
    exactly k indices contributes at most c^k (1+c)^(n-k), and there are
    C(n,k) * derangements(k) of those.
    """
    n = d - 1
    bound = (1.0 + c) ** n - 1.0
    for k in range(2, n + 1):
        bound += math.comb(n, k) * _DERANGEMENTS[k] * c**k * (1.0 + c) ** (n - k)
    return bound


def _corner_cofactor_bound(d: int, c: float) -> float:
    """Upper bound for |R| where R is the corner-free part of det(g),
    i.e. det(g) with the (d,d) entry replaced by zero.

    R sums over permutations moving index d; one moving exactly k indices
    contributes at most c^k (1+c)^(d-k), and there are
    C(d-1, k-1) * derangements(k) of those.
    """
    bound = 0.0
    for k in range(2, d + 1):
        bound += math.comb(d - 1, k - 1) * _DERANGEMENTS[k] * c**k * (1.0 + c) ** (d - k)
    return bound


def derived_corner_range(d: int, c: float) -> tuple[float, float]:
    """Guaranteed enclosure of the solved corner entry g_dd over the box."""
    det_dev = det_block_deviation_bound(d, c)
    r_bound = _corner_cofactor_bound(d, c)
    return (1.0 - r_bound) / (1.0 + det_dev), (1.0 + r_bound) / (1.0 - det_dev)


@dataclass(frozen=True)
class ChartBox:
    """Box of half-width c around the identity in the d^2 - 1 free entries.

    Validity requires the top-left block determinant to stay within 1/2
    of 1 over the whole box (interval bound), which keeps the corner
    solve well conditioned and the sampling density within a factor 2 of
    the zeta normalization, and requires the guaranteed corner floor to
    exceed (d-1)c so that the shortest-vector candidate list is finite.
    """

    d: int
    c: float

    def __post_init__(self):
        if not 2 <= self.d <= MAX_DIM:
            raise ValueError(f"chart dimension must be in [2, {MAX_DIM}], got {self.d}")
        if not 0.0 < self.c < 0.5:
            raise ValueError(f"half-width must lie in (0, 1/2), got {self.c!r}")
        if self.d * self.c >= 1.0:
            raise ValueError(
                f"half-width {self.c} too large for d={self.d}: need d*c < 1 "
                "for the shortest-vector candidate bound"
            )
        dev = det_block_deviation_bound(self.d, self.c)
        if dev >= 0.5:
            raise ValueError(
                f"half-width {self.c} too large for d={self.d}: block determinant "
                f"deviation bound {dev:.3f} >= 1/2"
            )
        lo, _ = derived_corner_range(self.d, self.c)
        if lo <= (self.d - 1) * self.c:
            raise ValueError(
                f"half-width {self.c} too large for d={self.d}: corner floor "
                f"{lo:.3f} does not clear the off-diagonal row mass"
            )

    @classmethod
    def default(cls, d: int) -> "ChartBox":
        # widest box from a fixed ladder that passes validation and still
        # carries the analytic injectivity certificate
        for c in (0.2, 0.1, 0.05, 0.02, 0.01):
            try:
                box = cls(d, c)
            except ValueError:
                continue
            if box.injectivity_certified:
                return box
        raise ValueError(f"no default chart box for dimension {d}")

    @property
    def n_free(self) -> int:
        return self.d * self.d - 1

    @property
    def volume(self) -> float:
        """Lebesgue volume of the free-entry box."""
        return (2.0 * self.c) ** self.n_free

    @property
    def corner_floor(self) -> float:
        return derived_corner_range(self.d, self.c)[0]

    def candidate_bound_for(self, target: float) -> int:
        """Any integer coefficient vector with an entry beyond this bound
        maps to sup-norm length > ``target`` for every box matrix.

        Two cases, by where the largest coefficient sits.  If some row
        i < d carries it, that row of g deviates entrywise by less than c,
        so |(gm)_i| > ||m||(1 - dc) and (M+1)(1 - dc) >= target excludes
        m.  If only the last coefficient is maximal, the others are at
        least one smaller, and the last row gives
        |(gm)_d| > ||m||*(corner_floor - (d-1)c) + (d-1)c, so
        (M+1)(corner_floor - (d-1)c) + (d-1)c >= target excludes m.
        """
        d, c = self.d, self.c
        m_generic = math.ceil(target / (1.0 - d * c)) - 1
        gap = self.corner_floor - (d - 1) * c
        m_corner = math.ceil((target - (d - 1) * c) / gap) - 1
        return max(m_generic, m_corner, 0)

    @property
    def candidate_bound(self) -> int:
        """Coefficient cap for computing lengths capped at 1."""
        return self.candidate_bound_for(1.0)

    def candidates(self) -> np.ndarray:
        return _candidate_array(self.d, self.candidate_bound)

    @property
    def injectivity_certified(self) -> bool:
        """True when no two distinct box points can generate the same
        lattice, by the following argument (all inequalities strict
        because the box is open).

        Suppose g and g' = g @ gamma both lie in the box with gamma
        integral of determinant 1.  Column j of gamma differs from e_j by
        an integer vector z with ||g z|| < 2c in every box-constrained
        row.  If z has a maximal entry in a row i < d, then
        |(gz)_i| > ||z||(1 - dc), so c <= 1/(d+2) forces z = 0 there.
        If z is maximal only in the last entry, the last-row comparison
        |(gz)_d| > |z_d| * corner_floor - (d-1)c * |z_d| < 2c together
        with corner_floor >= dc forces z_d = 0 for columns j < d; for
        column d the remaining shear has determinant 1 + z_d, so z_d = 0,
        and the residual top-rows comparison kills the rest.
        """
        if self.c > 1.0 / (self.d + 2) + 1e-15:
            return False
        return self.corner_floor >= self.d * self.c - 1e-15


@lru_cache(maxsize=None)
def _candidate_array(d: int, bound: int) -> np.ndarray:
    """All nonzero integer vectors with entries in [-bound, bound], one
    representative per +-pair (first nonzero entry positive)."""
    rng = np.arange(-bound, bound + 1)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    all_vecs = np.stack([g.ravel() for g in grids], axis=1)
    nonzero = all_vecs[np.any(all_vecs != 0, axis=1)]
    lead = np.argmax(nonzero != 0, axis=1)
    keep = nonzero[np.arange(len(nonzero)), lead] > 0
    arr = nonzero[keep].astype(np.int64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChartPoint:
    """One chart sample: free entries, the solved corner, and the density.

    ``free_entries`` is the full d x d matrix with the (d,d) slot already
    holding the solved value ``derived_gdd`` (kept redundantly for
    convenience); ``density`` is the Haar density at the point.
    """

    free_entries: np.ndarray
    derived_gdd: float
    density: float

    @property
    def matrix(self) -> np.ndarray:
        return self.free_entries

    def lattice(self) -> LatticeBasis:
        return LatticeBasis(self.free_entries)


def _solve_corner(g: np.ndarray) -> tuple[float, float]:
    """Return (g_dd, det of top-left block) making det(g) = 1.

    det(g) is linear in g_dd: det(g) = g_dd * det(block) + R where R is
    det(g) with the corner zeroed, so g_dd = (1 - R)/det(block).
    """
    block_det = float(np.linalg.det(g[:-1, :-1]))
    if abs(block_det) < 0.5:
        raise SingularChartBlock(
            f"top-left block determinant {block_det!r} below 1/2; "
            "point lies outside every valid chart box"
        )
    zeroed = g.copy()
    zeroed[-1, -1] = 0.0
    rest = float(np.linalg.det(zeroed))
    return (1.0 - rest) / block_det, block_det


def sample_chart(box: ChartBox, rng_seed: int) -> ChartPoint:
    """Draw one point: free entries uniform in the box, corner solved."""
    rng = np.random.default_rng(rng_seed)
    d = box.d
    g = np.eye(d) + box.c * (2.0 * rng.random((d, d)) - 1.0)
    corner, block_det = _solve_corner(g)
    g[-1, -1] = corner
    density = zeta_product_inverse(d) / block_det
    g.setflags(write=False)
    return ChartPoint(free_entries=g, derived_gdd=corner, density=density)


def _sample_batch(
    box: ChartBox, rng: np.random.Generator, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized sampler: returns (matrices (n,d,d), block determinants).

    The corner entry of each matrix is already solved so that det = 1.
    """
    d = box.d
    g = np.eye(d)[None, :, :] + box.c * (2.0 * rng.random((n, d, d)) - 1.0)
    block_det = np.linalg.det(g[:, :-1, :-1])
    if np.any(np.abs(block_det) < 0.5):
        # unreachable for a valid box; guards future box relaxations
        raise SingularChartBlock("block determinant fell below 1/2 inside the box")
    zeroed = g.copy()
    zeroed[:, -1, -1] = 0.0
    rest = np.linalg.det(zeroed)
    g[:, -1, -1] = (1.0 - rest) / block_det
    return g, block_det


def _min_length_capped(
    g: np.ndarray, candidates: np.ndarray, cap: float
) -> np.ndarray:
    """Exact min(shortest sup-norm length, cap) for a batch of box
    matrices, given a candidate list valid for that cap."""
    n = g.shape[0]
    best = np.full(n, cap)
    # candidate chunks keep the (n, chunk, d) intermediate small
    for start in range(0, len(candidates), 32):
        chunk = candidates[start : start + 32]
        prods = np.einsum("nij,kj->nki", g, chunk.astype(float))
        lengths = np.max(np.abs(prods), axis=2).min(axis=1)
        np.minimum(best, lengths, out=best)
    return best


def _min_capped_length(g: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Exact min(shortest sup-norm length, 1) for a batch of box matrices."""
    return _min_length_capped(g, candidates, 1.0)


@dataclass(frozen=True)
class MeasureEstimate:
    """Monte Carlo measure value with its standard error.

    ``bracket`` is present only for indicators with a three-valued
    membership decision: it holds the (undecided-as-out, undecided-as-in)
    pair of estimates and ``value`` is its midpoint.
    """

    region: str
    r: float
    value: float
    std_error: float
    n_samples: int
    seed: int | None = None
    bracket: tuple[float, float] | None = None

    def to_json(self) -> str:
        record = {
            "region": self.region,
            "r": self.r,
            "value": self.value,
            "std_error": self.std_error,
            "n": self.n_samples,
            "seed": self.seed,
        }
        if self.bracket is not None:
            record["bracket"] = list(self.bracket)
        return json.dumps(record)

    @classmethod
    def from_json(cls, text: str) -> "MeasureEstimate":
        rec = json.loads(text)
        bracket = tuple(rec["bracket"]) if "bracket" in rec else None
        return cls(
            region=rec["region"],
            r=rec["r"],
            value=rec["value"],
            std_error=rec["std_error"],
            n_samples=rec["n"],
            seed=rec["seed"],
            bracket=bracket,
        )


def _sweep_chart_thresholds(
    box: ChartBox,
    thresholds: np.ndarray,
    n_samples: int,
    rng_seed: int,
    n_workers: int,
    batch_size: int,
) -> list[tuple[RunningMoments, int]]:
    """Shared-sample engine: per length threshold, the weighted moments of
    density * indicator(capped length >= threshold) plus the hit count.

    Every threshold sees the same draws (common random numbers), so
    estimates across thresholds are directly comparable and jointly
    reproducible from (seed, n_workers).
    """
    zeta_inv = zeta_product_inverse(box.d)
    candidates = box.candidates()

    def run_worker(worker_id: int, count: int) -> list[tuple[RunningMoments, int]]:
        rng = worker_rng(rng_seed, worker_id)
        accs = [(RunningMoments(), 0) for _ in thresholds]
        hits = [0 for _ in thresholds]
        remaining = count
        while remaining > 0:
            n = min(batch_size, remaining)
            g, block_det = _sample_batch(box, rng, n)
            density = zeta_inv / block_det
            lengths = _min_capped_length(g, candidates)
            for j, threshold in enumerate(thresholds):
                inside = lengths >= threshold - BOUNDARY_TOL
                accs[j][0].add_batch(density * inside)
                hits[j] += int(np.count_nonzero(inside))
            remaining -= n
        return [(acc, h) for (acc, _), h in zip(accs, hits)]

    counts = split_counts(n_samples, n_workers)
    if n_workers == 1:
        results = [run_worker(0, counts[0])]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(run_worker, wid, cnt) for wid, cnt in enumerate(counts)]
            results = [f.result() for f in futures]
    merged = [(RunningMoments(), 0) for _ in thresholds]
    out: list[tuple[RunningMoments, int]] = []
    for j in range(len(thresholds)):
        acc, hits = merged[j]
        for worker_result in results:  # merge in worker order: deterministic
            acc.merge(worker_result[j][0])
            hits += worker_result[j][1]
        out.append((acc, hits))
    return out


def _finish_estimate(
    box: ChartBox,
    region: str,
    r: float,
    moments: RunningMoments,
    hits: int,
    seed: int,
) -> MeasureEstimate:
    if hits < 10:
        warnings.warn(
            f"only {hits} accepted samples for {region} at r={r}; "
            "estimate is noise-dominated",
            stacklevel=3,
        )
    return MeasureEstimate(
        region=region,
        r=r,
        value=box.volume * moments.mean,
        std_error=box.volume * moments.std_error,
        n_samples=moments.count,
        seed=seed,
    )


def _check_sample_budget(n_samples: int) -> None:
    if n_samples < 1000:
        raise ValueError(f"need at least 1000 samples, got {n_samples}")


def estimate_K_measure(
    box: ChartBox,
    r: float,
    n_samples: int,
    rng_seed: int,
    n_workers: int = 1,
    batch_size: int = DEFAULT_BATCH,
) -> MeasureEstimate:
    """Haar measure of {lattices in the chart avoiding the open cube
    (r-1, 1-r)^d}, by importance-weighted box sampling."""
    if not 0.0 < r < 1.0:
        raise ROutOfRange(f"cube parameter r must lie in (0,1), got {r!r}")
    _check_sample_budget(n_samples)
    [(moments, hits)] = _sweep_chart_thresholds(
        box, np.array([1.0 - r]), n_samples, rng_seed, n_workers, batch_size
    )
    region = f"K_r-chart(d={box.d},c={box.c:g})"
    return _finish_estimate(box, region, r, moments, hits, rng_seed)


def estimate_sublevel_measure(
    box: ChartBox,
    r: float,
    n_samples: int,
    rng_seed: int,
    n_workers: int = 1,
    batch_size: int = DEFAULT_BATCH,
) -> MeasureEstimate:
    """Haar measure of {lattices in the chart with depth Delta <= r}."""
    if r <= 0.0:
        raise ROutOfRange(f"sublevel radius must be positive, got {r!r}")
    _check_sample_budget(n_samples)
    [(moments, hits)] = _sweep_chart_thresholds(
        box, np.array([math.exp(-r)]), n_samples, rng_seed, n_workers, batch_size
    )
    region = f"sublevel-chart(d={box.d},c={box.c:g})"
    return _finish_estimate(box, region, r, moments, hits, rng_seed)


def sweep_sublevel_measures(
    box: ChartBox,
    rs,
    n_samples: int,
    rng_seed: int,
    n_workers: int = 1,
    batch_size: int = DEFAULT_BATCH,
) -> list[MeasureEstimate]:
    """Depth-sublevel measures for several radii from one shared sample pass.

    Common random numbers across the radii make ratios and regression
    slopes much tighter than independent runs of the same budget.
    """
    rs = [float(r) for r in rs]
    if any(r <= 0.0 for r in rs):
        raise ROutOfRange("all sublevel radii must be positive")
    _check_sample_budget(n_samples)
    thresholds = np.exp(-np.asarray(rs))
    results = _sweep_chart_thresholds(
        box, thresholds, n_samples, rng_seed, n_workers, batch_size
    )
    region = f"sublevel-chart(d={box.d},c={box.c:g})"
    return [
        _finish_estimate(box, region, r, moments, hits, rng_seed)
        for r, (moments, hits) in zip(rs, results)
    ]


def sweep_K_measures(
    box: ChartBox,
    rs,
    n_samples: int,
    rng_seed: int,
    n_workers: int = 1,
    batch_size: int = DEFAULT_BATCH,
) -> list[MeasureEstimate]:
    """Cube-avoidance measures for several r from one shared sample pass."""
    rs = [float(r) for r in rs]
    if any(not 0.0 < r < 1.0 for r in rs):
        raise ROutOfRange("all cube parameters must lie in (0,1)")
    _check_sample_budget(n_samples)
    thresholds = 1.0 - np.asarray(rs)
    results = _sweep_chart_thresholds(
        box, thresholds, n_samples, rng_seed, n_workers, batch_size
    )
    region = f"K_r-chart(d={box.d},c={box.c:g})"
    return [
        _finish_estimate(box, region, r, moments, hits, rng_seed)
        for r, (moments, hits) in zip(rs, results)
    ]


# ---------------------------------------------------------------------------
# flow-thickened sublevel sets
# ---------------------------------------------------------------------------

def _flowed_candidate_bound(box: ChartBox, w: WeightPair, s: float) -> int:
    """Coefficient cap at flow time s: the flow contracts sup norms by at
    most e^(beta_max * s), so excluding length-1 vectors after the flow
    needs the pre-flow target raised by that factor."""
    return box.candidate_bound_for(math.exp(max(w.beta) * s))


def estimate_thickened_measure(
    box: ChartBox,
    w: WeightPair,
    r: float,
    n_samples: int,
    rng_seed: int,
    h: float | None = None,
    n_workers: int = 1,
    batch_size: int = 2_000,
) -> MeasureEstimate:
    """Haar measure of the chart part of the flow thickening
    { L : exists s in [0,1) with Delta(g_s L) <= r }.

    Membership per sample follows the same certified grid decision as
    ``lattice.in_thickened`` (identical verdicts by construction): a grid
    point with Delta <= r is an exact witness, a uniform margin above the
    Lipschitz slack certifies non-membership, and the remaining samples
    are undecided.  Undecided mass is counted both ways and reported as
    the ``bracket``; ``value`` is the midpoint.
    """
    if r <= 0.0:
        raise ROutOfRange(f"thickening radius must be positive, got {r!r}")
    if w.dim != box.d:
        raise WeightDimensionMismatch(
            f"weights describe dimension {w.dim}, chart has dimension {box.d}"
        )
    _check_sample_budget(n_samples)
    if h is None:
        h = r / 10.0
    zeta_inv = zeta_product_inverse(box.d)
    n_steps = max(1, math.ceil(1.0 / h - 1e-9))
    grid = np.arange(n_steps) * h
    lip = w.max_weight
    slack = lip * h
    scale_stack = np.exp(np.outer(grid, w.exponents))  # (n_steps, d)
    cand_per_step = [
        _candidate_array(box.d, _flowed_candidate_bound(box, w, s)) for s in grid
    ]

    def run_worker(worker_id: int, count: int):
        rng = worker_rng(rng_seed, worker_id)
        lo_m = RunningMoments()  # undecided counted as out
        hi_m = RunningMoments()  # undecided counted as in
        hits = 0
        remaining = count
        while remaining > 0:
            n = min(batch_size, remaining)
            g, block_det = _sample_batch(box, rng, n)
            density = zeta_inv / block_det
            member = np.zeros(n, dtype=bool)
            min_margin = np.full(n, np.inf)
            next_k = np.zeros(n, dtype=np.int64)  # Lipschitz skip-ahead
            for k in range(n_steps):
                active = (~member) & (next_k <= k)
                if not active.any():
                    continue
                flowed = scale_stack[k][None, :, None] * g[active]
                depth = -np.log(_min_capped_length(flowed, cand_per_step[k]))
                margin = depth - r
                idx = np.flatnonzero(active)
                np.minimum.at(min_margin, idx, margin)
                member[idx[margin <= 0.0]] = True
                if lip > 0:
                    jump = 1 + ((margin - slack) // (lip * h)).astype(np.int64)
                    jump[margin <= slack] = 1
                else:
                    jump = np.ones(len(idx), dtype=np.int64)
                next_k[idx] = k + jump
            undecided = (~member) & (min_margin <= slack)
            hits += int(member.sum())
            lo_m.add_batch(density * member)
            hi_m.add_batch(density * (member | undecided))
            remaining -= n
        return lo_m, hi_m, hits

    counts = split_counts(n_samples, n_workers)
    if n_workers == 1:
        results = [run_worker(0, counts[0])]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(run_worker, wid, cnt) for wid, cnt in enumerate(counts)]
            results = [f.result() for f in futures]
    lo_all, hi_all = RunningMoments(), RunningMoments()
    total_hits = 0
    for lo_m, hi_m, hits in results:
        lo_all.merge(lo_m)
        hi_all.merge(hi_m)
        total_hits += hits
    region = f"thickened-chart(d={box.d},c={box.c:g})"
    if total_hits < 10:
        warnings.warn(
            f"only {total_hits} certified members for {region} at r={r}; "
            "estimate is noise-dominated",
            stacklevel=2,
        )
    lo = box.volume * lo_all.mean
    hi = box.volume * hi_all.mean
    return MeasureEstimate(
        region=region,
        r=r,
        value=0.5 * (lo + hi),
        std_error=max(box.volume * lo_all.std_error, box.volume * hi_all.std_error),
        n_samples=lo_all.count,
        seed=rng_seed,
        bracket=(lo, hi),
    )


# ---------------------------------------------------------------------------
# injectivity audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InjectivityAudit:
    certified: bool
    n_samples: int
    n_gamma_candidates: int
    n_pairs_checked: int
    collisions: int
    note: str


def injectivity_audit(
    box: ChartBox, n_samples: int, rng_seed: int, batch_size: int = 20_000
) -> InjectivityAudit:
    """Check that distinct box points generate distinct lattices.

    Two layers.  First, a direct scan: for each sampled g and each
    candidate integral change of basis gamma from a small heuristic list,
    test whether g @ gamma lands back in the box; any hit is a genuine
    injectivity failure.  For certified boxes the analytic argument of
    ``ChartBox.injectivity_certified`` already rules every gamma out.
    Second, a pairwise near-collision scan: samples are bucketed by their
    capped shortest length (two interleaved quantizations so no close
    pair straddles every bucket boundary) and same-bucket pairs (g, g')
    are tested for integrality of g^-1 g'.  With continuous sampling this
    second layer can only ever fire on astronomically unlikely draws; it
    is kept because it needs no candidate list at all.
    """
    d = box.d
    # candidate gamma list for the direct scan.  For certified boxes the
    # analytic argument already excludes every nontrivial gamma, so the
    # list stays empty.  Otherwise, entries of gamma - I are bounded by
    # the certificate's column analysis; larger offsets are capped so the
    # scan stays tractable (it is labelled heuristic in the note).
    gammas = []
    if not box.injectivity_certified:
        gap = box.corner_floor - (d - 1) * box.c
        entry_bound = max(2.0 * box.c / (1.0 - d * box.c), 2.0 * box.c / gap)
        max_off = min(int(math.floor(entry_bound + 1e-12)), 2 if d == 2 else 1)
        if max_off >= 1:
            for z in _candidate_offsets(d, max_off):
                gamma = np.eye(d, dtype=np.int64) + z.reshape(d, d)
                if abs(round(float(np.linalg.det(gamma)))) == 1:
                    gammas.append(gamma)

    rng = worker_rng(rng_seed, 0)
    collisions = 0
    pairs_checked = 0
    quantum = 1e-7
    # shortest lengths capped at 2 never actually hit the cap in a valid
    # box (the first column has sup norm at most 1 + c < 2), so this key
    # is the true shortest length: a continuous lattice invariant, equal
    # across any colliding pair and almost surely distinct otherwise.
    key_candidates = _candidate_array(d, box.candidate_bound_for(2.0))
    checked = 0
    while checked < n_samples:
        n = min(batch_size, n_samples - checked)
        g, _ = _sample_batch(box, rng, n)
        for gamma in gammas:
            moved = g @ gamma.astype(float)
            dev = np.abs(moved - np.eye(d)[None])
            dev[:, -1, -1] = 0.0  # corner entry is derived, not constrained
            collisions += int(np.count_nonzero(np.all(dev < box.c, axis=(1, 2))))
        lengths = _min_length_capped(g, key_candidates, 2.0)
        # two interleaved quantizations so close pairs share a bucket in
        # at least one of them
        for offset in (0.0, 0.5):
            keys = np.floor(lengths / quantum + offset).astype(np.int64)
            order = np.argsort(keys, kind="stable")
            ks = keys[order]
            run_start = 0
            for i in range(1, n + 1):
                if i == n or ks[i] != ks[run_start]:
                    if i - run_start >= 2:
                        idxs = order[run_start:i]
                        for a in range(len(idxs)):
                            for b in range(a + 1, len(idxs)):
                                pairs_checked += 1
                                change = np.linalg.solve(g[idxs[a]], g[idxs[b]])
                                rounded = np.round(change)
                                if (
                                    np.max(np.abs(change - rounded)) < 1e-9
                                    and abs(round(float(np.linalg.det(rounded)))) == 1
                                    and np.any(rounded != np.eye(d))
                                ):
                                    collisions += 1
                    run_start = i
        checked += n
    note = (
        "certified analytically: no nontrivial integral change of basis can "
        "keep both endpoints inside the box"
        if box.injectivity_certified
        else f"empirical only: scanned {len(gammas)} candidate changes of basis"
    )
    return InjectivityAudit(
        certified=box.injectivity_certified,
        n_samples=checked,
        n_gamma_candidates=len(gammas),
        n_pairs_checked=pairs_checked,
        collisions=collisions,
        note=note,
    )


@lru_cache(maxsize=None)
def _candidate_offsets(d: int, bound: int) -> np.ndarray:
    """All nonzero integer d*d offset vectors with entries in [-bound, bound]."""
    rng = np.arange(-bound, bound + 1)
    grids = np.meshgrid(*([rng] * (d * d)), indexing="ij")
    flat = np.stack([g.ravel() for g in grids], axis=1)
    return flat[np.any(flat != 0, axis=1)]
