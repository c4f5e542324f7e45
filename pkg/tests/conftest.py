"""Shared fixtures, the acceptance summary hook, and independent oracles.

The brute-force helpers here deliberately re-derive quantities from first
principles (plain integer enumeration, closed-form identities) so the
library implementations are checked against code that shares nothing
with them.
"""

from __future__ import annotations

import itertools
import re

import numpy as np
import pytest

try:
    from hypothesis import settings

    settings.register_profile("repeatable", derandomize=True, max_examples=60)
    settings.load_profile("repeatable")
except ImportError:  # pragma: no cover - hypothesis is an optional extra
    pass


# ---------------------------------------------------------------------------
# acceptance criteria summary
# ---------------------------------------------------------------------------

CRITERIA_TITLES = {
    1: "d=2 exact-formula agreement (global MC vs closed form) + branch continuity",
    2: "d=2 exponent recovery: compensated log-log slope = 2 +- 0.15",
    3: "d=3 exponent stability: compensated ratio band <= 2 over [3e-3, 3e-2]",
    4: "sandwich: lower-set exact <= chart + 3 sigma <= d! * upper bound * 2",
    5: "shortest sup-norm vector equals brute-force enumeration exactly",
    6: "approximating-function round trip: sup relative error < 1e-9",
    7: "dynamical SUFFICIENT verdicts never contradict direct coverage",
    8: "critical-lattice decomposition round trip, residual < 1e-9",
    9: "zero-one trend: monotone fractions with Wilson-separated endpoints",
    10: "byte-identical CSV outputs for fixed (config, seed)",
}

_CRITERION_RE = re.compile(r"test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    stats = terminalreporter.stats
    outcomes: dict[int, list[str]] = {}
    for category in ("passed", "failed", "error", "xfailed", "xpassed", "skipped"):
        for report in stats.get(category, []):
            if getattr(report, "when", "call") != "call" and category not in ("error",):
                continue
            match = _CRITERION_RE.search(report.nodeid)
            if match:
                outcomes.setdefault(int(match.group(1)), []).append(category)
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA_TITLES):
        cats = outcomes.get(number)
        if cats is None:
            status = "NOT RUN"
        elif any(c in ("failed", "error", "xpassed") for c in cats):
            status = "FAIL"
        elif "xfailed" in cats:
            # a documented expected failure; companion tests may still pass
            status = "XFAIL" + ("+PASS" if "passed" in cats else "")
        elif all(c == "skipped" for c in cats):
            status = "SKIPPED"
        else:
            status = "PASS"
        terminalreporter.write_line(
            f"ACCEPTANCE {number:>2} [{status}] {CRITERIA_TITLES[number]}"
        )


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------

def _greedy_pair_reduce(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tame a skewed basis by greedy pairwise column reduction.

    Independent of the library's reduction: plain steepest-descent
    c_i <- c_i - round(<c_i,c_j>/<c_j,c_j>) c_j sweeps, accepted only when
    the euclidean norm drops.  Returns (reduced, u) with
    ``reduced = matrix @ u`` and u integral unimodular.
    """
    b = np.asarray(matrix, dtype=float).copy()
    d = b.shape[0]
    u = np.eye(d, dtype=np.int64)
    for _ in range(200):
        changed = False
        for i in range(d):
            for j in range(d):
                if i == j:
                    continue
                denom = float(b[:, j] @ b[:, j])
                if denom == 0.0:
                    continue
                k = round(float(b[:, i] @ b[:, j]) / denom)
                if k == 0:
                    continue
                cand = b[:, i] - k * b[:, j]
                if float(cand @ cand) < float(b[:, i] @ b[:, i]) * (1.0 - 1e-12):
                    b[:, i] = cand
                    u[:, i] -= k * u[:, j]
                    changed = True
        if not changed:
            break
    return b, u


def brute_force_shortest(matrix: np.ndarray) -> float:
    """Shortest nonzero sup-norm length by exhaustive integer enumeration.

    The coefficient box comes from the rows of the inverse of a greedily
    pair-reduced copy: any lattice vector Rk with ||Rk||_inf <= L has
    |k_i| <= ||row_i(R^-1)||_1 L, and some nonzero vector has length at
    most min_j ||column_j(R)||_inf.  A vectorized batch pass locates the
    near-minimal candidates; those are re-evaluated one by one with a
    plain ``B @ k`` product against the original matrix, so the returned
    float is the exact matrix-vector minimum and does not depend on
    batched-matmul rounding.
    """
    b = np.asarray(matrix, dtype=float)
    d = b.shape[0]
    red, u = _greedy_pair_reduce(b)
    cap = float(np.abs(red).max(axis=0).min())
    inv = np.linalg.inv(red)
    bounds = [int(np.floor(np.abs(inv[i]).sum() * cap + 1e-9)) for i in range(d)]
    box = 1
    for m in bounds:
        box *= 2 * m + 1
    assert box <= 5_000_000, f"enumeration box {bounds} too large even after reduction"
    axes = [np.arange(-m, m + 1) for m in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    grid = grid[np.any(grid != 0, axis=1)]
    best = np.inf
    for start in range(0, len(grid), 200_000):
        chunk = grid[start : start + 200_000]
        approx = np.abs(chunk.astype(float) @ red.T).max(axis=1)
        near = chunk[approx <= min(best, float(approx.min())) * (1.0 + 1e-12)]
        for k_red in near:
            k = (u @ k_red).astype(float)
            length = float(np.abs(b @ k).max())
            if length < best:
                best = length
    return best


def naive_interval_union_length(intervals, lo: float, hi: float) -> float:
    """Total length of a union of open intervals clipped to [lo, hi]."""
    clipped = sorted(
        (max(a, lo), min(b, hi)) for a, b in intervals if min(b, hi) > max(a, lo)
    )
    total = 0.0
    cur_lo, cur_hi = None, None
    for a, b in clipped:
        if cur_hi is None or a > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = a, b
        else:
            cur_hi = max(cur_hi, b)
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
