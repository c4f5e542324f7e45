"""Correspondence between approximating functions and flow radii.

An approximating function psi (decreasing, with t*psi(t) increasing and
below 1) is equivalent to a decreasing positive radius function r(s)
along the diagonal flow, via

    e^(-d*r(s)) = t * psi(t),        t = e^(s - n*r(s)),

with s = (m/d) log t - (n/d) log psi(t).  ``psi_to_r`` and ``r_to_psi``
realize both directions by bisection on the monotone relations;
``series_diagnostics`` evaluates the critical series whose convergence
decides the zero-one law, together with the analytic verdicts for the
named one-parameter families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BisectionFailed, PsiInvalid, RInvalid

_VALIDATION_POINTS = 512
_VALIDATION_SPAN = 1e6  # grid covers [t0, t0 * span]
_BISECT_STEPS = 200


@dataclass(frozen=True)
class Constants:
    """Dimension-dependent exponents of the measure asymptotics."""

    d: int

    @property
    def kappa(self) -> float:
        return (self.d * self.d + self.d - 4) / 2.0

    @property
    def lam(self) -> int:
        return self.d * (self.d - 1) // 2


class PsiSpec:
    """Base class for approximating functions.

    Subclasses provide ``t0`` and a vectorized ``value``; ``inverse`` is
    generic bisection (overridable when a closed form exists).
    Constructors call ``validate`` which enforces, on a geometric grid:
    psi decreasing, t*psi(t) nondecreasing, and t*psi(t) < 1.
    """

    t0: float

    def value(self, t):
        raise NotImplementedError

    def __call__(self, t):
        return self.value(t)

    def describe(self) -> str:
        raise NotImplementedError

    def inverse(self, v):
        """Largest t with psi(t) > v (so psi(t) > v exactly for t below
        the returned point); +inf when v <= the limiting value, t0 when
        v >= psi(t0)."""
        v = np.asarray(v, dtype=float)
        scalar = v.ndim == 0
        v = np.atleast_1d(v).copy()
        out = np.empty_like(v)
        psi_t0 = float(self.value(self.t0))
        for i, vi in enumerate(v):
            if vi <= 0.0:
                out[i] = math.inf
                continue
            if vi >= psi_t0:
                out[i] = self.t0
                continue
            lo, hi = self.t0, 2.0 * self.t0
            steps = 0
            while float(self.value(hi)) > vi:
                lo, hi = hi, hi * 4.0
                steps += 1
                if steps > _BISECT_STEPS:
                    raise BisectionFailed(
                        f"could not bracket inverse of psi at {vi!r}"
                    )
            for _ in range(_BISECT_STEPS):
                mid = 0.5 * (lo + hi)
                if float(self.value(mid)) > vi:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-12 * max(1.0, lo):
                    break
            out[i] = 0.5 * (lo + hi)
        return float(out[0]) if scalar else out

    def validate(self) -> None:
        ts = np.geomspace(self.t0, self.t0 * _VALIDATION_SPAN, _VALIDATION_POINTS)
        vals = np.asarray(self.value(ts), dtype=float)
        if not np.all(np.isfinite(vals)) or not np.all(vals > 0.0):
            raise PsiInvalid(f"{self.describe()}: psi must be finite and positive")
        if not np.all(np.diff(vals) < 0.0):
            raise PsiInvalid(f"{self.describe()}: psi must be decreasing")
        tpsi = ts * vals
        if not np.all(np.diff(tpsi) >= -1e-11 * np.maximum(tpsi[:-1], tpsi[1:])):
            raise PsiInvalid(f"{self.describe()}: t*psi(t) must be nondecreasing")
        if not np.all(tpsi < 1.0):
            raise PsiInvalid(f"{self.describe()}: t*psi(t) must stay below 1")


class COverT(PsiSpec):
    """psi(t) = c/t with 0 < c < 1."""

    def __init__(self, c: float, t0: float = 1.0):
        if not 0.0 < c < 1.0:
            raise PsiInvalid(f"c/t family needs c in (0,1), got {c!r}")
        if t0 <= 0.0:
            raise PsiInvalid(f"left endpoint must be positive, got {t0!r}")
        self.c = c
        self.t0 = t0
        self.validate()

    def value(self, t):
        return self.c / np.asarray(t, dtype=float)

    def inverse(self, v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(v > 0.0, self.c / np.maximum(v, 1e-300), np.inf)
        out = np.maximum(out, self.t0)
        return float(out) if out.ndim == 0 else out

    def describe(self) -> str:
        return f"c_over_t(c={self.c:g})"


class LogFamily(PsiSpec):
    """psi(t) = (1 - c (log t)^(-tau)) / t."""

    def __init__(self, c: float, tau: float, t0: float = 8.0):
        if c <= 0.0 or tau <= 0.0:
            raise PsiInvalid(f"log family needs c, tau > 0, got c={c!r}, tau={tau!r}")
        if t0 <= 1.0:
            raise PsiInvalid(f"log family needs t0 > 1, got {t0!r}")
        if 1.0 - c * math.log(t0) ** (-tau) <= 0.0:
            raise PsiInvalid(
                f"log family positivity fails at t0={t0!r} for c={c!r}, tau={tau!r}"
            )
        self.c = c
        self.tau = tau
        self.t0 = t0
        self.validate()

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return (1.0 - self.c * np.log(t) ** (-self.tau)) / t

    def describe(self) -> str:
        return f"log_family(c={self.c:g},tau={self.tau:g})"


class LogLogFamily(PsiSpec):
    """psi(t) = (1 - c (log log t)^(-tau)) / t."""

    def __init__(self, c: float, tau: float, t0: float = 100.0):
        if c <= 0.0 or tau <= 0.0:
            raise PsiInvalid(
                f"loglog family needs c, tau > 0, got c={c!r}, tau={tau!r}"
            )
        if t0 <= math.e:
            raise PsiInvalid(f"loglog family needs t0 > e, got {t0!r}")
        if 1.0 - c * math.log(math.log(t0)) ** (-tau) <= 0.0:
            raise PsiInvalid(
                f"loglog family positivity fails at t0={t0!r} for c={c!r}, tau={tau!r}"
            )
        self.c = c
        self.tau = tau
        self.t0 = t0
        self.validate()

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return (1.0 - self.c * np.log(np.log(t)) ** (-self.tau)) / t

    def describe(self) -> str:
        return f"loglog_family(c={self.c:g},tau={self.tau:g})"


class TablePsi(PsiSpec):
    """Tabulated psi, interpolated piecewise-linearly in (log t, log psi).

    Log-log linearity preserves both monotonicity constraints segmentwise:
    psi decreasing and t*psi nondecreasing hold everywhere iff every
    segment slope lies in [-1, 0].  Beyond the last knot the final slope
    is extended; note that a final slope strictly above -1 makes t*psi(t)
    grow without bound, so such tables are rejected at construction unless
    t*psi stays below 1 across the whole validation span.
    """

    def __init__(self, ts, psis):
        ts = np.asarray(ts, dtype=float)
        psis = np.asarray(psis, dtype=float)
        if ts.ndim != 1 or ts.shape != psis.shape or len(ts) < 2:
            raise PsiInvalid("table form needs two equal-length 1-d arrays of knots")
        if not np.all(np.diff(ts) > 0.0):
            raise PsiInvalid("table abscissae must be strictly increasing")
        if not (np.all(ts > 0.0) and np.all(psis > 0.0)):
            raise PsiInvalid("table knots must be positive")
        self.log_ts = np.log(ts)
        self.log_psis = np.log(psis)
        slopes = np.diff(self.log_psis) / np.diff(self.log_ts)
        if not np.all((slopes <= 0.0) & (slopes >= -1.0 - 1e-12)):
            raise PsiInvalid(
                "table slopes in log-log must lie in [-1, 0] "
                "(psi decreasing, t*psi nondecreasing)"
            )
        self.t0 = float(ts[0])
        self._final_slope = float(slopes[-1])
        self.validate()

    def value(self, t):
        logt = np.log(np.asarray(t, dtype=float))
        inside = np.interp(logt, self.log_ts, self.log_psis)
        beyond = self.log_psis[-1] + self._final_slope * (logt - self.log_ts[-1])
        out = np.exp(np.where(logt <= self.log_ts[-1], inside, beyond))
        return float(out) if out.ndim == 0 else out

    def describe(self) -> str:
        return f"table({len(self.log_ts)} knots)"


def parse_psi(text: str) -> PsiSpec:
    """Parse CLI psi descriptors: ``c_over_t:c=0.5``, ``log:c=1,tau=2``,
    ``loglog:c=1,tau=1.5`` (optional ``t0=``)."""
    name, _, argstr = text.partition(":")
    kwargs = {}
    if argstr:
        for piece in argstr.split(","):
            key, _, val = piece.partition("=")
            if not val:
                raise PsiInvalid(f"malformed psi argument {piece!r} in {text!r}")
            kwargs[key.strip()] = float(val)
    name = name.strip().lower()
    try:
        if name in ("c_over_t", "linear"):
            return COverT(**kwargs)
        if name == "log":
            return LogFamily(**kwargs)
        if name == "loglog":
            return LogLogFamily(**kwargs)
    except TypeError as exc:
        raise PsiInvalid(f"bad arguments for psi family {name!r}: {exc}") from exc
    raise PsiInvalid(f"unknown psi family {name!r} (use c_over_t | log | loglog)")


# ---------------------------------------------------------------------------
# the correspondence
# ---------------------------------------------------------------------------

@dataclass
class RFunction:
    """Radius function r(s) for s >= s0, r decreasing and positive with
    s + m*r(s) nondecreasing; realized by an evaluator plus a solver
    cache keyed by s."""

    s0: float
    m: int
    n: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    source: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def d(self) -> int:
        return self.m + self.n

    def value(self, s):
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        s1 = np.atleast_1d(s)
        if np.any(s1 < self.s0 - 1e-12):
            raise RInvalid(
                f"radius function defined for s >= {self.s0!r}, got min {s1.min()!r}"
            )
        out = np.empty_like(s1)
        missing = []
        for i, si in enumerate(s1):
            key = float(si)
            if key in self._cache:
                out[i] = self._cache[key]
            else:
                missing.append(i)
        if missing:
            vals = self.evaluator(s1[missing])
            room = max(0, 200_000 - len(self._cache))
            for i, vi in zip(missing, np.atleast_1d(vals)):
                out[i] = vi
                if room > 0:
                    self._cache[float(s1[i])] = float(vi)
                    room -= 1
        return float(out[0]) if scalar else out

    def __call__(self, s):
        return self.value(s)


def _psi_log(psi: PsiSpec, t: np.ndarray) -> np.ndarray:
    return np.log(np.asarray(psi.value(t), dtype=float))


def psi_to_r(psi: PsiSpec, m: int, n: int) -> RFunction:
    """Forward direction: from psi to the radius function.

    s(t) = (m/d) log t - (n/d) log psi(t) is strictly increasing, so each
    s >= s0 has a unique t; then r(s) = -(1/d) log(t psi(t)).  Bisection
    in log t with geometric bracket growth; relative accuracy 1e-10.
    """
    if m < 1 or n < 1:
        raise PsiInvalid(f"need m, n >= 1, got m={m!r}, n={n!r}")
    d = m + n
    log_t0 = math.log(psi.t0)
    s0 = (m / d) * log_t0 - (n / d) * float(_psi_log(psi, np.asarray(psi.t0)))

    def s_of_logt(logt: np.ndarray) -> np.ndarray:
        t = np.exp(logt)
        return (m / d) * logt - (n / d) * _psi_log(psi, t)

    def evaluate(s: np.ndarray) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        lo = np.full_like(s, log_t0)
        hi = np.full_like(s, log_t0 + 1.0)
        for _ in range(_BISECT_STEPS):
            need = s_of_logt(hi) < s
            if not need.any():
                break
            width = hi - lo
            lo = np.where(need, hi, lo)
            hi = np.where(need, hi + 2.0 * width, hi)
        else:
            raise BisectionFailed("could not bracket s(t) from above")
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            below = s_of_logt(mid) < s
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.max(hi - lo) <= 1e-13 * np.maximum(1.0, np.abs(lo)).max():
                break
        logt = 0.5 * (lo + hi)
        t = np.exp(logt)
        return -(1.0 / d) * (logt + _psi_log(psi, t))

    return RFunction(s0=s0, m=m, n=n, evaluator=evaluate, source=psi.describe())


class PsiFromR(PsiSpec):
    """psi recovered from a radius function: t(s) = e^(s - n r(s)) is
    strictly increasing, and psi(t(s)) = e^(-s - m r(s))."""

    def __init__(self, r: RFunction):
        self.r = r
        r0 = float(r.value(r.s0))
        if not r0 > 0.0:
            raise RInvalid(f"radius at s0 must be positive, got {r0!r}")
        self.t0 = math.exp(r.s0 - r.n * r0)
        self.validate()

    def _s_of_t(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        logt = np.log(t)
        lo = np.full_like(logt, self.r.s0)
        hi = lo + 1.0

        def g(s):
            return s - self.r.n * self.r.value(np.maximum(s, self.r.s0))

        for _ in range(_BISECT_STEPS):
            need = g(hi) < logt
            if not need.any():
                break
            width = hi - lo
            lo = np.where(need, hi, lo)
            hi = np.where(need, hi + 2.0 * width, hi)
        else:
            raise BisectionFailed("could not bracket t(s) from above")
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            below = g(mid) < logt
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.max(hi - lo) <= 1e-13:
                break
        return 0.5 * (lo + hi)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        s = self._s_of_t(t)
        out = np.exp(-s - self.r.m * self.r.value(s))
        return float(out[0]) if t.ndim == 0 else out

    def describe(self) -> str:
        return f"psi_from_r({self.r.source or 'custom'})"


def r_to_psi(r: RFunction, m: int | None = None, n: int | None = None) -> PsiSpec:
    """Inverse direction; m and n, if given, must match the radius
    function's weights."""
    if m is not None and m != r.m or n is not None and n != r.n:
        raise RInvalid(
            f"weight split ({m},{n}) does not match radius function ({r.m},{r.n})"
        )
    return PsiFromR(r)


def constant_r(rho: float, m: int, n: int, s0: float = 0.0) -> RFunction:
    """Constant radius; corresponds to psi(t) = e^(-d rho)/t."""
    if rho <= 0.0:
        raise RInvalid(f"radius must be positive, got {rho!r}")

    def evaluate(s):
        return np.full_like(np.atleast_1d(np.asarray(s, dtype=float)), rho)

    return RFunction(s0=s0, m=m, n=n, evaluator=evaluate, source=f"constant({rho:g})")


def table_r(ss, rs, m: int, n: int) -> RFunction:
    """Piecewise-linear radius function from knots (validated decreasing,
    positive, with s + m r(s) nondecreasing)."""
    ss = np.asarray(ss, dtype=float)
    rs = np.asarray(rs, dtype=float)
    if ss.ndim != 1 or ss.shape != rs.shape or len(ss) < 2:
        raise RInvalid("table form needs two equal-length 1-d arrays of knots")
    if not np.all(np.diff(ss) > 0.0):
        raise RInvalid("table abscissae must be strictly increasing")
    if not np.all(rs > 0.0):
        raise RInvalid("radius knots must be positive")
    slopes = np.diff(rs) / np.diff(ss)
    if not np.all(slopes <= 0.0):
        raise RInvalid("radius knots must be nonincreasing")
    if not np.all(1.0 + m * slopes >= -1e-12):
        raise RInvalid("s + m r(s) must be nondecreasing (slopes >= -1/m)")

    def evaluate(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.interp(s, ss, rs)

    return RFunction(s0=float(ss[0]), m=m, n=n, evaluator=evaluate, source="table_r")


# ---------------------------------------------------------------------------
# series diagnostics
# ---------------------------------------------------------------------------

VERDICT_FULL = "FULL"
VERDICT_ZERO = "ZERO"
VERDICT_NO_INFO = "NO-INFORMATION"
VERDICT_TREND = "TREND-ONLY"


@dataclass(frozen=True)
class SeriesReport:
    """Partial sums of the critical series and the analytic verdict.

    ``partial_sums`` maps cutoffs to S(t1) = sum_{k<=t1} k^-1 F(k)^kappa
    log^lambda(1/F(k)) with F(t) = 1 - t psi(t); ``quotient`` is the
    normalized tail indicator Q(t1) (a slowly varying sequence when the
    series is near-critical); ``trend`` is an empirical growth note;
    ``verdict`` is analytic for the named families and TREND-ONLY
    otherwise; ``not_full_flag`` marks the boundary loglog case where the
    complement is known to have positive measure.
    """

    d: int
    family: str
    partial_sums: dict
    quotient: float
    trend: str
    verdict: str
    thresholds: dict
    not_full_flag: bool = False

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "family": self.family,
            "S": {str(k): v for k, v in self.partial_sums.items()},
            "Q": self.quotient,
            "trend": self.trend,
            "verdict": self.verdict,
            "thresholds": self.thresholds,
            "not_full_flag": self.not_full_flag,
        }


def critical_terms(psi: PsiSpec, d: int, ks: np.ndarray) -> np.ndarray:
    """Terms k^-1 F(k)^kappa log^lambda(1/F(k)) of the critical series,
    with F = 1 - t psi(t) clipped away from 0 and 1 for stability."""
    con = Constants(d)
    f = 1.0 - ks * np.asarray(psi.value(ks), dtype=float)
    f = np.clip(f, 1e-300, 1.0 - 1e-16)
    return (f**con.kappa) * np.log(1.0 / f) ** con.lam / ks


def series_diagnostics(psi: PsiSpec, d: int, t1_max: float = 1e6) -> SeriesReport:
    """Partial sums, tail quotient, growth trend, and (for the named
    families) the analytic zero-one verdict with its thresholds."""
    con = Constants(d)
    start = int(math.ceil(psi.t0))
    cutoffs = []
    c = 100
    while c < t1_max:
        cutoffs.append(c)
        c *= 10
    cutoffs.append(int(t1_max))

    partial: dict[int, float] = {}
    running = 0.0
    running_q_num = 0.0
    prev = start
    for cut in cutoffs:
        if cut < prev:
            partial[cut] = running
            continue
        ks = np.arange(prev, cut + 1, dtype=float)
        terms = critical_terms(psi, d, ks)
        running += float(terms.sum())
        f = 1.0 - ks * np.asarray(psi.value(ks), dtype=float)
        f = np.clip(f, 1e-300, 1.0 - 1e-16)
        running_q_num += float(
            ((f**con.kappa) * np.log(1.0 / f) ** (con.lam + 1) / ks).sum()
        )
        partial[cut] = running
        prev = cut + 1

    s_final = partial[cutoffs[-1]]
    quotient = running_q_num / (s_final**2) if s_final > 0 else math.inf

    decades = [partial[c] for c in cutoffs]
    increments = np.diff(decades)
    if len(increments) >= 2 and increments[-1] > 0 and increments[-2] > 0:
        ratio = increments[-1] / increments[-2]
        if ratio < 0.5:
            trend = "per-decade increments shrinking (converging trend)"
        elif ratio > 0.9:
            trend = "per-decade increments steady (diverging trend)"
        else:
            trend = "per-decade increments slowly shrinking (inconclusive trend)"
    else:
        trend = "insufficient increments for a trend"

    verdict = VERDICT_TREND
    not_full = False
    thresholds: dict[str, float] = {"kappa": con.kappa, "lambda": con.lam}
    if isinstance(psi, COverT):
        # F is the constant 1 - c: the series diverges like the harmonic one
        verdict = VERDICT_ZERO
    elif isinstance(psi, LogFamily):
        thresholds["tau_full_above"] = 1.0 / con.kappa
        verdict = VERDICT_FULL if psi.tau > 1.0 / con.kappa else VERDICT_ZERO
    elif isinstance(psi, LogLogFamily):
        lo = con.lam / con.kappa
        hi = (con.lam + 1) / con.kappa
        thresholds["tau_zero_below"] = lo
        thresholds["tau_full_above"] = hi
        if psi.tau > hi:
            verdict = VERDICT_FULL
        elif psi.tau < lo:
            verdict = VERDICT_ZERO
        else:
            verdict = VERDICT_NO_INFO
            if abs(psi.tau - lo) <= 1e-12:
                not_full = True  # complement known to have positive measure
    return SeriesReport(
        d=d,
        family=psi.describe(),
        partial_sums=partial,
        quotient=quotient,
        trend=trend,
        verdict=verdict,
        thresholds=thresholds,
        not_full_flag=not_full,
    )


def equivalent_series_terms(r: RFunction, ks: np.ndarray) -> np.ndarray:
    """Terms r(k)^kappa log^lambda(1 + 1/r(k)) of the flow-side series,
    which diverges exactly when the critical series does."""
    con = Constants(r.d)
    vals = np.asarray(r.value(np.maximum(ks, r.s0)), dtype=float)
    return vals**con.kappa * np.log(1.0 + 1.0 / vals) ** con.lam
