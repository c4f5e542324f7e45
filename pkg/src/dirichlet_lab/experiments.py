"""Reproducible experiment runners with delimited output and figures.

Each runner consumes a validated config, writes one tidy CSV (every row
stamped with the seed and a hash of the canonical config) plus a
deterministic SVG figure next to it, and returns a summary object.
Byte-identical reruns from the same config are a supported contract:
floats are serialized with repr, the figure hash salt is pinned, and no
timestamps are embedded.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "dirichlet-lab"
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from . import chart, d2
from .bounds import mu2_exact
from .dani import Constants, parse_psi, series_diagnostics
from .errors import ConfigError, HorizonTooLarge
from .rng import worker_rng
from .tester import fast_window_verdicts

_FIG_KW = {"metadata": {"Date": None}}


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=repr)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _require_keys(payload: dict, allowed: dict, context: str) -> dict:
    unknown = set(payload) - set(allowed)
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")
    out = {}
    for key, (required, default) in allowed.items():
        if key in payload:
            out[key] = payload[key]
        elif required:
            raise ConfigError(f"{context}: missing required key {key!r}")
        else:
            out[key] = default
    return out


def _monotone_grid(values, context: str) -> tuple[float, ...]:
    grid = tuple(float(v) for v in values)
    if len(grid) < 2:
        raise ConfigError(f"{context}: grid needs at least two points")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"{context}: grid must be strictly increasing")
    return grid


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    def fmt(v):
        if isinstance(v, float):
            return repr(v)
        return v

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def wilson_interval(successes: int, total: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        raise ConfigError("wilson interval needs a positive sample count")
    phat = successes / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total))
    return (max(0.0, center - half), min(1.0, center + half))


def _ols_slope(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and its 95% half-width."""
    n = len(xs)
    if n < 3:
        raise ConfigError("slope fit needs at least three usable points")
    xm, ym = xs.mean(), ys.mean()
    sxx = float(np.sum((xs - xm) ** 2))
    slope = float(np.sum((xs - xm) * (ys - ym)) / sxx)
    resid = ys - (ym + slope * (xs - xm))
    var = float(np.sum(resid**2)) / (n - 2)
    return slope, 1.96 * math.sqrt(var / sxx)


# ---------------------------------------------------------------------------
# measure scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureScalingConfig:
    d: int
    r_grid: tuple[float, ...]
    n_samples: int
    seed: int
    c: float | None = None
    n_workers: int = 1

    @classmethod
    def from_dict(cls, payload: dict) -> "MeasureScalingConfig":
        got = _require_keys(
            payload,
            {
                "d": (True, None),
                "r_grid": (True, None),
                "n_samples": (True, None),
                "seed": (True, None),
                "c": (False, None),
                "n_workers": (False, 1),
            },
            "measure_scaling",
        )
        got["r_grid"] = _monotone_grid(got["r_grid"], "measure_scaling.r_grid")
        cfg = cls(**{k: got[k] for k in ("d", "r_grid", "n_samples", "seed", "c", "n_workers")})
        if cfg.d < 2:
            raise ConfigError(f"measure_scaling: d must be >= 2, got {cfg.d!r}")
        if cfg.n_samples < 1000:
            raise ConfigError("measure_scaling: n_samples must be at least 1000")
        return cfg

    def payload(self) -> dict:
        return {
            "experiment": "measure_scaling",
            "d": self.d,
            "r_grid": list(self.r_grid),
            "n_samples": self.n_samples,
            "seed": self.seed,
            "c": self.c,
            "n_workers": self.n_workers,
        }


@dataclass(frozen=True)
class MeasureScalingResult:
    estimates: tuple
    slope: float
    slope_halfwidth: float
    csv_path: Path
    figure_path: Path


def _compensator(d: int, r: float) -> float:
    con = Constants(d)
    return r ** (con.kappa + 1.0) * math.log(1.0 / r) ** con.lam


def run_measure_scaling(cfg: MeasureScalingConfig, out_dir) -> MeasureScalingResult:
    """Sublevel-measure scaling across the radius grid.

    d = 2 uses the exact global sampler and adds the closed-form measure
    column; d >= 3 samples the identity chart.  The fitted slope is for
    log(value / log^lambda(1/r)) against log r, whose target is kappa+1.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    salt = config_hash(cfg.payload())
    con = Constants(cfg.d)
    if cfg.d == 2:
        ests = d2.sweep_sublevel_global(cfg.r_grid, cfg.n_samples, cfg.seed)
    else:
        box = chart.ChartBox(cfg.d, cfg.c) if cfg.c is not None else chart.ChartBox.default(cfg.d)
        ests = chart.sweep_sublevel_measures(
            box, cfg.r_grid, cfg.n_samples, cfg.seed, n_workers=cfg.n_workers
        )

    header = ["r", "value", "std_error", "n_samples", "compensated_ratio", "seed", "config_hash"]
    if cfg.d == 2:
        header.insert(5, "exact_value")
    rows = []
    for est in ests:
        comp = est.value / _compensator(cfg.d, est.r)
        row = [est.r, est.value, est.std_error, est.n_samples, comp]
        if cfg.d == 2:
            row.append(mu2_exact(est.r))
        row.extend([cfg.seed, salt])
        rows.append(row)
    csv_path = out / f"measure_scaling_d{cfg.d}.csv"
    _write_csv(csv_path, header, rows)

    usable = [(e.r, e.value) for e in ests if e.value > 0]
    if len(usable) >= 3:
        xs = np.log([r for r, _ in usable])
        ys = np.log([v / math.log(1.0 / r) ** con.lam for r, v in usable])
        slope, half = _ols_slope(xs, ys)
    else:
        warnings.warn("fewer than three nonzero estimates; slope not fitted", stacklevel=2)
        slope, half = math.nan, math.nan

    fig, ax = plt.subplots(figsize=(6, 4.5))
    rs = np.array([e.r for e in ests])
    vals = np.array([e.value for e in ests])
    errs = np.array([e.std_error for e in ests])
    ax.errorbar(rs, vals, yerr=3 * errs, fmt="o", capsize=3, label="Monte Carlo")
    if cfg.d == 2:
        dense = np.geomspace(rs.min(), rs.max(), 200)
        ax.plot(dense, [mu2_exact(r) for r in dense], "-", lw=1, label="exact")
    ref = np.array([_compensator(cfg.d, r) for r in rs])
    pos = vals > 0
    if pos.any():
        scale = float(np.exp(np.mean(np.log(vals[pos] / ref[pos]))))
        ax.plot(rs, scale * ref, "--", lw=1, label=f"slope {con.kappa + 1:g} reference")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("r")
    ax.set_ylabel("measure of sublevel set")
    ax.set_title(f"d={cfg.d}: fitted slope {slope:.3f} +- {half:.3f}")
    ax.legend()
    fig.tight_layout()
    fig_path = out / f"measure_scaling_d{cfg.d}.svg"
    fig.savefig(fig_path, **_FIG_KW)
    plt.close(fig)
    return MeasureScalingResult(
        estimates=tuple(ests),
        slope=slope,
        slope_halfwidth=half,
        csv_path=csv_path,
        figure_path=fig_path,
    )


# ---------------------------------------------------------------------------
# zero-one fractions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroOneConfig:
    n_targets: int
    horizons: tuple[float, ...]
    psis: tuple[str, ...]
    seed: int

    @classmethod
    def from_dict(cls, payload: dict) -> "ZeroOneConfig":
        got = _require_keys(
            payload,
            {
                "n_targets": (True, None),
                "horizons": (True, None),
                "psis": (True, None),
                "seed": (True, None),
            },
            "zero_one",
        )
        horizons = _monotone_grid(got["horizons"], "zero_one.horizons")
        psis = tuple(str(p) for p in got["psis"])
        if not psis:
            raise ConfigError("zero_one: needs at least one psi descriptor")
        cfg = cls(
            n_targets=int(got["n_targets"]),
            horizons=horizons,
            psis=psis,
            seed=int(got["seed"]),
        )
        if cfg.n_targets < 1:
            raise ConfigError("zero_one: n_targets must be positive")
        for p in cfg.psis:
            parse_psi(p)  # validate early
        return cfg

    def payload(self) -> dict:
        return {
            "experiment": "zero_one",
            "n_targets": self.n_targets,
            "horizons": list(self.horizons),
            "psis": list(self.psis),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ZeroOneResult:
    fractions: dict
    csv_path: Path
    figure_path: Path


def run_zero_one(cfg: ZeroOneConfig, out_dir) -> ZeroOneResult:
    """Fraction of uniform scalar targets that keep the Dirichlet property
    throughout the growing window (max(t0, sqrt(T)), T], per psi and
    horizon, with Wilson intervals and the analytic series verdict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    salt = config_hash(cfg.payload())
    targets = worker_rng(cfg.seed, 0).random(cfg.n_targets)

    header = [
        "psi",
        "horizon",
        "window_start",
        "fraction",
        "wilson_low",
        "wilson_high",
        "n_targets",
        "series_verdict",
        "seed",
        "config_hash",
    ]
    rows = []
    fractions: dict[str, list[tuple[float, float]]] = {}
    for text in cfg.psis:
        psi = parse_psi(text)
        verdict = series_diagnostics(psi, 2, t1_max=max(cfg.horizons)).verdict
        fractions[text] = []
        for T in cfg.horizons:
            t1 = max(float(psi.t0), math.sqrt(T))
            if t1 >= T:
                raise ConfigError(
                    f"zero_one: horizon {T!r} gives empty window for psi {text!r}"
                )
            ok = fast_window_verdicts(targets, psi, T)
            k = int(ok.sum())
            lo, hi = wilson_interval(k, cfg.n_targets)
            frac = k / cfg.n_targets
            fractions[text].append((T, frac))
            rows.append(
                [text, T, t1, frac, lo, hi, cfg.n_targets, verdict, cfg.seed, salt]
            )
    csv_path = out / "zero_one.csv"
    _write_csv(csv_path, header, rows)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for text in cfg.psis:
        pts = fractions[text]
        ax.plot([t for t, _ in pts], [f for _, f in pts], "o-", label=text)
    ax.set_xscale("log")
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("horizon T")
    ax.set_ylabel("fraction Dirichlet on window")
    ax.legend()
    fig.tight_layout()
    fig_path = out / "zero_one.svg"
    fig.savefig(fig_path, **_FIG_KW)
    plt.close(fig)
    return ZeroOneResult(
        fractions={k: tuple(v) for k, v in fractions.items()},
        csv_path=csv_path,
        figure_path=fig_path,
    )


# ---------------------------------------------------------------------------
# equidistribution of expanding translates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EquidistributionConfig:
    m: int
    radius: float
    s_checkpoints: tuple[float, ...]
    n_targets: int
    seed: int
    chart_c: float | None = None
    chart_samples: int = 200_000
    chart_seed: int = 0

    @classmethod
    def from_dict(cls, payload: dict) -> "EquidistributionConfig":
        got = _require_keys(
            payload,
            {
                "m": (True, None),
                "radius": (True, None),
                "s_checkpoints": (True, None),
                "n_targets": (True, None),
                "seed": (True, None),
                "chart_c": (False, None),
                "chart_samples": (False, 200_000),
                "chart_seed": (False, 0),
            },
            "equidistribution",
        )
        cfg = cls(
            m=int(got["m"]),
            radius=float(got["radius"]),
            s_checkpoints=_monotone_grid(got["s_checkpoints"], "equidistribution.s_checkpoints"),
            n_targets=int(got["n_targets"]),
            seed=int(got["seed"]),
            chart_c=got["chart_c"],
            chart_samples=int(got["chart_samples"]),
            chart_seed=int(got["chart_seed"]),
        )
        if cfg.m not in (1, 2):
            raise ConfigError(
                f"equidistribution: fast path supports m in {{1, 2}}, n = 1, got m={cfg.m!r}"
            )
        if cfg.radius <= 0:
            raise ConfigError("equidistribution: radius must be positive")
        if cfg.n_targets < 1:
            raise ConfigError("equidistribution: n_targets must be positive")
        q_top = math.exp(max(cfg.s_checkpoints) - cfg.radius)
        if q_top > 2e7:
            raise HorizonTooLarge(
                f"equidistribution: final checkpoint needs {q_top:.2g} denominators"
            )
        return cfg

    def payload(self) -> dict:
        return {
            "experiment": "equidistribution",
            "m": self.m,
            "radius": self.radius,
            "s_checkpoints": list(self.s_checkpoints),
            "n_targets": self.n_targets,
            "seed": self.seed,
            "chart_c": self.chart_c,
            "chart_samples": self.chart_samples,
            "chart_seed": self.chart_seed,
        }

    @property
    def d(self) -> int:
        return self.m + 1


@dataclass(frozen=True)
class EquidistributionResult:
    fractions: tuple
    reference_value: float
    reference_std_error: float
    csv_path: Path
    figure_path: Path


def _equidist_fractions(cfg: EquidistributionConfig) -> list[float]:
    """Fraction of targets with flow depth <= radius at each checkpoint.

    depth(g_s L_A) <= R fails exactly when some integer q in [1, e^(s-R))
    has all m coordinate distances below e^(-s/m - R); the prefix minimum
    of max-distances over q is streamed once across all checkpoints.
    """
    rng = worker_rng(cfg.seed, 0)
    targets = rng.random((cfg.n_targets, cfg.m))
    R = cfg.radius
    qs_needed = [max(0, math.ceil(math.exp(s - R)) - 1) for s in cfg.s_checkpoints]
    thresholds = [math.exp(-s / cfg.m - R) for s in cfg.s_checkpoints]
    run_min = np.full(cfg.n_targets, np.inf)
    fracs: list[float] = []
    q_done = 0
    chunk = max(1, int(2_000_000 // max(cfg.n_targets, 1)))
    for q_target, thr in zip(qs_needed, thresholds):
        while q_done < q_target:
            hi = min(q_target, q_done + chunk)
            qs = np.arange(q_done + 1, hi + 1, dtype=float)
            prod = targets[:, :, None] * qs[None, None, :]
            dist = np.abs(prod - np.round(prod)).max(axis=1)
            np.minimum(run_min, dist.min(axis=1), out=run_min)
            q_done = hi
        fracs.append(float(np.mean(run_min >= thr)))
    return fracs


def run_equidistribution(cfg: EquidistributionConfig, out_dir) -> EquidistributionResult:
    """Convergence of sublevel hit fractions along expanding flow times,
    against the exact d=2 measure or a d=3 chart estimate."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    salt = config_hash(cfg.payload())
    fracs = _equidist_fractions(cfg)
    if cfg.d == 2:
        ref, ref_se = mu2_exact(cfg.radius), 0.0
        ref_label = "exact measure"
    else:
        box = (
            chart.ChartBox(cfg.d, cfg.chart_c)
            if cfg.chart_c is not None
            else chart.ChartBox.default(cfg.d)
        )
        est = chart.estimate_sublevel_measure(
            box, cfg.radius, cfg.chart_samples, cfg.chart_seed
        )
        ref, ref_se = est.value, est.std_error
        ref_label = "chart estimate"

    header = [
        "s",
        "fraction",
        "wilson_low",
        "wilson_high",
        "n_targets",
        "reference_value",
        "reference_std_error",
        "seed",
        "config_hash",
    ]
    rows = []
    for s, f in zip(cfg.s_checkpoints, fracs):
        lo, hi = wilson_interval(int(round(f * cfg.n_targets)), cfg.n_targets)
        rows.append([s, f, lo, hi, cfg.n_targets, ref, ref_se, cfg.seed, salt])
    csv_path = out / f"equidistribution_d{cfg.d}.csv"
    _write_csv(csv_path, header, rows)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(cfg.s_checkpoints, fracs, "o-", label="hit fraction")
    ax.axhline(ref, color="k", lw=1, label=ref_label)
    if ref_se > 0:
        ax.axhspan(ref - 3 * ref_se, ref + 3 * ref_se, color="k", alpha=0.15)
    ax.set_xlabel("flow time s")
    ax.set_ylabel(f"fraction with depth <= {cfg.radius:g}")
    ax.legend()
    fig.tight_layout()
    fig_path = out / f"equidistribution_d{cfg.d}.svg"
    fig.savefig(fig_path, **_FIG_KW)
    plt.close(fig)
    return EquidistributionResult(
        fractions=tuple(zip(cfg.s_checkpoints, fracs)),
        reference_value=ref,
        reference_std_error=ref_se,
        csv_path=csv_path,
        figure_path=fig_path,
    )
