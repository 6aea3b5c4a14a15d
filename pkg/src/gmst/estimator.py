"""Resampled GMST growth curves and the method-of-moments inversion.

The mean tree length over random p-subsets obeys, for large p,

    log L_p ~ a log p + b,   a = (m - gamma) / m,   b = log beta_m + (gamma / m) H

so a least-squares line through (log p, log mean L_p) yields the intrinsic
dimension from the slope and the intrinsic Renyi entropy of order
alpha = (m - gamma) / m from the intercept.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .datasets import PointCloud
from .errors import (
    ConfigurationError,
    DegenerateSlopeError,
    DisconnectedGraphError,
    IllPosedSlopeError,
    InputError,
)
from .geodesics import GeodesicEdgeMatrix, all_pairs_geodesics, restrict
from .mst import estimate_beta, gmst_length
from .neighborhood import NeighborRule, build_graph, rescale_conformal

BETA_MODES = ("approx", "montecarlo", "table")
LOG_BASES = {"e": ("nats", 1.0), "2": ("bits", math.log(2.0))}
DISCONNECT_POLICIES = ("fail", "largest_component")

# Monte Carlo calibration of beta_m
BETA_MC_N = 2048
BETA_MC_TRIALS = 32
BETA_MC_SEED = 0

SMALL_SAMPLE = 50


def size_grid(lo: int, hi: int, count: int, spacing: str = "linear") -> tuple[int, ...]:
    """``count`` integer sizes from lo to hi inclusive (duplicates after
    rounding are dropped)."""
    if count < 2 or lo < 2 or hi <= lo:
        raise ConfigurationError(f"bad size range {lo}:{hi}:{count}")
    if spacing == "linear":
        raw = np.linspace(lo, hi, count)
    elif spacing == "log":
        raw = np.geomspace(lo, hi, count)
    else:
        raise ConfigurationError(f"unknown spacing {spacing!r}")
    return tuple(sorted(set(int(v) for v in np.rint(raw))))


@dataclass(frozen=True)
class ResamplingPlan:
    """Subset sizes p_1 < ... < p_Q, N trials per size, and the regression window.

    ``fit_window`` lists the sizes used by the line fit; when omitted the
    largest ``fit_fraction`` of the sizes are used (at least two).
    """

    sizes: tuple[int, ...]
    trials: int = 25
    seed: int = 0
    gamma: float = 1.0
    fit_window: tuple[int, ...] | None = None
    fit_fraction: float = 0.5

    def __post_init__(self):
        sizes = tuple(int(p) for p in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 2:
            raise ConfigurationError("need at least two subset sizes")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigurationError("subset sizes must be strictly increasing")
        if sizes[0] < 2:
            raise ConfigurationError("subset sizes must be >= 2")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not self.gamma > 0:
            raise ConfigurationError("gamma must be positive")
        if not 0 < self.fit_fraction <= 1:
            raise ConfigurationError("fit fraction must lie in (0, 1]")
        if self.fit_window is not None:
            win = tuple(sorted(int(p) for p in self.fit_window))
            object.__setattr__(self, "fit_window", win)
            missing = set(win) - set(sizes)
            if missing:
                raise ConfigurationError(f"fit window sizes {sorted(missing)} are not in the plan")
        if len(self.fit_sizes()) < 2:
            raise ConfigurationError("fit window must contain at least two sizes")

    def fit_sizes(self) -> tuple[int, ...]:
        if self.fit_window is not None:
            return self.fit_window
        count = max(2, math.ceil(self.fit_fraction * len(self.sizes)))
        return self.sizes[-count:]

    def check(self, n: int) -> None:
        if self.sizes[-1] > n:
            raise ConfigurationError(f"largest subset size {self.sizes[-1]} exceeds the {n} available points")


@dataclass(frozen=True)
class GrowthEntry:
    p: int
    mean_length: float
    std_length: float
    trial_lengths: tuple[float, ...]


@dataclass(frozen=True)
class GrowthCurve:
    entries: tuple[GrowthEntry, ...]
    gamma: float = 1.0

    @property
    def sizes(self) -> np.ndarray:
        return np.array([e.p for e in self.entries])

    @property
    def means(self) -> np.ndarray:
        return np.array([e.mean_length for e in self.entries])

    def write_summary_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "mean", "std"])
            for e in self.entries:
                w.writerow([e.p, repr(e.mean_length), repr(e.std_length)])

    def write_trials_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "trial", "length"])
            for e in self.entries:
                for t, v in enumerate(e.trial_lengths):
                    w.writerow([e.p, t, repr(v)])


def _entry(p: int, lengths: list[float]) -> GrowthEntry:
    # exact (rational) mean and deviation: order-free and exactly zero spread
    # for identical trials
    std = statistics.stdev(lengths) if len(lengths) > 1 else 0.0
    return GrowthEntry(p, float(statistics.mean(lengths)), float(std), tuple(lengths))


def subset_indices(n: int, p: int, seed: int, trial: int) -> np.ndarray:
    """p distinct indices for one trial; the stream depends on (seed, p, trial) only."""
    return np.random.default_rng([seed, p, trial]).choice(n, size=p, replace=False)


def _run_trials(plan: ResamplingPlan, n: int, length_of, threads: int) -> GrowthCurve:
    plan.check(n)
    tasks = [(p, t) for p in plan.sizes for t in range(plan.trials)]

    def one(task):
        p, t = task
        return length_of(subset_indices(n, p, plan.seed, t))

    if threads == 1:
        lengths = [one(task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads or None) as pool:
            lengths = list(pool.map(one, tasks))
    entries = []
    for q, p in enumerate(plan.sizes):
        entries.append(_entry(p, lengths[q * plan.trials : (q + 1) * plan.trials]))
    return GrowthCurve(tuple(entries), plan.gamma)


def growth_curve(matrix: GeodesicEdgeMatrix, plan: ResamplingPlan, threads: int = 1) -> GrowthCurve:
    """Mean GMST length over ``plan.trials`` random subsets of each size,
    read off the full-data geodesic matrix."""
    if not matrix.connected:
        raise DisconnectedGraphError(
            f"geodesic matrix has {matrix.component_sizes().size} components; "
            "use the largest_component policy or a larger k / epsilon"
        )
    return _run_trials(plan, matrix.n, lambda idx: gmst_length(matrix, plan.gamma, indices=idx).total_length, threads)


def growth_curve_per_subset(
    cloud: PointCloud, rule: NeighborRule, conformal: bool, plan: ResamplingPlan, threads: int = 1
) -> GrowthCurve:
    """Variant that rebuilds the neighborhood graph on every subset."""

    def length_of(idx):
        sub = PointCloud(cloud.points[idx])
        g = build_graph(sub, rule)
        if conformal:
            g = rescale_conformal(g)
        geo = all_pairs_geodesics(g)
        if not geo.connected:
            raise DisconnectedGraphError(f"neighborhood graph of a {len(idx)}-point subset is disconnected")
        return gmst_length(geo, plan.gamma).total_length

    return _run_trials(plan, cloud.n, length_of, threads)


@dataclass(frozen=True)
class LinearFit:
    a_hat: float
    b_hat: float
    residuals: tuple[float, ...]
    r_squared: float
    sizes: tuple[int, ...]


def fit_loglinear(curve: GrowthCurve, window=None) -> LinearFit:
    """Ordinary least squares of log(mean length) on log(p), with intercept."""
    entries = curve.entries
    if window is not None:
        wanted = set(int(p) for p in window)
        entries = tuple(e for e in entries if e.p in wanted)
        if len(entries) != len(wanted):
            raise ConfigurationError("fit window contains sizes absent from the curve")
    p = np.array([e.p for e in entries], dtype=np.float64)
    y = np.array([e.mean_length for e in entries], dtype=np.float64)
    if len(np.unique(p)) < 2:
        raise ConfigurationError("line fit needs at least two distinct subset sizes")
    if not np.all(y > 0):
        raise InputError("mean lengths must be positive to take logarithms")
    x, ly = np.log(p), np.log(y)
    design = np.column_stack([x, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(design, ly, rcond=None)
    res = ly - (a * x + b)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res**2)) / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(a), float(b), tuple(res.tolist()), r2, tuple(int(v) for v in p))


# ------------------------------------------------------------------ beta_m


def approx_beta(m: int, gamma: float = 1.0) -> float:
    """Large-m approximation log beta_m ~ (gamma / 2) log(m / (2 pi e))."""
    if m < 2 or not gamma > 0:
        raise ConfigurationError(f"need m >= 2 and gamma > 0, got m={m}, gamma={gamma}")
    return math.exp(0.5 * gamma * math.log(m / (2.0 * math.pi * math.e)))


@lru_cache(maxsize=None)
def _montecarlo_beta(m: int, gamma: float, n: int, trials: int, seed: int) -> float:
    return estimate_beta(m, gamma, n=n, trials=trials, seed=seed)[0]


def read_beta_table(path=None) -> list[dict]:
    """Rows of a "m,gamma,n,beta_hat,stderr" CSV (bundled table by default)."""
    if path is None:
        text = resources.files("gmst").joinpath("data/beta_table.csv").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"cannot read beta table {path}: {exc.strerror}") from exc
    rows = []
    for row in csv.DictReader(text.splitlines()):
        try:
            rows.append(
                {
                    "m": int(row["m"]),
                    "gamma": float(row["gamma"]),
                    "n": int(row["n"]),
                    "beta_hat": float(row["beta_hat"]),
                    "stderr": float(row["stderr"]),
                }
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed beta table row {row}") from exc
    return rows


def write_beta_table(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "gamma", "n", "beta_hat", "stderr"])
        for r in rows:
            w.writerow([r["m"], repr(float(r["gamma"])), r["n"], repr(r["beta_hat"]), repr(r["stderr"])])


def resolve_beta(m: int, gamma: float, mode: str = "montecarlo", table=None) -> float:
    if mode == "approx":
        return approx_beta(m, gamma)
    if mode == "montecarlo":
        return _montecarlo_beta(m, float(gamma), BETA_MC_N, BETA_MC_TRIALS, BETA_MC_SEED)
    if mode == "table":
        rows = [r for r in read_beta_table(table) if r["m"] == m and math.isclose(r["gamma"], gamma)]
        if not rows:
            raise ConfigurationError(f"beta table has no entry for m={m}, gamma={gamma}")
        return max(rows, key=lambda r: r["n"])["beta_hat"]
    raise ConfigurationError(f"unknown beta mode {mode!r}")


# --------------------------------------------------------------- estimates


@dataclass
class EstimateReport:
    m_hat: int
    m_raw: float
    alpha: float
    entropy_hat: float
    entropy_unit: str
    beta_mode: str
    beta_value_used: float
    fit: LinearFit
    curve: GrowthCurve
    config: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["curve"] = {
            "gamma": self.curve.gamma,
            "entries": [
                {"p": e.p, "mean": e.mean_length, "std": e.std_length, "trials": list(e.trial_lengths)}
                for e in self.curve.entries
            ],
        }
        d["fit"] = {**asdict(self.fit), "residuals": list(self.fit.residuals), "sizes": list(self.fit.sizes)}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def to_text(self) -> str:
        """One ``key: value`` pair per line; see :func:`parse_report_text`."""
        lines = ["# GMST intrinsic dimension / entropy report"]
        add = lambda k, v: lines.append(f"{k}: {_fmt(v)}")  # noqa: E731
        for k in ("m_hat", "m_raw", "alpha", "entropy_hat", "entropy_unit", "beta_mode", "beta_value_used"):
            add(k, getattr(self, k))
        for k in ("a_hat", "b_hat", "r_squared"):
            add(f"fit.{k}", getattr(self.fit, k))
        add("fit.sizes", list(self.fit.sizes))
        add("fit.residuals", list(self.fit.residuals))
        add("curve.gamma", self.curve.gamma)
        for e in self.curve.entries:
            add(f"curve.{e.p}.mean", e.mean_length)
            add(f"curve.{e.p}.std", e.std_length)
            add(f"curve.{e.p}.trials", list(e.trial_lengths))
        for k, v in self.config.items():
            add(f"config.{k}", v)
        for i, w in enumerate(self.warnings):
            add(f"warning.{i}", w)
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def parse_report_text(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(": ")
        out[key] = value
    return out


def invert_slope(a_hat: float, gamma: float, rounding: str = "nearest") -> tuple[int, float]:
    """Dimension from the fitted slope: round(gamma / (1 - a_hat)).

    Returns (m_hat before clamping, raw ratio).
    """
    if not math.isfinite(a_hat):
        raise DegenerateSlopeError(f"fitted slope is not finite ({a_hat})")
    if a_hat >= 1.0:
        raise IllPosedSlopeError(f"fitted slope a_hat={a_hat:.4g} >= 1: dimension estimate diverges")
    if a_hat <= 0.0:
        raise DegenerateSlopeError(f"fitted slope a_hat={a_hat:.4g} <= 0: lengths do not grow with sample size")
    raw = gamma / (1.0 - a_hat)
    if rounding == "nearest":
        m = math.floor(raw + 0.5)
    elif rounding == "floor":
        m = math.floor(raw)
    else:
        raise ConfigurationError(f"unknown rounding {rounding!r}")
    return int(m), raw


def estimate(
    curve: GrowthCurve,
    fit: LinearFit,
    gamma: float = 1.0,
    beta_mode: str = "montecarlo",
    log_base: str = "e",
    *,
    rounding: str = "nearest",
    beta_table=None,
    config: dict | None = None,
    warnings: list[str] | None = None,
) -> EstimateReport:
    """Invert the fitted (slope, intercept) into (dimension, entropy)."""
    if log_base not in LOG_BASES:
        raise ConfigurationError(f"log base must be one of {sorted(LOG_BASES)}")
    warnings = list(warnings or [])
    m_hat, raw = invert_slope(fit.a_hat, gamma, rounding)
    m_min = max(2, math.floor(gamma) + 1)
    if m_hat < m_min:
        warnings.append(f"dimension estimate {raw:.3f} clamped to {m_min} (needs m > gamma and m >= 2)")
        m_hat = m_min
    alpha = (m_hat - gamma) / m_hat
    beta = resolve_beta(m_hat, gamma, beta_mode, beta_table)
    h_nats = (m_hat / gamma) * (fit.b_hat - math.log(beta))
    unit, scale = LOG_BASES[log_base]
    config = dict(config or {})
    config.setdefault("gamma", gamma)
    config.setdefault("beta_mode", beta_mode)
    config.setdefault("log_base", log_base)
    config.setdefault("rounding", rounding)
    if beta_mode == "montecarlo":
        config.setdefault("beta_mc", f"n={BETA_MC_N},trials={BETA_MC_TRIALS},seed={BETA_MC_SEED}")
    elif beta_mode == "table":
        config.setdefault("beta_table", str(beta_table) if beta_table else "bundled")
    return EstimateReport(
        m_hat=m_hat,
        m_raw=raw,
        alpha=alpha,
        entropy_hat=h_nats / scale,
        entropy_unit=unit,
        beta_mode=beta_mode,
        beta_value_used=beta,
        fit=fit,
        curve=curve,
        config=config,
        warnings=warnings,
    )


def run_pipeline(
    cloud: PointCloud,
    rule: NeighborRule,
    plan: ResamplingPlan,
    *,
    conformal: bool = False,
    beta_mode: str = "montecarlo",
    log_base: str = "e",
    disconnect_policy: str = "fail",
    rounding: str = "nearest",
    per_subset_graph: bool = False,
    beta_table=None,
    fast_neighbors: bool = False,
    threads: int = 1,
    extra_config: dict | None = None,
) -> EstimateReport:
    """Neighborhood graph -> (conformal rescaling) -> geodesics -> growth
    curve -> line fit -> dimension and entropy."""
    if disconnect_policy not in DISCONNECT_POLICIES:
        raise ConfigurationError(f"disconnect policy must be one of {DISCONNECT_POLICIES}")
    warnings: list[str] = []
    config = {
        "n": cloud.n,
        "d": cloud.d,
        "rule": str(rule),
        "conformal": conformal,
        "gamma": plan.gamma,
        "sizes": list(plan.sizes),
        "trials": plan.trials,
        "seed": plan.seed,
        "fit_sizes": list(plan.fit_sizes()),
        "beta_mode": beta_mode,
        "log_base": log_base,
        "disconnect_policy": disconnect_policy,
        "rounding": rounding,
        "per_subset_graph": per_subset_graph,
    }
    config.update(extra_config or {})

    graph = build_graph(cloud, rule, fast=fast_neighbors)
    if graph.diagnostics["zero_weight_edges"]:
        warnings.append(f"{graph.diagnostics['zero_weight_edges']} zero-length edges (duplicate points)")
    if conformal:
        graph = rescale_conformal(graph)
        warnings.append("conformal rescaling: entropy is determined only up to an additive constant")
    geo = all_pairs_geodesics(graph)

    if per_subset_graph:
        if not geo.connected:
            raise DisconnectedGraphError("neighborhood graph is disconnected; per-subset graphs need connected data")
        plan.check(cloud.n)
        curve = growth_curve_per_subset(cloud, rule, conformal, plan, threads)
    else:
        if not geo.connected:
            if disconnect_policy == "fail":
                sizes = geo.component_sizes()
                raise DisconnectedGraphError(
                    f"neighborhood graph has {len(sizes)} components (largest {sizes.max()} of {cloud.n}); "
                    "use the largest_component policy or a larger k / epsilon"
                )
            keep = geo.largest_component()
            geo = restrict(geo, keep)
            warnings.append(
                f"graph disconnected: kept largest component, {len(keep)} of {cloud.n} points "
                f"({len(keep) / cloud.n:.3f})"
            )
        curve = growth_curve(geo, plan, threads)

    if plan.sizes[-1] < SMALL_SAMPLE or len(plan.fit_sizes()) < 3:
        warnings.append(
            f"small sample: largest subset {plan.sizes[-1]}, {len(plan.fit_sizes())} fitted sizes; "
            "the log-linear model holds only for large subsets"
        )
    fit = fit_loglinear(curve, plan.fit_sizes())
    return estimate(
        curve,
        fit,
        plan.gamma,
        beta_mode,
        log_base,
        rounding=rounding,
        beta_table=beta_table,
        config=config,
        warnings=warnings,
    )
