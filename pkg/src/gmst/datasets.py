"""Point clouds, CSV ingestion and synthetic manifolds with known ground truth.

The generators sample uniformly with respect to the manifold's own volume
element, so the intrinsic Renyi entropy of the sampling density is
``log(volume)`` for every order alpha.  Latent parameters are kept on the
cloud so tests can compare graph geodesics with analytic ones.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .errors import ConfigurationError, InputError, ParseError

KINDS = ("hyperplane", "hypercube", "swiss-roll", "sphere", "conformal-fishbowl")

# Swiss roll: spiral radius equals the angle, t in [1.5 pi, 4.5 pi], height in [0, 21].
SWISS_T0 = 1.5 * math.pi
SWISS_T1 = 4.5 * math.pi
SWISS_HEIGHT = 21.0

# Fishbowl: uniform disk of this radius pushed onto the unit sphere by inverse
# stereographic projection (conformal factor 2 / (1 + |x|^2)).
FISHBOWL_RADIUS = 2.0


@dataclass(frozen=True, eq=False)
class PointCloud:
    """n points in d-dimensional ambient space.

    ``params`` optionally holds latent coordinates (synthetic data only).
    Arrays are copied and frozen on construction.
    """

    points: np.ndarray
    params: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise InputError(f"points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise InputError(f"need at least 2 points, got {pts.shape[0]}")
        if pts.shape[1] < 1:
            raise InputError("points must have at least one coordinate")
        if not np.all(np.isfinite(pts)):
            raise InputError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.params is not None:
            par = np.array(self.params, dtype=np.float64, copy=True)
            if par.shape[0] != pts.shape[0]:
                raise InputError("params must have one row per point")
            par.setflags(write=False)
            object.__setattr__(self, "params", par)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_csv(path: str | Path, delimiter: str = ",") -> PointCloud:
    """Read one point per row.  A non-numeric first row is taken as a header."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from exc

    rows: list[list[float]] = []
    width = None
    with fh:
        for lineno, raw in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            fields = [t.strip() for t in raw]
            if not fields or all(t == "" for t in fields):
                continue
            if lineno == 1 and not all(_is_number(t) for t in fields):
                continue
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ParseError(f"ragged row at line {lineno}", line=lineno)
            try:
                rows.append([float(t) for t in fields])
            except ValueError:
                bad = next(t for t in fields if not _is_number(t))
                raise ParseError(
                    f"non-numeric field {bad!r} at line {lineno}", line=lineno
                ) from None

    if len(rows) < 2:
        raise InputError(f"{path}: need at least 2 points, got {len(rows)}")
    return PointCloud(np.asarray(rows))


def save_csv(cloud: PointCloud, path: str | Path, delimiter: str = ",") -> None:
    # %.17g round-trips IEEE doubles exactly
    np.savetxt(path, cloud.points, delimiter=delimiter, fmt="%.17g")


# ---------------------------------------------------------------- swiss roll


def _spiral_primitive(t):
    return 0.5 * (t * np.sqrt(1.0 + t * t) + np.arcsinh(t))


def swiss_roll_arclength(t) -> np.ndarray:
    """Arc length of the spiral (t cos t, t sin t) measured from SWISS_T0."""
    return _spiral_primitive(np.asarray(t, dtype=np.float64)) - _spiral_primitive(SWISS_T0)


SWISS_LENGTH = float(swiss_roll_arclength(SWISS_T1))
SWISS_AREA = SWISS_LENGTH * SWISS_HEIGHT


def swiss_roll_angle(s) -> np.ndarray:
    """Invert :func:`swiss_roll_arclength` by safeguarded Newton iteration."""
    s = np.asarray(s, dtype=np.float64)
    # starting point from arclength ~ (t^2 - t0^2) / 2
    t = np.sqrt(SWISS_T0**2 + 2.0 * s)
    for _ in range(50):
        step = (swiss_roll_arclength(t) - s) / np.sqrt(1.0 + t * t)
        t = np.clip(t - step, SWISS_T0, SWISS_T1)
        if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(t))):
            break
    return t


def swiss_roll_embed(params: np.ndarray) -> np.ndarray:
    s, h = params[:, 0], params[:, 1]
    t = swiss_roll_angle(s)
    return np.column_stack([t * np.cos(t), h, t * np.sin(t)])


def swiss_roll_chart(points: np.ndarray) -> np.ndarray:
    """Recover (arc length, height) from embedded swiss-roll points."""
    points = np.asarray(points, dtype=np.float64)
    t = np.hypot(points[:, 0], points[:, 2])
    return np.column_stack([swiss_roll_arclength(t), points[:, 1]])


# ---------------------------------------------------------------- generators


def _frame(m: int, d: int) -> np.ndarray:
    """Fixed orthonormal d x m frame; depends only on (m, d)."""
    rng = np.random.default_rng([0x474D5354, m, d])
    q, r = np.linalg.qr(rng.standard_normal((d, m)))
    return q * np.sign(np.diag(r))


def _sphere_volume(m: int) -> float:
    """Surface volume of the unit m-sphere embedded in R^(m+1)."""
    return math.exp(math.log(2.0) + 0.5 * (m + 1) * math.log(math.pi) - gammaln(0.5 * (m + 1)))


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str
    intrinsic_dim: int
    ambient_dim: int
    n: int
    seed: int = 0
    scale_factor: float = 1.0

    def __post_init__(self):
        m, d = self.intrinsic_dim, self.ambient_dim
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown manifold kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if not 2 <= m <= d:
            raise ConfigurationError(f"need 2 <= intrinsic_dim <= ambient_dim, got m={m}, d={d}")
        if self.n < 2:
            raise ConfigurationError(f"need n >= 2, got {self.n}")
        if not self.scale_factor > 0:
            raise ConfigurationError("scale_factor must be positive")
        if self.kind == "swiss-roll" and (m != 2 or d < 3):
            raise ConfigurationError("swiss-roll requires m=2 and d>=3")
        if self.kind in ("sphere", "conformal-fishbowl") and d < m + 1:
            raise ConfigurationError(f"{self.kind} requires d >= m+1")

    @property
    def isometric(self) -> bool:
        return self.kind in ("hyperplane", "hypercube", "swiss-roll")

    @property
    def ground_truth_entropy(self) -> float | None:
        """Renyi entropy (nats, any alpha) of the intrinsic sampling density.

        None for the fishbowl, whose pushed-forward density is not uniform.
        """
        m = self.intrinsic_dim
        if self.kind in ("hyperplane", "hypercube"):
            vol = 0.0
        elif self.kind == "swiss-roll":
            vol = math.log(SWISS_AREA)
        elif self.kind == "sphere":
            vol = math.log(_sphere_volume(m))
        else:
            return None
        return vol + m * math.log(self.scale_factor)


def generate(spec: SyntheticSpec) -> PointCloud:
    """Sample ``spec.n`` points on the manifold; deterministic in ``spec.seed``.

    Latent parameters: unit-cube coordinates (hyperplane, hypercube),
    (arc length, height) (swiss-roll), unit-sphere coordinates (sphere) and
    disk coordinates (conformal-fishbowl).
    """
    rng = np.random.default_rng(spec.seed)
    m, d, n = spec.intrinsic_dim, spec.ambient_dim, spec.n

    if spec.kind == "hypercube":
        params = rng.random((n, m))
        emb = params
    elif spec.kind == "hyperplane":
        params = rng.random((n, m))
        emb = params @ _frame(m, d).T
    elif spec.kind == "swiss-roll":
        params = np.column_stack([rng.random(n) * SWISS_LENGTH, rng.random(n) * SWISS_HEIGHT])
        emb = swiss_roll_embed(params)
    elif spec.kind == "sphere":
        g = rng.standard_normal((n, m + 1))
        params = g / np.linalg.norm(g, axis=1, keepdims=True)
        emb = params
    else:  # conformal-fishbowl
        g = rng.standard_normal((n, m))
        direction = g / np.linalg.norm(g, axis=1, keepdims=True)
        radius = FISHBOWL_RADIUS * rng.random(n) ** (1.0 / m)
        params = direction * radius[:, None]
        sq = np.sum(params**2, axis=1, keepdims=True)
        emb = np.hstack([2.0 * params, sq - 1.0]) / (1.0 + sq)

    if emb.shape[1] < d:
        emb = np.hstack([emb, np.zeros((n, d - emb.shape[1]))])
    if spec.scale_factor != 1.0:
        emb = emb * spec.scale_factor
    return PointCloud(emb, params=params)


def fishbowl_conformal_factor(params: np.ndarray) -> np.ndarray:
    """Local length scale c(x) = 2 / (1 + |x|^2) of the fishbowl embedding."""
    return 2.0 / (1.0 + np.sum(np.asarray(params) ** 2, axis=1))


def analytic_geodesic(spec: SyntheticSpec, params_a: np.ndarray, params_b: np.ndarray) -> np.ndarray:
    """True manifold distance between rows of two latent-parameter arrays."""
    a = np.atleast_2d(params_a)
    b = np.atleast_2d(params_b)
    if spec.isometric:
        dist = np.linalg.norm(a - b, axis=1)
    elif spec.kind == "sphere":
        dist = _great_circle(a, b)
    else:
        sa = np.sum(a**2, axis=1, keepdims=True)
        sb = np.sum(b**2, axis=1, keepdims=True)
        ya = np.hstack([2.0 * a, sa - 1.0]) / (1.0 + sa)
        yb = np.hstack([2.0 * b, sb - 1.0]) / (1.0 + sb)
        dist = _great_circle(ya, yb)
    return dist * spec.scale_factor


def _great_circle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # chord form stays accurate for nearby points, unlike arccos of the dot product
    chord = np.linalg.norm(a - b, axis=1)
    return 2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0))
