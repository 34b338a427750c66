"""Seeded synthetic samplers, closed-form transport maps, and point-cloud IO.

The synthetic benchmarks follow the standard construction: draw the source
uniformly on a hypercube, push it through a coordinate-wise strictly
increasing scalar map.  Such a map is the gradient of a separable convex
potential, hence the quadratic-cost optimal transport map onto its own
push-forward, which gives benchmarks with known ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .seeding import pinned_rng

CSV_FLOAT_FORMAT = "%.17g"  # enough digits for an exact decimal round trip


@dataclass
class SourceSpec:
    """What to sample: a cube, the two-moons cloud, or an external CSV file.

    For two moons, ``moons`` selects the upper arc, the lower arc, or both
    interleaved; the lower arc is the upper one point-reflected through
    ``lower_offset``.  The whole construction is translated by a fixed,
    geometry-derived center (half the offset) and, when needed, scaled by
    a fixed factor so the noiseless arcs fit inside [-1.5, 1.5]^2.
    """

    kind: str  # uniform_cube | two_moons | csv_file
    dim: int = 2
    half_width: float = 1.0
    noise: float = 0.05
    radius: float = 1.0
    lower_offset: tuple[float, float] = (1.0, 0.5)
    moons: str = "both"  # both | upper | lower
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("uniform_cube", "two_moons", "csv_file"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.kind == "two_moons" and self.dim != 2:
            raise ValueError("two_moons is a planar dataset (dim must be 2)")
        if self.kind == "two_moons" and self.moons not in ("both", "upper", "lower"):
            raise ValueError(f"moons must be both/upper/lower, got {self.moons!r}")
        if self.kind == "csv_file" and not self.path:
            raise ValueError("csv_file source needs a path")


def two_moons_frame(spec: SourceSpec) -> tuple[np.ndarray, float]:
    """Fixed (center, scale) normalizing the noiseless arcs into [-1.5, 1.5]^2."""
    ox, oy = spec.lower_offset
    r = spec.radius
    center = np.array([ox / 2.0, oy / 2.0])
    corners = np.array(
        [
            [-r, 0.0], [r, r],  # upper arc bounding box
            [ox - r, oy - r], [ox + r, oy],  # lower arc bounding box
        ]
    )
    extent = np.abs(corners - center).max()
    scale = 1.0 if extent <= 1.5 else 1.5 / extent
    return center, scale


def _sample_two_moons(spec: SourceSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if spec.moons == "both":
        n_upper = (n + 1) // 2
    elif spec.moons == "upper":
        n_upper = n
    else:
        n_upper = 0
    t = rng.uniform(0.0, np.pi, size=n)
    arc = spec.radius * np.column_stack([np.cos(t), np.sin(t)])
    pts = np.empty((n, 2))
    pts[:n_upper] = arc[:n_upper]
    pts[n_upper:] = np.asarray(spec.lower_offset) - arc[n_upper:]
    if spec.noise > 0:
        pts += rng.normal(0.0, spec.noise, size=pts.shape)
    center, scale = two_moons_frame(spec)
    return (pts - center) * scale


def sample(spec: SourceSpec, n: int, seed: int) -> np.ndarray:
    """Draw n points; deterministic for a fixed (spec, n, seed)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = pinned_rng(seed)
    if spec.kind == "uniform_cube":
        return rng.uniform(-spec.half_width, spec.half_width, size=(n, spec.dim))
    if spec.kind == "two_moons":
        return _sample_two_moons(spec, n, rng)
    cloud = load_csv(spec.path)
    if cloud.shape[0] < n:
        raise DataError(f"{spec.path}: has {cloud.shape[0]} points, asked for {n}")
    return cloud[:n]


@dataclass
class GroundTruthMap:
    """A coordinate-wise strictly increasing map with a closed form.

    ``table`` interpolates linearly through strictly increasing knots,
    which keeps the McCann optimality argument intact for custom maps.
    """

    kind: str  # coordwise_exp | coordwise_signed_square | table
    knots_x: np.ndarray | None = None
    knots_y: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("coordwise_exp", "coordwise_signed_square", "table"):
            raise ValueError(f"unknown map kind {self.kind!r}")
        if self.kind == "table":
            if self.knots_x is None or self.knots_y is None:
                raise ValueError("table map needs knot arrays")
            self.knots_x = np.asarray(self.knots_x, dtype=np.float64)
            self.knots_y = np.asarray(self.knots_y, dtype=np.float64)
            if self.knots_x.size < 2:
                raise ValueError("table map needs at least two knots")
            if self.knots_x.shape != self.knots_y.shape:
                raise ValueError("knot arrays must have equal length")
            if not (np.diff(self.knots_x) > 0).all() or not (np.diff(self.knots_y) > 0).all():
                raise ValueError("table knots must be strictly increasing in x and y")


def scalar_map(gt: GroundTruthMap, t: np.ndarray) -> np.ndarray:
    """The underlying scalar function, applied elementwise."""
    t = np.asarray(t, dtype=np.float64)
    if gt.kind == "coordwise_exp":
        return (np.exp(t) - 1.18) / 1.18
    if gt.kind == "coordwise_signed_square":
        return t * np.abs(t)
    return np.interp(t, gt.knots_x, gt.knots_y)


def ground_truth_value(gt: GroundTruthMap, x: np.ndarray) -> np.ndarray:
    """Evaluate the map at a single point or a batch of rows."""
    return scalar_map(gt, x)


def apply_map(gt: GroundTruthMap, cloud: np.ndarray) -> np.ndarray:
    """Push a whole cloud through the map, point by point."""
    cloud = np.asarray(cloud, dtype=np.float64)
    return scalar_map(gt, cloud)


def make_map(kind: str) -> GroundTruthMap:
    if kind == "identity":
        return GroundTruthMap("table", knots_x=[-100.0, 100.0], knots_y=[-100.0, 100.0])
    return GroundTruthMap(kind)


def load_csv(path) -> np.ndarray:
    """One point per comma-separated row; '#' lines are comments."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = line.split(",")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: non-numeric cell") from exc
        if len(rows[-1]) != len(rows[0]):
            raise DataError(
                f"{path}:{lineno}: row has {len(rows[-1])} cells, expected {len(rows[0])}"
            )
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def save_csv(cloud: np.ndarray, path, seed: int | None = None) -> None:
    cloud = np.asarray(cloud, dtype=np.float64)
    header = f"# dim={cloud.shape[1]} n={cloud.shape[0]}"
    if seed is not None:
        header += f" seed={seed}"
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for row in cloud:
            fh.write(",".join(CSV_FLOAT_FORMAT % v for v in row) + "\n")
