"""Labeled fractal distributions: approximation curves, samplers and dataset files.

Positives are uniform on the margin set ``K_n^gamma``.  Negatives pick a
level ``j`` with probability ``p_j`` and are uniform on the gap
``K_{j-1} \\ K_j`` (or only on the central gap of each level-(j-1) cell).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ifs import (
    TAU_GEOM,
    IndexOutOfRange,
    IteratedFunctionSystem,
    MarginTooLarge,
    builtin_ifs,
    membership,
    min_cell_inradius,
)

REJECTION_BUDGET = 10**6


class UnknownPreset(ValueError):
    pass


class RejectionBudgetExceeded(RuntimeError):
    pass


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class ApproximationCurve:
    """Negative mass per gap level; ``level_weights[j-1]`` is ``p_j``."""

    level_weights: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.level_weights)
        if not w:
            raise ValueError("a curve needs at least one level")
        if min(w) < 0:
            raise ValueError("level weights must be nonnegative")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ValueError(f"level weights sum to {sum(w)!r}, not 1")
        object.__setattr__(self, "level_weights", w)

    @property
    def n(self) -> int:
        return len(self.level_weights)

    @classmethod
    def from_P(cls, values: Sequence[float]) -> "ApproximationCurve":
        """Build from ``P(1), ..., P(n)`` using ``p_j = 2 (P(j) - P(j-1))``."""
        P = np.concatenate([[0.5], np.asarray(values, dtype=float)])
        p = 2 * np.diff(P)
        p[np.abs(p) < 1e-15] = 0.0
        # the plotted tables round the last digit; renormalise the remainder
        return cls(tuple(p / p.sum()))

    def P(self, j: int) -> float:
        return curve_P(self, j)

    def P_values(self) -> np.ndarray:
        return 0.5 + 0.5 * np.concatenate([[0.0], np.cumsum(self.level_weights)])


def curve_P(curve: ApproximationCurve, j: int) -> float:
    if not 0 <= j <= curve.n:
        raise IndexOutOfRange(f"level {j} outside 0..{curve.n}")
    if j == curve.n:
        return 1.0
    return 0.5 + 0.5 * float(sum(curve.level_weights[:j]))


# P(1..5) for the six plotted curves
_PRESET_P = {
    1: (0.629449436703876, 0.742141716744801, 0.840246044613553, 0.925650822501483, 1.0),
    2: (0.5, 0.5, 0.7062994740159, 0.870039475052563, 1.0),
    3: (0.5, 0.5, 0.5, 0.792893218813452, 1.0),
    4: (0.500156631162693, 0.505155895716397, 0.542312339311059, 0.684241121587126, 1.0),
    5: (0.500000310068408, 0.500159052467644, 0.506242576182648, 0.583822107898522, 1.0),
    6: (0.5, 0.5, 0.5, 0.5, 1.0),
}


def preset_curve(curve_id: int, n: int = 5) -> ApproximationCurve:
    if curve_id not in _PRESET_P:
        raise UnknownPreset(f"no preset curve #{curve_id}; choose 1..6")
    if n != 5:
        raise UnknownPreset("preset curves are defined for n=5 only; use coarse_curve or fine_curve")
    return ApproximationCurve.from_P(_PRESET_P[curve_id])


def coarse_curve(n: int) -> ApproximationCurve:
    """Geometric weights ``p_j ∝ 2^(-j/n)``; preset #1 is the case n=5."""
    w = 2.0 ** (-np.arange(1, n + 1) / n)
    return ApproximationCurve(tuple(w / w.sum()))


def fine_curve(n: int) -> ApproximationCurve:
    """All negative mass on the deepest gap level."""
    w = np.zeros(n)
    w[-1] = 1.0
    return ApproximationCurve(tuple(w))


class GapStyle(enum.Enum):
    FULL_COMPLEMENT = "full"
    CENTRAL_GAP = "central"


@dataclass(frozen=True)
class FractalDistribution:
    ifs: IteratedFunctionSystem
    depth: int
    margin: float
    curve: ApproximationCurve
    gap_style: GapStyle = GapStyle.FULL_COMPLEMENT

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.curve.n != self.depth:
            raise ValueError(f"curve has {self.curve.n} levels but depth is {self.depth}")
        cap = min_cell_inradius(self.ifs, self.depth) * self.ifs.scale
        if not 0 < self.margin < cap:
            raise MarginTooLarge(f"margin {self.margin} must lie in (0, {cap})")
        if self.gap_style is GapStyle.CENTRAL_GAP and self.ifs.central_gap is None:
            raise ValueError(f"{self.ifs.name!r} has no designated central gap")

    @property
    def dim(self) -> int:
        return self.ifs.dim


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.y)

    def __eq__(self, other):
        return (isinstance(other, Dataset) and self.X.shape == other.X.shape
                and np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y))


def _cell_maps(ifs, index):
    """Matrices and offsets (unit coordinates) of the cells addressed by ``index`` (0-based)."""
    m, depth = index.shape
    A = np.broadcast_to(np.eye(ifs.dim), (m, ifs.dim, ifs.dim)).copy()
    b = np.zeros((m, ifs.dim))
    for level in range(depth):
        Mi = ifs._M[index[:, level]]
        vi = ifs._v[index[:, level]]
        b = b + np.einsum("mij,mj->mi", A, vi)
        A = np.einsum("mij,mjk->mik", A, Mi)
    return A, b


def _random_addresses(ifs, rng, count, depth):
    return rng.choice(ifs.r, size=(count, depth), p=ifs.det_weights)


def sample_positive(dist: FractalDistribution, rng, size: int | None = None):
    """Uniform draws from ``K_n^gamma`` (one point, or ``size`` points)."""
    count = 1 if size is None else size
    ifs = dist.ifs
    index = _random_addresses(ifs, rng, count, dist.depth)
    A, b = _cell_maps(ifs, index)
    # margin in cell-local coordinates, per axis
    rows = np.linalg.norm(np.linalg.inv(A), axis=2)
    g = dist.margin / ifs.scale
    shrink = g * rows
    U = shrink + (1 - 2 * shrink) * rng.random((count, ifs.dim))
    X = ifs.from_unit(np.einsum("mij,mj->mi", A, U) + b)
    return X[0] if size is None else X


def _gap_proposals(dist, rng, count):
    lo, hi = (np.zeros(dist.dim), np.ones(dist.dim))
    if dist.gap_style is GapStyle.CENTRAL_GAP:
        lo, hi = dist.ifs.central_gap
    return lo + (hi - lo) * rng.random((count, dist.dim))


def sample_negative(dist: FractalDistribution, rng, size: int | None = None,
                    level: int | None = None):
    """Draws from the negative part; ``level`` pins the gap level instead of drawing it."""
    count = 1 if size is None else size
    ifs = dist.ifs
    p = np.asarray(dist.curve.level_weights)
    if level is None:
        levels = rng.choice(dist.depth, size=count, p=p) + 1
    else:
        if not 1 <= level <= dist.depth:
            raise ValueError(f"gap level {level} outside 1..{dist.depth}")
        levels = np.full(count, level)
    local = np.empty((count, ifs.dim))
    todo = np.arange(count)
    proposals = 0
    while todo.size:
        U = _gap_proposals(dist, rng, todo.size)
        ok = ~membership(ifs, ifs.from_unit(U), 1, tol=2 * TAU_GEOM)
        local[todo[ok]] = U[ok]
        todo = todo[~ok]
        proposals += U.shape[0]
        if todo.size and proposals > REJECTION_BUDGET * count:
            raise RejectionBudgetExceeded("gap region is too thin to sample")
    X = np.empty((count, ifs.dim))
    for j in np.unique(levels):
        sel = np.flatnonzero(levels == j)
        index = _random_addresses(ifs, rng, sel.size, j - 1)
        A, b = _cell_maps(ifs, index)
        X[sel] = ifs.from_unit(np.einsum("mij,mj->mi", A, local[sel]) + b)
    return X[0] if size is None else X


def sample_dataset(dist: FractalDistribution, m: int, seed: int) -> Dataset:
    if m < 1:
        raise ValueError("a dataset needs at least one sample")
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(m) < 0.5, 1, -1)
    X = np.empty((m, dist.dim))
    pos = y == 1
    if pos.any():
        X[pos] = sample_positive(dist, rng, int(pos.sum()))
    if (~pos).any():
        X[~pos] = sample_negative(dist, rng, int((~pos).sum()))
    meta = {
        "ifs": dist.ifs.name,
        "n": dist.depth,
        "gamma": dist.margin,
        "curve": list(dist.curve.level_weights),
        "gap_style": dist.gap_style.value,
        "seed": seed,
        "m": m,
    }
    return Dataset(X, y, meta)


def empirical_P(ifs: IteratedFunctionSystem, data: Dataset, j: int) -> float:
    """Fraction of samples with ``x`` outside ``K_j`` or ``y = 1``."""
    inside = membership(ifs, data.X, j)
    return float(np.mean(~inside | (data.y == 1)))


def distribution_from_meta(meta: dict) -> FractalDistribution:
    return FractalDistribution(builtin_ifs(meta["ifs"]), int(meta["n"]), float(meta["gamma"]),
                               ApproximationCurve(tuple(meta["curve"])),
                               GapStyle(meta.get("gap_style", "full")))


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_dataset(data: Dataset, path) -> None:
    path = Path(path)
    d = data.X.shape[1]
    lines = [",".join([f"x{i}" for i in range(1, d + 1)] + ["y"])]
    for x, y in zip(data.X, data.y):
        lines.append(",".join([_fmt(v) for v in x] + [str(int(y))]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if data.meta:
        write_keyvalue(data.meta, meta_path(path))


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def read_dataset(path) -> Dataset:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    header = lines[0].strip().split(",")
    d = len(header) - 1
    if d < 1 or header != [f"x{i}" for i in range(1, d + 1)] + ["y"]:
        raise ParseError(f"bad header {lines[0]!r}", 1)
    X, y = [], []
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != d + 1:
            raise ParseError(f"expected {d + 1} fields, got {len(parts)}", k)
        try:
            X.append([float(v) for v in parts[:d]])
            label = int(parts[d])
        except ValueError as exc:
            raise ParseError(str(exc), k) from None
        if label not in (-1, 1):
            raise ParseError(f"label {label} not in {{-1, 1}}", k)
        y.append(label)
    meta = read_keyvalue(meta_path(path)) if meta_path(path).exists() else {}
    return Dataset(np.array(X, dtype=float).reshape(-1, d), np.array(y, dtype=np.int64), meta)


def write_keyvalue(values: dict, path) -> None:
    lines = []
    for key, val in values.items():
        if isinstance(val, (list, tuple, np.ndarray)):
            val = " ".join(_fmt(v) for v in val)
        elif isinstance(val, float):
            val = _fmt(val)
        lines.append(f"{key}={val}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_keyvalue(path) -> dict:
    out = {}
    for k, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", k)
        key, val = line.split("=", 1)
        key, val = key.strip(), val.strip()
        if key == "curve":
            out[key] = [float(v) for v in val.split()]
        else:
            out[key] = val
    return out
