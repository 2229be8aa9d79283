"""Affine iterated function systems and exact queries about their level sets.

Every system is stored twice: in the caller's coordinates and conjugated onto
the unit cube ``[0, 1]^d``.  All geometry runs on the unit-cube copy; inputs
and outputs are converted at the boundary.  ``K_0`` is the base cube and
``K_n`` is the union of the ``r^n`` images of ``K_0`` under n-fold
compositions.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import lsq_linear

TAU_GEOM = 1e-9
TAU_RANK = 1e-12
BLOCK_CAP = 4096


class SingularMatrix(ValueError):
    pass


class AmbiguousBoundary(ValueError):
    pass


class MarginTooLarge(ValueError):
    pass


class BlowupLimit(ValueError):
    pass


class UnknownName(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


class AffineMap:
    """The map ``x -> M x + v``; works on single points or ``(m, d)`` batches."""

    def __init__(self, matrix, offset):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float)).copy()
        offset = np.atleast_1d(np.asarray(offset, dtype=float)).copy()
        if matrix.shape != (offset.size, offset.size):
            raise ValueError(f"matrix {matrix.shape} does not match offset {offset.shape}")
        matrix.setflags(write=False)
        offset.setflags(write=False)
        self.matrix = matrix
        self.offset = offset

    @property
    def dim(self) -> int:
        return self.offset.size

    @classmethod
    def identity(cls, d: int) -> "AffineMap":
        return cls(np.eye(d), np.zeros(d))

    def is_full_rank(self) -> bool:
        return abs(np.linalg.det(self.matrix)) > TAU_RANK

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T + self.offset

    def inverse(self) -> "AffineMap":
        if not self.is_full_rank():
            raise SingularMatrix("affine map is not invertible")
        inv = np.linalg.inv(self.matrix)
        return AffineMap(inv, -inv @ self.offset)

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """Return ``self ∘ inner``."""
        return AffineMap(self.matrix @ inner.matrix, self.matrix @ inner.offset + self.offset)

    def __repr__(self):
        return f"AffineMap(matrix={self.matrix.tolist()}, offset={self.offset.tolist()})"


def map_eval(amap: AffineMap, x, direction: str = "forward"):
    if direction == "forward":
        return amap(x)
    if direction == "inverse":
        return amap.inverse()(x)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


class Region(enum.IntEnum):
    OUTSIDE = 0
    BOUNDARY_BAND = 1
    INSIDE_WITH_MARGIN = 2


@dataclass(frozen=True)
class AssumptionReport:
    contraction_ok: bool
    separation: float
    containment_ok: bool

    @property
    def separation_ok(self) -> bool:
        return self.separation > 0

    @property
    def ok(self) -> bool:
        return self.contraction_ok and self.containment_ok and self.separation_ok


class IteratedFunctionSystem:
    """An ordered list of ``r >= 2`` contractive affine maps on ``[lo, hi]^d``.

    ``central_gap`` optionally names a sub-box of the unit cube (given as
    ``(lower corner, upper corner)`` in unit coordinates) used by the
    central-gap negative sampler.
    """

    def __init__(self, maps: Sequence[AffineMap], name: str | None = None,
                 base_box: tuple[float, float] = (0.0, 1.0), central_gap=None):
        maps = list(maps)
        if len(maps) < 2:
            raise ValueError("an IFS needs at least two maps")
        d = maps[0].dim
        if any(m.dim != d for m in maps):
            raise ValueError("all maps must share one dimension")
        lo, hi = (float(base_box[0]), float(base_box[1]))
        if not hi > lo:
            raise ValueError("base box needs hi > lo")
        self.maps = tuple(maps)
        self.name = name
        self.dim = d
        self.base_box = (lo, hi)
        # unit coordinates: u = (x - lo) / (hi - lo)
        self.to_unit = AffineMap(np.eye(d) / (hi - lo), -np.full(d, lo) / (hi - lo))
        self.from_unit = AffineMap(np.eye(d) * (hi - lo), np.full(d, lo))
        self.unit_maps = tuple(self.to_unit.compose(m).compose(self.from_unit) for m in maps)
        for m in self.unit_maps:
            if not m.is_full_rank():
                raise SingularMatrix("IFS maps must be full rank")
        self.central_gap = None if central_gap is None else (
            np.asarray(central_gap[0], dtype=float), np.asarray(central_gap[1], dtype=float))
        self._M = np.stack([m.matrix for m in self.unit_maps])
        self._v = np.stack([m.offset for m in self.unit_maps])
        self._Minv = np.linalg.inv(self._M)
        self._vinv = -np.einsum("rij,rj->ri", self._Minv, self._v)

    @property
    def r(self) -> int:
        return len(self.maps)

    @property
    def scale(self) -> float:
        return self.base_box[1] - self.base_box[0]

    def __repr__(self):
        return f"IteratedFunctionSystem(name={self.name!r}, r={self.r}, dim={self.dim})"

    @cached_property
    def assumptions(self) -> AssumptionReport:
        return check_assumptions(self)

    @property
    def separation(self) -> float:
        """Separation of the map images, in unit-cube coordinates."""
        return self.assumptions.separation

    @cached_property
    def det_weights(self) -> np.ndarray:
        w = np.abs(np.linalg.det(self._M))
        return w / w.sum()

    @cached_property
    def equal_ratio(self) -> bool:
        w = self.det_weights
        return bool(np.allclose(w, w[0], rtol=1e-12, atol=0))

    def _descend(self, U: np.ndarray, n: int, tol: float = TAU_GEOM, strict: bool = False):
        """Walk unit-coordinate points down n levels of inverse maps.

        Returns ``(alive, index, local, ambiguous)``: membership flags, the
        0-based map index chosen at each level, the point's coordinates inside
        its level-n cell, and whether two cells claimed the point.
        """
        U = np.array(U, dtype=float, copy=True)
        m = U.shape[0]
        alive = np.all((U >= -tol) & (U <= 1 + tol), axis=1)
        index = np.zeros((m, n), dtype=np.int64)
        ambiguous = np.zeros(m, dtype=bool)
        rows = np.arange(m)
        for level in range(n):
            cand = np.einsum("rij,mj->mri", self._Minv, U) + self._vinv
            inside = np.all((cand >= -tol) & (cand <= 1 + tol), axis=2)
            hits = inside.sum(axis=1)
            ambiguous |= alive & (hits > 1)
            pick = np.argmax(inside, axis=1)
            alive &= hits > 0
            index[:, level] = pick
            U = cand[rows, pick]
        return alive, index, U, ambiguous

    def _cell_inverse_rows(self, index: np.ndarray) -> np.ndarray:
        """Row norms of ``A^{-1}`` for the cell maps ``A`` selected by ``index``."""
        m, n = index.shape
        Ainv = np.broadcast_to(np.eye(self.dim), (m, self.dim, self.dim)).copy()
        for level in range(n):
            Ainv = np.einsum("mij,mjk->mik", self._Minv[index[:, level]], Ainv)
        return np.linalg.norm(Ainv, axis=2)


def _as_batch(x, d):
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    X = x.reshape(1, d) if single else x.reshape(-1, d)
    return X, single


def compose_address(ifs: IteratedFunctionSystem, address: Sequence[int]) -> AffineMap:
    """Return ``F_{i1} ∘ ... ∘ F_{is}`` for a 1-based address (original coordinates)."""
    out = AffineMap.identity(ifs.dim)
    for i in address:
        if not 1 <= int(i) <= ifs.r:
            raise IndexOutOfRange(f"address entry {i} outside 1..{ifs.r}")
        out = out.compose(ifs.maps[int(i) - 1])
    return out


def _unit_compose(ifs, address) -> AffineMap:
    out = AffineMap.identity(ifs.dim)
    for i in address:
        out = out.compose(ifs.unit_maps[int(i) - 1])
    return out


def membership(ifs: IteratedFunctionSystem, x, n: int, tol: float = TAU_GEOM):
    """Whether ``x`` lies in ``K_n``; accepts one point or an ``(m, d)`` batch."""
    if n < 0:
        raise ValueError("level must be nonnegative")
    X, single = _as_batch(x, ifs.dim)
    alive, *_ = ifs._descend(ifs.to_unit(X), n, tol)
    return bool(alive[0]) if single else alive


def address_of(ifs: IteratedFunctionSystem, x, n: int, tol: float = TAU_GEOM):
    """The 1-based level-n address of the cell containing ``x``, or ``None``."""
    X, _ = _as_batch(x, ifs.dim)
    alive, index, _, ambiguous = ifs._descend(ifs.to_unit(X[:1]), n, tol)
    if ambiguous[0]:
        raise AmbiguousBoundary(f"{x!r} lies within {tol} of two level-{n} cells")
    if not alive[0]:
        return None
    return tuple(int(i) + 1 for i in index[0])


def min_cell_inradius(ifs: IteratedFunctionSystem, n: int) -> float:
    """Smallest inradius over level-n cells, in unit coordinates.

    Exact by enumeration up to ``BLOCK_CAP`` cells; above that the bound
    ``min singular value ** n / 2`` is used, which is exact for similitudes.
    """
    if ifs.r ** n <= BLOCK_CAP:
        Ainv = np.eye(ifs.dim)[None]
        for _ in range(n):
            Ainv = np.einsum("rij,cjk->crik", ifs._Minv, Ainv).reshape(-1, ifs.dim, ifs.dim)
        rows = np.linalg.norm(Ainv, axis=2)
        return float(np.min(0.5 / rows))
    smin = min(np.linalg.svd(m.matrix, compute_uv=False).min() for m in ifs.unit_maps)
    return 0.5 * smin ** n


def margin_membership(ifs: IteratedFunctionSystem, x, n: int, gamma: float,
                      tol: float = TAU_GEOM, check: bool = True):
    """Classify points as inside ``K_n^gamma``, in the boundary band, or outside ``K_n``.

    ``gamma`` is measured in the caller's coordinates.  Returns a ``Region``
    for a single point and an int array of ``Region`` codes for a batch.
    """
    g = gamma / ifs.scale
    if check:
        cap = min_cell_inradius(ifs, n)
        if not 0 < g < cap:
            raise MarginTooLarge(f"margin {gamma} must lie in (0, {cap * ifs.scale})")
    X, single = _as_batch(x, ifs.dim)
    alive, index, U, _ = ifs._descend(ifs.to_unit(X), n, tol)
    rows = ifs._cell_inverse_rows(index)
    depth = np.min(np.minimum(U, 1 - U) / rows, axis=1)
    out = np.where(alive, np.where(depth >= g, Region.INSIDE_WITH_MARGIN, Region.BOUNDARY_BAND),
                   Region.OUTSIDE).astype(np.int64)
    return Region(int(out[0])) if single else out


def _box_vertices(amap: AffineMap) -> np.ndarray:
    d = amap.dim
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    return amap(corners)


def _polygon(amap: AffineMap) -> np.ndarray:
    # unit square corners in cyclic order
    return amap(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def _segment_distance(p, a, b) -> float:
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def _polygons_overlap(P, Q) -> bool:
    for poly in (P, Q):
        for k in range(len(poly)):
            edge = poly[(k + 1) % len(poly)] - poly[k]
            axis = np.array([-edge[1], edge[0]])
            pp, qq = P @ axis, Q @ axis
            if pp.max() < qq.min() or qq.max() < pp.min():
                return False
    return True


def polygon_distance(P, Q) -> float:
    """Euclidean distance between two convex polygons given by cyclic vertices."""
    if _polygons_overlap(P, Q):
        return 0.0
    best = math.inf
    for A, B in ((P, Q), (Q, P)):
        for p in A:
            for k in range(len(B)):
                best = min(best, _segment_distance(p, B[k], B[(k + 1) % len(B)]))
    return best


def box_image_distance(f: AffineMap, g: AffineMap) -> float:
    """Distance between the images of the unit cube under two affine maps."""
    d = f.dim
    if d == 1:
        a = sorted((f.offset[0], f.offset[0] + f.matrix[0, 0]))
        b = sorted((g.offset[0], g.offset[0] + g.matrix[0, 0]))
        return float(max(0.0, b[0] - a[1], a[0] - b[1]))
    if d == 2:
        return polygon_distance(_polygon(f), _polygon(g))
    # convex box-constrained least squares over both cubes
    A = np.hstack([f.matrix, -g.matrix])
    res = lsq_linear(A, g.offset - f.offset, bounds=(0.0, 1.0), tol=1e-14, lsmr_tol="auto")
    return float(np.linalg.norm(A @ res.x - (g.offset - f.offset)))


def check_assumptions(ifs: IteratedFunctionSystem) -> AssumptionReport:
    """Contraction, pairwise separation and containment, in unit coordinates."""
    contraction = all(m.lipschitz < 1 for m in ifs.unit_maps)
    contained = all(
        np.all(_box_vertices(m) >= -TAU_GEOM) and np.all(_box_vertices(m) <= 1 + TAU_GEOM)
        for m in ifs.unit_maps)
    sep = min(box_image_distance(f, g) for f, g in itertools.combinations(ifs.unit_maps, 2))
    return AssumptionReport(contraction_ok=contraction, separation=sep, containment_ok=contained)


def rewrite_blocked(ifs: IteratedFunctionSystem, s: int, cap: int = BLOCK_CAP) -> IteratedFunctionSystem:
    """The IFS whose maps are all s-fold compositions, ordered lexicographically."""
    if s < 1:
        raise ValueError("block size must be at least 1")
    if s == 1:
        return ifs
    if ifs.r ** s > cap:
        raise BlowupLimit(f"{ifs.r}^{s} maps exceeds the cap of {cap}")
    maps = [compose_address(ifs, a) for a in itertools.product(range(1, ifs.r + 1), repeat=s)]
    name = None if ifs.name is None else f"{ifs.name}^{s}"
    return IteratedFunctionSystem(maps, name=name, base_box=ifs.base_box)


def _similitude(scale, angle_deg, center_to):
    th = math.radians(angle_deg)
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    M = scale * R
    # rotate about the cube center, then move that center to ``center_to``
    return AffineMap(M, np.asarray(center_to) - M @ np.array([0.5, 0.5]))


def _square_maps(scale, corners):
    return [AffineMap(scale * np.eye(2), c) for c in corners]


def builtin_ifs(name: str) -> IteratedFunctionSystem:
    """Fixed systems on the unit cube.

    cantor1d    x/3 and (x+2)/3
    cantor2d    four 1/3-scale corner squares
    sierpinski  three 0.45-scale squares in a triangle (separation 0.1)
    vicsek      five 0.3-scale squares in a plus shape (separation 0.05)
    pentaflake  four 1/3-scale corner squares, rotated by multiples of 90
                degrees, plus a 1/3-scale center square rotated by 45 degrees
    """
    third = 1.0 / 3.0
    if name == "cantor1d":
        maps = [AffineMap([[third]], [0.0]), AffineMap([[third]], [2 * third])]
        return IteratedFunctionSystem(maps, name, central_gap=([third], [2 * third]))
    if name == "cantor2d":
        maps = _square_maps(third, [(0, 0), (2 * third, 0), (0, 2 * third), (2 * third, 2 * third)])
        return IteratedFunctionSystem(maps, name, central_gap=([third] * 2, [2 * third] * 2))
    if name == "sierpinski":
        maps = _square_maps(0.45, [(0, 0), (0.55, 0), (0.275, 0.55)])
        return IteratedFunctionSystem(maps, name)
    if name == "vicsek":
        maps = _square_maps(0.3, [(0.35, 0.35), (0.35, 0), (0.7, 0.35), (0.35, 0.7), (0, 0.35)])
        return IteratedFunctionSystem(maps, name)
    if name == "pentaflake":
        lo, hi = third / 2, 1 - third / 2
        maps = [_similitude(third, 0, (lo, lo)), _similitude(third, 90, (hi, lo)),
                _similitude(third, 180, (hi, hi)), _similitude(third, 270, (lo, hi)),
                _similitude(third, 45, (0.5, 0.5))]
        return IteratedFunctionSystem(maps, name)
    raise UnknownName(f"unknown fractal {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


BUILTIN_NAMES = ("cantor1d", "cantor2d", "sierpinski", "vicsek", "pentaflake")


def ifs_to_text(ifs: IteratedFunctionSystem) -> str:
    lines = [f"dim {ifs.dim}"]
    for m in ifs.maps:
        vals = list(m.matrix.ravel()) + list(m.offset)
        lines.append(" ".join(format(v, ".17g") for v in vals))
    return "\n".join(lines) + "\n"


def ifs_from_text(text: str, name: str | None = None) -> IteratedFunctionSystem:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or rows[0][0] != "dim" or len(rows[0]) != 2:
        raise ValueError("IFS text must start with 'dim <d>'")
    d = int(rows[0][1])
    maps = []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != d * d + d:
            raise ValueError(f"map row {k} has {len(row)} entries, expected {d * d + d}")
        vals = np.array([float(v) for v in row])
        maps.append(AffineMap(vals[:d * d].reshape(d, d), vals[d * d:]))
    return IteratedFunctionSystem(maps, name=name)
