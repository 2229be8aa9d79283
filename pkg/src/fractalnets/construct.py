"""Hand-wired ReLU networks that classify ``K_n^gamma`` against the rest of space.

Each level of the fractal costs two hidden layers.  The first computes, for
every map ``F_i``, the ReLU features of ``u = F_i^{-1}(p)``; the second folds
``p`` back to the unit cube (``p <- sum_i f(F_i^{-1} p)``, where ``f`` is the
identity on the cube and vanishes away from it) and raises ``z_i`` when ``p``
sits inside the margin set of cell ``i``.  A nonnegative accumulator collects
``1 - sum_i z_i``; it stays 0 along the whole descent for points of
``K_n^gamma`` and reaches at least 1 as soon as a point falls in a gap.

All geometry uses unit-cube coordinates; the input change of coordinates is
folded into the first layer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import FractalDistribution, sample_negative, sample_positive
from .ifs import (
    IteratedFunctionSystem,
    MarginTooLarge,
    Region,
    margin_membership,
    min_cell_inradius,
    rewrite_blocked,
)
from .network import LayeredNet


class GainTooSmall(ValueError):
    pass


class DegenerateMargin(ValueError):
    pass


@dataclass(frozen=True)
class GainSchedule:
    N: float
    gamma: float
    eps: float


def choose_gain(ifs: IteratedFunctionSystem | None, gamma: float, eps: float) -> float:
    """``4 (1 + diam) / min(eps/2, gamma, 1)`` with ``diam = sqrt(d)`` the unit-cube diameter."""
    if min(eps / 2, gamma, 1.0) <= 0:
        raise DegenerateMargin("margin and separation must be positive")
    d = 1 if ifs is None else ifs.dim
    return 4 * (1 + math.sqrt(d)) / min(eps / 2, gamma, 1.0)


def identity_gain_floor(d: int, eps: float) -> float:
    # sigma(x_i) <= 1 + V, and V > eps / sqrt(d) once x is eps away from the cube
    return 1 + math.sqrt(d) / eps


def indicator_gain_floor(gamma: float) -> float:
    return 1 / gamma


def _check_gain(N, floor, what):
    if N < floor:
        raise GainTooSmall(f"{what} needs gain at least {floor:.6g}, got {N:.6g}")


def relu(x):
    return np.maximum(x, 0.0)


# Small building blocks, on unit-cube coordinates.

def build_box_identity(d: int, eps: float, N: float) -> LayeredNet:
    """``f(x) = x`` on the unit cube and ``0`` farther than ``eps`` from it."""
    _check_gain(N, identity_gain_floor(d, eps), "box identity")
    I = np.eye(d)
    W1 = np.vstack([I, -I, I])
    b1 = np.concatenate([np.zeros(d), np.zeros(d), -np.ones(d)])
    ones = np.ones((d, d))
    W2 = np.hstack([I, -N * ones, -N * ones])
    return LayeredNet([W1, W2, I], [b1, np.zeros(d), np.zeros(d)])


def build_box_indicator(d: int, gamma: float, N: float) -> LayeredNet:
    """1 outside the unit cube, 0 on ``[gamma, 1 - gamma]^d``, values in [0, 1]."""
    _check_gain(N, indicator_gain_floor(gamma), "box indicator")
    I = np.eye(d)
    W1 = np.vstack([-I, I])
    b1 = np.concatenate([np.full(d, gamma), np.full(d, gamma - 1)])
    W2 = -N * np.ones((1, 2 * d))
    return LayeredNet([W1, W2, -np.ones((1, 1))], [b1, np.ones(1), np.ones(1)])


def _inverse_affine(ifs):
    """``u_i = A_i p + a_i`` for every map, stacked as (r*d, d) and (r*d,)."""
    return ifs._Minv.reshape(-1, ifs.dim), ifs._vinv.reshape(-1)


def build_fold_block(ifs: IteratedFunctionSystem, N: float) -> LayeredNet:
    """``g(x) = sum_i f(F_i^{-1} x)`` mapping caller coordinates to unit coordinates."""
    d, r = ifs.dim, ifs.r
    _check_gain(N, identity_gain_floor(d, ifs.separation), "fold block")
    A, a = _inverse_affine(ifs)
    a = a + A @ ifs.to_unit.offset
    A = A @ ifs.to_unit.matrix
    W1 = np.vstack([A, -A, A])
    b1 = np.concatenate([a, -a, a - 1])
    rd = r * d
    W2 = np.zeros((rd, 3 * rd))
    for i in range(r):
        blk = slice(i * d, (i + 1) * d)
        W2[blk, blk] = np.eye(d)
        W2[blk, rd + i * d:rd + (i + 1) * d] = -N
        W2[blk, 2 * rd + i * d:2 * rd + (i + 1) * d] = -N
    W3 = np.tile(np.eye(d), r)
    return LayeredNet([W1, W2, W3], [b1, np.zeros(rd), np.zeros(d)])


def build_gap_block(ifs: IteratedFunctionSystem, gamma: float, N: float) -> LayeredNet:
    """``1 - r + sum_i fbar(F_i^{-1} x)``: 1 off ``K_1``, 0 on ``K_1^gamma``."""
    d, r = ifs.dim, ifs.r
    g = gamma / ifs.scale
    _check_gain(N, indicator_gain_floor(g), "gap block")
    A, a = _inverse_affine(ifs)
    a = a + A @ ifs.to_unit.offset
    A = A @ ifs.to_unit.matrix
    W1 = np.vstack([-A, A])
    b1 = np.concatenate([g - a, a - 1 + g])
    rd = r * d
    W2 = np.zeros((r, 2 * rd))
    for i in range(r):
        W2[i, i * d:(i + 1) * d] = -N
        W2[i, rd + i * d:rd + (i + 1) * d] = -N
    # z_i = 1 - fbar_i, output = 1 - sum z_i
    return LayeredNet([W1, W2, -np.ones((1, r))], [b1, np.ones(r), np.ones(1)])


# Full classifiers.

class _Builder:
    """Accumulates layers; tracks how the current point ``p`` and the accumulator
    are read off the latest hidden layer."""

    def __init__(self, ifs_input: IteratedFunctionSystem):
        d = ifs_input.dim
        self.d = d
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        # p = P h + p0 where h is the latest layer output (initially the raw input)
        self.P = ifs_input.to_unit.matrix.copy()
        self.p0 = ifs_input.to_unit.offset.copy()
        self.in_dim = d
        # accumulator = acc . h + acc0, and sum_i z_i = zsum . h
        self.acc = np.zeros(d)
        self.acc0 = 0.0
        self.zsum = np.zeros(d)
        self.first = True

    def _add(self, W, b):
        self.weights.append(np.asarray(W, dtype=float))
        self.biases.append(np.asarray(b, dtype=float))

    def _acc_row(self):
        # accumulator after adding 1 - sum z; nonnegative, so one ReLU passes it
        return self.acc - self.zsum, self.acc0 + (0.0 if self.first else 1.0)

    def block(self, ifs: IteratedFunctionSystem, gamma: float, N: float, fold: bool,
              pad_first: bool = False):
        """Two hidden layers for one level of ``ifs``; ``fold=False`` skips the fold output."""
        d, r = self.d, ifs.r
        rd = r * d
        A, a = _inverse_affine(ifs)
        UA = A @ self.P
        Ua = A @ self.p0 + a
        rows, bias = [], []
        layout = {}

        def put(name, W, b):
            layout[name] = (sum(len(x) for x in bias), len(b))
            rows.append(W)
            bias.append(b)

        need_identity = fold or pad_first
        if need_identity and self.first:
            put("u", UA, Ua)
            put("neg", -UA, -Ua)
            put("um1", UA, Ua - 1)
        elif need_identity:
            put("p", self.P, self.p0)
            put("u", UA, Ua)
            put("um1", UA, Ua - 1)
        if not self.first:
            ar, a0 = self._acc_row()
            put("acc", ar[None, :], np.array([a0]))
        put("lo", -UA, gamma - Ua)
        put("hi", UA, Ua - 1 + gamma)
        self._add(np.vstack(rows), np.concatenate(bias))
        width = sum(len(b) for b in bias)

        def cols(name):
            start, size = layout[name]
            return slice(start, start + size)

        out_rows, out_bias = [], []
        if fold:
            Wf = np.zeros((rd, width))
            for i in range(r):
                blk = slice(i * d, (i + 1) * d)
                u_cols = np.arange(cols("u").start, cols("u").stop)[blk]
                m1_cols = np.arange(cols("um1").start, cols("um1").stop)[blk]
                for j in range(d):
                    Wf[i * d + j, u_cols[j]] += 1.0
                Wf[blk, m1_cols] -= N
                if self.first:
                    neg_cols = np.arange(cols("neg").start, cols("neg").stop)[blk]
                    Wf[blk, neg_cols] -= N
                    out_bias.append(np.zeros(d))
                else:
                    # sigma(-u) = sigma(u) - u, with u = A_i p + a_i and p >= 0 passed through
                    Wf[blk, u_cols] -= N
                    Wf[blk, cols("p")] += N * A[blk].sum(axis=0)
                    out_bias.append(np.full(d, N * a[blk].sum()))
                out_rows.append(Wf[blk])
        Wz = np.zeros((r, width))
        lo, hi = cols("lo"), cols("hi")
        for i in range(r):
            Wz[i, lo.start + i * d:lo.start + (i + 1) * d] = -N
            Wz[i, hi.start + i * d:hi.start + (i + 1) * d] = -N
        out_rows.append(Wz)
        out_bias.append(np.ones(r))
        if not self.first:
            Wa = np.zeros((1, width))
            Wa[0, cols("acc").start] = 1.0
            out_rows.append(Wa)
            out_bias.append(np.zeros(1))
        self._add(np.vstack(out_rows), np.concatenate(out_bias))
        out_width = sum(len(b) for b in out_bias)
        nf = rd if fold else 0
        self.P = np.zeros((d, out_width))
        if fold:
            self.P[:, :rd] = np.tile(np.eye(d), r)
        self.p0 = np.zeros(d)
        self.zsum = np.zeros(out_width)
        self.zsum[nf:nf + r] = 1.0
        self.acc = np.zeros(out_width)
        self.acc0 = 0.0
        if not self.first:
            self.acc[-1] = 1.0
        self.first = False

    def settle(self):
        """One hidden layer holding the final accumulator value."""
        ar, a0 = self._acc_row()
        self._add(ar[None, :], np.array([a0]))
        self.P = np.zeros((self.d, 1))
        self.p0 = np.zeros(self.d)
        self.zsum = np.zeros(1)
        self.acc = np.ones(1)
        self.acc0 = 0.0

    def trapezoids(self, cells, gamma):
        """One hidden layer: accumulator plus four ReLUs per 1-D cell ``[lo, hi]``."""
        ar, a0 = self._acc_row()
        rows, bias = [ar[None, :]], [np.array([a0])]
        out = [-1.0]
        for lo, hi in cells:
            for shift, w in ((lo, 1), (lo + gamma, -1), (hi - gamma, -1), (hi, 1)):
                rows.append(self.P[:1])
                bias.append(self.p0[:1] - shift)
                out.append(w / gamma)
        self._add(np.vstack(rows), np.concatenate(bias))
        self._add(np.array([out]), np.array([-0.5]))

    def finish_from_gap(self):
        ar, a0 = self._acc_row()
        # output = 1/2 - accumulator, read off the last hidden layer
        self._add(-ar[None, :], np.array([0.5 - a0]))

    def finish_from_settled(self):
        self._add(-np.ones((1, 1)), np.array([0.5]))

    def net(self) -> LayeredNet:
        return LayeredNet(self.weights, self.biases)


def _validate(ifs, n, gamma):
    if n < 1:
        raise ValueError("level must be at least 1")
    if not ifs.assumptions.ok:
        raise ValueError(f"{ifs!r} fails the contraction/separation/containment checks")
    cap = min_cell_inradius(ifs, n) * ifs.scale
    if not 0 < gamma < cap:
        raise MarginTooLarge(f"margin {gamma} must lie in (0, {cap})")


def build_exact_classifier(ifs: IteratedFunctionSystem, n: int, gamma: float,
                           N: float | None = None) -> LayeredNet:
    """Depth ``2n+1``, width ``5dr``: positive on ``K_n^gamma``, negative off ``K_n``."""
    _validate(ifs, n, gamma)
    g = gamma / ifs.scale
    if N is None:
        N = choose_gain(ifs, g, ifs.separation)
    _check_gain(N, max(identity_gain_floor(ifs.dim, ifs.separation), indicator_gain_floor(g)),
                "exact classifier")
    b = _Builder(ifs)
    for _ in range(n - 1):
        b.block(ifs, g, N, fold=True)
    b.block(ifs, g, N, fold=False, pad_first=(n == 1))
    b.finish_from_gap()
    return b.net()


def _unit_cells(ifs, level):
    """Endpoints of the level-``level`` cells of a 1-D system, unit coordinates."""
    cells = [(0.0, 1.0)]
    for _ in range(level):
        cells = [tuple(sorted((m(np.array([lo]))[0], m(np.array([hi]))[0])))
                 for lo, hi in cells for m in ifs.unit_maps]
    return sorted(cells)


def build_blocked_classifier(ifs: IteratedFunctionSystem, n: int, s: int, gamma: float,
                             N: float | None = None) -> LayeredNet:
    """Classifier built on the ``s``-fold rewritten system, width ``5 d r^s``.

    Depth is ``2 floor(n/s) + 2`` when ``s`` divides ``n`` or ``d = 1``; in
    higher dimension the leftover ``n mod s`` levels need a two-layer stage
    and the depth is ``2 floor(n/s) + 3``.
    """
    _validate(ifs, n, gamma)
    q, rem = divmod(n, s)
    g = gamma / ifs.scale
    big = rewrite_blocked(ifs, s)
    stages = [big] if q else []
    rest = rewrite_blocked(ifs, rem) if rem else None
    if N is None:
        N = max(choose_gain(x, g, x.separation) for x in stages + ([rest] if rest else []))
    b = _Builder(ifs)
    if rem == 0:
        for _ in range(q - 1):
            b.block(big, g, N, fold=True)
        b.block(big, g, N, fold=False, pad_first=(q == 1))
        b.settle()
        b.finish_from_settled()
        return b.net()
    for _ in range(q):
        b.block(big, g, N, fold=True)
    if ifs.dim == 1:
        b.trapezoids(_unit_cells(ifs, rem), g)
    else:
        b.block(rest, g, N, fold=False)
        b.finish_from_gap()
    return b.net()


def blocked_shape(d: int, r: int, n: int, s: int) -> tuple[int, int]:
    """Predicted (depth, width) of ``build_blocked_classifier``."""
    q, rem = divmod(n, s)
    depth = 2 * q + 2 if rem == 0 or d == 1 else 2 * q + 3
    return depth, 5 * d * r ** s


def build_coarse_classifier(ifs: IteratedFunctionSystem, n: int, j: int, s: int,
                            gamma: float) -> LayeredNet:
    """Separates ``K_j^gamma`` from the complement of ``K_j`` (blocked build at level j)."""
    if not 1 <= j <= n:
        raise ValueError(f"need 1 <= j <= n, got j={j}, n={n}")
    return build_blocked_classifier(ifs, j, s, gamma)


@dataclass(frozen=True)
class VerificationReport:
    pos_correct: int
    pos_total: int
    neg_correct: int
    neg_total: int
    boundary_skipped: int

    @property
    def pos_rate(self) -> float:
        return self.pos_correct / self.pos_total if self.pos_total else 1.0

    @property
    def neg_rate(self) -> float:
        return self.neg_correct / self.neg_total if self.neg_total else 1.0

    @property
    def perfect(self) -> bool:
        return self.pos_correct == self.pos_total and self.neg_correct == self.neg_total


def sign(values):
    return np.where(np.asarray(values) >= 0, 1, -1)


def verify_classifier(net: LayeredNet, ifs: IteratedFunctionSystem, n: int, gamma: float,
                      m: int, seed: int) -> VerificationReport:
    """Compare ``sign(net)`` with the margin oracle on ``m`` stratified points.

    Half the points are uniform on ``K_n^gamma``.  The other half mixes gap
    points from every level with uniform points of an enlarged box; any of
    them landing in the boundary band is skipped.
    """
    from .distributions import ApproximationCurve

    rng = np.random.default_rng(seed)
    half = m // 2
    dist = FractalDistribution(ifs, n, gamma, ApproximationCurve(tuple([1.0 / n] * n)))
    pos = sample_positive(dist, rng, half)
    rest = m - half
    n_gap = rest // 2
    gaps = sample_negative(dist, rng, n_gap) if n_gap else np.empty((0, ifs.dim))
    lo, hi = ifs.base_box
    pad = 0.25 * (hi - lo)
    wide = lo - pad + (hi - lo + 2 * pad) * rng.random((rest - n_gap, ifs.dim))
    cand = np.vstack([gaps, wide])
    region = margin_membership(ifs, cand, n, gamma)
    neg = cand[region == Region.OUTSIDE]
    extra_pos = cand[region == Region.INSIDE_WITH_MARGIN]
    skipped = int(np.sum(region == Region.BOUNDARY_BAND))
    P = np.vstack([pos, extra_pos])
    pos_ok = int(np.sum(sign(net(P)) == 1)) if len(P) else 0
    neg_ok = int(np.sum(sign(net(neg)) == -1)) if len(neg) else 0
    return VerificationReport(pos_ok, len(P), neg_ok, len(neg), skipped)
