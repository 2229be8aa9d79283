"""Exact analysis of scalar-input ReLU nets against Cantor-type distributions.

A 1-D net is piecewise linear, and so is every parameter derivative of its
output.  The Cantor distribution has a simple cumulative structure, so
expectations of piecewise-affine functions under it can be written down in
closed form.  Together these give exact population gradients, exact errors
and exact region counts, without sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import ApproximationCurve, FractalDistribution, GapStyle
from .ifs import AffineMap, IteratedFunctionSystem, builtin_ifs
from .network import LayeredNet
from .training import PaperUniform, init

PIECE_CAP = 10**7
MERGE_TOL = 1e-12


class PieceBudgetExceeded(RuntimeError):
    pass


class DimensionMismatch(ValueError):
    pass


class MarginSaturated(ValueError):
    pass


class ThresholdViolated(ValueError):
    pass


class BudgetTooLarge(ValueError):
    pass


@dataclass
class PiecewiseLinear1D:
    """Output of a 1-D net on ``[knots[0], knots[-1]]``: on piece ``p`` it is
    ``slopes[p] * x + intercepts[p]``.  ``masks[l][p]`` is the activation
    pattern of hidden layer ``l`` on piece ``p``."""

    knots: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    masks: list = field(default_factory=list)
    net: LayeredNet | None = None

    @property
    def breakpoints(self) -> np.ndarray:
        return self.knots[1:-1]

    @property
    def num_pieces(self) -> int:
        return len(self.slopes)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, self.num_pieces - 1)
        return self.slopes[p] * x + self.intercepts[p]

    def gradient_coefficients(self):
        """Per-piece affine form of every parameter derivative of the output.

        Returns ``[(dW1, dW0, db), ...]`` per layer with shapes ``(P, out, in)``,
        ``(P, out, in)`` and ``(P, out)``: on piece ``p`` the derivative with
        respect to ``W[l]`` is ``dW1[p] * x + dW0[p]`` and with respect to
        ``b[l]`` it is ``db[p]``.
        """
        net = self.net
        P = self.num_pieces
        # affine input to each layer: h = a x + c, per piece
        a = [np.ones((P, 1))]
        c = [np.zeros((P, 1))]
        for l, (W, b) in enumerate(zip(net.weights[:-1], net.biases[:-1])):
            m = self.masks[l]
            a.append((a[-1] @ W.T) * m)
            c.append((c[-1] @ W.T + b) * m)
        out = [None] * net.depth
        delta = np.ones((P, 1))
        for l in range(net.depth - 1, -1, -1):
            dW1 = delta[:, :, None] * a[l][:, None, :]
            dW0 = delta[:, :, None] * c[l][:, None, :]
            out[l] = (dW1, dW0, delta.copy())
            if l:
                delta = (delta @ net.weights[l]) * self.masks[l - 1]
        return out


def _dedup(points):
    points = np.sort(points)
    if len(points) < 2:
        return points
    keep = np.concatenate([[True], np.diff(points) > MERGE_TOL])
    return points[keep]


def extract_pwl_1d(net: LayeredNet, domain=(0.0, 1.0)) -> PiecewiseLinear1D:
    """Exact breakpoints of a scalar-input, scalar-output net on ``domain``.

    Each pre-activation is carried as an affine function per piece; pieces
    are split where a neuron crosses zero, layer by layer.
    """
    if net.input_dim != 1 or net.output_dim != 1:
        raise DimensionMismatch("piecewise extraction needs a scalar-input, scalar-output net")
    lo, hi = float(domain[0]), float(domain[1])
    knots = np.array([lo, hi])
    a = np.ones((1, 1))
    c = np.zeros((1, 1))
    masks = []
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        za = a @ W.T
        zc = c @ W.T + b
        if l == net.depth - 1:
            return PiecewiseLinear1D(knots, za[:, 0].copy(), zc[:, 0].copy(), masks, net)
        with np.errstate(divide="ignore", invalid="ignore"):
            roots = -zc / za
        left, right = knots[:-1, None], knots[1:, None]
        inside = np.isfinite(roots) & (roots > left) & (roots < right)
        knots = _dedup(np.concatenate([knots, roots[inside]]))
        if len(knots) - 1 > PIECE_CAP:
            raise PieceBudgetExceeded(f"more than {PIECE_CAP} pieces")
        mids = 0.5 * (knots[:-1] + knots[1:])
        parent = np.clip(np.searchsorted(left[:, 0], mids, side="right") - 1, 0, len(left) - 1)
        za, zc = za[parent], zc[parent]
        m = (za * mids[:, None] + zc > 0).astype(float)
        masks.append(m)
        a, c = za * m, zc * m
    raise AssertionError("unreachable")


def merged_regions(pwl: PiecewiseLinear1D, tol: float = 1e-9):
    """Knots of the maximal linear regions after merging collinear neighbours."""
    keep = [0]
    for p in range(1, pwl.num_pieces):
        q = keep[-1]
        scale = 1.0 + abs(pwl.slopes[q]) + abs(pwl.intercepts[q])
        if (abs(pwl.slopes[p] - pwl.slopes[q]) > tol * scale
                or abs(pwl.intercepts[p] - pwl.intercepts[q]) > tol * scale):
            keep.append(p)
    return keep


def sign_change_count(pwl: PiecewiseLinear1D) -> int:
    pts = [pwl.knots]
    for p in range(pwl.num_pieces):
        s, t = pwl.slopes[p], pwl.intercepts[p]
        if s != 0:
            root = -t / s
            if pwl.knots[p] < root < pwl.knots[p + 1]:
                pts.append([root])
    pts = _dedup(np.concatenate(pts))
    signs = np.sign(pwl(0.5 * (pts[:-1] + pts[1:])))
    signs = signs[signs != 0]
    return int(np.sum(signs[1:] != signs[:-1]))


def count_regions_and_crossings(pwl: PiecewiseLinear1D) -> tuple[int, int]:
    return len(merged_regions(pwl)), sign_change_count(pwl)


def region_bound(k: int, t: int, d: int = 1) -> float:
    """``(e k / d)^(t d)`` linear regions for width ``k``, depth ``t``."""
    return (math.e * k / d) ** (t * d)


def dense_grid_regions(net: LayeredNet, points: int = 10**6, domain=(0.0, 1.0), tol=1e-7) -> int:
    """Regions counted by slope changes of ``net`` on a uniform grid."""
    x = np.linspace(domain[0], domain[1], points + 1)
    y = np.concatenate([net(x[i:i + 200_000]) for i in range(0, len(x), 200_000)])
    slopes = np.diff(y) / np.diff(x)
    scale = 1.0 + np.max(np.abs(slopes))
    changed = np.abs(np.diff(slopes)) > tol * scale
    # a kink inside one grid cell disturbs the two neighbouring slope differences
    starts = changed & ~np.concatenate([[False], changed[:-1]])
    return int(np.sum(starts)) + 1


# Cantor-type distributions.

@dataclass(frozen=True)
class CantorGeometry:
    """Two increasing maps ``x -> rho x`` and ``x -> rho x + 1 - rho`` on [0, 1]."""

    rho: float
    n: int
    gamma: float
    p: tuple

    @property
    def S(self):
        return np.concatenate([[0.0], np.cumsum(self.p)])

    def gap_density(self, level: int) -> float:
        # E_level: 2^(level-1) gaps, each of length rho^(level-1) (1 - 2 rho)
        length = (2 * self.rho) ** (level - 1) * (1 - 2 * self.rho)
        return self.p[level - 1] / length


def cantor_geometry(dist: FractalDistribution) -> CantorGeometry:
    ifs = dist.ifs
    if ifs.dim != 1:
        raise DimensionMismatch("closed-form moments need a 1-D distribution")
    if dist.gap_style is not GapStyle.FULL_COMPLEMENT:
        raise ValueError("closed-form moments assume negatives uniform on the full gaps")
    if ifs.base_box != (0.0, 1.0) or ifs.r != 2:
        raise ValueError("closed-form moments need a two-map system on [0, 1]")
    m = sorted(((float(f.matrix[0, 0]), float(f.offset[0])) for f in ifs.unit_maps),
               key=lambda t: t[1])
    rho = m[0][0]
    ok = (abs(m[1][0] - rho) < 1e-15 and rho > 0 and abs(m[0][1]) < 1e-15
          and abs(m[1][1] - (1 - rho)) < 1e-15 and rho < 0.5)
    if not ok:
        raise ValueError("closed-form moments need increasing maps rho x and rho x + 1 - rho")
    return CantorGeometry(rho, dist.depth, dist.margin, tuple(dist.curve.level_weights))


def cantor_cumulative(geo: CantorGeometry, t):
    """Cumulative masses and first moments of the positive and negative parts up to ``t``.

    Returns ``(m_pos, x_pos, m_neg, x_neg)`` with ``m_pos(t) = mu+((-inf, t])``
    and ``x_pos(t) = int_{x <= t} x dmu+``, and likewise for ``mu-``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    rho, n = geo.rho, geo.n
    S = geo.S
    mp = np.zeros_like(t)
    xp = np.zeros_like(t)
    mn = np.zeros_like(t)
    xn = np.zeros_like(t)
    above = t >= 1
    mp[above], xp[above], mn[above], xn[above] = 1.0, 0.5, 1.0, 0.5
    live = (t > 0) & ~above
    lo = np.zeros_like(t)
    L = 1.0
    for k in range(n):
        # current cells have level k and length L; children at level k+1
        s = (t - lo) / L
        child_mass = 2.0 ** -(k + 1)
        neg_child = child_mass * (1 - S[k + 1])
        left_center = lo + 0.5 * rho * L
        gap_lo, gap_hi = lo + rho * L, lo + (1 - rho) * L
        dens = geo.gap_density(k + 1)
        in_gap = live & (s >= rho) & (s <= 1 - rho)
        in_right = live & (s > 1 - rho)
        past = in_gap | in_right
        # the whole left child lies below t
        mp[past] += child_mass
        xp[past] += child_mass * left_center[past]
        mn[past] += neg_child
        xn[past] += neg_child * left_center[past]
        # part of the gap
        top = np.where(in_gap, t, gap_hi)
        mn[past] += dens * (top[past] - gap_lo[past])
        xn[past] += dens * 0.5 * (top[past] ** 2 - gap_lo[past] ** 2)
        live = live & ~in_gap
        lo = np.where(in_right, lo + (1 - rho) * L, lo)
        L *= rho
    # inside a level-n cell only positives, uniform on [lo + gamma, lo + L - gamma]
    g = geo.gamma
    a = lo + g
    b = lo + L - g
    top = np.clip(t, a, b)
    frac = (top - a) / (b - a)
    cell = 2.0 ** -n
    mp[live] += cell * frac[live]
    xp[live] += cell * 0.5 * (top[live] ** 2 - a[live] ** 2) / (b[live] - a[live])
    return mp, xp, mn, xn


def signed_moments(geo: CantorGeometry, a, b):
    """``int_a^b dnu`` and ``int_a^b x dnu`` for ``nu = (mu+ - mu-) / 2``."""
    mp, xp, mn, xn = cantor_cumulative(geo, np.concatenate([np.atleast_1d(a), np.atleast_1d(b)]))
    k = len(np.atleast_1d(a))
    m0 = 0.5 * ((mp[k:] - mp[:k]) - (mn[k:] - mn[:k]))
    m1 = 0.5 * ((xp[k:] - xp[:k]) - (xn[k:] - xn[:k]))
    return m0, m1


def cell_intervals(rho: float, level: int) -> np.ndarray:
    """Left endpoints of the ``2^level`` cells, in increasing order."""
    lo = np.zeros(1)
    L = 1.0
    for _ in range(level):
        lo = np.concatenate([lo[:, None], lo[:, None] + (1 - rho) * L], axis=1).ravel()
        L *= rho
    return lo


def gap_intervals(rho: float, upto: int):
    """``(left, right, level)`` arrays for all gaps of levels ``1..upto``."""
    ls, rs, lv = [], [], []
    for j in range(1, upto + 1):
        L = rho ** (j - 1)
        lo = cell_intervals(rho, j - 1)
        ls.append(lo + rho * L)
        rs.append(lo + (1 - rho) * L)
        lv.append(np.full(len(lo), j))
    return np.concatenate(ls), np.concatenate(rs), np.concatenate(lv)


@dataclass(frozen=True)
class IntervalMoments:
    left: float
    right: float
    center: float
    mass: float
    mean_y: float
    mean_xy: float


def interval_moments(dist: FractalDistribution, n_prime: int) -> list[IntervalMoments]:
    """Mass and label moments of ``D_n`` on each level-``n'`` cell, in closed form."""
    geo = cantor_geometry(dist)
    if not 0 <= n_prime < dist.depth:
        raise ValueError("need 0 <= n' < n")
    P = dist.curve.P(n_prime)
    L = geo.rho ** n_prime
    mass = 2.0 ** -n_prime * (1.5 - P)
    ey = (P - 0.5) / (1.5 - P)
    out = []
    for lo in cell_intervals(geo.rho, n_prime):
        c = lo + 0.5 * L
        out.append(IntervalMoments(lo, lo + L, c, mass, ey, c * ey))
    return out


def sample_within_cell(dist: FractalDistribution, left: float, level: int, m: int, rng):
    """Draw ``m`` samples of ``D_n`` conditioned on the level-``level`` cell starting at ``left``."""
    geo = cantor_geometry(dist)
    rho, n = geo.rho, geo.n
    S = geo.S
    L = rho ** level
    p_pos = 0.5 / (0.5 + 0.5 * (1 - S[level]))
    y = np.where(rng.random(m) < p_pos, 1, -1)
    x = np.empty(m)
    pos = y == 1
    # positives: random address below the cell, uniform in the shrunk leaf
    k = int(pos.sum())
    digits = rng.integers(0, 2, size=(k, n - level))
    offs = (digits * (1 - rho) * L * rho ** np.arange(n - level)).sum(axis=1)
    leaf = L * rho ** (n - level)
    x[pos] = left + offs + geo.gamma + (leaf - 2 * geo.gamma) * rng.random(k)
    # negatives: level j > level with prob ∝ p_j, then a uniform gap point
    k = m - k
    if k:
        w = np.asarray(geo.p[level:])
        j = rng.choice(np.arange(level + 1, n + 1), size=k, p=w / w.sum())
        u = rng.random(k)
        for jj in np.unique(j):
            sel = np.flatnonzero(j == jj)
            depth = jj - 1 - level
            digits = rng.integers(0, 2, size=(len(sel), depth))
            offs = (digits * (1 - rho) * L * rho ** np.arange(depth)).sum(axis=1)
            Lj = L * rho ** depth
            x[np.flatnonzero(~pos)[sel]] = left + offs + Lj * (rho + (1 - 2 * rho) * u[sel])
    return x, y


def affine_on_leaves(pwl: PiecewiseLinear1D, ifs: IteratedFunctionSystem, n_prime: int) -> bool:
    """True iff no breakpoint lies strictly inside a level-``n'`` cell."""
    if ifs.dim != 1:
        raise DimensionMismatch("leaf test is one-dimensional")
    bp = ifs.to_unit(pwl.breakpoints[:, None])[:, 0] if len(pwl.breakpoints) else np.empty(0)
    if not len(bp):
        return True
    cells = sorted(sorted((float(f(np.array([0.0]))[0]), float(f(np.array([1.0]))[0])))
                   for f in _level_maps(ifs, n_prime))
    lo = np.array([c[0] for c in cells])
    hi = np.array([c[1] for c in cells])
    idx = np.searchsorted(lo, bp, side="right") - 1
    ok = idx >= 0
    strictly = np.zeros(len(bp), dtype=bool)
    strictly[ok] = (bp[ok] > lo[idx[ok]]) & (bp[ok] < hi[idx[ok]])
    return not bool(strictly.any())


def _level_maps(ifs, level):
    maps = [AffineMap.identity(1)]
    for _ in range(level):
        maps = [m.compose(f) for m in maps for f in ifs.unit_maps]
    return maps


def _check_unsaturated(pwl):
    vals = np.concatenate([pwl.slopes * pwl.knots[:-1] + pwl.intercepts,
                           pwl.slopes * pwl.knots[1:] + pwl.intercepts])
    if np.max(np.abs(vals)) >= 1:
        raise MarginSaturated("|net| reaches 1 on [0, 1]; the hinge is not active everywhere")


def exact_population_gradient(net: LayeredNet, dist: FractalDistribution, n_prime: int | None = None):
    """Exact gradient of the population hinge loss, as ``[(dW, db), ...]``.

    Requires ``|net| < 1`` on [0, 1] so the hinge is active on the whole
    support; the gradient is then ``-E[y dnet/dtheta]``.  Level-``n'`` cells
    with no breakpoint inside use the closed-form cell moments; other cells
    and all gaps of levels up to ``n'`` are integrated piece by piece.
    """
    geo = cantor_geometry(dist)
    n_prime = dist.depth - 1 if n_prime is None else n_prime
    pwl = extract_pwl_1d(net)
    _check_unsaturated(pwl)
    coeffs = pwl.gradient_coefficients()
    rho = geo.rho
    knots = pwl.knots
    P = pwl.num_pieces

    # weights per piece for the constant part and the x part of each derivative
    w0 = np.zeros(P)
    w1 = np.zeros(P)

    L = rho ** n_prime
    lo = cell_intervals(rho, n_prime)
    hi = lo + L
    pa = np.clip(np.searchsorted(knots, lo, side="right") - 1, 0, P - 1)
    pb = np.clip(np.searchsorted(knots, hi, side="left") - 1, 0, P - 1)
    clean = pa == pb
    nu0 = 2.0 ** -n_prime * 0.5 * geo.S[n_prime]
    centers = lo + 0.5 * L
    np.add.at(w0, pa[clean], nu0)
    np.add.at(w1, pa[clean], nu0 * centers[clean])
    # cells cut by breakpoints: integrate each sub-piece
    for c in np.flatnonzero(~clean):
        cuts = np.concatenate([[lo[c]], knots[(knots > lo[c]) & (knots < hi[c])], [hi[c]]])
        m0, m1 = signed_moments(geo, cuts[:-1], cuts[1:])
        piece = np.clip(np.searchsorted(knots, 0.5 * (cuts[:-1] + cuts[1:]), side="right") - 1, 0, P - 1)
        np.add.at(w0, piece, m0)
        np.add.at(w1, piece, m1)
    # gaps of levels 1..n': only negatives, uniform
    if n_prime:
        gl, gr, lv = gap_intervals(rho, n_prime)
        for a, b, j in zip(gl, gr, lv):
            dens = geo.gap_density(int(j))
            if dens == 0:
                continue
            cuts = np.concatenate([[a], knots[(knots > a) & (knots < b)], [b]])
            piece = np.clip(np.searchsorted(knots, 0.5 * (cuts[:-1] + cuts[1:]), side="right") - 1, 0, P - 1)
            np.add.at(w0, piece, -0.5 * dens * np.diff(cuts))
            np.add.at(w1, piece, -0.5 * dens * 0.5 * np.diff(cuts ** 2))

    grads = []
    for dW1, dW0, db in coeffs:
        gW = -(np.einsum("p,poi->oi", w0, dW0) + np.einsum("p,poi->oi", w1, dW1))
        gb = -np.einsum("p,po->o", w0, db)
        grads.append((gW, gb))
    return grads


def monte_carlo_gradient(net: LayeredNet, dist: FractalDistribution, m: int, seed: int):
    """Sample mean and standard error of ``-y dnet/dtheta`` over ``m`` draws."""
    from .distributions import sample_dataset

    data = sample_dataset(dist, m, seed)
    X, y = data.X, data.y.astype(float)
    mean, sq = None, None
    for s in range(0, m, 50_000):
        sl = slice(s, s + 50_000)
        # per-sample gradients through a diagonal trick: accumulate sums and squares
        acts = net.activations(X[sl])
        inputs = [X[sl]] + acts[:-1]
        delta = -y[sl][:, None]
        per = [None] * net.depth
        for k in range(net.depth - 1, -1, -1):
            per[k] = (delta[:, :, None] * inputs[k][:, None, :], delta)
            if k:
                delta = (delta @ net.weights[k]) * (acts[k - 1] > 0)
        part = [(gW.sum(0), gb.sum(0)) for gW, gb in per]
        part_sq = [((gW ** 2).sum(0), (gb ** 2).sum(0)) for gW, gb in per]
        if mean is None:
            mean, sq = part, part_sq
        else:
            mean = [(a + c, b + d) for (a, b), (c, d) in zip(mean, part)]
            sq = [(a + c, b + d) for (a, b), (c, d) in zip(sq, part_sq)]
    out_mean = [(a / m, b / m) for a, b in mean]
    out_se = [(np.sqrt(np.maximum(sa / m - ma ** 2, 0) / m), np.sqrt(np.maximum(sb / m - mb ** 2, 0) / m))
              for (sa, sb), (ma, mb) in zip(sq, out_mean)]
    return out_mean, out_se


def init_error_exact(net: LayeredNet, dist: FractalDistribution) -> float:
    """``P(sign(net(x)) != y)`` under ``D_n``, with ``sign(0) = +1``."""
    geo = cantor_geometry(dist)
    pwl = extract_pwl_1d(net)
    pts = [pwl.knots]
    for p in range(pwl.num_pieces):
        s, t = pwl.slopes[p], pwl.intercepts[p]
        if s != 0 and pwl.knots[p] < -t / s < pwl.knots[p + 1]:
            pts.append([-t / s])
    pts = np.unique(np.concatenate(pts))
    mids = 0.5 * (pts[:-1] + pts[1:])
    positive = pwl(mids) >= 0
    # merge runs of equal sign so that the whole domain gives exact unit masses
    edges = [pts[0]]
    labels = [positive[0]]
    for x, s in zip(pts[1:-1], positive[1:]):
        if s != labels[-1]:
            edges.append(x)
            labels.append(s)
    edges.append(pts[-1])
    mp, _, mn, _ = cantor_cumulative(geo, np.array(edges))
    err = 0.0
    for k, s in enumerate(labels):
        if s:
            err += 0.5 * (mn[k + 1] - mn[k])
        else:
            err += 0.5 * (mp[k + 1] - mp[k])
    return float(err)


def threshold(t: int, k: int, delta: float) -> float:
    """The level bound ``log(4 t k^2 / delta) / log(3/2)``."""
    return math.log(4 * t * k * k / delta) / math.log(1.5)


def smallest_admissible_level(t: int, k: int, delta: float) -> int:
    return math.floor(threshold(t, k, delta)) + 1


@dataclass
class ProbeRow:
    seed: int
    grad_w_max: float
    grad_b_max: float
    init_error: float
    affine_ok: bool


@dataclass
class GradientProbeReport:
    t: int
    k: int
    n: int
    n_prime: int
    delta: float
    trials: int
    P_nprime: float
    rows: list

    @property
    def w_bound(self) -> float:
        return 5 * (self.P_nprime - 0.5)

    @property
    def b_bound(self) -> float:
        return 3 * (self.P_nprime - 0.5)

    @property
    def error_bound(self) -> float:
        return (1.5 - self.P_nprime) * (1 - self.P_nprime)

    def _frac(self, flags):
        return float(np.mean(flags)) if len(flags) else float("nan")

    @property
    def frac_w(self):
        return self._frac([r.grad_w_max <= self.w_bound for r in self.rows])

    @property
    def frac_b(self):
        return self._frac([r.grad_b_max <= self.b_bound for r in self.rows])

    @property
    def frac_error(self):
        return self._frac([r.init_error >= self.error_bound for r in self.rows])

    @property
    def frac_affine(self):
        return self._frac([r.affine_ok for r in self.rows])

    def satisfied(self, r: ProbeRow) -> bool:
        return (r.grad_w_max <= self.w_bound and r.grad_b_max <= self.b_bound
                and r.init_error >= self.error_bound)

    @property
    def frac_all(self):
        return self._frac([self.satisfied(r) for r in self.rows])

    def summary(self) -> dict:
        return {
            "t": self.t, "k": self.k, "n": self.n, "n_prime": self.n_prime,
            "delta": self.delta, "trials": self.trials, "P_nprime": self.P_nprime,
            "w_bound": self.w_bound, "b_bound": self.b_bound, "error_bound": self.error_bound,
            "frac_w": self.frac_w, "frac_b": self.frac_b, "frac_error": self.frac_error,
            "frac_affine": self.frac_affine, "frac_all": self.frac_all,
            "target": 1 - self.delta,
        }


def hardness_probe(t: int, k: int, curve: ApproximationCurve, n: int, delta: float,
                   trials: int, seed: int, n_prime: int | None = None,
                   gamma: float | None = None) -> GradientProbeReport:
    """PaperUniform-initialized ``(t, k)`` nets against the 1-D Cantor distribution of depth ``n``.

    ``t`` counts affine layers, so the hidden widths are ``[k] * (t - 1)``.
    """
    T = threshold(t, k, delta)
    n_prime = smallest_admissible_level(t, k, delta) if n_prime is None else n_prime
    if not (n_prime > T and n > n_prime):
        raise ThresholdViolated(
            f"need n > n' > log(4*{t}*{k}^2/{delta})/log(3/2) = {T:.4f}; got n={n}, n'={n_prime}")
    if curve.n != n:
        raise ValueError(f"curve has {curve.n} levels, expected {n}")
    ifs = builtin_ifs("cantor1d")
    gamma = 3.0 ** -n / 4 if gamma is None else gamma
    dist = FractalDistribution(ifs, n, gamma, curve)
    widths = [1] + [k] * (t - 1) + [1]
    rows = []
    for i in range(trials):
        s = seed + i
        net = init(PaperUniform(0.5), widths, s)
        grads = exact_population_gradient(net, dist, n_prime)
        gw = max(float(np.max(np.abs(g))) for g, _ in grads)
        gb = max(float(np.max(np.abs(b))) for _, b in grads)
        err = init_error_exact(net, dist)
        ok = affine_on_leaves(extract_pwl_1d(net), ifs, n_prime)
        rows.append(ProbeRow(s, gw, gb, err, ok))
    return GradientProbeReport(t, k, n, n_prime, delta, trials, curve.P(n_prime), rows)


def _segments(dist: FractalDistribution):
    """The finest partition of [0, 1]: level-n cells and gaps, in order, with masses."""
    geo = cantor_geometry(dist)
    rho, n = geo.rho, geo.n
    L = rho ** n
    cl = cell_intervals(rho, n)
    pos_cell = 0.5 * 2.0 ** -n
    segs = [(a, a + L, pos_cell, 0.0) for a in cl]
    gl, gr, lv = gap_intervals(rho, n)
    for a, b, j in zip(gl, gr, lv):
        segs.append((a, b, 0.0, 0.5 * geo.gap_density(int(j)) * (b - a)))
    segs.sort()
    return np.array([(s[2], s[3]) for s in segs])


def best_error_region_budget(dist: FractalDistribution, j: int, R: int, cap: int = 10**8) -> float:
    """Least error of any sign pattern with at most ``R`` constant-sign regions on [0, 1].

    Dynamic program over the ordered level-``n`` cells and gaps; the optimal
    sign is constant on each of them, so this is exact.  ``j`` is checked
    against the equal-mass-per-cell hypothesis at level ``j``.
    """
    if R < 1:
        raise ValueError("need at least one region")
    cantor_geometry(dist)
    if not 1 <= j <= dist.depth:
        raise ValueError("need 1 <= j <= n")
    masses = _segments(dist)
    m = len(masses)
    R = min(R, m)
    if m * R * 2 > cap:
        raise BudgetTooLarge(f"table of {m}x{R}x2 entries exceeds {cap}")
    # cost of labelling a segment +1 is its negative mass, -1 its positive mass
    cost = np.stack([masses[:, 1], masses[:, 0]], axis=1)
    INF = np.inf
    best = np.full((R, 2), INF)
    best[0] = cost[0]
    for i in range(1, m):
        new = np.full((R, 2), INF)
        for s in range(2):
            same = best[:, s]
            switch = np.concatenate([[INF], best[:-1, 1 - s]])
            new[:, s] = np.minimum(same, switch) + cost[i, s]
        best = new
    return float(best.min())


def region_budget_lower_bound(curve: ApproximationCurve, r: int, st: int, j: int) -> float:
    """``(1 - r^(st - j)) (1 - P(j))``."""
    return (1 - float(r) ** (st - j)) * (1 - curve.P(j))
