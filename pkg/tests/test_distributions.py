import numpy as np
import pytest

from fractalnets.distributions import (
    ApproximationCurve, FractalDistribution, GapStyle, ParseError, UnknownPreset, coarse_curve,
    curve_P, distribution_from_meta, empirical_P, fine_curve, preset_curve, read_dataset,
    sample_dataset, sample_negative, sample_positive, write_dataset,
)
from fractalnets.ifs import IndexOutOfRange, MarginTooLarge, Region, builtin_ifs, margin_membership, membership


def binom_sigma(p, m):
    return np.sqrt(p * (1 - p) / m)


# curves

def test_fine_curve_values():
    c = ApproximationCurve((0, 0, 0, 0, 1))
    assert c.P(4) == 0.5 and c.P(5) == 1.0


def test_first_level_curve():
    assert ApproximationCurve((1, 0, 0, 0, 0)).P(1) == 1.0


def test_curve_level_range():
    with pytest.raises(IndexOutOfRange):
        curve_P(fine_curve(3), 4)


def test_curve_rejects_bad_weights():
    with pytest.raises(ValueError):
        ApproximationCurve((0.5, 0.6))
    with pytest.raises(ValueError):
        ApproximationCurve((1.5, -0.5))


@pytest.mark.parametrize("cid,level,value", [
    (1, 1, 0.629449), (1, 2, 0.742142), (1, 3, 0.840246), (1, 4, 0.925651), (4, 4, 0.684241),
])
def test_preset_values(cid, level, value):
    assert preset_curve(cid).P(level) == pytest.approx(value, abs=1e-6)


def test_preset_fine_and_monotone():
    six = preset_curve(6)
    assert [six.P(j) for j in range(1, 5)] == [0.5] * 4 and six.P(5) == 1
    for cid in range(1, 7):
        assert np.all(np.diff(preset_curve(cid).P_values()) >= 0)


def test_preset_errors():
    with pytest.raises(UnknownPreset):
        preset_curve(7)
    with pytest.raises(UnknownPreset):
        preset_curve(1, n=3)


def test_geometric_rule_reproduces_first_preset():
    np.testing.assert_allclose(coarse_curve(5).P_values(), preset_curve(1).P_values(), atol=1e-9)


# samplers

def cantor(n=3, gamma=None, curve=None, style=GapStyle.FULL_COMPLEMENT, name="cantor1d"):
    ifs = builtin_ifs(name)
    gamma = 3.0 ** -n / 4 if gamma is None else gamma
    return FractalDistribution(ifs, n, gamma, curve or coarse_curve(n), style)


def test_margin_cap_on_distribution():
    with pytest.raises(MarginTooLarge):
        cantor(2, gamma=0.06)


@pytest.mark.parametrize("name", ["cantor1d", "cantor2d", "sierpinski", "vicsek", "pentaflake"])
def test_sample_postconditions(name):
    ifs = builtin_ifs(name)
    n = 3
    dist = FractalDistribution(ifs, n, 0.2 * 3.0 ** -n * 0.45, coarse_curve(n))
    rng = np.random.default_rng(0)
    pos = sample_positive(dist, rng, 2000)
    neg = sample_negative(dist, rng, 2000)
    assert np.all(margin_membership(ifs, pos, n, dist.margin) == Region.INSIDE_WITH_MARGIN)
    assert not membership(ifs, neg, n).any()


def test_positive_mass_of_left_cell():
    dist = cantor(1, gamma=0.01, curve=fine_curve(1))
    x = sample_positive(dist, np.random.default_rng(1), 10**5)
    assert abs(np.mean(x < 1 / 3) - 0.5) < 0.01


def test_positive_mean_is_symmetric():
    dist = cantor(2, gamma=1e-6)
    x = sample_positive(dist, np.random.default_rng(2), 10**5)
    assert abs(x.mean() - 0.5) < 4 * x.std() / np.sqrt(len(x))


def test_first_gap_level():
    dist = cantor(3)
    x = sample_negative(dist, np.random.default_rng(3), 1000, level=1)
    assert np.all((x > 1 / 3) & (x < 2 / 3))


def test_central_gap_first_level():
    dist = cantor(2, name="cantor2d", style=GapStyle.CENTRAL_GAP)
    x = sample_negative(dist, np.random.default_rng(4), 1000, level=1)
    assert np.all((x > 1 / 3) & (x < 2 / 3))


def test_central_gap_needs_designation():
    with pytest.raises(ValueError):
        FractalDistribution(builtin_ifs("vicsek"), 2, 0.01, coarse_curve(2), GapStyle.CENTRAL_GAP)


def test_negative_level_occupancy():
    n = 4
    curve = ApproximationCurve((0.1, 0.2, 0.3, 0.4))
    dist = cantor(n, curve=curve)
    x = sample_negative(dist, np.random.default_rng(5), 40_000)
    ifs = dist.ifs
    # the gap level is the first level whose set excludes the point
    level = np.ones(len(x), dtype=int)
    for j in range(1, n):
        level += membership(ifs, x, j)
    for j in range(1, n + 1):
        frac = np.mean(level == j)
        assert abs(frac - curve.level_weights[j - 1]) < 3 * binom_sigma(curve.level_weights[j - 1], len(x)) + 1e-3


def test_dataset_rules():
    dist = cantor(3)
    with pytest.raises(ValueError):
        sample_dataset(dist, 0, 0)
    assert len(sample_dataset(dist, 1, 0)) == 1
    assert sample_dataset(dist, 500, 9) == sample_dataset(dist, 500, 9)


def test_label_balance_at_full_size():
    ifs = builtin_ifs("cantor2d")
    dist = FractalDistribution(ifs, 5, 3.0 ** -5 / 10, preset_curve(1), GapStyle.CENTRAL_GAP)
    data = sample_dataset(dist, 50_000, 0)
    assert abs(np.sum(data.y == 1) - 25_000) < 3 * np.sqrt(50_000 * 0.25)


@pytest.mark.parametrize("curve", [coarse_curve(4), fine_curve(4), ApproximationCurve((0.4, 0.0, 0.35, 0.25))])
def test_empirical_P(curve):
    dist = cantor(4, curve=curve)
    m = 10**5
    data = sample_dataset(dist, m, 11)
    ifs = dist.ifs
    for j in range(5):
        p = curve.P(j)
        assert abs(empirical_P(ifs, data, j) - p) <= 3 * binom_sigma(p, m) + 1e-12


def test_exhaustive_postconditions_on_dataset():
    dist = cantor(4)
    data = sample_dataset(dist, 5000, 12)
    pos, neg = data.X[data.y == 1], data.X[data.y == -1]
    assert np.all(margin_membership(dist.ifs, pos, 4, dist.margin) == Region.INSIDE_WITH_MARGIN)
    assert not membership(dist.ifs, neg, 4).any()


# file format

def test_round_trip(tmp_path):
    dist = cantor(3, name="cantor2d", style=GapStyle.CENTRAL_GAP)
    data = sample_dataset(dist, 300, 5)
    path = tmp_path / "d.csv"
    write_dataset(data, path)
    back = read_dataset(path)
    assert back == data
    assert path.read_text().splitlines()[0] == "x1,x2,y"
    again = distribution_from_meta(back.meta)
    assert again.ifs.name == "cantor2d"
    assert (again.depth, again.margin, again.curve, again.gap_style) == (
        dist.depth, dist.margin, dist.curve, dist.gap_style)


def test_header_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,y\n0.1,0.2,1\n")
    with pytest.raises(ParseError, match="line 1"):
        read_dataset(path)


def test_bad_row_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,y\n0.1,1\n0.2,0\n")
    with pytest.raises(ParseError, match="line 3"):
        read_dataset(path)
