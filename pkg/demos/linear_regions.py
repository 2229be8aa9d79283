"""Exact piecewise-linear form of 1-D nets: regions and sign changes."""

from fractalnets.analysis import count_regions_and_crossings, dense_grid_regions, extract_pwl_1d, region_bound
from fractalnets.construct import build_exact_classifier
from fractalnets.ifs import builtin_ifs
from fractalnets.training import Uniform, init

cantor = builtin_ifs("cantor1d")
for n in range(1, 7):
    net = build_exact_classifier(cantor, n, 3.0 ** -n / 4)
    regions, crossings = count_regions_and_crossings(extract_pwl_1d(net))
    print(f"exact classifier n={n}: {regions:4d} regions (>= 2^n = {2 ** n}), {crossings} sign changes")

print()
for t, k in ((2, 4), (2, 8), (3, 8), (4, 8)):
    counts = [count_regions_and_crossings(extract_pwl_1d(init(Uniform(2.0), [1] + [k] * (t - 1) + [1], s)))[0]
              for s in range(50)]
    print(f"random nets t={t} k={k}: max {max(counts)} regions, bound (ek)^t = {region_bound(k, t):.0f}")

net = init(Uniform(2.0), [1, 8, 8, 1], 0)
print("\nexact count", count_regions_and_crossings(extract_pwl_1d(net))[0],
      "vs dense grid", dense_grid_regions(net, 10**6))
