"""Least error reachable with a given number of sign regions, against the two bounds."""
from fractalnets.analysis import best_error_region_budget, region_budget_lower_bound
from fractalnets.distributions import ApproximationCurve, FractalDistribution, coarse_curve
from fractalnets.ifs import builtin_ifs

cantor = builtin_ifs("cantor1d")
n, j = 8, 6
for label, curve in (("late", ApproximationCurve((0, 0, 0, 0, 0, 0, 0.5, 0.5))), ("coarse", coarse_curve(n))):
    dist = FractalDistribution(cantor, n, 3.0 ** -n / 4, curve)
    print(f"{label} curve, 1-P({j}) = {1 - curve.P(j):.4f}")
    for st in (1, 2, 3, 4, 5):
        best = best_error_region_budget(dist, j, 2 ** st)
        print(f"  {2 ** st:2d} regions: optimum {best:.4f}, lower bound {region_budget_lower_bound(curve, 2, st, j):.4f}")
