"""Compile the depth-2n+1, width-5dr classifier and check it against the oracle."""
import time

import numpy as np

from fractalnets.construct import build_blocked_classifier, build_exact_classifier, sign, verify_classifier
from fractalnets.ifs import Region, builtin_ifs, margin_membership, min_cell_inradius

for name, n in (("cantor1d", 6), ("cantor2d", 4), ("sierpinski", 4), ("vicsek", 4), ("pentaflake", 3)):
    ifs = builtin_ifs(name)
    gamma = 0.2 * min_cell_inradius(ifs, n)
    start = time.perf_counter()
    net = build_exact_classifier(ifs, n, gamma)
    rep = verify_classifier(net, ifs, n, gamma, 20_000, seed=0)
    print(f"{name:11s} n={n}: depth {net.depth:2d}, width {net.width:2d}, "
          f"positives {rep.pos_correct}/{rep.pos_total}, negatives {rep.neg_correct}/{rep.neg_total} "
          f"({time.perf_counter() - start:.2f}s)")

# blocking trades depth for width
cantor = builtin_ifs("cantor1d")
gamma = 0.2 * min_cell_inradius(cantor, 6)
exact = build_exact_classifier(cantor, 6, gamma)
x = np.random.default_rng(1).random(100_000)
# points within the margin band of a cell boundary carry no label; leave them out
x = x[margin_membership(cantor, x[:, None], 6, gamma) != Region.BOUNDARY_BAND]
for s in (1, 2, 3, 6):
    net = build_blocked_classifier(cantor, 6, s, gamma)
    agree = np.mean(sign(net(x)) == sign(exact(x)))
    print(f"s={s}: depth {net.depth:2d}, width {net.width:3d}, agreement with exact net {agree:.5f}")
