"""Built-in fractals, their separation, and membership / address queries."""
import numpy as np

from fractalnets.ifs import (
    BUILTIN_NAMES, Region, address_of, builtin_ifs, compose_address, margin_membership,
    membership, rewrite_blocked,
)

for name in BUILTIN_NAMES:
    ifs = builtin_ifs(name)
    rep = ifs.assumptions
    print(f"{name:11s} r={ifs.r} d={ifs.dim} separation={rep.separation:.4f} ok={rep.ok}")

cantor = builtin_ifs("cantor1d")
print("\n0.5 in K_1?", membership(cantor, 0.5, 1))
print("1/3 in K_10?", membership(cantor, 1 / 3, 10))
print("address of 0.7 at level 2:", address_of(cantor, 0.7, 2))
f = compose_address(cantor, (2, 1))
print("cell (2,1) is", f(np.array([0.0]))[0], "to", f(np.array([1.0]))[0])

# margins: deep inside, on the boundary, and in the gap
for x in (1 / 6, 1 / 3, 0.5):
    print(f"x={x:.4f}:", Region(margin_membership(cantor, x, 1, 0.01)).name)

# K_4 of the 2-D Cantor set seen as K_2 of the system with 16 maps
c2 = builtin_ifs("cantor2d")
X = np.random.default_rng(0).random((100_000, 2))
inside = membership(c2, X, 4)
print(f"\nfraction of the square in K_4: {inside.mean():.5f} (exact {(4 / 9) ** 4:.5f})")
print("blocked system agrees:", np.array_equal(inside, membership(rewrite_blocked(c2, 2), X, 2)))
