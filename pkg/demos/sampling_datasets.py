"""Fractal distributions, approximation curves and dataset files."""
import tempfile
from pathlib import Path

import numpy as np

from fractalnets.distributions import (
    FractalDistribution, GapStyle, coarse_curve, empirical_P, fine_curve, preset_curve,
    read_dataset, sample_dataset, write_dataset,
)
from fractalnets.ifs import builtin_ifs

for cid in range(1, 7):
    print(f"curve #{cid}: P(1..5) =", np.round(preset_curve(cid).P_values()[1:], 6))

ifs = builtin_ifs("cantor2d")
n = 3
gamma = 3.0 ** -n / 10
for label, curve in (("coarse", coarse_curve(n)), ("fine", fine_curve(n))):
    dist = FractalDistribution(ifs, n, gamma, curve, GapStyle.CENTRAL_GAP)
    data = sample_dataset(dist, 20_000, seed=1)
    est = [round(empirical_P(ifs, data, j), 3) for j in range(n + 1)]
    print(f"{label:6s} curve: P = {np.round(curve.P_values(), 3)}, measured {est}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "train.csv"
    write_dataset(data, path)
    print("\n" + "\n".join(path.read_text().splitlines()[:4]))
    print("round trip exact:", read_dataset(path) == data)
