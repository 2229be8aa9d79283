"""Population gradients and errors of PaperUniform-initialized nets on the 1-D Cantor distribution.

With biases 1/2 and small weights every neuron stays active on [0, 1], so the
net is affine there.  The distribution is symmetric about 1/2 with balanced
labels, so the exact population gradient of the hinge loss vanishes and the
initial error stays near 1/2 whatever the curve; only the bounds that the
probe checks against depend on P(n').
"""
import numpy as np

from fractalnets.analysis import hardness_probe, threshold
from fractalnets.distributions import coarse_curve, fine_curve

t, k, delta = 2, 4, 0.5
print(f"threshold log(4tk^2/delta)/log(1.5) = {threshold(t, k, delta):.4f}")
for label, curve in (("fine", fine_curve(15)), ("coarse", coarse_curve(15))):
    rep = hardness_probe(t, k, curve, 15, delta, trials=100, seed=0)
    s = rep.summary()
    worst = max(r.grad_w_max for r in rep.rows)
    err = np.mean([r.init_error for r in rep.rows])
    print(f"{label:6s}: P(n')={s['P_nprime']:.3f}; bounds |dW|<={s['w_bound']:.3f} |db|<={s['b_bound']:.3f} "
          f"error>={s['error_bound']:.3f}; largest |dW| {worst:.1e}, mean error {err:.3f}, "
          f"fraction meeting all bounds {s['frac_all']:.2f}")
