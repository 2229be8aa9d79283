"""A small depth sweep on the 2-D Cantor distribution (the full grid is `fractalnets sweep`)."""
from fractalnets import experiments as ex

text = """fractal=cantor2d
n=3
curve=coarse
train_size=5000
test_size=2000
depth=1
depth=3
width=32
lr=0.01
seeds=2
steps=2000
"""
cfg = ex.resolve_config(ex.parse_config_text(text))
for row in ex.aggregate(ex.run_sweep(cfg, jobs=1)):
    print(f"depth {row['depth']} width {row['width']}: mean best accuracy {row['mean']:.3f} (sd {row['sd']:.3f})")
