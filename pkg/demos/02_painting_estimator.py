"""How the painting estimator turns style classes into loss weights.

Interpolates the strength table for a few probability mixes, then shows
the texture-driven smoothness rule: the median per-pixel total variation
of the painting feeds a steep sigmoid that suppresses the TV weight on
heavily textured paintings.
"""

from pathlib import Path

import numpy as np

from painterly import (
    interpolate_weights,
    load_style_table,
    median_tv,
    one_hot_probs,
    predict_weights,
    tv_sigmoid,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

table = load_style_table()
print("strength table:")
for entry in table.entries:
    marker = " (defaulted)" if entry.default else ""
    print(f"  {entry.name:30s} {entry.strength:6s} -> "
          f"(w_s={entry.w_s}, w_hist={entry.w_hist}){marker}")

print("\ninterpolated weights:")
for probs in (one_hot_probs("Baroque", table),
              one_hot_probs("Cubism", table),
              {"Baroque": 0.5, "Cubism": 0.5},
              {name: 1 / 18 for name in table.names}):
    w_s, w_hist = interpolate_weights(probs, table)
    label = ", ".join(f"{k}={v:.2f}" for k, v in list(probs.items())[:2])
    more = " ..." if len(probs) > 2 else ""
    print(f"  {{{label}{more}}} -> w_s={w_s:.3f}, w_hist={w_hist:.3f}")

rng = np.random.default_rng(0)
flat = np.full((64, 64, 3), 0.5)
textured = rng.random((64, 64, 3))
print("\nmedian total variation and the smoothness weight:")
for name, img in (("flat painting", flat), ("noisy painting", textured)):
    mtv = median_tv(img)
    print(f"  {name}: median_tv={mtv:.5f}, sigmoid={tv_sigmoid(mtv):.4f}")
    w = predict_weights(img, one_hot_probs("Cubism", table), table)
    print(f"    one-hot Cubism -> w_s={w.w_s}, w_hist={w.w_hist}, "
          f"w_tv={w.w_tv:.4f}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = np.linspace(0, 0.01, 500)
    plt.figure(figsize=(5, 3))
    plt.plot(xs, [tv_sigmoid(float(x)) for x in xs])
    plt.axvline(2.5e-3, ls="--", c="gray")
    plt.annotate("midpoint: sigmoid(2.5e-3) = 5", (2.6e-3, 5.1))
    plt.xlabel("median total variation of the painting")
    plt.ylabel("TV weight multiplier")
    plt.tight_layout()
    plt.savefig(OUT / "02_tv_sigmoid.png", dpi=120)
    print(f"\nsigmoid curve written to {OUT / '02_tv_sigmoid.png'}")
except ImportError:
    pass
