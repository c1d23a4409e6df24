"""Sweep noise ratios and seeds, comparing FT against FT+WT.

Runs the full grid (3 noise ratios x 2 toggle sets x 3 seeds) on a small
synthetic problem and prints the per-cell and mean final accuracies.
The gap between low- and high-noise accuracy is the robustness signal:
it shrinks when the weighting is on.
"""

from collections import defaultdict

import numpy as np

from crof.store import generate_synthetic
from crof.trainer import TrainConfig, sweep


def factory(seed):
    return generate_synthetic(n_classes=20, dims=32, shots=10, test_per_class=50, sigma=0.4, seed=seed)


csv = sweep(
    TrainConfig(epochs=50, lr=1e-2),
    deltas=[0.2, 0.4, 0.8],
    seeds=[0, 1, 2],
    dataset_factory=factory,
    toggle_sets=(("ft",), ("ft", "wt")),
)
print(csv)

cells = defaultdict(list)
for line in csv.strip().splitlines()[1:]:
    delta, toggles, seed, final, best = line.split(",")
    cells[(float(delta), toggles)].append(float(final))

print("mean final accuracy:")
for (delta, toggles), vals in sorted(cells.items()):
    print(f"  delta={delta:.1f}  {toggles:6s}  {np.mean(vals):6.2f}%")

for toggles in ("ft", "ft+wt"):
    drop = np.mean(cells[(0.2, toggles)]) - np.mean(cells[(0.8, toggles)])
    print(f"accuracy drop from delta 0.2 to 0.8 with {toggles}: {drop:.2f} points")
