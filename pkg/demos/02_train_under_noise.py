"""Train the residual adapter on synthetic few-shot data with noisy labels.

Generates a 20-class synthetic embedding problem, corrupts 40% of the
training labels symmetrically, then fine-tunes the adapter twice: once
with plain cross-entropy on the noisy labels (FT) and once with the
top-K multiple-label weighting (FT+WT).  Prints the test-accuracy
trajectory of both runs.
"""

from dataclasses import replace

from crof.store import NoiseSpec, generate_synthetic, inject_noise
from crof.trainer import TrainConfig, train

dataset, prototypes = generate_synthetic(
    n_classes=20, dims=32, shots=10, test_per_class=50, sigma=0.4, seed=0
)
noisy = inject_noise(dataset, NoiseSpec("symmetric", delta=0.4, seed=0))

base = TrainConfig(epochs=50, lr=1e-2, seed=0)
_, ft = train(noisy, prototypes, prototypes, replace(base, use_wt=False))
_, ftwt = train(noisy, prototypes, prototypes, replace(base, use_wt=True))

print("epoch   FT acc   FT+WT acc")
for (e1, _, a1, _), (_, _, a2, _) in zip(ft.rows, ftwt.rows):
    if e1 % 5 == 0:
        print(f"{e1:5d}   {a1:6.2f}   {a2:9.2f}")

print(f"\nfinal:  FT {ft.final_accuracy():.2f}%   FT+WT {ftwt.final_accuracy():.2f}%")
print("The weighted objective resists memorizing the corrupted labels.")
