"""Walk through the top-K multiple-label weighting on a tiny example.

Given a sample whose (possibly noisy) annotated label sits at some rank r
in the descending similarity list, the weighting either trusts the label
(one-hot), smooths mass between the label and the most similar classes,
or discards it in favor of the ranking.  This script prints the raw
weights w and their similarity-normalized form w* for the three regimes.
"""

import numpy as np

from crof.weighting import max_trusted_rank, weights_for_sample

ALPHA, BETA, GAMMA = 0.8, 0.8, 0.9


def show(title, logits, original, K=3):
    wv = weights_for_sample(np.asarray(logits, float), original, K, ALPHA, BETA, GAMMA)
    print(f"\n{title}")
    print(f"  annotated label: class {original}  (rank {wv.candidates.tolist().index(original) + 1 if original in wv.candidates else '>K'})")
    for c, w, ws in zip(wv.candidates, wv.w, wv.w_star):
        print(f"  class {c}:  w = {w:8.6f}   w* = {ws:8.6f}")


# scenario 1: label agrees with the top-1 similarity -> trust it outright
show("Scenario 1: label ranked first -> one-hot", [2.0, 0.5, 1.0], original=0)

# scenario 2: label ranked 2nd of top-3 -> smooth between label and ranking
show("Scenario 2: label at rank 2 -> smoothed", np.log([0.9, 0.7, 0.5]), original=1)

# scenario 3: label outside the top-K -> keep beta on top-1, split the rest
show("Scenario 3: label below rank K -> discarded", np.log([0.9, 0.7, 0.5, 0.2, 0.1]), original=4)

print(
    f"\nWith alpha={ALPHA}, beta={BETA}, gamma={GAMMA} the annotated label outweighs"
    f"\nthe top-ranked class only up to rank {max_trusted_rank(ALPHA, BETA, GAMMA)}."
)
