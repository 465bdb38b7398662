"""Cylinder dimension and entropy of a few subshifts under the standard r-adic metric.

Prints, for each subshift, the exact entropy, the cylinder-count dimension
for growing word length, and the product dimension * log r. On the full
shift the product is exactly log r; on proper SFTs it approaches the
entropy as the word length grows.

    python demos/subshift_dimension.py
"""
import math

from hauslip.symbolic import Subshift, cylinder_count, cylinder_dimension, sft_entropy

SUBSHIFTS = {
    "full 2-shift": Subshift.full(2),
    "full 3-shift": Subshift.full(3),
    "golden mean": Subshift.sft([[1, 1], [1, 0]]),
    "no two equal neighbours on 3 symbols": Subshift.sft([[0, 1, 1], [1, 0, 1], [1, 1, 0]]),
}

for name, sub in SUBSHIFTS.items():
    h = math.log(sub.r) if sub.kind == "full" else sft_entropy(sub)
    counts = [cylinder_count(sub, n) for n in (1, 2, 4, 8, 16)]
    print(f"\n{name}: r={sub.r}, entropy {h:.9f}, cylinder counts n=1,2,4,8,16: {counts}")
    for n_max in (5, 10, 15, 20):
        hd = cylinder_dimension(sub, n_max)
        print(f"  n_max={n_max:>2}  dimension {hd:.9f}  product {hd * math.log(sub.r):.9f}"
              f"  gap {hd * math.log(sub.r) - h:+.2e}")
