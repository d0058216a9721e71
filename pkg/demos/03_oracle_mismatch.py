"""A perfect method scored with the wrong ground truth.

The oracle knows the illuminant exactly, but only as it appears in the raw
(pedestal-included) image. Scoring it against ground truth from subtracted
images charges it for the pipeline mismatch alone. The error grows with the
black level; the correctly matched run stays at zero.
"""

import warnings

from ccbench import make_benchmark
from ccbench.evaluation import oracle_mismatch_experiment

dataset = make_benchmark(50, seed=3)
print(f"{'black level':>11s} {'wrong median':>12s} {'wrong max':>9s} {'right median':>12s}")
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    for bl in (64, 129, 256, 512):
        wrong, right = oracle_mismatch_experiment(dataset, bl)
        print(f"{bl:11d} {wrong.stats.median:12.2f} {wrong.stats.max:9.2f} "
              f"{right.stats.median:12.2f}")
