"""Hadamard walk on the 4-cycle: the raw position law keeps oscillating, its running average settles."""

import numpy as np

from qstat import walks

nb, start = walks.cycle_graph(4), walks.walk_start(4, 2)
raw = walks.coin_walk_distributions(nb, walks.HADAMARD_COIN, start, 16)
for t, dist in enumerate(raw, 1):
    avg = walks.coin_walk_cesaro(nb, walks.HADAMARD_COIN, start, t)
    print(f"t={t:2d}  raw {np.round(dist, 3)}  average {np.round(avg, 3)}")
