"""MaxCut on a triangle with QAOA at depths 1 to 3."""

from qstat import variational as va

cost = va.CostHamiltonian.maxcut([(0, 1), (1, 2), (0, 2)])
for res in va.qaoa_depth_sweep(cost, [1, 2, 3], rng_seed=7):
    print(res.to_json())
