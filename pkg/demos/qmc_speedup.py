"""Error-vs-calls for quantum and classical Monte Carlo on the same distribution and payoff."""

from qstat import bench

for study in ("qmc_quantum", "qmc_classical"):
    res = bench.scaling_study(study, seed=3)
    print(f"{study}: calls ~ epsilon^{res.exponent:.2f}")
    for row in res.rows:
        print(f"    epsilon {row['epsilon']:.2e}  calls {row['calls']}")
