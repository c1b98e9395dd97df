"""Oracle calls for Grover search against an exhaustive classical scan, written as CSV."""

import sys
from pathlib import Path

from qstat import bench

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
for study in ("grover", "classical"):
    res = bench.scaling_study(study, seed=1, trials=200, out=out)
    print(f"{study:10s} exponent {res.exponent:.3f}  95% CI [{res.ci_low:.3f}, {res.ci_high:.3f}]")
    for row in res.rows:
        print("   ", row)
print(f"tables in {out}/")
