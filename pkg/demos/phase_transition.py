"""Success frequency versus sparsity on 128x256 Gaussian matrices.

A reduced version of the phase-transition study: 20 trials per point.
Pass an output directory as the first argument to keep the CSV files.
"""
import sys

from nst import ProblemSpec
from nst.bench import ExperimentSpec, run_phase_transition

algos = ["nst_ht", "nst_ht_fb", {"name": "adaptive_nst_ht", "params": {"kappa": 0.3}}, "iht", "omp", "sp", "htp"]
spec = ExperimentSpec("phase", ProblemSpec(128, 256, 30), algos, {"s": [20, 30, 40, 50, 60]},
                      trials=20, seed=1, output_path=sys.argv[1] if len(sys.argv) > 1 else None)
res = run_phase_transition(spec)

names = [a.id for a in spec.algorithms]
print("   s  " + "".join(f"{n:>17s}" for n in names))
for s in spec.sweep["s"]:
    print(f"{s:4d}  " + "".join(f"{res.frequency(n, s=s):17.2f}" for n in names))
