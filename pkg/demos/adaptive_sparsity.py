"""Effect of the starting sparsity s0 = kappa * s of the adaptive wrapper.

Gaussian nonzeros favour a small start, +-1 nonzeros a start close to s.
"""
from nst import ProblemSpec
from nst.bench import ExperimentSpec, run_adaptive_s0_sweep

kappas = [0.1, 0.3, 0.5, 0.7, 0.9]
for ensemble in ("gaussian", "bernoulli"):
    spec = ExperimentSpec("adaptive", ProblemSpec(128, 256, 50, ensemble), ["adaptive_nst_ht"],
                          {"s": [50], "kappa": kappas}, trials=30, seed=5)
    res = run_adaptive_s0_sweep(spec)
    freqs = "  ".join(f"k={k}: {res.frequency('adaptive_nst_ht', kappa=k):.2f}" for k in kappas)
    print(f"{ensemble:>9s}  {freqs}")
