"""Mean relative error versus noise level for signal-side noise, s = 5.

b = A(x + v) with ||x|| = 1 and ||v|| = eps.  IHT ignores that the iterate
should explain b; the NST variants keep every iterate on {Ax = b}.
"""
from nst import NoiseModel, ProblemSpec
from nst.bench import ExperimentSpec, run_noise_sweep

eps = [0.0, 0.05, 0.1, 0.15, 0.2]
spec = ExperimentSpec("noise", ProblemSpec(128, 256, 5, noise=NoiseModel("signal")),
                      ["nst_ht", "nst_ht_fb", "iht", "omp"], {"s": [5], "eps": eps}, trials=50, seed=3)
res = run_noise_sweep(spec)
names = [a.id for a in spec.algorithms]
print(" eps  " + "".join(f"{n:>12s}" for n in names))
for e in eps:
    print(f"{e:4.2f}  " + "".join(f"{res.mean_error(n, eps=e):12.4f}" for n in names))
