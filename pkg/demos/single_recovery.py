"""Recover one 30-sparse vector from 128 Gaussian measurements with every solver."""
import time

import numpy as np

from nst import ProblemSpec, generate
from nst.bench import ALGORITHMS, run_algorithm

p = generate(ProblemSpec(n=128, N=256, s=30, seed=2024))
print(f"A is {p.a.shape[0]}x{p.a.shape[1]}, ||x||_0 = {np.count_nonzero(p.x_true)}\n")
print(f"{'algorithm':>26s}  {'iters':>5s}  {'rel. error':>10s}  {'time [ms]':>9s}  termination")
for name in ALGORITHMS:
    t0 = time.perf_counter()
    res = run_algorithm(name, p.op, p.b, 30, kappa=0.3)
    ms = 1e3 * (time.perf_counter() - t0)
    err = np.linalg.norm(res.u - p.x_true) / np.linalg.norm(p.x_true)
    print(f"{name:>26s}  {res.iterations:5d}  {err:10.2e}  {ms:9.2f}  {res.termination}")
