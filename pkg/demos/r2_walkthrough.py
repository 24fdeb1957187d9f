"""One equation, two unknowns: 2 x1 + x2 = 2, looking for a 1-sparse solution.

The minimum-norm solution is (0.8, 0.4).  Hard thresholding keeps the first
entry; the NST step then moves back onto the line.  Plain NST+HT shrinks the
error by a factor 5 per step, the feedback variant lands on (1, 0) at once,
and unit-step IHT overshoots because ||A||^2 = 5.
"""
import numpy as np

from nst import SolverConfig, build_operator, solve_iht, solve_nst_ht, solve_nst_ht_fb, solve_nst_stretched_ht

op = build_operator([[2.0, 1.0]])
b = np.array([2.0])
target = np.array([1.0, 0.0])

for name, solver in [("NST+HT", solve_nst_ht), ("NST+HT+FB", solve_nst_ht_fb),
                     ("NST+stretchedHT", solve_nst_stretched_ht), ("IHT", solve_iht)]:
    res = solver(op, b, SolverConfig(s=1, max_iters=30, trace=True))
    print(f"\n{name}: {res.termination} after {res.iterations} iterations")
    for t in res.trace[:6]:
        print(f"  k={t.iter}  u={np.array2string(t.u, precision=6)}  |u - (1,0)| = {np.linalg.norm(t.u - target):.2e}")
