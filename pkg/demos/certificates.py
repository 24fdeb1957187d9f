"""Restricted isometry constants, the convergence certificate and the
fixed-support limits on small matrices where every support can be listed.
"""
import numpy as np

from nst import analysis, build_operator
from nst.probgen import gaussian_matrix, rng_from_seed

rng = rng_from_seed(0)
op = build_operator(gaussian_matrix(rng, 8, 16))
for s in (1, 2, 3):
    rep = analysis.rip_report(op, s)
    bound = analysis.prip_upper_bound(op, rep.delta_s)
    print(f"s={s}: delta={rep.delta_s:.4f}  gamma={rep.gamma_s:.4f}  (bound {bound:.4f}, {rep.supports_checked} supports)")

# Gaussian matrices this small are far from certifiable; a kernel spanned by a
# flat vector gives gamma_s = s / N exactly.
N = 15
v = rng.choice([-1.0, 1.0], N) / np.sqrt(N)
q = np.linalg.qr(np.column_stack([v, rng.standard_normal((N, N - 1))]))[0]
flat = build_operator(q[:, 1:].T)
cert = analysis.certificate(flat, 1)
print(f"\n14x15 flat kernel: gamma_3 = {cert.gamma_3s:.3f}, rho_ht = {cert.rho_ht:.3f}, "
      f"rho_fb = {cert.rho_fb:.3f}, tau_fb = {cert.tau_fb:.3f}")
for k in (0, 5, 10):
    print(f"  error bound after {k:2d} steps from unit error: {analysis.error_bound_ht(cert, 1.0, 0.0, k):.2e}")

# fixed-support limits coincide on Parseval frames
q = np.linalg.qr(rng.standard_normal((20, 10)))[0]
frame = build_operator(q.T)
lim = analysis.fixed_support_limits(frame, [1, 4, 7], rng.standard_normal(20))
print(f"\nParseval frame: |x_natural - x_ddag|_max = {np.abs(lim.x_natural - lim.x_ddag).max():.1e}")
