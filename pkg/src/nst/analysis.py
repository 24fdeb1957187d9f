"""Restricted isometry constants, fixed-support limits and error bounds.

delta_s is ``max_T ||I - A_T^T A_T||_2`` and gamma_s (the preconditioned
constant, i.e. delta_s of ``(A A^T)^{-1/2} A``) is ``max_T lambda_max(P_TT)``
with ``P = I - A^T (A A^T)^{-1} A``, both over supports ``|T| = s``.  The
maximum is exact when every support is enumerated and a lower bound when
supports are sampled.
"""
import itertools
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .errors import CombinatorialBlowup, ConditionNotMet, NotParseval, SingularSubmatrix
from .linalg import MeasurementOperator, _cholesky, build_operator
from .probgen import rng_from_seed
from .sparsity import as_support, complement

__all__ = [
    "RipReport",
    "ConvergenceCertificate",
    "FixedSupportLimit",
    "rip_constant",
    "prip_constant",
    "rip_report",
    "certificate",
    "prip_upper_bound",
    "is_parseval",
    "split_gram_norms",
    "fixed_support_limit_ht",
    "fixed_support_limit_fb",
    "fixed_support_limits",
    "error_bound_ht",
    "error_bound_fb",
    "effective_noise_norms",
]

MAX_SUPPORTS = 10**6
_CHUNK = 20000


@dataclass(frozen=True)
class RipReport:
    order: int
    delta_s: float
    gamma_s: float
    supports_checked: int
    method: str

    @property
    def exhaustive(self):
        return self.method == "exhaustive"

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ConvergenceCertificate:
    s: int
    delta_s: float
    delta_2s: float
    gamma_3s: float
    rho_ht: float
    rho_fb: float
    tau_fb: float
    ht_condition_met: bool
    fb_condition_met: bool
    method: str

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class FixedSupportLimit:
    x_natural: np.ndarray
    x_ddag: np.ndarray
    support: np.ndarray


def _as_op(op):
    return op if isinstance(op, MeasurementOperator) else build_operator(op)


def _supports(N, s, samples, seed):
    """Yield (M, s) index blocks: every support, or `samples` random ones."""
    if samples is None:
        total = math.comb(N, s)
        if total > MAX_SUPPORTS:
            raise CombinatorialBlowup(
                f"C({N}, {s}) = {total} supports exceeds the cap of {MAX_SUPPORTS}"
            )
        it = itertools.combinations(range(N), s)
        while True:
            block = np.array(list(itertools.islice(it, _CHUNK)), dtype=np.intp)
            if block.size == 0:
                return
            yield block.reshape(-1, s)
    else:
        rng = rng_from_seed(seed)
        left = int(samples)
        while left > 0:
            m = min(left, _CHUNK)
            keys = rng.random((m, N))
            yield np.sort(np.argpartition(keys, s - 1, axis=1)[:, :s], axis=1)
            left -= m


def _method_name(samples):
    return "exhaustive" if samples is None else f"random_sample({int(samples)})"


def _block_extremes(mat, blocks):
    sub = mat[blocks[:, :, None], blocks[:, None, :]]
    w = np.linalg.eigvalsh(sub)
    return w[:, 0], w[:, -1]


def _max_over_supports(mat, s, samples, seed, reduce):
    N = mat.shape[0]
    if s == 0:
        return 0.0, 0
    if s > N:
        raise ValueError(f"order {s} exceeds N = {N}")
    best, count = 0.0, 0
    for block in _supports(N, s, samples, seed):
        lo, hi = _block_extremes(mat, block)
        best = max(best, float(reduce(lo, hi).max()))
        count += block.shape[0]
    return best, count


def rip_constant(op, s, samples=None, seed=0):
    """delta_s = max over |T| = s of ||I - A_T^T A_T||_2.

    `samples=None` enumerates all C(N, s) supports (at most 10**6); otherwise
    `samples` random supports give a lower bound.
    """
    a = op.a if isinstance(op, MeasurementOperator) else np.asarray(op, dtype=float)
    delta, _ = _max_over_supports(
        a.T @ a, s, samples, seed, lambda lo, hi: np.maximum(hi - 1.0, 1.0 - lo)
    )
    return delta


def _projector(op):
    return np.eye(op.N) - op.pinv_applier @ op.a


def prip_constant(op, s, samples=None, seed=0):
    """gamma_s = max over |T| = s of lambda_max(I - A_T^T (A A^T)^{-1} A_T)."""
    op = _as_op(op)
    gamma, _ = _max_over_supports(_projector(op), s, samples, seed, lambda lo, hi: hi)
    return min(max(gamma, 0.0), 1.0)


def rip_report(op, s, samples=None, seed=0):
    op = _as_op(op)
    delta, count = _max_over_supports(
        op.a.T @ op.a, s, samples, seed, lambda lo, hi: np.maximum(hi - 1.0, 1.0 - lo)
    )
    gamma, _ = _max_over_supports(_projector(op), s, samples, seed, lambda lo, hi: hi)
    return RipReport(s, delta, min(max(gamma, 0.0), 1.0), count, _method_name(samples))


def certificate(op, s, samples=None, seed=0):
    """Contraction factors for NST+HT (2 gamma_3s) and NST+HT+FB.

    For the feedback variant ``rho = sqrt(2) gamma_3s / (1 - delta_2s)`` and
    ``tau = (sqrt(2) + sqrt(1 + delta_s)) / (1 - delta_2s)``, valid when
    ``delta_2s + sqrt(2) gamma_3s < 1``.
    """
    op = _as_op(op)
    if 3 * s > op.N:
        raise ValueError(f"certificate needs 3s <= N, got s = {s}, N = {op.N}")
    delta_s = rip_constant(op, s, samples, seed)
    delta_2s = rip_constant(op, 2 * s, samples, seed)
    gamma_3s = prip_constant(op, 3 * s, samples, seed)
    fb_ok = delta_2s + math.sqrt(2.0) * gamma_3s < 1.0
    if delta_2s < 1.0:
        rho_fb = math.sqrt(2.0) * gamma_3s / (1.0 - delta_2s)
        tau_fb = (math.sqrt(2.0) + math.sqrt(1.0 + delta_s)) / (1.0 - delta_2s)
    else:
        rho_fb = tau_fb = math.inf
    return ConvergenceCertificate(
        s=s,
        delta_s=delta_s,
        delta_2s=delta_2s,
        gamma_3s=gamma_3s,
        rho_ht=2.0 * gamma_3s,
        rho_fb=rho_fb,
        tau_fb=tau_fb,
        ht_condition_met=gamma_3s < 0.5,
        fb_condition_met=fb_ok,
        method=_method_name(samples),
    )


def prip_upper_bound(op, delta_s):
    """``1 - (1 - delta_s) / lambda_max(A A^T)``, an upper bound on gamma_s.

    The scale is the largest eigenvalue of A A^T (the squared largest
    singular value of A); with the unsquared singular value the bound can
    fail whenever ||A||_2 > 1.
    """
    op = _as_op(op)
    lam_max = np.linalg.eigvalsh(op.a @ op.a.T)[-1]
    return 1.0 - (1.0 - delta_s) / lam_max


def is_parseval(op, tol=1e-10):
    a = op.a if isinstance(op, MeasurementOperator) else np.asarray(op, dtype=float)
    return bool(np.abs(a @ a.T - np.eye(a.shape[0])).max() <= tol)


def split_gram_norms(op, t):
    """(||A_T A_T^T||_2, ||A_{T^c} A_{T^c}^T||_2) for a support T."""
    a = op.a if isinstance(op, MeasurementOperator) else np.asarray(op, dtype=float)
    t = as_support(t, a.shape[1])
    tc = complement(t, a.shape[1])
    a_t, a_tc = a[:, t], a[:, tc]
    return (
        float(np.linalg.eigvalsh(a_t @ a_t.T)[-1]),
        float(np.linalg.eigvalsh(a_tc @ a_tc.T)[-1]),
    )


def _split(op, t, x_j):
    t = as_support(t, op.N)
    tc = complement(t, op.N)
    x_j = np.asarray(x_j, dtype=np.float64)
    a_t = op.a[:, t]
    factor = _cholesky(a_t.T @ a_t, SingularSubmatrix)
    tail = op.a[:, tc] @ x_j[tc]  # A_{T^c} x_{T^c}
    coef = scipy.linalg.cho_solve((factor, True), a_t.T @ tail)  # (A_T^T A_T)^{-1} A_T^T tail
    q_tail = tail - a_t @ coef  # (I - A_T (A_T^T A_T)^{-1} A_T^T) tail
    return t, tc, x_j, a_t, coef, q_tail


def fixed_support_limit_ht(op, t, x_j):
    """Limit of NST+HT when the support is frozen at `t` from iterate `x_j`.

    Only valid for Parseval frames (A A^T = I); raises `NotParseval` otherwise.
    """
    op = _as_op(op)
    if not is_parseval(op):
        raise NotParseval("the NST+HT fixed-support limit requires A A^T = I")
    t, tc, x_j, a_t, coef, q_tail = _split(op, t, x_j)
    out = np.empty(op.N)
    out[t] = x_j[t] + coef
    out[tc] = op.a[:, tc].T @ q_tail
    return out


def fixed_support_limit_fb(op, t, x_j):
    """Point NST+HT+FB lands on after one step with support `t` from `x_j`.

    With ``Q`` the projector onto the orthogonal complement of range(A_T) and
    ``w = (A A^T)^{-1} Q A_{T^c} x_{T^c}``::

        x_T   = x_T + (A_T^T A_T)^{-1} A_T^T A_{T^c} x_{T^c} + A_T^T w
        x_T^c = A_{T^c}^T w
    """
    op = _as_op(op)
    t, tc, x_j, a_t, coef, q_tail = _split(op, t, x_j)
    w = op.solve_gram(q_tail)
    out = np.empty(op.N)
    out[t] = x_j[t] + coef + a_t.T @ w
    out[tc] = op.a[:, tc].T @ w
    return out


def fixed_support_limits(op, t, x_j):
    op = _as_op(op)
    return FixedSupportLimit(
        fixed_support_limit_ht(op, t, x_j), fixed_support_limit_fb(op, t, x_j), as_support(t, op.N)
    )


def _bound(rho, scale, u0_err, e_tilde_norm, k):
    if not rho < 1.0:
        raise ConditionNotMet(f"contraction factor rho = {rho} is not below 1")
    return rho**k * u0_err + scale / (1.0 - rho) * e_tilde_norm


def error_bound_ht(cert, u0_err, e_tilde_norm, k):
    """``rho^k u0_err + 2 / (1 - rho) ||e||`` with rho = 2 gamma_3s."""
    return _bound(cert.rho_ht, 2.0, u0_err, e_tilde_norm, k)


def error_bound_fb(cert, u0_err, e_tilde_norm, k):
    """``rho^k u0_err + tau / (1 - rho) ||e||`` for the feedback variant."""
    if not cert.fb_condition_met:
        raise ConditionNotMet("delta_2s + sqrt(2) gamma_3s >= 1")
    return _bound(cert.rho_fb, cert.tau_fb, u0_err, e_tilde_norm, k)


def effective_noise_norms(op, x, x_sharp, e=None):
    """Norms of the effective noise ``r = A(x - x_sharp) + e``.

    Returns ``(||(A A^T)^{-1/2} r||, ||r||)``; the first enters the NST+HT
    bound and the second the feedback bound.  The preconditioned norm is
    ``sqrt(r^T (A A^T)^{-1} r)``, evaluated with the cached Cholesky factor.
    """
    op = _as_op(op)
    r = op.a @ (np.asarray(x, dtype=float) - np.asarray(x_sharp, dtype=float))
    if e is not None:
        r = r + e
    pre = scipy.linalg.solve_triangular(op.gram_factor, r, lower=True)
    return float(np.linalg.norm(pre)), float(np.linalg.norm(r))


def report_json(report, cert=None):
    payload = {"rip": report.to_dict()}
    if cert is not None:
        payload["certificate"] = cert.to_dict()
    return json.dumps(payload, indent=2, sort_keys=True, default=float)
