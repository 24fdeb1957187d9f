"""Null space tuning (NST) solvers and the baselines they are compared with.

Every NST variant alternates a sparse approximation ``u = D(x)`` of the
current feasible iterate with the null-space tuning step

    x_next = x + P (u - x) = u + A^T (A A^T)^{-1} (b - A u),

so that every ``x`` satisfies ``A x = b``.  The variants differ only in `D`:

==================  ========================================================
``nst_ht``          hard thresholding, ``u = H_s(x)``
``nst_ht_fb``       thresholding plus least-squares feedback of the tail
``nst_ht_subfb``    feedback with the Gram inverse replaced by a scalar
``nst_stretched_ht`` thresholding scaled by ``||b||_1 / ||A_T x_T||_1``
==================  ========================================================

The loop stops when ``||A u - b|| / ||b|| < eps1`` (ResidualMet) or the
relative change of ``u`` drops below ``eps2`` (Stagnated); the feedback
variant additionally stops when the support repeats (SupportFixed), since
the next tuning step would not move ``x``.
"""
import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, NSTError, SingularSubmatrix, SparsityTooLarge
from .linalg import lsq_submatrix, spectral_norm
from .sparsity import select_support

__all__ = [
    "Termination",
    "SolverConfig",
    "AdaptiveConfig",
    "TraceEntry",
    "RecoveryResult",
    "initial_iterate",
    "nst_step",
    "iht_step",
    "solve_nst_ht",
    "solve_nst_ht_fb",
    "solve_nst_ht_subfb",
    "solve_nst_stretched_ht",
    "solve_adaptive",
    "solve_iht",
    "solve_omp",
    "solve_sp",
    "solve_htp",
    "NST_VARIANTS",
]

# IHT with unit step is unstable whenever ||A||_2 > 1; treat blow-up as failure.
_DIVERGENCE_LIMIT = 1e100


class Termination(str, enum.Enum):
    RESIDUAL_MET = "ResidualMet"
    STAGNATED = "Stagnated"
    MAX_ITERS = "MaxIters"
    SUPPORT_FIXED = "SupportFixed"
    FAILED = "Failed"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SolverConfig:
    """Parameters shared by the iterative solvers.

    `lam` is the subFB step: a positive float, or ``"spectral"`` to use
    ``1 / ||A_T^T A_T||_2`` at every iteration.  `check_feasibility` makes
    the NST loops record ``max_k ||A x^k - b|| / ||b||`` in the result.
    """

    s: int
    eps1: float = 1e-5
    eps2: float = 1e-6
    max_iters: int = 1000
    lam: object = 1.0
    trace: bool = False
    check_feasibility: bool = False

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 0:
            raise ValueError(f"sparsity must be a nonnegative integer, got {self.s}")
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise ValueError("eps1 and eps2 must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.lam != "spectral" and not (isinstance(self.lam, (int, float)) and self.lam > 0):
            raise ValueError(f"lam must be a positive number or 'spectral', got {self.lam!r}")

    def with_sparsity(self, s):
        return replace(self, s=int(s))


@dataclass(frozen=True)
class AdaptiveConfig:
    """Sparsity schedule for `solve_adaptive`: s0, s0 + s_step, ... while s <= s_max."""

    s0: int
    s_max: int
    inner: SolverConfig
    s_step: int = 1
    variant: str = "nst_ht"

    def __post_init__(self):
        if self.s0 < 1 or self.s_step < 1:
            raise ValueError("s0 and s_step must be positive")
        if self.s0 > self.s_max:
            raise ValueError(f"s0 = {self.s0} exceeds s_max = {self.s_max}")
        if self.variant not in NST_VARIANTS:
            raise ValueError(f"unknown NST variant {self.variant!r}")


@dataclass
class TraceEntry:
    iter: int
    residual_rel: float
    change_rel: float
    support: tuple
    u: np.ndarray


@dataclass
class RecoveryResult:
    u: np.ndarray
    x: np.ndarray
    iterations: int
    termination: Termination
    reason: str = ""
    sparsity: int = 0
    trace: list = field(default=None, repr=False)
    max_feasibility_gap: float = None

    @property
    def failed(self):
        return self.termination is Termination.FAILED


def _rhs(op, b):
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != op.n:
        raise DimensionMismatch(f"b must have length {op.n}, got shape {b.shape}")
    return b


def initial_iterate(op, b):
    """Minimum-norm feasible point A^T (A A^T)^{-1} b."""
    return op.apply_pinv(_rhs(op, b))


def nst_step(op, b, u_k, x_k=None):
    """Null space tuning step ``x_k + P(u_k - x_k)`` for a feasible `x_k`.

    Computed in the equivalent form ``u_k + A^T (A A^T)^{-1} (b - A u_k)``,
    which does not depend on `x_k` and restores feasibility from scratch.
    """
    b = _rhs(op, b)
    u_k = np.asarray(u_k, dtype=np.float64)
    if u_k.shape != (op.N,):
        raise DimensionMismatch(f"u must have length {op.N}")
    if x_k is not None and np.shape(x_k) != (op.N,):
        raise DimensionMismatch(f"x must have length {op.N}")
    return op.feasible_projection(u_k, b)


def iht_step(op, b, u_k):
    """Unit-step IHT update ``u + A^T (b - A u)``."""
    return u_k + op.a.T @ (b - op.a @ u_k)


def _ht(op, b, x, support, cfg, bnorm1):
    u = np.zeros_like(x)
    u[support] = x[support]
    return u


def _fb(op, b, x, support, cfg, bnorm1):
    tail = x.copy()
    tail[support] = 0.0
    eta = lsq_submatrix(op, support, op.a @ tail)
    u = np.zeros_like(x)
    u[support] = x[support] + eta
    return u


def _subfb(op, b, x, support, cfg, bnorm1):
    tail = x.copy()
    tail[support] = 0.0
    a_t = op.a[:, support]
    if cfg.lam == "spectral":
        lam = 1.0 / spectral_norm(a_t) ** 2
    else:
        lam = cfg.lam
    u = np.zeros_like(x)
    u[support] = x[support] + lam * (a_t.T @ (op.a @ tail))
    return u


def _stretched(op, b, x, support, cfg, bnorm1):
    denom = np.abs(op.a[:, support] @ x[support]).sum()
    theta = 1.0 if denom <= 1e-14 * bnorm1 or bnorm1 == 0.0 else bnorm1 / denom
    u = np.zeros_like(x)
    u[support] = theta * x[support]
    return u


def _change(u, u_prev):
    if u_prev is None:
        return np.inf
    denom = np.linalg.norm(u_prev)
    if denom == 0.0:
        return np.inf
    return float(np.linalg.norm(u - u_prev) / denom)


def _iterate(op, b, cfg, x0, approx, *, feasible=True, support_stop=False):
    b = _rhs(op, b)
    N = op.N
    if cfg.s > N:
        raise SparsityTooLarge(f"s = {cfg.s} exceeds N = {N}")
    bnorm = np.linalg.norm(b)
    x = initial_iterate(op, b) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (N,):
        raise DimensionMismatch(f"x0 must have length {N}")
    track = feasible and cfg.check_feasibility
    gap = None
    if bnorm == 0.0:
        zero = np.zeros(N)
        return RecoveryResult(
            zero, zero.copy(), 0, Termination.RESIDUAL_MET, sparsity=cfg.s,
            trace=[] if cfg.trace else None, max_feasibility_gap=0.0 if track else None,
        )
    if track:
        gap = float(np.linalg.norm(op.a @ x - b) / bnorm)
    bnorm1 = float(np.abs(b).sum())
    trace = [] if cfg.trace else None
    u_prev = None
    prev_support = None

    def finish(u, x, k, term, reason=""):
        return RecoveryResult(
            u, x, k, term, reason=reason, sparsity=cfg.s, trace=trace, max_feasibility_gap=gap
        )

    for k in range(cfg.max_iters):
        support = select_support(x, cfg.s)
        try:
            u = approx(op, b, x, support, cfg, bnorm1)
        except SingularSubmatrix as err:
            return finish(x * 0, x, k, Termination.FAILED, f"SingularSubmatrix: {err}")
        if not np.all(np.isfinite(u)):
            return finish(u, x, k + 1, Termination.FAILED, "non-finite iterate")
        residual = float(np.linalg.norm(op.a @ u - b) / bnorm)
        change = _change(u, u_prev)
        if trace is not None:
            trace.append(TraceEntry(k, residual, change, tuple(support.tolist()), u.copy()))
        if residual < cfg.eps1:
            return finish(u, x, k + 1, Termination.RESIDUAL_MET)
        if change < cfg.eps2:
            return finish(u, x, k + 1, Termination.STAGNATED)
        if support_stop and prev_support is not None and np.array_equal(support, prev_support):
            return finish(u, x, k + 1, Termination.SUPPORT_FIXED)
        if feasible:
            x = op.feasible_projection(u, b)
            if track:
                gap = max(gap, float(np.linalg.norm(op.a @ x - b) / bnorm))
        else:
            x = iht_step(op, b, u)
            if not np.all(np.isfinite(x)) or np.abs(x).max() > _DIVERGENCE_LIMIT:
                return finish(u, x, k + 1, Termination.FAILED, "diverged")
        u_prev, prev_support = u, support
    return finish(u, x, cfg.max_iters, Termination.MAX_ITERS)


def solve_nst_ht(op, b, cfg, x0=None):
    """NST with hard thresholding: ``u = H_s(x)``, then tune."""
    return _iterate(op, b, cfg, x0, _ht)


def solve_nst_ht_fb(op, b, cfg, x0=None):
    """NST with hard thresholding and least-squares feedback.

    On the kept support T the tail contribution ``A_{T^c} x_{T^c}`` is fed
    back through ``argmin_eta ||A_T eta - A_{T^c} x_{T^c}||``.  Requires
    ``s <= n``; a rank-deficient ``A_T`` ends the run with a Failed result.
    """
    if cfg.s > op.n:
        raise SparsityTooLarge(f"feedback needs s <= n, got s = {cfg.s}, n = {op.n}")
    return _iterate(op, b, cfg, x0, _fb, support_stop=True)


def solve_nst_ht_subfb(op, b, cfg, x0=None):
    """Feedback with ``(A_T^T A_T)^{-1}`` replaced by the scalar ``cfg.lam``."""
    return _iterate(op, b, cfg, x0, _subfb)


def solve_nst_stretched_ht(op, b, cfg, x0=None):
    """Hard thresholding stretched by ``||b||_1 / ||A_T x_T||_1`` (1 if that is 0/0)."""
    return _iterate(op, b, cfg, x0, _stretched)


def solve_iht(op, b, cfg, x0=None):
    """Iterative hard thresholding with unit step; iterates are not feasible."""
    return _iterate(op, b, cfg, x0, _ht, feasible=False)


NST_VARIANTS = {
    "nst_ht": solve_nst_ht,
    "nst_ht_fb": solve_nst_ht_fb,
    "nst_ht_subfb": solve_nst_ht_subfb,
    "nst_stretched_ht": solve_nst_stretched_ht,
}


def solve_adaptive(op, b, acfg):
    """Run an NST variant with a growing sparsity level.

    Starts from ``s = s0`` at the least-squares point.  While the outer
    residual and the change between consecutive outer estimates are both
    above tolerance and ``s <= s_max``, the sparsity is raised by `s_step`
    and the variant is restarted from the previous feasible ``x``.  Running
    out of sparsity budget is reported as ``MaxIters``.
    """
    b = _rhs(op, b)
    solver = NST_VARIANTS[acfg.variant]
    inner = acfg.inner
    bnorm = np.linalg.norm(b)
    s_limit = op.n if acfg.variant == "nst_ht_fb" else op.N

    s = acfg.s0
    u_old = np.zeros(op.N)
    result = solver(op, b, inner.with_sparsity(s), initial_iterate(op, b))
    total = result.iterations
    traces = list(result.trace) if inner.trace else None
    gap = result.max_feasibility_gap
    while True:
        if result.failed:
            term = Termination.FAILED
            break
        residual = 0.0 if bnorm == 0.0 else np.linalg.norm(op.a @ result.u - b) / bnorm
        if residual < inner.eps1:
            term = Termination.RESIDUAL_MET
            break
        if _change(result.u, u_old) < inner.eps2:
            term = Termination.STAGNATED
            break
        if s > acfg.s_max or s + acfg.s_step > s_limit:
            term = Termination.MAX_ITERS
            break
        u_old = result.u
        s += acfg.s_step
        result = solver(op, b, inner.with_sparsity(s), result.x)
        total += result.iterations
        if traces is not None:
            traces.extend(result.trace)
        if gap is not None and result.max_feasibility_gap is not None:
            gap = max(gap, result.max_feasibility_gap)
    return RecoveryResult(
        result.u, result.x, total, term, reason=result.reason, sparsity=s,
        trace=traces, max_feasibility_gap=gap,
    )


# --- baselines -------------------------------------------------------------


def _residual_rel(op, b, u, bnorm):
    return float(np.linalg.norm(op.a @ u - b) / bnorm) if bnorm else 0.0


def solve_omp(op, b, s, eps1=1e-5):
    """Orthogonal matching pursuit run for exactly `s` selections."""
    b = _rhs(op, b)
    if s > op.n:
        raise SparsityTooLarge(f"OMP needs s <= n, got s = {s}")
    N = op.N
    u = np.zeros(N)
    bnorm = np.linalg.norm(b)
    if s == 0 or bnorm == 0.0:
        term = Termination.RESIDUAL_MET if bnorm == 0.0 else Termination.MAX_ITERS
        return RecoveryResult(u, u.copy(), 0, term, sparsity=s)
    chosen = []
    free = np.ones(N, dtype=bool)
    r = b
    coef = np.zeros(0)
    for _ in range(s):
        corr = np.abs(op.a.T @ r)
        corr[~free] = -1.0
        j = int(np.argmax(corr))
        chosen.append(j)
        free[j] = False
        try:
            coef = lsq_submatrix(op, chosen, b)
        except SingularSubmatrix as err:
            u[chosen[:-1]] = coef
            return RecoveryResult(u, u.copy(), len(chosen), Termination.FAILED,
                                  reason=f"SingularSubmatrix: {err}", sparsity=s)
        r = b - op.a[:, chosen] @ coef
    u[chosen] = coef
    term = Termination.RESIDUAL_MET if _residual_rel(op, b, u, bnorm) < eps1 else Termination.MAX_ITERS
    return RecoveryResult(u, u.copy(), s, term, sparsity=s)


def _baseline_cfg(s, cfg):
    return SolverConfig(s=s) if cfg is None else cfg.with_sparsity(s)


def solve_sp(op, b, s, cfg=None):
    """Subspace pursuit (Dai-Milenkovic).

    Each pass merges the current support with the `s` largest residual
    correlations, refits on the union, prunes back to `s` entries and refits.
    The pass is rejected (and the loop ends) once the residual stops
    decreasing.
    """
    cfg = _baseline_cfg(s, cfg)
    b = _rhs(op, b)
    if 2 * s > op.n:
        raise SparsityTooLarge(f"subspace pursuit needs 2s <= n, got s = {s}")
    N = op.N
    bnorm = np.linalg.norm(b)
    if s == 0 or bnorm == 0.0:
        u = np.zeros(N)
        term = Termination.RESIDUAL_MET if bnorm == 0.0 else Termination.MAX_ITERS
        return RecoveryResult(u, u.copy(), 0, term, sparsity=s)

    def refit(t):
        u = np.zeros(N)
        u[t] = lsq_submatrix(op, t, b)
        return u

    try:
        support = select_support(op.a.T @ b, s)
        u = refit(support)
        r = b - op.a @ u
        for k in range(cfg.max_iters):
            if np.linalg.norm(r) / bnorm < cfg.eps1:
                return RecoveryResult(u, u.copy(), k, Termination.RESIDUAL_MET, sparsity=s)
            corr = np.abs(op.a.T @ r)
            corr[support] = 0.0
            merged = np.union1d(support, select_support(corr, s))
            new_support = merged[select_support(refit(merged)[merged], s)]
            u_new = refit(new_support)
            r_new = b - op.a @ u_new
            if np.linalg.norm(r_new) >= np.linalg.norm(r):
                return RecoveryResult(u, u.copy(), k + 1, Termination.STAGNATED, sparsity=s)
            support, u, r = new_support, u_new, r_new
    except SingularSubmatrix as err:
        u = np.zeros(N)
        return RecoveryResult(u, u.copy(), 0, Termination.FAILED,
                              reason=f"SingularSubmatrix: {err}", sparsity=s)
    return RecoveryResult(u, u.copy(), cfg.max_iters, Termination.MAX_ITERS, sparsity=s)


def solve_htp(op, b, s, cfg=None):
    """Hard thresholding pursuit (Foucart) with unit gradient step from x = 0."""
    cfg = _baseline_cfg(s, cfg)
    b = _rhs(op, b)
    if s > op.n:
        raise SparsityTooLarge(f"HTP needs s <= n, got s = {s}")
    N = op.N
    bnorm = np.linalg.norm(b)
    x = np.zeros(N)
    if s == 0 or bnorm == 0.0:
        term = Termination.RESIDUAL_MET if bnorm == 0.0 else Termination.MAX_ITERS
        return RecoveryResult(x, x.copy(), 0, term, sparsity=s)
    support = None
    for k in range(cfg.max_iters):
        new_support = select_support(x + op.a.T @ (b - op.a @ x), s)
        if support is not None and np.array_equal(new_support, support):
            return RecoveryResult(x, x.copy(), k, Termination.SUPPORT_FIXED, sparsity=s)
        try:
            coef = lsq_submatrix(op, new_support, b)
        except SingularSubmatrix as err:
            return RecoveryResult(x, x.copy(), k, Termination.FAILED,
                                  reason=f"SingularSubmatrix: {err}", sparsity=s)
        x = np.zeros(N)
        x[new_support] = coef
        support = new_support
        if _residual_rel(op, b, x, bnorm) < cfg.eps1:
            return RecoveryResult(x, x.copy(), k + 1, Termination.RESIDUAL_MET, sparsity=s)
    return RecoveryResult(x, x.copy(), cfg.max_iters, Termination.MAX_ITERS, sparsity=s)
