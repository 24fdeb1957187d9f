"""Dense kernels shared by every NST iteration.

The null-space projector P = I - A^T (A A^T)^{-1} A is never formed.  Only
the N x n matrix A^T (A A^T)^{-1} is cached, which is all the projection
form ``x + A^T (A A^T)^{-1} (b - A x)`` needs.
"""
import struct
import warnings
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NonConvergenceWarning,
    RankDeficient,
    SingularSubmatrix,
)

__all__ = [
    "MeasurementOperator",
    "as_matrix",
    "build_operator",
    "project_nullspace",
    "lsq_submatrix",
    "spectral_norm",
    "load_matrix",
    "save_matrix",
]

PIVOT_RTOL = 1e-12
MATRIX_MAGIC = b"NSTM"


def as_matrix(a):
    """Return `a` as a 2-D float64 array, rejecting NaN/Inf entries."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise DimensionMismatch(f"expected a nonempty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def _cholesky(g, exc):
    # Unpivoted Cholesky; fail fast when the smallest pivot is tiny relative to the largest.
    try:
        lower = scipy.linalg.cholesky(g, lower=True, check_finite=False)
    except np.linalg.LinAlgError as err:
        raise exc("Gram matrix is not positive definite") from err
    pivots = np.diag(lower) ** 2
    if pivots.size and pivots.min() <= PIVOT_RTOL * pivots.max():
        raise exc(
            f"Cholesky pivot ratio {pivots.min() / pivots.max():.3e} below {PIVOT_RTOL:g}"
        )
    return lower


class MeasurementOperator:
    """Immutable wrapper of a full-row-rank n x N matrix (n < N).

    Attributes
    ----------
    a : ndarray, shape (n, N)
    gram_factor : ndarray, shape (n, n)
        Lower Cholesky factor of ``a @ a.T``.
    pinv_applier : ndarray, shape (N, n)
        ``a.T @ inv(a @ a.T)``, i.e. the Moore-Penrose pseudo-inverse of `a`.
    """

    __slots__ = ("a", "gram_factor", "pinv_applier")

    def __init__(self, a, gram_factor, pinv_applier):
        for arr in (a, gram_factor, pinv_applier):
            arr.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "gram_factor", gram_factor)
        object.__setattr__(self, "pinv_applier", pinv_applier)

    def __setattr__(self, name, value):
        raise AttributeError("MeasurementOperator is immutable")

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def N(self):
        return self.a.shape[1]

    @property
    def shape(self):
        return self.a.shape

    def __repr__(self):
        return f"MeasurementOperator(n={self.n}, N={self.N})"

    def apply(self, x):
        return self.a @ x

    def apply_pinv(self, y):
        """A^T (A A^T)^{-1} y."""
        return self.pinv_applier @ y

    def solve_gram(self, y):
        """(A A^T)^{-1} y via the cached Cholesky factor."""
        return scipy.linalg.cho_solve((self.gram_factor, True), y, check_finite=False)

    def feasible_projection(self, u, b):
        """Orthogonal projection of `u` onto the affine set {x : A x = b}."""
        return u + self.pinv_applier @ (b - self.a @ u)


def build_operator(a):
    """Factor A A^T and cache A^T (A A^T)^{-1}.

    Raises
    ------
    DimensionMismatch
        If A is not wide (n < N).
    RankDeficient
        If A A^T fails the relative Cholesky pivot test.
    """
    a = np.array(as_matrix(a), dtype=np.float64, copy=True)
    n, N = a.shape
    if n >= N:
        raise DimensionMismatch(f"expected n < N, got {n} x {N}")
    lower = _cholesky(a @ a.T, RankDeficient)
    # (A A^T)^{-1} A, transposed
    pinv = scipy.linalg.cho_solve((lower, True), a, check_finite=False).T
    return MeasurementOperator(a, lower, np.ascontiguousarray(pinv))


def _check_length(v, length, name="vector"):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != length:
        raise DimensionMismatch(f"{name} must have length {length}, got shape {v.shape}")
    return v


def project_nullspace(op, z):
    """Apply P = I - A^T (A A^T)^{-1} A to `z`."""
    z = _check_length(z, op.N, "z")
    return z - op.pinv_applier @ (op.a @ z)


def lsq_submatrix(op, t, rhs):
    """Least-squares coefficients of `rhs` on the columns ``A[:, t]``.

    Solves the normal equations ``(A_T^T A_T) eta = A_T^T rhs`` by Cholesky.
    """
    t = np.asarray(t, dtype=np.intp)
    rhs = _check_length(rhs, op.n, "rhs")
    if t.size == 0:
        return np.zeros(0)
    if t.size > op.n:
        raise SingularSubmatrix(f"|T| = {t.size} exceeds n = {op.n}")
    a_t = op.a[:, t]
    lower = _cholesky(a_t.T @ a_t, SingularSubmatrix)
    return scipy.linalg.cho_solve((lower, True), a_t.T @ rhs, check_finite=False)


def spectral_norm(m, tol=1e-6, max_iters=500):
    """Estimate the largest singular value of `m` by power iteration on m^T m.

    Warns with `NonConvergenceWarning` and returns the current estimate if
    `max_iters` is reached before the relative change drops below `tol`.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise DimensionMismatch("spectral_norm needs a nonempty 2-D matrix")
    if not np.any(m):
        return 0.0
    v = np.random.default_rng(0).standard_normal(m.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iters):
        w = m.T @ (m @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # started orthogonal to the row space; restart from a fixed direction
            v = np.ones(m.shape[1]) / np.sqrt(m.shape[1])
            continue
        v = w / norm_w
        new_sigma = np.linalg.norm(m @ v)
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return float(new_sigma)
        sigma = new_sigma
    warnings.warn(
        f"power iteration did not reach tol={tol:g} in {max_iters} iterations",
        NonConvergenceWarning,
        stacklevel=2,
    )
    return float(sigma)


def save_matrix(path, a, binary=None):
    """Write `a` as whitespace-delimited text, or the binary ``NSTM`` format.

    The binary layout is the 4 magic bytes, two little-endian uint32 (rows,
    cols) and the entries as little-endian float64 in row-major order.  When
    `binary` is None the format is chosen from the suffix (``.nstm``/``.bin``).
    """
    a = as_matrix(a)
    path = Path(path)
    if binary is None:
        binary = path.suffix.lower() in (".nstm", ".bin")
    if binary:
        rows, cols = a.shape
        with open(path, "wb") as fh:
            fh.write(MATRIX_MAGIC)
            fh.write(struct.pack("<II", rows, cols))
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes(order="C"))
    else:
        np.savetxt(path, a, fmt="%.17g")


def load_matrix(path):
    """Read a matrix written by `save_matrix` (format sniffed from magic bytes)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == MATRIX_MAGIC:
            rows, cols = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(), dtype="<f8")
            if data.size != rows * cols:
                raise ValueError(
                    f"{path}: expected {rows * cols} entries, found {data.size}"
                )
            return as_matrix(data.reshape(rows, cols).astype(np.float64))
    return as_matrix(np.loadtxt(path, ndmin=2))
