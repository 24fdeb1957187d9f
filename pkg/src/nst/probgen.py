"""Seeded generation of the Gaussian measurement / sparse signal ensembles.

Randomness comes from numpy's counter-based Philox generator keyed directly
by a 64-bit seed.  Trial seeds are derived from a master seed with the
splitmix64 finalizer, so each trial owns an independent stream and the
mapping is stable across releases::

    seed_i = splitmix64(master + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)

Draw order within `generate` is fixed: matrix entries (row-major), support
(partial Fisher-Yates), nonzero values, then the noise vector.
"""
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .linalg import build_operator

__all__ = [
    "NoiseModel",
    "ProblemSpec",
    "GeneratedProblem",
    "splitmix64",
    "derive_trial_seed",
    "rng_from_seed",
    "gaussian_matrix",
    "generate",
]

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

ENSEMBLES = ("gaussian", "bernoulli")
NOISE_KINDS = ("none", "signal", "measurement")


def splitmix64(z):
    """The splitmix64 output function (a bijection on 64-bit integers)."""
    z = int(z) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_trial_seed(master_seed, trial_index):
    return splitmix64((int(master_seed) + (int(trial_index) + 1) * GOLDEN_GAMMA) & MASK64)


def rng_from_seed(seed):
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


@dataclass(frozen=True)
class NoiseModel:
    """``kind`` is "none", "signal" (b = A(x + v)) or "measurement" (b = Ax + v)."""

    kind: str = "none"
    eps: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.eps < 0:
            raise ValueError("noise level must be nonnegative")


@dataclass(frozen=True)
class ProblemSpec:
    n: int
    N: int
    s: int
    ensemble: str = "gaussian"
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.s <= self.n < self.N):
            raise ValueError(f"need s <= n < N, got s={self.s}, n={self.n}, N={self.N}")
        if self.ensemble not in ENSEMBLES:
            raise ValueError(f"ensemble must be one of {ENSEMBLES}, got {self.ensemble!r}")
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseModel(**self.noise))
        if not 0 <= int(self.seed) <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["noise"] = NoiseModel(**d.get("noise", {}))
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class GeneratedProblem:
    spec: ProblemSpec
    op: object
    x_true: np.ndarray
    noise_v: np.ndarray
    b: np.ndarray

    @property
    def a(self):
        return self.op.a


def gaussian_matrix(rng, n, N):
    """i.i.d. standard normal n x N matrix with columns scaled to unit norm."""
    a = rng.standard_normal((n, N))
    return a / np.linalg.norm(a, axis=0)


def _random_support(rng, N, s):
    # partial Fisher-Yates over 0..N-1
    perm = np.arange(N)
    for i in range(s):
        j = i + int(rng.integers(N - i))
        perm[i], perm[j] = perm[j], perm[i]
    return np.sort(perm[:s])


def _rescaled(v, eps):
    norm = np.linalg.norm(v)
    if eps == 0.0 or norm == 0.0:
        return np.zeros_like(v)
    return v * (eps / norm)


def generate(spec):
    """Draw (A, x_true, v, b) deterministically from ``spec.seed``.

    Raises `RankDeficient` (from `build_operator`) if the sampled matrix is
    numerically rank deficient; no resampling is attempted.
    """
    rng = rng_from_seed(spec.seed)
    a = gaussian_matrix(rng, spec.n, spec.N)
    support = _random_support(rng, spec.N, spec.s)
    if spec.ensemble == "gaussian":
        values = rng.standard_normal(spec.s)
    else:
        values = np.where(rng.integers(0, 2, size=spec.s) == 1, 1.0, -1.0)
    x = np.zeros(spec.N)
    x[support] = values
    op = build_operator(a)

    kind, eps = spec.noise.kind, float(spec.noise.eps)
    if kind == "signal":
        if spec.s:
            x /= np.linalg.norm(x)
        v = _rescaled(rng.standard_normal(spec.N), eps)
        b = op.a @ (x + v)
    elif kind == "measurement":
        ax = op.a @ x
        if spec.s:
            x /= np.linalg.norm(ax)
        v = _rescaled(rng.standard_normal(spec.n), eps)
        b = op.a @ x + v
    else:
        v = np.zeros(spec.N)
        b = op.a @ x
    return GeneratedProblem(spec, op, x, v, b)
