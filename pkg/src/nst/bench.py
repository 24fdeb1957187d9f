"""Experiment runner: phase transitions, noise sweeps, convergence traces,
adaptive initial-sparsity sweeps and timing.

An experiment is described by an `ExperimentSpec` (JSON-serialisable).  Each
(grid point, trial) pair draws one problem from
``derive_trial_seed(spec.seed, trial)`` and runs every configured algorithm
on it, so algorithms are compared on identical problems.  Results are
per-trial `TrialRecord` rows plus an aggregate table, both written as CSV
when ``spec.output_path`` is set::

    <output_path>/trials.csv
    <output_path>/aggregate.csv
    <output_path>/trace.csv        (ConvergenceTrace only)

The aggregate is a pure function of the trial records.  Wall-clock columns
are only filled for timing experiments, which keeps every other aggregate
byte-identical between runs with the same spec.
"""
import csv
import json
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import NSTError
from .linalg import build_operator
from .probgen import NoiseModel, ProblemSpec, derive_trial_seed, generate
from .solvers import (
    NST_VARIANTS,
    AdaptiveConfig,
    SolverConfig,
    solve_adaptive,
    solve_htp,
    solve_iht,
    solve_omp,
    solve_sp,
)

__all__ = [
    "KINDS",
    "AlgorithmSpec",
    "ExperimentSpec",
    "TrialRecord",
    "ExperimentResult",
    "run_algorithm",
    "run_experiment",
    "run_phase_transition",
    "run_noise_sweep",
    "run_convergence_trace",
    "run_adaptive_s0_sweep",
    "run_timing",
    "aggregate",
    "default_spec",
]

KINDS = ("phase", "noise", "trace", "adaptive", "timing")
ALGORITHMS = tuple(NST_VARIANTS) + tuple(f"adaptive_{v}" for v in NST_VARIANTS) + (
    "iht",
    "omp",
    "sp",
    "htp",
)

TRIAL_COLUMNS = [
    "algorithm", "s", "eps", "kappa", "trial", "seed", "rel_error",
    "iterations", "wall_time_s", "termination", "success",
]
AGGREGATE_COLUMNS = [
    "algorithm", "s", "s_over_n", "eps", "kappa", "mean_rel_error",
    "success_freq", "mean_iters", "mean_time_s", "median_time_s", "mean_build_time_s",
]
TRACE_COLUMNS = ["algorithm", "s", "eps", "trial", "iter", "rel_error"]


@dataclass(frozen=True)
class AlgorithmSpec:
    """An algorithm identifier plus solver parameters.

    Recognised params: eps1, eps2, max_iters, lam (subFB), kappa, s_step and
    s_max (adaptive variants).
    """

    name: str
    params: dict = field(default_factory=dict)
    label: str = None

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.name!r}; choose from {ALGORITHMS}")

    @property
    def id(self):
        return self.label or self.name

    @property
    def adaptive(self):
        return self.name.startswith("adaptive_")

    @classmethod
    def parse(cls, obj):
        if isinstance(obj, cls):
            return obj
        if isinstance(obj, str):
            return cls(obj)
        return cls(obj["name"], dict(obj.get("params", {})), obj.get("label"))

    def to_dict(self):
        d = {"name": self.name, "params": dict(self.params)}
        if self.label:
            d["label"] = self.label
        return d


@dataclass
class ExperimentSpec:
    kind: str
    problem: ProblemSpec
    algorithms: list
    sweep: dict
    trials: int = 100
    success_tol: float = 1e-4
    output_path: str = None
    seed: int = 0
    threads: int = 1
    check_feasibility: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if isinstance(self.problem, dict):
            self.problem = ProblemSpec.from_dict(self.problem)
        self.algorithms = [AlgorithmSpec.parse(a) for a in self.algorithms]
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.success_tol > 0:
            raise ValueError("success_tol must be positive")
        if not any(self.sweep.get(k) for k in ("s", "eps", "kappa")):
            raise ValueError("sweep must list s, eps or kappa values")
        if self.kind == "adaptive" and not all(a.adaptive for a in self.algorithms):
            raise ValueError("adaptive sweeps need adaptive_* algorithms")

    def to_dict(self):
        d = asdict(self)
        d["problem"] = self.problem.to_dict()
        d["algorithms"] = [a.to_dict() for a in self.algorithms]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def grid(self):
        """Grid points as (s, eps, kappa) tuples; None marks an unused axis."""
        s_values = self.sweep.get("s") or [self.problem.s]
        eps_values = self.sweep.get("eps") or [self.problem.noise.eps]
        if self.kind == "adaptive":
            kappas = self.sweep.get("kappa") or [None]
            return [(int(s), float(eps_values[0]), float(k)) for k in kappas for s in s_values]
        if self.kind == "noise":
            return [(int(s), float(e), None) for s in s_values for e in eps_values]
        return [(int(s), float(eps_values[0]), None) for s in s_values]


@dataclass
class TrialRecord:
    algorithm: str
    s: int
    eps: float
    kappa: float
    trial_index: int
    seed: int
    rel_error: float
    iterations: int
    wall_time: float
    termination: str
    success: bool
    feasibility_gap: float = None
    build_time: float = None

    def csv_row(self, has_noise):
        return [
            self.algorithm,
            str(self.s),
            _fmt(self.eps) if has_noise else "",
            _fmt(self.kappa),
            str(self.trial_index),
            str(self.seed),
            _fmt(self.rel_error),
            str(self.iterations),
            _fmt(self.wall_time),
            self.termination,
            "true" if self.success else "false",
        ]


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    records: list
    aggregate: list
    traces: list = None

    def frequency(self, algorithm, s=None, kappa=None, eps=None):
        """Success frequency of one aggregate row (first match)."""
        return self._row(algorithm, s, kappa, eps)["success_freq"]

    def mean_error(self, algorithm, s=None, kappa=None, eps=None):
        return self._row(algorithm, s, kappa, eps)["mean_rel_error"]

    def _row(self, algorithm, s, kappa, eps):
        for row in self.aggregate:
            if (
                row["algorithm"] == algorithm
                and (s is None or row["s"] == s)
                and (kappa is None or row["kappa"] == kappa)
                and (eps is None or row["eps"] == eps)
            ):
                return row
        raise KeyError((algorithm, s, kappa, eps))


def _fmt(value):
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def _initial_sparsity(kappa, s):
    return max(1, int(math.floor(kappa * s + 0.5)))


def run_algorithm(algo, op, b, s, kappa=None, trace=False, check_feasibility=False):
    """Run one configured algorithm with sparsity (target) `s`."""
    algo = AlgorithmSpec.parse(algo)
    p = dict(algo.params)
    cfg = SolverConfig(
        s=s,
        eps1=p.get("eps1", 1e-5),
        eps2=p.get("eps2", 1e-6),
        max_iters=p.get("max_iters", 1000),
        lam=p.get("lam", 1.0),
        trace=trace,
        check_feasibility=check_feasibility,
    )
    name = algo.name
    if name in NST_VARIANTS:
        return NST_VARIANTS[name](op, b, cfg)
    if algo.adaptive:
        kappa = p.get("kappa", 0.3) if kappa is None else kappa
        s0 = _initial_sparsity(kappa, s)
        s_max = p.get("s_max") or max(op.n // 2, s0)
        acfg = AdaptiveConfig(
            s0=s0, s_max=s_max, inner=cfg, s_step=p.get("s_step", 1),
            variant=name[len("adaptive_"):],
        )
        return solve_adaptive(op, b, acfg)
    if name == "iht":
        return solve_iht(op, b, cfg)
    if name == "omp":
        return solve_omp(op, b, s, eps1=cfg.eps1)
    if name == "sp":
        return solve_sp(op, b, s, cfg)
    return solve_htp(op, b, s, cfg)


def _rel_error(u, x_true):
    denom = np.linalg.norm(x_true)
    if not np.all(np.isfinite(u)):
        return math.inf
    err = np.linalg.norm(u - x_true)
    return float(err / denom) if denom else float(err)


def _run_unit(spec, g_index, point, trial):
    s, eps, kappa = point
    seed = derive_trial_seed(spec.seed, trial)
    noise = NoiseModel(spec.problem.noise.kind, eps)
    pspec = replace(spec.problem, s=s, noise=noise, seed=seed)
    records, traces = [], []
    want_trace = spec.kind == "trace"
    try:
        problem = generate(pspec)
    except (NSTError, np.linalg.LinAlgError) as err:
        for algo in spec.algorithms:
            records.append(TrialRecord(
                algo.id, s, eps, kappa, trial, seed, math.inf, 0, 0.0,
                f"Failed({type(err).__name__})", False,
            ))
        return g_index, trial, records, traces
    build_time = None
    if spec.kind == "timing":
        t0 = time.perf_counter()
        build_operator(problem.a)
        build_time = time.perf_counter() - t0
    for algo in spec.algorithms:
        k = kappa if kappa is not None else (algo.params.get("kappa", 0.3) if algo.adaptive else None)
        t0 = time.perf_counter()
        try:
            res = run_algorithm(
                algo, problem.op, problem.b, s, kappa=k, trace=want_trace,
                check_feasibility=spec.check_feasibility,
            )
        except (NSTError, np.linalg.LinAlgError, ValueError) as err:
            elapsed = time.perf_counter() - t0
            records.append(TrialRecord(
                algo.id, s, eps, k, trial, seed, math.inf, 0, elapsed,
                f"Failed({type(err).__name__})", False, build_time=build_time,
            ))
            continue
        elapsed = time.perf_counter() - t0
        rel = _rel_error(res.u, problem.x_true)
        term = str(res.termination)
        if res.failed and res.reason:
            term = f"Failed({res.reason.split(':')[0]})"
        records.append(TrialRecord(
            algo.id, s, eps, k, trial, seed, rel, res.iterations, elapsed, term,
            rel <= spec.success_tol, res.max_feasibility_gap, build_time,
        ))
        if want_trace:
            errs = [_rel_error(problem.op.apply_pinv(problem.b), problem.x_true)]
            errs += [_rel_error(t.u, problem.x_true) for t in (res.trace or [])]
            traces.extend((algo.id, s, eps, trial, i, e) for i, e in enumerate(errs))
    return g_index, trial, records, traces


def aggregate(records, n, kind, has_noise):
    """Aggregate table rows (dicts) from trial records, in first-seen order."""
    groups = {}
    for r in records:
        groups.setdefault((r.algorithm, r.s, r.eps, r.kappa), []).append(r)
    rows = []
    for (algo, s, eps, kappa), recs in groups.items():
        times = [r.wall_time for r in recs]
        builds = [r.build_time for r in recs if r.build_time is not None]
        timing = kind == "timing"
        rows.append({
            "algorithm": algo,
            "s": s,
            "s_over_n": s / n,
            "eps": eps if has_noise else None,
            "kappa": kappa,
            "mean_rel_error": float(np.mean([r.rel_error for r in recs])),
            "success_freq": sum(r.success for r in recs) / len(recs),
            "mean_iters": float(np.mean([r.iterations for r in recs])),
            "mean_time_s": float(np.mean(times)) if timing else None,
            "median_time_s": float(statistics.median(times)) if timing else None,
            "mean_build_time_s": float(np.mean(builds)) if timing and builds else None,
        })
    return rows


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _aggregate_row(row):
    out = []
    for col in AGGREGATE_COLUMNS:
        v = row[col]
        if col in ("algorithm",):
            out.append(v)
        elif col == "s":
            out.append(str(v))
        else:
            out.append(_fmt(v))
    return out


def write_outputs(result, output_path):
    out = Path(output_path)
    out.mkdir(parents=True, exist_ok=True)
    has_noise = result.spec.problem.noise.kind != "none"
    _write_csv(out / "trials.csv", TRIAL_COLUMNS, [r.csv_row(has_noise) for r in result.records])
    _write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS, [_aggregate_row(r) for r in result.aggregate])
    if result.traces is not None:
        rows = [
            [a, str(s), _fmt(e) if has_noise else "", str(t), str(i), _fmt(err)]
            for a, s, e, t, i, err in result.traces
        ]
        _write_csv(out / "trace.csv", TRACE_COLUMNS, rows)


def run_experiment(spec):
    """Run every (grid point, trial) unit of `spec` and aggregate the records."""
    points = spec.grid()
    if spec.kind == "timing":
        # warm-up on the first grid point; discarded
        _run_unit(spec, 0, points[0], spec.trials)
    units = [(g, p, t) for g, p in enumerate(points) for t in range(spec.trials)]
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            done = list(pool.map(lambda u: _run_unit(spec, *u), units))
    else:
        done = [_run_unit(spec, *u) for u in units]
    done.sort(key=lambda d: (d[0], d[1]))
    # order by (grid point, algorithm, trial) regardless of scheduling
    order = {a.id: i for i, a in enumerate(spec.algorithms)}
    keyed = [((g, order[r.algorithm], r.trial_index), r) for g, _, recs, _ in done for r in recs]
    keyed.sort(key=lambda kr: kr[0])
    records = [r for _, r in keyed]
    has_noise = spec.problem.noise.kind != "none"
    agg = aggregate(records, spec.problem.n, spec.kind, has_noise)
    traces = [row for d in done for row in d[3]] if spec.kind == "trace" else None
    if traces is not None:
        traces.sort(key=lambda row: (row[1], order[row[0]], row[3], row[4]))
    result = ExperimentResult(spec, records, agg, traces)
    if spec.output_path:
        write_outputs(result, spec.output_path)
    return result


def _require(spec, kind):
    if spec.kind != kind:
        raise ValueError(f"expected a {kind!r} experiment, got {spec.kind!r}")
    return run_experiment(spec)


def run_phase_transition(spec):
    """Success frequency versus s for each algorithm."""
    return _require(spec, "phase")


def run_noise_sweep(spec):
    """Mean relative error versus noise level for each algorithm."""
    if spec.problem.noise.kind == "none":
        raise ValueError("noise sweep needs a noise model in the problem template")
    return _require(spec, "noise")


def run_convergence_trace(spec):
    """Per-iteration relative errors; row 0 of each trace is the least-squares start."""
    return _require(spec, "trace")


def run_adaptive_s0_sweep(spec):
    """Success frequency over the grid kappa x s with s0 = round(kappa * s)."""
    return _require(spec, "adaptive")


def run_timing(spec):
    """Mean and median solve time per (algorithm, s), operator build excluded."""
    return _require(spec, "timing")


_NST_ALL = ["nst_ht", "nst_ht_fb", "nst_ht_subfb", "nst_stretched_ht"]


def default_spec(kind):
    """Desk-scale defaults on 128 x 256 unit-column Gaussian matrices."""
    gaussian = ProblemSpec(128, 256, 30)
    if kind == "phase":
        algos = _NST_ALL + [
            {"name": "adaptive_nst_ht", "params": {"kappa": 0.3}},
            "iht", "omp", "sp", "htp",
        ]
        return ExperimentSpec("phase", gaussian, algos, {"s": list(range(10, 71, 10))})
    if kind == "noise":
        problem = ProblemSpec(128, 256, 20, noise=NoiseModel("signal", 0.0))
        eps = [round(0.02 * i, 2) for i in range(11)]
        return ExperimentSpec("noise", problem, _NST_ALL + ["iht", "omp", "sp", "htp"],
                              {"s": [20], "eps": eps})
    if kind == "trace":
        return ExperimentSpec("trace", gaussian, _NST_ALL, {"s": [30]})
    if kind == "adaptive":
        return ExperimentSpec("adaptive", gaussian, ["adaptive_nst_ht"],
                              {"s": [45, 50, 55, 60], "kappa": [0.1, 0.3, 0.5, 0.7, 0.9]})
    if kind == "timing":
        return ExperimentSpec("timing", gaussian, _NST_ALL + ["omp", "sp", "htp"],
                              {"s": [13, 26, 38, 51]}, trials=20)
    raise ValueError(f"unknown experiment kind {kind!r}")
