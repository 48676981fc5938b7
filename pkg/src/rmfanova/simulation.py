"""
Monte Carlo study of size, power and family-wise error.

Synthetic data follow ``Y_j = mu + e_j`` with ``ell = 3`` conditions.  Six
mean models are provided (``M1`` and ``M4`` satisfy the null hypothesis),
errors are autoregressive across conditions built from independent Brownian
bridges, and a lognormal variant exponentiates the Gaussian errors.  A
Gaussian-process path (``model="GP"``) draws curves with a prescribed mean
and covariance under normal, Student ``t5`` or chi-square(10) coordinates.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from itertools import combinations
from typing import Iterable, Optional

import numpy as np

from .core import FunctionalDataset, Grid
from .errors import DegeneracyError
from .posthoc import pairwise_pvalues
from .resampling import (CovarianceEstimate, ResamplingMethod, check_seed, cholesky_with_jitter,
                         default_threads, derive_seed, estimate_covariance, exceedances,
                         replicate_statistics, resample_B3)
from .statistics import StatisticKind, compute_statistic

MODELS = ("M1", "M2", "M3", "M4", "M5", "M6", "GP")
PAPER_RHOS = (0.0, 0.25, 0.5, 0.75)

_TAG_DATA = 2
_TAG_TEST = 3


# ---------------------------------------------------------------------------
# mean functions
# ---------------------------------------------------------------------------

def _sine_power(t, k):
    return np.sin(2 * np.pi * t ** 2) ** k


def _bump(t, a):
    # sqrt(a t / pi) * exp(-a t)
    return np.sqrt(a * t / np.pi) * np.exp(-a * t)


_MEANS = {
    "M1": (partial(_sine_power, k=5),) * 3,
    "M2": (partial(_sine_power, k=5),) * 2 + (partial(_sine_power, k=7),),
    "M3": (partial(_sine_power, k=5),) * 2 + (partial(_sine_power, k=3),),
    "M4": (partial(_bump, a=6.0),) * 3,
    "M5": (partial(_bump, a=6.0),) * 2 + (partial(_bump, a=6.5),),
    "M6": (partial(_bump, a=6.0),) * 2 + (partial(_bump, a=5.5),),
}


def mean_function(model: str, condition: int, t):
    """Mean of ``condition`` (1, 2 or 3) under model ``M1``..``M6`` at ``t``."""
    if model not in _MEANS:
        raise ValueError(f"unknown model {model!r}; expected one of M1..M6")
    if condition not in (1, 2, 3):
        raise ValueError(f"condition must be 1, 2 or 3, got {condition!r}")
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("t must lie in [0, 1]")
    out = _MEANS[model][condition - 1](t)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# error processes
# ---------------------------------------------------------------------------

def bridge_covariance(points) -> np.ndarray:
    s = np.asarray(points, dtype=float)
    return np.minimum.outer(s, s) - np.multiply.outer(s, s)


def bridge_factor(grid: Grid) -> np.ndarray:
    """``L`` with ``L @ L.T`` equal to the bridge covariance on the grid.

    Rows of pinned endpoints (t = 0 or 1) are exactly zero.
    """
    t = grid.points
    inner = (t > 0) & (t < 1)
    L = np.zeros((t.size, t.size))
    if inner.any():
        Li = np.linalg.cholesky(bridge_covariance(t[inner]))
        idx = np.flatnonzero(inner)
        L[np.ix_(idx, idx)] = Li
    return L


def brownian_bridges(grid: Grid, rng: np.random.Generator, size=()) -> np.ndarray:
    """Independent standard Brownian bridges at the grid points, shape ``size + (p,)``."""
    size = (size,) if np.isscalar(size) else tuple(size)
    L = bridge_factor(grid)
    z = rng.standard_normal(size + (grid.size,))
    return z @ L.T


def brownian_bridge(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    return brownian_bridges(grid, rng)


# ---------------------------------------------------------------------------
# specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentModel:
    """Mean curves ``(ell, p)`` and covariance for the Gaussian-process generator."""

    mean: np.ndarray
    covariance: CovarianceEstimate

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = self.covariance
        if mean.shape != (cov.n_conditions, cov.grid.size):
            raise ValueError(f"mean shape {mean.shape} does not match covariance blocks "
                             f"({cov.n_conditions}, {cov.grid.size})")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)

    @classmethod
    def from_dataset(cls, data: FunctionalDataset, hypothesis: str = "null") -> "MomentModel":
        """Sample moments of ``data``.

        ``hypothesis="null"`` uses the pooled mean of all ``n * ell`` curves
        for every condition; ``"alternative"`` keeps each condition's mean.
        """
        cond = data.values.mean(axis=0)
        if hypothesis == "null":
            mean = np.repeat(cond.mean(axis=0)[None], data.n_conditions, axis=0)
        elif hypothesis == "alternative":
            mean = cond
        else:
            raise ValueError(f"hypothesis must be 'null' or 'alternative', got {hypothesis!r}")
        return cls(mean, estimate_covariance(data))


@dataclass(frozen=True)
class SimulationSpec:
    """Configuration of one Monte Carlo cell.

    ``xi`` defaults to 0.5 for M1-M3 and 0.05 for M4-M6.  ``grid_kind``
    defaults to ``"closed"`` (``p`` equispaced points including 0 and 1)
    except for M5/M6, whose third condition differs from the others at the
    pinned endpoint ``t = 1``; they use ``"open"`` (strictly interior points).
    """

    model: str = "M1"
    distribution: str = "normal"
    rho: float = 0.0
    xi: Optional[float] = None
    n: int = 35
    p: int = 101
    ell: int = 3
    B: int = 1000
    n_runs: int = 1000
    alpha: float = 0.05
    seed: int = 0
    grid_kind: Optional[str] = None
    moments: Optional[MomentModel] = field(default=None, compare=False)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.model == "GP":
            if self.moments is None:
                raise ValueError("model 'GP' needs moments")
            if self.distribution not in ("normal", "t5", "chi2"):
                raise ValueError("GP distribution must be 'normal', 't5' or 'chi2'")
            object.__setattr__(self, "ell", self.moments.covariance.n_conditions)
            object.__setattr__(self, "p", self.moments.covariance.grid.size)
        else:
            if self.distribution not in ("normal", "lognormal"):
                raise ValueError("distribution must be 'normal' or 'lognormal'")
            if self.ell != 3:
                raise ValueError("models M1-M6 have exactly 3 conditions")
            if not 0.0 <= self.rho < 1.0:
                raise ValueError(f"rho must be in [0, 1), got {self.rho}")
            if self.xi is None:
                object.__setattr__(self, "xi", 0.5 if self.model in ("M1", "M2", "M3") else 0.05)
            if not self.xi > 0:
                raise ValueError(f"xi must be positive, got {self.xi}")
            if self.p < 2:
                raise ValueError(f"p must be at least 2, got {self.p}")
        if self.grid_kind is None:
            object.__setattr__(self, "grid_kind", "open" if self.model in ("M5", "M6") else "closed")
        if self.grid_kind not in ("closed", "open"):
            raise ValueError(f"grid_kind must be 'closed' or 'open', got {self.grid_kind!r}")
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.B < 1 or self.n_runs < 1:
            raise ValueError("B and n_runs must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        object.__setattr__(self, "seed", check_seed(self.seed))

    @property
    def grid(self) -> Grid:
        if self.model == "GP":
            return self.moments.covariance.grid
        return Grid.equispaced(self.p, closed=self.grid_kind == "closed")

    def mean_curves(self) -> np.ndarray:
        if self.model == "GP":
            return np.asarray(self.moments.mean)
        t = self.grid.points
        return np.stack([mean_function(self.model, i, t) for i in (1, 2, 3)])

    def null_pairs(self) -> list:
        """Condition pairs (1-based) whose mean curves coincide."""
        mu = self.mean_curves()
        return [(r + 1, s + 1) for r, s in combinations(range(mu.shape[0]), 2)
                if np.array_equal(mu[r], mu[s])]


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def generate_errors(spec: SimulationSpec, rng: np.random.Generator) -> np.ndarray:
    """Errors of shape ``(n, 3, p)`` for models M1-M6."""
    if spec.model == "GP":
        raise ValueError("generate_errors applies to models M1-M6")
    grid = spec.grid
    bridges = brownian_bridges(grid, rng, (spec.n, 3))
    xi, rho = spec.xi, spec.rho
    innov = xi * math.sqrt(1.0 - rho ** 2)
    e = np.empty_like(bridges)
    e[:, 0] = xi * bridges[:, 0]
    e[:, 1] = rho * e[:, 0] + innov * bridges[:, 1]
    e[:, 2] = rho * e[:, 1] + innov * bridges[:, 2]
    if spec.distribution == "lognormal":
        t = grid.points
        e = np.exp(e) - np.exp(0.5 * xi ** 2 * t * (1.0 - t))
    return e


def standardized_draws(rng: np.random.Generator, size, distribution: str) -> np.ndarray:
    """Independent zero-mean, unit-variance coordinates."""
    if distribution == "normal":
        return rng.standard_normal(size)
    if distribution == "t5":
        return rng.standard_t(5, size) * math.sqrt(3.0 / 5.0)
    if distribution == "chi2":
        return (rng.chisquare(10, size) - 10.0) / math.sqrt(20.0)
    raise ValueError(f"unknown distribution {distribution!r}")


def sample_from_moments(moments: MomentModel, n: int, rng: np.random.Generator,
                        distribution: str = "normal") -> FunctionalDataset:
    """``n`` subjects with the given mean curves and covariance.

    Coordinates are standardized draws mixed by the covariance's Cholesky
    factor; the normal case coincides with the parametric bootstrap draw
    shifted by the mean.
    """
    cov = moments.covariance
    if distribution == "normal":
        noise = resample_B3(cov, n, rng).values
    else:
        z = standardized_draws(rng, (n, cov.dim), distribution)
        noise = (z @ cov.factor.T).reshape(n, cov.n_conditions, cov.grid.size)
    return FunctionalDataset(moments.mean[None] + noise, cov.grid)


def generate_dataset(spec: SimulationSpec, rng: np.random.Generator) -> FunctionalDataset:
    """One synthetic dataset drawn according to ``spec``."""
    if spec.model == "GP":
        return sample_from_moments(spec.moments, spec.n, rng, spec.distribution)
    values = spec.mean_curves()[None] + generate_errors(spec, rng)
    return FunctionalDataset(values, spec.grid)


def run_rng(spec: SimulationSpec, run: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([spec.seed, _TAG_DATA, run]))


def run_test_seed(spec: SimulationSpec, run: int) -> int:
    return derive_seed(spec.seed, _TAG_TEST, run)


# ---------------------------------------------------------------------------
# Monte Carlo drivers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationSummary:
    """Empirical rejection proportions per (statistic, method) cell.

    ``rejection_rate`` holds the global-test rejection rate, or for
    ``mode="posthoc"`` the rate of runs with at least one pairwise rejection.
    ``fwer`` counts only rejections of true pairwise nulls and
    ``per_pair_power`` the rejection rate of every pair (power for pairs
    whose means differ).
    """

    spec: SimulationSpec
    mode: str
    statistics: tuple
    methods: tuple
    rejection_rate: dict
    n_runs: int
    fwer: Optional[dict] = None
    per_pair_power: Optional[dict] = None
    pairs: tuple = ()

    @property
    def mc_stderr(self) -> dict:
        """Binomial standard error ``sqrt(r (1 - r) / n_runs)`` of every rejection rate."""
        return {cell: binomial_stderr(r, self.n_runs) for cell, r in self.rejection_rate.items()}


def binomial_stderr(rate: float, n_runs: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / n_runs)


def _kinds(statistics):
    return tuple(StatisticKind(s) for s in statistics)


def _methods(methods):
    return tuple(ResamplingMethod(m) for m in methods)


def _global_run(spec, statistics, methods, run):
    data = generate_dataset(spec, run_rng(spec, run))
    try:
        observed = {k: compute_statistic(data, k) for k in statistics}
    except DegeneracyError as exc:
        raise DegeneracyError(f"Monte Carlo run {run}: {exc}", exc.indices) from exc
    seed = run_test_seed(spec, run)
    out = {}
    for m in methods:
        res = replicate_statistics(data, m, spec.B, seed, statistics, threads=1)
        for k in statistics:
            out[(k, m)] = exceedances(res[k], observed[k]) / spec.B
    return out


def _posthoc_run(spec, statistics, methods, pairs, run):
    data = generate_dataset(spec, run_rng(spec, run))
    seed = run_test_seed(spec, run)
    try:
        return pairwise_pvalues(data, statistics, methods, spec.B, seed, pairs, threads=1)
    except DegeneracyError as exc:
        raise DegeneracyError(f"Monte Carlo run {run}: {exc}", exc.indices) from exc


def _map_runs(fn, n_runs, threads):
    threads = default_threads() if threads is None else max(int(threads), 1)
    if threads == 1:
        return [fn(r) for r in range(n_runs)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_runs), chunksize=max(1, n_runs // (4 * threads))))


def run_global_pvalues(spec: SimulationSpec, statistics: Iterable = tuple(StatisticKind),
                       methods: Iterable = tuple(ResamplingMethod),
                       threads: Optional[int] = None) -> dict:
    """Global-test p-values of every run: ``{(stat, method): array(n_runs)}``."""
    kinds, meths = _kinds(statistics), _methods(methods)
    runs = _map_runs(partial(_global_run, spec, kinds, meths), spec.n_runs, threads)
    return {cell: np.array([r[cell] for r in runs]) for cell in runs[0]}


def estimate_rejection_rates(spec: SimulationSpec, statistics: Iterable = tuple(StatisticKind),
                             methods: Iterable = tuple(ResamplingMethod),
                             threads: Optional[int] = None) -> SimulationSummary:
    """Proportion of runs whose global test has ``p <= alpha``."""
    kinds, meths = _kinds(statistics), _methods(methods)
    pvals = run_global_pvalues(spec, kinds, meths, threads)
    rates = {cell: float(np.mean(p <= spec.alpha)) for cell, p in pvals.items()}
    return SimulationSummary(spec, "global", kinds, meths, rates, spec.n_runs)


def estimate_fwer(spec: SimulationSpec, statistics: Iterable = tuple(StatisticKind),
                  methods: Iterable = tuple(ResamplingMethod),
                  threads: Optional[int] = None) -> SimulationSummary:
    """Bonferroni post hoc rejections over all condition pairs.

    A run commits a family-wise error when any pair with truly equal means is
    rejected at ``alpha / m``.
    """
    kinds, meths = _kinds(statistics), _methods(methods)
    pairs = tuple(combinations(range(1, spec.ell + 1), 2))
    m = len(pairs)
    runs = _map_runs(partial(_posthoc_run, spec, kinds, meths, pairs), spec.n_runs, threads)
    null_idx = [pairs.index(pr) for pr in spec.null_pairs()]
    rates, fwer, per_pair = {}, {}, {}
    for cell in runs[0]:
        p = np.array([r[cell] for r in runs])                     # (n_runs, m)
        reject = p <= spec.alpha / m
        rates[cell] = float(np.mean(reject.any(axis=1)))
        fwer[cell] = float(np.mean(reject[:, null_idx].any(axis=1))) if null_idx else 0.0
        per_pair[cell] = {pr: float(np.mean(reject[:, q])) for q, pr in enumerate(pairs)}
    return SimulationSummary(spec, "posthoc", kinds, meths, rates, spec.n_runs,
                             fwer=fwer, per_pair_power=per_pair, pairs=pairs)


def with_rho(spec: SimulationSpec, rho: float) -> SimulationSpec:
    return replace(spec, rho=float(rho))


# ---------------------------------------------------------------------------
# bundled synthetic data
# ---------------------------------------------------------------------------

SAMPLE_SEED = 20230417


def make_sample_dataset() -> FunctionalDataset:
    """Small M2 dataset (n=12, 26 points) used by the smoke tests."""
    spec = SimulationSpec(model="M2", rho=0.5, n=12, p=26, B=1, n_runs=1, seed=SAMPLE_SEED)
    return generate_dataset(spec, run_rng(spec, 0))


def dti_standin_moments() -> MomentModel:
    """Fixed moments mimicking four-visit tract profiles (n=17, 93 points).

    Visits share a smooth squared-exponential profile covariance with
    correlation ``0.7 ** |i - i'|`` between visits; mean profiles rise with
    each visit, most strongly at the last one.
    """
    ell, p = 4, 93
    grid = Grid.from_physical(np.arange(1, p + 1))
    t = grid.points
    k_t = 0.03 ** 2 * np.exp(-0.5 * (np.subtract.outer(t, t) / 0.08) ** 2)
    k_v = 0.7 ** np.abs(np.subtract.outer(np.arange(ell), np.arange(ell)))
    L, jitter = cholesky_with_jitter(np.kron(k_v, k_t))
    cov = CovarianceEstimate(np.kron(k_v, k_t), jitter, L, ell, grid)
    base = 0.45 + 0.08 * np.sin(np.pi * t) - 0.05 * t
    shift = np.array([0.0, 0.004, 0.008, 0.025])
    mean = base[None] + shift[:, None] * (0.5 + np.sin(np.pi * t))[None]
    return MomentModel(mean, cov)


def dti_standin(seed: int, n: int = 17) -> FunctionalDataset:
    """Synthetic stand-in for a four-visit DTI study, drawn with the parametric bootstrap generator."""
    rng = np.random.default_rng(np.random.SeedSequence([check_seed(seed), _TAG_DATA]))
    return sample_from_moments(dti_standin_moments(), n, rng)
