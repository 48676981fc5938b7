"""
Permutation and bootstrap approximations of the null distribution.

Five resampling schemes are available:

``P1``
    Within-subject permutation: each subject's condition curves are shuffled
    independently.
``P2``
    Pooled permutation: all ``n * ell`` curves are dealt without replacement
    into the ``n x ell`` cells.
``B1``
    Subject bootstrap: whole subjects are drawn with replacement; the
    replicate SSA is re-centred at the observed condition means.
``B2``
    Block bootstrap of centred curves: every condition block is redrawn with
    replacement from that block's centred curves, independently across blocks.
``B3``
    Parametric bootstrap: zero-mean Gaussian curves with the unbiased sample
    covariance of the concatenated observations.

Every replicate ``b`` owns a random stream seeded by
``SeedSequence([seed, 0, b])``, so results depend only on ``(seed, B)`` and
never on how replicates are scheduled across threads.  Replicates are
evaluated in fixed-size chunks through closed-form sums of squares; the
public ``resample_*`` functions consume the same draws and produce the
explicit resampled datasets.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import FunctionalDataset, Grid, pooled_subject_mean
from .errors import NumericalError
from .pointwise import PointwiseTrace, TraceKind, f_ratio, sums_of_squares
from .statistics import StatisticKind, compute_statistic, statistics_from_traces, trapezoid_weights

DEFAULT_B = 1000
CHUNK_SIZE = 64
# resampled values within this relative distance of the observed one are ties
TIE_RTOL = 1e-10
THREADS_ENV = "RMFANOVA_THREADS"

_TAG_REPLICATE = 0
_MAX_SEED = 2 ** 64


class ResamplingMethod(str, Enum):
    P1 = "P1"
    P2 = "P2"
    B1 = "B1"
    B2 = "B2"
    B3 = "B3"


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

def check_seed(seed) -> int:
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < _MAX_SEED:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return int(seed)


def derive_seed(seed: int, *keys: int) -> int:
    """64-bit child seed, a pure function of ``(seed, *keys)``."""
    ss = np.random.SeedSequence([check_seed(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def replicate_rng(seed: int, b: int) -> np.random.Generator:
    """Random stream of replicate ``b``."""
    return np.random.default_rng(np.random.SeedSequence([seed, _TAG_REPLICATE, b]))


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(value, 1)


# ---------------------------------------------------------------------------
# random draws (shared by the explicit resamplers and the kernels)
# ---------------------------------------------------------------------------

def _draw_p1(rng, n, ell):
    # row j: source condition of each output condition for subject j
    return rng.permuted(np.tile(np.arange(ell), (n, 1)), axis=1)


def _draw_p2(rng, n, ell):
    # cell (j, i) receives flattened curve perm[i * n + j]
    return rng.permutation(n * ell)


def _draw_b1(rng, n):
    return rng.integers(0, n, size=n)


def _draw_b2(rng, n, ell):
    return rng.integers(0, n, size=(n, ell))


def _draw_b3(rng, n, d):
    return rng.standard_normal((n, d))


# ---------------------------------------------------------------------------
# explicit resamplers
# ---------------------------------------------------------------------------

def resample_P1(data: FunctionalDataset, rng: np.random.Generator) -> FunctionalDataset:
    """Permute each subject's condition curves independently."""
    n, ell, _ = data.shape
    perm = _draw_p1(rng, n, ell)
    return data.replace_values(data.values[np.arange(n)[:, None], perm])


def resample_P2(data: FunctionalDataset, rng: np.random.Generator) -> FunctionalDataset:
    """Deal all curves, without replacement, into the subject x condition cells."""
    n, ell, p = data.shape
    perm = _draw_p2(rng, n, ell)
    flat = data.values.reshape(n * ell, p)
    return data.replace_values(flat[perm].reshape(ell, n, p).transpose(1, 0, 2))


def resample_B1(data: FunctionalDataset, rng: np.random.Generator) -> FunctionalDataset:
    """Draw ``n`` whole subjects with replacement."""
    idx = _draw_b1(rng, data.n_subjects)
    return FunctionalDataset(data.values[idx], data.grid, None, data.condition_labels)


def centered_curves(data: FunctionalDataset) -> np.ndarray:
    """Curves minus the pooled subject mean, block by block."""
    return data.values - pooled_subject_mean(data)[None]


def resample_B2(data: FunctionalDataset, rng: np.random.Generator) -> FunctionalDataset:
    """Redraw every condition block from that block's centred curves."""
    n, ell, _ = data.shape
    idx = _draw_b2(rng, n, ell)
    yc = centered_curves(data)
    return FunctionalDataset(yc[idx, np.arange(ell)[None, :]], data.grid, None,
                             data.condition_labels)


def ssa_pointwise_B1(boot: FunctionalDataset, original: FunctionalDataset) -> PointwiseTrace:
    """Bootstrap SSA re-centred at the original sample's condition and grand means."""
    if boot.shape != original.shape or boot.grid != original.grid:
        raise ValueError(f"bootstrap sample {boot.shape} does not match original {original.shape}")
    n = boot.n_subjects
    cb = boot.values.mean(axis=0)
    co = original.values.mean(axis=0)
    dev = cb - co - cb.mean(axis=0) + co.mean(axis=0)
    return PointwiseTrace(TraceKind.SSA, n * (dev ** 2).sum(axis=0), boot.grid)


@dataclass(frozen=True)
class CovarianceEstimate:
    """Sample covariance of the concatenated ``ell * p`` curve values.

    ``factor`` is a lower Cholesky factor of ``matrix + jitter_applied * I``.
    """

    matrix: np.ndarray
    jitter_applied: float
    factor: np.ndarray
    n_conditions: int
    grid: Grid

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def cholesky_with_jitter(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, adding ``delta * I`` only if needed.

    ``delta`` starts at ``1e-12 * trace / d`` and grows tenfold up to
    ``1e-6 * trace / d``.
    """
    d = matrix.shape[0]
    tr = float(np.trace(matrix))
    if tr == 0.0 and not np.any(matrix):
        return np.zeros_like(matrix), 0.0
    try:
        L = np.linalg.cholesky(matrix)
        if np.all(np.isfinite(L)):
            return L, 0.0
    except np.linalg.LinAlgError:
        pass
    base = tr / d
    eye = np.eye(d)
    for exponent in range(-12, -5):
        delta = base * 10.0 ** exponent
        try:
            L = np.linalg.cholesky(matrix + delta * eye)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, delta
    raise NumericalError(
        f"covariance is not positive semidefinite even after jitter {base * 1e-6:.3g}")


def estimate_covariance(data: FunctionalDataset) -> CovarianceEstimate:
    """Unbiased sample covariance over the full concatenated grid."""
    n, ell, p = data.shape
    if n < 2:
        raise ValueError(f"covariance estimation needs at least 2 subjects, got {n}")
    flat = data.values.reshape(n, ell * p)
    # shifting by one subject first is exact for identical subjects and
    # leaves the covariance unchanged
    shifted = flat - flat[0]
    centered = shifted - shifted.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    L, jitter = cholesky_with_jitter(cov)
    cov.setflags(write=False)
    L.setflags(write=False)
    return CovarianceEstimate(cov, jitter, L, ell, data.grid)


def resample_B3(cov: CovarianceEstimate, n: int, rng: np.random.Generator) -> FunctionalDataset:
    """``n`` zero-mean Gaussian subjects with the estimated covariance."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    z = _draw_b3(rng, n, cov.dim)
    y = z @ cov.factor.T
    return FunctionalDataset(y.reshape(n, cov.n_conditions, cov.grid.size), cov.grid)


# ---------------------------------------------------------------------------
# vectorized replicate kernels: each returns (ssa, ssr) of shape (chunk, p)
# ---------------------------------------------------------------------------

def _within_sums(g):
    """SSA and SSR of a batch ``(b, n, ell, p)`` via the within-subject split."""
    n = g.shape[1]
    cond = g.mean(axis=1)
    subj = g.mean(axis=2)
    grand = cond.mean(axis=1)
    ssa = n * ((cond - grand[:, None]) ** 2).sum(axis=1)
    within = ((g - subj[:, :, None]) ** 2).sum(axis=(1, 2))
    return ssa, within - ssa


class _P1Kernel:
    def __init__(self, data):
        n, ell, p = data.shape
        z = data.values - data.values.mean(axis=(0, 1))
        self.n, self.ell = n, ell
        self.zflat = z.reshape(n * ell, p)
        self.within = ((z - z.mean(axis=1, keepdims=True)) ** 2).sum(axis=(0, 1))
        self.offsets = (np.arange(n) * ell)[None, :, None]

    def __call__(self, rngs):
        n, ell = self.n, self.ell
        perms = np.stack([_draw_p1(r, n, ell) for r in rngs])          # (b, n, ell)
        b = len(rngs)
        sel = np.zeros((b, ell, n * ell))
        cols = (perms + self.offsets).transpose(0, 2, 1)                # (b, ell, n)
        np.put_along_axis(sel, cols, 1.0, axis=2)
        sums = (sel.reshape(b * ell, n * ell) @ self.zflat).reshape(b, ell, -1)
        ssa = (sums ** 2).sum(axis=1) / n
        return ssa, self.within - ssa


class _P2Kernel:
    def __init__(self, data):
        n, ell, p = data.shape
        z = data.values - data.values.mean(axis=(0, 1))
        self.n, self.ell = n, ell
        self.zflat = z.reshape(n * ell, p)
        self.total = (z ** 2).sum(axis=(0, 1))

    def __call__(self, rngs):
        n, ell = self.n, self.ell
        perms = np.stack([_draw_p2(r, n, ell) for r in rngs])           # (b, N)
        g = self.zflat[perms].reshape(len(rngs), ell, n, -1)
        ssa = (g.sum(axis=2) ** 2).sum(axis=1) / n
        subj = (g.sum(axis=1) ** 2).sum(axis=1) / ell
        return ssa, self.total - ssa - subj


class _B1Kernel:
    def __init__(self, data):
        n, ell, p = data.shape
        z = data.values - data.values.mean(axis=(0, 1))
        dev = z - z.mean(axis=1, keepdims=True)
        self.n, self.ell, self.p = n, ell, p
        self.dflat = dev.reshape(n, ell * p)
        self.q = (dev ** 2).sum(axis=1)                                 # (n, p)
        self.m = dev.mean(axis=0)                                       # (ell, p)

    def __call__(self, rngs):
        n, ell, p = self.n, self.ell, self.p
        b = len(rngs)
        idx = np.stack([_draw_b1(r, n) for r in rngs])
        counts = np.zeros((b, n))
        np.add.at(counts, (np.arange(b)[:, None], idx), 1.0)
        mb = (counts @ self.dflat).reshape(b, ell, p) / n
        ssa = n * ((mb - self.m) ** 2).sum(axis=1)
        ssr = counts @ self.q - n * (mb ** 2).sum(axis=1)
        return ssa, ssr


class _B2Kernel:
    def __init__(self, data):
        self.n, self.ell, _ = data.shape
        self.yc = centered_curves(data)
        self.cols = np.arange(self.ell)[None, None, :]

    def __call__(self, rngs):
        idx = np.stack([_draw_b2(r, self.n, self.ell) for r in rngs])  # (b, n, ell)
        return _within_sums(self.yc[idx, self.cols])


class _B3Kernel:
    def __init__(self, data):
        self.n, self.ell, self.p = data.shape
        self.cov = estimate_covariance(data)

    def __call__(self, rngs):
        d = self.cov.dim
        z = np.stack([_draw_b3(r, self.n, d) for r in rngs])            # (b, n, d)
        y = (z.reshape(-1, d) @ self.cov.factor.T).reshape(len(rngs), self.n, self.ell, self.p)
        return _within_sums(y)


_KERNELS = {
    ResamplingMethod.P1: _P1Kernel,
    ResamplingMethod.P2: _P2Kernel,
    ResamplingMethod.B1: _B1Kernel,
    ResamplingMethod.B2: _B2Kernel,
    ResamplingMethod.B3: _B3Kernel,
}


def replicate_traces(data: FunctionalDataset, method, seed: int,
                     replicates: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """SSA and SSR traces of the given replicates, shape ``(len(replicates), p)``.

    The SSA returned for ``B1`` is the re-centred bootstrap SSA.
    """
    kernel = _KERNELS[ResamplingMethod(method)](data)
    rngs = [replicate_rng(check_seed(seed), b) for b in replicates]
    ssa, ssr = kernel(rngs)
    return ssa, np.maximum(ssr, 0.0)


def replicate_statistics(data: FunctionalDataset, method, B: int, seed: int,
                         statistics: Iterable = tuple(StatisticKind),
                         threads: Optional[int] = None) -> dict:
    """Resampled values of several statistics from one set of ``B`` replicates.

    Each statistic's vector is identical to what :func:`run_test` would
    produce for it alone with the same ``(seed, B)``.
    """
    method = ResamplingMethod(method)
    B = _check_B(B)
    seed = check_seed(seed)
    kinds = [StatisticKind(s) for s in statistics]
    threads = default_threads() if threads is None else max(int(threads), 1)
    n = data.n_subjects
    if n < 2:
        raise ValueError(f"resampling tests need at least 2 subjects, got {n}")
    kernel = _KERNELS[method](data)
    weights = trapezoid_weights(data.grid)
    need_f = any(k is not StatisticKind.C for k in kinds)

    def chunk(start):
        rngs = [replicate_rng(seed, b) for b in range(start, min(start + CHUNK_SIZE, B))]
        ssa, ssr = kernel(rngs)
        ssr = np.maximum(ssr, 0.0)
        f = f_ratio(ssa, ssr, n)[0] if need_f else np.zeros_like(ssa)
        stats = statistics_from_traces(ssa, f, weights)
        return {k: stats[k] for k in kinds}

    starts = range(0, B, CHUNK_SIZE)
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    return {k: np.concatenate([part[k] for part in parts]) for k in kinds}


# ---------------------------------------------------------------------------
# the test
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestResult:
    """Outcome of one resampling test."""

    __test__ = False  # not a pytest class

    statistic: StatisticKind
    method: ResamplingMethod
    observed: float
    resampled: np.ndarray
    p_value: float
    B: int
    seed: int

    def to_dict(self, verbose: bool = False) -> dict:
        out = {
            "statistic": self.statistic.value,
            "method": self.method.value,
            "observed": float(self.observed),
            "p_value": float(self.p_value),
            "B": int(self.B),
            "seed": int(self.seed),
        }
        if verbose:
            out["resampled"] = [float(v) for v in self.resampled]
        return out


def _check_B(B) -> int:
    if isinstance(B, (bool, np.bool_)) or not isinstance(B, (int, np.integer)) or B < 1:
        raise ValueError(f"B must be a positive integer, got {B!r}")
    return int(B)


def exceedances(resampled: np.ndarray, observed: float) -> int:
    """Number of replicates strictly above the observed value (ties excluded)."""
    threshold = observed + TIE_RTOL * abs(observed)
    return int(np.count_nonzero(np.asarray(resampled) > threshold))


def run_tests(data: FunctionalDataset, statistics: Iterable, method, B: int = DEFAULT_B,
              seed: int = 0, threads: Optional[int] = None) -> list[TestResult]:
    """Several statistics tested with one resampling method and shared replicates."""
    method = ResamplingMethod(method)
    B = _check_B(B)
    seed = check_seed(seed)
    kinds = [StatisticKind(s) for s in statistics]
    observed = {k: compute_statistic(data, k) for k in kinds}
    resampled = replicate_statistics(data, method, B, seed, kinds, threads)
    results = []
    for k in kinds:
        r = resampled[k]
        r.setflags(write=False)
        results.append(TestResult(k, method, observed[k], r,
                                  exceedances(r, observed[k]) / B, B, seed))
    return results


def run_test(data: FunctionalDataset, statistic, method, B: int = DEFAULT_B, seed: int = 0,
             threads: Optional[int] = None) -> TestResult:
    """Resampling test of equal condition mean functions.

    Parameters
    ----------
    data : FunctionalDataset
    statistic : {"C", "D", "E"} or StatisticKind
    method : {"P1", "P2", "B1", "B2", "B3"} or ResamplingMethod
    B : int
        Number of replicates.
    seed : int
        Seed in ``[0, 2**64)``; the result is a pure function of
        ``(data, statistic, method, B, seed)``.
    threads : int, optional
        Worker threads for replicate chunks; does not affect the result.

    Returns
    -------
    TestResult
        ``p_value`` is the fraction of replicates strictly exceeding the
        observed statistic.

    Raises
    ------
    DegeneracyError
        ``D``/``E`` requested and the observed F trace has an unbounded point.
    """
    return run_tests(data, [statistic], method, B, seed, threads)[0]
