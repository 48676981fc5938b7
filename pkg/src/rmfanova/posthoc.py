"""
Pairwise comparisons of conditions with Bonferroni control of the FWER.

Each pair ``(r, s)`` is tested by running the global test on the two-condition
dataset made of conditions ``r`` and ``s``.  With ``m`` pairs, a pair is
rejected when ``p_raw <= alpha / m``; the reported adjusted p-value is
``min(1, m * p_raw)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import FunctionalDataset, _check_index
from .resampling import (DEFAULT_B, ResamplingMethod, check_seed, derive_seed, exceedances,
                         replicate_statistics, _check_B)
from .statistics import StatisticKind, compute_statistic


@dataclass(frozen=True)
class PairResult:
    r: int
    s: int
    p_raw: float
    p_adjusted: float
    reject: bool

    @property
    def label(self) -> str:
        return f"{self.r}-{self.s}"


@dataclass(frozen=True)
class PosthocReport:
    """Raw and Bonferroni-adjusted p-values of ``m`` pairwise tests."""

    pairs: tuple
    m: int
    alpha: float
    statistic: StatisticKind
    method: ResamplingMethod
    B: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic.value,
            "method": self.method.value,
            "alpha": float(self.alpha),
            "m": int(self.m),
            "B": int(self.B),
            "seed": int(self.seed),
            "pairs": [
                {"r": pr.r, "s": pr.s, "p_raw": float(pr.p_raw),
                 "p_adjusted": float(pr.p_adjusted), "reject": bool(pr.reject)}
                for pr in self.pairs
            ],
        }


def all_pairs(ell: int) -> list:
    """All unordered pairs ``(r, s)``, ``r < s``, in lexicographic order (1-based)."""
    return list(combinations(range(1, ell + 1), 2))


def check_pairs(pairs: Optional[Iterable], ell: int) -> list:
    if pairs is None:
        return all_pairs(ell)
    out = []
    for pair in pairs:
        try:
            r, s = pair
        except (TypeError, ValueError):
            raise ValueError(f"a pair must be (r, s), got {pair!r}") from None
        _check_index(r, ell, "condition")
        _check_index(s, ell, "condition")
        if not r < s:
            raise ValueError(f"pair {r}-{s}: need r < s")
        out.append((int(r), int(s)))
    if not out:
        raise ValueError("no pairs requested")
    if len(set(out)) != len(out):
        raise ValueError("duplicate pairs requested")
    return out


def extract_pair(data: FunctionalDataset, r: int, s: int) -> FunctionalDataset:
    """Two-condition dataset with conditions ``r`` and ``s`` (1-based), in that order."""
    a = _check_index(r, data.n_conditions, "condition")
    b = _check_index(s, data.n_conditions, "condition")
    if not a < b:
        raise ValueError(f"pair {r}-{s}: need r < s")
    labels = (data.condition_labels[a], data.condition_labels[b])
    return FunctionalDataset(data.values[:, [a, b], :], data.grid, data.subject_labels, labels)


def pair_seed(seed: int, r: int, s: int) -> int:
    """Sub-seed of pair ``(r, s)``; independent of which other pairs are tested."""
    return derive_seed(seed, r, s)


def bonferroni(p_raw: Sequence[float], alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Adjusted p-values ``min(1, m p)`` and rejections ``p <= alpha / m``."""
    p = np.asarray(p_raw, dtype=float)
    m = p.size
    return np.minimum(1.0, m * p), p <= alpha / m


def pairwise_pvalues(data: FunctionalDataset, statistics: Iterable, methods: Iterable,
                     B: int, seed: int, pairs: Optional[Iterable] = None,
                     threads: Optional[int] = None) -> dict:
    """Raw pairwise p-values ``{(statistic, method): array(len(pairs))}``.

    Replicates of one pair and method are shared between statistics; the
    values are those :func:`run_posthoc` reports.
    """
    kinds = [StatisticKind(k) for k in statistics]
    meths = [ResamplingMethod(m) for m in methods]
    B = _check_B(B)
    seed = check_seed(seed)
    pairs = check_pairs(pairs, data.n_conditions)
    out = {(k, m): np.empty(len(pairs)) for k in kinds for m in meths}
    for q, (r, s) in enumerate(pairs):
        sub = extract_pair(data, r, s)
        observed = {k: compute_statistic(sub, k) for k in kinds}
        sub_seed = pair_seed(seed, r, s)
        for m in meths:
            res = replicate_statistics(sub, m, B, sub_seed, kinds, threads)
            for k in kinds:
                out[(k, m)][q] = exceedances(res[k], observed[k]) / B
    return out


def _report(p_raw, pairs, alpha, kind, method, B, seed) -> PosthocReport:
    adjusted, reject = bonferroni(p_raw, alpha)
    rows = tuple(PairResult(r, s, float(p), float(pa), bool(rej))
                 for (r, s), p, pa, rej in zip(pairs, p_raw, adjusted, reject))
    return PosthocReport(rows, len(rows), float(alpha), kind, method, B, seed)


def _check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return alpha


def run_posthoc(data: FunctionalDataset, statistic, method, B: int = DEFAULT_B,
                alpha: float = 0.05, seed: int = 0, pairs: Optional[Iterable] = None,
                threads: Optional[int] = None) -> PosthocReport:
    """Bonferroni post hoc tests over condition pairs.

    Parameters
    ----------
    data : FunctionalDataset
    statistic, method
        As for :func:`rmfanova.run_test`.
    B : int
    alpha : float
        Family-wise level in (0, 1).
    seed : int
        Pair ``(r, s)`` is tested with seed ``pair_seed(seed, r, s)``.
    pairs : iterable of (r, s), optional
        1-based condition pairs with ``r < s``; default all ``C(ell, 2)``.

    Returns
    -------
    PosthocReport
    """
    kind, meth = StatisticKind(statistic), ResamplingMethod(method)
    alpha = _check_alpha(alpha)
    pairs = check_pairs(pairs, data.n_conditions)
    seed = check_seed(seed)
    p = pairwise_pvalues(data, [kind], [meth], B, seed, pairs, threads)[(kind, meth)]
    return _report(p, pairs, alpha, kind, meth, int(B), seed)


def run_posthoc_grid(data: FunctionalDataset, statistics: Iterable, methods: Iterable,
                     B: int = DEFAULT_B, alpha: float = 0.05, seed: int = 0,
                     pairs: Optional[Iterable] = None,
                     threads: Optional[int] = None) -> list[PosthocReport]:
    """One report per (statistic, method), sharing replicates across statistics."""
    kinds = [StatisticKind(k) for k in statistics]
    meths = [ResamplingMethod(m) for m in methods]
    alpha = _check_alpha(alpha)
    pairs = check_pairs(pairs, data.n_conditions)
    seed = check_seed(seed)
    p = pairwise_pvalues(data, kinds, meths, B, seed, pairs, threads)
    return [_report(p[(k, m)], pairs, alpha, k, m, int(B), seed) for k in kinds for m in meths]
