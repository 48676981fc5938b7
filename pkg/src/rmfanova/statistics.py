"""Global test statistics aggregating pointwise traces over the grid."""
from __future__ import annotations

from enum import Enum

import numpy as np

from .core import FunctionalDataset, Grid
from .errors import DegeneracyError
from .pointwise import PointwiseTrace, f_pointwise, ssa_pointwise


class StatisticKind(str, Enum):
    """``C`` integrates SSA, ``D`` integrates F, ``E`` takes the sup of F."""

    C = "C"
    D = "D"
    E = "E"


def trapezoid_weights(grid: Grid) -> np.ndarray:
    """Composite trapezoid weights over the grid points.

    ``values @ weights`` integrates a trace over ``[t_1, t_p]``.
    """
    t = grid.points
    h = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def _raise_if_degenerate(trace: PointwiseTrace):
    if trace.has_degenerate:
        idx = np.flatnonzero(trace.degenerate)
        raise DegeneracyError(
            f"pointwise F is unbounded (zero residual, nonzero effect) at grid "
            f"indices {idx[:10].tolist()}{'...' if idx.size > 10 else ''}",
            idx,
        )


def integrate_trace(trace: PointwiseTrace) -> float:
    """Trapezoidal integral of a trace over its grid."""
    _raise_if_degenerate(trace)
    return float(trace.values @ trapezoid_weights(trace.grid))


def statistic_C(data: FunctionalDataset) -> float:
    return integrate_trace(ssa_pointwise(data))


def statistic_D(data: FunctionalDataset) -> float:
    return integrate_trace(f_pointwise(data))


def statistic_E(data: FunctionalDataset) -> float:
    trace = f_pointwise(data)
    _raise_if_degenerate(trace)
    return float(trace.values.max())


def compute_statistic(data: FunctionalDataset, kind) -> float:
    kind = StatisticKind(kind)
    if kind is StatisticKind.C:
        return statistic_C(data)
    if kind is StatisticKind.D:
        return statistic_D(data)
    return statistic_E(data)


def statistics_from_traces(ssa: np.ndarray, f: np.ndarray, weights: np.ndarray) -> dict:
    """C, D and E for a batch of traces (last axis = grid).

    Degenerate F entries (``inf``) propagate to ``inf`` statistics.
    """
    return {
        StatisticKind.C: ssa @ weights,
        StatisticKind.D: np.where(np.isinf(f).any(axis=-1), np.inf,
                                  np.where(np.isinf(f), 0.0, f) @ weights),
        StatisticKind.E: f.max(axis=-1),
    }
