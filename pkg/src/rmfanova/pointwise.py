"""
Pointwise sums of squares and the pointwise F ratio.

At every grid point ``t`` the ``n x ell`` table of values is decomposed as in
a two-way additive (subject + condition) layout:

* ``SSA(t) = n * sum_i (mean_i(t) - mean(t))**2``, between-condition variation;
* ``SSR(t) = sum_ij (y_ij(t) - mean_i(t) - mean_j(t) + mean(t))**2``, residual;
* ``F(t) = [SSA / (ell - 1)] / [SSR / ((ell - 1)(n - 1))]``.

Degenerate points
-----------------
A point where numerator and denominator both vanish carries no information
and gets ``F = 0``.  A point with ``SSR = 0`` but ``SSA > 0`` has an unbounded
F; it is flagged in :attr:`PointwiseTrace.degenerate` and its value set to
``inf``.  "Vanish" is judged relative to the trace's own scale so that
exactly-pinned endpoints (where every curve passes through the same value up
to rounding) are handled like exact zeros.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .core import FunctionalDataset, Grid

# a point whose SSA + SSR is below this fraction of the trace maximum is flat
FLAT_RTOL = 1e-20
# SSR below this fraction of SSA + SSR at a non-flat point is a zero residual
DEGENERATE_RTOL = 1e-20


class TraceKind(str, Enum):
    SSA = "SSA"
    SSR = "SSR"
    F = "F"


@dataclass(frozen=True)
class PointwiseTrace:
    """Values of one pointwise statistic on the design grid."""

    kind: TraceKind
    values: np.ndarray
    grid: Grid
    degenerate: Optional[np.ndarray] = None

    def __post_init__(self):
        kind = TraceKind(self.kind)
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.size,):
            raise ValueError(f"trace has shape {vals.shape}, grid has {self.grid.size} points")
        deg = np.zeros(vals.shape, dtype=bool) if self.degenerate is None \
            else np.array(self.degenerate, dtype=bool)
        if deg.shape != vals.shape:
            raise ValueError("degenerate mask must match the trace length")
        if kind is not TraceKind.F and deg.any():
            raise ValueError("only F traces can carry degenerate points")
        if not np.all(np.isfinite(vals[~deg])):
            raise ValueError("trace values must be finite away from degenerate points")
        vals.setflags(write=False)
        deg.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "degenerate", deg)

    @property
    def has_degenerate(self) -> bool:
        return bool(self.degenerate.any())


def sums_of_squares(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """SSA and SSR of curves ``y`` with shape ``(..., n, ell, p)``.

    Leading axes are treated as a batch.  Returns two arrays of shape
    ``(..., p)``.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[-3]
    cond = y.mean(axis=-3)                                 # (..., ell, p)
    grand = cond.mean(axis=-2)                             # (..., p)
    subj = y.mean(axis=-2)                                 # (..., n, p)
    ssa = n * ((cond - grand[..., None, :]) ** 2).sum(axis=-2)
    resid = y - cond[..., None, :, :] - subj[..., :, None, :] + grand[..., None, None, :]
    ssr = (resid ** 2).sum(axis=(-3, -2))
    return ssa, ssr


def f_ratio(ssa: np.ndarray, ssr: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise F from SSA and SSR traces (last axis = grid).

    Returns ``(f, degenerate)``; degenerate entries of ``f`` are ``inf``.
    The ``(ell - 1)`` factors cancel, leaving ``(n - 1) * SSA / SSR``.
    """
    if n < 2:
        raise ValueError(f"pointwise F needs at least 2 subjects, got {n}")
    ssa = np.maximum(np.asarray(ssa, dtype=float), 0.0)
    ssr = np.maximum(np.asarray(ssr, dtype=float), 0.0)
    total = ssa + ssr
    scale = total.max(axis=-1, keepdims=True)
    flat = total <= FLAT_RTOL * scale
    zero_resid = ssr <= DEGENERATE_RTOL * total
    degenerate = zero_resid & ~flat
    safe = np.where(zero_resid, 1.0, ssr)
    f = (n - 1) * ssa / safe
    f = np.where(flat, 0.0, f)
    f = np.where(degenerate, np.inf, f)
    return f, degenerate


def ssa_pointwise(data: FunctionalDataset) -> PointwiseTrace:
    """Between-condition sum of squares at every grid point."""
    ssa, _ = sums_of_squares(data.values)
    return PointwiseTrace(TraceKind.SSA, ssa, data.grid)


def ssr_pointwise(data: FunctionalDataset) -> PointwiseTrace:
    """Residual sum of squares of the subject + condition decomposition."""
    _, ssr = sums_of_squares(data.values)
    return PointwiseTrace(TraceKind.SSR, ssr, data.grid)


def f_pointwise(data: FunctionalDataset) -> PointwiseTrace:
    """Pointwise F ratio; degenerate points are flagged, not raised."""
    ssa, ssr = sums_of_squares(data.values)
    f, degenerate = f_ratio(ssa, ssr, data.n_subjects)
    return PointwiseTrace(TraceKind.F, f, data.grid, degenerate)


def write_traces_csv(path, traces: Sequence[PointwiseTrace]) -> None:
    """Write traces sharing one grid as columns ``t, <kind>...``.

    Degenerate F entries are written as ``inf``.
    """
    if not traces:
        raise ValueError("no traces to write")
    grid = traces[0].grid
    if any(tr.grid != grid for tr in traces):
        raise ValueError("all traces must share one grid")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [tr.kind.value for tr in traces])
        for k, t in enumerate(grid.points):
            w.writerow([repr(float(t))] + [repr(float(tr.values[k])) for tr in traces])
