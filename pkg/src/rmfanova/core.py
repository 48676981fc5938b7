"""
Functional repeated-measures data model.

A dataset holds ``n`` subjects observed under ``ell`` conditions, each
observation being a curve recorded on a grid shared by all cells.  Curves are
stored as an ``(n, ell, p)`` array; every condition's interval is normalized
to ``[0, 1]`` so that statistics only ever align the same intra-condition
location across conditions.

Condition and subject numbers in the public API are 1-based, matching the
usual way conditions are reported ("1 vs. 2").
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Design points of one condition, expressed on ``[0, 1]``."""

    points: np.ndarray
    domain_length: float = 1.0

    def __post_init__(self):
        pts = _frozen(np.ravel(self.points))
        if pts.size < 2:
            raise ValueError(f"a grid needs at least 2 points, got {pts.size}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise ValueError("grid points must lie in [0, 1]; use Grid.from_physical to rescale")
        if self.domain_length != 1.0:
            raise ValueError("domain_length is fixed to 1")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return int(self.points.size)

    @classmethod
    def equispaced(cls, p: int, closed: bool = True) -> "Grid":
        """``p`` equispaced points; ``closed=False`` keeps them strictly inside (0, 1)."""
        if p < 2:
            raise ValueError(f"a grid needs at least 2 points, got {p}")
        if closed:
            return cls(np.linspace(0.0, 1.0, p))
        return cls(np.arange(1, p + 1) / (p + 1.0))

    @classmethod
    def from_physical(cls, x: Sequence[float]) -> "Grid":
        """Map physical abscissae affinely onto ``[0, 1]`` (first point to 0, last to 1)."""
        x = np.asarray(x, dtype=float)
        if x.size < 2:
            raise ValueError(f"a grid needs at least 2 points, got {x.size}")
        span = x[-1] - x[0]
        if not span > 0:
            raise ValueError("grid points must be strictly increasing")
        t = (x - x[0]) / span
        t[-1] = 1.0
        return cls(t)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(np.all(self.points == other.points))

    def __hash__(self):
        return hash(self.points.tobytes())


@dataclass(frozen=True)
class FunctionalDataset:
    """Curves of ``n`` subjects under ``ell`` conditions on a shared grid.

    Parameters
    ----------
    values : array_like, shape (n, ell, p)
        ``values[j, i, k]`` is subject ``j``'s curve under condition ``i`` at
        grid point ``k`` (all 0-based as array indices).
    grid : Grid, optional
        Defaults to ``p`` equispaced points on ``[0, 1]``.
    subject_labels, condition_labels : sequence of str, optional
        Names carried through to reports; default to ``"1"``, ``"2"``, ...
    """

    values: np.ndarray
    grid: Optional[Grid] = None
    subject_labels: Optional[tuple] = None
    condition_labels: Optional[tuple] = None

    def __post_init__(self):
        y = _frozen(self.values)
        if y.ndim != 3:
            raise ValueError(f"values must have shape (n, ell, p), got {y.shape}")
        n, ell, p = y.shape
        if n < 1:
            raise ValueError("dataset needs at least one subject")
        if ell < 2:
            raise ValueError(f"at least 2 conditions are required, got {ell}")
        if not np.all(np.isfinite(y)):
            raise ValueError("all values must be finite")
        grid = self.grid if self.grid is not None else Grid.equispaced(p)
        if grid.size != p:
            raise ValueError(f"grid has {grid.size} points but curves have {p}")
        subj = tuple(str(s) for s in self.subject_labels) if self.subject_labels is not None \
            else tuple(str(j + 1) for j in range(n))
        cond = tuple(str(c) for c in self.condition_labels) if self.condition_labels is not None \
            else tuple(str(i + 1) for i in range(ell))
        if len(subj) != n or len(cond) != ell:
            raise ValueError("label counts must match the number of subjects and conditions")
        object.__setattr__(self, "values", y)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "subject_labels", subj)
        object.__setattr__(self, "condition_labels", cond)

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]

    @property
    def n_conditions(self) -> int:
        return self.values.shape[1]

    @property
    def n_points(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def replace_values(self, values: np.ndarray) -> "FunctionalDataset":
        """Same grid and labels, new curves (same ``ell`` and ``p``)."""
        values = np.asarray(values, dtype=float)
        subj = self.subject_labels if values.shape[0] == self.n_subjects else None
        return FunctionalDataset(values, self.grid, subj, self.condition_labels)

    def __eq__(self, other):
        if not isinstance(other, FunctionalDataset):
            return NotImplemented
        return (self.values.shape == other.values.shape
                and bool(np.all(self.values == other.values))
                and self.grid == other.grid
                and self.subject_labels == other.subject_labels
                and self.condition_labels == other.condition_labels)

    __hash__ = None


def _check_index(i: int, upper: int, what: str) -> int:
    if isinstance(i, (bool, np.bool_)) or not isinstance(i, (int, np.integer)):
        raise ValueError(f"{what} number must be an integer, got {i!r}")
    if not 1 <= i <= upper:
        raise ValueError(f"{what} number {i} out of range 1..{upper}")
    return int(i) - 1


def condition_mean(data: FunctionalDataset, i: int) -> np.ndarray:
    """Average curve of condition ``i`` (1-based) over subjects."""
    k = _check_index(i, data.n_conditions, "condition")
    return data.values[:, k, :].mean(axis=0)


def subject_mean(data: FunctionalDataset, j: int) -> np.ndarray:
    """Average curve of subject ``j`` (1-based) over conditions."""
    k = _check_index(j, data.n_subjects, "subject")
    return data.values[k].mean(axis=0)


def grand_mean(data: FunctionalDataset) -> np.ndarray:
    """Pointwise average over all ``n * ell`` cells."""
    # subject-major accumulation: condition means first, then their average
    return data.values.mean(axis=0).mean(axis=0)


def pooled_subject_mean(data: FunctionalDataset) -> np.ndarray:
    """Mean over subjects of the concatenated curve, returned as ``(ell, p)`` blocks."""
    return data.values.mean(axis=0)
