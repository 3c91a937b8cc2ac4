"""Uniform grid on a circle and periodic helpers.

Positions live on the torus of circumference ``length``, represented by
``num_points`` equispaced nodes ``x_i = i * dx``.  All spatial quadrature
in the package is the periodic left-endpoint rule ``dx * sum(values)``,
which is exact for constants and spectrally accurate for smooth periodic
integrands.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class TorusGrid:
    """Equispaced nodes on the circle of circumference ``length``.

    Attributes
    ----------
    length:
        Circumference of the domain, must be positive.
    num_points:
        Number of grid nodes, must be positive.  Node ``i`` sits at
        ``i * dx`` with ``dx = length / num_points``; node 0 and node
        ``num_points`` would coincide, so the latter is not stored.
    """

    length: float
    num_points: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.length) or self.length <= 0.0:
            raise ValueError(f"domain circumference must be positive, got {self.length}")
        if self.num_points < 1:
            raise ValueError(f"grid needs at least one node, got {self.num_points}")

    @property
    def dx(self) -> float:
        """Node spacing ``length / num_points``."""
        return self.length / self.num_points

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Node positions in ``[0, length)``, shape ``(num_points,)``."""
        x = self.dx * np.arange(self.num_points)
        x.flags.writeable = False
        return x


def wrap_index(i, grid: TorusGrid):
    """Map integer node indices onto ``range(num_points)`` periodically.

    Works on scalars and integer arrays; negative indices wrap around,
    so ``wrap_index(-1, grid) == num_points - 1``.
    """
    return i % grid.num_points


def canonical_position(x, grid: TorusGrid):
    """Fold positions into the fundamental interval ``[0, length)``.

    For a tiny negative input the modulo can round up to ``length``
    itself; such values are mapped back to 0 so the half-open contract
    holds exactly.
    """
    folded = np.mod(x, grid.length)
    return np.where(folded >= grid.length, 0.0, folded)[()]


def periodic_distance(x, y, grid: TorusGrid):
    """Shortest arc length between two positions on the circle.

    Accepts scalars or broadcastable arrays.  The result never exceeds
    ``length / 2``.
    """
    d = np.abs(canonical_position(x, grid) - canonical_position(y, grid))
    return np.minimum(d, grid.length - d)


def signed_displacement(x, center, grid: TorusGrid):
    """Signed periodic displacement ``x - center`` folded into ``[-L/2, L/2)``."""
    half = 0.5 * grid.length
    folded = np.mod(np.asarray(x, dtype=float) - center + half, grid.length)
    return np.where(folded >= grid.length, 0.0, folded)[()] - half


def integrate(values: np.ndarray, grid: TorusGrid) -> float:
    """Periodic left-endpoint quadrature of node values over the circle.

    Args:
        values: samples at the grid nodes, shape ``(num_points,)``.
        grid: the grid the samples live on.

    Returns:
        ``dx * sum(values)`` as a float.
    """
    values = np.asarray(values)
    if values.shape != (grid.num_points,):
        raise ValueError(
            f"expected {grid.num_points} node values, got shape {values.shape}"
        )
    return float(grid.dx * values.sum())
