"""Spatial grids and cell-averaged densities for the 1D transport solvers.

A ``SpaceGrid`` covers ``[x_min, x_max]`` with ``cells`` uniform cells.
Densities are stored as cell averages, so a probability density satisfies
``sum(cell_averages) * dx == 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MASS_TOL = 1e-12
NEGATIVE_TOL = 1e-15


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform 1D grid: cell k covers [x_min + k*dx, x_min + (k+1)*dx)."""

    x_min: float
    x_max: float
    cells: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"empty domain: x_min={self.x_min} >= x_max={self.x_max}")
        if self.cells < 8:
            raise ValueError(f"grid needs at least 8 cells, got {self.cells}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.cells

    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.cells) + 0.5) * self.dx

    def faces(self) -> np.ndarray:
        return self.x_min + np.arange(self.cells + 1) * self.dx


def grid_for_support(lo: float, hi: float, cells: int) -> SpaceGrid:
    """Grid covering [lo, hi] plus a margin of 25% of the support width (12.5% per side)."""
    width = hi - lo
    if width <= 0:
        raise ValueError(f"empty support [{lo}, {hi}]")
    return SpaceGrid(lo - 0.125 * width, hi + 0.125 * width, cells)


@dataclass
class DensityGrid:
    """Cell-averaged probability density on a SpaceGrid.

    Tiny negative averages (round-off from conservative updates) are clipped to
    zero on construction; the removed mass is kept in ``clipped_mass``.
    """

    grid: SpaceGrid
    cell_averages: np.ndarray
    clipped_mass: float = field(default=0.0, compare=False)

    def __post_init__(self):
        values = np.asarray(self.cell_averages, dtype=float)
        if values.shape != (self.grid.cells,):
            raise ValueError(f"expected {self.grid.cells} cell averages, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite cell average")
        worst = values.min() if values.size else 0.0
        if worst < -NEGATIVE_TOL:
            raise ValueError(f"negative cell average {worst:.3e} below round-off tolerance")
        if worst < 0.0:
            self.clipped_mass = float(-np.sum(values[values < 0.0]) * self.grid.dx)
            values = values.clip(min=0.0)
        mass = float(np.sum(values) * self.grid.dx)
        if abs(mass - 1.0) > MASS_TOL:
            raise ValueError(f"density mass {mass!r} deviates from 1 by more than {MASS_TOL}")
        self.cell_averages = values

    @property
    def mass(self) -> float:
        return float(np.sum(self.cell_averages) * self.grid.dx)


def normalized_density(grid: SpaceGrid, values: np.ndarray) -> DensityGrid:
    """Rescale nonnegative cell values to unit mass."""
    values = np.asarray(values, dtype=float)
    mass = np.sum(values) * grid.dx
    if not mass > 0.0:
        raise ValueError("cannot normalize a density with nonpositive mass")
    return DensityGrid(grid, values / mass)


def histogram(positions: np.ndarray, grid: SpaceGrid) -> DensityGrid:
    """Project particle positions to a DensityGrid, mass 1/N per particle into its cell."""
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 1 or positions.size == 0:
        raise ValueError("positions must be a nonempty 1D array")
    if positions.min() < grid.x_min or positions.max() > grid.x_max:
        raise ValueError("particle outside the grid domain")
    idx = np.floor((positions - grid.x_min) / grid.dx).astype(int)
    idx = idx.clip(0, grid.cells - 1)  # x == x_max lands in the last cell
    counts = np.bincount(idx, minlength=grid.cells).astype(float)
    return DensityGrid(grid, counts / (positions.size * grid.dx))


@dataclass
class DensityTrajectory:
    """Density snapshots m(t_l, .) on a shared grid; data row l is the slice at times[l]."""

    grid: SpaceGrid
    times: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.times.size, self.grid.cells):
            raise ValueError(
                f"data shape {self.data.shape} does not match {self.times.size} times x {self.grid.cells} cells"
            )

    def __len__(self) -> int:
        return self.times.size

    def density(self, step: int) -> DensityGrid:
        return DensityGrid(self.grid, self.data[step].copy())

    @property
    def final(self) -> DensityGrid:
        return self.density(len(self) - 1)
