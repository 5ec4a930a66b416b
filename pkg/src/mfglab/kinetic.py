"""First-order finite-volume solver for the nonlocal best-reply transport equation.

The particle system under the best-reply control has the mean-field limit

    d/dt m + d/dx ( m * c(x, m, t) ) = 0,
    c(x, m, t) = F(x, m) - (1/alpha(t)) dH/dx (x, m),

a 1D conservation law with a velocity that is recomputed from the current
density every step. The scheme is conservative upwind with zero-flux
boundaries on a truncated domain:

    m_k <- m_k - (dt/dx) (G_{k+1/2} - G_{k-1/2}),
    G = c * m_upwind,   G = 0 at the two boundary faces.

Under the CFL restriction dt * max|c| / dx <= 0.9 the update is monotone and
positivity preserving; total mass is conserved exactly by telescoping.
"""

from __future__ import annotations

import math

import numpy as np

from .controller import time_grid
from .errors import CFLError
from .grids import DensityGrid, DensityTrajectory, SpaceGrid, grid_for_support, histogram, normalized_density
from .model import ModelSpec, alpha_at, mean_field_cost_grad, mean_field_drift

__all__ = [
    "SpaceGrid",
    "DensityGrid",
    "DensityTrajectory",
    "grid_for_support",
    "histogram",
    "normalized_density",
    "velocity_field",
    "step_upwind",
    "solve_kinetic",
    "cfl_time_step",
    "CFL_NUMBER",
]

CFL_NUMBER = 0.9


def velocity_field(model: ModelSpec, m: DensityGrid, t: float) -> np.ndarray:
    """Face velocities c = F(x, m) - (1/alpha(t)) dH/dx (x, m) at the M+1 cell faces."""
    faces = m.grid.faces()
    drift_part = mean_field_drift(model, faces, m)
    slope_part = mean_field_cost_grad(model, faces, m)
    return drift_part - slope_part / alpha_at(model, t)


def step_upwind(m: DensityGrid, face_velocity: np.ndarray, dt: float) -> DensityGrid:
    """One conservative upwind step with zero-flux boundary faces.

    Under the face-wise CFL restriction the update is positivity preserving for
    velocity fields whose sign changes are resolved by the grid (any field
    sampled from a continuous velocity, in particular ``velocity_field``
    output). A genuinely negative result raises through ``DensityGrid``.
    """
    grid = m.grid
    face_velocity = np.asarray(face_velocity, dtype=float)
    if face_velocity.shape != (grid.cells + 1,):
        raise ValueError(f"expected {grid.cells + 1} face velocities, got {face_velocity.shape}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    courant = dt * np.abs(face_velocity) / grid.dx
    worst = int(np.argmax(courant))
    if courant[worst] > CFL_NUMBER + 1e-12:
        raise CFLError(
            f"CFL violated: dt*|c|/dx = {courant[worst]:.4f} > {CFL_NUMBER} at face {worst} "
            f"(x = {grid.faces()[worst]:.6g})",
            face=worst,
        )
    values = m.cell_averages
    flux = np.zeros(grid.cells + 1)
    inner = face_velocity[1:-1]
    upwind = np.where(inner > 0.0, values[:-1], values[1:])
    flux[1:-1] = inner * upwind
    new_values = values - (dt / grid.dx) * (flux[1:] - flux[:-1])
    return DensityGrid(grid, new_values)


def solve_kinetic(model: ModelSpec, m0: DensityGrid, dt: float) -> DensityTrajectory:
    """March the best-reply transport equation to the model horizon.

    The velocity is rebuilt from the current density before every step and the
    CFL restriction is re-checked; a violation raises ``CFLError`` carrying the
    step index so the caller can halve dt and retry.
    """
    n_steps, times = time_grid(model.horizon, dt)
    data = np.empty((n_steps + 1, m0.grid.cells))
    data[0] = m0.cell_averages
    current = m0
    for step in range(n_steps):
        faces = velocity_field(model, current, float(times[step]))
        try:
            current = step_upwind(current, faces, dt)
        except CFLError as err:
            raise CFLError(f"step {step}: {err}", step=step, face=err.face) from None
        data[step + 1] = current.cell_averages
    return DensityTrajectory(m0.grid, times, data)


def cfl_time_step(model: ModelSpec, m0: DensityGrid, horizon: float, safety: float = 0.85) -> float:
    """Largest dt dividing the horizon with initial Courant number <= safety.

    The per-step check in the solvers still guards against velocity growth
    along the run.
    """
    faces = velocity_field(model, m0, 0.0)
    vmax = float(np.max(np.abs(faces)))
    if vmax == 0.0:
        return horizon
    n_steps = max(1, math.ceil(horizon * vmax / (safety * m0.grid.dx)))
    return horizon / n_steps
