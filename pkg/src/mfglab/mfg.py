"""Coupled mean-field game system and its receding-horizon closure.

The value function v(t, x) and the agent density m(t, x) solve

    d/dt v + F(x, m) d/dx v - (1/(2 alpha)) (d/dx v)^2 = -H(x, m),   v(T, .) = 0,
    d/dt m + d/dx ( (F(x, m) - (1/alpha) d/dx v) m ) = 0,            m(0, .) = m0,

a backward Hamilton-Jacobi equation coupled to a forward continuity equation.
Discretization: v lives at cell centers, m as cell averages. The transport
term F d/dx v is upwinded against the sign of F in backward time; the
quadratic Hamiltonian uses a monotone local Lax-Friedrichs form with slice
viscosity max|d/dx v| / alpha. The forward equation reuses the conservative
upwind machinery with face velocity F - (1/alpha) * (two-point difference of v).

The coupled system is solved by damped Picard iteration on the density path.
The receding-horizon closure replaces v on each step by the instantaneous
mean-field cost, which collapses the system to the best-reply transport
equation; discretely the two marches coincide bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .controller import time_grid
from .errors import CFLError, NumericalError
from .grids import DensityGrid, DensityTrajectory, SpaceGrid
from .kinetic import CFL_NUMBER, solve_kinetic, step_upwind, velocity_field
from .model import ModelSpec, alpha_at, mean_field_cost, mean_field_cost_grad, mean_field_drift


@dataclass
class ValueGrid:
    """Nodal values v(t_l, x_k) at cell centers; the terminal slice vanishes."""

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
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite value entry")
        if np.any(self.data[-1] != 0.0):
            raise ValueError("terminal value slice must vanish")


@dataclass(frozen=True)
class PicardParams:
    max_iterations: int = 200
    tolerance: float = 1e-8
    damping: float = 0.5

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class MFGResult:
    value: ValueGrid
    densities: DensityTrajectory
    residual: float
    converged: bool
    iterations: int
    residual_history: np.ndarray


def _one_sided_slopes(values: np.ndarray, dx: float) -> tuple[np.ndarray, np.ndarray]:
    """Backward and forward difference quotients with zero-slope extension at the ends."""
    p_minus = np.zeros_like(values)
    p_plus = np.zeros_like(values)
    p_minus[1:] = (values[1:] - values[:-1]) / dx
    p_plus[:-1] = (values[1:] - values[:-1]) / dx
    return p_minus, p_plus


def hjb_backward(model: ModelSpec, m_path: DensityTrajectory) -> ValueGrid:
    """Backward march of the value equation along a given density path.

    Explicit step from t_{l+1} to t_l, everything evaluated at the later slice:

        v_l = v_{l+1} + dt * ( F . Dv - LLF((d/dx v)^2 / (2 alpha)) + H ).

    The CFL restriction dt (max|F| + viscosity)/dx <= 0.9 is enforced per step.
    """
    times = m_path.times
    dt = _uniform_dt(times)
    grid = m_path.grid
    centers = grid.centers()
    n_slices = times.size
    data = np.zeros((n_slices, grid.cells))
    for step in range(n_slices - 2, -1, -1):
        t_next = float(times[step + 1])
        weight = alpha_at(model, t_next)
        m_next = m_path.density(step + 1)
        f = np.asarray(mean_field_drift(model, centers, m_next))
        source = np.asarray(mean_field_cost(model, centers, m_next))
        v_next = data[step + 1]
        p_minus, p_plus = _one_sided_slopes(v_next, grid.dx)
        viscosity = max(np.max(np.abs(p_minus)), np.max(np.abs(p_plus))) / weight
        speed = np.max(np.abs(f)) + viscosity
        if dt * speed / grid.dx > CFL_NUMBER + 1e-12:
            raise CFLError(
                f"value march: dt*(|F|+viscosity)/dx = {dt * speed / grid.dx:.4f} > {CFL_NUMBER} "
                f"at step {step}",
                step=step,
            )
        transport_slope = np.where(f >= 0.0, p_plus, p_minus)
        p_avg = 0.5 * (p_minus + p_plus)
        hamiltonian = p_avg * p_avg / (2.0 * weight) - 0.5 * viscosity * (p_plus - p_minus)
        data[step] = v_next + dt * (f * transport_slope - hamiltonian + source)
        if not np.all(np.isfinite(data[step])):
            raise NumericalError(f"non-finite value slice at step {step}")
    return ValueGrid(grid, times.copy(), data)


def fp_forward(model: ModelSpec, value: ValueGrid, m0: DensityGrid) -> DensityTrajectory:
    """Forward continuity march with face velocity F(x, m) - (1/alpha) d/dx v."""
    if m0.grid != value.grid:
        raise ValueError("density and value must share the grid")
    times = value.times
    dt = _uniform_dt(times)
    grid = value.grid
    faces = grid.faces()
    data = np.empty((times.size, grid.cells))
    data[0] = m0.cell_averages
    current = m0
    for step in range(times.size - 1):
        weight = alpha_at(model, float(times[step]))
        drift_faces = np.asarray(mean_field_drift(model, faces, current))
        v_slice = value.data[step]
        dv = np.zeros(grid.cells + 1)
        dv[1:-1] = (v_slice[1:] - v_slice[:-1]) / grid.dx
        velocity = drift_faces - dv / weight
        try:
            current = step_upwind(current, velocity, dt)
        except CFLError as err:
            raise CFLError(f"density march, step {step}: {err}", step=step, face=err.face) from None
        data[step + 1] = current.cell_averages
    return DensityTrajectory(grid, times.copy(), data)


def mfg_fixed_point(
    model: ModelSpec,
    m0: DensityGrid,
    dt: float,
    params: PicardParams = PicardParams(),
) -> MFGResult:
    """Damped Picard iteration on the density path of the coupled system.

    Starts from the transport of m0 by F alone, then alternates a backward
    value solve and a forward density solve, mixing density paths slice-wise
    with the damping factor and renormalizing each slice. The residual is the
    largest L1 distance between successive paths at any time slice.
    Non-convergence is reported through the flag, never raised.
    """
    n_steps, times = time_grid(model.horizon, dt)
    grid = m0.grid
    zero_value = ValueGrid(grid, times, np.zeros((n_steps + 1, grid.cells)))
    current = fp_forward(model, zero_value, m0)
    theta = params.damping
    history: list[float] = []
    converged = False
    iterations = 0
    while iterations < params.max_iterations:
        iterations += 1
        value = hjb_backward(model, current)
        proposal = fp_forward(model, value, m0)
        mixed = (1.0 - theta) * current.data + theta * proposal.data
        masses = np.sum(mixed, axis=1) * grid.dx
        mixed = mixed / masses[:, None]
        residual = float(np.max(np.sum(np.abs(mixed - current.data), axis=1) * grid.dx))
        history.append(residual)
        current = DensityTrajectory(grid, times.copy(), mixed)
        if residual <= params.tolerance:
            converged = True
            break
    value = hjb_backward(model, current)
    return MFGResult(
        value=value,
        densities=current,
        residual=residual,
        converged=converged,
        iterations=iterations,
        residual_history=np.asarray(history),
    )


def mpc_mfg_closure(model: ModelSpec, m0: DensityGrid, dt: float) -> DensityTrajectory:
    """Receding-horizon closure of the game system.

    On each step the freshly re-started backward value equation is replaced by
    its first-order short-horizon limit, the instantaneous mean-field cost, so
    the density advances with velocity F - (1/alpha) dH/dx. That is exactly the
    best-reply transport march: the output matches ``solve_kinetic`` bitwise.
    """
    return solve_kinetic(model, m0, dt)


def proposition2_gap(
    model: ModelSpec,
    m0: DensityGrid,
    dt: float,
    params: PicardParams = PicardParams(),
) -> float:
    """Distance between the one-window game value and its short-horizon surrogate.

    Solves the full coupled system on the single window [0, dt] with terminal
    value zero and returns sup_x | v(0, x)/dt - H(x, m0) |. The value is
    normalized per unit of window time, the scale on which the short-horizon
    expansion v(0, .) ~ dt * H(., m0) lives; the gap is O(dt) down to the
    spatial discretization floor.
    """
    window_model = replace(model, horizon=dt)
    vmax = float(np.max(np.abs(velocity_field(model, m0, 0.0))))
    n_sub = max(2, math.ceil(dt * vmax / (0.45 * m0.grid.dx))) if vmax > 0 else 2
    result = mfg_fixed_point(window_model, m0, dt / n_sub, params)
    if not result.converged:
        raise NumericalError(
            f"coupled solve on the window [0, {dt}] did not converge "
            f"(residual {result.residual:.3e} after {result.iterations} iterations)"
        )
    surrogate = np.asarray(mean_field_cost(model, m0.grid.centers(), m0))
    return float(np.max(np.abs(result.value.data[0] / dt - surrogate)))


# ---------------------------------------------------------------------------
# feedback-control diagnostics


def feedback_controls_from_value(model: ModelSpec, value: ValueGrid) -> np.ndarray:
    """Game feedback u = -(1/alpha) d/dx v at the nodes (central differences)."""
    dx = value.grid.dx
    slopes = np.gradient(value.data, dx, axis=1)
    weights = np.array([alpha_at(model, float(t)) for t in value.times])
    return -slopes / weights[:, None]


def feedback_controls_best_reply(model: ModelSpec, m_path: DensityTrajectory) -> np.ndarray:
    """Myopic feedback u = -(1/alpha) dH/dx (x, m(t)) at the nodes."""
    centers = m_path.grid.centers()
    out = np.empty_like(m_path.data)
    for step, t in enumerate(m_path.times):
        slope = np.asarray(mean_field_cost_grad(model, centers, m_path.density(step)))
        out[step] = -slope / alpha_at(model, float(t))
    return out


def total_running_cost(model: ModelSpec, m_path: DensityTrajectory, controls: np.ndarray) -> float:
    """Population cost integral of (alpha/2) u^2 + H(x, m) against m dx dt (left rule)."""
    controls = np.asarray(controls, dtype=float)
    if controls.shape != m_path.data.shape:
        raise ValueError("controls must be given at every (time, cell) node")
    dt = _uniform_dt(m_path.times)
    centers = m_path.grid.centers()
    total = 0.0
    for step in range(m_path.times.size - 1):
        weight = alpha_at(model, float(m_path.times[step]))
        m_slice = m_path.density(step)
        running = 0.5 * weight * controls[step] ** 2 + np.asarray(mean_field_cost(model, centers, m_slice))
        total += dt * float(np.sum(running * m_slice.cell_averages) * m_path.grid.dx)
    return total


def _uniform_dt(times: np.ndarray) -> float:
    steps = np.diff(times)
    if steps.size == 0:
        raise ValueError("need at least two time points")
    if np.max(np.abs(steps - steps[0])) > 1e-12:
        raise ValueError("time grid is not uniform")
    return float(steps[0])
