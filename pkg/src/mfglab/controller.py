"""Best-reply control, the one-step receding-horizon subproblem, and the particle integrator.

Each particle steers along the steepest descent of its instantaneous cost,

    u_i(t) = -(1/alpha(t)) d h_i / d x_i (X(t)),

which is also the closed-form minimizer of the one-step quadratic subproblem

    min_u  dt * ( h_i(X(t+dt)) + dt * (alpha/2) u^2 ),
    x_i(t+dt) = x_i + dt * (f_i(X) + u),

after linearizing h_i about X(t). The "exact" step weighs the control with
alpha(t+dt) as the subproblem states; the "taylor" step uses alpha(t), which
differs by O(dt) and matches the piecewise-constant discretization of the
best-reply law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, NumericalError
from .model import (
    FD_STEP,
    ControlProfile,
    ModelSpec,
    ParticleEnsemble,
    alpha_at,
    cost,
    cost_grad_vector,
    drift,
)

DEFAULT_BLOW_UP_BOUND = 1e6
_PROBE = 1e-4  # offset for the local-minimum check of the exact step


@dataclass
class ParticleTrajectory:
    """Particle states on a time grid; positions[l] is the ensemble at times[l]."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[0] != self.times.size:
            raise ValueError(
                f"positions shape {self.positions.shape} does not match {self.times.size} time points"
            )

    def __len__(self) -> int:
        return self.times.size

    def ensemble(self, step: int) -> ParticleEnsemble:
        return ParticleEnsemble(self.positions[step].copy(), time=float(self.times[step]))

    @property
    def n_particles(self) -> int:
        return self.positions.shape[1]


def brs_control(model: ModelSpec, ensemble: ParticleEnsemble, t: float) -> np.ndarray:
    """Steepest-descent control u_i = -(1/alpha(t)) d h_i / d x_i."""
    return -cost_grad_vector(model, ensemble) / alpha_at(model, t)


def euler_step(positions: np.ndarray, drift_vec: np.ndarray, controls: np.ndarray, dt: float) -> np.ndarray:
    """Shared explicit Euler update; every integrator uses this exact expression."""
    return positions + dt * (drift_vec + controls)


def mpc_step_exact(
    model: ModelSpec,
    ensemble: ParticleEnsemble,
    t: float,
    dt: float,
    verify: bool = True,
) -> tuple[np.ndarray, ParticleEnsemble]:
    """One receding-horizon step with the end-of-step control weight alpha(t+dt).

    The returned control solves the per-particle quadratic subproblem exactly.
    With ``verify`` the minimizer is double-checked by sampling the subproblem
    objective at u +/- 1e-4 against a fresh finite-difference cost slope, which
    catches an inconsistent ``cost_kernel_dx``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    slopes = cost_grad_vector(model, ensemble)
    weight = alpha_at(model, t + dt)
    controls = -slopes / weight
    if verify:
        _verify_step_minimum(model, ensemble, controls, weight, dt)
    return controls, _advance(model, ensemble, controls, t, dt)


def mpc_step_taylor(
    model: ModelSpec,
    ensemble: ParticleEnsemble,
    t: float,
    dt: float,
) -> tuple[np.ndarray, ParticleEnsemble]:
    """One receding-horizon step with the start-of-step weight alpha(t); O(dt) from exact."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    controls = brs_control(model, ensemble, t)
    return controls, _advance(model, ensemble, controls, t, dt)


def _advance(model: ModelSpec, ensemble: ParticleEnsemble, controls: np.ndarray, t: float, dt: float) -> ParticleEnsemble:
    new_positions = euler_step(ensemble.positions, drift(model, ensemble), controls, dt)
    return ParticleEnsemble(new_positions, time=t + dt)


def _verify_step_minimum(
    model: ModelSpec,
    ensemble: ParticleEnsemble,
    controls: np.ndarray,
    weight: float,
    dt: float,
) -> None:
    """Sample the step objective at u +/- _PROBE; both must exceed the value at u."""
    x = ensemble.positions
    n = model.n_particles
    for i in range(n):
        shift = np.zeros(n)
        shift[i] = FD_STEP
        probe_hi = ParticleEnsemble(x + shift, time=ensemble.time)
        probe_lo = ParticleEnsemble(x - shift, time=ensemble.time)
        slope_fd = (cost(model, probe_hi, i) - cost(model, probe_lo, i)) / (2 * FD_STEP)

        def objective(u: float) -> float:
            return dt * (slope_fd * dt * u + dt * 0.5 * weight * u * u)

        here = objective(controls[i])
        if not (objective(controls[i] + _PROBE) > here and objective(controls[i] - _PROBE) > here):
            raise NumericalError(
                f"control for particle {i} is not a local minimum of the step objective; "
                "cost_kernel_dx is likely inconsistent with cost_kernel"
            )


def integrate_brs(
    model: ModelSpec,
    initial: ParticleEnsemble,
    dt: float,
    scheme: str = "taylor",
    blow_up_bound: float = DEFAULT_BLOW_UP_BOUND,
) -> tuple[ParticleTrajectory, ControlProfile]:
    """Run the controlled particle system to the horizon with explicit Euler steps.

    ``scheme`` picks the control weight: "taylor" uses alpha(t_l) (the
    piecewise-constant best-reply discretization), "exact" uses alpha(t_l + dt).
    Raises ``DivergenceError`` as soon as any |x_i| exceeds ``blow_up_bound``.
    """
    if scheme not in ("taylor", "exact"):
        raise ValueError(f"unknown scheme {scheme!r}, expected 'taylor' or 'exact'")
    n_steps, times = time_grid(model.horizon, dt)
    n = model.n_particles
    positions = np.empty((n_steps + 1, n))
    controls = np.empty((n, n_steps))
    state = initial
    positions[0] = state.positions
    for step in range(n_steps):
        t = float(times[step])
        if scheme == "taylor":
            u, state = mpc_step_taylor(model, state, t, dt)
        else:
            u, state = mpc_step_exact(model, state, t, dt)
        controls[:, step] = u
        positions[step + 1] = state.positions
        worst = float(np.max(np.abs(state.positions)))
        if not worst <= blow_up_bound:
            raise DivergenceError(
                f"|x| reached {worst:.3e} > bound {blow_up_bound:.3e} at step {step + 1} (t={t + dt:.6g})"
            )
    return ParticleTrajectory(times, positions), ControlProfile(controls, times)


def time_grid(horizon: float, dt: float) -> tuple[int, np.ndarray]:
    """Uniform grid t_l = l*dt reaching the horizon; dt must divide it to 1e-12."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n_steps = int(round(horizon / dt))
    if n_steps < 1 or abs(n_steps * dt - horizon) > 1e-12 * max(1.0, horizon):
        raise ValueError(f"dt={dt} does not divide the horizon {horizon}")
    return n_steps, dt * np.arange(n_steps + 1)
