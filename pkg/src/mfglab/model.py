"""Game instances: pairwise drift/cost kernels and their particle and mean-field evaluations.

The interacting system couples N scalar states through a drift kernel P and a
pairwise cost kernel phi:

    f_i(X) = (1/N)   sum_j      P(x_i, x_j) (x_j - x_i)
    h_i(X) = (1/(N-1)) sum_{j != i} phi(x_i, x_j)

Mean-field counterparts replace the sums by integrals against a density m:

    F(x, m)      = integral P(x, y) (y - x) m(y) dy
    dH/dx (x, m) = integral d_x phi(x, y) m(y) dy

All sums and quadratures run in ascending index order so outputs are
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .grids import DensityGrid

Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]

FD_STEP = 1e-6  # central-difference step for kernels without analytic derivatives


@dataclass(frozen=True)
class ModelSpec:
    """One game instance: kernels, control weight, particle count and horizon.

    Kernels must accept numpy arrays and evaluate elementwise; the result may
    have any shape broadcastable to the inputs' common shape (constants may
    return a scalar). The optional ``*_dx`` / ``*_dy`` derivatives are used
    where available; missing ones fall back to central differences with step
    ``FD_STEP``.
    """

    drift_kernel: Kernel
    cost_kernel: Kernel
    cost_kernel_dx: Kernel
    alpha: Callable[[float], float]
    n_particles: int
    horizon: float
    drift_kernel_dx: Kernel | None = None
    drift_kernel_dy: Kernel | None = None
    cost_kernel_dy: Kernel | None = None

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError(f"n_particles must be positive, got {self.n_particles}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")


@dataclass
class ParticleEnsemble:
    """Positions of the N particles at one time instant."""

    positions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 1:
            raise ValueError("positions must be a 1D array")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("non-finite particle position")
        if self.time < 0:
            raise ValueError(f"time must be nonnegative, got {self.time}")

    @property
    def n(self) -> int:
        return self.positions.size


@dataclass
class ControlProfile:
    """Piecewise-constant controls: values[i, l] acts on [time_grid[l], time_grid[l+1])."""

    values: np.ndarray
    time_grid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.time_grid = np.asarray(self.time_grid, dtype=float)
        if self.time_grid.ndim != 1 or self.time_grid.size < 2:
            raise ValueError("time grid needs at least two points")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite control value")
        if not np.all(np.diff(self.time_grid) > 0):
            raise ValueError("time grid must be strictly increasing")
        if abs(self.time_grid[0]) > 1e-12:
            raise ValueError(f"time grid must start at 0, got {self.time_grid[0]}")
        n_steps = self.time_grid.size - 1
        if self.values.ndim != 2 or self.values.shape[1] != n_steps:
            raise ValueError(f"values must have shape (N, {n_steps}), got {self.values.shape}")

    @property
    def n_steps(self) -> int:
        return self.time_grid.size - 1

    @property
    def dt(self) -> float:
        steps = np.diff(self.time_grid)
        if np.max(np.abs(steps - steps[0])) > 1e-12:
            raise ValueError("time grid is not uniform")
        return float(steps[0])


def alpha_at(model: ModelSpec, t: float) -> float:
    """Evaluate the control weight, insisting on positivity."""
    a = float(model.alpha(t))
    if not a > 0.0:
        raise ConfigError(f"control weight alpha({t}) = {a} must be strictly positive")
    return a


def _require_ensemble(model: ModelSpec, ensemble: ParticleEnsemble) -> np.ndarray:
    if ensemble.n != model.n_particles:
        raise ValueError(f"ensemble has {ensemble.n} particles, model expects {model.n_particles}")
    if not np.all(np.isfinite(ensemble.positions)):
        raise ValueError("non-finite particle position")
    return ensemble.positions


def _sum_ascending(values: np.ndarray, axis: int = -1, consume: bool = False) -> np.ndarray:
    """Strictly left-to-right summation (np.sum is pairwise, which reorders).

    With ``consume`` the accumulation overwrites ``values``; only pass arrays
    owned by the caller.
    """
    out = values if consume else None
    return np.take(np.add.accumulate(values, axis=axis, out=out), -1, axis=axis)


def _pair_eval(kernel: Kernel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate kernel on the full (len(x), len(y)) mesh."""
    shape = (x.size, y.size)
    xg = np.broadcast_to(x[:, None], shape)
    yg = np.broadcast_to(y[None, :], shape)
    return np.asarray(kernel(xg, yg), dtype=float)


def _kernel_dx(kernel: Kernel, analytic: Kernel | None) -> Kernel:
    if analytic is not None:
        return analytic
    return lambda x, y: (kernel(x + FD_STEP, y) - kernel(x - FD_STEP, y)) / (2 * FD_STEP)


def _kernel_dy(kernel: Kernel, analytic: Kernel | None) -> Kernel:
    if analytic is not None:
        return analytic
    return lambda x, y: (kernel(x, y + FD_STEP) - kernel(x, y - FD_STEP)) / (2 * FD_STEP)


# ---------------------------------------------------------------------------
# particle-level evaluations


def drift(model: ModelSpec, ensemble: ParticleEnsemble) -> np.ndarray:
    """Interaction drift f_i(X) = (1/N) sum_j P(x_i, x_j)(x_j - x_i), ascending j."""
    x = _require_ensemble(model, ensemble)
    diff = x[None, :] - x[:, None]
    terms = np.multiply(_pair_eval(model.drift_kernel, x, x), diff, out=diff)
    return _sum_ascending(terms, axis=1, consume=True) / model.n_particles


def cost(model: ModelSpec, ensemble: ParticleEnsemble, i: int) -> float:
    """Running cost h_i(X) = (1/(N-1)) sum_{j != i} phi(x_i, x_j)."""
    x = _require_ensemble(model, ensemble)
    _check_index(model, i)
    others = np.delete(x, i)
    vals = _row_eval(model.cost_kernel, np.full(others.size, x[i]), others)
    return float(_sum_ascending(vals)) / (model.n_particles - 1)


def cost_grad(model: ModelSpec, ensemble: ParticleEnsemble, i: int) -> float:
    """Own-state cost slope d h_i / d x_i = (1/(N-1)) sum_{j != i} d_x phi(x_i, x_j)."""
    x = _require_ensemble(model, ensemble)
    _check_index(model, i)
    others = np.delete(x, i)
    vals = _row_eval(model.cost_kernel_dx, np.full(others.size, x[i]), others)
    return float(_sum_ascending(vals)) / (model.n_particles - 1)


def _row_eval(kernel: Kernel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Elementwise kernel values as a 1D array, stretching scalar results."""
    vals = np.asarray(kernel(x, y), dtype=float)
    if vals.shape != y.shape:
        vals = np.broadcast_to(vals, y.shape)
    return vals


def _check_index(model: ModelSpec, i: int) -> None:
    if model.n_particles < 2:
        raise ValueError("pairwise cost needs at least two particles")
    if not 0 <= i < model.n_particles:
        raise ValueError(f"particle index {i} out of range [0, {model.n_particles})")


def cost_grad_vector(model: ModelSpec, ensemble: ParticleEnsemble) -> np.ndarray:
    """All own-state cost slopes (d h_i / d x_i)_i in one pass.

    Matches ``cost_grad`` per component: the excluded diagonal enters the
    ascending sum as an exact 0.0, which leaves every partial sum unchanged.
    """
    x = _require_ensemble(model, ensemble)
    if model.n_particles < 2:
        raise ValueError("pairwise cost needs at least two particles")
    n = model.n_particles
    mat = _pair_eval(model.cost_kernel_dx, x, x)
    if mat.shape != (n, n):
        mat = np.broadcast_to(mat, (n, n))
    if mat.base is not None or not mat.flags.writeable:
        mat = mat.copy()
    np.fill_diagonal(mat, 0.0)
    return _sum_ascending(mat, axis=1, consume=True) / (n - 1)


def cost_gradient_full(model: ModelSpec, ensemble: ParticleEnsemble, i: int) -> np.ndarray:
    """All cost sensitivities d h_i / d x_j; the adjoint source vector for particle i."""
    x = _require_ensemble(model, ensemble)
    _check_index(model, i)
    dphi_dy = _kernel_dy(model.cost_kernel, model.cost_kernel_dy)
    out = _row_eval(dphi_dy, np.full(x.size, x[i]), x) / (model.n_particles - 1)
    out[i] = cost_grad(model, ensemble, i)
    return out


def drift_jacobian(model: ModelSpec, ensemble: ParticleEnsemble) -> np.ndarray:
    """Jacobian J[k, j] = d f_k / d x_j of the interaction drift."""
    x = _require_ensemble(model, ensemble)
    n = model.n_particles
    diff = x[None, :] - x[:, None]
    p = _pair_eval(model.drift_kernel, x, x)
    dp_dx = _pair_eval(_kernel_dx(model.drift_kernel, model.drift_kernel_dx), x, x)
    dp_dy = _pair_eval(_kernel_dy(model.drift_kernel, model.drift_kernel_dy), x, x)
    jac = (dp_dy * diff + p) / n
    own = dp_dx * diff - p  # j-sum terms of d f_k / d x_k, the j = k entry vanishes
    np.fill_diagonal(own, 0.0)
    np.fill_diagonal(jac, _sum_ascending(own, axis=1) / n)
    return jac


# ---------------------------------------------------------------------------
# mean-field evaluations (midpoint quadrature on the grid cells)


def _quadrature(kernel: Kernel, x, m: DensityGrid, weight_shift: bool) -> np.ndarray | float:
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    centers = m.grid.centers()
    vals = _pair_eval(kernel, xs, centers)
    if weight_shift:
        vals = vals * (centers[None, :] - xs[:, None])
    vals = np.broadcast_to(vals, (xs.size, centers.size))
    integrand = vals * (m.cell_averages[None, :] * m.grid.dx)
    out = _sum_ascending(integrand, axis=1, consume=True)
    return out if np.ndim(x) else float(out[0])


def mean_field_drift(model: ModelSpec, x, m: DensityGrid) -> np.ndarray | float:
    """F(x, m) = integral P(x, y)(y - x) m(y) dy, midpoint rule in ascending cell order."""
    return _quadrature(model.drift_kernel, x, m, weight_shift=True)


def mean_field_cost_grad(model: ModelSpec, x, m: DensityGrid) -> np.ndarray | float:
    """d/dx of the mean-field cost: integral d_x phi(x, y) m(y) dy."""
    return _quadrature(model.cost_kernel_dx, x, m, weight_shift=False)


def mean_field_cost(model: ModelSpec, x, m: DensityGrid) -> np.ndarray | float:
    """Mean-field running cost H(x, m) = integral phi(x, y) m(y) dy."""
    return _quadrature(model.cost_kernel, x, m, weight_shift=False)


# ---------------------------------------------------------------------------
# built-in model catalogue


def _ones(x, y):
    # 0-d result; numpy broadcasting stretches it wherever the kernel is used
    return np.float64(1.0)


def _zeros(x, y):
    return np.float64(0.0)


def consensus_model(n_particles: int, horizon: float, alpha: Callable[[float], float] | float = 1.0) -> ModelSpec:
    """All-to-all attraction: P == 1, phi(x, y) = (x - y)^2 / 2."""
    return ModelSpec(
        drift_kernel=_ones,
        cost_kernel=lambda x, y: 0.5 * (x - y) ** 2,
        cost_kernel_dx=lambda x, y: x - y,
        alpha=_as_weight(alpha),
        n_particles=n_particles,
        horizon=horizon,
        drift_kernel_dx=_zeros,
        drift_kernel_dy=_zeros,
        cost_kernel_dy=lambda x, y: y - x,
    )


def bounded_confidence_model(
    n_particles: int,
    horizon: float,
    radius: float,
    alpha: Callable[[float], float] | float = 1.0,
) -> ModelSpec:
    """Attraction only within |x - y| <= radius, C1-smoothed over a band of width 0.05*radius."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    eps = 0.05 * radius
    inner = radius - eps

    def smooth_window(x, y):
        r = np.abs(x - y)
        theta = np.clip((radius - r) / eps, 0.0, 1.0)
        return theta * theta * (3.0 - 2.0 * theta)

    def window_slope(x, y):
        # d/dr of the smoothstep, chain rule applied to r = |x - y|
        r = np.abs(x - y)
        theta = (radius - r) / eps
        inside = (r > inner) & (r < radius)
        return np.where(inside, -6.0 * theta * (1.0 - theta) / eps, 0.0)

    return ModelSpec(
        drift_kernel=smooth_window,
        cost_kernel=lambda x, y: 0.5 * (x - y) ** 2,
        cost_kernel_dx=lambda x, y: x - y,
        alpha=_as_weight(alpha),
        n_particles=n_particles,
        horizon=horizon,
        drift_kernel_dx=lambda x, y: window_slope(x, y) * np.sign(x - y),
        drift_kernel_dy=lambda x, y: window_slope(x, y) * np.sign(y - x),
        cost_kernel_dy=lambda x, y: y - x,
    )


def polynomial_model(
    n_particles: int,
    horizon: float,
    drift_coeffs: np.ndarray,
    cost_coeffs: np.ndarray,
    alpha: Callable[[float], float] | float = 1.0,
) -> ModelSpec:
    """Kernels from coefficient tables: P(x,y) = sum_ab C[a,b] x^a y^b, likewise phi."""
    drift_coeffs = np.atleast_2d(np.asarray(drift_coeffs, dtype=float))
    cost_coeffs = np.atleast_2d(np.asarray(cost_coeffs, dtype=float))
    return ModelSpec(
        drift_kernel=_poly_kernel(drift_coeffs),
        cost_kernel=_poly_kernel(cost_coeffs),
        cost_kernel_dx=_poly_kernel(_poly_diff_rows(cost_coeffs)),
        alpha=_as_weight(alpha),
        n_particles=n_particles,
        horizon=horizon,
        drift_kernel_dx=_poly_kernel(_poly_diff_rows(drift_coeffs)),
        drift_kernel_dy=_poly_kernel(_poly_diff_cols(drift_coeffs)),
        cost_kernel_dy=_poly_kernel(_poly_diff_cols(cost_coeffs)),
    )


def _as_weight(alpha) -> Callable[[float], float]:
    if callable(alpha):
        return alpha
    value = float(alpha)
    return lambda t: value


def _poly_kernel(coeffs: np.ndarray) -> Kernel:
    def kernel(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape, y.shape))
        for a in range(coeffs.shape[0]):
            for b in range(coeffs.shape[1]):
                c = coeffs[a, b]
                if c != 0.0:
                    out = out + c * x**a * y**b
        return out

    return kernel


def _poly_diff_rows(coeffs: np.ndarray) -> np.ndarray:
    """Coefficient table of d/dx."""
    if coeffs.shape[0] == 1:
        return np.zeros((1, coeffs.shape[1]))
    rows = np.arange(1, coeffs.shape[0])
    return coeffs[1:, :] * rows[:, None]


def _poly_diff_cols(coeffs: np.ndarray) -> np.ndarray:
    """Coefficient table of d/dy."""
    if coeffs.shape[1] == 1:
        return np.zeros((coeffs.shape[0], 1))
    cols = np.arange(1, coeffs.shape[1])
    return coeffs[:, 1:] * cols[None, :]
