"""Deterministic solvers for the nonlinear front equation and its linearization.

The strong form of the population equation is, per model,

    du/dt = (motion generator - 1) u + reaction(u),

with reaction ``u**2`` (binary at parent), the offspring generating function
(random litter at parent), or ``u * (b conv u)`` (one displaced child).  Time
stepping is classical fourth-order Runge-Kutta under an explicit stability
bound; nonlocal terms are lattice correlations computed against the field
extended by constant values beyond the grid, with a fast transform on the
padded interior.

The mild (integral) form is solved by successive substitution from zero,
which converges monotonically to the minimal solution; explicit forms of the
free semigroup and branching integral are implemented for the constant-motion
laws and the pure-jump binary law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import (
    DomainError,
    FitError,
    GridTooSmallError,
    IterationLimitError,
    NoFrontError,
    RangeOverflowError,
    StepSizeError,
    UnsupportedModelError,
)
from .kernels import INF, Kernel
from .model import (
    BINARY_AT_PARENT,
    BINARY_ONE_DISPLACED,
    BROWNIAN,
    CONSTANT,
    OFFSPRING_AT_PARENT,
    PURE_JUMP,
    BranchingModel,
    log_laplace,
)

OVERSHOOT_CLAMP = 1e-10
OVERSHOOT_ERROR = 1e-6


@dataclass(frozen=True)
class Grid:
    """Uniform spatial grid with a power-of-two point count."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2 or self.n_points & (self.n_points - 1):
            raise DomainError("n_points must be a power of two")
        if not self.x_max > self.x_min:
            raise DomainError("grid must have positive extent")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n_points": self.n_points}


@dataclass(frozen=True)
class Field:
    """Gridded solution values at one time, extended by constants off-grid."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0
    left_limit: float = 0.0
    right_limit: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise DomainError("values must match the grid")
        object.__setattr__(self, "values", v)

    def with_values(self, values, t=None) -> "Field":
        return Field(self.grid, values, self.t if t is None else t, self.left_limit, self.right_limit)

    @staticmethod
    def heaviside(grid: Grid) -> "Field":
        return Field(grid, (grid.xs >= 0).astype(float), 0.0, 0.0, 1.0)

    @staticmethod
    def constant(grid: Grid, value: float, t: float = 0.0) -> "Field":
        return Field(grid, np.full(grid.n_points, float(value)), t, value, value)


@dataclass(frozen=True)
class FrontTrace:
    """Level-crossing positions of a moving front over time."""

    t: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        m = np.asarray(self.m, dtype=float)
        if t.shape != m.shape:
            raise DomainError("time and position arrays must match")
        if np.any(np.diff(t) <= 0):
            raise DomainError("front trace must be strictly time-sorted")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "m", m)


@dataclass(frozen=True)
class FrontFit:
    """Least-squares fit ``m(t) = c_est t + log_slope ln t + intercept``."""

    c_est: float
    log_slope: float
    intercept: float
    expected_log_slope: float


# -- lattice correlation -------------------------------------------------------


def _correlate(weights: np.ndarray, values: np.ndarray, left: float, right: float) -> np.ndarray:
    """``out[i] = sum_j w[K+j] values_ext(i+j)`` with constant extension.

    ``weights`` has odd length ``2K+1``; padding the field with ``K`` copies
    of each limit makes the boundary sums exact.
    """
    k = (weights.size - 1) // 2
    padded = np.concatenate(
        [np.full(k, left), values, np.full(k, right)]
    )
    if padded.size * weights.size <= (1 << 18):
        return np.convolve(padded, weights[::-1], mode="valid")
    return fftconvolve(padded, weights[::-1], mode="valid")


def convolve(kernel: Kernel, field: Field) -> Field:
    """Kernel average of a field: ``(a conv u)(x) = int a(z) u(x+z) dz``.

    The orientation matches a jump from ``x`` landing at ``x + z`` with
    density ``a(z)``; for the symmetric named families it coincides with the
    ordinary convolution.
    """
    radius = kernel.truncation_radius()
    if radius > 0.5 * (field.grid.x_max - field.grid.x_min):
        raise GridTooSmallError(
            f"kernel radius {radius:.3g} exceeds half the grid extent"
        )
    w = kernel.lattice_weights(field.grid.dx)
    return field.with_values(_correlate(w, field.values, field.left_limit, field.right_limit))


# -- strong-form stepping --------------------------------------------------------


class _Stepper:
    """Cached right-hand side of the strong form on one grid."""

    def __init__(self, model: BranchingModel, grid: Grid, left: float, right: float):
        self.model = model
        self.grid = grid
        self.left = left
        self.right = right
        dx = grid.dx
        self.inv_dx2 = 1.0 / (dx * dx)
        self.w_jump = None
        self.w_disp = None
        if model.motion.kind == PURE_JUMP:
            radius = model.motion.kernel.truncation_radius()
            if radius > 0.5 * (grid.x_max - grid.x_min):
                raise GridTooSmallError("jump kernel radius exceeds half the grid extent")
            self.w_jump = model.motion.kernel.lattice_weights(dx)
        if model.law.kind == BINARY_ONE_DISPLACED:
            radius = model.law.displacement.truncation_radius()
            if radius > 0.5 * (grid.x_max - grid.x_min):
                raise GridTooSmallError("displacement kernel radius exceeds half the grid extent")
            self.w_disp = model.law.displacement.lattice_weights(dx)

    def stability_bound(self) -> float:
        if self.model.motion.kind == BROWNIAN:
            return 0.2 * min(1.0, self.grid.dx**2)
        return 0.1

    def rhs(self, u: np.ndarray) -> np.ndarray:
        motion = self.model.motion
        if motion.kind == CONSTANT:
            acc = -u
        elif motion.kind == BROWNIAN:
            lap = np.empty_like(u)
            lap[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
            lap[0] = u[1] - 2.0 * u[0] + self.left
            lap[-1] = self.right - 2.0 * u[-1] + u[-2]
            acc = 0.5 * self.inv_dx2 * lap - u
        else:
            acc = _correlate(self.w_jump, u, self.left, self.right) - 2.0 * u
        law = self.model.law
        if law.kind == BINARY_AT_PARENT:
            return acc + u * u
        if law.kind == OFFSPRING_AT_PARENT:
            return acc + law.generating_function(u)
        return acc + u * _correlate(self.w_disp, u, self.left, self.right)

    def step(self, u: np.ndarray, dt: float) -> np.ndarray:
        k1 = self.rhs(u)
        k2 = self.rhs(u + 0.5 * dt * k1)
        k3 = self.rhs(u + 0.5 * dt * k2)
        k4 = self.rhs(u + dt * k3)
        return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_range(values: np.ndarray) -> np.ndarray:
    overshoot = max(float(-values.min()), float(values.max() - 1.0), 0.0)
    if overshoot > OVERSHOOT_ERROR:
        raise StepSizeError(
            f"solution left [0, 1] by {overshoot:.3g}; reduce the time step"
        )
    if 0.0 < overshoot < OVERSHOOT_CLAMP:
        return np.clip(values, 0.0, 1.0)
    return values


def pde_step(model: BranchingModel, field: Field, dt: float) -> Field:
    """One Runge-Kutta step of the strong form.

    ``dt`` must respect the explicit stability bound (0.2 min(1, dx^2) for
    Brownian motion, 0.1 otherwise).  Values are clamped to [0, 1] only when
    the overshoot is below 1e-10; larger departures raise ``StepSizeError``.
    """
    stepper = _Stepper(model, field.grid, field.left_limit, field.right_limit)
    if dt > stepper.stability_bound() * (1.0 + 1e-12):
        raise StepSizeError(
            f"dt = {dt:.3g} exceeds the stability bound {stepper.stability_bound():.3g}"
        )
    values = _check_range(stepper.step(field.values, dt))
    return field.with_values(values, field.t + dt)


def evolve(model: BranchingModel, field: Field, t_end: float, dt: float) -> Field:
    """March the strong form to ``t_end`` in uniform steps of at most ``dt``."""
    if t_end < field.t:
        raise DomainError("t_end must not precede the field time")
    stepper = _Stepper(model, field.grid, field.left_limit, field.right_limit)
    if dt > stepper.stability_bound() * (1.0 + 1e-12):
        raise StepSizeError("dt exceeds the stability bound")
    span = t_end - field.t
    if span == 0:
        return field
    n_steps = max(1, int(math.ceil(span / dt - 1e-12)))
    h = span / n_steps
    u = field.values
    for _ in range(n_steps):
        u = _check_range(stepper.step(u, h))
    return field.with_values(u, t_end)


def track_front(
    model: BranchingModel,
    field: Field,
    t_end: float,
    dt: float,
    record_interval: float,
    level: float = 0.5,
    snapshot_times: tuple[float, ...] = (),
) -> tuple[Field, FrontTrace, dict[float, Field]]:
    """Evolve the field while recording level-crossing positions.

    Steps are aligned so that every record time is hit exactly; snapshots of
    the full field are kept at the requested times (which must be record
    times up to rounding).
    """
    stepper = _Stepper(model, field.grid, field.left_limit, field.right_limit)
    if dt > stepper.stability_bound() * (1.0 + 1e-12):
        raise StepSizeError("dt exceeds the stability bound")
    per = max(1, int(math.ceil(record_interval / dt - 1e-12)))
    h = record_interval / per
    n_records = int(round((t_end - field.t) / record_interval))
    u = field.values
    t = field.t
    times, fronts = [], []
    snapshots: dict[float, Field] = {}
    wanted = sorted(snapshot_times)
    for _ in range(n_records):
        for _ in range(per):
            u = stepper.step(u, h)
        u = _check_range(u)
        t += record_interval
        try:
            pos = _front_position_values(field.grid.xs, u, level)
        except NoFrontError:
            continue
        times.append(t)
        fronts.append(pos)
        while wanted and t >= wanted[0] - 1e-9:
            snapshots[wanted.pop(0)] = field.with_values(u.copy(), t)
    return field.with_values(u, t), FrontTrace(np.array(times), np.array(fronts)), snapshots


# -- mild-form (integral) solver --------------------------------------------------


def picard_solve(
    model: BranchingModel,
    f: Field,
    t: float,
    n_time: int,
    max_iter: int = 80,
    tol: float = 1e-10,
    return_history: bool = False,
):
    """Minimal solution of the mild form by successive substitution from zero.

    Supported models: constant motion with any law, and pure-jump motion with
    the binary-at-parent law, where the free semigroup and the branching
    integral have explicit forms.  Iterates increase monotonically to the
    minimal solution; failure to reach ``tol`` within ``max_iter`` sweeps
    raises ``IterationLimitError`` carrying the last increment.
    """
    if np.any(f.values < 0) or np.any(f.values > 1):
        raise DomainError("initial data must lie in [0, 1]")
    if not (
        model.motion.kind == CONSTANT
        or (model.motion.kind == PURE_JUMP and model.law.kind == BINARY_AT_PARENT)
    ):
        raise UnsupportedModelError(
            "mild-form solver supports constant motion or pure-jump binary branching"
        )
    if n_time < 2:
        raise DomainError("need at least two time points")
    dt = t / (n_time - 1)
    ts = np.linspace(0.0, t, n_time)
    nx = f.grid.n_points
    decay = np.exp(-ts)

    jump_terms = None
    if model.motion.kind == PURE_JUMP:
        jump_terms = _poisson_terms(model.motion.kernel, f.grid.dx, t)
        base = np.zeros((n_time, nx))
        for p, w in enumerate(jump_terms):
            fp = _correlate(w, f.values, f.left_limit, f.right_limit) if p else f.values
            coeff = decay**2 * ts**p / math.factorial(p)
            base += coeff[:, None] * fp[None, :]
        # constant tails are invariant under unit-mass kernels
        poisson_sum = sum(
            decay**2 * ts**p / math.factorial(p) for p in range(len(jump_terms))
        )
        bl = f.left_limit * poisson_sum
        br = f.right_limit * poisson_sum
    else:
        base = decay[:, None] * f.values[None, :]
        bl = f.left_limit * decay
        br = f.right_limit * decay

    def reaction(rows: np.ndarray, left: np.ndarray, right: np.ndarray):
        law = model.law
        if law.kind == BINARY_AT_PARENT:
            return rows * rows, left * left, right * right
        if law.kind == OFFSPRING_AT_PARENT:
            return law.generating_function(rows), law.generating_function(left), law.generating_function(right)
        w = model.law.displacement.lattice_weights(f.grid.dx)
        conv = np.empty_like(rows)
        for j in range(rows.shape[0]):
            conv[j] = _correlate(w, rows[j], left[j], right[j])
        return rows * conv, left * left, right * right

    u = np.zeros((n_time, nx))
    ul = np.zeros(n_time)
    ur = np.zeros(n_time)
    history = []
    last = math.inf
    for _ in range(max_iter):
        g_rows, g_left, g_right = reaction(u, ul, ur)
        if jump_terms is None:
            ku = _causal_time_integral(decay, g_rows, dt)
            kl = _causal_time_integral(decay, g_left[:, None], dt)[:, 0]
            kr = _causal_time_integral(decay, g_right[:, None], dt)[:, 0]
        else:
            ku = np.zeros_like(u)
            scalar = np.zeros((n_time, 2))
            for p, w in enumerate(jump_terms):
                coeff = decay**2 * ts**p / math.factorial(p)
                rows_p = (
                    g_rows
                    if p == 0
                    else np.stack(
                        [_correlate(w, g_rows[j], g_left[j], g_right[j]) for j in range(n_time)]
                    )
                )
                ku += _causal_time_integral(coeff, rows_p, dt)
                scalar += _causal_time_integral(coeff, np.stack([g_left, g_right], axis=1), dt)
            kl, kr = scalar[:, 0], scalar[:, 1]
        u_new = base + ku
        ul_new = bl + kl
        ur_new = br + kr
        if return_history:
            history.append(u_new.copy())
        last = float(np.max(np.abs(u_new - u)))
        u, ul, ur = u_new, ul_new, ur_new
        if last < tol:
            out = Field(f.grid, u[-1], t, float(ul[-1]), float(ur[-1]))
            return (out, history) if return_history else out
    raise IterationLimitError(
        f"no convergence in {max_iter} sweeps (last increment {last:.3g})",
        last_increment=last,
    )


def _poisson_terms(kernel: Kernel, dx: float, horizon: float) -> list[np.ndarray]:
    """Iterated lattice kernels up to a Poisson tail below 1e-10 at ``horizon``."""
    n = 0
    acc = math.exp(-horizon)
    term = acc
    while 1.0 - acc > 1e-10:
        n += 1
        term *= horizon / n
        acc += term
        if n > 400:
            raise DomainError("Poisson truncation did not close; horizon too large")
    w1 = kernel.lattice_weights(dx)
    terms = [np.array([1.0])]
    for _ in range(n):
        terms.append(np.convolve(terms[-1], w1))
    return terms


def _causal_time_integral(coeff: np.ndarray, rows: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid-in-time causal convolution ``int_0^{t_j} coeff(s) rows(t_j - s) ds``."""
    n = coeff.size
    size = 1
    while size < 2 * n:
        size <<= 1
    fc = np.fft.rfft(coeff, size)
    fr = np.fft.rfft(rows, size, axis=0)
    full = np.fft.irfft(fc[:, None] * fr, size, axis=0)[:n]
    full -= 0.5 * coeff[0] * rows
    full -= 0.5 * coeff[:, None] * rows[0][None, :]
    return dt * full


# -- linear transform solve -------------------------------------------------------


def solve_v(model: BranchingModel, lam: float, grid: Grid, t: float, dt: float) -> Field:
    """Exponentially weighted solve of the linear moment equation.

    Writing ``v(x, t) = exp(-lam x) phi(t)`` reduces the spatially
    homogeneous equation to the scalar growth ODE ``phi' = psi(lam) phi``,
    integrated by Runge-Kutta steps of at most ``dt``.
    """
    psi = log_laplace(model, lam)
    if psi == INF:
        raise DomainError("transform divergent at this argument")
    exponent = max(abs(lam * grid.x_min), abs(lam * grid.x_max)) + max(t * psi, 0.0)
    if exponent > 700.0:
        raise RangeOverflowError("requested values exceed the floating-point range")
    amp = 1.0
    if t > 0:
        n_steps = max(1, int(math.ceil(t / dt - 1e-12)))
        z = psi * (t / n_steps)
        per_step = 1.0 + z + z**2 / 2.0 + z**3 / 6.0 + z**4 / 24.0
        amp = per_step**n_steps
    values = np.exp(-lam * grid.xs) * amp
    return Field(grid, values, t, float(values[0]), float(values[-1]))


# -- front measurement -------------------------------------------------------------


def _front_position_values(xs: np.ndarray, values: np.ndarray, level: float) -> float:
    above = values >= level
    if above.all() or not above.any():
        raise NoFrontError(f"field does not cross level {level}")
    i = int(np.argmax(above))
    if i == 0:
        raise NoFrontError("level crossing lies on the grid edge")
    x0, x1 = xs[i - 1], xs[i]
    v0, v1 = values[i - 1], values[i]
    if v1 == v0:
        return float(x1)
    return float(x0 + (level - v0) * (x1 - x0) / (v1 - v0))


def front_position(field: Field, level: float = 0.5) -> float:
    """Linear interpolation of the unique level crossing of a monotone field."""
    return _front_position_values(field.grid.xs, field.values, level)


def measure_front(
    trace: FrontTrace, lambda_star: float, window: tuple[float, float]
) -> FrontFit:
    """Fit ``m(t) = c t + s ln t + b`` over a window of the front trace.

    The logarithmic coefficient of the recentered limit is
    ``-3 / (2 lambda_star)``, reported as ``expected_log_slope``.
    """
    lo, hi = window
    mask = (trace.t >= lo) & (trace.t <= hi)
    if np.count_nonzero(mask) < 10:
        raise FitError("need at least 10 trace entries inside the window")
    t = trace.t[mask]
    m = trace.m[mask]
    design = np.column_stack([t, np.log(t), np.ones_like(t)])
    sol, _, rank, _ = np.linalg.lstsq(design, m, rcond=None)
    if rank < 3:
        raise FitError("singular design matrix; widen the fit window")
    return FrontFit(float(sol[0]), float(sol[1]), float(sol[2]), -1.5 / lambda_star)


def shift_field(field: Field, shift: float) -> Field:
    """Resample a field at ``x + shift`` with constant extension."""
    xs = field.grid.xs
    values = np.interp(
        xs + shift, xs, field.values, left=field.left_limit, right=field.right_limit
    )
    return field.with_values(values)


def wave_residual(profile: Field, c: float, model: BranchingModel, dt: float) -> float:
    """Sup-norm defect of a profile as a traveling wave of speed ``c``.

    Advances one step, shifts the result back by ``c dt``, and compares with
    the original; a small residual certifies a numerical traveling wave.
    """
    stepped = pde_step(model, profile, dt)
    shifted = shift_field(stepped, c * dt)
    return float(np.max(np.abs(shifted.values - profile.values)))


def traveling_wave_profile(
    model: BranchingModel,
    c: float,
    grid: Grid,
    tol: float = 1e-11,
    max_iter: int = 40,
) -> Field:
    """Steady comoving profile at speed ``c``: solves ``rhs(u) + c u' = 0``.

    A short step-and-recenter relaxation provides the initial guess, then
    Newton iteration (dense Jacobian, central-difference transport, phase
    pinned at the half level) drives the comoving residual below ``tol``.
    Evolving the returned profile and shifting back by ``c dt`` leaves only
    discretization error, so it is the right object for residual tests.

    Finite-time evolution cannot produce this profile: the front relaxes to
    its limiting speed only algebraically, which leaves a resolution-
    independent speed deficit in any evolved snapshot.
    """
    xs = grid.xs
    dx = grid.dx
    n = grid.n_points
    stepper = _Stepper(model, grid, 0.0, 1.0)
    values = 1.0 / (1.0 + np.exp(-xs))
    dt = 0.5 * stepper.stability_bound()
    for _ in range(int(20.0 / dt)):
        values = stepper.step(values, dt)
        pos = _front_position_values(xs, values, 0.5)
        values = np.interp(xs + pos, xs, values, left=0.0, right=1.0)

    i0 = int(np.argmin(np.abs(xs)))
    transport = _shift_operator_matrix(n, c / (2.0 * dx))

    def comoving_residual(u):
        du = np.empty_like(u)
        du[1:-1] = u[2:] - u[:-2]
        du[0] = u[1] - 0.0
        du[-1] = 1.0 - u[-2]
        return stepper.rhs(u) + c * du / (2.0 * dx)

    converged = False
    for _ in range(max_iter):
        f = comoving_residual(values)
        f[i0] = values[i0] - 0.5  # phase pin replaces the (redundant) equation here
        if float(np.max(np.abs(f))) < tol:
            converged = True
            break
        jac = _rhs_jacobian(stepper, values) + transport
        jac[i0, :] = 0.0
        jac[i0, i0] = 1.0
        step = np.linalg.solve(jac, f)
        values = values - step
        if float(np.max(np.abs(step))) < 1e-13:
            converged = True
            break
    if not converged:
        raise IterationLimitError(
            "comoving Newton iteration did not converge",
            last_increment=float(np.max(np.abs(comoving_residual(values)))),
        )
    return Field(grid, np.clip(values, 0.0, 1.0), 0.0, 0.0, 1.0)


def _shift_operator_matrix(n: int, coeff: float) -> np.ndarray:
    m = np.zeros((n, n))
    idx = np.arange(n - 1)
    m[idx, idx + 1] = coeff
    m[idx + 1, idx] = -coeff
    return m


def _toeplitz_from_weights(weights: np.ndarray, n: int) -> np.ndarray:
    """Dense matrix of the lattice correlation ``(w ** u)_i = sum w[K+j] u_{i+j}``."""
    k = (weights.size - 1) // 2
    m = np.zeros((n, n))
    for j in range(-k, k + 1):
        v = weights[k + j]
        if j >= 0:
            idx = np.arange(n - j)
            m[idx, idx + j] = v
        else:
            idx = np.arange(-j, n)
            m[idx, idx + j] = v
    return m


def _rhs_jacobian(stepper: _Stepper, u: np.ndarray) -> np.ndarray:
    """Dense Jacobian of the strong-form right-hand side at ``u``."""
    n = u.size
    model = stepper.model
    motion = model.motion
    if motion.kind == CONSTANT:
        jac = -np.eye(n)
    elif motion.kind == BROWNIAN:
        jac = -np.eye(n)
        half = 0.5 * stepper.inv_dx2
        idx = np.arange(n)
        jac[idx, idx] += -2.0 * half
        jac[idx[:-1], idx[:-1] + 1] += half
        jac[idx[1:], idx[1:] - 1] += half
    else:
        jac = _toeplitz_from_weights(stepper.w_jump, n) - 2.0 * np.eye(n)
    law = model.law
    if law.kind == BINARY_AT_PARENT:
        jac[np.arange(n), np.arange(n)] += 2.0 * u
    elif law.kind == OFFSPRING_AT_PARENT:
        ns, ps = law.counts_and_probs()
        deriv = np.zeros_like(u)
        for count, p in zip(ns, ps):
            if count >= 1:
                deriv += p * count * u ** (int(count) - 1)
        jac[np.arange(n), np.arange(n)] += deriv
    else:
        conv = _correlate(stepper.w_disp, u, 0.0, 1.0)
        jac[np.arange(n), np.arange(n)] += conv
        jac += u[:, None] * _toeplitz_from_weights(stepper.w_disp, n)
    return jac
