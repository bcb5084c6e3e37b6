"""Mild solutions with nonlocal initial data by successive approximation.

The fixed-point map acting on a whole trajectory ``x`` is

    (Psi x)(s) = R(s) h(x) + int_0^s R(s - t) [f(t, x(t)) + C u(t)] dt
                 + int_0^s R(s - t) g(t, x(t)) dW(t),

with ``h(x) = int_0^c zeta(t, x(t)) dt`` and ``u`` the steering control
synthesized from the same iterate. With a freezing parameter ``gamma > 0``
the nonlinear terms and the control see ``N_gamma x`` (``x`` held constant at
``x(gamma)`` on ``[0, gamma]``) instead of ``x``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .control import (
    RegularizedInverse,
    assemble_gramian,
    control_from_bracket,
    steering_bracket,
)
from .errors import ConvergenceError, DivergenceError, NumericalError
from .spectral_model import eval_nonlinearity
from .stochastic import det_convolution_all, ito_convolution_all

__all__ = [
    "Trajectory",
    "SolveOptions",
    "SolveResult",
    "MildMap",
    "GammaStudy",
    "picard_solve",
    "apply_N_gamma",
    "freeze_states",
    "gamma_sequence_solve",
    "feasibility_check",
    "trajectory_distance",
    "write_trajectory_csv",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: object
    states: np.ndarray  # (m + 1, N)
    path_index: int = 0
    gamma: float = 0.0  # snapped freezing point, 0 when unfrozen

    @property
    def terminal(self):
        return self.states[-1]


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-8
    max_iter: int = 200
    gamma: float = 0.0
    damping: float = 1.0
    blowup_radius: float = 1e8  # guard on ||x(s)||^2

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")


@dataclass
class SolveResult:
    trajectory: Trajectory
    control: object  # ControlSignal or None
    iterations: int
    residuals: list = field(default_factory=list)
    h_value: np.ndarray = None

    @property
    def tail_ratio(self):
        """Largest ratio of successive residuals over the last three iterations."""
        res = [r for r in self.residuals if r > 0]
        if len(res) < 4:
            return 0.0
        tail = np.asarray(res[-4:])
        return float(np.max(tail[1:] / tail[:-1]))


def freeze_states(states, j_gamma):
    """Copy of ``states`` held at row ``j_gamma`` on rows ``0..j_gamma``."""
    out = np.array(states, dtype=float)
    if j_gamma > 0:
        out[:j_gamma] = out[j_gamma]
    return out


def apply_N_gamma(traj, gamma):
    """Freeze ``traj`` at ``gamma`` (snapped to the nearest node)."""
    grid = traj.grid
    if not 0 <= gamma < grid.horizon:
        raise ValueError(f"gamma must lie in [0, c), got {gamma}")
    j = grid.snap(gamma)
    return Trajectory(grid, freeze_states(traj.states, j), traj.path_index, j * grid.dt)


class MildMap:
    """The fixed-point map for one model, resolvent table, target and path.

    ``problem=None`` runs without control (``u = 0``).
    """

    def __init__(self, model, table, problem, path, gamma=0.0, inverse=None):
        self.model, self.table, self.problem, self.path = model, table, problem, path
        self.grid = table.grid
        self.j_gamma = self.grid.snap(gamma) if gamma > 0 else 0
        spec = model.nonlinearity
        self._zero = {w: spec.is_zero(w) for w in ("f", "g", "zeta")}
        self._col = self.grid.nodes[:, None]
        self._Cmat = model.control_matrix()
        if problem is not None and inverse is None:
            inverse = RegularizedInverse(assemble_gramian(table, model.control), problem.mu)
        self.inverse = inverse
        self._realized = None if problem is None else problem.realize(path)

    def _eval(self, which, states):
        if self._zero[which]:
            return None
        return eval_nonlinearity(self.model.nonlinearity, which, self._col, states)

    def __call__(self, states):
        """Return ``(Psi(states), control, h)``."""
        xs = freeze_states(states, self.j_gamma) if self.j_gamma else states
        F = self._eval("f", xs)
        G = self._eval("g", xs)
        Z = self._eval("zeta", xs)
        n = self.model.n_modes
        h = np.zeros(n) if Z is None else self.grid.trapezoid(Z, axis=0)
        forcing = np.zeros_like(states) if F is None else F
        control = None
        if self.problem is not None:
            b = steering_bracket(self.problem, self.table, self.path, h, F, G, self._realized)
            control = control_from_bracket(b, self.table, self._Cmat, self.inverse)
            forcing = forcing + control.values @ self._Cmat.T
        out = self.table.values.T * h
        if F is not None or control is not None:
            out = out + det_convolution_all(self.table, forcing)
        if G is not None:
            out = out + ito_convolution_all(self.table, G, self.path)
        return out, control, h

    def residual(self, states):
        image, _, _ = self(states)
        return float(np.max(np.linalg.norm(image - states, axis=1)))


def picard_solve(model, table, problem, path, opts=None, inverse=None, initial=None):
    """Successive approximation of the controlled mild solution.

    Returns a :class:`SolveResult` whose trajectory ``x`` satisfies
    ``max_j ||Psi(x)(s_j) - x(s_j)|| <= opts.tol``.

    Raises
    ------
    ConvergenceError
        ``opts.max_iter`` iterations without reaching ``opts.tol``.
    DivergenceError
        An iterate left the guard ball ``||x(s)||^2 <= opts.blowup_radius``.
    """
    opts = SolveOptions() if opts is None else opts
    psi = MildMap(model, table, problem, path, opts.gamma, inverse)
    grid = table.grid
    x = np.zeros((grid.steps + 1, model.n_modes)) if initial is None else np.array(initial, float)
    residuals = []
    for k in range(1, opts.max_iter + 1):
        image, control, h = psi(x)
        if not np.all(np.isfinite(image)):
            raise NumericalError(f"non-finite iterate at iteration {k}")
        peak = float(np.max(np.sum(image**2, axis=1)))
        if peak > opts.blowup_radius:
            raise DivergenceError(
                f"iterate left the guard ball at iteration {k}: "
                f"max ||x||^2 = {peak:.3e} > {opts.blowup_radius:.3e}",
                radius=peak, iterations=k,
            )
        res = float(np.max(np.linalg.norm(image - x, axis=1)))
        residuals.append(res)
        log.debug("picard iteration %d residual %.3e", k, res)
        if res <= opts.tol:
            traj = Trajectory(grid, x, path.index, psi.j_gamma * grid.dt)
            return SolveResult(traj, control, k, residuals, h)
        x = image if opts.damping == 1.0 else (1.0 - opts.damping) * x + opts.damping * image
    raise ConvergenceError(
        f"no convergence in {opts.max_iter} iterations (last residual {residuals[-1]:.3e})",
        residual=residuals[-1], iterations=opts.max_iter,
    )


def trajectory_distance(a, b):
    """``max_j ||a(s_j) - b(s_j)||``."""
    sa = a.states if isinstance(a, Trajectory) else a
    sb = b.states if isinstance(b, Trajectory) else b
    return float(np.max(np.linalg.norm(sa - sb, axis=1)))


@dataclass
class GammaStudy:
    gammas: list           # snapped freezing points
    results: list          # SolveResult or the exception raised
    reference: object      # unfrozen SolveResult or exception
    distance_to_reference: list
    successive_distance: list


def gamma_sequence_solve(model, table, problem, path, gammas, opts=None, inverse=None):
    """Solve the frozen problems for a decreasing list of ``gamma`` values.

    Failures are recorded per entry (as the exception) and the sequence
    continues; distances involving a failed solve are ``nan``.
    """
    gammas = [float(g) for g in gammas]
    if any(not 0 < g < table.grid.horizon for g in gammas):
        raise ValueError("gamma values must lie in (0, c)")
    if any(b >= a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gamma values must be strictly decreasing")
    opts = SolveOptions() if opts is None else opts
    if problem is not None and inverse is None:
        inverse = RegularizedInverse(assemble_gramian(table, model.control), problem.mu)

    def attempt(gamma):
        try:
            return picard_solve(model, table, problem, path, replace(opts, gamma=gamma), inverse)
        except NumericalError as exc:
            log.warning("gamma=%g solve failed: %s", gamma, exc)
            return exc

    reference = attempt(0.0)
    results = [attempt(g) for g in gammas]

    def dist(a, b):
        if isinstance(a, Exception) or isinstance(b, Exception):
            return float("nan")
        return trajectory_distance(a.trajectory, b.trajectory)

    return GammaStudy(
        gammas=[table.grid.snap(g) * table.grid.dt for g in gammas],
        results=results,
        reference=reference,
        distance_to_reference=[dist(r, reference) for r in results],
        successive_distance=[dist(a, b) for a, b in zip(results, results[1:])],
    )


def feasibility_check(model, envelope, Ku, r, M=1.0, M_C=None):
    """Ball-invariance inequality for radius ``r``; returns ``(lhs <= r, lhs)``.

    Only sufficiency is claimed: a ``False`` does not rule out a mild
    solution in ``B_r``.
    """
    if not r > 0:
        raise ValueError("r must be > 0")
    c = model.horizon
    trQ = model.noise.trace
    M_C = model.control.norm(model.n_modes) if M_C is None else M_C
    lhs = (
        3.0 * M**2 * c * envelope.omega_zeta(r) * envelope.tau_zeta.l1_norm(c)
        + 6.0 * M**2 * c * (2.0 * envelope.omega_f(r) * envelope.tau_f.l1_norm(c)
                            + M_C**2 * c * Ku)
        + 3.0 * trQ * np.sqrt(c) * envelope.omega_g(r) * envelope.tau_g.l1_norm(c)
    )
    return bool(lhs <= r), float(lhs)


def write_trajectory_csv(traj, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sigma"] + [f"x_{n + 1}" for n in range(traj.states.shape[1])])
        for s, row in zip(traj.grid.nodes, traj.states):
            w.writerow([f"{s:.17g}"] + [f"{x:.17g}" for x in row])
